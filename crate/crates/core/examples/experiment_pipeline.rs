//! The `train` and `evaluate` commands run in-process from a bundled
//! config; artifacts land in the given directory.
//!
//! ```text
//! cargo run --release --example experiment_pipeline -- [config.json] [out-dir]
//! ```

use std::path::PathBuf;

use rmetric::cli::{cmd_evaluate, cmd_train, EvaluateOptions, ExperimentConfig};
use rmetric::data::Split;

fn main() -> rmetric::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/demo_rm.json")
    });
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rmetric-demo"));

    let cfg = ExperimentConfig::load(&config, None)?;
    println!("{}", cmd_train(&cfg, &out.join("train"))?);
    let opts = EvaluateOptions {
        checkpoint: out.join("train/checkpoint.json"),
        config: None,
        dataset: None,
        split: Split::Test,
        seed: None,
    };
    println!("{}", cmd_evaluate(&opts, &out.join("eval"))?);
    Ok(())
}
