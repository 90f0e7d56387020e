//! Same encoder, data and budget for the metric loss and the MSE and L1
//! heads; compares prediction error and representation quality on the test
//! split.
//!
//! ```text
//! cargo run --release --example baseline_comparison -- [iterations] [seed]
//! ```

use rmetric::checkpoint::Checkpoint;
use rmetric::cli::evaluate;
use rmetric::data::{generate, DatasetKind, Split};
use rmetric::metrics::DEFAULT_K_CANDIDATES;
use rmetric::trainer::{train, Mode, TrainConfig};

fn main() -> rmetric::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let ds = generate(DatasetKind::Curve1d, 2000, 10, 0.01, seed)?;

    println!(
        "{:4} {:>9} {:>8} {:>9} {:>9}",
        "mode", "MAE", "R2", "D5", "RV"
    );
    for mode in [Mode::Rm, Mode::Mse, Mode::L1] {
        let mut cfg = TrainConfig::new(mode, iterations, seed);
        cfg.lr = 1e-3;
        let out = train(&ds, &cfg)?;
        let ck = Checkpoint::from_outcome(&out, mode, &ds.norm_params, serde_json::Value::Null);
        let ev = evaluate(&ck, &ds, Split::Test, &DEFAULT_K_CANDIDATES)?;
        let m = &ev.report;
        println!(
            "{:4} {:9.5} {:8.5} {:9.5} {:9.5}",
            mode.as_str(),
            m.mae,
            m.r2,
            m.d5,
            m.rv
        );
        if mode == Mode::Rm {
            println!(
                "     (always predicting the training mean: MAE {:.5})",
                ev.mean_predictor_mae
            );
        }
    }
    Ok(())
}
