//! Sweeps sigma, alpha and mining one factor at a time from a JSON config
//! and prints the resulting table.
//!
//! ```text
//! cargo run --release --example ablation -- [config.json]
//! ```

use std::path::PathBuf;

use rmetric::cli::{run_ablate, ExperimentConfig};

fn main() -> rmetric::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/ablation.json")
        });
    let cfg = ExperimentConfig::load(&path, None)?;
    let (rows, _) = run_ablate(&cfg)?;
    println!(
        "{:34} {:>9} {:>8} {:>9} {:>9}",
        "cell", "MAE", "R2", "D5", "RV"
    );
    for r in rows {
        let m = &r.metrics;
        println!(
            "{:34} {:9.5} {:8.5} {:9.5} {:9.5}",
            r.cell.name(),
            m.mae,
            m.r2,
            m.d5,
            m.rv
        );
    }
    Ok(())
}
