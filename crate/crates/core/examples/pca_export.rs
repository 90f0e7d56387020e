//! Trains on the 2-D surface, projects the test representation onto its
//! three leading principal components and writes a CSV for plotting.
//!
//! ```text
//! cargo run --release --example pca_export -- /tmp/surface_pca.csv
//! ```

use std::path::PathBuf;

use rmetric::data::{fmt_f64, generate, DatasetKind, Split};
use rmetric::linalg::pca_project;
use rmetric::trainer::{train, Mode, TrainConfig};

fn main() -> rmetric::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("surface_pca.csv"));
    let ds = generate(DatasetKind::Surface2d, 1500, 12, 0.01, 3)?;
    let mut cfg = TrainConfig::new(Mode::Rm, 2000, 3);
    cfg.lr = 1e-3;
    cfg.loss.sigma = 1.0;
    let outcome = train(&ds, &cfg)?;

    let (x, _) = ds.part(Split::Test);
    let labels = ds.raw_labels(Split::Test);
    let f = outcome.encoder.embed(&x)?;
    let proj = pca_project(&f, 3)?;
    let total: f64 = proj.variances.iter().sum();
    println!("component variances {:?} (sum {total:.4})", proj.variances);

    let mut w = csv::Writer::from_path(&out)?;
    w.write_record(["pc0", "pc1", "pc2", "y0", "y1"])?;
    for r in 0..proj.scores.rows() {
        let mut rec: Vec<String> = proj.scores.row(r).iter().map(|v| fmt_f64(*v)).collect();
        rec.extend(labels.row(r).iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("{} rows written to {}", proj.scores.rows(), out.display());
    Ok(())
}
