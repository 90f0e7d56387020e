//! Draws both synthetic manifolds, writes them as CSV with a metadata
//! sidecar and reads them back.
//!
//! ```text
//! cargo run --example generate_dataset -- /tmp/rmetric-data
//! ```

use std::path::PathBuf;

use rmetric::data::{generate, Dataset, DatasetKind, Split};

fn main() -> rmetric::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rmetric-data"));
    std::fs::create_dir_all(&dir)?;

    for (kind, d_x) in [(DatasetKind::Curve1d, 10), (DatasetKind::Surface2d, 12)] {
        let ds = generate(kind, 1000, d_x, 0.01, 7)?;
        let path = dir.join(format!("{kind}.csv"));
        ds.save(&path)?;
        let back = Dataset::load(&path)?;
        assert_eq!(back, ds);

        println!(
            "{kind}: n={} d_x={} d_y={} train/val/test={}/{}/{}",
            ds.len(),
            ds.d_x(),
            ds.d_y(),
            ds.indices(Split::Train).len(),
            ds.indices(Split::Val).len(),
            ds.indices(Split::Test).len()
        );
        println!(
            "  label mean {:?}, sd {:?}",
            ds.norm_params.mean, ds.norm_params.scale
        );
        println!("  first input row {:?}", &ds.x.row(0)[..4]);
        println!("  written to {}", path.display());
    }
    Ok(())
}
