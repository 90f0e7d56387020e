//! Trains the encoder with the metric loss on the 1-D curve, prints the
//! validation trace and checks how isometric the test representation is.
//!
//! ```text
//! cargo run --release --example train_rm -- [iterations] [checkpoint.json]
//! ```

use rmetric::checkpoint::Checkpoint;
use rmetric::data::{generate, DatasetKind, Split};
use rmetric::metrics::{isometry_correlation, residual_variance, DEFAULT_K_CANDIDATES};
use rmetric::trainer::{train, Mode, TrainConfig};

fn main() -> rmetric::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let out = args.next();

    let ds = generate(DatasetKind::Curve1d, 2000, 10, 0.01, 0)?;
    let mut cfg = TrainConfig::new(Mode::Rm, iterations, 0);
    cfg.lr = 1e-3;
    let outcome = train(&ds, &cfg)?;

    for r in outcome.log.iter().filter(|r| r.val_mae.is_some()) {
        println!(
            "iter {:5}  loss {:.5}  lbar {:.5}  s {:.4}  selected {:.3}  val MAE {:.5}  r {:.4}",
            r.iteration,
            r.loss,
            r.lbar.unwrap_or(f64::NAN),
            r.scale.unwrap_or(f64::NAN),
            r.selected_fraction.unwrap_or(f64::NAN),
            r.val_mae.unwrap_or(f64::NAN),
            r.radius.unwrap_or(f64::NAN)
        );
    }
    println!(
        "selected iteration {} (val MAE {:.5}), radius {:.5}",
        outcome.best_iteration,
        outcome.best_val_mae,
        outcome.radius.as_ref().map_or(f64::NAN, |c| c.radius)
    );

    let (x_test, y_test) = ds.part(Split::Test);
    let f_test = outcome.encoder.embed(&x_test)?;
    let rv = residual_variance(&f_test, &y_test, &DEFAULT_K_CANDIDATES)?;
    let rho = isometry_correlation(&f_test, &y_test, outcome.loss_state.scale())?;
    println!(
        "test residual variance {:.5} (k={}), distance correlation {rho:.5}",
        rv.rv, rv.best_k
    );

    if let Some(path) = out {
        let ck = Checkpoint::from_outcome(
            &outcome,
            Mode::Rm,
            &ds.norm_params,
            serde_json::to_value(&cfg)?,
        );
        ck.save(path.as_ref())?;
        println!("checkpoint written to {path}");
    }
    Ok(())
}
