//! Step-by-step evaluation of the metric loss on a three-sample batch:
//! pair residuals and weights, the mining threshold, the selected pairs,
//! the loss and its gradient.

use rmetric::rmloss::{mine_mask, pair_terms, rm_loss, rm_loss_backward, LossConfig, LossState};
use rmetric::Matrix;

fn print_matrix(name: &str, m: &Matrix) {
    println!("{name}:");
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:9.5}")).collect();
        println!("  [{}]", cells.join(" "));
    }
}

fn main() -> rmetric::Result<()> {
    let f = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])?;
    let y = Matrix::column(&[0.0, 1.0, 2.0])?;
    let cfg = LossConfig {
        sigma: 1.0,
        alpha: 0.1,
        ..LossConfig::default()
    };
    let mut state = LossState::default();

    let mut batch = pair_terms(&f, &y, &state, &cfg)?;
    print_matrix("representation distances", &batch.feature_dist);
    print_matrix("label distances", &batch.label_dist);
    print_matrix("residuals |s·df − dy|", &batch.residual);
    print_matrix("weights", &batch.weight);

    let step = mine_mask(&mut batch, &mut state, &cfg);
    println!("batch mean of weighted residuals {:.6}", step.batch_mean);
    println!("threshold after the update       {:.6}", step.lbar);
    println!(
        "selected {} of {} ordered pairs",
        batch.pair_count_selected,
        batch.pair_count()
    );
    print_matrix("mask", &batch.mask);

    println!("loss {:.6}", rm_loss(&batch));
    let (grad, d_log_s) = rm_loss_backward(&batch, &f)?;
    print_matrix("dL/df", &grad);
    println!("dL/dlog_s {d_log_s:.6}");

    // a second, identical batch: the threshold moves towards the new mean
    let mut again = pair_terms(&f, &y, &state, &cfg)?;
    let step = mine_mask(&mut again, &mut state, &cfg);
    println!(
        "second step threshold {:.6} (selected {})",
        step.lbar, again.pair_count_selected
    );
    Ok(())
}
