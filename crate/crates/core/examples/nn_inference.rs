//! Distance-weighted nearest-neighbour prediction and radius selection on a
//! hand-made representation where the label is the first coordinate.

use rmetric::inference::{kernel_weight, tune_radius, EmbeddingIndex, RadiusGrid};
use rmetric::Matrix;

fn main() -> rmetric::Result<()> {
    // labels live on a line; the second coordinate is a small wobble
    let n = 200;
    let rows: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            [t, 0.02 * (40.0 * t).sin()]
        })
        .collect();
    let labels: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (train_rows, val_rows): (Vec<_>, Vec<_>) =
        rows.iter().enumerate().partition(|(i, _)| i % 4 != 0);
    let pick = |v: &[(usize, &[f64; 2])]| -> rmetric::Result<(Matrix, Matrix)> {
        let f = Matrix::from_rows(&v.iter().map(|(_, r)| **r).collect::<Vec<_>>())?;
        let y = Matrix::column(&v.iter().map(|(i, _)| labels[*i]).collect::<Vec<_>>())?;
        Ok((f, y))
    };
    let (train_f, train_y) = pick(&train_rows)?;
    let (val_f, val_y) = pick(&val_rows)?;

    let choice = tune_radius(&train_f, &train_y, &val_f, &val_y, &RadiusGrid::default())?;
    println!("radius grid ({} candidates):", choice.evaluated.len());
    for (r, mae) in choice.evaluated.iter().step_by(4) {
        println!("  r {r:.5}  val MAE {mae:.6}");
    }
    println!(
        "chosen r {:.5} with val MAE {:.6}",
        choice.radius, choice.val_mae
    );

    let index = EmbeddingIndex::new(train_f, train_y, choice.radius)?;
    let mut queries: Vec<(Vec<f64>, f64)> = [5, 20, 31]
        .iter()
        .map(|&i| (val_f.row(i).to_vec(), val_y.get(i, 0)))
        .collect();
    queries.push((vec![3.0, 0.0], f64::NAN));
    for (q, truth) in queries {
        let p = index.predict(&q)?;
        println!(
            "query ({:.4}, {:.4}) true {truth:.4} -> {:.5} from {} neighbours{}",
            q[0],
            q[1],
            p.label[0],
            p.neighbors,
            if p.extrapolated {
                " (outside every neighbourhood: nearest label)"
            } else {
                ""
            }
        );
    }
    println!(
        "kernel weight at r/3 is {:.5}, at r it is {:.5}",
        kernel_weight(choice.radius / 3.0, choice.radius),
        kernel_weight(choice.radius, choice.radius)
    );
    Ok(())
}
