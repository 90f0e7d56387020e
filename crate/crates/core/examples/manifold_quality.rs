//! Residual variance and D5 for three representations of the same labels:
//! an exact isometry, a rolled-up spiral (neighbourhoods kept, distances
//! stretched unevenly) and a random scramble.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rmetric::metrics::{
    d5, geodesic_distances, knn_graph, residual_variance, DEFAULT_K_CANDIDATES,
};
use rmetric::Matrix;

fn main() -> rmetric::Result<()> {
    let n = 300;
    let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let y = Matrix::column(&t)?;

    let line = Matrix::from_rows(&t.iter().map(|&v| [v, 0.0]).collect::<Vec<_>>())?;
    // arc length grows with t, but faster on the outer turns
    let spiral = Matrix::from_rows(
        &t.iter()
            .map(|&v| {
                let a = 3.0 * std::f64::consts::PI * v;
                [(1.0 + a) * a.cos() / 10.0, (1.0 + a) * a.sin() / 10.0]
            })
            .collect::<Vec<_>>(),
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let scrambled = line.select_rows(&order);

    // even rows act as "training" for D5
    let even: Vec<usize> = (0..n).step_by(2).collect();
    let odd: Vec<usize> = (1..n).step_by(2).collect();
    for (name, f) in [
        ("line", &line),
        ("spiral", &spiral),
        ("scrambled", &scrambled),
    ] {
        let rv = residual_variance(f, &y, &DEFAULT_K_CANDIDATES)?;
        let d = d5(
            &f.select_rows(&odd),
            &y.select_rows(&odd),
            &f.select_rows(&even),
            &y.select_rows(&even),
        )?;
        let per_k: Vec<String> = rv
            .per_k
            .iter()
            .map(|p| format!("k={}:{:.4}", p.k, p.rv))
            .collect();
        println!(
            "{name:10} RV {:.5} (best k={})  D5 {d:.5}  [{}]",
            rv.rv,
            rv.best_k,
            per_k.join(" ")
        );
    }

    let g = geodesic_distances(&knn_graph(&spiral, 5)?);
    println!(
        "spiral end-to-end: geodesic {:.4} vs straight line {:.4}",
        g.distances.get(0, n - 1),
        rmetric::linalg::euclidean(spiral.row(0), spiral.row(n - 1))
    );
    Ok(())
}
