//! Regression and representation-quality metrics.
//!
//! * MAE and R² on predictions.
//! * D5: mean label distance between each test sample and its five nearest
//!   training embeddings.
//! * Residual variance: `1 − ρ(G, D_Y)` where `G` holds shortest-path
//!   distances on a symmetrised k-NN graph of the test embeddings, `D_Y` the
//!   matching label distances, and `ρ` the Pearson coefficient. The smallest
//!   value over a set of candidate `k` is reported.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{euclidean, pairwise_euclidean, pearson, Matrix};

/// Metrics written by the evaluation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub r2: f64,
    pub d5: f64,
    pub rv: f64,
    pub rv_best_k: usize,
    /// Fraction of test pairs left out of the RV correlation because the
    /// best-k graph did not connect them.
    pub rv_excluded_fraction: f64,
    pub n_test: usize,
    pub extrapolated_fraction: f64,
}

fn check_pair(pred: &Matrix, y: &Matrix) -> Result<()> {
    if pred.shape() != y.shape() || pred.is_empty() {
        return Err(Error::InvalidInput(format!(
            "prediction shape {:?} vs label shape {:?}",
            pred.shape(),
            y.shape()
        )));
    }
    Ok(())
}

pub fn mae(pred: &Matrix, y: &Matrix) -> Result<f64> {
    check_pair(pred, y)?;
    let s: f64 = pred
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(s / pred.data().len() as f64)
}

/// Coefficient of determination, averaged over label dimensions.
pub fn r2(pred: &Matrix, y: &Matrix) -> Result<f64> {
    check_pair(pred, y)?;
    if y.rows() < 2 {
        return Err(Error::InvalidInput("r2 needs at least two samples".into()));
    }
    let means = y.column_means();
    let mut total = 0.0;
    for (c, mean) in means.iter().enumerate() {
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for r in 0..y.rows() {
            ss_res += (y.get(r, c) - pred.get(r, c)).powi(2);
            ss_tot += (y.get(r, c) - mean).powi(2);
        }
        if ss_tot <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "label dimension {c} has zero variance; r2 undefined"
            )));
        }
        total += 1.0 - ss_res / ss_tot;
    }
    Ok(total / means.len() as f64)
}

/// Indices of the `k` rows of `points` closest to `query`, nearest first,
/// ties broken by index.
fn nearest(points: &Matrix, query: &[f64], k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .row_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, row)| (i, euclidean(row, query)))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if all.len() > k {
        all.select_nth_unstable_by(k, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all
}

/// Averaged label distance to the five nearest training embeddings.
pub fn d5(test_f: &Matrix, test_y: &Matrix, train_f: &Matrix, train_y: &Matrix) -> Result<f64> {
    const K: usize = 5;
    if train_f.rows() < K {
        return Err(Error::InvalidInput(format!(
            "d5 needs at least {K} training points, got {}",
            train_f.rows()
        )));
    }
    if test_f.rows() != test_y.rows() || train_f.rows() != train_y.rows() {
        return Err(Error::InvalidInput("embedding/label row mismatch".into()));
    }
    if test_f.cols() != train_f.cols() || test_y.cols() != train_y.cols() {
        return Err(Error::InvalidInput("test/train dimension mismatch".into()));
    }
    if test_f.rows() == 0 {
        return Err(Error::InvalidInput(
            "d5 needs at least one test point".into(),
        ));
    }
    let mut total = 0.0;
    for t in 0..test_f.rows() {
        let nn = nearest(train_f, test_f.row(t), K, None);
        let s: f64 = nn
            .iter()
            .map(|&(i, _)| euclidean(test_y.row(t), train_y.row(i)))
            .sum();
        total += s / K as f64;
    }
    Ok(total / test_f.rows() as f64)
}

/// Undirected weighted graph as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub k: usize,
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search_by_key(&j, |e| e.0).is_ok()
    }
}

/// Symmetrised k-NN graph: `i ~ j` when either is among the other's `k`
/// nearest (ties by index). Edge weights are Euclidean distances.
pub fn knn_graph(f: &Matrix, k: usize) -> Result<KnnGraph> {
    let n = f.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "k must be in [1, {}), got {k}",
            n
        )));
    }
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, d) in nearest(f, f.row(i), k, Some(i)) {
            adjacency[i].push((j, d));
            adjacency[j].push((i, d));
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|e| e.0);
        list.dedup_by_key(|e| e.0);
    }
    Ok(KnnGraph { k, adjacency })
}

/// All-pairs shortest paths on a [`KnnGraph`].
#[derive(Debug, Clone)]
pub struct GeodesicResult {
    /// `T × T`, `+∞` for disconnected pairs.
    pub distances: Matrix,
    pub k_used: usize,
    pub connected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adjacency: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        node: source,
    });
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adjacency[node] {
            let cand = d + w;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(Frontier {
                    dist: cand,
                    node: next,
                });
            }
        }
    }
    dist
}

/// Dijkstra from every node.
pub fn geodesic_distances(graph: &KnnGraph) -> GeodesicResult {
    let n = graph.len();
    let mut out = Matrix::zeros(n, n);
    for s in 0..n {
        let row = dijkstra(&graph.adjacency, s);
        out.row_mut(s).copy_from_slice(&row);
    }
    // enforce exact symmetry; both directions agree up to summation order
    for i in 0..n {
        for j in (i + 1)..n {
            let v = out.get(i, j).min(out.get(j, i));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    let connected = out.data().iter().all(|v| v.is_finite());
    GeodesicResult {
        distances: out,
        k_used: graph.k,
        connected,
    }
}

pub const DEFAULT_K_CANDIDATES: [usize; 5] = [5, 10, 15, 20, 25];

/// Residual variance for one `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RvAtK {
    pub k: usize,
    pub rv: f64,
    pub excluded_fraction: f64,
}

/// Result of [`residual_variance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvResult {
    pub rv: f64,
    pub best_k: usize,
    pub excluded_fraction: f64,
    /// Every `k` that produced a usable value, ascending.
    pub per_k: Vec<RvAtK>,
}

/// Clips candidates to `[1, n−1]`, sorts and deduplicates them.
pub fn clip_k_candidates(candidates: &[usize], n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = candidates
        .iter()
        .filter(|&&k| k >= 1)
        .map(|&k| k.min(n.saturating_sub(1)))
        .filter(|&k| k >= 1)
        .collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Upper-triangle `(geodesic, label distance)` pairs with finite geodesic,
/// and the fraction of pairs dropped.
pub fn geodesic_label_pairs(geo: &Matrix, label_dist: &Matrix) -> (Vec<f64>, Vec<f64>, f64) {
    let n = geo.rows();
    let (mut g, mut d) = (Vec::new(), Vec::new());
    let mut dropped = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = geo.get(i, j);
            if v.is_finite() {
                g.push(v);
                d.push(label_dist.get(i, j));
            } else {
                dropped += 1;
            }
        }
    }
    let total = n * (n - 1) / 2;
    (g, d, dropped as f64 / total.max(1) as f64)
}

/// Smallest `1 − ρ(G, D_Y)` over the candidate neighbourhood sizes (ties go
/// to the smaller `k`).
pub fn residual_variance(f: &Matrix, y: &Matrix, k_candidates: &[usize]) -> Result<RvResult> {
    let n = f.rows();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "residual variance needs >= 3 points, got {n}"
        )));
    }
    if y.rows() != n {
        return Err(Error::InvalidInput("embedding/label row mismatch".into()));
    }
    let ks = clip_k_candidates(k_candidates, n);
    if ks.is_empty() {
        return Err(Error::InvalidInput("no usable k candidates".into()));
    }
    let label_dist = pairwise_euclidean(y)?;
    let mut per_k = Vec::new();
    for &k in &ks {
        let geo = geodesic_distances(&knn_graph(f, k)?);
        let (g, d, excluded) = geodesic_label_pairs(&geo.distances, &label_dist);
        if excluded > 0.5 || g.len() < 2 {
            continue;
        }
        match pearson(&g, &d) {
            Ok(rho) => per_k.push(RvAtK {
                k,
                rv: 1.0 - rho,
                excluded_fraction: excluded,
            }),
            Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let best = per_k
        .iter()
        .copied()
        .reduce(|best, cur| if cur.rv < best.rv { cur } else { best })
        .ok_or(Error::GraphDegenerate { k_candidates: ks })?;
    Ok(RvResult {
        rv: best.rv,
        best_k: best.k,
        excluded_fraction: best.excluded_fraction,
        per_k,
    })
}

/// Pearson correlation between `s·‖f_i − f_j‖` and `‖y_i − y_j‖` over all
/// pairs `i < j`.
pub fn isometry_correlation(f: &Matrix, y: &Matrix, scale: f64) -> Result<f64> {
    if f.rows() != y.rows() {
        return Err(Error::InvalidInput("embedding/label row mismatch".into()));
    }
    let n = f.rows();
    let mut a = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut b = Vec::with_capacity(a.capacity());
    for i in 0..n {
        for j in (i + 1)..n {
            a.push(scale * euclidean(f.row(i), f.row(j)));
            b.push(euclidean(y.row(i), y.row(j)));
        }
    }
    pearson(&a, &b)
}
