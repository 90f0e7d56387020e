//! Dense row-major matrices and the few numerical primitives the rest of the
//! crate needs: pairwise distances, Pearson correlation and a small PCA.
//!
//! Everything is `f64` and single-threaded so results are bitwise
//! reproducible for a fixed input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting bad lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, col {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Single-column matrix.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |r| self.row(r))
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Multiplies every entry by `k`.
    pub fn scaled(&self, k: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for row in self.row_iter() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows.max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }
}

/// Euclidean distance between two equally long slices.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .max(0.0)
}

/// All-pairs Euclidean distances between the rows of `a`.
///
/// Each entry is computed from the per-coordinate differences, never from
/// the `|a|² + |b|² - 2ab` expansion, so identical rows give exactly zero.
pub fn pairwise_euclidean(a: &Matrix) -> Result<Matrix> {
    if a.is_empty() {
        return Err(Error::InvalidInput(
            "pairwise distances need a non-empty matrix".into(),
        ));
    }
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(a.row(i), a.row(j));
            out.set(i, j, d);
            out.set(j, i, d);
        }
    }
    Ok(out)
}

/// Distances between every row of `a` and every row of `b` (`a.rows × b.rows`).
pub fn cross_euclidean(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::InvalidInput(format!(
            "column mismatch: {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ra = a.row(i);
        for j in 0..b.rows() {
            out.set(i, j, euclidean(ra, b.row(j)));
        }
    }
    Ok(out)
}

/// Pearson correlation coefficient of two equally long samples.
///
/// Returns [`Error::DegenerateInput`] when either sample has zero variance;
/// the caller picks the fallback.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "pearson length mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 2 {
        return Err(Error::InvalidInput(
            "pearson needs at least two samples".into(),
        ));
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let da = a - mu;
        let db = b - mv;
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu <= 0.0 || svv <= 0.0 {
        return Err(Error::DegenerateInput(
            "pearson: zero variance in one of the samples".into(),
        ));
    }
    Ok((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order together with the matching
/// eigenvectors stored as the columns of the returned matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidInput(
            "eigen-decomposition needs a square matrix".into(),
        ));
    }
    let mut m = a.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let scale: f64 = m.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    Ok((values, vectors))
}

/// Result of [`pca_project`].
#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// `N × out_dims` scores.
    pub scores: Matrix,
    /// Principal axes as columns (`d × out_dims`), zero for surplus columns.
    pub components: Matrix,
    /// Sample variance (N−1 denominator) along each returned axis.
    pub variances: Vec<f64>,
    /// Set when `out_dims` exceeded the numerical rank and trailing columns
    /// were zero-filled.
    pub rank_deficient: bool,
}

/// Projects the mean-centred rows of `a` onto their top principal axes.
///
/// Each axis is sign-fixed so its largest-magnitude loading is positive
/// (first such index on ties).
pub fn pca_project(a: &Matrix, out_dims: usize) -> Result<PcaProjection> {
    if a.is_empty() {
        return Err(Error::InvalidInput("pca needs a non-empty matrix".into()));
    }
    let (n, d) = a.shape();
    let means = a.column_means();
    let mut centered = a.clone();
    for r in 0..n {
        for (x, m) in centered.row_mut(r).iter_mut().zip(&means) {
            *x -= m;
        }
    }
    let denom = (n.max(2) - 1) as f64;
    let mut cov = Matrix::zeros(d, d);
    for row in centered.row_iter() {
        for i in 0..d {
            for j in i..d {
                let v = cov.get(i, j) + row[i] * row[j];
                cov.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    let (values, vectors) = symmetric_eigen(&cov)?;
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let tol = top * 1e-12 * d as f64;
    let rank = values.iter().filter(|&&v| v > tol && v > 0.0).count();

    let usable = out_dims.min(rank);
    let mut components = Matrix::zeros(d, out_dims);
    let mut variances = vec![0.0; out_dims];
    for c in 0..usable {
        let mut axis: Vec<f64> = (0..d).map(|k| vectors.get(k, c)).collect();
        let mut pivot = 0;
        for k in 1..d {
            if axis[k].abs() > axis[pivot].abs() {
                pivot = k;
            }
        }
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|x| *x = -*x);
        }
        for (k, x) in axis.iter().enumerate() {
            components.set(k, c, *x);
        }
        variances[c] = values[c];
    }

    let mut scores = Matrix::zeros(n, out_dims);
    for r in 0..n {
        let row = centered.row(r);
        for c in 0..usable {
            let s: f64 = (0..d).map(|k| row[k] * components.get(k, c)).sum();
            scores.set(r, c, s);
        }
    }
    Ok(PcaProjection {
        scores,
        components,
        variances,
        rank_deficient: out_dims > usable,
    })
}
