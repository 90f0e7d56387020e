//! Small fully connected encoder with hand-written backpropagation, a
//! linear regression head for the MSE/L1 baselines, and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative given the pre-activation `z` and the activation `a`.
    /// ReLU uses the subgradient 0 at `z == 0`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

/// Weights and biases of the encoder. `weights[l]` is `sizes[l+1] × sizes[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    layer_sizes: Vec<usize>,
    activation: Activation,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Gradients with the same layout as [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Intermediate values kept by [`EncoderParams::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_sizes: Vec<usize>,
    /// Input to each layer (`inputs[0]` is X).
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidInput(
            "encoder needs at least an input and an output size".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidInput("layer sizes must be positive".into()));
    }
    Ok(())
}

impl EncoderParams {
    /// Glorot-uniform weights and zero biases drawn from the seeded
    /// ChaCha8 stream reserved for initialization.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = rng::stream(seed, rng::Stream::Init);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| (2.0 * rng.random::<f64>() - 1.0) * limit)
                .collect();
            weights.push(Matrix::new(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        check_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights: layer_sizes
                .windows(2)
                .map(|p| Matrix::zeros(p[1], p[0]))
                .collect(),
            biases: layer_sizes.windows(2).map(|p| vec![0.0; p[1]]).collect(),
        })
    }

    /// Rebuilds parameters from flattened arrays, checking every shape.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        activation: Activation,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_sizes(&layer_sizes)?;
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::InvalidInput(format!(
                "expected {layers} weight and bias arrays, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        let mut ws = Vec::with_capacity(layers);
        for (l, w) in weights.into_iter().enumerate() {
            ws.push(Matrix::new(layer_sizes[l + 1], layer_sizes[l], w)?);
        }
        for (l, b) in biases.iter().enumerate() {
            if b.len() != layer_sizes[l + 1] || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("bad bias array for layer {l}")));
            }
        }
        Ok(Self {
            layer_sizes,
            activation,
            weights: ws,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Sizes of the parameter groups in optimizer order
    /// (`w0, b0, w1, b1, ...`).
    pub fn group_sizes(&self) -> Vec<usize> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.data().len(), b.len()])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(Matrix::all_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// Runs the network on the rows of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "encoder expects {} input columns, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut pre = Vec::with_capacity(self.num_layers());
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = affine(&a, w, b);
            let next = if l == last {
                z.clone()
            } else {
                let mut h = z.clone();
                h.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
                h
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok((
            a,
            ForwardCache {
                layer_sizes: self.layer_sizes.clone(),
                inputs,
                pre,
            },
        ))
    }

    /// Forward pass without keeping the cache.
    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        self.forward(x).map(|(f, _)| f)
    }

    /// Gradients of a scalar loss with respect to every parameter, given
    /// `d_out = ∂L/∂F` for the batch that produced `cache`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Matrix) -> Result<EncoderGrads> {
        if cache.layer_sizes != self.layer_sizes || cache.inputs.len() != self.num_layers() {
            return Err(Error::InvalidState(
                "forward cache does not belong to this encoder".into(),
            ));
        }
        let batch = cache.inputs[0].rows();
        if d_out.shape() != (batch, self.output_dim()) {
            return Err(Error::InvalidState(format!(
                "output gradient is {:?}, cache expects ({batch}, {})",
                d_out.shape(),
                self.output_dim()
            )));
        }
        let layers = self.num_layers();
        let mut gw = vec![Matrix::zeros(0, 0); layers];
        let mut gb = vec![Vec::new(); layers];
        let mut delta = d_out.clone();
        for l in (0..layers).rev() {
            let input = &cache.inputs[l];
            let (fan_out, fan_in) = self.weights[l].shape();
            let mut w_grad = Matrix::zeros(fan_out, fan_in);
            let mut b_grad = vec![0.0; fan_out];
            for r in 0..batch {
                let dr = delta.row(r);
                let ar = input.row(r);
                for (o, &d) in dr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    b_grad[o] += d;
                    let wrow = w_grad.row_mut(o);
                    for (g, &a) in wrow.iter_mut().zip(ar) {
                        *g += d * a;
                    }
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                let z_prev = &cache.pre[l - 1];
                let mut next = Matrix::zeros(batch, fan_in);
                for r in 0..batch {
                    let dr = delta.row(r);
                    let out = next.row_mut(r);
                    for (o, &d) in dr.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (acc, &wv) in out.iter_mut().zip(w.row(o)) {
                            *acc += d * wv;
                        }
                    }
                    let zr = z_prev.row(r);
                    let ar = input.row(r);
                    for ((acc, &z), &a) in out.iter_mut().zip(zr).zip(ar) {
                        *acc *= self.activation.derivative(z, a);
                    }
                }
                delta = next;
            }
            gw[l] = w_grad;
            gb[l] = b_grad;
        }
        Ok(EncoderGrads {
            weights: gw,
            biases: gb,
        })
    }

    /// Optimizer groups pairing each parameter array with its gradient.
    pub fn groups<'a>(&'a mut self, grads: &'a EncoderGrads) -> Vec<ParamGroup<'a>> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (l, ((w, b), (gw, gb))) in self
            .weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .zip(grads.weights.iter().zip(&grads.biases))
            .enumerate()
        {
            out.push(ParamGroup {
                label: format!("layer {l} weights"),
                values: w.data_mut(),
                grads: gw.data(),
            });
            out.push(ParamGroup {
                label: format!("layer {l} bias"),
                values: b.as_mut_slice(),
                grads: gb.as_slice(),
            });
        }
        out
    }
}

/// `x · wᵀ + b` for a batch `x`.
fn affine(x: &Matrix, w: &Matrix, b: &[f64]) -> Matrix {
    let (fan_out, _) = w.shape();
    let mut out = Matrix::zeros(x.rows(), fan_out);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let orow = out.row_mut(r);
        for (o, acc) in orow.iter_mut().enumerate() {
            let dot: f64 = w.row(o).iter().zip(xr).map(|(a, b)| a * b).sum();
            *acc = dot + b[o];
        }
    }
    out
}

/// Linear head `ŷ = F·Wᵀ + b` used by the MSE/L1 baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl HeadParams {
    pub fn init(d_f: usize, d_y: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, rng::Stream::HeadInit);
        let limit = (6.0 / (d_f + d_y) as f64).sqrt();
        let data = (0..d_f * d_y)
            .map(|_| (2.0 * rng.random::<f64>() - 1.0) * limit)
            .collect();
        Ok(Self {
            weight: Matrix::new(d_y, d_f, data)?,
            bias: vec![0.0; d_y],
        })
    }

    pub fn forward(&self, f: &Matrix) -> Result<Matrix> {
        if f.cols() != self.weight.cols() {
            return Err(Error::InvalidInput(format!(
                "head expects {} feature columns, got {}",
                self.weight.cols(),
                f.cols()
            )));
        }
        Ok(affine(f, &self.weight, &self.bias))
    }

    /// Returns the head gradients and `∂L/∂F`.
    pub fn backward(&self, f: &Matrix, d_yhat: &Matrix) -> Result<(HeadGrads, Matrix)> {
        let (d_y, d_f) = self.weight.shape();
        if f.cols() != d_f || d_yhat.shape() != (f.rows(), d_y) {
            return Err(Error::InvalidInput("head backward shape mismatch".into()));
        }
        let mut gw = Matrix::zeros(d_y, d_f);
        let mut gb = vec![0.0; d_y];
        let mut df = Matrix::zeros(f.rows(), d_f);
        for r in 0..f.rows() {
            for o in 0..d_y {
                let d = d_yhat.get(r, o);
                gb[o] += d;
                for k in 0..d_f {
                    let g = gw.get(o, k) + d * f.get(r, k);
                    gw.set(o, k, g);
                    let h = df.get(r, k) + d * self.weight.get(o, k);
                    df.set(r, k, h);
                }
            }
        }
        Ok((
            HeadGrads {
                weight: gw,
                bias: gb,
            },
            df,
        ))
    }

    pub fn groups<'a>(&'a mut self, grads: &'a HeadGrads) -> Vec<ParamGroup<'a>> {
        vec![
            ParamGroup {
                label: "head weights".into(),
                values: self.weight.data_mut(),
                grads: grads.weight.data(),
            },
            ParamGroup {
                label: "head bias".into(),
                values: self.bias.as_mut_slice(),
                grads: grads.bias.as_slice(),
            },
        ]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        vec![self.weight.data().len(), self.bias.len()]
    }
}

/// One parameter array and its gradient, as seen by the optimizer.
#[derive(Debug)]
pub struct ParamGroup<'a> {
    pub label: String,
    pub values: &'a mut [f64],
    pub grads: &'a [f64],
}

/// Bias-corrected Adam with one moment pair per parameter group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, group_sizes: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: group_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: group_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.first_moment.iter().map(Vec::len).collect()
    }

    /// Applies one update to every group. Nothing is modified if any
    /// gradient is non-finite or any shape disagrees with the moments.
    pub fn step(&mut self, groups: &mut [ParamGroup<'_>]) -> Result<()> {
        if groups.len() != self.first_moment.len() {
            return Err(Error::InvalidState(format!(
                "optimizer tracks {} groups, got {}",
                self.first_moment.len(),
                groups.len()
            )));
        }
        for (g, (group, m)) in groups.iter().zip(&self.first_moment).enumerate() {
            if group.values.len() != m.len() || group.grads.len() != m.len() {
                return Err(Error::InvalidState(format!(
                    "group {g} ({}) has {} values / {} grads, moments hold {}",
                    group.label,
                    group.values.len(),
                    group.grads.len(),
                    m.len()
                )));
            }
            if group.grads.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    group: g,
                    name: group.label.clone(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((group, m), v) in groups
            .iter_mut()
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for (((p, &g), mi), vi) in group
                .values
                .iter_mut()
                .zip(group.grads)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Adam step over the encoder parameters only.
pub fn adam_step(
    params: &mut EncoderParams,
    grads: &EncoderGrads,
    state: &mut AdamState,
) -> Result<()> {
    let mut groups = params.groups(grads);
    state.step(&mut groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::new(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    /// Straight-line forward used as an independent oracle.
    fn naive_forward(p: &EncoderParams, x: &Matrix) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for r in 0..x.rows() {
            let mut a: Vec<f64> = x.row(r).to_vec();
            for l in 0..p.num_layers() {
                let w = &p.weights()[l];
                let mut z = vec![0.0; w.rows()];
                for o in 0..w.rows() {
                    let mut s = p.biases()[l][o];
                    for k in 0..w.cols() {
                        s += w.get(o, k) * a[k];
                    }
                    z[o] = if l + 1 < p.num_layers() {
                        match p.activation() {
                            Activation::Tanh => s.tanh(),
                            Activation::Relu => {
                                if s > 0.0 {
                                    s
                                } else {
                                    0.0
                                }
                            }
                        }
                    } else {
                        s
                    };
                }
                a = z;
            }
            out.push(a);
        }
        out
    }

    fn randomize_biases(p: &mut EncoderParams, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in p.biases_mut() {
            b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = EncoderParams::zeros(&[3, 5, 2], Activation::Tanh).unwrap();
        let f = p.embed(&random_matrix(4, 3, 1)).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer() {
        let p = EncoderParams::init(&[3, 2], Activation::Tanh, 4).unwrap();
        let x = random_matrix(5, 3, 2);
        let f = p.embed(&x).unwrap();
        let w = &p.weights()[0];
        for r in 0..5 {
            for o in 0..2 {
                let direct: f64 =
                    (0..3).map(|k| x.get(r, k) * w.get(o, k)).sum::<f64>() + p.biases()[0][o];
                assert!((f.get(r, o) - direct).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn forward_matches_naive_oracle() {
        for act in [Activation::Tanh, Activation::Relu] {
            let mut p = EncoderParams::init(&[4, 7, 6, 3], act, 17).unwrap();
            randomize_biases(&mut p, 3);
            let x = random_matrix(9, 4, 5);
            let f = p.embed(&x).unwrap();
            let naive = naive_forward(&p, &x);
            for r in 0..9 {
                for c in 0..3 {
                    assert!((f.get(r, c) - naive[r][c]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = EncoderParams::init(&[4, 3], Activation::Tanh, 1).unwrap();
        assert!(matches!(
            p.forward(&Matrix::zeros(2, 5)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn same_seed_same_params() {
        let a = EncoderParams::init(&[10, 64, 64, 8], Activation::Tanh, 42).unwrap();
        let b = EncoderParams::init(&[10, 64, 64, 8], Activation::Tanh, 42).unwrap();
        let c = EncoderParams::init(&[10, 64, 64, 8], Activation::Tanh, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 74.0).sqrt();
        assert!(a.weights()[0].data().iter().all(|v| v.abs() <= limit));
        assert!(a.biases().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = EncoderParams::init(&[3, 4, 2], Activation::Tanh, 1).unwrap();
        let (_, cache) = p.forward(&random_matrix(5, 3, 2)).unwrap();
        let g = p.backward(&cache, &Matrix::zeros(5, 2)).unwrap();
        assert!(g.weights.iter().all(|w| w.data().iter().all(|&v| v == 0.0)));
        assert!(g.biases.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let p = EncoderParams::init(&[3, 4, 2], Activation::Tanh, 1).unwrap();
        let q = EncoderParams::init(&[3, 5, 2], Activation::Tanh, 1).unwrap();
        let (_, cache) = q.forward(&random_matrix(5, 3, 2)).unwrap();
        assert!(matches!(
            p.backward(&cache, &Matrix::zeros(5, 2)),
            Err(Error::InvalidState(_))
        ));
        let (_, cache) = p.forward(&random_matrix(5, 3, 2)).unwrap();
        assert!(matches!(
            p.backward(&cache, &Matrix::zeros(4, 2)),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn relu_kink_contributes_nothing() {
        // first-layer pre-activation is exactly 0 for every unit
        let mut p = EncoderParams::zeros(&[1, 2, 1], Activation::Relu).unwrap();
        p.weights_mut()[1].data_mut().copy_from_slice(&[1.0, 1.0]);
        let x = Matrix::column(&[0.7]).unwrap();
        let (_, cache) = p.forward(&x).unwrap();
        let g = p
            .backward(&cache, &Matrix::column(&[1.0]).unwrap())
            .unwrap();
        assert!(g.weights[0].data().iter().all(|&v| v == 0.0));
        assert!(g.biases[0].iter().all(|&v| v == 0.0));
    }

    fn scalar_loss(p: &EncoderParams, x: &Matrix, upstream: &Matrix) -> f64 {
        let f = p.embed(x).unwrap();
        f.data()
            .iter()
            .zip(upstream.data())
            .map(|(a, b)| a * b)
            .sum()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / na.max(nb).max(1e-12)
    }

    #[test]
    fn backward_matches_finite_differences() {
        let h = 1e-5;
        let mut p = EncoderParams::init(&[5, 6, 4, 3], Activation::Tanh, 9).unwrap();
        randomize_biases(&mut p, 10);
        let x = random_matrix(8, 5, 11);
        let upstream = random_matrix(8, 3, 12);
        let (_, cache) = p.forward(&x).unwrap();
        let g = p.backward(&cache, &upstream).unwrap();
        for l in 0..p.num_layers() {
            let mut fd = vec![0.0; p.weights()[l].data().len()];
            for (i, slot) in fd.iter_mut().enumerate() {
                let mut plus = p.clone();
                plus.weights_mut()[l].data_mut()[i] += h;
                let mut minus = p.clone();
                minus.weights_mut()[l].data_mut()[i] -= h;
                *slot = (scalar_loss(&plus, &x, &upstream) - scalar_loss(&minus, &x, &upstream))
                    / (2.0 * h);
            }
            assert!(
                rel_err(g.weights[l].data(), &fd) <= 1e-5,
                "layer {l} weights"
            );
            let mut fdb = vec![0.0; p.biases()[l].len()];
            for (i, slot) in fdb.iter_mut().enumerate() {
                let mut plus = p.clone();
                plus.biases_mut()[l][i] += h;
                let mut minus = p.clone();
                minus.biases_mut()[l][i] -= h;
                *slot = (scalar_loss(&plus, &x, &upstream) - scalar_loss(&minus, &x, &upstream))
                    / (2.0 * h);
            }
            assert!(rel_err(&g.biases[l], &fdb) <= 1e-5, "layer {l} bias");
        }
    }

    #[test]
    fn head_identity_and_bias() {
        let mut head = HeadParams::init(3, 3, 0).unwrap();
        head.weight =
            Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        head.bias = vec![0.0; 3];
        let f = random_matrix(4, 3, 1);
        assert_eq!(head.forward(&f).unwrap(), f);
        head.bias = vec![1.0, -2.0, 0.5];
        let y = head.forward(&Matrix::zeros(2, 3)).unwrap();
        assert_eq!(y.row(0), &[1.0, -2.0, 0.5]);
        assert_eq!(y.row(1), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        let h = 1e-5;
        let mut head = HeadParams::init(4, 2, 3).unwrap();
        head.bias = vec![0.3, -0.2];
        let f = random_matrix(6, 4, 4);
        let up = random_matrix(6, 2, 5);
        let loss = |hd: &HeadParams, f: &Matrix| -> f64 {
            hd.forward(f)
                .unwrap()
                .data()
                .iter()
                .zip(up.data())
                .map(|(a, b)| a * b)
                .sum()
        };
        let (g, df) = head.backward(&f, &up).unwrap();
        let mut fd = vec![0.0; 8];
        for (i, slot) in fd.iter_mut().enumerate() {
            let mut p = head.clone();
            p.weight.data_mut()[i] += h;
            let mut m = head.clone();
            m.weight.data_mut()[i] -= h;
            *slot = (loss(&p, &f) - loss(&m, &f)) / (2.0 * h);
        }
        assert!(rel_err(g.weight.data(), &fd) <= 1e-5);
        let mut fdf = vec![0.0; 24];
        for (i, slot) in fdf.iter_mut().enumerate() {
            let mut p = f.clone();
            p.data_mut()[i] += h;
            let mut m = f.clone();
            m.data_mut()[i] -= h;
            *slot = (loss(&head, &p) - loss(&head, &m)) / (2.0 * h);
        }
        assert!(rel_err(df.data(), &fdf) <= 1e-5);
        let fdb: Vec<f64> = (0..2).map(|o| (0..6).map(|r| up.get(r, o)).sum()).collect();
        assert!(rel_err(&g.bias, &fdb) <= 1e-12);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut p = EncoderParams::init(&[2, 3, 1], Activation::Tanh, 1).unwrap();
        let before = p.clone();
        let grads = EncoderGrads {
            weights: p
                .weights()
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: p.biases().iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        let mut st = AdamState::new(1e-4, &p.group_sizes());
        adam_step(&mut p, &grads, &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let lr = 1e-3;
        let mut vals = vec![0.5, -1.0, 2.0];
        let grads = vec![3.0, -0.2, 1e-2];
        let mut st = AdamState::new(lr, &[3]);
        let before = vals.clone();
        st.step(&mut [ParamGroup {
            label: "x".into(),
            values: &mut vals,
            grads: &grads,
        }])
        .unwrap();
        for i in 0..3 {
            let expected = before[i] - lr * grads[i].signum();
            assert!((vals[i] - expected).abs() <= 1e-6);
        }
    }

    #[test]
    fn adam_rejects_nan_and_leaves_params() {
        let mut p = EncoderParams::init(&[2, 3, 1], Activation::Tanh, 1).unwrap();
        let before = p.clone();
        let mut grads = EncoderGrads {
            weights: p
                .weights()
                .iter()
                .map(|w| Matrix::filled(w.rows(), w.cols(), 0.1))
                .collect(),
            biases: p.biases().iter().map(|b| vec![0.1; b.len()]).collect(),
        };
        grads.weights[1].data_mut()[0] = f64::NAN;
        let mut st = AdamState::new(1e-4, &p.group_sizes());
        match adam_step(&mut p, &grads, &mut st) {
            Err(Error::NonFiniteGradient { group, name }) => {
                assert_eq!(group, 2);
                assert!(name.contains("layer 1"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p, before);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn adam_descends_quadratic() {
        // f(x) = (x - 3)^2, gradient 2(x - 3)
        let mut x = vec![0.0];
        let mut st = AdamState::new(0.1, &[1]);
        let mut prev = 9.0;
        for _ in 0..3 {
            let g = vec![2.0 * (x[0] - 3.0)];
            st.step(&mut [ParamGroup {
                label: "x".into(),
                values: &mut x,
                grads: &g,
            }])
            .unwrap();
            let obj = (x[0] - 3.0f64).powi(2);
            assert!(obj < prev);
            prev = obj;
        }
    }
}
