//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion fails that is not listed in `KNOWN_UNMET`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmetric::checkpoint::Checkpoint;
use rmetric::cli::evaluate;
use rmetric::data::{generate, Dataset, DatasetKind, Split};
use rmetric::encoder::{Activation, EncoderParams, HeadParams};
use rmetric::inference::EmbeddingIndex;
use rmetric::metrics::{self, geodesic_distances, KnnGraph};
use rmetric::rmloss::{self, LossConfig, LossState, PairBatch};
use rmetric::trainer::{train, Mode, TrainConfig, TrainLogRecord};
use rmetric::Matrix;

/// Criteria that do not hold for this implementation; the reasons are
/// printed with the FAIL line and discussed in the README.
const KNOWN_UNMET: &[u32] = &[8];

const SEEDS: u64 = 5;
const ITERATIONS: usize = 5000;
const LR: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::new(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect(),
    )
    .unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-3)`. The floor keeps gradients that vanish
/// by symmetry (an L1 bias with balanced signs) from turning finite-difference
/// rounding noise into a relative error of one.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-3)
}

/// Central differences of `loss` over every entry of `params`.
fn numeric_grad(params: &mut [f64], h: f64, mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut g = vec![0.0; params.len()];
    for k in 0..params.len() {
        let orig = params[k];
        params[k] = orig + h;
        let up = loss(params);
        params[k] = orig - h;
        let down = loss(params);
        params[k] = orig;
        g[k] = (up - down) / (2.0 * h);
    }
    g
}

// ------------------------------------------------------------------ 1

fn frozen_rm_loss(f: &Matrix, y: &Matrix, log_s: f64, cfg: &LossConfig, mask: &PairBatch) -> f64 {
    let state = LossState {
        log_s,
        ..LossState::default()
    };
    let mut b = rmloss::pair_terms(f, y, &state, cfg).unwrap();
    b.mask = mask.mask.clone();
    b.pair_count_selected = mask.pair_count_selected;
    rmloss::rm_loss(&b)
}

fn criterion_1() -> Outcome {
    const H: f64 = 1e-6;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let d_y = 1 + k % 2;
        let f = random_matrix(&mut rng, 16, 4, -1.0, 1.0);
        let y = random_matrix(&mut rng, 16, d_y, -1.5, 1.5);
        let log_s = rng.random_range(-0.5..0.5);
        let cfg = LossConfig {
            mining_enabled: k % 5 != 0,
            ..LossConfig::default()
        };

        // metric loss, mask and threshold frozen at the analytic point
        let mut state = LossState {
            log_s,
            ema_lbar: (k % 3 != 0).then(|| rng.random_range(0.0..0.6)),
            iteration: 0,
        };
        let mut batch = rmloss::pair_terms(&f, &y, &state, &cfg).unwrap();
        rmloss::mine_mask(&mut batch, &mut state, &cfg);
        let (gf, gs) = rmloss::rm_loss_backward(&batch, &f).unwrap();
        let mut fd = f.data().to_vec();
        let nf = numeric_grad(&mut fd, H, |p| {
            frozen_rm_loss(
                &Matrix::new(16, 4, p.to_vec()).unwrap(),
                &y,
                log_s,
                &cfg,
                &batch,
            )
        });
        let mut ls = [log_s];
        let ns = numeric_grad(&mut ls, H, |p| frozen_rm_loss(&f, &y, p[0], &cfg, &batch));
        worst = worst.max(rel_err(gf.data(), &nf)).max(rel_err(&[gs], &ns));

        // encoder backprop through a random linear functional of the output
        let act = if k % 2 == 0 {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let x = random_matrix(&mut rng, 16, 6, -1.0, 1.0);
        let enc = EncoderParams::init(&[6, 8, 4], act, k as u64).unwrap();
        let probe = random_matrix(&mut rng, 16, 4, -1.0, 1.0);
        let functional = |e: &EncoderParams| -> f64 {
            let out = e.embed(&x).unwrap();
            out.data()
                .iter()
                .zip(probe.data())
                .map(|(a, b)| a * b)
                .sum()
        };
        let (_, cache) = enc.forward(&x).unwrap();
        let grads = enc.backward(&cache, &probe).unwrap();
        for l in 0..enc.num_layers() {
            let mut e = enc.clone();
            let mut w = e.weights()[l].data().to_vec();
            let nw = numeric_grad(&mut w, H, |p| {
                e.weights_mut()[l].data_mut().copy_from_slice(p);
                functional(&e)
            });
            let mut e = enc.clone();
            let mut b = e.biases()[l].clone();
            let nb = numeric_grad(&mut b, H, |p| {
                e.biases_mut()[l].copy_from_slice(p);
                functional(&e)
            });
            worst = worst
                .max(rel_err(grads.weights[l].data(), &nw))
                .max(rel_err(&grads.biases[l], &nb));
        }

        // baseline losses through the linear head
        let head = HeadParams::init(4, d_y, k as u64).unwrap();
        for l1 in [false, true] {
            let loss_of = |h: &HeadParams, feats: &Matrix| -> f64 {
                let p = h.forward(feats).unwrap();
                let r = if l1 {
                    rmloss::l1_loss(&p, &y)
                } else {
                    rmloss::mse_loss(&p, &y)
                };
                r.unwrap().0
            };
            let pred = head.forward(&f).unwrap();
            let (_, dp) = if l1 {
                rmloss::l1_loss(&pred, &y)
            } else {
                rmloss::mse_loss(&pred, &y)
            }
            .unwrap();
            let (hg, df) = head.backward(&f, &dp).unwrap();
            let mut h2 = head.clone();
            let mut w = head.weight.data().to_vec();
            let nw = numeric_grad(&mut w, H, |p| {
                h2.weight.data_mut().copy_from_slice(p);
                loss_of(&h2, &f)
            });
            let mut h3 = head.clone();
            let mut b = head.bias.clone();
            let nb = numeric_grad(&mut b, H, |p| {
                h3.bias.copy_from_slice(p);
                loss_of(&h3, &f)
            });
            let mut fdat = f.data().to_vec();
            let nf = numeric_grad(&mut fdat, H, |p| {
                loss_of(&head, &Matrix::new(16, 4, p.to_vec()).unwrap())
            });
            worst = worst
                .max(rel_err(hg.weight.data(), &nw))
                .max(rel_err(&hg.bias, &nb))
                .max(rel_err(df.data(), &nf));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-5 && secs < 60.0,
        format!("worst relative error {worst:.2e} over 50 batches, {secs:.1}s"),
    )
}

// ------------------------------------------------------------------ 2

struct OracleStep {
    mean: f64,
    lbar: f64,
    mask: Vec<bool>,
    loss: f64,
}

/// Straight-line evaluation of the weighted residuals, threshold, mask and loss.
fn oracle_step(
    f: &Matrix,
    y: &Matrix,
    s: f64,
    sigma: f64,
    alpha: f64,
    prev: Option<f64>,
    mining: bool,
) -> OracleStep {
    let b = f.rows();
    let dist = |m: &Matrix, i: usize, j: usize| -> f64 {
        (0..m.cols())
            .map(|c| (m.get(i, c) - m.get(j, c)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut wd = vec![0.0; b * b];
    let mut w = vec![0.0; b * b];
    let mut d = vec![0.0; b * b];
    let mut total = 0.0;
    for i in 0..b {
        for j in 0..b {
            if i == j {
                continue;
            }
            let dy = dist(y, i, j);
            d[i * b + j] = (s * dist(f, i, j) - dy).abs();
            w[i * b + j] = if sigma.is_infinite() {
                1.0 + alpha
            } else {
                (-dy * dy / (2.0 * sigma * sigma)).exp() + alpha
            };
            wd[i * b + j] = w[i * b + j] * d[i * b + j];
            total += wd[i * b + j];
        }
    }
    let mean = total / (b * (b - 1)) as f64;
    let lbar = match prev {
        None => mean,
        Some(p) => 0.9 * p + 0.1 * mean,
    };
    let mask: Vec<bool> = (0..b * b)
        .map(|k| k / b != k % b && (!mining || wd[k] > lbar))
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..b * b {
        if mask[k] {
            num += wd[k];
            den += w[k];
        }
    }
    if den == 0.0 {
        num = 0.0;
        for k in 0..b * b {
            if k / b != k % b {
                num += wd[k];
                den += w[k];
            }
        }
    }
    OracleStep {
        mean,
        lbar,
        mask,
        loss: num / den,
    }
}

fn compare_step(f: &Matrix, y: &Matrix, state: &mut LossState, cfg: &LossConfig) -> (f64, bool) {
    let o = oracle_step(
        f,
        y,
        state.scale(),
        cfg.sigma,
        cfg.alpha,
        state.ema_lbar,
        cfg.mining_enabled,
    );
    let mut batch = rmloss::pair_terms(f, y, state, cfg).unwrap();
    let step = rmloss::mine_mask(&mut batch, state, cfg);
    let loss = rmloss::rm_loss(&batch);
    let b = f.rows();
    let masks_agree = (0..b * b).all(|k| (batch.mask.get(k / b, k % b) == 1.0) == o.mask[k]);
    let err = (step.batch_mean - o.mean)
        .abs()
        .max((step.lbar - o.lbar).abs())
        .max((loss - o.loss).abs());
    (err, masks_agree)
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut masks = true;

    let f = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]).unwrap();
    let y = Matrix::column(&[0.0, 1.0, 2.0]).unwrap();
    let cfg = LossConfig {
        sigma: 1.0,
        alpha: 0.1,
        ..LossConfig::default()
    };
    let mut state = LossState::default();
    let (e, m) = compare_step(&f, &y, &mut state, &cfg);
    worst = worst.max(e);
    masks &= m;
    // the two (2,3) orderings survive and the loss collapses to their residual
    let fixture_ok = (state.ema_lbar.unwrap() - 0.29111).abs() < 1e-5;

    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut state = LossState {
        log_s: 0.3,
        ..LossState::default()
    };
    for k in 0..20 {
        let d_y = 1 + k % 2;
        let b = 8 + k % 9;
        let f = random_matrix(&mut rng, b, 3, -1.0, 1.0);
        let y = random_matrix(&mut rng, b, d_y, -1.0, 1.0);
        let cfg = LossConfig {
            sigma: [0.25, 0.5, 1.0, f64::INFINITY][k % 4],
            alpha: [0.0, 0.1, 0.3][k % 3],
            mining_enabled: k % 7 != 3,
            ..LossConfig::default()
        };
        let (e, m) = compare_step(&f, &y, &mut state, &cfg);
        worst = worst.max(e);
        masks &= m;
    }
    outcome(
        worst <= 1e-12 && masks && fixture_ok,
        format!("max |impl − oracle| {worst:.2e}, masks identical: {masks}, fixture threshold ok: {fixture_ok}"),
    )
}

// ------------------------------------------------------------------ 3

fn train_and_eval(ds: &Dataset, mode: Mode, seed: u64) -> (Checkpoint, rmetric::cli::Evaluation) {
    let mut cfg = TrainConfig::new(mode, ITERATIONS, seed);
    cfg.lr = LR;
    let out = train(ds, &cfg).unwrap();
    let ck = Checkpoint::from_outcome(&out, mode, &ds.norm_params, serde_json::Value::Null);
    let ev = evaluate(&ck, ds, Split::Test, &metrics::DEFAULT_K_CANDIDATES).unwrap();
    (ck, ev)
}

fn curve(seed: u64) -> Dataset {
    generate(DatasetKind::Curve1d, 2000, 10, 0.01, seed).unwrap()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (ck, ev) = train_and_eval(&curve(0), Mode::Rm, 0);
    let rho =
        metrics::isometry_correlation(&ev.eval_embeddings, &ev.eval_labels, ck.loss_state.scale())
            .unwrap();
    let rv = ev.report.rv;
    outcome(
        rv <= 0.05 && rho >= 0.97,
        format!(
            "test RV {rv:.5} (k={}), pair correlation {rho:.5}, {ITERATIONS} iterations in {:.1}s",
            ev.report.rv_best_k,
            start.elapsed().as_secs_f64()
        ),
    )
}

// -------------------------------------------------------------- 4 and 8

struct SeedRuns {
    rm_mae: f64,
    mean_mae: f64,
    rm_rv: f64,
    mse_rv: f64,
    rm_d5: f64,
    mse_d5: f64,
    mse_mae: f64,
    rm_small_mae: f64,
    mse_small_mae: f64,
}

fn seed_runs() -> Vec<SeedRuns> {
    (0..SEEDS)
        .map(|seed| {
            let ds = curve(seed);
            let small = ds.subsample_train(0.1, seed).unwrap();
            let (_, rm) = train_and_eval(&ds, Mode::Rm, seed);
            let (_, mse) = train_and_eval(&ds, Mode::Mse, seed);
            let (_, rm_small) = train_and_eval(&small, Mode::Rm, seed);
            let (_, mse_small) = train_and_eval(&small, Mode::Mse, seed);
            SeedRuns {
                rm_mae: rm.report.mae,
                mean_mae: rm.mean_predictor_mae,
                rm_rv: rm.report.rv,
                mse_rv: mse.report.rv,
                rm_d5: rm.report.d5,
                mse_d5: mse.report.d5,
                mse_mae: mse.report.mae,
                rm_small_mae: rm_small.report.mae,
                mse_small_mae: mse_small.report.mae,
            }
        })
        .collect()
}

fn criterion_4(runs: &[SeedRuns]) -> Outcome {
    let wins = runs
        .iter()
        .filter(|r| r.rm_mae < r.mean_mae && r.rm_rv <= r.mse_rv && r.rm_d5 <= r.mse_d5)
        .count();
    let detail: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "mae {:.4}/{:.4} rv {:.5}/{:.5} d5 {:.5}/{:.5}",
                r.rm_mae, r.mean_mae, r.rm_rv, r.mse_rv, r.rm_d5, r.mse_d5
            )
        })
        .collect();
    outcome(
        wins >= 4,
        format!(
            "{wins}/{SEEDS} seeds (rm mae/mean-predictor, rm/mse rv, rm/mse d5): {}",
            detail.join("; ")
        ),
    )
}

fn criterion_8(runs: &[SeedRuns]) -> Outcome {
    let wins = runs
        .iter()
        .filter(|r| r.rm_small_mae / r.rm_mae <= r.mse_small_mae / r.mse_mae)
        .count();
    let detail: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "{:.2}/{:.2}",
                r.rm_small_mae / r.rm_mae,
                r.mse_small_mae / r.mse_mae
            )
        })
        .collect();
    outcome(
        wins >= 3,
        format!(
            "{wins}/{SEEDS} seeds; degradation ratio rm/mse: {}",
            detail.join(", ")
        ),
    )
}

// ------------------------------------------------------------------ 5

fn floyd_warshall(g: &KnnGraph) -> Vec<f64> {
    let n = g.len();
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
        for &(j, w) in &g.adjacency[i] {
            d[i * n + j] = d[i * n + j].min(w);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let c = d[i * n + k] + d[k * n + j];
                if c < d[i * n + j] {
                    d[i * n + j] = c;
                }
            }
        }
    }
    d
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    let mut reach_agree = true;
    for _ in 0..20 {
        let n = rng.random_range(2..=50);
        let p = rng.random_range(0.03..0.4);
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    let w = rng.random_range(0.01..5.0);
                    adjacency[i].push((j, w));
                    adjacency[j].push((i, w));
                }
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|e: &(usize, f64)| e.0);
        }
        let g = KnnGraph { k: 0, adjacency };
        let fw = floyd_warshall(&g);
        let dj = geodesic_distances(&g).distances;
        for (a, b) in dj.data().iter().zip(&fw) {
            if a.is_finite() != b.is_finite() {
                reach_agree = false;
            } else if a.is_finite() {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let mut complete_exact = true;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_matrix(&mut rng, 30, 3, -1.0, 1.0);
        let g = metrics::knn_graph(&pts, 29).unwrap();
        let geo = geodesic_distances(&g).distances;
        for i in 0..30 {
            for j in 0..30 {
                let e = rmetric::linalg::euclidean(pts.row(i), pts.row(j));
                complete_exact &= geo.get(i, j) == e;
            }
        }
    }
    outcome(
        worst <= 1e-12 && reach_agree && complete_exact,
        format!(
            "max |Dijkstra − Floyd–Warshall| {worst:.2e} on 20 graphs, reachability agrees: {reach_agree}, complete graph exact: {complete_exact}"
        ),
    )
}

// ------------------------------------------------------------------ 6

fn criterion_6() -> Outcome {
    let idx = |pts: &[[f64; 2]], ys: &[f64], r: f64| {
        EmbeddingIndex::new(
            Matrix::from_rows(pts).unwrap(),
            Matrix::column(ys).unwrap(),
            r,
        )
        .unwrap()
    };
    let single = idx(&[[0.0, 0.0], [5.0, 0.0]], &[3.25, -1.0], 1.0)
        .predict(&[0.3, 0.1])
        .unwrap();
    let identity = (single.label[0] - 3.25).abs() <= 1e-12 && !single.extrapolated;

    let sym = idx(&[[-1.0, 0.0], [1.0, 0.0]], &[1.0, 2.0], 2.0)
        .predict(&[0.0, 0.0])
        .unwrap();
    let symmetry = (sym.label[0] - 1.5).abs() <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut hull = true;
    for _ in 0..200 {
        let f = random_matrix(&mut rng, 12, 2, -1.0, 1.0);
        let y = random_matrix(&mut rng, 12, 2, -3.0, 3.0);
        let index = EmbeddingIndex::new(f.clone(), y.clone(), 0.8).unwrap();
        let q = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let p = index.predict(&q).unwrap();
        let near: Vec<usize> = (0..12)
            .filter(|&i| rmetric::linalg::euclidean(f.row(i), &q) <= 0.8)
            .collect();
        let pool = if near.is_empty() {
            vec![(0..12)
                .min_by(|&a, &b| {
                    rmetric::linalg::euclidean(f.row(a), &q)
                        .total_cmp(&rmetric::linalg::euclidean(f.row(b), &q))
                })
                .unwrap()]
        } else {
            near
        };
        for c in 0..2 {
            let lo = pool
                .iter()
                .map(|&i| y.get(i, c))
                .fold(f64::INFINITY, f64::min);
            let hi = pool
                .iter()
                .map(|&i| y.get(i, c))
                .fold(f64::NEG_INFINITY, f64::max);
            hull &= p.label[c] >= lo - 1e-12 && p.label[c] <= hi + 1e-12;
        }
    }

    let r = 0.9;
    let worked = idx(&[[0.0, 0.0], [r / 3.0, 0.0]], &[1.0, 2.0], r)
        .predict(&[0.0, 0.0])
        .unwrap()
        .label[0];
    let e = (-0.5f64).exp();
    let worked_ok =
        (worked - (1.0 + 2.0 * e) / (1.0 + e)).abs() <= 1e-12 && (worked - 1.37754).abs() < 1e-5;

    outcome(
        identity && symmetry && hull && worked_ok,
        format!(
            "identity {identity}, symmetry {symmetry}, convex hull {hull}, worked example {worked:.12} ({worked_ok})"
        ),
    )
}

// ------------------------------------------------------------------ 7

fn rm_log(mining: bool) -> Vec<TrainLogRecord> {
    let ds = generate(DatasetKind::Curve1d, 500, 6, 0.01, 7).unwrap();
    let mut cfg = TrainConfig::new(Mode::Rm, 400, 7);
    cfg.lr = LR;
    cfg.eval_every = 100;
    cfg.loss.mining_enabled = mining;
    train(&ds, &cfg).unwrap().log
}

fn criterion_7() -> Outcome {
    let on = rm_log(true);
    let off = rm_log(false);
    let fraction_on = on[1..].iter().all(|r| {
        let f = r.selected_fraction.unwrap();
        f > 0.0 && f < 1.0
    });
    let fraction_off = off.iter().all(|r| r.selected_fraction == Some(1.0));
    let mut ema_err: f64 = 0.0;
    for log in [&on, &off] {
        ema_err = ema_err.max((log[0].lbar.unwrap() - log[0].batch_mean.unwrap()).abs());
        for w in log.windows(2) {
            let expected = 0.9 * w[0].lbar.unwrap() + 0.1 * w[1].batch_mean.unwrap();
            ema_err = ema_err.max((w[1].lbar.unwrap() - expected).abs());
        }
    }
    let (lo, hi) = on[1..]
        .iter()
        .map(|r| r.selected_fraction.unwrap())
        .fold((1.0f64, 0.0f64), |(lo, hi), f| (lo.min(f), hi.max(f)));
    outcome(
        fraction_on && fraction_off && ema_err <= 1e-12,
        format!(
            "mining on: fraction in [{lo:.3}, {hi:.3}] after iteration 1; mining off: all 1 = {fraction_off}; max EMA residual {ema_err:.2e}"
        ),
    )
}

// ------------------------------------------------------------------ 9

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_rmetric"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = |mode: &str| {
        serde_json::json!({
            "seed": 11,
            "dataset": { "generate": { "kind": "curve1d", "n": 300, "d_x": 6, "noise_sd": 0.01 } },
            "train": { "mode": mode, "iterations": 150, "batch_size": 32, "lr": 1e-3, "eval_every": 50,
                       "architecture": { "hidden": [16], "d_f": 4 } },
            "ablation": { "sigmas": [0.5, "inf"], "alphas": [0.1, 0.3], "mining": [true, false] }
        })
    };
    for mode in ["rm", "mse"] {
        std::fs::write(root.join(format!("{mode}.json")), cfg(mode).to_string()).unwrap();
    }
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let mut failures = Vec::new();
    for run in ["a", "b"] {
        let steps: Vec<Vec<String>> = vec![
            vec![
                "generate".into(),
                "--config".into(),
                p("rm.json"),
                "--out".into(),
                p(&format!("{run}/gen")),
            ],
            vec![
                "train".into(),
                "--config".into(),
                p("rm.json"),
                "--out".into(),
                p(&format!("{run}/rm")),
            ],
            vec![
                "train".into(),
                "--config".into(),
                p("mse.json"),
                "--out".into(),
                p(&format!("{run}/mse")),
            ],
            vec![
                "evaluate".into(),
                "--checkpoint".into(),
                p(&format!("{run}/rm/checkpoint.json")),
                "--out".into(),
                p(&format!("{run}/eval_rm")),
            ],
            vec![
                "evaluate".into(),
                "--checkpoint".into(),
                p(&format!("{run}/mse/checkpoint.json")),
                "--out".into(),
                p(&format!("{run}/eval_mse")),
            ],
            vec![
                "ablate".into(),
                "--config".into(),
                p("rm.json"),
                "--out".into(),
                p(&format!("{run}/ablate")),
            ],
        ];
        for args in steps {
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            if !run_cli(&refs) {
                failures.push(format!("{} failed", args[0]));
            }
        }
    }
    let a = read_tree(&root.join("a"));
    let b = read_tree(&root.join("b"));
    let identical = !a.is_empty() && a == b;
    outcome(
        failures.is_empty() && identical,
        format!(
            "{} files across generate/train/evaluate/ablate, bitwise identical: {identical}{}",
            a.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join(", "))
            }
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "gradient fidelity", criterion_1()),
        (2, "brute-force loss oracle", criterion_2()),
        (3, "isometry emergence", criterion_3()),
    ];
    let runs = seed_runs();
    results.push((
        4,
        "directional comparison with baselines",
        criterion_4(&runs),
    ));
    results.push((5, "geodesic oracle", criterion_5()));
    results.push((6, "nearest-neighbour prediction contracts", criterion_6()));
    results.push((7, "mining behaviour", criterion_7()));
    results.push((8, "data efficiency", criterion_8(&runs)));
    results.push((9, "CLI determinism", criterion_9()));
    results.sort_by_key(|r| r.0);

    let mut unexpected = 0;
    for (id, name, o) in &results {
        let known = KNOWN_UNMET.contains(id);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && known {
            " [known unmet]"
        } else {
            ""
        };
        println!("{tag} criterion {id} ({name}){note}: {}", o.detail);
        if !o.pass && !known {
            unexpected += 1;
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!(
        "acceptance: {passed}/{} criteria pass, {unexpected} unexpected failure(s), {:.0}s",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
