//! Order-aware fusion network: positional token embedding, importance
//! gate, causal windowed attention with a residual connection, mean pooling
//! and a linear head. Gradients are computed analytically.

mod layers;
mod loss;
mod params;

use alloc::vec;
use alloc::vec::Vec;

pub use layers::{
    attention_cached, dma_mask, gates, masked_attention, ope_forward, pigl_forward, row_backward, row_forward,
    sigmoid, AttentionCache, Layout, RowCache,
};
pub use loss::{dispersion_penalty, link, sample_loss, train_loss, LossConfig, LossMode, TaskLoss};
pub use params::{Block, Dims, FusionParams, BLOCKS};

use crate::dataset::{apply_permutation, DataMatrix, Task};
use crate::error::{Error, Result};
use crate::graph::{ClusterWeights, FeatureGraph};
use crate::linalg::Matrix;
use crate::permutation::Permutation;

/// Per-feature importance in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceScores {
    pub gamma: Vec<f64>,
}

/// Min-max normalized `sum_j alpha_j * strength_j(f)` over the rewired
/// graphs; a constant vector maps to 0.5 everywhere.
pub fn importance_scores(graphs: &[FeatureGraph], alphas: &ClusterWeights) -> Result<ImportanceScores> {
    if graphs.is_empty() || graphs.len() != alphas.alphas.len() {
        return Err(Error::ShapeMismatch("one weight per graph is required".into()));
    }
    let m = graphs[0].vertex_count();
    let mut raw = vec![0.0; m];
    for (g, a) in graphs.iter().zip(&alphas.alphas) {
        if g.vertex_count() != m {
            return Err(Error::InconsistentFeatureSets);
        }
        for (r, s) in raw.iter_mut().zip(g.strengths()) {
            *r += a * s;
        }
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gamma = if hi > lo { raw.iter().map(|r| (r - lo) / (hi - lo)).collect() } else { vec![0.5; m] };
    Ok(ImportanceScores { gamma })
}

/// Loss parts over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub task: f64,
    pub p_d: f64,
    pub p_g: f64,
    pub total: f64,
}

/// Loss task matching a dataset's label type.
pub fn task_loss_for(task: Task) -> Result<TaskLoss> {
    match task {
        Task::Binary => Ok(TaskLoss::Bce),
        Task::Multiclass => Ok(TaskLoss::Cce),
        Task::Regression => Ok(TaskLoss::Mse),
        Task::None => Err(Error::UnlabeledData),
    }
}

/// Prediction for one reordered row, and the combined loss when a label is
/// given. The dispersion penalty is that of the row alone, and 0 for a
/// single feature.
pub fn forward(
    x_row: &[f64],
    label: Option<f64>,
    layout: &Layout,
    params: &FusionParams,
    cfg: &LossConfig,
    p_g: f64,
) -> Result<(Vec<f64>, Option<f64>)> {
    let cache = row_forward(x_row, layout, params)?;
    let pred = link(&cache.logits, cfg.task);
    let loss = match label {
        Some(y) => {
            let (task, _) = sample_loss(&cache.logits, y, cfg)?;
            let p_d = if x_row.len() < 2 {
                0.0
            } else {
                dispersion_penalty(&Matrix::from_vec(1, x_row.len(), x_row.to_vec()))?
            };
            Some(train_loss(task, p_d, p_g, cfg)?)
        }
        None => None,
    };
    Ok((pred, loss))
}

fn check_batch(x: &Matrix, y: &[f64], params: &FusionParams) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch(x.rows(), y.len()));
    }
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.cols() != params.dims().m {
        return Err(Error::ShapeMismatch("batch width differs from the model's feature count".into()));
    }
    Ok(())
}

/// Batch loss without gradients. `x` holds rows already in layout order.
pub fn evaluate(
    x: &Matrix,
    y: &[f64],
    layout: &Layout,
    params: &FusionParams,
    cfg: &LossConfig,
    p_g: f64,
) -> Result<LossBreakdown> {
    check_batch(x, y, params)?;
    let mut task = 0.0;
    for i in 0..x.rows() {
        let cache = row_forward(x.row(i), layout, params)?;
        task += sample_loss(&cache.logits, y[i], cfg)?.0;
    }
    task /= x.rows() as f64;
    breakdown(task, x, p_g, cfg)
}

fn breakdown(task: f64, x: &Matrix, p_g: f64, cfg: &LossConfig) -> Result<LossBreakdown> {
    let p_d = if x.cols() < 2 { 0.0 } else { dispersion_penalty(x)? };
    let p_g = if cfg.mode == LossMode::Dfo { p_g } else { 0.0 };
    Ok(LossBreakdown { task, p_d, p_g, total: train_loss(task, p_d, p_g, cfg)? })
}

/// Batch loss with gradients of the combined loss written to
/// `params.grads`. The penalties do not depend on the parameters, so only
/// the scaled task loss contributes.
pub fn backward(
    x: &Matrix,
    y: &[f64],
    layout: &Layout,
    params: &mut FusionParams,
    cfg: &LossConfig,
    p_g: f64,
) -> Result<LossBreakdown> {
    check_batch(x, y, params)?;
    cfg.validate()?;
    params.zero_grads();
    let n = x.rows() as f64;
    let coef = cfg.task_coefficient() / n;
    let mut task = 0.0;
    for i in 0..x.rows() {
        let cache = row_forward(x.row(i), layout, params)?;
        let (l, mut dl) = sample_loss(&cache.logits, y[i], cfg)?;
        task += l;
        for g in dl.iter_mut() {
            *g *= coef;
        }
        row_backward(&cache, &dl, layout, params);
    }
    breakdown(task / n, x, p_g, cfg)
}

/// Hard predictions: class ids for classification, values for regression.
pub fn predict(x: &Matrix, layout: &Layout, params: &FusionParams, task: TaskLoss) -> Result<Vec<f64>> {
    (0..x.rows())
        .map(|i| {
            let cache = row_forward(x.row(i), layout, params)?;
            let out = link(&cache.logits, task);
            Ok(match task {
                TaskLoss::Bce => {
                    if out[0] >= 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                }
                TaskLoss::Cce => {
                    let mut best = 0;
                    for (j, p) in out.iter().enumerate() {
                        if *p > out[best] {
                            best = j;
                        }
                    }
                    best as f64
                }
                TaskLoss::Mse => out[0],
            })
        })
        .collect()
}

pub fn accuracy(x: &Matrix, y: &[f64], layout: &Layout, params: &FusionParams, task: TaskLoss) -> Result<f64> {
    let pred = predict(x, layout, params, task)?;
    Ok(pred.iter().zip(y).filter(|(p, t)| p == t).count() as f64 / y.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub d: usize,
    pub dk: usize,
    /// Attention window; `None` means full causal.
    pub window: Option<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub init_scale: f64,
    pub loss: LossConfig,
}

impl FitConfig {
    pub fn new(task: TaskLoss) -> Self {
        Self { d: 8, dk: 8, window: None, epochs: 100, lr: 0.001, seed: 0, init_scale: 0.1, loss: LossConfig::new(task) }
    }
}

/// Loss parts before the update of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    pub task_loss: f64,
    pub p_d: f64,
    pub p_g: f64,
    pub total: f64,
}

/// A trained network together with what is needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub params: FusionParams,
    pub layout: Layout,
    pub trace: Vec<EpochTrace>,
}

impl FittedModel {
    pub fn final_loss(&self) -> Option<f64> {
        self.trace.last().map(|t| t.total)
    }
}

/// Number of head outputs for a task and label vector.
pub fn output_count(task: TaskLoss, labels: &[f64]) -> usize {
    match task {
        TaskLoss::Cce => labels.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1,
        _ => 1,
    }
}

/// Full-batch gradient descent on `x` reordered by `order`.
pub fn fit(
    x: &DataMatrix,
    order: &Permutation,
    gamma: &ImportanceScores,
    p_g: f64,
    cfg: &FitConfig,
) -> Result<FittedModel> {
    let labels = x.labels().ok_or(Error::UnlabeledData)?.to_vec();
    cfg.loss.validate()?;
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidConfig("learning rate must be > 0".into()));
    }
    let m = x.m();
    let reordered = apply_permutation(x, order)?;
    let dims = Dims { m, d: cfg.d, dk: cfg.dk, outputs: output_count(cfg.loss.task, &labels) };
    let mut params = FusionParams::init_uniform(dims, cfg.init_scale, cfg.seed)?;
    let layout = Layout::new(order.clone(), gamma.gamma.clone(), cfg.window.unwrap_or(m))?;
    let batch = reordered.values();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let b = backward(batch, &labels, &layout, &mut params, &cfg.loss, p_g)?;
        if !b.total.is_finite() || params.grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged(epoch));
        }
        trace.push(EpochTrace { epoch, task_loss: b.task, p_d: b.p_d, p_g: b.p_g, total: b.total });
        params.step(cfg.lr);
    }
    params.zero_grads();
    Ok(FittedModel { params, layout, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeMetric;
    use crate::rng;
    use proptest::prelude::*;

    fn layout(m: usize, seed: u64) -> Layout {
        let mut r = rng::seeded(seed);
        let mut seq: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            seq.swap(i, rng::index(&mut r, i + 1));
        }
        let gamma = (0..m).map(|_| rng::unit(&mut r)).collect();
        Layout::new(Permutation::new(seq).unwrap(), gamma, m).unwrap()
    }

    fn batch(n: usize, m: usize, seed: u64) -> Matrix {
        let mut r = rng::seeded(seed);
        Matrix::from_vec(n, m, (0..n * m).map(|_| rng::standard_normal(&mut r)).collect())
    }

    /// Max relative error between analytic and central-difference gradients.
    fn fd_error(x: &Matrix, y: &[f64], layout: &Layout, params: &FusionParams, cfg: &LossConfig) -> f64 {
        let mut p = params.clone();
        backward(x, y, layout, &mut p, cfg, 0.7).unwrap();
        let analytic = p.grads.clone();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..p.len() {
            let mut a = params.clone();
            a.values[i] += h;
            let mut b = params.clone();
            b.values[i] -= h;
            let fa = evaluate(x, y, layout, &a, cfg, 0.7).unwrap().total;
            let fb = evaluate(x, y, layout, &b, cfg, 0.7).unwrap().total;
            let numeric = (fa - fb) / (2.0 * h);
            let err = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-6);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (seed, task) in [(0u64, TaskLoss::Bce), (1, TaskLoss::Cce), (2, TaskLoss::Mse)] {
            let (m, d, dk) = (4, 4, 3);
            let outputs = if task == TaskLoss::Cce { 3 } else { 1 };
            let params = FusionParams::init_uniform(Dims { m, d, dk, outputs }, 0.5, seed).unwrap();
            let x = batch(5, m, seed);
            let y: Vec<f64> = match task {
                TaskLoss::Bce => vec![0.0, 1.0, 1.0, 0.0, 1.0],
                TaskLoss::Cce => vec![0.0, 2.0, 1.0, 2.0, 0.0],
                TaskLoss::Mse => vec![0.3, -1.0, 2.0, 0.1, 0.0],
            };
            let mut cfg = LossConfig::new(task);
            cfg.class_weights = if task == TaskLoss::Mse { None } else { Some(vec![1.0, 2.0, 0.5]) };
            let lay = Layout::new(layout(m, seed).order, layout(m, seed).gamma, 2).unwrap();
            let err = fd_error(&x, &y, &lay, &params, &cfg);
            assert!(err < 1e-4, "{task:?}: {err}");
        }
    }

    #[test]
    fn zero_network_predictions() {
        let m = 3;
        let params = FusionParams::zeros(Dims { m, d: 4, dk: 2, outputs: 1 }).unwrap();
        let lay = layout(m, 0);
        let x = batch(6, m, 1);
        let y = vec![0.5, -1.0, 2.0, 0.0, 1.0, 3.0];
        let mse = evaluate(&x, &y, &lay, &params, &LossConfig::task_only(TaskLoss::Mse), 0.0).unwrap();
        let expect = y.iter().map(|v| v * v).sum::<f64>() / 6.0;
        assert!((mse.task - expect).abs() < 1e-15);

        let yb = vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let bce = evaluate(&x, &yb, &lay, &params, &LossConfig::task_only(TaskLoss::Bce), 0.0).unwrap();
        assert!((bce.total - core::f64::consts::LN_2).abs() < 1e-12);
        let (pred, _) = forward(x.row(0), None, &lay, &params, &LossConfig::task_only(TaskLoss::Bce), 0.0).unwrap();
        assert_eq!(pred, vec![0.5]);
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let m = 3;
        let mut params = FusionParams::zeros(Dims { m, d: 3, dk: 2, outputs: 1 }).unwrap();
        let x = batch(4, m, 3);
        let lay = layout(m, 3);
        backward(&x, &[0.0; 4], &lay, &mut params, &LossConfig::task_only(TaskLoss::Mse), 0.0).unwrap();
        assert!(params.grads.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn saturated_gate_has_no_weight_gradient() {
        let m = 4;
        let mut params = FusionParams::init_uniform(Dims { m, d: 3, dk: 3, outputs: 1 }, 0.5, 4).unwrap();
        params.set_gate(0.3, 50.0);
        let x = batch(6, m, 4);
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        backward(&x, &y, &layout(m, 4), &mut params, &LossConfig::new(TaskLoss::Bce), 0.0).unwrap();
        assert!(params.grad(Block::Gate)[0].abs() < 1e-10);
    }

    #[test]
    fn importance_examples() {
        let mut star = FeatureGraph::empty(4, 0, EdgeMetric::Euclidean);
        for leaf in 1..4 {
            star.set(0, leaf, 1.0);
        }
        let one = ClusterWeights { alphas: vec![1.0] };
        let g = importance_scores(&[star], &one).unwrap().gamma;
        assert_eq!(g, vec![1.0, 0.0, 0.0, 0.0]);

        let empty = FeatureGraph::empty(3, 0, EdgeMetric::Euclidean);
        assert_eq!(importance_scores(&[empty], &one).unwrap().gamma, vec![0.5; 3]);

        let mut tri = FeatureGraph::empty(3, 0, EdgeMetric::Euclidean);
        tri.set(0, 1, 1.0);
        tri.set(1, 2, 2.0);
        tri.set(0, 2, 4.0);
        // strengths 5, 3, 6
        let g = importance_scores(&[tri], &one).unwrap().gamma;
        assert_eq!(g, vec![2.0 / 3.0, 0.0, 1.0]);
    }

    #[test]
    fn task_only_loss_is_bitwise_task() {
        let m = 4;
        let params = FusionParams::init_uniform(Dims { m, d: 3, dk: 2, outputs: 1 }, 0.3, 8).unwrap();
        let x = batch(7, m, 8);
        let y = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0];
        let mut cfg = LossConfig::new(TaskLoss::Bce);
        cfg.lambda_d = 0.0;
        cfg.lambda_g = 0.0;
        let b = evaluate(&x, &y, &layout(m, 8), &params, &cfg, 3.3).unwrap();
        assert_eq!(b.total.to_bits(), b.task.to_bits());
    }

    fn separable(n: usize, seed: u64) -> DataMatrix {
        let mut r = rng::seeded(seed);
        let mut vals = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as f64;
            let c = if y == 1.0 { 1.5 } else { -1.5 };
            vals.push(c + 0.5 * rng::standard_normal(&mut r));
            vals.push(c + 0.5 * rng::standard_normal(&mut r));
            labels.push(y);
        }
        DataMatrix::from_values(Matrix::from_vec(n, 2, vals)).unwrap().with_labels(labels, Task::Binary).unwrap()
    }

    #[test]
    fn fit_separates_toy_data() {
        let x = separable(200, 1);
        let order = Permutation::new(vec![1, 0]).unwrap();
        let gamma = ImportanceScores { gamma: vec![0.5, 1.0] };
        let cfg = FitConfig { epochs: 200, lr: 0.1, ..FitConfig::new(TaskLoss::Bce) };
        let model = fit(&x, &order, &gamma, 0.0, &cfg).unwrap();
        let xr = apply_permutation(&x, &order).unwrap();
        let acc = accuracy(xr.values(), x.labels().unwrap(), &model.layout, &model.params, TaskLoss::Bce).unwrap();
        assert!(acc >= 0.95, "{acc}");
        assert_eq!(model, fit(&x, &order, &gamma, 0.0, &cfg).unwrap());
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let x = separable(20, 2);
        let order = Permutation::identity(2);
        let gamma = ImportanceScores { gamma: vec![0.5, 0.5] };
        let cfg = FitConfig { epochs: 0, ..FitConfig::new(TaskLoss::Bce) };
        let model = fit(&x, &order, &gamma, 0.0, &cfg).unwrap();
        let dims = *model.params.dims();
        assert_eq!(model.params, FusionParams::init_uniform(dims, 0.1, 0).unwrap());
        assert!(model.trace.is_empty());
    }

    #[test]
    fn fit_requires_labels() {
        let x = DataMatrix::from_values(batch(5, 3, 0)).unwrap();
        let gamma = ImportanceScores { gamma: vec![0.5; 3] };
        let cfg = FitConfig::new(TaskLoss::Mse);
        assert_eq!(fit(&x, &Permutation::identity(3), &gamma, 0.0, &cfg), Err(Error::UnlabeledData));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(25))]

        #[test]
        fn fuzz_losses_finite_nonnegative(seed in 0u64..10_000, m in 1usize..6, multi in any::<bool>()) {
            let task = if multi { TaskLoss::Cce } else { TaskLoss::Bce };
            let outputs = if multi { 3 } else { 1 };
            let params = FusionParams::init_uniform(Dims { m, d: 4, dk: 2, outputs }, 1.0, seed).unwrap();
            let x = batch(3, m, seed);
            let y = if multi { vec![0.0, 2.0, 1.0] } else { vec![1.0, 0.0, 1.0] };
            let cfg = LossConfig::task_only(task);
            for i in 0..3 {
                let (_, l) = forward(x.row(i), Some(y[i]), &layout(m, seed), &params, &cfg, 0.0).unwrap();
                let l = l.unwrap();
                prop_assert!(l.is_finite() && l >= 0.0);
            }
        }

        #[test]
        fn gates_strictly_inside_unit_interval(w in -20.0f64..20.0, b in -20.0f64..20.0, g in 0.0f64..1.0) {
            let mut p = FusionParams::zeros(Dims { m: 1, d: 1, dk: 1, outputs: 1 }).unwrap();
            p.set_gate(w, b);
            let v = gates(&[g], &p)[0];
            prop_assert!(v > 0.0 && v < 1.0);
        }

        #[test]
        fn head_loss_is_convex(seed in 0u64..10_000, t in 0.0f64..1.0, mse in any::<bool>()) {
            let m = 3;
            let task = if mse { TaskLoss::Mse } else { TaskLoss::Bce };
            let base = FusionParams::init_uniform(Dims { m, d: 3, dk: 2, outputs: 1 }, 0.5, seed).unwrap();
            let x = batch(6, m, seed + 1);
            let y = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
            let lay = layout(m, seed);
            let cfg = LossConfig::task_only(task);
            let mut r = rng::seeded(seed + 2);
            let mut draw = || {
                let mut p = base.clone();
                for b in [Block::HeadWeight, Block::HeadBias] {
                    for v in p.block_mut(b).iter_mut() {
                        *v = rng::uniform(&mut r, -3.0, 3.0);
                    }
                }
                p
            };
            let (a, b) = (draw(), draw());
            let mut mid = a.clone();
            for (v, (x0, x1)) in mid.values.iter_mut().zip(a.values.iter().zip(&b.values)) {
                *v = t * x0 + (1.0 - t) * x1;
            }
            let f = |p: &FusionParams| evaluate(&x, &y, &lay, p, &cfg, 0.0).unwrap().task;
            prop_assert!(f(&mid) <= t * f(&a) + (1.0 - t) * f(&b) + 1e-12);
        }
    }
}
