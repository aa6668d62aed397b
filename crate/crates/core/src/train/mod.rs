//! Multiclass logistic regression and a one-hidden-layer sigmoid network,
//! trained by full-batch gradient descent with (Nesterov) momentum.

mod checkpoint;
mod logit;
mod mlp;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, AnyModel};
pub use logit::LogitModel;
pub use mlp::MlpModel;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::predictors::ProbClassifier;
use crate::rng::RngStream;
use crate::tasks::{Dataset, Features};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    Logit,
    Mlp,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Logit => "logit",
            Arch::Mlp => "mlp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub updates: usize,
    /// Learning rate multiplier applied after every update.
    pub lr_decay: f64,
    /// Weights start i.i.d. uniform on `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn logit_default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            momentum: 0.9,
            nesterov: true,
            updates: 50,
            lr_decay: 1.0,
            init_scale: 0.0,
            seed: 0,
        }
    }

    pub fn mlp_default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            momentum: 0.9,
            nesterov: true,
            updates: 2000,
            lr_decay: 1.0,
            init_scale: 0.05,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return domain(format!("learning_rate = {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return domain(format!("momentum = {} must be in [0, 1)", self.momentum));
        }
        if !(self.lr_decay > 0.0) || !self.lr_decay.is_finite() {
            return domain(format!("lr_decay = {} must be positive", self.lr_decay));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return domain(format!("init_scale = {} must be nonnegative", self.init_scale));
        }
        Ok(())
    }
}

/// A differentiable classifier with flat access to its parameters.
pub trait Model: ProbClassifier + Clone + Send {
    fn arch(&self) -> Arch;

    fn d(&self) -> usize;

    /// Hidden width (0 for models without a hidden layer).
    fn hidden(&self) -> usize {
        0
    }

    /// Parameter blocks in checkpoint order.
    fn param_slices(&self) -> Vec<&[f64]>;

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    /// Unnormalized class scores, one row per input row.
    fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64>;

    /// Mean cross-entropy of the softmax outputs against `y`; writes the
    /// gradient into `grad` (same shape as `self`).
    fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[usize], grad: &mut Self) -> f64;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.param_slices_mut().into_iter().for_each(|s| s.fill(0.0));
        z
    }

    fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// `self += a * other`.
    fn axpy(&mut self, a: f64, other: &Self) {
        for (s, o) in self.param_slices_mut().into_iter().zip(other.param_slices()) {
            s.iter_mut().zip(o).for_each(|(p, q)| *p += a * q);
        }
    }

    fn scale(&mut self, a: f64) {
        self.param_slices_mut()
            .into_iter()
            .for_each(|s| s.iter_mut().for_each(|p| *p *= a));
    }

    fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|p| p.is_finite()))
    }

    fn loss(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> f64 {
        mean_cross_entropy(&self.logits(x), y)
    }

    fn proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = self.logits(x);
        softmax_rows(&mut z);
        z
    }
}

pub(crate) fn fill_uniform(s: &mut [f64], scale: f64, rng: &mut RngStream) {
    if scale > 0.0 {
        s.iter_mut().for_each(|p| *p = rng.random_range(-scale..=scale));
    }
}

/// In-place row-wise softmax.
pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

fn log_sum_exp(row: ndarray::ArrayView1<'_, f64>) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn mean_cross_entropy(logits: &Array2<f64>, y: &[usize]) -> f64 {
    let n = y.len() as f64;
    logits
        .axis_iter(Axis(0))
        .zip(y)
        .map(|(row, &label)| log_sum_exp(row) - row[label])
        .sum::<f64>()
        / n
}

/// Turns logits into `(P - onehot(y)) / n` in place and returns the mean loss.
pub(crate) fn softmax_xent_grad(z: &mut Array2<f64>, y: &[usize]) -> f64 {
    let loss = mean_cross_entropy(z, y);
    softmax_rows(z);
    let n = y.len() as f64;
    for (mut row, &label) in z.axis_iter_mut(Axis(0)).zip(y) {
        row[label] -= 1.0;
        row.mapv_inplace(|v| v / n);
    }
    loss
}

/// Stacks bit features into an `n x d` matrix of 0.0/1.0.
pub fn feature_matrix(xs: &[&Features], d: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((xs.len(), d));
    for (mut row, x) in m.axis_iter_mut(Axis(0)).zip(xs) {
        let b = x.as_bits()?;
        if b.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                found: b.len(),
            });
        }
        b.write_f64(row.as_slice_mut().expect("rows of a fresh array are contiguous"));
    }
    Ok(m)
}

/// Feature matrix and labels of a data set of bit features.
pub fn dataset_arrays(ds: &Dataset, d: usize, num_classes: usize) -> Result<(Array2<f64>, Vec<usize>)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let xs: Vec<&Features> = ds.examples.iter().map(|e| &e.features).collect();
    let y: Vec<usize> = ds.examples.iter().map(|e| e.label).collect();
    if let Some(&bad) = y.iter().find(|l| **l >= num_classes) {
        return Err(Error::BadSubpop {
            id: bad,
            count: num_classes,
        });
    }
    Ok((feature_matrix(&xs, d)?, y))
}

pub(crate) fn batch_proba<M: Model>(m: &M, xs: &[&Features]) -> Result<Vec<Vec<f64>>> {
    let x = feature_matrix(xs, m.d())?;
    Ok(m.proba(x.view()).outer_iter().map(|r| r.to_vec()).collect())
}

/// Per-step record of a training run.
#[derive(Clone, Debug, Default)]
pub struct TrainTrace {
    /// Loss at the point where each gradient was evaluated.
    pub losses: Vec<f64>,
}

/// Runs `cfg.updates` momentum steps starting from `model`.
///
/// `on_snapshot(step, model)` is called for step 0, every `snapshot_every`
/// steps, and after the last update.
pub fn train_model<M: Model>(
    mut model: M,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    cfg: &TrainConfig,
    snapshot_every: Option<usize>,
    on_snapshot: &mut dyn FnMut(usize, &M) -> Result<()>,
) -> Result<(M, TrainTrace)> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let every = snapshot_every.filter(|s| *s > 0);
    let mut velocity = model.zeros_like();
    let mut grad = model.zeros_like();
    let mut trace = TrainTrace::default();
    let mut lr = cfg.learning_rate;
    if every.is_some() {
        on_snapshot(0, &model)?;
    }
    for step in 1..=cfg.updates {
        let loss = if cfg.nesterov {
            let mut ahead = model.clone();
            ahead.axpy(cfg.momentum, &velocity);
            ahead.loss_and_grad(x, y, &mut grad)
        } else {
            model.loss_and_grad(x, y, &mut grad)
        };
        if !loss.is_finite() {
            return Err(Error::Divergence { step });
        }
        trace.losses.push(loss);
        velocity.scale(cfg.momentum);
        velocity.axpy(-lr, &grad);
        model.axpy(1.0, &velocity);
        if !model.is_finite() {
            return Err(Error::Divergence { step });
        }
        lr *= cfg.lr_decay;
        if let Some(s) = every {
            if step % s == 0 || step == cfg.updates {
                on_snapshot(step, &model)?;
            }
        }
    }
    Ok((model, trace))
}

pub fn train_logit(ds: &Dataset, num_classes: usize, cfg: &TrainConfig) -> Result<LogitModel> {
    let d = first_len(ds)?;
    let (x, y) = dataset_arrays(ds, d, num_classes)?;
    let init = LogitModel::init(num_classes, d, cfg.init_scale, &mut RngStream::new(cfg.seed, 0));
    Ok(train_model(init, x.view(), &y, cfg, None, &mut |_, _| Ok(()))?.0)
}

pub fn train_mlp(ds: &Dataset, num_classes: usize, hidden: usize, cfg: &TrainConfig) -> Result<MlpModel> {
    let d = first_len(ds)?;
    let (x, y) = dataset_arrays(ds, d, num_classes)?;
    let init = MlpModel::init(num_classes, d, hidden, cfg.init_scale, &mut RngStream::new(cfg.seed, 0));
    Ok(train_model(init, x.view(), &y, cfg, None, &mut |_, _| Ok(()))?.0)
}

fn first_len(ds: &Dataset) -> Result<usize> {
    Ok(ds
        .examples
        .first()
        .ok_or(Error::EmptyDataset)?
        .features
        .as_bits()?
        .len())
}

/// Largest deviation between the analytic gradient and central finite
/// differences with step `eps`, relative to `max(|analytic|, |numeric|, 1e-4)`.
pub fn grad_check<M: Model>(model: &M, x: ArrayView2<'_, f64>, y: &[usize], eps: f64) -> f64 {
    let mut grad = model.zeros_like();
    model.loss_and_grad(x, y, &mut grad);
    let analytic: Vec<f64> = grad.param_slices().concat();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut idx = 0;
    let blocks = probe.param_slices().iter().map(|s| s.len()).collect::<Vec<_>>();
    for (b, len) in blocks.into_iter().enumerate() {
        for i in 0..len {
            let orig = probe.param_slices()[b][i];
            probe.param_slices_mut()[b][i] = orig + eps;
            let up = probe.loss(x, y);
            probe.param_slices_mut()[b][i] = orig - eps;
            let down = probe.loss(x, y);
            probe.param_slices_mut()[b][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[idx];
            let denom = a.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max((a - numeric).abs() / denom);
            idx += 1;
        }
    }
    worst
}
