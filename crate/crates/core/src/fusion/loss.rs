use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::layers::sigmoid;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskLoss {
    Bce,
    Cce,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LossMode {
    /// Task loss plus dispersion and coherence penalties.
    #[default]
    Dfo,
    /// Task loss plus the dispersion penalty only.
    Dispersion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub mode: LossMode,
    pub lambda_d: f64,
    pub lambda_g: f64,
    pub lambda_reg: f64,
    pub task: TaskLoss,
    pub class_weights: Option<Vec<f64>>,
}

impl LossConfig {
    pub fn new(task: TaskLoss) -> Self {
        Self { mode: LossMode::Dfo, lambda_d: 0.4, lambda_g: 0.3, lambda_reg: 0.4, task, class_weights: None }
    }

    /// Plain task loss.
    pub fn task_only(task: TaskLoss) -> Self {
        Self { lambda_d: 0.0, lambda_g: 0.0, lambda_reg: 0.0, ..Self::new(task) }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidLambdas(msg.to_string()));
        match self.mode {
            LossMode::Dfo => {
                if !(self.lambda_d >= 0.0 && self.lambda_g >= 0.0) {
                    return fail("lambda_d and lambda_g must be >= 0");
                }
                if self.lambda_d + self.lambda_g > 1.0 {
                    return fail("lambda_d + lambda_g must not exceed 1");
                }
            }
            LossMode::Dispersion => {
                if !(0.0..=1.0).contains(&self.lambda_reg) {
                    return fail("lambda_reg must lie in [0, 1]");
                }
            }
        }
        if let Some(w) = &self.class_weights {
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return fail("class weights must be finite and >= 0");
            }
        }
        Ok(())
    }

    /// Multiplier of the task loss inside the combined loss.
    pub fn task_coefficient(&self) -> f64 {
        match self.mode {
            LossMode::Dfo => 1.0 - self.lambda_d - self.lambda_g,
            LossMode::Dispersion => 1.0 - self.lambda_reg,
        }
    }
}

/// Combined training loss from its parts.
pub fn train_loss(task_loss: f64, p_d: f64, p_g: f64, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(match cfg.mode {
        LossMode::Dfo => cfg.lambda_d * p_d + cfg.lambda_g * p_g + (1.0 - cfg.lambda_d - cfg.lambda_g) * task_loss,
        LossMode::Dispersion => cfg.lambda_reg * p_d + (1.0 - cfg.lambda_reg) * task_loss,
    })
}

/// Mean over rows of the summed absolute differences between adjacent
/// (already reordered) columns.
pub fn dispersion_penalty(batch: &Matrix) -> Result<f64> {
    let m = batch.cols();
    if m < 2 {
        return Err(Error::TooFewFeatures(m));
    }
    if batch.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = (0..batch.rows())
        .map(|i| batch.row(i).windows(2).map(|w| (w[0] - w[1]).abs()).sum::<f64>())
        .sum();
    Ok(total / batch.rows() as f64)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

fn class_weight(cfg: &LossConfig, class: usize) -> f64 {
    cfg.class_weights.as_ref().and_then(|w| w.get(class).copied()).unwrap_or(1.0)
}

/// Per-sample task loss and its derivative with respect to the logits.
pub fn sample_loss(logits: &[f64], label: f64, cfg: &LossConfig) -> Result<(f64, Vec<f64>)> {
    match cfg.task {
        TaskLoss::Bce => {
            let z = logits[0];
            let y = label;
            if !(y == 0.0 || y == 1.0) {
                return Err(Error::InvalidLabels(alloc::format!("binary label {y}")));
            }
            let w = class_weight(cfg, y as usize);
            Ok((w * (softplus(z) - y * z), vec![w * (sigmoid(z) - y)]))
        }
        TaskLoss::Cce => {
            let c = label as usize;
            if label < 0.0 || libm::trunc(label) != label || c >= logits.len() {
                return Err(Error::InvalidLabels(alloc::format!("class label {label}")));
            }
            let w = class_weight(cfg, c);
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logits.iter().map(|z| libm::exp(z - max)).sum();
            let lse = max + libm::log(sum);
            let grad = logits
                .iter()
                .enumerate()
                .map(|(j, z)| w * (libm::exp(z - lse) - if j == c { 1.0 } else { 0.0 }))
                .collect();
            Ok((w * (lse - logits[c]), grad))
        }
        TaskLoss::Mse => {
            let r = logits[0] - label;
            Ok((r * r, vec![2.0 * r]))
        }
    }
}

/// Maps logits to predictions: probability of class 1, class
/// probabilities, or the raw value.
pub fn link(logits: &[f64], task: TaskLoss) -> Vec<f64> {
    match task {
        TaskLoss::Bce => vec![sigmoid(logits[0])],
        TaskLoss::Cce => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        }
        TaskLoss::Mse => vec![logits[0]],
    }
}
