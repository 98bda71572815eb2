//! Binary cross-entropy against matched labels and the weighted total loss.

use crate::error::{Error, Result};
use crate::matching::MatchedLabel;
use crate::raster::ConfidenceMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the matching loss in the total.
    pub beta: f64,
    /// Predictions are clamped into `[eps, 1 - eps]`.
    pub eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            eps: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn new(beta: f64, eps: f64) -> Result<Self> {
        let cfg = Self { beta, eps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::invalid(format!(
                "eps must lie in (0, 0.5), got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Loss value with its gradient with respect to each prediction pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major `dL/dE`.
    pub gradient: Vec<f64>,
}

/// `sum_i sum_p -[g ln e + (1 - g) ln(1 - e)]` over every label `i`, with
/// `e` the clamped prediction. Labels are treated as constants.
pub fn bce_matched(
    pred: &ConfidenceMap,
    labels: &[MatchedLabel],
    cfg: &LossConfig,
) -> Result<LossValue> {
    cfg.validate()?;
    if labels.is_empty() {
        return Err(Error::invalid("at least one label is required"));
    }
    if let Some(l) = labels.iter().find(|l| l.label.dims() != pred.dims()) {
        return Err(Error::invalid(format!(
            "prediction is {:?} but a label is {:?}",
            pred.dims(),
            l.label.dims()
        )));
    }

    let clamped: Vec<f64> = pred
        .values()
        .iter()
        .map(|&v| v.clamp(cfg.eps, 1.0 - cfg.eps))
        .collect();
    let mut gradient = vec![0.0; clamped.len()];
    let mut value = 0.0;
    for label in labels {
        for ((&e, &g), grad) in clamped
            .iter()
            .zip(label.label.bits())
            .zip(gradient.iter_mut())
        {
            if g {
                value -= e.ln();
                *grad -= 1.0 / e;
            } else {
                value -= (1.0 - e).ln();
                *grad += 1.0 / (1.0 - e);
            }
        }
    }
    Ok(LossValue {
        value,
        width: pred.width(),
        height: pred.height(),
        gradient,
    })
}

/// `beta * l_matched + l_model`.
pub fn total_loss(l_matched: f64, l_model: f64, cfg: &LossConfig) -> Result<f64> {
    if !l_matched.is_finite() || !l_model.is_finite() {
        return Err(Error::invalid("loss terms must be finite"));
    }
    cfg.validate()?;
    Ok(cfg.beta * l_matched + l_model)
}
