//! Demand-feature prediction with uncertainty, and the distribution-fitting
//! classifier that turns predicted features into a demand model for the
//! chance constraint.

mod bnn;

pub use bnn::{
    mix_seed, BnnModel, ElboGradient, PredictedFeature, PredictorError, TrainOptions, TrainReport,
    TrainingPair, TrainingSet, FEATURE_DIM,
};

use serde::{Deserialize, Serialize};
use std::path::Path;

/// Predictor hyperparameters, all scenario-configurable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorConfig {
    /// History window K, slots.
    pub history_len: usize,
    pub hidden_size: usize,
    /// MC passes for prediction.
    pub mc_samples: usize,
    /// MC samples per ELBO evaluation during training.
    pub train_mc_samples: usize,
    /// Epochs for the initial fit.
    pub epochs: usize,
    /// Epochs for the per-window warm retrains.
    pub retrain_epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub prior_std: f64,
    /// Initial posterior std of every weight.
    pub init_std: f64,
    /// Most recent slots used for the per-window retrain.
    pub retrain_slots: usize,
    /// Dispersion tolerance eta of the Poisson classifier.
    pub dispersion_tolerance: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            history_len: 10,
            hidden_size: 16,
            mc_samples: 30,
            train_mc_samples: 2,
            epochs: 150,
            retrain_epochs: 150,
            learning_rate: 0.02,
            momentum: 0.9,
            clip_norm: 5.0,
            prior_std: 1.2,
            init_std: 0.1,
            retrain_slots: 25,
            dispersion_tolerance: 0.2,
        }
    }
}

impl PredictorConfig {
    pub fn train_options(&self, epochs: usize) -> TrainOptions {
        TrainOptions {
            epochs,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            clip_norm: self.clip_norm,
            mc_samples: self.train_mc_samples,
        }
    }
}

/// Fitted demand distribution with Gaussian parameter uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedDemandDistribution {
    /// Intensity ~ N(lambda_mean, lambda_sd^2).
    Poisson { lambda_mean: f64, lambda_sd: f64 },
    /// Mean ~ N(mean_mean, mean_sd^2), variance ~ N(var_mean, var_sd^2).
    Gaussian {
        mean_mean: f64,
        mean_sd: f64,
        var_mean: f64,
        var_sd: f64,
    },
}

/// Classify a predicted feature by its index of dispersion: within
/// `tolerance` of 1 it is Poisson, otherwise Gaussian.
pub fn fit_distribution(
    pf: &PredictedFeature,
    tolerance: f64,
) -> Result<FittedDemandDistribution, PredictorError> {
    let mean = pf.feature.mean;
    if mean <= 0.0 {
        return Err(PredictorError::Checkpoint(format!(
            "cannot fit a distribution to non-positive predicted mean {mean}"
        )));
    }
    let dispersion = pf.feature.variance / mean;
    if (dispersion - 1.0).abs() <= tolerance {
        Ok(FittedDemandDistribution::Poisson {
            lambda_mean: mean,
            lambda_sd: pf.sd_mean,
        })
    } else {
        Ok(FittedDemandDistribution::Gaussian {
            mean_mean: mean,
            mean_sd: pf.sd_mean,
            var_mean: pf.feature.variance.max(0.0),
            var_sd: pf.sd_variance,
        })
    }
}

/// Write a model checkpoint in a line-oriented text format. Floats use
/// Rust's shortest round-trip formatting, so load(save(m)) == m exactly.
pub fn save_checkpoint(model: &BnnModel, path: &Path) -> Result<(), PredictorError> {
    std::fs::write(path, checkpoint_to_string(model))?;
    Ok(())
}

pub fn checkpoint_to_string(model: &BnnModel) -> String {
    let mut out = String::new();
    out.push_str("leoslice-bnn v1\n");
    out.push_str(&format!("hidden_size {}\n", model.hidden_size));
    out.push_str(&format!("history_len {}\n", model.history_len));
    out.push_str(&format!("prior_std {}\n", model.prior_std));
    out.push_str(&format!(
        "norm_mean {} {}\n",
        model.norm_mean[0], model.norm_mean[1]
    ));
    out.push_str(&format!(
        "norm_scale {} {}\n",
        model.norm_scale[0], model.norm_scale[1]
    ));
    let dump = |name: &str, values: &[f64], out: &mut String| {
        out.push_str(&format!("{name} {}\n", values.len()));
        for v in values {
            out.push_str(&format!("{v}\n"));
        }
    };
    dump("means", &model.params.means, &mut out);
    dump("log_stds", &model.params.log_stds, &mut out);
    out
}

pub fn load_checkpoint(path: &Path) -> Result<BnnModel, PredictorError> {
    let text = std::fs::read_to_string(path)?;
    checkpoint_from_string(&text)
}

pub fn checkpoint_from_string(text: &str) -> Result<BnnModel, PredictorError> {
    let mut lines = text.lines();
    let bad = |msg: &str| PredictorError::Checkpoint(msg.to_string());
    if lines.next() != Some("leoslice-bnn v1") {
        return Err(bad("missing header"));
    }
    let mut field = |name: &str| -> Result<Vec<f64>, PredictorError> {
        let line = lines.next().ok_or_else(|| bad("truncated checkpoint"))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(bad(&format!("expected field {name}")));
        }
        parts
            .map(|p| p.parse::<f64>().map_err(|e| bad(&format!("bad {name}: {e}"))))
            .collect()
    };
    let hidden = field("hidden_size")?[0] as usize;
    let history = field("history_len")?[0] as usize;
    let prior_std = field("prior_std")?[0];
    let norm_mean = field("norm_mean")?;
    let norm_scale = field("norm_scale")?;

    let mut model = BnnModel::new(hidden, history, prior_std, 0.05, 0);
    if norm_mean.len() != FEATURE_DIM || norm_scale.len() != FEATURE_DIM {
        return Err(bad("bad normalization stats"));
    }
    model.norm_mean = [norm_mean[0], norm_mean[1]];
    model.norm_scale = [norm_scale[0], norm_scale[1]];

    let array = |name: &str, lines: &mut std::str::Lines| -> Result<Vec<f64>, PredictorError> {
        let head = lines.next().ok_or_else(|| bad("truncated checkpoint"))?;
        let mut parts = head.split_whitespace();
        if parts.next() != Some(name) {
            return Err(bad(&format!("expected array {name}")));
        }
        let n: usize = parts
            .next()
            .ok_or_else(|| bad("missing array length"))?
            .parse()
            .map_err(|_| bad("bad array length"))?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let v = lines
                .next()
                .ok_or_else(|| bad("truncated array"))?
                .parse::<f64>()
                .map_err(|e| bad(&format!("bad value: {e}")))?;
            values.push(v);
        }
        Ok(values)
    };
    let means = array("means", &mut lines)?;
    let log_stds = array("log_stds", &mut lines)?;
    if means.len() != model.parameter_count() || log_stds.len() != model.parameter_count() {
        return Err(bad("parameter count mismatch"));
    }
    model.params.means = means;
    model.params.log_stds = log_stds;
    // A saved model always carries usable normalization stats.
    model.mark_normalization_ready();
    Ok(model)
}

#[cfg(test)]
mod tests;
