//! Bayesian LSTM demand-feature predictor trained by backprop through the
//! reparameterization trick.
//!
//! Every network weight carries a variational Gaussian posterior (mean,
//! log-std). The training loss is the closed-form KL to a zero-mean Gaussian
//! prior plus a Monte-Carlo Gaussian negative log-likelihood with learned
//! per-output observation noise. Backpropagation through time is hand-rolled
//! so gradients are exact for the sampled weights; the KL gradient is exact
//! in closed form.

use crate::demand::DemandFeature;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use std::f64::consts::PI;

/// Feature dimension: (mean, variance).
pub const FEATURE_DIM: usize = 2;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("loss became non-finite at epoch {epoch} (reduce the learning rate)")]
    NonFiniteLoss { epoch: usize },
    #[error("prediction history must contain exactly {expected} features, got {got}")]
    BadHistory { expected: usize, got: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mixes two seeds into one stream key (splitmix64 finalizer).
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Index map over the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    hidden: usize,
    input: usize,
    output: usize,
}

impl Layout {
    fn w_ih(&self) -> (usize, usize) {
        (0, 4 * self.hidden * self.input)
    }
    fn w_hh(&self) -> (usize, usize) {
        let s = self.w_ih().1;
        (s, s + 4 * self.hidden * self.hidden)
    }
    fn bias(&self) -> (usize, usize) {
        let s = self.w_hh().1;
        (s, s + 4 * self.hidden)
    }
    fn w_out(&self) -> (usize, usize) {
        let s = self.bias().1;
        (s, s + self.output * self.hidden)
    }
    fn b_out(&self) -> (usize, usize) {
        let s = self.w_out().1;
        (s, s + self.output)
    }
    fn log_noise(&self) -> (usize, usize) {
        let s = self.b_out().1;
        (s, s + self.output)
    }
    fn total(&self) -> usize {
        self.log_noise().1
    }
}

/// Variational parameters: one (mean, log-std) pair per network weight.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    pub means: Vec<f64>,
    pub log_stds: Vec<f64>,
}

/// One (input window, next feature) training pair, raw feature scale.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub inputs: Vec<DemandFeature>,
    pub target: DemandFeature,
}

/// Training set of contiguous-slot windows.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub pairs: Vec<TrainingPair>,
}

impl TrainingSet {
    /// Slide a window of `history_len` over a contiguous feature series.
    pub fn from_series(series: &[DemandFeature], history_len: usize) -> Self {
        let mut pairs = Vec::new();
        if series.len() > history_len {
            for i in 0..series.len() - history_len {
                pairs.push(TrainingPair {
                    inputs: series[i..i + history_len].to_vec(),
                    target: series[i + history_len],
                });
            }
        }
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Gradient of the ELBO with respect to the variational parameters.
#[derive(Debug, Clone)]
pub struct ElboGradient {
    pub d_means: Vec<f64>,
    pub d_log_stds: Vec<f64>,
}

/// Training options for the momentum optimizer.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub mc_samples: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 80,
            learning_rate: 0.02,
            momentum: 0.9,
            clip_norm: 5.0,
            mc_samples: 2,
        }
    }
}

/// Training outcome; `converged = false` flags a final loss above the
/// initial one (reported, not fatal).
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub loss_curve: Vec<f64>,
    pub converged: bool,
}

impl TrainReport {
    pub fn loss_curve_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (i, l) in self.loss_curve.iter().enumerate() {
            out.push_str(&format!("{i},{l}\n"));
        }
        out
    }
}

/// Bayesian recurrent predictor with per-feature affine normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BnnModel {
    pub hidden_size: usize,
    pub history_len: usize,
    pub prior_std: f64,
    pub params: VariationalParams,
    /// Normalization statistics, set on the first training call.
    pub norm_mean: [f64; FEATURE_DIM],
    pub norm_scale: [f64; FEATURE_DIM],
    norm_ready: bool,
    layout: Layout,
}

impl BnnModel {
    /// Fresh model with randomly initialised posterior means and a uniform
    /// initial posterior std.
    pub fn new(hidden_size: usize, history_len: usize, prior_std: f64, init_std: f64, seed: u64) -> Self {
        let layout = Layout { hidden: hidden_size, input: FEATURE_DIM, output: FEATURE_DIM };
        let total = layout.total();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut means: Vec<f64> = (0..total).map(|_| rng.gen_range(-bound..bound)).collect();
        // Observation noise starts at unit std in normalized space.
        let (n0, n1) = layout.log_noise();
        for m in means[n0..n1].iter_mut() {
            *m = 0.0;
        }
        BnnModel {
            hidden_size,
            history_len,
            prior_std,
            params: VariationalParams {
                means,
                log_stds: vec![init_std.ln(); total],
            },
            norm_mean: [0.0; FEATURE_DIM],
            norm_scale: [1.0; FEATURE_DIM],
            norm_ready: false,
            layout,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layout.total()
    }

    /// Forces every weight std to exactly zero, collapsing the model to a
    /// deterministic recurrent network at the posterior means.
    pub fn collapse_stds(&mut self) {
        // exp(-1000) underflows to +0.0, so sampled weights equal the means
        // bit-exactly.
        for l in self.params.log_stds.iter_mut() {
            *l = -1000.0;
        }
    }

    /// Learned observation noise std per output, raw feature scale, taken at
    /// the posterior mean.
    pub fn observation_noise_std(&self) -> [f64; FEATURE_DIM] {
        let (n0, _) = self.layout.log_noise();
        let mut out = [0.0; FEATURE_DIM];
        for j in 0..FEATURE_DIM {
            out[j] = self.params.means[n0 + j].exp() * self.norm_scale[j];
        }
        out
    }

    pub fn normalization_ready(&self) -> bool {
        self.norm_ready
    }

    pub(crate) fn mark_normalization_ready(&mut self) {
        self.norm_ready = true;
    }

    /// Sets normalization from the features appearing in a training set.
    pub fn fit_normalization(&mut self, data: &TrainingSet) {
        let mut all: Vec<[f64; FEATURE_DIM]> = Vec::new();
        for pair in &data.pairs {
            for f in &pair.inputs {
                all.push([f.mean, f.variance]);
            }
            all.push([pair.target.mean, pair.target.variance]);
        }
        for j in 0..FEATURE_DIM {
            let col: Vec<f64> = all.iter().map(|r| r[j]).collect();
            let m = crate::stats::mean(&col);
            let s = crate::stats::population_variance(&col).sqrt();
            self.norm_mean[j] = m;
            self.norm_scale[j] = if s > 1e-9 { s } else { 1.0 };
        }
        self.norm_ready = true;
    }

    fn normalize(&self, f: &DemandFeature) -> [f64; FEATURE_DIM] {
        [
            (f.mean - self.norm_mean[0]) / self.norm_scale[0],
            (f.variance - self.norm_mean[1]) / self.norm_scale[1],
        ]
    }

    fn denormalize(&self, y: [f64; FEATURE_DIM]) -> DemandFeature {
        DemandFeature {
            mean: self.norm_mean[0] + self.norm_scale[0] * y[0],
            variance: self.norm_mean[1] + self.norm_scale[1] * y[1],
        }
    }

    /// Draws one weight vector w = mu + exp(log_std) * eps.
    fn sample_weights(&self, rng: &mut ChaCha12Rng) -> (Vec<f64>, Vec<f64>) {
        let total = self.layout.total();
        let mut eps = vec![0.0; total];
        let mut w = vec![0.0; total];
        for p in 0..total {
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            eps[p] = e;
            w[p] = self.params.means[p] + self.params.log_stds[p].exp() * e;
        }
        (w, eps)
    }

    /// Deterministic forward pass (normalized in/out) with given weights.
    fn forward(&self, weights: &[f64], inputs: &[[f64; FEATURE_DIM]]) -> ForwardTrace {
        let h_size = self.hidden_size;
        let lay = self.layout;
        let (ih0, _) = lay.w_ih();
        let (hh0, _) = lay.w_hh();
        let (b0, _) = lay.bias();
        let (wo0, _) = lay.w_out();
        let (bo0, _) = lay.b_out();

        let mut h = vec![0.0; h_size];
        let mut c = vec![0.0; h_size];
        let mut steps = Vec::with_capacity(inputs.len());

        for x in inputs {
            let mut gates = vec![0.0; 4 * h_size];
            for (r, gate) in gates.iter_mut().enumerate() {
                let mut z = weights[b0 + r];
                for (d, xv) in x.iter().enumerate() {
                    z += weights[ih0 + r * FEATURE_DIM + d] * xv;
                }
                for (k, hv) in h.iter().enumerate() {
                    z += weights[hh0 + r * h_size + k] * hv;
                }
                *gate = z;
            }
            let mut step = StepTrace {
                x: *x,
                h_prev: h.clone(),
                c_prev: c.clone(),
                i: vec![0.0; h_size],
                f: vec![0.0; h_size],
                g: vec![0.0; h_size],
                o: vec![0.0; h_size],
                c: vec![0.0; h_size],
                tc: vec![0.0; h_size],
            };
            for k in 0..h_size {
                step.i[k] = sigmoid(gates[k]);
                step.f[k] = sigmoid(gates[h_size + k]);
                step.g[k] = gates[2 * h_size + k].tanh();
                step.o[k] = sigmoid(gates[3 * h_size + k]);
                step.c[k] = step.f[k] * c[k] + step.i[k] * step.g[k];
                step.tc[k] = step.c[k].tanh();
            }
            for k in 0..h_size {
                c[k] = step.c[k];
                h[k] = step.o[k] * step.tc[k];
            }
            steps.push(step);
        }

        let mut y = [0.0; FEATURE_DIM];
        for (j, yv) in y.iter_mut().enumerate() {
            let mut acc = weights[bo0 + j];
            for (k, hv) in h.iter().enumerate() {
                acc += weights[wo0 + j * h_size + k] * hv;
            }
            *yv = acc;
        }
        ForwardTrace { steps, h_last: h, y }
    }

    /// NLL of one pair plus its gradient with respect to the sampled
    /// weights, accumulated into `grad`.
    fn nll_backward(
        &self,
        weights: &[f64],
        inputs: &[[f64; FEATURE_DIM]],
        target: [f64; FEATURE_DIM],
        grad: &mut [f64],
        scale: f64,
    ) -> f64 {
        let h_size = self.hidden_size;
        let lay = self.layout;
        let (ih0, _) = lay.w_ih();
        let (hh0, _) = lay.w_hh();
        let (b0, _) = lay.bias();
        let (wo0, _) = lay.w_out();
        let (bo0, _) = lay.b_out();
        let (n0, _) = lay.log_noise();

        let trace = self.forward(weights, inputs);

        // Gaussian NLL with per-output learned log-std.
        let mut nll = 0.0;
        let mut dy = [0.0; FEATURE_DIM];
        for j in 0..FEATURE_DIM {
            let log_sigma = weights[n0 + j];
            let sigma2 = (2.0 * log_sigma).exp();
            let r = target[j] - trace.y[j];
            nll += log_sigma + 0.5 * r * r / sigma2 + 0.5 * (2.0 * PI).ln();
            dy[j] = -r / sigma2;
            grad[n0 + j] += scale * (1.0 - r * r / sigma2);
        }

        // Output head.
        let mut dh = vec![0.0; h_size];
        for j in 0..FEATURE_DIM {
            grad[bo0 + j] += scale * dy[j];
            for k in 0..h_size {
                grad[wo0 + j * h_size + k] += scale * dy[j] * trace.h_last[k];
                dh[k] += weights[wo0 + j * h_size + k] * dy[j];
            }
        }

        // Backprop through time.
        let mut dc = vec![0.0; h_size];
        for step in trace.steps.iter().rev() {
            let mut dz = vec![0.0; 4 * h_size];
            for k in 0..h_size {
                let do_ = dh[k] * step.tc[k];
                let dtc = dh[k] * step.o[k];
                let dck = dc[k] + dtc * (1.0 - step.tc[k] * step.tc[k]);
                let di = dck * step.g[k];
                let df = dck * step.c_prev[k];
                let dg = dck * step.i[k];
                dz[k] = di * step.i[k] * (1.0 - step.i[k]);
                dz[h_size + k] = df * step.f[k] * (1.0 - step.f[k]);
                dz[2 * h_size + k] = dg * (1.0 - step.g[k] * step.g[k]);
                dz[3 * h_size + k] = do_ * step.o[k] * (1.0 - step.o[k]);
                dc[k] = dck * step.f[k];
            }
            let mut dh_prev = vec![0.0; h_size];
            for (r, dzr) in dz.iter().enumerate() {
                grad[b0 + r] += scale * dzr;
                for d in 0..FEATURE_DIM {
                    grad[ih0 + r * FEATURE_DIM + d] += scale * dzr * step.x[d];
                }
                for k in 0..h_size {
                    grad[hh0 + r * h_size + k] += scale * dzr * step.h_prev[k];
                    dh_prev[k] += weights[hh0 + r * h_size + k] * dzr;
                }
            }
            dh = dh_prev;
        }
        nll
    }

    /// Closed-form KL(q || prior) summed over parameters, plus its gradient.
    fn kl_and_gradient(&self, grad: &mut ElboGradient) -> f64 {
        let sp2 = self.prior_std * self.prior_std;
        let ln_sp = self.prior_std.ln();
        let mut kl = 0.0;
        for p in 0..self.layout.total() {
            let m = self.params.means[p];
            let l = self.params.log_stds[p];
            let s2 = (2.0 * l).exp();
            kl += ln_sp - l + (s2 + m * m) / (2.0 * sp2) - 0.5;
            grad.d_means[p] += m / sp2;
            grad.d_log_stds[p] += s2 / sp2 - 1.0;
        }
        kl
    }

    /// ELBO loss (KL + averaged Monte-Carlo NLL over the batch) and its
    /// gradient with respect to the variational parameters. Deterministic
    /// for a fixed seed; the same seed reproduces the same weight draws.
    pub fn elbo_loss(
        &self,
        batch: &TrainingSet,
        mc_samples: usize,
        seed: u64,
    ) -> Result<(f64, ElboGradient), PredictorError> {
        assert!(mc_samples >= 1);
        let total = self.layout.total();
        let mut grad = ElboGradient {
            d_means: vec![0.0; total],
            d_log_stds: vec![0.0; total],
        };
        let mut loss = self.kl_and_gradient(&mut grad);

        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let scale = 1.0 / mc_samples as f64;
        for _ in 0..mc_samples {
            let (weights, eps) = self.sample_weights(&mut rng);
            let mut grad_w = vec![0.0; total];
            let mut nll_sum = 0.0;
            for pair in &batch.pairs {
                let inputs: Vec<[f64; FEATURE_DIM]> =
                    pair.inputs.iter().map(|f| self.normalize(f)).collect();
                let target = self.normalize(&pair.target);
                nll_sum += self.nll_backward(&weights, &inputs, target, &mut grad_w, 1.0);
            }
            loss += scale * nll_sum;
            // Reparameterization: dL/dmu = dL/dw, dL/dlog_std = dL/dw*eps*std.
            for p in 0..total {
                grad.d_means[p] += scale * grad_w[p];
                grad.d_log_stds[p] +=
                    scale * grad_w[p] * eps[p] * self.params.log_stds[p].exp();
            }
        }
        if !loss.is_finite() {
            return Err(PredictorError::NonFiniteLoss { epoch: 0 });
        }
        Ok((loss, grad))
    }

    /// Full-batch momentum training with global-norm gradient clipping.
    pub fn train(
        &mut self,
        data: &TrainingSet,
        options: &TrainOptions,
        seed: u64,
    ) -> Result<TrainReport, PredictorError> {
        if data.is_empty() {
            return Err(PredictorError::EmptyTrainingSet);
        }
        if !self.norm_ready {
            self.fit_normalization(data);
        }
        let total = self.layout.total();
        let mut vel_m = vec![0.0; total];
        let mut vel_l = vec![0.0; total];
        let mut curve = Vec::with_capacity(options.epochs + 1);

        let (initial, _) = self.elbo_loss(data, options.mc_samples, mix_seed(seed, u64::MAX))?;
        curve.push(initial);

        for epoch in 0..options.epochs {
            let (loss, grad) = self
                .elbo_loss(data, options.mc_samples, mix_seed(seed, epoch as u64))
                .map_err(|_| PredictorError::NonFiniteLoss { epoch })?;
            curve.push(loss);

            let norm2: f64 = grad
                .d_means
                .iter()
                .chain(grad.d_log_stds.iter())
                .map(|g| g * g)
                .sum();
            let norm = norm2.sqrt();
            let clip = if norm > options.clip_norm { options.clip_norm / norm } else { 1.0 };

            for p in 0..total {
                vel_m[p] = options.momentum * vel_m[p] - options.learning_rate * clip * grad.d_means[p];
                self.params.means[p] += vel_m[p];
                vel_l[p] =
                    options.momentum * vel_l[p] - options.learning_rate * clip * grad.d_log_stds[p];
                self.params.log_stds[p] += vel_l[p];
                // Keep posterior stds in a representable band.
                self.params.log_stds[p] = self.params.log_stds[p].clamp(-12.0, 3.0);
            }
        }

        let (fin, _) = self.elbo_loss(data, options.mc_samples, mix_seed(seed, u64::MAX))?;
        curve.push(fin);
        let converged = fin <= curve[0];
        Ok(TrainReport { loss_curve: curve, converged })
    }

    /// One-slot-ahead prediction: mean and spread over `mc_samples`
    /// reparameterized passes. The spread is the population std, so a single
    /// sample or collapsed weights give exactly zero uncertainty.
    pub fn predict(
        &self,
        history: &[DemandFeature],
        mc_samples: usize,
        seed: u64,
    ) -> Result<PredictedFeature, PredictorError> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        self.predict_with_rng(history, mc_samples, &mut rng)
    }

    fn predict_with_rng(
        &self,
        history: &[DemandFeature],
        mc_samples: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<PredictedFeature, PredictorError> {
        if history.len() != self.history_len {
            return Err(PredictorError::BadHistory {
                expected: self.history_len,
                got: history.len(),
            });
        }
        let inputs: Vec<[f64; FEATURE_DIM]> = history.iter().map(|f| self.normalize(f)).collect();
        let mut outputs = Vec::with_capacity(mc_samples);
        for _ in 0..mc_samples.max(1) {
            let (weights, _) = self.sample_weights(rng);
            let trace = self.forward(&weights, &inputs);
            outputs.push(self.denormalize(trace.y));
        }
        let means: Vec<f64> = outputs.iter().map(|f| f.mean).collect();
        let vars: Vec<f64> = outputs.iter().map(|f| f.variance).collect();
        // Bit-identical passes (collapsed stds, or a single sample) must
        // report exactly zero spread; averaging would leave 1-ulp residue.
        let spread = |xs: &[f64]| {
            if xs.iter().all(|&x| x == xs[0]) {
                0.0
            } else {
                crate::stats::population_variance(xs).sqrt()
            }
        };
        Ok(PredictedFeature {
            feature: DemandFeature {
                mean: crate::stats::mean(&means),
                variance: crate::stats::mean(&vars),
            },
            sd_mean: spread(&means),
            sd_variance: spread(&vars),
        })
    }

    /// Autoregressive rollout: each step predicts from the last
    /// `history_len` entries of (actual history ++ predicted means), feeding
    /// the averaged prediction back as pseudo-history.
    pub fn multistep_predict(
        &self,
        history: &[DemandFeature],
        steps: usize,
        mc_samples: usize,
        seed: u64,
    ) -> Result<Vec<PredictedFeature>, PredictorError> {
        if history.len() != self.history_len {
            return Err(PredictorError::BadHistory {
                expected: self.history_len,
                got: history.len(),
            });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut buffer: Vec<DemandFeature> = history.to_vec();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let start = buffer.len() - self.history_len;
            let pf = self.predict_with_rng(&buffer[start..], mc_samples, &mut rng)?;
            buffer.push(pf.feature);
            out.push(pf);
        }
        Ok(out)
    }
}

/// Predicted demand feature with the MC spread of both components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedFeature {
    /// Averaged predicted feature.
    pub feature: DemandFeature,
    /// Std of the predicted mean component across MC passes.
    pub sd_mean: f64,
    /// Std of the predicted variance component across MC passes.
    pub sd_variance: f64,
}

struct StepTrace {
    x: [f64; FEATURE_DIM],
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
}

struct ForwardTrace {
    steps: Vec<StepTrace>,
    h_last: Vec<f64>,
    y: [f64; FEATURE_DIM],
}
