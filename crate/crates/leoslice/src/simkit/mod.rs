//! Scenario orchestration: the time-slotted simulation loop, the four
//! slicing schemes, metric accounting, and the elevation sweep.

pub mod config;
pub mod report;

pub use config::{ConfigError, ScenarioConfig, Scheme, SeedConfig, ViolationMode};
pub use report::{summary_csv, summary_table, RunReport, RunSummary, SlotMetrics};

use crate::constellation::{build_schedule, ConstellationError, CoverageSchedule};
use crate::demand::{extract_features, generate, ingest_csv, DemandError, DemandTrace};
use crate::linkmodel::{effective_bandwidth, total_delay, DemandModel, LinkError};
use crate::predictor::{mix_seed, BnnModel, PredictedFeature, PredictorError, TrainingSet};
use crate::slicer::{
    best_effort_decision, execute_on_coverage, solve_window, SliceError, SlicingDecision,
    SlotDemand,
};
use crate::twin::{adaptive_step, demand_from_prediction, FeatureCache, TwinContext, TwinPolicy};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Constellation(#[from] ConstellationError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("window {window}: {source}")]
    Slice { window: usize, source: SliceError },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("demand trace covers {got} s but the scenario needs {needed} s")]
    TraceTooShort { got: usize, needed: usize },
}

/// Run one scenario end to end and produce the metrics report.
pub fn run(config: &ScenarioConfig) -> Result<RunReport, SimError> {
    config.validate()?;
    let schedule = build_schedule(
        &config.constellation,
        &config.area,
        config.horizon_slots(),
        config.sim.slot_duration_s as f64,
        config.sim.window_len,
    )?;
    let trace = load_trace(config)?;
    Simulation::new(config, &schedule, &trace)?.run()
}

/// One run per elevation angle, everything else (including seeds) fixed.
pub fn sweep_elevation(
    config: &ScenarioConfig,
    angles: &[f64],
) -> Result<Vec<RunReport>, SimError> {
    let mut reports = Vec::with_capacity(angles.len());
    for &angle in angles {
        let mut variant = config.clone();
        variant.area.min_elevation_deg = angle;
        reports.push(run(&variant)?);
    }
    Ok(reports)
}

fn load_trace(config: &ScenarioConfig) -> Result<DemandTrace, SimError> {
    let trace = match config.demand.source.as_str() {
        "trace" => {
            let path = config.demand.trace_path.as_deref().expect("validated");
            ingest_csv(Path::new(path))?
        }
        _ => generate(&config.regime(), config.sim.seeds.demand)?,
    };
    let needed = config.total_trace_seconds();
    if trace.duration_s() < needed {
        return Err(SimError::TraceTooShort { got: trace.duration_s(), needed });
    }
    Ok(trace)
}

struct Simulation<'a> {
    config: &'a ScenarioConfig,
    schedule: &'a CoverageSchedule,
    trace: &'a DemandTrace,
    model: BnnModel,
    cache: FeatureCache,
    repredictions: u32,
    infeasible_windows: usize,
    events: Vec<crate::twin::TwinEvent>,
    metrics: Vec<SlotMetrics>,
}

impl<'a> Simulation<'a> {
    fn new(
        config: &'a ScenarioConfig,
        schedule: &'a CoverageSchedule,
        trace: &'a DemandTrace,
    ) -> Result<Self, SimError> {
        let p = &config.predictor;
        let mut cache =
            FeatureCache::new(config.sim.warmup_slots + config.horizon_slots() + p.history_len);
        let mut sim = Simulation {
            config,
            schedule,
            trace,
            model: BnnModel::new(
                p.hidden_size,
                p.history_len,
                p.prior_std,
                p.init_std,
                mix_seed(config.sim.seeds.training, 0xA11CE),
            ),
            cache: FeatureCache::new(0),
            repredictions: 0,
            infeasible_windows: 0,
            events: Vec::new(),
            metrics: Vec::new(),
        };
        // Warmup features precede the simulation horizon.
        for slot in 0..config.sim.warmup_slots {
            let samples = sim.warmup_slot_samples(slot);
            cache.push_actual(extract_features(samples)?);
        }
        sim.cache = cache;
        // The oracle-demand scheme never consults the predictor.
        if config.sim.scheme != Scheme::Perfect {
            let data = TrainingSet::from_series(&sim.cache.historical, p.history_len);
            sim.model.train(
                &data,
                &p.train_options(p.epochs),
                mix_seed(config.sim.seeds.training, 1),
            )?;
        }
        Ok(sim)
    }

    fn tau(&self) -> usize {
        self.config.sim.slot_duration_s
    }

    fn warmup_slot_samples(&self, slot: usize) -> &[f64] {
        let start = slot * self.tau();
        &self.trace.samples[start..start + self.tau()]
    }

    /// Per-second samples of a horizon slot (global index).
    fn horizon_slot_samples(&self, global_slot: usize) -> &[f64] {
        let start = (self.config.sim.warmup_slots + global_slot) * self.tau();
        &self.trace.samples[start..start + self.tau()]
    }

    fn twin_context(&self, window: usize, serving: &'a [usize]) -> TwinContext<'a> {
        TwinContext {
            schedule: self.schedule,
            window,
            satellite_ids: serving,
            link: &self.config.link,
            weights: self.config.weights(),
            big_m: self.config.sim.big_m,
            dispersion_tolerance: self.config.predictor.dispersion_tolerance,
        }
    }

    /// Scheme-specific window plan: predictions (where applicable), the
    /// per-slot demand specs, and the solved decision.
    fn plan_window(
        &mut self,
        window: usize,
        serving: &[usize],
    ) -> Result<(Vec<PredictedFeature>, SlicingDecision), SimError> {
        let scheme = self.config.sim.scheme;
        let p = &self.config.predictor;
        let t_len = self.config.sim.window_len;

        let (predictions, demands): (Vec<PredictedFeature>, Vec<SlotDemand>) = match scheme {
            Scheme::Perfect => {
                let theta = self.config.link.qos_exponent;
                let demands = (0..t_len)
                    .map(|t| {
                        let g = self.schedule.global_slot(window, t);
                        let samples = self.horizon_slot_samples(g).to_vec();
                        let eb = effective_bandwidth(&DemandModel::Empirical { samples }, theta)?;
                        Ok(SlotDemand::Threshold { value: eb })
                    })
                    .collect::<Result<Vec<_>, SimError>>()?;
                (Vec::new(), demands)
            }
            Scheme::Frs => {
                let mut collapsed = self.model.clone();
                collapsed.collapse_stds();
                let history = self.cache.recent(p.history_len);
                let predictions = collapsed.multistep_predict(
                    history,
                    t_len,
                    1,
                    mix_seed(self.config.sim.seeds.prediction, window as u64),
                )?;
                let demands = predictions
                    .iter()
                    .map(|pf| demand_from_prediction(pf, p.dispersion_tolerance))
                    .collect();
                (predictions, demands)
            }
            Scheme::Fdtrs | Scheme::Adtrs => {
                let history = self.cache.recent(p.history_len);
                let predictions = self.model.multistep_predict(
                    history,
                    t_len,
                    p.mc_samples,
                    mix_seed(self.config.sim.seeds.prediction, window as u64),
                )?;
                let demands = predictions
                    .iter()
                    .map(|pf| demand_from_prediction(pf, p.dispersion_tolerance))
                    .collect();
                (predictions, demands)
            }
        };

        let ctx = self.twin_context(window, serving);
        let problem = ctx.remaining_problem(0, &demands, vec![None; serving.len()], self.config.sim.gamma);
        let decision = match solve_window(&problem) {
            Ok(d) => d,
            Err(SliceError::Infeasible { .. }) => {
                self.infeasible_windows += 1;
                best_effort_decision(&problem)
            }
            Err(e) => return Err(SimError::Slice { window, source: e }),
        };
        Ok((predictions, decision))
    }

    fn run(mut self) -> Result<RunReport, SimError> {
        let scheme = self.config.sim.scheme;
        let p = self.config.predictor.clone();
        let policy = TwinPolicy {
            alpha: self.config.sim.alpha,
            gamma: self.config.sim.gamma,
            reslice_enabled: scheme == Scheme::Adtrs,
            reslice_improvement_margin: self.config.sim.reslice_improvement_margin,
        };

        for window in 0..self.config.sim.windows {
            // Periodic retraining: a fresh posterior fitted to the most
            // recent slots, so normalization and uncertainty follow the
            // current regime.
            if scheme != Scheme::Perfect && window > 0 {
                let recent = self.cache.recent(p.retrain_slots).to_vec();
                let data = TrainingSet::from_series(&recent, p.history_len);
                if !data.is_empty() {
                    let mut fresh = BnnModel::new(
                        p.hidden_size,
                        p.history_len,
                        p.prior_std,
                        p.init_std,
                        mix_seed(self.config.sim.seeds.training, 0xBEE + window as u64),
                    );
                    fresh.train(
                        &data,
                        &p.train_options(p.retrain_epochs),
                        mix_seed(self.config.sim.seeds.training, 100 + window as u64),
                    )?;
                    self.model = fresh;
                }
            }

            let serving = self.schedule.serving_set(window);
            if serving.is_empty() {
                self.record_uncovered_window(window)?;
                continue;
            }
            let (predictions, mut decision) = self.plan_window(window, &serving)?;
            self.cache.begin_window(predictions);

            for t in 0..self.config.sim.window_len {
                execute_on_coverage(&mut decision, self.schedule, window, t);
                let metrics = self.slot_metrics(window, t, &serving, &decision)?;
                self.metrics.push(metrics);

                let g = self.schedule.global_slot(window, t);
                let actual = extract_features(self.horizon_slot_samples(g))?;
                self.cache.push_actual(actual);

                if scheme == Scheme::Adtrs {
                    let serving_ref: &[usize] = &serving;
                    let ctx = TwinContext {
                        schedule: self.schedule,
                        window,
                        satellite_ids: serving_ref,
                        link: &self.config.link,
                        weights: self.config.weights(),
                        big_m: self.config.sim.big_m,
                        dispersion_tolerance: p.dispersion_tolerance,
                    };
                    let event = adaptive_step(
                        &ctx,
                        &policy,
                        &mut self.cache,
                        &self.model,
                        &p,
                        &mut decision,
                        &actual,
                        t,
                        &mut self.repredictions,
                        self.config.sim.seeds.prediction,
                    );
                    self.events.push(event);
                } else if !self.cache.predicted.is_empty() {
                    // Keep the predicted queue aligned with remaining slots.
                    self.cache.predicted.remove(0);
                }
            }
        }

        Ok(RunReport {
            scheme: scheme.label(self.config.sim.gamma),
            config_digest: self.config.digest(),
            windows: self.config.sim.windows,
            window_len: self.config.sim.window_len,
            per_slot: self.metrics,
            repredictions: self.repredictions,
            infeasible_windows: self.infeasible_windows,
            events: self.events,
        })
    }

    /// Metrics of one served slot under the current decision.
    fn slot_metrics(
        &self,
        window: usize,
        t: usize,
        serving: &[usize],
        decision: &SlicingDecision,
    ) -> Result<SlotMetrics, SimError> {
        let g = self.schedule.global_slot(window, t);
        let link = &self.config.link;
        let mut capacity = 0.0;
        let mut resource_hz = 0.0;
        let mut delay = 0.0f64;
        let mut active = 0usize;
        let mut reservations = Vec::new();
        for (i, &sat) in serving.iter().enumerate() {
            let b = decision.executed(i);
            let visible = self.schedule.visible[sat][g];
            let d_km = self.schedule.distance_km[sat][g];
            if b > 0.0 {
                reservations.push((sat, b));
            }
            if visible && b > 0.0 {
                capacity += b * link.rate_coefficient(d_km);
                resource_hz += b * link.bandwidth_hz;
                active += 1;
            }
            delay = delay.max(total_delay(visible, b, link, d_km));
        }

        let samples = self.horizon_slot_samples(g);
        let theta = link.qos_exponent;
        let demand_pps = match self.config.sim.violation_mode {
            ViolationMode::Empirical => {
                effective_bandwidth(&DemandModel::Empirical { samples: samples.to_vec() }, theta)?
            }
            ViolationMode::Mean => crate::stats::mean(samples),
        };
        Ok(SlotMetrics {
            window,
            slot: g,
            resource_hz,
            delay_cost_s: delay,
            violated: capacity < demand_pps,
            active_satellites: active,
            capacity_pps: capacity,
            demand_pps,
            reservations,
        })
    }

    /// A window with no serving satellites: zero reservations throughout.
    fn record_uncovered_window(&mut self, window: usize) -> Result<(), SimError> {
        for t in 0..self.config.sim.window_len {
            let g = self.schedule.global_slot(window, t);
            let samples = self.horizon_slot_samples(g).to_vec();
            let theta = self.config.link.qos_exponent;
            let demand_pps = match self.config.sim.violation_mode {
                ViolationMode::Empirical => effective_bandwidth(
                    &DemandModel::Empirical { samples: samples.clone() },
                    theta,
                )?,
                ViolationMode::Mean => crate::stats::mean(&samples),
            };
            self.metrics.push(SlotMetrics {
                window,
                slot: g,
                resource_hz: 0.0,
                delay_cost_s: 0.0,
                violated: demand_pps > 0.0,
                active_satellites: 0,
                capacity_pps: 0.0,
                demand_pps,
                reservations: Vec::new(),
            });
            let actual = extract_features(&samples)?;
            self.cache.push_actual(actual);
        }
        Ok(())
    }
}
