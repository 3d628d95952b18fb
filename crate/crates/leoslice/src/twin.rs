//! Slice digital twin: feature caches, discounted prediction revision,
//! emulation of the committed decision against revised demand, and the
//! re-prediction/re-slicing trigger.

use crate::constellation::CoverageSchedule;
use crate::demand::DemandFeature;
use crate::linkmodel::LinkParams;
use crate::predictor::{
    fit_distribution, mix_seed, BnnModel, PredictedFeature, PredictorConfig,
};
use crate::slicer::{
    evaluate_candidate, solve_window, CostWeights, SliceError, SliceProblem, SlicingDecision,
    SlotDemand, SlotRow,
};
use serde::{Deserialize, Serialize};

/// Twin behaviour knobs; `reslice_enabled` distinguishes the adaptive scheme
/// from the fixed DT-assisted one.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TwinPolicy {
    /// Discount factor of the revision rule, in (0,1).
    pub alpha: f64,
    /// Satisfaction level used when refitting demand.
    pub gamma: f64,
    pub reslice_enabled: bool,
    /// Relative cost improvement a re-solve must show before the cheaper-plan
    /// trigger fires. The committed plan is almost never exactly optimal for
    /// revised demand, so an ungated comparison would re-slice every eligible
    /// slot.
    #[serde(default = "default_improvement_margin")]
    pub reslice_improvement_margin: f64,
}

fn default_improvement_margin() -> f64 {
    0.02
}

/// Historical and predicted demand-feature queues.
#[derive(Debug, Clone, Default)]
pub struct FeatureCache {
    /// Chronological actual features, bounded by `max_history`.
    pub historical: Vec<DemandFeature>,
    /// Predictions for the remaining slots of the current window.
    pub predicted: Vec<PredictedFeature>,
    /// Last window slot whose revision has been applied.
    pub last_revised_slot: Option<usize>,
    pub max_history: usize,
}

impl FeatureCache {
    pub fn new(max_history: usize) -> Self {
        Self { historical: Vec::new(), predicted: Vec::new(), last_revised_slot: None, max_history }
    }

    pub fn push_actual(&mut self, feature: DemandFeature) {
        self.historical.push(feature);
        if self.historical.len() > self.max_history {
            let excess = self.historical.len() - self.max_history;
            self.historical.drain(0..excess);
        }
    }

    /// Install a fresh window's predictions and reset the revision marker.
    pub fn begin_window(&mut self, predictions: Vec<PredictedFeature>) {
        self.predicted = predictions;
        self.last_revised_slot = None;
    }

    pub fn recent(&self, count: usize) -> &[DemandFeature] {
        let start = self.historical.len().saturating_sub(count);
        &self.historical[start..]
    }
}

/// Apply the discounted-residual revision after slot `t_prime` completes:
/// every remaining prediction at offset d >= 1 shifts by alpha^d times the
/// residual at t_prime, on both feature components (variance clamped at 0).
/// A repeated call for the same slot is a no-op.
pub fn revise_features(
    cache: &mut FeatureCache,
    actual: &DemandFeature,
    t_prime: usize,
    alpha: f64,
) {
    if cache.last_revised_slot == Some(t_prime) || cache.predicted.is_empty() {
        cache.last_revised_slot = Some(t_prime);
        return;
    }
    let front = cache.predicted.remove(0);
    let residual_mean = actual.mean - front.feature.mean;
    let residual_var = actual.variance - front.feature.variance;
    let mut decay = alpha;
    for pf in cache.predicted.iter_mut() {
        pf.feature.mean += decay * residual_mean;
        pf.feature.variance = (pf.feature.variance + decay * residual_var).max(0.0);
        decay *= alpha;
    }
    cache.last_revised_slot = Some(t_prime);
}

/// Demand spec for one slot from a predicted feature, routed through the
/// same distribution-fitting classifier as planning. Non-positive predicted
/// means carry no demand.
pub fn demand_from_prediction(pf: &PredictedFeature, dispersion_tolerance: f64) -> SlotDemand {
    if pf.feature.mean <= 0.0 {
        return SlotDemand::Threshold { value: 0.0 };
    }
    SlotDemand::from(fit_distribution(pf, dispersion_tolerance).expect("positive mean"))
}

/// Emulation outcome over the remaining slots of a window.
#[derive(Debug, Clone)]
pub struct EmulationReport {
    /// Estimated remaining-window cost under the committed decision.
    pub cost: f64,
    /// Capacity >= revised threshold, per remaining slot.
    pub constraint_ok: Vec<bool>,
    pub any_unexecuted_remaining: bool,
}

/// Static inputs shared by the per-window twin operations.
pub struct TwinContext<'a> {
    pub schedule: &'a CoverageSchedule,
    pub window: usize,
    pub satellite_ids: &'a [usize],
    pub link: &'a LinkParams,
    pub weights: CostWeights,
    pub big_m: f64,
    pub dispersion_tolerance: f64,
}

impl<'a> TwinContext<'a> {
    /// Slice problem over window slots `first..window_len` with the given
    /// demands and locks.
    pub fn remaining_problem(
        &self,
        first: usize,
        demands: &[SlotDemand],
        locked: Vec<Option<f64>>,
        gamma: f64,
    ) -> SliceProblem {
        let t_len = self.schedule.window_len;
        let mut slots = Vec::with_capacity(t_len - first);
        for (i, t) in (first..t_len).enumerate() {
            let g = self.schedule.global_slot(self.window, t);
            let visible: Vec<bool> =
                self.satellite_ids.iter().map(|&s| self.schedule.visible[s][g]).collect();
            let distance_km: Vec<f64> =
                self.satellite_ids.iter().map(|&s| self.schedule.distance_km[s][g]).collect();
            slots.push(SlotRow { visible, distance_km, demand: demands[i] });
        }
        SliceProblem {
            window: self.window,
            satellite_ids: self.satellite_ids.to_vec(),
            slots,
            link: self.link.clone(),
            weights: self.weights,
            gamma,
            big_m: self.big_m,
            locked,
        }
    }

    fn locks_of(&self, decision: &SlicingDecision) -> Vec<Option<f64>> {
        (0..decision.satellite_ids.len())
            .map(|i| decision.locked[i].then_some(decision.executed_b[i]))
            .collect()
    }
}

/// Emulate the committed decision against the revised predicted queue for
/// the remaining slots after `slot` (0-based, just completed). Uses the same
/// P2 objective as the solver, with executed reservations as fixed cost.
pub fn emulate(
    ctx: &TwinContext,
    decision: &SlicingDecision,
    cache: &FeatureCache,
    slot: usize,
    gamma: f64,
) -> EmulationReport {
    let first = slot + 1;
    let t_len = ctx.schedule.window_len;
    if first >= t_len {
        return EmulationReport {
            cost: 0.0,
            constraint_ok: Vec::new(),
            any_unexecuted_remaining: false,
        };
    }
    let demands: Vec<SlotDemand> = cache
        .predicted
        .iter()
        .map(|pf| demand_from_prediction(pf, ctx.dispersion_tolerance))
        .collect();
    debug_assert_eq!(demands.len(), t_len - first);
    let problem = ctx.remaining_problem(first, &demands, ctx.locks_of(decision), gamma);
    let thresholds = problem.thresholds().unwrap_or_else(|_| vec![0.0; problem.slot_count()]);

    let n = decision.satellite_ids.len();
    let mut b = vec![0.0; n];
    let mut r = vec![false; n];
    for i in 0..n {
        let (bi, ri) = decision.committed(i);
        b[i] = bi;
        r[i] = ri;
    }
    let cost = evaluate_candidate(&problem, &thresholds, &b, &r);

    let any_unexecuted_remaining = (0..n).any(|i| {
        !decision.locked[i]
            && has_no_coverage_up_to(ctx, decision.satellite_ids[i], slot)
            && has_future_coverage(ctx, decision.satellite_ids[i], slot)
    });

    EmulationReport {
        cost: cost.total,
        constraint_ok: cost.slot_feasible,
        any_unexecuted_remaining,
    }
}

fn has_no_coverage_up_to(ctx: &TwinContext, sat: usize, slot: usize) -> bool {
    (0..=slot).all(|t| !ctx.schedule.visible[sat][ctx.schedule.global_slot(ctx.window, t)])
}

fn has_future_coverage(ctx: &TwinContext, sat: usize, slot: usize) -> bool {
    (slot + 1..ctx.schedule.window_len)
        .any(|t| ctx.schedule.visible[sat][ctx.schedule.global_slot(ctx.window, t)])
}

/// Outcome of the per-slot adaptation check.
#[derive(Debug, Clone, PartialEq)]
pub enum ResliceOutcome {
    Keep,
    /// The decision was replaced and the predicted queue re-predicted.
    Resliced,
    /// The trigger fired but the remaining window was unsolvable; the
    /// current decision is kept as best effort.
    KeptInfeasible,
}

/// Per-slot twin event for the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinEvent {
    pub window: usize,
    pub slot: usize,
    pub emulated_cost: f64,
    pub constraints_ok: usize,
    pub constraints_total: usize,
    pub action: &'static str,
    pub repredictions: u32,
}

/// The adaptive core: after slot `slot` of the window completes (features
/// revised, emulation report in hand), decide whether to re-predict and
/// re-solve the remaining slots for the satellites not yet executed.
#[allow(clippy::too_many_arguments)]
pub fn maybe_reslice(
    ctx: &TwinContext,
    policy: &TwinPolicy,
    report: &EmulationReport,
    cache: &mut FeatureCache,
    model: &BnnModel,
    predictor_cfg: &PredictorConfig,
    decision: &mut SlicingDecision,
    slot: usize,
    repredictions: &mut u32,
    prediction_seed: u64,
) -> ResliceOutcome {
    if !policy.reslice_enabled || !report.any_unexecuted_remaining {
        return ResliceOutcome::Keep;
    }
    let first = slot + 1;
    if first >= ctx.schedule.window_len {
        return ResliceOutcome::Keep;
    }

    // Trigger: a violated constraint under revised demand, or a cheaper
    // re-solve of the remaining slots on the same revised demand.
    let constraints_violated = report.constraint_ok.iter().any(|&ok| !ok);
    let locks = ctx.locks_of(decision);
    let revised_demands: Vec<SlotDemand> = cache
        .predicted
        .iter()
        .map(|pf| demand_from_prediction(pf, ctx.dispersion_tolerance))
        .collect();
    let revised_problem = ctx.remaining_problem(first, &revised_demands, locks.clone(), policy.gamma);
    let resolve_cheaper = match solve_window(&revised_problem) {
        Ok(resolved) => {
            resolved.objective < report.cost * (1.0 - policy.reslice_improvement_margin)
        }
        Err(_) => false,
    };
    if !constraints_violated && !resolve_cheaper {
        return ResliceOutcome::Keep;
    }

    // Re-predict the remaining slots from actual history (wholesale
    // replacement of the predicted queue), refit, and re-solve.
    let steps = ctx.schedule.window_len - first;
    let history = cache.recent(model.history_len);
    if history.len() < model.history_len {
        return ResliceOutcome::Keep;
    }
    let predictions = match model.multistep_predict(
        history,
        steps,
        predictor_cfg.mc_samples,
        mix_seed(prediction_seed, (ctx.window * 1000 + slot) as u64),
    ) {
        Ok(p) => p,
        Err(_) => return ResliceOutcome::Keep,
    };
    let new_demands: Vec<SlotDemand> = predictions
        .iter()
        .map(|pf| demand_from_prediction(pf, ctx.dispersion_tolerance))
        .collect();
    let problem = ctx.remaining_problem(first, &new_demands, locks, policy.gamma);
    match solve_window(&problem) {
        Ok(new_decision) => {
            cache.predicted = predictions;
            cache.last_revised_slot = Some(slot);
            *decision = new_decision;
            *repredictions += 1;
            ResliceOutcome::Resliced
        }
        Err(SliceError::Infeasible { .. }) => ResliceOutcome::KeptInfeasible,
        Err(_) => ResliceOutcome::KeptInfeasible,
    }
}

/// One ADTRS slot step: lock coverage, revise, emulate, maybe re-slice.
/// Returns the logged event. Runs after the slot's actual feature has been
/// pushed into the cache.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_step(
    ctx: &TwinContext,
    policy: &TwinPolicy,
    cache: &mut FeatureCache,
    model: &BnnModel,
    predictor_cfg: &PredictorConfig,
    decision: &mut SlicingDecision,
    actual: &DemandFeature,
    slot: usize,
    repredictions: &mut u32,
    prediction_seed: u64,
) -> TwinEvent {
    revise_features(cache, actual, slot, policy.alpha);
    let report = emulate(ctx, decision, cache, slot, policy.gamma);
    let outcome = maybe_reslice(
        ctx,
        policy,
        &report,
        cache,
        model,
        predictor_cfg,
        decision,
        slot,
        repredictions,
        prediction_seed,
    );
    TwinEvent {
        window: ctx.window,
        slot: ctx.schedule.global_slot(ctx.window, slot),
        emulated_cost: report.cost,
        constraints_ok: report.constraint_ok.iter().filter(|&&ok| ok).count(),
        constraints_total: report.constraint_ok.len(),
        action: match outcome {
            ResliceOutcome::Keep => "keep",
            ResliceOutcome::Resliced => "reslice",
            ResliceOutcome::KeptInfeasible => "keep_infeasible",
        },
        repredictions: *repredictions,
    }
}

/// Render twin events as the per-slot CSV log.
pub fn events_to_csv(events: &[TwinEvent]) -> String {
    let mut out = String::from("slot,emulated_cost,constraints_ok,constraints_total,action,repredictions\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.slot, e.emulated_cost, e.constraints_ok, e.constraints_total, e.action, e.repredictions
        ));
    }
    out
}
