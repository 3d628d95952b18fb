//! Per-window resource slicing: deterministic equivalents of the chance
//! constraint, the big-M delay expression, the mixed-integer convex solve,
//! and the execute-on-first-coverage lock semantics.

pub mod oracle;
mod solve;

pub use solve::{best_effort_decision, solve_window};

use crate::constellation::CoverageSchedule;
use crate::linkmodel::LinkParams;
use crate::predictor::FittedDemandDistribution;
use crate::stats::std_normal_quantile;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SliceError {
    #[error("satisfaction level {0} leaves the Gaussian quantile unbounded; use gamma < 1")]
    DegenerateQuantile(f64),
    #[error("window infeasible: slot {slot} needs {required} packets/s but full reservation provides {available}")]
    Infeasible { slot: usize, required: f64, available: f64 },
    #[error("continuous subproblem failed to reach tolerance: {0}")]
    NumericalFailure(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// Cost weights of the window objective.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostWeights {
    /// beta_1, cost per Hz of reserved spectrum per slot.
    pub resource_per_hz: f64,
    /// beta_2, cost per second of worst-case delay per slot.
    pub delay_per_s: f64,
}

/// Demand side of one slot's capacity constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SlotDemand {
    /// Poisson with Gaussian-uncertain intensity.
    Poisson { lambda_mean: f64, lambda_sd: f64 },
    /// Gaussian with Gaussian-uncertain mean and variance.
    Gaussian {
        mean_mean: f64,
        mean_sd: f64,
        var_mean: f64,
        var_sd: f64,
    },
    /// Pre-computed capacity threshold in packets/s (oracle-demand mode;
    /// bypasses the quantile construction).
    Threshold { value: f64 },
}

impl From<FittedDemandDistribution> for SlotDemand {
    fn from(d: FittedDemandDistribution) -> Self {
        match d {
            FittedDemandDistribution::Poisson { lambda_mean, lambda_sd } => {
                SlotDemand::Poisson { lambda_mean, lambda_sd }
            }
            FittedDemandDistribution::Gaussian { mean_mean, mean_sd, var_mean, var_sd } => {
                SlotDemand::Gaussian { mean_mean, mean_sd, var_mean, var_sd }
            }
        }
    }
}

/// Deterministic-equivalent capacity threshold of the chance constraint.
///
/// Poisson: (lambda_mean + z_gamma * lambda_sd) * (e^theta - 1) / theta.
/// Gaussian: mean_mean + theta/2 * var_mean
///           + z_gamma * sqrt(mean_sd^2 + theta^2/4 * var_sd^2).
/// Negative thresholds are clamped to zero.
pub fn demand_threshold(
    dist: &FittedDemandDistribution,
    theta: f64,
    gamma: f64,
) -> Result<f64, SliceError> {
    threshold_of(&SlotDemand::from(*dist), theta, gamma)
}

fn threshold_of(demand: &SlotDemand, theta: f64, gamma: f64) -> Result<f64, SliceError> {
    let quantile = |gamma: f64| -> Result<f64, SliceError> {
        if gamma <= 0.0 || gamma >= 1.0 {
            return Err(SliceError::DegenerateQuantile(gamma));
        }
        Ok(std_normal_quantile(gamma))
    };
    let value = match demand {
        SlotDemand::Poisson { lambda_mean, lambda_sd } => {
            let z = quantile(gamma)?;
            (lambda_mean + z * lambda_sd) * (theta.exp() - 1.0) / theta
        }
        SlotDemand::Gaussian { mean_mean, mean_sd, var_mean, var_sd } => {
            let z = quantile(gamma)?;
            mean_mean
                + 0.5 * theta * var_mean
                + z * (mean_sd * mean_sd + 0.25 * theta * theta * var_sd * var_sd).sqrt()
        }
        SlotDemand::Threshold { value } => *value,
    };
    Ok(value.max(0.0))
}

/// One slot's coverage and demand, restricted to the problem's satellites.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotRow {
    pub visible: Vec<bool>,
    pub distance_km: Vec<f64>,
    pub demand: SlotDemand,
}

/// A per-window slicing problem over the satellites of S_w.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceProblem {
    pub window: usize,
    /// Global satellite ids, ascending.
    pub satellite_ids: Vec<usize>,
    pub slots: Vec<SlotRow>,
    pub link: LinkParams,
    pub weights: CostWeights,
    /// Satisfaction level gamma of the chance constraint.
    pub gamma: f64,
    pub big_m: f64,
    /// Executed reservation per satellite; None while unexecuted.
    #[serde(with = "lock_serde")]
    pub locked: Vec<Option<f64>>,
}

mod lock_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Lock {
        locked: bool,
        #[serde(default)]
        value: f64,
    }

    pub fn serialize<S: Serializer>(v: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
        let locks: Vec<Lock> = v
            .iter()
            .map(|o| Lock { locked: o.is_some(), value: o.unwrap_or(0.0) })
            .collect();
        locks.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<f64>>, D::Error> {
        let locks = Vec::<Lock>::deserialize(d)?;
        Ok(locks
            .into_iter()
            .map(|l| if l.locked { Some(l.value) } else { None })
            .collect())
    }
}

impl SliceProblem {
    pub fn satellite_count(&self) -> usize {
        self.satellite_ids.len()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn validate(&self) -> Result<(), SliceError> {
        if self.satellite_ids.is_empty() {
            return Err(SliceError::InvalidProblem("empty serving set".into()));
        }
        if self.slots.is_empty() {
            return Err(SliceError::InvalidProblem("no slots".into()));
        }
        for row in &self.slots {
            if row.visible.len() != self.satellite_count()
                || row.distance_km.len() != self.satellite_count()
            {
                return Err(SliceError::InvalidProblem("ragged slot row".into()));
            }
        }
        if self.locked.len() != self.satellite_count() {
            return Err(SliceError::InvalidProblem("lock vector length mismatch".into()));
        }
        if self.gamma <= 0.0 || self.gamma > 1.0 {
            return Err(SliceError::InvalidProblem(format!("gamma {} outside (0,1]", self.gamma)));
        }
        if let Some(b) = self.locked.iter().flatten().find(|&&b| !(0.0..=1.0).contains(&b)) {
            return Err(SliceError::InvalidProblem(format!("locked value {b} outside [0,1]")));
        }
        Ok(())
    }

    /// Full-reservation rate of satellite `s` at slot `t`, packets/s per
    /// unit of reserved fraction; 0 when invisible.
    pub fn rate_coeff(&self, t: usize, s: usize) -> f64 {
        if self.slots[t].visible[s] {
            self.link.rate_coefficient(self.slots[t].distance_km[s])
        } else {
            0.0
        }
    }

    /// Propagation delay of satellite `s` at slot `t`, seconds.
    pub fn prop_delay(&self, t: usize, s: usize) -> f64 {
        self.slots[t].distance_km[s] / self.link.light_speed_km_s
    }

    /// -ln(eps)/theta, the numerator of every queue-delay term.
    pub fn delay_quotient(&self) -> f64 {
        -self.link.delay_violation_target.ln() / self.link.qos_exponent
    }

    /// Delay of a fully suppressed big-M term.
    pub fn suppressed_delay(&self) -> f64 {
        self.delay_quotient() / self.big_m
    }

    /// Capacity thresholds per slot.
    pub fn thresholds(&self) -> Result<Vec<f64>, SliceError> {
        self.slots
            .iter()
            .map(|row| threshold_of(&row.demand, self.link.qos_exponent, self.gamma))
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("problem serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, SliceError> {
        let problem: SliceProblem =
            toml::from_str(text).map_err(|e| SliceError::InvalidProblem(e.to_string()))?;
        problem.validate()?;
        Ok(problem)
    }
}

/// Big-M delay expression of problem P2 for one satellite at one slot.
///
/// With r*a = 1 this equals the plain queue-plus-propagation delay; with
/// r*a = 0 the queue term collapses to the suppressed constant and the
/// propagation term vanishes.
pub fn big_m_delay(
    candidate_b: f64,
    active: bool,
    visible: bool,
    distance_km: f64,
    params: &LinkParams,
    big_m: f64,
) -> f64 {
    debug_assert!(!active || candidate_b <= 1.0);
    let ra = active && visible;
    let capacity = if ra { candidate_b * params.rate_coefficient(distance_km) } else { 0.0 };
    let m_term = if ra { 0.0 } else { big_m };
    let queue = -params.delay_violation_target.ln()
        / (params.qos_exponent * (capacity + m_term));
    let prop = if ra { distance_km / params.light_speed_km_s } else { 0.0 };
    queue + prop
}

/// A window's slicing decision with per-satellite lock state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicingDecision {
    pub window: usize,
    pub satellite_ids: Vec<usize>,
    /// Candidate fractions b-tilde.
    pub candidate_b: Vec<f64>,
    /// Activation bits r.
    pub active: Vec<bool>,
    /// Executed fractions b; 0 until the satellite's decision is executed.
    pub executed_b: Vec<f64>,
    pub locked: Vec<bool>,
    pub objective: f64,
    /// Per-slot capacity thresholds the solve used.
    pub thresholds: Vec<f64>,
    /// True when the window was infeasible and the decision is the
    /// max-capacity fallback.
    pub best_effort: bool,
}

impl SlicingDecision {
    /// Effective (b, r) of a satellite for cost and capacity accounting:
    /// locked satellites use their executed value, unexecuted ones their
    /// candidate.
    pub fn committed(&self, idx: usize) -> (f64, bool) {
        if self.locked[idx] {
            (self.executed_b[idx], self.executed_b[idx] > 0.0)
        } else {
            (self.candidate_b[idx], self.active[idx])
        }
    }

    /// Executed reservation of a satellite (0 while unexecuted).
    pub fn executed(&self, idx: usize) -> f64 {
        if self.locked[idx] {
            self.executed_b[idx]
        } else {
            0.0
        }
    }

    pub fn index_of(&self, sat_id: usize) -> Option<usize> {
        self.satellite_ids.iter().position(|&s| s == sat_id)
    }
}

/// Lock every satellite whose first coverage slot in `window` is <= `slot`
/// (zero-based, within the window). Idempotent; locked values never change.
pub fn execute_on_coverage(
    decision: &mut SlicingDecision,
    schedule: &CoverageSchedule,
    window: usize,
    slot: usize,
) {
    for (idx, &sat) in decision.satellite_ids.iter().enumerate() {
        if decision.locked[idx] {
            continue;
        }
        if let Some(first) = schedule.first_coverage_slot(sat, window) {
            if first <= slot {
                decision.executed_b[idx] = decision.candidate_b[idx];
                decision.locked[idx] = true;
            }
        }
    }
}

/// Exact window cost and feasibility of a committed decision, evaluated with
/// the P2 objective (big-M delay, max over all satellites).
#[derive(Debug, Clone)]
pub struct CostBreakdown {
    pub total: f64,
    pub resource_cost: f64,
    pub delay_cost: f64,
    /// Sum of reserved capacity per slot, packets/s.
    pub slot_capacity: Vec<f64>,
    /// Capacity >= threshold per slot.
    pub slot_feasible: Vec<bool>,
}

/// Evaluate the P2 objective for explicit per-satellite (b, r) over the
/// problem's slots.
pub fn evaluate_candidate(
    problem: &SliceProblem,
    thresholds: &[f64],
    b: &[f64],
    active: &[bool],
) -> CostBreakdown {
    let mut resource_cost = 0.0;
    let mut delay_cost = 0.0;
    let mut slot_capacity = Vec::with_capacity(problem.slot_count());
    let mut slot_feasible = Vec::with_capacity(problem.slot_count());
    for (t, row) in problem.slots.iter().enumerate() {
        let mut cap = 0.0;
        let mut res_hz = 0.0;
        let mut worst = f64::NEG_INFINITY;
        for s in 0..problem.satellite_count() {
            if row.visible[s] && active[s] {
                cap += b[s] * problem.rate_coeff(t, s);
                res_hz += b[s] * problem.link.bandwidth_hz;
            }
            let d = big_m_delay(
                b[s],
                active[s],
                row.visible[s],
                row.distance_km[s],
                &problem.link,
                problem.big_m,
            );
            worst = worst.max(d);
        }
        resource_cost += problem.weights.resource_per_hz * res_hz;
        // Guard 0 * inf: an active satellite at b = 0 has unbounded delay,
        // which must not poison the objective when delay carries no weight.
        if problem.weights.delay_per_s > 0.0 {
            delay_cost += problem.weights.delay_per_s * worst;
        }
        slot_capacity.push(cap);
        slot_feasible.push(cap >= thresholds[t]);
    }
    CostBreakdown {
        total: resource_cost + delay_cost,
        resource_cost,
        delay_cost,
        slot_capacity,
        slot_feasible,
    }
}
