//! Brute-force certification oracle: exhaustive grid search over candidate
//! fractions and activation bits for small instances, with an independent
//! objective computation. Used by the verification suite and the CLI
//! harness to certify the window solver.

use super::{SliceError, SliceProblem, SlotDemand, SlotRow};
use crate::linkmodel::LinkParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub candidate_b: Vec<f64>,
    pub active: Vec<bool>,
}

/// Exhaustive search over r in {0,1}^m and b on a uniform grid with the
/// given step for every active satellite. Locked satellites keep their
/// values. Returns None when no grid point is feasible.
///
/// The objective is evaluated from the cost formulas directly, independent
/// of the solver's code path.
pub fn grid_search(problem: &SliceProblem, step: f64) -> Result<Option<OracleResult>, SliceError> {
    problem.validate()?;
    let thresholds = problem.thresholds()?;
    let n = problem.satellite_count();
    let t_count = problem.slot_count();
    let q = problem.delay_quotient();
    let supp = problem.suppressed_delay();
    let beta1 = problem.weights.resource_per_hz;
    let beta2 = problem.weights.delay_per_s;

    // Per-slot constants from locked satellites.
    let mut base_cap = vec![0.0; t_count];
    let mut base_res_hz = vec![0.0; t_count];
    let mut base_delay = vec![supp; t_count];
    for t in 0..t_count {
        for s in 0..n {
            if let Some(lb) = problem.locked[s] {
                if problem.slots[t].visible[s] && lb > 0.0 {
                    let k = problem.rate_coeff(t, s);
                    base_cap[t] += lb * k;
                    base_res_hz[t] += lb * problem.link.bandwidth_hz;
                    base_delay[t] = base_delay[t].max(q / (lb * k) + problem.prop_delay(t, s));
                }
            }
        }
    }

    let candidates: Vec<usize> = (0..n).filter(|&s| problem.locked[s].is_none()).collect();
    let m = candidates.len();
    let levels = (1.0 / step).round() as usize; // grid 0, step, ..., 1

    let mut best: Option<(f64, Vec<usize>, OracleResult)> = None;
    for mask in 0..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).map(|j| candidates[j]).collect();
        // Odometer over the grid values of the active satellites, starting
        // at step (b = 0 with r = 1 is dominated by r = 0).
        let dims = active.len();
        let mut digits = vec![1usize; dims];
        loop {
            let mut b = vec![0.0; n];
            for s in 0..n {
                if let Some(lb) = problem.locked[s] {
                    b[s] = lb;
                }
            }
            for (d, &s) in active.iter().enumerate() {
                b[s] = digits[d] as f64 * step;
            }

            // Feasibility and objective in one pass.
            let mut feasible = true;
            let mut objective = 0.0;
            for t in 0..t_count {
                let mut cap = base_cap[t];
                let mut res_hz = base_res_hz[t];
                let mut worst = base_delay[t];
                for &s in &active {
                    if problem.slots[t].visible[s] {
                        let k = problem.rate_coeff(t, s);
                        cap += b[s] * k;
                        res_hz += b[s] * problem.link.bandwidth_hz;
                        worst = worst.max(q / (b[s] * k) + problem.prop_delay(t, s));
                    }
                }
                if cap < thresholds[t] {
                    feasible = false;
                    break;
                }
                objective += beta1 * res_hz + if beta2 > 0.0 { beta2 * worst } else { 0.0 };
            }

            if feasible {
                let ids: Vec<usize> =
                    active.iter().map(|&s| problem.satellite_ids[s]).collect();
                let replace = match &best {
                    None => true,
                    Some((bo, bi, _)) => {
                        let eps = 1e-9 * bo.abs().max(1.0);
                        objective < bo - eps
                            || (objective <= bo + eps
                                && (ids.len() < bi.len() || (ids.len() == bi.len() && ids < *bi)))
                    }
                };
                if replace {
                    let r: Vec<bool> = (0..n)
                        .map(|s| {
                            if let Some(lb) = problem.locked[s] {
                                lb > 0.0
                            } else {
                                active.contains(&s)
                            }
                        })
                        .collect();
                    best = Some((objective, ids, OracleResult {
                        objective,
                        candidate_b: b.clone(),
                        active: r,
                    }));
                }
            }

            // Advance the odometer.
            let mut d = 0;
            loop {
                if d == dims {
                    break;
                }
                digits[d] += 1;
                if digits[d] <= levels {
                    break;
                }
                digits[d] = 1;
                d += 1;
            }
            if d == dims {
                break;
            }
            if dims == 0 {
                break;
            }
        }
    }
    Ok(best.map(|(_, _, r)| r))
}

/// Random small instance for oracle certification: 2-3 satellites, 3-4
/// slots, random coverage and fitted demand, guaranteed feasible at full
/// reservation. Deterministic per seed.
pub fn random_instance(seed: u64, link: &LinkParams, gamma: f64) -> SliceProblem {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    loop {
        let n_sats = rng.gen_range(2..=3usize);
        let n_slots = rng.gen_range(3..=4usize);
        let mut slots = Vec::with_capacity(n_slots);
        for _ in 0..n_slots {
            let mut visible: Vec<bool> = (0..n_sats).map(|_| rng.gen_bool(0.75)).collect();
            if !visible.iter().any(|&v| v) {
                visible[rng.gen_range(0..n_sats)] = true;
            }
            let distance_km: Vec<f64> =
                (0..n_sats).map(|_| rng.gen_range(600.0..1800.0)).collect();
            let demand = if rng.gen_bool(0.5) {
                SlotDemand::Poisson {
                    lambda_mean: rng.gen_range(8.0..55.0),
                    lambda_sd: rng.gen_range(0.0..5.0),
                }
            } else {
                SlotDemand::Gaussian {
                    mean_mean: rng.gen_range(8.0..45.0),
                    mean_sd: rng.gen_range(0.0..4.0),
                    var_mean: rng.gen_range(40.0..250.0),
                    var_sd: rng.gen_range(0.0..40.0),
                }
            };
            slots.push(SlotRow { visible, distance_km, demand });
        }
        let problem = SliceProblem {
            window: 0,
            satellite_ids: (0..n_sats).collect(),
            slots,
            link: link.clone(),
            weights: super::CostWeights { resource_per_hz: 1e-6, delay_per_s: 100.0 },
            gamma,
            big_m: 1e9,
            locked: vec![None; n_sats],
        };
        // Keep only instances feasible at full reservation.
        let thresholds = problem.thresholds().unwrap();
        let feasible = (0..problem.slot_count()).all(|t| {
            let cap: f64 = (0..n_sats).map(|s| problem.rate_coeff(t, s)).sum();
            cap >= thresholds[t]
        });
        if feasible {
            return problem;
        }
    }
}
