//! Window solver: searches the activation bits (exhaustively up to a cutoff,
//! greedy seeding plus single-bit-flip local search beyond it) and solves
//! each fixed-activation continuous subproblem with a log-barrier Newton
//! method on the epigraph reformulation of the max-delay objective.

use super::{evaluate_candidate, SliceError, SliceProblem, SlicingDecision};

/// Exact enumeration cutoff on the number of unlocked candidate satellites.
const ENUM_CUTOFF: usize = 12;
/// Relative tolerance treating two candidate objectives as tied.
const TIE_EPS: f64 = 1e-9;
/// Barrier duality-gap target relative to the objective scale.
const GAP_TOL: f64 = 1e-7;

/// Solve problem P2 for one window. Locked satellites keep their executed
/// values; the activation bits of the remaining candidates are searched and
/// the continuous fractions optimized per candidate.
pub fn solve_window(problem: &SliceProblem) -> Result<SlicingDecision, SliceError> {
    problem.validate()?;
    let thresholds = problem.thresholds()?;
    let n = problem.satellite_count();

    // Unlocked satellites with any visibility can carry reservations.
    let candidates: Vec<usize> = (0..n)
        .filter(|&s| {
            problem.locked[s].is_none() && problem.slots.iter().any(|row| row.visible[s])
        })
        .collect();

    // Feasibility gate: full reservation on every candidate plus locked
    // values must meet every slot's threshold.
    let full_active = build_b(problem, &candidates, &vec![1.0; candidates.len()]);
    for (t, &thr) in thresholds.iter().enumerate() {
        let cap = slot_capacity(problem, t, &full_active);
        if cap < thr {
            return Err(SliceError::Infeasible { slot: t, required: thr, available: cap });
        }
    }

    let best = if candidates.len() <= ENUM_CUTOFF {
        enumerate(problem, &thresholds, &candidates)
    } else {
        local_search(problem, &thresholds, &candidates)
    };

    let (active_set, x) = best.ok_or_else(|| {
        SliceError::NumericalFailure("no activation candidate reached tolerance".into())
    })?;
    Ok(assemble_decision(problem, &thresholds, &candidates, &active_set, &x, false))
}

/// Max-capacity fallback for infeasible windows: activate every candidate at
/// full reservation so served capacity is maximal; violations are recorded
/// by the caller slot by slot.
pub fn best_effort_decision(problem: &SliceProblem) -> SlicingDecision {
    let thresholds = problem.thresholds().unwrap_or_else(|_| vec![0.0; problem.slot_count()]);
    let n = problem.satellite_count();
    let candidates: Vec<usize> = (0..n)
        .filter(|&s| {
            problem.locked[s].is_none() && problem.slots.iter().any(|row| row.visible[s])
        })
        .collect();
    let active_set: Vec<bool> = vec![true; candidates.len()];
    let x = vec![1.0; candidates.len()];
    assemble_decision(problem, &thresholds, &candidates, &active_set, &x, true)
}

/// Merge candidate fractions with locked values into a full (b, r) pair.
fn merge(
    problem: &SliceProblem,
    candidates: &[usize],
    active_set: &[bool],
    x: &[f64],
) -> (Vec<f64>, Vec<bool>) {
    let n = problem.satellite_count();
    let mut b = vec![0.0; n];
    let mut r = vec![false; n];
    for s in 0..n {
        if let Some(locked) = problem.locked[s] {
            b[s] = locked;
            r[s] = locked > 0.0;
        }
    }
    for (j, &s) in candidates.iter().enumerate() {
        if active_set[j] {
            b[s] = x[j];
            r[s] = true;
        }
    }
    (b, r)
}

fn build_b(problem: &SliceProblem, candidates: &[usize], x: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; problem.satellite_count()];
    for s in 0..problem.satellite_count() {
        if let Some(locked) = problem.locked[s] {
            b[s] = locked;
        }
    }
    for (j, &s) in candidates.iter().enumerate() {
        b[s] = x[j];
    }
    b
}

fn slot_capacity(problem: &SliceProblem, t: usize, b: &[f64]) -> f64 {
    (0..problem.satellite_count()).map(|s| b[s] * problem.rate_coeff(t, s)).sum()
}

fn assemble_decision(
    problem: &SliceProblem,
    thresholds: &[f64],
    candidates: &[usize],
    active_set: &[bool],
    x: &[f64],
    best_effort: bool,
) -> SlicingDecision {
    let (b, r) = merge(problem, candidates, active_set, x);
    let cost = evaluate_candidate(problem, thresholds, &b, &r);
    let n = problem.satellite_count();
    let mut executed_b = vec![0.0; n];
    let mut locked = vec![false; n];
    for s in 0..n {
        if let Some(lb) = problem.locked[s] {
            executed_b[s] = lb;
            locked[s] = true;
        }
    }
    SlicingDecision {
        window: problem.window,
        satellite_ids: problem.satellite_ids.clone(),
        candidate_b: b,
        active: r,
        executed_b,
        locked,
        objective: cost.total,
        thresholds: thresholds.to_vec(),
        best_effort,
    }
}

/// Candidate comparison: lower objective wins; ties go to fewer active
/// satellites, then to the lexicographically smaller active-id vector.
fn better(
    obj: f64,
    ids: &[usize],
    best_obj: f64,
    best_ids: &[usize],
) -> bool {
    let eps = TIE_EPS * best_obj.abs().max(1.0);
    if obj < best_obj - eps {
        return true;
    }
    if obj > best_obj + eps {
        return false;
    }
    match ids.len().cmp(&best_ids.len()) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => ids < best_ids,
    }
}

type SearchResult = Option<(Vec<bool>, Vec<f64>)>;

fn enumerate(problem: &SliceProblem, thresholds: &[f64], candidates: &[usize]) -> SearchResult {
    let m = candidates.len();
    let mut masks: Vec<u32> = (0..(1u32 << m)).collect();
    masks.sort_by_key(|&mask| (mask.count_ones(), mask));

    let mut best: Option<(f64, Vec<usize>, Vec<bool>, Vec<f64>)> = None;
    for mask in masks {
        let active_set: Vec<bool> = (0..m).map(|j| mask >> j & 1 == 1).collect();
        if !quick_feasible(problem, thresholds, candidates, &active_set) {
            continue;
        }
        if let Some((ref best_obj, _, _, _)) = best {
            let lb = lower_bound(problem, thresholds, candidates, &active_set);
            if lb > best_obj + TIE_EPS * best_obj.abs().max(1.0) {
                continue;
            }
        }
        if let Some((x, _)) = solve_fixed_activation(problem, thresholds, candidates, &active_set)
        {
            let (b, r) = merge(problem, candidates, &active_set, &x);
            let cost = evaluate_candidate(problem, thresholds, &b, &r);
            if !cost.slot_feasible.iter().all(|&f| f) {
                continue;
            }
            let ids: Vec<usize> = candidates
                .iter()
                .zip(&active_set)
                .filter_map(|(&s, &a)| a.then_some(problem.satellite_ids[s]))
                .collect();
            let replace = match &best {
                None => true,
                Some((bo, bi, _, _)) => better(cost.total, &ids, *bo, bi),
            };
            if replace {
                best = Some((cost.total, ids, active_set.clone(), x));
            }
        }
    }
    best.map(|(_, _, active, x)| (active, x))
}

fn local_search(problem: &SliceProblem, thresholds: &[f64], candidates: &[usize]) -> SearchResult {
    let m = candidates.len();

    // Greedy seed: add the satellite with the largest capacity contribution
    // on still-deficient slots until every threshold is reachable.
    let mut active_set = vec![false; m];
    loop {
        if quick_feasible(problem, thresholds, candidates, &active_set) {
            break;
        }
        let x_now: Vec<f64> = active_set.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        let b = build_b(problem, candidates, &x_now);
        let mut best_gain = 0.0;
        let mut best_j = None;
        for j in 0..m {
            if active_set[j] {
                continue;
            }
            let mut gain = 0.0;
            for (t, &thr) in thresholds.iter().enumerate() {
                let cap = slot_capacity(problem, t, &b);
                if cap < thr {
                    gain += problem.rate_coeff(t, candidates[j]).min(thr - cap);
                }
            }
            if gain > best_gain {
                best_gain = gain;
                best_j = Some(j);
            }
        }
        match best_j {
            Some(j) => active_set[j] = true,
            None => return None, // cannot cover the deficit (caller pre-checked)
        }
    }

    let mut best: Option<(f64, Vec<usize>, Vec<bool>, Vec<f64>)> = None;
    let try_candidate = |active_set: &Vec<bool>,
                             best: &mut Option<(f64, Vec<usize>, Vec<bool>, Vec<f64>)>|
     -> bool {
        if !quick_feasible(problem, thresholds, candidates, active_set) {
            return false;
        }
        if let Some((x, _)) = solve_fixed_activation(problem, thresholds, candidates, active_set) {
            let (b, r) = merge(problem, candidates, active_set, &x);
            let cost = evaluate_candidate(problem, thresholds, &b, &r);
            if !cost.slot_feasible.iter().all(|&f| f) {
                return false;
            }
            let ids: Vec<usize> = candidates
                .iter()
                .zip(active_set)
                .filter_map(|(&s, &a)| a.then_some(problem.satellite_ids[s]))
                .collect();
            let replace = match best {
                None => true,
                Some((bo, bi, _, _)) => better(cost.total, &ids, *bo, bi),
            };
            if replace {
                *best = Some((cost.total, ids, active_set.clone(), x));
                return true;
            }
        }
        false
    };

    try_candidate(&active_set, &mut best);

    // First-improvement local search over single-bit flips and one-for-one
    // swaps (a flip alone cannot exchange one covering satellite for a
    // better one), bounded by a solve budget.
    let mut solves = 0usize;
    'outer: for _ in 0..24 {
        let mut improved = false;
        for j in 0..m {
            let current = best.as_ref().map(|(_, _, a, _)| a.clone()).unwrap_or(active_set.clone());
            let mut flipped = current.clone();
            flipped[j] = !flipped[j];
            solves += 1;
            if solves > 600 {
                break 'outer;
            }
            if try_candidate(&flipped, &mut best) {
                improved = true;
            }
        }
        let current = best.as_ref().map(|(_, _, a, _)| a.clone()).unwrap_or(active_set.clone());
        let active_now: Vec<usize> = (0..m).filter(|&j| current[j]).collect();
        for &j_out in &active_now {
            for j_in in 0..m {
                if current[j_in] {
                    continue;
                }
                let snapshot = best.as_ref().map(|(_, _, a, _)| a.clone()).unwrap_or(current.clone());
                if !snapshot[j_out] {
                    break; // j_out already swapped away in this sweep
                }
                let mut swapped = snapshot;
                swapped[j_out] = false;
                swapped[j_in] = true;
                solves += 1;
                if solves > 600 {
                    break 'outer;
                }
                if try_candidate(&swapped, &mut best) {
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    best.map(|(_, _, active, x)| (active, x))
}

/// Can this activation meet every threshold at full reservation?
fn quick_feasible(
    problem: &SliceProblem,
    thresholds: &[f64],
    candidates: &[usize],
    active_set: &[bool],
) -> bool {
    let x: Vec<f64> = active_set.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let b = build_b(problem, candidates, &x);
    thresholds
        .iter()
        .enumerate()
        .all(|(t, &thr)| thr <= 0.0 || slot_capacity(problem, t, &b) >= thr)
}

/// Admissible objective lower bound used to prune activation candidates:
/// per slot, the cheapest capacity that can close the threshold deficit plus
/// the smallest reachable worst-case delay, both evaluated independently.
fn lower_bound(
    problem: &SliceProblem,
    thresholds: &[f64],
    candidates: &[usize],
    active_set: &[bool],
) -> f64 {
    let q = problem.delay_quotient();
    let supp = problem.suppressed_delay();
    let mut total = 0.0;
    for (t, &thr) in thresholds.iter().enumerate() {
        let mut locked_cap = 0.0;
        let mut locked_res_hz = 0.0;
        let mut floor = supp;
        for s in 0..problem.satellite_count() {
            if let Some(lb) = problem.locked[s] {
                if problem.slots[t].visible[s] && lb > 0.0 {
                    let k = problem.rate_coeff(t, s);
                    locked_cap += lb * k;
                    locked_res_hz += lb * problem.link.bandwidth_hz;
                    floor = floor.max(q / (lb * k) + problem.prop_delay(t, s));
                }
            }
        }
        let mut k_max = 0.0f64;
        for (j, &s) in candidates.iter().enumerate() {
            if active_set[j] && problem.slots[t].visible[s] {
                let k = problem.rate_coeff(t, s);
                k_max = k_max.max(k);
                floor = floor.max(q / k + problem.prop_delay(t, s));
            }
        }
        let deficit = (thr - locked_cap).max(0.0);
        let res_hz = if deficit > 0.0 {
            if k_max <= 0.0 {
                return f64::INFINITY;
            }
            locked_res_hz + problem.link.bandwidth_hz * deficit / k_max
        } else {
            locked_res_hz
        };
        total += problem.weights.resource_per_hz * res_hz + problem.weights.delay_per_s * floor;
    }
    total
}

// ---------------------------------------------------------------------------
// Fixed-activation continuous subproblem
// ---------------------------------------------------------------------------

/// Barrier constraint kinds over variables z = (x_0..x_{n-1}, u_0..u_{T-1}).
enum Constraint {
    /// sum_j a[j] x_j + base - thr > 0
    Capacity { coeffs: Vec<(usize, f64)>, offset: f64 },
    /// u_t - q/(k x_j) - p > 0
    Delay { j: usize, t: usize, k: f64, p: f64 },
    /// u_t - floor > 0
    Floor { t: usize, floor: f64 },
    /// 1 - x_j > 0
    UpperBox { j: usize },
}

struct Subproblem {
    n: usize,
    t_count: usize,
    constraints: Vec<Constraint>,
    /// Linear objective coefficients over z.
    cost: Vec<f64>,
    q: f64,
}

impl Subproblem {
    fn dim(&self) -> usize {
        self.n + self.t_count
    }

    fn constraint_value(&self, c: &Constraint, z: &[f64]) -> f64 {
        match c {
            Constraint::Capacity { coeffs, offset } => {
                coeffs.iter().map(|&(j, a)| a * z[j]).sum::<f64>() + offset
            }
            Constraint::Delay { j, t, k, p } => {
                if z[*j] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                z[self.n + t] - self.q / (k * z[*j]) - p
            }
            Constraint::Floor { t, floor } => z[self.n + t] - floor,
            Constraint::UpperBox { j } => 1.0 - z[*j],
        }
    }

    fn feasible(&self, z: &[f64]) -> bool {
        self.constraints.iter().all(|c| self.constraint_value(c, z) > 0.0)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.cost.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    fn barrier(&self, z: &[f64], t_bar: f64) -> f64 {
        let mut phi = t_bar * self.objective(z);
        for c in &self.constraints {
            let g = self.constraint_value(c, z);
            if g <= 0.0 {
                return f64::INFINITY;
            }
            phi -= g.ln();
        }
        phi
    }

    /// Gradient and Hessian of the barrier at z.
    fn derivatives(&self, z: &[f64], t_bar: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let dim = self.dim();
        let mut grad: Vec<f64> = self.cost.iter().map(|c| t_bar * c).collect();
        let mut hess = vec![vec![0.0; dim]; dim];
        for c in &self.constraints {
            let g = self.constraint_value(c, z);
            match c {
                Constraint::Capacity { coeffs, .. } => {
                    for &(j, a) in coeffs {
                        grad[j] -= a / g;
                    }
                    for &(j1, a1) in coeffs {
                        for &(j2, a2) in coeffs {
                            hess[j1][j2] += a1 * a2 / (g * g);
                        }
                    }
                }
                Constraint::Delay { j, t, k, .. } => {
                    let xj = z[*j];
                    let ut = self.n + t;
                    let sx = self.q / (k * xj * xj); // dg/dx_j
                    grad[*j] -= sx / g;
                    grad[ut] -= 1.0 / g;
                    hess[*j][*j] += sx * sx / (g * g) + 2.0 * self.q / (k * xj * xj * xj * g);
                    hess[*j][ut] += sx / (g * g);
                    hess[ut][*j] += sx / (g * g);
                    hess[ut][ut] += 1.0 / (g * g);
                }
                Constraint::Floor { t, .. } => {
                    let ut = self.n + t;
                    grad[ut] -= 1.0 / g;
                    hess[ut][ut] += 1.0 / (g * g);
                }
                Constraint::UpperBox { j } => {
                    grad[*j] += 1.0 / g;
                    hess[*j][*j] += 1.0 / (g * g);
                }
            }
        }
        (grad, hess)
    }
}

/// Dense Cholesky solve of H*delta = -grad with a ridge fallback.
fn newton_direction(hess: &[Vec<f64>], grad: &[f64]) -> Option<Vec<f64>> {
    let dim = grad.len();
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut l = vec![vec![0.0; dim]; dim];
        let mut ok = true;
        'chol: for i in 0..dim {
            for j in 0..=i {
                let mut sum = hess[i][j] + if i == j { ridge } else { 0.0 };
                for k in 0..j {
                    sum -= l[i][k] * l[j][k];
                }
                if i == j {
                    if sum <= 0.0 {
                        ok = false;
                        break 'chol;
                    }
                    l[i][j] = sum.sqrt();
                } else {
                    l[i][j] = sum / l[j][j];
                }
            }
        }
        if ok {
            // Forward/back substitution for -grad.
            let mut y = vec![0.0; dim];
            for i in 0..dim {
                let mut sum = -grad[i];
                for k in 0..i {
                    sum -= l[i][k] * y[k];
                }
                y[i] = sum / l[i][i];
            }
            let mut delta = vec![0.0; dim];
            for i in (0..dim).rev() {
                let mut sum = y[i];
                for k in i + 1..dim {
                    sum -= l[k][i] * delta[k];
                }
                delta[i] = sum / l[i][i];
            }
            return Some(delta);
        }
        ridge = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
    }
    None
}

/// Solve the continuous subproblem for a fixed activation pattern. Returns
/// the optimal fractions (one per candidate, zeros for inactive ones) and
/// the variable-part objective.
fn solve_fixed_activation(
    problem: &SliceProblem,
    thresholds: &[f64],
    candidates: &[usize],
    active_set: &[bool],
) -> Option<(Vec<f64>, f64)> {
    let active: Vec<usize> = candidates
        .iter()
        .zip(active_set)
        .filter_map(|(&s, &a)| a.then_some(s))
        .collect();
    let n = active.len();
    let t_count = problem.slot_count();
    let q = problem.delay_quotient();
    let supp = problem.suppressed_delay();

    // Constant contributions from locked satellites.
    let mut base_cap = vec![0.0; t_count];
    let mut floor = vec![supp; t_count];
    for t in 0..t_count {
        for s in 0..problem.satellite_count() {
            if let Some(lb) = problem.locked[s] {
                if problem.slots[t].visible[s] && lb > 0.0 {
                    let k = problem.rate_coeff(t, s);
                    base_cap[t] += lb * k;
                    floor[t] = floor[t].max(q / (lb * k) + problem.prop_delay(t, s));
                }
            }
        }
    }

    let mut constraints = Vec::new();
    let mut cost = vec![0.0; n + t_count];
    for (jj, &s) in active.iter().enumerate() {
        let visible_slots =
            (0..t_count).filter(|&t| problem.slots[t].visible[s]).count() as f64;
        cost[jj] = problem.weights.resource_per_hz * problem.link.bandwidth_hz * visible_slots;
        constraints.push(Constraint::UpperBox { j: jj });
    }
    for t in 0..t_count {
        cost[n + t] = problem.weights.delay_per_s;
        constraints.push(Constraint::Floor { t, floor: floor[t] });
        let mut coeffs = Vec::new();
        for (jj, &s) in active.iter().enumerate() {
            if problem.slots[t].visible[s] {
                let k = problem.rate_coeff(t, s);
                coeffs.push((jj, k));
                constraints.push(Constraint::Delay { j: jj, t, k, p: problem.prop_delay(t, s) });
            }
        }
        if thresholds[t] > base_cap[t] {
            if coeffs.is_empty() {
                return None; // nothing can serve this slot under this activation
            }
            constraints.push(Constraint::Capacity { coeffs, offset: base_cap[t] - thresholds[t] });
        }
    }

    let sub = Subproblem { n, t_count, constraints, cost, q };

    // Exact variable-part objective with the epigraph eliminated; used to
    // track the best centered iterate across barrier stages.
    let exact_objective = |z: &[f64]| -> f64 {
        let mut f = 0.0;
        for j in 0..n {
            f += sub.cost[j] * z[j];
        }
        for t in 0..t_count {
            let mut u = floor[t];
            for (jj, &s) in active.iter().enumerate() {
                if problem.slots[t].visible[s] {
                    let k = problem.rate_coeff(t, s);
                    u = u.max(q / (k * z[jj]) + problem.prop_delay(t, s));
                }
            }
            f += problem.weights.delay_per_s * u;
        }
        f
    };

    // Strictly feasible start: the lowest uniform reservation level that
    // clears every capacity constraint with margin, kept away from the box
    // boundary so the barrier is well conditioned; epigraph values above
    // every delay term.
    let mut z = vec![0.0; sub.dim()];
    let mut level = 1.0 - 1e-6;
    for &trial in &[0.5, 0.65, 0.8, 0.9, 0.97, 0.995] {
        let ok = (0..t_count).all(|t| {
            let cap: f64 = active
                .iter()
                .filter(|&&s| problem.slots[t].visible[s])
                .map(|&s| trial * problem.rate_coeff(t, s))
                .sum::<f64>()
                + base_cap[t];
            thresholds[t] <= base_cap[t] || cap > thresholds[t] * (1.0 + 1e-6)
        });
        if ok {
            level = trial;
            break;
        }
    }
    for j in 0..n {
        z[j] = level;
    }
    for t in 0..t_count {
        let mut needed = floor[t];
        for (jj, &s) in active.iter().enumerate() {
            if problem.slots[t].visible[s] {
                let k = problem.rate_coeff(t, s);
                needed = needed.max(q / (k * z[jj]) + problem.prop_delay(t, s));
            }
        }
        z[n + t] = needed * 1.5 + 1e-6;
    }
    if !sub.feasible(&z) {
        // The threshold binds only at the exact box boundary; return full
        // reservation, which the caller verified feasible.
        let mut x = vec![0.0; candidates.len()];
        for (j, &a) in active_set.iter().enumerate() {
            if a {
                x[j] = 1.0;
            }
        }
        return Some((x, 0.0));
    }

    // Outer barrier loop, keeping the best exact-objective iterate in case
    // late stages lose conditioning.
    let m = sub.constraints.len() as f64;
    let mut t_bar = 1.0;
    let mut best_z = z.clone();
    let mut best_f = exact_objective(&z);
    'outer: for _ in 0..40 {
        // Inner Newton iterations.
        for _ in 0..120 {
            let (grad, hess) = sub.derivatives(&z, t_bar);
            if grad.iter().any(|g| !g.is_finite()) {
                break 'outer;
            }
            let Some(delta) = newton_direction(&hess, &grad) else { break 'outer };
            let decrement: f64 = grad.iter().zip(&delta).map(|(g, d)| -g * d).sum();
            if !decrement.is_finite() {
                break 'outer;
            }
            // decrement/(2 t_bar) bounds the objective gap to the stage's
            // central point; stop well below the outer gap target.
            if decrement <= 0.01 * GAP_TOL * t_bar * best_f.abs().max(1.0) {
                break;
            }
            // Backtracking line search.
            let phi0 = sub.barrier(&z, t_bar);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> =
                    z.iter().zip(&delta).map(|(v, d)| v + alpha * d).collect();
                let phi = sub.barrier(&trial, t_bar);
                if phi.is_finite() && phi <= phi0 - 0.25 * alpha * decrement {
                    z = trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let f_now = exact_objective(&z);
        if f_now < best_f {
            best_f = f_now;
            best_z = z.clone();
        }
        if m / t_bar < GAP_TOL * best_f.abs().max(1.0) {
            break;
        }
        t_bar *= 15.0;
    }

    let mut x = vec![0.0; candidates.len()];
    let mut it = 0usize;
    for (j, &a) in active_set.iter().enumerate() {
        if a {
            x[j] = best_z[it].clamp(0.0, 1.0);
            it += 1;
        }
    }
    Some((x, best_f))
}
