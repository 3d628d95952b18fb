//! Scratch probe: window solve quality at low elevation.
use leoslice::constellation::*;
use leoslice::demand::generate;
use leoslice::linkmodel::{effective_bandwidth, DemandModel};
use leoslice::simkit::ScenarioConfig;
use leoslice::slicer::*;
use leoslice::twin::TwinContext;

fn main() {
    let mut config = ScenarioConfig::reference();
    config.area.min_elevation_deg = 10.0;
    let schedule = build_schedule(&config.constellation, &config.area, 90, 10.0, 10).unwrap();
    let trace = generate(&config.regime(), config.sim.seeds.demand).unwrap();
    let tau = config.sim.slot_duration_s;
    let warm = config.sim.warmup_slots;
    for w in 0..3 {
        let serving = schedule.serving_set(w);
        let demands: Vec<SlotDemand> = (0..10).map(|t| {
            let g = w * 10 + t;
            let s = &trace.samples[(warm + g) * tau..(warm + g + 1) * tau];
            SlotDemand::Threshold { value: effective_bandwidth(&DemandModel::Empirical { samples: s.to_vec() }, 0.05).unwrap() }
        }).collect();
        let ctx = TwinContext {
            schedule: &schedule, window: w, satellite_ids: &serving,
            link: &config.link, weights: config.weights(), big_m: 1e9,
            dispersion_tolerance: 0.2,
        };
        let problem = ctx.remaining_problem(0, &demands, vec![None; serving.len()], 0.9);
        let decision = solve_window(&problem).unwrap();
        let actives: Vec<_> = (0..serving.len()).filter(|&i| decision.active[i])
            .map(|i| (serving[i], decision.candidate_b[i],
                      (0..10).filter(|&t| schedule.visible[serving[i]][w*10+t]).count())).collect();
        println!("w{w}: |S_w|={} objective={:.2} actives={:?}", serving.len(), decision.objective, actives);

        // manual single-satellite alternative: for each sat covering all 10 slots,
        // compute cost at b = max(thr/k, delay-optimal b*), report the best
        let q = problem.delay_quotient();
        let mut best = f64::INFINITY;
        let mut best_sat = 0;
        for (i, &sat) in serving.iter().enumerate() {
            let cover = (0..10).filter(|&t| schedule.visible[sat][w*10+t]).count();
            if cover < 10 { continue; }
            let kmin: f64 = (0..10).map(|t| problem.rate_coeff(t, i)).fold(f64::MAX, f64::min);
            let need: f64 = (0..10).map(|t| {
                let thr = problem.thresholds().unwrap()[t];
                thr / problem.rate_coeff(t, i)
            }).fold(0.0, f64::max);
            let b_star = (config.weights().delay_per_s * q / (kmin * config.weights().resource_per_hz * config.link.bandwidth_hz)).sqrt();
            let b = need.max(b_star).min(1.0);
            if b < need { continue; }
            let mut b_vec = vec![0.0; serving.len()];
            b_vec[i] = b;
            let mut r = vec![false; serving.len()];
            r[i] = true;
            let cost = evaluate_candidate(&problem, &problem.thresholds().unwrap(), &b_vec, &r);
            if cost.slot_feasible.iter().all(|&f| f) && cost.total < best {
                best = cost.total; best_sat = sat;
            }
        }
        println!("   best single-sat full-cover cost={best:.2} sat={best_sat}");
    }
}
