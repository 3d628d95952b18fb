//! Scratch probe: per-slot visibility counts and capacity by elevation.
use leoslice::constellation::*;
use leoslice::simkit::ScenarioConfig;

fn main() {
    let config = ScenarioConfig::reference();
    for el in [10.0, 20.0, 30.0, 40.0] {
        let mut area = config.area.clone();
        area.min_elevation_deg = el;
        let schedule = build_schedule(&config.constellation, &area, 90, 10.0, 10).unwrap();
        let mut min_vis = usize::MAX;
        let mut min_cap = f64::MAX;
        let mut sum_vis = 0usize;
        let mut full_cover_windows = 0usize;
        for t in 0..90 {
            let vis: Vec<usize> = (0..schedule.satellite_count())
                .filter(|&s| schedule.visible[s][t]).collect();
            let cap: f64 = vis.iter().map(|&s| config.link.rate_coefficient(schedule.distance_km[s][t])).sum();
            min_vis = min_vis.min(vis.len());
            sum_vis += vis.len();
            min_cap = min_cap.min(cap);
        }
        for w in 0..9 {
            let full = schedule.serving_set(w).iter().any(|&s| {
                (0..10).all(|t| schedule.visible[s][w * 10 + t])
            });
            if full { full_cover_windows += 1; }
        }
        // best per-slot single-satellite coefficient, averaged
        let mut best_k_sum = 0.0;
        for t in 0..90 {
            let best: f64 = (0..schedule.satellite_count())
                .filter(|&s| schedule.visible[s][t])
                .map(|s| config.link.rate_coefficient(schedule.distance_km[s][t]))
                .fold(0.0, f64::max);
            best_k_sum += best;
        }
        println!("el={el}: min_vis={min_vis} avg_vis={:.1} min_total_cap={min_cap:.0} avg_best_k={:.1} full_cover_windows={full_cover_windows}/9",
            sum_vis as f64 / 90.0, best_k_sum / 90.0);
    }
}
