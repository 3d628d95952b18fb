//! Scratch probe: prediction spread vs realized features on the reference
//! scenario.
use leoslice::demand::{extract_features, generate};
use leoslice::predictor::{mix_seed, BnnModel, TrainingSet};
use leoslice::simkit::ScenarioConfig;

fn main() {
    let config = ScenarioConfig::reference();
    let trace = generate(&config.regime(), config.sim.seeds.demand).unwrap();
    let tau = config.sim.slot_duration_s;
    let total_slots = config.sim.warmup_slots + config.horizon_slots();
    let features: Vec<_> = (0..total_slots)
        .map(|s| extract_features(&trace.samples[s * tau..(s + 1) * tau]).unwrap())
        .collect();
    let p = &config.predictor;
    let warm = config.sim.warmup_slots;
    let mut model = BnnModel::new(p.hidden_size, p.history_len, p.prior_std, p.init_std,
        mix_seed(config.sim.seeds.training, 0xA11CE));
    let data = TrainingSet::from_series(&features[..warm], p.history_len);
    let rep = model.train(&data, &p.train_options(p.epochs), mix_seed(config.sim.seeds.training, 1)).unwrap();
    println!("initial train: loss {:.2} -> {:.2} ({} pairs)", rep.loss_curve[0], rep.loss_curve.last().unwrap(), data.len());
    println!("obs noise std (raw): {:?}", model.observation_noise_std());
    for w in 0..9 {
        let start = warm + w * 10;
        let hist = &features[start - p.history_len..start];
        let preds = model.multistep_predict(hist, 10, p.mc_samples, mix_seed(3, w as u64)).unwrap();
        let realized: Vec<f64> = (0..10).map(|t| features[start + t].mean).collect();
        let pm: Vec<String> = preds.iter().map(|pf| format!("{:.1}±{:.1}", pf.feature.mean, pf.sd_mean)).collect();
        let rm: Vec<String> = realized.iter().map(|v| format!("{v:.1}")).collect();
        println!("w{w} pred: {}", pm.join(" "));
        println!("   real: {}", rm.join(" "));
        // fresh retrain per window on recent slots
        let recent: Vec<_> = features[start.saturating_sub(p.retrain_slots)..start + 10].to_vec();
        let recent = &recent[..recent.len() - 10];
        let d2 = TrainingSet::from_series(recent, p.history_len);
        model = BnnModel::new(p.hidden_size, p.history_len, p.prior_std, p.init_std,
            mix_seed(config.sim.seeds.training, 0xBEE + w as u64));
        model.train(&d2, &p.train_options(p.retrain_epochs), mix_seed(2, 100 + w as u64)).unwrap();
    }
}
