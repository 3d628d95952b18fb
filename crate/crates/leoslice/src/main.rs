//! Command-line front end: scenario simulation, predictor training, the
//! window-solver harness, elevation sweeps, and report aggregation.

use clap::{Parser, Subcommand};
use leoslice::predictor::{mix_seed, save_checkpoint, BnnModel, TrainingSet};
use leoslice::simkit::{
    run, summary_csv, summary_table, sweep_elevation, ConfigError, RunReport, RunSummary,
    ScenarioConfig, Scheme,
};
use leoslice::slicer::{oracle, solve_window, SliceProblem};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "leoslice",
    about = "Digital-twin-assisted resource slicing simulator for LEO satellite networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report files.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured scheme (frs | fdtrs | adtrs | perfect).
        #[arg(long)]
        scheme: Option<String>,
        /// Override the configured satisfaction level.
        #[arg(long)]
        gamma: Option<f64>,
        /// Output directory for report files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train the demand predictor on the scenario's warmup data and save a
    /// checkpoint plus the loss curve.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a serialized window instance and print the decision.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Also run the brute-force grid oracle and print both objectives.
        #[arg(long)]
        certify: bool,
        /// Grid step of the certification oracle.
        #[arg(long, default_value_t = 0.005)]
        step: f64,
    },
    /// Run the scenario once per elevation angle, seeds fixed.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated minimum elevation angles in degrees.
        #[arg(long, value_delimiter = ',')]
        elevations: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Aggregate run reports from a directory into the summary table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Simulate { config, scheme, gamma, out } => {
            let mut config = ScenarioConfig::load(&config).map_err(fmt_config_err)?;
            if let Some(name) = scheme {
                config.sim.scheme = Scheme::parse(&name).map_err(fmt_config_err)?;
            }
            if let Some(g) = gamma {
                config.sim.gamma = g;
            }
            config.validate().map_err(fmt_config_err)?;
            let report = run(&config).map_err(|e| e.to_string())?;
            write_report_files(&report, &out)?;
            write_coverage_csv(&config, &out)?;
            print!("{}", summary_table(&[RunSummary::of(&report)]));
            println!("report files written to {}", out.display());
            Ok(())
        }
        Command::Train { config, out } => {
            let config = ScenarioConfig::load(&config).map_err(fmt_config_err)?;
            let trace = leoslice::demand::generate(&config.regime(), config.sim.seeds.demand)
                .map_err(|e| e.to_string())?;
            let tau = config.sim.slot_duration_s;
            let features: Vec<_> = (0..config.sim.warmup_slots)
                .map(|slot| {
                    leoslice::demand::extract_features(&trace.samples[slot * tau..(slot + 1) * tau])
                        .expect("non-empty slot")
                })
                .collect();
            let p = &config.predictor;
            let mut model = BnnModel::new(
                p.hidden_size,
                p.history_len,
                p.prior_std,
                p.init_std,
                mix_seed(config.sim.seeds.training, 0xA11CE),
            );
            let data = TrainingSet::from_series(&features, p.history_len);
            let report = model
                .train(&data, &p.train_options(p.epochs), mix_seed(config.sim.seeds.training, 1))
                .map_err(|e| e.to_string())?;
            save_checkpoint(&model, &out).map_err(|e| e.to_string())?;
            let curve_path = out.with_extension("loss.csv");
            std::fs::write(&curve_path, report.loss_curve_csv()).map_err(|e| e.to_string())?;
            println!(
                "trained on {} windows; final loss {:.4}{}; checkpoint {}, loss curve {}",
                data.len(),
                report.loss_curve.last().unwrap(),
                if report.converged { "" } else { " (did not improve on initial loss)" },
                out.display(),
                curve_path.display()
            );
            Ok(())
        }
        Command::Solve { instance, certify, step } => {
            let text = std::fs::read_to_string(&instance).map_err(|e| e.to_string())?;
            let problem = SliceProblem::from_toml(&text).map_err(|e| e.to_string())?;
            let decision = solve_window(&problem).map_err(|e| e.to_string())?;
            println!("window {}", decision.window);
            println!("objective {}", decision.objective);
            for (i, sat) in decision.satellite_ids.iter().enumerate() {
                println!(
                    "sat {sat}: r={} b_tilde={:.6}{}",
                    u8::from(decision.active[i]),
                    decision.candidate_b[i],
                    if decision.locked[i] {
                        format!(" (locked at {:.6})", decision.executed_b[i])
                    } else {
                        String::new()
                    }
                );
            }
            if certify {
                match oracle::grid_search(&problem, step).map_err(|e| e.to_string())? {
                    Some(result) => {
                        println!("oracle objective {} (grid step {step})", result.objective);
                        let ratio = decision.objective / result.objective;
                        println!("solver/oracle ratio {ratio:.6}");
                    }
                    None => println!("oracle found no feasible grid point"),
                }
            }
            Ok(())
        }
        Command::Sweep { config, elevations, out } => {
            if elevations.is_empty() {
                return Err("at least one elevation angle is required".into());
            }
            let config = ScenarioConfig::load(&config).map_err(fmt_config_err)?;
            let reports = sweep_elevation(&config, &elevations).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            let mut summaries = Vec::new();
            for (angle, report) in elevations.iter().zip(&reports) {
                let label = format!("{}_el{angle}", report.scheme);
                std::fs::write(out.join(format!("run_{label}.txt")), report.to_text())
                    .map_err(|e| e.to_string())?;
                std::fs::write(out.join(format!("per_slot_{label}.csv")), report.per_slot_csv())
                    .map_err(|e| e.to_string())?;
                summaries.push(RunSummary { scheme: label, ..RunSummary::of(report) });
            }
            std::fs::write(out.join("summary.csv"), summary_csv(&summaries))
                .map_err(|e| e.to_string())?;
            print!("{}", summary_table(&summaries));
            Ok(())
        }
        Command::Report { input } => {
            let mut summaries = Vec::new();
            let mut entries: Vec<_> = std::fs::read_dir(&input)
                .map_err(|e| e.to_string())?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .map(|n| n.starts_with("run_") && n.ends_with(".txt"))
                        .unwrap_or(false)
                })
                .collect();
            entries.sort();
            for path in entries {
                let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
                if let Some(summary) = RunReport::summary_from_text(&text) {
                    summaries.push(summary);
                }
            }
            if summaries.is_empty() {
                return Err(format!("no run_*.txt reports under {}", input.display()));
            }
            std::fs::write(input.join("summary.csv"), summary_csv(&summaries))
                .map_err(|e| e.to_string())?;
            print!("{}", summary_table(&summaries));
            Ok(())
        }
    }
}

fn fmt_config_err(e: ConfigError) -> String {
    e.to_string()
}

fn write_report_files(report: &RunReport, out: &Path) -> Result<(), String> {
    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let label = report.scheme.clone();
    std::fs::write(out.join(format!("run_{label}.txt")), report.to_text())
        .map_err(|e| e.to_string())?;
    std::fs::write(out.join(format!("per_slot_{label}.csv")), report.per_slot_csv())
        .map_err(|e| e.to_string())?;
    if !report.events.is_empty() {
        std::fs::write(out.join(format!("twin_events_{label}.csv")), report.events_csv())
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn write_coverage_csv(config: &ScenarioConfig, out: &Path) -> Result<(), String> {
    let schedule = leoslice::constellation::build_schedule(
        &config.constellation,
        &config.area,
        config.horizon_slots(),
        config.sim.slot_duration_s as f64,
        config.sim.window_len,
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(out.join("coverage.csv"), schedule.to_csv()).map_err(|e| e.to_string())
}
