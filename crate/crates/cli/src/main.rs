use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sortie_core::autonomy::EventScript;
use sortie_core::scenario::{
    calibrate_pixel_sigma, characterize_tag_error, run_endurance, run_monte_carlo_landing, run_scenario, RunLog,
    ScenarioConfig, ScenarioError,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Exit code for a run that ended in FAULT.
const EXIT_FAULT: u8 = 1;
/// Exit code for bad input: configuration, scripts, arguments.
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "sortie", version, about = "Closed-loop sortie simulation and experiment harnesses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its logs.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Timed event script, one `time EventName` per line.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Landing Monte-Carlo from randomized approach points.
    McLanding {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: usize,
        /// Base seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// 2σ distance error per tag size and height.
    TagError {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.7, 0.8, 0.9, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0])]
        heights: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.08, 0.15, 0.30, 0.48])]
        sizes: Vec<f64>,
        /// Fit the pixel noise to the 48 cm reference cell before sweeping.
        #[arg(long)]
        calibrate: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeated sorties for a number of simulated hours.
    Endurance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hours: f64,
        /// Simulated seconds per wall-clock second; unpaced when omitted.
        #[arg(long)]
        accel: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
}

fn write_logs(dir: &Path, log: &RunLog) -> Result<()> {
    write(dir, "runlog.csv", &log.runlog_csv())?;
    write(dir, "fsm.csv", &log.fsm_csv())?;
    write(dir, "nis.csv", &log.nis_csv())
}

/// Returns whether the run was nominal.
fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { common, seed, events } => {
            let cfg = load_config(&common.config, Some(seed))?;
            let script = match events {
                Some(p) => EventScript::load(&p).with_context(|| format!("event script {}", p.display()))?,
                None => EventScript::default(),
            };
            fs::create_dir_all(&common.out)?;
            let (log, summary) = run_scenario(&cfg, script)?;
            write_logs(&common.out, &log)?;
            write(&common.out, "summary.toml", &summary.to_toml())?;
            if let Some(f) = &summary.fault {
                log::error!("FAULT: {f}");
            }
            Ok(summary.is_nominal())
        }
        Command::McLanding { common, runs, seed } => {
            let cfg = load_config(&common.config, seed)?;
            fs::create_dir_all(&common.out)?;
            let report = run_monte_carlo_landing(&cfg, runs)?;
            write(&common.out, "summary.toml", &report.to_toml())?;
            write(&common.out, "scatter.csv", &report.scatter_csv())?;
            if let Some(e) = &report.ellipse {
                log::info!("2σ half-axes {:.3} m / {:.3} m, {:.1}% on pad", e.half_axes[0], e.half_axes[1], 100.0 * report.fraction_within_pad);
            }
            Ok(report.faults == 0)
        }
        Command::TagError { common, trials, heights, sizes, calibrate, seed } => {
            let mut cfg = load_config(&common.config, seed)?;
            if calibrate {
                match calibrate_pixel_sigma(&cfg, trials.max(1000)) {
                    Some(s) => {
                        log::info!("calibrated pixel noise {s:.4} px");
                        cfg.noise.pixel_sigma = s;
                    }
                    None => bail!("reference tag not detectable; cannot calibrate"),
                }
            }
            fs::create_dir_all(&common.out)?;
            let table = characterize_tag_error(&cfg, &heights, &sizes, trials)?;
            write(&common.out, "tag_error.csv", &table.to_csv())?;
            write(&common.out, "summary.toml", &format!("pixel_sigma = {}\ntrials = {trials}\n", cfg.noise.pixel_sigma))?;
            Ok(true)
        }
        Command::Endurance { common, hours, accel, seed } => {
            let mut cfg = load_config(&common.config, seed)?;
            if accel.is_some() {
                cfg.time_acceleration = accel;
            }
            fs::create_dir_all(&common.out)?;
            let (log, report) = run_endurance(&cfg, hours)?;
            write_logs(&common.out, &log)?;
            write(&common.out, "sorties.csv", &report.sorties_csv())?;
            write(&common.out, "summary.toml", &report.to_toml())?;
            log::info!("{} sorties, {} nominal", report.sorties, report.nominal_sorties);
            Ok(report.fault.is_none() && report.faults == 0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAULT),
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e.downcast_ref::<ScenarioError>().is_some_and(|s| !matches!(s, ScenarioError::Fault(_)))
                || e.downcast_ref::<sortie_core::autonomy::AutonomyError>().is_some();
            ExitCode::from(if invalid { EXIT_INVALID } else { EXIT_FAULT })
        }
    }
}
