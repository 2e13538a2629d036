use std::fs::{self, File};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use kitepilot::harness::{self, output_dir, sweep_point, write_outputs, SweepParam};
use kitepilot::scenario::{parse_scenario, Scenario};
use kitepilot::sysid::{fit_gain_batch, fit_law_batch, information_matrix, rls_track, RlsConfig};
use kitepilot::telemetry::{self, flight_rows, format_number};

const CONFIG_ERROR: u8 = 4;

#[derive(Parser)]
#[command(name = "kitepilot", version, about = "Towing-kite design-model simulator and autopilot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file; writes <name>.csv and <name>.summary into $KITEPILOT_OUT (default ./out).
    Run { scenario: PathBuf },
    /// Identify the turn-rate law from a telemetry CSV.
    Sysid {
        csv: PathBuf,
        /// Also track (g, M) with recursive least squares.
        #[arg(long)]
        rls: bool,
        /// Rows between a deflection and the gyro sample it explains.
        #[arg(long, default_value_t = 2)]
        lag: usize,
        /// Forgetting factor for --rls.
        #[arg(long, default_value_t = 0.995)]
        lambda: f64,
    },
    /// Steady-state map: hold psi fixed and report the settled theta.
    Sweep {
        /// One of psi, E, v0, L.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Base scenario; defaults otherwise. The held psi comes from [step] amplitude.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Hold duration in seconds.
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
    },
    /// Run the invariant suite.
    Selftest,
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(path: PathBuf) -> ExitCode {
    let scenario = match load_scenario(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let (rows, summary) = match harness::run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    match write_outputs(&output_dir(), &scenario.name, &rows, &summary) {
        Ok((csv, report)) => {
            print!("{summary}");
            println!("csv = {}", csv.display());
            println!("summary = {}", report.display());
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if let Some(m) = &summary.message {
        eprintln!("{}: {m}", summary.outcome);
    }
    ExitCode::from(summary.outcome.exit_code() as u8)
}

fn sysid(csv: PathBuf, rls: bool, lag: usize, lambda: f64) -> ExitCode {
    let rows = match File::open(&csv)
        .map_err(telemetry::TelemetryError::from)
        .and_then(telemetry::read_log)
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", csv.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let samples = flight_rows(&rows, lag);
    match fit_gain_batch(&samples) {
        Ok(fit) => {
            println!("batch_g = {}", format_number(fit.g_hat));
            println!("residual_rms = {}", format_number(fit.residual_rms));
            println!("rows = {}", fit.rows);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if let Ok([g, m]) = fit_law_batch(&samples) {
        println!("batch_g_M = {} {}", format_number(g), format_number(m));
        println!(
            "condition = {}",
            format_number(information_matrix(&samples).condition_number())
        );
    }
    if rls {
        let cfg = RlsConfig {
            lambda,
            ..RlsConfig::default()
        };
        let track = rls_track(cfg, &samples);
        println!("t,g_hat,M_hat");
        for (row, state) in samples.iter().zip(&track) {
            println!(
                "{},{},{}",
                format_number(row.t),
                format_number(state.g()),
                format_number(state.m())
            );
        }
    }
    ExitCode::SUCCESS
}

fn sweep(param: SweepParam, values: Vec<f64>, base: Option<PathBuf>, duration: f64) -> ExitCode {
    let base = match base.map(|p| load_scenario(&p)).transpose() {
        Ok(s) => s.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let dir = output_dir();
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    let results: Vec<_> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let (point, samples) = sweep_point(&base, param, value, duration).map_err(|e| e.to_string())?;
            let path = dir.join(format!("{}-sweep-{i:03}.csv", base.name));
            let mut text = String::from("t,phi,theta,psi\n");
            for s in samples.iter().step_by(10) {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    format_number(s.t),
                    format_number(s.angles.phi),
                    format_number(s.angles.theta),
                    format_number(s.angles.psi)
                ));
            }
            fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
            Ok::<_, String>(point)
        })
        .collect();
    println!("psi,E,v0,L,theta,theta_expected,error,va_ratio");
    let mut failed = false;
    for r in results {
        match r {
            Ok(p) => println!(
                "{},{},{},{},{},{},{},{}",
                format_number(p.psi),
                format_number(p.glide_ratio),
                format_number(p.v0),
                format_number(p.line_length),
                format_number(p.theta_final),
                format_number(p.theta_expected),
                format_number(p.theta_final - p.theta_expected),
                format_number(p.va_ratio)
            ),
            Err(e) => {
                eprintln!("error: {e}");
                failed = true;
            }
        }
    }
    if failed {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn selftest() -> ExitCode {
    let checks = kitepilot::selftest::run_all();
    let mut ok = true;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario } => run(scenario),
        Command::Sysid { csv, rls, lag, lambda } => sysid(csv, rls, lag, lambda),
        Command::Sweep {
            param,
            values,
            scenario,
            duration,
        } => sweep(param, values, scenario, duration),
        Command::Selftest => selftest(),
    }
}
