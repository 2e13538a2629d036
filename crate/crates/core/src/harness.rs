//! Scenario runner: guidance, controller, pod, kite and sensors wired at the
//! controller rate, with telemetry and a run summary.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::controller::{ControlInput, ControlOutput, Controller};
use crate::guidance::{BangBang, GuidanceState, NeutralHold, PatternGenerator};
use crate::kinematics::{airpath_speed, Angles};
use crate::plant::{
    holding_deflection, state_derivative, AeroParams, PlantLimits, Plant, Sensor, SimError, Wind,
};
use crate::scenario::{Mode, Scenario};
use crate::sysid::{fit_gain_batch, RlsState};
use crate::telemetry::{self, flight_row, flight_rows, LogRow, TelemetryError};

/// Environment variable naming the output directory.
pub const OUTPUT_DIR_ENV: &str = "KITEPILOT_OUT";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read replay log {path}: {source}")]
    Replay {
        path: String,
        source: TelemetryError,
    },
    #[error("replay log {0} has no rows")]
    EmptyReplay(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    Crash,
    SingularState,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Completed => 0,
            Outcome::Crash => 2,
            Outcome::SingularState => 3,
        }
    }

    pub fn from_error(e: &SimError) -> Outcome {
        match e {
            SimError::Crash { .. } => Outcome::Crash,
            SimError::SingularState { .. } | SimError::DegenerateWind { .. } => Outcome::SingularState,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Completed => "completed",
            Outcome::Crash => "crash",
            Outcome::SingularState => "singular-state",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub message: Option<String>,
    pub rows: usize,
    /// Changes of the guidance state between consecutive rows.
    pub transitions: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub v_a_min: f64,
    pub v_a_max: f64,
    pub peak_delta: f64,
    pub peak_delta_ff: f64,
    pub peak_delta_fbk: f64,
    /// Mean `v_a / v0` over the steady window: rows after the second guidance
    /// transition, or the second half of the log when there are fewer.
    pub va_ratio: f64,
    pub steady_peak_delta: f64,
    pub g_hat: f64,
    pub m_hat: f64,
    /// Batch fit of `g` over the whole log, when the log excites it.
    pub batch_g: Option<f64>,
}

fn max_abs(rows: &[LogRow], f: impl Fn(&LogRow) -> f64) -> f64 {
    rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max)
}

fn min_max(rows: &[LogRow], f: impl Fn(&LogRow) -> f64) -> (f64, f64) {
    rows.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Index of the first row of the steady window.
pub fn steady_window_start(rows: &[LogRow]) -> usize {
    let mut changes = 0;
    for k in 1..rows.len() {
        if rows[k].guidance_state != rows[k - 1].guidance_state {
            changes += 1;
            if changes == 2 {
                return k;
            }
        }
    }
    rows.len() / 2
}

/// Aggregate a log. Everything except the outcome is a function of the rows,
/// so recomputing from a CSV gives the same numbers.
pub fn summarize(rows: &[LogRow], outcome: Outcome, message: Option<String>, lag: usize) -> RunSummary {
    let transitions = rows
        .windows(2)
        .filter(|w| w[0].guidance_state != w[1].guidance_state)
        .count();
    let (theta_min, theta_max) = min_max(rows, |r| r.theta);
    let (phi_min, phi_max) = min_max(rows, |r| r.phi);
    let (v_a_min, v_a_max) = min_max(rows, |r| r.v_a);
    let steady = &rows[steady_window_start(rows)..];
    let ratios: Vec<f64> = steady
        .iter()
        .filter(|r| r.v0 > 0.0)
        .map(|r| r.v_a / r.v0)
        .collect();
    let va_ratio = if ratios.is_empty() {
        f64::NAN
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    };
    let last = rows.last();
    RunSummary {
        outcome,
        message,
        rows: rows.len(),
        transitions,
        theta_min,
        theta_max,
        phi_min,
        phi_max,
        v_a_min,
        v_a_max,
        peak_delta: max_abs(rows, |r| r.delta),
        peak_delta_ff: max_abs(rows, |r| r.delta_ff),
        peak_delta_fbk: max_abs(rows, |r| r.delta_fbk),
        va_ratio,
        steady_peak_delta: max_abs(steady, |r| r.delta),
        g_hat: last.map_or(f64::NAN, |r| r.g_hat),
        m_hat: last.map_or(f64::NAN, |r| r.m_hat),
        batch_g: fit_gain_batch(&flight_rows(rows, lag)).ok().map(|f| f.g_hat),
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = telemetry::format_number;
        writeln!(f, "outcome = {}", self.outcome)?;
        if let Some(m) = &self.message {
            writeln!(f, "message = {m}")?;
        }
        writeln!(f, "rows = {}", self.rows)?;
        writeln!(f, "transitions = {}", self.transitions)?;
        writeln!(f, "theta_min = {}", n(self.theta_min))?;
        writeln!(f, "theta_max = {}", n(self.theta_max))?;
        writeln!(f, "phi_min = {}", n(self.phi_min))?;
        writeln!(f, "phi_max = {}", n(self.phi_max))?;
        writeln!(f, "v_a_min = {}", n(self.v_a_min))?;
        writeln!(f, "v_a_max = {}", n(self.v_a_max))?;
        writeln!(f, "peak_delta = {}", n(self.peak_delta))?;
        writeln!(f, "peak_delta_ff = {}", n(self.peak_delta_ff))?;
        writeln!(f, "peak_delta_fbk = {}", n(self.peak_delta_fbk))?;
        writeln!(f, "va_ratio = {}", n(self.va_ratio))?;
        writeln!(f, "steady_peak_delta = {}", n(self.steady_peak_delta))?;
        writeln!(f, "g_hat = {}", n(self.g_hat))?;
        writeln!(f, "M_hat = {}", n(self.m_hat))?;
        match self.batch_g {
            Some(g) => writeln!(f, "batch_g = {}", n(g)),
            None => writeln!(f, "batch_g = none"),
        }
    }
}

fn initial_guidance(mode: Mode) -> GuidanceState {
    match mode {
        Mode::Pattern => GuidanceState::Pattern(PatternGenerator::default()),
        Mode::BangBang => GuidanceState::BangBang(BangBang::default()),
        Mode::Neutral => GuidanceState::Neutral(NeutralHold::default()),
        Mode::Step | Mode::SysidReplay => GuidanceState::Step,
    }
}

/// Simulate a scenario. A crash or singular state ends the run early and is
/// reported as the outcome; the log up to that tick is kept.
pub fn run_scenario(s: &Scenario) -> Result<(Vec<LogRow>, RunSummary), HarnessError> {
    if s.mode == Mode::SysidReplay {
        return replay(s);
    }
    let dt = s.controller.sample_dt;
    let ticks = (s.duration / dt).round() as usize;
    let lag = s.sensor.delay_steps;
    let initial = s.initial.resolve(s.aero.glide_ratio);
    let mut plant = Plant::new(s.aero, s.plant, s.actuator, initial, Wind::new(s.wind, s.seed));
    let mut sensor = Sensor::new(s.sensor, s.seed.wrapping_add(1));
    let mut controller = Controller::new(s.controller);
    let mut guidance = initial_guidance(s.mode);
    let mut rls = RlsState::new(s.sysid.rls_config(s.controller.v_a_min));
    let mut rows: Vec<LogRow> = Vec::with_capacity(ticks);
    let mut failure: Option<SimError> = None;

    for _ in 0..ticks {
        let rates = match plant.rates() {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let v0 = plant.v0();
        let m = sensor.sense(&plant.state, &rates, v0, s.aero.glide_ratio);
        let input = ControlInput::from(&m);
        let out = match &mut guidance {
            GuidanceState::BangBang(b) => {
                let cmd = b.step(m.psi_m, &s.bangbang);
                ControlOutput {
                    delta_cmd: cmd,
                    delta_ff: cmd,
                    ..ControlOutput::default()
                }
            }
            GuidanceState::Pattern(p) => controller.step(p.step(m.phi_m, &s.pattern), input),
            GuidanceState::Neutral(n) => controller.step(n.step(m.phi_m, &s.neutral, dt), input),
            GuidanceState::Step => controller.step(s.step.setpoint(m.t), input),
        };
        let a = plant.state.angles;
        rows.push(
            LogRow {
                t: plant.state.t,
                phi: a.phi,
                theta: a.theta,
                psi: a.psi,
                psi_s: out.psi_s,
                psi_c: out.psi_c,
                psi_m: m.psi_m,
                psi_dot_m: m.psi_dot_m,
                psi_dot_s: out.psi_dot_s,
                psi_dot_c: out.psi_dot_c,
                delta: plant.actuator.delta,
                delta_ff: out.delta_ff,
                delta_fbk: out.delta_fbk,
                v_a: m.v_a,
                v0,
                guidance_state: guidance.label().to_string(),
                g_hat: s.controller.g_hat,
                m_hat: s.controller.m_hat,
            }
            .quantized(),
        );
        let k = rows.len() - 1;
        if s.sysid.enabled {
            if let Some(fr) = flight_row(&rows, k, lag) {
                rls = rls.update(&fr);
            }
            rows[k].g_hat = telemetry::quantize(rls.g());
            rows[k].m_hat = telemetry::quantize(rls.m());
        }
        if let Err(e) = plant.advance(out.delta_cmd, dt) {
            failure = Some(e);
            break;
        }
    }

    let (outcome, message) = match &failure {
        None => (Outcome::Completed, None),
        Some(e) => (Outcome::from_error(e), Some(e.to_string())),
    };
    let summary = summarize(&rows, outcome, message, lag);
    Ok((rows, summary))
}

/// Re-run identification over a recorded log, rewriting its estimate columns.
fn replay(s: &Scenario) -> Result<(Vec<LogRow>, RunSummary), HarnessError> {
    let path = s.sysid.replay_log.clone().unwrap_or_default();
    let file = File::open(&path).map_err(|e| HarnessError::Replay {
        path: path.clone(),
        source: e.into(),
    })?;
    let mut rows = telemetry::read_log(file).map_err(|source| HarnessError::Replay {
        path: path.clone(),
        source,
    })?;
    if rows.is_empty() {
        return Err(HarnessError::EmptyReplay(path));
    }
    let lag = s.sensor.delay_steps;
    let mut rls = RlsState::new(s.sysid.rls_config(s.controller.v_a_min));
    for k in 0..rows.len() {
        if let Some(fr) = flight_row(&rows, k, lag) {
            rls = rls.update(&fr);
        }
        rows[k].g_hat = telemetry::quantize(rls.g());
        rows[k].m_hat = telemetry::quantize(rls.m());
    }
    let summary = summarize(&rows, Outcome::Completed, None, lag);
    Ok((rows, summary))
}

pub fn output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

/// Write `<name>.csv` and `<name>.summary` into `dir`.
pub fn write_outputs(
    dir: &Path,
    name: &str,
    rows: &[LogRow],
    summary: &RunSummary,
) -> Result<(PathBuf, PathBuf), HarnessError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Output { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv_path = dir.join(format!("{name}.csv"));
    let file = File::create(&csv_path).map_err(io(&csv_path))?;
    telemetry::write_log(BufWriter::new(file), rows).map_err(io(&csv_path))?;
    let summary_path = dir.join(format!("{name}.summary"));
    std::fs::write(&summary_path, summary.to_string()).map_err(io(&summary_path))?;
    Ok((csv_path, summary_path))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldSample {
    pub t: f64,
    pub angles: Angles,
}

/// Fly with the orientation frozen at `psi`: every RK4 stage applies the
/// deflection that cancels the turn rate, so `psi` stays exact while
/// `phi` and `theta` evolve. The ground-proximity check is not applied.
pub fn orientation_hold(
    p: &AeroParams,
    limits: &PlantLimits,
    v0: f64,
    start: Angles,
    duration: f64,
    dt: f64,
) -> Result<Vec<HoldSample>, SimError> {
    let deriv = |a: Angles, t: f64| -> Result<[f64; 2], SimError> {
        let delta = holding_deflection(a, p, v0, limits);
        let r = state_derivative(a, t, delta, p, v0, limits)?;
        Ok([r.phi_dot, r.theta_dot])
    };
    let steps = (duration / dt).round() as usize;
    let mut a = start;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(HoldSample { t: 0.0, angles: a });
    for i in 0..steps {
        let t = i as f64 * dt;
        let at = |k: [f64; 2], h: f64| Angles::new(a.phi + h * k[0], a.theta + h * k[1], a.psi);
        let k1 = deriv(a, t)?;
        let k2 = deriv(at(k1, dt / 2.0), t + dt / 2.0)?;
        let k3 = deriv(at(k2, dt / 2.0), t + dt / 2.0)?;
        let k4 = deriv(at(k3, dt), t + dt)?;
        a = Angles::new(
            a.phi + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            a.theta + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            a.psi,
        );
        if a.theta < limits.theta_min {
            return Err(SimError::SingularState {
                t: t + dt,
                theta: a.theta,
            });
        }
        out.push(HoldSample { t: t + dt, angles: a });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub psi: f64,
    pub glide_ratio: f64,
    pub v0: f64,
    pub line_length: f64,
    pub theta_final: f64,
    pub theta_expected: f64,
    pub va_ratio: f64,
}

/// Parameters a steady-state sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Psi,
    GlideRatio,
    WindSpeed,
    LineLength,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "psi" => SweepParam::Psi,
            "E" => SweepParam::GlideRatio,
            "v0" => SweepParam::WindSpeed,
            "L" => SweepParam::LineLength,
            other => return Err(format!("unknown sweep parameter '{other}' (psi, E, v0, L)")),
        })
    }
}

/// Hold `psi` from the zenith long enough for `theta` to settle and compare
/// with `atan(E cos psi)`.
pub fn sweep_point(
    base: &Scenario,
    param: SweepParam,
    value: f64,
    duration: f64,
) -> Result<(SweepPoint, Vec<HoldSample>), SimError> {
    let mut aero = base.aero;
    let mut v0 = base.wind.v0_mean;
    let mut psi = base.step.amplitude;
    match param {
        SweepParam::Psi => psi = value,
        SweepParam::GlideRatio => aero.glide_ratio = value,
        SweepParam::WindSpeed => v0 = value,
        SweepParam::LineLength => aero.line_length = value,
    }
    let start = Angles::new(0.0, aero.glide_ratio.atan(), psi);
    let samples = orientation_hold(&aero, &base.plant, v0, start, duration, base.plant.dt_inner)?;
    let theta_final = samples.last().map_or(start.theta, |s| s.angles.theta);
    let point = SweepPoint {
        psi,
        glide_ratio: aero.glide_ratio,
        v0,
        line_length: aero.line_length,
        theta_final,
        theta_expected: (aero.glide_ratio * psi.cos()).atan(),
        va_ratio: if v0 > 0.0 {
            airpath_speed(v0, aero.glide_ratio, theta_final) / v0
        } else {
            f64::NAN
        },
    };
    Ok((point, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn outcome_exit_codes() {
        assert_eq!(Outcome::Completed.exit_code(), 0);
        assert_eq!(Outcome::Crash.exit_code(), 2);
        assert_eq!(Outcome::SingularState.exit_code(), 3);
    }

    #[test]
    fn one_row_per_tick() {
        let s = Scenario {
            duration: 5.0,
            ..Scenario::for_mode(Mode::Step)
        };
        let (rows, summary) = run_scenario(&s).unwrap();
        assert_eq!(rows.len(), 50);
        assert_eq!(summary.outcome, Outcome::Completed);
        for (k, r) in rows.iter().enumerate() {
            assert!((r.t - k as f64 * 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn hold_keeps_psi_and_settles_theta() {
        let s = Scenario::default();
        let (p, samples) = sweep_point(&s, SweepParam::Psi, 0.6, 600.0).unwrap();
        assert!(samples.iter().all(|x| x.angles.psi == 0.6));
        assert!((p.theta_final - p.theta_expected).abs() < 1e-6);
    }

    #[test]
    fn steady_window_after_second_transition() {
        let mk = |g: &str| LogRow {
            guidance_state: g.to_string(),
            ..telemetry_row()
        };
        let rows = vec![mk("a"), mk("a"), mk("b"), mk("b"), mk("a"), mk("a")];
        assert_eq!(steady_window_start(&rows), 4);
        let flat = vec![mk("a"); 6];
        assert_eq!(steady_window_start(&flat), 3);
    }

    fn telemetry_row() -> LogRow {
        LogRow {
            t: 0.0,
            phi: 0.0,
            theta: 1.0,
            psi: 0.0,
            psi_s: 0.0,
            psi_c: 0.0,
            psi_m: 0.0,
            psi_dot_m: 0.0,
            psi_dot_s: 0.0,
            psi_dot_c: 0.0,
            delta: 0.0,
            delta_ff: 0.0,
            delta_fbk: 0.0,
            v_a: 1.0,
            v0: 1.0,
            guidance_state: String::new(),
            g_hat: 0.0,
            m_hat: 0.0,
        }
    }
}
