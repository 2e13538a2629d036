//! Scenario files.
//!
//! A scenario is flat, line-oriented UTF-8 text. Top-level keys come first,
//! followed by optional `[section]` blocks:
//!
//! ```text
//! # comment
//! name = pattern-default
//! mode = pattern          # not allowed: comments must be on their own line
//! duration = 300
//! seed = 1
//!
//! [aero]
//! E = 5
//! g = 0.04
//! ```
//!
//! Every key is optional except `mode`; missing keys take the defaults of
//! [`Scenario::default`]. Unknown sections or keys, duplicate keys and
//! malformed lines are rejected with their line number. After parsing, the
//! scenario is validated as a whole and every violated invariant is reported.
//!
//! | section        | keys |
//! |----------------|------|
//! | (top level)    | `name`, `mode` (`step`, `bangbang`, `pattern`, `neutral`, `sysid-replay`), `duration`, `seed` |
//! | `[aero]`       | `E`, `g`, `M`, `L` |
//! | `[wind]`       | `v0`, `gust_amplitude`, `gust_period`, `turbulence_sigma`, `turbulence_tau` |
//! | `[actuator]`   | `rate_limit` |
//! | `[sensor]`     | `delay_steps`, `sigma_psi`, `sigma_psi_dot`, `sigma_v_a`, `sigma_phi`, `sample_rate`, `gyro_correction` |
//! | `[plant]`      | `dt_inner`, `theta_min`, `v_a_min`, `crash_elevation_deg`, `kinematic_correction` |
//! | `[controller]` | `g_hat`, `M_hat`, `delta_ff_limit`, `delta_total_limit`, `rate_limit`, `delay_n`, `outer_P`, `outer_lowpass_tau`, `outer_rate_limit`, `inner_Kp`, `inner_Ki`, `inner_lowpass_tau`, `psi_c_limit`, `sample_dt`, `v_a_min` |
//! | `[pattern]`    | `phi_0`, `phi_a`, `psi_0` |
//! | `[bangbang]`   | `delta_0`, `psi_threshold` |
//! | `[neutral]`    | `phi_set`, `Kp`, `Ki`, `Kd`, `derivative_tau`, `psi_limit` |
//! | `[step]`       | `amplitude`, `period`, `start` |
//! | `[initial]`    | `phi`, `theta` (defaults to the zenith `atan E`), `psi` |
//! | `[sysid]`      | `enabled`, `lambda`, `g0`, `M0`, `p0`, `exact_init`, `replay_log` |
//!
//! Booleans are `true`/`false`. Numbers use Rust float syntax.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::controller::ControllerConfig;
use crate::guidance::{BangBangConfig, NeutralConfig, PatternConfig, StepConfig};
use crate::kinematics::Angles;
use crate::plant::{AeroParams, ActuatorParams, PlantLimits, SensorModel, WindModel};
use crate::sysid::{RlsConfig, RlsInit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Step,
    BangBang,
    Pattern,
    Neutral,
    SysidReplay,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Step => "step",
            Mode::BangBang => "bangbang",
            Mode::Pattern => "pattern",
            Mode::Neutral => "neutral",
            Mode::SysidReplay => "sysid-replay",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "step" => Mode::Step,
            "bangbang" => Mode::BangBang,
            "pattern" => Mode::Pattern,
            "neutral" => Mode::Neutral,
            "sysid-replay" => Mode::SysidReplay,
            other => return Err(format!("unknown mode '{other}'")),
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialAngles {
    pub phi: f64,
    /// `None` starts at the zenith `atan(E)`.
    pub theta: Option<f64>,
    pub psi: f64,
}

impl Default for InitialAngles {
    fn default() -> Self {
        Self {
            phi: 0.0,
            theta: None,
            psi: 0.0,
        }
    }
}

impl InitialAngles {
    pub fn resolve(&self, glide_ratio: f64) -> Angles {
        Angles::new(self.phi, self.theta.unwrap_or_else(|| glide_ratio.atan()), self.psi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SysidSettings {
    pub enabled: bool,
    pub lambda: f64,
    pub g0: f64,
    pub m0: f64,
    pub p0: f64,
    pub exact_init: bool,
    /// Telemetry CSV re-identified in `sysid-replay` mode.
    pub replay_log: Option<String>,
}

impl Default for SysidSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            lambda: 0.995,
            g0: 0.03,
            m0: 0.0,
            p0: 10.0,
            exact_init: false,
            replay_log: None,
        }
    }
}

impl SysidSettings {
    pub fn rls_config(&self, v_a_min: f64) -> RlsConfig {
        RlsConfig {
            lambda: self.lambda,
            v_a_min,
            init: if self.exact_init {
                RlsInit::Exact
            } else {
                RlsInit::Prior {
                    estimate: [self.g0, self.m0],
                    p0: self.p0,
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub duration: f64,
    pub seed: u64,
    pub aero: AeroParams,
    pub wind: WindModel,
    pub actuator: ActuatorParams,
    pub sensor: SensorModel,
    pub plant: PlantLimits,
    pub controller: ControllerConfig,
    pub pattern: PatternConfig,
    pub bangbang: BangBangConfig,
    pub neutral: NeutralConfig,
    pub step: StepConfig,
    pub initial: InitialAngles,
    pub sysid: SysidSettings,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".to_string(),
            mode: Mode::Pattern,
            duration: 120.0,
            seed: 1,
            aero: AeroParams::default(),
            wind: WindModel::default(),
            actuator: ActuatorParams::default(),
            sensor: SensorModel::default(),
            plant: PlantLimits::default(),
            controller: ControllerConfig::default(),
            pattern: PatternConfig::default(),
            bangbang: BangBangConfig::default(),
            neutral: NeutralConfig::default(),
            step: StepConfig::default(),
            initial: InitialAngles::default(),
            sysid: SysidSettings::default(),
        }
    }
}

impl Scenario {
    /// Defaults for `mode`, with the duration each mode's demo run uses.
    pub fn for_mode(mode: Mode) -> Self {
        let duration = match mode {
            Mode::Pattern => 300.0,
            Mode::BangBang => 90.0,
            Mode::Neutral => 90.0,
            Mode::Step => 60.0,
            Mode::SysidReplay => 1.0,
        };
        Self {
            name: mode.as_str().to_string(),
            mode,
            duration,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {}", join(.0))]
    Parse(Vec<ParseIssue>),
    #[error("invalid scenario: {}", .0.join("; "))]
    Validation(Vec<String>),
}

fn join(issues: &[ParseIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

type Setter = fn(&mut Scenario, &str) -> Result<(), String>;
type Getter = fn(&Scenario) -> Option<String>;

struct Field {
    section: &'static str,
    key: &'static str,
    get: Getter,
    set: Setter,
}

fn parse_num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("'{v}' is not a valid {}", std::any::type_name::<T>()))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("'{v}' is not a boolean (true/false)")),
    }
}

macro_rules! num_field {
    ($sec:literal, $key:literal, $ty:ty, $($path:ident).+) => {
        Field {
            section: $sec,
            key: $key,
            get: |s: &Scenario| Some(s.$($path).+.to_string()),
            set: |s: &mut Scenario, v: &str| {
                s.$($path).+ = parse_num::<$ty>(v)?;
                Ok(())
            },
        }
    };
}

macro_rules! bool_field {
    ($sec:literal, $key:literal, $($path:ident).+) => {
        Field {
            section: $sec,
            key: $key,
            get: |s: &Scenario| Some(s.$($path).+.to_string()),
            set: |s: &mut Scenario, v: &str| {
                s.$($path).+ = parse_bool(v)?;
                Ok(())
            },
        }
    };
}

fn fields() -> Vec<Field> {
    vec![
        Field {
            section: "",
            key: "name",
            get: |s| Some(s.name.clone()),
            set: |s, v| {
                s.name = v.to_string();
                Ok(())
            },
        },
        Field {
            section: "",
            key: "mode",
            get: |s| Some(s.mode.to_string()),
            set: |s, v| {
                s.mode = v.parse()?;
                Ok(())
            },
        },
        num_field!("", "duration", f64, duration),
        num_field!("", "seed", u64, seed),
        num_field!("aero", "E", f64, aero.glide_ratio),
        num_field!("aero", "g", f64, aero.steer_gain),
        num_field!("aero", "M", f64, aero.mass_term),
        num_field!("aero", "L", f64, aero.line_length),
        num_field!("wind", "v0", f64, wind.v0_mean),
        num_field!("wind", "gust_amplitude", f64, wind.gust_amplitude),
        num_field!("wind", "gust_period", f64, wind.gust_period),
        num_field!("wind", "turbulence_sigma", f64, wind.turbulence_sigma),
        num_field!("wind", "turbulence_tau", f64, wind.turbulence_tau),
        num_field!("actuator", "rate_limit", f64, actuator.rate_limit),
        num_field!("sensor", "delay_steps", usize, sensor.delay_steps),
        num_field!("sensor", "sigma_psi", f64, sensor.sigma_psi),
        num_field!("sensor", "sigma_psi_dot", f64, sensor.sigma_psi_dot),
        num_field!("sensor", "sigma_v_a", f64, sensor.sigma_v_a),
        num_field!("sensor", "sigma_phi", f64, sensor.sigma_phi),
        num_field!("sensor", "sample_rate", f64, sensor.sample_rate),
        bool_field!("sensor", "gyro_correction", sensor.gyro_correction),
        num_field!("plant", "dt_inner", f64, plant.dt_inner),
        num_field!("plant", "theta_min", f64, plant.theta_min),
        num_field!("plant", "v_a_min", f64, plant.v_a_min),
        num_field!("plant", "crash_elevation_deg", f64, plant.crash_elevation_deg),
        bool_field!("plant", "kinematic_correction", plant.kinematic_correction),
        num_field!("controller", "g_hat", f64, controller.g_hat),
        num_field!("controller", "M_hat", f64, controller.m_hat),
        num_field!("controller", "delta_ff_limit", f64, controller.delta_ff_limit),
        num_field!("controller", "delta_total_limit", f64, controller.delta_total_limit),
        num_field!("controller", "rate_limit", f64, controller.rate_limit),
        num_field!("controller", "delay_n", usize, controller.delay_n),
        num_field!("controller", "outer_P", f64, controller.outer_p),
        num_field!("controller", "outer_lowpass_tau", f64, controller.outer_lowpass_tau),
        num_field!("controller", "outer_rate_limit", f64, controller.outer_rate_limit),
        num_field!("controller", "inner_Kp", f64, controller.inner_kp),
        num_field!("controller", "inner_Ki", f64, controller.inner_ki),
        num_field!("controller", "inner_lowpass_tau", f64, controller.inner_lowpass_tau),
        num_field!("controller", "psi_c_limit", f64, controller.psi_c_limit),
        num_field!("controller", "sample_dt", f64, controller.sample_dt),
        num_field!("controller", "v_a_min", f64, controller.v_a_min),
        num_field!("pattern", "phi_0", f64, pattern.phi_0),
        num_field!("pattern", "phi_a", f64, pattern.phi_a),
        num_field!("pattern", "psi_0", f64, pattern.psi_0),
        num_field!("bangbang", "delta_0", f64, bangbang.delta_0),
        num_field!("bangbang", "psi_threshold", f64, bangbang.psi_threshold),
        num_field!("neutral", "phi_set", f64, neutral.phi_set),
        num_field!("neutral", "Kp", f64, neutral.kp),
        num_field!("neutral", "Ki", f64, neutral.ki),
        num_field!("neutral", "Kd", f64, neutral.kd),
        num_field!("neutral", "derivative_tau", f64, neutral.derivative_tau),
        num_field!("neutral", "psi_limit", f64, neutral.psi_limit),
        num_field!("step", "amplitude", f64, step.amplitude),
        num_field!("step", "period", f64, step.period),
        num_field!("step", "start", f64, step.start),
        num_field!("initial", "phi", f64, initial.phi),
        Field {
            section: "initial",
            key: "theta",
            get: |s| s.initial.theta.map(|t| t.to_string()),
            set: |s, v| {
                s.initial.theta = Some(parse_num::<f64>(v)?);
                Ok(())
            },
        },
        num_field!("initial", "psi", f64, initial.psi),
        bool_field!("sysid", "enabled", sysid.enabled),
        num_field!("sysid", "lambda", f64, sysid.lambda),
        num_field!("sysid", "g0", f64, sysid.g0),
        num_field!("sysid", "M0", f64, sysid.m0),
        num_field!("sysid", "p0", f64, sysid.p0),
        bool_field!("sysid", "exact_init", sysid.exact_init),
        Field {
            section: "sysid",
            key: "replay_log",
            get: |s| s.sysid.replay_log.clone(),
            set: |s, v| {
                s.sysid.replay_log = Some(v.to_string());
                Ok(())
            },
        },
    ]
}

const SECTIONS: &[&str] = &[
    "aero",
    "wind",
    "actuator",
    "sensor",
    "plant",
    "controller",
    "pattern",
    "bangbang",
    "neutral",
    "step",
    "initial",
    "sysid",
];

/// Parse and validate scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let table = fields();
    let mut scenario = Scenario::default();
    let mut issues = Vec::new();
    let mut seen: HashSet<(&'static str, &'static str)> = HashSet::new();
    let mut section: Option<&'static str> = Some("");
    let mut saw_mode = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                issues.push(ParseIssue {
                    line: line_no,
                    message: format!("malformed section header '{line}'"),
                });
                section = None;
                continue;
            };
            let name = name.trim();
            section = SECTIONS.iter().copied().find(|s| *s == name);
            if section.is_none() {
                issues.push(ParseIssue {
                    line: line_no,
                    message: format!("unknown section [{name}]"),
                });
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            issues.push(ParseIssue {
                line: line_no,
                message: format!("expected 'key = value', found '{line}'"),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        // keys under an unknown section were already reported with the header
        let Some(sec) = section else { continue };
        let Some(field) = table.iter().find(|f| f.section == sec && f.key == key) else {
            let place = if sec.is_empty() {
                "top level".to_string()
            } else {
                format!("[{sec}]")
            };
            issues.push(ParseIssue {
                line: line_no,
                message: format!("unknown key '{key}' in {place}"),
            });
            continue;
        };
        if !seen.insert((field.section, field.key)) {
            issues.push(ParseIssue {
                line: line_no,
                message: format!("duplicate key '{key}'"),
            });
            continue;
        }
        if value.is_empty() {
            issues.push(ParseIssue {
                line: line_no,
                message: format!("missing value for '{key}'"),
            });
            continue;
        }
        match (field.set)(&mut scenario, value) {
            Ok(()) => saw_mode |= field.section.is_empty() && field.key == "mode",
            Err(msg) => issues.push(ParseIssue {
                line: line_no,
                message: format!("{key}: {msg}"),
            }),
        }
    }
    if !saw_mode && issues.is_empty() {
        issues.push(ParseIssue {
            line: 0,
            message: "missing required key 'mode'".to_string(),
        });
    }
    if !issues.is_empty() {
        return Err(ScenarioError::Parse(issues));
    }
    let problems = validate(&scenario);
    if problems.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Validation(problems))
    }
}

/// Write every field so that [`parse_scenario`] reproduces the scenario.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let mut current = "";
    for f in fields() {
        let Some(value) = (f.get)(s) else { continue };
        if f.section != current {
            let _ = write!(out, "\n[{}]\n", f.section);
            current = f.section;
        }
        let _ = writeln!(out, "{} = {}", f.key, value);
    }
    out
}

fn is_finite_all(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// Every violated invariant, phrased as a rule.
pub fn validate(s: &Scenario) -> Vec<String> {
    let mut p = Vec::new();
    let mut check = |ok: bool, msg: &str| {
        if !ok {
            p.push(msg.to_string());
        }
    };

    check(
        !s.name.is_empty()
            && s.name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')),
        "name must be non-empty and use only [A-Za-z0-9_.-]",
    );
    check(s.duration.is_finite() && s.duration > 0.0, "duration must be positive");

    let a = &s.aero;
    check(a.glide_ratio.is_finite() && a.glide_ratio > 0.0, "E must be positive");
    check(a.steer_gain.is_finite() && a.steer_gain > 0.0, "g must be positive");
    check(a.mass_term.is_finite(), "M must be finite");
    check(a.line_length.is_finite() && a.line_length > 0.0, "L must be positive");

    let w = &s.wind;
    check(w.v0_mean.is_finite() && w.v0_mean >= 0.0, "v0 must be non-negative");
    check(w.gust_amplitude.is_finite(), "gust_amplitude must be finite");
    check(
        w.gust_period.is_finite() && w.gust_period > 0.0,
        "gust_period must be positive",
    );
    check(
        w.turbulence_sigma.is_finite() && w.turbulence_sigma >= 0.0,
        "turbulence_sigma must be non-negative",
    );
    check(
        w.turbulence_tau.is_finite() && w.turbulence_tau > 0.0,
        "turbulence_tau must be positive",
    );

    check(
        s.actuator.rate_limit.is_finite() && s.actuator.rate_limit > 0.0,
        "actuator rate_limit must be positive",
    );

    let sn = &s.sensor;
    check(
        is_finite_all(&[sn.sigma_psi, sn.sigma_psi_dot, sn.sigma_v_a, sn.sigma_phi])
            && sn.sigma_psi >= 0.0
            && sn.sigma_psi_dot >= 0.0
            && sn.sigma_v_a >= 0.0
            && sn.sigma_phi >= 0.0,
        "sensor noise sigmas must be non-negative",
    );
    check(
        sn.sample_rate.is_finite() && sn.sample_rate > 0.0,
        "sample_rate must be positive",
    );

    let c = &s.controller;
    check(c.sample_dt.is_finite() && c.sample_dt > 0.0, "sample_dt must be positive");
    check(
        (sn.sample_rate * c.sample_dt - 1.0).abs() < 1e-9,
        "sample_rate must equal the controller rate 1/sample_dt",
    );

    let pl = &s.plant;
    check(pl.dt_inner.is_finite() && pl.dt_inner > 0.0, "dt_inner must be positive");
    if pl.dt_inner > 0.0 && c.sample_dt > 0.0 {
        let ratio = c.sample_dt / pl.dt_inner;
        check(
            ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() < 1e-9,
            "dt_inner must divide sample_dt",
        );
    }
    check(
        pl.theta_min.is_finite() && pl.theta_min > 0.0 && pl.theta_min < FRAC_PI_2,
        "theta_min must lie in (0, pi/2)",
    );
    check(pl.v_a_min.is_finite() && pl.v_a_min > 0.0, "plant v_a_min must be positive");
    check(
        pl.crash_elevation_deg.is_finite() && pl.crash_elevation_deg > -90.0 && pl.crash_elevation_deg < 90.0,
        "crash_elevation_deg must lie in (-90, 90)",
    );

    check(c.g_hat.is_finite() && c.g_hat > 0.0, "g_hat must be positive");
    check(c.m_hat.is_finite(), "M_hat must be finite");
    check(
        c.delta_ff_limit.is_finite()
            && c.delta_total_limit.is_finite()
            && c.delta_ff_limit > 0.0
            && c.delta_ff_limit < c.delta_total_limit
            && c.delta_total_limit <= 1.0,
        "deflection limits must satisfy 0 < delta_ff_limit < delta_total_limit <= 1",
    );
    check(
        c.rate_limit.is_finite() && c.rate_limit > 0.0,
        "controller rate_limit must be positive",
    );
    check(
        is_finite_all(&[c.outer_p, c.inner_kp, c.inner_ki, c.outer_lowpass_tau, c.inner_lowpass_tau])
            && c.outer_p >= 0.0
            && c.inner_kp >= 0.0
            && c.inner_ki >= 0.0
            && c.outer_lowpass_tau >= 0.0
            && c.inner_lowpass_tau >= 0.0,
        "controller gains and time constants must be non-negative",
    );
    check(
        c.outer_rate_limit.is_finite() && c.outer_rate_limit > 0.0,
        "outer_rate_limit must be positive",
    );
    check(
        c.psi_c_limit.is_finite() && c.psi_c_limit > 0.0 && c.psi_c_limit <= FRAC_PI_2,
        "psi_c_limit must lie in (0, pi/2]",
    );
    check(c.v_a_min.is_finite() && c.v_a_min > 0.0, "controller v_a_min must be positive");

    let pt = &s.pattern;
    check(pt.phi_0.is_finite(), "phi_0 must be finite");
    check(pt.phi_a.is_finite() && pt.phi_a > 0.0, "phi_a must be positive");
    check(
        pt.psi_0.is_finite() && pt.psi_0 > 0.0 && pt.psi_0 < FRAC_PI_2,
        "psi_0 must lie in (0, pi/2)",
    );

    let bb = &s.bangbang;
    check(
        bb.delta_0.is_finite() && bb.delta_0 > 0.0 && bb.delta_0 <= 1.0,
        "delta_0 must lie in (0, 1]",
    );
    check(
        bb.psi_threshold.is_finite() && bb.psi_threshold > 0.0,
        "psi_threshold must be positive",
    );

    let n = &s.neutral;
    check(
        is_finite_all(&[n.phi_set, n.kp, n.ki, n.kd, n.derivative_tau])
            && n.kp >= 0.0
            && n.ki >= 0.0
            && n.kd >= 0.0
            && n.derivative_tau >= 0.0,
        "neutral PID gains and derivative_tau must be non-negative",
    );
    check(
        n.psi_limit.is_finite() && n.psi_limit > 0.0 && n.psi_limit <= FRAC_PI_2,
        "neutral psi_limit must lie in (0, pi/2]",
    );

    let st = &s.step;
    check(
        st.amplitude.is_finite() && st.amplitude.abs() < FRAC_PI_2,
        "step amplitude must be smaller than pi/2 in magnitude",
    );
    check(st.period.is_finite() && st.period >= 0.0, "step period must be non-negative");
    check(st.start.is_finite() && st.start >= 0.0, "step start must be non-negative");

    let i = &s.initial;
    check(i.phi.is_finite() && i.psi.is_finite(), "initial angles must be finite");
    if let Some(theta) = i.theta {
        check(
            theta.is_finite() && theta > pl.theta_min && theta < std::f64::consts::PI,
            "initial theta must lie in (theta_min, pi)",
        );
    }

    let sy = &s.sysid;
    check(
        sy.lambda.is_finite() && sy.lambda > 0.9 && sy.lambda <= 1.0,
        "lambda must lie in (0.9, 1]",
    );
    check(sy.p0.is_finite() && sy.p0 > 0.0, "p0 must be positive");
    check(sy.g0.is_finite() && sy.m0.is_finite(), "g0 and M0 must be finite");
    if s.mode == Mode::SysidReplay {
        check(
            sy.replay_log.as_deref().is_some_and(|p| !p.is_empty()),
            "replay_log is required in sysid-replay mode",
        );
    }
    p
}
