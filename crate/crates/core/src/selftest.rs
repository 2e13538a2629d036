//! Invariant suite run by `kitepilot selftest`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::harness::{orientation_hold, run_scenario, summarize, Outcome};
use crate::kinematics::{airflow_vector, airpath_speed, basis_vectors, velocity_components, Angles};
use crate::plant::{AeroParams, ActuatorParams, ActuatorState, Plant, PlantLimits, Wind, WindModel};
use crate::scenario::{Mode, Scenario};
use crate::sysid::{fit_law_batch, rls_track, FlightLogRow, RlsConfig, RlsInit};
use crate::telemetry::{log_to_string, read_log};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Random attitude inside the model's domain.
pub fn random_angles(rng: &mut impl Rng) -> Angles {
    Angles::new(
        rng.random_range(-1.5..1.5),
        rng.random_range(0.05..PI / 2.0),
        rng.random_range(-PI..PI),
    )
}

/// Worst violation of the two airflow conditions and of the airspeed
/// identity over `n` random states.
pub fn closure_errors(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flight = 0.0f64;
    let mut speed = 0.0f64;
    for _ in 0..n {
        let a = random_angles(&mut rng);
        let v0 = rng.random_range(2.0..20.0);
        let e = rng.random_range(2.0..10.0);
        let va = airflow_vector(v0, velocity_components(v0, e, a), a);
        let b = basis_vectors(a);
        let along_yaw = va.dot(&b.yaw);
        flight = flight
            .max((va.dot(&b.pitch) / v0).abs())
            .max((va.dot(&b.roll) / along_yaw - e).abs());
        speed = speed.max((-va.dot(&b.roll) - airpath_speed(v0, e, a.theta)).abs());
    }
    (flight, speed)
}

/// Largest angle difference between a 10 s open-loop trajectory at
/// `dt_inner` and at half of it.
pub fn step_halving_error(dt_inner: f64) -> f64 {
    let run = |dt: f64| {
        let limits = PlantLimits {
            dt_inner: dt,
            ..PlantLimits::default()
        };
        let mut plant = Plant::new(
            AeroParams::default(),
            limits,
            ActuatorParams::default(),
            Angles::new(0.2, 1.0, 0.5),
            Wind::new(WindModel::default(), 0),
        );
        plant.actuator = ActuatorState { delta: -0.1 };
        let mut out = Vec::new();
        for _ in 0..100 {
            plant.advance(-0.1, 0.1).expect("trajectory stays regular");
            out.push(plant.state.angles);
        }
        out
    };
    let coarse = run(dt_inner);
    let fine = run(dt_inner / 2.0);
    coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| {
            (a.phi - b.phi)
                .abs()
                .max((a.theta - b.theta).abs())
                .max((a.psi - b.psi).abs())
        })
        .fold(0.0, f64::max)
}

pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();

    let (flight, speed) = closure_errors(1000, 7);
    out.push(check(
        "airflow conditions at 1000 random states",
        flight < 1e-10 && speed < 1e-12,
        format!("flight conditions {flight:.2e}, airspeed identity {speed:.2e}"),
    ));

    let p = AeroParams::default();
    let limits = PlantLimits::default();
    let mut worst = 0.0f64;
    for psi in [0.0, 0.3, -0.3, 0.6, -0.6, 1.0, -1.0] {
        let start = Angles::new(0.0, p.glide_ratio.atan(), psi);
        let theta = orientation_hold(&p, &limits, 8.0, start, 600.0, 0.01)
            .ok()
            .and_then(|s| s.last().map(|x| x.angles.theta))
            .unwrap_or(f64::NAN);
        let err = (theta - (p.glide_ratio * psi.cos()).atan()).abs();
        worst = if err.is_nan() { f64::NAN } else { worst.max(err) };
    }
    out.push(check(
        "theta settles at atan(E cos psi)",
        worst < 1e-3,
        format!("worst error {worst:.2e} rad"),
    ));

    let halving = step_halving_error(0.01);
    out.push(check(
        "RK4 step halving over 10 s",
        halving < 1e-8,
        format!("max difference {halving:.2e} rad"),
    ));

    let s = Scenario {
        duration: 30.0,
        ..Scenario::for_mode(Mode::Pattern)
    };
    let first = run_scenario(&s).ok();
    let second = run_scenario(&s).ok();
    match (first, second) {
        (Some((a, sa)), Some((b, _))) => {
            let text = log_to_string(&a);
            out.push(check(
                "identical seeds give identical CSV",
                text == log_to_string(&b),
                format!("{} rows", a.len()),
            ));
            let back = read_log(text.as_bytes()).unwrap_or_default();
            let re = summarize(&back, sa.outcome, sa.message.clone(), s.sensor.delay_steps);
            out.push(check(
                "summary recomputes from CSV",
                re == sa && sa.outcome == Outcome::Completed,
                format!("outcome {}", sa.outcome),
            ));
        }
        _ => out.push(check("pattern run", false, "harness error".to_string())),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<FlightLogRow> = (0..400)
        .map(|i| {
            let v_a = rng.random_range(5.0..40.0);
            let delta = rng.random_range(-0.5..0.5);
            let gravity_proj = rng.random_range(-1.0..1.0);
            FlightLogRow {
                t: i as f64 * 0.1,
                v_a,
                delta,
                psi_dot_m: 0.04 * v_a * delta + 2.0 * gravity_proj / v_a + rng.random_range(-0.02..0.02),
                gravity_proj,
            }
        })
        .collect();
    let cfg = RlsConfig {
        lambda: 1.0,
        init: RlsInit::Exact,
        ..RlsConfig::default()
    };
    let diff = match (fit_law_batch(&rows), rls_track(cfg, &rows).last()) {
        (Ok(ols), Some(rls)) => (ols[0] - rls.g()).abs().max((ols[1] - rls.m()).abs()),
        _ => f64::NAN,
    };
    out.push(check(
        "RLS without forgetting equals batch least squares",
        diff < 1e-8,
        format!("difference {diff:.2e}"),
    ));
    out
}
