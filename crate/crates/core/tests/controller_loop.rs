use kitepilot::controller::{ControlInput, Controller, ControllerConfig, FfPsi, FfPsiDot};
use kitepilot::harness::run_scenario;
use kitepilot::kinematics::Angles;
use kitepilot::plant::{AeroParams, ActuatorParams, Plant, PlantLimits, Sensor, SensorModel, Wind, WindModel};
use kitepilot::scenario::{Mode, Scenario};
use proptest::prelude::*;

/// Time-optimal orientation profile under a deflection limit and a pod rate
/// limit: ramp up, coast, ramp down. Returns `psi(t)` for a step of `size`.
fn trapezoid(size: f64, k: f64, rate: f64, limit: f64) -> impl Fn(f64) -> f64 {
    let ramp = limit / rate;
    let ramp_dist = 0.5 * k * limit * ramp;
    let (peak, t_ramp, coast) = if 2.0 * ramp_dist >= size {
        let t = (size / (k * rate)).sqrt();
        (rate * t, t, 0.0)
    } else {
        (limit, ramp, (size - 2.0 * ramp_dist) / (k * limit))
    };
    move |t: f64| {
        let d_up = 0.5 * k * rate * t_ramp * t_ramp;
        if t <= 0.0 {
            0.0
        } else if t < t_ramp {
            0.5 * k * rate * t * t
        } else if t < t_ramp + coast {
            d_up + k * peak * (t - t_ramp)
        } else if t < 2.0 * t_ramp + coast {
            let r = 2.0 * t_ramp + coast - t;
            size - 0.5 * k * rate * r * r
        } else {
            size
        }
    }
}

#[test]
fn trapezoid_oracle_matches_hand_values() {
    let f = trapezoid(1.0, 0.8, 0.4, 0.6);
    assert!((f(1.5) - 0.36).abs() < 1e-12);
    assert!((f(1.5 + 0.28 / 0.48) - 0.64).abs() < 1e-12);
    assert_eq!(f(3.0 + 0.28 / 0.48), 1.0);
}

#[test]
fn unit_step_follows_trapezoid() {
    let cfg = ControllerConfig::default();
    let oracle = trapezoid(1.0, 0.8, cfg.rate_limit, cfg.delta_ff_limit);
    let mut ff = FfPsi::new(0.0, cfg.delay_n);
    let delay = cfg.delay_n as f64 * cfg.sample_dt;
    let mut worst = 0.0f64;
    let mut last = 0.0;
    for k in 1..=100 {
        let (_, psi_c) = ff.step(1.0, 0.8, &cfg);
        let t = k as f64 * cfg.sample_dt - delay;
        worst = worst.max((psi_c - oracle(t)).abs());
        assert!(psi_c <= 1.0 + 1e-12);
        last = psi_c;
    }
    assert!((last - 1.0).abs() <= 0.02);
    assert!(worst < 0.05, "deviation from time-optimal profile {worst}");
}

#[test]
fn square_wave_corners_are_smoothed() {
    let s = Scenario::for_mode(Mode::Step);
    let (rows, _) = run_scenario(&s).unwrap();
    let jump = rows.windows(2).map(|w| (w[1].psi_c - w[0].psi_c).abs()).fold(0.0, f64::max);
    let setpoint_jump = rows.windows(2).map(|w| (w[1].psi_s - w[0].psi_s).abs()).fold(0.0, f64::max);
    assert_eq!(setpoint_jump, 2.0 * s.step.amplitude);
    assert!(jump < 0.1 * setpoint_jump);
}

#[test]
fn mismatched_gain_still_tracks_step() {
    for factor in [1.25, 0.8] {
        let mut s = Scenario::for_mode(Mode::Step);
        s.controller.g_hat = s.aero.steer_gain * factor;
        s.duration = 20.0;
        s.step.period = 0.0;
        let (rows, summary) = run_scenario(&s).unwrap();
        assert_eq!(summary.outcome, kitepilot::Outcome::Completed);
        let tail = &rows[rows.len() - 20..];
        for r in tail {
            assert!((r.psi_m - r.psi_s).abs() < 0.05 * s.step.amplitude, "factor {factor}: {}", r.psi_m);
        }
    }
}

#[test]
fn exact_model_keeps_integrator_at_zero() {
    let cfg = ControllerConfig::default();
    let aero = AeroParams::default();
    let mut plant = Plant::new(
        aero,
        PlantLimits::default(),
        ActuatorParams::default(),
        Angles::new(0.0, aero.glide_ratio.atan(), 0.0),
        Wind::new(WindModel::default(), 0),
    );
    let mut sensor = Sensor::new(SensorModel::default(), 0);
    let mut c = Controller::new(cfg);
    let mut worst_rate = 0.0f64;
    let mut worst_int = 0.0f64;
    for k in 0..400 {
        let rates = plant.rates().unwrap();
        let m = sensor.sense(&plant.state, &rates, plant.v0(), aero.glide_ratio);
        let psi_s = if k < 200 { 0.4 } else { -0.3 };
        let out = c.step(psi_s, ControlInput::from(&m));
        worst_rate = worst_rate.max((m.psi_dot_m - out.psi_dot_c).abs());
        worst_int = worst_int.max(c.integrator().abs());
        plant.advance(out.delta_cmd, cfg.sample_dt).unwrap();
    }
    assert!(worst_rate < 1e-9, "rate mismatch {worst_rate}");
    assert!(worst_int < 1e-3, "integrator {worst_int}");
}

#[test]
fn zero_fixed_point() {
    let mut c = Controller::new(ControllerConfig::default());
    for _ in 0..50 {
        let out = c.step(
            0.0,
            ControlInput {
                psi_m: 0.0,
                psi_dot_m: 0.0,
                v_a: 8.0,
                gravity_proj: 0.0,
            },
        );
        assert_eq!(out.delta_cmd, 0.0);
    }
}

proptest! {
    #[test]
    fn constant_gain_step_never_overshoots(
        gain in 0.05f64..2.0,
        psi_s in prop_oneof![-1.4f64..-0.01, 0.01f64..1.4],
        psi0 in -0.5f64..0.5,
    ) {
        let cfg = ControllerConfig::default();
        let mut ff = FfPsi::new(psi0, cfg.delay_n);
        let step = psi_s - psi0;
        prop_assume!(step.abs() > 0.01);
        for _ in 0..800 {
            let (_, psi_c) = ff.step(psi_s, gain, &cfg);
            prop_assert!((psi_c - psi0) / step <= 1.02);
        }
    }

    #[test]
    fn feedforward_inverts_the_gain(psi_dot_s in -0.4f64..0.4, gain in 0.8f64..4.0) {
        // ratio stays inside the 0.6 limit and the pod can reach it
        let cfg = ControllerConfig { delay_n: 0, ..ControllerConfig::default() };
        let mut ff = FfPsiDot::new(0);
        let mut out = (0.0, 0.0);
        for _ in 0..40 {
            out = ff.step(psi_dot_s, gain, 0.0, &cfg);
        }
        prop_assert!((out.0 - psi_dot_s / gain).abs() < 1e-12);
        prop_assert!((gain * out.0 - psi_dot_s).abs() < 1e-12);
        prop_assert!((out.1 - psi_dot_s).abs() < 1e-12);
    }

    #[test]
    fn authority_split_holds_for_any_input(
        seq in proptest::collection::vec((-1.5f64..1.5, -2.0f64..2.0, -3.0f64..3.0, 0.0f64..30.0, -1.0f64..1.0), 1..200),
    ) {
        let cfg = ControllerConfig { m_hat: 2.0, ..ControllerConfig::default() };
        let mut c = Controller::new(cfg);
        for (psi_s, psi_m, psi_dot_m, v_a, g) in seq {
            let out = c.step(psi_s, ControlInput { psi_m, psi_dot_m, v_a, gravity_proj: g });
            prop_assert!(out.delta_ff.abs() <= cfg.delta_ff_limit + 1e-12);
            prop_assert!(out.delta_fbk.abs() <= cfg.feedback_limit() + 1e-12);
            prop_assert!(out.delta_cmd.abs() <= cfg.delta_total_limit);
            prop_assert!(out.delta_cmd.is_finite());
        }
    }
}
