//! Cascaded model-following controller for the kite orientation `psi`.
//!
//! ```text
//!  psi_s ─► [FF_psi] ─┬─ psi_dot_ff ──────────────┐
//!                     └─ psi_c ─►(-)◄─ psi_m       ▼
//!                               psi_e ─► [C_psi] ─►(+)─ psi_dot_s ─► [FF_psidot] ─┬─ delta_ff ──┐
//!                                                                                 └─ psi_dot_c ─►(-)◄─ psi_dot_m
//!                                                             psi_dot_e ─► [C_psidot] ─ delta_fbk ─►(+)─► delta
//! ```
//!
//! Both feedforward blocks contain a model of the steering pod (limiter and
//! rate limiter) and a `z^-n` delay before the reference they hand to the
//! feedback path. The feedforward owns `delta_ff_limit` of the deflection
//! range, feedback gets the rest.

use std::collections::VecDeque;

/// Tuning of the cascade. All gains are exposed; the defaults are hand-tuned
/// for the design model at 10 Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// Model turn-rate gain `g` in rad/m.
    pub g_hat: f64,
    /// Model mass-term constant in m/s²; zero disables the `T1` feedforward.
    pub m_hat: f64,
    pub delta_ff_limit: f64,
    pub delta_total_limit: f64,
    /// Pod steering speed assumed by the internal models, 1/s.
    pub rate_limit: f64,
    pub delay_n: usize,
    pub outer_p: f64,
    pub outer_lowpass_tau: f64,
    /// Limit on the outer feedback rate, rad/s.
    pub outer_rate_limit: f64,
    pub inner_kp: f64,
    pub inner_ki: f64,
    pub inner_lowpass_tau: f64,
    pub psi_c_limit: f64,
    pub sample_dt: f64,
    /// Floor on the air path speed used for the gain, m/s.
    pub v_a_min: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            g_hat: 0.04,
            m_hat: 0.0,
            delta_ff_limit: 0.6,
            delta_total_limit: 1.0,
            rate_limit: 0.4,
            delay_n: 3,
            outer_p: 0.8,
            outer_lowpass_tau: 0.2,
            outer_rate_limit: 0.5,
            inner_kp: 0.3,
            inner_ki: 0.5,
            inner_lowpass_tau: 0.2,
            psi_c_limit: 1.4,
            sample_dt: 0.1,
            v_a_min: 0.5,
        }
    }
}

impl ControllerConfig {
    pub fn feedback_limit(&self) -> f64 {
        self.delta_total_limit - self.delta_ff_limit
    }

    /// Current deflection-to-rate gain `K = g v_a`, floored at `g v_a_min`.
    pub fn gain(&self, v_a: f64) -> f64 {
        self.g_hat * v_a.max(self.v_a_min)
    }

    /// Gravity correction in deflection units: `M / K * G / v_a`.
    pub fn mass_correction(&self, gain: f64, gravity_proj: f64, v_a: f64) -> f64 {
        if self.m_hat == 0.0 {
            return 0.0;
        }
        self.m_hat / gain * gravity_proj / v_a.max(self.v_a_min)
    }
}

/// `sign(x) sqrt(2 rate_limit |x|)`.
pub fn shaping_f(x: f64, rate_limit: f64) -> f64 {
    x.signum() * (2.0 * rate_limit * x.abs()).sqrt()
}

/// Sampled counterpart of `shaping_f(gain * error) / gain`: the largest
/// deflection that, applied for one sample and then stepped down by
/// `rate_limit * dt` per sample, stops the model exactly at the setpoint.
/// Small errors give the one-sample deflection `error / (gain * dt)`. Tends to
/// the continuous curve as `dt` goes to zero.
pub fn braking_deflection(error: f64, gain: f64, rate_limit: f64, dt: f64) -> f64 {
    let s = rate_limit * dt;
    let reach = error.abs() / (gain * dt);
    let m = (0.25 + 2.0 * reach / s).sqrt() - 0.5;
    // samples after this one that still carry deflection
    let k = (m.ceil() - 1.0).max(0.0);
    error.signum() * (reach + 0.5 * s * k * (k + 1.0)) / (k + 1.0)
}

fn rate_limit(prev: f64, target: f64, max_step: f64) -> f64 {
    prev + (target - prev).clamp(-max_step, max_step)
}

/// First-order lowpass discretised with the exact step response.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lowpass {
    y: f64,
}

impl Lowpass {
    pub fn step(&mut self, u: f64, tau: f64, dt: f64) -> f64 {
        if tau <= 0.0 {
            self.y = u;
        } else {
            let alpha = 1.0 - (-dt / tau).exp();
            self.y += alpha * (u - self.y);
        }
        self.y
    }

    pub fn value(&self) -> f64 {
        self.y
    }
}

/// `z^-n` sample delay.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    buf: VecDeque<f64>,
    n: usize,
}

impl DelayLine {
    pub fn new(n: usize, fill: f64) -> Self {
        Self {
            buf: std::iter::repeat_n(fill, n).collect(),
            n,
        }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if self.n == 0 {
            return x;
        }
        self.buf.push_back(x);
        self.buf.pop_front().unwrap_or(x)
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Shapes the setpoint into a flyable reference with an internal loop around
/// a model of kite and pod.
#[derive(Debug, Clone, PartialEq)]
pub struct FfPsi {
    pub psi_model: f64,
    pub delta_model: f64,
    delay: DelayLine,
}

impl FfPsi {
    pub fn new(psi0: f64, delay_n: usize) -> Self {
        Self {
            psi_model: psi0,
            delta_model: 0.0,
            delay: DelayLine::new(delay_n, psi0),
        }
    }

    /// Returns `(psi_dot_ff, psi_c)`.
    ///
    /// The internal deflection target is the largest deflection from which
    /// the pod can still return to zero at `rate_limit` without the model
    /// passing `psi_s`.
    pub fn step(&mut self, psi_s: f64, gain: f64, cfg: &ControllerConfig) -> (f64, f64) {
        let dt = cfg.sample_dt;
        let max_step = cfg.rate_limit * dt;
        let error = psi_s - self.psi_model;
        let target = braking_deflection(error, gain, cfg.rate_limit, dt)
            .clamp(-cfg.delta_ff_limit, cfg.delta_ff_limit);
        self.delta_model = rate_limit(self.delta_model, target, max_step);
        let psi_dot_ff = gain * self.delta_model;
        self.psi_model += dt * psi_dot_ff;
        let psi_c = self.delay.push(self.psi_model);
        (psi_dot_ff, psi_c)
    }
}

/// Outer proportional feedback on the orientation error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CPsi {
    lowpass: Lowpass,
}

impl CPsi {
    pub fn step(&mut self, psi_e: f64, cfg: &ControllerConfig) -> f64 {
        let y = self
            .lowpass
            .step(-cfg.outer_p * psi_e, cfg.outer_lowpass_tau, cfg.sample_dt);
        y.clamp(-cfg.outer_rate_limit, cfg.outer_rate_limit)
    }
}

/// Inverts the turn-rate law (with mass term) through a pod model.
#[derive(Debug, Clone, PartialEq)]
pub struct FfPsiDot {
    pub delta: f64,
    delay: DelayLine,
}

impl FfPsiDot {
    pub fn new(delay_n: usize) -> Self {
        Self {
            delta: 0.0,
            delay: DelayLine::new(delay_n, 0.0),
        }
    }

    /// Returns `(delta_ff, psi_dot_c)`.
    pub fn step(&mut self, psi_dot_s: f64, gain: f64, t1: f64, cfg: &ControllerConfig) -> (f64, f64) {
        let target = (psi_dot_s / gain - t1).clamp(-cfg.delta_ff_limit, cfg.delta_ff_limit);
        self.delta = rate_limit(self.delta, target, cfg.rate_limit * cfg.sample_dt);
        let psi_dot_c = gain * self.delay.push(self.delta + t1);
        (self.delta, psi_dot_c)
    }
}

/// PI on the yaw-rate error, scaled to deflection by `1/K`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CPsiDot {
    lowpass: Lowpass,
    pub integrator: f64,
}

impl CPsiDot {
    pub fn step(&mut self, psi_dot_e: f64, gain: f64, cfg: &ControllerConfig) -> f64 {
        let limit = cfg.feedback_limit();
        let e = self
            .lowpass
            .step(-psi_dot_e, cfg.inner_lowpass_tau, cfg.sample_dt);
        // anti-windup: integrator never holds more than the feedback authority
        let i_max = limit * gain;
        self.integrator = (self.integrator + cfg.inner_ki * e * cfg.sample_dt).clamp(-i_max, i_max);
        ((cfg.inner_kp * e + self.integrator) / gain).clamp(-limit, limit)
    }
}

/// Per-step telemetry of every signal in the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    pub delta_cmd: f64,
    pub delta_ff: f64,
    pub delta_fbk: f64,
    pub psi_s: f64,
    pub psi_c: f64,
    pub psi_dot_ff: f64,
    pub psi_dot_fbk: f64,
    pub psi_dot_s: f64,
    pub psi_dot_c: f64,
    pub gain: f64,
    pub t1: f64,
}

/// Inputs the controller needs from the sensors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub psi_m: f64,
    pub psi_dot_m: f64,
    pub v_a: f64,
    pub gravity_proj: f64,
}

impl From<&crate::plant::Measurements> for ControlInput {
    fn from(m: &crate::plant::Measurements) -> Self {
        Self {
            psi_m: m.psi_m,
            psi_dot_m: m.psi_dot_m,
            v_a: m.v_a,
            gravity_proj: m.gravity_proj,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub cfg: ControllerConfig,
    ff_psi: Option<FfPsi>,
    c_psi: CPsi,
    ff_psidot: FfPsiDot,
    c_psidot: CPsiDot,
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Self {
        Self {
            cfg,
            ff_psi: None,
            c_psi: CPsi::default(),
            ff_psidot: FfPsiDot::new(cfg.delay_n),
            c_psidot: CPsiDot::default(),
        }
    }

    pub fn integrator(&self) -> f64 {
        self.c_psidot.integrator
    }

    /// One 10 Hz tick. The orientation model is initialised from the first
    /// measurement.
    pub fn step(&mut self, psi_s: f64, m: ControlInput) -> ControlOutput {
        let cfg = self.cfg;
        let gain = cfg.gain(m.v_a);
        let t1 = cfg.mass_correction(gain, m.gravity_proj, m.v_a);
        let psi_s = psi_s.clamp(-cfg.psi_c_limit, cfg.psi_c_limit);

        let ff_psi = self
            .ff_psi
            .get_or_insert_with(|| FfPsi::new(m.psi_m, cfg.delay_n));
        let (psi_dot_ff, psi_c) = ff_psi.step(psi_s, gain, &cfg);
        let psi_e = m.psi_m - psi_c;
        let psi_dot_fbk = self.c_psi.step(psi_e, &cfg);
        let psi_dot_s = psi_dot_ff + psi_dot_fbk;
        let (delta_ff, psi_dot_c) = self.ff_psidot.step(psi_dot_s, gain, t1, &cfg);
        let psi_dot_e = m.psi_dot_m - psi_dot_c;
        let delta_fbk = self.c_psidot.step(psi_dot_e, gain, &cfg);
        let delta_cmd = (delta_ff + delta_fbk).clamp(-cfg.delta_total_limit, cfg.delta_total_limit);

        ControlOutput {
            delta_cmd,
            delta_ff,
            delta_fbk,
            psi_s,
            psi_c,
            psi_dot_ff,
            psi_dot_fbk,
            psi_dot_s,
            psi_dot_c,
            gain,
            t1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shaping_examples() {
        assert_eq!(shaping_f(0.0, 0.4), 0.0);
        assert_abs_diff_eq!(shaping_f(0.2, 0.4), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(shaping_f(-0.05, 0.4), -0.2, epsilon = 1e-15);
    }

    #[test]
    fn braking_curve_approaches_continuous_shaping() {
        let (k, e) = (0.8, 0.7);
        let continuous = shaping_f(k * e, 0.4) / k;
        let coarse = braking_deflection(e, k, 0.4, 0.1);
        let fine = braking_deflection(e, k, 0.4, 1e-6);
        assert!(coarse < continuous);
        assert_abs_diff_eq!(fine, continuous, epsilon = 1e-6);
        assert_abs_diff_eq!(braking_deflection(-0.8 * 0.1 * 0.04, 0.8, 0.4, 0.1), -0.04, epsilon = 1e-15);
    }

    #[test]
    fn ff_psi_holds_when_setpoint_reached() {
        let cfg = ControllerConfig::default();
        let mut ff = FfPsi::new(0.3, cfg.delay_n);
        for _ in 0..20 {
            let (rate, psi_c) = ff.step(0.3, 0.8, &cfg);
            assert_eq!(rate, 0.0);
            assert_eq!(psi_c, 0.3);
        }
    }

    #[test]
    fn c_psi_examples() {
        let cfg = ControllerConfig::default();
        let mut c = CPsi::default();
        assert_eq!(c.step(0.0, &cfg), 0.0);
        let mut out = 0.0;
        for _ in 0..200 {
            out = c.step(0.1, &cfg);
        }
        assert_abs_diff_eq!(out, -0.08, epsilon = 1e-12);
        let mut c = CPsi::default();
        for _ in 0..200 {
            out = c.step(-2.0, &cfg);
        }
        assert_eq!(out, 0.5);
    }

    #[test]
    fn ff_psidot_examples() {
        let cfg = ControllerConfig {
            delay_n: 0,
            ..ControllerConfig::default()
        };
        let mut ff = FfPsiDot::new(0);
        assert_eq!(ff.step(0.0, 0.8, 0.0, &cfg), (0.0, 0.0));

        let mut ff = FfPsiDot::new(0);
        let mut out = (0.0, 0.0);
        for _ in 0..50 {
            out = ff.step(0.4, 0.04 * 20.0, 0.0, &cfg);
        }
        assert_abs_diff_eq!(out.0, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.1, 0.4, epsilon = 1e-12);

        let mut ff = FfPsiDot::new(0);
        for _ in 0..50 {
            out = ff.step(0.4, 0.8, 0.1, &cfg);
        }
        assert_abs_diff_eq!(out.0, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(out.1, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn ff_psidot_is_rate_and_range_limited() {
        let cfg = ControllerConfig::default();
        let mut ff = FfPsiDot::new(cfg.delay_n);
        let (d, _) = ff.step(10.0, 0.8, 0.0, &cfg);
        assert_abs_diff_eq!(d, 0.04, epsilon = 1e-15);
        for _ in 0..100 {
            let (d, _) = ff.step(10.0, 0.8, 0.0, &cfg);
            assert!(d <= 0.6);
        }
        assert_eq!(ff.delta, 0.6);
    }

    #[test]
    fn c_psidot_examples() {
        let cfg = ControllerConfig {
            inner_ki: 0.0,
            ..ControllerConfig::default()
        };
        let mut c = CPsiDot::default();
        assert_eq!(c.step(0.0, 0.8, &cfg), 0.0);
        let mut out = 0.0;
        for _ in 0..200 {
            out = c.step(0.1, 0.8, &cfg);
        }
        assert_abs_diff_eq!(out, -0.0375, epsilon = 1e-12);
    }

    #[test]
    fn c_psidot_integrator_saturates_at_feedback_authority() {
        let cfg = ControllerConfig::default();
        let mut c = CPsiDot::default();
        let mut prev = 0.0;
        let mut out = 0.0;
        for _ in 0..2000 {
            out = c.step(-0.1, 0.8, &cfg);
            assert!(out >= prev - 1e-15);
            assert!(out <= 0.4 + 1e-15);
            prev = out;
        }
        assert_abs_diff_eq!(out, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(c.integrator, 0.4 * 0.8, epsilon = 1e-12);
    }

    #[test]
    fn zero_error_fixed_point() {
        let mut ctl = Controller::new(ControllerConfig::default());
        let input = ControlInput {
            psi_m: 0.2,
            psi_dot_m: 0.0,
            v_a: 20.0,
            gravity_proj: 0.0,
        };
        for _ in 0..50 {
            let out = ctl.step(0.2, input);
            assert_eq!(out.delta_cmd, 0.0);
            assert_eq!(out.psi_c, 0.2);
        }
    }

    #[test]
    fn delay_line_semantics() {
        let mut d = DelayLine::new(2, 0.0);
        assert_eq!(d.push(1.0), 0.0);
        assert_eq!(d.push(2.0), 0.0);
        assert_eq!(d.push(3.0), 1.0);
        assert_eq!(d.len(), 2);
        let mut d = DelayLine::new(0, 0.0);
        assert_eq!(d.push(5.0), 5.0);
    }
}
