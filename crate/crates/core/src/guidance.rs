//! Setpoint generation: figure-eight pattern, bang-bang identification and
//! neutral-flight azimuth hold.

use crate::controller::Lowpass;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternConfig {
    /// Pattern centre azimuth.
    pub phi_0: f64,
    /// Half-width of the trigger band.
    pub phi_a: f64,
    /// Commanded orientation magnitude.
    pub psi_0: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            phi_0: 0.0,
            phi_a: 0.5,
            psi_0: 1.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BangBangConfig {
    pub delta_0: f64,
    pub psi_threshold: f64,
}

impl Default for BangBangConfig {
    fn default() -> Self {
        Self {
            delta_0: 0.3,
            psi_threshold: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeutralConfig {
    pub phi_set: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub derivative_tau: f64,
    pub psi_limit: f64,
}

impl Default for NeutralConfig {
    fn default() -> Self {
        Self {
            phi_set: 0.0,
            kp: 4.0,
            ki: 0.01,
            kd: 0.8,
            derivative_tau: 0.3,
            psi_limit: 1.4,
        }
    }
}

/// Which half of the figure eight is being flown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternState {
    /// `psi_s = +psi_0`, flying towards smaller `phi`.
    One,
    /// `psi_s = -psi_0`, flying towards larger `phi`.
    Two,
}

/// Two-state figure-eight generator with hysteresis on `phi_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternGenerator {
    pub state: PatternState,
}

impl Default for PatternGenerator {
    fn default() -> Self {
        Self {
            state: PatternState::One,
        }
    }
}

impl PatternGenerator {
    pub fn step(&mut self, phi_m: f64, cfg: &PatternConfig) -> f64 {
        self.state = match self.state {
            PatternState::One if phi_m < cfg.phi_0 - cfg.phi_a => PatternState::Two,
            PatternState::Two if phi_m > cfg.phi_0 + cfg.phi_a => PatternState::One,
            s => s,
        };
        match self.state {
            PatternState::One => cfg.psi_0,
            PatternState::Two => -cfg.psi_0,
        }
    }
}

/// Alternating `±delta_0` toggled when `psi_m` reaches `±psi_threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BangBang {
    pub positive: bool,
}

impl Default for BangBang {
    fn default() -> Self {
        Self { positive: true }
    }
}

impl BangBang {
    pub fn step(&mut self, psi_m: f64, cfg: &BangBangConfig) -> f64 {
        if self.positive && psi_m >= cfg.psi_threshold {
            self.positive = false;
        } else if !self.positive && psi_m <= -cfg.psi_threshold {
            self.positive = true;
        }
        if self.positive {
            cfg.delta_0
        } else {
            -cfg.delta_0
        }
    }
}

/// PID from the azimuth error to `psi_s`, derivative on the filtered
/// measurement.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeutralHold {
    integral: f64,
    prev_phi: Option<f64>,
    derivative: Lowpass,
}

impl NeutralHold {
    pub fn step(&mut self, phi_m: f64, cfg: &NeutralConfig, dt: f64) -> f64 {
        let error = phi_m - cfg.phi_set;
        let rate = self.prev_phi.map_or(0.0, |p| (phi_m - p) / dt);
        self.prev_phi = Some(phi_m);
        let d = self.derivative.step(rate, cfg.derivative_tau, dt);
        let unclamped = cfg.kp * error + self.integral + cfg.ki * error * dt + cfg.kd * d;
        // conditional integration keeps the integral out of saturation
        if unclamped.abs() < cfg.psi_limit || unclamped.signum() != error.signum() {
            self.integral += cfg.ki * error * dt;
        }
        (cfg.kp * error + self.integral + cfg.kd * d).clamp(-cfg.psi_limit, cfg.psi_limit)
    }
}

/// Active guidance law and its memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuidanceState {
    Pattern(PatternGenerator),
    BangBang(BangBang),
    Neutral(NeutralHold),
    Step,
}

impl GuidanceState {
    /// Short label written to telemetry.
    pub fn label(&self) -> &'static str {
        match self {
            GuidanceState::Pattern(p) => match p.state {
                PatternState::One => "pattern1",
                PatternState::Two => "pattern2",
            },
            GuidanceState::BangBang(b) => {
                if b.positive {
                    "bang+"
                } else {
                    "bang-"
                }
            }
            GuidanceState::Neutral(_) => "neutral",
            GuidanceState::Step => "step",
        }
    }
}

/// Square-wave orientation setpoint for step-response runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub amplitude: f64,
    /// Full period of the square wave; zero means a single step.
    pub period: f64,
    pub start: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            period: 20.0,
            start: 2.0,
        }
    }
}

impl StepConfig {
    pub fn setpoint(&self, t: f64) -> f64 {
        if t < self.start {
            return 0.0;
        }
        if self.period <= 0.0 {
            return self.amplitude;
        }
        let phase = ((t - self.start) / self.period).fract();
        if phase < 0.5 {
            self.amplitude
        } else {
            -self.amplitude
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_trigger_p1() {
        let cfg = PatternConfig {
            phi_0: 0.0,
            phi_a: 0.3,
            psi_0: 1.0,
        };
        let mut g = PatternGenerator::default();
        assert_eq!(g.step(0.0, &cfg), 1.0);
        assert_eq!(g.state, PatternState::One);
        assert_eq!(g.step(-0.31, &cfg), -1.0);
        assert_eq!(g.state, PatternState::Two);
    }

    #[test]
    fn pattern_has_hysteresis() {
        let cfg = PatternConfig::default();
        let mut g = PatternGenerator::default();
        g.step(-0.51, &cfg);
        assert_eq!(g.state, PatternState::Two);
        for phi in [-0.5, -0.2, 0.0, 0.2, 0.5] {
            assert_eq!(g.step(phi, &cfg), -cfg.psi_0);
        }
        assert_eq!(g.step(0.51, &cfg), cfg.psi_0);
    }

    #[test]
    fn bangbang_flips_at_threshold() {
        let cfg = BangBangConfig {
            delta_0: 0.3,
            psi_threshold: 0.8,
        };
        let mut b = BangBang::default();
        assert_eq!(b.step(0.0, &cfg), 0.3);
        assert_eq!(b.step(0.8, &cfg), -0.3);
        assert_eq!(b.step(0.0, &cfg), -0.3);
        assert_eq!(b.step(-0.8, &cfg), 0.3);
    }

    #[test]
    fn neutral_zero_at_setpoint() {
        let mut n = NeutralHold::default();
        let cfg = NeutralConfig {
            phi_set: 0.25,
            ..NeutralConfig::default()
        };
        for _ in 0..10 {
            assert_eq!(n.step(0.25, &cfg, 0.1), 0.0);
        }
    }

    #[test]
    fn neutral_sign_drives_phi_back() {
        let mut n = NeutralHold::default();
        let cfg = NeutralConfig::default();
        assert!(n.step(0.2, &cfg, 0.1) > 0.0);
        let mut n = NeutralHold::default();
        assert!(n.step(-0.2, &cfg, 0.1) < 0.0);
    }

    #[test]
    fn neutral_output_clamped() {
        let mut n = NeutralHold::default();
        let cfg = NeutralConfig::default();
        for _ in 0..100 {
            let psi = n.step(5.0, &cfg, 0.1);
            assert!(psi.abs() <= cfg.psi_limit);
        }
    }

    #[test]
    fn step_setpoint_square_wave() {
        let s = StepConfig {
            amplitude: 0.5,
            period: 20.0,
            start: 2.0,
        };
        assert_eq!(s.setpoint(1.0), 0.0);
        assert_eq!(s.setpoint(3.0), 0.5);
        assert_eq!(s.setpoint(13.0), -0.5);
        assert_eq!(s.setpoint(23.0), 0.5);
        let single = StepConfig { period: 0.0, ..s };
        assert_eq!(single.setpoint(100.0), 0.5);
    }
}
