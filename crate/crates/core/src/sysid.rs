//! Identification of the turn-rate law
//!
//! `psi_dot_m = g * (v_a * delta) + M * (G / v_a)`
//!
//! from flight logs: a batch fit of `g` alone through the origin, and
//! exponentially forgetting recursive least squares on `(g, M)`.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SysidError {
    #[error("need at least {needed} usable rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("regressor is degenerate (variance {variance:e})")]
    DegenerateRegressor { variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlightLogRow {
    pub t: f64,
    pub v_a: f64,
    pub delta: f64,
    pub psi_dot_m: f64,
    pub gravity_proj: f64,
}

impl FlightLogRow {
    pub fn gain_regressor(&self) -> f64 {
        self.v_a * self.delta
    }

    /// `[v_a delta, G / v_a]`.
    pub fn regressors(&self) -> [f64; 2] {
        [self.v_a * self.delta, self.gravity_proj / self.v_a]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainFit {
    pub g_hat: f64,
    pub residual_rms: f64,
    pub rows: usize,
}

/// Least-squares slope of `psi_dot_m` against `v_a * delta` through the origin.
pub fn fit_gain_batch(rows: &[FlightLogRow]) -> Result<GainFit, SysidError> {
    if rows.len() < 2 {
        return Err(SysidError::TooFewRows {
            needed: 2,
            got: rows.len(),
        });
    }
    let n = rows.len() as f64;
    let mean = rows.iter().map(FlightLogRow::gain_regressor).sum::<f64>() / n;
    let variance = rows
        .iter()
        .map(|r| (r.gain_regressor() - mean).powi(2))
        .sum::<f64>()
        / n;
    if variance < 1e-12 {
        return Err(SysidError::DegenerateRegressor { variance });
    }
    let sxx: f64 = rows.iter().map(|r| r.gain_regressor().powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| r.gain_regressor() * r.psi_dot_m).sum();
    let g_hat = sxy / sxx;
    let residual_rms = (rows
        .iter()
        .map(|r| (r.psi_dot_m - g_hat * r.gain_regressor()).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(GainFit {
        g_hat,
        residual_rms,
        rows: rows.len(),
    })
}

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { a: 0.0, b: 0.0, c: 0.0 };

    pub fn scaled_identity(s: f64) -> Sym2 {
        Sym2 { a: s, b: 0.0, c: s }
    }

    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.a + self.c);
        let r = (0.25 * (self.a - self.c).powi(2) + self.b * self.b).sqrt();
        [mean - r, mean + r]
    }

    pub fn condition_number(&self) -> f64 {
        let [lo, hi] = self.eigenvalues();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Sym2 {
            a: self.c / d,
            b: -self.b / d,
            c: self.a / d,
        })
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.b * v[0] + self.c * v[1]]
    }

    fn rank_one_update(&mut self, w: f64, x: [f64; 2]) {
        self.a += w * x[0] * x[0];
        self.b += w * x[0] * x[1];
        self.c += w * x[1] * x[1];
    }

    fn scale(&mut self, s: f64) {
        self.a *= s;
        self.b *= s;
        self.c *= s;
    }
}

/// Information matrix `sum(x x^T)` of the two-parameter regressors.
pub fn information_matrix(rows: &[FlightLogRow]) -> Sym2 {
    let mut m = Sym2::ZERO;
    for r in rows {
        m.rank_one_update(1.0, r.regressors());
    }
    m
}

/// Ordinary least squares on both regressors via the normal equations.
pub fn fit_law_batch(rows: &[FlightLogRow]) -> Result<[f64; 2], SysidError> {
    if rows.len() < 2 {
        return Err(SysidError::TooFewRows {
            needed: 2,
            got: rows.len(),
        });
    }
    let info = information_matrix(rows);
    let mut rhs = [0.0; 2];
    for r in rows {
        let x = r.regressors();
        rhs[0] += x[0] * r.psi_dot_m;
        rhs[1] += x[1] * r.psi_dot_m;
    }
    let inv = info
        .inverse()
        .filter(|_| info.condition_number() < 1e14)
        .ok_or(SysidError::DegenerateRegressor {
            variance: info.eigenvalues()[0],
        })?;
    Ok(inv.mul_vec(rhs))
}

/// How the recursion is started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RlsInit {
    /// Start from a prior estimate with covariance `p0 * I`.
    Prior { estimate: [f64; 2], p0: f64 },
    /// Accumulate the normal equations until they are well conditioned, then
    /// start from their exact solution. With `lambda = 1` the estimate equals
    /// batch OLS over all rows seen.
    Exact,
}

impl Default for RlsInit {
    fn default() -> Self {
        RlsInit::Prior {
            estimate: [0.03, 0.0],
            p0: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsConfig {
    pub lambda: f64,
    pub v_a_min: f64,
    pub init: RlsInit,
}

impl Default for RlsConfig {
    fn default() -> Self {
        Self {
            lambda: 0.995,
            v_a_min: 0.5,
            init: RlsInit::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Collecting { info: Sym2, rhs: [f64; 2] },
    Running,
}

/// Recursive least-squares estimate of `(g, M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsState {
    pub estimate: [f64; 2],
    pub covariance: Sym2,
    pub lambda: f64,
    pub v_a_min: f64,
    phase: Phase,
}

impl RlsState {
    pub fn new(cfg: RlsConfig) -> Self {
        match cfg.init {
            RlsInit::Prior { estimate, p0 } => Self {
                estimate,
                covariance: Sym2::scaled_identity(p0),
                lambda: cfg.lambda,
                v_a_min: cfg.v_a_min,
                phase: Phase::Running,
            },
            RlsInit::Exact => Self {
                estimate: [0.0; 2],
                covariance: Sym2::scaled_identity(f64::INFINITY),
                lambda: cfg.lambda,
                v_a_min: cfg.v_a_min,
                phase: Phase::Collecting {
                    info: Sym2::ZERO,
                    rhs: [0.0; 2],
                },
            },
        }
    }

    pub fn g(&self) -> f64 {
        self.estimate[0]
    }

    pub fn m(&self) -> f64 {
        self.estimate[1]
    }

    pub fn is_running(&self) -> bool {
        matches!(self.phase, Phase::Running)
    }

    /// Fold one row in. Rows below `v_a_min` are skipped.
    pub fn update(mut self, row: &FlightLogRow) -> RlsState {
        if row.v_a.is_nan() || row.v_a < self.v_a_min || !row.psi_dot_m.is_finite() {
            return self;
        }
        let x = row.regressors();
        if !(x[0].is_finite() && x[1].is_finite()) {
            return self;
        }
        let y = row.psi_dot_m;
        match self.phase {
            Phase::Collecting { mut info, mut rhs } => {
                info.scale(self.lambda);
                info.rank_one_update(1.0, x);
                rhs = [self.lambda * rhs[0] + x[0] * y, self.lambda * rhs[1] + x[1] * y];
                let well_posed = info.condition_number() < 1e8 && info.det() > 0.0;
                match info.inverse().filter(|_| well_posed) {
                    Some(p) => {
                        self.estimate = p.mul_vec(rhs);
                        self.covariance = p;
                        self.phase = Phase::Running;
                    }
                    None => self.phase = Phase::Collecting { info, rhs },
                }
            }
            Phase::Running => {
                let px = self.covariance.mul_vec(x);
                let denom = self.lambda + x[0] * px[0] + x[1] * px[1];
                let gain = [px[0] / denom, px[1] / denom];
                let err = y - (x[0] * self.estimate[0] + x[1] * self.estimate[1]);
                self.estimate[0] += gain[0] * err;
                self.estimate[1] += gain[1] * err;
                // P <- (P - k (P x)^T) / lambda, kept symmetric by construction
                let p = &mut self.covariance;
                p.a = (p.a - gain[0] * px[0]) / self.lambda;
                p.b = (p.b - gain[0] * px[1]) / self.lambda;
                p.c = (p.c - gain[1] * px[1]) / self.lambda;
            }
        }
        self
    }
}

pub fn rls_update(state: RlsState, row: &FlightLogRow) -> RlsState {
    state.update(row)
}

/// Run RLS over all rows, returning the estimate after each row.
pub fn rls_track(cfg: RlsConfig, rows: &[FlightLogRow]) -> Vec<RlsState> {
    let mut s = RlsState::new(cfg);
    rows.iter()
        .map(|r| {
            s = s.update(r);
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synthetic(g: f64, m: f64, n: usize) -> Vec<FlightLogRow> {
        (0..n)
            .map(|k| {
                let t = k as f64 * 0.1;
                let v_a = 10.0 + 8.0 * (0.05 * t).sin();
                let delta = 0.4 * (0.7 * t).sin();
                let gp = 0.6 * (0.31 * t).cos();
                FlightLogRow {
                    t,
                    v_a,
                    delta,
                    psi_dot_m: g * v_a * delta + m * gp / v_a,
                    gravity_proj: gp,
                }
            })
            .collect()
    }

    #[test]
    fn exact_gain_fit() {
        let rows = synthetic(0.04, 0.0, 300);
        let fit = fit_gain_batch(&rows).unwrap();
        assert_relative_eq!(fit.g_hat, 0.04, max_relative = 1e-12);
        assert!(fit.residual_rms < 1e-14);
    }

    #[test]
    fn degenerate_regressor() {
        let rows = vec![
            FlightLogRow {
                v_a: 10.0,
                delta: 0.1,
                psi_dot_m: 0.04,
                ..Default::default()
            };
            5
        ];
        assert!(matches!(
            fit_gain_batch(&rows),
            Err(SysidError::DegenerateRegressor { .. })
        ));
        assert!(matches!(
            fit_gain_batch(&rows[..1]),
            Err(SysidError::TooFewRows { .. })
        ));
    }

    #[test]
    fn zero_information_row_leaves_estimate() {
        let s = RlsState::new(RlsConfig::default());
        let row = FlightLogRow {
            t: 0.0,
            v_a: 12.0,
            delta: 0.0,
            psi_dot_m: 0.3,
            gravity_proj: 0.0,
        };
        let s2 = s.update(&row);
        assert_eq!(s2.estimate, s.estimate);
    }

    #[test]
    fn slow_rows_are_skipped() {
        let s = RlsState::new(RlsConfig::default());
        let row = FlightLogRow {
            t: 0.0,
            v_a: 0.2,
            delta: 0.5,
            psi_dot_m: 0.3,
            gravity_proj: 0.2,
        };
        assert_eq!(s.update(&row), s);
    }

    #[test]
    fn exact_init_recovers_both_parameters() {
        let rows = synthetic(0.035, 2.5, 400);
        let s = rows.iter().fold(
            RlsState::new(RlsConfig {
                lambda: 1.0,
                init: RlsInit::Exact,
                ..RlsConfig::default()
            }),
            |s, r| s.update(r),
        );
        assert_relative_eq!(s.g(), 0.035, max_relative = 1e-9);
        assert_relative_eq!(s.m(), 2.5, max_relative = 1e-9);
        let batch = fit_law_batch(&rows).unwrap();
        assert_relative_eq!(batch[0], 0.035, max_relative = 1e-10);
        assert_relative_eq!(batch[1], 2.5, max_relative = 1e-10);
    }

    #[test]
    fn sym2_eigen() {
        let m = Sym2 { a: 2.0, b: 1.0, c: 2.0 };
        let [lo, hi] = m.eigenvalues();
        assert_relative_eq!(lo, 1.0, max_relative = 1e-15);
        assert_relative_eq!(hi, 3.0, max_relative = 1e-15);
        assert_relative_eq!(m.condition_number(), 3.0, max_relative = 1e-15);
    }
}
