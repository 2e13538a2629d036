//! Geometry and steady-state relations of the constrained-kite design model.
//!
//! Frame: `e_x` points downwind, `e_z` points down (gravity), `e_y` completes a
//! right-handed triad. The kite sits on a sphere of radius `L` parameterised by
//! the azimuth `phi` and the polar angle `theta` measured from the wind axis.
//! Its orientation about the yaw axis (which points from the kite back to the
//! tether origin) is `psi`.
//!
//! The body triad `(roll, pitch, yaw)` returned by [`basis_vectors`] is
//! right-handed: `roll × pitch = yaw`.

use std::ops::{Add, Mul, Neg, Sub};

/// The three model angles, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Angles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl Angles {
    pub const fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.theta.is_finite() && self.psi.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub const E_X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const E_Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const E_Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = o.0;
        Vec3::new(a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Vec3) -> f64 {
        (0..3)
            .map(|i| (self.0[i] - other.0[i]).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.0[0], -self.0[1], -self.0[2])
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self * v.0[0], self * v.0[1], self * v.0[2])
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Right-handed rotation by `angle` about `e_x`.
    pub fn rot_x(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    /// Right-handed rotation by `angle` about `e_y`.
    pub fn rot_y(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(out)
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        let r = |i: usize| self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2];
        Vec3::new(r(0), r(1), r(2))
    }
}

/// Body axes of the kite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub roll: Vec3,
    pub pitch: Vec3,
    pub yaw: Vec3,
}

/// Kite position on the sphere of radius `line_length`.
pub fn kite_position(a: Angles, line_length: f64) -> Vec3 {
    let (sp, cp) = a.phi.sin_cos();
    let (st, ct) = a.theta.sin_cos();
    line_length * Vec3::new(ct, sp * st, -cp * st)
}

/// `R = Rx(phi) · Ry(theta) · Rx(-psi)`.
///
/// Maps the reference orientation (kite at `L e_x`, roll along `-e_z`) to the
/// current one: `R(-e_z) = roll`, `R(-e_y) = pitch`, `R(-e_x) = yaw`.
pub fn rotation_matrix(a: Angles) -> Mat3 {
    Mat3::rot_x(a.phi) * Mat3::rot_y(a.theta) * Mat3::rot_x(-a.psi)
}

pub fn basis_vectors(a: Angles) -> Basis {
    let (sp, cp) = a.phi.sin_cos();
    let (st, ct) = a.theta.sin_cos();
    let (ss, cs) = a.psi.sin_cos();
    Basis {
        roll: Vec3::new(-st * cs, -cp * ss + sp * ct * cs, -sp * ss - cp * ct * cs),
        pitch: Vec3::new(st * ss, -cp * cs - sp * ct * ss, -sp * cs + cp * ct * ss),
        yaw: Vec3::new(-ct, -sp * st, cp * st),
    }
}

/// Polar angle of the steady circular orbit flown at constant `psi`.
pub fn steady_state_theta(psi: f64, glide_ratio: f64) -> f64 {
    (glide_ratio * psi.cos()).atan()
}

/// Air path speed along the roll axis: `v0 E cos(theta)`.
pub fn airpath_speed(v0: f64, glide_ratio: f64, theta: f64) -> f64 {
    v0 * glide_ratio * theta.cos()
}

/// Kinematic speed of the kite along its roll and pitch axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityComponents {
    pub roll: f64,
    pub pitch: f64,
}

/// Roll/pitch speeds that satisfy both aerodynamic flight conditions: the
/// airflow lies in the roll–yaw plane and its roll/yaw ratio equals `E`.
pub fn velocity_components(v0: f64, glide_ratio: f64, a: Angles) -> VelocityComponents {
    let (st, ct) = a.theta.sin_cos();
    let (ss, cs) = a.psi.sin_cos();
    VelocityComponents {
        roll: v0 * (glide_ratio * ct - st * cs),
        pitch: v0 * st * ss,
    }
}

/// Apparent airflow: ambient wind minus the kite's own motion.
pub fn airflow_vector(v0: f64, v: VelocityComponents, a: Angles) -> Vec3 {
    let b = basis_vectors(a);
    Vec3::new(v0, 0.0, 0.0) - v.roll * b.roll - v.pitch * b.pitch
}

/// Yaw rate seen by a body-fixed gyro given the coordinate rates.
pub fn measured_yaw_rate(psi_dot: f64, phi_dot: f64, theta: f64) -> f64 {
    psi_dot - phi_dot * theta.cos()
}

/// Inverse of [`measured_yaw_rate`]: coordinate rate from the gyro rate.
pub fn kinematic_yaw_rate(psi_dot_m: f64, phi_dot: f64, theta: f64) -> f64 {
    psi_dot_m + phi_dot * theta.cos()
}

/// Projection of gravity onto the pitch axis, `(e_z, e_pitch)`.
pub fn gravity_projection(a: Angles) -> f64 {
    let (sp, cp) = a.phi.sin_cos();
    let ct = a.theta.cos();
    let (ss, cs) = a.psi.sin_cos();
    -sp * cs + cp * ct * ss
}

/// Elevation of the kite above the horizontal `e_x`–`e_y` plane.
pub fn elevation(a: Angles) -> f64 {
    (a.phi.cos() * a.theta.sin()).clamp(-1.0, 1.0).asin()
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x > -PI && x <= PI {
        return x;
    }
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}
