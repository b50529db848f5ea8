//! Drop-test pendulum: a bar carrying a weight, pivoting on the finger joint
//! under gravity, Coulomb and viscous bearing friction and a linear damper.
//!
//! With `theta` measured from the upward vertical and `S = sum m_i r_i`,
//!
//! ```text
//! I theta'' = S g sin(theta) - b omega - N r_j sign(omega) (mu_k + mu_d r_j |omega|)
//! N         = max(0, S omega^2 + S g cos(theta - pi))
//! ```
//!
//! integrated by forward Euler at 1/100 of the sample interval. With
//! non-negative coefficients a step of length `h` can raise the energy by at
//! most `h^2 (I a^2 + S g omega^2) / 2`; friction and damping only remove it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::Trajectory;

/// Camera frame interval of the drop-test recordings, s.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1.0 / 240.0;
/// Euler steps per recorded sample.
pub const SUBSTEPS: usize = 100;
/// Below this speed the joint may stick if friction can hold it.
pub const REST_VELOCITY: f64 = 1e-4;
/// Default release angle used when nothing else is configured.
pub const DEFAULT_RELEASE_ANGLE: f64 = PI / 2.0;
/// Release angle that reproduces the recorded drop tests with the default
/// pendulum (0.6 rad from hanging).
pub const CALIBRATED_RELEASE_ANGLE: f64 = PI - 0.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PendulumError {
    #[error("invalid pendulum parameter: {0}")]
    InvalidParams(String),
    #[error("integration diverged at t = {time:.6} s")]
    Diverged { time: f64 },
    #[error("invalid simulation setting: {0}")]
    InvalidSetting(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumParams {
    /// Rotor inertia of the joint about its axis, kg·m².
    pub joint_inertia: f64,
    pub bar_mass: f64,
    pub bar_length: f64,
    pub bar_width: f64,
    /// Distance from the pivot to the bar centre of mass.
    pub bar_com_radius: f64,
    pub weight_mass: f64,
    pub weight_radius: f64,
    /// Effective friction lever of the joint bearing.
    pub joint_radius: f64,
    pub mu_k: f64,
    /// Viscous friction coefficient, s/m.
    pub mu_d: f64,
    /// Linear damping, N·m·s/rad.
    pub damping_b: f64,
    pub gravity: f64,
}

impl Default for PendulumParams {
    /// Drop-test rig with the friction coefficient identified on undamped
    /// drops. Bar and joint dimensions are calibrated, not measured; the
    /// friction lever is an effective value that absorbs the unit mismatch of
    /// the normal-force expression.
    fn default() -> Self {
        Self {
            joint_inertia: 2.0e-6,
            bar_mass: 0.003,
            bar_length: 0.08,
            bar_width: 0.012,
            bar_com_radius: 0.045,
            weight_mass: 0.0112,
            weight_radius: 0.075,
            joint_radius: 3.5,
            mu_k: 2.88e-3,
            mu_d: 0.0,
            damping_b: 0.0,
            gravity: 9.81,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<(), PendulumError> {
        let non_negative = [
            ("joint_inertia", self.joint_inertia),
            ("bar_mass", self.bar_mass),
            ("bar_length", self.bar_length),
            ("bar_width", self.bar_width),
            ("bar_com_radius", self.bar_com_radius),
            ("weight_mass", self.weight_mass),
            ("weight_radius", self.weight_radius),
            ("joint_radius", self.joint_radius),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PendulumError::InvalidParams(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("mu_k", self.mu_k), ("mu_d", self.mu_d), ("damping_b", self.damping_b)] {
            if !v.is_finite() {
                return Err(PendulumError::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return Err(PendulumError::InvalidParams(format!("gravity must be positive, got {}", self.gravity)));
        }
        if total_inertia(self) <= 0.0 {
            return Err(PendulumError::InvalidParams("total inertia must be positive".into()));
        }
        if self.mass_radius_sum() <= 0.0 {
            return Err(PendulumError::InvalidParams("sum of m r must be positive".into()));
        }
        Ok(())
    }

    /// `S = m_bar r_bar + m_weight r_weight`, kg·m.
    pub fn mass_radius_sum(&self) -> f64 {
        self.bar_mass * self.bar_com_radius + self.weight_mass * self.weight_radius
    }

    /// Bearing normal force, clamped at zero.
    pub fn normal_force(&self, theta: f64, omega: f64) -> f64 {
        let s = self.mass_radius_sum();
        (s * omega * omega + s * self.gravity * (theta - PI).cos()).max(0.0)
    }

    pub fn gravity_torque(&self, theta: f64) -> f64 {
        self.mass_radius_sum() * self.gravity * theta.sin()
    }

    /// Largest gravity torque the Coulomb term can hold at rest.
    fn holding_torque(&self, theta: f64) -> f64 {
        self.normal_force(theta, 0.0) * self.joint_radius * self.mu_k
    }

    fn sticks(&self, theta: f64) -> bool {
        self.gravity_torque(theta).abs() <= self.holding_torque(theta)
    }

    /// Kinetic plus potential energy, potential zero at the pivot height.
    pub fn energy(&self, theta: f64, omega: f64) -> f64 {
        0.5 * total_inertia(self) * omega * omega + self.mass_radius_sum() * self.gravity * theta.cos()
    }

    /// Small-oscillation period about the hanging equilibrium.
    pub fn linear_period(&self) -> f64 {
        2.0 * PI * (total_inertia(self) / (self.mass_radius_sum() * self.gravity)).sqrt()
    }
}

/// Joint, bar (rectangular plate about its end offset) and point weight.
pub fn total_inertia(p: &PendulumParams) -> f64 {
    let bar = p.bar_mass * (p.bar_length.powi(2) + p.bar_width.powi(2)) / 12.0
        + p.bar_mass * p.bar_com_radius.powi(2);
    p.joint_inertia + bar + p.weight_mass * p.weight_radius.powi(2)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Angular acceleration of the pendulum.
pub fn acceleration(theta: f64, omega: f64, p: &PendulumParams) -> f64 {
    Dynamics::new(p, total_inertia(p)).accel(theta, omega)
}

/// Coefficients of the equation of motion, hoisted out of the step loop.
struct Dynamics {
    s: f64,
    sg: f64,
    r: f64,
    mu_k: f64,
    mu_d_r: f64,
    b: f64,
    inv_inertia: f64,
}

impl Dynamics {
    fn new(p: &PendulumParams, inertia: f64) -> Self {
        let s = p.mass_radius_sum();
        Self {
            s,
            sg: s * p.gravity,
            r: p.joint_radius,
            mu_k: p.mu_k,
            mu_d_r: p.mu_d * p.joint_radius,
            b: p.damping_b,
            inv_inertia: 1.0 / inertia,
        }
    }

    #[inline]
    fn accel(&self, theta: f64, omega: f64) -> f64 {
        let (sin, cos) = theta.sin_cos();
        // cos(theta - pi) = -cos(theta)
        let n = (self.s * omega * omega - self.sg * cos).max(0.0);
        let friction = n * self.r * sign(omega) * (self.mu_k + self.mu_d_r * omega.abs());
        (self.sg * sin - self.b * omega - friction) * self.inv_inertia
    }
}

/// Simulate from `(theta0, omega0)` for `duration` seconds, recording every
/// `dt_exp` seconds with [`SUBSTEPS`] Euler steps in between.
pub fn simulate(
    params: &PendulumParams,
    theta0: f64,
    omega0: f64,
    duration: f64,
    dt_exp: f64,
) -> Result<Trajectory, PendulumError> {
    simulate_substeps(params, theta0, omega0, duration, dt_exp, SUBSTEPS)
}

/// [`simulate`] with a chosen number of Euler steps per sample.
pub fn simulate_substeps(
    params: &PendulumParams,
    theta0: f64,
    omega0: f64,
    duration: f64,
    dt_exp: f64,
    substeps: usize,
) -> Result<Trajectory, PendulumError> {
    params.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(PendulumError::InvalidSetting(format!("duration must be positive, got {duration}")));
    }
    if !(dt_exp.is_finite() && dt_exp > 0.0) {
        return Err(PendulumError::InvalidSetting(format!("sample interval must be positive, got {dt_exp}")));
    }
    if substeps == 0 {
        return Err(PendulumError::InvalidSetting("substeps must be at least 1".into()));
    }
    if !(theta0.is_finite() && omega0.is_finite()) {
        return Err(PendulumError::InvalidSetting("initial state must be finite".into()));
    }

    let dynamics = Dynamics::new(params, total_inertia(params));
    let n = ((duration / dt_exp).round() as usize).max(1) + 1;
    let h = dt_exp / substeps as f64;
    let mut angles = Vec::with_capacity(n);
    let mut omegas = Vec::with_capacity(n);
    let (mut theta, mut omega) = (theta0, omega0);
    angles.push(theta);
    omegas.push(omega);

    for k in 1..n {
        if omega == 0.0 && params.sticks(theta) {
            // At rest and held by friction: nothing changes from here on.
            angles.resize(n, theta);
            omegas.resize(n, 0.0);
            break;
        }
        for s in 0..substeps {
            if omega == 0.0 && params.sticks(theta) {
                break;
            }
            let acc = dynamics.accel(theta, omega);
            let theta_next = theta + h * omega;
            let mut omega_next = omega + h * acc;
            if (omega_next * omega < 0.0 || omega_next.abs() < REST_VELOCITY) && params.sticks(theta_next) {
                omega_next = 0.0;
            }
            theta = theta_next;
            omega = omega_next;
            if !(theta.is_finite() && omega.is_finite()) {
                let time = (k - 1) as f64 * dt_exp + (s + 1) as f64 * h;
                return Err(PendulumError::Diverged { time });
            }
        }
        angles.push(theta);
        omegas.push(omega);
    }

    Ok(Trajectory {
        t0: 0.0,
        dt: dt_exp,
        angles,
        omegas: Some(omegas),
    })
}
