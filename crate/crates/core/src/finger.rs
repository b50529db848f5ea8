//! Tendon-driven three-joint finger.
//!
//! Joint 0 is proximal (knuckle), joint 2 distal. A single tendon runs over
//! all three joints with moment arms `a_j` and is pulled through a series
//! spring by a motor pulley, so its tension is
//! `T = k_s max(0, r_p phi - sum a_j q_j)`.
//!
//! In the quasi-static model each joint holds still until the tendon torque
//! exceeds its parallel-spring torque plus a Coulomb holding torque; joints
//! never move back during a monotone sweep. Without the parallel spring a
//! joint that breaks free runs to its limit, which makes the finger curl
//! distal-first. With it the joints share the load and flex together.

use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::pearson;

/// Parallel ligament stiffness of the elastic finger, N·m/rad.
pub const LIGAMENT_STIFFNESS: f64 = 6.6e-2;
/// Mid-range human finger joint damping, N·m·s/rad.
pub const HUMAN_JOINT_DAMPING: f64 = 11.15e-3;
/// Motor torque used for closing-time estimates, N·m.
pub const CLOSING_TORQUE: f64 = 0.4;
/// Closing target: 20° per joint, 60° of fingertip bend.
pub const CLOSING_TARGET: [f64; 3] = [20.0 * std::f64::consts::PI / 180.0; 3];

const JOINT_NAMES: [&str; 3] = ["proximal", "middle", "distal"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FingerError {
    #[error("invalid finger chain: {0}")]
    InvalidChain(String),
    #[error("invalid tendon drive: {0}")]
    InvalidDrive(String),
    #[error("motor sweep must be non-decreasing (sample {index})")]
    NonMonotoneSweep { index: usize },
    #[error("equilibrium solve failed at motor angle {motor_deg}°")]
    SolverFailed { motor_deg: f64 },
    #[error("need at least 3 samples for correlation, got {0}")]
    TooFewSamples(usize),
    #[error("{joint} joint series has zero range")]
    DegenerateSeries { joint: &'static str },
    #[error("{joint} joint cannot reach {target:.4} rad: equilibrium at {equilibrium:.4} rad")]
    Unreachable { joint: &'static str, equilibrium: f64, target: f64 },
    #[error("motor torque must be positive and finite, got {0}")]
    InvalidTorque(f64),
    #[error("record columns have different lengths")]
    RaggedRecord,
    #[error("flexion CSV: {0}")]
    Csv(String),
}

pub fn joint_name(j: usize) -> &'static str {
    JOINT_NAMES[j]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerChain {
    /// Proximal, middle and distal link lengths, m.
    pub link_lengths: [f64; 3],
    pub joint_stiffness: [f64; 3],
    pub joint_damping: [f64; 3],
    /// Torque each joint resists before it starts to slide, N·m.
    pub joint_coulomb: [f64; 3],
    pub tendon_moment_arms: [f64; 3],
    /// `[lower, upper]` flexion limits per joint, rad.
    pub joint_limits: [[f64; 2]; 3],
    pub link_masses: [f64; 3],
    /// Link inertias about their own centres of mass, kg·m².
    pub link_inertias: [f64; 3],
    /// Distance from the palm centre to the proximal joint, m.
    pub palm_offset: f64,
}

impl Default for FingerChain {
    fn default() -> Self {
        Self::with_elastic(true)
    }
}

impl FingerChain {
    /// Default finger with or without the parallel ligament element.
    pub fn with_elastic(elastic: bool) -> Self {
        let link_lengths: [f64; 3] = [0.045, 0.045, 0.030];
        let link_masses: [f64; 3] = [0.008, 0.008, 0.005];
        let mut link_inertias = [0.0; 3];
        for j in 0..3 {
            link_inertias[j] = link_masses[j] * link_lengths[j].powi(2) / 12.0;
        }
        Self {
            link_lengths,
            joint_stiffness: [if elastic { LIGAMENT_STIFFNESS } else { 0.0 }; 3],
            joint_damping: [HUMAN_JOINT_DAMPING; 3],
            joint_coulomb: [0.05, 0.04, 0.01],
            tendon_moment_arms: [3.0e-3, 3.0e-3, 2.5e-3],
            joint_limits: [[0.0, FRAC_PI_2]; 3],
            link_masses,
            link_inertias,
            palm_offset: 0.025,
        }
    }

    pub fn is_elastic(&self) -> bool {
        self.joint_stiffness.iter().any(|&k| k > 0.0)
    }

    pub fn validate(&self) -> Result<(), FingerError> {
        let bad = |m: String| Err(FingerError::InvalidChain(m));
        for j in 0..3 {
            let name = JOINT_NAMES[j];
            if !(self.link_lengths[j] > 0.0 && self.link_lengths[j].is_finite()) {
                return bad(format!("{name} link length must be positive"));
            }
            if !(self.tendon_moment_arms[j] > 0.0 && self.tendon_moment_arms[j].is_finite()) {
                return bad(format!("{name} moment arm must be positive"));
            }
            for (what, v) in [
                ("stiffness", self.joint_stiffness[j]),
                ("damping", self.joint_damping[j]),
                ("coulomb torque", self.joint_coulomb[j]),
                ("mass", self.link_masses[j]),
                ("inertia", self.link_inertias[j]),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name} {what} must be non-negative"));
                }
            }
            let [lo, hi] = self.joint_limits[j];
            if !(lo >= 0.0 && hi > lo && hi <= std::f64::consts::PI) {
                return bad(format!("{name} limits must satisfy 0 <= lo < hi <= pi"));
            }
        }
        if !(self.palm_offset >= 0.0 && self.palm_offset.is_finite()) {
            return bad("palm_offset must be non-negative".into());
        }
        Ok(())
    }

    fn clamp_joint(&self, j: usize, q: f64) -> f64 {
        q.clamp(self.joint_limits[j][0], self.joint_limits[j][1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TendonDrive {
    /// Series elastic element, N/m.
    pub series_stiffness: f64,
    pub pulley_radius: f64,
    /// Rotor inertia reflected to the output shaft, kg·m².
    pub motor_inertia: f64,
    /// Output-shaft speed at zero load, rad/s.
    pub no_load_speed: f64,
}

impl Default for TendonDrive {
    fn default() -> Self {
        Self {
            series_stiffness: 9520.0,
            pulley_radius: 2.5e-3,
            motor_inertia: 2.0e-5,
            no_load_speed: 11.0,
        }
    }
}

impl TendonDrive {
    pub fn validate(&self) -> Result<(), FingerError> {
        for (name, v) in [
            ("series_stiffness", self.series_stiffness),
            ("pulley_radius", self.pulley_radius),
            ("motor_inertia", self.motor_inertia),
            ("no_load_speed", self.no_load_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FingerError::InvalidDrive(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Tendon tension for motor angle `phi` (rad) and joint angles `q`.
    pub fn tension(&self, chain: &FingerChain, phi: f64, q: &[f64; 3]) -> f64 {
        let taken: f64 = (0..3).map(|j| chain.tendon_moment_arms[j] * q[j]).sum();
        self.series_stiffness * (self.pulley_radius * phi - taken).max(0.0)
    }
}

/// Joint angles of one motor sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexionRecord {
    pub motor_angles: Vec<f64>,
    /// Proximal, middle, distal series, rad.
    pub joint_angles: [Vec<f64>; 3],
    pub fingertip_distance: Vec<f64>,
    /// Tendon tension at each sample, N. Empty for measured records.
    pub tension: Vec<f64>,
}

impl FlexionRecord {
    pub fn len(&self) -> usize {
        self.motor_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motor_angles.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["motor_deg", "j1", "j2", "j3", "d_m"])?;
        for k in 0..self.len() {
            w.write_record([
                self.motor_angles[k].to_string(),
                self.joint_angles[0][k].to_string(),
                self.joint_angles[1][k].to_string(),
                self.joint_angles[2][k].to_string(),
                self.fingertip_distance[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read `motor_deg,j1,j2,j3[,d_m]`. A missing `d_m` column is filled
    /// from `chain` when given, otherwise with NaN.
    pub fn read_csv<R: Read>(input: R, chain: Option<&FingerChain>) -> Result<Self, FingerError> {
        let err = |e: csv::Error| FingerError::Csv(e.to_string());
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = r.headers().map_err(err)?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let idx = ["motor_deg", "j1", "j2", "j3"]
            .iter()
            .map(|n| col(n).ok_or_else(|| FingerError::Csv(format!("missing column `{n}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let d_idx = col("d_m");
        let mut rec = FlexionRecord {
            motor_angles: Vec::new(),
            joint_angles: [Vec::new(), Vec::new(), Vec::new()],
            fingertip_distance: Vec::new(),
            tension: Vec::new(),
        };
        for (row, line) in r.records().enumerate() {
            let line = line.map_err(err)?;
            let num = |i: usize| -> Result<f64, FingerError> {
                let s = line.get(i).unwrap_or("");
                s.parse()
                    .map_err(|_| FingerError::Csv(format!("row {}: cannot parse `{s}`", row + 2)))
            };
            rec.motor_angles.push(num(idx[0])?);
            let q = [num(idx[1])?, num(idx[2])?, num(idx[3])?];
            for j in 0..3 {
                rec.joint_angles[j].push(q[j]);
            }
            let d = match (d_idx, chain) {
                (Some(i), _) => num(i)?,
                (None, Some(c)) => fingertip_distance(c, &q),
                (None, None) => f64::NAN,
            };
            rec.fingertip_distance.push(d);
        }
        Ok(rec)
    }
}

/// Separation of two mirrored fingertips in the flexion plane, negative once
/// the tips have crossed.
pub fn fingertip_distance(chain: &FingerChain, joint_angles: &[f64; 3]) -> f64 {
    let mut cumulative = 0.0;
    let mut reach = chain.palm_offset;
    for j in 0..3 {
        cumulative += joint_angles[j];
        reach += chain.link_lengths[j] * cumulative.cos();
    }
    2.0 * reach
}

/// Joint angles for tendon tension `t` given the angles already reached.
/// Rigid joints sitting exactly at breakaway are returned at `prev` and
/// listed in `marginal`.
fn joint_response(chain: &FingerChain, t: f64, prev: &[f64; 3], marginal: &mut Vec<usize>) -> [f64; 3] {
    let mut q = *prev;
    marginal.clear();
    for j in 0..3 {
        let a = chain.tendon_moment_arms[j];
        let c = chain.joint_coulomb[j];
        let k = chain.joint_stiffness[j];
        if k > 0.0 {
            q[j] = chain.clamp_joint(j, prev[j].max((t * a - c) / k));
        } else {
            let breakaway = c / a;
            if (t - breakaway).abs() <= 1e-9 * breakaway.max(1.0) {
                marginal.push(j);
            } else if t > breakaway {
                q[j] = chain.joint_limits[j][1];
            }
        }
    }
    q
}

/// Quasi-static equilibrium at tendon excursion `x` (m), continuing from
/// `prev`. Returns joint angles and tension.
fn equilibrium(chain: &FingerChain, drive: &TendonDrive, x: f64, prev: &[f64; 3]) -> Option<([f64; 3], f64)> {
    let ks = drive.series_stiffness;
    let mut marginal = Vec::with_capacity(3);
    let excess = |t: f64, marginal: &mut Vec<usize>| {
        let q = joint_response(chain, t, prev, marginal);
        let taken: f64 = (0..3).map(|j| chain.tendon_moment_arms[j] * q[j]).sum();
        t - ks * (x - taken).max(0.0)
    };
    if excess(0.0, &mut marginal) >= 0.0 {
        return Some((*prev, 0.0));
    }
    // excess is non-decreasing in tension: bisect for its sign change.
    let (mut lo, mut hi) = (0.0, ks * x.max(0.0) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid, &mut marginal) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
    }
    let t = hi;
    // Snap onto a rigid joint's breakaway tension when the root sits on it.
    let t = (0..3)
        .filter(|&j| chain.joint_stiffness[j] == 0.0)
        .map(|j| chain.joint_coulomb[j] / chain.tendon_moment_arms[j])
        .find(|&b| (t - b).abs() <= 1e-9 * b.max(1.0))
        .unwrap_or(t);
    let mut q = joint_response(chain, t, prev, &mut marginal);
    if !marginal.is_empty() {
        let taken: f64 = (0..3).map(|j| chain.tendon_moment_arms[j] * q[j]).sum();
        let mut remaining = (x - t / ks - taken).max(0.0);
        // Distal joints take up slack first.
        for &j in marginal.iter().rev() {
            let a = chain.tendon_moment_arms[j];
            let room = chain.joint_limits[j][1] - q[j];
            let dq = (remaining / a).min(room);
            q[j] += dq;
            remaining -= dq * a;
        }
    }
    if q.iter().all(|v| v.is_finite()) && t.is_finite() {
        Some((q, t))
    } else {
        None
    }
}

/// Quasi-static joint angles over a non-decreasing list of motor angles in
/// degrees, starting from the rest pose.
pub fn quasi_static_sweep(chain: &FingerChain, drive: &TendonDrive, motor_deg: &[f64]) -> Result<FlexionRecord, FingerError> {
    chain.validate()?;
    drive.validate()?;
    if let Some(i) = motor_deg.windows(2).position(|w| !(w[1] >= w[0])) {
        return Err(FingerError::NonMonotoneSweep { index: i + 1 });
    }
    let mut prev = [chain.joint_limits[0][0], chain.joint_limits[1][0], chain.joint_limits[2][0]];
    let mut rec = FlexionRecord {
        motor_angles: motor_deg.to_vec(),
        joint_angles: [Vec::new(), Vec::new(), Vec::new()],
        fingertip_distance: Vec::new(),
        tension: Vec::new(),
    };
    for &deg in motor_deg {
        let x = drive.pulley_radius * deg.to_radians();
        let (q, t) = equilibrium(chain, drive, x, &prev).ok_or(FingerError::SolverFailed { motor_deg: deg })?;
        for j in 0..3 {
            rec.joint_angles[j].push(q[j]);
        }
        rec.fingertip_distance.push(fingertip_distance(chain, &q));
        rec.tension.push(t);
        prev = q;
    }
    Ok(rec)
}

/// Motor angles 0°, 10°, ..., 270°.
pub fn standard_sweep() -> Vec<f64> {
    (0..=27).map(|k| 10.0 * k as f64).collect()
}

/// Pairwise Pearson correlation of the min-max normalised joint series.
pub fn correlation_matrix(record: &FlexionRecord) -> Result<[[f64; 3]; 3], FingerError> {
    let n = record.joint_angles[0].len();
    if record.joint_angles.iter().any(|s| s.len() != n) {
        return Err(FingerError::RaggedRecord);
    }
    if n < 3 {
        return Err(FingerError::TooFewSamples(n));
    }
    let mut normalised: Vec<Vec<f64>> = Vec::with_capacity(3);
    for (j, series) in record.joint_angles.iter().enumerate() {
        let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(FingerError::DegenerateSeries { joint: JOINT_NAMES[j] });
        }
        normalised.push(series.iter().map(|v| (v - lo) / (hi - lo)).collect());
    }
    let mut m = [[1.0; 3]; 3];
    for i in 0..3 {
        for j in (i + 1)..3 {
            let r = pearson(&normalised[i], &normalised[j]).ok_or(FingerError::DegenerateSeries { joint: JOINT_NAMES[j] })?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

pub fn mean_off_diagonal(m: &[[f64; 3]; 3]) -> f64 {
    (m[0][1] + m[0][2] + m[1][2]) / 3.0
}

/// Mass matrix of the planar three-link chain.
fn mass_matrix(chain: &FingerChain, q: &Vector3<f64>) -> Matrix3<f64> {
    let mut angle = [0.0; 3];
    let mut acc = 0.0;
    for j in 0..3 {
        acc += q[j];
        angle[j] = acc;
    }
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        // d(com_i)/d(q_k) for k <= i.
        let mut jac = [[0.0; 2]; 3];
        for (k, col) in jac.iter_mut().enumerate().take(i + 1) {
            for j in k..=i {
                let len = if j == i { 0.5 * chain.link_lengths[i] } else { chain.link_lengths[j] };
                col[0] -= len * angle[j].sin();
                col[1] += len * angle[j].cos();
            }
        }
        for r in 0..=i {
            for c in 0..=i {
                m[(r, c)] += chain.link_masses[i] * (jac[r][0] * jac[c][0] + jac[r][1] * jac[c][1])
                    + chain.link_inertias[i];
            }
        }
    }
    m
}

/// Coriolis and centrifugal torques from finite differences of the mass
/// matrix.
fn velocity_torques(chain: &FingerChain, q: &Vector3<f64>, qd: &Vector3<f64>) -> Vector3<f64> {
    const EPS: f64 = 1e-6;
    let mut dm = [Matrix3::zeros(); 3];
    for (k, d) in dm.iter_mut().enumerate() {
        let mut qp = *q;
        let mut qm = *q;
        qp[k] += EPS;
        qm[k] -= EPS;
        *d = (mass_matrix(chain, &qp) - mass_matrix(chain, &qm)) / (2.0 * EPS);
    }
    let mut h = Vector3::zeros();
    for i in 0..3 {
        let mut s = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                s += (dm[k][(i, j)] - 0.5 * dm[i][(j, k)]) * qd[j] * qd[k];
            }
        }
        h[i] = s;
    }
    h
}

/// State: joint angles, joint rates, motor angle, motor rate.
#[derive(Clone, Copy)]
struct CloseState {
    q: Vector3<f64>,
    qd: Vector3<f64>,
    phi: f64,
    phid: f64,
}

fn close_derivative(chain: &FingerChain, drive: &TendonDrive, torque: f64, s: &CloseState) -> CloseState {
    let q = [s.q[0], s.q[1], s.q[2]];
    let t = drive.tension(chain, s.phi, &q);
    let mut joint_torque = Vector3::zeros();
    for j in 0..3 {
        joint_torque[j] = chain.tendon_moment_arms[j] * t - chain.joint_stiffness[j] * s.q[j] - chain.joint_damping[j] * s.qd[j];
    }
    let rhs = joint_torque - velocity_torques(chain, &s.q, &s.qd);
    let qdd = mass_matrix(chain, &s.q)
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(Vector3::zeros);
    let motor = torque * (1.0 - s.phid / drive.no_load_speed) - drive.pulley_radius * t;
    CloseState {
        q: s.qd,
        qd: qdd,
        phi: s.phid,
        phid: motor / drive.motor_inertia,
    }
}

fn advance(s: &CloseState, d: &CloseState, h: f64) -> CloseState {
    CloseState {
        q: s.q + d.q * h,
        qd: s.qd + d.qd * h,
        phi: s.phi + d.phi * h,
        phid: s.phid + d.phid * h,
    }
}

/// Time for every joint to reach `target` (rad) when the motor is driven at
/// a constant stall torque `motor_torque` (N·m) with a linear torque-speed
/// curve. Gravity and joint Coulomb torques are neglected.
pub fn dynamic_close(chain: &FingerChain, drive: &TendonDrive, motor_torque: f64, target: &[f64; 3]) -> Result<f64, FingerError> {
    chain.validate()?;
    drive.validate()?;
    if !(motor_torque.is_finite() && motor_torque >= 0.0) {
        return Err(FingerError::InvalidTorque(motor_torque));
    }
    // With the motor stalled the tendon carries torque / r_p; each joint
    // settles where its spring balances that.
    let stall_tension = motor_torque / drive.pulley_radius;
    for j in 0..3 {
        let reach = chain.joint_limits[j][1];
        let k = chain.joint_stiffness[j];
        let drive_torque = chain.tendon_moment_arms[j] * stall_tension;
        let eq = if k > 0.0 {
            (drive_torque / k).min(reach)
        } else if drive_torque > 0.0 {
            reach
        } else {
            0.0
        };
        if eq < target[j] || motor_torque == 0.0 {
            return Err(FingerError::Unreachable { joint: JOINT_NAMES[j], equilibrium: eq, target: target[j] });
        }
    }

    const H: f64 = 2.0e-5;
    const T_MAX: f64 = 10.0;
    let mut s = CloseState {
        q: Vector3::new(chain.joint_limits[0][0], chain.joint_limits[1][0], chain.joint_limits[2][0]),
        qd: Vector3::zeros(),
        phi: 0.0,
        phid: 0.0,
    };
    let mut t = 0.0;
    while t < T_MAX {
        let k1 = close_derivative(chain, drive, motor_torque, &s);
        let k2 = close_derivative(chain, drive, motor_torque, &advance(&s, &k1, 0.5 * H));
        let k3 = close_derivative(chain, drive, motor_torque, &advance(&s, &k2, 0.5 * H));
        let k4 = close_derivative(chain, drive, motor_torque, &advance(&s, &k3, H));
        let mut next = s;
        next.q += (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (H / 6.0);
        next.qd += (k1.qd + k2.qd * 2.0 + k3.qd * 2.0 + k4.qd) * (H / 6.0);
        next.phi += (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi) * (H / 6.0);
        next.phid += (k1.phid + 2.0 * k2.phid + 2.0 * k3.phid + k4.phid) * (H / 6.0);
        for j in 0..3 {
            let [lo, hi] = chain.joint_limits[j];
            if next.q[j] <= lo {
                next.q[j] = lo;
                next.qd[j] = next.qd[j].max(0.0);
            } else if next.q[j] >= hi {
                next.q[j] = hi;
                next.qd[j] = next.qd[j].min(0.0);
            }
        }
        let prev_q = s.q;
        s = next;
        t += H;
        if (0..3).all(|j| s.q[j] >= target[j]) {
            // Interpolate the crossing of the last joint to arrive.
            let frac = (0..3)
                .map(|j| {
                    let span = s.q[j] - prev_q[j];
                    if prev_q[j] >= target[j] || span <= 0.0 {
                        0.0
                    } else {
                        (target[j] - prev_q[j]) / span
                    }
                })
                .fold(0.0, f64::max);
            return Ok(t - H + frac * H);
        }
        if !s.q.iter().all(|v| v.is_finite()) {
            return Err(FingerError::SolverFailed { motor_deg: s.phi.to_degrees() });
        }
    }
    let j = (0..3).find(|&j| s.q[j] < target[j]).unwrap_or(0);
    Err(FingerError::Unreachable { joint: JOINT_NAMES[j], equilibrium: s.q[j], target: target[j] })
}
