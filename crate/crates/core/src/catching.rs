//! Closed-loop ball catching.
//!
//! A ball is released from the claw at `drop_height` above the palm. A
//! range sensor in the claw reports its distance at `sensor_rate` with
//! Gaussian noise and a fixed latency; the controller turns the sensed
//! height into a target aperture, the aperture into a motor angle through
//! the finger's quasi-static aperture map, and drives the motor with a
//! saturated proportional law on encoder feedback.
//!
//! A trial counts as a catch when
//! * the hand stays wider than the ball while the ball centre is more than
//!   one diameter above the fingertip plane,
//! * the aperture is at most the ball diameter when the centre crosses the
//!   fingertip plane, and
//! * the hand is within `arrest_tolerance` of fully closed no later than
//!   `arrest_window` after that crossing.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finger::{quasi_static_sweep, FingerChain, FingerError, TendonDrive};
use crate::rng::{substream, substream_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatchError {
    #[error("invalid catch configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least one trial")]
    NoTrials,
    #[error(transparent)]
    Finger(#[from] FingerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatchConfig {
    /// Ball height below which the hand starts closing, m.
    pub y_t: f64,
    /// Ball height at which the hand reaches `d_c` and then closes fully.
    pub y_c: f64,
    /// Open aperture, m.
    pub d_s: f64,
    pub d_c: f64,
    /// Fully closed aperture, m.
    pub d_u: f64,
    /// PWM counts per degree of position error.
    pub gain: f64,
    pub pwm_max: f64,
    /// Standard deviation of the range reading, m.
    pub sensor_noise: f64,
    pub sensor_rate: f64,
    pub sensor_latency: f64,
    /// Readings closer than this are discarded, m.
    pub sensor_min_range: f64,
    pub control_rate: f64,
    /// Output-shaft speed at full PWM, rad/s.
    pub motor_max_speed: f64,
    /// Encoder counts per output revolution.
    pub encoder_cpr: f64,
    pub ball_diameter: f64,
    pub ball_mass: f64,
    pub drop_height: f64,
    /// Height of the fingertip plane above the palm, m.
    pub fingertip_height: f64,
    pub arrest_window: f64,
    pub arrest_tolerance: f64,
    /// Largest motor angle of the aperture map, deg.
    pub motor_range_deg: f64,
    pub gravity: f64,
}

impl Default for CatchConfig {
    fn default() -> Self {
        let map = default_map();
        Self {
            y_t: 0.5,
            y_c: 0.15,
            d_s: map.open(),
            d_c: 0.11,
            d_u: map.closed(),
            gain: 20.0,
            pwm_max: 255.0,
            sensor_noise: 5e-3,
            sensor_rate: 50.0,
            sensor_latency: 0.02,
            sensor_min_range: 0.04,
            control_rate: 1000.0,
            motor_max_speed: 35.0,
            encoder_cpr: 64.0 * 30.0,
            ball_diameter: 0.10,
            ball_mass: 0.01,
            drop_height: 0.6,
            fingertip_height: 0.02,
            arrest_window: 0.05,
            arrest_tolerance: 1e-3,
            motor_range_deg: 270.0,
            gravity: 9.81,
        }
    }
}

impl CatchConfig {
    /// Noiseless sensor with no latency.
    pub fn ideal_sensor(self) -> Self {
        Self { sensor_noise: 0.0, sensor_latency: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<(), CatchError> {
        let bad = |m: &str| Err(CatchError::InvalidConfig(m.to_string()));
        let all_finite = [
            self.y_t, self.y_c, self.d_s, self.d_c, self.d_u, self.gain, self.pwm_max, self.sensor_noise,
            self.sensor_rate, self.sensor_latency, self.sensor_min_range, self.control_rate, self.motor_max_speed,
            self.encoder_cpr, self.ball_diameter, self.ball_mass, self.drop_height, self.fingertip_height,
            self.arrest_window, self.arrest_tolerance, self.motor_range_deg, self.gravity,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("all values must be finite");
        }
        if !(self.y_t > self.y_c && self.y_c > 0.0) {
            return bad("need y_t > y_c > 0");
        }
        if !(self.d_s > self.d_c && self.d_c > self.d_u && self.d_u >= 0.0) {
            return bad("need d_s > d_c > d_u >= 0");
        }
        if !(self.gain > 0.0 && self.pwm_max > 0.0) {
            return bad("gain and pwm_max must be positive");
        }
        if !(self.sensor_rate > 0.0 && self.control_rate > 0.0) {
            return bad("sensor and control rates must be positive");
        }
        if self.sensor_noise < 0.0 || self.sensor_latency < 0.0 || self.sensor_min_range < 0.0 {
            return bad("sensor noise, latency and minimum range must be non-negative");
        }
        if self.motor_max_speed < 0.0 {
            return bad("motor_max_speed must be non-negative");
        }
        if !(self.encoder_cpr >= 1.0) {
            return bad("encoder_cpr must be at least 1");
        }
        if !(self.ball_diameter > 0.0 && self.ball_mass > 0.0 && self.gravity > 0.0) {
            return bad("ball diameter, ball mass and gravity must be positive");
        }
        if !(self.drop_height > self.fingertip_height) {
            return bad("drop_height must be above the fingertip plane");
        }
        if !(self.arrest_window >= 0.0 && self.arrest_tolerance >= 0.0) {
            return bad("arrest window and tolerance must be non-negative");
        }
        if !(self.motor_range_deg > 0.0) {
            return bad("motor_range_deg must be positive");
        }
        Ok(())
    }

    /// Configuration problems that do not stop a trial from running.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let first_valid = self.drop_height - self.sensor_min_range;
        if self.y_t > first_valid {
            out.push(format!(
                "y_t = {} m is above the highest height the sensor can report ({first_valid} m); the hand never holds open",
                self.y_t
            ));
        }
        out
    }

    pub fn encoder_resolution(&self) -> f64 {
        2.0 * PI / self.encoder_cpr
    }
}

/// Aperture as a function of motor angle, from the quasi-static finger
/// model. Only the monotone non-increasing part of the curve is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMap {
    motor: Vec<f64>,
    aperture: Vec<f64>,
}

impl ApertureMap {
    pub fn from_finger(chain: &FingerChain, drive: &TendonDrive, motor_range_deg: f64) -> Result<Self, CatchError> {
        if !(motor_range_deg > 0.0 && motor_range_deg.is_finite()) {
            return Err(CatchError::InvalidConfig("motor_range_deg must be positive".into()));
        }
        let n = motor_range_deg.ceil() as usize;
        let degs: Vec<f64> = (0..=n).map(|k| motor_range_deg * k as f64 / n as f64).collect();
        let rec = quasi_static_sweep(chain, drive, &degs)?;
        let last = rec
            .fingertip_distance
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let motor = degs[..=last].iter().map(|d| d.to_radians()).collect();
        let mut aperture = rec.fingertip_distance[..=last].to_vec();
        for k in 1..aperture.len() {
            aperture[k] = aperture[k].min(aperture[k - 1]);
        }
        Ok(Self { motor, aperture })
    }

    pub fn open(&self) -> f64 {
        self.aperture[0]
    }

    pub fn closed(&self) -> f64 {
        *self.aperture.last().unwrap()
    }

    pub fn max_angle(&self) -> f64 {
        *self.motor.last().unwrap()
    }

    pub fn aperture_at(&self, angle: f64) -> f64 {
        let m = &self.motor;
        if angle <= m[0] {
            return self.aperture[0];
        }
        if angle >= self.max_angle() {
            return self.closed();
        }
        let i = m.partition_point(|&x| x <= angle);
        let f = (angle - m[i - 1]) / (m[i] - m[i - 1]);
        self.aperture[i - 1] + f * (self.aperture[i] - self.aperture[i - 1])
    }

    /// Smallest motor angle whose aperture is at most `d`.
    pub fn angle_for(&self, d: f64) -> f64 {
        if d >= self.open() {
            return self.motor[0];
        }
        if d <= self.closed() {
            return self.max_angle();
        }
        let i = self.aperture.partition_point(|&a| a > d);
        let (a0, a1) = (self.aperture[i - 1], self.aperture[i]);
        let f = if a0 > a1 { (a0 - d) / (a0 - a1) } else { 1.0 };
        self.motor[i - 1] + f * (self.motor[i] - self.motor[i - 1])
    }
}

fn default_map() -> &'static ApertureMap {
    static MAP: OnceLock<ApertureMap> = OnceLock::new();
    MAP.get_or_init(|| {
        ApertureMap::from_finger(&FingerChain::default(), &TendonDrive::default(), 270.0)
            .expect("default finger produces an aperture map")
    })
}

/// Target aperture for a sensed ball height.
pub fn controller_target(ball_height: f64, cfg: &CatchConfig) -> f64 {
    if ball_height > cfg.y_t {
        cfg.d_s
    } else if ball_height >= cfg.y_c {
        cfg.d_c + (cfg.d_s - cfg.d_c) * (ball_height - cfg.y_c) / (cfg.y_t - cfg.y_c)
    } else {
        cfg.d_u
    }
}

/// Encoder reading of `angle`, rounded to the nearest count.
pub fn quantize(angle: f64, cfg: &CatchConfig) -> f64 {
    let res = cfg.encoder_resolution();
    (angle / res).round() * res
}

/// One control period of the motor. The error is taken against the encoder
/// reading; the step never carries the reading past the target.
pub fn motor_step(current_angle: f64, target_angle: f64, cfg: &CatchConfig, dt: f64) -> f64 {
    let feedback = quantize(current_angle, cfg);
    if feedback == quantize(target_angle, cfg) {
        return current_angle;
    }
    let error = target_angle - feedback;
    let pwm = (cfg.gain * error.abs().to_degrees()).clamp(0.0, cfg.pwm_max);
    let speed = cfg.motor_max_speed * pwm / cfg.pwm_max;
    current_angle + error.signum() * (speed * dt).min(error.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub event: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub caught: bool,
    /// Release-to-closed time (aperture within tolerance of `d_u`), if the
    /// hand closed before the trial ended.
    pub close_time: Option<f64>,
    pub aperture_at_pass: f64,
    pub premature: bool,
    pub events: Vec<Event>,
}

impl TrialResult {
    pub fn write_events_jsonl<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn run_trial(cfg: &CatchConfig, seed: u64) -> Result<TrialResult, CatchError> {
    let map = if cfg.motor_range_deg == 270.0 {
        default_map().clone()
    } else {
        ApertureMap::from_finger(&FingerChain::default(), &TendonDrive::default(), cfg.motor_range_deg)?
    };
    run_trial_with_map(cfg, &map, seed)
}

/// [`run_trial`] with an explicit aperture map.
pub fn run_trial_with_map(cfg: &CatchConfig, map: &ApertureMap, seed: u64) -> Result<TrialResult, CatchError> {
    cfg.validate()?;
    let mut rng = substream(seed, 0);
    let g = cfg.gravity;
    let h0 = cfg.drop_height;
    let dt = 1.0 / cfg.control_rate;
    let sensor_period = 1.0 / cfg.sensor_rate;
    let height = |t: f64| h0 - 0.5 * g * t * t;
    let t_pass = (2.0 * (h0 - cfg.fingertip_height) / g).sqrt();
    let t_end = t_pass + cfg.arrest_window + 2.0 * dt;
    let noise = Normal::new(0.0, cfg.sensor_noise.max(f64::MIN_POSITIVE)).expect("valid sigma");

    // The claw is not synchronised to the sensor clock.
    let phase = rng.random_range(0.0..sensor_period);
    let mut readings = Vec::new();
    let mut ts = phase;
    while ts <= t_end {
        let n = if cfg.sensor_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        let range = h0 - height(ts) + n;
        if range >= cfg.sensor_min_range {
            readings.push((ts + cfg.sensor_latency, h0 - range));
        }
        ts += sensor_period;
    }

    let mut events = vec![Event { t: 0.0, event: "release", value: h0 }];
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    let mut next_reading = 0;
    let mut sensed = f64::INFINITY;
    let mut angle = map.angle_for(cfg.d_s);
    let mut regime = "open";
    let mut premature = false;
    let mut aperture_at_pass = None;
    let mut close_time = None;
    let mut arrested = false;

    let mut step = 0u64;
    loop {
        let t = step as f64 * dt;
        if t > t_end {
            break;
        }
        while next_reading < readings.len() && readings[next_reading].0 <= t + 1e-12 {
            sensed = readings[next_reading].1;
            events.push(Event { t: readings[next_reading].0, event: "sensor", value: sensed });
            next_reading += 1;
        }
        let target = controller_target(sensed, cfg);
        let now = if sensed > cfg.y_t {
            "open"
        } else if sensed >= cfg.y_c {
            "track"
        } else {
            "close"
        };
        if now != regime {
            regime = now;
            events.push(Event { t, event: now, value: target });
        }
        angle = motor_step(angle, map.angle_for(target), cfg, dt);
        step += 1;
        let t = step as f64 * dt;
        let y = height(t);
        let aperture = map.aperture_at(angle);

        if !premature && y > cfg.fingertip_height + cfg.ball_diameter && aperture <= cfg.ball_diameter {
            premature = true;
            events.push(Event { t, event: "premature", value: y });
        }
        if aperture_at_pass.is_none() && y <= cfg.fingertip_height {
            aperture_at_pass = Some(aperture);
            events.push(Event { t, event: "pass", value: aperture });
        }
        if close_time.is_none() && aperture <= cfg.d_u + cfg.arrest_tolerance {
            close_time = Some(t);
            events.push(Event { t, event: "closed", value: aperture });
            if aperture_at_pass.is_none() || t <= t_pass + cfg.arrest_window + 1e-12 {
                arrested = true;
            }
        }
        if aperture_at_pass.is_some() && close_time.is_some() {
            break;
        }
    }
    let aperture_at_pass = aperture_at_pass.unwrap_or_else(|| map.aperture_at(angle));
    let caught = !premature && aperture_at_pass <= cfg.ball_diameter && arrested;
    let t_last = events.last().map_or(0.0, |e| e.t);
    events.push(Event { t: t_last, event: "result", value: if caught { 1.0 } else { 0.0 } });
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(TrialResult { caught, close_time, aperture_at_pass, premature, events })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub rate: f64,
    pub caught: usize,
    pub trials: Vec<TrialResult>,
}

impl CampaignResult {
    pub fn write_trials_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "caught", "close_time_s", "aperture_at_pass_m", "premature"])?;
        for (i, r) in self.trials.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.caught.to_string(),
                r.close_time.map(|t| t.to_string()).unwrap_or_default(),
                r.aperture_at_pass.to_string(),
                r.premature.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One parsed row of a trials CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub caught: bool,
    pub close_time_s: Option<f64>,
    pub aperture_at_pass_m: f64,
    pub premature: bool,
}

pub fn read_trials_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<TrialRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Seed of trial `index` in a campaign seeded with `seed`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    substream_seed(seed, index as u64)
}

pub fn run_campaign(cfg: &CatchConfig, n_trials: usize, seed: u64) -> Result<CampaignResult, CatchError> {
    let map = if cfg.motor_range_deg == 270.0 {
        default_map().clone()
    } else {
        ApertureMap::from_finger(&FingerChain::default(), &TendonDrive::default(), cfg.motor_range_deg)?
    };
    run_campaign_with_map(cfg, &map, n_trials, seed)
}

pub fn run_campaign_with_map(cfg: &CatchConfig, map: &ApertureMap, n_trials: usize, seed: u64) -> Result<CampaignResult, CatchError> {
    if n_trials == 0 {
        return Err(CatchError::NoTrials);
    }
    cfg.validate()?;
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial_with_map(cfg, map, trial_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let caught = trials.iter().filter(|r| r.caught).count();
    Ok(CampaignResult { rate: caught as f64 / n_trials as f64, caught, trials })
}
