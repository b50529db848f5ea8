//! Uniformly sampled angle-vs-time series and its CSV dialect
//! (`t,theta[,omega]`, SI units).

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Samples used to estimate the initial state of an unlabelled trajectory.
pub const INITIAL_STATE_WINDOW: usize = 12;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("sample interval must be positive and finite, got {0}")]
    BadInterval(f64),
    #[error("non-finite angle at sample {0}")]
    NonFinite(usize),
    #[error("omega has {got} samples but angles has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("row {row}: sample spacing deviates from the first interval by more than 1%; ingest the file to resample it")]
    NonUniform { row: usize },
    #[error("row {row}: timestamps must be strictly increasing")]
    NonMonotonic { row: usize },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Angle samples `angles[k]` taken at `t0 + k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub angles: Vec<f64>,
    pub omegas: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, angles: Vec<f64>, omegas: Option<Vec<f64>>) -> Result<Self, TrajectoryError> {
        let traj = Self { t0, dt, angles, omegas };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(TrajectoryError::BadInterval(self.dt));
        }
        if self.angles.len() < 2 {
            return Err(TrajectoryError::TooShort(self.angles.len()));
        }
        if let Some(k) = self.angles.iter().position(|a| !a.is_finite()) {
            return Err(TrajectoryError::NonFinite(k));
        }
        if let Some(w) = &self.omegas {
            if w.len() != self.angles.len() {
                return Err(TrajectoryError::LengthMismatch {
                    expected: self.angles.len(),
                    got: w.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Span from first to last sample.
    pub fn duration(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 * self.dt
    }

    /// Initial angular velocity: the recorded value if present, otherwise a
    /// forward difference of the first two samples.
    pub fn initial_omega(&self) -> f64 {
        match &self.omegas {
            Some(w) => w[0],
            None => (self.angles[1] - self.angles[0]) / self.dt,
        }
    }

    /// Initial angle and angular velocity. Recorded velocities are used as
    /// they are; otherwise both come from a least-squares quadratic through
    /// the first [`INITIAL_STATE_WINDOW`] samples, which keeps measurement
    /// noise from turning into a large velocity error.
    pub fn initial_state(&self) -> (f64, f64) {
        if let Some(w) = &self.omegas {
            return (self.angles[0], w[0]);
        }
        let k = self.len().min(INITIAL_STATE_WINDOW);
        if k < 3 {
            return (self.angles[0], self.initial_omega());
        }
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for (i, &y) in self.angles[..k].iter().enumerate() {
            let s = i as f64;
            let row = Vector3::new(1.0, s, s * s);
            ata += row * row.transpose();
            atb += row * y;
        }
        match ata.lu().solve(&atb) {
            Some(c) => (c[0], c[1] / self.dt),
            None => (self.angles[0], self.initial_omega()),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match &self.omegas {
            Some(omegas) => {
                w.write_record(["t", "theta", "omega"])?;
                for (k, (a, om)) in self.angles.iter().zip(omegas).enumerate() {
                    w.write_record([self.time(k).to_string(), a.to_string(), om.to_string()])?;
                }
            }
            None => {
                w.write_record(["t", "theta"])?;
                for (k, a) in self.angles.iter().enumerate() {
                    w.write_record([self.time(k).to_string(), a.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parse `t,theta[,omega]`. Sample spacing must already be uniform to
    /// within 1% of the first interval.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, TrajectoryError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        let col = |name: &'static str| headers.iter().position(|h| h == name);
        let ti = col("t").ok_or(TrajectoryError::MissingColumn("t"))?;
        let ai = col("theta").ok_or(TrajectoryError::MissingColumn("theta"))?;
        let wi = col("omega");

        let mut ts = Vec::new();
        let mut angles = Vec::new();
        let mut omegas = wi.map(|_| Vec::new());
        for record in reader.records() {
            let record = record?;
            let row = ts.len() + 2;
            let field = |i: usize| -> Result<f64, TrajectoryError> {
                let s = record.get(i).unwrap_or("");
                s.parse::<f64>().map_err(|_| {
                    TrajectoryError::Csv(csv::Error::from(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("row {row}: cannot parse `{s}` as a number"),
                    )))
                })
            };
            ts.push(field(ti)?);
            angles.push(field(ai)?);
            if let (Some(i), Some(w)) = (wi, omegas.as_mut()) {
                w.push(field(i)?);
            }
        }
        if ts.len() < 2 {
            return Err(TrajectoryError::TooShort(ts.len()));
        }
        let dt = ts[1] - ts[0];
        if !(dt > 0.0) {
            return Err(TrajectoryError::NonMonotonic { row: 3 });
        }
        for k in 1..ts.len() {
            let step = ts[k] - ts[k - 1];
            if !(step > 0.0) {
                return Err(TrajectoryError::NonMonotonic { row: k + 2 });
            }
            if (step - dt).abs() > 0.01 * dt {
                return Err(TrajectoryError::NonUniform { row: k + 2 });
            }
        }
        // Average spacing is less sensitive to round-off in written timestamps.
        let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        Trajectory::new(ts[0], dt, angles, omegas)
    }
}
