//! Import of point-mass tracks exported by video tracking software.
//!
//! Accepted dialect: a CSV file whose first row names the columns and whose
//! remaining rows hold numbers, with a time column and the x and y position
//! of the tracked mass (default names `t`, `x`, `y`, with y pointing up).
//! Rows whose position cells are empty (frames where tracking was lost) are
//! skipped. The angle is measured from straight up about the pivot, so a
//! mass hanging below the pivot reads π. The first sample lies in [0, 2π)
//! and later samples are unwrapped to be continuous with it.

use std::f64::consts::PI;
use std::io::Read;

use thiserror::Error;

use crate::trajectory::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{value}` as a number")]
    BadNumber { row: usize, value: String },
    #[error("row {row}: time does not increase")]
    NonMonotonic { row: usize },
    #[error("row {row}: sample coincides with the pivot")]
    AtPivot { row: usize },
    #[error("need at least two tracked samples, found {0}")]
    TooShort(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Header names for the time and position columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub t: String,
    pub x: String,
    pub y: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self { t: "t".into(), x: "x".into(), y: "y".into() }
    }
}

/// Relative deviation from the median step above which samples are
/// resampled onto a uniform grid.
pub const MAX_JITTER: f64 = 0.01;

/// Read a track and convert it to a uniformly sampled angle series.
pub fn ingest_tracker<R: Read>(input: R, pivot: (f64, f64), columns: &ColumnMap) -> Result<Trajectory, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let (ti, xi, yi) = (find(&columns.t)?, find(&columns.x)?, find(&columns.y)?);

    let mut times = Vec::new();
    let mut angles: Vec<f64> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // header is row 1
        let row = k + 2;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        if cell(xi).is_empty() || cell(yi).is_empty() {
            continue;
        }
        let num = |i: usize| {
            cell(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::BadNumber { row, value: cell(i).to_string() })
        };
        let (t, x, y) = (num(ti)?, num(xi)?, num(yi)?);
        if times.last().is_some_and(|&prev| t <= prev) {
            return Err(IngestError::NonMonotonic { row });
        }
        let (dx, dy) = (x - pivot.0, y - pivot.1);
        if dx == 0.0 && dy == 0.0 {
            return Err(IngestError::AtPivot { row });
        }
        let mut theta = dx.atan2(dy);
        match angles.last() {
            Some(&prev) => theta += (2.0 * PI) * ((prev - theta) / (2.0 * PI)).round(),
            None => theta = theta.rem_euclid(2.0 * PI),
        }
        times.push(t);
        angles.push(theta);
    }
    if times.len() < 2 {
        return Err(IngestError::TooShort(times.len()));
    }
    Ok(uniform(&times, &angles)?)
}

fn uniform(times: &[f64], angles: &[f64]) -> Result<Trajectory, TrajectoryError> {
    let mut steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let nominal = steps[(steps.len() - 1) / 2];
    let jitter = steps.iter().map(|s| (s - nominal).abs()).fold(0.0, f64::max) / nominal;
    let t0 = times[0];
    if jitter <= MAX_JITTER {
        let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
        return Trajectory::new(t0, dt, angles.to_vec(), None);
    }
    log::info!("tracker timestamps jitter by {:.1}%, resampling at {nominal} s", jitter * 100.0);
    let n = ((times[times.len() - 1] - t0) / nominal + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let t = t0 + k as f64 * nominal;
        while j + 2 < times.len() && times[j + 1] < t {
            j += 1;
        }
        let (ta, tb) = (times[j], times[j + 1]);
        let f = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        out.push(angles[j] + f * (angles[j + 1] - angles[j]));
    }
    Trajectory::new(t0, nominal, out, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str) -> Result<Trajectory, IngestError> {
        ingest_tracker(text.as_bytes(), (0.0, 0.0), &ColumnMap::default())
    }

    #[test]
    fn hanging_mass_reads_pi() {
        let tr = ingest("t,x,y\n0,0,-1\n0.1,0,-1\n0.2,0,-1\n").unwrap();
        for a in &tr.angles {
            assert!((a - PI).abs() < 1e-12);
        }
        assert!((tr.dt - 0.1).abs() < 1e-12);
    }

    #[test]
    fn angle_is_unwrapped_through_the_bottom() {
        let tr = ingest("t,x,y\n0,-0.01,-1\n1,0.01,-1\n2,0.02,-1\n").unwrap();
        assert!(tr.angles.iter().all(|a| *a > 3.0 && *a < 3.3));
        assert!(tr.angles[1] < tr.angles[0]);
    }

    #[test]
    fn errors_name_the_row_and_column() {
        assert!(matches!(ingest("t,x,z\n0,1,1\n"), Err(IngestError::MissingColumn(c)) if c == "y"));
        assert!(matches!(ingest("t,x,y\n0,0,-1\n0.2,0,-1\n0.1,0,-1\n"), Err(IngestError::NonMonotonic { row: 4 })));
        assert!(matches!(ingest("t,x,y\n0,0,-1\n1,a,-1\n"), Err(IngestError::BadNumber { row: 3, .. })));
    }

    #[test]
    fn blank_frames_are_skipped() {
        let tr = ingest("t,x,y\n0,0,-1\n0.1,,\n0.2,0,-1\n").unwrap();
        assert_eq!(tr.len(), 2);
    }

    #[test]
    fn jittered_timestamps_are_resampled() {
        let tr = ingest("t,x,y\n0,0,1\n0.1,1,0\n0.25,0,-1\n0.3,-1,0\n0.4,0,1\n").unwrap();
        assert!((tr.dt - 0.1).abs() < 1e-12);
        assert_eq!(tr.len(), 5);
        assert!((tr.angles[2] - (PI / 2.0 + 0.5 * PI * (0.1 / 0.15))).abs() < 1e-9);
    }

    #[test]
    fn column_map_override() {
        let cols = ColumnMap { t: "time".into(), x: "px".into(), y: "py".into() };
        let tr = ingest_tracker("time,px,py\n0,1,1\n1,1,1\n".as_bytes(), (0.0, 0.0), &cols).unwrap();
        assert!((tr.angles[0] - PI / 4.0).abs() < 1e-12);
    }
}
