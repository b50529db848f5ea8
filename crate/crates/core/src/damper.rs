//! Couette-flow model of the concentric-fin rotary damper.
//!
//! Each fin is a thin cylindrical shell of wall width `w` and length `L`
//! whose midline sits at radius `rho`. Fluid in the channels of width
//! `delta` on either side of the shell, and in the gap between the fin end
//! and the opposite base, is sheared when the joint turns. Under steady
//! circumferential Newtonian flow the resisting torque is `T = -mu G omega`
//! where the geometry factor `G` (m^3) is the sum over fins of
//!
//! ```text
//! G_i = 4 pi [ (rho - w/2 - delta)^2 (rho - w/2)^2 L / (delta (2 (rho - w/2) - delta))   medial
//!            + (rho + w/2 + delta)^2 (rho + w/2)^2 L / (delta (2 (rho + w/2) + delta))   lateral
//!            + ((rho + w/2)^4 - (rho - w/2)^4) / (8 delta) ]                           end
//! ```
//!
//! The innermost pin has no medial channel and the outermost fin has no
//! lateral channel.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum printable wall or channel width used by [`sweep_g`] unless the
/// caller overrides it.
pub const DEFAULT_PRINT_TOLERANCE: f64 = 0.3e-3;

/// Human finger joint damping band, N·m·s/rad.
pub const HUMAN_DAMPING_BAND: (f64, f64) = (8.1e-3, 14.2e-3);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DamperError {
    #[error("invalid damper geometry: {0}")]
    InvalidGeometry(String),
    #[error("fins intersect the joint wall: outermost surface at {outer_surface:.6e} m exceeds bound {bound:.6e} m")]
    WallIntersection { outer_surface: f64, bound: f64 },
    #[error("fin {fin} has a non-positive inner surface radius ({radius:.6e} m)")]
    NonPositiveRadius { fin: usize, radius: f64 },
    #[error("fin index {index} out of range for {n_fins} fins")]
    FinIndexOutOfRange { index: usize, n_fins: usize },
    #[error("viscosity must be positive and finite, got {0}")]
    InvalidViscosity(f64),
    #[error("target damping must be positive and finite, got {0}")]
    InvalidTarget(f64),
    #[error("sweep range `{0}` must be non-empty and strictly increasing")]
    InvalidRange(&'static str),
}

/// Concentric-fin damper dimensions, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamperGeometry {
    /// Number of interdigitated fins in the radial stack.
    pub n_fins: usize,
    /// Fin wall width `w`.
    pub wall_width: f64,
    /// Fluid channel width `delta`.
    pub channel_width: f64,
    /// Axial fin length `L`.
    pub fin_length: f64,
    /// Midline radius of the innermost pin.
    pub inner_radius: f64,
    /// Largest radius available inside the joint bore.
    pub outer_radius_bound: f64,
}

impl Default for DamperGeometry {
    /// Five fins, 0.5 mm walls and 0.4 mm channels. Fin length and pin radius
    /// are calibrated so that `G` is 60e-6 m^3, the value implied by the
    /// human damping band and the matching fluid viscosity range; the bore
    /// bound leaves 0.25 mm of clearance.
    fn default() -> Self {
        Self {
            n_fins: 5,
            wall_width: 0.5e-3,
            channel_width: 0.4e-3,
            fin_length: 3.5e-3,
            inner_radius: 3.0e-3,
            outer_radius_bound: 7.5e-3,
        }
    }
}

impl DamperGeometry {
    /// Midline radius of fin `index` under uniform packing.
    pub fn fin_radius(&self, index: usize) -> f64 {
        self.inner_radius + index as f64 * (self.wall_width + self.channel_width)
    }

    /// Radius of the outer surface of the channel beyond the outermost fin.
    pub fn outer_surface(&self) -> f64 {
        self.fin_radius(self.n_fins.saturating_sub(1)) + 0.5 * self.wall_width + self.channel_width
    }

    pub fn validate(&self) -> Result<(), DamperError> {
        if self.n_fins == 0 {
            return Err(DamperError::InvalidGeometry("n_fins must be at least 1".into()));
        }
        let positive = [
            ("wall_width", self.wall_width),
            ("channel_width", self.channel_width),
            ("inner_radius", self.inner_radius),
            ("outer_radius_bound", self.outer_radius_bound),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(DamperError::InvalidGeometry(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.fin_length.is_finite() && self.fin_length >= 0.0) {
            return Err(DamperError::InvalidGeometry(format!(
                "fin_length must be non-negative, got {}",
                self.fin_length
            )));
        }
        let inner_surface = self.inner_radius - 0.5 * self.wall_width;
        if inner_surface <= 0.0 {
            return Err(DamperError::NonPositiveRadius { fin: 0, radius: inner_surface });
        }
        let outer_surface = self.outer_surface();
        if outer_surface > self.outer_radius_bound {
            return Err(DamperError::WallIntersection {
                outer_surface,
                bound: self.outer_radius_bound,
            });
        }
        Ok(())
    }

    /// Every length (radii, widths, fin length, bound) multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            n_fins: self.n_fins,
            wall_width: self.wall_width * k,
            channel_width: self.channel_width * k,
            fin_length: self.fin_length * k,
            inner_radius: self.inner_radius * k,
            outer_radius_bound: self.outer_radius_bound * k,
        }
    }
}

/// Working fluid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidSpec {
    pub name: String,
    /// Dynamic viscosity, Pa·s.
    pub viscosity: f64,
}

impl Default for FluidSpec {
    /// Peanut butter, middle of the commonly quoted 150-250 Pa·s range.
    fn default() -> Self {
        Self { name: "peanut butter".into(), viscosity: 185.0 }
    }
}

impl FluidSpec {
    pub fn validate(&self) -> Result<(), DamperError> {
        if self.viscosity.is_finite() && self.viscosity > 0.0 {
            Ok(())
        } else {
            Err(DamperError::InvalidViscosity(self.viscosity))
        }
    }
}

/// Couette side-wall term for a fin surface at `surface` radius facing a
/// stationary wall at `surface ± delta`.
fn side_term(surface: f64, other: f64, delta: f64, length: f64) -> f64 {
    // (other^2 surface^2 L) / (delta (surface + other)); matches both
    // the medial (other = surface - delta) and lateral (other = surface + delta)
    // forms since other^2 - surface^2 = ±delta (surface + other).
    other * other * surface * surface * length / (delta * (surface + other))
}

/// Geometry factor of fin `fin_index`, m^3.
pub fn fin_g_factor(geometry: &DamperGeometry, fin_index: usize) -> Result<f64, DamperError> {
    geometry.validate()?;
    if fin_index >= geometry.n_fins {
        return Err(DamperError::FinIndexOutOfRange {
            index: fin_index,
            n_fins: geometry.n_fins,
        });
    }
    Ok(fin_g_unchecked(geometry, fin_index))
}

fn fin_g_unchecked(g: &DamperGeometry, i: usize) -> f64 {
    let rho = g.fin_radius(i);
    let half = 0.5 * g.wall_width;
    let delta = g.channel_width;
    let inner = rho - half;
    let outer = rho + half;

    let mut sum = (outer.powi(4) - inner.powi(4)) / (8.0 * delta);
    if i > 0 {
        sum += side_term(inner, inner - delta, delta, g.fin_length);
    }
    // A lone fin is the innermost pin: it keeps its lateral channel.
    if i + 1 < g.n_fins || g.n_fins == 1 {
        sum += side_term(outer, outer + delta, delta, g.fin_length);
    }
    4.0 * PI * sum
}

/// Total geometry factor: sum of [`fin_g_factor`] over the fin stack.
pub fn total_g_factor(geometry: &DamperGeometry) -> Result<f64, DamperError> {
    geometry.validate()?;
    Ok((0..geometry.n_fins).map(|i| fin_g_unchecked(geometry, i)).sum())
}

/// Damper torque `-mu G omega`, N·m.
pub fn damper_torque(mu: f64, geometry: &DamperGeometry, omega: f64) -> Result<f64, DamperError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(DamperError::InvalidViscosity(mu));
    }
    Ok(-mu * total_g_factor(geometry)? * omega)
}

/// Viscosity (Pa·s) needed to reach `target_damping` (N·m·s/rad).
pub fn required_viscosity(geometry: &DamperGeometry, target_damping: f64) -> Result<f64, DamperError> {
    if !(target_damping.is_finite() && target_damping > 0.0) {
        return Err(DamperError::InvalidTarget(target_damping));
    }
    Ok(target_damping / total_g_factor(geometry)?)
}

/// Classification of a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feasibility {
    Feasible,
    BelowPrintTolerance,
    WallIntersection,
}

impl Feasibility {
    /// Code written to the sweep CSV.
    pub fn code(self) -> &'static str {
        match self {
            Feasibility::Feasible => "ok",
            Feasibility::BelowPrintTolerance => "print_tol",
            Feasibility::WallIntersection => "intersect",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "ok" => Some(Feasibility::Feasible),
            "print_tol" => Some(Feasibility::BelowPrintTolerance),
            "intersect" => Some(Feasibility::WallIntersection),
            _ => None,
        }
    }
}

/// Result of a wall-width × channel-width sweep. Rows follow `wall_values`,
/// columns follow `channel_values`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub wall_values: Vec<f64>,
    pub channel_values: Vec<f64>,
    pub n_fins: usize,
    pub g_values: Vec<Vec<Option<f64>>>,
    pub feasibility: Vec<Vec<Feasibility>>,
}

impl SweepGrid {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["wall_m", "channel_m", "g_m3", "feasibility"])?;
        for (i, wall) in self.wall_values.iter().enumerate() {
            for (j, channel) in self.channel_values.iter().enumerate() {
                let g = self.g_values[i][j].map(|g| g.to_string()).unwrap_or_default();
                w.write_record([
                    wall.to_string(),
                    channel.to_string(),
                    g,
                    self.feasibility[i][j].code().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Feasible cell with the largest `G`, as `(wall, channel, G)`.
    pub fn best_feasible(&self) -> Option<(f64, f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None;
        for (i, row) in self.g_values.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                if let Some(g) = *g {
                    if best.is_none_or(|b| g > b.2) {
                        best = Some((self.wall_values[i], self.channel_values[j], g));
                    }
                }
            }
        }
        best
    }
}

/// One parsed row of a sweep CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepRow {
    pub wall_m: f64,
    pub channel_m: f64,
    pub g_m3: Option<f64>,
    pub feasibility: String,
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<SweepRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

fn strictly_increasing(xs: &[f64]) -> bool {
    !xs.is_empty() && xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] < w[1])
}

/// Evaluate [`total_g_factor`] over a wall × channel grid. `template`
/// supplies fin length, pin radius and bore bound. Infeasible cells are
/// reported, not treated as errors.
pub fn sweep_g(
    wall_values: &[f64],
    channel_values: &[f64],
    n_fins: usize,
    template: &DamperGeometry,
    print_tolerance: f64,
) -> Result<SweepGrid, DamperError> {
    if !strictly_increasing(wall_values) {
        return Err(DamperError::InvalidRange("wall_values"));
    }
    if !strictly_increasing(channel_values) {
        return Err(DamperError::InvalidRange("channel_values"));
    }
    let mut g_values = Vec::with_capacity(wall_values.len());
    let mut feasibility = Vec::with_capacity(wall_values.len());
    for &wall in wall_values {
        let mut g_row = Vec::with_capacity(channel_values.len());
        let mut f_row = Vec::with_capacity(channel_values.len());
        for &channel in channel_values {
            let (g, f) = if wall < print_tolerance || channel < print_tolerance {
                (None, Feasibility::BelowPrintTolerance)
            } else {
                let geometry = DamperGeometry {
                    n_fins,
                    wall_width: wall,
                    channel_width: channel,
                    ..*template
                };
                match total_g_factor(&geometry) {
                    Ok(g) => (Some(g), Feasibility::Feasible),
                    Err(DamperError::WallIntersection { .. } | DamperError::NonPositiveRadius { .. }) => {
                        (None, Feasibility::WallIntersection)
                    }
                    Err(e) => return Err(e),
                }
            };
            g_row.push(g);
            f_row.push(f);
        }
        g_values.push(g_row);
        feasibility.push(f_row);
    }
    Ok(SweepGrid {
        wall_values: wall_values.to_vec(),
        channel_values: channel_values.to_vec(),
        n_fins,
        g_values,
        feasibility,
    })
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
