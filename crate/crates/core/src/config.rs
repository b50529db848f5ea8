//! TOML configuration with unit-suffixed keys and per-value provenance.
//!
//! Every value has a default. A file may override any subset; keys ending
//! in `_mm`, `_cP` or `_deg` are converted to metres, pascal-seconds and
//! radians when the unsuffixed key is a known field. Unknown keys are
//! errors. [`ToolConfig::to_toml_string`] writes the canonical form (all
//! keys, SI units, provenance as trailing comments), which loads back to the
//! same configuration and saves to the same bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::catching::CatchConfig;
use crate::damper::{DamperGeometry, FluidSpec, DEFAULT_PRINT_TOLERANCE, HUMAN_DAMPING_BAND};
use crate::finger::{FingerChain, TendonDrive};
use crate::fit::{FitMode, FitSpec};
use crate::metrics::{DEFAULT_HOLD_TIME, DEFAULT_REST_BAND};
use crate::pendulum::{PendulumParams, DEFAULT_RELEASE_ANGLE, DEFAULT_SAMPLE_INTERVAL};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{0}` is given both with and without a unit suffix")]
    DuplicateKey(String),
    #[error("`{key}`: {message}")]
    BadValue { key: String, message: String },
}

/// Where a configured value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Stated in the published design or measurements.
    Published,
    /// Plausible value chosen without a published source.
    Assumed,
    /// Tuned so the models reproduce published behaviour.
    Calibrated,
    /// Set in a configuration file.
    File,
    /// Set on the command line.
    Flag,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Published => "published",
            Provenance::Assumed => "assumed",
            Provenance::Calibrated => "calibrated",
            Provenance::File => "file",
            Provenance::Flag => "flag",
        })
    }
}

/// Sweep grid and human damping band for the damper design commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub print_tolerance: f64,
    pub wall_min: f64,
    pub wall_max: f64,
    pub channel_min: f64,
    pub channel_max: f64,
    pub steps: usize,
    pub target_damping_lo: f64,
    pub target_damping_hi: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            print_tolerance: DEFAULT_PRINT_TOLERANCE,
            wall_min: 0.1e-3,
            wall_max: 1.5e-3,
            channel_min: 0.1e-3,
            channel_max: 1.5e-3,
            steps: 15,
            target_damping_lo: HUMAN_DAMPING_BAND.0,
            target_damping_hi: HUMAN_DAMPING_BAND.1,
        }
    }
}

/// Initial condition, duration and metric settings for pendulum runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumRun {
    pub theta0: f64,
    pub omega0: f64,
    pub duration: f64,
    pub sample_interval: f64,
    pub rest_band: f64,
    pub hold_time: f64,
}

impl Default for PendulumRun {
    fn default() -> Self {
        Self {
            theta0: DEFAULT_RELEASE_ANGLE,
            omega0: 0.0,
            duration: 8.0,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            rest_band: DEFAULT_REST_BAND,
            hold_time: DEFAULT_HOLD_TIME,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSettings {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self { resamples: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSettings {
    pub trials: usize,
    pub seed: u64,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        Self { trials: 22, seed: 0 }
    }
}

/// Complete resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolConfig {
    pub damper: DamperGeometry,
    pub sweep: SweepSettings,
    pub fluid: FluidSpec,
    pub pendulum: PendulumParams,
    pub run: PendulumRun,
    pub fit: FitSpec,
    pub bootstrap: BootstrapSettings,
    pub finger: FingerChain,
    pub drive: TendonDrive,
    pub catch: CatchConfig,
    pub campaign: CampaignSettings,
    provenance: BTreeMap<String, Provenance>,
}

/// Table paths in canonical order.
const SECTIONS: [&str; 11] = [
    "damper",
    "damper.sweep",
    "fluid",
    "pendulum",
    "pendulum.run",
    "fit",
    "fit.bootstrap",
    "finger",
    "finger.drive",
    "catch",
    "catch.campaign",
];

fn default_provenance(key: &str) -> Provenance {
    use Provenance::*;
    match key {
        "damper.n_fins" | "damper.wall_width" | "damper.channel_width" => Published,
        "damper.fin_length" | "damper.inner_radius" | "damper.outer_radius_bound" => Calibrated,
        "damper.sweep.target_damping_lo" | "damper.sweep.target_damping_hi" => Published,
        "pendulum.weight_mass" | "pendulum.mu_k" | "pendulum.mu_d" | "pendulum.damping_b" | "pendulum.gravity" => Published,
        "pendulum.run.sample_interval" => Published,
        k if k.starts_with("pendulum.") && !k.starts_with("pendulum.run.") => Calibrated,
        "fit.bootstrap.resamples" => Published,
        "finger.joint_stiffness" | "finger.joint_damping" => Published,
        "finger.joint_coulomb" | "finger.tendon_moment_arms" => Calibrated,
        "finger.drive.series_stiffness" | "finger.drive.pulley_radius" => Published,
        "finger.drive.no_load_speed" | "finger.drive.motor_inertia" => Calibrated,
        "catch.gain" | "catch.pwm_max" | "catch.sensor_noise" | "catch.encoder_cpr" | "catch.sensor_min_range" => Published,
        "catch.d_s" | "catch.d_u" | "catch.y_c" | "catch.d_c" | "catch.ball_diameter" | "catch.drop_height"
        | "catch.fingertip_height" | "catch.motor_max_speed" => Calibrated,
        "catch.campaign.trials" => Published,
        _ => Assumed,
    }
}

fn to_table<T: Serialize>(value: &T) -> Table {
    match Value::try_from(value).expect("config structs serialise to TOML") {
        Value::Table(t) => t,
        _ => unreachable!("config structs are tables"),
    }
}

fn from_table<T: DeserializeOwned>(path: &str, table: Table) -> Result<T, ConfigError> {
    Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::BadValue {
        key: path.to_string(),
        message: e.message().to_string(),
    })
}

/// Scale factor and transform for a unit suffix.
fn convert(value: &Value, suffix: &str, key: &str) -> Result<Value, ConfigError> {
    let f = |x: f64| -> f64 {
        match suffix {
            "mm" => x * 1e-3,
            "cP" => x * 1e-3,
            "deg" => x.to_radians(),
            _ => unreachable!(),
        }
    };
    match value {
        Value::Float(x) => Ok(Value::Float(f(*x))),
        Value::Integer(i) => Ok(Value::Float(f(*i as f64))),
        Value::Array(items) => Ok(Value::Array(
            items.iter().map(|v| convert(v, suffix, key)).collect::<Result<_, _>>()?,
        )),
        _ => Err(ConfigError::BadValue { key: key.to_string(), message: "unit-suffixed values must be numbers".into() }),
    }
}

/// Field name and SI value for `key`, stripping a unit suffix when the bare
/// key names a field.
fn resolve_key(table: &Table, key: &str, value: &Value, path: &str) -> Result<(String, Value), ConfigError> {
    if table.contains_key(key) {
        return Ok((key.to_string(), value.clone()));
    }
    for suffix in ["mm", "cP", "deg"] {
        if let Some(base) = key.strip_suffix(&format!("_{suffix}")) {
            if table.contains_key(base) {
                return Ok((base.to_string(), convert(value, suffix, path)?));
            }
        }
    }
    Err(ConfigError::UnknownKey(path.to_string()))
}

impl Default for ToolConfig {
    fn default() -> Self {
        let mut cfg = Self {
            damper: DamperGeometry::default(),
            sweep: SweepSettings::default(),
            fluid: FluidSpec::default(),
            pendulum: PendulumParams::default(),
            run: PendulumRun::default(),
            fit: FitSpec::for_mode(FitMode::Damped),
            bootstrap: BootstrapSettings::default(),
            finger: FingerChain::default(),
            drive: TendonDrive::default(),
            catch: CatchConfig::default(),
            campaign: CampaignSettings::default(),
            provenance: BTreeMap::new(),
        };
        let tables = cfg.tables();
        for (section, table) in SECTIONS.iter().zip(&tables) {
            for key in table.keys() {
                let full = format!("{section}.{key}");
                let p = default_provenance(&full);
                cfg.provenance.insert(full, p);
            }
        }
        cfg
    }
}

impl ToolConfig {
    fn tables(&self) -> Vec<Table> {
        vec![
            to_table(&self.damper),
            to_table(&self.sweep),
            to_table(&self.fluid),
            to_table(&self.pendulum),
            to_table(&self.run),
            to_table(&self.fit),
            to_table(&self.bootstrap),
            to_table(&self.finger),
            to_table(&self.drive),
            to_table(&self.catch),
            to_table(&self.campaign),
        ]
    }

    fn set_tables(&mut self, tables: Vec<Table>) -> Result<(), ConfigError> {
        let mut it = SECTIONS.iter().zip(tables);
        let mut next = || it.next().expect("one table per section");
        let (p, t) = next();
        self.damper = from_table(p, t)?;
        let (p, t) = next();
        self.sweep = from_table(p, t)?;
        let (p, t) = next();
        self.fluid = from_table(p, t)?;
        let (p, t) = next();
        self.pendulum = from_table(p, t)?;
        let (p, t) = next();
        self.run = from_table(p, t)?;
        let (p, t) = next();
        self.fit = from_table(p, t)?;
        let (p, t) = next();
        self.bootstrap = from_table(p, t)?;
        let (p, t) = next();
        self.finger = from_table(p, t)?;
        let (p, t) = next();
        self.drive = from_table(p, t)?;
        let (p, t) = next();
        self.catch = from_table(p, t)?;
        let (p, t) = next();
        self.campaign = from_table(p, t)?;
        Ok(())
    }

    pub fn provenance(&self, key: &str) -> Option<Provenance> {
        self.provenance.get(key).copied()
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Defaults overridden by the values in `text`.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let doc: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut cfg = Self::default();
        let mut tables = cfg.tables();
        let mut seen = Vec::new();
        Self::merge(&doc, "", &mut tables, &mut seen)?;
        cfg.set_tables(tables)?;
        if seen.iter().any(|k| k == "fit.mode") && !seen.iter().any(|k| k == "fit.free_params") {
            cfg.fit.free_params = FitSpec::for_mode(cfg.fit.mode).free_params;
        }
        for key in seen {
            cfg.provenance.insert(key, Provenance::File);
        }
        Ok(cfg)
    }

    fn merge(doc: &Table, prefix: &str, tables: &mut [Table], seen: &mut Vec<String>) -> Result<(), ConfigError> {
        let section = SECTIONS.iter().position(|s| *s == prefix);
        for (key, value) in doc {
            let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
            if let Value::Table(sub) = value {
                if SECTIONS.contains(&path.as_str()) {
                    Self::merge(sub, &path, tables, seen)?;
                    continue;
                }
            }
            let Some(idx) = section else {
                return Err(ConfigError::UnknownKey(path));
            };
            let table = &mut tables[idx];
            let (field, converted) = resolve_key(table, key, value, &path)?;
            let full = format!("{prefix}.{field}");
            if seen.contains(&full) {
                return Err(ConfigError::DuplicateKey(full));
            }
            seen.push(full);
            table.insert(field, converted);
        }
        Ok(())
    }

    /// Override one value, e.g. `set("pendulum.run.theta0_deg", Value::Float(90.0))`.
    /// Unit suffixes are converted as in files. Changing `fit.mode` also
    /// selects that mode's free parameters.
    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        let (section, name) = key.rsplit_once('.').ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        let idx = SECTIONS
            .iter()
            .position(|s| *s == section)
            .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        let mut tables = self.tables();
        let (field, converted) = resolve_key(&tables[idx], name, &value, key)?;
        tables[idx].insert(field.clone(), converted);
        self.set_tables(tables)?;
        let full = format!("{section}.{field}");
        if full == "fit.mode" {
            self.fit.free_params = FitSpec::for_mode(self.fit.mode).free_params;
        }
        self.provenance.insert(full, Provenance::Flag);
        Ok(())
    }

    /// [`set`](Self::set) from `key=value` text, where the value is written
    /// as in a config file; bare words are taken as strings.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax(format!("expected key=value, got `{assignment}`")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").expect("parsed table has the key"),
            Err(_) => Value::String(raw.to_string()),
        };
        self.set(key, value)
    }

    /// Canonical TOML with every key in SI units.
    pub fn to_toml_string(&self) -> String {
        self.render(false)
    }

    /// Canonical TOML with each value's provenance as a trailing comment.
    pub fn annotated(&self) -> String {
        self.render(true)
    }

    fn render(&self, provenance: bool) -> String {
        let mut out = String::new();
        for (section, table) in SECTIONS.iter().zip(self.tables()) {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{section}]\n"));
            for (key, value) in &table {
                out.push_str(&format!("{key} = {value}"));
                if provenance {
                    let p = self.provenance(&format!("{section}.{key}")).unwrap_or(Provenance::Assumed);
                    out.push_str(&format!(" # {p}"));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_toml_string()).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
