//! Run configuration: the JSON schema shared by every experiment.
//!
//! Physical values in a config file are tagged pairs `{value, unit}` and are
//! converted to internal units (angular rad/µs, µs, radians) at parse time,
//! so nothing downstream ever sees a unit again. The two MHz tags make the
//! frequency-versus-angular-frequency choice explicit instead of silent:
//! `MHz_angular_over_2pi` reads 3.5 as 2π·3.5 rad/µs, `MHz_plain` reads the
//! same number as 3.5 rad/µs.

use std::path::Path;

use hds::HdsError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "MHz_angular_over_2pi")]
    MhzAngularOver2Pi,
    #[serde(rename = "MHz_plain")]
    MhzPlain,
    #[serde(rename = "kHz_angular_over_2pi")]
    KhzAngularOver2Pi,
    #[serde(rename = "kHz_plain")]
    KhzPlain,
    #[serde(rename = "rad_per_us")]
    RadPerUs,
    #[serde(rename = "us")]
    Us,
    #[serde(rename = "deg")]
    Deg,
    #[serde(rename = "rad")]
    Rad,
    #[serde(rename = "dimensionless")]
    Dimensionless,
}

impl Unit {
    fn name(self) -> &'static str {
        match self {
            Unit::MhzAngularOver2Pi => "MHz_angular_over_2pi",
            Unit::MhzPlain => "MHz_plain",
            Unit::KhzAngularOver2Pi => "kHz_angular_over_2pi",
            Unit::KhzPlain => "kHz_plain",
            Unit::RadPerUs => "rad_per_us",
            Unit::Us => "us",
            Unit::Deg => "deg",
            Unit::Rad => "rad",
            Unit::Dimensionless => "dimensionless",
        }
    }
}

/// A number with an explicit unit tag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tagged {
    pub value: f64,
    pub unit: Unit,
}

impl Tagged {
    pub fn new(value: f64, unit: Unit) -> Self {
        Tagged { value, unit }
    }

    /// Angular frequency in rad/µs.
    pub fn angular(&self) -> Result<f64, HdsError> {
        match self.unit {
            Unit::MhzAngularOver2Pi => Ok(self.value * TAU),
            Unit::MhzPlain | Unit::RadPerUs => Ok(self.value),
            Unit::KhzAngularOver2Pi => Ok(self.value * TAU * 1e-3),
            Unit::KhzPlain => Ok(self.value * 1e-3),
            u => Err(self.wrong_kind(u, "an angular frequency")),
        }
    }

    /// Time in µs.
    pub fn time_us(&self) -> Result<f64, HdsError> {
        match self.unit {
            Unit::Us => Ok(self.value),
            u => Err(self.wrong_kind(u, "a time")),
        }
    }

    /// Plain angle in radians.
    pub fn radians(&self) -> Result<f64, HdsError> {
        match self.unit {
            Unit::Deg => Ok(self.value.to_radians()),
            Unit::Rad => Ok(self.value),
            u => Err(self.wrong_kind(u, "an angle")),
        }
    }

    /// Dimensionless ratio.
    pub fn ratio(&self) -> Result<f64, HdsError> {
        match self.unit {
            Unit::Dimensionless => Ok(self.value),
            u => Err(self.wrong_kind(u, "a dimensionless ratio")),
        }
    }

    fn wrong_kind(&self, u: Unit, wanted: &str) -> HdsError {
        HdsError::Config(format!(
            "unit '{}' on value {} where {wanted} is required",
            u.name(),
            self.value
        ))
    }
}

/// Shorthand constructors for schema defaults.
pub fn mhz(v: f64) -> Tagged {
    Tagged::new(v, Unit::MhzAngularOver2Pi)
}
pub fn khz(v: f64) -> Tagged {
    Tagged::new(v, Unit::KhzAngularOver2Pi)
}
pub fn us(v: f64) -> Tagged {
    Tagged::new(v, Unit::Us)
}
pub fn deg(v: f64) -> Tagged {
    Tagged::new(v, Unit::Deg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Coherence,
    Prep,
    Gate,
    Ising,
    Range,
    Residual,
    IonXxz,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Coherence => "coherence",
            ExperimentKind::Prep => "prep",
            ExperimentKind::Gate => "gate",
            ExperimentKind::Ising => "ising",
            ExperimentKind::Range => "range",
            ExperimentKind::Residual => "residual",
            ExperimentKind::IonXxz => "ion-xxz",
        }
    }
}

/// Top-level run configuration. `params` is validated against the experiment's
/// own schema before any computation starts.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "empty_object")]
    pub params: Value,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<Tagged>,
    pub output_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn empty_object() -> Value {
    Value::Object(serde_json::Map::new())
}

impl RawConfig {
    pub fn from_json_str(s: &str) -> Result<Self, HdsError> {
        let cfg: RawConfig =
            serde_json::from_str(s).map_err(|e| HdsError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HdsError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HdsError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), HdsError> {
        if !self.params.is_object() {
            return Err(HdsError::Config("params must be a JSON object".into()));
        }
        if let Some(0) = self.n_traj {
            return Err(HdsError::Config("n_traj must be at least 1".into()));
        }
        if self.output_path.is_empty() {
            return Err(HdsError::Config("output_path must not be empty".into()));
        }
        Ok(())
    }

    /// Command-line overrides, applied on top of the file values.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        traj: Option<usize>,
        out: Option<String>,
        threads: Option<usize>,
    ) {
        if let Some(s) = seed {
            self.master_seed = s;
        }
        if let Some(n) = traj {
            self.n_traj = Some(n);
        }
        if let Some(o) = out {
            self.output_path = o;
        }
        if let Some(t) = threads {
            self.threads = Some(t);
        }
    }
}

/// Worker count: explicit request, else the HDS_THREADS environment variable,
/// else every available core.
pub fn resolve_threads(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("HDS_THREADS").ok().and_then(|s| s.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}
