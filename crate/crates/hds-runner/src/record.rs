//! Run results: sample-aligned data columns, the run-report sidecar, and
//! atomic file emission.
//!
//! A run writes `<output_path>.csv` (the traces) and `<output_path>.json`
//! (parameters, conventions, summary scalars, numerical guards). The CSV is a
//! pure function of config and seed: floats are printed with the shortest
//! round-trip representation and the ensemble mean is merged in trajectory
//! order, so the bytes do not depend on the worker-thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hds::HdsError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One trace aligned with the x column; `se` present when the trace is an
/// ensemble mean.
#[derive(Clone, Debug)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub se: Option<Vec<f64>>,
}

impl Column {
    pub fn plain(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column { name: name.into(), values, se: None }
    }

    pub fn with_se(name: impl Into<String>, values: Vec<f64>, se: Vec<f64>) -> Self {
        Column { name: name.into(), values, se: Some(se) }
    }
}

/// Numerical health of a run. Norm drift is fatal above 1e-6 inside the
/// propagator already; the guard here flags anything at that scale, a Lanczos
/// iteration cap hit, or a substep-halving probe above roundoff accumulation.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Guards {
    pub max_norm_drift: f64,
    pub lanczos_cap_hits: usize,
    pub substep_halving_delta: Option<f64>,
}

impl Guards {
    pub fn absorb(&mut self, max_norm_drift: f64, lanczos_cap_hits: usize) {
        self.max_norm_drift = self.max_norm_drift.max(max_norm_drift);
        self.lanczos_cap_hits += lanczos_cap_hits;
    }

    pub fn pass(&self) -> bool {
        self.max_norm_drift <= 1e-6
            && self.lanczos_cap_hits == 0
            && self.substep_halving_delta.is_none_or(|d| d <= 1e-6)
    }
}

/// Convention statements stamped into every run report, so a result file is
/// interpretable without the source.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Conventions {
    pub frequencies: String,
    pub ou_sigma: String,
    pub spin_coupling: String,
    pub logical_coupling: String,
}

impl Conventions {
    pub fn standard(spin_coupling: &str) -> Self {
        Conventions {
            frequencies: "all internal frequencies are angular, rad/us, after unit-tag resolution"
                .into(),
            ou_sigma: "OU sigma is the stationary standard deviation".into(),
            spin_coupling: spin_coupling.into(),
            logical_coupling:
                "g is the coefficient of -X_k X_l in the logical model, each pair counted once"
                    .into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub experiment: String,
    pub x_name: String,
    pub x: Vec<f64>,
    pub columns: Vec<Column>,
    pub master_seed: u64,
    pub n_traj: usize,
    pub dt_us: Option<f64>,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub guards: Guards,
    pub conventions: Conventions,
    pub summary: Value,
    pub config: Value,
}

#[derive(Serialize)]
struct Report<'a> {
    experiment: &'a str,
    version: &'static str,
    wall_time_s: f64,
    master_seed: u64,
    n_traj: usize,
    dt_us: Option<f64>,
    n_samples: usize,
    guards_pass: bool,
    guards: &'a Guards,
    warnings: &'a [String],
    conventions: &'a Conventions,
    summary: &'a Value,
    config: &'a Value,
}

impl RunRecord {
    pub fn new(experiment: &str, x_name: &str, x: Vec<f64>) -> Self {
        RunRecord {
            experiment: experiment.into(),
            x_name: x_name.into(),
            x,
            columns: Vec::new(),
            master_seed: 0,
            n_traj: 1,
            dt_us: None,
            wall_time_s: 0.0,
            warnings: Vec::new(),
            guards: Guards::default(),
            conventions: Conventions::standard("unused"),
            summary: Value::Null,
            config: Value::Null,
        }
    }

    pub fn validate(&self) -> Result<(), HdsError> {
        for c in &self.columns {
            if c.values.len() != self.x.len() {
                return Err(HdsError::Config(format!(
                    "column {} has {} values for {} x points",
                    c.name,
                    c.values.len(),
                    self.x.len()
                )));
            }
            if let Some(se) = &c.se {
                if se.len() != self.x.len() {
                    return Err(HdsError::Config(format!(
                        "column {} has {} standard errors for {} x points",
                        c.name,
                        se.len(),
                        self.x.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.x_name);
        for c in &self.columns {
            let _ = write!(s, ",{}", c.name);
            if c.se.is_some() {
                let _ = write!(s, ",{}_se", c.name);
            }
        }
        s.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            let _ = write!(s, "{x}");
            for c in &self.columns {
                let _ = write!(s, ",{}", c.values[i]);
                if let Some(se) = &c.se {
                    let _ = write!(s, ",{}", se[i]);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn report_json(&self) -> Result<String, HdsError> {
        let report = Report {
            experiment: &self.experiment,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.wall_time_s,
            master_seed: self.master_seed,
            n_traj: self.n_traj,
            dt_us: self.dt_us,
            n_samples: self.x.len(),
            guards_pass: self.guards.pass(),
            guards: &self.guards,
            warnings: &self.warnings,
            conventions: &self.conventions,
            summary: &self.summary,
            config: &self.config,
        };
        let mut s = serde_json::to_string_pretty(&report)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<stem>.csv` and `<stem>.json`. The target directory must exist;
    /// each file lands via a temporary sibling and a rename.
    pub fn emit(&self, stem: &str) -> Result<(PathBuf, PathBuf), HdsError> {
        self.validate()?;
        let csv_path = PathBuf::from(format!("{stem}.csv"));
        let json_path = PathBuf::from(format!("{stem}.json"));
        if let Some(dir) = csv_path.parent() {
            if !dir.as_os_str().is_empty() && !dir.is_dir() {
                return Err(HdsError::Config(format!(
                    "output directory {} does not exist",
                    dir.display()
                )));
            }
        }
        write_atomic(&csv_path, &self.csv_string())?;
        write_atomic(&json_path, &self.report_json()?)?;
        Ok((csv_path, json_path))
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), HdsError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
