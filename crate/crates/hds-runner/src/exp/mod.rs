//! One module per experiment, plus the small shared plumbing.

pub mod coherence;
pub mod gate;
pub mod ionxxz;
pub mod ising;
pub mod prep;
pub mod tables;

use hds::noise::build_realization;
use hds::propagate::{substep_halving_probe, EvolveOptions, Grid, Hamiltonian};
use hds::spinops::C64;
use hds::HdsError;
use serde_json::Value;

use crate::config::{resolve_threads, RawConfig};

/// Top-level knobs every experiment resolves the same way.
pub(crate) struct Common {
    pub master_seed: u64,
    pub threads: usize,
    pub n_traj: Option<usize>,
    pub dt: Option<f64>,
}

pub(crate) fn common(cfg: &RawConfig) -> Result<Common, HdsError> {
    Ok(Common {
        master_seed: cfg.master_seed,
        threads: resolve_threads(cfg.threads),
        n_traj: cfg.n_traj,
        dt: cfg.dt.map(|t| t.time_us()).transpose()?,
    })
}

pub(crate) fn parse_params<T: serde::de::DeserializeOwned>(params: &Value) -> Result<T, HdsError> {
    serde_json::from_value(params.clone()).map_err(|e| HdsError::Config(format!("params: {e}")))
}

pub(crate) fn floor_warning(n_traj: usize, noisy: bool, warnings: &mut Vec<String>) {
    if noisy && n_traj < 100 {
        warnings.push(format!(
            "n_traj = {n_traj} is below the statistical floor of 100 for figure-grade ensembles"
        ));
    }
}

/// Substep-halving distance on trajectory 0's noise, the per-run integration
/// accuracy guard.
pub(crate) fn probe_delta(
    ham: &dyn Hamiltonian,
    grid: &Grid,
    psi0: &[C64],
    opts: &EvolveOptions,
    master_seed: u64,
) -> Result<f64, HdsError> {
    let noise = build_realization(
        ham.noise_spec(),
        ham.noise_sites(),
        grid.n_steps(),
        grid.dt(),
        master_seed,
        0,
    );
    substep_halving_probe(ham, grid, &noise, psi0, opts)
}

/// Extremum location refined by a parabola through the best sample and its
/// neighbors (uniform sample spacing assumed). Boundary extrema are returned
/// as-is.
pub(crate) fn refine_extremum(t: &[f64], y: &[f64], maximize: bool) -> (f64, f64) {
    let mut ib = 0;
    for i in 1..y.len() {
        let better = if maximize { y[i] > y[ib] } else { y[i] < y[ib] };
        if better {
            ib = i;
        }
    }
    if ib == 0 || ib + 1 == y.len() {
        return (t[ib], y[ib]);
    }
    let (y0, y1, y2) = (y[ib - 1], y[ib], y[ib + 1]);
    let curv = y0 - 2.0 * y1 + y2;
    if curv.abs() < 1e-300 {
        return (t[ib], y[ib]);
    }
    let h = t[ib] - t[ib - 1];
    let shift = 0.5 * (y0 - y2) / curv;
    (t[ib] + shift * h, y1 - 0.125 * (y0 - y2) * (y0 - y2) / curv)
}
