//! Entangled-pair preparation: two driven spins under their z⊗z coupling,
//! measured against the closed-form target trajectory.
//!
//! With both spins driven identically, span{|↑x↓x⟩, |↓x↑x⟩} is the zero
//! eigenspace of the total drive and the coupling acts inside it as a pure
//! flip, so the noiseless evolution of |↑x↓x⟩ is exactly
//! cos(at/4)|↑x↓x⟩ − i·sin(at/4)|↓x↑x⟩ under the a·s_z⊗s_z convention. At
//! t = π/a that is the maximally entangled target; noise is what moves the
//! ensemble fidelity off 1.

use hds::model::{DriveSpec, FluctuationSource, Frame, SpinConvention, SystemSpec};
use hds::noise::{NoiseRealization, NoiseSpec, OuParams, PhaseJitterParams};
use hds::propagate::{evolve_trajectory, run_ensemble, EnsembleSetup, EvolveOptions, Grid};
use hds::spinops::{vdot, TensorLayout, C64};
use hds::HdsError;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{khz, mhz, us, RawConfig, Tagged};
use crate::exp::{common, floor_warning, parse_params, probe_delta};
use crate::record::{Column, Conventions, RunRecord};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepParams {
    #[serde(default = "d_rabi")]
    pub rabi: Tagged,
    /// Pair coupling scale a; the Hamiltonian carries (a/4)·σz⊗σz.
    #[serde(default = "d_coupling")]
    pub coupling: Tagged,
    #[serde(default = "d_dephasing")]
    pub dephasing: Tagged,
    #[serde(default = "d_tau_c")]
    pub tau_c: Tagged,
    #[serde(default = "d_amp_rel")]
    pub amp_rel: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_bound: Option<Tagged>,
    /// Defaults to the half flip period π/a.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<Tagged>,
    #[serde(default = "d_stride")]
    pub sample_stride: usize,
}

fn d_rabi() -> Tagged {
    mhz(3.5)
}
fn d_coupling() -> Tagged {
    khz(20.0)
}
fn d_dephasing() -> Tagged {
    mhz(0.1)
}
fn d_tau_c() -> Tagged {
    us(20.0)
}
fn d_amp_rel() -> f64 {
    0.02
}
fn d_stride() -> usize {
    25
}

const DEFAULT_DT: f64 = 0.02;
const DEFAULT_N_TRAJ: usize = 500;

/// |↑x↓x⟩ and |↓x↑x⟩ with site 0 as the most significant bit.
fn drive_null_basis() -> (Vec<C64>, Vec<C64>) {
    let r = |x: f64| C64::new(x, 0.0);
    let v1 = vec![r(0.5), r(-0.5), r(0.5), r(-0.5)];
    let v2 = vec![r(0.5), r(0.5), r(-0.5), r(-0.5)];
    (v1, v2)
}

pub fn run(cfg: &RawConfig) -> Result<RunRecord, HdsError> {
    let p: PrepParams = parse_params(&cfg.params)?;
    let c = common(cfg)?;
    let rabi = p.rabi.angular()?;
    let a = p.coupling.angular()?;
    if !(a > 0.0) {
        return Err(HdsError::Config("prep: coupling must be positive".into()));
    }
    let tau_c = p.tau_c.time_us()?;
    let t_final = p.t_final.map_or(Ok(std::f64::consts::PI / a), |t| t.time_us())?;
    let dt = c.dt.unwrap_or(DEFAULT_DT);
    let n_traj = c.n_traj.unwrap_or(DEFAULT_N_TRAJ);
    let grid = Grid::from_times(t_final, dt)?;
    let opts = EvolveOptions { sample_stride: p.sample_stride, ..EvolveOptions::default() };

    let phase_bound = p.phase_bound.map(|t| t.radians()).transpose()?.unwrap_or(0.0);
    let sigma_z = p.dephasing.angular()?;
    let spec = SystemSpec {
        layout: TensorLayout::spins(2)?,
        coupling: vec![vec![0.0, a], vec![a, 0.0]],
        convention: SpinConvention::Half,
        frame: Frame::FirstInteraction,
        first_drive: vec![DriveSpec {
            rabi,
            detuning: 0.0,
            target_sites: vec![0, 1],
            fluctuation_source: FluctuationSource::SharedAmpPhase,
        }],
        second_drive: None,
        angle_profile: None,
        trotter_period: None,
        noise: NoiseSpec {
            site_dephasing: (sigma_z > 0.0).then_some(OuParams { sigma: sigma_z, tau_c }),
            shared_amp: (p.amp_rel > 0.0).then_some(OuParams { sigma: p.amp_rel, tau_c }),
            phase_jitter: (phase_bound > 0.0)
                .then_some(PhaseJitterParams { bound: phase_bound, dwell: tau_c }),
        },
    };
    let model = spec.compile()?;
    let (v1, v2) = drive_null_basis();
    let psi0 = v1.clone();

    // Closed-form reference on the sample grid.
    let n_samples = grid.n_steps() / p.sample_stride + 1;
    let mut refs = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let t = grid.t(s * p.sample_stride);
        let (sin, cos) = (0.25 * a * t).sin_cos();
        let psi: Vec<C64> = v1
            .iter()
            .zip(&v2)
            .map(|(&b1, &b2)| b1 * C64::new(cos, 0.0) + b2 * C64::new(0.0, -sin))
            .collect();
        refs.push(psi);
    }

    // The closed form is exact for the quiet model; anything beyond roundoff
    // accumulation here is an integration bug, so it is reported as a guard.
    let quiet = NoiseRealization::quiet(dt);
    let mut quiet_dev = 0.0f64;
    evolve_trajectory(&model, &grid, &quiet, &psi0, &opts, |s, _, psi| {
        quiet_dev = quiet_dev.max((1.0 - vdot(&refs[s], psi).norm_sqr()).abs());
    })?;

    let eval = |s: usize, _t: f64, psi: &[C64], out: &mut [f64]| {
        out[0] = vdot(&refs[s], psi).norm_sqr();
        out[1] = 1.0 - vdot(&v1, psi).norm_sqr() - vdot(&v2, psi).norm_sqr();
    };
    let setup = EnsembleSetup {
        ham: &model,
        grid,
        psi0: &psi0,
        opts,
        master_seed: c.master_seed,
        n_traj,
        threads: c.threads,
    };
    let res = run_ensemble(&setup, 2, &eval)?;

    let last = res.times.len() - 1;
    let mut rec = RunRecord::new("prep", "t_us", res.times.clone());
    rec.master_seed = c.master_seed;
    rec.n_traj = n_traj;
    rec.dt_us = Some(dt);
    rec.conventions = Conventions::standard("half: coupling a multiplies s_z⊗s_z = (1/4)σz⊗σz");
    floor_warning(n_traj, true, &mut rec.warnings);
    rec.guards.absorb(res.max_norm_drift, res.lanczos_cap_hits);
    rec.guards.substep_halving_delta =
        Some(probe_delta(&model, &grid, &psi0, &opts, c.master_seed)?);

    let fid: Vec<f64> = (0..res.times.len()).map(|s| res.component(s, 0)).collect();
    let fid_se: Vec<f64> = (0..res.times.len()).map(|s| res.se_component(s, 0)).collect();
    let leak: Vec<f64> = (0..res.times.len()).map(|s| res.component(s, 1)).collect();
    let leak_se: Vec<f64> = (0..res.times.len()).map(|s| res.se_component(s, 1)).collect();
    rec.summary = json!({
        "coupling_rad_per_us": a,
        "t_final_us": t_final,
        "fidelity_final": fid[last],
        "fidelity_final_se": fid_se[last],
        "quiet_max_closed_form_deviation": quiet_dev,
    });
    rec.columns.push(Column::with_se("fidelity", fid, fid_se));
    rec.columns.push(Column::with_se("drive_leakage", leak, leak_se));
    Ok(rec)
}
