//! Coherence decay of a bare spin, a driven spin, and a driven pair holding
//! one protected qubit, under correlated drive noise and magnetic dephasing.
//!
//! The reported f(t) is the survival fidelity in the frame co-rotating with
//! the noiseless drive: each trajectory is projected onto the quiet evolution
//! of the same initial state. For the bare spin and for the pair state
//! |↑x↓x⟩ the quiet reference is stationary and f(t) reduces to the plain
//! overlap with the initial state.

use hds::model::{DriveSpec, FluctuationSource, Frame, SpinConvention, SystemSpec};
use hds::noise::{NoiseRealization, NoiseSpec, OuParams, PhaseJitterParams};
use hds::observables::{coherence_time, CoherenceCurve, CoherenceTime};
use hds::propagate::{evolve_trajectory, run_ensemble, EnsembleSetup, EvolveOptions, Grid};
use hds::spinops::{vdot, TensorLayout, C64};
use hds::HdsError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{deg, mhz, us, RawConfig, Tagged};
use crate::exp::{common, floor_warning, parse_params, probe_delta};
use crate::record::{Column, Conventions, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "none")]
    Bare,
    #[serde(rename = "simple_ds")]
    SimpleDs,
    #[serde(rename = "hybrid_ds")]
    HybridDs,
}

impl Variant {
    fn key(self) -> &'static str {
        match self {
            Variant::Bare => "none",
            Variant::SimpleDs => "simple_ds",
            Variant::HybridDs => "hybrid_ds",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceParams {
    #[serde(default = "d_variants")]
    pub variants: Vec<Variant>,
    /// Relative drive-amplitude fluctuation levels to sweep.
    #[serde(default = "d_amp_rel")]
    pub amp_rel: Vec<f64>,
    #[serde(default = "d_rabi")]
    pub rabi: Tagged,
    #[serde(default = "d_dephasing")]
    pub dephasing: Tagged,
    #[serde(default = "d_tau_c")]
    pub tau_c: Tagged,
    #[serde(default = "d_phase_bound")]
    pub phase_bound: Tagged,
    /// Redraw interval of the phase jitter; defaults to tau_c.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_dwell: Option<Tagged>,
    #[serde(default = "d_t_final")]
    pub t_final: Tagged,
    #[serde(default = "d_stride")]
    pub sample_stride: usize,
}

fn d_variants() -> Vec<Variant> {
    vec![Variant::Bare, Variant::SimpleDs, Variant::HybridDs]
}
fn d_amp_rel() -> Vec<f64> {
    vec![0.04]
}
fn d_rabi() -> Tagged {
    mhz(3.5)
}
fn d_dephasing() -> Tagged {
    mhz(0.2)
}
fn d_tau_c() -> Tagged {
    us(20.0)
}
fn d_phase_bound() -> Tagged {
    deg(2.0)
}
fn d_t_final() -> Tagged {
    us(150.0)
}
fn d_stride() -> usize {
    10
}

const DEFAULT_DT: f64 = 0.02;
const DEFAULT_N_TRAJ: usize = 200;

struct Resolved {
    rabi: f64,
    sigma_z: f64,
    tau_c: f64,
    phase_bound: f64,
    phase_dwell: f64,
}

fn ou(sigma: f64, tau_c: f64) -> Option<OuParams> {
    (sigma > 0.0).then_some(OuParams { sigma, tau_c })
}

fn build_spec(v: Variant, r: &Resolved, amp_rel: f64) -> Result<SystemSpec, HdsError> {
    let n = match v {
        Variant::Bare | Variant::SimpleDs => 1,
        Variant::HybridDs => 2,
    };
    let layout = TensorLayout::spins(n)?;
    let drive = match v {
        // No drive: amplitude and phase noise have nothing to ride on.
        Variant::Bare => vec![],
        _ => vec![DriveSpec {
            rabi: r.rabi,
            detuning: 0.0,
            target_sites: (0..n).collect(),
            fluctuation_source: FluctuationSource::SharedAmpPhase,
        }],
    };
    let noise = NoiseSpec {
        site_dephasing: ou(r.sigma_z, r.tau_c),
        shared_amp: if v == Variant::Bare { None } else { ou(amp_rel, r.tau_c) },
        phase_jitter: if v == Variant::Bare || r.phase_bound == 0.0 {
            None
        } else {
            Some(PhaseJitterParams { bound: r.phase_bound, dwell: r.phase_dwell })
        },
    };
    Ok(SystemSpec {
        layout,
        coupling: vec![vec![0.0; n]; n],
        convention: SpinConvention::Full,
        frame: Frame::FirstInteraction,
        first_drive: drive,
        second_drive: None,
        angle_profile: None,
        trotter_period: None,
        noise,
    })
}

fn init_state(v: Variant) -> Vec<C64> {
    let r = |x: f64| C64::new(x, 0.0);
    match v {
        // |↑x⟩: the magnetic noise dephases it directly.
        Variant::Bare => vec![r(0.5f64.sqrt()), r(0.5f64.sqrt())],
        // |↑⟩, an equal superposition of the dressed ±x states.
        Variant::SimpleDs => vec![r(1.0), r(0.0)],
        // |↑x↓x⟩, the equal superposition of the two logical basis states.
        Variant::HybridDs => vec![r(0.5), r(-0.5), r(0.5), r(-0.5)],
    }
}

fn ct_json(ct: CoherenceTime) -> Value {
    match ct {
        CoherenceTime::Crossed(t) => json!({"kind": "crossed", "t_us": t}),
        CoherenceTime::LowerBound(t) => json!({"kind": "lower_bound", "t_us": t}),
    }
}

fn ct_value(ct: CoherenceTime) -> f64 {
    match ct {
        CoherenceTime::Crossed(t) | CoherenceTime::LowerBound(t) => t,
    }
}

pub fn run(cfg: &RawConfig) -> Result<RunRecord, HdsError> {
    let p: CoherenceParams = parse_params(&cfg.params)?;
    let c = common(cfg)?;
    if p.variants.is_empty() {
        return Err(HdsError::Config("coherence: variants list is empty".into()));
    }
    if p.amp_rel.iter().any(|&r| !(0.0..1.0).contains(&r)) {
        return Err(HdsError::Config("coherence: amp_rel values must lie in [0, 1)".into()));
    }
    let tau_c = p.tau_c.time_us()?;
    let r = Resolved {
        rabi: p.rabi.angular()?,
        sigma_z: p.dephasing.angular()?,
        tau_c,
        phase_bound: p.phase_bound.radians()?,
        phase_dwell: p.phase_dwell.map_or(Ok(tau_c), |t| t.time_us())?,
    };
    let dt = c.dt.unwrap_or(DEFAULT_DT);
    let n_traj = c.n_traj.unwrap_or(DEFAULT_N_TRAJ);
    let grid = Grid::from_times(p.t_final.time_us()?, dt)?;
    let opts = EvolveOptions { sample_stride: p.sample_stride, ..EvolveOptions::default() };

    let mut rec = RunRecord::new("coherence", "t_us", vec![]);
    rec.master_seed = c.master_seed;
    rec.n_traj = n_traj;
    rec.dt_us = Some(dt);
    rec.conventions = Conventions::standard("no coupling term in this experiment");
    floor_warning(n_traj, true, &mut rec.warnings);

    let mut points = Vec::new();
    let mut probe_max = 0.0f64;
    for &variant in &p.variants {
        let sweeps: &[f64] = if variant == Variant::Bare { &[0.0] } else { &p.amp_rel };
        for &amp_rel in sweeps {
            let model = build_spec(variant, &r, amp_rel)?.compile()?;
            let psi0 = init_state(variant);
            let n_samples = grid.n_steps() / p.sample_stride + 1;

            let mut refs = vec![vec![C64::new(0.0, 0.0); model.dim()]; n_samples];
            let quiet = NoiseRealization::quiet(dt);
            evolve_trajectory(&model, &grid, &quiet, &psi0, &opts, |s, _, psi| {
                refs[s].copy_from_slice(psi);
            })?;

            let eval = |s: usize, _t: f64, psi: &[C64], out: &mut [f64]| {
                out[0] = vdot(&refs[s], psi).norm_sqr();
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
            let res = run_ensemble(&setup, 1, &eval)?;
            rec.guards.absorb(res.max_norm_drift, res.lanczos_cap_hits);
            probe_max = probe_max.max(probe_delta(&model, &grid, &psi0, &opts, c.master_seed)?);

            if rec.x.is_empty() {
                rec.x = res.times.clone();
            }
            let curve = CoherenceCurve::new(
                res.times.clone(),
                res.mean.iter().map(|&f| f.clamp(0.0, 1.0)).collect(),
                res.se.clone(),
            )?;
            let ct = coherence_time(&curve);
            let name = match variant {
                Variant::Bare => "f_none".to_string(),
                _ => format!("f_{}_r{}", variant.key(), amp_rel),
            };
            rec.columns.push(Column::with_se(name, res.mean, res.se));
            points.push((variant, amp_rel, ct));
        }
    }
    rec.guards.substep_halving_delta = Some(probe_max);

    let mut ratios = Vec::new();
    for &rel in &p.amp_rel {
        let find = |v: Variant| {
            points.iter().find(|&&(pv, pr, _)| pv == v && pr == rel).map(|&(_, _, ct)| ct)
        };
        if let (Some(s), Some(h)) = (find(Variant::SimpleDs), (find(Variant::HybridDs))) {
            let (ts, th) = (ct_value(s), ct_value(h));
            ratios.push(json!({
                "amp_rel": rel,
                "t_simple_us": ts,
                "t_hybrid_us": th,
                "hybrid_is_lower_bound": matches!(h, CoherenceTime::LowerBound(_)),
                "ratio_at_least": th / ts,
            }));
        }
    }
    rec.summary = json!({
        "coherence_times": points
            .iter()
            .map(|&(v, rel, ct)| json!({"variant": v.key(), "amp_rel": rel, "t": ct_json(ct)}))
            .collect::<Vec<_>>(),
        "hybrid_over_simple": ratios,
    });
    Ok(rec)
}
