//! Pair-to-pair coupling gate: two protected qubits on a four-site chain,
//! evolved in the dressed frame with the decoupling drives on, and compared
//! against the logical model the coupling fold predicts.
//!
//! The run reports logical populations, leakage out of the protected
//! subspace, fidelity against the ideal logical evolution, and the
//! concurrence of the trajectory-averaged logical state. The logical coupling
//! is extracted dynamically from the first population-transfer minimum and
//! compared with the folded formula value, alongside the doubled value the
//! pair-double-counting convention would give.

use hds::effective::{chain_coupling, chain_pairing, coupling_table, effective_hamiltonian, hybrid_params};
use hds::model::{FluctuationSource, Frame, HybridEncoding, SecondDriveSpec, SpinConvention, SystemSpec};
use hds::noise::{NoiseSpec, OuParams};
use hds::observables::concurrence;
use hds::propagate::{run_ensemble, EnsembleSetup, EvolveOptions, Grid};
use hds::spinops::{vdot, DenseOp, OperatorMatrix, TensorLayout, C64};
use hds::HdsError;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{deg, khz, mhz, us, RawConfig, Tagged};
use crate::exp::{common, floor_warning, parse_params, probe_delta, refine_extremum};
use crate::record::{Column, Conventions, RunRecord};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateParams {
    #[serde(default = "d_n_pairs")]
    pub n_pairs: usize,
    /// Distance exponent of the site-level coupling a·|i−j|^(−α).
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_coupling")]
    pub coupling: Tagged,
    /// Decoupling drive amplitudes, assigned to pairs cyclically.
    #[serde(default = "d_rabi_prime")]
    pub rabi_prime: Vec<Tagged>,
    #[serde(default = "d_theta")]
    pub theta: Tagged,
    #[serde(default = "d_trotter")]
    pub trotter_period: Tagged,
    #[serde(default = "d_dephasing")]
    pub dephasing: Tagged,
    #[serde(default = "d_tau_c")]
    pub tau_c: Tagged,
    #[serde(default = "d_amp_rel")]
    pub amp_rel: f64,
    /// Defaults to one full population period π/g, rounded to the sample grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<Tagged>,
    #[serde(default = "d_stride")]
    pub sample_stride: usize,
}

fn d_n_pairs() -> usize {
    2
}
fn d_alpha() -> f64 {
    3.0
}
fn d_coupling() -> Tagged {
    khz(20.0)
}
fn d_rabi_prime() -> Vec<Tagged> {
    vec![mhz(1.0), mhz(3.0)]
}
fn d_theta() -> Tagged {
    deg(90.0)
}
fn d_trotter() -> Tagged {
    us(0.5)
}
fn d_dephasing() -> Tagged {
    mhz(0.04)
}
fn d_tau_c() -> Tagged {
    us(20.0)
}
fn d_amp_rel() -> f64 {
    0.02
}
fn d_stride() -> usize {
    10
}

const DEFAULT_DT: f64 = 0.025;
const DEFAULT_N_TRAJ: usize = 200;

fn to_dense(m: OperatorMatrix) -> DenseOp {
    match m {
        OperatorMatrix::Dense(d) => d,
        OperatorMatrix::Pauli(p) => p.to_dense(),
    }
}

/// First local concurrence maximum above half the global one; parabola-refined.
fn first_peak(t: &[f64], y: &[f64]) -> (f64, f64) {
    let global = y.iter().cloned().fold(0.0f64, f64::max);
    for i in 1..y.len() - 1 {
        if y[i] >= y[i - 1] && y[i] >= y[i + 1] && y[i] > 0.5 * global {
            return refine_extremum(&t[i - 1..=i + 1], &y[i - 1..=i + 1], true);
        }
    }
    refine_extremum(t, y, true)
}

pub fn run(cfg: &RawConfig) -> Result<RunRecord, HdsError> {
    let p: GateParams = parse_params(&cfg.params)?;
    let c = common(cfg)?;
    let np = p.n_pairs;
    if np < 2 {
        return Err(HdsError::Config("gate: need at least two pairs".into()));
    }
    if np > 4 {
        return Err(HdsError::Config(
            "gate: more than 4 pairs leaves the dense-state regime this experiment is sized for"
                .into(),
        ));
    }
    let a = p.coupling.angular()?;
    let theta = p.theta.radians()?;
    let tau_c = p.tau_c.time_us()?;
    let sigma_z = p.dephasing.angular()?;
    let trotter = p.trotter_period.time_us()?;
    let rabi_prime: Vec<f64> =
        p.rabi_prime.iter().map(|t| t.angular()).collect::<Result<_, _>>()?;

    let pairing = chain_pairing(np);
    let coupling = chain_coupling(np, p.alpha, a);
    let table = coupling_table(&pairing, &coupling, &vec![theta; np])?;
    let eff = hybrid_params(&table);
    let g = eff.g[0][1];
    if !(g > 0.0) {
        return Err(HdsError::Config(format!(
            "gate: nearest-pair logical coupling {g} is not positive at this geometry"
        )));
    }

    let dt = c.dt.unwrap_or(DEFAULT_DT);
    let n_traj = c.n_traj.unwrap_or(DEFAULT_N_TRAJ);
    let window = dt * p.sample_stride as f64;
    let t_final = match p.t_final {
        Some(t) => t.time_us()?,
        None => (std::f64::consts::PI / g / window).floor() * window,
    };
    let grid = Grid::from_times(t_final, dt)?;
    let opts = EvolveOptions { sample_stride: p.sample_stride, ..EvolveOptions::default() };

    let spec = SystemSpec {
        layout: TensorLayout::spins(2 * np)?.with_pairing(&pairing)?,
        coupling,
        convention: SpinConvention::Full,
        frame: Frame::SecondInteraction,
        first_drive: vec![],
        second_drive: Some(SecondDriveSpec {
            rabi_prime,
            fluctuation_source: FluctuationSource::SharedAmpPhase,
        }),
        angle_profile: Some(hds::model::AngleProfile::Static(vec![theta; 2 * np])),
        trotter_period: Some(trotter),
        noise: NoiseSpec {
            site_dephasing: (sigma_z > 0.0).then_some(OuParams { sigma: sigma_z, tau_c }),
            shared_amp: (p.amp_rel > 0.0).then_some(OuParams { sigma: p.amp_rel, tau_c }),
            phase_jitter: None,
        },
    };
    let model = spec.compile()?;
    let enc = HybridEncoding::new(&TensorLayout::spins(2 * np)?.with_pairing(&pairing)?)?;
    let ldim = enc.logical_dim();

    let mut logical0 = vec![C64::new(0.0, 0.0); ldim];
    logical0[0] = C64::new(1.0, 0.0);
    let psi0 = enc.encode(&logical0)?;

    // Ideal logical evolution, encoded per sample time.
    let h_eff = to_dense(effective_hamiltonian(&eff, false)?);
    let (evals, evecs) = h_eff.eigh();
    let n_samples = grid.n_steps() / p.sample_stride + 1;
    let mut refs = Vec::with_capacity(n_samples);
    let w0: Vec<C64> = (0..ldim)
        .map(|k| {
            let col: Vec<C64> = (0..ldim).map(|r| evecs.at(r, k)).collect();
            vdot(&col, &logical0)
        })
        .collect();
    for s in 0..n_samples {
        let t = grid.t(s * p.sample_stride);
        let mut log_t = vec![C64::new(0.0, 0.0); ldim];
        for k in 0..ldim {
            let phase = C64::new(0.0, -evals[k] * t).exp() * w0[k];
            for r in 0..ldim {
                log_t[r] += evecs.at(r, k) * phase;
            }
        }
        refs.push(enc.encode(&log_t)?);
    }

    // Components per sample: fidelity, leakage, then the upper triangle of the
    // projected logical density matrix (diagonal real, off-diagonal re and im).
    let width = 2 + ldim * ldim;
    let eval = |s: usize, _t: f64, psi: &[C64], out: &mut [f64]| {
        out[0] = vdot(&refs[s], psi).norm_sqr();
        let w = enc.project(psi).expect("projection dimensions fixed");
        let mut norm2 = 0.0;
        for wr in &w {
            norm2 += wr.norm_sqr();
        }
        out[1] = (1.0 - norm2).max(0.0);
        let mut k = 2;
        for r in 0..ldim {
            out[k] = w[r].norm_sqr();
            k += 1;
            for cc in r + 1..ldim {
                let z = w[r] * w[cc].conj();
                out[k] = z.re;
                out[k + 1] = z.im;
                k += 2;
            }
        }
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
    let res = run_ensemble(&setup, width, &eval)?;

    let quiet = model.noise_spec().is_quiet();
    let mut rec = RunRecord::new("gate", "t_us", res.times.clone());
    rec.master_seed = c.master_seed;
    rec.n_traj = n_traj;
    rec.dt_us = Some(dt);
    rec.conventions = Conventions::standard("full: coupling a multiplies σz⊗σz");
    floor_warning(n_traj, !quiet, &mut rec.warnings);
    rec.guards.absorb(res.max_norm_drift, res.lanczos_cap_hits);
    rec.guards.substep_halving_delta =
        Some(probe_delta(&model, &grid, &psi0, &opts, c.master_seed)?);

    // Rebuild the mean logical density matrix per sample; its diagonal is the
    // population set and, for two pairs, it feeds the concurrence.
    let nt = res.times.len();
    let col = |comp: usize| -> (Vec<f64>, Vec<f64>) {
        (
            (0..nt).map(|s| res.component(s, comp)).collect(),
            (0..nt).map(|s| res.se_component(s, comp)).collect(),
        )
    };
    let (fid, fid_se) = col(0);
    let (leak, leak_se) = col(1);

    let mut diag_slots = Vec::new();
    {
        let mut k = 2;
        for r in 0..ldim {
            diag_slots.push(k);
            k += 1 + 2 * (ldim - r - 1);
        }
    }
    let mut conc = Vec::with_capacity(nt);
    if ldim == 4 {
        for s in 0..nt {
            let mut rho = DenseOp::zeros(ldim);
            let mut k = 2;
            for r in 0..ldim {
                *rho.at_mut(r, r) = C64::new(res.component(s, k), 0.0);
                k += 1;
                for cc in r + 1..ldim {
                    let z = C64::new(res.component(s, k), res.component(s, k + 1));
                    *rho.at_mut(r, cc) = z;
                    *rho.at_mut(cc, r) = z.conj();
                    k += 2;
                }
            }
            let tr = rho.trace().re;
            if tr <= 0.0 {
                return Err(HdsError::Numerics("gate: logical state fully leaked".into()));
            }
            rho.scale(C64::new(1.0 / tr, 0.0));
            conc.push(concurrence(&rho)?);
        }
    }

    let (t_cmax, c_max) =
        if conc.is_empty() { (f64::NAN, f64::NAN) } else { first_peak(&res.times, &conc) };
    let p00: Vec<f64> = (0..nt).map(|s| res.component(s, diag_slots[0])).collect();
    let (t_pmin, p_min) = refine_extremum(&res.times, &p00, false);
    let g_dyn = 0.5 * std::f64::consts::PI / t_pmin;

    let fid_at_cmax = if t_cmax.is_nan() {
        (f64::NAN, f64::NAN)
    } else {
        let s = ((t_cmax / window).round() as usize).min(nt - 1);
        (fid[s], fid_se[s])
    };
    let max_leak = leak.iter().cloned().fold(0.0f64, f64::max);

    rec.summary = json!({
        "a_rad_per_us": a,
        "g_formula_rad_per_us": g,
        "g_formula_over_a": g / a,
        "g_double_count_over_a": 2.0 * g / a,
        "t_first_p00_min_us": t_pmin,
        "p00_min": p_min,
        "g_dynamic_rad_per_us": g_dyn,
        "g_dynamic_over_formula": g_dyn / g,
        "t_concurrence_max_us": t_cmax,
        "concurrence_max": c_max,
        "t_quarter_flip_us": 0.25 * std::f64::consts::PI / g,
        "t_half_flip_us": 0.5 * std::f64::consts::PI / g,
        "fidelity_at_concurrence_max": fid_at_cmax.0,
        "fidelity_at_concurrence_max_se": fid_at_cmax.1,
        "max_mean_leakage": max_leak,
    });

    rec.columns.push(Column::with_se("fidelity", fid, fid_se));
    rec.columns.push(Column::with_se("leakage", leak, leak_se));
    let pop_names: &[&str] = if ldim == 4 { &["p_uu", "p_ud", "p_du", "p_dd"] } else { &[] };
    for (r, name) in pop_names.iter().enumerate() {
        let (v, se) = col(diag_slots[r]);
        rec.columns.push(Column::with_se(*name, v, se));
    }
    if !conc.is_empty() {
        rec.columns.push(Column::plain("concurrence", conc));
    }
    Ok(rec)
}
