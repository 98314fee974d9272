//! Adiabatic transverse-coupling ramp on a spin chain, run three ways: the
//! ideal logical chain, the same chain with bare-qubit noise (simple TLS),
//! and the full protected-pair realization ramped through the dressing angle.
//!
//! All variants start in the fully z-polarized state, ramp the z field down
//! while the x⊗x coupling grows, and report the q = 0 x-basis structure
//! factor against the exact ground-state value of the final Hamiltonian.

use hds::model::{
    AngleProfile, FluctuationSource, Frame, HybridEncoding, SecondDriveSpec, SpinConvention,
    SystemSpec,
};
use hds::noise::{NoiseRealization, NoiseSpec, OuParams};
use hds::propagate::{run_ensemble, EnsembleSetup, EvolveOptions, Grid, Hamiltonian};
use hds::spinops::{pauli_string, OperatorMatrix, PauliString, PauliSum, TensorLayout, C64};
use hds::effective::chain_pairing;
use hds::HdsError;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{khz, mhz, us, RawConfig, Tagged};
use crate::exp::{common, floor_warning, parse_params, probe_delta};
use crate::record::{Column, Conventions, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsingVariant {
    Ideal,
    SimpleTls,
    HybridDs,
}

impl IsingVariant {
    pub fn key(self) -> &'static str {
        match self {
            IsingVariant::Ideal => "ideal",
            IsingVariant::SimpleTls => "simple_tls",
            IsingVariant::HybridDs => "hybrid_ds",
        }
    }
}

/// Linear exchange of the z field for the x⊗x coupling: h(t) = a₀(1 − t/T),
/// g(t) = a₀·t/T. This is exactly what the sin²-linear dressing ramp produces
/// at the logical level, so the ideal chain and the full model share it.
#[derive(Clone, Copy, Debug)]
pub struct RampSchedule {
    pub a0: f64,
    pub t_total: f64,
}

impl RampSchedule {
    pub fn new(a0: f64, t_total: f64) -> Result<Self, HdsError> {
        if !(a0 > 0.0) || !(t_total > 0.0) {
            return Err(HdsError::Config(format!(
                "ramp needs positive scale and duration, got a0 = {a0}, t_total = {t_total}"
            )));
        }
        Ok(RampSchedule { a0, t_total })
    }

    pub fn g_at(&self, t: f64) -> f64 {
        self.a0 * (t / self.t_total).clamp(0.0, 1.0)
    }

    pub fn h_at(&self, t: f64) -> f64 {
        self.a0 - self.g_at(t)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingParams {
    #[serde(default = "d_n_sites")]
    pub n_sites: usize,
    /// Ramp scale a₀: initial z field and final x⊗x coupling.
    #[serde(default = "d_a0")]
    pub a0: Tagged,
    #[serde(default = "d_t_total")]
    pub t_total: Tagged,
    #[serde(default = "d_variants")]
    pub variants: Vec<IsingVariant>,
    /// Decoupling amplitudes in units of a₀, assigned to pairs cyclically.
    #[serde(default = "d_protection")]
    pub protection_rabi_over_a0: Vec<f64>,
    /// Defaults to 2·dt, the smallest alternation the grid resolves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trotter_period: Option<Tagged>,
    #[serde(default = "d_dephasing")]
    pub dephasing: Tagged,
    #[serde(default = "d_tau_c")]
    pub tau_c: Tagged,
    #[serde(default = "d_amp_rel")]
    pub amp_rel: f64,
    #[serde(default = "d_stride")]
    pub sample_stride: usize,
}

fn d_n_sites() -> usize {
    8
}
fn d_a0() -> Tagged {
    khz(40.0)
}
fn d_t_total() -> Tagged {
    us(80.0)
}
fn d_variants() -> Vec<IsingVariant> {
    vec![IsingVariant::Ideal, IsingVariant::SimpleTls, IsingVariant::HybridDs]
}
fn d_protection() -> Vec<f64> {
    vec![20.0, 28.0]
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
    48
}

const DEFAULT_DT: f64 = 1.0 / 12.0;
const DEFAULT_N_TRAJ: usize = 100;

/// The logical chain itself: H(t) = Σ_k [h(t)(1+ξ(t)) + δ_k(t)/2] Z_k
/// − g(t) Σ_k X_k X_{k+1}. Serves as the noiseless reference and, with the
/// noise channels live, as the unprotected bare-qubit baseline.
pub struct LogicalChain {
    n: usize,
    schedule: RampSchedule,
    z_strings: Vec<PauliString>,
    xx_strings: Vec<PauliString>,
    noise: NoiseSpec,
    f_max: f64,
}

impl LogicalChain {
    pub fn new(n: usize, schedule: RampSchedule, noise: NoiseSpec) -> Result<Self, HdsError> {
        if !(2..=24).contains(&n) {
            return Err(HdsError::Config(format!("chain length {n} out of range 2..=24")));
        }
        let z_strings = (0..n)
            .map(|k| pauli_string(n, &[(k, 'z')]))
            .collect::<Result<Vec<_>, _>>()?;
        let xx_strings = (0..n - 1)
            .map(|k| pauli_string(n, &[(k, 'x'), (k + 1, 'x')]))
            .collect::<Result<Vec<_>, _>>()?;
        let sigma_z3 = noise.site_dephasing.as_ref().map_or(0.0, |p| 3.0 * p.sigma);
        let amp3 = noise.shared_amp.as_ref().map_or(0.0, |p| 3.0 * p.sigma);
        let peak = (schedule.a0 * (1.0 + amp3) + 0.5 * sigma_z3).max(schedule.a0);
        Ok(LogicalChain {
            n,
            schedule,
            z_strings,
            xx_strings,
            noise,
            f_max: peak / std::f64::consts::TAU,
        })
    }
}

impl Hamiltonian for LogicalChain {
    fn dim(&self) -> usize {
        1 << self.n
    }

    fn noise_sites(&self) -> usize {
        self.n
    }

    fn noise_spec(&self) -> &NoiseSpec {
        &self.noise
    }

    fn new_buffer(&self) -> OperatorMatrix {
        OperatorMatrix::Pauli(PauliSum::new(self.n))
    }

    fn eval_into(&self, step: usize, grid: &Grid, noise: &NoiseRealization, out: &mut OperatorMatrix) {
        let OperatorMatrix::Pauli(p) = out else {
            panic!("logical chain uses the Pauli representation");
        };
        let t = grid.t(step);
        let h = self.schedule.h_at(t) * (1.0 + noise.amp_at(step));
        let g = self.schedule.g_at(t);
        p.clear_terms();
        for (k, zs) in self.z_strings.iter().enumerate() {
            let c = h + 0.5 * noise.dephasing_at(k, step);
            if c != 0.0 {
                p.add_string(zs, c).expect("single-site z has no σy");
            }
        }
        if g != 0.0 {
            for xs in &self.xx_strings {
                p.add_string(xs, -g).expect("x⊗x has no σy");
            }
        }
        p.finalize();
    }

    fn max_frequency(&self) -> f64 {
        self.f_max
    }
}

/// Σ_{k<l} ⟨σx_k σx_l⟩ via one pass with A = Σ_k σx_k over `masks`:
/// ⟨A²⟩ counts each of the N sites once on the diagonal.
fn xx_pair_sum(psi: &[C64], masks: &[usize]) -> f64 {
    let mut a2 = 0.0;
    for i in 0..psi.len() {
        let mut z = C64::new(0.0, 0.0);
        for &m in masks {
            z += psi[i ^ m];
        }
        a2 += z.norm_sqr();
    }
    0.5 * (a2 - masks.len() as f64)
}

/// Ground-state structure factor of the end-of-ramp Hamiltonian −a₀ Σ X_kX_{k+1},
/// from a dense diagonalization. Any ground state gives the same value.
fn ed_ground_state_sxx(n: usize) -> Result<f64, HdsError> {
    let mut sum = PauliSum::new(n);
    for k in 0..n - 1 {
        sum.add_string(&pauli_string(n, &[(k, 'x'), (k + 1, 'x')])?, -1.0)?;
    }
    sum.finalize();
    let (_, vecs) = sum.to_dense().eigh();
    let dim = 1 << n;
    let gs: Vec<C64> = (0..dim).map(|r| vecs.at(r, 0)).collect();
    let masks: Vec<usize> = (0..n).map(|k| 1usize << (n - 1 - k)).collect();
    Ok(xx_pair_sum(&gs, masks.as_slice()))
}

struct VariantOut {
    key: &'static str,
    n_traj: usize,
    s_xx: Vec<f64>,
    s_xx_se: Vec<f64>,
    leakage: Option<(Vec<f64>, Vec<f64>)>,
    times: Vec<f64>,
}

pub fn run(cfg: &RawConfig) -> Result<RunRecord, HdsError> {
    let p: IsingParams = parse_params(&cfg.params)?;
    let c = common(cfg)?;
    let n = p.n_sites;
    if n < 2 {
        return Err(HdsError::Config("ising: need at least two sites".into()));
    }
    if p.variants.is_empty() {
        return Err(HdsError::Config("ising: no variants requested".into()));
    }
    let a0 = p.a0.angular()?;
    let t_total = p.t_total.time_us()?;
    let schedule = RampSchedule::new(a0, t_total)?;
    let tau_c = p.tau_c.time_us()?;
    let sigma_z = p.dephasing.angular()?;
    if p.protection_rabi_over_a0.is_empty() {
        return Err(HdsError::Config("ising: no decoupling amplitudes given".into()));
    }
    if p.protection_rabi_over_a0.iter().any(|&r| r < 20.0) {
        return Err(HdsError::Config(
            "ising: decoupling amplitudes below 20·a0 leave the protected subspace \
             insufficiently separated from the ramp scale"
                .into(),
        ));
    }

    let dt = c.dt.unwrap_or(DEFAULT_DT);
    let n_traj = c.n_traj.unwrap_or(DEFAULT_N_TRAJ);
    let grid = Grid::from_times(t_total, dt)?;
    let opts = EvolveOptions { sample_stride: p.sample_stride, ..EvolveOptions::default() };
    let trotter = match p.trotter_period {
        Some(t) => t.time_us()?,
        None => 2.0 * dt,
    };

    let noise = NoiseSpec {
        site_dephasing: (sigma_z > 0.0).then_some(OuParams { sigma: sigma_z, tau_c }),
        shared_amp: (p.amp_rel > 0.0).then_some(OuParams { sigma: p.amp_rel, tau_c }),
        phase_jitter: None,
    };

    let mut rec = RunRecord::new("ising", "t_us", Vec::new());
    rec.master_seed = c.master_seed;
    rec.n_traj = n_traj;
    rec.dt_us = Some(dt);
    rec.conventions = Conventions::standard("full: coupling a multiplies σz⊗σz");
    if p.variants.iter().any(|v| *v != IsingVariant::Ideal) {
        floor_warning(n_traj, true, &mut rec.warnings);
    }

    let mut outs: Vec<VariantOut> = Vec::new();
    for &variant in &p.variants {
        let out = match variant {
            IsingVariant::Ideal | IsingVariant::SimpleTls => {
                let (spec, nt) = if variant == IsingVariant::Ideal {
                    // deterministic, one trajectory regardless of the request
                    (NoiseSpec { site_dephasing: None, shared_amp: None, phase_jitter: None }, 1)
                } else {
                    (noise, n_traj)
                };
                let chain = LogicalChain::new(n, schedule, spec)?;
                let masks: Vec<usize> = (0..n).map(|k| 1usize << (n - 1 - k)).collect();
                let mut psi0 = vec![C64::new(0.0, 0.0); chain.dim()];
                psi0[chain.dim() - 1] = C64::new(1.0, 0.0);
                let eval = |_s: usize, _t: f64, psi: &[C64], out: &mut [f64]| {
                    out[0] = xx_pair_sum(psi, &masks);
                };
                let setup = EnsembleSetup {
                    ham: &chain,
                    grid,
                    psi0: &psi0,
                    opts,
                    master_seed: c.master_seed,
                    n_traj: nt,
                    threads: c.threads,
                };
                let res = run_ensemble(&setup, 1, &eval)?;
                rec.guards.absorb(res.max_norm_drift, res.lanczos_cap_hits);
                let probe = probe_delta(&chain, &grid, &psi0, &opts, c.master_seed)?;
                let worst = rec.guards.substep_halving_delta.unwrap_or(0.0).max(probe);
                rec.guards.substep_halving_delta = Some(worst);
                let ns = res.times.len();
                VariantOut {
                    key: variant.key(),
                    n_traj: nt,
                    s_xx: (0..ns).map(|s| res.component(s, 0)).collect(),
                    s_xx_se: (0..ns).map(|s| res.se_component(s, 0)).collect(),
                    leakage: None,
                    times: res.times,
                }
            }
            IsingVariant::HybridDs => {
                if n > 8 {
                    return Err(HdsError::Config(format!(
                        "ising: the full pair realization of {n} sites needs {} physical spins; \
                         8 logical sites (16 spins) is the supported ceiling",
                        2 * n
                    )));
                }
                let pairing = chain_pairing(n);
                // One σ-level bond per logical bond, at twice the pair scale,
                // makes the folded coupling exactly a₀ per neighbor pair.
                let mut coupling = vec![vec![0.0; 2 * n]; 2 * n];
                for &(sa, sb) in &pairing {
                    coupling[sa][sb] = a0;
                    coupling[sb][sa] = a0;
                }
                for k in 0..n - 1 {
                    let (i, j) = (2 * k + 1, 2 * k + 2);
                    coupling[i][j] = 2.0 * a0;
                    coupling[j][i] = 2.0 * a0;
                }
                let spec = SystemSpec {
                    layout: TensorLayout::spins(2 * n)?.with_pairing(&pairing)?,
                    coupling,
                    convention: SpinConvention::Full,
                    frame: Frame::SecondInteraction,
                    first_drive: vec![],
                    second_drive: Some(SecondDriveSpec {
                        rabi_prime: p.protection_rabi_over_a0.iter().map(|r| r * a0).collect(),
                        fluctuation_source: FluctuationSource::SharedAmpPhase,
                    }),
                    angle_profile: Some(AngleProfile::LinearSin2Ramp { t_total }),
                    trotter_period: Some(trotter),
                    noise,
                };
                let model = spec.compile()?;
                let layout = TensorLayout::spins(2 * n)?.with_pairing(&pairing)?;
                let enc = HybridEncoding::new(&layout)?;
                let mut logical = vec![C64::new(0.0, 0.0); enc.logical_dim()];
                logical[enc.logical_dim() - 1] = C64::new(1.0, 0.0);
                let psi0 = enc.encode(&logical)?;
                // a-sublattice σx is the exact image of logical X, so the
                // structure factor is measured on those physical sites.
                let masks: Vec<usize> =
                    pairing.iter().map(|&(sa, _)| 1usize << (2 * n - 1 - sa)).collect();
                let eval = |_s: usize, _t: f64, psi: &[C64], out: &mut [f64]| {
                    out[0] = xx_pair_sum(psi, &masks);
                    out[1] = enc.leakage(psi).expect("dimension fixed by the layout");
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
                rec.guards.absorb(res.max_norm_drift, res.lanczos_cap_hits);
                let probe = probe_delta(&model, &grid, &psi0, &opts, c.master_seed)?;
                let worst = rec.guards.substep_halving_delta.unwrap_or(0.0).max(probe);
                rec.guards.substep_halving_delta = Some(worst);
                let ns = res.times.len();
                VariantOut {
                    key: variant.key(),
                    n_traj,
                    s_xx: (0..ns).map(|s| res.component(s, 0)).collect(),
                    s_xx_se: (0..ns).map(|s| res.se_component(s, 0)).collect(),
                    leakage: Some((
                        (0..ns).map(|s| res.component(s, 1)).collect(),
                        (0..ns).map(|s| res.se_component(s, 1)).collect(),
                    )),
                    times: res.times,
                }
            }
        };
        outs.push(out);
    }

    let times = outs[0].times.clone();
    if outs.iter().any(|o| o.times != times) {
        return Err(HdsError::Numerics("ising: variants disagree on sample times".into()));
    }
    rec.x = times.clone();
    rec.columns.push(Column::plain("t_over_T", times.iter().map(|t| t / t_total).collect()));
    rec.columns
        .push(Column::plain("g_over_a0", times.iter().map(|&t| schedule.g_at(t) / a0).collect()));

    let s_ed = ed_ground_state_sxx(n)?;
    let mut finals = serde_json::Map::new();
    for o in &outs {
        let name = format!("s_xx_{}", o.key);
        rec.columns.push(Column::with_se(&name, o.s_xx.clone(), o.s_xx_se.clone()));
        if let Some((leak, leak_se)) = &o.leakage {
            rec.columns.push(Column::with_se(
                &format!("leakage_{}", o.key),
                leak.clone(),
                leak_se.clone(),
            ));
        }
        let last = o.s_xx.len() - 1;
        finals.insert(
            o.key.to_string(),
            json!({
                "s_xx_final": o.s_xx[last],
                "s_xx_final_se": o.s_xx_se[last],
                "relative_ed_deviation": (o.s_xx[last] - s_ed).abs() / s_ed,
                "n_traj": o.n_traj,
                "max_mean_leakage": o.leakage.as_ref()
                    .map(|(l, _)| l.iter().cloned().fold(0.0f64, f64::max)),
            }),
        );
    }

    rec.summary = json!({
        "a0_rad_per_us": a0,
        "t_total_us": t_total,
        "s_xx_ed_ground_state": s_ed,
        "finals": finals,
        "protection_rabi_over_a0": p.protection_rabi_over_a0,
        "trotter_period_us": trotter,
    });
    Ok(rec)
}
