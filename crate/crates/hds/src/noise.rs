//! Stochastic control-noise traces: Ornstein-Uhlenbeck detuning and amplitude
//! noise, piecewise-constant phase jitter, and the seed bookkeeping that makes
//! every trajectory reproducible independent of thread scheduling.
//!
//! All traces are sampled on the coefficient grid and held constant over each
//! step (the propagator sees zero-order-hold coefficients). The OU update is the
//! exact discrete-time transition of the continuous process, so step size only
//! affects how finely the trace is resolved, never its statistics:
//!
//!   x_{i+1} = x_i e^{-dt/τc} + σ √(1 - e^{-2 dt/τc}) ξ_i,   x_0 ~ N(0, σ²),
//!
//! with σ the *stationary* standard deviation and ξ_i iid standard normal.

use rand::{Rng, RngExt};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::HdsError;

/// Stationary std-dev and correlation time of an OU process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuParams {
    pub sigma: f64,
    pub tau_c: f64,
}

/// Uniformly distributed phase offsets in [-bound, bound], redrawn every `dwell`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseJitterParams {
    pub bound: f64,
    pub dwell: f64,
}

/// Which stochastic terms a model carries.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseSpec {
    /// Independent per-site detuning noise, in angular frequency units.
    pub site_dephasing: Option<OuParams>,
    /// One relative (dimensionless) amplitude trace shared by all drives.
    pub shared_amp: Option<OuParams>,
    /// Drive phase jitter, radians.
    pub phase_jitter: Option<PhaseJitterParams>,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), HdsError> {
        for (name, p) in [("site_dephasing", self.site_dephasing), ("shared_amp", self.shared_amp)] {
            if let Some(p) = p {
                if !(p.tau_c > 0.0) || !(p.sigma >= 0.0) {
                    return Err(HdsError::Config(format!(
                        "{name}: need tau_c > 0 and sigma >= 0, got tau_c={}, sigma={}",
                        p.tau_c, p.sigma
                    )));
                }
            }
        }
        if let Some(p) = self.phase_jitter {
            if !(p.dwell > 0.0) || !(p.bound >= 0.0) {
                return Err(HdsError::Config(format!(
                    "phase_jitter: need dwell > 0 and bound >= 0, got dwell={}, bound={}",
                    p.dwell, p.bound
                )));
            }
        }
        Ok(())
    }

    pub fn is_quiet(&self) -> bool {
        self.site_dephasing.is_none() && self.shared_amp.is_none() && self.phase_jitter.is_none()
    }
}

/// One trajectory's noise traces, one value per coefficient-grid step.
#[derive(Clone, Debug)]
pub struct NoiseRealization {
    pub dt: f64,
    /// [site][step], angular frequency units. Empty when site dephasing is off.
    pub site_dephasing: Vec<Vec<f64>>,
    /// [step], relative amplitude deviation. Empty when amplitude noise is off.
    pub shared_amp: Vec<f64>,
    /// [step], radians. Empty when phase jitter is off.
    pub phase_jitter: Vec<f64>,
}

impl NoiseRealization {
    pub fn quiet(dt: f64) -> Self {
        NoiseRealization {
            dt,
            site_dephasing: Vec::new(),
            shared_amp: Vec::new(),
            phase_jitter: Vec::new(),
        }
    }

    #[inline]
    pub fn dephasing_at(&self, site: usize, step: usize) -> f64 {
        self.site_dephasing.get(site).map_or(0.0, |tr| tr[step])
    }

    #[inline]
    pub fn amp_at(&self, step: usize) -> f64 {
        if self.shared_amp.is_empty() {
            0.0
        } else {
            self.shared_amp[step]
        }
    }

    #[inline]
    pub fn phase_at(&self, step: usize) -> f64 {
        if self.phase_jitter.is_empty() {
            0.0
        } else {
            self.phase_jitter[step]
        }
    }

    /// Writes the traces as CSV: time, each site column, shared amplitude, phase.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<(), HdsError> {
        let n_steps = self
            .site_dephasing
            .first()
            .map(|t| t.len())
            .or(if self.shared_amp.is_empty() { None } else { Some(self.shared_amp.len()) })
            .or(if self.phase_jitter.is_empty() { None } else { Some(self.phase_jitter.len()) })
            .unwrap_or(0);
        write!(w, "t")?;
        for i in 0..self.site_dephasing.len() {
            write!(w, ",site{i}_dz")?;
        }
        if !self.shared_amp.is_empty() {
            write!(w, ",d_omega")?;
        }
        if !self.phase_jitter.is_empty() {
            write!(w, ",d_phase")?;
        }
        writeln!(w)?;
        for s in 0..n_steps {
            write!(w, "{}", s as f64 * self.dt)?;
            for tr in &self.site_dephasing {
                write!(w, ",{}", tr[s])?;
            }
            if !self.shared_amp.is_empty() {
                write!(w, ",{}", self.shared_amp[s])?;
            }
            if !self.phase_jitter.is_empty() {
                write!(w, ",{}", self.phase_jitter[s])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// SplitMix64 finalizer as a pure function; the standard generator's output for
/// state `x` (i.e. mix(x + golden)).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed. Stream indices shift by one so that
/// stream 0 never collides with the parent's own hash.
pub fn child_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ (stream.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Exact-discretization OU trace of `n_steps` values.
pub fn sample_ou(params: OuParams, n_steps: usize, dt: f64, rng: &mut impl Rng) -> Vec<f64> {
    assert!(params.tau_c > 0.0 && dt > 0.0);
    let rho = (-dt / params.tau_c).exp();
    let q = params.sigma * (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(n_steps);
    let mut x = params.sigma * rng.sample::<f64, _>(StandardNormal);
    for _ in 0..n_steps {
        out.push(x);
        x = rho * x + q * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

/// Piecewise-constant uniform jitter; a new value every ceil(dwell/dt) steps.
pub fn sample_phase_jitter(
    params: PhaseJitterParams,
    n_steps: usize,
    dt: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    assert!(params.dwell > 0.0 && dt > 0.0);
    let hold = ((params.dwell / dt).round() as usize).max(1);
    let mut out = Vec::with_capacity(n_steps);
    let mut current = 0.0;
    for s in 0..n_steps {
        if s % hold == 0 {
            current = if params.bound > 0.0 {
                rng.random_range(-params.bound..=params.bound)
            } else {
                0.0
            };
        }
        out.push(current);
    }
    out
}

/// Streams within one trajectory: site i uses stream i, then the shared
/// amplitude trace, then phase jitter.
pub fn build_realization(
    spec: &NoiseSpec,
    n_sites: usize,
    n_steps: usize,
    dt: f64,
    master_seed: u64,
    traj_index: u64,
) -> NoiseRealization {
    let traj_seed = child_seed(master_seed, traj_index);
    let mut real = NoiseRealization::quiet(dt);
    if let Some(p) = spec.site_dephasing {
        real.site_dephasing = (0..n_sites)
            .map(|site| {
                let mut rng = ChaCha12Rng::seed_from_u64(child_seed(traj_seed, site as u64));
                sample_ou(p, n_steps, dt, &mut rng)
            })
            .collect();
    }
    if let Some(p) = spec.shared_amp {
        let mut rng = ChaCha12Rng::seed_from_u64(child_seed(traj_seed, n_sites as u64));
        real.shared_amp = sample_ou(p, n_steps, dt, &mut rng);
    }
    if let Some(p) = spec.phase_jitter {
        let mut rng = ChaCha12Rng::seed_from_u64(child_seed(traj_seed, n_sites as u64 + 1));
        real.phase_jitter = sample_phase_jitter(p, n_steps, dt, &mut rng);
    }
    real
}

/// Ramsey coherence of a single spin under OU detuning noise:
/// (1 + exp(-σ²[τc t - τc²(1 - e^{-t/τc})])) / 2.
/// Starts at 1, decays toward the fully dephased value 1/2.
pub fn ou_dephasing_coherence(sigma: f64, tau_c: f64, t: f64) -> f64 {
    let chi = sigma * sigma * (tau_c * t - tau_c * tau_c * (1.0 - (-t / tau_c).exp()));
    0.5 * (1.0 + (-chi).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First three outputs of the reference splitmix64 stream seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(2)), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn child_seeds_are_distinct() {
        let parent = 0xC0FFEE;
        let seeds: Vec<u64> = (0..64).map(|s| child_seed(parent, s)).collect();
        for i in 0..seeds.len() {
            for j in (i + 1)..seeds.len() {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
        assert_ne!(child_seed(parent, 0), child_seed(parent + 1, 0));
    }

    #[test]
    fn ou_stationary_statistics() {
        let p = OuParams { sigma: 0.7, tau_c: 2.0 };
        let dt = 0.4;
        let n = 400_000;
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let tr = sample_ou(p, n, dt, &mut rng);
        let mean: f64 = tr.iter().sum::<f64>() / n as f64;
        let var: f64 = tr.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let lag1: f64 = tr.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
        // Effective sample count is reduced by correlations; tolerances are ~5 SE.
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var.sqrt() - 0.7).abs() < 0.01, "std {}", var.sqrt());
        let expect_lag1 = 0.49 * (-dt / 2.0f64).exp();
        assert!((lag1 - expect_lag1).abs() < 0.01, "lag1 {lag1} vs {expect_lag1}");
    }

    #[test]
    fn ou_statistics_independent_of_step_size() {
        // The update is the exact transition density: the marginal variance must
        // not drift with dt, only the trace resolution changes.
        for &dt in &[0.01, 0.3, 5.0] {
            let p = OuParams { sigma: 1.3, tau_c: 0.7 };
            let mut rng = ChaCha12Rng::seed_from_u64(7);
            let tr = sample_ou(p, 200_000, dt, &mut rng);
            let var: f64 = tr.iter().map(|x| x * x).sum::<f64>() / tr.len() as f64;
            assert!(
                (var.sqrt() - 1.3).abs() < 0.02,
                "std {} at dt={dt}",
                var.sqrt()
            );
        }
    }

    #[test]
    fn phase_jitter_bounds_and_dwell() {
        let p = PhaseJitterParams { bound: 0.25, dwell: 1.0 };
        let dt = 0.25;
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let tr = sample_phase_jitter(p, 1000, dt, &mut rng);
        assert!(tr.iter().all(|&v| v.abs() <= 0.25));
        // Constant inside each 4-step segment, and segments actually change.
        for seg in tr.chunks(4) {
            assert!(seg.iter().all(|&v| v == seg[0]));
        }
        let distinct: std::collections::HashSet<u64> =
            tr.iter().step_by(4).map(|v| v.to_bits()).collect();
        assert!(distinct.len() > 200);
    }

    #[test]
    fn realization_is_deterministic_and_streams_differ() {
        let spec = NoiseSpec {
            site_dephasing: Some(OuParams { sigma: 0.1, tau_c: 20.0 }),
            shared_amp: Some(OuParams { sigma: 0.02, tau_c: 20.0 }),
            phase_jitter: Some(PhaseJitterParams { bound: 0.1, dwell: 20.0 }),
        };
        let a = build_realization(&spec, 3, 50, 0.1, 0xC0FFEE, 4);
        let b = build_realization(&spec, 3, 50, 0.1, 0xC0FFEE, 4);
        assert_eq!(a.site_dephasing, b.site_dephasing);
        assert_eq!(a.shared_amp, b.shared_amp);
        assert_eq!(a.phase_jitter, b.phase_jitter);

        let c = build_realization(&spec, 3, 50, 0.1, 0xC0FFEE, 5);
        assert_ne!(a.site_dephasing, c.site_dephasing);
        assert_ne!(a.site_dephasing[0], a.site_dephasing[1]);
        assert_ne!(a.site_dephasing[0], a.shared_amp);
    }

    #[test]
    fn quiet_spec_and_accessors() {
        let spec = NoiseSpec::default();
        assert!(spec.is_quiet());
        let r = build_realization(&spec, 4, 10, 0.1, 1, 0);
        assert_eq!(r.dephasing_at(2, 5), 0.0);
        assert_eq!(r.amp_at(5), 0.0);
        assert_eq!(r.phase_at(5), 0.0);
    }

    #[test]
    fn validate_rejects_bad_params() {
        let mut spec = NoiseSpec {
            site_dephasing: Some(OuParams { sigma: 0.1, tau_c: 0.0 }),
            ..NoiseSpec::default()
        };
        assert!(spec.validate().is_err());
        spec.site_dephasing = None;
        spec.phase_jitter = Some(PhaseJitterParams { bound: -1.0, dwell: 1.0 });
        assert!(spec.validate().is_err());
    }

    #[test]
    fn dephasing_formula_limits() {
        let (sigma, tau_c) = (0.3, 5.0);
        assert!((ou_dephasing_coherence(sigma, tau_c, 0.0) - 1.0).abs() < 1e-15);
        assert!((ou_dephasing_coherence(sigma, tau_c, 1e7) - 0.5).abs() < 1e-12);
        // short-time Gaussian: 1 - σ²t²/4 (next correction is O(t³/τc))
        let t = 0.001;
        let approx = 1.0 - sigma * sigma * t * t / 4.0;
        assert!((ou_dephasing_coherence(sigma, tau_c, t) - approx).abs() < 1e-11);
    }

    #[test]
    fn monte_carlo_matches_dephasing_formula() {
        // Accumulated phase φ = ∫ x dt over each trace; ⟨cos φ⟩ must reproduce
        // the closed form. This ties the sampler's correlations to the formula
        // actually used as the experiment's analytic reference.
        let (sigma, tau_c) = (1.0, 1.0);
        let t_final: f64 = 2.0;
        let dt = tau_c / 200.0;
        let n_steps = (t_final / dt).round() as usize;
        let n_traj = 4000;
        let p = OuParams { sigma, tau_c };
        let mut acc = 0.0;
        for traj in 0..n_traj {
            let mut rng = ChaCha12Rng::seed_from_u64(child_seed(0xFEED, traj));
            let tr = sample_ou(p, n_steps, dt, &mut rng);
            let phi: f64 = tr.iter().sum::<f64>() * dt;
            acc += phi.cos();
        }
        let mc = 0.5 * (1.0 + acc / n_traj as f64);
        let formula = ou_dephasing_coherence(sigma, tau_c, t_final);
        // 3 SE ≈ 0.028 plus a small zero-order-hold bias allowance.
        assert!(
            (mc - formula).abs() < 0.03,
            "MC {mc} vs formula {formula}"
        );
    }

    #[test]
    fn csv_dump_shape() {
        let spec = NoiseSpec {
            site_dephasing: Some(OuParams { sigma: 0.1, tau_c: 1.0 }),
            shared_amp: Some(OuParams { sigma: 0.01, tau_c: 1.0 }),
            phase_jitter: None,
        };
        let r = build_realization(&spec, 2, 5, 0.5, 9, 0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,site0_dz,site1_dz,d_omega");
        assert_eq!(lines.count(), 5);
    }
}
