//! Driven spin systems assembled into time-dependent Hamiltonians.
//!
//! Two pictures are supported. In the first interaction frame the carrier is
//! gone but everything else is physical: drives enter as transverse fields
//! with their amplitude/phase noise, magnetic noise enters along z, and the
//! bare couplings are z⊗z. In the second interaction frame the state is
//! expressed in the dressed basis of a (possibly detuned) first drive and
//! co-rotates with its splitting, so the z⊗z coupling turns into angle-
//! weighted zz/xx/yy pieces, magnetic noise is tilted by cos θ, and the
//! decoupling drive appears as a static transverse field.
//!
//! The hybrid pair encoding (one protected qubit per site pair) and the
//! dressed single-spin basis live here too.

use crate::noise::{NoiseRealization, NoiseSpec};
use crate::propagate::{Grid, Hamiltonian};
use crate::spinops::dense::{vnorm, C64, DenseOp};
use crate::spinops::pauli::{pauli_string, PauliString, PauliSum};
use crate::spinops::{embed, sigma_x, sigma_y, sigma_z, OperatorMatrix, TensorLayout};
use crate::HdsError;

/// Per-site drive parameters: amplitude, detuning, and whether the shared
/// amplitude fluctuation rides on this drive.
type SiteDrive = (f64, f64, bool);

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Which rotating frame the assembled Hamiltonian lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Carrier frequency included; never simulated, kept for documentation.
    Lab,
    /// Rotating at the carrier. Drives are transverse fields, couplings z⊗z.
    FirstInteraction,
    /// Dressed basis of the first drive, co-rotating with its splitting.
    SecondInteraction,
}

/// Whether the z⊗z coupling constant multiplies s = σ/2 or bare σ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinConvention {
    /// a·s_z⊗s_z, i.e. (a/4)·σ_z⊗σ_z.
    Half,
    /// a·σ_z⊗σ_z.
    Full,
}

impl SpinConvention {
    fn factor(self) -> f64 {
        match self {
            SpinConvention::Half => 0.25,
            SpinConvention::Full => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluctuationSource {
    None,
    /// Drive consumes the shared relative-amplitude and phase traces.
    SharedAmpPhase,
}

/// One resonant or detuned drive layer, applied to a set of sites.
#[derive(Clone, Debug)]
pub struct DriveSpec {
    /// Rabi amplitude Ω, rad/µs. Must be ≥ 0; the sign convention is carried
    /// by the alternation schedule, not by Ω.
    pub rabi: f64,
    /// Detuning Δ, rad/µs.
    pub detuning: f64,
    pub target_sites: Vec<usize>,
    pub fluctuation_source: FluctuationSource,
}

/// The decoupling drive layer: one amplitude per pair, assigned K-periodically
/// when fewer amplitudes than pairs are given.
#[derive(Clone, Debug)]
pub struct SecondDriveSpec {
    /// Ω'_k, rad/µs, each > 0.
    pub rabi_prime: Vec<f64>,
    pub fluctuation_source: FluctuationSource,
}

/// Dressing angle per site, possibly time dependent (second frame only).
#[derive(Clone, Debug)]
pub enum AngleProfile {
    /// Oneθ per site, radians in [0, π].
    Static(Vec<f64>),
    /// sin²θ(t) = t/t_total on all sites: the adiabatic ramp from z-coupled
    /// (θ=0) to fully transverse (θ=π/2).
    LinearSin2Ramp { t_total: f64 },
}

/// Full description of a driven spin system; `compile` turns it into a
/// propagator-ready Hamiltonian.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub layout: TensorLayout,
    /// Symmetric site-level coupling matrix, rad/µs, zero diagonal.
    pub coupling: Vec<Vec<f64>>,
    pub convention: SpinConvention,
    pub frame: Frame,
    pub first_drive: Vec<DriveSpec>,
    pub second_drive: Option<SecondDriveSpec>,
    pub angle_profile: Option<AngleProfile>,
    /// Alternation period P of the pair b-site drives. In the first frame the
    /// b-site drive sign flips every P; in the second frame the flip shows up
    /// as the sign of cross-sublattice y⊗y terms.
    pub trotter_period: Option<f64>,
    pub noise: NoiseSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelRep {
    Dense,
    Pauli,
}

/// Dense below this dimension, masked Pauli kernels at and above it.
const DENSE_LIMIT: usize = 256;

#[derive(Clone, Copy, Debug)]
enum Quadrature {
    Cos,
    Sin,
}

/// Coefficient rule of one Hermitian term. Evaluated per step; the operator
/// part is fixed at compile time.
#[derive(Clone, Copy, Debug)]
enum CoeffRule {
    Const(f64),
    /// s(t)·(Ω/2)·(1+ξ(t))·cos/sin δp(t).
    Drive { half_rabi: f64, fluct: bool, alternates: bool, quad: Quadrature },
    /// static + δz_i(t)/2 on σ_z.
    Dephase { site: usize, static_half: f64 },
    /// a·cos θ_i·cos θ_j on σ_z⊗σ_z.
    CouplingZz { i: usize, j: usize, a: f64 },
    /// (a/2)·sin θ_i·sin θ_j on σ_x⊗σ_x.
    CouplingXx { i: usize, j: usize, half_a: f64 },
    /// Same weight on σ_y⊗σ_y, with the alternation sign when the two sites
    /// sit on different sublattices of the pairing.
    CouplingYy { i: usize, j: usize, half_a: f64, alternates: bool },
}

#[derive(Clone, Debug)]
enum ThetaRule {
    Unused,
    /// (sin θ, cos θ) per site.
    Static(Vec<(f64, f64)>),
    Ramp { t_total: f64 },
}

impl ThetaRule {
    #[inline]
    fn at(&self, site: usize, t: f64) -> (f64, f64) {
        match self {
            ThetaRule::Unused => (1.0, 0.0),
            ThetaRule::Static(v) => v[site],
            ThetaRule::Ramp { t_total } => {
                let x = (t / t_total).clamp(0.0, 1.0);
                (x.sqrt(), (1.0 - x).sqrt())
            }
        }
    }
}

#[derive(Clone, Debug)]
enum TermOps {
    Dense(Vec<DenseOp>),
    Pauli(Vec<PauliString>),
}

/// A compiled, propagator-ready time-dependent Hamiltonian.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    layout: TensorLayout,
    noise: NoiseSpec,
    rules: Vec<CoeffRule>,
    ops: TermOps,
    theta: ThetaRule,
    trotter_period: Option<f64>,
    f_max: f64,
}

impl SystemSpec {
    pub fn compile(&self) -> Result<CompiledModel, HdsError> {
        let rep = if self.layout.dim() < DENSE_LIMIT { ModelRep::Dense } else { ModelRep::Pauli };
        self.compile_forced(rep)
    }

    pub fn compile_forced(&self, rep: ModelRep) -> Result<CompiledModel, HdsError> {
        self.noise.validate()?;
        if self.layout.boson_dim().is_some() {
            return Err(HdsError::Model(
                "spin-system compile does not take a boson mode".into(),
            ));
        }
        let n = self.layout.n_spins();
        self.check_coupling(n)?;

        if let Some(p) = self.trotter_period {
            if !(p > 0.0) {
                return Err(HdsError::Model(format!("alternation period must be > 0, got {p}")));
            }
            if self.layout.pairing().is_empty() {
                return Err(HdsError::Model(
                    "alternation schedule needs a pairing to define the b sublattice".into(),
                ));
            }
        }
        // b-sublattice = second member of each pair.
        let mut b_site = vec![false; n];
        for &(_, b) in self.layout.pairing() {
            b_site[b] = true;
        }

        let (terms, theta) = match self.frame {
            Frame::Lab => {
                return Err(HdsError::Model(
                    "lab-frame dynamics at the carrier frequency is not simulated; \
                     use the first interaction frame"
                        .into(),
                ))
            }
            Frame::FirstInteraction => self.first_frame_rules(n, &b_site)?,
            Frame::SecondInteraction => self.second_frame_rules(n, &b_site)?,
        };

        if rep == ModelRep::Pauli && self.noise.phase_jitter.is_some() {
            return Err(HdsError::Model(
                "drive phase jitter needs a σ_y drive component, which the masked \
                 Pauli kernel cannot hold; use a dense representation"
                    .into(),
            ));
        }

        let (rules, shapes): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
        let ops = build_ops(&self.layout, &shapes, rep)?;
        let f_max = self.peak_coefficient(&rules) / std::f64::consts::TAU;

        Ok(CompiledModel {
            layout: self.layout.clone(),
            noise: self.noise,
            rules,
            ops,
            theta,
            trotter_period: self.trotter_period,
            f_max,
        })
    }

    fn check_coupling(&self, n: usize) -> Result<(), HdsError> {
        if self.coupling.len() != n || self.coupling.iter().any(|row| row.len() != n) {
            return Err(HdsError::Model(format!(
                "coupling matrix must be {n}×{n} to match the layout"
            )));
        }
        for i in 0..n {
            if self.coupling[i][i] != 0.0 {
                return Err(HdsError::Model(format!("coupling diagonal must be zero (site {i})")));
            }
            for j in (i + 1)..n {
                let (a, b) = (self.coupling[i][j], self.coupling[j][i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(HdsError::Model(format!(
                        "coupling matrix must be symmetric: a[{i}][{j}]={a} vs a[{j}][{i}]={b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-site resolution of the drive list into (Ω, Δ, fluctuation).
    fn resolve_first_drive(&self, n: usize) -> Result<Vec<Option<SiteDrive>>, HdsError> {
        let mut per_site: Vec<Option<SiteDrive>> = vec![None; n];
        for d in &self.first_drive {
            if d.rabi < 0.0 {
                return Err(HdsError::Model(format!("drive amplitude must be ≥ 0, got {}", d.rabi)));
            }
            let fluct = d.fluctuation_source == FluctuationSource::SharedAmpPhase;
            for &s in &d.target_sites {
                if s >= n {
                    return Err(HdsError::Model(format!("drive targets site {s}, layout has {n}")));
                }
                if per_site[s].is_some() {
                    return Err(HdsError::Model(format!("site {s} is targeted by two drives")));
                }
                per_site[s] = Some((d.rabi, d.detuning, fluct));
            }
        }
        Ok(per_site)
    }

    fn first_frame_rules(
        &self,
        n: usize,
        b_site: &[bool],
    ) -> Result<(Vec<(CoeffRule, OpShape)>, ThetaRule), HdsError> {
        if self.angle_profile.is_some() {
            return Err(HdsError::Model(
                "angle profiles describe the second interaction frame; the first frame \
                 carries angles implicitly through Ω and Δ"
                    .into(),
            ));
        }
        if self.second_drive.is_some() {
            return Err(HdsError::Model(
                "the decoupling drive layer is only representable in the second \
                 interaction frame"
                    .into(),
            ));
        }
        let per_site = self.resolve_first_drive(n)?;
        let jitter = self.noise.phase_jitter.is_some();
        let dephasing = self.noise.site_dephasing.is_some();

        let mut rules = Vec::new();
        for i in 0..n {
            let (rabi, detuning, fluct) = per_site[i].unwrap_or((0.0, 0.0, false));
            let alternates = b_site[i] && self.trotter_period.is_some();
            if rabi != 0.0 {
                rules.push((
                    CoeffRule::Drive {
                        half_rabi: 0.5 * rabi,
                        fluct,
                        alternates,
                        quad: Quadrature::Cos,
                    },
                    OpShape::X(i),
                ));
                if jitter {
                    rules.push((
                        CoeffRule::Drive {
                            half_rabi: 0.5 * rabi,
                            fluct,
                            alternates,
                            quad: Quadrature::Sin,
                        },
                        OpShape::Y(i),
                    ));
                }
            }
            if detuning != 0.0 || dephasing {
                rules.push((
                    CoeffRule::Dephase { site: i, static_half: 0.5 * detuning },
                    OpShape::Z(i),
                ));
            }
        }
        let conv = self.convention.factor();
        for i in 0..n {
            for j in (i + 1)..n {
                let a = conv * self.coupling[i][j];
                if a != 0.0 {
                    rules.push((CoeffRule::Const(a), OpShape::Zz(i, j)));
                }
            }
        }
        Ok((rules, ThetaRule::Unused))
    }

    fn second_frame_rules(
        &self,
        n: usize,
        b_site: &[bool],
    ) -> Result<(Vec<(CoeffRule, OpShape)>, ThetaRule), HdsError> {
        let pairing = self.layout.pairing();
        if pairing.is_empty() || 2 * pairing.len() != n {
            return Err(HdsError::Model(
                "the second interaction frame needs every site assigned to a pair".into(),
            ));
        }
        let second = self.second_drive.as_ref().ok_or_else(|| {
            HdsError::Model("the second interaction frame needs a decoupling drive".into())
        })?;
        if second.rabi_prime.is_empty() || second.rabi_prime.len() > pairing.len() {
            return Err(HdsError::Model(format!(
                "decoupling amplitudes: got {}, need between 1 and {} (assigned periodically)",
                second.rabi_prime.len(),
                pairing.len()
            )));
        }
        if second.rabi_prime.iter().any(|&w| !(w > 0.0)) {
            return Err(HdsError::Model("decoupling amplitudes must be > 0".into()));
        }
        if self.noise.phase_jitter.is_some() {
            return Err(HdsError::Model(
                "drive phase jitter acts on the first drive and has no image in the \
                 second interaction frame; declare it on a first-frame system"
                    .into(),
            ));
        }

        let theta = match &self.angle_profile {
            Some(profile) => {
                if !self.first_drive.is_empty() {
                    return Err(HdsError::Model(
                        "give either an angle profile or a first drive to set θ, not both".into(),
                    ));
                }
                match profile {
                    AngleProfile::Static(v) => {
                        if v.len() != n {
                            return Err(HdsError::Model(format!(
                                "static angle profile has {} entries for {n} sites",
                                v.len()
                            )));
                        }
                        if v.iter().any(|&t| !(0.0..=std::f64::consts::PI).contains(&t)) {
                            return Err(HdsError::Model("angles must lie in [0, π]".into()));
                        }
                        ThetaRule::Static(v.iter().map(|&t| t.sin_cos()).collect())
                    }
                    AngleProfile::LinearSin2Ramp { t_total } => {
                        if !(*t_total > 0.0) {
                            return Err(HdsError::Model("ramp duration must be > 0".into()));
                        }
                        ThetaRule::Ramp { t_total: *t_total }
                    }
                }
            }
            None => {
                // tan θ = Ω/Δ per site, from the first drive.
                let per_site = self.resolve_first_drive(n)?;
                let mut sc = Vec::with_capacity(n);
                for (i, d) in per_site.iter().enumerate() {
                    let (rabi, detuning, _) = d.ok_or_else(|| {
                        HdsError::Model(format!(
                            "site {i} has no dressing angle: give an angle profile or drive \
                             every site"
                        ))
                    })?;
                    sc.push(rabi.atan2(detuning).sin_cos());
                }
                ThetaRule::Static(sc)
            }
        };

        let fluct = second.fluctuation_source == FluctuationSource::SharedAmpPhase;
        let dephasing = self.noise.site_dephasing.is_some();
        let mut rules = Vec::new();
        for (k, &(a, b)) in pairing.iter().enumerate() {
            let half = 0.5 * second.rabi_prime[k % second.rabi_prime.len()];
            for site in [a, b] {
                // Static sign on both sublattices: the b-site amplitude flip is
                // already absorbed by the co-rotating frame, leaving only the
                // y⊗y alternation below.
                rules.push((
                    CoeffRule::Drive { half_rabi: half, fluct, alternates: false, quad: Quadrature::Cos },
                    OpShape::X(site),
                ));
            }
        }
        if dephasing {
            // δ is the effective dressed-basis dephasing amplitude, so no θ
            // weighting here; the tilt bookkeeping lives in the first frame.
            for i in 0..n {
                rules.push((CoeffRule::Dephase { site: i, static_half: 0.0 }, OpShape::Z(i)));
            }
        }
        let conv = self.convention.factor();
        let alternation = self.trotter_period.is_some();
        for i in 0..n {
            for j in (i + 1)..n {
                let a = conv * self.coupling[i][j];
                if a == 0.0 {
                    continue;
                }
                rules.push((CoeffRule::CouplingZz { i, j, a }, OpShape::Zz(i, j)));
                rules.push((CoeffRule::CouplingXx { i, j, half_a: 0.5 * a }, OpShape::Xx(i, j)));
                rules.push((
                    CoeffRule::CouplingYy {
                        i,
                        j,
                        half_a: 0.5 * a,
                        alternates: alternation && (b_site[i] != b_site[j]),
                    },
                    OpShape::Yy(i, j),
                ));
            }
        }
        Ok((rules, theta))
    }

    /// Conservative peak |coefficient| over rules, for the step-size bound.
    fn peak_coefficient(&self, rules: &[CoeffRule]) -> f64 {
        let sigma_z3 = self.noise.site_dephasing.as_ref().map_or(0.0, |p| 3.0 * p.sigma);
        let amp3 = self.noise.shared_amp.as_ref().map_or(0.0, |p| 3.0 * p.sigma);
        rules
            .iter()
            .map(|r| match *r {
                CoeffRule::Const(c) => c.abs(),
                CoeffRule::Drive { half_rabi, fluct, .. } => {
                    half_rabi * (1.0 + if fluct { amp3 } else { 0.0 })
                }
                CoeffRule::Dephase { static_half, .. } => static_half.abs() + 0.5 * sigma_z3,
                CoeffRule::CouplingZz { a, .. } => a.abs(),
                CoeffRule::CouplingXx { half_a, .. } | CoeffRule::CouplingYy { half_a, .. } => {
                    half_a.abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Operator shapes; paired with rules during assembly, then materialized.
#[derive(Clone, Copy, Debug)]
enum OpShape {
    X(usize),
    Y(usize),
    Z(usize),
    Zz(usize, usize),
    Xx(usize, usize),
    Yy(usize, usize),
}

fn build_ops(
    layout: &TensorLayout,
    shapes: &[OpShape],
    rep: ModelRep,
) -> Result<TermOps, HdsError> {
    let n = layout.n_spins();
    match rep {
        ModelRep::Dense => {
            let mut ops = Vec::with_capacity(shapes.len());
            for s in shapes {
                let op = match *s {
                    OpShape::X(i) => embed(layout, &[i], &sigma_x())?,
                    OpShape::Y(i) => embed(layout, &[i], &sigma_y())?,
                    OpShape::Z(i) => embed(layout, &[i], &sigma_z())?,
                    OpShape::Zz(i, j) => embed(layout, &[i, j], &sigma_z().kron(&sigma_z()))?,
                    OpShape::Xx(i, j) => embed(layout, &[i, j], &sigma_x().kron(&sigma_x()))?,
                    OpShape::Yy(i, j) => embed(layout, &[i, j], &sigma_y().kron(&sigma_y()))?,
                };
                ops.push(op);
            }
            Ok(TermOps::Dense(ops))
        }
        ModelRep::Pauli => {
            let mut strings = Vec::with_capacity(shapes.len());
            for s in shapes {
                let ps = match *s {
                    OpShape::X(i) => pauli_string(n, &[(i, 'x')])?,
                    OpShape::Y(i) => pauli_string(n, &[(i, 'y')])?,
                    OpShape::Z(i) => pauli_string(n, &[(i, 'z')])?,
                    OpShape::Zz(i, j) => pauli_string(n, &[(i, 'z'), (j, 'z')])?,
                    OpShape::Xx(i, j) => pauli_string(n, &[(i, 'x'), (j, 'x')])?,
                    OpShape::Yy(i, j) => pauli_string(n, &[(i, 'y'), (j, 'y')])?,
                };
                strings.push(ps);
            }
            Ok(TermOps::Pauli(strings))
        }
    }
}

impl CompiledModel {
    pub fn rep(&self) -> ModelRep {
        match self.ops {
            TermOps::Dense(_) => ModelRep::Dense,
            TermOps::Pauli(_) => ModelRep::Pauli,
        }
    }

    #[inline]
    fn seg_sign(&self, step: usize, grid: &Grid) -> f64 {
        match self.trotter_period {
            None => 1.0,
            Some(p) => {
                let per_seg = (p / grid.dt()).round() as usize;
                if (step / per_seg.max(1)).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    #[inline]
    fn coeff(&self, rule: &CoeffRule, step: usize, t: f64, noise: &NoiseRealization, seg: f64) -> f64 {
        match *rule {
            CoeffRule::Const(c) => c,
            CoeffRule::Drive { half_rabi, fluct, alternates, quad } => {
                let mut c = half_rabi * (1.0 + if fluct { noise.amp_at(step) } else { 0.0 });
                if alternates {
                    c *= seg;
                }
                match quad {
                    Quadrature::Cos => c * noise.phase_at(step).cos(),
                    Quadrature::Sin => c * noise.phase_at(step).sin(),
                }
            }
            CoeffRule::Dephase { site, static_half } => {
                static_half + 0.5 * noise.dephasing_at(site, step)
            }
            CoeffRule::CouplingZz { i, j, a } => {
                a * self.theta.at(i, t).1 * self.theta.at(j, t).1
            }
            CoeffRule::CouplingXx { i, j, half_a } => {
                half_a * self.theta.at(i, t).0 * self.theta.at(j, t).0
            }
            CoeffRule::CouplingYy { i, j, half_a, alternates } => {
                let c = half_a * self.theta.at(i, t).0 * self.theta.at(j, t).0;
                if alternates {
                    c * seg
                } else {
                    c
                }
            }
        }
    }
}

impl Hamiltonian for CompiledModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn noise_sites(&self) -> usize {
        self.layout.n_spins()
    }

    fn noise_spec(&self) -> &NoiseSpec {
        &self.noise
    }

    fn new_buffer(&self) -> OperatorMatrix {
        match &self.ops {
            TermOps::Dense(_) => OperatorMatrix::Dense(DenseOp::zeros(self.dim())),
            TermOps::Pauli(_) => OperatorMatrix::Pauli(PauliSum::new(self.layout.n_spins())),
        }
    }

    fn eval_into(&self, step: usize, grid: &Grid, noise: &NoiseRealization, out: &mut OperatorMatrix) {
        let t = grid.t(step);
        let seg = self.seg_sign(step, grid);
        match (out, &self.ops) {
            (OperatorMatrix::Dense(d), TermOps::Dense(ops)) => {
                d.scale(C64::new(0.0, 0.0));
                for (rule, op) in self.rules.iter().zip(ops) {
                    let c = self.coeff(rule, step, t, noise, seg);
                    if c != 0.0 {
                        d.add_scaled(op, C64::new(c, 0.0));
                    }
                }
            }
            (OperatorMatrix::Pauli(p), TermOps::Pauli(strings)) => {
                p.clear_terms();
                for (rule, ps) in self.rules.iter().zip(strings) {
                    let c = self.coeff(rule, step, t, noise, seg);
                    if c != 0.0 {
                        p.add_string(ps, c).expect("even-σy strings verified at compile");
                    }
                }
                p.finalize();
            }
            _ => panic!("operator buffer representation does not match the compiled model"),
        }
    }

    fn max_frequency(&self) -> f64 {
        self.f_max
    }

    fn validate_grid(&self, grid: &Grid) -> Result<(), HdsError> {
        if let Some(p) = self.trotter_period {
            let ratio = p / grid.dt();
            if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return Err(HdsError::Config(format!(
                    "alternation period {p} is not an integer multiple of dt = {}",
                    grid.dt()
                )));
            }
        }
        if let ThetaRule::Ramp { t_total } = self.theta {
            if grid.t_final() > t_total * (1.0 + 1e-12) {
                return Err(HdsError::Config(format!(
                    "grid runs to {} but the angle ramp ends at {t_total}",
                    grid.t_final()
                )));
            }
        }
        Ok(())
    }
}

/// H(t) for a single grid time, mostly for inspection and tests; trajectory
/// propagation compiles once and reuses the buffer instead.
pub fn hamiltonian_at(
    system: &SystemSpec,
    realization: &NoiseRealization,
    t: f64,
) -> Result<OperatorMatrix, HdsError> {
    let model = system.compile()?;
    let dt = realization.dt;
    if !(dt > 0.0) {
        return Err(HdsError::Config(format!("realization step must be > 0, got {dt}")));
    }
    let step_f = t / dt;
    let step = step_f.round();
    if step < 0.0 || (step_f - step).abs() > 1e-9 * step_f.abs().max(1.0) {
        return Err(HdsError::Config(format!(
            "t = {t} is not on the realization grid (dt = {dt})"
        )));
    }
    let step = step as usize;
    for (site, tr) in realization.site_dephasing.iter().enumerate() {
        if tr.len() <= step {
            return Err(HdsError::Config(format!(
                "realization trace for site {site} ends before step {step}"
            )));
        }
    }
    let grid = Grid::from_times(dt * (step + 1) as f64, dt)?;
    model.validate_grid(&grid)?;
    let mut out = model.new_buffer();
    model.eval_into(step, &grid, realization, &mut out);
    out.assert_hermitian(1e-12)?;
    Ok(out)
}

/// |↑_θ⟩ = cos(θ/2)|↑⟩ + sin(θ/2)|↓⟩ and its orthogonal partner.
pub fn dressed_basis(theta: f64) -> Result<([C64; 2], [C64; 2]), HdsError> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(HdsError::Model(format!("dressing angle {theta} outside [0, π]")));
    }
    let (s, c) = (0.5 * theta).sin_cos();
    let up = [C64::new(c, 0.0), C64::new(s, 0.0)];
    let down = [C64::new(s, 0.0), C64::new(-c, 0.0)];
    Ok((up, down))
}

/// Isometry between the logical register (one qubit per pair) and the
/// protected two-site subspace: |↑̃⟩ = (|↑x↓x⟩+|↓x↑x⟩)/√2 and
/// |↓̃⟩ = (|↑x↓x⟩−|↓x↑x⟩)/√2 per pair. In the simulation basis these are
/// (|↑↑⟩−|↓↓⟩)/√2 and (|↓↑⟩−|↑↓⟩)/√2, identical in the first frame at
/// θ = π/2 and in the dressed basis of the second frame.
#[derive(Clone, Debug)]
pub struct HybridEncoding {
    n_spins: usize,
    /// spin-bit positions of (a, b) per pair; logical qubit k is pair k.
    pair_bits: Vec<(usize, usize)>,
}

/// Per-pair expansion: logical bit ↦ two physical branches
/// (bit_a, bit_b, sign/√2).
const BRANCHES: [[(usize, usize, f64); 2]; 2] = [
    [(0, 0, SQRT_HALF), (1, 1, -SQRT_HALF)],
    [(0, 1, -SQRT_HALF), (1, 0, SQRT_HALF)],
];

impl HybridEncoding {
    pub fn new(layout: &TensorLayout) -> Result<Self, HdsError> {
        if layout.boson_dim().is_some() {
            return Err(HdsError::Model("hybrid encoding is defined on spins only".into()));
        }
        let pairing = layout.pairing();
        if pairing.is_empty() || 2 * pairing.len() != layout.n_spins() {
            return Err(HdsError::Model(
                "hybrid encoding needs every site to belong to exactly one pair".into(),
            ));
        }
        let pair_bits =
            pairing.iter().map(|&(a, b)| (layout.spin_bit(a), layout.spin_bit(b))).collect();
        Ok(HybridEncoding { n_spins: layout.n_spins(), pair_bits })
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_bits.len()
    }

    pub fn logical_dim(&self) -> usize {
        1 << self.n_pairs()
    }

    pub fn physical_dim(&self) -> usize {
        1 << self.n_spins
    }

    /// V·logical. Errors when the input is not normalized (tolerance 1e-10).
    pub fn encode(&self, logical: &[C64]) -> Result<Vec<C64>, HdsError> {
        if logical.len() != self.logical_dim() {
            return Err(HdsError::Model(format!(
                "logical state has {} amplitudes, encoding expects {}",
                logical.len(),
                self.logical_dim()
            )));
        }
        let norm = vnorm(logical);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(HdsError::Model(format!(
                "logical state norm {norm} deviates from 1 beyond 1e-10"
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.physical_dim()];
        let np = self.n_pairs();
        for (l_idx, &amp) in logical.iter().enumerate() {
            if amp == C64::new(0.0, 0.0) {
                continue;
            }
            for m in 0..(1usize << np) {
                let mut phys = 0usize;
                let mut w = 1.0;
                for (k, &(bit_a, bit_b)) in self.pair_bits.iter().enumerate() {
                    let lbit = (l_idx >> (np - 1 - k)) & 1;
                    let (ba, bb, s) = BRANCHES[lbit][(m >> k) & 1];
                    phys |= ba << bit_a;
                    phys |= bb << bit_b;
                    w *= s;
                }
                out[phys] += amp * w;
            }
        }
        Ok(out)
    }

    /// V†·physical: unnormalized logical amplitudes.
    pub fn project(&self, physical: &[C64]) -> Result<Vec<C64>, HdsError> {
        if physical.len() != self.physical_dim() {
            return Err(HdsError::Model(format!(
                "physical state has {} amplitudes, encoding expects {}",
                physical.len(),
                self.physical_dim()
            )));
        }
        let np = self.n_pairs();
        let mut out = vec![C64::new(0.0, 0.0); self.logical_dim()];
        for (l_idx, slot) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..(1usize << np) {
                let mut phys = 0usize;
                let mut w = 1.0;
                for (k, &(bit_a, bit_b)) in self.pair_bits.iter().enumerate() {
                    let lbit = (l_idx >> (np - 1 - k)) & 1;
                    let (ba, bb, s) = BRANCHES[lbit][(m >> k) & 1];
                    phys |= ba << bit_a;
                    phys |= bb << bit_b;
                    w *= s;
                }
                acc += physical[phys] * w;
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Weight outside the protected subspace: 1 − ‖V†ψ‖².
    pub fn leakage(&self, physical: &[C64]) -> Result<f64, HdsError> {
        let p = self.project(physical)?;
        let inside = vnorm(&p).powi(2);
        Ok((1.0 - inside).clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_realization, OuParams, PhaseJitterParams};
    use crate::propagate::{evolve_trajectory, EvolveOptions};
    use crate::spinops::product_state;

    fn quiet_spec() -> NoiseSpec {
        NoiseSpec { site_dephasing: None, shared_amp: None, phase_jitter: None }
    }

    fn base_spec(layout: TensorLayout) -> SystemSpec {
        let n = layout.n_spins();
        SystemSpec {
            layout,
            coupling: vec![vec![0.0; n]; n],
            convention: SpinConvention::Full,
            frame: Frame::FirstInteraction,
            first_drive: Vec::new(),
            second_drive: None,
            angle_profile: None,
            trotter_period: None,
            noise: quiet_spec(),
        }
    }

    fn to_dense(m: &OperatorMatrix) -> DenseOp {
        match m {
            OperatorMatrix::Dense(d) => d.clone(),
            OperatorMatrix::Pauli(p) => p.to_dense(),
        }
    }

    fn max_diff(a: &DenseOp, b: &DenseOp) -> f64 {
        let n = a.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                worst = worst.max((a.at(r, c) - b.at(r, c)).norm());
            }
        }
        worst
    }

    fn eval_at_step(model: &CompiledModel, grid: &Grid, noise: &NoiseRealization, step: usize) -> DenseOp {
        let mut buf = model.new_buffer();
        model.eval_into(step, grid, noise, &mut buf);
        to_dense(&buf)
    }

    #[test]
    fn single_site_drive_is_half_rabi_sigma_x() {
        let omega = std::f64::consts::TAU * 3.5;
        let mut spec = base_spec(TensorLayout::spins(1).unwrap());
        spec.first_drive = vec![DriveSpec {
            rabi: omega,
            detuning: 0.0,
            target_sites: vec![0],
            fluctuation_source: FluctuationSource::None,
        }];
        let h = hamiltonian_at(&spec, &NoiseRealization::quiet(0.01), 0.0).unwrap();
        let expected = sigma_x().scaled(C64::new(0.5 * omega, 0.0));
        assert!(max_diff(&to_dense(&h), &expected) < 1e-14);
    }

    #[test]
    fn phase_jitter_tilts_the_drive_axis() {
        let omega = std::f64::consts::TAU * 3.5;
        let phase = 2.0f64.to_radians();
        let mut spec = base_spec(TensorLayout::spins(1).unwrap());
        spec.first_drive = vec![DriveSpec {
            rabi: omega,
            detuning: 0.0,
            target_sites: vec![0],
            fluctuation_source: FluctuationSource::SharedAmpPhase,
        }];
        spec.noise.phase_jitter = Some(PhaseJitterParams { bound: 0.1, dwell: 20.0 });
        let realization = NoiseRealization {
            dt: 0.01,
            site_dephasing: Vec::new(),
            shared_amp: Vec::new(),
            phase_jitter: vec![phase; 3],
        };
        let h = hamiltonian_at(&spec, &realization, 0.02).unwrap();
        let mut expected = sigma_x().scaled(C64::new(0.5 * omega * phase.cos(), 0.0));
        expected.add_scaled(&sigma_y(), C64::new(0.5 * omega * phase.sin(), 0.0));
        assert!(max_diff(&to_dense(&h), &expected) < 1e-14);
    }

    #[test]
    fn half_convention_coupling_block() {
        let a = 0.7;
        let mut spec = base_spec(TensorLayout::spins(2).unwrap());
        spec.convention = SpinConvention::Half;
        spec.coupling = vec![vec![0.0, a], vec![a, 0.0]];
        let h = hamiltonian_at(&spec, &NoiseRealization::quiet(0.01), 0.0).unwrap();
        let expected = sigma_z().kron(&sigma_z()).scaled(C64::new(a / 4.0, 0.0));
        assert!(max_diff(&to_dense(&h), &expected) < 1e-15);
    }

    #[test]
    fn detuning_and_dephasing_add_along_z() {
        let (omega, delta) = (1.3, -0.4);
        let mut spec = base_spec(TensorLayout::spins(1).unwrap());
        spec.first_drive = vec![DriveSpec {
            rabi: omega,
            detuning: delta,
            target_sites: vec![0],
            fluctuation_source: FluctuationSource::None,
        }];
        spec.noise.site_dephasing = Some(OuParams { sigma: 0.2, tau_c: 20.0 });
        let dz = 0.11;
        let realization = NoiseRealization {
            dt: 0.01,
            site_dephasing: vec![vec![dz; 2]],
            shared_amp: Vec::new(),
            phase_jitter: Vec::new(),
        };
        let h = hamiltonian_at(&spec, &realization, 0.01).unwrap();
        let mut expected = sigma_x().scaled(C64::new(0.5 * omega, 0.0));
        expected.add_scaled(&sigma_z(), C64::new(0.5 * (delta + dz), 0.0));
        assert!(max_diff(&to_dense(&h), &expected) < 1e-14);
    }

    fn two_pair_second_frame(static_angles: bool) -> SystemSpec {
        let layout = TensorLayout::spins(4).unwrap().with_pairing(&[(0, 1), (2, 3)]).unwrap();
        let mut a = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    a[i][j] = 0.13 / (i as f64 - j as f64).abs().powi(3);
                }
            }
        }
        let mut spec = base_spec(layout);
        spec.frame = Frame::SecondInteraction;
        spec.coupling = a;
        spec.second_drive = Some(SecondDriveSpec {
            rabi_prime: vec![2.1, 3.3],
            fluctuation_source: FluctuationSource::SharedAmpPhase,
        });
        spec.angle_profile = Some(if static_angles {
            AngleProfile::Static(vec![0.7, 0.7, 1.1, 1.1])
        } else {
            AngleProfile::LinearSin2Ramp { t_total: 8.0 }
        });
        spec.trotter_period = Some(0.5);
        spec.noise.site_dephasing = Some(OuParams { sigma: 0.25, tau_c: 20.0 });
        spec.noise.shared_amp = Some(OuParams { sigma: 0.02, tau_c: 20.0 });
        spec
    }

    #[test]
    fn dense_and_pauli_representations_agree() {
        for static_angles in [true, false] {
            let spec = two_pair_second_frame(static_angles);
            let dense = spec.compile_forced(ModelRep::Dense).unwrap();
            let pauli = spec.compile_forced(ModelRep::Pauli).unwrap();
            let grid = Grid::from_times(8.0, 0.125).unwrap();
            let noise = build_realization(&spec.noise, 4, grid.n_steps(), grid.dt(), 7, 0);
            for step in [0, 3, 4, 11, 63] {
                let hd = eval_at_step(&dense, &grid, &noise, step);
                let hp = eval_at_step(&pauli, &grid, &noise, step);
                assert!(
                    max_diff(&hd, &hp) < 1e-13,
                    "representations disagree at step {step} (static={static_angles})"
                );
                assert!(hd.max_nonhermiticity() < 1e-12);
            }
        }
    }

    #[test]
    fn alternation_flips_cross_sublattice_yy_only() {
        let mut spec = two_pair_second_frame(true);
        spec.noise = quiet_spec();
        spec.second_drive = Some(SecondDriveSpec {
            rabi_prime: vec![2.1, 3.3],
            fluctuation_source: FluctuationSource::None,
        });
        let model = spec.compile_forced(ModelRep::Dense).unwrap();
        let grid = Grid::from_times(2.0, 0.25).unwrap();
        let quiet = NoiseRealization::quiet(0.25);
        // P = 0.5 → two steps per segment: steps 0,1 in +, steps 2,3 in −.
        let h0 = eval_at_step(&model, &grid, &quiet, 0);
        let h1 = eval_at_step(&model, &grid, &quiet, 2);
        // The difference must be exactly twice the cross-sublattice yy terms.
        let mut expected = DenseOp::zeros(16);
        let layout = TensorLayout::spins(4).unwrap();
        let angles: Vec<f64> = vec![0.7, 0.7, 1.1, 1.1];
        for i in 0..4usize {
            for j in (i + 1)..4 {
                let cross = (i % 2) != (j % 2); // pairing (0,1),(2,3): b-sites are odd
                if !cross {
                    continue;
                }
                let a = 0.13 / (i as f64 - j as f64).abs().powi(3);
                let w = 0.5 * a * angles[i].sin() * angles[j].sin();
                let yy = embed(&layout, &[i, j], &sigma_y().kron(&sigma_y())).unwrap();
                expected.add_scaled(&yy, C64::new(2.0 * w, 0.0));
            }
        }
        let mut diff = h0.clone();
        diff.add_scaled(&h1, C64::new(-1.0, 0.0));
        assert!(max_diff(&diff, &expected) < 1e-13);
    }

    #[test]
    fn first_frame_alternation_flips_b_site_drives() {
        let layout = TensorLayout::spins(2).unwrap().with_pairing(&[(0, 1)]).unwrap();
        let mut spec = base_spec(layout);
        spec.first_drive = vec![DriveSpec {
            rabi: 2.0,
            detuning: 0.0,
            target_sites: vec![0, 1],
            fluctuation_source: FluctuationSource::None,
        }];
        spec.trotter_period = Some(0.5);
        let model = spec.compile().unwrap();
        let grid = Grid::from_times(2.0, 0.25).unwrap();
        let quiet = NoiseRealization::quiet(0.25);
        let h0 = eval_at_step(&model, &grid, &quiet, 0);
        let h1 = eval_at_step(&model, &grid, &quiet, 2);
        let layout = TensorLayout::spins(2).unwrap();
        let xa = embed(&layout, &[0], &sigma_x()).unwrap();
        let xb = embed(&layout, &[1], &sigma_x()).unwrap();
        let mut expect0 = xa.clone();
        expect0.add_scaled(&xb, C64::new(1.0, 0.0));
        let mut expect1 = xa;
        expect1.add_scaled(&xb, C64::new(-1.0, 0.0));
        assert!(max_diff(&h0, &expect0) < 1e-14);
        assert!(max_diff(&h1, &expect1) < 1e-14);
    }

    #[test]
    fn theta_from_first_drive_matches_explicit_profile() {
        let mut from_drive = two_pair_second_frame(true);
        from_drive.angle_profile = None;
        from_drive.noise = quiet_spec();
        // tan θ = Ω/Δ; pick Ω,Δ reproducing θ = 0.7 and 1.1.
        from_drive.first_drive = (0..4)
            .map(|i| {
                let th: f64 = if i < 2 { 0.7 } else { 1.1 };
                DriveSpec {
                    rabi: 5.0 * th.sin(),
                    detuning: 5.0 * th.cos(),
                    target_sites: vec![i],
                    fluctuation_source: FluctuationSource::None,
                }
            })
            .collect();
        let mut explicit = two_pair_second_frame(true);
        explicit.noise = quiet_spec();
        let grid = Grid::from_times(1.0, 0.25).unwrap();
        let quiet = NoiseRealization::quiet(0.25);
        let ha = eval_at_step(&from_drive.compile_forced(ModelRep::Dense).unwrap(), &grid, &quiet, 0);
        let hb = eval_at_step(&explicit.compile_forced(ModelRep::Dense).unwrap(), &grid, &quiet, 0);
        assert!(max_diff(&ha, &hb) < 1e-12);
    }

    #[test]
    fn ramp_profile_interpolates_between_zz_and_xx() {
        let mut spec = two_pair_second_frame(false);
        spec.noise = quiet_spec();
        let model = spec.compile_forced(ModelRep::Dense).unwrap();
        let grid = Grid::from_times(8.0, 0.125).unwrap();
        let quiet = NoiseRealization::quiet(0.125);
        // At t=0: sin θ = 0, so xx/yy vanish and zz is full strength.
        let h_start = eval_at_step(&model, &grid, &quiet, 0);
        let layout = TensorLayout::spins(4).unwrap();
        let drive: Vec<f64> = vec![2.1 / 2.0, 2.1 / 2.0, 3.3 / 2.0, 3.3 / 2.0];
        let mut expected = DenseOp::zeros(16);
        for (i, &w) in drive.iter().enumerate() {
            expected.add_scaled(&embed(&layout, &[i], &sigma_x()).unwrap(), C64::new(w, 0.0));
        }
        for i in 0..4usize {
            for j in (i + 1)..4 {
                let a = 0.13 / (i as f64 - j as f64).abs().powi(3);
                let zz = embed(&layout, &[i, j], &sigma_z().kron(&sigma_z())).unwrap();
                expected.add_scaled(&zz, C64::new(a, 0.0));
            }
        }
        assert!(max_diff(&h_start, &expected) < 1e-13);

        // halfway (t = 4): sin²θ = 1/2, every zz weight is a/2 and every
        // xx weight is a/4; check one pair of matrix entries directly.
        let h_mid = eval_at_step(&model, &grid, &quiet, 32);
        let a01 = 0.13;
        let zz = embed(&layout, &[0, 1], &sigma_z().kron(&sigma_z())).unwrap();
        let xx = embed(&layout, &[0, 1], &sigma_x().kron(&sigma_x())).unwrap();
        // isolate via trace inner products: tr(P·H)/16 gives the weight
        let weight = |h: &DenseOp, p: &DenseOp| {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..16 {
                for c in 0..16 {
                    acc += p.at(c, r) * h.at(r, c);
                }
            }
            acc.re / 16.0
        };
        assert!((weight(&h_mid, &zz) - 0.5 * a01).abs() < 1e-13);
        assert!((weight(&h_mid, &xx) - 0.25 * a01).abs() < 1e-13);
    }

    #[test]
    fn drive_annihilates_the_hybrid_subspace() {
        // First frame at θ=π/2 and the second-frame decoupling drive share the
        // same protection identity: (σx^a + σx^b) V = 0, amplitude noise and all.
        let layout = TensorLayout::spins(4).unwrap().with_pairing(&[(0, 1), (2, 3)]).unwrap();
        let enc = HybridEncoding::new(&layout).unwrap();
        let mut spec = base_spec(layout);
        spec.first_drive = vec![DriveSpec {
            rabi: 7.0,
            detuning: 0.0,
            target_sites: vec![0, 1, 2, 3],
            fluctuation_source: FluctuationSource::SharedAmpPhase,
        }];
        spec.noise.shared_amp = Some(OuParams { sigma: 0.05, tau_c: 20.0 });
        let realization = NoiseRealization {
            dt: 0.1,
            site_dephasing: Vec::new(),
            shared_amp: vec![0.073; 2],
            phase_jitter: Vec::new(),
        };
        let h = hamiltonian_at(&spec, &realization, 0.0).unwrap();
        for l_idx in 0..4usize {
            let mut logical = vec![C64::new(0.0, 0.0); 4];
            logical[l_idx] = C64::new(1.0, 0.0);
            let psi = enc.encode(&logical).unwrap();
            let mut out = vec![C64::new(0.0, 0.0); 16];
            h.matvec(&psi, &mut out);
            assert!(vnorm(&out) < 1e-12, "drive leaks logical basis state {l_idx}");
        }
    }

    #[test]
    fn encoding_examples_and_isometry() {
        let layout = TensorLayout::spins(2).unwrap().with_pairing(&[(0, 1)]).unwrap();
        let enc = HybridEncoding::new(&layout).unwrap();
        let up = enc.encode(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        // (|↑↑⟩ − |↓↓⟩)/√2 in the z basis
        assert!((up[0].re - SQRT_HALF).abs() < 1e-15 && (up[3].re + SQRT_HALF).abs() < 1e-15);
        assert!(up[1].norm() < 1e-15 && up[2].norm() < 1e-15);

        // (|↑̃⟩+|↓̃⟩)/√2 = |↑x↓x⟩
        let plus = enc.encode(&[C64::new(SQRT_HALF, 0.0), C64::new(SQRT_HALF, 0.0)]).unwrap();
        let xup = [C64::new(SQRT_HALF, 0.0), C64::new(SQRT_HALF, 0.0)];
        let xdn = [C64::new(SQRT_HALF, 0.0), C64::new(-SQRT_HALF, 0.0)];
        let target = product_state(&layout, &[xup, xdn], None).unwrap();
        let overlap = crate::spinops::dense::vdot(&target, &plus);
        assert!((overlap.re - 1.0).abs() < 1e-14 && overlap.im.abs() < 1e-14);

        // isometry on random states
        let layout4 = TensorLayout::spins(4).unwrap().with_pairing(&[(0, 1), (2, 3)]).unwrap();
        let enc4 = HybridEncoding::new(&layout4).unwrap();
        let mut seed = 0x9E3779B97F4A7C15u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..4 {
            let mut s1: Vec<C64> = (0..4).map(|_| C64::new(rnd(), rnd())).collect();
            let mut s2: Vec<C64> = (0..4).map(|_| C64::new(rnd(), rnd())).collect();
            let (n1, n2) = (vnorm(&s1), vnorm(&s2));
            s1.iter_mut().for_each(|z| *z /= n1);
            s2.iter_mut().for_each(|z| *z /= n2);
            let inner_logical = crate::spinops::dense::vdot(&s1, &s2);
            let e1 = enc4.encode(&s1).unwrap();
            let e2 = enc4.encode(&s2).unwrap();
            let inner_physical = crate::spinops::dense::vdot(&e1, &e2);
            assert!((inner_logical - inner_physical).norm() < 1e-12);
            assert!(enc4.leakage(&e1).unwrap() < 1e-14);
        }

        // unnormalized input is rejected
        assert!(enc.encode(&[C64::new(0.9, 0.0), C64::new(0.0, 0.0)]).is_err());

        // |↑x↑x⟩ is fully outside; an equal mix is half in
        let both_up = product_state(&layout, &[xup, xup], None).unwrap();
        assert!((enc.leakage(&both_up).unwrap() - 1.0).abs() < 1e-14);
        let mut mix: Vec<C64> = up.iter().zip(&both_up).map(|(a, b)| (a + b) * SQRT_HALF).collect();
        let nm = vnorm(&mix);
        mix.iter_mut().for_each(|z| *z /= nm);
        assert!((enc.leakage(&mix).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dressed_basis_limits_and_orthogonality() {
        let (up, down) = dressed_basis(0.0).unwrap();
        assert!((up[0].re - 1.0).abs() < 1e-15 && up[1].norm() < 1e-15);
        assert!((down[1].re + 1.0).abs() < 1e-15 && down[0].norm() < 1e-15);
        let (upx, dnx) = dressed_basis(std::f64::consts::FRAC_PI_2).unwrap();
        assert!((upx[0].re - SQRT_HALF).abs() < 1e-15 && (upx[1].re - SQRT_HALF).abs() < 1e-15);
        assert!((dnx[0].re - SQRT_HALF).abs() < 1e-15 && (dnx[1].re + SQRT_HALF).abs() < 1e-15);
        let (u, d) = dressed_basis(1.234).unwrap();
        let dot = u[0].conj() * d[0] + u[1].conj() * d[1];
        assert!(dot.norm() < 1e-15);
        assert!(dressed_basis(-0.1).is_err());
        assert!(dressed_basis(3.2).is_err());
    }

    #[test]
    fn single_pair_evolution_stays_in_the_subspace() {
        // Drive plus intra-pair zz: the subspace is exactly invariant, so a
        // full noiseless run must show no leakage at all.
        let layout = TensorLayout::spins(2).unwrap().with_pairing(&[(0, 1)]).unwrap();
        let enc = HybridEncoding::new(&layout).unwrap();
        let mut spec = base_spec(layout);
        spec.convention = SpinConvention::Half;
        let a = std::f64::consts::TAU * 0.02;
        spec.coupling = vec![vec![0.0, a], vec![a, 0.0]];
        spec.first_drive = vec![DriveSpec {
            rabi: std::f64::consts::TAU * 3.5,
            detuning: 0.0,
            target_sites: vec![0, 1],
            fluctuation_source: FluctuationSource::None,
        }];
        let model = spec.compile().unwrap();
        let grid = Grid::from_times(25.0, 0.0125).unwrap();
        let quiet = NoiseRealization::quiet(grid.dt());
        let psi0 = enc
            .encode(&[C64::new(SQRT_HALF, 0.0), C64::new(SQRT_HALF, 0.0)])
            .unwrap();
        let mut worst: f64 = 0.0;
        let mut final_state = Vec::new();
        evolve_trajectory(&model, &grid, &quiet, &psi0, &EvolveOptions::default(), |_, _, psi| {
            worst = worst.max(enc.leakage(psi).unwrap());
            final_state = psi.to_vec();
        })
        .unwrap();
        assert!(worst < 1e-10, "leakage reached {worst}");

        // and the in-block oscillation follows cos(at/4)|↑x↓x⟩ − i sin(at/4)|↓x↑x⟩
        let t = grid.t_final();
        let (c, s) = ((a * t / 4.0).cos(), (a * t / 4.0).sin());
        let logical = enc.project(&final_state).unwrap();
        // |↑x↓x⟩ = (|↑̃⟩+|↓̃⟩)/√2, |↓x↑x⟩ = (|↑̃⟩−|↓̃⟩)/√2
        let ideal = [
            C64::new(SQRT_HALF * c, -SQRT_HALF * s),
            C64::new(SQRT_HALF * c, SQRT_HALF * s),
        ];
        let fid = (logical[0].conj() * ideal[0] + logical[1].conj() * ideal[1]).norm();
        assert!((fid - 1.0).abs() < 1e-8, "fidelity {fid}");
    }

    #[test]
    fn grid_validation_catches_misfits() {
        let spec = two_pair_second_frame(false);
        let model = spec.compile_forced(ModelRep::Dense).unwrap();
        // alternation period 0.5 not a multiple of dt=0.3
        assert!(model.validate_grid(&Grid::from_times(3.0, 0.3).unwrap()).is_err());
        assert!(model.validate_grid(&Grid::from_times(3.0, 0.25).unwrap()).is_ok());
        // ramp ends at 8.0 but the grid runs to 10
        assert!(model.validate_grid(&Grid::from_times(10.0, 0.25).unwrap()).is_err());
    }

    #[test]
    fn compile_rejects_inconsistent_specs() {
        // second frame without a decoupling drive
        let layout = TensorLayout::spins(2).unwrap().with_pairing(&[(0, 1)]).unwrap();
        let mut s = base_spec(layout.clone());
        s.frame = Frame::SecondInteraction;
        s.angle_profile = Some(AngleProfile::Static(vec![0.5, 0.5]));
        assert!(s.compile().is_err());

        // asymmetric coupling
        let mut s = base_spec(TensorLayout::spins(2).unwrap());
        s.coupling = vec![vec![0.0, 1.0], vec![0.5, 0.0]];
        assert!(s.compile().is_err());

        // angle profile in the first frame
        let mut s = base_spec(TensorLayout::spins(2).unwrap());
        s.angle_profile = Some(AngleProfile::Static(vec![0.5, 0.5]));
        assert!(s.compile().is_err());

        // alternation without pairing
        let mut s = base_spec(TensorLayout::spins(2).unwrap());
        s.trotter_period = Some(0.5);
        assert!(s.compile().is_err());

        // two drives targeting one site
        let mut s = base_spec(TensorLayout::spins(1).unwrap());
        s.first_drive = vec![
            DriveSpec {
                rabi: 1.0,
                detuning: 0.0,
                target_sites: vec![0],
                fluctuation_source: FluctuationSource::None,
            },
            DriveSpec {
                rabi: 2.0,
                detuning: 0.0,
                target_sites: vec![0],
                fluctuation_source: FluctuationSource::None,
            },
        ];
        assert!(s.compile().is_err());

        // phase jitter cannot ride the masked kernel
        let mut s = base_spec(TensorLayout::spins(2).unwrap());
        s.first_drive = vec![DriveSpec {
            rabi: 1.0,
            detuning: 0.0,
            target_sites: vec![0, 1],
            fluctuation_source: FluctuationSource::SharedAmpPhase,
        }];
        s.noise.phase_jitter = Some(PhaseJitterParams { bound: 0.03, dwell: 20.0 });
        assert!(s.compile_forced(ModelRep::Pauli).is_err());

        // lab frame is documentation only
        let mut s = base_spec(TensorLayout::spins(1).unwrap());
        s.frame = Frame::Lab;
        assert!(s.compile().is_err());

        // hybrid encoding needs full pairing
        let partial = TensorLayout::spins(4).unwrap().with_pairing(&[(0, 1)]).unwrap();
        assert!(HybridEncoding::new(&partial).is_err());
    }

    #[test]
    fn off_grid_time_is_rejected() {
        let mut spec = base_spec(TensorLayout::spins(1).unwrap());
        spec.first_drive = vec![DriveSpec {
            rabi: 1.0,
            detuning: 0.0,
            target_sites: vec![0],
            fluctuation_source: FluctuationSource::None,
        }];
        let quiet = NoiseRealization::quiet(0.01);
        assert!(hamiltonian_at(&spec, &quiet, 0.0149).is_err());
        assert!(hamiltonian_at(&spec, &quiet, 0.05).is_ok());
    }
}
