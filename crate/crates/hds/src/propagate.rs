//! Trajectory propagation for time-dependent Hamiltonians.
//!
//! Time is handled on two grids. Every Hamiltonian coefficient (drives, angles,
//! noise traces) is piecewise constant over the *coefficient grid* of spacing
//! `dt`; within one coefficient step the propagator may subdivide into
//! `substeps` equal integration steps. Because the Hamiltonian is exactly
//! constant inside a coefficient step, the exponential steppers satisfy the
//! semigroup property there, and halving `substeps` is a pure roundoff-level
//! probe for them while being a genuine accuracy probe for rk4.
//!
//! State norms are never renormalized. A drift of the norm away from 1 is a
//! diagnostic above 1e-8 and fatal above 1e-6.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::noise::{build_realization, NoiseRealization, NoiseSpec};
use crate::spinops::{vaxpy, vdot, vnorm, vscale, C64, DenseOp, OperatorMatrix};
use crate::HdsError;

const NORM_ABORT: f64 = 1e-6;

/// Uniform time grid: `n_steps` intervals of width `dt` starting at t = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dt: f64,
    n_steps: usize,
}

impl Grid {
    pub fn from_times(t_final: f64, dt: f64) -> Result<Self, HdsError> {
        if !(dt > 0.0) || !(t_final > 0.0) {
            return Err(HdsError::Config(format!(
                "grid: need positive t_final and dt, got {t_final}, {dt}"
            )));
        }
        let steps = t_final / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(HdsError::Config(format!(
                "grid: t_final = {t_final} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Grid { dt, n_steps: steps.round() as usize })
    }

    /// Builds a grid from explicit points, which must start at 0 and be uniform
    /// to relative 1e-9.
    pub fn from_points(points: &[f64]) -> Result<Self, HdsError> {
        if points.len() < 2 {
            return Err(HdsError::Config("grid: need at least two points".into()));
        }
        if points[0].abs() > 1e-12 {
            return Err(HdsError::Config("grid: first point must be 0".into()));
        }
        let dt = points[1] - points[0];
        if !(dt > 0.0) {
            return Err(HdsError::Config("grid: points must be increasing".into()));
        }
        for (i, w) in points.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > 1e-9 * dt {
                return Err(HdsError::Config(format!(
                    "grid: non-uniform spacing at index {i}: {step} vs {dt}"
                )));
            }
        }
        Ok(Grid { dt, n_steps: points.len() - 1 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.t(self.n_steps)
    }

    /// Step index of a grid-aligned time; off-grid times are an error.
    pub fn step_of(&self, t: f64) -> Result<usize, HdsError> {
        let s = t / self.dt;
        if (s - s.round()).abs() > 1e-9 * s.abs().max(1.0) || s < -1e-9 {
            return Err(HdsError::Config(format!(
                "time {t} does not lie on the coefficient grid (dt = {})",
                self.dt
            )));
        }
        let idx = s.round() as usize;
        if idx > self.n_steps {
            return Err(HdsError::Config(format!(
                "time {t} lies beyond the grid end {}",
                self.t_final()
            )));
        }
        Ok(idx)
    }
}

/// A time-dependent Hamiltonian with zero-order-hold coefficients.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;

    /// Number of independent per-site noise streams the model consumes.
    fn noise_sites(&self) -> usize;

    fn noise_spec(&self) -> &NoiseSpec;

    /// Fresh operator buffer of the right representation and dimension.
    fn new_buffer(&self) -> OperatorMatrix;

    /// Writes H(t_step) into `out`. `step` indexes the coefficient grid; all
    /// coefficients are held constant until the next step.
    fn eval_into(&self, step: usize, grid: &Grid, noise: &NoiseRealization, out: &mut OperatorMatrix);

    /// Conservative bound on the fastest coefficient scale, in cycles per time
    /// unit. The coefficient grid must resolve it: dt ≤ 1 / (20 f_max).
    fn max_frequency(&self) -> f64;

    /// Model-specific grid constraints (e.g. alternation periods commensurate
    /// with dt). Called once before propagation.
    fn validate_grid(&self, _grid: &Grid) -> Result<(), HdsError> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Exponential stepping, representation-appropriate: dense Padé exponential
    /// below the sparse threshold, Lanczos exponential-times-vector above it.
    Auto,
    Expm,
    Lanczos,
    Rk4,
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub method: Method,
    pub substeps: usize,
    pub sample_stride: usize,
    pub lanczos_tol: f64,
    pub lanczos_max_m: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            method: Method::Auto,
            substeps: 1,
            sample_stride: 1,
            lanczos_tol: 1e-10,
            lanczos_max_m: 40,
        }
    }
}

/// Per-trajectory diagnostics.
#[derive(Clone, Debug, Default)]
pub struct TrajStats {
    pub max_norm_drift: f64,
    pub lanczos_cap_hits: usize,
    pub final_norm: f64,
}

struct LanczosWs {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    w: Vec<C64>,
}

impl LanczosWs {
    fn new(dim: usize) -> Self {
        LanczosWs { basis: Vec::new(), alpha: Vec::new(), beta: Vec::new(), w: vec![C64::new(0.0, 0.0); dim] }
    }

    fn basis_vec(&mut self, j: usize, dim: usize) -> &mut Vec<C64> {
        while self.basis.len() <= j {
            self.basis.push(vec![C64::new(0.0, 0.0); dim]);
        }
        &mut self.basis[j]
    }
}

/// exp(-i dt T) e1 for the real symmetric tridiagonal (alpha, beta), m = alpha.len().
fn tridiag_expm_e1(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DenseOp::zeros(m);
    for i in 0..m {
        *t.at_mut(i, i) = C64::new(alpha[i], 0.0);
        if i + 1 < m {
            *t.at_mut(i, i + 1) = C64::new(beta[i], 0.0);
            *t.at_mut(i + 1, i) = C64::new(beta[i], 0.0);
        }
    }
    let (w, v) = t.eigh();
    let mut u = vec![C64::new(0.0, 0.0); m];
    for k in 0..m {
        let phase = C64::new(0.0, -dt * w[k]).exp();
        let coeff = v.at(0, k).conj() * phase;
        for i in 0..m {
            u[i] += v.at(i, k) * coeff;
        }
    }
    u
}

/// One Lanczos step psi <- exp(-i dt H) psi. Returns true if the Krylov cap was
/// hit before the error estimate dropped below tol.
fn lanczos_step(
    op: &OperatorMatrix,
    dt: f64,
    psi: &mut [C64],
    ws: &mut LanczosWs,
    tol: f64,
    max_m: usize,
) -> Result<bool, HdsError> {
    let dim = psi.len();
    let nrm = vnorm(psi);
    if !(nrm > 1e-300) {
        return Err(HdsError::Numerics("lanczos: zero state".into()));
    }
    ws.alpha.clear();
    ws.beta.clear();

    {
        let v0 = ws.basis_vec(0, dim);
        v0.copy_from_slice(psi);
        vscale(C64::new(1.0 / nrm, 0.0), v0);
    }
    // w = H v0 - alpha0 v0
    let mut w = std::mem::take(&mut ws.w);
    op.matvec(&ws.basis[0], &mut w);
    let a0 = vdot(&ws.basis[0], &w).re;
    ws.alpha.push(a0);
    vaxpy(C64::new(-a0, 0.0), &ws.basis[0], &mut w);

    let mut u = vec![C64::new(1.0, 0.0)];
    let mut capped = false;
    loop {
        let m = ws.alpha.len();
        let beta_next = vnorm(&w);

        // Invariant subspace: the Krylov space is exact.
        if beta_next < 1e-13 * (1.0 + ws.alpha.iter().fold(0.0f64, |a, &x| a.max(x.abs()))) {
            u = tridiag_expm_e1(&ws.alpha, &ws.beta, dt);
            break;
        }
        if m >= 2 || m == max_m {
            u = tridiag_expm_e1(&ws.alpha, &ws.beta, dt);
            let err = beta_next * u[m - 1].norm() * dt.abs();
            if err <= tol {
                break;
            }
        }
        if m == max_m {
            capped = true;
            break;
        }

        // Extend the basis: v_m = w / beta, w = H v_m - beta v_{m-1} - alpha_m v_m.
        ws.beta.push(beta_next);
        {
            let vm = ws.basis_vec(m, dim);
            std::mem::swap(vm, &mut w);
            vscale(C64::new(1.0 / beta_next, 0.0), vm);
            if w.len() != dim {
                w.resize(dim, C64::new(0.0, 0.0));
            }
        }
        op.matvec(&ws.basis[m], &mut w);
        vaxpy(C64::new(-beta_next, 0.0), &ws.basis[m - 1], &mut w);
        let am = vdot(&ws.basis[m], &w).re;
        ws.alpha.push(am);
        vaxpy(C64::new(-am, 0.0), &ws.basis[m], &mut w);
    }
    ws.w = w;

    for x in psi.iter_mut() {
        *x = C64::new(0.0, 0.0);
    }
    for (k, &uk) in u.iter().enumerate() {
        vaxpy(uk * nrm, &ws.basis[k], psi);
    }
    Ok(capped)
}

fn rk4_step(op: &OperatorMatrix, dt: f64, psi: &mut [C64], scratch: &mut [Vec<C64>; 5]) {
    let minus_i = C64::new(0.0, -1.0);
    let [k1, k2, k3, k4, tmp] = scratch;
    op.matvec(psi, k1);
    vscale(minus_i, k1);

    tmp.copy_from_slice(psi);
    vaxpy(C64::new(dt / 2.0, 0.0), k1, tmp);
    op.matvec(tmp, k2);
    vscale(minus_i, k2);

    tmp.copy_from_slice(psi);
    vaxpy(C64::new(dt / 2.0, 0.0), k2, tmp);
    op.matvec(tmp, k3);
    vscale(minus_i, k3);

    tmp.copy_from_slice(psi);
    vaxpy(C64::new(dt, 0.0), k3, tmp);
    op.matvec(tmp, k4);
    vscale(minus_i, k4);

    vaxpy(C64::new(dt / 6.0, 0.0), k1, psi);
    vaxpy(C64::new(dt / 3.0, 0.0), k2, psi);
    vaxpy(C64::new(dt / 3.0, 0.0), k3, psi);
    vaxpy(C64::new(dt / 6.0, 0.0), k4, psi);
}

fn resolve_method(method: Method, op: &OperatorMatrix) -> Result<Method, HdsError> {
    match (method, op) {
        (Method::Auto, OperatorMatrix::Dense(_)) => Ok(Method::Expm),
        (Method::Auto, OperatorMatrix::Pauli(_)) => Ok(Method::Lanczos),
        (Method::Expm, OperatorMatrix::Pauli(_)) => Err(HdsError::Config(
            "dense exponential stepping needs a dense representation".into(),
        )),
        (m, _) => Ok(m),
    }
}

fn validate_setup(ham: &dyn Hamiltonian, grid: &Grid, opts: &EvolveOptions) -> Result<(), HdsError> {
    if opts.substeps == 0 || opts.sample_stride == 0 {
        return Err(HdsError::Config("substeps and sample_stride must be positive".into()));
    }
    if !grid.n_steps.is_multiple_of(opts.sample_stride) {
        return Err(HdsError::Config(format!(
            "sample stride {} does not divide the step count {}",
            opts.sample_stride,
            grid.n_steps
        )));
    }
    let fmax = ham.max_frequency();
    if fmax > 0.0 {
        let dt_max = 1.0 / (20.0 * fmax);
        if grid.dt > dt_max * (1.0 + 1e-9) {
            return Err(HdsError::Config(format!(
                "coefficient step {} too coarse for the fastest coefficient scale: \
                 f_max = {fmax:.4} requires dt <= {dt_max:.6}",
                grid.dt
            )));
        }
    }
    ham.validate_grid(grid)?;
    Ok(())
}

/// Integrates one trajectory, invoking `on_sample(sample_index, t, psi)` at t = 0
/// and after every `sample_stride` coefficient steps.
pub fn evolve_trajectory(
    ham: &dyn Hamiltonian,
    grid: &Grid,
    noise: &NoiseRealization,
    psi0: &[C64],
    opts: &EvolveOptions,
    mut on_sample: impl FnMut(usize, f64, &[C64]),
) -> Result<TrajStats, HdsError> {
    validate_setup(ham, grid, opts)?;
    let dim = ham.dim();
    if psi0.len() != dim {
        return Err(HdsError::Model(format!(
            "initial state dimension {} does not match the model dimension {dim}",
            psi0.len()
        )));
    }
    if (vnorm(psi0) - 1.0).abs() > 1e-10 {
        return Err(HdsError::Model(format!(
            "initial state is not normalized: |psi| = {}",
            vnorm(psi0)
        )));
    }

    let mut psi = psi0.to_vec();
    let mut hbuf = ham.new_buffer();
    let mut stats = TrajStats::default();
    let mut lanczos = LanczosWs::new(dim);
    let mut rk4_scratch: Option<[Vec<C64>; 5]> = None;
    let dt_sub = grid.dt / opts.substeps as f64;

    let mut method = opts.method;
    let mut sample_idx = 0usize;
    on_sample(sample_idx, 0.0, &psi);
    sample_idx += 1;

    for step in 0..grid.n_steps {
        ham.eval_into(step, grid, noise, &mut hbuf);
        if step == 0 {
            method = resolve_method(method, &hbuf)?;
        }
        hbuf.assert_hermitian(1e-12)?;

        match method {
            Method::Expm => {
                let OperatorMatrix::Dense(h) = &hbuf else { unreachable!() };
                let u = h.scaled(C64::new(0.0, -dt_sub)).expm();
                let mut tmp = vec![C64::new(0.0, 0.0); dim];
                for _ in 0..opts.substeps {
                    u.matvec(&psi, &mut tmp);
                    std::mem::swap(&mut psi, &mut tmp);
                }
            }
            Method::Lanczos => {
                for _ in 0..opts.substeps {
                    if lanczos_step(&hbuf, dt_sub, &mut psi, &mut lanczos, opts.lanczos_tol, opts.lanczos_max_m)? {
                        stats.lanczos_cap_hits += 1;
                    }
                }
            }
            Method::Rk4 => {
                let scratch = rk4_scratch
                    .get_or_insert_with(|| std::array::from_fn(|_| vec![C64::new(0.0, 0.0); dim]));
                for _ in 0..opts.substeps {
                    rk4_step(&hbuf, dt_sub, &mut psi, scratch);
                }
            }
            Method::Auto => unreachable!(),
        }

        let norm = vnorm(&psi);
        let drift = (norm - 1.0).abs();
        if !(drift <= NORM_ABORT) {
            return Err(HdsError::Numerics(format!(
                "norm drift {drift:.3e} exceeded {NORM_ABORT:.0e} at t = {}",
                grid.t(step + 1)
            )));
        }
        stats.max_norm_drift = stats.max_norm_drift.max(drift);

        if (step + 1).is_multiple_of(opts.sample_stride) {
            on_sample(sample_idx, grid.t(step + 1), &psi);
            sample_idx += 1;
        }
    }
    stats.final_norm = vnorm(&psi);
    Ok(stats)
}

/// Final-state distance between a run with `opts.substeps` and one with twice as
/// many, on the same noise realization. Exponential steppers should sit at
/// roundoff; rk4 shows its genuine step error.
pub fn substep_halving_probe(
    ham: &dyn Hamiltonian,
    grid: &Grid,
    noise: &NoiseRealization,
    psi0: &[C64],
    opts: &EvolveOptions,
) -> Result<f64, HdsError> {
    let mut fine = *opts;
    fine.substeps = opts.substeps * 2;
    let mut last_a = vec![C64::new(0.0, 0.0); ham.dim()];
    let mut last_b = last_a.clone();
    evolve_trajectory(ham, grid, noise, psi0, opts, |_, _, psi| {
        last_a.copy_from_slice(psi);
    })?;
    evolve_trajectory(ham, grid, noise, psi0, &fine, |_, _, psi| {
        last_b.copy_from_slice(psi);
    })?;
    let mut diff = 0.0f64;
    for (a, b) in last_a.iter().zip(&last_b) {
        diff += (a - b).norm_sqr();
    }
    Ok(diff.sqrt())
}

/// Ensemble statistics on a fixed sampling grid. `mean` and `se` are row-major
/// [sample][component]; `se` is the standard error of the mean.
#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub width: usize,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub n_traj: usize,
    pub max_norm_drift: f64,
    pub lanczos_cap_hits: usize,
}

impl EnsembleResult {
    pub fn component(&self, sample: usize, comp: usize) -> f64 {
        self.mean[sample * self.width + comp]
    }

    pub fn se_component(&self, sample: usize, comp: usize) -> f64 {
        self.se[sample * self.width + comp]
    }
}

/// Observable evaluation: writes `width` components for one sampled state.
pub type SampleEval<'a> = &'a (dyn Fn(usize, f64, &[C64], &mut [f64]) + Sync);

pub struct EnsembleSetup<'a> {
    pub ham: &'a dyn Hamiltonian,
    pub grid: Grid,
    pub psi0: &'a [C64],
    pub opts: EvolveOptions,
    pub master_seed: u64,
    pub n_traj: usize,
    pub threads: usize,
}

/// Runs `n_traj` trajectories with per-trajectory noise seeded only by
/// (master_seed, trajectory index), accumulating mean and SE per component.
/// Trajectories are merged in index order regardless of which worker produced
/// them, so the result is bitwise independent of the thread count.
pub fn run_ensemble(
    setup: &EnsembleSetup,
    width: usize,
    eval: SampleEval,
) -> Result<EnsembleResult, HdsError> {
    if setup.n_traj == 0 {
        return Err(HdsError::Config("ensemble needs at least one trajectory".into()));
    }
    validate_setup(setup.ham, &setup.grid, &setup.opts)?;
    let n_samples = setup.grid.n_steps() / setup.opts.sample_stride + 1;
    let times: Vec<f64> = (0..n_samples)
        .map(|s| setup.grid.t(s * setup.opts.sample_stride))
        .collect();

    struct TrajOut {
        rows: Vec<f64>,
        stats: TrajStats,
    }

    let slots: Mutex<Vec<Option<Result<TrajOut, HdsError>>>> =
        Mutex::new((0..setup.n_traj).map(|_| None).collect());
    let next: AtomicUsize = AtomicUsize::new(0);
    let n_threads = setup.threads.max(1).min(setup.n_traj);

    let run_one = |traj: usize| -> Result<TrajOut, HdsError> {
        let noise = build_realization(
            setup.ham.noise_spec(),
            setup.ham.noise_sites(),
            setup.grid.n_steps(),
            setup.grid.dt(),
            setup.master_seed,
            traj as u64,
        );
        let mut rows = vec![0.0f64; n_samples * width];
        let stats = evolve_trajectory(
            setup.ham,
            &setup.grid,
            &noise,
            setup.psi0,
            &setup.opts,
            |sample, t, psi| {
                eval(sample, t, psi, &mut rows[sample * width..(sample + 1) * width]);
            },
        )?;
        Ok(TrajOut { rows, stats })
    };

    std::thread::scope(|scope| {
        for _ in 0..n_threads {
            scope.spawn(|| loop {
                let traj = next.fetch_add(1, Ordering::Relaxed);
                if traj >= setup.n_traj {
                    break;
                }
                let out = run_one(traj);
                slots.lock().unwrap()[traj] = Some(out);
            });
        }
    });

    // Welford accumulation in trajectory order: deterministic merge.
    let mut mean = vec![0.0f64; n_samples * width];
    let mut m2 = vec![0.0f64; n_samples * width];
    let mut max_drift = 0.0f64;
    let mut cap_hits = 0usize;
    let slots = slots.into_inner().unwrap();
    for (traj, slot) in slots.into_iter().enumerate() {
        let out = slot.unwrap_or_else(|| panic!("trajectory {traj} was never scheduled"))?;
        max_drift = max_drift.max(out.stats.max_norm_drift);
        cap_hits += out.stats.lanczos_cap_hits;
        let n = (traj + 1) as f64;
        for (k, &x) in out.rows.iter().enumerate() {
            let d = x - mean[k];
            mean[k] += d / n;
            m2[k] += d * (x - mean[k]);
        }
    }
    let n = setup.n_traj as f64;
    let se: Vec<f64> = m2
        .iter()
        .map(|&v| if setup.n_traj > 1 { (v / (n * (n - 1.0))).sqrt() } else { 0.0 })
        .collect();

    Ok(EnsembleResult {
        times,
        width,
        mean,
        se,
        n_traj: setup.n_traj,
        max_norm_drift: max_drift,
        lanczos_cap_hits: cap_hits,
    })
}
