//! Dense complex matrices and the small-matrix kernels built on them: multiplication,
//! LU solves, the scaling-and-squaring matrix exponential, and a cyclic Jacobi
//! eigensolver for Hermitian matrices.
//!
//! Everything here is O(n³) and intended for dimensions below the sparse threshold
//! (256), where exact dense arithmetic is both affordable and the reference against
//! which the sparse path is tested.

use num_complex::Complex;

pub type C64 = Complex<f64>;

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOp {
    n: usize,
    a: Vec<C64>,
}

const ZERO: C64 = Complex::new(0.0, 0.0);
const ONE: C64 = Complex::new(1.0, 0.0);

impl DenseOp {
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "matrix dimension must be positive");
        DenseOp { n, a: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i * d.len() + i] = v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.a[i * self.n + j]
    }

    pub fn data(&self) -> &[C64] {
        &self.a
    }

    pub fn scale(&mut self, c: C64) {
        for v in &mut self.a {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: C64) -> DenseOp {
        let mut m = self.clone();
        m.scale(c);
        m
    }

    /// self += c * other
    pub fn add_scaled(&mut self, other: &DenseOp, c: C64) {
        assert_eq!(self.n, other.n);
        for (v, w) in self.a.iter_mut().zip(&other.a) {
            *v += c * w;
        }
    }

    pub fn add(&self, other: &DenseOp) -> DenseOp {
        let mut m = self.clone();
        m.add_scaled(other, ONE);
        m
    }

    pub fn sub(&self, other: &DenseOp) -> DenseOp {
        let mut m = self.clone();
        m.add_scaled(other, -ONE);
        m
    }

    pub fn dagger(&self) -> DenseOp {
        DenseOp::from_fn(self.n, |i, j| self.at(j, i).conj())
    }

    pub fn matmul(&self, other: &DenseOp) -> DenseOp {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = DenseOp::zeros(n);
        // i-k-j loop order keeps the inner accesses unit-stride.
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == ZERO {
                    continue;
                }
                let row_b = &other.a[k * n..(k + 1) * n];
                let row_o = &mut out.a[i * n..(i + 1) * n];
                for j in 0..n {
                    row_o[j] += aik * row_b[j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let mut acc = ZERO;
            for j in 0..n {
                acc += row[j] * x[j];
            }
            y[i] = acc;
        }
    }

    /// Kronecker product; `self` is the most significant factor.
    pub fn kron(&self, other: &DenseOp) -> DenseOp {
        let (na, nb) = (self.n, other.n);
        let n = na * nb;
        let mut out = DenseOp::zeros(n);
        for ia in 0..na {
            for ja in 0..na {
                let aij = self.a[ia * na + ja];
                if aij == ZERO {
                    continue;
                }
                for ib in 0..nb {
                    for jb in 0..nb {
                        out.a[(ia * nb + ib) * n + (ja * nb + jb)] = aij * other.a[ib * nb + jb];
                    }
                }
            }
        }
        out
    }

    /// Maximum column sum of absolute values.
    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0f64;
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += self.a[i * n + j].norm();
            }
            best = best.max(s);
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &DenseOp) -> f64 {
        assert_eq!(self.n, other.n);
        self.a
            .iter()
            .zip(&other.a)
            .map(|(v, w)| (v - w).norm())
            .fold(0.0, f64::max)
    }

    /// max_ij |A_ij - conj(A_ji)|; zero for an exactly Hermitian matrix.
    pub fn max_nonhermiticity(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.a[i * n + j] - self.a[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.a[i * self.n + i]).sum()
    }

    /// Solves self * X = B with partial-pivot LU; B holds the solution on return.
    pub fn lu_solve(&self, b: &mut DenseOp) -> Result<(), String> {
        assert_eq!(self.n, b.n);
        let n = self.n;
        let mut lu = self.a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot = k;
            let mut best = lu[perm[k] * n + k].norm();
            for r in (k + 1)..n {
                let mag = lu[perm[r] * n + k].norm();
                if mag > best {
                    best = mag;
                    pivot = r;
                }
            }
            if best == 0.0 {
                return Err("singular matrix in lu_solve".into());
            }
            perm.swap(k, pivot);
            let pk = perm[k];
            let diag = lu[pk * n + k];
            for r in (k + 1)..n {
                let pr = perm[r];
                let factor = lu[pr * n + k] / diag;
                lu[pr * n + k] = factor;
                for c in (k + 1)..n {
                    let sub = factor * lu[pk * n + c];
                    lu[pr * n + c] -= sub;
                }
            }
        }
        // Forward and back substitution, one RHS column at a time.
        let mut col = vec![ZERO; n];
        for j in 0..n {
            for i in 0..n {
                col[i] = b.a[perm[i] * n + j];
            }
            for i in 1..n {
                let pi = perm[i];
                let mut acc = col[i];
                for k in 0..i {
                    acc -= lu[pi * n + k] * col[k];
                }
                col[i] = acc;
            }
            for i in (0..n).rev() {
                let pi = perm[i];
                let mut acc = col[i];
                for k in (i + 1)..n {
                    acc -= lu[pi * n + k] * col[k];
                }
                col[i] = acc / lu[pi * n + i];
            }
            for i in 0..n {
                b.a[i * n + j] = col[i];
            }
        }
        Ok(())
    }

    /// Matrix exponential by Padé approximation with scaling and squaring,
    /// degree chosen from the 1-norm (Higham's {3,5,7,9,13} scheme). A trace
    /// shift is removed first so a large multiple of the identity (boson number
    /// terms) does not inflate the scaling count.
    pub fn expm(&self) -> DenseOp {
        let n = self.n;
        let mu = self.trace() / (n as f64);
        let mut a = self.clone();
        for i in 0..n {
            a.a[i * n + i] -= mu;
        }
        let eta = a.one_norm();

        const THETA: [(usize, f64); 5] = [
            (3, 1.495_585_217_958_292e-2),
            (5, 2.539_398_330_063_23e-1),
            (7, 9.504_178_996_162_932e-1),
            (9, 2.097_847_961_257_068),
            (13, 5.371_920_351_148_152),
        ];

        let mut degree = 13;
        let mut squarings = 0u32;
        for &(m, th) in &THETA {
            if eta <= th {
                degree = m;
                break;
            }
        }
        if eta > THETA[4].1 {
            squarings = ((eta / THETA[4].1).log2().ceil() as i64).max(0) as u32;
            a.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));
        }

        let mut f = pade(&a, degree);
        for _ in 0..squarings {
            f = f.matmul(&f);
        }
        f.scale(mu.exp());
        f
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    /// Returns eigenvalues in ascending order and the unitary whose columns are
    /// the corresponding eigenvectors (A = V diag(w) V†).
    pub fn eigh(&self) -> (Vec<f64>, DenseOp) {
        let n = self.n;
        debug_assert!(self.max_nonhermiticity() < 1e-10 * (1.0 + self.max_abs()));
        let mut a = self.a.clone();
        // Symmetrize exactly so roundoff in the input cannot bias the iteration.
        for i in 0..n {
            for j in (i + 1)..n {
                let m = 0.5 * (a[i * n + j] + a[j * n + i].conj());
                a[i * n + j] = m;
                a[j * n + i] = m.conj();
            }
            a[i * n + i] = C64::new(a[i * n + i].re, 0.0);
        }
        let mut v = DenseOp::identity(n);
        let fro: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let tol = 1e-14 * fro.max(1e-300);

        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i * n + j].norm_sqr();
                }
            }
            if off.sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    let mag = apq.norm();
                    if mag <= tol / (n as f64) {
                        continue;
                    }
                    // Phase out apq, then a real Jacobi rotation on the 2x2 block.
                    let phase = apq / mag;
                    let app = a[p * n + p].re;
                    let aqq = a[q * n + q].re;
                    let tau = (aqq - app) / (2.0 * mag);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Column rotation U: |p> -> c|p> - s e^{-iφ}|q>, |q> -> s e^{iφ}|p> + c|q>.
                    let se = s * phase;
                    for r in 0..n {
                        let arp = a[r * n + p];
                        let arq = a[r * n + q];
                        a[r * n + p] = arp * c - arq * se.conj();
                        a[r * n + q] = arp * se + arq * c;
                    }
                    for cidx in 0..n {
                        let apc = a[p * n + cidx];
                        let aqc = a[q * n + cidx];
                        a[p * n + cidx] = apc * c - aqc * se;
                        a[q * n + cidx] = apc * se.conj() + aqc * c;
                    }
                    a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                    a[q * n + q] = C64::new(a[q * n + q].re, 0.0);
                    a[p * n + q] = ZERO;
                    a[q * n + p] = ZERO;
                    for r in 0..n {
                        let vrp = v.a[r * n + p];
                        let vrq = v.a[r * n + q];
                        v.a[r * n + p] = vrp * c - vrq * se.conj();
                        v.a[r * n + q] = vrp * se + vrq * c;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        let evals: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
        order.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());
        let w: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
        let vs = DenseOp::from_fn(n, |r, cidx| v.a[r * n + order[cidx]]);
        (w, vs)
    }

    /// Hermitian PSD square root. Eigenvalues in [-tol_neg, 0) are clamped to zero;
    /// anything more negative is an error.
    pub fn sqrt_psd(&self, tol_neg: f64) -> Result<DenseOp, String> {
        let (w, v) = self.eigh();
        let mut clamped = Vec::with_capacity(w.len());
        for &x in &w {
            if x < -tol_neg {
                return Err(format!("matrix not PSD: eigenvalue {x:.3e}"));
            }
            clamped.push(C64::new(x.max(0.0).sqrt(), 0.0));
        }
        let vd = v.dagger();
        Ok(v.matmul(&DenseOp::from_diag(&clamped)).matmul(&vd))
    }
}

fn pade(a: &DenseOp, degree: usize) -> DenseOp {
    let n = a.dim();
    let id = DenseOp::identity(n);
    let b: &[f64] = match degree {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17_297_280.0, 8_648_640.0, 1_995_840.0, 277_200.0, 25_200.0, 1_512.0, 56.0, 1.0],
        9 => &[
            17_643_225_600.0,
            8_821_612_800.0,
            2_075_673_600.0,
            302_702_400.0,
            30_270_240.0,
            2_162_160.0,
            110_880.0,
            3_960.0,
            90.0,
            1.0,
        ],
        13 => &[
            64_764_752_532_480_000.0,
            32_382_376_266_240_000.0,
            7_771_770_303_897_600.0,
            1_187_353_796_428_800.0,
            129_060_195_264_000.0,
            10_559_470_521_600.0,
            670_442_572_800.0,
            33_522_128_640.0,
            1_323_241_920.0,
            40_840_800.0,
            960_960.0,
            16_380.0,
            182.0,
            1.0,
        ],
        _ => unreachable!("unsupported Padé degree"),
    };

    let a2 = a.matmul(a);
    let (mut u, mut v);
    if degree <= 9 {
        // Even powers a2, a4, a6, a8 as needed.
        let mut powers: Vec<DenseOp> = vec![id.clone(), a2.clone()];
        while powers.len() < degree / 2 + 1 {
            let next = powers.last().unwrap().matmul(&a2);
            powers.push(next);
        }
        let mut u_poly = DenseOp::zeros(n);
        v = DenseOp::zeros(n);
        for k in 0..=degree / 2 {
            u_poly.add_scaled(&powers[k], C64::new(b[2 * k + 1], 0.0));
            v.add_scaled(&powers[k], C64::new(b[2 * k], 0.0));
        }
        u = a.matmul(&u_poly);
    } else {
        let a4 = a2.matmul(&a2);
        let a6 = a2.matmul(&a4);
        let mut w1 = a6.scaled(C64::new(b[13], 0.0));
        w1.add_scaled(&a4, C64::new(b[11], 0.0));
        w1.add_scaled(&a2, C64::new(b[9], 0.0));
        let mut w2 = a6.scaled(C64::new(b[7], 0.0));
        w2.add_scaled(&a4, C64::new(b[5], 0.0));
        w2.add_scaled(&a2, C64::new(b[3], 0.0));
        w2.add_scaled(&id, C64::new(b[1], 0.0));
        let mut inner = a6.matmul(&w1);
        inner.add_scaled(&w2, ONE);
        u = a.matmul(&inner);
        let mut z1 = a6.scaled(C64::new(b[12], 0.0));
        z1.add_scaled(&a4, C64::new(b[10], 0.0));
        z1.add_scaled(&a2, C64::new(b[8], 0.0));
        v = a6.matmul(&z1);
        v.add_scaled(&a6, C64::new(b[6], 0.0));
        v.add_scaled(&a4, C64::new(b[4], 0.0));
        v.add_scaled(&a2, C64::new(b[2], 0.0));
        v.add_scaled(&id, C64::new(b[0], 0.0));
    }

    // r(a) = (V - U)^{-1} (V + U)
    let denom = v.sub(&u);
    let mut numer = v;
    numer.add_scaled(&u, ONE);
    denom
        .lu_solve(&mut numer)
        .expect("Padé denominator is nonsingular for norms within the θ table");
    u = numer;
    u
}

// Small complex-vector helpers shared by the propagators.

/// <a|b> with the first argument conjugated.
pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// y += c * x
pub fn vaxpy(c: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub fn vscale(c: C64, x: &mut [C64]) {
    for xi in x {
        *xi *= c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Deterministic pseudo-random Hermitian matrix, no RNG dependency needed.
    fn pseudo_hermitian(n: usize, seed: u64) -> DenseOp {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut m = DenseOp::zeros(n);
        for i in 0..n {
            *m.at_mut(i, i) = c(next(), 0.0);
            for j in (i + 1)..n {
                let v = c(next(), next());
                *m.at_mut(i, j) = v;
                *m.at_mut(j, i) = v.conj();
            }
        }
        m
    }

    #[test]
    fn matmul_matches_hand_example() {
        let a = DenseOp::from_fn(2, |i, j| c((i * 2 + j) as f64, 1.0));
        let b = DenseOp::from_fn(2, |i, j| c(1.0, (i + j) as f64));
        let ab = a.matmul(&b);
        // (0,0): (0+i)(1+0i) + (1+i)(1+i) = i + (0 + 2i) = 3i
        assert!((ab.at(0, 0) - c(0.0, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn kron_is_most_significant_first() {
        let sz = DenseOp::from_fn(2, |i, j| if i == j { c(1.0 - 2.0 * i as f64, 0.0) } else { ZERO });
        let id = DenseOp::identity(2);
        let k = sz.kron(&id);
        // diag(+1,+1,-1,-1): the first factor selects the block.
        let diag: Vec<f64> = (0..4).map(|i| k.at(i, i).re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn lu_solve_recovers_solution() {
        let a = {
            let mut m = pseudo_hermitian(6, 7);
            for i in 0..6 {
                *m.at_mut(i, i) += c(4.0, 0.0); // well conditioned
            }
            m
        };
        let x = pseudo_hermitian(6, 99);
        let mut b = a.matmul(&x);
        a.lu_solve(&mut b).unwrap();
        assert!(b.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn lu_solve_rejects_singular() {
        let m = DenseOp::zeros(3);
        let mut b = DenseOp::identity(3);
        assert!(m.lu_solve(&mut b).is_err());
    }

    #[test]
    fn expm_diagonal() {
        let d = DenseOp::from_diag(&[c(0.0, -1.0), c(0.3, 0.2)]);
        let e = d.expm();
        assert!((e.at(0, 0) - c(0.0, -1.0).exp()).norm() < 1e-14);
        assert!((e.at(1, 1) - c(0.3, 0.2).exp()).norm() < 1e-14);
        assert!(e.at(0, 1).norm() < 1e-15);
    }

    #[test]
    fn expm_sigma_x_rotation() {
        // exp(-i (θ/2) σx) = cos(θ/2) I - i sin(θ/2) σx
        let theta = 1.234f64;
        let sx = DenseOp::from_fn(2, |i, j| if i != j { ONE } else { ZERO });
        let e = sx.scaled(c(0.0, -theta / 2.0)).expm();
        let expect = DenseOp::from_fn(2, |i, j| {
            if i == j {
                c((theta / 2.0).cos(), 0.0)
            } else {
                c(0.0, -(theta / 2.0).sin())
            }
        });
        assert!(e.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn expm_matches_eigendecomposition() {
        let h = pseudo_hermitian(8, 3);
        let e = h.scaled(c(0.0, -1.0)).expm();
        let (w, v) = h.eigh();
        let phases: Vec<C64> = w.iter().map(|&x| c(0.0, -x).exp()).collect();
        let ref_e = v.matmul(&DenseOp::from_diag(&phases)).matmul(&v.dagger());
        assert!(e.max_abs_diff(&ref_e) < 1e-12);
    }

    #[test]
    fn expm_large_norm_forces_scaling() {
        let mut h = pseudo_hermitian(6, 11);
        h.scale(c(40.0, 0.0)); // 1-norm far above θ13
        let e = h.scaled(c(0.0, -1.0)).expm();
        let (w, v) = h.eigh();
        let phases: Vec<C64> = w.iter().map(|&x| c(0.0, -x).exp()).collect();
        let ref_e = v.matmul(&DenseOp::from_diag(&phases)).matmul(&v.dagger());
        assert!(e.max_abs_diff(&ref_e) < 1e-10);
    }

    #[test]
    fn expm_of_skew_hermitian_is_unitary() {
        let h = pseudo_hermitian(10, 21);
        let e = h.scaled(c(0.0, -0.7)).expm();
        let prod = e.dagger().matmul(&e);
        assert!(prod.max_abs_diff(&DenseOp::identity(10)) < 1e-13);
    }

    #[test]
    fn expm_trace_shift_consistency() {
        // A large identity component must come out as a global phase, not scaling work.
        let h = pseudo_hermitian(5, 5);
        let mut shifted = h.clone();
        for i in 0..5 {
            *shifted.at_mut(i, i) += c(300.0, 0.0);
        }
        let e1 = shifted.scaled(c(0.0, -0.01)).expm();
        let mut e2 = h.scaled(c(0.0, -0.01)).expm();
        e2.scale(c(0.0, -3.0).exp());
        assert!(e1.max_abs_diff(&e2) < 1e-12);
    }

    #[test]
    fn eigh_reconstructs_and_is_orthonormal() {
        let h = pseudo_hermitian(12, 17);
        let (w, v) = h.eigh();
        for pair in w.windows(2) {
            assert!(pair[0] <= pair[1]);
        }
        let lam: Vec<C64> = w.iter().map(|&x| c(x, 0.0)).collect();
        let rec = v.matmul(&DenseOp::from_diag(&lam)).matmul(&v.dagger());
        assert!(rec.max_abs_diff(&h) < 1e-12);
        let gram = v.dagger().matmul(&v);
        assert!(gram.max_abs_diff(&DenseOp::identity(12)) < 1e-13);
    }

    #[test]
    fn eigh_known_two_level() {
        // σx has eigenvalues ∓1 with |∓x> = (|0> ∓ |1>)/√2.
        let sx = DenseOp::from_fn(2, |i, j| if i != j { ONE } else { ZERO });
        let (w, v) = sx.eigh();
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        let ratio = v.at(1, 1) / v.at(0, 1);
        assert!((ratio - ONE).norm() < 1e-13);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let m = pseudo_hermitian(6, 31);
        let psd = m.matmul(&m.dagger());
        let r = psd.sqrt_psd(1e-10).unwrap();
        assert!(r.matmul(&r).max_abs_diff(&psd) < 1e-11);
    }

    #[test]
    fn sqrt_psd_rejects_negative() {
        let neg = DenseOp::from_diag(&[ONE, c(-0.5, 0.0)]);
        assert!(neg.sqrt_psd(1e-8).is_err());
    }

    #[test]
    fn vector_helpers() {
        let a = vec![c(1.0, 1.0), c(0.0, -2.0)];
        let b = vec![c(2.0, 0.0), c(1.0, 1.0)];
        // conj(a)·b = (1-i)(2) + (2i... conj(0,-2)= (0,2): (0+2i)(1+i) = -2+2i → total (0+... )
        let d = vdot(&a, &b);
        assert!((d - c(0.0, 0.0) - (c(1.0, -1.0) * c(2.0, 0.0) + c(0.0, 2.0) * c(1.0, 1.0))).norm() < 1e-15);
        assert!((vnorm(&a) - 6.0f64.sqrt()).abs() < 1e-15);
    }
}
