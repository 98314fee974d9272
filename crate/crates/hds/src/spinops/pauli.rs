//! Matrix-free Pauli-sum operators over up to ~20 qubits.
//!
//! A term is stored as a pair of bit masks. Applying X on the sites in `xmask`
//! flips those bits of a basis index; Z on the sites in `zmask` multiplies by the
//! parity of the masked bits of the *input* index (Z acts before X, which is the
//! convention under which σy = i·X·Z per site). All amplitudes kept here are real:
//! a product with an odd number of σy factors would need an imaginary prefactor
//! and is rejected. Since the sites where both masks overlap are exactly the σy
//! sites, the even-σy rule is also precisely the condition for each stored term
//! to be Hermitian, so a `PauliSum` is Hermitian by construction.
//!
//! Terms with the same flip mask are merged: a z-independent amplitude (σxσx)
//! and a parity amplitude on a shared zmask (σyσy) fuse into one pass over the
//! state vector, which is where the hot loops of the big lattice runs live.

use super::dense::{C64, DenseOp};
use crate::HdsError;

/// One off-diagonal pass: out[s ^ xmask] += (c0 + cz * parity(s & zmask)) * in[s].
#[derive(Clone, Copy, Debug)]
pub struct FlipTerm {
    pub xmask: usize,
    pub zmask: usize,
    pub c0: f64,
    pub cz: f64,
}

/// A bare Pauli string in mask form. `y_count` tracks how many sites carry σy,
/// which fixes the i^y prefactor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliString {
    pub xmask: usize,
    pub zmask: usize,
    pub y_count: u32,
}

/// Builds the mask form of a product of single-site Paulis. Site 0 maps to the
/// most significant bit of the basis index.
pub fn pauli_string(n_spins: usize, factors: &[(usize, char)]) -> Result<PauliString, HdsError> {
    let mut xmask = 0usize;
    let mut zmask = 0usize;
    let mut seen = 0usize;
    let mut y_count = 0u32;
    for &(site, axis) in factors {
        if site >= n_spins {
            return Err(HdsError::Model(format!(
                "pauli_string: site {site} out of range for {n_spins} spins"
            )));
        }
        let bit = 1usize << (n_spins - 1 - site);
        if seen & bit != 0 {
            return Err(HdsError::Model(format!("pauli_string: duplicate site {site}")));
        }
        seen |= bit;
        match axis {
            'x' => xmask |= bit,
            'y' => {
                xmask |= bit;
                zmask |= bit;
                y_count += 1;
            }
            'z' => zmask |= bit,
            other => {
                return Err(HdsError::Model(format!(
                    "pauli_string: axis '{other}' is not one of x, y, z"
                )))
            }
        }
    }
    Ok(PauliString { xmask, zmask, y_count })
}

/// Sum of real-amplitude Pauli terms with a consolidated diagonal.
#[derive(Clone, Debug)]
pub struct PauliSum {
    n_qubits: usize,
    flips: Vec<FlipTerm>,
    diags: Vec<(usize, f64)>,
    diag_cache: Vec<f64>,
    dirty: bool,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        assert!((1..=24).contains(&n_qubits), "qubit count out of range");
        PauliSum {
            n_qubits,
            flips: Vec::new(),
            diags: Vec::new(),
            diag_cache: vec![0.0; 1usize << n_qubits],
            dirty: false,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Drops all terms but keeps allocations; used when coefficients are rebuilt
    /// every grid step.
    pub fn clear_terms(&mut self) {
        self.flips.clear();
        self.diags.clear();
        self.dirty = true;
    }

    /// Adds coeff * (the string) to the sum. Strings with an odd number of σy
    /// factors have an imaginary prefactor and are not representable here.
    pub fn add_string(&mut self, ps: &PauliString, coeff: f64) -> Result<(), HdsError> {
        if !ps.y_count.is_multiple_of(2) {
            return Err(HdsError::Model(
                "pauli term with odd σy count has an imaginary amplitude; not supported in the mask kernel".into(),
            ));
        }
        let sign = if ps.y_count.is_multiple_of(4) { 1.0 } else { -1.0 };
        let c = sign * coeff;
        if ps.xmask == 0 {
            self.diags.push((ps.zmask, c));
        } else if ps.zmask == 0 {
            self.merge_flip(ps.xmask, 0, c, 0.0);
        } else {
            self.merge_flip(ps.xmask, ps.zmask, 0.0, c);
        }
        self.dirty = true;
        Ok(())
    }

    fn merge_flip(&mut self, xmask: usize, zmask: usize, c0: f64, cz: f64) {
        debug_assert!(cz == 0.0 || (xmask & zmask).count_ones().is_multiple_of(2));
        for t in &mut self.flips {
            if t.xmask != xmask {
                continue;
            }
            if zmask == 0 {
                t.c0 += c0;
                return;
            }
            if t.zmask == zmask {
                t.c0 += c0;
                t.cz += cz;
                return;
            }
            if t.cz == 0.0 {
                t.zmask = zmask;
                t.cz = cz;
                t.c0 += c0;
                return;
            }
        }
        self.flips.push(FlipTerm { xmask, zmask, c0, cz });
    }

    /// Rebuilds the consolidated diagonal. Must run after the last term edit and
    /// before `matvec`.
    pub fn finalize(&mut self) {
        let dim = self.dim();
        self.diag_cache.clear();
        self.diag_cache.resize(dim, 0.0);
        for &(zmask, coeff) in &self.diags {
            if zmask == 0 {
                for v in &mut self.diag_cache {
                    *v += coeff;
                }
            } else {
                for (s, v) in self.diag_cache.iter_mut().enumerate() {
                    *v += coeff * parity(s & zmask);
                }
            }
        }
        self.dirty = false;
    }

    /// y = H x. Panics if terms were edited without a `finalize`.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert!(!self.dirty, "PauliSum::matvec before finalize");
        let dim = self.dim();
        assert_eq!(x.len(), dim);
        assert_eq!(y.len(), dim);
        for s in 0..dim {
            y[s] = x[s] * self.diag_cache[s];
        }
        for t in &self.flips {
            let (xm, zm) = (t.xmask, t.zmask);
            if t.cz == 0.0 {
                let c0 = t.c0;
                for s in 0..dim {
                    y[s ^ xm] += x[s] * c0;
                }
            } else if t.c0 == 0.0 {
                let cz = t.cz;
                for s in 0..dim {
                    y[s ^ xm] += x[s] * (cz * parity(s & zm));
                }
            } else {
                let (c0, cz) = (t.c0, t.cz);
                for s in 0..dim {
                    y[s ^ xm] += x[s] * (c0 + cz * parity(s & zm));
                }
            }
        }
    }

    /// Upper bound on the operator norm: sum of absolute term amplitudes.
    pub fn norm_bound(&self) -> f64 {
        let diag: f64 = self.diags.iter().map(|&(_, c)| c.abs()).sum();
        let flip: f64 = self.flips.iter().map(|t| t.c0.abs() + t.cz.abs()).sum();
        diag + flip
    }

    pub fn n_flip_terms(&self) -> usize {
        self.flips.len()
    }

    /// Dense form for cross-checks; quadratic memory, test-sized inputs only.
    pub fn to_dense(&self) -> DenseOp {
        assert!(!self.dirty, "PauliSum::to_dense before finalize");
        let dim = self.dim();
        let mut out = DenseOp::zeros(dim);
        for s in 0..dim {
            *out.at_mut(s, s) += C64::new(self.diag_cache[s], 0.0);
        }
        for t in &self.flips {
            for s in 0..dim {
                let amp = t.c0 + t.cz * parity(s & t.zmask);
                *out.at_mut(s ^ t.xmask, s) += C64::new(amp, 0.0);
            }
        }
        out
    }
}

#[inline(always)]
fn parity(bits: usize) -> f64 {
    1.0 - 2.0 * ((bits.count_ones() & 1) as f64)
}
