//! Operators on a register of spin-1/2 sites with an optional bosonic mode.
//!
//! Basis conventions, used everywhere downstream:
//! * bit value 0 means |↑⟩ (σz = +1), bit value 1 means |↓⟩;
//! * site k occupies bit (n_spins - 1 - k), so site 0 is the most significant bit
//!   and a Kronecker product reads left to right in site order;
//! * the boson index, when present, is the least significant (fastest) factor.

pub mod dense;
pub mod pauli;

pub use dense::{vaxpy, vdot, vnorm, vscale, C64, DenseOp};
pub use pauli::{pauli_string, FlipTerm, PauliString, PauliSum};

use crate::HdsError;

pub fn sigma_x() -> DenseOp {
    DenseOp::from_fn(2, |i, j| {
        if i != j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn sigma_y() -> DenseOp {
    DenseOp::from_fn(2, |i, j| match (i, j) {
        (0, 1) => C64::new(0.0, -1.0),
        (1, 0) => C64::new(0.0, 1.0),
        _ => C64::new(0.0, 0.0),
    })
}

pub fn sigma_z() -> DenseOp {
    DenseOp::from_diag(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])
}

/// |↓⟩⟨↑|, the σz-lowering operator.
pub fn sigma_minus() -> DenseOp {
    DenseOp::from_fn(2, |i, j| {
        if i == 1 && j == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn id2() -> DenseOp {
    DenseOp::identity(2)
}

/// Shape of the full Hilbert space, plus the site pairing used by hybrid
/// encodings (each pair of physical sites carries one effective spin).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorLayout {
    n_spins: usize,
    boson_dim: Option<usize>,
    pairing: Vec<(usize, usize)>,
}

impl TensorLayout {
    pub fn spins(n_spins: usize) -> Result<Self, HdsError> {
        if n_spins == 0 || n_spins > 24 {
            return Err(HdsError::Model(format!(
                "spin count {n_spins} outside supported range 1..=24"
            )));
        }
        Ok(TensorLayout { n_spins, boson_dim: None, pairing: Vec::new() })
    }

    pub fn with_boson(n_spins: usize, boson_dim: usize) -> Result<Self, HdsError> {
        let mut l = Self::spins(n_spins)?;
        if boson_dim < 2 {
            return Err(HdsError::Model(format!(
                "boson dimension {boson_dim} must be at least 2"
            )));
        }
        l.boson_dim = Some(boson_dim);
        Ok(l)
    }

    /// Declares site pairs. Every site may appear in at most one pair.
    pub fn with_pairing(mut self, pairing: &[(usize, usize)]) -> Result<Self, HdsError> {
        let mut seen = vec![false; self.n_spins];
        for &(a, b) in pairing {
            for s in [a, b] {
                if s >= self.n_spins {
                    return Err(HdsError::Model(format!(
                        "pairing: site {s} out of range for {} spins",
                        self.n_spins
                    )));
                }
                if seen[s] {
                    return Err(HdsError::Model(format!(
                        "pairing: site {s} appears in more than one pair"
                    )));
                }
                seen[s] = true;
            }
        }
        self.pairing = pairing.to_vec();
        Ok(self)
    }

    pub fn pairing(&self) -> &[(usize, usize)] {
        &self.pairing
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn boson_dim(&self) -> Option<usize> {
        self.boson_dim
    }

    pub fn spin_dim(&self) -> usize {
        1usize << self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.boson_dim.unwrap_or(1)
    }

    /// Bit position of a site within the spin part of a basis index.
    pub fn spin_bit(&self, site: usize) -> usize {
        assert!(site < self.n_spins, "site {site} out of range");
        self.n_spins - 1 - site
    }
}

/// Embeds an operator acting on the listed sites (sites[0] = most significant
/// local factor) into the full space, identity elsewhere including the boson.
pub fn embed(layout: &TensorLayout, sites: &[usize], op: &DenseOp) -> Result<DenseOp, HdsError> {
    let k = sites.len();
    if op.dim() != 1usize << k {
        return Err(HdsError::Model(format!(
            "embed: operator dimension {} does not match 2^{k}",
            op.dim()
        )));
    }
    let mut seen = vec![false; layout.n_spins];
    for &s in sites {
        if s >= layout.n_spins {
            return Err(HdsError::Model(format!(
                "embed: site {s} out of range for {} spins",
                layout.n_spins
            )));
        }
        if seen[s] {
            return Err(HdsError::Model(format!("embed: duplicate site {s}")));
        }
        seen[s] = true;
    }

    let bdim = layout.boson_dim.unwrap_or(1);
    let dim = layout.dim();
    let shifts: Vec<usize> = sites.iter().map(|&s| layout.spin_bit(s)).collect();
    let clear_mask: usize = shifts.iter().fold(0usize, |m, &sh| m | (1usize << sh));

    let mut out = DenseOp::zeros(dim);
    for col in 0..dim {
        let spin = col / bdim;
        let boson = col % bdim;
        let mut loc_col = 0usize;
        for &sh in &shifts {
            loc_col = (loc_col << 1) | ((spin >> sh) & 1);
        }
        for loc_row in 0..(1usize << k) {
            let v = op.at(loc_row, loc_col);
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let mut spin_row = spin & !clear_mask;
            for (t, &sh) in shifts.iter().enumerate() {
                spin_row |= ((loc_row >> (k - 1 - t)) & 1) << sh;
            }
            *out.at_mut(spin_row * bdim + boson, col) += v;
        }
    }
    Ok(out)
}

/// Embeds a boson-space operator, identity on all spins.
pub fn embed_boson(layout: &TensorLayout, op: &DenseOp) -> Result<DenseOp, HdsError> {
    let bdim = layout
        .boson_dim
        .ok_or_else(|| HdsError::Model("embed_boson: layout has no boson mode".into()))?;
    if op.dim() != bdim {
        return Err(HdsError::Model(format!(
            "embed_boson: operator dimension {} does not match boson dimension {bdim}",
            op.dim()
        )));
    }
    Ok(DenseOp::identity(layout.spin_dim()).kron(op))
}

/// Product of single-site Paulis as an OperatorMatrix, dense below dimension
/// 256 and a one-term mask sum above. An empty spec list gives the identity.
/// Strings with an odd σy count exist only densely (the mask kernel stores
/// real coefficients), so they are rejected on large layouts.
pub fn pauli_string_matrix(
    layout: &TensorLayout,
    specs: &[(usize, char)],
) -> Result<OperatorMatrix, HdsError> {
    if layout.dim() < 256 {
        let mut out = DenseOp::identity(layout.dim());
        for &(site, axis) in specs {
            let op = match axis {
                'x' => sigma_x(),
                'y' => sigma_y(),
                'z' => sigma_z(),
                other => {
                    return Err(HdsError::Model(format!(
                        "pauli_string_matrix: unknown axis '{other}'"
                    )))
                }
            };
            out = out.matmul(&embed(layout, &[site], &op)?);
        }
        // a genuine product of distinct-site Paulis is Hermitian; repeated
        // sites are rejected to keep that guarantee
        let mut seen = vec![false; layout.n_spins()];
        for &(site, _) in specs {
            if seen[site] {
                return Err(HdsError::Model(format!(
                    "pauli_string_matrix: repeated site {site}"
                )));
            }
            seen[site] = true;
        }
        Ok(OperatorMatrix::Dense(out))
    } else {
        if layout.boson_dim().is_some() {
            return Err(HdsError::Model(
                "pauli_string_matrix: sparse path has no boson support".into(),
            ));
        }
        let s = pauli_string(layout.n_spins(), specs)?;
        let mut sum = PauliSum::new(layout.n_spins());
        sum.add_string(&s, 1.0)?;
        sum.finalize();
        Ok(OperatorMatrix::Pauli(sum))
    }
}

/// Truncated annihilation operator, a|n⟩ = √n |n-1⟩.
pub fn ladder(dim: usize) -> Result<DenseOp, HdsError> {
    if dim < 2 {
        return Err(HdsError::Model(format!(
            "ladder: dimension {dim} must be at least 2"
        )));
    }
    Ok(DenseOp::from_fn(dim, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// diag(0, 1, ..., dim-1), the truncated number operator.
pub fn number_op(dim: usize) -> Result<DenseOp, HdsError> {
    if dim < 2 {
        return Err(HdsError::Model(format!(
            "number_op: dimension {dim} must be at least 2"
        )));
    }
    let d: Vec<C64> = (0..dim).map(|n| C64::new(n as f64, 0.0)).collect();
    Ok(DenseOp::from_diag(&d))
}

/// Product state ⊗_k site_states[k] ⊗ boson, as a full-space vector.
/// Index 0 of each per-site pair is the |↑⟩ amplitude.
pub fn product_state(
    layout: &TensorLayout,
    site_states: &[[C64; 2]],
    boson: Option<&[C64]>,
) -> Result<Vec<C64>, HdsError> {
    if site_states.len() != layout.n_spins {
        return Err(HdsError::Model(format!(
            "product_state: {} site states for {} spins",
            site_states.len(),
            layout.n_spins
        )));
    }
    let bdim = layout.boson_dim.unwrap_or(1);
    let bamp: Vec<C64> = match (layout.boson_dim, boson) {
        (Some(bd), Some(b)) => {
            if b.len() != bd {
                return Err(HdsError::Model(format!(
                    "product_state: boson amplitude length {} does not match dimension {bd}",
                    b.len()
                )));
            }
            b.to_vec()
        }
        (Some(_), None) => {
            let mut v = vec![C64::new(0.0, 0.0); bdim];
            v[0] = C64::new(1.0, 0.0);
            v
        }
        (None, Some(_)) => {
            return Err(HdsError::Model(
                "product_state: boson amplitudes given but layout has no boson mode".into(),
            ))
        }
        (None, None) => vec![C64::new(1.0, 0.0)],
    };

    let dim = layout.dim();
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    for idx in 0..dim {
        let spin = idx / bdim;
        let b = idx % bdim;
        let mut amp = bamp[b];
        for site in 0..layout.n_spins {
            let bit = (spin >> layout.spin_bit(site)) & 1;
            amp *= site_states[site][bit];
            if amp == C64::new(0.0, 0.0) {
                break;
            }
        }
        psi[idx] = amp;
    }
    Ok(psi)
}

/// A Hamiltonian in whichever representation the dimension calls for.
/// Both variants are Hermitian: the dense one by numeric check at build time,
/// the Pauli one by construction (only even-σy strings are representable).
#[derive(Clone, Debug)]
pub enum OperatorMatrix {
    Dense(DenseOp),
    Pauli(PauliSum),
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        match self {
            OperatorMatrix::Dense(d) => d.dim(),
            OperatorMatrix::Pauli(p) => p.dim(),
        }
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        match self {
            OperatorMatrix::Dense(d) => d.matvec(x, y),
            OperatorMatrix::Pauli(p) => p.matvec(x, y),
        }
    }

    /// Dense: numeric deviation check. Pauli: structurally exact, always passes.
    pub fn assert_hermitian(&self, tol: f64) -> Result<(), HdsError> {
        if let OperatorMatrix::Dense(d) = self {
            let dev = d.max_nonhermiticity();
            if dev > tol {
                return Err(HdsError::Numerics(format!(
                    "Hamiltonian deviates from Hermitian by {dev:.3e} (tol {tol:.1e})"
                )));
            }
        }
        Ok(())
    }

    /// Cheap upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        match self {
            OperatorMatrix::Dense(d) => d.one_norm(),
            OperatorMatrix::Pauli(p) => p.norm_bound(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_matches_explicit_kron() {
        let layout = TensorLayout::spins(3).unwrap();
        let op = sigma_y();
        let full = embed(&layout, &[1], &op).unwrap();
        let want = id2().kron(&sigma_y()).kron(&id2());
        assert!(full.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn embed_two_sites_respects_argument_order() {
        let layout = TensorLayout::spins(3).unwrap();
        let op = sigma_x().kron(&sigma_z()); // local: first listed site carries σx
        let a = embed(&layout, &[2, 0], &op).unwrap();
        let want = sigma_z().kron(&id2()).kron(&sigma_x());
        assert!(a.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn embed_agrees_with_pauli_kernel() {
        let layout = TensorLayout::spins(4).unwrap();
        let op = sigma_y().kron(&sigma_y());
        let dense = embed(&layout, &[1, 3], &op).unwrap();
        let mut sum = PauliSum::new(4);
        sum.add_string(&pauli_string(4, &[(1, 'y'), (3, 'y')]).unwrap(), 1.0)
            .unwrap();
        sum.finalize();
        assert!(dense.max_abs_diff(&sum.to_dense()) < 1e-14);
    }

    #[test]
    fn embed_validation() {
        let layout = TensorLayout::spins(2).unwrap();
        assert!(embed(&layout, &[0, 1], &sigma_x()).is_err()); // dim mismatch
        assert!(embed(&layout, &[2], &sigma_x()).is_err()); // out of range
        assert!(embed(&layout, &[0, 0], &sigma_x().kron(&sigma_x())).is_err()); // duplicate
    }

    #[test]
    fn embed_with_boson_keeps_boson_identity() {
        let layout = TensorLayout::with_boson(2, 3).unwrap();
        let full = embed(&layout, &[0], &sigma_z()).unwrap();
        let want = sigma_z().kron(&id2()).kron(&DenseOp::identity(3));
        assert!(full.max_abs_diff(&want) < 1e-15);

        let num = number_op(3).unwrap();
        let fb = embed_boson(&layout, &num).unwrap();
        let want_b = id2().kron(&id2()).kron(&num);
        assert!(fb.max_abs_diff(&want_b) < 1e-15);
    }

    #[test]
    fn ladder_and_number() {
        let a = ladder(4).unwrap();
        let n = a.dagger().matmul(&a);
        assert!(n.max_abs_diff(&number_op(4).unwrap()) < 1e-14);
        // commutator truncation artifact sits only in the top corner
        let comm = a.matmul(&a.dagger()).sub(&n);
        assert!((comm.at(0, 0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((comm.at(3, 3) - C64::new(-3.0, 0.0)).norm() < 1e-15);
        assert!(ladder(1).is_err());
    }

    #[test]
    fn product_state_places_amplitudes() {
        let layout = TensorLayout::spins(2).unwrap();
        let up = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let plus = [
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ];
        // |↑⟩ ⊗ |+⟩: amplitude 1/√2 on indices 0 (↑↑) and 1 (↑↓)
        let psi = product_state(&layout, &[up, plus], None).unwrap();
        assert!((psi[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((psi[1].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(psi[2].norm() < 1e-300 && psi[3].norm() < 1e-300);
        assert!((vnorm(&psi) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_state_boson_level_default_is_ground() {
        let layout = TensorLayout::with_boson(1, 3).unwrap();
        let dn = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let psi = product_state(&layout, &[dn], None).unwrap();
        // |↓⟩⊗|0⟩ sits at spin index 1, boson 0 → flat index 3
        assert!((psi[3].re - 1.0).abs() < 1e-15);
        assert_eq!(psi.iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn pairing_validation() {
        let base = TensorLayout::spins(4).unwrap();
        let ok = base.clone().with_pairing(&[(0, 1), (2, 3)]).unwrap();
        assert_eq!(ok.pairing(), &[(0, 1), (2, 3)]);
        assert!(base.clone().with_pairing(&[(0, 1), (1, 2)]).is_err());
        assert!(base.with_pairing(&[(0, 4)]).is_err());
    }

    #[test]
    fn pauli_string_matrix_paths() {
        let small = TensorLayout::spins(2).unwrap();
        let m = pauli_string_matrix(&small, &[(0, 'z'), (1, 'z')]).unwrap();
        match &m {
            OperatorMatrix::Dense(d) => {
                let want = sigma_z().kron(&sigma_z());
                assert!(d.max_abs_diff(&want) < 1e-15);
            }
            _ => panic!("expected dense below 256"),
        }
        // identity for the empty list, involution for a single σx
        if let OperatorMatrix::Dense(d) = pauli_string_matrix(&small, &[]).unwrap() {
            assert!(d.max_abs_diff(&DenseOp::identity(4)) < 1e-15);
        }
        if let OperatorMatrix::Dense(d) = pauli_string_matrix(&small, &[(0, 'x')]).unwrap() {
            assert!(d.matmul(&d).max_abs_diff(&DenseOp::identity(4)) < 1e-15);
        }
        assert!(pauli_string_matrix(&small, &[(0, 'x'), (0, 'y')]).is_err());

        let big = TensorLayout::spins(9).unwrap();
        let sparse = pauli_string_matrix(&big, &[(2, 'x'), (7, 'x')]).unwrap();
        assert!(matches!(sparse, OperatorMatrix::Pauli(_)));
        // odd-σy strings have no real-coefficient mask form
        assert!(pauli_string_matrix(&big, &[(0, 'y')]).is_err());
    }

    #[test]
    fn operator_matrix_dispatch() {
        let mut sum = PauliSum::new(2);
        sum.add_string(&pauli_string(2, &[(0, 'x'), (1, 'x')]).unwrap(), 0.5)
            .unwrap();
        sum.finalize();
        let dense = sum.to_dense();
        let op_p = OperatorMatrix::Pauli(sum);
        let op_d = OperatorMatrix::Dense(dense);
        let x: Vec<C64> = (0..4).map(|i| C64::new(i as f64, 1.0)).collect();
        let mut y1 = vec![C64::new(0.0, 0.0); 4];
        let mut y2 = y1.clone();
        op_p.matvec(&x, &mut y1);
        op_d.matvec(&x, &mut y2);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(op_d.assert_hermitian(1e-12).is_ok());
    }
}
