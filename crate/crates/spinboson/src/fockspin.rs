//! Truncated Fock x spin basis, operator construction, and exact spectra.
//!
//! Basis ordering interleaves spin fastest: index = 2 n + s with s = 0 for
//! spin up (m = +1/2) and s = 1 for spin down (m = -1/2). The Hamiltonian
//!
//!   H = (delta_e / 2) sigma_z + hbar_omega0 a^dag a + U (a + a^dag) sigma_x
//!
//! is then real symmetric and banded with bandwidth 3. The parity
//! P = sigma_z (-1)^{a^dag a} is diagonal, commutes with H exactly, and splits
//! it into two symmetric tridiagonal blocks.

use std::io::{Read, Write};

use nalgebra::{DMatrix, Matrix2};

use crate::linalg;
use crate::model::ModelParams;
use crate::tridiag::SymTridiagonal;
use crate::{Error, Result};

/// Spin projection m = +/- 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn m(self) -> f64 {
        match self {
            Spin::Up => 0.5,
            Spin::Down => -0.5,
        }
    }

    /// Position within a basis pair: up = 0, down = 1.
    pub fn offset(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// Truncated product basis |n> (x) |m>, n = 0..=n_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpinBasis {
    n_max: usize,
}

impl FockSpinBasis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Config("n_max must be >= 1".into()));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of Fock levels, n_max + 1.
    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    /// Total dimension 2 (n_max + 1).
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    pub fn index(&self, n: usize, spin: Spin) -> usize {
        debug_assert!(n <= self.n_max);
        2 * n + spin.offset()
    }

    pub fn state(&self, index: usize) -> (usize, Spin) {
        debug_assert!(index < self.dim());
        let spin = if index.is_multiple_of(2) { Spin::Up } else { Spin::Down };
        (index / 2, spin)
    }
}

/// Dense real operator tagged with the basis it lives in.
///
/// Construction does not force symmetry (ladder operators are not symmetric);
/// `diagonalize` checks it where required.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    basis: FockSpinBasis,
    mat: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn new(basis: FockSpinBasis, mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != basis.dim() || mat.ncols() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "matrix is {}x{} but basis dimension is {}",
                mat.nrows(),
                mat.ncols(),
                basis.dim()
            )));
        }
        Ok(Self { basis, mat })
    }

    pub fn basis(&self) -> FockSpinBasis {
        self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// ||A - A^T||_max relative to the largest entry (and 1).
    pub fn hermiticity_residual(&self) -> f64 {
        linalg::symmetry_residual(&self.mat) / linalg::max_abs(&self.mat).max(1.0)
    }

    pub fn same_basis(&self, other: &OperatorMatrix) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch(format!(
                "operators live in different bases: n_max {} vs {}",
                self.basis.n_max(),
                other.basis.n_max()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_basis(other)?;
        OperatorMatrix::new(self.basis, &self.mat + &other.mat)
    }

    pub fn sub(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_basis(other)?;
        OperatorMatrix::new(self.basis, &self.mat - &other.mat)
    }

    pub fn scale(&self, factor: f64) -> OperatorMatrix {
        OperatorMatrix {
            basis: self.basis,
            mat: &self.mat * factor,
        }
    }

    pub fn mul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_basis(other)?;
        OperatorMatrix::new(self.basis, &self.mat * &other.mat)
    }

    /// A^T B A, the conjugation used for basis rotations.
    pub fn conjugate_by(&self, rotation: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_basis(rotation)?;
        OperatorMatrix::new(
            self.basis,
            rotation.mat.transpose() * &self.mat * &rotation.mat,
        )
    }

    /// Expectation value v^T A v.
    pub fn expectation(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "vector length {} does not match basis dimension {}",
                v.len(),
                self.basis.dim()
            )));
        }
        let dv = nalgebra::DVector::from_column_slice(v);
        Ok((dv.transpose() * &self.mat * &dv)[(0, 0)])
    }
}

/// Annihilation operator a (x) I_2: <n-1, m| a |n, m> = sqrt(n).
pub fn build_ladder(basis: FockSpinBasis) -> OperatorMatrix {
    let mut mat = DMatrix::zeros(basis.dim(), basis.dim());
    for n in 1..=basis.n_max() {
        let amp = (n as f64).sqrt();
        for spin in [Spin::Up, Spin::Down] {
            mat[(basis.index(n - 1, spin), basis.index(n, spin))] = amp;
        }
    }
    OperatorMatrix { basis, mat }
}

/// Full spin-boson Hamiltonian in the truncated basis.
pub fn build_hamiltonian(params: &ModelParams, basis: FockSpinBasis) -> OperatorMatrix {
    let mut mat = DMatrix::zeros(basis.dim(), basis.dim());
    let de = params.delta_e();
    let w0 = params.hbar_omega0();
    let u = params.coupling_u();
    for n in 0..=basis.n_max() {
        for spin in [Spin::Up, Spin::Down] {
            let i = basis.index(n, spin);
            mat[(i, i)] = spin.m() * de + n as f64 * w0;
        }
        if n < basis.n_max() {
            // U (a + a^dag) sigma_x couples (n, m) <-> (n + 1, -m).
            let amp = u * ((n + 1) as f64).sqrt();
            for spin in [Spin::Up, Spin::Down] {
                let i = basis.index(n, spin);
                let j = basis.index(n + 1, spin.flipped());
                mat[(i, j)] = amp;
                mat[(j, i)] = amp;
            }
        }
    }
    OperatorMatrix { basis, mat }
}

/// Diagonal parity P = sigma_z (-1)^{a^dag a}; entries (2m) (-1)^n.
pub fn parity_signs(basis: FockSpinBasis) -> Vec<f64> {
    (0..basis.dim())
        .map(|i| {
            let (n, spin) = basis.state(i);
            let sz = 2.0 * spin.m();
            let ph = if n % 2 == 0 { 1.0 } else { -1.0 };
            sz * ph
        })
        .collect()
}

pub fn parity_operator(basis: FockSpinBasis) -> OperatorMatrix {
    let mat = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(parity_signs(basis)));
    OperatorMatrix { basis, mat }
}

/// States of one parity block, ordered by Fock number. Row r of the block is
/// the state (r, spin) with spin alternating so the parity stays fixed.
pub fn parity_block_states(basis: FockSpinBasis, parity: i8) -> Vec<(usize, Spin)> {
    (0..=basis.n_max())
        .map(|n| {
            let spin = match (parity, n % 2) {
                (1, 0) | (-1, 1) => Spin::Up,
                _ => Spin::Down,
            };
            (n, spin)
        })
        .collect()
}

/// Symmetric tridiagonal block of H at fixed parity (+1 or -1).
pub fn parity_block(params: &ModelParams, basis: FockSpinBasis, parity: i8) -> Result<SymTridiagonal> {
    if parity != 1 && parity != -1 {
        return Err(Error::Domain(format!("parity must be +/-1, got {parity}")));
    }
    let de = params.delta_e();
    let w0 = params.hbar_omega0();
    let u = params.coupling_u();
    let sign = parity as f64;
    let d: Vec<f64> = (0..=basis.n_max())
        .map(|n| {
            let alt = if n % 2 == 0 { 1.0 } else { -1.0 };
            n as f64 * w0 + sign * alt * de / 2.0
        })
        .collect();
    let e: Vec<f64> = (1..=basis.n_max()).map(|n| u * (n as f64).sqrt()).collect();
    SymTridiagonal::new(d, e)
}

/// Exact spectrum of a Hermitian operator: ascending eigenvalues, orthonormal
/// eigenvector columns, and parity labels when the operator commutes with P.
#[derive(Debug, Clone)]
pub struct Spectrum {
    basis: FockSpinBasis,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    parity: Option<Vec<i8>>,
}

const HERMITICITY_TOL: f64 = 1e-12;
const PARITY_RESIDUAL_TOL: f64 = 1e-8;

pub fn diagonalize(op: &OperatorMatrix) -> Result<Spectrum> {
    let herm = op.hermiticity_residual();
    if herm > HERMITICITY_TOL {
        return Err(Error::Eigensolve(format!(
            "operator is not Hermitian: relative asymmetry {herm:.3e}"
        )));
    }
    let (eigenvalues, mut eigenvectors) = linalg::symmetric_eigen_sorted(op.matrix())?;
    let signs = parity_signs(op.basis());
    let parity = if commutes_with_parity(op, &signs) {
        Some(attach_parity_labels(
            &eigenvalues,
            &mut eigenvectors,
            &signs,
        )?)
    } else {
        None
    };
    Ok(Spectrum {
        basis: op.basis(),
        eigenvalues,
        eigenvectors,
        parity,
    })
}

/// With P diagonal, [P, H]_{ij} = (p_i - p_j) H_{ij}: the commutator vanishes
/// iff H has no entries linking opposite parities.
fn commutes_with_parity(op: &OperatorMatrix, signs: &[f64]) -> bool {
    let mat = op.matrix();
    let tol = HERMITICITY_TOL * linalg::max_abs(mat).max(1.0);
    for j in 0..mat.ncols() {
        for i in 0..mat.nrows() {
            if signs[i] != signs[j] && mat[(i, j)].abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Per-column parity expectation; rotates numerically mixed near-degenerate
/// columns apart (the solver may blend exact crossings of opposite parity)
/// before labelling.
fn attach_parity_labels(
    eigenvalues: &[f64],
    eigenvectors: &mut DMatrix<f64>,
    signs: &[f64],
) -> Result<Vec<i8>> {
    let n = eigenvalues.len();
    // Tentative label and off-parity residual ||P v - p v||_2 = 2 sqrt(w_off),
    // accumulated from the minority weight directly so that mixings far below
    // 1 - <P> resolution (~1e-8) are still visible.
    let label_and_residual = |vecs: &DMatrix<f64>, col: usize| -> (i8, f64) {
        let (mut wp, mut wm) = (0.0f64, 0.0f64);
        for (v, s) in vecs.column(col).iter().zip(signs) {
            if *s > 0.0 {
                wp += v * v;
            } else {
                wm += v * v;
            }
        }
        let label: i8 = if wp >= wm { 1 } else { -1 };
        (label, 2.0 * wp.min(wm).sqrt())
    };
    // The eigensolver blends opposite-parity vectors by ~ backward_error / gap,
    // so the cluster width must reach gaps where that blend is still above the
    // residual floor enforced below; 1e-5 * scale leaves an order of margin.
    let scale = eigenvalues.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    let cluster_tol = 1e-5 * scale;
    let mut col = 0;
    while col < n {
        let mut end = col + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] <= cluster_tol {
            end += 1;
        }
        let width = end - col;
        if width > 1 {
            let mixed = (col..end)
                .any(|c| label_and_residual(eigenvectors, c).1 > 0.5 * PARITY_RESIDUAL_TOL);
            if mixed {
                // Diagonalize P restricted to the cluster span and rotate.
                let sub = eigenvectors.columns(col, width).into_owned();
                let mut p_sub = DMatrix::zeros(width, width);
                for a in 0..width {
                    for b in 0..width {
                        p_sub[(a, b)] = sub
                            .column(a)
                            .iter()
                            .zip(sub.column(b).iter())
                            .zip(signs)
                            .map(|((x, y), s)| s * x * y)
                            .sum();
                    }
                }
                let (_, rot) = linalg::symmetric_eigen_sorted(&p_sub)?;
                let rotated = &sub * rot;
                for c in 0..width {
                    eigenvectors.set_column(col + c, &rotated.column(c));
                }
            }
        }
        col = end;
    }
    let mut labels = Vec::with_capacity(n);
    for c in 0..n {
        let (label, residual) = label_and_residual(eigenvectors, c);
        if residual > PARITY_RESIDUAL_TOL {
            return Err(Error::Eigensolve(format!(
                "eigenvector {c} off-parity residual {residual:.3e} exceeds {PARITY_RESIDUAL_TOL:.1e}"
            )));
        }
        labels.push(label);
    }
    Ok(labels)
}

impl Spectrum {
    pub fn basis(&self) -> FockSpinBasis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    /// Parity labels, present when the operator commuted with P.
    pub fn parity_labels(&self) -> Option<&[i8]> {
        self.parity.as_deref()
    }

    /// ||V^T V - I||_max.
    pub fn orthonormality_residual(&self) -> f64 {
        linalg::orthonormality_residual(&self.eigenvectors)
    }

    /// max_k ||H v_k - lambda_k v_k||_2 / max(1, ||H||_max).
    pub fn residual_max(&self, op: &OperatorMatrix) -> f64 {
        let hv = op.matrix() * &self.eigenvectors;
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let r = (hv.column(k) - self.eigenvalues[k] * self.eigenvectors.column(k)).norm();
            worst = worst.max(r);
        }
        worst / linalg::max_abs(op.matrix()).max(1.0)
    }

    /// Population of eigenstate `k` above the truncation buffer, i.e. total
    /// weight on Fock levels n > 0.9 n_max. States are trustworthy when this
    /// is below 1e-8.
    pub fn truncation_weight(&self, k: usize) -> f64 {
        let cutoff = 0.9 * self.basis.n_max() as f64;
        self.eigenvectors
            .column(k)
            .iter()
            .enumerate()
            .filter(|(i, _)| (i / 2) as f64 > cutoff)
            .map(|(_, v)| v * v)
            .sum()
    }

    pub const TRUNCATION_WEIGHT_TOL: f64 = 1e-8;

    pub fn well_resolved(&self, k: usize) -> bool {
        self.truncation_weight(k) < Self::TRUNCATION_WEIGHT_TOL
    }
}

/// Spin block constants in the real representation. `J` stands in for
/// i sigma_y = [[0, 1], [-1, 0]] acting on (up, down).
pub mod spin_blocks {
    use super::Matrix2;

    pub fn identity() -> Matrix2<f64> {
        Matrix2::identity()
    }

    pub fn sigma_z() -> Matrix2<f64> {
        Matrix2::new(1.0, 0.0, 0.0, -1.0)
    }

    pub fn sigma_x() -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, 1.0, 0.0)
    }

    /// i sigma_y, a real antisymmetric matrix.
    pub fn i_sigma_y() -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, -1.0, 0.0)
    }
}

/// Binary eigenvalue dump: little-endian u64 count, then the eigenvalues as
/// little-endian f64 in ascending order.
pub fn write_eigenvalue_dump(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_eigenvalue_dump(r: &mut impl Read) -> std::io::Result<Vec<f64>> {
    let mut len_buf = [0u8; 8];
    r.read_exact(&mut len_buf)?;
    let len = u64::from_le_bytes(len_buf) as usize;
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(de: f64, w0: f64, u: f64) -> ModelParams {
        ModelParams::new(de, w0, u, 60.0).unwrap()
    }

    #[test]
    fn basis_indexing_round_trips() {
        let b = FockSpinBasis::new(7).unwrap();
        assert_eq!(b.dim(), 16);
        for i in 0..b.dim() {
            let (n, s) = b.state(i);
            assert_eq!(b.index(n, s), i);
        }
        assert_eq!(b.index(0, Spin::Up), 0);
        assert_eq!(b.index(0, Spin::Down), 1);
        assert_eq!(b.index(3, Spin::Up), 6);
    }

    #[test]
    fn ladder_matrix_elements() {
        let b = FockSpinBasis::new(4).unwrap();
        let a = build_ladder(b);
        let m = a.matrix();
        // <2, up| a |3, up> = sqrt(3).
        assert_relative_eq!(m[(b.index(2, Spin::Up), b.index(3, Spin::Up))], 3f64.sqrt());
        assert_eq!(m[(b.index(3, Spin::Up), b.index(2, Spin::Up))], 0.0);
        assert_eq!(m[(b.index(2, Spin::Up), b.index(3, Spin::Down))], 0.0);
        // a^dag a is diagonal with entries n away from the truncation edge.
        let num = a.matrix().transpose() * a.matrix();
        for n in 0..=4 {
            assert_relative_eq!(num[(b.index(n, Spin::Down), b.index(n, Spin::Down))], n as f64);
        }
    }

    #[test]
    fn hamiltonian_structure() {
        let b = FockSpinBasis::new(5).unwrap();
        let p = params(11.0, 1.0, 0.3);
        let h = build_hamiltonian(&p, b);
        let m = h.matrix();
        assert_eq!(h.hermiticity_residual(), 0.0);
        // Diagonal: m delta_e + n hbar_omega0.
        assert_relative_eq!(m[(b.index(2, Spin::Up), b.index(2, Spin::Up))], 5.5 + 2.0);
        assert_relative_eq!(m[(b.index(3, Spin::Down), b.index(3, Spin::Down))], -5.5 + 3.0);
        // Off-diagonal: U sqrt(n+1) between (n, m) and (n+1, -m).
        assert_relative_eq!(
            m[(b.index(2, Spin::Up), b.index(3, Spin::Down))],
            0.3 * 3f64.sqrt()
        );
        // No spin-preserving boson coupling.
        assert_eq!(m[(b.index(2, Spin::Up), b.index(3, Spin::Up))], 0.0);
        // Bandwidth 3 in the interleaved ordering.
        for j in 0..b.dim() {
            for i in 0..b.dim() {
                if (i as isize - j as isize).abs() > 3 {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_coupling_spectrum_is_shifted_ladder() {
        let b = FockSpinBasis::new(6).unwrap();
        let p = params(11.0, 1.0, 0.0);
        let spec = diagonalize(&build_hamiltonian(&p, b)).unwrap();
        let mut expected: Vec<f64> = (0..=6)
            .flat_map(|n| [n as f64 + 5.5, n as f64 - 5.5])
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in spec.eigenvalues().iter().zip(&expected) {
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn small_case_matches_two_by_two_blocks() {
        // n_max = 1, delta_e = 2, U = 0.3: H splits into two 2x2 blocks whose
        // eigenvalues follow from the quadratic formula.
        let b = FockSpinBasis::new(1).unwrap();
        let p = ModelParams::new(2.0, 1.0, 0.3, 60.0).unwrap();
        let spec = diagonalize(&build_hamiltonian(&p, b)).unwrap();
        let disc1 = (1.0f64 + 4.0 * 0.09).sqrt(); // block {(0,up),(1,down)}
        let disc2 = (9.0f64 + 4.0 * 0.09).sqrt(); // block {(0,down),(1,up)}
        let mut expected = vec![
            (1.0 - disc1) / 2.0,
            (1.0 + disc1) / 2.0,
            (1.0 - disc2) / 2.0,
            (1.0 + disc2) / 2.0,
        ];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in spec.eigenvalues().iter().zip(&expected) {
            assert_relative_eq!(got, want, epsilon = 1e-13);
        }
    }

    #[test]
    fn ground_state_matches_second_order_perturbation() {
        // Weak coupling: E_0 = -delta_e/2 - U^2/(delta_e + hbar_omega0) + O(U^4).
        let b = FockSpinBasis::new(40).unwrap();
        let u = 0.02;
        let p = params(11.0, 1.0, u);
        let spec = diagonalize(&build_hamiltonian(&p, b)).unwrap();
        let e_pt = -5.5 - u * u / 12.0;
        assert_relative_eq!(spec.eigenvalue(0), e_pt, epsilon = 5e-9);
    }

    #[test]
    fn spectrum_contracts_hold() {
        let b = FockSpinBasis::new(40).unwrap();
        let p = params(11.0, 1.0, 0.8);
        let h = build_hamiltonian(&p, b);
        let spec = diagonalize(&h).unwrap();
        for w in spec.eigenvalues().windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!(spec.orthonormality_residual() < 1e-10);
        assert!(spec.residual_max(&h) < 1e-9);
    }

    #[test]
    fn parity_commutes_and_labels_attach() {
        let b = FockSpinBasis::new(30).unwrap();
        let p = params(11.0, 1.0, 0.6);
        let h = build_hamiltonian(&p, b);
        let pop = parity_operator(b);
        // [P, H] vanishes identically for this construction.
        let comm = pop.mul(&h).unwrap().sub(&h.mul(&pop).unwrap()).unwrap();
        assert_eq!(linalg::max_abs(comm.matrix()), 0.0);

        let spec = diagonalize(&h).unwrap();
        let labels = spec.parity_labels().expect("labels attach");
        assert_eq!(labels.len(), b.dim());
        assert!(labels.iter().all(|&l| l == 1 || l == -1));
        // Both parities occur equally often (each block has fock_dim states).
        let plus = labels.iter().filter(|&&l| l == 1).count();
        assert_eq!(plus, b.fock_dim());
    }

    #[test]
    fn parity_labels_at_zero_coupling_follow_pattern() {
        let b = FockSpinBasis::new(8).unwrap();
        let p = params(11.0, 1.0, 0.0);
        let spec = diagonalize(&build_hamiltonian(&p, b)).unwrap();
        let labels = spec.parity_labels().unwrap();
        // At U = 0 each eigenvector is a basis state: eigenvalue n + m * 11.
        // With n_max < 11 exactly one branch gives a valid Fock number.
        for (k, &e) in spec.eigenvalues().iter().enumerate() {
            let n_down = e + 5.5;
            let (n, spin) = if (-0.1..=8.1).contains(&n_down) {
                (n_down.round() as usize, Spin::Down)
            } else {
                ((e - 5.5).round() as usize, Spin::Up)
            };
            let want = (2.0 * spin.m()) as i8 * if n % 2 == 0 { 1 } else { -1 };
            assert_eq!(labels[k], want, "eigenvalue {e}");
        }
    }

    #[test]
    fn parity_blocks_reproduce_full_spectrum() {
        let b = FockSpinBasis::new(25).unwrap();
        let p = params(7.0, 0.9, 0.45);
        let full = diagonalize(&build_hamiltonian(&p, b)).unwrap();
        let mut merged = Vec::new();
        for parity in [1i8, -1] {
            let block = parity_block(&p, b, parity).unwrap();
            merged.extend(block.eigenvalues_lowest(b.fock_dim()).unwrap());
        }
        merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in full.eigenvalues().iter().zip(&merged) {
            assert_relative_eq!(got, want, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn parity_block_states_alternate() {
        let b = FockSpinBasis::new(4).unwrap();
        let even = parity_block_states(b, 1);
        assert_eq!(even[0], (0, Spin::Up));
        assert_eq!(even[1], (1, Spin::Down));
        assert_eq!(even[2], (2, Spin::Up));
        let odd = parity_block_states(b, -1);
        assert_eq!(odd[0], (0, Spin::Down));
        assert_eq!(odd[1], (1, Spin::Up));
    }

    #[test]
    fn spectrum_invariant_under_coupling_sign_flip() {
        // U -> -U is a unitary conjugation (boson parity), so spectra agree.
        let b = FockSpinBasis::new(30).unwrap();
        let p = params(11.0, 1.0, 0.7);
        let h_plus = build_hamiltonian(&p, b);
        let h_minus = OperatorMatrix::new(b, -h_plus.matrix() + 2.0 * DMatrix::from_diagonal(&h_plus.matrix().diagonal())).unwrap();
        // h_minus flips the sign of every off-diagonal entry of h_plus.
        let s1 = diagonalize(&h_plus).unwrap();
        let s2 = diagonalize(&h_minus).unwrap();
        for (a, b) in s1.eigenvalues().iter().zip(s2.eigenvalues()) {
            assert_relative_eq!(a, b, epsilon = 1e-10, max_relative = 1e-12);
        }
    }

    #[test]
    fn truncation_weight_detects_edge_states() {
        let b = FockSpinBasis::new(60).unwrap();
        let p = params(11.0, 1.0, 0.5);
        let spec = diagonalize(&build_hamiltonian(&p, b)).unwrap();
        // Low-lying states are far from the buffer; the topmost state lives in it.
        assert!(spec.well_resolved(0));
        assert!(spec.well_resolved(10));
        assert!(spec.truncation_weight(spec.len() - 1) > 0.1);
    }

    #[test]
    fn eigenvalue_dump_round_trips() {
        let vals = vec![-5.5, 0.0, 1.25e-7, 3.75e11];
        let mut buf = Vec::new();
        write_eigenvalue_dump(&mut buf, &vals).unwrap();
        assert_eq!(buf.len(), 8 + 8 * vals.len());
        let back = read_eigenvalue_dump(&mut buf.as_slice()).unwrap();
        assert_eq!(back, vals);
    }

    #[test]
    fn basis_mismatch_rejected() {
        let a = build_ladder(FockSpinBasis::new(4).unwrap());
        let b = build_ladder(FockSpinBasis::new(5).unwrap());
        assert!(a.add(&b).is_err());
    }
}
