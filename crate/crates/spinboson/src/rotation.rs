//! Position-dependent spin rotation and the separated decomposition.
//!
//! With X = a + a^dag, the rotation generated by the angle
//! theta(x) = atan(2 U x / delta_e) removes the spin-flip coupling at fixed x:
//!
//!   U^T H U = H0 + V + W,
//!   H0 = hbar_omega0 a^dag a + (sigma_z / 2) sqrt(delta_e^2 + 4 U^2 X^2),
//!   V  = (hbar_omega0 / 2) {f(X), a - a^dag} (i sigma_y),
//!   W  = hbar_omega0 f(X)^2,
//!   f(x) = (U / delta_e) / (1 + (2 U x / delta_e)^2).
//!
//! Because the generator is theta(X)/2 (x) (-i sigma_y) and -i sigma_y has the
//! real matrix form [[0, -1], [1, 0]], the whole construction stays in real
//! arithmetic: U is real orthogonal and every term above is real symmetric.
//!
//! Functions of X are evaluated spectrally: X is tridiagonal in the Fock
//! factor, diagonalized once per basis, and g(X) = V g(Lambda) V^T.

use nalgebra::DMatrix;

use crate::fockspin::{spin_blocks, FockSpinBasis, OperatorMatrix, Spin};
use crate::linalg;
use crate::model::ModelParams;
use crate::{Error, Result};

/// Eigendecomposition of the Fock-space position factor X = a + a^dag,
/// reused to evaluate arbitrary scalar functions of X.
#[derive(Debug, Clone)]
pub struct QuadratureCalculus {
    basis: FockSpinBasis,
    x_vals: Vec<f64>,
    x_vecs: DMatrix<f64>,
}

impl QuadratureCalculus {
    pub fn new(basis: FockSpinBasis) -> Result<Self> {
        let x = x_fock_factor(basis);
        let (x_vals, x_vecs) = linalg::symmetric_eigen_sorted(&x)?;
        Ok(Self {
            basis,
            x_vals,
            x_vecs,
        })
    }

    pub fn basis(&self) -> FockSpinBasis {
        self.basis
    }

    /// Spectrum of the truncated X, ascending.
    pub fn x_eigenvalues(&self) -> &[f64] {
        &self.x_vals
    }

    /// g(X) on the Fock factor: V g(Lambda) V^T.
    pub fn fock_function(&self, g: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
        let gv: Vec<f64> = self.x_vals.iter().map(|&x| g(x)).collect();
        if gv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "scalar function is non-finite on the spectrum of X".into(),
            ));
        }
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gv));
        Ok(&self.x_vecs * lam * self.x_vecs.transpose())
    }

    /// ||V Lambda V^T - X||_max over the scale of X.
    pub fn reconstruction_residual(&self) -> f64 {
        let rebuilt = self
            .fock_function(|x| x)
            .expect("identity is finite everywhere");
        let x = x_fock_factor(self.basis);
        linalg::max_abs(&(rebuilt - &x)) / linalg::max_abs(&x).max(1.0)
    }

    /// The truncated X has a spectrum symmetric about zero; the largest
    /// violation of lambda_i = -lambda_{dim-1-i}.
    pub fn pairing_residual(&self) -> f64 {
        let n = self.x_vals.len();
        let scale = self.x_vals[n - 1].abs().max(1.0);
        (0..n)
            .map(|i| (self.x_vals[i] + self.x_vals[n - 1 - i]).abs())
            .fold(0.0f64, f64::max) / scale
    }
}

/// Fock factor of X = a + a^dag: tridiagonal with <n|X|n+1> = sqrt(n+1).
pub fn x_fock_factor(basis: FockSpinBasis) -> DMatrix<f64> {
    let fd = basis.fock_dim();
    let mut x = DMatrix::zeros(fd, fd);
    for n in 0..basis.n_max() {
        let amp = ((n + 1) as f64).sqrt();
        x[(n, n + 1)] = amp;
        x[(n + 1, n)] = amp;
    }
    x
}

/// Fock factor of a - a^dag (antisymmetric).
pub fn d_fock_factor(basis: FockSpinBasis) -> DMatrix<f64> {
    let fd = basis.fock_dim();
    let mut d = DMatrix::zeros(fd, fd);
    for n in 0..basis.n_max() {
        let amp = ((n + 1) as f64).sqrt();
        d[(n, n + 1)] = amp;
        d[(n + 1, n)] = -amp;
    }
    d
}

/// Rotation angle theta(x) = atan(2 U x / delta_e).
pub fn rotation_angle(params: &ModelParams) -> impl Fn(f64) -> f64 {
    let ratio = 2.0 * params.coupling_u() / params.delta_e();
    move |x| (ratio * x).atan()
}

/// f(x) = (U / delta_e) / (1 + (2 U x / delta_e)^2) = theta'(x) / 2.
pub fn coupling_bracket(params: &ModelParams) -> impl Fn(f64) -> f64 {
    let u_over_de = params.coupling_u() / params.delta_e();
    move |x| {
        let t = 2.0 * u_over_de * x;
        u_over_de / (1.0 + t * t)
    }
}

/// f'(x), in closed form.
pub fn coupling_bracket_derivative(params: &ModelParams) -> impl Fn(f64) -> f64 {
    let u_over_de = params.coupling_u() / params.delta_e();
    move |x| {
        let t = 2.0 * u_over_de * x;
        let denom = 1.0 + t * t;
        -u_over_de * (2.0 * t * (2.0 * u_over_de)) / (denom * denom)
    }
}

/// The dressed level spacing at fixed x: sqrt(delta_e^2 + 4 U^2 x^2).
pub fn dressed_spacing(params: &ModelParams) -> impl Fn(f64) -> f64 {
    let de = params.delta_e();
    let u = params.coupling_u();
    move |x| (de * de + 4.0 * u * u * x * x).sqrt()
}

/// Scalar function of the full two-spin X operator: g(X) (x) I_2.
pub fn apply_scalar_function(
    calc: &QuadratureCalculus,
    g: impl Fn(f64) -> f64,
) -> Result<OperatorMatrix> {
    let fock = calc.fock_function(g)?;
    OperatorMatrix::new(calc.basis(), linalg::spin_kron(&fock, &spin_blocks::identity()))
}

/// The real orthogonal rotation U = cos(theta(X)/2) (x) I + sin(theta(X)/2) (x) J,
/// J = -i sigma_y = [[0, -1], [1, 0]].
pub fn build_unitary(params: &ModelParams, calc: &QuadratureCalculus) -> Result<OperatorMatrix> {
    let theta = rotation_angle(params);
    let c = calc.fock_function(|x| (theta(x) / 2.0).cos())?;
    let s = calc.fock_function(|x| (theta(x) / 2.0).sin())?;
    let j = -spin_blocks::i_sigma_y();
    let mat = linalg::spin_kron(&c, &spin_blocks::identity()) + linalg::spin_kron(&s, &j);
    OperatorMatrix::new(calc.basis(), mat)
}

/// ||U^T U - I||_max.
pub fn orthogonality_residual(u: &OperatorMatrix) -> f64 {
    linalg::orthonormality_residual(u.matrix())
}

/// Largest `||U^T U - 1||_max` accepted before using a rotation.
pub const ROTATION_ORTHOGONALITY_TOL: f64 = 1e-9;

/// U^T H U after checking that U is orthogonal to 1e-9.
pub fn rotate_hamiltonian(h: &OperatorMatrix, u: &OperatorMatrix) -> Result<OperatorMatrix> {
    let res = orthogonality_residual(u);
    if res > ROTATION_ORTHOGONALITY_TOL {
        return Err(Error::Numeric(format!(
            "rotation is not orthogonal: residual {res:.3e} exceeds {ROTATION_ORTHOGONALITY_TOL:.1e}"
        )));
    }
    h.conjugate_by(u)
}

/// Separated part H0 = hbar_omega0 a^dag a + (sigma_z / 2) sqrt(delta_e^2 + 4 U^2 X^2).
pub fn build_h0(params: &ModelParams, calc: &QuadratureCalculus) -> Result<OperatorMatrix> {
    let basis = calc.basis();
    let spacing = calc.fock_function(dressed_spacing(params))?;
    let fd = basis.fock_dim();
    let number = DMatrix::from_fn(fd, fd, |i, j| if i == j { i as f64 } else { 0.0 });
    let mat = params.hbar_omega0() * linalg::spin_kron(&number, &spin_blocks::identity())
        + 0.5 * linalg::spin_kron(&spacing, &spin_blocks::sigma_z());
    OperatorMatrix::new(basis, mat)
}

/// One spin block of H0 on the Fock factor:
/// hbar_omega0 diag(n) + m sqrt(delta_e^2 + 4 U^2 X^2) / 1, with m = +/- 1/2.
pub fn h0_spin_block(
    params: &ModelParams,
    calc: &QuadratureCalculus,
    spin: Spin,
) -> Result<DMatrix<f64>> {
    let mut block = calc.fock_function(dressed_spacing(params))? * spin.m();
    for n in 0..calc.basis().fock_dim() {
        block[(n, n)] += params.hbar_omega0() * n as f64;
    }
    Ok(block)
}

/// Fock factor of the residual coupling: B = f(X) (a - a^dag) + (a - a^dag) f(X).
pub fn v_fock_factor(params: &ModelParams, calc: &QuadratureCalculus) -> Result<DMatrix<f64>> {
    let f = calc.fock_function(coupling_bracket(params))?;
    let d = d_fock_factor(calc.basis());
    Ok(&f * &d + &d * &f)
}

/// Residual coupling V = (hbar_omega0 / 2) {f(X), a - a^dag} (x) (i sigma_y).
pub fn build_v(params: &ModelParams, calc: &QuadratureCalculus) -> Result<OperatorMatrix> {
    let b = v_fock_factor(params, calc)?;
    let mat = 0.5 * params.hbar_omega0() * linalg::spin_kron(&b, &spin_blocks::i_sigma_y());
    OperatorMatrix::new(calc.basis(), mat)
}

/// Scalar correction W = hbar_omega0 f(X)^2.
pub fn build_w(params: &ModelParams, calc: &QuadratureCalculus) -> Result<OperatorMatrix> {
    let f = coupling_bracket(params);
    let w = calc.fock_function(|x| {
        let v = f(x);
        v * v
    })?;
    let mat = params.hbar_omega0() * linalg::spin_kron(&w, &spin_blocks::identity());
    OperatorMatrix::new(calc.basis(), mat)
}

/// Largest |A - B| entry over the interior block: both row and column restricted
/// to Fock levels n <= fraction * n_max (any spin).
pub fn interior_max_abs_diff(a: &OperatorMatrix, b: &OperatorMatrix, fraction: f64) -> Result<f64> {
    a.same_basis(b)?;
    let basis = a.basis();
    let n_cut = (fraction * basis.n_max() as f64).floor() as usize;
    let limit = basis.index(n_cut, Spin::Down);
    let ma = a.matrix();
    let mb = b.matrix();
    let mut worst = 0.0f64;
    for j in 0..=limit {
        for i in 0..=limit {
            worst = worst.max((ma[(i, j)] - mb[(i, j)]).abs());
        }
    }
    Ok(worst)
}
