//! Position-space solver for the separated eigenproblem and the
//! semiclassical dressed-energy integral.
//!
//! In the oscillator coordinate y (X = sqrt(2) y) the spin-diagonal part of
//! the rotated Hamiltonian becomes, per spin branch m = +/- 1/2,
//!
//!   (E + hbar_omega0/2) u = (hbar_omega0/2) (-u'' + y^2 u)
//!                           + m sqrt(delta_e^2 + 8 U^2 y^2) u,
//!
//! discretized with second-order central differences on [-L, L] with
//! Dirichlet walls. Eigenvalues are retrieved by Sturm bisection at a fixed
//! index (= node count), eigenvectors by inverse iteration, and the h^2
//! truncation error is removed by Richardson extrapolation over grids with
//! spacing h, h/2, h/4. That matters: a highly excited level n has local
//! wavenumber ~ sqrt(2n+1), and the raw h^2 error at affordable spacings is
//! of order hbar_omega0 itself.

use std::sync::OnceLock;

use crate::fockspin::Spin;
use crate::model::ModelParams;
use crate::quadrature;
use crate::tridiag::SymTridiagonal;
use crate::{Error, Result};

/// Points per local wavelength of the target level on the coarsest grid.
const POINTS_PER_WAVELENGTH: f64 = 32.0;
/// Floor on the coarse interior point count.
const MIN_COARSE_POINTS: usize = 301;

/// Uniform grid on [-l, l] with `n` interior points; the walls carry the
/// Dirichlet condition and are not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub l: f64,
    pub n: usize,
}

impl Grid {
    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.n as f64 + 1.0)
    }

    pub fn y(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 1.0) * self.h()
    }

    /// Grid with exactly half the spacing (interior count 2n + 1).
    pub fn refined(&self) -> Grid {
        Grid {
            l: self.l,
            n: 2 * self.n + 1,
        }
    }
}

/// A real function sampled on a `Grid`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Domain(format!(
                "sample count {} does not match grid size {}",
                values.len(),
                grid.n
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn y(&self, i: usize) -> f64 {
        self.grid.y(i)
    }

    /// L2 inner product by the trapezoid rule (walls are zero).
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Domain("grid mismatch in inner product".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.h())
    }

    pub fn norm(&self) -> f64 {
        (self
            .values
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            * self.grid.h())
        .sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for v in &mut self.values {
                *v *= inv;
            }
        }
        self
    }

    /// Central-difference derivative; the walls contribute zeros.
    pub fn derivative(&self) -> GridFunction {
        let n = self.len();
        let inv2h = 1.0 / (2.0 * self.grid.h());
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let right = if i + 1 < n { self.values[i + 1] } else { 0.0 };
            let left = if i > 0 { self.values[i - 1] } else { 0.0 };
            *o = (right - left) * inv2h;
        }
        GridFunction {
            grid: self.grid,
            values: out,
        }
    }

    /// Sign changes of the significant part, i.e. the node count.
    pub fn node_count(&self) -> usize {
        let scale = self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let floor = scale * 1e-7;
        let mut count = 0;
        let mut last = 0.0f64;
        for &v in &self.values {
            if v.abs() <= floor {
                continue;
            }
            if last != 0.0 && v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
        count
    }

    /// Largest magnitude at the outermost samples; should be negligible when
    /// the box is large enough.
    pub fn edge_max(&self) -> f64 {
        self.values[0]
            .abs()
            .max(self.values[self.len() - 1].abs())
    }
}

/// Value with the Richardson error estimate that produced it.
#[derive(Debug, Clone, Copy)]
pub struct Extrapolated {
    pub value: f64,
    /// Difference between the two highest-order estimates; an upper bound on
    /// the remaining truncation error in practice.
    pub error: f64,
}

/// Box sizing rule: half-width and coarse interior point count for a problem
/// whose highest level of interest is `n_target`.
///
/// The classical turning point of level n sits at sqrt(2n+1); the box keeps
/// a factor 1.5 beyond it (and at least 5 units of tunnelling margin).
pub fn standard_box(n_target: usize) -> (f64, usize) {
    let eps = 2.0 * n_target as f64 + 1.0;
    let l = (1.5 * eps.sqrt()).max(eps.sqrt() + 5.0);
    let wavelength = 2.0 * std::f64::consts::PI / eps.sqrt();
    let h0 = wavelength / POINTS_PER_WAVELENGTH;
    let n0 = ((2.0 * l / h0).ceil() as usize).max(MIN_COARSE_POINTS);
    (l, n0)
}

/// The separated one-dimensional eigenproblem for one spin branch.
#[derive(Debug, Clone)]
pub struct GridEigenproblem {
    params: ModelParams,
    spin: Spin,
    n_target: usize,
    grids: [Grid; 3],
}

impl GridEigenproblem {
    /// Problem sized by `standard_box(n_target)`.
    pub fn new(params: &ModelParams, spin: Spin, n_target: usize) -> Result<Self> {
        let (l, n0) = standard_box(n_target);
        Self::with_box(params, spin, n_target, l, n0)
    }

    /// Problem with an explicit box; lets two spin branches share grids.
    pub fn with_box(
        params: &ModelParams,
        spin: Spin,
        n_target: usize,
        l: f64,
        n0: usize,
    ) -> Result<Self> {
        let eps = 2.0 * n_target as f64 + 1.0;
        if l < 1.5 * eps.sqrt() {
            return Err(Error::Config(format!(
                "box half-width {l:.3} leaves the turning point sqrt({eps:.0}) = {:.3} \
                 without margin (need >= {:.3})",
                eps.sqrt(),
                1.5 * eps.sqrt()
            )));
        }
        if n0 < 3 {
            return Err(Error::Config("need at least 3 interior points".into()));
        }
        let coarse = Grid { l, n: n0 };
        let medium = coarse.refined();
        let fine = medium.refined();
        Ok(Self {
            params: *params,
            spin,
            n_target,
            grids: [coarse, medium, fine],
        })
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn grids(&self) -> &[Grid; 3] {
        &self.grids
    }

    /// Effective potential of this branch at position y.
    pub fn potential(&self, y: f64) -> f64 {
        let de = self.params.delta_e();
        let u = self.params.coupling_u();
        0.5 * self.params.hbar_omega0() * y * y
            + self.spin.m() * (de * de + 8.0 * u * u * y * y).sqrt()
    }

    fn fd_matrix(&self, grid: Grid) -> SymTridiagonal {
        let h = grid.h();
        let w0 = self.params.hbar_omega0();
        let kin = w0 / (h * h); // (w0/2) * 2/h^2
        let d: Vec<f64> = (0..grid.n).map(|i| kin + self.potential(grid.y(i))).collect();
        let e = vec![-0.5 * w0 / (h * h); grid.n - 1];
        SymTridiagonal::new(d, e).expect("finite by construction")
    }

    /// Raw finite-difference eigenvalue on one of the three grids, already
    /// shifted to the E convention (lambda - hbar_omega0 / 2).
    pub fn energy_on(&self, grid_idx: usize, level: usize) -> Result<f64> {
        let grid = self.grids[grid_idx];
        if level >= grid.n {
            return Err(Error::Domain(format!(
                "level {level} exceeds grid dimension {}",
                grid.n
            )));
        }
        Ok(self.fd_matrix(grid).eigenvalue(level)? - 0.5 * self.params.hbar_omega0())
    }

    /// Richardson-extrapolated energy of `level`.
    pub fn energy(&self, level: usize) -> Result<Extrapolated> {
        if level > self.n_target {
            return Err(Error::Config(format!(
                "level {level} above the box target {}; rebuild with a larger n_target",
                self.n_target
            )));
        }
        let l0 = self.energy_on(0, level)?;
        let l1 = self.energy_on(1, level)?;
        let l2 = self.energy_on(2, level)?;
        let r1a = (4.0 * l1 - l0) / 3.0;
        let r1b = (4.0 * l2 - l1) / 3.0;
        let r2 = (16.0 * r1b - r1a) / 15.0;
        Ok(Extrapolated {
            value: r2,
            error: (r1b - r2).abs(),
        })
    }

    /// Normalized eigenfunction of `level` on grid `grid_idx`.
    pub fn eigenfunction(&self, grid_idx: usize, level: usize) -> Result<GridFunction> {
        let grid = self.grids[grid_idx];
        if level >= grid.n {
            return Err(Error::Domain(format!(
                "level {level} exceeds grid dimension {}",
                grid.n
            )));
        }
        let m = self.fd_matrix(grid);
        let lambda = m.eigenvalue(level)?;
        let v = m.eigenvector(lambda, level as u64)?;
        Ok(GridFunction::new(grid, v)?.normalized())
    }
}

/// Lowest `n_levels` energies (with error estimates) and fine-grid
/// eigenfunctions of one spin branch.
pub fn solve_effective_oscillator(
    params: &ModelParams,
    spin: Spin,
    n_levels: usize,
) -> Result<Vec<(Extrapolated, GridFunction)>> {
    if n_levels == 0 {
        return Err(Error::Config("n_levels must be >= 1".into()));
    }
    let problem = GridEigenproblem::new(params, spin, n_levels - 1)?;
    (0..n_levels)
        .map(|level| Ok((problem.energy(level)?, problem.eigenfunction(2, level)?)))
        .collect()
}

/// Dressed transition energy E_{n,+} - E_{n,-} from the grid solver, with the
/// two branches on a shared box.
pub fn dressed_transition(params: &ModelParams, n: usize) -> Result<Extrapolated> {
    let up = GridEigenproblem::new(params, Spin::Up, n)?;
    let down = GridEigenproblem::new(params, Spin::Down, n)?;
    let eu = up.energy(n)?;
    let ed = down.energy(n)?;
    Ok(Extrapolated {
        value: eu.value - ed.value,
        error: eu.error + ed.error,
    })
}

const WKB_NODES: usize = 200;
const WKB_CHECK_NODES: usize = 100;
const WKB_REL_TOL: f64 = 1e-10;

type GaussRule = (Vec<f64>, Vec<f64>);

fn wkb_rules() -> &'static (GaussRule, GaussRule) {
    static RULES: OnceLock<(GaussRule, GaussRule)> = OnceLock::new();
    RULES.get_or_init(|| {
        (
            quadrature::gauss_legendre(WKB_NODES).expect("fixed rule"),
            quadrature::gauss_legendre(WKB_CHECK_NODES).expect("fixed rule"),
        )
    })
}

/// Semiclassical dressed transition energy at occupation `n` (real-valued)
/// and dimensionless coupling g:
///
///   dE(g) = (delta_e / pi) * Int_{-pi/2}^{pi/2}
///             sqrt(1 + (8 g^2 (2n+1) / n) sin^2 t) dt.
///
/// This is the orbit average of sqrt(delta_e^2 + 8 U^2 y^2) over the harmonic
/// trajectory of energy (n + 1/2) hbar_omega0. At g = 0 it reduces to
/// delta_e identically.
pub fn wkb_dressed_energy(params: &ModelParams, g: f64, n: f64) -> Result<f64> {
    if !(g.is_finite() && g >= 0.0) {
        return Err(Error::Domain(format!("g must be finite and >= 0, got {g}")));
    }
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::Domain(format!("n must be finite and >= 1, got {n}")));
    }
    let eps = 2.0 * n + 1.0;
    let amp = 8.0 * g * g * eps / n;
    let integrand = move |t: f64| {
        let s = t.sin();
        (1.0 + amp * s * s).sqrt()
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let ((x2, w2), (x1, w1)) = wkb_rules();
    let coarse = quadrature::integrate(integrand, -half_pi, half_pi, x1, w1);
    let full = quadrature::integrate(integrand, -half_pi, half_pi, x2, w2);
    let achieved = (full - coarse).abs() / full.abs().max(f64::MIN_POSITIVE);
    if achieved > WKB_REL_TOL {
        return Err(Error::Numeric(format!(
            "dressed-energy quadrature did not settle: relative change {achieved:.3e} \
             between {WKB_CHECK_NODES} and {WKB_NODES} nodes exceeds {WKB_REL_TOL:.1e}"
        )));
    }
    Ok(params.delta_e() / std::f64::consts::PI * full)
}

/// Dressed level energy E_{n,m}(g) = hbar_omega0 n + m dE_wkb(g).
pub fn dressed_level_energy(params: &ModelParams, g: f64, n: usize, spin: Spin) -> Result<f64> {
    let de = wkb_dressed_energy(params, g, n as f64)?;
    Ok(params.hbar_omega0() * n as f64 + spin.m() * de)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(de: f64, u: f64) -> ModelParams {
        ModelParams::new(de, 1.0, u, 60.0).unwrap()
    }

    /// Tanh-sinh quadrature of the untransformed integrand with the
    /// inverse-square-root endpoint singularity; an independent oracle for
    /// the Gauss-Legendre route.
    fn wkb_oracle(de: f64, g: f64, n: f64) -> f64 {
        let eps = 2.0 * n + 1.0;
        let root = eps.sqrt();
        // Int_{-root}^{root} sqrt(1 + 8 g^2 y^2 / n) / sqrt(eps - y^2) dy with
        // the substitution y = root tanh(pi/2 sinh t); then
        // sqrt(eps - y^2) = root / cosh(pi/2 sinh t) exactly, so the summand
        //   sqrt(1 + 8 g^2 y^2 / n) (pi/2) cosh(t) / cosh(pi/2 sinh t)
        // has no endpoint cancellation.
        let h = 5e-3;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let term_at = |t: f64| {
            let sh = half_pi * t.sinh();
            let y = root * sh.tanh();
            let v = (1.0 + 8.0 * g * g * y * y / n).sqrt() * half_pi * t.cosh() / sh.cosh();
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let mut sum = term_at(0.0);
        for k in 1..=4000 {
            let t = k as f64 * h;
            let add = term_at(t) + term_at(-t);
            sum += add;
            if add.abs() < 1e-18 && k > 10 {
                break;
            }
        }
        de / std::f64::consts::PI * sum * h
    }

    #[test]
    fn wkb_reduces_to_delta_e_at_zero_coupling() {
        for de in [5.0, 11.0] {
            for n in [1.0, 30.0, 100.0] {
                let p = params(de, 0.0);
                let v = wkb_dressed_energy(&p, 0.0, n).unwrap();
                assert_relative_eq!(v, de, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn wkb_matches_independent_quadrature() {
        // Same integral via tanh-sinh on the singular form.
        for (g, n) in [(0.1, 60.0), (0.5, 60.0), (1.0, 100.0), (0.3, 20.0)] {
            let p = params(11.0, 0.0);
            let gl = wkb_dressed_energy(&p, g, n).unwrap();
            let ts = wkb_oracle(11.0, g, n);
            assert_relative_eq!(gl, ts, max_relative = 1e-11);
        }
    }

    #[test]
    fn wkb_monotone_in_g() {
        let p = params(11.0, 0.0);
        let mut prev = 0.0;
        for i in 0..20 {
            let g = 0.05 * i as f64;
            let v = wkb_dressed_energy(&p, g, 60.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn wkb_rejects_bad_input() {
        let p = params(11.0, 0.0);
        assert!(wkb_dressed_energy(&p, -0.1, 60.0).is_err());
        assert!(wkb_dressed_energy(&p, 0.1, 0.5).is_err());
        assert!(wkb_dressed_energy(&p, f64::NAN, 60.0).is_err());
    }

    #[test]
    fn harmonic_limit_energies() {
        // U = 0: up branch E_n = n + delta_e/2 exactly.
        let p = params(5.0, 0.0);
        let problem = GridEigenproblem::new(&p, Spin::Up, 20).unwrap();
        for n in [0usize, 3, 11, 20] {
            let e = problem.energy(n).unwrap();
            assert_relative_eq!(e.value, n as f64 + 2.5, epsilon = 2e-8);
            // The estimate is the gap to the lower-order extrapolant and so
            // overstates the true error by orders of magnitude.
            assert!(e.error < 1e-6, "error estimate {:.3e}", e.error);
        }
    }

    #[test]
    fn harmonic_ground_state_is_gaussian() {
        let p = params(5.0, 0.0);
        let problem = GridEigenproblem::new(&p, Spin::Down, 4).unwrap();
        let u = problem.eigenfunction(2, 0).unwrap();
        let mut overlap = 0.0;
        for i in 0..u.len() {
            let y = u.y(i);
            let phi = (-0.5 * y * y).exp() / std::f64::consts::PI.powf(0.25);
            overlap += u.values()[i] * phi;
        }
        overlap *= u.grid().h();
        assert!(overlap.abs() > 1.0 - 1e-6, "overlap {overlap}");
    }

    #[test]
    fn node_counts_match_level_index() {
        let p = params(11.0, 0.9);
        let problem = GridEigenproblem::new(&p, Spin::Down, 12).unwrap();
        for level in [0usize, 1, 5, 12] {
            let u = problem.eigenfunction(1, level).unwrap();
            assert_eq!(u.node_count(), level, "level {level}");
            assert!(u.edge_max() < 1e-8);
        }
    }

    #[test]
    fn eigenfunctions_have_definite_parity() {
        // The potential is even, so u_n(-y) = (-1)^n u_n(y) up to
        // discretization error.
        let p = params(11.0, 0.6);
        let problem = GridEigenproblem::new(&p, Spin::Up, 7).unwrap();
        for level in [0usize, 1, 6, 7] {
            let u = problem.eigenfunction(2, level).unwrap();
            let v = u.values();
            let sign = if level % 2 == 0 { 1.0 } else { -1.0 };
            let worst = (0..v.len())
                .map(|i| (v[i] - sign * v[v.len() - 1 - i]).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-8, "level {level}: parity defect {worst:.3e}");
        }
    }

    #[test]
    fn eigenfunctions_orthonormal() {
        let p = params(11.0, 0.8);
        let problem = GridEigenproblem::new(&p, Spin::Down, 6).unwrap();
        let us: Vec<GridFunction> = (0..=6)
            .map(|l| problem.eigenfunction(2, l).unwrap())
            .collect();
        for a in 0..us.len() {
            for b in a..us.len() {
                let want = if a == b { 1.0 } else { 0.0 };
                let got = us[a].inner(&us[b]).unwrap();
                assert!(
                    (got - want).abs() < 1e-8,
                    "<u{a}|u{b}> = {got}"
                );
            }
        }
    }

    #[test]
    fn grid_transition_matches_wkb_at_large_n() {
        // The two dressed-energy routes agree at the percent level for
        // moderately excited states already.
        let n = 40;
        for g in [0.2, 0.6] {
            let base = params(11.0, 0.0);
            let p = base.at_g(crate::model::DimensionlessCoupling::new(g)).unwrap();
            // n_ref enters the WKB form through g only; evaluate at n.
            let grid = dressed_transition(&p, n).unwrap();
            let g_at_n = p.coupling_u() * (n as f64).sqrt() / p.delta_e();
            let wkb = wkb_dressed_energy(&p, g_at_n, n as f64).unwrap();
            let rel = (grid.value - wkb).abs() / wkb;
            assert!(rel < 0.02, "g = {g}: grid {} vs wkb {wkb}", grid.value);
        }
    }

    #[test]
    fn energy_converges_on_grid_doubling() {
        let p = params(11.0, 0.7);
        let (l, n0) = standard_box(8);
        let a = GridEigenproblem::with_box(&p, Spin::Down, 8, l, n0).unwrap();
        let b = GridEigenproblem::with_box(&p, Spin::Down, 8, l, 2 * n0 + 1).unwrap();
        let ea = a.energy(8).unwrap();
        let eb = b.energy(8).unwrap();
        assert!(
            (ea.value - eb.value).abs() < 1e-7,
            "doubling moved the level by {:.3e}",
            (ea.value - eb.value).abs()
        );
    }

    #[test]
    fn insufficient_box_is_config_error() {
        let p = params(11.0, 0.3);
        let err = GridEigenproblem::with_box(&p, Spin::Up, 50, 5.0, 500).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn derivative_matches_analytic() {
        let grid = Grid { l: 3.0, n: 2999 };
        let vals: Vec<f64> = (0..grid.n)
            .map(|i| {
                let y = grid.y(i);
                // Smooth and wall-vanishing: sin(pi y / 3) * gaussian.
                (std::f64::consts::PI * y / 3.0).sin() * (-y * y).exp()
            })
            .collect();
        let f = GridFunction::new(grid, vals).unwrap();
        let d = f.derivative();
        for i in (100..grid.n - 100).step_by(371) {
            let y = grid.y(i);
            let c = std::f64::consts::PI / 3.0;
            let want = (-y * y).exp() * (c * (c * y).cos() - 2.0 * y * (c * y).sin());
            assert_relative_eq!(d.values()[i], want, epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn dressed_level_energy_combines_terms() {
        let p = params(11.0, 0.0);
        let up = dressed_level_energy(&p, 0.4, 60, Spin::Up).unwrap();
        let down = dressed_level_energy(&p, 0.4, 60, Spin::Down).unwrap();
        let de = wkb_dressed_energy(&p, 0.4, 60.0).unwrap();
        assert_relative_eq!(up - down, de, max_relative = 1e-13);
        assert_relative_eq!(up + down, 2.0 * 60.0, max_relative = 1e-12);
    }
}
