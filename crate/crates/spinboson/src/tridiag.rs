//! Symmetric tridiagonal eigenproblems: Sturm-sequence bisection for
//! eigenvalues by index and inverse iteration for eigenvectors.
//!
//! Bisection retrieves the k-th eigenvalue (ascending) without computing the
//! rest, which is what the finite-difference solver needs when it targets a
//! single highly excited level on a grid with thousands of points.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    /// Diagonal, length n.
    pub d: Vec<f64>,
    /// Off-diagonal, length n - 1.
    pub e: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Domain("empty tridiagonal matrix".into()));
        }
        if e.len() + 1 != d.len() {
            return Err(Error::Domain(format!(
                "off-diagonal length {} does not match dimension {}",
                e.len(),
                d.len()
            )));
        }
        if d.iter().chain(e.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        Ok(Self { d, e })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Interval guaranteed to contain the whole spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.e[i - 1].abs();
            }
            if i + 1 < n {
                r += self.e[i].abs();
            }
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let scale = self
            .d
            .iter()
            .chain(self.e.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
            .max(1.0);
        f64::EPSILON * scale * 1e-3
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via the LDL^T
    /// pivot recurrence).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.d[0] - x;
        for i in 0..self.dim() {
            if i > 0 {
                if q == 0.0 {
                    q = -pivmin;
                }
                q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / q;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// k-th eigenvalue in ascending order (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        let n = self.dim();
        if k >= n {
            return Err(Error::Domain(format!(
                "eigenvalue index {k} out of range for dimension {n}"
            )));
        }
        let (mut lo, mut hi) = self.gershgorin_bounds();
        // Widen marginally so the count invariants hold at the endpoints.
        let pad = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Lowest `count` eigenvalues, ascending.
    pub fn eigenvalues_lowest(&self, count: usize) -> Result<Vec<f64>> {
        (0..count).map(|k| self.eigenvalue(k)).collect()
    }

    /// Eigenvector for an eigenvalue estimate `lambda` by inverse iteration.
    ///
    /// `seed` varies the deterministic start vector; pass the eigenvalue index
    /// so distinct levels never share a start. Returns a unit vector.
    pub fn eigenvector(&self, lambda: f64, seed: u64) -> Result<Vec<f64>> {
        let n = self.dim();
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let lu = self.factor_shifted(lambda);
        // Deterministic pseudo-random start (splitmix64), no external RNG.
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        let mut next = move || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z as f64 / u64::MAX as f64) - 0.5
        };
        let mut v: Vec<f64> = (0..n).map(|_| next()).collect();
        normalize(&mut v);
        let growth_target = 1.0 / (1e3 * f64::EPSILON);
        for _ in 0..5 {
            let x = lu.solve(&v);
            let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Numeric(
                    "inverse iteration produced a degenerate vector".into(),
                ));
            }
            v = x;
            let inv = 1.0 / norm;
            for t in &mut v {
                *t *= inv;
            }
            if norm > growth_target {
                break;
            }
        }
        // Fix an overall sign deterministically: largest-|component| positive,
        // ties broken by the first such index.
        let mut idx = 0;
        let mut best = 0.0;
        for (i, &t) in v.iter().enumerate() {
            if t.abs() > best {
                best = t.abs();
                idx = i;
            }
        }
        if v[idx] < 0.0 {
            for t in &mut v {
                *t = -*t;
            }
        }
        Ok(v)
    }

    /// y = A x.
    pub fn multiply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.d[i] * x[i];
            if i > 0 {
                s += self.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.e[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// ||A v - lambda v||_2 for a unit vector `v`.
    pub fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        self.multiply(v)
            .iter()
            .zip(v)
            .map(|(av, vi)| (av - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// LU factorization of A - lambda I with partial pivoting.
    fn factor_shifted(&self, lambda: f64) -> TridiagLu {
        let n = self.dim();
        let pivmin = self.pivmin();
        let mut dl: Vec<f64> = self.e.clone();
        let mut dd: Vec<f64> = self.d.iter().map(|&x| x - lambda).collect();
        let mut du: Vec<f64> = self.e.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n - 1];
        for i in 0..n - 1 {
            if dd[i].abs() >= dl[i].abs() {
                if dd[i] == 0.0 {
                    dd[i] = pivmin;
                }
                let m = dl[i] / dd[i];
                dl[i] = m;
                dd[i + 1] -= m * du[i];
            } else {
                let m = dd[i] / dl[i];
                dd[i] = dl[i];
                dl[i] = m;
                let t = du[i];
                du[i] = dd[i + 1];
                dd[i + 1] = t - m * dd[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -m;
                }
                swapped[i] = true;
            }
        }
        if dd[n - 1] == 0.0 {
            dd[n - 1] = pivmin;
        }
        TridiagLu {
            dl,
            dd,
            du,
            du2,
            swapped,
        }
    }
}

struct TridiagLu {
    dl: Vec<f64>,
    dd: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dd.len();
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let t = x[i];
                x[i] = x[i + 1];
                x[i + 1] = t - self.dl[i] * x[i];
            } else {
                x[i + 1] -= self.dl[i] * x[i];
            }
        }
        x[n - 1] /= self.dd[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.dd[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.dd[i];
        }
        x
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm > 0.0 {
        let inv = 1.0 / norm;
        for t in v {
            *t *= inv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Free-particle Laplacian on n points: eigenvalues 2 - 2 cos(k pi/(n+1)).
    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn sturm_count_matches_analytic_spectrum() {
        let a = laplacian(50);
        // 17 eigenvalues below the 17th analytic value (strictly).
        let lambda17 = 2.0 - 2.0 * (17.5 * std::f64::consts::PI / 51.0).cos();
        assert_eq!(a.count_below(lambda17), 17);
        assert_eq!(a.count_below(-1.0), 0);
        assert_eq!(a.count_below(5.0), 50);
    }

    #[test]
    fn bisection_matches_analytic_eigenvalues() {
        let n = 120;
        let a = laplacian(n);
        for k in [0usize, 1, 5, 60, 119] {
            let exact = 2.0 - 2.0 * ((k as f64 + 1.0) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            let lam = a.eigenvalue(k).unwrap();
            assert_relative_eq!(lam, exact, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn eigenvalues_sorted_and_complete() {
        let a = SymTridiagonal::new(vec![3.0, -1.0, 4.0, 1.0, 5.0], vec![0.9, 2.6, 0.5, 3.5]).unwrap();
        let vals = a.eigenvalues_lowest(5).unwrap();
        for w in vals.windows(2) {
            assert!(w[0] <= w[1]);
        }
        // Trace is preserved by the spectrum.
        let trace: f64 = vals.iter().sum();
        assert_relative_eq!(trace, 3.0 - 1.0 + 4.0 + 1.0 + 5.0, epsilon = 1e-10);
    }

    #[test]
    fn inverse_iteration_residual_small() {
        let n = 400;
        let a = laplacian(n);
        for k in [0usize, 37, 399] {
            let lam = a.eigenvalue(k).unwrap();
            let v = a.eigenvector(lam, k as u64).unwrap();
            let norm: f64 = v.iter().map(|t| t * t).sum::<f64>();
            assert_relative_eq!(norm, 1.0, max_relative = 1e-12);
            assert!(a.residual(lam, &v) < 1e-11, "residual {}", a.residual(lam, &v));
        }
    }

    #[test]
    fn eigenvector_sign_deterministic() {
        let a = laplacian(31);
        let lam = a.eigenvalue(4).unwrap();
        let v1 = a.eigenvector(lam, 4).unwrap();
        let v2 = a.eigenvector(lam, 4).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let a = laplacian(5);
        assert!(a.eigenvalue(5).is_err());
    }
}
