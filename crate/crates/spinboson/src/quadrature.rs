//! Fixed-order Gauss-Legendre quadrature.

use crate::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre polynomial from the Chebyshev-based
/// initial guess; converges to machine precision in a handful of steps.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Domain("quadrature order must be >= 1".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots come in +/- pairs; solve for the non-negative half.
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numeric(format!(
                "Gauss-Legendre node {i} of {n} did not converge"
            )));
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Integrate `f` over [a, b] with the given rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let mid = 0.5 * (a + b);
    let len = 0.5 * (b - a);
    let mut sum = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        sum += w * f(mid + len * x);
    }
    sum * len
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_symmetric_and_weights_sum_to_two() {
        for n in [1, 2, 5, 20, 200] {
            let (x, w) = gauss_legendre(n).unwrap();
            assert_eq!(x.len(), n);
            let wsum: f64 = w.iter().sum();
            assert_relative_eq!(wsum, 2.0, max_relative = 1e-14);
            for i in 0..n {
                assert_relative_eq!(x[i], -x[n - 1 - i], epsilon = 1e-15);
                assert_relative_eq!(w[i], w[n - 1 - i], max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn exact_on_polynomials() {
        // n-point rule integrates degree 2n-1 exactly; check n = 5 on x^9.
        let (x, w) = gauss_legendre(5).unwrap();
        let val = integrate(|t| t.powi(9) + 3.0 * t.powi(4), 0.0, 1.0, &x, &w);
        assert_relative_eq!(val, 0.1 + 0.6, max_relative = 1e-14);
    }

    #[test]
    fn known_transcendental_integral() {
        // int_0^pi sin(t) dt = 2, reference value exact.
        let (x, w) = gauss_legendre(40).unwrap();
        let val = integrate(f64::sin, 0.0, std::f64::consts::PI, &x, &w);
        assert_relative_eq!(val, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn gl200_matches_gl100_on_smooth_integrand() {
        // The production rule (200 nodes) against a coarser one on the kind of
        // smooth periodic integrand the dressed-energy integral produces.
        let f = |t: f64| (1.0 + 0.8 * t.sin().powi(2)).sqrt();
        let (x1, w1) = gauss_legendre(100).unwrap();
        let (x2, w2) = gauss_legendre(200).unwrap();
        let a = -std::f64::consts::FRAC_PI_2;
        let b = std::f64::consts::FRAC_PI_2;
        let v1 = integrate(f, a, b, &x1, &w1);
        let v2 = integrate(f, a, b, &x2, &w2);
        assert_relative_eq!(v1, v2, max_relative = 1e-13);
    }
}
