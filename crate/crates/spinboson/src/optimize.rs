//! Scalar root finding and minimization.

use crate::{Error, Result};

/// Brent's method on [a, b]; requires a sign change.
///
/// Returns x with |f(x)| driven to the method's limit and the bracket width
/// below `tol + 4*eps*|x|`.
pub fn brent_root(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut xa, mut xb) = (a, b);
    let (mut fa, mut fb) = (f(xa), f(xb));
    if !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Numeric("root bracket evaluated to non-finite".into()));
    }
    if fa == 0.0 {
        return Ok(xa);
    }
    if fb == 0.0 {
        return Ok(xb);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Domain(format!(
            "no sign change on bracket [{xa}, {xb}]: f = ({fa}, {fb})"
        )));
    }
    let (mut xc, mut fc) = (xa, fa);
    let mut d = xb - xa;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            xc = xa;
            fc = fa;
            d = xb - xa;
            e = d;
        }
        if fc.abs() < fb.abs() {
            xa = xb;
            xb = xc;
            xc = xa;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * xb.abs() + 0.5 * tol;
        let xm = 0.5 * (xc - xb);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(xb);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation (secant when only two points).
            let s = fb / fa;
            let (mut p, mut q);
            if xa == xc {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (xb - xa) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        xa = xb;
        fa = fb;
        if d.abs() > tol1 {
            xb += d;
        } else {
            xb += tol1.copysign(xm);
        }
        fb = f(xb);
        if !fb.is_finite() {
            return Err(Error::Numeric(format!("f({xb}) is non-finite")));
        }
    }
    Err(Error::Numeric("Brent root did not converge in 200 iterations".into()))
}

/// Golden-section minimum of a unimodal `f` on [a, b].
///
/// Stops when the bracket shrinks below `rel_tol` relative to |x| (plus a
/// small absolute floor); returns (x_min, f(x_min)).
pub fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<(f64, f64)> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::Domain(format!("invalid bracket [{a}, {b}]")));
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        let scale = x1.abs().max(x2.abs()).max(1e-300);
        if (hi - lo) <= rel_tol * scale + 1e-300 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::Numeric("objective evaluated to non-finite".into()));
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn brent_finds_cubic_root() {
        // x^3 - 2x - 5 = 0 has the classical root 2.0945514815423265...
        let r = brent_root(|x| x * x * x - 2.0 * x - 5.0, 2.0, 3.0, 1e-14).unwrap();
        assert_relative_eq!(r, 2.094_551_481_542_326_5, max_relative = 1e-13);
    }

    #[test]
    fn brent_rejects_bad_bracket() {
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        // Smooth minima are resolvable to ~sqrt(eps) in x; the kinked gap
        // functions this drives are much sharper.
        let (x, fx) = golden_min(|x| (x - 0.25).powi(2) + 3.0, -1.0, 2.0, 1e-10).unwrap();
        assert_relative_eq!(x, 0.25, epsilon = 1e-7);
        assert_relative_eq!(fx, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn golden_handles_sharp_valley() {
        // |x - 0.6| has a kink at the minimum, like a near-linear avoided
        // crossing gap.
        let (x, _) = golden_min(|x| (x - 0.6).abs(), 0.0, 1.0, 1e-9).unwrap();
        assert_relative_eq!(x, 0.6, epsilon = 1e-8);
    }
}
