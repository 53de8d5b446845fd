//! Model parameters and the dimensionless coupling.
//!
//! The system is a two-level splitting `delta_e` coupled with strength
//! `coupling_u` to one boson mode of quantum `hbar_omega0`. Sweeps are
//! expressed through the dimensionless coupling g = U * sqrt(n_ref) / delta_e,
//! where `n_ref` is the reference boson occupation of the band under study.

use crate::{Error, Result};

/// Physical parameters of the spin-boson problem.
///
/// All energies are in the same (arbitrary) unit; `hbar_omega0` is the boson
/// quantum in that unit, so frequencies never appear separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    delta_e: f64,
    hbar_omega0: f64,
    coupling_u: f64,
    n_ref: f64,
}

impl ModelParams {
    /// Validates: `delta_e > 0`, `hbar_omega0 > 0`, `coupling_u >= 0`,
    /// `n_ref >= 1`, all finite.
    pub fn new(delta_e: f64, hbar_omega0: f64, coupling_u: f64, n_ref: f64) -> Result<Self> {
        let all_finite = delta_e.is_finite()
            && hbar_omega0.is_finite()
            && coupling_u.is_finite()
            && n_ref.is_finite();
        if !all_finite {
            return Err(Error::Config("model parameters must be finite".into()));
        }
        if delta_e <= 0.0 {
            return Err(Error::Config(format!("delta_e must be > 0, got {delta_e}")));
        }
        if hbar_omega0 <= 0.0 {
            return Err(Error::Config(format!(
                "hbar_omega0 must be > 0, got {hbar_omega0}"
            )));
        }
        if coupling_u < 0.0 {
            return Err(Error::Config(format!(
                "coupling_u must be >= 0, got {coupling_u}"
            )));
        }
        if n_ref < 1.0 {
            return Err(Error::Config(format!("n_ref must be >= 1, got {n_ref}")));
        }
        Ok(Self {
            delta_e,
            hbar_omega0,
            coupling_u,
            n_ref,
        })
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e
    }

    pub fn hbar_omega0(&self) -> f64 {
        self.hbar_omega0
    }

    pub fn coupling_u(&self) -> f64 {
        self.coupling_u
    }

    pub fn n_ref(&self) -> f64 {
        self.n_ref
    }

    /// Same parameters with a different coupling.
    pub fn with_coupling(&self, coupling_u: f64) -> Result<Self> {
        Self::new(self.delta_e, self.hbar_omega0, coupling_u, self.n_ref)
    }

    /// g = U * sqrt(n_ref) / delta_e.
    pub fn derive_g(&self) -> DimensionlessCoupling {
        DimensionlessCoupling(self.coupling_u * self.n_ref.sqrt() / self.delta_e)
    }

    /// Coupling U that realizes the given g at these `delta_e`, `n_ref`.
    pub fn coupling_for_g(&self, g: DimensionlessCoupling) -> Result<f64> {
        if !g.value().is_finite() || g.value() < 0.0 {
            return Err(Error::Domain(format!(
                "dimensionless coupling must be finite and >= 0, got {}",
                g.value()
            )));
        }
        Ok(g.value() * self.delta_e / self.n_ref.sqrt())
    }

    /// Same parameters with the coupling set so `derive_g` returns `g`.
    pub fn at_g(&self, g: DimensionlessCoupling) -> Result<Self> {
        self.with_coupling(self.coupling_for_g(g)?)
    }

    /// True when the separation of scales the analysis assumes holds:
    /// `delta_e / hbar_omega0 >= 5` and `n_ref >= 20`.
    pub fn regime_ok(&self) -> bool {
        self.delta_e / self.hbar_omega0 >= 5.0 && self.n_ref >= 20.0
    }

    /// Human-readable warning when outside the intended regime.
    pub fn regime_warning(&self) -> Option<String> {
        if self.regime_ok() {
            return None;
        }
        Some(format!(
            "outside intended regime: delta_e/hbar_omega0 = {:.3} (want >= 5), n_ref = {:.3} (want >= 20); \
             results are still exact for the truncated model but the asymptotic formulas degrade",
            self.delta_e / self.hbar_omega0,
            self.n_ref
        ))
    }
}

/// Dimensionless coupling g = U * sqrt(n_ref) / delta_e.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DimensionlessCoupling(f64);

impl DimensionlessCoupling {
    pub fn new(g: f64) -> Self {
        Self(g)
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn g_matches_hand_value() {
        // U = 1, n_ref = 100, delta_e = 11 -> g = 1 * 10 / 11.
        let p = ModelParams::new(11.0, 1.0, 1.0, 100.0).unwrap();
        assert_relative_eq!(p.derive_g().value(), 10.0 / 11.0, max_relative = 1e-15);
    }

    #[test]
    fn g_round_trip() {
        let p = ModelParams::new(11.0, 1.0, 0.7, 60.0).unwrap();
        let g = p.derive_g();
        let u = p.coupling_for_g(g).unwrap();
        assert_relative_eq!(u, 0.7, max_relative = 1e-14);

        let q = p.at_g(DimensionlessCoupling::new(0.3)).unwrap();
        assert_relative_eq!(q.derive_g().value(), 0.3, max_relative = 1e-14);
    }

    #[test]
    fn g_scales_linearly_in_u() {
        let p = ModelParams::new(7.0, 0.5, 0.2, 30.0).unwrap();
        let q = p.with_coupling(0.6).unwrap();
        assert_relative_eq!(
            q.derive_g().value(),
            3.0 * p.derive_g().value(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(0.0, 1.0, 0.1, 60.0).is_err());
        assert!(ModelParams::new(11.0, -1.0, 0.1, 60.0).is_err());
        assert!(ModelParams::new(11.0, 1.0, -0.1, 60.0).is_err());
        assert!(ModelParams::new(11.0, 1.0, 0.1, 0.5).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0, 0.1, 60.0).is_err());
    }

    #[test]
    fn regime_warnings_not_errors() {
        let ok = ModelParams::new(11.0, 1.0, 0.1, 60.0).unwrap();
        assert!(ok.regime_ok());
        assert!(ok.regime_warning().is_none());

        let shallow = ModelParams::new(3.0, 1.0, 0.1, 60.0).unwrap();
        assert!(!shallow.regime_ok());
        assert!(shallow.regime_warning().is_some());

        let sparse = ModelParams::new(11.0, 1.0, 0.1, 5.0).unwrap();
        assert!(!sparse.regime_ok());
    }
}
