//! Initial single-mode moments of the atom-beam operator â₀ and the probe operator b̂₀.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Normally ordered moments of one bosonic mode up to fourth order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMoments<T: Real> {
    /// ⟨â⟩
    pub mean: Complex<T>,
    /// ⟨â†â⟩
    pub n: T,
    /// ⟨â²⟩
    pub sq: Complex<T>,
    /// ⟨â†â†ââ⟩
    pub g4: T,
}

impl<T: Real> ModeMoments<T> {
    pub fn vacuum() -> Self {
        Self {
            mean: Complex::new(T::zero(), T::zero()),
            n: T::zero(),
            sq: Complex::new(T::zero(), T::zero()),
            g4: T::zero(),
        }
    }

    /// Coherent state with real positive amplitude √n.
    pub fn coherent(n: T) -> Self {
        let alpha = Complex::new(n.max(T::zero()).sqrt(), T::zero());
        Self {
            mean: alpha,
            n,
            sq: alpha * alpha,
            g4: n * n,
        }
    }

    /// Thermal state of mean occupation `n`.
    pub fn thermal(n: T) -> Self {
        Self {
            mean: Complex::new(T::zero(), T::zero()),
            n,
            sq: Complex::new(T::zero(), T::zero()),
            g4: lit::<T>(2.0) * n * n,
        }
    }

    /// ⟨Δâ†Δâ⟩ = n − |⟨â⟩|².
    pub fn incoherent_number(&self) -> T {
        self.n - self.mean.norm_sqr()
    }

    /// ⟨ΔâΔâ⟩ = ⟨â²⟩ − ⟨â⟩².
    pub fn anomalous(&self) -> Complex<T> {
        self.sq - self.mean * self.mean
    }

    /// Variance of `â e^{-iθ} + â† e^{iθ}`.
    pub fn quadrature_variance(&self, theta: T) -> T {
        let rot = Complex::new(T::zero(), -lit::<T>(2.0) * theta).exp();
        T::one() + lit::<T>(2.0) * (self.incoherent_number() + (rot * self.anomalous()).re)
    }

    /// Checks n ≥ |mean|², g4 ≥ 0 and V(X⁺)V(X⁻) ≥ 1 (to `1e-9` relative).
    pub fn is_physical(&self) -> bool {
        let tol = lit::<T>(1e-9);
        let nbar = self.incoherent_number();
        if nbar < -tol * self.n.max(T::one()) || self.g4 < T::zero() {
            return false;
        }
        // V(θ)V(θ+π/2) is smallest on the principal axes, where it equals
        // (1 + 2N)² − 4|M|².
        let one_plus = T::one() + lit::<T>(2.0) * nbar;
        let m = self.anomalous().norm();
        one_plus * one_plus - lit::<T>(4.0) * m * m >= T::one() - tol * one_plus * one_plus
    }
}

/// Moments of both input modes; the modes are uncorrelated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InputMoments<T: Real> {
    pub a: ModeMoments<T>,
    pub b: ModeMoments<T>,
}

impl<T: Real> InputMoments<T> {
    pub fn new(a: ModeMoments<T>, b: ModeMoments<T>) -> Result<Self> {
        let zero = |m: &ModeMoments<T>| m.mean.norm() == T::zero();
        if !zero(&a) && !zero(&b) {
            return Err(Error::InfeasibleState(
                "at most one of <a0>, <b0> may be non-zero".into(),
            ));
        }
        if !a.is_physical() || !b.is_physical() {
            return Err(Error::InfeasibleState(
                "input moments violate the uncertainty relation".into(),
            ));
        }
        Ok(Self { a, b })
    }

    /// ⟨â₀†b̂₀⟩ for uncorrelated inputs.
    pub fn cross(&self) -> Complex<T> {
        self.a.mean.conj() * self.b.mean
    }
}

/// Squeezing parameter r for a quadrature variance of `db` decibels below vacuum.
pub fn squeezing_db_to_r<T: Real>(db: T) -> T {
    db * lit::<T>(10.0).ln() / lit::<T>(20.0)
}

/// Moments of a displaced squeezed state with mean occupation `n0`.
///
/// With `theta_sq = 0` the state is squeezed in X⁺: V(X^±) = e^{∓2r}. The displacement is real
/// and positive with |⟨â⟩|² = n0 − sinh²r.
pub fn make_squeezed_input_moments<T: Real>(r: T, n0: T, theta_sq: T) -> Result<ModeMoments<T>> {
    if !r.is_finite() || r < T::zero() || !n0.is_finite() {
        return Err(Error::invalid(
            "r",
            "squeezing must be finite and non-negative",
        ));
    }
    let sh = r.sinh();
    let ch = r.cosh();
    let thermal_part = sh * sh;
    // Relative slack so that n0 = sinh²r (pure squeezed vacuum) is accepted.
    let slack = lit::<T>(1e-12) * thermal_part.max(T::one());
    if n0 + slack < thermal_part {
        return Err(Error::InfeasibleState(format!(
            "mean number {n0} is below sinh^2(r) = {thermal_part}"
        )));
    }
    let alpha2 = (n0 - thermal_part).max(T::zero());
    let alpha = Complex::new(alpha2.sqrt(), T::zero());
    let anomalous = -Complex::new(T::zero(), theta_sq).exp() * (sh * ch);
    let nbar = thermal_part;
    let two = lit::<T>(2.0);
    let g4 = alpha2 * alpha2
        + lit::<T>(4.0) * alpha2 * nbar
        + two * (alpha.conj() * alpha.conj() * anomalous).re
        + two * nbar * nbar
        + anomalous.norm_sqr();
    Ok(ModeMoments {
        mean: alpha,
        n: n0,
        sq: alpha * alpha + anomalous,
        g4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_from_zero_squeezing() {
        let m = make_squeezed_input_moments(0.0, 0.0, 0.0).unwrap();
        assert_eq!(m, ModeMoments::vacuum());
        assert_eq!(m.quadrature_variance(0.0), 1.0);
        assert_eq!(m.quadrature_variance(std::f64::consts::FRAC_PI_2), 1.0);
    }

    #[test]
    fn four_db_variances() {
        let r = squeezing_db_to_r(4.0_f64);
        assert!((r - 0.4605).abs() < 1e-4);
        let m = make_squeezed_input_moments(r, 5e3, 0.0).unwrap();
        assert!((m.quadrature_variance(0.0) - 0.398).abs() < 5e-4);
        assert!((m.quadrature_variance(std::f64::consts::FRAC_PI_2) - 2.512).abs() < 5e-4);
        assert!(m.is_physical());
    }

    #[test]
    fn coherent_limit_has_poisson_g4() {
        let m = make_squeezed_input_moments(0.0, 5e3, 0.0).unwrap();
        assert_eq!(m.g4, 5e3 * 5e3);
        assert_eq!(m, ModeMoments::coherent(5e3));
    }

    #[test]
    fn infeasible_number() {
        assert!(matches!(
            make_squeezed_input_moments(1.0, 0.5, 0.0),
            Err(Error::InfeasibleState(_))
        ));
    }

    #[test]
    fn only_one_mean_may_be_nonzero() {
        let c = ModeMoments::coherent(2.0);
        assert!(InputMoments::new(c, c).is_err());
        assert!(InputMoments::new(c, ModeMoments::vacuum()).is_ok());
    }

    #[test]
    fn unphysical_moments_detected() {
        let mut m = ModeMoments::<f64>::vacuum();
        m.sq = Complex::new(0.6, 0.0);
        assert!(!m.is_physical());
        assert!(ModeMoments::thermal(3.0).is_physical());
    }
}
