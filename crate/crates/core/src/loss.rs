//! Post-hoc degradation estimates: spontaneous emission from the excited level and the
//! beam-splitter model of the resulting loss.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::observables::QuadratureResult;
use crate::params::{ModelParams, PhysicalConstants};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossEstimate<T: Real> {
    pub gamma_sp: T,
    /// ∫dt∫dx ⟨ψ₃†ψ₃⟩ over the interaction window (atom·s).
    pub excited_population_integral: T,
    /// γ_sp times the excited-population integral.
    pub l_sp: T,
    /// γ_sp·N̄₃·T_Rabi/4 with N̄₃ = N₂(Ω₂₃/Δ)².
    pub l_sp_bound: T,
    /// l_sp_bound / N₂, the loss fraction fed to the beam-splitter model.
    pub loss_fraction: T,
    /// l_sp / N₂ from the integrated population.
    pub loss_fraction_integral: T,
}

/// γ_sp = k₀³|d₁₃|²/(3πℏε₀).
pub fn spontaneous_rate_from<T: Real>(k0: T, d13: T, consts: &PhysicalConstants<T>) -> T {
    k0 * k0 * k0 * d13 * d13 / (lit::<T>(3.0) * T::PI() * consts.hbar * consts.epsilon0)
}

pub fn spontaneous_rate<T: Real>(
    params: &ModelParams<T>,
    consts: &PhysicalConstants<T>,
) -> Result<T> {
    let d = params
        .d13
        .ok_or_else(|| Error::Config("d13 is required for the spontaneous emission rate".into()))?;
    Ok(spontaneous_rate_from(params.k0, d, consts))
}

/// Accumulates the excited-state population over a run.
///
/// The adiabatically eliminated excited amplitude is `−(Ω₂₃/Δ)ψ − (g₁₃/Δ)Ẽφ`; the beam term is
/// always included, the probe term only on request.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ExcitedPopulation<T: Real> {
    /// ∫dt∫_window n_beam dx (atom·s).
    pub beam_term: T,
    /// ∫dt∫_window |φ|²⟨Ê†Ê⟩ dx (atom·photon·s/m).
    pub probe_term: T,
}

impl<T: Real> ExcitedPopulation<T> {
    pub fn accumulate(&mut self, beam_atoms_in_window: T, probe_weighted: T, dt: T) {
        self.beam_term += beam_atoms_in_window * dt;
        self.probe_term += probe_weighted * dt;
    }
}

pub fn spontaneous_loss<T: Real>(
    population: &ExcitedPopulation<T>,
    n_beam: T,
    t_rabi: T,
    params: &ModelParams<T>,
    consts: &PhysicalConstants<T>,
    include_probe_term: bool,
) -> Result<LossEstimate<T>> {
    let gamma_sp = spontaneous_rate(params, consts)?;
    let ratio = params.mixing_ratio()?;
    let mut excited = ratio * ratio * population.beam_term;
    if include_probe_term {
        let g = params.g13 / params.delta;
        excited += g * g * population.probe_term;
    }
    let l_sp = gamma_sp * excited;
    let n3 = n_beam * ratio * ratio;
    let l_sp_bound = gamma_sp * n3 * t_rabi / lit::<T>(4.0);
    let frac = |v: T| {
        if n_beam > T::zero() {
            v / n_beam
        } else {
            T::zero()
        }
    };
    Ok(LossEstimate {
        gamma_sp,
        excited_population_integral: excited,
        l_sp,
        l_sp_bound,
        loss_fraction: frac(l_sp_bound).min(T::one()),
        loss_fraction_integral: frac(l_sp).min(T::one()),
    })
}

/// `V → (1 − η)V + η` on both quadratures.
pub fn apply_beam_splitter_loss<T: Real>(
    quad: &QuadratureResult<T>,
    eta: T,
) -> Result<QuadratureResult<T>> {
    if !(eta >= T::zero() && eta <= T::one()) {
        return Err(Error::invalid(
            "eta",
            format!("must lie in [0, 1], got {eta}"),
        ));
    }
    let map = |v: T| (T::one() - eta) * v + eta;
    let v_plus = map(quad.v_plus);
    let v_minus = map(quad.v_minus);
    Ok(QuadratureResult {
        v_plus,
        v_minus,
        uncertainty_product: v_plus * v_minus,
        mode_overlap_a: quad.mode_overlap_a * (T::one() - eta),
        mode_overlap_b: quad.mode_overlap_b * (T::one() - eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RB87_D2_DIPOLE;

    fn params() -> ModelParams<f64> {
        ModelParams {
            k0: 8e6,
            delta: 1e10,
            omega23: 1e7,
            g13: 1.0,
            d13: Some(RB87_D2_DIPOLE),
            trap_omega: 31.4,
            n_condensate: 1e6,
            two_photon_detuning: 0.0,
        }
    }

    #[test]
    fn rate_trivial_and_scaling() {
        let c = PhysicalConstants::rubidium87();
        let mut p = params();
        p.d13 = Some(0.0);
        assert_eq!(spontaneous_rate(&p, &c).unwrap(), 0.0);
        let g1 = spontaneous_rate(&params(), &c).unwrap();
        let mut q = params();
        q.k0 *= 2.0;
        let g2 = spontaneous_rate(&q, &c).unwrap();
        assert!((g2 / g1 - 8.0).abs() < 1e-12);
        p.d13 = None;
        assert!(matches!(spontaneous_rate(&p, &c), Err(Error::Config(_))));
    }

    #[test]
    fn rubidium_rate_hand_value() {
        // (8e6)^3 * (3.58e-29)^2 / (3π * 1.054571817e-34 * 8.8541878128e-12)
        //   = 5.12e20 * 1.28164e-57 / 8.80102e-45 = 7.4566e7 s^-1
        let g = spontaneous_rate(&params(), &PhysicalConstants::rubidium87()).unwrap();
        assert!((g - 7.4566e7).abs() / 7.4566e7 < 1e-4, "gamma = {g}");
    }

    #[test]
    fn zero_mixing_means_no_loss() {
        let mut p = params();
        p.omega23 = 0.0;
        let pop = ExcitedPopulation {
            beam_term: 3.0,
            probe_term: 0.0,
        };
        let l =
            spontaneous_loss(&pop, 5e3, 1e-3, &p, &PhysicalConstants::rubidium87(), false).unwrap();
        assert_eq!(l.l_sp, 0.0);
        assert_eq!(l.l_sp_bound, 0.0);
    }

    #[test]
    fn bound_scales_linearly() {
        let c = PhysicalConstants::rubidium87();
        let pop = ExcitedPopulation::default();
        let a = spontaneous_loss(&pop, 5e3, 1e-3, &params(), &c, false).unwrap();
        let b = spontaneous_loss(&pop, 5e3, 2e-3, &params(), &c, false).unwrap();
        assert!((b.l_sp_bound / a.l_sp_bound - 2.0).abs() < 1e-12);
        let mut p = params();
        p.d13 = Some(RB87_D2_DIPOLE * 2f64.sqrt());
        let d = spontaneous_loss(&pop, 5e3, 1e-3, &p, &c, false).unwrap();
        assert!((d.l_sp_bound / a.l_sp_bound - 2.0).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_cases() {
        let q = QuadratureResult::<f64>::from_variances(0.398, 2.512);
        let same = apply_beam_splitter_loss(&q, 0.0).unwrap();
        assert_eq!((same.v_plus, same.v_minus), (0.398, 2.512));
        let vac = apply_beam_splitter_loss(&q, 1.0).unwrap();
        assert_eq!((vac.v_plus, vac.v_minus), (1.0, 1.0));
        let l = apply_beam_splitter_loss(&q, 0.04).unwrap();
        assert!((l.v_plus - 0.42208).abs() < 1e-15);
        assert!(l.uncertainty_product >= 1.0);
        assert!(apply_beam_splitter_loss(&q, 1.5).is_err());
        assert!(apply_beam_splitter_loss(&q, -0.1).is_err());
    }
}
