//! Physical constants, model parameters and the quantities derived from them.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid};
use crate::scalar::{lit, Real};

/// Mass of ⁸⁷Rb in kg.
pub const RB87_MASS: f64 = 1.443_16e-25;
/// ⁸⁷Rb D2 transition dipole moment in C·m.
pub const RB87_D2_DIPOLE: f64 = 3.58e-29;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants<T: Real> {
    pub hbar: T,
    pub c_light: T,
    pub epsilon0: T,
    pub atom_mass: T,
}

impl<T: Real> PhysicalConstants<T> {
    /// CODATA constants with the ⁸⁷Rb mass.
    pub fn rubidium87() -> Self {
        Self {
            hbar: lit(1.054_571_817e-34),
            c_light: lit(299_792_458.0),
            epsilon0: lit(8.854_187_812_8e-12),
            atom_mass: lit(RB87_MASS),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("hbar", self.hbar)?;
        positive("c_light", self.c_light)?;
        positive("epsilon0", self.epsilon0)?;
        positive("atom_mass", self.atom_mass)
    }
}

/// Parameters of the Λ-system model after adiabatic elimination.
///
/// `omega23` and `g13` enter the dynamics only through the combinations
/// `omega23 * g13 / delta` (coupling strength), `omega23 / delta` (excited-state admixture)
/// and `g13² / delta` (probe light shift).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams<T: Real> {
    /// Optical wavenumber k₀ (m⁻¹).
    pub k0: T,
    /// Raman detuning Δ from the excited state (rad/s).
    pub delta: T,
    /// Control Rabi frequency Ω₂₃ (rad/s).
    pub omega23: T,
    /// Atom–probe coupling g₁₃.
    pub g13: T,
    /// Transition dipole moment (C·m); only needed for the spontaneous-emission estimate.
    pub d13: Option<T>,
    /// Trap angular frequency ω_t (rad/s).
    pub trap_omega: T,
    /// Condensate atom number N₀.
    pub n_condensate: T,
    /// Residual two-photon detuning of the beam from Raman resonance (rad/s).
    pub two_photon_detuning: T,
}

impl<T: Real> ModelParams<T> {
    /// ω₀ = k₀·c.
    pub fn omega0(&self, consts: &PhysicalConstants<T>) -> T {
        self.k0 * consts.c_light
    }

    /// Ω₂₃·g₁₃/Δ, the factor turning φ(x) into Ω_C(x).
    pub fn coupling_constant(&self) -> Result<T> {
        if self.delta == T::zero() {
            return Err(Error::Singular("Raman detuning delta is zero".into()));
        }
        Ok(self.omega23 * self.g13 / self.delta)
    }

    /// Ω₂₃/Δ, the amplitude of the excited-state admixture of beam atoms.
    pub fn mixing_ratio(&self) -> Result<T> {
        if self.delta == T::zero() {
            return Err(Error::Singular("Raman detuning delta is zero".into()));
        }
        Ok(self.omega23 / self.delta)
    }

    /// g₁₃²/Δ, multiplying |φ|² in the probe light shift and ⟨Ê†Ê⟩ in the condensate shift.
    pub fn light_shift_coefficient(&self) -> Result<T> {
        if self.delta == T::zero() {
            return Err(Error::Singular("Raman detuning delta is zero".into()));
        }
        Ok(self.g13 * self.g13 / self.delta)
    }

    /// True while both adiabatic-elimination ratios stay below `0.1`.
    pub fn adiabatic_validity(&self, max_probe_amplitude: T) -> bool {
        let limit = lit::<T>(0.1);
        if self.delta == T::zero() {
            return false;
        }
        (self.omega23 / self.delta).abs() < limit
            && (self.g13 * max_probe_amplitude / self.delta).abs() < limit
    }

    pub fn validate(&self) -> Result<()> {
        positive("k0", self.k0)?;
        positive("trap_omega", self.trap_omega)?;
        positive("n_condensate", self.n_condensate)?;
        if self.delta == T::zero() || !self.delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite and non-zero"));
        }
        if !self.omega23.is_finite() || !self.g13.is_finite() {
            return Err(Error::invalid("omega23/g13", "must be finite"));
        }
        if let Some(d) = self.d13 {
            if !(d >= T::zero()) || !d.is_finite() {
                return Err(Error::invalid("d13", "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities<T: Real> {
    /// 2ℏk₀/m (m/s).
    pub v_atom: T,
    /// √(ℏ/mω_t) (m).
    pub a_ho: T,
    /// 4·a_ho·m/(2ℏk₀) (s).
    pub t_rabi: T,
    /// 2π/T_Rabi (rad/s).
    pub omega_c_peak: T,
    /// Spontaneous emission rate, when a dipole moment is given (rad/s).
    pub gamma_sp: Option<T>,
}

pub fn derive<T: Real>(
    params: &ModelParams<T>,
    consts: &PhysicalConstants<T>,
) -> Result<DerivedQuantities<T>> {
    consts.validate()?;
    positive("k0", params.k0)?;
    positive("trap_omega", params.trap_omega)?;
    let two = lit::<T>(2.0);
    let v_atom = two * consts.hbar * params.k0 / consts.atom_mass;
    let a_ho = (consts.hbar / (consts.atom_mass * params.trap_omega)).sqrt();
    let t_rabi = lit::<T>(4.0) * a_ho / v_atom;
    let omega_c_peak = T::TAU() / t_rabi;
    let gamma_sp = params
        .d13
        .map(|d| crate::loss::spontaneous_rate_from(params.k0, d, consts));
    Ok(DerivedQuantities {
        v_atom,
        a_ho,
        t_rabi,
        omega_c_peak,
        gamma_sp,
    })
}

/// Ω_C(x) = φ(x)·Ω₂₃*·g₁₃/Δ.
pub fn coupling_profile<T: Real>(
    phi: &ComplexField<T>,
    params: &ModelParams<T>,
) -> Result<ComplexField<T>> {
    let kappa = params.coupling_constant()?;
    Ok(phi.scaled(Complex::new(kappa, T::zero())))
}

/// Coupling constant κ = Ω₂₃g₁₃/Δ for which `max|κφ| = target_peak`.
pub fn coupling_for_peak<T: Real>(phi: &ComplexField<T>, target_peak: T) -> Result<T> {
    let peak = phi.max_abs();
    if peak <= T::zero() {
        return Err(Error::Singular("condensate amplitude vanishes".into()));
    }
    Ok(target_peak / peak)
}

/// Coupling constant κ for which a beam atom crossing the condensate at `v_atom` while the probe
/// escapes at `c_light` accumulates the transfer angle `area`:
/// `κ ∫|φ| dx / √(v_atom c_light) = area`. A quarter cycle is `area = π/2`.
pub fn coupling_for_transfer_angle<T: Real>(
    phi: &ComplexField<T>,
    grid: &SpatialGrid<T>,
    v_atom: T,
    c_light: T,
    area: T,
) -> Result<T> {
    let integral = phi.values().iter().fold(T::zero(), |acc, v| acc + v.norm()) * grid.dx();
    if integral <= T::zero() {
        return Err(Error::Singular("condensate amplitude vanishes".into()));
    }
    Ok(area * (v_atom * c_light).sqrt() / integral)
}

/// Transfer angle accumulated by a beam atom crossing the coupling profile `omega_c`.
pub fn transfer_angle<T: Real>(
    omega_c: &ComplexField<T>,
    grid: &SpatialGrid<T>,
    v_atom: T,
    c_light: T,
) -> T {
    let integral = omega_c
        .values()
        .iter()
        .fold(T::zero(), |acc, v| acc + v.norm())
        * grid.dx();
    integral / (v_atom * c_light).sqrt()
}

/// Ω₂₃/Δ for which the spontaneous-loss bound γ_sp·(Ω₂₃/Δ)²·T_Rabi/4 equals `eta`.
pub fn mixing_ratio_for_loss<T: Real>(eta: T, gamma_sp: T, t_rabi: T) -> Result<T> {
    if !(eta >= T::zero()) {
        return Err(Error::invalid("eta", "must be non-negative"));
    }
    let denom = gamma_sp * t_rabi / lit::<T>(4.0);
    if denom <= T::zero() {
        return Err(Error::Singular(
            "spontaneous rate times T_Rabi must be positive".into(),
        ));
    }
    Ok((eta / denom).sqrt())
}

fn positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams<f64> {
        ModelParams {
            k0: 8e6,
            delta: 2.0 * std::f64::consts::PI * 1e9,
            omega23: 1e6,
            g13: 1e3,
            d13: Some(RB87_D2_DIPOLE),
            trap_omega: 2.0 * std::f64::consts::PI * 5.0,
            n_condensate: 1e6,
            two_photon_detuning: 0.0,
        }
    }

    #[test]
    fn rubidium_beam_velocity() {
        let d = derive(&params(), &PhysicalConstants::rubidium87()).unwrap();
        // 2ℏk₀/m by hand: 2 × 1.054571817e-34 × 8e6 / 1.44316e-25
        assert!((d.v_atom - 1.169_18e-2).abs() < 1e-6);
        assert!((d.v_atom - 1.1e-2).abs() / 1.1e-2 < 0.07);
    }

    #[test]
    fn harmonic_length_and_rabi_time() {
        let d = derive(&params(), &PhysicalConstants::rubidium87()).unwrap();
        assert!((d.a_ho - 4.83e-6).abs() < 0.01e-6, "a_ho = {}", d.a_ho);
        assert!(
            (d.t_rabi - 1.65e-3).abs() < 0.01e-3,
            "t_rabi = {}",
            d.t_rabi
        );
        assert!((d.omega_c_peak - 3.80e3).abs() < 0.01e3);
        assert!((d.t_rabi * d.v_atom - 4.0 * d.a_ho).abs() < 1e-18);
        assert!((d.omega_c_peak * d.t_rabi - std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn derive_rejects_bad_inputs() {
        let mut p = params();
        p.trap_omega = 0.0;
        assert!(derive(&p, &PhysicalConstants::rubidium87()).is_err());
        let mut c = PhysicalConstants::rubidium87();
        c.atom_mass = -1.0;
        assert!(derive(&params(), &c).is_err());
    }

    #[test]
    fn coupling_profile_scales_pointwise() {
        let g = SpatialGrid::new(-1e-4, 1e-4, 256).unwrap();
        let p = params();
        let zero = ComplexField::zeros(g.len());
        assert_eq!(coupling_profile(&zero, &p).unwrap().max_abs(), 0.0);
        let phi = ComplexField::from_fn(&g, |x: f64| Complex::new((-x * x / 1e-10).exp(), 0.0));
        let oc = coupling_profile(&phi, &p).unwrap();
        let k = p.omega23 * p.g13 / p.delta;
        for i in 0..g.len() {
            assert!((oc[i] - phi[i] * k).norm() < 1e-15);
            assert_eq!(oc[i].im, 0.0);
        }
        let mut bad = p;
        bad.delta = 0.0;
        assert!(matches!(
            coupling_profile(&phi, &bad),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn peak_calibration_hits_target() {
        let consts = PhysicalConstants::rubidium87();
        let d = derive(&params(), &consts).unwrap();
        let g = SpatialGrid::new(-1.5e-3, 1.5e-3, 4096).unwrap();
        let a = d.a_ho;
        let norm = (1e6 / (std::f64::consts::PI.sqrt() * a)).sqrt();
        let phi = ComplexField::from_fn(&g, |x| {
            Complex::new(norm * (-x * x / (2.0 * a * a)).exp(), 0.0)
        });
        assert!((phi.norm_sqr(&g) - 1e6).abs() < 1e-4);
        let kappa = coupling_for_peak(&phi, d.omega_c_peak).unwrap();
        let mut p = params();
        p.g13 = kappa * p.delta / p.omega23;
        let oc = coupling_profile(&phi, &p).unwrap();
        assert!((oc.max_abs() - 3.80e3).abs() < 0.01e3);
    }

    #[test]
    fn transfer_angle_calibration_roundtrip() {
        let g = SpatialGrid::new(-1e-4, 1e-4, 1024).unwrap();
        let phi = ComplexField::from_fn(&g, |x: f64| Complex::new((-x * x / 5e-11).exp(), 0.0));
        let kappa = coupling_for_transfer_angle(&phi, &g, 0.0117, 3e8, std::f64::consts::FRAC_PI_2)
            .unwrap();
        let oc = phi.scaled(Complex::new(kappa, 0.0));
        let angle = transfer_angle(&oc, &g, 0.0117, 3e8);
        assert!((angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn omega0_is_k0_c() {
        let c = PhysicalConstants::rubidium87();
        assert_eq!(params().omega0(&c), 8e6 * 299_792_458.0);
    }

    #[test]
    fn adiabatic_flag() {
        let p = params();
        assert!(p.adiabatic_validity(1.0));
        let mut q = p;
        q.omega23 = p.delta;
        assert!(!q.adiabatic_validity(1.0));
    }
}
