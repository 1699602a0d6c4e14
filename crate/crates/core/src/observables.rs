//! Readouts of the linear-ansatz state: mode-matched quadratures, local g², and number tallies.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::moments::{InputMoments, ModeMoments};
use crate::scalar::{lit, Real};
use crate::state::{FieldState, ModeFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult<T: Real> {
    pub v_plus: T,
    pub v_minus: T,
    pub uncertainty_product: T,
    /// |c_a|²: fraction of the â₀ input captured by the readout mode.
    pub mode_overlap_a: T,
    /// |c_b|²: fraction of the b̂₀ input captured by the readout mode.
    pub mode_overlap_b: T,
}

impl<T: Real> QuadratureResult<T> {
    pub fn vacuum() -> Self {
        Self {
            v_plus: T::one(),
            v_minus: T::one(),
            uncertainty_product: T::one(),
            mode_overlap_a: T::zero(),
            mode_overlap_b: T::zero(),
        }
    }

    pub fn from_variances(v_plus: T, v_minus: T) -> Self {
        Self {
            v_plus,
            v_minus,
            uncertainty_product: v_plus * v_minus,
            mode_overlap_a: T::zero(),
            mode_overlap_b: T::zero(),
        }
    }
}

/// Projects the pair `(f, h)` onto a normalised mode: `c_a = ∫L*f`, `c_b = ∫L*h`.
pub fn mode_coefficients<T: Real>(
    f: &[Complex<T>],
    h: &[Complex<T>],
    mode: &ModeFunction<T>,
) -> Result<(Complex<T>, Complex<T>)> {
    if f.len() != mode.values.len() || h.len() != mode.values.len() {
        return Err(Error::Dimension {
            expected: mode.values.len(),
            got: f.len().min(h.len()),
        });
    }
    let norm = mode.norm_sqr();
    if (norm - T::one()).abs() > lit::<T>(1e-8) {
        return Err(Error::invalid(
            "mode",
            format!("readout mode must be unit-normalised, has norm {norm}"),
        ));
    }
    let (s, e) = mode.window;
    let zero = Complex::new(T::zero(), T::zero());
    let (mut ca, mut cb) = (zero, zero);
    for i in s..e {
        let l = mode.values[i].conj();
        ca += l * f[i];
        cb += l * h[i];
    }
    Ok((ca.scale(mode.weight), cb.scale(mode.weight)))
}

fn mode_contribution<T: Real>(c: Complex<T>, m: &ModeMoments<T>, rot: Complex<T>) -> T {
    c.norm_sqr() * m.incoherent_number() + (rot * c * c * m.anomalous()).re
}

/// V(X(θ)) for `â = c_a â₀ + c_b b̂₀` completed with vacuum to a unit-commutator mode.
pub fn variance_at<T: Real>(
    c_a: Complex<T>,
    c_b: Complex<T>,
    moments: &InputMoments<T>,
    theta: T,
) -> T {
    let rot = Complex::new(T::zero(), -lit::<T>(2.0) * theta).exp();
    T::one()
        + lit::<T>(2.0)
            * (mode_contribution(c_a, &moments.a, rot) + mode_contribution(c_b, &moments.b, rot))
}

/// Variances of X(θ) and X(θ + π/2); `theta = 0` gives the X⁺/X⁻ pair.
pub fn quadrature_variance<T: Real>(
    c_a: Complex<T>,
    c_b: Complex<T>,
    moments: &InputMoments<T>,
    theta: T,
) -> QuadratureResult<T> {
    let v_plus = variance_at(c_a, c_b, moments, theta);
    let v_minus = variance_at(c_a, c_b, moments, theta + T::FRAC_PI_2());
    QuadratureResult {
        v_plus,
        v_minus,
        uncertainty_product: v_plus * v_minus,
        mode_overlap_a: c_a.norm_sqr(),
        mode_overlap_b: c_b.norm_sqr(),
    }
}

/// Local g²(x,x,t) from the mode functions at one point. Returns `None` when the field density
/// `|f|²n_a + |h|²n_b` is not above `density_floor`.
pub fn g2_local<T: Real>(
    f: Complex<T>,
    h: Complex<T>,
    moments: &InputMoments<T>,
    density_floor: T,
) -> Option<T> {
    let f2 = f.norm_sqr();
    let h2 = h.norm_sqr();
    let (a, b) = (&moments.a, &moments.b);
    let density = f2 * a.n + h2 * b.n;
    if !(density > density_floor) || !(density > T::zero()) {
        return None;
    }
    let numerator = f2 * f2 * a.g4 + h2 * h2 * b.g4 + lit::<T>(4.0) * f2 * h2 * a.n * b.n;
    let denominator =
        f2 * f2 * a.n * a.n + h2 * h2 * b.n * b.n + lit::<T>(2.0) * f2 * h2 * a.n * b.n;
    Some(numerator / denominator)
}

/// Physical populations implied by the mode functions and the input moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tallies<T: Real> {
    pub beam_atoms: T,
    pub probe_photons: T,
    pub condensate_atoms: T,
}

pub fn number_tallies<T: Real>(
    state: &FieldState<T>,
    grid: &SpatialGrid<T>,
    moments: &InputMoments<T>,
) -> Tallies<T> {
    Tallies {
        beam_atoms: moments.a.n * state.f_psi.norm_sqr(grid)
            + moments.b.n * state.h_psi.norm_sqr(grid),
        probe_photons: moments.a.n * state.f_e.norm_sqr(grid)
            + moments.b.n * state.h_e.norm_sqr(grid),
        condensate_atoms: state.condensate_atoms(grid),
    }
}

/// One time sample of everything the scenarios write out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableRecord<T: Real> {
    pub t: T,
    pub tallies: Tallies<T>,
    pub quad_atom: QuadratureResult<T>,
    pub quad_probe: QuadratureResult<T>,
    pub g2_atom: Option<T>,
    pub g2_probe: Option<T>,
    /// Output photon flux (photons/s) at the detection point.
    pub probe_output_rate: T,
    /// Cumulative counters from the propagator.
    pub photons_emitted: T,
    pub atoms_incoupled: T,
    pub f_pair_leakage: T,
    pub h_pair_net_leakage: T,
    /// On-grid pair norms; with the leakage terms these are conserved.
    pub f_pair_norm: T,
    pub h_pair_norm: T,
    /// Phase of the probe frame relative to the optical rotating frame, unwound at readout.
    pub probe_frame_phase: T,
    #[serde(skip)]
    pub atom_density: Vec<T>,
    #[serde(skip)]
    pub probe_density: Vec<T>,
    #[serde(skip)]
    pub condensate_density: Vec<T>,
}
