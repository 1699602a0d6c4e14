//! Linear-ansatz mode functions, the condensate amplitude, and initial conditions.
//!
//! Each field operator is written as `ν(x,t) = f_ν(x,t) â₀ + h_ν(x,t) b̂₀`. Atomic envelopes are
//! stored with the `e^{2ik₀x}` carrier removed and probe envelopes with `e^{ik₀x}` removed.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T: Real> {
    /// Beam response to â₀.
    pub f_psi: ComplexField<T>,
    /// Beam response to b̂₀.
    pub h_psi: ComplexField<T>,
    /// Probe response to â₀.
    pub f_e: ComplexField<T>,
    /// Probe response to b̂₀.
    pub h_e: ComplexField<T>,
    /// Condensate amplitude φ, normalised to the atom number.
    pub phi: ComplexField<T>,
    pub t: T,
}

impl<T: Real> FieldState<T> {
    pub fn validate(&self, grid: &SpatialGrid<T>) -> Result<()> {
        for (name, f) in self.named_fields() {
            if f.len() != grid.len() {
                return Err(Error::Dimension {
                    expected: grid.len(),
                    got: f.len(),
                });
            }
            if !f.is_finite() {
                return Err(Error::invalid(name, "contains non-finite values"));
            }
        }
        Ok(())
    }

    pub fn named_fields(&self) -> [(&'static str, &ComplexField<T>); 5] {
        [
            ("f_psi", &self.f_psi),
            ("h_psi", &self.h_psi),
            ("f_e", &self.f_e),
            ("h_e", &self.h_e),
            ("phi", &self.phi),
        ]
    }

    /// `∫(|f_ψ|² + |f_E|²) dx`, the on-grid norm of the â₀ pair.
    pub fn f_pair_norm(&self, grid: &SpatialGrid<T>) -> T {
        self.f_psi.norm_sqr(grid) + self.f_e.norm_sqr(grid)
    }

    /// `∫(|h_ψ|² + |h_E|²) dx`, the on-grid norm of the b̂₀ pair.
    pub fn h_pair_norm(&self, grid: &SpatialGrid<T>) -> T {
        self.h_psi.norm_sqr(grid) + self.h_e.norm_sqr(grid)
    }

    pub fn condensate_atoms(&self, grid: &SpatialGrid<T>) -> T {
        self.phi.norm_sqr(grid)
    }
}

/// Normalised readout mode on a sampled coordinate with uniform weight.
///
/// For spatial modes the weight is `dx`; for the emitted probe the coordinate is the retarded
/// distance `c·(t_now − t_emit)` beyond the detection point, so the weight is `c·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFunction<T: Real> {
    pub values: Vec<Complex<T>>,
    /// Half-open index range `[start, end)` of the integration window.
    pub window: (usize, usize),
    pub weight: T,
}

impl<T: Real> ModeFunction<T> {
    /// Builds the matched mode `f/‖f‖` over `window`. Returns `None` when `f` vanishes there.
    pub fn matched(f: &[Complex<T>], window: (usize, usize), weight: T) -> Option<Self> {
        let (s, e) = window;
        let norm = f[s..e].iter().fold(T::zero(), |acc, v| acc + v.norm_sqr()) * weight;
        if !(norm > T::zero()) {
            return None;
        }
        let inv = T::one() / norm.sqrt();
        let mut values = vec![Complex::new(T::zero(), T::zero()); f.len()];
        for i in s..e {
            values[i] = f[i].scale(inv);
        }
        Some(Self {
            values,
            window,
            weight,
        })
    }

    /// Flat mode of unit norm over `window`.
    pub fn flat(len: usize, window: (usize, usize), weight: T) -> Self {
        let (s, e) = window;
        let amp = T::one() / (lit::<T>((e - s) as f64) * weight).sqrt();
        let mut values = vec![Complex::new(T::zero(), T::zero()); len];
        for v in &mut values[s..e] {
            *v = Complex::new(amp, T::zero());
        }
        Self {
            values,
            window,
            weight,
        }
    }

    pub fn norm_sqr(&self) -> T {
        let (s, e) = self.window;
        self.values[s..e]
            .iter()
            .fold(T::zero(), |acc, v| acc + v.norm_sqr())
            * self.weight
    }
}

/// Gaussian wavepacket description for the pulsed input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape<T: Real> {
    pub center: T,
    pub sigma: T,
}

/// Flat-top beam with cos² ramps at both ends; `front` is the mid-point of the leading ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamShape<T: Real> {
    pub back: T,
    pub front: T,
    pub ramp: T,
}

/// Condensate and probe settings shared by both initial-state builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background<T: Real> {
    pub n_condensate: T,
    pub a_ho: T,
    /// Envelope amplitude of the b̂₀ probe mode at the input boundary.
    pub probe_amplitude: T,
}

/// Unit-normalised Gaussian envelope with density `exp(-(x-x₀)²/(2σ²))`.
pub fn gaussian_mode<T: Real>(grid: &SpatialGrid<T>, center: T, sigma: T) -> ComplexField<T> {
    let amp = (T::one() / (sigma * T::PI().sqrt() * lit::<T>(2.0).sqrt())).sqrt();
    let four = lit::<T>(4.0);
    ComplexField::from_fn(grid, |x| {
        let d = x - center;
        Complex::new(amp * (-(d * d) / (four * sigma * sigma)).exp(), T::zero())
    })
}

/// Harmonic-oscillator ground state holding `n_atoms`.
pub fn condensate_ground_state<T: Real>(
    grid: &SpatialGrid<T>,
    a_ho: T,
    n_atoms: T,
) -> ComplexField<T> {
    let amp = (n_atoms / (T::PI().sqrt() * a_ho)).sqrt();
    let two = lit::<T>(2.0);
    ComplexField::from_fn(grid, |x| {
        Complex::new(amp * (-(x * x) / (two * a_ho * a_ho)).exp(), T::zero())
    })
}

fn background_fields<T: Real>(
    grid: &SpatialGrid<T>,
    bg: &Background<T>,
) -> Result<(ComplexField<T>, ComplexField<T>)> {
    if !(bg.a_ho > T::zero()) || !(bg.n_condensate >= T::zero()) {
        return Err(Error::Config(
            "condensate width and atom number must be positive".into(),
        ));
    }
    let margin = lit::<T>(10.0) * bg.a_ho;
    if grid.x_min() + margin > T::zero() || grid.x_max() - margin < T::zero() {
        return Err(Error::Config(
            "condensate at x = 0 must sit at least 10 a_ho inside the grid".into(),
        ));
    }
    let phi = condensate_ground_state(grid, bg.a_ho, bg.n_condensate);
    let h_e = ComplexField::from_fn(grid, |_| Complex::new(bg.probe_amplitude, T::zero()));
    Ok((phi, h_e))
}

pub fn make_pulsed_initial_state<T: Real>(
    grid: &SpatialGrid<T>,
    pulse: &PulseShape<T>,
    bg: &Background<T>,
) -> Result<FieldState<T>> {
    if !(pulse.sigma > T::zero()) {
        return Err(Error::Config("pulse width must be positive".into()));
    }
    let margin = lit::<T>(5.0) * pulse.sigma;
    if pulse.center - margin < grid.x_min() || pulse.center + margin > grid.x_max() {
        return Err(Error::Config(format!(
            "pulse at {} with sigma {} needs 5 sigma of margin inside [{}, {}]",
            pulse.center,
            pulse.sigma,
            grid.x_min(),
            grid.x_max()
        )));
    }
    let (phi, h_e) = background_fields(grid, bg)?;
    Ok(FieldState {
        f_psi: gaussian_mode(grid, pulse.center, pulse.sigma),
        h_psi: ComplexField::zeros(grid.len()),
        f_e: ComplexField::zeros(grid.len()),
        h_e,
        phi,
        t: T::zero(),
    })
}

/// Flat-top envelope normalised over its support.
pub fn flat_top_mode<T: Real>(grid: &SpatialGrid<T>, beam: &BeamShape<T>) -> ComplexField<T> {
    let half = beam.ramp / lit::<T>(2.0);
    let hp = T::FRAC_PI_2();
    let raw = ComplexField::from_fn(grid, |x| {
        let a = if x <= beam.back - half || x >= beam.front + half {
            T::zero()
        } else if x < beam.back + half {
            (hp * (beam.back + half - x) / beam.ramp).cos()
        } else if x > beam.front - half {
            (hp * (x - (beam.front - half)) / beam.ramp).cos()
        } else {
            T::one()
        };
        Complex::new(a, T::zero())
    });
    let n = raw.norm_sqr(grid);
    raw.scaled(Complex::new(T::one() / n.sqrt(), T::zero()))
}

pub fn make_continuous_initial_state<T: Real>(
    grid: &SpatialGrid<T>,
    beam: &BeamShape<T>,
    bg: &Background<T>,
) -> Result<FieldState<T>> {
    if !(beam.ramp > T::zero()) || !(beam.front - beam.back > beam.ramp) {
        return Err(Error::Config(
            "beam needs a positive ramp shorter than its length".into(),
        ));
    }
    let half = beam.ramp / lit::<T>(2.0);
    if beam.back - half < grid.x_min() || beam.front + half > grid.x_max() {
        return Err(Error::Config("beam does not fit inside the grid".into()));
    }
    let (phi, h_e) = background_fields(grid, bg)?;
    Ok(FieldState {
        f_psi: flat_top_mode(grid, beam),
        h_psi: ComplexField::zeros(grid.len()),
        f_e: ComplexField::zeros(grid.len()),
        h_e,
        phi,
        t: T::zero(),
    })
}
