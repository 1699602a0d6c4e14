//! Uniform periodic 1D grid with FFT-backed spectral operators.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Uniform grid on `[x_min, x_max)` with periodic wrap.
///
/// FFT plans are shared behind `Arc` and are `Send + Sync`; scratch buffers are allocated per
/// call so a grid can be used from several threads at once.
#[derive(Clone)]
pub struct SpatialGrid<T: Real> {
    x_min: T,
    x_max: T,
    n_points: usize,
    dx: T,
    k_values: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for SpatialGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("n_points", &self.n_points)
            .field("dx", &self.dx)
            .finish()
    }
}

impl<T: Real> SpatialGrid<T> {
    pub fn new(x_min: T, x_max: T, n_points: usize) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::Grid(format!(
                "n_points must be a power of two >= 2, got {n_points}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Grid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        let n = lit::<T>(n_points as f64);
        let dx = (x_max - x_min) / n;
        let two_pi_over_l = T::TAU() / (x_max - x_min);
        let k_values = (0..n_points)
            .map(|i| {
                let m = if i < n_points / 2 {
                    i as f64
                } else {
                    i as f64 - n_points as f64
                };
                lit::<T>(m) * two_pi_over_l
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Self {
            x_min,
            x_max,
            n_points,
            dx,
            k_values,
            forward,
            inverse,
        })
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }

    pub fn x_max(&self) -> T {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn length(&self) -> T {
        self.x_max - self.x_min
    }

    /// Wavenumbers in standard FFT ordering: `0, dk, ..., -dk`.
    pub fn k_values(&self) -> &[T] {
        &self.k_values
    }

    pub fn x(&self, i: usize) -> T {
        self.x_min + lit::<T>(i as f64) * self.dx
    }

    pub fn positions(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn index_of(&self, x: T) -> usize {
        let s = ((x - self.x_min) / self.dx).round();
        let s = s.max(T::zero()).to_usize().unwrap_or(0);
        s.min(self.n_points - 1)
    }

    fn check(&self, f: &ComplexField<T>) -> Result<()> {
        if f.len() != self.n_points {
            return Err(Error::Dimension {
                expected: self.n_points,
                got: f.len(),
            });
        }
        Ok(())
    }

    /// Unnormalised forward transform in place.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.forward.process(data);
    }

    /// Inverse transform in place, including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.inverse.process(data);
        let scale = T::one() / lit::<T>(self.n_points as f64);
        for v in data.iter_mut() {
            *v = v.scale(scale);
        }
    }

    /// Multiplies the spectrum of `f` pointwise by `multiplier(k)` and returns to position space.
    pub fn apply_spectral<F>(&self, f: &mut ComplexField<T>, multiplier: F) -> Result<()>
    where
        F: Fn(T) -> Complex<T>,
    {
        self.check(f)?;
        self.forward(&mut f.values);
        for (v, &k) in f.values.iter_mut().zip(&self.k_values) {
            *v *= multiplier(k);
        }
        self.inverse(&mut f.values);
        Ok(())
    }

    /// Same as [`apply_spectral`](Self::apply_spectral) with a precomputed multiplier table.
    pub fn apply_spectral_table(
        &self,
        f: &mut ComplexField<T>,
        table: &[Complex<T>],
    ) -> Result<()> {
        self.check(f)?;
        if table.len() != self.n_points {
            return Err(Error::Dimension {
                expected: self.n_points,
                got: table.len(),
            });
        }
        self.forward(&mut f.values);
        for (v, m) in f.values.iter_mut().zip(table) {
            *v *= *m;
        }
        self.inverse(&mut f.values);
        Ok(())
    }

    /// Cos² ramp falling from 1 to 0 over the outermost `fraction` of the grid on each side.
    pub fn absorbing_mask(&self, fraction: T) -> Vec<T> {
        let width = self.length() * fraction;
        let half_pi = T::FRAC_PI_2();
        (0..self.n_points)
            .map(|i| {
                let x = self.x(i);
                let from_left = x - self.x_min;
                let from_right = self.x_max - self.dx - x;
                let d = from_left.min(from_right);
                if width <= T::zero() || d >= width {
                    T::one()
                } else {
                    let s = (half_pi * (T::one() - d / width)).cos();
                    s * s
                }
            })
            .collect()
    }
}

/// Complex amplitude sampled on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField<T: Real> {
    values: Vec<Complex<T>>,
}

impl<T: Real> ComplexField<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn from_values(values: Vec<Complex<T>>) -> Self {
        Self { values }
    }

    pub fn from_fn<F: Fn(T) -> Complex<T>>(grid: &SpatialGrid<T>, f: F) -> Self {
        Self {
            values: (0..grid.len()).map(|i| f(grid.x(i))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scaled(&self, s: Complex<T>) -> Self {
        Self {
            values: self.values.iter().map(|v| *v * s).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: Complex<T>, other: &Self, beta: Complex<T>) -> Result<Self> {
        if other.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| *a * alpha + *b * beta)
                .collect(),
        })
    }

    /// `|f(x)|²` at every point.
    pub fn density(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `Σ|f|² dx`.
    pub fn norm_sqr(&self, grid: &SpatialGrid<T>) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc + v.norm_sqr())
            * grid.dx()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.norm()))
    }
}

impl<T: Real> Index<usize> for ComplexField<T> {
    type Output = Complex<T>;
    fn index(&self, i: usize) -> &Complex<T> {
        &self.values[i]
    }
}

impl<T: Real> IndexMut<usize> for ComplexField<T> {
    fn index_mut(&mut self, i: usize) -> &mut Complex<T> {
        &mut self.values[i]
    }
}

/// Discrete `∫ a*(x) b(x) dx`.
pub fn inner_product<T: Real>(
    a: &ComplexField<T>,
    b: &ComplexField<T>,
    grid: &SpatialGrid<T>,
) -> Result<Complex<T>> {
    grid.check(a)?;
    grid.check(b)?;
    let sum = a
        .values
        .iter()
        .zip(&b.values)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        });
    Ok(sum.scale(grid.dx()))
}

/// `∂²f/∂x²` by multiplying the spectrum with `-k²`.
pub fn spectral_second_derivative<T: Real>(
    f: &ComplexField<T>,
    grid: &SpatialGrid<T>,
) -> Result<ComplexField<T>> {
    let mut out = f.clone();
    grid.apply_spectral(&mut out, |k| Complex::new(-(k * k), T::zero()))?;
    Ok(out)
}

/// `∂f/∂x` by multiplying the spectrum with `ik`. The Nyquist mode is zeroed so that real input
/// gives real output.
pub fn spectral_first_derivative<T: Real>(
    f: &ComplexField<T>,
    grid: &SpatialGrid<T>,
) -> Result<ComplexField<T>> {
    let mut out = f.clone();
    let nyquist = -T::PI() / grid.dx();
    let tol = grid.k_values()[1] * lit::<T>(0.5);
    grid.apply_spectral(&mut out, |k| {
        if (k - nyquist).abs() < tol {
            Complex::new(T::zero(), T::zero())
        } else {
            Complex::new(T::zero(), k)
        }
    })?;
    Ok(out)
}
