//! Simulator of a Raman atom-laser incoupler.
//!
//! An incoming atomic beam is transferred into a trapped condensate by a two-photon Raman
//! transition, emitting probe photons that carry the beam's quadrature statistics. The quantum
//! fields are linear in the two input operators, so the dynamics reduce to classical mode
//! functions propagated on a 1D spectral grid.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below fix `f64`, which
//! is what the scenarios and the CLI use.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod grid;
pub mod loss;
pub mod moments;
pub mod observables;
pub mod params;
pub mod propagator;
pub mod scalar;
pub mod scenario;
pub mod state;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex = num_complex::Complex<f64>;
pub type Grid = grid::SpatialGrid<f64>;
pub type Field = grid::ComplexField<f64>;
pub type Params = params::ModelParams<f64>;
pub type Constants = params::PhysicalConstants<f64>;
pub type Derived = params::DerivedQuantities<f64>;
pub type Moments = moments::InputMoments<f64>;
pub type State = state::FieldState<f64>;
pub type Quadratures = observables::QuadratureResult<f64>;
pub type Record = observables::ObservableRecord<f64>;
pub type Loss = loss::LossEstimate<f64>;
pub type Ledger = propagator::FluxLedger<f64>;
