//! Time evolution of the linear-ansatz mode functions and the condensate.
//!
//! Both ansatz pairs `(f_ψ, f_E)` and `(h_ψ, h_E)` obey the same linear equations
//!
//! ```text
//! i ∂t ψ = H_a ψ − Ω_C E
//! i ∂t E = H_b E − Ω_C* ψ
//! i ∂t φ = H_φ φ − κ ⟨E†ψ⟩,      Ω_C = κ φ
//! ```
//!
//! written for carrier-stripped envelopes in a frame co-rotating with the free beam. Each step is a
//! Strang splitting: half a step of the diagonal (spectral) part, a full step of the local
//! coupling, and another half step of the diagonal part.
//!
//! Two probe treatments are available. [`ProbeMode::QuasiStatic`] slaves the probe to the atoms
//! by integrating `0 = −ic∂x E + U E − Ω_C* ψ` along its characteristic; the atomic update then
//! becomes a Volterra operator that is advanced with a Crank–Nicolson step solved by a single
//! forward sweep. [`ProbeMode::ScaledC`] propagates the probe explicitly with a reduced light
//! speed, keeping `Ω_C²/c` and `U/c` fixed so the physics matches the quasi-static limit.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid};
use crate::moments::InputMoments;
use crate::params::{derive, ModelParams, PhysicalConstants};
use crate::scalar::{lit, Real};
use crate::state::FieldState;

type C<T> = Complex<T>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProbeMode<T: Real> {
    QuasiStatic,
    /// Explicit probe transport at `c_sim`. `c_sim = 0` freezes the probe in place, which is
    /// only allowed together with a fixed coupling profile.
    ScaledC {
        c_sim: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig<T: Real> {
    pub dt: T,
    pub probe_mode: ProbeMode<T>,
    pub record_every: usize,
    /// Disables the spectral kinetic/transport part (two-mode test limit).
    pub kinetic: bool,
    pub evolve_condensate: bool,
    /// Cos² absorbing ramp over this fraction of the grid at each edge (ScaledC only).
    pub mask_fraction: Option<T>,
    /// Fixed Ω_C(x) replacing κφ; the condensate is then left untouched.
    pub coupling_override: Option<ComplexField<T>>,
    /// Position where the incoming beam flux is sampled.
    pub reference_point: T,
}

impl<T: Real> StepConfig<T> {
    pub fn quasi_static(dt: T) -> Self {
        Self {
            dt,
            probe_mode: ProbeMode::QuasiStatic,
            record_every: 1,
            kinetic: true,
            evolve_condensate: true,
            mask_fraction: None,
            coupling_override: None,
            reference_point: T::zero(),
        }
    }

    pub fn scaled_c(dt: T, c_sim: T) -> Self {
        Self {
            probe_mode: ProbeMode::ScaledC { c_sim },
            mask_fraction: Some(lit(0.05)),
            ..Self::quasi_static(dt)
        }
    }

    pub fn validate(&self, grid: &SpatialGrid<T>) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::invalid(
                "dt",
                format!("must be positive, got {}", self.dt),
            ));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be at least 1"));
        }
        if let Some(m) = &self.coupling_override {
            if m.len() != grid.len() {
                return Err(Error::Dimension {
                    expected: grid.len(),
                    got: m.len(),
                });
            }
        }
        if let ProbeMode::ScaledC { c_sim } = self.probe_mode {
            if c_sim < T::zero() || !c_sim.is_finite() {
                return Err(Error::invalid("c_sim", "must be non-negative"));
            }
            if c_sim == T::zero() && self.coupling_override.is_none() {
                return Err(Error::invalid(
                    "c_sim",
                    "zero probe speed needs a fixed coupling profile",
                ));
            }
            if c_sim * self.dt > grid.dx() * (T::one() + lit(1e-9)) {
                return Err(Error::invalid(
                    "dt",
                    format!(
                        "CFL violated: c_sim*dt = {} exceeds dx = {}",
                        c_sim * self.dt,
                        grid.dx()
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Coefficients of the equations of motion, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dynamics<T: Real> {
    pub hbar_over_m: T,
    /// Group velocity 2ℏk₀/m of the beam carrier.
    pub v_atom: T,
    pub c_light: T,
    /// κ = Ω₂₃g₁₃/Δ.
    pub kappa: T,
    /// g₁₃²/Δ.
    pub light_shift: T,
    pub trap_omega: T,
    pub two_photon_detuning: T,
    /// Frequency removed from both envelopes: ℏ(2k₀)²/2m − Ω₂₃²/Δ.
    pub frame_frequency: T,
}

impl<T: Real> Dynamics<T> {
    pub fn new(params: &ModelParams<T>, consts: &PhysicalConstants<T>) -> Result<Self> {
        params.validate()?;
        let derived = derive(params, consts)?;
        let hbar_over_m = consts.hbar / consts.atom_mass;
        let two_k0 = lit::<T>(2.0) * params.k0;
        Ok(Self {
            hbar_over_m,
            v_atom: derived.v_atom,
            c_light: consts.c_light,
            kappa: params.coupling_constant()?,
            light_shift: params.light_shift_coefficient()?,
            trap_omega: params.trap_omega,
            two_photon_detuning: params.two_photon_detuning,
            frame_frequency: hbar_over_m * two_k0 * two_k0 / lit(2.0)
                - params.omega23 * params.omega23 / params.delta,
        })
    }
}

/// Cumulative particle bookkeeping, in units of the pair norms (multiply by the input moments
/// for physical numbers).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FluxLedger<T: Real> {
    /// Norm of the â₀ pair that left through the probe output.
    pub f_out: T,
    /// Norm of the b̂₀ pair that left through the probe output.
    pub h_out: T,
    /// Norm of the b̂₀ pair injected at the probe input.
    pub h_in: T,
    pub steps: u64,
}

impl<T: Real> FluxLedger<T> {
    /// Photons emitted beyond those injected: n_a·f_out + n_b·(h_out − h_in).
    pub fn photons_emitted(&self, moments: &InputMoments<T>) -> T {
        moments.a.n * self.f_out + moments.b.n * (self.h_out - self.h_in)
    }
}

/// Probe amplitude leaving the detection point, sampled once per step.
///
/// Amplitudes are scaled as `√c·E` so that `Σ|a|²·dt` counts pair norm.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputHistory<T: Real> {
    pub dt: T,
    pub times: Vec<T>,
    pub f_out: Vec<C<T>>,
    pub h_out: Vec<C<T>>,
    /// Beam flux of the â₀ pair through the reference point.
    pub beam_flux: Vec<T>,
}

impl<T: Real> OutputHistory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index range of samples with `t > t_start`.
    pub fn window_since(&self, t_start: T) -> (usize, usize) {
        let s = self.times.partition_point(|&t| t <= t_start);
        (s, self.times.len())
    }
}

/// Probe envelope slaved to the atoms plus the amplitude leaving the right edge.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiStaticProbe<T: Real> {
    pub field: ComplexField<T>,
    /// Envelope at the right boundary.
    pub output: C<T>,
}

/// Accumulated light-shift phase `θ(x) = ∫ U/c dx` (trapezoid, θ = 0 at the left edge).
fn characteristic_phase<T: Real>(shift: &[T], c: T, dx: T) -> Vec<T> {
    let mut theta = Vec::with_capacity(shift.len());
    let mut acc = T::zero();
    let half = lit::<T>(0.5);
    for (i, &u) in shift.iter().enumerate() {
        if i > 0 {
            acc += half * (shift[i - 1] + u) * dx / c;
        }
        theta.push(acc);
    }
    theta
}

/// Solves `0 = (−ic∂x + U(x))E − Ω_C*(x)ψ(x)` from the left edge with `E(x_min) = boundary`.
///
/// The source is accumulated with a half weight on the current cell, which makes the atomic
/// loss rate equal the outgoing photon flux exactly on the grid.
pub fn probe_quasi_static_solve<T: Real>(
    psi: &ComplexField<T>,
    omega_c: &ComplexField<T>,
    shift: &[T],
    boundary: C<T>,
    c: T,
    grid: &SpatialGrid<T>,
) -> Result<QuasiStaticProbe<T>> {
    let n = grid.len();
    if psi.len() != n || omega_c.len() != n || shift.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: psi.len().min(omega_c.len()).min(shift.len()),
        });
    }
    let theta = characteristic_phase(shift, c, grid.dx());
    Ok(sweep_field(psi, omega_c, &theta, boundary, c, grid.dx()))
}

fn sweep_field<T: Real>(
    psi: &ComplexField<T>,
    omega_c: &ComplexField<T>,
    theta: &[T],
    boundary: C<T>,
    c: T,
    dx: T,
) -> QuasiStaticProbe<T> {
    let i_over_c = C::new(T::zero(), T::one() / c);
    let half = lit::<T>(0.5);
    let mut sum = C::new(T::zero(), T::zero());
    let mut out = Vec::with_capacity(psi.len());
    for i in 0..psi.len() {
        let rot = C::from_polar(T::one(), theta[i]);
        let s = rot * omega_c[i].conj() * psi[i] * dx;
        out.push(rot.conj() * (boundary + i_over_c * (sum + s * half)));
        sum += s;
    }
    let last = theta.last().copied().unwrap_or(T::zero());
    QuasiStaticProbe {
        field: ComplexField::from_values(out),
        output: C::from_polar(T::one(), -last) * (boundary + i_over_c * sum),
    }
}

/// One Crank–Nicolson step of `u̇ = iΩ_C E[u]` with E from the quasi-static sweep.
/// Returns the midpoint state and its output amplitude; `u` is overwritten with the new state.
fn crank_nicolson_sweep<T: Real>(
    u: &mut ComplexField<T>,
    omega_c: &ComplexField<T>,
    theta: &[T],
    boundary: C<T>,
    c: T,
    dx: T,
    dt: T,
) -> (ComplexField<T>, C<T>) {
    let half_dt = dt * lit::<T>(0.5);
    let i = C::new(T::zero(), T::one());
    let mut sum = C::new(T::zero(), T::zero());
    let mut mid = Vec::with_capacity(u.len());
    for j in 0..u.len() {
        let om = omega_c[j];
        let rot_back = C::from_polar(T::one(), -theta[j]);
        let rhs = u[j] + (i * om * rot_back * boundary - om * rot_back * sum.unscale(c)) * half_dt;
        let diag = T::one() + half_dt * dx * om.norm_sqr() / (lit::<T>(2.0) * c);
        let m = rhs.unscale(diag);
        sum += rot_back.conj() * om.conj() * m * dx;
        mid.push(m);
    }
    let two = lit::<T>(2.0);
    for (uj, mj) in u.values_mut().iter_mut().zip(&mid) {
        *uj = *mj * two - *uj;
    }
    let last = theta.last().copied().unwrap_or(T::zero());
    let output =
        C::from_polar(T::one(), -last) * (boundary + C::new(T::zero(), T::one() / c) * sum);
    (ComplexField::from_values(mid), output)
}

/// `exp(−i H dt)` for `H = [[0, −Ω], [−Ω*, U]]` applied to `(ψ, E)`.
fn local_rotation<T: Real>(psi: C<T>, e: C<T>, omega: C<T>, shift: T, dt: T) -> (C<T>, C<T>) {
    let half_u = shift * lit::<T>(0.5);
    let w = (half_u * half_u + omega.norm_sqr()).sqrt();
    let global = C::from_polar(T::one(), -half_u * dt);
    if w == T::zero() {
        return (psi * global, e * global);
    }
    let (s, co) = (w * dt).sin_cos();
    let s_over_w = s / w;
    let mi = C::new(T::zero(), -s_over_w);
    // Traceless part: [[−U/2, −Ω], [−Ω*, U/2]].
    let new_psi = psi * co + mi * (psi * (-half_u) - omega * e);
    let new_e = e * co + mi * (-(omega.conj() * psi) + e * half_u);
    (new_psi * global, new_e * global)
}

/// Read-only view passed to observers.
pub struct Snapshot<'a, T: Real> {
    pub state: &'a FieldState<T>,
    pub ledger: &'a FluxLedger<T>,
    pub history: &'a OutputHistory<T>,
    pub grid: &'a SpatialGrid<T>,
    pub moments: &'a InputMoments<T>,
    pub dynamics: &'a Dynamics<T>,
    pub step: u64,
}

pub struct Propagator<T: Real> {
    grid: SpatialGrid<T>,
    dynamics: Dynamics<T>,
    moments: InputMoments<T>,
    cfg: StepConfig<T>,
    probe_amplitude: T,
    atom_half: Vec<C<T>>,
    atom_full: Vec<C<T>>,
    cond_half: Vec<C<T>>,
    cond_full: Vec<C<T>>,
    probe_half: Vec<C<T>>,
    probe_full: Vec<C<T>>,
    trap: Vec<T>,
    mask: Option<Vec<T>>,
    injection: Vec<T>,
    /// `√(c_sim/c)` in ScaledC mode, 1 otherwise.
    coupling_scale: T,
    probe_speed: T,
    detect_index: usize,
    reference_index: usize,
    ledger: FluxLedger<T>,
    history: OutputHistory<T>,
}

impl<T: Real> Propagator<T> {
    pub fn new(
        grid: SpatialGrid<T>,
        dynamics: Dynamics<T>,
        moments: InputMoments<T>,
        cfg: StepConfig<T>,
        probe_amplitude: T,
    ) -> Result<Self> {
        cfg.validate(&grid)?;
        let dt = cfg.dt;
        let half = dt * lit::<T>(0.5);
        let kin = cfg.kinetic;
        let d = dynamics;
        let atom_freq = |k: T| {
            let kinetic = if kin {
                d.v_atom * k + d.hbar_over_m * k * k / lit(2.0)
            } else {
                T::zero()
            };
            kinetic + d.two_photon_detuning
        };
        let cond_freq = |k: T| {
            if kin {
                d.hbar_over_m * k * k / lit(2.0)
            } else {
                T::zero()
            }
        };
        let (probe_speed, coupling_scale) = match cfg.probe_mode {
            ProbeMode::QuasiStatic => (d.c_light, T::one()),
            ProbeMode::ScaledC { c_sim } => {
                let scale = if cfg.coupling_override.is_some() {
                    T::one()
                } else {
                    (c_sim / d.c_light).sqrt()
                };
                (c_sim, scale)
            }
        };
        let probe_freq = |k: T| if kin { probe_speed * k } else { T::zero() };
        let table = |f: &dyn Fn(T) -> T, tau: T| -> Vec<C<T>> {
            grid.k_values()
                .iter()
                .map(|&k| C::from_polar(T::one(), -f(k) * tau))
                .collect()
        };
        let atom_half = table(&atom_freq, half);
        let atom_full = table(&atom_freq, dt);
        let cond_half = table(&cond_freq, half);
        let cond_full = table(&cond_freq, dt);
        let probe_half = table(&probe_freq, half);
        let probe_full = table(&probe_freq, dt);
        let trap_coeff = d.trap_omega * d.trap_omega / (lit::<T>(2.0) * d.hbar_over_m);
        let trap = grid
            .positions()
            .iter()
            .map(|&x| trap_coeff * x * x)
            .collect();

        let scaled = matches!(cfg.probe_mode, ProbeMode::ScaledC { .. });
        let mask = if scaled {
            cfg.mask_fraction.map(|f| grid.absorbing_mask(f))
        } else {
            None
        };
        let edge = cfg.mask_fraction.unwrap_or(T::zero()) + lit(0.01);
        let (detect_index, injection) = if scaled {
            let x_det = grid.x_max() - edge * grid.length();
            let x_inj = grid.x_min() + edge * grid.length();
            let width = lit::<T>(2.0) * grid.dx();
            let raw: Vec<T> = grid
                .positions()
                .iter()
                .map(|&x| {
                    let z = (x - x_inj) / width;
                    (-(z * z) / lit(2.0)).exp()
                })
                .collect();
            let total = raw.iter().fold(T::zero(), |a, &b| a + b) * grid.dx();
            (
                grid.index_of(x_det),
                raw.into_iter().map(|v| v / total).collect(),
            )
        } else {
            (grid.len() - 1, Vec::new())
        };
        let reference_index = grid.index_of(cfg.reference_point);
        let history = OutputHistory {
            dt,
            ..Default::default()
        };
        Ok(Self {
            grid,
            dynamics,
            moments,
            cfg,
            probe_amplitude,
            atom_half,
            atom_full,
            cond_half,
            cond_full,
            probe_half,
            probe_full,
            trap,
            mask,
            injection,
            coupling_scale,
            probe_speed,
            detect_index,
            reference_index,
            ledger: FluxLedger::default(),
            history,
        })
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    pub fn ledger(&self) -> &FluxLedger<T> {
        &self.ledger
    }

    pub fn history(&self) -> &OutputHistory<T> {
        &self.history
    }

    pub fn config(&self) -> &StepConfig<T> {
        &self.cfg
    }

    pub fn dynamics(&self) -> &Dynamics<T> {
        &self.dynamics
    }

    pub fn moments(&self) -> &InputMoments<T> {
        &self.moments
    }

    fn scaled(&self) -> bool {
        matches!(self.cfg.probe_mode, ProbeMode::ScaledC { .. })
    }

    /// Probe envelope amplitude at the input in the units of the active probe treatment.
    fn boundary_amplitude(&self) -> T {
        self.probe_amplitude / self.coupling_scale.max(T::min_positive_value())
    }

    /// Ω_C(x) in the units of the active probe treatment.
    pub fn coupling(&self, phi: &ComplexField<T>) -> ComplexField<T> {
        match &self.cfg.coupling_override {
            Some(fixed) => fixed.clone(),
            None => phi.scaled(C::new(self.dynamics.kappa * self.coupling_scale, T::zero())),
        }
    }

    /// Probe light shift U(x) = −g₁₃²|φ|²/Δ, scaled with the probe speed.
    fn probe_shift(&self, phi: &ComplexField<T>) -> Vec<T> {
        if self.cfg.coupling_override.is_some() {
            return vec![T::zero(); self.grid.len()];
        }
        let s = -self.dynamics.light_shift * self.probe_speed / self.dynamics.c_light;
        phi.values().iter().map(|v| s * v.norm_sqr()).collect()
    }

    /// Slaves `f_e`, `h_e` to the atoms (QuasiStatic only).
    pub fn refresh_probe(&self, state: &mut FieldState<T>) -> Result<()> {
        if self.scaled() {
            return Ok(());
        }
        let omega = self.coupling(&state.phi);
        let theta = characteristic_phase(
            &self.probe_shift(&state.phi),
            self.dynamics.c_light,
            self.grid.dx(),
        );
        let zero = C::new(T::zero(), T::zero());
        let c = self.dynamics.c_light;
        state.f_e = sweep_field(&state.f_psi, &omega, &theta, zero, c, self.grid.dx()).field;
        let a = C::new(self.boundary_amplitude(), T::zero());
        state.h_e = sweep_field(&state.h_psi, &omega, &theta, a, c, self.grid.dx()).field;
        Ok(())
    }

    fn diagonal(&self, state: &mut FieldState<T>, full: bool) -> Result<()> {
        if !self.cfg.kinetic && self.dynamics.two_photon_detuning == T::zero() {
            return Ok(());
        }
        let (atom, cond, probe) = if full {
            (&self.atom_full, &self.cond_full, &self.probe_full)
        } else {
            (&self.atom_half, &self.cond_half, &self.probe_half)
        };
        self.grid.apply_spectral_table(&mut state.f_psi, atom)?;
        self.grid.apply_spectral_table(&mut state.h_psi, atom)?;
        if self.cfg.evolve_condensate && self.cfg.coupling_override.is_none() && self.cfg.kinetic {
            self.grid.apply_spectral_table(&mut state.phi, cond)?;
        }
        if self.scaled() && self.cfg.kinetic {
            self.grid.apply_spectral_table(&mut state.f_e, probe)?;
            self.grid.apply_spectral_table(&mut state.h_e, probe)?;
        }
        Ok(())
    }

    /// ⟨Ê†ψ̂⟩ at each point from the mode functions.
    fn correlation(
        &self,
        fe: &ComplexField<T>,
        fpsi: &ComplexField<T>,
        he: &ComplexField<T>,
        hpsi: &ComplexField<T>,
    ) -> Vec<C<T>> {
        let m = &self.moments;
        let cross_ab = m.cross();
        let cross_ba = cross_ab.conj();
        (0..self.grid.len())
            .map(|i| {
                fe[i].conj() * fpsi[i] * m.a.n
                    + he[i].conj() * hpsi[i] * m.b.n
                    + fe[i].conj() * hpsi[i] * cross_ab
                    + he[i].conj() * fpsi[i] * cross_ba
            })
            .collect()
    }

    /// ⟨Ê†Ê⟩ at each point.
    fn probe_density(&self, fe: &ComplexField<T>, he: &ComplexField<T>) -> Vec<T> {
        let m = &self.moments;
        (0..self.grid.len())
            .map(|i| fe[i].norm_sqr() * m.a.n + he[i].norm_sqr() * m.b.n)
            .collect()
    }

    /// Condensate update over `tau`: `φ ← e^{−iWτ}φ + τ e^{−iWτ/2} iκ⟨E†ψ⟩`.
    fn condensate_update(
        &self,
        phi: &ComplexField<T>,
        corr: &[C<T>],
        probe_density: &[T],
        tau: T,
    ) -> ComplexField<T> {
        let k = self.dynamics.kappa * self.coupling_scale;
        // Scaled probe amplitudes carry a factor 1/coupling_scale, so ⟨E†E⟩ is rescaled back.
        let shift_coeff = self.dynamics.light_shift * self.coupling_scale * self.coupling_scale;
        let i = C::new(T::zero(), T::one());
        let half = lit::<T>(0.5);
        let vals = (0..self.grid.len())
            .map(|j| {
                let w = self.trap[j] - shift_coeff * probe_density[j];
                let rot = C::from_polar(T::one(), -w * tau);
                let rot_half = C::from_polar(T::one(), -w * tau * half);
                rot * phi[j] + rot_half * i * corr[j] * (k * tau)
            })
            .collect();
        ComplexField::from_values(vals)
    }

    fn coupling_step(&mut self, state: &mut FieldState<T>) -> Result<()> {
        if self.scaled() {
            self.coupling_step_scaled(state)
        } else {
            self.coupling_step_quasi_static(state)
        }
    }

    fn coupling_step_quasi_static(&mut self, state: &mut FieldState<T>) -> Result<()> {
        let dt = self.cfg.dt;
        let dx = self.grid.dx();
        let c = self.dynamics.c_light;
        let evolve_phi = self.cfg.evolve_condensate && self.cfg.coupling_override.is_none();
        // Predict φ at the half step for the coupling profile.
        let phi_mid = if evolve_phi {
            self.refresh_probe(state)?;
            let corr = self.correlation(&state.f_e, &state.f_psi, &state.h_e, &state.h_psi);
            let dens = self.probe_density(&state.f_e, &state.h_e);
            self.condensate_update(&state.phi, &corr, &dens, dt * lit(0.5))
        } else {
            state.phi.clone()
        };
        let omega = self.coupling(&phi_mid);
        let theta = characteristic_phase(&self.probe_shift(&phi_mid), c, dx);
        let zero = C::new(T::zero(), T::zero());
        let a = C::new(self.boundary_amplitude(), T::zero());
        let (mid_f, out_f) =
            crank_nicolson_sweep(&mut state.f_psi, &omega, &theta, zero, c, dx, dt);
        let (mid_h, out_h) = crank_nicolson_sweep(&mut state.h_psi, &omega, &theta, a, c, dx, dt);

        let sqrt_c = c.sqrt();
        let (af, ah) = (out_f * sqrt_c, out_h * sqrt_c);
        self.ledger.f_out += af.norm_sqr() * dt;
        self.ledger.h_out += ah.norm_sqr() * dt;
        self.ledger.h_in += a.norm_sqr() * c * dt;
        self.history.times.push(state.t + dt * lit(0.5));
        self.history.f_out.push(af);
        self.history.h_out.push(ah);

        if evolve_phi {
            let ef = sweep_field(&mid_f, &omega, &theta, zero, c, dx).field;
            let eh = sweep_field(&mid_h, &omega, &theta, a, c, dx).field;
            let corr = self.correlation(&ef, &mid_f, &eh, &mid_h);
            let dens = self.probe_density(&ef, &eh);
            state.phi = self.condensate_update(&state.phi, &corr, &dens, dt);
        }
        Ok(())
    }

    fn coupling_step_scaled(&mut self, state: &mut FieldState<T>) -> Result<()> {
        let dt = self.cfg.dt;
        let dx = self.grid.dx();
        let evolve_phi = self.cfg.evolve_condensate && self.cfg.coupling_override.is_none();
        let phi_mid = if evolve_phi {
            let corr = self.correlation(&state.f_e, &state.f_psi, &state.h_e, &state.h_psi);
            let dens = self.probe_density(&state.f_e, &state.h_e);
            self.condensate_update(&state.phi, &corr, &dens, dt * lit(0.5))
        } else {
            state.phi.clone()
        };
        let omega = self.coupling(&phi_mid);
        let shift = self.probe_shift(&phi_mid);
        let old = if evolve_phi {
            Some((
                state.f_e.clone(),
                state.f_psi.clone(),
                state.h_e.clone(),
                state.h_psi.clone(),
            ))
        } else {
            None
        };
        for j in 0..self.grid.len() {
            let (p, e) = local_rotation(state.f_psi[j], state.f_e[j], omega[j], shift[j], dt);
            state.f_psi[j] = p;
            state.f_e[j] = e;
            let (p, e) = local_rotation(state.h_psi[j], state.h_e[j], omega[j], shift[j], dt);
            state.h_psi[j] = p;
            state.h_e[j] = e;
        }
        if let Some((fe0, fp0, he0, hp0)) = old {
            let avg = |a: &ComplexField<T>, b: &ComplexField<T>| {
                a.combine(C::new(lit(0.5), T::zero()), b, C::new(lit(0.5), T::zero()))
            };
            let fe = avg(&fe0, &state.f_e)?;
            let fp = avg(&fp0, &state.f_psi)?;
            let he = avg(&he0, &state.h_e)?;
            let hp = avg(&hp0, &state.h_psi)?;
            let corr = self.correlation(&fe, &fp, &he, &hp);
            let dens = self.probe_density(&fe, &he);
            state.phi = self.condensate_update(&state.phi, &corr, &dens, dt);
        }

        // Probe injection for the b̂₀ pair.
        let amp = self.boundary_amplitude();
        if amp != T::zero() && !self.injection.is_empty() {
            let before = state.h_e.norm_sqr(&self.grid);
            let s = dt * self.probe_speed * amp;
            for (v, g) in state.h_e.values_mut().iter_mut().zip(&self.injection) {
                *v += C::new(s * *g, T::zero());
            }
            self.ledger.h_in += state.h_e.norm_sqr(&self.grid) - before;
        }

        let sqrt_c = self.probe_speed.sqrt();
        let (af, ah) = (
            state.f_e[self.detect_index] * sqrt_c,
            state.h_e[self.detect_index] * sqrt_c,
        );
        self.history.times.push(state.t + dt * lit(0.5));
        self.history.f_out.push(af);
        self.history.h_out.push(ah);

        if let Some(mask) = &self.mask {
            let mut lost_f = T::zero();
            let mut lost_h = T::zero();
            for (j, &m) in mask.iter().enumerate() {
                if m < T::one() {
                    let keep = m;
                    let f = state.f_e[j];
                    let h = state.h_e[j];
                    lost_f += f.norm_sqr() * (T::one() - keep * keep);
                    lost_h += h.norm_sqr() * (T::one() - keep * keep);
                    state.f_e[j] = f * keep;
                    state.h_e[j] = h * keep;
                }
            }
            self.ledger.f_out += lost_f * dx;
            self.ledger.h_out += lost_h * dx;
        }
        Ok(())
    }

    fn record_beam_flux(&mut self, state: &FieldState<T>) {
        let n = self.grid.len();
        let i = self.reference_index.clamp(1, n - 2);
        let u = state.f_psi[i];
        let du = (state.f_psi[i + 1] - state.f_psi[i - 1]).unscale(lit::<T>(2.0) * self.grid.dx());
        let flux =
            self.dynamics.v_atom * u.norm_sqr() + self.dynamics.hbar_over_m * (u.conj() * du).im;
        self.history.beam_flux.push(flux);
    }

    fn check_finite(&self, state: &FieldState<T>) -> Result<()> {
        for (name, f) in state.named_fields() {
            if !f.is_finite() {
                return Err(Error::Divergence {
                    field: name,
                    step: self.ledger.steps,
                });
            }
        }
        Ok(())
    }

    /// Advances `state` by one time step.
    pub fn step(&mut self, state: &mut FieldState<T>) -> Result<()> {
        self.diagonal(state, false)?;
        self.coupling_step(state)?;
        self.diagonal(state, false)?;
        self.finish_step(state)
    }

    fn finish_step(&mut self, state: &mut FieldState<T>) -> Result<()> {
        state.t += self.cfg.dt;
        self.ledger.steps += 1;
        self.record_beam_flux(state);
        self.check_finite(state)
    }

    /// Evolves to `t_final`, calling `observer` every `record_every` steps and after the last.
    /// Consecutive half steps of the diagonal part are merged between observations.
    pub fn run<F>(&mut self, state: &mut FieldState<T>, t_final: T, mut observer: F) -> Result<()>
    where
        F: FnMut(&Snapshot<'_, T>) -> Result<()>,
    {
        let remaining = (t_final - state.t) / self.cfg.dt;
        if !(remaining > lit(1e-9)) {
            return Ok(());
        }
        let n_steps = remaining.round().to_u64().unwrap_or(0).max(1);
        self.refresh_probe(state)?;
        let mut pending = false;
        for k in 1..=n_steps {
            if !pending {
                self.diagonal(state, false)?;
            }
            self.coupling_step(state)?;
            let observe = k % self.cfg.record_every as u64 == 0 || k == n_steps;
            if observe {
                self.diagonal(state, false)?;
                pending = false;
            } else {
                self.diagonal(state, true)?;
                pending = true;
            }
            state.t += self.cfg.dt;
            self.ledger.steps += 1;
            if observe {
                self.refresh_probe(state)?;
            }
            // Flux is only meaningful on synchronised states; between observations the beam
            // is a half step ahead, which shifts the sample time by dt/2.
            self.record_beam_flux(state);
            if observe {
                self.check_finite(state)?;
                let snap = Snapshot {
                    state,
                    ledger: &self.ledger,
                    history: &self.history,
                    grid: &self.grid,
                    moments: &self.moments,
                    dynamics: &self.dynamics,
                    step: self.ledger.steps,
                };
                observer(&snap)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C<f64> {
        C::new(re, 0.0)
    }

    #[test]
    fn quasi_static_trivial_cases() {
        let g = SpatialGrid::new(-1e-4, 1e-4, 256).unwrap();
        let zero = ComplexField::zeros(g.len());
        let om = ComplexField::from_fn(&g, |_| c(5.0));
        let shift = vec![0.0; g.len()];
        let p = probe_quasi_static_solve(&zero, &om, &shift, c(0.0), 3e8, &g).unwrap();
        assert_eq!(p.field.max_abs(), 0.0);
        let p = probe_quasi_static_solve(&zero, &om, &shift, c(0.7), 3e8, &g).unwrap();
        assert!(p
            .field
            .values()
            .iter()
            .all(|v| (*v - c(0.7)).norm() < 1e-15));
    }

    #[test]
    fn quasi_static_point_source_gives_step() {
        let g = SpatialGrid::new(-1e-4, 1e-4, 256).unwrap();
        let i0 = 100;
        let weight = 2.5e-3;
        let mut psi = ComplexField::zeros(g.len());
        psi[i0] = c(weight / g.dx());
        let om = ComplexField::from_fn(&g, |x| C::new(3.0 + x * 1e4, 1.0));
        let light = 3e8;
        let p =
            probe_quasi_static_solve(&psi, &om, &vec![0.0; g.len()], c(0.0), light, &g).unwrap();
        let expected = C::new(0.0, 1.0 / light) * om[i0].conj() * weight;
        for i in 0..g.len() {
            let want = if i < i0 {
                c(0.0)
            } else if i == i0 {
                expected * 0.5
            } else {
                expected
            };
            assert!((p.field[i] - want).norm() < 1e-12 * expected.norm());
        }
        assert!((p.output - expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn local_rotation_is_unitary_and_matches_rabi() {
        let om = C::new(0.6, 0.8) * 2.0;
        let (p, e) = local_rotation(c(1.0), c(0.0), om, 0.0, 0.3);
        assert!(((p.norm_sqr() + e.norm_sqr()) - 1.0).abs() < 1e-14);
        assert!((p.norm_sqr() - (2.0f64 * 0.3).cos().powi(2)).abs() < 1e-14);
        let (p, e) = local_rotation(C::new(0.3, 0.1), C::new(-0.2, 0.5), om, 1.7, 0.9);
        let n0 = 0.1 + 0.29;
        assert!(((p.norm_sqr() + e.norm_sqr()) - n0).abs() < 1e-14);
    }

    #[test]
    fn cfl_is_enforced() {
        let g = SpatialGrid::new(-1e-4, 1e-4, 256).unwrap();
        let cfg = StepConfig::scaled_c(1.0, 1.0);
        assert!(cfg.validate(&g).is_err());
        let cfg = StepConfig::scaled_c(g.dx() / 2.0, 1.0);
        assert!(cfg.validate(&g).is_ok());
        let mut bad = StepConfig::<f64>::quasi_static(-1.0);
        assert!(bad.validate(&g).is_err());
        bad.dt = 1e-3;
        bad.record_every = 0;
        assert!(bad.validate(&g).is_err());
    }
}
