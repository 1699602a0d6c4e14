//! Flat key/value run configuration (TOML syntax, SI units) and the calibration that turns it
//! into model parameters.
//!
//! Every key is optional; missing keys take the defaults of the selected scenario. Unknown keys
//! are rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::loss::spontaneous_rate_from;
use crate::params::{
    coupling_for_transfer_angle, derive, mixing_ratio_for_loss, DerivedQuantities, ModelParams,
    PhysicalConstants, RB87_D2_DIPOLE, RB87_MASS,
};
use crate::propagator::ProbeMode;
use crate::scenario::ScenarioName;
use crate::state::condensate_ground_state;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeModeName {
    QuasiStatic,
    ScaledC,
}

impl std::str::FromStr for ProbeModeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quasistatic" => Ok(Self::QuasiStatic),
            "scaledc" => Ok(Self::ScaledC),
            other => Err(Error::invalid(
                "probe_mode",
                format!("expected `quasistatic` or `scaledc`, got `{other}`"),
            )),
        }
    }
}

/// State of the probe input mode b̂₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeInput {
    Vacuum,
    /// Weak coherent probe; represented by its phase-averaged (Poissonian) moments.
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    // Grid.
    pub x_min: f64,
    pub x_max: f64,
    pub grid_points: usize,

    // Time stepping.
    /// Time step (s). Unset: 2e-5 s for the quasi-static probe, `dx/c_sim` for the scaled one.
    pub dt: Option<f64>,
    /// Simulated time span (s).
    pub duration: f64,
    /// Interval between recorded samples (s).
    pub record_interval: f64,
    pub probe_mode: ProbeModeName,
    /// Simulation light speed (m/s) for the scaled probe. Unset: `c_sim_factor * v_atom`.
    pub c_sim: Option<f64>,
    pub c_sim_factor: f64,
    /// Fraction of the grid covered by each absorbing edge (scaled probe only).
    pub mask_fraction: f64,

    // Atom and light.
    pub atom_mass: f64,
    pub k0: f64,
    /// Raman detuning Δ (rad/s).
    pub delta: f64,
    /// Transition dipole moment d₁₃ (C·m).
    pub d13: f64,
    /// Trap angular frequency ω_t (rad/s).
    pub trap_omega: f64,
    pub n_condensate: f64,
    pub two_photon_detuning: f64,
    /// Target spontaneous loss fraction used to calibrate Ω₂₃/Δ.
    pub loss_target: f64,
    /// Explicit Ω₂₃ (rad/s); overrides the loss calibration.
    pub omega23: Option<f64>,
    /// Transfer angle (rad) used to calibrate the coupling strength.
    pub transfer_angle: f64,
    /// Explicit g₁₃; overrides the transfer-angle calibration.
    pub g13: Option<f64>,
    /// Half width (m) of the control-beam region for the excited-population integral.
    /// Unset: a_ho/2, a transit time of T_Rabi/4.
    pub control_half_width: Option<f64>,
    pub include_probe_loss_term: bool,

    // Input state.
    pub squeezing_db: f64,
    pub squeeze_phase: f64,
    /// Mean atom number of the pulse.
    pub beam_atoms: f64,
    pub pulse_center: f64,
    pub pulse_width: f64,
    /// Continuous beam: back and front ramp mid-points and ramp length (m).
    pub beam_back: f64,
    pub beam_front: f64,
    pub ramp_length: f64,
    /// Continuous beam linear density (atoms/m).
    pub beam_linear_density: f64,
    pub probe_input: ProbeInput,
    /// Probe linear photon density (m⁻¹).
    pub probe_linear_density: f64,

    // Readout.
    /// Trailing readout window (s) for the continuous beam.
    pub readout_window: f64,
    /// g² is undefined where the density is below this fraction of its peak.
    pub g2_floor: f64,
    /// Times (s) at which full density profiles are written.
    pub snapshot_times: Vec<f64>,
    pub display_columns: bool,

    // Two-mode control.
    /// Uniform coupling (rad/s). Unset: 2π/T_Rabi.
    pub rabi_omega: Option<f64>,
    pub rabi_detuning: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            x_min: -1.5e-3,
            x_max: 1.5e-3,
            grid_points: 4096,
            dt: None,
            duration: 0.11,
            record_interval: 5e-4,
            probe_mode: ProbeModeName::QuasiStatic,
            c_sim: None,
            c_sim_factor: 100.0,
            mask_fraction: 0.05,
            atom_mass: RB87_MASS,
            k0: 8e6,
            delta: 2.0 * PI * 1e10,
            d13: RB87_D2_DIPOLE,
            trap_omega: 2.0 * PI * 5.0,
            n_condensate: 1e6,
            two_photon_detuning: 0.0,
            loss_target: 0.04,
            omega23: None,
            transfer_angle: PI / 2.0,
            g13: None,
            control_half_width: None,
            include_probe_loss_term: false,
            squeezing_db: 4.0,
            squeeze_phase: 0.0,
            beam_atoms: 5e3,
            pulse_center: -600e-6,
            pulse_width: 100e-6,
            beam_back: -1.4e-3,
            beam_front: -0.3e-3,
            ramp_length: 50e-6,
            beam_linear_density: 1.07e7,
            probe_input: ProbeInput::Vacuum,
            probe_linear_density: 1.9e-7,
            readout_window: 5e-3,
            g2_floor: 1e-6,
            snapshot_times: Vec::new(),
            display_columns: false,
            rabi_omega: None,
            rabi_detuning: 0.0,
        }
    }
}

/// Parameters derived from a validated [`Config`].
#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub consts: PhysicalConstants<f64>,
    pub params: ModelParams<f64>,
    pub derived: DerivedQuantities<f64>,
    /// Ω₂₃/Δ.
    pub mixing_ratio: f64,
    /// κ = Ω₂₃g₁₃/Δ.
    pub kappa: f64,
    pub dt: f64,
    pub probe_mode: ProbeMode<f64>,
    pub control_half_width: f64,
}

impl Config {
    pub fn defaults(scenario: ScenarioName) -> Self {
        let base = Self::default();
        match scenario {
            ScenarioName::Pulsed => base,
            ScenarioName::Continuous => Self {
                duration: 0.066,
                ..base
            },
            ScenarioName::Free => Self {
                duration: 0.05,
                ..base
            },
            ScenarioName::RabiControl => Self {
                grid_points: 256,
                record_interval: 1e-5,
                duration: 1.65e-3,
                ..base
            },
        }
    }

    /// Parses `text` on top of the defaults for `scenario`.
    pub fn from_toml_str(text: &str, scenario: ScenarioName) -> Result<Self> {
        let overrides: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut table = toml::Table::try_from(Self::defaults(scenario))
            .map_err(|e| Error::Serialize(e.to_string()))?;
        for (k, v) in overrides {
            // `duration = 1` should mean 1.0 for float keys.
            let v = match (table.get(&k), v) {
                (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => {
                    toml::Value::Float(i as f64)
                }
                (_, v) => v,
            };
            table.insert(k, v);
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, scenario: ScenarioName) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, scenario)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be non-negative, got {v}"),
                ))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be finite"))
            }
        };
        finite("x_min", self.x_min)?;
        finite("x_max", self.x_max)?;
        if self.x_max <= self.x_min {
            return Err(Error::invalid("x_max", "must exceed x_min"));
        }
        if self.grid_points < 2 || !self.grid_points.is_power_of_two() {
            return Err(Error::invalid(
                "grid_points",
                format!("must be a power of two >= 2, got {}", self.grid_points),
            ));
        }
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        positive("duration", self.duration)?;
        positive("record_interval", self.record_interval)?;
        if let Some(c) = self.c_sim {
            positive("c_sim", c)?;
        }
        positive("c_sim_factor", self.c_sim_factor)?;
        if !(0.0..0.5).contains(&self.mask_fraction) {
            return Err(Error::invalid("mask_fraction", "must lie in [0, 0.5)"));
        }
        positive("atom_mass", self.atom_mass)?;
        positive("k0", self.k0)?;
        positive("delta", self.delta)?;
        non_negative("d13", self.d13)?;
        positive("trap_omega", self.trap_omega)?;
        positive("n_condensate", self.n_condensate)?;
        finite("two_photon_detuning", self.two_photon_detuning)?;
        if !(self.loss_target > 0.0 && self.loss_target < 1.0) {
            return Err(Error::invalid("loss_target", "must lie in (0, 1)"));
        }
        if let Some(w) = self.omega23 {
            positive("omega23", w)?;
        }
        non_negative("transfer_angle", self.transfer_angle)?;
        if let Some(g) = self.g13 {
            finite("g13", g)?;
        }
        if let Some(w) = self.control_half_width {
            positive("control_half_width", w)?;
        }
        non_negative("squeezing_db", self.squeezing_db)?;
        finite("squeeze_phase", self.squeeze_phase)?;
        non_negative("beam_atoms", self.beam_atoms)?;
        finite("pulse_center", self.pulse_center)?;
        positive("pulse_width", self.pulse_width)?;
        if self.beam_front <= self.beam_back {
            return Err(Error::invalid("beam_front", "must lie ahead of beam_back"));
        }
        positive("ramp_length", self.ramp_length)?;
        non_negative("beam_linear_density", self.beam_linear_density)?;
        non_negative("probe_linear_density", self.probe_linear_density)?;
        positive("readout_window", self.readout_window)?;
        non_negative("g2_floor", self.g2_floor)?;
        if self.snapshot_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("snapshot_times", "must be finite"));
        }
        if let Some(w) = self.rabi_omega {
            positive("rabi_omega", w)?;
        }
        finite("rabi_detuning", self.rabi_detuning)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<SpatialGrid<f64>> {
        SpatialGrid::new(self.x_min, self.x_max, self.grid_points)
    }

    pub fn constants(&self) -> PhysicalConstants<f64> {
        PhysicalConstants {
            atom_mass: self.atom_mass,
            ..PhysicalConstants::rubidium87()
        }
    }

    /// Fixes Ω₂₃/Δ from the loss target and κ from the transfer angle, then g₁₃ = κΔ/Ω₂₃.
    pub fn calibrate(&self) -> Result<Calibration> {
        self.validate()?;
        let consts = self.constants();
        let grid = self.grid()?;
        let mut params = ModelParams {
            k0: self.k0,
            delta: self.delta,
            omega23: 0.0,
            g13: 0.0,
            d13: Some(self.d13),
            trap_omega: self.trap_omega,
            n_condensate: self.n_condensate,
            two_photon_detuning: self.two_photon_detuning,
        };
        let derived = derive(&params, &consts)?;
        let mixing_ratio = match self.omega23 {
            Some(w) => w / self.delta,
            None => {
                let gamma = spontaneous_rate_from(self.k0, self.d13, &consts);
                mixing_ratio_for_loss(self.loss_target, gamma, derived.t_rabi)
                    .map_err(|e| Error::invalid("loss_target", e.to_string()))?
            }
        };
        params.omega23 = mixing_ratio * self.delta;
        let kappa = match self.g13 {
            Some(g) => mixing_ratio * g,
            None => {
                let phi = condensate_ground_state(&grid, derived.a_ho, self.n_condensate);
                coupling_for_transfer_angle(
                    &phi,
                    &grid,
                    derived.v_atom,
                    consts.c_light,
                    self.transfer_angle,
                )?
            }
        };
        params.g13 = if mixing_ratio == 0.0 {
            0.0
        } else {
            kappa / mixing_ratio
        };
        let probe_mode = match self.probe_mode {
            ProbeModeName::QuasiStatic => ProbeMode::QuasiStatic,
            ProbeModeName::ScaledC => ProbeMode::ScaledC {
                c_sim: self.c_sim.unwrap_or(self.c_sim_factor * derived.v_atom),
            },
        };
        let dt = match (self.dt, probe_mode) {
            (Some(dt), _) => dt,
            (None, ProbeMode::QuasiStatic) => 2e-5,
            (None, ProbeMode::ScaledC { c_sim }) => grid.dx() / c_sim,
        };
        if let ProbeMode::ScaledC { c_sim } = probe_mode {
            if c_sim * dt > grid.dx() * (1.0 + 1e-9) {
                return Err(Error::invalid(
                    "dt",
                    format!(
                        "scaled probe needs c_sim*dt <= dx: {c_sim:.4e} m/s * {dt:.3e} s > {:.3e} m",
                        grid.dx()
                    ),
                ));
            }
        }
        Ok(Calibration {
            consts,
            params,
            derived,
            mixing_ratio,
            kappa,
            dt,
            probe_mode,
            control_half_width: self.control_half_width.unwrap_or(derived.a_ho / 2.0),
        })
    }
}
