//! Named end-to-end runs and the files they write.
//!
//! | scenario       | what it runs                                                        |
//! |----------------|---------------------------------------------------------------------|
//! | `pulsed`       | Gaussian atom pulse crossing the condensate, t ∈ [0, 110 ms]        |
//! | `continuous`   | flat-top beam; t = 0 when the leading ramp reaches the condensate   |
//! | `free`         | pulsed input with the coupling switched off                         |
//! | `rabi_control` | uniform fixed coupling, no transport: two-mode Rabi oscillation     |

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::config::{Calibration, Config, ProbeInput};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid};
use crate::loss::{apply_beam_splitter_loss, spontaneous_loss, ExcitedPopulation, LossEstimate};
use crate::moments::{make_squeezed_input_moments, squeezing_db_to_r, InputMoments, ModeMoments};
use crate::observables::{
    g2_local, mode_coefficients, number_tallies, quadrature_variance, ObservableRecord,
    QuadratureResult,
};
use crate::propagator::{Dynamics, ProbeMode, Propagator, StepConfig};
use crate::state::{
    flat_top_mode, make_continuous_initial_state, make_pulsed_initial_state, Background, BeamShape,
    FieldState, ModeFunction, PulseShape,
};

type C = Complex<f64>;
type Record = ObservableRecord<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Pulsed,
    Continuous,
    Free,
    RabiControl,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::Pulsed,
        ScenarioName::Continuous,
        ScenarioName::Free,
        ScenarioName::RabiControl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Pulsed => "pulsed",
            ScenarioName::Continuous => "continuous",
            ScenarioName::Free => "free",
            ScenarioName::RabiControl => "rabi_control",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioName::Pulsed => "squeezed atom-laser pulse incoupled into the condensate",
            ScenarioName::Continuous => "continuous squeezed atom-laser beam, steady-state readout",
            ScenarioName::Free => "pulsed input with the Raman coupling switched off",
            ScenarioName::RabiControl => {
                "uniform two-mode Rabi oscillation against the analytic solution"
            }
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scenario `{s}`; expected one of pulsed, continuous, free, rabi_control"
                ))
            })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub config: Config,
    /// Where artifacts go; `None` runs without writing files.
    pub output_dir: Option<PathBuf>,
}

/// Steady-state statistics of the continuous run over the final third of the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub t_from: f64,
    pub samples: usize,
    pub v_plus_probe: f64,
    pub v_minus_probe: f64,
    /// Mean probe output rate (photons/s).
    pub output_rate: f64,
    /// (max − min)/mean of the output rate.
    pub output_rate_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Conservation {
    /// max_t |∫(|f_ψ|²+|f_E|²) + leakage − initial|.
    pub f_pair_residual: f64,
    pub h_pair_residual: f64,
    /// |condensate growth − atoms incoupled| / atoms incoupled.
    pub condensate_vs_incoupled: f64,
    /// |atoms incoupled − photons emitted| / atoms incoupled.
    pub incoupled_vs_emitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotInfo {
    pub file: String,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: ScenarioName,
    pub quad_atom: QuadratureResult<f64>,
    pub quad_probe: QuadratureResult<f64>,
    /// Probe quadratures after the beam-splitter loss of `loss.loss_fraction`.
    pub quad_probe_with_loss: QuadratureResult<f64>,
    /// Time of maximum probe output intensity (s).
    pub peak_probe_time: Option<f64>,
    pub beam_atoms_initial: f64,
    pub atoms_incoupled: f64,
    pub photons_emitted: f64,
    pub incoupled_fraction: f64,
    /// g² of the input atom mode, g4/n².
    pub g2_input: f64,
    pub g2_atom: Option<f64>,
    pub g2_probe: Option<f64>,
    /// Largest |g2_probe − g2_input| over all defined samples.
    pub g2_probe_max_deviation: Option<f64>,
    pub min_uncertainty_product: f64,
    pub loss: Option<LossEstimate<f64>>,
    pub conservation: Conservation,
    pub steady_state: Option<SteadyState>,
    /// Centroid velocity of the beam (free scenario).
    pub measured_velocity: Option<f64>,
    /// Largest |P_probe − analytic| (rabi_control).
    pub rabi_max_error: Option<f64>,
    pub snapshots: Vec<SnapshotInfo>,
    pub steps: u64,
    pub dt: f64,
    pub wall_time: f64,
    pub calibration: Calibration,
    pub config: Config,
}

/// Everything a run produces before it is written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: RunSummary,
    pub records: Vec<Record>,
    /// Records carrying full density profiles, one per requested snapshot time.
    pub snapshots: Vec<Record>,
    pub positions: Vec<f64>,
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunSummary> {
    let mut outcome = simulate(spec.name, &spec.config)?;
    if let Some(dir) = &spec.output_dir {
        write_outputs(&mut outcome, dir)?;
    }
    Ok(outcome.summary)
}

pub fn simulate(name: ScenarioName, cfg: &Config) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    if name == ScenarioName::Free {
        cfg.g13 = Some(0.0);
    }
    let cal = cfg.calibrate()?;
    match name {
        ScenarioName::RabiControl => rabi_control(&cfg, cal),
        _ => propagate(name, &cfg, cal),
    }
}

fn probe_moments(cfg: &Config, c: f64) -> ModeMoments<f64> {
    match cfg.probe_input {
        ProbeInput::Vacuum => ModeMoments::vacuum(),
        ProbeInput::Coherent => {
            // Phase-averaged: Poissonian counts without a mean field.
            let n = cfg.probe_linear_density * c * cfg.duration;
            ModeMoments {
                mean: C::new(0.0, 0.0),
                n,
                sq: C::new(0.0, 0.0),
                g4: n * n,
            }
        }
    }
}

fn wrap_phase(p: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = p.rem_euclid(tau);
    if w > std::f64::consts::PI {
        w - tau
    } else {
        w
    }
}

fn centroid(f: &ComplexField<f64>, grid: &SpatialGrid<f64>) -> f64 {
    let (mut m0, mut m1) = (0.0, 0.0);
    for (i, v) in f.values().iter().enumerate() {
        let d = v.norm_sqr();
        m0 += d;
        m1 += d * grid.x(i);
    }
    m1 / m0
}

fn sum_sqr(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Per-window quadratures of a continuous beam: the window is treated as its own squeezed mode
/// of `n_window` atoms, of which the fraction `eff` reaches the readout.
fn window_quadrature(eff_a: f64, eff_b: f64, window: &InputMoments<f64>) -> QuadratureResult<f64> {
    let ca = C::new(eff_a.clamp(0.0, 1.0).sqrt(), 0.0);
    let cb = C::new(eff_b.clamp(0.0, 1.0 - eff_a.clamp(0.0, 1.0)).sqrt(), 0.0);
    quadrature_variance(ca, cb, window, 0.0)
}

struct Density {
    atom: Vec<f64>,
    probe: Vec<f64>,
    condensate: Vec<f64>,
}

fn densities(state: &FieldState<f64>, m: &InputMoments<f64>) -> Density {
    let pair = |f: &ComplexField<f64>, h: &ComplexField<f64>| {
        f.values()
            .iter()
            .zip(h.values())
            .map(|(a, b)| a.norm_sqr() * m.a.n + b.norm_sqr() * m.b.n)
            .collect::<Vec<_>>()
    };
    Density {
        atom: pair(&state.f_psi, &state.h_psi),
        probe: pair(&state.f_e, &state.h_e),
        condensate: state.phi.density(),
    }
}

fn propagate(name: ScenarioName, cfg: &Config, cal: Calibration) -> Result<Outcome> {
    let wall = Instant::now();
    let grid = cfg.grid()?;
    let d = cal.derived;
    let c = cal.consts.c_light;
    let v = d.v_atom;
    let dt = cal.dt;
    let continuous = name == ScenarioName::Continuous;
    let r = squeezing_db_to_r(cfg.squeezing_db);
    let probe_amplitude = 1.0 / (c * cfg.duration).sqrt();
    let bg = Background {
        n_condensate: cfg.n_condensate,
        a_ho: d.a_ho,
        probe_amplitude,
    };
    let b = probe_moments(cfg, c);

    let beam = BeamShape {
        back: cfg.beam_back,
        front: cfg.beam_front,
        ramp: cfg.ramp_length,
    };
    let (mut state, n_a, rho0) = if continuous {
        let mut s = make_continuous_initial_state(&grid, &beam, &bg)?;
        s.t = cfg.beam_front / v;
        let rho0 = flat_top_mode(&grid, &beam)
            .density()
            .into_iter()
            .fold(0.0, f64::max);
        (s, cfg.beam_linear_density / rho0, rho0)
    } else {
        let pulse = PulseShape {
            center: cfg.pulse_center,
            sigma: cfg.pulse_width,
        };
        (
            make_pulsed_initial_state(&grid, &pulse, &bg)?,
            cfg.beam_atoms,
            0.0,
        )
    };
    let a = make_squeezed_input_moments(r, n_a, cfg.squeeze_phase)?;
    let moments = InputMoments::new(a, b)?;
    // Moments of one readout window of a continuous beam.
    let t_w = cfg.readout_window;
    let window_moments = if continuous {
        let nb = match cfg.probe_input {
            ProbeInput::Vacuum => 0.0,
            ProbeInput::Coherent => cfg.probe_linear_density * c * t_w,
        };
        let wb = ModeMoments {
            n: nb,
            g4: nb * nb,
            ..ModeMoments::vacuum()
        };
        Some(InputMoments::new(
            make_squeezed_input_moments(r, cfg.beam_linear_density * v * t_w, cfg.squeeze_phase)?,
            wb,
        )?)
    } else {
        None
    };

    let dynamics = Dynamics::new(&cal.params, &cal.consts)?;
    let mut step = match cal.probe_mode {
        ProbeMode::QuasiStatic => StepConfig::quasi_static(dt),
        ProbeMode::ScaledC { c_sim } => {
            let mut s = StepConfig::scaled_c(dt, c_sim);
            s.mask_fraction = Some(cfg.mask_fraction);
            s
        }
    };
    step.record_every = ((cfg.record_interval / dt).round() as usize).max(1);
    let x_ref = -10.0 * d.a_ho;
    step.reference_point = x_ref;
    let mut prop = Propagator::new(grid.clone(), dynamics, moments, step, probe_amplitude)?;

    let t_start = state.t;
    let t_end = t_start + cfg.duration;
    let f0 = state.f_pair_norm(&grid);
    let h0 = state.h_pair_norm(&grid);
    let n_cond0 = state.condensate_atoms(&grid);
    let beam0 = number_tallies(&state, &grid, &moments).beam_atoms;
    let g2_input = a.g4 / (a.n * a.n);
    let x0 = centroid(&state.f_psi, &grid);
    let i_ref = grid.index_of(x_ref);
    let i_win = grid.index_of(x_ref - v * t_w);
    let half_w = cal.control_half_width;
    let control: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.x(i).abs() <= half_w)
        .collect();
    let mut snapshot_times = cfg.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    let mut next_snapshot = 0;

    let mut records: Vec<Record> = Vec::new();
    let mut snapshots: Vec<Record> = Vec::new();
    let mut population = ExcitedPopulation::default();
    let mut last_t = t_start;
    let mut out_peak = 0.0f64;
    let mut min_product = f64::INFINITY;
    let mut conservation = Conservation::default();
    let mut g2_dev: Option<f64> = None;
    let mut flux_seen = 0;

    prop.run(&mut state, t_end, |snap| {
        let st = snap.state;
        let g = snap.grid;
        let m = snap.moments;
        let hist = snap.history;
        let t = st.t;
        let tallies = number_tallies(st, g, m);
        let dx = g.dx();

        let (quad_atom, quad_probe, rate) = if let Some(wm) = &window_moments {
            let atom_eff = sum_sqr(&st.f_psi.values()[i_win..=i_ref]) * dx / (rho0 * v * t_w);
            let (s, e) = hist.window_since(t - t_w);
            let fw = sum_sqr(&hist.f_out[s..e]) * hist.dt;
            let hw = sum_sqr(&hist.h_out[s..e]) * hist.dt;
            let probe_eff = fw / (rho0 * v * t_w);
            let inj = probe_amplitude * probe_amplitude * c * t_w;
            let hb = if inj > 0.0 { hw / inj } else { 0.0 };
            let rate = (fw * m.a.n + hw * m.b.n) / t_w;
            (
                window_quadrature(atom_eff, 0.0, wm),
                window_quadrature(probe_eff, hb, wm),
                rate,
            )
        } else {
            let atom = match ModeFunction::matched(st.f_psi.values(), (0, g.len()), dx) {
                Some(mode) => {
                    let (ca, cb) = mode_coefficients(st.f_psi.values(), st.h_psi.values(), &mode)?;
                    quadrature_variance(ca, cb, m, 0.0)
                }
                None => QuadratureResult::vacuum(),
            };
            let probe = match ModeFunction::matched(&hist.f_out, (0, hist.len()), hist.dt) {
                Some(mode) => {
                    let (ca, cb) = mode_coefficients(&hist.f_out, &hist.h_out, &mode)?;
                    quadrature_variance(ca, cb, m, 0.0)
                }
                None => QuadratureResult::vacuum(),
            };
            let rate = match (hist.f_out.last(), hist.h_out.last()) {
                (Some(f), Some(h)) => f.norm_sqr() * m.a.n + h.norm_sqr() * m.b.n,
                _ => 0.0,
            };
            (atom, probe, rate)
        };
        min_product = min_product
            .min(quad_atom.uncertainty_product)
            .min(quad_probe.uncertainty_product);

        let dens = st.f_psi.density();
        let (i_peak, peak) = dens
            .iter()
            .cloned()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let g2_atom = g2_local(
            st.f_psi[i_peak],
            st.h_psi[i_peak],
            m,
            cfg.g2_floor * peak * m.a.n,
        );
        for (f, h) in hist.f_out.iter().zip(&hist.h_out).skip(flux_seen) {
            out_peak = out_peak.max(f.norm_sqr() * m.a.n + h.norm_sqr() * m.b.n);
        }
        flux_seen = hist.len();
        let g2_probe = match (hist.f_out.last(), hist.h_out.last()) {
            (Some(&f), Some(&h)) => g2_local(f, h, m, cfg.g2_floor * out_peak),
            _ => None,
        };
        if let Some(gp) = g2_probe {
            let dev = (gp - g2_input).abs();
            g2_dev = Some(g2_dev.map_or(dev, |d: f64| d.max(dev)));
        }

        let ledger = snap.ledger;
        let f_norm = st.f_pair_norm(g);
        let h_norm = st.h_pair_norm(g);
        let h_net = ledger.h_out - ledger.h_in;
        conservation.f_pair_residual = conservation
            .f_pair_residual
            .max((f_norm + ledger.f_out - f0).abs());
        conservation.h_pair_residual = conservation
            .h_pair_residual
            .max((h_norm + h_net - h0).abs());

        let in_window =
            |f: &ComplexField<f64>| control.iter().map(|&i| f[i].norm_sqr()).sum::<f64>() * dx;
        let beam_in_window = m.a.n * in_window(&st.f_psi) + m.b.n * in_window(&st.h_psi);
        let probe_weighted: f64 = control
            .iter()
            .map(|&i| {
                st.phi[i].norm_sqr() * (st.f_e[i].norm_sqr() * m.a.n + st.h_e[i].norm_sqr() * m.b.n)
            })
            .sum::<f64>()
            * dx;
        population.accumulate(beam_in_window, probe_weighted, t - last_t);
        last_t = t;

        let rec = Record {
            t,
            tallies,
            quad_atom,
            quad_probe,
            g2_atom,
            g2_probe,
            probe_output_rate: rate,
            photons_emitted: ledger.photons_emitted(m),
            atoms_incoupled: beam0 - tallies.beam_atoms,
            f_pair_leakage: ledger.f_out,
            h_pair_net_leakage: h_net,
            f_pair_norm: f_norm,
            h_pair_norm: h_norm,
            probe_frame_phase: wrap_phase(snap.dynamics.frame_frequency * t),
            atom_density: Vec::new(),
            probe_density: Vec::new(),
            condensate_density: Vec::new(),
        };
        let mut took_snapshot = false;
        while next_snapshot < snapshot_times.len() && snapshot_times[next_snapshot] <= t + 0.5 * dt
        {
            next_snapshot += 1;
            took_snapshot = true;
        }
        if took_snapshot {
            let dn = densities(st, m);
            let mut full = rec.clone();
            full.atom_density = dn.atom;
            full.probe_density = dn.probe;
            full.condensate_density = dn.condensate;
            snapshots.push(full);
        }
        records.push(rec);
        Ok(())
    })?;

    let beam_passed = prop.history().beam_flux.iter().sum::<f64>() * dt * moments.a.n;
    let hist = prop.history();
    let ledger = *prop.ledger();
    let last = records
        .last()
        .cloned()
        .ok_or_else(|| Error::Config("duration shorter than one time step".into()))?;

    let peak_probe_time = {
        let (mut best, mut at) = (0.0, None);
        for (i, f) in hist.f_out.iter().enumerate() {
            let p = f.norm_sqr();
            if p > best {
                best = p;
                at = Some(hist.times[i]);
            }
        }
        let delay = match cal.probe_mode {
            ProbeMode::ScaledC { c_sim } => {
                let edge = cfg.mask_fraction + 0.01;
                (grid.x_max() - edge * grid.length()) / c_sim
            }
            ProbeMode::QuasiStatic => 0.0,
        };
        at.map(|t| t - delay)
    };

    let growth = state.condensate_atoms(&grid) - n_cond0;
    let incoupled = last.atoms_incoupled;
    let emitted = ledger.photons_emitted(&moments);
    if incoupled > 1e-6 * beam0 {
        conservation.condensate_vs_incoupled = (growth - incoupled).abs() / incoupled.abs();
        conservation.incoupled_vs_emitted = (incoupled - emitted).abs() / incoupled.abs();
    }

    let n_beam = if continuous { beam_passed } else { beam0 };
    let loss = if cal.params.d13.is_some() && name != ScenarioName::Free {
        Some(spontaneous_loss(
            &population,
            n_beam,
            d.t_rabi,
            &cal.params,
            &cal.consts,
            cfg.include_probe_loss_term,
        )?)
    } else {
        None
    };
    let quad_probe_with_loss = match &loss {
        Some(l) => apply_beam_splitter_loss(&last.quad_probe, l.loss_fraction)?,
        None => last.quad_probe,
    };

    let steady_state = if continuous {
        let t_from = (t_end - cfg.duration / 3.0).max(t_start + t_w);
        let tail: Vec<&Record> = records.iter().filter(|r| r.t >= t_from).collect();
        if tail.is_empty() {
            None
        } else {
            let k = tail.len() as f64;
            let mean = |f: &dyn Fn(&Record) -> f64| tail.iter().map(|r| f(r)).sum::<f64>() / k;
            let rate = mean(&|r| r.probe_output_rate);
            let (lo, hi) = tail
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, r| {
                    (
                        acc.0.min(r.probe_output_rate),
                        acc.1.max(r.probe_output_rate),
                    )
                });
            Some(SteadyState {
                t_from,
                samples: tail.len(),
                v_plus_probe: mean(&|r| r.quad_probe.v_plus),
                v_minus_probe: mean(&|r| r.quad_probe.v_minus),
                output_rate: rate,
                output_rate_spread: if rate > 0.0 { (hi - lo) / rate } else { 0.0 },
            })
        }
    } else {
        None
    };

    let measured_velocity = (name == ScenarioName::Free)
        .then(|| (centroid(&state.f_psi, &grid) - x0) / (state.t - t_start));

    let summary = RunSummary {
        scenario: name,
        quad_atom: last.quad_atom,
        quad_probe: last.quad_probe,
        quad_probe_with_loss,
        peak_probe_time,
        beam_atoms_initial: beam0,
        atoms_incoupled: incoupled,
        photons_emitted: emitted,
        incoupled_fraction: if beam0 > 0.0 { incoupled / beam0 } else { 0.0 },
        g2_input,
        g2_atom: last.g2_atom,
        g2_probe: last.g2_probe,
        g2_probe_max_deviation: g2_dev,
        min_uncertainty_product: min_product,
        loss,
        conservation,
        steady_state,
        measured_velocity,
        rabi_max_error: None,
        snapshots: Vec::new(),
        steps: ledger.steps,
        dt,
        wall_time: wall.elapsed().as_secs_f64(),
        calibration: cal,
        config: cfg.clone(),
    };
    Ok(Outcome {
        summary,
        records,
        snapshots,
        positions: grid.positions(),
    })
}

/// Largest deviation of the probe fraction from `(Ω²/Ω_R²)sin²(Ω_R t)` over a run with step `dt`.
pub fn rabi_control_error(cfg: &Config, dt: f64) -> Result<f64> {
    let cfg = Config {
        dt: Some(dt),
        ..cfg.clone()
    };
    let cal = cfg.calibrate()?;
    Ok(rabi_control(&cfg, cal)?
        .summary
        .rabi_max_error
        .unwrap_or(0.0))
}

fn rabi_control(cfg: &Config, cal: Calibration) -> Result<Outcome> {
    let wall = Instant::now();
    let grid = cfg.grid()?;
    let d = cal.derived;
    let omega = cfg.rabi_omega.unwrap_or(d.omega_c_peak);
    let delta = cfg.rabi_detuning;
    let omega_r = (omega * omega + delta * delta / 4.0).sqrt();
    let dt = cfg.dt.unwrap_or(1e-3 / omega_r);
    let r = squeezing_db_to_r(cfg.squeezing_db);
    let a = make_squeezed_input_moments(r, cfg.beam_atoms, cfg.squeeze_phase)?;
    let moments = InputMoments::new(a, ModeMoments::vacuum())?;
    let mut state = make_pulsed_initial_state(
        &grid,
        &PulseShape {
            center: cfg.pulse_center,
            sigma: cfg.pulse_width,
        },
        &Background {
            n_condensate: cfg.n_condensate,
            a_ho: d.a_ho,
            probe_amplitude: 0.0,
        },
    )?;
    let params = crate::params::ModelParams {
        two_photon_detuning: delta,
        ..cal.params
    };
    let dynamics = Dynamics::new(&params, &cal.consts)?;
    let step = StepConfig {
        dt,
        probe_mode: ProbeMode::ScaledC { c_sim: 0.0 },
        record_every: ((cfg.record_interval / dt).round() as usize).max(1),
        kinetic: false,
        evolve_condensate: false,
        mask_fraction: None,
        coupling_override: Some(ComplexField::from_fn(&grid, |_| C::new(omega, 0.0))),
        reference_point: 0.0,
    };
    let mut prop = Propagator::new(grid.clone(), dynamics, moments, step, 0.0)?;
    let f0 = state.f_pair_norm(&grid);
    let beam0 = number_tallies(&state, &grid, &moments).beam_atoms;
    let mut records = Vec::new();
    let mut max_err = 0.0f64;
    let mut residual = 0.0f64;
    prop.run(&mut state, cfg.duration, |snap| {
        let st = snap.state;
        let g = snap.grid;
        let t = st.t;
        let p_num = st.f_e.norm_sqr(g) / f0;
        let s = (omega_r * t).sin();
        let p_exact = omega * omega / (omega_r * omega_r) * s * s;
        max_err = max_err.max((p_num - p_exact).abs());
        let f_norm = st.f_pair_norm(g);
        residual = residual.max((f_norm - f0).abs());
        let tallies = number_tallies(st, g, snap.moments);
        let quad =
            |f: &ComplexField<f64>, h: &ComplexField<f64>| -> Result<QuadratureResult<f64>> {
                Ok(
                    match ModeFunction::matched(f.values(), (0, g.len()), g.dx()) {
                        Some(mode) => {
                            let (ca, cb) = mode_coefficients(f.values(), h.values(), &mode)?;
                            quadrature_variance(ca, cb, snap.moments, 0.0)
                        }
                        None => QuadratureResult::vacuum(),
                    },
                )
            };
        records.push(Record {
            t,
            tallies,
            quad_atom: quad(&st.f_psi, &st.h_psi)?,
            quad_probe: quad(&st.f_e, &st.h_e)?,
            g2_atom: None,
            g2_probe: None,
            probe_output_rate: 0.0,
            photons_emitted: 0.0,
            atoms_incoupled: beam0 - tallies.beam_atoms,
            f_pair_leakage: 0.0,
            h_pair_net_leakage: 0.0,
            f_pair_norm: f_norm,
            h_pair_norm: st.h_pair_norm(g),
            probe_frame_phase: 0.0,
            atom_density: Vec::new(),
            probe_density: Vec::new(),
            condensate_density: Vec::new(),
        });
        Ok(())
    })?;
    let last = records
        .last()
        .cloned()
        .ok_or_else(|| Error::Config("duration shorter than one time step".into()))?;
    let min_product = records
        .iter()
        .flat_map(|r| {
            [
                r.quad_atom.uncertainty_product,
                r.quad_probe.uncertainty_product,
            ]
        })
        .fold(f64::INFINITY, f64::min);
    let summary = RunSummary {
        scenario: ScenarioName::RabiControl,
        quad_atom: last.quad_atom,
        quad_probe: last.quad_probe,
        quad_probe_with_loss: last.quad_probe,
        peak_probe_time: None,
        beam_atoms_initial: beam0,
        atoms_incoupled: last.atoms_incoupled,
        photons_emitted: 0.0,
        incoupled_fraction: last.atoms_incoupled / beam0,
        g2_input: a.g4 / (a.n * a.n),
        g2_atom: None,
        g2_probe: None,
        g2_probe_max_deviation: None,
        min_uncertainty_product: min_product,
        loss: None,
        conservation: Conservation {
            f_pair_residual: residual,
            ..Conservation::default()
        },
        steady_state: None,
        measured_velocity: None,
        rabi_max_error: Some(max_err),
        snapshots: Vec::new(),
        steps: prop.ledger().steps,
        dt,
        wall_time: wall.elapsed().as_secs_f64(),
        calibration: Calibration { dt, ..cal },
        config: cfg.clone(),
    };
    Ok(Outcome {
        summary,
        records,
        snapshots: Vec::new(),
        positions: grid.positions(),
    })
}

/// Column order of `timeseries.csv`.
pub const TIMESERIES_COLUMNS: [&str; 18] = [
    "t",
    "beam_atoms",
    "probe_photons",
    "condensate_atoms",
    "v_plus_atom",
    "v_minus_atom",
    "v_plus_probe",
    "v_minus_probe",
    "g2_atom",
    "g2_probe",
    "probe_output_rate",
    "photons_emitted",
    "atoms_incoupled",
    "f_pair_leakage",
    "h_pair_net_leakage",
    "f_pair_norm",
    "h_pair_norm",
    "probe_frame_phase",
];

/// Extra columns with the probe magnified for plotting next to the atoms: ×1000 and ×1000·c/v.
pub const DISPLAY_COLUMNS: [&str; 2] = ["probe_photons_x1000", "probe_photons_x1000_c_over_v"];

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `summary.json`, `timeseries.csv` and `snapshot_NNN.csv` into `dir`.
pub fn write_outputs(outcome: &mut Outcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg = &outcome.summary.config;
    let display = cfg.display_columns;
    let c_over_v =
        outcome.summary.calibration.consts.c_light / outcome.summary.calibration.derived.v_atom;

    let path = dir.join("timeseries.csv");
    let mut w = csv_writer(&path)?;
    let mut header: Vec<&str> = TIMESERIES_COLUMNS.to_vec();
    if display {
        header.extend(DISPLAY_COLUMNS);
    }
    w.write_record(&header)?;
    for r in &outcome.records {
        let mut row = vec![
            num(r.t),
            num(r.tallies.beam_atoms),
            num(r.tallies.probe_photons),
            num(r.tallies.condensate_atoms),
            num(r.quad_atom.v_plus),
            num(r.quad_atom.v_minus),
            num(r.quad_probe.v_plus),
            num(r.quad_probe.v_minus),
            opt(r.g2_atom),
            opt(r.g2_probe),
            num(r.probe_output_rate),
            num(r.photons_emitted),
            num(r.atoms_incoupled),
            num(r.f_pair_leakage),
            num(r.h_pair_net_leakage),
            num(r.f_pair_norm),
            num(r.h_pair_norm),
            num(r.probe_frame_phase),
        ];
        if display {
            row.push(num(1e3 * r.tallies.probe_photons));
            row.push(num(1e3 * c_over_v * r.tallies.probe_photons));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&path))?;

    let mut infos = Vec::new();
    for (k, snap) in outcome.snapshots.iter().enumerate() {
        let file = format!("snapshot_{k:03}.csv");
        let path = dir.join(&file);
        let mut w = csv_writer(&path)?;
        w.write_record(["x", "atom_density", "probe_density", "condensate_density"])?;
        for (i, x) in outcome.positions.iter().enumerate() {
            w.write_record([
                num(*x),
                num(snap.atom_density[i]),
                num(snap.probe_density[i]),
                num(snap.condensate_density[i]),
            ])?;
        }
        w.flush().map_err(io_err(&path))?;
        infos.push(SnapshotInfo { file, t: snap.t });
    }
    outcome.summary.snapshots = infos;

    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&outcome.summary)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        assert!("nope".parse::<ScenarioName>().is_err());
    }

    #[test]
    fn rabi_resonant_is_exact() {
        let cfg = Config::defaults(ScenarioName::RabiControl);
        let out = simulate(ScenarioName::RabiControl, &cfg).unwrap();
        let err = out.summary.rabi_max_error.unwrap();
        assert!(err < 1e-10, "err = {err}");
        assert!(out.summary.conservation.f_pair_residual < 1e-10);
    }

    #[test]
    fn phase_wrap() {
        assert!((wrap_phase(7.0) - (7.0 - std::f64::consts::TAU)).abs() < 1e-15);
        assert!((wrap_phase(-4.0) - (-4.0 + std::f64::consts::TAU)).abs() < 1e-15);
    }
}
