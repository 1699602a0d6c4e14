use incoupler::config::Config;
use incoupler::moments::{InputMoments, ModeMoments};
use incoupler::propagator::{Dynamics, Propagator, StepConfig};
use incoupler::scenario::{rabi_control_error, simulate, write_outputs, ScenarioName};
use incoupler::state::{make_continuous_initial_state, Background, BeamShape};

fn free_config() -> Config {
    Config {
        duration: 0.02,
        record_interval: 2e-3,
        ..Config::defaults(ScenarioName::Free)
    }
}

#[test]
fn free_pulse_moves_at_recoil_velocity() {
    let out = simulate(ScenarioName::Free, &free_config()).unwrap();
    let v = out.summary.calibration.derived.v_atom;
    let measured = out.summary.measured_velocity.unwrap();
    assert!((measured / v - 1.0).abs() < 5e-3, "{measured} vs {v}");
}

#[test]
fn free_run_keeps_vacuum_probe_and_tallies() {
    let out = simulate(ScenarioName::Free, &free_config()).unwrap();
    let first = &out.records[0];
    for r in &out.records {
        assert!((r.quad_probe.v_plus - 1.0).abs() < 1e-8);
        assert!((r.quad_probe.v_minus - 1.0).abs() < 1e-8);
        assert!(
            (r.tallies.beam_atoms - first.tallies.beam_atoms).abs()
                < 1e-10 * first.tallies.beam_atoms
        );
        assert!(r.tallies.probe_photons < 1e-10);
        assert!(
            (r.tallies.condensate_atoms - first.tallies.condensate_atoms).abs()
                < 1e-10 * first.tallies.condensate_atoms
        );
    }
}

/// Position where the leading ramp falls through half the plateau density.
fn front_position(density: &[f64], x: &[f64], plateau: f64) -> f64 {
    let i = (1..density.len())
        .rev()
        .find(|&i| density[i - 1] >= plateau / 2.0 && density[i] < plateau / 2.0)
        .unwrap();
    let (d0, d1) = (density[i - 1], density[i]);
    x[i - 1] + (x[i] - x[i - 1]) * (d0 - plateau / 2.0) / (d0 - d1)
}

#[test]
fn continuous_front_moves_at_recoil_velocity() {
    let cfg = Config {
        g13: Some(0.0),
        ..Config::defaults(ScenarioName::Continuous)
    };
    let cal = cfg.calibrate().unwrap();
    let grid = cfg.grid().unwrap();
    let beam = BeamShape {
        back: cfg.beam_back,
        front: cfg.beam_front,
        ramp: cfg.ramp_length,
    };
    let bg = Background {
        n_condensate: cfg.n_condensate,
        a_ho: cal.derived.a_ho,
        probe_amplitude: 0.0,
    };
    let mut state = make_continuous_initial_state(&grid, &beam, &bg).unwrap();
    let x = grid.positions();
    let plateau = state.f_psi.density().into_iter().fold(0.0, f64::max);
    let x0 = front_position(&state.f_psi.density(), &x, plateau);
    let moments = InputMoments::new(ModeMoments::coherent(1.0), ModeMoments::vacuum()).unwrap();
    let dynamics = Dynamics::new(&cal.params, &cal.consts).unwrap();
    let mut prop = Propagator::new(
        grid.clone(),
        dynamics,
        moments,
        StepConfig::quasi_static(2e-4),
        0.0,
    )
    .unwrap();
    let t = 0.04;
    prop.run(&mut state, t, |_| Ok(())).unwrap();
    let x1 = front_position(&state.f_psi.density(), &x, plateau);
    let v = (x1 - x0) / t;
    assert!(
        (v / cal.derived.v_atom - 1.0).abs() < 0.02,
        "front velocity {v}"
    );
}

#[test]
fn rabi_control_converges_at_second_order() {
    let mut cfg = Config::defaults(ScenarioName::RabiControl);
    let omega = cfg.calibrate().unwrap().derived.omega_c_peak;
    cfg.rabi_detuning = omega / 2.0;
    let coarse = rabi_control_error(&cfg, 4e-3 / omega).unwrap();
    let fine = rabi_control_error(&cfg, 2e-3 / omega).unwrap();
    let order = (coarse / fine).log2();
    assert!(order >= 1.9, "order {order}");
    assert!(rabi_control_error(&cfg, 1e-3 / omega).unwrap() < 1e-6);
}

fn short_pulsed() -> Config {
    Config {
        grid_points: 1024,
        duration: 0.01,
        dt: Some(1e-4),
        record_interval: 1e-3,
        snapshot_times: vec![0.005],
        display_columns: true,
        ..Config::default()
    }
}

#[test]
fn outputs_are_deterministic() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let mut out = simulate(ScenarioName::Pulsed, &short_pulsed()).unwrap();
        write_outputs(&mut out, d.path()).unwrap();
    }
    for file in ["timeseries.csv", "snapshot_000.csv"] {
        let a = std::fs::read(dirs[0].path().join(file)).unwrap();
        let b = std::fs::read(dirs[1].path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let text = std::fs::read_to_string(dirs[0].path().join("timeseries.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with(
        "t,beam_atoms,probe_photons,condensate_atoms,v_plus_atom,v_minus_atom,v_plus_probe,v_minus_probe,g2_atom,g2_probe"
    ));
    assert!(header.ends_with("probe_photons_x1000,probe_photons_x1000_c_over_v"));
    assert_eq!(text.lines().count(), 11);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dirs[0].path().join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["config"]["grid_points"], 1024);
    assert!(summary["calibration"]["kappa"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["snapshots"][0]["file"], "snapshot_000.csv");
}

#[test]
fn loss_integral_stays_below_bound() {
    let cfg = Config {
        grid_points: 2048,
        dt: Some(5e-5),
        ..Config::default()
    };
    let out = simulate(ScenarioName::Pulsed, &cfg).unwrap();
    let loss = out.summary.loss.unwrap();
    assert!(loss.l_sp <= loss.l_sp_bound * (1.0 + 1e-6));
    assert!(loss.l_sp > 0.0);
}
