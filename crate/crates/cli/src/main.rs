use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use incoupler::config::{Config, ProbeModeName};
use incoupler::scenario::{run_scenario, RunSummary, ScenarioName, ScenarioSpec};

/// Raman atom-laser incoupler simulator.
#[derive(Parser)]
#[command(name = "incoupler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scenario and write its outputs.
    Run {
        scenario: String,
        /// TOML file with parameter overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Time step (s).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        grid_points: Option<usize>,
        /// quasistatic | scaledc
        #[arg(long)]
        probe_mode: Option<String>,
        #[arg(long)]
        squeezing_db: Option<f64>,
        /// Simulated time span (s).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Check a config file and print the calibrated parameters.
    Validate {
        config: PathBuf,
        /// Scenario whose defaults fill unset keys.
        #[arg(long, default_value = "pulsed")]
        scenario: String,
    },
    /// List the available scenarios.
    ListScenarios,
}

fn load(path: Option<&PathBuf>, scenario: ScenarioName) -> incoupler::Result<Config> {
    match path {
        Some(p) => Config::load(p, scenario),
        None => Ok(Config::defaults(scenario)),
    }
}

fn report(s: &RunSummary) {
    let q = |name: &str, v: &incoupler::Quadratures| {
        println!(
            "{name:<16} V+ = {:.5}  V- = {:.5}  product = {:.5}",
            v.v_plus, v.v_minus, v.uncertainty_product
        );
    };
    println!("scenario         {}", s.scenario);
    q("atom quadrature", &s.quad_atom);
    q("probe quadrature", &s.quad_probe);
    if let Some(t) = s.peak_probe_time {
        println!("peak probe time  {:.2} ms", t * 1e3);
    }
    println!(
        "incoupled        {:.2} atoms ({:.4} of input)",
        s.atoms_incoupled, s.incoupled_fraction
    );
    if let Some(ss) = &s.steady_state {
        println!(
            "steady state     V+ = {:.5}  V- = {:.5}  rate = {:.4e}/s (spread {:.2}%)",
            ss.v_plus_probe,
            ss.v_minus_probe,
            ss.output_rate,
            100.0 * ss.output_rate_spread
        );
    }
    if let Some(l) = &s.loss {
        println!("loss fraction    {:.4}", l.loss_fraction);
    }
    if let Some(v) = s.measured_velocity {
        println!("beam velocity    {v:.6e} m/s");
    }
    if let Some(e) = s.rabi_max_error {
        println!("rabi max error   {e:.3e}");
    }
    println!("wall time        {:.2} s ({} steps)", s.wall_time, s.steps);
}

#[allow(clippy::too_many_arguments)]
fn run(
    scenario: &str,
    config: Option<PathBuf>,
    out: PathBuf,
    dt: Option<f64>,
    grid_points: Option<usize>,
    probe_mode: Option<String>,
    squeezing_db: Option<f64>,
    duration: Option<f64>,
) -> incoupler::Result<()> {
    let name: ScenarioName = scenario.parse()?;
    let mut cfg = load(config.as_ref(), name)?;
    if let Some(v) = dt {
        cfg.dt = Some(v);
    }
    if let Some(v) = grid_points {
        cfg.grid_points = v;
    }
    if let Some(v) = probe_mode {
        cfg.probe_mode = v.parse::<ProbeModeName>()?;
    }
    if let Some(v) = squeezing_db {
        cfg.squeezing_db = v;
    }
    if let Some(v) = duration {
        cfg.duration = v;
    }
    let summary = run_scenario(&ScenarioSpec {
        name,
        config: cfg,
        output_dir: Some(out.clone()),
    })?;
    report(&summary);
    println!("outputs          {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            config,
            out,
            dt,
            grid_points,
            probe_mode,
            squeezing_db,
            duration,
        } => run(
            &scenario,
            config,
            out,
            dt,
            grid_points,
            probe_mode,
            squeezing_db,
            duration,
        ),
        Command::Validate { config, scenario } => scenario
            .parse::<ScenarioName>()
            .and_then(|name| Config::load(&config, name))
            .and_then(|cfg| cfg.calibrate())
            .map(|cal| {
                println!("ok");
                println!("v_atom       {:.6e} m/s", cal.derived.v_atom);
                println!("a_ho         {:.6e} m", cal.derived.a_ho);
                println!("t_rabi       {:.6e} s", cal.derived.t_rabi);
                println!("omega23      {:.6e} rad/s", cal.params.omega23);
                println!("g13          {:.6e}", cal.params.g13);
                println!("kappa        {:.6e}", cal.kappa);
                println!("dt           {:.6e} s", cal.dt);
            }),
        Command::ListScenarios => {
            for n in ScenarioName::ALL {
                println!("{:<14} {}", n.as_str(), n.description());
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
