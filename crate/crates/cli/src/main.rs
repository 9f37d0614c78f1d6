//! Command-line driver: configured runs and acceptance presets.
//!
//! Exit codes: 0 success, 1 a preset criterion failed, 2 configuration or
//! usage error, 3 numerical instability.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use visco2d::config::{parse_config, Formulation, RunConfig};
use visco2d::experiments::{execute_preset, Preset};
use visco2d::simulation::{run_simulation, RunFailure};
use visco2d::Error;

const EXIT_CRITERION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "visco2d", version, about = "Periodic 2D viscoelastic flow: runs and identity checks")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Acceptance preset: identities, equivalence, energy_law, refinement or theorem.
    #[arg(long, value_name = "NAME", value_parser = clap::value_parser!(Preset))]
    preset: Option<Preset>,

    /// Directory for series, snapshots and reports.
    #[arg(long, value_name = "PATH")]
    out_dir: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Grid points per direction.
    #[arg(long)]
    n: Option<usize>,

    #[arg(long)]
    dt: Option<f64>,

    #[arg(long)]
    t_final: Option<f64>,
}

fn load(cli: &Cli) -> Result<(RunConfig, Option<Preset>), Error> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None if cli.preset.is_some() => RunConfig::with_formulation(Formulation::Both),
        None => {
            return Err(Error::InvalidConfig(
                "nothing to run: pass --config PATH and/or --preset NAME".into(),
            ))
        }
    };
    if let Some(n) = cli.n {
        config.n = n;
    }
    if let Some(dt) = cli.dt {
        config.scheme.dt = dt;
    }
    if let Some(t) = cli.t_final {
        config.t_final = t;
    }
    if let Some(seed) = cli.seed {
        config.init.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.output_dir = Some(dir.clone());
    }
    let preset = match (cli.preset, &config.preset) {
        (Some(p), _) => Some(p),
        (None, Some(name)) => Some(name.parse()?),
        (None, None) => None,
    };
    config.validate()?;
    Ok((config, preset))
}

fn failure_code(f: &RunFailure) -> u8 {
    if f.error.is_numerical() {
        EXIT_UNSTABLE
    } else {
        EXIT_CONFIG
    }
}

fn simulate(config: &RunConfig) -> u8 {
    match run_simulation(config) {
        Ok(out) => {
            for run in &out.runs {
                let last = run.series.last().expect("a run records its initial state");
                println!(
                    "{}: t = {} E_basic = {:.6e} gradu_l2sq = {:.6e} detIpV = {:.2e} trdet = {:.2e} newid = {:.2e}",
                    run.formulation,
                    last.t,
                    last.e_basic,
                    last.gradu_l2sq,
                    last.residuals.det_ipv,
                    last.residuals.trdet,
                    last.residuals.newid
                );
            }
            0
        }
        Err(f) => {
            eprintln!("error: {f}");
            failure_code(&f)
        }
    }
}

fn preset(p: Preset, config: &RunConfig) -> u8 {
    match execute_preset(p, config) {
        Ok(report) => {
            print!("{}", report.render());
            match report.first_failure() {
                Some(c) => {
                    eprintln!("failed criterion [{}] {}", c.id, c.name);
                    EXIT_CRITERION
                }
                None => 0,
            }
        }
        Err(f) => {
            eprintln!("error: {f}");
            failure_code(&f)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match load(&cli) {
        Ok((config, Some(p))) => preset(p, &config),
        Ok((config, None)) => simulate(&config),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(code)
}
