use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use semcom_rsma::harness::oracles::{validate, Level};
use semcom_rsma::harness::{run_sweep, write_csv, write_svg, HarnessConfig};
use semcom_rsma::model::Scheme;
use semcom_rsma::orchestrator::solve_scheme;

#[derive(Parser)]
#[command(name = "semcom-rsma", version, about = "Energy-minimizing allocation for semantic communication over RSMA, SDMA and FDMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realization and print the energy breakdown.
    Solve {
        /// TOML configuration; defaults apply when omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value_t = 0)]
        seed: u64,
        /// Schemes to solve, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = Scheme::ALL.to_vec())]
        schemes: Vec<Scheme>,
    },
    /// Run the sweep described in the configuration file.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// CSV path overriding the one in the configuration.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the solvers against reference oracles.
    Validate {
        #[arg(default_value = "quick")]
        level: Level,
    },
    /// Write a configuration file with defaults and an example sweep.
    InitConfig {
        #[arg(default_value = "semcom.toml")]
        path: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
}

fn load(path: Option<&PathBuf>) -> Result<HarnessConfig> {
    match path {
        Some(p) => HarnessConfig::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(HarnessConfig::default()),
    }
}

fn solve(config: Option<PathBuf>, seed: u64, schemes: &[Scheme]) -> Result<ExitCode> {
    let cfg = load(config.as_ref())?;
    let (system, channels) = cfg.scenario.build(seed).context("building scenario")?;
    let opts = cfg.solver.options();
    println!("{:<6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6}", "scheme", "total_j", "e1_j", "e2_j", "e20_j", "e3_j", "passes");
    let mut failed = false;
    for &scheme in schemes {
        match solve_scheme(scheme, &system, &channels, &opts) {
            Ok(sol) => {
                let e = &sol.energy;
                println!(
                    "{:<6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>6}",
                    scheme.label(),
                    e.total,
                    e.e1.iter().sum::<f64>(),
                    e.e2.iter().sum::<f64>(),
                    e.e20,
                    e.e3.iter().sum::<f64>(),
                    sol.trace.outer_iterations()
                );
            }
            Err(e) => {
                failed = true;
                println!("{:<6} {e}", scheme.label());
            }
        }
    }
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn sweep(config: PathBuf, output: Option<PathBuf>) -> Result<ExitCode> {
    let cfg = load(Some(&config))?;
    let Some(mut spec) = cfg.sweep else {
        bail!("{} has no [sweep] section", config.display());
    };
    if let Some(out) = output {
        spec.output = out;
    }
    let table = run_sweep(&spec, &cfg.scenario, &cfg.solver)?;
    write_csv(&table, &spec.output).with_context(|| format!("writing {}", spec.output.display()))?;
    eprintln!("wrote {}", spec.output.display());
    if spec.plot {
        let svg = spec.output.with_extension("svg");
        write_svg(&table, &svg).with_context(|| format!("writing {}", svg.display()))?;
        eprintln!("wrote {}", svg.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { config, seed, schemes } => solve(config, seed, &schemes),
        Command::Sweep { config, output } => sweep(config, output),
        Command::Validate { level } => {
            let report = validate(level);
            for suite in &report.suites {
                println!("{suite}");
                for f in &suite.failures {
                    println!("    {f}");
                }
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::InitConfig { path, force } => {
            if path.exists() && !force {
                bail!("{} exists; pass --force to overwrite", path.display());
            }
            std::fs::write(&path, HarnessConfig::example().to_toml()?)
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
