use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbpomdp_harness::bench::{self, QuadratureRequest};
use rbpomdp_harness::{ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(name = "rbpomdp", version, about = "Rao-Blackwellized POMDP planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop episodes with the configured filter and planner.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step update time and ESS of RBPF and SIRPF.
    BenchFilters {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        particles: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reward and planning time across sparse-grid levels and iteration
    /// budgets.
    BenchPlanning {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<usize>>,
        #[arg(long = "pomcpow-iters", value_delimiter = ',')]
        pomcpow_iters: Option<Vec<usize>>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// NEES/NIS coverage of both filters on scripted runs.
    Consistency {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints quadrature nodes and weights as CSV.
    QuadratureTable {
        #[arg(long, default_value = "hermite")]
        family: String,
        /// Point count of a univariate rule.
        #[arg(long)]
        n: Option<usize>,
        /// Smolyak level and dimension, `q,d`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        smolyak: Option<Vec<usize>>,
    },
    /// Prints the default configuration as TOML.
    DefaultConfig,
}

fn load(path: Option<PathBuf>, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(&p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = out {
        cfg.run.output_dir = o;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            episodes,
            out,
        } => {
            let mut cfg = load(config, out)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(e) = episodes {
                cfg.run.episodes = e;
            }
            cfg.validate()?;
            let (results, steps, eps) = bench::simulate(&cfg)?;
            let solved = results.iter().filter(|r| r.outcome.solved()).count();
            println!("{} episodes, {solved} reached the goal", results.len());
            println!("wrote {} and {}", steps.display(), eps.display());
        }
        Command::BenchFilters { config, particles, out } => {
            let cfg = load(config, out)?;
            let counts = particles.unwrap_or_else(|| cfg.bench.particles.clone());
            for r in bench::bench_filters(&cfg, &counts)? {
                println!(
                    "{:<6} N={:<6} {:>10.4} ms/step  ESS/N {:.3}",
                    r.filter, r.particles, r.mean_update_ms, r.mean_ess_normalized
                );
            }
        }
        Command::BenchPlanning {
            config,
            q,
            pomcpow_iters,
            episodes,
            out,
        } => {
            let mut cfg = load(config, out)?;
            if let Some(e) = episodes {
                cfg.run.episodes = e;
            }
            cfg.validate()?;
            let q = q.unwrap_or_else(|| cfg.bench.q_levels.clone());
            let iters = pomcpow_iters.unwrap_or_else(|| cfg.bench.pomcpow_iterations.clone());
            let (rows, _) = bench::bench_planning(&cfg, &q, &iters)?;
            for r in rows {
                println!(
                    "{:<22} reward {:>9.2} ± {:<7.2} success {:.2}  plan {:>9.2} ms",
                    r.cell, r.mean_reward, r.ci95, r.success_rate, r.mean_plan_ms
                );
            }
        }
        Command::Consistency { config, out } => {
            let cfg = load(config, out)?;
            let (rows, _) = bench::consistency(&cfg)?;
            for r in rows {
                println!(
                    "{:<6} N={:<6} inside {:.3}  below {:.3}  above {:.3}",
                    r.filter, r.particles, r.frac_inside, r.frac_below, r.frac_above
                );
            }
        }
        Command::QuadratureTable { family, n, smolyak } => {
            let req = match (n, smolyak) {
                (Some(points), None) => {
                    if family != "hermite" {
                        return Err(rbpomdp::Error::UnsupportedFamily(family).into());
                    }
                    QuadratureRequest::Hermite { points }
                }
                (None, Some(v)) if v.len() == 2 => QuadratureRequest::Smolyak { q: v[0], dim: v[1] },
                _ => return Err(HarnessError::Config("give either --n N or --smolyak q,d".into())),
            };
            bench::quadrature_table(req, &mut std::io::stdout().lock())?;
        }
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
