use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sbm_obstacles::harness::{run_to, ExperimentConfig, ExperimentId};
use sbm_obstacles::{Error, Result};

/// Monte Carlo and PDE experiments for super-Brownian motion among hard
/// Poissonian obstacles.
#[derive(Parser, Debug)]
#[command(name = "sbmo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Radius, or comma-separated radii for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Output directory (default `out/<experiment>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config; absent fields take the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the effective config and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Capacity constant from scaled sausage volumes.
    Ksw,
    /// Planar small-ball hitting asymptotic; exact ball law in d >= 3.
    Spitzer,
    /// Survival among obstacles averaged over environments and paths.
    AnnealedSurvival,
    /// Mean-square error and bias of the scaled weighted sausage.
    L2Rate,
    /// Moments of the total mass of the critical branching system.
    FellerMoments,
    /// Laplace functionals: particles, closed forms and the solver.
    LaplaceMatch,
    /// Quenched convergence over persisted environments.
    QuenchedSweep,
    /// Solve the log-Laplace equation and run its checks.
    SolveW,
}

impl Command {
    fn id(self) -> ExperimentId {
        match self {
            Self::Ksw => ExperimentId::Ksw,
            Self::Spitzer => ExperimentId::Spitzer,
            Self::AnnealedSurvival => ExperimentId::AnnealedSurvival,
            Self::L2Rate => ExperimentId::L2Rate,
            Self::FellerMoments => ExperimentId::FellerMoments,
            Self::LaplaceMatch => ExperimentId::LaplaceMatch,
            Self::QuenchedSweep => ExperimentId::QuenchedSweep,
            Self::SolveW => ExperimentId::SolveW,
        }
    }
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let id = cli.command.id();
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_file(path)?;
            if cfg.experiment != id {
                return Err(Error::Config {
                    field: "experiment".into(),
                    message: format!("config is for `{}` but the subcommand is `{id}`", cfg.experiment),
                });
            }
            cfg
        }
        None => ExperimentConfig::defaults(id),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.dim {
        cfg.set_dim(d);
    }
    if let Some(e) = &cli.eps {
        cfg.eps = e.clone();
        cfg.subsequence = None;
    }
    if let Some(r) = cli.replicates {
        cfg.replicates = r;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("sbmo: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        return match cfg.to_json() {
            Ok(s) => {
                println!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("sbmo: {e}");
                ExitCode::from(2)
            }
        };
    }
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.as_str()));
    match run_to(&cfg, &dir) {
        Ok(outcome) => {
            for r in &outcome.rows {
                let verdict = match r.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "-",
                };
                let target = r.target.map(|t| format!("{t:.6}")).unwrap_or_else(|| "-".into());
                println!("{:<4} {:<20} {:>14.6} +- {:<10.3e} target {:>10}  {}", verdict, r.quantity, r.estimate, r.std_error, target, r.params);
            }
            for n in &outcome.notes {
                println!("note: {n}");
            }
            println!("wrote {}", dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("sbmo: {e}");
            ExitCode::from(2)
        }
    }
}
