//! `gwspectra`: command line front end.
//!
//! Exit codes: 0 success, 2 invalid input (including unknown flags),
//! 3 solver did not converge (outputs are still written), 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gwspectra_core::experiment::{run, ExperimentConfig, Pipeline};
use gwspectra_core::offspring::{Disorder, PotentialModel};
use gwspectra_core::spectra::schedule_to;
use gwspectra_core::{Error, OffspringLaw};

#[derive(Parser)]
#[command(name = "gwspectra", version, about = "Spectral experiments on Galton-Watson trees")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a JSON config (or a manifest from an earlier run).
    Run {
        #[arg(value_name = "CONFIG")]
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sample finite trees and write them to trees/*.txt.
    SampleTree {
        #[arg(long)]
        law: String,
        #[arg(long)]
        root_law: Option<String>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Population dynamics at one `Re z` down the `η` schedule.
    SolveRde {
        #[arg(long)]
        law: String,
        #[arg(long)]
        root_law: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        re_z: f64,
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Density of the root spectral measure on a uniform grid of (-E, E).
    Density {
        #[arg(long)]
        law: String,
        #[arg(long)]
        root_law: Option<String>,
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Calibration of the contraction lemmas.
    ContractionLab {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Excluded set built from small-tree spectra.
    ForbiddenSet {
        #[arg(long)]
        d_s: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Karp-Sipser core law `Poisson(d)` conditioned on at least two children.
    KsCore {
        #[arg(long)]
        d: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Anderson model on regular trees over a `(d, λ)` grid.
    Anderson {
        #[arg(long, value_delimiter = ',')]
        d: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, value_parser = parse_disorder)]
        disorder: Option<Disorder>,
        #[command(flatten)]
        common: Common,
    },
    /// Supercritical Poisson trees conditioned on survival.
    PoissonAc {
        #[arg(long)]
        d: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Base config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Target `Im z`; the schedule is cut there.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    pool_size: Option<usize>,
    /// Grid points.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "E")]
    e: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Sweep cap per level.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Sweeps at the target level.
    #[arg(long)]
    hold: Option<usize>,
    #[arg(long, env = "GWSPECTRA_WORKERS")]
    workers: Option<usize>,
    /// Output directory (default: the config's, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PotentialArgs {
    /// Anderson coupling `λ`; the potential is `-λ X / √scale`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_parser = parse_disorder)]
    disorder: Option<Disorder>,
    /// Scale of the Anderson potential (default: mean of `law`).
    #[arg(long)]
    scale: Option<f64>,
}

fn parse_disorder(s: &str) -> Result<Disorder, String> {
    match s {
        "uniform" => Ok(Disorder::Uniform),
        "gaussian" => Ok(Disorder::Gaussian),
        _ => Err(format!("unknown disorder `{s}` (uniform|gaussian)")),
    }
}

fn parse_law(s: &str) -> Result<gwspectra_core::offspring::LawSpec, Error> {
    Ok(s.parse::<OffspringLaw>()?.spec())
}

fn base(pipeline: Pipeline, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut c = match &common.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            if c.pipeline != pipeline {
                return Err(Error::Config(format!("config is for `{}`", c.pipeline.name())));
            }
            c
        }
        None => {
            let seed = common.seed.ok_or_else(|| Error::Config("--seed is required".into()))?;
            ExperimentConfig::new(pipeline, seed)
        }
    };
    apply(&mut c, common);
    Ok(c)
}

fn apply(c: &mut ExperimentConfig, common: &Common) {
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(eta) = common.eta {
        c.eta_schedule = schedule_to(&c.eta_schedule, eta);
    }
    if let Some(m) = common.pool_size {
        c.pool_size = m;
    }
    if let Some(g) = common.grid {
        c.grid_size = g;
    }
    if let Some(e) = common.e {
        c.e = e;
    }
    if let Some(e) = common.epsilon {
        c.epsilon = e;
    }
    if let Some(k) = common.k_max {
        c.k_max = k;
    }
    if let Some(s) = common.sweeps {
        c.sweeps = s;
    }
    if let Some(h) = common.hold {
        c.hold_sweeps = h;
    }
    if common.workers.is_some() {
        c.workers = common.workers;
    }
    if common.out.is_some() {
        c.output_dir = common.out.clone();
    }
}

fn potential(args: &PotentialArgs, law: &str) -> Result<Option<PotentialModel>, Error> {
    match args.lambda {
        None => Ok(None),
        Some(lambda) => {
            let scale = match args.scale {
                Some(s) => s,
                None => law.parse::<OffspringLaw>()?.mean(),
            };
            Ok(Some(PotentialModel::Anderson { disorder: args.disorder.unwrap_or(Disorder::Uniform), lambda, scale }))
        }
    }
}

fn config(cmd: Cmd) -> Result<ExperimentConfig, Error> {
    Ok(match cmd {
        Cmd::Run { file, common } => {
            let mut c = ExperimentConfig::load(&file)?;
            apply(&mut c, &common);
            c
        }
        Cmd::SampleTree { law, root_law, depth, count, common } => {
            let mut c = base(Pipeline::SampleTree, &common)?;
            c.law = Some(parse_law(&law)?);
            c.root_law = root_law.as_deref().map(parse_law).transpose()?;
            c.depth = depth.or(c.depth);
            c.count = count.unwrap_or(c.count);
            c
        }
        Cmd::SolveRde { law, root_law, re_z, potential: pa, common } => {
            let mut c = base(Pipeline::SolveRde, &common)?;
            c.potential = potential(&pa, &law)?.or(c.potential);
            c.law = Some(parse_law(&law)?);
            c.root_law = root_law.as_deref().map(parse_law).transpose()?;
            c.re_z = Some(re_z);
            c
        }
        Cmd::Density { law, root_law, potential: pa, common } => {
            let mut c = base(Pipeline::Density, &common)?;
            c.potential = potential(&pa, &law)?.or(c.potential);
            c.law = Some(parse_law(&law)?);
            c.root_law = root_law.as_deref().map(parse_law).transpose()?;
            c
        }
        Cmd::ContractionLab { trials, p, common } => {
            let mut c = base(Pipeline::ContractionLab, &common)?;
            c.trials = trials.unwrap_or(c.trials);
            c.p = p.unwrap_or(c.p);
            c
        }
        Cmd::ForbiddenSet { d_s, common } => {
            let mut c = base(Pipeline::ForbiddenSet, &common)?;
            c.d_s = d_s.or(c.d_s);
            c
        }
        Cmd::KsCore { d, common } => {
            let mut c = base(Pipeline::KsCore, &common)?;
            c.d = d.or(c.d);
            c
        }
        Cmd::Anderson { d, lambda, disorder, common } => {
            let mut c = base(Pipeline::Anderson, &common)?;
            if !d.is_empty() {
                c.ds = Some(d);
            }
            if !lambda.is_empty() {
                c.lambdas = Some(lambda);
            }
            c.disorder = disorder.or(c.disorder);
            c
        }
        Cmd::PoissonAc { d, common } => {
            let mut c = base(Pipeline::PoissonAc, &common)?;
            c.d = d.or(c.d);
            c
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = match config(cli.cmd) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = c.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    match run(&c, &dir) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out).expect("outcome serializes"));
            if out.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("warning: solver did not converge; outputs carry the flags");
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
