//! Experiment harness for the kinetic samplers: Gaussian scaling study,
//! funnel comparison against fixed-step HMC, adaptive-step trajectory dumps,
//! and single ad-hoc runs. All outputs are deterministic functions of
//! (configuration, seed).

mod experiments;
mod output;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pdmp_core::{parse_order, parse_step_policy, parse_target, ApproxOrder, StepPolicy, Target};

/// Which Markov kernel drives the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampler {
    /// Metropolis-adjusted bounce dynamics over a fixed window.
    MhBps,
    /// Metropolis-adjusted coordinate-flip dynamics over a fixed window.
    MhZigzag,
    /// No-U-Turn path growth with the uncorrected triangular index draw.
    NutsExact,
    /// No-U-Turn path growth with the Metropolis-corrected index draw.
    DoublyAdaptive,
    /// Fixed-step leapfrog HMC baseline.
    Hmc,
}

impl Sampler {
    pub fn label(self) -> &'static str {
        match self {
            Sampler::MhBps => "mh-bps",
            Sampler::MhZigzag => "mh-zigzag",
            Sampler::NutsExact => "nuts-exact",
            Sampler::DoublyAdaptive => "doubly-adaptive",
            Sampler::Hmc => "hmc",
        }
    }
}

/// Options shared by every experiment.
#[derive(Debug, Args)]
pub struct CommonOpts {
    /// Rate surrogate order: order0 | order1.
    #[arg(long, default_value = "order1", value_parser = parse_order)]
    pub scheme: ApproxOrder,
    /// Knot spacing: fixed:<h> | adaptive:<tol>. For HMC, fixed:<h> is the
    /// leapfrog step size.
    #[arg(long, default_value = "adaptive:0.01", value_parser = parse_step_policy)]
    pub step: StepPolicy,
    /// Trajectory window length for the fixed-window Metropolis samplers.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Number of Markov chain steps per cell.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Root seed; per-cell generators are split off it by grid position.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; defaults to $PDMP_OUT_DIR (or the working directory)
    /// plus an experiment-specific file name.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonOpts {
    fn resolve_out(&self, default_name: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let dir = std::env::var("PDMP_OUT_DIR").unwrap_or_else(|_| ".".into());
            PathBuf::from(dir).join(default_name)
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one sampler across a dimension grid of standard Gaussians and
    /// tabulate events, gradient cost, and effective sample size per step.
    GaussianScaling {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated dimension grid.
        #[arg(long, default_value = "4,16,64", value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Sampler::NutsExact)]
        sampler: Sampler,
    },
    /// Compare the index-corrected No-U-Turn sampler against fixed-step HMC
    /// on the funnel; writes a summary table plus one chain dump per row.
    FunnelCompare {
        #[command(flatten)]
        common: CommonOpts,
        /// Funnel scale of the log-variance coordinate.
        #[arg(long, default_value_t = 3.0)]
        a: f64,
        /// Funnel rate: the conditional variance of x2 is exp(x1 / b).
        #[arg(long, default_value_t = 1.5)]
        b: f64,
        /// HMC leapfrog step sizes to compare against.
        #[arg(long, default_value = "1.5,0.5,0.1", value_delimiter = ',')]
        epsilons: Vec<f64>,
        /// Leapfrog steps per HMC proposal.
        #[arg(long, default_value_t = 10)]
        leapfrog: usize,
    },
    /// Simulate one long trajectory of the adaptive surrogate process on the
    /// funnel and dump the skeleton plus every gradient-evaluation point.
    Trajectory {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value_t = 3.0)]
        a: f64,
        #[arg(long, default_value_t = 2.0)]
        b: f64,
    },
    /// Run one sampler on one target and write a single summary row.
    SingleRun {
        #[command(flatten)]
        common: CommonOpts,
        /// Target: gaussian:d=<n> | scaled-gaussian:d=<n>,sigma=<s> |
        /// funnel:a=<a>,b=<b>.
        #[arg(long, value_parser = parse_target)]
        target: Target,
        #[arg(long, value_enum)]
        sampler: Sampler,
        /// Leapfrog steps per proposal (HMC only).
        #[arg(long, default_value_t = 10)]
        leapfrog: usize,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "pdmp-nuts",
    about = "Kinetic-sampler experiment harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GaussianScaling {
            common,
            dims,
            sampler,
        } => {
            if dims.is_empty() {
                bail!("--dims must list at least one dimension");
            }
            if sampler == Sampler::Hmc {
                bail!("the scaling study covers the kinetic samplers; use single-run for HMC");
            }
            let out = common.resolve_out("gaussian_scaling.csv");
            experiments::run_gaussian_scaling(&common, &dims, sampler, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
        }
        Command::FunnelCompare {
            common,
            a,
            b,
            epsilons,
            leapfrog,
        } => {
            let out = common.resolve_out("funnel_compare.csv");
            experiments::run_funnel_compare(&common, a, b, &epsilons, leapfrog, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
        }
        Command::Trajectory { common, a, b } => {
            let out = common.resolve_out("trajectory.txt");
            experiments::run_trajectory_dump(&common, a, b, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
        }
        Command::SingleRun {
            common,
            target,
            sampler,
            leapfrog,
        } => {
            let out = common.resolve_out("single_run.csv");
            experiments::run_single(&common, &target, sampler, leapfrog, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
