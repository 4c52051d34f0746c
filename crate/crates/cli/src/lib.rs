//! Command-line front end: every result of the library as CSV or JSON.
//!
//! Exit status is 0 on success, 2 for configuration errors, 3 when the
//! requested equilibrium does not exist and 4 when `verify` finds a failure.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fdnash::game::CostPolicy;
use fdnash::montecarlo::SimMode;

pub use error::{CliError, Result};
use output::{emit, to_json, Format};
use scenario::{Scenario, Sweep};

#[derive(Debug, Parser)]
#[command(
    name = "fdnash",
    version,
    about = "Full-duplex random access game: equilibria, optima and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output path; stdout when absent or `-`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Simulated slots (simulate and verify).
    #[arg(long, global = true)]
    pub slots: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, clap::Args)]
pub struct SweepArgs {
    #[arg(long, requires_all = ["stop", "step"])]
    pub start: Option<f64>,
    #[arg(long, requires_all = ["start", "step"])]
    pub stop: Option<f64>,
    #[arg(long, requires_all = ["start", "stop"])]
    pub step: Option<f64>,
}

impl SweepArgs {
    /// Flags, else the scenario's sweep, else `default`.
    fn resolve(&self, from_file: Option<Sweep>, default: Option<Sweep>) -> Result<Sweep> {
        match (self.start, self.stop, self.step) {
            (Some(a), Some(b), Some(s)) => Sweep::new(a, b, s),
            _ => from_file.or(default).ok_or_else(|| {
                CliError::Config("no sweep: pass --start/--stop/--step or set it in the scenario".into())
            }),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full-duplex probabilities reachable in equilibrium for each c_hd.
    Region {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// The symmetric equilibrium at given c_hd and pi_tfd.
    Solve {
        /// Half-duplex price; defaults to the scenario's costs.
        #[arg(long)]
        c_hd: Option<f64>,
        #[arg(long)]
        pi_tfd: f64,
    },
    /// Prices that make a target pi_tfd an equilibrium.
    Design {
        /// Single target; otherwise the pi_tfd sweep.
        #[arg(long)]
        pi_tfd: Option<f64>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Throughput-optimal profiles and their enabling prices.
    Optimum {
        /// Overrides the scenario's beta.
        #[arg(long)]
        beta: Option<f64>,
        /// Report throughput and price without dividing by phi.
        #[arg(long)]
        absolute: bool,
    },
    /// Price of anarchy against pi_tfd.
    Poa {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Slot-level simulation next to the closed forms.
    Simulate {
        /// Pair 1 p.m.f. as `w,tA,tB,tfd`.
        #[arg(long, requires = "pi2", conflicts_with = "fixed")]
        pi1: Option<String>,
        /// Pair 2 p.m.f. as `w,tA,tB,tfd`.
        #[arg(long, requires = "pi1")]
        pi2: Option<String>,
        /// Fixed actions such as `tfd,w`.
        #[arg(long)]
        fixed: Option<String>,
        /// Half-duplex price (full-duplex price 2 beta c_hd); defaults to the
        /// scenario's costs, else zero.
        #[arg(long)]
        c_hd: Option<f64>,
    },
    /// Runs the invariant suite; exit status 4 on any failure.
    Verify,
}

pub const DEFAULT_SIM_SLOTS: u64 = 1_000_000;
pub const DEFAULT_VERIFY_SLOTS: u64 = 200_000;

fn default_pi_tfd_sweep() -> Sweep {
    Sweep::new(0.0, 1.0, 0.05).expect("valid default sweep")
}

/// Runs one invocation and writes its output.
pub fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Config("--scenario is required".into()))?;
    let scenario = Scenario::load(path)?;
    let sweeps = &scenario.file.sweeps;
    let out = cli.out.as_ref();
    let text = match &cli.command {
        Command::Region { sweep } => {
            let s = sweep.resolve(sweeps.c_hd, None)?;
            commands::cmd_region(&scenario, &s, cli.format.unwrap_or(Format::Csv))?
        }
        Command::Solve { c_hd, pi_tfd } => {
            commands::cmd_solve(&scenario, *c_hd, *pi_tfd, cli.format.unwrap_or(Format::Json))?
        }
        Command::Design { pi_tfd, sweep } => {
            let targets = match pi_tfd {
                Some(p) => vec![*p],
                None => sweep.resolve(sweeps.pi_tfd, Some(default_pi_tfd_sweep()))?.points(),
            };
            commands::cmd_design(&scenario, &targets, cli.format.unwrap_or(Format::Csv))?
        }
        Command::Optimum { beta, absolute } => {
            commands::cmd_optimum(&scenario, *beta, *absolute, cli.format.unwrap_or(Format::Csv))?
        }
        Command::Poa { sweep } => {
            let s = sweep.resolve(sweeps.pi_tfd, Some(default_pi_tfd_sweep()))?;
            commands::cmd_poa(&scenario, &s, cli.format.unwrap_or(Format::Csv))?
        }
        Command::Simulate { pi1, pi2, fixed, c_hd } => {
            let mode = match (pi1, pi2, fixed) {
                (Some(a), Some(b), None) => SimMode::Mixed {
                    pi1: commands::parse_pmf(a)?,
                    pi2: commands::parse_pmf(b)?,
                },
                (None, None, Some(f)) => {
                    let (s1, s2) = commands::parse_profile(f)?;
                    SimMode::Fixed { s1, s2 }
                }
                _ => return Err(CliError::Config("simulate needs --pi1 and --pi2, or --fixed".into())),
            };
            let costs = match (c_hd, scenario.costs()) {
                (Some(v), _) => CostPolicy::proportional(&scenario.constants, *v)?,
                (None, Some(c)) => c,
                (None, None) => CostPolicy::new(0.0, 0.0)?,
            };
            let slots = cli.slots.unwrap_or(DEFAULT_SIM_SLOTS);
            commands::cmd_simulate(
                &scenario,
                mode,
                costs,
                slots,
                cli.seed,
                cli.format.unwrap_or(Format::Json),
            )?
        }
        Command::Verify => {
            let report = verify::run_verify(&scenario, cli.slots.unwrap_or(DEFAULT_VERIFY_SLOTS), cli.seed)?;
            let text = match cli.format {
                None => report.to_text(),
                Some(Format::Json) => to_json(&report)?,
                Some(Format::Csv) => report.to_table().to_csv()?,
            };
            emit(out, &text)?;
            if !report.passed {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
                return Err(CliError::Verification(failed.join(", ")));
            }
            return Ok(());
        }
    };
    emit(out, &text)
}
