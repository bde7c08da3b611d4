//! The `varplace` command line: argument parsing, study configuration and
//! one function per subcommand.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::placement::Solver;

pub use config::{CostSection, EccSection, ModeName, PlacementSection, StudyConfig};

/// Dynamic var placement studies: power flow, fault simulation, FIDVR
/// screening, empirical covariances, max-det placement, the sensitivity
/// index baseline, coverage and cost.
#[derive(Debug, Parser)]
#[command(name = "varplace", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Case document (TOML).
    #[arg(long, global = true)]
    pub case: Option<PathBuf>,
    /// Study configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: varplace-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for simulation sweeps.
    #[arg(long, global = true, env = "VARPLACE_WORKERS")]
    pub workers: Option<usize>,
    /// Seed for the randomized solver.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fault durations in cycles, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub durations: Option<Vec<f64>>,
    /// ECC protocol.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeName>,
    /// Number of SVCs to place.
    #[arg(long, global = true)]
    pub svcs: Option<usize>,
    /// Placement solver.
    #[arg(long, global = true, value_parser = parse_solver)]
    pub solver: Option<Solver>,
    /// Contingency id, e.g. b3@4 (fault at bus 4, branch 3 opened).
    #[arg(long, global = true)]
    pub contingency: Option<String>,
    /// Rating of installed SVCs, Mvar.
    #[arg(long, global = true)]
    pub svc_rating: Option<f64>,
}

fn parse_solver(s: &str) -> std::result::Result<Solver, String> {
    match s {
        "exhaustive" => Ok(Solver::Exhaustive),
        "greedy" => Ok(Solver::Greedy),
        "mads" => Ok(Solver::Mads),
        other => Err(format!("unknown solver {other:?} (exhaustive, greedy, mads)")),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the pre-fault power flow.
    Powerflow,
    /// Simulate one contingency (or an undisturbed run) and write the voltage trajectory.
    Simulate {
        /// Fault duration in cycles for the selected contingency.
        #[arg(long)]
        duration: Option<f64>,
        /// Buses with an installed SVC, comma separated.
        #[arg(long, value_delimiter = ',')]
        placement: Option<Vec<u32>>,
    },
    /// Run the N-1 list through the voltage criteria and rank severity.
    Screen,
    /// Build (or reuse) per-candidate covariances.
    Ecc {
        /// Discard stored covariances and rebuild them.
        #[arg(long)]
        rebuild: bool,
    },
    /// Choose SVC locations by maximizing the covariance determinant.
    Place {
        /// Discard stored covariances and rebuild them.
        #[arg(long)]
        rebuild: bool,
        /// Also rank by the sensitivity index and tabulate both placements.
        #[arg(long)]
        compare_vsi: bool,
    },
    /// Rank candidates by the voltage sensitivity index.
    Vsi {
        /// Probe size, Mvar.
        #[arg(long)]
        probe: Option<f64>,
        /// Number of most severe contingencies to include.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Count screened contingencies resolved by a placement.
    Coverage {
        /// Buses with an SVC; defaults to the last `place` result in the output directory.
        #[arg(long, value_delimiter = ',')]
        placement: Option<Vec<u32>>,
    },
    /// Total cost per SVC count from a coverage table.
    Cost {
        /// Coverage table (duration,n_svc,addressed[,percentage]).
        #[arg(long)]
        coverage: Option<PathBuf>,
        /// Cost per SVC.
        #[arg(long)]
        c_svc: Option<f64>,
        /// Cost per unaddressed contingency and duration.
        #[arg(long)]
        c_fidvr: Option<f64>,
        /// Number of screened contingencies behind the table.
        #[arg(long)]
        n_cont: Option<usize>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr, summaries to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; returns the summary lines.
pub fn execute(cli: Cli) -> Result<Vec<String>> {
    if let Some(n) = cli.common.workers {
        if n == 0 {
            return Err(Error::InvalidInput("--workers must be at least 1".into()));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = resolve_config(&cli.common)?;
    commands::dispatch(&cli.command, cfg)
}

fn resolve_config(c: &Common) -> Result<StudyConfig> {
    let mut cfg = match &c.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    if let Some(p) = &c.case {
        cfg.case = Some(p.clone());
    }
    if let Some(p) = &c.out {
        cfg.output = Some(p.clone());
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.durations {
        cfg.durations = d.clone();
    }
    if let Some(m) = c.mode {
        cfg.ecc.mode = m;
    }
    if let Some(v) = c.svcs {
        cfg.placement.svcs = v;
    }
    if let Some(s) = c.solver {
        cfg.placement.solver = s;
    }
    if let Some(id) = &c.contingency {
        cfg.ecc.contingency = Some(id.clone());
    }
    if let Some(r) = c.svc_rating {
        cfg.svc_rating = r;
    }
    cfg.placement.mads.seed = cfg.seed;
    Ok(cfg)
}
