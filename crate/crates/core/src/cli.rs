//! Command-line front end. Exit status 0 on success, 1 when the inputs could
//! not be read or validated, 2 when a verification ran and failed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::bmo::{bmo_norm_sq_with_witness, carleson_constant};
use crate::decompose::{
    coefficient_split, default_a, generational_decomposition, jones_split, verify_property_p, verify_weak_property_p,
    SquaredGrid,
};
use crate::dyadic::{DyadicInterval, IntervalSet, Universe, MAX_DEPTH};
use crate::examples::{build_section5, random_rearrangement, Section5Params};
use crate::json;
use crate::norms::{bounds_report_with, carleson_distortion, DistortionMode, EXHAUSTIVE_CAP, DEFAULT_BUDGET};
use crate::rational::{parse_ratio, sqrt_f64};
use crate::rearrangement::Rearrangement;

#[derive(Parser, Debug)]
#[command(name = "dyadic-bmo", version, about = "Exact Carleson and BMO computations for Haar rearrangements")]
pub struct Cli {
    /// Universe depth D; inputs are checked against it.
    #[arg(long, global = true)]
    pub depth: Option<u8>,
    /// Output file, written atomically; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Greedy,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Carleson constant of a collection of intervals.
    Carleson {
        /// JSON array of `[n, k]` intervals.
        #[arg(long)]
        input: PathBuf,
    },
    /// BMO norm of a Haar expansion.
    Bmo {
        /// JSON array of `{"interval": [n, k], "coeff": "p/q"}`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Generational decomposition of τ below an interval J.
    Decompose(DecomposeArgs),
    /// Re-check a certificate and report its minimal constants.
    Verify(VerifyArgs),
    /// Split a collection or an expansion into thin parts.
    #[command(subcommand)]
    Split(SplitCommand),
    /// Distortion, lower bound and upper bound for the operator of τ.
    Bounds {
        /// Rearrangement file.
        #[arg(long)]
        tau: PathBuf,
        /// Evaluation budget for the greedy and ascent searches.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Example generators.
    #[command(subcommand)]
    Example(ExampleCommand),
    /// A seeded random rearrangement of U_D.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        level_preserving: bool,
    },
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// Rearrangement file.
    #[arg(long)]
    pub tau: PathBuf,
    /// J as `n,k`; the root by default.
    #[arg(long, value_parser = parse_interval_arg)]
    pub interval: Option<DyadicInterval>,
    /// Stopping parameter, `p/q`; twice the Carleson distortion by default.
    #[arg(long = "A")]
    pub a: Option<String>,
    /// Restrict to a subfamily B (weak mode).
    #[arg(long)]
    pub family: Option<PathBuf>,
    /// Write the rule-by-rule trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Rearrangement file.
    #[arg(long)]
    pub tau: PathBuf,
    #[arg(long)]
    pub certificate: PathBuf,
    /// J as `n,k`; the certificate root by default.
    #[arg(long, value_parser = parse_interval_arg)]
    pub interval: Option<DyadicInterval>,
    /// The subfamily B of a weak certificate.
    #[arg(long)]
    pub family: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SplitCommand {
    /// Peel a collection into parts of Carleson constant at most 4.
    Jones {
        /// JSON array of `[n, k]` intervals.
        #[arg(long)]
        input: PathBuf,
    },
    /// Split an expansion on the grid 1/K into K classes.
    Coefficient {
        /// Haar expansion file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tau: PathBuf,
        /// Grid denominator and number of classes.
        #[arg(long = "K")]
        k: u64,
        /// J as `n,k`; the root by default.
        #[arg(long, value_parser = parse_interval_arg)]
        interval: Option<DyadicInterval>,
        /// Round squared coefficients down to the grid instead of rejecting them.
        #[arg(long)]
        round: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum ExampleCommand {
    /// Build ρ, σ, τ and the stage report; `--out` names a directory.
    Section5 {
        /// Parameter file; default parameters are used when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        stages: usize,
        #[arg(long, default_value_t = 3)]
        eps: u8,
    },
}

fn parse_interval_arg(s: &str) -> Result<DyadicInterval, String> {
    let (n, k) = s.split_once(',').ok_or_else(|| format!("expected n,k but got {s:?}"))?;
    let n: u32 = n.trim().parse().map_err(|_| format!("bad depth in {s:?}"))?;
    let k: u64 = k.trim().parse().map_err(|_| format!("bad index in {s:?}"))?;
    DyadicInterval::new(n, k).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load<T>(path: &Path, f: impl FnOnce(&str) -> Result<T, json::JsonError>) -> Result<T> {
    f(&read(path)?).with_context(|| format!("{}", path.display()))
}

/// Writes `contents` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| anyhow!("output path {} has no file name", path.display()))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("cannot write {}", path.display()))
}

impl Cli {
    fn universe(&self) -> Result<Universe> {
        Ok(Universe::new(self.depth.unwrap_or(MAX_DEPTH) as u32)?)
    }

    fn tau(&self, path: &Path) -> Result<Rearrangement> {
        load(path, |t| json::parse_rearrangement(t, self.depth))
    }

    fn render<T: Serialize>(&self, report: &T) -> String {
        match self.format {
            Format::Json => json::to_pretty(report),
            Format::Table => json::to_table(report),
        }
    }

    fn emit<T: Serialize>(&self, report: &T) -> Result<()> {
        let text = self.render(report);
        match &self.out {
            Some(path) => write_atomic(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn check_j(universe: Universe, j: Option<DyadicInterval>) -> Result<DyadicInterval> {
    let j = j.unwrap_or(DyadicInterval::ROOT);
    universe.check(j)?;
    Ok(j)
}

/// Runs one command and returns the process exit status.
pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Carleson { input } => {
            let universe = cli.universe()?;
            let set = load(input, |t| json::parse_interval_set(t, universe))?;
            cli.emit(&json::carleson_wire(&carleson_constant(&set)))?;
        }
        Command::Bmo { input } => {
            let universe = cli.universe()?;
            let x = load(input, |t| json::parse_expansion(t, universe))?;
            let (norm_sq, witness) = bmo_norm_sq_with_witness(&x);
            cli.emit(&json::BmoWire {
                norm: sqrt_f64(&norm_sq),
                norm_sq: crate::rational::ratio_string(&norm_sq),
                witness: witness.map(json::interval_wire),
            })?;
        }
        Command::Decompose(args) => decompose(cli, args)?,
        Command::Verify(args) => return verify(cli, args),
        Command::Split(SplitCommand::Jones { input }) => {
            let universe = cli.universe()?;
            let set = load(input, |t| json::parse_interval_set(t, universe))?;
            cli.emit(&json::jones_wire(&set, &jones_split(&set)))?;
        }
        Command::Split(SplitCommand::Coefficient { input, tau, k, interval, round }) => {
            let tau = cli.tau(tau)?;
            let universe = tau.universe();
            let x = load(input, |t| json::parse_expansion(t, universe))?;
            let j = check_j(universe, *interval)?;
            let grid = if *round { SquaredGrid::round_down(&x, *k)? } else { SquaredGrid::from_expansion(&x, *k)? };
            let split = coefficient_split(&grid, &tau, j)?;
            cli.emit(&json::coefficient_split_wire(*k, j, &grid.norm_sq(), &split))?;
        }
        Command::Bounds { tau, budget, seed, mode } => {
            let tau = cli.tau(tau)?;
            let mode = mode.map(|m| match m {
                ModeArg::Exhaustive => DistortionMode::Exhaustive,
                ModeArg::Greedy => DistortionMode::Greedy { budget: *budget, seed: *seed },
            });
            let report = bounds_report_with(&tau, mode, *budget, *seed)?;
            cli.emit(&json::bounds_wire(&report))?;
        }
        Command::Example(ExampleCommand::Section5 { input, stages, eps }) => example_section5(cli, input.as_deref(), *stages, *eps)?,
        Command::Random { seed, level_preserving } => {
            let depth = cli.depth.ok_or_else(|| anyhow!("random requires --depth"))?;
            let tau = random_rearrangement(Universe::new(depth as u32)?, *seed, *level_preserving);
            cli.emit(&json::rearrangement_wire(&tau))?;
        }
    }
    Ok(0)
}

fn decompose(cli: &Cli, args: &DecomposeArgs) -> Result<()> {
    let tau = cli.tau(&args.tau)?;
    let universe = tau.universe();
    let j = check_j(universe, args.interval)?;
    let family = match &args.family {
        Some(p) => Some(load(p, |t| json::parse_interval_set(t, universe))?),
        None => None,
    };
    let a = match &args.a {
        Some(s) => parse_ratio(s).with_context(|| format!("--A {s}"))?,
        None => {
            let mode = if tau.len() <= EXHAUSTIVE_CAP {
                DistortionMode::Exhaustive
            } else {
                DistortionMode::Greedy { budget: args.budget, seed: args.seed }
            };
            let m = carleson_distortion(&tau, mode)?.ratio;
            default_a(&m.max(BigRational::one()))
        }
    };
    let (cert, tree) = generational_decomposition(&tau, j, family.as_ref(), &a)?;
    if let Some(path) = &args.trace {
        let mut text = tree.trace_lines().join("\n");
        text.push('\n');
        write_atomic(path, &text)?;
    }
    cli.emit(&json::certificate_wire(&cert, Some(&tree)))
}

fn verify(cli: &Cli, args: &VerifyArgs) -> Result<u8> {
    let tau = cli.tau(&args.tau)?;
    let universe = tau.universe();
    let file = load(&args.certificate, |t| json::parse_certificate(t, &tau))?;
    let j = check_j(universe, Some(args.interval.unwrap_or(file.certificate.root)))?;
    let verdict = match &args.family {
        Some(p) => {
            let family: IntervalSet = load(p, |t| json::parse_interval_set(t, universe))?;
            verify_weak_property_p(&tau, &family, j, &file.certificate)
        }
        None => verify_property_p(&tau, j, &file.certificate),
    };
    let report = json::verdict_wire(&verdict, file.claimed.as_ref());
    cli.emit(&report)?;
    if let Err(f) = &verdict.structural {
        eprintln!("verification failed: {f}");
        return Ok(2);
    }
    Ok(0)
}

fn example_section5(cli: &Cli, input: Option<&Path>, stages: usize, eps: u8) -> Result<()> {
    let (params, truncations) = match input {
        Some(p) => (load(p, json::parse_section5_params)?, Vec::new()),
        None => Section5Params::stage_defaults(cli.depth.unwrap_or(10), stages, eps)?,
    };
    if let Some(d) = cli.depth {
        if d != params.depth {
            bail!("parameter file has depth {} but --depth is {d}", params.depth);
        }
    }
    let bundle = build_section5(&params)?;
    let report = json::bundle_report_wire(&params, &bundle.stage_report, &truncations);
    let Some(dir) = &cli.out else {
        bail!("example section5 requires --out DIR for the bundle files");
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (name, map) in [("rho.json", &bundle.rho), ("sigma.json", &bundle.sigma), ("tau.json", &bundle.tau)] {
        write_atomic(&dir.join(name), &json::to_pretty(&json::rearrangement_wire(map)))?;
    }
    write_atomic(&dir.join("stage_report.json"), &cli.render(&report))?;
    Ok(())
}
