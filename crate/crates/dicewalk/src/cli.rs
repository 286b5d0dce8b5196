//! Command-line front end: single runs, truncated-PGF dumps, face sweeps,
//! guarantee searches, constant estimation, simulation, and plot-ready data
//! export.
//!
//! Output formats are deterministic and self-describing: exact rationals
//! serialize as decimal strings of numerator/denominator (never binary
//! floats), and every report embeds the predicate, die, and statistical
//! conventions it was produced under.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_rational::BigRational;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::engine::{
    dp_reference, rounds_to_guarantee, run, truncated_pgf, GameSpec, Guarantee, StopRule,
};
use crate::error::{Error, Result};
use crate::montecarlo::{simulate, GENERATOR_NAME};
use crate::polyring::{parse_term_line, DieSpec};
use crate::predicates::PredicateSpec;
use crate::stats::{
    estimate_constant, parse_decimal, render_decimal, summarize, ConstantTarget, SignedSqrt,
    Summary,
};

#[derive(Debug, Parser)]
#[command(
    name = "dicewalk",
    version,
    about = "Exact hitting-time statistics for dice-sum walks",
    long_about = "Roll a (possibly loaded) die, add the outcomes to a running sum, and stop as \
                  soon as the sum lands in a chosen class of integers. Every statistic is \
                  computed in exact rational arithmetic and rendered to a requested precision."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one game and report its conditional statistics.
    Run(RunArgs),
    /// Dump the truncated bivariate PGF round by round in polynomial text form.
    Pgf(PgfArgs),
    /// Guarantee search plus summary for a range of fair dice.
    Sweep(SweepArgs),
    /// Smallest R whose survivor mass is at most eps.
    Guarantee(GuaranteeArgs),
    /// Estimate the limiting conditional mean by round doubling.
    Constant(ConstantArgs),
    /// Seeded Monte Carlo simulation of the same game.
    Simulate(SimulateArgs),
    /// Expected-duration grid over faces and starting sums, as CSV.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct DieArgs {
    /// Fair die with this many faces.
    #[arg(long)]
    faces: Option<u64>,
    /// Loaded die as comma-separated value:weight pairs, e.g. `1:2,2:1`.
    #[arg(long)]
    die: Option<String>,
}

impl DieArgs {
    fn resolve(&self) -> Result<DieSpec> {
        match (&self.faces, &self.die) {
            (Some(n), None) => DieSpec::fair(*n),
            (None, Some(s)) => s.parse(),
            _ => Err(Error::invalid("pass exactly one of --faces / --die")),
        }
    }
}

#[derive(Debug, Args)]
struct GameArgs {
    #[command(flatten)]
    die: DieArgs,
    /// Target class: prime | semiprime | distinct-prime-product:K |
    /// perfect-square | odd | even | never.
    #[arg(long)]
    predicate: String,
    /// Starting sum.
    #[arg(long, default_value_t = 0)]
    init: u64,
    /// Accept a starting sum that already satisfies the predicate
    /// (duration-0 game) instead of refusing it.
    #[arg(long)]
    allow_trivial_start: bool,
}

impl GameArgs {
    fn resolve(&self, stop: StopRule) -> Result<GameSpec> {
        let die = self.die.resolve()?;
        let pred: PredicateSpec = self.predicate.parse()?;
        Ok(GameSpec::new(die, pred, self.init, stop)?
            .with_allow_trivial_start(self.allow_trivial_start))
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct StopArgs {
    /// Run exactly this many rounds.
    #[arg(long)]
    rounds: Option<u32>,
    /// Run until the survivor mass is at most this threshold (exact decimal,
    /// e.g. `1e-7`).
    #[arg(long)]
    eps: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    stop: StopArgs,
    /// Round budget for --eps searches.
    #[arg(long, default_value_t = 10_000)]
    rmax: u32,
    /// Significant digits for decimal renderings.
    #[arg(long, default_value_t = 30)]
    digits: u32,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct PgfArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Number of rounds to expand.
    #[arg(long)]
    rounds: u32,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Fair-die face counts to sweep, inclusive (`2..40` or a single `6`).
    #[arg(long)]
    faces: RangeArg,
    /// Target class (as in `run`).
    #[arg(long)]
    predicate: String,
    /// Starting sum.
    #[arg(long, default_value_t = 0)]
    init: u64,
    /// Survivor-mass threshold defining the per-die round count.
    #[arg(long)]
    eps: String,
    /// Round budget per die.
    #[arg(long, default_value_t = 10_000)]
    rmax: u32,
    /// Significant digits for decimal renderings.
    #[arg(long, default_value_t = 30)]
    digits: u32,
    #[arg(long)]
    allow_trivial_start: bool,
    /// Output format (csv and text coincide for tables).
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GuaranteeArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Survivor-mass threshold (exact decimal, e.g. `1e-20`).
    #[arg(long)]
    eps: String,
    /// Round budget for the search.
    #[arg(long, default_value_t = 10_000)]
    rmax: u32,
    /// Significant digits for decimal renderings.
    #[arg(long, default_value_t = 30)]
    digits: u32,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ConstantArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Which conditional mean to stabilize.
    #[arg(long, value_enum, default_value_t = TargetArg::Duration)]
    target: TargetArg,
    /// Significant digits the estimate must stabilize to.
    #[arg(long, default_value_t = 20)]
    digits: u32,
    /// First round count; the search doubles from here.
    #[arg(long, default_value_t = 100)]
    r0: u32,
    /// Round budget for the doubling search.
    #[arg(long, default_value_t = 20_000)]
    rmax: u32,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Duration,
    Location,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Number of independent games.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    /// Per-trial round cap (plays the role of R).
    #[arg(long, default_value_t = 1000)]
    cap: u32,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct PlotdataArgs {
    /// Fair-die face counts, inclusive range (`2..20` or a single `6`).
    #[arg(long)]
    faces: RangeArg,
    /// Starting sums, inclusive range (`0..10` or a single `0`).
    #[arg(long, default_value = "0")]
    init: RangeArg,
    /// Target class (as in `run`).
    #[arg(long)]
    predicate: String,
    /// Survivor-mass threshold defining the per-cell round count.
    #[arg(long)]
    eps: String,
    /// Round budget per cell.
    #[arg(long, default_value_t = 10_000)]
    rmax: u32,
    /// Significant digits for the M column.
    #[arg(long, default_value_t = 30)]
    digits: u32,
    #[arg(long)]
    allow_trivial_start: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Inclusive `a..b` range; a bare `a` means `a..a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RangeArg {
    start: u64,
    end: u64,
}

impl RangeArg {
    fn iter(&self) -> impl Iterator<Item = u64> {
        self.start..=self.end
    }
}

impl FromStr for RangeArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad range `{s}`; expected `a..b` or `a`"));
        let (start, end) = match s.split_once("..") {
            Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
            None => {
                let v = s.parse().map_err(|_| bad())?;
                (v, v)
            }
        };
        if start > end {
            return Err(Error::invalid(format!("empty range `{s}`")));
        }
        Ok(RangeArg { start, end })
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    let format = cli.command.format();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            report_error(&err, format);
            exit_code(&err)
        }
    }
}

impl Command {
    fn format(&self) -> OutputFormat {
        match self {
            Command::Run(a) => a.out.format,
            Command::Guarantee(a) => a.out.format,
            Command::Constant(a) => a.out.format,
            Command::Simulate(a) => a.out.format,
            Command::Sweep(a) => a.format,
            Command::Pgf(_) | Command::Plotdata(_) => OutputFormat::Text,
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 2,
        Error::TrivialStart { .. } => 3,
        Error::NoHits => 4,
        Error::NotConverged { .. } => 5,
        Error::SieveTooSmall { .. } => 6,
    }
}

fn report_error(err: &Error, format: OutputFormat) {
    if format == OutputFormat::Json {
        let body = json!({
            "status": "error",
            "error": { "kind": err.kind(), "message": err.to_string() },
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&body).expect("serializable error")
        );
    } else {
        eprintln!("error: {err}");
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Pgf(args) => cmd_pgf(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Guarantee(args) => cmd_guarantee(args),
        Command::Constant(args) => cmd_constant(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Plotdata(args) => cmd_plotdata(args),
    }
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Shared serialization helpers
// ---------------------------------------------------------------------------

fn json_rational(x: &BigRational, digits: u32) -> Value {
    json!({
        "num": x.numer().to_string(),
        "den": x.denom().to_string(),
        "decimal": render_decimal(x, digits),
    })
}

fn json_sqrt(x: &SignedSqrt, digits: u32) -> Value {
    json!({
        "signed_square_num": x.signed_square().numer().to_string(),
        "signed_square_den": x.signed_square().denom().to_string(),
        "decimal": x.render(digits),
    })
}

fn spec_json(spec: &GameSpec) -> Value {
    let faces: Vec<Value> = spec_faces(spec);
    json!({
        "die": {
            "faces": faces,
            "W": spec.die().total_weight(),
        },
        "predicate": spec.pred().to_string(),
        "init": spec.init(),
        "stop": match spec.stop() {
            StopRule::FixedRounds(r) => json!({ "type": "fixed-rounds", "rounds": r }),
            StopRule::TailTarget { eps, r_max } => json!({
                "type": "tail-target",
                "eps": render_decimal(eps, 12),
                "rmax": r_max,
            }),
        },
        "allow_trivial_start": spec.allow_trivial_start(),
    })
}

fn spec_faces(spec: &GameSpec) -> Vec<Value> {
    spec.die()
        .faces()
        .iter()
        .map(|&(value, weight)| json!({ "value": value, "weight": weight }))
        .collect()
}

fn meta_json(spec: &GameSpec, digits: u32) -> Value {
    json!({
        "die": spec.die().to_string(),
        "W": spec.die().total_weight(),
        "predicate": spec.pred().to_string(),
        "init": spec.init(),
        "digits": digits,
        "skewness_convention": "mu3/sigma^3",
        "kurtosis_convention": "mu4/sigma^4 (not excess; excess = value - 3)",
        "sqrt_encoding": "skew_T and corr carry exact signed squares; decimal is the root",
        "location_note": "L_abs is the absolute final sum; L_rel subtracts init",
    })
}

fn status_str(converged: bool) -> &'static str {
    if converged {
        "ok"
    } else {
        "not-converged"
    }
}

/// RFC-style CSV quoting: quote when the field contains a comma, quote, or
/// newline; double embedded quotes.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(args: RunArgs) -> Result<()> {
    let stop = resolve_stop(&args.stop, args.rmax)?;
    let spec = args.game.resolve(stop)?;
    let trace = run(&spec)?;
    let summary = summarize(&trace, args.digits)?;
    let content = match args.out.format {
        OutputFormat::Json => summary_json_text(&spec, &summary),
        OutputFormat::Csv => summary_csv(&summary),
        OutputFormat::Text => summary_text(&spec, &summary),
    };
    write_output(&args.out.output, &content)?;
    if !summary.converged {
        return Err(Error::NotConverged {
            r_max: trace.rounds_run(),
            detail: format!("survivor mass {}", render_decimal(&summary.tail, 12)),
        });
    }
    Ok(())
}

fn resolve_stop(stop: &StopArgs, rmax: u32) -> Result<StopRule> {
    match (&stop.rounds, &stop.eps) {
        (Some(r), None) => Ok(StopRule::FixedRounds(*r)),
        (None, Some(eps)) => Ok(StopRule::TailTarget {
            eps: parse_decimal(eps)?,
            r_max: rmax,
        }),
        _ => Err(Error::invalid("pass exactly one of --rounds / --eps")),
    }
}

fn summary_json(spec: &GameSpec, summary: &Summary) -> Value {
    let d = summary.digits;
    json!({
        "spec": spec_json(spec),
        "R": summary.rounds,
        "a_R": json_rational(&summary.absorbed, d),
        "tail": json_rational(&summary.tail, d),
        "M": json_rational(&summary.mean_duration, d),
        "L_abs": json_rational(&summary.mean_location, d),
        "L_rel": json_rational(&summary.mean_location_relative(), d),
        "var_T": json_rational(&summary.var_duration, d),
        "skew_T": summary.skew_duration.as_ref().map(|s| json_sqrt(s, d)),
        "kurt_T": summary.kurt_duration.as_ref().map(|k| json_rational(k, d)),
        "var_N": json_rational(&summary.var_location, d),
        "cov": json_rational(&summary.covariance, d),
        "corr": summary.correlation.as_ref().map(|c| json_sqrt(c, d)),
        "status": status_str(summary.converged),
        "meta": meta_json(spec, d),
    })
}

fn summary_json_text(spec: &GameSpec, summary: &Summary) -> String {
    let mut s =
        serde_json::to_string_pretty(&summary_json(spec, summary)).expect("summary serializes");
    s.push('\n');
    s
}

const SUMMARY_CSV_HEADER: &str =
    "R,a_R,tail,M,L_abs,L_rel,var_T,skew_T,kurt_T,var_N,cov,corr,status";

fn summary_csv(summary: &Summary) -> String {
    let r = summary.render();
    let fields = vec![
        summary.rounds.to_string(),
        r.absorbed,
        r.tail,
        r.mean_duration,
        r.mean_location,
        r.mean_location_relative,
        r.var_duration,
        r.skew_duration.unwrap_or_default(),
        r.kurt_duration.unwrap_or_default(),
        r.var_location,
        r.covariance,
        r.correlation.unwrap_or_default(),
        status_str(summary.converged).to_string(),
    ];
    format!("{SUMMARY_CSV_HEADER}\n{}\n", csv_line(&fields))
}

fn summary_text(spec: &GameSpec, summary: &Summary) -> String {
    let r = summary.render();
    let undef = "undefined".to_string();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "die {} (W = {}), predicate {}, init {}",
        spec.die(),
        spec.die().total_weight(),
        spec.pred(),
        spec.init()
    );
    let _ = writeln!(
        out,
        "R       = {} [{}]",
        summary.rounds,
        status_str(summary.converged)
    );
    let _ = writeln!(out, "a_R     = {}", r.absorbed);
    let _ = writeln!(out, "tail    = {}", r.tail);
    let _ = writeln!(out, "M       = {}", r.mean_duration);
    let _ = writeln!(out, "L_abs   = {}", r.mean_location);
    let _ = writeln!(out, "L_rel   = {}", r.mean_location_relative);
    let _ = writeln!(out, "var_T   = {}", r.var_duration);
    let _ = writeln!(
        out,
        "skew_T  = {}",
        r.skew_duration.as_ref().unwrap_or(&undef)
    );
    let _ = writeln!(
        out,
        "kurt_T  = {}",
        r.kurt_duration.as_ref().unwrap_or(&undef)
    );
    let _ = writeln!(out, "var_N   = {}", r.var_location);
    let _ = writeln!(out, "cov     = {}", r.covariance);
    let _ = writeln!(
        out,
        "corr    = {}",
        r.correlation.as_ref().unwrap_or(&undef)
    );
    let _ = writeln!(
        out,
        "conventions: skewness mu3/sigma^3, kurtosis mu4/sigma^4 (not excess)"
    );
    out
}

// ---------------------------------------------------------------------------
// pgf
// ---------------------------------------------------------------------------

fn cmd_pgf(args: PgfArgs) -> Result<()> {
    if args.rounds == 0 {
        return Err(Error::invalid("--rounds must be >= 1"));
    }
    let spec = args.game.resolve(StopRule::FixedRounds(args.rounds))?;
    let polys = truncated_pgf(&spec, args.rounds)?;
    let mut out = String::new();
    let _ = writeln!(out, "# W={}", spec.die().total_weight());
    for (k, poly) in &polys {
        let _ = writeln!(out, "# k={k}");
        for line in poly.term_lines() {
            let _ = writeln!(out, "{line}");
        }
    }
    write_output(&args.output, &out)
}

/// One parsed round of a `pgf` dump: the round index and its
/// `(exponent, numerator, scale)` terms.
pub type PgfRound = (u32, Vec<(u64, BigUint, u32)>);

/// Parses a `pgf` dump back into `(W, per-round term lists)`. Inverse of
/// `cmd_pgf`'s output.
pub fn parse_pgf_dump(text: &str) -> Result<(u64, Vec<PgfRound>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty pgf dump"))?;
    let w: u64 = header
        .strip_prefix("# W=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::invalid(format!("bad pgf header `{header}`")))?;
    let mut rounds: Vec<PgfRound> = Vec::new();
    for line in lines {
        if let Some(k) = line.strip_prefix("# k=") {
            let k: u32 = k
                .parse()
                .map_err(|_| Error::invalid(format!("bad round header `{line}`")))?;
            rounds.push((k, Vec::new()));
        } else if !line.trim().is_empty() {
            let term = parse_term_line(line)?;
            rounds
                .last_mut()
                .ok_or_else(|| Error::invalid("term line before any round header"))?
                .1
                .push(term);
        }
    }
    Ok((w, rounds))
}

// ---------------------------------------------------------------------------
// guarantee
// ---------------------------------------------------------------------------

fn cmd_guarantee(args: GuaranteeArgs) -> Result<()> {
    let eps = parse_decimal(&args.eps)?;
    // The stop rule is irrelevant here; the search manages its own rounds.
    let spec = args.game.resolve(StopRule::TailTarget {
        eps: eps.clone(),
        r_max: args.rmax,
    })?;
    match rounds_to_guarantee(&spec, &eps, args.rmax)? {
        Guarantee::Reached { rounds, survivor } => {
            let d = args.digits;
            let content = match args.out.format {
                OutputFormat::Json => {
                    let body = json!({
                        "spec": spec_json(&spec),
                        "eps": render_decimal(&eps, d),
                        "R": rounds,
                        "survivor": json_rational(&survivor, d),
                        "status": "ok",
                        "meta": meta_json(&spec, d),
                    });
                    format!(
                        "{}\n",
                        serde_json::to_string_pretty(&body).expect("serializable")
                    )
                }
                OutputFormat::Csv => format!(
                    "R,survivor,status\n{}\n",
                    csv_line(&[
                        rounds.to_string(),
                        render_decimal(&survivor, d),
                        "ok".to_string(),
                    ])
                ),
                OutputFormat::Text => format!(
                    "R = {rounds} (survivor mass {} <= eps {})\n",
                    render_decimal(&survivor, d),
                    render_decimal(&eps, d),
                ),
            };
            write_output(&args.out.output, &content)
        }
        Guarantee::NotConverged { r_max, survivor } => Err(Error::NotConverged {
            r_max,
            detail: format!("survivor mass {}", render_decimal(&survivor, args.digits)),
        }),
    }
}

// ---------------------------------------------------------------------------
// constant
// ---------------------------------------------------------------------------

fn cmd_constant(args: ConstantArgs) -> Result<()> {
    // Placeholder stop rule; estimation manages its own rounds.
    let spec = args.game.resolve(StopRule::FixedRounds(1))?;
    let target = match args.target {
        TargetArg::Duration => ConstantTarget::Duration,
        TargetArg::Location => ConstantTarget::Location,
    };
    let estimate = estimate_constant(&spec, target, args.digits, args.r0, args.rmax)?;
    let content = match args.out.format {
        OutputFormat::Json => {
            let body = json!({
                "spec": spec_json(&spec),
                "target": match target {
                    ConstantTarget::Duration => "duration",
                    ConstantTarget::Location => "location",
                },
                "digits": args.digits,
                "decimal": estimate.decimal,
                "stable_at": estimate.stable_at,
                "confirmed_at": estimate.confirmed_at,
                "status": "ok",
                "meta": meta_json(&spec, args.digits),
            });
            format!(
                "{}\n",
                serde_json::to_string_pretty(&body).expect("serializable")
            )
        }
        OutputFormat::Csv => format!(
            "decimal,stable_at,confirmed_at,status\n{}\n",
            csv_line(&[
                estimate.decimal.clone(),
                estimate.stable_at.to_string(),
                estimate.confirmed_at.to_string(),
                "ok".to_string(),
            ])
        ),
        OutputFormat::Text => format!(
            "{} (stable from R = {}, confirmed at R = {})\n",
            estimate.decimal, estimate.stable_at, estimate.confirmed_at
        ),
    };
    write_output(&args.out.output, &content)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    // The cap plays the role of the stop rule.
    let spec = args.game.resolve(StopRule::FixedRounds(args.cap.max(1)))?;
    let result = simulate(&spec, args.trials, args.cap, args.seed)?;
    let float = |x: f64| if x.is_nan() { Value::Null } else { json!(x) };
    let content = match args.out.format {
        OutputFormat::Json => {
            let body = json!({
                "spec": spec_json(&spec),
                "trials": result.trials,
                "cap": args.cap,
                "seed": result.seed,
                "hits": result.hits,
                "hit_fraction": result.hit_fraction,
                "mean_T": float(result.mean_duration),
                "var_T": float(result.var_duration),
                "mean_N": float(result.mean_location),
                "status": "ok",
                "meta": {
                    "rng": GENERATOR_NAME,
                    "die": spec.die().to_string(),
                    "W": spec.die().total_weight(),
                    "predicate": spec.pred().to_string(),
                    "init": spec.init(),
                    "statistics_note": "conditional on terminating within cap; population variance",
                },
            });
            format!(
                "{}\n",
                serde_json::to_string_pretty(&body).expect("serializable")
            )
        }
        OutputFormat::Csv => {
            let cell = |x: f64| {
                if x.is_nan() {
                    String::new()
                } else {
                    x.to_string()
                }
            };
            format!(
                "trials,cap,seed,hits,hit_fraction,mean_T,var_T,mean_N,rng\n{}\n",
                csv_line(&[
                    result.trials.to_string(),
                    args.cap.to_string(),
                    result.seed.to_string(),
                    result.hits.to_string(),
                    result.hit_fraction.to_string(),
                    cell(result.mean_duration),
                    cell(result.var_duration),
                    cell(result.mean_location),
                    GENERATOR_NAME.to_string(),
                ])
            )
        }
        OutputFormat::Text => {
            let cell = |x: f64| {
                if x.is_nan() {
                    "undefined".to_string()
                } else {
                    x.to_string()
                }
            };
            format!(
                "trials = {}, cap = {}, seed = {}, rng = {}\nhits = {} (fraction {})\nmean_T = {}\nvar_T = {}\nmean_N = {}\n",
                result.trials,
                args.cap,
                result.seed,
                GENERATOR_NAME,
                result.hits,
                result.hit_fraction,
                cell(result.mean_duration),
                cell(result.var_duration),
                cell(result.mean_location),
            )
        }
    };
    write_output(&args.out.output, &content)
}

// ---------------------------------------------------------------------------
// sweep / plotdata
// ---------------------------------------------------------------------------

/// One sweep row; errors are recorded in-row so a sweep never aborts.
struct SweepRow {
    faces: u64,
    rounds: Option<u32>,
    summary: Option<Summary>,
    status: String,
}

fn sweep_row(
    faces: u64,
    predicate: PredicateSpec,
    init: u64,
    allow_trivial: bool,
    eps: &BigRational,
    rmax: u32,
    digits: u32,
) -> SweepRow {
    let result = (|| -> Result<(u32, Summary, bool)> {
        let die = DieSpec::fair(faces)?;
        let spec = GameSpec::new(
            die,
            predicate,
            init,
            StopRule::TailTarget {
                eps: eps.clone(),
                r_max: rmax,
            },
        )?
        .with_allow_trivial_start(allow_trivial);
        let trace = run(&spec)?;
        let summary = summarize(&trace, digits)?;
        let converged = trace.converged();
        Ok((trace.rounds_run(), summary, converged))
    })();
    match result {
        Ok((rounds, summary, converged)) => SweepRow {
            faces,
            rounds: Some(rounds),
            summary: Some(summary),
            status: status_str(converged).to_string(),
        },
        Err(err) => SweepRow {
            faces,
            rounds: None,
            summary: None,
            status: format!("error:{}", err.kind()),
        },
    }
}

const SWEEP_CSV_HEADER: &str = "faces,R,tail,M,var,skew,kurt,status";

fn sweep_csv_line(row: &SweepRow) -> String {
    let (r, tail, mean, var, skew, kurt) = match (&row.rounds, &row.summary) {
        (Some(rounds), Some(summary)) => {
            let rendered = summary.render();
            (
                rounds.to_string(),
                rendered.tail,
                rendered.mean_duration,
                rendered.var_duration,
                rendered.skew_duration.unwrap_or_default(),
                rendered.kurt_duration.unwrap_or_default(),
            )
        }
        _ => Default::default(),
    };
    csv_line(&[
        row.faces.to_string(),
        r,
        tail,
        mean,
        var,
        skew,
        kurt,
        row.status.clone(),
    ])
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let predicate: PredicateSpec = args.predicate.parse()?;
    let eps = parse_decimal(&args.eps)?;
    let mut rows: Vec<SweepRow> = args
        .faces
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|faces| {
            sweep_row(
                faces,
                predicate,
                args.init,
                args.allow_trivial_start,
                &eps,
                args.rmax,
                args.digits,
            )
        })
        .collect();
    rows.sort_by_key(|row| row.faces);

    let content = match args.format {
        OutputFormat::Json => {
            let body: Vec<Value> = rows
                .iter()
                .map(|row| match (&row.rounds, &row.summary) {
                    (Some(rounds), Some(summary)) => {
                        let d = summary.digits;
                        json!({
                            "faces": row.faces,
                            "R": rounds,
                            "tail": json_rational(&summary.tail, d),
                            "M": json_rational(&summary.mean_duration, d),
                            "var": json_rational(&summary.var_duration, d),
                            "skew": summary.skew_duration.as_ref().map(|s| json_sqrt(s, d)),
                            "kurt": summary.kurt_duration.as_ref().map(|k| json_rational(k, d)),
                            "status": row.status,
                        })
                    }
                    _ => json!({ "faces": row.faces, "status": row.status }),
                })
                .collect();
            format!(
                "{}\n",
                serde_json::to_string_pretty(&body).expect("serializable")
            )
        }
        OutputFormat::Csv | OutputFormat::Text => {
            let mut out = String::from(SWEEP_CSV_HEADER);
            out.push('\n');
            for row in &rows {
                out.push_str(&sweep_csv_line(row));
                out.push('\n');
            }
            out
        }
    };
    write_output(&args.output, &content)
}

fn cmd_plotdata(args: PlotdataArgs) -> Result<()> {
    let predicate: PredicateSpec = args.predicate.parse()?;
    let eps = parse_decimal(&args.eps)?;
    let cells: Vec<(u64, u64)> = args
        .faces
        .iter()
        .flat_map(|f| args.init.iter().map(move |i| (f, i)))
        .collect();
    let mut rows: Vec<(u64, u64, Option<String>)> = cells
        .into_par_iter()
        .map(|(faces, init)| {
            let row = sweep_row(
                faces,
                predicate,
                init,
                args.allow_trivial_start,
                &eps,
                args.rmax,
                args.digits,
            );
            let mean = match (&row.summary, row.status.as_str()) {
                (Some(summary), "ok") => Some(render_decimal(&summary.mean_duration, args.digits)),
                _ => {
                    eprintln!("plotdata: faces {faces} init {init}: {}", row.status);
                    None
                }
            };
            (faces, init, mean)
        })
        .collect();
    rows.sort();

    let mut out = String::from("faces,init,M\n");
    for (faces, init, mean) in &rows {
        out.push_str(&csv_line(&[
            faces.to_string(),
            init.to_string(),
            mean.clone().unwrap_or_default(),
        ]));
        out.push('\n');
    }
    write_output(&args.output, &out)
}

/// Exposes the float DP backend for scripting parity checks (not a
/// subcommand; used by integration tests through the library).
pub fn dp_backend_estimate(spec: &GameSpec, rounds: u32) -> Result<f64> {
    dp_reference(spec, rounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(
            "2..40".parse::<RangeArg>().unwrap(),
            RangeArg { start: 2, end: 40 }
        );
        assert_eq!(
            "6".parse::<RangeArg>().unwrap(),
            RangeArg { start: 6, end: 6 }
        );
        assert!("5..2".parse::<RangeArg>().is_err());
        assert!("a..b".parse::<RangeArg>().is_err());
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn pgf_dump_round_trip() {
        let text = "# W=6\n# k=1\n2\t1\t1\n3\t1\t1\n5\t1\t1\n# k=2\n2\t1\t2\n";
        let (w, rounds) = parse_pgf_dump(text).unwrap();
        assert_eq!(w, 6);
        assert_eq!(rounds.len(), 2);
        assert_eq!(rounds[0].0, 1);
        assert_eq!(rounds[0].1.len(), 3);
        assert_eq!(rounds[1].1[0], (2, BigUint::from(1u32), 2));
    }

    #[test]
    fn cli_parses_representative_lines() {
        Cli::try_parse_from([
            "dicewalk",
            "run",
            "--faces",
            "6",
            "--predicate",
            "prime",
            "--init",
            "0",
            "--rounds",
            "200",
            "--digits",
            "20",
        ])
        .unwrap();
        Cli::try_parse_from([
            "dicewalk",
            "run",
            "--die",
            "1:2,2:1",
            "--predicate",
            "semiprime",
            "--eps",
            "1e-7",
        ])
        .unwrap();
        // Exactly one of --faces/--die and --rounds/--eps.
        assert!(Cli::try_parse_from([
            "dicewalk",
            "run",
            "--faces",
            "6",
            "--die",
            "1:1",
            "--predicate",
            "prime",
            "--rounds",
            "5",
        ])
        .is_err());
        assert!(
            Cli::try_parse_from(["dicewalk", "run", "--faces", "6", "--predicate", "prime",])
                .is_err()
        );
        assert!(Cli::try_parse_from([
            "dicewalk",
            "run",
            "--faces",
            "6",
            "--predicate",
            "prime",
            "--rounds",
            "5",
            "--eps",
            "0.5",
        ])
        .is_err());
        Cli::try_parse_from([
            "dicewalk",
            "sweep",
            "--faces",
            "2..10",
            "--predicate",
            "prime",
            "--eps",
            "1e-7",
        ])
        .unwrap();
        Cli::try_parse_from([
            "dicewalk",
            "plotdata",
            "--faces",
            "2..20",
            "--predicate",
            "prime",
            "--init",
            "0..3",
            "--eps",
            "1e-7",
        ])
        .unwrap();
    }
}
