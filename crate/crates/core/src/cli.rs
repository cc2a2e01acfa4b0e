//! Command-line front end. Every command writes CSV to `--out` or stdout,
//! preceded by a `#` line recording the command, inputs and seed.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use crate::acceptance;
use crate::bounds::{evaluate_all, BoundId, BOUND_COLUMNS};
use crate::io::{fmt_sig, parse_graph_file, CsvOut};
use crate::metric_graph::MetricGraph;
use crate::potential::{Exponent, Potential};
use crate::random::DEFAULT_SEED;
use crate::solver::{solve_spectrum, SolverConfig};
use crate::sweep::{log_grid, sweep_alpha};
use crate::trial::verify_variational_chain;
use crate::Error;

/// Log-spaced coupling scale factors `lo:hi:n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<f64> {
        log_grid(self.lo, self.hi, self.n)
    }
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { lo: 1e-2, hi: 1e4, n: 25 }
    }
}

impl FromStr for SweepGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("expected lo:hi:n, got '{s}'"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("invalid number '{t}'"));
        let (lo, hi) = (num(lo)?, num(hi)?);
        let n: usize = n.trim().parse().map_err(|_| format!("invalid count '{n}'"))?;
        if !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err("sweep endpoints must be positive and finite".into());
        }
        if n == 0 {
            return Err("sweep needs at least one point".into());
        }
        Ok(SweepGrid { lo, hi, n })
    }
}

impl fmt::Display for SweepGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
    }
}

#[derive(Parser, Debug)]
#[command(name = "qgraph", version, about = "Eigenvalues and upper bounds for Schrödinger operators on metric graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Graph and potential JSON file.
    #[arg(long, global = true)]
    pub graph: Option<PathBuf>,
    /// Number of eigenvalues.
    #[arg(long, global = true, default_value_t = 5)]
    pub k: usize,
    /// Comma separated exponents for `‖q₊‖_p` (`inf` allowed).
    #[arg(long, global = true, value_delimiter = ',', default_value = "2")]
    pub p: Vec<Exponent>,
    /// Relative tolerance between successive refinements.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    /// Coupling scale grid `lo:hi:n`, log spaced.
    #[arg(long, global = true)]
    pub sweep: Option<SweepGrid>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the random suites.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Eigenvalues and error estimates.
    Spectrum,
    /// Every bound with its applicability.
    Bounds,
    /// Check eigenvalue ≤ trial maximum ≤ bound and bound soundness.
    Verify,
    /// Eigenvalues and bounds with all couplings scaled over a grid.
    SweepAlpha,
    /// Run the acceptance suite.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Bounds => "bounds",
            Command::Verify => "verify",
            Command::SweepAlpha => "sweep-alpha",
            Command::Selftest => "selftest",
        }
    }
}

/// Validated run parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub graph: Option<PathBuf>,
    pub ps: Vec<Exponent>,
    pub k_max: usize,
    pub tol: f64,
    pub sweep: SweepGrid,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl TryFrom<Cli> for RunConfig {
    type Error = Error;

    fn try_from(cli: Cli) -> Result<Self, Error> {
        if cli.k == 0 {
            return Err(Error::Usage("--k must be at least 1".into()));
        }
        if !(cli.tol > 0.0) {
            return Err(Error::Usage("--tol must be positive".into()));
        }
        if cli.p.is_empty() {
            return Err(Error::Usage("--p needs at least one exponent".into()));
        }
        if cli.graph.is_none() && cli.command != Command::Selftest {
            return Err(Error::Usage(format!("{} requires --graph", cli.command.name())));
        }
        Ok(RunConfig {
            command: cli.command,
            graph: cli.graph,
            ps: cli.p,
            k_max: cli.k,
            tol: cli.tol,
            sweep: cli.sweep.unwrap_or_default(),
            out: cli.out,
            seed: cli.seed,
        })
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A check failed; the report is complete.
    Violations,
    /// The solver hit its refinement cap; output is partial.
    NotConverged,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Violations => 1,
            Status::NotConverged => 3,
        }
    }

    fn worst(self, other: Status) -> Status {
        if self.code() >= other.code() {
            self
        } else {
            other
        }
    }
}

impl RunConfig {
    fn note(&self) -> String {
        let ps: Vec<String> = self.ps.iter().map(ToString::to_string).collect();
        let mut note = format!(
            "command={} k={} p={} tol={} seed={}",
            self.command.name(),
            self.k_max,
            ps.join(","),
            self.tol,
            self.seed
        );
        if let Some(g) = &self.graph {
            note.push_str(&format!(" graph={}", g.display()));
        }
        if self.command == Command::SweepAlpha {
            note.push_str(&format!(" sweep={}", self.sweep));
        }
        note
    }

    fn load(&self) -> Result<(MetricGraph, Potential), Error> {
        let path = self.graph.as_ref().ok_or_else(|| Error::Usage("--graph is required".into()))?;
        Ok(parse_graph_file(path)?)
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig::with_tol(self.tol).eigenvalues_only()
    }
}

/// Execute `cfg`, writing CSV to `out`.
pub fn run(cfg: &RunConfig, out: impl Write) -> Result<Status, Error> {
    match cfg.command {
        Command::Spectrum => spectrum(cfg, out),
        Command::Bounds => bounds(cfg, out),
        Command::Verify => verify(cfg, out),
        Command::SweepAlpha => sweep(cfg, out),
        Command::Selftest => selftest(cfg, out),
    }
}

fn spectrum(cfg: &RunConfig, out: impl Write) -> Result<Status, Error> {
    let (g, q) = cfg.load()?;
    let res = solve_spectrum(&g, &q, cfg.k_max, &cfg.solver())?;
    let mut csv = CsvOut::new(out, &cfg.note(), &["k", "eigenvalue", "error_estimate", "mesh_size", "converged"])?;
    for (j, (l, e)) in res.eigenvalues.iter().zip(&res.error_estimates).enumerate() {
        csv.row([
            (j + 1).to_string(),
            fmt_sig(*l),
            fmt_sig(*e),
            fmt_sig(res.mesh_size),
            res.converged.to_string(),
        ])?;
    }
    csv.finish()?;
    Ok(if res.converged { Status::Ok } else { Status::NotConverged })
}

fn bounds(cfg: &RunConfig, out: impl Write) -> Result<Status, Error> {
    let (g, q) = cfg.load()?;
    let mut csv = CsvOut::new(out, &cfg.note(), &BOUND_COLUMNS)?;
    for &p in &cfg.ps {
        for e in &evaluate_all(&g, &q, p, cfg.k_max).entries {
            csv.row(e.csv_fields())?;
        }
    }
    csv.finish()?;
    Ok(Status::Ok)
}

const VERIFY_COLUMNS: [&str; 11] = [
    "check", "family", "bound_id", "k", "p", "lambda", "trial_max", "bound", "applicable", "holds", "reason",
];

fn verify(cfg: &RunConfig, out: impl Write) -> Result<Status, Error> {
    let (g, q) = cfg.load()?;
    let res = solve_spectrum(&g, &q, cfg.k_max, &cfg.solver())?;
    let mut status = if res.converged { Status::Ok } else { Status::NotConverged };
    let mut csv = CsvOut::new(out, &cfg.note(), &VERIFY_COLUMNS)?;
    for &p in &cfg.ps {
        let chain = verify_variational_chain(&g, &q, p, cfg.k_max)?;
        for l in &chain.links {
            if !l.holds() {
                status = status.worst(Status::Violations);
            }
            csv.row([
                "chain".to_string(),
                l.family.as_str().to_string(),
                l.bound.as_str().to_string(),
                l.k.to_string(),
                p.to_string(),
                fmt_sig(l.lambda_solver),
                fmt_sig(l.trial_max),
                fmt_sig(l.bound_value),
                l.applicable.to_string(),
                l.holds().to_string(),
                l.reason.clone().unwrap_or_default(),
            ])?;
        }
        for e in &evaluate_all(&g, &q, p, cfg.k_max).entries {
            let lambda = res.eigenvalues[e.k - 1];
            let holds = !e.applicable || acceptance::within_bound(lambda, e.value);
            if !holds {
                status = status.worst(Status::Violations);
            }
            csv.row([
                "soundness".to_string(),
                String::new(),
                e.id.as_str().to_string(),
                e.k.to_string(),
                p.to_string(),
                fmt_sig(lambda),
                String::new(),
                fmt_sig(e.value),
                e.applicable.to_string(),
                holds.to_string(),
                e.reason.clone().unwrap_or_default(),
            ])?;
        }
    }
    csv.finish()?;
    Ok(status)
}

fn sweep(cfg: &RunConfig, out: impl Write) -> Result<Status, Error> {
    let (g, q) = cfg.load()?;
    let points = sweep_alpha(&g, &q, &cfg.sweep.points(), cfg.k_max, &cfg.ps, &cfg.solver())?;
    let mut columns = vec!["alpha_scale", "alpha_total", "k", "p", "lambda", "error_estimate", "converged"];
    columns.extend(BoundId::ALL.iter().map(|b| b.as_str()));
    let mut csv = CsvOut::new(out, &cfg.note(), &columns)?;
    let mut status = Status::Ok;
    for pt in &points {
        if !pt.converged {
            status = Status::NotConverged;
        }
        for (p, report) in cfg.ps.iter().zip(&pt.bounds) {
            for k in 1..=cfg.k_max {
                let mut row = vec![
                    fmt_sig(pt.factor),
                    fmt_sig(pt.alpha_total),
                    k.to_string(),
                    p.to_string(),
                    fmt_sig(pt.eigenvalues[k - 1]),
                    fmt_sig(pt.error_estimates[k - 1]),
                    pt.converged.to_string(),
                ];
                row.extend(BoundId::ALL.iter().map(|&id| match report.get(id, k) {
                    Some(e) if e.applicable => fmt_sig(e.value),
                    _ => String::new(),
                }));
                csv.row(row)?;
            }
        }
    }
    csv.finish()?;
    Ok(status)
}

fn selftest(cfg: &RunConfig, out: impl Write) -> Result<Status, Error> {
    let mut csv = CsvOut::new(out, &cfg.note(), &["criterion", "name", "passed", "seconds", "detail"])?;
    let mut status = Status::Ok;
    for o in acceptance::run_all(cfg.seed) {
        eprintln!("{o}");
        if !o.passed {
            status = Status::Violations;
        }
        csv.row([
            o.id.to_string(),
            o.name.to_string(),
            o.passed.to_string(),
            format!("{:.3}", o.elapsed.as_secs_f64()),
            o.detail,
        ])?;
    }
    csv.finish()?;
    Ok(status)
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = RunConfig::try_from(cli).and_then(|cfg| match &cfg.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::Io(e.into()))?;
            run(&cfg, BufWriter::new(file))
        }
        None => run(&cfg, io::stdout().lock()),
    });
    match result {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
