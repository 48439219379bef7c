//! Command-line front end.
//!
//! Exit codes: `0` success, `1` a required check failed (unwaived quote
//! mismatch, failed claim, runtime error), `2` bad arguments or an
//! equation file that does not parse or validate.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::corpus;
use crate::criteria::AlphaChoice;
use crate::eqspec::{validate, EquationSpec, SpecError};
use crate::grid::fmt_sig;
use crate::params::DEFAULT_GRID_POINTS;
use crate::report::{self, ExampleOptions, ReportError, VerdictTable};
use crate::simulate::{self, decay_rate, History, SimError, DEFAULT_STEP};

#[derive(Debug, Parser)]
#[command(
    name = "ndstab",
    version,
    about = "Stability tests for (x(t) - a(t) x(g(t)))' = -b(t) x(h(t)) + f(t)",
    disable_help_subcommand = true
)]
pub struct Cli {
    /// Print machine-readable JSON instead of tables
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for every random choice (seeded histories)
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every stability criterion on an equation file
    Check(CheckArgs),
    /// Integrate the equation and write the trajectory as CSV
    Simulate(SimulateArgs),
    /// Sweep alpha and report the feasible range of a parameter in b
    Sweep(SweepArgs),
    /// Reproduce the bundled worked examples
    Examples(ExamplesArgs),
    /// Compare the Yu and Tang-Zou tests with this crate's tests
    Compare(CompareArgs),
    /// Fundamental function X(t, s) of x' = -b(t) x(h(t))
    Fundamental(FundamentalArgs),
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Equation file (JSON)
    pub spec: PathBuf,
    /// `auto` or a value in [0, 1]
    #[arg(long, default_value = "auto", value_parser = parse_alpha)]
    pub alpha: AlphaChoice,
    /// Sample points for grid estimates of sup/inf quantities
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Equation file (JSON)
    pub spec: PathBuf,
    /// End of the integration interval
    #[arg(long)]
    pub t_end: f64,
    /// Step size
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Initial function: const:<v>, sin, seeded or seeded:<n>
    #[arg(long, default_value = "const:1")]
    pub history: String,
    /// Write the CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Window length for the decay estimate printed with --out
    #[arg(long, default_value_t = report::DECAY_WINDOW)]
    pub window: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Equation file (JSON)
    pub spec: PathBuf,
    /// Parameter that scales b
    #[arg(long, default_value = "r")]
    pub param: String,
    /// Alpha grid as start:stop:step
    #[arg(long, default_value = "0:1:0.01", value_parser = parse_range)]
    pub alpha_grid: Range,
    /// Optional grid of parameter values (start:stop:step) for per-cell flags
    #[arg(long, value_parser = parse_range)]
    pub r_grid: Option<Range>,
    /// Write the band CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the per-cell CSV here (requires --r-grid)
    #[arg(long, requires = "r_grid")]
    pub cells_out: Option<PathBuf>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Sample points for grid estimates of sup/inf quantities
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("which").required(true).args(["all", "id"])))]
pub struct ExamplesArgs {
    /// Every bundled example
    #[arg(long)]
    pub all: bool,
    /// One example by number (1-5)
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub id: Option<u8>,
    /// Waiver file replacing the bundled one
    #[arg(long)]
    pub waivers: Option<PathBuf>,
    /// Skip the decay simulation
    #[arg(long)]
    pub no_simulate: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Equation file (JSON)
    pub spec: PathBuf,
    /// Sample points for grid estimates of sup/inf quantities
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
pub struct FundamentalArgs {
    /// Equation file (JSON)
    pub spec: PathBuf,
    /// Initial time s
    #[arg(long)]
    pub s: f64,
    /// End of the interval (default: s + 50)
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Step size
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Write the CSV (t,x) here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        report::alpha_grid(self.start, self.stop, self.step)
    }
}

fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        return Err(format!("expected start:stop:step, got `{s}`"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    let r = Range {
        start: num(a)?,
        stop: num(b)?,
        step: num(c)?,
    };
    if !(r.step > 0.0) || !r.start.is_finite() || !r.stop.is_finite() || r.stop < r.start {
        return Err(format!("`{s}` is not an increasing range with positive step"));
    }
    Ok(r)
}

fn parse_alpha(s: &str) -> Result<AlphaChoice, String> {
    if s == "auto" {
        return Ok(AlphaChoice::Auto);
    }
    match s.parse::<f64>() {
        Ok(a) if (0.0..=1.0).contains(&a) => Ok(AlphaChoice::Fixed(a)),
        Ok(a) => Err(format!("alpha must lie in [0, 1], got {a}")),
        Err(_) => Err(format!("expected `auto` or a number, got `{s}`")),
    }
}

/// `const:<v>`, `sin`, `seeded`, `seeded:<n>`.
pub fn parse_history(s: &str, seed: u64, t0: f64) -> Result<History, String> {
    match s.split_once(':') {
        None if s == "sin" => Ok(History::Sine),
        None if s == "seeded" => Ok(History::seeded(seed, t0)),
        Some(("const", v)) => v
            .parse()
            .map(History::Constant)
            .map_err(|_| format!("bad constant history `{v}`")),
        Some(("seeded", n)) => n
            .parse()
            .map(|n| History::seeded(n, t0))
            .map_err(|_| format!("bad history seed `{n}`")),
        _ => Err(format!("unknown history `{s}` (const:<v>, sin, seeded[:<n>])")),
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Spec(_) | CliError::Invalid(_) => 2,
            CliError::Report(
                ReportError::Spec(_)
                | ReportError::UnknownParam(_)
                | ReportError::ParamOutsideB { .. }
                | ReportError::NotLinear { .. },
            ) => 2,
            _ => 1,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let threads = match &cli.command {
        Command::Sweep(s) => s.threads.unwrap_or(0),
        _ => 1,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli, out, err)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match &cli.command {
        Command::Check(a) => check(cli, a, out),
        Command::Simulate(a) => simulate(cli, a, out),
        Command::Sweep(a) => sweep(cli, a, out),
        Command::Examples(a) => examples(cli, a, out, err),
        Command::Compare(a) => compare(cli, a, out),
        Command::Fundamental(a) => fundamental(cli, a, out),
    }
}

fn load(path: &Path) -> Result<EquationSpec, CliError> {
    Ok(EquationSpec::from_path(path)?)
}

fn load_valid(path: &Path, grid_points: usize) -> Result<EquationSpec, CliError> {
    let spec = load(path)?;
    let v = validate(&spec, grid_points.min(10_000));
    if !v.passed() {
        let failures: Vec<String> = v
            .failures()
            .map(|c| format!("{:?}: {}", c.assumption, c.detail))
            .collect();
        return Err(CliError::Invalid(format!(
            "{} violates the standing assumptions: {}",
            path.display(),
            failures.join("; ")
        )));
    }
    Ok(spec)
}

fn emit_json<T: Serialize>(out: &mut (dyn Write + Send), value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn check(cli: &Cli, a: &CheckArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let spec = load_valid(&a.spec, a.grid_points)?;
    let analysis = report::analyze(&spec, a.alpha, a.grid_points)?;
    if cli.json {
        return emit_json(out, &analysis);
    }
    let s = &analysis.summary;
    writeln!(out, "equation: {}", spec.name.as_deref().unwrap_or("(unnamed)"))?;
    writeln!(
        out,
        "sup|a| = {}  inf a = {}  sup b = {}  inf b = {}  sigma = {}  tau = {}  delta = {}",
        fmt_sig(s.norm_a),
        fmt_sig(s.inf_a),
        fmt_sig(s.norm_b),
        fmt_sig(s.inf_b),
        fmt_sig(s.sigma),
        fmt_sig(s.tau),
        fmt_sig(s.delta)
    )?;
    write!(out, "{}", VerdictTable(&analysis.verdicts))?;
    for n in &analysis.notes {
        writeln!(out, "note: {n}")?;
    }
    match analysis.verdicts.iter().find(|v| v.satisfied) {
        Some(v) => writeln!(out, "stable: {} certifies it", v.criterion.name())?,
        None => writeln!(out, "undecided: no criterion is satisfied")?,
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    points: usize,
    t_end: f64,
    sup_abs_x: f64,
    decay: Option<simulate::DecayEstimate>,
    stats: simulate::IntegratorStats,
}

fn simulate(cli: &Cli, a: &SimulateArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let spec = load(&a.spec)?;
    let history = parse_history(&a.history, cli.seed, spec.t0).map_err(CliError::Usage)?;
    let traj = simulate::integrate(&spec, &history, a.t_end, a.step)?;
    let Some(path) = &a.out else {
        traj.write_csv(&mut *out)?;
        return Ok(());
    };
    traj.write_csv(create(path)?)?;
    let summary = SimulationSummary {
        points: traj.len(),
        t_end: traj.t_end(),
        sup_abs_x: traj.sup_abs(),
        decay: decay_rate(&traj, 0.0, a.window).ok(),
        stats: traj.stats,
    };
    if cli.json {
        return emit_json(out, &summary);
    }
    writeln!(out, "wrote {} points to {}", summary.points, path.display())?;
    writeln!(out, "sup |x| = {}", fmt_sig(summary.sup_abs_x))?;
    match &summary.decay {
        Some(d) => writeln!(out, "decay: {:?}, rate {:.6}, last/first window sup {}", d.verdict, d.rate, fmt_sig(d.ratio))?,
        None => writeln!(out, "decay: interval shorter than five windows of {}", a.window)?,
    }
    Ok(())
}

fn sweep(cli: &Cli, a: &SweepArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let spec = load(&a.spec)?;
    let alphas = a.alpha_grid.points();
    let rs = a.r_grid.map(|r| r.points());
    let sweep = report::sweep_alpha_r(&spec, &a.param, &alphas, rs.as_deref(), a.grid_points)?;
    if let Some(path) = &a.cells_out {
        report::write_cells_csv(create(path)?, &sweep)?;
    }
    let Some(path) = &a.out else {
        report::write_sweep_csv(&mut *out, &sweep)?;
        return Ok(());
    };
    report::write_sweep_csv(create(path)?, &sweep)?;
    if cli.json {
        return emit_json(out, &sweep);
    }
    let feasible = sweep.rows.iter().filter(|r| r.feasible).count();
    writeln!(out, "wrote {} rows to {}", sweep.rows.len(), path.display())?;
    writeln!(out, "feasible alpha values: {feasible} of {}", sweep.rows.len())?;
    if let Some(best) = sweep.rows.iter().filter(|r| r.feasible).max_by(|x, y| x.r_upper.total_cmp(&y.r_upper)) {
        writeln!(
            out,
            "largest {}: {} < {} < {} at alpha = {}",
            a.param,
            fmt_sig(best.r_lower),
            a.param,
            fmt_sig(best.r_upper),
            fmt_sig(best.alpha)
        )?;
    }
    Ok(())
}

fn examples(cli: &Cli, a: &ExamplesArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let waivers = match &a.waivers {
        Some(p) => corpus::parse_waivers(&std::fs::read_to_string(p)?)?,
        None => corpus::waivers()?,
    };
    let ids: Vec<u8> = a.id.into_iter().collect();
    let opts = ExampleOptions {
        simulate: !a.no_simulate,
        ..ExampleOptions::default()
    };
    let reports = report::reproduce_examples(&ids, &waivers, opts)?;
    if cli.json {
        emit_json(out, &reports)?;
    } else {
        for r in &reports {
            writeln!(out, "{r}")?;
        }
    }
    let failures: Vec<String> = reports.iter().flat_map(|r| r.failures()).collect();
    if !failures.is_empty() {
        for f in &failures {
            writeln!(err, "failed: {f}")?;
        }
        return Err(CliError::Failed(format!("{} unwaived failure(s)", failures.len())));
    }
    Ok(())
}

fn compare(cli: &Cli, a: &CompareArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let spec = load_valid(&a.spec, a.grid_points)?;
    let table = report::compare_baselines(&spec, a.grid_points)?;
    if cli.json {
        return emit_json(out, &table);
    }
    write!(out, "{table}")?;
    Ok(())
}

#[derive(Serialize)]
struct FundamentalSummary {
    s: f64,
    t_end: f64,
    min: f64,
    argmin: f64,
    positive: bool,
    lemma5: Option<simulate::Lemma5Check>,
}

fn fundamental(cli: &Cli, a: &FundamentalArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let spec = load(&a.spec)?;
    let t_end = a.t_end.unwrap_or(a.s + 50.0).min(spec.horizon);
    let traj = simulate::fundamental(&spec, a.s, t_end, a.step)?;
    if let Some(path) = &a.out {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["t", "x"])?;
        for (i, x) in traj.x.iter().enumerate() {
            w.write_record([fmt_sig(traj.time(i)), fmt_sig(*x)])?;
        }
        w.flush()?;
    }
    let (argmin, min) = traj
        .x
        .iter()
        .enumerate()
        .map(|(i, x)| (traj.time(i), *x))
        .fold((a.s, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    let summary = FundamentalSummary {
        s: a.s,
        t_end: traj.t_end(),
        min,
        argmin,
        positive: min > 0.0,
        lemma5: simulate::lemma5_condition(&spec, t_end, 1000, 256).ok(),
    };
    if cli.json {
        return emit_json(out, &summary);
    }
    writeln!(out, "X(t, {}) on [{}, {}]", fmt_sig(a.s), fmt_sig(a.s), fmt_sig(summary.t_end))?;
    writeln!(out, "min X = {} at t = {} ({})", fmt_sig(min), fmt_sig(argmin), if summary.positive { "positive" } else { "NOT positive" })?;
    if let Some(l) = &summary.lemma5 {
        writeln!(
            out,
            "sup int_(h(t))^t b = {} vs 1/e: {}",
            fmt_sig(l.sup_integral),
            if l.holds { "positivity guaranteed" } else { "no guarantee" }
        )?;
    }
    Ok(())
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Sim(SimError::Csv(e))
    }
}
