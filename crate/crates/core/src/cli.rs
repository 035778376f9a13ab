//! Command-line front end (`gradlab`).
//!
//! Exit status: 0 when every report of the run passes, 1 when a check
//! fails or a computation aborts, 2 on usage errors. Reports are written
//! before the status is decided.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::conditions::{self, SampleRegion, DEFAULT_ALGEBRAIC_TOL, DEFAULT_SEED};
use crate::expr::{parse, Expr};
use crate::operator::SpecDocument;
use crate::report::{conditions_csv, fmt_f64, ConditionReport, VerificationReport};
use crate::solver::{self, Grid, Scheme, SolverConfig, Trajectory};
use crate::verify::{self, BERNSTEIN_EPSILON};
use crate::{presets, EtaMode, Error, Execution, OperatorFamily, Result};

/// Residual slack of the Bakry inequality.
const BAKRY_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "gradlab", version, about = "Pointwise gradient estimates for nonautonomous parabolic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the structural hypotheses (ellipticity, algebraic condition,
    /// dissipativity constant, Lyapunov function) over a box.
    Check(CheckArgs),
    /// Evolve an initial datum and write snapshots.
    Solve(SolveArgs),
    /// Hypotheses, c0, then gradient, Bernstein and max-principle checks.
    VerifyGradient(VerifyArgs),
    /// Bakry residuals and inferred algebraic tensor at given points.
    ProbeNecessity(ProbeArgs),
    /// Inspect the preset catalog.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Debug, Subcommand)]
enum PresetsAction {
    /// Names, summaries and parameters.
    List,
    /// Print the spec document of a preset.
    Show { name: String },
}

#[derive(Debug, Args)]
struct OperatorArgs {
    /// Preset name (see `presets list`).
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    preset: Option<String>,
    /// Spec document file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Preset parameter override `name=expr`, repeatable.
    #[arg(long = "param", value_name = "NAME=EXPR")]
    params: Vec<String>,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the random sample points.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Ellipticity function: smallest eigenvalue of Q, or the document's
    /// eta expression. Defaults to the expression when there is one.
    #[arg(long, value_enum)]
    eta_mode: Option<EtaModeArg>,
    /// Run everything on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EtaModeArg {
    LambdaMin,
    Expr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Implicit,
    Explicit,
    CrankNicolson,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    operator: OperatorArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Half-width R of the sampled box [-R, R]^d.
    #[arg(long = "box", default_value_t = 2.0)]
    half_width: f64,
    /// Time range `lo:hi` of the samples.
    #[arg(long = "t", value_parser = parse_range)]
    t_range: Option<(f64, f64)>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Initial datum f(x).
    #[arg(long)]
    f: String,
    /// Initial time.
    #[arg(long)]
    s: f64,
    /// Final time.
    #[arg(long = "T")]
    t_end: f64,
    /// Half-width R of the computational box.
    #[arg(long = "box", default_value_t = 3.0)]
    half_width: f64,
    /// Points per axis (odd).
    #[arg(long = "grid", default_value_t = 61)]
    n: usize,
    #[arg(long, value_enum, default_value = "implicit")]
    scheme: SchemeArg,
    /// Fixed time step; chosen from the grid when absent.
    #[arg(long)]
    dt: Option<f64>,
    /// Number of snapshots including both ends.
    #[arg(long, default_value_t = 5)]
    snapshots: usize,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    operator: OperatorArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Also solve on larger boxes with the same spacing, e.g. `4,6,8`,
    /// and tabulate the differences.
    #[arg(long, value_delimiter = ',')]
    nested: Vec<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    operator: OperatorArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Constant c0, or `auto` to estimate it on the run's box and times.
    #[arg(long, default_value = "auto")]
    c0: String,
    /// Gradient tolerance; defaults to 5e-3 * sup |grad f|.
    #[arg(long)]
    tol_grad: Option<f64>,
    /// Bernstein tolerance; defaults to 1e-2 * max |grad u|^2.
    #[arg(long)]
    tol_bern: Option<f64>,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[command(flatten)]
    operator: OperatorArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Time of the probe.
    #[arg(long)]
    s: f64,
    /// Probe point `x1,x2,...`, repeatable.
    #[arg(long = "at", required = true, value_parser = parse_point)]
    points: Vec<Vec<f64>>,
    /// Test function for the Bakry residual.
    #[arg(long)]
    f: Option<String>,
    /// Constant of the Bakry residual, or `auto`.
    #[arg(long, default_value = "0")]
    c0: String,
    /// Half-width of the box used by `--c0 auto`.
    #[arg(long = "box", default_value_t = 2.0)]
    half_width: f64,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(lo <= hi) {
        return Err(format!("need lo <= hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}")))
        .collect()
}

/// Entry point used by the binary. Prints to stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with(args, &mut out, &mut err)
}

/// Like [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let line = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let started = Instant::now();
    let result = match cli.command {
        Command::Check(a) => cmd_check(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::VerifyGradient(a) => cmd_verify(&a),
        Command::ProbeNecessity(a) => cmd_probe(&a),
        Command::Presets { action } => cmd_presets(&action),
    };
    match result {
        Ok(outcome) => {
            let _ = out.write_all(outcome.stdout.as_bytes());
            if let Some(dir) = &outcome.out_dir {
                if let Err(e) = outcome.write(dir, &line, started) {
                    let _ = writeln!(err, "error: {e}");
                    return 1;
                }
            }
            if outcome.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if is_usage_error(&e) {
                2
            } else {
                1
            }
        }
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Preset(_) | Error::Spec(_) | Error::InvalidArgument(_) | Error::Io(_)
    ) || matches!(e, Error::Solver(solver::SolverError::InvalidGrid(_) | solver::SolverError::InvalidConfig(_) | solver::SolverError::TimeSpan { .. }))
}

/// Everything a command produced.
#[derive(Default)]
struct Outcome {
    pass: bool,
    stdout: String,
    out_dir: Option<PathBuf>,
    /// Human report, written to `report.txt`.
    report: String,
    conditions: Option<String>,
    margins: Option<String>,
    trajectory: Option<Trajectory>,
    extra_files: Vec<(String, String)>,
    spec_text: String,
    seeds: Vec<u64>,
    tolerances: Vec<(String, f64)>,
}

impl Outcome {
    fn write(&self, dir: &Path, line: &str, started: Instant) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut put = |name: &str, body: &str| -> Result<()> {
            fs::write(dir.join(name), body)?;
            files.push(name.to_string());
            Ok(())
        };
        put("report.txt", &self.report)?;
        if let Some(c) = &self.conditions {
            put("conditions.csv", c)?;
        }
        if let Some(m) = &self.margins {
            put("margins.csv", m)?;
        }
        for (name, body) in &self.extra_files {
            put(name, body)?;
        }
        if let Some(traj) = &self.trajectory {
            let snap_dir = dir.join("snapshots");
            for p in solver::write_snapshots(traj, &snap_dir)? {
                let rel = p.strip_prefix(dir).unwrap_or(&p);
                files.push(rel.to_string_lossy().into_owned());
            }
        }
        let mut m = String::new();
        let _ = writeln!(m, "command={line}");
        let _ = writeln!(m, "spec_sha256={}", sha256_hex(&self.spec_text));
        for s in &self.seeds {
            let _ = writeln!(m, "seed={s}");
        }
        for (k, v) in &self.tolerances {
            let _ = writeln!(m, "tol_{k}={}", fmt_f64(*v));
        }
        let _ = writeln!(m, "version={} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
        let _ = writeln!(m, "parallel_feature={}", cfg!(feature = "parallel"));
        let _ = writeln!(m, "pass={}", self.pass);
        for f in &files {
            let _ = writeln!(m, "file={f}");
        }
        let _ = writeln!(m, "file=manifest.txt");
        let _ = writeln!(m, "wall_clock_s={:.3}", started.elapsed().as_secs_f64());
        fs::write(dir.join("manifest.txt"), m)?;
        Ok(())
    }
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Operator plus the text of its spec document.
fn load_operator(a: &OperatorArgs) -> Result<(OperatorFamily, String)> {
    let text = match (&a.preset, &a.spec) {
        (Some(name), None) => {
            let overrides = presets::parse_overrides(a.params.iter().map(String::as_str))?;
            presets::instantiate(name, &overrides)?.render()
        }
        (None, Some(path)) => {
            if !a.params.is_empty() {
                return Err(Error::InvalidArgument("--param only applies to presets".into()));
            }
            let text = fs::read_to_string(path)?;
            // Fail early with the document's own error.
            SpecDocument::parse(&text)?;
            text
        }
        _ => return Err(Error::InvalidArgument("give exactly one of --preset and --spec".into())),
    };
    Ok((OperatorFamily::from_text(&text)?, text))
}

fn eta_mode(op: &OperatorFamily, arg: Option<EtaModeArg>) -> Result<EtaMode> {
    match arg {
        Some(EtaModeArg::LambdaMin) => Ok(EtaMode::LambdaMin),
        Some(EtaModeArg::Expr) => {
            if op.eta_expression().is_none() {
                return Err(Error::InvalidArgument("--eta-mode expr needs an [ellipticity] eta entry".into()));
            }
            Ok(EtaMode::UserExpression)
        }
        None if op.eta_expression().is_some() => Ok(EtaMode::UserExpression),
        None => Ok(EtaMode::LambdaMin),
    }
}

fn execution(common: &CommonArgs) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn parse_f(src: &str, d: usize) -> Result<Expr> {
    parse(src, d).map_err(|e| Error::InvalidArgument(format!("--f: {e}")))
}

/// Runs the four condition checkers. The Lyapunov check is skipped when
/// the document has no Lyapunov section.
fn hypothesis_reports(op: &OperatorFamily, region: &SampleRegion, mode: EtaMode) -> Result<(Vec<ConditionReport>, Vec<String>)> {
    let mut reports = vec![
        conditions::check_ellipticity(op, region)?,
        conditions::check_algebraic(op, region, DEFAULT_ALGEBRAIC_TOL)?,
        conditions::estimate_c0(op, region, mode)?,
    ];
    let mut skipped = Vec::new();
    match op.lyapunov() {
        Some(l) => reports.push(conditions::check_lyapunov(op, &l.phi, l.gamma, region)?),
        None => skipped.push("lyapunov SKIP (no [lyapunov] section)".to_string()),
    }
    Ok((reports, skipped))
}

fn condition_table(reports: &[ConditionReport], skipped: &[String]) -> String {
    let mut s = format!("{:<14} {:<6} {:>24} {:>12}  witness_x\n", "condition", "result", "extremal", "witness_t");
    for r in reports {
        let x = r.witness_x.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(
            s,
            "{:<14} {:<6} {:>24} {:>12.6}  ({x})",
            r.condition,
            if r.pass { "PASS" } else { "FAIL" },
            fmt_f64(r.extremal_value),
            r.witness_t
        );
    }
    for k in skipped {
        let _ = writeln!(s, "{k}");
    }
    s
}

fn verification_line(r: &VerificationReport) -> String {
    format!(
        "{:<14} {:<6} worst_margin={} tol={} at t={} x=({})\n",
        r.kind.to_string(),
        if r.pass { "PASS" } else { "FAIL" },
        fmt_f64(r.worst_margin),
        fmt_f64(r.tolerance),
        r.witness_t,
        r.witness_x.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",")
    )
}

fn default_time_range(op: &OperatorFamily) -> Result<(f64, f64)> {
    let (lo, hi) = op.time_interval();
    if !lo.is_finite() {
        return Err(Error::InvalidArgument("the time interval is unbounded below; pass --t lo:hi".into()));
    }
    Ok((lo + 0.5 * (hi - lo), hi))
}

fn cmd_check(a: &CheckArgs) -> Result<Outcome> {
    let (op, spec_text) = load_operator(&a.operator)?;
    let mode = eta_mode(&op, a.common.eta_mode)?;
    let t_range = match a.t_range {
        Some(r) => r,
        None => default_time_range(&op)?,
    };
    let region = SampleRegion::cube(op.dimension(), a.half_width, t_range)?
        .with_random(conditions::DEFAULT_RANDOM_SAMPLES, a.common.seed)
        .with_execution(execution(&a.common));
    let (reports, skipped) = hypothesis_reports(&op, &region, mode)?;
    let table = condition_table(&reports, &skipped);
    let mut report = table.clone();
    for r in &reports {
        report.push('\n');
        report.push_str(&r.to_kv());
    }
    Ok(Outcome {
        pass: reports.iter().all(|r| r.pass),
        stdout: table,
        out_dir: a.common.out.clone(),
        report,
        conditions: Some(conditions_csv(op.dimension(), &reports)),
        spec_text,
        seeds: vec![a.common.seed],
        tolerances: vec![("algebraic".into(), DEFAULT_ALGEBRAIC_TOL)],
        ..Outcome::default()
    })
}

fn solver_config(run: &RunArgs, common: &CommonArgs) -> SolverConfig {
    SolverConfig {
        scheme: match run.scheme {
            SchemeArg::Implicit => Scheme::Theta(1.0),
            SchemeArg::Explicit => Scheme::ExplicitEuler,
            SchemeArg::CrankNicolson => Scheme::Theta(0.5),
        },
        dt: run.dt,
        snapshots: run.snapshots,
        execution: execution(common),
        ..SolverConfig::default()
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<Outcome> {
    let (op, spec_text) = load_operator(&a.operator)?;
    let d = op.dimension();
    let f = parse_f(&a.run.f, d)?;
    let config = solver_config(&a.run, &a.common);
    let grid = Grid::new(d, a.run.n, a.run.half_width)?;
    let mut extra_files = Vec::new();
    let mut report = String::new();
    let traj = if a.nested.is_empty() {
        solver::evolve(&op, &f, a.run.s, a.run.t_end, &grid, &config)?
    } else {
        let mut radii = vec![a.run.half_width];
        radii.extend(&a.nested);
        let nested = solver::nested_evolve(&op, &f, a.run.s, a.run.t_end, &radii, grid.spacing(), &config)?;
        extra_files.push(("convergence.csv".to_string(), nested.to_csv()));
        for w in &nested.warnings {
            let _ = writeln!(report, "warning={w}");
        }
        nested.trajectory
    };
    let mp = verify::max_principle_check(&traj, traj.f_sup, None);
    let mut stdout = format!(
        "solved {} steps, dt={}, {} linear iterations\n",
        traj.steps, traj.dt, traj.sweeps
    );
    stdout.push_str(&verification_line(&mp));
    let _ = writeln!(report, "steps={}\ndt={}\nsweeps={}", traj.steps, traj.dt, traj.sweeps);
    for (t, sup) in traj.times().iter().zip(&traj.sup_history) {
        let _ = writeln!(report, "sup t={} value={}", fmt_f64(*t), fmt_f64(*sup));
    }
    report.push('\n');
    report.push_str(&mp.to_kv());
    Ok(Outcome {
        pass: mp.pass,
        stdout,
        out_dir: Some(a.common.out.clone().unwrap_or_else(|| PathBuf::from("out"))),
        report,
        margins: Some(mp.margins_csv()),
        trajectory: Some(traj),
        extra_files,
        spec_text,
        tolerances: vec![("max_principle".into(), mp.tolerance), ("linear".into(), config.tolerance)],
        ..Outcome::default()
    })
}

fn c0_value(arg: &str, op: &OperatorFamily, region: &SampleRegion, mode: EtaMode) -> Result<(f64, Option<ConditionReport>)> {
    if arg == "auto" {
        let r = conditions::estimate_c0(op, region, mode)?;
        Ok((r.extremal_value, Some(r)))
    } else {
        let v: f64 = arg
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("--c0 expects a number or auto, got {arg}")))?;
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("--c0 must be finite, got {arg}")));
        }
        Ok((v, None))
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome> {
    let (op, spec_text) = load_operator(&a.operator)?;
    let d = op.dimension();
    let f = parse_f(&a.run.f, d)?;
    let mode = eta_mode(&op, a.common.eta_mode)?;
    let exec = execution(&a.common);
    let region = SampleRegion::cube(d, a.run.half_width, (a.run.s, a.run.t_end))?
        .with_random(conditions::DEFAULT_RANDOM_SAMPLES, a.common.seed)
        .with_execution(exec);
    let (reports, skipped) = hypothesis_reports(&op, &region, mode)?;
    let (c0, _) = c0_value(&a.c0, &op, &region, mode)?;

    let config = solver_config(&a.run, &a.common);
    let grid = Grid::new(d, a.run.n, a.run.half_width)?;
    let grad = verify::gradient_estimate_check(&op, &f, a.run.s, a.run.t_end, c0, &grid, &config, a.tol_grad)?;
    let bern = verify::bernstein_diagnostic(&op, &grad.u, c0, BERNSTEIN_EPSILON, &config, a.tol_bern)?;
    let mp_u = verify::max_principle_check(&grad.u, grad.u.f_sup, None);
    let mp_v = verify::max_principle_check(&grad.v, grad.v.f_sup, None);
    let checks = [&grad.report, &bern.report, &mp_u, &mp_v];

    let mut stdout = condition_table(&reports, &skipped);
    let _ = writeln!(stdout, "c0={}", fmt_f64(c0));
    for r in checks {
        stdout.push_str(&verification_line(r));
    }
    let mut report = stdout.clone();
    for r in &reports {
        report.push('\n');
        report.push_str(&r.to_kv());
    }
    for r in checks {
        report.push('\n');
        report.push_str(&r.to_kv());
    }
    let mut margins = grad.report.margins_csv();
    for r in &checks[1..] {
        r.append_margin_rows(&mut margins);
    }
    let pass = reports.iter().all(|r| r.pass) && checks.iter().all(|r| r.pass);
    Ok(Outcome {
        pass,
        stdout,
        out_dir: a.common.out.clone(),
        report,
        conditions: Some(conditions_csv(d, &reports)),
        margins: Some(margins),
        tolerances: vec![
            ("gradient".into(), grad.report.tolerance),
            ("bernstein".into(), bern.report.tolerance),
            ("max_principle".into(), mp_u.tolerance),
            ("algebraic".into(), DEFAULT_ALGEBRAIC_TOL),
        ],
        trajectory: Some(grad.u),
        spec_text,
        seeds: vec![a.common.seed],
        ..Outcome::default()
    })
}

fn cmd_probe(a: &ProbeArgs) -> Result<Outcome> {
    let (op, spec_text) = load_operator(&a.operator)?;
    let d = op.dimension();
    if let Some(p) = a.points.iter().find(|p| p.len() != d) {
        return Err(Error::InvalidArgument(format!("--at {p:?} does not have {d} coordinates")));
    }
    let mode = eta_mode(&op, a.common.eta_mode)?;
    let region = SampleRegion::cube(d, a.half_width, (a.s, a.s))?
        .with_random(conditions::DEFAULT_RANDOM_SAMPLES, a.common.seed)
        .with_execution(execution(&a.common));
    let (c, _) = c0_value(&a.c0, &op, &region, mode)?;
    let bakry = a.f.as_deref().map(|src| parse_f(src, d)).transpose()?.map(|f| verify::BakryProbe::new(&op, &f));

    let mut stdout = String::new();
    let mut csv = String::from("kind,pattern,i,j,k,inferred,symbolic");
    for i in 1..=d {
        let _ = write!(csv, ",x{i}");
    }
    csv.push('\n');
    let mut reports = Vec::new();
    let mut pass = true;
    for x in &a.points {
        let xs = x.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",");
        let nec = verify::necessity_probe(&op, a.s, x)?;
        for p in &nec.patterns {
            let _ = writeln!(
                csv,
                "necessity,{},{},{},{},{},{},{xs}",
                p.pattern,
                p.indices.0 + 1,
                p.indices.1 + 1,
                p.indices.2 + 1,
                fmt_f64(p.inferred),
                fmt_f64(p.symbolic)
            );
        }
        if let Some(probe) = &bakry {
            let r = probe.residual(a.s, x, c)?;
            let ok = r <= BAKRY_TOL;
            pass &= ok;
            let _ = writeln!(csv, "bakry,,,,,{},,{xs}", fmt_f64(r));
            let _ = writeln!(
                stdout,
                "bakry          {:<6} residual={} at x=({xs}) c={}",
                if ok { "PASS" } else { "FAIL" },
                fmt_f64(r),
                fmt_f64(c)
            );
        }
        let _ = writeln!(
            stdout,
            "necessity      {:<6} max|T|={} at x=({xs})",
            if nec.report.pass { "PASS" } else { "FAIL" },
            fmt_f64(nec.report.extremal_value)
        );
        pass &= nec.report.pass;
        reports.push(nec.report);
    }
    let mut report = stdout.clone();
    for r in &reports {
        report.push('\n');
        report.push_str(&r.to_kv());
    }
    Ok(Outcome {
        pass,
        stdout,
        out_dir: a.common.out.clone(),
        report,
        conditions: Some(conditions_csv(d, &reports)),
        extra_files: vec![("probes.csv".into(), csv)],
        spec_text,
        seeds: vec![a.common.seed],
        tolerances: vec![("bakry".into(), BAKRY_TOL)],
        ..Outcome::default()
    })
}

fn cmd_presets(action: &PresetsAction) -> Result<Outcome> {
    let stdout = match action {
        PresetsAction::List => {
            let mut s = String::new();
            for p in presets::list() {
                let params = p.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
                let _ = writeln!(s, "{:<20} {}", p.name, p.summary);
                if !params.is_empty() {
                    let _ = writeln!(s, "{:<20} params: {params}", "");
                }
            }
            s
        }
        PresetsAction::Show { name } => presets::show(name)?,
    };
    Ok(Outcome {
        pass: true,
        stdout,
        ..Outcome::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("gradlab").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn ranges_and_points_parse() {
        assert_eq!(parse_range("1:2"), Ok((1.0, 2.0)));
        assert!(parse_range("2:1").is_err());
        assert!(parse_range("12").is_err());
        assert_eq!(parse_point("1, -0.5"), Ok(vec![1.0, -0.5]));
        assert!(parse_point("1,a").is_err());
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run_capture(&["check", "--preset", "nope"]).0, 2);
        assert_eq!(run_capture(&["check"]).0, 2);
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        let (code, _, err) = run_capture(&["check", "--preset", "example41", "--param", "gamma=1.5"]);
        assert_eq!(code, 2);
        assert!(err.contains("gamma"), "{err}");
    }

    #[test]
    fn check_reports_example41_and_wang() {
        let (code, out, _) = run_capture(&["check", "--preset", "example41", "--box", "2", "--t", "1:2"]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(out.matches("PASS").count(), 4, "{out}");
        let (code, out, _) = run_capture(&["check", "--preset", "wang-counterexample", "--box", "2", "--t", "1:2"]);
        assert_eq!(code, 1);
        assert!(out.lines().any(|l| l.starts_with("algebraic") && l.contains("FAIL")), "{out}");
    }

    #[test]
    fn presets_list_and_show() {
        let (code, out, _) = run_capture(&["presets", "list"]);
        assert_eq!(code, 0);
        assert!(out.contains("wang-counterexample"));
        let (code, out, _) = run_capture(&["presets", "show", "heat"]);
        assert_eq!(code, 0);
        assert!(out.contains("[diffusion]"), "{out}");
        assert_eq!(run_capture(&["presets", "show", "nope"]).0, 2);
    }

    #[test]
    fn probe_reports_the_wang_derivative() {
        let (code, out, _) = run_capture(&[
            "probe-necessity",
            "--preset",
            "wang-counterexample",
            "--s",
            "1",
            "--at",
            "1,0",
            "--f",
            "sin(x1)",
        ]);
        assert_eq!(code, 1, "{out}");
        assert!(out.contains("necessity      FAIL"), "{out}");
    }
}
