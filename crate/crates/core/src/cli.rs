//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::ThreadPoolBuilder;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::{certificate_for, solve_threshold, tail_bound, tail_chernoff, tail_optimal_c};
use crate::domain::{normalize_direction, Direction, Field, SectionQuery};
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{estimate_exceed_prob, estimate_section_volume, stream_rng, McConfig};
use crate::multidim::{
    central_bracket, decomposition_sides, default_radius, density_mc, empirical_minimum, lambda_decomposition,
    random_frame, AffineSectionQuery,
};
use crate::quadrature::{
    diagonal_limit, diagonal_limit_closed_form, section_upper_bound, section_volume, QuadratureConfig,
};

pub const THREADS_ENV: &str = "CUBE_SECTIONS_THREADS";

/// Exit code when an asserted inequality fails.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit code for usage errors (matches clap).
pub const EXIT_USAGE: i32 = 2;
/// Exit code for numerical or I/O errors.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cube-sections", version, about = "Sections of the unit cube and polydisc")]
pub struct Cli {
    /// Worker threads for sampling (defaults to all cores).
    #[arg(long, env = THREADS_ENV, global = true)]
    pub threads: Option<usize>,
    /// Also write the run report as JSON to this path.
    #[arg(long, global = true)]
    pub emit_json: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Volume of one hyperplane section.
    Section(SectionArgs),
    /// Certified lower bounds with their full inequality chain.
    Certify(CertifyArgs),
    /// Volumes over a grid of distances or diagonal dimensions, as CSV.
    Sweep(SweepArgs),
    /// Sections of higher codimension.
    Multidim(MultidimArgs),
    /// Tail bounds for sums of random unit vectors.
    Tail(TailArgs),
    /// Diagonal sections in high dimension against their limits.
    Asymptotics(AsymptoticsArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct DirectionArgs {
    /// Normal vector as a comma-separated list (normalized internally).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Option<Vec<f64>>,
    /// Diagonal normal (1, ..., 1)/sqrt(n).
    #[arg(long)]
    pub diag: Option<usize>,
}

impl DirectionArgs {
    fn direction(&self) -> Result<Direction> {
        match (&self.a, self.diag) {
            (Some(a), None) => normalize_direction(a),
            (None, Some(n)) => Direction::diagonal(n),
            _ => Err(invalid("give exactly one of --a and --diag")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quad,
    Mc,
    Both,
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if v.fract() != 0.0 || !(1.0..=1e15).contains(&v) {
        return Err(format!("not a positive integer count: {s}"));
    }
    Ok(v as u64)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SectionArgs {
    #[arg(long, value_enum, default_value = "real")]
    pub field: Field,
    #[command(flatten)]
    pub direction: DirectionArgs,
    #[arg(long)]
    pub t: f64,
    #[arg(long, value_enum, default_value = "quad")]
    pub method: Method,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Absolute tolerance of the quadrature.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldChoice {
    Real,
    Complex,
    Both,
}

impl FieldChoice {
    fn fields(self) -> Vec<Field> {
        match self {
            Self::Real => vec![Field::Real],
            Self::Complex => vec![Field::Complex],
            Self::Both => vec![Field::Real, Field::Complex],
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub field: FieldChoice,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "real")]
    pub field: Field,
    /// Normal vector; omit together with --diag to sweep diagonal dimensions.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "diag")]
    pub a: Option<Vec<f64>>,
    #[arg(long)]
    pub diag: Option<usize>,
    /// Sweep the diagonal dimension over this inclusive range (e.g. 2..50) at fixed --t-start.
    #[arg(long, conflicts_with_all = ["a", "diag"])]
    pub diag_range: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub t_start: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_stop: f64,
    #[arg(long, default_value_t = 0.1)]
    pub t_step: f64,
    #[arg(long, value_enum, default_value = "quad")]
    pub method: Method,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MultidimMode {
    Empirical,
    Bracket,
    Decomposition,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MultidimArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_enum, default_value = "empirical")]
    pub mode: MultidimMode,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ball radius for density sampling (default 0.05 sqrt(d)).
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TailArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Distances t > 1.
    #[arg(long, value_delimiter = ',', default_value = "1.2,1.5,2")]
    pub t: Vec<f64>,
    /// Probability level whose threshold should be solved for.
    #[arg(long)]
    pub p: Option<f64>,
    /// Direction for an empirical comparison.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "diag")]
    pub a: Option<Vec<f64>>,
    #[arg(long)]
    pub diag: Option<usize>,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AsymptoticsArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub field: FieldChoice,
    /// Largest diagonal dimension evaluated.
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

/// One labelled number in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub label: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

/// An asserted inequality and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub outputs: Vec<OutputRow>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
    pub seed: u64,
    pub wall_time_ms: u64,
}

impl RunReport {
    fn new(command: &str, inputs: &impl Serialize, seed: u64) -> Self {
        Self {
            command: command.into(),
            inputs: serde_json::to_value(inputs).expect("inputs serialize"),
            outputs: Vec::new(),
            checks: Vec::new(),
            details: None,
            seed,
            wall_time_ms: 0,
        }
    }

    fn row(&mut self, label: impl Into<String>, value: f64, std_error: Option<f64>) {
        self.outputs.push(OutputRow {
            label: label.into(),
            value,
            std_error,
        });
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Plain-text rendering for the terminal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in &self.outputs {
            match row.std_error {
                Some(se) => writeln!(out, "{:<40} {:.12} ± {:.3e}", row.label, row.value, se),
                None => writeln!(out, "{:<40} {:.12}", row.label, row.value),
            }
            .expect("write to string");
        }
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{tag} {}: {}", c.name, c.detail).expect("write to string");
        }
        out
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            print!("{}", report.render());
            if let Some(path) = &cli.emit_json {
                if let Err(e) = write_json(&report, path) {
                    eprintln!("error: {e}");
                    return EXIT_RUNTIME;
                }
            }
            if report.passed() {
                0
            } else {
                for c in report.checks.iter().filter(|c| !c.passed) {
                    eprintln!("FAIL {}: {}", c.name, c.detail);
                }
                EXIT_CHECK_FAILED
            }
        }
        Err(e @ Error::InvalidInput(_)) => {
            eprintln!("usage error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn write_json(report: &RunReport, path: &std::path::Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

/// Runs the parsed command on a dedicated thread pool when a count is given.
pub fn execute(cli: &Cli) -> Result<RunReport> {
    let start = Instant::now();
    let run = || match &cli.command {
        Command::Section(a) => cmd_section(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Multidim(a) => cmd_multidim(a),
        Command::Tail(a) => cmd_tail(a),
        Command::Asymptotics(a) => cmd_asymptotics(a),
    };
    let mut report = match cli.threads {
        Some(0) => return Err(invalid("thread count must be positive")),
        Some(n) => ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    report.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

fn quad_config(tol: f64) -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: tol,
        ..QuadratureConfig::default()
    }
}

pub fn cmd_section(args: &SectionArgs) -> Result<RunReport> {
    let mut report = RunReport::new("section", args, args.seed);
    let query = SectionQuery::new(args.direction.direction()?, args.t, args.field)?;
    let cfg = quad_config(args.tol);
    cfg.validate()?;
    let quad = match args.method {
        Method::Quad | Method::Both => Some(section_volume(&query, &cfg)?),
        Method::Mc => None,
    };
    let mc = match args.method {
        Method::Mc | Method::Both => Some(estimate_section_volume(
            &query,
            &McConfig::new(args.samples, args.seed),
        )?),
        Method::Quad => None,
    };
    if let Some(q) = quad {
        report.row("volume_quad", q, None);
    }
    if let Some(m) = mc {
        report.row("volume_mc", m.value, Some(m.std_error));
    }
    if let (Some(q), Some(m)) = (quad, mc) {
        let gap = (q - m.value).abs();
        report.row("discrepancy", gap, None);
        let limit = 3.0 * m.std_error + args.tol;
        report.check(
            "methods_agree_3sigma",
            gap <= limit,
            format!("|quad - mc| = {gap:.3e} <= {limit:.3e}"),
        );
    }
    Ok(report)
}

pub fn cmd_certify(args: &CertifyArgs) -> Result<RunReport> {
    let mut report = RunReport::new("certify", args, 0);
    let mut certificates = Vec::new();
    for field in args.field.fields() {
        let name = serde_json::to_value(field).expect("field serializes");
        let name = name.as_str().expect("field name");
        let cert = match certificate_for(field) {
            Ok(c) => c,
            Err(e) => {
                report.check(format!("{name}.certificate"), false, e.to_string());
                continue;
            }
        };
        report.row(format!("{name}.p_lower"), cert.p_lower.value, None);
        report.row(
            format!("{name}.lambda_star"),
            cert.p_lower.lambda_star.unwrap_or(f64::NAN),
            None,
        );
        report.row(format!("{name}.threshold"), cert.threshold, None);
        report.row(format!("{name}.final_bound"), cert.final_bound, None);
        for link in &cert.chain {
            report.check(
                format!("{name}.{}", link.name),
                link.satisfied,
                format!("{} (value {})", link.inequality, link.value),
            );
        }
        let valid = cert.validate();
        report.check(
            format!("{name}.revalidation"),
            valid.is_ok(),
            valid
                .err()
                .map_or_else(|| "chain re-evaluated".to_string(), |e| e.to_string()),
        );
        certificates.push(cert);
    }
    report.details = Some(serde_json::json!({ "certificates": certificates }));
    Ok(report)
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| invalid(format!("range must look like 2..50, got {s}")))?;
    let lo: usize = lo
        .trim()
        .parse()
        .map_err(|_| invalid(format!("bad range start in {s}")))?;
    let hi: usize = hi
        .trim()
        .parse()
        .map_err(|_| invalid(format!("bad range end in {s}")))?;
    if lo < 1 || hi < lo {
        return Err(invalid(format!("empty range {s}")));
    }
    Ok((lo, hi))
}

fn t_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start >= 0.0 && stop >= start && step > 0.0) || !(start.is_finite() && stop.is_finite()) {
        return Err(invalid("t grid must satisfy 0 <= start <= stop and step > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    if count > 1_000_000 {
        return Err(invalid("t grid has too many points"));
    }
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// One CSV field with round-trip precision; empty for missing values.
fn csv_number(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:?}"))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<RunReport> {
    let mut report = RunReport::new("sweep", args, args.seed);
    let cfg = quad_config(args.tol);
    cfg.validate()?;
    let mc_cfg = McConfig::new(args.samples, args.seed);
    let field = args.field;
    let points: Vec<(Option<usize>, Direction, f64)> = if let Some(range) = &args.diag_range {
        let (lo, hi) = parse_range(range)?;
        (lo..=hi)
            .map(|n| Ok((Some(n), Direction::diagonal(n)?, args.t_start)))
            .collect::<Result<_>>()?
    } else {
        let direction = DirectionArgs {
            a: args.a.clone(),
            diag: args.diag,
        }
        .direction()?;
        t_grid(args.t_start, args.t_stop, args.t_step)?
            .into_iter()
            .map(|t| (None, direction.clone(), t))
            .collect()
    };

    let by_dimension = args.diag_range.is_some();
    let mut csv = String::from(if by_dimension {
        "n,t,volume,std_error,upper_bound\n"
    } else {
        "t,volume,std_error,upper_bound\n"
    });
    let mut previous: Option<f64> = None;
    let mut monotone = true;
    let mut below_upper = true;
    for (n, direction, t) in points {
        let query = SectionQuery::new(direction, t, field)?;
        let (value, se) = match args.method {
            Method::Quad => (section_volume(&query, &cfg)?, None),
            Method::Mc => {
                let e = estimate_section_volume(&query, &mc_cfg)?;
                (e.value, Some(e.std_error))
            }
            Method::Both => return Err(invalid("sweep takes --method quad or --method mc")),
        };
        let upper = section_upper_bound(t, query.field);
        let slack = se.map_or(2.0 * args.tol, |s| 4.0 * s + args.tol);
        below_upper &= value <= upper + slack;
        if args.method == Method::Quad {
            monotone &= previous.is_none_or(|p| value <= p + 2.0 * args.tol);
        }
        previous = Some(value);
        let label = match n {
            Some(n) => format!("n={n}"),
            None => format!("t={t}"),
        };
        report.row(label, value, se);
        if let Some(n) = n {
            write!(csv, "{n},").expect("write to string");
        }
        writeln!(
            csv,
            "{},{},{},{}",
            csv_number(Some(t)),
            csv_number(Some(value)),
            csv_number(se),
            csv_number(Some(upper))
        )
        .expect("write to string");
    }
    report.check(
        "volume_below_upper_bound",
        below_upper,
        "volume <= upper_bound on every row",
    );
    if args.method == Method::Quad {
        report.check("nonincreasing", monotone, "volume column is nonincreasing");
    }
    match &args.output {
        Some(path) => std::fs::write(path, &csv)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(report)
}

pub fn cmd_multidim(args: &MultidimArgs) -> Result<RunReport> {
    let mut report = RunReport::new("multidim", args, args.seed);
    let (n, d) = (args.n, args.d);
    if !(d >= 1 && d < n && n <= 12 && d <= 3) {
        return Err(invalid(format!("need 1 <= d < n <= 12 and d <= 3, got n={n}, d={d}")));
    }
    if args.trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let mc = McConfig::new(args.samples, args.seed);
    let radius = args.radius.unwrap_or_else(|| default_radius(d));
    let mut rng = stream_rng(args.seed, u64::MAX - 1);
    match args.mode {
        MultidimMode::Empirical => {
            let r = empirical_minimum(n, d, args.trials, &mc)?;
            report.row("min_volume", r.min_volume, Some(r.min_std_error));
            report.row("min_central", r.min_central, None);
            report.check(
                "minimum_positive",
                r.positive(),
                format!("min {} - 4 x {} > 0 ({})", r.min_volume, r.min_std_error, r.method),
            );
            report.details = Some(serde_json::to_value(&r).expect("report serializes"));
        }
        MultidimMode::Bracket => {
            let (lo, hi) = central_bracket(n, d, radius);
            let mut ok = true;
            for i in 0..args.trials {
                let frame = random_frame(n, d, &mut rng)?;
                let query = AffineSectionQuery::new(frame, &vec![0.0; d])?;
                let sub = McConfig {
                    seed: args.seed.wrapping_add(i as u64),
                    ..mc
                };
                let e = density_mc(&query, radius, &sub)?.estimate;
                ok &= e.value + 4.0 * e.std_error >= lo && e.value - 4.0 * e.std_error <= hi;
                report.row(format!("central[{i}]"), e.value, Some(e.std_error));
            }
            report.check(
                "central_bracket",
                ok,
                format!("every central estimate within [{lo:.6}, {hi:.6}] up to 4 standard errors"),
            );
        }
        MultidimMode::Decomposition => {
            let quad = QuadratureConfig::default();
            let fourier = d == 1 || (d == 2 && n >= 4);
            let mut worst_det = 0.0f64;
            let mut worst_identity = 0.0f64;
            for i in 0..args.trials {
                let frame = random_frame(n, d, &mut rng)?;
                let dec = lambda_decomposition(&frame)?;
                let r = frame.columns()[0].norm();
                worst_det = worst_det
                    .max((dec.det_plus - (2.0 + 2.0 * r).powf(-0.5)).abs())
                    .max((dec.det_minus - (2.0 - 2.0 * r).powf(-0.5)).abs());
                if fourier {
                    let (lhs, rhs) = decomposition_sides(&frame, &quad)?;
                    worst_identity = worst_identity.max((lhs - rhs).abs());
                    report.row(format!("identity_residual[{i}]"), lhs - rhs, None);
                }
            }
            report.row("max_det_error", worst_det, None);
            report.check(
                "det_identities",
                worst_det <= 1e-10,
                format!("max error {worst_det:.3e} <= 1e-10"),
            );
            if fourier {
                let limit = 10.0 * quad.abs_tol;
                report.row("max_identity_residual", worst_identity, None);
                report.check(
                    "decomposition_identity",
                    worst_identity <= limit,
                    format!("max residual {worst_identity:.3e} <= {limit:.0e}"),
                );
            }
        }
    }
    Ok(report)
}

pub fn cmd_tail(args: &TailArgs) -> Result<RunReport> {
    let mut report = RunReport::new("tail", args, args.seed);
    let direction = match (&args.a, args.diag) {
        (Some(a), None) => Some(normalize_direction(a)?),
        (None, Some(n)) => Some(Direction::diagonal(n)?),
        _ => None,
    };
    let k = args.k;
    for &t in &args.t {
        let bound = tail_bound(t, k)?;
        let c = tail_optimal_c(t, k);
        report.row(format!("tail_bound(t={t})"), bound, None);
        report.row(format!("chernoff_at_optimal_c(t={t})"), tail_chernoff(c, t, k)?, None);
        if let Some(dir) = &direction {
            let e = estimate_exceed_prob(dir, t, k, &McConfig::new(args.samples, args.seed))?;
            report.row(format!("empirical(t={t})"), e.value, Some(e.std_error));
            let limit = bound + 4.0 * e.std_error;
            report.check(
                format!("tail_sound(t={t})"),
                e.value <= limit,
                format!("empirical {} <= {limit}", e.value),
            );
        }
    }
    if let Some(p) = args.p {
        report.row(format!("threshold(p={p})"), solve_threshold(k, p)?, None);
    }
    Ok(report)
}

pub fn cmd_asymptotics(args: &AsymptoticsArgs) -> Result<RunReport> {
    let mut report = RunReport::new("asymptotics", args, 0);
    let cfg = quad_config(args.tol);
    cfg.validate()?;
    if args.n_max < 2 {
        return Err(invalid("n_max must be at least 2"));
    }
    for field in args.field.fields() {
        let name = serde_json::to_value(field).expect("field serializes");
        let name = name.as_str().expect("field name");
        let closed = diagonal_limit_closed_form(field);
        let limit = diagonal_limit(field.into(), &cfg)?;
        let query = SectionQuery::new(Direction::diagonal(args.n_max)?, 1.0, field)?;
        let at_n = section_volume(&query, &cfg)?;
        report.row(format!("{name}.limit_closed_form"), closed, None);
        report.row(format!("{name}.limit_quadrature"), limit, None);
        report.row(format!("{name}.diag_{}", args.n_max), at_n, None);
        let gap = (limit - closed).abs();
        let allowed = 10.0 * args.tol;
        report.check(
            format!("{name}.limit_matches"),
            gap <= allowed,
            format!("|quadrature - closed form| = {gap:.3e} <= {allowed:.0e}"),
        );
    }
    Ok(report)
}
