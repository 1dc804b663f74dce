//! Command-line experiment runner.
//!
//! Every subcommand prints a CSV table (header row first, floats with 17
//! significant digits) to stdout. With `--out <path>`, or when
//! `INFMEASURE_OUT_DIR` is set, the table is also written to disk next to a
//! `<path>.manifest.json` holding the parsed configuration, library version
//! and timings.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric non-convergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::delta::{
    default_eps_schedule, default_n_schedule, delta_via_families, delta_via_integral, scaling_ratio, sifting,
};
use crate::equidist::{equidist_ratio, product_family_with, relative_measure, SequenceKind, DEFAULT_FAMILY_BUDGET};
use crate::error::{Error, Result};
use crate::function::CylinderFn;
use crate::linmap::{map_rectangle_measure, BlockLinearMap};
use crate::numeric::fmt17;
use crate::presets::{factor_preset, rect_preset, u_corpus, RECT_PRESETS};
use crate::products::{grouped_product, FactorSeq, GroupingAlpha, ProductMode, DEFAULT_MAX_TERMS, DEFAULT_TOL};
use crate::rect::{rect_measure_with, IntervalSeq, RectSpec};
use crate::riemann::{riemann_average, RiemannOptions};

pub const OUT_DIR_ENV: &str = "INFMEASURE_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "infmeasure",
    version,
    about = "Measures on infinite-dimensional rectangles, Riemann integrals and the delta functional",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Also write the CSV to this path, plus `<path>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Numerical tolerance (default depends on the subcommand).
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Seed for randomized corpora and sequences.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Truncation depth.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Ordinary and standard (grouped) infinite products.
    Products(ProductsArgs),
    /// Measure of a rectangle.
    Measure(MeasureArgs),
    /// Counting ratios of product families on an elementary-rectangle corpus.
    Equidist(EquidistArgs),
    /// Riemann integral of a registry function over a rectangle.
    Integrate(IntegrateArgs),
    /// The delta functional as a limit over ε.
    DeltaEval(DeltaArgs),
    /// The sifting property at a shift point.
    Sift(SiftArgs),
    /// Truncated scaling ratios.
    Scaling(ScalingArgs),
    /// Change of variables under block-diagonal linear maps.
    ChangevarCheck(ChangevarArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Ordinary,
    Standard,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<ProductMode> {
        match self {
            Self::Ordinary => vec![ProductMode::Ordinary],
            Self::Standard => vec![ProductMode::Standard],
            Self::Both => vec![ProductMode::Ordinary, ProductMode::Standard],
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ProductsArgs {
    /// Named factor sequence.
    #[arg(long, conflicts_with = "factors")]
    pub preset: Option<String>,
    /// Explicit finite factors, followed by ones.
    #[arg(long, value_delimiter = ',')]
    pub factors: Vec<f64>,
    /// Block sizes; the last one repeats.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    #[arg(long)]
    pub max_terms: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct MeasureArgs {
    /// Preset name, inline JSON spec, or path to a JSON spec.
    #[arg(long, default_value = "unit")]
    pub rect: String,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
}

#[derive(Args, Debug, Serialize)]
pub struct EquidistArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 3, 4, 5, 6, 7])]
    pub n: Vec<usize>,
    /// vdc, weyl or random.
    #[arg(long, default_value = "vdc")]
    pub sequence: String,
    #[arg(long, default_value_t = 20)]
    pub corpus_size: usize,
    /// Largest family size allowed.
    #[arg(long)]
    pub budget: Option<u128>,
}

#[derive(Args, Debug, Serialize)]
pub struct IntegrateArgs {
    #[arg(long)]
    pub func: String,
    #[arg(long, default_value = "unit")]
    pub rect: String,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMethod {
    Integral,
    Families,
    Both,
}

#[derive(Args, Debug, Serialize)]
pub struct DeltaArgs {
    #[arg(long)]
    pub func: String,
    /// Decreasing ε schedule (default 2^-1, ..., 2^-12).
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    /// Family sizes for the families route (default 2..7).
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, value_enum, default_value = "integral")]
    pub method: DeltaMethod,
}

#[derive(Args, Debug, Serialize)]
pub struct SiftArgs {
    #[arg(long)]
    pub func: String,
    /// Shift point T (leading coordinates).
    #[arg(long, value_delimiter = ',', required = true)]
    pub shift: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ScalingArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 1.0, 0.5])]
    pub scalar: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ChangevarArgs {
    /// JSON array of row-major blocks, inline or as a file path.
    #[arg(long)]
    pub blocks: String,
    #[arg(long, default_value = "unit")]
    pub rect: String,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Grouping; defaults to the block sizes followed by ones.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<usize>,
}

/// A finished table plus the exit status it implies.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    code: i32,
    note: Option<String>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
            code: EXIT_OK,
            note: None,
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Input(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Input(format!("csv: {e}")))
    }
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn alpha_from(list: &[usize]) -> Result<GroupingAlpha> {
    if list.is_empty() {
        Ok(GroupingAlpha::ones())
    } else {
        GroupingAlpha::from_list(list)
    }
}

fn alpha_label(list: &[usize]) -> String {
    if list.is_empty() {
        "1".into()
    } else {
        join(list)
    }
}

/// A preset name, inline JSON spec, or JSON file.
pub fn resolve_rect(spec: &str, epsilon: Option<f64>) -> Result<IntervalSeq> {
    if RECT_PRESETS.contains(&spec) {
        return rect_preset(spec, epsilon);
    }
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        std::fs::read_to_string(spec).map_err(|e| Error::Input(format!("cannot read rectangle '{spec}': {e}")))?
    };
    RectSpec::from_json(&text)?.to_rect()
}

fn eps_or_default(eps: &[f64]) -> Vec<f64> {
    if eps.is_empty() {
        default_eps_schedule()
    } else {
        eps.to_vec()
    }
}

fn products(cli: &Cli, a: &ProductsArgs) -> Result<Table> {
    let (label, seq) = match (&a.preset, a.factors.is_empty()) {
        (Some(p), _) => (p.clone(), factor_preset(p)?),
        (None, false) => (format!("factors:{}", join(&a.factors)), FactorSeq::finite(a.factors.clone())),
        (None, true) => return Err(Error::Input("give --preset or --factors".into())),
    };
    let alpha = alpha_from(&a.alpha)?;
    let tol = cli.tol.unwrap_or(DEFAULT_TOL);
    let max_terms = a.max_terms.unwrap_or(DEFAULT_MAX_TERMS);
    let mut t = Table::new(vec![
        "fixture",
        "mode",
        "alpha",
        "status",
        "value",
        "log_value",
        "partials_inspected",
        "spread",
    ]);
    for mode in a.mode.modes() {
        let r = grouped_product(&seq, &alpha, mode, tol, max_terms)?;
        t.push(vec![
            label.clone(),
            mode.to_string(),
            alpha_label(&a.alpha),
            r.status.to_string(),
            opt17(r.value()),
            fmt17(r.log_value),
            r.partials_inspected.to_string(),
            fmt17(r.spread),
        ]);
    }
    Ok(t)
}

fn measure(cli: &Cli, a: &MeasureArgs) -> Result<Table> {
    let rect = resolve_rect(&a.rect, a.epsilon)?;
    let alpha = alpha_from(&a.alpha)?;
    let tol = cli.tol.unwrap_or(DEFAULT_TOL);
    let mut t = Table::new(vec!["rect", "mode", "alpha", "status", "log_value", "value"]);
    for mode in a.mode.modes() {
        match rect_measure_with(&rect, &alpha, mode, tol, DEFAULT_MAX_TERMS) {
            Ok(m) => t.push(vec![
                a.rect.clone(),
                mode.to_string(),
                alpha_label(&a.alpha),
                m.status.to_string(),
                fmt17(m.log_value),
                fmt17(m.value()),
            ]),
            Err(Error::NotInClass) => {
                t.push(vec![
                    a.rect.clone(),
                    mode.to_string(),
                    alpha_label(&a.alpha),
                    "oscillating".into(),
                    String::new(),
                    String::new(),
                ]);
                t.code = EXIT_NO_CONVERGENCE;
                t.note = Some(Error::NotInClass.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(t)
}

fn equidist(cli: &Cli, a: &EquidistArgs) -> Result<Table> {
    let seed = cli.seed.unwrap_or(0);
    let kind = match a.sequence.parse::<SequenceKind>()? {
        SequenceKind::SeededRandom { .. } => SequenceKind::SeededRandom { seed },
        k => k,
    };
    let corpus = u_corpus(seed, a.corpus_size);
    let rect = IntervalSeq::unit();
    let budget = a.budget.unwrap_or(DEFAULT_FAMILY_BUDGET);
    let mut t = Table::new(vec!["n", "u", "overrides", "ratio", "target", "error"]);
    for &n in &a.n {
        let fam = product_family_with(&rect, &[kind], n, &[], budget)?;
        for (i, u) in corpus.iter().enumerate() {
            let ratio = equidist_ratio(&fam, u)?;
            let target = relative_measure(u)?;
            let ov = u
                .overrides()
                .iter()
                .map(|(k, iv)| format!("{k}:[{},{})", fmt17(iv.lo()), fmt17(iv.hi())))
                .collect::<Vec<_>>()
                .join(" ");
            t.push(vec![
                n.to_string(),
                i.to_string(),
                ov,
                fmt17(ratio),
                fmt17(target),
                fmt17((ratio - target).abs()),
            ]);
        }
    }
    Ok(t)
}

fn integrate(cli: &Cli, a: &IntegrateArgs) -> Result<Table> {
    let f = CylinderFn::by_name(&a.func)?;
    let rect = resolve_rect(&a.rect, a.epsilon)?;
    let tol = cli.tol.unwrap_or(1e-3);
    let est = riemann_average(&f, &rect, &RiemannOptions::new(tol))?;
    let mut t = Table::new(vec![
        "func",
        "rect",
        "integral",
        "average",
        "lower_avg",
        "upper_avg",
        "log_measure",
        "cuts",
        "cells",
    ]);
    t.push(vec![
        a.func.clone(),
        a.rect.clone(),
        fmt17(est.integral()),
        fmt17(est.average),
        fmt17(est.lower_avg),
        fmt17(est.upper_avg),
        fmt17(est.log_measure),
        est.cuts.to_string(),
        est.cells.to_string(),
    ]);
    Ok(t)
}

fn push_limit_rows(t: &mut Table, method: &str, target: f64, res: Result<crate::delta::LimitEstimate>) -> Result<()> {
    match res {
        Ok(est) => {
            for r in est.rows {
                t.push(vec![
                    method.into(),
                    fmt17(r.epsilon),
                    r.n.map(|n| n.to_string()).unwrap_or_default(),
                    fmt17(r.estimate),
                    fmt17((r.estimate - target).abs()),
                ]);
            }
            Ok(())
        }
        Err(e @ Error::NoConvergence { .. }) => {
            if let Error::NoConvergence { partial, .. } = &e {
                for &(eps, v) in partial {
                    t.push(vec![method.into(), fmt17(eps), String::new(), fmt17(v), fmt17((v - target).abs())]);
                }
            }
            t.code = EXIT_NO_CONVERGENCE;
            t.note = Some(e.to_string());
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn delta_eval(cli: &Cli, a: &DeltaArgs) -> Result<Table> {
    let f = CylinderFn::by_name(&a.func)?;
    let eps = eps_or_default(&a.eps);
    let ns = if a.n.is_empty() { default_n_schedule() } else { a.n.clone() };
    let tol = cli.tol.unwrap_or(1e-4);
    let target = f.at_origin();
    let mut t = Table::new(vec!["method", "epsilon", "n", "estimate", "error"]);
    if matches!(a.method, DeltaMethod::Integral | DeltaMethod::Both) {
        push_limit_rows(&mut t, "integral", target, delta_via_integral(&f, &eps, tol))?;
    }
    if matches!(a.method, DeltaMethod::Families | DeltaMethod::Both) {
        push_limit_rows(&mut t, "families", target, delta_via_families(&f, &eps, &ns, tol))?;
    }
    Ok(t)
}

fn sift(cli: &Cli, a: &SiftArgs) -> Result<Table> {
    let f = CylinderFn::by_name(&a.func)?;
    let eps = eps_or_default(&a.eps);
    let tol = cli.tol.unwrap_or(1e-4);
    let target = f.eval(&a.shift);
    let mut t = Table::new(vec!["method", "epsilon", "n", "estimate", "error"]);
    push_limit_rows(&mut t, "integral", target, sifting(&f, &a.shift, &eps, tol))?;
    Ok(t)
}

fn scaling(cli: &Cli, a: &ScalingArgs) -> Result<Table> {
    let depth = cli.depth.unwrap_or(10);
    let mut t = Table::new(vec!["scalar", "depth", "epsilon", "log_ratio", "expected", "status"]);
    for &s in &a.scalar {
        let r = scaling_ratio(s, depth, a.epsilon)?;
        t.push(vec![
            fmt17(s),
            depth.to_string(),
            fmt17(a.epsilon),
            fmt17(r.log_ratio),
            fmt17(-(depth as f64) * s.abs().ln()),
            r.status.to_string(),
        ]);
    }
    Ok(t)
}

fn changevar(_cli: &Cli, a: &ChangevarArgs) -> Result<Table> {
    let text = if a.blocks.trim_start().starts_with('[') {
        a.blocks.clone()
    } else {
        std::fs::read_to_string(&a.blocks)
            .map_err(|e| Error::Input(format!("cannot read blocks '{}': {e}", a.blocks)))?
    };
    let map = BlockLinearMap::from_json(&text)?;
    let rect = resolve_rect(&a.rect, a.epsilon)?;
    let alpha = if a.alpha.is_empty() {
        map.natural_alpha()
    } else {
        GroupingAlpha::from_list(&a.alpha)?
    };
    let r = map_rectangle_measure(&map, &rect, &alpha)?;
    let mut t = Table::new(vec![
        "dets",
        "log_abs_det",
        "predicted_log_measure",
        "direct_log_measure",
        "log_discrepancy",
        "agrees",
    ]);
    t.push(vec![
        r.jacobian.dets.iter().map(|&d| fmt17(d)).collect::<Vec<_>>().join(" "),
        fmt17(r.jacobian.log_product),
        fmt17(r.predicted.log_value),
        opt17(r.direct.map(|d| d.log_value)),
        opt17(r.log_discrepancy()),
        r.agrees().to_string(),
    ]);
    if !r.agrees() {
        t.code = EXIT_NO_CONVERGENCE;
        t.note = Some("direct and predicted image measures disagree".into());
    }
    Ok(t)
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Products(_) => "products",
        Command::Measure(_) => "measure",
        Command::Equidist(_) => "equidist",
        Command::Integrate(_) => "integrate",
        Command::DeltaEval(_) => "delta-eval",
        Command::Sift(_) => "sift",
        Command::Scaling(_) => "scaling",
        Command::ChangevarCheck(_) => "changevar-check",
    }
}

fn execute(cli: &Cli) -> Result<Table> {
    match &cli.command {
        Command::Products(a) => products(cli, a),
        Command::Measure(a) => measure(cli, a),
        Command::Equidist(a) => equidist(cli, a),
        Command::Integrate(a) => integrate(cli, a),
        Command::DeltaEval(a) => delta_eval(cli, a),
        Command::Sift(a) => sift(cli, a),
        Command::Scaling(a) => scaling(cli, a),
        Command::ChangevarCheck(a) => changevar(cli, a),
    }
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } | Error::NoConvergence { .. } | Error::NotInClass => EXIT_NO_CONVERGENCE,
        _ => EXIT_INVALID,
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config: &'a Cli,
    argv: Vec<String>,
    version: &'a str,
    exit_code: i32,
    rows: usize,
    note: Option<&'a str>,
    wall_clock_seconds: f64,
    unix_timestamp: u64,
    csv: String,
}

fn manifest_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_artifacts(path: &Path, csv: &[u8], manifest: &Manifest<'_>) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, csv)?;
    let json = serde_json::to_vec_pretty(manifest).map_err(std::io::Error::other)?;
    std::fs::write(manifest_path(path), json)
}

/// Parse `argv` (program name first), run, and report through `out`/`err`.
pub fn run_with_io<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INVALID
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let started = Instant::now();
    let table = match execute(&cli) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let csv = match table.to_csv() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let _ = out.write_all(&csv);
    if let Some(note) = &table.note {
        let _ = writeln!(err, "warning: {note}");
    }

    let name = subcommand_name(&cli.command);
    let target = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{name}.csv"))));
    if let Some(path) = target {
        let manifest = Manifest {
            subcommand: name,
            config: &cli,
            argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            version: env!("CARGO_PKG_VERSION"),
            exit_code: table.code,
            rows: table.rows.len(),
            note: table.note.as_deref(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            unix_timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            csv: path.display().to_string(),
        };
        if let Err(e) = write_artifacts(&path, &csv, &manifest) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_INVALID;
        }
    }
    table.code
}

/// [`run_with_io`] on the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}
