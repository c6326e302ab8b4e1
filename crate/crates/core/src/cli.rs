//! Command-line front end of the `sqfree` binary.
//!
//! Values come from flags, then from an optional `--config` file of
//! `key = value` lines (keys are the long flag names), then from defaults.
//!
//! Exit codes: 0 success, 1 identity or assertion failure (and I/O
//! failures), 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::json;

use crate::arith::{
    sieve_mobius, squarefree_count_segmented, squarefree_count_via_mobius, MobiusTable,
};
use crate::characters::{build_group, character_variance_with, orthogonality_selfcheck, TwistMode};
use crate::error::Error;
use crate::experiments::{
    default_q_grid, envelope_ratios, fit_exponents, median, sweep, to_csv, to_json, FitMode,
    ReportMeta, SweepRow, DEFAULT_EPS, DEFAULT_X_VALUES,
};
use crate::lemmas::{
    congruence_count, count_primitive_solutions, lemma1_bound, lemma1_sweep, lemma3_average,
    LinearFormInstance,
};
use crate::numeric::log_spaced;
use crate::progressions::{
    equivalence_check, gamma_report, profile, t_via_convolution, variance, ResidueBijection,
};
use crate::selfcheck;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Band expected for the fitted `q` exponent near `x^{0.8..0.95}`.
pub const BETA_BAND: (f64, f64) = (0.3, 0.7);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Sieve,
    Profile,
    Variance,
    Characters,
    Lemma1,
    Lemma2,
    Lemma3,
    Gamma,
    Sweep,
    Fit,
    Selfcheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "sqfree",
    version,
    about = "Squarefree integers in arithmetic progressions"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// upper limit x (accepts 1e6 style)
    #[arg(long, value_parser = parse_count)]
    x: Option<u64>,
    /// modulus, or a comma-separated list of moduli
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    q: Option<Vec<u64>>,
    #[arg(long, value_parser = parse_count)]
    q_min: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    q_max: Option<u64>,
    #[arg(long)]
    q_steps: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// omit timestamps so identical configs give identical bytes
    #[arg(long)]
    deterministic: bool,
    /// identity | mul:c | inv | pow:k | random
    #[arg(long)]
    gamma: Option<String>,
    /// linear form w0,w1,w2 (lemma1)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w: Option<Vec<i64>>,
    /// box U0,U1,U2 (lemma1)
    #[arg(long, value_delimiter = ',')]
    u: Option<Vec<f64>>,
    #[arg(long)]
    w_max: Option<i64>,
    #[arg(long)]
    u_max: Option<u32>,
    #[arg(long)]
    v1: Option<f64>,
    #[arg(long)]
    v2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a1: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    a2: Option<i64>,
    #[arg(long)]
    f1: Option<f64>,
    #[arg(long)]
    f2: Option<f64>,
    #[arg(long, value_enum)]
    fit_mode: Option<FitModeArg>,
    /// Möbius table dump to load instead of sieving
    #[arg(long)]
    table: Option<PathBuf>,
    /// key = value file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitModeArg {
    Q,
    X,
}

/// How the moduli of a run are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum QSpec {
    List(Vec<u64>),
    LogRange { min: u64, max: u64, steps: usize },
    Default,
}

/// Fully resolved configuration of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub x: Option<u64>,
    pub q: QSpec,
    pub eps: f64,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub deterministic: bool,
    pub gamma: ResidueBijection,
    pub w: Option<[i64; 3]>,
    pub u: Option<[f64; 3]>,
    pub w_max: i64,
    pub u_max: u32,
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    pub a1: i64,
    pub a2: i64,
    pub f1: f64,
    pub f2: f64,
    pub fit_mode: Option<FitMode>,
    pub table: Option<PathBuf>,
    pub inject_fault: Option<String>,
}

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Integer argument; accepts plain digits or `1e6`-style powers.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: {s:?}"))?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 {
        Ok(v as u64)
    } else {
        Err(format!("not a count: {s:?}"))
    }
}

const CONFIG_KEYS: &[&str] = &[
    "x",
    "q",
    "q-min",
    "q-max",
    "q-steps",
    "eps",
    "seed",
    "threads",
    "out",
    "format",
    "deterministic",
    "gamma",
    "w",
    "u",
    "w-max",
    "u-max",
    "v1",
    "v2",
    "a1",
    "a2",
    "f1",
    "f2",
    "fit-mode",
    "table",
];

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, UsageError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            usage(format!(
                "{}:{}: expected key = value",
                path.display(),
                i + 1
            ))
        })?;
        let key = k.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(usage(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                i + 1
            )));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Flag value, else config value parsed with `parse`, else `None`.
fn layered<T>(
    flag: Option<T>,
    config: &BTreeMap<String, String>,
    key: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Option<T>, UsageError> {
    if flag.is_some() {
        return Ok(flag);
    }
    config
        .get(key)
        .map(|v| parse(v).map_err(|e| usage(format!("config {key}: {e}"))))
        .transpose()
}

fn parse_from_str<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {s:?}"))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',').map(|p| parse_from_str(p.trim())).collect()
}

fn triple<T: Copy>(v: Vec<T>, name: &str) -> Result<[T; 3], UsageError> {
    v.try_into().map_err(|_| {
        usage(format!(
            "--{name} takes exactly three comma-separated values"
        ))
    })
}

/// Parses and validates `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(ParseOutcome::Clap)?;
    resolve(args).map_err(ParseOutcome::Usage)
}

#[derive(Debug)]
pub enum ParseOutcome {
    /// clap error, or a help/version request
    Clap(clap::Error),
    Usage(UsageError),
}

fn resolve(a: Args) -> Result<RunConfig, UsageError> {
    let cfg = match &a.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let x = layered(a.x, &cfg, "x", parse_count)?;
    let q_list = layered(a.q, &cfg, "q", |s| {
        s.split(',').map(|p| parse_count(p.trim())).collect()
    })?;
    let q_min = layered(a.q_min, &cfg, "q-min", parse_count)?;
    let q_max = layered(a.q_max, &cfg, "q-max", parse_count)?;
    let q_steps = layered(a.q_steps, &cfg, "q-steps", parse_from_str)?;
    let eps = layered(a.eps, &cfg, "eps", parse_from_str)?.unwrap_or(DEFAULT_EPS);
    let seed = layered(a.seed, &cfg, "seed", parse_from_str)?.unwrap_or(0);
    let threads = layered(a.threads, &cfg, "threads", parse_from_str)?
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = layered(a.out, &cfg, "out", |s| Ok(PathBuf::from(s)))?;
    let format = layered(a.format, &cfg, "format", |s| Format::from_str(s, true))?;
    let deterministic = a.deterministic
        || layered(None, &cfg, "deterministic", parse_from_str::<bool>)?.unwrap_or(false);
    let gamma_spec = layered(a.gamma, &cfg, "gamma", |s| Ok(s.to_string()))?;
    let w = layered(a.w, &cfg, "w", parse_list)?
        .map(|v| triple(v, "w"))
        .transpose()?;
    let u = layered(a.u, &cfg, "u", parse_list)?
        .map(|v| triple(v, "u"))
        .transpose()?;
    let fit_mode = layered(a.fit_mode, &cfg, "fit-mode", |s| {
        FitModeArg::from_str(s, true)
    })?;

    if !(eps > 0.0 && eps < 0.25) {
        return Err(usage(format!("--eps {eps} must lie in (0, 1/4)")));
    }
    if threads == 0 {
        return Err(usage("--threads must be >= 1"));
    }
    if x == Some(0) {
        return Err(usage("--x must be >= 1"));
    }
    let q = match (q_list, q_min, q_max) {
        (Some(list), None, None) => {
            if list.is_empty() {
                return Err(usage("--q needs at least one modulus"));
            }
            QSpec::List(list)
        }
        (None, Some(min), Some(max)) => {
            if min == 0 || min > max {
                return Err(usage("--q-min must satisfy 1 <= q-min <= q-max"));
            }
            QSpec::LogRange {
                min,
                max,
                steps: q_steps.unwrap_or(16),
            }
        }
        (None, None, None) => QSpec::Default,
        _ => return Err(usage("use either --q or both --q-min and --q-max")),
    };
    if let QSpec::List(l) = &q {
        if l.contains(&0) {
            return Err(usage("--q must be >= 1"));
        }
    }
    if let QSpec::LogRange { steps: 0, .. } = q {
        return Err(usage("--q-steps must be >= 1"));
    }
    let gamma = match gamma_spec {
        Some(s) => ResidueBijection::parse(&s, seed).map_err(|e| usage(e.to_string()))?,
        None => ResidueBijection::Identity,
    };
    let progression = matches!(
        a.command,
        Command::Profile
            | Command::Variance
            | Command::Characters
            | Command::Gamma
            | Command::Sweep
            | Command::Fit
    );
    if progression {
        if let (Some(x), QSpec::List(l)) = (x, &q) {
            if let Some(bad) = l.iter().find(|&&q| q > x) {
                return Err(usage(format!("q = {bad} exceeds x = {x}")));
            }
        }
        if let (Some(x), QSpec::LogRange { max, .. }) = (x, &q) {
            if *max > x {
                return Err(usage(format!("q-max = {max} exceeds x = {x}")));
            }
        }
    }
    Ok(RunConfig {
        command: a.command,
        x,
        q,
        eps,
        seed,
        threads,
        out,
        format: format.unwrap_or_default(),
        deterministic,
        gamma,
        w,
        u,
        w_max: layered(a.w_max, &cfg, "w-max", parse_from_str)?.unwrap_or(20),
        u_max: layered(a.u_max, &cfg, "u-max", parse_from_str)?.unwrap_or(8),
        v1: layered(a.v1, &cfg, "v1", parse_from_str)?,
        v2: layered(a.v2, &cfg, "v2", parse_from_str)?,
        a1: layered(a.a1, &cfg, "a1", parse_from_str)?.unwrap_or(1),
        a2: layered(a.a2, &cfg, "a2", parse_from_str)?.unwrap_or(1),
        f1: layered(a.f1, &cfg, "f1", parse_from_str)?.unwrap_or(0.5),
        f2: layered(a.f2, &cfg, "f2", parse_from_str)?.unwrap_or(0.5),
        fit_mode: fit_mode.map(|m| match m {
            FitModeArg::Q => FitMode::VaryQ,
            FitModeArg::X => FitMode::VaryX,
        }),
        table: layered(a.table, &cfg, "table", |s| Ok(PathBuf::from(s)))?,
        inject_fault: a.inject_fault,
    })
}

/// Failure of a run after argument parsing.
enum RunError {
    Usage(String),
    Failed(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => RunError::Failed(e.to_string()),
            _ => RunError::Usage(e.to_string()),
        }
    }
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e.0)
    }
}

struct Output {
    stdout: String,
    exit: i32,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output {
            stdout,
            exit: EXIT_OK,
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

/// Writes `text` to `--out` when given, otherwise returns it for stdout.
fn emit(cfg: &RunConfig, text: String) -> Result<String, RunError> {
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| {
                RunError::from(Error::Io {
                    path: path.clone(),
                    source: e,
                })
            })?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, RunError> {
    v.ok_or_else(|| RunError::Usage(format!("{flag} is required")))
}

fn single_q(cfg: &RunConfig) -> Result<u64, RunError> {
    match &cfg.q {
        QSpec::List(l) if l.len() == 1 => Ok(l[0]),
        _ => Err(RunError::Usage("a single --q is required".into())),
    }
}

fn load_table(cfg: &RunConfig, limit: u64) -> Result<MobiusTable, RunError> {
    match &cfg.table {
        Some(path) => {
            let t = MobiusTable::load(path)?;
            t.check_range(limit)?;
            Ok(t)
        }
        None => Ok(sieve_mobius(limit)?),
    }
}

/// `(x, moduli)` pairs selected by the configuration.
fn sweep_plan(cfg: &RunConfig) -> Vec<(u64, Vec<u64>)> {
    let xs: Vec<u64> = match cfg.x {
        Some(x) => vec![x],
        None => DEFAULT_X_VALUES.to_vec(),
    };
    xs.into_iter()
        .map(|x| {
            let qs = match &cfg.q {
                QSpec::List(l) => l.clone(),
                QSpec::LogRange { min, max, steps } => log_spaced(*min as f64, *max as f64, *steps),
                QSpec::Default => default_q_grid(x),
            };
            (x, qs)
        })
        .collect()
}

fn sweep_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>, RunError> {
    let plan = sweep_plan(cfg);
    let limit = plan.iter().map(|p| p.0).max().unwrap_or(1);
    let table = load_table(cfg, limit)?;
    let mut rows = Vec::new();
    for (x, qs) in plan {
        rows.extend(sweep(&table, x, &qs, cfg.eps)?);
    }
    Ok(rows)
}

fn run_command(cfg: &RunConfig) -> Result<Output, RunError> {
    match cfg.command {
        Command::Sieve => {
            let x = need(cfg.x, "--x")?;
            let table = load_table(cfg, x)?;
            let count = table.squarefree_count(x)?;
            let report = json!({
                "limit": x,
                "squarefree_count": count,
                "via_mobius_identity": squarefree_count_via_mobius(&table, x)?,
                "segmented_count": squarefree_count_segmented(x, 1 << 16)?,
            });
            if let Some(path) = &cfg.out {
                table.save(path)?;
            }
            Ok(Output::ok(pretty(&report)))
        }
        Command::Profile => {
            let (x, q) = (need(cfg.x, "--x")?, single_q(cfg)?);
            let p = profile(&load_table(cfg, x)?, x, q)?;
            let m = p.expected_count();
            let classes: Vec<_> = p
                .units()
                .elements()
                .iter()
                .zip(p.counts())
                .map(|(&a, &s)| json!({"a": a, "S": s, "E": s as f64 - m}))
                .collect();
            let report = json!({
                "x": x, "q": q, "phi": p.phi(), "c_q": p.c_q(), "total": p.total(),
                "classes": classes,
            });
            Ok(Output::ok(emit(cfg, pretty(&report))?))
        }
        Command::Variance => {
            let (x, q) = (need(cfg.x, "--x")?, single_q(cfg)?);
            let table = load_table(cfg, x)?;
            let p = profile(&table, x, q)?;
            let mut report = serde_json::to_value(variance(&p)).expect("json");
            report["equivalence_defect"] = json!(equivalence_check(&p));
            report["T_convolution"] = json!(t_via_convolution(&table, x, q)?);
            Ok(Output::ok(emit(cfg, pretty(&report))?))
        }
        Command::Characters => {
            let (x, q) = (need(cfg.x, "--x")?, single_q(cfg)?);
            let table = load_table(cfg, x)?;
            let group = build_group(q)?;
            let cv = character_variance_with(&table, &group, x, TwistMode::Bucketed)?;
            let exact = variance(&profile(&table, x, q)?).centered_variance;
            let orth = (group.phi() <= 5_000).then(|| orthogonality_selfcheck(&group));
            let report = json!({
                "x": x, "q": q, "phi": group.phi(),
                "orders": group.orders(), "generators": group.generators(),
                "character_variance": cv,
                "centered_variance": exact,
                "relative_defect": (cv - exact.to_f64()).abs() / exact.to_f64().max(1.0),
                "orthogonality_defect": orth,
            });
            Ok(Output::ok(emit(cfg, pretty(&report))?))
        }
        Command::Lemma1 => match (cfg.w, cfg.u) {
            (Some(w), Some(u)) => {
                let inst = LinearFormInstance::new(w, u)?;
                let count = count_primitive_solutions(&inst)?;
                let bound = lemma1_bound(&inst);
                let report = json!({"w": w, "U": u, "count": count, "bound": bound});
                let exit = if (count as f64) <= bound {
                    EXIT_OK
                } else {
                    EXIT_FAILURE
                };
                Ok(Output {
                    stdout: emit(cfg, pretty(&report))?,
                    exit,
                })
            }
            (None, None) => {
                let s = lemma1_sweep(cfg.w_max, cfg.u_max);
                let exit = if s.violations.is_empty() {
                    EXIT_OK
                } else {
                    EXIT_FAILURE
                };
                let report = serde_json::to_value(&s).expect("json");
                Ok(Output {
                    stdout: emit(cfg, pretty(&report))?,
                    exit,
                })
            }
            _ => Err(RunError::Usage("--w and --u go together".into())),
        },
        Command::Lemma2 => {
            let q = single_q(cfg)?;
            let (v1, v2) = (need(cfg.v1, "--v1")?, need(cfg.v2, "--v2")?);
            let c = congruence_count(v1, v2, q, cfg.a1, cfg.a2)?;
            let report = json!({
                "V1": v1, "V2": v2, "q": q, "a1": cfg.a1, "a2": cfg.a2,
                "N": c.n, "N_direct": c.n_direct,
                "N_star": c.n_star.to_string(),
                "N_star_value": *c.n_star.numer() as f64 / *c.n_star.denom() as f64,
                "M": c.m.as_ref().map(|m| m.to_string()),
                "M_value": c.m.as_ref().and_then(|m| m.to_f64()),
            });
            Ok(Output::ok(emit(cfg, pretty(&report))?))
        }
        Command::Lemma3 => {
            let q = single_q(cfg)?;
            let r = lemma3_average(q, cfg.f1, cfg.f2)?;
            let mut report = serde_json::to_value(&r).expect("json");
            report["ratio"] = json!(r.ratio());
            Ok(Output::ok(emit(cfg, pretty(&report))?))
        }
        Command::Gamma => {
            let (x, q) = (need(cfg.x, "--x")?, single_q(cfg)?);
            let p = profile(&load_table(cfg, x)?, x, q)?;
            let r = gamma_report(&p, &cfg.gamma)?;
            let report = serde_json::to_value(&r).expect("json");
            Ok(Output::ok(emit(cfg, pretty(&report))?))
        }
        Command::Sweep => {
            let rows = sweep_rows(cfg)?;
            let text = match cfg.format {
                Format::Csv => to_csv(&rows),
                Format::Json => to_json(
                    &rows,
                    ReportMeta::new(cfg.seed, cfg.eps, cfg.deterministic),
                    None,
                ),
            };
            let ratios = envelope_ratios(&rows);
            eprintln!(
                "{} rows; median V/thm1_env = {}",
                rows.len(),
                median(&ratios).map_or("n/a".into(), crate::numeric::fmt_sig12)
            );
            Ok(Output::ok(emit(cfg, text)?))
        }
        Command::Fit => {
            let rows = sweep_rows(cfg)?;
            let mode = cfg.fit_mode.unwrap_or(FitMode::VaryQ);
            let fit = fit_exponents(&rows, mode)?;
            if fit.excluded > 0 {
                eprintln!(
                    "warning: {} rows with V = 0 excluded from the fit",
                    fit.excluded
                );
            }
            let text = match (cfg.format, fit.beta) {
                (Format::Json, _) => to_json(
                    &rows,
                    ReportMeta::new(cfg.seed, cfg.eps, cfg.deterministic),
                    Some(fit),
                ),
                (Format::Csv, beta) => {
                    let in_band = beta.map(|b| b >= BETA_BAND.0 && b <= BETA_BAND.1);
                    pretty(
                        &json!({"fit": fit, "beta_band": [BETA_BAND.0, BETA_BAND.1], "beta_in_band": in_band}),
                    )
                }
            };
            Ok(Output::ok(emit(cfg, text)?))
        }
        Command::Selfcheck => {
            let mut table = load_table(cfg, selfcheck::TABLE_LIMIT)?;
            if let Some(fault) = &cfg.inject_fault {
                if fault != "mu" {
                    return Err(RunError::Usage(format!("unknown fault {fault:?}")));
                }
                let mut values = table.mu_slice()[1..].to_vec();
                values[29] = -values[29];
                table = MobiusTable::from_values(values)?;
            }
            let outcomes = selfcheck::run(&table, cfg.seed)?;
            let mut text = String::new();
            for o in &outcomes {
                text.push_str(&o.line());
                text.push('\n');
            }
            let failed = outcomes.iter().filter(|o| !o.passed()).count();
            text.push_str(&if failed == 0 {
                format!("selfcheck: all {} identities hold\n", outcomes.len())
            } else {
                format!(
                    "selfcheck: {failed} of {} identities FAILED\n",
                    outcomes.len()
                )
            });
            Ok(Output {
                stdout: text,
                exit: if failed == 0 { EXIT_OK } else { EXIT_FAILURE },
            })
        }
    }
}

/// Runs a parsed configuration inside a pool of `cfg.threads` workers,
/// returning the text meant for stdout and the exit code.
pub fn execute(cfg: &RunConfig) -> (String, String, i32) {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => return (String::new(), format!("thread pool: {e}\n"), EXIT_FAILURE),
    };
    match pool.install(|| run_command(cfg)) {
        Ok(out) => (out.stdout, String::new(), out.exit),
        Err(RunError::Usage(m)) => (String::new(), format!("error: {m}\n"), EXIT_USAGE),
        Err(RunError::Failed(m)) => (String::new(), format!("error: {m}\n"), EXIT_FAILURE),
    }
}

/// Entry point of the binary.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_args(argv) {
        Ok(cfg) => cfg,
        Err(ParseOutcome::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
        Err(ParseOutcome::Usage(e)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let (stdout, stderr, code) = execute(&cfg);
    let mut out = std::io::stdout().lock();
    if out
        .write_all(stdout.as_bytes())
        .and_then(|_| out.flush())
        .is_err()
    {
        return EXIT_FAILURE;
    }
    eprint!("{stderr}");
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, ParseOutcome> {
        parse_args(std::iter::once("sqfree").chain(args.iter().copied()))
    }

    #[test]
    fn parses_flags() {
        let cfg = parse(&["variance", "--x", "1e6", "--q", "1009"]).unwrap();
        assert_eq!(cfg.command, Command::Variance);
        assert_eq!(cfg.x, Some(1_000_000));
        assert_eq!(cfg.q, QSpec::List(vec![1009]));
        assert_eq!(cfg.eps, DEFAULT_EPS);

        let cfg = parse(&["gamma", "--x", "10000", "--q", "101", "--gamma", "inv"]).unwrap();
        assert_eq!(cfg.gamma, ResidueBijection::Inverse);

        let cfg = parse(&[
            "sweep",
            "--x",
            "1000",
            "--q-min",
            "10",
            "--q-max",
            "1000",
            "--q-steps",
            "5",
        ])
        .unwrap();
        assert_eq!(
            cfg.q,
            QSpec::LogRange {
                min: 10,
                max: 1000,
                steps: 5
            }
        );

        let cfg = parse(&["lemma1", "--w", "-3,4,5", "--u", "1,2,3"]).unwrap();
        assert_eq!(cfg.w, Some([-3, 4, 5]));
    }

    #[test]
    fn usage_errors() {
        for bad in [
            &["variance", "--x", "100", "--q", "0"][..],
            &["variance", "--x", "100", "--q", "101"],
            &["variance", "--x", "100", "--q", "7", "--bogus"],
            &["gamma", "--x", "100", "--q", "7", "--gamma", "rot:2"],
            &["sweep", "--x", "100", "--eps", "0.3"],
            &["sweep", "--threads", "0"],
            &["sweep", "--q", "5", "--q-min", "2", "--q-max", "9"],
            &["frobnicate"],
        ] {
            assert!(parse(bad).is_err(), "{bad:?}");
        }
        assert_eq!(
            main_with_args(["sqfree", "variance", "--q", "0"]),
            EXIT_USAGE
        );
    }

    #[test]
    fn config_file_precedence() {
        let dir = std::env::temp_dir().join(format!("sqfree-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "# run\nx = 5000\nq = 7\neps=0.1\nseed = 9\n").unwrap();
        let p = path.to_str().unwrap();
        let cfg = parse(&["variance", "--config", p, "--q", "11"]).unwrap();
        assert_eq!(cfg.x, Some(5000));
        assert_eq!(cfg.q, QSpec::List(vec![11]));
        assert_eq!(cfg.eps, 0.1);
        assert_eq!(cfg.seed, 9);

        std::fs::write(&path, "colour = blue\n").unwrap();
        assert!(matches!(
            parse(&["sweep", "--config", p]),
            Err(ParseOutcome::Usage(_))
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn variance_command_output() {
        let cfg = parse(&["variance", "--x", "10", "--q", "3", "--threads", "1"]).unwrap();
        let (out, _, code) = execute(&cfg);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["T"], 13);
        assert_eq!(v["T_convolution"], 13);
        assert_eq!(v["centered_variance"]["numerator"], 1);
        assert_eq!(v["centered_variance"]["denominator"], 2);
    }

    #[test]
    fn gamma_command_output() {
        let cfg = parse(&[
            "gamma",
            "--x",
            "10000",
            "--q",
            "101",
            "--gamma",
            "inv",
            "--threads",
            "1",
        ])
        .unwrap();
        let (out, _, code) = execute(&cfg);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        for key in ["T", "T_gamma", "V", "V_gamma", "defect"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["defect"].as_f64().unwrap() < 1e-6);
        assert_eq!(v["gamma"], "inv");
    }

    #[test]
    fn lemma_commands() {
        let (out, _, code) =
            execute(&parse(&["lemma2", "--v1", "5", "--v2", "5", "--q", "3"]).unwrap());
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["N"], 8);
        assert_eq!(v["N_star"], "8");

        let (out, _, _) =
            execute(&parse(&["lemma3", "--q", "2", "--f1", "0.5", "--f2", "0.5"]).unwrap());
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["sum"], 12.0);

        let (out, _, code) = execute(&parse(&["lemma1", "--w", "1,1,1", "--u", "1,1,1"]).unwrap());
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["count"], 6);
    }

    #[test]
    fn missing_arguments_are_usage_errors() {
        let (_, err, code) = execute(&parse(&["variance", "--q", "3"]).unwrap());
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--x"));
    }
}
