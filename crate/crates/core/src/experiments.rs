//! `(x, q)` sweeps: per-row variance data, bound envelopes with their
//! `x^ε` factors stripped, exceedance fractions, exponent fits, and CSV /
//! JSON serialization.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::MobiusTable;
use crate::error::{Error, Result};
use crate::numeric::{fmt_sig12, log_spaced, round_sig12, CompensatedSum};
use crate::progressions::{profile, variance, ProgressionProfile};

pub const DEFAULT_EPS: f64 = 0.05;
/// `q` values per decade in the default grid.
pub const DEFAULT_Q_PER_DECADE: usize = 16;
pub const DEFAULT_X_VALUES: [u64; 2] = [100_000, 1_000_000];
/// Sanity cap on `V / (x^{1/2}q^{1/2} + x q^{−1/2})`.
pub const DEFAULT_ENVELOPE_CAP: f64 = 100.0;

pub const CSV_HEADER: &str = "x,q,phi,V,centered_variance,T,thm1_env,blomer_env,hooley_env,mn_ratio,moment1,moment1_env,exceed_c1,exceed_c2,exceed_c3,in_range_c3";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: u64,
    pub q: u64,
    pub phi: u64,
    #[serde(rename = "V")]
    pub v: f64,
    pub centered_variance: f64,
    #[serde(rename = "T")]
    pub t: u128,
    /// `x^{1/2}q^{1/2} + x q^{−1/2}`
    pub thm1_env: f64,
    /// `x + min(x^{5/3}/q, q²)`
    pub blomer_env: f64,
    /// `(x/q)^{1/2} + q^{1/2}`
    pub hooley_env: f64,
    /// `V / (x^{1/2}q^{1/2})`
    pub mn_ratio: f64,
    /// `Σ*_a |E(x;q,a)|`
    pub moment1: f64,
    /// `x^{1/4}q^{3/4} + x^{1/2}q^{1/4}`
    pub moment1_env: f64,
    /// fraction of units with `|E| > (x/q)^{1/4} x^ε`
    pub exceed_c1: f64,
    /// fraction of units with `|E| > x^{1/2+ε} q^{−3/4}`
    pub exceed_c2: f64,
    /// fraction of units with `|E| > x^{1/4+ε} q^{1/4}`
    pub exceed_c3: f64,
    /// `x^{1/4} ≤ q ≤ x^{1/3}`
    pub in_range_c3: bool,
}

/// Exceedance thresholds at a given `ε`.
pub fn exceed_thresholds(x: u64, q: u64, eps: f64) -> [f64; 3] {
    let (x, q) = (x as f64, q as f64);
    [
        (x / q).powf(0.25) * x.powf(eps),
        x.powf(0.5 + eps) / q.powf(0.75),
        x.powf(0.25 + eps) * q.powf(0.25),
    ]
}

fn fraction_above(errors: &[f64], threshold: f64) -> f64 {
    errors.iter().filter(|e| e.abs() > threshold).count() as f64 / errors.len() as f64
}

pub fn row_from_profile(p: &ProgressionProfile, eps: f64) -> SweepRow {
    let rep = variance(p);
    let errors = p.error_terms();
    let (xf, qf) = (p.x() as f64, p.q() as f64);
    let moment1: CompensatedSum = errors.iter().map(|e| e.abs()).collect();
    let [t1, t2, t3] = exceed_thresholds(p.x(), p.q(), eps);
    SweepRow {
        x: p.x(),
        q: p.q(),
        phi: p.phi(),
        v: rep.v,
        centered_variance: rep.centered_variance.to_f64(),
        t: rep.t,
        thm1_env: xf.sqrt() * qf.sqrt() + xf / qf.sqrt(),
        blomer_env: xf + (xf.powf(5.0 / 3.0) / qf).min(qf * qf),
        hooley_env: (xf / qf).sqrt() + qf.sqrt(),
        mn_ratio: rep.v / (xf.sqrt() * qf.sqrt()),
        moment1: moment1.value(),
        moment1_env: xf.powf(0.25) * qf.powf(0.75) + xf.sqrt() * qf.powf(0.25),
        exceed_c1: fraction_above(&errors, t1),
        exceed_c2: fraction_above(&errors, t2),
        exceed_c3: fraction_above(&errors, t3),
        in_range_c3: xf.powf(0.25) <= qf && qf <= xf.powf(1.0 / 3.0),
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::domain(format!("eps = {eps} must lie in (0, 1/4)")));
    }
    Ok(())
}

/// One row per `q`, in input order; rows are computed in parallel.
pub fn sweep(table: &MobiusTable, x: u64, qs: &[u64], eps: f64) -> Result<Vec<SweepRow>> {
    check_eps(eps)?;
    table.check_range(x)?;
    if let Some(&q) = qs.iter().find(|&&q| q == 0 || q > x) {
        return Err(Error::domain(format!("q = {q} outside [1, x = {x}]")));
    }
    qs.par_iter()
        .map(|&q| profile(table, x, q).map(|p| row_from_profile(&p, eps)))
        .collect()
}

/// `DEFAULT_Q_PER_DECADE` log-spaced moduli per decade across
/// `[x^{0.3}, x]`.
pub fn default_q_grid(x: u64) -> Vec<u64> {
    let lo = (x as f64).powf(0.3);
    let hi = x as f64;
    let decades = (hi / lo).log10();
    let steps = (decades * DEFAULT_Q_PER_DECADE as f64).ceil() as usize + 1;
    log_spaced(lo, hi, steps)
}

/// Rows for every `x` of the default grid, `x` ascending.
pub fn default_sweep(table: &MobiusTable, eps: f64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for x in DEFAULT_X_VALUES {
        rows.extend(sweep(table, x, &default_q_grid(x), eps)?);
    }
    Ok(rows)
}

/// `V / thm1_env` per row.
pub fn envelope_ratios(rows: &[SweepRow]) -> Vec<f64> {
    rows.iter().map(|r| r.v / r.thm1_env).collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// Fixed `x`, regress `log V` on `log q`.
    VaryQ,
    /// Fixed `q`, regress `log V` on `log x`.
    VaryX,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mode: FitMode,
    /// exponent of `x`; only fitted in [`FitMode::VaryX`]
    pub alpha: Option<f64>,
    /// exponent of `q`; only fitted in [`FitMode::VaryQ`]
    pub beta: Option<f64>,
    /// `exp(intercept)`; absorbs the fixed variable's power
    #[serde(rename = "C")]
    pub c: f64,
    /// RMS of the log residuals
    pub residual: f64,
    pub n_points: usize,
    /// rows dropped because `V ≤ 0`
    pub excluded: usize,
}

/// Least squares fit of `log V = log C + slope · log(varying variable)`.
pub fn fit_exponents(rows: &[SweepRow], mode: FitMode) -> Result<FitResult> {
    let fixed = |r: &SweepRow| match mode {
        FitMode::VaryQ => r.x,
        FitMode::VaryX => r.q,
    };
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| fixed(r) != fixed(first)) {
            return Err(Error::domain(format!(
                "{mode:?} fit needs a constant {}",
                if mode == FitMode::VaryQ { "x" } else { "q" }
            )));
        }
    }
    let usable: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.v > 0.0)
        .map(|r| {
            let var = match mode {
                FitMode::VaryQ => r.q,
                FitMode::VaryX => r.x,
            };
            ((var as f64).ln(), r.v.ln())
        })
        .collect();
    let excluded = rows.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::domain(format!(
            "need at least 3 rows with V > 0, got {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit regressor is constant"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = (usable
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let (alpha, beta) = match mode {
        FitMode::VaryQ => (None, Some(slope)),
        FitMode::VaryX => (Some(slope), None),
    };
    Ok(FitResult {
        mode,
        alpha,
        beta,
        c: intercept.exp(),
        residual,
        n_points: usable.len(),
        excluded,
    })
}

fn csv_line(r: &SweepRow) -> String {
    let f = fmt_sig12;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.x,
        r.q,
        r.phi,
        f(r.v),
        f(r.centered_variance),
        r.t,
        f(r.thm1_env),
        f(r.blomer_env),
        f(r.hooley_env),
        f(r.mn_ratio),
        f(r.moment1),
        f(r.moment1_env),
        f(r.exceed_c1),
        f(r.exceed_c2),
        f(r.exceed_c3),
        r.in_range_c3
    )
}

pub fn write_csv(rows: &[SweepRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", csv_line(r))?;
    }
    Ok(())
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Format(format!("unexpected CSV header {other:?}"))),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 16 {
                return Err(Error::Format(format!("expected 16 cells in {line:?}")));
            }
            let bad = |i: usize| Error::Format(format!("cell {i} of {line:?}"));
            let int = |i: usize| cells[i].parse::<u64>().map_err(|_| bad(i));
            let real = |i: usize| cells[i].parse::<f64>().map_err(|_| bad(i));
            Ok(SweepRow {
                x: int(0)?,
                q: int(1)?,
                phi: int(2)?,
                v: real(3)?,
                centered_variance: real(4)?,
                t: cells[5].parse().map_err(|_| bad(5))?,
                thm1_env: real(6)?,
                blomer_env: real(7)?,
                hooley_env: real(8)?,
                mn_ratio: real(9)?,
                moment1: real(10)?,
                moment1_env: real(11)?,
                exceed_c1: real(12)?,
                exceed_c2: real(13)?,
                exceed_c3: real(14)?,
                in_range_c3: cells[15].parse().map_err(|_| bad(15))?,
            })
        })
        .collect()
}

impl SweepRow {
    /// Copy with every float rounded to 12 significant digits.
    pub fn rounded(&self) -> SweepRow {
        let r = round_sig12;
        SweepRow {
            v: r(self.v),
            centered_variance: r(self.centered_variance),
            thm1_env: r(self.thm1_env),
            blomer_env: r(self.blomer_env),
            hooley_env: r(self.hooley_env),
            mn_ratio: r(self.mn_ratio),
            moment1: r(self.moment1),
            moment1_env: r(self.moment1_env),
            exceed_c1: r(self.exceed_c1),
            exceed_c2: r(self.exceed_c2),
            exceed_c3: r(self.exceed_c3),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub eps: f64,
    /// seconds since the Unix epoch; omitted in deterministic runs
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<u64>,
}

impl ReportMeta {
    pub fn new(seed: u64, eps: f64, deterministic: bool) -> Self {
        let timestamp = (!deterministic).then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        ReportMeta {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            eps,
            timestamp,
        }
    }
}

/// JSON document: `{"meta": {...}, "rows": [...], "fit": {...}?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub meta: ReportMeta,
    pub rows: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<FitResult>,
}

pub fn to_json(rows: &[SweepRow], meta: ReportMeta, fit: Option<FitResult>) -> String {
    let report = SweepReport {
        meta,
        rows: rows.iter().map(SweepRow::rounded).collect(),
        fit: fit.map(|f| FitResult {
            alpha: f.alpha.map(round_sig12),
            beta: f.beta.map(round_sig12),
            c: round_sig12(f.c),
            residual: round_sig12(f.residual),
            ..f
        }),
    };
    serde_json::to_string_pretty(&report).expect("serializable") + "\n"
}
