//! Run configuration, batch execution and the CSV report.
//!
//! The configuration is line oriented. Keys before the first `[case <id>]`
//! header set defaults for every case; keys inside a block apply to that case.
//! `#` starts a comment.
//!
//! ```text
//! seed = 42
//! restarts = 3
//!
//! [case uniform-triple]
//! marginal = uniform 0 0.4
//! marginal = uniform 0.1 0.5
//! marginal = exponential 2 truncate 0 0.99999
//! weights = 0.5 0.2 0.3
//! transform = stop_loss 0.3
//! n = 1e5
//! ```
//!
//! Marginals: `uniform a b`, `exponential rate`, `pareto alpha`,
//! `normal mu sigma`, `empirical v1 v2 ...`, `empirical_file path`, each
//! optionally followed by `truncate p_lo p_hi`. Aggregation is either
//! `weights = w1 ... wd` or `aggregation = sum`. Transforms: `identity`,
//! `stop_loss k`, `power p`. Scalar keys: `n`, `restarts`, `seed`,
//! `max_sweeps`, `oracle`, `oracle_budget`, `auto_truncate`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bounds::{estimate_inf, BoundsOptions, BoundsResult};
use crate::costfn::{AggregationSpec, CostFunction, TransformSpec};
use crate::error::{Error, Result};
use crate::marginals::{DiscretizationKind, MarginalSpec};
use crate::oracle::{
    arrangement_count, brute_force_min, brute_force_min_over_opposite_set, DEFAULT_ORACLE_BUDGET,
};
use crate::ra::{ArrangementMatrix, DEFAULT_MAX_SWEEPS};

/// Tolerance of the oracle's theorem check (min over all arrangements vs.
/// min over the opposite set).
pub const THEOREM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CaseConfig {
    pub id: String,
    pub marginals: Vec<MarginalSpec>,
    pub cost: CostFunction,
    pub n: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    pub oracle: bool,
    pub oracle_budget: u64,
    pub auto_truncate: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub cases: Vec<CaseConfig>,
}

/// Command-line overrides applied on top of a parsed configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_sweeps: Option<usize>,
    pub force_oracle: bool,
}

impl RunConfig {
    pub fn apply(&mut self, overrides: &Overrides) {
        for case in &mut self.cases {
            if let Some(seed) = overrides.seed {
                case.seed = seed;
            }
            if let Some(m) = overrides.max_sweeps {
                case.max_sweeps = m;
            }
            case.oracle |= overrides.force_oracle;
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Scalars {
    n: Option<usize>,
    restarts: Option<usize>,
    seed: Option<u64>,
    max_sweeps: Option<usize>,
    oracle: Option<bool>,
    oracle_budget: Option<u64>,
    auto_truncate: Option<bool>,
}

impl Scalars {
    fn or(&self, defaults: &Scalars) -> Scalars {
        Scalars {
            n: self.n.or(defaults.n),
            restarts: self.restarts.or(defaults.restarts),
            seed: self.seed.or(defaults.seed),
            max_sweeps: self.max_sweeps.or(defaults.max_sweeps),
            oracle: self.oracle.or(defaults.oracle),
            oracle_budget: self.oracle_budget.or(defaults.oracle_budget),
            auto_truncate: self.auto_truncate.or(defaults.auto_truncate),
        }
    }
}

#[derive(Debug, Default)]
struct CaseDraft {
    id: String,
    line: usize,
    marginals: Vec<MarginalSpec>,
    weights: Option<Vec<f64>>,
    sum: bool,
    transform: Option<TransformSpec>,
    scalars: Scalars,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn number(line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| perr(line, format!("not a number: {tok:?}")))
}

/// Non-negative integer, also accepting exponent notation such as `1e5`.
fn count(line: usize, tok: &str) -> Result<u64> {
    if let Ok(v) = tok.parse::<u64>() {
        return Ok(v);
    }
    let v = number(line, tok)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(perr(line, format!("not a non-negative integer: {tok:?}")))
    }
}

fn boolean(line: usize, tok: &str) -> Result<bool> {
    match tok {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(perr(line, format!("not a boolean: {tok:?}"))),
    }
}

fn numbers(line: usize, toks: &[&str]) -> Result<Vec<f64>> {
    toks.iter().map(|t| number(line, t)).collect()
}

fn expect_args(line: usize, what: &str, toks: &[&str], n: usize) -> Result<()> {
    if toks.len() == n {
        Ok(())
    } else {
        Err(perr(
            line,
            format!("{what} takes {n} argument(s), got {}", toks.len()),
        ))
    }
}

fn parse_marginal(line: usize, value: &str, base: &Path) -> Result<MarginalSpec> {
    let toks: Vec<&str> = value.split_whitespace().collect();
    let (body, window) = match toks.iter().position(|t| *t == "truncate") {
        Some(pos) => {
            let rest = &toks[pos + 1..];
            expect_args(line, "truncate", rest, 2)?;
            (
                &toks[..pos],
                Some((number(line, rest[0])?, number(line, rest[1])?)),
            )
        }
        None => (&toks[..], None),
    };
    let (family, args) = body
        .split_first()
        .ok_or_else(|| perr(line, "empty marginal"))?;
    let invalid = |e: Error| perr(line, e.to_string());
    let spec = match *family {
        "uniform" => {
            expect_args(line, "uniform", args, 2)?;
            MarginalSpec::uniform(number(line, args[0])?, number(line, args[1])?)
        }
        "exponential" => {
            expect_args(line, "exponential", args, 1)?;
            MarginalSpec::exponential(number(line, args[0])?)
        }
        "pareto" => {
            expect_args(line, "pareto", args, 1)?;
            MarginalSpec::pareto(number(line, args[0])?)
        }
        "normal" => {
            expect_args(line, "normal", args, 2)?;
            MarginalSpec::normal(number(line, args[0])?, number(line, args[1])?)
        }
        "empirical" => {
            let mut values = numbers(line, args)?;
            values.sort_by(f64::total_cmp);
            MarginalSpec::empirical(values)
        }
        "empirical_file" => {
            expect_args(line, "empirical_file", args, 1)?;
            let path = PathBuf::from(args[0]);
            let path = if path.is_absolute() {
                path
            } else {
                base.join(path)
            };
            MarginalSpec::empirical_from_file(path)
        }
        other => return Err(perr(line, format!("unknown marginal family {other:?}"))),
    }
    .map_err(invalid)?;
    match window {
        Some((lo, hi)) => spec.truncate(lo, hi).map_err(invalid),
        None => Ok(spec),
    }
}

fn parse_transform(line: usize, value: &str) -> Result<TransformSpec> {
    let toks: Vec<&str> = value.split_whitespace().collect();
    let (form, args) = toks
        .split_first()
        .ok_or_else(|| perr(line, "empty transform"))?;
    match *form {
        "identity" => {
            expect_args(line, "identity", args, 0)?;
            Ok(TransformSpec::Identity)
        }
        "stop_loss" => {
            if args.is_empty() {
                return Err(Error::Config(format!(
                    "line {line}: stop_loss requires a threshold k"
                )));
            }
            expect_args(line, "stop_loss", args, 1)?;
            TransformSpec::stop_loss(number(line, args[0])?).map_err(|e| perr(line, e.to_string()))
        }
        "power" => {
            expect_args(line, "power", args, 1)?;
            TransformSpec::power(number(line, args[0])?).map_err(|e| perr(line, e.to_string()))
        }
        other => Err(perr(line, format!("unknown transform {other:?}"))),
    }
}

fn set_scalar(scalars: &mut Scalars, line: usize, key: &str, value: &str) -> Result<bool> {
    match key {
        "n" => scalars.n = Some(count(line, value)? as usize),
        "restarts" => scalars.restarts = Some(count(line, value)? as usize),
        "seed" => scalars.seed = Some(count(line, value)?),
        "max_sweeps" => scalars.max_sweeps = Some(count(line, value)? as usize),
        "oracle" => scalars.oracle = Some(boolean(line, value)?),
        "oracle_budget" => scalars.oracle_budget = Some(count(line, value)?),
        "auto_truncate" => scalars.auto_truncate = Some(boolean(line, value)?),
        _ => return Ok(false),
    }
    Ok(true)
}

fn finish(draft: CaseDraft, defaults: &Scalars) -> Result<CaseConfig> {
    let id = draft.id;
    let fail = |msg: String| Error::Config(format!("case {id:?} (line {}): {msg}", draft.line));
    let d = draft.marginals.len();
    if d < 2 {
        return Err(fail(format!("needs at least 2 marginals, got {d}")));
    }
    let agg = match (draft.weights, draft.sum) {
        (Some(_), true) => return Err(fail("both weights and aggregation = sum given".into())),
        (Some(w), false) => {
            if w.len() != d {
                return Err(fail(format!("{} weights for {d} marginals", w.len())));
            }
            AggregationSpec::weighted_sum(w).map_err(|e| fail(e.to_string()))?
        }
        (None, true) => AggregationSpec::sum(d).map_err(|e| fail(e.to_string()))?,
        (None, false) => return Err(fail("missing weights or aggregation".into())),
    };
    let transform = draft
        .transform
        .ok_or_else(|| fail("missing transform".into()))?;
    let s = draft.scalars.or(defaults);
    let n = s.n.ok_or_else(|| fail("missing n".into()))?;
    if n == 0 {
        return Err(fail("n must be positive".into()));
    }
    let restarts = s.restarts.unwrap_or(1);
    if restarts == 0 {
        return Err(fail("restarts must be positive".into()));
    }
    let max_sweeps = s.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS);
    if max_sweeps == 0 {
        return Err(fail("max_sweeps must be positive".into()));
    }
    Ok(CaseConfig {
        id: id.clone(),
        marginals: draft.marginals,
        cost: CostFunction::new(agg, transform),
        n,
        restarts,
        seed: s.seed.unwrap_or(0),
        max_sweeps,
        oracle: s.oracle.unwrap_or(false),
        oracle_budget: s.oracle_budget.unwrap_or(DEFAULT_ORACLE_BUDGET),
        auto_truncate: s.auto_truncate.unwrap_or(true),
    })
}

/// Parses configuration text; relative `empirical_file` paths resolve against
/// the working directory.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, Path::new("."))
}

/// Reads and parses a configuration file; relative `empirical_file` paths
/// resolve against the file's directory.
pub fn parse_config_file(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_in(&text, path.parent().unwrap_or(Path::new(".")))
}

fn parse_config_in(text: &str, base: &Path) -> Result<RunConfig> {
    let mut defaults = Scalars::default();
    let mut drafts: Vec<CaseDraft> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let inner = header
                .strip_suffix(']')
                .ok_or_else(|| perr(line, "unterminated section header"))?
                .trim();
            let id = inner
                .strip_prefix("case")
                .map(str::trim)
                .filter(|id| !id.is_empty())
                .ok_or_else(|| perr(line, "expected [case <id>]"))?;
            drafts.push(CaseDraft {
                id: id.to_string(),
                line,
                ..CaseDraft::default()
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| perr(line, "expected key = value"))?;
        match drafts.last_mut() {
            None => {
                if !set_scalar(&mut defaults, line, key, value)? {
                    return Err(perr(
                        line,
                        format!("key {key:?} is only valid inside a case block"),
                    ));
                }
            }
            Some(case) => match key {
                "marginal" => case.marginals.push(parse_marginal(line, value, base)?),
                "weights" => {
                    case.weights = Some(numbers(
                        line,
                        &value.split_whitespace().collect::<Vec<_>>(),
                    )?)
                }
                "aggregation" => match value {
                    "sum" => case.sum = true,
                    other => return Err(perr(line, format!("unknown aggregation {other:?}"))),
                },
                "transform" => case.transform = Some(parse_transform(line, value)?),
                _ => {
                    if !set_scalar(&mut case.scalars, line, key, value)? {
                        return Err(perr(line, format!("unknown key {key:?}")));
                    }
                }
            },
        }
    }
    if drafts.is_empty() {
        return Err(perr(last_line, "no [case ...] blocks"));
    }
    let cases = drafts
        .into_iter()
        .map(|d| finish(d, &defaults))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunConfig { cases })
}

/// Exhaustive check on both grids, scaled by `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub min_lower: f64,
    pub min_upper: f64,
    pub opposite_min_lower: f64,
    pub opposite_min_upper: f64,
    /// Minimum over all arrangements equals minimum over the opposite set, on both grids.
    pub theorem_holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub bounds: BoundsResult,
    pub oracle: Option<OracleOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub n: usize,
    pub d: usize,
    pub outcome: std::result::Result<CaseOutcome, String>,
}

fn run_oracle(case: &CaseConfig) -> Result<Option<OracleOutcome>> {
    if !case.oracle || arrangement_count(case.n, case.marginals.len()) > case.oracle_budget as u128
    {
        return Ok(None);
    }
    let specs: Vec<MarginalSpec> = case
        .marginals
        .iter()
        .map(|s| match case.auto_truncate {
            true => s.with_default_truncation().unwrap_or_else(|| s.clone()),
            false => s.clone(),
        })
        .collect();
    let scale = case.n as f64;
    let side = |kind| -> Result<(f64, f64)> {
        let grid = specs
            .iter()
            .map(|s| s.discretize(case.n, kind))
            .collect::<Result<Vec<_>>>()?;
        let x = ArrangementMatrix::comonotonic(&grid)?;
        let all = brute_force_min(&x, &case.cost, case.oracle_budget)?.0;
        let opposite = brute_force_min_over_opposite_set(&x, &case.cost, case.oracle_budget)?;
        Ok((all / scale, opposite / scale))
    };
    let (min_lower, opposite_min_lower) = side(DiscretizationKind::Lower)?;
    let (min_upper, opposite_min_upper) = side(DiscretizationKind::Upper)?;
    let agree = |a: f64, b: f64| (a - b).abs() <= THEOREM_TOL * a.abs().max(1.0);
    Ok(Some(OracleOutcome {
        min_lower,
        min_upper,
        opposite_min_lower,
        opposite_min_upper,
        theorem_holds: agree(min_lower, opposite_min_lower) && agree(min_upper, opposite_min_upper),
    }))
}

fn run_case(case: &CaseConfig) -> Result<CaseOutcome> {
    let opts = BoundsOptions {
        n: case.n,
        restarts: case.restarts,
        seed: case.seed,
        max_sweeps: case.max_sweeps,
        auto_truncate: case.auto_truncate,
    };
    let bounds = estimate_inf(&case.marginals, &case.cost, &opts)?;
    let oracle = run_oracle(case)?;
    Ok(CaseOutcome { bounds, oracle })
}

/// Runs every case concurrently; rows come back in configuration order and a
/// failing case yields a row carrying its error message.
pub fn run_cases(config: &RunConfig) -> Vec<ReportRow> {
    config
        .cases
        .par_iter()
        .map(|case| ReportRow {
            id: case.id.clone(),
            n: case.n,
            d: case.marginals.len(),
            outcome: run_case(case).map_err(|e| e.to_string()),
        })
        .collect()
}

/// `printf("%.6g")`-style formatting: six significant digits, trailing zeros dropped.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CSV_HEADER: &str = "case,n,d,lower,upper,sup_lower,sup_upper,sweeps_lower,sweeps_upper,\
restarts,converged_lower,converged_upper,truncation,oracle_min_lower,oracle_min_upper,theorem_check,\
error,runtime_lower_ms,runtime_upper_ms";

/// Number of trailing CSV columns holding wall-clock times.
pub const RUNTIME_COLUMNS: usize = 2;

fn truncation_field(windows: &[Option<(f64, f64)>]) -> String {
    windows
        .iter()
        .map(|w| match w {
            Some((lo, hi)) => format!("{}:{}", format_sig6(*lo), format_sig6(*hi)),
            None => "-".into(),
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Renders the report with a header row. Runtime columns come last.
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let mut fields = vec![csv_field(&row.id), row.n.to_string(), row.d.to_string()];
        match &row.outcome {
            Ok(CaseOutcome { bounds: b, oracle }) => {
                fields.extend([
                    format_sig6(b.lower_estimate),
                    format_sig6(b.upper_estimate),
                    format_sig6(b.sup_estimate_lower),
                    format_sig6(b.sup_estimate),
                    b.lower.sweeps.to_string(),
                    b.upper.sweeps.to_string(),
                    b.restarts.to_string(),
                    b.lower.converged.to_string(),
                    b.upper.converged.to_string(),
                    truncation_field(&b.truncations),
                ]);
                match oracle {
                    Some(o) => fields.extend([
                        format_sig6(o.min_lower),
                        format_sig6(o.min_upper),
                        if o.theorem_holds {
                            "pass".into()
                        } else {
                            "fail".into()
                        },
                    ]),
                    None => fields.extend(["".into(), "".into(), "".into()]),
                }
                fields.push(String::new());
                fields.push(b.lower.runtime_ms.to_string());
                fields.push(b.upper.runtime_ms.to_string());
            }
            Err(msg) => {
                fields.extend(std::iter::repeat_n(String::new(), 13));
                fields.push(csv_field(msg));
                fields.extend([String::new(), String::new()]);
            }
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}
