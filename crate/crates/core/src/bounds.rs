//! End-to-end bracket for the infimum `s_f = inf E[f(X)]`.
//!
//! Both discretizations of every marginal are arranged comonotonically, run
//! through the RA with restarts, and scaled by `1/n`. For a componentwise
//! increasing cost the lower grid gives an estimate below `s_f` and the upper
//! grid one above it. The comonotonic value of each grid estimates the
//! supremum `S_f` of a supermodular cost.

use std::time::Instant;

use crate::costfn::CostFunction;
use crate::error::{Error, Result};
use crate::marginals::{DiscreteMarginal, DiscretizationKind, MarginalSpec};
use crate::oracle::comonotonic_value;
use crate::ra::{run_ra_restarts, ArrangementMatrix, DEFAULT_MAX_SWEEPS};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsOptions {
    /// Grid size of each discretization.
    pub n: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Truncate unbounded sides at the default tail mass instead of failing.
    pub auto_truncate: bool,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            n: 1000,
            restarts: 1,
            seed: 0,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            auto_truncate: true,
        }
    }
}

/// Per-discretization run diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SideDiagnostics {
    pub converged: bool,
    pub sweeps: usize,
    pub column_rearrangements: usize,
    /// Restart that produced the reported estimate.
    pub best_restart: usize,
    pub runtime_ms: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsResult {
    /// Best RA objective on the lower grid, divided by `n`.
    pub lower_estimate: f64,
    /// Best RA objective on the upper grid, divided by `n`.
    pub upper_estimate: f64,
    /// Comonotonic value on the upper grid.
    pub sup_estimate: f64,
    /// Comonotonic value on the lower grid.
    pub sup_estimate_lower: f64,
    pub n: usize,
    pub restarts: usize,
    pub lower: SideDiagnostics,
    pub upper: SideDiagnostics,
    /// Effective probability window of each marginal, `None` if untruncated.
    pub truncations: Vec<Option<(f64, f64)>>,
}

impl BoundsResult {
    pub fn gap(&self) -> f64 {
        self.upper_estimate - self.lower_estimate
    }

    pub fn any_truncated(&self) -> bool {
        self.truncations.iter().any(Option::is_some)
    }
}

fn prepare(
    specs: &[MarginalSpec],
    cost: &CostFunction,
    auto_truncate: bool,
) -> Result<Vec<MarginalSpec>> {
    if specs.len() != cost.arity() {
        return Err(Error::ArityMismatch {
            expected: cost.arity(),
            got: specs.len(),
        });
    }
    if !cost.agg.is_validated() {
        return Err(Error::ValidationFailed(
            "custom aggregation has not been validated".into(),
        ));
    }
    Ok(specs
        .iter()
        .map(|s| match auto_truncate {
            true => s.with_default_truncation().unwrap_or_else(|| s.clone()),
            false => s.clone(),
        })
        .collect())
}

fn discretize_all(
    specs: &[MarginalSpec],
    n: usize,
    kind: DiscretizationKind,
) -> Result<Vec<DiscreteMarginal>> {
    specs.iter().map(|s| s.discretize(n, kind)).collect()
}

struct Side {
    estimate: f64,
    sup: f64,
    diagnostics: SideDiagnostics,
}

fn run_side(
    specs: &[MarginalSpec],
    cost: &CostFunction,
    opts: &BoundsOptions,
    kind: DiscretizationKind,
) -> Result<Side> {
    let started = Instant::now();
    let marginals = discretize_all(specs, opts.n, kind)?;
    let start = ArrangementMatrix::comonotonic(&marginals)?;
    let sup = comonotonic_value(&marginals, cost)?;
    let res = run_ra_restarts(&start, cost, opts.restarts, opts.seed, opts.max_sweeps)?;
    Ok(Side {
        estimate: res.objective / opts.n as f64,
        sup,
        diagnostics: SideDiagnostics {
            converged: res.converged,
            sweeps: res.sweeps,
            column_rearrangements: res.column_rearrangements,
            best_restart: res.restart,
            runtime_ms: started.elapsed().as_millis(),
        },
    })
}

/// Lower and upper RA estimates of `s_f`, plus the comonotonic `S_f` estimates.
///
/// The lower and upper pipelines run concurrently and share the seed, so
/// their gap reflects the discretization rather than restart luck.
pub fn estimate_inf(
    specs: &[MarginalSpec],
    cost: &CostFunction,
    opts: &BoundsOptions,
) -> Result<BoundsResult> {
    let specs = prepare(specs, cost, opts.auto_truncate)?;
    let (lower, upper) = rayon::join(
        || run_side(&specs, cost, opts, DiscretizationKind::Lower),
        || run_side(&specs, cost, opts, DiscretizationKind::Upper),
    );
    let (lower, upper) = (lower?, upper?);
    Ok(BoundsResult {
        lower_estimate: lower.estimate,
        upper_estimate: upper.estimate,
        sup_estimate: upper.sup,
        sup_estimate_lower: lower.sup,
        n: opts.n,
        restarts: opts.restarts,
        lower: lower.diagnostics,
        upper: upper.diagnostics,
        truncations: specs.iter().map(|s| s.truncation).collect(),
    })
}

/// Comonotonic values `(lower grid, upper grid)`, each already divided by `n`.
pub fn estimate_sup(
    specs: &[MarginalSpec],
    cost: &CostFunction,
    n: usize,
    auto_truncate: bool,
) -> Result<(f64, f64)> {
    let specs = prepare(specs, cost, auto_truncate)?;
    let lower = comonotonic_value(&discretize_all(&specs, n, DiscretizationKind::Lower)?, cost)?;
    let upper = comonotonic_value(&discretize_all(&specs, n, DiscretizationKind::Upper)?, cost)?;
    Ok((lower, upper))
}
