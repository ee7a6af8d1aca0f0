//! Exhaustive ground truth for tiny instances.
//!
//! The objective is invariant under a common permutation of all rows, so the
//! first column stays fixed and the others run through all `n!` orders each,
//! in lexicographic order: `(n!)^(d-1)` arrangements in total.

use itertools::Itertools;

use crate::costfn::CostFunction;
use crate::error::{Error, Result};
use crate::marginals::DiscreteMarginal;
use crate::ra::{objective_unchecked, opposite_set_unchecked, ArrangementMatrix};

pub const DEFAULT_ORACLE_BUDGET: u64 = 1_000_000;

/// `(n!)^(d-1)`, saturating at `u128::MAX`.
pub fn arrangement_count(n: usize, d: usize) -> u128 {
    let fact = (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k));
    fact.and_then(|f| (1..d).try_fold(1u128, |acc, _| acc.checked_mul(f)))
        .unwrap_or(u128::MAX)
}

fn check_budget(x: &ArrangementMatrix, budget: u64) -> Result<()> {
    let required = arrangement_count(x.n(), x.d());
    if required > budget as u128 {
        Err(Error::BudgetExceeded {
            required,
            budget: budget as u128,
        })
    } else {
        Ok(())
    }
}

fn check_arity(x: &ArrangementMatrix, cost: &CostFunction) -> Result<()> {
    if cost.arity() == x.d() {
        Ok(())
    } else {
        Err(Error::ArityMismatch {
            expected: cost.arity(),
            got: x.d(),
        })
    }
}

/// Calls `visit` with the columns of every arrangement in `P(X)` modulo row order.
fn for_each_arrangement<F: FnMut(&[Vec<f64>])>(x: &ArrangementMatrix, mut visit: F) {
    let n = x.n();
    let d = x.d();
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let mut state = vec![0usize; d];
    let mut cols = x.columns().to_vec();
    loop {
        for j in 1..d {
            let src = x.column(j);
            for (dst, &k) in cols[j].iter_mut().zip(&perms[state[j]]) {
                *dst = src[k];
            }
        }
        visit(&cols);
        // odometer over columns 1..d
        let mut j = d - 1;
        loop {
            if j == 0 {
                return;
            }
            state[j] += 1;
            if state[j] < perms.len() {
                break;
            }
            state[j] = 0;
            j -= 1;
        }
    }
}

fn extremum(
    x: &ArrangementMatrix,
    cost: &CostFunction,
    budget: u64,
    opposite_only: bool,
    better: impl Fn(f64, f64) -> bool,
) -> Result<Option<(f64, Vec<Vec<f64>>)>> {
    check_arity(x, cost)?;
    check_budget(x, budget)?;
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for_each_arrangement(x, |cols| {
        if opposite_only && !opposite_set_unchecked(cols, &cost.agg) {
            return;
        }
        let value = objective_unchecked(cols, cost);
        if best.as_ref().is_none_or(|(b, _)| better(value, *b)) {
            best = Some((value, cols.to_vec()));
        }
    });
    Ok(best)
}

/// Exact `min Σ_k f(row_k)` over all arrangements, with one minimizer.
pub fn brute_force_min(
    x: &ArrangementMatrix,
    cost: &CostFunction,
    budget: u64,
) -> Result<(f64, ArrangementMatrix)> {
    let (value, cols) = extremum(x, cost, budget, false, |a, b| a < b)?.expect("P(X) is nonempty");
    Ok((value, x.with_columns(cols)?))
}

/// Exact `max Σ_k f(row_k)` over all arrangements, with one maximizer.
pub fn brute_force_max(
    x: &ArrangementMatrix,
    cost: &CostFunction,
    budget: u64,
) -> Result<(f64, ArrangementMatrix)> {
    let (value, cols) = extremum(x, cost, budget, false, |a, b| a > b)?.expect("P(X) is nonempty");
    Ok((value, x.with_columns(cols)?))
}

/// Minimum objective over the arrangements in which every column is
/// oppositely ordered to its partial aggregate.
pub fn brute_force_min_over_opposite_set(
    x: &ArrangementMatrix,
    cost: &CostFunction,
    budget: u64,
) -> Result<f64> {
    extremum(x, cost, budget, true, |a, b| a < b)?
        .map(|(value, _)| value)
        .ok_or_else(|| {
            Error::InternalInconsistency("no arrangement lies in the opposite set".into())
        })
}

/// Objective of the comonotonic arrangement divided by `n`.
pub fn comonotonic_value(marginals: &[DiscreteMarginal], cost: &CostFunction) -> Result<f64> {
    let x = ArrangementMatrix::comonotonic(marginals)?;
    check_arity(&x, cost)?;
    Ok(objective_unchecked(x.columns(), cost) / x.n() as f64)
}
