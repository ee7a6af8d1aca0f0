//! The rearrangement algorithm.
//!
//! Each step takes a column `i`, computes the partial aggregate
//! `hd1_i(X_{-i})` of the remaining columns row by row, and rearranges column
//! `i` to be oppositely ordered to it. A full sweep over all columns that
//! changes nothing means the matrix lies in the opposite set `O_h(X)`.
//! For increasing convex `g` every step weakly decreases `Σ_k f(row_k)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::costfn::{AggregationSpec, CostFunction};
use crate::error::{Error, Result};
use crate::majorization::opposite_unchecked;
use crate::marginals::DiscreteMarginal;

pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// An `n × d` matrix; column `i` is a permutation of marginal `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrangementMatrix {
    columns: Vec<Vec<f64>>,
    provenance: Vec<DiscreteMarginal>,
}

impl ArrangementMatrix {
    /// The comonotonic arrangement: every column sorted ascending.
    pub fn comonotonic(marginals: &[DiscreteMarginal]) -> Result<Self> {
        let first = marginals
            .first()
            .ok_or_else(|| Error::InvalidParameter("at least one marginal required".into()))?;
        if let Some(m) = marginals.iter().find(|m| m.n() != first.n()) {
            return Err(Error::LengthMismatch {
                left: first.n(),
                right: m.n(),
            });
        }
        Ok(Self {
            columns: marginals.iter().map(|m| m.values().to_vec()).collect(),
            provenance: marginals.to_vec(),
        })
    }

    /// Takes the columns as given; the provenance marginals are their sorted copies.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let provenance = columns
            .iter()
            .map(|c| DiscreteMarginal::exact(c.clone()))
            .collect::<Result<Vec<_>>>()?;
        let n = columns.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::InvalidParameter(
                "matrix needs at least one column and row".into(),
            ));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                left: n,
                right: c.len(),
            });
        }
        Ok(Self {
            columns,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn provenance(&self) -> &[DiscreteMarginal] {
        &self.provenance
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[k]).collect()
    }

    /// Replaces the columns, keeping provenance. Each new column must be a
    /// permutation of the old one.
    pub fn with_columns(&self, columns: Vec<Vec<f64>>) -> Result<Self> {
        let candidate = Self {
            columns,
            provenance: self.provenance.clone(),
        };
        if candidate.columns.len() != self.d() {
            return Err(Error::LengthMismatch {
                left: self.d(),
                right: candidate.columns.len(),
            });
        }
        if !candidate.is_permutation_of_provenance() {
            return Err(Error::InvalidParameter(
                "columns are not permutations of the marginals".into(),
            ));
        }
        Ok(candidate)
    }

    /// Every column sorted equals its provenance marginal exactly.
    pub fn is_permutation_of_provenance(&self) -> bool {
        self.columns.iter().zip(&self.provenance).all(|(c, m)| {
            let mut sorted = c.clone();
            sorted.sort_by(f64::total_cmp);
            sorted == m.values()
        })
    }

    fn check_arity(&self, agg: &AggregationSpec) -> Result<()> {
        if agg.arity() == self.d() {
            Ok(())
        } else {
            Err(Error::ArityMismatch {
                expected: agg.arity(),
                got: self.d(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaResult {
    pub matrix: ArrangementMatrix,
    /// `Σ_k f(row_k)`, without the `1/n` factor.
    pub objective: f64,
    pub initial_objective: f64,
    pub sweeps: usize,
    /// Column steps that changed the arrangement.
    pub column_rearrangements: usize,
    pub converged: bool,
    /// Which restart produced this result (0 is the unshuffled start).
    pub restart: usize,
}

/// Writes `hd1_i` of every row of `X_{-i}` into `out`.
fn partial_into(columns: &[Vec<f64>], i: usize, agg: &AggregationSpec, out: &mut Vec<f64>) {
    let n = columns[0].len();
    out.clear();
    out.resize(n, 0.0);
    match agg {
        AggregationSpec::Sum { .. } => {
            for (_, col) in columns.iter().enumerate().filter(|(j, _)| *j != i) {
                out.iter_mut().zip(col).for_each(|(o, x)| *o += x);
            }
        }
        AggregationSpec::WeightedSum { weights } => {
            for (j, col) in columns.iter().enumerate().filter(|(j, _)| *j != i) {
                let w = weights[j];
                out.iter_mut().zip(col).for_each(|(o, x)| *o += w * x);
            }
        }
        AggregationSpec::Custom(_) => {
            let mut rest = Vec::with_capacity(columns.len() - 1);
            for (k, o) in out.iter_mut().enumerate() {
                rest.clear();
                rest.extend(
                    columns
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, c)| c[k]),
                );
                *o = agg.partial_unchecked(i, &rest);
            }
        }
    }
}

/// Rearranges column `i` against `partial`; returns whether anything moved.
///
/// A column already oppositely ordered is left untouched. Otherwise rows are
/// ranked by decreasing partial aggregate (ties by row index) and receive the
/// column values in increasing order.
fn rearrange_in_place(column: &mut [f64], partial: &[f64], order: &mut Vec<usize>) -> bool {
    if opposite_unchecked(column, partial) {
        return false;
    }
    order.clear();
    order.extend(0..column.len());
    order.sort_by(|&a, &b| partial[b].total_cmp(&partial[a]));
    let mut values = column.to_vec();
    values.sort_by(f64::total_cmp);
    for (&row, v) in order.iter().zip(values) {
        column[row] = v;
    }
    true
}

/// `h(row_k)` for every row.
pub fn row_aggregates(x: &ArrangementMatrix, agg: &AggregationSpec) -> Result<Vec<f64>> {
    x.check_arity(agg)?;
    Ok(row_aggregates_unchecked(x.columns(), agg))
}

fn row_aggregates_unchecked(columns: &[Vec<f64>], agg: &AggregationSpec) -> Vec<f64> {
    let n = columns[0].len();
    match agg {
        AggregationSpec::Sum { .. } | AggregationSpec::WeightedSum { .. } => {
            let mut out = vec![0.0; n];
            for (j, col) in columns.iter().enumerate() {
                let w = match agg {
                    AggregationSpec::WeightedSum { weights } => weights[j],
                    _ => 1.0,
                };
                out.iter_mut().zip(col).for_each(|(o, x)| *o += w * x);
            }
            out
        }
        AggregationSpec::Custom(_) => {
            let mut row = vec![0.0; columns.len()];
            (0..n)
                .map(|k| {
                    row.iter_mut().zip(columns).for_each(|(r, c)| *r = c[k]);
                    agg.h_unchecked(&row)
                })
                .collect()
        }
    }
}

pub(crate) fn objective_unchecked(columns: &[Vec<f64>], cost: &CostFunction) -> f64 {
    row_aggregates_unchecked(columns, &cost.agg)
        .into_iter()
        .map(|y| cost.transform.eval_g(y))
        .sum()
}

/// `Σ_k g(h(row_k))`.
pub fn objective(x: &ArrangementMatrix, cost: &CostFunction) -> Result<f64> {
    x.check_arity(&cost.agg)?;
    Ok(objective_unchecked(x.columns(), cost))
}

/// The vector `hd1_i(X_{-i})`, one entry per row.
pub fn partial_aggregate_column(
    x: &ArrangementMatrix,
    i: usize,
    agg: &AggregationSpec,
) -> Result<Vec<f64>> {
    x.check_arity(agg)?;
    if i >= x.d() {
        return Err(Error::IndexOutOfBounds { index: i, d: x.d() });
    }
    let mut out = Vec::new();
    partial_into(x.columns(), i, agg, &mut out);
    Ok(out)
}

/// Returns `x` with column `i` oppositely ordered to its partial aggregate.
/// All other columns are left bit-identical.
pub fn rearrange_column(
    x: &ArrangementMatrix,
    i: usize,
    agg: &AggregationSpec,
) -> Result<ArrangementMatrix> {
    let partial = partial_aggregate_column(x, i, agg)?;
    let mut out = x.clone();
    rearrange_in_place(&mut out.columns[i], &partial, &mut Vec::new());
    Ok(out)
}

/// Whether every column is oppositely ordered to its partial aggregate.
pub fn is_in_opposite_set(x: &ArrangementMatrix, agg: &AggregationSpec) -> Result<bool> {
    x.check_arity(agg)?;
    Ok(opposite_set_unchecked(x.columns(), agg))
}

pub(crate) fn opposite_set_unchecked(columns: &[Vec<f64>], agg: &AggregationSpec) -> bool {
    let mut partial = Vec::new();
    (0..columns.len()).all(|i| {
        partial_into(columns, i, agg, &mut partial);
        opposite_unchecked(&columns[i], &partial)
    })
}

/// Runs cyclic sweeps over the columns until a sweep changes nothing or
/// `max_sweeps` is reached.
pub fn run_ra(x0: &ArrangementMatrix, cost: &CostFunction, max_sweeps: usize) -> Result<RaResult> {
    x0.check_arity(&cost.agg)?;
    if !cost.agg.is_validated() {
        return Err(Error::ValidationFailed(
            "custom aggregation has not been validated".into(),
        ));
    }
    if max_sweeps == 0 {
        return Err(Error::InvalidParameter(
            "max_sweeps must be at least 1".into(),
        ));
    }
    let mut matrix = x0.clone();
    let initial_objective = objective_unchecked(matrix.columns(), cost);
    let mut partial = Vec::with_capacity(matrix.n());
    let mut order = Vec::with_capacity(matrix.n());
    let mut column_rearrangements = 0;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut changed = false;
        for i in 0..matrix.d() {
            partial_into(&matrix.columns, i, &cost.agg, &mut partial);
            if rearrange_in_place(&mut matrix.columns[i], &partial, &mut order) {
                changed = true;
                column_rearrangements += 1;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    let objective = objective_unchecked(matrix.columns(), cost);
    Ok(RaResult {
        matrix,
        objective,
        initial_objective,
        sweeps,
        column_rearrangements,
        converged,
        restart: 0,
    })
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independently permutes each column with a stream seeded by `(seed, column)`.
pub fn shuffle_columns(x: &ArrangementMatrix, seed: u64) -> ArrangementMatrix {
    let mut out = x.clone();
    for (i, col) in out.columns.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(i as u64)));
        col.shuffle(&mut rng);
    }
    out
}

/// Seed of restart `r >= 1` for a run seeded with `seed`.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    mix(seed.wrapping_add(mix(r as u64)))
}

/// Runs the RA from `x0` and from `restarts - 1` shuffled copies of it, in
/// parallel, and keeps the lowest objective (earliest restart on ties).
pub fn run_ra_restarts(
    x0: &ArrangementMatrix,
    cost: &CostFunction,
    restarts: usize,
    seed: u64,
    max_sweeps: usize,
) -> Result<RaResult> {
    if restarts == 0 {
        return Err(Error::InvalidParameter(
            "restarts must be at least 1".into(),
        ));
    }
    let results = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                x0.clone()
            } else {
                shuffle_columns(x0, restart_seed(seed, r))
            };
            run_ra(&start, cost, max_sweeps).map(|res| RaResult { restart: r, ..res })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = results
        .into_iter()
        .reduce(|best, next| {
            if next.objective < best.objective {
                next
            } else {
                best
            }
        })
        .expect("at least one restart");
    Ok(best)
}
