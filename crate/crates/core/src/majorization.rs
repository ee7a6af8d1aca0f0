//! Vector rearrangements and the majorization orders.
//!
//! `x ≺_w y` (weak submajorization) compares prefix sums of the decreasing
//! rearrangements, `x ≺^w y` (weak supermajorization) those of the increasing
//! ones, and `x ≺ y` is weak submajorization with equal totals. These are the
//! orders the RA descends in, so they double as test oracles for it.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Absolute tolerance applied to every prefix-sum comparison.
pub const MAJORIZATION_TOL: f64 = 1e-9;

/// Strongest relation found for `x` against `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderRelation {
    /// `x` is a rearrangement of `y`.
    Permutation,
    /// `x ≺ y`.
    Majorized,
    /// `x ≺_w y` but the totals differ.
    WeaklySubmajorized,
    /// `x ≺^w y` but the totals differ.
    WeaklySupermajorized,
    Incomparable,
}

impl OrderRelation {
    pub fn implies_weak_sub(self) -> bool {
        matches!(
            self,
            Self::Permutation | Self::Majorized | Self::WeaklySubmajorized
        )
    }

    pub fn implies_weak_super(self) -> bool {
        matches!(
            self,
            Self::Permutation | Self::Majorized | Self::WeaklySupermajorized
        )
    }

    pub fn implies_majorized(self) -> bool {
        matches!(self, Self::Permutation | Self::Majorized)
    }
}

/// A verdict together with the prefix sums it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderVerdict {
    pub relation: OrderRelation,
    /// Prefix sums of `x↓` and `y↓`.
    pub desc_prefix: (Vec<f64>, Vec<f64>),
    /// Prefix sums of `x↑` and `y↑`.
    pub asc_prefix: (Vec<f64>, Vec<f64>),
}

/// `x↓`.
pub fn sort_desc(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `x↑`.
pub fn sort_asc(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() == y.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        })
    }
}

/// Classifies `x` against `y` in the majorization orders.
pub fn compare(x: &[f64], y: &[f64]) -> Result<OrderVerdict> {
    check_lengths(x, y)?;
    let (x_asc, y_asc) = (sort_asc(x), sort_asc(y));
    let x_desc: Vec<f64> = x_asc.iter().rev().copied().collect();
    let y_desc: Vec<f64> = y_asc.iter().rev().copied().collect();

    let desc_prefix = (prefix_sums(&x_desc), prefix_sums(&y_desc));
    let asc_prefix = (prefix_sums(&x_asc), prefix_sums(&y_asc));

    let sub = desc_prefix
        .0
        .iter()
        .zip(&desc_prefix.1)
        .all(|(a, b)| *a <= *b + MAJORIZATION_TOL);
    let sup = asc_prefix
        .0
        .iter()
        .zip(&asc_prefix.1)
        .all(|(a, b)| *a + MAJORIZATION_TOL >= *b);
    let total_x = desc_prefix.0.last().copied().unwrap_or(0.0);
    let total_y = desc_prefix.1.last().copied().unwrap_or(0.0);
    let equal_totals = (total_x - total_y).abs() <= MAJORIZATION_TOL;
    let permutation = x_asc
        .iter()
        .zip(&y_asc)
        .all(|(a, b)| (a - b).abs() <= MAJORIZATION_TOL);

    let relation = if permutation {
        OrderRelation::Permutation
    } else if sub && equal_totals {
        OrderRelation::Majorized
    } else if sub {
        OrderRelation::WeaklySubmajorized
    } else if sup {
        OrderRelation::WeaklySupermajorized
    } else {
        OrderRelation::Incomparable
    };
    Ok(OrderVerdict {
        relation,
        desc_prefix,
        asc_prefix,
    })
}

/// `(x_i - x_j)(y_i - y_j) <= 0` for all pairs, decided in `O(n log n)`.
///
/// Along the ascending order of `x`, every group of tied `x` values must have
/// all its `y` values at or below the minimum `y` of all earlier groups.
pub fn is_oppositely_ordered(x: &[f64], y: &[f64]) -> Result<bool> {
    check_lengths(x, y)?;
    Ok(opposite_unchecked(x, y))
}

pub(crate) fn opposite_unchecked(x: &[f64], y: &[f64]) -> bool {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut earlier_min = f64::INFINITY;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let mut group_min = f64::INFINITY;
        while end < order.len() && x[order[end]].total_cmp(&x[order[start]]) == Ordering::Equal {
            let yv = y[order[end]];
            if yv > earlier_min {
                return false;
            }
            group_min = group_min.min(yv);
            end += 1;
        }
        earlier_min = earlier_min.min(group_min);
        start = end;
    }
    true
}
