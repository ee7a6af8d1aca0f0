//! Cost functions `f = g ∘ h` and their per-column decomposition.
//!
//! Every aggregation exposes, for each column `i`, a pair of functions with
//! `h(x) = h2_i(x_i, hd1_i(x_{-i}))`. The decomposition may differ between
//! columns, which is what admits weighted sums. The symmetric case is the one
//! where every `h2_i` coincides.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance for sampled supermodularity checks.
pub const SUPERMODULAR_TOL: f64 = 1e-9;
/// Relative tolerance for the decomposition identity.
pub const DECOMPOSITION_TOL: f64 = 1e-12;

pub type AggregateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type IndexedBinaryFn = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;
pub type IndexedPartialFn = Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;
pub type UnaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A point of the plane, as fed to a binary `h2`.
pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

/// A user-supplied aggregation. It must pass [`AggregationSpec::validate`]
/// before the RA accepts it.
#[derive(Clone)]
pub struct CustomAggregation {
    d: usize,
    h: AggregateFn,
    h2: IndexedBinaryFn,
    hd1: IndexedPartialFn,
    directions: Vec<Monotonicity>,
    validated: bool,
}

impl CustomAggregation {
    pub fn new(
        d: usize,
        h: AggregateFn,
        h2: IndexedBinaryFn,
        hd1: IndexedPartialFn,
        directions: Vec<Monotonicity>,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "arity must be at least 2, got {d}"
            )));
        }
        if directions.len() != d {
            return Err(Error::ArityMismatch {
                expected: d,
                got: directions.len(),
            });
        }
        Ok(Self {
            d,
            h,
            h2,
            hd1,
            directions,
            validated: false,
        })
    }
}

impl fmt::Debug for CustomAggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomAggregation")
            .field("d", &self.d)
            .field("directions", &self.directions)
            .field("validated", &self.validated)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum AggregationSpec {
    Sum {
        d: usize,
    },
    /// Strictly positive weights, so `h` is componentwise strictly increasing.
    WeightedSum {
        weights: Vec<f64>,
    },
    Custom(CustomAggregation),
}

impl AggregationSpec {
    pub fn sum(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "arity must be at least 2, got {d}"
            )));
        }
        Ok(Self::Sum { d })
    }

    pub fn weighted_sum(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "arity must be at least 2, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weights must be strictly positive, got {w}"
            )));
        }
        Ok(Self::WeightedSum { weights })
    }

    pub fn arity(&self) -> usize {
        match self {
            Self::Sum { d } => *d,
            Self::WeightedSum { weights } => weights.len(),
            Self::Custom(c) => c.d,
        }
    }

    /// Built-in forms are valid by construction.
    pub fn is_validated(&self) -> bool {
        match self {
            Self::Custom(c) => c.validated,
            _ => true,
        }
    }

    /// Whether `h` is componentwise increasing in every argument.
    pub fn is_increasing(&self) -> bool {
        match self {
            Self::Custom(c) => c.directions.iter().all(|d| *d == Monotonicity::Increasing),
            _ => true,
        }
    }

    /// Whether every `h2_i` has the additive form `phi_1(a) + phi_2(b)` with
    /// both parts increasing. In that case the antithetic step yields strong
    /// majorization and `g` need only be convex.
    pub fn is_additive(&self) -> bool {
        !matches!(self, Self::Custom(_))
    }

    fn check_arity(&self, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::ArityMismatch { expected, got })
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        let d = self.arity();
        if i < d {
            Ok(())
        } else {
            Err(Error::IndexOutOfBounds { index: i, d })
        }
    }

    pub fn eval_h(&self, row: &[f64]) -> Result<f64> {
        self.check_arity(self.arity(), row.len())?;
        Ok(self.h_unchecked(row))
    }

    pub(crate) fn h_unchecked(&self, row: &[f64]) -> f64 {
        match self {
            Self::Sum { .. } => row.iter().sum(),
            Self::WeightedSum { weights } => weights.iter().zip(row).map(|(w, x)| w * x).sum(),
            Self::Custom(c) => (c.h)(row),
        }
    }

    /// `hd1_i` applied to a row with column `i` removed.
    pub fn eval_partial(&self, i: usize, row_minus_i: &[f64]) -> Result<f64> {
        self.check_index(i)?;
        self.check_arity(self.arity() - 1, row_minus_i.len())?;
        Ok(self.partial_unchecked(i, row_minus_i))
    }

    pub(crate) fn partial_unchecked(&self, i: usize, row_minus_i: &[f64]) -> f64 {
        match self {
            Self::Sum { .. } => row_minus_i.iter().sum(),
            Self::WeightedSum { weights } => weights
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .zip(row_minus_i)
                .map(|((_, w), x)| w * x)
                .sum(),
            Self::Custom(c) => (c.hd1)(i, row_minus_i),
        }
    }

    /// `h2_i(x_i, partial)`.
    pub fn eval_h2(&self, i: usize, xi: f64, partial: f64) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.h2_unchecked(i, xi, partial))
    }

    pub(crate) fn h2_unchecked(&self, i: usize, xi: f64, partial: f64) -> f64 {
        match self {
            Self::Sum { .. } => xi + partial,
            Self::WeightedSum { weights } => weights[i] * xi + partial,
            Self::Custom(c) => (c.h2)(i, xi, partial),
        }
    }

    /// Spot-checks a custom aggregation on `sample` and marks it validated.
    ///
    /// Checks the decomposition identity, strict monotonicity in the declared
    /// directions, and supermodularity of every `h2_i` on pairs of sampled
    /// points `(x_i, hd1_i(x_{-i}))`. Built-in forms return `Ok` immediately.
    pub fn validate(&mut self, sample: &[Vec<f64>]) -> Result<()> {
        if self.is_validated() {
            return Ok(());
        }
        if sample.is_empty() {
            return Err(Error::ValidationFailed("empty validation sample".into()));
        }
        let d = self.arity();
        if let Some(x) = sample.iter().find(|x| x.len() != d) {
            return Err(Error::ArityMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if !validate_decomposition(self, sample) {
            return Err(Error::ValidationFailed(
                "decomposition identity does not hold".into(),
            ));
        }
        if let Some((k, i)) = self.monotonicity_violation(sample) {
            return Err(Error::ValidationFailed(format!(
                "h is not strictly monotone in column {i} at sample point {k}"
            )));
        }
        for i in 0..d {
            let pairs = decomposed_pairs(self, i, sample);
            let report = validate_supermodular(|a, b| self.h2_unchecked(i, a, b), &pairs);
            if !report.holds {
                return Err(Error::ValidationFailed(format!(
                    "h2 for column {i} is not supermodular: {:?}",
                    report.violations[0]
                )));
            }
        }
        if let Self::Custom(c) = self {
            c.validated = true;
        }
        Ok(())
    }

    fn monotonicity_violation(&self, sample: &[Vec<f64>]) -> Option<(usize, usize)> {
        let Self::Custom(c) = self else { return None };
        for (k, x) in sample.iter().enumerate() {
            let base = (c.h)(x);
            let mut bumped = x.clone();
            for (i, dir) in c.directions.iter().enumerate() {
                bumped[i] = x[i] + 1e-3 * (1.0 + x[i].abs());
                let diff = (c.h)(&bumped) - base;
                bumped[i] = x[i];
                let ok = match dir {
                    Monotonicity::Increasing => diff > 0.0,
                    Monotonicity::Decreasing => diff < 0.0,
                };
                if !ok {
                    return Some((k, i));
                }
            }
        }
        None
    }
}

/// Pairs of points `(x_i, hd1_i(x_{-i}))` built from the first 50 sampled vectors.
fn decomposed_pairs(agg: &AggregationSpec, i: usize, sample: &[Vec<f64>]) -> Vec<(Point, Point)> {
    let points: Vec<Point> = sample
        .iter()
        .take(50)
        .map(|x| (x[i], agg.partial_unchecked(i, &drop_column(x, i))))
        .collect();
    let mut pairs = Vec::new();
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            pairs.push((*p, *q));
        }
    }
    pairs
}

pub(crate) fn drop_column(row: &[f64], i: usize) -> Vec<f64> {
    row.iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, v)| *v)
        .collect()
}

#[derive(Clone)]
pub enum TransformSpec {
    Identity,
    /// `max(x - k, 0)`.
    StopLoss {
        k: f64,
    },
    /// `max(x, 0)^p` with `p >= 1`.
    Power {
        p: f64,
    },
    /// Declared increasing and convex by the caller.
    Custom(UnaryFn),
}

impl fmt::Debug for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::StopLoss { k } => f.debug_struct("StopLoss").field("k", k).finish(),
            Self::Power { p } => f.debug_struct("Power").field("p", p).finish(),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl TransformSpec {
    pub fn stop_loss(k: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stop-loss threshold must be finite, got {k}"
            )));
        }
        Ok(Self::StopLoss { k })
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power exponent must be >= 1, got {p}"
            )));
        }
        Ok(Self::Power { p })
    }

    pub fn eval_g(&self, y: f64) -> f64 {
        match self {
            Self::Identity => y,
            Self::StopLoss { k } => (y - k).max(0.0),
            Self::Power { p } => y.max(0.0).powf(*p),
            Self::Custom(g) => g(y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostFunction {
    pub agg: AggregationSpec,
    pub transform: TransformSpec,
}

impl CostFunction {
    pub fn new(agg: AggregationSpec, transform: TransformSpec) -> Self {
        Self { agg, transform }
    }

    pub fn arity(&self) -> usize {
        self.agg.arity()
    }

    pub fn eval(&self, row: &[f64]) -> Result<f64> {
        Ok(self.transform.eval_g(self.agg.eval_h(row)?))
    }

    /// `f` is componentwise increasing when `h` is and `g` is increasing.
    pub fn is_componentwise_increasing(&self) -> bool {
        self.agg.is_increasing() && !matches!(self.transform, TransformSpec::Custom(_))
    }
}

/// Outcome of a sampled supermodularity check.
#[derive(Debug, Clone, PartialEq)]
pub struct SupermodularityReport {
    pub holds: bool,
    /// Offending pairs `(x, y)` with `h(x) + h(y) > h(x ∧ y) + h(x ∨ y) + tol`.
    pub violations: Vec<(Point, Point)>,
}

/// Checks `h2(x) + h2(y) <= h2(x ∧ y) + h2(x ∨ y)` on every pair of `grid`,
/// up to [`SUPERMODULAR_TOL`].
pub fn validate_supermodular<F>(h2: F, grid: &[(Point, Point)]) -> SupermodularityReport
where
    F: Fn(f64, f64) -> f64,
{
    let violations: Vec<_> = grid
        .iter()
        .copied()
        .filter(|&(x, y)| {
            let meet = (x.0.min(y.0), x.1.min(y.1));
            let join = (x.0.max(y.0), x.1.max(y.1));
            h2(x.0, x.1) + h2(y.0, y.1) > h2(meet.0, meet.1) + h2(join.0, join.1) + SUPERMODULAR_TOL
        })
        .collect();
    SupermodularityReport {
        holds: violations.is_empty(),
        violations,
    }
}

/// Checks `h(x) == h2_i(x_i, hd1_i(x_{-i}))` for every column and sampled vector.
pub fn validate_decomposition(agg: &AggregationSpec, sample: &[Vec<f64>]) -> bool {
    let d = agg.arity();
    !sample.is_empty()
        && sample.iter().all(|x| {
            x.len() == d && {
                let full = agg.h_unchecked(x);
                (0..d).all(|i| {
                    let partial = agg.partial_unchecked(i, &drop_column(x, i));
                    let split = agg.h2_unchecked(i, x[i], partial);
                    (full - split).abs() <= DECOMPOSITION_TOL * full.abs().max(split.abs()).max(1.0)
                })
            }
        })
}

/// Checks that every `g ∘ h2_i` is supermodular on `pairs`.
pub fn validate_composition(cost: &CostFunction, pairs: &[(Point, Point)]) -> bool {
    (0..cost.arity()).all(|i| {
        validate_supermodular(
            |a, b| cost.transform.eval_g(cost.agg.h2_unchecked(i, a, b)),
            pairs,
        )
        .holds
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn portfolio_weights() -> AggregationSpec {
        AggregationSpec::weighted_sum(vec![0.5, 0.2, 0.3]).unwrap()
    }

    fn random_pairs(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64) -> Vec<(Point, Point)> {
        (0..count)
            .map(|_| {
                (
                    (rng.random_range(lo..hi), rng.random_range(lo..hi)),
                    (rng.random_range(lo..hi), rng.random_range(lo..hi)),
                )
            })
            .collect()
    }

    fn random_vectors(rng: &mut ChaCha8Rng, count: usize, d: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect()
    }

    #[test]
    fn eval_h_examples() {
        let w = portfolio_weights();
        assert!((w.eval_h(&[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((w.eval_h(&[0.1, 0.2, 0.3]).unwrap() - 0.18).abs() < 1e-15);
        assert_eq!(
            AggregationSpec::sum(3)
                .unwrap()
                .eval_h(&[1.0, 2.0, 3.0])
                .unwrap(),
            6.0
        );
        assert_eq!(
            w.eval_h(&[1.0, 2.0]),
            Err(Error::ArityMismatch {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn eval_partial_examples() {
        let w = portfolio_weights();
        assert!((w.eval_partial(0, &[0.2, 0.3]).unwrap() - 0.13).abs() < 1e-15);
        assert_eq!(
            AggregationSpec::sum(3)
                .unwrap()
                .eval_partial(1, &[1.0, 3.0])
                .unwrap(),
            4.0
        );
        assert_eq!(w.eval_partial(2, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            w.eval_partial(3, &[0.0, 0.0]),
            Err(Error::IndexOutOfBounds { .. })
        ));
        assert!(matches!(
            w.eval_partial(0, &[0.0]),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn eval_h2_examples() {
        let w = portfolio_weights();
        assert!((w.eval_h2(0, 0.1, 0.13).unwrap() - 0.18).abs() < 1e-15);
        assert_eq!(
            AggregationSpec::sum(3)
                .unwrap()
                .eval_h2(0, 5.0, 0.0)
                .unwrap(),
            5.0
        );
        assert!((w.eval_h2(1, 1.0, 1.0).unwrap() - 1.2).abs() < 1e-15);
        assert!(w.eval_h2(7, 1.0, 1.0).is_err());
    }

    #[test]
    fn eval_g_examples() {
        let g = TransformSpec::stop_loss(0.1).unwrap();
        assert!((g.eval_g(0.3) - 0.2).abs() < 1e-15);
        assert_eq!(g.eval_g(0.05), 0.0);
        assert_eq!(TransformSpec::Identity.eval_g(-4.2), -4.2);
        assert_eq!(TransformSpec::power(2.0).unwrap().eval_g(-3.0), 0.0);
        assert_eq!(TransformSpec::power(2.0).unwrap().eval_g(3.0), 9.0);
        assert!(TransformSpec::power(0.5).is_err());
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(AggregationSpec::weighted_sum(vec![0.5, 0.0, 0.5]).is_err());
        assert!(AggregationSpec::weighted_sum(vec![0.5, -0.1, 0.6]).is_err());
        assert!(AggregationSpec::weighted_sum(vec![1.0]).is_err());
        assert!(AggregationSpec::sum(1).is_err());
    }

    #[test]
    fn supermodular_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = random_pairs(&mut rng, 100, 0.0, 1.0);
        assert!(validate_supermodular(|a, b| a * b, &pairs).holds);
        assert!(validate_supermodular(|a, b| a + b, &pairs).holds);
        let neg = validate_supermodular(|a, b| -a * b, &pairs);
        assert!(!neg.holds);
        let (x, y) = neg.violations[0];
        let meet = (x.0.min(y.0), x.1.min(y.1));
        let join = (x.0.max(y.0), x.1.max(y.1));
        assert!(-x.0 * x.1 - y.0 * y.1 > -meet.0 * meet.1 - join.0 * join.1);
    }

    #[test]
    fn decomposition_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(validate_decomposition(
            &portfolio_weights(),
            &random_vectors(&mut rng, 100, 3)
        ));
        assert!(validate_decomposition(
            &AggregationSpec::sum(4).unwrap(),
            &random_vectors(&mut rng, 100, 4)
        ));
        let broken = CustomAggregation::new(
            3,
            Arc::new(|x: &[f64]| x.iter().sum()),
            Arc::new(|_, a, b| a + b),
            // drops the last remaining term
            Arc::new(|_, rest: &[f64]| rest[0]),
            vec![Monotonicity::Increasing; 3],
        )
        .unwrap();
        let mut broken = AggregationSpec::Custom(broken);
        let sample = random_vectors(&mut rng, 100, 3);
        assert!(!validate_decomposition(&broken, &sample));
        assert!(matches!(
            broken.validate(&sample),
            Err(Error::ValidationFailed(_))
        ));
        assert!(!broken.is_validated());
    }

    #[test]
    fn composition_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs = random_pairs(&mut rng, 200, 0.0, 1.0);
        let sum = AggregationSpec::sum(2).unwrap();
        let stop = CostFunction::new(sum.clone(), TransformSpec::stop_loss(0.1).unwrap());
        assert!(validate_composition(&stop, &pairs));
        assert!(validate_composition(
            &CostFunction::new(sum, TransformSpec::Identity),
            &pairs
        ));

        let product = custom_product(2);
        let negated = CostFunction::new(product, TransformSpec::Custom(Arc::new(|x| -x)));
        assert!(!validate_composition(&negated, &pairs));
    }

    /// `h(x) = prod x_j` on positives, decomposed as `h2(a, b) = a * b`.
    fn custom_product(d: usize) -> AggregationSpec {
        AggregationSpec::Custom(
            CustomAggregation::new(
                d,
                Arc::new(|x: &[f64]| x.iter().product()),
                Arc::new(|_, a, b| a * b),
                Arc::new(|_, rest: &[f64]| rest.iter().product()),
                vec![Monotonicity::Increasing; d],
            )
            .unwrap(),
        )
    }

    #[test]
    fn custom_product_validates_on_positives() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sample: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..3).map(|_| rng.random_range(0.5..2.0)).collect())
            .collect();
        let mut agg = custom_product(3);
        assert!(!agg.is_validated());
        agg.validate(&sample).unwrap();
        assert!(agg.is_validated());
        assert!((agg.eval_h(&[2.0, 3.0, 0.5]).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn custom_validation_catches_wrong_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sample: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..2).map(|_| rng.random_range(0.5..2.0)).collect())
            .collect();
        let mut agg = AggregationSpec::Custom(
            CustomAggregation::new(
                2,
                Arc::new(|x: &[f64]| x[0] + x[1]),
                Arc::new(|_, a, b| a + b),
                Arc::new(|_, rest: &[f64]| rest[0]),
                vec![Monotonicity::Increasing, Monotonicity::Decreasing],
            )
            .unwrap(),
        );
        assert!(matches!(
            agg.validate(&sample),
            Err(Error::ValidationFailed(_))
        ));
    }

    #[test]
    fn builtin_decomposition_on_large_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sample = random_vectors(&mut rng, 10_000, 3);
        assert!(validate_decomposition(&portfolio_weights(), &sample));
        assert!(validate_decomposition(
            &AggregationSpec::sum(3).unwrap(),
            &sample
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn weighted_sum_is_linear(
            x in prop::collection::vec(-10.0f64..10.0, 3),
            y in prop::collection::vec(-10.0f64..10.0, 3),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let w = portfolio_weights();
            let mixed: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let lhs = w.eval_h(&mixed).unwrap();
            let rhs = a * w.eval_h(&x).unwrap() + b * w.eval_h(&y).unwrap();
            let scale = 1.0 + a.abs() * 10.0 + b.abs() * 10.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn stop_loss_is_convex(x in -5.0f64..5.0, y in -5.0f64..5.0, lambda in 0.0f64..=1.0, k in -2.0f64..2.0) {
            let g = TransformSpec::stop_loss(k).unwrap();
            let lhs = g.eval_g(lambda * x + (1.0 - lambda) * y);
            let rhs = lambda * g.eval_g(x) + (1.0 - lambda) * g.eval_g(y);
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
