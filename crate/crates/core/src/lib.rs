//! Bounds on `E[f(X_1, ..., X_d)]` over all joint laws with fixed marginals.
//!
//! The infimum is approximated with the rearrangement algorithm (RA) run on
//! quantile-discretized marginals; the supremum of a supermodular cost is the
//! comonotonic value. Cost functions have the form `f = g ∘ h` where `g` is
//! increasing convex and `h` is supermodular, strictly monotone and admits a
//! per-column decomposition `h(x) = h2_i(x_i, hd1_i(x_{-i}))`.
//!
//! ```
//! use ra_bounds::bounds::{estimate_inf, BoundsOptions};
//! use ra_bounds::costfn::{AggregationSpec, CostFunction, TransformSpec};
//! use ra_bounds::marginals::MarginalSpec;
//!
//! let specs = vec![MarginalSpec::uniform(0.0, 1.0).unwrap(); 2];
//! let cost = CostFunction::new(AggregationSpec::sum(2).unwrap(), TransformSpec::Identity);
//! let opts = BoundsOptions { n: 2, restarts: 1, ..BoundsOptions::default() };
//! let res = estimate_inf(&specs, &cost, &opts).unwrap();
//! assert_eq!((res.lower_estimate, res.upper_estimate), (0.5, 1.5));
//! ```

pub mod bounds;
pub mod config;
pub mod costfn;
pub mod error;
pub mod majorization;
pub mod marginals;
pub mod oracle;
pub mod ra;

pub use error::{Error, Result};
