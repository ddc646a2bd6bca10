//! Bi-martingale optimal transport for discrete measures.
//!
//! Couples two probability measures with a common barycentre through a pair
//! of martingale constraints, reformulated as a finite-dimensional conic
//! program over power cones and solved by a first-order operator-splitting
//! method. On top of the solver the crate computes Zolotarev-2 distances,
//! optimal convex dominants, projections onto cones of dominating measures,
//! convex-order indices, and a penalized approximation of classical
//! martingale optimal transport.
//!
//! Module map:
//! - [`measure`]: discrete measures on R^d with moments and recentring.
//! - [`cdf1d`]: one-dimensional potential functions, the convex-order test,
//!   and the closed-form least upper bound; the exact oracle for d = 1.
//! - [`conic`]: the conic program representation and splitting solver.
//! - [`m2ot`]: builders from measure pairs to conic programs, and plan
//!   extraction.
//! - [`analysis`]: derived quantities (pushforwards, distances, indices,
//!   residuals, feasibility tests).
//! - [`motapprox`]: the penalized approximation pipeline for martingale
//!   optimal transport.
//! - [`oracle`]: a grid-restricted linear-programming oracle for dominance
//!   problems, used by tests.

pub mod analysis;
pub mod cdf1d;
pub mod conic;
mod error;
pub mod fmt;
pub mod m2ot;
pub mod measure;
pub mod motapprox;
pub mod oracle;

pub use error::{Error, Result};
pub use measure::DiscreteMeasure;
