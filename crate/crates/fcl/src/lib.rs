//! Numerical engine for generalized Kropina metrics `F = α^(m+1)/β^m`.
//!
//! The library is organized in layers:
//!
//! * [`expr`] — a small coordinate-expression language evaluated with
//!   forward-mode jets carrying all partial derivatives up to total order 2.
//! * [`jets`] — derivative carriers used by the tensor pipeline: gradient-only
//!   jets in the base coordinates and tangent-bundle jets in `(x, y)`.
//! * [`riemann`] — Riemannian machinery: metric evaluation and inversion,
//!   Christoffel symbols, the conformal transformation law, covariant
//!   derivatives and the Riemann curvature tensor.
//! * [`kropina`] — the (α,β)-metric layer: the fundamental function and its
//!   jets, the φ/ω/Θ machinery, the geodesic spray and deviation tensor, the
//!   h/W representation and its Killing invariants.
//! * [`curvature`] — spray (Berwald) curvature, flag-curvature estimation,
//!   the constant-curvature sampling verdict and a geodesic integrator.
//! * [`cli`] — metric-definition files, JSON verdict reports and the
//!   subcommand implementations behind the `fcl` binary.

pub mod cli;
pub mod curvature;
mod error;
pub mod expr;
pub mod jets;
pub mod kropina;
pub(crate) mod linalg;
pub mod riemann;
pub mod testkit;

pub use error::{Error, Result};
