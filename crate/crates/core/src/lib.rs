//! Numerical toolkit for linear q-difference equations.
//!
//! Builds and analyzes operators of the form sum_i a_i(Q) sigma^i with
//! sigma: f(Q) -> f(qQ), 0 < |q| < 1:
//!
//! - q-special functions: Jacobi theta, q-characters, q-logarithm,
//!   q-Pochhammer, q-Gamma, basic hypergeometric sums ([`qspecial`]);
//! - Newton polygons, characteristic equations and exact operator
//!   transforms (variable inversion, fractional-power substitution,
//!   character conjugation) ([`operator`]);
//! - series solutions at 0 and infinity: Frobenius recursion at simple
//!   roots, exceptional fractional-power solutions on sloped Newton
//!   segments, and nilpotent-coefficient series producing logarithmic
//!   solutions at multiple roots ([`solver`]);
//! - pointwise evaluation of the Mellin-Barnes-Watson analytic
//!   continuation and the fuchsian connection matrix ([`connection`]);
//! - the q -> 1 limit: classical Gamma machinery and degeneration of the
//!   q-difference structure to the hypergeometric differential equation
//!   of the quintic ([`confluence`]).

pub mod algebra;
pub mod connection;
pub mod confluence;
pub mod context;
pub mod error;
pub mod operator;
pub mod qspecial;
pub mod solver;

pub use algebra::{FracPowerSeries, NilpotentPoly};
pub use context::{binomial_scalar_power, EvalContext, C64, Rat};
pub use error::{Error, Result};
