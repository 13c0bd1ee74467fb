//! Arithmetic foundations: truncated fractional-power series over C and
//! the nilpotent algebra C\[eps\]/(eps^n).
//!
//! All values are immutable after construction and every operation is
//! pure, so everything here is safe to share across threads.

mod nilpotent;
mod series;

pub use nilpotent::NilpotentPoly;
pub use series::{rat, series_arith, FracPowerSeries, SeriesArithKind};

use crate::context::C64;
use crate::error::Result;

/// Kinds for the generic nilpotent arithmetic entry point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NilpotentArithKind {
    Add,
    Mul,
    Inv,
    Div,
}

/// Dispatching wrapper used by the CLI. `inv` ignores `b`.
pub fn nilpotent_arith(
    a: &NilpotentPoly,
    b: &NilpotentPoly,
    kind: NilpotentArithKind,
) -> Result<NilpotentPoly> {
    Ok(match kind {
        NilpotentArithKind::Add => a.add(b),
        NilpotentArithKind::Mul => a.mul(b),
        NilpotentArithKind::Inv => a.inv()?,
        NilpotentArithKind::Div => a.div(b)?,
    })
}

/// Maximum coefficient magnitude of a complex slice.
pub fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
