//! Error types shared across the toolkit.

use thiserror::Error;

/// Errors produced by series, special-function and solver operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Nilpotent element with zero constant term cannot be inverted.
    #[error("nilpotent element is not invertible (zero constant term)")]
    NonInvertible,

    /// Evaluation at (or too close to) a zero of the theta function.
    #[error("theta function vanishes at the requested point")]
    PoleAtThetaZero,

    /// q-Gamma pole: the infinite Pochhammer in the denominator vanishes.
    #[error("q-Gamma pole: (q^x;q)_inf vanishes")]
    PoleAtNonpositive,

    /// Gamma pole at a nonpositive integer argument.
    #[error("Gamma pole at nonpositive integer {0}")]
    PoleAtNonpositiveInteger(i64),

    /// A bilateral or unilateral sum failed to converge within the term cap.
    #[error("series failed to converge within {terms} terms (last |term| = {last:.3e})")]
    NonConvergence { terms: usize, last: f64 },

    /// A denominator Pochhammer factor vanishes in a basic hypergeometric sum.
    #[error("denominator Pochhammer vanishes at term {0}")]
    DenominatorPochhammerZero(usize),

    /// Operator DSL parse failure, with byte position.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// A shift power in the DSL is not a nonnegative integer.
    #[error("shift power must be a nonnegative integer (at byte {0})")]
    NonIntegerShiftPower(usize),

    /// characteristic_equation called on a sloped segment.
    #[error("segment is not horizontal")]
    NotHorizontal,

    /// Solution series too short for the operator's variable-exponent spread.
    #[error("solution series truncation too short to form any residual coefficient")]
    TruncationTooShort,

    /// Frobenius recursion denominator below tolerance (resonant root).
    #[error("resonant root: recursion denominator vanished at order {0}")]
    ResonantRoot(usize),

    /// The requested root is a multiple root of the characteristic equation.
    #[error("multiple characteristic root: derivative below tolerance \
             (logarithmic solutions come from the nilpotent-coefficient series route)")]
    MultipleRoot,

    /// Leading recursion coefficient vanished in an exceptional-solution recursion.
    #[error("recursion breakdown at order {0}")]
    RecursionBreakdown(usize),

    /// The exponent list violates the non-resonance hypothesis.
    #[error("resonant exponents: some alpha_i/alpha_j lies in q^(Z\\{{0}})")]
    ResonantAlphas,

    /// Evaluation point lies on the q-power lattice where the identity degenerates.
    #[error("evaluation point lies on (or too close to) the q-power lattice")]
    PoleAtLattice,

    /// Series tail estimate still above tolerance at the configured cap.
    #[error("series tail above tolerance after {terms} terms (tail ~ {tail:.3e})")]
    TailTooLarge { terms: usize, tail: f64 },

    /// A helper sum was evaluated at a pole.
    #[error("pole in helper sum at term {0}")]
    PoleInSum(usize),

    /// A power series was evaluated outside its radius of convergence.
    #[error("series diverges at the requested point (term ratio {0:.3})")]
    SeriesDivergent(f64),

    /// Operator and solution are expressed in different variables.
    #[error("variable mismatch: operator in '{op}', solution in '{sol}'")]
    VariableMismatch { op: String, sol: String },

    /// Invalid argument or precondition violation.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
