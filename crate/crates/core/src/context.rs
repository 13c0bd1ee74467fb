//! Evaluation context: the base q, working precision and truncation tolerance.

use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Exact rational exponents (variable exponents and q-exponents).
pub type Rat = Ratio<i64>;

/// Iteration cap guarding bilateral/unilateral sums against divergence.
pub const MAX_TERMS: usize = 1_000_000;

/// Shared evaluation parameters.
///
/// `q` is the base of the q-difference structure, required to satisfy
/// 0 < |q| < 1 strictly. `tol` drives infinite-product and series
/// truncation. `precision` is the working precision in bits; this build
/// evaluates in binary64 and records the requested precision in reports.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext {
    pub q: C64,
    pub precision: u32,
    pub tol: f64,
}

impl EvalContext {
    pub fn new(q: C64, precision: u32, tol: f64) -> Result<Self> {
        let norm = q.norm();
        if !(norm > 0.0 && norm < 1.0) || !norm.is_finite() {
            return Err(Error::InvalidInput(format!(
                "q must satisfy 0 < |q| < 1, got |q| = {norm}"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidInput("tol must be positive".into()));
        }
        if precision < 2 {
            return Err(Error::InvalidInput("precision must be at least 2 bits".into()));
        }
        Ok(EvalContext { q, precision, tol })
    }

    /// Real q in (0,1) with defaults precision = 53 bits, tol = 1e-14.
    pub fn real(q: f64) -> Result<Self> {
        Self::new(C64::new(q, 0.0), 53, 1e-14)
    }

    /// q^e for an exact rational exponent, principal branch.
    ///
    /// Real positive q stays on the real axis so that identities pinned at
    /// real q do not pick up spurious imaginary parts.
    pub fn q_pow(&self, e: Rat) -> C64 {
        let ef = rat_to_f64(e);
        if self.q.im == 0.0 && self.q.re > 0.0 {
            C64::new(self.q.re.powf(ef), 0.0)
        } else {
            cpow(self.q, ef)
        }
    }

    pub fn q_powf(&self, e: f64) -> C64 {
        if self.q.im == 0.0 && self.q.re > 0.0 {
            C64::new(self.q.re.powf(e), 0.0)
        } else {
            cpow(self.q, e)
        }
    }

    pub fn q_powc(&self, e: C64) -> C64 {
        if e.im == 0.0 {
            self.q_powf(e.re)
        } else {
            (e * self.q.ln()).exp()
        }
    }

    /// -log q, the logarithmic scale of the q-structure (w in `q = e^{-w}`).
    pub fn log_scale(&self) -> C64 {
        -self.q.ln()
    }
}

pub fn rat_to_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Principal-branch complex power base^e for real e.
pub fn cpow(base: C64, e: f64) -> C64 {
    if e == 0.0 {
        return C64::new(1.0, 0.0);
    }
    if base.im == 0.0 && base.re > 0.0 {
        return C64::new(base.re.powf(e), 0.0);
    }
    (base.ln() * e).exp()
}

/// Principal-branch complex power with complex exponent.
pub fn cpowc(base: C64, e: C64) -> C64 {
    if e.im == 0.0 {
        cpow(base, e.re)
    } else {
        (base.ln() * e).exp()
    }
}

/// Generalized binomial coefficient C(x, k) = x(x-1)...(x-k+1)/k!.
pub fn binomial_scalar_power(x: C64, k: usize) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    for j in 0..k {
        acc *= (x - C64::new(j as f64, 0.0)) / C64::new((j + 1) as f64, 0.0);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_validates_q() {
        assert!(EvalContext::real(0.5).is_ok());
        assert!(EvalContext::real(0.0).is_err());
        assert!(EvalContext::real(1.0).is_err());
        assert!(EvalContext::real(-1.2).is_err());
        assert!(EvalContext::new(C64::new(0.5, 0.0), 53, 0.0).is_err());
    }

    #[test]
    fn q_pow_rational_exponent() {
        let ctx = EvalContext::real(0.5).unwrap();
        let v = ctx.q_pow(Rat::new(1, 20));
        assert!((v.re - 0.5f64.powf(0.05)).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn binomial_values() {
        let one = C64::new(1.0, 0.0);
        assert_eq!(binomial_scalar_power(C64::new(3.0, 0.0), 0), one);
        let c32 = binomial_scalar_power(C64::new(3.0, 0.0), 2);
        assert!((c32 - C64::new(3.0, 0.0)).norm() < 1e-15);
        // C(1/2, 2) = (1/2)(-1/2)/2 = -1/8, the direct falling-factorial value.
        let ch = binomial_scalar_power(C64::new(0.5, 0.0), 2);
        assert!((ch - C64::new(-0.125, 0.0)).norm() < 1e-15);
    }
}
