//! Truncated fractional-power series sum_k c_k Q^(h + k/s).
//!
//! The carrier for all series solutions. Exponents are exact rationals:
//! a base offset h plus an integer grid with denominator s. Arithmetic
//! never reports coefficients beyond the minimum truncation bound of the
//! operands; combining series with different denominators lifts both to
//! the lcm grid exactly (zero interleaving, no coefficient mixing).

use num_complex::Complex64 as C64;
use num_integer::Integer;
use num_rational::Ratio;

use crate::context::{rat_to_f64, EvalContext, Rat};

/// Truncated series with coefficient k at exponent `base + k/denom`.
#[derive(Debug, Clone, PartialEq)]
pub struct FracPowerSeries {
    base: Rat,
    denom: i64,
    coeffs: Vec<C64>,
}

impl FracPowerSeries {
    pub fn new(base: Rat, denom: i64, coeffs: Vec<C64>) -> Self {
        assert!(denom >= 1, "denom must be >= 1");
        assert!(!coeffs.is_empty(), "coeffs must hold at least the order-0 entry");
        FracPowerSeries { base, denom, coeffs }
    }

    /// Integer-exponent series starting at Q^0.
    pub fn from_coeffs(coeffs: Vec<C64>) -> Self {
        Self::new(Rat::new(0, 1), 1, coeffs)
    }

    pub fn zero(trunc_order: usize) -> Self {
        Self::from_coeffs(vec![C64::new(0.0, 0.0); trunc_order + 1])
    }

    pub fn one(trunc_order: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); trunc_order + 1];
        c[0] = C64::new(1.0, 0.0);
        Self::from_coeffs(c)
    }

    pub fn base_exponent(&self) -> Rat {
        self.base
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn trunc_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    /// Exponent of slot k: base + k/denom.
    pub fn exponent(&self, k: usize) -> Rat {
        self.base + Rat::new(k as i64, self.denom)
    }

    /// Coefficient at an exact exponent (zero if not on the stored grid).
    pub fn coeff_at(&self, e: Rat) -> C64 {
        let rel = e - self.base;
        let scaled = rel * Rat::from_integer(self.denom);
        if !scaled.is_integer() {
            return C64::new(0.0, 0.0);
        }
        let k = scaled.to_integer();
        if k < 0 {
            return C64::new(0.0, 0.0);
        }
        self.coeff(k as usize)
    }

    /// Largest exponent carried by the truncated series.
    pub fn max_exponent(&self) -> Rat {
        self.exponent(self.coeffs.len() - 1)
    }

    /// Exact regrid to a finer denominator (new_denom must be a multiple).
    pub fn lift(&self, new_denom: i64) -> Self {
        assert!(new_denom % self.denom == 0, "lift target must be a multiple of denom");
        let f = (new_denom / self.denom) as usize;
        if f == 1 {
            return self.clone();
        }
        let mut out = vec![C64::new(0.0, 0.0); (self.coeffs.len() - 1) * f + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k * f] = c;
        }
        Self::new(self.base, new_denom, out)
    }

    fn common_grid(a: &Self, b: &Self) -> (Rat, i64) {
        let d = a.denom.lcm(&b.denom);
        let base = a.base.min(b.base);
        let diff = a.base.max(b.base) - base;
        let d = (d as i64).lcm(diff.denom());
        (base, d)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let (base, denom) = Self::common_grid(self, rhs);
        let emax = self.max_exponent().min(rhs.max_exponent());
        let len_rat = (emax - base) * Rat::from_integer(denom);
        debug_assert!(len_rat.is_integer());
        let len = len_rat.to_integer().max(0) as usize + 1;
        let mut out = vec![C64::new(0.0, 0.0); len];
        for src in [self, rhs] {
            let off = (src.base - base) * Rat::from_integer(denom);
            let off = off.to_integer() as usize;
            let step = (denom / src.denom) as usize;
            for (k, &c) in src.coeffs.iter().enumerate() {
                let idx = off + k * step;
                if idx < len {
                    out[idx] += c;
                }
            }
        }
        Self::new(base, denom, out)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        Self::new(self.base, self.denom, self.coeffs.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.base, self.denom, self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Cauchy product, truncated to the provable common bound
    /// min(a.max + b.base, b.max + a.base).
    pub fn mul(&self, rhs: &Self) -> Self {
        let denom = self.denom.lcm(&rhs.denom);
        let a = self.lift(denom);
        let b = rhs.lift(denom);
        let base = a.base + b.base;
        let emax = (a.max_exponent() + b.base).min(b.max_exponent() + a.base);
        let len_rat = (emax - base) * Rat::from_integer(denom);
        debug_assert!(len_rat.is_integer());
        let len = len_rat.to_integer().max(0) as usize + 1;
        let mut out = vec![C64::new(0.0, 0.0); len];
        for (i, &ca) in a.coeffs.iter().enumerate() {
            if i >= len {
                break;
            }
            if ca.re == 0.0 && ca.im == 0.0 {
                continue;
            }
            for (j, &cb) in b.coeffs.iter().take(len - i).enumerate() {
                out[i + j] += ca * cb;
            }
        }
        Self::new(base, denom, out)
    }

    /// Shift every exponent by r (multiplication by Q^r), exactly.
    pub fn shift(&self, r: Rat) -> Self {
        Self::new(self.base + r, self.denom, self.coeffs.clone())
    }

    /// q-shift: coefficient of Q^e multiplied by q^e; exponents unchanged.
    pub fn sigma(&self, ctx: &EvalContext) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * ctx.q_pow(self.exponent(k)))
            .collect();
        Self::new(self.base, self.denom, coeffs)
    }

    /// Evaluate at a point by direct summation of the truncated terms.
    pub fn eval(&self, x: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            acc += c * crate::context::cpow(x, rat_to_f64(self.exponent(k)));
        }
        acc
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drop trailing slots beyond the given exponent bound (inclusive).
    pub fn truncated_to_exponent(&self, emax: Rat) -> Self {
        let mut keep = 0usize;
        for k in 0..self.coeffs.len() {
            if self.exponent(k) <= emax {
                keep = k + 1;
            }
        }
        Self::new(self.base, self.denom, self.coeffs[..keep.max(1)].to_vec())
    }
}

/// Kinds for the generic series arithmetic entry point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesArithKind {
    Add,
    Mul,
    Scale,
}

/// Dispatching wrapper used by the CLI; `scale` reads the scalar from
/// the constant term of `b`.
pub fn series_arith(a: &FracPowerSeries, b: &FracPowerSeries, kind: SeriesArithKind) -> FracPowerSeries {
    match kind {
        SeriesArithKind::Add => a.add(b),
        SeriesArithKind::Mul => a.mul(b),
        SeriesArithKind::Scale => a.scale(b.coeff(0)),
    }
}

pub fn rat(n: i64, d: i64) -> Rat {
    Ratio::new(n, d)
}
