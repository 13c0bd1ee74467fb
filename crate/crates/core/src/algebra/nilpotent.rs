//! Truncated nilpotent algebra C\[eps\]/(eps^n).
//!
//! Elements carry coefficients b_0..b_{n-1} of powers of a nilpotent
//! generator eps. In the K-group application eps = 1 - P with P the
//! tautological class, so P = 1 - eps and P^{-1} = sum_k eps^k.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative threshold below which a constant term counts as zero for inversion.
const INVERT_EPS: f64 = 1e-300;

/// Element of C\[eps\]/(eps^n); `coeffs[k]` is the coefficient of eps^k.
#[derive(Debug, Clone, PartialEq)]
pub struct NilpotentPoly {
    coeffs: Vec<C64>,
}

impl NilpotentPoly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        assert!(!coeffs.is_empty(), "order must be positive");
        NilpotentPoly { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::new(vec![C64::new(0.0, 0.0); order])
    }

    pub fn one(order: usize) -> Self {
        Self::from_scalar(C64::new(1.0, 0.0), order)
    }

    pub fn from_scalar(c: C64, order: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); order];
        v[0] = c;
        Self::new(v)
    }

    /// The generator eps itself (zero if order = 1).
    pub fn eps(order: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); order];
        if order > 1 {
            v[1] = C64::new(1.0, 0.0);
        }
        Self::new(v)
    }

    /// P = 1 - eps.
    pub fn p(order: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); order];
        v[0] = C64::new(1.0, 0.0);
        if order > 1 {
            v[1] = C64::new(-1.0, 0.0);
        }
        Self::new(v)
    }

    /// P^{-1} = 1 + eps + eps^2 + ...
    pub fn p_inv(order: usize) -> Self {
        Self::new(vec![C64::new(1.0, 0.0); order])
    }

    /// P^k = (1 - eps)^k for k >= 0, by exact binomial signs.
    pub fn p_pow(k: u32, order: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); order];
        let mut c = 1.0f64;
        for (j, slot) in v.iter_mut().enumerate() {
            if j > k as usize {
                break;
            }
            *slot = C64::new(if j % 2 == 0 { c } else { -c }, 0.0);
            c = c * (k as f64 - j as f64) / (j as f64 + 1.0);
        }
        Self::new(v)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn constant_term(&self) -> C64 {
        self.coeffs[0]
    }

    /// Truncate or zero-extend to the given order.
    pub fn resized(&self, order: usize) -> Self {
        let mut v = self.coeffs.clone();
        v.resize(order, C64::new(0.0, 0.0));
        Self::new(v)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let n = self.order().min(rhs.order());
        Self::new((0..n).map(|k| self.coeffs[k] + rhs.coeffs[k]).collect())
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let n = self.order().min(rhs.order());
        Self::new((0..n).map(|k| self.coeffs[k] - rhs.coeffs[k]).collect())
    }

    pub fn neg(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Product in the truncated algebra: terms of degree >= n are discarded.
    pub fn mul(&self, rhs: &Self) -> Self {
        let n = self.order().min(rhs.order());
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, a) in self.coeffs.iter().take(n).enumerate() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().take(n - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Inverse; requires a nonzero constant term.
    ///
    /// `x[0] = 1/b_0` and `x[k] = -(sum_{j=1..k} b_j x_{k-j})/b_0`, so that
    /// x * self = 1 exactly in the truncated algebra.
    pub fn inv(&self) -> Result<Self> {
        let b0 = self.coeffs[0];
        if b0.norm() <= INVERT_EPS {
            return Err(Error::NonInvertible);
        }
        let n = self.order();
        let mut x = vec![C64::new(0.0, 0.0); n];
        x[0] = C64::new(1.0, 0.0) / b0;
        for k in 1..n {
            let mut s = C64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.coeffs[j] * x[k - j];
            }
            x[k] = -s / b0;
        }
        Ok(Self::new(x))
    }

    pub fn div(&self, rhs: &Self) -> Result<Self> {
        Ok(self.mul(&rhs.inv()?))
    }

    pub fn powi(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.order());
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// exp of the nilpotent part times exp of the constant term.
    pub fn exp(&self) -> Self {
        let n = self.order();
        let c0 = self.coeffs[0];
        let mut nil = self.clone();
        nil.coeffs[0] = C64::new(0.0, 0.0);
        let mut acc = Self::one(n);
        let mut term = Self::one(n);
        for k in 1..n {
            term = term.mul(&nil).scale(C64::new(1.0 / k as f64, 0.0));
            acc = acc.add(&term);
        }
        acc.scale(c0.exp())
    }

    /// Principal log: Log(b_0) + log(1 + nil/b_0) as a finite series.
    pub fn log(&self) -> Result<Self> {
        let b0 = self.coeffs[0];
        if b0.norm() <= INVERT_EPS {
            return Err(Error::NonInvertible);
        }
        let n = self.order();
        let mut y = self.scale(C64::new(1.0, 0.0) / b0);
        y.coeffs[0] = C64::new(0.0, 0.0); // y = nil part of self/b0
        let mut acc = Self::from_scalar(b0.ln(), n);
        let mut pow = Self::one(n);
        for k in 1..n {
            pow = pow.mul(&y);
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc = acc.add(&pow.scale(C64::new(sign / k as f64, 0.0)));
        }
        Ok(acc)
    }

    /// Evaluate at a scalar value of eps (used by finite-difference oracles).
    pub fn eval(&self, eps: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * eps + c;
        }
        acc
    }

    /// Compose: substitute `inner` (constant term must be 0) for eps.
    pub fn compose(&self, inner: &Self) -> Self {
        let n = self.order().min(inner.order());
        debug_assert!(inner.constant_term().norm() < 1e-14);
        let mut acc = Self::zero(n);
        for &c in self.coeffs.iter().take(n).rev() {
            acc = acc.mul(inner).add(&Self::from_scalar(c, n));
        }
        acc
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}
