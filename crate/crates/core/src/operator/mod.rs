//! q-difference operators sum_i a_i(v) sigma^i and their transforms.
//!
//! Coefficients a_i are Laurent polynomials in the operator's variable v
//! with monomials  mantissa * q^E * v^J, where E and J are exact
//! rationals. The shift satisfies sigma(v) = q^beta v for an exact
//! rational `shift_base` beta (1 for sigma_q acting on Q, 1/s after the
//! fractional-power substitution). All transforms manipulate exponents
//! exactly; numbers enter only when an operator is evaluated.
//!
//! The normal form keeps coefficients on the left of shift powers, fully
//! expanded, using the commutation rule sigma^i v^J = q^{i beta J} v^J sigma^i.

mod newton;
mod parse;

pub use newton::{characteristic_equation, newton_polygon, CharPoly, NewtonPolygon, Segment, SegmentKind};
pub use parse::{parse_operator, parse_operator_in, pretty_print, MonomialJson, OperatorJson, TermJson};

use std::collections::BTreeMap;

use num_integer::Integer;

use crate::algebra::FracPowerSeries;
use crate::context::{C64, EvalContext, Rat};
use crate::error::{Error, Result};

/// Laurent polynomial in the operator variable with exact q-power
/// coefficients: map (v_exp, q_exp) -> mantissa.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoeffPoly {
    monos: BTreeMap<(Rat, Rat), C64>,
}

impl CoeffPoly {
    pub fn zero() -> Self {
        CoeffPoly::default()
    }

    pub fn constant(c: C64) -> Self {
        let mut p = CoeffPoly::zero();
        p.insert(Rat::new(0, 1), Rat::new(0, 1), c);
        p
    }

    pub fn monomial(v_exp: Rat, q_exp: Rat, c: C64) -> Self {
        let mut p = CoeffPoly::zero();
        p.insert(v_exp, q_exp, c);
        p
    }

    pub fn insert(&mut self, v_exp: Rat, q_exp: Rat, c: C64) {
        if c.re == 0.0 && c.im == 0.0 {
            return;
        }
        let slot = self.monos.entry((v_exp, q_exp)).or_insert_with(|| C64::new(0.0, 0.0));
        *slot += c;
        if slot.norm() == 0.0 {
            self.monos.remove(&(v_exp, q_exp));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn monomials(&self) -> impl Iterator<Item = (Rat, Rat, C64)> + '_ {
        self.monos.iter().map(|(&(v, q), &c)| (v, q, c))
    }

    /// Lowest v-exponent with a nonzero coefficient.
    pub fn min_v_exp(&self) -> Option<Rat> {
        self.monos.keys().map(|&(v, _)| v).min()
    }

    pub fn max_v_exp(&self) -> Option<Rat> {
        self.monos.keys().map(|&(v, _)| v).max()
    }

    /// Numeric coefficient of v^{v_exp}: sum over q-monomials at that exponent.
    pub fn coeff_of_v(&self, v_exp: Rat, ctx: &EvalContext) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (&(v, qe), &c) in &self.monos {
            if v == v_exp {
                acc += c * ctx.q_pow(qe);
            }
        }
        acc
    }

    fn add_assign(&mut self, rhs: &CoeffPoly) {
        for (&(v, q), &c) in &rhs.monos {
            self.insert(v, q, c);
        }
    }

    fn scaled(&self, c: C64) -> CoeffPoly {
        let mut out = CoeffPoly::zero();
        for (&(v, q), &m) in &self.monos {
            out.insert(v, q, m * c);
        }
        out
    }
}

/// Overall monomial unit factored out by a normalizing transform:
/// mantissa * q^{q_exp} * v^{v_exp} * sigma^{shift}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationUnit {
    pub mantissa: C64,
    pub q_exp: Rat,
    pub v_exp: Rat,
    pub shift: u32,
}

impl NormalizationUnit {
    pub fn identity() -> Self {
        NormalizationUnit {
            mantissa: C64::new(1.0, 0.0),
            q_exp: Rat::new(0, 1),
            v_exp: Rat::new(0, 1),
            shift: 0,
        }
    }
}

/// A q-difference operator in normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct QDiffOperator {
    variable: String,
    shift_base: Rat,
    terms: BTreeMap<u32, CoeffPoly>,
}

impl QDiffOperator {
    pub fn new(variable: impl Into<String>, shift_base: Rat) -> Self {
        QDiffOperator {
            variable: variable.into(),
            shift_base,
            terms: BTreeMap::new(),
        }
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn shift_base(&self) -> Rat {
        self.shift_base
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &CoeffPoly)> {
        self.terms.iter().map(|(&i, p)| (i, p))
    }

    pub fn coeff(&self, shift: u32) -> Option<&CoeffPoly> {
        self.terms.get(&shift)
    }

    pub fn max_shift(&self) -> u32 {
        self.terms.keys().copied().max().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, shift: u32, poly: CoeffPoly) {
        if poly.is_zero() {
            return;
        }
        let slot = self.terms.entry(shift).or_insert_with(CoeffPoly::zero);
        slot.add_assign(&poly);
        if slot.is_zero() {
            self.terms.remove(&shift);
        }
    }

    pub fn scalar(variable: impl Into<String>, shift_base: Rat, c: C64) -> Self {
        let mut op = Self::new(variable, shift_base);
        op.add_term(0, CoeffPoly::constant(c));
        op
    }

    pub fn add(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.variable, rhs.variable);
        let mut out = self.clone();
        for (&i, p) in &rhs.terms {
            out.add_term(i, p.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::new(self.variable.clone(), self.shift_base);
        for (&i, p) in &self.terms {
            out.add_term(i, p.scaled(C64::new(-1.0, 0.0)));
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    /// Operator composition; expands with sigma^i v^J = q^{i beta J} v^J sigma^i.
    pub fn mul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.variable, rhs.variable);
        let beta = self.shift_base;
        let mut out = Self::new(self.variable.clone(), beta);
        for (&i1, p1) in &self.terms {
            for (&i2, p2) in &rhs.terms {
                let mut poly = CoeffPoly::zero();
                for (v1, e1, c1) in p1.monomials() {
                    for (v2, e2, c2) in p2.monomials() {
                        let commute_q = beta * Rat::from_integer(i1 as i64) * v2;
                        poly.insert(v1 + v2, e1 + e2 + commute_q, c1 * c2);
                    }
                }
                out.add_term(i1 + i2, poly);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::scalar(self.variable.clone(), self.shift_base, C64::new(1.0, 0.0));
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Multiply every sigma^i coefficient by lambda^i.
    ///
    /// If W solves the conjugated operator then e-char * W solves the
    /// original, where the e-char has sigma-eigenvalue lambda.
    pub fn conjugate_by_character(&self, lambda: C64) -> Self {
        let mut out = Self::new(self.variable.clone(), self.shift_base);
        let mut pow = C64::new(1.0, 0.0);
        let mut last_i = 0u32;
        for (&i, p) in &self.terms {
            for _ in last_i..i {
                pow *= lambda;
            }
            last_i = i;
            out.add_term(i, p.scaled(pow));
        }
        out
    }

    /// Substitute v -> 1/u and renormalize to nonnegative shift powers.
    ///
    /// Works with sigma' = sigma^{-1} (so sigma'(u) = q^beta u), left-
    /// multiplies by sigma'^n, and clears the minimal u-exponent. Returns
    /// the operator in the new variable together with the overall unit.
    pub fn invert_variable(&self) -> (Self, NormalizationUnit) {
        let n = self.max_shift();
        let beta = self.shift_base;
        let new_var = if self.variable == "Q" {
            "w".to_string()
        } else {
            format!("inv_{}", self.variable)
        };
        let mut out = Self::new(new_var, beta);
        for (&i, p) in &self.terms {
            let new_shift = n - i;
            let mut poly = CoeffPoly::zero();
            for (v, e, c) in p.monomials() {
                // sigma'^n * (c q^e u^{-v} sigma'^{-i}) = c q^{e - n beta v} u^{-v} sigma'^{n-i}
                poly.insert(-v, e - Rat::from_integer(n as i64) * beta * v, c);
            }
            out.add_term(new_shift, poly);
        }
        // clear the minimal u-exponent so the result is polynomial
        let min_v = out
            .terms
            .values()
            .filter_map(|p| p.min_v_exp())
            .min()
            .unwrap_or_else(|| Rat::new(0, 1));
        if min_v != Rat::new(0, 1) {
            let mut cleared = Self::new(out.variable.clone(), beta);
            for (&i, p) in &out.terms {
                let mut poly = CoeffPoly::zero();
                for (v, e, c) in p.monomials() {
                    poly.insert(v - min_v, e, c);
                }
                cleared.add_term(i, poly);
            }
            out = cleared;
        }
        let unit = NormalizationUnit {
            mantissa: C64::new(1.0, 0.0),
            q_exp: Rat::new(0, 1),
            v_exp: min_v,
            shift: n,
        };
        (out, unit)
    }

    /// Fractional-power substitution z = v^{1/s} with the theta prefactor
    /// theta_{q^{t beta / s}}(z^t) divided out.
    ///
    /// (t, s) come from a sloped Newton segment of slope -t/s. Each term
    /// c q^E v^J sigma^i maps to c q^{E - beta t i(i-1)/(2s)} z^{sJ - t i} sigma^i,
    /// and the minimal z-exponent is cleared. s = 1, t = 0 is the identity.
    pub fn adams_substitute(&self, s: i64, t: i64) -> (Self, NormalizationUnit) {
        assert!(s >= 1, "s must be a positive integer");
        let beta = self.shift_base;
        let new_beta = beta / Rat::from_integer(s);
        let new_var = if s == 1 && t == 0 {
            self.variable.clone()
        } else {
            "z".to_string()
        };
        let mut out = Self::new(new_var, new_beta);
        for (&i, p) in &self.terms {
            let ii = i as i64;
            let theta_q = new_beta * Rat::new(t * ii * (ii - 1), 2);
            let theta_v = Rat::from_integer(t * ii);
            let mut poly = CoeffPoly::zero();
            for (v, e, c) in p.monomials() {
                poly.insert(v * Rat::from_integer(s) - theta_v, e - theta_q, c);
            }
            out.add_term(i, poly);
        }
        let min_v = out
            .terms
            .values()
            .filter_map(|p| p.min_v_exp())
            .min()
            .unwrap_or_else(|| Rat::new(0, 1));
        if min_v != Rat::new(0, 1) {
            let mut cleared = Self::new(out.variable.clone(), new_beta);
            for (&i, p) in &out.terms {
                let mut poly = CoeffPoly::zero();
                for (v, e, c) in p.monomials() {
                    poly.insert(v - min_v, e, c);
                }
                cleared.add_term(i, poly);
            }
            out = cleared;
        }
        let unit = NormalizationUnit {
            mantissa: C64::new(1.0, 0.0),
            q_exp: Rat::new(0, 1),
            v_exp: min_v,
            shift: 0,
        };
        (out, unit)
    }

    fn global_min_v(&self) -> Option<Rat> {
        self.terms.values().filter_map(|p| p.min_v_exp()).min()
    }

    /// True when the two operators agree up to one overall monomial unit
    /// mantissa * q^a * v^b (compared numerically with relative tolerance).
    pub fn equals_up_to_unit(&self, rhs: &Self, ctx: &EvalContext, tol: f64) -> bool {
        if self.terms.len() != rhs.terms.len() {
            return false;
        }
        let (mv_a, mv_b) = match (self.global_min_v(), rhs.global_min_v()) {
            (Some(a), Some(b)) => (a, b),
            (None, None) => return true,
            _ => return false,
        };
        let v_off = mv_a - mv_b; // self coeff at v corresponds to rhs at v - v_off
        // reference: lowest shift, lowest v-exponent of self
        let (i0, p0) = match self.terms.iter().next() {
            Some(x) => x,
            None => return rhs.terms.is_empty(),
        };
        let q0 = match rhs.terms.get(i0) {
            Some(x) => x,
            None => return false,
        };
        let va = match p0.min_v_exp() {
            Some(v) => v,
            None => return false,
        };
        let ca_num = p0.coeff_of_v(va, ctx);
        let cb_num = q0.coeff_of_v(va - v_off, ctx);
        if cb_num.norm() == 0.0 {
            return false;
        }
        let unit = ca_num / cb_num;
        for (i, p) in self.terms.iter().map(|(&i, p)| (i, p)) {
            let q = match rhs.terms.get(&i) {
                Some(x) => x,
                None => return false,
            };
            let mut v_exps: Vec<Rat> = p.monos.keys().map(|&(v, _)| v).collect();
            v_exps.extend(q.monos.keys().map(|&(v, _)| v + v_off));
            v_exps.sort();
            v_exps.dedup();
            for v in v_exps {
                let a = p.coeff_of_v(v, ctx);
                let b = q.coeff_of_v(v - v_off, ctx) * unit;
                if (a - b).norm() > tol * a.norm().max(b.norm()).max(1.0) {
                    return false;
                }
            }
        }
        true
    }
}

/// A solution object: prefactor descriptor plus coefficient series.
///
/// Represents  char * Theta^r * series  where the character satisfies
/// sigma(char) = lambda * char in the operator's variable v, and
/// Theta = theta_{q^{t beta/s}}(v^{t/s})-style prefactors are described
/// by `theta_power` r and the pair (s, t) so that
/// sigma^i Theta^r = q^{-r beta t i(i-1)/(2s)} v^{-r t i / s} Theta^r.
#[derive(Debug, Clone)]
pub struct SolutionObject {
    pub variable: String,
    pub character: C64,
    pub theta_power: i64,
    pub theta_s: i64,
    pub theta_t: i64,
    pub series: FracPowerSeries,
    pub at_infinity: bool,
}

impl SolutionObject {
    /// Plain series solution (no prefactor) in the operator's variable.
    pub fn plain(variable: impl Into<String>, series: FracPowerSeries, at_infinity: bool) -> Self {
        SolutionObject {
            variable: variable.into(),
            character: C64::new(1.0, 0.0),
            theta_power: 0,
            theta_s: 1,
            theta_t: 0,
            series,
            at_infinity,
        }
    }

    pub fn with_character(mut self, lambda: C64) -> Self {
        self.character = lambda;
        self
    }

    pub fn with_theta(mut self, r: i64, s: i64, t: i64) -> Self {
        self.theta_power = r;
        self.theta_s = s;
        self.theta_t = t;
        self
    }
}

/// Apply an operator to a solution object and return the residual series
/// (the common prefactor divided out). Only residual exponents whose
/// every contribution lies within the series truncation are reported.
pub fn apply(op: &QDiffOperator, sol: &SolutionObject, ctx: &EvalContext) -> Result<FracPowerSeries> {
    if op.variable != sol.variable {
        return Err(Error::VariableMismatch {
            op: op.variable.clone(),
            sol: sol.variable.clone(),
        });
    }
    let beta = op.shift_base;
    let r = Rat::from_integer(sol.theta_power);
    let ts = Rat::new(sol.theta_t, sol.theta_s);
    let series = &sol.series;
    let h = series.base_exponent();
    let emax = series.max_exponent();

    // residual exponent for series slot k and term (i, J):
    //   e = h + k/denom + J - r * t/s * i
    // complete up to e_complete = emax + min_terms(J - r*(t/s)*i)
    let mut min_off: Option<Rat> = None;
    let mut lattice = series.denom();
    for (i, p) in op.terms() {
        let theta_v = r * ts * Rat::from_integer(i as i64);
        for (v, _, _) in p.monomials() {
            let off = v - theta_v;
            min_off = Some(match min_off {
                None => off,
                Some(m) => m.min(off),
            });
            lattice = lattice.lcm(off.denom());
        }
    }
    let min_off = min_off.ok_or_else(|| Error::InvalidInput("operator has no terms".into()))?;
    let e_lo = h + min_off;
    let e_hi = emax + min_off;
    if e_hi < e_lo {
        return Err(Error::TruncationTooShort);
    }
    let len = ((e_hi - e_lo) * Rat::from_integer(lattice)).to_integer() as usize + 1;
    let mut out = vec![C64::new(0.0, 0.0); len];

    for (i, p) in op.terms() {
        let ii = i as i64;
        let lam_pow = pow_ci(sol.character, ii);
        let theta_qe = r * ts * beta * Rat::new(ii * (ii - 1), 2);
        let theta_v = r * ts * Rat::from_integer(ii);
        for (v, e, c) in p.monomials() {
            let base_c = c * lam_pow * ctx.q_pow(e - theta_qe);
            let off = v - theta_v;
            for (k, &fk) in series.coeffs().iter().enumerate() {
                if fk.re == 0.0 && fk.im == 0.0 {
                    continue;
                }
                let x = series.exponent(k);
                let e_res = x + off;
                if e_res > e_hi {
                    break;
                }
                let idx = ((e_res - e_lo) * Rat::from_integer(lattice)).to_integer();
                debug_assert!(idx >= 0);
                let shift_factor = ctx.q_pow(beta * Rat::from_integer(ii) * x);
                out[idx as usize] += base_c * shift_factor * fk;
            }
        }
    }
    Ok(FracPowerSeries::new(e_lo, lattice, out))
}

fn pow_ci(base: C64, e: i64) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    for _ in 0..e.unsigned_abs() {
        acc *= base;
    }
    if e < 0 {
        acc.finv()
    } else {
        acc
    }
}
