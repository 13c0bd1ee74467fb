//! q-special functions.
//!
//! Scalar evaluations of the q-Pochhammer symbol (a;q)_d (finite and
//! infinite), Jacobi's theta function
//!
//!   theta_q(Q) = sum_{d in Z} q^{d(d-1)/2} Q^d
//!              = (q;q)_inf (-Q;q)_inf (-q/Q;q)_inf,
//!
//! the q-character e_{q,lambda}(Q) = theta_q(Q)/theta_q(lambda Q), the
//! q-logarithm l_q(Q) = -Q theta'_q(Q)/theta_q(Q), the q-Gamma function
//! and the basic hypergeometric partial sum, together with variants
//! valued in the truncated nilpotent algebra (arguments of the form
//! a*(1-eps)^{±1} or a*q^{cH}) that the connection and confluence
//! modules expand in.
//!
//! Scalar powers use the principal logarithm throughout; e_{q,lambda}
//! and Gamma_q for non-real arguments depend on that choice.

use num_complex::Complex64 as C64;

use crate::algebra::NilpotentPoly;
use crate::context::{EvalContext, MAX_TERMS};
use crate::error::{Error, Result};

/// Relative threshold below which a theta value counts as a zero.
const THETA_ZERO_REL: f64 = 1e-12;

/// A theta evaluation with its convergence record.
#[derive(Debug, Clone, Copy)]
pub struct ThetaValue {
    pub value: C64,
    pub terms_used: usize,
    /// Magnitude bound for the discarded tail.
    pub est_error: f64,
    /// Largest single term magnitude met while summing; the natural scale
    /// for deciding whether `value` is a theta zero.
    pub max_term: f64,
}

/// Evaluation method for [`theta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMethod {
    /// Bilateral series, both directions summed to tolerance.
    Sum,
    /// Jacobi triple product (q;q)_inf (-Q;q)_inf (-q/Q;q)_inf.
    Product,
}

/// Finite q-Pochhammer (a;q)_d = (1-a)(1-qa)...(1-q^{d-1}a).
pub fn qpoch(a: C64, ctx: &EvalContext, d: usize) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    let mut aq = a;
    for _ in 0..d {
        acc *= C64::new(1.0, 0.0) - aq;
        aq *= ctx.q;
    }
    acc
}

/// Infinite q-Pochhammer (a;q)_inf, truncated once |a q^k| < tol * 1e-2.
///
/// Plain truncation with the recorded first-order tail bound; no tail
/// correction factor is applied.
pub fn qpoch_inf_with_bound(a: C64, ctx: &EvalContext) -> (C64, f64) {
    let mut acc = C64::new(1.0, 0.0);
    let mut aq = a;
    let cutoff = ctx.tol * 1e-2;
    let mut k = 0usize;
    while aq.norm() >= cutoff && k < MAX_TERMS {
        acc *= C64::new(1.0, 0.0) - aq;
        aq *= ctx.q;
        k += 1;
    }
    // |log tail| <= sum_{j>=k} |a q^j| = |a q^k|/(1-|q|)
    let tail = aq.norm() / (1.0 - ctx.q.norm());
    (acc, tail * acc.norm())
}

pub fn qpoch_inf(a: C64, ctx: &EvalContext) -> C64 {
    qpoch_inf_with_bound(a, ctx).0
}

/// log (a;q)_inf as a sum of principal logs of the factors.
///
/// exp of the result reproduces the product exactly (branch jumps are
/// multiples of 2 pi i), while keeping magnitudes representable when the
/// product itself under- or overflows (q close to 1).
pub fn log_qpoch_inf(a: C64, ctx: &EvalContext) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut aq = a;
    let cutoff = ctx.tol * 1e-2;
    let mut k = 0usize;
    while aq.norm() >= cutoff && k < MAX_TERMS {
        acc += (C64::new(1.0, 0.0) - aq).ln();
        aq *= ctx.q;
        k += 1;
    }
    // second-order tail of sum log(1 - a q^j)
    acc -= aq / (C64::new(1.0, 0.0) - ctx.q);
    acc
}

/// A theta sum held as mantissa * exp(log_scale).
///
/// The bilateral series peaks at d* ~ Re(log Q / w) with peak magnitude
/// exp(|log Q|^2-ish / 2w); near q = 1 that over- or underflows binary64,
/// so the sum is accumulated relative to the peak term.
#[derive(Debug, Clone, Copy)]
pub struct ScaledTheta {
    pub mantissa: C64,
    pub log_scale: C64,
    pub terms_used: usize,
    /// largest |term| relative to the peak term (the zero-detection scale)
    pub max_rel: f64,
    /// relative tail bound
    pub est_rel_error: f64,
}

impl ScaledTheta {
    pub fn value(&self) -> C64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.norm() <= THETA_ZERO_REL * self.max_rel
    }
}

/// Bilateral theta sum rescaled by the peak term; every intermediate is
/// O(1) regardless of how close q is to 1.
pub fn theta_sum_scaled(q_arg: C64, ctx: &EvalContext) -> Result<ScaledTheta> {
    if q_arg.norm() == 0.0 {
        return Err(Error::InvalidInput("theta argument must be nonzero".into()));
    }
    let w = -ctx.q.ln(); // Re w > 0
    let ln_y = q_arg.ln();
    let d0 = ((ln_y / w).re + 0.5).round() as i64;
    // log t_{d0} = d0(d0-1)/2 * ln q + d0 * ln y
    let log_scale = ctx.q.ln() * ((d0 * (d0 - 1)) as f64 / 2.0) + ln_y * d0 as f64;

    let mut sum = C64::new(0.0, 0.0);
    let mut max_rel = 0.0f64;
    let mut terms = 0usize;

    // upward from d0: t_{d+1}/t_d = q^d * y
    let mut term = C64::new(1.0, 0.0);
    let mut ratio = (ctx.q.ln() * d0 as f64).exp() * q_arg; // q^{d0} y
    loop {
        sum += term;
        terms += 1;
        max_rel = max_rel.max(term.norm());
        term *= ratio;
        ratio *= ctx.q;
        if term.norm() < ctx.tol * max_rel {
            break;
        }
        if terms >= MAX_TERMS {
            return Err(Error::NonConvergence { terms, last: term.norm() });
        }
    }
    let tail_up = term.norm();

    // downward from d0: t_{d-1}/t_d = q^{1-d} / y, starting at d = d0
    let mut term = C64::new(1.0, 0.0);
    let mut ratio = (ctx.q.ln() * (1 - d0) as f64).exp() / q_arg; // q^{1-d0} / y
    loop {
        term *= ratio;
        ratio *= ctx.q;
        sum += term;
        terms += 1;
        max_rel = max_rel.max(term.norm());
        if term.norm() < ctx.tol * max_rel {
            break;
        }
        if terms >= MAX_TERMS {
            return Err(Error::NonConvergence { terms, last: term.norm() });
        }
    }
    let est_rel_error = (tail_up + term.norm()) * 2.0;

    Ok(ScaledTheta { mantissa: sum, log_scale, terms_used: terms, max_rel, est_rel_error })
}

/// Jacobi theta by bilateral summation.
pub fn theta_sum(q_arg: C64, ctx: &EvalContext) -> Result<ThetaValue> {
    let st = theta_sum_scaled(q_arg, ctx)?;
    let scale = st.log_scale.exp();
    Ok(ThetaValue {
        value: st.mantissa * scale,
        terms_used: st.terms_used,
        est_error: st.est_rel_error * (st.mantissa * scale).norm(),
        max_term: st.max_rel * scale.norm(),
    })
}

/// Jacobi theta by the triple product.
pub fn theta_product(q_arg: C64, ctx: &EvalContext) -> Result<ThetaValue> {
    if q_arg.norm() == 0.0 {
        return Err(Error::InvalidInput("theta argument must be nonzero".into()));
    }
    let (p1, e1) = qpoch_inf_with_bound(ctx.q, ctx);
    let (p2, e2) = qpoch_inf_with_bound(-q_arg, ctx);
    let (p3, e3) = qpoch_inf_with_bound(-ctx.q / q_arg, ctx);
    let value = p1 * p2 * p3;
    let est_error = e1 * (p2 * p3).norm() + e2 * (p1 * p3).norm() + e3 * (p1 * p2).norm();
    Ok(ThetaValue {
        value,
        terms_used: 0,
        est_error,
        max_term: value.norm().max(1.0),
    })
}

pub fn theta(q_arg: C64, ctx: &EvalContext, method: ThetaMethod) -> Result<ThetaValue> {
    match method {
        ThetaMethod::Sum => theta_sum(q_arg, ctx),
        ThetaMethod::Product => theta_product(q_arg, ctx),
    }
}

/// Peak-rescaled theta sum together with the index-weighted sum
/// sum_d d * t_d / t_peak (what the logarithmic derivative needs).
fn theta_weighted_scaled(q_arg: C64, ctx: &EvalContext) -> Result<(ScaledTheta, C64)> {
    if q_arg.norm() == 0.0 {
        return Err(Error::InvalidInput("theta argument must be nonzero".into()));
    }
    let w = -ctx.q.ln();
    let ln_y = q_arg.ln();
    let d0 = ((ln_y / w).re + 0.5).round() as i64;
    let log_scale = ctx.q.ln() * ((d0 * (d0 - 1)) as f64 / 2.0) + ln_y * d0 as f64;

    let mut sum = C64::new(0.0, 0.0);
    let mut weighted = C64::new(0.0, 0.0);
    let mut max_rel = 0.0f64;
    let mut terms = 0usize;

    let mut term = C64::new(1.0, 0.0);
    let mut ratio = (ctx.q.ln() * d0 as f64).exp() * q_arg;
    let mut d = d0;
    loop {
        sum += term;
        weighted += term * d as f64;
        terms += 1;
        max_rel = max_rel.max(term.norm());
        term *= ratio;
        ratio *= ctx.q;
        d += 1;
        if term.norm() * (1.0 + d.unsigned_abs() as f64) < ctx.tol * max_rel {
            break;
        }
        if terms >= MAX_TERMS {
            return Err(Error::NonConvergence { terms, last: term.norm() });
        }
    }
    let tail_up = term.norm();

    let mut term = C64::new(1.0, 0.0);
    let mut ratio = (ctx.q.ln() * (1 - d0) as f64).exp() / q_arg;
    let mut d = d0;
    loop {
        term *= ratio;
        ratio *= ctx.q;
        d -= 1;
        sum += term;
        weighted += term * d as f64;
        terms += 1;
        max_rel = max_rel.max(term.norm());
        if term.norm() * (1.0 + d.unsigned_abs() as f64) < ctx.tol * max_rel {
            break;
        }
        if terms >= MAX_TERMS {
            return Err(Error::NonConvergence { terms, last: term.norm() });
        }
    }
    let est_rel_error = (tail_up + term.norm()) * 2.0;
    Ok((
        ScaledTheta { mantissa: sum, log_scale, terms_used: terms, max_rel, est_rel_error },
        weighted,
    ))
}

/// q-logarithm l_q(Q) = -Q theta'_q(Q) / theta_q(Q).
///
/// Q theta'(Q) = sum_d d t_d, so the ratio needs only the rescaled sums.
pub fn q_log(q_arg: C64, ctx: &EvalContext) -> Result<C64> {
    let (st, weighted) = theta_weighted_scaled(q_arg, ctx)?;
    if st.is_zero() {
        return Err(Error::PoleAtThetaZero);
    }
    Ok(-weighted / st.mantissa)
}

/// q-character e_{q,lambda}(Q) = theta_q(Q) / theta_q(lambda Q),
/// evaluated as a ratio of rescaled sums.
pub fn q_char(lambda: C64, q_arg: C64, ctx: &EvalContext) -> Result<C64> {
    if lambda.norm() == 0.0 {
        return Err(Error::InvalidInput("character lambda must be nonzero".into()));
    }
    let num = theta_sum_scaled(q_arg, ctx)?;
    let den = theta_sum_scaled(lambda * q_arg, ctx)?;
    if den.is_zero() {
        return Err(Error::PoleAtThetaZero);
    }
    Ok(num.mantissa / den.mantissa * (num.log_scale - den.log_scale).exp())
}

/// q-Gamma: Gamma_q(x) = (q;q)_inf / (q^x;q)_inf * (1-q)^{1-x}.
///
/// Evaluated in the log domain so that q close to 1 (where (q;q)_inf
/// underflows binary64) stays finite. Principal branch of (1-q)^{1-x}.
pub fn q_gamma(x: C64, ctx: &EvalContext) -> Result<C64> {
    let qx = ctx.q_powc(x);
    // pole detection: (q^x;q)_inf = 0 iff q^{x+k} = 1 for some k >= 0
    let mut aq = qx;
    let cutoff = ctx.tol * 1e-2;
    let mut k = 0usize;
    let mut log_den = C64::new(0.0, 0.0);
    while aq.norm() >= cutoff && k < MAX_TERMS {
        let f = C64::new(1.0, 0.0) - aq;
        if f.norm() < 1e-12 {
            return Err(Error::PoleAtNonpositive);
        }
        log_den += f.ln();
        aq *= ctx.q;
        k += 1;
    }
    log_den -= aq / (C64::new(1.0, 0.0) - ctx.q);
    let log_num = log_qpoch_inf(ctx.q, ctx);
    let log_pref = (C64::new(1.0, 0.0) - x) * (C64::new(1.0, 0.0) - ctx.q).ln();
    Ok((log_num - log_den + log_pref).exp())
}

/// Basic hypergeometric partial sum and the magnitude of its last term.
#[derive(Debug, Clone, Copy)]
pub struct QHyperValue {
    pub value: C64,
    pub terms_used: usize,
    pub last_term: f64,
}

/// Partial sum of the basic hypergeometric series
///
///   sum_d  prod_i (a_i;q)_d / [ (q;q)_d prod_j (b_j;q)_d ]
///          * [ (-1)^d q^{d(d-1)/2} ]^{1+s-r} * z^d,
///
/// with r = numer.len(), s = denom.len(). For r = s+1 the balancing
/// factor is 1 and the sum reduces to the plain quotient form used by
/// the fuchsian solutions. Terms are accumulated by term-to-term ratio
/// and stop at `n_terms` or once below tolerance.
pub fn q_hyper(
    numer: &[C64],
    denom: &[C64],
    ctx: &EvalContext,
    z: C64,
    n_terms: usize,
) -> Result<QHyperValue> {
    let bal = 1 + denom.len() as i32 - numer.len() as i32;
    let mut sum = C64::new(0.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    let mut max_mag = 0.0f64;
    let mut qd = C64::new(1.0, 0.0); // q^d
    let mut used = 0usize;
    for d in 0..=n_terms {
        sum += term;
        used = d + 1;
        max_mag = max_mag.max(term.norm());
        if d == n_terms {
            break;
        }
        // ratio term_{d+1}/term_d
        let mut ratio = z;
        for &a in numer {
            ratio *= C64::new(1.0, 0.0) - a * qd;
        }
        let dq = C64::new(1.0, 0.0) - ctx.q * qd; // (1 - q^{d+1})
        if dq.norm() < 1e-13 {
            return Err(Error::DenominatorPochhammerZero(d + 1));
        }
        ratio /= dq;
        for &b in denom {
            let f = C64::new(1.0, 0.0) - b * qd;
            if f.norm() < 1e-13 {
                return Err(Error::DenominatorPochhammerZero(d + 1));
            }
            ratio /= f;
        }
        if bal != 0 {
            let factor = -qd; // (-1) q^d
            ratio *= cpow_int(factor, bal);
        }
        term *= ratio;
        qd *= ctx.q;
        if term.norm() < ctx.tol * sum.norm().max(max_mag) && d > 2 {
            sum += term;
            used = d + 2;
            break;
        }
    }
    Ok(QHyperValue { value: sum, terms_used: used, last_term: term.norm() })
}

fn cpow_int(base: C64, e: i32) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    for _ in 0..e.unsigned_abs() {
        acc *= base;
    }
    if e < 0 {
        acc = acc.finv();
    }
    acc
}

// ---------------------------------------------------------------------------
// Nilpotent-valued variants.
// ---------------------------------------------------------------------------

/// Infinite Pochhammer (A;q)_inf = prod_k (1 - A q^k) for a nilpotent
/// base A; truncation is driven by the constant term of A.
pub fn qpoch_inf_nil(a: &NilpotentPoly, ctx: &EvalContext) -> NilpotentPoly {
    let n = a.order();
    let mut acc = NilpotentPoly::one(n);
    let mut aq = a.clone();
    let cutoff = ctx.tol * 1e-2;
    let mut k = 0usize;
    while aq.max_norm() >= cutoff && k < MAX_TERMS {
        acc = acc.mul(&NilpotentPoly::one(n).sub(&aq));
        aq = aq.scale(ctx.q);
        k += 1;
    }
    acc
}

/// log (A;q)_inf in the nilpotent algebra (principal log per factor).
pub fn log_qpoch_inf_nil(a: &NilpotentPoly, ctx: &EvalContext) -> Result<NilpotentPoly> {
    let n = a.order();
    let mut acc = NilpotentPoly::zero(n);
    let mut aq = a.clone();
    let cutoff = ctx.tol * 1e-2;
    let mut k = 0usize;
    while aq.max_norm() >= cutoff && k < MAX_TERMS {
        let f = NilpotentPoly::one(n).sub(&aq);
        acc = acc.add(&f.log()?);
        aq = aq.scale(ctx.q);
        k += 1;
    }
    // first-order tail in every component
    let tail = aq.scale((C64::new(1.0, 0.0) - ctx.q).finv());
    Ok(acc.sub(&tail))
}

/// q^{cH} as an element of C\[H\]/(H^order): exp(c H log q).
pub fn q_pow_h(c: C64, ctx: &EvalContext, order: usize) -> NilpotentPoly {
    let mut gen = NilpotentPoly::zero(order);
    if order > 1 {
        gen = NilpotentPoly::eps(order).scale(c * ctx.q.ln());
    }
    gen.exp()
}

/// log Gamma_q(a + cH) in C\[H\]/(H^order), evaluated factorwise in the
/// log domain. Errors with PoleAtNonpositive when the scalar part of a
/// denominator factor vanishes.
pub fn log_qgamma_nil(a: C64, c: C64, ctx: &EvalContext, order: usize) -> Result<NilpotentPoly> {
    let qh = q_pow_h(c, ctx, order); // q^{cH}
    let qa = ctx.q_powc(a);
    let mut base = qh.scale(qa); // q^{a + cH}
    let cutoff = ctx.tol * 1e-2;
    let mut log_den = NilpotentPoly::zero(order);
    let mut k = 0usize;
    while base.constant_term().norm() >= cutoff && k < MAX_TERMS {
        let f = NilpotentPoly::one(order).sub(&base);
        if f.constant_term().norm() < 1e-12 {
            return Err(Error::PoleAtNonpositive);
        }
        log_den = log_den.add(&f.log()?);
        base = base.scale(ctx.q);
        k += 1;
    }
    log_den = log_den.sub(&base.scale((C64::new(1.0, 0.0) - ctx.q).finv()));
    let log_num = log_qpoch_inf(ctx.q, ctx);
    // (1 - a - cH) log(1-q)
    let one_minus_x = NilpotentPoly::from_scalar(C64::new(1.0, 0.0) - a, order)
        .sub(&NilpotentPoly::eps(order).scale(c));
    let log_pref = one_minus_x.scale((C64::new(1.0, 0.0) - ctx.q).ln());
    Ok(NilpotentPoly::from_scalar(log_num, order).sub(&log_den).add(&log_pref))
}

/// theta_q(X q^H) in C\[H\]/(H^order), peak-rescaled:
/// returns (P, L) with theta_q(X q^H) = P * exp(L).
///
/// The H^j component of each term is (d log q)^j / j! times the scalar
/// term, so the components are moment sums of the rescaled series.
pub fn theta_nil_h_scaled(x: C64, ctx: &EvalContext, order: usize) -> Result<(NilpotentPoly, C64)> {
    if x.norm() == 0.0 {
        return Err(Error::InvalidInput("theta argument must be nonzero".into()));
    }
    let w = -ctx.q.ln();
    let lq = ctx.q.ln();
    let ln_x = x.ln();
    let d0 = ((ln_x / w).re + 0.5).round() as i64;
    let log_scale = lq * ((d0 * (d0 - 1)) as f64 / 2.0) + ln_x * d0 as f64;

    let mut comps = vec![C64::new(0.0, 0.0); order];
    let mut max_term = 0.0f64;
    let add_term = |t: C64, d: i64, comps: &mut Vec<C64>| {
        let mut f = C64::new(1.0, 0.0);
        for (j, slot) in comps.iter_mut().enumerate() {
            *slot += t * f;
            f = f * lq * d as f64 / (j as f64 + 1.0);
        }
    };
    let weight = |d: i64| (1.0 + (d.unsigned_abs() as f64) * w.norm()).powi(order as i32 - 1);

    // upward from d0
    let mut term = C64::new(1.0, 0.0);
    let mut ratio = (lq * d0 as f64).exp() * x;
    let mut d = d0;
    let mut terms = 0usize;
    loop {
        add_term(term, d, &mut comps);
        max_term = max_term.max(term.norm() * weight(d));
        term *= ratio;
        ratio *= ctx.q;
        d += 1;
        terms += 1;
        if term.norm() * weight(d) < ctx.tol * max_term {
            break;
        }
        if terms >= MAX_TERMS {
            return Err(Error::NonConvergence { terms, last: term.norm() });
        }
    }
    // downward from d0
    let mut term = C64::new(1.0, 0.0);
    let mut ratio = (lq * (1 - d0) as f64).exp() / x;
    let mut d = d0;
    loop {
        term *= ratio;
        ratio *= ctx.q;
        d -= 1;
        add_term(term, d, &mut comps);
        terms += 1;
        max_term = max_term.max(term.norm() * weight(d));
        if term.norm() * weight(d) < ctx.tol * max_term {
            break;
        }
        if terms >= MAX_TERMS {
            return Err(Error::NonConvergence { terms, last: term.norm() });
        }
    }
    Ok((NilpotentPoly::new(comps), log_scale))
}

/// theta_q(X q^H) in C\[H\]/(H^order); convenience wrapper that folds the
/// scale back in (moderate q only; near q = 1 use the scaled form).
pub fn theta_nil_h(x: C64, ctx: &EvalContext, order: usize) -> Result<NilpotentPoly> {
    let (p, l) = theta_nil_h_scaled(x, ctx, order)?;
    Ok(p.scale(l.exp()))
}

/// e_{q,lambda}(Q)^{-1} = theta_q(lambda Q) / theta_q(Q).
pub fn q_char_inv(lambda: C64, q_arg: C64, ctx: &EvalContext) -> Result<C64> {
    q_char(lambda.finv(), lambda * q_arg, ctx)
}
