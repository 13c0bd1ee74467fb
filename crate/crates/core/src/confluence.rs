//! The q -> 1 limit of the q-difference structure.
//!
//! Along q(t) = q0^t the q-special functions degenerate to classical
//! ones: (q-1) l_q(-Q) -> Log(-Q), e_{q,lambda(t)}(-Q) -> (-Q)^mu for
//! (lambda-1)/(q-1) -> mu, and Gamma_q -> Gamma. The limit of the
//! continuation identity is the classical connection formula for the
//! hypergeometric period series of degree (5,1); both sides are
//! evaluated here as truncated polynomials in the nilpotent class H.
//!
//! Classical Gamma is computed by argument shifting plus the Stirling
//! series (relative error well under 1e-12 on the strip 0.1 <= Re z <= 6,
//! |Im z| <= 5); polygamma values come from Hurwitz-zeta partial sums
//! with an Euler-Maclaurin tail, shifted by +M with M = 20.

use num_complex::Complex64 as C64;

use crate::algebra::NilpotentPoly;
use crate::connection::w_series_value;
use crate::context::{cpowc, EvalContext, Rat};
use crate::error::{Error, Result};
use crate::qspecial::{
    log_qgamma_nil, q_char, q_gamma, q_log, theta_nil_h_scaled, theta_sum_scaled,
};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Bernoulli numbers B_2, B_4, ..., B_14.
const BERNOULLI: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Shift threshold for the Stirling series.
const STIRLING_SHIFT: f64 = 20.0;

fn is_near_nonpositive_integer(z: C64) -> Option<i64> {
    if z.im.abs() < 1e-12 {
        let r = z.re.round();
        if r <= 0.0 && (z.re - r).abs() < 1e-12 {
            return Some(r as i64);
        }
    }
    None
}

/// log Gamma by recurrence shift to Re z >= 20 plus the Stirling series.
pub fn log_gamma(z: C64) -> Result<C64> {
    if let Some(k) = is_near_nonpositive_integer(z) {
        return Err(Error::PoleAtNonpositiveInteger(k));
    }
    if z.re < 0.5 {
        // reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let pi = std::f64::consts::PI;
        let s = (z * pi).sin();
        return Ok(C64::new(pi, 0.0).ln() - s.ln() - log_gamma(C64::new(1.0, 0.0) - z)?);
    }
    let shift = (STIRLING_SHIFT - z.re).ceil().max(0.0) as usize;
    let mut log_prod = C64::new(0.0, 0.0);
    let mut zz = z;
    for _ in 0..shift {
        log_prod += zz.ln();
        zz += 1.0;
    }
    // Stirling at zz
    let mut s = (zz - 0.5) * zz.ln() - zz + C64::new(0.5 * (TWO_PI).ln(), 0.0);
    let z2 = (zz * zz).finv();
    let mut zp = zz.finv();
    for (j, &b) in BERNOULLI.iter().enumerate() {
        let k = 2 * (j + 1);
        s += zp * (b / ((k * (k - 1)) as f64));
        zp *= z2;
    }
    Ok(s - log_prod)
}

/// Classical Gamma.
pub fn gamma(z: C64) -> Result<C64> {
    Ok(log_gamma(z)?.exp())
}

/// Hurwitz zeta zeta(s, c) for integer s >= 2, Euler-Maclaurin with
/// shift M = 20.
pub fn hurwitz_zeta(s: u32, c: C64) -> Result<C64> {
    if s < 2 {
        return Err(Error::InvalidInput("hurwitz_zeta needs s >= 2".into()));
    }
    if is_near_nonpositive_integer(c).is_some() {
        return Err(Error::PoleAtNonpositiveInteger(c.re.round() as i64));
    }
    let m = 20usize;
    let sf = s as f64;
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..m {
        sum += (c + j as f64).powf(-sf);
    }
    let a = c + m as f64;
    sum += a.powf(1.0 - sf) / (sf - 1.0);
    sum += a.powf(-sf) * 0.5;
    // Euler-Maclaurin tail: sum_j B_2j/(2j)! * (s)_{2j-1} * a^{-s-2j+1}
    let mut rising = C64::new(sf, 0.0); // (s)_1
    let mut fact = 2.0f64; // (2j)!
    let mut ap = a.powf(-sf - 1.0);
    for (j, &b) in BERNOULLI.iter().enumerate() {
        sum += ap * rising * (b / fact);
        // advance (s)_{2j-1} -> (s)_{2j+1}, (2j)! -> (2j+2)!, a^{-s-2j+1} -> a^{-s-2j-1}
        let k = 2 * (j + 1);
        rising *= (sf + k as f64 - 1.0) * (sf + k as f64);
        fact *= ((k + 1) * (k + 2)) as f64;
        ap = ap / (a * a);
    }
    Ok(sum)
}

/// Digamma by recurrence to Re >= 20 plus the asymptotic series.
pub fn digamma(c: C64) -> Result<C64> {
    if let Some(k) = is_near_nonpositive_integer(c) {
        return Err(Error::PoleAtNonpositiveInteger(k));
    }
    let m = 20usize;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..m {
        acc -= (c + j as f64).finv();
    }
    let a = c + m as f64;
    acc += a.ln() - (a * 2.0).finv();
    let mut ap = (a * a).finv();
    for (j, &b) in BERNOULLI.iter().enumerate() {
        let k = 2 * (j + 1);
        acc -= ap * (b / k as f64);
        ap = ap / (a * a);
    }
    Ok(acc)
}

/// psi^{(k)}(c): digamma for k = 0, else (-1)^{k+1} k! zeta(k+1, c).
pub fn polygamma(k: u32, c: C64) -> Result<C64> {
    if k == 0 {
        return digamma(c);
    }
    let mut fact = 1.0f64;
    for j in 2..=k {
        fact *= j as f64;
    }
    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
    Ok(hurwitz_zeta(k + 1, c)? * (sign * fact))
}

/// Euler-Mascheroni constant from its defining limit H_n - ln n with
/// Euler-Maclaurin acceleration.
pub fn euler_gamma() -> f64 {
    let n = 200usize;
    let mut h = 0.0f64;
    for j in 1..=n {
        h += 1.0 / j as f64;
    }
    let nf = n as f64;
    h - nf.ln() - 1.0 / (2.0 * nf) + 1.0 / (12.0 * nf * nf) - 1.0 / (120.0 * nf.powi(4))
        + 1.0 / (252.0 * nf.powi(6))
}

/// zeta(s) for integer s >= 2.
pub fn zeta(s: u32) -> f64 {
    hurwitz_zeta(s, C64::new(1.0, 0.0)).expect("zeta at positive integer").re
}

/// Taylor expansion of Gamma about c composed with a nilpotent shift.
#[derive(Debug, Clone)]
pub struct GammaSeries {
    /// `coeffs[k]` multiplies the k-th power of the shift generator;
    /// `coeffs[0]` = Gamma(c).
    pub series: NilpotentPoly,
}

impl GammaSeries {
    pub fn order(&self) -> usize {
        self.series.order()
    }

    pub fn coeffs(&self) -> &[C64] {
        self.series.coeffs()
    }
}

/// Gamma(c + u) for a nilpotent u with zero constant term:
/// exp of log Gamma(c) + sum_{k>=1} psi^{(k-1)}(c) u^k / k!.
pub fn gamma_nilpotent(c: C64, u: &NilpotentPoly) -> Result<GammaSeries> {
    if u.constant_term().norm() != 0.0 {
        return Err(Error::InvalidInput("nilpotent shift must have zero constant term".into()));
    }
    let n = u.order();
    let mut log_series = NilpotentPoly::from_scalar(log_gamma(c)?, n);
    let mut upow = NilpotentPoly::one(n);
    let mut fact = 1.0f64;
    for k in 1..n {
        upow = upow.mul(u);
        fact *= k as f64;
        let psi = polygamma((k - 1) as u32, c)?;
        log_series = log_series.add(&upow.scale(psi / fact));
    }
    Ok(GammaSeries { series: log_series.exp() })
}

/// A confluence path q(t) = q0^t with strictly decreasing t in (0, 1].
#[derive(Debug, Clone)]
pub struct ConfluencePath {
    pub q0: C64,
    pub t_values: Vec<f64>,
}

impl ConfluencePath {
    pub fn new(q0: C64, t_values: Vec<f64>) -> Result<Self> {
        if !(q0.norm() > 0.0 && q0.norm() < 1.0) {
            return Err(Error::InvalidInput("q0 must satisfy 0 < |q0| < 1".into()));
        }
        if t_values.is_empty() || t_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("t values must be strictly decreasing".into()));
        }
        if t_values.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::InvalidInput("t values must lie in (0, 1]".into()));
        }
        Ok(ConfluencePath { q0, t_values })
    }

    pub fn q_of_t(&self, t: f64) -> C64 {
        cpowc(self.q0, C64::new(t, 0.0))
    }

    /// Distance-based test for Q on the spiral q0^R (the pole locus of
    /// the shifted q-logarithm as t -> 0).
    pub fn on_spiral(&self, q_arg: C64) -> bool {
        if q_arg.norm() == 0.0 {
            return true;
        }
        let w0 = -self.q0.ln(); // Re w0 > 0
        let lq = q_arg.ln();
        let kmax = ((lq.norm() + w0.norm()) / TWO_PI).ceil() as i64 + 2;
        for k in -kmax..=kmax {
            let p = lq - C64::new(0.0, TWO_PI * k as f64);
            // distance from p to the real line through 0 directed along -w0
            let dist = (p.re * (-w0).im - p.im * (-w0).re).abs() / w0.norm();
            if dist < 1e-9 {
                return true;
            }
        }
        false
    }
}

/// Values along a confluence path with their deviations from the limit.
#[derive(Debug, Clone)]
pub struct LimitTrace {
    pub samples: Vec<(f64, C64)>,
    pub expected: C64,
    pub deviations: Vec<f64>,
}

fn path_context(path: &ConfluencePath, t: f64, tol: f64) -> Result<EvalContext> {
    EvalContext::new(path.q_of_t(t), 53, tol)
}

/// (q(t)-1) l_{q(t)}(-Q) along the path; the limit is the principal
/// Log(-Q) (the branch realized by the theta convention, with cut where
/// Q meets the spiral).
pub fn limit_qlog(q_arg: C64, path: &ConfluencePath, ctx: &EvalContext) -> Result<LimitTrace> {
    if path.on_spiral(q_arg) {
        return Err(Error::InvalidInput("Q lies on the excluded spiral q0^R".into()));
    }
    let expected = (-q_arg).ln();
    let mut samples = Vec::new();
    let mut deviations = Vec::new();
    for &t in &path.t_values {
        let ctx_t = path_context(path, t, ctx.tol)?;
        let value = (ctx_t.q - C64::new(1.0, 0.0)) * q_log(-q_arg, &ctx_t)?;
        deviations.push((value - expected).norm());
        samples.push((t, value));
    }
    Ok(LimitTrace { samples, expected, deviations })
}

/// e_{q(t),lambda(t)}(-Q) with lambda(t) = 1 + (q(t)-1) mu; the limit is
/// (-Q)^mu, principal branch.
pub fn limit_qchar(q_arg: C64, mu: C64, path: &ConfluencePath, ctx: &EvalContext) -> Result<LimitTrace> {
    if path.on_spiral(q_arg) {
        return Err(Error::InvalidInput("Q lies on the excluded spiral q0^R".into()));
    }
    let expected = (mu * (-q_arg).ln()).exp();
    let mut samples = Vec::new();
    let mut deviations = Vec::new();
    for &t in &path.t_values {
        let ctx_t = path_context(path, t, ctx.tol)?;
        let lambda = C64::new(1.0, 0.0) + (ctx_t.q - C64::new(1.0, 0.0)) * mu;
        let value = q_char(lambda, -q_arg, &ctx_t)?;
        deviations.push((value - expected).norm());
        samples.push((t, value));
    }
    Ok(LimitTrace { samples, expected, deviations })
}

// ---------------------------------------------------------------------------
// The classical limit of the continuation identity.
// ---------------------------------------------------------------------------

/// Q = 0 side of the classical period connection formula, as a
/// truncated polynomial in H mod H^4:
///
///   Q^H sum_d [prod_{k<=5d}(5H+k) / prod_{k<=d}(H+k)^5] (Q/5^5)^d.
///
/// The coefficient growth (5d)!/(d!)^5 ~ 5^{5d} makes the series
/// converge for |Q| < 1 only, with ~1/d^2 decay on the unit circle;
/// a first-order geometric tail correction is applied so boundary
/// points remain usable.
pub fn classical_period_lhs(q_arg: C64, n_terms: usize) -> Result<NilpotentPoly> {
    let order = 4usize;
    let five5 = 3125.0;
    if q_arg.norm() > 1.0 + 1e-9 {
        return Err(Error::SeriesDivergent(q_arg.norm()));
    }
    let h = NilpotentPoly::eps(order);
    let z = q_arg / five5;
    let mut term = NilpotentPoly::one(order);
    let mut lhs_sum = NilpotentPoly::zero(order);
    let mut d_used = 0usize;
    for d in 0..n_terms {
        lhs_sum = lhs_sum.add(&term);
        d_used = d;
        // ratio: prod_{k=5d+1}^{5d+5}(5H+k) / (H+d+1)^5 * z
        let mut num = NilpotentPoly::one(order);
        for k in (5 * d + 1)..=(5 * d + 5) {
            num = num.mul(&h.scale(C64::new(5.0, 0.0)).add(&NilpotentPoly::from_scalar(
                C64::new(k as f64, 0.0),
                order,
            )));
        }
        let den = h
            .add(&NilpotentPoly::from_scalar(C64::new((d + 1) as f64, 0.0), order))
            .powi(5)
            .inv()?;
        term = term.mul(&num).mul(&den).scale(z);
        if term.max_norm() < 1e-16 * lhs_sum.max_norm() && d > 4 {
            break;
        }
    }
    let _ = d_used;
    // geometric tail estimate with limit ratio Q
    let denom = C64::new(1.0, 0.0) - q_arg;
    if denom.norm() > 1e-6 {
        lhs_sum = lhs_sum.add(&term.scale(denom.finv()));
    }
    let q_pow_h = h.scale(q_arg.ln()).exp(); // Q^H
    Ok(q_pow_h.mul(&lhs_sum))
}

/// Infinity side of the classical period connection formula:
///
///   Q^H 5^{5H} Gamma(H+1)^5/Gamma(5H+1)
///     * sum_k c_k * (-Q)^{-(H+k/5)} pi/sin(pi(H+k/5)) * W~_k(1/Q),
///
/// with the reflection factor expanded through Gamma of nilpotent
/// arguments and W~_k = sum_d prod_{l<d}(k/5+l)^5/prod_{l<5d}(k+l)
/// (5^5/Q)^d, convergent for |Q| > 1 (~1/d^2 on the unit circle, same
/// tail correction as the other side). All powers use principal
/// branches (the Q^H (-Q)^{-H} pair does not cancel to a constant
/// across the cut); Q must avoid the positive real axis.
pub fn classical_period_rhs(q_arg: C64, n_terms: usize) -> Result<NilpotentPoly> {
    let order = 4usize;
    let five5 = 3125.0;
    if q_arg.norm() < 1.0 - 1e-9 {
        return Err(Error::SeriesDivergent(q_arg.norm().recip()));
    }
    if q_arg.im == 0.0 && q_arg.re >= 0.0 {
        return Err(Error::InvalidInput(
            "the continuation side needs Q off the positive real axis".into(),
        ));
    }
    let log_mq = (-q_arg).ln();
    let h = NilpotentPoly::eps(order);
    let gamma_h1 = gamma_nilpotent(C64::new(1.0, 0.0), &h)?.series;
    let gamma_5h1 = gamma_nilpotent(C64::new(1.0, 0.0), &h.scale(C64::new(5.0, 0.0)))?.series;
    let gamma_block = gamma_h1.powi(5).mul(&gamma_5h1.inv()?);
    let five_pow = h.scale(C64::new(5.0 * 5.0f64.ln(), 0.0)).exp(); // 5^{5H}
    let mut rhs_sum = NilpotentPoly::zero(order);
    for k in 1..=4i64 {
        let kf = k as f64;
        // scalar constant 5^{k-1} Gamma(5-k) / (prod_{i != k} (i-k) Gamma(1-k/5)^5)
        let mut denom = C64::new(1.0, 0.0);
        for i in 1..=4i64 {
            if i != k {
                denom *= C64::new((i - k) as f64, 0.0);
            }
        }
        let g1k = gamma(C64::new(1.0 - kf / 5.0, 0.0))?;
        let constant = 5.0f64.powi(k as i32 - 1) * gamma(C64::new(5.0 - kf, 0.0))?.re
            / (denom.re * g1k.powi(5).re);
        // (-Q)^{-(H + k/5)} * pi / sin(pi (H + k/5)), the reflection factor
        // expanded through Gamma of nilpotent arguments; principal Log(-Q)
        let qfac = h
            .scale(-log_mq)
            .add(&NilpotentPoly::from_scalar(-log_mq * kf / 5.0, order))
            .exp();
        let g_plus = gamma_nilpotent(C64::new(kf / 5.0, 0.0), &h)?.series;
        let g_minus = gamma_nilpotent(C64::new(1.0 - kf / 5.0, 0.0), &h.neg())?.series;
        let reflect = qfac.mul(&g_plus).mul(&g_minus);
        // W~_k with geometric tail correction (limit ratio 1/Q)
        let mut w = C64::new(0.0, 0.0);
        let mut t = C64::new(1.0, 0.0);
        let zz = C64::new(five5, 0.0) / q_arg;
        for d in 0..n_terms {
            w += t;
            let num = (kf / 5.0 + d as f64).powi(5);
            let mut den = 1.0f64;
            for l in (5 * d)..(5 * d + 5) {
                den *= kf + l as f64;
            }
            t = t * (num / den) * zz;
            if t.norm() < 1e-16 * w.norm() && d > 4 {
                break;
            }
        }
        let tail_denom = C64::new(1.0, 0.0) - q_arg.finv();
        if tail_denom.norm() > 1e-6 {
            w += t / tail_denom;
        }
        rhs_sum = rhs_sum.add(&reflect.scale(C64::new(constant, 0.0) * w));
    }
    let q_pow_h = h.scale(q_arg.ln()).exp(); // Q^H
    Ok(q_pow_h.mul(&five_pow).mul(&gamma_block).mul(&rhs_sum))
}

/// Two-sided evaluation of the classical connection formula. The two
/// series have abutting convergence disks (|Q| < 1 and |Q| > 1), so a
/// genuine two-sided summation exists only on the shared boundary
/// |Q| = 1 (away from the singular point Q = 1), where both sides decay
/// like 1/d^2 and the tail corrections apply.
pub fn classical_period_check(q_arg: C64, n_terms: usize) -> Result<(NilpotentPoly, NilpotentPoly)> {
    Ok((classical_period_lhs(q_arg, n_terms)?, classical_period_rhs(q_arg, n_terms)?))
}

/// The q-Gamma form of the infinity side of the continuation identity
/// for the fuchsian case, as a truncated polynomial in H mod H^4:
///
///   q^{H l_q(Q)} * Gq(H+1)^4/prod_i Gq(H+i/5)
///     * sum_k D_k Gq(H+k/5) Gq(1-k/5-H)
///       * theta(-q^{H+k/5} Q)/theta(-Q) * S_k(Q),
///
/// assembled in the log domain so the q -> 1 path stays finite.
pub fn qgamma_form_rhs(q_arg: C64, ctx: &EvalContext) -> Result<NilpotentPoly> {
    let order = 4usize;
    let one = C64::new(1.0, 0.0);
    let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();

    // q^{H l_q(Q)}
    let ell = q_log(q_arg, ctx)?;
    let p_l = NilpotentPoly::eps(order).scale(ell * ctx.q.ln()).exp();

    // Gq(H+1)^4 / prod_i Gq(H+i/5), via log sums
    let mut log_head = log_qgamma_nil(one, one, ctx, order)?.scale(C64::new(4.0, 0.0));
    for i in 1..=4i64 {
        let l = log_qgamma_nil(C64::new(i as f64 / 5.0, 0.0), one, ctx, order)?;
        log_head = log_head.sub(&l);
    }
    let head = log_head.exp();

    let theta_den = theta_sum_scaled(-q_arg, ctx)?;
    if theta_den.is_zero() {
        return Err(Error::PoleAtThetaZero);
    }

    let mut total = NilpotentPoly::zero(order);
    for k in 1..=4i64 {
        let kf = k as f64 / 5.0;
        // scalar D_k = prod_{i != k} Gq((i-k)/5) / Gq(1-k/5)^4
        let mut dk = one;
        for i in 1..=4i64 {
            if i != k {
                dk *= q_gamma(C64::new((i - k) as f64 / 5.0, 0.0), ctx)?;
            }
        }
        let g = q_gamma(C64::new(1.0 - kf, 0.0), ctx)?;
        dk /= g * g * g * g;
        // Gq(H + k/5) Gq(1 - k/5 - H)
        let log_e = log_qgamma_nil(C64::new(kf, 0.0), one, ctx, order)?
            .add(&log_qgamma_nil(C64::new(1.0 - kf, 0.0), -one, ctx, order)?);
        let e_k = log_e.exp();
        // theta(-q^{k/5} q^H Q) / theta(-Q), both peak-rescaled
        let (theta_num, log_num) = theta_nil_h_scaled(-ctx.q_powf(kf) * q_arg, ctx, order)?;
        let f_k = theta_num.scale((log_num - theta_den.log_scale).exp() / theta_den.mantissa);
        let s_k = w_series_value((k - 1) as usize, &alphas, 4, q_arg, ctx)?;
        total = total.add(&e_k.mul(&f_k).scale(dk * s_k));
    }
    Ok(p_l.mul(&head).mul(&total))
}

/// Re-expand a truncated H-polynomial in eps = 1 - q^H:
/// H = log(1 - eps)/log q.
pub fn h_poly_to_eps(poly: &NilpotentPoly, ctx: &EvalContext) -> NilpotentPoly {
    let n = poly.order();
    let mut h_of_eps = NilpotentPoly::zero(n);
    // log(1-eps) = -(eps + eps^2/2 + eps^3/3 + ...)
    let mut v = vec![C64::new(0.0, 0.0); n];
    for (k, slot) in v.iter_mut().enumerate().skip(1) {
        *slot = C64::new(-1.0 / k as f64, 0.0);
    }
    let lq = ctx.q.ln();
    for (k, &c) in v.iter().enumerate() {
        if k > 0 {
            let mut unit = vec![C64::new(0.0, 0.0); n];
            unit[k] = c / lq;
            h_of_eps = h_of_eps.add(&NilpotentPoly::new(unit));
        }
    }
    poly.compose(&h_of_eps)
}

/// Compare the q-Gamma form of the infinity side against the direct
/// Pochhammer form, componentwise in eps; returns both and the residual.
pub fn qgamma_rewrite_check(q_arg: C64, ctx: &EvalContext) -> Result<(NilpotentPoly, NilpotentPoly, f64)> {
    let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
    let via_gamma_h = qgamma_form_rhs(q_arg, ctx)?;
    let via_gamma = h_poly_to_eps(&via_gamma_h, ctx);
    let direct = crate::connection::mbw_rhs(&alphas, 4, q_arg, 400, ctx)?;
    let mut worst = 0.0f64;
    for b in 0..4 {
        let (l, r) = (via_gamma.coeff(b), direct.coeff(b));
        let scale = l.norm().max(r.norm());
        if scale > 1e-250 {
            worst = worst.max((l - r).norm() / scale);
        }
    }
    Ok((via_gamma, direct, worst))
}

/// Deviation of the q-Gamma form from its classical limit along a path:
/// for each t, max componentwise |lhs_H(t) - classical| over the H-basis.
pub fn classical_limit_trace(
    q_arg: C64,
    path: &ConfluencePath,
    tol: f64,
    n_terms: usize,
) -> Result<Vec<(f64, f64)>> {
    let classical = classical_period_rhs(q_arg, n_terms)?;
    let mut out = Vec::new();
    for &t in &path.t_values {
        let ctx_t = path_context(path, t, tol)?;
        let v = qgamma_form_rhs(q_arg, &ctx_t)?;
        let mut worst = 0.0f64;
        for b in 0..4 {
            let (l, r) = (v.coeff(b), classical.coeff(b));
            let scale = r.norm().max(1.0);
            worst = worst.max((l - r).norm() / scale);
        }
        out.push((t, worst));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gamma_reference_values() {
        let g1 = gamma(c(1.0, 0.0)).unwrap();
        assert!((g1 - c(1.0, 0.0)).norm() < 1e-14);
        let gh = gamma(c(0.5, 0.0)).unwrap();
        assert!((gh.re - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        let g5 = gamma(c(5.0, 0.0)).unwrap();
        assert!((g5.re - 24.0).abs() < 1e-11);
    }

    #[test]
    fn gamma_reflection_oracle() {
        // Gamma(0.3) Gamma(0.7) = pi / sin(0.3 pi)
        let l = gamma(c(0.3, 0.0)).unwrap() * gamma(c(0.7, 0.0)).unwrap();
        let r = std::f64::consts::PI / (0.3 * std::f64::consts::PI).sin();
        assert!((l.re - r).abs() < 1e-12 * r);
    }

    #[test]
    fn gamma_reflection_and_duplication_random() {
        let pi = std::f64::consts::PI;
        let samples = [c(0.7, 1.3), c(2.4, -0.8), c(1.1, 3.0), c(0.3, -2.2)];
        for &z in &samples {
            let refl = gamma(z).unwrap() * gamma(c(1.0, 0.0) - z).unwrap();
            let target = C64::new(pi, 0.0) / (z * pi).sin();
            assert!((refl - target).norm() < 1e-11 * target.norm(), "reflection at {z}");
        }
        // multiplication formula, n = 5:
        // Gamma(5x) (2pi)^2 = 5^{5x-1/2} Gamma(x) Gamma(x+1/5)...Gamma(x+4/5)
        for &x in &[c(0.31, 0.12), c(0.8, -0.4)] {
            let lhs = gamma(x * 5.0).unwrap() * (2.0 * pi).powi(2);
            let mut rhs = crate::context::cpowc(c(5.0, 0.0), x * 5.0 - 0.5);
            for j in 0..5 {
                rhs *= gamma(x + j as f64 / 5.0).unwrap();
            }
            assert!((lhs - rhs).norm() < 1e-11 * rhs.norm(), "duplication at {x}");
        }
    }

    #[test]
    fn gamma_pole_detection() {
        assert!(matches!(
            gamma(c(-3.0, 0.0)),
            Err(Error::PoleAtNonpositiveInteger(-3))
        ));
    }

    #[test]
    fn gamma_accuracy_on_strip() {
        // spot relative accuracy against the recursion Gamma(z+1) = z Gamma(z)
        for &z in &[c(0.1, 5.0), c(3.3, -4.2), c(6.0, 0.0), c(0.12, 0.0)] {
            let a = gamma(z + 1.0).unwrap();
            let b = gamma(z).unwrap() * z;
            assert!((a - b).norm() < 1e-12 * a.norm(), "recursion at {z}");
        }
    }

    #[test]
    fn polygamma_vs_log_expansion_constants() {
        // log Gamma(1+x) = -euler_gamma x + sum_{k>=2} (-1)^k zeta(k) x^k / k
        let g = euler_gamma();
        let psi1 = digamma(c(1.0, 0.0)).unwrap();
        assert!((psi1.re + g).abs() < 1e-12);
        let z2 = zeta(2);
        assert!((z2 - std::f64::consts::PI * std::f64::consts::PI / 6.0).abs() < 1e-12);
        let psi_prime = polygamma(1, c(1.0, 0.0)).unwrap();
        assert!((psi_prime.re - z2).abs() < 1e-12);
    }

    #[test]
    fn gamma_nilpotent_log_series_oracle() {
        // Gamma(1 + H) mod H^4 against exp of the log expansion
        let h = NilpotentPoly::eps(4);
        let gs = gamma_nilpotent(c(1.0, 0.0), &h).unwrap();
        let g = euler_gamma();
        let log_poly = NilpotentPoly::new(vec![
            c(0.0, 0.0),
            c(-g, 0.0),
            c(zeta(2) / 2.0, 0.0),
            c(-zeta(3) / 3.0, 0.0),
        ]);
        let oracle = log_poly.exp();
        for k in 0..4 {
            assert!(
                (gs.series.coeff(k) - oracle.coeff(k)).norm() < 1e-12,
                "coefficient {k}"
            );
        }
    }

    #[test]
    fn gamma_nilpotent_zero_shift() {
        let gs = gamma_nilpotent(c(0.7, 0.0), &NilpotentPoly::zero(4)).unwrap();
        assert!((gs.series.coeff(0) - gamma(c(0.7, 0.0)).unwrap()).norm() < 1e-13);
        for k in 1..4 {
            assert!(gs.series.coeff(k).norm() < 1e-14);
        }
    }

    #[test]
    fn gamma_ratio_expansion_constants() {
        // Gamma(H+1)^5 / Gamma(5H+1) = 1 + 0 H - (5 pi^2/3) H^2 + 40 zeta(3) H^3
        let h = NilpotentPoly::eps(4);
        let num = gamma_nilpotent(c(1.0, 0.0), &h).unwrap().series.powi(5);
        let den = gamma_nilpotent(c(1.0, 0.0), &h.scale(c(5.0, 0.0))).unwrap().series;
        let r = num.mul(&den.inv().unwrap());
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert!((r.coeff(0) - c(1.0, 0.0)).norm() < 1e-13);
        assert!(r.coeff(1).norm() < 1e-10);
        assert!((r.coeff(2) - c(-5.0 * pi2 / 3.0, 0.0)).norm() < 1e-10);
        assert!((r.coeff(3) - c(40.0 * zeta(3), 0.0)).norm() < 1e-10);
    }

    #[test]
    fn qlog_limit_along_path() {
        // evaluation at 2 (argument of the shifted q-log), i.e. Q = -2
        let path = ConfluencePath::new(c((-1.0f64).exp(), 0.0), vec![1e-1, 1e-2, 1e-3]).unwrap();
        let ctx = EvalContext::real(0.5).unwrap();
        let trace = limit_qlog(c(-2.0, 0.0), &path, &ctx).unwrap();
        assert!((trace.expected - c(2.0f64.ln(), 0.0)).norm() < 1e-15);
        assert!(trace.deviations.windows(2).all(|w| w[1] < w[0]), "{:?}", trace.deviations);
        assert!(*trace.deviations.last().unwrap() < 1e-2);
    }

    #[test]
    fn qlog_spiral_rejected() {
        let path = ConfluencePath::new(c((-1.0f64).exp(), 0.0), vec![1e-1]).unwrap();
        let ctx = EvalContext::real(0.5).unwrap();
        assert!(limit_qlog(c(2.0, 0.0), &path, &ctx).is_err());
    }

    #[test]
    fn qchar_limit_along_path() {
        let path = ConfluencePath::new(c((-1.0f64).exp(), 0.0), vec![1e-1, 1e-2, 1e-3]).unwrap();
        let ctx = EvalContext::real(0.5).unwrap();
        // mu = 0: identity character, limit 1
        let t0 = limit_qchar(c(-2.0, 0.0), c(0.0, 0.0), &path, &ctx).unwrap();
        for (_, v) in &t0.samples {
            assert!((v - c(1.0, 0.0)).norm() < 1e-12);
        }
        // mu = 1 at argument 2: lambda = q makes the character exactly the
        // identity function, so every deviation sits at machine noise
        let t1 = limit_qchar(c(-2.0, 0.0), c(1.0, 0.0), &path, &ctx).unwrap();
        assert!((t1.expected - c(2.0, 0.0)).norm() < 1e-15);
        for d in &t1.deviations {
            assert!(*d < 1e-12);
        }
        // mu = 1/5 at a complex argument; the bilateral theta sum loses
        // exp(-arg^2/2w) of relative accuracy to cancellation, so complex
        // arguments use moderate t (the biased path below)
        let path_mod = ConfluencePath::new(c((-1.0f64).exp(), 0.0), vec![0.5, 0.25, 0.1]).unwrap();
        let q_arg = c(0.7, 0.0) * c((std::f64::consts::PI / 3.0).cos(), (std::f64::consts::PI / 3.0).sin());
        let t2 = limit_qchar(-q_arg, c(0.2, 0.0), &path_mod, &ctx).unwrap();
        let expected = crate::context::cpowc(q_arg, c(0.2, 0.0));
        assert!((t2.expected - expected).norm() < 1e-13);
        assert!(t2.deviations.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn q_gamma_approaches_gamma() {
        let ctx = EvalContext::new(c(1.0 - 1e-4, 0.0), 53, 1e-12).unwrap();
        for &x in &[0.3, 1.7, 2.5] {
            let gq = q_gamma(c(x, 0.0), &ctx).unwrap();
            let g = gamma(c(x, 0.0)).unwrap();
            assert!((gq - g).norm() < 0.01, "x = {x}: {gq} vs {g}");
        }
    }

    #[test]
    fn classical_period_identity_on_boundary() {
        // the two series share only the boundary circle |Q| = 1; check
        // there (away from the singular point Q = 1), upper half plane
        let q62 = C64::new(0.0, std::f64::consts::PI / 3.0).exp();
        let (lhs, rhs) = classical_period_check(q62, 20_000).unwrap();
        let (l0, r0) = (lhs.coeff(0), rhs.coeff(0));
        assert!(
            (l0 - r0).norm() < 1e-7 * l0.norm().max(r0.norm()),
            "scalar component: {l0} vs {r0}"
        );
        for b in 1..4 {
            let (l, r) = (lhs.coeff(b), rhs.coeff(b));
            assert!(
                (l - r).norm() < 1e-5 * l.norm().max(r.norm()),
                "component {b}: {l} vs {r}"
            );
        }
    }

    #[test]
    fn classical_period_rejects_out_of_region() {
        assert!(matches!(
            classical_period_lhs(c(4000.0, 0.0), 100),
            Err(Error::SeriesDivergent(_))
        ));
        assert!(matches!(
            classical_period_rhs(c(0.5, 0.0), 100),
            Err(Error::SeriesDivergent(_))
        ));
    }

    #[test]
    fn qgamma_rewrite_matches_direct_form() {
        let ctx = EvalContext::real(0.5).unwrap();
        let (_, _, worst) = qgamma_rewrite_check(c(0.2, 0.0), &ctx).unwrap();
        assert!(worst < 1e-8, "componentwise residual {worst:.3e}");
    }

    #[test]
    fn qgamma_form_scalar_part_reduces_to_transformation() {
        // eps^0 (= H^0) component at P = 1 equals the scalar series value
        let ctx = EvalContext::real(0.5).unwrap();
        let q_arg = c(0.45, 0.0);
        let v = qgamma_form_rhs(q_arg, &ctx).unwrap();
        let scalar = crate::connection::fuchsian_scalar_series(q_arg, &ctx, 500)
            .unwrap()
            .value;
        assert!(
            (v.coeff(0) - scalar).norm() < 1e-8 * scalar.norm(),
            "{} vs {}",
            v.coeff(0),
            scalar
        );
    }

    #[test]
    fn classical_limit_trace_decreases() {
        // Q = 2i balances the theta arguments Q and -Q (both at arg pi/2),
        // keeping the bilateral sums accurate down to moderate t
        let path = ConfluencePath::new(c((-1.0f64).exp(), 0.0), vec![0.4, 0.2, 0.1]).unwrap();
        let q_f = c(0.0, 2.0);
        let trace = classical_limit_trace(q_f, &path, 1e-12, 40_000).unwrap();
        assert!(trace.windows(2).all(|w| w[1].1 < w[0].1), "{trace:?}");
        assert!(trace.last().unwrap().1 < 0.2, "{trace:?}");
    }
}
