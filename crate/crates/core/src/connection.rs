//! Pointwise evaluation of the analytic continuation relating solutions
//! at Q = 0 and Q = infinity, and the fuchsian connection matrix.
//!
//! Both sides of the continuation identity are nilpotent-algebra values:
//! the Q = 0 side is the series sum_d [prod_i (P a_i;q)_d/(Pq;q)_d^n] Q^d,
//! the infinity side a sum over solutions e^{-1}-prefixed W_j with
//! Pochhammer-quotient coefficients, each P-dependent infinite product
//! expanded in eps = 1 - P. Identity checks evaluate at concrete complex
//! Q (pointwise); series-level checks live in the solver residuals.
//!
//! The W-series sum_d f_d Q^{-d} has a finite convergence radius when
//! m = n (term ratio -> a_j^{m-n} q^m / (prod a_i Q)); evaluation points
//! inside it are reached by summing in a convergent region Q q^{-L} and
//! descending with the conjugated difference-equation recurrence.

use num_complex::Complex64 as C64;

use crate::algebra::NilpotentPoly;
use crate::context::{binomial_scalar_power, EvalContext, Rat};
use crate::error::{Error, Result};
use crate::qspecial::{
    q_hyper, qpoch_inf, qpoch_inf_nil, theta_sum, QHyperValue,
};
use crate::solver::{check_nonresonant, kgroup_series, K_MAX_DEFAULT};

/// Relative band around the q-power lattice treated as a pole.
const LATTICE_BAND: f64 = 1e-9;

/// A two-sided evaluation of the continuation identity at one point.
#[derive(Debug, Clone)]
pub struct ConnectionEvaluation {
    pub q_point: C64,
    pub lhs: NilpotentPoly,
    pub rhs: NilpotentPoly,
    /// max componentwise relative difference
    pub residual: f64,
}

/// The 4x4 fuchsian connection matrix at a sample point, with the
/// recorded expansion coefficients that build it.
#[derive(Debug, Clone)]
pub struct ConnectionMatrix {
    /// `entries[b][k-1]`: coefficient of the (e^{-1}-prefixed W_k)-solution
    /// in the eps^b component X_b.
    pub entries: Vec<Vec<C64>>,
    pub cap_f: [C64; 3],
    /// `cap_g[k-1]`: the three expansion coefficients for column k.
    pub cap_g: Vec<[C64; 3]>,
    /// `elliptic_units[k-1]`: theta(-q^{k/5}Q)/theta(-Q) * e^{-1}_{q,q^{k/5}}(1/Q),
    /// the sigma_q-invariant prefactor accompanying column k.
    pub elliptic_units: Vec<C64>,
}

fn componentwise_residual(lhs: &NilpotentPoly, rhs: &NilpotentPoly) -> f64 {
    let n = lhs.order().min(rhs.order());
    let mut worst = 0.0f64;
    for b in 0..n {
        let (l, r) = (lhs.coeff(b), rhs.coeff(b));
        let scale = l.norm().max(r.norm());
        if scale < 1e-250 {
            continue;
        }
        worst = worst.max((l - r).norm() / scale);
    }
    worst
}

/// (a;q)_inf with a pole guard: errors if a factor comes within the
/// lattice band of zero.
fn qpoch_inf_checked(a: C64, ctx: &EvalContext) -> Result<C64> {
    let mut acc = C64::new(1.0, 0.0);
    let mut aq = a;
    let cutoff = ctx.tol * 1e-2;
    while aq.norm() >= cutoff {
        let f = C64::new(1.0, 0.0) - aq;
        if f.norm() < LATTICE_BAND * aq.norm().max(1.0) {
            return Err(Error::PoleAtLattice);
        }
        acc *= f;
        aq *= ctx.q;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// W-series evaluation with equation-ladder continuation.
// ---------------------------------------------------------------------------

/// Per-step term ratio t_{d+1}/t_d of S_j(Q) = sum f_d Q^{-d} at Q,
/// with numerator and denominator factors paired to stay O(1).
fn w_term_ratio(d: usize, j: usize, alphas: &[C64], n: u32, q_arg: C64, ctx: &EvalContext) -> Result<C64> {
    let m = alphas.len();
    let aj = alphas[j];
    let q_minus_d = ctx.q_powf(-(d as f64));
    let num_factor = C64::new(1.0, 0.0) - aj.finv() * q_minus_d;
    let den_base = q_minus_d / ctx.q;
    let mut ratio = C64::new(1.0, 0.0);
    for l in 0..(n as usize).max(m) {
        let num = if l < n as usize { num_factor } else { C64::new(1.0, 0.0) };
        let den = if l < m {
            let f = C64::new(1.0, 0.0) - (alphas[l] / aj) * den_base;
            if f.norm() < 1e-12 * ((alphas[l] / aj) * den_base).norm().max(1.0) {
                return Err(Error::ResonantAlphas);
            }
            f
        } else {
            C64::new(1.0, 0.0)
        };
        ratio *= num / den;
    }
    Ok(ratio / q_arg)
}

/// Limit of |t_{d+1}/t_d| as d grows: |a_j^{m-n} q^m / (prod a_i * Q)|;
/// zero when m > n (super-geometric decay).
fn w_ratio_limit(j: usize, alphas: &[C64], n: u32, q_arg: C64, ctx: &EvalContext) -> f64 {
    let m = alphas.len();
    if m > n as usize {
        return 0.0;
    }
    let prod: C64 = alphas.iter().copied().fold(C64::new(1.0, 0.0), |acc, b| acc * b);
    let aj_pow = alphas[j].powi(m as i32 - n as i32);
    (aj_pow / (prod * q_arg)).norm() * ctx.q.norm().powi(m as i32)
}

/// Direct sum of S_j(Q) = sum_d f_d Q^{-d}; requires the ratio test to pass.
fn w_series_direct(j: usize, alphas: &[C64], n: u32, q_arg: C64, ctx: &EvalContext) -> Result<C64> {
    let mut sum = C64::new(0.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    let mut max_term = 0.0f64;
    let mut grow_streak = 0usize;
    for d in 0..100_000usize {
        sum += term;
        max_term = max_term.max(term.norm());
        let ratio = w_term_ratio(d, j, alphas, n, q_arg, ctx)?;
        let next = term * ratio;
        if next.norm() > term.norm() && term.norm() > 0.0 {
            grow_streak += 1;
            if grow_streak > 60 && next.norm() > max_term {
                return Err(Error::SeriesDivergent(ratio.norm()));
            }
        } else {
            grow_streak = 0;
        }
        term = next;
        if term.norm() < ctx.tol * sum.norm().max(max_term).max(1e-300) && d > 4 {
            sum += term;
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence { terms: 100_000, last: term.norm() })
}

/// Coefficients A_i(Q') of the recurrence sum_i A_i(Q') S(q^i Q') = 0
/// satisfied by the e-stripped solution S_j: the conjugated operator
/// (1 - a_j^{-1} sigma)^n - Q' prod_i (1 - (a_i/a_j) sigma).
fn ladder_coeffs(j: usize, alphas: &[C64], n: u32, q_prime: C64) -> Vec<C64> {
    let m = alphas.len();
    let deg = (n as usize).max(m);
    let mut a = vec![C64::new(0.0, 0.0); deg + 1];
    // (1 - a_j^{-1} x)^n
    let mut c = C64::new(1.0, 0.0);
    let aj_inv = alphas[j].finv();
    for i in 0..=n as usize {
        a[i] += c;
        c = c * (-aj_inv) * C64::new((n as usize - i) as f64, 0.0) / C64::new(i as f64 + 1.0, 0.0);
    }
    // - Q' * prod (1 - (a_i/a_j) x)
    let mut poly = vec![C64::new(1.0, 0.0)];
    for &ai in alphas {
        let r = ai / alphas[j];
        let mut next = vec![C64::new(0.0, 0.0); poly.len() + 1];
        for (k, &pk) in poly.iter().enumerate() {
            next[k] += pk;
            next[k + 1] -= pk * r;
        }
        poly = next;
    }
    for (k, &pk) in poly.iter().enumerate() {
        a[k] -= q_prime * pk;
    }
    a
}

/// S_j(Q) with automatic continuation: if the term ratio at Q is too
/// close to (or beyond) 1, sum at Q q^{-L} instead and descend with the
/// defining recurrence.
pub fn w_series_value(j: usize, alphas: &[C64], n: u32, q_arg: C64, ctx: &EvalContext) -> Result<C64> {
    if q_arg.norm() == 0.0 {
        return Err(Error::InvalidInput("W-series point must be nonzero".into()));
    }
    let m = alphas.len();
    let rho = w_ratio_limit(j, alphas, n, q_arg, ctx);
    if rho <= 0.7 {
        return w_series_direct(j, alphas, n, q_arg, ctx);
    }
    // ladder: initial window of m points must all converge comfortably
    let qn = ctx.q.norm();
    let target = 0.6 * qn.powi(m as i32 - 1);
    let mut ell = ((rho / target).ln() / (1.0 / qn).ln()).ceil() as i64;
    if ell < m as i64 {
        ell = m as i64;
    }
    'attempt: for bump in 0..4 {
        let ell = ell + bump;
        let top = q_arg * ctx.q_powf(-(ell as f64));
        let mut window: Vec<C64> = Vec::with_capacity(m);
        for i in 0..m {
            let point = top * ctx.q_powf(i as f64);
            window.push(w_series_direct(j, alphas, n, point, ctx)?);
        }
        // descend: S(q^m Q') from the window at Q' = top*q^r
        for r in 0..=(ell - m as i64) {
            let q_prime = top * ctx.q_powf(r as f64);
            let coeffs = ladder_coeffs(j, alphas, n, q_prime);
            let deg = coeffs.len() - 1;
            let lead = coeffs[deg];
            let scale: f64 = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if lead.norm() < 1e-10 * scale.max(1e-300) {
                continue 'attempt; // degenerate leading coefficient; shift the ladder
            }
            let mut rhs = C64::new(0.0, 0.0);
            for (i, &ai) in coeffs.iter().take(deg).enumerate() {
                rhs += ai * window[i];
            }
            let next = -rhs / lead;
            window.remove(0);
            window.push(next);
        }
        return Ok(window[m - 1]);
    }
    Err(Error::PoleAtLattice)
}

// ---------------------------------------------------------------------------
// The two sides of the continuation identity.
// ---------------------------------------------------------------------------

/// eps-expansion of P^{l_q(Q)} = sum_a (-1)^a C(l_q(Q), a) eps^a.
pub fn p_to_qlog_expansion(q_arg: C64, order: usize, ctx: &EvalContext) -> Result<NilpotentPoly> {
    let l = crate::qspecial::q_log(q_arg, ctx)?;
    let mut v = vec![C64::new(0.0, 0.0); order];
    for (a, slot) in v.iter_mut().enumerate() {
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        *slot = binomial_scalar_power(l, a) * sign;
    }
    Ok(NilpotentPoly::new(v))
}

/// Q = 0 side: P^{l_q(Q)} sum_d [prod_i (P a_i;q)_d / (Pq;q)_d^n] Q^d,
/// summed until the componentwise tail is below tolerance.
pub fn mbw_lhs(alphas: &[C64], n: usize, q_arg: C64, n_cap: usize, ctx: &EvalContext) -> Result<NilpotentPoly> {
    if q_arg.norm() >= 1.0 {
        return Err(Error::InvalidInput("the series side needs |Q| < 1".into()));
    }
    let ks = kgroup_series(alphas, n, n_cap, ctx)?;
    let mut sum = NilpotentPoly::zero(n);
    let mut qd = C64::new(1.0, 0.0);
    let mut max_mag = 0.0f64;
    let mut tail_ok = false;
    for (d, cd) in ks.coeffs.iter().enumerate() {
        let term = cd.scale(qd);
        sum = sum.add(&term);
        max_mag = max_mag.max(term.max_norm());
        qd *= q_arg;
        let tail_est = ks.coeffs[d].max_norm() * qd.norm() / (1.0 - q_arg.norm());
        if d > 4 && tail_est < ctx.tol * sum.max_norm().max(max_mag) {
            tail_ok = true;
            break;
        }
    }
    if !tail_ok {
        let tail = ks.coeffs.last().unwrap().max_norm() * qd.norm() / (1.0 - q_arg.norm());
        return Err(Error::TailTooLarge { terms: n_cap, tail });
    }
    let pl = p_to_qlog_expansion(q_arg, n, ctx)?;
    Ok(pl.mul(&sum))
}

/// Infinity side of the continuation identity.
pub fn mbw_rhs(alphas: &[C64], n: usize, q_arg: C64, _n_cap: usize, ctx: &EvalContext) -> Result<NilpotentPoly> {
    let m = alphas.len();
    if m < n {
        return Err(Error::InvalidInput(format!("need m >= n, got m = {m} < n = {n}")));
    }
    if q_arg.norm() == 0.0 {
        return Err(Error::InvalidInput("Q must be nonzero".into()));
    }
    if !check_nonresonant(alphas, ctx, K_MAX_DEFAULT) {
        return Err(Error::ResonantAlphas);
    }
    for (i, &a) in alphas.iter().enumerate() {
        for &b in alphas.iter().skip(i + 1) {
            if (a / b - C64::new(1.0, 0.0)).norm() < 1e-9 {
                return Err(Error::ResonantAlphas);
            }
        }
    }
    let one = C64::new(1.0, 0.0);
    let p = NilpotentPoly::p(n);
    let p_inv = NilpotentPoly::p_inv(n);

    // prod_i (P a_i;q)_inf / (Pq;q)_inf^n
    let mut head = NilpotentPoly::one(n);
    for &a in alphas {
        head = head.mul(&qpoch_inf_nil(&p.scale(a), ctx));
    }
    let den = qpoch_inf_nil(&p.scale(ctx.q), ctx);
    head = head.mul(&den.inv()?.powi(n as u32));

    // scalar invariants
    let qq = qpoch_inf(ctx.q, ctx);
    let poch_q_big = qpoch_inf_checked(q_arg, ctx)?; // (Q;q)_inf
    let poch_q_inv = qpoch_inf_checked(ctx.q / q_arg, ctx)?; // (q/Q;q)_inf

    let mut total = NilpotentPoly::zero(n);
    for j in 0..m {
        let aj = alphas[j];
        // nilpotent theta-quotient block
        let num1 = qpoch_inf_nil(&p.scale(aj * q_arg), ctx);
        let num2 = qpoch_inf_nil(&p_inv.scale(ctx.q / (aj * q_arg)), ctx);
        let den1 = qpoch_inf_nil(&p.scale(aj), ctx);
        let den2 = qpoch_inf_nil(&p_inv.scale(ctx.q / aj), ctx);
        let mut block = num1.mul(&num2).scale(qq * qq);
        block = block.mul(&den1.mul(&den2).inv()?);
        let block = block.scale(one / (poch_q_big * poch_q_inv));

        // scalar coefficient (a_j^{-1} q;q)_inf^n / (prod_{i!=j} (a_i/a_j;q)_inf (q;q)_inf)
        let mut cj = qpoch_inf_checked(ctx.q / aj, ctx)?.powi(n as i32);
        for (i, &ai) in alphas.iter().enumerate() {
            if i != j {
                cj /= qpoch_inf_checked(ai / aj, ctx)?;
            }
        }
        cj /= qq;

        let sj = w_series_value(j, alphas, n as u32, q_arg, ctx)?;
        total = total.add(&block.scale(cj * sj));
    }
    let pl = p_to_qlog_expansion(q_arg, n, ctx)?;
    Ok(pl.mul(&head).mul(&total))
}

/// Evaluate both sides at one point and record the residual.
pub fn connection_evaluate(
    alphas: &[C64],
    n: usize,
    q_arg: C64,
    n_cap: usize,
    ctx: &EvalContext,
) -> Result<ConnectionEvaluation> {
    let lhs = mbw_lhs(alphas, n, q_arg, n_cap, ctx)?;
    let rhs = mbw_rhs(alphas, n, q_arg, n_cap, ctx)?;
    let residual = componentwise_residual(&lhs, &rhs);
    Ok(ConnectionEvaluation { q_point: q_arg, lhs, rhs, residual })
}

// ---------------------------------------------------------------------------
// Helper sums and the expansion coefficients of the Pochhammer quotients.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelperKind {
    F1,
    F2,
    F3,
    G1,
    G2,
    G3,
}

/// The six convergent helper sums. The doubly/triply indexed sums are
/// reduced to power sums p_r of u_k = x q^k/(1 - x q^k) (and of the
/// companion sequence for the g's) and converted through
/// e_2 = (p_1^2 - p_2)/2, e_3 = (p_1^3 - 3 p_1 p_2 + 2 p_3)/6; the
/// direct nested sums remain as test oracles only.
pub fn helper_sums(x: C64, ctx: &EvalContext, which: HelperKind) -> Result<C64> {
    match which {
        HelperKind::F1 | HelperKind::F2 | HelperKind::F3 => {
            let (p1, p2, p3) = f_power_sums(x, ctx)?;
            Ok(match which {
                HelperKind::F1 => p1,
                HelperKind::F2 => (p1 * p1 - p2) / 2.0,
                HelperKind::F3 => (p1 * p1 * p1 - p1 * p2 * 3.0 + p3 * 2.0) / 6.0,
                _ => unreachable!(),
            })
        }
        HelperKind::G1 | HelperKind::G2 | HelperKind::G3 => {
            let s = g_power_sums(x, ctx)?;
            Ok(match which {
                HelperKind::G1 => s.a1,
                HelperKind::G2 => (s.a1 * s.a1 - s.a2) / 2.0 - s.c1,
                HelperKind::G3 => {
                    (s.a1 * s.a1 * s.a1 - s.a1 * s.a2 * 3.0 + s.a3 * 2.0) / 6.0
                        - (s.a1 * s.c1 - s.ac)
                        - s.c1
                }
                _ => unreachable!(),
            })
        }
    }
}

fn f_power_sums(x: C64, ctx: &EvalContext) -> Result<(C64, C64, C64)> {
    let one = C64::new(1.0, 0.0);
    let (mut p1, mut p2, mut p3) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let mut xq = x;
    let cutoff = ctx.tol * 1e-2;
    let mut k = 0usize;
    while xq.norm() >= cutoff {
        let d = one - xq;
        if d.norm() < LATTICE_BAND * xq.norm().max(1.0) {
            return Err(Error::PoleInSum(k));
        }
        let u = xq / d;
        p1 += u;
        p2 += u * u;
        p3 += u * u * u;
        xq *= ctx.q;
        k += 1;
    }
    Ok((p1, p2, p3))
}

struct GPowerSums {
    a1: C64,
    a2: C64,
    a3: C64,
    c1: C64,
    /// sum_d a_d c_d
    ac: C64,
}

fn g_power_sums(x: C64, ctx: &EvalContext) -> Result<GPowerSums> {
    let one = C64::new(1.0, 0.0);
    let mut s = GPowerSums {
        a1: C64::new(0.0, 0.0),
        a2: C64::new(0.0, 0.0),
        a3: C64::new(0.0, 0.0),
        c1: C64::new(0.0, 0.0),
        ac: C64::new(0.0, 0.0),
    };
    let pre = one - ctx.q / (x * x); // (1 - q x^{-2})
    let mut qd = C64::new(1.0, 0.0);
    let cutoff = ctx.tol * 1e-2;
    let mut d = 0usize;
    loop {
        let xqd = x * qd;
        let yqd = ctx.q * qd / x; // q^{d+1} x^{-1}
        if xqd.norm() < cutoff && yqd.norm() < cutoff {
            break;
        }
        let f1 = one - xqd;
        let f2 = one - yqd;
        if f1.norm() < LATTICE_BAND * xqd.norm().max(1.0) || f2.norm() < LATTICE_BAND * yqd.norm().max(1.0) {
            return Err(Error::PoleInSum(d));
        }
        let den = f1 * f2;
        let a = xqd * pre / den;
        let c = yqd / den;
        s.a1 += a;
        s.a2 += a * a;
        s.a3 += a * a * a;
        s.c1 += c;
        s.ac += a * c;
        qd *= ctx.q;
        d += 1;
        if d > crate::context::MAX_TERMS {
            return Err(Error::NonConvergence { terms: d, last: a.norm() });
        }
    }
    Ok(s)
}

/// Truncated expansion 1 + f_1 eps + f_2 eps^2 + f_3 eps^3 of
/// (Px;q)_inf / (x;q)_inf in C[eps]/(eps^4).
fn f_factor_expansion(x: C64, ctx: &EvalContext) -> Result<NilpotentPoly> {
    let (p1, p2, p3) = f_power_sums(x, ctx)?;
    let f1 = p1;
    let f2 = (p1 * p1 - p2) / 2.0;
    let f3 = (p1 * p1 * p1 - p1 * p2 * 3.0 + p3 * 2.0) / 6.0;
    Ok(NilpotentPoly::new(vec![C64::new(1.0, 0.0), f1, f2, f3]))
}

/// Truncated expansion 1 + g_1 eps + g_2 eps^2 + g_3 eps^3 of
/// (Px;q)_inf (P^{-1} x^{-1} q;q)_inf normalized by its P = 1 value.
fn g_factor_expansion(x: C64, ctx: &EvalContext) -> Result<NilpotentPoly> {
    let g1 = helper_sums(x, ctx, HelperKind::G1)?;
    let g2 = helper_sums(x, ctx, HelperKind::G2)?;
    let g3 = helper_sums(x, ctx, HelperKind::G3)?;
    Ok(NilpotentPoly::new(vec![C64::new(1.0, 0.0), g1, g2, g3]))
}

/// Expansion coefficients of prod_i (P a_i;q)_inf / (Pq;q)_inf^n
/// normalized by its P = 1 value, with n = alphas.len(): the
/// coefficients of eps, eps^2, eps^3 obtained by truncated-algebra
/// division of the per-factor helper-sum expansions.
pub fn cap_f(alphas: &[C64], ctx: &EvalContext) -> Result<[C64; 3]> {
    let mut num = NilpotentPoly::one(4);
    for &a in alphas {
        num = num.mul(&f_factor_expansion(a, ctx)?);
    }
    let den = f_factor_expansion(ctx.q, ctx)?.powi(alphas.len() as u32);
    let r = num.mul(&den.inv()?);
    Ok([r.coeff(1), r.coeff(2), r.coeff(3)])
}

/// Expansion coefficients of
/// (P q^{k/5} Q, P^{-1} Q^{-1} q^{1-k/5};q)_inf / (P q^{k/5}, P^{-1} q^{1-k/5};q)_inf
/// normalized by its P = 1 value: the ratio of the two g-expansions at
/// x = q^{k/5} Q and x = q^{k/5}.
pub fn cap_g(k_over_5: Rat, q_arg: C64, ctx: &EvalContext) -> Result<[C64; 3]> {
    let x = ctx.q_pow(k_over_5);
    let num = g_factor_expansion(x * q_arg, ctx)?;
    let den = g_factor_expansion(x, ctx)?;
    let r = num.mul(&den.inv()?);
    Ok([r.coeff(1), r.coeff(2), r.coeff(3)])
}

/// The fuchsian connection matrix at a sample point: entries
/// `M[b][k-1]` = prefactor_k * poly_b(cap F, cap G_k) with
/// poly = [1, G1+F1, G2+F2+G1 F1, G3+F3+G2 F1 + G1 F2].
pub fn connection_matrix_fuchsian(q_arg: C64, ctx: &EvalContext, _n_cap: usize) -> Result<ConnectionMatrix> {
    let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
    let ff = cap_f(&alphas, ctx)?;
    let qq = qpoch_inf(ctx.q, ctx);
    let theta_min_q = theta_sum(-q_arg, ctx)?;
    if theta_min_q.value.norm() <= 1e-12 * theta_min_q.max_term {
        return Err(Error::PoleAtThetaZero);
    }
    let mut entries = vec![vec![C64::new(0.0, 0.0); 4]; 4];
    let mut cap_gs = Vec::with_capacity(4);
    let mut units = Vec::with_capacity(4);
    for k in 1..=4i64 {
        let ak = ctx.q_pow(Rat::new(k, 5));
        let gg = cap_g(Rat::new(k, 5), q_arg, ctx)?;
        // scalar prefactor: Pochhammer block times theta quotient
        let mut pref = C64::new(1.0, 0.0);
        for i in 1..=4i64 {
            if i != k {
                pref *= qpoch_inf_checked(ctx.q_pow(Rat::new(i, 5)), ctx)?;
                pref /= qpoch_inf_checked(ctx.q_pow(Rat::new(i - k, 5)), ctx)?;
            }
        }
        let poch_one_minus = qpoch_inf_checked(ctx.q_pow(Rat::new(5 - k, 5)) , ctx)?;
        pref *= poch_one_minus.powi(3);
        pref /= qq.powi(3);
        let theta_num = theta_sum(-ak * q_arg, ctx)?;
        pref *= theta_num.value / theta_min_q.value;

        let polys = [
            C64::new(1.0, 0.0),
            gg[0] + ff[0],
            gg[1] + ff[1] + gg[0] * ff[0],
            gg[2] + ff[2] + gg[1] * ff[0] + gg[0] * ff[1],
        ];
        for (b, pb) in polys.iter().enumerate() {
            entries[b][(k - 1) as usize] = pref * pb;
        }
        // sigma_q-invariant elliptic unit: theta quotient times e^{-1}_{q,q^{k/5}}(1/Q)
        let e_inv = crate::qspecial::q_char_inv(ak, q_arg.finv(), ctx)?;
        units.push(theta_num.value / theta_min_q.value * e_inv);
        cap_gs.push(gg);
    }
    Ok(ConnectionMatrix { entries, cap_f: ff, cap_g: cap_gs, elliptic_units: units })
}

// ---------------------------------------------------------------------------
// Cross-check identities.
// ---------------------------------------------------------------------------

/// Stable log(sin z): the dominant exponential is factored out so |Im z|
/// up to thousands stays finite.
fn log_sin(z: C64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let half_log = C64::new(0.5f64.ln(), 0.0);
    if z.im >= 0.0 {
        // sin z = -e^{-iz}(1 - e^{2iz})/(2i) = (i/2) e^{-iz} (1 - e^{2iz})
        let rest = (C64::new(1.0, 0.0) - (i * z * 2.0).exp()).ln();
        -i * z + rest + half_log + i * std::f64::consts::FRAC_PI_2
    } else {
        let rest = (C64::new(1.0, 0.0) - (-i * z * 2.0).exp()).ln();
        i * z + rest + half_log - i * std::f64::consts::FRAC_PI_2
    }
}

/// Two-sided evaluation of the cosecant bilateral sum identity
///
///   sum_m csc(alpha pi - 2 m pi^2 i / w) exp{2 m pi i log(-Q)/w} (-Q)^{-alpha}
///     = w (q, q, aQ, q/(aQ);q)_inf / (pi (a, q/a, Q, q/Q;q)_inf),
///
/// with q = e^{-w}, a = q^alpha, alpha real, truncated at |m| <= m_cap.
pub fn csc_sum_check(alpha: f64, q_arg: C64, ctx: &EvalContext, m_cap: usize) -> Result<(C64, C64)> {
    if ctx.q.im != 0.0 || ctx.q.re <= 0.0 {
        return Err(Error::InvalidInput("the cosecant sum needs real q in (0,1)".into()));
    }
    let w = -ctx.q.re.ln();
    let minus_q = -q_arg;
    if minus_q.im == 0.0 && minus_q.re <= 0.0 {
        return Err(Error::InvalidInput("need |arg(-Q)| < pi: -Q off the negative real axis".into()));
    }
    let log_mq = minus_q.ln();
    let pi = std::f64::consts::PI;
    let i = C64::new(0.0, 1.0);
    let mut lhs = C64::new(0.0, 0.0);
    for m in -(m_cap as i64)..=(m_cap as i64) {
        let mm = m as f64;
        let sin_arg = C64::new(alpha * pi, 0.0) - i * (2.0 * mm * pi * pi / w);
        let log_term =
            i * (2.0 * mm * pi / w) * log_mq - log_sin(sin_arg) - log_mq * alpha;
        lhs += log_term.exp();
    }
    let a = ctx.q_powf(alpha);
    let qq = qpoch_inf(ctx.q, ctx);
    let num = qq * qq * qpoch_inf_checked(a * q_arg, ctx)? * qpoch_inf_checked(ctx.q / (a * q_arg), ctx)?;
    let den = qpoch_inf_checked(a, ctx)?
        * qpoch_inf_checked(ctx.q / a, ctx)?
        * qpoch_inf_checked(q_arg, ctx)?
        * qpoch_inf_checked(ctx.q / q_arg, ctx)?;
    let rhs = num / den * (w / pi);
    Ok((lhs, rhs))
}

/// Two-sided evaluation of the four-term transformation of
/// 4phi3(a; b; q; z): lhs the direct partial sum, rhs the sum of the
/// four expressions obtained by interchanging a_1 with each a_k.
pub fn phi43_transform_check(
    a: [C64; 4],
    b: [C64; 3],
    z: C64,
    ctx: &EvalContext,
    n_terms: usize,
) -> Result<(C64, C64)> {
    if z.norm() >= 1.0 {
        return Err(Error::SeriesDivergent(z.norm()));
    }
    let lhs = q_hyper(&a, &b, ctx, z, n_terms)?.value;
    let mut rhs = C64::new(0.0, 0.0);
    for k in 0..4 {
        let mut aa = a;
        aa.swap(0, k);
        rhs += phi43_single_term(aa, b, z, ctx, n_terms)?;
    }
    Ok((lhs, rhs))
}

fn phi43_single_term(a: [C64; 4], b: [C64; 3], z: C64, ctx: &EvalContext, n_terms: usize) -> Result<C64> {
    let one = C64::new(1.0, 0.0);
    let a1 = a[0];
    let z2 = ctx.q * b[0] * b[1] * b[2] / (z * a[0] * a[1] * a[2] * a[3]);
    if z2.norm() >= 1.0 {
        return Err(Error::SeriesDivergent(z2.norm()));
    }
    let mut num = one;
    for &x in &[a[1], a[2], a[3], b[0] / a1, b[1] / a1, b[2] / a1, a1 * z, ctx.q / (a1 * z)] {
        num *= qpoch_inf(x, ctx);
    }
    let mut den = one;
    for &x in &[b[0], b[1], b[2], a[1] / a1, a[2] / a1, a[3] / a1, z, ctx.q / z] {
        let v = qpoch_inf(x, ctx);
        if v.norm() < 1e-250 {
            return Err(Error::DenominatorPochhammerZero(0));
        }
        den *= v;
    }
    let inner = q_hyper(
        &[a1, a1 * ctx.q / b[0], a1 * ctx.q / b[1], a1 * ctx.q / b[2]],
        &[a1 * ctx.q / a[1], a1 * ctx.q / a[2], a1 * ctx.q / a[3]],
        ctx,
        z2,
        n_terms,
    )?;
    Ok(num / den * inner.value)
}

/// Scalar part of the continuation identity: the lhs hypergeometric
/// series value, used by the checks that pin the series convention.
pub fn fuchsian_scalar_series(q_arg: C64, ctx: &EvalContext, n_terms: usize) -> Result<QHyperValue> {
    let a: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
    q_hyper(&a, &[ctx.q, ctx.q, ctx.q], ctx, q_arg, n_terms)
}
