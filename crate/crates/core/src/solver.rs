//! Series solutions of q-difference operators.
//!
//! Three routes, matching the singularity structure:
//!
//! - [`frobenius_solve`]: at a simple non-resonant characteristic root
//!   lambda, the ansatz (e-character) * sum f_k v^k leads to a linear
//!   recursion chi(lambda q^k) f_k = -(lower terms); f_0 = 1.
//! - [`adams_solve`]: a sloped Newton segment of slope -t/s is removed by
//!   the substitution z = v^{1/s} with a theta prefactor; the resulting
//!   operator is solved by the same recursion at the segment's character
//!   roots xi * mu with xi a root of unity.
//! - [`kgroup_series`]: at a multiple root (1-x)^n the scalar Frobenius
//!   method degenerates; the nilpotent-coefficient series
//!   sum_d [prod_i (P a_i;q)_d / (Pq;q)_d^n] Q^d over C\[eps\]/(eps^n),
//!   eps = 1 - P, carries all n solutions at once. Expanding P^{l_q(Q)}
//!   by the binomial series in eps assembles the logarithmic solutions.
//!
//! Products with q^{-k} factors are accumulated as term-to-term ratios
//! so intermediates stay bounded.

use num_complex::Complex64 as C64;
use num_integer::Integer;

use crate::algebra::{FracPowerSeries, NilpotentPoly};
use crate::context::{binomial_scalar_power, EvalContext, Rat};
use crate::error::{Error, Result};
use crate::operator::{CoeffPoly, QDiffOperator, SolutionObject};
use crate::qspecial::q_log;

/// Relative threshold for "the recursion denominator vanished".
const RESONANCE_REL: f64 = 1e-10;

/// Default lattice scan depth for the non-resonance check.
pub const K_MAX_DEFAULT: usize = 200;

/// The operator (1 - sigma)^n - Q prod_i (1 - a_i sigma) in the variable Q.
pub fn fmn_operator(alphas: &[C64], n: u32) -> QDiffOperator {
    let var = "Q";
    let beta = Rat::from_integer(1);
    let one = QDiffOperator::scalar(var, beta, C64::new(1.0, 0.0));
    let mut shift = QDiffOperator::new(var, beta);
    shift.add_term(1, CoeffPoly::constant(C64::new(1.0, 0.0)));
    let mut acc = one.sub(&shift).pow(n);
    let mut prod = {
        let mut q_mono = QDiffOperator::new(var, beta);
        q_mono.add_term(0, CoeffPoly::monomial(Rat::from_integer(1), Rat::from_integer(0), C64::new(1.0, 0.0)));
        q_mono
    };
    for &a in alphas {
        let mut f = QDiffOperator::new(var, beta);
        f.add_term(0, CoeffPoly::constant(C64::new(1.0, 0.0)));
        f.add_term(1, CoeffPoly::constant(-a));
        prod = prod.mul(&f);
    }
    acc = acc.sub(&prod);
    acc
}

/// The 25 exponents xi^l q^{k/5} (xi^5 = 1, k, l = 1..5) whose product
/// structure collapses to prod_{k<=5d}(1 - P^5 q^k): the nilpotent
/// series they generate is annihilated by the degree-25 operator.
pub fn quintic_exponents(ctx: &EvalContext) -> Vec<C64> {
    let mut alphas = Vec::with_capacity(25);
    for l in 1..=5i64 {
        let xi = C64::new(0.0, 2.0 * std::f64::consts::PI * l as f64 / 5.0).exp();
        for k in 1..=5i64 {
            alphas.push(xi * ctx.q_pow(Rat::new(k, 5)));
        }
    }
    alphas
}

/// The degree-25 operator annihilating the quintic K-group series:
/// (1 - sigma)^5 - Q prod_{k=1..5} (1 - q^k sigma^5).
pub fn quintic_operator() -> QDiffOperator {
    crate::operator::parse_operator(
        "(1 - S)^5 - Q*(1 - q^1*S^5)*(1 - q^2*S^5)*(1 - q^3*S^5)*(1 - q^4*S^5)*(1 - q^5*S^5)",
    )
    .expect("static operator text parses")
}

struct RecursionSetup {
    lattice: i64,
    /// groups[g] = (delta_g, terms (i, numeric coeff)); delta in lattice units,
    /// groups sorted by delta, groups[0].0 == 0 is the characteristic group.
    groups: Vec<(i64, Vec<(i64, C64)>)>,
}

fn recursion_setup(op: &QDiffOperator, ctx: &EvalContext) -> Result<RecursionSetup> {
    let mut j_min: Option<Rat> = None;
    let mut lattice: i64 = 1;
    for (_, p) in op.terms() {
        for (v, _, _) in p.monomials() {
            j_min = Some(match j_min {
                None => v,
                Some(m) => m.min(v),
            });
            lattice = lattice.lcm(v.denom());
        }
    }
    let j_min = j_min.ok_or_else(|| Error::InvalidInput("operator has no terms".into()))?;
    let mut grouped: std::collections::BTreeMap<i64, Vec<(i64, C64)>> = Default::default();
    for (i, p) in op.terms() {
        for (v, e, c) in p.monomials() {
            let delta = ((v - j_min) * Rat::from_integer(lattice)).to_integer();
            let a = c * ctx.q_pow(e);
            grouped.entry(delta).or_default().push((i as i64, a));
        }
    }
    Ok(RecursionSetup {
        lattice,
        groups: grouped.into_iter().collect(),
    })
}

fn eval_group(terms: &[(i64, C64)], y: C64) -> (C64, f64) {
    let mut acc = C64::new(0.0, 0.0);
    let mut scale = 0.0f64;
    for &(i, a) in terms {
        let mut yp = C64::new(1.0, 0.0);
        for _ in 0..i {
            yp *= y;
        }
        acc += a * yp;
        scale += (a * yp).norm();
    }
    (acc, scale)
}

/// Shared recursion core: coefficients of sum_k f_k v^{k/L} with f_0 = 1
/// for the character root `lambda`, where L is the operator's exponent
/// lattice. `check_simple` adds the simple-root (characteristic
/// derivative) test; `breakdown_as_resonance` selects the error kind.
fn power_series_solution(
    op: &QDiffOperator,
    lambda: C64,
    n_coeffs: usize,
    ctx: &EvalContext,
    check_simple: bool,
    breakdown_as_resonance: bool,
) -> Result<FracPowerSeries> {
    let setup = recursion_setup(op, ctx)?;
    let beta = op.shift_base();
    let lattice = setup.lattice;
    let (chi_delta, chi) = (&setup.groups[0].0, &setup.groups[0].1);
    debug_assert_eq!(*chi_delta, 0);

    // lambda must be a characteristic root
    let (chi_at_root, scale0) = eval_group(chi, lambda);
    if chi_at_root.norm() > 1e-8 * scale0.max(1e-300) {
        return Err(Error::InvalidInput(format!(
            "{lambda} is not a root of the characteristic group (|chi| = {:.3e}, scale {:.3e})",
            chi_at_root.norm(),
            scale0
        )));
    }
    if check_simple {
        // derivative of the characteristic group at the root
        let mut der = C64::new(0.0, 0.0);
        let mut scale = 0.0f64;
        for &(i, a) in chi {
            if i == 0 {
                continue;
            }
            let mut yp = C64::new(1.0, 0.0);
            for _ in 0..(i - 1) {
                yp *= lambda;
            }
            der += a * yp * i as f64;
            scale += (a * yp).norm() * i as f64;
        }
        if der.norm() <= 1e-8 * scale.max(1e-300) {
            return Err(Error::MultipleRoot);
        }
    }

    let total = n_coeffs
        .checked_mul(lattice as usize)
        .ok_or_else(|| Error::InvalidInput("truncation order too large".into()))?;
    let mut f = vec![C64::new(0.0, 0.0); total + 1];
    f[0] = C64::new(1.0, 0.0);
    for k in 1..=total {
        let mut rhs = C64::new(0.0, 0.0);
        for (delta, terms) in setup.groups.iter().skip(1) {
            let d = *delta as usize;
            if d > k {
                break;
            }
            let x = Rat::new(k as i64 - *delta, lattice);
            let y = lambda * ctx.q_pow(beta * x);
            let (val, _) = eval_group(terms, y);
            rhs += val * f[k - d];
        }
        let yk = lambda * ctx.q_pow(beta * Rat::new(k as i64, lattice));
        let (den, scale) = eval_group(chi, yk);
        if den.norm() <= RESONANCE_REL * scale.max(1e-300) {
            return Err(if breakdown_as_resonance {
                Error::ResonantRoot(k)
            } else {
                Error::RecursionBreakdown(k)
            });
        }
        f[k] = -rhs / den;
    }
    Ok(FracPowerSeries::new(Rat::from_integer(0), lattice, f))
}

/// Frobenius solution at a simple non-resonant characteristic root.
///
/// Returns the solution object (e-character with eigenvalue `root`,
/// series normalized to f_0 = 1) in the operator's own variable.
pub fn frobenius_solve(
    op: &QDiffOperator,
    root: C64,
    n_coeffs: usize,
    ctx: &EvalContext,
) -> Result<SolutionObject> {
    let conj = op.conjugate_by_character(root);
    let series = power_series_solution(&conj, C64::new(1.0, 0.0), n_coeffs, ctx, true, true)?;
    let at_infinity = op.variable() == "w" || op.variable().starts_with("inv_");
    Ok(SolutionObject::plain(op.variable(), series, at_infinity).with_character(root))
}

/// Exceptional solutions on a sloped Newton segment of slope -t/s.
///
/// Substitutes z = v^{1/s} (theta prefactor divided out), reads the
/// segment's character equation c_top x^{i_top} + c_bot x^{i_bot} = 0 at
/// z-order 0, and solves at the root xi * (-c_bot/c_top)^{1/(i_top-i_bot)}.
/// The returned object lives in the original variable: series exponents
/// k/s, theta prefactor descriptor (r=1, s, t), character = the root.
pub fn adams_solve(
    op: &QDiffOperator,
    s: i64,
    t: i64,
    xi: C64,
    n_coeffs: usize,
    ctx: &EvalContext,
) -> Result<SolutionObject> {
    let (zop, _unit) = op.adams_substitute(s, t);
    // character roots from the z-order-0 group
    let setup = recursion_setup(&zop, ctx)?;
    let chi = &setup.groups[0].1;
    let i_bot = chi.iter().map(|&(i, _)| i).min().unwrap();
    let i_top = chi.iter().map(|&(i, _)| i).max().unwrap();
    let delta = i_top - i_bot;
    if delta == 0 {
        return Err(Error::InvalidInput(
            "segment character group is a monomial; no exceptional roots".into(),
        ));
    }
    let c_bot: C64 = chi.iter().filter(|&&(i, _)| i == i_bot).map(|&(_, a)| a).sum();
    let c_top: C64 = chi.iter().filter(|&&(i, _)| i == i_top).map(|&(_, a)| a).sum();
    let mu = crate::context::cpow(-c_bot / c_top, 1.0 / delta as f64);
    let xi_check = {
        let mut p = C64::new(1.0, 0.0);
        for _ in 0..delta {
            p *= xi;
        }
        p
    };
    if (xi_check - C64::new(1.0, 0.0)).norm() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "xi must satisfy xi^{delta} = 1 for this segment"
        )));
    }
    let root = xi * mu;
    let conj = zop.conjugate_by_character(root);
    let series_z = match power_series_solution(&conj, C64::new(1.0, 0.0), n_coeffs, ctx, false, false) {
        Ok(s) => s,
        Err(Error::ResonantRoot(k)) => return Err(Error::RecursionBreakdown(k)),
        Err(e) => return Err(e),
    };
    // re-express in the original variable: z^k = v^{k/s}
    let series = FracPowerSeries::new(
        series_z.base_exponent() / Rat::from_integer(s),
        series_z.denom() * s,
        series_z.coeffs().to_vec(),
    );
    Ok(SolutionObject::plain(op.variable(), series, false)
        .with_character(root)
        .with_theta(1, s, t))
}

/// Number of exceptional characters on the sloped segment handled by
/// the substitution (s, t): the shift-power spread of the transformed
/// operator's lowest-order group.
pub fn adams_character_count(op: &QDiffOperator, s: i64, t: i64, ctx: &EvalContext) -> Result<usize> {
    let (zop, _) = op.adams_substitute(s, t);
    let setup = recursion_setup(&zop, ctx)?;
    let chi = &setup.groups[0].1;
    let i_bot = chi.iter().map(|&(i, _)| i).min().unwrap_or(0);
    let i_top = chi.iter().map(|&(i, _)| i).max().unwrap_or(0);
    Ok((i_top - i_bot) as usize)
}

/// Non-resonance scan: true iff no ratio a_i/a_j lies in q^{Z \ {0}} up
/// to `k_max`, within a 1e-9 relative band.
pub fn check_nonresonant(alphas: &[C64], ctx: &EvalContext, k_max: usize) -> bool {
    for (i, &a) in alphas.iter().enumerate() {
        for (j, &b) in alphas.iter().enumerate() {
            if i == j {
                continue;
            }
            let r = a / b;
            let mut qk = ctx.q;
            for _ in 1..=k_max {
                if (r - qk).norm() < 1e-9 * qk.norm().max(1.0) {
                    return false;
                }
                if (r * qk - C64::new(1.0, 0.0)).norm() < 1e-9 {
                    return false;
                }
                qk *= ctx.q;
            }
        }
    }
    true
}

/// Closed-form solution at infinity for the operator
/// (1 - sigma)^n - Q prod_{i<m} (1 - a_i sigma): the j-th solution is
/// e_{q,a_j}(1/Q) * sum_d f_d Q^{-d} with
///
///   f_d = prod_{k=0}^{d-1} (1 - a_j^{-1} q^{-k})^n
///         / prod_i prod_{k=1}^{d} (1 - a_i/a_j q^{-k}),
///
/// accumulated by per-step ratios with numerator/denominator factors
/// paired so each quotient stays O(1).
pub fn w_solution_explicit(
    j: usize,
    alphas: &[C64],
    n: u32,
    n_coeffs: usize,
    ctx: &EvalContext,
) -> Result<SolutionObject> {
    let m = alphas.len();
    if j >= m {
        return Err(Error::InvalidInput(format!("index {j} out of range for {m} exponents")));
    }
    let aj = alphas[j];
    let aj_inv = aj.finv();
    let mut coeffs = Vec::with_capacity(n_coeffs + 1);
    coeffs.push(C64::new(1.0, 0.0));
    let mut f = C64::new(1.0, 0.0);
    let mut q_pow_minus_d = C64::new(1.0, 0.0); // q^{-d}
    let q_inv = ctx.q.finv();
    for _d in 0..n_coeffs {
        // ratio f_{d+1}/f_d = (1 - a_j^{-1} q^{-d})^n / prod_i (1 - a_i/a_j q^{-(d+1)})
        let num_factor = C64::new(1.0, 0.0) - aj_inv * q_pow_minus_d;
        let den_base = q_pow_minus_d * q_inv; // q^{-(d+1)}
        let mut ratio = C64::new(1.0, 0.0);
        let pairs = (n as usize).max(m);
        for l in 0..pairs {
            let num = if l < n as usize { num_factor } else { C64::new(1.0, 0.0) };
            let den = if l < m {
                let factor = C64::new(1.0, 0.0) - (alphas[l] / aj) * den_base;
                if factor.norm() < 1e-12 * ((alphas[l] / aj) * den_base).norm().max(1.0) {
                    return Err(Error::ResonantAlphas);
                }
                factor
            } else {
                C64::new(1.0, 0.0)
            };
            ratio *= num / den;
        }
        f *= ratio;
        coeffs.push(f);
        q_pow_minus_d = den_base;
    }
    Ok(
        SolutionObject::plain("w", FracPowerSeries::from_coeffs(coeffs), true)
            .with_character(aj),
    )
}

/// Nilpotent-coefficient series: for each degree d the coefficient of
/// Q^d of sum_d [prod_i (P a_i;q)_d / (Pq;q)_d^n] Q^d in C\[eps\]/(eps^n).
/// The P^{l_q(Q)} prefactor is applied separately by
/// [`assemble_log_solutions`] / the connection module.
#[derive(Debug, Clone)]
pub struct KGroupSeries {
    pub order: usize,
    pub alphas: Vec<C64>,
    pub coeffs: Vec<NilpotentPoly>,
}

/// Scalar-series components X_b of a K-group series:
/// sum_d c_d Q^d = sum_b X_b(Q) eps^b.
#[derive(Debug, Clone)]
pub struct XbDecomposition {
    pub components: Vec<FracPowerSeries>,
}

pub fn kgroup_series(alphas: &[C64], n: usize, n_coeffs: usize, ctx: &EvalContext) -> Result<KGroupSeries> {
    if alphas.len() < n {
        return Err(Error::InvalidInput(format!(
            "need m >= n, got m = {} < n = {}",
            alphas.len(),
            n
        )));
    }
    let mut coeffs = Vec::with_capacity(n_coeffs + 1);
    let mut c = NilpotentPoly::one(n);
    coeffs.push(c.clone());
    let mut qd = C64::new(1.0, 0.0); // q^d
    for _d in 0..n_coeffs {
        // c_{d+1} = c_d * prod_i (1 - a_i q^d P) / (1 - q^{d+1} P)^n
        for &a in alphas {
            let x = a * qd;
            let lin = NilpotentPoly::new(pad_linear(C64::new(1.0, 0.0) - x, x, n));
            c = c.mul(&lin);
        }
        let xq = ctx.q * qd;
        let den = NilpotentPoly::new(pad_linear(C64::new(1.0, 0.0) - xq, xq, n));
        let den_inv = den.inv().map_err(|_| Error::ResonantAlphas)?;
        c = c.mul(&den_inv.powi(n as u32));
        coeffs.push(c.clone());
        qd *= ctx.q;
    }
    Ok(KGroupSeries { order: n, alphas: alphas.to_vec(), coeffs })
}

fn pad_linear(c0: C64, c1: C64, n: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[0] = c0;
    if n > 1 {
        v[1] = c1;
    }
    v
}

/// Componentwise projection; exact inverse of reassembling sum X_b eps^b.
pub fn extract_xb(ks: &KGroupSeries) -> XbDecomposition {
    let n = ks.order;
    let components = (0..n)
        .map(|b| {
            FracPowerSeries::from_coeffs(ks.coeffs.iter().map(|c| c.coeff(b)).collect())
        })
        .collect();
    XbDecomposition { components }
}

/// The n solutions at Q = 0 assembled from the X_b values at a point:
/// G_m(Q) = sum_{a+b=m} (-1)^a C(l_q(Q), a) X_b(Q).
pub fn assemble_log_solutions(xb: &XbDecomposition, q_arg: C64, ctx: &EvalContext) -> Result<Vec<C64>> {
    let l = q_log(q_arg, ctx)?;
    let n = xb.components.len();
    let xvals: Vec<C64> = xb.components.iter().map(|s| s.eval(q_arg)).collect();
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        let mut g = C64::new(0.0, 0.0);
        for a in 0..=m {
            let b = m - a;
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            g += binomial_scalar_power(l, a) * xvals[b] * sign;
        }
        out.push(g);
    }
    Ok(out)
}

/// Residual of an integer-exponent operator applied to
/// P^{l_q(Q)} * sum_d c_d Q^d in the truncated algebra:
/// sigma^i (P^l G) = P^i P^l sigma^i G, so each term contributes
/// a q^{E} (1-eps)^i q^{i d} c_d at degree d + J.
pub fn apply_kgroup(op: &QDiffOperator, ks: &KGroupSeries, ctx: &EvalContext) -> Result<Vec<NilpotentPoly>> {
    let n_ord = ks.order;
    let nn = ks.coeffs.len() - 1; // series truncation order
    let mut j_min: i64 = i64::MAX;
    let mut j_max: i64 = i64::MIN;
    for (_, p) in op.terms() {
        for (v, _, _) in p.monomials() {
            if !v.is_integer() {
                return Err(Error::InvalidInput(
                    "K-group residual requires integer variable exponents".into(),
                ));
            }
            j_min = j_min.min(v.to_integer());
            j_max = j_max.max(v.to_integer());
        }
    }
    if j_min == i64::MAX {
        return Err(Error::InvalidInput("operator has no terms".into()));
    }
    if j_min < 0 {
        return Err(Error::InvalidInput(
            "K-group residual requires nonnegative variable exponents".into(),
        ));
    }
    // residual degree D complete iff D - j <= nn for every exponent j, i.e. D <= nn + j_min
    let d_hi = nn as i64 + j_min;
    let mut out = vec![NilpotentPoly::zero(n_ord); (d_hi + 1) as usize];
    for (i, p) in op.terms() {
        let p_pow = NilpotentPoly::p_pow(i, n_ord);
        for (v, e, c) in p.monomials() {
            let j = v.to_integer();
            let base = c * ctx.q_pow(e);
            for (d, cd) in ks.coeffs.iter().enumerate() {
                let dd = d as i64 + j;
                if dd > d_hi {
                    break;
                }
                let shift = ctx.q_pow(Rat::from_integer(i as i64 * d as i64));
                let contrib = cd.mul(&p_pow).scale(base * shift);
                out[dd as usize] = out[dd as usize].add(&contrib);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{apply, newton_polygon, parse_operator};

    fn ctx05() -> EvalContext {
        EvalContext::real(0.5).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn constant_solution_of_trivial_operator() {
        // (1 - lambda^{-1} S) with root lambda: f_d = 0 for d >= 1
        let ctx = ctx05();
        let lam = c(1.7);
        let mut op = QDiffOperator::new("Q", Rat::from_integer(1));
        op.add_term(0, CoeffPoly::constant(c(1.0)));
        op.add_term(1, CoeffPoly::constant(-lam.finv()));
        let sol = frobenius_solve(&op, lam, 8, &ctx).unwrap();
        assert!((sol.series.coeff(0) - c(1.0)).norm() < 1e-15);
        for k in 1..=8 {
            assert!(sol.series.coeff(k).norm() < 1e-14);
        }
    }

    #[test]
    fn multiple_root_detected() {
        let ctx = ctx05();
        let op = parse_operator("(1 - S)^2").unwrap();
        assert!(matches!(
            frobenius_solve(&op, c(1.0), 4, &ctx),
            Err(Error::MultipleRoot)
        ));
    }

    #[test]
    fn resonant_root_detected() {
        // roots 1 and q^{-1}: lambda = 1 resonates at k = ... chi(q^k) = 0
        let ctx = ctx05();
        let op = parse_operator("(1 - S)*(1 - q^(-1)*S) - Q*S").unwrap();
        let r = frobenius_solve(&op, c(1.0), 6, &ctx);
        assert!(matches!(r, Err(Error::ResonantRoot(_))), "got {r:?}");
    }

    #[test]
    fn fuchsian_at_infinity_matches_4phi3() {
        // invert the n=m=4 operator with a_i = q^{i/5}; at root q^{1/5} the
        // series part is 4phi3(q^{1/5}x4; q^{4/5},q^{3/5},q^{2/5}; q; q^2 w)
        let ctx = ctx05();
        let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
        let op = fmn_operator(&alphas, 4);
        let (wop, _) = op.invert_variable();
        let root = alphas[0];
        let sol = frobenius_solve(&wop, root, 12, &ctx).unwrap();
        // oracle: coefficient d of the 4phi3 in argument q^2 w
        let a = alphas[0];
        let nume = [a, a, a, a];
        let deno = [ctx.q_pow(Rat::new(4, 5)), ctx.q_pow(Rat::new(3, 5)), ctx.q_pow(Rat::new(2, 5))];
        let mut term = C64::new(1.0, 0.0);
        let mut qd = C64::new(1.0, 0.0);
        for d in 0..=12usize {
            assert!(
                (sol.series.coeff(d) - term).norm() < 1e-11 * term.norm().max(1.0),
                "coefficient {d}: {} vs {}",
                sol.series.coeff(d),
                term
            );
            let mut ratio = ctx.q * ctx.q; // argument q^2 (power of w handled by grid)
            for &ai in &nume {
                ratio *= C64::new(1.0, 0.0) - ai * qd;
            }
            ratio /= C64::new(1.0, 0.0) - ctx.q * qd;
            for &bi in &deno {
                ratio /= C64::new(1.0, 0.0) - bi * qd;
            }
            term *= ratio;
            qd *= ctx.q;
        }
        // residual of the solution under the w-operator
        let res = apply(&wop, &sol, &ctx).unwrap();
        let scale = sol.series.max_norm();
        assert!(res.max_norm() < 1e-10 * scale);
    }

    #[test]
    fn w_solution_matches_frobenius_on_random_instances() {
        // closed form == generic recursion on the inverted operator
        let ctx = ctx05();
        let cases: Vec<(u32, Vec<C64>)> = vec![
            (2, vec![c(0.8), c(1.3), C64::new(0.4, 0.35)]),
            (1, vec![C64::new(0.9, 0.2), c(0.6)]),
            (3, vec![c(0.7), C64::new(1.1, 0.3), c(0.45), C64::new(0.52, -0.6)]),
        ];
        for (n, alphas) in cases {
            assert!(check_nonresonant(&alphas, &ctx, 64));
            let op = fmn_operator(&alphas, n);
            let (wop, _) = op.invert_variable();
            for j in 0..alphas.len() {
                let explicit = w_solution_explicit(j, &alphas, n, 10, &ctx).unwrap();
                let frob = frobenius_solve(&wop, alphas[j], 10, &ctx).unwrap();
                for d in 0..=10usize {
                    let (a, b) = (explicit.series.coeff(d), frob.series.coeff(d));
                    assert!(
                        (a - b).norm() < 1e-11 * a.norm().max(1.0),
                        "n={n} j={j} d={d}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn w_solution_leading_coefficient_is_one() {
        let ctx = ctx05();
        let alphas = [c(0.8), c(1.3)];
        let sol = w_solution_explicit(0, &alphas, 2, 5, &ctx).unwrap();
        assert_eq!(sol.series.coeff(0), c(1.0));
    }

    #[test]
    fn resonant_alphas_detected_by_scan() {
        let ctx = ctx05();
        assert!(check_nonresonant(
            &[ctx.q_pow(Rat::new(1, 5)), ctx.q_pow(Rat::new(2, 5))],
            &ctx,
            K_MAX_DEFAULT
        ));
        let a = C64::new(0.8, 0.1);
        assert!(!check_nonresonant(&[a, a * ctx.q], &ctx, K_MAX_DEFAULT));
        // a = {1, q^7} with K_max = 10: direct scan finds the ratio
        assert!(!check_nonresonant(
            &[c(1.0), ctx.q_pow(Rat::from_integer(7))],
            &ctx,
            10
        ));
    }

    #[test]
    fn kgroup_scalar_part_is_the_hypergeometric_series() {
        // the eps = 0 components with a_i = q^{i/5}, n = 4, coincide with
        // the basic hypergeometric coefficients: this pins the series
        // convention (no balancing factor when one more numerator
        // parameter than denominator parameters)
        let ctx = ctx05();
        let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
        let ks = kgroup_series(&alphas, 4, 10, &ctx).unwrap();
        let mut term = C64::new(1.0, 0.0);
        let mut qd = C64::new(1.0, 0.0);
        for d in 0..=10usize {
            let got = ks.coeffs[d].coeff(0);
            assert!(
                (got - term).norm() < 1e-13 * term.norm().max(1.0),
                "degree {d}: {got} vs {term}"
            );
            let mut ratio = C64::new(1.0, 0.0);
            for &a in &alphas {
                ratio *= C64::new(1.0, 0.0) - a * qd;
            }
            let dq = C64::new(1.0, 0.0) - ctx.q * qd;
            term *= ratio / (dq * dq * dq * dq);
            qd *= ctx.q;
        }
    }

    #[test]
    fn kgroup_series_degree_zero_is_unit() {
        let ctx = ctx05();
        let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
        let ks = kgroup_series(&alphas, 4, 6, &ctx).unwrap();
        assert_eq!(ks.coeffs[0], NilpotentPoly::one(4));
    }

    #[test]
    fn kgroup_scalar_part_matches_quintic_closed_form() {
        // eps = 0 component with the 25 quintic exponents equals
        // prod_{k<=5d}(1-q^k) / prod_{k<=d}(1-q^k)^5
        let ctx = ctx05();
        let alphas = quintic_exponents(&ctx);
        let ks = kgroup_series(&alphas, 5, 8, &ctx).unwrap();
        for d in 0..=8usize {
            let mut expect = C64::new(1.0, 0.0);
            for k in 1..=5 * d {
                expect *= C64::new(1.0, 0.0) - ctx.q_pow(Rat::from_integer(k as i64));
            }
            for k in 1..=d {
                let f = C64::new(1.0, 0.0) - ctx.q_pow(Rat::from_integer(k as i64));
                expect /= f * f * f * f * f;
            }
            let got = ks.coeffs[d].coeff(0);
            assert!(
                (got - expect).norm() < 1e-11 * expect.norm().max(1.0),
                "d = {d}: {got} vs {expect}"
            );
            // imaginary dust from the root-of-unity product should cancel
            assert!(got.im.abs() < 1e-11 * expect.norm().max(1.0));
        }
    }

    #[test]
    fn extract_and_reassemble_is_exact() {
        let ctx = ctx05();
        let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
        let ks = kgroup_series(&alphas, 4, 5, &ctx).unwrap();
        let xb = extract_xb(&ks);
        assert_eq!(xb.components.len(), 4);
        for (d, cd) in ks.coeffs.iter().enumerate() {
            for b in 0..4 {
                assert_eq!(xb.components[b].coeff(d), cd.coeff(b));
            }
        }
        // X_0 equals the scalar (P=1) series by construction
        let scalar = extract_xb(&ks).components[0].clone();
        assert_eq!(scalar.coeff(1), ks.coeffs[1].coeff(0));
    }

    #[test]
    fn quintic_kgroup_residual_vanishes() {
        let ctx = ctx05();
        let op = quintic_operator();
        let alphas = quintic_exponents(&ctx);
        let ks = kgroup_series(&alphas, 5, 18, &ctx).unwrap();
        let res = apply_kgroup(&op, &ks, &ctx).unwrap();
        let scale = ks
            .coeffs
            .iter()
            .map(|c| c.max_norm())
            .fold(0.0, f64::max);
        for (d, r) in res.iter().enumerate() {
            assert!(
                r.max_norm() < 1e-10 * scale,
                "degree {d} residual {:.3e} vs scale {scale:.3e}",
                r.max_norm()
            );
        }
    }

    #[test]
    fn adams_exceptional_solutions_for_quintic() {
        let ctx = ctx05();
        let op = quintic_operator();
        let poly = newton_polygon(&op);
        let sloped: Vec<_> = poly.sloped_segments().collect();
        assert_eq!(sloped.len(), 1);
        assert_eq!(sloped[0].slope, Rat::new(-1, 20));
        // xi = primitive 20th root; residual of the transformed operator
        let xi = C64::new(0.0, 2.0 * std::f64::consts::PI / 20.0).exp();
        let sol = adams_solve(&op, 20, 1, xi, 40, &ctx).unwrap();
        assert_eq!(sol.series.coeff(0), c(1.0));
        assert_eq!(sol.theta_power, 1);
        // expected character: xi * p^{-1/2}, p = q^{1/20}
        let p = ctx.q_pow(Rat::new(1, 20));
        let expected_char = xi * crate::context::cpow(p, -0.5);
        assert!((sol.character - expected_char).norm() < 1e-10);
        // z-view residual under the transformed operator
        let (zop, _) = op.adams_substitute(20, 1);
        let zsol = SolutionObject::plain(
            "z",
            FracPowerSeries::from_coeffs(sol.series.coeffs().to_vec()),
            false,
        )
        .with_character(sol.character);
        let res = apply(&zop, &zsol, &ctx).unwrap();
        let scale = sol.series.max_norm().max(1.0);
        assert!(res.max_norm() < 1e-10 * scale, "residual {:.3e}", res.max_norm());
        // and the full object (theta prefactor rules) under the original operator
        let res_q = apply(&op, &sol, &ctx).unwrap();
        assert!(res_q.max_norm() < 1e-10 * scale, "Q-view residual {:.3e}", res_q.max_norm());
    }

    #[test]
    fn w_solution_with_25_exponents_matches_the_per_root_closed_form() {
        // with n = 5 and the 25 product exponents, the generic closed form
        // specializes to the per-root solution at infinity: coefficients
        // prod_{k<d}(1 - xi^{-m} q^{-k-l/5})^5 / prod_{k<5d}(1 - q^{-k-l})
        let ctx = ctx05();
        let alphas = quintic_exponents(&ctx);
        // index j = 7: l-index 2 (xi^2), k-index 3 (q^{3/5}); the root is
        // q^{l'/5} xi'^{m'} with l' = 3, xi'^{m'} = e^{2 pi i 2/5}
        let j = 7usize;
        let sol = w_solution_explicit(j, &alphas, 5, 12, &ctx).unwrap();
        assert!((sol.character - alphas[j]).norm() < 1e-15);
        let (lp, mp) = (3i64, 2i64);
        let xim = C64::new(0.0, -2.0 * std::f64::consts::PI * mp as f64 / 5.0).exp();
        let mut f = C64::new(1.0, 0.0);
        for d in 0..=12usize {
            let got = sol.series.coeff(d);
            assert!(
                (got - f).norm() < 1e-11 * f.norm().max(1.0),
                "d = {d}: {got} vs {f}"
            );
            let mut ratio = C64::new(1.0, 0.0);
            for t in 0..5 {
                let num = C64::new(1.0, 0.0)
                    - xim * crate::context::cpow(ctx.q, -(d as f64) - lp as f64 / 5.0);
                let den = C64::new(1.0, 0.0)
                    - crate::context::cpow(ctx.q, -((5 * d + t) as f64) - lp as f64);
                ratio *= num / den;
            }
            f *= ratio;
        }
    }

    #[test]
    fn w_solution_coefficient_ratios_decay() {
        // the term-ratio of the 25 solutions tends to zero; monotone decay
        // beyond d = 10 at q = 0.5
        let ctx = ctx05();
        let alphas = quintic_exponents(&ctx);
        let sol = w_solution_explicit(0, &alphas, 5, 25, &ctx).unwrap();
        // the coefficients decay like q^{10 d(d+1)} and underflow binary64
        // past d ~ 9; every representable ratio must already be collapsing
        let mut prev = f64::INFINITY;
        let mut steps = 0usize;
        for d in 3..25usize {
            let (a, b) = (sol.series.coeff(d).norm(), sol.series.coeff(d + 1).norm());
            if b == 0.0 {
                break;
            }
            let r = b / a;
            assert!(r < prev, "ratio not decaying at d = {d}: {r} vs {prev}");
            prev = r;
            steps += 1;
        }
        assert!(steps >= 4, "too few representable ratios ({steps})");
        assert!(prev < 1e-40, "final ratio {prev:.3e}");
    }

    #[test]
    fn xb_component_matches_h_difference_oracle() {
        // X_1 at Q-order 1: fit the scalar coefficient c_1(P) at P = q^{H_j}
        // against the basis (1 - q^{H_j})^b and compare the eps^1 entry
        let ctx = ctx05();
        let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
        let ks = kgroup_series(&alphas, 4, 2, &ctx).unwrap();
        let xb = extract_xb(&ks);
        let coeff = |p: C64| -> C64 {
            // prod_i (1 - p a_i) / (1 - p q)^4, the order-1 coefficient
            let mut v = C64::new(1.0, 0.0);
            for &a in &alphas {
                v *= C64::new(1.0, 0.0) - p * a;
            }
            let d = C64::new(1.0, 0.0) - p * ctx.q;
            v / (d * d * d * d)
        };
        // first eps-derivative by Richardson-extrapolated central
        // differences in H: X_1 = c'(0) / eps'(0), eps(H) = 1 - q^H
        let f = |h: f64| coeff(C64::new(0.5f64.powf(h), 0.0));
        let d1 = |h: f64| (f(h) - f(-h)) / (2.0 * h);
        let (a1, b1, c1) = (d1(0.01), d1(0.005), d1(0.0025));
        let r1 = (b1 * 4.0 - a1) / 3.0;
        let r2 = (c1 * 4.0 - b1) / 3.0;
        let t1 = (r2 * 16.0 - r1) / 15.0;
        let fitted = t1 / -(0.5f64.ln());
        let got = xb.components[1].coeff(1);
        assert!(
            (got - fitted).norm() < 1e-8 * got.norm().max(1.0),
            "X_1 order-1: {got} vs oracle {fitted}"
        );
    }

    #[test]
    fn assemble_log_solutions_structure() {
        // G_0 = X_0 and G_1 = -l_q X_0 + X_1 at a sample point
        let ctx = ctx05();
        let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
        let ks = kgroup_series(&alphas, 4, 60, &ctx).unwrap();
        let xb = extract_xb(&ks);
        let q_arg = c(0.2);
        let g = assemble_log_solutions(&xb, q_arg, &ctx).unwrap();
        let x0 = xb.components[0].eval(q_arg);
        let x1 = xb.components[1].eval(q_arg);
        let l = q_log(q_arg, &ctx).unwrap();
        assert!((g[0] - x0).norm() < 1e-13 * x0.norm());
        assert!((g[1] - (x1 - l * x0)).norm() < 1e-12 * g[1].norm().max(1.0));
    }

    #[test]
    fn log_solutions_satisfy_fuchsian_equation_pointwise() {
        // each G_m satisfies the n=m=4 equation: residual via 5-point evaluation
        let ctx = ctx05();
        let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
        let ks = kgroup_series(&alphas, 4, 220, &ctx).unwrap();
        let xb = extract_xb(&ks);
        let q_arg = c(0.2);
        // evaluate G at q^i Q, i = 0..4 (l_q(q^i Q) = l_q(Q) + i handled by q_log)
        let mut g_at = Vec::new();
        for i in 0..=4 {
            let point = ctx.q_pow(Rat::from_integer(i)) * q_arg;
            g_at.push(assemble_log_solutions(&xb, point, &ctx).unwrap());
        }
        // operator coefficients A_i(Q) of (1-sigma)^4 - Q prod (1 - a_i sigma)
        let op = fmn_operator(&alphas, 4);
        for mdx in 0..4 {
            let mut res = C64::new(0.0, 0.0);
            let mut scale = 0.0f64;
            for (i, p) in op.terms() {
                let ai = p.coeff_of_v(Rat::from_integer(0), &ctx)
                    + p.coeff_of_v(Rat::from_integer(1), &ctx) * q_arg;
                let t = ai * g_at[i as usize][mdx];
                res += t;
                scale = scale.max(t.norm());
            }
            assert!(
                res.norm() < 1e-9 * scale.max(1.0),
                "G_{mdx} residual {:.3e} scale {scale:.3e}",
                res.norm()
            );
        }
    }
}
