//! Newton polygon of a q-difference operator.
//!
//! For an operator of maximal shift n, each nonzero coefficient a_i
//! contributes the lattice point (n - i, j_i) with j_i the lowest
//! variable exponent of a_i. The polygon is the lower convex hull of
//! these points, built with exact rational arithmetic (monotone chain);
//! floating slopes never appear, so collinear ties are deterministic.
//!
//! Horizontal segments carry characteristic equations
//! a_{k,0} x^k + ... + a_{d,0} x^d read from the lowest-order
//! coefficients across the segment span; sloped segments feed the
//! fractional-power substitution.

use serde::{Deserialize, Serialize};

use crate::context::{C64, EvalContext, Rat};
use crate::error::{Error, Result};

use super::QDiffOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Horizontal,
    Sloped,
}

/// A lower-hull segment with exact rational endpoints and slope.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: (i64, Rat),
    pub end: (i64, Rat),
    pub slope: Rat,
    pub kind: SegmentKind,
}

/// Lower convex hull of the plotted points (n - i, j_i).
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonPolygon {
    pub points: Vec<(i64, Rat)>,
    pub segments: Vec<Segment>,
}

impl NewtonPolygon {
    pub fn vertices(&self) -> Vec<(i64, Rat)> {
        if self.segments.is_empty() {
            return self.points.clone();
        }
        let mut v = vec![self.segments[0].start];
        for s in &self.segments {
            v.push(s.end);
        }
        v
    }

    pub fn sloped_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Sloped)
    }

    pub fn horizontal_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Horizontal)
    }
}

fn cross(o: (i64, Rat), a: (i64, Rat), b: (i64, Rat)) -> Rat {
    let ox = Rat::from_integer(o.0);
    let ax = Rat::from_integer(a.0);
    let bx = Rat::from_integer(b.0);
    (ax - ox) * (b.1 - o.1) - (a.1 - o.1) * (bx - ox)
}

/// Construct the Newton polygon. Operators with a single plotted point
/// yield that point and no segments.
pub fn newton_polygon(op: &QDiffOperator) -> NewtonPolygon {
    let n = op.max_shift() as i64;
    let mut points: Vec<(i64, Rat)> = op
        .terms()
        .filter_map(|(i, p)| p.min_v_exp().map(|j| (n - i as i64, j)))
        .collect();
    points.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    points.dedup();

    if points.len() <= 1 {
        return NewtonPolygon { points, segments: Vec::new() };
    }

    // monotone chain, lower hull; strictly convex turns only
    let mut hull: Vec<(i64, Rat)> = Vec::new();
    for &p in &points {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= Rat::from_integer(0) {
            hull.pop();
        }
        hull.push(p);
    }

    let segments = hull
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let slope = (b.1 - a.1) / Rat::from_integer(b.0 - a.0);
            Segment {
                start: a,
                end: b,
                slope,
                kind: if slope == Rat::from_integer(0) {
                    SegmentKind::Horizontal
                } else {
                    SegmentKind::Sloped
                },
            }
        })
        .collect();

    NewtonPolygon { points, segments }
}

/// Characteristic polynomial read from a horizontal segment: exact
/// q-power coefficients indexed by the absolute shift power.
#[derive(Debug, Clone)]
pub struct CharPoly {
    /// `coeffs[i]` = list of (q_exp, mantissa) making up the coefficient of x^i.
    pub coeffs: Vec<Vec<(Rat, C64)>>,
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| !c.is_empty())
            .unwrap_or(0)
    }

    /// Lowest power of x with a nonzero coefficient.
    pub fn valuation(&self) -> usize {
        self.coeffs.iter().position(|c| !c.is_empty()).unwrap_or(0)
    }

    pub fn eval(&self, x: C64, ctx: &EvalContext) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for coeff in self.coeffs.iter().rev() {
            acc *= x;
            for &(e, c) in coeff {
                acc += c * ctx.q_pow(e);
            }
        }
        acc
    }

    pub fn eval_derivative(&self, x: C64, ctx: &EvalContext) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let mut xp = C64::new(1.0, 0.0); // x^{i-1}
        for (i, coeff) in self.coeffs.iter().enumerate().skip(1) {
            if !coeff.is_empty() {
                let mut num = C64::new(0.0, 0.0);
                for &(e, c) in coeff {
                    num += c * ctx.q_pow(e);
                }
                acc += num * xp * i as f64;
            }
            xp *= x;
        }
        acc
    }
}

/// Characteristic equation of a horizontal segment.
pub fn characteristic_equation(op: &QDiffOperator, segment: &Segment) -> Result<CharPoly> {
    if segment.kind != SegmentKind::Horizontal {
        return Err(Error::NotHorizontal);
    }
    let n = op.max_shift() as i64;
    let height = segment.start.1;
    let i_min = (n - segment.end.0).max(0) as u32;
    let i_max = (n - segment.start.0).max(0) as u32;
    let mut coeffs = vec![Vec::new(); i_max as usize + 1];
    for (i, p) in op.terms() {
        if i < i_min || i > i_max {
            continue;
        }
        // only points on the segment contribute; others have j_i > height
        if p.min_v_exp() != Some(height) {
            continue;
        }
        let entries: Vec<(Rat, C64)> = p
            .monomials()
            .filter(|&(v, _, _)| v == height)
            .map(|(_, e, c)| (e, c))
            .collect();
        coeffs[i as usize] = entries;
    }
    Ok(CharPoly { coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::parse_operator;

    fn vertex_list(p: &NewtonPolygon) -> Vec<(i64, i64)> {
        p.vertices()
            .iter()
            .map(|&(x, y)| {
                assert!(y.is_integer());
                (x, y.to_integer())
            })
            .collect()
    }

    #[test]
    fn example_polygon_with_two_slopes() {
        // (Q^4+2Q^7)S^6 + (Q+3Q^5)S^5 + (3+2Q^3)S^4 + 2S^3 + 3S^2 + Q^2*S
        let op = parse_operator(
            "(Q^4 + 2*Q^7)*S^6 + (Q + 3*Q^5)*S^5 + (3 + 2*Q^3)*S^4 + 2*S^3 + 3*S^2 + Q^2*S",
        )
        .unwrap();
        let p = newton_polygon(&op);
        assert_eq!(vertex_list(&p), vec![(0, 4), (1, 1), (2, 0), (4, 0), (5, 2)]);
        // the interior lattice point (3,0) is plotted but is not a vertex
        assert!(p.points.contains(&(3, Rat::from_integer(0))));
    }

    #[test]
    fn single_term_operator() {
        let op = parse_operator("Q^3*S^2").unwrap();
        let p = newton_polygon(&op);
        assert_eq!(p.points.len(), 1);
        assert!(p.segments.is_empty());
    }

    #[test]
    fn characteristic_equations_of_the_degree_25_operator() {
        let ctx = crate::context::EvalContext::real(0.5).unwrap();
        let op = crate::solver::quintic_operator();
        let poly = newton_polygon(&op);
        // at Q = 0 the horizontal segment carries (1-x)^5
        let seg = poly.horizontal_segments().next().unwrap();
        let cp = characteristic_equation(&op, seg).unwrap();
        assert_eq!(cp.degree(), 5);
        for i in 0..=5usize {
            let expect = crate::context::binomial_scalar_power(C64::new(5.0, 0.0), i)
                * if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut got = C64::new(0.0, 0.0);
            for &(e, c) in &cp.coeffs[i] {
                got += c * ctx.q_pow(e);
            }
            assert!((got - expect).norm() < 1e-14, "power {i}");
        }
        // after inversion the single horizontal segment carries
        // prod_k (1 - q^{-k} x^5), degree 25
        let (wop, _) = op.invert_variable();
        let wpoly = newton_polygon(&wop);
        assert_eq!(wpoly.segments.len(), 1);
        let seg = wpoly.horizontal_segments().next().unwrap();
        let cp = characteristic_equation(&wop, seg).unwrap();
        assert_eq!(cp.degree(), 25);
        // roots q^{l/5} xi^m: evaluate and verify they vanish
        for l in 1..=5i64 {
            for m in 0..5 {
                let xi = C64::new(0.0, 2.0 * std::f64::consts::PI * m as f64 / 5.0).exp();
                let root = ctx.q_pow(Rat::new(l, 5)) * xi;
                let v = cp.eval(root, &ctx);
                assert!(v.norm() < 1e-9, "root ({l},{m}): |chi| = {:.3e}", v.norm());
            }
        }
        // the fuchsian case at w = 0: prod_i (1 - q^{-i/5} x), roots q^{i/5}
        let alphas: Vec<C64> = (1..=4).map(|i| ctx.q_pow(Rat::new(i, 5))).collect();
        let f_op = crate::solver::fmn_operator(&alphas, 4);
        let (f_w, _) = f_op.invert_variable();
        let f_poly = newton_polygon(&f_w);
        let seg = f_poly.horizontal_segments().next().unwrap();
        let cp = characteristic_equation(&f_w, seg).unwrap();
        assert_eq!(cp.degree(), 4);
        for i in 1..=4i64 {
            let v = cp.eval(ctx.q_pow(Rat::new(i, 5)), &ctx);
            assert!(v.norm() < 1e-12, "fuchsian root {i}");
        }
    }

    #[test]
    fn hull_points_on_or_above_every_segment() {
        let op = parse_operator(
            "(Q^4 + 2*Q^7)*S^6 + (Q + 3*Q^5)*S^5 + (3 + 2*Q^3)*S^4 + 2*S^3 + 3*S^2 + Q^2*S",
        )
        .unwrap();
        let p = newton_polygon(&op);
        // the lower hull is the max of its segment lines, so every plotted
        // point lies on or above every segment line, globally and exactly
        for s in &p.segments {
            for &(x, y) in &p.points {
                let lhs = (y - s.start.1) * Rat::from_integer(s.end.0 - s.start.0);
                let rhs = (s.end.1 - s.start.1) * Rat::from_integer(x - s.start.0);
                assert!(lhs >= rhs, "point ({x},{y}) below segment line");
            }
        }
    }
}
