//! Text DSL and JSON mirror for q-difference operators.
//!
//! Grammar (whitespace insignificant):
//!
//!   expression := ['+'|'-'] term (('+'|'-') term)*
//!   term       := factor ('*' factor)*
//!   factor     := atom ('^' integer)?
//!   atom       := '(' expression ')' | 'Q' | 'S' | 'q' ('^' rational)? | number
//!   rational   := integer ('/' positive-integer)?
//!
//! 'S' is the shift sigma in the declared variable; products and integer
//! powers are expanded on the spot with sigma * Q^a = q^a Q^a sigma, so a
//! parsed operator is always in normal form. Shift powers must be
//! nonnegative integers; Q may carry negative integer powers (Laurent
//! coefficients).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::context::Rat;
use crate::error::{Error, Result};

use super::{CoeffPoly, QDiffOperator};

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src: src.as_bytes(), pos: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(self.err("expected integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse::<i64>()
            .map_err(|e| self.err(format!("bad integer: {e}")))
    }

    fn parse_rational(&mut self) -> Result<Rat> {
        let n = self.parse_integer()?;
        if self.eat(b'/') {
            let d = self.parse_integer()?;
            if d <= 0 {
                return Err(self.err("rational denominator must be positive"));
            }
            Ok(Rat::new(n, d))
        } else {
            Ok(Rat::from_integer(n))
        }
    }

    fn parse_number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // exponent part of a float literal
        if self.pos < self.src.len() && (self.src[self.pos] | 32) == b'e' {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        if self.pos == start {
            return Err(self.err("expected number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse::<f64>()
            .map_err(|e| self.err(format!("bad number: {e}")))
    }

    fn parse_atom(&mut self, var: &str, beta: Rat) -> Result<QDiffOperator> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_expression(var, beta)?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(b'Q') => {
                self.pos += 1;
                let mut op = QDiffOperator::new(var, beta);
                op.add_term(0, CoeffPoly::monomial(Rat::from_integer(1), Rat::from_integer(0), C64::new(1.0, 0.0)));
                Ok(op)
            }
            Some(b'S') => {
                self.pos += 1;
                let mut op = QDiffOperator::new(var, beta);
                op.add_term(1, CoeffPoly::constant(C64::new(1.0, 0.0)));
                Ok(op)
            }
            Some(b'q') => {
                self.pos += 1;
                let e = if self.eat(b'^') {
                    let bracketed = self.eat(b'(');
                    let r = self.parse_rational()?;
                    if bracketed && !self.eat(b')') {
                        return Err(self.err("expected ')' after q exponent"));
                    }
                    r
                } else {
                    Rat::from_integer(1)
                };
                let mut op = QDiffOperator::new(var, beta);
                op.add_term(0, CoeffPoly::monomial(Rat::from_integer(0), e, C64::new(1.0, 0.0)));
                Ok(op)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let n = self.parse_number()?;
                Ok(QDiffOperator::scalar(var, beta, C64::new(n, 0.0)))
            }
            Some(c) => Err(self.err(format!("unexpected character '{}'", c as char))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn parse_factor(&mut self, var: &str, beta: Rat) -> Result<QDiffOperator> {
        let atom_pos = self.pos;
        let base = self.parse_atom(var, beta)?;
        if self.eat(b'^') {
            let exp_pos = self.pos;
            let bracketed = self.eat(b'(');
            let k = self.parse_integer()?;
            if bracketed && !self.eat(b')') {
                return Err(self.err("expected ')' after exponent"));
            }
            if k < 0 {
                // negative powers are only meaningful for pure Q-monomials
                let is_q_monomial = base.max_shift() == 0
                    && base.num_terms() == 1
                    && base
                        .coeff(0)
                        .map(|p| p.monomials().count() == 1)
                        .unwrap_or(false);
                if !is_q_monomial {
                    if base.max_shift() > 0 {
                        return Err(Error::NonIntegerShiftPower(exp_pos));
                    }
                    return Err(Error::Parse {
                        pos: atom_pos,
                        msg: "negative power of a non-monomial".into(),
                    });
                }
                let p = base.coeff(0).unwrap();
                let (v, e, c) = p.monomials().next().unwrap();
                if c.norm() == 0.0 {
                    return Err(Error::Parse { pos: atom_pos, msg: "negative power of zero".into() });
                }
                let kk = -k as i32;
                let mut op = QDiffOperator::new(var, beta);
                op.add_term(
                    0,
                    CoeffPoly::monomial(
                        v * Rat::from_integer(k),
                        e * Rat::from_integer(k),
                        C64::new(1.0, 0.0) / c.powi(kk),
                    ),
                );
                return Ok(op);
            }
            Ok(base.pow(k as u32))
        } else {
            Ok(base)
        }
    }

    fn parse_term(&mut self, var: &str, beta: Rat) -> Result<QDiffOperator> {
        let mut acc = self.parse_factor(var, beta)?;
        while self.eat(b'*') {
            let f = self.parse_factor(var, beta)?;
            acc = acc.mul(&f);
        }
        Ok(acc)
    }

    fn parse_expression(&mut self, var: &str, beta: Rat) -> Result<QDiffOperator> {
        let mut acc = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.parse_term(var, beta)?.neg()
            }
            Some(b'+') => {
                self.pos += 1;
                self.parse_term(var, beta)?
            }
            _ => self.parse_term(var, beta)?,
        };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.parse_term(var, beta)?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.parse_term(var, beta)?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }
}

/// Parse the operator DSL in the default variable Q (sigma shifts Q by q).
pub fn parse_operator(text: &str) -> Result<QDiffOperator> {
    parse_operator_in(text, "Q", Rat::from_integer(1))
}

/// Parse in an explicit variable with an explicit shift base.
pub fn parse_operator_in(text: &str, variable: &str, shift_base: Rat) -> Result<QDiffOperator> {
    let mut p = Parser::new(text);
    let op = p.parse_expression(variable, shift_base)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    if op.num_terms() == 0 {
        return Err(Error::Parse { pos: 0, msg: "operator has no terms".into() });
    }
    Ok(op)
}

fn fmt_rat(r: Rat) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Deterministic normal-form rendering.
///
/// For operators with real mantissas the output re-parses to the same
/// term map (parse -> print -> parse is a fixed point). Complex
/// mantissas (from character conjugation) render as `{re,im}` markers
/// that the DSL does not read back.
pub fn pretty_print(op: &QDiffOperator) -> String {
    let mut chunks: Vec<(bool, String)> = Vec::new(); // (negative, body)
    for (i, p) in op.terms() {
        for (v, e, c) in p.monomials() {
            let neg = c.im == 0.0 && c.re < 0.0;
            let mag = if neg { -c.re } else { c.re };
            let mut body = if c.im != 0.0 {
                format!("{{{},{}}}", c.re, c.im)
            } else {
                format!("{}", mag)
            };
            if e != Rat::from_integer(0) {
                body.push_str(&format!("*q^({})", fmt_rat(e)));
            }
            if v != Rat::from_integer(0) {
                if v.is_integer() && *v.numer() > 0 && *v.numer() == 1 {
                    body.push_str("*Q");
                } else {
                    body.push_str(&format!("*Q^({})", fmt_rat(v)));
                }
            }
            if i > 0 {
                if i == 1 {
                    body.push_str("*S");
                } else {
                    body.push_str(&format!("*S^{i}"));
                }
            }
            chunks.push((neg, body));
        }
    }
    if chunks.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, (neg, body)) in chunks.iter().enumerate() {
        if k == 0 {
            if *neg {
                out.push_str("- ");
            }
        } else {
            out.push_str(if *neg { " - " } else { " + " });
        }
        out.push_str(body);
    }
    out
}

/// JSON mirror of an operator.
///
/// {"variable":"Q","terms":[{"shift":i,"coeff":[{"Q_exp":"a/b","q_exp":"c/d","re":..,"im":..}]}]}
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub variable: String,
    #[serde(default = "default_shift_base", skip_serializing_if = "is_default_shift_base")]
    pub shift_base: String,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub shift: u32,
    pub coeff: Vec<MonomialJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialJson {
    #[serde(rename = "Q_exp")]
    pub q_var_exp: String,
    pub q_exp: String,
    pub re: f64,
    pub im: f64,
}

fn default_shift_base() -> String {
    "1".to_string()
}

fn is_default_shift_base(s: &String) -> bool {
    s == "1"
}

fn parse_rat_str(s: &str) -> Result<Rat> {
    let mut it = s.splitn(2, '/');
    let n: i64 = it
        .next()
        .unwrap()
        .trim()
        .parse()
        .map_err(|e| Error::InvalidInput(format!("bad rational '{s}': {e}")))?;
    match it.next() {
        None => Ok(Rat::from_integer(n)),
        Some(d) => {
            let d: i64 = d
                .trim()
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad rational '{s}': {e}")))?;
            if d <= 0 {
                return Err(Error::InvalidInput(format!("bad rational '{s}': denominator must be positive")));
            }
            Ok(Rat::new(n, d))
        }
    }
}

impl OperatorJson {
    pub fn from_operator(op: &QDiffOperator) -> Self {
        OperatorJson {
            variable: op.variable().to_string(),
            shift_base: fmt_rat(op.shift_base()),
            terms: op
                .terms()
                .map(|(i, p)| TermJson {
                    shift: i,
                    coeff: p
                        .monomials()
                        .map(|(v, e, c)| MonomialJson {
                            q_var_exp: fmt_rat(v),
                            q_exp: fmt_rat(e),
                            re: c.re,
                            im: c.im,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_operator(&self) -> Result<QDiffOperator> {
        let beta = parse_rat_str(&self.shift_base)?;
        let mut op = QDiffOperator::new(self.variable.clone(), beta);
        for t in &self.terms {
            let mut p = CoeffPoly::zero();
            for m in &t.coeff {
                p.insert(parse_rat_str(&m.q_var_exp)?, parse_rat_str(&m.q_exp)?, C64::new(m.re, m.im));
            }
            op.add_term(t.shift, p);
        }
        if op.num_terms() == 0 {
            return Err(Error::InvalidInput("operator has no terms".into()));
        }
        Ok(op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_one_minus_shift_squared() {
        // (1 - S)^2 = 1 - 2S + S^2 (Q-free coefficients commute with S)
        let op = parse_operator("(1 - S)^2").unwrap();
        let ctx = crate::context::EvalContext::real(0.5).unwrap();
        let z = Rat::from_integer(0);
        assert_eq!(op.max_shift(), 2);
        assert_eq!(op.coeff(0).unwrap().coeff_of_v(z, &ctx), C64::new(1.0, 0.0));
        assert_eq!(op.coeff(1).unwrap().coeff_of_v(z, &ctx), C64::new(-2.0, 0.0));
        assert_eq!(op.coeff(2).unwrap().coeff_of_v(z, &ctx), C64::new(1.0, 0.0));
    }

    #[test]
    fn parse_error_position() {
        let e = parse_operator("(1 - S").unwrap_err();
        match e {
            Error::Parse { pos, .. } => assert!(pos >= 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_shift_power_rejected() {
        assert!(matches!(
            parse_operator("S^-1"),
            Err(Error::NonIntegerShiftPower(_))
        ));
        assert!(matches!(
            parse_operator("(1 - S)^-2"),
            Err(Error::NonIntegerShiftPower(_))
        ));
    }

    #[test]
    fn laurent_q_monomials_allowed() {
        let op = parse_operator("Q^-2 + q^(-3/2)*Q").unwrap();
        let ctx = crate::context::EvalContext::real(0.25).unwrap();
        let c = op.coeff(0).unwrap().coeff_of_v(Rat::new(-2, 1), &ctx);
        assert_eq!(c, C64::new(1.0, 0.0));
        let c1 = op.coeff(0).unwrap().coeff_of_v(Rat::new(1, 1), &ctx);
        assert!((c1.re - 0.25f64.powf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn print_parse_fixed_point() {
        let samples = [
            "(1 - S)^2",
            "(1 - S)^5 - Q*(1 - q^1*S^5)*(1 - q^2*S^5)*(1 - q^3*S^5)*(1 - q^4*S^5)*(1 - q^5*S^5)",
            "Q*S - S*Q",
            "3*Q^2*S^3 + q^(1/2)*Q - 0.25*S",
            "Q^-2 + q^(-3/2)*Q*S^2 - 7",
        ];
        for s in samples {
            let op = parse_operator(s).unwrap();
            let printed = pretty_print(&op);
            let reparsed = parse_operator(&printed).unwrap();
            assert_eq!(op, reparsed, "fixed point failed for '{s}' -> '{printed}'");
        }
    }

    #[test]
    fn json_roundtrip() {
        let op = parse_operator("(1 - S)^2 - Q*(1 - q^(1/2)*S)").unwrap();
        let j = OperatorJson::from_operator(&op);
        let text = serde_json::to_string(&j).unwrap();
        let back: OperatorJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_operator().unwrap(), op);
    }

    #[test]
    fn json_roundtrip_keeps_fractional_shift_base() {
        // transformed operators carry shift_base 1/s and fractional q-powers
        let op = crate::solver::quintic_operator();
        let (zop, _) = op.adams_substitute(20, 1);
        let j = OperatorJson::from_operator(&zop);
        assert_eq!(j.shift_base, "1/20");
        let text = serde_json::to_string(&j).unwrap();
        let back: OperatorJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_operator().unwrap(), zop);
    }
}
