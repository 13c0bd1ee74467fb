//! Problem-specification schema for the command line.
//!
//! A problem file is JSON: global evaluation parameters, an operator
//! (DSL text or the structured mirror), and one block per task kind.
//! Command-line flags override file fields; `QDEQ_PRECISION` overrides
//! the default precision.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use qdeq_core::operator::{parse_operator, OperatorJson, QDiffOperator};
use qdeq_core::{C64, EvalContext, Rat};

/// q (or any scalar) written as a decimal, an exact rational string
/// "a/b", an exact q-power "q^a/b", or {"re":..,"im":..}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
    Complex { re: f64, im: f64 },
}

impl Scalar {
    pub fn resolve_plain(&self) -> Result<C64> {
        match self {
            Scalar::Number(x) => Ok(C64::new(*x, 0.0)),
            Scalar::Complex { re, im } => Ok(C64::new(*re, *im)),
            Scalar::Text(s) => {
                let s = s.trim();
                if let Some(rest) = s.strip_prefix("q^") {
                    bail!("q-power '{s}' needs a context; got bare scalar slot (exponent {rest})");
                }
                parse_rational_or_decimal(s).map(|x| C64::new(x, 0.0))
            }
        }
    }

    /// Resolve against a context so "q^a/b" becomes an exact q-power.
    pub fn resolve(&self, ctx: &EvalContext) -> Result<C64> {
        match self {
            Scalar::Text(s) if s.trim().starts_with("q^") => {
                let e = parse_rat(s.trim().strip_prefix("q^").unwrap())?;
                Ok(ctx.q_pow(e))
            }
            other => other.resolve_plain(),
        }
    }
}

pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim().trim_start_matches('(').trim_end_matches(')');
    let mut it = s.splitn(2, '/');
    let n: i64 = it.next().unwrap().trim().parse().context("rational numerator")?;
    match it.next() {
        None => Ok(Rat::from_integer(n)),
        Some(d) => {
            let d: i64 = d.trim().parse().context("rational denominator")?;
            if d <= 0 {
                bail!("rational denominator must be positive");
            }
            Ok(Rat::new(n, d))
        }
    }
}

pub fn parse_rational_or_decimal(s: &str) -> Result<f64> {
    if s.contains('/') {
        let r = parse_rat(s)?;
        Ok(*r.numer() as f64 / *r.denom() as f64)
    } else {
        s.parse::<f64>().map_err(|e| anyhow!("bad number '{s}': {e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OperatorSpec {
    Dsl(String),
    Structured(OperatorJson),
}

impl OperatorSpec {
    pub fn build(&self) -> qdeq_core::Result<QDiffOperator> {
        match self {
            OperatorSpec::Dsl(text) => parse_operator(text),
            OperatorSpec::Structured(j) => j.to_operator(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveSpec {
    pub method: String,
    /// named exponent set; "quintic" = the 25 exponents xi^l q^{k/5}
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<Scalar>,
    #[serde(default)]
    pub at_infinity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_index: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConnectSpec {
    pub alphas: Vec<Scalar>,
    pub n: usize,
    pub points: Vec<Scalar>,
    #[serde(default)]
    pub matrix: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfluenceSample {
    pub point: Scalar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Scalar>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfluenceSpec {
    pub q0: Scalar,
    pub t_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<ConfluenceSample>,
    #[serde(default)]
    pub gamma_block: bool,
    /// angle theta for the two-sided boundary check at Q = e^{i theta}
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_boundary_angle: Option<f64>,
    /// point for the q -> 1 trace toward the classical connection side
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_trace_point: Option<Scalar>,
    /// t values for that trace; complex arguments need moderate t (the
    /// bilateral theta sums cancel like exp(-arg^2/2w)), so this defaults
    /// to the block's t_values clamped to t >= 0.05
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_trace_t_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct CheckSpec {
    /// suites to run; empty means all
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suites: Vec<String>,
    /// per-suite deviation gates overriding the defaults
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub gates: std::collections::BTreeMap<String, f64>,
}

/// The full problem file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connect: Option<ConnectSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confluence: Option<ConfluenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            task: None,
            q: None,
            precision: None,
            tol: None,
            order: None,
            operator: None,
            solve: None,
            connect: None,
            confluence: None,
            check: None,
        }
    }
}

impl ProblemSpec {
    pub fn context(&self) -> Result<EvalContext> {
        let q = match &self.q {
            Some(s) => s.resolve_plain()?,
            None => C64::new(0.5, 0.0),
        };
        let precision = self.precision.unwrap_or(53);
        let tol = self.tol.unwrap_or(1e-14);
        EvalContext::new(q, precision, tol).map_err(|e| anyhow!("{e}"))
    }

    pub fn resolve_alphas(&self, list: &[Scalar], ctx: &EvalContext) -> Result<Vec<C64>> {
        list.iter().map(|s| s.resolve(ctx)).collect()
    }
}
