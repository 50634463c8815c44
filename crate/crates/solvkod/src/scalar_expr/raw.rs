use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{Float, FloatConst};

use super::ExprError;

/// Unnormalized expression tree, as produced by the parser.
#[derive(Clone, Debug, PartialEq)]
pub enum RawExpr {
    Int(String),
    I,
    Pi,
    Sym(String),
    Sqrt(Box<RawExpr>),
    Exp(Box<RawExpr>),
    Conj(Box<RawExpr>),
    Neg(Box<RawExpr>),
    Add(Vec<RawExpr>),
    Sub(Box<RawExpr>, Box<RawExpr>),
    Mul(Vec<RawExpr>),
    Div(Box<RawExpr>, Box<RawExpr>),
    Pow(Box<RawExpr>, i64),
}

impl RawExpr {
    pub fn int(v: i64) -> Self {
        RawExpr::Int(v.to_string())
    }

    pub fn sym(s: &str) -> Self {
        RawExpr::Sym(s.to_string())
    }

    /// Floating evaluation of the tree itself, symbols are real.
    pub fn eval<F: Float + FloatConst>(&self, env: &BTreeMap<String, F>) -> Result<Complex<F>, ExprError> {
        let z = |v: F| Complex::new(v, F::zero());
        Ok(match self {
            RawExpr::Int(n) => z(F::from(n.parse::<f64>().map_err(|_| ExprError::Parse(n.clone()))?).unwrap()),
            RawExpr::I => Complex::new(F::zero(), F::one()),
            RawExpr::Pi => z(F::PI()),
            RawExpr::Sym(s) => z(*env.get(s).ok_or_else(|| ExprError::UnboundSymbol(s.clone()))?),
            RawExpr::Sqrt(x) => x.eval(env)?.sqrt(),
            RawExpr::Exp(x) => x.eval(env)?.exp(),
            RawExpr::Conj(x) => x.eval(env)?.conj(),
            RawExpr::Neg(x) => -x.eval(env)?,
            RawExpr::Add(xs) => {
                let mut acc = z(F::zero());
                for x in xs {
                    acc = acc + x.eval(env)?;
                }
                acc
            }
            RawExpr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            RawExpr::Mul(xs) => {
                let mut acc = z(F::one());
                for x in xs {
                    acc = acc * x.eval(env)?;
                }
                acc
            }
            RawExpr::Div(a, b) => a.eval(env)? / b.eval(env)?,
            RawExpr::Pow(b, n) => b.eval(env)?.powi(*n as i32),
        })
    }
}
