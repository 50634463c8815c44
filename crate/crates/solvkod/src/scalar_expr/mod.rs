//! Exact scalars over ℚ(i) with symbol, square-root, exponential and π atoms.
//!
//! Normal form: a sorted map from monomials to complex-rational coefficients.
//! Square roots of rationals are reduced to one squarefree `sqrt(n)`, square
//! roots of monomials split per atom (symbols are assumed positive), and
//! exponential atoms are merged so each monomial carries at most one.

mod coeff;
mod context;
mod eval;
mod expr;
mod parse;
mod raw;
mod render;

use thiserror::Error;

pub use coeff::{Coeff, Int};
pub use context::{Context, Rule, SymbolInfo, SymbolKind};
pub use expr::{Atom, Monomial, ScalarExpr};
pub use parse::parse;
pub use raw::RawExpr;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("undeclared atom `{0}`")]
    UndeclaredAtom(String),
    #[error("cannot divide by `{0}`")]
    NonInvertibleDivision(String),
    #[error("substitution target `{0}` is not a symbol")]
    SubstitutionIntoNonSymbol(String),
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Expression with arbitrary-precision coefficients.
pub type Expr = ScalarExpr<num_bigint::BigInt>;
/// Expression with machine-word coefficients; overflow panics.
pub type SmallExpr = ScalarExpr<i64>;
/// Context for [`Expr`].
pub type Ctx = Context<num_bigint::BigInt>;
