//! Exact symbolic engine for invariant almost complex structures on
//! four-dimensional solvmanifolds.

pub mod acs;
pub mod canonical;
pub mod chern;
pub mod exterior;
pub mod fourier;
pub mod linalg;
pub mod scalar_expr;
pub mod solvmanifold;
pub mod twistor_norden;

pub use scalar_expr::{Ctx, Expr, ExprError};
