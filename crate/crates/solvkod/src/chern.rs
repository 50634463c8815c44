//! Canonical (Chern) connection of an almost Hermitian structure on the
//! unitary coframe: torsion, connection and curvature forms, Chern–Ricci.
//!
//! The torsion is the one of the unique unitary connection whose torsion has
//! no (1,1) part. Writing `θ^i_j = α^i_j + β^i_j` by type, the (1,1) part of
//! `dφ^i + θ^i_j∧φ^j` fixes `β`, and unitarity gives `α^i_j = −conj(β^j_i)`.

use serde::Serialize;
use thiserror::Error;

use crate::acs::{adapted_coframe, AcStructure, AcsError, ComplexFrame};
use crate::exterior::{Coframe, ExteriorError, InvariantForm};
use crate::linalg;
use crate::scalar_expr::{Ctx, Expr, ExprError};
use crate::solvmanifold::SolvmanifoldModel;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ChernError {
    #[error("not almost Hermitian: {0}")]
    NonHermitianInput(String),
    #[error("no unitary connection with the given torsion: {0}")]
    NoUnitarySolution(String),
    #[error(transparent)]
    Acs(#[from] AcsError),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

pub type FormMatrix = [[InvariantForm; 2]; 2];

#[derive(Clone, Debug)]
pub struct ConnectionData {
    pub frame: ComplexFrame,
    pub dphi: [InvariantForm; 2],
    /// `Θ^i` on the unitary coframe.
    pub torsion: [InvariantForm; 2],
    /// `Θ_ℝ^a` on the adapted real coframe `ε`.
    pub torsion_real: [InvariantForm; 4],
    pub theta: FormMatrix,
    pub psi: FormMatrix,
    /// `r[i][j][k][l] = R^i_{j k l̄}`.
    pub r: [[[[Expr; 2]; 2]; 2]; 2],
    /// `R_{k l̄}`.
    pub ricci_table: [[Expr; 2]; 2],
    /// `Σ R_{k l̄} φ^k∧φ̄^l`.
    pub ricci: InvariantForm,
    pub scalar: Expr,
}

fn p11(k: usize, l: usize) -> u8 {
    (1 << k) | (1 << (2 + l))
}

/// Adapted coframe rescaled by `unitary_scale`, checked unitary for the metric.
pub fn unitary_frame(j: &AcStructure) -> Result<ComplexFrame, ChernError> {
    let ctx = &j.ctx;
    let g = j.metric.as_ref().ok_or_else(|| ChernError::NonHermitianInput(format!("{} has no metric", j.name)))?;
    let jt = linalg::transpose(&j.matrix);
    if !linalg::equal(ctx, &linalg::mul(ctx, &linalg::mul(ctx, &jt, g), &j.matrix), g) {
        return Err(ChernError::NonHermitianInput("g(J·,J·) != g".into()));
    }
    let base = adapted_coframe(j)?;
    let cf = if ctx.equal(&j.unitary_scale, &Expr::one()) { base } else { base.rescaled(ctx, &j.unitary_scale)? };
    // g = Σ φ^i ⊗ φ̄^i + φ̄^i ⊗ φ^i
    let rows = cf.coframe_rows();
    let n = rows[0].len();
    let herm: linalg::Mat = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let mut s = Expr::zero();
                    for i in 0..2 {
                        s = &s + &(&rows[i][a] * &rows[i + 2][b]);
                        s = &s + &(&rows[i + 2][a] * &rows[i][b]);
                    }
                    ctx.reduce(&s)
                })
                .collect()
        })
        .collect();
    if !linalg::equal(ctx, &herm, g) {
        return Err(ChernError::NonHermitianInput("coframe is not unitary for the metric".into()));
    }
    Ok(cf)
}

/// `d` of a form written on the complex coframe.
pub fn d_complex(model: &SolvmanifoldModel, ctx: &Ctx, cf: &ComplexFrame, f: &InvariantForm) -> Result<InvariantForm, ChernError> {
    let images: [InvariantForm; 4] = std::array::from_fn(|a| cf.phi_in_e(a));
    let e = f.change_basis(ctx, &images)?;
    let d = e.d_with(ctx, &model.d_basis())?;
    Ok(cf.to_complex(ctx, &d)?)
}

fn real_torsion(ctx: &Ctx, j: &AcStructure, cf: &ComplexFrame, t: &[InvariantForm; 2]) -> Result<[InvariantForm; 4], ChernError> {
    let images: [InvariantForm; 4] = std::array::from_fn(|a| cf.phi_in_e(a));
    // e^j = Σ_i F_ij ε^i
    let f = j.frame.as_ref().ok_or_else(|| AcsError::MissingFrame(j.name.clone()))?;
    let to_eps: [InvariantForm; 4] = std::array::from_fn(|jj| {
        let mut v = InvariantForm::zero(Coframe::Eps, 1);
        for (i, row) in f.iter().enumerate() {
            if !row[jj].is_zero() {
                v.add_term(1 << i, row[jj].clone());
            }
        }
        v
    });
    let s = Expr::int(2).sqrt().scale_ratio(&num_rational::BigRational::new(1.into(), 2.into()));
    let mut out: [InvariantForm; 4] = std::array::from_fn(|_| InvariantForm::zero(Coframe::Eps, 2));
    for i in 0..2 {
        let a = t[i].add(&t[i].conj())?.scale(&s);
        let b = t[i].sub(&t[i].conj())?.scale(&s.mul_i()).neg();
        out[2 * i] = a.change_basis(ctx, &images)?.change_basis(ctx, &to_eps)?;
        out[2 * i + 1] = b.change_basis(ctx, &images)?.change_basis(ctx, &to_eps)?;
    }
    Ok(out)
}

/// The unique unitary `θ` whose first structure equations have (1,1) part
/// `(Θ^i)^{1,1}`; `NoUnitarySolution` if the full equations then fail.
pub fn connection_forms(ctx: &Ctx, coframe: Coframe, dphi: &[InvariantForm; 2], torsion: &[InvariantForm; 2]) -> Result<FormMatrix, ChernError> {
    let theta = connection_forms_unchecked(ctx, coframe, dphi, torsion)?;
    for i in 0..2 {
        let r = structure_residual(ctx, coframe, &dphi[i], &theta[i], &torsion[i])?;
        if !r.is_zero() {
            return Err(ChernError::NoUnitarySolution(format!("residual of equation {}: {r}", i + 1)));
        }
    }
    Ok(theta)
}

/// `dφ^i + θ^i_j∧φ^j − Θ^i`.
pub fn structure_residual(
    ctx: &Ctx,
    coframe: Coframe,
    dphi: &InvariantForm,
    theta_row: &[InvariantForm; 2],
    torsion: &InvariantForm,
) -> Result<InvariantForm, ChernError> {
    let mut r = dphi.sub(torsion)?;
    for (j, t) in theta_row.iter().enumerate() {
        r = r.add(&t.wedge(&InvariantForm::basis(coframe, j))?)?;
    }
    Ok(r.reduce(ctx))
}

/// `Θ^i` and `dφ^i`: the torsion of the unitary connection with no (1,1) torsion.
pub fn torsion_forms(model: &SolvmanifoldModel, j: &AcStructure, cf: &ComplexFrame) -> Result<([InvariantForm; 2], [InvariantForm; 2]), ChernError> {
    let ctx = &j.ctx;
    let dphi = [
        d_complex(model, ctx, cf, &InvariantForm::basis(cf.coframe, 0))?,
        d_complex(model, ctx, cf, &InvariantForm::basis(cf.coframe, 1))?,
    ];
    let no11 = [dphi[0].sub(&dphi[0].part(1, 1)?)?, dphi[1].sub(&dphi[1].part(1, 1)?)?];
    // θ from the (1,1) parts; the (2,0) torsion picks up α∧φ
    let theta = connection_forms_unchecked(ctx, cf.coframe, &dphi, &no11)?;
    let zero = InvariantForm::zero(cf.coframe, 2);
    let t = [
        structure_residual(ctx, cf.coframe, &dphi[0], &theta[0], &zero)?,
        structure_residual(ctx, cf.coframe, &dphi[1], &theta[1], &zero)?,
    ];
    Ok((t, dphi))
}

fn connection_forms_unchecked(ctx: &Ctx, coframe: Coframe, dphi: &[InvariantForm; 2], torsion: &[InvariantForm; 2]) -> Result<FormMatrix, ChernError> {
    let mut beta: FormMatrix = std::array::from_fn(|_| std::array::from_fn(|_| InvariantForm::zero(coframe, 1)));
    for i in 0..2 {
        let rhs = dphi[i].sub(&torsion[i])?.reduce(ctx);
        for j in 0..2 {
            for b in 0..2 {
                // β∧φ^j = −B φ^j∧φ̄^b
                let c = rhs.coeff(p11(j, b));
                if !c.is_zero() {
                    beta[i][j].add_term(1 << (2 + b), c);
                }
            }
        }
    }
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| beta[i][j].add(&beta[j][i].conj().neg()).expect("same coframe").reduce(ctx))
    }))
}

/// `ψ^i_j = dθ^i_j + θ^i_k∧θ^k_j`.
pub fn curvature_forms(model: &SolvmanifoldModel, ctx: &Ctx, cf: &ComplexFrame, theta: &FormMatrix) -> Result<FormMatrix, ChernError> {
    let mut psi: FormMatrix = std::array::from_fn(|_| std::array::from_fn(|_| InvariantForm::zero(cf.coframe, 2)));
    for i in 0..2 {
        for j in 0..2 {
            let mut f = d_complex(model, ctx, cf, &theta[i][j])?;
            for k in 0..2 {
                f = f.add(&theta[i][k].wedge(&theta[k][j])?)?;
            }
            psi[i][j] = f.reduce(ctx);
        }
    }
    Ok(psi)
}

/// `R^i_{j k l̄}`, `R_{k l̄}`, the Ricci form and the trace `Σ R_{k k̄}`.
pub fn ricci_scalar(ctx: &Ctx, psi: &FormMatrix) -> ([[[[Expr; 2]; 2]; 2]; 2], [[Expr; 2]; 2], InvariantForm, Expr) {
    let r: [[[[Expr; 2]; 2]; 2]; 2] =
        std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| std::array::from_fn(|l| psi[i][j].coeff(p11(k, l))))));
    let table: [[Expr; 2]; 2] = std::array::from_fn(|k| std::array::from_fn(|l| ctx.reduce(&(&r[0][0][k][l] + &r[1][1][k][l]))));
    let mut ricci = InvariantForm::zero(psi[0][0].coframe(), 2);
    for k in 0..2 {
        for l in 0..2 {
            if !table[k][l].is_zero() {
                ricci.add_term(p11(k, l), table[k][l].clone());
            }
        }
    }
    let scalar = ctx.reduce(&(&table[0][0] + &table[1][1]));
    (r, table, ricci, scalar)
}

/// `dψ − (ψ∧θ − θ∧ψ)`, entrywise; zero for a consistent connection.
pub fn bianchi_residual(model: &SolvmanifoldModel, ctx: &Ctx, cf: &ComplexFrame, theta: &FormMatrix, psi: &FormMatrix) -> Result<FormMatrix, ChernError> {
    let mut out: FormMatrix = std::array::from_fn(|_| std::array::from_fn(|_| InvariantForm::zero(cf.coframe, 3)));
    for i in 0..2 {
        for j in 0..2 {
            let mut f = d_complex(model, ctx, cf, &psi[i][j])?;
            for k in 0..2 {
                f = f.sub(&psi[i][k].wedge(&theta[k][j])?)?;
                f = f.add(&theta[i][k].wedge(&psi[k][j])?)?;
            }
            out[i][j] = f.reduce(ctx);
        }
    }
    Ok(out)
}

/// Full pipeline on the structure's unitary coframe.
pub fn connection(model: &SolvmanifoldModel, j: &AcStructure) -> Result<ConnectionData, ChernError> {
    let ctx = &j.ctx;
    let cf = unitary_frame(j)?;
    let (torsion, dphi) = torsion_forms(model, j, &cf)?;
    let theta = connection_forms(ctx, cf.coframe, &dphi, &torsion)?;
    let psi = curvature_forms(model, ctx, &cf, &theta)?;
    let (r, ricci_table, ricci, scalar) = ricci_scalar(ctx, &psi);
    let torsion_real = real_torsion(ctx, j, &cf, &torsion)?;
    Ok(ConnectionData { frame: cf, dphi, torsion, torsion_real, theta, psi, r, ricci_table, ricci, scalar })
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    pub manifold: String,
    pub structure: String,
    pub coframe: String,
    pub torsion: Vec<String>,
    pub torsion_real: Vec<String>,
    pub connection: Vec<Vec<String>>,
    pub curvature: Vec<Vec<String>>,
    pub ricci_table: Vec<Vec<String>>,
    pub ricci: String,
    pub scalar: String,
    pub chern_ricci_flat: bool,
    pub scalar_flat: bool,
}

impl ConnectionData {
    pub fn report(&self, manifold: &str, structure: &str) -> CurvatureReport {
        let fm = |m: &FormMatrix| m.iter().map(|r| r.iter().map(|f| f.to_string()).collect()).collect();
        CurvatureReport {
            manifold: manifold.to_string(),
            structure: structure.to_string(),
            coframe: self.frame.coframe.labels().join(","),
            torsion: self.torsion.iter().map(|f| f.to_string()).collect(),
            torsion_real: self.torsion_real.iter().map(|f| f.to_string()).collect(),
            connection: fm(&self.theta),
            curvature: fm(&self.psi),
            ricci_table: self.ricci_table.iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect(),
            ricci: self.ricci.to_string(),
            scalar: self.scalar.to_string(),
            chern_ricci_flat: self.ricci.is_zero(),
            scalar_flat: self.scalar.is_zero(),
        }
    }
}
