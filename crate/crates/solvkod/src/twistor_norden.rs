//! The almost hypercomplex triple `J₀, J₁, J₂`, constant twistor sections
//! `J = aJ₀ + bJ₁ + cJ₂` for the metric `g₀`, and the neutral metrics
//! `g̃_i` with their Norden structures and twin metrics.

use serde::Serialize;
use thiserror::Error;

use crate::acs::{fundamental_form, j0, j1, j2};
use crate::exterior::{hodge_star, Coframe, ExteriorError, InvariantForm};
use crate::linalg::{self, Mat};
use crate::scalar_expr::{Ctx, Expr, ExprError};
use crate::solvmanifold::SolvmanifoldModel;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TwistorError {
    #[error("a^2 + b^2 + c^2 = {0}, not 1")]
    SphereRelationViolated(String),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

pub fn hypercomplex() -> [Mat; 3] {
    [j0(), j1(), j2()]
}

pub fn g0() -> Mat {
    linalg::identity(4)
}

/// `g̃_i`: signs (+,+,−,−), (+,−,+,−), (+,−,−,+).
pub fn g_tilde(i: usize) -> Mat {
    let s: [[i64; 4]; 3] = [[1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]];
    let mut m = linalg::zeros(4, 4);
    for (k, v) in s[i].iter().enumerate() {
        m[k][k] = Expr::int(*v);
    }
    m
}

/// `ω_i = g₀(J_i·,·)`.
pub fn omega(ctx: &Ctx, i: usize) -> InvariantForm {
    fundamental_form(ctx, &hypercomplex()[i], &g0())
}

/// `ω̃_i = g̃_i(J_i·,·)`.
pub fn omega_tilde(ctx: &Ctx, i: usize) -> InvariantForm {
    fundamental_form(ctx, &hypercomplex()[i], &g_tilde(i))
}

/// `ĝ_{ij} = g̃_i(·, J_j·)`.
pub fn twin_metric(ctx: &Ctx, i: usize, j: usize) -> Mat {
    linalg::mul(ctx, &g_tilde(i), &hypercomplex()[j])
}

/// `g(J·,J·) = g`.
pub fn is_invariant(ctx: &Ctx, j: &Mat, g: &Mat) -> bool {
    linalg::equal(ctx, &linalg::mul(ctx, &linalg::mul(ctx, &linalg::transpose(j), g), j), g)
}

/// `g(J·,·) = g(·,J·)`.
pub fn is_symmetric(ctx: &Ctx, j: &Mat, g: &Mat) -> bool {
    linalg::equal(ctx, &linalg::mul(ctx, &linalg::transpose(j), g), &linalg::mul(ctx, g, j))
}

fn squares_to_minus_one(ctx: &Ctx, j: &Mat) -> bool {
    linalg::equal(ctx, &linalg::mul(ctx, j, j), &linalg::neg(&linalg::identity(4)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HypercomplexReport {
    pub squares: [bool; 3],
    pub anticommute: bool,
    pub j2_is_j0j1: bool,
    pub j1j2_is_j0: bool,
    pub j2j0_is_j1: bool,
    pub metric_invariant: [bool; 3],
}

impl HypercomplexReport {
    pub fn ok(&self) -> bool {
        self.squares.iter().chain(&self.metric_invariant).all(|b| *b) && self.anticommute && self.j2_is_j0j1 && self.j1j2_is_j0 && self.j2j0_is_j1
    }
}

pub fn hypercomplex_check(ctx: &Ctx, js: &[Mat; 3]) -> HypercomplexReport {
    let m = |a: &Mat, b: &Mat| linalg::mul(ctx, a, b);
    HypercomplexReport {
        squares: std::array::from_fn(|i| squares_to_minus_one(ctx, &js[i])),
        anticommute: linalg::equal(ctx, &m(&js[0], &js[1]), &linalg::neg(&m(&js[1], &js[0]))),
        j2_is_j0j1: linalg::equal(ctx, &js[2], &m(&js[0], &js[1])),
        j1j2_is_j0: linalg::equal(ctx, &js[0], &m(&js[1], &js[2])),
        j2j0_is_j1: linalg::equal(ctx, &js[1], &m(&js[2], &js[0])),
        metric_invariant: std::array::from_fn(|i| is_invariant(ctx, &js[i], &g0())),
    }
}

/// A constant section `J = aJ₀ + bJ₁ + cJ₂` of the twistor bundle of `(M, g₀)`.
#[derive(Clone, Debug)]
pub struct TwistorSection {
    pub coeffs: [Expr; 3],
    pub matrix: Mat,
    pub omega: InvariantForm,
}

pub fn twistor_section(ctx: &Ctx, a: &Expr, b: &Expr, c: &Expr) -> Result<TwistorSection, TwistorError> {
    let norm = ctx.reduce(&(&(&(a * a) + &(b * b)) + &(c * c)));
    if !ctx.equal(&norm, &Expr::one()) {
        return Err(TwistorError::SphereRelationViolated(norm.to_string()));
    }
    let coeffs = [a.clone(), b.clone(), c.clone()];
    let hc = hypercomplex();
    let mut matrix = linalg::zeros(4, 4);
    let mut om = InvariantForm::zero(Coframe::E, 2);
    for i in 0..3 {
        matrix = linalg::reduce(ctx, &linalg::add(&matrix, &linalg::scale(&hc[i], &coeffs[i])));
        om = om.add(&omega(ctx, i).scale(&coeffs[i]))?;
    }
    Ok(TwistorSection { coeffs, matrix, omega: om.reduce(ctx) })
}

impl TwistorSection {
    pub fn is_acs(&self, ctx: &Ctx) -> bool {
        squares_to_minus_one(ctx, &self.matrix)
    }

    /// `ω(J·,J·) = ω`.
    pub fn omega_invariant(&self, ctx: &Ctx) -> bool {
        let w = self.omega.to_matrix();
        is_invariant(ctx, &self.matrix, &w)
    }

    /// `ω = g₀(J·,·)`.
    pub fn omega_matches_metric(&self, ctx: &Ctx) -> bool {
        self.omega.equal(ctx, &fundamental_form(ctx, &self.matrix, &g0()))
    }
}

/// Kernel of a 4×3 matrix over the parameter field, for generic parameter values.
fn kernel3(ctx: &Ctx, rows: &Mat) -> Vec<[Expr; 3]> {
    let nz = |e: &Expr| !ctx.is_zero(e);
    let cross = |u: &[Expr], v: &[Expr]| -> [Expr; 3] {
        std::array::from_fn(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            ctx.reduce(&(&(&u[j] * &v[k]) - &(&u[k] * &v[j])))
        })
    };
    let rank = if (0..rows.len()).any(|a| {
        (a + 1..rows.len()).any(|b| (b + 1..rows.len()).any(|c| nz(&linalg::det(ctx, &vec![rows[a].clone(), rows[b].clone(), rows[c].clone()]))))
    }) {
        3
    } else if (0..rows.len()).any(|a| (a + 1..rows.len()).any(|b| cross(&rows[a], &rows[b]).iter().any(nz))) {
        2
    } else if rows.iter().flatten().any(nz) {
        1
    } else {
        0
    };
    let unit = |i: usize| -> [Expr; 3] { std::array::from_fn(|k| Expr::int((k == i) as i64)) };
    let normalize = |v: [Expr; 3]| -> [Expr; 3] {
        let lead = v.iter().find(|e| nz(e)).cloned().expect("nonzero kernel vector");
        match ctx.try_inv(&lead) {
            Ok(inv) => std::array::from_fn(|k| ctx.reduce(&(&v[k] * &inv))),
            Err(_) => v,
        }
    };
    match rank {
        3 => vec![],
        2 => {
            for a in 0..rows.len() {
                for b in a + 1..rows.len() {
                    let v = cross(&rows[a], &rows[b]);
                    if v.iter().any(nz) {
                        return vec![normalize(v)];
                    }
                }
            }
            unreachable!()
        }
        1 => {
            let r = rows.iter().find(|r| r.iter().any(nz)).expect("rank 1");
            let mut out: Vec<[Expr; 3]> = Vec::new();
            for i in 0..3 {
                // r × e_i lies in r^⊥
                let v = cross(r, &unit(i));
                let indep = match out.len() {
                    0 => v.iter().any(nz),
                    _ => cross(&out[0], &v).iter().any(nz),
                };
                if indep {
                    out.push(v);
                }
                if out.len() == 2 {
                    break;
                }
            }
            out.into_iter().map(normalize).collect()
        }
        _ => (0..3).map(unit).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct TwistorReport {
    pub d_omega: [InvariantForm; 3],
    pub self_dual: [bool; 3],
    /// Basis of `{(a,b,c) constant : d(aω₀ + bω₁ + cω₂) = 0}`.
    pub closed_sections: Vec<[Expr; 3]>,
}

pub fn twistor_closedness_report(m: &SolvmanifoldModel) -> Result<TwistorReport, TwistorError> {
    let ctx = &m.ctx;
    let d_omega: [InvariantForm; 3] = [m.d(&omega(ctx, 0))?, m.d(&omega(ctx, 1))?, m.d(&omega(ctx, 2))?];
    let mut self_dual = [false; 3];
    for (i, sd) in self_dual.iter_mut().enumerate() {
        let w = omega(ctx, i);
        *sd = hodge_star(ctx, &w, &g0())?.equal(ctx, &w);
    }
    Ok(TwistorReport { closed_sections: closed_span(ctx, &d_omega), d_omega, self_dual })
}

/// Constant combinations of three invariant 2-forms, given their differentials, that are closed.
pub fn closed_span(ctx: &Ctx, d: &[InvariantForm; 3]) -> Vec<[Expr; 3]> {
    let masks = [0b0111u8, 0b1011, 0b1101, 0b1110];
    let rows: Mat = masks.iter().map(|mk| d.iter().map(|f| f.coeff(*mk)).collect()).collect();
    kernel3(ctx, &rows)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NordenEntry {
    pub metric: usize,
    pub structure: usize,
    /// `J` is `g̃`-symmetric.
    pub norden: bool,
    /// `g̃(J·,J·) = g̃`.
    pub pseudo_hermitian: bool,
}

#[derive(Clone, Debug)]
pub struct NordenReport {
    pub classification: Vec<NordenEntry>,
    /// `((i, j), ĝ_{ij})` for `i ≠ j`.
    pub twins: Vec<((usize, usize), Mat)>,
    pub d_omega_tilde: [InvariantForm; 3],
}

pub fn norden_classification(ctx: &Ctx) -> Vec<NordenEntry> {
    let hc = hypercomplex();
    let mut out = Vec::new();
    for i in 0..3 {
        for (j, jm) in hc.iter().enumerate() {
            out.push(NordenEntry {
                metric: i,
                structure: j,
                norden: is_symmetric(ctx, jm, &g_tilde(i)),
                pseudo_hermitian: is_invariant(ctx, jm, &g_tilde(i)),
            });
        }
    }
    out
}

pub fn norden_report(m: &SolvmanifoldModel) -> Result<NordenReport, TwistorError> {
    let ctx = &m.ctx;
    let mut twins = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                twins.push(((i, j), twin_metric(ctx, i, j)));
            }
        }
    }
    Ok(NordenReport {
        classification: norden_classification(ctx),
        twins,
        d_omega_tilde: [m.d(&omega_tilde(ctx, 0))?, m.d(&omega_tilde(ctx, 1))?, m.d(&omega_tilde(ctx, 2))?],
    })
}

/// Symmetric bilinear form as `Σ c·e^i⊗e^j` over all nonzero entries.
pub fn render_metric(g: &Mat) -> String {
    let mut terms = Vec::new();
    for (i, row) in g.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let s = c.to_string();
            let basis = format!("e{}*e{}", i + 1, j + 1);
            terms.push(match s.as_str() {
                "1" => basis,
                "-1" => format!("-{basis}"),
                _ => format!("({s})*{basis}"),
            });
        }
    }
    if terms.is_empty() {
        return "0".into();
    }
    terms.join(" + ").replace("+ -", "- ")
}

#[derive(Clone, Debug, Serialize)]
pub struct TwistorJson {
    pub manifold: String,
    pub hypercomplex: HypercomplexReport,
    pub omega: Vec<String>,
    pub d_omega: Vec<String>,
    pub self_dual: [bool; 3],
    pub closed_sections: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NordenJson {
    pub manifold: String,
    pub classification: Vec<NordenEntry>,
    pub omega_tilde: Vec<String>,
    pub d_omega_tilde: Vec<String>,
    pub twins: Vec<(String, String)>,
}

impl TwistorReport {
    pub fn to_json(&self, ctx: &Ctx, manifold: &str) -> TwistorJson {
        TwistorJson {
            manifold: manifold.into(),
            hypercomplex: hypercomplex_check(ctx, &hypercomplex()),
            omega: (0..3).map(|i| omega(ctx, i).to_string()).collect(),
            d_omega: self.d_omega.iter().map(|f| f.to_string()).collect(),
            self_dual: self.self_dual,
            closed_sections: self.closed_sections.iter().map(|v| v.iter().map(|e| e.to_string()).collect()).collect(),
        }
    }
}

impl NordenReport {
    pub fn to_json(&self, ctx: &Ctx, manifold: &str) -> NordenJson {
        NordenJson {
            manifold: manifold.into(),
            classification: self.classification.clone(),
            omega_tilde: (0..3).map(|i| omega_tilde(ctx, i).to_string()).collect(),
            d_omega_tilde: self.d_omega_tilde.iter().map(|f| f.to_string()).collect(),
            twins: self.twins.iter().map(|((i, j), g)| (format!("g{i}{j}"), render_metric(g))).collect(),
        }
    }
}
