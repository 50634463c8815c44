//! Canonical bundle calculus: `∂̄φ^i`, the torsion form `ω` with
//! `∂̄(φ¹∧φ²) = ω ⊗ φ¹∧φ²`, and the pseudoholomorphic-section system
//! `∂̄f + m f ω = 0` written in coordinates.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::acs::{adapted_coframe, AcStructure, AcsError, ComplexFrame};
use crate::exterior::{ExteriorError, InvariantForm};
use crate::scalar_expr::{Ctx, Expr, ExprError};
use crate::solvmanifold::SolvmanifoldModel;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CanonicalError {
    #[error(transparent)]
    Acs(#[from] AcsError),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// `dφ^i` and their bidegree pieces on the complex coframe.
#[derive(Clone, Debug)]
pub struct StructureEquations {
    pub frame: ComplexFrame,
    pub dphi: [InvariantForm; 2],
    pub dbar_phi: [InvariantForm; 2],
    /// `(2,1)` part of `d(φ¹∧φ²)`.
    pub dbar_sigma: InvariantForm,
}

#[derive(Clone, Debug)]
pub struct CanonicalTorsion {
    /// `(0,1)`-form with `∂̄σ = ω ⊗ σ`.
    pub omega: InvariantForm,
    /// Sign relating `τ ∧ φ¹∧φ²` to `ω ⊗ σ`: moving a 1-form past a 2-form.
    pub convention_sign: i64,
}

impl CanonicalTorsion {
    /// `ω ⊗ (φ1^phi2)` rendering.
    pub fn tensor_rendering(&self) -> String {
        format!("({}) (x) phi1^phi2", self.omega)
    }

    /// `τ ∧ φ¹∧φ²` rendering with `τ = convention_sign·ω`.
    pub fn wedge_rendering(&self) -> String {
        let t = if self.convention_sign < 0 { self.omega.neg() } else { self.omega.clone() };
        format!("({}) ^ phi1^phi2", t)
    }

    /// Coefficients `w_j` of `ω = w₁φ̄¹ + w₂φ̄²`.
    pub fn components(&self) -> [Expr; 2] {
        [self.omega.coeff(0b0100), self.omega.coeff(0b1000)]
    }
}

/// `d` of a 1-form given on the invariant coframe, returned on the complex one.
fn d_complex(model: &SolvmanifoldModel, ctx: &Ctx, cf: &ComplexFrame, e_form: &InvariantForm) -> Result<InvariantForm, CanonicalError> {
    let d = e_form.d_with(ctx, &model.d_basis())?;
    Ok(cf.to_complex(ctx, &d)?)
}

pub fn structure_equations_with(model: &SolvmanifoldModel, j: &AcStructure, cf: ComplexFrame) -> Result<StructureEquations, CanonicalError> {
    let ctx = &j.ctx;
    let d1 = d_complex(model, ctx, &cf, &cf.phi_in_e(0))?;
    let d2 = d_complex(model, ctx, &cf, &cf.phi_in_e(1))?;
    let dbar_phi = [d1.part(1, 1)?, d2.part(1, 1)?];
    let sigma = cf.phi_in_e(0).wedge(&cf.phi_in_e(1))?;
    let ds = d_complex(model, ctx, &cf, &sigma)?;
    let dbar_sigma = ds.part(2, 1)?;
    Ok(StructureEquations { frame: cf, dphi: [d1, d2], dbar_phi, dbar_sigma })
}

pub fn structure_equations(model: &SolvmanifoldModel, j: &AcStructure) -> Result<StructureEquations, CanonicalError> {
    structure_equations_with(model, j, adapted_coframe(j)?)
}

pub fn torsion_from(se: &StructureEquations) -> CanonicalTorsion {
    let cf = se.dbar_sigma.coframe();
    let mut omega = InvariantForm::zero(cf, 1);
    // φ¹∧φ²∧φ̄^k ↔ φ̄^k ⊗ σ
    for k in [2usize, 3] {
        let c = se.dbar_sigma.coeff(0b0011 | (1 << k));
        if !c.is_zero() {
            omega.add_term(1 << k, c);
        }
    }
    CanonicalTorsion { omega, convention_sign: 1 }
}

pub fn canonical_torsion(model: &SolvmanifoldModel, j: &AcStructure) -> Result<CanonicalTorsion, CanonicalError> {
    Ok(torsion_from(&structure_equations(model, j)?))
}

/// Leibniz expansion of `∂̄(σ^{⊗m})`: one `ω` per tensor slot.
pub fn dbar_tensor_power(t: &CanonicalTorsion, m: u32) -> InvariantForm {
    let mut acc = InvariantForm::zero(t.omega.coframe(), 1);
    for _ in 0..m {
        acc = acc.add(&t.omega).expect("same coframe");
    }
    acc
}

/// `X̄_j f + m w_j f = 0` with `X̄_j` realized in coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexEquation {
    /// Coefficient of `∂f/∂c` for every coordinate `c`.
    pub deriv: BTreeMap<String, Expr>,
    /// Coefficient of `f`.
    pub zeroth: Expr,
}

/// Real first-order equation in `(u, v)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealPde {
    pub du: BTreeMap<String, Expr>,
    pub dv: BTreeMap<String, Expr>,
    pub u: Expr,
    pub v: Expr,
}

#[derive(Clone, Debug)]
pub struct PluriSystem {
    pub power: Expr,
    pub torsion: CanonicalTorsion,
    pub complex: [ComplexEquation; 2],
    /// `Re`, `Im` of the first equation, then of the second.
    pub real: Vec<RealPde>,
}

fn realize(model: &SolvmanifoldModel, ctx: &Ctx, field: &[Expr]) -> BTreeMap<String, Expr> {
    let mut out = BTreeMap::new();
    for (c, name) in model.coordinates.iter().enumerate() {
        let s: Expr = (0..4).filter(|&i| !field[i].is_zero()).map(|i| &field[i] * &model.frame[i][c]).sum();
        let s = ctx.reduce(&s);
        if !s.is_zero() {
            out.insert(name.clone(), s);
        }
    }
    out
}

fn split(ctx: &Ctx, e: &Expr) -> (Expr, Expr) {
    let e = ctx.reduce(e);
    (ctx.reduce(&e.re()), ctx.reduce(&e.im()))
}

pub fn real_parts(ctx: &Ctx, eq: &ComplexEquation) -> [RealPde; 2] {
    let mut re = RealPde { du: BTreeMap::new(), dv: BTreeMap::new(), u: Expr::zero(), v: Expr::zero() };
    let mut im = re.clone();
    for (c, d) in &eq.deriv {
        let (a, b) = split(ctx, d);
        // (a + ib)(u_c + i v_c)
        if !a.is_zero() {
            re.du.insert(c.clone(), a.clone());
            im.dv.insert(c.clone(), a);
        }
        if !b.is_zero() {
            re.dv.insert(c.clone(), -&b);
            im.du.insert(c.clone(), b);
        }
    }
    let (p, q) = split(ctx, &eq.zeroth);
    re.u = p.clone();
    re.v = -&q;
    im.u = q;
    im.v = p;
    [re, im]
}

pub fn pluricanonical_system_with(
    model: &SolvmanifoldModel,
    j: &AcStructure,
    se: &StructureEquations,
    power: &Expr,
) -> PluriSystem {
    let ctx = &j.ctx;
    let torsion = torsion_from(se);
    let w = torsion.components();
    let fields = se.frame.field_rows();
    let complex: [ComplexEquation; 2] = std::array::from_fn(|k| ComplexEquation {
        deriv: realize(model, ctx, &fields[2 + k]),
        zeroth: ctx.reduce(&(power * &w[k])),
    });
    let mut real = Vec::new();
    for e in &complex {
        real.extend(real_parts(ctx, e));
    }
    PluriSystem { power: power.clone(), torsion, complex, real }
}

pub fn pluricanonical_system(model: &SolvmanifoldModel, j: &AcStructure, power: &Expr) -> Result<PluriSystem, CanonicalError> {
    let se = structure_equations(model, j)?;
    Ok(pluricanonical_system_with(model, j, &se, power))
}

/// `1` when the constant sections are pseudoholomorphic (`ω = 0`), else `0`.
pub fn invariant_plurigenus(ctx: &Ctx, t: &CanonicalTorsion) -> u32 {
    if t.omega.coeffs().values().all(|c| ctx.is_zero(c)) {
        1
    } else {
        0
    }
}

impl RealPde {
    /// All coefficients in a fixed order: `du` by coordinate, `dv`, then `u`, `v`.
    pub fn entries(&self, coords: &[String]) -> Vec<Expr> {
        let mut out = Vec::new();
        for c in coords {
            out.push(self.du.get(c).cloned().unwrap_or_else(Expr::zero));
        }
        for c in coords {
            out.push(self.dv.get(c).cloned().unwrap_or_else(Expr::zero));
        }
        out.push(self.u.clone());
        out.push(self.v.clone());
        out
    }

    pub fn scale(&self, ctx: &Ctx, s: &Expr) -> RealPde {
        let m = |e: &Expr| ctx.reduce(&(e * s));
        RealPde {
            du: self.du.iter().map(|(k, v)| (k.clone(), m(v))).filter(|(_, v)| !v.is_zero()).collect(),
            dv: self.dv.iter().map(|(k, v)| (k.clone(), m(v))).filter(|(_, v)| !v.is_zero()).collect(),
            u: m(&self.u),
            v: m(&self.v),
        }
    }

    /// Equality after multiplying `self` by `s`.
    pub fn matches_scaled(&self, ctx: &Ctx, s: &Expr, other: &RealPde, coords: &[String]) -> bool {
        let a = self.scale(ctx, s).entries(coords);
        let b = other.entries(coords);
        a.iter().zip(&b).all(|(x, y)| ctx.equal(x, y))
    }

    /// `coef*u_x + ... + coef*u` layout.
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        let term = |c: &Expr, what: &str| -> String {
            if c.is_one() {
                what.to_string()
            } else if (-c).is_one() {
                format!("-{what}")
            } else if c.num_terms() > 1 {
                format!("({c})*{what}")
            } else {
                format!("{c}*{what}")
            }
        };
        for (c, e) in &self.du {
            parts.push(term(e, &format!("u_{c}")));
        }
        for (c, e) in &self.dv {
            parts.push(term(e, &format!("v_{c}")));
        }
        if !self.u.is_zero() {
            parts.push(term(&self.u, "u"));
        }
        if !self.v.is_zero() {
            parts.push(term(&self.v, "v"));
        }
        if parts.is_empty() {
            return "0 = 0".into();
        }
        let mut s = parts[0].clone();
        for p in &parts[1..] {
            match p.strip_prefix('-') {
                Some(rest) => {
                    s.push_str(" - ");
                    s.push_str(rest);
                }
                None => {
                    s.push_str(" + ");
                    s.push_str(p);
                }
            }
        }
        s.push_str(" = 0");
        s
    }

    /// Parses the `coef*u_x + … = 0` layout produced by [`RealPde::render`].
    pub fn parse(ctx: &Ctx, coords: &[String], s: &str) -> Result<RealPde, ExprError> {
        let lhs = s.split('=').next().unwrap_or("").trim();
        let mut out = RealPde { du: BTreeMap::new(), dv: BTreeMap::new(), u: Expr::zero(), v: Expr::zero() };
        // substitute unknowns by fresh symbols and read off linear coefficients
        let mut c = ctx.clone();
        let mut names = Vec::new();
        for x in coords {
            names.push((format!("u_{x}"), format!("uu{x}")));
            names.push((format!("v_{x}"), format!("vv{x}")));
        }
        let mut text = lhs.to_string();
        for (from, to) in &names {
            text = text.replace(from.as_str(), to);
        }
        for (_, to) in &names {
            c.param(to);
        }
        c.param("u").param("v");
        let e = c.parse(&text)?;
        for x in coords {
            let cu = e.collect_powers(&format!("uu{x}")).remove(&1).unwrap_or_else(Expr::zero);
            let cv = e.collect_powers(&format!("vv{x}")).remove(&1).unwrap_or_else(Expr::zero);
            if !cu.is_zero() {
                out.du.insert(x.clone(), cu);
            }
            if !cv.is_zero() {
                out.dv.insert(x.clone(), cv);
            }
        }
        out.u = e.collect_powers("u").remove(&1).unwrap_or_else(Expr::zero);
        out.v = e.collect_powers("v").remove(&1).unwrap_or_else(Expr::zero);
        Ok(out)
    }
}

/// JSON-friendly snapshot of the canonical bundle data.
#[derive(Clone, Debug, Serialize)]
pub struct CanonicalReport {
    pub dphi: [String; 2],
    pub dbar_phi: [String; 2],
    pub dbar_sigma: String,
    pub omega: String,
    pub wedge_form: String,
    pub invariant_plurigenus: u32,
    pub system: Vec<String>,
}

pub fn report(model: &SolvmanifoldModel, j: &AcStructure, power: &Expr) -> Result<CanonicalReport, CanonicalError> {
    let se = structure_equations(model, j)?;
    let sys = pluricanonical_system_with(model, j, &se, power);
    Ok(CanonicalReport {
        dphi: [se.dphi[0].to_string(), se.dphi[1].to_string()],
        dbar_phi: [se.dbar_phi[0].to_string(), se.dbar_phi[1].to_string()],
        dbar_sigma: se.dbar_sigma.to_string(),
        omega: sys.torsion.omega.to_string(),
        wedge_form: sys.torsion.wedge_rendering(),
        invariant_plurigenus: invariant_plurigenus(&j.ctx, &sys.torsion),
        system: sys.real.iter().map(|r| r.render()).collect(),
    })
}
