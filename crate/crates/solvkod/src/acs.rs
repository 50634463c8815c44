//! Invariant almost complex structures: registry, `J² = −I`, Nijenhuis
//! tensor, adapted (1,0)-coframes and compatibility with forms and metrics.
//!
//! `matrix` acts on frame components: column `j` holds `J e_j`.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::exterior::{Coframe, InvariantForm};
use crate::linalg::{self, Mat};
use crate::scalar_expr::{Ctx, Expr, ExprError, SymbolKind};
use crate::solvmanifold::SolvmanifoldModel;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AcsError {
    #[error("unknown structure `{name}` on {manifold}")]
    UnknownStructure { manifold: String, name: String },
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("unknown parameter `{0}` for this structure")]
    UnknownParam(String),
    #[error("parameter `{name}` = {value}: {why}")]
    ParamOutOfRange { name: String, value: String, why: String },
    #[error("(a, b, c) = ({0}, {1}, {2}) is not on the unit sphere")]
    SphereRelationViolated(String, String, String),
    #[error("J^2 != -I")]
    NotAlmostComplex,
    #[error("frame is not adapted: {0}")]
    FrameNotAdapted(String),
    #[error("structure `{0}` has no adapted frame for these parameters")]
    MissingFrame(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug)]
pub struct AcStructure {
    pub name: String,
    pub manifold: String,
    /// Model context extended by the structure's symbols and relations.
    pub ctx: Ctx,
    pub matrix: Mat,
    /// Real frame `ε_i` (rows over `e_j`) with `Jε₁ = ε₂`, `Jε₃ = ε₄`.
    pub frame: Option<Mat>,
    /// `φ^j = norm·(ε^{2j−1} + iε^{2j})`.
    pub norm: Expr,
    /// `Φ = unitary_scale·φ` is unitary for `metric`.
    pub unitary_scale: Expr,
    pub metric: Option<Mat>,
    pub form: Option<InvariantForm>,
    /// Bound parameter values.
    pub params: BTreeMap<String, Expr>,
    /// Parameter values at the deformation origin of the family.
    pub origin: BTreeMap<String, Expr>,
}

/// Complex (1,0)-coframe and its dual fields, all on the invariant frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexFrame {
    /// `φ¹, φ²` over `e^1..e^4`.
    pub phi: [Vec<Expr>; 2],
    /// `𝒳₁, 𝒳₂` over `e_1..e_4`.
    pub fields: [Vec<Expr>; 2],
    pub coframe: Coframe,
}

fn p(ctx: &Ctx, s: &str) -> Expr {
    ctx.parse(s).unwrap_or_else(|e| panic!("registry expression `{s}`: {e}"))
}

fn pm(ctx: &Ctx, rows: [[&str; 4]; 4]) -> Mat {
    rows.iter().map(|r| r.iter().map(|s| p(ctx, s)).collect()).collect()
}

pub fn j0() -> Mat {
    linalg::from_i64(&[&[0, -1, 0, 0], &[1, 0, 0, 0], &[0, 0, 0, -1], &[0, 0, 1, 0]])
}

pub fn j1() -> Mat {
    linalg::from_i64(&[&[0, 0, -1, 0], &[0, 0, 0, 1], &[1, 0, 0, 0], &[0, -1, 0, 0]])
}

pub fn j2() -> Mat {
    linalg::from_i64(&[&[0, 0, 0, -1], &[0, 0, -1, 0], &[0, 1, 0, 0], &[1, 0, 0, 0]])
}

/// Names available on a built-in manifold.
pub fn structure_names(manifold: &str) -> &'static [&'static str] {
    match manifold {
        "Mk" => &["Js", "Jr", "J0", "J1", "J2", "Jabc"],
        "N" => &["J", "Jp", "Ja", "J0", "J1", "J2", "Jabc"],
        "Mlambda" => &["J", "J0", "J1", "J2", "Jabc"],
        _ => &["J0", "J1", "J2", "Jabc"],
    }
}

/// Parameter names accepted by a structure family.
pub fn structure_params(name: &str) -> &'static [&'static str] {
    match name {
        "Js" => &["alpha1", "gamma1", "alpha2", "gamma2", "r1", "s1", "r2", "s2"],
        "Jr" => &["r"],
        "Ja" => &["a"],
        "Jabc" => &["a", "b", "c"],
        _ => &[],
    }
}

fn identity_metric() -> Mat {
    linalg::identity(4)
}

fn base(model: &SolvmanifoldModel, name: &str, matrix: Mat, frame: Option<Mat>) -> AcStructure {
    AcStructure {
        name: name.into(),
        manifold: model.name.clone(),
        ctx: model.ctx.clone(),
        matrix,
        frame,
        norm: Expr::one(),
        unitary_scale: Expr::one(),
        metric: None,
        form: None,
        params: BTreeMap::new(),
        origin: BTreeMap::new(),
    }
}

fn sqrt2_2() -> Expr {
    Expr::int(2).sqrt().scale_ratio(&num_rational::BigRational::new(1.into(), 2.into()))
}

/// Fundamental form `g(J·,·)`.
pub fn fundamental_form(ctx: &Ctx, j: &Mat, g: &Mat) -> InvariantForm {
    InvariantForm::from_matrix(Coframe::E, &linalg::mul(ctx, &linalg::transpose(j), g))
}

fn perm_frame(rows: [[i64; 4]; 4]) -> Mat {
    let r: Vec<&[i64]> = rows.iter().map(|r| &r[..]).collect();
    linalg::from_i64(&r)
}

fn js(model: &SolvmanifoldModel) -> AcStructure {
    let mut ctx = model.ctx.clone();
    for s in ["alpha1", "alpha2", "beta1", "beta2"] {
        ctx.declare(s, SymbolKind::Param, false);
    }
    ctx.param_inv("gamma1").param_inv("gamma2");
    for i in 1..=2 {
        let lhs = p(&ctx, &format!("beta{i}"));
        let rhs = p(&ctx, &format!("-(1 + alpha{i}^2)/gamma{i}"));
        ctx.add_rule(&lhs, rhs);
    }
    let mut matrix = pm(
        &ctx,
        [["alpha1", "0", "0", "0"], ["gamma1", "-alpha1", "0", "0"], ["0", "0", "alpha2", "0"], ["0", "0", "gamma2", "-alpha2"]],
    );
    // kept as symbols so the relation stays visible in J²
    matrix[0][1] = Expr::sym("beta1");
    matrix[2][3] = Expr::sym("beta2");
    let frame = pm(
        &ctx,
        [
            ["1/sqrt(gamma1)", "0", "0", "0"],
            ["alpha1/sqrt(gamma1)", "sqrt(gamma1)", "0", "0"],
            ["0", "0", "1/sqrt(gamma2)", "0"],
            ["0", "0", "alpha2/sqrt(gamma2)", "sqrt(gamma2)"],
        ],
    );
    let metric = pm(
        &ctx,
        [
            ["gamma1", "-alpha1", "0", "0"],
            ["-alpha1", "-beta1", "0", "0"],
            ["0", "0", "gamma2", "-alpha2"],
            ["0", "0", "-alpha2", "-beta2"],
        ],
    );
    let form = InvariantForm::parse(&ctx, Coframe::E, "e1^e2 + e3^e4").expect("form");
    let mut s = base(model, "Js", matrix, Some(frame));
    s.ctx = ctx;
    s.norm = sqrt2_2();
    s.metric = Some(metric);
    s.form = Some(form);
    for (k, v) in [("alpha1", 0), ("alpha2", 0), ("gamma1", 1), ("gamma2", 1), ("beta1", -1), ("beta2", -1)] {
        s.origin.insert(k.into(), Expr::int(v));
    }
    s
}

fn jr(model: &SolvmanifoldModel) -> AcStructure {
    let mut ctx = model.ctx.clone();
    ctx.param("r").param_inv("alpha");
    let l1 = p(&ctx, "alpha^-1");
    let r1 = p(&ctx, "3*r^2 - 2*r + 1");
    ctx.add_rule(&l1, r1);
    let l2 = p(&ctx, "alpha*r^2");
    let r2 = p(&ctx, "(2*alpha*r - alpha + 1)/3");
    ctx.add_rule(&l2, r2);
    let inner = pm(
        &ctx,
        [
            ["0", "-(1 - r)^2", "2*r^2", "-2*r*(1 - r)"],
            ["(1 - r)^2", "0", "-2*r*(1 - r)", "-2*r^2"],
            ["-2*r^2", "2*r*(1 - r)", "0", "-(1 - r)^2"],
            ["2*r*(1 - r)", "2*r^2", "(1 - r)^2", "0"],
        ],
    );
    let matrix = linalg::reduce(&ctx, &linalg::scale(&inner, &Expr::sym("alpha")));
    let fr = pm(
        &ctx,
        [["1 - r", "r", "-r", "0"], ["-r", "1 - r", "0", "r"], ["r", "0", "1 - r", "r"], ["0", "-r", "-r", "1 - r"]],
    );
    let frame = linalg::scale(&fr, &Expr::sym("alpha").sqrt());
    let mut s = base(model, "Jr", matrix, Some(frame));
    s.metric = Some(identity_metric());
    s.form = Some(fundamental_form(&ctx, &s.matrix, &identity_metric()));
    s.ctx = ctx;
    s.norm = sqrt2_2();
    s.origin.insert("r".into(), Expr::zero());
    s.origin.insert("alpha".into(), Expr::one());
    s
}

fn n_j(model: &SolvmanifoldModel) -> AcStructure {
    let ctx = &model.ctx;
    let matrix = linalg::from_i64(&[&[0, 0, 0, -1], &[0, 0, -1, 0], &[0, 1, 0, 0], &[1, 0, 0, 0]]);
    let frame = perm_frame([[1, 0, 0, 0], [0, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0]]);
    let form = InvariantForm::parse(ctx, Coframe::E, "e1^e4 + e2^e3").expect("form");
    let mut s = base(model, "J", matrix, Some(frame));
    s.metric = Some(linalg::mul(ctx, &form.to_matrix(), &s.matrix));
    s.form = Some(form);
    s.unitary_scale = sqrt2_2();
    s
}

fn n_jp(model: &SolvmanifoldModel) -> AcStructure {
    let ctx = &model.ctx;
    let mut s = base(model, "Jp", j0(), Some(linalg::identity(4)));
    s.metric = Some(identity_metric());
    s.form = Some(InvariantForm::parse(ctx, Coframe::E, "e1^e4 + e2^e3").expect("form"));
    s.unitary_scale = sqrt2_2();
    s
}

fn n_ja(model: &SolvmanifoldModel) -> AcStructure {
    let mut ctx = model.ctx.clone();
    ctx.param_inv("a");
    let matrix = pm(&ctx, [["0", "0", "-a", "0"], ["0", "0", "0", "-1"], ["1/a", "0", "0", "0"], ["0", "1", "0", "0"]]);
    let frame = pm(&ctx, [["1", "0", "0", "0"], ["0", "0", "1/a", "0"], ["0", "1", "0", "0"], ["0", "0", "0", "1"]]);
    let mut s = base(model, "Ja", matrix, Some(frame));
    s.ctx = ctx;
    s
}

fn ml_j(model: &SolvmanifoldModel) -> AcStructure {
    let mut s = base(model, "J", j0(), Some(linalg::identity(4)));
    s.metric = Some(identity_metric());
    s.form = Some(fundamental_form(&model.ctx, &s.matrix, &identity_metric()));
    s.unitary_scale = sqrt2_2();
    s
}

fn twistor_matrix(ctx: &Ctx, a: &Expr, b: &Expr, c: &Expr) -> Mat {
    let t = linalg::add(&linalg::add(&linalg::scale(&j0(), a), &linalg::scale(&j1(), b)), &linalg::scale(&j2(), c));
    linalg::reduce(ctx, &t)
}

/// Adapted frame `ε₁ = be₁ + ce₂ − ae₄, ε₂ = e₃, ε₃ = ce₁ − be₂ + ae₃, ε₄ = e₄`.
fn twistor_frame(a: &Expr, b: &Expr, c: &Expr) -> Mat {
    let z = Expr::zero;
    let one = Expr::one;
    vec![
        vec![b.clone(), c.clone(), z(), -a],
        vec![z(), z(), one(), z()],
        vec![c.clone(), -b, a.clone(), z()],
        vec![z(), z(), z(), one()],
    ]
}

fn twistor(model: &SolvmanifoldModel, name: &str, bind: &BTreeMap<String, Expr>) -> Result<AcStructure, AcsError> {
    let mut ctx = model.ctx.clone();
    let get = |k: &str| bind.get(k).cloned();
    let (a, b, c) = (get("a"), get("b"), get("c"));
    let mut params = BTreeMap::new();
    let (ae, be, ce, frame);
    match (&a, &b, &c) {
        (Some(a), Some(b), Some(c)) => {
            let s = ctx.reduce(&(&(&(a * a) + &(b * b)) + &(c * c)));
            if !ctx.equal(&s, &Expr::one()) {
                return Err(AcsError::SphereRelationViolated(a.to_string(), b.to_string(), c.to_string()));
            }
            params.insert("a".to_string(), a.clone());
            params.insert("b".to_string(), b.clone());
            params.insert("c".to_string(), c.clone());
            frame = if b.is_zero() && c.is_zero() {
                // J = ±J₀
                Some(vec![
                    vec![Expr::one(), Expr::zero(), Expr::zero(), Expr::zero()],
                    vec![Expr::zero(), a.clone(), Expr::zero(), Expr::zero()],
                    vec![Expr::zero(), Expr::zero(), Expr::one(), Expr::zero()],
                    vec![Expr::zero(), Expr::zero(), Expr::zero(), a.clone()],
                ])
            } else {
                Some(twistor_frame(a, b, c))
            };
            (ae, be, ce) = (a.clone(), b.clone(), c.clone());
        }
        (None, None, Some(c)) if c.is_zero() => {
            ctx.param("a").param_inv("b");
            let l = p(&ctx, "a^2");
            let r = p(&ctx, "1 - b^2");
            ctx.add_rule(&l, r);
            params.insert("c".to_string(), Expr::zero());
            (ae, be, ce) = (Expr::sym("a"), Expr::sym("b"), Expr::zero());
            frame = Some(twistor_frame(&ae, &be, &ce));
        }
        (None, None, None) => {
            ctx.param("a").param("b").param("c");
            let l = p(&ctx, "a^2");
            let r = p(&ctx, "1 - b^2 - c^2");
            ctx.add_rule(&l, r);
            (ae, be, ce) = (Expr::sym("a"), Expr::sym("b"), Expr::sym("c"));
            frame = None;
        }
        _ => {
            let missing = ["a", "b", "c"].into_iter().find(|k| !bind.contains_key(*k)).unwrap_or("a");
            return Err(AcsError::MissingParam(missing.into()));
        }
    }
    let matrix = twistor_matrix(&ctx, &ae, &be, &ce);
    let mut s = base(model, name, matrix, frame);
    s.metric = Some(identity_metric());
    s.form = Some(fundamental_form(&ctx, &s.matrix, &identity_metric()));
    s.ctx = ctx;
    s.params = params;
    s.unitary_scale = sqrt2_2();
    Ok(s)
}

fn check_keys(name: &str, bind: &BTreeMap<String, Expr>) -> Result<(), AcsError> {
    let allowed = structure_params(name);
    for k in bind.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(AcsError::UnknownParam(k.clone()));
        }
    }
    Ok(())
}

fn positive(v: &Expr) -> Option<bool> {
    v.as_rational().map(|r| r > num_rational::BigRational::from_integer(0.into()))
}

/// Parameter values of `J_s` at `s = (r₁, s₁, r₂, s₂)`.
pub fn js_from_s(ctx: &Ctx, r: &Expr, s: &Expr) -> Result<(Expr, Expr, Expr), ExprError> {
    let q = |t: &str| -> Result<Expr, ExprError> {
        let mut b = BTreeMap::new();
        b.insert("rr".to_string(), r.clone());
        b.insert("ss".to_string(), s.clone());
        let mut c = Ctx::new();
        c.param("rr").param("ss");
        let e = c.parse(t)?;
        ctx.substitute(&e, &b)
    };
    let den = q("rr^2 + ss^2 - 1")?;
    let alpha = ctx.div(&q("-2*ss")?, &den)?;
    let beta = ctx.div(&q("rr^2 + 2*rr + ss^2 + 1")?, &den)?;
    let gamma = ctx.div(&q("-(rr^2 - 2*rr + ss^2 + 1)")?, &den)?;
    Ok((alpha, beta, gamma))
}

/// Builds a registered structure on `model`, binding the given parameters.
pub fn build(model: &SolvmanifoldModel, name: &str, bind: &BTreeMap<String, Expr>) -> Result<AcStructure, AcsError> {
    let known = structure_names(&model.name);
    if !known.contains(&name) {
        return Err(AcsError::UnknownStructure { manifold: model.name.clone(), name: name.into() });
    }
    check_keys(name, bind)?;
    let s = match (model.name.as_str(), name) {
        (_, "J0") => twistor(model, "J0", &unit(1, 0, 0))?,
        (_, "J1") => twistor(model, "J1", &unit(0, 1, 0))?,
        (_, "J2") => twistor(model, "J2", &unit(0, 0, 1))?,
        (_, "Jabc") => return twistor(model, "Jabc", bind),
        ("Mk", "Js") => return bind_js(js(model), bind),
        ("Mk", "Jr") => {
            let mut s = jr(model);
            if let Some(r) = bind.get("r") {
                let mut b = BTreeMap::new();
                b.insert("r".to_string(), r.clone());
                let alpha = s.ctx.try_inv(&s.ctx.substitute(&p(&s.ctx, "3*r^2 - 2*r + 1"), &b)?)?;
                b.insert("alpha".to_string(), alpha);
                s = s.bind(&b)?;
            }
            s
        }
        ("N", "J") => n_j(model),
        ("N", "Jp") => n_jp(model),
        ("N", "Ja") => {
            let mut s = n_ja(model);
            if let Some(a) = bind.get("a") {
                if s.ctx.is_zero(a) {
                    return Err(AcsError::ParamOutOfRange { name: "a".into(), value: "0".into(), why: "a must be nonzero".into() });
                }
                let mut b = BTreeMap::new();
                b.insert("a".to_string(), a.clone());
                s = s.bind(&b)?;
            }
            s
        }
        ("Mlambda", "J") => ml_j(model),
        _ => return Err(AcsError::UnknownStructure { manifold: model.name.clone(), name: name.into() }),
    };
    Ok(s)
}

fn unit(a: i64, b: i64, c: i64) -> BTreeMap<String, Expr> {
    [("a", a), ("b", b), ("c", c)].into_iter().map(|(k, v)| (k.to_string(), Expr::int(v))).collect()
}

fn bind_js(s: AcStructure, bind: &BTreeMap<String, Expr>) -> Result<AcStructure, AcsError> {
    let mut b = BTreeMap::new();
    let has_s = ["r1", "s1", "r2", "s2"].iter().any(|k| bind.contains_key(*k));
    if has_s {
        for i in 1..=2 {
            let r = bind.get(&format!("r{i}")).ok_or_else(|| AcsError::MissingParam(format!("r{i}")))?;
            let sv = bind.get(&format!("s{i}")).ok_or_else(|| AcsError::MissingParam(format!("s{i}")))?;
            let (a, be, g) = js_from_s(&s.ctx, r, sv)?;
            b.insert(format!("alpha{i}"), a);
            b.insert(format!("beta{i}"), be);
            b.insert(format!("gamma{i}"), g);
        }
    } else {
        for i in 1..=2 {
            let ak = format!("alpha{i}");
            let gk = format!("gamma{i}");
            match (bind.get(&ak), bind.get(&gk)) {
                (None, None) => continue,
                (a, g) => {
                    let g = g.cloned().unwrap_or_else(Expr::one);
                    if let Some(a) = a {
                        b.insert(ak.clone(), a.clone());
                    }
                    b.insert(gk.clone(), g.clone());
                    let beta = p(&s.ctx, &format!("-(1 + alpha{i}^2)/gamma{i}"));
                    b.insert(format!("beta{i}"), s.ctx.substitute(&beta, &b)?);
                }
            }
        }
    }
    for i in 1..=2 {
        if let Some(g) = b.get(&format!("gamma{i}")) {
            if positive(g) == Some(false) {
                return Err(AcsError::ParamOutOfRange {
                    name: format!("gamma{i}"),
                    value: g.to_string(),
                    why: "gamma must be positive".into(),
                });
            }
        }
    }
    Ok(s.bind(&b)?)
}

impl AcStructure {
    /// Substitutes parameter values in every component and drops bound symbols.
    pub fn bind(&self, b: &BTreeMap<String, Expr>) -> Result<AcStructure, ExprError> {
        if b.is_empty() {
            return Ok(self.clone());
        }
        let ctx = &self.ctx;
        let sub = |e: &Expr| ctx.substitute(e, b);
        let sub_mat = |m: &Mat| -> Result<Mat, ExprError> { m.iter().map(|r| r.iter().map(sub).collect()).collect() };
        let names: std::collections::BTreeSet<String> = b.keys().cloned().collect();
        let mut nctx = ctx.without_symbols(&names);
        nctx.drop_rules_on(&names);
        let mut params = self.params.clone();
        params.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
        let mut origin = self.origin.clone();
        origin.retain(|k, _| !names.contains(k));
        let form = match &self.form {
            Some(f) => {
                let mut out = InvariantForm::zero(f.coframe(), f.degree());
                for (m, c) in f.coeffs() {
                    out.add_term(*m, sub(c)?);
                }
                Some(out)
            }
            None => None,
        };
        Ok(AcStructure {
            name: self.name.clone(),
            manifold: self.manifold.clone(),
            matrix: sub_mat(&self.matrix)?,
            frame: self.frame.as_ref().map(sub_mat).transpose()?,
            norm: sub(&self.norm)?,
            unitary_scale: sub(&self.unitary_scale)?,
            metric: self.metric.as_ref().map(sub_mat).transpose()?,
            form,
            params,
            origin,
            ctx: nctx,
        })
    }

    /// A copy with all rewrite relations removed.
    pub fn without_relations(&self) -> AcStructure {
        let mut s = self.clone();
        let all: std::collections::BTreeSet<String> = s.ctx.symbols().map(|(k, _)| k.clone()).collect();
        let mut c = s.ctx.clone();
        c.drop_rules_on(&all);
        s.ctx = c;
        s
    }

    /// Declared relations rendered as `lhs -> rhs`.
    pub fn relations(&self) -> Vec<String> {
        self.ctx
            .rules()
            .iter()
            .map(|r| format!("{} -> {}", Expr::from_monomial(&r.lhs), r.rhs))
            .collect()
    }

    pub fn apply(&self, v: &[Expr]) -> Vec<Expr> {
        mat_vec(&self.ctx, &self.matrix, v)
    }

    /// Dual of the adapted frame: rows `ε^i` over `e^j`.
    pub fn dual_coframe(&self) -> Result<Mat, AcsError> {
        let f = self.frame.as_ref().ok_or_else(|| AcsError::MissingFrame(self.name.clone()))?;
        Ok(linalg::transpose(&linalg::inverse(&self.ctx, f)?))
    }
}

pub fn mat_vec(ctx: &Ctx, m: &Mat, v: &[Expr]) -> Vec<Expr> {
    m.iter()
        .map(|row| {
            let s: Expr = row.iter().zip(v).filter(|(a, b)| !a.is_zero() && !b.is_zero()).map(|(a, b)| a * b).sum();
            ctx.reduce(&s)
        })
        .collect()
}

fn column(m: &Mat, j: usize) -> Vec<Expr> {
    m.iter().map(|r| r[j].clone()).collect()
}

/// `J² + I ≡ 0` modulo the declared relations.
pub fn check_acs(j: &AcStructure) -> bool {
    let sq = linalg::mul(&j.ctx, &j.matrix, &j.matrix);
    linalg::equal(&j.ctx, &sq, &linalg::neg(&linalg::identity(4)))
}

/// Bracket of two invariant fields given by frame components.
pub fn bracket(model: &SolvmanifoldModel, ctx: &Ctx, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
    let mut out = vec![Expr::zero(); 4];
    for i in 0..4 {
        for j in 0..4 {
            if i == j || x[i].is_zero() || y[j].is_zero() {
                continue;
            }
            let c = &x[i] * &y[j];
            for (k, b) in model.bracket(i, j).iter().enumerate() {
                if !b.is_zero() {
                    out[k] = &out[k] + &(&c * b);
                }
            }
        }
    }
    out.iter().map(|e| ctx.reduce(e)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Basis {
    E,
    Eps,
}

/// `N(f_i, f_j)` for `i < j`, components on the same basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NijenhuisTable {
    pub basis: Basis,
    pub entries: BTreeMap<(usize, usize), Vec<Expr>>,
}

impl NijenhuisTable {
    pub fn get(&self, i: usize, j: usize) -> Vec<Expr> {
        if i < j {
            self.entries[&(i, j)].clone()
        } else if i > j {
            self.entries[&(j, i)].iter().map(|e| -e).collect()
        } else {
            vec![Expr::zero(); 4]
        }
    }

    pub fn is_zero(&self, ctx: &Ctx) -> bool {
        self.entries.values().all(|v| v.iter().all(|e| ctx.is_zero(e)))
    }
}

/// `N(X,Y) = [JX,JY] − [X,Y] − J[JX,Y] − J[X,JY]`.
pub fn nijenhuis_pair(model: &SolvmanifoldModel, j: &AcStructure, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
    let ctx = &j.ctx;
    let jx = j.apply(x);
    let jy = j.apply(y);
    let a = bracket(model, ctx, &jx, &jy);
    let b = bracket(model, ctx, x, y);
    let c = j.apply(&bracket(model, ctx, &jx, y));
    let d = j.apply(&bracket(model, ctx, x, &jy));
    (0..4).map(|k| ctx.reduce(&(&(&(&a[k] - &b[k]) - &c[k]) - &d[k]))).collect()
}

pub fn nijenhuis(model: &SolvmanifoldModel, j: &AcStructure, basis: Basis) -> Result<NijenhuisTable, AcsError> {
    let ctx = &j.ctx;
    let (vecs, dual): (Mat, Option<Mat>) = match basis {
        Basis::E => (linalg::identity(4), None),
        Basis::Eps => (
            j.frame.clone().ok_or_else(|| AcsError::MissingFrame(j.name.clone()))?,
            Some(j.dual_coframe()?),
        ),
    };
    let mut entries = BTreeMap::new();
    for a in 0..4 {
        for b in a + 1..4 {
            let n = nijenhuis_pair(model, j, &vecs[a], &vecs[b]);
            let n = match &dual {
                None => n,
                Some(d) => mat_vec(ctx, d, &n),
            };
            entries.insert((a, b), n);
        }
    }
    Ok(NijenhuisTable { basis, entries })
}

/// Checks `Jε₁ = ε₂`, `Jε₃ = ε₄`.
pub fn check_adapted(j: &AcStructure) -> Result<(), AcsError> {
    let f = j.frame.as_ref().ok_or_else(|| AcsError::MissingFrame(j.name.clone()))?;
    for (a, b) in [(0, 1), (2, 3)] {
        let img = j.apply(&f[a]);
        if img.iter().zip(&f[b]).any(|(x, y)| !j.ctx.equal(x, y)) {
            return Err(AcsError::FrameNotAdapted(format!("J eps{} != eps{}", a + 1, b + 1)));
        }
    }
    Ok(())
}

/// `φ^j = norm·(ε^{2j−1} + iε^{2j})` with dual fields `𝒳_j = (ε_{2j−1} − iε_{2j})/(2·norm)`.
pub fn adapted_coframe(j: &AcStructure) -> Result<ComplexFrame, AcsError> {
    check_adapted(j)?;
    let ctx = &j.ctx;
    let f = j.frame.as_ref().expect("checked");
    let co = j.dual_coframe()?;
    let half_inv = ctx.try_inv(&(&j.norm * &Expr::int(2)))?;
    let mk = |x: &[Expr], y: &[Expr], s: &Expr, sign: i64| -> Vec<Expr> {
        x.iter()
            .zip(y)
            .map(|(a, b)| ctx.reduce(&(s * &(a + &b.mul_i().scale(&crate::scalar_expr::Coeff::from_i64(sign))))))
            .collect()
    };
    let phi = [mk(&co[0], &co[1], &j.norm, 1), mk(&co[2], &co[3], &j.norm, 1)];
    let fields = [mk(&f[0], &f[1], &half_inv, -1), mk(&f[2], &f[3], &half_inv, -1)];
    Ok(ComplexFrame { phi, fields, coframe: Coframe::Phi })
}

impl ComplexFrame {
    /// Rows `φ¹, φ², φ̄¹, φ̄²` over `e^j`.
    pub fn coframe_rows(&self) -> Mat {
        let c = |v: &Vec<Expr>| v.iter().map(|e| e.conj()).collect::<Vec<_>>();
        vec![self.phi[0].clone(), self.phi[1].clone(), c(&self.phi[0]), c(&self.phi[1])]
    }

    /// Rows `𝒳₁, 𝒳₂, 𝒳̄₁, 𝒳̄₂` over `e_j`.
    pub fn field_rows(&self) -> Mat {
        let c = |v: &Vec<Expr>| v.iter().map(|e| e.conj()).collect::<Vec<_>>();
        vec![self.fields[0].clone(), self.fields[1].clone(), c(&self.fields[0]), c(&self.fields[1])]
    }

    /// `⟨φ^a, V_b⟩ = δ_ab` for the four complex covectors and fields.
    pub fn check_duality(&self, ctx: &Ctx) -> bool {
        let p = self.coframe_rows();
        let v = self.field_rows();
        linalg::equal(ctx, &linalg::mul(ctx, &p, &linalg::transpose(&v)), &linalg::identity(4))
    }

    /// `e^j` written on this coframe.
    pub fn e_images(&self, ctx: &Ctx) -> [InvariantForm; 4] {
        let v = self.field_rows();
        std::array::from_fn(|j| {
            let mut f = InvariantForm::zero(self.coframe, 1);
            for (a, row) in v.iter().enumerate() {
                let c = ctx.reduce(&row[j]);
                if !c.is_zero() {
                    f.add_term(1 << a, c);
                }
            }
            f
        })
    }

    /// An `E`-form rewritten on this coframe.
    pub fn to_complex(&self, ctx: &Ctx, f: &InvariantForm) -> Result<InvariantForm, crate::exterior::ExteriorError> {
        f.change_basis(ctx, &self.e_images(ctx))
    }

    /// `φ^a` as an `E`-form, `a` in `0..4` over `φ¹, φ², φ̄¹, φ̄²`.
    pub fn phi_in_e(&self, a: usize) -> InvariantForm {
        let row = &self.coframe_rows()[a];
        let mut f = InvariantForm::zero(Coframe::E, 1);
        for (j, c) in row.iter().enumerate() {
            if !c.is_zero() {
                f.add_term(1 << j, c.clone());
            }
        }
        f
    }

    /// The coframe `s·φ` relabelled as `Φ`.
    pub fn rescaled(&self, ctx: &Ctx, s: &Expr) -> Result<ComplexFrame, ExprError> {
        let inv = ctx.try_inv(s)?;
        let sc = |v: &Vec<Expr>, k: &Expr| v.iter().map(|e| ctx.reduce(&(e * k))).collect::<Vec<_>>();
        Ok(ComplexFrame {
            phi: [sc(&self.phi[0], s), sc(&self.phi[1], s)],
            fields: [sc(&self.fields[0], &inv), sc(&self.fields[1], &inv)],
            coframe: Coframe::PhiU,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompatibilityReport {
    pub omega_invariant: Option<bool>,
    pub omega_anti: Option<bool>,
    pub metric_invariant: Option<bool>,
    pub norden_symmetric: Option<bool>,
    /// `g(J·,·)` when a metric is given.
    pub fundamental_form: Option<String>,
    /// `ω(·,J·)` as a matrix when a form is given.
    pub induced_metric: Option<Vec<Vec<String>>>,
}

/// Invariance flags of `ω` and `g` under `J`.
pub fn compatibility_report(ctx: &Ctx, j: &Mat, omega: Option<&InvariantForm>, g: Option<&Mat>) -> CompatibilityReport {
    let jt = linalg::transpose(j);
    let mut r = CompatibilityReport {
        omega_invariant: None,
        omega_anti: None,
        metric_invariant: None,
        norden_symmetric: None,
        fundamental_form: None,
        induced_metric: None,
    };
    if let Some(w) = omega {
        let o = w.to_matrix();
        let pulled = linalg::mul(ctx, &linalg::mul(ctx, &jt, &o), j);
        r.omega_invariant = Some(linalg::equal(ctx, &pulled, &o));
        r.omega_anti = Some(linalg::equal(ctx, &pulled, &linalg::neg(&o)));
        r.induced_metric = Some(linalg::render(&linalg::mul(ctx, &o, j)));
    }
    if let Some(g) = g {
        let pulled = linalg::mul(ctx, &linalg::mul(ctx, &jt, g), j);
        r.metric_invariant = Some(linalg::equal(ctx, &pulled, g));
        r.norden_symmetric = Some(linalg::equal(ctx, &linalg::mul(ctx, &jt, g), &linalg::mul(ctx, g, j)));
        r.fundamental_form = Some(fundamental_form(ctx, j, g).reduce(ctx).to_string());
    }
    r
}

/// `ω(·, J·)` as a matrix.
pub fn induced_metric(ctx: &Ctx, j: &Mat, omega: &InvariantForm) -> Mat {
    linalg::mul(ctx, &omega.to_matrix(), j)
}

/// Leading principal minors of a symmetric matrix.
pub fn leading_minors(ctx: &Ctx, g: &Mat) -> Vec<Expr> {
    (1..=g.len())
        .map(|k| {
            let idx: Vec<usize> = (0..k).collect();
            linalg::det(ctx, &linalg::submatrix(g, &idx, &idx))
        })
        .collect()
}

/// Image `J e_j`.
pub fn image(j: &AcStructure, idx: usize) -> Vec<Expr> {
    column(&j.matrix, idx)
}
