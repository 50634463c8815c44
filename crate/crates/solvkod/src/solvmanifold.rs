//! Built-in solvmanifold models, validation and the TOML model format.
//!
//! A model carries structure constants `[e_i, e_j] = Σ c^k_ij e_k`, a coordinate
//! realization of the frame (row `i` holds the coefficients of `e_i` on
//! `∂/∂x_j`), the dual coframe, lattice metadata and the Fourier charts used
//! by the mode reduction.

use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exterior::{Coframe, InvariantForm};
use crate::linalg::{self, Mat};
use crate::scalar_expr::{Ctx, Expr, ExprError, SymbolKind};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("parameter `{name}` = {value} out of range {range}")]
    ParamOutOfRange { name: String, value: String, range: String },
    #[error("unknown manifold `{0}`")]
    UnknownManifold(String),
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("model validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Builtin {
    Mk,
    N,
    Mlambda,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::Mk, Builtin::N, Builtin::Mlambda];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Mk => "Mk",
            Builtin::N => "N",
            Builtin::Mlambda => "Mlambda",
        }
    }

    pub fn from_name(s: &str) -> Result<Self, ModelError> {
        match s {
            "Mk" | "M(k)" => Ok(Builtin::Mk),
            "N" => Ok(Builtin::N),
            "Mlambda" | "M(lambda)" => Ok(Builtin::Mlambda),
            _ => Err(ModelError::UnknownManifold(s.to_string())),
        }
    }

    /// Parameters the family is defined over.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            Builtin::Mk => &["k"],
            Builtin::N => &[],
            Builtin::Mlambda => &["lambda"],
        }
    }
}

/// A parameter either kept as a symbol or bound to a value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamValue {
    Symbolic,
    Value(Expr),
}

/// One Fourier expansion of lattice-periodic functions.
///
/// `multipliers[c]` is the factor `∂/∂c` produces on a mode; the fiber
/// coordinate (if any) is kept as a variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chart {
    pub name: String,
    pub fiber: Option<String>,
    pub modes: Vec<String>,
    pub multipliers: BTreeMap<String, Expr>,
    /// Modes of the previous chart that must vanish for this chart to apply.
    pub requires_zero: Vec<String>,
    /// Nonzero modes are moved off the integer lattice by the fiber translation.
    pub incommensurable: bool,
    /// Exponential rate by which a fiber translation rescales each mode.
    pub orbit: BTreeMap<String, Expr>,
    /// Expressions of auxiliary mode symbols through integer indices.
    pub mode_defs: BTreeMap<String, Expr>,
    pub phase: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LatticeInfo {
    pub kind: String,
    #[serde(flatten)]
    pub data: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct SolvmanifoldModel {
    pub name: String,
    pub coordinates: Vec<String>,
    pub ctx: Ctx,
    /// `brackets[(i, j)]` with `i < j` holds the frame components of `[e_i, e_j]`.
    pub brackets: BTreeMap<(usize, usize), Vec<Expr>>,
    pub frame: Mat,
    pub coframe: Mat,
    pub lattice: LatticeInfo,
    pub charts: Vec<Chart>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub jacobi: bool,
    pub duality: bool,
    pub commutators_match: bool,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.jacobi && self.duality && self.commutators_match
    }
}

/// Shared context for every model: coordinates, power and mode symbols.
pub fn base_context(coords: &[String]) -> Ctx {
    let mut c = Ctx::new();
    for x in coords {
        c.declare(x, SymbolKind::Coord, false);
    }
    c.declare("m", SymbolKind::Power, true);
    for n in ["n1", "n2", "n3", "nu1", "nu2"] {
        c.declare(n, SymbolKind::Mode, false);
    }
    c
}

fn coords(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn p(ctx: &Ctx, s: &str) -> Expr {
    ctx.parse(s).unwrap_or_else(|e| panic!("builtin expression `{s}`: {e}"))
}

fn rows(ctx: &Ctx, r: [[&str; 4]; 4]) -> Mat {
    r.iter().map(|row| row.iter().map(|s| p(ctx, s)).collect()).collect()
}

fn chart(
    ctx: &Ctx,
    name: &str,
    fiber: Option<&str>,
    modes: &[&str],
    mult: &[(&str, &str)],
    requires_zero: &[&str],
    phase: &str,
) -> Chart {
    Chart {
        name: name.into(),
        fiber: fiber.map(|s| s.to_string()),
        modes: modes.iter().map(|s| s.to_string()).collect(),
        multipliers: mult.iter().map(|(c, e)| (c.to_string(), p(ctx, e))).collect(),
        requires_zero: requires_zero.iter().map(|s| s.to_string()).collect(),
        incommensurable: false,
        orbit: BTreeMap::new(),
        mode_defs: BTreeMap::new(),
        phase: phase.into(),
    }
}

fn lattice(kind: &str, data: &[(&str, &str)]) -> LatticeInfo {
    LatticeInfo { kind: kind.into(), data: data.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
}

fn mk_symbolic() -> SolvmanifoldModel {
    let cs = coords(&["x", "y", "z", "t"]);
    let mut ctx = base_context(&cs);
    ctx.param_inv("k");
    for s in ["u1", "u2", "v1", "v2"] {
        ctx.declare(s, SymbolKind::Lattice, false);
    }
    ctx.declare("delta", SymbolKind::Lattice, true);
    ctx.declare("n", SymbolKind::Lattice, true);
    let frame = rows(&ctx, [["exp(k*z)", "0", "0", "0"], ["0", "exp(-k*z)", "0", "0"], ["0", "0", "1", "0"], ["0", "0", "0", "1"]]);
    let coframe =
        rows(&ctx, [["exp(-k*z)", "0", "0", "0"], ["0", "exp(k*z)", "0", "0"], ["0", "0", "1", "0"], ["0", "0", "0", "1"]]);
    let mut brackets = BTreeMap::new();
    brackets.insert((0, 2), vec![p(&ctx, "-k"), Expr::zero(), Expr::zero(), Expr::zero()]);
    brackets.insert((1, 2), vec![Expr::zero(), p(&ctx, "k"), Expr::zero(), Expr::zero()]);
    let mut a = chart(
        &ctx,
        "A",
        Some("z"),
        &["nu1", "nu2", "n3"],
        &[("x", "2*pi*i*nu1"), ("y", "2*pi*i*nu2"), ("t", "2*pi*i*n3")],
        &[],
        "exp(2*pi*i*(nu1*x + nu2*y + n3*t))",
    );
    a.mode_defs.insert("nu1".into(), p(&ctx, "(n1*v2 - n2*u2)/delta"));
    a.mode_defs.insert("nu2".into(), p(&ctx, "(-n1*v1 + n2*u1)/delta"));
    a.orbit.insert("nu1".into(), p(&ctx, "k"));
    a.orbit.insert("nu2".into(), p(&ctx, "-k"));
    let b = chart(
        &ctx,
        "B",
        None,
        &["n1", "n2"],
        &[("z", "2*pi*i*n1/n"), ("t", "2*pi*i*n2")],
        &["nu1", "nu2"],
        "exp(2*pi*i*(n1*z/n + n2*t))",
    );
    SolvmanifoldModel {
        name: "Mk".into(),
        coordinates: cs,
        ctx,
        brackets,
        frame,
        coframe,
        lattice: lattice(
            "D(u,v,n) x Z",
            &[
                ("u", "(1, 0)"),
                ("v", "(0, 1)"),
                ("n", "1"),
                ("delta", "u1*v2 - u2*v1"),
                ("constraint", "exp(k) + exp(-k) integer"),
            ],
        ),
        charts: vec![a, b],
    }
}

fn n_symbolic() -> SolvmanifoldModel {
    let cs = coords(&["x", "y", "z", "t"]);
    let ctx = base_context(&cs);
    let frame = rows(&ctx, [["1", "0", "0", "0"], ["0", "1", "x", "x^2/2"], ["0", "0", "1", "x"], ["0", "0", "0", "1"]]);
    let coframe = rows(&ctx, [["1", "0", "0", "0"], ["0", "1", "0", "0"], ["0", "-x", "1", "0"], ["0", "x^2/2", "-x", "1"]]);
    let mut brackets = BTreeMap::new();
    brackets.insert((0, 1), vec![Expr::zero(), Expr::zero(), Expr::one(), Expr::zero()]);
    brackets.insert((0, 2), vec![Expr::zero(), Expr::zero(), Expr::zero(), Expr::one()]);
    let a = chart(
        &ctx,
        "A",
        Some("x"),
        &["n1", "n2", "n3"],
        &[("y", "i*pi*n1"), ("z", "i*pi*n2"), ("t", "i*pi*n3")],
        &[],
        "exp(i*pi*(n1*y + n2*z + n3*t))",
    );
    let b = chart(&ctx, "B", None, &["n1", "n2"], &[("x", "i*pi*n1"), ("y", "i*pi*n2")], &["n2", "n3"], "exp(i*pi*(n1*x + n2*y))");
    SolvmanifoldModel {
        name: "N".into(),
        coordinates: cs,
        ctx,
        brackets,
        frame,
        coframe,
        lattice: lattice("even integer points", &[("period", "2")]),
        charts: vec![a, b],
    }
}

fn mlambda_symbolic() -> SolvmanifoldModel {
    let cs = coords(&["x", "y", "z", "t"]);
    let mut ctx = base_context(&cs);
    ctx.param_inv("lambda");
    let frame = rows(
        &ctx,
        [["0", "0", "0", "1"], ["0", "exp(t)", "0", "0"], ["exp(lambda*t)", "0", "0", "0"], ["0", "0", "exp(-(1 + lambda)*t)", "0"]],
    );
    let coframe = rows(
        &ctx,
        [["0", "0", "0", "1"], ["0", "exp(-t)", "0", "0"], ["exp(-lambda*t)", "0", "0", "0"], ["0", "0", "exp((1 + lambda)*t)", "0"]],
    );
    let mut brackets = BTreeMap::new();
    brackets.insert((0, 1), vec![Expr::zero(), Expr::one(), Expr::zero(), Expr::zero()]);
    brackets.insert((0, 2), vec![Expr::zero(), Expr::zero(), p(&ctx, "lambda"), Expr::zero()]);
    brackets.insert((0, 3), vec![Expr::zero(), Expr::zero(), Expr::zero(), p(&ctx, "-(1 + lambda)")]);
    let mut a = chart(
        &ctx,
        "A",
        Some("t"),
        &["n1", "n2", "n3"],
        &[("x", "2*pi*i*n1"), ("y", "2*pi*i*n2"), ("z", "2*pi*i*n3")],
        &[],
        "exp(2*pi*i*(n1*x + n2*y + n3*z))",
    );
    a.incommensurable = true;
    a.orbit.insert("n1".into(), p(&ctx, "lambda"));
    a.orbit.insert("n2".into(), Expr::one());
    a.orbit.insert("n3".into(), p(&ctx, "-(1 + lambda)"));
    let b = chart(&ctx, "B", None, &["n1"], &[("t", "2*pi*i*n1")], &["n1", "n2", "n3"], "exp(2*pi*i*n1*t)");
    SolvmanifoldModel {
        name: "Mlambda".into(),
        coordinates: cs,
        ctx,
        brackets,
        frame,
        coframe,
        lattice: lattice("Z^4", &[("lambda_range", "(-1, -1/2)")]),
        charts: vec![a, b],
    }
}

/// Built-in model with every family parameter symbolic.
pub fn builtin_symbolic(b: Builtin) -> SolvmanifoldModel {
    match b {
        Builtin::Mk => mk_symbolic(),
        Builtin::N => n_symbolic(),
        Builtin::Mlambda => mlambda_symbolic(),
    }
}

/// Built-in model; every family parameter must appear in `params`.
pub fn builtin(b: Builtin, params: &BTreeMap<String, ParamValue>) -> Result<SolvmanifoldModel, ModelError> {
    let mut bind = BTreeMap::new();
    for name in b.params() {
        match params.get(*name) {
            None => return Err(ModelError::MissingParam(name.to_string())),
            Some(ParamValue::Symbolic) => {}
            Some(ParamValue::Value(v)) => {
                bind.insert(name.to_string(), v.clone());
            }
        }
    }
    let m = builtin_symbolic(b);
    check_ranges(&bind)?;
    m.specialize(&bind)
}

/// Enforces the open parameter ranges of the built-in families.
pub fn check_ranges(bind: &BTreeMap<String, Expr>) -> Result<(), ModelError> {
    if let Some(v) = bind.get("lambda") {
        let x = numeric(v);
        if !(x > -1.0 && x < -0.5) {
            return Err(ModelError::ParamOutOfRange { name: "lambda".into(), value: v.to_string(), range: "(-1, -1/2)".into() });
        }
        if let Some(r) = v.as_rational() {
            let lo = num_rational::BigRational::new((-1).into(), 1.into());
            let hi = num_rational::BigRational::new((-1).into(), 2.into());
            if r <= lo || r >= hi {
                return Err(ModelError::ParamOutOfRange { name: "lambda".into(), value: v.to_string(), range: "(-1, -1/2)".into() });
            }
        }
    }
    if let Some(v) = bind.get("k") {
        if v.is_zero() {
            return Err(ModelError::ParamOutOfRange { name: "k".into(), value: "0".into(), range: "k != 0".into() });
        }
    }
    Ok(())
}

fn numeric(v: &Expr) -> f64 {
    if let Some(r) = v.as_rational() {
        return r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN);
    }
    v.eval::<f64>(&BTreeMap::new()).map(|c| c.re).unwrap_or(f64::NAN)
}

impl SolvmanifoldModel {
    /// Frame components of `[e_i, e_j]` from the structure constants.
    pub fn bracket(&self, i: usize, j: usize) -> Vec<Expr> {
        if i == j {
            return vec![Expr::zero(); 4];
        }
        let (a, b, s) = if i < j { (i, j, false) } else { (j, i, true) };
        match self.brackets.get(&(a, b)) {
            None => vec![Expr::zero(); 4],
            Some(v) if s => v.iter().map(|x| -x).collect(),
            Some(v) => v.clone(),
        }
    }

    /// `de^k = −Σ_{i<j} c^k_ij e^i ∧ e^j`.
    pub fn d_basis(&self) -> [InvariantForm; 4] {
        let mut out: [InvariantForm; 4] = std::array::from_fn(|_| InvariantForm::zero(Coframe::E, 2));
        for ((i, j), c) in &self.brackets {
            for (k, ck) in c.iter().enumerate() {
                if !ck.is_zero() {
                    out[k].add_term((1 << i) | (1 << j), -ck);
                }
            }
        }
        out
    }

    /// Exterior derivative of an invariant form on the e-coframe.
    pub fn d(&self, f: &InvariantForm) -> Result<InvariantForm, crate::exterior::ExteriorError> {
        f.d_with(&self.ctx, &self.d_basis())
    }

    /// Substitutes parameter values everywhere.
    pub fn specialize(&self, bind: &BTreeMap<String, Expr>) -> Result<SolvmanifoldModel, ModelError> {
        if bind.is_empty() {
            return Ok(self.clone());
        }
        let ctx = &self.ctx;
        let sub = |e: &Expr| ctx.substitute(e, bind);
        let sub_mat = |m: &Mat| -> Result<Mat, ExprError> { m.iter().map(|r| r.iter().map(sub).collect()).collect() };
        let mut brackets = BTreeMap::new();
        for (k, v) in &self.brackets {
            brackets.insert(*k, v.iter().map(sub).collect::<Result<Vec<_>, _>>()?);
        }
        let mut charts = self.charts.clone();
        for c in &mut charts {
            for v in c.multipliers.values_mut().chain(c.orbit.values_mut()).chain(c.mode_defs.values_mut()) {
                *v = sub(v)?;
            }
        }
        let names: std::collections::BTreeSet<String> = bind.keys().cloned().collect();
        let mut nctx = self.ctx.without_symbols(&names);
        nctx.drop_rules_on(&names);
        let mut data = self.lattice.clone();
        for (k, v) in bind {
            data.data.insert(format!("bound.{k}"), v.to_string());
        }
        Ok(SolvmanifoldModel {
            name: self.name.clone(),
            coordinates: self.coordinates.clone(),
            ctx: nctx,
            brackets,
            frame: sub_mat(&self.frame)?,
            coframe: sub_mat(&self.coframe)?,
            lattice: data,
            charts,
        })
    }

    pub fn chart(&self, name: &str) -> Option<&Chart> {
        self.charts.iter().find(|c| c.name == name)
    }

    /// Applies the realized vector field `e_i` to a scalar.
    pub fn apply_field(&self, i: usize, f: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for (j, x) in self.coordinates.iter().enumerate() {
            if self.frame[i][j].is_zero() {
                continue;
            }
            acc = &acc + &(&self.frame[i][j] * &f.diff(x));
        }
        self.ctx.reduce(&acc)
    }

    /// Coordinate commutator `[X, Y]` of two vector fields given by components.
    pub fn lie_bracket(&self, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
        let n = self.coordinates.len();
        (0..n)
            .map(|c| {
                let mut acc = Expr::zero();
                for (l, var) in self.coordinates.iter().enumerate() {
                    acc = &acc + &(&x[l] * &y[c].diff(var));
                    acc = &acc - &(&y[l] * &x[c].diff(var));
                }
                self.ctx.reduce(&acc)
            })
            .collect()
    }

    /// Frame components of a coordinate vector field through the coframe.
    pub fn frame_components(&self, v: &[Expr]) -> Vec<Expr> {
        (0..4)
            .map(|k| {
                let s: Expr = (0..4).map(|c| &self.coframe[k][c] * &v[c]).sum();
                self.ctx.reduce(&s)
            })
            .collect()
    }

    pub fn verify(&self) -> VerifyReport {
        let ctx = &self.ctx;
        let mut failures = Vec::new();
        // Jacobi on structure constants
        let mut jacobi = true;
        for i in 0..4 {
            for j in i + 1..4 {
                for l in j + 1..4 {
                    let mut tot = vec![Expr::zero(); 4];
                    for (a, b, c) in [(i, j, l), (j, l, i), (l, i, j)] {
                        let ab = self.bracket(a, b);
                        for (q, cq) in ab.iter().enumerate() {
                            if cq.is_zero() {
                                continue;
                            }
                            let inner = self.bracket(q, c);
                            for k in 0..4 {
                                tot[k] = &tot[k] + &(cq * &inner[k]);
                            }
                        }
                    }
                    if tot.iter().any(|t| !ctx.is_zero(t)) {
                        jacobi = false;
                        failures.push(format!("jacobi({},{},{})", i + 1, j + 1, l + 1));
                    }
                }
            }
        }
        let prod = linalg::mul(ctx, &self.coframe, &linalg::transpose(&self.frame));
        let duality = linalg::equal(ctx, &prod, &linalg::identity(4));
        if !duality {
            failures.push("coframe/frame duality".into());
        }
        let mut commutators_match = true;
        for i in 0..4 {
            for j in i + 1..4 {
                let lb = self.lie_bracket(&self.frame[i], &self.frame[j]);
                let comps = self.frame_components(&lb);
                let want = self.bracket(i, j);
                if comps.iter().zip(&want).any(|(a, b)| !ctx.equal(a, b)) {
                    commutators_match = false;
                    failures.push(format!("[e{},e{}]", i + 1, j + 1));
                }
            }
        }
        VerifyReport { jacobi, duality, commutators_match, failures }
    }
}

// ---------------------------------------------------------------- TOML format

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub kind: SymbolKind,
    #[serde(default)]
    pub invertible: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub coeff: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlgebraSection {
    #[serde(default)]
    pub bracket: Vec<BracketEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<String>,
    pub modes: Vec<String>,
    #[serde(default)]
    pub requires_zero: Vec<String>,
    #[serde(default)]
    pub incommensurable: bool,
    #[serde(default)]
    pub orbit: BTreeMap<String, String>,
    pub phase: String,
    pub multipliers: BTreeMap<String, String>,
    #[serde(default)]
    pub mode_defs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FourierSection {
    #[serde(default)]
    pub chart: Vec<ChartEntry>,
}

/// On-disk form of a model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFile {
    pub name: String,
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub symbols: BTreeMap<String, SymbolEntry>,
    #[serde(default)]
    pub algebra: AlgebraSection,
    pub realization: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coframe: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default)]
    pub lattice: LatticeInfo,
    #[serde(default)]
    pub fourier: FourierSection,
}

fn mat_to_section(m: &Mat, prefix: &str) -> BTreeMap<String, Vec<String>> {
    m.iter().enumerate().map(|(i, r)| (format!("{prefix}{}", i + 1), r.iter().map(|x| x.to_string()).collect())).collect()
}

fn section_to_mat(ctx: &Ctx, s: &BTreeMap<String, Vec<String>>, prefix: &str, dim: usize) -> Result<Mat, ModelError> {
    let mut out = Vec::new();
    for i in 1..=4 {
        let key = format!("{prefix}{i}");
        let row = s.get(&key).ok_or_else(|| ModelError::Parse(format!("missing `{key}`")))?;
        if row.len() != dim {
            return Err(ModelError::Parse(format!("`{key}` must have {dim} entries")));
        }
        out.push(row.iter().map(|e| ctx.parse(e)).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(out)
}

impl SolvmanifoldModel {
    pub fn to_file(&self) -> ModelFile {
        let base = base_context(&self.coordinates);
        let symbols = self
            .ctx
            .symbols()
            .filter(|(n, i)| base.symbol(n) != Some(*i))
            .map(|(n, i)| (n.clone(), SymbolEntry { kind: i.kind, invertible: i.invertible }))
            .collect();
        let mut bracket = Vec::new();
        for ((i, j), v) in &self.brackets {
            for (k, c) in v.iter().enumerate() {
                if !c.is_zero() {
                    bracket.push(BracketEntry { i: i + 1, j: j + 1, k: k + 1, coeff: c.to_string() });
                }
            }
        }
        let chart = self
            .charts
            .iter()
            .map(|c| ChartEntry {
                name: c.name.clone(),
                fiber: c.fiber.clone(),
                modes: c.modes.clone(),
                requires_zero: c.requires_zero.clone(),
                incommensurable: c.incommensurable,
                orbit: c.orbit.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
                phase: c.phase.clone(),
                multipliers: c.multipliers.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
                mode_defs: c.mode_defs.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            })
            .collect();
        ModelFile {
            name: self.name.clone(),
            coordinates: self.coordinates.clone(),
            symbols,
            algebra: AlgebraSection { bracket },
            realization: mat_to_section(&self.frame, "e"),
            coframe: Some(mat_to_section(&self.coframe, "e")),
            lattice: self.lattice.clone(),
            fourier: FourierSection { chart },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("model serializes")
    }

    /// Builds a model without validating it.
    pub fn from_file_unchecked(f: &ModelFile) -> Result<SolvmanifoldModel, ModelError> {
        if f.coordinates.len() != 4 {
            return Err(ModelError::Parse("exactly four coordinates are required".into()));
        }
        let mut ctx = base_context(&f.coordinates);
        for (n, s) in &f.symbols {
            ctx.declare(n, s.kind, s.invertible);
        }
        let mut brackets: BTreeMap<(usize, usize), Vec<Expr>> = BTreeMap::new();
        for b in &f.algebra.bracket {
            if !(1..=4).contains(&b.i) || !(1..=4).contains(&b.j) || !(1..=4).contains(&b.k) || b.i == b.j {
                return Err(ModelError::Parse(format!("bad bracket indices ({}, {}, {})", b.i, b.j, b.k)));
            }
            let mut c = ctx.parse(&b.coeff)?;
            let (i, j) = if b.i < b.j { (b.i - 1, b.j - 1) } else {
                c = -c;
                (b.j - 1, b.i - 1)
            };
            let e = brackets.entry((i, j)).or_insert_with(|| vec![Expr::zero(); 4]);
            e[b.k - 1] = &e[b.k - 1] + &c;
        }
        brackets.retain(|_, v| v.iter().any(|x| !x.is_zero()));
        let frame = section_to_mat(&ctx, &f.realization, "e", 4)?;
        let coframe = match &f.coframe {
            Some(s) => section_to_mat(&ctx, s, "e", 4)?,
            None => linalg::transpose(&linalg::inverse(&ctx, &frame)?),
        };
        let mut charts = Vec::new();
        for c in &f.fourier.chart {
            let mut multipliers = BTreeMap::new();
            for (k, v) in &c.multipliers {
                if !f.coordinates.contains(k) {
                    return Err(ModelError::Parse(format!("chart {}: unknown coordinate `{k}`", c.name)));
                }
                multipliers.insert(k.clone(), ctx.parse(v)?);
            }
            let mut mode_defs = BTreeMap::new();
            for (k, v) in &c.mode_defs {
                mode_defs.insert(k.clone(), ctx.parse(v)?);
            }
            let mut orbit = BTreeMap::new();
            for (k, v) in &c.orbit {
                if !c.modes.contains(k) {
                    return Err(ModelError::Parse(format!("chart {}: orbit of unknown mode `{k}`", c.name)));
                }
                orbit.insert(k.clone(), ctx.parse(v)?);
            }
            charts.push(Chart {
                name: c.name.clone(),
                fiber: c.fiber.clone(),
                modes: c.modes.clone(),
                multipliers,
                requires_zero: c.requires_zero.clone(),
                incommensurable: c.incommensurable,
                orbit,
                mode_defs,
                phase: c.phase.clone(),
            });
        }
        Ok(SolvmanifoldModel {
            name: f.name.clone(),
            coordinates: f.coordinates.clone(),
            ctx,
            brackets,
            frame,
            coframe,
            lattice: f.lattice.clone(),
            charts,
        })
    }
}

/// Parses and validates a TOML model document.
pub fn load_model(src: &str) -> Result<SolvmanifoldModel, ModelError> {
    let f: ModelFile = toml::from_str(src).map_err(|e| ModelError::Parse(e.to_string()))?;
    let m = SolvmanifoldModel::from_file_unchecked(&f)?;
    let r = m.verify();
    if !r.ok() {
        return Err(ModelError::Validation(r.failures.join(", ")));
    }
    Ok(m)
}

impl PartialEq for SolvmanifoldModel {
    fn eq(&self, o: &Self) -> bool {
        self.to_file() == o.to_file()
    }
}

/// Parses `name=value` pairs separated by commas.
pub fn parse_bindings(ctx: &Ctx, s: &str) -> Result<BTreeMap<String, Expr>, ModelError> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| ModelError::Parse(format!("expected name=value, got `{part}`")))?;
        out.insert(k.trim().to_string(), ctx.parse(v.trim())?);
    }
    Ok(out)
}

/// True when `e` is a nonzero rational with the given sign.
pub fn rational_sign(e: &Expr) -> Option<i32> {
    e.as_rational().map(|r| if r.is_positive() { 1 } else if r.is_negative() { -1 } else { 0 })
}
