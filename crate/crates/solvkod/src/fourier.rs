//! Fourier mode reduction of the pluricanonical equations.
//!
//! A lattice-periodic `f = u + iv` is expanded in the characters of a chart;
//! each mode turns `X̄_j f + m w_j f = 0` into a small linear system. The
//! Kodaira engine works on the complex form of those systems: a mode carries
//! a nonzero section only if its coefficients vanish identically in the fiber
//! variable, and the resulting integer conditions are closed by named rules.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::acs::{self, AcStructure, AcsError};
use crate::canonical::{pluricanonical_system, CanonicalError, ComplexEquation, PluriSystem, RealPde};
use crate::linalg::{self, Mat};
use crate::scalar_expr::{Atom, Monomial, SymbolKind};
use crate::solvmanifold::{Chart, ModelError, SolvmanifoldModel};
use crate::{Ctx, Expr, ExprError};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FourierError {
    #[error("ansatz mismatch: {0}")]
    AnsatzMismatch(String),
    #[error("determinant needs an algebraic square system")]
    KindMismatch,
    #[error("system is not of rotation form")]
    NotDecouplable,
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
    #[error(transparent)]
    Acs(#[from] AcsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Algebraic,
    Ode,
}

/// Per-mode linear system in `(u_I, v_I)`.
#[derive(Clone, Debug)]
pub struct ModeSystem {
    pub chart: String,
    /// Indices of the real PDE rows used.
    pub rows: Vec<usize>,
    pub kind: ModeKind,
    pub fiber: Option<String>,
    pub modes: Vec<String>,
    pub unknowns: Vec<String>,
    /// Algebraic: coefficients of `unknowns`; ode: `M` in `(u', v') = M (u, v)`.
    pub matrix: Mat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetParts {
    pub det: Expr,
    pub re: Expr,
    pub im: Expr,
}

fn red(ctx: &Ctx, e: &Expr) -> Expr {
    ctx.reduce(e)
}

/// `[u, v, u', v']` coefficients of one real row after the chart substitution.
fn reduce_row(ctx: &Ctx, row: &RealPde, chart: &Chart, coords: &[String]) -> Result<[Expr; 4], FourierError> {
    let mut out = [row.u.clone(), row.v.clone(), Expr::zero(), Expr::zero()];
    for (slot, map) in [(0usize, &row.du), (1, &row.dv)] {
        for (c, coef) in map {
            if chart.fiber.as_deref() == Some(c.as_str()) {
                out[slot + 2] = &out[slot + 2] + coef;
            } else if let Some(mu) = chart.multipliers.get(c) {
                out[slot] = &out[slot] + &(coef * mu);
            } else if chart.requires_zero.is_empty() {
                return Err(FourierError::AnsatzMismatch(format!("chart {} does not expand `{c}`", chart.name)));
            }
        }
    }
    let out = out.map(|e| red(ctx, &e));
    check_ring(&out, chart, coords)?;
    Ok(out)
}

fn check_ring(es: &[Expr], chart: &Chart, coords: &[String]) -> Result<(), FourierError> {
    for e in es {
        for c in coords {
            if chart.fiber.as_deref() != Some(c.as_str()) && e.depends_on(c) {
                return Err(FourierError::AnsatzMismatch(format!("chart {}: coefficient `{e}` depends on `{c}`", chart.name)));
            }
        }
    }
    Ok(())
}

/// Substitutes each chart's Fourier ansatz into the real rows.
///
/// Every complex equation gives one stage per chart: algebraic when the fiber
/// derivative is absent, otherwise an ODE solved for `(u', v')`. When both
/// equations carry fiber derivatives a combined algebraic system in
/// `(u, v, u', v')` is added.
pub fn mode_reduce(ctx: &Ctx, pde: &PluriSystem, model: &SolvmanifoldModel) -> Result<Vec<ModeSystem>, FourierError> {
    let mut out = Vec::new();
    for chart in &model.charts {
        let rows: Vec<[Expr; 4]> =
            pde.real.iter().map(|r| reduce_row(ctx, r, chart, &model.coordinates)).collect::<Result<_, _>>()?;
        let mut odes = 0;
        for pair in 0..rows.len() / 2 {
            let (r0, r1) = (&rows[2 * pair], &rows[2 * pair + 1]);
            let has_d = !(r0[2].is_zero() && r0[3].is_zero() && r1[2].is_zero() && r1[3].is_zero());
            let base = |kind, unknowns: &[&str], matrix| ModeSystem {
                chart: chart.name.clone(),
                rows: vec![2 * pair, 2 * pair + 1],
                kind,
                fiber: chart.fiber.clone(),
                modes: chart.modes.clone(),
                unknowns: unknowns.iter().map(|s| s.to_string()).collect(),
                matrix,
            };
            if !has_d {
                let m = vec![vec![r0[0].clone(), r0[1].clone()], vec![r1[0].clone(), r1[1].clone()]];
                if m.iter().flatten().all(|e| e.is_zero()) {
                    continue;
                }
                out.push(base(ModeKind::Algebraic, &["u", "v"], m));
                continue;
            }
            odes += 1;
            let d = vec![vec![r0[2].clone(), r0[3].clone()], vec![r1[2].clone(), r1[3].clone()]];
            let c = vec![vec![r0[0].clone(), r0[1].clone()], vec![r1[0].clone(), r1[1].clone()]];
            if let Ok(dinv) = linalg::inverse(ctx, &d) {
                let m = linalg::reduce(ctx, &linalg::neg(&linalg::mul(ctx, &dinv, &c)));
                out.push(base(ModeKind::Ode, &["u", "v"], m));
            }
        }
        if odes == 2 {
            out.push(ModeSystem {
                chart: chart.name.clone(),
                rows: (0..rows.len()).collect(),
                kind: ModeKind::Algebraic,
                fiber: chart.fiber.clone(),
                modes: chart.modes.clone(),
                unknowns: ["u", "v", "u'", "v'"].iter().map(|s| s.to_string()).collect(),
                matrix: rows.iter().map(|r| r.to_vec()).collect(),
            });
        }
    }
    Ok(out)
}

impl ModeSystem {
    /// Multiplies every row by `s`; ode systems are returned unchanged.
    pub fn scaled(&self, ctx: &Ctx, s: &Expr) -> ModeSystem {
        let mut out = self.clone();
        if self.kind == ModeKind::Algebraic {
            out.matrix = linalg::reduce(ctx, &linalg::scale(&self.matrix, s));
        }
        out
    }

    /// Replaces auxiliary mode symbols by their integer-index definitions.
    pub fn with_mode_defs(&self, ctx: &Ctx, chart: &Chart) -> Result<ModeSystem, FourierError> {
        let mut out = self.clone();
        if chart.mode_defs.is_empty() {
            return Ok(out);
        }
        out.matrix = self
            .matrix
            .iter()
            .map(|r| r.iter().map(|e| ctx.substitute(e, &chart.mode_defs)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        let mut modes = Vec::new();
        for m in &self.modes {
            match chart.mode_defs.get(m) {
                Some(d) => {
                    for s in d.free_symbols() {
                        if ctx.symbol(&s).map(|i| i.kind == SymbolKind::Mode).unwrap_or(false) && !modes.contains(&s) {
                            modes.push(s);
                        }
                    }
                }
                None => {
                    if !modes.contains(m) {
                        modes.push(m.clone())
                    }
                }
            }
        }
        modes.sort();
        out.modes = modes;
        Ok(out)
    }
}

/// Row normalization of the reference displays: a fixed factor, or the
/// inverse of one derivative coefficient of the first row.
#[derive(Clone, Debug)]
pub enum Layout {
    Fixed(&'static str),
    Monic(&'static str),
}

/// Display normalization for `(manifold, structure, chart, first row)`.
pub fn display_layout(manifold: &str, structure: &str, chart: &str, first_row: usize) -> Option<Layout> {
    match (manifold, structure, chart, first_row) {
        ("Mk", "Js", "B", 2) => Some(Layout::Monic("z")),
        ("Mk", "Jr", "A", 0) => Some(Layout::Fixed("sqrt(2)")),
        ("N", "J", "A", 2) => Some(Layout::Fixed("2")),
        ("N", "Jp", "A", 2) => Some(Layout::Fixed("-2*i/pi")),
        ("N", "Ja", "A", 2) => Some(Layout::Fixed("4")),
        ("N", "Jabc", "A", 2) => Some(Layout::Fixed("2")),
        ("Mlambda", "Jabc", "A", 2) => Some(Layout::Fixed("4")),
        _ => None,
    }
}

/// Applies [`display_layout`] to a system produced by [`mode_reduce`].
pub fn display_form(ctx: &Ctx, pde: &PluriSystem, manifold: &str, structure: &str, s: &ModeSystem) -> Result<ModeSystem, FourierError> {
    let first = s.rows[0];
    let scale = match display_layout(manifold, structure, &s.chart, first) {
        None => return Ok(s.clone()),
        Some(Layout::Fixed(t)) => ctx.parse(t)?,
        Some(Layout::Monic(c)) => {
            let d = pde.real[first].du.get(c).cloned().unwrap_or_else(Expr::zero);
            ctx.try_inv(&d)?
        }
    };
    Ok(s.scaled(ctx, &scale))
}

pub fn mode_determinant(ctx: &Ctx, s: &ModeSystem) -> Result<DetParts, FourierError> {
    if s.kind != ModeKind::Algebraic || s.matrix.len() != s.unknowns.len() {
        return Err(FourierError::KindMismatch);
    }
    let det = red(ctx, &linalg::det(ctx, &s.matrix));
    let re = red(ctx, &det.re());
    let im = red(ctx, &det.im());
    Ok(DetParts { det, re, im })
}

/// Antiderivative of sums of `w^p` and `c·exp(a·w)` terms.
pub fn integrate(ctx: &Ctx, e: &Expr, var: &str) -> Result<Expr, FourierError> {
    let mut out = Expr::zero();
    for (mono, c) in e.terms() {
        let term = Expr::from_monomial(mono).scale(c);
        let mut exp_arg = None;
        let mut power = 0i64;
        for (a, p) in mono.iter() {
            match a {
                Atom::Sym(s) if s == var => power = p,
                Atom::Exp(arg) if arg.depends_on(var) => exp_arg = Some(((**arg).clone(), p)),
                other => {
                    if Expr::from_monomial(&Monomial::atom(other.clone(), 1)).depends_on(var) {
                        return Err(FourierError::NotDecouplable);
                    }
                }
            }
        }
        match (exp_arg, power) {
            (None, p) if p != -1 => {
                out = &out + &(&term * &Expr::sym(var)).scale_ratio(&BigRational::new(1.into(), (p + 1).into()));
            }
            (Some((arg, p)), 0) => {
                let rate = red(ctx, &arg.diff(var).scale_ratio(&BigRational::from_integer(p.into())));
                if rate.depends_on(var) {
                    return Err(FourierError::NotDecouplable);
                }
                out = &out + &ctx.mul(&term, &ctx.try_inv(&rate)?);
            }
            _ => return Err(FourierError::NotDecouplable),
        }
    }
    Ok(red(ctx, &out))
}

/// Decoupled form of a rotation-symmetric mode ODE.
#[derive(Clone, Debug)]
pub struct Decoupled {
    /// `ξ' = xi_rate·ξ`, `ζ' = zeta_rate·ζ` with `u = i(ξ − ζ)`, `v = ξ + ζ`.
    pub xi_rate: Expr,
    pub zeta_rate: Expr,
    pub xi: Expr,
    pub zeta: Expr,
    pub u: Expr,
    pub v: Expr,
    /// The two rates are not conjugate, so `ξ` and `ζ` cannot pair into real data.
    pub reality_obstruction: bool,
}

pub fn decouple_and_solve(ctx: &Ctx, s: &ModeSystem) -> Result<Decoupled, FourierError> {
    if s.kind != ModeKind::Ode || s.matrix.len() != 2 {
        return Err(FourierError::NotDecouplable);
    }
    let m = &s.matrix;
    let p = &m[0][0];
    let q = &m[1][0];
    if !ctx.equal(p, &m[1][1]) || !ctx.equal(&-q, &m[0][1]) {
        return Err(FourierError::NotDecouplable);
    }
    let fiber = s.fiber.as_deref().ok_or(FourierError::NotDecouplable)?;
    let xi_rate = red(ctx, &(p + &q.mul_i()));
    let zeta_rate = red(ctx, &(p - &q.mul_i()));
    let xi = integrate(ctx, &xi_rate, fiber)?.exp();
    let zeta = integrate(ctx, &zeta_rate, fiber)?.exp();
    let u = red(ctx, &(&xi - &zeta).mul_i());
    let v = red(ctx, &(&xi + &zeta));
    let reality_obstruction = !ctx.equal(&xi_rate, &zeta_rate.conj());
    Ok(Decoupled { xi_rate, zeta_rate, xi, zeta, u, v, reality_obstruction })
}

/// Fiber sample points: 41 per period plus 5 outside it.
pub fn fiber_grid(period: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..41).map(|i| period * i as f64 / 40.0).collect();
    g.extend([-2.0, -1.0, 1.5, 2.5, 3.0].iter().map(|s| s * period));
    g
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanEvidence {
    pub window: i64,
    pub samples: usize,
    /// Modes scanned, in the order used by the points below.
    pub modes: Vec<String>,
    /// `(sample index, integer mode)` pairs where the determinant vanishes identically.
    pub vanishing_modes: Vec<(usize, Vec<i64>)>,
    pub min_abs_det: f64,
    /// Points where `|det| < 1e-8` without symbolic vanishing.
    pub counterexamples: Vec<(usize, Vec<i64>, f64)>,
}

struct Compiled {
    keys: Vec<Vec<i32>>,
    /// `vals[k][g]`: coefficient of mode monomial `k` at grid point `g`.
    vals: Vec<Vec<Complex64>>,
}

fn compile(e: &Expr, modes: &[String], fiber: Option<&str>, grid: &[f64]) -> Result<Compiled, FourierError> {
    let groups = e.split_by_atoms(|a| matches!(a, Atom::Sym(s) if modes.contains(s)));
    let mut keys = Vec::new();
    let mut vals = Vec::new();
    for (mono, coef) in groups {
        keys.push(modes.iter().map(|m| mono.sym_exponent(m) as i32).collect());
        let mut row = Vec::new();
        for &x in grid {
            let mut env = BTreeMap::new();
            if let Some(f) = fiber {
                env.insert(f.to_string(), x);
            }
            let v = coef.eval(&env).map_err(|e| match e {
                ExprError::UnboundSymbol(s) => FourierError::UnboundParameter(s),
                o => FourierError::Expr(o),
            })?;
            row.push(v);
            if fiber.is_none() {
                break;
            }
        }
        vals.push(row);
    }
    Ok(Compiled { keys, vals })
}

fn mode_points(n: usize, window: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for v in -window..=window {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn mode_binding(modes: &[String], p: &[i64]) -> BTreeMap<String, Expr> {
    modes.iter().zip(p).map(|(m, v)| (m.clone(), Expr::int(*v))).collect()
}

/// Exhaustive window scan of an algebraic system's determinant.
///
/// Every parameter except the integer modes and the fiber variable must be
/// bound by each sample. Auxiliary modes should be expanded first with
/// [`ModeSystem::with_mode_defs`].
pub fn scan_nonvanishing(
    ctx: &Ctx,
    s: &ModeSystem,
    window: i64,
    samples: &[BTreeMap<String, Expr>],
    grid: &[f64],
) -> Result<ScanEvidence, FourierError> {
    let d = mode_determinant(ctx, s)?.det;
    let fiber = s.fiber.as_deref();
    // modes absent from the matrix do not affect the determinant
    let modes: Vec<String> = s.modes.iter().filter(|m| s.matrix.iter().flatten().any(|e| e.depends_on(m))).cloned().collect();
    let points = mode_points(modes.len(), window);
    let mut vanishing = Vec::new();
    let mut counter = Vec::new();
    let mut min_abs = f64::INFINITY;
    for (si, sample) in samples.iter().enumerate() {
        let ds = ctx.substitute(&d, sample)?;
        let allowed: BTreeSet<String> = modes.iter().cloned().chain(fiber.map(|f| f.to_string())).collect();
        if let Some(x) = ds.free_symbols().into_iter().find(|x| !allowed.contains(x)) {
            return Err(FourierError::UnboundParameter(x));
        }
        let comp = compile(&ds, &modes, fiber, grid)?;
        let results: Vec<(Vec<i64>, Option<f64>, Option<f64>)> = points
            .par_iter()
            .map(|p| {
                let npts = comp.vals.first().map(|v| v.len()).unwrap_or(1);
                let mut min_here = f64::INFINITY;
                let mut max_here = 0.0f64;
                for g in 0..npts {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, key) in comp.keys.iter().enumerate() {
                        let mut mono = 1.0f64;
                        for (e, v) in key.iter().zip(p) {
                            mono *= (*v as f64).powi(*e);
                        }
                        acc += comp.vals[k][g] * mono;
                    }
                    min_here = min_here.min(acc.norm());
                    max_here = max_here.max(acc.norm());
                }
                if max_here < 1e-9 {
                    let exact = ctx.substitute(&ds, &mode_binding(&modes, p)).map(|e| ctx.is_zero(&e)).unwrap_or(false);
                    if exact {
                        return (p.clone(), None, None);
                    }
                }
                let low = if min_here < 1e-8 { Some(min_here) } else { None };
                (p.clone(), Some(min_here), low)
            })
            .collect();
        for (p, m, low) in results {
            match m {
                None => vanishing.push((si, p)),
                Some(v) => {
                    min_abs = min_abs.min(v);
                    if let Some(l) = low {
                        counter.push((si, p, l));
                    }
                }
            }
        }
    }
    Ok(ScanEvidence { modes, window, samples: samples.len(), vanishing_modes: vanishing, min_abs_det: min_abs, counterexamples: counter })
}

/// Gaussian elimination with partial pivoting.
pub fn numeric_det(mut a: Vec<Vec<Complex64>>) -> Complex64 {
    let n = a.len();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].norm().partial_cmp(&a[j][c].norm()).unwrap()).unwrap();
        if a[piv][c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                let t = a[c][k];
                a[r][k] -= f * t;
            }
        }
    }
    det
}

// ---------------------------------------------------------------------------
// Kodaira verdicts

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Rule {
    PiIrrational,
    EllipticConstancy,
    RealityObstruction,
    ExponentialGrowth,
    ContinuityNeighborhood,
    SumOfSquares,
    ContinuousVanishingAtPoints,
    LatticeIncommensurability,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    SymbolicProved,
    WindowVerified { window: i64, samples: usize },
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kod {
    NegInf,
    Value(u8),
}

impl Serialize for Kod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Kod::NegInf => s.serialize_str("-inf"),
            Kod::Value(v) => s.serialize_u8(*v),
        }
    }
}

impl std::fmt::Display for Kod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kod::NegInf => write!(f, "-inf"),
            Kod::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Plurigenera {
    /// Value valid for every `m ≥ 1`, when established.
    pub all: Option<u32>,
    /// `P_m` for `m = 1..=max_power`.
    pub table: BTreeMap<u32, u32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanSummary {
    #[serde(rename = "N")]
    pub n: i64,
    pub samples: usize,
    pub min_abs_det: f64,
    pub system: String,
    pub vanishing_modes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct KodairaVerdict {
    pub manifold: String,
    pub structure: String,
    pub params: BTreeMap<String, String>,
    pub plurigenera: Plurigenera,
    pub kod: Option<Kod>,
    pub status: Status,
    pub rules_fired: Vec<Rule>,
    pub trail: Vec<String>,
    /// Explicit sections `f` for `m = 1` when `P_1 > 0`.
    pub sections: Vec<String>,
    pub scan: Option<ScanSummary>,
}

#[derive(Clone, Debug)]
pub struct KodOptions {
    pub window: i64,
    pub max_power: u32,
    /// Powers `m = 1..=samples` evaluated by the window scan.
    pub samples: u32,
    pub scan: bool,
}

impl Default for KodOptions {
    fn default() -> Self {
        KodOptions { window: 10, max_power: 5, samples: 5, scan: true }
    }
}

/// Values used for family and lattice symbols left unbound.
pub fn default_binding(name: &str) -> Option<Expr> {
    Some(match name {
        "k" => Expr::int(1),
        "lambda" => Expr::rational(-3, 4),
        "u1" | "v2" | "delta" | "n" => Expr::int(1),
        "u2" | "v1" => Expr::int(0),
        _ => return None,
    })
}

#[derive(Default)]
struct Trail {
    rules: Vec<Rule>,
    notes: Vec<String>,
}

impl Trail {
    fn fire(&mut self, r: Rule, note: String) {
        if !self.rules.contains(&r) {
            self.rules.push(r);
        }
        self.notes.push(format!("{r:?}: {note}"));
    }
}

#[derive(Clone, Debug)]
struct RealEq {
    e: Expr,
    /// Comes from an equation carrying the fiber derivative.
    ode: bool,
}

#[derive(Clone, Debug)]
enum Powers {
    All,
    Only(BTreeSet<u32>),
}

#[derive(Clone, Debug)]
struct Solution {
    fixed: BTreeMap<String, Expr>,
    powers: Powers,
    empty: bool,
    stuck: Vec<Expr>,
}

fn atom_depends(a: &Atom<BigInt>, w: &str) -> bool {
    Expr::from_monomial(&Monomial::atom(a.clone(), 1)).depends_on(w)
}

/// Coefficients of the linearly independent functions `w^p e^{λw}`.
fn fiber_groups(e: &Expr, fiber: Option<&str>) -> Vec<Expr> {
    match fiber {
        None => vec![e.clone()],
        Some(w) => e.split_by_atoms(|a| atom_depends(a, w)).into_values().collect(),
    }
}

fn algebraic(e: &Expr, allowed: &BTreeSet<String>) -> bool {
    e.terms().all(|(m, _)| {
        m.iter().all(|(a, _)| match a {
            Atom::Pi => true,
            Atom::Sym(s) => allowed.contains(s),
            Atom::Sqrt(p) => !p.terms().any(|(pm, _)| pm.iter().any(|(x, _)| matches!(x, Atom::Pi))) && algebraic(p, allowed),
            Atom::Exp(_) => false,
        })
    })
}

fn has_pi(e: &Expr) -> bool {
    e.terms().any(|(m, _)| m.iter().any(|(a, _)| matches!(a, Atom::Pi)))
}

struct Stage<'a> {
    ctx: &'a Ctx,
    unknowns: Vec<String>,
    allowed: BTreeSet<String>,
}

impl Stage<'_> {
    /// Real, π-free conditions equivalent to `c ≡ 0` in the fiber.
    fn expand(&self, c: &Expr, fiber: Option<&str>, ode: bool, elliptic: bool, label: &str, trail: &mut Trail) -> Vec<RealEq> {
        let ctx = self.ctx;
        let c = red(ctx, c);
        if c.is_zero() {
            return vec![];
        }
        let groups = fiber_groups(&c, fiber);
        let involved = self.unknowns.iter().filter(|u| c.depends_on(u)).count();
        if elliptic && involved >= 2 {
            trail.fire(Rule::EllipticConstancy, format!("{label}: pure derivative symbol in {involved} periodic directions"));
        } else if fiber.map(|w| c.depends_on(w)).unwrap_or(false) {
            trail.fire(Rule::ContinuousVanishingAtPoints, format!("{label}: coefficient vanishes at isolated {} only", fiber.unwrap()));
        }
        let mut out = Vec::new();
        for g in groups {
            let parts: Vec<Expr> = [red(ctx, &g.re()), red(ctx, &g.im())].into_iter().filter(|e| !e.is_zero()).collect();
            if parts.len() == 2 && parts.iter().all(|p| self.unknowns.iter().any(|u| p.depends_on(u))) {
                trail.fire(Rule::SumOfSquares, format!("{label}: |{g}|^2 is a sum of two real squares"));
            }
            for p in parts {
                if has_pi(&p) && algebraic(&p, &self.allowed) {
                    let ps: Vec<Expr> = p.split_by_atoms(|a| matches!(a, Atom::Pi)).into_values().collect();
                    if ps.len() > 1 {
                        trail.fire(Rule::PiIrrational, format!("{label}: {p} = 0 splits by powers of pi"));
                    }
                    out.extend(ps.into_iter().map(|e| RealEq { e, ode }));
                } else {
                    out.push(RealEq { e: p, ode });
                }
            }
        }
        out
    }

    fn solve(&self, eqs: Vec<RealEq>, mut sol: Solution, trail: &mut Trail) -> Solution {
        let ctx = self.ctx;
        let mut pending = eqs;
        loop {
            let mut next = Vec::new();
            for q in &pending {
                let e = match ctx.substitute(&q.e, &sol.fixed) {
                    Ok(e) => red(ctx, &e),
                    Err(_) => q.e.clone(),
                };
                if !e.is_zero() {
                    next.push(RealEq { e, ode: q.ode });
                }
            }
            pending = next;
            if pending.is_empty() {
                return sol;
            }
            let mut progressed = false;
            for idx in 0..pending.len() {
                let q = pending[idx].clone();
                if q.e.free_symbols().iter().any(|s| !self.allowed.contains(s)) {
                    continue;
                }
                let us: Vec<String> = self.unknowns.iter().filter(|u| q.e.depends_on(u)).cloned().collect();
                if us.is_empty() {
                    let Some(roots) = power_roots(ctx, &q.e) else { continue };
                    if q.ode && roots.is_empty() {
                        trail.fire(Rule::ExponentialGrowth, format!("growth rate {} of the zero mode never vanishes", q.e));
                    } else if roots.is_empty() {
                        trail.notes.push(format!("{} = 0 has no root m >= 1", q.e));
                    }
                    sol.powers = match &sol.powers {
                        Powers::All => Powers::Only(roots),
                        Powers::Only(s) => Powers::Only(s.intersection(&roots).cloned().collect()),
                    };
                    if matches!(&sol.powers, Powers::Only(s) if s.is_empty()) {
                        sol.empty = true;
                        return sol;
                    }
                    pending.remove(idx);
                    progressed = true;
                    break;
                }
                for u in &us {
                    if q.e.degree_in(u) != 1 || q.e.terms().any(|(m, _)| m.sym_exponent(u) < 0) {
                        continue;
                    }
                    let cs = q.e.collect_powers(u);
                    let coef = cs.get(&1).cloned().unwrap_or_else(Expr::zero);
                    if self.unknowns.iter().any(|v| coef.depends_on(v)) || cs.keys().any(|k| *k != 0 && *k != 1) {
                        continue;
                    }
                    let rest = cs.get(&0).cloned().unwrap_or_else(Expr::zero);
                    if let Ok(val) = ctx.div(&-&rest, &coef) {
                        let mut b = BTreeMap::new();
                        b.insert(u.clone(), val.clone());
                        for v in sol.fixed.values_mut() {
                            if let Ok(x) = ctx.substitute(v, &b) {
                                *v = x;
                            }
                        }
                        sol.fixed.insert(u.clone(), val);
                        progressed = true;
                        break;
                    }
                }
                if progressed {
                    break;
                }
                if let Some(vars) = definite_form(ctx, &q.e, &us) {
                    trail.fire(Rule::SumOfSquares, format!("{} = 0 is a definite quadratic form", q.e));
                    for v in vars {
                        sol.fixed.insert(v, Expr::zero());
                    }
                    progressed = true;
                    break;
                }
            }
            if !progressed {
                sol.stuck = pending.into_iter().map(|q| q.e).collect();
                return sol;
            }
        }
    }
}

/// Positive integer roots of a polynomial in `m`; `None` when undecidable here.
fn power_roots(ctx: &Ctx, e: &Expr) -> Option<BTreeSet<u32>> {
    let cs = e.collect_powers("m");
    if cs.keys().any(|k| *k < 0) {
        return None;
    }
    if cs.len() <= 1 {
        return Some(BTreeSet::new());
    }
    let mut coeffs = Vec::new();
    for c in cs.values() {
        coeffs.push(c.as_rational()?);
    }
    let lead = coeffs.last().unwrap().abs();
    let bound = coeffs.iter().map(|c| (c.abs() / &lead).to_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max) + 1.0;
    let mut out = BTreeSet::new();
    for r in 1..=(bound.min(1.0e6) as u32) {
        let mut b = BTreeMap::new();
        b.insert("m".to_string(), Expr::int(r as i64));
        if ctx.substitute(e, &b).map(|x| ctx.is_zero(&x)).unwrap_or(false) {
            out.insert(r);
        }
    }
    Some(out)
}

/// Unknowns forced to zero when `e` is a definite quadratic form in them.
fn definite_form(ctx: &Ctx, e: &Expr, us: &[String]) -> Option<Vec<String>> {
    let n = us.len();
    let mut q = vec![vec![Expr::zero(); n]; n];
    for (mono, c) in e.terms() {
        let degs: Vec<i64> = us.iter().map(|u| mono.sym_exponent(u)).collect();
        if degs.iter().sum::<i64>() != 2 || degs.iter().any(|d| *d < 0) {
            return None;
        }
        let rest: BTreeMap<_, _> = mono.iter().filter(|(a, _)| !matches!(a, Atom::Sym(s) if us.contains(s))).map(|(a, p)| (a.clone(), p)).collect();
        let mut r = Expr::from_coeff(c.clone());
        for (a, p) in rest {
            r = &r * &Expr::from_monomial(&Monomial::atom(a, p));
        }
        if !r.free_symbols().is_empty() {
            return None;
        }
        let idx: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat(i).take(degs[i] as usize)).collect();
        let (i, j) = (idx[0], idx[1]);
        if i == j {
            q[i][i] = &q[i][i] + &r;
        } else {
            let h = r.scale_ratio(&BigRational::new(1.into(), 2.into()));
            q[i][j] = &q[i][j] + &h;
            q[j][i] = &q[j][i] + &h;
        }
    }
    let mut sign = 0i32;
    for k in 1..=n {
        let sub: Vec<usize> = (0..k).collect();
        let minor = red(ctx, &linalg::det(ctx, &linalg::submatrix(&q, &sub, &sub)));
        let v = minor.eval::<f64>(&BTreeMap::new()).ok()?;
        if v.im.abs() > 1e-12 || v.re.abs() < 1e-9 {
            return None;
        }
        let s = if v.re > 0.0 { 1 } else { -1 };
        if k == 1 {
            sign = s;
        } else {
            // positive definite: all minors > 0; negative definite: alternating from < 0
            let want = if sign > 0 { 1 } else if k % 2 == 0 { 1 } else { -1 };
            if s != want {
                return None;
            }
        }
    }
    Some(us.to_vec())
}

struct ModeEq {
    /// Coefficient of the fiber derivative.
    a: Expr,
    /// Coefficient of the mode after the chart substitution.
    b: Expr,
    pure: bool,
}

fn complex_mode_eqs(ctx: &Ctx, eqs: &[ComplexEquation; 2], chart: &Chart, coords: &[String]) -> Result<Vec<ModeEq>, FourierError> {
    let mut out = Vec::new();
    for eq in eqs {
        let mut a = Expr::zero();
        let mut b = eq.zeroth.clone();
        for (c, d) in &eq.deriv {
            if chart.fiber.as_deref() == Some(c.as_str()) {
                a = &a + d;
            } else if let Some(mu) = chart.multipliers.get(c) {
                b = &b + &(d * mu);
            } else if chart.requires_zero.is_empty() {
                return Err(FourierError::AnsatzMismatch(format!("chart {} does not expand `{c}`", chart.name)));
            }
        }
        let (a, b) = (red(ctx, &a), red(ctx, &b));
        check_ring(&[a.clone(), b.clone()], chart, coords)?;
        out.push(ModeEq { a, b, pure: eq.zeroth.is_zero() });
    }
    Ok(out)
}

fn numeric_sign(e: &Expr) -> Option<i32> {
    let v = e.eval::<f64>(&BTreeMap::new()).ok()?;
    if v.im.abs() > 1e-12 || v.re.abs() < 1e-12 {
        return None;
    }
    Some(if v.re > 0.0 { 1 } else { -1 })
}

fn is_fixed_zero(sol: &Solution, m: &str) -> bool {
    sol.fixed.get(m).map(|v| v.is_zero()).unwrap_or(false)
}

/// Integer modes whose orbit under the fiber translation would accumulate.
fn orbit_forced(chart: &Chart, sol: &Solution) -> Vec<String> {
    let live: Vec<(&String, i32)> = chart
        .orbit
        .iter()
        .filter(|(m, _)| !is_fixed_zero(sol, m))
        .filter_map(|(m, e)| numeric_sign(e).map(|s| (m, s)))
        .collect();
    if live.is_empty() {
        return vec![];
    }
    if chart.incommensurable || live.iter().all(|(_, s)| *s == live[0].1) {
        live.into_iter().map(|(m, _)| m.clone()).collect()
    } else {
        vec![]
    }
}

fn is_integer_valued(e: &Expr) -> bool {
    e.as_rational().map(|r| r.is_integer()).unwrap_or(false)
}

/// Integer polynomial in `m` (so integral for every `m`).
fn integral_in_m(e: &Expr) -> bool {
    e.collect_powers("m").iter().all(|(k, c)| *k >= 0 && is_integer_valued(c))
}

fn sample_bindings(j: &AcStructure) -> BTreeMap<String, String> {
    j.params.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
}

/// Binds unbound family and lattice symbols of `model` to defaults or to `params`.
pub fn bind_model(model: &SolvmanifoldModel, params: &BTreeMap<String, Expr>) -> Result<(SolvmanifoldModel, BTreeMap<String, Expr>), FourierError> {
    let mut bind = BTreeMap::new();
    for (name, info) in model.ctx.symbols() {
        if matches!(info.kind, SymbolKind::Param | SymbolKind::Lattice) {
            if let Some(v) = params.get(name).cloned().or_else(|| default_binding(name)) {
                bind.insert(name.clone(), v);
            }
        }
    }
    crate::solvmanifold::check_ranges(&bind)?;
    Ok((model.specialize(&bind)?, bind))
}

/// Plurigenera and Kodaira dimension of `structure` on `model`.
///
/// `params` binds structure parameters and, optionally, family and lattice
/// symbols; remaining family and lattice symbols take [`default_binding`].
pub fn decide_kodaira(
    model: &SolvmanifoldModel,
    structure: &str,
    params: &BTreeMap<String, Expr>,
    opts: &KodOptions,
) -> Result<KodairaVerdict, FourierError> {
    let (bm, mbind) = bind_model(model, params)?;
    let sparams: BTreeMap<String, Expr> =
        params.iter().filter(|(k, _)| acs::structure_params(structure).contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
    let j = acs::build(&bm, structure, &sparams)?;
    let ctx = j.ctx.clone();
    let m = Expr::sym("m");
    let sys = pluricanonical_system(&bm, &j, &m)?;
    let mut trail = Trail::default();
    let mut shown: BTreeMap<String, String> = mbind.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
    shown.extend(sparams.iter().map(|(k, v)| (k.clone(), v.to_string())));
    shown.extend(sample_bindings(&j));

    let free: BTreeSet<String> = sys
        .real
        .iter()
        .flat_map(|r| r.entries(&bm.coordinates))
        .flat_map(|e| e.free_symbols())
        .filter(|s| !bm.coordinates.contains(s) && s != "m")
        .collect();
    if let Some(s) = free.into_iter().next() {
        return Err(FourierError::UnboundParameter(s));
    }

    let mut status_window = false;
    let mut outcome: Option<(Solution, Chart)> = None;
    let mut inconclusive = None;
    let mut carried: Option<Solution> = None;
    // Equations that carried the fiber derivative in the previous chart.
    let mut prev_ode = vec![false; 2];
    for (ci, chart) in bm.charts.iter().enumerate() {
        if let Some(prev) = &carried {
            if !chart.requires_zero.iter().all(|r| is_fixed_zero(prev, r)) {
                inconclusive = Some(format!("chart {} needs {:?} = 0", chart.name, chart.requires_zero));
                break;
            }
        }
        let eqs = complex_mode_eqs(&ctx, &sys.complex, chart, &bm.coordinates)?;
        let mut allowed: BTreeSet<String> = chart.modes.iter().cloned().collect();
        allowed.insert("m".into());
        let stage = Stage { ctx: &ctx, unknowns: chart.modes.clone(), allowed };
        let fiber = chart.fiber.as_deref();
        let mut conds = Vec::new();
        let with_d: Vec<usize> = (0..eqs.len()).filter(|&k| !eqs[k].a.is_zero()).collect();
        for (k, e) in eqs.iter().enumerate() {
            if e.a.is_zero() {
                let label = format!("chart {}, equation {}", chart.name, k + 1);
                conds.extend(stage.expand(&e.b, fiber, prev_ode[k], e.pure, &label, &mut trail));
            }
        }
        if with_d.len() == 2 {
            let w = red(&ctx, &(&(&eqs[0].a * &eqs[1].b) - &(&eqs[1].a * &eqs[0].b)));
            let label = format!("chart {}, compatibility of the two fiber equations", chart.name);
            conds.extend(stage.expand(&w, fiber, true, false, &label, &mut trail));
        }
        prev_ode = eqs.iter().map(|e| !e.a.is_zero()).collect();
        let start = Solution { fixed: BTreeMap::new(), powers: Powers::All, empty: false, stuck: vec![] };
        let mut sol = stage.solve(conds.clone(), start, &mut trail);
        if !sol.stuck.is_empty() {
            match window_modes(&ctx, &eqs, chart, opts) {
                Some(s) => {
                    status_window = true;
                    trail.notes.push(format!("chart {}: window N={} replaces {:?}", chart.name, opts.window, sol.stuck));
                    sol = s;
                }
                None => {
                    inconclusive = Some(format!("chart {}: unresolved {:?}", chart.name, sol.stuck));
                    break;
                }
            }
        }
        if sol.empty {
            outcome = Some((sol, chart.clone()));
            break;
        }
        loop {
            let forced = orbit_forced(chart, &sol);
            if forced.is_empty() {
                break;
            }
            trail.fire(Rule::LatticeIncommensurability, format!("chart {}: orbit of {:?} accumulates", chart.name, forced));
            let mut eqs2: Vec<RealEq> = Vec::new();
            for f in &forced {
                match sol.fixed.get(f) {
                    Some(v) => eqs2.push(RealEq { e: v.clone(), ode: false }),
                    None => {
                        sol.fixed.insert(f.clone(), Expr::zero());
                    }
                }
                sol.fixed.insert(f.clone(), Expr::zero());
            }
            sol = stage.solve(eqs2, sol, &mut trail);
            if sol.empty {
                break;
            }
        }
        if sol.empty || chart.fiber.is_none() {
            outcome = Some((sol, chart.clone()));
            break;
        }
        carried = Some(sol);
        if ci + 1 == bm.charts.len() {
            inconclusive = Some(format!("chart {} leaves a fiber ODE with no periodic chart after it", chart.name));
        }
    }

    let mut table = BTreeMap::new();
    let mut all = None;
    let mut sections = Vec::new();
    match (&outcome, &inconclusive) {
        (Some((sol, chart)), None) => {
            if sol.empty {
                all = Some(0);
                for p in 1..=opts.max_power {
                    table.insert(p, 0);
                }
            } else {
                let unfixed: Vec<&String> = chart.modes.iter().filter(|x| !sol.fixed.contains_key(*x)).collect();
                if !unfixed.is_empty() {
                    inconclusive = Some(format!("modes {unfixed:?} stay free"));
                } else {
                    let constant = matches!(sol.powers, Powers::All) && sol.fixed.values().all(integral_in_m);
                    for p in 1..=opts.max_power {
                        let allowed = match &sol.powers {
                            Powers::All => true,
                            Powers::Only(s) => s.contains(&p),
                        };
                        let mut b = BTreeMap::new();
                        b.insert("m".to_string(), Expr::int(p as i64));
                        let ok = allowed
                            && sol.fixed.values().all(|v| ctx.substitute(v, &b).map(|x| is_integer_valued(&red(&ctx, &x))).unwrap_or(false));
                        table.insert(p, ok as u32);
                    }
                    if constant {
                        all = Some(1);
                    }
                    if table.get(&1) == Some(&1) {
                        let mut b = BTreeMap::new();
                        b.insert("m".to_string(), Expr::int(1));
                        let modes: BTreeMap<String, Expr> =
                            sol.fixed.iter().map(|(k, v)| (k.clone(), red(&ctx, &ctx.substitute(v, &b).unwrap_or_else(|_| v.clone())))).collect();
                        let ph = model
                            .ctx
                            .parse(&chart.phase)
                            .and_then(|p| model.ctx.substitute(&p, &mbind))
                            .and_then(|p| ctx.substitute(&p, &modes));
                        if let Ok(ph) = ph {
                            sections.push(red(&ctx, &ph).to_string());
                        }
                    }
                }
            }
        }
        _ => {}
    }
    let kod = match all {
        Some(0) => Some(Kod::NegInf),
        Some(1) => Some(Kod::Value(0)),
        _ => None,
    };
    let status = if inconclusive.is_some() || kod.is_none() {
        if let Some(why) = &inconclusive {
            trail.notes.push(format!("inconclusive: {why}"));
        }
        Status::Inconclusive
    } else if status_window {
        Status::WindowVerified { window: opts.window, samples: opts.samples as usize }
    } else {
        Status::SymbolicProved
    };
    let scan = if opts.scan { primary_scan(&ctx, &sys, &bm, structure, opts)? } else { None };
    Ok(KodairaVerdict {
        manifold: bm.name.clone(),
        structure: structure.to_string(),
        params: shown,
        plurigenera: Plurigenera { all, table },
        kod,
        status,
        rules_fired: trail.rules,
        trail: trail.notes,
        sections,
        scan,
    })
}

/// Modes of a window whose equations vanish identically, for `m = 1`.
fn window_modes(ctx: &Ctx, eqs: &[ModeEq], chart: &Chart, opts: &KodOptions) -> Option<Solution> {
    let modes: Vec<String> = if chart.mode_defs.is_empty() {
        chart.modes.clone()
    } else {
        let mut v: Vec<String> = chart.mode_defs.values().flat_map(|d| d.free_symbols()).collect();
        v.extend(chart.modes.iter().filter(|m| !chart.mode_defs.contains_key(*m)).cloned());
        v.sort();
        v.dedup();
        v
    };
    let mut conds: Vec<Expr> = eqs.iter().filter(|e| e.a.is_zero()).map(|e| e.b.clone()).collect();
    let with_d: Vec<&ModeEq> = eqs.iter().filter(|e| !e.a.is_zero()).collect();
    if with_d.len() == 2 {
        conds.push(red(ctx, &(&(&with_d[0].a * &with_d[1].b) - &(&with_d[1].a * &with_d[0].b))));
    }
    let conds: Vec<Expr> = conds.iter().map(|c| ctx.substitute(c, &chart.mode_defs).ok()).collect::<Option<_>>()?;
    let pts = mode_points(modes.len(), opts.window);
    let mut survivors: Vec<Vec<i64>> = pts
        .par_iter()
        .filter(|p| {
            let mut b = mode_binding(&modes, p);
            b.insert("m".into(), Expr::int(1));
            conds.iter().all(|c| ctx.substitute(c, &b).map(|x| ctx.is_zero(&x)).unwrap_or(false))
        })
        .cloned()
        .collect();
    survivors.sort();
    if survivors.len() != 1 {
        return None;
    }
    let mut fixed = BTreeMap::new();
    let b = mode_binding(&modes, &survivors[0]);
    for m in &chart.modes {
        let v = match chart.mode_defs.get(m) {
            Some(d) => red(ctx, &ctx.substitute(d, &b).ok()?),
            None => b.get(m)?.clone(),
        };
        fixed.insert(m.clone(), v);
    }
    Some(Solution { fixed, powers: Powers::All, empty: false, stuck: vec![] })
}

/// Window scan of the displayed mode system, else the first algebraic one of the first chart.
fn primary_scan(ctx: &Ctx, sys: &PluriSystem, model: &SolvmanifoldModel, structure: &str, opts: &KodOptions) -> Result<Option<ScanSummary>, FourierError> {
    let systems = mode_reduce(ctx, sys, model)?;
    let Some(chart) = model.charts.first() else { return Ok(None) };
    let algebraic: Vec<&ModeSystem> = systems.iter().filter(|s| s.kind == ModeKind::Algebraic).collect();
    let displayed = algebraic.iter().find(|s| display_layout(&model.name, structure, &s.chart, s.rows[0]).is_some());
    let Some(s) = displayed.or_else(|| algebraic.iter().find(|s| s.chart == chart.name)) else { return Ok(None) };
    let chart = model.chart(&s.chart).unwrap_or(chart);
    let s = s.with_mode_defs(ctx, chart)?;
    let samples: Vec<BTreeMap<String, Expr>> = (1..=opts.samples)
        .map(|p| [("m".to_string(), Expr::int(p as i64))].into_iter().collect())
        .collect();
    let period = match chart.fiber.as_deref() {
        Some("x") => 2.0,
        _ => 1.0,
    };
    let ev = scan_nonvanishing(ctx, &s, opts.window, &samples, &fiber_grid(period))?;
    Ok(Some(ScanSummary {
        n: opts.window,
        samples: ev.samples,
        min_abs_det: ev.min_abs_det,
        system: format!("chart {} rows {:?}", s.chart, s.rows),
        vanishing_modes: ev.vanishing_modes.len(),
    }))
}
