//! Randomized identity checks shared by the `properties` and `acceptance` targets.
//!
//! Each check draws its inputs from a proptest runner and returns the first
//! failure as a string.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use solvkod::acs::{build, check_acs, nijenhuis_pair, structure_names, structure_params, AcStructure};
use solvkod::canonical::{canonical_torsion, dbar_tensor_power, pluricanonical_system};
use solvkod::exterior::{hodge_star, Coframe, InvariantForm};
use solvkod::fourier::{display_form, mode_determinant, mode_reduce, numeric_det, ModeKind, ModeSystem};
use solvkod::linalg;
use solvkod::solvmanifold::{builtin_symbolic, Builtin, SolvmanifoldModel};
use solvkod::{Ctx, Expr};

pub fn models() -> &'static Vec<SolvmanifoldModel> {
    static CELL: OnceLock<Vec<SolvmanifoldModel>> = OnceLock::new();
    CELL.get_or_init(|| Builtin::ALL.iter().map(|b| builtin_symbolic(*b)).collect())
}

/// Fixed seed when `deterministic`, else a fresh random one.
pub fn runner(cases: u32, deterministic: bool) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    if deterministic {
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
    } else {
        TestRunner::new(config)
    }
}

fn run<S: Strategy>(mut r: TestRunner, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    r.run(&s, f).map_err(|e| e.to_string())
}

fn q(n: i64, d: i64) -> Expr {
    Expr::rational(n, d)
}

fn rat() -> impl Strategy<Value = Expr> {
    (-9i64..=9, 1i64..=5).prop_map(|(n, d)| q(n, d))
}

fn nonzero_rat() -> impl Strategy<Value = Expr> {
    (1i64..=9, 1i64..=5, any::<bool>()).prop_map(|(n, d, s)| q(if s { n } else { -n }, d))
}

/// Constant coefficient: rational, optionally times a family parameter or π.
fn coeff(model: usize) -> impl Strategy<Value = Expr> {
    (rat(), 0usize..4).prop_map(move |(c, k)| {
        let extra = match (model, k) {
            (0, 1) => "k",
            (0, 2) => "k^2",
            (2, 1) => "lambda",
            (2, 2) => "1 + lambda",
            (_, 3) => "pi",
            _ => "1",
        };
        let ctx = &models()[model].ctx;
        ctx.reduce(&(&c * &ctx.parse(extra).unwrap()))
    })
}

fn form(model: usize, coframe: Coframe, degree: usize) -> impl Strategy<Value = InvariantForm> {
    let masks: Vec<u8> = (0u8..16).filter(|m| m.count_ones() as usize == degree).collect();
    prop::collection::vec(coeff(model), masks.len()).prop_map(move |cs| {
        let mut f = InvariantForm::zero(coframe, degree);
        for (m, c) in masks.iter().zip(cs) {
            f.add_term(*m, c);
        }
        f
    })
}

fn vector() -> impl Strategy<Value = Vec<Expr>> {
    prop::collection::vec(rat(), 4)
}

/// `d(d f) = 0` for random invariant forms of degree 0, 1 and 2 on model `model`.
pub fn d_squared(r: TestRunner, model: usize) -> Result<(), String> {
    let s = (0usize..3, form(model, Coframe::E, 1), form(model, Coframe::E, 2), coeff(model));
    run(r, s, |(p, f1, f2, c)| {
        let f = match p {
            0 => InvariantForm::scalar(Coframe::E, c),
            1 => f1,
            _ => f2,
        };
        let m = &models()[model];
        let dd = m.d(&m.d(&f).unwrap()).unwrap();
        prop_assert!(dd.reduce(&m.ctx).is_zero(), "{}: d^2({f}) = {dd}", m.name);
        Ok(())
    })
}

pub fn jacobi(r: TestRunner) -> Result<(), String> {
    run(r, (vector(), vector(), vector()), |(x, y, z)| {
        for m in models() {
            let br = |a: &[Expr], b: &[Expr]| m.lie_bracket(a, b);
            let s: Vec<Expr> = (0..4)
                .map(|k| m.ctx.reduce(&(&(&br(&x, &br(&y, &z))[k] + &br(&y, &br(&z, &x))[k]) + &br(&z, &br(&x, &y))[k])))
                .collect();
            prop_assert!(s.iter().all(|e| m.ctx.is_zero(e)), "{}: {:?}", m.name, s);
        }
        Ok(())
    })
}

/// `⋆⋆ = 1` on 2-forms for the flat metric and random diagonal metrics.
pub fn hodge_involution(r: TestRunner) -> Result<(), String> {
    run(r, (form(1, Coframe::E, 2), prop::collection::vec(nonzero_rat(), 4)), |(f, d)| {
        let ctx = &models()[1].ctx;
        let mut g = linalg::zeros(4, 4);
        for i in 0..4 {
            g[i][i] = ctx.reduce(&(&d[i] * &d[i]));
        }
        for g in [linalg::identity(4), g] {
            let ss = hodge_star(ctx, &hodge_star(ctx, &f, &g).unwrap(), &g).unwrap();
            prop_assert!(ss.equal(ctx, &f), "**({f}) = {ss}");
        }
        Ok(())
    })
}

/// The `(p,q)` pieces of a form have the right type and sum back to it.
pub fn bidegree_reconstruction(r: TestRunner) -> Result<(), String> {
    run(r, (0usize..=4, prop::collection::vec(coeff(1), 6)), |(p, seed)| {
        let masks: Vec<u8> = (0u8..16).filter(|m| m.count_ones() as usize == p).collect();
        let mut f = InvariantForm::zero(Coframe::Phi, p);
        for (m, c) in masks.iter().zip(seed.iter().cycle()) {
            f.add_term(*m, c.clone());
        }
        let ctx = &models()[1].ctx;
        let mut sum = InvariantForm::zero(Coframe::Phi, p);
        for ((a, b), piece) in &f.bidegree_split().unwrap() {
            prop_assert_eq!(a + b, p);
            prop_assert!(piece.coeffs().keys().all(|m| InvariantForm::mask_bidegree(*m) == (*a, *b)));
            prop_assert!(piece.equal(ctx, &f.part(*a, *b).unwrap()));
            sum = sum.add(piece).unwrap();
        }
        prop_assert!(sum.equal(ctx, &f));
        Ok(())
    })
}

/// Random admissible bindings for every structure family.
fn structure_bindings() -> impl Strategy<Value = BTreeMap<String, Expr>> {
    (rat(), rat(), 1i64..=6, 1i64..=6, nonzero_rat(), -4i64..=4, 1i64..=4, -4i64..=4, 1i64..=4).prop_map(
        |(a1, a2, g1, g2, a, u, du, v, dv)| {
            let mut b = BTreeMap::new();
            b.insert("alpha1".into(), a1.clone());
            b.insert("alpha2".into(), a2);
            b.insert("gamma1".into(), q(g1, 2));
            b.insert("gamma2".into(), q(g2, 3));
            b.insert("r".into(), a1);
            b.insert("a".into(), a);
            b.insert("u".into(), q(u, du));
            b.insert("v".into(), q(v, dv));
            b
        },
    )
}

/// Every registered structure on every model, bound by `b`.
///
/// `(a, b, c)` for the twistor family is the inverse stereographic image of `(u, v)`.
fn structures(b: &BTreeMap<String, Expr>) -> Vec<(usize, AcStructure)> {
    let mut out = Vec::new();
    for (mi, m) in models().iter().enumerate() {
        let ctx = &m.ctx;
        for name in structure_names(&m.name) {
            let keys = structure_params(name);
            let mut bind: BTreeMap<String, Expr> = b.iter().filter(|(k, _)| keys.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
            if *name == "Jabc" {
                let (u, v) = (&b["u"], &b["v"]);
                let n = ctx.reduce(&(&(&Expr::one() + &(u * u)) + &(v * v)));
                let inv = ctx.try_inv(&n).unwrap();
                bind.insert("a".into(), ctx.reduce(&(&(u * &Expr::int(2)) * &inv)));
                bind.insert("b".into(), ctx.reduce(&(&(v * &Expr::int(2)) * &inv)));
                bind.insert("c".into(), ctx.reduce(&(&(&(&Expr::one() - &(u * u)) - &(v * v)) * &inv)));
            }
            out.push((mi, build(m, name, &bind).unwrap_or_else(|e| panic!("{} {name} {bind:?}: {e}", m.name))));
        }
    }
    out
}

fn reduced(ctx: &Ctx, v: Vec<Expr>) -> Vec<Expr> {
    v.iter().map(|e| ctx.reduce(e)).collect()
}

pub fn j_squared(r: TestRunner) -> Result<(), String> {
    run(r, structure_bindings(), |b| {
        for (_, j) in structures(&b) {
            prop_assert!(check_acs(&j), "{} {}", j.manifold, j.name);
        }
        Ok(())
    })
}

/// `N(X,Y) = -N(Y,X)` and `N(JX,Y) = -J N(X,Y)`.
pub fn nijenhuis_symmetries(r: TestRunner) -> Result<(), String> {
    run(r, (structure_bindings(), vector(), vector()), |(b, x, y)| {
        for (mi, j) in structures(&b) {
            let m = &models()[mi];
            let ctx = &j.ctx;
            let nxy = nijenhuis_pair(m, &j, &x, &y);
            let nyx = nijenhuis_pair(m, &j, &y, &x);
            prop_assert!((0..4).all(|k| ctx.is_zero(&ctx.reduce(&(&nxy[k] + &nyx[k])))), "{} {} antisymmetry", j.manifold, j.name);
            let njx = reduced(ctx, nijenhuis_pair(m, &j, &j.apply(&x), &y));
            let jn = reduced(ctx, j.apply(&nxy));
            prop_assert!((0..4).all(|k| ctx.is_zero(&ctx.reduce(&(&njx[k] + &jn[k])))), "{} {} N(JX,Y) = -JN(X,Y)", j.manifold, j.name);
        }
        Ok(())
    })
}

/// `∂̄σ^{⊗m} = m ω ⊗ σ^{⊗m}` for `m ≤ 5`.
pub fn tensor_power_law(r: TestRunner) -> Result<(), String> {
    run(r, structure_bindings(), |b| {
        for (mi, j) in structures(&b) {
            let t = canonical_torsion(&models()[mi], &j).unwrap();
            for m in 1..=5u32 {
                let lhs = dbar_tensor_power(&t, m);
                prop_assert!(lhs.equal(&j.ctx, &t.omega.scale(&Expr::int(m as i64))), "{} {} m={m}", j.manifold, j.name);
            }
        }
        Ok(())
    })
}

pub struct OracleCase {
    pub label: String,
    pub ctx: Ctx,
    pub systems: Vec<ModeSystem>,
    pub symbols: Vec<String>,
}

/// Displayed algebraic mode systems of every structure family.
pub fn oracle_cases() -> &'static Vec<OracleCase> {
    static CELL: OnceLock<Vec<OracleCase>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut out = Vec::new();
        for (b, s, kv) in [
            (Builtin::Mk, "Js", vec![]),
            (Builtin::Mk, "Jr", vec![("r", "0")]),
            (Builtin::Mk, "Jr", vec![("r", "1/3")]),
            (Builtin::N, "J", vec![]),
            (Builtin::N, "Jp", vec![]),
            (Builtin::N, "Ja", vec![]),
            (Builtin::Mlambda, "J", vec![]),
            (Builtin::Mk, "Jabc", vec![("c", "0")]),
            (Builtin::N, "Jabc", vec![("c", "0")]),
            (Builtin::Mlambda, "Jabc", vec![("c", "0")]),
        ] {
            let model = builtin_symbolic(b);
            let bind = kv.iter().map(|(k, v)| (k.to_string(), model.ctx.parse(v).unwrap())).collect();
            let j = build(&model, s, &bind).unwrap();
            let sys = pluricanonical_system(&model, &j, &Expr::sym("m")).unwrap();
            let systems: Vec<ModeSystem> = mode_reduce(&j.ctx, &sys, &model)
                .unwrap()
                .iter()
                .map(|st| display_form(&j.ctx, &sys, b.name(), s, st).unwrap())
                .filter(|st| st.kind == ModeKind::Algebraic)
                .collect();
            let mut symbols: Vec<String> = systems.iter().flat_map(|x| x.matrix.iter().flatten().flat_map(|e| e.free_symbols())).collect();
            symbols.sort();
            symbols.dedup();
            out.push(OracleCase { label: format!("{} {s} {kv:?}", b.name()), ctx: j.ctx.clone(), systems, symbols });
        }
        out
    })
}

fn sample_value(name: &str, u: f64) -> f64 {
    match name {
        // stay on the sphere and inside the admissible ranges
        "lambda" => -0.95 + 0.4 * u,
        "gamma1" | "gamma2" | "alpha" | "delta" | "n" | "b" => 0.5 + u,
        "a" => 0.8 * u - 0.4,
        _ => 4.0 * u - 2.0,
    }
}

/// Symbolic determinants against LU determinants of the numeric matrices.
pub fn determinant_oracle(r: TestRunner) -> Result<(), String> {
    run(r, prop::collection::vec(0.0f64..1.0, 32), |us| {
        for c in oracle_cases() {
            let mut env: BTreeMap<String, f64> = c.symbols.iter().enumerate().map(|(i, s)| (s.clone(), sample_value(s, us[i % us.len()]))).collect();
            if c.label.contains("Jabc") {
                let a = env.get("a").copied().unwrap_or(0.0);
                env.insert("b".into(), (1.0 - a * a).sqrt());
            }
            for s in &c.systems {
                let d = mode_determinant(&c.ctx, s).unwrap();
                let sym: Complex64 = d.det.eval(&env).unwrap();
                let num = numeric_det(s.matrix.iter().map(|r| r.iter().map(|e| e.eval(&env).unwrap()).collect()).collect());
                let scale = sym.norm().max(num.norm()).max(1e-300);
                prop_assert!(
                    (sym - num).norm() / scale < 1e-10 || (sym - num).norm() < 1e-12,
                    "{} rows {:?}: {} vs {}",
                    c.label,
                    s.rows,
                    sym,
                    num
                );
                let parts = Complex64::new(d.re.eval::<f64>(&env).unwrap().re, d.im.eval::<f64>(&env).unwrap().re);
                prop_assert!((parts - sym).norm() <= 1e-9 * scale.max(1.0));
            }
        }
        Ok(())
    })
}
