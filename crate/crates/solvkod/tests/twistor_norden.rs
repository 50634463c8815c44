use std::collections::BTreeMap;

use solvkod::acs::build;
use solvkod::exterior::{hodge_star, Coframe, InvariantForm};
use solvkod::linalg;
use solvkod::solvmanifold::{builtin_symbolic, Builtin};
use solvkod::twistor_norden::*;
use solvkod::{Ctx, Expr};

fn e(ctx: &Ctx, s: &str) -> InvariantForm {
    InvariantForm::parse(ctx, Coframe::E, s).unwrap()
}

fn q(n: i64, d: i64) -> Expr {
    Expr::rational(n, d)
}

#[test]
fn hypercomplex_relations() {
    let ctx = builtin_symbolic(Builtin::N).ctx;
    let r = hypercomplex_check(&ctx, &hypercomplex());
    assert!(r.ok(), "{r:?}");
    let printed = linalg::from_i64(&[&[0, 0, 0, -1], &[0, 0, -1, 0], &[0, 1, 0, 0], &[1, 0, 0, 0]]);
    assert!(linalg::equal(&ctx, &hypercomplex()[2], &printed));
    // a bad triple: J₁ replaced by J₀
    let bad = [hypercomplex()[0].clone(), hypercomplex()[0].clone(), hypercomplex()[2].clone()];
    assert!(!hypercomplex_check(&ctx, &bad).anticommute);
}

#[test]
fn fundamental_forms_of_the_triple() {
    let ctx = builtin_symbolic(Builtin::N).ctx;
    for (i, s) in ["e1^e2 + e3^e4", "e1^e3 - e2^e4", "e1^e4 + e2^e3"].iter().enumerate() {
        assert!(omega(&ctx, i).equal(&ctx, &e(&ctx, s)), "omega{i}");
        assert!(hodge_star(&ctx, &omega(&ctx, i), &g0()).unwrap().equal(&ctx, &omega(&ctx, i)));
    }
    for (i, s) in ["e1^e2 - e3^e4", "e1^e3 + e2^e4", "e1^e4 - e2^e3"].iter().enumerate() {
        assert!(omega_tilde(&ctx, i).equal(&ctx, &e(&ctx, s)), "omega~{i}");
    }
    // g₀ = ω₀(·, J₀·)
    let w = omega(&ctx, 0).to_matrix();
    assert!(linalg::equal(&ctx, &linalg::mul(&ctx, &w, &hypercomplex()[0]), &g0()));
}

fn d_table(b: Builtin) -> ([InvariantForm; 3], [InvariantForm; 3], Ctx) {
    let m = builtin_symbolic(b);
    let t = twistor_closedness_report(&m).unwrap();
    let n = norden_report(&m).unwrap();
    (t.d_omega, n.d_omega_tilde, m.ctx)
}

#[test]
fn d_omega_tables() {
    let (d, _, c) = d_table(Builtin::Mk);
    assert!(d[0].is_zero());
    assert!(d[1].equal(&c, &e(&c, "k*e2^e3^e4")));
    assert!(d[2].equal(&c, &e(&c, "k*e1^e3^e4")));
    let (d, _, c) = d_table(Builtin::N);
    assert!(d[0].equal(&c, &e(&c, "-e1^e2^e4")));
    assert!(d[1].equal(&c, &e(&c, "e1^e2^e3")));
    assert!(d[2].is_zero());
    let (d, _, c) = d_table(Builtin::Mlambda);
    assert!(d[0].equal(&c, &e(&c, "e1^e3^e4")));
    assert!(d[1].equal(&c, &e(&c, "-lambda*e1^e2^e4")));
    assert!(d[2].equal(&c, &e(&c, "-(1+lambda)*e1^e2^e3")));
}

#[test]
fn d_omega_tilde_tables() {
    let (_, d, c) = d_table(Builtin::Mk);
    assert!(d[0].is_zero());
    assert!(d[1].equal(&c, &e(&c, "-k*e2^e3^e4")));
    assert!(d[2].equal(&c, &e(&c, "k*e1^e3^e4")));
    let (_, d, c) = d_table(Builtin::N);
    assert!(d[0].equal(&c, &e(&c, "e1^e2^e4")));
    assert!(d[1].equal(&c, &e(&c, "-e1^e2^e3")));
    assert!(d[2].is_zero());
    let (_, d, c) = d_table(Builtin::Mlambda);
    assert!(d[0].equal(&c, &e(&c, "-e1^e3^e4")));
    assert!(d[1].equal(&c, &e(&c, "lambda*e1^e2^e4")));
    assert!(d[2].equal(&c, &e(&c, "(1+lambda)*e1^e2^e3")));
}

#[test]
fn printed_mk_d_omega2_contradicts_structure_equations() {
    // d(e2^e3) = 0 on M(k), so dω₂ = dω̃₂; the printed pair has opposite signs
    let m = builtin_symbolic(Builtin::Mk);
    let c = &m.ctx;
    assert!(m.d(&e(c, "e2^e3")).unwrap().is_zero());
    let printed = e(c, "-k*e1^e3^e4");
    assert!(!d_table(Builtin::Mk).0[2].equal(c, &printed));
}

#[test]
fn printed_nil_d_omega_tilde0_contradicts_structure_equations() {
    // d(e1^e2) = 0 on N, so dω̃₀ = −dω₀ = e1^e2^e4
    let m = builtin_symbolic(Builtin::N);
    let c = &m.ctx;
    assert!(m.d(&e(c, "e1^e2")).unwrap().is_zero());
    assert!(!d_table(Builtin::N).1[0].equal(c, &e(c, "e1^e3^e4")));
}

#[test]
fn constant_closed_sections() {
    let one = Expr::one;
    let z = Expr::zero;
    let m = builtin_symbolic(Builtin::Mk);
    assert_eq!(twistor_closedness_report(&m).unwrap().closed_sections, vec![[one(), z(), z()]]);
    let m = builtin_symbolic(Builtin::N);
    assert_eq!(twistor_closedness_report(&m).unwrap().closed_sections, vec![[z(), z(), one()]]);
    let m = builtin_symbolic(Builtin::Mlambda);
    assert!(twistor_closedness_report(&m).unwrap().closed_sections.is_empty());
}

#[test]
fn closed_span_brute_force() {
    // every vector in the computed span is closed, and the span has full size on a flat model
    for b in Builtin::ALL {
        let m = builtin_symbolic(b);
        let r = twistor_closedness_report(&m).unwrap();
        for v in &r.closed_sections {
            let w = (0..3).fold(InvariantForm::zero(Coframe::E, 2), |acc, i| acc.add(&omega(&m.ctx, i).scale(&v[i])).unwrap());
            assert!(m.d(&w).unwrap().reduce(&m.ctx).is_zero());
        }
    }
    let ctx = builtin_symbolic(Builtin::N).ctx;
    let zero: [InvariantForm; 3] = std::array::from_fn(|_| InvariantForm::zero(Coframe::E, 3));
    assert_eq!(closed_span(&ctx, &zero).len(), 3);
}

#[test]
fn twistor_sections() {
    let ctx = builtin_symbolic(Builtin::Mk).ctx;
    let s = twistor_section(&ctx, &Expr::one(), &Expr::zero(), &Expr::zero()).unwrap();
    assert!(linalg::equal(&ctx, &s.matrix, &hypercomplex()[0]));
    let s = twistor_section(&ctx, &Expr::zero(), &Expr::zero(), &Expr::one()).unwrap();
    assert!(s.omega.equal(&ctx, &e(&ctx, "e1^e4 + e2^e3")));
    for (a, b, c) in [(q(3, 5), q(4, 5), q(0, 1)), (q(2, 3), q(1, 3), q(2, 3)), (q(-6, 7), q(2, 7), q(3, 7))] {
        let s = twistor_section(&ctx, &a, &b, &c).unwrap();
        assert!(s.is_acs(&ctx) && s.omega_invariant(&ctx) && s.omega_matches_metric(&ctx));
    }
    assert!(matches!(
        twistor_section(&ctx, &q(1, 2), &q(1, 2), &Expr::zero()),
        Err(TwistorError::SphereRelationViolated(_))
    ));
}

#[test]
fn jr_is_a_twistor_path() {
    let m = builtin_symbolic(Builtin::Mk);
    let j = build(&m, "Jr", &BTreeMap::new()).unwrap();
    let c = &j.ctx;
    let p = |s: &str| c.parse(s).unwrap();
    let s = twistor_section(c, &p("alpha*(1-r)^2"), &p("2*alpha*r^2"), &p("-2*alpha*r*(1-r)")).unwrap();
    assert!(s.is_acs(c));
    // the matrix of J_r carries the opposite signs on J₁ and J₂
    assert!(!linalg::equal(c, &s.matrix, &j.matrix));
    let s = twistor_section(c, &p("alpha*(1-r)^2"), &p("-2*alpha*r^2"), &p("2*alpha*r*(1-r)")).unwrap();
    assert!(linalg::equal(c, &s.matrix, &j.matrix));
    // the underlying polynomial identity
    assert!(c.equal(&p("(1-r)^4 + 4*r^4 + 4*r^2*(1-r)^2"), &p("((1-r)^2 + 2*r^2)^2")));
}

#[test]
fn norden_corollary() {
    let ctx = builtin_symbolic(Builtin::N).ctx;
    for ent in norden_classification(&ctx) {
        let same = ent.metric == ent.structure;
        assert_eq!(ent.pseudo_hermitian, same, "{ent:?}");
        assert_eq!(ent.norden, !same, "{ent:?}");
    }
    // the identity endomorphism is symmetric for any metric
    for i in 0..3 {
        assert!(is_symmetric(&ctx, &linalg::identity(4), &g_tilde(i)));
    }
}

#[test]
fn twin_metrics() {
    let ctx = builtin_symbolic(Builtin::N).ctx;
    let printed: [((usize, usize), [(usize, usize, i64); 4]); 6] = [
        ((0, 1), [(0, 2, -1), (2, 0, -1), (1, 3, 1), (3, 1, 1)]),
        ((0, 2), [(0, 3, -1), (3, 0, -1), (1, 2, -1), (2, 1, -1)]),
        ((1, 0), [(0, 1, -1), (1, 0, -1), (2, 3, -1), (3, 2, -1)]),
        ((1, 2), [(0, 3, -1), (3, 0, -1), (1, 2, 1), (2, 1, 1)]),
        ((2, 0), [(0, 1, -1), (1, 0, -1), (2, 3, 1), (3, 2, 1)]),
        ((2, 1), [(0, 2, -1), (2, 0, -1), (1, 3, -1), (3, 1, -1)]),
    ];
    for ((i, j), entries) in printed {
        let mut want = linalg::zeros(4, 4);
        for (a, b, v) in entries {
            want[a][b] = Expr::int(v);
        }
        let got = twin_metric(&ctx, i, j);
        assert!(linalg::equal(&ctx, &got, &want), "g^{i}{j}: {:?}", linalg::render(&got));
        assert!(linalg::equal(&ctx, &got, &linalg::transpose(&got)));
    }
    let m = builtin_symbolic(Builtin::N);
    assert_eq!(norden_report(&m).unwrap().twins.len(), 6);
}

#[test]
fn report_json_is_stable() {
    let m = builtin_symbolic(Builtin::Mk);
    let a = serde_json::to_string(&twistor_closedness_report(&m).unwrap().to_json(&m.ctx, "Mk")).unwrap();
    let b = serde_json::to_string(&twistor_closedness_report(&m).unwrap().to_json(&m.ctx, "Mk")).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("\"closed_sections\":[[\"1\",\"0\",\"0\"]]"));
}
