use std::collections::BTreeMap;

use solvkod::acs::{
    adapted_coframe, build, check_acs, check_adapted, compatibility_report, induced_metric, leading_minors, nijenhuis,
    structure_names, AcsError, Basis,
};
use solvkod::exterior::{Coframe, InvariantForm};
use solvkod::linalg;
use solvkod::solvmanifold::{builtin_symbolic, Builtin};
use solvkod::Expr;

fn none() -> BTreeMap<String, Expr> {
    BTreeMap::new()
}

fn bind(ctx: &solvkod::Ctx, pairs: &[(&str, &str)]) -> BTreeMap<String, Expr> {
    pairs.iter().map(|(k, v)| (k.to_string(), ctx.parse(v).unwrap())).collect()
}

#[test]
fn every_structure_squares_to_minus_one() {
    for b in Builtin::ALL {
        let m = builtin_symbolic(b);
        for name in structure_names(b.name()) {
            let j = build(&m, name, &none()).unwrap();
            assert!(check_acs(&j), "{} {}", b.name(), name);
        }
        let mut c0 = BTreeMap::new();
        c0.insert("c".to_string(), Expr::zero());
        let j = build(&m, "Jabc", &c0).unwrap();
        assert!(check_acs(&j));
        check_adapted(&j).unwrap();
    }
}

#[test]
fn js_needs_its_relation() {
    let m = builtin_symbolic(Builtin::Mk);
    let j = build(&m, "Js", &none()).unwrap();
    assert!(check_acs(&j));
    assert!(!check_acs(&j.without_relations()));
    let j0 = build(&m, "J0", &none()).unwrap();
    assert!(check_acs(&j0.without_relations()));
}

#[test]
fn adapted_frames() {
    for b in Builtin::ALL {
        let m = builtin_symbolic(b);
        for name in structure_names(b.name()) {
            if *name == "Jabc" {
                continue;
            }
            let j = build(&m, name, &none()).unwrap();
            let cf = adapted_coframe(&j).unwrap_or_else(|e| panic!("{} {name}: {e}", b.name()));
            assert!(cf.check_duality(&j.ctx), "{} {name}", b.name());
        }
    }
}

#[test]
fn n_coframes() {
    let m = builtin_symbolic(Builtin::N);
    let j = build(&m, "J", &none()).unwrap();
    let cf = adapted_coframe(&j).unwrap();
    let p = |s: &str| j.ctx.parse(s).unwrap();
    assert_eq!(cf.phi[0], vec![p("1"), p("0"), p("0"), p("i")]);
    assert_eq!(cf.phi[1], vec![p("0"), p("1"), p("i"), p("0")]);
    assert_eq!(cf.fields[0], vec![p("1/2"), p("0"), p("0"), p("-i/2")]);
    let ml = builtin_symbolic(Builtin::Mlambda);
    let j = build(&ml, "J", &none()).unwrap();
    let cf = adapted_coframe(&j).unwrap();
    assert_eq!(cf.fields[0], vec![p("1/2"), p("-i/2"), p("0"), p("0")]);
}

#[test]
fn js_nijenhuis_table() {
    let m = builtin_symbolic(Builtin::Mk);
    let j = build(&m, "Js", &none()).unwrap();
    let t = nijenhuis(&m, &j, Basis::Eps).unwrap();
    let c = &j.ctx;
    let e = |s: &str| c.parse(s).unwrap();
    let p = "2*k/sqrt(gamma2)*(1 - alpha1*alpha2)";
    let q = "2*k/sqrt(gamma2)*(alpha1 + alpha2)";
    let want: [(usize, usize, String, String); 6] = [
        (0, 1, "0".into(), "0".into()),
        (0, 2, p.into(), q.into()),
        (0, 3, q.into(), format!("-{p}")),
        (1, 2, q.into(), format!("-{p}")),
        (1, 3, format!("-{p}"), format!("-{q}")),
        (2, 3, "0".into(), "0".into()),
    ];
    for (a, b, x, y) in want {
        let got = t.get(a, b);
        assert!(c.equal(&got[0], &e(&x)), "N(eps{},eps{})_1 = {}", a + 1, b + 1, got[0]);
        assert!(c.equal(&got[1], &e(&y)), "N(eps{},eps{})_2 = {}", a + 1, b + 1, got[1]);
        assert!(c.is_zero(&got[2]) && c.is_zero(&got[3]));
    }
}

#[test]
fn compatibility_flags() {
    let m = builtin_symbolic(Builtin::Mk);
    let j = build(&m, "Js", &none()).unwrap();
    let r = compatibility_report(&j.ctx, &j.matrix, j.form.as_ref(), j.metric.as_ref());
    assert_eq!(r.omega_invariant, Some(true));
    let g = induced_metric(&j.ctx, &j.matrix, j.form.as_ref().unwrap());
    assert!(linalg::equal(&j.ctx, &g, j.metric.as_ref().unwrap()));

    let n = builtin_symbolic(Builtin::N);
    let jp = build(&n, "Jp", &none()).unwrap();
    let xi = InvariantForm::parse(&jp.ctx, Coframe::E, "e1^e4 + e2^e3").unwrap();
    let r = compatibility_report(&jp.ctx, &jp.matrix, Some(&xi), None);
    assert_eq!(r.omega_anti, Some(true));
    assert_eq!(r.omega_invariant, Some(false));
}

#[test]
fn gs_positive_near_origin() {
    let m = builtin_symbolic(Builtin::Mk);
    for (r1, s1, r2, s2) in [("1/10", "0", "0", "1/10"), ("-1/5", "1/7", "1/9", "-1/8"), ("0", "0", "0", "0")] {
        let j = build(&m, "Js", &bind(&m.ctx, &[("r1", r1), ("s1", s1), ("r2", r2), ("s2", s2)])).unwrap();
        assert!(check_acs(&j));
        for mnr in leading_minors(&j.ctx, j.metric.as_ref().unwrap()) {
            let v = mnr.as_rational().expect("rational minor");
            assert!(v > num_rational::BigRational::from_integer(0.into()), "{mnr}");
        }
    }
}

#[test]
fn sphere_relation_enforced() {
    let m = builtin_symbolic(Builtin::N);
    let b = bind(&m.ctx, &[("a", "1/2"), ("b", "1/2"), ("c", "0")]);
    assert!(matches!(build(&m, "Jabc", &b), Err(AcsError::SphereRelationViolated(..))));
    let b = bind(&m.ctx, &[("a", "3/5"), ("b", "0"), ("c", "4/5")]);
    let j = build(&m, "Jabc", &b).unwrap();
    assert!(check_acs(&j));
    check_adapted(&j).unwrap();
}

#[test]
fn unknown_names() {
    let m = builtin_symbolic(Builtin::Mlambda);
    assert!(matches!(build(&m, "Js", &none()), Err(AcsError::UnknownStructure { .. })));
    let n = builtin_symbolic(Builtin::N);
    assert!(matches!(build(&n, "J", &bind(&n.ctx, &[("a", "1")])), Err(AcsError::UnknownParam(_))));
}
