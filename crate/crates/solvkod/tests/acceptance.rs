//! Acceptance run: one PASS/FAIL line per criterion, with the failing checks
//! listed underneath.
//!
//! Printed values are compared as printed. A FAIL here means the engine
//! disagrees with a printed display; the process still exits 0 unless
//! `SOLVKOD_ACCEPTANCE_STRICT` is set, so that the workspace test run stays
//! usable while the report remains honest.

mod support;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use solvkod::acs::{build, nijenhuis, AcStructure, Basis};
use solvkod::canonical::{canonical_torsion, pluricanonical_system, structure_equations, torsion_from};
use solvkod::chern::connection;
use solvkod::exterior::{hodge_star, Coframe, InvariantForm};
use solvkod::fourier::{decide_kodaira, display_form, mode_determinant, mode_reduce, Kod, KodOptions, ModeKind, ModeSystem, Status};
use solvkod::linalg;
use solvkod::solvmanifold::{builtin_symbolic, Builtin, SolvmanifoldModel};
use solvkod::twistor_norden::{
    g0, hypercomplex, hypercomplex_check, norden_classification, norden_report, omega, twin_metric, twistor_closedness_report,
};
use solvkod::{Ctx, Expr};

struct Check {
    label: String,
    ok: bool,
    note: String,
}

fn check(label: impl Into<String>, ok: bool, note: impl Into<String>) -> Check {
    Check { label: label.into(), ok, note: note.into() }
}

fn parse(ctx: &Ctx, s: &str) -> Expr {
    ctx.parse(s).unwrap_or_else(|e| panic!("`{s}`: {e}"))
}

fn form(ctx: &Ctx, cf: Coframe, s: &str) -> InvariantForm {
    InvariantForm::parse(ctx, cf, s).unwrap_or_else(|e| panic!("`{s}`: {e}"))
}

fn same_form(label: impl Into<String>, ctx: &Ctx, got: &InvariantForm, want: &InvariantForm) -> Check {
    let ok = got.equal(ctx, want);
    check(label, ok, if ok { String::new() } else { format!("engine {got}; printed {want}") })
}

fn same_expr(label: impl Into<String>, ctx: &Ctx, got: &Expr, want: &Expr) -> Check {
    let ok = ctx.equal(got, want);
    check(label, ok, if ok { String::new() } else { format!("engine {got}; printed {want}") })
}

fn setup(b: Builtin, name: &str, kv: &[(&str, &str)]) -> (SolvmanifoldModel, AcStructure) {
    let m = builtin_symbolic(b);
    let bind = kv.iter().map(|(k, v)| (k.to_string(), parse(&m.ctx, v))).collect();
    let j = build(&m, name, &bind).unwrap_or_else(|e| panic!("{} {name}: {e}", b.name()));
    (m, j)
}

// ---------------------------------------------------------------------------
// 1. structure equations

fn structure_equation_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let phi = |c: &Ctx, s: &str| form(c, Coframe::Phi, s);

    let (m, j) = setup(Builtin::Mk, "Js", &[]);
    let c = &j.ctx;
    let se = structure_equations(&m, &j).unwrap();
    let p = "sqrt(2)*k/(2*sqrt(gamma2))";
    let d1 = format!(
        "-{p}*i*alpha1*(1-i*alpha2)*phi1^phi2 - {p}*i*alpha1*(1+i*alpha2)*phi1^phibar2 \
         - {p}*(1+i*alpha1)*(1-i*alpha2)*phi2^phibar1 + {p}*(1+i*alpha1)*(1+i*alpha2)*phibar1^phibar2"
    );
    out.push(same_form("Mk Js dphi1", c, &se.dphi[0], &phi(c, &d1)));
    out.push(check("Mk Js dphi2 = 0", se.dphi[1].is_zero(), ""));
    let db1 = format!("-{p}*i*alpha1*(1+i*alpha2)*phi1^phibar2 - {p}*(1+i*alpha1)*(1-i*alpha2)*phi2^phibar1");
    out.push(same_form("Mk Js dbar phi1", c, &se.dbar_phi[0], &phi(c, &db1)));
    out.push(check("Mk Js dbar phi2 = 0", se.dbar_phi[1].is_zero(), ""));
    out.push(same_form("Mk Js dbar(phi1^phi2)", c, &se.dbar_sigma, &phi(c, &format!("{p}*i*alpha1*(1+i*alpha2)*phi1^phi2^phibar2"))));

    let (m, j) = setup(Builtin::Mk, "Jr", &[]);
    let c = &j.ctx;
    let se = structure_equations(&m, &j).unwrap();
    let p = "sqrt(2)/2*alpha*sqrt(alpha)*k";
    let w = "(1-r-i*r)";
    let v = "(1-r+i*r)";
    let d1 = format!(
        "{p}*{w}*r^2*phi1^phi2 + {p}*{w}*r*{w}*phi1^phibar1 - {p}*{w}*((1-r)^2+2*r^2)*phi2^phibar1 \
         + {p}*{w}*r*{w}*phi2^phibar2 + {p}*{w}*{w}^2*phibar1^phibar2"
    );
    let d2 = format!(
        "{p}*r*{v}^2*phi1^phi2 - {p}*r*r*{v}*phi1^phibar1 + {p}*r/alpha*phi1^phibar2 \
         - {p}*r*r*{v}*phi2^phibar2 + {p}*r*r^2*phibar1^phibar2"
    );
    out.push(same_form("Mk Jr dphi1", c, &se.dphi[0], &phi(c, &d1)));
    out.push(same_form("Mk Jr dphi2", c, &se.dphi[1], &phi(c, &d2)));
    let tau = phi(c, &format!("-{p}*r*{w}^2*phibar1 + {p}*r*r*{v}*phibar2"));
    out.push(same_form("Mk Jr tau", c, &torsion_from(&se).omega, &tau));

    let (m, j) = setup(Builtin::N, "J", &[]);
    let c = &j.ctx;
    let se = structure_equations(&m, &j).unwrap();
    out.push(same_form("N J dphi1", c, &se.dphi[0], &phi(c, "-1/4*phi1^phi2 + 1/4*phi1^phibar2 + 1/4*phi2^phibar1 + 1/4*phibar1^phibar2")));
    out.push(same_form("N J dphi2", c, &se.dphi[1], &phi(c, "-i/4*phi1^phi2 - i/4*phi1^phibar2 + i/4*phi2^phibar1 - i/4*phibar1^phibar2")));
    out.push(same_form("N J dbar(phi1^phi2)", c, &torsion_from(&se).omega, &phi(c, "-1/4*i*phibar1 - 1/4*phibar2")));

    let (m, j) = setup(Builtin::N, "Jp", &[]);
    let c = &j.ctx;
    let se = structure_equations(&m, &j).unwrap();
    out.push(check("N Jp dphi1 = 0", se.dphi[0].is_zero(), ""));
    out.push(same_form(
        "N Jp dphi2",
        c,
        &se.dphi[1],
        &phi(c, "-i/4*phi1^phi2 - i/2*phi1^phibar1 - i/4*phi1^phibar2 + i/4*phi2^phibar1 - i/4*phibar1^phibar2"),
    ));
    out.push(same_form("N Jp dbar(phi1^phi2)", c, &torsion_from(&se).omega, &phi(c, "-i/4*phibar1")));

    let (m, j) = setup(Builtin::N, "Ja", &[]);
    let c = &j.ctx;
    let se = structure_equations(&m, &j).unwrap();
    out.push(same_form("N Ja dbar(phi1^phi2)", c, &se.dbar_sigma, &phi(c, "a/4*i*phi1^phi2^phibar2")));

    let (m, j) = setup(Builtin::Mlambda, "J", &[]);
    let c = &j.ctx;
    let se = structure_equations(&m, &j).unwrap();
    out.push(same_form("Mlambda J dphi1", c, &se.dphi[0], &phi(c, "1/2*phi1^phibar2")));
    out.push(same_form(
        "Mlambda J dphi2",
        c,
        &se.dphi[1],
        &phi(c, "1/4*phi1^phi2 - 1/4*(1+2*lambda)*phi1^phibar2 - 1/4*phi2^phibar1 - 1/4*(1+2*lambda)*phibar1^phibar2"),
    ));
    out.push(same_form("Mlambda J dbar(phi1^phi2)", c, &se.dbar_sigma, &phi(c, "-1/4*phi1^phi2^phibar1")));

    let (m, j) = setup(Builtin::Mk, "Jabc", &[("c", "0")]);
    let c = &j.ctx;
    out.push(same_form("Mk Jabc c=0 omega", c, &canonical_torsion(&m, &j).unwrap().omega, &phi(c, "-k/4*i*b^2*phibar1")));

    // general twistor structures at rational points of the sphere
    const SPHERE: &[(i64, i64, i64, i64)] = &[(2, 1, 2, 3), (2, 2, 1, 3), (-2, 3, 6, 7), (3, 0, 4, 5), (0, 3, 4, 5), (1, -2, 2, 3), (0, 1, 0, 1)];
    for &(a, b, cc, d) in SPHERE {
        let (a, b, cc) = (format!("({a}/{d})"), format!("({b}/{d})"), format!("({cc}/{d})"));
        let kv = [("a", a.as_str()), ("b", b.as_str()), ("c", cc.as_str())];
        let at = format!("at ({a},{b},{cc})");

        let (m, j) = setup(Builtin::Mk, "Jabc", &kv);
        let c = &j.ctx;
        let se = structure_equations(&m, &j).unwrap();
        let p = format!("k/(2*(1-{a}^2))");
        let d1 = format!(
            "{p}*(2*{a}*{cc}*{b} + i*({b}^2-{cc}^2))*phi1^phibar1 + {p}*i*{b}*{cc}*(1-{a}^2)*phi1^phibar2 \
             - {p}*({a}*({b}^2-{cc}^2) - i*{b}*{cc}*(1+{a}^2))*phi2^phibar1"
        );
        out.push(same_form(format!("Mk Jabc dbar phi1 {at}"), c, &se.dbar_phi[0], &phi(c, &d1)));
        let p = format!("k/(4*(1-{a}^2))");
        let d2 = format!(
            "{p}*2*(-{a}*({b}^2-{cc}^2) + 2*i*{b}*{cc})*phi1^phibar1 + {p}*i*({b}^2-{cc}^2)*({a}^2-1)*phi1^phibar2 \
             - {p}*(4*{a}*{b}*{cc} + i*({b}^2-{cc}^2)*({a}^2+1))*phi2^phibar1"
        );
        out.push(same_form(format!("Mk Jabc dbar phi2 {at}"), c, &se.dbar_phi[1], &phi(c, &d2)));
        let w = format!("-k/4*i*({b}^2-{cc}^2)*phibar1 - k/4*i*2*{b}*{cc}*phibar2");
        out.push(same_form(format!("Mk Jabc omega {at}"), c, &torsion_from(&se).omega, &phi(c, &w)));

        let (m, j) = setup(Builtin::N, "Jabc", &kv);
        let c = &j.ctx;
        let se = structure_equations(&m, &j).unwrap();
        let d1 = format!("i*(1-{a}^2)/4*phi1^phibar2 - i*(1-{a}^2)/4*phi2^phibar1");
        out.push(same_form(format!("N Jabc dbar phi1 {at}"), c, &se.dbar_phi[0], &phi(c, &d1)));
        let d2 = format!("{b}/2*phi1^phibar1 + 1/4*({cc}-{a}*{b}*i)*phi1^phibar2 + 1/4*({cc}+{a}*{b}*i)*phi2^phibar1");
        out.push(same_form(format!("N Jabc dbar phi2 {at}"), c, &se.dbar_phi[1], &phi(c, &d2)));
        let w = format!("-1/4*({cc}+{a}*{b}*i)*phibar1 - 1/4*(1-{a}^2)*i*phibar2");
        out.push(same_form(format!("N Jabc omega {at}"), c, &torsion_from(&se).omega, &phi(c, &w)));

        let (m, j) = setup(Builtin::Mlambda, "Jabc", &kv);
        let c = &j.ctx;
        let se = structure_equations(&m, &j).unwrap();
        let d1 = format!(
            "lambda*{b}/2*phi1^phibar1 + 1/4*((1+lambda)*{cc} + {a}*{b}*(1-lambda)*i)*phi1^phibar2 \
             + 1/4*(lambda-1)*({cc}+{a}*{b}*i)*phi2^phibar1"
        );
        out.push(same_form(format!("Mlambda Jabc dbar phi1 {at}"), c, &se.dbar_phi[0], &phi(c, &d1)));
        let d2 = format!(
            "(2+lambda)/4*(-{b}+{a}*{cc}*i)*phi1^phibar2 - 1/4*({b}*lambda + {a}*{cc}*(2+lambda)*i)*phi2^phibar1 \
             - {cc}*(1+lambda)/2*phi2^phibar2"
        );
        out.push(same_form(format!("Mlambda Jabc dbar phi2 {at}"), c, &se.dbar_phi[1], &phi(c, &d2)));
        let w = format!("1/4*(-{b}*lambda + {a}*{cc}*(2+lambda)*i)*phibar1 + 1/4*({cc}*(1+lambda) - {a}*{b}*(1-lambda)*i)*phibar2");
        out.push(same_form(format!("Mlambda Jabc omega {at}"), c, &torsion_from(&se).omega, &phi(c, &w)));
    }
    out
}

// ---------------------------------------------------------------------------
// 2. determinants

fn displayed(b: Builtin, s: &str, kv: &[(&str, &str)]) -> (SolvmanifoldModel, Ctx, Vec<ModeSystem>) {
    let (m, j) = setup(b, s, kv);
    let sys = pluricanonical_system(&m, &j, &Expr::sym("m")).unwrap();
    let systems = mode_reduce(&j.ctx, &sys, &m).unwrap().iter().map(|st| display_form(&j.ctx, &sys, b.name(), s, st).unwrap()).collect();
    (m, j.ctx.clone(), systems)
}

fn stage<'a>(systems: &'a [ModeSystem], chart: &str, first: usize) -> &'a ModeSystem {
    systems.iter().find(|s| s.chart == chart && s.rows[0] == first && s.kind == ModeKind::Algebraic).expect("displayed stage")
}

fn determinant_suite() -> Vec<Check> {
    let mut out = Vec::new();

    let (_, c, sys) = displayed(Builtin::Mk, "Js", &[]);
    let d = mode_determinant(&c, stage(&sys, "B", 2)).unwrap().det;
    let at_m1 = c.reduce(&c.substitute(&d, &[("m".to_string(), Expr::one())].into_iter().collect()).unwrap());
    let det1 = parse(
        &c,
        "-4*pi^2/n^2*((alpha2^2 + 1)*n1^2 + 2*n*alpha2*gamma2*n1*n2 + n^2*gamma2^2*n2^2 + k^2/(2*pi^2)*n^2*alpha1^2*alpha2) \
         - 2*pi/n*i*k*alpha1*(alpha2 - 1)*((alpha2 + 1)*n1 + n*gamma2*n2)",
    );
    out.push(same_expr("det1 (Mk Js, m = 1)", &c, &at_m1, &det1));

    let (_, c, sys) = displayed(Builtin::N, "J", &[]);
    let d = mode_determinant(&c, stage(&sys, "A", 2)).unwrap().det;
    let f = parse(
        &c,
        "-pi^2*(n1 + n2*x + 1/2*x^2*n3 + i/(2*pi)*m + i*(n2 + n3*x))*(n1 + n2*x + 1/2*x^2*n3 + i/(2*pi)*m - i*(n2 + n3*x))",
    );
    out.push(same_expr("N J factorized determinant", &c, &d, &f));

    let (_, c, sys) = displayed(Builtin::N, "Jp", &[]);
    let d = mode_determinant(&c, stage(&sys, "A", 2)).unwrap().det;
    out.push(same_expr("N Jp determinant", &c, &d, &parse(&c, "(n2 + n3*x)^2 + n3^2")));

    let (m, c, sys) = displayed(Builtin::Mk, "Jr", &[("r", "0")]);
    let s = stage(&sys, "A", 0).with_mode_defs(&c, m.chart("A").unwrap()).unwrap();
    let d = mode_determinant(&c, &s).unwrap().det;
    let printed = parse(
        &c,
        "4*pi^2/(exp(2*k*z)*delta^2)*((v1^2 + exp(2*k*z)*v2^2)*n1^2 - 2*(u1*v1 + u2*v2)*n1*n2 + (u1^2 + exp(2*k*z)*u2^2)*n2^2)",
    );
    out.push(same_expr("Mk Jr r=0 determinant", &c, &d, &printed));

    // C is the mode symbol n3
    let (_, c, sys) = displayed(Builtin::N, "Jabc", &[("c", "0")]);
    let im = mode_determinant(&c, stage(&sys, "A", 2)).unwrap().im;
    out.push(same_expr("N twistor c=0 imaginary part", &c, &im, &parse(&c, "pi*n3*m*(1 - a^2)")));

    let (_, c, sys) = displayed(Builtin::Mlambda, "Jabc", &[("c", "0")]);
    let im = mode_determinant(&c, stage(&sys, "A", 2)).unwrap().im;
    out.push(same_expr("Mlambda twistor c=0 imaginary part", &c, &im, &parse(&c, "-8*pi*a*b*n3*m*(1 - lambda)*exp(-(1 + lambda)*t)")));
    out
}

// ---------------------------------------------------------------------------
// 3. Kodaira verdicts

fn verdict(b: Builtin, s: &str, kv: &[(&str, &str)], want: Kod) -> Check {
    let m = builtin_symbolic(b);
    let params: BTreeMap<String, Expr> = kv.iter().map(|(k, v)| (k.to_string(), parse(&m.ctx, v))).collect();
    let opts = KodOptions { window: 10, max_power: 5, samples: 5, scan: true };
    let label = format!("{} {s} {kv:?} -> {want}", b.name());
    let v = match decide_kodaira(&m, s, &params, &opts) {
        Ok(v) => v,
        Err(e) => return check(label, false, e.to_string()),
    };
    let scan = v.scan.as_ref().map(|s| format!("scan N={} min|det|={:.3e}", s.n, s.min_abs_det)).unwrap_or_default();
    let got = v.kod.map(|k| k.to_string()).unwrap_or_else(|| "?".into());
    let status_ok = match &v.status {
        Status::SymbolicProved => true,
        Status::WindowVerified { window, .. } => *window == 10 && v.scan.as_ref().is_some_and(|s| s.min_abs_det > 1e-8),
        Status::Inconclusive => false,
    };
    let rules: Vec<String> = v.rules_fired.iter().map(|r| format!("{r:?}")).collect();
    check(label, v.kod == Some(want) && status_ok, format!("engine kod {got}, {:?}, rules {}; {scan}", v.status, rules.join(",")))
}

fn verdict_suite() -> Vec<Check> {
    let mut jobs: Vec<(Builtin, &str, Vec<(&str, &str)>, Kod)> = Vec::new();
    for (a1, a2) in [("0", "0"), ("0", "1/5"), ("0", "-1/3"), ("1/4", "0"), ("-1/10", "0"), ("3/10", "2/5"), ("-1/7", "1/3")] {
        let want = if a1 == "0" || a2 == "0" { Kod::Value(0) } else { Kod::NegInf };
        jobs.push((Builtin::Mk, "Js", vec![("alpha1", a1), ("alpha2", a2)], want));
    }
    for r in ["0", "1/10", "-1/20", "1/3"] {
        jobs.push((Builtin::Mk, "Jr", vec![("r", r)], if r == "0" { Kod::Value(0) } else { Kod::NegInf }));
    }
    jobs.push((Builtin::N, "J", vec![], Kod::NegInf));
    jobs.push((Builtin::N, "Jp", vec![], Kod::NegInf));
    for a in ["1", "-3/2", "1/3", "7", "2*pi"] {
        jobs.push((Builtin::N, "Ja", vec![("a", a)], Kod::NegInf));
    }
    for l in ["-3/4", "-2/3", "-9/10"] {
        jobs.push((Builtin::Mlambda, "J", vec![("lambda", l)], Kod::NegInf));
    }
    for (a, b) in [("1", "0"), ("-1", "0"), ("0", "1"), ("0", "-1"), ("3/5", "4/5"), ("-4/5", "3/5"), ("5/13", "-12/13")] {
        let unit = b == "0";
        jobs.push((Builtin::Mk, "Jabc", vec![("a", a), ("b", b), ("c", "0")], if unit { Kod::Value(0) } else { Kod::NegInf }));
        jobs.push((Builtin::N, "Jabc", vec![("a", a), ("b", b), ("c", "0")], Kod::NegInf));
        jobs.push((Builtin::Mlambda, "Jabc", vec![("a", a), ("b", b), ("c", "0")], Kod::NegInf));
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|(b, st, kv, want)| s.spawn(move || verdict(*b, st, kv, *want))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| check("verdict", false, "panicked"))).collect()
    })
}

// ---------------------------------------------------------------------------
// 4. curvature

fn curvature_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let (m, j) = setup(Builtin::Mk, "Js", &[]);
    let c = &j.ctx;
    let d = connection(&m, &j).unwrap();
    let flat = d.ricci_table.iter().flatten().all(|e| c.is_zero(e)) && d.ricci.is_zero();
    out.push(check("Mk Js Chern-Ricci tensor = 0", flat, format!("ricci {}", d.ricci)));
    let q = "k^2/(2*gamma2)";
    let printed: [((usize, usize, usize, usize), &str, String); 6] = [
        ((0, 0, 0, 0), "R^1_{11b1}", format!("{q}*(1+alpha1^2)*(1+alpha2^2)")),
        ((0, 1, 0, 1), "R^1_{21b2}", format!("-{q}*(1+alpha1^2)*(1+i*alpha2)^2")),
        ((0, 1, 1, 0), "R^1_{22b1}", "k^2/gamma2*i*alpha1*(1+i*alpha1)*(1+alpha2^2)".into()),
        ((1, 0, 0, 1), "R^2_{11b2}", "-k^2/gamma2*i*alpha1*(1-i*alpha1)*(1+alpha2^2)".into()),
        ((1, 0, 1, 0), "R^2_{12b1}", format!("-{q}*(1+alpha1^2)*(1-i*alpha2)^2")),
        ((1, 1, 0, 0), "R^2_{21b1}", format!("-{q}*(1+alpha1^2)*(1+alpha2^2)")),
    ];
    for ((i, jj, k, l), name, want) in &printed {
        out.push(same_expr(format!("Mk Js {name}"), c, &d.r[*i][*jj][*k][*l], &parse(c, want)));
    }
    let listed: Vec<_> = printed.iter().map(|p| p.0).collect();
    let mut others_zero = true;
    for i in 0..2 {
        for jj in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    if !listed.contains(&(i, jj, k, l)) && !c.is_zero(&d.r[i][jj][k][l]) {
                        others_zero = false;
                    }
                }
            }
        }
    }
    out.push(check("Mk Js remaining R^i_{jkl} = 0", others_zero, ""));

    let (m, j) = setup(Builtin::N, "J", &[]);
    let c = &j.ctx;
    let d = connection(&m, &j).unwrap();
    out.push(same_form("N J Ricci form", c, &d.ricci, &form(c, Coframe::PhiU, "1/4*i*Phi1^Phibar2 - 1/4*i*Phi2^Phibar1")));
    out.push(check("N J scalar = 0", c.is_zero(&d.scalar), format!("scalar {}", d.scalar)));
    out
}

// ---------------------------------------------------------------------------
// 5. twistor and Norden

fn twistor_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let ctx = builtin_symbolic(Builtin::N).ctx;
    let h = hypercomplex_check(&ctx, &hypercomplex());
    out.push(check("hypercomplex relations", h.ok(), format!("{h:?}")));
    for i in 0..3 {
        let sd = hodge_star(&ctx, &omega(&ctx, i), &g0()).unwrap().equal(&ctx, &omega(&ctx, i));
        out.push(check(format!("omega{i} self-dual"), sd, ""));
    }
    let e = |c: &Ctx, s: &str| form(c, Coframe::E, s);
    let d_omega: [(Builtin, [&str; 3]); 3] = [
        (Builtin::Mk, ["0", "k*e2^e3^e4", "-k*e1^e3^e4"]),
        (Builtin::N, ["-e1^e2^e4", "e1^e2^e3", "0"]),
        (Builtin::Mlambda, ["e1^e3^e4", "-lambda*e1^e2^e4", "-(1+lambda)*e1^e2^e3"]),
    ];
    let d_tilde: [(Builtin, [&str; 3]); 3] = [
        (Builtin::Mk, ["0", "-k*e2^e3^e4", "k*e1^e3^e4"]),
        (Builtin::N, ["e1^e3^e4", "-e1^e2^e3", "0"]),
        (Builtin::Mlambda, ["-e1^e3^e4", "lambda*e1^e2^e4", "(1+lambda)*e1^e2^e3"]),
    ];
    let zero = |c: &Ctx, s: &str| if s == "0" { InvariantForm::zero(Coframe::E, 3) } else { e(c, s) };
    for (b, want) in d_omega {
        let m = builtin_symbolic(b);
        let r = twistor_closedness_report(&m).unwrap();
        for i in 0..3 {
            out.push(same_form(format!("{} d omega{i}", b.name()), &m.ctx, &r.d_omega[i], &zero(&m.ctx, want[i])));
        }
    }
    let spans: [(Builtin, Vec<[i64; 3]>); 3] = [(Builtin::Mk, vec![[1, 0, 0]]), (Builtin::N, vec![[0, 0, 1]]), (Builtin::Mlambda, vec![])];
    for (b, want) in spans {
        let m = builtin_symbolic(b);
        let got = twistor_closedness_report(&m).unwrap().closed_sections;
        let want: Vec<[Expr; 3]> = want.iter().map(|v| v.map(Expr::int)).collect();
        out.push(check(format!("{} constant closed sections", b.name()), got == want, format!("{got:?}")));
    }
    let corollary = norden_classification(&ctx).iter().all(|e| (e.metric == e.structure) == e.pseudo_hermitian && (e.metric != e.structure) == e.norden);
    out.push(check("Norden classification", corollary, ""));
    let twins: [((usize, usize), [(usize, usize, i64); 4]); 6] = [
        ((0, 1), [(0, 2, -1), (2, 0, -1), (1, 3, 1), (3, 1, 1)]),
        ((0, 2), [(0, 3, -1), (3, 0, -1), (1, 2, -1), (2, 1, -1)]),
        ((1, 0), [(0, 1, -1), (1, 0, -1), (2, 3, -1), (3, 2, -1)]),
        ((1, 2), [(0, 3, -1), (3, 0, -1), (1, 2, 1), (2, 1, 1)]),
        ((2, 0), [(0, 1, -1), (1, 0, -1), (2, 3, 1), (3, 2, 1)]),
        ((2, 1), [(0, 2, -1), (2, 0, -1), (1, 3, -1), (3, 1, -1)]),
    ];
    for ((i, j), entries) in twins {
        let mut want = linalg::zeros(4, 4);
        for (a, b, v) in entries {
            want[a][b] = Expr::int(v);
        }
        let got = twin_metric(&ctx, i, j);
        out.push(check(format!("twin metric g^{i}{j}"), linalg::equal(&ctx, &got, &want), format!("{:?}", linalg::render(&got))));
    }
    for (b, want) in d_tilde {
        let m = builtin_symbolic(b);
        let r = norden_report(&m).unwrap();
        for i in 0..3 {
            out.push(same_form(format!("{} d omega~{i}", b.name()), &m.ctx, &r.d_omega_tilde[i], &zero(&m.ctx, want[i])));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// 6. property suites

fn property_suite() -> Vec<Check> {
    use support::*;
    let runs: Vec<(String, Box<dyn FnOnce() -> Result<(), String>>)> = vec![
        ("d^2 = 0 on Mk (500 forms)".into(), Box::new(|| d_squared(runner(500, true), 0))),
        ("d^2 = 0 on N (500 forms)".into(), Box::new(|| d_squared(runner(500, true), 1))),
        ("d^2 = 0 on Mlambda (500 forms)".into(), Box::new(|| d_squared(runner(500, true), 2))),
        ("Jacobi identity".into(), Box::new(|| jacobi(runner(100, true)))),
        ("J^2 = -1 for registered structures".into(), Box::new(|| j_squared(runner(40, true)))),
        ("** = 1 on 2-forms".into(), Box::new(|| hodge_involution(runner(100, true)))),
        ("bidegree reconstruction".into(), Box::new(|| bidegree_reconstruction(runner(100, true)))),
        ("tensor-power law, m <= 5".into(), Box::new(|| tensor_power_law(runner(40, true)))),
        ("Nijenhuis symmetries".into(), Box::new(|| nijenhuis_symmetries(runner(40, true)))),
        ("determinant oracle (200 points)".into(), Box::new(|| determinant_oracle(runner(200, true)))),
    ];
    runs.into_iter()
        .map(|(label, f)| match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(())) => check(label, true, ""),
            Ok(Err(e)) => check(label, false, e),
            Err(_) => check(label, false, "panicked"),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 7. Nijenhuis table

fn nijenhuis_suite() -> Vec<Check> {
    let (m, j) = setup(Builtin::Mk, "Js", &[]);
    let c = &j.ctx;
    let t = nijenhuis(&m, &j, Basis::Eps).unwrap();
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
    let mut out = Vec::new();
    for (a, b, x, y) in want {
        let got = t.get(a, b);
        let ok = c.equal(&got[0], &parse(c, &x)) && c.equal(&got[1], &parse(c, &y)) && c.is_zero(&got[2]) && c.is_zero(&got[3]);
        out.push(check(format!("N(eps{},eps{})", a + 1, b + 1), ok, format!("engine {:?}", got.iter().map(|e| e.to_string()).collect::<Vec<_>>())));
    }
    out
}

fn main() {
    let criteria: Vec<(u8, &str, Option<f64>, fn() -> Vec<Check>)> = vec![
        (1, "structure-equation golden suite", Some(5.0), structure_equation_suite),
        (2, "determinant golden suite", None, determinant_suite),
        (3, "Kodaira verdict table", Some(60.0), verdict_suite),
        (4, "curvature suite", None, curvature_suite),
        (5, "twistor/Norden suite", None, twistor_suite),
        (6, "property suites", None, property_suite),
        (7, "Nijenhuis golden", None, nijenhuis_suite),
    ];
    let mut failed = 0;
    for (n, title, limit, run) in criteria {
        let t0 = Instant::now();
        let checks = catch_unwind(run).unwrap_or_else(|_| vec![check("suite", false, "panicked")]);
        let secs = t0.elapsed().as_secs_f64();
        let bad: Vec<&Check> = checks.iter().filter(|c| !c.ok).collect();
        let slow = limit.is_some_and(|l| secs > l);
        let pass = bad.is_empty() && !slow;
        if !pass {
            failed += 1;
        }
        let budget = limit.map(|l| format!(", limit {l:.0} s")).unwrap_or_default();
        println!(
            "criterion {n}: {} {title} ({}/{} checks, {secs:.2} s{budget})",
            if pass { "PASS" } else { "FAIL" },
            checks.len() - bad.len(),
            checks.len()
        );
        for c in bad {
            println!("    FAIL {}: {}", c.label, c.note);
        }
        if slow {
            println!("    FAIL runtime {secs:.2} s exceeds {:.0} s", limit.unwrap());
        }
    }
    println!("{failed} of 7 criteria failed");
    if failed > 0 && std::env::var_os("SOLVKOD_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
