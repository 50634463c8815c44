//! Scenario registry and report generation.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use solvkod::acs::{self, structure_names, structure_params};
use solvkod::canonical::pluricanonical_system;
use solvkod::chern;
use solvkod::fourier::{decide_kodaira, display_form, mode_determinant, mode_reduce, KodOptions, KodairaVerdict, ModeKind, Status};
use solvkod::scalar_expr::SymbolKind;
use solvkod::solvmanifold::{builtin, builtin_symbolic, load_model, Builtin, ParamValue, SolvmanifoldModel};
use solvkod::twistor_norden::{norden_report, twistor_closedness_report};
use solvkod::Expr;
use thiserror::Error;

/// Bumped whenever the shape of a report changes; golden files carry it.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("parameter `{name}`: {why}")]
    ParamTypeError { name: String, why: String },
    #[error("structure `{structure}` is not registered on {manifold} (known: {known})")]
    UnknownStructure { manifold: String, structure: String, known: String },
    #[error("metric `{given}` does not match {structure}: {why}")]
    MetricMismatch { structure: String, given: String, why: String },
    #[error("{0} needs --structure")]
    MissingStructure(&'static str),
    #[error("{0}")]
    Engine(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn engine<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Engine(e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Analysis {
    Kod,
    Curvature,
    Det,
    Verify,
    Twistor,
    Norden,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Kod => "kod",
            Analysis::Curvature => "curvature",
            Analysis::Det => "det",
            Analysis::Verify => "verify",
            Analysis::Twistor => "twistor",
            Analysis::Norden => "norden",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: String,
    pub analysis: Analysis,
    /// Built-in manifold name, ignored when `model` is set.
    pub manifold: String,
    /// TOML model description used instead of a built-in.
    pub model: Option<String>,
    pub structure: Option<String>,
    pub params: String,
    pub metric: Option<String>,
}

impl Scenario {
    fn new(id: &str, analysis: Analysis, manifold: &str, structure: Option<&str>, params: &str) -> Self {
        Scenario {
            id: id.into(),
            analysis,
            manifold: manifold.into(),
            model: None,
            structure: structure.map(Into::into),
            params: params.into(),
            metric: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub power: u32,
    pub window: i64,
    pub samples: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { power: 5, window: 10, samples: 5 }
    }
}

/// One rendered report.
#[derive(Clone, Debug)]
pub struct Report {
    pub id: String,
    pub json: Value,
    pub text: String,
}

/// Every registered scenario, sorted by id.
pub fn registry() -> Vec<Scenario> {
    use Analysis::*;
    let mut v = vec![
        Scenario::new("kod-mk-js-origin", Kod, "Mk", Some("Js"), "r1=0,s1=0,r2=0,s2=0"),
        Scenario::new("kod-mk-js-alpha1-zero", Kod, "Mk", Some("Js"), "alpha1=0,alpha2=1/5"),
        Scenario::new("kod-mk-js-alpha2-zero", Kod, "Mk", Some("Js"), "alpha1=1/4,alpha2=0"),
        Scenario::new("kod-mk-js-generic", Kod, "Mk", Some("Js"), "alpha1=3/10,alpha2=2/5"),
        Scenario::new("kod-mk-jr-0", Kod, "Mk", Some("Jr"), "r=0"),
        Scenario::new("kod-mk-jr-1-10", Kod, "Mk", Some("Jr"), "r=1/10"),
        Scenario::new("kod-n-j", Kod, "N", Some("J"), ""),
        Scenario::new("kod-n-jp", Kod, "N", Some("Jp"), ""),
        Scenario::new("kod-n-ja-1", Kod, "N", Some("Ja"), "a=1"),
        Scenario::new("kod-n-ja-2pi", Kod, "N", Some("Ja"), "a=2*pi"),
        Scenario::new("kod-mlambda-j", Kod, "Mlambda", Some("J"), "lambda=-3/4"),
        Scenario::new("kod-mk-jabc-unit", Kod, "Mk", Some("Jabc"), "a=1,b=0,c=0"),
        Scenario::new("kod-mk-jabc-3-4", Kod, "Mk", Some("Jabc"), "a=3/5,b=4/5,c=0"),
        Scenario::new("kod-n-jabc-3-4", Kod, "N", Some("Jabc"), "a=3/5,b=4/5,c=0"),
        Scenario::new("kod-mlambda-jabc-3-4", Kod, "Mlambda", Some("Jabc"), "a=3/5,b=4/5,c=0"),
        Scenario::new("curvature-mk-js", Curvature, "Mk", Some("Js"), ""),
        Scenario::new("curvature-n-j", Curvature, "N", Some("J"), ""),
        Scenario::new("curvature-n-jp", Curvature, "N", Some("Jp"), ""),
        Scenario::new("curvature-mlambda-j", Curvature, "Mlambda", Some("J"), ""),
        Scenario::new("det-mk-js", Det, "Mk", Some("Js"), ""),
        Scenario::new("det-mk-jr-0", Det, "Mk", Some("Jr"), "r=0"),
        Scenario::new("det-n-j", Det, "N", Some("J"), ""),
        Scenario::new("det-n-jp", Det, "N", Some("Jp"), ""),
        Scenario::new("det-n-jabc-c0", Det, "N", Some("Jabc"), "c=0"),
        Scenario::new("det-mlambda-jabc-c0", Det, "Mlambda", Some("Jabc"), "c=0"),
        Scenario::new("verify-mk", Verify, "Mk", None, "k=1"),
        Scenario::new("verify-n", Verify, "N", None, ""),
        Scenario::new("verify-mlambda", Verify, "Mlambda", None, "lambda=-3/4"),
        Scenario::new("twistor-mk", Twistor, "Mk", None, ""),
        Scenario::new("twistor-n", Twistor, "N", None, ""),
        Scenario::new("twistor-mlambda", Twistor, "Mlambda", None, ""),
        Scenario::new("norden-mk", Norden, "Mk", None, ""),
        Scenario::new("norden-n", Norden, "N", None, ""),
        Scenario::new("norden-mlambda", Norden, "Mlambda", None, ""),
    ];
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

pub fn find(id: &str) -> Result<Scenario, CliError> {
    registry().into_iter().find(|s| s.id == id).ok_or_else(|| CliError::UnknownScenario(id.into()))
}

/// Name of the metric registered with a structure, if any.
pub fn metric_name(manifold: &str, structure: &str) -> Option<&'static str> {
    match (manifold, structure) {
        (_, "Js") => Some("gs"),
        (_, "Jr") => Some("g"),
        ("N", "J") | ("Mlambda", "J") => Some("gJ"),
        ("N", "Jp") => Some("gJp"),
        (_, "J0" | "J1" | "J2" | "Jabc") => Some("g0"),
        _ => None,
    }
}

fn load(s: &Scenario) -> Result<SolvmanifoldModel, CliError> {
    match &s.model {
        Some(path) => {
            let src = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
            load_model(&src).map_err(engine)
        }
        None => Ok(builtin_symbolic(Builtin::from_name(&s.manifold).map_err(engine)?)),
    }
}

/// Parses `--params` and checks every name against the declared symbols.
pub fn bindings(model: &SolvmanifoldModel, structure: Option<&str>, raw: &str) -> Result<BTreeMap<String, Expr>, CliError> {
    let mut allowed: BTreeSet<String> = model
        .ctx
        .symbols()
        .filter(|(_, i)| matches!(i.kind, SymbolKind::Param | SymbolKind::Lattice))
        .map(|(n, _)| n.clone())
        .collect();
    if let Some(st) = structure {
        allowed.extend(structure_params(st).iter().map(|p| p.to_string()));
    }
    let mut out = BTreeMap::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((k, v)) = part.split_once('=') else {
            return Err(CliError::ParamTypeError { name: part.into(), why: "expected name=value".into() });
        };
        let k = k.trim();
        if !allowed.contains(k) {
            let known = if allowed.is_empty() { "none".to_string() } else { allowed.iter().cloned().collect::<Vec<_>>().join(", ") };
            return Err(CliError::ParamTypeError { name: k.into(), why: format!("not a declared symbol (known: {known})") });
        }
        let e = model.ctx.parse(v.trim()).map_err(|e| CliError::ParamTypeError { name: k.into(), why: e.to_string() })?;
        if let Some(x) = e.free_symbols().into_iter().next() {
            return Err(CliError::ParamTypeError { name: k.into(), why: format!("value must be a constant, found symbol `{x}`") });
        }
        out.insert(k.to_string(), e);
    }
    Ok(out)
}

fn structure_of<'a>(s: &'a Scenario, model: &SolvmanifoldModel) -> Result<&'a str, CliError> {
    let st = s.structure.as_deref().ok_or(CliError::MissingStructure(s.analysis.name()))?;
    let known = structure_names(&model.name);
    if !known.contains(&st) {
        return Err(CliError::UnknownStructure { manifold: model.name.clone(), structure: st.into(), known: known.join(", ") });
    }
    Ok(st)
}

/// Splits bindings into (model symbols, structure parameters).
fn split_params(structure: &str, b: &BTreeMap<String, Expr>) -> (BTreeMap<String, Expr>, BTreeMap<String, Expr>) {
    let sp = structure_params(structure);
    let (s, m): (BTreeMap<_, _>, BTreeMap<_, _>) = b.clone().into_iter().partition(|(k, _)| sp.contains(&k.as_str()));
    (m, s)
}

/// Runs one scenario; the report is a pure function of the scenario and options.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<Report, CliError> {
    let model = load(s)?;
    let st = match s.analysis {
        Analysis::Kod | Analysis::Curvature | Analysis::Det => Some(structure_of(s, &model)?),
        _ => None,
    };
    let bind = bindings(&model, st, &s.params)?;
    let (body, text) = match s.analysis {
        Analysis::Kod => kod(&model, st.unwrap(), &bind, opts)?,
        Analysis::Curvature => curvature(s, &model, st.unwrap(), &bind)?,
        Analysis::Det => det(&model, st.unwrap(), &bind)?,
        Analysis::Verify => verify(s, &model, &bind)?,
        Analysis::Twistor => twistor(&model.specialize(&bind).map_err(engine)?)?,
        Analysis::Norden => norden(&model.specialize(&bind).map_err(engine)?)?,
    };
    let json = json!({
        "schema": SCHEMA_VERSION,
        "scenario": s.id,
        "analysis": s.analysis.name(),
        "report": body,
    });
    Ok(Report { id: s.id.clone(), json, text: format!("[{}]\n{text}", s.id) })
}

fn kod(model: &SolvmanifoldModel, st: &str, bind: &BTreeMap<String, Expr>, o: &RunOptions) -> Result<(Value, String), CliError> {
    let opts = KodOptions { window: o.window, max_power: o.power, samples: o.samples, scan: true };
    let v = decide_kodaira(model, st, bind, &opts).map_err(engine)?;
    let text = kod_text(&v);
    Ok((serde_json::to_value(&v).map_err(engine)?, text))
}

fn kod_text(v: &KodairaVerdict) -> String {
    let params = v.params.iter().map(|(k, x)| format!("{k}={x}")).collect::<Vec<_>>().join(",");
    let kod = v.kod.map(|k| k.to_string()).unwrap_or_else(|| "?".into());
    let status = match &v.status {
        Status::SymbolicProved => "symbolic-proved".to_string(),
        Status::WindowVerified { window, samples } => format!("window-verified N={window} samples={samples}"),
        Status::Inconclusive => "inconclusive".to_string(),
    };
    let mut out = format!("{} {} {params}\nkod = {kod} ({status})\n", v.manifold, v.structure);
    let pm = v.plurigenera.table.iter().map(|(m, p)| format!("P{m}={p}")).collect::<Vec<_>>().join(" ");
    out += &format!("plurigenera: {pm}\n");
    let rules = v.rules_fired.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>().join(", ");
    out += &format!("rules: {rules}\n");
    for s in &v.sections {
        out += &format!("section: {s}\n");
    }
    if let Some(s) = &v.scan {
        out += &format!("scan: {} N={} samples={} min|det|={:.6e} vanishing={}\n", s.system, s.n, s.samples, s.min_abs_det, s.vanishing_modes);
    }
    out
}

fn curvature(s: &Scenario, model: &SolvmanifoldModel, st: &str, bind: &BTreeMap<String, Expr>) -> Result<(Value, String), CliError> {
    let registered = metric_name(&model.name, st);
    if let Some(given) = &s.metric {
        match registered {
            Some(m) if m == given || (m == "g0" && given == "g") => {}
            Some(m) => {
                return Err(CliError::MetricMismatch { structure: st.into(), given: given.clone(), why: format!("registered metric is {m}") })
            }
            None => return Err(CliError::MetricMismatch { structure: st.into(), given: given.clone(), why: "no metric registered".into() }),
        }
    }
    let (mb, sb) = split_params(st, bind);
    let m = model.specialize(&mb).map_err(engine)?;
    let j = acs::build(&m, st, &sb).map_err(engine)?;
    let c = chern::connection(&m, &j).map_err(engine)?;
    let r = c.report(&m.name, st);
    let mut text = format!("{} {} {}\n", r.manifold, r.structure, registered.unwrap_or("-"));
    text += &format!("coframe: {}\n", r.coframe);
    for (i, t) in r.torsion.iter().enumerate() {
        text += &format!("Theta^{} = {t}\n", i + 1);
    }
    for (i, row) in r.connection.iter().enumerate() {
        for (k, t) in row.iter().enumerate() {
            text += &format!("theta^{}_{} = {t}\n", i + 1, k + 1);
        }
    }
    for (i, row) in r.curvature.iter().enumerate() {
        for (k, t) in row.iter().enumerate() {
            text += &format!("psi^{}_{} = {t}\n", i + 1, k + 1);
        }
    }
    text += &format!("ricci = {}\nscalar = {}\nchern_ricci_flat = {}\n", r.ricci, r.scalar, r.chern_ricci_flat);
    Ok((serde_json::to_value(&r).map_err(engine)?, text))
}

fn det(model: &SolvmanifoldModel, st: &str, bind: &BTreeMap<String, Expr>) -> Result<(Value, String), CliError> {
    let (mb, sb) = split_params(st, bind);
    let m = model.specialize(&mb).map_err(engine)?;
    let j = acs::build(&m, st, &sb).map_err(engine)?;
    let ctx = &j.ctx;
    let sys = pluricanonical_system(&m, &j, &Expr::sym("m")).map_err(engine)?;
    let mut systems = Vec::new();
    let mut text = format!("{} {}\n", m.name, st);
    for raw in mode_reduce(ctx, &sys, &m).map_err(engine)? {
        let s = display_form(ctx, &sys, &m.name, st, &raw).map_err(engine)?;
        let rows: Vec<String> = s.rows.iter().map(|r| r.to_string()).collect();
        let matrix: Vec<Vec<String>> = s.matrix.iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect();
        let label = format!("chart {} rows {}", s.chart, rows.join(","));
        let mut entry = json!({
            "chart": s.chart,
            "rows": s.rows,
            "kind": if s.kind == ModeKind::Algebraic { "algebraic" } else { "ode" },
            "unknowns": s.unknowns,
            "matrix": matrix,
        });
        if s.kind == ModeKind::Algebraic {
            let d = mode_determinant(ctx, &s).map_err(engine)?;
            entry["det"] = json!(d.det.to_string());
            entry["re"] = json!(d.re.to_string());
            entry["im"] = json!(d.im.to_string());
            text += &format!("det[{label}] = {}\n", d.det);
        } else {
            text += &format!("ode[{label}] = {:?}\n", matrix);
        }
        systems.push(entry);
    }
    Ok((json!({ "manifold": m.name, "structure": st, "systems": systems }), text))
}

fn verify(s: &Scenario, model: &SolvmanifoldModel, bind: &BTreeMap<String, Expr>) -> Result<(Value, String), CliError> {
    let m = match (&s.model, Builtin::from_name(&model.name)) {
        (None, Ok(b)) => {
            let pv = b
                .params()
                .iter()
                .map(|p| (p.to_string(), bind.get(*p).cloned().map(ParamValue::Value).unwrap_or(ParamValue::Symbolic)))
                .collect();
            builtin(b, &pv).map_err(engine)?
        }
        _ => model.specialize(bind).map_err(engine)?,
    };
    let r = m.verify();
    let flag = |b: bool| if b { "ok" } else { "FAILED" };
    let mut text = format!("{}\njacobi: {}\nduality: {}\ncommutators: {}\n", m.name, flag(r.jacobi), flag(r.duality), flag(r.commutators_match));
    for f in &r.failures {
        text += &format!("failure: {f}\n");
    }
    let params: BTreeMap<String, String> = bind.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
    Ok((json!({ "manifold": m.name, "params": params, "ok": r.ok(), "checks": r }), text))
}

fn twistor(m: &SolvmanifoldModel) -> Result<(Value, String), CliError> {
    let r = twistor_closedness_report(m).map_err(engine)?.to_json(&m.ctx, &m.name);
    let mut text = format!("{}\n", m.name);
    for i in 0..3 {
        text += &format!("omega{i} = {}\nd omega{i} = {}\n", r.omega[i], r.d_omega[i]);
    }
    text += &format!("self_dual: {:?}\nclosed sections: {:?}\n", r.self_dual, r.closed_sections);
    Ok((serde_json::to_value(&r).map_err(engine)?, text))
}

fn norden(m: &SolvmanifoldModel) -> Result<(Value, String), CliError> {
    let r = norden_report(m).map_err(engine)?.to_json(&m.ctx, &m.name);
    let mut text = format!("{}\n", m.name);
    for i in 0..3 {
        text += &format!("omega~{i} = {}\nd omega~{i} = {}\n", r.omega_tilde[i], r.d_omega_tilde[i]);
    }
    for e in &r.classification {
        text += &format!("(g~{}, J{}): norden={} pseudo_hermitian={}\n", e.metric, e.structure, e.norden, e.pseudo_hermitian);
    }
    for (name, g) in &r.twins {
        text += &format!("{name} = {g}\n");
    }
    Ok((serde_json::to_value(&r).map_err(engine)?, text))
}
