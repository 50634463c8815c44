use std::collections::{BTreeMap, BTreeSet};

use super::coeff::{Coeff, Int};
use super::expr::{canon, is_symbol_name, Atom, Monomial, ScalarExpr};
use super::raw::RawExpr;
use super::ExprError;

/// Role of a declared symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Param,
    Fiber,
    Coord,
    Mode,
    Lattice,
    Power,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolInfo {
    pub kind: SymbolKind,
    pub invertible: bool,
}

/// Directed rewrite `lhs → rhs` on monomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule<T: Int> {
    pub lhs: Monomial<T>,
    pub rhs: ScalarExpr<T>,
}

/// Declared symbols, relation rewrites and registered inverses.
#[derive(Clone, Debug, Default)]
pub struct Context<T: Int = num_bigint::BigInt> {
    symbols: BTreeMap<String, SymbolInfo>,
    rules: Vec<Rule<T>>,
    inverses: Vec<(ScalarExpr<T>, ScalarExpr<T>)>,
}

impl<T: Int> Context<T> {
    pub fn new() -> Self {
        Context { symbols: BTreeMap::new(), rules: Vec::new(), inverses: Vec::new() }
    }

    pub fn declare(&mut self, name: &str, kind: SymbolKind, invertible: bool) -> &mut Self {
        assert!(is_symbol_name(name), "bad symbol name {name}");
        self.symbols.insert(name.to_string(), SymbolInfo { kind, invertible });
        self
    }

    pub fn param(&mut self, name: &str) -> &mut Self {
        self.declare(name, SymbolKind::Param, false)
    }

    pub fn param_inv(&mut self, name: &str) -> &mut Self {
        self.declare(name, SymbolKind::Param, true)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.symbols.contains_key(name)
    }

    pub fn symbol(&self, name: &str) -> Option<&SymbolInfo> {
        self.symbols.get(name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = (&String, &SymbolInfo)> {
        self.symbols.iter()
    }

    pub fn symbols_of_kind(&self, kind: SymbolKind) -> Vec<String> {
        self.symbols.iter().filter(|(_, i)| i.kind == kind).map(|(n, _)| n.clone()).collect()
    }

    pub fn rules(&self) -> &[Rule<T>] {
        &self.rules
    }

    /// Adds `lhs → rhs`; the left side must be a single monomial with unit coefficient.
    pub fn add_rule(&mut self, lhs: &ScalarExpr<T>, rhs: ScalarExpr<T>) -> &mut Self {
        let (m, c) = lhs.as_single_term().expect("rule lhs must be a monomial");
        assert!(c.is_one(), "rule lhs must have unit coefficient");
        self.rules.push(Rule { lhs: m.clone(), rhs });
        self
    }

    pub fn add_inverse(&mut self, e: ScalarExpr<T>, inv: ScalarExpr<T>) -> &mut Self {
        self.inverses.push((e, inv));
        self
    }

    /// Applies the relation rewrites until no rule fires.
    pub fn reduce(&self, e: &ScalarExpr<T>) -> ScalarExpr<T> {
        if self.rules.is_empty() {
            return e.clone();
        }
        let mut cur = e.clone();
        loop {
            let mut changed = false;
            let mut out = ScalarExpr::zero();
            for (m, c) in cur.terms() {
                match self.rules.iter().find_map(|r| divide(m, &r.lhs).map(|q| (r, q))) {
                    Some((r, q)) => {
                        changed = true;
                        out = &out + &(&canon(q, c.clone()) * &r.rhs);
                    }
                    None => out.add_term(m.clone(), c.clone()),
                }
            }
            cur = out;
            if !changed {
                return cur;
            }
        }
    }

    /// Equality modulo the declared relations.
    pub fn equal(&self, a: &ScalarExpr<T>, b: &ScalarExpr<T>) -> bool {
        self.reduce(&(a - b)).is_zero()
    }

    pub fn is_zero(&self, a: &ScalarExpr<T>) -> bool {
        self.reduce(a).is_zero()
    }

    pub fn atom_invertible(&self, a: &Atom<T>) -> bool {
        match a {
            Atom::Pi | Atom::Exp(_) => true,
            Atom::Sym(s) => self.symbols.get(s).map(|i| i.invertible).unwrap_or(false),
            Atom::Sqrt(p) => self.try_inv(p).is_ok(),
        }
    }

    /// Inverse of a nonzero constant, an invertible monomial, or a registered expression.
    pub fn try_inv(&self, e: &ScalarExpr<T>) -> Result<ScalarExpr<T>, ExprError> {
        let e = self.reduce(e);
        if e.is_zero() {
            return Err(ExprError::NonInvertibleDivision("0".into()));
        }
        if let Some((m, c)) = e.as_single_term() {
            if m.iter().all(|(a, _)| self.atom_invertible(a)) {
                return Ok(self.reduce(&canon(m.inverse().0, c.inv().unwrap())));
            }
        }
        for (p, pinv) in &self.inverses {
            let p = self.reduce(p);
            if p == e {
                return Ok(pinv.clone());
            }
            if let Some(c) = constant_ratio(&e, &p) {
                return Ok(pinv.scale(&c.inv().unwrap()));
            }
        }
        Err(ExprError::NonInvertibleDivision(e.to_string()))
    }

    pub fn powi(&self, e: &ScalarExpr<T>, n: i64) -> Result<ScalarExpr<T>, ExprError> {
        if n >= 0 {
            Ok(self.reduce(&e.pow(n as u32)))
        } else {
            Ok(self.reduce(&self.try_inv(e)?.pow(n.unsigned_abs() as u32)))
        }
    }

    pub fn div(&self, a: &ScalarExpr<T>, b: &ScalarExpr<T>) -> Result<ScalarExpr<T>, ExprError> {
        Ok(self.reduce(&(a * &self.try_inv(b)?)))
    }

    pub fn mul(&self, a: &ScalarExpr<T>, b: &ScalarExpr<T>) -> ScalarExpr<T> {
        self.reduce(&(a * b))
    }

    /// Normal form of a raw expression tree.
    pub fn normalize(&self, raw: &RawExpr) -> Result<ScalarExpr<T>, ExprError> {
        let e = self.norm_inner(raw)?;
        Ok(self.reduce(&e))
    }

    fn norm_inner(&self, raw: &RawExpr) -> Result<ScalarExpr<T>, ExprError> {
        Ok(match raw {
            RawExpr::Int(n) => {
                let v: T = n.parse().map_err(|_| ExprError::Parse(format!("bad integer {n}")))?;
                ScalarExpr::from_ratio(num_rational::Ratio::from_integer(v))
            }
            RawExpr::I => ScalarExpr::i(),
            RawExpr::Pi => ScalarExpr::pi(),
            RawExpr::Sym(s) => {
                if !self.is_declared(s) {
                    return Err(ExprError::UndeclaredAtom(s.clone()));
                }
                ScalarExpr::sym(s)
            }
            RawExpr::Sqrt(x) => self.reduce(&self.norm_inner(x)?).sqrt(),
            RawExpr::Exp(x) => self.reduce(&self.norm_inner(x)?).exp(),
            RawExpr::Conj(x) => self.norm_inner(x)?.conj(),
            RawExpr::Neg(x) => -&self.norm_inner(x)?,
            RawExpr::Add(xs) => {
                let mut acc = ScalarExpr::zero();
                for x in xs {
                    acc = &acc + &self.norm_inner(x)?;
                }
                acc
            }
            RawExpr::Sub(a, b) => &self.norm_inner(a)? - &self.norm_inner(b)?,
            RawExpr::Mul(xs) => {
                let mut acc = ScalarExpr::one();
                for x in xs {
                    acc = self.reduce(&(&acc * &self.norm_inner(x)?));
                }
                acc
            }
            RawExpr::Div(a, b) => {
                let num = self.norm_inner(a)?;
                let den = self.norm_inner(b)?;
                &num * &self.try_inv(&den)?
            }
            RawExpr::Pow(b, n) => self.powi(&self.norm_inner(b)?, *n)?,
        })
    }

    pub fn parse(&self, s: &str) -> Result<ScalarExpr<T>, ExprError> {
        self.normalize(&super::parse::parse(s)?)
    }

    /// Substitution followed by relation reduction; registered inverses are honoured.
    pub fn substitute(
        &self,
        e: &ScalarExpr<T>,
        bindings: &BTreeMap<String, ScalarExpr<T>>,
    ) -> Result<ScalarExpr<T>, ExprError> {
        for k in bindings.keys() {
            if !is_symbol_name(k) {
                return Err(ExprError::SubstitutionIntoNonSymbol(k.clone()));
            }
        }
        let out = e.map_atoms(&mut |c| c.clone(), &mut |a, p| match a {
            Atom::Sym(s) => match bindings.get(s) {
                Some(v) => self.powi(v, p),
                None => Ok(canon(Monomial::atom(a.clone(), p).0, Coeff::one())),
            },
            Atom::Pi => Ok(canon(Monomial::atom(Atom::Pi, p).0, Coeff::one())),
            Atom::Sqrt(x) => {
                let inner = self.reduce(&self.substitute(x, bindings)?);
                let root = inner.sqrt();
                self.powi(&root, p)
            }
            Atom::Exp(l) => Ok(self.substitute(l, bindings)?.scale(&Coeff::from_i64(p)).exp()),
        })?;
        Ok(self.reduce(&out))
    }

    /// A copy with extra symbols bound away and all rules kept.
    pub fn without_symbols(&self, names: &BTreeSet<String>) -> Self {
        let mut c = self.clone();
        c.symbols.retain(|k, _| !names.contains(k));
        c
    }

    pub fn merge(&mut self, other: &Context<T>) -> &mut Self {
        for (k, v) in &other.symbols {
            self.symbols.insert(k.clone(), v.clone());
        }
        self.rules.extend(other.rules.iter().cloned());
        self.inverses.extend(other.inverses.iter().cloned());
        self
    }

    /// Drops rules mentioning any of the given symbols.
    pub fn drop_rules_on(&mut self, names: &BTreeSet<String>) -> &mut Self {
        self.rules.retain(|r| {
            let lhs = ScalarExpr::from_monomial(&r.lhs);
            !lhs.free_symbols().iter().chain(r.rhs.free_symbols().iter()).any(|s| names.contains(s))
        });
        self.inverses.retain(|(p, q)| {
            !p.free_symbols().iter().chain(q.free_symbols().iter()).any(|s| names.contains(s))
        });
        self
    }
}

/// Quotient monomial if `lhs` divides `m` in the rewrite sense.
fn divide<T: Int>(m: &Monomial<T>, lhs: &Monomial<T>) -> Option<std::collections::BTreeMap<Atom<T>, i64>> {
    for (a, le) in lhs.iter() {
        let te = m.exponent(a);
        if (le > 0 && te < le) || (le < 0 && te > le) {
            return None;
        }
    }
    Some(m.raw_mul(&lhs.inverse()))
}

/// `c` with `a = c·b` for a constant `c`, if any.
fn constant_ratio<T: Int>(a: &ScalarExpr<T>, b: &ScalarExpr<T>) -> Option<Coeff<T>> {
    if a.num_terms() != b.num_terms() || b.is_zero() {
        return None;
    }
    let (m0, c0) = b.terms().next()?;
    let ca = a.terms().find(|(m, _)| *m == m0)?.1;
    let ratio = ca.mul(&c0.inv()?);
    if b.scale(&ratio) == *a {
        Some(ratio)
    } else {
        None
    }
}
