use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use super::coeff::{squarefree_split, Coeff, Int};
use super::ExprError;

/// Opaque factor of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Atom<T: Int> {
    Pi,
    Sym(String),
    Sqrt(Box<ScalarExpr<T>>),
    Exp(Box<ScalarExpr<T>>),
}

/// Product of atoms with nonzero integer exponents.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Monomial<T: Int>(pub(crate) BTreeMap<Atom<T>, i64>);

impl<T: Int> Monomial<T> {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn atom(a: Atom<T>, e: i64) -> Self {
        let mut m = BTreeMap::new();
        if e != 0 {
            m.insert(a, e);
        }
        Monomial(m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom<T>, i64)> {
        self.0.iter().map(|(a, e)| (a, *e))
    }

    pub fn exponent(&self, a: &Atom<T>) -> i64 {
        self.0.get(a).copied().unwrap_or(0)
    }

    pub fn sym_exponent(&self, name: &str) -> i64 {
        self.exponent(&Atom::Sym(name.to_string()))
    }

    /// Raw exponent-wise product; callers canonicalize.
    pub(crate) fn raw_mul(&self, o: &Self) -> BTreeMap<Atom<T>, i64> {
        let mut m = self.0.clone();
        for (a, e) in &o.0 {
            *m.entry(a.clone()).or_insert(0) += e;
        }
        m.retain(|_, e| *e != 0);
        m
    }

    pub fn inverse(&self) -> Self {
        Monomial(self.0.iter().map(|(a, e)| (a.clone(), -e)).collect())
    }

    pub fn degree_in(&self, name: &str) -> i64 {
        self.sym_exponent(name)
    }
}

/// Exact complex scalar: finite sum of coefficient·monomial terms in normal form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ScalarExpr<T: Int = BigInt> {
    pub(crate) terms: BTreeMap<Monomial<T>, Coeff<T>>,
}

impl<T: Int> Default for ScalarExpr<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Int> ScalarExpr<T> {
    pub fn zero() -> Self {
        ScalarExpr { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::from_coeff(Coeff::one())
    }

    pub fn from_coeff(c: Coeff<T>) -> Self {
        let mut e = Self::zero();
        e.add_term(Monomial::one(), c);
        e
    }

    pub fn int(v: i64) -> Self {
        Self::from_coeff(Coeff::from_i64(v))
    }

    pub fn rational(n: i64, d: i64) -> Self {
        Self::from_ratio(Ratio::new(T::from_i64(n).unwrap(), T::from_i64(d).unwrap()))
    }

    pub fn from_ratio(r: Ratio<T>) -> Self {
        Self::from_coeff(Coeff::real(r))
    }

    pub fn i() -> Self {
        Self::from_coeff(Coeff::i())
    }

    pub fn pi() -> Self {
        Self::from_atom(Atom::Pi)
    }

    pub fn sym(name: &str) -> Self {
        Self::from_atom(Atom::Sym(name.to_string()))
    }

    pub(crate) fn from_atom(a: Atom<T>) -> Self {
        Self::from_term(Monomial::atom(a, 1), Coeff::one())
    }

    /// Term whose monomial is already canonical.
    pub(crate) fn from_term(m: Monomial<T>, c: Coeff<T>) -> Self {
        let mut e = Self::zero();
        e.add_term(m, c);
        e
    }

    pub(crate) fn add_term(&mut self, m: Monomial<T>, c: Coeff<T>) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(old) => {
                let s = old.add(&c);
                if s.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *old = s;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial<T>, &Coeff<T>)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_coeff().map(|c| c.is_one()).unwrap_or(false)
    }

    /// Value if the expression is a constant of ℚ(i).
    pub fn as_coeff(&self) -> Option<Coeff<T>> {
        if self.terms.is_empty() {
            return Some(Coeff::zero());
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.is_one() {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn as_rational(&self) -> Option<Ratio<T>> {
        self.as_coeff().filter(|c| c.is_real()).map(|c| c.re)
    }

    /// The single term when the expression is a monomial times a coefficient.
    pub fn as_single_term(&self) -> Option<(&Monomial<T>, &Coeff<T>)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn scale(&self, c: &Coeff<T>) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        ScalarExpr { terms: self.terms.iter().map(|(m, d)| (m.clone(), d.mul(c))).collect() }
    }

    pub fn scale_ratio(&self, r: &Ratio<T>) -> Self {
        self.scale(&Coeff::real(r.clone()))
    }

    pub fn mul_i(&self) -> Self {
        self.scale(&Coeff::i())
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Inverse without relation knowledge: nonzero constants and single terms only.
    pub fn inv_plain(&self) -> Result<Self, ExprError> {
        let (m, c) = self
            .as_single_term()
            .ok_or_else(|| ExprError::NonInvertibleDivision(self.to_string()))?;
        let ci = c.inv().ok_or_else(|| ExprError::NonInvertibleDivision(self.to_string()))?;
        Ok(canon(m.inverse().0, ci))
    }

    /// Integer power, inverting single terms for negative exponents.
    pub fn powi_plain(&self, n: i64) -> Result<Self, ExprError> {
        if n >= 0 {
            Ok(self.pow(n as u32))
        } else {
            Ok(self.inv_plain()?.pow(n.unsigned_abs() as u32))
        }
    }

    pub fn exp(&self) -> Self {
        if self.is_zero() {
            return Self::one();
        }
        Self::from_atom(Atom::Exp(Box::new(self.clone())))
    }

    /// Square root under a positivity assumption on symbols.
    pub fn sqrt(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        if let Some((m, c)) = self.as_single_term() {
            if let Some(root) = coeff_sqrt(c) {
                let mut out = root;
                for (a, e) in m.iter() {
                    let f = match a {
                        Atom::Exp(l) => l.scale_ratio(&Ratio::new(T::from_i64(e).unwrap(), T::from_i64(2).unwrap())).exp(),
                        _ => {
                            let inner = Self::from_term(Monomial::atom(a.clone(), 1), Coeff::one());
                            canon(Monomial::atom(Atom::Sqrt(Box::new(inner)), e).0, Coeff::one())
                        }
                    };
                    out = &out * &f;
                }
                return out;
            }
        }
        // pull out a positive rational content
        if self.terms.values().all(|c| c.is_real()) {
            let content = rational_content(self.terms.values().map(|c| &c.re));
            if !content.is_one() {
                let inner = self.scale_ratio(&content.recip());
                let root = coeff_sqrt(&Coeff::real(content)).unwrap();
                return &root * &Self::from_atom(Atom::Sqrt(Box::new(inner)));
            }
        }
        Self::from_atom(Atom::Sqrt(Box::new(self.clone())))
    }

    pub fn conj(&self) -> Self {
        self.map_atoms(&mut |c| c.conj(), &mut |a, e| match a {
            Atom::Sqrt(p) => Ok(p.conj().sqrt().powi_plain(e)?),
            Atom::Exp(l) => Ok(l.scale(&Coeff::from_i64(e)).conj().exp()),
            other => Ok(canon(Monomial::atom(other.clone(), e).0, Coeff::one())),
        })
        .expect("conjugation never divides")
    }

    pub fn re(&self) -> Self {
        (self + &self.conj()).scale_ratio(&Ratio::new(T::one(), T::one() + T::one()))
    }

    pub fn im(&self) -> Self {
        // (e − conj e)/(2i) = −i(e − conj e)/2
        (self - &self.conj()).scale(&Coeff::new(Ratio::zero(), Ratio::new(-T::one(), T::one() + T::one())))
    }

    pub fn is_real(&self) -> bool {
        *self == self.conj()
    }

    /// Rebuilds the expression by mapping coefficients and every atom power.
    pub fn map_atoms<F, G>(&self, fc: &mut F, fa: &mut G) -> Result<Self, ExprError>
    where
        F: FnMut(&Coeff<T>) -> Coeff<T>,
        G: FnMut(&Atom<T>, i64) -> Result<Self, ExprError>,
    {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut t = Self::from_coeff(fc(c));
            for (a, e) in m.iter() {
                t = &t * &fa(a, e)?;
                if t.is_zero() {
                    break;
                }
            }
            out = &out + &t;
        }
        Ok(out)
    }

    /// Replaces symbols by expressions; Sqrt and Exp arguments are rewritten recursively.
    pub fn substitute(&self, bindings: &BTreeMap<String, ScalarExpr<T>>) -> Result<Self, ExprError> {
        for k in bindings.keys() {
            if !is_symbol_name(k) {
                return Err(ExprError::SubstitutionIntoNonSymbol(k.clone()));
            }
        }
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        self.subst_inner(bindings)
    }

    fn subst_inner(&self, b: &BTreeMap<String, ScalarExpr<T>>) -> Result<Self, ExprError> {
        self.map_atoms(&mut |c| c.clone(), &mut |a, e| match a {
            Atom::Sym(s) => match b.get(s) {
                Some(v) => v.powi_plain(e),
                None => Ok(canon(Monomial::atom(a.clone(), e).0, Coeff::one())),
            },
            Atom::Pi => Ok(canon(Monomial::atom(Atom::Pi, e).0, Coeff::one())),
            Atom::Sqrt(p) => p.subst_inner(b)?.sqrt().powi_plain(e),
            Atom::Exp(l) => Ok(l.subst_inner(b)?.scale(&Coeff::from_i64(e)).exp()),
        })
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.terms.keys().any(|m| m.iter().any(|(a, _)| atom_depends_on(a, name)))
    }

    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_symbols(self, &mut out);
        out
    }

    /// Partial derivative with respect to a symbol.
    pub fn diff(&self, var: &str) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for (a, e) in m.iter() {
                let da = atom_diff(a, var);
                if da.is_zero() {
                    continue;
                }
                let mut rest = m.0.clone();
                *rest.get_mut(a).unwrap() -= 1;
                rest.retain(|_, e| *e != 0);
                let t = canon(rest, c.mul(&Coeff::from_i64(e)));
                out = &out + &(&t * &da);
            }
        }
        out
    }

    /// Degree in a symbol, counting only the symbol atom itself.
    pub fn degree_in(&self, name: &str) -> i64 {
        self.terms.keys().map(|m| m.sym_exponent(name)).max().unwrap_or(0)
    }

    /// Coefficients by power of a symbol; atoms containing the symbol elsewhere stay in the coefficient.
    pub fn collect_powers(&self, name: &str) -> BTreeMap<i64, Self> {
        let key = Atom::Sym(name.to_string());
        let mut out: BTreeMap<i64, Self> = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.exponent(&key);
            let mut rest = m.0.clone();
            rest.remove(&key);
            out.entry(e).or_default().add_term(Monomial(rest), c.clone());
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    /// Splits each monomial into the part built from `pred` atoms and the rest.
    pub fn split_by_atoms<P: Fn(&Atom<T>) -> bool>(&self, pred: P) -> BTreeMap<Monomial<T>, Self> {
        let mut out: BTreeMap<Monomial<T>, Self> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut key = BTreeMap::new();
            let mut rest = BTreeMap::new();
            for (a, e) in m.iter() {
                if pred(a) {
                    key.insert(a.clone(), e);
                } else {
                    rest.insert(a.clone(), e);
                }
            }
            out.entry(Monomial(key)).or_default().add_term(Monomial(rest), c.clone());
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    pub fn from_monomial(m: &Monomial<T>) -> Self {
        canon(m.0.clone(), Coeff::one())
    }
}

pub(crate) fn is_symbol_name(s: &str) -> bool {
    let mut ch = s.chars();
    match ch.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    if !ch.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return false;
    }
    !matches!(s, "i" | "pi" | "sqrt" | "exp" | "conj")
}

fn atom_depends_on<T: Int>(a: &Atom<T>, name: &str) -> bool {
    match a {
        Atom::Pi => false,
        Atom::Sym(s) => s == name,
        Atom::Sqrt(p) | Atom::Exp(p) => p.depends_on(name),
    }
}

fn collect_symbols<T: Int>(e: &ScalarExpr<T>, out: &mut BTreeSet<String>) {
    for m in e.terms.keys() {
        for (a, _) in m.iter() {
            match a {
                Atom::Pi => {}
                Atom::Sym(s) => {
                    out.insert(s.clone());
                }
                Atom::Sqrt(p) | Atom::Exp(p) => collect_symbols(p, out),
            }
        }
    }
}

fn atom_diff<T: Int>(a: &Atom<T>, var: &str) -> ScalarExpr<T> {
    match a {
        Atom::Pi => ScalarExpr::zero(),
        Atom::Sym(s) => {
            if s == var {
                ScalarExpr::one()
            } else {
                ScalarExpr::zero()
            }
        }
        Atom::Exp(l) => {
            let dl = l.diff(var);
            if dl.is_zero() {
                ScalarExpr::zero()
            } else {
                &dl * &ScalarExpr::from_atom(a.clone())
            }
        }
        Atom::Sqrt(p) => {
            let dp = p.diff(var);
            if dp.is_zero() {
                ScalarExpr::zero()
            } else {
                let half = Coeff::real(Ratio::new(T::one(), T::one() + T::one()));
                &dp * &canon(Monomial::atom(a.clone(), -1).0, half)
            }
        }
    }
}

fn rational_content<'a, T: Int>(it: impl Iterator<Item = &'a Ratio<T>>) -> Ratio<T> {
    let mut num = T::zero();
    let mut den = T::one();
    for r in it {
        num = num.gcd(r.numer());
        den = den.lcm(r.denom());
    }
    if num.is_zero() {
        Ratio::one()
    } else {
        Ratio::new(num, den)
    }
}

/// Square root of a rational or negative rational coefficient.
fn coeff_sqrt<T: Int>(c: &Coeff<T>) -> Option<ScalarExpr<T>> {
    if !c.is_real() {
        return None;
    }
    let q = &c.re;
    let neg = q.is_negative();
    let q = q.abs();
    let nd = q.numer().clone() * q.denom().clone();
    let (g, s) = squarefree_split(&nd);
    let mut out = ScalarExpr::from_ratio(Ratio::new(g, q.denom().clone()));
    if !s.is_one() {
        let inner = ScalarExpr::from_ratio(Ratio::from_integer(s));
        out = &out * &ScalarExpr::from_atom(Atom::Sqrt(Box::new(inner)));
    }
    if neg {
        out = out.mul_i();
    }
    Some(out)
}

fn int_sqrt_arg<T: Int>(p: &ScalarExpr<T>) -> Option<T> {
    let r = p.as_rational()?;
    if r.is_integer() && r.is_positive() {
        Some(r.to_integer())
    } else {
        None
    }
}

/// Canonicalizes a product of atoms with a coefficient.
pub(crate) fn canon<T: Int>(mono: BTreeMap<Atom<T>, i64>, coeff: Coeff<T>) -> ScalarExpr<T> {
    if coeff.is_zero() {
        return ScalarExpr::zero();
    }
    let mut c = coeff;
    let mut plain: BTreeMap<Atom<T>, i64> = BTreeMap::new();
    let mut exp_arg = ScalarExpr::zero();
    let mut sqrt_int = T::one();
    let mut extra = ScalarExpr::one();
    for (a, e) in mono {
        if e == 0 {
            continue;
        }
        match a {
            Atom::Exp(l) => exp_arg = &exp_arg + &l.scale(&Coeff::from_i64(e)),
            Atom::Sqrt(p) => {
                let q = e.div_euclid(2);
                let r = e.rem_euclid(2);
                if let Some(s) = int_sqrt_arg(&p) {
                    if q != 0 {
                        let sq = Coeff::real(Ratio::from_integer(s.clone()));
                        c = c.mul(&sq.pow(q).unwrap());
                    }
                    if r == 1 {
                        sqrt_int = sqrt_int * s;
                    }
                } else if q < 0 && p.as_single_term().is_none() {
                    *plain.entry(Atom::Sqrt(p)).or_insert(0) += e;
                } else {
                    if q != 0 {
                        extra = &extra * &p.powi_plain(q).expect("single term inverse");
                    }
                    if r == 1 {
                        *plain.entry(Atom::Sqrt(p)).or_insert(0) += 1;
                    }
                }
            }
            other => *plain.entry(other).or_insert(0) += e,
        }
    }
    if !sqrt_int.is_one() {
        let (g, s) = squarefree_split(&sqrt_int);
        c = c.mul(&Coeff::real(Ratio::from_integer(g)));
        if !s.is_one() {
            plain.insert(Atom::Sqrt(Box::new(ScalarExpr::from_ratio(Ratio::from_integer(s)))), 1);
        }
    }
    if !exp_arg.is_zero() {
        plain.insert(Atom::Exp(Box::new(exp_arg)), 1);
    }
    plain.retain(|_, e| *e != 0);
    let base = ScalarExpr::from_term(Monomial(plain), c);
    if extra.is_one() {
        base
    } else {
        &base * &extra
    }
}

impl<'a, T: Int> Add<&'a ScalarExpr<T>> for &'a ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn add(self, o: &ScalarExpr<T>) -> ScalarExpr<T> {
        let (big, small) = if self.terms.len() >= o.terms.len() { (self, o) } else { (o, self) };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<'a, T: Int> Sub<&'a ScalarExpr<T>> for &'a ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn sub(self, o: &ScalarExpr<T>) -> ScalarExpr<T> {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.neg());
        }
        out
    }
}

impl<'a, T: Int> Mul<&'a ScalarExpr<T>> for &'a ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn mul(self, o: &ScalarExpr<T>) -> ScalarExpr<T> {
        let mut out = ScalarExpr::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let c = c1.mul(c2);
                if m1.is_one() || m2.is_one() || no_special(m1, m2) {
                    out.add_term(Monomial(m1.raw_mul(m2)), c);
                } else {
                    let t = canon(m1.raw_mul(m2), c);
                    for (m, c) in t.terms {
                        out.add_term(m, c);
                    }
                }
            }
        }
        out
    }
}

/// True when a product needs no Sqrt/Exp rewriting.
fn no_special<T: Int>(a: &Monomial<T>, b: &Monomial<T>) -> bool {
    let special = |m: &Monomial<T>| m.0.keys().any(|x| matches!(x, Atom::Sqrt(_) | Atom::Exp(_)));
    !(special(a) && special(b))
}

impl<T: Int> Neg for &ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn neg(self) -> ScalarExpr<T> {
        self.scale(&Coeff::from_i64(-1))
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl<T: Int> $tr<ScalarExpr<T>> for ScalarExpr<T> {
            type Output = ScalarExpr<T>;
            fn $m(self, o: ScalarExpr<T>) -> ScalarExpr<T> {
                (&self).$m(&o)
            }
        }
        impl<'a, T: Int> $tr<&'a ScalarExpr<T>> for ScalarExpr<T> {
            type Output = ScalarExpr<T>;
            fn $m(self, o: &ScalarExpr<T>) -> ScalarExpr<T> {
                (&self).$m(o)
            }
        }
        impl<'a, T: Int> $tr<ScalarExpr<T>> for &'a ScalarExpr<T> {
            type Output = ScalarExpr<T>;
            fn $m(self, o: ScalarExpr<T>) -> ScalarExpr<T> {
                self.$m(&o)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl<T: Int> Neg for ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn neg(self) -> ScalarExpr<T> {
        -&self
    }
}

impl<T: Int> std::iter::Sum for ScalarExpr<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| &a + &b)
    }
}
