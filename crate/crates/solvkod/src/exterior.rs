//! Exterior algebra on a fixed four-element coframe.
//!
//! Basis monomials are bitmasks over the four coframe elements; bit `i` is
//! the `i`-th element. For complex coframes bits 0,1 are the (1,0) forms and
//! bits 2,3 their conjugates, so `popcount(mask & 3)` is the holomorphic degree.
//!
//! Rendering: `k*e1^e3 - 2*e2^e4`, coefficients in the scalar grammar, multi-term
//! coefficients in parentheses.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Mat};
use crate::scalar_expr::{Atom, Ctx, Expr, ExprError, SymbolKind};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExteriorError {
    #[error("coframe mismatch: {0:?} vs {1:?}")]
    CoframeMismatch(Coframe, Coframe),
    #[error("degree overflow: {0} + {1} > 4")]
    DegreeOverflow(usize, usize),
    #[error("coefficient `{0}` is not invariant")]
    NonInvariantCoefficient(String),
    #[error("degenerate metric")]
    DegenerateMetric,
    #[error("coframe {0:?} is not complex")]
    NotComplex(Coframe),
    #[error("form parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Which coframe a form is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Coframe {
    /// invariant e^1..e^4
    E,
    /// adapted real ε^1..ε^4
    Eps,
    /// φ^1, φ^2, φ̄^1, φ̄^2
    Phi,
    /// rescaled unitary Φ^1, Φ^2, Φ̄^1, Φ̄^2
    PhiU,
}

impl Coframe {
    pub fn labels(self) -> [&'static str; 4] {
        match self {
            Coframe::E => ["e1", "e2", "e3", "e4"],
            Coframe::Eps => ["eps1", "eps2", "eps3", "eps4"],
            Coframe::Phi => ["phi1", "phi2", "phibar1", "phibar2"],
            Coframe::PhiU => ["Phi1", "Phi2", "Phibar1", "Phibar2"],
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, Coframe::Phi | Coframe::PhiU)
    }

    fn index_of(self, label: &str) -> Option<usize> {
        self.labels().iter().position(|l| *l == label)
    }
}

pub(crate) fn mask_indices(mask: u8) -> Vec<usize> {
    (0..4).filter(|i| mask & (1 << i) != 0).collect()
}

fn popcount(m: u8) -> usize {
    m.count_ones() as usize
}

/// Sign of concatenating sorted index sets `a` then `b`, or `None` if they meet.
pub(crate) fn merge_sign(a: u8, b: u8) -> Option<i64> {
    if a & b != 0 {
        return None;
    }
    let mut inv = 0;
    for i in mask_indices(a) {
        inv += mask_indices(b).iter().filter(|&&j| j < i).count();
    }
    Some(if inv % 2 == 0 { 1 } else { -1 })
}

/// Homogeneous form with coefficients keyed by sorted index masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantForm {
    coframe: Coframe,
    degree: usize,
    coeffs: BTreeMap<u8, Expr>,
}

impl InvariantForm {
    pub fn zero(coframe: Coframe, degree: usize) -> Self {
        assert!(degree <= 4);
        InvariantForm { coframe, degree, coeffs: BTreeMap::new() }
    }

    pub fn scalar(coframe: Coframe, c: Expr) -> Self {
        let mut f = Self::zero(coframe, 0);
        f.add_term(0, c);
        f
    }

    pub fn basis(coframe: Coframe, i: usize) -> Self {
        Self::monomial(coframe, &[i], Expr::one())
    }

    /// `c·θ^{i1}∧…∧θ^{ip}` with arbitrary index order.
    pub fn monomial(coframe: Coframe, idx: &[usize], c: Expr) -> Self {
        let mut f = Self::zero(coframe, idx.len());
        let mut mask = 0u8;
        let mut sign = 1;
        for &i in idx {
            match merge_sign(mask, 1 << i) {
                None => return f,
                Some(s) => {
                    sign *= s;
                    mask |= 1 << i;
                }
            }
        }
        f.add_term(mask, if sign < 0 { -c } else { c });
        f
    }

    pub fn coframe(&self) -> Coframe {
        self.coframe
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &BTreeMap<u8, Expr> {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u8) -> Expr {
        self.coeffs.get(&mask).cloned().unwrap_or_default()
    }

    /// Coefficient on the monomial with the given (sorted) indices.
    pub fn coeff_at(&self, idx: &[usize]) -> Expr {
        self.coeff(idx.iter().fold(0u8, |m, i| m | (1 << i)))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_term(&mut self, mask: u8, c: Expr) {
        assert_eq!(popcount(mask), self.degree, "mask degree");
        let cur = self.coeffs.remove(&mask).unwrap_or_default();
        let s = &cur + &c;
        if !s.is_zero() {
            self.coeffs.insert(mask, s);
        }
    }

    fn check(&self, o: &Self) -> Result<(), ExteriorError> {
        if self.coframe != o.coframe {
            Err(ExteriorError::CoframeMismatch(self.coframe, o.coframe))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self, ExteriorError> {
        self.check(o)?;
        assert_eq!(self.degree, o.degree, "adding forms of different degree");
        let mut r = self.clone();
        for (m, c) in &o.coeffs {
            r.add_term(*m, c.clone());
        }
        Ok(r)
    }

    pub fn sub(&self, o: &Self) -> Result<Self, ExteriorError> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| -c)
    }

    pub fn scale(&self, s: &Expr) -> Self {
        self.map_coeffs(|c| c * s)
    }

    pub fn map_coeffs(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        let mut r = Self::zero(self.coframe, self.degree);
        for (m, c) in &self.coeffs {
            r.add_term(*m, f(c));
        }
        r
    }

    pub fn reduce(&self, ctx: &Ctx) -> Self {
        self.map_coeffs(|c| ctx.reduce(c))
    }

    /// Equality modulo the context's relations.
    pub fn equal(&self, ctx: &Ctx, o: &Self) -> bool {
        self.coframe == o.coframe && self.degree == o.degree && self.sub(o).map(|d| d.reduce(ctx).is_zero()).unwrap_or(false)
    }

    pub fn wedge(&self, o: &Self) -> Result<Self, ExteriorError> {
        self.check(o)?;
        if self.degree + o.degree > 4 {
            return Err(ExteriorError::DegreeOverflow(self.degree, o.degree));
        }
        let mut r = Self::zero(self.coframe, self.degree + o.degree);
        for (a, ca) in &self.coeffs {
            for (b, cb) in &o.coeffs {
                if let Some(s) = merge_sign(*a, *b) {
                    let p = ca * cb;
                    r.add_term(a | b, if s < 0 { -p } else { p });
                }
            }
        }
        Ok(r)
    }

    /// Complex conjugation; on complex coframes φ ↔ φ̄.
    pub fn conj(&self) -> Self {
        let mut r = Self::zero(self.coframe, self.degree);
        for (m, c) in &self.coeffs {
            if self.coframe.is_complex() {
                let idx: Vec<usize> = mask_indices(*m).into_iter().map(|i| (i + 2) % 4).collect();
                let t = Self::monomial(self.coframe, &idx, c.conj());
                for (m2, c2) in t.coeffs {
                    r.add_term(m2, c2);
                }
            } else {
                r.add_term(*m, c.conj());
            }
        }
        r
    }

    /// Bidegree of a basis monomial on a complex coframe.
    pub fn mask_bidegree(mask: u8) -> (usize, usize) {
        (popcount(mask & 0b0011), popcount(mask & 0b1100))
    }

    pub fn bidegree_split(&self) -> Result<BTreeMap<(usize, usize), Self>, ExteriorError> {
        if !self.coframe.is_complex() {
            return Err(ExteriorError::NotComplex(self.coframe));
        }
        let mut out: BTreeMap<(usize, usize), Self> = BTreeMap::new();
        for (m, c) in &self.coeffs {
            out.entry(Self::mask_bidegree(*m))
                .or_insert_with(|| Self::zero(self.coframe, self.degree))
                .add_term(*m, c.clone());
        }
        Ok(out)
    }

    /// Component of bidegree (p,q), zero if absent.
    pub fn part(&self, p: usize, q: usize) -> Result<Self, ExteriorError> {
        Ok(self.bidegree_split()?.remove(&(p, q)).unwrap_or_else(|| Self::zero(self.coframe, self.degree)))
    }

    /// Rewrites the form given the images of this coframe's 1-forms in another coframe.
    pub fn change_basis(&self, ctx: &Ctx, images: &[InvariantForm; 4]) -> Result<Self, ExteriorError> {
        let target = images[0].coframe;
        let mut r = Self::zero(target, self.degree);
        for (m, c) in &self.coeffs {
            let mut t = Self::scalar(target, c.clone());
            for i in mask_indices(*m) {
                t = t.wedge(&images[i])?;
            }
            r = r.add(&t)?;
        }
        Ok(r.reduce(ctx))
    }

    /// Exterior derivative from the images `dθ^a`, for constant coefficients.
    pub fn d_with(&self, ctx: &Ctx, dbasis: &[InvariantForm; 4]) -> Result<Self, ExteriorError> {
        if self.degree == 4 {
            return Ok(Self::zero(self.coframe, 4));
        }
        for c in self.coeffs.values() {
            check_invariant(ctx, c)?;
        }
        let mut r = Self::zero(self.coframe, self.degree + 1);
        for (m, c) in &self.coeffs {
            let idx = mask_indices(*m);
            for (pos, &i) in idx.iter().enumerate() {
                let mut t = Self::scalar(self.coframe, if pos % 2 == 0 { c.clone() } else { -c });
                for (q, &j) in idx.iter().enumerate() {
                    let f = if q == pos { dbasis[i].clone() } else { Self::basis(self.coframe, j) };
                    t = t.wedge(&f)?;
                }
                r = r.add(&t)?;
            }
        }
        Ok(r.reduce(ctx))
    }

    /// Value on vectors given by frame components (degree ≤ 2).
    pub fn eval(&self, ctx: &Ctx, vs: &[Vec<Expr>]) -> Expr {
        assert_eq!(vs.len(), self.degree);
        let mut acc = Expr::zero();
        for (m, c) in &self.coeffs {
            let idx = mask_indices(*m);
            let sub: Mat = idx.iter().map(|&i| vs.iter().map(|v| v[i].clone()).collect()).collect();
            acc = &acc + &(c * &linalg::det(ctx, &sub));
        }
        ctx.reduce(&acc)
    }

    /// Antisymmetric matrix `ω(θ_i, θ_j)` of a 2-form.
    pub fn to_matrix(&self) -> Mat {
        assert_eq!(self.degree, 2);
        let mut m = linalg::zeros(4, 4);
        for (mask, c) in &self.coeffs {
            let idx = mask_indices(*mask);
            m[idx[0]][idx[1]] = c.clone();
            m[idx[1]][idx[0]] = -c;
        }
        m
    }

    pub fn from_matrix(coframe: Coframe, m: &Mat) -> Self {
        let mut f = Self::zero(coframe, 2);
        for i in 0..4 {
            for j in i + 1..4 {
                if !m[i][j].is_zero() {
                    f.add_term((1 << i) | (1 << j), m[i][j].clone());
                }
            }
        }
        f
    }

    /// Parses the rendering grammar, e.g. `k*e1^e3 - (1 + i*a)*phi1^phibar2`.
    pub fn parse(ctx: &Ctx, coframe: Coframe, s: &str) -> Result<Self, ExteriorError> {
        let mut out: Option<Self> = None;
        for (neg, term) in split_terms(s) {
            let (coeff_src, idx) = split_basis(coframe, &term)?;
            let c = if coeff_src.is_empty() { Expr::one() } else { ctx.parse(&coeff_src)? };
            let c = if neg { -c } else { c };
            let t = Self::monomial(coframe, &idx, c);
            out = Some(match out {
                None => t,
                Some(acc) => {
                    if acc.degree != t.degree {
                        return Err(ExteriorError::Parse(format!("mixed degrees in \"{s}\"")));
                    }
                    acc.add(&t)?
                }
            });
        }
        out.map(|f| f.reduce(ctx)).ok_or_else(|| ExteriorError::Parse("empty form".into()))
    }
}

fn check_invariant(ctx: &Ctx, c: &Expr) -> Result<(), ExteriorError> {
    for (m, _) in c.terms() {
        for (a, _) in m.iter() {
            let bad = match a {
                Atom::Exp(_) => true,
                Atom::Sym(s) => matches!(ctx.symbol(s).map(|i| i.kind), Some(SymbolKind::Coord) | Some(SymbolKind::Fiber)),
                _ => false,
            };
            if bad {
                return Err(ExteriorError::NonInvariantCoefficient(c.to_string()));
            }
        }
    }
    Ok(())
}

/// Splits at top-level `+`/`-` that separate terms.
fn split_terms(s: &str) -> Vec<(bool, String)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    let mut neg = false;
    let mut prev = ' ';
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth == 0 && (ch == '+' || ch == '-') && !matches!(prev, '^' | '*' | '/' | '(') {
            if !cur.trim().is_empty() {
                out.push((neg, cur.trim().to_string()));
            }
            cur.clear();
            neg = ch == '-';
            prev = ch;
            continue;
        }
        if !ch.is_whitespace() {
            prev = ch;
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push((neg, cur.trim().to_string()));
    }
    out
}

fn split_basis(coframe: Coframe, term: &str) -> Result<(String, Vec<usize>), ExteriorError> {
    let mut depth = 0i32;
    let mut last_star = None;
    for (i, ch) in term.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '*' if depth == 0 => last_star = Some(i),
            _ => {}
        }
    }
    let (head, tail) = match last_star {
        Some(i) => (term[..i].to_string(), term[i + 1..].trim().to_string()),
        None => (String::new(), term.trim().to_string()),
    };
    let parts: Vec<&str> = tail.split('^').map(|p| p.trim()).collect();
    let idx: Option<Vec<usize>> = parts.iter().map(|p| coframe.index_of(p)).collect();
    match idx {
        Some(idx) => Ok((head, idx)),
        None if last_star.is_none() => Ok((term.to_string(), Vec::new())),
        None => Ok((term.to_string(), Vec::new())),
    }
}

impl fmt::Display for InvariantForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let labels = self.coframe.labels();
        for (k, (m, c)) in self.coeffs.iter().enumerate() {
            let basis: Vec<&str> = mask_indices(*m).iter().map(|&i| labels[i]).collect();
            let basis = basis.join("^");
            let (neg, cs) = if c.num_terms() == 1 {
                let s = c.to_string();
                match s.strip_prefix('-') {
                    Some(r) => (true, r.to_string()),
                    None => (false, s),
                }
            } else {
                (false, format!("({c})"))
            };
            let body = match (cs.as_str(), basis.is_empty()) {
                (_, true) => cs.clone(),
                ("1", false) => basis,
                (_, false) => format!("{cs}*{basis}"),
            };
            match (k, neg) {
                (0, true) => write!(f, "-{body}")?,
                (0, false) => write!(f, "{body}")?,
                (_, true) => write!(f, " - {body}")?,
                (_, false) => write!(f, " + {body}")?,
            }
        }
        Ok(())
    }
}

/// Hodge star for the metric `g` (matrix on the same coframe) and orientation θ^1∧…∧θ^4.
pub fn hodge_star(ctx: &Ctx, a: &InvariantForm, g: &Mat) -> Result<InvariantForm, ExteriorError> {
    let detg = linalg::det(ctx, g);
    if ctx.is_zero(&detg) {
        return Err(ExteriorError::DegenerateMetric);
    }
    let ginv = linalg::inverse(ctx, g).map_err(|_| ExteriorError::DegenerateMetric)?;
    let absdet = match detg.as_rational() {
        Some(r) if r.is_negative() => -&detg,
        _ => detg.clone(),
    };
    let vol = ctx.reduce(&absdet.sqrt());
    let p = a.degree;
    let mut r = InvariantForm::zero(a.coframe, 4 - p);
    let all: Vec<u8> = (0u8..16).filter(|m| popcount(*m) == p).collect();
    for (i_mask, c) in &a.coeffs {
        let ii = mask_indices(*i_mask);
        for &k_mask in &all {
            let kk = mask_indices(k_mask);
            let minor = linalg::det(ctx, &linalg::submatrix(&ginv, &ii, &kk));
            if ctx.is_zero(&minor) {
                continue;
            }
            let comp = 0b1111 ^ k_mask;
            let s = merge_sign(k_mask, comp).unwrap();
            let t = &(c * &minor) * &vol;
            r.add_term(comp, if s < 0 { -t } else { t });
        }
    }
    Ok(r.reduce(ctx))
}
