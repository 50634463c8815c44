use std::fmt::{self, Display};

use num_traits::{One, Signed, Zero};

use super::coeff::{Coeff, Int};
use super::expr::{Atom, Monomial, ScalarExpr};

fn atom_str<T: Int>(a: &Atom<T>) -> String {
    match a {
        Atom::Pi => "pi".into(),
        Atom::Sym(s) => s.clone(),
        Atom::Sqrt(p) => format!("sqrt({p})"),
        Atom::Exp(l) => format!("exp({l})"),
    }
}

fn mono_factors<T: Int>(m: &Monomial<T>) -> Vec<String> {
    m.iter()
        .map(|(a, e)| if e == 1 { atom_str(a) } else { format!("{}^{}", atom_str(a), e) })
        .collect()
}

/// Sign and unsigned body of one term.
fn term_parts<T: Int>(m: &Monomial<T>, c: &Coeff<T>) -> (bool, String) {
    let mut fs = Vec::new();
    let neg;
    if c.is_real() {
        neg = c.re.is_negative();
        let a = c.re.abs();
        if !a.is_one() || m.is_one() {
            fs.push(a.to_string());
        }
    } else if c.re.is_zero() {
        neg = c.im.is_negative();
        let a = c.im.abs();
        if !a.is_one() {
            fs.push(a.to_string());
        }
        fs.push("i".into());
    } else {
        neg = false;
        fs.push(c.to_string());
    }
    fs.extend(mono_factors(m));
    (neg, fs.join("*"))
}

impl<T: Int> Display for ScalarExpr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms().enumerate() {
            let (neg, body) = term_parts(m, c);
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

impl<T: Int> ScalarExpr<T> {
    /// Rendering suitable as a factor inside a product.
    pub fn to_factor_string(&self) -> String {
        if self.num_terms() <= 1 {
            let s = self.to_string();
            if s.contains(" + ") || s.contains(" - ") {
                format!("({s})")
            } else {
                s
            }
        } else {
            format!("({self})")
        }
    }
}
