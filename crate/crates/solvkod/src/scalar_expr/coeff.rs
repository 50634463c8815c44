use std::fmt::{self, Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Integer type backing the exact coefficients.
pub trait Int:
    Integer
    + Signed
    + Clone
    + Hash
    + Debug
    + Display
    + FromStr
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
}

impl<T> Int for T where
    T: Integer
        + Signed
        + Clone
        + Hash
        + Debug
        + Display
        + FromStr
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// Element of ℚ(i) stored as a pair of exact rationals.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Coeff<T: Int> {
    pub re: Ratio<T>,
    pub im: Ratio<T>,
}

pub(crate) fn ratio_int<T: Int>(v: i64) -> Ratio<T> {
    Ratio::from_integer(T::from_i64(v).expect("i64 fits coefficient type"))
}

pub(crate) fn ratio_to_f64<T: Int>(r: &Ratio<T>) -> f64 {
    let n = r.numer().to_f64().unwrap_or(f64::NAN);
    let d = r.denom().to_f64().unwrap_or(f64::NAN);
    n / d
}

impl<T: Int> Coeff<T> {
    pub fn new(re: Ratio<T>, im: Ratio<T>) -> Self {
        Coeff { re, im }
    }

    pub fn real(re: Ratio<T>) -> Self {
        Coeff { re, im: Ratio::zero() }
    }

    pub fn zero() -> Self {
        Self::real(Ratio::zero())
    }

    pub fn one() -> Self {
        Self::real(Ratio::one())
    }

    pub fn i() -> Self {
        Coeff { re: Ratio::zero(), im: Ratio::one() }
    }

    pub fn from_i64(v: i64) -> Self {
        Self::real(ratio_int(v))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn is_imaginary(&self) -> bool {
        self.re.is_zero() && !self.im.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        Coeff { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Coeff { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Coeff {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    pub fn neg(&self) -> Self {
        Coeff { re: -self.re.clone(), im: -self.im.clone() }
    }

    pub fn conj(&self) -> Self {
        Coeff { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn scale(&self, r: &Ratio<T>) -> Self {
        Coeff { re: &self.re * r, im: &self.im * r }
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = &self.re * &self.re + &self.im * &self.im;
        Some(Coeff { re: &self.re / &n, im: -(&self.im / &n) })
    }

    pub fn pow(&self, e: i64) -> Option<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = Self::one();
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Some(acc)
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (ratio_to_f64(&self.re), ratio_to_f64(&self.im))
    }
}

impl<T: Int> Display for Coeff<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            if self.im.is_one() {
                write!(f, "i")
            } else if (-self.im.clone()).is_one() {
                write!(f, "-i")
            } else {
                write!(f, "{}*i", self.im)
            }
        } else if self.im.is_negative() {
            write!(f, "({} - {}*i)", self.re, self.im.abs())
        } else {
            write!(f, "({} + {}*i)", self.re, self.im)
        }
    }
}

/// Splits `n > 0` as `g² · s` with `s` squarefree.
pub(crate) fn squarefree_split<T: Int>(n: &T) -> (T, T) {
    let mut m = n.clone();
    let mut g = T::one();
    let mut s = T::one();
    let mut p = T::one() + T::one();
    while p.clone() * p.clone() <= m {
        let mut k = 0u32;
        while (m.clone() % p.clone()).is_zero() {
            m = m / p.clone();
            k += 1;
        }
        for _ in 0..k / 2 {
            g = g * p.clone();
        }
        if k % 2 == 1 {
            s = s * p.clone();
        }
        p = p + T::one();
    }
    (g, s * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn squarefree() {
        let (g, s) = squarefree_split(&BigInt::from(72));
        assert_eq!((g, s), (BigInt::from(6), BigInt::from(2)));
        let (g, s) = squarefree_split(&BigInt::from(1));
        assert_eq!((g, s), (BigInt::from(1), BigInt::from(1)));
    }

    #[test]
    fn inverse() {
        let c: Coeff<BigInt> = Coeff::new(ratio_int(1), ratio_int(2));
        assert!(c.mul(&c.inv().unwrap()).is_one());
    }
}
