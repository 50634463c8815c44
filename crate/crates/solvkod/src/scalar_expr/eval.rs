use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{Float, FloatConst};

use super::coeff::{ratio_to_f64, Int};
use super::expr::{Atom, ScalarExpr};
use super::ExprError;

impl<T: Int> ScalarExpr<T> {
    /// Floating evaluation with real values for every symbol.
    pub fn eval<F: Float + FloatConst>(&self, env: &BTreeMap<String, F>) -> Result<Complex<F>, ExprError> {
        let cenv: BTreeMap<String, Complex<F>> = env.iter().map(|(k, v)| (k.clone(), Complex::new(*v, F::zero()))).collect();
        self.eval_complex(&cenv)
    }

    /// Floating evaluation allowing complex symbol values.
    pub fn eval_complex<F: Float + FloatConst>(
        &self,
        env: &BTreeMap<String, Complex<F>>,
    ) -> Result<Complex<F>, ExprError> {
        let mut acc = Complex::new(F::zero(), F::zero());
        for (m, c) in self.terms() {
            let cv = Complex::new(F::from(ratio_to_f64(&c.re)).unwrap(), F::from(ratio_to_f64(&c.im)).unwrap());
            let mut t = cv;
            for (a, e) in m.iter() {
                let v = match a {
                    Atom::Pi => Complex::new(F::PI(), F::zero()),
                    Atom::Sym(s) => *env.get(s).ok_or_else(|| ExprError::UnboundSymbol(s.clone()))?,
                    Atom::Sqrt(p) => p.eval_complex(env)?.sqrt(),
                    Atom::Exp(l) => l.eval_complex(env)?.exp(),
                };
                t = t * v.powi(e as i32);
            }
            acc = acc + t;
        }
        Ok(acc)
    }
}
