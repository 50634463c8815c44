//! Small dense matrices over [`Expr`].

use crate::scalar_expr::{Ctx, Expr, ExprError};

pub type Mat = Vec<Vec<Expr>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![Expr::zero(); c]; r]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Expr::one();
    }
    m
}

pub fn from_i64(rows: &[&[i64]]) -> Mat {
    rows.iter().map(|r| r.iter().map(|&v| Expr::int(v)).collect()).collect()
}

pub fn transpose(a: &Mat) -> Mat {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn mul(ctx: &Ctx, a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let p = b.first().map(|r| r.len()).unwrap_or(0);
    let mut out = zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            let mut acc = Expr::zero();
            for (k, brow) in b.iter().enumerate() {
                if a[i][k].is_zero() || brow[j].is_zero() {
                    continue;
                }
                acc = &acc + &(&a[i][k] * &brow[j]);
            }
            out[i][j] = ctx.reduce(&acc);
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect()
}

pub fn scale(a: &Mat, s: &Expr) -> Mat {
    a.iter().map(|r| r.iter().map(|x| x * s).collect()).collect()
}

pub fn neg(a: &Mat) -> Mat {
    a.iter().map(|r| r.iter().map(|x| -x).collect()).collect()
}

pub fn map(a: &Mat, f: impl Fn(&Expr) -> Expr) -> Mat {
    a.iter().map(|r| r.iter().map(&f).collect()).collect()
}

pub fn reduce(ctx: &Ctx, a: &Mat) -> Mat {
    map(a, |x| ctx.reduce(x))
}

pub fn is_zero(ctx: &Ctx, a: &Mat) -> bool {
    a.iter().all(|r| r.iter().all(|x| ctx.is_zero(x)))
}

pub fn equal(ctx: &Ctx, a: &Mat, b: &Mat) -> bool {
    a.len() == b.len() && is_zero(ctx, &sub(a, b))
}

/// Determinant by cofactor expansion along the first row.
pub fn det(ctx: &Ctx, a: &Mat) -> Expr {
    let n = a.len();
    match n {
        0 => Expr::one(),
        1 => a[0][0].clone(),
        2 => ctx.reduce(&(&(&a[0][0] * &a[1][1]) - &(&a[0][1] * &a[1][0]))),
        _ => {
            let mut acc = Expr::zero();
            for j in 0..n {
                if a[0][j].is_zero() {
                    continue;
                }
                let minor = minor_matrix(a, 0, j);
                let t = ctx.reduce(&(&a[0][j] * &det(ctx, &minor)));
                acc = if j % 2 == 0 { &acc + &t } else { &acc - &t };
            }
            ctx.reduce(&acc)
        }
    }
}

pub fn minor_matrix(a: &Mat, r: usize, c: usize) -> Mat {
    a.iter()
        .enumerate()
        .filter(|(i, _)| *i != r)
        .map(|(_, row)| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| x.clone()).collect())
        .collect()
}

/// Submatrix on the given row and column index lists.
pub fn submatrix(a: &Mat, rows: &[usize], cols: &[usize]) -> Mat {
    rows.iter().map(|&i| cols.iter().map(|&j| a[i][j].clone()).collect()).collect()
}

/// Inverse through the adjugate; fails when the determinant is not invertible in `ctx`.
pub fn inverse(ctx: &Ctx, a: &Mat) -> Result<Mat, ExprError> {
    let n = a.len();
    let d = det(ctx, a);
    let dinv = ctx.try_inv(&d)?;
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let c = det(ctx, &minor_matrix(a, j, i));
            let c = if (i + j) % 2 == 0 { c } else { -c };
            out[i][j] = ctx.reduce(&(&c * &dinv));
        }
    }
    Ok(out)
}

pub fn parse(ctx: &Ctx, rows: &[&[&str]]) -> Result<Mat, ExprError> {
    rows.iter().map(|r| r.iter().map(|s| ctx.parse(s)).collect()).collect()
}

pub fn render(a: &Mat) -> Vec<Vec<String>> {
    a.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let mut c = Ctx::new();
        c.param_inv("k").param("x");
        let a = parse(&c, &[&["exp(k*x)", "x"], &["0", "exp(-k*x)"]]).unwrap();
        let b = inverse(&c, &a).unwrap();
        assert!(equal(&c, &mul(&c, &a, &b), &identity(2)));
    }

    #[test]
    fn det_4x4() {
        let c = Ctx::new();
        let a = from_i64(&[&[0, -1, 0, 0], &[1, 0, 0, 0], &[0, 0, 0, -1], &[0, 0, 1, 0]]);
        assert!(det(&c, &a).is_one());
    }
}
