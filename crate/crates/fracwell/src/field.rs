//! Scalar fields on the closed domain, used for exponents and weights.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::scalar::Real;
use std::sync::Arc;

/// A field `v(x, y)` on `[0, L]^2`. One-point fields ignore `y`.
#[derive(Clone, Debug)]
pub enum Field<S> {
    Const(S),
    Expr(Arc<Expr>),
    /// Symmetric table on a uniform `n x n` grid of `[0, L]^2`, bilinear in between.
    Table { n: usize, values: Vec<S> },
}

impl<S: Real> Field<S> {
    pub fn constant(v: f64) -> Self {
        Field::Const(S::lit(v))
    }

    /// Parses an expression, folding it to a constant when it has no variables.
    pub fn parse(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        Ok(match e.constant() {
            Some(v) => Field::Const(S::lit(v)),
            None => Field::Expr(Arc::new(e)),
        })
    }

    pub fn table(n: usize, values: Vec<S>) -> Result<Self> {
        if n < 2 || values.len() != n * n {
            return Err(Error::Config(format!(
                "table needs n >= 2 and n*n values, got n = {n}, len = {}",
                values.len()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if (values[i * n + j] - values[j * n + i]).abs() > S::lit(1e-12) {
                    return Err(Error::Config("exponent table is not symmetric".into()));
                }
            }
        }
        Ok(Field::Table { n, values })
    }

    pub fn as_const(&self) -> Option<S> {
        match self {
            Field::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// Value at `(x, y)` with both arguments clamped to `[0, length]`.
    pub fn at(&self, x: S, y: S, length: S) -> S {
        let x = x.max(S::zero()).min(length);
        let y = y.max(S::zero()).min(length);
        match self {
            Field::Const(v) => *v,
            Field::Expr(e) => S::lit(e.eval(x.as_f64(), y.as_f64())),
            Field::Table { n, values } => {
                let m = S::from_usize_lossy(n - 1);
                let fx = x / length * m;
                let fy = y / length * m;
                let i = fx.floor().to_usize().unwrap_or(0).min(n - 2);
                let j = fy.floor().to_usize().unwrap_or(0).min(n - 2);
                let tx = fx - S::from_usize_lossy(i);
                let ty = fy - S::from_usize_lossy(j);
                let v = |a: usize, b: usize| values[a * n + b];
                let one = S::one();
                (one - tx) * (one - ty) * v(i, j)
                    + tx * (one - ty) * v(i + 1, j)
                    + (one - tx) * ty * v(i, j + 1)
                    + tx * ty * v(i + 1, j + 1)
            }
        }
    }

    /// Minimum and maximum over a `k x k` grid of `[0, L]^2`.
    pub fn range2(&self, length: S, k: usize) -> (S, S) {
        if let Field::Const(v) = self {
            return (*v, *v);
        }
        let mut lo = S::infinity();
        let mut hi = S::neg_infinity();
        for i in 0..k {
            for j in 0..k {
                let x = length * S::from_usize_lossy(i) / S::from_usize_lossy(k - 1);
                let y = length * S::from_usize_lossy(j) / S::from_usize_lossy(k - 1);
                let v = self.at(x, y, length);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Minimum and maximum of `x -> v(x, x)` over `k` points.
    pub fn range1(&self, length: S, k: usize) -> (S, S) {
        if let Field::Const(v) = self {
            return (*v, *v);
        }
        let mut lo = S::infinity();
        let mut hi = S::neg_infinity();
        for i in 0..k {
            let x = length * S::from_usize_lossy(i) / S::from_usize_lossy(k - 1);
            let v = self.at(x, x, length);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// True when the field depends on `(x, y)` only through `|x - y|`, checked on samples.
    pub fn depends_on_distance_only(&self, length: S) -> bool {
        if let Field::Const(_) = self {
            return true;
        }
        let k = 9;
        let step = length / S::from_usize_lossy(k - 1);
        for i in 0..k {
            for j in 0..k {
                let (x, y) = (step * S::from_usize_lossy(i), step * S::from_usize_lossy(j));
                let r = (x - y).abs();
                let reference = self.at(r, S::zero(), length);
                if (self.at(x, y, length) - reference).abs() > S::lit(1e-9) * (S::one() + reference.abs()) {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_bilinear_and_clamped() {
        let f = Field::<f64>::table(2, vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((f.at(0.5, 0.5, 1.0) - 2.0).abs() < 1e-15);
        assert!((f.at(-3.0, 7.0, 1.0) - 2.0).abs() < 1e-15);
        assert!(Field::<f64>::table(2, vec![1.0, 2.0, 5.0, 3.0]).is_err());
    }

    #[test]
    fn distance_detection() {
        let f = Field::<f64>::parse("2 + 0.1*abs(x-y)").unwrap();
        assert!(f.depends_on_distance_only(1.0));
        let g = Field::<f64>::parse("2 + 0.1*(x+y)").unwrap();
        assert!(!g.depends_on_distance_only(1.0));
    }
}
