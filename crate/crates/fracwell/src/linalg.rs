//! Dense row-major matrix helpers backed by nalgebra in double precision.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn to_dmatrix<S: Real>(a: &[S], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, &a.iter().map(|v| v.as_f64()).collect::<Vec<_>>())
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve<S: Real>(a: &[S], b: &[S]) -> Result<Vec<S>> {
    let n = b.len();
    let lu = to_dmatrix(a, n).lu();
    let rhs = DVector::from_iterator(n, b.iter().map(|v| v.as_f64()));
    let x = lu.solve(&rhs).ok_or_else(|| Error::numeric("singular linear system"))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite linear solve"));
    }
    Ok(x.iter().map(|&v| S::lit(v)).collect())
}

/// Reusable LU factorization.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl Lu {
    pub fn new<S: Real>(a: &[S], n: usize) -> Result<Self> {
        let lu = to_dmatrix(a, n).lu();
        if !lu.is_invertible() {
            return Err(Error::numeric("singular matrix"));
        }
        Ok(Self { lu, n })
    }

    pub fn solve<S: Real>(&self, b: &[S]) -> Result<Vec<S>> {
        let rhs = DVector::from_iterator(self.n, b.iter().map(|v| v.as_f64()));
        let x = self.lu.solve(&rhs).ok_or_else(|| Error::numeric("singular linear system"))?;
        Ok(x.iter().map(|&v| S::lit(v)).collect())
    }
}

/// `y = A x`.
pub fn matvec<S: Real>(a: &[S], x: &[S]) -> Vec<S> {
    let n = x.len();
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().zip(x).fold(S::zero(), |acc, (&aij, &xj)| acc + aij * xj))
        .collect()
}

pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `xᵀ A x`.
pub fn quad_form<S: Real>(a: &[S], x: &[S]) -> S {
    dot(x, &matvec(a, x))
}

/// `Tᵀ A T` with `A` of size `m × m` and `T` of size `m × n`, both row-major.
pub fn congruence<S: Real>(a: &[S], t: &[S], m: usize, n: usize) -> Vec<S> {
    let mut at = vec![S::zero(); m * n];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == S::zero() {
                continue;
            }
            for j in 0..n {
                at[i * n + j] = at[i * n + j] + aik * t[k * n + j];
            }
        }
    }
    let mut out = vec![S::zero(); n * n];
    for k in 0..m {
        for i in 0..n {
            let tki = t[k * n + i];
            for j in 0..n {
                out[i * n + j] = out[i * n + j] + tki * at[k * n + j];
            }
        }
    }
    out
}

/// Eigenpairs of the generalized problem `K v = λ M v` for symmetric `K` and SPD `M`,
/// sorted ascending; eigenvectors are `M`-orthonormal.
pub fn generalized_symmetric_eigen<S: Real>(k: &[S], mass: &[S], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let kk = to_dmatrix(k, n);
    let mm = to_dmatrix(mass, n);
    let chol = mm.cholesky().ok_or_else(|| Error::numeric("mass matrix not positive definite"))?;
    let linv = chol.l().try_inverse().ok_or_else(|| Error::numeric("singular Cholesky factor"))?;
    let a = &linv * kk * linv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vecs = order
        .iter()
        .map(|&j| (linv.transpose() * eig.eigenvectors.column(j)).iter().copied().collect())
        .collect();
    Ok((vals, vecs))
}

pub fn max_asymmetry<S: Real>(a: &[S], n: usize) -> S {
    let mut worst = S::zero();
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[i * n + j] - a[j * n + i]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = [4.0f64, 1.0, 1.0, 3.0];
        let x = solve(&a, &[1.0, 2.0]).unwrap();
        let r = matvec(&a, &x);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_errors() {
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn congruence_matches_explicit_product() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let t = [1.0, 0.0, 1.0, 1.0, 0.0, 2.0];
        let c = congruence(&a, &t, 3, 2);
        // Tᵀ A T by hand
        assert_eq!(c, vec![7.0, 6.0, 6.0, 23.0]);
    }

    #[test]
    fn generalized_eigen_diagonal() {
        let (vals, vecs) = generalized_symmetric_eigen(&[2.0, 0.0, 0.0, 8.0], &[1.0, 0.0, 0.0, 2.0], 2).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-12 && (vals[1] - 4.0).abs() < 1e-12);
        assert!((vecs[1][1].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
