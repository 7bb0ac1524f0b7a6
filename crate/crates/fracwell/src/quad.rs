//! Gauss–Legendre rules and graded panel helpers.

use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - z);
        weights[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    if n == 1 {
        nodes[0] = 0.5;
        weights[0] = 1.0;
    }
    (nodes, weights)
}

/// A rule on `[0, 1]` converted to the working scalar.
#[derive(Clone, Debug)]
pub struct Rule<S> {
    pub nodes: Vec<S>,
    pub weights: Vec<S>,
}

impl<S: Real> Rule<S> {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self {
            nodes: x.into_iter().map(S::lit).collect(),
            weights: w.into_iter().map(S::lit).collect(),
        }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: S, b: S) -> impl Iterator<Item = (S, S)> + '_ {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (a + len * x, len * w))
    }
}

/// Panels `[ratio^{k+1}, ratio^k]` of `[0, 1]`, innermost `[0, ratio^levels]` last.
pub fn graded_panels<S: Real>(levels: usize, ratio: S) -> Vec<(S, S)> {
    let mut out = Vec::with_capacity(levels + 1);
    let mut hi = S::one();
    for _ in 0..levels {
        let lo = hi * ratio;
        out.push((lo, hi));
        hi = lo;
    }
    out.push((S::zero(), hi));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((s - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn panels_cover_unit_interval() {
        let p = graded_panels::<f64>(6, 0.2);
        assert_eq!(p.len(), 7);
        assert_eq!(p[0].1, 1.0);
        assert_eq!(p[6].0, 0.0);
        for w in p.windows(2) {
            assert_eq!(w[0].0, w[1].1);
        }
    }
}
