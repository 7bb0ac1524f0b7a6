//! Direction families used for sampled infima and embedding constants.

use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic generator of nodal direction fields.
#[derive(Clone, Debug)]
pub struct DirectionSampler {
    /// Sine modes `sin(kπx/L)`, `k = 1..=modes`.
    pub modes: usize,
    /// Random smooth fields (sums of decaying sine modes).
    pub smooth: usize,
    /// Random hat functions.
    pub hats: usize,
    pub seed: u64,
}

impl DirectionSampler {
    pub fn with_total(total: usize, seed: u64) -> Self {
        let modes = (total / 4).clamp(1, 12);
        let rest = total.saturating_sub(modes);
        Self { modes, smooth: rest - rest / 2, hats: rest / 2, seed }
    }

    pub fn total(&self) -> usize {
        self.modes + self.smooth + self.hats
    }

    /// Nodal values at `x_i = i h`, `i = 1..=m`, each normalized to unit max-norm.
    pub fn directions<S: Real>(&self, length: S, m: usize) -> Vec<Vec<S>> {
        let l = length.as_f64();
        let h = l / (m + 1) as f64;
        let xs: Vec<f64> = (1..=m).map(|i| i as f64 * h).collect();
        let pi = std::f64::consts::PI;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.total());
        let max_mode = (m / 2).max(1);
        for k in 1..=self.modes {
            let k = k.min(max_mode) as f64;
            out.push(xs.iter().map(|x| (k * pi * x / l).sin()).collect());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.smooth {
            let coeffs: Vec<f64> = (1..=6)
                .map(|k| rng.gen_range(-1.0..1.0) / (k * k) as f64)
                .collect();
            let mut v: Vec<f64> = xs
                .iter()
                .map(|x| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * ((k + 1) as f64 * pi * x / l).sin())
                        .sum()
                })
                .collect();
            if v.iter().all(|a| a.abs() < 1e-12) {
                v = xs.iter().map(|x| (pi * x / l).sin()).collect();
            }
            out.push(v);
        }
        for _ in 0..self.hats {
            let c = rng.gen_range(0.15..0.85) * l;
            let w = rng.gen_range(0.1..0.45) * l;
            let mut v: Vec<f64> = xs.iter().map(|x| (1.0 - (x - c).abs() / w).max(0.0)).collect();
            if v.iter().all(|a| *a == 0.0) {
                v = xs.iter().map(|x| (pi * x / l).sin()).collect();
            }
            out.push(v);
        }
        out.into_iter()
            .map(|v| {
                let n = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                v.into_iter().map(|a| S::lit(a / n)).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let s = DirectionSampler::with_total(64, 3);
        assert_eq!(s.total(), 64);
        let a: Vec<Vec<f64>> = s.directions(1.0, 20);
        let b: Vec<Vec<f64>> = s.directions(1.0, 20);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.len() == 20 && v.iter().any(|x| *x != 0.0)));
    }
}
