//! Independent reference computations for tests and hidden diagnostics.
//!
//! Nothing here reuses the quadrature tables of [`crate::mesh_space`] or [`crate::operator`].

use crate::error::{Error, Result};
use crate::mesh_space::GridFunction;
use crate::nfunction::{KernelFamily, LocalKernel};
use crate::scalar::Real;

/// Three-point Gauss rule on `[0, 1]`.
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Resolution of the reference computations.
#[derive(Clone, Copy, Debug)]
pub struct DenseReference {
    /// Multiplier of the mesh resolution.
    pub multiplier: usize,
}

impl Default for DenseReference {
    fn default() -> Self {
        Self { multiplier: 4 }
    }
}

fn interp(u: &GridFunction<f64>, x: f64) -> f64 {
    let m = u.mesh.nodes;
    let l = u.mesh.length;
    if x <= 0.0 || x >= l {
        return 0.0;
    }
    let h = l / (m + 1) as f64;
    let f = x / h;
    let i = (f.floor() as usize).min(m);
    let t = f - i as f64;
    let v = |k: usize| if k == 0 || k > m { 0.0 } else { u.values[k - 1] };
    (1.0 - t) * v(i) + t * v(i + 1)
}

fn to_f64<S: Real>(u: &GridFunction<S>) -> GridFunction<f64> {
    let mesh = crate::mesh_space::Mesh1D {
        length: u.mesh.length.as_f64(),
        nodes: u.mesh.nodes,
        exterior_radius: u.mesh.exterior_radius.as_f64(),
        near_diag_levels: u.mesh.near_diag_levels,
    };
    GridFunction { mesh, values: u.values.iter().map(|v| v.as_f64()).collect() }
}

fn local(family: &KernelFamily<f64>, x: f64, y: f64) -> LocalKernel<f64> {
    family.local(x, y)
}

/// `∫_a^∞ G(c r^{-s}) dr/r` by substitution `r = a e^τ`, or in closed form for power phases.
fn exterior_integral(k: &LocalKernel<f64>, c: f64, a: f64, s: f64) -> f64 {
    if let Some(v) = k.tail(c, a, s) {
        return v;
    }
    let n = 4000;
    let tau_max = 60.0 / s;
    let dt = tau_max / n as f64;
    (0..n)
        .map(|i| {
            let tau = (i as f64 + 0.5) * dt;
            k.big_g(c * (a * tau.exp()).powf(-s)) * dt
        })
        .sum()
}

/// Gagliardo modular over Q by an `(r, y)` double loop.
pub fn brute_modular<S: Real>(u: &GridFunction<S>, family: &KernelFamily<S>, reference: DenseReference) -> f64 {
    let u = to_f64(u);
    let family = family_f64(family);
    let m = u.mesh.nodes;
    let l = u.mesh.length;
    let h = l / (m + 1) as f64;
    let s = family.s;
    if u.values.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    // Ω×Ω: 2 ∫_0^L dr/r ∫_0^{L-r} G(D) dy with r = L ρ^3
    let n_rho = 16 * reference.multiplier * (m + 1);
    let nodes: Vec<f64> = (0..=m + 1).map(|i| i as f64 * h).collect();
    let mut inner_total = 0.0;
    for i in 0..n_rho {
        let rho = (i as f64 + 0.5) / n_rho as f64;
        let r = l * rho * rho * rho;
        let dr = 3.0 * l * rho * rho / n_rho as f64;
        let top = l - r;
        let mut bps: Vec<f64> = nodes
            .iter()
            .flat_map(|&z| [z, z - r])
            .filter(|&z| z > 0.0 && z < top)
            .collect();
        bps.push(0.0);
        bps.push(top);
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = 0.0;
        for w in bps.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            for &(t, wt) in &GAUSS3 {
                let y = a + (b - a) * t;
                let x = y + r;
                let d = (interp(&u, x) - interp(&u, y)) * r.powf(-s);
                acc += wt * (b - a) * local(&family, x, y).big_g(d);
            }
        }
        inner_total += 2.0 * acc * dr / r;
    }
    // Ω×CΩ and CΩ×Ω
    let n_x = 16 * reference.multiplier * (m + 1);
    let mut ext = 0.0;
    for i in 0..n_x {
        let x = (i as f64 + 0.5) * l / n_x as f64;
        let c = interp(&u, x);
        if c == 0.0 {
            continue;
        }
        let left = exterior_integral(&local(&family, x, 0.0), c, x, s);
        let right = exterior_integral(&local(&family, x, l), c, l - x, s);
        ext += 2.0 * (left + right) * l / n_x as f64;
    }
    inner_total + ext
}

fn family_f64<S: Real>(family: &KernelFamily<S>) -> KernelFamily<f64> {
    use crate::field::Field;
    use crate::nfunction::{KernelVariant, OrliczShape};
    let conv = |f: &Field<S>| -> Field<f64> {
        match f {
            Field::Const(v) => Field::Const(v.as_f64()),
            Field::Expr(e) => Field::Expr(e.clone()),
            Field::Table { n, values } => Field::Table { n: *n, values: values.iter().map(|v| v.as_f64()).collect() },
        }
    };
    let variant = match &family.variant {
        KernelVariant::PowerVariableExponent { p } => KernelVariant::PowerVariableExponent { p: conv(p) },
        KernelVariant::DoublePhase { p, q, a } => KernelVariant::DoublePhase { p: p.as_f64(), q: q.as_f64(), a: conv(a) },
        KernelVariant::OrliczScalar(OrliczShape::PowerLog { p }) => {
            KernelVariant::OrliczScalar(OrliczShape::PowerLog { p: p.as_f64() })
        }
    };
    KernelFamily::new(variant, family.s.as_f64(), family.length.as_f64()).expect("valid family")
}

/// Nodal values of `2 P.V.∫ g(D^s u(x, y)) |x−y|^{−1−s} dy` by direct summation.
///
/// Within one mesh spacing of the node the function is replaced by the quadratic through the
/// node and its neighbours, and the `±r` contributions are summed before integrating.
pub fn brute_apply<S: Real>(u: &GridFunction<S>, family: &KernelFamily<S>, reference: DenseReference) -> Vec<f64> {
    let u = to_f64(u);
    let family = family_f64(family);
    let m = u.mesh.nodes;
    let l = u.mesh.length;
    let h = l / (m + 1) as f64;
    let s = family.s;
    let v = |k: usize| if k == 0 || k > m { 0.0 } else { u.values[k - 1] };
    let mut out = vec![0.0; m];
    for (i, o) in out.iter_mut().enumerate() {
        let node = i + 1;
        let x = node as f64 * h;
        let ux = v(node);
        let d1 = (v(node + 1) - v(node - 1)) / (2.0 * h);
        let d2 = (v(node + 1) - 2.0 * ux + v(node - 1)) / (h * h);
        // window: r = h σ^3 substitution, midpoint
        let n_w = 400 * reference.multiplier;
        let mut acc = 0.0;
        for k in 0..n_w {
            let sig = (k as f64 + 0.5) / n_w as f64;
            let r = h * sig * sig * sig;
            let dr = 3.0 * h * sig * sig / n_w as f64;
            let up = ux + d1 * r + 0.5 * d2 * r * r;
            let um = ux - d1 * r + 0.5 * d2 * r * r;
            let gp = local(&family, x, x + r).g((ux - up) * r.powf(-s));
            let gm = local(&family, x, x - r).g((ux - um) * r.powf(-s));
            acc += (gp + gm) * r.powf(-1.0 - s) * dr;
        }
        // outside the window inside Ω: midpoint on subdivided cells
        let sub = 8 * reference.multiplier;
        for cell in 0..=m {
            let (a, b) = (cell as f64 * h, (cell + 1) as f64 * h);
            if cell + 1 == node || cell == node {
                continue;
            }
            let dy = (b - a) / sub as f64;
            for j in 0..sub {
                for &(t, wt) in &GAUSS3 {
                    let y = a + (j as f64 + t) * dy;
                    let r = (x - y).abs();
                    let d = (ux - interp(&u, y)) * r.powf(-s);
                    acc += wt * dy * local(&family, x, y).g(d) * r.powf(-1.0 - s);
                }
            }
        }
        // exterior, u = 0 there
        for (bnd, a) in [(0.0, x), (l, l - x)] {
            let k = local(&family, x, bnd);
            acc += match k.phases() {
                Some((ph, n)) => ph[..n]
                    .iter()
                    .map(|&(coef, e)| coef * ux.signum() * ux.abs().powf(e - 1.0) * a.powf(-s * e) / (s * e))
                    .sum::<f64>(),
                None => {
                    let n_t = 4000;
                    let tmax = 60.0 / s;
                    let dt = tmax / n_t as f64;
                    (0..n_t)
                        .map(|j| {
                            let r = a * ((j as f64 + 0.5) * dt).exp();
                            k.g(ux * r.powf(-s)) * r.powf(-s) * dt
                        })
                        .sum::<f64>()
                }
            };
        }
        *o = 2.0 * acc;
    }
    out
}

/// Exact semi-discrete linear decay from the eigendecomposition of `M^{-1/2} K M^{-1/2}`.
#[derive(Clone, Debug)]
pub struct LinearDecayOracle {
    pub eigenvalues: Vec<f64>,
    /// Generalized eigenvectors, mass-orthonormal, column-major by mode.
    pub modes: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
}

impl LinearDecayOracle {
    pub fn l2_norm_sq(&self, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.coeffs)
            .map(|(l, c)| (-2.0 * l * t).exp() * c * c)
            .sum()
    }

    pub fn solution(&self, t: f64) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut u = vec![0.0; self.modes[0].len()];
        for j in 0..n {
            let f = (-self.eigenvalues[j] * t).exp() * self.coeffs[j];
            for (ui, phi) in u.iter_mut().zip(&self.modes[j]) {
                *ui += f * phi;
            }
        }
        u
    }
}

/// Eigen-solution of `M u' = −K u` with stiffness `K` and mass `M` (both row-major).
pub fn linear_decay_oracle(u0: &[f64], stiffness: &[f64], mass: &[f64]) -> Result<LinearDecayOracle> {
    use nalgebra::{DMatrix, DVector};
    let n = u0.len();
    let k = DMatrix::from_row_slice(n, n, stiffness);
    let asym = (&k - k.transpose()).abs().max();
    if asym > 1e-8 * k.abs().max() {
        return Err(Error::numeric(format!("stiffness not symmetric: {asym:e}")));
    }
    let mm = DMatrix::from_row_slice(n, n, mass);
    let chol = mm.clone().cholesky().ok_or_else(|| Error::numeric("mass matrix not SPD"))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::numeric("singular Cholesky factor"))?;
    let a = &linv * &k * linv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let u = DVector::from_column_slice(u0);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut modes = Vec::with_capacity(n);
    let mut coeffs = Vec::with_capacity(n);
    for &j in &order {
        let w = eig.eigenvectors.column(j);
        let phi = linv.transpose() * w;
        coeffs.push((phi.transpose() * &mm * &u)[(0, 0)]);
        eigenvalues.push(eig.eigenvalues[j]);
        modes.push(phi.iter().copied().collect());
    }
    Ok(LinearDecayOracle { eigenvalues, modes, coeffs })
}
