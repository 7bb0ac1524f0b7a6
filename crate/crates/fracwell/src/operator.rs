//! Pointwise application of the fractional g-Laplacian and Galerkin residual/Jacobian assembly.

use crate::error::{Error, Result};
use crate::linalg;
use crate::mesh_space::{cell_value, exterior_side, node_value, Discretization, Mesh1D};
use crate::quad::{graded_panels, Rule};
use crate::scalar::Real;
use crate::source::{LocalSource, SourceFamily};

/// Argument floor for `g'` and `f'` in Jacobians.
pub const JACOBIAN_EPS: f64 = 1e-12;

const WINDOW_GRADE: f64 = 0.2;

/// Galerkin basis; every basis function is a piecewise-linear interpolant on the mesh.
#[derive(Clone, Debug)]
pub enum Basis<S> {
    NodalHat { nodes: usize },
    /// Interpolants of `sin(jπx/L)`, `j = 1..=modes`; `transform` is `nodes × modes`, row-major.
    SineSpectral { modes: usize, nodes: usize, transform: Vec<S> },
}

impl<S: Real> Basis<S> {
    pub fn nodal_hat(mesh: &Mesh1D<S>) -> Self {
        Basis::NodalHat { nodes: mesh.nodes }
    }

    pub fn sine_spectral(mesh: &Mesh1D<S>, modes: usize) -> Result<Self> {
        if modes == 0 || modes > mesh.nodes {
            return Err(Error::Config(format!("sine basis needs 1..={} modes, got {modes}", mesh.nodes)));
        }
        let m = mesh.nodes;
        let pi = S::lit(std::f64::consts::PI);
        let mut transform = vec![S::zero(); m * modes];
        for i in 0..m {
            let x = mesh.x(i + 1);
            for j in 0..modes {
                transform[i * modes + j] = (S::from_usize_lossy(j + 1) * pi * x / mesh.length).sin();
            }
        }
        Ok(Basis::SineSpectral { modes, nodes: m, transform })
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::NodalHat { nodes } => *nodes,
            Basis::SineSpectral { modes, .. } => *modes,
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            Basis::NodalHat { nodes } | Basis::SineSpectral { nodes, .. } => *nodes,
        }
    }

    /// Nodal values of `Σ c_j e_j`.
    pub fn to_nodal(&self, c: &[S]) -> Vec<S> {
        match self {
            Basis::NodalHat { .. } => c.to_vec(),
            Basis::SineSpectral { modes, nodes, transform } => (0..*nodes)
                .map(|i| (0..*modes).fold(S::zero(), |acc, j| acc + transform[i * modes + j] * c[j]))
                .collect(),
        }
    }

    /// `Tᵀ v` for a vector of hat-basis components.
    pub fn reduce_vector(&self, v: Vec<S>) -> Vec<S> {
        match self {
            Basis::NodalHat { .. } => v,
            Basis::SineSpectral { modes, nodes, transform } => (0..*modes)
                .map(|j| (0..*nodes).fold(S::zero(), |acc, i| acc + transform[i * modes + j] * v[i]))
                .collect(),
        }
    }

    /// `Tᵀ A T` for a hat-basis matrix.
    pub fn reduce_matrix(&self, a: Vec<S>) -> Vec<S> {
        match self {
            Basis::NodalHat { .. } => a,
            Basis::SineSpectral { modes, nodes, transform } => linalg::congruence(&a, transform, *nodes, *modes),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct SourcePoint<S> {
    cell: u32,
    t: S,
    w: S,
    local: LocalSource<S>,
}

/// Discretized problem: Gagliardo quadrature, source quadrature, basis and mass matrix.
#[derive(Clone, Debug)]
pub struct Problem<S> {
    pub disc: Discretization<S>,
    pub source: SourceFamily<S>,
    pub basis: Basis<S>,
    points: Vec<SourcePoint<S>>,
    hat_mass: Vec<S>,
    mass: Vec<S>,
}

/// Residual, Jacobian and mass matrix at one coefficient vector.
#[derive(Clone, Debug)]
pub struct AssembledSystem<S> {
    pub residual: Vec<S>,
    pub jacobian: Vec<S>,
    pub mass: Vec<S>,
}

impl<S: Real> Problem<S> {
    pub fn new(disc: Discretization<S>, source: SourceFamily<S>, basis: Basis<S>) -> Result<Self> {
        if (source.length - disc.mesh.length).abs() > S::lit(1e-12) * disc.mesh.length {
            return Err(Error::Config("source and mesh disagree on the domain length".into()));
        }
        if basis.nodes() != disc.mesh.nodes {
            return Err(Error::Config("basis and mesh disagree on the node count".into()));
        }
        let mesh = disc.mesh;
        let h = mesh.h();
        let rule = Rule::<S>::new(4);
        let mut points = Vec::with_capacity(4 * mesh.cells());
        for c in 0..mesh.cells() {
            let x0 = mesh.x(c);
            for (x, w) in rule.on(x0, x0 + h) {
                points.push(SourcePoint { cell: c as u32, t: (x - x0) / h, w, local: source.local(x) });
            }
        }
        let hat_mass = mesh.mass_matrix();
        let mass = basis.reduce_matrix(hat_mass.clone());
        Ok(Self { disc, source, basis, points, hat_mass, mass })
    }

    /// Hat basis on the discretization mesh.
    pub fn nodal(disc: Discretization<S>, source: SourceFamily<S>) -> Result<Self> {
        let basis = Basis::nodal_hat(&disc.mesh);
        Self::new(disc, source, basis)
    }

    pub fn mesh(&self) -> &Mesh1D<S> {
        &self.disc.mesh
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Mass matrix `(e_i, e_j)_{L²}` in the active basis.
    pub fn mass(&self) -> &[S] {
        &self.mass
    }

    pub fn hat_mass(&self) -> &[S] {
        &self.hat_mass
    }

    /// `‖Σ c_j e_j‖²_{L²}`.
    pub fn l2_norm_sq_coeffs(&self, c: &[S]) -> S {
        linalg::quad_form(&self.mass, c)
    }

    /// `∫ F(x, u)`.
    pub fn source_primitive(&self, u: &[S]) -> S {
        self.points
            .iter()
            .map(|p| p.w * p.local.big_f(cell_value(u, p.cell as usize, p.t)))
            .fold(S::zero(), |a, b| a + b)
    }

    /// `∫ f(x, u) u`.
    pub fn source_pairing(&self, u: &[S]) -> S {
        self.points
            .iter()
            .map(|p| {
                let v = cell_value(u, p.cell as usize, p.t);
                p.w * p.local.f(v) * v
            })
            .fold(S::zero(), |a, b| a + b)
    }

    /// Values of `u` at the source quadrature points.
    pub fn source_values(&self, u: &[S]) -> Vec<S> {
        self.points.iter().map(|p| cell_value(u, p.cell as usize, p.t)).collect()
    }

    /// `∫ F(x, λu)` from [`Self::source_values`].
    pub fn source_primitive_of(&self, vals: &[S], lambda: S) -> S {
        self.points
            .iter()
            .zip(vals)
            .map(|(p, &v)| p.w * p.local.big_f(lambda * v))
            .fold(S::zero(), |a, b| a + b)
    }

    /// `∫ f(x, λu) λu` from [`Self::source_values`].
    pub fn source_pairing_of(&self, vals: &[S], lambda: S) -> S {
        self.points
            .iter()
            .zip(vals)
            .map(|(p, &v)| {
                let t = lambda * v;
                p.w * p.local.f(t) * t
            })
            .fold(S::zero(), |a, b| a + b)
    }

    /// Decomposition `∫ F(x, λu) = Σ_k B_k λ^{q_k}` when at most four distinct exponents occur.
    pub fn source_phase_sums(&self, vals: &[S]) -> Option<Vec<(S, S)>> {
        let mut buckets: Vec<(S, S)> = Vec::new();
        for (p, &v) in self.points.iter().zip(vals) {
            let (ph, n) = p.local.phases();
            for &(coef, e) in &ph[..n] {
                let term = p.w * coef * crate::scalar::pow_abs(v, e) / e;
                if let Some(b) = buckets.iter_mut().find(|b| b.1 == e) {
                    b.0 = b.0 + term;
                } else if buckets.len() < 4 {
                    buckets.push((term, e));
                } else {
                    return None;
                }
            }
        }
        Some(buckets)
    }

    /// `∫ f(x, u) e_j` in the hat basis.
    pub fn source_gradient(&self, u: &[S]) -> Vec<S> {
        let m = u.len();
        let mut out = vec![S::zero(); m];
        for p in &self.points {
            let cell = p.cell as usize;
            let fv = p.w * p.local.f(cell_value(u, cell, p.t));
            if fv == S::zero() {
                continue;
            }
            if cell >= 1 {
                out[cell - 1] = out[cell - 1] + fv * (S::one() - p.t);
            }
            if cell < m {
                out[cell] = out[cell] + fv * p.t;
            }
        }
        out
    }

    /// `∫ f'(x, u) e_i e_j` in the hat basis, row-major.
    pub fn source_hessian(&self, u: &[S]) -> Vec<S> {
        let m = u.len();
        let eps = S::lit(JACOBIAN_EPS);
        let mut out = vec![S::zero(); m * m];
        for p in &self.points {
            let cell = p.cell as usize;
            let v = cell_value(u, cell, p.t);
            let fp = p.w * p.local.f_prime(if v.abs() < eps { eps } else { v });
            if fp == S::zero() || !fp.is_finite() {
                continue;
            }
            let idx = [cell, cell + 1];
            let val = [S::one() - p.t, p.t];
            for a in 0..2 {
                for b in 0..2 {
                    let (ia, ib) = (idx[a], idx[b]);
                    if ia == 0 || ia > m || ib == 0 || ib > m {
                        continue;
                    }
                    let k = (ia - 1) * m + ib - 1;
                    out[k] = out[k] + fp * val[a] * val[b];
                }
            }
        }
        out
    }

    fn check_coeffs(&self, c: &[S]) -> Result<()> {
        if c.len() != self.dim() {
            return Err(Error::Domain(format!("expected {} coefficients, got {}", self.dim(), c.len())));
        }
        if let Some(j) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite coefficient {j}")));
        }
        Ok(())
    }

    /// `F_j = −(u, e_j) + (f(x, u), e_j)` in the hat basis, `u` nodal.
    pub fn residual_nodal(&self, u: &[S]) -> Result<Vec<S>> {
        let pg = self.disc.pairing_gradient(u);
        let sg = self.source_gradient(u);
        let r: Vec<S> = pg.iter().zip(&sg).map(|(&a, &b)| b - a).collect();
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite residual at node {}", j + 1)));
        }
        Ok(r)
    }

    pub fn assemble_residual(&self, c: &[S]) -> Result<Vec<S>> {
        self.check_coeffs(c)?;
        let u = self.basis.to_nodal(c);
        Ok(self.basis.reduce_vector(self.residual_nodal(&u)?))
    }

    pub fn assemble_jacobian(&self, c: &[S]) -> Result<Vec<S>> {
        self.check_coeffs(c)?;
        let u = self.basis.to_nodal(c);
        let hj = self.disc.modular_hessian(&u, S::lit(JACOBIAN_EPS));
        let hs = self.source_hessian(&u);
        let jac: Vec<S> = hj.iter().zip(&hs).map(|(&a, &b)| b - a).collect();
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularDerivative { t: 0.0, exponent: self.disc.family.g_minus().as_f64() });
        }
        Ok(self.basis.reduce_matrix(jac))
    }

    pub fn assemble(&self, c: &[S]) -> Result<AssembledSystem<S>> {
        Ok(AssembledSystem {
            residual: self.assemble_residual(c)?,
            jacobian: self.assemble_jacobian(c)?,
            mass: self.mass.clone(),
        })
    }

    /// Hessian of the Gagliardo modular at `c` in the active basis; the stiffness matrix when `p ≡ 2`.
    pub fn stiffness(&self, c: &[S]) -> Result<Vec<S>> {
        self.check_coeffs(c)?;
        let u = self.basis.to_nodal(c);
        Ok(self.basis.reduce_matrix(self.disc.modular_hessian(&u, S::lit(JACOBIAN_EPS))))
    }
}

/// Nodal values of `2 P.V.∫ g(x, y, D^s u) |x−y|^{−1−s} dy`, normalized so that
/// `∫ (Au) φ = (u, φ)` for the Gagliardo pairing.
///
/// Inside one mesh spacing of the node `u` is replaced by its quadratic through the node and
/// both neighbours; the `±r` contributions are combined before integration.
pub fn apply_operator<S: Real>(disc: &Discretization<S>, u: &[S]) -> Result<Vec<S>> {
    let mesh = disc.mesh;
    let family = &disc.family;
    let m = mesh.nodes;
    if u.len() != m {
        return Err(Error::Domain(format!("expected {m} nodal values, got {}", u.len())));
    }
    let h = mesh.h();
    let l = mesh.length;
    let s = family.s;
    let two = S::lit(2.0);
    let half = S::lit(0.5);
    let rule = Rule::<S>::new(4);
    let panels = graded_panels(mesh.near_diag_levels, S::lit(WINDOW_GRADE));
    let mut out = vec![S::zero(); m];
    for (k, o) in out.iter_mut().enumerate() {
        let node = k + 1;
        let x = mesh.x(node);
        let ux = node_value(u, node);
        let (ul, ur) = (node_value(u, node - 1), node_value(u, node + 1));
        let d1 = (ur - ul) / (two * h);
        let d2 = (ur - two * ux + ul) / (h * h);
        let mut acc = S::zero();
        for &(lo, hi) in &panels {
            for (r, w) in rule.on(lo * h, hi * h) {
                let rs = r.powf(-s);
                let lin = d1 * r;
                let quad = half * d2 * r * r;
                let gp = family.local(x, x + r).g(-(lin + quad) * rs);
                let gm = family.local(x, x - r).g((lin - quad) * rs);
                acc = acc + w * (gp + gm) * rs / r;
            }
        }
        for cell in 0..mesh.cells() {
            if cell + 1 == node || cell == node {
                continue;
            }
            let y0 = mesh.x(cell);
            for (y, w) in rule.on(y0, y0 + h) {
                let r = (x - y).abs();
                let rs = r.powf(-s);
                let d = (ux - cell_value(u, cell, (y - y0) / h)) * rs;
                acc = acc + w * family.local(x, y).g(d) * rs / r;
            }
        }
        if ux != S::zero() {
            let radius = mesh.exterior_radius;
            acc = acc + exterior_side(family, x, S::zero(), x, radius, s, &rule).d1(ux);
            acc = acc + exterior_side(family, x, l, l - x, radius, s, &rule).d1(ux);
        }
        let v = two * acc;
        if !v.is_finite() {
            return Err(Error::numeric(format!("non-finite operator value at node {node}")));
        }
        *o = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_space::{l2_inner, Discretization, Mesh1D};
    use crate::nfunction::KernelFamily;

    fn problem(p: f64, s: f64, m: usize, src: SourceFamily<f64>) -> Problem<f64> {
        let mesh = Mesh1D::new(1.0, m).unwrap();
        let k = KernelFamily::power(p, s, 1.0).unwrap();
        Problem::nodal(Discretization::new(mesh, &k).unwrap(), src).unwrap()
    }

    fn smooth(m: usize) -> Vec<f64> {
        (1..=m).map(|i| {
            let x = i as f64 / (m + 1) as f64;
            (3.0 * x).sin() * x * (1.0 - x) + 0.2 * x * (1.0 - x)
        }).collect()
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let pr = problem(2.5, 0.4, 16, SourceFamily::single_power(3.0, 1.0, 1.0).unwrap());
        assert!(apply_operator(&pr.disc, &[0.0; 16]).unwrap().iter().all(|v| *v == 0.0));
        assert!(pr.assemble_residual(&[0.0; 16]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn operator_is_odd() {
        let pr = problem(2.5, 0.4, 16, SourceFamily::zero(1.0));
        let u = smooth(16);
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let a = apply_operator(&pr.disc, &u).unwrap();
        let b = apply_operator(&pr.disc, &neg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn linear_residual_is_symmetric_stiffness() {
        let pr = problem(2.0, 0.4, 16, SourceFamily::zero(1.0));
        let k = pr.stiffness(&[0.0; 16]).unwrap();
        assert!(linalg::max_asymmetry(&k, 16) <= 1e-10 * k.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        let c = smooth(16);
        let r = pr.assemble_residual(&c).unwrap();
        let kc = linalg::matvec(&k, &c);
        for (a, b) in r.iter().zip(&kc) {
            assert!((a + b).abs() <= 1e-10 * kc.iter().fold(0.0f64, |x, y| x.max(y.abs())), "{a} {b}");
        }
        let j = pr.assemble_jacobian(&[0.0; 16]).unwrap();
        for (a, b) in j.iter().zip(&k) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let pr = problem(2.5, 0.4, 12, SourceFamily::single_power(3.0, 1.0, 1.0).unwrap());
        let c = smooth(12);
        let jac = pr.assemble_jacobian(&c).unwrap();
        let w: Vec<f64> = (0..12).map(|i| ((i * 7 % 5) as f64 - 2.0) / 3.0).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let eps = 1e-6 * norm;
        let plus: Vec<f64> = c.iter().zip(&w).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = c.iter().zip(&w).map(|(a, b)| a - eps * b).collect();
        let rp = pr.assemble_residual(&plus).unwrap();
        let rm = pr.assemble_residual(&minus).unwrap();
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let jw = linalg::matvec(&jac, &w);
        let scale = jw.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for (a, b) in fd.iter().zip(&jw) {
            assert!((a - b).abs() <= 1e-5 * scale, "{a} vs {b}");
        }
        assert!(linalg::max_asymmetry(&jac, 12) <= 1e-8 * scale);
    }

    #[test]
    fn sine_basis_reduces_consistently() {
        let mesh = Mesh1D::new(1.0, 16).unwrap();
        let k = KernelFamily::power(2.0, 0.4, 1.0).unwrap();
        let disc = Discretization::new(mesh, &k).unwrap();
        let src = SourceFamily::single_power(3.0, 1.0, 1.0).unwrap();
        let basis = Basis::sine_spectral(&mesh, 5).unwrap();
        let pr = Problem::new(disc, src, basis).unwrap();
        let c = [0.3, -0.1, 0.05, 0.0, 0.02];
        let u = pr.basis.to_nodal(&c);
        let r_hat = pr.residual_nodal(&u).unwrap();
        let r = pr.assemble_residual(&c).unwrap();
        // component j equals the hat residual paired with the nodal values of e_j
        for j in 0..5 {
            let mut e = [0.0; 5];
            e[j] = 1.0;
            let ej = pr.basis.to_nodal(&e);
            let expect: f64 = r_hat.iter().zip(&ej).map(|(a, b)| a * b).sum();
            assert!((r[j] - expect).abs() < 1e-12);
        }
        let m = pr.mass();
        let nrm = linalg::quad_form(m, &c);
        assert!((nrm - l2_inner(&mesh, &u, &u)).abs() < 1e-12);
    }

    #[test]
    fn operator_pairing_consistent_with_weak_form() {
        let mut errs = Vec::new();
        for m in [16, 32, 64] {
            let pr = problem(2.0, 0.4, m, SourceFamily::zero(1.0));
            let u = smooth(m);
            let au = apply_operator(&pr.disc, &u).unwrap();
            let mid = m / 2;
            let mut e = vec![0.0; m];
            e[mid] = 1.0;
            // ∫ (Au) e_j with the hat-mass row
            let lhs = linalg::dot(&linalg::matvec(pr.hat_mass(), &au), &e);
            let rhs = pr.disc.weak_pairing(&u, &e).unwrap();
            errs.push((lhs - rhs).abs() / rhs.abs());
        }
        assert!(errs[2] < errs[0], "{errs:?}");
        assert!(errs[2] < 1e-2, "{errs:?}");
    }
}
