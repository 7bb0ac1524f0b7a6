//! Meshes, grid functions, modulars, Luxemburg norms and the Gagliardo quadrature over Q.
//!
//! Ω = (0, L) is split into `M + 1` cells with `M` interior nodes. Functions are
//! piecewise linear and vanish at the boundary nodes and outside Ω.

use crate::error::{Error, Result};
use crate::nfunction::{KernelFamily, LocalKernel};
use crate::quad::{graded_panels, Rule};
use crate::roots::{bracketed_from, Stop};
use crate::sampler::DirectionSampler;
use crate::scalar::{pow_abs, signed_pow, Real};
use crate::source::SourceFamily;

/// Grading ratio of the geometric panels near singular points.
const GRADE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mesh1D<S> {
    pub length: S,
    /// Interior node count `M`.
    pub nodes: usize,
    pub exterior_radius: S,
    pub near_diag_levels: usize,
}

impl<S: Real> Mesh1D<S> {
    pub fn new(length: S, nodes: usize) -> Result<Self> {
        Self::with_options(length, nodes, length * S::lit(4.0), 6)
    }

    pub fn with_options(length: S, nodes: usize, exterior_radius: S, near_diag_levels: usize) -> Result<Self> {
        if nodes < 4 {
            return Err(Error::Config(format!("mesh needs at least 4 interior nodes, got {nodes}")));
        }
        if !(length > S::zero()) {
            return Err(Error::Config("domain length must be positive".into()));
        }
        if !(exterior_radius >= S::lit(2.0) * length) {
            return Err(Error::Config("exterior radius must be at least 2L".into()));
        }
        Ok(Self { length, nodes, exterior_radius, near_diag_levels })
    }

    pub fn h(&self) -> S {
        self.length / S::from_usize_lossy(self.nodes + 1)
    }

    /// Coordinate of node `i`, `0 ≤ i ≤ M + 1`.
    pub fn x(&self, i: usize) -> S {
        self.h() * S::from_usize_lossy(i)
    }

    pub fn cells(&self) -> usize {
        self.nodes + 1
    }

    /// Interior node coordinates.
    pub fn interior(&self) -> Vec<S> {
        (1..=self.nodes).map(|i| self.x(i)).collect()
    }

    /// Lumped-free mass matrix of the hat basis, row-major `M x M`.
    pub fn mass_matrix(&self) -> Vec<S> {
        let m = self.nodes;
        let h = self.h();
        let mut a = vec![S::zero(); m * m];
        for i in 0..m {
            a[i * m + i] = S::lit(2.0 / 3.0) * h;
            if i + 1 < m {
                a[i * m + i + 1] = h / S::lit(6.0);
                a[(i + 1) * m + i] = h / S::lit(6.0);
            }
        }
        a
    }
}

/// Value of node `i` of a nodal vector (zero at the boundary nodes).
#[inline]
pub fn node_value<S: Real>(u: &[S], i: usize) -> S {
    if i == 0 || i > u.len() {
        S::zero()
    } else {
        u[i - 1]
    }
}

/// Value of the interpolant in `cell` at local coordinate `t ∈ [0, 1]`.
#[inline]
pub fn cell_value<S: Real>(u: &[S], cell: usize, t: S) -> S {
    (S::one() - t) * node_value(u, cell) + t * node_value(u, cell + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<S> {
    pub mesh: Mesh1D<S>,
    pub values: Vec<S>,
}

impl<S: Real> GridFunction<S> {
    pub fn new(mesh: Mesh1D<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != mesh.nodes {
            return Err(Error::Domain(format!(
                "expected {} nodal values, got {}",
                mesh.nodes,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite nodal value".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Mesh1D<S>) -> Self {
        Self { mesh, values: vec![S::zero(); mesh.nodes] }
    }

    pub fn from_fn(mesh: Mesh1D<S>, f: impl Fn(S) -> S) -> Self {
        let values = mesh.interior().into_iter().map(f).collect();
        Self { mesh, values }
    }

    pub fn scaled(&self, c: S) -> Self {
        Self { mesh: self.mesh, values: self.values.iter().map(|v| *v * c).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == S::zero())
    }

    /// Value at `x` (zero outside Ω).
    pub fn at(&self, x: S) -> S {
        if x <= S::zero() || x >= self.mesh.length {
            return S::zero();
        }
        let f = x / self.mesh.h();
        let cell = f.floor().to_usize().unwrap_or(0).min(self.mesh.nodes);
        cell_value(&self.values, cell, f - S::from_usize_lossy(cell))
    }

    /// Exact L² norm of the interpolant.
    pub fn l2_norm(&self) -> S {
        l2_norm_sq(&self.mesh, &self.values).sqrt()
    }
}

/// `‖u‖²_{L²}` of the interpolant of nodal values `u`.
pub fn l2_norm_sq<S: Real>(mesh: &Mesh1D<S>, u: &[S]) -> S {
    let h = mesh.h();
    let mut acc = S::zero();
    for c in 0..mesh.cells() {
        let (a, b) = (node_value(u, c), node_value(u, c + 1));
        acc = acc + (a * a + a * b + b * b);
    }
    acc * h / S::lit(3.0)
}

/// `∫_Ω u v` of two interpolants.
pub fn l2_inner<S: Real>(mesh: &Mesh1D<S>, u: &[S], v: &[S]) -> S {
    let h = mesh.h();
    let mut acc = S::zero();
    for c in 0..mesh.cells() {
        let (a, b) = (node_value(u, c), node_value(u, c + 1));
        let (p, q) = (node_value(v, c), node_value(v, c + 1));
        acc = acc + S::lit(2.0) * (a * p + b * q) + a * q + b * p;
    }
    acc * h / S::lit(6.0)
}

/// Pointwise modulars on Ω.
#[derive(Clone, Copy, Debug)]
pub enum ModularKind<'a, S> {
    /// `Ĝ_x(t) = G_{x,x}(t)`.
    Ghat(&'a KernelFamily<S>),
    /// Complementary function of `Ĝ_x`.
    GhatConjugate(&'a KernelFamily<S>),
    /// `Φ(x, t) = t^{h₂(x)}`.
    Phi(&'a SourceFamily<S>),
    /// `t²`.
    L2,
}

impl<S: Real> ModularKind<'_, S> {
    fn eval(&self, x: S, t: S) -> S {
        match self {
            ModularKind::Ghat(k) => k.local(x, x).big_g(t),
            ModularKind::GhatConjugate(k) => k.local(x, x).complementary(t.abs()).unwrap_or(S::nan()),
            ModularKind::Phi(src) => pow_abs(t, src.h2(x)),
            ModularKind::L2 => t * t,
        }
    }

    /// Growth exponents bracketing the modular's homogeneity.
    pub fn growth(&self) -> (S, S) {
        match self {
            ModularKind::Ghat(k) => (k.g_minus(), k.g_plus()),
            ModularKind::GhatConjugate(k) => k.conjugate_exponents(),
            ModularKind::Phi(src) => (src.h2_minus(), src.h2_plus()),
            ModularKind::L2 => (S::lit(2.0), S::lit(2.0)),
        }
    }
}

/// `∫_Ω m(x, |u(x)|) dx` by 4-point Gauss on every cell.
pub fn modular<S: Real>(u: &GridFunction<S>, kind: ModularKind<'_, S>) -> S {
    modular_scaled(&u.mesh, &u.values, kind, S::one())
}

fn modular_scaled<S: Real>(mesh: &Mesh1D<S>, u: &[S], kind: ModularKind<'_, S>, inv_lambda: S) -> S {
    let rule = Rule::<S>::new(4);
    let h = mesh.h();
    let mut acc = S::zero();
    for c in 0..mesh.cells() {
        let x0 = mesh.x(c);
        for (t, w) in rule.on(S::zero(), S::one()) {
            let v = cell_value(u, c, t) * inv_lambda;
            if v != S::zero() {
                acc = acc + w * h * kind.eval(x0 + t * h, v);
            }
        }
    }
    acc
}

/// Luxemburg norm `inf{λ > 0 : m(u/λ) ≤ 1}`.
pub fn luxemburg_norm<S: Real>(u: &GridFunction<S>, kind: ModularKind<'_, S>) -> Result<S> {
    if u.is_zero() {
        return Ok(S::zero());
    }
    luxemburg(|inv| modular_scaled(&u.mesh, &u.values, kind, inv), kind.growth())
}

/// Luxemburg root solve given `j(1/λ) = m(u/λ)` and the growth exponents.
///
/// The bracket comes from `min{λ^{-g⁺}, λ^{-g⁻}} m(u) ≤ m(u/λ) ≤ max{...}`.
pub fn luxemburg<S: Real>(j: impl Fn(S) -> S, growth: (S, S)) -> Result<S> {
    let j1 = j(S::one());
    if !j1.is_finite() {
        return Err(Error::numeric(format!("non-finite modular {j1:?}")));
    }
    if j1 == S::zero() {
        return Ok(S::zero());
    }
    let (lo_e, hi_e) = growth;
    let c1 = j1.powf(S::one() / lo_e);
    let c2 = j1.powf(S::one() / hi_e);
    let mut a = c1.min(c2);
    let mut b = c1.max(c2);

    // secant on the nearly linear h(μ) = ln j(e^{−μ}), λ = e^μ, kept inside the growth bracket
    let h = |mu: S| j((-mu).exp()).ln();
    let (lo, hi) = (a.ln(), b.ln());
    let (mut x0, mut h0) = (S::zero(), j1.ln());
    let mut x1 = h0 * S::lit(2.0) / (lo_e + hi_e);
    let mut h1 = h(x1);
    for _ in 0..40 {
        if h1.abs() <= S::lit(1e-13) {
            return Ok(x1.exp());
        }
        if h1 == h0 || !h1.is_finite() {
            break;
        }
        let x2 = x1 - h1 * (x1 - x0) / (h1 - h0);
        if !(x2 >= lo && x2 <= hi) {
            break;
        }
        if (x2 - x1).abs() <= S::lit(1e-15) * (S::one() + x1.abs()) {
            return Ok(x2.exp());
        }
        (x0, h0, x1) = (x1, h1, x2);
        h1 = h(x1);
    }

    let excess = |lam: S| j(S::one() / lam) - S::one();
    let mut ea = excess(a);
    if ea.abs() <= S::lit(1e-10) {
        return Ok(a);
    }
    let mut eb = if b == a { ea } else { excess(b) };
    if eb.abs() <= S::lit(1e-10) {
        return Ok(b);
    }
    let mut guard = 0;
    while ea < S::zero() {
        a = a * S::lit(0.5);
        ea = excess(a);
        guard += 1;
        if guard > 200 {
            return Err(Error::numeric("luxemburg bracket (lower) not found"));
        }
    }
    while eb > S::zero() {
        b = b * S::lit(2.0);
        eb = excess(b);
        guard += 1;
        if guard > 400 {
            return Err(Error::numeric("luxemburg bracket (upper) not found"));
        }
    }
    let stop = Stop { f_tol: S::lit(1e-10), x_rel: S::lit(1e-12), max_iter: 400 };
    let mu = bracketed_from(|mu: S| j((-mu).exp()).ln(), (a.ln(), (ea + S::one()).ln()), (b.ln(), (eb + S::one()).ln()), stop)?;
    Ok(mu.exp())
}

/// One Ω×Ω quadrature point with `x > y`; the weight includes the symmetric factor 2 and `1/|x−y|`.
#[derive(Clone, Copy, Debug)]
pub struct PairPoint<S> {
    pub cx: u32,
    pub cy: u32,
    pub tx: S,
    pub ty: S,
    pub w: S,
    /// `|x − y|^{−s}`.
    pub rs: S,
    pub kernel: LocalKernel<S>,
}

/// Exterior integral `∫_{CΩ} G(x, y, c/|x−y|^s) dy/|x−y|` on one side of Ω, as a function of `c = u(x)`.
#[derive(Clone, Debug)]
pub struct ExteriorSide<S> {
    pub kernel: LocalKernel<S>,
    /// Distance from `x` to the boundary on this side.
    pub dist: S,
    /// Power-phase moments `Σ w_r r^{−s e} + ρ^{−s e}/(s e)` including the analytic tail.
    moments: Option<[S; 2]>,
    /// Numeric nodes `(w_r / r, r^{−s})` when no analytic tail exists.
    nodes: Vec<(S, S)>,
    /// End of the numeric range.
    rho: S,
}

impl<S: Real> ExteriorSide<S> {
    #[inline]
    fn value(&self, c: S) -> S {
        if let (Some(m), Some((ph, n))) = (self.moments, self.kernel.phases()) {
            let mut v = S::zero();
            for i in 0..n {
                let (coef, e) = ph[i];
                v = v + coef * pow_abs(c, e) / e * m[i];
            }
            return v;
        }
        self.nodes.iter().map(|&(w, rs)| w * self.kernel.big_g(c * rs)).fold(S::zero(), |a, b| a + b)
    }

    #[inline]
    pub(crate) fn d1(&self, c: S) -> S {
        if let (Some(m), Some((ph, n))) = (self.moments, self.kernel.phases()) {
            let mut v = S::zero();
            for i in 0..n {
                let (coef, e) = ph[i];
                v = v + coef * signed_pow(c, e - S::one()) * m[i];
            }
            return v;
        }
        self.nodes
            .iter()
            .map(|&(w, rs)| w * self.kernel.g(c * rs) * rs)
            .fold(S::zero(), |a, b| a + b)
    }

    #[inline]
    fn d2(&self, c: S, eps: S) -> S {
        if let (Some(m), Some((ph, n))) = (self.moments, self.kernel.phases()) {
            let mut v = S::zero();
            let ca = c.abs().max(eps);
            for i in 0..n {
                let (coef, e) = ph[i];
                v = v + coef * (e - S::one()) * pow_abs(ca, e - S::lit(2.0)) * m[i];
            }
            return v;
        }
        self.nodes
            .iter()
            .map(|&(w, rs)| w * self.kernel.g_prime_floor(c * rs, eps) * rs * rs)
            .fold(S::zero(), |a, b| a + b)
    }

    /// Upper bound of the truncated remainder beyond the numeric range.
    fn truncation_bound(&self, c: S, s: S, g_minus: S) -> S {
        if self.moments.is_some() {
            return S::zero();
        }
        self.kernel.big_g(c * self.rho.powf(-s)) / (s * g_minus)
    }
}

/// Exterior quadrature point `x ∈ Ω`; the weight includes the factor 2 for the two orderings.
#[derive(Clone, Debug)]
pub struct ExteriorPoint<S> {
    pub cell: u32,
    pub t: S,
    pub w: S,
    pub sides: [ExteriorSide<S>; 2],
}

/// Precomputed Gagliardo quadrature for one mesh and kernel family.
#[derive(Clone, Debug)]
pub struct Discretization<S> {
    pub mesh: Mesh1D<S>,
    pub family: KernelFamily<S>,
    pub pairs: Vec<PairPoint<S>>,
    pub exterior: Vec<ExteriorPoint<S>>,
}

/// Values of `D^s u` at pair points and of `u` at exterior points.
#[derive(Clone, Debug)]
pub struct Profile<S> {
    pub d: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Real> Discretization<S> {
    pub fn new(mesh: Mesh1D<S>, family: &KernelFamily<S>) -> Result<Self> {
        if (family.length - mesh.length).abs() > S::lit(1e-12) * mesh.length {
            return Err(Error::Config("kernel family and mesh disagree on the domain length".into()));
        }
        let family = family.clone();
        let pairs = build_pairs(&mesh, &family);
        let exterior = build_exterior(&mesh, &family);
        Ok(Self { mesh, family, pairs, exterior })
    }

    pub fn n(&self) -> usize {
        self.mesh.nodes
    }

    fn check_len(&self, u: &[S]) -> Result<()> {
        if u.len() != self.mesh.nodes {
            return Err(Error::Domain(format!("expected {} nodal values, got {}", self.mesh.nodes, u.len())));
        }
        Ok(())
    }

    pub fn profile(&self, u: &[S]) -> Profile<S> {
        let d = self
            .pairs
            .iter()
            .map(|p| {
                (cell_value(u, p.cx as usize, p.tx) - cell_value(u, p.cy as usize, p.ty)) * p.rs
            })
            .collect();
        let c = self.exterior.iter().map(|e| cell_value(u, e.cell as usize, e.t)).collect();
        Profile { d, c }
    }

    /// `J_{s,G}(λu)` from a profile of `u`.
    pub fn modular_of(&self, prof: &Profile<S>, lambda: S) -> S {
        let mut acc = S::zero();
        for (p, &d) in self.pairs.iter().zip(&prof.d) {
            if d != S::zero() {
                acc = acc + p.w * p.kernel.big_g(lambda * d);
            }
        }
        for (e, &c) in self.exterior.iter().zip(&prof.c) {
            if c != S::zero() {
                let cl = lambda * c;
                acc = acc + e.w * (e.sides[0].value(cl) + e.sides[1].value(cl));
            }
        }
        acc
    }

    /// `⟨λu, λu⟩ = ∬ g(λ D^s u) λ D^s u dμ` from a profile of `u`.
    pub fn pairing_of(&self, prof: &Profile<S>, lambda: S) -> S {
        let mut acc = S::zero();
        for (p, &d) in self.pairs.iter().zip(&prof.d) {
            if d != S::zero() {
                let t = lambda * d;
                acc = acc + p.w * p.kernel.g(t) * t;
            }
        }
        for (e, &c) in self.exterior.iter().zip(&prof.c) {
            if c != S::zero() {
                let cl = lambda * c;
                acc = acc + e.w * (e.sides[0].d1(cl) + e.sides[1].d1(cl)) * cl;
            }
        }
        acc
    }

    /// Decomposition `J(λu) = Σ_k A_k λ^{e_k}` when every kernel is a sum of at most four
    /// distinct constant powers; returns `(A_k, e_k)`.
    pub fn phase_moduli(&self, prof: &Profile<S>) -> Option<Vec<(S, S)>> {
        let mut buckets: Vec<(S, S)> = Vec::new();
        let mut add = |e: S, v: S| -> bool {
            if let Some(b) = buckets.iter_mut().find(|b| b.1 == e) {
                b.0 = b.0 + v;
                true
            } else if buckets.len() < 4 {
                buckets.push((v, e));
                true
            } else {
                false
            }
        };
        for (p, &d) in self.pairs.iter().zip(&prof.d) {
            let (ph, n) = p.kernel.phases()?;
            for &(coef, e) in &ph[..n] {
                if !add(e, p.w * coef * pow_abs(d, e) / e) {
                    return None;
                }
            }
        }
        for (x, &c) in self.exterior.iter().zip(&prof.c) {
            for side in &x.sides {
                let (ph, n) = side.kernel.phases()?;
                let m = side.moments?;
                for (i, &(coef, e)) in ph[..n].iter().enumerate() {
                    if !add(e, x.w * coef * pow_abs(c, e) / e * m[i]) {
                        return None;
                    }
                }
            }
        }
        Some(buckets)
    }

    pub fn gagliardo_modular(&self, u: &[S]) -> Result<S> {
        self.check_len(u)?;
        let v = self.modular_of(&self.profile(u), S::one());
        finite(v, "gagliardo modular")
    }

    pub fn gagliardo_seminorm(&self, u: &[S]) -> Result<S> {
        self.check_len(u)?;
        if u.iter().all(|v| *v == S::zero()) {
            return Ok(S::zero());
        }
        let prof = self.profile(u);
        let growth = (self.family.g_minus(), self.family.g_plus());
        if let Some(b) = self.phase_moduli(&prof) {
            return luxemburg(|inv| b.iter().fold(S::zero(), |acc, &(v, e)| acc + v * inv.powf(e)), growth);
        }
        luxemburg(|inv| self.modular_of(&prof, inv), growth)
    }

    /// `∬_Q g(D^s u) D^s φ dμ`.
    pub fn weak_pairing(&self, u: &[S], phi: &[S]) -> Result<S> {
        self.check_len(u)?;
        self.check_len(phi)?;
        let pu = self.profile(u);
        let pp = self.profile(phi);
        let mut acc = S::zero();
        for ((p, &du), &dp) in self.pairs.iter().zip(&pu.d).zip(&pp.d) {
            if du != S::zero() && dp != S::zero() {
                acc = acc + p.w * p.kernel.g(du) * dp;
            }
        }
        for ((e, &cu), &cp) in self.exterior.iter().zip(&pu.c).zip(&pp.c) {
            if cu != S::zero() && cp != S::zero() {
                acc = acc + e.w * (e.sides[0].d1(cu) + e.sides[1].d1(cu)) * cp;
            }
        }
        finite(acc, "weak pairing")
    }

    /// Components `⟨u, e_j⟩` for all hat functions `e_j`.
    pub fn pairing_gradient(&self, u: &[S]) -> Vec<S> {
        let m = self.mesh.nodes;
        let mut grad = vec![S::zero(); m];
        let mut add = |node: usize, v: S| {
            if node >= 1 && node <= m {
                grad[node - 1] = grad[node - 1] + v;
            }
        };
        let one = S::one();
        for p in &self.pairs {
            let (cx, cy) = (p.cx as usize, p.cy as usize);
            let d = (cell_value(u, cx, p.tx) - cell_value(u, cy, p.ty)) * p.rs;
            if d == S::zero() {
                continue;
            }
            let gd = p.w * p.kernel.g(d) * p.rs;
            add(cx, gd * (one - p.tx));
            add(cx + 1, gd * p.tx);
            add(cy, -gd * (one - p.ty));
            add(cy + 1, -gd * p.ty);
        }
        for e in &self.exterior {
            let cell = e.cell as usize;
            let c = cell_value(u, cell, e.t);
            if c == S::zero() {
                continue;
            }
            let gd = e.w * (e.sides[0].d1(c) + e.sides[1].d1(c));
            add(cell, gd * (one - e.t));
            add(cell + 1, gd * e.t);
        }
        grad
    }

    /// Hessian of `J_{s,G}` in the hat basis, row-major, with `g'` arguments floored at `eps`.
    pub fn modular_hessian(&self, u: &[S], eps: S) -> Vec<S> {
        let m = self.mesh.nodes;
        let mut hmat = vec![S::zero(); m * m];
        let one = S::one();
        for p in &self.pairs {
            let (cx, cy) = (p.cx as usize, p.cy as usize);
            let d = (cell_value(u, cx, p.tx) - cell_value(u, cy, p.ty)) * p.rs;
            let c = p.w * p.kernel.g_prime_floor(d, eps) * p.rs * p.rs;
            let (idx, val, len) = merged_stencil(cx, cy, p.tx, p.ty);
            for a in 0..len {
                let ia = idx[a];
                if ia == 0 || ia > m {
                    continue;
                }
                let ca = c * val[a];
                for b in 0..len {
                    let ib = idx[b];
                    if ib == 0 || ib > m {
                        continue;
                    }
                    let k = (ia - 1) * m + (ib - 1);
                    hmat[k] = hmat[k] + ca * val[b];
                }
            }
        }
        for e in &self.exterior {
            let cell = e.cell as usize;
            let c = cell_value(u, cell, e.t);
            let k2 = e.w * (e.sides[0].d2(c, eps) + e.sides[1].d2(c, eps));
            let idx = [cell, cell + 1];
            let val = [one - e.t, e.t];
            for a in 0..2 {
                if idx[a] == 0 || idx[a] > m {
                    continue;
                }
                for b in 0..2 {
                    if idx[b] == 0 || idx[b] > m {
                        continue;
                    }
                    let k = (idx[a] - 1) * m + (idx[b] - 1);
                    hmat[k] = hmat[k] + k2 * val[a] * val[b];
                }
            }
        }
        hmat
    }

    /// Reported magnitude of the exterior truncation remainder for `u` (zero for power kernels).
    pub fn truncation_bound(&self, u: &[S]) -> S {
        let s = self.family.s;
        let gm = self.family.g_minus();
        self.exterior
            .iter()
            .map(|e| {
                let c = cell_value(u, e.cell as usize, e.t);
                e.w * (e.sides[0].truncation_bound(c, s, gm) + e.sides[1].truncation_bound(c, s, gm))
            })
            .fold(S::zero(), |a, b| a + b)
    }
}

/// Hat coefficients of `e(x) − e(y)` at a pair point, with shared nodes merged so that
/// near-diagonal contributions stay small instead of cancelling.
#[inline]
fn merged_stencil<S: Real>(cx: usize, cy: usize, tx: S, ty: S) -> ([usize; 4], [S; 4], usize) {
    let one = S::one();
    if cx == cy {
        ([cx, cx + 1, 0, 0], [ty - tx, tx - ty, S::zero(), S::zero()], 2)
    } else if cx == cy + 1 {
        ([cy, cx, cx + 1, 0], [-(one - ty), (one - tx) - ty, tx, S::zero()], 3)
    } else {
        ([cx, cx + 1, cy, cy + 1], [one - tx, tx, -(one - ty), -ty], 4)
    }
}

fn finite<S: Real>(v: S, what: &str) -> Result<S> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(format!("non-finite {what}")))
    }
}

fn build_pairs<S: Real>(mesh: &Mesh1D<S>, family: &KernelFamily<S>) -> Vec<PairPoint<S>> {
    let h = mesh.h();
    let s = family.s;
    let two = S::lit(2.0);
    let one = S::one();
    let g4 = Rule::<S>::new(4);
    let g3 = Rule::<S>::new(3);
    let panels = graded_panels(mesh.near_diag_levels, S::lit(GRADE));
    let cells = mesh.cells();
    let mut out = Vec::new();
    let push = |x: S, y: S, w: S, out: &mut Vec<PairPoint<S>>| {
        let cx = (x / h).floor().to_usize().unwrap_or(0).min(cells - 1);
        let cy = (y / h).floor().to_usize().unwrap_or(0).min(cells - 1);
        let r = x - y;
        out.push(PairPoint {
            cx: cx as u32,
            cy: cy as u32,
            tx: (x / h - S::from_usize_lossy(cx)).max(S::zero()).min(one),
            ty: (y / h - S::from_usize_lossy(cy)).max(S::zero()).min(one),
            w: two * w / r,
            rs: r.powf(-s),
            kernel: family.local(x, y),
        });
    };
    for c in 0..cells {
        let x0 = mesh.x(c);
        // same cell in (r, y): x = y + r, r ∈ (0, h), y ∈ (x0, x0 + h − r)
        for &(lo, hi) in &panels {
            for (r, wr) in g4.on(lo * h, hi * h) {
                for (y, wy) in g4.on(x0, x0 + h - r) {
                    push(y + r, y, wr * wy, &mut out);
                }
            }
        }
        // adjacent cells: y in c, x in c + 1, Duffy maps toward the shared node
        if c + 1 < cells {
            let p = mesh.x(c + 1);
            for &(lo, hi) in &panels {
                for (xi, wxi) in g4.on(lo, hi) {
                    for (eta, weta) in g4.on(S::zero(), one) {
                        let jac = h * h * xi * wxi * weta;
                        let (a1, b1) = (h * xi, h * xi * eta);
                        push(p + a1, p - b1, jac, &mut out);
                        push(p + b1, p - a1, jac, &mut out);
                    }
                }
            }
        }
        for cy in 0..c.saturating_sub(1) {
            let rule = if c - cy <= 4 { &g4 } else { &g3 };
            let y0 = mesh.x(cy);
            for (x, wx) in rule.on(x0, x0 + h) {
                for (y, wy) in rule.on(y0, y0 + h) {
                    push(x, y, wx * wy, &mut out);
                }
            }
        }
    }
    out
}

fn build_exterior<S: Real>(mesh: &Mesh1D<S>, family: &KernelFamily<S>) -> Vec<ExteriorPoint<S>> {
    let h = mesh.h();
    let l = mesh.length;
    let s = family.s;
    let two = S::lit(2.0);
    let g4 = Rule::<S>::new(4);
    let panels = graded_panels(mesh.near_diag_levels, S::lit(GRADE));
    let cells = mesh.cells();
    let radius = mesh.exterior_radius;
    let mut out = Vec::new();
    for c in 0..cells {
        let x0 = mesh.x(c);
        // boundary cells are graded toward the boundary
        let mut segments: Vec<(S, S)> = Vec::new();
        if c == 0 {
            segments.extend(panels.iter().map(|&(lo, hi)| (x0 + lo * h, x0 + hi * h)));
        } else if c == cells - 1 {
            segments.extend(panels.iter().map(|&(lo, hi)| (l - hi * h, l - lo * h)));
        } else {
            segments.push((x0, x0 + h));
        }
        for (a, b) in segments {
            for (x, wx) in g4.on(a, b) {
                let t = ((x - x0) / h).max(S::zero()).min(S::one());
                let left = exterior_side(family, x, S::zero(), x, radius, s, &g4);
                let right = exterior_side(family, x, l, l - x, radius, s, &g4);
                out.push(ExteriorPoint { cell: c as u32, t, w: two * wx, sides: [left, right] });
            }
        }
    }
    out
}

pub(crate) fn exterior_side<S: Real>(
    family: &KernelFamily<S>,
    x: S,
    boundary: S,
    dist: S,
    radius: S,
    s: S,
    rule: &Rule<S>,
) -> ExteriorSide<S> {
    // the clamped kernel is constant along each side
    let kernel = family.local(x, boundary);
    let analytic = kernel.phases().is_some();
    let rho = if analytic { dist + radius } else { dist + radius * S::lit(1000.0) };
    let panels = if analytic { 12 } else { 24 };
    let (la, lb) = (dist.ln(), rho.ln());
    let mut nodes = Vec::with_capacity(panels * rule.nodes.len());
    for k in 0..panels {
        let a = la + (lb - la) * S::from_usize_lossy(k) / S::from_usize_lossy(panels);
        let b = la + (lb - la) * S::from_usize_lossy(k + 1) / S::from_usize_lossy(panels);
        // dr / r = du with r = e^u
        for (u, w) in rule.on(a, b) {
            let r = u.exp();
            nodes.push((w, r.powf(-s)));
        }
    }
    let moments = kernel.phases().map(|(ph, n)| {
        let mut m = [S::zero(); 2];
        for i in 0..n {
            let e = ph[i].1;
            let mut acc = S::zero();
            for &(w, rs) in &nodes {
                acc = acc + w * rs.powf(e);
            }
            m[i] = acc + rho.powf(-s * e) / (s * e);
        }
        m
    });
    ExteriorSide {
        kernel,
        dist,
        moments,
        nodes: if moments.is_some() { Vec::new() } else { nodes },
        rho,
    }
}

/// Sampled embedding constants (lower bounds of the true constants).
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingConstants<S> {
    pub c_star: S,
    pub c_1g: S,
    pub c_star_g: S,
    pub c_max: S,
    pub samples: usize,
}

/// `C_* = max ‖v‖_{L²}/[v]`, `C_{1,G} = max ‖v‖_{L^Φ}/[v]` over sampled directions.
pub fn estimate_embedding_constants<S: Real>(
    disc: &Discretization<S>,
    src: &SourceFamily<S>,
    n_samples: usize,
    seed: u64,
) -> Result<EmbeddingConstants<S>> {
    if n_samples < 32 {
        return Err(Error::Domain(format!("embedding estimate needs at least 32 samples, got {n_samples}")));
    }
    let dirs = DirectionSampler::with_total(n_samples, seed).directions(disc.mesh.length, disc.mesh.nodes);
    estimate_embedding_from(disc, src, &dirs)
}

/// Same as [`estimate_embedding_constants`] over a given direction set.
pub fn estimate_embedding_from<S: Real>(
    disc: &Discretization<S>,
    src: &SourceFamily<S>,
    dirs: &[Vec<S>],
) -> Result<EmbeddingConstants<S>> {
    let mut c_star = S::zero();
    let mut c_1g = S::zero();
    for v in dirs {
        let g = GridFunction::new(disc.mesh, v.clone())?;
        let l2 = g.l2_norm();
        if l2 == S::zero() {
            continue;
        }
        // normalize so that non-homogeneous modulars are compared at unit L² size
        let g = g.scaled(S::one() / l2);
        let semi = disc.gagliardo_seminorm(&g.values)?;
        let phi = luxemburg_norm(&g, ModularKind::Phi(src))?;
        c_star = c_star.max(S::one() / semi);
        c_1g = c_1g.max(phi / semi);
    }
    let k = &disc.family;
    let c_star_g = c_1g.powf(src.h2_minus()).max(c_1g.powf(src.h2_plus()));
    let c_max = c_1g.powf(k.g_minus()).max(c_1g.powf(k.g_plus()));
    Ok(EmbeddingConstants { c_star, c_1g, c_star_g, c_max, samples: dirs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfunction::{KernelVariant, OrliczShape};

    fn mesh(m: usize) -> Mesh1D<f64> {
        Mesh1D::new(1.0, m).unwrap()
    }

    #[test]
    fn mesh_invariants() {
        assert!(Mesh1D::<f64>::new(1.0, 3).is_err());
        assert!(Mesh1D::<f64>::with_options(1.0, 8, 1.0, 6).is_err());
        let m = mesh(9);
        assert!((m.h() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn modular_examples() {
        let m = mesh(999);
        let k = KernelFamily::<f64>::power(2.0, 0.5, 1.0).unwrap();
        let zero = GridFunction::zeros(m);
        assert_eq!(modular(&zero, ModularKind::Ghat(&k)), 0.0);
        assert_eq!(luxemburg_norm(&zero, ModularKind::Ghat(&k)).unwrap(), 0.0);
        let two = GridFunction::from_fn(m, |_| 2.0);
        let h = m.h();
        // the interpolant drops to zero on the two boundary cells
        assert!((modular(&two, ModularKind::Ghat(&k)) - 2.0).abs() < 5.0 * h);
        let src = SourceFamily::<f64>::single_power(4.0, 1.0, 1.0).unwrap();
        let lin = GridFunction::from_fn(m, |x| x);
        assert!((modular(&lin, ModularKind::Phi(&src)) - 0.2).abs() < 2.0 * h);
    }

    #[test]
    fn luxemburg_of_constant_like() {
        let m = mesh(64);
        let k3 = KernelFamily::<f64>::power(3.0, 0.5, 1.0).unwrap();
        let u = GridFunction::from_fn(m, |x| (std::f64::consts::PI * x).sin());
        let j = modular(&u, ModularKind::Ghat(&k3));
        let n = luxemburg_norm(&u, ModularKind::Ghat(&k3)).unwrap();
        assert!((n - j.powf(1.0 / 3.0)).abs() < 1e-12);
        let n2 = luxemburg_norm(&u, ModularKind::L2).unwrap();
        assert!((n2 - u.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn numeric_exterior_matches_dense_sum() {
        let m = mesh(16);
        let k = KernelFamily::<f64>::new(KernelVariant::OrliczScalar(OrliczShape::PowerLog { p: 1.8 }), 0.4, 1.0).unwrap();
        let d = Discretization::new(m, &k).unwrap();
        for e in [&d.exterior[0], &d.exterior[10], &d.exterior[d.exterior.len() / 2]] {
            let side = &e.sides[0];
            for c in [1e-3, 0.7, 50.0] {
                let (la, lb) = (side.dist.ln(), side.rho.ln());
                let n = 400_000;
                let du = (lb - la) / n as f64;
                let dense: f64 = (0..n)
                    .map(|i| {
                        let r = (la + (i as f64 + 0.5) * du).exp();
                        side.kernel.big_g(c * r.powf(-0.4)) * du
                    })
                    .sum();
                assert!((side.value(c) - dense).abs() < 1e-9 * dense, "{} vs {dense}", side.value(c));
            }
        }
    }

    #[test]
    fn exterior_matches_closed_form() {
        let m = mesh(16);
        let k = KernelFamily::<f64>::power(2.5, 0.4, 1.0).unwrap();
        let d = Discretization::new(m, &k).unwrap();
        let e = &d.exterior[10];
        let x = m.x(e.cell as usize) + e.t * m.h();
        let c: f64 = 0.7;
        let side = &e.sides[0];
        let exact = c.powf(2.5) / 2.5 * x.powf(-0.4 * 2.5) / (0.4 * 2.5);
        assert!((side.value(c) - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn mass_matrix_matches_l2() {
        let m = mesh(7);
        let u: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).cos()).collect();
        let mm = m.mass_matrix();
        let mut q = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                q += u[i] * mm[i * 7 + j] * u[j];
            }
        }
        assert!((q - l2_norm_sq(&m, &u)).abs() < 1e-14);
        assert!((l2_inner(&m, &u, &u) - q).abs() < 1e-14);
    }
}
