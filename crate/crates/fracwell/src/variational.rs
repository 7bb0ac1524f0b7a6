//! Energy and Nehari functionals, fiber maps, sampled well depth, derived bound constants,
//! classification of initial data and the high-energy data constructor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh_space::{luxemburg_norm, EmbeddingConstants, GridFunction, ModularKind, Profile};
use crate::operator::Problem;
use crate::roots::{bracketed, Stop};
use crate::scalar::Real;
use crate::source::GrowthConstants;

/// Relative tolerance on `|I_δ(λ* u)|` against `δ (λ*u, λ*u)`.
pub const FIBER_TOL: f64 = 1e-8;

/// `E(u) = J_{s,G}(u) − ∫ F(x, u)`.
pub fn energy<S: Real>(pr: &Problem<S>, u: &[S]) -> Result<S> {
    let j = pr.disc.gagliardo_modular(u)?;
    finite(j - pr.source_primitive(u), "energy")
}

/// `I(u) = (u, u) − ∫ f(x, u) u`.
pub fn nehari<S: Real>(pr: &Problem<S>, u: &[S]) -> Result<S> {
    nehari_delta(pr, u, S::one())
}

/// `I_δ(u) = δ (u, u) − ∫ f(x, u) u`.
pub fn nehari_delta<S: Real>(pr: &Problem<S>, u: &[S], delta: S) -> Result<S> {
    let p = pr.disc.weak_pairing(u, u)?;
    finite(delta * p - pr.source_pairing(u), "Nehari functional")
}

fn finite<S: Real>(v: S, what: &str) -> Result<S> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(format!("non-finite {what}")))
    }
}

/// Cached evaluation of `λ ↦ E(λu), I_δ(λu)` for one direction `u`.
#[derive(Clone, Debug)]
pub struct Fiber<'a, S> {
    pr: &'a Problem<S>,
    profile: Profile<S>,
    source_vals: Vec<S>,
    /// `(A_k, e_k)` and `(B_k, q_k)` when all exponents are constant.
    phases: Option<(PowerSums<S>, PowerSums<S>)>,
}

/// Terms `(coefficient, exponent)` of a finite power sum.
type PowerSums<S> = Vec<(S, S)>;

impl<'a, S: Real> Fiber<'a, S> {
    pub fn new(pr: &'a Problem<S>, u: &[S]) -> Self {
        let profile = pr.disc.profile(u);
        let source_vals = pr.source_values(u);
        let phases = pr
            .disc
            .phase_moduli(&profile)
            .zip(pr.source_phase_sums(&source_vals));
        Self { pr, profile, source_vals, phases }
    }

    /// True when the fiber reduces to finite sums of powers of `λ`.
    pub fn is_homogeneous(&self) -> bool {
        self.phases.is_some()
    }

    pub fn modular(&self, lambda: S) -> S {
        match &self.phases {
            Some((a, _)) => a.iter().fold(S::zero(), |acc, &(c, e)| acc + c * lambda.powf(e)),
            None => self.pr.disc.modular_of(&self.profile, lambda),
        }
    }

    /// `(λu, λu)`.
    pub fn pairing(&self, lambda: S) -> S {
        match &self.phases {
            Some((a, _)) => a.iter().fold(S::zero(), |acc, &(c, e)| acc + e * c * lambda.powf(e)),
            None => self.pr.disc.pairing_of(&self.profile, lambda),
        }
    }

    pub fn source_primitive(&self, lambda: S) -> S {
        match &self.phases {
            Some((_, b)) => b.iter().fold(S::zero(), |acc, &(c, e)| acc + c * lambda.powf(e)),
            None => self.pr.source_primitive_of(&self.source_vals, lambda),
        }
    }

    /// `∫ f(x, λu) λu`.
    pub fn source_pairing(&self, lambda: S) -> S {
        match &self.phases {
            Some((_, b)) => b.iter().fold(S::zero(), |acc, &(c, e)| acc + e * c * lambda.powf(e)),
            None => self.pr.source_pairing_of(&self.source_vals, lambda),
        }
    }

    pub fn energy(&self, lambda: S) -> S {
        self.modular(lambda) - self.source_primitive(lambda)
    }

    pub fn nehari_delta(&self, lambda: S, delta: S) -> S {
        delta * self.pairing(lambda) - self.source_pairing(lambda)
    }

    /// `η(λ) = ∫ f(x, λu) λu / (λu, λu)`.
    pub fn eta(&self, lambda: S) -> Result<S> {
        let p = self.pairing(lambda);
        if !(p > S::zero()) {
            return Err(Error::Domain("eta: vanishing pairing".into()));
        }
        Ok(self.source_pairing(lambda) / p)
    }

    /// The unique `λ > 0` with `I_δ(λu) = 0`.
    pub fn lambda_star(&self, delta: S) -> Result<S> {
        if !(delta > S::zero()) {
            return Err(Error::Domain("delta must be positive".into()));
        }
        let ln_delta = delta.ln();
        // φ(μ) = ln δ − ln η(e^μ) is decreasing in μ
        let phi = |mu: S| {
            let l = mu.exp();
            let p = self.pairing(l);
            let q = self.source_pairing(l);
            if !(p > S::zero()) {
                return S::nan();
            }
            if !(q > S::zero()) {
                return S::infinity();
            }
            ln_delta + p.ln() - q.ln()
        };
        let step = S::lit(std::f64::consts::LN_2);
        let cap = 400;
        let mut lo = S::zero();
        let mut flo = phi(lo);
        if flo.is_nan() {
            return Err(Error::Domain("lambda_star: direction has zero seminorm".into()));
        }
        let mut hi = lo;
        let mut fhi = flo;
        let mut k = 0;
        if flo > S::zero() {
            while fhi > S::zero() {
                lo = hi;
                hi = hi + step;
                fhi = phi(hi);
                k += 1;
                if k > cap || fhi.is_nan() {
                    return Err(no_root(delta));
                }
            }
        } else {
            while flo <= S::zero() {
                if flo == S::zero() {
                    return Ok(lo.exp());
                }
                hi = lo;
                lo = lo - step;
                flo = phi(lo);
                k += 1;
                if k > cap || flo.is_nan() {
                    return Err(no_root(delta));
                }
            }
        }
        let stop = Stop { f_tol: S::lit(FIBER_TOL * 1e-2), x_rel: S::lit(1e-15), max_iter: 300 };
        let mu = bracketed(phi, lo, hi, stop)?;
        Ok(mu.exp())
    }
}

fn no_root<S: Real>(delta: S) -> Error {
    Error::condition("g5", format!("no sign change of I_delta(lambda u) for delta = {delta}"))
}

pub fn lambda_star<S: Real>(pr: &Problem<S>, u: &[S], delta: S) -> Result<S> {
    Fiber::new(pr, u).lambda_star(delta)
}

/// Scaling `λ` with `E(λv) = target` on the given side of the fiber maximum `λ*(v)`:
/// `λ ≤ λ*` gives `I(λv) ≥ 0`, `λ > λ*` gives `I(λv) < 0`.
pub fn scale_to_energy<S: Real>(pr: &Problem<S>, v: &[S], target: f64, side: NehariSide) -> Result<f64> {
    let fib = Fiber::new(pr, v);
    let ls = fib.lambda_star(S::one())?;
    let top = fib.energy(ls).as_f64();
    let stop = Stop { f_tol: S::lit(1e-13 * target.abs().max(1e-300)), x_rel: S::lit(1e-15), max_iter: 300 };
    let f = |l: S| fib.energy(l) - S::lit(target);
    match side {
        NehariSide::Plus => {
            if !(target > 0.0 && target <= top) {
                return Err(Error::Constructor(format!(
                    "energy {target} is outside (0, {top}], the range of E on the rising part of the fiber"
                )));
            }
            if target == top {
                return Ok(ls.as_f64());
            }
            Ok(bracketed(f, S::zero(), ls, stop)?.as_f64())
        }
        NehariSide::Minus => {
            if !(target < top) {
                return Err(Error::Constructor(format!("energy {target} is not below the fiber maximum {top}")));
            }
            let mut hi = ls * S::lit(2.0);
            let mut guard = 0;
            while f(hi) > S::zero() {
                hi = hi * S::lit(2.0);
                guard += 1;
                if guard > 200 || !hi.is_finite() {
                    return Err(Error::Constructor(format!("E(lambda v) stays above {target}")));
                }
            }
            Ok(bracketed(f, ls, hi, stop)?.as_f64())
        }
    }
}

pub fn eta<S: Real>(pr: &Problem<S>, u: &[S], lambda: S) -> Result<S> {
    if !(lambda > S::zero()) {
        return Err(Error::Domain("eta needs lambda > 0".into()));
    }
    Fiber::new(pr, u).eta(lambda)
}

/// `d̂(δ) = min_v E(λ*(δ, v) v)`; an upper bound of the true depth.
pub fn depth<S: Real>(pr: &Problem<S>, delta: S, dirs: &[Vec<S>]) -> Result<S> {
    let curve = depth_curve(pr, &[delta.as_f64()], dirs)?;
    Ok(S::lit(curve.values[0]))
}

/// Sampled depth curve with monotonicity flags.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DepthCurve {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub argmax: usize,
    /// Non-decreasing on the grid points `δ ≤ 1`.
    pub increasing_below_one: bool,
    /// Non-increasing on the grid points `δ ≥ 1`.
    pub decreasing_above_one: bool,
    pub directions: usize,
}

impl DepthCurve {
    /// Index of the grid point closest to `δ = 1`.
    pub fn index_nearest_one(&self) -> usize {
        nearest(&self.deltas, 1.0)
    }

    pub fn d_hat(&self) -> f64 {
        self.values[self.index_nearest_one()]
    }

    /// `δ₁ < 1 < δ₂` with `d(δ) = level` on the isotonically regressed branches.
    pub fn level_crossings(&self, level: f64) -> (Option<f64>, Option<f64>) {
        let one = self.index_nearest_one();
        let left_x = &self.deltas[..=one];
        let left = isotonic_increasing(&self.values[..=one]);
        let right_x = &self.deltas[one..];
        let neg: Vec<f64> = self.values[one..].iter().map(|v| -v).collect();
        let right: Vec<f64> = isotonic_increasing(&neg).iter().map(|v| -v).collect();
        (crossing(left_x, &left, level), crossing(right_x, &right, level))
    }
}

fn nearest(xs: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if (v - x).abs() < (xs[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Bisection for `y(x) = level` on a monotone piecewise-linear interpolant.
fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let f = |x: f64| interp(xs, ys, x) - level;
    let (mut a, mut b) = (xs[0], xs[xs.len() - 1]);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-14 * b.abs() {
            break;
        }
    }
    Some(0.5 * (a + b))
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v < x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

/// Least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_increasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (v2, n2) = blocks[blocks.len() - 1];
            let (v1, n1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((v1 * n1 as f64 + v2 * n2 as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Default δ-grid: geometric on `[0.01, 1]`, uniform on `[1, 4]`.
pub fn default_delta_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..24).map(|i| 0.01f64 * 100f64.powf(i as f64 / 24.0)).collect();
    g.extend((0..=12).map(|i| 1.0 + 0.25 * i as f64));
    g
}

/// `E(λ*(δ, v) v)` for every δ on the grid and every direction, then the minimum over directions.
pub fn depth_curve<S: Real>(pr: &Problem<S>, deltas: &[f64], dirs: &[Vec<S>]) -> Result<DepthCurve> {
    if deltas.is_empty() || deltas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("delta grid must be non-empty and strictly increasing".into()));
    }
    let per_dir: Vec<Result<Vec<f64>>> = dirs
        .par_iter()
        .map(|v| {
            let fib = Fiber::new(pr, v);
            deltas
                .iter()
                .map(|&d| {
                    let l = fib.lambda_star(S::lit(d))?;
                    Ok(fib.energy(l).as_f64())
                })
                .collect()
        })
        .collect();
    let mut values = vec![f64::INFINITY; deltas.len()];
    let mut used = 0;
    for r in per_dir {
        let r = r?;
        used += 1;
        for (v, e) in values.iter_mut().zip(r) {
            *v = v.min(e);
        }
    }
    if used == 0 {
        return Err(Error::Domain("depth curve needs at least one direction".into()));
    }
    let argmax = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    let one = nearest(deltas, 1.0);
    let increasing_below_one = values[..=one].windows(2).all(|w| w[1] >= w[0]);
    let decreasing_above_one = values[one..].windows(2).all(|w| w[1] <= w[0]);
    Ok(DepthCurve { deltas: deltas.to_vec(), values, argmax, increasing_below_one, decreasing_above_one, directions: used })
}

/// Derived constants of the potential-well argument.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundConstants {
    pub delta: f64,
    pub delta_min: f64,
    pub y: f64,
    pub z: f64,
    /// Seminorm bound of the Galerkin approximations; needs a depth value.
    pub c_d: Option<f64>,
    pub lambda_zeta: Option<f64>,
    pub big_lambda_zeta: Option<f64>,
    pub t_star: Option<f64>,
    pub t_star_star: Option<f64>,
    /// The embedding constants are sampled lower bounds.
    pub note: String,
}

/// Exponent data shared by the bound formulas.
#[derive(Clone, Copy, Debug)]
pub struct Exponents {
    pub g_minus: f64,
    pub g_plus: f64,
    pub h1_minus: f64,
    pub h2_minus: f64,
    pub h2_plus: f64,
}

impl Exponents {
    pub fn of<S: Real>(pr: &Problem<S>) -> Self {
        let k = &pr.disc.family;
        let s = &pr.source;
        Self {
            g_minus: k.g_minus().as_f64(),
            g_plus: k.g_plus().as_f64(),
            h1_minus: s.h1_minus().as_f64(),
            h2_minus: s.h2_minus().as_f64(),
            h2_plus: s.h2_plus().as_f64(),
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.h2_plus > self.g_minus && self.h2_minus > self.g_plus && self.h1_minus > self.g_plus) {
            return Err(Error::condition(
                "g5",
                format!(
                    "bound exponents need g+ < h1-, h2-: g- = {}, g+ = {}, h1- = {}, h2- = {}, h2+ = {}",
                    self.g_minus, self.g_plus, self.h1_minus, self.h2_minus, self.h2_plus
                ),
            ));
        }
        Ok(())
    }

    /// `δ_max(ζ)` bounding the seminorm of Nehari points below level `ζ`.
    pub fn delta_max(&self, zeta: f64) -> f64 {
        let base = zeta * self.h1_minus * self.g_plus / (self.g_minus * (self.h1_minus - self.g_plus));
        base.powf(1.0 / self.g_minus).max(base.powf(1.0 / self.g_plus))
    }

    /// Right-hand constant `h₁⁻g⁺/(g⁻ C_{*,max}(h₁⁻−g⁺))` of the high-energy norm inequality.
    pub fn high_energy_factor(&self, c_star: f64) -> f64 {
        let c_star_max = c_star.powf(-self.g_minus).max(c_star.powf(-self.g_plus));
        self.h1_minus * self.g_plus / (self.g_minus * c_star_max * (self.h1_minus - self.g_plus))
    }
}

pub fn bound_constants<S: Real>(
    pr: &Problem<S>,
    consts: &EmbeddingConstants<S>,
    growth: &GrowthConstants<S>,
    delta: f64,
    d_hat: Option<f64>,
) -> Result<BoundConstants> {
    let ex = Exponents::of(pr);
    ex.check()?;
    let a = growth.a.as_f64();
    let c_g = consts.c_star_g.as_f64();
    let c_max = consts.c_max.as_f64();
    let y = delta * ex.g_minus / (ex.h2_plus * a * c_g);
    let z = delta * ex.g_minus / (ex.h2_plus * a * c_max);
    let base = ex.g_minus / (a * ex.h2_plus * c_g);
    let delta_min = base
        .powf(1.0 / (ex.h2_plus - ex.g_minus))
        .min(base.powf(1.0 / (ex.h2_minus - ex.g_plus)));
    let c_d = d_hat.map(|d| {
        let b = d * ex.h1_minus / (ex.h1_minus - ex.g_plus);
        b.powf(1.0 / ex.g_plus).max(b.powf(1.0 / ex.g_minus))
    });
    Ok(BoundConstants {
        delta,
        delta_min,
        y,
        z,
        c_d,
        lambda_zeta: None,
        big_lambda_zeta: None,
        t_star: None,
        t_star_star: None,
        note: format!("embedding constants are sampled lower bounds ({} samples)", consts.samples),
    })
}

/// Analytic lower bound `(1 − g⁺/h₁⁻) min{δ_min^{g⁻}, δ_min^{g⁺}}` of the depth.
pub fn depth_lower_bound(ex: &Exponents, delta_min: f64) -> f64 {
    (1.0 - ex.g_plus / ex.h1_minus) * delta_min.powf(ex.g_minus).min(delta_min.powf(ex.g_plus))
}

/// Blow-up time bounds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BlowupTimes {
    pub t_star: f64,
    pub t_star_star: Option<f64>,
}

/// `T* = 4‖u₀‖²(α−1)/(α(α−2)²(d−E₀))`; `T**` uses the energy at a later time `t₀`.
pub fn blowup_time_bounds(u0_l2_sq: f64, d_hat: f64, e0: f64, alpha: f64, shifted_energy: Option<f64>) -> Result<BlowupTimes> {
    if !(e0 < d_hat) {
        return Err(Error::BoundUndefined(format!("E0 = {e0} is not below d = {d_hat}")));
    }
    if !(alpha > 2.0) {
        return Err(Error::BoundUndefined(format!("alpha = {alpha} must exceed 2")));
    }
    let f = |e: f64| 4.0 * u0_l2_sq * (alpha - 1.0) / (alpha * (alpha - 2.0).powi(2) * (d_hat - e));
    let t_star_star = match shifted_energy {
        Some(e) if e < d_hat => Some(f(e)),
        Some(e) => return Err(Error::BoundUndefined(format!("E(u(t0)) = {e} is not below d = {d_hat}"))),
        None => None,
    };
    Ok(BlowupTimes { t_star: f(e0), t_star_star })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    W,
    V,
    Nehari,
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyLevel {
    Low,
    Critical,
    High,
}

/// Sign of `I` for states outside `W ∪ V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NehariSide {
    #[serde(rename = "N+")]
    Plus,
    #[serde(rename = "N-")]
    Minus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariationalReport {
    pub energy: f64,
    pub nehari: f64,
    /// `(δ, I_δ(u))` on a few δ values.
    pub nehari_delta: Vec<(f64, f64)>,
    pub modular: f64,
    pub seminorm: f64,
    pub l2_norm: f64,
    pub lphi_norm: f64,
    pub region: Region,
    pub side: Option<NehariSide>,
    pub energy_level: EnergyLevel,
    pub d_hat: f64,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub tol_i: f64,
}

#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    /// Relative factor in `tol_I = rel · (|(u,u)| + |∫ f u|)`.
    pub tol_i_rel: f64,
    /// Relative half-width of the critical-energy band around `d̂`.
    pub critical_band: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { tol_i_rel: 1e-8, critical_band: 1e-2 }
    }
}

pub fn classify<S: Real>(
    pr: &Problem<S>,
    u0: &[S],
    curve: &DepthCurve,
    opts: &ClassifyOptions,
) -> Result<VariationalReport> {
    let fib = Fiber::new(pr, u0);
    let one = S::one();
    let pairing = fib.pairing(one).as_f64();
    let sp = fib.source_pairing(one).as_f64();
    let e = fib.energy(one).as_f64();
    let i = pairing - sp;
    let modular = fib.modular(one).as_f64();
    let seminorm = pr.disc.gagliardo_seminorm(u0)?.as_f64();
    let g = GridFunction::new(pr.disc.mesh, u0.to_vec())?;
    let l2 = g.l2_norm().as_f64();
    let lphi = luxemburg_norm(&g, ModularKind::Phi(&pr.source))?.as_f64();
    let tol_i = opts.tol_i_rel * (pairing.abs() + sp.abs());
    let d_hat = curve.d_hat();
    let is_zero = u0.iter().all(|v| *v == S::zero());
    let band = opts.critical_band * d_hat.abs();
    let energy_level = if (e - d_hat).abs() <= band {
        EnergyLevel::Critical
    } else if e < d_hat {
        EnergyLevel::Low
    } else {
        EnergyLevel::High
    };
    let region = if is_zero {
        Region::W
    } else if i.abs() <= tol_i && seminorm > 0.0 {
        Region::Nehari
    } else if e < d_hat && i > tol_i {
        Region::W
    } else if e < d_hat && i < -tol_i {
        Region::V
    } else {
        Region::Boundary
    };
    let side = match region {
        Region::Boundary if i > tol_i => Some(NehariSide::Plus),
        Region::Boundary if i < -tol_i => Some(NehariSide::Minus),
        _ => None,
    };
    let (delta1, delta2) = if e < d_hat { curve.level_crossings(e) } else { (None, None) };
    let nehari_delta = [0.5, 2.0].iter().map(|&d| (d, d * pairing - sp)).collect();
    Ok(VariationalReport {
        energy: e,
        nehari: i,
        nehari_delta,
        modular,
        seminorm,
        l2_norm: l2,
        lphi_norm: lphi,
        region,
        side,
        energy_level,
        d_hat,
        delta1,
        delta2,
        tol_i,
    })
}

/// Empirical `λ̂_ζ ≤ Λ̂_ζ` over sampled Nehari points `λ*(v) v` with `E < ζ`.
pub fn nehari_extrema<S: Real>(pr: &Problem<S>, zeta: f64, dirs: &[Vec<S>]) -> Result<(f64, f64)> {
    let pts: Vec<Result<Option<f64>>> = dirs
        .par_iter()
        .map(|v| {
            let fib = Fiber::new(pr, v);
            let l = fib.lambda_star(S::one())?;
            if fib.energy(l).as_f64() < zeta {
                let g = GridFunction::new(pr.disc.mesh, v.clone())?;
                Ok(Some(l.as_f64() * g.l2_norm().as_f64()))
            } else {
                Ok(None)
            }
        })
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in pts {
        if let Some(n) = p? {
            lo = lo.min(n);
            hi = hi.max(n);
        }
    }
    if !lo.is_finite() {
        return Err(Error::Domain(format!("no sampled Nehari point with energy below {zeta}")));
    }
    Ok((lo, hi))
}

/// Output of [`construct_high_energy_data`].
#[derive(Clone, Debug)]
pub struct HighEnergyData<S> {
    pub u: Vec<S>,
    pub energy: f64,
    pub nehari: f64,
    pub zeta: f64,
    pub mode: usize,
    pub amplitude: f64,
    /// `min{‖u‖^{g⁻}, ‖u‖^{g⁺}}` and the right-hand side of the high-energy norm inequality.
    pub norm_power: f64,
    pub norm_threshold: f64,
}

/// `u_M = μ + ζ v` with `v` a bump in `Ω₁`, `E(ζ v) ≤ 0`, `‖ζv‖` above the high-energy threshold,
/// and `μ` a sine mode in `Ω₂` whose amplitude is solved for `E(u_M) = M`.
pub fn construct_high_energy_data<S: Real>(
    pr: &Problem<S>,
    target: f64,
    omega1: (f64, f64),
    omega2: (f64, f64),
    c_star: f64,
) -> Result<HighEnergyData<S>> {
    let mesh = pr.disc.mesh;
    let l = mesh.length.as_f64();
    let ok_interval = |(a, b): (f64, f64)| 0.0 <= a && a < b && b <= l;
    if !ok_interval(omega1) || !ok_interval(omega2) || !(omega1.1 <= omega2.0 || omega2.1 <= omega1.0) {
        return Err(Error::Constructor("subintervals must be disjoint and inside the domain".into()));
    }
    if !(target > 0.0) {
        return Err(Error::Constructor("target energy must be positive".into()));
    }
    let ex = Exponents::of(pr);
    let factor = ex.high_energy_factor(c_star);
    let threshold = factor * target;
    let pi = std::f64::consts::PI;
    let bump = |x: f64, (a, b): (f64, f64), k: f64| -> f64 {
        if x <= a || x >= b {
            0.0
        } else {
            (k * pi * (x - a) / (b - a)).sin()
        }
    };
    let xs: Vec<f64> = (1..=mesh.nodes).map(|i| mesh.x(i).as_f64()).collect();
    let v: Vec<S> = xs.iter().map(|&x| S::lit(bump(x, omega1, 1.0).powi(2))).collect();
    if v.iter().all(|t| *t == S::zero()) {
        return Err(Error::Constructor("first subinterval contains no mesh node".into()));
    }
    let fib_v = Fiber::new(pr, &v);
    let v_l2 = GridFunction::new(mesh, v.clone())?.l2_norm().as_f64();
    // smallest ζ with E(ζv) ≤ 0 beyond the fiber maximum, and ζ meeting the norm threshold
    let lam = fib_v.lambda_star(S::one()).map_err(|e| Error::Constructor(format!("fiber of v: {e}")))?;
    let mut z_hi = lam.as_f64() * 2.0;
    let mut guard = 0;
    while fib_v.energy(S::lit(z_hi)).as_f64() > 0.0 {
        z_hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Constructor("E(zeta v) stays positive".into()));
        }
    }
    let stop = Stop { f_tol: S::lit(1e-12), x_rel: S::lit(1e-14), max_iter: 300 };
    let z_e = bracketed(|z: S| fib_v.energy(z), lam, S::lit(z_hi), stop)
        .map_err(|e| Error::Constructor(format!("zero-energy scaling: {e}")))?
        .as_f64();
    // min{t^{g⁻}, t^{g⁺}} = threshold in t = ζ‖v‖
    let t_n = threshold.powf(1.0 / ex.g_minus).max(threshold.powf(1.0 / ex.g_plus));
    let zeta = 1.05 * z_e.max(t_n / v_l2);
    let zv: Vec<S> = v.iter().map(|&t| t * S::lit(zeta)).collect();

    let nodes2 = xs.iter().filter(|&&x| x > omega2.0 && x < omega2.1).count();
    let max_mode = (nodes2 / 4).max(1);
    let mut k = 1;
    loop {
        let mu: Vec<S> = xs.iter().map(|&x| S::lit(bump(x, omega2, k as f64))).collect();
        let e_of = |c: f64| -> f64 {
            let u: Vec<S> = zv.iter().zip(&mu).map(|(&a, &b)| a + S::lit(c) * b).collect();
            energy(pr, &u).map(|e| e.as_f64()).unwrap_or(f64::NAN)
        };
        // coarse scan for an amplitude exceeding the target
        let mut c_hi = None;
        let mut c = 1e-3;
        let mut prev = e_of(0.0);
        let mut c_prev = 0.0;
        while c < 1e8 {
            let e = e_of(c);
            if e.is_nan() {
                break;
            }
            if e > target {
                c_hi = Some((c_prev, c));
                break;
            }
            if e < prev && e < 0.0 && c > 1.0 {
                break;
            }
            prev = e;
            c_prev = c;
            c *= 1.25;
        }
        if let Some((a, b)) = c_hi {
            let stop = Stop { f_tol: 1e-9 * target, x_rel: 1e-15, max_iter: 400 };
            let c = bracketed(|c: f64| e_of(c) - target, a, b, stop)
                .map_err(|e| Error::Constructor(format!("amplitude solve: {e}")))?;
            let u: Vec<S> = zv.iter().zip(&mu).map(|(&a, &b)| a + S::lit(c) * b).collect();
            let e = energy(pr, &u)?.as_f64();
            let i = nehari(pr, &u)?.as_f64();
            let n = GridFunction::new(mesh, u.clone())?.l2_norm().as_f64();
            return Ok(HighEnergyData {
                u,
                energy: e,
                nehari: i,
                zeta,
                mode: k,
                amplitude: c,
                norm_power: n.powf(ex.g_minus).min(n.powf(ex.g_plus)),
                norm_threshold: threshold,
            });
        }
        k += 1;
        if k > max_mode {
            return Err(Error::Constructor(format!(
                "no sine mode up to {max_mode} on the second subinterval reaches energy {target}"
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_space::{Discretization, Mesh1D};
    use crate::nfunction::KernelFamily;
    use crate::sampler::DirectionSampler;
    use crate::source::SourceFamily;

    fn problem(p: f64, q: f64, s: f64, m: usize) -> Problem<f64> {
        let mesh = Mesh1D::new(1.0, m).unwrap();
        let k = KernelFamily::power(p, s, 1.0).unwrap();
        Problem::nodal(Discretization::new(mesh, &k).unwrap(), SourceFamily::single_power(q, 1.0, 1.0).unwrap()).unwrap()
    }

    fn bump(m: usize) -> Vec<f64> {
        (1..=m).map(|i| (std::f64::consts::PI * i as f64 / (m + 1) as f64).sin()).collect()
    }

    #[test]
    fn zero_state() {
        let pr = problem(2.0, 3.0, 0.4, 16);
        assert_eq!(energy(&pr, &[0.0; 16]).unwrap(), 0.0);
        assert_eq!(nehari(&pr, &[0.0; 16]).unwrap(), 0.0);
    }

    #[test]
    fn lambda_star_closed_form() {
        let pr = problem(2.0, 4.0, 0.4, 24);
        let u = bump(24);
        let p = pr.disc.weak_pairing(&u, &u).unwrap();
        let q = pr.source_pairing(&u);
        let exact = (p / q).powf(1.0 / 2.0);
        let l = lambda_star(&pr, &u, 1.0).unwrap();
        assert!((l - exact).abs() <= 1e-8 * exact);
        let u2: Vec<f64> = u.iter().map(|v| 3.0 * v).collect();
        assert!((lambda_star(&pr, &u2, 1.0).unwrap() - l / 3.0).abs() <= 1e-8 * l);
        for d in [0.5, 1.0, 2.0] {
            let ls = lambda_star(&pr, &u, d).unwrap();
            assert!((eta(&pr, &u, ls).unwrap() - d).abs() < 1e-7);
        }
    }

    #[test]
    fn fiber_homogeneous_path_matches_direct() {
        let pr = problem(2.5, 3.5, 0.4, 16);
        let u = bump(16);
        let fib = Fiber::new(&pr, &u);
        assert!(fib.is_homogeneous());
        let scaled: Vec<f64> = u.iter().map(|v| 1.7 * v).collect();
        let direct = energy(&pr, &scaled).unwrap();
        assert!((fib.energy(1.7) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        let i = nehari(&pr, &scaled).unwrap();
        assert!((fib.nehari_delta(1.7, 1.0) - i).abs() < 1e-10 * i.abs().max(1.0));
    }

    #[test]
    fn isotonic_regression_pools() {
        assert_eq!(isotonic_increasing(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_increasing(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn blowup_time_formula() {
        let t = blowup_time_bounds(1.0, 0.1, 0.0, 3.0, None).unwrap();
        assert!((t.t_star - 80.0 / 3.0).abs() < 1e-12);
        assert!(blowup_time_bounds(1.0, 0.1, 0.2, 3.0, None).is_err());
        let t2 = blowup_time_bounds(2.0, 0.1, 0.0, 3.0, None).unwrap();
        assert!((t2.t_star - 2.0 * t.t_star).abs() < 1e-12);
    }

    #[test]
    fn depth_curve_shape() {
        let pr = problem(2.0, 3.0, 0.4, 24);
        let dirs = DirectionSampler::with_total(16, 3).directions(1.0, 24);
        let c = depth_curve(&pr, &default_delta_grid(), &dirs).unwrap();
        assert!(c.increasing_below_one && c.decreasing_above_one);
        assert_eq!(c.argmax, c.index_nearest_one());
        let (d1, d2) = c.level_crossings(0.5 * c.d_hat());
        assert!(d1.unwrap() < 1.0 && d2.unwrap() > 1.0);
    }

    #[test]
    fn classify_regions() {
        let pr = problem(2.0, 3.0, 0.4, 24);
        let dirs = DirectionSampler::with_total(16, 3).directions(1.0, 24);
        let c = depth_curve(&pr, &default_delta_grid(), &dirs).unwrap();
        let opts = ClassifyOptions::default();
        let zero = classify(&pr, &[0.0; 24], &c, &opts).unwrap();
        assert_eq!(zero.region, Region::W);
        let v = bump(24);
        let l = lambda_star(&pr, &v, 1.0).unwrap();
        let below: Vec<f64> = v.iter().map(|t| 0.8 * l * t).collect();
        assert_eq!(classify(&pr, &below, &c, &opts).unwrap().region, Region::W);
        let above: Vec<f64> = v.iter().map(|t| 1.6 * l * t).collect();
        let r = classify(&pr, &above, &c, &opts).unwrap();
        assert!(r.energy < c.d_hat());
        assert_eq!(r.region, Region::V);
    }

    #[test]
    fn bound_formula_arithmetic() {
        let ex = Exponents { g_minus: 2.0, g_plus: 3.0, h1_minus: 4.0, h2_minus: 4.0, h2_plus: 5.0 };
        ex.check().unwrap();
        // base 4·3/(2·1) = 6, max{6^{1/2}, 6^{1/3}}
        assert!((ex.delta_max(1.0) - 6f64.sqrt()).abs() < 1e-15);
        // C_{*,max} = max{0.5^{-2}, 0.5^{-3}} = 8, factor 4·3/(2·8·1)
        assert!((ex.high_energy_factor(0.5) - 0.75).abs() < 1e-15);
        // (1 − 3/4)·min{0.25, 0.125}
        assert!((depth_lower_bound(&ex, 0.5) - 0.03125).abs() < 1e-15);
        // 4·2·3/(4·2²·(3 − 1))
        let t = blowup_time_bounds(2.0, 3.0, 1.0, 4.0, None).unwrap();
        assert!((t.t_star - 0.75).abs() < 1e-15);
        assert!(blowup_time_bounds(2.0, 3.0, 3.0, 4.0, None).is_err());
        let bad = Exponents { h1_minus: 2.5, ..ex };
        assert!(bad.check().is_err());
    }
}
