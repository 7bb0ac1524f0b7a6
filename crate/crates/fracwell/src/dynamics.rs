//! Time integration of the semi-discrete system `M dc/dt = F(c)`, the energy ledger,
//! potential-well monitors, blow-up and decay analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Lu};
use crate::operator::Problem;
use crate::scalar::Real;
use crate::variational::{self, Exponents, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitEulerNewton,
    /// Trapezoidal rule solved by the same Newton iteration; second order, not dissipative.
    CrankNicolsonNewton,
    ExplicitAdaptive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Blow-up needs `‖u‖ ≥ blowup_factor · ‖u₀‖` when the step collapses.
    pub blowup_factor: f64,
    /// Runs stop as vanished once `‖u‖ < vanish_factor · ‖u₀‖`.
    pub vanish_factor: f64,
    /// Record every `output_stride`-th accepted step.
    pub output_stride: usize,
    /// Implicit scheme: adapt the step to keep `‖Δu‖/‖u‖` near `max_rel_change`.
    pub adaptive: bool,
    pub max_rel_change: f64,
    /// Explicit scheme tolerances.
    pub rtol: f64,
    pub atol: f64,
    /// Also record a sample whenever simulated time crosses a multiple of this spacing.
    pub sample_every: Option<f64>,
    /// Abort with solver failure after this many accepted steps.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::ImplicitEulerNewton,
            dt0: 1e-3,
            dt_min: 1e-12,
            dt_max: 0.05,
            t_end: 1.0,
            newton_tol: 1e-11,
            newton_max_iter: 30,
            blowup_factor: 1e6,
            vanish_factor: 1e-10,
            output_stride: 1,
            adaptive: true,
            max_rel_change: 0.05,
            rtol: 1e-8,
            atol: 1e-14,
            sample_every: None,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed_step(dt: f64, t_end: f64) -> Self {
        Self { dt0: dt, dt_max: dt, t_end, adaptive: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.dt_min) && self.dt_min <= self.dt0 && self.dt0 <= self.dt_max && pos(self.t_end)) {
            return Err(Error::Config("integrator needs 0 < dt_min <= dt0 <= dt_max and t_end > 0".into()));
        }
        if !(pos(self.blowup_factor) && pos(self.vanish_factor) && pos(self.newton_tol) && pos(self.max_rel_change)) {
            return Err(Error::Config("integrator thresholds must be positive".into()));
        }
        if self.output_stride == 0 || self.newton_max_iter == 0 {
            return Err(Error::Config("output_stride and newton_max_iter must be at least 1".into()));
        }
        if matches!(self.sample_every, Some(v) if !pos(v)) {
            return Err(Error::Config("sample_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Status {
    GlobalHorizon,
    Vanished { t: f64 },
    BlownUp { t_blow: f64 },
    SolverFailure { t: f64, reason: String },
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::GlobalHorizon => "global-horizon",
            Status::Vanished { .. } => "vanished",
            Status::BlownUp { .. } => "blown-up",
            Status::SolverFailure { .. } => "solver-failure",
        }
    }

    pub fn is_blown_up(&self) -> bool {
        matches!(self, Status::BlownUp { .. })
    }
}

/// One recorded time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub l2_norm: f64,
    pub seminorm: f64,
    pub energy: f64,
    pub nehari: f64,
    /// `D_k = Σ Δt ‖Δu/Δt‖²`.
    pub dissipation: f64,
    /// `r_k = D_k + E_k − E₀`.
    pub residual: f64,
    /// `∫₀^t ‖u‖²`.
    pub int_l2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub status: Status,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub last_dt: f64,
    /// Nodal values of the last accepted state.
    pub final_state: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn u0_l2(&self) -> f64 {
        self.samples[0].l2_norm
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("record has samples")
    }

    /// `∫₀^t ‖u‖²` at time `t`, linearly interpolated between samples.
    pub fn int_l2_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        let k = s.partition_point(|p| p.t < t);
        if k == 0 {
            return s[0].int_l2;
        }
        if k >= s.len() {
            return s[s.len() - 1].int_l2;
        }
        let (a, b) = (&s[k - 1], &s[k]);
        a.int_l2 + (t - a.t) / (b.t - a.t) * (b.int_l2 - a.int_l2)
    }

    /// `‖u‖` non-increasing (resp. non-decreasing) over all samples, up to relative `tol`.
    pub fn l2_monotone(&self, decreasing: bool, tol: f64) -> bool {
        self.samples.windows(2).all(|w| {
            let (a, b) = (w[0].l2_norm, w[1].l2_norm);
            if decreasing {
                b <= a * (1.0 + tol)
            } else {
                b >= a * (1.0 - tol)
            }
        })
    }
}

/// Stateful integrator for one problem.
pub struct Integrator<'a, S> {
    pr: &'a Problem<S>,
    cfg: IntegratorConfig,
    mass_lu: Lu,
}

impl<'a, S: Real> Integrator<'a, S> {
    pub fn new(pr: &'a Problem<S>, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let mass_lu = Lu::new(pr.mass(), pr.dim())?;
        Ok(Self { pr, cfg, mass_lu })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// Coefficients of the mass-orthogonal projection of nodal values onto the basis.
    pub fn project(&self, u: &[S]) -> Result<Vec<S>> {
        let rhs = self.pr.basis.reduce_vector(linalg::matvec(self.pr.hat_mass(), u));
        self.mass_lu.solve(&rhs)
    }

    /// One step of the configured scheme without step-size control.
    pub fn step(&self, c: &[S], dt: S) -> Result<Vec<S>> {
        match self.cfg.scheme {
            Scheme::ImplicitEulerNewton => self.implicit_step(c, dt),
            Scheme::CrankNicolsonNewton => self.theta_step(c, dt, S::lit(0.5)),
            Scheme::ExplicitAdaptive => self.explicit_step(c, dt).map(|(y, _)| y),
        }
    }

    /// Solves `M(x − c) − Δt F(x) = 0` by damped Newton.
    pub fn implicit_step(&self, c: &[S], dt: S) -> Result<Vec<S>> {
        self.theta_step(c, dt, S::one())
    }

    /// Solves `M(x − c) − Δt [θ F(x) + (1 − θ) F(c)] = 0` by damped Newton.
    pub fn theta_step(&self, c: &[S], dt: S, theta: S) -> Result<Vec<S>> {
        let pr = self.pr;
        let n = c.len();
        let m = pr.mass();
        let f0 = pr.assemble_residual(c)?;
        let mc = linalg::matvec(m, c);
        let explicit_part: Vec<S> = mc.iter().zip(&f0).map(|(&a, &b)| a + dt * (S::one() - theta) * b).collect();
        let tdt = theta * dt;
        let g_of = |x: &[S]| -> Result<Vec<S>> {
            let f = pr.assemble_residual(x)?;
            let mx = linalg::matvec(m, x);
            Ok(mx.iter().zip(&f).zip(&explicit_part).map(|((&a, &b), &e)| a - tdt * b - e).collect())
        };
        let inf = |v: &[S]| v.iter().fold(S::zero(), |a, b| a.max(b.abs()));
        let mut x = c.to_vec();
        let mut g: Vec<S> = f0.iter().map(|&b| -dt * b).collect();
        let tol = S::lit(self.cfg.newton_tol);
        let g_scale = inf(&mc);
        for _ in 0..self.cfg.newton_max_iter {
            let jf = pr.assemble_jacobian(&x)?;
            let jac: Vec<S> = m.iter().zip(&jf).map(|(&a, &b)| a - tdt * b).collect();
            let neg: Vec<S> = g.iter().map(|v| -*v).collect();
            let delta = linalg::solve(&jac, &neg)?;
            let g0 = inf(&g);
            let mut lam = S::one();
            let (x_new, g_new) = loop {
                let xn: Vec<S> = x.iter().zip(&delta).map(|(&a, &d)| a + lam * d).collect();
                let gn = g_of(&xn);
                let ok = match &gn {
                    Ok(gv) => inf(gv) <= (S::one() - S::lit(1e-4) * lam) * g0 || g0 == S::zero(),
                    Err(_) => false,
                };
                if ok || lam < S::lit(1.0 / 64.0) {
                    break (xn, gn?);
                }
                lam = lam * S::lit(0.5);
            };
            let step = lam * inf(&delta);
            x = x_new;
            g = g_new;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric("Newton iterate not finite"));
            }
            if step <= tol * (S::one() + inf(&x)) || inf(&g) <= tol * S::lit(1e-3) * g_scale {
                return Ok(x);
            }
        }
        Err(Error::numeric(format!("Newton did not converge in {} iterations (n = {n})", self.cfg.newton_max_iter)))
    }

    fn rhs(&self, y: &[S]) -> Result<Vec<S>> {
        let f = self.pr.assemble_residual(y)?;
        self.mass_lu.solve(&f)
    }

    /// Bogacki–Shampine 3(2) step; returns the new state and the scaled error norm.
    pub fn explicit_step(&self, y: &[S], dt: S) -> Result<(Vec<S>, S)> {
        let axpy = |base: &[S], terms: &[(S, &Vec<S>)]| -> Vec<S> {
            base.iter()
                .enumerate()
                .map(|(i, &b)| terms.iter().fold(b, |acc, (w, k)| acc + dt * *w * k[i]))
                .collect()
        };
        let l = S::lit;
        let k1 = self.rhs(y)?;
        let k2 = self.rhs(&axpy(y, &[(l(0.5), &k1)]))?;
        let k3 = self.rhs(&axpy(y, &[(l(0.75), &k2)]))?;
        let y_new = axpy(y, &[(l(2.0 / 9.0), &k1), (l(1.0 / 3.0), &k2), (l(4.0 / 9.0), &k3)]);
        let k4 = self.rhs(&y_new)?;
        let (rtol, atol) = (l(self.cfg.rtol), l(self.cfg.atol));
        let mut err = S::zero();
        for i in 0..y.len() {
            let e = dt * (l(-5.0 / 72.0) * k1[i] + l(1.0 / 12.0) * k2[i] + l(1.0 / 9.0) * k3[i] - l(0.125) * k4[i]);
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / sc);
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("explicit stage not finite"));
        }
        Ok((y_new, err))
    }

    fn sample(&self, c: &[S], t: f64, dissipation: f64, int_l2: f64, e0: Option<f64>) -> Result<Sample> {
        let pr = self.pr;
        let u = pr.basis.to_nodal(c);
        let l2 = pr.l2_norm_sq_coeffs(c).as_f64().max(0.0).sqrt();
        let energy = variational::energy(pr, &u)?.as_f64();
        let nehari = variational::nehari(pr, &u)?.as_f64();
        let seminorm = pr.disc.gagliardo_seminorm(&u)?.as_f64();
        let e0 = e0.unwrap_or(energy);
        Ok(Sample {
            t,
            l2_norm: l2,
            seminorm,
            energy,
            nehari,
            dissipation,
            residual: dissipation + energy - e0,
            int_l2,
        })
    }

    /// Integrates from nodal initial data `u0`.
    pub fn run(&self, u0: &[S]) -> Result<TrajectoryRecord> {
        let c0 = self.project(u0)?;
        self.run_coeffs(&c0)
    }

    pub fn run_coeffs(&self, c0: &[S]) -> Result<TrajectoryRecord> {
        let cfg = &self.cfg;
        let pr = self.pr;
        let first = self.sample(c0, 0.0, 0.0, 0.0, None)?;
        let e0 = first.energy;
        let n0 = first.l2_norm;
        let mut samples = vec![first];
        if c0.iter().all(|v| *v == S::zero()) {
            let mut last = first;
            last.t = cfg.t_end;
            samples.push(last);
            return Ok(TrajectoryRecord {
                samples,
                status: Status::GlobalHorizon,
                accepted_steps: 0,
                rejected_steps: 0,
                last_dt: cfg.dt0,
                final_state: vec![0.0; pr.mesh().nodes],
            });
        }
        let mut c = c0.to_vec();
        let mut t = 0.0f64;
        let mut dt = cfg.dt0;
        let mut dissipation = 0.0f64;
        let mut int_l2 = 0.0f64;
        let mut n_sq = n0 * n0;
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut err_prev = 1.0f64;
        let mut next_mark = cfg.sample_every;
        let status = loop {
            if t >= cfg.t_end * (1.0 - 1e-14) {
                break Status::GlobalHorizon;
            }
            if accepted >= cfg.max_steps {
                break Status::SolverFailure { t, reason: format!("step budget {} exhausted", cfg.max_steps) };
            }
            let h = dt.min(cfg.t_end - t);
            let attempt: std::result::Result<(Vec<S>, f64), String> = match cfg.scheme {
                Scheme::ImplicitEulerNewton | Scheme::CrankNicolsonNewton => match self.step(&c, S::lit(h)) {
                    Ok(cn) => {
                        if cfg.adaptive {
                            let diff: Vec<S> = cn.iter().zip(&c).map(|(&a, &b)| a - b).collect();
                            let dn = pr.l2_norm_sq_coeffs(&diff).as_f64().max(0.0).sqrt();
                            let nn = pr.l2_norm_sq_coeffs(&cn).as_f64().max(0.0).sqrt();
                            Ok((cn, dn / nn.max(f64::MIN_POSITIVE) / cfg.max_rel_change))
                        } else {
                            Ok((cn, 0.0))
                        }
                    }
                    Err(e) => Err(e.to_string()),
                },
                Scheme::ExplicitAdaptive => match self.explicit_step(&c, S::lit(h)) {
                    Ok((cn, err)) => Ok((cn, err.as_f64())),
                    Err(e) => Err(e.to_string()),
                },
            };
            let (cn, err) = match attempt {
                Ok((cn, err)) if err <= 1.0 && cn.iter().all(|v| v.is_finite()) => (cn, err),
                other => {
                    rejected += 1;
                    let reason = match other {
                        Err(e) => e,
                        Ok(_) => "step rejected by error control".to_string(),
                    };
                    let shrink = match (&cfg.scheme, &other_err_factor(&reason)) {
                        (Scheme::ExplicitAdaptive, Some(f)) => *f,
                        _ => 0.5,
                    };
                    dt = h * shrink;
                    if dt < cfg.dt_min {
                        let n = n_sq.sqrt();
                        break if n >= cfg.blowup_factor * n0 {
                            Status::BlownUp { t_blow: t }
                        } else {
                            Status::SolverFailure { t, reason }
                        };
                    }
                    continue;
                }
            };
            let diff: Vec<S> = cn.iter().zip(&c).map(|(&a, &b)| a - b).collect();
            let dn_sq = pr.l2_norm_sq_coeffs(&diff).as_f64();
            let nn_sq = pr.l2_norm_sq_coeffs(&cn).as_f64();
            dissipation += dn_sq / h;
            int_l2 += 0.5 * h * (n_sq + nn_sq);
            n_sq = nn_sq;
            t += h;
            c = cn;
            accepted += 1;
            let vanished = n_sq.sqrt() < cfg.vanish_factor * n0;
            let at_end = t >= cfg.t_end * (1.0 - 1e-14);
            let mut mark = false;
            if let (Some(m), Some(every)) = (next_mark, cfg.sample_every) {
                if t >= m * (1.0 - 1e-12) {
                    mark = true;
                    let mut m2 = m;
                    while m2 <= t * (1.0 + 1e-12) {
                        m2 += every;
                    }
                    next_mark = Some(m2);
                }
            }
            if accepted.is_multiple_of(cfg.output_stride) || vanished || at_end || mark {
                samples.push(self.sample(&c, t, dissipation, int_l2, Some(e0))?);
            }
            if vanished {
                break Status::Vanished { t };
            }
            match cfg.scheme {
                Scheme::ImplicitEulerNewton | Scheme::CrankNicolsonNewton => {
                    if cfg.adaptive {
                        let grow = if err < 0.25 { 1.5 } else if err > 0.8 { 0.9 } else { 1.0 };
                        dt = (h * grow).min(cfg.dt_max).max(cfg.dt_min);
                    } else {
                        dt = (dt * 2.0).min(cfg.dt0);
                    }
                }
                Scheme::ExplicitAdaptive => {
                    let e = err.max(1e-10);
                    let fac = 0.9 * e.powf(-0.7 / 3.0) * err_prev.powf(0.4 / 3.0);
                    err_prev = e;
                    dt = (h * fac.clamp(0.2, 5.0)).min(cfg.dt_max);
                }
            }
        };
        if let Status::BlownUp { .. } | Status::SolverFailure { .. } = status {
            let last_t = samples.last().map(|s| s.t).unwrap_or(0.0);
            if last_t < t {
                if let Ok(s) = self.sample(&c, t, dissipation, int_l2, Some(e0)) {
                    samples.push(s);
                }
            }
        }
        Ok(TrajectoryRecord {
            samples,
            status,
            accepted_steps: accepted,
            rejected_steps: rejected,
            last_dt: dt,
            final_state: pr.basis.to_nodal(&c).iter().map(|v| v.as_f64()).collect(),
        })
    }
}

fn other_err_factor(reason: &str) -> Option<f64> {
    if reason.contains("error control") {
        Some(0.3)
    } else {
        None
    }
}

/// Convenience wrapper around [`Integrator::run`].
pub fn run<S: Real>(pr: &Problem<S>, u0: &[S], cfg: &IntegratorConfig) -> Result<TrajectoryRecord> {
    Integrator::new(pr, cfg.clone())?.run(u0)
}

/// `max_k |r_k|`.
pub fn energy_identity_residual(record: &TrajectoryRecord) -> f64 {
    record.samples.iter().fold(0.0, |a, s| a.max(s.residual.abs()))
}

/// Maximum over interior samples of `|d/dt ½‖u‖² + I| / max_k |I_k|`, with centred differences.
pub fn nehari_identity_check(record: &TrajectoryRecord) -> f64 {
    let s = &record.samples;
    let scale = s.iter().fold(0.0f64, |a, p| a.max(p.nehari.abs()));
    if s.len() < 3 || scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for k in 1..s.len() - 1 {
        let (a, b) = (&s[k - 1], &s[k + 1]);
        let fd = 0.5 * (b.l2_norm.powi(2) - a.l2_norm.powi(2)) / (b.t - a.t);
        worst = worst.max((fd + s[k].nehari).abs() / scale);
    }
    worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub what: String,
}

/// Checks `I > 0, E < d̂` on every sample of a W-run, or `I < 0` on a V-run.
pub fn well_invariance_monitor(record: &TrajectoryRecord, d_hat: f64, region: Region) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in &record.samples {
        match region {
            Region::W => {
                if !(s.nehari > 0.0) {
                    out.push(Violation { t: s.t, what: format!("I = {:e} is not positive", s.nehari) });
                }
                if !(s.energy < d_hat) {
                    out.push(Violation { t: s.t, what: format!("E = {:e} is not below {d_hat:e}", s.energy) });
                }
            }
            Region::V if !(s.nehari < 0.0) => {
                out.push(Violation { t: s.t, what: format!("I = {:e} is not negative", s.nehari) });
            }
            _ => {}
        }
    }
    out
}

/// Auxiliary function `M(t) = ∫₀^t‖u‖² + (T − t)‖u₀‖² + b(t + a)²` of the concavity argument.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcavityMonitor {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub theta: f64,
    pub big_t: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest slope increase of `M^{−θ}` relative to the largest slope magnitude.
    pub max_violation: f64,
    pub concave: bool,
}

impl ConcavityMonitor {
    /// Uses the parameters minimizing the blow-up time bound.
    pub fn new(alpha: f64, d_hat: f64, e0: f64, u0_l2_sq: f64) -> Result<Self> {
        if !(alpha > 2.0 && e0 < d_hat) {
            return Err(Error::BoundUndefined("concavity monitor needs alpha > 2 and E0 < d".into()));
        }
        let gap = d_hat - e0;
        let a = 2.0 * (alpha - 1.0) * u0_l2_sq / (alpha * (alpha - 2.0) * gap);
        let b = alpha * gap / (alpha - 1.0);
        let beta = 1.0 / alpha;
        let theta = (1.0 - 2.0 * beta) / (2.0 * beta);
        let big_t = a * a * b / (a * b * (alpha - 2.0) - u0_l2_sq);
        Ok(Self { a, b, beta, theta, big_t, times: Vec::new(), values: Vec::new(), max_violation: 0.0, concave: true })
    }

    pub fn m_of(&self, t: f64, int_l2: f64, u0_l2_sq: f64) -> f64 {
        int_l2 + (self.big_t - t) * u0_l2_sq + self.b * (t + self.a).powi(2)
    }

    /// Evaluates `M^{−θ}` on the record samples with `t < T` and checks its concavity.
    pub fn evaluate(&mut self, record: &TrajectoryRecord, tol: f64) {
        let n0 = record.u0_l2().powi(2);
        self.times.clear();
        self.values.clear();
        for s in record.samples.iter().filter(|s| s.t < self.big_t) {
            let m = self.m_of(s.t, s.int_l2, n0);
            self.times.push(s.t);
            self.values.push(m.powf(-self.theta));
        }
        let slopes: Vec<f64> = (1..self.times.len())
            .filter(|&k| self.times[k] > self.times[k - 1])
            .map(|k| (self.values[k] - self.values[k - 1]) / (self.times[k] - self.times[k - 1]))
            .collect();
        let scale = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        let worst = slopes.windows(2).fold(0.0f64, |a, w| a.max(w[1] - w[0]));
        self.max_violation = if scale > 0.0 { worst / scale } else { 0.0 };
        self.concave = self.max_violation <= tol;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowupAnalysis {
    pub t_blow: Option<f64>,
    pub t_star: Option<f64>,
    /// `∫₀^t ‖u‖²` at `min(1.05 T*, last sample)`.
    pub integral_at_t_star: Option<f64>,
    /// First sampled time with `∫₀^t ‖u‖²` above the divergence threshold.
    pub divergence_time: Option<f64>,
    pub bound_respected: bool,
}

pub fn blowup_analysis(record: &TrajectoryRecord, t_star: Option<f64>, divergence_threshold: f64) -> BlowupAnalysis {
    let t_blow = match record.status {
        Status::BlownUp { t_blow } => Some(t_blow),
        _ => None,
    };
    let divergence_time = record.samples.iter().find(|s| s.int_l2 > divergence_threshold).map(|s| s.t);
    let integral_at_t_star = t_star.map(|ts| record.int_l2_at(1.05 * ts));
    let bound_respected = match (t_star, divergence_time) {
        (Some(ts), Some(td)) => td <= 1.05 * ts,
        _ => false,
    };
    BlowupAnalysis { t_blow, t_star, integral_at_t_star, divergence_time, bound_respected }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayRegime {
    FiniteTime,
    Exponential,
    Algebraic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayAnalysis {
    pub regime: DecayRegime,
    pub exponent: f64,
    pub delta_prime: f64,
    pub c_star: f64,
    /// Least-squares slope of `ln ‖u‖²` against `t`.
    pub fitted_log_slope: f64,
    /// `−2(1−δ')C_*^{−2}`.
    pub predicted_log_slope: f64,
    /// Vanishing time bound for sublinear growth.
    pub t_vanish_bound: Option<f64>,
    pub t_vanished: Option<f64>,
    /// Largest `‖u(t)‖² / bound(t)` over samples.
    pub worst_ratio: f64,
    pub bound_curve_respected: bool,
    pub note: String,
}

/// Upper bound of `‖u(t)‖²` for growth exponent `g`.
pub fn decay_bound(u0_l2: f64, g: f64, g_minus: f64, delta_prime: f64, c_star: f64, t: f64) -> f64 {
    let k = (1.0 - delta_prime) * g_minus * c_star.powf(-g);
    if (g - 2.0).abs() < 1e-12 {
        u0_l2 * u0_l2 * (-2.0 * (1.0 - delta_prime) * c_star.powi(-2) * t).exp()
    } else if g < 2.0 {
        (u0_l2.powf(2.0 - g) - (2.0 - g) * k * t).max(0.0).powf(2.0 / (2.0 - g))
    } else {
        (1.0 / (u0_l2.powf(2.0 - g) + (g - 2.0) * k * t)).powf(2.0 / (g - 2.0))
    }
}

pub fn decay_analysis(record: &TrajectoryRecord, ex: &Exponents, c_star: f64, delta_prime: f64) -> DecayAnalysis {
    let s = &record.samples;
    let n0 = record.u0_l2();
    let pick = |semi: f64| if semi >= 1.0 { ex.g_minus } else { ex.g_plus };
    let g0 = pick(s[0].seminorm);
    let regime = if (g0 - 2.0).abs() < 1e-12 {
        DecayRegime::Exponential
    } else if g0 < 2.0 {
        DecayRegime::FiniteTime
    } else {
        DecayRegime::Algebraic
    };
    let mut worst = 0.0f64;
    for p in s {
        let b = decay_bound(n0, pick(p.seminorm), ex.g_minus, delta_prime, c_star, p.t);
        let y = p.l2_norm * p.l2_norm;
        let r = if b > 0.0 { y / b } else if y > 0.0 { f64::INFINITY } else { 0.0 };
        worst = worst.max(r);
    }
    let pts: Vec<(f64, f64)> = s.iter().filter(|p| p.l2_norm > 0.0).map(|p| (p.t, 2.0 * p.l2_norm.ln())).collect();
    let fitted = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx > 0.0 { sxy / sxx } else { 0.0 }
    } else {
        0.0
    };
    let t_vanish_bound = (g0 < 2.0).then(|| {
        n0.powf(2.0 - g0) / ((2.0 - g0) * (1.0 - delta_prime) * ex.g_minus * c_star.powf(-g0))
    });
    let t_vanished = match record.status {
        Status::Vanished { t } => Some(t),
        _ => None,
    };
    DecayAnalysis {
        regime,
        exponent: g0,
        delta_prime,
        c_star,
        fitted_log_slope: fitted,
        predicted_log_slope: -2.0 * (1.0 - delta_prime) * c_star.powi(-2),
        t_vanish_bound,
        t_vanished,
        worst_ratio: worst,
        bound_curve_respected: worst <= 1.0 + 1e-12,
        note: "bounds use the sampled embedding constant, a lower bound of the true constant".into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalEnergyReport {
    pub e0: f64,
    pub i0: f64,
    pub ks: Vec<usize>,
    pub energies: Vec<f64>,
    pub nehari: Vec<f64>,
    pub statuses: Vec<Status>,
    pub energies_increasing: bool,
    pub all_below_e0: bool,
    pub all_nehari_positive: bool,
    pub none_blown_up: bool,
}

/// Runs `λ_k u₀` with `λ_k = 1 − 1/k` for `k ∈ {2, 4, 8, 16}`.
pub fn critical_energy_driver<S: Real>(pr: &Problem<S>, u0: &[S], cfg: &IntegratorConfig) -> Result<CriticalEnergyReport> {
    let e0 = variational::energy(pr, u0)?.as_f64();
    let i0 = variational::nehari(pr, u0)?.as_f64();
    let ks = vec![2usize, 4, 8, 16];
    let integ = Integrator::new(pr, cfg.clone())?;
    let mut energies = Vec::new();
    let mut nehari = Vec::new();
    let mut statuses = Vec::new();
    for &k in &ks {
        let lam = S::one() - S::one() / S::from_usize_lossy(k);
        let uk: Vec<S> = u0.iter().map(|&v| lam * v).collect();
        energies.push(variational::energy(pr, &uk)?.as_f64());
        nehari.push(variational::nehari(pr, &uk)?.as_f64());
        statuses.push(integ.run(&uk)?.status);
    }
    Ok(CriticalEnergyReport {
        e0,
        i0,
        energies_increasing: energies.windows(2).all(|w| w[1] > w[0]),
        all_below_e0: energies.iter().all(|&e| e < e0),
        all_nehari_positive: nehari.iter().all(|&i| i > 0.0),
        none_blown_up: statuses.iter().all(|s| !s.is_blown_up()),
        ks,
        energies,
        nehari,
        statuses,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prediction {
    Decay,
    BlowUp,
    Unclassified,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HighEnergyReport {
    pub e0: f64,
    pub i0: f64,
    pub d_hat: f64,
    pub l2_norm: f64,
    /// `d < E₀ < g⁻(h₁⁻−g⁺)/(h₁⁻g⁺) C_{*,max} min{‖u₀‖^{g⁻}, ‖u₀‖^{g⁺}}`.
    pub corollary_holds: bool,
    pub lambda_hat: Option<f64>,
    pub big_lambda_hat: Option<f64>,
    pub prediction: Prediction,
    pub status: Status,
    pub l2_monotone: bool,
    pub outcome_matches: bool,
}

pub fn high_energy_driver<S: Real>(
    pr: &Problem<S>,
    u0: &[S],
    cfg: &IntegratorConfig,
    d_hat: f64,
    c_star: f64,
    dirs: &[Vec<S>],
) -> Result<HighEnergyReport> {
    let e0 = variational::energy(pr, u0)?.as_f64();
    let i0 = variational::nehari(pr, u0)?.as_f64();
    let l2 = pr.l2_norm_sq_coeffs(&Integrator::new(pr, cfg.clone())?.project(u0)?).as_f64().sqrt();
    let ex = Exponents::of(pr);
    let rhs = e0 <= 0.0 || {
        let factor = ex.high_energy_factor(c_star);
        l2.powf(ex.g_minus).min(l2.powf(ex.g_plus)) > factor * e0
    };
    let corollary_holds = d_hat < e0 && rhs;
    let (lambda_hat, big_lambda_hat) = match variational::nehari_extrema(pr, e0, dirs) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    };
    let prediction = if corollary_holds || (i0 < 0.0 && big_lambda_hat.is_some_and(|b| l2 >= b)) {
        Prediction::BlowUp
    } else if i0 > 0.0 && lambda_hat.is_some_and(|a| l2 <= a) {
        Prediction::Decay
    } else {
        Prediction::Unclassified
    };
    let rec = run(pr, u0, cfg)?;
    let (l2_monotone, outcome_matches) = match prediction {
        Prediction::Decay => {
            let m = rec.l2_monotone(true, 1e-12);
            (m, m && !rec.status.is_blown_up() && !matches!(rec.status, Status::SolverFailure { .. }))
        }
        Prediction::BlowUp => {
            let m = rec.l2_monotone(false, 1e-12);
            (m, m && rec.status.is_blown_up())
        }
        Prediction::Unclassified => (false, false),
    };
    Ok(HighEnergyReport {
        e0,
        i0,
        d_hat,
        l2_norm: l2,
        corollary_holds,
        lambda_hat,
        big_lambda_hat,
        prediction,
        status: rec.status,
        l2_monotone,
        outcome_matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_space::{Discretization, Mesh1D};
    use crate::nfunction::KernelFamily;
    use crate::source::SourceFamily;

    fn problem(p: f64, src: SourceFamily<f64>, m: usize) -> Problem<f64> {
        let mesh = Mesh1D::new(1.0, m).unwrap();
        let k = KernelFamily::power(p, 0.4, 1.0).unwrap();
        Problem::nodal(Discretization::new(mesh, &k).unwrap(), src).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let pr = problem(2.0, SourceFamily::single_power(3.0, 1.0, 1.0).unwrap(), 12);
        let rec = run(&pr, &[0.0; 12], &IntegratorConfig::default()).unwrap();
        assert_eq!(rec.status, Status::GlobalHorizon);
        assert_eq!(energy_identity_residual(&rec), 0.0);
        assert_eq!(nehari_identity_check(&rec), 0.0);
    }

    #[test]
    fn linear_implicit_step_scales_first_mode() {
        let pr = problem(2.0, SourceFamily::zero(1.0), 16);
        let k = pr.stiffness(&[0.0; 16]).unwrap();
        let (vals, vecs) = linalg::generalized_symmetric_eigen(&k, pr.mass(), 16).unwrap();
        let integ = Integrator::new(&pr, IntegratorConfig::fixed_step(1e-3, 1.0)).unwrap();
        let c1 = integ.implicit_step(&vecs[0], 1e-3).unwrap();
        let f = 1.0 / (1.0 + 1e-3 * vals[0]);
        for (a, b) in c1.iter().zip(&vecs[0]) {
            assert!((a - f * b).abs() < 1e-10 * b.abs().max(1e-3));
        }
    }

    #[test]
    fn implicit_and_explicit_agree_on_small_step() {
        let pr = problem(2.5, SourceFamily::single_power(3.0, 1.0, 1.0).unwrap(), 12);
        let u: Vec<f64> = (1..=12).map(|i| (std::f64::consts::PI * i as f64 / 13.0).sin()).collect();
        let integ = Integrator::new(&pr, IntegratorConfig::default()).unwrap();
        let a = integ.implicit_step(&u, 1e-5).unwrap();
        let (b, _) = integ.explicit_step(&u, 1e-5).unwrap();
        let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(d <= 1e-6 * n, "{d}");
    }

    #[test]
    fn concavity_parameters_give_t_star() {
        let m = ConcavityMonitor::new(3.0, 0.1, 0.0, 1.0).unwrap();
        let ts = variational::blowup_time_bounds(1.0, 0.1, 0.0, 3.0, None).unwrap().t_star;
        assert!((m.big_t - ts).abs() < 1e-9 * ts);
        assert!((m.theta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decay_bounds_start_at_initial_norm() {
        for g in [1.5, 2.0, 3.0] {
            assert!((decay_bound(0.7, g, g, 0.5, 1.3, 0.0) - 0.49).abs() < 1e-14);
        }
    }
}
