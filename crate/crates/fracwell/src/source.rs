//! Source nonlinearities `f(x, t)`, primitives `F` and their growth constants.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::nfunction::{ConditionEntry, KernelFamily, SamplingPlan};
use crate::scalar::{pow_abs, signed_pow, Real};

#[derive(Clone, Debug)]
pub enum SourceVariant<S> {
    /// `a|t|^{q1−2}t + b|t|^{q2−2}t`.
    TwoPower { a: Field<S>, b: Field<S>, q1: Field<S>, q2: Field<S> },
    /// `coeff |t|^{q−2}t`.
    SinglePower { q: S, coeff: Field<S> },
    /// `f ≡ 0`, for linear diffusion checks only.
    Zero,
}

/// Source frozen at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalSource<S> {
    pub a: S,
    pub b: S,
    pub q1: S,
    pub q2: S,
}

impl<S: Real> LocalSource<S> {
    #[inline]
    pub fn f(&self, t: S) -> S {
        let mut v = S::zero();
        if self.a != S::zero() {
            v = v + self.a * signed_pow(t, self.q1 - S::one());
        }
        if self.b != S::zero() {
            v = v + self.b * signed_pow(t, self.q2 - S::one());
        }
        v
    }

    #[inline]
    pub fn big_f(&self, t: S) -> S {
        let mut v = S::zero();
        if self.a != S::zero() {
            v = v + self.a * pow_abs(t, self.q1) / self.q1;
        }
        if self.b != S::zero() {
            v = v + self.b * pow_abs(t, self.q2) / self.q2;
        }
        v
    }

    #[inline]
    pub fn f_prime(&self, t: S) -> S {
        let two = S::lit(2.0);
        let mut v = S::zero();
        if self.a != S::zero() {
            v = v + self.a * (self.q1 - S::one()) * pow_abs(t, self.q1 - two);
        }
        if self.b != S::zero() {
            v = v + self.b * (self.q2 - S::one()) * pow_abs(t, self.q2 - two);
        }
        v
    }

    /// Power decomposition `F = Σ c_i |t|^{e_i}/e_i`.
    pub fn phases(&self) -> ([(S, S); 2], usize) {
        let mut out = [(S::zero(), S::one()); 2];
        let mut n = 0;
        if self.a != S::zero() {
            out[n] = (self.a, self.q1);
            n += 1;
        }
        if self.b != S::zero() {
            out[n] = (self.b, self.q2);
            n += 1;
        }
        (out, n)
    }
}

#[derive(Clone, Debug)]
pub struct SourceFamily<S> {
    pub variant: SourceVariant<S>,
    pub length: S,
    h1: (S, S),
    h2: (S, S),
}

/// Growth constants `A` and `B`.
#[derive(Clone, Copy, Debug)]
pub struct GrowthConstants<S> {
    pub a: S,
    pub b: S,
    /// The supremum defining `A` sits at an end of the sampled t-range.
    pub a_at_range_end: bool,
}

impl<S: Real> SourceFamily<S> {
    pub fn new(variant: SourceVariant<S>, length: S) -> Result<Self> {
        let k = 257;
        let (h1, h2) = match &variant {
            SourceVariant::TwoPower { q1, q2, a, b } => {
                let (alo, _) = a.range1(length, k);
                let (blo, _) = b.range1(length, k);
                if alo < S::zero() || blo < S::zero() {
                    return Err(Error::Config("source coefficients must be nonnegative".into()));
                }
                (q1.range1(length, k), q2.range1(length, k))
            }
            SourceVariant::SinglePower { q, .. } => ((*q, *q), (*q, *q)),
            SourceVariant::Zero => ((S::lit(2.0), S::lit(2.0)), (S::lit(2.0), S::lit(2.0))),
        };
        if !(h1.0 > S::one()) || !(h2.0 > S::one()) {
            return Err(Error::Config("source exponents must exceed 1".into()));
        }
        Ok(Self { variant, length, h1, h2 })
    }

    pub fn single_power(q: f64, coeff: f64, length: f64) -> Result<Self> {
        Self::new(
            SourceVariant::SinglePower { q: S::lit(q), coeff: Field::constant(coeff) },
            S::lit(length),
        )
    }

    pub fn zero(length: f64) -> Self {
        Self::new(SourceVariant::Zero, S::lit(length)).expect("zero source")
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.variant, SourceVariant::Zero)
    }

    pub fn local(&self, x: S) -> LocalSource<S> {
        let l = self.length;
        match &self.variant {
            SourceVariant::TwoPower { a, b, q1, q2 } => LocalSource {
                a: a.at(x, x, l),
                b: b.at(x, x, l),
                q1: q1.at(x, x, l),
                q2: q2.at(x, x, l),
            },
            SourceVariant::SinglePower { q, coeff } => LocalSource {
                a: coeff.at(x, x, l),
                b: S::zero(),
                q1: *q,
                q2: *q,
            },
            SourceVariant::Zero => LocalSource {
                a: S::zero(),
                b: S::zero(),
                q1: S::lit(2.0),
                q2: S::lit(2.0),
            },
        }
    }

    pub fn eval_f(&self, x: S, t: S) -> S {
        self.local(x).f(t)
    }

    pub fn eval_big_f(&self, x: S, t: S) -> S {
        self.local(x).big_f(t)
    }

    pub fn eval_f_prime(&self, x: S, t: S) -> S {
        self.local(x).f_prime(t)
    }

    /// `h₁(x)`, lower exponent field.
    pub fn h1(&self, x: S) -> S {
        self.local(x).q1
    }

    /// `h₂(x)`, upper exponent field.
    pub fn h2(&self, x: S) -> S {
        self.local(x).q2
    }

    pub fn h1_minus(&self) -> S {
        self.h1.0
    }
    pub fn h1_plus(&self) -> S {
        self.h1.1
    }
    pub fn h2_minus(&self) -> S {
        self.h2.0
    }
    pub fn h2_plus(&self) -> S {
        self.h2.1
    }

    fn x_samples(&self, k: usize) -> Vec<S> {
        (0..k)
            .map(|i| self.length * S::from_usize_lossy(i) / S::from_usize_lossy(k - 1))
            .collect()
    }

    /// `A` from the piecewise bound (`h₂` for |t| ≥ 1, `h₁` below) and `B = min_x min F(x, ±1)`.
    pub fn growth_constants(&self, t_lo: S, t_hi: S) -> Result<GrowthConstants<S>> {
        if !(t_lo > S::zero() && t_lo < S::one() && t_hi > S::one()) {
            return Err(Error::Domain("t_range must satisfy 0 < t_lo < 1 < t_hi".into()));
        }
        let n = 2001;
        let (a0, b0) = (t_lo.ln(), t_hi.ln());
        let mut ts: Vec<S> = (0..n)
            .map(|i| (a0 + (b0 - a0) * S::from_usize_lossy(i) / S::from_usize_lossy(n - 1)).exp())
            .collect();
        ts.push(S::one());
        let mut a_max = S::zero();
        let mut at_end = false;
        let mut b_min = S::infinity();
        for x in self.x_samples(65) {
            let l = self.local(x);
            let (h1, h2) = (self.h1(x), self.h2(x));
            for (i, &t) in ts.iter().enumerate() {
                for sign in [S::one(), -S::one()] {
                    let tt = sign * t;
                    let e = if t >= S::one() { h2 } else { h1 };
                    let r = l.big_f(tt) / pow_abs(tt, e);
                    if r > a_max {
                        a_max = r;
                        at_end = i == 0 || i == n - 1;
                    }
                }
            }
            b_min = b_min.min(l.big_f(S::one()).min(l.big_f(-S::one())));
        }
        if !(b_min > S::zero()) {
            return Err(Error::condition("f0", format!("B = {b_min} is not positive")));
        }
        Ok(GrowthConstants { a: a_max, b: b_min, a_at_range_end: at_end })
    }

    /// Blow-up exponent `α` validated by sampling `t(f′t − (α−1)f) > 0`.
    pub fn select_alpha(&self, family: &KernelFamily<S>) -> Result<S> {
        let gp = family.g_plus();
        let two = S::lit(2.0);
        let alpha = if gp > two { gp } else { (two + self.h1_minus()) / two };
        let plan = SamplingPlan::default();
        if let Some(w) = self.f3_witness(alpha, &plan) {
            return Err(Error::BoundUndefined(format!("no admissible alpha (tried {alpha}): {w}")));
        }
        Ok(alpha)
    }

    /// First sample violating `t(f′t − (κ−1)f) > 0`, if any.
    fn f3_witness(&self, kappa: S, plan: &SamplingPlan) -> Option<String> {
        let ts: Vec<S> = plan.t_grid();
        for x in self.x_samples(17) {
            let l = self.local(x);
            for &t in &ts {
                for tt in [t, -t] {
                    let v = tt * (l.f_prime(tt) * tt - (kappa - S::one()) * l.f(tt));
                    if !(v > S::zero()) {
                        return Some(format!("t(f't - ({kappa}-1)f) = {v:e} at x={x}, t={tt:e}"));
                    }
                }
            }
        }
        None
    }
}

/// Entries (f0)–(f3) and (f̃3) for the structural report.
pub fn source_conditions<S: Real>(
    src: &SourceFamily<S>,
    family: &KernelFamily<S>,
    plan: &SamplingPlan,
) -> Vec<ConditionEntry> {
    let ts: Vec<S> = plan.t_grid();
    let xs = src.x_samples(17);
    let tol = S::lit(1e-10);
    let mut out = Vec::new();

    let mut f0_ok = true;
    let mut f0_w = None;
    for &x in &xs {
        let l = src.local(x);
        if l.f(S::zero()) != S::zero() || l.f_prime(S::zero()) != S::zero() {
            f0_ok = false;
            f0_w.get_or_insert(format!("f or f' nonzero at t=0, x={x}"));
        }
    }
    let gc = src.growth_constants(S::lit(1e-6), S::lit(1e6));
    let b_val = gc.as_ref().map(|g| g.b.as_f64()).unwrap_or(0.0);
    if gc.is_err() {
        f0_ok = false;
        f0_w.get_or_insert(format!("B = {b_val} is not positive"));
    }
    out.push(ConditionEntry::new("f0", f0_ok, true, Some(b_val), f0_w));

    // (f1): convex on t > 0, concave on t < 0 via monotone f'
    let mut f1_ok = true;
    let mut f1_w = None;
    for &x in &xs {
        let l = src.local(x);
        let mut prev = S::zero();
        for &t in &ts {
            let d = l.f_prime(t);
            if d < prev * (S::one() - tol) || (l.f_prime(-t) - d).abs() > tol * d.abs() {
                f1_ok = false;
                f1_w.get_or_insert(format!("f' not monotone/even at t={t:e}, x={x}"));
            }
            prev = d;
        }
    }
    out.push(ConditionEntry::new("f1", f1_ok, true, None, f1_w));

    let mut f2_ok = true;
    let mut f2_w = None;
    for &x in &xs {
        let l = src.local(x);
        let (h1, h2) = (src.h1(x), src.h2(x));
        for &t in &ts {
            for tt in [t, -t] {
                let big = l.big_f(tt);
                let tf = tt * l.f(tt);
                if !(h1 * big <= tf * (S::one() + tol) && tf <= h2 * big * (S::one() + tol)) {
                    f2_ok = false;
                    f2_w.get_or_insert(format!("h1 F <= t f <= h2 F fails at x={x}, t={tt:e}"));
                }
            }
        }
    }
    out.push(ConditionEntry::new("f2", f2_ok, true, None, f2_w));

    let w3 = src.f3_witness(family.g_plus(), plan);
    out.push(ConditionEntry::new("f3", w3.is_none(), true, None, w3));

    match src.select_alpha(family) {
        Ok(alpha) => out.push(ConditionEntry::new("f3_tilde", true, false, Some(alpha.as_f64()), None)),
        Err(e) => out.push(ConditionEntry::new("f3_tilde", false, false, None, Some(e.to_string()))),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_values() {
        let s = SourceFamily::<f64>::single_power(4.0, 1.0, 1.0).unwrap();
        assert_eq!(s.eval_f(0.3, 2.0), 8.0);
        assert_eq!(s.eval_big_f(0.3, 2.0), 4.0);
        assert_eq!(s.eval_f(0.3, 0.0), 0.0);
        let g = s.growth_constants(1e-6, 1e6).unwrap();
        assert!((g.a - 0.25).abs() < 1e-15 && (g.b - 0.25).abs() < 1e-15);

        let two = SourceFamily::<f64>::new(
            SourceVariant::TwoPower {
                a: Field::constant(1.0),
                b: Field::constant(1.0),
                q1: Field::constant(3.0),
                q2: Field::constant(4.0),
            },
            1.0,
        )
        .unwrap();
        assert!((two.eval_big_f(0.5, 1.0) - 7.0 / 12.0).abs() < 1e-15);
        assert!((two.growth_constants(1e-6, 1e6).unwrap().b - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_selection() {
        let k3 = KernelFamily::<f64>::power(3.0, 0.2, 1.0).unwrap();
        let q4 = SourceFamily::<f64>::single_power(4.0, 1.0, 1.0).unwrap();
        assert_eq!(q4.select_alpha(&k3).unwrap(), 3.0);
        let k2 = KernelFamily::<f64>::power(2.0, 0.2, 1.0).unwrap();
        assert_eq!(q4.select_alpha(&k2).unwrap(), 3.0);
        let q25 = SourceFamily::<f64>::single_power(2.5, 1.0, 1.0).unwrap();
        assert_eq!(q25.select_alpha(&k2).unwrap(), 2.25);
        let q3 = SourceFamily::<f64>::single_power(3.0, 1.0, 1.0).unwrap();
        assert!(q3.select_alpha(&k3).is_err());
    }

    #[test]
    fn zero_source_has_no_b() {
        let z = SourceFamily::<f64>::zero(1.0);
        assert!(z.growth_constants(1e-6, 1e6).is_err());
    }
}
