#![allow(dead_code)]

use fracwell::field::Field;
use fracwell::mesh_space::{Discretization, Mesh1D};
use fracwell::nfunction::{KernelFamily, KernelVariant, OrliczShape};
use fracwell::operator::Problem;
use fracwell::source::{SourceFamily, SourceVariant};

pub const PI: f64 = std::f64::consts::PI;

pub fn power_problem(p: f64, s: f64, q: f64, m: usize) -> Problem<f64> {
    let mesh = Mesh1D::new(1.0, m).unwrap();
    let k = KernelFamily::power(p, s, 1.0).unwrap();
    let src = if q > 0.0 { SourceFamily::single_power(q, 1.0, 1.0).unwrap() } else { SourceFamily::zero(1.0) };
    Problem::nodal(Discretization::new(mesh, &k).unwrap(), src).unwrap()
}

/// Variable exponent kernel with a two-power source.
pub fn variable_exponent_family(s: f64) -> (KernelFamily<f64>, SourceFamily<f64>) {
    let k = KernelFamily::new(
        KernelVariant::PowerVariableExponent { p: Field::parse("2 + 0.2*cos(pi*(x-y))").unwrap() },
        s,
        1.0,
    )
    .unwrap();
    let src = SourceFamily::new(
        SourceVariant::TwoPower {
            a: Field::constant(1.0),
            b: Field::constant(1.0),
            q1: Field::parse("2.5 + 0.05*sin(pi*x)").unwrap(),
            q2: Field::parse("3.5 + 0.05*sin(pi*x)").unwrap(),
        },
        1.0,
    )
    .unwrap();
    (k, src)
}

pub fn double_phase_family(s: f64) -> KernelFamily<f64> {
    KernelFamily::new(KernelVariant::DoublePhase { p: 2.0, q: 3.5, a: Field::parse("0.5 + x*y").unwrap() }, s, 1.0).unwrap()
}

pub fn power_log_family(s: f64) -> KernelFamily<f64> {
    KernelFamily::new(KernelVariant::OrliczScalar(OrliczShape::PowerLog { p: 1.8 }), s, 1.0).unwrap()
}

pub fn sine(m: usize, k: f64) -> Vec<f64> {
    (1..=m).map(|i| (k * PI * i as f64 / (m + 1) as f64).sin()).collect()
}

pub fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|a| a * c).collect()
}

/// Prints one acceptance line and fails the test when `pass` is false.
pub fn verdict(id: u32, title: &str, pass: bool, detail: &str) {
    println!("criterion {id:>2} [{}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}
