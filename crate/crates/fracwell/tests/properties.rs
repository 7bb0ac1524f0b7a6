//! Property tests for the kernel, space, operator and variational invariants.

mod common;

use std::sync::OnceLock;

use common::*;
use fracwell::field::Field;
use fracwell::io;
use fracwell::mesh_space::{luxemburg_norm, modular, Discretization, GridFunction, Mesh1D, ModularKind};
use fracwell::nfunction::{KernelFamily, KernelVariant};
use fracwell::operator::Problem;
use fracwell::variational;
use proptest::prelude::*;

const M: usize = 6;

fn power_disc(p_index: usize) -> &'static Discretization<f64> {
    static CELLS: [OnceLock<Discretization<f64>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[p_index].get_or_init(|| {
        let p = [1.6, 2.0, 3.0][p_index];
        Discretization::new(Mesh1D::new(1.0, M).unwrap(), &KernelFamily::power(p, 0.4, 1.0).unwrap()).unwrap()
    })
}

fn double_phase_disc() -> &'static Discretization<f64> {
    static CELL: OnceLock<Discretization<f64>> = OnceLock::new();
    CELL.get_or_init(|| Discretization::new(Mesh1D::new(1.0, M).unwrap(), &double_phase_family(0.4)).unwrap())
}

fn problem() -> &'static Problem<f64> {
    static CELL: OnceLock<Problem<f64>> = OnceLock::new();
    CELL.get_or_init(|| power_problem(2.0, 0.4, 3.0, M))
}

fn field() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, M).prop_filter("nonzero", |v| v.iter().any(|a| a.abs() > 1e-3))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn kernels() -> Vec<KernelFamily<f64>> {
    let (vk, _) = variable_exponent_family(0.3);
    vec![
        KernelFamily::power(1.5, 0.4, 1.0).unwrap(),
        KernelFamily::power(3.5, 0.2, 1.0).unwrap(),
        vk,
        double_phase_family(0.4),
        power_log_family(0.4),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_odd_and_primitive_even(k in 0usize..5, x in 0.0..1.0f64, y in 0.0..1.0f64, t in 1e-3..1e2f64) {
        let fam = &kernels()[k];
        let g = fam.eval_g(x, y, t).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!(rel_close(fam.eval_g(x, y, -t).unwrap(), -g, 1e-14));
        prop_assert!(rel_close(fam.eval_big_g(x, y, -t).unwrap(), fam.eval_big_g(x, y, t).unwrap(), 1e-14));
    }

    #[test]
    fn kernel_ratio_stays_in_growth_band(k in 0usize..5, x in 0.0..1.0f64, y in 0.0..1.0f64, t in 1e-3..1e3f64) {
        let fam = &kernels()[k];
        let ratio = t * fam.eval_g(x, y, t).unwrap() / fam.eval_big_g(x, y, t).unwrap();
        prop_assert!(ratio >= fam.g_minus() * (1.0 - 1e-10) && ratio <= fam.g_plus() * (1.0 + 1e-10), "ratio {ratio}");
    }

    #[test]
    fn young_is_an_equality_at_the_derivative(k in 0usize..5, x in 0.0..1.0f64, t in 1e-2..1e2f64) {
        let fam = &kernels()[k];
        let g = fam.eval_g(x, x, t).unwrap();
        let lhs = fam.eval_big_g(x, x, t).unwrap() + fam.complementary(x, x, g).unwrap();
        prop_assert!(rel_close(lhs, t * g, 1e-7), "{lhs} vs {}", t * g);
    }

    #[test]
    fn kernel_derivative_matches_difference(k in 0usize..5, x in 0.0..1.0f64, y in 0.0..1.0f64, t in 0.1..10.0f64) {
        let fam = &kernels()[k];
        let h = 1e-5 * t;
        let fd = (fam.eval_g(x, y, t + h).unwrap() - fam.eval_g(x, y, t - h).unwrap()) / (2.0 * h);
        prop_assert!(rel_close(fam.eval_g_prime(x, y, t).unwrap(), fd, 1e-6));
    }

    #[test]
    fn power_modular_is_homogeneous(pi in 0usize..3, u in field(), lam in 0.05..20.0f64) {
        let d = power_disc(pi);
        let p = [1.6, 2.0, 3.0][pi];
        let scaled_u = scaled(&u, lam);
        let lhs = d.gagliardo_modular(&scaled_u).unwrap();
        let rhs = lam.powf(p) * d.gagliardo_modular(&u).unwrap();
        prop_assert!(rel_close(lhs, rhs, 1e-11));
    }

    #[test]
    fn seminorm_is_absolutely_homogeneous(u in field(), lam in -20.0..20.0f64) {
        prop_assume!(lam.abs() > 1e-3);
        for d in [power_disc(0), double_phase_disc()] {
            let a = d.gagliardo_seminorm(&scaled(&u, lam)).unwrap();
            let b = lam.abs() * d.gagliardo_seminorm(&u).unwrap();
            prop_assert!(rel_close(a, b, 1e-8), "{a} vs {b}");
        }
    }

    #[test]
    fn seminorm_satisfies_triangle_inequality(u in field(), v in field()) {
        let d = double_phase_disc();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = d.gagliardo_seminorm(&w).unwrap();
        let rhs = d.gagliardo_seminorm(&u).unwrap() + d.gagliardo_seminorm(&v).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn operator_is_odd_and_monotone(pi in 0usize..3, u in field(), v in field()) {
        let d = power_disc(pi);
        let au = d.pairing_gradient(&u);
        let neg = d.pairing_gradient(&scaled(&u, -1.0));
        for (a, b) in au.iter().zip(&neg) {
            prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let av = d.pairing_gradient(&v);
        let gap: f64 = au.iter().zip(&av).zip(u.iter().zip(&v)).map(|((a, b), (x, y))| (a - b) * (x - y)).sum();
        prop_assert!(gap >= -1e-10 * (1.0 + au.iter().map(|a| a.abs()).sum::<f64>()));
    }

    #[test]
    fn operator_is_the_modular_gradient(u in field(), dir in field()) {
        let d = double_phase_disc();
        let grad = d.pairing_gradient(&u);
        let h = 1e-6;
        let plus: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
        let fd = (d.gagliardo_modular(&plus).unwrap() - d.gagliardo_modular(&minus).unwrap()) / (2.0 * h);
        let an: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        prop_assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{fd} vs {an}");
    }

    #[test]
    fn weak_pairing_matches_gradient(u in field(), phi in field()) {
        let d = power_disc(1);
        let grad = d.pairing_gradient(&u);
        let direct = d.weak_pairing(&u, &phi).unwrap();
        let via: f64 = grad.iter().zip(&phi).map(|(a, b)| a * b).sum();
        prop_assert!(rel_close(direct, via, 1e-10) || (direct - via).abs() < 1e-12);
    }

    #[test]
    fn l2_luxemburg_is_the_l2_norm(u in field()) {
        let mesh = Mesh1D::new(1.0, M).unwrap();
        let g = GridFunction::new(mesh, u).unwrap();
        let n = luxemburg_norm(&g, ModularKind::L2).unwrap();
        prop_assert!(rel_close(n, g.l2_norm(), 1e-9));
        prop_assert!(rel_close(modular(&g, ModularKind::L2), g.l2_norm().powi(2), 1e-12));
    }

    #[test]
    fn fiber_maximum_sits_on_the_nehari_set(v in field()) {
        let pr = problem();
        let ls = variational::lambda_star(pr, &v, 1.0).unwrap();
        let on = scaled(&v, ls);
        let i = variational::nehari(pr, &on).unwrap();
        let scale = pr.disc.pairing_gradient(&on).iter().zip(&on).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!(i.abs() <= 1e-8 * scale, "I = {i}, scale {scale}");
        let e = variational::energy(pr, &on).unwrap();
        for f in [0.5, 0.9, 1.1, 2.0] {
            prop_assert!(variational::energy(pr, &scaled(&v, ls * f)).unwrap() <= e * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_targeting_hits_both_sides(v in field(), frac in 0.05..0.95f64) {
        let pr = problem();
        let ls = variational::lambda_star(pr, &v, 1.0).unwrap();
        let top = variational::energy(pr, &scaled(&v, ls)).unwrap();
        for side in [variational::NehariSide::Plus, variational::NehariSide::Minus] {
            let lam = variational::scale_to_energy(pr, &v, frac * top, side).unwrap();
            let e = variational::energy(pr, &scaled(&v, lam)).unwrap();
            prop_assert!(rel_close(e, frac * top, 1e-9));
            let i = variational::nehari(pr, &scaled(&v, lam)).unwrap();
            match side {
                variational::NehariSide::Plus => prop_assert!(lam <= ls && i >= 0.0),
                variational::NehariSide::Minus => prop_assert!(lam > ls && i < 0.0),
            }
        }
    }

    #[test]
    fn grid_csv_round_trips(u in field()) {
        let mesh = Mesh1D::new(1.0, M).unwrap();
        let bytes = io::grid_csv(&mesh, &u).unwrap();
        let back = io::read_grid_csv(mesh, std::str::from_utf8(&bytes).unwrap()).unwrap();
        prop_assert_eq!(back.values, u);
    }

    #[test]
    fn constant_field_expressions_agree(c in -10.0..10.0f64, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let parsed = Field::parse(&format!("{c:e}")).unwrap();
        prop_assert!(rel_close(parsed.at(x, y, 1.0), Field::constant(c).at(x, y, 1.0), 1e-15) || c == 0.0);
    }
}

#[test]
fn distance_only_fields_are_detected() {
    assert!(Field::parse("2 + 0.2*cos(pi*(x-y))").unwrap().depends_on_distance_only(1.0));
    assert!(!Field::parse("0.5 + x*y").unwrap().depends_on_distance_only(1.0));
    let k = KernelFamily::new(KernelVariant::PowerVariableExponent { p: Field::parse("2.5").unwrap() }, 0.3, 1.0).unwrap();
    assert!(k.is_uniform());
}
