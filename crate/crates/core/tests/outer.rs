use ncclab::krein::limits_ab_tol;
use ncclab::outer::{
    boundary_arg, linear_fit, maximal_strong, maximal_weak, outer_extend, sum_rule, unwrapped_arg_along_ray, LogModTable,
    Mode, StolzGrid,
};
use ncclab::{PotentialSpec, C64};
use proptest::prelude::*;

const TOL: f64 = 1e-11;

/// `(k + 2i)/(k + i)` is analytic and zero-free in `Im k > -1` and tends to
/// 1, so it is its own outer function.
fn rational(k: C64) -> C64 {
    (k + C64::new(0.0, 2.0)) / (k + C64::new(0.0, 1.0))
}

fn rational_table() -> LogModTable {
    LogModTable::from_fn(|s| Ok(rational(C64::new(s, 0.0)).norm().ln()), 200.0, 0.05).unwrap()
}

#[test]
fn outer_of_a_rational_function() {
    let table = rational_table();
    for k in [C64::new(0.0, 0.5), C64::new(-3.0, 1.0), C64::new(7.0, 4.0), C64::new(0.4, 0.05)] {
        let f = outer_extend(&table, k).unwrap();
        let exact = rational(k);
        assert!((f / exact - 1.0).norm() < 1e-4, "k = {k}: {f} vs {exact}");
    }
    for xi in [-5.0, -0.3, 0.0, 1.1, 6.0] {
        let arg = boundary_arg(&table, xi).unwrap();
        let exact = rational(C64::new(xi, 0.0)).arg();
        assert!((arg - exact).abs() < 1e-4, "ξ = {xi}: {arg} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn outer_modulus_dominates_one(kr in -10.0f64..10.0, ki in 0.01f64..10.0) {
        // The boundary log-modulus is positive, so its Poisson extension is too.
        let f = outer_extend(&rational_table(), C64::new(kr, ki)).unwrap();
        prop_assert!(f.norm() >= 1.0 - 1e-6);
    }

    #[test]
    fn fit_recovers_a_line(slope in -5.0f64..5.0, intercept in -5.0f64..5.0) {
        let xs: Vec<f64> = (0..7).map(|i| i as f64 * 0.7 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10 && (fit.intercept - intercept).abs() < 1e-10);
    }
}

#[test]
fn outer_extension_matches_direct_krein() {
    let p = PotentialSpec::standard_bump();
    let table = LogModTable::krein(&p, Some(1.0), 200.0, 0.05, TOL).unwrap();
    for k in [C64::new(0.3, 0.7), C64::new(-1.5, 1.2), C64::new(2.0, 3.0)] {
        let direct = limits_ab_tol(&p, k, TOL).unwrap().a_frak;
        let outer = outer_extend(&table, k).unwrap();
        assert!((outer / direct - 1.0).norm() < 1e-3);
    }
}

#[test]
fn ray_trace_ends_at_the_boundary_arg() {
    let p = PotentialSpec::standard_bump();
    let table = LogModTable::krein(&p, Some(1.0), 200.0, 0.05, TOL).unwrap();
    for xi in [-0.8, 0.4, 1.5] {
        let trace = unwrapped_arg_along_ray(&p, 1.0, xi, None, Mode::Krein).unwrap();
        assert!(trace.min_modulus() >= 1.0 - 1e-6);
        assert!(trace.path.windows(2).all(|w| w[1].im < w[0].im));
        let outer = boundary_arg(&table, xi).unwrap();
        assert!((trace.final_arg() - outer).abs() < 1e-3, "ξ = {xi}: ray {} vs outer {outer}", trace.final_arg());
    }
}

#[test]
fn krein_sum_rule() {
    let r = sum_rule(&PotentialSpec::standard_bump(), Mode::Krein).unwrap();
    assert!(r.residual < 1e-3, "residual {}", r.residual);
    let zero = sum_rule(&PotentialSpec::zero(), Mode::Dirac).unwrap();
    assert_eq!(zero.rhs, 0.0);
}

#[test]
fn strong_maximal_function_dominates_weak() {
    let p = PotentialSpec::standard_bump();
    let cutoffs = [0.5, 1.0];
    let weak = maximal_weak(&p, 0.7, &cutoffs, Mode::Krein).unwrap();
    let grid = StolzGrid { levels: 3, per_level: 3, ..StolzGrid::default() };
    let strong = maximal_strong(&p, 0.7, &cutoffs, &grid, Mode::Krein).unwrap();
    assert!(strong.sup_value >= weak.sup_value);
    assert_eq!(strong.stolz_samples.as_ref().map(Vec::len), Some(grid.n_samples()));
    assert!(maximal_strong(&p, 0.7, &cutoffs, &StolzGrid { per_level: 2, ..grid }, Mode::Krein).is_err());
}
