use ncclab::bounds::{
    born_delta_a, check_jost_stability, check_jost_tail, check_krein_l1, check_product_perturbation,
    check_recursive_perturbation, check_sequence_bound, halving_family, product_perturbation_suite,
    random_admissible_sequence, sequence_bound_suite, sequence_constant, PerturbationTrial,
};
use ncclab::dirac::transition_tol;
use ncclab::linalg::Mat2;
use ncclab::potential::Template;
use ncclab::{PotentialSpec, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-11;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbation_bounds_hold(seed in any::<u64>(), n in 1usize..=64, scale in 0.2f64..1.5, eps in 1e-6f64..1e-2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = PerturbationTrial::random(&mut rng, n, scale, eps).unwrap();
        prop_assert!(check_product_perturbation(&t).iter().all(|c| c.holds));
        prop_assert!(check_recursive_perturbation(&t).iter().all(|c| c.holds));
    }

    #[test]
    fn admissible_sequences_obey_the_bound(seed in any::<u64>(), c in 0.0f64..3.0, n0 in 0usize..8, x0 in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = random_admissible_sequence(&mut rng, x0, c, n0, 50);
        prop_assert!(check_sequence_bound(&seq, c, n0).unwrap().holds);
    }
}

#[test]
fn zero_perturbation_is_exact() {
    let x = Mat2::new(C64::new(0.3, 0.1), C64::new(-0.2, 0.0), C64::new(0.0, 0.5), C64::new(0.9, -0.1));
    let t = PerturbationTrial::new(vec![x; 5], vec![Mat2::ZERO; 5]).unwrap();
    assert!(check_product_perturbation(&t).iter().all(|c| c.lhs == 0.0 && c.holds));
    assert!(check_recursive_perturbation(&t).iter().all(|c| c.lhs == 0.0 && c.holds));
    assert!(PerturbationTrial::new(vec![x; 2], vec![Mat2::ZERO; 3]).is_err());
    assert!(PerturbationTrial::new(vec![x; 65], vec![Mat2::ZERO; 65]).is_err());
}

#[test]
fn single_factor_base_case() {
    let x = Mat2::diag(C64::new(2.0, 0.0), C64::new(0.5, 0.0));
    let d = Mat2::new(C64::new(0.0, 0.0), C64::new(1e-3, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let t = PerturbationTrial::new(vec![x], vec![d]).unwrap();
    let c = check_product_perturbation(&t)[0];
    assert!((c.lhs - 1e-3).abs() < 1e-15);
    assert!((c.rhs - (1.0 + 4.0 + 2e-3) * 1e-3).abs() < 1e-15);
}

#[test]
fn sequence_constant_against_direct_product() {
    let (c, n0) = (1.0, 3);
    let p: f64 = (n0..200).map(|j| 1.0 + c * (-(j as f64)).exp()).product();
    let e = std::f64::consts::E;
    let expected = ((p - 1.0) * (n0 as f64).exp()).max(p * c * e / (e - 1.0));
    assert!((sequence_constant(c, n0) - expected).abs() < 1e-12 * expected);

    // The extremal sequence from x_{n₀} = 0.
    let mut x = 0.0;
    let mut seq = vec![x];
    for j in n0..n0 + 100 {
        let t = c * (-(j as f64)).exp();
        x = (1.0 + t) * x + t;
        seq.push(x);
    }
    let check = check_sequence_bound(&seq, c, n0).unwrap();
    assert!(check.holds);
    assert!(check.lhs > 0.5 * check.rhs, "bound should be within a small factor of the extremal case");
}

#[test]
fn zero_potential_bounds_are_trivial() {
    let zero = PotentialSpec::zero();
    let tails = check_jost_tail(&zero, 1.3, &[-2.0, 0.0, 5.0], TOL).unwrap();
    assert!(tails.iter().all(|c| c.lhs == 0.0 && c.holds));
    let ks = [C64::new(0.0, 0.0), C64::new(3.0, 0.0), C64::new(-1.0, 0.5)];
    let l1 = check_krein_l1(&zero, &ks, &[0.5, 2.0], TOL).unwrap();
    assert!(l1.iter().all(|c| (c.lhs - 1.0).abs() < 1e-14 && c.holds));
}

#[test]
fn krein_l1_and_jost_tail_hold_for_a_bump() {
    let q = PotentialSpec::bump(Template::SmoothBump, 0.0, 2.0, C64::new(1.5, -0.5)).unwrap();
    let xs: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
    assert!(check_jost_tail(&q, 0.8, &xs, TOL).unwrap().iter().all(|c| c.holds));
    let a = q.translate(1.0).unwrap();
    let ks = [C64::new(0.0, 0.0), C64::new(2.0, 0.1), C64::new(-4.0, 1.0)];
    assert!(check_krein_l1(&a, &ks, &[0.5, 1.0, 2.0], TOL).unwrap().iter().all(|c| c.holds));
    assert!(check_krein_l1(&a, &[C64::new(0.0, -0.1)], &[1.0], TOL).is_err());
}

#[test]
fn born_term_matches_small_perturbation() {
    let q = PotentialSpec::bump(Template::SmoothBump, 0.0, 2.0, C64::new(0.8, 0.3)).unwrap();
    let v = PotentialSpec::bump(Template::SmoothBump, 0.3, 1.0, C64::new(-0.4, 0.9)).unwrap().scaled(1e-5);
    let xi = 0.7;
    let born = born_delta_a(&q, &v, xi, 1e-12).unwrap();
    let direct = transition_tol(&PotentialSpec::sum(vec![q.clone(), v.clone()]).unwrap(), xi, 1e-12).unwrap().a
        - transition_tol(&q, xi, 1e-12).unwrap().a;
    assert!((born - direct).norm() < 1e-3 * direct.norm(), "born {born} direct {direct}");
}

#[test]
fn jost_stability_is_linear() {
    let q = PotentialSpec::bump(Template::SmoothBump, 0.0, 2.0, C64::new(0.8, 0.3)).unwrap();
    let v = PotentialSpec::bump(Template::SmoothBump, 0.3, 1.0, C64::new(-0.4, 0.9)).unwrap().scaled(1e-2);
    let r = check_jost_stability(&q, &halving_family(&v, 6), 0.7, TOL).unwrap();
    assert!(r.holds && (r.slope_a - 1.0).abs() < 0.05, "slope {}", r.slope_a);
    assert!(check_jost_stability(&q, &halving_family(&v, 3), 0.7, TOL).is_err());
}

#[test]
fn suites_are_reproducible() {
    let a = product_perturbation_suite(7, 50).unwrap();
    let b = product_perturbation_suite(7, 50).unwrap();
    assert_eq!(a, b);
    assert!(a.passed());
    let s = sequence_bound_suite(11, 50).unwrap();
    assert!(s.passed() && s.trials.len() == 50);
    assert_ne!(product_perturbation_suite(8, 50).unwrap().trials, a.trials);
}
