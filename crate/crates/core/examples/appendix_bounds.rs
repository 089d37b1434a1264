//! Randomized checks of the perturbation and sequence lemmas, plus the
//! Jost tail and Krein growth bounds on a bump.

use ncclab::bounds::{
    check_jost_tail, check_krein_l1, product_perturbation_suite, recursive_perturbation_suite, sequence_bound_suite,
};
use ncclab::{PotentialSpec, C64};

fn main() -> ncclab::Result<()> {
    let seed = 20_190_615;
    for s in [product_perturbation_suite(seed, 500)?, recursive_perturbation_suite(seed, 500)?, sequence_bound_suite(seed, 500)?] {
        let worst = s.trials.iter().map(|t| t.lhs / t.rhs.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        println!("{:<24} {} trials, {} violations, worst lhs/rhs {worst:.4}", s.suite, s.trials.len(), s.violations);
    }
    let q = PotentialSpec::standard_bump();
    let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let tail = check_jost_tail(&q, 1.0, &xs, 1e-11)?;
    println!("Jost tail: all hold = {}", tail.iter().all(|c| c.holds));
    let ks = [C64::new(0.0, 0.0), C64::new(5.0, 0.5)];
    let l1 = check_krein_l1(&q, &ks, &xs, 1e-11)?;
    println!("Krein L¹ growth: all hold = {}", l1.iter().all(|c| c.holds));
    Ok(())
}
