//! ∫ log|a| = π‖q‖² for the Krein and Dirac problems, and the δ² scaling.

use ncclab::outer::{sum_rule, sum_rule_with, Mode};
use ncclab::PotentialSpec;

fn main() -> ncclab::Result<()> {
    let p = PotentialSpec::standard_bump();
    for mode in [Mode::Krein, Mode::Dirac] {
        let r = sum_rule(&p, mode)?;
        println!("{mode:?}: π‖q‖² = {:.8}, ∫ log|a| = {:.8}, relative residual {:.1e}", r.lhs, r.rhs, r.residual);
    }
    for d in [0.4, 0.2, 0.1] {
        let r = sum_rule_with(&p.scaled(d), Mode::Dirac, 200.0, 1e-12)?;
        println!("δ = {d}: ∫ log|a| / δ² = {:.8}", r.rhs / (d * d));
    }
    Ok(())
}
