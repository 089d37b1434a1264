//! Ψ_ν = Q_{ν,ν³} keeps ‖Ψ_ν‖₂ fixed while the set where the maximal
//! function exceeds c·log ν covers the whole window.

use ncclab::counterexample::weak_type_failure_table;
use ncclab::PotentialSpec;

fn main() -> ncclab::Result<()> {
    let t = weak_type_failure_table(&PotentialSpec::standard_bump(), &[4, 8, 16], 0.1, 8)?;
    t.write_csv(std::io::stdout().lock())
}
