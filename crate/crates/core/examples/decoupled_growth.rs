//! Logarithmic growth of the decoupled phase for the standard bump.
//!
//! `cargo run --release --example decoupled_growth -- 8 16 32 64`

use ncclab::counterexample::run_decoupled_growth;
use ncclab::PotentialSpec;

fn main() -> ncclab::Result<()> {
    let mut nus: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if nus.is_empty() {
        nus = vec![8, 16, 32, 64];
    }
    let r = run_decoupled_growth(&PotentialSpec::standard_bump(), &nus, (0.5, 1.0))?;
    println!("{:>6} {:>10} {:>6} {:>12}", "nu", "xi", "j", "max |arg|");
    for m in &r.measurements {
        println!("{:>6} {:>10.6} {:>6} {:>12.6}", m.nu, m.xi, m.index, m.value);
    }
    if let Some(fit) = &r.fit {
        println!("max |arg| ≈ {:.4} log ν {:+.4}  (r = {:.5})", fit.slope, fit.intercept, fit.correlation);
    }
    Ok(())
}
