//! Runs every invariant suite and prints one line per suite.

use ncclab::verify::run_all;

fn main() -> ncclab::Result<()> {
    let (suites, _) = run_all(20_190_615, 200)?;
    for s in &suites {
        println!("{:<22} {:<4} worst {:.2e} (limit {:.1e})", s.name, if s.passed { "ok" } else { "FAIL" }, s.worst, s.limit);
    }
    Ok(())
}
