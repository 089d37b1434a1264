//! One Dirac sample Q_{ν,m,ρ,δ} and the δ² scaling of its largest phase.

use ncclab::counterexample::{dirac_delta_scaling, run_dirac_sample, SampleOptions};
use ncclab::PotentialSpec;

fn main() -> ncclab::Result<()> {
    let base = PotentialSpec::standard_bump();
    let opts = SampleOptions::default();
    let r = run_dirac_sample(&base, 32, 0.5, (0.5, 1.0), &opts)?;
    println!("{:>4} {:>10} {:>12}", "m", "xi", "max |arg a|");
    for m in &r.measurements {
        println!("{:>4} {:>10.6} {:>12.6}", m.index, m.xi, m.value);
    }
    for (k, v) in &r.fitted {
        println!("{k} = {v:.5}");
    }
    let s = dirac_delta_scaling(&base, 32, &[0.2, 0.4, 0.8], (0.5, 1.0), &opts)?;
    println!("log-log slope in δ: {:.4}", s.fit.as_ref().map_or(f64::NAN, |f| f.slope));
    Ok(())
}
