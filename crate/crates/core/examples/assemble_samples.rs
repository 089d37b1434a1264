//! Sparse assembly of three Dirac samples and their oscillations.

use ncclab::counterexample::{assemble_and_probe, oscillations, run_dirac_sample, AssemblySchedule, SampleOptions};
use ncclab::PotentialSpec;

fn main() -> ncclab::Result<()> {
    let base = PotentialSpec::standard_bump();
    let opts = SampleOptions::default();
    let schedule = AssemblySchedule::default();
    let &(nu, delta) = schedule.samples.last().unwrap();
    let c = run_dirac_sample(&base, nu, delta, (0.5, 1.0), &opts)?.fitted["alpha"];
    let r = assemble_and_probe(&base, &schedule, (0.5, 1.0), c, &opts)?;
    for (n, (&(nu, delta), osc)) in schedule.samples.iter().zip(oscillations(&r)).enumerate() {
        let threshold = r.diagnostics[&format!("threshold_{n}")];
        println!("sample {n}: ν = {nu:>3}, δ = {delta}, oscillation {osc:.4} against c·δ²·log ν = {threshold:.4}");
    }
    println!("‖q‖₂ = {:.4}, interaction sup {:.3}", r.diagnostics["l2_norm"], r.diagnostics["interaction_sup"]);
    Ok(())
}
