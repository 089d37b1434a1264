//! Follows 𝔄(7, 2 + iη) for the indicator of [0, 7] from η = 100 down to
//! the real axis and prints a thinned version of the trace.

use ncclab::outer::{unwrapped_arg_along_ray, Mode};
use ncclab::PotentialSpec;

fn main() -> ncclab::Result<()> {
    let p = PotentialSpec::indicator(0.0, 7.0)?;
    let trace = unwrapped_arg_along_ray(&p, 7.0, 2.0, Some(100.0), Mode::Krein)?;
    println!("{:>10} {:>12} {:>12} {:>12}", "eta", "|A|", "arg", "unwrapped");
    let n = trace.path.len();
    let stride = (n / 25).max(1);
    for i in (0..n).filter(|i| i % stride == 0 || *i == n - 1) {
        let v = trace.values[i];
        println!("{:>10.4} {:>12.6} {:>12.6} {:>12.6}", trace.path[i].im, v.norm(), v.arg(), trace.unwrapped_arg[i]);
    }
    println!("min |A| = {:.6}, boundary arg = {:.6}", trace.min_modulus(), trace.final_arg());
    Ok(())
}
