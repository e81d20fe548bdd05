//! Monte Carlo estimation of the kinematic constants: c3(n) = 2/(n(n-1)) is
//! exact, c2(n) is sampled over squares meeting a fixed subspace, and their
//! ratio c1 = c3/c2 is the constant in front of the curvature integral.

use reggelab::harness::kinematic::{kinematic_c2, kinematic_text, stderr_scaling};

fn main() {
    reggelab::harness::init_threads();
    for n in [2usize, 3, 4] {
        let k = kinematic_c2(n, 400_000, 42);
        print!("{}", kinematic_text(&k));
        println!();
    }
    let (errs, slope) = stderr_scaling(3, 7, &[25_000, 50_000, 100_000, 200_000, 250_000]);
    println!("stderr over a decade of samples: {:?}", errs);
    println!("slope = {:.3} (expect -1/2)", slope);
}
