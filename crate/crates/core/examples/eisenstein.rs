//! The weight-one Eisenstein function E_1 and the constant E_2(0) of a lattice O_K.

use ellded::eisenstein::{oracle, EisensteinContext};
use ellded::Field;
use num_complex::Complex64;

fn main() -> ellded::Result<()> {
    for d in [1, 2, 3, 5, 7] {
        let f = Field::new(d)?;
        let ctx = EisensteinContext::new(f);
        let z = Complex64::new(0.21, 0.37);
        let e1 = ctx.e1(z);
        let shifted = ctx.e1(z + f.omega());
        println!(
            "D={d}: E1(z)={e1:.9} |E1(z+w)-E1(z)|={:.1e} |E1(-z)+E1(z)|={:.1e} E2(0)={:.9}",
            (shifted - e1).norm(),
            (ctx.e1(-z) + e1).norm(),
            ctx.e2_zero()
        );
    }

    // The closed form against an independent continuation of the lattice sum.
    let f = Field::new(5)?;
    let closed = EisensteinContext::new(f).e2_zero();
    let summed = oracle::e2_extrapolated(f);
    println!("D=5: closed form {closed:.10}, continued sum {summed:.10}");
    Ok(())
}
