//! Build a matrix A in SL_2(O_K) with Phi(A) = 0 whose cusps a/c and -d/c sit near
//! chosen targets, so that the normalized Dedekind sum at a/c is close to the
//! value predicted by the targets.

use ellded::cfmartin::default_admissible;
use ellded::density::{witness, WitnessParams};
use ellded::eisenstein::EisensteinContext;
use ellded::Field;
use num_complex::Complex64;

fn main() -> ellded::Result<()> {
    let f = Field::new(5)?;
    let ctx = EisensteinContext::new(f);
    let x = Complex64::new(0.31, 0.77);
    let z = Complex64::new(-1.12, 0.40);
    let eps = 0.05;
    let params = WitnessParams::new(x, z, eps, default_admissible(f, 0.9)?)?;
    let w = witness(&params, &ctx)?;

    println!("depths m={} n={}, u={}, route {:?}", w.m, w.n, w.u, w.route);
    println!("A = {}", w.a);
    println!("N(c) = {}", w.norm_c);
    println!("|alpha - x| = {:.3e}, |beta - z| = {:.3e}", w.delta1.norm(), w.delta2.norm());
    println!("Phi(A) = {:.2e} (error bound {:.1e})", w.phi_total.norm(), w.phi_err_bound);
    println!("predicted {:.6}, target {:.6}, allowed gap {:.6}", w.predicted, w.target, w.dalpha_bound(eps));
    Ok(())
}
