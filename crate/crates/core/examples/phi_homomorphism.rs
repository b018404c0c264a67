//! Phi(A) = E_2(0) I(A) - D(a, c) on SL_2(O_K), which is a homomorphism.

use ellded::dedekind::{homomorphism_defect, phi, random_sl2};
use ellded::eisenstein::EisensteinContext;
use ellded::{Field, Mat2O};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ellded::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for d in [2, 5, 7] {
        let f = Field::new(d)?;
        let ctx = EisensteinContext::new(f);
        println!("D={d}: Phi(I) = {:.1e}, Phi(quarter turn) = {:.1e}",
            phi(&Mat2O::identity(f), &ctx, 1)?.norm(),
            phi(&Mat2O::quarter_turn(f), &ctx, 1)?.norm());
        for _ in 0..3 {
            let a = random_sl2(f, 200, &mut rng);
            let b = random_sl2(f, 200, &mut rng);
            let defect = homomorphism_defect(&a, &b, &ctx, 1_000_000)?;
            println!("  Phi(A)={:.6}  defect {:.1e}  A={a}", phi(&a, &ctx, 1_000_000)?, defect.norm());
        }
    }
    Ok(())
}
