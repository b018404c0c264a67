//! Continuant brackets and their exact identities.

use ellded::brackets::{bracket, seq_from_ints, verify_convergent_lemma, verify_identities, BracketSeq};
use ellded::cfmartin::{default_admissible, expand};
use ellded::Field;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ellded::Result<()> {
    let f = Field::new(3)?;
    let b = [f.one(), f.int(2, 0), f.int(1, 1), f.int(0, 3)];
    let a = [f.int(1, 2), f.int(-3, 1), f.int(2, 2)];
    let seq = seq_from_ints(&b, &a)?;
    println!("[b_0, a_1, b_1, ..., b_3] = {}", bracket(&seq)?);
    println!("reversed                  = {}", bracket(&seq.reversed())?);
    println!("identities on all windows: {:?}", verify_identities(&seq)?);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let random = BracketSeq::random(f, 8, 5, &mut rng);
    println!("random rational sequence: {:?}", verify_identities(&random)?);

    let exp = expand(Complex64::new(-0.41, 0.93), 10, &default_admissible(f, 0.9)?)?;
    println!("convergents agree with brackets at {} places", verify_convergent_lemma(&exp)?);
    Ok(())
}
