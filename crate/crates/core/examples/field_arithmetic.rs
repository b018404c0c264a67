//! Exact arithmetic in the ring of integers of Q(sqrt(-D)).

use ellded::{Field, KElement};
use num_bigint::BigInt;

fn main() -> ellded::Result<()> {
    for d in [1, 2, 3, 5, 7] {
        let f = Field::new(d)?;
        println!(
            "D={d}: d_K={} w={:.6} area={:.6} extra units: {}",
            f.discriminant(),
            f.omega(),
            f.area(),
            f.has_extra_units()
        );
    }

    let f = Field::new(5)?;
    let u = f.parse_int("3+2*w")?;
    let v = f.parse_int("-1+4*w")?;
    let uv = &u * &v;
    println!("({u}) * ({v}) = {uv}, N = {} = {} * {}", uv.norm(), u.norm(), v.norm());

    let x = KElement::new(u.clone(), BigInt::from(7))?;
    println!("1 / ({u})/7 = {}", x.inv()?);
    println!("nearest lattice point to 2.4+3.9i: {}", f.nearest_lattice(num_complex::Complex64::new(2.4, 3.9)));
    Ok(())
}
