//! Residues of O_K modulo an ideal (c), via its Hermite normal form.

use ellded::{CosetTable, Field};

fn main() -> ellded::Result<()> {
    let f = Field::new(7)?;
    let c = f.int(3, 2);
    let table = CosetTable::new(&c)?;
    let (d1, h, d2) = table.hnf();
    println!("c = {c}, N(c) = {}, HNF basis ({d1}, 0), ({h}, {d2})", c.norm());
    for (i, r) in table.reps().enumerate() {
        println!("  {i:2}: {r}");
    }
    let mu = f.int(40, -17);
    println!("{mu} lies in coset {}", table.reduce_mod(&mu));
    Ok(())
}
