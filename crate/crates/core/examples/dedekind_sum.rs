//! Elliptic Dedekind sums D(a, c) and their symmetries.

use ellded::dedekind::dedekind_sum;
use ellded::eisenstein::EisensteinContext;
use ellded::Field;

fn main() -> ellded::Result<()> {
    let f = Field::new(2)?;
    let ctx = EisensteinContext::new(f);
    let (a, c) = (f.int(3, 1), f.int(5, 2));
    let base = dedekind_sum(&a, &c, &ctx, 10_000)?;
    println!("D({a}, {c}) = {:.12} over {} cosets", base.value, base.ncosets);
    println!("normalized: {:.12}", base.normalized_value()?);

    let shifted = dedekind_sum(&(&a + &(&c * &f.int(-2, 3))), &c, &ctx, 10_000)?;
    let lambda = f.int(1, -1);
    let scaled = dedekind_sum(&(&lambda * &a), &(&lambda * &c), &ctx, 10_000)?;
    let negated = dedekind_sum(&-a.clone(), &c, &ctx, 10_000)?;
    println!("a + gamma c:       {:.12}", shifted.value);
    println!("(lambda a, lambda c): {:.12}", scaled.value);
    println!("-a:                {:.12}", negated.value);

    // With extra units the sums vanish identically.
    let g = Field::new(1)?;
    let v = dedekind_sum(&g.int(2, 1), &g.int(4, 3), &EisensteinContext::new(g), 10_000)?;
    println!("Gaussian D(2+w, 4+3w) = {:.2e}", v.value.norm());

    ctx.reset_evaluations();
    let big = f.int(100, 0);
    dedekind_sum(&f.int(37, 11), &big, &ctx, 100_000)?;
    println!("N(c) = {} took {} E1 evaluations", big.norm(), ctx.evaluations());
    Ok(())
}
