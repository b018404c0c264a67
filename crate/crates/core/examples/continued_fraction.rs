//! Expand a complex number into a continued fraction over O_K and check its growth bounds.

use ellded::cfmartin::{check_growth, default_admissible, expand};
use ellded::Field;
use num_complex::Complex64;

fn main() -> ellded::Result<()> {
    let f = Field::new(2)?;
    let adm = default_admissible(f, 0.9)?;
    println!("denominators {:?}, eps = {}, mu = {:.4}", adm.denominators().iter().map(|b| b.to_string()).collect::<Vec<_>>(), adm.eps(), adm.mu());

    let z = Complex64::new(0.327, 0.705);
    let exp = expand(z, 12, &adm)?;
    for n in 1..=exp.len() {
        println!(
            "n={n:2}  a={:<10} b={:<6} p/q={:<28} |z - p/q|={:.3e}",
            exp.a[n - 1].to_string(),
            exp.b[n].to_string(),
            exp.convergent(n).map(|c| c.to_string()).unwrap_or_default(),
            exp.approximation_error(n),
        );
    }
    let report = check_growth(&exp)?;
    println!("{} inequalities hold: {report:?}", report.total());
    Ok(())
}
