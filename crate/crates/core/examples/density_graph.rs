//! Sample the normalized Dedekind sum at random points a/c and write a CSV.

use ellded::density::{d_tilde_range, graph_csv, graph_sample};
use ellded::eisenstein::EisensteinContext;
use ellded::Field;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ctx = EisensteinContext::new(Field::new(2)?);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points = graph_sample(&ctx, 200, 400, &mut rng)?;
    let (lo, hi) = d_tilde_range(&points);
    println!("{} points, D~ in [{lo:.4}, {hi:.4}]", points.len());
    let csv = graph_csv(&points);
    let path = std::env::temp_dir().join("ellded_graph.csv");
    std::fs::write(&path, &csv)?;
    println!("wrote {}", path.display());
    print!("{}", csv.lines().take(6).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
