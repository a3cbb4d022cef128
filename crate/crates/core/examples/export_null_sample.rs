//! Writes a null-hypothesis sample as CSV files for the command-line tool.
//! Usage: `cargo run --example export_null_sample -- <dir> [T] [seed]`

use funflir::app::{write_curves, write_scalars};
use funflir::simlab::{gen_baseline, DgpSpec, Design, Family};

fn main() -> funflir::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = std::path::PathBuf::from(args.first().map(String::as_str).unwrap_or("null_sample"));
    let t: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2024);
    std::fs::create_dir_all(&dir)?;
    let spec = DgpSpec {
        seed,
        ..DgpSpec::new(Family::BaselineNoIntercept, Design::Informative, t)
    };
    let s = gen_baseline(&spec)?;
    write_scalars(dir.join("y.csv"), &s.y)?;
    write_curves(dir.join("x.csv"), &s.x)?;
    write_curves(dir.join("z.csv"), &s.z)?;
    println!("wrote y.csv, x.csv, z.csv ({t} periods) to {}", dir.display());
    Ok(())
}
