//! A reduced Monte Carlo experiment. Usage:
//! `cargo run --release --example monte_carlo -- [preset] [replications] [T]`
//! with preset one of 1, 2, 3, a4.

use funflir::simlab::{run_experiment, Experiment, Preset};

fn main() -> funflir::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let preset: Preset = args.first().map(String::as_str).unwrap_or("2").parse()?;
    let reps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let t: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let mut exp = Experiment::preset(preset, reps, 1);
    exp.sample_sizes = vec![t];
    let report = run_experiment(&exp)?;
    print!("{}", report.to_text());
    println!("({:.1}s)", report.runtime_secs);
    Ok(())
}
