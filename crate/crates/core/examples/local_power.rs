//! Local asymptotic power of several weights from the population moments of a
//! simulated design. Power depends on the weight only through D_w, so the
//! curves are ordered like the drift factors.

use funflir::critical::stream;
use funflir::hilbert::Grid;
use funflir::simlab::{local_power_curves, population_moments, BaselineParams, Design};
use funflir::weights::WeightSpec;

fn main() -> funflir::Result<()> {
    let grid = Grid::uniform(101);
    let params = BaselineParams::draw(Design::Informative, &grid, &mut stream(5, 0));
    let moments = population_moments(&params, &grid, 0.1, 20_000, 5)?;
    let weights = vec![
        WeightSpec::endpoint(),
        WeightSpec::power(7.0)?,
        WeightSpec::power(1.0)?,
        WeightSpec::power(0.0)?,
    ];
    let kappas = [0.0, 5.0, 10.0, 15.0, 20.0];
    let curves = local_power_curves(&moments, &weights, &kappas, 0.05, 50_000, 9)?;
    print!("{:>6}", "kappa");
    for c in &curves {
        print!(" {:>9}", c.weight);
    }
    println!();
    for (i, k) in kappas.iter().enumerate() {
        print!("{k:>6}");
        for c in &curves {
            print!(" {:>9.3}", c.power[i]);
        }
        println!();
    }
    Ok(())
}
