//! The weighted statistic for several weight functions on one data set.
//! The long-run covariance and the Monte Carlo draws are shared, so only the
//! linear functional of the moment process changes.

use funflir::simlab::{draw, DgpSpec, Design, Family};
use funflir::testkit::{PreparedTest, TestConfig, TestInput};
use funflir::weights::{power_drift_closed_form, Measure, WeightFn, WeightSpec};

fn main() -> funflir::Result<()> {
    let spec = DgpSpec {
        seed: 3,
        ..DgpSpec::new(Family::BaselineNoIntercept, Design::Informative, 300)
    };
    let sim = draw(&spec)?;
    let y = sim.y(10.0);
    let input = TestInput::new(&y, &sim.x).instrument(&sim.z);
    let prep = PreparedTest::new(&TestConfig::default(), &input)?;

    let mut weights = vec![WeightSpec::endpoint()];
    for p in [7.0, 3.0, 1.0, 0.0] {
        weights.push(WeightSpec::power(p)?);
    }
    weights.push(WeightSpec::new(
        Measure::Lebesgue,
        WeightFn::Custom {
            name: "sin".into(),
            f: std::sync::Arc::new(|r: f64| (std::f64::consts::PI * r / 2.0).sin()),
        },
    )?);

    println!("{:>12} {:>8} {:>8} {:>10} {:>8}", "weight", "C_w", "D_w", "statistic", "p-value");
    for w in &weights {
        let r = prep.evaluate(w)?;
        println!(
            "{:>12} {:>8.4} {:>8.4} {:>10.4} {:>8.3}",
            w.label(),
            w.normalizer(),
            w.drift_factor(),
            r.statistic,
            r.p_value
        );
    }
    println!("\nclosed form of D_w for r^p: p = 3 gives {:.6}", power_drift_closed_form(3.0));
    Ok(())
}
