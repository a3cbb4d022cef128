//! Simulate an endogenous functional regression and test H0: θ = 0, first
//! under the null and then under a local alternative.

use funflir::simlab::{draw, DgpSpec, Design, Family};
use funflir::testkit::{run_test, TestConfig, TestInput};

fn main() -> funflir::Result<()> {
    let spec = DgpSpec {
        seed: 42,
        ..DgpSpec::new(Family::BaselineNoIntercept, Design::Informative, 200)
    };
    let sim = draw(&spec)?;
    let config = TestConfig {
        seed: 7,
        ..TestConfig::default()
    };
    for kappa in [0.0, 20.0] {
        let y = sim.y(kappa);
        let input = TestInput::new(&y, &sim.x).instrument(&sim.z);
        let r = run_test(&config, &input)?;
        println!(
            "kappa = {kappa:>4}: statistic {:.4}, critical value {:.4}, p-value {:.3}, reject {}",
            r.statistic, r.critical_value, r.p_value, r.reject
        );
        println!("             bandwidth {:.2}, d_T {}, top eigenvalues {:.4?}", r.bandwidth, r.d_t, &r.eigenvalues[..3]);
    }
    Ok(())
}
