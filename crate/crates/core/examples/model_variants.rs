//! The same hypothesis under the model variants: intercept, scalar covariates,
//! two functional regressors, and the exogeneity benchmark.

use funflir::hilbert::{Curve, ScalarSeries};
use funflir::simlab::{draw, DgpSpec, Design, Family};
use funflir::testkit::{run_test, TestConfig, TestInput, Variant};

fn main() -> funflir::Result<()> {
    let spec = DgpSpec {
        seed: 21,
        ..DgpSpec::new(Family::BaselineIntercept, Design::Informative, 250)
    };
    let sim = draw(&spec)?;
    let y = sim.y(0.0);
    let base = TestInput::new(&y, &sim.x).instrument(&sim.z);
    let show = |name: &str, variant: Variant, input: &TestInput| -> funflir::Result<()> {
        let cfg = TestConfig {
            variant,
            ..TestConfig::default()
        };
        match run_test(&cfg, input) {
            Ok(r) => println!("{name:>22}: statistic {:>9.4}, p-value {:.3}", r.statistic, r.p_value),
            Err(e) => println!("{name:>22}: {e}"),
        }
        Ok(())
    };
    // the data carry nonzero means, which only the centered variant removes
    show("plain (misspecified)", Variant::Plain, &base)?;
    show("intercept", Variant::Intercept, &base)?;

    let trend = ScalarSeries::new((0..250).map(|t| t as f64 / 250.0).collect())?;
    let with_cov = base.clone().covariates(vec![ScalarSeries::new(vec![1.0; 250])?, trend]);
    show("dummy + trend", Variant::ScalarCovariates, &with_cov)?;

    let x2 = sim.z.clone();
    let multi = TestInput::multi(&y, vec![&sim.x, &x2])
        .instrument(&sim.z)
        .theta0s(vec![Curve::zeros(sim.x.grid()), Curve::zeros(sim.x.grid())]);
    show("two regressors", Variant::MultiFunctional, &multi)?;
    show("exogeneity benchmark", Variant::ExogeneityBenchmark, &base)?;
    Ok(())
}
