//! Quantiles and p-values of weighted sums of χ²₁ variables by Monte Carlo.

use funflir::critical::{calibrate, mc_pvalue, mc_quantile};

fn main() -> funflir::Result<()> {
    let draws = 200_000;
    println!("chi2(1) 95% quantile: {:.4} (exact 3.8415)", mc_quantile(&[1.0], 0.05, draws, 1)?);
    println!("Exp(1) = 0.5 chi2(2) 95% quantile: {:.4} (exact 2.9957)", mc_quantile(&[0.5, 0.5], 0.05, draws, 1)?);

    let lambdas = [2.0, 1.0, 0.5, 0.25, 0.125];
    for alpha in [0.10, 0.05, 0.01] {
        println!("spectrum {lambdas:?}, alpha {alpha}: q = {:.4}", mc_quantile(&lambdas, alpha, draws, 2)?);
    }
    let (q, p) = calibrate(&lambdas, 9.0, 0.05, draws, 3)?;
    println!("statistic 9.0: critical value {q:.4}, p-value {p:.4}");
    println!("p-value of 0: {}", mc_pvalue(&lambdas, 0.0, 1000, 3)?);
    Ok(())
}
