//! Mass of AdS-Schwarzschild from horospheres `H_L`, with the automatic
//! disk-radius policy, tail bounds and the extrapolated limit `16 pi m`.

use horomass::evaluators::{ads_mass, e1, horosphere_mass, EvalOptions};
use horomass::metrics::ads_schwarzschild;
use horomass::quadrature::ConvergenceSeries;

fn main() -> horomass::Result<()> {
    let m = 1.0;
    let model = ads_schwarzschild(3, m)?;
    let opts = EvalOptions::default();
    let mut series = ConvergenceSeries::new("L", false);
    println!("{:>4} {:>20} {:>10} {:>10} {:>8}", "L", "value", "quad_err", "tail", "rho_max");
    for l in [3.0, 4.0, 5.0, 6.0] {
        let r = horosphere_mass(&model, &e1(3), l, None, &opts)?;
        println!(
            "{l:>4} {:>20.14} {:>10.2e} {:>10.2e} {:>8}",
            r.value,
            r.quad_error,
            r.tail_bound,
            r.params.rho_max.unwrap_or(f64::NAN)
        );
        series.push(l, r.value, r.quad_error);
    }
    let fit = series.extrapolate()?;
    println!("limit {:.12} (closed form {:.12}), rate {:.3}", fit.limit, ads_mass(3, m), fit.rate.unwrap_or(0.0));
    Ok(())
}
