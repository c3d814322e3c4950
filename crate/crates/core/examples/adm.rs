//! ADM mass of Schwarzschild initial data from the coordinate flux and from
//! the mean-curvature form, with their closed forms at finite radius.

use horomass::evaluators::{adm_flux, adm_geometric, EvalOptions};
use horomass::metrics::schwarzschild_af;
use horomass::quadrature::ConvergenceSeries;

fn main() -> horomass::Result<()> {
    let m = 1.0;
    let model = schwarzschild_af(m)?;
    let opts = EvalOptions::default();
    let mut flux = ConvergenceSeries::new("r", true);
    let mut geo = ConvergenceSeries::new("r", true);
    for r in [50.0, 100.0, 200.0] {
        let a = adm_flux(&model, r, &opts)?;
        let b = adm_geometric(&model, r, &opts)?;
        let psi = 1.0 + m / (2.0 * r);
        println!(
            "r = {r:>5}: flux {:.14} (closed {:.14}), geometric {:.14} (closed {:.14})",
            a.value,
            m * psi.powi(3),
            b.value,
            m * psi + m * m / (2.0 * r) * (1.0 + m / (4.0 * r)).powi(2)
        );
        flux.push(r, a.value, a.quad_error);
        geo.push(r, b.value, b.quad_error);
    }
    println!("extrapolated: flux {:.8}, geometric {:.8}", flux.extrapolate()?.limit, geo.extrapolate()?.limit);
    Ok(())
}
