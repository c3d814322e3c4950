//! A perturbation given as a table of `|h|_b` against `r`, evaluated on
//! spheres and horospheres.

use horomass::evaluators::{e1, horosphere_mass, sphere_mass_integral, EvalOptions};
use horomass::massform::StaticPotential;
use horomass::metrics::{custom_perturbation, PerturbationSpec};

fn main() -> horomass::Result<()> {
    let q = 3.0;
    let radii: Vec<f64> = (0..12).map(|k| 2f64.powi(k)).collect();
    let values: Vec<f64> = radii.iter().map(|r| 0.2 * (1.0 + r * r).powf(-q / 2.0)).collect();
    let model = custom_perturbation(&PerturbationSpec::radial_table(3, q, radii, values)?)?;
    let opts = EvalOptions::default();
    for r in [10.0, 20.0, 40.0] {
        let v = sphere_mass_integral(&model, &StaticPotential::time(3), r, &opts)?;
        println!("sphere r = {r:>4}: {:.12} +- {:.1e}", v.value, v.quad_error);
    }
    for l in [3.0, 4.0] {
        let v = horosphere_mass(&model, &e1(3), l, None, &opts)?;
        println!("horosphere L = {l}: {:.12}, tail bound {:.1e}", v.value, v.tail_bound);
    }
    Ok(())
}
