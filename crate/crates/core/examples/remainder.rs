//! Linear decomposition of the mass one-form on a sphere and the quadratic
//! scaling of its remainder under `h -> lambda h`.

use horomass::evaluators::{decay_exponent, sphere_remainder, EvalOptions};
use horomass::massform::StaticPotential;
use horomass::metrics::{custom_perturbation, PerturbationSpec};

fn main() -> horomass::Result<()> {
    let lambdas = [1.0, 0.5, 0.25];
    let mut rem = Vec::new();
    for &lam in &lambdas {
        let model = custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, 0.3 * lam, &[0.0, 0.0, 1.0], 1.2))?;
        let r = sphere_remainder(&model, &StaticPotential::time(3), 2.0, &EvalOptions::default())?;
        println!("lambda = {lam:<5} int |R| = {:.6e}", r.value);
        rem.push(r.value);
    }
    println!("fitted exponent in lambda: {:.4}", decay_exponent(&lambdas, &rem, true)?);
    Ok(())
}
