//! Mass vector of a non-symmetric perturbation and the invariance of its
//! Minkowski length under a change of frame.

use horomass::evaluators::{frame_for_direction, mass_vector, EvalOptions};
use horomass::metrics::{custom_perturbation, PerturbationSpec};
use horomass::quadrature::RuleOrders;

fn main() -> horomass::Result<()> {
    let model = custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, 0.3, &[0.3, 0.5, 0.8], 1.2))?;
    let opts = EvalOptions { orders: RuleOrders { polar: 64, azimuthal: 128, ..RuleOrders::default() }, ..Default::default() };
    let radii = [20.0, 40.0, 80.0];

    let base = mass_vector(&model, &radii, &opts)?;
    println!("p0 = {:.10}, p = {:.10?}", base.p0, base.p);
    println!("p0^2 - |p|^2 = {:.10}", base.minkowski_sq);

    let rotated = mass_vector(&model.rotated(&frame_for_direction(&[0.6, -0.48, 0.64])), &radii, &opts)?;
    println!("rotated frame: p0 = {:.10}, p = {:.10?}", rotated.p0, rotated.p);
    println!("p0^2 - |p|^2 = {:.10} (relative change {:.2e})", rotated.minkowski_sq, rotated.minkowski_sq / base.minkowski_sq - 1.0);
    if let Some(flag) = rotated.positivity_flag {
        println!("positivity violated: {flag}");
    }
    Ok(())
}
