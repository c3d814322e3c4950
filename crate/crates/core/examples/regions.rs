//! Footprint size `Theta(U, L)` of regions at infinity and the mass that
//! remains when the region is cut out of the horosphere face.

use horomass::evaluators::{e1, excluded_region_mass, face_mass, theta, theta_full, EvalOptions, RegionSpec};
use horomass::metrics::ads_schwarzschild;

fn main() -> horomass::Result<()> {
    let model = ads_schwarzschild(3, 1.0)?;
    let opts = EvalOptions::default();
    let regions = [
        ("half-space", RegionSpec::HalfSpace { normal: vec![1.0, 0.0], offset: 0.0 }),
        ("cone", RegionSpec::Cone { axis: e1(3), half_angle: 0.5 }),
        ("slab", RegionSpec::Slab { normal: vec![0.0, 1.0], lo: -1.0, hi: 1.0 }),
    ];
    for l in [3.0f64, 4.0, 5.0] {
        let sigma = (1.5 * l).exp();
        let face = face_mass(&model, l, sigma, &opts)?.value;
        println!("L = {l}: full footprint {:.6e}, face mass {face:.10}", theta_full(3, sigma));
        for (name, region) in &regions {
            let th = theta(3, region, l, sigma, &opts.orders);
            let outside = excluded_region_mass(&model, region, l, sigma, &opts)?;
            println!("  {name:>10}: Theta {th:.6e}, mass outside {:.10}", outside.value);
            for note in &outside.notes {
                println!("              {note}");
            }
        }
    }
    Ok(())
}
