//! One point of hyperbolic space in the hyperboloidal, half-space and
//! horospherical charts, and the radius function in each.

use horomass::charts::{radial_coordinate, ChartId, Point};

fn main() -> horomass::Result<()> {
    let z = Point::hyperboloidal(&[1.5, -0.4, 2.0])?;
    for chart in [ChartId::Hyperboloidal, ChartId::HalfSpace, ChartId::Horospherical] {
        let p = z.to_chart(chart)?;
        println!("{:>14}: {:?}  r = {:.15}", chart.name(), p.coords, p.radius());
    }

    let back = z.to_chart(ChartId::Horospherical)?.to_chart(ChartId::Hyperboloidal)?;
    let drift: f64 = back.coords.iter().zip(&z.coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("round trip z -> x -> z drift: {drift:.2e}");

    // near the origin the radius keeps full relative accuracy
    for x1 in [1e-8, 1.0, 20.0] {
        println!("radial_coordinate({x1}, 1) = {:.15e}", radial_coordinate(x1, 1.0));
    }
    Ok(())
}
