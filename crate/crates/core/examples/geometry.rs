//! Background geometry checks: scalar curvature, level-set mean curvature
//! and the analytic vs finite-difference Christoffel symbols.

use horomass::charts::{ChartId, Point};
use horomass::geomkernel::{christoffel, level_set_geometry, scalar_curvature, CoordinateFunction, Radius};
use horomass::jet::DerivMode;
use horomass::metrics::{ads_schwarzschild, hyperbolic_background};

fn main() -> horomass::Result<()> {
    let n = 3;
    let b = hyperbolic_background(n, ChartId::Hyperboloidal);
    let p = Point::hyperboloidal(&[3.0, 1.0, -2.0])?;
    println!("R_b = {:.12} (expected {})", scalar_curvature(&b, &p, DerivMode::Analytic)?, -6);

    let r = p.radius();
    let sphere = level_set_geometry(&b, &Radius, &p, 1.0, DerivMode::Analytic)?;
    println!("H(S_r) = {:.12}, closed form 2t/r = {:.12}", sphere.mean_curvature, 2.0 * (1.0 + r * r).sqrt() / r);

    let x = Point::horospherical(&[2.0, 0.3, -0.7])?;
    let horo = level_set_geometry(&b, &CoordinateFunction(0), &x, 1.0, DerivMode::Analytic)?;
    println!("H(H_L) = {:.12}, closed form n - 1 = {}", horo.mean_curvature, n - 1);

    let ads = ads_schwarzschild(n, 1.0)?;
    let a = christoffel(&ads, &p, DerivMode::Analytic)?;
    let f = christoffel(&ads, &p, DerivMode::FiniteDifference)?;
    let diff = a.gamma.iter().zip(&f.gamma).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
    println!("AdS-Schwarzschild Christoffel symbols, analytic vs finite difference: max diff {diff:.2e}");
    println!("R_g(AdS-Schwarzschild) = {:.12}", scalar_curvature(&ads, &p, DerivMode::Analytic)?);
    Ok(())
}
