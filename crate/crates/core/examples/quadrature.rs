//! Sphere and disk rules, the deterministic parallel sum and three-point
//! extrapolation of a convergent sequence.

use horomass::quadrature::{
    disk_nodes, pairwise_sum, sphere_area, sphere_nodes, with_workers, ConvergenceSeries,
};

fn main() -> horomass::Result<()> {
    for d in 1..=4 {
        let sum = pairwise_sum(&sphere_nodes(d, 32, 64).iter().map(|(_, w)| *w).collect::<Vec<_>>());
        println!("|S^{d}|: rule {sum:.15}, exact {:.15}", sphere_area(d));
    }

    // int over |x| < 4 in R^2 of e^{-|x|^2} = pi (1 - e^{-16})
    let disk: Vec<f64> = disk_nodes(2, 16, 32, 64, 4.0)
        .iter()
        .map(|(x, w)| w * (-x.iter().map(|v| v * v).sum::<f64>()).exp())
        .collect();
    println!("gaussian on a disk: {:.15} vs {:.15}", pairwise_sum(&disk), std::f64::consts::PI * (1.0 - (-16f64).exp()));

    let terms: Vec<f64> = (0..100_000).map(|k| 1.0 / (1.0 + k as f64).powi(2)).collect();
    let a = with_workers(Some(1), || pairwise_sum(&terms));
    let b = with_workers(Some(8), || pairwise_sum(&terms));
    println!("pairwise sum with 1 and 8 workers identical: {}", a.to_bits() == b.to_bits());

    let mut s = ConvergenceSeries::new("L", false);
    for l in [3.0, 4.0, 5.0, 6.0] {
        s.push(l, 2.0 + 0.7 * (-1.5 * l).exp(), 0.0);
    }
    let fit = s.extrapolate()?;
    println!("extrapolated limit {:.15}, rate {:?}", fit.limit, fit.rate);
    Ok(())
}
