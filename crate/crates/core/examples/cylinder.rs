//! Flux through the pieces of the parabolic cylinder `C_L` and the decay of
//! each piece in `L` compared with its predicted exponent.

use horomass::evaluators::{
    cylinder_flux_report, decay_exponent, e1, predicted_exponents, sigma_condition_check, CylinderFace, EvalOptions,
};
use horomass::massform::StaticPotential;
use horomass::metrics::ads_schwarzschild;

fn main() -> horomass::Result<()> {
    let (n, k) = (3, 1.5);
    let model = ads_schwarzschild(n, 1.0)?;
    let cond = sigma_condition_check(n, model.q, k);
    println!("sigma = e^(kL), k = {k}: condition satisfied {} (margin {:.2})", cond.satisfied, cond.margin);

    let v = StaticPotential::horosphere(n, &e1(n))?;
    let ls = [3.0, 4.0, 5.0, 6.0];
    let faces = [CylinderFace::Bottom, CylinderFace::Lateral, CylinderFace::TopEdge, CylinderFace::BottomEdge];
    let mut mags = vec![Vec::new(); faces.len()];
    for &l in &ls {
        let rep = cylinder_flux_report(&model, &v, l, (k * l).exp(), &EvalOptions::default())?;
        println!(
            "L = {l}: total {:.12}, decomposed {:.12}, consistent {}",
            rep.total, rep.total_decomposed, rep.consistent
        );
        for (i, f) in faces.iter().enumerate() {
            mags[i].push(rep.face(*f).magnitude);
        }
    }
    let pred = predicted_exponents(n, model.q, k);
    let predicted = [pred.bottom, pred.lateral, pred.top_edge, pred.bottom_edge];
    for (i, f) in faces.iter().enumerate() {
        println!("{:>3}: fitted {:>8.3}, predicted {:>6.2}", f.name(), decay_exponent(&ls, &mags[i], false)?, predicted[i]);
    }
    Ok(())
}
