//! Static potentials and the mass one-form
//! `U(V) = V div_b h - V d(tr_b h) + (tr_b h) dV - h(grad_b V, .)`.

use nalgebra::DVector;

use crate::charts::{ChartId, Point};
use crate::error::{Error, Result};
use crate::geomkernel::{Formula, LocalPerturbation, ScalarField, SurfaceDifference};
use crate::jet::{DerivMode, Scalar, ScalarJet};
use crate::metrics::MetricModel;

/// Smallness threshold on `|h|_b` for the linear decomposition.
pub const SMALLNESS: f64 = 0.5;

/// `V = c_t t - sum a_i z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPotential {
    pub c_t: f64,
    pub a: Vec<f64>,
}

impl StaticPotential {
    pub fn new(c_t: f64, a: Vec<f64>) -> Self {
        StaticPotential { c_t, a }
    }

    /// `V = t`.
    pub fn time(n: usize) -> Self {
        StaticPotential { c_t: 1.0, a: vec![0.0; n] }
    }

    /// `V = z_i` (zero-based index).
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut a = vec![0.0; n];
        a[i] = -1.0;
        StaticPotential { c_t: 0.0, a }
    }

    /// `V = t - a . z` for a unit direction `a`; its level sets are the
    /// horospheres based at the boundary point `a`.
    pub fn horosphere(n: usize, a: &[f64]) -> Result<Self> {
        if a.len() != n {
            return Err(Error::Validation(format!("direction has {} components, expected {n}", a.len())));
        }
        let len = crate::charts::norm(a);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("horosphere direction must be a unit vector (|a| = {len})")));
        }
        Ok(StaticPotential { c_t: 1.0, a: a.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn add(&self, other: &StaticPotential) -> StaticPotential {
        StaticPotential {
            c_t: self.c_t + other.c_t,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
        }
    }
}

impl Formula for StaticPotential {
    fn eval<S: Scalar>(&self, chart: ChartId, x: &[S]) -> Result<S> {
        let c = self.c_t;
        let a = &self.a;
        let zero = S::cst(0.0);
        match chart {
            ChartId::Hyperboloidal => {
                let t = x.iter().fold(S::cst(1.0), |acc, v| acc + v.clone() * v.clone()).sqrt();
                Ok(x.iter().zip(a).fold(t * c, |acc, (z, ai)| acc - z.clone() * *ai))
            }
            ChartId::Horospherical => {
                // c t - a1 z1 = (c+a1)/2 e^{x1} + (c-a1)/2 e^{-x1} + (c-a1) e^{x1} rho^2/2
                let e = x[0].exp();
                let rho2 = x[1..].iter().fold(zero.clone(), |acc, v| acc + v.clone() * v.clone());
                let dot = x[1..].iter().zip(&a[1..]).fold(zero, |acc, (v, ai)| acc + v.clone() * *ai);
                let mut v = e.clone() * (0.5 * (c + a[0]));
                if c != a[0] {
                    v += (x[0].clone() * -1.0).exp() * (0.5 * (c - a[0])) + e.clone() * rho2 * (0.5 * (c - a[0]));
                }
                Ok(v - e * dot)
            }
            ChartId::HalfSpace => {
                let y1 = x[0].clone();
                let hat2 = x[1..].iter().fold(zero.clone(), |acc, v| acc + v.clone() * v.clone());
                let s = y1.clone() * y1.clone() + hat2;
                let dot = x[1..].iter().zip(&a[1..]).fold(zero, |acc, (v, ai)| acc + v.clone() * *ai);
                Ok((s * (c - a[0]) + (c + a[0])) / (y1.clone() * 2.0) - dot / y1)
            }
            ChartId::Cartesian => Err(Error::ChartMismatch("static potentials live on hyperbolic space".into())),
        }
    }
}

/// Value of `V` and its `b`-gradient (contravariant) at `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialValue {
    pub value: f64,
    pub b_gradient: DVector<f64>,
}

pub fn eval_potential(v: &StaticPotential, p: &Point) -> Result<PotentialValue> {
    let jet = v.jet(p, DerivMode::Analytic)?;
    let bg = crate::geomkernel::BackgroundPoint::closed_form(crate::metrics::Background::Hyperbolic, p)?;
    Ok(PotentialValue { value: jet.value, b_gradient: &bg.binv * &jet.grad })
}

/// `U(V)(nu0)` from local perturbation data; `nu0` is contravariant and `b`-unit.
pub fn mass_one_form_local(local: &LocalPerturbation, v: &ScalarJet, nu0: &DVector<f64>) -> f64 {
    let n = local.dim();
    let binv = &local.bg.binv;
    let mut div_nu = 0.0;
    let mut dtr_nu = 0.0;
    for k in 0..n {
        let nh = &local.nabla_h[k];
        // div h_j = b^{ik} nabla_k h_ij, contracted with nu0^j
        let row: DVector<f64> = nh * nu0;
        for i in 0..n {
            div_nu += binv[(i, k)] * row[i];
        }
        dtr_nu += binv.component_mul(nh).sum() * nu0[k];
    }
    let tr = binv.component_mul(&local.h).sum();
    let grad_b = binv * &v.grad;
    let h_grad_nu = (&local.h * nu0).dot(&grad_b);
    v.value * (div_nu - dtr_nu) + tr * v.grad.dot(nu0) - h_grad_nu
}

/// `U(V)(nu0)` at `p` for a model.
pub fn mass_one_form(model: &MetricModel, v: &StaticPotential, p: &Point, nu0: &DVector<f64>, mode: DerivMode) -> Result<f64> {
    let local = LocalPerturbation::new(model, p, mode)?;
    let vj = v.jet(p, mode)?;
    Ok(mass_one_form_local(&local, &vj, nu0))
}

/// `U(V)(nu0)` together with the pieces of its linear decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassOneFormSample {
    pub value: f64,
    /// `2 V (H_b - H_g)`.
    pub mean_curv_term: f64,
    /// `(tr^Sigma_b h) dV(nu0)`.
    pub trace_term: f64,
    /// `-V <A_b, h>`.
    pub a_dot_h_term: f64,
    /// `div_Sigma(V X)`, entering with a minus sign.
    pub div_term: f64,
    pub remainder: f64,
    /// `V (|A|_b |h|_b^2 + |nabla h|_b |h|_b) + |dV|_b |h|_b^2`, the size the remainder is measured against.
    pub remainder_scale: f64,
}

impl MassOneFormSample {
    pub fn linear_part(&self) -> f64 {
        self.mean_curv_term + self.trace_term + self.a_dot_h_term - self.div_term
    }
}

/// The tangential field `X` with `b(X, W) = h(nu0, W)` for tangent `W`.
pub fn tangential_dual_x(local: &LocalPerturbation, surf: &SurfaceDifference) -> DVector<f64> {
    &surf.proj * (&local.bg.binv * (&local.h * &surf.nu0))
}

/// `<A_b, h>` over the surface.
pub fn a_dot_h(local: &LocalPerturbation, surf: &SurfaceDifference) -> f64 {
    let binv = &local.bg.binv;
    (binv * &surf.a_b * binv).component_mul(&local.h).sum()
}

/// Pointwise `div_Sigma X`, with `X` extended by the level-set normal field.
pub fn div_sigma_x(local: &LocalPerturbation, surf: &SurfaceDifference) -> f64 {
    let n = local.dim();
    let pup = &local.bg.binv - &surf.nu0 * surf.nu0.transpose();
    let mut s = 0.0;
    for i in 0..n {
        let row = &local.nabla_h[i] * &surf.nu0;
        for k in 0..n {
            s += pup[(i, k)] * row[k];
        }
    }
    let hnn = (&local.h * &surf.nu0).dot(&surf.nu0);
    s + a_dot_h(local, surf) - hnn * surf.h_b
}

/// Evaluate `U(V)(nu0)` and its decomposition on the level set described by `surf`.
pub fn decomposition(local: &LocalPerturbation, v: &ScalarJet, surf: &SurfaceDifference) -> Result<MassOneFormSample> {
    let hn = local.h_norm();
    if hn >= SMALLNESS {
        return Err(Error::SmallnessViolated(hn));
    }
    let binv = &local.bg.binv;
    let nu0 = &surf.nu0;
    let value = mass_one_form_local(local, v, nu0);
    let hnn = (&local.h * nu0).dot(nu0);
    let tr_sigma = binv.component_mul(&local.h).sum() - hnn;
    let dv_nu = v.grad.dot(nu0);
    let adh = a_dot_h(local, surf);
    let x = tangential_dual_x(local, surf);
    let div_term = v.value * div_sigma_x(local, surf) + v.grad.dot(&x);
    let mean_curv_term = -2.0 * v.value * surf.dh;
    let trace_term = tr_sigma * dv_nu;
    let a_dot_h_term = -v.value * adh;
    let linear = mean_curv_term + trace_term + a_dot_h_term - div_term;
    let dv_norm = v.grad.dot(&(binv * &v.grad)).sqrt();
    let remainder_scale =
        v.value.abs() * (surf.a_norm(local) * hn * hn + local.nabla_h_norm() * hn) + dv_norm * hn * hn;
    Ok(MassOneFormSample {
        value,
        mean_curv_term,
        trace_term,
        a_dot_h_term,
        div_term,
        remainder: value - linear,
        remainder_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomkernel::{HatRadius, Radius};
    use crate::metrics::{ads_schwarzschild, custom_perturbation, hyperbolic_background, PerturbationSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bump() -> MetricModel {
        custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, 0.3, &[0.0, 0.6, 0.8], 1.2)).unwrap()
    }

    #[test]
    fn potential_values() {
        let t = StaticPotential::time(3);
        assert_eq!(t.value(&Point::hyperboloidal(&[0.0, 0.0, 0.0]).unwrap()).unwrap(), 1.0);
        let v = StaticPotential::horosphere(3, &[1.0, 0.0, 0.0]).unwrap();
        for rho in [0.0, 1.0, 1e4] {
            let p = Point::horospherical(&[2.5, rho, -rho]).unwrap();
            assert_eq!(v.value(&p).unwrap(), 2.5f64.exp());
        }
        let y = Point::half_space(&[0.25, 3.0, -1.0]).unwrap();
        assert_relative_eq!(v.value(&y).unwrap(), 4.0, max_relative = 1e-15);
        assert!(StaticPotential::horosphere(3, &[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn potential_charts_agree() {
        let v = StaticPotential::new(1.3, vec![0.2, -0.7, 0.4]);
        let x = Point::horospherical(&[0.7, -1.1, 0.3]).unwrap();
        let z = x.to_chart(ChartId::Hyperboloidal).unwrap();
        let y = x.to_chart(ChartId::HalfSpace).unwrap();
        let vz = v.value(&z).unwrap();
        assert_relative_eq!(v.value(&x).unwrap(), vz, max_relative = 1e-13);
        assert_relative_eq!(v.value(&y).unwrap(), vz, max_relative = 1e-13);
    }

    #[test]
    fn gradient_norm_equals_value_for_horosphere_potential() {
        let v = StaticPotential::horosphere(3, &[1.0, 0.0, 0.0]).unwrap();
        let mut state = 7u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) * 6.0 - 3.0
        };
        for _ in 0..100 {
            let z = Point::hyperboloidal(&[rnd(), rnd(), rnd()]).unwrap();
            let pv = eval_potential(&v, &z).unwrap();
            // oracle: grad_b V = b^{-1} dV with b^{-1} = I + z z^T, dV = z/t - e1
            let zz = DVector::from_column_slice(&z.coords);
            let t = (1.0 + zz.norm_squared()).sqrt();
            let mut dv = &zz / t;
            dv[0] -= 1.0;
            let b = nalgebra::DMatrix::identity(3, 3) - &zz * zz.transpose() / (t * t);
            let grad = (nalgebra::DMatrix::identity(3, 3) + &zz * zz.transpose()) * &dv;
            assert_relative_eq!(pv.b_gradient, grad, max_relative = 1e-12, epsilon = 1e-12);
            let norm = (&b * &pv.b_gradient).dot(&pv.b_gradient).sqrt();
            assert_relative_eq!(norm, pv.value, max_relative = 1e-10);
        }
    }

    #[test]
    fn zero_perturbation_gives_zero() {
        let m = hyperbolic_background(3, ChartId::Hyperboloidal);
        let p = Point::hyperboloidal(&[3.0, 1.0, 0.0]).unwrap();
        let nu = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(mass_one_form(&m, &StaticPotential::time(3), &p, &nu, DerivMode::Analytic).unwrap(), 0.0);
        let local = LocalPerturbation::new(&m, &p, DerivMode::Analytic).unwrap();
        let surf = SurfaceDifference::new(&local, &Radius.jet(&p, DerivMode::Analytic).unwrap(), 1.0).unwrap();
        let s = decomposition(&local, &StaticPotential::time(3).jet(&p, DerivMode::Analytic).unwrap(), &surf).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.mean_curv_term, 0.0);
        assert_eq!(s.div_term, 0.0);
        assert_eq!(s.remainder, 0.0);
    }

    #[test]
    fn linear_in_potential_and_perturbation() {
        let m = bump();
        let p = Point::hyperboloidal(&[0.5, 2.0, 3.0]).unwrap();
        let local = LocalPerturbation::new(&m, &p, DerivMode::Analytic).unwrap();
        let nu = DVector::from_vec(vec![0.3, 0.4, 0.2]);
        let v1 = StaticPotential::time(3);
        let v2 = StaticPotential::coordinate(3, 2);
        let u = |v: &StaticPotential| mass_one_form_local(&local, &v.jet(&p, DerivMode::Analytic).unwrap(), &nu);
        let sum = u(&v1.add(&v2));
        assert!((sum - u(&v1) - u(&v2)).abs() <= 1e-12 * sum.abs().max(u(&v1).abs()));
        let scaled = custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, 0.15, &[0.0, 0.6, 0.8], 1.2)).unwrap();
        let half = mass_one_form(&scaled, &v1, &p, &nu, DerivMode::Analytic).unwrap();
        assert_relative_eq!(half, 0.5 * u(&v1), max_relative = 1e-10);
    }

    #[test]
    fn ads_sphere_form_matches_closed_form() {
        // U(t)(nu0) = V eta (n-1) t / r with eta = |h|_b = 2m r^{2-n} / (t^2 - 2m r^{2-n})
        let m = ads_schwarzschild(3, 1.0).unwrap();
        let r: f64 = 7.0;
        let p = Point::hyperboloidal(&[r * 0.48, r * 0.6, r * 0.64]).unwrap();
        let local = LocalPerturbation::new(&m, &p, DerivMode::Analytic).unwrap();
        let surf = SurfaceDifference::new(&local, &Radius.jet(&p, DerivMode::Analytic).unwrap(), 1.0).unwrap();
        let v = StaticPotential::time(3).jet(&p, DerivMode::Analytic).unwrap();
        let t2 = 1.0 + r * r;
        let eta = 2.0 / r / (t2 - 2.0 / r);
        let oracle = t2.sqrt() * eta * 2.0 * t2.sqrt() / r;
        assert_relative_eq!(mass_one_form_local(&local, &v, &surf.nu0), oracle, max_relative = 1e-12);
        assert_relative_eq!(local.h_norm(), eta, max_relative = 1e-12);
        // X vanishes for a purely radial perturbation on spheres
        assert!(tangential_dual_x(&local, &surf).amax() < 1e-15 * r);
    }

    #[test]
    fn level_set_trace_and_area_terms_cancel() {
        let m = bump();
        let v = StaticPotential::horosphere(3, &[1.0, 0.0, 0.0]).unwrap();
        let z = Point::hyperboloidal(&[0.3, 1.8, 2.4]).unwrap();
        let local = LocalPerturbation::new(&m, &z, DerivMode::Analytic).unwrap();
        let vj = v.jet(&z, DerivMode::Analytic).unwrap();
        let surf = SurfaceDifference::new(&local, &vj, 1.0).unwrap();
        let s = decomposition(&local, &vj, &surf).unwrap();
        assert!(local.h_norm() > 1e-3);
        assert!((s.trace_term + s.a_dot_h_term).abs() < 1e-12 * s.value.abs().max(1e-3));
    }

    #[test]
    fn remainder_is_quadratic_in_h() {
        let p = Point::hyperboloidal(&[0.5, 1.6, 2.4]).unwrap();
        let rem = |amp: f64| {
            let m = custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, amp, &[0.0, 0.6, 0.8], 1.2)).unwrap();
            let local = LocalPerturbation::new(&m, &p, DerivMode::Analytic).unwrap();
            let vj = StaticPotential::time(3).jet(&p, DerivMode::Analytic).unwrap();
            let surf = SurfaceDifference::new(&local, &Radius.jet(&p, DerivMode::Analytic).unwrap(), 1.0).unwrap();
            decomposition(&local, &vj, &surf).unwrap()
        };
        let a = rem(0.8);
        let b = rem(0.4);
        let c = rem(0.2);
        let slope = ((a.remainder / c.remainder).abs()).ln() / 4f64.ln();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
        assert!(a.remainder.abs() < 0.1 * a.value.abs());
        assert!(a.remainder.abs() < 10.0 * a.remainder_scale);
        assert!(b.remainder.abs() > 0.0);
    }

    #[test]
    fn smallness_is_enforced() {
        let m = custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, 50.0, &[1.0, 0.0, 0.0], 0.5));
        // strongly positive bumps stay positive definite but violate smallness
        let m = m.unwrap();
        let p = Point::hyperboloidal(&[1.5, 0.0, 0.0]).unwrap();
        let local = LocalPerturbation::new(&m, &p, DerivMode::Analytic).unwrap();
        let vj = StaticPotential::time(3).jet(&p, DerivMode::Analytic).unwrap();
        let surf = SurfaceDifference::new(&local, &Radius.jet(&p, DerivMode::Analytic).unwrap(), 1.0).unwrap();
        assert!(matches!(decomposition(&local, &vj, &surf), Err(Error::SmallnessViolated(_))));
    }

    #[test]
    fn lateral_surface_decomposition_is_consistent() {
        let m = ads_schwarzschild(3, 1.0).unwrap();
        let p = Point::horospherical(&[1.0, 2.0, 1.0]).unwrap();
        let local = LocalPerturbation::new(&m, &p, DerivMode::Analytic).unwrap();
        let v = StaticPotential::horosphere(3, &[1.0, 0.0, 0.0]).unwrap().jet(&p, DerivMode::Analytic).unwrap();
        let surf = SurfaceDifference::new(&local, &HatRadius.jet(&p, DerivMode::Analytic).unwrap(), 1.0).unwrap();
        let s = decomposition(&local, &v, &surf).unwrap();
        // V depends on x1 only and the normal is along x^, so dV(nu0) = 0
        assert!(s.trace_term.abs() < 1e-14);
        assert!(s.remainder.abs() < 0.2 * s.value.abs());
    }

    proptest! {
        #[test]
        fn potential_is_static(c in -2.0f64..2.0, a1 in -2.0f64..2.0, a2 in -2.0f64..2.0, x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
            // nabla^2 V = V b in the horospherical chart
            let v = StaticPotential::new(c, vec![a1, a2, 0.3]);
            let p = Point::horospherical(&[x1, x2, -0.5]).unwrap();
            let m = hyperbolic_background(3, ChartId::Horospherical);
            let hess = crate::geomkernel::hessian_scalar(&m, &v, &p, DerivMode::Analytic).unwrap();
            let b = m.components(&p).unwrap();
            let val = v.value(&p).unwrap();
            let scale = hess.amax().max(1.0);
            prop_assert!((hess - b * val).amax() < 1e-10 * scale);
        }
    }
}
