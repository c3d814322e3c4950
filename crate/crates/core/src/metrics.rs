//! Metric models `g = b + h` over a hyperbolic or Euclidean background.
//!
//! Perturbations are always supplied as `h` itself, never as `g`, so that tiny
//! perturbations far out keep their relative precision. Every built-in
//! hyperbolic family has the radial form `h = w(z) (z . dz)^2` in the
//! hyperboloidal chart, which pulls back to any chart `xi` as
//! `w(z(xi)) G G^T` with `G = grad_xi (r^2 / 2)`.

use nalgebra::DMatrix;
use num_dual::{Dual2DVec64, DualDVec64};

use crate::charts::{ChartId, Point};
use crate::error::{Error, Result};
use crate::jet::{fd_tensor_jet, DerivMode, Order, Scalar, TensorJet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    Hyperbolic,
    Euclidean,
}

/// Smooth, compactly supported angular profile centred on `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularBump {
    /// Peak value of `|h|_b (1 + r^2)^{q/2}`.
    pub amplitude: f64,
    /// Unit axis in hyperboloidal coordinates.
    pub axis: Vec<f64>,
    /// Angular radius of the support, in radians.
    pub half_angle: f64,
}

/// Natural cubic spline of `|h|_b r^q` against `ln r`, held constant outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    u: Vec<f64>,
    m2: Vec<f64>,
}

impl RadialTable {
    /// `values[i]` is `|h|_b` at `radii[i]`; `q` is used to rescale before fitting.
    pub fn new(radii: Vec<f64>, values: Vec<f64>, q: f64) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return Err(Error::Validation("radial table needs at least two (r, value) pairs".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
            return Err(Error::Validation("radial table radii must be positive and increasing".into()));
        }
        let u: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = radii.iter().zip(&values).map(|(r, v)| v * r.powf(q)).collect();
        let m2 = natural_spline_moments(&u, &y);
        Ok(RadialTable { radii, values, u, m2 })
    }

    fn eval<S: Scalar>(&self, ln_r: &S, q: f64) -> S {
        let k = self.u.len();
        let x = ln_r.value();
        let y_at = |i: usize| self.values[i] * self.radii[i].powf(q);
        if x <= self.u[0] {
            return S::cst(y_at(0));
        }
        if x >= self.u[k - 1] {
            return S::cst(y_at(k - 1));
        }
        let i = match self.u.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(k - 2),
            Err(i) => i - 1,
        };
        let h = self.u[i + 1] - self.u[i];
        let a = (ln_r.clone() * -1.0 + self.u[i + 1]) / h;
        let b = (ln_r.clone() - self.u[i]) / h;
        let cube = |s: &S| s.clone() * s.clone() * s.clone();
        a.clone() * y_at(i)
            + b.clone() * y_at(i + 1)
            + (cube(&a) - a) * (self.m2[i] * h * h / 6.0)
            + (cube(&b) - b) * (self.m2[i + 1] * h * h / 6.0)
    }
}

fn natural_spline_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut m = vec![0.0; k];
    if k < 3 {
        return m;
    }
    // tridiagonal solve for interior second derivatives
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    for i in 1..k - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
        c[i] = h1 / diag;
        d[i] = (rhs - h0 * d[i - 1]) / diag;
    }
    for i in (1..k - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

/// Radial profiles `w` with `h = w(z) (z . dz)^2`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// AdS-Schwarzschild with mass parameter `m`.
    AdsTail { m: f64 },
    AngularBump(AngularBump),
    Table(RadialTable),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    Zero,
    /// `sum coeff * profile`, evaluated at `Q z` when a rotation `Q` is present.
    Radial { terms: Vec<(f64, Profile)>, rotation: Option<DMatrix<f64>> },
    /// `h = ((1 + m / 2r)^4 - 1) delta` on Euclidean space.
    Conformal { m: f64 },
}

/// User-facing description of a perturbation family.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub n: usize,
    pub q: f64,
    pub r_min: f64,
    pub terms: Vec<(f64, Profile)>,
    pub label: String,
}

impl PerturbationSpec {
    pub fn zero(n: usize, q: f64) -> Self {
        PerturbationSpec { n, q, r_min: 0.0, terms: Vec::new(), label: "zero".into() }
    }

    /// `lambda` times the AdS-Schwarzschild perturbation.
    pub fn scaled_ads_tail(n: usize, m: f64, lambda: f64) -> Self {
        PerturbationSpec {
            n,
            q: n as f64,
            r_min: 1.01 * horizon_radius(n, m),
            terms: vec![(lambda, Profile::AdsTail { m })],
            label: format!("scaled-ads(m={m}, lambda={lambda})"),
        }
    }

    /// `|h|_b = A phi(theta) (1 + r^2)^{-q/2}` along the radial direction, supported
    /// within `half_angle` of `axis`.
    pub fn angular_bump(n: usize, q: f64, amplitude: f64, axis: &[f64], half_angle: f64) -> Self {
        let len = crate::charts::norm(axis);
        PerturbationSpec {
            n,
            q,
            r_min: 1.0,
            terms: vec![(
                1.0,
                Profile::AngularBump(AngularBump {
                    amplitude,
                    axis: axis.iter().map(|a| a / len).collect(),
                    half_angle,
                }),
            )],
            label: format!("angular-bump(A={amplitude}, q={q})"),
        }
    }

    pub fn radial_table(n: usize, q: f64, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let r_min = radii.first().copied().unwrap_or(0.0);
        Ok(PerturbationSpec {
            n,
            q,
            r_min,
            terms: vec![(1.0, Profile::Table(RadialTable::new(radii, values, q)?))],
            label: "radial-table".into(),
        })
    }
}

/// Chart-independent pieces shared by every profile at one point.
struct Geo<S> {
    /// Hyperboloidal coordinates.
    z: Vec<S>,
    r2: S,
    /// `grad_xi (r^2 / 2)` in the chart of evaluation.
    g: Vec<S>,
}

fn geo<S: Scalar>(chart: ChartId, xi: &[S]) -> Geo<S> {
    let n = xi.len();
    match chart {
        ChartId::Hyperboloidal | ChartId::Cartesian => {
            let r2 = xi.iter().fold(S::cst(0.0), |acc, v| acc + v.clone() * v.clone());
            Geo { z: xi.to_vec(), r2, g: xi.to_vec() }
        }
        ChartId::Horospherical => {
            let x1 = xi[0].clone();
            let e = x1.exp();
            let rho2 = xi[1..].iter().fold(S::cst(0.0), |acc, v| acc + v.clone() * v.clone());
            let sh = (x1.clone() * 0.5).sinh();
            let tm1 = sh.clone() * sh * 2.0 + e.clone() * rho2.clone() * 0.5;
            let t = tm1.clone() + 1.0;
            let r2 = tm1 * (t.clone() + 1.0);
            let mut z = Vec::with_capacity(n);
            z.push(x1.sinh() * -1.0 + e.clone() * rho2 * 0.5);
            z.extend(xi[1..].iter().map(|v| e.clone() * v.clone()));
            let mut g = Vec::with_capacity(n);
            g.push(t.clone() * (t.clone() - (x1 * -1.0).exp()));
            g.extend(xi[1..].iter().map(|v| t.clone() * e.clone() * v.clone()));
            Geo { z, r2, g }
        }
        ChartId::HalfSpace => {
            let y1 = xi[0].clone();
            let hat2 = xi[1..].iter().fold(S::cst(0.0), |acc, v| acc + v.clone() * v.clone());
            let one_m = y1.clone() * -1.0 + 1.0;
            let tm1 = (one_m.clone() * one_m + hat2.clone()) / (y1.clone() * 2.0);
            let t = tm1.clone() + 1.0;
            let r2 = tm1 * (t.clone() + 1.0);
            let mut z = Vec::with_capacity(n);
            z.push((y1.clone() * y1.clone() + hat2.clone() - 1.0) / (y1.clone() * 2.0));
            z.extend(xi[1..].iter().map(|v| v.clone() / y1.clone()));
            let mut g = Vec::with_capacity(n);
            g.push(t.clone() * (y1.clone() * y1.clone() - hat2 - 1.0) / (y1.clone() * y1.clone() * 2.0));
            g.extend(xi[1..].iter().map(|v| t.clone() * v.clone() / y1.clone()));
            Geo { z, r2, g }
        }
    }
}

fn bump_phi<S: Scalar>(c: S, c0: f64) -> S {
    // exp(1 - 1/(1 - s^2)), s^2 = (1 - c)/(1 - c0)
    let s2 = (c * -1.0 + 1.0) / (1.0 - c0);
    if s2.value() >= 1.0 {
        return S::cst(0.0);
    }
    let d = s2 * -1.0 + 1.0;
    (d.recip() * -1.0 + 1.0).exp()
}

impl Profile {
    fn w<S: Scalar>(&self, n: usize, q: f64, z: &[S], r2: &S) -> S {
        let t2 = r2.clone() + 1.0;
        match self {
            Profile::AdsTail { m } => {
                // h_rr = 2m r^{2-n} / ((1+r^2)(1+r^2-2m r^{2-n})), w = h_rr / r^2
                let r = r2.sqrt();
                let rn = r.powi(n as i32);
                let mu = r2.clone() / rn.clone() * (2.0 * m);
                (rn * t2.clone() * (t2 - mu)).recip() * (2.0 * m)
            }
            Profile::AngularBump(bump) => {
                let r = r2.sqrt();
                let dot = z.iter().zip(&bump.axis).fold(S::cst(0.0), |acc, (zi, ai)| acc + zi.clone() * *ai);
                let phi = bump_phi(dot / r, bump.half_angle.cos());
                if phi.value() == 0.0 {
                    return S::cst(0.0);
                }
                phi * bump.amplitude * t2.powf(-0.5 * q - 1.0) / r2.clone()
            }
            Profile::Table(table) => {
                let ln_r = r2.ln() * 0.5;
                let eta = table.eval(&ln_r, q) * (ln_r * -q).exp();
                eta / (r2.clone() * t2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    pub n: usize,
    pub background: Background,
    pub q: f64,
    pub native_chart: ChartId,
    pub analytic_derivatives: bool,
    pub r_min: f64,
    pub label: String,
    pub perturbation: Perturbation,
}

/// Largest zero of `r^n + r^{n-2} - 2m`, by bisection.
pub fn horizon_radius(n: usize, m: f64) -> f64 {
    let f = |r: f64| r.powi(n as i32) + r.powi(n as i32 - 2) - 2.0 * m;
    let s = (2.0 * m).powf(1.0 / n as f64);
    let mut lo = (0.5 * s).max(f64::MIN_POSITIVE);
    let mut hi = (2.0 * s).max(2.0);
    while f(lo) > 0.0 {
        lo *= 0.5;
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Hyperbolic metric `b` with the requested chart as default chart.
pub fn hyperbolic_background(n: usize, chart: ChartId) -> MetricModel {
    assert!(n >= 3, "dimension must be at least 3");
    assert!(chart.is_hyperbolic(), "hyperbolic background needs a hyperbolic chart");
    MetricModel {
        n,
        background: Background::Hyperbolic,
        q: f64::INFINITY,
        native_chart: chart,
        analytic_derivatives: true,
        r_min: 0.0,
        label: "hyperbolic".into(),
        perturbation: Perturbation::Zero,
    }
}

/// Euclidean metric `delta` in the Cartesian chart.
pub fn euclidean_background(n: usize) -> MetricModel {
    MetricModel {
        n,
        background: Background::Euclidean,
        q: f64::INFINITY,
        native_chart: ChartId::Cartesian,
        analytic_derivatives: true,
        r_min: 0.0,
        label: "euclidean".into(),
        perturbation: Perturbation::Zero,
    }
}

/// AdS-Schwarzschild `dr^2/(1 + r^2 - 2m r^{2-n}) + r^2 g_S`.
pub fn ads_schwarzschild(n: usize, m: f64) -> Result<MetricModel> {
    if n < 3 || !(m > 0.0) {
        return Err(Error::Validation(format!("AdS-Schwarzschild needs n >= 3 and m > 0 (got n={n}, m={m})")));
    }
    Ok(MetricModel {
        n,
        background: Background::Hyperbolic,
        q: n as f64,
        native_chart: ChartId::Hyperboloidal,
        analytic_derivatives: true,
        r_min: 1.01 * horizon_radius(n, m),
        label: format!("ads-schwarzschild(n={n}, m={m})"),
        perturbation: Perturbation::Radial { terms: vec![(1.0, Profile::AdsTail { m })], rotation: None },
    })
}

/// Spatial Schwarzschild `(1 + m/2r)^4 delta` in three dimensions.
pub fn schwarzschild_af(m: f64) -> Result<MetricModel> {
    if !(m > 0.0) {
        return Err(Error::Validation(format!("Schwarzschild needs m > 0 (got {m})")));
    }
    Ok(MetricModel {
        n: 3,
        background: Background::Euclidean,
        q: 1.0,
        native_chart: ChartId::Cartesian,
        analytic_derivatives: true,
        r_min: 0.5 * m,
        label: format!("schwarzschild(m={m})"),
        perturbation: Perturbation::Conformal { m },
    })
}

/// Hyperbolic model from a perturbation spec, probed for positive definiteness.
pub fn custom_perturbation(spec: &PerturbationSpec) -> Result<MetricModel> {
    let n = spec.n;
    if n < 3 {
        return Err(Error::Validation("dimension must be at least 3".into()));
    }
    if !(spec.q > 0.5 * n as f64) {
        return Err(Error::Validation(format!("falloff q = {} must exceed n/2 = {}", spec.q, 0.5 * n as f64)));
    }
    let perturbation = if spec.terms.is_empty() {
        Perturbation::Zero
    } else {
        Perturbation::Radial { terms: spec.terms.clone(), rotation: None }
    };
    let model = MetricModel {
        n,
        background: Background::Hyperbolic,
        q: spec.q,
        native_chart: ChartId::Hyperboloidal,
        analytic_derivatives: true,
        r_min: spec.r_min,
        label: spec.label.clone(),
        perturbation,
    };
    model.probe_positive_definite()?;
    Ok(model)
}

impl MetricModel {
    pub fn is_hyperbolic(&self) -> bool {
        self.background == Background::Hyperbolic
    }

    pub fn has_perturbation(&self) -> bool {
        !matches!(self.perturbation, Perturbation::Zero)
    }

    /// The same metric expressed in coordinates `z' ` with `z = Q z'`.
    ///
    /// `h'(z') = Q^T h(Q z') Q`; for the radial families this only changes where
    /// the profile is sampled.
    pub fn rotated(&self, q: &DMatrix<f64>) -> MetricModel {
        let mut out = self.clone();
        if let Perturbation::Radial { rotation, .. } = &mut out.perturbation {
            *rotation = Some(match rotation.take() {
                Some(r) => r * q,
                None => q.clone(),
            });
        }
        out.label = format!("{} (rotated)", self.label);
        out
    }

    fn check_chart(&self, p: &Point) -> Result<()> {
        if p.dim() != self.n {
            return Err(Error::Domain(format!("point has dimension {}, model has {}", p.dim(), self.n)));
        }
        match (self.background, p.chart) {
            (Background::Euclidean, ChartId::Cartesian) => Ok(()),
            (Background::Hyperbolic, c) if c.is_hyperbolic() => Ok(()),
            _ => Err(Error::ChartMismatch(format!("{} model queried in the {} chart", self.label, p.chart.name()))),
        }
    }

    /// Domain check: chart compatibility and `r >= r_min`.
    pub fn check_domain(&self, p: &Point) -> Result<()> {
        self.check_chart(p)?;
        p.validate()?;
        let r = p.radius();
        if r < self.r_min {
            return Err(Error::Domain(format!("{}: r = {r} below r_min = {}", self.label, self.r_min)));
        }
        Ok(())
    }

    fn background_components<S: Scalar>(&self, chart: ChartId, xi: &[S]) -> Vec<S> {
        let n = xi.len();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        match chart {
            ChartId::Cartesian => {
                for i in 0..n {
                    for j in i..n {
                        out.push(S::cst(if i == j { 1.0 } else { 0.0 }));
                    }
                }
            }
            ChartId::Hyperboloidal => {
                let t2 = xi.iter().fold(S::cst(1.0), |acc, v| acc + v.clone() * v.clone());
                for i in 0..n {
                    for j in i..n {
                        let off = xi[i].clone() * xi[j].clone() / t2.clone() * -1.0;
                        out.push(if i == j { off + 1.0 } else { off });
                    }
                }
            }
            ChartId::HalfSpace => {
                let c = (xi[0].clone() * xi[0].clone()).recip();
                for i in 0..n {
                    for j in i..n {
                        out.push(if i == j { c.clone() } else { S::cst(0.0) });
                    }
                }
            }
            ChartId::Horospherical => {
                let e2 = (xi[0].clone() * 2.0).exp();
                for i in 0..n {
                    for j in i..n {
                        out.push(match (i == j, i) {
                            (true, 0) => S::cst(1.0),
                            (true, _) => e2.clone(),
                            _ => S::cst(0.0),
                        });
                    }
                }
            }
        }
        out
    }

    fn perturbation_components<S: Scalar>(&self, chart: ChartId, xi: &[S]) -> Vec<S> {
        let n = xi.len();
        let size = n * (n + 1) / 2;
        match &self.perturbation {
            Perturbation::Zero => vec![S::cst(0.0); size],
            Perturbation::Conformal { m } => {
                let r = xi.iter().fold(S::cst(0.0), |acc, v| acc + v.clone() * v.clone()).sqrt();
                let psi = r.recip() * (0.5 * m) + 1.0;
                let v = psi.powi(4) - 1.0;
                let mut out = Vec::with_capacity(size);
                for i in 0..n {
                    for j in i..n {
                        out.push(if i == j { v.clone() } else { S::cst(0.0) });
                    }
                }
                out
            }
            Perturbation::Radial { terms, rotation } => {
                let geo = geo(chart, xi);
                let z = match rotation {
                    None => geo.z,
                    Some(q) => (0..n)
                        .map(|i| (0..n).fold(S::cst(0.0), |acc, k| acc + geo.z[k].clone() * q[(i, k)]))
                        .collect(),
                };
                let w = terms
                    .iter()
                    .fold(S::cst(0.0), |acc, (c, prof)| acc + prof.w(n, self.q, &z, &geo.r2) * *c);
                let mut out = Vec::with_capacity(size);
                for i in 0..n {
                    for j in i..n {
                        out.push(w.clone() * geo.g[i].clone() * geo.g[j].clone());
                    }
                }
                out
            }
        }
    }

    /// Background metric `b` with analytic derivatives in the chart of `p`.
    pub fn background_jet(&self, p: &Point, order: Order) -> Result<TensorJet> {
        self.check_chart(p)?;
        let n = self.n;
        Ok(match order {
            Order::Zero => TensorJet::from_components(n, &self.background_components(p.chart, &p.coords), order),
            Order::One => TensorJet::from_components(
                n,
                &self.background_components(p.chart, &DualDVec64::seed(&p.coords)),
                order,
            ),
            Order::Two => TensorJet::from_components(
                n,
                &self.background_components(p.chart, &Dual2DVec64::seed(&p.coords)),
                order,
            ),
        })
    }

    /// Perturbation `h = g - b` in the chart of `p`.
    pub fn perturbation_jet(&self, p: &Point, order: Order, mode: DerivMode) -> Result<TensorJet> {
        self.check_domain(p)?;
        let n = self.n;
        if matches!(self.perturbation, Perturbation::Zero) {
            return Ok(TensorJet::zeros(n, order));
        }
        let jet = match (mode, order) {
            (_, Order::Zero) => {
                TensorJet::from_components(n, &self.perturbation_components(p.chart, &p.coords), order)
            }
            (DerivMode::Analytic, Order::One) => TensorJet::from_components(
                n,
                &self.perturbation_components(p.chart, &DualDVec64::seed(&p.coords)),
                order,
            ),
            (DerivMode::Analytic, Order::Two) => TensorJet::from_components(
                n,
                &self.perturbation_components(p.chart, &Dual2DVec64::seed(&p.coords)),
                order,
            ),
            (DerivMode::FiniteDifference, _) => fd_tensor_jet(&p.coords, order, |y| {
                let c = self.perturbation_components(p.chart, y);
                Ok(TensorJet::from_components(n, &c, Order::Zero).val)
            })?,
        };
        if jet.val.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("evaluating {} at {:?}", self.label, p.coords)));
        }
        Ok(jet)
    }

    /// Full metric `g = b + h` with derivatives.
    pub fn metric_jet(&self, p: &Point, order: Order, mode: DerivMode) -> Result<TensorJet> {
        match mode {
            DerivMode::Analytic => {
                Ok(self.background_jet(p, order)?.add(&self.perturbation_jet(p, order, mode)?))
            }
            DerivMode::FiniteDifference => {
                self.check_domain(p)?;
                fd_tensor_jet(&p.coords, order, |y| self.components_at(p.chart, y))
            }
        }
    }

    fn components_at(&self, chart: ChartId, y: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let b = TensorJet::from_components(n, &self.background_components(chart, y), Order::Zero).val;
        let h = TensorJet::from_components(n, &self.perturbation_components(chart, y), Order::Zero).val;
        Ok(b + h)
    }

    /// `g_ij` at `p`.
    pub fn components(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.check_domain(p)?;
        self.components_at(p.chart, &p.coords)
    }

    /// Check positive definiteness on a diagnostic grid of radii and directions.
    pub fn probe_positive_definite(&self) -> Result<()> {
        if !self.has_perturbation() {
            return Ok(());
        }
        let n = self.n;
        let r0 = self.r_min.max(1e-3);
        for k in 0..24 {
            let r = r0 * (1.0 + 0.5 * k as f64).powi(2);
            for d in 0..(2 * n) {
                let mut z = vec![0.0; n];
                z[d / 2] = if d % 2 == 0 { r } else { -r };
                // tilt off-axis to probe angular structure
                z[(d / 2 + 1) % n] += 0.3 * r;
                let p = Point::hyperboloidal(&z)?;
                if p.radius() < self.r_min {
                    continue;
                }
                let g = self.components(&p)?;
                let eig = g.symmetric_eigenvalues();
                if eig.iter().any(|e| !(*e > 0.0)) {
                    return Err(Error::Validation(format!(
                        "{}: metric not positive definite at z = {z:?}",
                        self.label
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn horospherical_background_components() {
        let b = hyperbolic_background(3, ChartId::Horospherical);
        let p = Point::horospherical(&[0.7, 0.2, -1.0]).unwrap();
        let g = b.components(&p).unwrap();
        let e2 = (1.4f64).exp();
        assert_eq!(g[(0, 0)], 1.0);
        assert_relative_eq!(g[(1, 1)], e2, max_relative = 1e-15);
        assert_relative_eq!(g[(2, 2)], e2, max_relative = 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(1, 2)], 0.0);
    }

    #[test]
    fn half_space_background_is_identity_at_unit_height() {
        let b = hyperbolic_background(3, ChartId::HalfSpace);
        let g = b.components(&Point::half_space(&[1.0, 0.3, -2.0]).unwrap()).unwrap();
        assert_relative_eq!(g, DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn horizon_radius_for_unit_mass() {
        // r^3 + r - 2 = (r - 1)(r^2 + r + 2)
        assert_relative_eq!(horizon_radius(3, 1.0), 1.0, max_relative = 1e-13);
        let m = 0.37;
        let r = horizon_radius(4, m);
        assert!((r.powi(4) + r * r - 2.0 * m).abs() < 1e-12);
        let tiny = horizon_radius(3, 1e-6);
        assert!((tiny.powi(3) + tiny - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn ads_rr_component_at_r10() {
        let g = ads_schwarzschild(3, 1.0).unwrap();
        let p = Point::hyperboloidal(&[10.0, 0.0, 0.0]).unwrap();
        let h = g.perturbation_jet(&p, Order::Zero, DerivMode::Analytic).unwrap();
        // along z1 the coordinate z1 is r, so h_11 = h_rr
        let oracle = 1.0 / (101.0 - 0.2) - 1.0 / 101.0;
        assert_relative_eq!(h.val[(0, 0)], oracle, max_relative = 1e-12);
        assert_relative_eq!(h.val[(0, 0)], 1.9645e-5, max_relative = 1e-4);
        assert_eq!(h.val[(1, 1)], 0.0);
    }

    #[test]
    fn ads_is_radial_only() {
        let g = ads_schwarzschild(3, 1.0).unwrap();
        let z = [3.0, -4.0, 12.0];
        let p = Point::hyperboloidal(&z).unwrap();
        let h = g.perturbation_jet(&p, Order::Zero, DerivMode::Analytic).unwrap().val;
        // any vector orthogonal to z is in the kernel of h
        let v = nalgebra::DVector::from_vec(vec![4.0, 3.0, 0.0]);
        assert!((&h * &v).norm() < 1e-20);
    }

    #[test]
    fn ads_domain_error_inside_horizon() {
        let g = ads_schwarzschild(3, 1.0).unwrap();
        assert_relative_eq!(g.r_min, 1.01, max_relative = 1e-12);
        let p = Point::hyperboloidal(&[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(g.components(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn small_mass_limit_approaches_background() {
        let g = ads_schwarzschild(3, 1e-12).unwrap();
        let b = hyperbolic_background(3, ChartId::Hyperboloidal);
        let p = Point::hyperboloidal(&[0.5, 1.0, 0.2]).unwrap();
        assert_relative_eq!(g.components(&p).unwrap(), b.components(&p).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn schwarzschild_conformal_factor() {
        let g = schwarzschild_af(1.0).unwrap();
        let c = g.components(&Point::cartesian(&[0.0, 2.0, 0.0]).unwrap()).unwrap();
        assert_eq!(c[(0, 0)], 2.441_406_25);
        assert_eq!(c[(0, 1)], 0.0);
        assert!(g.components(&Point::cartesian(&[0.4, 0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn scaled_ads_tail_matches_model() {
        let a = ads_schwarzschild(3, 1.0).unwrap();
        let s = custom_perturbation(&PerturbationSpec::scaled_ads_tail(3, 1.0, 1.0)).unwrap();
        let p = Point::horospherical(&[2.0, 0.3, 0.1]).unwrap();
        assert_eq!(a.components(&p).unwrap(), s.components(&p).unwrap());
    }

    #[test]
    fn zero_spec_is_background() {
        let s = custom_perturbation(&PerturbationSpec::zero(3, 3.0)).unwrap();
        let b = hyperbolic_background(3, ChartId::Hyperboloidal);
        let p = Point::hyperboloidal(&[0.5, 1.0, 0.2]).unwrap();
        assert_eq!(s.components(&p).unwrap(), b.components(&p).unwrap());
    }

    #[test]
    fn indefinite_perturbation_is_rejected() {
        let spec = PerturbationSpec::angular_bump(3, 3.0, -50.0, &[1.0, 0.0, 0.0], 1.0);
        assert!(matches!(custom_perturbation(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn pullback_agrees_across_charts() {
        let g = custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, 0.3, &[0.6, 0.8, 0.0], 1.0)).unwrap();
        let x = Point::horospherical(&[1.1, 0.9, 0.2]).unwrap();
        let z = x.to_chart(ChartId::Hyperboloidal).unwrap();
        let hx = g.perturbation_jet(&x, Order::Zero, DerivMode::Analytic).unwrap().val;
        let hz = g.perturbation_jet(&z, Order::Zero, DerivMode::Analytic).unwrap().val;
        // independent Jacobian dz/dx by central differences of the chart map
        let n = 3;
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut a = x.coords.clone();
            let mut b = x.coords.clone();
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let za = Point::horospherical(&a).unwrap().to_chart(ChartId::Hyperboloidal).unwrap();
            let zb = Point::horospherical(&b).unwrap().to_chart(ChartId::Hyperboloidal).unwrap();
            for i in 0..n {
                jac[(i, k)] = (za.coords[i] - zb.coords[i]) / 2e-6;
            }
        }
        let pulled = jac.transpose() * hz * &jac;
        assert_relative_eq!(hx, pulled, max_relative = 1e-7, epsilon = 1e-12);
        let bx = g.background_jet(&x, Order::Zero).unwrap().val;
        let bz = g.background_jet(&z, Order::Zero).unwrap().val;
        assert_relative_eq!(bx, jac.transpose() * bz * &jac, max_relative = 1e-7, epsilon = 1e-9);
    }

    #[test]
    fn radial_table_reproduces_power_law() {
        let radii: Vec<f64> = (0..12).map(|k| 2.0 * 1.5f64.powi(k)).collect();
        let values: Vec<f64> = radii.iter().map(|r| 0.2 * r.powf(-2.5)).collect();
        let spec = PerturbationSpec::radial_table(3, 2.5, radii, values).unwrap();
        let table = custom_perturbation(&spec).unwrap();
        let bump_free = custom_perturbation(&PerturbationSpec {
            n: 3,
            q: 2.5,
            r_min: 2.0,
            terms: vec![(1.0, Profile::Table(RadialTable::new(vec![1.0, 1e6], vec![0.2, 0.2 * 1e6f64.powf(-2.5)], 2.5).unwrap()))],
            label: "two-point".into(),
        })
        .unwrap();
        let p = Point::hyperboloidal(&[7.0, 2.0, -1.0]).unwrap();
        let a = table.components(&p).unwrap();
        let b = bump_free.components(&p).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
}
