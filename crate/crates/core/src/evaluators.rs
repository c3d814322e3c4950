//! Surface families and mass evaluators: coordinate spheres, horospheres,
//! truncated horosphere faces, the parabolic cylinder, regions at infinity,
//! and the asymptotically flat formulas.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::charts::{ChartId, Point};
use crate::error::{Error, Result};
use crate::geomkernel::{
    scalar_curvature, CoordinateFunction, HatRadius, LocalPerturbation, Radius, ScalarField, SurfaceDifference,
};
use crate::jet::{DerivMode, ScalarJet};
use crate::massform::{decomposition, mass_one_form_local, StaticPotential};
use crate::metrics::MetricModel;
use crate::quadrature::{
    gauss_legendre_interval, integrate_surface, linear_fit, par_sum, par_sum_vec, radial_nodes, sphere_area,
    sphere_nodes, tail_bound_horosphere, ConvergenceSeries, Estimate, Fit, QuadratureRule, RuleOrders,
};

/// Piece of the boundary of the parabolic cylinder `C_L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CylinderFace {
    /// `F+ = {x1 = L}`.
    Top,
    /// `F- = {x1 = -L}`, outward normal towards decreasing `x1`.
    Bottom,
    /// `S_L = {|x^| = sigma}`.
    Lateral,
    /// `E+ = {x1 = L, |x^| = sigma}`.
    TopEdge,
    /// `E- = {x1 = -L, |x^| = sigma}`.
    BottomEdge,
}

impl CylinderFace {
    pub fn name(self) -> &'static str {
        match self {
            CylinderFace::Top => "F+",
            CylinderFace::Bottom => "F-",
            CylinderFace::Lateral => "S_L",
            CylinderFace::TopEdge => "E+",
            CylinderFace::BottomEdge => "E-",
        }
    }

    pub fn is_edge(self) -> bool {
        matches!(self, CylinderFace::TopEdge | CylinderFace::BottomEdge)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    /// Coordinate sphere `|z| = r`, hyperboloidal chart.
    Sphere { r: f64 },
    /// Coordinate sphere `|x| = r` of an asymptotically flat chart.
    SphereAf { r: f64 },
    /// `{t - a.z = e^L}`; the disk radius comes from the rule.
    Horosphere { a: Vec<f64>, l: f64 },
    /// `{t - a.z = e^L, |x^| < sigma}`.
    HoroFace { a: Vec<f64>, l: f64, sigma: f64 },
    Cylinder { l: f64, sigma: f64, face: CylinderFace },
}

/// Level function whose level set is the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelFunction {
    Radius,
    /// `x1` in the horospherical chart.
    Height,
    /// `|x^|` in the horospherical chart.
    HatRadius,
}

impl LevelFunction {
    pub fn jet(self, p: &Point, mode: DerivMode) -> Result<ScalarJet> {
        match self {
            LevelFunction::Radius => Radius.jet(p, mode),
            LevelFunction::Height => CoordinateFunction(0).jet(p, mode),
            LevelFunction::HatRadius => HatRadius.jet(p, mode),
        }
    }
}

/// Quadrature node on a surface; `weight` carries the `b` (or `delta`) area element.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceNode {
    pub point: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub n: usize,
    pub surface: Surface,
}

fn unit_e1(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n];
    a[0] = 1.0;
    a
}

impl SurfaceSpec {
    pub fn sphere(n: usize, r: f64) -> Self {
        SurfaceSpec { n, surface: Surface::Sphere { r } }
    }

    pub fn sphere_af(n: usize, r: f64) -> Self {
        SurfaceSpec { n, surface: Surface::SphereAf { r } }
    }

    pub fn horosphere(a: &[f64], l: f64) -> Self {
        SurfaceSpec { n: a.len(), surface: Surface::Horosphere { a: a.to_vec(), l } }
    }

    pub fn horo_face(a: &[f64], l: f64, sigma: f64) -> Self {
        SurfaceSpec { n: a.len(), surface: Surface::HoroFace { a: a.to_vec(), l, sigma } }
    }

    pub fn cylinder(n: usize, l: f64, sigma: f64, face: CylinderFace) -> Self {
        SurfaceSpec { n, surface: Surface::Cylinder { l, sigma, face } }
    }

    /// Level function and orientation (`+1` along its gradient); `None` for edges.
    pub fn level(&self) -> Option<(LevelFunction, f64)> {
        match &self.surface {
            Surface::Sphere { .. } | Surface::SphereAf { .. } => Some((LevelFunction::Radius, 1.0)),
            Surface::Horosphere { .. } | Surface::HoroFace { .. } => Some((LevelFunction::Height, 1.0)),
            Surface::Cylinder { face, .. } => match face {
                CylinderFace::Top => Some((LevelFunction::Height, 1.0)),
                CylinderFace::Bottom => Some((LevelFunction::Height, -1.0)),
                CylinderFace::Lateral => Some((LevelFunction::HatRadius, 1.0)),
                _ => None,
            },
        }
    }

    /// Direction of the horosphere family, `e1` otherwise.
    pub fn direction(&self) -> Vec<f64> {
        match &self.surface {
            Surface::Horosphere { a, .. } | Surface::HoroFace { a, .. } => a.clone(),
            _ => unit_e1(self.n),
        }
    }

    /// Smallest `r` reached on the surface.
    pub fn min_radius(&self) -> f64 {
        match &self.surface {
            Surface::Sphere { r } | Surface::SphereAf { r } => *r,
            Surface::Horosphere { l, .. } | Surface::HoroFace { l, .. } => l.abs().sinh(),
            Surface::Cylinder { l, sigma, face } => {
                let x1 = match face {
                    CylinderFace::Bottom | CylinderFace::BottomEdge => -l,
                    _ => *l,
                };
                match face {
                    CylinderFace::Top | CylinderFace::Bottom => l.sinh(),
                    CylinderFace::TopEdge | CylinderFace::BottomEdge => crate::charts::radial_coordinate(x1, *sigma),
                    CylinderFace::Lateral => {
                        // r is increasing in |x^|; minimize over x1 in [-L, L]
                        let mut best = f64::INFINITY;
                        for k in 0..=400 {
                            let x = -l + 2.0 * l * k as f64 / 400.0;
                            best = best.min(crate::charts::radial_coordinate(x, *sigma));
                        }
                        best
                    }
                }
            }
        }
    }

    /// Default rule for this surface kind.
    pub fn default_rule(&self, orders: &RuleOrders) -> QuadratureRule {
        match &self.surface {
            Surface::Sphere { .. } | Surface::SphereAf { .. } => orders.sphere(),
            Surface::Horosphere { .. } => orders.disk(2.0),
            Surface::HoroFace { sigma, .. } => orders.disk(*sigma),
            Surface::Cylinder { sigma, face, .. } => match face {
                CylinderFace::Top | CylinderFace::Bottom => orders.disk(*sigma),
                CylinderFace::Lateral => orders.interval(),
                _ => orders.sphere(),
            },
        }
    }

    fn incompatible(&self, rule: &QuadratureRule) -> Error {
        Error::IncompatibleRule(format!("{rule:?} on {:?}", self.surface))
    }

    /// Nodes of `rule` on the surface. Horosphere-family points are in the
    /// horospherical chart of the frame where the direction is `e1`.
    pub fn nodes(&self, rule: &QuadratureRule) -> Result<Vec<SurfaceNode>> {
        let n = self.n;
        let disk = |x1: f64, rho_max: f64, radial: usize, polar: usize, azimuthal: usize| -> Result<Vec<SurfaceNode>> {
            let scale = ((n - 1) as f64 * x1).exp();
            let dirs = sphere_nodes(n - 2, polar, azimuthal);
            let mut out = Vec::new();
            for (rho, wr) in radial_nodes(radial, rho_max, &[]) {
                let jac = wr * rho.powi(n as i32 - 2) * scale;
                for (e, we) in &dirs {
                    let mut x = Vec::with_capacity(n);
                    x.push(x1);
                    x.extend(e.iter().map(|v| rho * v));
                    out.push(SurfaceNode { point: Point::horospherical(&x)?, weight: jac * we });
                }
            }
            Ok(out)
        };
        let sphere = |r: f64, chart: ChartId, polar: usize, azimuthal: usize| -> Result<Vec<SurfaceNode>> {
            let scale = r.powi(n as i32 - 1);
            sphere_nodes(n - 1, polar, azimuthal)
                .into_iter()
                .map(|(e, w)| {
                    let z: Vec<f64> = e.iter().map(|v| r * v).collect();
                    Ok(SurfaceNode { point: Point::new(chart, z)?, weight: w * scale })
                })
                .collect()
        };
        let edge = |x1: f64, sigma: f64, polar: usize, azimuthal: usize| -> Result<Vec<SurfaceNode>> {
            let scale = (x1.exp() * sigma).powi(n as i32 - 2);
            sphere_nodes(n - 2, polar, azimuthal)
                .into_iter()
                .map(|(e, w)| {
                    let mut x = vec![x1];
                    x.extend(e.iter().map(|v| sigma * v));
                    Ok(SurfaceNode { point: Point::horospherical(&x)?, weight: w * scale })
                })
                .collect()
        };
        match (&self.surface, *rule) {
            (Surface::Sphere { r }, QuadratureRule::SphereProduct { polar, azimuthal }) => {
                sphere(*r, ChartId::Hyperboloidal, polar, azimuthal)
            }
            (Surface::SphereAf { r }, QuadratureRule::SphereProduct { polar, azimuthal }) => {
                sphere(*r, ChartId::Cartesian, polar, azimuthal)
            }
            (Surface::Horosphere { l, .. }, QuadratureRule::HorospherePolar { radial, polar, azimuthal, rho_max }) => {
                disk(*l, rho_max, radial, polar, azimuthal)
            }
            (Surface::HoroFace { l, sigma, .. }, QuadratureRule::HorospherePolar { radial, polar, azimuthal, .. }) => {
                disk(*l, *sigma, radial, polar, azimuthal)
            }
            (Surface::Cylinder { l, sigma, face }, rule) => match (face, rule) {
                (CylinderFace::Top, QuadratureRule::HorospherePolar { radial, polar, azimuthal, .. }) => {
                    disk(*l, *sigma, radial, polar, azimuthal)
                }
                (CylinderFace::Bottom, QuadratureRule::HorospherePolar { radial, polar, azimuthal, .. }) => {
                    disk(-l, *sigma, radial, polar, azimuthal)
                }
                (CylinderFace::Lateral, QuadratureRule::Interval { order, polar, azimuthal }) => {
                    let dirs = sphere_nodes(n - 2, polar, azimuthal);
                    let mut out = Vec::new();
                    for (x1, wx) in gauss_legendre_interval(order, -l, *l) {
                        let jac = wx * (x1.exp() * sigma).powi(n as i32 - 2);
                        for (e, we) in &dirs {
                            let mut x = vec![x1];
                            x.extend(e.iter().map(|v| sigma * v));
                            out.push(SurfaceNode { point: Point::horospherical(&x)?, weight: jac * we });
                        }
                    }
                    Ok(out)
                }
                (CylinderFace::TopEdge, QuadratureRule::SphereProduct { polar, azimuthal }) => {
                    edge(*l, *sigma, polar, azimuthal)
                }
                (CylinderFace::BottomEdge, QuadratureRule::SphereProduct { polar, azimuthal }) => {
                    edge(-l, *sigma, polar, azimuthal)
                }
                _ => Err(self.incompatible(&rule)),
            },
            (_, rule) => Err(self.incompatible(&rule)),
        }
    }

    /// Closed-form background area of the surface (disk radius from the rule
    /// for a full horosphere).
    pub fn b_area(&self, rule: &QuadratureRule) -> Option<f64> {
        let n = self.n;
        let nf = n as f64;
        let disk = |x1: f64, rho: f64| ((nf - 1.0) * x1).exp() * sphere_area(n - 2) * rho.powi(n as i32 - 1) / (nf - 1.0);
        match (&self.surface, rule) {
            (Surface::Sphere { r } | Surface::SphereAf { r }, _) => Some(sphere_area(n - 1) * r.powi(n as i32 - 1)),
            (Surface::Horosphere { l, .. }, QuadratureRule::HorospherePolar { rho_max, .. }) => Some(disk(*l, *rho_max)),
            (Surface::HoroFace { l, sigma, .. }, _) => Some(disk(*l, *sigma)),
            (Surface::Cylinder { l, sigma, face }, _) => Some(match face {
                CylinderFace::Top => disk(*l, *sigma),
                CylinderFace::Bottom => disk(-l, *sigma),
                CylinderFace::Lateral => {
                    let k = nf - 2.0;
                    let s = sphere_area(n - 2) * sigma.powi(n as i32 - 2);
                    if k == 0.0 {
                        s * 2.0 * l
                    } else {
                        s * 2.0 * (k * l).sinh() / k
                    }
                }
                CylinderFace::TopEdge => sphere_area(n - 2) * (l.exp() * sigma).powi(n as i32 - 2),
                CylinderFace::BottomEdge => sphere_area(n - 2) * ((-l).exp() * sigma).powi(n as i32 - 2),
            }),
            _ => None,
        }
    }
}

/// Orthogonal `Q` with `Q e1 = a` (a Householder reflection, or the identity).
pub fn frame_for_direction(a: &[f64]) -> DMatrix<f64> {
    let n = a.len();
    let mut v = DVector::from_column_slice(a);
    v[0] -= 1.0;
    let vv = v.norm_squared();
    if vv < 1e-30 {
        return DMatrix::identity(n, n);
    }
    DMatrix::identity(n, n) - &v * v.transpose() * (2.0 / vv)
}

/// The model in the frame where the horosphere direction `a` becomes `e1`.
pub fn model_in_frame(model: &MetricModel, a: &[f64]) -> Result<MetricModel> {
    if a.len() != model.n {
        return Err(Error::Validation(format!("direction has {} components, model dimension is {}", a.len(), model.n)));
    }
    let len = crate::charts::norm(a);
    if (len - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("direction must be a unit vector (|a| = {len})")));
    }
    if (a[0] - 1.0).abs() < 1e-15 {
        return Ok(model.clone());
    }
    Ok(model.rotated(&frame_for_direction(a)))
}

/// Rule orders and derivative route shared by the evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub orders: RuleOrders,
    pub mode: DerivMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { orders: RuleOrders::default(), mode: DerivMode::Analytic }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadingParams {
    /// `"L"` or `"r"`.
    pub name: String,
    pub value: f64,
    pub sigma: Option<f64>,
    pub rho_max: Option<f64>,
    pub orders: RuleOrders,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassReading {
    pub value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
    pub params: ReadingParams,
    pub notes: Vec<String>,
}

impl MassReading {
    fn new(est: Estimate, tail_bound: f64, params: ReadingParams) -> Result<Self> {
        if !est.value.is_finite() || !est.quad_error.is_finite() {
            return Err(Error::NonFinite(format!("mass reading at {} = {}", params.name, params.value)));
        }
        Ok(MassReading { value: est.value, quad_error: est.quad_error, tail_bound, params, notes: Vec::new() })
    }
}

fn params(name: &str, value: f64, opts: &EvalOptions) -> ReadingParams {
    ReadingParams { name: name.into(), value, sigma: None, rho_max: None, orders: opts.orders }
}

fn require_hyperbolic(model: &MetricModel, what: &str) -> Result<()> {
    if model.is_hyperbolic() {
        Ok(())
    } else {
        Err(Error::UnsupportedSurface(format!("{what} needs a hyperbolic-background model, got {}", model.label)))
    }
}

fn require_inside(model: &MetricModel, spec: &SurfaceSpec) -> Result<()> {
    let r = spec.min_radius();
    if r <= model.r_min {
        return Err(Error::Domain(format!(
            "{:?} reaches r = {r:.6} inside r_min = {} of {}",
            spec.surface, model.r_min, model.label
        )));
    }
    Ok(())
}

/// Local data at a level-set node.
struct NodeData {
    local: LocalPerturbation,
    surf: SurfaceDifference,
}

fn node_data(model: &MetricModel, level: (LevelFunction, f64), p: &Point, mode: DerivMode) -> Result<NodeData> {
    let local = LocalPerturbation::new(model, p, mode)?;
    let w = level.0.jet(p, mode)?;
    let surf = SurfaceDifference::new(&local, &w, level.1)?;
    Ok(NodeData { local, surf })
}

/// `2 V (H_b - H_g) dsigma_g / dsigma_b`.
fn mean_curvature_density(d: &NodeData, v: f64) -> f64 {
    -2.0 * v * d.surf.dh * (1.0 + d.surf.area_ratio_m1)
}

/// Integral of `U(V)(nu0)` over a level-set surface with outward/stated normal.
fn flux_integral(model: &MetricModel, spec: &SurfaceSpec, v: &StaticPotential, rule: &QuadratureRule, mode: DerivMode) -> Result<Estimate> {
    let level = spec.level().ok_or_else(|| Error::UnsupportedSurface(format!("{:?} is not a level set", spec.surface)))?;
    integrate_surface(
        spec,
        |node| {
            let d = node_data(model, level, &node.point, mode)?;
            let vj = v.jet(&node.point, mode)?;
            Ok(node.weight * mass_one_form_local(&d.local, &vj, &d.surf.nu0))
        },
        rule,
    )
}

/// `2 int V (H_b - H_g) dsigma_g` over a level-set surface.
fn mean_curvature_integral(model: &MetricModel, spec: &SurfaceSpec, v: &StaticPotential, rule: &QuadratureRule, mode: DerivMode) -> Result<Estimate> {
    let level = spec.level().ok_or_else(|| Error::UnsupportedSurface(format!("{:?} is not a level set", spec.surface)))?;
    integrate_surface(
        spec,
        |node| {
            let d = node_data(model, level, &node.point, mode)?;
            let vv = v.value(&node.point)?;
            Ok(node.weight * mean_curvature_density(&d, vv))
        },
        rule,
    )
}

/// `int_{S_r} U(V)(nu0) dsigma_b` with the outward normal.
pub fn sphere_mass_integral(model: &MetricModel, v: &StaticPotential, r: f64, opts: &EvalOptions) -> Result<MassReading> {
    require_hyperbolic(model, "sphere_mass_integral")?;
    let spec = SurfaceSpec::sphere(model.n, r);
    require_inside(model, &spec)?;
    let est = flux_integral(model, &spec, v, &opts.orders.sphere(), opts.mode)?;
    MassReading::new(est, 0.0, params("r", r, opts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassVector {
    pub p0: f64,
    pub p: Vec<f64>,
    /// `p0^2 - |p|^2`.
    pub minkowski_sq: f64,
    /// Fits of `p0, p1, ..., pn` against `ln r`.
    pub fits: Vec<Fit>,
    /// Readings at each radius, components in the order `p0, p1, ..., pn`.
    pub readings: Vec<Vec<MassReading>>,
    /// `Some(true)` when sampled `R_g >= -n(n-1)` yet `p0 < |p|`.
    pub positivity_flag: Option<bool>,
    pub notes: Vec<String>,
}

/// All components `p0 = H(t)`, `p_i = H(z_i)` on the same spheres, one pass per radius.
pub fn sphere_mass_components(model: &MetricModel, r: f64, opts: &EvalOptions) -> Result<Vec<MassReading>> {
    require_hyperbolic(model, "mass_vector")?;
    let n = model.n;
    let spec = SurfaceSpec::sphere(n, r);
    require_inside(model, &spec)?;
    let potentials: Vec<StaticPotential> =
        std::iter::once(StaticPotential::time(n)).chain((0..n).map(|i| StaticPotential::coordinate(n, i))).collect();
    let mode = opts.mode;
    let eval = |rule: &QuadratureRule| -> Result<Vec<f64>> {
        let nodes = spec.nodes(rule)?;
        par_sum_vec(&nodes, n + 1, |node| {
            let d = node_data(model, (LevelFunction::Radius, 1.0), &node.point, mode)?;
            potentials
                .iter()
                .map(|v| {
                    let vj = v.jet(&node.point, mode)?;
                    Ok(node.weight * mass_one_form_local(&d.local, &vj, &d.surf.nu0))
                })
                .collect()
        })
    };
    let rule = opts.orders.sphere();
    let full = eval(&rule)?;
    let half = eval(&rule.half_order())?;
    full.iter()
        .zip(&half)
        .map(|(f, h)| MassReading::new(Estimate { value: *f, quad_error: (f - h).abs() }, 0.0, params("r", r, opts)))
        .collect()
}

fn sampled_curvature_ok(model: &MetricModel, r: f64, mode: DerivMode) -> Result<bool> {
    let n = model.n;
    let bound = -((n * (n - 1)) as f64);
    for k in 0..(2 * n) {
        let mut z = vec![0.0; n];
        z[k / 2] = if k % 2 == 0 { r } else { -r };
        let p = Point::hyperboloidal(&z)?;
        if scalar_curvature(model, &p, mode)? < bound - 1e-8 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Mass vector from spheres at increasing radii, extrapolated in `ln r`.
pub fn mass_vector(model: &MetricModel, r_list: &[f64], opts: &EvalOptions) -> Result<MassVector> {
    if r_list.len() < 3 || r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("mass_vector needs at least 3 increasing radii".into()));
    }
    let n = model.n;
    let readings: Vec<Vec<MassReading>> =
        r_list.iter().map(|&r| sphere_mass_components(model, r, opts)).collect::<Result<_>>()?;
    let scale = readings.iter().flat_map(|row| row.iter().map(|x| x.value.abs())).fold(0.0, f64::max);
    let mut fits = Vec::with_capacity(n + 1);
    for c in 0..=n {
        let mut s = ConvergenceSeries::new("r", true);
        s.floor = 1e-11 * scale + 1e-13;
        for (r, row) in r_list.iter().zip(&readings) {
            s.push(*r, row[c].value, row[c].quad_error);
        }
        fits.push(s.extrapolate()?);
    }
    let p0 = fits[0].limit;
    let p: Vec<f64> = fits[1..].iter().map(|f| f.limit).collect();
    let pn = p.iter().map(|x| x * x).sum::<f64>();
    let mut notes = Vec::new();
    let positivity_flag = if model.has_perturbation() {
        let ok = sampled_curvature_ok(model, *r_list.last().unwrap(), opts.mode)?;
        let violated = ok && p0 < pn.sqrt();
        if violated {
            notes.push("sampled R_g >= -n(n-1) but p0 < |p|".into());
        }
        Some(violated)
    } else {
        None
    };
    Ok(MassVector { p0, p, minkowski_sq: p0 * p0 - pn, fits, readings, positivity_flag, notes })
}

/// `sup r^q max(|h|_b, |nabla h|_b)` sampled on `H_L` beyond `|x^| = rho_from`.
pub fn falloff_constant(model: &MetricModel, l: f64, rho_from: f64, mode: DerivMode) -> Result<f64> {
    if !model.has_perturbation() {
        return Ok(0.0);
    }
    let n = model.n;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 1..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n - 1];
            d[k - 1] = s;
            dirs.push(d);
        }
    }
    let diag = 1.0 / ((n - 1) as f64).sqrt();
    dirs.push(vec![diag; n - 1]);
    dirs.push(vec![-diag; n - 1]);
    let samples: Vec<Vec<f64>> = (0..=24)
        .flat_map(|j| {
            let rho = rho_from * 2f64.powf(0.5 * j as f64);
            dirs.iter()
                .map(move |d| std::iter::once(l).chain(d.iter().map(|x| rho * x)).collect::<Vec<f64>>())
                .collect::<Vec<_>>()
        })
        .collect();
    let vals: Vec<f64> = samples
        .iter()
        .map(|x| {
            let p = Point::horospherical(x)?;
            let local = LocalPerturbation::new(model, &p, mode)?;
            Ok(p.radius().powf(model.q) * local.h_norm().max(local.nabla_h_norm()))
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Maximum number of `rho_max` doublings in the automatic policy.
pub const MAX_DOUBLINGS: u32 = 12;
/// Initial disk radius for the automatic policy.
pub const RHO_MAX_START: f64 = 2.0;
/// Target tail-to-value ratio for the automatic policy.
pub const TAIL_TARGET: f64 = 1e-3;

/// `2 int_{H_L, |x^| <= rho_max} V (H_b - H_g) dsigma_g` with `V = t - a.z`,
/// estimating `p0 - a.p`. `rho_max = None` selects it by tail bound.
pub fn horosphere_mass(model: &MetricModel, a: &[f64], l: f64, rho_max: Option<f64>, opts: &EvalOptions) -> Result<MassReading> {
    require_hyperbolic(model, "horosphere_mass")?;
    let framed = model_in_frame(model, a)?;
    let n = model.n;
    let spec = SurfaceSpec::horosphere(&unit_e1(n), l);
    require_inside(model, &spec)?;
    let v = StaticPotential::horosphere(n, &unit_e1(n))?;
    let run = |rho: f64| mean_curvature_integral(&framed, &spec, &v, &opts.orders.disk(rho), opts.mode);
    let bound = |rho: f64, c_h: f64| tail_bound_horosphere(n, model.q, l, rho, c_h);
    let mut notes = Vec::new();
    let (rho, est, c_h) = match rho_max {
        Some(rho) => {
            let c_h = falloff_constant(&framed, l, rho, opts.mode)?;
            (rho, run(rho)?, c_h)
        }
        None => {
            let c_h = falloff_constant(&framed, l, RHO_MAX_START, opts.mode)?;
            let first = run(RHO_MAX_START)?;
            let b0 = bound(RHO_MAX_START, c_h)?;
            let target = TAIL_TARGET * first.value.abs();
            let mut doublings = 0;
            if b0 > target {
                let expo = 2.0 * model.q + 1.0 - n as f64;
                doublings = ((b0 / target).log2() / expo).ceil() as u32;
                if doublings > MAX_DOUBLINGS {
                    notes.push(format!("rho_max capped after {MAX_DOUBLINGS} doublings"));
                    doublings = MAX_DOUBLINGS;
                }
            }
            let rho = RHO_MAX_START * 2f64.powi(doublings as i32);
            let est = if doublings == 0 { first } else { run(rho)? };
            (rho, est, c_h)
        }
    };
    let tail = bound(rho, c_h)?;
    if tail > 10.0 * est.value.abs() {
        return Err(Error::TailDominates { tail, value: est.value });
    }
    let mut p = params("L", l, opts);
    p.rho_max = Some(rho);
    let mut reading = MassReading::new(est, tail, p)?;
    reading.notes = notes;
    Ok(reading)
}

/// `2 int_{Sigma_L} V (H_b - H_g) dsigma_g` over `{x1 = L, |x^| < sigma}`, `V = t - z1`.
pub fn face_mass(model: &MetricModel, l: f64, sigma: f64, opts: &EvalOptions) -> Result<MassReading> {
    face_mass_along(model, &unit_e1(model.n), l, sigma, opts)
}

/// [`face_mass`] for the horosphere family based at `a`.
pub fn face_mass_along(model: &MetricModel, a: &[f64], l: f64, sigma: f64, opts: &EvalOptions) -> Result<MassReading> {
    require_hyperbolic(model, "face_mass")?;
    if !(sigma > 0.0) {
        return Err(Error::Validation(format!("face radius sigma must be positive, got {sigma}")));
    }
    let framed = model_in_frame(model, a)?;
    let n = model.n;
    let spec = SurfaceSpec::horo_face(&unit_e1(n), l, sigma);
    require_inside(model, &spec)?;
    let v = StaticPotential::horosphere(n, &unit_e1(n))?;
    let est = mean_curvature_integral(&framed, &spec, &v, &opts.orders.disk(sigma), opts.mode)?;
    let mut p = params("L", l, opts);
    p.sigma = Some(sigma);
    MassReading::new(est, 0.0, p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaCondition {
    pub satisfied: bool,
    /// `-(k(n-2-2q) + (n-1-q))`; positive when the edge and lateral terms vanish.
    pub margin: f64,
    /// `q = n - 1`: the lateral estimate carries an extra factor `L`.
    pub log_factor: bool,
}

/// Growth condition on `sigma(L) = e^{kL}` making the top-edge and lateral terms vanish.
pub fn sigma_condition_check(n: usize, q: f64, k: f64) -> SigmaCondition {
    let nf = n as f64;
    let expr = k * (nf - 2.0 - 2.0 * q) + (nf - 1.0 - q);
    let pre = q > 0.5 * nf && k > 0.0;
    let satisfied = pre && (q > nf - 1.0 || expr < 0.0);
    SigmaCondition { satisfied, margin: -expr, log_factor: (q - (nf - 1.0)).abs() < 1e-12 }
}

/// `k = (n-2)/4`, the smallest exponent that works for every admissible `q`.
pub fn sigma_k_universal(n: usize) -> f64 {
    (n as f64 - 2.0) / 4.0
}

/// `k = n/2`, the exponent used for the top-face theorem.
pub fn sigma_k_top_face(n: usize) -> f64 {
    n as f64 / 2.0
}

/// Predicted decay exponents in `L` for the cylinder pieces, for `sigma = e^{kL}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderExponents {
    /// `int_{F-} V |h|_b`.
    pub bottom: f64,
    /// `int_{E+} V |h|_b`.
    pub top_edge: f64,
    /// `int_{E-} V |h|_b`.
    pub bottom_edge: f64,
    /// `int_{S_L} V |h|_b`.
    pub lateral: f64,
    /// `int_{F+} V |h|_b^2`.
    pub top_quadratic: f64,
    /// Horosphere minus truncated face.
    pub horosphere_minus_face: f64,
}

pub fn predicted_exponents(n: usize, q: f64, k: f64) -> CylinderExponents {
    let nf = n as f64;
    let bottom_edge = if k > 1.0 {
        (q - nf + 1.0) + k * (nf - 2.0 - 2.0 * q)
    } else {
        -(nf - 1.0 + q) + k * (nf - 2.0)
    };
    CylinderExponents {
        bottom: -nf - q + (nf - 1.0) * k.min(1.0),
        top_edge: (nf - 1.0 - q) + k * (nf - 2.0 - 2.0 * q),
        bottom_edge,
        lateral: (nf - 1.0 - q).abs() + k * (nf - 2.0 - 2.0 * q),
        top_quadratic: nf - 2.0 * q,
        horosphere_minus_face: (nf - q) + k * (nf - 1.0 - 2.0 * q),
    }
}

/// Per-piece results of the cylinder flux computation.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    pub face: CylinderFace,
    /// `int U(V)(nu0) dsigma_b` (faces) or `int V h(nu, eta) ds_b` (edges).
    pub direct: MassReading,
    /// Mean-curvature route: `int [2V(H_b-H_g) dsigma_g/dsigma_b + trace + <A,h>]`; zero for edges.
    pub decomposed: f64,
    /// `int V |h|_b` (faces and edges).
    pub magnitude: f64,
    /// `int |remainder| dsigma_b`.
    pub remainder: f64,
    /// `int V |h|_b^2 dsigma_b`.
    pub quadratic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderReport {
    pub l: f64,
    pub sigma: f64,
    pub faces: Vec<FaceFlux>,
    /// Sum of the direct face fluxes.
    pub total: f64,
    /// Sum of the decomposed face values minus the edge fluxes.
    pub total_decomposed: f64,
    pub remainder_bound: f64,
    pub consistent: bool,
}

impl CylinderReport {
    pub fn face(&self, f: CylinderFace) -> &FaceFlux {
        self.faces.iter().find(|x| x.face == f).expect("every piece is reported")
    }
}

fn face_flux(model: &MetricModel, v: &StaticPotential, spec: &SurfaceSpec, opts: &EvalOptions) -> Result<FaceFlux> {
    let Surface::Cylinder { l, sigma, face } = spec.surface else {
        return Err(Error::UnsupportedSurface(format!("{:?} is not a cylinder piece", spec.surface)));
    };
    let mode = opts.mode;
    let rule = spec.default_rule(&opts.orders);
    let mut p = params("L", l, opts);
    p.sigma = Some(sigma);
    if face.is_edge() {
        // h(nu_F, eta_F) + h(nu_S, eta_S) = 2 h(e^{-x1} d_1, e^{-x1} rho^ d_rho) at the edge
        let eval = |rule: &QuadratureRule| -> Result<Vec<f64>> {
            let nodes = spec.nodes(rule)?;
            par_sum_vec(&nodes, 3, |node| {
                let x = &node.point.coords;
                let local = LocalPerturbation::new(model, &node.point, mode)?;
                let vv = v.value(&node.point)?;
                let e = (-x[0]).exp();
                let sign = if face == CylinderFace::TopEdge { 1.0 } else { -1.0 };
                let mut nu = DVector::zeros(model.n);
                nu[0] = sign * e;
                let mut eta = DVector::zeros(model.n);
                for i in 1..model.n {
                    eta[i] = e * x[i] / sigma;
                }
                let hn = local.h_norm();
                Ok(vec![
                    node.weight * 2.0 * vv * (&local.h * &nu).dot(&eta),
                    node.weight * vv.abs() * hn,
                    node.weight * vv.abs() * hn * hn,
                ])
            })
        };
        let full = eval(&rule)?;
        let half = eval(&rule.half_order())?;
        let direct = MassReading::new(Estimate { value: full[0], quad_error: (full[0] - half[0]).abs() }, 0.0, p)?;
        return Ok(FaceFlux { face, direct, decomposed: 0.0, magnitude: full[1], remainder: 0.0, quadratic: full[2] });
    }
    let level = spec.level().expect("faces are level sets");
    let eval = |rule: &QuadratureRule| -> Result<Vec<f64>> {
        let nodes = spec.nodes(rule)?;
        par_sum_vec(&nodes, 5, |node| {
            let d = node_data(model, level, &node.point, mode)?;
            let vj = v.jet(&node.point, mode)?;
            let s = decomposition(&d.local, &vj, &d.surf)?;
            let hn = d.local.h_norm();
            let mean_g = mean_curvature_density(&d, vj.value);
            // U = mean_b + trace + <A,h> - div + R; the area mismatch of the mean term joins R
            let decomposed = mean_g + s.trace_term + s.a_dot_h_term;
            let rem = s.remainder - (mean_g - s.mean_curv_term);
            Ok(vec![
                node.weight * s.value,
                node.weight * decomposed,
                node.weight * vj.value.abs() * hn,
                node.weight * rem.abs(),
                node.weight * vj.value.abs() * hn * hn,
            ])
        })
    };
    let full = eval(&rule)?;
    let half = eval(&rule.half_order())?;
    let direct = MassReading::new(Estimate { value: full[0], quad_error: (full[0] - half[0]).abs() }, 0.0, p)?;
    Ok(FaceFlux {
        face,
        direct,
        decomposed: full[1],
        magnitude: full[2],
        remainder: full[3],
        quadratic: full[4],
    })
}

/// Flux of `U(V)` through each piece of `partial C_L`, directly and through
/// the mean-curvature decomposition with edge fluxes.
pub fn cylinder_flux_report(model: &MetricModel, v: &StaticPotential, l: f64, sigma: f64, opts: &EvalOptions) -> Result<CylinderReport> {
    require_hyperbolic(model, "cylinder_flux_report")?;
    if !(l > 0.0 && sigma > 0.0) {
        return Err(Error::Validation(format!("cylinder needs L > 0 and sigma > 0 (got L={l}, sigma={sigma})")));
    }
    let n = model.n;
    let pieces = [
        CylinderFace::Top,
        CylinderFace::Bottom,
        CylinderFace::Lateral,
        CylinderFace::TopEdge,
        CylinderFace::BottomEdge,
    ];
    let mut faces = Vec::with_capacity(pieces.len());
    for f in pieces {
        let spec = SurfaceSpec::cylinder(n, l, sigma, f);
        require_inside(model, &spec)?;
        faces.push(face_flux(model, v, &spec, opts)?);
    }
    let total: f64 = faces.iter().filter(|f| !f.face.is_edge()).map(|f| f.direct.value).sum();
    let edges: f64 = faces.iter().filter(|f| f.face.is_edge()).map(|f| f.direct.value).sum();
    let total_decomposed = faces.iter().filter(|f| !f.face.is_edge()).map(|f| f.decomposed).sum::<f64>() - edges;
    let quad: f64 = faces.iter().map(|f| f.direct.quad_error).sum();
    let remainder_bound = faces.iter().map(|f| f.remainder).sum::<f64>() + 10.0 * quad + 1e-10 * total.abs() + 1e-12;
    let consistent = (total - total_decomposed).abs() <= remainder_bound;
    Ok(CylinderReport { l, sigma, faces, total, total_decomposed, remainder_bound, consistent })
}

/// Region of hyperbolic space in half-space coordinates `(y1, y^)`.
#[derive(Clone)]
pub enum RegionSpec {
    Full,
    Empty,
    /// `{y^ . normal > offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// `{lo < y^ . normal < hi}`.
    Slab { normal: Vec<f64>, lo: f64, hi: f64 },
    /// Euclidean cone in `(y1, y^)` with apex at the origin.
    Cone { axis: Vec<f64>, half_angle: f64 },
    Complement(Box<RegionSpec>),
    /// Arbitrary membership test.
    Predicate(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>),
}

impl fmt::Debug for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionSpec::Full => write!(f, "Full"),
            RegionSpec::Empty => write!(f, "Empty"),
            RegionSpec::HalfSpace { normal, offset } => write!(f, "HalfSpace({normal:?}, {offset})"),
            RegionSpec::Slab { normal, lo, hi } => write!(f, "Slab({normal:?}, {lo}, {hi})"),
            RegionSpec::Cone { axis, half_angle } => write!(f, "Cone({axis:?}, {half_angle})"),
            RegionSpec::Complement(r) => write!(f, "Complement({r:?})"),
            RegionSpec::Predicate(_) => write!(f, "Predicate"),
        }
    }
}

impl RegionSpec {
    /// Signed membership: positive inside. Continuous for the named families.
    pub fn level(&self, y: &[f64]) -> f64 {
        let dot_hat = |v: &[f64]| y[1..].iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        match self {
            RegionSpec::Full => 1.0,
            RegionSpec::Empty => -1.0,
            RegionSpec::HalfSpace { normal, offset } => dot_hat(normal) - offset,
            RegionSpec::Slab { normal, lo, hi } => {
                let s = dot_hat(normal);
                (s - lo).min(hi - s)
            }
            RegionSpec::Cone { axis, half_angle } => {
                let d: f64 = y.iter().zip(axis).map(|(a, b)| a * b).sum();
                d - crate::charts::norm(y) * half_angle.cos()
            }
            RegionSpec::Complement(r) => -r.level(y),
            RegionSpec::Predicate(f) => {
                if f(y) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.level(y) > 0.0
    }

    /// Inside intervals of `[0, rho_max]` along `y = (y1, rho omega)`.
    pub fn ray_intervals(&self, y1: f64, omega: &[f64], rho_max: f64) -> Vec<(f64, f64)> {
        let at = |rho: f64| {
            let mut y = Vec::with_capacity(omega.len() + 1);
            y.push(y1);
            y.extend(omega.iter().map(|w| rho * w));
            self.level(&y)
        };
        let mut grid: Vec<f64> = (0..=256).map(|j| rho_max * j as f64 / 256.0).collect();
        grid.extend((1..=80).map(|j| rho_max * 2f64.powi(-j)));
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let mut cuts = vec![0.0];
        let mut prev = (grid[0], at(grid[0]) > 0.0);
        for &rho in &grid[1..] {
            let inside = at(rho) > 0.0;
            if inside != prev.1 {
                let (mut a, mut b) = (prev.0, rho);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if (at(m) > 0.0) == prev.1 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                cuts.push(0.5 * (a + b));
            }
            prev = (rho, inside);
        }
        cuts.push(rho_max);
        cuts.windows(2)
            .filter(|w| w[1] > w[0] && at(0.5 * (w[0] + w[1])) > 0.0)
            .map(|w| (w[0], w[1]))
            .collect()
    }
}

/// `Theta(U, L) = e^{-L(n-1)} |U cap Sigma_L|_b`: the Euclidean measure of the
/// footprint of `U` in the disk `|y^| < sigma` at height `y1 = e^{-L}`.
pub fn theta(n: usize, region: &RegionSpec, l: f64, sigma: f64, orders: &RuleOrders) -> f64 {
    let y1 = (-l).exp();
    let d = (n - 1) as f64;
    let vals: Vec<f64> = sphere_nodes(n - 2, orders.polar, orders.azimuthal)
        .iter()
        .map(|(omega, w)| {
            w * region
                .ray_intervals(y1, omega, sigma)
                .iter()
                .map(|(a, b)| (b.powf(d) - a.powf(d)) / d)
                .sum::<f64>()
        })
        .collect();
    crate::quadrature::pairwise_sum(&vals)
}

fn region_nodes(n: usize, region: &RegionSpec, l: f64, sigma: f64, rule: &QuadratureRule, outside: bool) -> Result<Vec<SurfaceNode>> {
    let QuadratureRule::HorospherePolar { radial, polar, azimuthal, .. } = *rule else {
        return Err(Error::IncompatibleRule(format!("{rule:?} on a region of Sigma_L")));
    };
    let y1 = (-l).exp();
    let scale = ((n - 1) as f64 * l).exp();
    let mut out = Vec::new();
    for (omega, wo) in sphere_nodes(n - 2, polar, azimuthal) {
        let inside = region.ray_intervals(y1, &omega, sigma);
        let breaks: Vec<f64> = inside.iter().flat_map(|(a, b)| [*a, *b]).collect();
        for (rho, wr) in radial_nodes(radial, sigma, &breaks) {
            let in_u = inside.iter().any(|(a, b)| rho > *a && rho < *b);
            if in_u == outside {
                continue;
            }
            let mut x = vec![l];
            x.extend(omega.iter().map(|v| rho * v));
            out.push(SurfaceNode { point: Point::horospherical(&x)?, weight: wo * wr * rho.powi(n as i32 - 2) * scale });
        }
    }
    Ok(out)
}

/// `2 int_{Sigma_L \ U} V (H_b - H_g) dsigma_g` with `V = t - z1`.
pub fn excluded_region_mass(model: &MetricModel, region: &RegionSpec, l: f64, sigma: f64, opts: &EvalOptions) -> Result<MassReading> {
    require_hyperbolic(model, "excluded_region_mass")?;
    let n = model.n;
    let spec = SurfaceSpec::horo_face(&unit_e1(n), l, sigma);
    require_inside(model, &spec)?;
    let v = StaticPotential::horosphere(n, &unit_e1(n))?;
    let mode = opts.mode;
    let run = |rule: &QuadratureRule| -> Result<f64> {
        let nodes = region_nodes(n, region, l, sigma, rule, true)?;
        par_sum(&nodes, |node| {
            let d = node_data(model, (LevelFunction::Height, 1.0), &node.point, mode)?;
            Ok(node.weight * mean_curvature_density(&d, v.value(&node.point)?))
        })
    };
    let rule = opts.orders.disk(sigma);
    let full = run(&rule)?;
    let half = run(&rule.half_order())?;
    let mut p = params("L", l, opts);
    p.sigma = Some(sigma);
    let mut reading = MassReading::new(Estimate { value: full, quad_error: (full - half).abs() }, 0.0, p)?;
    let t0 = theta(n, region, l, sigma, &opts.orders);
    let t1 = theta(n, region, l + 1.0, sigma, &opts.orders);
    if t0 > 0.0 {
        let rate = (t1 / t0).ln();
        if !(rate < model.q - n as f64) {
            reading.notes.push(format!(
                "Theta decays like e^({rate:.3} L), not faster than e^({:.3} L)",
                model.q - n as f64
            ));
        }
    }
    Ok(reading)
}

fn require_flat(model: &MetricModel, what: &str) -> Result<()> {
    if model.is_hyperbolic() {
        Err(Error::UnsupportedSurface(format!("{what} needs a Euclidean-background model, got {}", model.label)))
    } else {
        Ok(())
    }
}

/// `(1 / (2(n-1) omega)) int_{S_r} (g_ij,j - g_jj,i) nu^i dsigma_0`.
pub fn adm_flux(model: &MetricModel, r: f64, opts: &EvalOptions) -> Result<MassReading> {
    require_flat(model, "adm_flux")?;
    let n = model.n;
    let spec = SurfaceSpec::sphere_af(n, r);
    require_inside(model, &spec)?;
    let norm = 1.0 / (2.0 * (n as f64 - 1.0) * sphere_area(n - 1));
    let est = integrate_surface(
        &spec,
        |node| {
            let x = &node.point.coords;
            let jet = model.perturbation_jet(&node.point, crate::jet::Order::One, opts.mode)?;
            let mut s = 0.0;
            for i in 0..n {
                let div: f64 = (0..n).map(|j| jet.d1[j][(i, j)]).sum();
                let dtr = jet.d1[i].trace();
                s += (div - dtr) * x[i] / r;
            }
            Ok(node.weight * s * norm)
        },
        &opts.orders.sphere(),
    )?;
    MassReading::new(est, 0.0, params("r", r, opts))
}

/// `(1/((n-1) omega)) [int_{S_r} ((n-1)/r - H_g) dsigma_g + (|S_r|_delta - |S_r|_g) / r]`.
pub fn adm_geometric(model: &MetricModel, r: f64, opts: &EvalOptions) -> Result<MassReading> {
    require_flat(model, "adm_geometric")?;
    let n = model.n;
    let spec = SurfaceSpec::sphere_af(n, r);
    require_inside(model, &spec)?;
    let norm = 1.0 / ((n as f64 - 1.0) * sphere_area(n - 1));
    let est = integrate_surface(
        &spec,
        |node| {
            let d = node_data(model, (LevelFunction::Radius, 1.0), &node.point, opts.mode)?;
            let mean = -d.surf.dh * (1.0 + d.surf.area_ratio_m1);
            let area = -d.surf.area_ratio_m1 / r;
            Ok(node.weight * (mean + area) * norm)
        },
        &opts.orders.sphere(),
    )?;
    MassReading::new(est, 0.0, params("r", r, opts))
}

/// Geometric estimates of the mass vector from a coordinate sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct AhGeometric {
    pub p0: MassReading,
    pub p: Vec<MassReading>,
}

/// `p0 ~ 2[int t (H_b - H_g) dsigma_g + (|S_r|_b - |S_r|_g)/r]`,
/// `p_i ~ 2 int z_i (H_b - H_g) dsigma_g` on `S_r`.
pub fn ah_geometric(model: &MetricModel, r: f64, opts: &EvalOptions) -> Result<AhGeometric> {
    require_hyperbolic(model, "ah_geometric")?;
    let n = model.n;
    let spec = SurfaceSpec::sphere(n, r);
    require_inside(model, &spec)?;
    let mode = opts.mode;
    let eval = |rule: &QuadratureRule| -> Result<Vec<f64>> {
        let nodes = spec.nodes(rule)?;
        par_sum_vec(&nodes, n + 1, |node| {
            let z = &node.point.coords;
            let d = node_data(model, (LevelFunction::Radius, 1.0), &node.point, mode)?;
            let t = (1.0 + r * r).sqrt();
            let mean = -d.surf.dh * (1.0 + d.surf.area_ratio_m1);
            let mut out = Vec::with_capacity(n + 1);
            out.push(node.weight * 2.0 * (t * mean - d.surf.area_ratio_m1 / r));
            out.extend(z.iter().map(|zi| node.weight * 2.0 * zi * mean));
            Ok(out)
        })
    };
    let rule = opts.orders.sphere();
    let full = eval(&rule)?;
    let half = eval(&rule.half_order())?;
    let mut readings: Vec<MassReading> = full
        .iter()
        .zip(&half)
        .map(|(f, h)| MassReading::new(Estimate { value: *f, quad_error: (f - h).abs() }, 0.0, params("r", r, opts)))
        .collect::<Result<_>>()?;
    let p = readings.split_off(1);
    Ok(AhGeometric { p0: readings.remove(0), p })
}

/// `int_{S_r} |R| dsigma_b` for the remainder `R` of the linear decomposition of `U(V)(nu0)`.
pub fn sphere_remainder(model: &MetricModel, v: &StaticPotential, r: f64, opts: &EvalOptions) -> Result<MassReading> {
    require_hyperbolic(model, "sphere_remainder")?;
    let spec = SurfaceSpec::sphere(model.n, r);
    require_inside(model, &spec)?;
    let mode = opts.mode;
    let est = integrate_surface(
        &spec,
        |node| {
            let d = node_data(model, (LevelFunction::Radius, 1.0), &node.point, mode)?;
            let vj = v.jet(&node.point, mode)?;
            Ok(node.weight * decomposition(&d.local, &vj, &d.surf)?.remainder.abs())
        },
        &opts.orders.sphere(),
    )?;
    MassReading::new(est, 0.0, params("r", r, opts))
}

/// Least-squares decay exponent of `|values|` against `params` (`ln` of the
/// parameter when `log_scale`).
pub fn decay_exponent(params: &[f64], values: &[f64], log_scale: bool) -> Result<f64> {
    if params.len() < 2 || params.len() != values.len() {
        return Err(Error::Validation("decay fit needs at least two matching points".into()));
    }
    if values.iter().any(|v| !(v.abs() > 0.0) || !v.is_finite()) {
        return Err(Error::Validation("decay fit needs nonzero finite values".into()));
    }
    let x: Vec<f64> = params.iter().map(|p| if log_scale { p.ln() } else { *p }).collect();
    let y: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    Ok(linear_fit(&x, &y).0)
}

/// `|measured - predicted| <= tol |predicted|`.
pub fn exponent_matches(measured: f64, predicted: f64, tol: f64) -> bool {
    (measured - predicted).abs() <= tol * predicted.abs()
}

/// Closed form `2m(n-1) omega_{n-1}` of the mass of AdS-Schwarzschild.
pub fn ads_mass(n: usize, m: f64) -> f64 {
    2.0 * m * (n as f64 - 1.0) * sphere_area(n - 1)
}

/// Unit `e1` of dimension `n`.
pub fn e1(n: usize) -> Vec<f64> {
    unit_e1(n)
}

/// `Theta` of the full disk: `omega_{n-2} sigma^{n-1} / (n-1)`.
pub fn theta_full(n: usize, sigma: f64) -> f64 {
    sphere_area(n - 2) * sigma.powi(n as i32 - 1) / (n as f64 - 1.0)
}
