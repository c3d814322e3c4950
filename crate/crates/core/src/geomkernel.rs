//! Pointwise Riemannian geometry in coordinates.
//!
//! Two layers live here. The direct layer computes Christoffel symbols,
//! Hessians, Laplacians and level-set geometry of the full metric `g`. The
//! perturbative layer ([`LocalPerturbation`], [`SurfaceDifference`]) computes
//! differences such as `H_g - H_b` directly from `h = g - b`, so that no
//! `O(1)` quantities are subtracted. That is what keeps horosphere integrands
//! accurate when `|h|_b` is many orders of magnitude below one.

use nalgebra::{DMatrix, DVector};
use num_dual::Dual2DVec64;

use crate::charts::{ChartId, Point};
use crate::error::{Error, Result};
use crate::jet::{ad_scalar_jet, fd_scalar_jet, DerivMode, Order, Scalar, ScalarJet, TensorJet};
use crate::metrics::{Background, MetricModel};

/// Largest admissible condition number of the Jacobi-scaled metric.
pub const MAX_CONDITION: f64 = 1e12;
/// Smallest admissible `|grad V|_g` for a level set.
pub const MIN_GRADIENT: f64 = 1e-12;

/// Christoffel symbols of the second kind; `gamma[k][(i, j)]` is `Gamma^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub gamma: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// `Gamma^k_ij u_k`.
    pub fn contract(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            out += &self.gamma[k] * u[k];
        }
        out
    }
}

fn check_conditioning(g: &DMatrix<f64>) -> Result<()> {
    let n = g.nrows();
    let d: Vec<f64> = (0..n).map(|i| g[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::SingularMetric(f64::INFINITY));
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = scaled.symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(*e), hi.max(*e)));
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::SingularMetric(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
    }
    Ok(())
}

/// Inverse metric and Christoffel symbols from a metric jet of order at least one.
pub fn christoffel_from_jet(jet: &TensorJet) -> Result<(DMatrix<f64>, Christoffel)> {
    check_conditioning(&jet.val)?;
    let ginv = jet.val.clone().try_inverse().ok_or(Error::SingularMetric(f64::INFINITY))?;
    Ok((ginv.clone(), christoffel_with_inverse(&ginv, &jet.d1)))
}

fn christoffel_with_inverse(ginv: &DMatrix<f64>, d1: &[DMatrix<f64>]) -> Christoffel {
    let n = ginv.nrows();
    // lowered symbols Gamma_{l,ij} = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    let mut lowered = vec![DMatrix::zeros(n, n); n];
    for (l, low) in lowered.iter_mut().enumerate() {
        for i in 0..n {
            for j in 0..n {
                low[(i, j)] = 0.5 * (d1[i][(j, l)] + d1[j][(i, l)] - d1[l][(i, j)]);
            }
        }
    }
    let gamma = (0..n)
        .map(|k| {
            let mut m = DMatrix::zeros(n, n);
            for (l, low) in lowered.iter().enumerate() {
                m += low * ginv[(k, l)];
            }
            m
        })
        .collect();
    Christoffel { gamma }
}

/// Christoffel symbols of `model` at `p`.
pub fn christoffel(model: &MetricModel, p: &Point, mode: DerivMode) -> Result<Christoffel> {
    let jet = model.metric_jet(p, Order::One, effective_mode(model, mode))?;
    Ok(christoffel_from_jet(&jet)?.1)
}

fn effective_mode(model: &MetricModel, mode: DerivMode) -> DerivMode {
    if model.analytic_derivatives {
        mode
    } else {
        DerivMode::FiniteDifference
    }
}

/// A scalar formula written once against [`Scalar`], evaluated either on dual
/// numbers (analytic derivatives) or on `f64` (finite differences).
pub trait Formula: Sync {
    fn eval<S: Scalar>(&self, chart: ChartId, x: &[S]) -> Result<S>;
}

/// Scalar field with value, gradient and Hessian in the chart of evaluation.
pub trait ScalarField: Sync {
    fn jet(&self, p: &Point, mode: DerivMode) -> Result<ScalarJet>;

    fn value(&self, p: &Point) -> Result<f64> {
        Ok(self.jet(p, DerivMode::FiniteDifference)?.value)
    }
}

impl<T: Formula> ScalarField for T {
    fn jet(&self, p: &Point, mode: DerivMode) -> Result<ScalarJet> {
        match mode {
            DerivMode::Analytic => {
                let mut err = None;
                let jet = ad_scalar_jet(&p.coords, |x: &[Dual2DVec64]| match self.eval(p.chart, x) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        Dual2DVec64::from(f64::NAN)
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(jet),
                }
            }
            DerivMode::FiniteDifference => fd_scalar_jet(&p.coords, |y| self.eval(p.chart, y)),
        }
    }

    fn value(&self, p: &Point) -> Result<f64> {
        self.eval(p.chart, &p.coords)
    }
}

/// The coordinate function `x_k` of whatever chart the point lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordinateFunction(pub usize);

impl Formula for CoordinateFunction {
    fn eval<S: Scalar>(&self, _chart: ChartId, x: &[S]) -> Result<S> {
        Ok(x[self.0].clone())
    }
}

/// `r = |z|` (hyperboloidal) or `|x|` (Cartesian).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Radius;

impl Formula for Radius {
    fn eval<S: Scalar>(&self, chart: ChartId, x: &[S]) -> Result<S> {
        match chart {
            ChartId::Hyperboloidal | ChartId::Cartesian => {
                Ok(x.iter().fold(S::cst(0.0), |acc, v| acc + v.clone() * v.clone()).sqrt())
            }
            _ => Err(Error::ChartMismatch("Radius is evaluated in the hyperboloidal or Cartesian chart".into())),
        }
    }
}

/// `rho = |x^|` in the horospherical chart; level sets are lateral cylinders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HatRadius;

impl Formula for HatRadius {
    fn eval<S: Scalar>(&self, chart: ChartId, x: &[S]) -> Result<S> {
        match chart {
            ChartId::Horospherical | ChartId::HalfSpace => {
                Ok(x[1..].iter().fold(S::cst(0.0), |acc, v| acc + v.clone() * v.clone()).sqrt())
            }
            _ => Err(Error::ChartMismatch("HatRadius needs the horospherical or half-space chart".into())),
        }
    }
}

/// Covariant Hessian `d_i d_j V - Gamma^k_ij d_k V` of `V` for the metric `g`.
pub fn hessian_scalar(model: &MetricModel, v: &dyn ScalarField, p: &Point, mode: DerivMode) -> Result<DMatrix<f64>> {
    let gamma = christoffel(model, p, mode)?;
    let jet = v.jet(p, mode)?;
    Ok(&jet.hess - gamma.contract(&jet.grad))
}

/// `Delta_g V = g^{ij} (nabla^2 V)_ij`.
pub fn laplacian(model: &MetricModel, v: &dyn ScalarField, p: &Point, mode: DerivMode) -> Result<f64> {
    let g = model.metric_jet(p, Order::Zero, DerivMode::Analytic)?.val;
    let ginv = g.try_inverse().ok_or(Error::SingularMetric(f64::INFINITY))?;
    Ok(ginv.component_mul(&hessian_scalar(model, v, p, mode)?).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetGeometry {
    /// Unit normal, contravariant components.
    pub nu: DVector<f64>,
    pub mean_curvature: f64,
    /// Second fundamental form as a covariant, tangential n x n matrix.
    pub second_fundamental: DMatrix<f64>,
    pub grad_norm: f64,
    /// `sqrt(det g) |grad V|_g`: the surface measure is this density times
    /// `dx^1 ... dx^n / dV`. For `V = x^k` it is the density w.r.t. the other
    /// coordinates divided by `|d_k V| = 1`.
    pub area_density: f64,
    /// Inverse metric at the point, kept for contractions by callers.
    pub ginv: DMatrix<f64>,
}

impl LevelSetGeometry {
    /// Mixed shape operator trace `g^{ij} A_ij`.
    pub fn trace_a(&self) -> f64 {
        self.ginv.component_mul(&self.second_fundamental).sum()
    }

    /// `A(nu, .)` as covector components.
    pub fn a_on_normal(&self) -> DVector<f64> {
        &self.second_fundamental * &self.nu
    }
}

/// Geometry of the level set of `v` through `p`; `orientation = +1` takes the
/// normal along `+grad V`.
pub fn level_set_geometry(
    model: &MetricModel,
    v: &dyn ScalarField,
    p: &Point,
    orientation: f64,
    mode: DerivMode,
) -> Result<LevelSetGeometry> {
    let mode = effective_mode(model, mode);
    let gjet = model.metric_jet(p, Order::One, mode)?;
    let (ginv, gamma) = christoffel_from_jet(&gjet)?;
    let vjet = v.jet(p, mode)?;
    let hess = &vjet.hess - gamma.contract(&vjet.grad);
    let up = &ginv * &vjet.grad;
    let grad_norm = vjet.grad.dot(&up).sqrt();
    if !(grad_norm > MIN_GRADIENT) {
        return Err(Error::DegenerateLevelSet(grad_norm));
    }
    let sign = orientation.signum();
    let nu = &up * (sign / grad_norm);
    let nu_flat = &gjet.val * &nu;
    let n = model.n;
    let proj = DMatrix::identity(n, n) - &nu * nu_flat.transpose();
    let a = proj.transpose() * &hess * &proj * (sign / grad_norm);
    let lap = ginv.component_mul(&hess).sum();
    let hnn = (hess.clone() * &up).dot(&up) / (grad_norm * grad_norm);
    let mean_curvature = sign * (lap - hnn) / grad_norm;
    let area_density = gjet.val.determinant().sqrt() * grad_norm;
    Ok(LevelSetGeometry { nu, mean_curvature, second_fundamental: a, grad_norm, area_density, ginv })
}

/// Surfaces with exactly known second fundamental forms in `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    /// `S_r`, outward normal; point given in the hyperboloidal chart.
    Sphere { r: f64 },
    /// `H_L = {x1 = L}`, normal along `+d_{x1}`; horospherical chart.
    Horosphere { l: f64 },
    /// `{|x^| = sigma}`, outward normal; horospherical chart.
    Lateral { sigma: f64 },
}

/// Exact second fundamental form in `b` (covariant, chart components of `p`).
pub fn closed_form_second_fundamental(kind: SurfaceKind, p: &Point) -> Result<DMatrix<f64>> {
    let n = p.dim();
    let c = &p.coords;
    match (kind, p.chart) {
        (SurfaceKind::Sphere { r }, ChartId::Hyperboloidal) => {
            let t2 = 1.0 + r * r;
            let b = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - c[i] * c[j] / t2);
            // b-unit radial covector z / (r t)
            let nu = DVector::from_iterator(n, c.iter().map(|z| z / (r * t2.sqrt())));
            Ok((b - &nu * nu.transpose()) * (t2.sqrt() / r))
        }
        (SurfaceKind::Horosphere { .. }, ChartId::Horospherical) => {
            let e2 = (2.0 * c[0]).exp();
            Ok(DMatrix::from_fn(n, n, |i, j| if i == j && i > 0 { e2 } else { 0.0 }))
        }
        (SurfaceKind::Lateral { sigma }, ChartId::Horospherical) => {
            let e = c[0].exp();
            Ok(DMatrix::from_fn(n, n, |i, j| {
                if i == 0 || j == 0 {
                    0.0
                } else {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    e * (delta - c[i] * c[j] / (sigma * sigma)) / sigma
                }
            }))
        }
        (kind, chart) => Err(Error::UnsupportedSurface(format!("{kind:?} in the {} chart", chart.name()))),
    }
}

/// Scalar curvature of `model` at `p` from a second-order metric jet.
pub fn scalar_curvature(model: &MetricModel, p: &Point, mode: DerivMode) -> Result<f64> {
    let jet = model.metric_jet(p, Order::Two, effective_mode(model, mode))?;
    Ok(scalar_curvature_from_jet(&jet)?)
}

pub fn scalar_curvature_from_jet(jet: &TensorJet) -> Result<f64> {
    let n = jet.dim();
    let (ginv, gamma) = christoffel_from_jet(jet)?;
    // d_m g^{kl} = -g^{ka} d_m g_ab g^{bl}
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|m| -(&ginv * &jet.d1[m] * &ginv)).collect();
    // d_m Gamma^k_ij
    let dgamma = |m: usize, k: usize, i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for l in 0..n {
            let low = 0.5 * (jet.d1[i][(j, l)] + jet.d1[j][(i, l)] - jet.d1[l][(i, j)]);
            let dlow = 0.5 * (jet.d2[m * n + i][(j, l)] + jet.d2[m * n + j][(i, l)] - jet.d2[m * n + l][(i, j)]);
            s += dginv[m][(k, l)] * low + ginv[(k, l)] * dlow;
        }
        s
    };
    let g = |k: usize, i: usize, j: usize| gamma.gamma[k][(i, j)];
    let mut ric = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += dgamma(k, k, i, j) - dgamma(j, k, i, k);
                for l in 0..n {
                    s += g(k, k, l) * g(l, i, j) - g(k, j, l) * g(l, i, k);
                }
            }
            ric[(i, j)] = s;
        }
    }
    Ok(ginv.component_mul(&ric).sum())
}

/// Background quantities in closed form: `b`, `b^{-1}` and `Gamma_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundPoint {
    pub b: DMatrix<f64>,
    pub binv: DMatrix<f64>,
    pub gamma: Christoffel,
}

impl BackgroundPoint {
    pub fn closed_form(background: Background, p: &Point) -> Result<Self> {
        let n = p.dim();
        let c = &p.coords;
        let id = DMatrix::<f64>::identity(n, n);
        match (background, p.chart) {
            (Background::Euclidean, ChartId::Cartesian) => Ok(BackgroundPoint {
                b: id.clone(),
                binv: id,
                gamma: Christoffel { gamma: vec![DMatrix::zeros(n, n); n] },
            }),
            (Background::Hyperbolic, ChartId::Hyperboloidal) => {
                let z = DVector::from_column_slice(c);
                let t2 = 1.0 + z.norm_squared();
                let b = &id - &z * z.transpose() / t2;
                let binv = &id + &z * z.transpose();
                let gamma = (0..n).map(|k| &b * -c[k]).collect();
                Ok(BackgroundPoint { b, binv, gamma: Christoffel { gamma } })
            }
            (Background::Hyperbolic, ChartId::HalfSpace) => {
                let y1 = c[0];
                // conformal factor e^{2 phi}, phi = -ln y1, d phi = (-1/y1, 0, ...)
                let dphi = |k: usize| if k == 0 { -1.0 / y1 } else { 0.0 };
                let gamma = (0..n)
                    .map(|k| {
                        DMatrix::from_fn(n, n, |i, j| {
                            let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                            d(k, i) * dphi(j) + d(k, j) * dphi(i) - d(i, j) * dphi(k)
                        })
                    })
                    .collect();
                Ok(BackgroundPoint { b: &id / (y1 * y1), binv: &id * (y1 * y1), gamma: Christoffel { gamma } })
            }
            (Background::Hyperbolic, ChartId::Horospherical) => {
                let e2 = (2.0 * c[0]).exp();
                let b = DMatrix::from_fn(n, n, |i, j| if i != j { 0.0 } else if i == 0 { 1.0 } else { e2 });
                let binv = DMatrix::from_fn(n, n, |i, j| if i != j { 0.0 } else if i == 0 { 1.0 } else { 1.0 / e2 });
                let gamma = (0..n)
                    .map(|k| {
                        DMatrix::from_fn(n, n, |i, j| {
                            if k == 0 {
                                if i == j && i > 0 {
                                    -e2
                                } else {
                                    0.0
                                }
                            } else if (i == 0 && j == k) || (j == 0 && i == k) {
                                1.0
                            } else {
                                0.0
                            }
                        })
                    })
                    .collect();
                Ok(BackgroundPoint { b, binv, gamma: Christoffel { gamma } })
            }
            (bg, chart) => Err(Error::ChartMismatch(format!("{bg:?} background in the {} chart", chart.name()))),
        }
    }
}

/// Orthonormalizing factor for `b`: lower-triangular `L` with `b = L L^T`.
fn cholesky_lower(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    b.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::SingularMetric(f64::INFINITY))
}

/// `h`, `nabla_b h` and the background at a point, with derived norms.
#[derive(Debug, Clone)]
pub struct LocalPerturbation {
    pub bg: BackgroundPoint,
    pub h: DMatrix<f64>,
    /// `nabla_h[k][(i, j)] = (nabla_b)_k h_ij`.
    pub nabla_h: Vec<DMatrix<f64>>,
    /// `b^{-1} h`.
    pub m: DMatrix<f64>,
    /// `g^{-1} - b^{-1}`, computed without cancellation.
    pub dinv: DMatrix<f64>,
    /// Eigenvalues of `L^{-1} h L^{-T}`.
    pub frame_eigs: Vec<f64>,
    linv: DMatrix<f64>,
}

impl LocalPerturbation {
    pub fn new(model: &MetricModel, p: &Point, mode: DerivMode) -> Result<Self> {
        let bg = BackgroundPoint::closed_form(model.background, p)?;
        let hjet = model.perturbation_jet(p, Order::One, effective_mode(model, mode))?;
        Self::from_parts(bg, hjet)
    }

    pub fn from_parts(bg: BackgroundPoint, hjet: TensorJet) -> Result<Self> {
        let n = hjet.dim();
        let h = hjet.val;
        let mut nabla_h = Vec::with_capacity(n);
        for k in 0..n {
            // nabla_k h_ij = d_k h_ij - Gamma^a_ki h_aj - Gamma^a_kj h_ia
            let mut t = hjet.d1[k].clone();
            let mut gk = DMatrix::zeros(n, n);
            for a in 0..n {
                for i in 0..n {
                    gk[(a, i)] = bg.gamma.gamma[a][(k, i)];
                }
            }
            // (gk^T h)_ij = sum_a Gamma^a_ki h_aj
            let s = gk.transpose() * &h;
            t -= &s + s.transpose();
            nabla_h.push(t);
        }
        let m = &bg.binv * &h;
        let ipm = DMatrix::identity(n, n) + &m;
        let lu = ipm.lu();
        let solved = lu.solve(&bg.binv).ok_or(Error::SingularMetric(f64::INFINITY))?;
        let dinv = -(&m * solved);
        let l = cholesky_lower(&bg.b)?;
        let linv = l.try_inverse().ok_or(Error::SingularMetric(f64::INFINITY))?;
        let s = &linv * &h * linv.transpose();
        let s = (&s + s.transpose()) * 0.5;
        let frame_eigs: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        if frame_eigs.iter().any(|e| !(*e > -1.0)) {
            return Err(Error::Validation("g = b + h is not positive definite".into()));
        }
        Ok(LocalPerturbation { bg, h, nabla_h, m, dinv, frame_eigs, linv })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn ginv(&self) -> DMatrix<f64> {
        &self.bg.binv + &self.dinv
    }

    pub fn is_zero(&self) -> bool {
        self.h.iter().all(|v| *v == 0.0) && self.nabla_h.iter().all(|m| m.iter().all(|v| *v == 0.0))
    }

    /// `|h|_b`.
    pub fn h_norm(&self) -> f64 {
        self.frame_eigs.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// `|nabla_b h|_b`.
    pub fn nabla_h_norm(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        // orthonormal frame: T'_{a..} = Linv_{a k} T_{k..}
        let framed: Vec<DMatrix<f64>> = self.nabla_h.iter().map(|t| &self.linv * t * self.linv.transpose()).collect();
        for a in 0..n {
            let mut acc = DMatrix::zeros(n, n);
            for k in 0..n {
                acc += &framed[k] * self.linv[(a, k)];
            }
            s += acc.norm_squared();
        }
        s.sqrt()
    }

    /// `|T|_b` of a covariant 2-tensor.
    pub fn two_tensor_norm(&self, t: &DMatrix<f64>) -> f64 {
        (&self.linv * t * self.linv.transpose()).norm()
    }

    /// Difference tensor `C^k_ij = Gamma_g - Gamma_b`.
    pub fn connection_difference(&self) -> Christoffel {
        let n = self.dim();
        let ginv = self.ginv();
        let mut lowered = vec![DMatrix::zeros(n, n); n];
        for (l, low) in lowered.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    low[(i, j)] = 0.5 * (self.nabla_h[i][(j, l)] + self.nabla_h[j][(i, l)] - self.nabla_h[l][(i, j)]);
                }
            }
        }
        let gamma = (0..n)
            .map(|k| {
                let mut m = DMatrix::zeros(n, n);
                for (l, low) in lowered.iter().enumerate() {
                    m += low * ginv[(k, l)];
                }
                m
            })
            .collect();
        Christoffel { gamma }
    }
}

/// Level-set geometry of a surface `{W = const}` in `b` and its perturbation in `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDifference {
    /// `b`-unit normal, contravariant.
    pub nu0: DVector<f64>,
    /// `b`-unit normal, covariant.
    pub nu0_flat: DVector<f64>,
    pub h_b: f64,
    /// `H_g - H_b`.
    pub dh: f64,
    /// `dsigma_g / dsigma_b - 1`.
    pub area_ratio_m1: f64,
    /// Second fundamental form in `b`, covariant and tangential.
    pub a_b: DMatrix<f64>,
    /// Tangential projector `P^i_j = delta^i_j - nu0^i nu0_j`.
    pub proj: DMatrix<f64>,
    pub grad_norm_b: f64,
}

impl SurfaceDifference {
    /// `w` is the jet of the level function in the chart of the local data.
    pub fn new(local: &LocalPerturbation, w: &ScalarJet, orientation: f64) -> Result<Self> {
        let n = local.dim();
        let sign = orientation.signum();
        let binv = &local.bg.binv;
        let u = &w.grad;
        let bu = binv * u;
        let nb2 = u.dot(&bu);
        let nb = nb2.sqrt();
        if !(nb > MIN_GRADIENT) {
            return Err(Error::DegenerateLevelSet(nb));
        }
        let hb = &w.hess - local.bg.gamma.contract(u);
        let du = &local.dinv * u;
        let dn = u.dot(&du);
        let ng2 = nb2 + dn;
        if !(ng2 > 0.0) {
            return Err(Error::DegenerateLevelSet(ng2.max(0.0).sqrt()));
        }
        let ng = ng2.sqrt();
        let c = local.connection_difference();
        let cu = c.contract(u);
        let gu = &bu + &du;
        let ginv = local.ginv();
        let lap_b = binv.component_mul(&hb).sum();
        let dlap = local.dinv.component_mul(&hb).sum() - ginv.component_mul(&cu).sum();
        let q_b = (&hb * &bu).dot(&bu);
        let dq = 2.0 * (&hb * &bu).dot(&du) + (&hb * &du).dot(&du) - (&cu * &gu).dot(&gu);
        let n_b = lap_b - q_b / nb2;
        // N_g - N_b with 1/|u|_g^2 - 1/|u|_b^2 = -dn / (|u|_g^2 |u|_b^2)
        let dn_term = dlap - (dq / ng2 - q_b * dn / (ng2 * nb2));
        let inv_diff = -dn / ((nb + ng) * ng * nb);
        let dh = sign * (dn_term / ng + n_b * inv_diff);
        let h_b = sign * n_b / nb;
        let log_ratio = 0.5 * (dn / nb2).ln_1p() + 0.5 * local.frame_eigs.iter().map(|e| e.ln_1p()).sum::<f64>();
        let area_ratio_m1 = log_ratio.exp_m1();
        let nu0 = &bu * (sign / nb);
        let nu0_flat = u * (sign / nb);
        let proj = DMatrix::identity(n, n) - &nu0 * nu0_flat.transpose();
        let a_b = proj.transpose() * &hb * &proj * (sign / nb);
        Ok(SurfaceDifference { nu0, nu0_flat, h_b, dh, area_ratio_m1, a_b, proj, grad_norm_b: nb })
    }

    /// `|A|_b`.
    pub fn a_norm(&self, local: &LocalPerturbation) -> f64 {
        local.two_tensor_norm(&self.a_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ads_schwarzschild, custom_perturbation, hyperbolic_background, schwarzschild_af, PerturbationSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// `e^{x1}` in horospherical coordinates.
    struct ExpHeight;
    impl Formula for ExpHeight {
        fn eval<S: Scalar>(&self, _c: ChartId, x: &[S]) -> Result<S> {
            Ok(x[0].exp())
        }
    }

    /// `t = sqrt(1 + |z|^2)`.
    struct TimeFn;
    impl Formula for TimeFn {
        fn eval<S: Scalar>(&self, _c: ChartId, x: &[S]) -> Result<S> {
            Ok(x.iter().fold(S::cst(1.0), |acc, v| acc + v.clone() * v.clone()).sqrt())
        }
    }

    struct Constant;
    impl Formula for Constant {
        fn eval<S: Scalar>(&self, _c: ChartId, _x: &[S]) -> Result<S> {
            Ok(S::cst(2.5))
        }
    }

    fn gamma_close(a: &Christoffel, b: &Christoffel, tol: f64) {
        for k in 0..a.dim() {
            let scale = a.gamma[k].amax().max(1.0);
            assert!((&a.gamma[k] - &b.gamma[k]).amax() <= tol * scale, "k={k}: {} vs {}", a.gamma[k], b.gamma[k]);
        }
    }

    #[test]
    fn euclidean_symbols_vanish() {
        let m = crate::metrics::euclidean_background(3);
        let g = christoffel(&m, &Point::cartesian(&[1.0, 2.0, 3.0]).unwrap(), DerivMode::Analytic).unwrap();
        assert!(g.gamma.iter().all(|m| m.amax() == 0.0));
    }

    #[test]
    fn horospherical_symbols_by_hand() {
        let m = hyperbolic_background(3, ChartId::Horospherical);
        let p = Point::horospherical(&[0.8, -0.3, 1.2]).unwrap();
        let g = christoffel(&m, &p, DerivMode::Analytic).unwrap();
        let e2 = 1.6f64.exp();
        for a in 1..3 {
            for b in 1..3 {
                let d = if a == b { 1.0 } else { 0.0 };
                assert_relative_eq!(g.gamma[0][(a, b)], -e2 * d, epsilon = 1e-13);
                assert_relative_eq!(g.gamma[a][(0, b)], d, epsilon = 1e-13);
                assert_relative_eq!(g.gamma[a][(b, 0)], d, epsilon = 1e-13);
            }
        }
        let closed = BackgroundPoint::closed_form(Background::Hyperbolic, &p).unwrap();
        gamma_close(&g, &closed.gamma, 1e-14);
    }

    #[test]
    fn closed_form_background_symbols_match_jets() {
        for (chart, coords) in [
            (ChartId::Hyperboloidal, vec![0.4, -1.3, 2.0]),
            (ChartId::HalfSpace, vec![0.3, -1.3, 2.0]),
            (ChartId::Horospherical, vec![-0.7, 0.5, 0.1]),
        ] {
            let m = hyperbolic_background(3, chart);
            let p = Point::new(chart, coords).unwrap();
            let a = christoffel(&m, &p, DerivMode::Analytic).unwrap();
            let c = BackgroundPoint::closed_form(Background::Hyperbolic, &p).unwrap();
            gamma_close(&a, &c.gamma, 1e-13);
            let jet = m.background_jet(&p, Order::Zero).unwrap().val;
            assert_relative_eq!(jet * &c.binv, DMatrix::identity(3, 3), epsilon = 1e-13);
        }
    }

    #[test]
    fn half_space_symbols_match_finite_differences() {
        let m = hyperbolic_background(3, ChartId::HalfSpace);
        for coords in [[0.3, 0.1, -0.2], [2.0, 1.5, 0.7], [0.05, -3.0, 4.0]] {
            let p = Point::half_space(&coords).unwrap();
            let a = christoffel(&m, &p, DerivMode::Analytic).unwrap();
            let f = christoffel(&m, &p, DerivMode::FiniteDifference).unwrap();
            gamma_close(&a, &f, 1e-6);
        }
    }

    #[test]
    fn ads_symbols_analytic_vs_fd() {
        let m = ads_schwarzschild(3, 1.0).unwrap();
        let mut state = 12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..100 {
            let z: Vec<f64> = (0..3).map(|_| 8.0 * rnd() - 4.0).collect();
            let p = Point::hyperboloidal(&z).unwrap();
            if p.radius() < 1.5 {
                continue;
            }
            let a = christoffel(&m, &p, DerivMode::Analytic).unwrap();
            let f = christoffel(&m, &p, DerivMode::FiniteDifference).unwrap();
            gamma_close(&a, &f, 1e-6);
        }
    }

    #[test]
    fn singular_metric_detected() {
        let mut jet = TensorJet::zeros(2, Order::One);
        jet.val = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]);
        assert!(matches!(christoffel_from_jet(&jet), Err(Error::SingularMetric(_))));
    }

    #[test]
    fn static_potential_obeys_obata() {
        let m = hyperbolic_background(3, ChartId::Hyperboloidal);
        let p = Point::hyperboloidal(&[0.7, -0.2, 1.9]).unwrap();
        let hess = hessian_scalar(&m, &TimeFn, &p, DerivMode::Analytic).unwrap();
        // oracle: symbolic Hessian of t minus Gamma^k_ij d_k t with Gamma = -z_k b_ij
        let z = DVector::from_column_slice(&p.coords);
        let t = (1.0 + z.norm_squared()).sqrt();
        let b = DMatrix::identity(3, 3) - &z * z.transpose() / (t * t);
        let d2t = (DMatrix::identity(3, 3) - &z * z.transpose() / (t * t)) / t;
        let dt = &z / t;
        let oracle = d2t + &b * z.dot(&dt);
        assert_relative_eq!(hess, oracle, epsilon = 1e-12);
        assert_relative_eq!(hess, &b * t, epsilon = 1e-8);
        let c = hessian_scalar(&m, &Constant, &p, DerivMode::Analytic).unwrap();
        assert_eq!(c.amax(), 0.0);
    }

    #[test]
    fn laplacian_of_exponential_height() {
        let m = hyperbolic_background(4, ChartId::Horospherical);
        let p = Point::horospherical(&[1.3, 0.2, -0.4, 2.0]).unwrap();
        let lap = laplacian(&m, &ExpHeight, &p, DerivMode::Analytic).unwrap();
        assert_relative_eq!(lap, 4.0 * 1.3f64.exp(), max_relative = 1e-13);
    }

    #[test]
    fn horosphere_mean_curvature() {
        for mode in [DerivMode::Analytic, DerivMode::FiniteDifference] {
            let tol = if mode == DerivMode::Analytic { 1e-10 } else { 1e-5 };
            for n in [3usize, 4] {
                let m = hyperbolic_background(n, ChartId::Horospherical);
                let mut c = vec![0.3; n];
                c[0] = 2.0;
                let p = Point::horospherical(&c).unwrap();
                let geo = level_set_geometry(&m, &ExpHeight, &p, 1.0, mode).unwrap();
                assert_relative_eq!(geo.mean_curvature, (n - 1) as f64, epsilon = tol);
                let exact = closed_form_second_fundamental(SurfaceKind::Horosphere { l: 2.0 }, &p).unwrap();
                assert!((&geo.second_fundamental - &exact).amax() <= tol * exact.amax());
            }
        }
    }

    #[test]
    fn sphere_mean_curvature_and_form() {
        let m = hyperbolic_background(3, ChartId::Hyperboloidal);
        for r in [0.5, 3.0, 20.0] {
            let p = Point::hyperboloidal(&[r * 0.6, r * 0.0, r * 0.8]).unwrap();
            let geo = level_set_geometry(&m, &Radius, &p, 1.0, DerivMode::Analytic).unwrap();
            let oracle = 2.0 * (1.0 + r * r).sqrt() / r;
            assert_relative_eq!(geo.mean_curvature, oracle, max_relative = 1e-10);
            assert_relative_eq!(geo.trace_a(), geo.mean_curvature, max_relative = 1e-8);
            assert!(geo.a_on_normal().amax() < 1e-8 * geo.second_fundamental.amax());
            let g = m.components(&p).unwrap();
            assert_relative_eq!((&g * &geo.nu).dot(&geo.nu), 1.0, epsilon = 1e-10);
            let exact = closed_form_second_fundamental(SurfaceKind::Sphere { r }, &p).unwrap();
            assert!((&geo.second_fundamental - &exact).amax() <= 1e-10 * exact.amax());
            let fd = level_set_geometry(&m, &Radius, &p, 1.0, DerivMode::FiniteDifference).unwrap();
            assert_relative_eq!(fd.mean_curvature, oracle, max_relative = 1e-5);
        }
    }

    #[test]
    fn lateral_surface_form() {
        let m = hyperbolic_background(3, ChartId::Horospherical);
        let sigma = 3.0;
        let p = Point::horospherical(&[0.4, 3.0 * 0.6, 3.0 * 0.8]).unwrap();
        let geo = level_set_geometry(&m, &HatRadius, &p, 1.0, DerivMode::Analytic).unwrap();
        let exact = closed_form_second_fundamental(SurfaceKind::Lateral { sigma }, &p).unwrap();
        assert!((&geo.second_fundamental - &exact).amax() <= 1e-12 * exact.amax());
        // in the angular coordinate the form is e^{x1} sigma
        let tangent = DVector::from_vec(vec![0.0, -0.8 * sigma, 0.6 * sigma]);
        assert_relative_eq!((&exact * &tangent).dot(&tangent), 0.4f64.exp() * sigma, max_relative = 1e-13);
        assert!(closed_form_second_fundamental(SurfaceKind::Lateral { sigma }, &Point::hyperboloidal(&[1.0, 0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn orientation_flips_curvature() {
        let m = hyperbolic_background(3, ChartId::Horospherical);
        let p = Point::horospherical(&[1.0, 0.0, 0.0]).unwrap();
        let geo = level_set_geometry(&m, &ExpHeight, &p, -1.0, DerivMode::Analytic).unwrap();
        assert_relative_eq!(geo.mean_curvature, -2.0, epsilon = 1e-12);
        assert!(matches!(
            level_set_geometry(&m, &Constant, &p, 1.0, DerivMode::Analytic),
            Err(Error::DegenerateLevelSet(_))
        ));
    }

    #[test]
    fn mean_curvature_is_chart_invariant() {
        let m = ads_schwarzschild(3, 1.0).unwrap();
        let x = Point::horospherical(&[2.0, 0.7, -0.4]).unwrap();
        let z = x.to_chart(ChartId::Hyperboloidal).unwrap();
        let y = x.to_chart(ChartId::HalfSpace).unwrap();
        let pot = crate::massform::StaticPotential::horosphere(3, &[1.0, 0.0, 0.0]).unwrap();
        let hx = level_set_geometry(&m, &pot, &x, 1.0, DerivMode::Analytic).unwrap().mean_curvature;
        let hz = level_set_geometry(&m, &pot, &z, 1.0, DerivMode::Analytic).unwrap().mean_curvature;
        let hy = level_set_geometry(&m, &pot, &y, 1.0, DerivMode::Analytic).unwrap().mean_curvature;
        assert_relative_eq!(hx, hz, max_relative = 1e-8);
        assert_relative_eq!(hx, hy, max_relative = 1e-8);
    }

    #[test]
    fn ads_horosphere_mean_curvature_below_background() {
        let m = ads_schwarzschild(3, 1.0).unwrap();
        let pot = crate::massform::StaticPotential::horosphere(3, &[1.0, 0.0, 0.0]).unwrap();
        for rho in [0.0, 0.5, 1.0, 3.0, 10.0] {
            let p = Point::horospherical(&[5.0, rho, 0.0]).unwrap();
            let h = level_set_geometry(&m, &pot, &p, 1.0, DerivMode::Analytic).unwrap().mean_curvature;
            assert!(h < 2.0, "H_g = {h} at rho = {rho}");
        }
    }

    #[test]
    fn scalar_curvature_of_background_in_all_charts() {
        for (chart, coords) in [
            (ChartId::Hyperboloidal, vec![0.4, -1.3, 2.0]),
            (ChartId::HalfSpace, vec![0.3, -1.3, 2.0]),
            (ChartId::Horospherical, vec![-0.7, 0.5, 0.1]),
        ] {
            let m = hyperbolic_background(3, chart);
            let p = Point::new(chart, coords).unwrap();
            assert_relative_eq!(scalar_curvature(&m, &p, DerivMode::Analytic).unwrap(), -6.0, epsilon = 1e-6);
            assert_relative_eq!(scalar_curvature(&m, &p, DerivMode::FiniteDifference).unwrap(), -6.0, epsilon = 1e-4);
        }
        let m = hyperbolic_background(4, ChartId::Horospherical);
        let p = Point::horospherical(&[0.3, 0.5, 0.1, -0.2]).unwrap();
        assert_relative_eq!(scalar_curvature(&m, &p, DerivMode::Analytic).unwrap(), -12.0, epsilon = 1e-6);
    }

    #[test]
    fn ads_has_constant_scalar_curvature() {
        for n in [3usize, 4] {
            let m = ads_schwarzschild(n, 1.0).unwrap();
            for coords in [[1.5, 0.3, -0.2], [4.0, 2.0, -7.0], [-20.0, 3.0, 1.0]] {
                let mut z = coords.to_vec();
                z.resize(n, 0.5);
                let p = Point::hyperboloidal(&z).unwrap();
                let r = scalar_curvature(&m, &p, DerivMode::Analytic).unwrap();
                let expected = -((n * (n - 1)) as f64);
                assert_relative_eq!(r, expected, epsilon = 1e-6);
            }
        }
        let s = schwarzschild_af(1.0).unwrap();
        let r = scalar_curvature(&s, &Point::cartesian(&[1.0, 2.0, 0.5]).unwrap(), DerivMode::Analytic).unwrap();
        assert!(r.abs() < 1e-10);
    }

    fn stable_vs_direct(model: &MetricModel, w: &dyn ScalarField, p: &Point, tol: f64) {
        let local = LocalPerturbation::new(model, p, DerivMode::Analytic).unwrap();
        let wj = w.jet(p, DerivMode::Analytic).unwrap();
        let diff = SurfaceDifference::new(&local, &wj, 1.0).unwrap();
        let bmodel = if model.is_hyperbolic() {
            hyperbolic_background(model.n, p.chart)
        } else {
            crate::metrics::euclidean_background(model.n)
        };
        let gg = level_set_geometry(model, w, p, 1.0, DerivMode::Analytic).unwrap();
        let gb = level_set_geometry(&bmodel, w, p, 1.0, DerivMode::Analytic).unwrap();
        assert_relative_eq!(diff.h_b, gb.mean_curvature, max_relative = 1e-12);
        let direct = gg.mean_curvature - gb.mean_curvature;
        assert!((diff.dh - direct).abs() <= tol * direct.abs().max(1e-300) + 1e-13, "{} vs {direct}", diff.dh);
        // area ratio from densities
        let ratio = gg.area_density / gb.area_density - 1.0;
        assert!((diff.area_ratio_m1 - ratio).abs() <= tol * ratio.abs() + 1e-13);
    }

    #[test]
    fn stable_differences_match_direct_geometry() {
        let ads = ads_schwarzschild(3, 1.0).unwrap();
        let pot = crate::massform::StaticPotential::horosphere(3, &[1.0, 0.0, 0.0]).unwrap();
        stable_vs_direct(&ads, &pot, &Point::horospherical(&[1.0, 0.3, -0.5]).unwrap(), 1e-8);
        stable_vs_direct(&ads, &Radius, &Point::hyperboloidal(&[1.5, 0.3, -0.5]).unwrap(), 1e-8);
        let bump = custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, 0.3, &[0.0, 0.6, 0.8], 1.2)).unwrap();
        stable_vs_direct(&bump, &Radius, &Point::hyperboloidal(&[0.3, 1.5, 2.5]).unwrap(), 1e-8);
        stable_vs_direct(&bump, &HatRadius, &Point::horospherical(&[0.3, 1.5, 2.5]).unwrap(), 1e-8);
        let s = schwarzschild_af(1.0).unwrap();
        stable_vs_direct(&s, &Radius, &Point::cartesian(&[2.0, 1.0, -0.5]).unwrap(), 1e-8);
    }

    #[test]
    fn stable_difference_survives_tiny_perturbations() {
        // far out on a horosphere the direct difference is pure round-off
        let ads = ads_schwarzschild(3, 1.0).unwrap();
        let pot = crate::massform::StaticPotential::horosphere(3, &[1.0, 0.0, 0.0]).unwrap();
        let p = Point::horospherical(&[9.0, 3000.0, 0.0]).unwrap();
        let local = LocalPerturbation::new(&ads, &p, DerivMode::Analytic).unwrap();
        let wj = pot.jet(&p, DerivMode::Analytic).unwrap();
        let d = SurfaceDifference::new(&local, &wj, 1.0).unwrap();
        // linear scaling in m at this size of h
        let ads2 = ads_schwarzschild(3, 2.0).unwrap();
        let local2 = LocalPerturbation::new(&ads2, &p, DerivMode::Analytic).unwrap();
        let d2 = SurfaceDifference::new(&local2, &wj, 1.0).unwrap();
        assert!(d.dh < 0.0 && d.dh.abs() < 1e-20);
        assert_relative_eq!(d2.dh, 2.0 * d.dh, max_relative = 1e-6);
        assert_relative_eq!(d.h_b, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn frame_norms() {
        let bump = custom_perturbation(&PerturbationSpec::angular_bump(3, 2.5, 0.3, &[1.0, 0.0, 0.0], 1.0)).unwrap();
        let r: f64 = 5.0;
        let p = Point::hyperboloidal(&[r, 0.0, 0.0]).unwrap();
        let local = LocalPerturbation::new(&bump, &p, DerivMode::Analytic).unwrap();
        // on the axis phi = 1, so |h|_b = A (1 + r^2)^{-q/2}
        assert_relative_eq!(local.h_norm(), 0.3 * (1.0 + r * r).powf(-1.25), max_relative = 1e-12);
        assert_relative_eq!(local.two_tensor_norm(&local.h), local.h_norm(), max_relative = 1e-10);
        assert!(local.nabla_h_norm() > 0.0);
    }

    proptest! {
        #[test]
        fn level_set_invariants(x1 in -2.0f64..2.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let m = ads_schwarzschild(3, 0.5).unwrap();
            let p = Point::horospherical(&[x1 + 3.0, a, b]).unwrap();
            let pot = crate::massform::StaticPotential::horosphere(3, &[0.6, 0.8, 0.0]).unwrap();
            let geo = level_set_geometry(&m, &pot, &p, 1.0, DerivMode::Analytic).unwrap();
            let g = m.components(&p).unwrap();
            prop_assert!(((&g * &geo.nu).dot(&geo.nu) - 1.0).abs() < 1e-10);
            prop_assert!((geo.trace_a() - geo.mean_curvature).abs() < 1e-8 * geo.mean_curvature.abs().max(1.0));
            prop_assert!(geo.a_on_normal().amax() < 1e-8 * geo.second_fundamental.amax().max(1.0));
        }
    }
}
