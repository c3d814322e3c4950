//! Deterministic quadrature on spheres, disks and intervals; the horosphere
//! tail bound; exponential extrapolation of convergence series.
//!
//! Node values are evaluated in parallel and then reduced by a fixed pairwise
//! tree, so a sum never depends on the number of worker threads.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(&w).map(|(xi, wi)| (mid + half * xi, half * wi)).collect()
}

/// Sum with a fixed binary tree over the index range.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

/// Evaluate `f` at every item in parallel and reduce with [`pairwise_sum`].
pub fn par_sum<T, F>(items: &[T], f: F) -> Result<f64>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync,
{
    let vals: Vec<f64> = items.par_iter().map(&f).collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&vals))
}

/// Vector-valued variant of [`par_sum`]: `f` returns `k` values per item.
pub fn par_sum_vec<T, F>(items: &[T], k: usize, f: F) -> Result<Vec<f64>>
where
    T: Sync,
    F: Fn(&T) -> Result<Vec<f64>> + Sync,
{
    let vals: Vec<Vec<f64>> = items.par_iter().map(&f).collect::<Result<Vec<_>>>()?;
    Ok((0..k)
        .map(|j| {
            let col: Vec<f64> = vals.iter().map(|v| v[j]).collect();
            pairwise_sum(&col)
        })
        .collect())
}

/// Run `f` on a dedicated pool with `workers` threads (global pool for `None`).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}

/// Area of the unit sphere `S^d` in `R^{d+1}`.
pub fn sphere_area(d: usize) -> f64 {
    // omega_d = 2 pi^{(d+1)/2} / Gamma((d+1)/2), by recursion omega_d = 2 pi omega_{d-2} / (d - 1)
    match d {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(d - 2) / (d as f64 - 1.0),
    }
}

/// Nodes on the unit sphere `S^d` as `(unit vector, weight)`; weights sum to its area.
///
/// `S^1` uses the trapezoid rule with `azimuthal` points, `S^2` Gauss-Legendre
/// in `cos(theta)` times the trapezoid rule, higher spheres a polar angle rule
/// over `S^{d-1}`.
pub fn sphere_nodes(d: usize, polar: usize, azimuthal: usize) -> Vec<(Vec<f64>, f64)> {
    assert!(d >= 1, "sphere dimension must be at least one");
    match d {
        1 => (0..azimuthal)
            .map(|k| {
                let phi = 2.0 * PI * (k as f64 + 0.5) / azimuthal as f64;
                (vec![phi.cos(), phi.sin()], 2.0 * PI / azimuthal as f64)
            })
            .collect(),
        2 => {
            let mut out = Vec::with_capacity(polar * azimuthal);
            for (c, wc) in gauss_legendre_interval(polar, -1.0, 1.0) {
                let s = (1.0 - c * c).sqrt();
                for (e, we) in sphere_nodes(1, polar, azimuthal) {
                    out.push((vec![c, s * e[0], s * e[1]], wc * we));
                }
            }
            out
        }
        _ => {
            // polar angle: for odd d the inner-integrated integrand is a smooth even
            // periodic function of theta (midpoint rule); for even d the weight
            // (1 - c^2)^{(d-2)/2} is a polynomial in c = cos(theta) (Gauss-Legendre)
            let inner = sphere_nodes(d - 1, polar, azimuthal);
            let polar_nodes: Vec<(f64, f64, f64)> = if d % 2 == 1 {
                (0..polar)
                    .map(|k| {
                        let th = PI * (k as f64 + 0.5) / polar as f64;
                        let (s, c) = th.sin_cos();
                        (c, s, PI / polar as f64 * s.powi(d as i32 - 1))
                    })
                    .collect()
            } else {
                gauss_legendre_interval(polar, -1.0, 1.0)
                    .into_iter()
                    .map(|(c, w)| {
                        let s2 = 1.0 - c * c;
                        (c, s2.sqrt(), w * s2.powi((d as i32 - 2) / 2))
                    })
                    .collect()
            };
            let mut out = Vec::with_capacity(polar * inner.len());
            for (c, s, ws) in polar_nodes {
                for (e, we) in &inner {
                    let mut v = Vec::with_capacity(d + 1);
                    v.push(c);
                    v.extend(e.iter().map(|x| s * x));
                    out.push((v, ws * we));
                }
            }
            out
        }
    }
}

/// Radial panel boundaries on `[0, rho_max]`: `[0, rho_0]` then doubling panels.
pub fn radial_panels(rho_max: f64, first: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = 0.0;
    let mut b = first.min(rho_max);
    loop {
        out.push((a, b));
        if b >= rho_max {
            break;
        }
        a = b;
        b = (2.0 * b).min(rho_max);
        // avoid a sliver as the last panel
        if rho_max - b < 0.25 * (b - a) {
            b = rho_max;
        }
    }
    out
}

/// First radial panel end for disk rules.
pub const FIRST_PANEL: f64 = 0.125;

/// Composite Gauss-Legendre nodes on `[0, rho_max]`, optionally split at `breaks`.
pub fn radial_nodes(order: usize, rho_max: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = Vec::new();
    for (a, b) in radial_panels(rho_max, FIRST_PANEL) {
        cuts.push(a);
        cuts.push(b);
    }
    cuts.extend(breaks.iter().copied().filter(|x| *x > 0.0 && *x < rho_max));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * rho_max);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            out.extend(gauss_legendre_interval(order, w[0], w[1]));
        }
    }
    out
}

/// Nodes on the flat disk `{|x^| < rho_max}` in `R^{d}` as `(x^, weight)`;
/// weights carry the `rho^{d-1}` Jacobian so they sum to the disk volume.
pub fn disk_nodes(d: usize, radial: usize, polar: usize, azimuthal: usize, rho_max: f64) -> Vec<(Vec<f64>, f64)> {
    let dirs = sphere_nodes(d - 1, polar, azimuthal);
    let rad = radial_nodes(radial, rho_max, &[]);
    let mut out = Vec::with_capacity(dirs.len() * rad.len());
    for (rho, wr) in &rad {
        let jac = wr * rho.powi(d as i32 - 1);
        for (e, we) in &dirs {
            out.push((e.iter().map(|x| rho * x).collect(), jac * we));
        }
    }
    out
}

/// Rule orders. Half-order copies give the error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureRule {
    /// Sphere `S^{n-1}`.
    SphereProduct { polar: usize, azimuthal: usize },
    /// Disk of radius `rho_max` in the horosphere, composite radial panels.
    HorospherePolar { radial: usize, polar: usize, azimuthal: usize, rho_max: f64 },
    /// Gauss-Legendre in `x1` times the angular sphere of a lateral surface.
    Interval { order: usize, polar: usize, azimuthal: usize },
}

impl QuadratureRule {
    pub fn half_order(&self) -> QuadratureRule {
        let h = |k: usize| (k / 2).max(1);
        match *self {
            QuadratureRule::SphereProduct { polar, azimuthal } => {
                QuadratureRule::SphereProduct { polar: h(polar), azimuthal: h(azimuthal) }
            }
            QuadratureRule::HorospherePolar { radial, polar, azimuthal, rho_max } => {
                QuadratureRule::HorospherePolar { radial: h(radial), polar: h(polar), azimuthal: h(azimuthal), rho_max }
            }
            QuadratureRule::Interval { order, polar, azimuthal } => {
                QuadratureRule::Interval { order: h(order), polar: h(polar), azimuthal: h(azimuthal) }
            }
        }
    }
}

/// Default orders: angular orders sized for the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOrders {
    /// Gauss-Legendre points per radial panel.
    pub radial: usize,
    /// Gauss-Legendre points on intervals (lateral surfaces).
    pub interval: usize,
    pub polar: usize,
    pub azimuthal: usize,
}

impl Default for RuleOrders {
    fn default() -> Self {
        RuleOrders { radial: 16, interval: 64, polar: 32, azimuthal: 64 }
    }
}

impl RuleOrders {
    pub fn sphere(&self) -> QuadratureRule {
        QuadratureRule::SphereProduct { polar: self.polar, azimuthal: self.azimuthal }
    }

    pub fn disk(&self, rho_max: f64) -> QuadratureRule {
        QuadratureRule::HorospherePolar { radial: self.radial, polar: self.polar, azimuthal: self.azimuthal, rho_max }
    }

    pub fn interval(&self) -> QuadratureRule {
        QuadratureRule::Interval { order: self.interval, polar: self.polar, azimuthal: self.azimuthal }
    }
}

/// Value with a rule-refinement error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub quad_error: f64,
}

/// Integrate over a surface with a rule and its half-order copy.
pub fn integrate_surface<F>(surface: &crate::evaluators::SurfaceSpec, integrand: F, rule: &QuadratureRule) -> Result<Estimate>
where
    F: Fn(&crate::evaluators::SurfaceNode) -> Result<f64> + Sync,
{
    let full = par_sum(&surface.nodes(rule)?, &integrand)?;
    let half = par_sum(&surface.nodes(&rule.half_order())?, &integrand)?;
    Ok(Estimate { value: full, quad_error: (full - half).abs() })
}

/// Explicit bound on the part of a horosphere integral beyond `|x^| = rho_max`:
/// `C e^{L(n-q)} rho_max^{n-1-2q}` with `C = 4 c_H C_h omega_{n-2} 2^q / (2q+1-n)`, `c_H = 2n`.
pub fn tail_bound_horosphere(n: usize, q: f64, l: f64, rho_max: f64, c_h: f64) -> Result<f64> {
    let nf = n as f64;
    let expo = nf - 1.0 - 2.0 * q;
    if expo >= 0.0 {
        return Err(Error::InvalidExponent(expo));
    }
    let c_tilde = 4.0 * (2.0 * nf) * c_h * sphere_area(n - 2) * 2f64.powf(q) / (-expo);
    Ok(c_tilde * (l * (nf - q)).exp() * rho_max.powf(expo))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub param: f64,
    pub value: f64,
    pub quad_error: f64,
}

/// Values against `L` (linear) or `r` (fitted in `ln r`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSeries {
    pub param_name: String,
    pub log_scale: bool,
    pub points: Vec<SeriesPoint>,
    /// Absolute noise level below which successive differences count as zero.
    pub floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub limit: f64,
    pub amplitude: f64,
    /// `None` when the series is flat to within its noise.
    pub rate: Option<f64>,
    pub residual: f64,
    pub uncertainty: f64,
}

impl ConvergenceSeries {
    pub fn new(param_name: &str, log_scale: bool) -> Self {
        ConvergenceSeries { param_name: param_name.into(), log_scale, points: Vec::new(), floor: 0.0 }
    }

    pub fn push(&mut self, param: f64, value: f64, quad_error: f64) {
        self.points.push(SeriesPoint { param, value, quad_error });
    }

    fn abscissa(&self, p: f64) -> f64 {
        if self.log_scale {
            p.ln()
        } else {
            p
        }
    }

    /// Three-point ratio fit of `v = v_inf + c e^{-beta s}` on the last three points.
    pub fn extrapolate(&self) -> Result<Fit> {
        let k = self.points.len();
        if k < 3 {
            return Err(Error::Validation(format!("extrapolation needs at least 3 points, got {k}")));
        }
        let s: Vec<f64> = self.points.iter().map(|p| self.abscissa(p.param)).collect();
        let step = s[1] - s[0];
        if !(step > 0.0) || s.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0)) {
            return Err(Error::Validation("extrapolation needs equally spaced, increasing parameters".into()));
        }
        let v: Vec<f64> = self.points.iter().map(|p| p.value).collect();
        let (v1, v2, v3) = (v[k - 3], v[k - 2], v[k - 1]);
        let d1 = v2 - v1;
        let d2 = v3 - v2;
        let last_err = self.points[k - 1].quad_error;
        let noise = 4.0 * self.points[k - 3..].iter().map(|p| p.quad_error).fold(0.0, f64::max)
            + 1e-13 * v3.abs().max(v2.abs())
            + self.floor
            + 1e-300;
        if d1.abs() <= noise && d2.abs() <= noise {
            let spread = v.iter().map(|x| (x - v3).abs()).fold(0.0, f64::max);
            return Ok(Fit { limit: v3, amplitude: 0.0, rate: None, residual: spread, uncertainty: spread.max(last_err) });
        }
        let ratio = d2 / d1;
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::ExtrapolationUnstable(ratio));
        }
        let beta = -ratio.ln() / step;
        let limit = v3 + d2 * ratio / (1.0 - ratio);
        let amplitude = (v3 - limit) * (beta * s[k - 1]).exp();
        let residual = (0..k - 3)
            .map(|i| (v[i] - (limit + amplitude * (-beta * s[i]).exp())).abs())
            .fold(0.0, f64::max);
        Ok(Fit { limit, amplitude, rate: Some(beta), residual, uncertainty: residual.max(last_err) })
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gauss_legendre_known_values() {
        let (x, w) = gauss_legendre(2);
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, w) = gauss_legendre(3);
        assert_relative_eq!(x[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[1], 8.0 / 9.0, epsilon = 1e-15);
        let (x, w) = gauss_legendre(1);
        assert_eq!((x[0], w[0]), (0.0, 2.0));
        for order in [5, 16, 64, 128] {
            let (x, w) = gauss_legendre(order);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            // exact for degree 2 order - 1
            let deg = 2 * order - 2;
            let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(deg as i32)).sum();
            assert_relative_eq!(s, 2.0 / (deg as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0 * PI);
        assert_relative_eq!(sphere_area(2), 4.0 * PI);
        assert_relative_eq!(sphere_area(3), 2.0 * PI * PI);
        for d in 1..=4 {
            let s: f64 = sphere_nodes(d, 8, 16).iter().map(|(_, w)| w).sum();
            assert_relative_eq!(s, sphere_area(d), max_relative = 1e-13);
            for (v, _) in sphere_nodes(d, 3, 4) {
                assert_relative_eq!(v.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn sphere_moments() {
        // int_{S^2} x^2 = 4 pi / 3, int_{S^3} x_1^2 x_2^2 = pi^2 / 12
        let s: f64 = sphere_nodes(2, 8, 16).iter().map(|(v, w)| w * v[1] * v[1]).sum();
        assert_relative_eq!(s, 4.0 * PI / 3.0, max_relative = 1e-13);
        let s: f64 = sphere_nodes(3, 12, 16).iter().map(|(v, w)| w * v[0] * v[0] * v[2] * v[2]).sum();
        assert_relative_eq!(s, PI * PI / 12.0, max_relative = 1e-12);
    }

    #[test]
    fn disk_area_is_exact() {
        for rho_max in [0.05, 1.0, 37.0, 8103.08] {
            let s: f64 = disk_nodes(2, 16, 8, 16, rho_max).iter().map(|(_, w)| w).sum();
            assert_relative_eq!(s, PI * rho_max * rho_max, max_relative = 1e-13);
            let s3: f64 = disk_nodes(3, 16, 8, 16, rho_max).iter().map(|(_, w)| w).sum();
            assert_relative_eq!(s3, 4.0 * PI * rho_max.powi(3) / 3.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn decaying_radial_integrand() {
        // int_0^R rho^{1} / (1 + rho^2)^3 d rho = (1 - (1+R^2)^{-2}) / 4
        let r: f64 = 1e4;
        let s: f64 = radial_nodes(16, r, &[]).iter().map(|(x, w)| w * x / (1.0 + x * x).powi(3)).sum();
        assert_relative_eq!(s, (1.0 - (1.0 + r * r).powi(-2)) / 4.0, max_relative = 1e-13);
        let panels = radial_panels(r, FIRST_PANEL);
        assert_eq!(panels.last().unwrap().1, r);
        assert!(panels.windows(2).all(|w| w[0].1 == w[1].0));
    }

    #[test]
    fn breakpoints_split_panels() {
        let nodes = radial_nodes(4, 1.0, &[0.3]);
        // indicator of [0, 0.3] integrates exactly once split
        let s: f64 = nodes.iter().filter(|(x, _)| *x < 0.3).map(|(_, w)| w).sum();
        assert_relative_eq!(s, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn pairwise_is_order_fixed() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let a = with_workers(Some(1), || par_sum(&v, |x| Ok(x.sin())).unwrap());
        let b = with_workers(Some(8), || par_sum(&v, |x| Ok(x.sin())).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn tail_bound_scaling() {
        let b1 = tail_bound_horosphere(3, 3.0, 4.0, 8.0, 2.0).unwrap();
        let b2 = tail_bound_horosphere(3, 3.0, 4.0, 16.0, 2.0).unwrap();
        assert_relative_eq!(b1 / b2, 16.0, max_relative = 1e-12);
        // independent of L when q = n
        assert_relative_eq!(tail_bound_horosphere(3, 3.0, 9.0, 8.0, 2.0).unwrap(), b1, max_relative = 1e-12);
        assert!(tail_bound_horosphere(3, 3.0, 4.0, 1e12, 2.0).unwrap() < 1e-40);
        assert!(matches!(tail_bound_horosphere(3, 1.0, 4.0, 8.0, 2.0), Err(Error::InvalidExponent(_))));
        let b = tail_bound_horosphere(4, 3.0, 2.0, 8.0, 1.0).unwrap();
        assert_relative_eq!(b / tail_bound_horosphere(4, 3.0, 2.0, 16.0, 1.0).unwrap(), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn extrapolates_exact_exponential() {
        let mut s = ConvergenceSeries::new("L", false);
        for l in [3.0, 4.0, 5.0] {
            s.push(l, 5.0 + 2.0 * (-l as f64).exp(), 0.0);
        }
        let fit = s.extrapolate().unwrap();
        assert_relative_eq!(fit.limit, 5.0, epsilon = 1e-10);
        assert_relative_eq!(fit.rate.unwrap(), 1.0, epsilon = 1e-8);
        assert_relative_eq!(fit.amplitude, 2.0, epsilon = 1e-6);
        s.push(6.0, 5.0 + 2.0 * (-6f64).exp(), 0.0);
        let fit = s.extrapolate().unwrap();
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn constant_series_is_flagged() {
        let mut s = ConvergenceSeries::new("L", false);
        for l in [3.0, 4.0, 5.0] {
            s.push(l, 7.25, 0.0);
        }
        let fit = s.extrapolate().unwrap();
        assert_eq!(fit.limit, 7.25);
        assert!(fit.rate.is_none());
    }

    #[test]
    fn oscillating_series_is_unstable() {
        let mut s = ConvergenceSeries::new("L", false);
        for (l, v) in [(3.0, 1.0), (4.0, 2.0), (5.0, 1.0)] {
            s.push(l, v, 0.0);
        }
        assert!(matches!(s.extrapolate(), Err(Error::ExtrapolationUnstable(_))));
    }

    #[test]
    fn log_scale_power_law() {
        let mut s = ConvergenceSeries::new("r", true);
        for r in [50.0, 100.0, 200.0] {
            s.push(r, 1.0 + 3.0 / r, 0.0);
        }
        let fit = s.extrapolate().unwrap();
        assert_relative_eq!(fit.limit, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.rate.unwrap(), 1.0, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn extrapolation_recovers_limit(v in -10.0f64..10.0, c in -5.0f64..5.0, beta in 0.2f64..3.0) {
            prop_assume!(c.abs() > 1e-3);
            let mut s = ConvergenceSeries::new("L", false);
            for l in [3.0, 4.0, 5.0, 6.0] {
                s.push(l, v + c * (-beta * l).exp(), 0.0);
            }
            let fit = s.extrapolate().unwrap();
            prop_assert!((fit.limit - v).abs() < 1e-9 * (1.0 + c.abs()));
            prop_assert!((fit.rate.unwrap() - beta).abs() < 1e-6);
        }

        #[test]
        fn weights_are_positive(polar in 1usize..20, az in 1usize..20, d in 1usize..4) {
            prop_assert!(sphere_nodes(d, polar, az).iter().all(|(_, w)| *w > 0.0));
        }
    }
}
