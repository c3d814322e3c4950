//! Coordinate charts on hyperbolic space and the exact maps between them.
//!
//! Three charts cover the same manifold:
//!
//! * hyperboloidal `z`, with `t = sqrt(1 + |z|^2)` and `b = dr^2/(1+r^2) + r^2 g_S`;
//! * upper half-space `y`, with `y1 > 0` and `b = y1^-2 |dy|^2`;
//! * horospherical `x`, with `x1 = -ln y1`, `x^ = y^` and `b = dx1^2 + e^{2 x1} |dx^|^2`.
//!
//! A fourth identifier, [`ChartId::Cartesian`], labels Euclidean space for the
//! asymptotically flat models. It never converts to the hyperbolic charts.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChartId {
    Hyperboloidal,
    HalfSpace,
    Horospherical,
    Cartesian,
}

impl ChartId {
    pub fn is_hyperbolic(self) -> bool {
        !matches!(self, ChartId::Cartesian)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChartId::Hyperboloidal => "hyperboloidal",
            ChartId::HalfSpace => "half-space",
            ChartId::Horospherical => "horospherical",
            ChartId::Cartesian => "cartesian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub chart: ChartId,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(chart: ChartId, coords: Vec<f64>) -> Result<Self> {
        let p = Point { chart, coords };
        p.validate()?;
        Ok(p)
    }

    pub fn hyperboloidal(z: &[f64]) -> Result<Self> {
        Self::new(ChartId::Hyperboloidal, z.to_vec())
    }

    pub fn half_space(y: &[f64]) -> Result<Self> {
        Self::new(ChartId::HalfSpace, y.to_vec())
    }

    pub fn horospherical(x: &[f64]) -> Result<Self> {
        Self::new(ChartId::Horospherical, x.to_vec())
    }

    pub fn cartesian(x: &[f64]) -> Result<Self> {
        Self::new(ChartId::Cartesian, x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::Domain("point has no coordinates".into()));
        }
        if self.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("building a {} point", self.chart.name())));
        }
        if self.chart == ChartId::HalfSpace && self.coords[0] <= 0.0 {
            return Err(Error::Domain(format!("half-space point with y1 = {}", self.coords[0])));
        }
        Ok(())
    }

    /// Hyperboloidal radius `r = |z|`, or the Euclidean radius in the Cartesian chart.
    pub fn radius(&self) -> f64 {
        match self.chart {
            ChartId::Hyperboloidal | ChartId::Cartesian => norm(&self.coords),
            ChartId::Horospherical => radial_coordinate(self.coords[0], norm(&self.coords[1..])),
            ChartId::HalfSpace => {
                let y1 = self.coords[0];
                let s = self.coords[1..].iter().map(|v| v * v).sum::<f64>();
                // t - 1 = ((1 - y1)^2 + |y^|^2) / (2 y1), no cancellation
                let tm1 = ((1.0 - y1).powi(2) + s) / (2.0 * y1);
                (tm1 * (tm1 + 2.0)).sqrt()
            }
        }
    }

    pub fn to_chart(&self, target: ChartId) -> Result<Point> {
        to_chart(self, target)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn finite(coords: Vec<f64>, chart: ChartId, what: &str) -> Result<Point> {
    if coords.iter().all(|c| c.is_finite()) {
        Ok(Point { chart, coords })
    } else {
        Err(Error::NonFinite(format!("transforming to the {what} chart")))
    }
}

/// `t - z1`, evaluated without cancellation when `z1 > 0`.
pub fn t_minus_z1(z: &[f64]) -> f64 {
    let r2: f64 = z.iter().map(|v| v * v).sum();
    let t = (1.0 + r2).sqrt();
    if z[0] > 0.0 {
        let hat2: f64 = z[1..].iter().map(|v| v * v).sum();
        (1.0 + hat2) / (t + z[0])
    } else {
        t - z[0]
    }
}

fn hyperboloidal_from(p: &Point) -> Result<Vec<f64>> {
    let c = &p.coords;
    Ok(match p.chart {
        ChartId::Hyperboloidal => c.clone(),
        ChartId::HalfSpace => {
            let y1 = c[0];
            let s = y1 * y1 + c[1..].iter().map(|v| v * v).sum::<f64>();
            let mut z = Vec::with_capacity(c.len());
            z.push((s - 1.0) / (2.0 * y1));
            z.extend(c[1..].iter().map(|v| v / y1));
            z
        }
        ChartId::Horospherical => {
            let x1 = c[0];
            let e = x1.exp();
            let rho2: f64 = c[1..].iter().map(|v| v * v).sum();
            let mut z = Vec::with_capacity(c.len());
            z.push(-x1.sinh() + 0.5 * e * rho2);
            z.extend(c[1..].iter().map(|v| e * v));
            z
        }
        ChartId::Cartesian => {
            return Err(Error::ChartMismatch("Cartesian points have no hyperbolic chart".into()))
        }
    })
}

/// Map a point into another chart. Identity when the charts agree.
pub fn to_chart(p: &Point, target: ChartId) -> Result<Point> {
    p.validate()?;
    if p.chart == target {
        return Ok(p.clone());
    }
    if p.chart == ChartId::Cartesian || target == ChartId::Cartesian {
        return Err(Error::ChartMismatch(format!(
            "cannot map {} to {}",
            p.chart.name(),
            target.name()
        )));
    }
    let c = &p.coords;
    match (p.chart, target) {
        (ChartId::HalfSpace, ChartId::Horospherical) => {
            let mut x = c.clone();
            x[0] = -c[0].ln();
            finite(x, target, "horospherical")
        }
        (ChartId::Horospherical, ChartId::HalfSpace) => {
            let mut y = c.clone();
            y[0] = (-c[0]).exp();
            if y[0] == 0.0 {
                return Err(Error::NonFinite("transforming to the half-space chart".into()));
            }
            finite(y, target, "half-space")
        }
        (_, ChartId::Hyperboloidal) => finite(hyperboloidal_from(p)?, target, "hyperboloidal"),
        (ChartId::Hyperboloidal, _) => {
            let d = t_minus_z1(c);
            let mut out = Vec::with_capacity(c.len());
            if target == ChartId::HalfSpace {
                out.push(1.0 / d);
            } else {
                out.push(d.ln());
            }
            out.extend(c[1..].iter().map(|v| v / d));
            finite(out, target, target.name())
        }
        _ => unreachable!("all chart pairs are handled above"),
    }
}

/// Hyperboloidal radius of the horospherical point `(x1, x^)` with `|x^| = rho`.
///
/// Uses `r^2 = (u - 1)(u + 1)` with `u - 1 = 2 sinh^2(x1/2) + e^{x1} rho^2 / 2`,
/// which keeps full relative accuracy near `r = 0`.
pub fn radial_coordinate(x1: f64, rho: f64) -> f64 {
    let sh = (0.5 * x1).sinh();
    let um1 = 2.0 * sh * sh + 0.5 * x1.exp() * rho * rho;
    (um1 * (um1 + 2.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn center_point_maps_to_unit_half_space_point() {
        let z = Point::hyperboloidal(&[0.0, 0.0, 0.0]).unwrap();
        let y = z.to_chart(ChartId::HalfSpace).unwrap();
        assert_eq!(y.coords, vec![1.0, 0.0, 0.0]);
        let x = z.to_chart(ChartId::Horospherical).unwrap();
        assert_eq!(x.coords, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn horospherical_height_is_minus_log_y1() {
        let x = Point::horospherical(&[2.5, 0.0, 0.0]).unwrap();
        let y = x.to_chart(ChartId::HalfSpace).unwrap();
        assert_relative_eq!(y.coords[0], (-2.5f64).exp(), max_relative = 1e-15);
        let back = y.to_chart(ChartId::Horospherical).unwrap();
        assert_eq!(back.coords[0], -y.coords[0].ln());
        assert_eq!(back.coords[1..], y.coords[1..]);
    }

    #[test]
    fn radial_coordinate_values() {
        assert_eq!(radial_coordinate(0.0, 0.0), 0.0);
        assert_relative_eq!(radial_coordinate(2.0, 0.0), 2f64.sinh(), max_relative = 1e-14);
        // independent evaluation of (cosh x1 + e^{x1} rho^2 / 2)^2 - 1
        let u = 1f64.cosh() + 0.5 * 1f64.exp();
        assert_relative_eq!(radial_coordinate(1.0, 1.0), (u * u - 1.0).sqrt(), max_relative = 1e-13);
        assert_relative_eq!(radial_coordinate(1.0, 1.0), 2.724_498_1, max_relative = 1e-7);
    }

    #[test]
    fn radial_coordinate_keeps_digits_near_origin() {
        // r ~ x1 for tiny x1 at rho = 0
        let r = radial_coordinate(1e-9, 0.0);
        assert_relative_eq!(r, 1e-9, max_relative = 1e-12);
    }

    #[test]
    fn radius_agrees_across_charts() {
        let x = Point::horospherical(&[-1.3, 0.4, 2.0]).unwrap();
        let r = x.radius();
        for chart in [ChartId::Hyperboloidal, ChartId::HalfSpace] {
            assert_relative_eq!(x.to_chart(chart).unwrap().radius(), r, max_relative = 1e-12);
        }
    }

    #[test]
    fn overflow_is_reported() {
        let x = Point::horospherical(&[800.0, 1.0, 0.0]).unwrap();
        assert!(matches!(x.to_chart(ChartId::Hyperboloidal), Err(Error::NonFinite(_))));
        let y = Point::horospherical(&[800.0, 0.0, 0.0]).unwrap();
        assert!(matches!(y.to_chart(ChartId::HalfSpace), Err(Error::NonFinite(_))));
    }

    #[test]
    fn cartesian_does_not_convert() {
        let p = Point::cartesian(&[1.0, 2.0, 3.0]).unwrap();
        assert!(p.to_chart(ChartId::HalfSpace).is_err());
        assert!(Point::half_space(&[0.0, 1.0, 1.0]).is_err());
    }

    fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).all(|(u, v)| (u - v).abs() <= tol * scale)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn chart_cycles_are_identity(x1 in -10.0f64..10.0, a in -7.0f64..7.0, b in -7.0f64..7.0) {
            let x = Point::horospherical(&[x1, a, b]).unwrap();
            let z = x.to_chart(ChartId::Hyperboloidal).unwrap();
            let y = z.to_chart(ChartId::HalfSpace).unwrap();
            let x2 = y.to_chart(ChartId::Horospherical).unwrap();
            prop_assert!(rel_close(&x.coords, &x2.coords, 1e-12));
            let z2 = y.to_chart(ChartId::Hyperboloidal).unwrap();
            prop_assert!(rel_close(&z.coords, &z2.coords, 1e-12));
            let x3 = z.to_chart(ChartId::Horospherical).unwrap();
            prop_assert!(rel_close(&x.coords, &x3.coords, 1e-12));
        }

        #[test]
        fn hat_coordinates_agree(x1 in -10.0f64..10.0, a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
            let x = Point::horospherical(&[x1, a, b, c]).unwrap();
            let y = x.to_chart(ChartId::HalfSpace).unwrap();
            prop_assert_eq!(&x.coords[1..], &y.coords[1..]);
        }

        #[test]
        fn radial_coordinate_matches_chart_radius(x1 in -10.0f64..10.0, a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let rho = (a * a + b * b).sqrt();
            let z = Point::horospherical(&[x1, a, b]).unwrap().to_chart(ChartId::Hyperboloidal).unwrap();
            let rz = norm(&z.coords);
            let r = radial_coordinate(x1, rho);
            prop_assert!((r - rz).abs() <= 1e-10 * rz.max(1e-300) + 1e-300 || (r - rz).abs() <= 1e-10 * r);
        }

        #[test]
        fn hyperboloid_identity_holds(x1 in -10.0f64..10.0, a in -10.0f64..10.0) {
            let z = Point::horospherical(&[x1, a, 0.5]).unwrap().to_chart(ChartId::Hyperboloidal).unwrap();
            let r2: f64 = z.coords.iter().map(|v| v * v).sum();
            let t = (1.0 + r2).sqrt();
            prop_assert!(((t - r2.sqrt()) * (t + r2.sqrt()) - 1.0).abs() < 1e-9 * t.max(1.0));
        }
    }
}
