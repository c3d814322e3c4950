//! Acceptance checks with measured values, expectations and tolerances.
//!
//! [`run`] evaluates the ten criteria and returns a [`Report`]; the CLI prints
//! its table and exits nonzero when any check fails.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::charts::{ChartId, Point};
use crate::cli::commands::{mass_csv, mass_rows};
use crate::cli::ExperimentConfig;
use crate::evaluators::{
    adm_flux, adm_geometric, ah_geometric, cylinder_flux_report, decay_exponent, e1, excluded_region_mass,
    face_mass, frame_for_direction, horosphere_mass, mass_vector, predicted_exponents, sphere_mass_integral,
    sphere_remainder, theta, CylinderFace, EvalOptions, RegionSpec,
};
use crate::geomkernel::{level_set_geometry, scalar_curvature, CoordinateFunction, Radius};
use crate::jet::DerivMode;
use crate::massform::StaticPotential;
use crate::metrics::{
    ads_schwarzschild, custom_perturbation, euclidean_background, hyperbolic_background, schwarzschild_af,
    MetricModel, PerturbationSpec,
};
use crate::quadrature::{with_workers, ConvergenceSeries, RuleOrders};
use crate::Result;

/// How a measurement is compared with its expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// `|measured - expected| <= tol |expected|`.
    Relative(f64),
    /// `|measured - expected| <= tol`.
    Absolute(f64),
    /// `measured < expected`.
    Below,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub label: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: Tolerance,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub measurements: Vec<Measurement>,
    /// Set when the evaluation itself failed.
    pub error: Option<String>,
    pub elapsed: Duration,
}

impl Criterion {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.measurements.is_empty() && self.measurements.iter().all(|m| m.passed)
    }

    /// `PASS  3  ADM ...` summary line.
    pub fn line(&self) -> String {
        let worst = self
            .measurements
            .iter()
            .find(|m| !m.passed)
            .map(|m| format!("; failed: {} = {:.6e}", m.label, m.measured))
            .unwrap_or_default();
        let err = self.error.as_ref().map(|e| format!("; error: {e}")).unwrap_or_default();
        format!(
            "{} {:>2}  {:<44} {:>3} checks  {:>7.2}s{worst}{err}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measurements.len(),
            self.elapsed.as_secs_f64()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub criteria: Vec<Criterion>,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.criteria.iter().filter(|c| !c.passed()).count()
    }

    /// Every measurement, then one summary line per criterion.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<3} {:<52} {:>22} {:>22} {:>16}  result", "id", "check", "measured", "expected", "tolerance");
        for c in &self.criteria {
            for m in &c.measurements {
                let tol = match m.tolerance {
                    Tolerance::Relative(t) => format!("rel {t:.1e}"),
                    Tolerance::Absolute(t) => format!("abs {t:.1e}"),
                    Tolerance::Below => "below".into(),
                };
                let _ = writeln!(
                    s,
                    "{:<3} {:<52} {:>22.14e} {:>22.14e} {:>16}  {}",
                    c.id,
                    m.label,
                    m.measured,
                    m.expected,
                    tol,
                    if m.passed { "ok" } else { "FAIL" }
                );
            }
            if let Some(e) = &c.error {
                let _ = writeln!(s, "{:<3} error: {e}", c.id);
            }
        }
        s.push('\n');
        for c in &self.criteria {
            s.push_str(&c.line());
            s.push('\n');
        }
        let _ = writeln!(s, "{} of {} criteria passed", self.criteria.len() - self.failures(), self.criteria.len());
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestOptions {
    /// Multiplies every relative and absolute tolerance (test hook).
    pub tolerance_scale: f64,
    /// Criteria to run; empty runs all.
    pub only: Vec<u8>,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { tolerance_scale: 1.0, only: Vec::new() }
    }
}

struct Checks {
    scale: f64,
    out: Vec<Measurement>,
}

impl Checks {
    fn push(&mut self, label: impl Into<String>, measured: f64, expected: f64, tolerance: Tolerance) {
        let passed = measured.is_finite()
            && match tolerance {
                Tolerance::Relative(t) => (measured - expected).abs() <= t * self.scale * expected.abs(),
                Tolerance::Absolute(t) => (measured - expected).abs() <= t * self.scale,
                Tolerance::Below => measured < expected,
            };
        self.out.push(Measurement { label: label.into(), measured, expected, tolerance, passed });
    }
}

pub const TITLES: [&str; 10] = [
    "AdS-Schwarzschild horosphere mass",
    "cross-evaluator consistency",
    "ADM flux and geometric forms",
    "pure backgrounds give zero",
    "cylinder decay exponents",
    "decomposition remainder is quadratic",
    "Minkowski length under rotation",
    "Theta and excluded regions",
    "background geometry oracles",
    "CSV determinism across workers",
];

const L_SWEEP: [f64; 4] = [3.0, 4.0, 5.0, 6.0];
const SIGMA_K: f64 = 1.5;

/// Run the selected criteria in order.
pub fn run(opts: &SelftestOptions) -> Report {
    let criteria = (1..=10u8)
        .filter(|id| opts.only.is_empty() || opts.only.contains(id))
        .map(|id| run_one(id, opts.tolerance_scale))
        .collect();
    Report { criteria }
}

/// Run one criterion (`1..=10`).
pub fn run_one(id: u8, tolerance_scale: f64) -> Criterion {
    let start = Instant::now();
    let mut checks = Checks { scale: tolerance_scale, out: Vec::new() };
    let result = match id {
        1 => golden_value(&mut checks),
        2 => cross_evaluator(&mut checks),
        3 => adm(&mut checks),
        4 => backgrounds(&mut checks),
        5 => decay_exponents(&mut checks),
        6 => remainder_scaling(&mut checks),
        7 => minkowski(&mut checks),
        8 => regions(&mut checks),
        9 => geometry(&mut checks),
        10 => determinism(&mut checks),
        _ => Err(crate::Error::Validation(format!("no criterion {id}"))),
    };
    Criterion {
        id,
        title: TITLES.get(id as usize - 1).copied().unwrap_or("unknown"),
        measurements: checks.out,
        error: result.err().map(|e| e.to_string()),
        elapsed: start.elapsed(),
    }
}

fn sigma(l: f64) -> f64 {
    (SIGMA_K * l).exp()
}

fn extrapolate(name: &str, log_scale: bool, points: &[(f64, f64, f64)]) -> Result<f64> {
    let mut s = ConvergenceSeries::new(name, log_scale);
    for &(p, v, e) in points {
        s.push(p, v, e);
    }
    let scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    s.floor = 1e-11 * scale + 1e-13;
    Ok(s.extrapolate()?.limit)
}

fn horosphere_limit(model: &MetricModel, opts: &EvalOptions) -> Result<f64> {
    let pts = L_SWEEP
        .iter()
        .map(|&l| horosphere_mass(model, &e1(model.n), l, None, opts).map(|r| (l, r.value, r.quad_error)))
        .collect::<Result<Vec<_>>>()?;
    extrapolate("L", false, &pts)
}

fn golden_value(c: &mut Checks) -> Result<()> {
    let opts = EvalOptions::default();
    for m in [0.5, 1.0, 2.0] {
        let t0 = Instant::now();
        let limit = horosphere_limit(&ads_schwarzschild(3, m)?, &opts)?;
        let secs = t0.elapsed().as_secs_f64();
        c.push(format!("horosphere limit, m = {m}"), limit, 16.0 * PI * m, Tolerance::Relative(0.01));
        c.push(format!("runtime seconds, m = {m}"), secs, 60.0, Tolerance::Below);
    }
    Ok(())
}

fn cross_evaluator(c: &mut Checks) -> Result<()> {
    let model = ads_schwarzschild(3, 1.0)?;
    let opts = EvalOptions::default();
    let radii = [30.0, 60.0, 120.0];
    let sphere = radii
        .iter()
        .map(|&r| sphere_mass_integral(&model, &StaticPotential::time(3), r, &opts).map(|x| (r, x.value, x.quad_error)))
        .collect::<Result<Vec<_>>>()?;
    let ah = radii
        .iter()
        .map(|&r| ah_geometric(&model, r, &opts).map(|x| (r, x.p0.value, x.p0.quad_error)))
        .collect::<Result<Vec<_>>>()?;
    let face = L_SWEEP
        .iter()
        .map(|&l| face_mass(&model, l, sigma(l), &opts).map(|x| (l, x.value, x.quad_error)))
        .collect::<Result<Vec<_>>>()?;
    let horo = horosphere_limit(&model, &opts)?;
    let limits = [
        ("sphere_mass_integral (V = t)", extrapolate("r", true, &sphere)?),
        ("ah_geometric p0", extrapolate("r", true, &ah)?),
        ("face_mass (k = 3/2)", extrapolate("L", false, &face)?),
    ];
    for (name, v) in limits {
        c.push(format!("{name} vs horosphere_mass"), v, horo, Tolerance::Relative(0.015));
    }
    let all: Vec<f64> = limits.iter().map(|x| x.1).chain([horo]).collect();
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    c.push("relative spread of the four limits", (hi - lo) / horo.abs(), 0.0, Tolerance::Absolute(0.015));
    Ok(())
}

fn adm(c: &mut Checks) -> Result<()> {
    let model = schwarzschild_af(1.0)?;
    let opts = EvalOptions::default();
    let radii = [50.0, 100.0, 200.0];
    let flux = radii.iter().map(|&r| adm_flux(&model, r, &opts)).collect::<Result<Vec<_>>>()?;
    let geo = radii.iter().map(|&r| adm_geometric(&model, r, &opts)).collect::<Result<Vec<_>>>()?;
    let pts = |v: &[crate::evaluators::MassReading]| -> Vec<(f64, f64, f64)> {
        radii.iter().zip(v).map(|(r, x)| (*r, x.value, x.quad_error)).collect()
    };
    c.push("adm_flux limit", extrapolate("r", true, &pts(&flux))?, 1.0, Tolerance::Relative(0.01));
    c.push("adm_geometric limit", extrapolate("r", true, &pts(&geo))?, 1.0, Tolerance::Relative(0.01));
    let diff: Vec<f64> = flux.iter().zip(&geo).map(|(a, b)| a.value - b.value).collect();
    c.push("difference decay exponent in r", decay_exponent(&radii, &diff, true)?, -1.0, Tolerance::Relative(0.25));
    Ok(())
}

fn backgrounds(c: &mut Checks) -> Result<()> {
    let opts = EvalOptions::default();
    for n in [3usize, 4] {
        let hyp = hyperbolic_background(n, ChartId::Hyperboloidal);
        let flat = euclidean_background(n);
        let mut worst = |label: &str, vals: Vec<f64>| {
            let m = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
            c.push(format!("n = {n}: max |{label}|"), m, 0.0, Tolerance::Absolute(1e-8));
        };
        let radii = [10.0, 20.0, 40.0];
        let mut v = Vec::new();
        for &r in &radii {
            v.push(sphere_mass_integral(&hyp, &StaticPotential::time(n), r, &opts)?.value);
            v.push(sphere_mass_integral(&hyp, &StaticPotential::coordinate(n, 0), r, &opts)?.value);
        }
        worst("sphere_mass_integral", v);
        let mut v = Vec::new();
        for &r in &radii {
            let ah = ah_geometric(&hyp, r, &opts)?;
            v.push(ah.p0.value);
            v.extend(ah.p.iter().map(|x| x.value));
        }
        worst("ah_geometric", v);
        let mv = mass_vector(&hyp, &radii, &opts)?;
        worst("mass_vector", std::iter::once(mv.p0).chain(mv.p).collect());
        let mut horo = Vec::new();
        let mut face = Vec::new();
        let mut excl = Vec::new();
        let mut cyl = Vec::new();
        let half = RegionSpec::HalfSpace { normal: e1(n - 1), offset: 0.0 };
        let v = StaticPotential::horosphere(n, &e1(n))?;
        // the four-dimensional disks are large; one L suffices there
        let ls: &[f64] = if n == 3 { &L_SWEEP } else { &L_SWEEP[..1] };
        for &l in ls {
            horo.push(horosphere_mass(&hyp, &e1(n), l, None, &opts)?.value);
            face.push(face_mass(&hyp, l, sigma(l), &opts)?.value);
            excl.push(excluded_region_mass(&hyp, &half, l, sigma(l), &opts)?.value);
            let rep = cylinder_flux_report(&hyp, &v, l, sigma(l), &opts)?;
            cyl.extend(rep.faces.iter().map(|f| f.direct.value));
        }
        worst("horosphere_mass", horo);
        worst("face_mass", face);
        worst("excluded_region_mass", excl);
        worst("cylinder pieces", cyl);
        let radii = [50.0, 100.0, 200.0];
        let mut v = Vec::new();
        for &r in &radii {
            v.push(adm_flux(&flat, r, &opts)?.value);
            v.push(adm_geometric(&flat, r, &opts)?.value);
        }
        worst("adm_flux and adm_geometric", v);
    }
    Ok(())
}

fn decay_exponents(c: &mut Checks) -> Result<()> {
    let model = ads_schwarzschild(3, 1.0)?;
    let opts = EvalOptions::default();
    let v = StaticPotential::horosphere(3, &e1(3))?;
    let pred = predicted_exponents(3, model.q, SIGMA_K);
    let pieces = [
        (CylinderFace::Bottom, pred.bottom),
        (CylinderFace::TopEdge, pred.top_edge),
        (CylinderFace::BottomEdge, pred.bottom_edge),
        (CylinderFace::Lateral, pred.lateral),
    ];
    let mut mags = vec![Vec::new(); pieces.len()];
    for &l in &L_SWEEP {
        let rep = cylinder_flux_report(&model, &v, l, sigma(l), &opts)?;
        for (i, (f, _)) in pieces.iter().enumerate() {
            mags[i].push(rep.face(*f).magnitude);
        }
    }
    for (i, (f, p)) in pieces.iter().enumerate() {
        c.push(format!("{} decay exponent in L", f.name()), decay_exponent(&L_SWEEP, &mags[i], false)?, *p, Tolerance::Relative(0.25));
    }
    Ok(())
}

fn bump(amplitude: f64) -> Result<MetricModel> {
    custom_perturbation(&PerturbationSpec::angular_bump(3, 3.0, amplitude, &[0.3, 0.5, 0.8], 1.2))
}

fn remainder_scaling(c: &mut Checks) -> Result<()> {
    let opts = EvalOptions::default();
    let lambdas = [1.0, 0.5, 0.25];
    for (name, v) in [("t", StaticPotential::time(3)), ("z3", StaticPotential::coordinate(3, 2))] {
        for r in [2.0, 4.0] {
            let rem = lambdas
                .iter()
                .map(|&lam| sphere_remainder(&bump(0.3 * lam)?, &v, r, &opts).map(|x| x.value))
                .collect::<Result<Vec<_>>>()?;
            c.push(
                format!("remainder exponent in lambda, V = {name}, r = {r}"),
                decay_exponent(&lambdas, &rem, true)?,
                2.0,
                Tolerance::Absolute(0.2),
            );
        }
    }
    Ok(())
}

fn minkowski(c: &mut Checks) -> Result<()> {
    let model = bump(0.3)?;
    let opts = EvalOptions { orders: RuleOrders { polar: 64, azimuthal: 128, ..RuleOrders::default() }, ..EvalOptions::default() };
    let radii = [20.0, 40.0, 80.0];
    let base = mass_vector(&model, &radii, &opts)?;
    for a in [[0.6, -0.48, 0.64], [0.0, 1.0, 0.0]] {
        let rotated = mass_vector(&model.rotated(&frame_for_direction(&a)), &radii, &opts)?;
        c.push(
            format!("p0^2 - |p|^2 in frame e1 -> {a:?}"),
            rotated.minkowski_sq,
            base.minkowski_sq,
            Tolerance::Relative(0.005),
        );
    }
    Ok(())
}

fn regions(c: &mut Checks) -> Result<()> {
    let model = ads_schwarzschild(3, 1.0)?;
    let opts = EvalOptions::default();
    let orders = opts.orders;
    let half = RegionSpec::HalfSpace { normal: vec![1.0, 0.0], offset: 0.0 };
    let cone = RegionSpec::Cone { axis: e1(3), half_angle: 0.5 };
    let threshold = model.q - 3.0;
    let mut cone_theta = Vec::new();
    for &l in &L_SWEEP {
        let s = sigma(l);
        let full = theta(3, &RegionSpec::Full, l, s, &orders);
        c.push(format!("half-space Theta ratio, L = {l}"), theta(3, &half, l, s, &orders) / full, 0.5, Tolerance::Absolute(1e-6));
        cone_theta.push(theta(3, &cone, l, s, &orders));
        let face = face_mass(&model, l, s, &opts)?.value;
        let outside_cone = excluded_region_mass(&model, &cone, l, s, &opts)?.value;
        let outside_half = excluded_region_mass(&model, &half, l, s, &opts)?.value;
        c.push(format!("mass outside shrinking cone vs face, L = {l}"), outside_cone, face, Tolerance::Relative(0.015));
        c.push(format!("mass outside half-space vs face/2, L = {l}"), outside_half, 0.5 * face, Tolerance::Relative(0.015));
    }
    c.push("cone Theta decay exponent vs q - n", decay_exponent(&L_SWEEP, &cone_theta, false)?, threshold, Tolerance::Below);
    Ok(())
}

fn geometry(c: &mut Checks) -> Result<()> {
    for n in [3usize, 4] {
        let nf = n as f64;
        let zmodel = hyperbolic_background(n, ChartId::Hyperboloidal);
        let xmodel = hyperbolic_background(n, ChartId::Horospherical);
        for (mode, tol, tag) in [(DerivMode::Analytic, 1e-10, "analytic"), (DerivMode::FiniteDifference, 1e-5, "fd")] {
            let mut worst_s: f64 = 0.0;
            for r in [0.5, 3.0, 20.0] {
                let mut z = vec![0.0; n];
                z[0] = 0.6 * r;
                z[n - 1] = 0.8 * r;
                let p = Point::hyperboloidal(&z)?;
                let h = level_set_geometry(&zmodel, &Radius, &p, 1.0, mode)?.mean_curvature;
                let exact = (nf - 1.0) * (1.0 + r * r).sqrt() / r;
                worst_s = worst_s.max((h / exact - 1.0).abs());
            }
            c.push(format!("n = {n}: H(S_r) relative error, {tag}"), worst_s, 0.0, Tolerance::Absolute(tol));
            let mut worst_h: f64 = 0.0;
            for l in [-1.0, 0.0, 2.5] {
                let mut x = vec![0.7; n];
                x[0] = l;
                let p = Point::horospherical(&x)?;
                let h = level_set_geometry(&xmodel, &CoordinateFunction(0), &p, 1.0, mode)?.mean_curvature;
                worst_h = worst_h.max((h / (nf - 1.0) - 1.0).abs());
            }
            c.push(format!("n = {n}: H(H_L) relative error, {tag}"), worst_h, 0.0, Tolerance::Absolute(tol));
        }
        let charts: [(ChartId, Vec<f64>); 3] = [
            (ChartId::Hyperboloidal, (0..n).map(|i| 0.4 + 0.3 * i as f64).collect()),
            (ChartId::HalfSpace, (0..n).map(|i| 0.7 - 0.2 * i as f64).map(f64::abs).collect()),
            (ChartId::Horospherical, (0..n).map(|i| 1.1 - 0.5 * i as f64).collect()),
        ];
        for (chart, coords) in charts {
            let model = hyperbolic_background(n, chart);
            let p = Point::new(chart, coords)?;
            let r = scalar_curvature(&model, &p, DerivMode::Analytic)?;
            c.push(format!("n = {n}: R_b in the {} chart", chart.name()), r, -nf * (nf - 1.0), Tolerance::Absolute(1e-6));
        }
    }
    Ok(())
}

/// The configuration used for the determinism check.
pub fn reference_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn determinism(c: &mut Checks) -> Result<()> {
    let cfg = reference_config();
    let csv = |w: usize| -> Result<String> {
        with_workers(Some(w), || mass_rows(&cfg)).map(|rows| mass_csv(&rows)).map_err(|e| crate::Error::Validation(e.to_string()))
    };
    let one = csv(1)?;
    let eight = csv(8)?;
    let differing = one.bytes().zip(eight.bytes()).filter(|(a, b)| a != b).count() + one.len().abs_diff(eight.len());
    c.push("differing CSV bytes, 1 vs 8 workers", differing as f64, 0.0, Tolerance::Absolute(0.0));
    c.push("CSV rows", one.lines().count() as f64, 1.0 + L_SWEEP.len() as f64, Tolerance::Absolute(0.0));
    Ok(())
}
