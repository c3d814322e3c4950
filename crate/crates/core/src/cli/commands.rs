use crate::charts::{norm, ChartId};
use crate::evaluators::{
    ads_mass, ah_geometric, adm_flux, adm_geometric, cylinder_flux_report, decay_exponent, e1, excluded_region_mass,
    face_mass_along, horosphere_mass, model_in_frame, predicted_exponents, sphere_mass_integral, theta, CylinderFace,
    EvalOptions, MassReading, RegionSpec,
};
use crate::massform::StaticPotential;
use crate::metrics::{
    ads_schwarzschild, custom_perturbation, euclidean_background, hyperbolic_background, schwarzschild_af,
    MetricModel, PerturbationSpec,
};
use crate::quadrature::{ConvergenceSeries, Fit};

use super::config::{
    ConfigError, EvaluatorKind, ExperimentConfig, ModelName, PotentialChoice, RegionKind, RhoMaxPolicy,
};
use super::output::{csv, num, opt_num, LinePlot, Rule, Series};
use super::CliError;

pub const MASS_HEADER: [&str; 9] =
    ["evaluator", "param_name", "param_value", "value", "quad_error", "tail_bound", "extrapolated", "fit_rate", "fit_residual"];

pub const CYLINDER_HEADER: [&str; 8] =
    ["piece", "L", "sigma", "value", "quad_error", "magnitude", "fitted_exponent", "predicted_exponent"];

pub const THETA_HEADER: [&str; 8] =
    ["quantity", "L", "sigma", "value", "quad_error", "fitted_exponent", "threshold_exponent", "extrapolated"];

fn unit(key: &str, v: &[f64], n: usize) -> Result<Vec<f64>, ConfigError> {
    if v.len() != n {
        return Err(ConfigError::new(key, format!("expected {n} components, got {}", v.len())));
    }
    let len = norm(v);
    if !(len > 0.0) {
        return Err(ConfigError::new(key, "direction must be nonzero"));
    }
    Ok(v.iter().map(|x| x / len).collect())
}

fn hat_unit(key: &str, v: &Option<Vec<f64>>, n: usize) -> Result<Vec<f64>, ConfigError> {
    match v {
        Some(v) => unit(key, v, n - 1),
        None => Ok(e1(n - 1)),
    }
}

/// The metric model described by the config.
pub fn build_model(cfg: &ExperimentConfig) -> Result<MetricModel, CliError> {
    let n = cfg.n;
    let model = match cfg.model {
        ModelName::Ads => ads_schwarzschild(n, cfg.m)?,
        ModelName::Hyperbolic => hyperbolic_background(n, ChartId::Hyperboloidal),
        ModelName::Euclidean => euclidean_background(n),
        ModelName::Schwarzschild => {
            if n != 3 {
                return Err(ConfigError::new("model.n", "the schwarzschild model is three-dimensional").into());
            }
            schwarzschild_af(cfg.m)?
        }
        ModelName::Bump => {
            let axis = match &cfg.bump_axis {
                Some(a) => unit("model.axis", a, n)?,
                None => {
                    let mut a = vec![0.0; n];
                    a[n - 1] = 1.0;
                    a
                }
            };
            custom_perturbation(&PerturbationSpec::angular_bump(n, cfg.falloff(), cfg.amplitude, &axis, cfg.bump_half_angle))?
        }
        ModelName::Table => {
            if cfg.table_radii.len() != cfg.table_values.len() || cfg.table_radii.len() < 2 {
                return Err(ConfigError::new("model.table.values", "needs as many values as radii (at least 2)").into());
            }
            let spec = PerturbationSpec::radial_table(n, cfg.falloff(), cfg.table_radii.clone(), cfg.table_values.clone())?;
            custom_perturbation(&spec)?
        }
    };
    match &cfg.rotate_to {
        Some(a) => Ok(model_in_frame(&model, &unit("model.rotate_to", a, n)?)?),
        None => Ok(model),
    }
}

pub fn region(cfg: &ExperimentConfig) -> Result<RegionSpec, ConfigError> {
    let n = cfg.n;
    Ok(match cfg.region {
        RegionKind::Full => RegionSpec::Full,
        RegionKind::Empty => RegionSpec::Empty,
        RegionKind::HalfSpace => {
            RegionSpec::HalfSpace { normal: hat_unit("region.normal", &cfg.region_normal, n)?, offset: cfg.region_offset }
        }
        RegionKind::Slab => {
            if !(cfg.region_hi > cfg.region_lo) {
                return Err(ConfigError::new("region.hi", "slab needs region.hi > region.lo"));
            }
            RegionSpec::Slab { normal: hat_unit("region.normal", &cfg.region_normal, n)?, lo: cfg.region_lo, hi: cfg.region_hi }
        }
        RegionKind::Cone => {
            let axis = match &cfg.region_axis {
                Some(a) => unit("region.axis", a, n)?,
                None => e1(n),
            };
            if !(cfg.region_half_angle > 0.0 && cfg.region_half_angle < std::f64::consts::PI) {
                return Err(ConfigError::new("region.half_angle", "must lie in (0, pi)"));
            }
            RegionSpec::Cone { axis, half_angle: cfg.region_half_angle }
        }
    })
}

fn options(cfg: &ExperimentConfig) -> EvalOptions {
    EvalOptions { orders: cfg.orders, mode: cfg.derivatives }
}

fn direction(cfg: &ExperimentConfig) -> Result<Vec<f64>, ConfigError> {
    match &cfg.direction {
        Some(a) => unit("sweep.direction", a, cfg.n),
        None => Ok(e1(cfg.n)),
    }
}

fn potential(cfg: &ExperimentConfig) -> Result<StaticPotential, CliError> {
    let n = cfg.n;
    Ok(match cfg.potential {
        PotentialChoice::Time => StaticPotential::time(n),
        PotentialChoice::Coordinate(i) => {
            if i > n {
                return Err(ConfigError::new("sweep.potential", format!("z{i} does not exist in dimension {n}")).into());
            }
            StaticPotential::coordinate(n, i - 1)
        }
        PotentialChoice::Direction => StaticPotential::horosphere(n, &direction(cfg)?)?,
    })
}

fn check_sweep(key: &str, v: &[f64], positive: bool) -> Result<(), ConfigError> {
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::new(key, "sweep values must be strictly increasing"));
    }
    if positive && v.iter().any(|x| !(*x > 0.0)) {
        return Err(ConfigError::new(key, "sweep values must be positive"));
    }
    Ok(())
}

/// One row of the `mass` table.
#[derive(Debug, Clone, PartialEq)]
pub struct MassRow {
    pub evaluator: EvaluatorKind,
    pub param_name: &'static str,
    pub param_value: f64,
    pub value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
    pub extrapolated: Option<f64>,
    pub fit_rate: Option<f64>,
    pub fit_residual: Option<f64>,
    pub notes: Vec<String>,
}

impl MassRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.evaluator.to_string(),
            self.param_name.to_string(),
            num(self.param_value),
            num(self.value),
            num(self.quad_error),
            num(self.tail_bound),
            opt_num(self.extrapolated),
            opt_num(self.fit_rate),
            opt_num(self.fit_residual),
        ]
    }
}

/// Running fit over the points so far; `None` until it is available.
fn running_fit(series: &mut ConvergenceSeries) -> Option<Fit> {
    let scale = series.points.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
    series.floor = 1e-11 * scale + 1e-13;
    series.extrapolate().ok()
}

fn single(cfg: &ExperimentConfig, model: &MetricModel, param: f64) -> Result<MassReading, CliError> {
    let opts = options(cfg);
    let sigma = |l: f64| (cfg.sigma_exponent() * l).exp();
    Ok(match cfg.evaluator {
        EvaluatorKind::Sphere => sphere_mass_integral(model, &potential(cfg)?, param, &opts)?,
        EvaluatorKind::AhGeometric => ah_geometric(model, param, &opts)?.p0,
        EvaluatorKind::AdmFlux => adm_flux(model, param, &opts)?,
        EvaluatorKind::AdmGeometric => adm_geometric(model, param, &opts)?,
        EvaluatorKind::Horosphere => {
            let rho = match cfg.rho_max {
                RhoMaxPolicy::Auto => None,
                RhoMaxPolicy::Fixed(r) => Some(r),
            };
            horosphere_mass(model, &direction(cfg)?, param, rho, &opts)?
        }
        EvaluatorKind::Face => face_mass_along(model, &direction(cfg)?, param, sigma(param), &opts)?,
        EvaluatorKind::Excluded => excluded_region_mass(model, &region(cfg)?, param, sigma(param), &opts)?,
    })
}

/// Run the selected evaluator over its sweep.
pub fn mass_rows(cfg: &ExperimentConfig) -> Result<Vec<MassRow>, CliError> {
    let model = build_model(cfg)?;
    let (name, sweep) = if cfg.evaluator.sweeps_radius() {
        check_sweep("sweep.r", &cfg.r_list, true)?;
        ("r", &cfg.r_list)
    } else {
        check_sweep("sweep.L", &cfg.l_list, false)?;
        ("L", &cfg.l_list)
    };
    let scale = if cfg.normalize && model.is_hyperbolic() { 1.0 / ads_mass(cfg.n, 1.0) } else { 1.0 };
    let mut series = ConvergenceSeries::new(name, name == "r");
    let mut rows = Vec::with_capacity(sweep.len());
    for &param in sweep {
        let reading = single(cfg, &model, param)?;
        let (value, quad_error) = (reading.value * scale, reading.quad_error * scale);
        series.push(param, value, quad_error);
        let fit = running_fit(&mut series);
        rows.push(MassRow {
            evaluator: cfg.evaluator,
            param_name: name,
            param_value: param,
            value,
            quad_error,
            tail_bound: reading.tail_bound * scale,
            extrapolated: fit.map(|f| f.limit),
            fit_rate: fit.and_then(|f| f.rate),
            fit_residual: fit.map(|f| f.residual),
            notes: reading.notes,
        });
    }
    Ok(rows)
}

pub fn mass_csv(rows: &[MassRow]) -> String {
    csv(&MASS_HEADER, &rows.iter().map(MassRow::fields).collect::<Vec<_>>())
}

pub fn mass_plot(cfg: &ExperimentConfig, rows: &[MassRow]) -> LinePlot {
    let param = rows.first().map_or("L", |r| r.param_name);
    LinePlot {
        title: format!("{} on {} (n = {})", cfg.evaluator, cfg.model, cfg.n),
        x_label: param.into(),
        y_label: if cfg.normalize { "value / 2(n-1)omega".into() } else { "value".into() },
        series: vec![Series { name: cfg.evaluator.to_string(), points: rows.iter().map(|r| (r.param_value, r.value)).collect() }],
        rules: rows
            .last()
            .and_then(|r| r.extrapolated)
            .map(|y| vec![Rule { label: format!("limit {y:.6}"), y }])
            .unwrap_or_default(),
    }
}

/// One row of the cylinder report.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderRow {
    pub piece: String,
    pub l: f64,
    pub sigma: f64,
    pub value: f64,
    pub quad_error: f64,
    pub magnitude: f64,
    pub fitted_exponent: Option<f64>,
    pub predicted_exponent: Option<f64>,
}

/// Every piece of the cylinder boundary at each `L`, with running decay fits.
pub fn cylinder_rows(cfg: &ExperimentConfig) -> Result<Vec<CylinderRow>, CliError> {
    let model = build_model(cfg)?;
    check_sweep("sweep.L", &cfg.l_list, true)?;
    let k = cfg.sigma_exponent();
    let pred = model.q.is_finite().then(|| predicted_exponents(cfg.n, model.q, k));
    let v = StaticPotential::horosphere(cfg.n, &e1(cfg.n))?;
    let opts = options(cfg);
    let pieces: [(&str, Option<CylinderFace>, Option<f64>); 6] = [
        ("F+", Some(CylinderFace::Top), None),
        ("F-", Some(CylinderFace::Bottom), pred.map(|p| p.bottom)),
        ("S_L", Some(CylinderFace::Lateral), pred.map(|p| p.lateral)),
        ("E+", Some(CylinderFace::TopEdge), pred.map(|p| p.top_edge)),
        ("E-", Some(CylinderFace::BottomEdge), pred.map(|p| p.bottom_edge)),
        ("F+|h|^2", None, pred.map(|p| p.top_quadratic)),
    ];
    let mut history: Vec<Vec<f64>> = vec![Vec::new(); pieces.len()];
    let mut ls = Vec::new();
    let mut rows = Vec::new();
    for &l in &cfg.l_list {
        let sigma = (k * l).exp();
        let rep = cylinder_flux_report(&model, &v, l, sigma, &opts)?;
        ls.push(l);
        for (i, (name, face, predicted)) in pieces.iter().enumerate() {
            let top = rep.face(CylinderFace::Top);
            let (value, quad_error, magnitude) = match face {
                Some(f) => {
                    let ff = rep.face(*f);
                    (ff.direct.value, ff.direct.quad_error, ff.magnitude)
                }
                None => (top.quadratic, 0.0, top.quadratic),
            };
            history[i].push(magnitude);
            let fitted = if ls.len() >= 2 { decay_exponent(&ls, &history[i], false).ok() } else { None };
            rows.push(CylinderRow {
                piece: name.to_string(),
                l,
                sigma,
                value,
                quad_error,
                magnitude,
                fitted_exponent: fitted,
                predicted_exponent: *predicted,
            });
        }
    }
    Ok(rows)
}

pub fn cylinder_csv(rows: &[CylinderRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.piece.clone(),
                num(r.l),
                num(r.sigma),
                num(r.value),
                num(r.quad_error),
                num(r.magnitude),
                opt_num(r.fitted_exponent),
                opt_num(r.predicted_exponent),
            ]
        })
        .collect();
    csv(&CYLINDER_HEADER, &body)
}

pub fn cylinder_plot(rows: &[CylinderRow]) -> LinePlot {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        let pt = (r.l, r.magnitude.abs().log10());
        match series.iter_mut().find(|s| s.name == r.piece) {
            Some(s) => s.points.push(pt),
            None => series.push(Series { name: r.piece.clone(), points: vec![pt] }),
        }
    }
    LinePlot {
        title: "cylinder pieces: log10 of int V|h|".into(),
        x_label: "L".into(),
        y_label: "log10 magnitude".into(),
        series,
        rules: Vec::new(),
    }
}

/// One row of the theta report.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRow {
    pub quantity: &'static str,
    pub l: f64,
    pub sigma: f64,
    pub value: f64,
    pub quad_error: f64,
    pub fitted_exponent: Option<f64>,
    pub threshold_exponent: Option<f64>,
    pub extrapolated: Option<f64>,
}

/// `Theta(U, L)` and the mass outside `U` over the `L` sweep.
pub fn theta_rows(cfg: &ExperimentConfig) -> Result<Vec<ThetaRow>, CliError> {
    let model = build_model(cfg)?;
    check_sweep("sweep.L", &cfg.l_list, false)?;
    let region = region(cfg)?;
    let opts = options(cfg);
    let threshold = Some(model.q - cfg.n as f64).filter(|t| t.is_finite());
    let mut ls = Vec::new();
    let mut thetas = Vec::new();
    let mut series = ConvergenceSeries::new("L", false);
    let mut rows = Vec::new();
    for &l in &cfg.l_list {
        let sigma = (cfg.sigma_exponent() * l).exp();
        let th = theta(cfg.n, &region, l, sigma, &cfg.orders);
        ls.push(l);
        thetas.push(th);
        let fitted = if ls.len() >= 2 { decay_exponent(&ls, &thetas, false).ok() } else { None };
        rows.push(ThetaRow {
            quantity: "theta",
            l,
            sigma,
            value: th,
            quad_error: 0.0,
            fitted_exponent: fitted,
            threshold_exponent: threshold,
            extrapolated: None,
        });
        let ex = excluded_region_mass(&model, &region, l, sigma, &opts)?;
        series.push(l, ex.value, ex.quad_error);
        let fit = running_fit(&mut series);
        rows.push(ThetaRow {
            quantity: "excluded_mass",
            l,
            sigma,
            value: ex.value,
            quad_error: ex.quad_error,
            fitted_exponent: None,
            threshold_exponent: None,
            extrapolated: fit.map(|f| f.limit),
        });
    }
    Ok(rows)
}

pub fn theta_csv(rows: &[ThetaRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.quantity.to_string(),
                num(r.l),
                num(r.sigma),
                num(r.value),
                num(r.quad_error),
                opt_num(r.fitted_exponent),
                opt_num(r.threshold_exponent),
                opt_num(r.extrapolated),
            ]
        })
        .collect();
    csv(&THETA_HEADER, &body)
}

pub fn theta_plot(rows: &[ThetaRow]) -> LinePlot {
    let pts = |q: &str, f: fn(f64) -> f64| -> Vec<(f64, f64)> {
        rows.iter().filter(|r| r.quantity == q).map(|r| (r.l, f(r.value))).collect()
    };
    LinePlot {
        title: "Theta(U, L)".into(),
        x_label: "L".into(),
        y_label: "ln Theta".into(),
        series: vec![Series { name: "ln Theta".into(), points: pts("theta", f64::ln) }],
        rules: Vec::new(),
    }
}
