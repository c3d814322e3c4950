//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; lists are comma-separated.
//! Unknown keys are errors. [`ExperimentConfig::normalized`] prints every set
//! key in a fixed order and parses back to the same configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::jet::DerivMode;
use crate::quadrature::RuleOrders;

/// Configuration problem, naming the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: &str, message: impl Into<String>) -> Self {
        ConfigError { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "unknown value `{s}` (expected one of: {})",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

keyword_enum!(ModelName {
    Ads => "ads",
    Hyperbolic => "hyperbolic",
    Euclidean => "euclidean",
    Schwarzschild => "schwarzschild",
    Bump => "bump",
    Table => "table",
});

keyword_enum!(EvaluatorKind {
    Sphere => "sphere",
    Horosphere => "horosphere",
    Face => "face",
    Excluded => "excluded",
    AhGeometric => "ah-geometric",
    AdmFlux => "adm-flux",
    AdmGeometric => "adm-geometric",
});

keyword_enum!(RegionKind {
    Full => "full",
    Empty => "empty",
    HalfSpace => "half-space",
    Slab => "slab",
    Cone => "cone",
});

impl EvaluatorKind {
    /// Sweeps over `r` rather than `L`.
    pub fn sweeps_radius(self) -> bool {
        matches!(self, EvaluatorKind::Sphere | EvaluatorKind::AhGeometric | EvaluatorKind::AdmFlux | EvaluatorKind::AdmGeometric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoMaxPolicy {
    Auto,
    Fixed(f64),
}

/// Static potential used by the sphere evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialChoice {
    /// `V = t`.
    Time,
    /// `V = z_i`, one-based in text.
    Coordinate(usize),
    /// `V = t - a.z` with the sweep direction.
    Direction,
}

impl fmt::Display for PotentialChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialChoice::Time => f.write_str("t"),
            PotentialChoice::Coordinate(i) => write!(f, "z{i}"),
            PotentialChoice::Direction => f.write_str("direction"),
        }
    }
}

impl FromStr for PotentialChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "t" => Ok(PotentialChoice::Time),
            "direction" => Ok(PotentialChoice::Direction),
            _ => s
                .strip_prefix('z')
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|i| *i >= 1)
                .map(PotentialChoice::Coordinate)
                .ok_or_else(|| format!("unknown potential `{s}` (expected t, z1..zn or direction)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub n: usize,
    pub m: f64,
    /// Falloff for bump and table models (defaults to `n`).
    pub q: Option<f64>,
    pub amplitude: f64,
    pub bump_axis: Option<Vec<f64>>,
    pub bump_half_angle: f64,
    pub table_radii: Vec<f64>,
    pub table_values: Vec<f64>,
    /// Express the model in the frame taking `e1` to this direction.
    pub rotate_to: Option<Vec<f64>>,
    pub evaluator: EvaluatorKind,
    pub l_list: Vec<f64>,
    pub r_list: Vec<f64>,
    /// `sigma(L) = e^{kL}`; `None` means `k = n/2`.
    pub sigma_k: Option<f64>,
    pub rho_max: RhoMaxPolicy,
    pub direction: Option<Vec<f64>>,
    pub potential: PotentialChoice,
    pub region: RegionKind,
    pub region_normal: Option<Vec<f64>>,
    pub region_offset: f64,
    pub region_lo: f64,
    pub region_hi: f64,
    pub region_axis: Option<Vec<f64>>,
    pub region_half_angle: f64,
    pub orders: RuleOrders,
    pub derivatives: DerivMode,
    pub normalize: bool,
    pub csv: Option<String>,
    pub svg: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelName::Ads,
            n: 3,
            m: 1.0,
            q: None,
            amplitude: 0.3,
            bump_axis: None,
            bump_half_angle: 1.2,
            table_radii: Vec::new(),
            table_values: Vec::new(),
            rotate_to: None,
            evaluator: EvaluatorKind::Horosphere,
            l_list: vec![3.0, 4.0, 5.0, 6.0],
            r_list: vec![30.0, 60.0, 120.0],
            sigma_k: None,
            rho_max: RhoMaxPolicy::Auto,
            direction: None,
            potential: PotentialChoice::Time,
            region: RegionKind::Full,
            region_normal: None,
            region_offset: 0.0,
            region_lo: -1.0,
            region_hi: 1.0,
            region_axis: None,
            region_half_angle: 0.3,
            orders: RuleOrders::default(),
            derivatives: DerivMode::Analytic,
            normalize: false,
            csv: None,
            svg: None,
        }
    }
}

/// Every accepted key, in normalized output order.
pub const KEYS: &[&str] = &[
    "model.name",
    "model.n",
    "model.m",
    "model.q",
    "model.amplitude",
    "model.axis",
    "model.half_angle",
    "model.table.radii",
    "model.table.values",
    "model.rotate_to",
    "evaluator",
    "sweep.L",
    "sweep.r",
    "sweep.sigma_k",
    "sweep.rho_max",
    "sweep.direction",
    "sweep.potential",
    "region.kind",
    "region.normal",
    "region.offset",
    "region.lo",
    "region.hi",
    "region.axis",
    "region.half_angle",
    "rules.radial",
    "rules.interval",
    "rules.polar",
    "rules.azimuthal",
    "rules.derivatives",
    "normalize",
    "output.csv",
    "output.svg",
];

fn parse_scalar<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| ConfigError::new(key, format!("cannot parse `{v}`: {e}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let out: Vec<f64> = v
        .split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| parse_scalar::<f64>(key, x))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(ConfigError::new(key, "empty list"));
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::new(key, "list entries must be finite"));
    }
    Ok(out)
}

fn parse_order(key: &str, v: &str) -> Result<usize, ConfigError> {
    let k: usize = parse_scalar(key, v)?;
    if k == 0 || k > 4096 {
        return Err(ConfigError::new(key, "rule order must be in 1..=4096"));
    }
    Ok(k)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Parse config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Apply config text over the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(line, format!("line {}: expected `key = value`", lineno + 1)))?;
            let k = k.trim();
            if seen.insert(k.to_string(), ()).is_some() {
                return Err(ConfigError::new(k, format!("line {}: duplicate key", lineno + 1)));
            }
            self.set(k, v.trim())?;
        }
        Ok(())
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let word = |e: String| ConfigError::new(key, e);
        match key {
            "model.name" => self.model = v.parse().map_err(word)?,
            "model.n" => {
                self.n = parse_scalar(key, v)?;
                if self.n < 3 {
                    return Err(ConfigError::new(key, "dimension must be at least 3"));
                }
            }
            "model.m" => self.m = parse_scalar(key, v)?,
            "model.q" => self.q = Some(parse_scalar(key, v)?),
            "model.amplitude" => self.amplitude = parse_scalar(key, v)?,
            "model.axis" => self.bump_axis = Some(parse_list(key, v)?),
            "model.half_angle" => self.bump_half_angle = parse_scalar(key, v)?,
            "model.table.radii" => self.table_radii = parse_list(key, v)?,
            "model.table.values" => self.table_values = parse_list(key, v)?,
            "model.rotate_to" => self.rotate_to = Some(parse_list(key, v)?),
            "evaluator" => self.evaluator = v.parse().map_err(word)?,
            "sweep.L" => self.l_list = parse_list(key, v)?,
            "sweep.r" => self.r_list = parse_list(key, v)?,
            "sweep.sigma_k" => {
                let k: f64 = parse_scalar(key, v)?;
                if !(k > 0.0) {
                    return Err(ConfigError::new(key, "sigma exponent must be positive"));
                }
                self.sigma_k = Some(k);
            }
            "sweep.rho_max" => {
                self.rho_max = if v == "auto" {
                    RhoMaxPolicy::Auto
                } else {
                    let r: f64 = parse_scalar(key, v)?;
                    if !(r > 0.0) {
                        return Err(ConfigError::new(key, "rho_max must be positive or `auto`"));
                    }
                    RhoMaxPolicy::Fixed(r)
                }
            }
            "sweep.direction" => self.direction = Some(parse_list(key, v)?),
            "sweep.potential" => self.potential = v.parse().map_err(word)?,
            "region.kind" => self.region = v.parse().map_err(word)?,
            "region.normal" => self.region_normal = Some(parse_list(key, v)?),
            "region.offset" => self.region_offset = parse_scalar(key, v)?,
            "region.lo" => self.region_lo = parse_scalar(key, v)?,
            "region.hi" => self.region_hi = parse_scalar(key, v)?,
            "region.axis" => self.region_axis = Some(parse_list(key, v)?),
            "region.half_angle" => self.region_half_angle = parse_scalar(key, v)?,
            "rules.radial" => self.orders.radial = parse_order(key, v)?,
            "rules.interval" => self.orders.interval = parse_order(key, v)?,
            "rules.polar" => self.orders.polar = parse_order(key, v)?,
            "rules.azimuthal" => self.orders.azimuthal = parse_order(key, v)?,
            "rules.derivatives" => {
                self.derivatives = match v {
                    "analytic" => DerivMode::Analytic,
                    "fd" => DerivMode::FiniteDifference,
                    _ => return Err(ConfigError::new(key, format!("unknown value `{v}` (expected analytic or fd)"))),
                }
            }
            "normalize" => self.normalize = parse_scalar(key, v)?,
            "output.csv" => self.csv = Some(v.to_string()),
            "output.svg" => self.svg = Some(v.to_string()),
            _ => return Err(ConfigError::new(key, "unknown key")),
        }
        Ok(())
    }

    /// `sigma(L) = e^{kL}` exponent in effect.
    pub fn sigma_exponent(&self) -> f64 {
        self.sigma_k.unwrap_or(self.n as f64 / 2.0)
    }

    /// Falloff in effect for bump and table models.
    pub fn falloff(&self) -> f64 {
        self.q.unwrap_or(self.n as f64)
    }

    /// Canonical text: every key that differs from "unset", fixed order.
    pub fn normalized(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("model.name", self.model.to_string());
        put("model.n", self.n.to_string());
        put("model.m", self.m.to_string());
        if let Some(q) = self.q {
            put("model.q", q.to_string());
        }
        put("model.amplitude", self.amplitude.to_string());
        if let Some(a) = &self.bump_axis {
            put("model.axis", fmt_list(a));
        }
        put("model.half_angle", self.bump_half_angle.to_string());
        if !self.table_radii.is_empty() {
            put("model.table.radii", fmt_list(&self.table_radii));
        }
        if !self.table_values.is_empty() {
            put("model.table.values", fmt_list(&self.table_values));
        }
        if let Some(a) = &self.rotate_to {
            put("model.rotate_to", fmt_list(a));
        }
        put("evaluator", self.evaluator.to_string());
        put("sweep.L", fmt_list(&self.l_list));
        put("sweep.r", fmt_list(&self.r_list));
        if let Some(k) = self.sigma_k {
            put("sweep.sigma_k", k.to_string());
        }
        put(
            "sweep.rho_max",
            match self.rho_max {
                RhoMaxPolicy::Auto => "auto".into(),
                RhoMaxPolicy::Fixed(r) => r.to_string(),
            },
        );
        if let Some(d) = &self.direction {
            put("sweep.direction", fmt_list(d));
        }
        put("sweep.potential", self.potential.to_string());
        put("region.kind", self.region.to_string());
        if let Some(nrm) = &self.region_normal {
            put("region.normal", fmt_list(nrm));
        }
        put("region.offset", self.region_offset.to_string());
        put("region.lo", self.region_lo.to_string());
        put("region.hi", self.region_hi.to_string());
        if let Some(a) = &self.region_axis {
            put("region.axis", fmt_list(a));
        }
        put("region.half_angle", self.region_half_angle.to_string());
        put("rules.radial", self.orders.radial.to_string());
        put("rules.interval", self.orders.interval.to_string());
        put("rules.polar", self.orders.polar.to_string());
        put("rules.azimuthal", self.orders.azimuthal.to_string());
        put(
            "rules.derivatives",
            match self.derivatives {
                DerivMode::Analytic => "analytic".into(),
                DerivMode::FiniteDifference => "fd".into(),
            },
        );
        put("normalize", self.normalize.to_string());
        if let Some(p) = &self.csv {
            put("output.csv", p.clone());
        }
        if let Some(p) = &self.svg {
            put("output.svg", p.clone());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_and_lists() {
        let cfg = ExperimentConfig::parse(
            "# reference run\nmodel.name = ads   # AdS\nmodel.m = 2\nsweep.L = 3, 4,5 ,6\nsweep.rho_max = 64\n\nrules.derivatives = fd\n",
        )
        .unwrap();
        assert_eq!(cfg.model, ModelName::Ads);
        assert_eq!(cfg.m, 2.0);
        assert_eq!(cfg.l_list, vec![3.0, 4.0, 5.0, 6.0]);
        assert_eq!(cfg.rho_max, RhoMaxPolicy::Fixed(64.0));
        assert_eq!(cfg.derivatives, DerivMode::FiniteDifference);
    }

    #[test]
    fn errors_name_the_key() {
        let e = ExperimentConfig::parse("model.colour = red").unwrap_err();
        assert_eq!(e.key, "model.colour");
        let e = ExperimentConfig::parse("sweep.L = 3, x").unwrap_err();
        assert_eq!(e.key, "sweep.L");
        let e = ExperimentConfig::parse("evaluator = cube").unwrap_err();
        assert_eq!(e.key, "evaluator");
        let e = ExperimentConfig::parse("model.n = 3\nmodel.n = 4").unwrap_err();
        assert!(e.message.contains("duplicate"));
        assert!(ExperimentConfig::parse("just words").is_err());
        assert!(ExperimentConfig::parse("sweep.rho_max = -1").is_err());
        assert!(ExperimentConfig::parse("model.n = 2").is_err());
    }

    #[test]
    fn normalized_form_lists_known_keys() {
        let text = ExperimentConfig::default().normalized();
        for line in text.lines() {
            let k = line.split(" = ").next().unwrap();
            assert!(KEYS.contains(&k), "{k}");
        }
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            prop::sample::select(ModelName::ALL.to_vec()),
            prop::sample::select(EvaluatorKind::ALL.to_vec()),
            prop::sample::select(RegionKind::ALL.to_vec()),
            3usize..6,
            -1e3f64..1e3,
            prop::collection::vec(-50.0f64..50.0, 1..6),
            prop::option::of(0.01f64..4.0),
            prop::option::of(0.5f64..1e4),
            any::<bool>(),
            1usize..200,
            prop::option::of("[a-z]{1,8}\\.csv"),
        )
            .prop_map(|(model, evaluator, region, n, m, list, k, rho, norm, ord, csv)| ExperimentConfig {
                model,
                evaluator,
                region,
                n,
                m,
                l_list: list.clone(),
                r_list: list.iter().map(|x| x.abs() + 1.0).collect(),
                sigma_k: k,
                rho_max: rho.map_or(RhoMaxPolicy::Auto, RhoMaxPolicy::Fixed),
                normalize: norm,
                orders: RuleOrders { radial: ord, ..RuleOrders::default() },
                direction: Some(list),
                potential: if norm { PotentialChoice::Coordinate(2) } else { PotentialChoice::Direction },
                csv,
                ..ExperimentConfig::default()
            })
    }

    proptest! {
        #[test]
        fn normalized_round_trip(cfg in arb_config()) {
            let text = cfg.normalized();
            let back = ExperimentConfig::parse(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.normalized(), text);
        }
    }
}
