//! Run configuration: JSON file, fully defaulted, unknown keys rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use fsstokes::data::{GaussianSurface, InitialData, StreamVortex};
use fsstokes::decaylab::{DataSource, ExponentSpec, Observable, Theorem};
use fsstokes::semigroup::{DataPart, Derivative, Grid, Lattice, Operator, Part};
use fsstokes::symbols::PhysicalParams;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ParamsConfig,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub calibration: CalibrationOverrides,
    pub times: Vec<f64>,
    pub data: DataConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `null` uses every core.
    pub workers: Option<usize>,
    pub roots: RootsConfig,
    pub resolvent: ResolventConfig,
    pub evolve: EvolveConfig,
    pub decay_fit: DecayFitConfig,
    pub verify: VerifyOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ParamsConfig::default(),
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            calibration: CalibrationOverrides::default(),
            times: vec![1.0, 2.0, 5.0, 10.0],
            data: DataConfig::default(),
            seed: fsstokes::verify::DEFAULT_SEED,
            output_dir: PathBuf::from("fsstokes-out"),
            workers: None,
            roots: RootsConfig::default(),
            resolvent: ResolventConfig::default(),
            evolve: EvolveConfig::default(),
            decay_fit: DecayFitConfig::default(),
            verify: VerifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub gravity: f64,
    pub surface_tension: f64,
    pub dim: usize,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { gravity: 1.0, surface_tension: 1.0, dim: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Half width `K` of the periodic box `[-K, K)^{N-1}`.
    pub box_half_width: f64,
    /// Lattice points per tangential axis; a power of two.
    pub lattice_size: usize,
    pub xn_max: f64,
    pub xn_panels: usize,
    pub xn_order: usize,
    /// Gauss panels across the `x_N` support of the velocity data.
    pub y_panels: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { box_half_width: 200.0, lattice_size: 256, xn_max: 16.0, xn_panels: 4, xn_order: 8, y_panels: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub quadrature: f64,
    /// Allowed relative disagreement of the two boundary-trace forms.
    pub trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { quadrature: 1e-8, trace: 1e-9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationOverrides {
    pub a0: Option<f64>,
    pub gamma0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub amp: f64,
    pub width: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { amp: 1.0, width: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VortexConfig {
    pub amp: f64,
    pub width: f64,
    pub center: f64,
    pub radius: f64,
}

impl Default for VortexConfig {
    fn default() -> Self {
        Self { amp: 1.0, width: 1.0, center: 2.0, radius: 1.0 }
    }
}

/// `null` for either part drops it from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub surface: Option<SurfaceConfig>,
    pub vortex: Option<VortexConfig>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { surface: Some(SurfaceConfig::default()), vortex: Some(VortexConfig::default()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootsConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub points: usize,
}

impl Default for RootsConfig {
    fn default() -> Self {
        Self { a_min: 1e-4, a_max: 1e4, points: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventConfig {
    pub xi: Vec<f64>,
    /// `[Re λ, Im λ]`.
    pub lambda: [f64; 2],
    pub x_nodes: Vec<f64>,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self { xi: vec![1.0], lambda: [0.0, 1.0], x_nodes: vec![0.0, 0.5, 1.0, 2.0, 4.0] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DerivativeConfig {
    pub k: u8,
    pub alpha: Vec<u32>,
    pub ell: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub operator: Operator,
    pub part: Part,
    pub data_part: DataPart,
    pub derivative: DerivativeConfig,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { operator: Operator::T, part: Part::Total, data_part: DataPart::Both, derivative: DerivativeConfig::default() }
    }
}

/// Exponent `q`: a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QExponent(pub f64);

impl fmt::Display for QExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for QExponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for QExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Self(x)),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(Self(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("q must be a number or \"inf\", got \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayFitConfig {
    pub theorem: Theorem,
    pub observable: Observable,
    pub data: DataSource,
    pub q: QExponent,
    pub r: f64,
    pub k: u8,
    pub ell: u8,
    pub alpha: u32,
    /// Measurement times; `null` uses the top-level `times`.
    pub times: Option<Vec<f64>>,
    /// Lattice overrides for long times; `null` uses `grid`.
    pub lattice_size: Option<usize>,
    pub box_half_width: Option<f64>,
    /// `x_N` nodes for `q = inf`; `null` uses the Gauss rule of `grid`.
    pub x_nodes: Option<Vec<f64>>,
    /// Fit window; `null` spans all times.
    pub window: Option<[f64; 2]>,
    /// Slack added to the algebraic bound.
    pub tolerance: f64,
}

impl Default for DecayFitConfig {
    fn default() -> Self {
        Self {
            theorem: Theorem::Main,
            observable: Observable::Velocity,
            data: DataSource::D,
            q: QExponent(f64::INFINITY),
            r: 1.0,
            k: 0,
            ell: 0,
            alpha: 0,
            times: Some((0..12).map(|i| 100.0 * 10f64.powf(i as f64 / 11.0)).collect()),
            lattice_size: Some(32_768),
            box_half_width: Some(PI * 1e4),
            x_nodes: Some(vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0]),
            window: None,
            tolerance: 0.15,
        }
    }
}

impl DecayFitConfig {
    pub fn spec(&self) -> ExponentSpec {
        ExponentSpec {
            theorem: self.theorem,
            observable: self.observable,
            data: self.data,
            q: self.q.0,
            r: self.r,
            k: self.k,
            ell: self.ell,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub sample_scale: f64,
    /// Check ids or names; empty runs all fourteen.
    pub checks: Vec<String>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { sample_scale: 1.0, checks: vec![] }
    }
}

/// Invalid or unreadable configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(field: &str, msg: &str) -> Result<T, ConfigError> {
    Err(ConfigError(format!("{field}: {msg}")))
}

/// Names quoted in backticks in a serde message: the offender first, then the candidates.
fn quoted(msg: &str) -> Vec<&str> {
    msg.split('`').skip(1).step_by(2).collect()
}

/// Add a spelling suggestion to unknown-key and unknown-variant errors.
fn explain(msg: String) -> String {
    let kind = if msg.starts_with("unknown field") {
        "key"
    } else if msg.starts_with("unknown variant") {
        "value"
    } else {
        return msg;
    };
    let names = quoted(&msg);
    let Some((bad, known)) = names.split_first() else {
        return msg;
    };
    let best = known
        .iter()
        .map(|k| (strsim::jaro_winkler(bad, k), *k))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((score, k)) if score >= 0.7 => format!("unknown {kind} `{bad}`; did you mean `{k}`? ({msg})"),
        _ => format!("unknown {kind} `{bad}`; expected one of {} ({msg})", known.join(", ")),
    }
}

/// Parse JSON text; an empty document gives the defaults.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError(explain(e.to_string())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        if !(p.gravity > 0.0 && p.gravity.is_finite()) {
            return bad("params.gravity", "gravity must be positive");
        }
        if !(p.surface_tension > 0.0 && p.surface_tension.is_finite()) {
            return bad("params.surface_tension", "surface tension must be positive");
        }
        if !(2..=3).contains(&p.dim) {
            return bad("params.dim", "dimension must be 2 or 3");
        }
        let g = &self.grid;
        if !(g.box_half_width > 0.0 && g.box_half_width.is_finite()) {
            return bad("grid.box_half_width", "box half width must be positive");
        }
        if g.lattice_size < 4 || !g.lattice_size.is_power_of_two() {
            return bad("grid.lattice_size", "lattice size must be a power of two, at least 4");
        }
        if !(g.xn_max > 0.0) || g.xn_panels == 0 || g.xn_order == 0 || g.y_panels == 0 {
            return bad("grid", "x_N rule needs a positive extent, panels and order");
        }
        let t = &self.tolerances;
        if !(t.quadrature > 0.0 && t.quadrature < 1.0) {
            return bad("tolerances.quadrature", "tolerance must lie in (0, 1)");
        }
        if !(t.trace > 0.0) {
            return bad("tolerances.trace", "tolerance must be positive");
        }
        if let Some(a0) = self.calibration.a0 {
            if !(a0 > 0.0 && a0 < 1.0) {
                return bad("calibration.a0", "A0 must lie in (0, 1)");
            }
        }
        if let Some(g0) = self.calibration.gamma0 {
            if !(g0 >= 1.0) {
                return bad("calibration.gamma0", "gamma0 must be at least 1");
            }
        }
        check_times("times", &self.times)?;
        if let Some(ts) = &self.decay_fit.times {
            check_times("decay_fit.times", ts)?;
        }
        if let Some(s) = &self.data.surface {
            if !(s.width > 0.0 && s.amp.is_finite()) {
                return bad("data.surface", "surface bump needs a positive width");
            }
        }
        if let Some(v) = &self.data.vortex {
            if !(v.width > 0.0 && v.radius > 0.0 && v.center >= v.radius && v.amp.is_finite()) {
                return bad("data.vortex", "vortex needs positive widths and support inside x_N > 0");
            }
        }
        let r = &self.roots;
        if !(r.a_min > 0.0 && r.a_max > r.a_min) || r.points < 2 {
            return bad("roots", "need 0 < a_min < a_max and at least two points");
        }
        if self.resolvent.xi.len() != p.dim - 1 {
            return bad("resolvent.xi", "xi must have N - 1 entries");
        }
        if self.resolvent.x_nodes.iter().any(|x| !(*x >= 0.0)) {
            return bad("resolvent.x_nodes", "x_N nodes must be nonnegative");
        }
        if self.workers == Some(0) {
            return bad("workers", "worker count must be positive");
        }
        if !(self.verify.sample_scale > 0.0 && self.verify.sample_scale <= 100.0) {
            return bad("verify.sample_scale", "sample scale must lie in (0, 100]");
        }
        let d = &self.decay_fit;
        if d.lattice_size.is_some_and(|n| n < 4 || !n.is_power_of_two()) {
            return bad("decay_fit.lattice_size", "lattice size must be a power of two, at least 4");
        }
        if d.box_half_width.is_some_and(|k| !(k > 0.0 && k.is_finite())) {
            return bad("decay_fit.box_half_width", "box half width must be positive");
        }
        if d.x_nodes.as_ref().is_some_and(|x| x.is_empty() || x.iter().any(|v| !(*v >= 0.0))) {
            return bad("decay_fit.x_nodes", "x_N nodes must be a nonempty list of nonnegative numbers");
        }
        if !(self.decay_fit.tolerance >= 0.0) {
            return bad("decay_fit.tolerance", "tolerance must be nonnegative");
        }
        Ok(())
    }

    pub fn physical_params(&self) -> PhysicalParams {
        PhysicalParams { gravity: self.params.gravity, surface_tension: self.params.surface_tension, dim: self.params.dim }
    }

    pub fn initial_data(&self) -> InitialData {
        InitialData {
            dim: self.params.dim,
            surface: self.data.surface.as_ref().map(|s| GaussianSurface { amp: s.amp, width: s.width }),
            vortex: self
                .data
                .vortex
                .as_ref()
                .map(|v| StreamVortex { amp: v.amp, width: v.width, center: v.center, radius: v.radius }),
            y_panels: self.grid.y_panels,
        }
    }

    /// `ξ'` spacing `π / K` for the box `[-K, K)`.
    pub fn lattice(&self) -> fsstokes::Result<Lattice> {
        Lattice::new(self.params.dim, self.grid.lattice_size, PI / self.grid.box_half_width)
    }

    /// `x_N` rule; only the boundary node for the height.
    pub fn grid_for(&self, operator: Operator) -> fsstokes::Result<Grid> {
        let lat = self.lattice()?;
        if operator == Operator::T {
            return Ok(Grid::boundary(lat));
        }
        Grid::with_gauss(lat, self.grid.xn_max, self.grid.xn_panels, self.grid.xn_order)
    }

    /// Grid for `decay-fit`: lattice overrides, and bare nodes for the sup norm.
    pub fn decay_grid(&self, operator: Operator) -> fsstokes::Result<Grid> {
        let d = &self.decay_fit;
        let n = d.lattice_size.unwrap_or(self.grid.lattice_size);
        let k = d.box_half_width.unwrap_or(self.grid.box_half_width);
        let lat = Lattice::new(self.params.dim, n, PI / k)?;
        if operator == Operator::T {
            return Ok(Grid::boundary(lat));
        }
        match &d.x_nodes {
            Some(x) if d.q.0.is_infinite() => Ok(Grid { lattice: lat, x_nodes: x.clone(), x_weights: vec![0.0; x.len()] }),
            _ => Grid::with_gauss(lat, self.grid.xn_max, self.grid.xn_panels, self.grid.xn_order),
        }
    }

    pub fn evolve_derivative(&self) -> Derivative {
        let d = &self.evolve.derivative;
        Derivative { k: d.k, alpha: d.alpha.clone(), ell: d.ell }
    }
}

fn check_times(field: &str, ts: &[f64]) -> Result<(), ConfigError> {
    if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return bad(field, "times must be a nonempty list of positive numbers");
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return bad(field, "times must be strictly increasing");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse_config_str("  \n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.params.gravity, c.params.surface_tension, c.params.dim), (1.0, 1.0, 2));
        assert_eq!(c.tolerances.quadrature, 1e-8);
    }

    #[test]
    fn negative_gravity_is_named() {
        let e = parse_config_str(r#"{"params": {"gravity": -1}}"#).unwrap_err();
        assert!(e.0.contains("gravity must be positive"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_hint() {
        let e = parse_config_str(r#"{"vicsosity": 1}"#).unwrap_err();
        assert!(e.0.contains("unknown key `vicsosity`"), "{e}");
        let e = parse_config_str(r#"{"params": {"gravty": 2}}"#).unwrap_err();
        assert!(e.0.contains("did you mean `gravity`"), "{e}");
        let e = parse_config_str(r#"{"evolve": {"operator": "Tt"}}"#).unwrap_err();
        assert!(e.0.contains("did you mean `T`"), "{e}");
    }

    #[test]
    fn q_accepts_inf() {
        let c = parse_config_str(r#"{"decay_fit": {"q": "inf", "r": 1}}"#).unwrap();
        assert!(c.decay_fit.q.0.is_infinite());
        let c = parse_config_str(r#"{"decay_fit": {"q": 4}}"#).unwrap();
        assert_eq!(c.decay_fit.q.0, 4.0);
        assert!(parse_config_str(r#"{"decay_fit": {"q": "big"}}"#).is_err());
        assert_eq!(serde_json::to_string(&QExponent(f64::INFINITY)).unwrap(), "\"inf\"");
    }

    #[test]
    fn lattice_size_must_be_a_power_of_two() {
        let e = parse_config_str(r#"{"grid": {"lattice_size": 100}}"#).unwrap_err();
        assert!(e.0.contains("power of two"));
    }

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), c);
    }
}
