//! Experiment configuration: a sectioned TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use fpp_core::diagnostics::{Thresholds, DEFAULT_GRID};
use fpp_core::geodesic::MarginPolicy;
use fpp_core::geometry::EmpiricalShape;
use fpp_core::ShapeModel;
use serde::{Deserialize, Serialize};

use crate::weights::WeightSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

/// One violated field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub dim: usize,
    pub dist: String,
    pub shape: String,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection { dim: 2, dist: "exp:1".into(), shape: "l2".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    /// Direction labels such as `"1:0"` or `"0.6:0.8"`.
    pub directions: Vec<String>,
    /// Nominal lengths `|x|`; endpoints are the nearest lattice points.
    pub xnorms: Vec<f64>,
    pub replicas: u64,
    pub seed: u64,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection { directions: vec!["1:0".into()], xnorms: vec![8.0, 16.0, 32.0], replicas: 100, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginSection {
    pub k: f64,
    /// Transverse scale guess; `0` means `|x|^{2/3}`.
    pub delta_guess: f64,
    pub c_long: f64,
    pub retry_cap: usize,
}

impl Default for MarginSection {
    fn default() -> Self {
        let p = MarginPolicy::default();
        MarginSection { k: p.k, delta_guess: 0.0, c_long: p.c_long, retry_cap: p.retry_cap }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Multiples of `σ̂` for the exponential-bound and concentration probes.
    pub t: Vec<f64>,
    pub eps3: Vec<f64>,
    /// Multiples of `Δ̂` for the wandering tail.
    pub k: Vec<f64>,
    /// Multiples of `|x|^{1/2}` for the backtrack tail.
    pub r: Vec<f64>,
    /// Absolute thresholds for the slab-minus-free tail.
    pub slab: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = DEFAULT_GRID.to_vec();
        GridSection { t: g.clone(), eps3: g.clone(), k: g.clone(), r: g.clone(), slab: g }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    /// Cylinder radius as a multiple of `Δ̂` for the disc-to-disc probe.
    pub eps: f64,
    pub pilot_replicas: u64,
    /// `doubling` or `shape` (the configured shape evaluated at `x`).
    pub gref: String,
    pub gref_band: f64,
    pub min_exceedances: usize,
    pub min_r2: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let t = Thresholds::default();
        ProbeSection {
            eps: 0.5,
            pilot_replicas: 50,
            gref: "doubling".into(),
            gref_band: 0.0,
            min_exceedances: t.min_exceedances,
            min_r2: t.min_r2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Worker threads; `0` lets the pool decide.
    pub threads: usize,
    pub out: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeSection,
    pub sample: SampleSection,
    pub margin: MarginSection,
    pub grids: GridSection,
    pub probes: ProbeSection,
    pub run: RunSection,
}

/// Validated configuration with parsed specs.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub dist: WeightSpec,
    pub shape: ShapeModel,
    /// Unit direction vectors, parallel to `config.sample.directions`.
    pub directions: Vec<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds { min_exceedances: self.probes.min_exceedances, min_r2: self.probes.min_r2, ..Thresholds::default() }
    }

    pub fn margin_policy(&self) -> MarginPolicy {
        MarginPolicy {
            k: self.margin.k,
            delta_guess: self.margin.delta_guess,
            c_long: self.margin.c_long,
            retry_cap: self.margin.retry_cap,
        }
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<Resolved, ConfigError> {
        let mut bad = Vec::new();
        let mut fail = |field: &'static str, message: String| bad.push(Violation { field, message });
        let dim = self.lattice.dim;
        if !(1..=8).contains(&dim) {
            fail("lattice.dim", format!("must be in 1..=8, got {dim}"));
        }
        let dist = self.lattice.dist.parse::<WeightSpec>();
        if let Err(e) = &dist {
            fail("lattice.dist", e.clone());
        }
        let shape = parse_shape(&self.lattice.shape);
        match &shape {
            Err(e) => fail("lattice.shape", e.clone()),
            Ok(s) => {
                if let Err(e) = s.check_dim(dim) {
                    fail("lattice.shape", e.to_string());
                }
            }
        }
        let mut directions = Vec::new();
        if self.sample.directions.is_empty() {
            fail("sample.directions", "must list at least one direction".into());
        }
        for d in &self.sample.directions {
            match parse_direction(d, dim) {
                Ok(v) => directions.push(v),
                Err(e) => fail("sample.directions", e),
            }
        }
        let xs = &self.sample.xnorms;
        if xs.is_empty() {
            fail("sample.xnorms", "must list at least one length".into());
        }
        if xs.iter().any(|x| !(*x >= 1.0 && x.is_finite())) {
            fail("sample.xnorms", "lengths must be finite and at least 1".into());
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            fail("sample.xnorms", "lengths must be strictly increasing".into());
        }
        if self.sample.replicas < 1 {
            fail("sample.replicas", "must be at least 1".into());
        }
        let m = &self.margin;
        if !(m.k >= 0.0 && m.k.is_finite()) {
            fail("margin.k", "must be finite and nonnegative".into());
        }
        if !(m.delta_guess >= 0.0 && m.delta_guess.is_finite()) {
            fail("margin.delta_guess", "must be finite and nonnegative".into());
        }
        if !(m.c_long >= 0.0 && m.c_long.is_finite()) {
            fail("margin.c_long", "must be finite and nonnegative".into());
        }
        for (name, g) in [
            ("grids.t", &self.grids.t),
            ("grids.eps3", &self.grids.eps3),
            ("grids.k", &self.grids.k),
            ("grids.r", &self.grids.r),
            ("grids.slab", &self.grids.slab),
        ] {
            if g.is_empty() || g.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                fail(name, "must be a nonempty list of finite nonnegative values".into());
            }
        }
        if !(self.probes.eps > 0.0 && self.probes.eps.is_finite()) {
            fail("probes.eps", "must be positive".into());
        }
        if self.probes.pilot_replicas < 2 {
            fail("probes.pilot_replicas", "must be at least 2".into());
        }
        if self.probes.gref != "doubling" && self.probes.gref != "shape" {
            fail("probes.gref", format!("expected `doubling` or `shape`, got `{}`", self.probes.gref));
        }
        if !(self.probes.min_r2 >= 0.0 && self.probes.min_r2 <= 1.0) {
            fail("probes.min_r2", "must lie in [0, 1]".into());
        }
        if !bad.is_empty() {
            return Err(ConfigError::Invalid(bad));
        }
        Ok(Resolved { config: self.clone(), dist: dist.unwrap(), shape: shape.unwrap(), directions })
    }
}

/// `l1`, `l2`, `wl1:...` or `empirical:FILE` (CSV of angle, radius).
pub fn parse_shape(spec: &str) -> Result<ShapeModel, String> {
    if let Some(path) = spec.strip_prefix("empirical:") {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
        let e = EmpiricalShape::from_csv(&text).map_err(|e| e.to_string())?;
        return Ok(ShapeModel::Empirical(e));
    }
    spec.parse::<ShapeModel>().map_err(|e| e.to_string())
}

/// Parses `a:b:...` into a unit vector of length `dim`.
pub fn parse_direction(label: &str, dim: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = label
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("`{label}` is not a colon-separated list of numbers"))?;
    if v.len() != dim {
        return Err(format!("`{label}` has {} components, expected {dim}", v.len()));
    }
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(format!("`{label}` is not a nonzero finite direction"));
    }
    Ok(v.into_iter().map(|c| c / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let r = ExperimentConfig::default().validate().unwrap();
        assert_eq!(r.directions, vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = r#"
            [lattice]
            dim = 2
            dist = "exp:-1"
            [sample]
            xnorms = [16.0, 8.0]
            replicas = 0
            directions = ["1:0:0"]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let Err(ConfigError::Invalid(v)) = cfg.validate() else { panic!("expected violations") };
        let fields: Vec<&str> = v.iter().map(|x| x.field).collect();
        assert_eq!(fields, ["lattice.dist", "sample.directions", "sample.xnorms", "sample.replicas"]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[lattice]\ndimension = 3\n").is_err());
    }

    #[test]
    fn roundtrip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
