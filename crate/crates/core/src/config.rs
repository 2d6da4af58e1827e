//! JSON run configuration: map and potential descriptors, tower, scheme and
//! thermodynamic parameters, seeding and output paths.

use crate::error::Error;
use crate::map_model::{FamilyTag, IntervalMap, Potential};
use crate::numerics::Iv;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Map descriptor: either a named family or explicit branches, e.g.
/// `{"family":"quadratic","lambda":3.9}` or
/// `{"branches":[{"interval":[0,0.5],"poly":[0,2]}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Family(FamilySpec),
    Branches { branches: Vec<BranchSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    Tent {
        #[serde(default = "default_slope")]
        slope: f64,
    },
    Quadratic { lambda: f64 },
}

fn default_slope() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSpec {
    pub interval: [f64; 2],
    pub poly: Vec<f64>,
}

impl MapSpec {
    pub fn build(&self) -> Result<IntervalMap> {
        match self {
            MapSpec::Family(FamilySpec::Tent { slope }) => Ok(IntervalMap::tent(*slope)),
            MapSpec::Family(FamilySpec::Quadratic { lambda }) => {
                Ok(IntervalMap::quadratic(*lambda))
            }
            MapSpec::Branches { branches } => {
                let pieces = branches
                    .iter()
                    .map(|b| (Iv::new(b.interval[0], b.interval[1]), b.poly.clone()))
                    .collect();
                IntervalMap::from_branches(pieces, FamilyTag::PiecewiseLinear)
            }
        }
    }
}

/// Potential descriptor, e.g. `{"kind":"constant","a":-0.693}`,
/// `{"kind":"bernoulli","p":0.3}`, `{"kind":"geometric","t":1.0}`,
/// `{"kind":"table","xs":[...],"values":[...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Constant { a: f64 },
    Geometric { t: f64 },
    Bernoulli { p: f64 },
    BranchConstants { values: Vec<f64> },
    Table { xs: Vec<f64>, values: Vec<f64> },
}

impl PotentialSpec {
    pub fn build(&self) -> Potential {
        match self {
            PotentialSpec::Constant { a } => Potential::constant(*a),
            PotentialSpec::Geometric { t } => Potential::geometric(*t),
            PotentialSpec::Bernoulli { p } => Potential::bernoulli(*p),
            PotentialSpec::BranchConstants { values } => {
                Potential::branch_constants(values.clone())
            }
            PotentialSpec::Table { xs, values } => Potential::table(xs.clone(), values.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerParams {
    #[serde(default = "default_level_cap")]
    pub level_cap: usize,
    #[serde(default = "default_min_width")]
    pub min_width: f64,
    #[serde(default = "default_dedup_tol")]
    pub dedup_tol: f64,
}

fn default_level_cap() -> usize {
    12
}
fn default_min_width() -> f64 {
    1e-12
}
fn default_dedup_tol() -> f64 {
    1e-9
}

impl Default for TowerParams {
    fn default() -> Self {
        TowerParams {
            level_cap: default_level_cap(),
            min_width: default_min_width(),
            dedup_tol: default_dedup_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeParams {
    #[serde(default = "default_scheme_type")]
    pub scheme_type: String,
    /// `"full_base"` or `"DEPTH:INDEX"` naming a cylinder.
    #[serde(default = "default_base")]
    pub base: String,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_tau_cap")]
    pub tau_cap: usize,
}

fn default_scheme_type() -> String {
    "A".into()
}
fn default_base() -> String {
    "full_base".into()
}
fn default_delta() -> f64 {
    0.2
}
fn default_tau_cap() -> usize {
    20
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            scheme_type: default_scheme_type(),
            base: default_base(),
            delta: default_delta(),
            tau_cap: default_tau_cap(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermoParams {
    #[serde(default = "default_word_depth")]
    pub word_depth: usize,
    #[serde(default = "default_branch_cap")]
    pub branch_cap: usize,
    #[serde(default = "default_pressure_depth")]
    pub pressure_depth: usize,
    #[serde(default = "default_t_tol")]
    pub t_tol: f64,
    #[serde(default = "default_p_tol")]
    pub p_tol: f64,
    #[serde(default)]
    pub q_grid: QGrid,
}

fn default_word_depth() -> usize {
    6
}
fn default_branch_cap() -> usize {
    64
}
fn default_pressure_depth() -> usize {
    12
}
fn default_t_tol() -> f64 {
    1e-9
}
fn default_p_tol() -> f64 {
    1e-10
}

impl Default for ThermoParams {
    fn default() -> Self {
        ThermoParams {
            word_depth: default_word_depth(),
            branch_cap: default_branch_cap(),
            pressure_depth: default_pressure_depth(),
            t_tol: default_t_tol(),
            p_tol: default_p_tol(),
            q_grid: QGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QGrid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Default for QGrid {
    fn default() -> Self {
        QGrid { min: -2.0, max: 2.0, steps: 41 }
    }
}

impl QGrid {
    pub fn build(&self) -> Result<Vec<f64>> {
        if self.steps < 1 || self.max < self.min {
            return Err(Error::Config(format!(
                "bad q grid: [{}, {}] with {} steps",
                self.min, self.max, self.steps
            )));
        }
        if self.steps == 1 {
            return Ok(vec![self.min]);
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        Ok((0..self.steps).map(|k| self.min + h * k as f64).collect())
    }
}

/// Whole-run configuration consumed by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub map: MapSpec,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub tower: TowerParams,
    #[serde(default)]
    pub scheme: SchemeParams,
    #[serde(default)]
    pub thermo: ThermoParams,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_seed() -> u64 {
    7
}
fn default_jobs() -> usize {
    1
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tower.min_width <= 0.0 || self.tower.dedup_tol <= 0.0 {
            return Err(Error::Config("tower tolerances must be positive".into()));
        }
        if self.thermo.t_tol <= 0.0 || self.thermo.p_tol <= 0.0 {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.scheme.delta <= 0.0 {
            return Err(Error::Config("scheme delta must be positive".into()));
        }
        self.thermo.q_grid.build().map(|_| ())
    }

    /// Parse the scheme base field: `full_base` or `DEPTH:INDEX`.
    pub fn base_cylinder(&self) -> Result<Option<(usize, usize)>> {
        if self.scheme.base == "full_base" {
            return Ok(None);
        }
        let parts: Vec<&str> = self.scheme.base.split(':').collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!(
                "scheme base must be 'full_base' or 'DEPTH:INDEX', got {}",
                self.scheme.base
            )));
        }
        let depth = parts[0]
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("bad base depth: {e}")))?;
        let index = parts[1]
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("bad base index: {e}")))?;
        Ok(Some((depth, index)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_family_and_branches() {
        let cfg = RunConfig::from_json(r#"{"map":{"family":"quadratic","lambda":3.9}}"#).unwrap();
        let map = cfg.map.build().unwrap();
        assert!((map.eval(0.5).unwrap() - 0.975).abs() < 1e-15);

        let cfg = RunConfig::from_json(
            r#"{"map":{"branches":[
                {"interval":[0,0.5],"poly":[0,2]},
                {"interval":[0.5,1],"poly":[2,-2]}
            ]}}"#,
        )
        .unwrap();
        let map = cfg.map.build().unwrap();
        assert!((map.eval(0.75).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parse_potentials() {
        let p: PotentialSpec = serde_json::from_str(r#"{"kind":"constant","a":-0.693}"#).unwrap();
        let tent = IntervalMap::tent(2.0);
        assert!((p.build().eval(&tent, 0.3) + 0.693).abs() < 1e-12);
        let p: PotentialSpec = serde_json::from_str(r#"{"kind":"bernoulli","p":0.3}"#).unwrap();
        assert!((p.build().eval(&tent, 0.2) - 0.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn q_grid_and_base_parse() {
        let g = QGrid { min: -2.0, max: 2.0, steps: 41 }.build().unwrap();
        assert_eq!(g.len(), 41);
        assert!((g[40] - 2.0).abs() < 1e-12);

        let mut cfg =
            RunConfig::from_json(r#"{"map":{"family":"tent","slope":2.0}}"#).unwrap();
        assert_eq!(cfg.base_cylinder().unwrap(), None);
        cfg.scheme.base = "1:0".into();
        assert_eq!(cfg.base_cylinder().unwrap(), Some((1, 0)));
        cfg.scheme.base = "junk".into();
        assert!(cfg.base_cylinder().is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = RunConfig::from_json(r#"{"map":{"family":"tent"},"thermo":{"t_tol":-1}}"#);
        assert!(bad.is_err());
        let bad = RunConfig::from_json(
            r#"{"map":{"family":"tent"},"thermo":{"q_grid":{"min":2,"max":-2,"steps":5}}}"#,
        );
        assert!(bad.is_err());
    }
}
