//! Run configuration: a JSON document, overridable from the command line.
//!
//! Every numeric field accepts either a JSON number or a decimal string.
//!
//! ```json
//! {
//!   "family": { "id": "normal_mean", "params": { "n": 4, "alpha": "1" } },
//!   "components": { "kind": "spike" },
//!   "mode": { "mode": "discrete" },
//!   "factor": null,
//!   "theta_grid": { "kind": "linspace", "lo": -10, "hi": 10, "points": 201 },
//!   "plan": { "method": "quadrature", "abs_tol": 1e-10, "tail_tol": 1e-10, "max_cells": 2000 },
//!   "seed": 7,
//!   "lambdas": [1, 20, 100],
//!   "output": { "path": "report.json", "format": "json" }
//! }
//! ```

use std::path::PathBuf;

use evapprox::verifier::interpolated_theta_grid;
use evapprox::{default_theta_grid, ComponentSpec, ExpectationPlan, FamilyBundle, FamilyConfig, Mode};
use serde::{Deserialize, Serialize};

/// A number that may be written as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Num(#[serde(deserialize_with = "evapprox::numstr::f64")] pub f64);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub id: String,
    #[serde(default)]
    pub params: FamilyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpTag {
    BumpSpikes,
}

/// Which e-variable sits at each net point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Components {
    Uniform(ComponentSpec),
    /// Spikes on the bump cells, for interpolated mode.
    Bump(BumpTag),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaGrid {
    /// The family's adversarial grid.
    Default,
    List {
        values: Vec<Num>,
    },
    Linspace {
        lo: Num,
        hi: Num,
        #[serde(deserialize_with = "evapprox::numstr::u64")]
        points: u64,
    },
    Geomspace {
        lo: Num,
        hi: Num,
        #[serde(deserialize_with = "evapprox::numstr::u64")]
        points: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: Option<FamilySection>,
    pub components: Option<Components>,
    pub mode: Option<Mode>,
    /// Overrides the bundle's factor `C`.
    pub factor: Option<Num>,
    pub theta_grid: Option<ThetaGrid>,
    pub plan: Option<ExpectationPlan>,
    #[serde(deserialize_with = "evapprox::numstr::opt_u64")]
    pub seed: Option<u64>,
    /// Poisson rates for the MLE counterexample.
    pub lambdas: Option<Vec<Num>>,
    pub output: OutputSection,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] evapprox::Error),
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl ThetaGrid {
    pub fn resolve(&self, bundle: &FamilyBundle, mode: Mode) -> Result<Vec<f64>, ConfigError> {
        let grid = match self {
            ThetaGrid::Default => match mode {
                Mode::Discrete => default_theta_grid(bundle),
                Mode::Interpolated { epsilon } => interpolated_theta_grid(&bundle.family, epsilon),
            },
            ThetaGrid::List { values } => values.iter().map(|v| v.0).collect(),
            ThetaGrid::Linspace { lo, hi, points } => linspace(lo.0, hi.0, *points as usize),
            ThetaGrid::Geomspace { lo, hi, points } => {
                if !(lo.0 > 0.0 && hi.0 > 0.0) {
                    return Err(ConfigError::Invalid("geomspace bounds must be positive".into()));
                }
                let mut v: Vec<f64> = linspace(lo.0.ln(), hi.0.ln(), *points as usize).into_iter().map(f64::exp).collect();
                if let Some(first) = v.first_mut() {
                    *first = lo.0;
                }
                if v.len() > 1 {
                    *v.last_mut().unwrap() = hi.0;
                }
                v
            }
        };
        if grid.is_empty() {
            return Err(ConfigError::Invalid("theta grid is empty".into()));
        }
        for &t in &grid {
            bundle.family.check_param(t)?;
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_document_parses() {
        let doc = r#"{
            "family": { "id": "normal_mean", "params": { "n": "4", "alpha": "1.0" } },
            "components": { "kind": "calibrated_p", "kappa": "0.5" },
            "mode": { "mode": "interpolated", "epsilon": 0.1 },
            "factor": "40",
            "theta_grid": { "kind": "linspace", "lo": "-2", "hi": 2, "points": 5 },
            "plan": { "method": "monte_carlo", "samples": 1000, "seed": 3 },
            "seed": "7",
            "lambdas": [1, "20"],
            "output": { "path": "r.csv", "format": "csv" }
        }"#;
        let c: RunConfig = serde_json::from_str(doc).unwrap();
        assert_eq!(c.family.as_ref().unwrap().params.n, Some(4));
        assert_eq!(c.components, Some(Components::Uniform(ComponentSpec::CalibratedP { kappa: 0.5 })));
        assert_eq!(c.factor, Some(Num(40.0)));
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.lambdas, Some(vec![Num(1.0), Num(20.0)]));
        assert_eq!(c.output.format, Format::Csv);
    }

    #[test]
    fn bump_spikes_and_spikes_are_distinguished() {
        let b: Components = serde_json::from_str(r#"{"kind":"bump_spikes"}"#).unwrap();
        assert_eq!(b, Components::Bump(BumpTag::BumpSpikes));
        let s: Components = serde_json::from_str(r#"{"kind":"spike"}"#).unwrap();
        assert_eq!(s, Components::Uniform(ComponentSpec::Spike));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"familly": {"id": "poisson"}}"#).is_err());
    }

    #[test]
    fn grids_resolve() {
        let b = evapprox::make_bundle(evapprox::FamilyId::Poisson, &FamilyConfig::default()).unwrap();
        let g = ThetaGrid::Geomspace { lo: Num(0.1), hi: Num(1000.0), points: 5 }.resolve(&b, Mode::Discrete).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!((g[0], g[4]), (0.1, 1000.0));
        assert!((g[2] - 10.0).abs() < 1e-12);
        let bad = ThetaGrid::List { values: vec![Num(-1.0)] }.resolve(&b, Mode::Discrete);
        assert!(bad.is_err());
    }
}
