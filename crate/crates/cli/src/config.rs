//! Run configuration: JSON file, environment and flags, merged in that order.

use std::path::Path;

use hypervis_core::experiments::Model;
use hypervis_core::sampler::RadiusLaw;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Top-level config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand the file was written for; must match the invoked one.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Boolean,
    Lines,
}

/// Model block. Exactly one of `lambda` and `alpha` must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, rename = "type")]
    pub kind: Option<ModelKind>,
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Target vacancy decay rate; `2λ` for lines.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Radius law; `{"constant": 1.0}` or `{"discrete": [[0.5, 0.25], [1.5, 0.75]]}`.
    #[serde(default)]
    pub law: Option<RadiusLaw>,
    /// Shorthand for a constant law.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Experiment block; each subcommand reads the keys it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub r_grid: Option<RGrid>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub fit_range: Option<(f64, f64)>,
    /// Relative tolerance on fitted slopes.
    #[serde(default)]
    pub slope_tolerance: Option<f64>,
    /// Bound on max/min of `r·p̂` at criticality.
    #[serde(default)]
    pub inverse_r_bound: Option<f64>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub n_grid: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub r_cap: Option<f64>,
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<f64>,
    /// Allowed `|P̂ − p|` at the smallest radius.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<String>,
}

/// Probe lengths, given as a list or as `"a:b:step"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RGrid {
    List(Vec<f64>),
    Range(String),
}

impl RGrid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            RGrid::List(v) => Ok(v.clone()),
            RGrid::Range(s) => parse_range(s),
        }
    }
}

/// `a:b:step`, inclusive of `b` up to rounding.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::config(format!("r grid `{s}` is not of the form a:b:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

/// Comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("`{p}` is not a number")))
        })
        .collect()
}

/// `(a, b)` from `a:b`.
pub fn parse_pair(s: &str) -> Result<(f64, f64), CliError> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::config(format!("`{s}` is not of the form a:b")))?;
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(CliError::config(format!("`{s}` is not of the form a:b"))),
    }
}

/// Radius law from JSON or from `value:weight,value:weight`.
pub fn parse_law(s: &str) -> Result<RadiusLaw, CliError> {
    let law = if s.trim_start().starts_with('{') {
        serde_json::from_str(s).map_err(|e| CliError::config(format!("bad law `{s}`: {e}")))?
    } else {
        let atoms = s.split(',').map(parse_pair).collect::<Result<Vec<_>, _>>()?;
        RadiusLaw::Discrete(atoms)
    };
    law.validate().map_err(CliError::from)?;
    Ok(law)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }
}

impl ModelSpec {
    /// Overlay `other` on `self`; an intensity in `other` replaces both of ours.
    pub fn overlay(&mut self, other: ModelSpec) -> Result<(), CliError> {
        if other.lambda.is_some() && other.alpha.is_some() {
            return Err(both_intensities());
        }
        if other.lambda.is_some() || other.alpha.is_some() {
            self.lambda = other.lambda;
            self.alpha = other.alpha;
        }
        if other.law.is_some() || other.radius.is_some() {
            self.law = other.law;
            self.radius = other.radius;
        }
        self.kind = other.kind.or(self.kind);
        self.seed = other.seed.or(self.seed);
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind.unwrap_or_default()
    }

    pub fn law(&self) -> Result<RadiusLaw, CliError> {
        let law = match (&self.law, self.radius) {
            (Some(_), Some(_)) => return Err(CliError::config("give either a law or a radius, not both")),
            (Some(law), None) => law.clone(),
            (None, Some(r)) => RadiusLaw::Constant(r),
            (None, None) => return Err(CliError::config("the Boolean model needs a radius law")),
        };
        law.validate().map_err(CliError::from)?;
        Ok(law)
    }

    /// The model this block describes.
    pub fn resolve(&self) -> Result<Model, CliError> {
        let model = match (self.kind(), self.lambda, self.alpha) {
            (_, Some(_), Some(_)) => return Err(both_intensities()),
            (_, None, None) => {
                return Err(CliError::config("give an intensity `lambda` or a target `alpha`"))
            }
            (ModelKind::Boolean, Some(lambda), None) => Model::boolean(lambda, self.law()?),
            (ModelKind::Boolean, None, Some(alpha)) => Model::boolean_alpha(alpha, self.law()?),
            (ModelKind::Lines, Some(lambda), None) => Model::Lines { lambda },
            (ModelKind::Lines, None, Some(alpha)) => Model::Lines { lambda: alpha / 2.0 },
        };
        model.validate().map_err(CliError::from)?;
        Ok(model)
    }
}

fn both_intensities() -> CliError {
    CliError::config("give either `lambda` or `alpha`, not both")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("3:8:1").unwrap(), vec![3., 4., 5., 6., 7., 8.]);
        assert_eq!(parse_range("0:1:0.1").unwrap().len(), 11);
        assert!(parse_range("3:8").is_err());
        assert!(parse_range("8:3:1").is_err());
        assert!(parse_range("3:8:0").is_err());
    }

    #[test]
    fn laws() {
        assert_eq!(
            parse_law("{\"constant\": 1.0}").unwrap(),
            RadiusLaw::Constant(1.0)
        );
        assert_eq!(
            parse_law("0.5:0.25,1.5:0.75").unwrap(),
            RadiusLaw::Discrete(vec![(0.5, 0.25), (1.5, 0.75)])
        );
        assert!(parse_law("0.5:0.2").is_err());
    }

    #[test]
    fn intensity_rules() {
        let both = RunConfig::parse(r#"{"model": {"lambda": 1, "alpha": 1, "radius": 1}}"#).unwrap();
        assert_eq!(both.model.resolve().unwrap_err().exit_code(), 2);
        let mut spec = RunConfig::parse(r#"{"model": {"alpha": 1.5, "radius": 1}}"#)
            .unwrap()
            .model;
        spec.overlay(ModelSpec {
            lambda: Some(0.3),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(spec.resolve().unwrap().lambda(), 0.3);
        let lines = ModelSpec {
            kind: Some(ModelKind::Lines),
            alpha: Some(2.0),
            ..Default::default()
        };
        assert_eq!(lines.resolve().unwrap(), Model::Lines { lambda: 1.0 });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse(r#"{"model": {"lamda": 1}}"#).is_err());
        assert!(RunConfig::parse(r#"{"extra": 1}"#).is_err());
        let ok = RunConfig::parse(r#"{"experiment": {"r_grid": "3:8:1", "n": 10}}"#).unwrap();
        assert_eq!(ok.experiment.r_grid.unwrap().values().unwrap().len(), 6);
    }
}
