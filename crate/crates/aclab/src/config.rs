//! Experiment configuration file.

use std::path::{Path, PathBuf};

use aclab_core::actor_critic::RunConfig;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Contents of the `--config` JSON file. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mdp_path: PathBuf,
    pub run: RunConfig,
    /// Exponents `a` of `eta_k = beta_k = (1+k)^{-a}` for `sweep`.
    #[serde(default)]
    pub sweep_exponents: Option<Vec<f64>>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Replaces the discount stored in the MDP file.
    #[serde(default)]
    pub gamma: Option<f64>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut spec: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if spec.mdp_path.is_relative() {
            spec.mdp_path = base.join(&spec.mdp_path);
        }
        if spec.output_dir.is_relative() {
            spec.output_dir = base.join(&spec.output_dir);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if !self.mdp_path.exists() {
            bail!("MDP file {} does not exist", self.mdp_path.display());
        }
        if let Some(exps) = &self.sweep_exponents {
            validate_exponents(exps)?;
        }
        Ok(())
    }

    pub fn load_mdp(&self) -> Result<aclab_core::TabularMdp> {
        let mdp = aclab_core::TabularMdp::load(&self.mdp_path)
            .with_context(|| format!("loading {}", self.mdp_path.display()))?;
        Ok(match self.gamma {
            Some(g) => mdp.with_discount(g)?,
            None => mdp,
        })
    }
}

pub fn validate_exponents(exps: &[f64]) -> Result<()> {
    if exps.is_empty() {
        bail!("at least one sweep exponent is required");
    }
    if let Some(a) = exps.iter().find(|a| !(0.0..=2.0).contains(*a)) {
        bail!("sweep exponent {a} outside [0, 2]");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.json"), "{}").unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"mdp_path": "m.json", "run": {"horizon": 10}}"#).unwrap();
        let spec = ExperimentSpec::load(&cfg).unwrap();
        assert_eq!(spec.run.n_seeds, 10);
        assert_eq!(spec.output_dir, dir.path().join("out"));
        assert_eq!(spec.mdp_path, dir.path().join("m.json"));
    }

    #[test]
    fn rejects_missing_mdp_and_bad_exponents() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"mdp_path": "nope.json", "run": {"horizon": 10}}"#).unwrap();
        assert!(ExperimentSpec::load(&cfg).is_err());
        assert!(validate_exponents(&[0.5, 2.5]).is_err());
        assert!(validate_exponents(&[]).is_err());
        assert!(validate_exponents(&[0.0, 2.0]).is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.json"), "{}").unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"mdp_path": "m.json", "run": {"horizon": 1, "horizn": 2}}"#).unwrap();
        assert!(ExperimentSpec::load(&cfg).is_err());
    }
}
