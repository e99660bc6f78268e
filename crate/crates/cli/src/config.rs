//! Pipeline configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sevlogit_core::estimate::{EstimationOptions, RETENTION_T};
use sevlogit_core::{ModelSpec, Stratum};

use crate::report::ArrowScope;

fn default_strata() -> Vec<Stratum> {
    Stratum::WEATHER.to_vec()
}

fn default_true() -> bool {
    true
}

fn default_significance() -> f64 {
    RETENTION_T
}

/// Paths are resolved relative to the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_strata")]
    pub strata: Vec<Stratum>,
    /// Spec file per stratum; a `pooled` entry enables the pooled test.
    pub specs: BTreeMap<Stratum, PathBuf>,
    #[serde(default)]
    pub options: EstimationOptions,
    #[serde(default = "default_true")]
    pub transfer: bool,
    /// |t| needed for an arrow in the comparison matrix.
    #[serde(default = "default_significance")]
    pub significance_t: f64,
    #[serde(default)]
    pub arrows: ArrowScope,
    pub output_dir: PathBuf,
}

/// Command-line overrides of estimation settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub draws: Option<usize>,
    pub skip: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, options: &mut EstimationOptions) {
        if let Some(d) = self.draws {
            options.n_draws = d;
        }
        if let Some(s) = self.skip {
            options.skip = s;
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.input);
        if let Some(s) = self.schema.as_mut() {
            join(s);
        }
        for p in self.specs.values_mut() {
            join(p);
        }
        join(&mut self.output_dir);
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.strata.is_empty() {
            bail!("no strata requested");
        }
        for s in &self.strata {
            if *s == Stratum::Pooled {
                bail!("'pooled' is not a weather stratum; give its spec under specs.pooled");
            }
            if !self.specs.contains_key(s) {
                bail!("no spec given for stratum {s}");
            }
        }
        if self.significance_t.is_nan() || self.significance_t <= 0.0 {
            bail!("significance_t must be positive");
        }
        self.options.validate()?;
        Ok(())
    }

    pub fn load_spec(&self, stratum: Stratum) -> anyhow::Result<Option<ModelSpec>> {
        match self.specs.get(&stratum) {
            None => Ok(None),
            Some(p) => Ok(Some(ModelSpec::from_path(p).with_context(|| format!("spec for {stratum}: {}", p.display()))?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_config() {
        let mut cfg: RunConfig = serde_json::from_str(
            r#"{"input": "crashes.csv", "specs": {"normal": "n.json", "rain": "r.json", "snow": "/abs/s.json"}, "output_dir": "out"}"#,
        )
        .unwrap();
        cfg.resolve(Path::new("/data/run"));
        assert_eq!(cfg.input, Path::new("/data/run/crashes.csv"));
        assert_eq!(cfg.specs[&Stratum::Snow], Path::new("/abs/s.json"));
        assert_eq!(cfg.options, EstimationOptions::default());
        assert!(cfg.transfer);
        cfg.validate().unwrap();
    }

    #[test]
    fn missing_spec_is_a_validation_error() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"input": "x.csv", "strata": ["rain"], "specs": {}, "output_dir": "o"}"#).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("rain"));
    }

    #[test]
    fn overrides_replace_options() {
        let mut o = EstimationOptions::default();
        Overrides { draws: Some(50), skip: Some(7) }.apply(&mut o);
        assert_eq!((o.n_draws, o.skip), (50, 7));
    }
}
