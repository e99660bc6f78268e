use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::Level;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Normal,
    Rain,
    Snow,
    Pooled,
}

impl Stratum {
    pub const WEATHER: [Stratum; 3] = [Stratum::Normal, Stratum::Rain, Stratum::Snow];

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::Normal => "normal",
            Stratum::Rain => "rain",
            Stratum::Snow => "snow",
            Stratum::Pooled => "pooled",
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stratum {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Stratum::Normal),
            "rain" => Ok(Stratum::Rain),
            "snow" => Ok(Stratum::Snow),
            "pooled" => Ok(Stratum::Pooled),
            other => Err(format!("unknown stratum '{other}'")),
        }
    }
}

/// A set of mutually exclusive indicators.
///
/// A `complete` group has exactly one member set on every observation. An
/// incomplete group may have none set, which stands for an uncoded residual
/// category (e.g. "other lighting").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorGroup {
    pub members: Vec<String>,
    pub complete: bool,
}

impl IndicatorGroup {
    pub fn new<S: Into<String>>(members: impl IntoIterator<Item = S>, complete: bool) -> Self {
        Self {
            members: members.into_iter().map(Into::into).collect(),
            complete,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.members.iter().any(|m| m == name)
    }

    /// Category switched on when `name` is switched off on an observation that
    /// had it set. `None` means the residual (all-zero) category.
    pub fn reference_for(&self, name: &str) -> Option<&str> {
        if !self.complete {
            return None;
        }
        self.members
            .iter()
            .find(|m| m.as_str() != name)
            .map(String::as_str)
    }
}

/// One coded observation: the chosen level and its covariate values, aligned
/// with the owning dataset's `indicator_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceObservation {
    pub chosen: Level,
    pub covariates: Vec<f64>,
}

/// An ordered, immutable collection of observations sharing one indicator layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub stratum: Stratum,
    indicator_names: Vec<String>,
    groups: Vec<IndicatorGroup>,
    observations: Vec<ChoiceObservation>,
}

impl Dataset {
    pub fn new(
        stratum: Stratum,
        indicator_names: Vec<String>,
        groups: Vec<IndicatorGroup>,
        observations: Vec<ChoiceObservation>,
    ) -> Result<Self> {
        for (i, name) in indicator_names.iter().enumerate() {
            if indicator_names[..i].contains(name) {
                return Err(Error::domain(format!("duplicate indicator '{name}'")));
            }
        }
        for group in &groups {
            for m in &group.members {
                if !indicator_names.contains(m) {
                    return Err(Error::domain(format!(
                        "group member '{m}' is not an indicator of the dataset"
                    )));
                }
            }
        }
        for (i, obs) in observations.iter().enumerate() {
            if obs.covariates.len() != indicator_names.len() {
                return Err(Error::Dimension {
                    what: "observation covariates",
                    expected: indicator_names.len(),
                    actual: obs.covariates.len(),
                });
            }
            if let Some(bad) = obs.covariates.iter().find(|v| !v.is_finite()) {
                return Err(Error::domain(format!("observation {i}: non-finite covariate {bad}")));
            }
        }
        let ds = Self {
            stratum,
            indicator_names,
            groups,
            observations,
        };
        ds.check_groups()?;
        Ok(ds)
    }

    fn check_groups(&self) -> Result<()> {
        for group in &self.groups {
            let cols: Vec<usize> = group
                .members
                .iter()
                .map(|m| self.column(m).expect("checked in new"))
                .collect();
            for (i, obs) in self.observations.iter().enumerate() {
                let sum: f64 = cols.iter().map(|&c| obs.covariates[c]).sum();
                let ok = if group.complete { sum == 1.0 } else { sum == 0.0 || sum == 1.0 };
                if !ok {
                    return Err(Error::domain(format!(
                        "observation {i}: exclusive group [{}] sums to {sum}",
                        group.members.join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn indicator_names(&self) -> &[String] {
        &self.indicator_names
    }

    pub fn groups(&self) -> &[IndicatorGroup] {
        &self.groups
    }

    pub fn observations(&self) -> &[ChoiceObservation] {
        &self.observations
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.indicator_names.iter().position(|n| n == name)
    }

    pub fn group_of(&self, name: &str) -> Option<&IndicatorGroup> {
        self.groups.iter().find(|g| g.contains(name))
    }

    /// Count of observations choosing each level, in `Level::ALL` order.
    pub fn level_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for obs in &self.observations {
            counts[obs.chosen.index()] += 1;
        }
        counts
    }

    /// Same layout, different observations.
    pub fn with_observations(&self, stratum: Stratum, observations: Vec<ChoiceObservation>) -> Result<Self> {
        Self::new(stratum, self.indicator_names.clone(), self.groups.clone(), observations)
    }
}
