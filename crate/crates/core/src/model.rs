//! Model specifications: which indicator enters which level's utility, fixed
//! or random, and the packed parameter layout.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::Level;
use crate::special::normal_cdf;

/// Variable name of an alternative-specific constant.
pub const CONSTANT: &str = "CONSTANT";

/// Maximum number of constants identified with three levels.
pub const MAX_CONSTANTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Fixed,
    Random,
}

/// Mixing law of a random coefficient, parameterised by a location and a
/// spread. The spread enters as `|spread|`.
///
/// * normal: `β = μ + σ z`
/// * lognormal: `β = exp(μ + σ z)` (μ, σ of the underlying normal)
/// * triangular: `β = c + s t`, `t` symmetric triangular on `[-1, 1]`
/// * uniform: `β = c + s (2u - 1)`
///
/// with `z` standard normal and `u = Φ(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixingDistribution {
    Normal,
    Lognormal,
    Triangular,
    Uniform,
}

impl MixingDistribution {
    /// The standardised variate the spread multiplies, as a function of a
    /// standard normal draw.
    pub fn base_variate(self, z: f64) -> f64 {
        match self {
            MixingDistribution::Normal | MixingDistribution::Lognormal => z,
            MixingDistribution::Uniform => 2.0 * normal_cdf(z) - 1.0,
            MixingDistribution::Triangular => {
                let u = normal_cdf(z);
                if u <= 0.5 {
                    (2.0 * u).sqrt() - 1.0
                } else {
                    1.0 - (2.0 * (1.0 - u)).sqrt()
                }
            }
        }
    }

    /// Coefficient for a base variate `t` (see [`Self::base_variate`]).
    pub fn coefficient(self, location: f64, spread: f64, t: f64) -> f64 {
        let inner = location + spread.abs() * t;
        match self {
            MixingDistribution::Lognormal => inner.exp(),
            _ => inner,
        }
    }

    /// Coefficient with its partial derivatives with respect to the stored
    /// location and (signed) spread slots.
    pub fn coefficient_and_derivs(self, location: f64, spread: f64, t: f64) -> (f64, f64, f64) {
        let sign = if spread.is_sign_negative() { -1.0 } else { 1.0 };
        let inner = location + spread.abs() * t;
        match self {
            MixingDistribution::Lognormal => {
                let beta = inner.exp();
                (beta, beta, beta * t * sign)
            }
            _ => (inner, 1.0, t * sign),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MixingDistribution::Normal => "normal",
            MixingDistribution::Lognormal => "lognormal",
            MixingDistribution::Triangular => "triangular",
            MixingDistribution::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDef {
    pub name: String,
    pub level: Level,
    /// Indicator name, or [`CONSTANT`].
    pub variable: String,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<MixingDistribution>,
}

impl ParameterDef {
    pub fn fixed(name: impl Into<String>, level: Level, variable: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            level,
            variable: variable.into(),
            kind: ParamKind::Fixed,
            distribution: None,
        }
    }

    pub fn random(
        name: impl Into<String>,
        level: Level,
        variable: impl Into<String>,
        distribution: MixingDistribution,
    ) -> Self {
        Self {
            name: name.into(),
            level,
            variable: variable.into(),
            kind: ParamKind::Random,
            distribution: Some(distribution),
        }
    }

    pub fn constant(name: impl Into<String>, level: Level) -> Self {
        Self::fixed(name, level, CONSTANT)
    }

    pub fn is_constant(&self) -> bool {
        self.variable == CONSTANT
    }

    pub fn is_random(&self) -> bool {
        self.kind == ParamKind::Random
    }

    pub fn slots(&self) -> usize {
        match self.kind {
            ParamKind::Fixed => 1,
            ParamKind::Random => 2,
        }
    }
}

fn default_base() -> Level {
    Level::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_base")]
    pub base_level: Level,
    pub defs: Vec<ParameterDef>,
}

impl ModelSpec {
    pub fn new(defs: Vec<ParameterDef>) -> Self {
        Self {
            base_level: Level::None,
            defs,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n_random(&self) -> usize {
        self.defs.iter().filter(|d| d.is_random()).count()
    }

    /// Number of estimated parameters (layout length).
    pub fn n_parameters(&self) -> usize {
        self.defs.iter().map(ParameterDef::slots).sum()
    }

    /// Distinct non-constant variables in declaration order.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for d in &self.defs {
            if !d.is_constant() && !seen.contains(&d.variable.as_str()) {
                seen.push(d.variable.as_str());
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    ConstantOnBaseLevel { def: String },
    TooManyConstants { count: usize },
    UnknownVariable { def: String, variable: String },
    Duplicate { level: Level, variable: String },
    DuplicateName { name: String },
    MissingDistribution { def: String },
    UnexpectedDistribution { def: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "specification has no parameters"),
            Violation::ConstantOnBaseLevel { def } => {
                write!(f, "constant on base level (def '{def}')")
            }
            Violation::TooManyConstants { count } => {
                write!(f, "{count} constants; at most {MAX_CONSTANTS} are identified")
            }
            Violation::UnknownVariable { def, variable } => {
                write!(f, "unknown variable '{variable}' in def '{def}'")
            }
            Violation::Duplicate { level, variable } => {
                write!(f, "variable '{variable}' entered twice on level {level}")
            }
            Violation::DuplicateName { name } => write!(f, "duplicate parameter name '{name}'"),
            Violation::MissingDistribution { def } => {
                write!(f, "random def '{def}' has no distribution")
            }
            Violation::UnexpectedDistribution { def } => {
                write!(f, "fixed def '{def}' carries a distribution")
            }
        }
    }
}

/// Every violated specification invariant, or `Ok` when estimation may proceed.
pub fn validate_spec(spec: &ModelSpec, indicator_names: &[String]) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if spec.defs.is_empty() {
        out.push(Violation::Empty);
    }
    let constants = spec.defs.iter().filter(|d| d.is_constant()).count();
    if constants > MAX_CONSTANTS {
        out.push(Violation::TooManyConstants { count: constants });
    }
    let mut pairs = BTreeSet::new();
    let mut names = BTreeSet::new();
    for d in &spec.defs {
        if d.is_constant() {
            if d.level == spec.base_level {
                out.push(Violation::ConstantOnBaseLevel { def: d.name.clone() });
            }
        } else if !indicator_names.contains(&d.variable) {
            out.push(Violation::UnknownVariable {
                def: d.name.clone(),
                variable: d.variable.clone(),
            });
        }
        if !pairs.insert((d.level, d.variable.clone())) {
            out.push(Violation::Duplicate {
                level: d.level,
                variable: d.variable.clone(),
            });
        }
        if !names.insert(d.name.clone()) {
            out.push(Violation::DuplicateName { name: d.name.clone() });
        }
        match (d.kind, d.distribution) {
            (ParamKind::Random, None) => out.push(Violation::MissingDistribution { def: d.name.clone() }),
            (ParamKind::Fixed, Some(_)) => out.push(Violation::UnexpectedDistribution { def: d.name.clone() }),
            _ => {}
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Converts violations into an error for callers that cannot proceed.
pub fn ensure_valid(spec: &ModelSpec, indicator_names: &[String]) -> Result<()> {
    validate_spec(spec, indicator_names)
        .map_err(|v| Error::InvalidSpec(v.iter().map(ToString::to_string).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotRole {
    Coefficient,
    Mean,
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub def: usize,
    pub role: SlotRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterLayout {
    pub slots: Vec<Slot>,
}

impl ParameterLayout {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.name.clone()).collect()
    }

    /// Index of the first slot of each def.
    pub fn def_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::new();
        for (i, s) in self.slots.iter().enumerate() {
            if s.role != SlotRole::Spread {
                offsets.push(i);
            }
        }
        offsets
    }
}

/// Defs in declaration order; a random def contributes `name.mean` then `name.sd`.
pub fn parameter_layout(spec: &ModelSpec) -> ParameterLayout {
    let mut slots = Vec::with_capacity(spec.n_parameters());
    for (i, d) in spec.defs.iter().enumerate() {
        match d.kind {
            ParamKind::Fixed => slots.push(Slot {
                name: d.name.clone(),
                def: i,
                role: SlotRole::Coefficient,
            }),
            ParamKind::Random => {
                slots.push(Slot {
                    name: format!("{}.mean", d.name),
                    def: i,
                    role: SlotRole::Mean,
                });
                slots.push(Slot {
                    name: format!("{}.sd", d.name),
                    def: i,
                    role: SlotRole::Spread,
                });
            }
        }
    }
    ParameterLayout { slots }
}

/// Value(s) attached to a single def.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefValue {
    Fixed(f64),
    Random { location: f64, spread: f64 },
}

/// The packed parameter vector `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pack(spec: &ModelSpec, values: &[DefValue]) -> Result<Self> {
        if values.len() != spec.defs.len() {
            return Err(Error::Dimension {
                what: "def values",
                expected: spec.defs.len(),
                actual: values.len(),
            });
        }
        let mut out = Vec::with_capacity(spec.n_parameters());
        for (d, v) in spec.defs.iter().zip(values) {
            match (d.kind, *v) {
                (ParamKind::Fixed, DefValue::Fixed(b)) => out.push(b),
                (ParamKind::Random, DefValue::Random { location, spread }) => {
                    out.push(location);
                    out.push(spread);
                }
                _ => return Err(Error::domain(format!("value kind does not match def '{}'", d.name))),
            }
        }
        Ok(Self(out))
    }

    pub fn unpack(&self, spec: &ModelSpec) -> Result<Vec<DefValue>> {
        if self.0.len() != spec.n_parameters() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: spec.n_parameters(),
                actual: self.0.len(),
            });
        }
        let mut it = self.0.iter().copied();
        Ok(spec
            .defs
            .iter()
            .map(|d| match d.kind {
                ParamKind::Fixed => DefValue::Fixed(it.next().unwrap()),
                ParamKind::Random => DefValue::Random {
                    location: it.next().unwrap(),
                    spread: it.next().unwrap(),
                },
            })
            .collect())
    }
}
