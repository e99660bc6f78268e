//! Mixed (random-parameters) logit estimation for three-level injury
//! severity outcomes.
//!
//! The pipeline runs from crash records ([`data`]) through Halton draws
//! ([`halton`]) and a model specification ([`model`]) to the simulated
//! likelihood ([`likelihood`]), its maximisation ([`estimate`]) and the
//! post-estimation tests ([`inference`]). [`synthetic`] generates datasets
//! with known parameters and provides a quadrature oracle.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `is_multiple_of` is newer than the supported toolchain.
#![allow(unknown_lints, clippy::manual_is_multiple_of)]

pub mod data;
pub mod error;
pub mod estimate;
pub mod halton;
pub mod inference;
pub mod level;
pub mod likelihood;
pub mod model;
pub mod optim;
pub mod special;
pub mod synthetic;

pub use data::{ChoiceObservation, CrashRecord, Dataset, IndicatorGroup, Stratum};
pub use error::{Error, Result};
pub use estimate::{estimate, CovarianceMethod, EstimationOptions, EstimationResult};
pub use halton::{build_draws, DrawMatrix};
pub use inference::{LrTestResult, MarginalEffectsTable};
pub use level::{Level, N_LEVELS};
pub use likelihood::{CompiledModel, ProbabilityVector};
pub use model::{MixingDistribution, ModelSpec, ParameterDef, ParameterVector};
