//! Synthetic choice data from known parameters, and a quadrature oracle for
//! the mixed-logit integral.
//!
//! Data generation uses a seeded ChaCha stream, never the Halton sequence, so
//! generated data and estimation draws are unrelated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ChoiceObservation, Dataset, IndicatorGroup, Stratum};
use crate::error::{Error, Result};
use crate::level::{Level, N_LEVELS};
use crate::likelihood::{mnl_probabilities, systematic_utility, CompiledModel, ProbabilityVector};
use crate::model::{ModelSpec, ParameterVector};
use crate::special::normal_pdf;

/// How one covariate (or one exclusive group) is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateLaw {
    /// Independent Bernoulli indicator.
    Indicator { name: String, rate: f64 },
    /// One member switched on with the given probabilities; any remaining
    /// mass leaves every member at zero.
    Group { members: Vec<String>, probabilities: Vec<f64> },
}

fn default_stratum() -> Stratum {
    Stratum::Normal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub spec: ModelSpec,
    pub theta_true: ParameterVector,
    pub n_obs: usize,
    pub seed: u64,
    pub covariate_law: Vec<CovariateLaw>,
    #[serde(default = "default_stratum")]
    pub stratum: Stratum,
}

impl GenConfig {
    /// Indicator names and exclusive groups implied by the covariate law.
    pub fn layout(&self) -> Result<(Vec<String>, Vec<IndicatorGroup>)> {
        let mut names = Vec::new();
        let mut groups = Vec::new();
        for law in &self.covariate_law {
            match law {
                CovariateLaw::Indicator { name, rate } => {
                    if !(0.0..=1.0).contains(rate) {
                        return Err(Error::domain(format!("rate of '{name}' outside [0, 1]")));
                    }
                    names.push(name.clone());
                }
                CovariateLaw::Group { members, probabilities } => {
                    if members.len() != probabilities.len() || members.is_empty() {
                        return Err(Error::domain("group needs one probability per member"));
                    }
                    if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(Error::domain("group probabilities must lie in [0, 1]"));
                    }
                    let total: f64 = probabilities.iter().sum();
                    if total > 1.0 + 1e-9 {
                        return Err(Error::domain(format!("group probabilities sum to {total} > 1")));
                    }
                    names.extend(members.iter().cloned());
                    groups.push(IndicatorGroup::new(members.iter().cloned(), (total - 1.0).abs() <= 1e-9));
                }
            }
        }
        Ok((names, groups))
    }
}

fn pick(u: f64, probabilities: &[f64]) -> Option<usize> {
    let mut cum = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        cum += p;
        if u < cum {
            return Some(i);
        }
    }
    None
}

/// Draws covariates, realises random coefficients from their mixing law,
/// and samples each chosen level from the logit probabilities.
pub fn generate_dataset(config: &GenConfig) -> Result<Dataset> {
    let (names, groups) = config.layout()?;
    let model = CompiledModel::new(&config.spec, &names)?;
    let theta = config.theta_true.as_slice();
    if theta.len() != model.n_params() {
        return Err(Error::Dimension {
            what: "theta_true",
            expected: model.n_params(),
            actual: theta.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut observations = Vec::with_capacity(config.n_obs);
    let mut z = vec![0.0; model.n_random()];
    for _ in 0..config.n_obs {
        let mut x = Vec::with_capacity(names.len());
        for law in &config.covariate_law {
            match law {
                CovariateLaw::Indicator { rate, .. } => {
                    let u: f64 = rng.random();
                    x.push(if u < *rate { 1.0 } else { 0.0 });
                }
                CovariateLaw::Group { probabilities, .. } => {
                    let u: f64 = rng.random();
                    let hit = pick(u, probabilities);
                    let mut block = vec![0.0; probabilities.len()];
                    if let Some(i) = hit {
                        block[i] = 1.0;
                    }
                    x.extend(block);
                }
            }
        }
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let p = mnl_probabilities(&systematic_utility(&model, theta, &x, &z)?);
        let u: f64 = rng.random();
        let chosen = pick(u, &p.0).unwrap_or(N_LEVELS - 1);
        observations.push(ChoiceObservation {
            chosen: Level::from_index(chosen).expect("level index"),
            covariates: x,
        });
    }
    Dataset::new(config.stratum, names, groups, observations)
}

/// Mixed-logit probabilities by tensor-product trapezoid quadrature over
/// standard-normal nodes on `[-8, 8]`, weights normalised to one.
pub fn brute_force_mixed_prob(model: &CompiledModel, theta: &[f64], x: &[f64], n_grid: usize) -> Result<ProbabilityVector> {
    let dims = model.n_random();
    if dims == 0 {
        return Ok(mnl_probabilities(&systematic_utility(model, theta, x, &[])?));
    }
    if dims > 2 {
        return Err(Error::Unsupported(format!("quadrature oracle supports at most 2 random dimensions, got {dims}")));
    }
    if n_grid < 51 {
        return Err(Error::domain("quadrature oracle needs at least 51 nodes"));
    }
    const HALF_WIDTH: f64 = 8.0;
    let h = 2.0 * HALF_WIDTH / (n_grid - 1) as f64;
    let nodes: Vec<(f64, f64)> = (0..n_grid)
        .map(|i| {
            let z = -HALF_WIDTH + i as f64 * h;
            let end = if i == 0 || i == n_grid - 1 { 0.5 } else { 1.0 };
            (z, end * h * normal_pdf(z))
        })
        .collect();

    let mut acc = [0.0; N_LEVELS];
    let mut total = 0.0;
    let mut add = |z: &[f64], w: f64| -> Result<()> {
        let p = mnl_probabilities(&systematic_utility(model, theta, x, z)?);
        for l in 0..N_LEVELS {
            acc[l] += w * p[l];
        }
        total += w;
        Ok(())
    };
    if dims == 1 {
        for &(z, w) in &nodes {
            add(&[z], w)?;
        }
    } else {
        for &(z1, w1) in &nodes {
            for &(z2, w2) in &nodes {
                add(&[z1, z2], w1 * w2)?;
            }
        }
    }
    Ok(ProbabilityVector(acc.map(|a| a / total)))
}
