//! Simulated mixed logit likelihood and its analytic gradient.
//!
//! Every reduction over observations runs over fixed-size chunks whose partial
//! results are combined in chunk order, so values are bit-identical whether
//! or not the chunks are evaluated in parallel.

use std::ops::{Index, Range};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ChoiceObservation, Dataset};
use crate::error::{Error, Result};
use crate::halton::{DrawMatrix, ObsDraws};
use crate::level::{Level, N_LEVELS};
use crate::model::{ensure_valid, MixingDistribution, ModelSpec, ParamKind};

/// Smallest chosen-level probability accepted before taking the log.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(pub [f64; N_LEVELS]);

impl ProbabilityVector {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn get(&self, level: Level) -> f64 {
        self.0[level.index()]
    }
}

impl Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone)]
struct FixedTerm {
    level: usize,
    column: Option<usize>,
    slot: usize,
}

#[derive(Debug, Clone)]
struct RandomTerm {
    level: usize,
    column: Option<usize>,
    /// Location slot; the spread sits at `slot + 1`.
    slot: usize,
    distribution: MixingDistribution,
}

/// A validated specification bound to a dataset's column layout.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    n_params: usize,
    fixed: Vec<FixedTerm>,
    random: Vec<RandomTerm>,
}

impl CompiledModel {
    pub fn new(spec: &ModelSpec, indicator_names: &[String]) -> Result<Self> {
        ensure_valid(spec, indicator_names)?;
        let mut fixed = Vec::new();
        let mut random = Vec::new();
        let mut slot = 0;
        for d in &spec.defs {
            let column = if d.is_constant() {
                None
            } else {
                indicator_names.iter().position(|n| *n == d.variable)
            };
            let level = d.level.index();
            match d.kind {
                ParamKind::Fixed => {
                    fixed.push(FixedTerm { level, column, slot });
                    slot += 1;
                }
                ParamKind::Random => {
                    random.push(RandomTerm {
                        level,
                        column,
                        slot,
                        distribution: d.distribution.expect("validated"),
                    });
                    slot += 2;
                }
            }
        }
        Ok(Self {
            n_params: slot,
            fixed,
            random,
        })
    }

    pub fn for_dataset(spec: &ModelSpec, dataset: &Dataset) -> Result<Self> {
        Self::new(spec, dataset.indicator_names())
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_random(&self) -> usize {
        self.random.len()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: self.n_params,
                actual: theta.len(),
            });
        }
        Ok(())
    }

    fn check_draws(&self, draws: &ObsDraws<'_>) -> Result<()> {
        if self.random.is_empty() {
            return Ok(());
        }
        if draws.n_draws() == 0 {
            return Err(Error::domain("model has random parameters but no draws were supplied"));
        }
        if draws.n_dims() != self.random.len() {
            return Err(Error::Dimension {
                what: "draw dimensions",
                expected: self.random.len(),
                actual: draws.n_dims(),
            });
        }
        Ok(())
    }

    fn check_matrix(&self, dataset: &Dataset, draws: &DrawMatrix) -> Result<()> {
        if self.random.is_empty() {
            return Ok(());
        }
        if draws.n_obs() != dataset.len() {
            return Err(Error::Dimension {
                what: "draw matrix observations",
                expected: dataset.len(),
                actual: draws.n_obs(),
            });
        }
        if dataset.is_empty() {
            return Ok(());
        }
        self.check_draws(&draws.for_observation(0))
    }

    #[inline]
    fn x(column: Option<usize>, x: &[f64]) -> f64 {
        column.map_or(1.0, |c| x[c])
    }

    #[inline]
    fn fixed_utilities(&self, theta: &[f64], x: &[f64]) -> [f64; N_LEVELS] {
        let mut v = [0.0; N_LEVELS];
        for t in &self.fixed {
            v[t.level] += theta[t.slot] * Self::x(t.column, x);
        }
        v
    }

    #[inline]
    fn add_random(&self, theta: &[f64], x: &[f64], z: &[f64], v: &mut [f64; N_LEVELS]) {
        for (t, &zk) in self.random.iter().zip(z) {
            let xv = Self::x(t.column, x);
            if xv != 0.0 {
                let base = t.distribution.base_variate(zk);
                v[t.level] += t.distribution.coefficient(theta[t.slot], theta[t.slot + 1], base) * xv;
            }
        }
    }

    /// Mixed-logit probabilities averaged over the observation's draws.
    fn probabilities_unchecked(&self, theta: &[f64], x: &[f64], draws: ObsDraws<'_>) -> [f64; N_LEVELS] {
        let base = self.fixed_utilities(theta, x);
        if self.random.is_empty() {
            return mnl(&base);
        }
        let mut acc = [0.0; N_LEVELS];
        for z in draws.iter() {
            let mut v = base;
            self.add_random(theta, x, z, &mut v);
            let p = mnl(&v);
            for i in 0..N_LEVELS {
                acc[i] += p[i];
            }
        }
        let r = draws.n_draws() as f64;
        acc.map(|a| a / r)
    }

    /// `ln P̄(chosen)` and, when `grad` is given, its gradient added into
    /// `grad`.
    fn log_prob_and_grad(
        &self,
        theta: &[f64],
        obs: &ChoiceObservation,
        draws: ObsDraws<'_>,
        index: usize,
        mut grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        let x = obs.covariates.as_slice();
        let c = obs.chosen.index();
        let base = self.fixed_utilities(theta, x);
        let p_chosen = if self.random.is_empty() {
            let p = mnl(&base);
            if let Some(g) = grad.as_deref_mut() {
                // ∂ln p_c/∂V_l = δ_cl − p_l
                for t in &self.fixed {
                    g[t.slot] += (delta(t.level, c) - p[t.level]) * Self::x(t.column, x);
                }
            }
            p[c]
        } else {
            self.mixed_prob_and_grad(theta, x, c, base, draws, grad)
        };
        if p_chosen.is_nan() {
            return Err(Error::NonFinite(format!("probability at observation {index} is NaN")));
        }
        if p_chosen < PROBABILITY_FLOOR {
            return Err(Error::ZeroProbability { observation: index });
        }
        Ok(p_chosen.ln())
    }

    /// Simulated `P̄(c)`; adds `∂ln P̄(c)/∂θ` into `grad` when requested.
    fn mixed_prob_and_grad(
        &self,
        theta: &[f64],
        x: &[f64],
        c: usize,
        base: [f64; N_LEVELS],
        draws: ObsDraws<'_>,
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let k = self.random.len();
        let want_grad = grad.is_some();
        let mut sum_pc = 0.0;
        // Σ_r p_c (δ_cl − p_l), shared by every fixed term on level l
        let mut level_weight = [0.0; N_LEVELS];
        // ∂V/∂(location, spread) of each random term at the current draw
        let mut dv = vec![0.0; 2 * k];
        let mut g_random = vec![0.0; 2 * k];
        for z in draws.iter() {
            let mut v = base;
            for (j, (t, &zk)) in self.random.iter().zip(z).enumerate() {
                let xv = Self::x(t.column, x);
                if xv == 0.0 {
                    dv[2 * j] = 0.0;
                    dv[2 * j + 1] = 0.0;
                    continue;
                }
                let b = t.distribution.base_variate(zk);
                let (beta, dl, ds) = t.distribution.coefficient_and_derivs(theta[t.slot], theta[t.slot + 1], b);
                v[t.level] += beta * xv;
                dv[2 * j] = dl * xv;
                dv[2 * j + 1] = ds * xv;
            }
            let p = mnl(&v);
            let pc = p[c];
            sum_pc += pc;
            if want_grad {
                let w = [0, 1, 2].map(|l| pc * (delta(l, c) - p[l]));
                for l in 0..N_LEVELS {
                    level_weight[l] += w[l];
                }
                for (j, t) in self.random.iter().enumerate() {
                    g_random[2 * j] += w[t.level] * dv[2 * j];
                    g_random[2 * j + 1] += w[t.level] * dv[2 * j + 1];
                }
            }
        }
        if let Some(g) = grad {
            if sum_pc > 0.0 {
                for t in &self.fixed {
                    g[t.slot] += level_weight[t.level] * Self::x(t.column, x) / sum_pc;
                }
                for (j, t) in self.random.iter().enumerate() {
                    g[t.slot] += g_random[2 * j] / sum_pc;
                    g[t.slot + 1] += g_random[2 * j + 1] / sum_pc;
                }
            }
        }
        sum_pc / draws.n_draws() as f64
    }
}

#[inline]
fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Softmax with max-subtraction.
#[inline]
fn mnl(v: &[f64; N_LEVELS]) -> [f64; N_LEVELS] {
    let m = v[0].max(v[1]).max(v[2]);
    let e = [(v[0] - m).exp(), (v[1] - m).exp(), (v[2] - m).exp()];
    let s = e[0] + e[1] + e[2];
    [e[0] / s, e[1] / s, e[2] / s]
}

/// Multinomial logit probabilities of a utility vector.
pub fn mnl_probabilities(utilities: &[f64; N_LEVELS]) -> ProbabilityVector {
    ProbabilityVector(mnl(utilities))
}

/// Utility of each level for one observation and one draw (one standard
/// normal value per random def, in def order).
pub fn systematic_utility(model: &CompiledModel, theta: &[f64], x: &[f64], z: &[f64]) -> Result<[f64; N_LEVELS]> {
    model.check_theta(theta)?;
    if z.len() != model.n_random() {
        return Err(Error::Dimension {
            what: "draw values",
            expected: model.n_random(),
            actual: z.len(),
        });
    }
    let mut v = model.fixed_utilities(theta, x);
    model.add_random(theta, x, z, &mut v);
    Ok(v)
}

/// Equal-weight average of MNL probabilities over the draws.
pub fn simulated_probabilities(
    model: &CompiledModel,
    theta: &[f64],
    x: &[f64],
    draws: ObsDraws<'_>,
) -> Result<ProbabilityVector> {
    model.check_theta(theta)?;
    model.check_draws(&draws)?;
    Ok(ProbabilityVector(model.probabilities_unchecked(theta, x, draws)))
}

/// `-n ln(levels)`, the log-likelihood of equal shares.
pub fn null_log_likelihood(n_obs: usize, n_levels: usize) -> Result<f64> {
    if n_obs == 0 || n_levels < 2 {
        return Err(Error::domain("null log-likelihood needs n_obs >= 1 and n_levels >= 2"));
    }
    Ok(-(n_obs as f64) * (n_levels as f64).ln())
}

fn chunks(n: usize) -> impl IndexedParallelIterator<Item = Range<usize>> {
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(move |c| c * CHUNK..((c + 1) * CHUNK).min(n))
}

fn obs_draws<'a>(model: &CompiledModel, draws: &'a DrawMatrix, n: usize) -> ObsDraws<'a> {
    if model.n_random() == 0 {
        ObsDraws::new(&[], 0)
    } else {
        draws.for_observation(n)
    }
}

/// Simulated log-likelihood `Σ_n ln P̄_n(chosen)`.
pub fn log_likelihood(model: &CompiledModel, theta: &[f64], dataset: &Dataset, draws: &DrawMatrix) -> Result<f64> {
    model.check_theta(theta)?;
    model.check_matrix(dataset, draws)?;
    let obs = dataset.observations();
    let partials: Vec<f64> = chunks(obs.len())
        .map(|range| {
            let mut s = 0.0;
            for n in range {
                s += model.log_prob_and_grad(theta, &obs[n], obs_draws(model, draws, n), n, None)?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(partials.iter().sum())
}

/// Log-likelihood and its gradient in one pass.
pub fn log_likelihood_and_score(
    model: &CompiledModel,
    theta: &[f64],
    dataset: &Dataset,
    draws: &DrawMatrix,
) -> Result<(f64, Vec<f64>)> {
    model.check_theta(theta)?;
    model.check_matrix(dataset, draws)?;
    let obs = dataset.observations();
    let k = model.n_params();
    let partials: Vec<(f64, Vec<f64>)> = chunks(obs.len())
        .map(|range| {
            let mut s = 0.0;
            let mut g = vec![0.0; k];
            for n in range {
                s += model.log_prob_and_grad(theta, &obs[n], obs_draws(model, draws, n), n, Some(&mut g))?;
            }
            Ok((s, g))
        })
        .collect::<Result<_>>()?;
    let mut ll = 0.0;
    let mut grad = vec![0.0; k];
    for (s, g) in partials {
        ll += s;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((ll, grad))
}

/// Exact gradient of [`log_likelihood`] with the draws held fixed.
pub fn score(model: &CompiledModel, theta: &[f64], dataset: &Dataset, draws: &DrawMatrix) -> Result<Vec<f64>> {
    Ok(log_likelihood_and_score(model, theta, dataset, draws)?.1)
}

/// Per-observation gradients, row-major `n_obs × n_params`.
pub fn observation_scores(
    model: &CompiledModel,
    theta: &[f64],
    dataset: &Dataset,
    draws: &DrawMatrix,
) -> Result<Vec<Vec<f64>>> {
    model.check_theta(theta)?;
    model.check_matrix(dataset, draws)?;
    let obs = dataset.observations();
    let k = model.n_params();
    let parts: Vec<Vec<Vec<f64>>> = chunks(obs.len())
        .map(|range| {
            range
                .map(|n| {
                    let mut g = vec![0.0; k];
                    model.log_prob_and_grad(theta, &obs[n], obs_draws(model, draws, n), n, Some(&mut g))?;
                    Ok(g)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Simulated probabilities for every observation, in dataset order.
pub fn predict(model: &CompiledModel, theta: &[f64], dataset: &Dataset, draws: &DrawMatrix) -> Result<Vec<ProbabilityVector>> {
    model.check_theta(theta)?;
    model.check_matrix(dataset, draws)?;
    let obs = dataset.observations();
    let parts: Vec<Vec<ProbabilityVector>> = chunks(obs.len())
        .map(|range| {
            range
                .map(|n| {
                    ProbabilityVector(model.probabilities_unchecked(theta, &obs[n].covariates, obs_draws(model, draws, n)))
                })
                .collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Stratum;
    use crate::model::ParameterDef;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn zero_parameters_give_zero_utilities() {
        let spec = ModelSpec::new(vec![
            ParameterDef::fixed("m", Level::Major, "male"),
            ParameterDef::random("w", Level::Minor, "weekend", MixingDistribution::Normal),
        ]);
        let model = CompiledModel::new(&spec, &names(&["male", "weekend"])).unwrap();
        let v = systematic_utility(&model, &[0.0; 3], &[1.0, 1.0], &[0.3]).unwrap();
        assert_eq!(v, [0.0; 3]);
    }

    #[test]
    fn single_fixed_coefficient() {
        let spec = ModelSpec::new(vec![ParameterDef::fixed("male", Level::Minor, "male")]);
        let model = CompiledModel::new(&spec, &names(&["male"])).unwrap();
        let v = systematic_utility(&model, &[-1.32], &[1.0], &[]).unwrap();
        assert_eq!(v, [0.0, -1.32, 0.0]);
    }

    #[test]
    fn random_coefficient_cancels_at_share_point() {
        let spec = ModelSpec::new(vec![ParameterDef::random("w", Level::Minor, "weekend", MixingDistribution::Normal)]);
        let model = CompiledModel::new(&spec, &names(&["weekend"])).unwrap();
        let v = systematic_utility(&model, &[-1.91, 2.54], &[1.0], &[0.752]).unwrap();
        assert!(v[1].abs() < 1e-3, "{v:?}");
        assert_eq!((v[0], v[2]), (0.0, 0.0));
    }

    #[test]
    fn mnl_examples() {
        let p = mnl_probabilities(&[0.0; 3]);
        for i in 0..3 {
            assert!((p[i] - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = mnl_probabilities(&[2f64.ln(), 0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15 && (p[2] - 0.25).abs() < 1e-15);
        // softmax(1, 2, 3) evaluated directly
        let e: Vec<f64> = [1f64, 2.0, 3.0].iter().map(|v| v.exp()).collect();
        let s: f64 = e.iter().sum();
        let p = mnl_probabilities(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            assert!((p[i] - e[i] / s).abs() < 1e-15);
        }
        assert!((p[0] - 0.09003).abs() < 1e-5 && (p[1] - 0.24473).abs() < 1e-5 && (p[2] - 0.66524).abs() < 1e-5);
    }

    #[test]
    fn mnl_survives_huge_utilities() {
        let p = mnl_probabilities(&[1000.0, 999.0, -1000.0]);
        assert!(p.0.iter().all(|v| v.is_finite()));
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_average() {
        let spec = ModelSpec::new(vec![ParameterDef::random("r", Level::Major, "x", MixingDistribution::Normal)]);
        let model = CompiledModel::new(&spec, &names(&["x"])).unwrap();
        let z = [-1.0, 1.0];
        let p = simulated_probabilities(&model, &[0.0, 1.0], &[1.0], ObsDraws::new(&z, 1)).unwrap();
        let a = mnl_probabilities(&[-1.0, 0.0, 0.0]);
        let b = mnl_probabilities(&[1.0, 0.0, 0.0]);
        for i in 0..3 {
            assert!((p[i] - 0.5 * (a[i] + b[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn random_model_without_draws_is_an_error() {
        let spec = ModelSpec::new(vec![ParameterDef::random("r", Level::Major, "x", MixingDistribution::Normal)]);
        let model = CompiledModel::new(&spec, &names(&["x"])).unwrap();
        assert!(simulated_probabilities(&model, &[0.0, 1.0], &[1.0], ObsDraws::new(&[], 1)).is_err());
    }

    #[test]
    fn null_ll() {
        assert!((null_log_likelihood(10, 3).unwrap() + 10.0 * 3f64.ln()).abs() < 1e-12);
        assert!(null_log_likelihood(0, 3).is_err());
        assert!(null_log_likelihood(5, 1).is_err());
    }

    #[test]
    fn uniform_model_log_likelihood() {
        let obs: Vec<ChoiceObservation> = (0..7)
            .map(|i| ChoiceObservation {
                chosen: Level::from_index(i % 3).unwrap(),
                covariates: vec![(i % 2) as f64],
            })
            .collect();
        let ds = Dataset::new(Stratum::Normal, names(&["x"]), vec![], obs).unwrap();
        let spec = ModelSpec::new(vec![ParameterDef::fixed("b", Level::Minor, "x")]);
        let model = CompiledModel::for_dataset(&spec, &ds).unwrap();
        let ll = log_likelihood(&model, &[0.0], &ds, &DrawMatrix::empty(ds.len())).unwrap();
        assert!((ll + 7.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn absent_variable_contributes_zero_score() {
        let obs = vec![ChoiceObservation { chosen: Level::Major, covariates: vec![0.0, 1.0] }];
        let ds = Dataset::new(Stratum::Normal, names(&["x", "y"]), vec![], obs).unwrap();
        let spec = ModelSpec::new(vec![
            ParameterDef::fixed("bx", Level::Major, "x"),
            ParameterDef::random("ry", Level::Minor, "x", MixingDistribution::Normal),
            ParameterDef::fixed("by", Level::Major, "y"),
        ]);
        let model = CompiledModel::for_dataset(&spec, &ds).unwrap();
        let draws = crate::halton::build_draws(1, 10, 1, 0).unwrap();
        let g = score(&model, &[0.3, -0.2, 0.5, 0.1], &ds, &draws).unwrap();
        assert_eq!(&g[..3], &[0.0, 0.0, 0.0]);
        assert!(g[3] != 0.0);
    }

    #[test]
    fn underflow_is_reported_with_index() {
        let obs = vec![
            ChoiceObservation { chosen: Level::None, covariates: vec![0.0] },
            ChoiceObservation { chosen: Level::None, covariates: vec![1.0] },
        ];
        let ds = Dataset::new(Stratum::Normal, names(&["x"]), vec![], obs).unwrap();
        let spec = ModelSpec::new(vec![ParameterDef::fixed("b", Level::Major, "x")]);
        let model = CompiledModel::for_dataset(&spec, &ds).unwrap();
        let err = log_likelihood(&model, &[1000.0], &ds, &DrawMatrix::empty(2)).unwrap_err();
        assert!(matches!(err, Error::ZeroProbability { observation: 1 }));
    }
}
