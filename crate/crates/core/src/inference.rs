//! Marginal effects of indicators, random-parameter shares, likelihood-ratio
//! tests and the chi-square tail.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::data::{Dataset, Stratum};
use crate::error::{Error, Result};
use crate::estimate::{fit_only, EstimationOptions, EstimationResult};
use crate::halton::DrawMatrix;
use crate::level::N_LEVELS;
use crate::likelihood::{simulated_probabilities, CompiledModel};
use crate::model::ModelSpec;
use crate::special::normal_cdf;

/// Largest negative LR statistic treated as rounding noise.
pub const LR_NOISE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffect {
    pub variable: String,
    /// Average discrete change per level, `[major, minor, none]`.
    pub effects: [f64; N_LEVELS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffectsTable {
    pub rows: Vec<MarginalEffect>,
}

impl MarginalEffectsTable {
    pub fn get(&self, variable: &str) -> Option<&[f64; N_LEVELS]> {
        self.rows.iter().find(|r| r.variable == variable).map(|r| &r.effects)
    }
}

/// Covariate vectors with indicator `column` forced to 1 and to 0.
///
/// Switching on clears the rest of its exclusive group. Switching off keeps
/// the observation's other indicators, except that an observation which had
/// the indicator set moves to the group's reference category.
pub fn toggled_covariates(dataset: &Dataset, variable: &str, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let column = dataset
        .column(variable)
        .ok_or_else(|| Error::domain(format!("variable '{variable}' is not in the dataset")))?;
    let group = dataset.group_of(variable);
    let mut on = x.to_vec();
    let mut off = x.to_vec();
    on[column] = 1.0;
    off[column] = 0.0;
    if let Some(g) = group {
        for m in &g.members {
            if m != variable {
                on[dataset.column(m).expect("group member")] = 0.0;
            }
        }
        if x[column] == 1.0 {
            if let Some(reference) = g.reference_for(variable) {
                off[dataset.column(reference).expect("group member")] = 1.0;
            }
        }
    }
    Ok((on, off))
}

/// Sample-averaged discrete-change effects at `theta`, integrating random
/// parameters over the same draws used in estimation.
///
/// `variables` defaults to every non-constant variable of the spec.
pub fn marginal_effects(
    spec: &ModelSpec,
    theta: &[f64],
    dataset: &Dataset,
    draws: &DrawMatrix,
    variables: Option<&[String]>,
) -> Result<MarginalEffectsTable> {
    if dataset.is_empty() {
        return Err(Error::Empty);
    }
    let model = CompiledModel::for_dataset(spec, dataset)?;
    let spec_vars = spec.variables();
    let wanted: Vec<String> = match variables {
        Some(list) => {
            for v in list {
                if !spec_vars.contains(&v.as_str()) {
                    return Err(Error::domain(format!("variable '{v}' is not in the specification")));
                }
            }
            list.to_vec()
        }
        None => spec_vars.iter().map(|s| s.to_string()).collect(),
    };
    let n = dataset.len();
    let obs = dataset.observations();
    let mut rows = Vec::with_capacity(wanted.len());
    for variable in wanted {
        let partials: Vec<[f64; N_LEVELS]> = (0..n.div_ceil(256))
            .into_par_iter()
            .map(|c| {
                let mut acc = [0.0; N_LEVELS];
                for (i, o) in obs.iter().enumerate().take(((c + 1) * 256).min(n)).skip(c * 256) {
                    let (on, off) = toggled_covariates(dataset, &variable, &o.covariates)?;
                    let d = if model.n_random() == 0 {
                        crate::halton::ObsDraws::new(&[], 0)
                    } else {
                        draws.for_observation(i)
                    };
                    let p1 = simulated_probabilities(&model, theta, &on, d)?;
                    let p0 = simulated_probabilities(&model, theta, &off, d)?;
                    for l in 0..N_LEVELS {
                        acc[l] += p1[l] - p0[l];
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut effects = [0.0; N_LEVELS];
        for p in &partials {
            for l in 0..N_LEVELS {
                effects[l] += p[l];
            }
        }
        rows.push(MarginalEffect {
            variable,
            effects: effects.map(|e| e / n as f64),
        });
    }
    Ok(MarginalEffectsTable { rows })
}

/// Marginal effects at an estimation result, rebuilding its draws.
pub fn marginal_effects_at(result: &EstimationResult, dataset: &Dataset) -> Result<MarginalEffectsTable> {
    let draws = crate::estimate::draws_for(&result.spec, dataset, &result.options)?;
    marginal_effects(&result.spec, result.theta_hat.as_slice(), dataset, &draws, None)
}

/// Share of a normal random coefficient lying below zero, `Φ(-μ/σ)`.
pub fn share_below_zero(mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("spread must be positive, got {sigma}")));
    }
    Ok(normal_cdf(-mu / sigma))
}

pub fn share_above_zero(mu: f64, sigma: f64) -> Result<f64> {
    share_below_zero(-mu, sigma)
}

/// Chi-square upper tail, the regularized upper incomplete gamma
/// `Q(df/2, x/2)`.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64> {
    if df < 1 || !(x >= 0.0) || x.is_infinite() {
        return Err(Error::domain(format!("chi-square tail needs x >= 0 and df >= 1, got ({x}, {df})")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrKind {
    PooledVsStrata,
    Transferability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTestResult {
    pub kind: LrKind,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

/// p-value as printed in reports.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "< 0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

impl fmt::Display for LrTestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}, df = {} (p {})", self.statistic, self.df, {
            let p = format_p(self.p_value);
            if p.starts_with('<') { p } else { format!("= {p}") }
        })
    }
}

fn lr_result(kind: LrKind, statistic: f64, df: u32, context: &str) -> Result<LrTestResult> {
    if df < 1 {
        return Err(Error::domain("likelihood ratio test needs df >= 1"));
    }
    if statistic.is_nan() {
        return Err(Error::NonFinite("likelihood ratio statistic".into()));
    }
    if statistic < -LR_NOISE {
        return Err(Error::NegativeStatistic {
            statistic,
            context: context.to_string(),
        });
    }
    let statistic = statistic.max(0.0);
    Ok(LrTestResult {
        kind,
        statistic,
        df,
        p_value: chi_square_sf(statistic, df)?,
    })
}

/// `-2 [LL(full) - Σ LL(stratum)]`.
pub fn lr_pooled_test(ll_full: f64, ll_strata: &[f64], df: u32) -> Result<LrTestResult> {
    let statistic = -2.0 * (ll_full - ll_strata.iter().sum::<f64>());
    lr_result(
        LrKind::PooledVsStrata,
        statistic,
        df,
        "strata fit worse than pooled: specification mismatch",
    )
}

/// Parameters of the strata models minus those of the pooled model.
pub fn pooled_df(full: &ModelSpec, strata: &[&ModelSpec]) -> Result<u32> {
    let total: usize = strata.iter().map(|s| s.n_parameters()).sum();
    total
        .checked_sub(full.n_parameters())
        .filter(|&d| d >= 1)
        .map(|d| d as u32)
        .ok_or_else(|| Error::domain("strata models must have more parameters than the pooled model"))
}

/// `-2 [LL(a on b's data) - LL(b)]`, compared against the destination
/// stratum's own converged fit.
pub fn lr_transferability(ll_a_on_b_data: f64, ll_b: f64, df: u32) -> Result<LrTestResult> {
    let statistic = -2.0 * (ll_a_on_b_data - ll_b);
    lr_result(
        LrKind::Transferability,
        statistic,
        df,
        "foreign specification fits better than the stratum's own model",
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCell {
    /// Stratum whose specification is applied.
    pub model: Stratum,
    /// Stratum whose data it is estimated on.
    pub data: Stratum,
    pub ll_model_on_data: f64,
    pub ll_data_own: f64,
    pub converged: bool,
    pub test: Option<LrTestResult>,
    pub error: Option<String>,
}

/// All ordered pairs (a, b), a ≠ b: re-estimates a's specification on b's
/// data and tests it against b's own fit. `own` holds each stratum's own
/// estimation result, in the same order as `strata`. Only the maximised
/// log-likelihood is needed, so no covariance is computed for these fits.
pub fn transferability_matrix(
    strata: &[(Stratum, &ModelSpec, &Dataset)],
    own: &[&EstimationResult],
    options: &EstimationOptions,
) -> Result<Vec<TransferCell>> {
    if own.len() != strata.len() {
        return Err(Error::Dimension {
            what: "own estimation results",
            expected: strata.len(),
            actual: own.len(),
        });
    }
    let mut cells = Vec::new();
    for (a, spec_a, _) in strata {
        for (j, (b, _, data_b)) in strata.iter().enumerate() {
            if a == b {
                continue;
            }
            let fit = fit_only(spec_a, data_b, options)?;
            let ll_b = own[j].ll_converged;
            let df = spec_a.n_parameters() as u32;
            let (test, error) = match lr_transferability(fit.ll_converged, ll_b, df) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            cells.push(TransferCell {
                model: *a,
                data: *b,
                ll_model_on_data: fit.ll_converged,
                ll_data_own: ll_b,
                converged: fit.converged,
                test,
                error,
            });
        }
    }
    Ok(cells)
}
