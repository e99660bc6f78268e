//! Maximum simulated likelihood estimation and its standard errors.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::halton::{build_draws, DrawMatrix};
use crate::likelihood::{log_likelihood_and_score, null_log_likelihood, observation_scores, CompiledModel};
use crate::model::{parameter_layout, ModelSpec, ParameterVector, SlotRole};
use crate::optim::{maximize, BfgsOptions, Termination, TraceEntry};
use crate::special::normal_sf;

/// |t| for a two-tailed 90% test under the normal approximation.
pub const RETENTION_T: f64 = 1.645;

/// Starting value of every spread slot; σ = 0 is a stationary point.
pub const START_SPREAD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    #[default]
    NumericalHessian,
    Bhhh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationOptions {
    pub n_draws: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub covariance_method: CovarianceMethod,
    pub skip: u64,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            n_draws: 500,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            step_tolerance: 1e-10,
            covariance_method: CovarianceMethod::NumericalHessian,
            skip: crate::halton::DEFAULT_SKIP,
        }
    }
}

impl EstimationOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 || self.max_iterations == 0 {
            return Err(Error::domain("n_draws and max_iterations must be positive"));
        }
        if !(self.gradient_tolerance > 0.0) || !(self.step_tolerance > 0.0) {
            return Err(Error::domain("tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub spec: ModelSpec,
    pub parameter_names: Vec<String>,
    /// Estimates with every spread reported as |σ̂|.
    pub theta_hat: ParameterVector,
    pub covariance: Vec<Vec<f64>>,
    pub covariance_method: CovarianceMethod,
    pub std_errors: Vec<f64>,
    /// `None` where the standard error is zero.
    pub t_stats: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub retained: Vec<bool>,
    pub n_obs: usize,
    pub ll_start: f64,
    pub ll_zero: f64,
    pub ll_converged: f64,
    pub rho_squared: f64,
    pub gradient_max: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub options: EstimationOptions,
    pub fingerprint: String,
    pub trace: Vec<TraceEntry>,
}

impl EstimationResult {
    pub fn n_parameters(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.parameter_names.iter().position(|n| n == name)
    }
}

/// `1 - LL(β)/LL(0)`.
pub fn pseudo_r2(ll_zero: f64, ll_converged: f64) -> Result<f64> {
    if ll_zero == 0.0 || !(ll_zero < 0.0) {
        return Err(Error::domain(format!("log-likelihood at zero must be negative, got {ll_zero}")));
    }
    Ok(1.0 - ll_converged / ll_zero)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldStats {
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    /// `|t| ≥ 1.645`.
    pub retained: Vec<bool>,
}

/// Two-sided normal p-value of a t statistic.
pub fn two_sided_p(t: f64) -> f64 {
    2.0 * normal_sf(t.abs())
}

pub fn wald_stats(theta: &[f64], covariance: &[Vec<f64>]) -> Result<WaldStats> {
    if covariance.len() != theta.len() {
        return Err(Error::Dimension {
            what: "covariance rows",
            expected: theta.len(),
            actual: covariance.len(),
        });
    }
    let mut out = WaldStats {
        std_errors: Vec::with_capacity(theta.len()),
        t_stats: Vec::with_capacity(theta.len()),
        p_values: Vec::with_capacity(theta.len()),
        retained: Vec::with_capacity(theta.len()),
    };
    for (k, (&b, row)) in theta.iter().zip(covariance).enumerate() {
        let var = row[k];
        if var < 0.0 || var.is_nan() {
            return Err(Error::Covariance(format!("negative variance {var} for slot {k}")));
        }
        let se = var.sqrt();
        out.std_errors.push(se);
        if se > 0.0 {
            let t = b / se;
            out.t_stats.push(Some(t));
            out.p_values.push(Some(two_sided_p(t)));
            out.retained.push(t.abs() >= RETENTION_T);
        } else {
            out.t_stats.push(None);
            out.p_values.push(None);
            out.retained.push(false);
        }
    }
    Ok(out)
}

/// Central-difference Hessian of a function given through its gradient,
/// with steps `max(1e-4, 1e-4 |θ_k|)`; the result is symmetrised.
pub fn numerical_hessian<G>(mut grad: G, theta: &[f64]) -> Result<DMatrix<f64>>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let k = theta.len();
    let mut h = DMatrix::zeros(k, k);
    let mut point = theta.to_vec();
    for j in 0..k {
        let step = (1e-4 * theta[j].abs()).max(1e-4);
        point[j] = theta[j] + step;
        let up = grad(&point)?;
        point[j] = theta[j] - step;
        let down = grad(&point)?;
        point[j] = theta[j];
        for i in 0..k {
            h[(i, j)] = (up[i] - down[i]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Inverse of a symmetric positive-definite information matrix.
pub fn invert_information(info: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(info.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * max.max(f64::MIN_POSITIVE)) {
        return Err(Error::Covariance(format!(
            "{what} is singular or indefinite: smallest eigenvalue {min:.6e} (largest {max:.6e})"
        )));
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    Ok((&inv + inv.transpose()) * 0.5)
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Covariance of the estimates at `theta_hat`.
pub fn compute_covariance(
    model: &CompiledModel,
    theta_hat: &[f64],
    dataset: &Dataset,
    draws: &DrawMatrix,
    method: CovarianceMethod,
) -> Result<Vec<Vec<f64>>> {
    let k = theta_hat.len();
    let info = match method {
        CovarianceMethod::NumericalHessian => {
            let h = numerical_hessian(|t| Ok(log_likelihood_and_score(model, t, dataset, draws)?.1), theta_hat)?;
            -h
        }
        CovarianceMethod::Bhhh => {
            let scores = observation_scores(model, theta_hat, dataset, draws)?;
            let mut info = DMatrix::zeros(k, k);
            for g in &scores {
                for i in 0..k {
                    for j in 0..k {
                        info[(i, j)] += g[i] * g[j];
                    }
                }
            }
            info
        }
    };
    let what = match method {
        CovarianceMethod::NumericalHessian => "negative Hessian",
        CovarianceMethod::Bhhh => "outer-product information",
    };
    Ok(to_rows(&invert_information(&info, what)?))
}

fn fingerprint(spec: &ModelSpec, dataset: &Dataset, options: &EstimationOptions) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(spec).unwrap_or_default());
    h.update(serde_json::to_vec(options).unwrap_or_default());
    h.update(dataset.stratum.as_str().as_bytes());
    for name in dataset.indicator_names() {
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    for obs in dataset.observations() {
        h.update([obs.chosen.index() as u8]);
        for v in &obs.covariates {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Start point: zeros, with every spread slot at [`START_SPREAD`].
pub fn start_point(spec: &ModelSpec) -> Vec<f64> {
    parameter_layout(spec)
        .slots
        .iter()
        .map(|s| if s.role == SlotRole::Spread { START_SPREAD } else { 0.0 })
        .collect()
}

/// Draws for a dataset under the given options (empty for fixed-only models).
pub fn draws_for(spec: &ModelSpec, dataset: &Dataset, options: &EstimationOptions) -> Result<DrawMatrix> {
    if spec.n_random() == 0 || dataset.is_empty() {
        Ok(DrawMatrix::empty(dataset.len()))
    } else {
        build_draws(dataset.len(), options.n_draws, spec.n_random(), options.skip)
    }
}

/// Flips the sign of spread slots so that reported spreads are non-negative;
/// the covariance is transformed by the same sign matrix.
fn fold_spreads(spec: &ModelSpec, theta: &mut [f64], cov: &mut [Vec<f64>]) {
    let layout = parameter_layout(spec);
    let signs: Vec<f64> = layout
        .slots
        .iter()
        .zip(theta.iter())
        .map(|(s, &v)| if s.role == SlotRole::Spread && v.is_sign_negative() { -1.0 } else { 1.0 })
        .collect();
    for (v, s) in theta.iter_mut().zip(&signs) {
        *v *= s;
    }
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c *= signs[i] * signs[j];
        }
    }
}

/// Fits `spec` to `dataset` by maximum simulated likelihood.
///
/// If the requested covariance is unavailable (numerically singular negative
/// Hessian) the outer-product estimator is used instead and
/// `covariance_method` records which one was used.
pub fn estimate(spec: &ModelSpec, dataset: &Dataset, options: &EstimationOptions) -> Result<EstimationResult> {
    options.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty);
    }
    let model = CompiledModel::for_dataset(spec, dataset)?;
    let draws = draws_for(spec, dataset, options)?;
    estimate_with_draws(spec, &model, dataset, &draws, options)
}

/// Point estimate only: the maximised log-likelihood without any covariance.
/// Enough for likelihood ratio tests, and it never fails on a flat direction
/// such as a spread collapsing to zero.
#[derive(Debug, Clone)]
pub struct FitOnly {
    pub theta: Vec<f64>,
    pub ll_converged: f64,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
}

pub fn fit_only(spec: &ModelSpec, dataset: &Dataset, options: &EstimationOptions) -> Result<FitOnly> {
    options.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty);
    }
    let model = CompiledModel::for_dataset(spec, dataset)?;
    let draws = draws_for(spec, dataset, options)?;
    let outcome = maximize_for(spec, &model, dataset, &draws, options)?;
    Ok(FitOnly {
        theta: outcome.x,
        ll_converged: outcome.value,
        converged: outcome.termination.converged(),
        termination: outcome.termination,
        iterations: outcome.iterations,
    })
}

fn maximize_for(
    spec: &ModelSpec,
    model: &CompiledModel,
    dataset: &Dataset,
    draws: &DrawMatrix,
    options: &EstimationOptions,
) -> Result<crate::optim::BfgsOutcome> {
    let start = start_point(spec);
    let bfgs = BfgsOptions {
        max_iterations: options.max_iterations,
        gradient_tolerance: options.gradient_tolerance,
        step_tolerance: options.step_tolerance,
        ..BfgsOptions::default()
    };
    maximize(|t| log_likelihood_and_score(model, t, dataset, draws), &start, &bfgs)
}

pub fn estimate_with_draws(
    spec: &ModelSpec,
    model: &CompiledModel,
    dataset: &Dataset,
    draws: &DrawMatrix,
    options: &EstimationOptions,
) -> Result<EstimationResult> {
    let outcome = maximize_for(spec, model, dataset, draws, options)?;
    let ll_start = outcome.trace[0].value;
    let raw = outcome.x.clone();

    let (mut covariance, covariance_method) =
        match compute_covariance(model, &raw, dataset, draws, options.covariance_method) {
            Ok(c) => (c, options.covariance_method),
            Err(e) if options.covariance_method == CovarianceMethod::NumericalHessian => {
                log::warn!("{e}; falling back to the outer-product covariance");
                (compute_covariance(model, &raw, dataset, draws, CovarianceMethod::Bhhh)?, CovarianceMethod::Bhhh)
            }
            Err(e) => return Err(e),
        };
    let mut theta = raw;
    fold_spreads(spec, &mut theta, &mut covariance);
    let wald = wald_stats(&theta, &covariance)?;
    let ll_zero = null_log_likelihood(dataset.len(), crate::level::N_LEVELS)?;
    let ll_converged = outcome.value;
    let gradient_max = outcome.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    Ok(EstimationResult {
        spec: spec.clone(),
        parameter_names: parameter_layout(spec).names(),
        theta_hat: ParameterVector(theta),
        covariance,
        covariance_method,
        std_errors: wald.std_errors,
        t_stats: wald.t_stats,
        p_values: wald.p_values,
        retained: wald.retained,
        n_obs: dataset.len(),
        ll_start,
        ll_zero,
        ll_converged,
        rho_squared: pseudo_r2(ll_zero, ll_converged)?,
        gradient_max,
        iterations: outcome.iterations,
        converged: outcome.termination.converged(),
        termination: outcome.termination,
        options: options.clone(),
        fingerprint: fingerprint(spec, dataset, options),
        trace: outcome.trace,
    })
}
