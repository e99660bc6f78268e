//! BFGS ascent with a backtracking Armijo line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when the gradient max-norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step's max-norm falls below this.
    pub step_tolerance: f64,
    pub armijo: f64,
    pub shrink: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            step_tolerance: 1e-10,
            armijo: 1e-4,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    Step,
    /// The predicted gain of a full quasi-Newton step is below the rounding
    /// level of the objective; no representable improvement remains.
    ObjectiveResolution,
    LineSearchFailed,
    IterationLimit,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::Gradient | Termination::Step | Termination::ObjectiveResolution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub gradient_max: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Maximises `f`, which returns the objective and its gradient.
///
/// Evaluation errors inside the line search count as rejected trial points;
/// an error at the start point is returned.
pub fn maximize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut value, g) = f(x.as_slice())?;
    if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("objective at start point is {value}")));
    }
    let mut grad = DVector::from_vec(g);
    // inverse Hessian approximation of -f
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        value,
        gradient_max: max_abs(&grad),
        step_size: 0.0,
    }];

    let finish = |x: DVector<f64>, value, grad: DVector<f64>, iterations, termination, trace| BfgsOutcome {
        x: x.as_slice().to_vec(),
        value,
        gradient: grad.as_slice().to_vec(),
        iterations,
        termination,
        trace,
    };

    for iter in 1..=opts.max_iterations {
        if max_abs(&grad) < opts.gradient_tolerance {
            return Ok(finish(x, value, grad, iter - 1, Termination::Gradient, trace));
        }
        let mut dir = &h_inv * &grad;
        let mut slope = grad.dot(&dir);
        if !(slope > 0.0) {
            h_inv = DMatrix::identity(n, n);
            scaled = false;
            dir = grad.clone();
            slope = grad.dot(&dir);
        }
        let mut alpha = if scaled { 1.0 } else { (1.0 / max_abs(&dir)).min(1.0) };

        let accepted = loop {
            let step = &dir * alpha;
            if max_abs(&step) < opts.step_tolerance {
                break None;
            }
            let trial = &x + &step;
            if let Ok((v, g)) = f(trial.as_slice()) {
                if v.is_finite() && g.iter().all(|e| e.is_finite()) && v >= value + opts.armijo * alpha * slope {
                    break Some((trial, step, v, DVector::from_vec(g)));
                }
            }
            alpha *= opts.shrink;
        };

        let Some((x_new, step, v_new, g_new)) = accepted else {
            let predicted_gain = 0.5 * slope;
            let resolution = 64.0 * f64::EPSILON * value.abs().max(1.0);
            let termination = if predicted_gain <= resolution {
                Termination::ObjectiveResolution
            } else {
                Termination::LineSearchFailed
            };
            return Ok(finish(x, value, grad, iter - 1, termination, trace));
        };

        // curvature pair for -f
        let y = &grad - &g_new;
        let sy = step.dot(&y);
        if sy > 1e-12 * step.norm() * y.norm() {
            if !scaled {
                h_inv = DMatrix::identity(n, n) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(s yᵀH + H y sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            h_inv -= (&step * hy.transpose() + &hy * step.transpose()) * rho;
            h_inv += (&step * step.transpose()) * (rho * rho * yhy + rho);
        }

        let step_max = max_abs(&step);
        x = x_new;
        value = v_new;
        grad = g_new;
        trace.push(TraceEntry {
            iteration: iter,
            value,
            gradient_max: max_abs(&grad),
            step_size: step_max,
        });
        log::debug!("iter {iter}: ll={value:.6} |g|={:.3e} step={step_max:.3e}", max_abs(&grad));
        if max_abs(&grad) < opts.gradient_tolerance {
            return Ok(finish(x, value, grad, iter, Termination::Gradient, trace));
        }
        if step_max < opts.step_tolerance {
            return Ok(finish(x, value, grad, iter, Termination::Step, trace));
        }
    }
    Ok(finish(x, value, grad, opts.max_iterations, Termination::IterationLimit, trace))
}
