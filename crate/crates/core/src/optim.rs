//! Projected gradient ascent over the zero-sum box
//! `Θ = {θ ∈ [−b, b]^n : Σθ = 0}`.
//!
//! Steps are accepted by an Armijo test along the projection arc. The first
//! trial step is 1; later trial steps use the Barzilai–Borwein ratio of the
//! last accepted move, which keeps iteration counts low on badly scaled
//! problems without giving up the monotone ascent guarantee.

use crate::error::{Error, Result};
use crate::sampler::project_zero_sum_box;

const ARMIJO_SLOPE: f64 = 1e-4;
const CONTRACTION: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const MIN_STEP: f64 = 1e-12;
const MAX_STEP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    /// Stop once `‖P(θ + ∇f) − θ‖` falls to this value.
    pub tol_grad: f64,
    pub max_iter: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            tol_grad: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Norm of the projected gradient step at `x`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn projected_step_norm(x: &[f64], g: &[f64], b: f64) -> f64 {
    let trial: Vec<f64> = x.iter().zip(g).map(|(a, d)| a + d).collect();
    let p = project_zero_sum_box(&trial, b);
    p.iter()
        .zip(x)
        .map(|(a, c)| (a - c).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Maximizes `f` over Θ starting from the projection of `x0`.
///
/// `f` returns the objective and its gradient.
pub fn maximize<F>(mut f: F, x0: &[f64], b: f64, opts: OptimOptions) -> Result<OptimOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(opts.tol_grad > 0.0) || opts.max_iter == 0 {
        return Err(Error::validation(
            "tol_grad must be positive and max_iter at least 1",
        ));
    }
    let mut x = project_zero_sum_box(x0, b);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return Err(Error::Numerical(
            "objective is not finite at the starting point".into(),
        ));
    }
    let mut step = 1.0;
    let mut iterations = 0;
    loop {
        let grad_norm = projected_step_norm(&x, &g, b);
        if grad_norm <= opts.tol_grad {
            return Ok(OptimOutcome {
                x,
                value: fx,
                grad_norm,
                iterations,
                converged: true,
            });
        }
        if iterations >= opts.max_iter {
            return Ok(OptimOutcome {
                x,
                value: fx,
                grad_norm,
                iterations,
                converged: false,
            });
        }
        iterations += 1;

        let slack = 4.0 * f64::EPSILON * (1.0 + fx.abs());
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a + alpha * d).collect();
            let xn = project_zero_sum_box(&trial, b);
            let slope: f64 = g
                .iter()
                .zip(xn.iter().zip(&x))
                .map(|(d, (a, c))| d * (a - c))
                .sum();
            let (fn_, gn) = f(&xn)?;
            if fn_.is_finite() && fn_ >= fx + ARMIJO_SLOPE * slope - slack {
                accepted = Some((xn, fn_, gn));
                break;
            }
            alpha *= CONTRACTION;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // No ascent possible at machine precision.
            return Ok(OptimOutcome {
                x,
                value: fx,
                grad_norm,
                iterations,
                converged: false,
            });
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, c)| a - c).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s
            .iter()
            .zip(gn.iter().zip(&g))
            .map(|(a, (p, q))| a * (p - q))
            .sum();
        step = if sy < 0.0 && ss > 0.0 {
            (ss / -sy).clamp(MIN_STEP, MAX_STEP)
        } else {
            (alpha * 2.0).min(MAX_STEP)
        };
        x = xn;
        fx = fn_;
        g = gn;
    }
}
