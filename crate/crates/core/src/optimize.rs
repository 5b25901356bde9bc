//! Monotone gradient ascent: limited-memory quasi-Newton directions with an
//! Armijo backtracking line search.
//!
//! Every accepted step satisfies `f(x + t·d) ≥ f(x) + c·t·∇f·d` with `c > 0`
//! and an ascent direction `d`, so the objective trace never decreases.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{MrdError, Result};

/// Search direction used by [`maximize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Plain gradient.
    Steepest,
    /// L-BFGS two-loop recursion over the last `memory` steps.
    Lbfgs { memory: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iterations: usize,
    /// Relative objective change counted as "no progress".
    pub tolerance: f64,
    /// Consecutive no-progress iterations needed to stop.
    pub patience: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    /// Leading iterations that update only the latent distribution.
    pub warmup_iterations: usize,
    /// Inducing points per view; `None` means `min(N, 20)`.
    pub num_inducing: Option<usize>,
    pub direction: Direction,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-7,
            patience: 5,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            warmup_iterations: 100,
            num_inducing: None,
            direction: Direction::Lbfgs { memory: 10 },
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) {
            return Err(MrdError::invalid("tolerance must be non-negative"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(MrdError::invalid("armijo constant must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(MrdError::invalid("backtrack factor must lie in (0, 1)"));
        }
        if let Direction::Lbfgs { memory: 0 } = self.direction {
            return Err(MrdError::invalid("L-BFGS memory must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// `(iteration, objective)` after the initial point and every accepted step.
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
}

const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `f` from `x0`. `f` returns the objective and its gradient.
///
/// Coordinates with `frozen[i] == true` are held fixed. Iteration numbers in
/// the trace start at `first_iteration`, so phases can be chained.
pub fn maximize<F>(
    mut f: F,
    x0: Vec<f64>,
    frozen: Option<&[bool]>,
    config: &TrainConfig,
    max_iterations: usize,
    first_iteration: usize,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    let mask = |g: &mut Vec<f64>| {
        if let Some(fr) = frozen {
            for (gi, &fz) in g.iter_mut().zip(fr) {
                if fz {
                    *gi = 0.0;
                }
            }
        }
    };

    let mut x = x0;
    let (mut value, mut grad) = f(&x)?;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(MrdError::Training {
            iteration: first_iteration,
            reason: "non-finite objective at the initial point".into(),
            trace: Vec::new(),
        });
    }
    mask(&mut grad);
    let mut trace = vec![(first_iteration, value)];
    let memory = match config.direction {
        Direction::Steepest => 0,
        Direction::Lbfgs { memory } => memory,
    };
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stall = 0;
    let mut converged = false;

    for it in 1..=max_iterations {
        let gnorm = dot(&grad, &grad).sqrt();
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        let mut fresh = history.is_empty();
        let mut dir = lbfgs_direction(&grad, &history);
        if dot(&dir, &grad) <= 0.0 {
            history.clear();
            dir = grad.clone();
            fresh = true;
        }
        mask(&mut dir);

        let mut accepted = None;
        for attempt in 0..2 {
            let slope = dot(&grad, &dir);
            let mut step = if fresh { (1.0 / gnorm).min(1.0) } else { 1.0 };
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
                if let Ok((v, mut g)) = f(&trial) {
                    if v.is_finite()
                        && g.iter().all(|gi| gi.is_finite())
                        && v >= value + config.armijo_c * step * slope
                    {
                        mask(&mut g);
                        accepted = Some((trial, v, g));
                        break;
                    }
                }
                step *= config.backtrack_factor;
            }
            if accepted.is_some() || attempt == 1 || fresh {
                break;
            }
            // Quasi-Newton direction failed; retry once along the gradient.
            history.clear();
            dir = grad.clone();
            mask(&mut dir);
            fresh = true;
        }

        let Some((x_new, v_new, g_new)) = accepted else {
            converged = true;
            break;
        };

        if memory > 0 {
            // Curvature pair for the minimization of -f.
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(&g_new).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                if history.len() == memory {
                    history.pop_front();
                }
                history.push_back((s, y, sy));
            }
        }

        let rel = (v_new - value).abs() / value.abs().max(1.0);
        x = x_new;
        value = v_new;
        grad = g_new;
        trace.push((first_iteration + it, value));
        if rel < config.tolerance {
            stall += 1;
            if stall >= config.patience {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }

    Ok(OptimResult {
        x,
        value,
        trace,
        converged,
    })
}

/// Two-loop recursion; returns an ascent direction `H·∇f`.
fn lbfgs_direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut d = grad.to_vec();
    if history.is_empty() {
        return d;
    }
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, sy) in history.iter().rev() {
        let a = dot(s, &d) / sy;
        for (di, yi) in d.iter_mut().zip(y) {
            *di -= a * yi;
        }
        alphas.push(a);
    }
    let (_, y, sy) = history.back().expect("non-empty");
    let gamma = sy / dot(y, y);
    for di in d.iter_mut() {
        *di *= gamma;
    }
    for ((s, y, sy), a) in history.iter().zip(alphas.iter().rev()) {
        let b = dot(y, &d) / sy;
        for (di, si) in d.iter_mut().zip(s) {
            *di += (a - b) * si;
        }
    }
    d
}
