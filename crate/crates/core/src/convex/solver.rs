//! Proximal gradient with backtracking (optionally accelerated with restart).

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::linalg::{dist, dot};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepRule {
    /// Step `1/L` with a declared Lipschitz constant of the smooth gradient.
    Fixed { lipschitz: f64 },
    /// Armijo-type backtracking shrinking the step by `factor`.
    Backtracking { factor: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub step: StepRule,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Nesterov momentum with function-value restart.
    #[serde(default)]
    pub accelerated: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            step: StepRule::Backtracking { factor: 0.5 },
            max_iterations: 10_000,
            tolerance: 1e-9,
            accelerated: false,
        }
    }
}

impl SolverSettings {
    pub fn accelerated(mut self) -> Self {
        self.accelerated = true;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, k: usize) -> Self {
        self.max_iterations = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return arg("solver tolerance must be positive");
        }
        if self.max_iterations == 0 {
            return arg("solver needs at least one iteration");
        }
        match self.step {
            StepRule::Fixed { lipschitz } if !(lipschitz > 0.0 && lipschitz.is_finite()) => {
                arg("Lipschitz constant must be positive and finite")
            }
            StepRule::Backtracking { factor } if !(factor > 0.0 && factor < 1.0) => {
                arg("backtracking factor must lie in (0, 1)")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub minimizer: Vec<f64>,
    pub objective: f64,
    /// Gradient-mapping norm `‖x − prox_η(x − η∇f(x))‖/η` of the last step.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `min f(x) + h(x)` with `f` smooth and `h` prox-friendly.
pub trait Composite {
    fn smooth(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn nonsmooth(&self, x: &[f64]) -> f64;
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>>;
    /// Initial step for backtracking.
    fn step_hint(&self) -> f64 {
        1.0
    }
    fn objective(&self, x: &[f64]) -> f64 {
        self.smooth(x) + self.nonsmooth(x)
    }
}

struct Step {
    next: Vec<f64>,
    eta: f64,
    residual: f64,
}

fn prox_step<P: Composite + ?Sized>(p: &P, y: &[f64], fy: f64, gy: &[f64], eta0: f64, rule: StepRule) -> Result<Step> {
    let mut eta = eta0;
    let (shrink, adaptive) = match rule {
        StepRule::Fixed { .. } => (1.0, false),
        StepRule::Backtracking { factor } => (factor, true),
    };
    for _ in 0..200 {
        let v: Vec<f64> = y.iter().zip(gy).map(|(a, g)| a - eta * g).collect();
        let next = p.prox(&v, eta)?;
        let d: Vec<f64> = next.iter().zip(y).map(|(a, b)| a - b).collect();
        let dd = dot(&d, &d);
        let accept = !adaptive || {
            let model = fy + dot(gy, &d) + dd / (2.0 * eta);
            let fnext = p.smooth(&next);
            fnext <= model
                || (fnext <= model + 1e-14 * fy.abs().max(1.0) && {
                    // Within rounding of the model: fall back to a local
                    // Lipschitz test on gradient differences.
                    let gn = p.gradient(&next);
                    let curv: f64 = gn.iter().zip(gy).zip(&d).map(|((a, b), c)| (a - b) * c).sum();
                    curv <= dd / eta
                })
        };
        if accept {
            return Ok(Step { residual: dd.sqrt() / eta, next, eta });
        }
        eta *= shrink;
    }
    let v: Vec<f64> = y.iter().zip(gy).map(|(a, g)| a - eta * g).collect();
    let next = p.prox(&v, eta)?;
    let residual = dist(&next, y) / eta;
    Ok(Step { next, eta, residual })
}

pub fn minimize<P: Composite + ?Sized>(p: &P, x0: &[f64], settings: &SolverSettings) -> Result<SolveResult> {
    settings.validate()?;
    let mut eta = match settings.step {
        StepRule::Fixed { lipschitz } => 1.0 / lipschitz,
        StepRule::Backtracking { .. } => p.step_hint(),
    };
    let grow = match settings.step {
        StepRule::Fixed { .. } => 1.0,
        StepRule::Backtracking { factor } => 1.0 / factor,
    };
    // Feasible start.
    let mut x = p.prox(x0, 1e-12 * eta.max(1e-300))?;
    let mut fx_total = p.objective(&x);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        iterations += 1;
        let fy = p.smooth(&y);
        let gy = p.gradient(&y);
        let step = prox_step(p, &y, fy, &gy, eta, settings.step)?;
        residual = step.residual;
        let f_next = p.objective(&step.next);
        if settings.accelerated {
            if f_next > fx_total && y != x {
                // Restart momentum from the last accepted iterate.
                y = x.clone();
                t = 1.0;
                eta = step.eta;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = step.next.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
            t = t_next;
        } else {
            y = step.next.clone();
        }
        x = step.next;
        fx_total = f_next;
        eta = step.eta * grow;
        if residual <= settings.tolerance {
            break;
        }
    }
    Ok(SolveResult {
        objective: fx_total,
        converged: residual <= settings.tolerance,
        minimizer: x,
        residual,
        iterations,
    })
}
