//! Regularized least squares and empirical risk minimization.

use crate::convex::prox::{prox, prox_with_domain};
use crate::convex::solver::{minimize, Composite, SolveResult, SolverSettings};
use crate::convex::ConvexSet;
use crate::error::{arg, Error, Result};
use crate::linalg::{dist, dot};
use crate::model::family::DOMAIN_TOL;
use crate::model::{Dataset, Family, LinearFamily, Penalty, PopulationOracle, Sample, SmoothFamily};

struct LeastSquares<'a> {
    y: &'a [f64],
    penalty: &'a Penalty,
}

impl Composite for LeastSquares<'_> {
    fn smooth(&self, g: &[f64]) -> f64 {
        let n = self.y.len() as f64;
        self.y.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
    }
    fn gradient(&self, g: &[f64]) -> Vec<f64> {
        let n = self.y.len() as f64;
        g.iter().zip(self.y).map(|(a, b)| 2.0 * (a - b) / n).collect()
    }
    fn nonsmooth(&self, g: &[f64]) -> f64 {
        self.penalty.value(g)
    }
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>> {
        prox(self.penalty, v, eta)
    }
    fn step_hint(&self) -> f64 {
        self.y.len() as f64 / 2.0
    }
}

/// `ĝ = argmin ‖Y − g‖_n² + pen(g)`, started from `g_ref`.
pub fn solve_regularized_ls(y: &[f64], g_ref: &[f64], penalty: &Penalty, settings: &SolverSettings) -> Result<SolveResult> {
    if y.is_empty() {
        return arg("response vector is empty");
    }
    if g_ref.len() != y.len() {
        return arg("reference parameter and responses differ in length");
    }
    penalty.validate()?;
    minimize(&LeastSquares { y, penalty }, g_ref, settings)
}

/// Prox fixed-point gap at step `η = 1/L = n/2`:
/// `‖g − prox_{η pen}(g − η∇‖Y − g‖_n²)‖ / η`, zero exactly at the minimizer.
pub fn optimality_residual(y: &[f64], g: &[f64], penalty: &Penalty) -> Result<f64> {
    if y.len() != g.len() || y.is_empty() {
        return arg("candidate and responses differ in length");
    }
    let eta = y.len() as f64 / 2.0;
    // g − η·2(g − Y)/n = Y
    let p = prox(penalty, y, eta)?;
    Ok(dist(g, &p) / eta)
}

struct LinearErm<'a> {
    family: &'a LinearFamily,
    features: Vec<f64>,
    offset: f64,
    penalty: &'a Penalty,
    domain: &'a ConvexSet,
}

impl Composite for LinearErm<'_> {
    fn smooth(&self, g: &[f64]) -> f64 {
        self.offset - dot(g, &self.features) + 0.5 * self.family.hessian().quad(g)
    }
    fn gradient(&self, g: &[f64]) -> Vec<f64> {
        self.family
            .hessian()
            .apply(g)
            .iter()
            .zip(&self.features)
            .map(|(a, b)| a - b)
            .collect()
    }
    fn nonsmooth(&self, g: &[f64]) -> f64 {
        if !self.domain.contains(g, DOMAIN_TOL) {
            return f64::INFINITY;
        }
        self.penalty.value(g)
    }
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>> {
        prox_with_domain(self.penalty, self.domain, v, eta)
    }
    fn step_hint(&self) -> f64 {
        let l = self.family.hessian().max_eigen();
        if l > 0.0 {
            1.0 / l
        } else {
            1.0
        }
    }
}

struct SmoothErm<'a> {
    family: &'a SmoothFamily,
    data: &'a Dataset,
    penalty: &'a Penalty,
    domain: &'a ConvexSet,
}

impl Composite for SmoothErm<'_> {
    fn smooth(&self, g: &[f64]) -> f64 {
        let s: f64 = self.data.points().iter().map(|x| self.family.loss(g, x)).sum();
        s / self.data.len() as f64
    }
    fn gradient(&self, g: &[f64]) -> Vec<f64> {
        let d = g.len();
        let mut acc = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for x in self.data.points() {
            self.family.loss_gradient(g, x, &mut buf);
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
        }
        let n = self.data.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
    fn nonsmooth(&self, g: &[f64]) -> f64 {
        if !self.domain.contains(g, DOMAIN_TOL) {
            return f64::INFINITY;
        }
        self.penalty.value(g)
    }
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>> {
        prox_with_domain(self.penalty, self.domain, v, eta)
    }
}

/// Offset mean `P_n a` of a linear family, recovered from one evaluation.
fn linear_offset(family: &LinearFamily, data: &Dataset) -> f64 {
    let zero = vec![0.0; family.dim()];
    let s: f64 = data.points().iter().map(|x: &Sample| family.evaluate(&zero, x)).sum();
    s / data.len() as f64
}

/// `ĝ = argmin_g P_n f_g + pen(g)` over the family's domain.
pub fn solve_erm(
    family: &Family,
    penalty: &Penalty,
    data: &Dataset,
    _oracle: &PopulationOracle,
    settings: &SolverSettings,
) -> Result<SolveResult> {
    penalty.validate()?;
    match family {
        Family::Finite(f) => {
            let means = f.empirical_means(data)?;
            let mut best = (f64::INFINITY, 0);
            for (k, p) in f.params().iter().enumerate() {
                let obj = means[k] + penalty.value(p);
                if obj < best.0 {
                    best = (obj, k);
                }
            }
            Ok(SolveResult {
                minimizer: f.params()[best.1].clone(),
                objective: best.0,
                residual: 0.0,
                iterations: f.len(),
                converged: true,
            })
        }
        Family::Linear(f) => {
            let features = f.empirical_features(data);
            let offset = linear_offset(f, data);
            let domain = f.domain();
            let prob = LinearErm { family: f, features, offset, penalty, domain };
            // Closed-form or warm start from the quadratic model.
            let model = crate::model::functionals::tau_model(f, penalty)?;
            let v = f.process_vector(data);
            let start = match model.penalized_minimizer(&v, None) {
                Ok((u, _)) => u.iter().zip(f.reference()).map(|(a, b)| a + b).collect(),
                Err(_) => f.reference().to_vec(),
            };
            minimize(&prob, &start, settings)
        }
        Family::Smooth(f) => {
            if !f.is_convex() {
                return Err(Error::Unsupported("empirical risk is not declared convex for this family".into()));
            }
            let domain = family.domain();
            let start = family.reference().unwrap_or_else(|| vec![0.0; f.dim()]);
            minimize(&SmoothErm { family: f, data, penalty, domain: &domain }, &start, settings)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_examples() {
        let s = SolverSettings::default();
        let r = solve_regularized_ls(&[2.0, 4.0], &[0.0, 0.0], &Penalty::Zero, &s).unwrap();
        assert_eq!(r.minimizer, vec![2.0, 4.0]);
        let r = solve_regularized_ls(&[2.0, 4.0], &[0.0, 0.0], &Penalty::ridge_n(1.0, 2), &s).unwrap();
        assert!((r.minimizer[0] - 1.0).abs() < 1e-12 && (r.minimizer[1] - 2.0).abs() < 1e-12);
        assert!(r.converged && r.residual <= s.tolerance);
        let boxp = Penalty::indicator(ConvexSet::unit_box(2));
        let r = solve_regularized_ls(&[5.0, -3.0], &[0.5, 0.5], &boxp, &s).unwrap();
        assert_eq!(r.minimizer, vec![1.0, 0.0]);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(optimality_residual(&[1.0, 2.0], &[1.0, 2.0], &Penalty::Zero).unwrap(), 0.0);
        let r = optimality_residual(&[2.0, 4.0], &[2.0, 4.0], &Penalty::ridge_n(1.0, 2)).unwrap();
        assert!(r >= 0.1);
        assert_eq!(optimality_residual(&[2.0, 4.0], &[1.0, 2.0], &Penalty::ridge_n(1.0, 2)).unwrap(), 0.0);
    }
}
