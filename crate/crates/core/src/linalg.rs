//! Vector helpers and the quadratic metric used by linear families.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Symmetric positive semidefinite matrix `M`, used through `uᵀMu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

impl Metric {
    pub fn isotropic(dim: usize, value: f64) -> Self {
        Metric::Diagonal(vec![value; dim])
    }

    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        let out = Metric::Dense(m);
        out.validate()?;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        match self {
            Metric::Diagonal(d) => d.len(),
            Metric::Dense(m) => m.nrows(),
        }
    }

    /// Checks symmetry and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        match self {
            Metric::Diagonal(d) => {
                if d.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return config("diagonal metric must be finite and nonnegative");
                }
            }
            Metric::Dense(m) => {
                if !m.is_square() {
                    return config("metric matrix must be square");
                }
                let scale = m.amax().max(1.0);
                if (m - m.transpose()).amax() > 1e-12 * scale {
                    return config("metric matrix must be symmetric");
                }
                let eig = m.clone().symmetric_eigen();
                if eig.eigenvalues.min() < -1e-12 * scale {
                    return config("metric matrix is not positive semidefinite");
                }
            }
        }
        Ok(())
    }

    pub fn quad(&self, u: &[f64]) -> f64 {
        match self {
            Metric::Diagonal(d) => d.iter().zip(u).map(|(w, x)| w * x * x).sum(),
            Metric::Dense(m) => {
                let v = DVector::from_column_slice(u);
                (v.transpose() * m * &v)[(0, 0)]
            }
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Metric::Diagonal(d) => d.iter().zip(u).map(|(w, x)| w * x).collect(),
            Metric::Dense(m) => (m * DVector::from_column_slice(u)).as_slice().to_vec(),
        }
    }

    pub fn scaled(&self, c: f64) -> Metric {
        match self {
            Metric::Diagonal(d) => Metric::Diagonal(d.iter().map(|x| c * x).collect()),
            Metric::Dense(m) => Metric::Dense(m * c),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Metric::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Metric::Dense(m) => m.clone(),
        }
    }

    pub fn max_eigen(&self) -> f64 {
        match self {
            Metric::Diagonal(d) => d.iter().cloned().fold(0.0, f64::max),
            Metric::Dense(m) => m.clone().symmetric_eigen().eigenvalues.max().max(0.0),
        }
    }

    /// Returns the common value when the metric is a multiple of the identity.
    pub fn isotropic_value(&self) -> Option<f64> {
        match self {
            Metric::Diagonal(d) => {
                let first = *d.first()?;
                d.iter().all(|x| *x == first).then_some(first)
            }
            Metric::Dense(m) => {
                let n = m.nrows();
                let first = m[(0, 0)];
                for i in 0..n {
                    for j in 0..n {
                        let want = if i == j { first } else { 0.0 };
                        if m[(i, j)] != want {
                            return None;
                        }
                    }
                }
                Some(first)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_matches_dense() {
        let d = Metric::Diagonal(vec![1.0, 2.0, 3.0]);
        let m = Metric::Dense(d.to_dense());
        let u = [0.5, -1.0, 2.0];
        assert!((d.quad(&u) - m.quad(&u)).abs() < 1e-14);
        assert_eq!(d.quad(&u), 0.25 + 2.0 + 12.0);
        assert_eq!(m.isotropic_value(), None);
        assert_eq!(Metric::isotropic(3, 0.5).isotropic_value(), Some(0.5));
    }

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Metric::dense(m).is_err());
    }
}
