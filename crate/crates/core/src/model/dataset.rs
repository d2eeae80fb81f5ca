use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sample {
    Scalar(f64),
    Vector(Vec<f64>),
    Pair { x: Vec<f64>, y: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    Scalar,
    Vector,
    Pair,
}

impl Sample {
    pub fn kind(&self) -> SampleKind {
        match self {
            Sample::Scalar(_) => SampleKind::Scalar,
            Sample::Vector(_) => SampleKind::Vector,
            Sample::Pair { .. } => SampleKind::Pair,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Sample::Scalar(x) => Some(*x),
            _ => None,
        }
    }
}

/// Observations `X_1, …, X_n` of one sample-space kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<Sample>,
    kind: SampleKind,
}

impl Dataset {
    pub fn new(points: Vec<Sample>) -> Result<Self> {
        let Some(first) = points.first() else {
            return arg("a dataset needs at least one observation");
        };
        let kind = first.kind();
        if points.iter().any(|p| p.kind() != kind) {
            return arg("observations of mixed sample-space kinds");
        }
        Ok(Dataset { points, kind })
    }

    pub fn scalars(xs: &[f64]) -> Result<Self> {
        Dataset::new(xs.iter().map(|x| Sample::Scalar(*x)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn points(&self) -> &[Sample] {
        &self.points
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.kind != other.kind {
            return arg("cannot concatenate datasets of different kinds");
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Ok(Dataset { points, kind: self.kind })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants() {
        assert!(Dataset::new(vec![]).is_err());
        assert!(Dataset::new(vec![Sample::Scalar(1.0), Sample::Vector(vec![1.0])]).is_err());
        let d = Dataset::scalars(&[1.0, 2.0]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.concat(&d).unwrap().len(), 4);
    }
}
