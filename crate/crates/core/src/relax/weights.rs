use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    Nonnegative,
    Simplex,
}

/// Multipliers `λ ≥ 0` or simplex weights `t`. Serializes as a bare array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct WeightVector {
    weights: Vec<f64>,
    normalization: Normalization,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, normalization: Normalization) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::DegenerateInput("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::DegenerateInput(format!("negative weight {w}")));
        }
        if normalization == Normalization::Simplex {
            let s: f64 = weights.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::DegenerateInput(format!("simplex weights sum to {s}")));
            }
        }
        Ok(WeightVector {
            weights,
            normalization,
        })
    }

    /// Clips tiny negatives from round-off to zero before validating.
    pub fn nonnegative_clipped(weights: &[f64]) -> Self {
        WeightVector {
            weights: weights.iter().map(|w| w.max(0.0)).collect(),
            normalization: Normalization::Nonnegative,
        }
    }

    pub fn barycenter(m: usize) -> Self {
        WeightVector {
            weights: vec![1.0 / m as f64; m],
            normalization: Normalization::Simplex,
        }
    }

    pub fn vertex(m: usize, i: usize) -> Self {
        let mut weights = vec![0.0; m];
        weights[i] = 1.0;
        WeightVector {
            weights,
            normalization: Normalization::Simplex,
        }
    }

    /// Euclidean projection onto the simplex, renormalized to sum to one.
    pub fn simplex_from(v: &[f64]) -> Self {
        let mut p = project_simplex(v);
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|w| *w /= s);
        WeightVector {
            weights: p,
            normalization: Normalization::Simplex,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.weights
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v, Normalization::Nonnegative)
    }
}

/// Euclidean projection onto `{t ≥ 0, Σt = 1}` by the sorting method.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let th = (cum - 1.0) / (k + 1) as f64;
        if uk - th > 0.0 {
            theta = th;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
