//! Design points and finite design spaces.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Feature vector indexing a piece of servable content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignPoint(pub Vec<f64>);

impl DesignPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        DesignPoint(coords)
    }

    pub fn scalar(x: f64) -> Self {
        DesignPoint(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl fmt::Display for DesignPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// One servable item: its features plus an opaque content id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: DesignPoint,
    pub content_id: String,
}

/// Affine map of each coordinate onto `[0, 1]` using fixed bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    lower: Vec<f64>,
    span: Vec<f64>,
}

impl Normalizer {
    pub fn new(lower: &[f64], upper: &[f64]) -> Self {
        let span = lower
            .iter()
            .zip(upper)
            .map(|(lo, hi)| if hi > lo { hi - lo } else { 1.0 })
            .collect();
        Normalizer {
            lower: lower.to_vec(),
            span,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Normalizer {
            lower: vec![0.0; dim],
            span: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.span))
            .map(|(v, (lo, s))| (v - lo) / s)
            .collect()
    }
}

/// A finite set of candidates sharing one feature dimension, with the
/// bounding box used for normalization and clamping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    candidates: Vec<Candidate>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DesignError {
    #[error("design space has no candidates")]
    Empty,
    #[error("candidate {index} has dimension {got}, expected {expected}")]
    Dimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("candidate {0} has non-finite coordinates")]
    NonFinite(usize),
}

impl DesignSpace {
    /// Builds the space; bounds are the per-dimension min/max over candidates.
    pub fn new(candidates: Vec<Candidate>) -> Result<Self, DesignError> {
        let first = candidates.first().ok_or(DesignError::Empty)?;
        let dim = first.point.dim();
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for (index, c) in candidates.iter().enumerate() {
            if c.point.dim() != dim {
                return Err(DesignError::Dimension {
                    index,
                    got: c.point.dim(),
                    expected: dim,
                });
            }
            if !c.point.is_finite() {
                return Err(DesignError::NonFinite(index));
            }
            for (d, v) in c.point.coords().iter().enumerate() {
                lower[d] = lower[d].min(*v);
                upper[d] = upper[d].max(*v);
            }
        }
        Ok(DesignSpace {
            dim,
            lower,
            upper,
            candidates,
        })
    }

    /// Integer lattice `{lo, lo+1, ..., hi}` with content ids equal to the value.
    pub fn integer_range(lo: i64, hi: i64) -> Result<Self, DesignError> {
        let candidates = (lo..=hi)
            .map(|v| Candidate {
                point: DesignPoint::scalar(v as f64),
                content_id: v.to_string(),
            })
            .collect();
        Self::new(candidates)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn normalizer(&self) -> Normalizer {
        Normalizer::new(&self.lower, &self.upper)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn contains(&self, point: &DesignPoint) -> bool {
        self.candidates.iter().any(|c| &c.point == point)
    }

    /// Distinct design points in first-appearance order, each with the
    /// indices of the candidates that share it.
    pub fn unique_points(&self) -> Vec<(DesignPoint, Vec<usize>)> {
        let mut out: Vec<(DesignPoint, Vec<usize>)> = Vec::new();
        for (i, c) in self.candidates.iter().enumerate() {
            match out.iter_mut().find(|(p, _)| *p == c.point) {
                Some((_, idx)) => idx.push(i),
                None => out.push((c.point.clone(), vec![i])),
            }
        }
        out
    }

    /// Indices of the candidates closest to `target` in normalized coordinates.
    pub fn nearest(&self, target: &[f64]) -> Vec<usize> {
        let norm = self.normalizer();
        let t = norm.apply(target);
        let mut best = f64::INFINITY;
        let mut idx = Vec::new();
        for (i, c) in self.candidates.iter().enumerate() {
            let p = norm.apply(c.point.coords());
            let d: f64 = p.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best - 1e-15 {
                best = d;
                idx.clear();
                idx.push(i);
            } else if (d - best).abs() <= 1e-15 {
                idx.push(i);
            }
        }
        idx
    }
}
