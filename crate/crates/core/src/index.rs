//! Exact cosine top-k search over a flat, row-major vector table.
//!
//! Every retrieval criterion that compares embeddings goes through
//! [`VectorIndex::top_k`]. The scan is brute force: for the corpus sizes this
//! engine targets an exact answer is cheap, and exactness makes results
//! reproducible across platforms.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scores are compared after rounding to this granularity; anything closer is
/// a tie and falls through to the id tie-break.
pub const SCORE_GRANULARITY: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("dimension mismatch: index has {expected}, vector has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero vector (L2 norm must be > 0)")]
    ZeroVector,
    #[error("k must be at least 1")]
    InvalidK,
}

/// A single search result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub id: String,
    pub score: f64,
}

/// Quantized score used for ordering. Transitive, unlike an epsilon compare.
pub fn score_key(score: f64) -> i64 {
    (score / SCORE_GRANULARITY).round() as i64
}

/// Canonical hit order: score descending, then id ascending.
pub fn hit_order(a: &ScoredHit, b: &ScoredHit) -> Ordering {
    score_key(b.score)
        .cmp(&score_key(a.score))
        .then_with(|| a.id.cmp(&b.id))
}

/// Sort hits into canonical order.
pub fn sort_hits(hits: &mut [ScoredHit]) {
    hits.sort_by(hit_order);
}

pub fn l2_norm(values: &[f32]) -> f64 {
    values
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt()
}

/// Cosine similarity in f64. Returns 0 if either side has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Fixed-dimension store of embeddings with cached norms.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    ids: Vec<String>,
    values: Vec<f32>,
    norms: Vec<f64>,
    rows: HashMap<String, usize>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            ids: Vec::new(),
            values: Vec::new(),
            norms: Vec::new(),
            rows: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Ids in row order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.rows.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.rows.get(id).map(|&row| self.row(row))
    }

    fn row(&self, row: usize) -> &[f32] {
        &self.values[row * self.dimension..(row + 1) * self.dimension]
    }

    fn check(&self, vector: &[f32]) -> Result<f64, IndexError> {
        if vector.len() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        let norm = l2_norm(vector);
        if norm == 0.0 || !norm.is_finite() {
            return Err(IndexError::ZeroVector);
        }
        Ok(norm)
    }

    /// Insert or replace the vector stored under `id`.
    pub fn upsert(&mut self, id: &str, vector: &[f32]) -> Result<(), IndexError> {
        let norm = self.check(vector)?;
        match self.rows.get(id) {
            Some(&row) => {
                let start = row * self.dimension;
                self.values[start..start + self.dimension].copy_from_slice(vector);
                self.norms[row] = norm;
            }
            None => {
                self.rows.insert(id.to_string(), self.ids.len());
                self.ids.push(id.to_string());
                self.values.extend_from_slice(vector);
                self.norms.push(norm);
            }
        }
        Ok(())
    }

    /// Cosine between `query` and the vector stored under `id`, if present.
    pub fn score(&self, query: &[f32], id: &str) -> Result<Option<f64>, IndexError> {
        let qnorm = self.check(query)?;
        Ok(self
            .rows
            .get(id)
            .map(|&row| dot(query, self.row(row)) / (qnorm * self.norms[row])))
    }

    /// Exact top-k by cosine similarity.
    pub fn top_k(&self, query: &[f32], k: usize) -> Result<Vec<ScoredHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let qnorm = self.check(query)?;
        let mut hits: Vec<ScoredHit> = (0..self.ids.len())
            .map(|row| ScoredHit {
                id: self.ids[row].clone(),
                score: dot(query, self.row(row)) / (qnorm * self.norms[row]),
            })
            .collect();
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, hit_order);
            hits.truncate(k);
        }
        sort_hits(&mut hits);
        Ok(hits)
    }

    /// Raw row-major values, in the order of [`VectorIndex::ids`].
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Rebuild an index from persisted rows.
    pub fn from_rows(
        dimension: usize,
        ids: Vec<String>,
        values: Vec<f32>,
    ) -> Result<Self, IndexError> {
        if values.len() != ids.len() * dimension {
            return Err(IndexError::DimensionMismatch {
                expected: ids.len() * dimension,
                actual: values.len(),
            });
        }
        let mut index = Self::new(dimension);
        for (row, id) in ids.iter().enumerate() {
            index.upsert(id, &values[row * dimension..(row + 1) * dimension])?;
        }
        Ok(index)
    }
}
