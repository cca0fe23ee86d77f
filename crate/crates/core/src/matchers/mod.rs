//! First-line matchers (schemata to similarity matrix) and second-line
//! decision makers (matrix to match).

mod lexicon;
mod second_line;
pub mod text;

use std::collections::BTreeSet;

use rayon::prelude::*;

pub use lexicon::Lexicon;
pub use second_line::{slm_dominants, slm_max_delta, slm_threshold, Axis};

use crate::error::{Error, Result};
use crate::model::{Pair, Schema};

/// A fully assigned `n x m` grid of similarities in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::ValueOutOfRange {
                row: k / cols,
                col: k % cols,
                value: values[k],
            });
        }
        Ok(SimilarityMatrix { rows, cols, values })
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Result<Self> {
        SimilarityMatrix::new(rows, cols, vec![value; rows * cols])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        SimilarityMatrix::new(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix by evaluating `f` on every pair, rows in parallel.
    /// Results are clamped into `[0,1]`.
    pub fn from_fn<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let values = (0..rows)
            .into_par_iter()
            .flat_map_iter(|i| (0..cols).map(move |j| (i, j)).collect::<Vec<_>>())
            .map(|(i, j)| f(i, j).clamp(0.0, 1.0))
            .collect();
        SimilarityMatrix { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn at(&self, pair: Pair) -> f64 {
        self.get(pair.row, pair.col)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn entries(&self) -> impl Iterator<Item = (Pair, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| (Pair::new(k / self.cols, k % self.cols), v))
    }

    pub fn transpose(&self) -> Self {
        SimilarityMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

/// Attribute names compared after tokenization, by the larger of edit
/// similarity and trigram Jaccard.
pub fn term_match(s: &Schema, s2: &Schema) -> SimilarityMatrix {
    let a: Vec<String> = s.attributes.iter().map(|x| text::normalize(&x.name)).collect();
    let b: Vec<String> = s2.attributes.iter().map(|x| text::normalize(&x.name)).collect();
    SimilarityMatrix::from_fn(a.len(), b.len(), |i, j| text::string_similarity(&a[i], &b[j]))
}

fn token_set<'a>(names: impl IntoIterator<Item = &'a String>) -> BTreeSet<String> {
    names.into_iter().flat_map(|n| text::tokenize(n)).collect()
}

/// Mean of the token Jaccard over the full root-to-node paths and the token
/// Jaccard over the attribute names.
pub fn token_path_match(s: &Schema, s2: &Schema) -> SimilarityMatrix {
    let sets = |schema: &Schema| -> Vec<(BTreeSet<String>, BTreeSet<String>)> {
        schema
            .attributes
            .iter()
            .map(|a| (token_set(&a.path), token_set([&a.name])))
            .collect()
    };
    let (a, b) = (sets(s), sets(s2));
    SimilarityMatrix::from_fn(a.len(), b.len(), |i, j| {
        0.5 * (text::jaccard(&a[i].0, &b[j].0) + text::jaccard(&a[i].1, &b[j].1))
    })
}

/// 1 when a declared lexicon relation links a name token of each side;
/// otherwise the term similarity of the lexicon-expanded token lists.
pub fn lexicon_match(s: &Schema, s2: &Schema, lex: &Lexicon) -> SimilarityMatrix {
    let tokens = |schema: &Schema| -> Vec<Vec<String>> {
        schema.attributes.iter().map(|a| text::tokenize(&a.name)).collect()
    };
    let (a, b) = (tokens(s), tokens(s2));
    let ea: Vec<String> = a.iter().map(|t| lex.expand(t).join(" ")).collect();
    let eb: Vec<String> = b.iter().map(|t| lex.expand(t).join(" ")).collect();
    SimilarityMatrix::from_fn(a.len(), b.len(), |i, j| {
        let related = a[i]
            .iter()
            .any(|x| b[j].iter().any(|y| lex.relates(x, y)));
        if related {
            1.0
        } else {
            text::string_similarity(&ea[i], &eb[j])
        }
    })
}

/// Entry-wise weighted mean of equally shaped matrices.
pub fn ensemble(mats: &[SimilarityMatrix], weights: &[f64]) -> Result<SimilarityMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::InvalidArgument("ensemble of zero matrices".into()))?;
    if weights.len() != mats.len() {
        return Err(Error::InvalidArgument(format!(
            "{} matrices but {} weights",
            mats.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weights must sum to a positive value".into()));
    }
    for m in mats {
        if m.rows != first.rows || m.cols != first.cols {
            return Err(Error::DimensionMismatch {
                expected_rows: first.rows,
                expected_cols: first.cols,
                rows: m.rows,
                cols: m.cols,
            });
        }
    }
    let values = (0..first.values.len())
        .map(|k| {
            let v: f64 = mats.iter().zip(weights).map(|(m, w)| w * m.values[k]).sum();
            (v / total).clamp(0.0, 1.0)
        })
        .collect();
    Ok(SimilarityMatrix {
        rows: first.rows,
        cols: first.cols,
        values,
    })
}

/// Uniform ensemble of the three bundled first-line matchers.
pub fn default_ensemble(s: &Schema, s2: &Schema, lex: &Lexicon) -> SimilarityMatrix {
    let mats = [term_match(s, s2), token_path_match(s, s2), lexicon_match(s, s2, lex)];
    ensemble(&mats, &[1.0, 1.0, 1.0]).expect("bundled matchers share dimensions")
}
