use serde::{Deserialize, Serialize};

use super::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::model::{Match, Pair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Row,
    Column,
}

/// Every entry with value `>= nu`.
pub fn slm_threshold(mat: &SimilarityMatrix, nu: f64) -> Result<Match> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidArgument(format!("threshold {nu} outside [0,1]")));
    }
    Ok(mat
        .entries()
        .filter(|&(_, v)| v >= nu)
        .map(|(p, v)| (p, Some(v)))
        .collect())
}

/// Entries within `delta` of the maximum of their row (or column).
pub fn slm_max_delta(mat: &SimilarityMatrix, delta: f64, axis: Axis) -> Result<Match> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} must be >= 0")));
    }
    let row_max: Vec<f64> = (0..mat.rows())
        .map(|i| mat.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let col_max: Vec<f64> = (0..mat.cols())
        .map(|j| (0..mat.rows()).map(|i| mat.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(mat
        .entries()
        .filter(|&(p, v)| {
            let max = match axis {
                Axis::Row => row_max[p.row],
                Axis::Column => col_max[p.col],
            };
            v + delta >= max
        })
        .map(|(p, v)| (p, Some(v)))
        .collect())
}

/// Entries strictly greater than every other entry in both their row and column.
pub fn slm_dominants(mat: &SimilarityMatrix) -> Match {
    mat.entries()
        .filter(|&(p, v)| {
            let row_ok = (0..mat.cols()).all(|j| j == p.col || v > mat.get(p.row, j));
            let col_ok = (0..mat.rows()).all(|i| i == p.row || v > mat.get(i, p.col));
            row_ok && col_ok
        })
        .map(|(p, v): (Pair, f64)| (p, Some(v)))
        .collect()
}
