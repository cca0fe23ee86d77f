//! Recall boosting: algorithmic correspondences for pairs the human never
//! looked at, merged into the human-derived match.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matchers::SimilarityMatrix;
use crate::model::{DecisionHistory, Match, Pair, Quality, ReferenceMatch};

/// Algorithmic similarities restricted to pairs no history record touches.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialMatrix {
    rows: usize,
    cols: usize,
    values: Vec<Option<f64>>,
}

impl PartialMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, pair: Pair) -> Option<f64> {
        if pair.row < self.rows && pair.col < self.cols {
            self.values[pair.row * self.cols + pair.col]
        } else {
            None
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (Pair, f64)> + '_ {
        self.values.iter().enumerate().filter_map(|(k, v)| {
            v.map(|v| (Pair::new(k / self.cols, k % self.cols), v))
        })
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    fn row_max(&self, row: usize) -> f64 {
        (0..self.cols)
            .filter_map(|j| self.values[row * self.cols + j])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn col_max(&self, col: usize) -> f64 {
        (0..self.rows)
            .filter_map(|i| self.values[i * self.cols + col])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Drops every pair the history touches, whatever its confidence. Records
/// outside the grid are ignored.
pub fn partial_matrix(algorithmic: &SimilarityMatrix, history: &DecisionHistory) -> PartialMatrix {
    let (rows, cols) = (algorithmic.rows(), algorithmic.cols());
    let mut values: Vec<Option<f64>> = algorithmic.values().iter().copied().map(Some).collect();
    for r in history.iter() {
        if r.pair.row < rows && r.pair.col < cols {
            values[r.pair.row * cols + r.pair.col] = None;
        }
    }
    PartialMatrix { rows, cols, values }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbVariant {
    Uniform,
    MaxDeltaRow,
    MaxDeltaCol,
    Dominants,
}

impl std::str::FromStr for RbVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" | "threshold" => Ok(RbVariant::Uniform),
            "max_delta_row" => Ok(RbVariant::MaxDeltaRow),
            "max_delta_col" | "max_delta_column" => Ok(RbVariant::MaxDeltaCol),
            "dominants" => Ok(RbVariant::Dominants),
            other => Err(Error::InvalidArgument(format!("unknown recall-boost variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbConfig {
    pub variant: RbVariant,
    /// Threshold for the uniform variant, window width otherwise.
    pub param: f64,
    pub epsilon: f64,
}

impl RbConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-9;

    pub fn new(variant: RbVariant, param: f64) -> Self {
        RbConfig {
            variant,
            param,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.param) {
            return Err(Error::InvalidArgument(format!(
                "recall-boost parameter {} outside [0,1]",
                self.param
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        Ok(())
    }
}

impl Default for RbConfig {
    fn default() -> Self {
        RbConfig::new(RbVariant::Uniform, 0.9)
    }
}

pub fn rb_select(partial: &PartialMatrix, cfg: &RbConfig, sigma_hp: &Match) -> Result<Match> {
    cfg.validate()?;
    if let Some(p) = sigma_hp.pairs().find(|&p| partial.get(p).is_some()) {
        return Err(Error::Overlap(p));
    }
    let mut row_busy = vec![false; partial.rows];
    let mut col_busy = vec![false; partial.cols];
    for p in sigma_hp.pairs() {
        if p.row < partial.rows {
            row_busy[p.row] = true;
        }
        if p.col < partial.cols {
            col_busy[p.col] = true;
        }
    }
    let theta = cfg.param;
    // `v > b` is evaluated as `v >= b + eps`.
    let above = |v: f64, bound: f64| v >= bound + cfg.epsilon;
    let keep = |p: Pair, v: f64| match cfg.variant {
        RbVariant::Uniform => v >= theta,
        RbVariant::MaxDeltaRow => {
            if row_busy[p.row] {
                above(v, 1.0 - theta)
            } else {
                above(v, 0.0)
            }
        }
        RbVariant::MaxDeltaCol => {
            if col_busy[p.col] {
                above(v, 1.0 - theta)
            } else {
                above(v, 0.0)
            }
        }
        RbVariant::Dominants => {
            if !row_busy[p.row] && !col_busy[p.col] {
                above(v, 0.0)
                    && v >= partial.row_max(p.row) - theta
                    && v >= partial.col_max(p.col) - theta
            } else {
                above(v, 1.0 - theta)
            }
        }
    };
    Ok(partial
        .entries()
        .filter(|&(p, v)| keep(p, v))
        .map(|(p, v)| (p, Some(v)))
        .collect())
}

/// Disjoint union of the human and algorithmic matches.
pub fn finalize(sigma_hp: &Match, sigma_rb: &Match) -> Result<Match> {
    if let Some(p) = sigma_hp.first_overlap(sigma_rb) {
        return Err(Error::Overlap(p));
    }
    let mut out = sigma_hp.clone();
    for c in sigma_rb.iter() {
        out.insert(c.pair, c.value);
    }
    Ok(out)
}

/// One matcher's inputs to the threshold sweep.
#[derive(Clone, Debug)]
pub struct BoostCase {
    pub sigma_hp: Match,
    pub partial: PartialMatrix,
    pub reference: ReferenceMatch,
}

/// Mean F of the finalized matches under `cfg`.
pub fn mean_boosted_f(cases: &[BoostCase], cfg: &RbConfig) -> Result<f64> {
    if cases.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for c in cases {
        let rb = rb_select(&c.partial, cfg, &c.sigma_hp)?;
        total += Quality::of(&finalize(&c.sigma_hp, &rb)?, &c.reference).fmeasure;
    }
    Ok(total / cases.len() as f64)
}

/// Mean boosted F at every grid point, in grid order.
pub fn sweep_curve(cases: &[BoostCase], variant: RbVariant, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    grid.par_iter()
        .map(|&g| mean_boosted_f(cases, &RbConfig::new(variant, g)).map(|f| (g, f)))
        .collect()
}

/// Mean F values this close are equal up to summation order.
pub const SWEEP_TIE: f64 = 1e-12;

/// Point of a curve with the highest mean F; ties go to the smaller parameter.
pub fn best_point(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut it = curve.iter().copied();
    let first = it.next()?;
    Some(it.fold(first, |best, (g, f)| {
        let tie = (f - best.1).abs() <= SWEEP_TIE;
        if (!tie && f > best.1) || (tie && g < best.0) {
            (g, f)
        } else {
            best
        }
    }))
}

/// Grid point with the highest mean F; ties go to the smaller value.
pub fn sweep_rb_threshold(cases: &[BoostCase], variant: RbVariant, grid: &[f64]) -> Result<f64> {
    let curve = sweep_curve(cases, variant, grid)?;
    best_point(&curve)
        .map(|b| b.0)
        .ok_or_else(|| Error::InvalidArgument("empty threshold grid".into()))
}

/// `0, step, 2*step, ..., 1` without accumulated rounding.
pub fn unit_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid step {step} outside (0,1]")));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|k| (k as f64 * step).min(1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DecisionRecord;

    fn example_history() -> DecisionHistory {
        DecisionHistory::new(vec![
            DecisionRecord::new(0, 0, 0.9, 5.0),
            DecisionRecord::new(1, 1, 0.15, 15.0),
            DecisionRecord::new(0, 1, 0.25, 21.0),
            DecisionRecord::new(2, 3, 1.0, 24.0),
            DecisionRecord::new(1, 0, 0.3, 35.0),
        ])
    }

    fn fixture() -> SimilarityMatrix {
        SimilarityMatrix::from_rows(&[
            vec![0.22, 0.11, 0.13, 0.10],
            vec![0.04, 0.06, 0.08, 0.00],
            vec![0.12, 0.10, 0.07, 1.00],
        ])
        .unwrap()
    }

    #[test]
    fn partial_matrix_drops_touched_pairs() {
        let pm = partial_matrix(&fixture(), &example_history());
        assert_eq!(pm.present_count(), 7);
        assert_eq!(pm.get(Pair::new(0, 0)), None);
        assert_eq!(pm.get(Pair::new(1, 2)), Some(0.08));
        assert_eq!(partial_matrix(&fixture(), &DecisionHistory::default()).present_count(), 12);
        let all: DecisionHistory = (0..12)
            .map(|k| DecisionRecord::new(k / 4, k % 4, 0.0, k as f64))
            .collect();
        assert_eq!(partial_matrix(&fixture(), &all).present_count(), 0);
    }

    #[test]
    fn uniform_variant() {
        let pm = partial_matrix(&fixture(), &DecisionHistory::default());
        let hi = rb_select(&pm, &RbConfig::new(RbVariant::Uniform, 0.9), &Match::new()).unwrap();
        assert_eq!(hi.pairs().collect::<Vec<_>>(), [Pair::new(2, 3)]);
        let all = rb_select(&pm, &RbConfig::new(RbVariant::Uniform, 0.0), &Match::new()).unwrap();
        assert_eq!(all.len(), 12);
    }

    #[test]
    fn overlap_is_rejected() {
        let pm = partial_matrix(&fixture(), &DecisionHistory::default());
        let hp: Match = [Pair::new(0, 0)].into_iter().collect();
        assert!(matches!(
            rb_select(&pm, &RbConfig::default(), &hp),
            Err(Error::Overlap(_))
        ));
        assert!(finalize(&hp, &hp).is_err());
        assert!(rb_select(&pm, &RbConfig::new(RbVariant::Uniform, 1.5), &Match::new()).is_err());
    }

    #[test]
    fn finalize_is_union() {
        let a: Match = [Pair::new(0, 0)].into_iter().collect();
        let b: Match = [Pair::new(2, 3)].into_iter().collect();
        assert_eq!(finalize(&a, &b).unwrap().len(), 2);
        assert_eq!(finalize(&a, &Match::new()).unwrap(), a);
    }

    #[test]
    fn near_ties_go_to_the_smaller_parameter() {
        let curve = [(0.1, 0.5), (0.2, 0.7), (0.3, 0.7 + 1e-15), (0.4, 0.6)];
        assert_eq!(best_point(&curve), Some((0.2, 0.7)));
        assert_eq!(best_point(&[(0.1, 0.5), (0.2, 0.5 + 1e-9)]), Some((0.2, 0.5 + 1e-9)));
        assert_eq!(best_point(&[]), None);
    }

    #[test]
    fn singleton_grid_and_grid_construction() {
        assert_eq!(sweep_rb_threshold(&[], RbVariant::Uniform, &[0.9]).unwrap(), 0.9);
        let g = unit_grid(0.05).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[20], 1.0);
        assert!(sweep_rb_threshold(&[], RbVariant::Uniform, &[]).is_err());
    }

    #[test]
    fn separable_sweep_picks_smallest_positive() {
        let sim = SimilarityMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let case = BoostCase {
            sigma_hp: Match::new(),
            partial: partial_matrix(&sim, &DecisionHistory::default()),
            reference: ReferenceMatch::new([Pair::new(0, 0), Pair::new(1, 1)]),
        };
        let grid = unit_grid(0.25).unwrap();
        assert_eq!(sweep_rb_threshold(&[case], RbVariant::Uniform, &grid).unwrap(), 0.25);
    }
}
