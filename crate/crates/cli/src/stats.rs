//! Paired significance test and the annealing check built on it.

use anyhow::{ensure, Result};
use procmatch::engine::{process_history, Estimator, ThresholdMode, TargetSpec};
use procmatch::model::Quality;
use procmatch::sim::{simulate_cohort, synthetic_task, ProfileDistribution, TaskShape};
use procmatch::theory::MeasureKind;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    /// P-value of `mean(a - b) > 0` against the null of no difference.
    pub p_value: f64,
}

/// One-sided paired t-test of `a` exceeding `b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    ensure!(a.len() == b.len(), "paired samples differ in length");
    ensure!(a.len() >= 2, "a paired test needs at least two pairs");
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    if se == 0.0 {
        let p_value = if mean > 0.0 { 0.0 } else if mean < 0.0 { 1.0 } else { 0.5 };
        let t = if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY };
        return Ok(PairedTest { n, mean_diff: mean, t, p_value });
    }
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)?;
    Ok(PairedTest { n, mean_diff: mean, t, p_value: dist.sf(t) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnealingCheck {
    pub matchers: usize,
    pub mean_f_dynamic: f64,
    pub mean_f_accept_all: f64,
    pub test: PairedTest,
}

impl AnnealingCheck {
    pub fn passes(&self, alpha: f64) -> bool {
        self.mean_f_dynamic >= self.mean_f_accept_all && self.test.p_value < alpha
    }
}

/// Final F under the dynamic F policy against accepting every decision, for
/// a cohort of unbiased matchers whose confidence is the true probability.
pub fn annealing_check(count: usize, task_seed: u64, cohort_seed: u64) -> Result<AnnealingCheck> {
    let task = synthetic_task(TaskShape::default(), task_seed)?;
    let cohort = simulate_cohort(count, &ProfileDistribution::unbiased(), &task, cohort_seed)?;
    let ref_size = task.reference.known_size();
    let policy = |t: TargetSpec| -> Result<Vec<f64>> {
        cohort
            .matchers
            .par_iter()
            .map(|m| {
                let (sigma, _) = process_history(&m.history, t, &Estimator::Unbiased, ref_size)?;
                Ok(Quality::of(&sigma, &task.reference).fmeasure)
            })
            .collect()
    };
    let dynamic = policy(TargetSpec::new(MeasureKind::FMeasure, ThresholdMode::Dynamic))?;
    let all = policy(TargetSpec::new(MeasureKind::Recall, ThresholdMode::Static))?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(AnnealingCheck {
        matchers: count,
        mean_f_dynamic: mean(&dynamic),
        mean_f_accept_all: mean(&all),
        test: paired_t_test(&dynamic, &all)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_paired_example() {
        // Differences 1..=5: mean 3, sd sqrt(2.5), t = 3 / sqrt(0.5).
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.t - 3.0 / 0.5f64.sqrt()).abs() < 1e-12);
        // Upper tail of t(4) at 4.2426 is about 0.0066.
        assert!((r.p_value - 0.00662).abs() < 1e-4, "{}", r.p_value);
        let flipped = paired_t_test(&b, &a).unwrap();
        assert!((r.p_value + flipped.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_differences() {
        assert_eq!(paired_t_test(&[1.0, 1.0], &[0.0, 0.0]).unwrap().p_value, 0.0);
        assert_eq!(paired_t_test(&[0.0, 0.0], &[0.0, 0.0]).unwrap().p_value, 0.5);
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
    }
}
