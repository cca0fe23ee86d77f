//! Correlation and error measures between estimates and ground truth.
//!
//! Correlations return `None` when undefined (fewer than two points, zero
//! variance, or no untied pairs) rather than a misleading zero.

use crate::error::{Error, Result};
use crate::model::ReferenceMatch;
use crate::theory::ConfidenceMatch;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation.
pub fn pearson(estimates: &[f64], truths: &[f64]) -> Result<Option<f64>> {
    check_lengths(estimates, truths)?;
    if estimates.len() < 2 {
        return Ok(None);
    }
    let (me, mt) = (mean(estimates), mean(truths));
    let (mut cov, mut ve, mut vt) = (0.0, 0.0, 0.0);
    for (e, t) in estimates.iter().zip(truths) {
        let (de, dt) = (e - me, t - mt);
        cov += de * dt;
        ve += de * de;
        vt += dt * dt;
    }
    if ve == 0.0 || vt == 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / (ve.sqrt() * vt.sqrt())).clamp(-1.0, 1.0)))
}

/// Confidences against correctness indicators.
pub fn pearson_match(cm: &ConfidenceMatch, reference: &ReferenceMatch) -> Result<Option<f64>> {
    let (c, t) = match_series(cm, reference);
    pearson(&c, &t)
}

pub fn pearson_measure(estimates: &[f64], truths: &[f64]) -> Result<Option<f64>> {
    pearson(estimates, truths)
}

/// `(C - D) / (C + D)` with pairs tied on either side left out of both counts.
pub fn kendall_tau(estimates: &[f64], truths: &[f64]) -> Result<Option<f64>> {
    check_lengths(estimates, truths)?;
    let (mut c, mut d) = (0u64, 0u64);
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            let s = (estimates[i] - estimates[j]) * (truths[i] - truths[j]);
            if s > 0.0 {
                c += 1;
            } else if s < 0.0 {
                d += 1;
            }
        }
    }
    if c + d == 0 {
        return Ok(None);
    }
    Ok(Some((c as f64 - d as f64) / (c + d) as f64))
}

/// Root mean squared error and mean absolute error.
pub fn rmse_mae(estimates: &[f64], truths: &[f64]) -> Result<(f64, f64)> {
    check_lengths(estimates, truths)?;
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("error measures need at least one point".into()));
    }
    let n = estimates.len() as f64;
    let (mut sq, mut ab) = (0.0, 0.0);
    for (e, t) in estimates.iter().zip(truths) {
        sq += (e - t) * (e - t);
        ab += (e - t).abs();
    }
    let (rmse, mae) = ((sq / n).sqrt(), ab / n);
    debug_assert!(rmse + 1e-12 >= mae, "rmse {rmse} < mae {mae}");
    Ok((rmse, mae))
}

pub fn rmse_mae_match(cm: &ConfidenceMatch, reference: &ReferenceMatch) -> Result<(f64, f64)> {
    let (c, t) = match_series(cm, reference);
    rmse_mae(&c, &t)
}

pub fn rmse_mae_measure(estimates: &[f64], truths: &[f64]) -> Result<(f64, f64)> {
    rmse_mae(estimates, truths)
}

fn match_series(cm: &ConfidenceMatch, reference: &ReferenceMatch) -> (Vec<f64>, Vec<f64>) {
    cm.entries()
        .iter()
        .map(|&(p, c)| (c, reference.indicator(p)))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pair;

    #[test]
    fn perfect_and_inverted_correlation() {
        let reference = ReferenceMatch::new([Pair::new(0, 0), Pair::new(1, 1)]);
        let exact = ConfidenceMatch::new(vec![
            (Pair::new(0, 0), 1.0),
            (Pair::new(0, 1), 0.0),
            (Pair::new(1, 1), 1.0),
        ])
        .unwrap();
        assert_eq!(pearson_match(&exact, &reference).unwrap(), Some(1.0));
        assert_eq!(rmse_mae_match(&exact, &reference).unwrap(), (0.0, 0.0));
        let inverted = ConfidenceMatch::new(vec![
            (Pair::new(0, 0), 0.0),
            (Pair::new(0, 1), 1.0),
            (Pair::new(1, 1), 0.0),
        ])
        .unwrap();
        assert_eq!(pearson_match(&inverted, &reference).unwrap(), Some(-1.0));
    }

    #[test]
    fn undefined_correlations() {
        assert_eq!(pearson(&[0.3, 0.3, 0.3], &[0.0, 1.0, 0.0]).unwrap(), None);
        assert_eq!(pearson(&[0.3], &[1.0]).unwrap(), None);
        assert_eq!(kendall_tau(&[1.0, 1.0], &[0.0, 1.0]).unwrap(), None);
        assert!(pearson(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn kendall_orderings() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[4.0, 5.0, 9.0]).unwrap(), Some(1.0));
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[9.0, 5.0, 4.0]).unwrap(), Some(-1.0));
    }

    #[test]
    fn all_wrong_and_sure() {
        assert_eq!(rmse_mae(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), (1.0, 1.0));
        assert!(rmse_mae(&[], &[]).is_err());
    }
}
