//! Losses and error metrics.

use crate::error::{Error, Result};

/// Symmetric mean absolute percentage error, in percent.
///
/// `100/n * sum |p - t| / (|p| + |t|)`, with `0/0` terms counted as 0.
pub fn smape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Usage(format!(
            "sMAPE of series with lengths {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Usage("sMAPE of empty series".into()));
    }
    let total: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let den = p.abs() + t.abs();
            if den == 0.0 {
                0.0
            } else {
                (p - t).abs() / den
            }
        })
        .sum();
    Ok(100.0 * total / pred.len() as f64)
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Usage(format!(
            "MSE needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let seed = pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Ok((loss, seed))
}

/// Mean softmax cross-entropy over rows of logits, and its gradient.
pub fn cross_entropy_loss(logits: &[Vec<f64>], targets: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(Error::Usage(
            "cross-entropy needs one target per non-empty logit row".into(),
        ));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut seeds = Vec::with_capacity(logits.len());
    for (row, &target) in logits.iter().zip(targets) {
        if target >= row.len() {
            return Err(Error::Usage(format!(
                "target class {target} out of {} classes",
                row.len()
            )));
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        loss += sum.ln() + max - row[target];
        seeds.push(
            exps.iter()
                .enumerate()
                .map(|(c, e)| (e / sum - if c == target { 1.0 } else { 0.0 }) / n)
                .collect(),
        );
    }
    Ok((loss / n, seeds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smape_worked_examples() {
        assert_eq!(smape(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(smape(&[1.0], &[-1.0]).unwrap(), 100.0);
        let v = smape(&[2.0, 3.0], &[1.0, 3.0]).unwrap();
        assert!((v - 100.0 / 6.0).abs() < 1e-12);
        assert_eq!(smape(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(smape(&[], &[]).is_err());
    }

    #[test]
    fn mse_of_equal_series_is_zero() {
        let (l, s) = mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let (l, _) = cross_entropy_loss(&[vec![0.3; 5], vec![-1.0; 5]], &[0, 4]).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-14);
    }
}
