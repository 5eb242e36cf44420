use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

/// Two-tailed paired Student t-test with `n - 1` degrees of freedom.
///
/// Identical vectors give `(0, 1)`. Constant nonzero differences give an
/// infinite statistic and `p = 0`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<(f64, f64), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if diffs.iter().all(|d| *d == 0.0) {
        return Ok((0.0, 1.0));
    }
    if var == 0.0 {
        return Ok((mean.signum() * f64::INFINITY, 0.0));
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok((t, p))
}
