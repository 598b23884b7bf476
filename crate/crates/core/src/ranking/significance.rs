use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-tailed paired Student's t-test on `a[i] - b[i]`, with `|a| - 1` degrees of
/// freedom. Returns 1 when the differences have zero variance.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "paired t-test needs two equal-length samples of size ≥ 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Ok(1.0);
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}
