//! Monte-Carlo summaries.

use rand::RngExt;
use serde::Serialize;

use crate::error::{Result, invalid};
use crate::rng::StreamKey;

/// Bootstrap resamples behind every standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Sample covariance of paired replicate values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovEstimate {
    pub estimate: f64,
    /// Bootstrap standard error.
    pub se: f64,
    pub replicates: usize,
    pub n: f64,
}

/// Mean and its standard error `s/√R`.
pub fn mean_se(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 2 {
        return Err(invalid("need at least two replicates"));
    }
    let r = x.len() as f64;
    let m = x.iter().sum::<f64>() / r;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r - 1.0);
    Ok((m, (v / r).sqrt()))
}

/// Covariance with `R - 1` normalisation.
pub fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let r = x.len() as f64;
    let mx = x.iter().sum::<f64>() / r;
    let my = y.iter().sum::<f64>() / r;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (r - 1.0)
}

/// Covariance of paired samples with a bootstrap standard error; the
/// resampling stream is fixed by `key`.
pub fn estimate_cov(x: &[f64], y: &[f64], n: f64, key: StreamKey) -> Result<CovEstimate> {
    if x.len() != y.len() {
        return Err(invalid("paired samples differ in length"));
    }
    let r = x.len();
    if r < 2 {
        return Err(invalid("need at least two replicates"));
    }
    let estimate = sample_cov(x, y);
    let mut rng = key.auxiliary(1);
    let mut bx = vec![0.0; r];
    let mut by = vec![0.0; r];
    let mut boots = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for k in 0..r {
            let i = rng.random_range(0..r);
            bx[k] = x[i];
            by[k] = y[i];
        }
        boots.push(sample_cov(&bx, &by));
    }
    let (_, se_mean) = mean_se(&boots)?;
    // mean_se divides by √B; undo it to get the bootstrap spread.
    let se = se_mean * (BOOTSTRAP_RESAMPLES as f64).sqrt();
    Ok(CovEstimate { estimate, se, replicates: r, n })
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn degenerate_and_signed_cases() {
        let key = StreamKey::new(1, 0);
        let c = vec![2.5; 50];
        let e = estimate_cov(&c, &c, 1.0, key).unwrap();
        assert_eq!(e.estimate, 0.0);
        let mut rng = key.particle(0);
        let z: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let pos = estimate_cov(&z, &z, 1.0, key).unwrap();
        let anti = estimate_cov(&z, &neg, 1.0, key).unwrap();
        assert!((pos.estimate - 1.0).abs() < 4.0 * (2.0f64 / 4000.0).sqrt());
        assert!((pos.se / (2.0f64 / 4000.0).sqrt() - 1.0).abs() < 0.25, "se {}", pos.se);
        assert_eq!(anti.estimate, -pos.estimate);
        assert!(estimate_cov(&[1.0], &[1.0], 1.0, key).is_err());
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
