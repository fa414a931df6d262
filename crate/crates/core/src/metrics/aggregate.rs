use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Summary statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// 12.5th and 87.5th percentiles.
    pub ci75: (f64, f64),
    /// 2.5th and 97.5th percentiles.
    pub ci95: (f64, f64),
    pub min: f64,
    pub max: f64,
}

/// Percentile `q ∈ [0, 100]` of ascending `sorted`, interpolating linearly
/// between order statistics at rank `q / 100 · (n - 1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let rank = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        bail!(Validation, "aggregate of empty sample");
    }
    if values.iter().any(|v| v.is_nan()) {
        bail!(Numeric, "NaN in aggregate input");
    }
    let mut s: Vec<f64> = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(Aggregate {
        count: s.len(),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        median: percentile(&s, 50.0),
        ci75: (percentile(&s, 12.5), percentile(&s, 87.5)),
        ci95: (percentile(&s, 2.5), percentile(&s, 97.5)),
        min: s[0],
        max: s[s.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let a = aggregate(&[0.3]).unwrap();
        assert_eq!((a.mean, a.median, a.ci75, a.ci95), (0.3, 0.3, (0.3, 0.3), (0.3, 0.3)));
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        assert_eq!(aggregate(&v).unwrap().median, 4.5);
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        let a = aggregate(&v).unwrap();
        assert!((a.ci95.0 - 2.5).abs() < 1e-12 && (a.ci95.1 - 97.5).abs() < 1e-12);
        assert!((a.ci75.0 - 12.5).abs() < 1e-12);
        assert!(aggregate(&[]).is_err());
    }
}
