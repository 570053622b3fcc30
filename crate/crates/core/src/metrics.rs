//! Error metrics and Gaussianity diagnostics.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist_sq, norm_sq};

/// `‖x̂ − x‖² / ‖x‖²`.
pub fn nmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(truth.len(), estimate.len())?;
    let energy = norm_sq(truth);
    if energy == 0.0 {
        return Err(Error::InvalidParameter("NMSE is undefined for an all-zero reference".into()));
    }
    Ok(dist_sq(estimate, truth) / energy)
}

/// [`nmse`] in dB. An exact recovery gives `-∞`.
pub fn nmse_db(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    Ok(10.0 * nmse(estimate, truth)?.log10())
}

/// `10·log10(peak² / MSE)`. An exact recovery gives `+∞`.
pub fn psnr_db(estimate: &[f64], truth: &[f64], peak: f64) -> Result<f64> {
    check_len(truth.len(), estimate.len())?;
    if truth.is_empty() {
        return Err(Error::InvalidDimensions("PSNR of an empty signal".into()));
    }
    if !(peak > 0.0) {
        return Err(Error::InvalidParameter(format!("PSNR peak must be > 0, got {peak}")));
    }
    let mse = dist_sq(estimate, truth) / truth.len() as f64;
    Ok(10.0 * (peak * peak / mse).log10())
}

/// A dB value for JSON output: infinities become `null` plus a flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decibels {
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exact: bool,
}

impl From<f64> for Decibels {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Decibels { value: Some(v), exact: false }
        } else {
            Decibels { value: None, exact: v.is_infinite() }
        }
    }
}

/// Sample moments of `e` after standardizing by its own mean and deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Plain (not excess) kurtosis; 3 for a Gaussian.
    pub kurtosis: f64,
}

pub fn moments(e: &[f64]) -> Result<Moments> {
    if e.len() < 2 {
        return Err(Error::InvalidDimensions("moments need at least two samples".into()));
    }
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in e {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if m2 == 0.0 {
        return Err(Error::InvalidParameter("moments of a constant sample".into()));
    }
    Ok(Moments { mean, variance: m2, skewness: m3 / m2.powf(1.5), kurtosis: m4 / (m2 * m2) })
}

/// Standardizes `e` by `sqrt(variance)`.
pub fn standardize(e: &[f64], variance: f64) -> Vec<f64> {
    let s = variance.sqrt();
    e.iter().map(|v| v / s).collect()
}

/// Standardizes `e` by its sample mean and deviation, sorts it, and pairs
/// it with standard-normal quantiles at `(i − 0.5)/n`.
pub fn qq_data(e: &[f64]) -> Result<Vec<(f64, f64)>> {
    if e.len() < 2 {
        return Err(Error::InvalidDimensions("QQ data needs at least two samples".into()));
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("QQ sample".into()));
    }
    let m = moments(e)?;
    let sd = m.variance.sqrt();
    let mut sorted: Vec<f64> = e.iter().map(|v| (v - m.mean) / sd).collect();
    sorted.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, s)| (normal.inverse_cdf((i as f64 + 0.5) / n), s))
        .collect())
}

pub fn write_qq_csv<W: Write>(mut w: W, pairs: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "theoretical,sample")?;
    for (t, s) in pairs {
        writeln!(w, "{t},{s}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn nmse_and_psnr_values() {
        let x = [3.0, 4.0];
        assert!((nmse(&[3.0, 3.0], &x).unwrap() - 1.0 / 25.0).abs() < 1e-15);
        assert_eq!(nmse_db(&x, &x).unwrap(), f64::NEG_INFINITY);
        assert!((nmse_db(&[0.0, 0.0], &x).unwrap()).abs() < 1e-12);
        // MSE = 1 at peak 255
        let p = psnr_db(&[1.0, 2.0], &[0.0, 3.0], 255.0).unwrap();
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert_eq!(psnr_db(&x, &x, 255.0).unwrap(), f64::INFINITY);
        assert!(nmse(&[1.0], &[0.0]).is_err());
        assert!(nmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn decibel_sentinels_serialize() {
        let exact: Decibels = f64::INFINITY.into();
        assert_eq!(serde_json::to_string(&exact).unwrap(), r#"{"value":null,"exact":true}"#);
        let normal: Decibels = (-12.5).into();
        assert_eq!(serde_json::to_string(&normal).unwrap(), r#"{"value":-12.5}"#);
    }

    #[test]
    fn gaussian_moments() {
        let e = rng::gaussian_vec(&mut rng::stream(11, 0), 200_000);
        let m = moments(&e).unwrap();
        assert!(m.skewness.abs() < 0.03);
        assert!((m.kurtosis - 3.0).abs() < 0.06);
        assert!((m.variance - 1.0).abs() < 0.01);
    }

    #[test]
    fn qq_is_monotone_and_symmetric() {
        let pairs = qq_data(&[0.3, -1.0, 2.0, 0.0, 5.0]).unwrap();
        assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        assert!(pairs[2].0.abs() < 1e-12);
        assert!((pairs[0].0 + pairs[4].0).abs() < 1e-12);
        assert!((pairs[0].0 - (-1.2815515655446004)).abs() < 1e-9);
        assert!(qq_data(&[1.0, 1.0, 1.0]).is_err());
        assert!(qq_data(&[1.0]).is_err());
    }

    #[test]
    fn qq_is_shift_invariant() {
        let e = rng::gaussian_vec(&mut rng::stream(12, 0), 500);
        let shifted: Vec<f64> = e.iter().map(|v| v + 7.5).collect();
        let (a, b) = (qq_data(&e).unwrap(), qq_data(&shifted).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((p.1 - q.1).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_unit_error_psnr() {
        let x = vec![100.0; 16];
        let xh = vec![101.0; 16];
        assert!((psnr_db(&xh, &x, 255.0).unwrap() - 10.0 * 65025f64.log10()).abs() < 1e-12);
        assert!(psnr_db(&[255.0], &[0.0], 255.0).unwrap().abs() < 1e-12);
        let tenth: Vec<f64> = x.iter().map(|v| 1.1 * v).collect();
        assert!((nmse_db(&tenth, &x).unwrap() + 20.0).abs() < 1e-9);
    }
}
