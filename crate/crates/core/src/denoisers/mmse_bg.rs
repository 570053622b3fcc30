//! Scalar MMSE denoiser for the Bernoulli-Gaussian (spike-and-slab) prior
//! `x ~ (1−ρ)·δ₀ + ρ·N(0, σx²)` observed as `r = x + N(0, τ²)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliGaussianPrior {
    pub rho: f64,
    pub signal_variance: f64,
}

impl BernoulliGaussianPrior {
    pub fn new(rho: f64, signal_variance: f64) -> Result<Self> {
        let prior = Self { rho, signal_variance };
        prior.validate()?;
        Ok(prior)
    }

    /// Nonzero variance `1/ρ`, so that `E[x²] = 1`.
    pub fn unit_energy(rho: f64) -> Result<Self> {
        Self::new(rho, 1.0 / rho)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.signal_variance > 0.0) || !self.signal_variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        Ok(())
    }

    /// `E[x²]`
    pub fn energy(&self) -> f64 {
        self.rho * self.signal_variance
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Vec<f64> {
        let sd = self.signal_variance.sqrt();
        (0..n)
            .map(|_| {
                let active = rng.random::<f64>() < self.rho;
                let g: f64 = StandardNormal.sample(rng);
                if active {
                    sd * g
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct MmsePosterior {
    pub mean: Vec<f64>,
    /// Per-component posterior variance.
    pub variance: Vec<f64>,
}

impl MmsePosterior {
    /// `(1/n)·Σ var[xᵢ | rᵢ]`
    pub fn average_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len().max(1) as f64
    }

    /// `Σ ∂E[xᵢ|rᵢ]/∂rᵢ`, which equals `Σ var[xᵢ|rᵢ] / τ²` under Gaussian noise.
    pub fn divergence(&self, tau_sq: f64) -> f64 {
        self.variance.iter().sum::<f64>() / tau_sq
    }
}

/// Posterior probability that `r` came from the slab, computed from the
/// log-likelihood ratio so that `|r| ≫ τ` does not underflow.
fn slab_responsibility(r: f64, tau_sq: f64, prior: &BernoulliGaussianPrior) -> f64 {
    if prior.rho >= 1.0 {
        return 1.0;
    }
    let slab = prior.signal_variance + tau_sq;
    let llr = (prior.rho / (1.0 - prior.rho)).ln() + 0.5 * (tau_sq / slab).ln()
        + 0.5 * r * r * (1.0 / tau_sq - 1.0 / slab);
    if llr >= 0.0 {
        1.0 / (1.0 + (-llr).exp())
    } else {
        let e = llr.exp();
        e / (1.0 + e)
    }
}

pub fn mmse_bg_denoise(
    r: &[f64],
    tau_sq: f64,
    prior: &BernoulliGaussianPrior,
) -> Result<MmsePosterior> {
    if !(tau_sq > 0.0) || !tau_sq.is_finite() {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {tau_sq}")));
    }
    prior.validate()?;
    let gain = prior.signal_variance / (prior.signal_variance + tau_sq);
    let slab_var = gain * tau_sq;
    let (mean, variance) = r
        .iter()
        .map(|&ri| {
            let pi = slab_responsibility(ri, tau_sq, prior);
            let mu = gain * ri;
            let m = pi * mu;
            // E[x²|r] − E[x|r]², written to stay nonnegative
            let v = pi * slab_var + pi * (1.0 - pi) * mu * mu;
            (m, v)
        })
        .unzip();
    Ok(MmsePosterior { mean, variance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(x: f64, var: f64) -> f64 {
        (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    /// Posterior moments by composite Simpson quadrature over the slab.
    fn quadrature(r: f64, tau_sq: f64, rho: f64, sx2: f64) -> (f64, f64) {
        let sd = sx2.sqrt().max(tau_sq.sqrt());
        let (lo, hi) = (r.min(0.0) - 14.0 * sd, r.max(0.0) + 14.0 * sd);
        let steps = 40_000;
        let h = (hi - lo) / steps as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for k in 0..=steps {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == steps { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let f = w * rho * gauss(x, sx2) * gauss(r - x, tau_sq);
            z += f;
            m1 += f * x;
            m2 += f * x * x;
        }
        let (z, m1, m2) = (z * h / 3.0, m1 * h / 3.0, m2 * h / 3.0);
        let spike = (1.0 - rho) * gauss(r, tau_sq);
        let total = z + spike;
        let mean = m1 / total;
        (mean, m2 / total - mean * mean)
    }

    #[test]
    fn matches_quadrature_example() {
        let prior = BernoulliGaussianPrior::new(0.27, 1.0 / 0.27).unwrap();
        let post = mmse_bg_denoise(&[1.0], 0.25, &prior).unwrap();
        let (m, v) = quadrature(1.0, 0.25, 0.27, 1.0 / 0.27);
        assert!((post.mean[0] - m).abs() < 1e-8, "{} vs {m}", post.mean[0]);
        assert!((post.variance[0] - v).abs() < 1e-8);
    }

    #[test]
    fn zero_input_gives_zero_mean() {
        let prior = BernoulliGaussianPrior::unit_energy(0.1).unwrap();
        assert_eq!(mmse_bg_denoise(&[0.0], 0.5, &prior).unwrap().mean[0], 0.0);
    }

    #[test]
    fn dense_prior_is_wiener_filter() {
        let prior = BernoulliGaussianPrior::new(1.0, 2.0).unwrap();
        let post = mmse_bg_denoise(&[1.5, -0.3], 0.5, &prior).unwrap();
        assert!((post.mean[0] - 1.5 * 2.0 / 2.5).abs() < 1e-15);
        assert!((post.mean[1] + 0.3 * 2.0 / 2.5).abs() < 1e-15);
        assert!((post.average_variance() - 2.0 * 0.5 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn huge_inputs_do_not_underflow() {
        let prior = BernoulliGaussianPrior::unit_energy(0.05).unwrap();
        let post = mmse_bg_denoise(&[1e4, -1e4], 1e-6, &prior).unwrap();
        assert!(post.mean.iter().all(|v| v.is_finite()));
        assert!((post.mean[0] / 1e4 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn divergence_matches_finite_differences() {
        let prior = BernoulliGaussianPrior::unit_energy(0.27).unwrap();
        let r: Vec<f64> = (0..50).map(|i| -3.0 + 0.123 * i as f64).collect();
        let tau_sq = 0.3;
        let post = mmse_bg_denoise(&r, tau_sq, &prior).unwrap();
        let h = 1e-6;
        let fd: f64 = r
            .iter()
            .map(|&ri| {
                let up = mmse_bg_denoise(&[ri + h], tau_sq, &prior).unwrap().mean[0];
                let dn = mmse_bg_denoise(&[ri - h], tau_sq, &prior).unwrap().mean[0];
                (up - dn) / (2.0 * h)
            })
            .sum();
        assert!((post.divergence(tau_sq) - fd).abs() < 1e-6 * fd.abs().max(1.0));
    }

    #[test]
    fn rejects_nonpositive_noise() {
        let prior = BernoulliGaussianPrior::unit_energy(0.5).unwrap();
        assert!(mmse_bg_denoise(&[1.0], 0.0, &prior).is_err());
        assert!(BernoulliGaussianPrior::new(0.0, 1.0).is_err());
        assert!(BernoulliGaussianPrior::new(1.2, 1.0).is_err());
    }
}
