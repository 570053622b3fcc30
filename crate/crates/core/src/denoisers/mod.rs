//! Module-B denoisers and their serializable descriptions.

pub mod builtin;
pub mod mmse_bg;
pub mod sure_let;
pub mod svt;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtin::{Identity, MedianFilter, SoftThreshold};
pub use mmse_bg::{mmse_bg_denoise, BernoulliGaussianPrior, MmsePosterior};
pub use sure_let::{let_extrinsic_solve, let_kernels, LetKernelParams, LetKernels, LetSolution, SureLetConfig};
pub use svt::{svt, svt_divergence, svt_extrinsic, SvdFactors, SvtConfig, SvtExtrinsic};

/// A denoiser `D(r; τ²)` for `r = x + N(0, τ²·I)`.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, r: &[f64], tau_sq: f64) -> Vec<f64>;
}

impl<F> Denoiser for F
where
    F: Fn(&[f64], f64) -> Vec<f64> + Send + Sync,
{
    fn denoise(&self, r: &[f64], tau_sq: f64) -> Vec<f64> {
        self(r, tau_sq)
    }
}

/// A user-supplied denoiser. Not serializable.
#[derive(Clone)]
pub struct CustomDenoiser {
    pub name: String,
    pub inner: Arc<dyn Denoiser>,
}

impl CustomDenoiser {
    pub fn new(name: impl Into<String>, inner: impl Denoiser + 'static) -> Self {
        Self { name: name.into(), inner: Arc::new(inner) }
    }
}

impl fmt::Debug for CustomDenoiser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomDenoiser({})", self.name)
    }
}

impl PartialEq for CustomDenoiser {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BlackBoxDenoiser {
    Identity,
    SoftThreshold(SoftThreshold),
    Median(MedianFilter),
    #[serde(skip)]
    Custom(CustomDenoiser),
}

impl BlackBoxDenoiser {
    pub fn custom(name: impl Into<String>, inner: impl Denoiser + 'static) -> Self {
        BlackBoxDenoiser::Custom(CustomDenoiser::new(name, inner))
    }

    pub fn denoise(&self, r: &[f64], tau_sq: f64) -> Vec<f64> {
        match self {
            BlackBoxDenoiser::Identity => Identity.denoise(r, tau_sq),
            BlackBoxDenoiser::SoftThreshold(d) => d.denoise(r, tau_sq),
            BlackBoxDenoiser::Median(d) => d.denoise(r, tau_sq),
            BlackBoxDenoiser::Custom(d) => d.inner.denoise(r, tau_sq),
        }
    }
}

fn one() -> usize {
    1
}

/// A denoiser without a closed-form divergence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlackBoxSpec {
    pub denoiser: BlackBoxDenoiser,
    /// Monte-Carlo probes per divergence estimate.
    #[serde(default = "one")]
    pub probes: usize,
    /// Finite-difference step; `None` uses `max(‖r‖∞, 1)·1e-3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl BlackBoxSpec {
    pub fn new(denoiser: BlackBoxDenoiser) -> Self {
        Self { denoiser, probes: 1, delta: None, seed: 0 }
    }

    pub fn with_probes(mut self, probes: usize) -> Self {
        self.probes = probes;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn step(&self, r: &[f64]) -> f64 {
        self.delta.unwrap_or_else(|| r.iter().fold(1.0_f64, |m, v| m.max(v.abs())) * 1e-3)
    }
}

/// Which Module-B denoiser to run, with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserSpec {
    MmseBg(BernoulliGaussianPrior),
    SureLet(SureLetConfig),
    Svt(SvtConfig),
    BlackBox(BlackBoxSpec),
}

impl DenoiserSpec {
    /// Checks parameters, and the signal length when known.
    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        match self {
            DenoiserSpec::MmseBg(p) => p.validate(),
            DenoiserSpec::SureLet(cfg) => {
                cfg.validate()?;
                if let Some(n) = n {
                    cfg.basis(n)?;
                }
                Ok(())
            }
            DenoiserSpec::Svt(cfg) => cfg.validate(n),
            DenoiserSpec::BlackBox(bb) => {
                if bb.probes == 0 {
                    return Err(Error::InvalidParameter("black-box probes must be ≥ 1".into()));
                }
                if let Some(d) = bb.delta {
                    if !(d > 0.0) {
                        return Err(Error::InvalidParameter(format!("probe step must be > 0, got {d}")));
                    }
                }
                if let (BlackBoxDenoiser::Median(m), Some(n)) = (&bb.denoiser, n) {
                    if m.rows * m.cols != n {
                        return Err(Error::InvalidDimensions(format!(
                            "median shape {}×{} does not match signal length {n}",
                            m.rows, m.cols
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DenoiserSpec::MmseBg(_) => "mmse_bg",
            DenoiserSpec::SureLet(_) => "sure_let",
            DenoiserSpec::Svt(_) => "svt",
            DenoiserSpec::BlackBox(_) => "black_box",
        }
    }
}
