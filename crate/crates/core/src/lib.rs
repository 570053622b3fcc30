//! Turbo compressed sensing for partial orthogonal sensing operators.
//!
//! The recovery alternates two modules. Module A is a closed-form LMMSE
//! step that exploits `A·Aᵀ = I`; Module B is a denoiser wrapped so that its
//! output error is uncorrelated with its input error ("extrinsic"). With the
//! Bernoulli-Gaussian MMSE denoiser this is classic Turbo-CS
//! ([`turbo::run_turbo_cs`]); with any other denoiser (SURE-LET, singular
//! value thresholding or a black box) it is the denoising-based variant
//! ([`turbo::run_d_turbo_cs`]). [`evolution`] predicts the per-iteration
//! error of both with a scalar recursion.
//!
//! ```no_run
//! use dturbo::prelude::*;
//!
//! let n = 4096;
//! let prior = BernoulliGaussianPrior::unit_energy(0.2).unwrap();
//! let x = prior.sample(&mut dturbo::rng::stream(1, dturbo::rng::SIGNAL), n);
//! let op = SensingOperator::build(n, n / 2, TransformKind::Dct, Variant::Plain, 7).unwrap();
//! let y = op.apply(&x).unwrap();
//! let spec = DenoiserSpec::SureLet(SureLetConfig { transform: TransformKind::Identity, ..Default::default() });
//! let trace = run_d_turbo_cs(&op, &y, 0.0, &spec, &StoppingRule::new(1e-4, 20).unwrap(), &mut NoObserver)
//!     .unwrap();
//! println!("NMSE {:.1} dB", nmse_db(&trace.estimate, &x).unwrap());
//! ```

pub mod denoisers;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod extrinsic;
pub mod fixtures;
pub mod linalg;
pub mod metrics;
pub mod pgm;
pub mod rng;
pub mod sensing;
pub mod transform;
pub mod turbo;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::denoisers::{
        BernoulliGaussianPrior, BlackBoxDenoiser, BlackBoxSpec, DenoiserSpec, MedianFilter, SoftThreshold,
        SureLetConfig, SvtConfig,
    };
    pub use crate::evolution::{compare_evolution_to_simulation, evolve, EvolutionSettings, ModuleB, Reference};
    pub use crate::extrinsic::extrinsic_denoise;
    pub use crate::metrics::{nmse_db, psnr_db};
    pub use crate::sensing::{MeasurementModel, SensingOperator, Variant};
    pub use crate::transform::TransformKind;
    pub use crate::turbo::{run_d_turbo_cs, run_turbo_cs, NoObserver, StoppingRule, TruthObserver};
    pub use crate::{Error, Result};
}
