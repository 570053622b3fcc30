//! The extrinsic wrapper on its own: denoise `r = x + τ·e` and compare the
//! SURE estimate of the extrinsic output with its true error.
//!
//! cargo run --release --example extrinsic_denoiser

use dturbo::linalg::dist_sq;
use dturbo::prelude::*;
use dturbo::rng;

fn main() -> dturbo::Result<()> {
    let n = 8192;
    let tau_sq: f64 = 0.3;
    let prior = BernoulliGaussianPrior::unit_energy(0.2)?;
    let x = prior.sample(&mut rng::stream(4, rng::SIGNAL), n);
    let e = rng::gaussian_vec(&mut rng::stream(4, rng::MEASUREMENT_NOISE), n);
    let r: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + tau_sq.sqrt() * b).collect();

    for spec in [
        DenoiserSpec::MmseBg(prior),
        DenoiserSpec::SureLet(SureLetConfig { transform: TransformKind::Identity, ..Default::default() }),
        DenoiserSpec::BlackBox(BlackBoxSpec::new(BlackBoxDenoiser::SoftThreshold(SoftThreshold { scale: 1.5 })).with_probes(4)),
    ] {
        let out = extrinsic_denoise(&spec, &r, tau_sq, 0)?;
        let res = &out.result;
        println!(
            "{:>9}: α = {:.4}, c = {:.4}, SURE {:.5}, true MSE {:.5}",
            spec.label(),
            res.alpha,
            res.c,
            res.sure,
            dist_sq(&res.x_ext, &x) / n as f64
        );
    }
    Ok(())
}
