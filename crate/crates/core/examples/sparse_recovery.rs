//! Recovers a Bernoulli-Gaussian signal from half as many DCT measurements,
//! once with the MMSE denoiser (Turbo-CS) and once with SURE-LET (D-Turbo-CS).
//!
//! cargo run --release --example sparse_recovery

use dturbo::prelude::*;
use dturbo::rng;

fn main() -> dturbo::Result<()> {
    let n = 20000;
    let prior = BernoulliGaussianPrior::unit_energy(0.27)?;
    let x = prior.sample(&mut rng::stream(1, rng::SIGNAL), n);
    let op = SensingOperator::build(n, n / 2, TransformKind::Dct, Variant::Plain, 1)?;
    let y = op.apply(&x)?;
    let stop = StoppingRule::new(1e-4, 30)?;

    let mmse = run_turbo_cs(&op, &y, 0.0, &prior, &stop, &mut TruthObserver::new(&x)).map_err(|a| a.error)?;
    let spec = DenoiserSpec::SureLet(SureLetConfig { transform: TransformKind::Identity, ..Default::default() });
    let sure_let = run_d_turbo_cs(&op, &y, 0.0, &spec, &stop, &mut TruthObserver::new(&x)).map_err(|a| a.error)?;

    println!("iter  MMSE-Turbo-CS  LET-Turbo-CS   (NMSE dB)");
    for t in 0..mmse.iterations().max(sure_let.iterations()) {
        let cell = |tr: &dturbo::turbo::RecoveryTrace| {
            tr.records.get(t).and_then(|r| r.nmse).map(|v| format!("{:>13.2}", 10.0 * v.log10())).unwrap_or_default()
        };
        println!("{:>4}  {}  {}", t + 1, cell(&mmse), cell(&sure_let));
    }
    Ok(())
}
