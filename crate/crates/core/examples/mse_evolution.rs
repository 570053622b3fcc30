//! Compares the MSE-evolution prediction with the NMSE of ten simulated
//! LET-Turbo-CS runs on sparse signals.
//!
//! cargo run --release --example mse_evolution

use dturbo::evolution::compare_evolution_to_simulation;
use dturbo::prelude::*;
use dturbo::rng;

fn main() -> dturbo::Result<()> {
    let (n, m, horizon) = (20000, 10000, 20);
    let prior = BernoulliGaussianPrior::unit_energy(0.27)?;
    let spec = DenoiserSpec::SureLet(SureLetConfig { transform: TransformKind::Identity, ..Default::default() });

    let settings = EvolutionSettings { n, m, noise_var: 0.0, horizon, mc_trials: 32, seed: 1 };
    let evo = evolve(&settings, &ModuleB::Extrinsic(spec.clone()), &Reference::BernoulliGaussian(prior))?;

    let stop = StoppingRule::new(f64::MIN_POSITIVE, horizon)?;
    let mut runs = Vec::new();
    for seed in 0..10 {
        let x = prior.sample(&mut rng::stream(seed, rng::SIGNAL), n);
        let op = SensingOperator::build(n, m, TransformKind::Dct, Variant::Plain, seed)?;
        let y = op.apply(&x)?;
        runs.push(run_d_turbo_cs(&op, &y, 0.0, &spec, &stop, &mut TruthObserver::new(&x)).map_err(|a| a.error)?);
    }
    let gaps = compare_evolution_to_simulation(&evo, &runs)?;
    let predicted = evo.normalized_db();
    println!("iter  predicted  simulated");
    for (t, gap) in gaps.iter().enumerate() {
        println!("{:>4}  {:>9.2}  {:>9.2}", t + 1, predicted[t + 1], predicted[t + 1] + gap);
    }
    Ok(())
}
