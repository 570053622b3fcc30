//! Shows why images need the sign-flipped operator: with plain DCT rows the
//! Module-A error is far from Gaussian and the recursion's prediction fails.
//! Writes `qq_plain.csv` and `qq_sign_flipped.csv`.
//!
//! cargo run --release --example sign_flip_gaussianity

use dturbo::metrics::{moments, qq_data, write_qq_csv};
use dturbo::prelude::*;

fn main() -> dturbo::Result<()> {
    let img = dturbo::fixtures::piecewise_smooth(128, 128, 1)?;
    let x = img.to_signal();
    let n = x.len();
    let m = (0.3 * n as f64).round() as usize;
    let spec = DenoiserSpec::BlackBox(BlackBoxSpec::new(BlackBoxDenoiser::Median(MedianFilter {
        rows: 128,
        cols: 128,
        radius: 1,
    })));
    let evo = evolve(
        &EvolutionSettings { n, m, noise_var: 0.0, horizon: 8, mc_trials: 4, seed: 1 },
        &ModuleB::Extrinsic(spec.clone()),
        &Reference::Fixed(x.clone()),
    )?;
    let predicted = evo.normalized_db();

    for variant in [Variant::Plain, Variant::SignFlipped] {
        let op = SensingOperator::build(n, m, TransformKind::Dct, variant, 5)?;
        let y = op.apply(&x)?;
        let mut obs = TruthObserver::new(&x).keep_module_a_errors();
        let trace = match run_d_turbo_cs(&op, &y, 0.0, &spec, &StoppingRule::new(f64::MIN_POSITIVE, 8)?, &mut obs) {
            Ok(t) => t,
            Err(a) => a.trace,
        };
        let second = obs.module_a_errors[1].standardized();
        let mo = moments(&second)?;
        println!("{variant:?}: skewness {:.3}, kurtosis {:.3} at iteration 2", mo.skewness, mo.kurtosis);
        for r in &trace.records {
            println!(
                "  iteration {}: predicted {:>7.2} dB, simulated {:>7.2} dB",
                r.iteration,
                predicted[r.iteration],
                10.0 * r.nmse_ext.unwrap().log10()
            );
        }
        let path = format!("qq_{}.csv", if variant == Variant::Plain { "plain" } else { "sign_flipped" });
        let file = std::fs::File::create(&path).map_err(|e| dturbo::Error::Io { path: path.clone().into(), source: e })?;
        write_qq_csv(file, &qq_data(&second)?).map_err(|e| dturbo::Error::Io { path: path.into(), source: e })?;
    }
    Ok(())
}
