//! Plugs an arbitrary closure into D-Turbo-CS as a black-box denoiser. Its
//! divergence is estimated by Monte-Carlo probing.
//!
//! cargo run --release --example custom_denoiser

use dturbo::prelude::*;

/// 3×3 mean filter on a column-major image.
fn box_blur(rows: usize, cols: usize) -> impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync {
    move |r: &[f64], _tau_sq: f64| {
        let mut out = vec![0.0; r.len()];
        for c in 0..cols {
            for i in 0..rows {
                let (mut sum, mut count) = (0.0, 0.0);
                for cc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    for ii in i.saturating_sub(1)..=(i + 1).min(rows - 1) {
                        sum += r[ii + cc * rows];
                        count += 1.0;
                    }
                }
                out[i + c * rows] = sum / count;
            }
        }
        out
    }
}

fn main() -> dturbo::Result<()> {
    let img = dturbo::fixtures::piecewise_smooth(96, 96, 2)?;
    let x = img.to_signal();
    let n = x.len();
    let op = SensingOperator::build(n, n / 2, TransformKind::Dct, Variant::SignFlipped, 9)?;
    let y = op.apply(&x)?;

    for (name, denoiser) in [
        ("box blur", BlackBoxDenoiser::custom("box blur", box_blur(96, 96))),
        ("median", BlackBoxDenoiser::Median(MedianFilter { rows: 96, cols: 96, radius: 1 })),
    ] {
        let spec = DenoiserSpec::BlackBox(BlackBoxSpec::new(denoiser).with_probes(2));
        let mut obs = TruthObserver::new(&x).with_peak(255.0);
        match run_d_turbo_cs(&op, &y, 0.0, &spec, &StoppingRule::new(1e-4, 30)?, &mut obs) {
            Ok(trace) => println!(
                "{name:>8}: {} iterations, PSNR {:.2} dB",
                trace.iterations(),
                psnr_db(&trace.estimate, &x, 255.0)?
            ),
            Err(aborted) => println!("{name:>8}: stopped after {} iterations: {}", aborted.trace.iterations(), aborted.error),
        }
    }
    Ok(())
}
