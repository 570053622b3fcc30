//! Recovers an 8-bit image from 30% of its sign-flipped DCT coefficients with
//! the extrinsic SURE-LET denoiser, and writes the result.
//!
//! cargo run --release --example image_recovery -- [input.pgm] [output.pgm]

use dturbo::fixtures::piecewise_smooth;
use dturbo::pgm::{load_pgm, save_pgm, GrayImage};
use dturbo::prelude::*;

fn main() -> dturbo::Result<()> {
    let mut args = std::env::args().skip(1);
    let img = match args.next() {
        Some(path) => load_pgm(path)?,
        None => piecewise_smooth(128, 128, 1)?,
    };
    let out = args.next().unwrap_or_else(|| "recovered.pgm".into());
    let x = img.to_signal();
    let n = x.len();
    let op = SensingOperator::build(n, (0.3 * n as f64) as usize, TransformKind::Dct, Variant::SignFlipped, 5)?;
    let y = op.apply(&x)?;

    let spec = DenoiserSpec::SureLet(SureLetConfig {
        transform: TransformKind::Haar,
        shape: Some([img.height, img.width]),
        ..Default::default()
    });
    let mut obs = TruthObserver::new(&x).with_peak(255.0);
    let trace = run_d_turbo_cs(&op, &y, 0.0, &spec, &StoppingRule::new(1e-4, 20)?, &mut obs).map_err(|a| a.error)?;
    for r in &trace.records {
        println!("iteration {:>2}: PSNR {:.2} dB", r.iteration, r.psnr.unwrap_or(f64::NAN));
    }
    save_pgm(&out, &GrayImage::from_signal(&trace.estimate, img.width, img.height)?)?;
    println!("wrote {out}");
    Ok(())
}
