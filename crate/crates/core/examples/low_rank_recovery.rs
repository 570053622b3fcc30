//! Recovers a rank-10 128×128 matrix from 48% of its sign-flipped DCT
//! coefficients with the extrinsic singular value thresholding denoiser.
//!
//! cargo run --release --example low_rank_recovery

use dturbo::fixtures::low_rank;
use dturbo::prelude::*;

fn main() -> dturbo::Result<()> {
    let (rows, cols) = (128, 128);
    let x = low_rank(rows, cols, 10, 3)?;
    let n = x.len();
    let op = SensingOperator::build(n, (0.48 * n as f64).round() as usize, TransformKind::Dct, Variant::SignFlipped, 5)?;
    let y = op.apply(&x)?;
    let spec = DenoiserSpec::Svt(SvtConfig::new(rows, cols));
    let trace = run_d_turbo_cs(&op, &y, 0.0, &spec, &StoppingRule::new(1e-4, 30)?, &mut TruthObserver::new(&x))
        .map_err(|a| a.error)?;
    for r in &trace.records {
        println!("iteration {:>2}: NMSE {:.2} dB, v_B^ext {:.3e}", r.iteration, 10.0 * r.nmse.unwrap().log10(), r.v_b_ext);
    }
    Ok(())
}
