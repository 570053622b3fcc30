//! Divergence-free extrinsic denoisers.
//!
//! Any denoiser `D` is turned into `D_ext(r) = c·(D(r) − α·r)` with
//! `α = div D(r) / n`, which makes the divergence of `D_ext` vanish at `r`.
//! The scale `c` minimizes the SURE of `D_ext`, which for a divergence-free
//! map reduces to `‖D_ext(r) − r‖²/n − τ²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::denoisers::sure_let::{apply_let_extrinsic, let_extrinsic_solve, LetKernelParams};
use crate::denoisers::svt::{svt, svt_divergence, svt_extrinsic, SvdFactors};
use crate::denoisers::{mmse_bg_denoise, BlackBoxSpec, DenoiserSpec};
use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, dist_sq, dot, norm_sq};
use crate::rng::{self, Rng};
use crate::transform::OrthoTransform;

/// Relative size of `u = D(r) − α·r` below which the direction is degenerate.
const DEGENERATE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicResult {
    pub x_ext: Vec<f64>,
    /// `div D(r)`
    pub divergence: f64,
    /// `divergence / n`
    pub alpha: f64,
    pub c: f64,
    /// SURE estimate of `‖x_ext − x‖²/n`.
    pub sure: f64,
}

/// `‖d − r‖²/n + (2τ²/n)·div − τ²`
pub fn sure_of_map(d_out: &[f64], r: &[f64], tau_sq: f64, divergence: f64) -> Result<f64> {
    check_len(r.len(), d_out.len())?;
    let n = r.len() as f64;
    Ok(dist_sq(d_out, r) / n + 2.0 * tau_sq / n * divergence - tau_sq)
}

/// Builds the extrinsic estimate from a denoiser output `d = D(r)` and its
/// divergence.
pub fn extrinsic_combine(r: &[f64], d: &[f64], divergence: f64, tau_sq: f64) -> Result<ExtrinsicResult> {
    check_len(r.len(), d.len())?;
    if !all_finite(d) || !divergence.is_finite() {
        return Err(Error::NonFinite("denoiser output".into()));
    }
    let n = r.len() as f64;
    let alpha = divergence / n;
    let u: Vec<f64> = d.iter().zip(r).map(|(di, ri)| di - alpha * ri).collect();
    let u_sq = norm_sq(&u);
    let scale = norm_sq(d).max(norm_sq(r)).sqrt();
    if u_sq == 0.0 || u_sq.sqrt() <= DEGENERATE_TOLERANCE * scale {
        return Err(Error::DegenerateExtrinsic { norm: u_sq.sqrt(), direction: u });
    }
    let c = dot(r, &u) / u_sq;
    let x_ext: Vec<f64> = u.iter().map(|v| c * v).collect();
    let sure = dist_sq(&x_ext, r) / n - tau_sq;
    Ok(ExtrinsicResult { x_ext, divergence, alpha, c, sure })
}

/// Monte-Carlo divergence `mean ⟨ñ, (f(r + δ·ñ) − f(r))/δ⟩` over
/// `probes` standard-normal perturbations `ñ`.
pub fn mc_divergence(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    r: &[f64],
    delta: f64,
    probes: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("probe step must be > 0, got {delta}")));
    }
    if probes == 0 {
        return Err(Error::InvalidParameter("need at least one probe".into()));
    }
    if !all_finite(r) {
        return Err(Error::NonFinite("divergence input".into()));
    }
    let base = f(r);
    let mut total = 0.0;
    for _ in 0..probes {
        let probe = rng::gaussian_vec(rng, r.len());
        let shifted: Vec<f64> = r.iter().zip(&probe).map(|(a, p)| a + delta * p).collect();
        let out = f(&shifted);
        total += probe.iter().zip(out.iter().zip(&base)).map(|(p, (o, b))| p * (o - b)).sum::<f64>() / delta;
    }
    Ok(total / probes as f64)
}

fn black_box_divergence(bb: &BlackBoxSpec, r: &[f64], tau_sq: f64, probe_seed: u64) -> Result<f64> {
    let mut rng = rng::stream(rng::child_seed(bb.seed, probe_seed), rng::DIVERGENCE_PROBE);
    let f = |v: &[f64]| bb.denoiser.denoise(v, tau_sq);
    mc_divergence(&f, r, bb.step(r), bb.probes, &mut rng)
}

fn check_input(r: &[f64], tau_sq: f64) -> Result<()> {
    if !(tau_sq > 0.0) || !tau_sq.is_finite() {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {tau_sq}")));
    }
    if !all_finite(r) {
        return Err(Error::NonFinite("denoiser input".into()));
    }
    Ok(())
}

/// Divergence of the plain denoiser described by `spec` at `r`.
///
/// SURE-LET uses the SURE-optimal plain kernel weights and SVT the threshold
/// picked by the extrinsic search; black boxes are probed with the stream
/// derived from the black-box seed and `probe_seed`.
pub fn divergence(spec: &DenoiserSpec, r: &[f64], tau_sq: f64, probe_seed: u64) -> Result<f64> {
    check_input(r, tau_sq)?;
    spec.validate(Some(r.len()))?;
    match spec {
        DenoiserSpec::MmseBg(prior) => Ok(mmse_bg_denoise(r, tau_sq, prior)?.divergence(tau_sq)),
        DenoiserSpec::SureLet(cfg) => {
            let basis = cfg.basis(r.len())?;
            Ok(let_extrinsic_solve(r, tau_sq, &cfg.params(tau_sq)?, &basis)?.post_divergence)
        }
        DenoiserSpec::Svt(cfg) => {
            let ext = svt_extrinsic(&cfg.to_matrix(r), tau_sq, cfg.grid_size)?;
            let sigma = SvdFactors::new(&cfg.to_matrix(r))?.sigma;
            Ok(svt_divergence(&sigma, ext.theta, cfg.rows, cfg.cols))
        }
        DenoiserSpec::BlackBox(bb) => black_box_divergence(bb, r, tau_sq, probe_seed),
    }
}

#[derive(Clone, Debug)]
enum Frozen {
    Generic { spec: DenoiserSpec, tau_sq: f64 },
    Let { params: LetKernelParams, theta: [f64; 3], alphas: [f64; 3], basis: OrthoTransform },
    Svt { theta: f64, rows: usize, cols: usize },
}

/// Output of [`extrinsic_denoise`].
#[derive(Clone, Debug)]
pub struct ExtrinsicOutput {
    pub result: ExtrinsicResult,
    /// The plain denoiser output `D(r)`.
    pub x_post: Vec<f64>,
    frozen: Frozen,
}

impl ExtrinsicOutput {
    /// Evaluates the extrinsic map at `r` with every data-dependent
    /// coefficient (`α`, `c`, kernel weights, threshold) held at the values
    /// fitted by [`extrinsic_denoise`].
    pub fn apply_frozen(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len(self.result.x_ext.len(), r.len())?;
        let (c, alpha) = (self.result.c, self.result.alpha);
        match &self.frozen {
            Frozen::Generic { spec, tau_sq } => {
                let d = match spec {
                    DenoiserSpec::MmseBg(prior) => mmse_bg_denoise(r, *tau_sq, prior)?.mean,
                    DenoiserSpec::BlackBox(bb) => bb.denoiser.denoise(r, *tau_sq),
                    _ => unreachable!("only generic kinds are frozen generically"),
                };
                Ok(d.iter().zip(r).map(|(di, ri)| c * (di - alpha * ri)).collect())
            }
            Frozen::Let { params, theta, alphas, basis } => {
                Ok(apply_let_extrinsic(params, theta, alphas, r, basis))
            }
            Frozen::Svt { theta, rows, cols } => {
                let m = DMatrix::from_column_slice(*rows, *cols, r);
                let out = (svt(&m, *theta)? - &m * alpha) * c;
                Ok(out.as_slice().to_vec())
            }
        }
    }
}

/// Runs the denoiser described by `spec` on `r` and returns its
/// divergence-free extrinsic estimate.
///
/// SURE-LET folds `c` into its kernel weights (reported `c = 1`) and SVT
/// searches its threshold first; the other kinds go through
/// [`extrinsic_combine`].
pub fn extrinsic_denoise(
    spec: &DenoiserSpec,
    r: &[f64],
    tau_sq: f64,
    probe_seed: u64,
) -> Result<ExtrinsicOutput> {
    check_input(r, tau_sq)?;
    spec.validate(Some(r.len()))?;
    let n = r.len() as f64;
    match spec {
        DenoiserSpec::MmseBg(prior) => {
            let post = mmse_bg_denoise(r, tau_sq, prior)?;
            let result = extrinsic_combine(r, &post.mean, post.divergence(tau_sq), tau_sq)?;
            Ok(ExtrinsicOutput {
                result,
                x_post: post.mean,
                frozen: Frozen::Generic { spec: spec.clone(), tau_sq },
            })
        }
        DenoiserSpec::BlackBox(bb) => {
            let d = bb.denoiser.denoise(r, tau_sq);
            check_len(r.len(), d.len())?;
            let div = black_box_divergence(bb, r, tau_sq, probe_seed)?;
            let result = extrinsic_combine(r, &d, div, tau_sq)?;
            Ok(ExtrinsicOutput { result, x_post: d, frozen: Frozen::Generic { spec: spec.clone(), tau_sq } })
        }
        DenoiserSpec::SureLet(cfg) => {
            let basis = cfg.basis(r.len())?;
            let params = cfg.params(tau_sq)?;
            let sol = let_extrinsic_solve(r, tau_sq, &params, &basis)?;
            if sol.theta_ext.iter().all(|t| *t == 0.0) {
                return Err(Error::DegenerateExtrinsic { norm: 0.0, direction: vec![0.0; r.len()] });
            }
            let divergence: f64 = (0..3).map(|k| sol.theta_ext[k] * sol.alphas[k] * n).sum();
            let result = ExtrinsicResult {
                x_ext: sol.x_ext,
                divergence,
                alpha: divergence / n,
                c: 1.0,
                sure: sol.sure,
            };
            Ok(ExtrinsicOutput {
                result,
                x_post: sol.x_post,
                frozen: Frozen::Let { params, theta: sol.theta_ext, alphas: sol.alphas, basis },
            })
        }
        DenoiserSpec::Svt(cfg) => {
            let ext = svt_extrinsic(&cfg.to_matrix(r), tau_sq, cfg.grid_size)?;
            let result = ExtrinsicResult {
                x_ext: ext.x_ext.as_slice().to_vec(),
                divergence: ext.divergence,
                alpha: ext.alpha,
                c: ext.c,
                sure: ext.sure,
            };
            Ok(ExtrinsicOutput {
                result,
                x_post: ext.x_post.as_slice().to_vec(),
                frozen: Frozen::Svt { theta: ext.theta, rows: cfg.rows, cols: cfg.cols },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::builtin::soft_threshold;
    use crate::denoisers::{BlackBoxDenoiser, BernoulliGaussianPrior, SureLetConfig, SvtConfig};

    #[test]
    fn sure_plug_in_values() {
        let r = vec![1.0, -2.0, 0.5, 3.0];
        assert!((sure_of_map(&r, &r, 0.7, 4.0).unwrap() - 0.7).abs() < 1e-15);
        let zero = vec![0.0; 4];
        let expect = norm_sq(&r) / 4.0 - 0.7;
        assert!((sure_of_map(&zero, &r, 0.7, 0.0).unwrap() - expect).abs() < 1e-15);
        assert!(sure_of_map(&zero[..3], &r, 0.7, 0.0).is_err());
    }

    #[test]
    fn cubic_scalar_example() {
        let res = extrinsic_combine(&[2.0], &[8.0], 12.0, 1.0).unwrap();
        assert_eq!(res.alpha, 12.0);
        assert_eq!(res.c, -0.125);
        assert_eq!(res.x_ext, vec![2.0]);
        // c minimizes ‖c·u − r‖² over a scan
        let u = -16.0_f64;
        let at = |c: f64| (c * u - 2.0).powi(2);
        for k in -100..=100 {
            let c = -0.125 + k as f64 * 1e-3;
            assert!(at(c) >= at(-0.125));
        }
    }

    #[test]
    fn linear_denoiser_is_degenerate() {
        let r: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let d: Vec<f64> = r.iter().map(|v| 0.3 * v).collect();
        match extrinsic_combine(&r, &d, 0.3 * 32.0, 1.0) {
            Err(Error::DegenerateExtrinsic { norm, direction }) => {
                assert!(norm < 1e-12);
                assert_eq!(direction.len(), 32);
            }
            other => panic!("expected degenerate, got {other:?}"),
        }
    }

    #[test]
    fn identity_black_box_divergence_is_n() {
        let n = 4096;
        let r = rng::gaussian_vec(&mut rng::stream(1, 0), n);
        let spec = DenoiserSpec::BlackBox(BlackBoxSpec::new(BlackBoxDenoiser::Identity).with_probes(8));
        let div = divergence(&spec, &r, 1.0, 0).unwrap();
        assert!((div / n as f64 - 1.0).abs() < 0.02, "{div}");
    }

    #[test]
    fn soft_threshold_divergence_counts_survivors() {
        let n = 2000;
        let r = rng::gaussian_vec(&mut rng::stream(2, 0), n);
        let theta = 0.8;
        let count = r.iter().filter(|v| v.abs() > theta).count() as f64;
        let h = 1e-6;
        let fd: f64 = r
            .iter()
            .map(|&v| (soft_threshold(v + h, theta) - soft_threshold(v - h, theta)) / (2.0 * h))
            .sum();
        assert!((fd - count).abs() < 1e-6);
        let f = |v: &[f64]| v.iter().map(|&x| soft_threshold(x, theta)).collect::<Vec<_>>();
        let mc = mc_divergence(&f, &r, 1e-4, 400, &mut rng::stream(3, 0)).unwrap();
        assert!((mc / count - 1.0).abs() < 0.05, "{mc} vs {count}");
    }

    #[test]
    fn mc_rejects_bad_step() {
        let f = |v: &[f64]| v.to_vec();
        assert!(mc_divergence(&f, &[1.0], 0.0, 1, &mut rng::stream(0, 0)).is_err());
        assert!(mc_divergence(&f, &[f64::NAN], 1e-3, 1, &mut rng::stream(0, 0)).is_err());
    }

    #[test]
    fn c_is_sure_optimal() {
        let n = 4096;
        let prior = BernoulliGaussianPrior::unit_energy(0.27).unwrap();
        let mut g = rng::stream(4, 0);
        let x = prior.sample(&mut g, n);
        let e = rng::gaussian_vec(&mut g, n);
        let tau_sq: f64 = 0.4;
        let r: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + tau_sq.sqrt() * b).collect();
        let out = extrinsic_denoise(&DenoiserSpec::MmseBg(prior), &r, tau_sq, 0).unwrap();
        let u: Vec<f64> = out.result.x_ext.iter().map(|v| v / out.result.c).collect();
        let sure_at = |c: f64| dist_sq(&u.iter().map(|v| c * v).collect::<Vec<_>>(), &r) / n as f64 - tau_sq;
        let best = sure_at(out.result.c);
        assert!((best - out.result.sure).abs() < 1e-12);
        for f in [0.9, 0.95, 1.05, 1.1] {
            assert!(sure_at(out.result.c * f) >= best);
        }
    }

    #[test]
    fn frozen_map_reproduces_estimate() {
        let n = 1024;
        let r = rng::gaussian_vec(&mut rng::stream(5, 0), n);
        let specs = [
            DenoiserSpec::MmseBg(BernoulliGaussianPrior::unit_energy(0.3).unwrap()),
            DenoiserSpec::SureLet(SureLetConfig::default()),
            DenoiserSpec::Svt(SvtConfig::new(32, 32)),
            DenoiserSpec::BlackBox(BlackBoxSpec::new(BlackBoxDenoiser::SoftThreshold(
                crate::denoisers::SoftThreshold { scale: 1.0 },
            ))),
        ];
        for spec in specs {
            let out = extrinsic_denoise(&spec, &r, 0.5, 0).unwrap();
            let again = out.apply_frozen(&r).unwrap();
            let err = dist_sq(&again, &out.result.x_ext).sqrt();
            assert!(err < 1e-9 * norm_sq(&out.result.x_ext).sqrt().max(1.0), "{}", spec.label());
            assert_eq!(out.result.alpha, out.result.divergence / n as f64);
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        let spec = DenoiserSpec::SureLet(SureLetConfig::default());
        assert!(extrinsic_denoise(&spec, &[1.0, 2.0], 0.0, 0).is_err());
        assert!(extrinsic_denoise(&spec, &[1.0, f64::INFINITY], 1.0, 0).is_err());
    }
}
