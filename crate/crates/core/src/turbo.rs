//! Turbo-CS iteration engines.
//!
//! Module A is the LMMSE step for a sensing operator with orthonormal rows,
//! which collapses to a matched-filter update. Module B is either the
//! Bernoulli-Gaussian MMSE denoiser with posterior/extrinsic Gaussian
//! combining ([`run_turbo_cs`]) or any [`DenoiserSpec`] wrapped into a
//! divergence-free extrinsic denoiser ([`run_d_turbo_cs`]).

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denoisers::{mmse_bg_denoise, BernoulliGaussianPrior, DenoiserSpec};
use crate::error::{check_len, Error, Result};
use crate::extrinsic::extrinsic_denoise;
use crate::linalg::{dist_sq, norm_sq};
use crate::sensing::SensingOperator;

/// Lower clamp for every variance in the loop.
pub const V_FLOOR: f64 = 1e-9;
/// Upper clamp, relative to the signal energy `E‖x‖²/n`.
pub const V_CEILING_FACTOR: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub epsilon: f64,
    pub max_iters: usize,
}

impl StoppingRule {
    pub fn new(epsilon: f64, max_iters: usize) -> Result<Self> {
        let rule = Self { epsilon, max_iters };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// `‖x_now − x_prev‖² / ‖x_prev‖²`; infinite when `x_prev = 0 ≠ x_now`.
pub fn relative_change(x_now: &[f64], x_prev: &[f64]) -> f64 {
    let prev = norm_sq(x_prev);
    let diff = dist_sq(x_now, x_prev);
    if prev == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / prev
    }
}

/// True when iteration `t` (1-based) should be the last one.
pub fn stopping_check(x_now: &[f64], x_prev: &[f64], rule: &StoppingRule, t: usize) -> bool {
    t >= rule.max_iters || relative_change(x_now, x_prev) <= rule.epsilon
}

#[derive(Clone, Debug)]
pub struct ModuleAOutput {
    pub x_ext: Vec<f64>,
    pub v_ext: f64,
    /// `‖y − A·x_pri‖`
    pub residual_norm: f64,
}

/// `x_ext = x_pri + (n/m)·Aᵀ(y − A·x_pri)`, `v_ext = (n/m − 1)·v_pri + (n/m)·σ²`.
pub fn module_a_extrinsic(
    op: &SensingOperator,
    y: &[f64],
    x_pri: &[f64],
    v_pri: f64,
    noise_var: f64,
) -> Result<ModuleAOutput> {
    check_len(op.m(), y.len())?;
    let ratio = op.undersampling();
    let ax = op.apply(x_pri)?;
    let residual: Vec<f64> = y.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let back = op.adjoint(&residual)?;
    let x_ext = x_pri.iter().zip(&back).map(|(x, b)| x + ratio * b).collect();
    Ok(ModuleAOutput {
        x_ext,
        v_ext: (ratio - 1.0) * v_pri + ratio * noise_var,
        residual_norm: norm_sq(&residual).sqrt(),
    })
}

/// A variance after clamping, with the value it had before.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub raw: f64,
}

impl Clamped {
    pub fn new(raw: f64, ceiling: f64) -> Self {
        let value = if raw.is_nan() { ceiling } else { raw.clamp(V_FLOOR, ceiling.max(V_FLOOR)) };
        Self { value, raw }
    }

    pub fn was_clamped(&self) -> bool {
        self.value != self.raw
    }
}

/// Residual-based extrinsic variance `(‖y − A·x_ext‖² − m·σ²)/m`, floored at [`V_FLOOR`].
pub fn estimate_v_ext_b(
    op: &SensingOperator,
    y: &[f64],
    x_b_ext: &[f64],
    noise_var: f64,
) -> Result<Clamped> {
    check_len(op.m(), y.len())?;
    let ax = op.apply(x_b_ext)?;
    let m = op.m() as f64;
    let raw = (dist_sq(y, &ax) - m * noise_var) / m;
    Ok(Clamped::new(raw, f64::INFINITY))
}

/// One iteration of the trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub v_a_pri: f64,
    /// Equal to `v_B^pri`.
    pub v_a_ext: f64,
    pub v_b_ext: f64,
    /// `‖x_B^post − x‖²/‖x‖²`, when the truth is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmse: Option<f64>,
    /// `‖x_B^ext − x‖²/‖x‖²`, when the truth is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmse_ext: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    pub residual_norm: f64,
    pub relative_change: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrace {
    pub records: Vec<IterationRecord>,
    /// Final `x_B^post`.
    pub estimate: Vec<f64>,
}

impl RecoveryTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn nmse(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.nmse).collect()
    }

    /// One JSON object per line, one line per iteration.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// State handed to an [`Observer`] after every iteration.
#[derive(Clone, Copy, Debug)]
pub struct IterationView<'a> {
    pub iteration: usize,
    pub x_b_pri: &'a [f64],
    pub v_b_pri: f64,
    pub x_b_post: &'a [f64],
    pub x_b_ext: &'a [f64],
    pub v_b_ext: f64,
}

/// Truth-aware metrics reported back by an observer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub nmse: Option<f64>,
    pub nmse_ext: Option<f64>,
    pub psnr: Option<f64>,
}

/// Hook for metrics that need the ground truth. The engines never see the
/// truth themselves.
pub trait Observer {
    fn observe(&mut self, view: &IterationView<'_>) -> Metrics;
}

pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &IterationView<'_>) -> Metrics {
        Metrics::default()
    }
}

/// Computes NMSE/PSNR against a known truth and optionally keeps the
/// Module-A output error `x_B^pri − x` of every iteration.
pub struct TruthObserver<'a> {
    truth: &'a [f64],
    energy: f64,
    peak: Option<f64>,
    keep_errors: bool,
    pub module_a_errors: Vec<ModuleAError>,
}

#[derive(Clone, Debug)]
pub struct ModuleAError {
    pub iteration: usize,
    /// The variance Module A reported for this error.
    pub v_b_pri: f64,
    pub errors: Vec<f64>,
}

impl ModuleAError {
    /// `(x_B^pri − x)/√v_B^pri`
    pub fn standardized(&self) -> Vec<f64> {
        crate::metrics::standardize(&self.errors, self.v_b_pri)
    }

    pub fn empirical_variance(&self) -> f64 {
        norm_sq(&self.errors) / self.errors.len() as f64
    }
}

impl<'a> TruthObserver<'a> {
    pub fn new(truth: &'a [f64]) -> Self {
        Self { truth, energy: norm_sq(truth), peak: None, keep_errors: false, module_a_errors: Vec::new() }
    }

    /// Also report PSNR with this peak value.
    pub fn with_peak(mut self, peak: f64) -> Self {
        self.peak = Some(peak);
        self
    }

    pub fn keep_module_a_errors(mut self) -> Self {
        self.keep_errors = true;
        self
    }
}

impl Observer for TruthObserver<'_> {
    fn observe(&mut self, view: &IterationView<'_>) -> Metrics {
        if self.keep_errors {
            self.module_a_errors.push(ModuleAError {
                iteration: view.iteration,
                v_b_pri: view.v_b_pri,
                errors: view.x_b_pri.iter().zip(self.truth).map(|(a, b)| a - b).collect(),
            });
        }
        let ratio = |x: &[f64]| (self.energy > 0.0).then(|| dist_sq(x, self.truth) / self.energy);
        Metrics {
            nmse: ratio(view.x_b_post),
            nmse_ext: ratio(view.x_b_ext),
            psnr: self.peak.and_then(|p| crate::metrics::psnr_db(view.x_b_post, self.truth, p).ok()),
        }
    }
}

/// A run that stopped on an error, with everything recorded up to that point.
#[derive(Debug, Error)]
#[error("recovery aborted after {} iterations: {error}", trace.records.len())]
pub struct Aborted {
    #[source]
    pub error: Error,
    pub trace: RecoveryTrace,
}

impl From<Error> for Aborted {
    fn from(error: Error) -> Self {
        Aborted { error, trace: RecoveryTrace::default() }
    }
}

struct ModuleBStep {
    x_post: Vec<f64>,
    x_ext: Vec<f64>,
    v_ext: Clamped,
    warnings: Vec<String>,
}

fn run_engine(
    op: &SensingOperator,
    y: &[f64],
    noise_var: f64,
    energy: f64,
    stop: &StoppingRule,
    observer: &mut dyn Observer,
    mut module_b: impl FnMut(usize, &[f64], f64) -> Result<ModuleBStep>,
) -> std::result::Result<RecoveryTrace, Aborted> {
    stop.validate()?;
    check_len(op.m(), y.len())?;
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance must be ≥ 0, got {noise_var}")).into());
    }
    let ceiling = V_CEILING_FACTOR * energy.max(V_FLOOR);
    let n = op.n();
    let mut trace = RecoveryTrace::default();
    let mut x_a_pri = vec![0.0; n];
    let mut v_a_pri = Clamped::new(energy, ceiling).value;
    let mut prev_post = vec![0.0; n];

    for t in 1..=stop.max_iters {
        let a = match module_a_extrinsic(op, y, &x_a_pri, v_a_pri, noise_var) {
            Ok(a) => a,
            Err(error) => return Err(Aborted { error, trace }),
        };
        let mut warnings = Vec::new();
        let v_b_pri = Clamped::new(a.v_ext, ceiling);
        let step = if a.v_ext <= 0.0 {
            // Module A is exact (full rate, no noise): nothing left to denoise.
            warnings.push("module A output is exact; module B bypassed".to_string());
            ModuleBStep {
                x_post: a.x_ext.clone(),
                x_ext: a.x_ext.clone(),
                v_ext: Clamped::new(0.0, ceiling),
                warnings: Vec::new(),
            }
        } else {
            if v_b_pri.was_clamped() {
                warnings.push(format!("v_B^pri clamped from {:e} to {:e}", v_b_pri.raw, v_b_pri.value));
            }
            match module_b(t, &a.x_ext, v_b_pri.value) {
                Ok(step) => step,
                Err(error) => return Err(Aborted { error, trace }),
            }
        };
        warnings.extend(step.warnings);
        let v_b_ext = Clamped::new(step.v_ext.raw, ceiling);
        if v_b_ext.was_clamped() {
            warnings.push(format!("v_B^ext clamped from {:e} to {:e}", v_b_ext.raw, v_b_ext.value));
        }

        let metrics = observer.observe(&IterationView {
            iteration: t,
            x_b_pri: &a.x_ext,
            v_b_pri: v_b_pri.value,
            x_b_post: &step.x_post,
            x_b_ext: &step.x_ext,
            v_b_ext: v_b_ext.value,
        });
        let change = relative_change(&step.x_post, &prev_post);
        trace.records.push(IterationRecord {
            iteration: t,
            v_a_pri,
            v_a_ext: v_b_pri.value,
            v_b_ext: v_b_ext.value,
            nmse: metrics.nmse,
            nmse_ext: metrics.nmse_ext,
            psnr: metrics.psnr,
            residual_norm: a.residual_norm,
            relative_change: change,
            warnings,
        });
        let done = stopping_check(&step.x_post, &prev_post, stop, t);
        prev_post = step.x_post;
        if done {
            break;
        }
        x_a_pri = step.x_ext;
        v_a_pri = v_b_ext.value;
    }
    trace.estimate = prev_post;
    Ok(trace)
}

/// Turbo-CS with the Bernoulli-Gaussian MMSE denoiser and Gaussian
/// posterior→extrinsic combining in Module B.
pub fn run_turbo_cs(
    op: &SensingOperator,
    y: &[f64],
    noise_var: f64,
    prior: &BernoulliGaussianPrior,
    stop: &StoppingRule,
    observer: &mut dyn Observer,
) -> std::result::Result<RecoveryTrace, Aborted> {
    prior.validate()?;
    run_engine(op, y, noise_var, prior.energy(), stop, observer, |_, x_pri, v_pri| {
        let post = mmse_bg_denoise(x_pri, v_pri, prior)?;
        let v_post = post.average_variance();
        if !(v_post > 0.0) || v_post >= v_pri {
            return Ok(ModuleBStep {
                warnings: vec![format!("posterior variance {v_post:e} ≥ prior variance {v_pri:e}")],
                x_ext: post.mean.clone(),
                x_post: post.mean,
                v_ext: Clamped::new(V_FLOOR, V_FLOOR),
            });
        }
        let v_ext = 1.0 / (1.0 / v_post - 1.0 / v_pri);
        let x_ext = post.mean.iter().zip(x_pri).map(|(p, r)| v_ext * (p / v_post - r / v_pri)).collect();
        Ok(ModuleBStep { x_post: post.mean, x_ext, v_ext: Clamped::new(v_ext, f64::INFINITY), warnings: vec![] })
    })
}

/// Denoising-based Turbo-CS: Module B is the extrinsic version of `spec` and
/// its output variance is estimated from the measurement residual.
pub fn run_d_turbo_cs(
    op: &SensingOperator,
    y: &[f64],
    noise_var: f64,
    spec: &DenoiserSpec,
    stop: &StoppingRule,
    observer: &mut dyn Observer,
) -> std::result::Result<RecoveryTrace, Aborted> {
    spec.validate(Some(op.n()))?;
    check_len(op.m(), y.len())?;
    let energy = match spec {
        DenoiserSpec::MmseBg(prior) => prior.energy(),
        _ => (norm_sq(y) / op.m() as f64 - noise_var).max(V_FLOOR),
    };
    run_engine(op, y, noise_var, energy, stop, observer, |t, x_pri, v_pri| {
        let out = extrinsic_denoise(spec, x_pri, v_pri, t as u64)?;
        let v_ext = estimate_v_ext_b(op, y, &out.result.x_ext, noise_var)?;
        Ok(ModuleBStep { x_post: out.x_post, x_ext: out.result.x_ext, v_ext, warnings: vec![] })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::sensing::Variant;
    use crate::transform::TransformKind;

    #[test]
    fn stopping_rule_arithmetic() {
        let rule = StoppingRule::new(1e-4, 10).unwrap();
        let x = vec![1.0, 2.0];
        assert!(stopping_check(&x, &x, &rule, 1));
        assert!(stopping_check(&[5.0, 5.0], &x, &rule, 10));
        // change = 2e-4
        let prev = vec![1.0, 0.0];
        let now = vec![1.0, 2e-4_f64.sqrt()];
        assert!(!stopping_check(&now, &prev, &rule, 3));
        assert!(!stopping_check(&x, &[0.0, 0.0], &rule, 1));
        assert!(stopping_check(&[0.0, 0.0], &[0.0, 0.0], &rule, 1));
        assert!(StoppingRule::new(0.0, 5).is_err());
        assert!(StoppingRule::new(1e-3, 0).is_err());
    }

    #[test]
    fn module_a_with_perfect_prior() {
        let op = SensingOperator::build(64, 20, TransformKind::Dct, Variant::Plain, 1).unwrap();
        let x = rng::gaussian_vec(&mut rng::stream(1, 0), 64);
        let y = op.apply(&x).unwrap();
        let out = module_a_extrinsic(&op, &y, &x, 0.5, 0.0).unwrap();
        for (a, b) in out.x_ext.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((out.v_ext - (64.0 / 20.0 - 1.0) * 0.5).abs() < 1e-15);
    }

    #[test]
    fn module_a_full_rate() {
        let op = SensingOperator::build(32, 32, TransformKind::Dct, Variant::SignFlipped, 2).unwrap();
        let y = rng::gaussian_vec(&mut rng::stream(2, 0), 32);
        let x_pri = rng::gaussian_vec(&mut rng::stream(3, 0), 32);
        let out = module_a_extrinsic(&op, &y, &x_pri, 3.0, 0.1).unwrap();
        let direct = op.adjoint(&y).unwrap();
        for (a, b) in out.x_ext.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((out.v_ext - 0.1).abs() < 1e-15);
    }

    #[test]
    fn residual_variance_estimator_plug_ins() {
        let op = SensingOperator::build(128, 40, TransformKind::Dct, Variant::Plain, 4).unwrap();
        let x = rng::gaussian_vec(&mut rng::stream(4, 0), 128);
        let y = op.apply(&x).unwrap();
        let perfect = estimate_v_ext_b(&op, &y, &x, 0.0).unwrap();
        assert_eq!(perfect.value, V_FLOOR);
        assert!(perfect.was_clamped());
        let zero = estimate_v_ext_b(&op, &y, &vec![0.0; 128], 0.0).unwrap();
        assert!((zero.value - norm_sq(&y) / 40.0).abs() < 1e-12);
    }

    #[test]
    fn full_rate_noiseless_recovers_in_one_iteration() {
        let n = 512;
        let prior = BernoulliGaussianPrior::unit_energy(0.27).unwrap();
        let x = prior.sample(&mut rng::stream(5, rng::SIGNAL), n);
        let op = SensingOperator::build(n, n, TransformKind::Dct, Variant::Plain, 5).unwrap();
        let y = op.apply(&x).unwrap();
        let trace =
            run_turbo_cs(&op, &y, 0.0, &prior, &StoppingRule::new(1e-4, 20).unwrap(), &mut NoObserver).unwrap();
        let first = &trace.records[0];
        assert!(!first.warnings.is_empty());
        assert!(dist_sq(&trace.estimate, &x) / norm_sq(&x) <= 1e-20);
        assert!(trace.iterations() <= 2);
    }

    #[test]
    fn stops_exactly_when_change_is_small() {
        let n = 1024;
        let prior = BernoulliGaussianPrior::unit_energy(0.1).unwrap();
        let x = prior.sample(&mut rng::stream(6, rng::SIGNAL), n);
        let op = SensingOperator::build(n, 600, TransformKind::Dct, Variant::Plain, 6).unwrap();
        let y = op.apply(&x).unwrap();
        let rule = StoppingRule::new(1e-6, 50).unwrap();
        let trace = run_turbo_cs(&op, &y, 0.0, &prior, &rule, &mut NoObserver).unwrap();
        let k = trace
            .records
            .iter()
            .position(|r| r.relative_change <= rule.epsilon)
            .map(|i| i + 1)
            .unwrap_or(rule.max_iters);
        assert_eq!(trace.iterations(), k);
    }

    #[test]
    fn jsonl_has_one_line_per_iteration() {
        let trace = RecoveryTrace {
            records: vec![IterationRecord { iteration: 1, ..Default::default() }, IterationRecord {
                iteration: 2,
                nmse: Some(0.5),
                ..Default::default()
            }],
            estimate: vec![],
        };
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let back: IterationRecord = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(back.nmse, Some(0.5));
    }

    #[test]
    fn clamping() {
        let c = Clamped::new(-3.0, 10.0);
        assert_eq!(c.value, V_FLOOR);
        assert_eq!(Clamped::new(1e9, 10.0).value, 10.0);
        assert_eq!(Clamped::new(f64::NAN, 10.0).value, 10.0);
        assert!(!Clamped::new(2.0, 10.0).was_clamped());
    }
}
