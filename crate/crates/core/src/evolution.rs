//! Scalar MSE-evolution predictor.
//!
//! `τ²(t) = (n/m − 1)·v(t) + (n/m)·σ²` and
//! `v(t+1) = E‖D_ext(x + τ(t)·e) − x‖²/n`, the expectation taken by
//! Monte-Carlo over `e ~ N(0, I)` (and fresh signals when sampling).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoisers::{mmse_bg_denoise, BernoulliGaussianPrior, DenoiserSpec};
use crate::error::{check_len, Error, Result};
use crate::extrinsic::extrinsic_denoise;
use crate::linalg::{dist_sq, norm_sq};
use crate::rng;
use crate::turbo::RecoveryTrace;

/// The Module-B map whose error is tracked.
#[derive(Clone, Debug, PartialEq)]
pub enum ModuleB {
    /// Divergence-free extrinsic version of a denoiser, as in D-Turbo-CS.
    Extrinsic(DenoiserSpec),
    /// MMSE posterior turned extrinsic by Gaussian division, as in Turbo-CS.
    TurboMmse(BernoulliGaussianPrior),
}

impl ModuleB {
    pub fn extrinsic(&self, r: &[f64], tau_sq: f64, probe_seed: u64) -> Result<Vec<f64>> {
        match self {
            ModuleB::Extrinsic(spec) => Ok(extrinsic_denoise(spec, r, tau_sq, probe_seed)?.result.x_ext),
            ModuleB::TurboMmse(prior) => {
                let post = mmse_bg_denoise(r, tau_sq, prior)?;
                let v_post = post.average_variance();
                if !(v_post > 0.0) || v_post >= tau_sq {
                    return Ok(post.mean);
                }
                let v_ext = 1.0 / (1.0 / v_post - 1.0 / tau_sq);
                Ok(post.mean.iter().zip(r).map(|(p, ri)| v_ext * (p / v_post - ri / tau_sq)).collect())
            }
        }
    }
}

/// What the signal is in the expectation.
#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    Fixed(Vec<f64>),
    /// A fresh draw per trial.
    BernoulliGaussian(BernoulliGaussianPrior),
}

impl Reference {
    /// `E‖x‖²/n`
    pub fn energy(&self) -> f64 {
        match self {
            Reference::Fixed(x) => norm_sq(x) / x.len() as f64,
            Reference::BernoulliGaussian(p) => p.energy(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSettings {
    pub n: usize,
    pub m: usize,
    pub noise_var: f64,
    pub horizon: usize,
    pub mc_trials: usize,
    pub seed: u64,
}

impl EvolutionSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.m > self.n {
            return Err(Error::InvalidDimensions(format!("need 0 < m ≤ n, got m = {}, n = {}", self.m, self.n)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be ≥ 1".into()));
        }
        if self.mc_trials == 0 {
            return Err(Error::InvalidParameter("mc_trials must be ≥ 1".into()));
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise variance must be ≥ 0, got {}", self.noise_var)));
        }
        Ok(())
    }

    pub fn tau_sq(&self, v: f64) -> f64 {
        let ratio = self.n as f64 / self.m as f64;
        (ratio - 1.0) * v + ratio * self.noise_var
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    /// `τ²(t)` for `t = 0..len`.
    pub tau_sq: Vec<f64>,
    /// `v(t)` for `t = 0..len`.
    pub v: Vec<f64>,
    pub t_max: usize,
    pub mc_trials: usize,
    /// Set when `τ²(t) ≤ 0` cut the recursion short.
    #[serde(default)]
    pub terminated_early: bool,
}

impl EvolutionTrace {
    /// `v(t)/v(0)` in dB.
    pub fn normalized_db(&self) -> Vec<f64> {
        self.v.iter().map(|v| 10.0 * (v / self.v[0]).log10()).collect()
    }

    /// Average of several evolutions, each normalized by its own `v(0)`;
    /// the prediction for the mean NMSE over a set of fixed signals.
    pub fn pooled(traces: &[EvolutionTrace]) -> Result<EvolutionTrace> {
        let len = traces.iter().map(|t| t.v.len()).min().ok_or_else(|| {
            Error::InvalidParameter("no evolution traces to pool".into())
        })?;
        let k = traces.len() as f64;
        let mean = |f: &dyn Fn(&EvolutionTrace, usize) -> f64| -> Vec<f64> {
            (0..len).map(|t| traces.iter().map(|tr| f(tr, t) / tr.v[0]).sum::<f64>() / k).collect()
        };
        Ok(EvolutionTrace {
            tau_sq: mean(&|tr, t| tr.tau_sq[t]),
            v: mean(&|tr, t| tr.v[t]),
            t_max: len - 1,
            mc_trials: traces.iter().map(|t| t.mc_trials).sum(),
            terminated_early: traces.iter().any(|t| t.terminated_early),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,tau_sq,v")?;
        for (t, (tau, v)) in self.tau_sq.iter().zip(&self.v).enumerate() {
            writeln!(w, "{t},{tau},{v}")?;
        }
        Ok(())
    }
}

pub fn evolve(
    settings: &EvolutionSettings,
    module_b: &ModuleB,
    reference: &Reference,
) -> Result<EvolutionTrace> {
    settings.validate()?;
    if let Reference::Fixed(x) = reference {
        check_len(settings.n, x.len())?;
    }
    if let ModuleB::Extrinsic(spec) = module_b {
        spec.validate(Some(settings.n))?;
    }
    let mut v = vec![reference.energy()];
    let mut tau_sq = vec![settings.tau_sq(v[0])];
    let mut terminated_early = false;
    for t in 0..settings.horizon {
        let tau = tau_sq[t];
        if !(tau > 0.0) {
            terminated_early = true;
            break;
        }
        let step_seed = rng::child_seed(settings.seed, t as u64);
        let errors = (0..settings.mc_trials)
            .into_par_iter()
            .map(|i| trial(settings.n, module_b, reference, tau, rng::child_seed(step_seed, i as u64)))
            .collect::<Result<Vec<f64>>>()?;
        let next = errors.iter().sum::<f64>() / settings.mc_trials as f64;
        v.push(next);
        tau_sq.push(settings.tau_sq(next));
    }
    Ok(EvolutionTrace { tau_sq, v, t_max: settings.horizon, mc_trials: settings.mc_trials, terminated_early })
}

fn trial(n: usize, module_b: &ModuleB, reference: &Reference, tau_sq: f64, seed: u64) -> Result<f64> {
    let drawn;
    let x = match reference {
        Reference::Fixed(x) => x.as_slice(),
        Reference::BernoulliGaussian(prior) => {
            drawn = prior.sample(&mut rng::stream(seed, rng::SIGNAL), n);
            drawn.as_slice()
        }
    };
    let tau = tau_sq.sqrt();
    let e = rng::gaussian_vec(&mut rng::stream(seed, rng::EVOLUTION), n);
    let r: Vec<f64> = x.iter().zip(&e).map(|(xi, ei)| xi + tau * ei).collect();
    let out = module_b.extrinsic(&r, tau_sq, seed)?;
    Ok(dist_sq(&out, x) / n as f64)
}

/// `gap(t) = 10·log10(mean simulated NMSE_ext(t)) − 10·log10(v(t)/v(0))`
/// for `t = 1..=T`, where `T` is the evolution length.
pub fn compare_evolution_to_simulation(trace: &EvolutionTrace, runs: &[RecoveryTrace]) -> Result<Vec<f64>> {
    if runs.is_empty() {
        return Err(Error::InvalidParameter("no simulation runs to compare".into()));
    }
    let horizon = trace.v.len() - 1;
    let mut sums = vec![0.0; horizon];
    for (k, run) in runs.iter().enumerate() {
        if run.records.len() < horizon {
            return Err(Error::InvalidDimensions(format!(
                "run {k} has {} iterations, evolution has {horizon}",
                run.records.len()
            )));
        }
        for (t, rec) in run.records.iter().take(horizon).enumerate() {
            sums[t] += rec.nmse_ext.ok_or_else(|| {
                Error::InvalidParameter(format!("run {k} has no NMSE at iteration {}", t + 1))
            })?;
        }
    }
    let pred = trace.normalized_db();
    Ok(sums
        .iter()
        .enumerate()
        .map(|(t, s)| 10.0 * (s / runs.len() as f64).log10() - pred[t + 1])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::SureLetConfig;
    use crate::transform::TransformKind;
    use crate::turbo::IterationRecord;

    fn bg_settings(horizon: usize, mc_trials: usize) -> EvolutionSettings {
        EvolutionSettings { n: 4096, m: 2048, noise_var: 0.0, horizon, mc_trials, seed: 3 }
    }

    #[test]
    fn full_rate_noiseless_terminates() {
        let prior = BernoulliGaussianPrior::unit_energy(0.27).unwrap();
        let s = EvolutionSettings { n: 64, m: 64, noise_var: 0.0, horizon: 5, mc_trials: 2, seed: 0 };
        let tr = evolve(&s, &ModuleB::TurboMmse(prior), &Reference::BernoulliGaussian(prior)).unwrap();
        assert!(tr.terminated_early);
        assert_eq!(tr.v, vec![1.0]);
    }

    #[test]
    fn tau_is_affine_in_v() {
        let s = EvolutionSettings { n: 100, m: 40, noise_var: 0.01, horizon: 1, mc_trials: 1, seed: 0 };
        assert_eq!(s.tau_sq(0.0), 2.5 * 0.01);
        assert!((s.tau_sq(2.0) - (1.5 * 2.0 + 2.5 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn mmse_evolution_decreases() {
        let prior = BernoulliGaussianPrior::unit_energy(0.27).unwrap();
        let s = bg_settings(8, 8);
        let tr = evolve(&s, &ModuleB::Extrinsic(DenoiserSpec::MmseBg(prior)), &Reference::BernoulliGaussian(prior))
            .unwrap();
        assert_eq!(tr.v.len(), 9);
        assert!(tr.v.windows(2).all(|w| w[1] < w[0]), "{:?}", tr.v);
    }

    #[test]
    fn reproducible_under_seed() {
        let prior = BernoulliGaussianPrior::unit_energy(0.27).unwrap();
        let spec = DenoiserSpec::SureLet(SureLetConfig { transform: TransformKind::Identity, ..Default::default() });
        let s = bg_settings(4, 4);
        let a = evolve(&s, &ModuleB::Extrinsic(spec.clone()), &Reference::BernoulliGaussian(prior)).unwrap();
        let b = evolve(&s, &ModuleB::Extrinsic(spec), &Reference::BernoulliGaussian(prior)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_match_gives_zero_gaps() {
        let trace = EvolutionTrace { tau_sq: vec![1.0; 3], v: vec![2.0, 1.0, 0.02], t_max: 2, mc_trials: 1, terminated_early: false };
        let run = RecoveryTrace {
            records: [0.5, 0.01]
                .iter()
                .enumerate()
                .map(|(i, v)| IterationRecord { iteration: i + 1, nmse_ext: Some(*v), ..Default::default() })
                .collect(),
            estimate: vec![],
        };
        let gaps = compare_evolution_to_simulation(&trace, &[run.clone(), run.clone()]).unwrap();
        assert!(gaps.iter().all(|g| g.abs() < 1e-12));
        let short = RecoveryTrace { records: run.records[..1].to_vec(), estimate: vec![] };
        assert!(compare_evolution_to_simulation(&trace, &[short]).is_err());
    }

    #[test]
    fn pooling_normalizes_each_trace() {
        let a = EvolutionTrace { tau_sq: vec![2.0, 1.0], v: vec![2.0, 1.0], t_max: 1, mc_trials: 1, terminated_early: false };
        let b = EvolutionTrace { tau_sq: vec![1.0, 0.1, 0.01], v: vec![1.0, 0.1, 0.01], t_max: 2, mc_trials: 2, terminated_early: false };
        let p = EvolutionTrace::pooled(&[a, b]).unwrap();
        assert_eq!(p.v, vec![1.0, 0.3]);
        assert_eq!(p.mc_trials, 3);
        assert!(EvolutionTrace::pooled(&[]).is_err());
    }

    #[test]
    fn csv_header() {
        let trace = EvolutionTrace { tau_sq: vec![1.0, 0.5], v: vec![1.0, 0.5], t_max: 1, mc_trials: 1, terminated_early: false };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,tau_sq,v\n0,1,1\n1,0.5,0.5\n");
    }
}
