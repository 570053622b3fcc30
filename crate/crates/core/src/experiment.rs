//! Experiment configuration, execution and artifact export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::denoisers::{
    BernoulliGaussianPrior, BlackBoxDenoiser, BlackBoxSpec, DenoiserSpec, MedianFilter, SoftThreshold, SureLetConfig,
    SvtConfig,
};
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionSettings, EvolutionTrace, ModuleB, Reference};
use crate::fixtures;
use crate::metrics::{nmse_db, psnr_db, Decibels};
use crate::pgm::{load_pgm, save_pgm, GrayImage};
use crate::sensing::{MeasurementModel, SensingOperator, Variant};
use crate::transform::TransformKind;
use crate::turbo::{run_d_turbo_cs, run_turbo_cs, Aborted, RecoveryTrace, StoppingRule, TruthObserver};

/// Peak value for PSNR of 8-bit images.
pub const PIXEL_PEAK: f64 = 255.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub operator: OperatorConfig,
    /// Module-B denoiser. Optional for `turbo_cs` on sparse signals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denoiser: Option<DenoiserSpec>,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub noise_var: f64,
    /// Defaults depend on the denoiser: `ε = 1e-4`, `T = 20` for SURE-LET, 30 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopping: Option<StoppingRule>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    SparseBg(SparseBgSpec),
    Image(ImageSpec),
    Lowrank(LowrankSpec),
}

/// i.i.d. `(1−ρ)δ₀ + ρ·N(0, 1/ρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseBgSpec {
    pub n: usize,
    pub rho: f64,
}

/// An 8-bit image, from a PGM file or the procedural generator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<ImageFixture>,
}

/// `G₁·G₂` with standard Gaussian factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowrankSpec {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageFixture {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// `m/n`, used when `m` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default = "default_transform")]
    pub transform: TransformKind,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub seed: u64,
}

fn default_transform() -> TransformKind {
    TransformKind::Dct
}

fn default_variant() -> Variant {
    Variant::SignFlipped
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self { m: None, rate: Some(0.5), transform: default_transform(), variant: default_variant(), seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    TurboCs,
    #[default]
    DTurboCs,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub signal: u64,
    #[serde(default)]
    pub noise: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Defaults to the stopping rule's `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Defaults to 32 for `n ≥ 16384`, 64 below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_trials: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::SparseBg(SparseBgSpec { n: 20000, rho: 0.27 }),
            operator: OperatorConfig::default(),
            denoiser: Some(DenoiserSpec::SureLet(SureLetConfig {
                transform: TransformKind::Identity,
                ..Default::default()
            })),
            algorithm: Algorithm::DTurboCs,
            noise_var: 0.0,
            stopping: None,
            seeds: Seeds::default(),
            output_dir: None,
            evolution: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON, reporting schema errors with the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path: Vec<String> = e.path().iter().map(segment_name).collect();
            let mut message = e.inner().to_string();
            if let Ok(value) = serde_json::from_str::<serde_json::Value>(text) {
                if let Some(node) = navigate(&value, &path) {
                    if let Some((rest, msg)) = refine_tagged(node) {
                        path.extend(rest);
                        message = msg;
                    }
                }
            }
            let path = if path.is_empty() { ".".to_string() } else { path.join(".") };
            Error::config(path, message)
        })
    }

    /// Loads a JSON file. Relative image paths are taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let ExperimentKind::Image(ImageSpec { path: Some(img), .. }) = &mut cfg.experiment {
            if img.is_relative() {
                if let Some(dir) = path.parent() {
                    *img = dir.join(&*img);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::config(".", e.to_string()))
    }

    /// Checks everything that can be checked without reading files.
    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            ExperimentKind::SparseBg(SparseBgSpec { n, rho }) => {
                if *n == 0 {
                    return Err(Error::config("experiment.n", "must be ≥ 1"));
                }
                BernoulliGaussianPrior::unit_energy(*rho)
                    .map_err(|e| Error::config("experiment.rho", e.to_string()))?;
            }
            ExperimentKind::Image(ImageSpec { path, fixture }) => {
                if path.is_some() == fixture.is_some() {
                    return Err(Error::config("experiment", "image needs exactly one of `path` or `fixture`"));
                }
                if let Some(f) = fixture {
                    if f.width == 0 || f.height == 0 {
                        return Err(Error::config("experiment.fixture", "empty image"));
                    }
                }
            }
            ExperimentKind::Lowrank(LowrankSpec { rows, cols, rank }) => {
                if *rows == 0 || *cols == 0 || *rank == 0 || rank > rows.min(cols) {
                    return Err(Error::config("experiment.rank", format!("rank {rank} for a {rows}×{cols} matrix")));
                }
            }
        }
        if let Some(rate) = self.operator.rate {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(Error::config("operator.rate", format!("must lie in (0, 1], got {rate}")));
            }
        }
        if self.operator.m.is_none() && self.operator.rate.is_none() {
            return Err(Error::config("operator", "needs `m` or `rate`"));
        }
        if self.operator.transform == TransformKind::Identity {
            return Err(Error::config("operator.transform", "must be `dct` or `haar`"));
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::config("noise_var", format!("must be ≥ 0, got {}", self.noise_var)));
        }
        if let Some(stop) = &self.stopping {
            stop.validate().map_err(|e| Error::config("stopping", e.to_string()))?;
        }
        match (self.algorithm, &self.denoiser, &self.experiment) {
            (Algorithm::TurboCs, None | Some(DenoiserSpec::MmseBg(_)), ExperimentKind::SparseBg(_)) => {}
            (Algorithm::TurboCs, Some(DenoiserSpec::MmseBg(_)), _) => {}
            (Algorithm::TurboCs, _, _) => {
                return Err(Error::config("algorithm", "`turbo_cs` needs a Bernoulli-Gaussian prior"))
            }
            (Algorithm::DTurboCs, None, _) => return Err(Error::config("denoiser", "missing")),
            (Algorithm::DTurboCs, Some(_), _) => {}
        }
        if let Some(BlackBoxDenoiser::Custom(_)) = match &self.denoiser {
            Some(DenoiserSpec::BlackBox(bb)) => Some(&bb.denoiser),
            _ => None,
        } {
            return Err(Error::config("denoiser", "custom denoisers cannot be configured from JSON"));
        }
        if let Some(evo) = &self.evolution {
            if evo.horizon == Some(0) {
                return Err(Error::config("evolution.horizon", "must be ≥ 1"));
            }
            if evo.mc_trials == Some(0) {
                return Err(Error::config("evolution.mc_trials", "must be ≥ 1"));
            }
        }
        Ok(())
    }

    pub fn stopping_rule(&self) -> StoppingRule {
        self.stopping.unwrap_or(StoppingRule {
            epsilon: 1e-4,
            max_iters: match &self.denoiser {
                Some(DenoiserSpec::SureLet(_)) => 20,
                _ => 30,
            },
        })
    }
}

/// Signal, operator and measurements for one configured run.
#[derive(Clone, Debug)]
pub struct Instance {
    pub x: Vec<f64>,
    /// `(width, height)` for images.
    pub image_dims: Option<(usize, usize)>,
    pub operator: SensingOperator,
    pub y: Vec<f64>,
    pub noise_var: f64,
    /// The Module-B map, with image/matrix shapes filled in.
    pub module_b: ModuleB,
    pub stop: StoppingRule,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn peak(&self) -> Option<f64> {
        self.image_dims.map(|_| PIXEL_PEAK)
    }
}

fn resolve_m(cfg: &OperatorConfig, n: usize) -> Result<usize> {
    let m = match (cfg.m, cfg.rate) {
        (Some(m), _) => m,
        (None, Some(rate)) => ((rate * n as f64).round() as usize).max(1),
        (None, None) => return Err(Error::config("operator", "needs `m` or `rate`")),
    };
    if m == 0 || m > n {
        return Err(Error::config("operator.m", format!("need 0 < m ≤ n = {n}, got {m}")));
    }
    Ok(m)
}

/// Generates or loads the signal, builds the operator and measures.
pub fn prepare(config: &ExperimentConfig) -> Result<Instance> {
    config.validate()?;
    let (x, image_dims) = match &config.experiment {
        ExperimentKind::SparseBg(SparseBgSpec { n, rho }) => {
            let prior = BernoulliGaussianPrior::unit_energy(*rho)?;
            (prior.sample(&mut crate::rng::stream(config.seeds.signal, crate::rng::SIGNAL), *n), None)
        }
        ExperimentKind::Image(ImageSpec { path, fixture }) => {
            let img = match (path, fixture) {
                (Some(p), _) => load_pgm(p)?,
                (None, Some(f)) => fixtures::piecewise_smooth(f.width, f.height, f.seed)?,
                (None, None) => unreachable!("validated"),
            };
            (img.to_signal(), Some((img.width, img.height)))
        }
        ExperimentKind::Lowrank(LowrankSpec { rows, cols, rank }) => {
            (fixtures::low_rank(*rows, *cols, *rank, config.seeds.signal)?, None)
        }
    };
    let n = x.len();
    let m = resolve_m(&config.operator, n)?;
    let op = SensingOperator::build(n, m, config.operator.transform, config.operator.variant, config.operator.seed)?;
    let y = MeasurementModel::new(op.clone(), config.noise_var, config.seeds.noise)?.measure(&x)?;

    let module_b = match config.algorithm {
        Algorithm::TurboCs => ModuleB::TurboMmse(match (&config.denoiser, &config.experiment) {
            (Some(DenoiserSpec::MmseBg(p)), _) => *p,
            (_, ExperimentKind::SparseBg(SparseBgSpec { rho, .. })) => BernoulliGaussianPrior::unit_energy(*rho)?,
            _ => unreachable!("validated"),
        }),
        Algorithm::DTurboCs => {
            let mut spec = config.denoiser.clone().expect("validated");
            if let Some((w, h)) = image_dims {
                match &mut spec {
                    DenoiserSpec::SureLet(let_cfg) => {
                        let_cfg.shape.get_or_insert([h, w]);
                    }
                    DenoiserSpec::BlackBox(BlackBoxSpec { denoiser: BlackBoxDenoiser::Median(f), .. })
                        if f.rows == 0 && f.cols == 0 =>
                    {
                        (f.rows, f.cols) = (h, w);
                    }
                    _ => {}
                }
            }
            spec.validate(Some(n)).map_err(|e| Error::config("denoiser", e.to_string()))?;
            ModuleB::Extrinsic(spec)
        }
    };
    Ok(Instance { x, image_dims, operator: op, y, noise_var: config.noise_var, module_b, stop: config.stopping_rule() })
}

/// Runs the configured engine with a truth observer.
pub fn recover(instance: &Instance) -> std::result::Result<RecoveryTrace, Aborted> {
    let mut obs = TruthObserver::new(&instance.x);
    if let Some(peak) = instance.peak() {
        obs = obs.with_peak(peak);
    }
    match &instance.module_b {
        ModuleB::TurboMmse(prior) => {
            run_turbo_cs(&instance.operator, &instance.y, instance.noise_var, prior, &instance.stop, &mut obs)
        }
        ModuleB::Extrinsic(spec) => {
            run_d_turbo_cs(&instance.operator, &instance.y, instance.noise_var, spec, &instance.stop, &mut obs)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub experiment: String,
    pub algorithm: Algorithm,
    pub denoiser: String,
    pub n: usize,
    pub m: usize,
    pub final_nmse_db: Decibels,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_psnr_db: Option<Decibels>,
    pub iterations: usize,
    pub warnings: usize,
    pub trace_path: String,
    pub wall_clock_seconds: f64,
}

/// Runs one experiment and, when an output directory is configured, writes
/// `metrics.json`, `trace.jsonl`, `curve.csv` and (for images) `recovered.pgm`.
///
/// A numerically failed run still writes its partial trace before the error
/// is returned.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(MetricsReport, RecoveryTrace)> {
    let instance = prepare(config)?;
    let started = Instant::now();
    let outcome = recover(&instance);
    let elapsed = started.elapsed().as_secs_f64();
    let trace = match &outcome {
        Ok(t) => t,
        Err(a) => &a.trace,
    };
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_with(&dir.join("trace.jsonl"), |w| trace.write_jsonl(w))?;
        write_with(&dir.join("curve.csv"), |w| write_curve_csv(w, trace))?;
    }
    let trace = outcome.map_err(|a| a.error)?;

    let denoiser = match &instance.module_b {
        ModuleB::TurboMmse(_) => "mmse_bg".to_string(),
        ModuleB::Extrinsic(spec) => spec.label().to_string(),
    };
    let report = MetricsReport {
        experiment: match &config.experiment {
            ExperimentKind::SparseBg(_) => "sparse_bg",
            ExperimentKind::Image(_) => "image",
            ExperimentKind::Lowrank(_) => "lowrank",
        }
        .to_string(),
        algorithm: config.algorithm,
        denoiser,
        n: instance.n(),
        m: instance.operator.m(),
        final_nmse_db: nmse_db(&trace.estimate, &instance.x)?.into(),
        final_psnr_db: match instance.peak() {
            Some(peak) => Some(psnr_db(&trace.estimate, &instance.x, peak)?.into()),
            None => None,
        },
        iterations: trace.iterations(),
        warnings: trace.records.iter().map(|r| r.warnings.len()).sum(),
        trace_path: "trace.jsonl".to_string(),
        wall_clock_seconds: elapsed,
    };
    if let Some(dir) = &config.output_dir {
        write_with(&dir.join("metrics.json"), |mut w| {
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)
        })?;
        if let Some((w, h)) = instance.image_dims {
            save_pgm(dir.join("recovered.pgm"), &GrayImage::from_signal(&trace.estimate, w, h)?)?;
        }
    }
    Ok((report, trace))
}

/// `iteration,nmse_db,nmse_ext_db,psnr_db,v_a_ext,v_b_ext`; unknown cells are empty.
pub fn write_curve_csv<W: Write>(mut w: W, trace: &RecoveryTrace) -> std::io::Result<()> {
    let db = |v: Option<f64>| v.map(|v| format!("{}", 10.0 * v.log10())).unwrap_or_default();
    writeln!(w, "iteration,nmse_db,nmse_ext_db,psnr_db,v_a_ext,v_b_ext")?;
    for r in &trace.records {
        let psnr = r.psnr.map(|p| p.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{},{}", r.iteration, db(r.nmse), db(r.nmse_ext), psnr, r.v_a_ext, r.v_b_ext)?;
    }
    Ok(())
}

/// Predicts the configured run with the MSE-evolution recursion. Sparse
/// signals are redrawn per trial; images and matrices are held fixed.
pub fn run_evolution(config: &ExperimentConfig) -> Result<EvolutionTrace> {
    let instance = prepare(config)?;
    let evo = config.evolution.unwrap_or_default();
    let n = instance.n();
    let settings = EvolutionSettings {
        n,
        m: instance.operator.m(),
        noise_var: instance.noise_var,
        horizon: evo.horizon.unwrap_or(instance.stop.max_iters),
        mc_trials: evo.mc_trials.unwrap_or(if n >= 16384 { 32 } else { 64 }),
        seed: evo.seed,
    };
    let reference = match &config.experiment {
        ExperimentKind::SparseBg(SparseBgSpec { rho, .. }) => Reference::BernoulliGaussian(BernoulliGaussianPrior::unit_energy(*rho)?),
        _ => Reference::Fixed(instance.x.clone()),
    };
    let trace = evolve(&settings, &instance.module_b, &reference)?;
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_with(&dir.join("evolution.csv"), |w| trace.write_csv(w))?;
        write_with(&dir.join("evolution.json"), |mut w| {
            serde_json::to_writer_pretty(&mut w, &trace)?;
            writeln!(w)
        })?;
    }
    Ok(trace)
}

/// A denoiser of the named kind with parameters sized for `experiment`:
/// `mmse_bg`, `sure_let`, `svt`, `median`, `soft_threshold` or `identity`.
pub fn default_denoiser(kind: &str, experiment: &ExperimentKind) -> Result<DenoiserSpec> {
    let unsupported = || Error::config("denoiser", format!("`{kind}` has no default for this experiment"));
    Ok(match kind {
        "mmse_bg" => match experiment {
            ExperimentKind::SparseBg(s) => DenoiserSpec::MmseBg(BernoulliGaussianPrior::unit_energy(s.rho)?),
            _ => return Err(unsupported()),
        },
        "sure_let" => DenoiserSpec::SureLet(match experiment {
            ExperimentKind::SparseBg(_) => SureLetConfig { transform: TransformKind::Identity, ..Default::default() },
            ExperimentKind::Image(_) => SureLetConfig { transform: TransformKind::Haar, ..Default::default() },
            ExperimentKind::Lowrank(l) => SureLetConfig { shape: Some([l.rows, l.cols]), ..Default::default() },
        }),
        "svt" => match experiment {
            ExperimentKind::Lowrank(l) => DenoiserSpec::Svt(SvtConfig::new(l.rows, l.cols)),
            _ => return Err(unsupported()),
        },
        "median" => match experiment {
            ExperimentKind::Image(_) => DenoiserSpec::BlackBox(BlackBoxSpec::new(BlackBoxDenoiser::Median(
                MedianFilter { rows: 0, cols: 0, radius: 1 },
            ))),
            _ => return Err(unsupported()),
        },
        "soft_threshold" => {
            DenoiserSpec::BlackBox(BlackBoxSpec::new(BlackBoxDenoiser::SoftThreshold(SoftThreshold { scale: 1.0 })))
        }
        "identity" => DenoiserSpec::BlackBox(BlackBoxSpec::new(BlackBoxDenoiser::Identity)),
        _ => return Err(Error::config("denoiser", format!("unknown denoiser `{kind}`"))),
    })
}

fn segment_name(seg: &serde_path_to_error::Segment) -> String {
    use serde_path_to_error::Segment;
    match seg {
        Segment::Seq { index } => index.to_string(),
        Segment::Map { key } => key.clone(),
        Segment::Enum { variant } => variant.clone(),
        Segment::Unknown => "?".to_string(),
    }
}

fn navigate<'v>(mut v: &'v serde_json::Value, path: &[String]) -> Option<&'v serde_json::Value> {
    for key in path {
        v = match v {
            serde_json::Value::Object(map) => map.get(key)?,
            serde_json::Value::Array(items) => items.get(key.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(v)
}

fn probe<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Option<(Vec<String>, String)> {
    serde_path_to_error::deserialize::<_, T>(v)
        .err()
        .map(|e| (e.path().iter().map(segment_name).collect(), e.inner().to_string()))
}

/// Internally tagged enums hide the path below the tagged node; re-parse its
/// payload as the concrete variant type to recover it.
fn refine_tagged(node: &serde_json::Value) -> Option<(Vec<String>, String)> {
    let obj = node.as_object()?;
    let (key, tag) = ["kind", "name"].iter().find_map(|k| obj.get(*k).map(|t| (*k, t)))?;
    let mut payload = obj.clone();
    payload.remove(key);
    let payload = serde_json::Value::Object(payload);
    let found = match tag.as_str().unwrap_or_default() {
        "sparse_bg" => probe::<SparseBgSpec>(&payload),
        "image" => probe::<ImageSpec>(&payload),
        "lowrank" => probe::<LowrankSpec>(&payload),
        "mmse_bg" => probe::<BernoulliGaussianPrior>(&payload),
        "sure_let" => probe::<SureLetConfig>(&payload),
        "svt" => probe::<SvtConfig>(&payload),
        "black_box" => probe::<BlackBoxSpec>(&payload),
        "soft_threshold" => probe::<SoftThreshold>(&payload),
        "median" => probe::<MedianFilter>(&payload),
        "identity" => None,
        _ => return Some((vec![key.to_string()], format!("unrecognized value {tag}"))),
    };
    let (mut path, mut message) = found?;
    if let Some((deeper, msg)) = navigate(&payload, &path).and_then(refine_tagged) {
        path.extend(deeper);
        message = msg;
    }
    Some((path, message))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_errors_name_the_field() {
        let err = ExperimentConfig::from_json(r#"{"experiment":{"kind":"sparse_bg","n":"many","rho":0.2}}"#)
            .unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "experiment.n"),
            other => panic!("{other:?}"),
        }
        let err = ExperimentConfig::from_json(r#"{"experiment":{"kind":"lowrank","rows":4,"cols":4,"rank":1},"operator":{"rate":0.5,"variant":"diagonal"}}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "operator.variant"), "{err:?}");
        let err = ExperimentConfig::from_json(
            r#"{"experiment":{"kind":"sparse_bg","n":10,"rho":0.2},"denoiser":{"kind":"black_box","denoiser":{"name":"median","rows":"x","cols":2}}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "denoiser.denoiser.rows"), "{err:?}");
        let err = ExperimentConfig::from_json(r#"{"experiment":{"kind":"cube"}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "experiment.kind"), "{err:?}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.operator.rate = Some(1.5);
        assert!(matches!(cfg.validate(), Err(Error::Config { ref path, .. }) if path == "operator.rate"));
        let mut cfg = ExperimentConfig::default();
        cfg.denoiser = None;
        assert!(matches!(cfg.validate(), Err(Error::Config { ref path, .. }) if path == "denoiser"));
        cfg.algorithm = Algorithm::TurboCs;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Image(ImageSpec {
                path: None,
                fixture: Some(ImageFixture { width: 32, height: 16, seed: 2 }),
            }),
            stopping: Some(StoppingRule { epsilon: 1e-5, max_iters: 7 }),
            evolution: Some(EvolutionConfig { horizon: Some(4), mc_trials: None, seed: 1 }),
            ..Default::default()
        };
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn default_stopping_depends_on_denoiser() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.stopping_rule().max_iters, 20);
        let cfg = ExperimentConfig { denoiser: Some(DenoiserSpec::Svt(crate::denoisers::SvtConfig::new(4, 4))), ..cfg };
        assert_eq!(cfg.stopping_rule(), StoppingRule { epsilon: 1e-4, max_iters: 30 });
    }

    #[test]
    fn image_shape_is_filled_in() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Image(ImageSpec {
                path: None,
                fixture: Some(ImageFixture { width: 32, height: 16, seed: 0 }),
            }),
            denoiser: Some(DenoiserSpec::SureLet(SureLetConfig { transform: TransformKind::Haar, ..Default::default() })),
            ..Default::default()
        };
        let inst = prepare(&cfg).unwrap();
        match inst.module_b {
            ModuleB::Extrinsic(DenoiserSpec::SureLet(c)) => assert_eq!(c.shape, Some([16, 32])),
            other => panic!("{other:?}"),
        }
        assert_eq!(inst.operator.m(), 256);
    }
}
