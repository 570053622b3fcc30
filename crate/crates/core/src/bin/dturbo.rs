//! Command-line front end for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use dturbo::evolution::ModuleB;
use dturbo::experiment::{
    default_denoiser, prepare, run_evolution, run_experiment, Algorithm, ExperimentConfig, ExperimentKind,
    ImageFixture, ImageSpec, LowrankSpec, SparseBgSpec,
};
use dturbo::metrics::{moments, qq_data, write_qq_csv};
use dturbo::sensing::{check_orthonormality, SensingOperator, Variant};
use dturbo::transform::TransformKind;
use dturbo::turbo::{run_d_turbo_cs, run_turbo_cs, StoppingRule, TruthObserver};
use dturbo::Error;

#[derive(Parser)]
#[command(name = "dturbo", version, about = "Turbo compressed sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one recovery and write metrics.json, trace.jsonl, curve.csv (and recovered.pgm for images).
    Recover(RunArgs),
    /// Predict the run with the MSE-evolution recursion and write evolution.csv.
    Evolve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        mc_trials: Option<usize>,
        #[arg(long)]
        evolution_seed: Option<u64>,
    },
    /// Check that a sensing operator has orthonormal rows; exits 0 iff it does.
    OperatorCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "dct", value_parser = parse_name::<TransformKind>)]
        transform: TransformKind,
        /// Check only this variant instead of both.
        #[arg(long, value_parser = parse_name::<Variant>)]
        variant: Option<Variant>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// QQ table of a sample, or of the Module-A error of a configured run.
    Qq {
        /// Whitespace- or comma-separated numbers; otherwise the run is executed.
        #[arg(long, conflicts_with_all = ["config", "iteration"])]
        errors: Option<PathBuf>,
        /// Iteration whose Module-A error is taken (the last one if the run stops earlier).
        #[arg(long, default_value_t = 2)]
        iteration: usize,
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Flags override the matching fields of `--config`.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `output_dir`, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sparse Bernoulli-Gaussian signal length.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// 8-bit PGM image to recover.
    #[arg(long, conflicts_with_all = ["fixture", "lowrank"])]
    image: Option<PathBuf>,
    /// Procedural image `WIDTHxHEIGHT`.
    #[arg(long, value_parser = parse_dims::<2>, conflicts_with = "lowrank")]
    fixture: Option<Dims>,
    /// Low-rank matrix `ROWSxCOLSxRANK`.
    #[arg(long, value_parser = parse_dims::<3>)]
    lowrank: Option<Dims>,
    #[arg(long, conflicts_with = "rate")]
    m: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, value_parser = parse_name::<TransformKind>)]
    transform: Option<TransformKind>,
    #[arg(long, value_parser = parse_name::<Variant>)]
    variant: Option<Variant>,
    #[arg(long)]
    operator_seed: Option<u64>,
    #[arg(long)]
    signal_seed: Option<u64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long, value_parser = parse_name::<Algorithm>)]
    algorithm: Option<Algorithm>,
    /// mmse_bg, sure_let, svt, median, soft_threshold or identity, with default parameters.
    #[arg(long)]
    denoiser: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

fn parse_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Clone, Debug)]
struct Dims(Vec<usize>);

fn parse_dims<const K: usize>(s: &str) -> Result<Dims, String> {
    let dims: Vec<usize> = s.split('x').map(str::parse).collect::<Result<_, _>>().map_err(|e| format!("{e}"))?;
    if dims.len() != K {
        return Err(format!("expected {K} sizes separated by `x`"));
    }
    Ok(Dims(dims))
}

impl RunArgs {
    fn config(&self) -> dturbo::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let mut changed_kind = true;
        if let Some(path) = &self.image {
            cfg.experiment = ExperimentKind::Image(ImageSpec { path: Some(path.clone()), fixture: None });
        } else if let Some(Dims(d)) = &self.fixture {
            cfg.experiment = ExperimentKind::Image(ImageSpec {
                path: None,
                fixture: Some(ImageFixture { width: d[0], height: d[1], seed: self.signal_seed.unwrap_or(0) }),
            });
        } else if let Some(Dims(d)) = &self.lowrank {
            cfg.experiment = ExperimentKind::Lowrank(LowrankSpec { rows: d[0], cols: d[1], rank: d[2] });
        } else if self.n.is_some() || self.rho.is_some() {
            let base = match cfg.experiment {
                ExperimentKind::SparseBg(s) => {
                    changed_kind = false;
                    s
                }
                _ => SparseBgSpec { n: 20000, rho: 0.27 },
            };
            cfg.experiment = ExperimentKind::SparseBg(SparseBgSpec {
                n: self.n.unwrap_or(base.n),
                rho: self.rho.unwrap_or(base.rho),
            });
        } else {
            changed_kind = false;
        }
        if let Some(m) = self.m {
            (cfg.operator.m, cfg.operator.rate) = (Some(m), None);
        }
        if let Some(rate) = self.rate {
            (cfg.operator.m, cfg.operator.rate) = (None, Some(rate));
        }
        if let Some(t) = self.transform {
            cfg.operator.transform = t;
        }
        if let Some(v) = self.variant {
            cfg.operator.variant = v;
        }
        if let Some(s) = self.operator_seed {
            cfg.operator.seed = s;
        }
        if let Some(s) = self.signal_seed {
            cfg.seeds.signal = s;
        }
        if let Some(s) = self.noise_seed {
            cfg.seeds.noise = s;
        }
        if let Some(v) = self.noise_var {
            cfg.noise_var = v;
        }
        if let Some(a) = self.algorithm {
            cfg.algorithm = a;
        }
        match (&self.denoiser, changed_kind) {
            (Some(kind), _) => cfg.denoiser = Some(default_denoiser(kind, &cfg.experiment)?),
            (None, true) => {
                let kind = if matches!(cfg.experiment, ExperimentKind::Lowrank(_)) { "svt" } else { "sure_let" };
                cfg.denoiser = Some(default_denoiser(kind, &cfg.experiment)?);
            }
            (None, false) => {}
        }
        if self.epsilon.is_some() || self.max_iters.is_some() {
            let base = cfg.stopping_rule();
            cfg.stopping = Some(StoppingRule {
                epsilon: self.epsilon.unwrap_or(base.epsilon),
                max_iters: self.max_iters.unwrap_or(base.max_iters),
            });
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        cfg.output_dir.get_or_insert_with(|| PathBuf::from("."));
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Pgm { .. } => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> dturbo::Result<ExitCode> {
    match command {
        Command::Recover(args) => {
            let (report, _) = run_experiment(&args.config()?)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Evolve { run, horizon, mc_trials, evolution_seed } => {
            let mut cfg = run.config()?;
            let evo = cfg.evolution.get_or_insert_with(Default::default);
            evo.horizon = horizon.or(evo.horizon);
            evo.mc_trials = mc_trials.or(evo.mc_trials);
            evo.seed = evolution_seed.unwrap_or(evo.seed);
            let trace = run_evolution(&cfg)?;
            trace.write_csv(std::io::stdout().lock()).map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
        }
        Command::OperatorCheck { n, m, seed, transform, variant, trials } => {
            let variants = match variant {
                Some(v) => vec![v],
                None => vec![Variant::Plain, Variant::SignFlipped],
            };
            let mut ok = true;
            for v in variants {
                let op = SensingOperator::build(n, m, transform, v, seed)?;
                let rep = check_orthonormality(&op, trials, seed, 1e-10)?;
                println!(
                    "{v:?}: adjoint error {:.3e}, projection error {:.3e}: {}",
                    rep.adjoint_error,
                    rep.projection_error,
                    if rep.passed() { "ok" } else { "FAILED" }
                );
                ok &= rep.passed();
            }
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(3) });
        }
        Command::Qq { errors, iteration, run } => {
            let sample = match &errors {
                Some(path) => read_numbers(path)?,
                None => module_a_error(&run.config()?, iteration)?,
            };
            let m = moments(&sample)?;
            eprintln!("skewness {:.4}, kurtosis {:.4}", m.skewness, m.kurtosis);
            let pairs = qq_data(&sample)?;
            let out = match &run.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                    dir.join("qq.csv")
                }
                None => PathBuf::from("qq.csv"),
            };
            let file = std::fs::File::create(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            write_qq_csv(std::io::BufWriter::new(file), &pairs).map_err(|e| Error::Io { path: out, source: e })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_numbers(path: &PathBuf) -> dturbo::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::InvalidParameter(format!("not a number: `{t}`"))))
        .collect()
}

/// `(x_B^pri − x)/√v_B^pri` at the requested iteration.
fn module_a_error(cfg: &ExperimentConfig, iteration: usize) -> dturbo::Result<Vec<f64>> {
    let inst = prepare(cfg)?;
    let stop = StoppingRule { max_iters: inst.stop.max_iters.max(iteration), ..inst.stop };
    let mut obs = TruthObserver::new(&inst.x).keep_module_a_errors();
    let outcome = match &inst.module_b {
        ModuleB::TurboMmse(p) => run_turbo_cs(&inst.operator, &inst.y, inst.noise_var, p, &stop, &mut obs),
        ModuleB::Extrinsic(s) => run_d_turbo_cs(&inst.operator, &inst.y, inst.noise_var, s, &stop, &mut obs),
    };
    if let Err(a) = outcome {
        if obs.module_a_errors.len() < iteration {
            return Err(a.error);
        }
    }
    let captured = obs
        .module_a_errors
        .iter()
        .find(|e| e.iteration == iteration)
        .or(obs.module_a_errors.last())
        .ok_or_else(|| Error::InvalidParameter("the run produced no iterations".into()))?;
    Ok(captured.standardized())
}
