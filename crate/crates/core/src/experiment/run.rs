use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::plot::render_plots;
use crate::asymptotics::{fit_asymptotes, AsymptoticParams};
use crate::data::{read_dataset_csv, DualSample};
use crate::error::{Error, Phase, Result};
use crate::io::{save_model, write_atomic};
use crate::model::{CompositeModel, Normalization, Treatment};
use crate::neural::Mlp;
use crate::problems::{SimSpec, SyntheticSpec};
use crate::training::{evaluate_on_grid, loss_components, train, uniform_grid, Evaluation, GridMetrics, TrainingTrace};

// Decorrelate the uses of one master seed.
const INIT_SALT: u64 = 0x1d87_2b41_c4a3_6f05;
const SHUFFLE_SALT: u64 = 0x7f4a_7c15_9e37_79b9;

pub const MODEL_FILE: &str = "model.bin";
pub const TRACE_FILE: &str = "trace.csv";
pub const EVAL_FILE: &str = "evaluation.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub model: PathBuf,
    pub trace: PathBuf,
    pub evaluation: PathBuf,
    pub summary: PathBuf,
    pub config: PathBuf,
    pub plots: Vec<PathBuf>,
}

impl Artifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            model: dir.join(MODEL_FILE),
            trace: dir.join(TRACE_FILE),
            evaluation: dir.join(EVAL_FILE),
            summary: dir.join(SUMMARY_FILE),
            config: dir.join(CONFIG_FILE),
            plots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub experiment: ExperimentKind,
    pub treatment: Treatment,
    pub loss_kind: crate::training::LossKind,
    pub seed: u64,
    pub n_samples: usize,
    /// Least-squares estimate before training.
    pub fitted_asymptotics: Option<AsymptoticParams>,
    /// Coefficients of the final model (differ from the fit only when trainable).
    pub final_asymptotics: Option<AsymptoticParams>,
    pub normalization: Normalization,
    pub final_vml_loss: f64,
    pub final_dml_loss: Option<f64>,
    pub metrics: GridMetrics,
    pub artifacts: Option<Artifacts>,
    pub wall_seconds: f64,
}

/// Everything a run produces, in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub model: CompositeModel,
    pub trace: TrainingTrace,
    pub evaluation: Evaluation,
    pub data: Vec<DualSample>,
}

/// Training data for `cfg`, generated from its seed or read from `cfg.dataset`.
pub fn generate_data(cfg: &ExperimentConfig) -> Result<Vec<DualSample>> {
    if let Some(path) = &cfg.dataset {
        return read_dataset_csv(path);
    }
    let exec = cfg.train.execution;
    let n = cfg.samples();
    match cfg.experiment {
        ExperimentKind::Synthetic => SyntheticSpec {
            asym: cfg.synthetic.target,
            lo: cfg.synthetic.lo,
            hi: cfg.synthetic.hi,
            n_samples: n,
            seed: cfg.seed,
        }
        .sample(exec),
        ExperimentKind::BsFunction => {
            cfg.market
                .function_sample(cfg.bs_function.lo, cfg.bs_function.hi, n, cfg.seed, exec)
        }
        ExperimentKind::BsRegression => SimSpec {
            n_paths: n,
            spots: cfg.regression.spots,
            market: cfg.market,
            seed: cfg.seed,
        }
        .simulate(exec),
    }
}

/// Analytic value and derivative the experiment is scored against. The
/// regression experiment is scored against the closed-form price.
pub fn truth(cfg: &ExperimentConfig) -> impl Fn(f64) -> (f64, f64) + '_ {
    let synthetic = SyntheticSpec {
        asym: cfg.synthetic.target,
        lo: cfg.synthetic.lo,
        hi: cfg.synthetic.hi,
        n_samples: 0,
        seed: 0,
    };
    move |x| match cfg.experiment {
        ExperimentKind::Synthetic => synthetic.eval(x),
        _ => cfg.market.price_delta(x.max(0.0)).unwrap_or((f64::NAN, f64::NAN)),
    }
}

pub fn evaluation_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    let (lo, hi) = cfg.grid_range();
    uniform_grid(lo, hi, cfg.grid.points)
}

/// Scores `model` on the configured grid against the analytic truth.
pub fn evaluate_model(cfg: &ExperimentConfig, model: &CompositeModel) -> Result<Evaluation> {
    if cfg.experiment != ExperimentKind::Synthetic {
        cfg.market.validate()?;
    }
    evaluate_on_grid(model, &evaluation_grid(cfg), truth(cfg), Some(cfg.levels()))
}

/// Runs generate, fit, train and evaluate without touching the filesystem
/// (apart from reading `cfg.dataset`).
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    cfg.validate()?;

    let data = generate_data(cfg).map_err(|e| e.in_phase(Phase::Generate))?;
    if data.is_empty() {
        return Err(Error::InvalidData("no training samples".into()).in_phase(Phase::Generate));
    }

    let (ll, ul) = cfg.levels();
    let norm = Normalization::from_inputs(data.iter().map(|s| s.x)).map_err(|e| e.in_phase(Phase::Fit))?;
    let fitted = if cfg.treatment.uses_asymptotics() {
        Some(fit_asymptotes(&data, ll, ul, cfg.constrain_intercepts).map_err(|e| e.in_phase(Phase::Fit))?)
    } else {
        None
    };
    let net = Mlp::init(&cfg.layer_sizes(), cfg.seed ^ INIT_SALT).map_err(|e| e.in_phase(Phase::Fit))?;
    let model = CompositeModel::new(net, cfg.treatment, fitted, cfg.zasymptotic_scale, norm)
        .map_err(|e| e.in_phase(Phase::Fit))?;

    let mut tcfg = cfg.train.clone();
    tcfg.seed = cfg.seed ^ SHUFFLE_SALT;
    let (model, trace) = train(model, &data, &tcfg).map_err(|e| e.in_phase(Phase::Train))?;

    let (final_vml, final_deriv) =
        loss_components(&model, &data, tcfg.execution).map_err(|e| e.in_phase(Phase::Evaluate))?;
    let evaluation = evaluate_model(cfg, &model).map_err(|e| e.in_phase(Phase::Evaluate))?;

    let summary = RunSummary {
        config: cfg.clone(),
        experiment: cfg.experiment,
        treatment: cfg.treatment,
        loss_kind: cfg.train.loss_kind,
        seed: cfg.seed,
        n_samples: data.len(),
        fitted_asymptotics: fitted,
        final_asymptotics: model.asymptotics().copied(),
        normalization: norm,
        final_vml_loss: final_vml,
        final_dml_loss: final_deriv.map(|d| final_vml + cfg.train.lambda * d),
        metrics: evaluation.metrics,
        artifacts: None,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        summary,
        model,
        trace,
        evaluation,
        data,
    })
}

/// [`execute`] and write model, trace, evaluation, summary, config echo and
/// plots into `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = execute(cfg)?;
    write_artifacts(&mut out, &cfg.output_dir).map_err(|e| e.in_phase(Phase::Write))?;
    Ok(out)
}

fn write_artifacts(out: &mut RunOutput, dir: &Path) -> Result<()> {
    let mut art = Artifacts::in_dir(dir);
    save_model(&art.model, &out.model)?;
    out.trace.write_csv(&art.trace)?;
    out.evaluation.write_csv(&art.evaluation)?;
    write_atomic(&art.config, out.summary.config.to_toml().as_bytes())?;
    if out.summary.config.write_plots {
        art.plots = render_plots(dir, &out.summary.config)?;
    }
    out.summary.artifacts = Some(art.clone());
    let json = serde_json::to_vec_pretty(&out.summary)?;
    write_atomic(&art.summary, &json)
}

pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join(SUMMARY_FILE);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}
