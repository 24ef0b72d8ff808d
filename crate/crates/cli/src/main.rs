use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asymnet::data::write_dataset_csv;
use asymnet::experiment::run::{CONFIG_FILE, EVAL_FILE, MODEL_FILE};
use asymnet::experiment::{
    evaluate_model, generate_data, render_plots, run, sweep, ExperimentConfig, ExperimentKind, SweepAxis,
};
use asymnet::io::load_model;
use asymnet::{Error, Execution, LossKind, Treatment};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// Neural function approximation with enforced linear asymptotes.
#[derive(Parser, Debug)]
#[command(name = "asymnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model and write its artifacts to the output directory.
    Run(ConfigArgs),
    /// Run a grid of seeded cells and write a comparison CSV.
    Sweep(SweepArgs),
    /// Redraw the SVG plots of an existing run directory.
    Plot {
        /// Directory written by `run`.
        run_dir: PathBuf,
    },
    /// Re-evaluate a saved model against the analytic truth.
    Eval(EvalArgs),
    /// Write the training dataset of a config as CSV.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Overrides applied on top of the config file (or the built-in defaults).
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<ExperimentKind>,
    #[arg(long)]
    treatment: Option<Treatment>,
    #[arg(long = "loss")]
    loss_kind: Option<LossKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_samples: Option<usize>,
    /// Comma-separated hidden layer widths, e.g. 20,20.
    #[arg(long, value_delimiter = ',')]
    hidden_layers: Option<Vec<usize>>,
    #[arg(long, allow_hyphen_values = true)]
    ll: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ul: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    zasymptotic_scale: Option<f64>,
    #[arg(long)]
    constrain_intercepts: bool,
    /// Train on this x,y,dy_dx CSV instead of generated data.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    no_plots: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Minibatch size; full batch when omitted.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Single-threaded execution.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    grid_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    grid_hi: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["powers", "treatment_grid"])]
    sizes: Option<Vec<usize>>,
    /// Sample sizes 2^LO..=2^HI, written LO..HI.
    #[arg(long, conflicts_with = "treatment_grid")]
    powers: Option<String>,
    /// Cross {vml, dml} with {none, trainable, fixed}.
    #[arg(long)]
    treatment_grid: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Run directory holding model.bin and config.toml.
    #[arg(long, conflicts_with_all = ["model"])]
    run_dir: Option<PathBuf>,
    #[arg(long, requires = "config")]
    model: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the evaluation table here.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(
                self.experiment.unwrap_or(ExperimentKind::Synthetic),
                self.treatment.unwrap_or(Treatment::Fixed),
                self.loss_kind.unwrap_or(LossKind::Dml),
            ),
        };
        if let Some(v) = self.experiment {
            cfg.experiment = v;
        }
        if let Some(v) = self.treatment {
            cfg.treatment = v;
        }
        if let Some(v) = self.loss_kind {
            cfg.train.loss_kind = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.n_samples.is_some() {
            cfg.n_samples = self.n_samples;
        }
        if let Some(v) = &self.hidden_layers {
            cfg.hidden_layers = v.clone();
        }
        if self.ll.is_some() {
            cfg.ll = self.ll;
        }
        if self.ul.is_some() {
            cfg.ul = self.ul;
        }
        if self.zasymptotic_scale.is_some() {
            cfg.zasymptotic_scale = self.zasymptotic_scale;
        }
        cfg.constrain_intercepts |= self.constrain_intercepts;
        if self.dataset.is_some() {
            cfg.dataset = self.dataset.clone();
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if self.no_plots {
            cfg.write_plots = false;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.lambda {
            cfg.train.lambda = v;
        }
        if self.batch_size.is_some() {
            cfg.train.batch_size = self.batch_size;
        }
        if self.sequential {
            cfg.train.execution = Execution::Sequential;
        }
        if let Some(v) = self.grid_points {
            cfg.grid.points = v;
        }
        if self.grid_lo.is_some() {
            cfg.grid.lo = self.grid_lo;
        }
        if self.grid_hi.is_some() {
            cfg.grid.hi = self.grid_hi;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_powers(s: &str) -> Result<SweepAxis, Error> {
    let bad = || Error::Config(format!("--powers expects LO..HI, got {s:?}"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi || hi > 40 {
        return Err(bad());
    }
    Ok(SweepAxis::powers_of_two(lo, hi))
}

enum Failure {
    Error(Error),
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = run(&cfg)?;
            print_json(&out.summary.metrics)?;
            eprintln!("wrote {}", cfg.output_dir.display());
        }
        Command::Sweep(args) => {
            let base = args.config.resolve()?;
            let axis = match (&args.sizes, &args.powers, args.treatment_grid) {
                (Some(sizes), _, _) => SweepAxis::SampleSizes(sizes.clone()),
                (None, Some(p), _) => parse_powers(p)?,
                (None, None, true) => SweepAxis::TreatmentGrid,
                (None, None, false) => {
                    return Err(Error::Config("choose an axis: --sizes, --powers or --treatment-grid".into()).into())
                }
            };
            let outcome = sweep(&base, &axis)?;
            eprintln!(
                "{} cells succeeded, {} failed; comparison in {}",
                outcome.summaries.len(),
                outcome.failures.len(),
                base.output_dir.display()
            );
            for f in &outcome.failures {
                eprintln!("cell {} ({}): {}", f.index, f.label, f.error);
            }
            if !outcome.is_complete() {
                return Err(Failure::Partial(outcome.failures.len()));
            }
        }
        Command::Plot { run_dir } => {
            let cfg = ExperimentConfig::load(&run_dir.join(CONFIG_FILE))?;
            for p in render_plots(&run_dir, &cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Eval(args) => {
            let (model_path, cfg_path) = match (&args.run_dir, &args.model, &args.config) {
                (Some(dir), _, cfg) => (dir.join(MODEL_FILE), cfg.clone().unwrap_or(dir.join(CONFIG_FILE))),
                (None, Some(m), Some(c)) => (m.clone(), c.clone()),
                _ => return Err(Error::Config("eval needs --run-dir, or --model with --config".into()).into()),
            };
            let cfg = ExperimentConfig::load(&cfg_path)?;
            let model = load_model(&model_path)?;
            let eval = evaluate_model(&cfg, &model)?;
            let out = args
                .out
                .clone()
                .or_else(|| args.run_dir.as_deref().map(|d: &Path| d.join(EVAL_FILE)));
            if let Some(path) = out {
                eval.write_csv(&path)?;
                eprintln!("wrote {}", path.display());
            }
            print_json(&eval.metrics)?;
        }
        Command::GenData { config, out } => {
            let cfg = config.resolve()?;
            let data = generate_data(&cfg)?;
            write_dataset_csv(&out, &data)?;
            eprintln!("wrote {} samples to {}", data.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(n)) => {
            eprintln!("error: {n} sweep cell(s) failed");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG })
        }
    }
}
