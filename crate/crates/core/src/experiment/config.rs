use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticParams;
use crate::error::{Error, Result};
use crate::model::Treatment;
use crate::problems::{Market, SpotDistribution};
use crate::training::{LossKind, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Synthetic piecewise function with exact labels.
    Synthetic,
    /// Closed-form Black-Scholes call price as a function of spot.
    BsFunction,
    /// Black-Scholes price regressed from simulated discounted payoffs.
    BsRegression,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::Synthetic,
        ExperimentKind::BsFunction,
        ExperimentKind::BsRegression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Synthetic => "synthetic",
            ExperimentKind::BsFunction => "bs-function",
            ExperimentKind::BsRegression => "bs-regression",
        }
    }

    pub fn default_samples(self) -> usize {
        match self {
            ExperimentKind::Synthetic | ExperimentKind::BsFunction => 50_000,
            ExperimentKind::BsRegression => 10_000,
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown experiment `{s}` (expected synthetic, bs-function or bs-regression)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    /// Parameters of the target function itself.
    pub target: AsymptoticParams,
    pub lo: f64,
    pub hi: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let spec = crate::problems::SyntheticSpec::default();
        Self {
            target: spec.asym,
            lo: spec.lo,
            hi: spec.hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpotRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for SpotRange {
    fn default() -> Self {
        Self { lo: 0.0, hi: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSection {
    pub spots: SpotDistribution,
}

impl Default for RegressionSection {
    fn default() -> Self {
        Self {
            spots: SpotDistribution::Uniform { lo: 0.0, hi: 20.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Defaults to the experiment's sampling range.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            lo: None,
            hi: None,
            points: 2001,
        }
    }
}

/// Axis ranges shared by every run of one experiment. Difference ranges are
/// symmetric half-widths; the loss range is in loss units on a log axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotScales {
    pub diff_value: f64,
    pub diff_dvalue: f64,
    pub loss_min: f64,
    pub loss_max: f64,
}

impl PlotScales {
    pub fn for_experiment(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Synthetic => Self {
                diff_value: 20.0,
                diff_dvalue: 50.0,
                loss_min: 1e-6,
                loss_max: 1e5,
            },
            ExperimentKind::BsFunction => Self {
                diff_value: 0.1,
                diff_dvalue: 0.1,
                loss_min: 1e-8,
                loss_max: 1e2,
            },
            ExperimentKind::BsRegression => Self {
                diff_value: 0.25,
                diff_dvalue: 0.25,
                loss_min: 1e-3,
                loss_max: 1e2,
            },
        }
    }
}

/// Declarative description of one run. Every field has a default, so an
/// empty file (or no file) reproduces the reference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentKind,
    pub treatment: Treatment,
    /// Master seed: data, network initialization and minibatch order derive from it.
    pub seed: u64,
    /// Training set size; defaults to 50000 (function experiments) or 10000 paths.
    pub n_samples: Option<usize>,
    pub hidden_layers: Vec<usize>,
    /// Window overrides; default (-5, 5) for synthetic and (7, 13) otherwise.
    pub ll: Option<f64>,
    pub ul: Option<f64>,
    /// Replaces the blending scale 1/(ll*ul).
    pub zasymptotic_scale: Option<f64>,
    pub constrain_intercepts: bool,
    /// Train on this `x,y,dy_dx` CSV instead of generating data.
    pub dataset: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub write_plots: bool,
    pub train: TrainConfig,
    pub synthetic: SyntheticSection,
    pub market: Market,
    pub bs_function: SpotRange,
    pub regression: RegressionSection,
    pub grid: GridSection,
    pub plot_scales: Option<PlotScales>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            experiment: ExperimentKind::Synthetic,
            treatment: Treatment::Fixed,
            seed: 1,
            n_samples: None,
            hidden_layers: vec![20, 20],
            ll: None,
            ul: None,
            zasymptotic_scale: None,
            constrain_intercepts: false,
            dataset: None,
            output_dir: PathBuf::from("runs/default"),
            write_plots: true,
            train: TrainConfig::default(),
            synthetic: SyntheticSection::default(),
            market: Market::default(),
            bs_function: SpotRange::default(),
            regression: RegressionSection::default(),
            grid: GridSection::default(),
            plot_scales: None,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, treatment: Treatment, loss: LossKind) -> Self {
        let mut cfg = Self {
            experiment,
            treatment,
            ..Self::default()
        };
        cfg.train.loss_kind = loss;
        cfg.output_dir = PathBuf::from(format!("runs/{}-{}-{}", experiment, treatment, loss));
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if self.n_samples == Some(0) {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if self.grid.points == 0 {
            return Err(Error::Config("grid.points must be positive".into()));
        }
        let (ll, ul) = self.levels();
        if !(ll < ul) {
            return Err(Error::Config(format!("need ll < ul, got ll={ll}, ul={ul}")));
        }
        self.train.validate()
    }

    pub fn samples(&self) -> usize {
        self.n_samples.unwrap_or(self.experiment.default_samples())
    }

    pub fn levels(&self) -> (f64, f64) {
        let (ll, ul) = match self.experiment {
            ExperimentKind::Synthetic => (self.synthetic.target.ll, self.synthetic.target.ul),
            _ => (7.0, 13.0),
        };
        (self.ll.unwrap_or(ll), self.ul.unwrap_or(ul))
    }

    /// Sampling range of the experiment's inputs.
    pub fn sampling_range(&self) -> (f64, f64) {
        match self.experiment {
            ExperimentKind::Synthetic => (self.synthetic.lo, self.synthetic.hi),
            ExperimentKind::BsFunction => (self.bs_function.lo, self.bs_function.hi),
            ExperimentKind::BsRegression => match self.regression.spots {
                SpotDistribution::Uniform { lo, hi } => (lo, hi),
                SpotDistribution::Lognormal { .. } => (self.bs_function.lo, self.bs_function.hi),
            },
        }
    }

    pub fn grid_range(&self) -> (f64, f64) {
        let (lo, hi) = self.sampling_range();
        (self.grid.lo.unwrap_or(lo), self.grid.hi.unwrap_or(hi))
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_layers.len() + 2);
        sizes.push(1);
        sizes.extend_from_slice(&self.hidden_layers);
        sizes.push(1);
        sizes
    }

    pub fn scales(&self) -> PlotScales {
        self.plot_scales
            .unwrap_or_else(|| PlotScales::for_experiment(self.experiment))
    }
}
