//! Value-only (VML) and value-plus-derivative (DML) losses, the Adam epoch
//! loop, and evaluation against a known truth on a grid.
//!
//! Losses are means over samples:
//!
//! ```text
//! vml = mean (y - f(x))^2
//! dml = vml + lambda * mean (dy/dx - f'(x))^2
//! ```

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::data::has_derivatives;
pub use crate::data::DualSample;
use crate::error::{Error, Result};
use crate::exec::{map_chunks, Execution, CHUNK_LEN};
use crate::io::write_atomic;
use crate::model::{CompositeModel, Workspace};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Vml,
    Dml,
}

impl LossKind {
    pub const ALL: [LossKind; 2] = [LossKind::Vml, LossKind::Dml];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Vml => "vml",
            LossKind::Dml => "dml",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vml" => Ok(LossKind::Vml),
            "dml" => Ok(LossKind::Dml),
            _ => Err(Error::Config(format!("unknown loss `{s}` (expected vml or dml)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    /// Weight of the derivative term in the DML loss.
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Minibatch size; `None` means one full-batch step per epoch.
    pub batch_size: Option<usize>,
    /// Seeds minibatch shuffling. Experiment configs derive it from their
    /// master seed, so it is not part of the serialized form.
    #[serde(skip)]
    pub seed: u64,
    pub execution: Execution,
    /// Fill the `seconds` trace column with wall time; left at 0 otherwise so
    /// traces are reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::Vml,
            lambda: 1.0,
            epochs: 200,
            learning_rate: 0.05,
            batch_size: None,
            seed: 0,
            execution: Execution::default(),
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub vml_loss: f64,
    /// NaN when the data carries no derivative labels.
    pub dml_loss: f64,
    pub seconds: f64,
}

/// Losses of the model after each epoch; record 0 is the initial model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainingTrace {
    pub fn initial(&self) -> Option<&EpochRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(b"epoch,vml_loss,dml_loss,seconds\n");
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.epoch, r.vml_loss, r.dml_loss, r.seconds).expect("write to Vec");
        }
        write_atomic(path, &out)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidData(format!("{}: bad trace row {rec:?}", path.display())))
            };
            records.push(EpochRecord {
                epoch: num(0)? as usize,
                vml_loss: num(1)?,
                dml_loss: num(2)?,
                seconds: num(3)?,
            });
        }
        Ok(Self { records })
    }
}

/// Sums over one chunk of samples.
struct ChunkSums {
    value_sq: f64,
    deriv_sq: f64,
    grad: Option<Vec<f64>>,
}

/// Squared-residual sums and, when `grad_weights` is given, the gradient of
/// `value_w * sum (f - y)^2 + deriv_w * sum (f' - dy)^2`.
fn chunk_pass(m: &CompositeModel, chunk: &[DualSample], grad_weights: Option<(f64, f64)>) -> Result<ChunkSums> {
    let mut ws = Workspace::default();
    let mut grad = grad_weights.map(|_| vec![0.0; m.n_trainable()]);
    let (mut value_sq, mut deriv_sq) = (0.0, 0.0);
    for s in chunk {
        m.forward(s.x, &mut ws)?;
        let rv = ws.value - s.y;
        let rd = s.dy_dx.map(|d| ws.dvalue_dx - d);
        value_sq += rv * rv;
        if let Some(rd) = rd {
            deriv_sq += rd * rd;
        }
        if let (Some(g), Some((wv, wd))) = (grad.as_mut(), grad_weights) {
            let seed_d = match rd {
                Some(rd) if wd != 0.0 => 2.0 * wd * rd,
                _ => 0.0,
            };
            m.backward_acc(&mut ws, 2.0 * wv * rv, seed_d, g)?;
        }
    }
    Ok(ChunkSums {
        value_sq,
        deriv_sq,
        grad,
    })
}

/// Mean squared value residual and, if every sample has a derivative label,
/// mean squared derivative residual.
pub fn loss_components(m: &CompositeModel, data: &[DualSample], exec: Execution) -> Result<(f64, Option<f64>)> {
    if data.is_empty() {
        return Err(Error::InvalidData("loss of an empty dataset".into()));
    }
    let parts = map_chunks(exec, data, CHUNK_LEN, |_, c| chunk_pass(m, c, None));
    let (mut value_sq, mut deriv_sq) = (0.0, 0.0);
    for p in parts {
        let p = p?;
        value_sq += p.value_sq;
        deriv_sq += p.deriv_sq;
    }
    let n = data.len() as f64;
    let deriv = has_derivatives(data).then_some(deriv_sq / n);
    Ok((value_sq / n, deriv))
}

pub fn vml_loss(m: &CompositeModel, data: &[DualSample]) -> Result<f64> {
    Ok(loss_components(m, data, Execution::default())?.0)
}

pub fn dml_loss(m: &CompositeModel, data: &[DualSample], lambda: f64) -> Result<f64> {
    match loss_components(m, data, Execution::default())? {
        (v, Some(d)) => Ok(v + lambda * d),
        (_, None) => Err(Error::InvalidData("DML loss needs dy_dx on every sample".into())),
    }
}

/// Configured loss and its gradient over the trainable vector, both averaged
/// over `batch`.
pub fn loss_and_gradient(
    m: &CompositeModel,
    batch: &[DualSample],
    kind: LossKind,
    lambda: f64,
    exec: Execution,
) -> Result<(f64, Vec<f64>)> {
    let (loss, _, grad) = batch_gradient(m, batch, kind, lambda, exec)?;
    Ok((loss, grad))
}

/// Mean squared value error and, when labelled, mean squared derivative error.
type Components = (f64, Option<f64>);

/// Returns `(configured loss, components, gradient)`.
fn batch_gradient(
    m: &CompositeModel,
    batch: &[DualSample],
    kind: LossKind,
    lambda: f64,
    exec: Execution,
) -> Result<(f64, Components, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidData("gradient of an empty batch".into()));
    }
    let with_d = has_derivatives(batch);
    if kind == LossKind::Dml && !with_d {
        return Err(Error::InvalidData("DML training needs dy_dx on every sample".into()));
    }
    let n = batch.len() as f64;
    let wd = match kind {
        LossKind::Vml => 0.0,
        LossKind::Dml => lambda / n,
    };
    let weights = (1.0 / n, wd);
    let parts = map_chunks(exec, batch, CHUNK_LEN, |_, c| chunk_pass(m, c, Some(weights)));
    let mut grad = vec![0.0; m.n_trainable()];
    let (mut value_sq, mut deriv_sq) = (0.0, 0.0);
    for p in parts {
        let p = p?;
        value_sq += p.value_sq;
        deriv_sq += p.deriv_sq;
        for (g, pg) in grad.iter_mut().zip(p.grad.expect("gradient requested")) {
            *g += pg;
        }
    }
    let vml = value_sq / n;
    let deriv = with_d.then_some(deriv_sq / n);
    let loss = match kind {
        LossKind::Vml => vml,
        LossKind::Dml => vml + lambda * deriv.expect("checked above"),
    };
    Ok((loss, (vml, deriv), grad))
}

fn record(epoch: usize, (vml, deriv): (f64, Option<f64>), lambda: f64, seconds: f64) -> Result<EpochRecord> {
    let dml = deriv.map_or(f64::NAN, |d| vml + lambda * d);
    if !vml.is_finite() || deriv.is_some_and(|d| !d.is_finite()) {
        return Err(Error::NonFiniteTraining { what: "loss", epoch });
    }
    Ok(EpochRecord {
        epoch,
        vml_loss: vml,
        dml_loss: dml,
        seconds,
    })
}

/// Runs `cfg.epochs` epochs of Adam on the configured loss and returns the
/// final-epoch model with its loss trace.
pub fn train(
    mut model: CompositeModel,
    data: &[DualSample],
    cfg: &TrainConfig,
) -> Result<(CompositeModel, TrainingTrace)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidData("training set is empty".into()));
    }
    if cfg.loss_kind == LossKind::Dml && !has_derivatives(data) {
        return Err(Error::InvalidData("DML training needs dy_dx on every sample".into()));
    }
    let start = Instant::now();
    let clock = || {
        if cfg.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    };
    let exec = cfg.execution;
    let mut adam = AdamState::new(model.n_trainable(), cfg.learning_rate);
    let mut params = model.trainable_vector();
    let mut trace = TrainingTrace::default();
    let full_batch = cfg.batch_size.is_none_or(|b| b >= data.len());

    if !full_batch {
        let comps = loss_components(&model, data, exec).map_err(|e| numerical(e, 0))?;
        trace.records.push(record(0, comps, cfg.lambda, clock())?);
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        if full_batch {
            let (_, comps, grad) =
                batch_gradient(&model, data, cfg.loss_kind, cfg.lambda, exec).map_err(|e| numerical(e, epoch))?;
            // the gradient pass evaluates the model left by the previous epoch
            trace.records.push(record(epoch - 1, comps, cfg.lambda, clock())?);
            adam.step(&mut params, &grad).map_err(|e| numerical(e, epoch))?;
            model.set_trainable_vector(&params)?;
        } else {
            let bs = cfg.batch_size.expect("minibatch mode");
            order.shuffle(&mut stream_rng(cfg.seed, epoch as u64));
            let mut batch = Vec::with_capacity(bs);
            for idx in order.chunks(bs) {
                batch.clear();
                batch.extend(idx.iter().map(|&i| data[i]));
                let (_, _, grad) =
                    batch_gradient(&model, &batch, cfg.loss_kind, cfg.lambda, exec).map_err(|e| numerical(e, epoch))?;
                adam.step(&mut params, &grad).map_err(|e| numerical(e, epoch))?;
                model.set_trainable_vector(&params)?;
            }
            let comps = loss_components(&model, data, exec).map_err(|e| numerical(e, epoch))?;
            trace.records.push(record(epoch, comps, cfg.lambda, clock())?);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteTraining {
                what: "parameter",
                epoch,
            });
        }
    }
    if full_batch {
        let comps = loss_components(&model, data, exec).map_err(|e| numerical(e, cfg.epochs))?;
        trace.records.push(record(cfg.epochs, comps, cfg.lambda, clock())?);
    }
    Ok((model, trace))
}

fn numerical(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFiniteGradient { .. } => Error::NonFiniteTraining {
            what: "gradient",
            epoch,
        },
        Error::NonFiniteLayer { .. } => Error::NonFiniteTraining {
            what: "activation",
            epoch,
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub x: f64,
    pub pred_value: f64,
    pub pred_dvalue: f64,
    pub true_value: f64,
    pub true_dvalue: f64,
    pub diff_value: f64,
    pub diff_dvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMetrics {
    pub count: usize,
    pub max_abs_value: f64,
    pub mean_abs_value: f64,
    pub max_abs_dvalue: f64,
    pub mean_abs_dvalue: f64,
}

impl RegionMetrics {
    fn from_rows<'a>(rows: impl Iterator<Item = &'a EvalRow>) -> Option<Self> {
        let mut m = RegionMetrics {
            count: 0,
            max_abs_value: 0.0,
            mean_abs_value: 0.0,
            max_abs_dvalue: 0.0,
            mean_abs_dvalue: 0.0,
        };
        for r in rows {
            m.count += 1;
            m.max_abs_value = m.max_abs_value.max(r.diff_value.abs());
            m.max_abs_dvalue = m.max_abs_dvalue.max(r.diff_dvalue.abs());
            m.mean_abs_value += r.diff_value.abs();
            m.mean_abs_dvalue += r.diff_dvalue.abs();
        }
        if m.count == 0 {
            return None;
        }
        m.mean_abs_value /= m.count as f64;
        m.mean_abs_dvalue /= m.count as f64;
        Some(m)
    }
}

/// Error summaries overall and per region: `x <= ll`, `ll < x < ul`, `x >= ul`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMetrics {
    pub overall: RegionMetrics,
    pub lower: Option<RegionMetrics>,
    pub interior: Option<RegionMetrics>,
    pub upper: Option<RegionMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<EvalRow>,
    pub metrics: GridMetrics,
}

impl Evaluation {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.rows.len() * 120);
        out.extend_from_slice(b"x,pred_value,pred_dvalue,true_value,true_dvalue,diff_value,diff_dvalue\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.x, r.pred_value, r.pred_dvalue, r.true_value, r.true_dvalue, r.diff_value, r.diff_dvalue
            )
            .expect("write to Vec");
        }
        write_atomic(path, &out)
    }

    pub fn read_csv(path: &Path) -> Result<Vec<EvalRow>> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for r in rdr.deserialize() {
            rows.push(r?);
        }
        Ok(rows)
    }
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Compares the model with `truth` (value, derivative) at every grid point.
/// `window` sets the region split; it defaults to the model's own levels.
pub fn evaluate_on_grid(
    m: &CompositeModel,
    grid: &[f64],
    truth: impl Fn(f64) -> (f64, f64),
    window: Option<(f64, f64)>,
) -> Result<Evaluation> {
    if grid.is_empty() {
        return Err(Error::InvalidData("evaluation grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut ws = Workspace::default();
    for &x in grid {
        m.forward(x, &mut ws)?;
        let (tv, td) = truth(x);
        rows.push(EvalRow {
            x,
            pred_value: ws.value,
            pred_dvalue: ws.dvalue_dx,
            true_value: tv,
            true_dvalue: td,
            diff_value: ws.value - tv,
            diff_dvalue: ws.dvalue_dx - td,
        });
    }
    let window = window.or_else(|| m.asymptotics().map(|p| (p.ll, p.ul)));
    let metrics = grid_metrics(&rows, window);
    Ok(Evaluation { rows, metrics })
}

pub fn grid_metrics(rows: &[EvalRow], window: Option<(f64, f64)>) -> GridMetrics {
    let overall = RegionMetrics::from_rows(rows.iter()).unwrap_or(RegionMetrics {
        count: 0,
        max_abs_value: 0.0,
        mean_abs_value: 0.0,
        max_abs_dvalue: 0.0,
        mean_abs_dvalue: 0.0,
    });
    let (lower, interior, upper) = match window {
        Some((ll, ul)) => (
            RegionMetrics::from_rows(rows.iter().filter(|r| r.x <= ll)),
            RegionMetrics::from_rows(rows.iter().filter(|r| r.x > ll && r.x < ul)),
            RegionMetrics::from_rows(rows.iter().filter(|r| r.x >= ul)),
        ),
        None => (None, Some(overall), None),
    };
    GridMetrics {
        overall,
        lower,
        interior,
        upper,
    }
}
