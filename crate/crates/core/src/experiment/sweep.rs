use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::plot::{difference_panels, loss_panel, render_svg};
use super::run::{execute, run, RunOutput, RunSummary};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::io::write_atomic;
use crate::model::Treatment;
use crate::rng::derive_seed;
use crate::training::{LossKind, RegionMetrics};

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const OVERLAY_DIFFERENCE_PLOT: &str = "overlay_difference.svg";
pub const OVERLAY_LOSS_PLOT: &str = "overlay_loss.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SampleSizes(Vec<usize>),
    /// Every loss kind crossed with every treatment.
    TreatmentGrid,
}

impl SweepAxis {
    /// Powers of two `2^lo ..= 2^hi`.
    pub fn powers_of_two(lo: u32, hi: u32) -> Self {
        SweepAxis::SampleSizes((lo..=hi).map(|e| 1usize << e).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub index: usize,
    pub label: String,
    pub error: String,
    pub numerical: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub summaries: Vec<RunSummary>,
    pub failures: Vec<CellFailure>,
    pub comparison: Vec<ComparisonRow>,
}

impl SweepOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub experiment: String,
    pub treatment: String,
    pub loss_kind: String,
    pub n_samples: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

fn cell_label(cfg: &ExperimentConfig) -> String {
    format!(
        "{}-{}-n{}-s{}",
        cfg.treatment.name(),
        cfg.train.loss_kind.name(),
        cfg.samples(),
        cfg.seed
    )
}

/// Expands `base` along `axis`. Cell `i` gets seed `base.seed ^ i` and its
/// own output subdirectory.
pub fn plan(base: &ExperimentConfig, axis: &SweepAxis) -> Result<Vec<SweepCell>> {
    let mut configs = Vec::new();
    match axis {
        SweepAxis::SampleSizes(sizes) => {
            if sizes.is_empty() {
                return Err(Error::Config("sweep axis has no sample sizes".into()));
            }
            for &n in sizes {
                let mut c = base.clone();
                c.n_samples = Some(n);
                configs.push(c);
            }
        }
        SweepAxis::TreatmentGrid => {
            for loss in LossKind::ALL {
                for t in Treatment::ALL {
                    let mut c = base.clone();
                    c.treatment = t;
                    c.train.loss_kind = loss;
                    configs.push(c);
                }
            }
        }
    }
    Ok(configs
        .into_iter()
        .enumerate()
        .map(|(i, mut c)| {
            c.seed = derive_seed(base.seed, i as u64);
            c.output_dir = base.output_dir.join(format!("cell-{i:03}-{}", cell_label(&c)));
            SweepCell { index: i, config: c }
        })
        .collect())
}

fn region_rows(s: &RunSummary, out: &mut Vec<ComparisonRow>) {
    let mut push = |metric: String, value: f64| {
        out.push(ComparisonRow {
            experiment: s.experiment.name().into(),
            treatment: s.treatment.name().into(),
            loss_kind: s.loss_kind.name().into(),
            n_samples: s.n_samples,
            seed: s.seed,
            metric,
            value,
        })
    };
    push("final_vml_loss".into(), s.final_vml_loss);
    if let Some(d) = s.final_dml_loss {
        push("final_dml_loss".into(), d);
    }
    let regions: [(&str, Option<&RegionMetrics>); 4] = [
        ("overall", Some(&s.metrics.overall)),
        ("lower", s.metrics.lower.as_ref()),
        ("interior", s.metrics.interior.as_ref()),
        ("upper", s.metrics.upper.as_ref()),
    ];
    for (name, m) in regions {
        if let Some(m) = m {
            push(format!("{name}_max_abs_value"), m.max_abs_value);
            push(format!("{name}_mean_abs_value"), m.mean_abs_value);
            push(format!("{name}_max_abs_dvalue"), m.max_abs_dvalue);
            push(format!("{name}_mean_abs_dvalue"), m.mean_abs_dvalue);
        }
    }
}

pub fn comparison_rows(summaries: &[RunSummary]) -> Vec<ComparisonRow> {
    let mut out = Vec::new();
    for s in summaries {
        region_rows(s, &mut out);
    }
    out
}

pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "experiment",
            "treatment",
            "loss_kind",
            "n_samples",
            "seed",
            "metric",
            "value",
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

fn run_cells(cells: &[SweepCell], exec: Execution, persist: bool) -> Vec<Result<RunOutput>> {
    map_indexed(exec, cells.len(), |i| {
        let cfg = &cells[i].config;
        if persist {
            run(cfg)
        } else {
            execute(cfg)
        }
    })
}

/// Runs every cell without writing anything.
pub fn sweep_in_memory(base: &ExperimentConfig, axis: &SweepAxis) -> Result<(Vec<SweepCell>, Vec<Result<RunOutput>>)> {
    let cells = plan(base, axis)?;
    let outputs = run_cells(&cells, base.train.execution, false);
    Ok((cells, outputs))
}

/// Runs every cell into its own subdirectory of `base.output_dir`, then writes
/// the comparison CSV and overlay plots for the cells that succeeded. A failed
/// cell is recorded and does not stop the others.
pub fn sweep(base: &ExperimentConfig, axis: &SweepAxis) -> Result<SweepOutcome> {
    base.validate()?;
    let cells = plan(base, axis)?;
    let outputs = run_cells(&cells, base.train.execution, true);

    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (cell, out) in cells.iter().zip(outputs) {
        match out {
            Ok(o) => ok.push(o),
            Err(e) => failures.push(CellFailure {
                index: cell.index,
                label: cell_label(&cell.config),
                numerical: e.is_numerical(),
                error: e.to_string(),
            }),
        }
    }
    let summaries: Vec<RunSummary> = ok.iter().map(|o| o.summary.clone()).collect();
    let comparison = comparison_rows(&summaries);
    let dir = &base.output_dir;
    write_comparison_csv(&dir.join(COMPARISON_FILE), &comparison)?;
    if base.write_plots && !ok.is_empty() {
        write_overlays(dir, base, &ok)?;
    }
    let json = serde_json::to_vec_pretty(&failures)?;
    write_atomic(&dir.join("failures.json"), &json)?;
    Ok(SweepOutcome {
        summaries,
        failures,
        comparison,
    })
}

fn write_overlays(dir: &Path, base: &ExperimentConfig, runs: &[RunOutput]) -> Result<Vec<PathBuf>> {
    let labels: Vec<String> = runs.iter().map(|o| cell_label(&o.summary.config)).collect();
    let evals: Vec<(String, &[crate::training::EvalRow])> = labels
        .iter()
        .zip(runs)
        .map(|(l, o)| (l.clone(), o.evaluation.rows.as_slice()))
        .collect();
    let traces: Vec<(String, &crate::training::TrainingTrace)> =
        labels.iter().zip(runs).map(|(l, o)| (l.clone(), &o.trace)).collect();
    let diff = dir.join(OVERLAY_DIFFERENCE_PLOT);
    write_atomic(&diff, render_svg(&difference_panels(base, &evals)).as_bytes())?;
    let loss = dir.join(OVERLAY_LOSS_PLOT);
    write_atomic(&loss, render_svg(&[loss_panel(&base.scales(), &traces)]).as_bytes())?;
    Ok(vec![diff, loss])
}
