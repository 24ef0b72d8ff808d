//! Static SVG line charts.
//!
//! Output depends only on the input numbers: coordinates are printed with a
//! fixed number of decimals and no timestamps or ids are emitted. Value and
//! derivative axes are taken from the truth curve and the difference and loss
//! axes from [`PlotScales`], so every treatment of one experiment is drawn on
//! the same axes. Loss plots use a base-10 logarithmic y axis.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, PlotScales};
use super::run::{EVAL_FILE, TRACE_FILE};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::training::{EvalRow, Evaluation, TrainingTrace};

pub const VALUE_PLOT: &str = "value.svg";
pub const DERIVATIVE_PLOT: &str = "derivative.svg";
pub const DIFFERENCE_PLOT: &str = "difference.svg";
pub const LOSS_PLOT: &str = "loss.svg";

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 44.0;
const TICKS: usize = 5;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl Panel {
    fn map_y(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        if self.log_y {
            let y = y.max(lo);
            (y.log10() - lo.log10()) / (hi.log10() - lo.log10())
        } else {
            (y - lo) / (hi - lo)
        }
    }

    fn ticks(&self) -> (Vec<f64>, Vec<f64>) {
        let lin = |(lo, hi): (f64, f64)| -> Vec<f64> {
            (0..TICKS)
                .map(|i| lo + (hi - lo) * i as f64 / (TICKS - 1) as f64)
                .collect()
        };
        let y = if self.log_y {
            let (lo, hi) = (
                self.y_range.0.log10().ceil() as i32,
                self.y_range.1.log10().floor() as i32,
            );
            let step = ((hi - lo) as usize / TICKS).max(1);
            (lo..=hi).step_by(step).map(|e| 10f64.powi(e)).collect()
        } else {
            lin(self.y_range)
        };
        (lin(self.x_range), y)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw_panel(out: &mut String, p: &Panel, top: f64) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = top + PANEL_HEIGHT - MARGIN_BOTTOM;
    let y1 = top + MARGIN_TOP;
    let px = |x: f64| x0 + (x - p.x_range.0) / (p.x_range.1 - p.x_range.0) * (x1 - x0);
    let py = |y: f64| y0 - p.map_y(y).clamp(-0.02, 1.02) * (y0 - y1);

    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="15">{}</text>"#,
        (x0 + x1) / 2.0,
        top + 22.0,
        escape(&p.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000"/>"##,
        x1 - x0,
        y0 - y1
    );
    let (xt, yt) = p.ticks();
    for t in xt {
        let x = px(t);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#000\"/>\
             <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
            y0 + 5.0,
            y0 + 18.0,
            fmt_tick(t)
        );
    }
    for t in yt {
        let y = py(t);
        let _ = writeln!(
            out,
            "<line x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{x1:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{}</text>",
            x0 - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
        (x0 + x1) / 2.0,
        y0 + 36.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle" font-size="12">{}</text>"#,
        18.0,
        (y0 + y1) / 2.0,
        escape(&p.y_label)
    );

    for (i, s) in p.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(d, "{}{:.2},{:.2}", if d.is_empty() { "M" } else { " L" }, px(x), py(y));
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let ly = y1 + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>",
            x0 + 10.0,
            x0 + 30.0,
            x0 + 36.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
}

/// Panels stacked vertically in one document.
pub fn render_svg(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, PANEL_HEIGHT * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    (lo - pad, hi + pad)
}

fn pick(rows: &[EvalRow], f: impl Fn(&EvalRow) -> f64) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r.x, f(r))).collect()
}

fn x_range(cfg: &ExperimentConfig) -> (f64, f64) {
    cfg.grid_range()
}

fn panel(
    title: &str,
    y_label: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    log_y: bool,
    series: Vec<Series>,
) -> Panel {
    Panel {
        title: title.into(),
        x_label: if log_y { "epoch".into() } else { "x".into() },
        y_label: y_label.into(),
        x_range,
        y_range,
        log_y,
        series,
    }
}

pub fn value_panel(cfg: &ExperimentConfig, rows: &[EvalRow]) -> Panel {
    panel(
        "prediction vs truth",
        "value",
        x_range(cfg),
        padded_range(rows.iter().map(|r| r.true_value)),
        false,
        vec![
            Series::new("prediction", pick(rows, |r| r.pred_value)),
            Series::new("truth", pick(rows, |r| r.true_value)),
        ],
    )
}

pub fn derivative_panel(cfg: &ExperimentConfig, rows: &[EvalRow]) -> Panel {
    panel(
        "derivative vs truth",
        "derivative",
        x_range(cfg),
        padded_range(rows.iter().map(|r| r.true_dvalue)),
        false,
        vec![
            Series::new("prediction", pick(rows, |r| r.pred_dvalue)),
            Series::new("truth", pick(rows, |r| r.true_dvalue)),
        ],
    )
}

/// Value and derivative differences (prediction minus truth) for one or more
/// labelled runs.
pub fn difference_panels(cfg: &ExperimentConfig, runs: &[(String, &[EvalRow])]) -> [Panel; 2] {
    let s = cfg.scales();
    let value = runs
        .iter()
        .map(|(l, rows)| Series::new(l.clone(), pick(rows, |r| r.diff_value)))
        .collect();
    let deriv = runs
        .iter()
        .map(|(l, rows)| Series::new(l.clone(), pick(rows, |r| r.diff_dvalue)))
        .collect();
    [
        panel(
            "value difference",
            "difference",
            x_range(cfg),
            (-s.diff_value, s.diff_value),
            false,
            value,
        ),
        panel(
            "derivative difference",
            "difference",
            x_range(cfg),
            (-s.diff_dvalue, s.diff_dvalue),
            false,
            deriv,
        ),
    ]
}

/// Training losses on a log axis. DML losses are drawn when present.
pub fn loss_panel(scales: &PlotScales, runs: &[(String, &TrainingTrace)]) -> Panel {
    let mut series = Vec::new();
    let mut last_epoch = 1usize;
    for (label, trace) in runs {
        let pts = |f: fn(&crate::training::EpochRecord) -> f64| -> Vec<(f64, f64)> {
            trace.records.iter().map(|r| (r.epoch as f64, f(r))).collect()
        };
        last_epoch = last_epoch.max(trace.records.last().map_or(1, |r| r.epoch));
        let suffix = |k: &str| {
            if label.is_empty() {
                k.to_string()
            } else {
                format!("{label} {k}")
            }
        };
        series.push(Series::new(suffix("VML"), pts(|r| r.vml_loss)));
        if trace.records.iter().any(|r| r.dml_loss.is_finite()) {
            series.push(Series::new(suffix("DML"), pts(|r| r.dml_loss)));
        }
    }
    panel(
        "training loss",
        "loss",
        (0.0, last_epoch as f64),
        (scales.loss_min, scales.loss_max),
        true,
        series,
    )
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "missing run artifact"),
        ))
    }
}

/// Reads the evaluation and trace CSVs in `dir` and writes the value,
/// derivative, difference and loss SVGs next to them.
pub fn render_plots(dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let eval_path = dir.join(EVAL_FILE);
    let trace_path = dir.join(TRACE_FILE);
    require(&eval_path)?;
    require(&trace_path)?;
    let rows = Evaluation::read_csv(&eval_path)?;
    let trace = TrainingTrace::read_csv(&trace_path)?;

    let docs = [
        (VALUE_PLOT, render_svg(&[value_panel(cfg, &rows)])),
        (DERIVATIVE_PLOT, render_svg(&[derivative_panel(cfg, &rows)])),
        (
            DIFFERENCE_PLOT,
            render_svg(&difference_panels(cfg, &[(String::new(), &rows)])),
        ),
        (
            LOSS_PLOT,
            render_svg(&[loss_panel(&cfg.scales(), &[(String::new(), &trace)])]),
        ),
    ];
    let mut paths = Vec::with_capacity(docs.len());
    for (name, svg) in docs {
        let path = dir.join(name);
        write_atomic(&path, svg.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}
