use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use asymnet::data::{read_dataset_csv, write_dataset_csv};
use asymnet::experiment::plot::{DERIVATIVE_PLOT, DIFFERENCE_PLOT, LOSS_PLOT, VALUE_PLOT};
use asymnet::experiment::run::{EVAL_FILE, MODEL_FILE, TRACE_FILE};
use asymnet::experiment::sweep::{plan, COMPARISON_FILE};
use asymnet::experiment::{
    evaluate_model, execute, generate_data, read_summary, run, sweep, ExperimentConfig, ExperimentKind, SweepAxis,
};
use asymnet::io::load_model;
use asymnet::training::{grid_metrics, loss_components, Evaluation};
use asymnet::{Execution, LossKind, Treatment};

fn small(kind: ExperimentKind, t: Treatment, loss: LossKind, dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind, t, loss);
    c.n_samples = Some(2000);
    c.train.epochs = 30;
    c.grid.points = 401;
    c.output_dir = dir.to_path_buf();
    c
}

fn without_wall_time(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("wall_seconds");
    // artifact paths differ between the two output directories
    obj.remove("artifacts");
    obj.get_mut("config")
        .unwrap()
        .as_object_mut()
        .unwrap()
        .remove("output_dir");
    v
}

#[test]
fn run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(ExperimentKind::Synthetic, Treatment::Fixed, LossKind::Dml, tmp.path());
    let out = run(&cfg).unwrap();
    for f in [MODEL_FILE, TRACE_FILE, EVAL_FILE, "summary.json", "config.toml"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    let svgs: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert_eq!(svgs.len(), 4);
    for p in [VALUE_PLOT, DERIVATIVE_PLOT, DIFFERENCE_PLOT, LOSS_PLOT] {
        assert!(tmp.path().join(p).is_file(), "{p}");
    }
    let trace = fs::read_to_string(tmp.path().join(TRACE_FILE)).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "epoch,vml_loss,dml_loss,seconds");
    assert_eq!(trace.lines().count(), 1 + 31);
    let eval = fs::read_to_string(tmp.path().join(EVAL_FILE)).unwrap();
    assert_eq!(
        eval.lines().next().unwrap(),
        "x,pred_value,pred_dvalue,true_value,true_dvalue,diff_value,diff_dvalue"
    );
    assert_eq!(read_summary(tmp.path()).unwrap(), out.summary);
    let echoed = ExperimentConfig::load(&tmp.path().join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let mut cfg = small(ExperimentKind::BsRegression, Treatment::Trainable, LossKind::Dml, dir);
        cfg.train.execution = Execution::Sequential;
        cfg.train.batch_size = Some(256);
        run(&cfg).unwrap();
    }
    for f in [
        MODEL_FILE,
        TRACE_FILE,
        EVAL_FILE,
        VALUE_PLOT,
        DIFFERENCE_PLOT,
        LOSS_PLOT,
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(without_wall_time(a.path()), without_wall_time(b.path()));
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, exec) in [(a.path(), Execution::Sequential), (b.path(), Execution::Parallel)] {
        let mut cfg = small(ExperimentKind::BsFunction, Treatment::Fixed, LossKind::Vml, dir);
        cfg.train.execution = exec;
        cfg.write_plots = false;
        run(&cfg).unwrap();
    }
    for f in [MODEL_FILE, TRACE_FILE, EVAL_FILE] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

// Every number in the summary must follow from the saved model and data.
#[test]
fn summary_is_recomputable_from_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(
        ExperimentKind::BsFunction,
        Treatment::Trainable,
        LossKind::Dml,
        tmp.path(),
    );
    run(&cfg).unwrap();
    let summary = read_summary(tmp.path()).unwrap();
    let model = load_model(&tmp.path().join(MODEL_FILE)).unwrap();
    let eval = evaluate_model(&summary.config, &model).unwrap();
    assert_eq!(eval.metrics, summary.metrics);
    let rows = Evaluation::read_csv(&tmp.path().join(EVAL_FILE)).unwrap();
    assert_eq!(rows, eval.rows);
    assert_eq!(grid_metrics(&rows, Some(summary.config.levels())), summary.metrics);

    let data = generate_data(&summary.config).unwrap();
    let (vml, deriv) = loss_components(&model, &data, Execution::Sequential).unwrap();
    assert_eq!(vml, summary.final_vml_loss);
    assert_eq!(
        Some(vml + summary.config.train.lambda * deriv.unwrap()),
        summary.final_dml_loss
    );
    assert_eq!(model.asymptotics().copied(), summary.final_asymptotics);
}

#[test]
fn dataset_file_replaces_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(
        ExperimentKind::Synthetic,
        Treatment::Fixed,
        LossKind::Vml,
        &tmp.path().join("a"),
    );
    let data = generate_data(&cfg).unwrap();
    let path = tmp.path().join("data.csv");
    write_dataset_csv(&path, &data).unwrap();
    assert_eq!(read_dataset_csv(&path).unwrap(), data);

    let generated = execute(&cfg).unwrap();
    let mut from_file = cfg.clone();
    from_file.dataset = Some(path);
    let loaded = execute(&from_file).unwrap();
    assert_eq!(generated.model, loaded.model);
    assert_eq!(generated.trace, loaded.trace);
}

#[test]
fn difference_plots_share_axes_across_treatments() {
    let tmp = tempfile::tempdir().unwrap();
    let frame = |t: Treatment| -> Vec<String> {
        let dir = tmp.path().join(t.name());
        run(&small(ExperimentKind::Synthetic, t, LossKind::Vml, &dir)).unwrap();
        fs::read_to_string(dir.join(DIFFERENCE_PLOT))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("<path"))
            .map(String::from)
            .collect()
    };
    let fixed = frame(Treatment::Fixed);
    let none = frame(Treatment::None);
    assert!(fixed.len() > 10);
    assert_eq!(fixed, none);
}

#[test]
fn fixed_bs_function_is_exact_outside_window() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentKind::BsFunction, Treatment::Fixed, LossKind::Dml, tmp.path());
    cfg.write_plots = false;
    let out = execute(&cfg).unwrap();
    let m = out.summary.metrics;
    let upper = m.upper.unwrap().max_abs_value;
    let interior = m.interior.unwrap().max_abs_value;
    assert!(
        upper <= interior || upper.max(interior) <= 1e-3,
        "upper {upper}, interior {interior}"
    );
    // predictions outside the window are exactly the fitted lines
    let fit = out.summary.fitted_asymptotics.unwrap();
    for r in out.evaluation.rows.iter().filter(|r| r.x <= 7.0 || r.x >= 13.0) {
        assert_eq!(r.pred_value, fit.eval(r.x));
    }
}

#[test]
fn treatment_sweep_has_six_rows_per_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let mut base = small(ExperimentKind::Synthetic, Treatment::Fixed, LossKind::Vml, tmp.path());
    base.n_samples = Some(500);
    base.train.epochs = 5;
    let outcome = sweep(&base, &SweepAxis::TreatmentGrid).unwrap();
    assert!(outcome.is_complete());
    assert_eq!(outcome.summaries.len(), 6);
    let mut per_metric: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &outcome.comparison {
        *per_metric.entry(r.metric.as_str()).or_default() += 1;
    }
    assert!(per_metric.values().all(|&n| n == 6), "{per_metric:?}");
    let csv = fs::read_to_string(tmp.path().join(COMPARISON_FILE)).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "experiment,treatment,loss_kind,n_samples,seed,metric,value"
    );
    assert_eq!(csv.lines().count(), 1 + outcome.comparison.len());
    let seeds: Vec<u64> = outcome.summaries.iter().map(|s| s.seed).collect();
    assert_eq!(
        seeds,
        plan(&base, &SweepAxis::TreatmentGrid)
            .unwrap()
            .iter()
            .map(|c| c.config.seed)
            .collect::<Vec<_>>()
    );
}

#[test]
fn sweep_records_failures_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let mut base = small(
        ExperimentKind::BsRegression,
        Treatment::Fixed,
        LossKind::Vml,
        tmp.path(),
    );
    base.train.epochs = 3;
    base.write_plots = false;
    // one path cannot be normalized
    let outcome = sweep(&base, &SweepAxis::SampleSizes(vec![1, 400])).unwrap();
    assert_eq!(outcome.summaries.len(), 1);
    assert_eq!(outcome.failures.len(), 1);
    assert_eq!(outcome.failures[0].index, 0);
    assert!(!outcome.failures[0].numerical);
    assert!(sweep(&base, &SweepAxis::SampleSizes(vec![])).is_err());
}

#[test]
fn errors_name_their_phase() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentKind::Synthetic, Treatment::Fixed, LossKind::Vml, tmp.path());
    cfg.ll = Some(-12.0);
    let err = execute(&cfg).unwrap_err().to_string();
    assert!(err.starts_with("fit phase"), "{err}");

    cfg.ll = None;
    cfg.train.learning_rate = 1e300;
    cfg.train.epochs = 3;
    let err = execute(&cfg).unwrap_err();
    assert!(err.is_numerical());
    assert!(err.to_string().starts_with("train phase"), "{err}");
}
