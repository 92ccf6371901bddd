use std::path::{Path, PathBuf};

use gnet_core::data::{fm_sine_series, gen_task, load_columns, load_csv, metrics, window_series, Dataset, Metrics};
use gnet_core::esqn::{ar_baseline, esqn_trials, EsqnModel, TrialSummary};
use gnet_core::model::ModelFile;
use gnet_core::network::NetworkSpec;
use gnet_core::optim::{batch_forward, train_observed, weight_sampler, TrainReport};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{resolve, EsqnBlock, RunConfig, TaskSpec, Topology};
use crate::error::{CliError, CliResult};
use crate::model::{EsqnFile, ESQN_VERSION};
use crate::output::{check_not_input, read_json, write_atomic};

#[derive(Serialize)]
struct DataSummary<'a> {
    provenance: &'a str,
    rows: usize,
    inputs: usize,
    targets: usize,
}

#[derive(Serialize)]
struct RnnReport<'a> {
    kind: &'static str,
    config: &'a RunConfig,
    data: DataSummary<'a>,
    metrics: Metrics,
    train: &'a TrainReport,
}

#[derive(Serialize)]
struct EsqnReport<'a> {
    kind: &'static str,
    config: &'a RunConfig,
    train_rows: usize,
    test_rows: usize,
    baseline_nmse: f64,
    test_nmse: f64,
    beats_baseline: bool,
    input_clamps: usize,
    trials: Option<TrialSummary>,
    summary: Option<String>,
}

pub fn cmd_train(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>, verbose: bool) -> CliResult<()> {
    let mut cfg: RunConfig = read_json(config_path, "config")?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    cfg.apply_seed();
    cfg.validate()?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let base = config_path.parent();
    let mut sources = vec![config_path.to_path_buf()];
    if let Some(d) = &cfg.dataset {
        sources.push(resolve(base, &d.path));
    }
    let (model, report, trace) = (cfg.output.model_path(), cfg.output.report_path(), cfg.output.trace_path());
    check_not_input(
        &[&model, &report, &trace],
        &sources.iter().map(PathBuf::as_path).collect::<Vec<_>>(),
    )?;
    let files = match &cfg.esqn {
        Some(block) => train_esqn(&cfg, block, base)?,
        None => train_rnn(&cfg, base, verbose)?,
    };
    write_atomic(&model, files.model.as_bytes())?;
    write_atomic(&report, files.report.as_bytes())?;
    write_atomic(&trace, files.trace.as_bytes())?;
    println!("{}", files.summary);
    println!("wrote {}, {}, {}", model.display(), report.display(), trace.display());
    Ok(())
}

struct Artifacts {
    model: String,
    report: String,
    trace: String,
    summary: String,
}

fn load_patterns(cfg: &RunConfig, base: Option<&Path>) -> CliResult<Dataset> {
    match (&cfg.task, &cfg.dataset) {
        (Some(task), _) => {
            let task = task.pattern_task().expect("validated: pattern task");
            gen_task(task, cfg.task_seed()).map_err(|e| CliError::usage(format!("config: field `task`: {e}")))
        }
        (None, Some(d)) => {
            let path = resolve(base, &d.path);
            let inputs: Vec<&str> = d.inputs.iter().map(String::as_str).collect();
            let targets: Vec<&str> = d.targets.iter().map(String::as_str).collect();
            load_csv(&path, &inputs, &targets, d.normalize)
                .map_err(|e| CliError::usage(format!("dataset {}: {e}", path.display())))
        }
        (None, None) => unreachable!("validated: one data source"),
    }
}

fn build_network(cfg: &RunConfig, data: &Dataset) -> CliResult<NetworkSpec> {
    let t = &cfg.trainer;
    let init = weight_sampler(t.rng_seed, t.init_range);
    let bad = |e: gnet_core::Error| CliError::usage(format!("config: field `topology`: {e}"));
    let spec = match cfg.topology.as_ref().expect("validated: topology") {
        Topology::Layers(sizes) => NetworkSpec::layered(sizes, t.output_rate, init).map_err(bad)?,
        Topology::Edges(e) => NetworkSpec::with_edges(e.roles.clone(), e.edges.clone(), t.output_rate, init).map_err(bad)?,
    };
    let (i, o) = (spec.inputs().len(), spec.outputs().len());
    if i != data.n_inputs() || o != data.n_targets() {
        return Err(CliError::usage(format!(
            "config: topology has {i} inputs and {o} outputs but the data has {} inputs and {} targets",
            data.n_inputs(),
            data.n_targets()
        )));
    }
    Ok(spec)
}

/// Output activities, one column per output neuron.
pub fn predict_outputs(spec: &NetworkSpec, inputs: &DMatrix<f64>) -> gnet_core::Result<DMatrix<f64>> {
    let all = batch_forward(spec, inputs)?;
    let outputs = spec.outputs();
    Ok(DMatrix::from_fn(all.nrows(), outputs.len(), |r, c| all[(r, outputs[c])]))
}

fn train_rnn(cfg: &RunConfig, base: Option<&Path>, verbose: bool) -> CliResult<Artifacts> {
    let data = load_patterns(cfg, base)?;
    let mut spec = build_network(cfg, &data)?;
    let every = (cfg.trainer.max_iters / 20).max(1);
    let report = train_observed(&mut spec, &data, &cfg.trainer, &mut |info| {
        if verbose && (info.epoch + 1) % every == 0 {
            eprintln!("epoch {:>6}  mse {:.6e}", info.epoch + 1, info.mse);
        }
    })
    .map_err(|e| CliError::runtime(format!("training failed: {e}")))?;
    let pred = predict_outputs(&spec, data.inputs()).map_err(|e| CliError::runtime(format!("evaluation failed: {e}")))?;
    let m = metrics(&pred, data.targets())?;
    let model = ModelFile::from_spec(&spec, Some(data.normalization().clone())).to_json();
    let full = RnnReport {
        kind: "rnn",
        config: cfg,
        data: DataSummary {
            provenance: data.provenance(),
            rows: data.len(),
            inputs: data.n_inputs(),
            targets: data.n_targets(),
        },
        metrics: m,
        train: &report,
    };
    let summary = format!(
        "{:?}: stopped ({}) after {} epochs, mse {:.6e}",
        cfg.trainer.algorithm,
        serde_json::to_value(report.stop_reason).expect("stop reason serializes").as_str().unwrap_or("?"),
        report.iterations,
        report.final_loss()
    );
    Ok(Artifacts { model, report: to_json(&full), trace: report.trace_csv(), summary })
}

fn load_series(cfg: &RunConfig, base: Option<&Path>) -> CliResult<(Vec<f64>, String)> {
    match (&cfg.task, &cfg.dataset) {
        (Some(TaskSpec::FmSine { length, noise }), _) => {
            Ok((fm_sine_series(*length, *noise, cfg.task_seed()), "x".to_string()))
        }
        (None, Some(d)) => {
            let path = resolve(base, &d.path);
            let raw = load_columns(&path, &[d.inputs[0].as_str()])
                .map_err(|e| CliError::usage(format!("dataset {}: {e}", path.display())))?;
            Ok((raw.iter().copied().collect(), d.inputs[0].clone()))
        }
        _ => unreachable!("validated: esqn series"),
    }
}

fn train_esqn(cfg: &RunConfig, block: &EsqnBlock, base: Option<&Path>) -> CliResult<Artifacts> {
    let (series, column) = load_series(cfg, base)?;
    let data = window_series(&series, block.lag, block.horizon).map_err(|e| CliError::usage(format!("series: {e}")))?;
    let train_len = block.train_len.unwrap_or(data.len() * 7 / 10);
    if train_len == 0 || train_len >= data.len() {
        return Err(CliError::usage(format!(
            "config: field `esqn.train_len` must lie in 1..{}, got {train_len}",
            data.len()
        )));
    }
    let (train, test) = data.split(train_len)?;
    let baseline = ar_baseline(&train, &test, block.reservoir.ridge_lambda)?;
    let mut model = EsqnModel::random(block.lag, &block.reservoir)?;
    model.fit(&train)?;
    let (pred, test_nmse) = model.evaluate(&test)?;
    let trials = if block.trials >= 2 { Some(esqn_trials(&train, &test, &block.reservoir, block.trials)?) } else { None };
    let scaler = data.normalization().targets[0];
    let mut trace = String::from("k,target,prediction\n");
    for k in 0..test.len() {
        let t = scaler.denormalize(test.targets()[(k, 0)]);
        let p = scaler.denormalize(pred[(k, 0)]);
        trace.push_str(&format!("{},{t},{p}\n", train_len + k));
    }
    let report = EsqnReport {
        kind: "esqn",
        config: cfg,
        train_rows: train.len(),
        test_rows: test.len(),
        baseline_nmse: baseline,
        test_nmse,
        beats_baseline: test_nmse < baseline,
        input_clamps: model.input_clamps(),
        summary: trials.as_ref().map(|t| t.to_string()),
        trials,
    };
    let mut summary = format!("esqn: held-out NMSE {test_nmse:.4} (linear AR baseline {baseline:.4})");
    if let Some(s) = &report.summary {
        summary.push('\n');
        summary.push_str(s);
    }
    let file = EsqnFile {
        version: ESQN_VERSION,
        kind: "esqn".into(),
        lag: block.lag,
        horizon: block.horizon,
        column,
        scaler,
        model,
    };
    Ok(Artifacts { model: file.to_json(), report: to_json(&report), trace, summary })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
