use std::path::Path;

use gnet_core::data::{load_columns, metrics, Dataset, Metrics, Normalization};
use gnet_core::model::ModelFile;
use gnet_core::network::NetworkSpec;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::model::{load_model, EsqnFile, LoadedModel};
use crate::output::{check_not_input, emit};
use crate::train::predict_outputs;

#[derive(Serialize)]
struct EvalOutput<'a> {
    model: &'a str,
    data: &'a str,
    rows: usize,
    metrics: Metrics,
}

fn read(path: &Path, names: &[String]) -> CliResult<DMatrix<f64>> {
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    load_columns(path, &names).map_err(|e| CliError::usage(format!("data {}: {e}", path.display())))
}

/// Column names from the flags, else those stored with the model.
fn pick(flag: &[String], stored: &[String]) -> Vec<String> {
    if flag.is_empty() {
        stored.to_vec()
    } else {
        flag.to_vec()
    }
}

fn normalization(file: &ModelFile, spec: &NetworkSpec) -> Normalization {
    file.normalization
        .clone()
        .unwrap_or_else(|| Normalization::identity(spec.inputs().len(), spec.outputs().len()))
}

fn check_width(what: &str, model: usize, selected: usize) -> CliResult<()> {
    if model != selected {
        return Err(CliError::runtime(format!(
            "dimension mismatch: the model has {model} {what} but {selected} data columns were selected for them"
        )));
    }
    Ok(())
}

/// Scaled `K × I` inputs of an RNN model.
fn rnn_inputs(file: &ModelFile, spec: &NetworkSpec, data: &Path, names: &[String]) -> CliResult<(DMatrix<f64>, Normalization)> {
    let mut norm = normalization(file, spec);
    norm.input_columns = pick(names, &norm.input_columns);
    check_width("inputs", spec.inputs().len(), norm.input_columns.len())?;
    let x = norm.normalize_inputs(&read(data, &norm.input_columns)?);
    if let Some(v) = x.iter().find(|v| !(-1e-12..=1.0 + 1e-12).contains(*v)) {
        return Err(CliError::runtime(format!(
            "input value maps to {v} under the model's scaling, outside [0, 1]"
        )));
    }
    Ok((x.map(|v| v.clamp(0.0, 1.0)), norm))
}

/// Scaled windows of an ESQN series; with `targets`, only rows whose
/// target lies inside the series.
fn esqn_windows(file: &EsqnFile, data: &Path, names: &[String], targets: bool) -> CliResult<(DMatrix<f64>, Vec<f64>)> {
    let column = pick(names, std::slice::from_ref(&file.column));
    check_width("series", 1, column.len())?;
    let series: Vec<f64> = read(data, &column)?.iter().map(|&x| file.scaler.normalize(x)).collect();
    let (p, h) = (file.lag, file.horizon);
    let tail = if targets { h } else { 0 };
    if series.len() < p + tail {
        return Err(CliError::runtime(format!(
            "series of length {} is too short for lag {p} and horizon {h}",
            series.len()
        )));
    }
    let rows = series.len() + 1 - p - tail;
    let x = DMatrix::from_fn(rows, p, |r, c| series[r + c]);
    let y = if targets { (0..rows).map(|r| series[r + p - 1 + h]).collect() } else { Vec::new() };
    Ok((x, y))
}

pub fn cmd_eval(model: &Path, data: &Path, inputs: &[String], targets: &[String], out: Option<&Path>) -> CliResult<()> {
    if let Some(o) = out {
        check_not_input(&[o], &[model, data])?;
    }
    let (rows, m) = match load_model(model)? {
        LoadedModel::Rnn(file, spec) => {
            let (x, norm) = rnn_inputs(&file, &spec, data, inputs)?;
            let names = pick(targets, &norm.target_columns);
            check_width("outputs", spec.outputs().len(), names.len())?;
            let y = norm.normalize_targets(&read(data, &names)?);
            let set = Dataset::new(x, y, norm, data.display().to_string())?;
            let pred = predict_outputs(&spec, set.inputs())?;
            (set.len(), metrics(&pred, set.targets())?)
        }
        LoadedModel::Esqn(mut file) => {
            let (x, y) = esqn_windows(&file, data, inputs, true)?;
            let pred = file.model.predict(&x)?;
            // the first washout predictions come from a cold reservoir
            let skip = file.model.washout;
            if x.nrows() <= skip + 1 {
                return Err(CliError::runtime(format!(
                    "{} windows leave nothing after a washout of {skip}",
                    x.nrows()
                )));
            }
            let kept = x.nrows() - skip;
            let p = pred.rows(skip, kept).into_owned();
            let t = DMatrix::from_column_slice(kept, 1, &y[skip..]);
            (kept, metrics(&p, &t)?)
        }
    };
    let mut text = serde_json::to_string_pretty(&EvalOutput {
        model: &model.display().to_string(),
        data: &data.display().to_string(),
        rows,
        metrics: m,
    })
    .expect("metrics serialize");
    text.push('\n');
    emit(out, &text)
}

pub fn cmd_predict(model: &Path, data: &Path, inputs: &[String], out: Option<&Path>) -> CliResult<()> {
    if let Some(o) = out {
        check_not_input(&[o], &[model, data])?;
    }
    let mut csv = String::new();
    match load_model(model)? {
        LoadedModel::Rnn(file, spec) => {
            let (x, norm) = rnn_inputs(&file, &spec, data, inputs)?;
            let pred = norm.denormalize_targets(&predict_outputs(&spec, &x)?);
            csv.push_str(&norm.target_columns.join(","));
            csv.push('\n');
            for row in pred.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                csv.push_str(&cells.join(","));
                csv.push('\n');
            }
        }
        LoadedModel::Esqn(mut file) => {
            let (x, _) = esqn_windows(&file, data, inputs, false)?;
            let pred = file.model.predict(&x)?;
            // index of the predicted value in the input series
            csv.push_str("index,prediction\n");
            for r in 0..pred.nrows() {
                let v = file.scaler.denormalize(pred[(r, 0)]);
                csv.push_str(&format!("{},{v}\n", r + file.lag - 1 + file.horizon));
            }
        }
    }
    emit(out, &csv)
}
