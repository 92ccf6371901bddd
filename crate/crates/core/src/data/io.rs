use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::dataset::{Dataset, Normalization, Scaler};
use crate::error::{Error, Result};

/// Reads a headed CSV file and selects input and target columns by name.
///
/// With `normalize` each selected column is min-max scaled to `[0, 1]` and
/// its scaler stored; otherwise values must already lie in `[0, 1]`.
pub fn load_csv(path: &Path, inputs: &[&str], targets: &[&str], normalize: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, inputs, targets, normalize, &path.display().to_string())
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(
    reader: R,
    inputs: &[&str],
    targets: &[&str],
    normalize: bool,
    provenance: &str,
) -> Result<Dataset> {
    let names: Vec<&str> = inputs.iter().chain(targets).copied().collect();
    let raw = read_columns(reader, &names)?;
    let x = raw.columns(0, inputs.len()).into_owned();
    let y = raw.columns(inputs.len(), targets.len()).into_owned();
    let scalers = |m: &DMatrix<f64>, names: &[&str]| -> Result<Vec<Scaler>> {
        names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                if normalize {
                    Scaler::fit(name, m.column(c).iter().copied())
                } else {
                    Ok(Scaler::IDENTITY)
                }
            })
            .collect()
    };
    let norm = Normalization {
        input_columns: inputs.iter().map(|s| s.to_string()).collect(),
        target_columns: targets.iter().map(|s| s.to_string()).collect(),
        inputs: scalers(&x, inputs)?,
        targets: scalers(&y, targets)?,
    };
    let (x, y) = (norm.normalize_inputs(&x), norm.normalize_targets(&y));
    Dataset::new(x, y, norm, provenance)
}

/// Raw values of the named columns of a headed CSV file, one matrix
/// column per name in the given order.
pub fn load_columns(path: &Path, names: &[&str]) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_columns(file, names)
}

/// [`load_columns`] over any reader.
pub fn read_columns<R: Read>(reader: R, names: &[&str]) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 0, column: String::new(), message: e.to_string() })?
        .clone();
    if header.is_empty() {
        return Err(Error::Parse { row: 0, column: String::new(), message: "empty file".into() });
    }
    let positions: Vec<usize> = names
        .iter()
        .map(|name| {
            header.iter().position(|h| h == *name).ok_or_else(|| Error::Parse {
                row: 0,
                column: name.to_string(),
                message: format!("missing column (header has {:?})", header.iter().collect::<Vec<_>>()),
            })
        })
        .collect::<Result<_>>()?;

    let mut values: Vec<f64> = Vec::new();
    let mut k = 0;
    for (r, record) in rdr.records().enumerate() {
        // header is row 1 of the file
        let row = r + 2;
        let record = record.map_err(|e| Error::Parse { row, column: String::new(), message: e.to_string() })?;
        for (&pos, name) in positions.iter().zip(names) {
            let raw = record.get(pos).ok_or_else(|| Error::Parse {
                row,
                column: name.to_string(),
                message: "missing cell".into(),
            })?;
            let x = raw.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("non-numeric value `{raw}`"),
            })?;
            values.push(x);
        }
        k += 1;
    }
    if k == 0 {
        return Err(Error::Parse { row: 1, column: String::new(), message: "no data rows".into() });
    }
    Ok(DMatrix::from_row_slice(k, names.len(), &values))
}

/// Writes the dataset in raw units (scalers inverted) with its column
/// names as header.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let norm = dataset.normalization();
    let x = norm.denormalize_inputs(dataset.inputs());
    let y = norm.denormalize_targets(dataset.targets());
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(norm.input_columns.iter().chain(&norm.target_columns)).map_err(io)?;
    for k in 0..dataset.len() {
        let row: Vec<String> =
            x.row(k).iter().chain(y.row(k).iter()).map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
