//! CSV ingestion and atomic file output.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use featorder_core::linalg::Matrix;
use featorder_core::{DataMatrix, Error as CoreError, Task};

use crate::error::{CliError, Result};

/// Integer labels with at most this many distinct values are read as classes.
pub const MAX_INFERRED_CLASSES: usize = 20;

const MISSING: [&str; 6] = ["", "NA", "N/A", "NaN", "nan", "?"];

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub label: Option<String>,
    /// Overrides the inferred task.
    pub task: Option<Task>,
    /// Drop rows holding a missing marker instead of failing.
    pub drop_missing: bool,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: DataMatrix,
    /// Original label values by class id, for classification tasks.
    pub classes: Option<Vec<String>>,
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell)
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed, comma-separated numeric table.
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<Loaded> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let format_err = |e: csv::Error| CliError::Format { path: path.to_path_buf(), message: e.to_string() };
    let header: Vec<String> = reader.headers().map_err(format_err)?.iter().map(str::to_string).collect();

    let label_idx = match &opts.label {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::UnknownLabelColumn { path: path.to_path_buf(), name: name.clone() }
        })?),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label_idx).collect();

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut rows = 0usize;
    let mut dropped = 0usize;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(format_err)?;
        let row = i as u64 + 1;
        let mut parsed = Vec::with_capacity(feature_cols.len());
        let mut missing = false;
        for &c in &feature_cols {
            let cell = rec.get(c).unwrap_or("");
            match parse_cell(cell) {
                Some(v) => parsed.push(v),
                None if is_missing(cell) && opts.drop_missing => missing = true,
                None => {
                    return Err(CliError::Parse {
                        path: path.to_path_buf(),
                        row,
                        col: c,
                        column: header[c].clone(),
                        message: format!("'{cell}' is not a finite number"),
                    })
                }
            }
        }
        if let Some(li) = label_idx {
            let cell = rec.get(li).unwrap_or("");
            if is_missing(cell) {
                if !opts.drop_missing {
                    return Err(CliError::Parse {
                        path: path.to_path_buf(),
                        row,
                        col: li,
                        column: header[li].clone(),
                        message: "missing label".into(),
                    });
                }
                missing = true;
            }
            if !missing {
                raw_labels.push(cell.to_string());
            }
        }
        if missing {
            dropped += 1;
            continue;
        }
        values.extend(parsed);
        rows += 1;
    }
    if rows == 0 {
        return Err(CoreError::EmptyDataset.into());
    }

    let names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();
    let matrix = Matrix::from_vec(rows, names.len(), values);
    let (labels, task, classes) = match label_idx {
        Some(_) => {
            let (l, t, c) = encode_labels(&raw_labels, opts.task)?;
            (Some(l), t, c)
        }
        None => (None, Task::None, None),
    };
    let data = DataMatrix::new(matrix, names, labels, task)?;
    Ok(Loaded { data, classes, dropped_rows: dropped })
}

fn class_task(count: usize) -> Task {
    if count <= 2 {
        Task::Binary
    } else {
        Task::Multiclass
    }
}

/// Maps raw label strings to numeric labels and a task.
pub fn encode_labels(raw: &[String], task: Option<Task>) -> Result<(Vec<f64>, Task, Option<Vec<String>>)> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| parse_cell(s)).collect();
    let integral = numeric.as_ref().is_some_and(|v| v.iter().all(|x| x.trunc() == *x));

    if task == Some(Task::Regression) || (task.is_none() && numeric.is_some() && !integral) {
        let v = numeric.ok_or_else(|| CoreError::InvalidLabels("regression labels must be numeric".into()))?;
        return Ok((v, Task::Regression, None));
    }
    if task == Some(Task::None) {
        return Ok((vec![0.0; raw.len()], Task::None, None));
    }

    let classes: Vec<String> = match &numeric {
        Some(v) if integral => {
            let distinct: BTreeSet<i64> = v.iter().map(|&x| x as i64).collect();
            if task.is_none() && distinct.len() > MAX_INFERRED_CLASSES {
                return Ok((v.clone(), Task::Regression, None));
            }
            distinct.into_iter().map(|x| x.to_string()).collect()
        }
        Some(_) => return Err(CoreError::InvalidLabels("class labels must be integers or names".into()).into()),
        None => raw.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let id = |s: &String| -> f64 {
        let key = match &numeric {
            Some(_) => (parse_cell(s).unwrap_or(0.0) as i64).to_string(),
            None => s.clone(),
        };
        classes.iter().position(|c| *c == key).unwrap_or(0) as f64
    };
    let labels = raw.iter().map(id).collect();
    let task = task.unwrap_or_else(|| class_task(classes.len()));
    Ok((labels, task, Some(classes)))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.flush().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
