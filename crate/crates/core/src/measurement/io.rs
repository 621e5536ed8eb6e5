//! On-disk formats for masked matrices.
//!
//! CSV: one file of plain values (NaN marks an unobserved entry) plus an
//! optional mask file of 0/1 flags. JSON: a single object
//! `{"values": [[...]], "mask": [[...]]}` with `null` for unobserved values.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{MaskedMatrix, MaskedRangeMatrix, PartialEdm};
use crate::error::{RblError, Result};

/// JSON document for masked matrices, partial EDMs and completion results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub values: Vec<Vec<Option<f64>>>,
    pub mask: Vec<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Size of the first (anchor) block of an EDM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

impl MatrixDoc {
    pub fn from_parts(values: &DMatrix<f64>, mask: &DMatrix<bool>) -> Self {
        let rows = values.nrows();
        Self {
            values: (0..rows)
                .map(|r| {
                    (0..values.ncols())
                        .map(|c| mask[(r, c)].then(|| values[(r, c)]))
                        .collect()
                })
                .collect(),
            mask: (0..rows)
                .map(|r| (0..values.ncols()).map(|c| mask[(r, c)]).collect())
                .collect(),
            dim: None,
            split: None,
            noise_sigma: None,
            iterations: None,
            converged: None,
        }
    }

    /// Values (NaN where unobserved) and mask. A `null` value is unobserved
    /// regardless of its mask flag.
    pub fn to_parts(&self) -> Result<(DMatrix<f64>, DMatrix<bool>)> {
        let rows = self.values.len();
        let cols = self.values.first().map_or(0, Vec::len);
        if self.mask.len() != rows
            || self.values.iter().any(|r| r.len() != cols)
            || self.mask.iter().any(|r| r.len() != cols)
        {
            return Err(RblError::invalid("values and mask must be equal-size rectangles"));
        }
        let values = DMatrix::from_fn(rows, cols, |r, c| self.values[r][c].unwrap_or(f64::NAN));
        let mask = DMatrix::from_fn(rows, cols, |r, c| self.mask[r][c] && self.values[r][c].is_some());
        Ok((values, mask))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RblError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| RblError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("matrix doc serializes");
        std::fs::write(path, text).map_err(|e| RblError::io(path, e))
    }
}

impl MaskedMatrix {
    pub fn to_doc(&self) -> MatrixDoc {
        MatrixDoc::from_parts(self.values_with_nan(), self.mask())
    }

    pub fn from_doc(doc: &MatrixDoc) -> Result<Self> {
        let (v, m) = doc.to_parts()?;
        Self::new(v, m)
    }
}

impl MaskedRangeMatrix {
    pub fn to_doc(&self) -> MatrixDoc {
        let mut doc = self.as_masked().to_doc();
        doc.noise_sigma = Some(self.noise_sigma());
        doc
    }

    pub fn from_doc(doc: &MatrixDoc) -> Result<Self> {
        Self::from_masked(MaskedMatrix::from_doc(doc)?, doc.noise_sigma.unwrap_or(0.0))
    }

    pub fn write_csv(&self, values_path: &Path, mask_path: &Path) -> Result<()> {
        write_matrix_csv(values_path, self.values_with_nan())?;
        write_matrix_csv(mask_path, &self.mask().map(|m| if m { 1.0 } else { 0.0 }))
    }

    pub fn read_csv(values_path: &Path, mask_path: Option<&Path>) -> Result<Self> {
        let (v, m) = read_masked_csv(values_path, mask_path)?;
        Self::new(v, m, 0.0)
    }
}

impl PartialEdm {
    /// JSON with plain (not squared) distances.
    pub fn to_doc(&self) -> MatrixDoc {
        let mut doc = MatrixDoc::from_parts(&self.distances_with_nan(), self.mask());
        doc.dim = Some(self.dim());
        doc.split = Some(self.split());
        doc
    }

    /// `dim` falls back to the document's own field when `None`.
    pub fn from_doc(doc: &MatrixDoc, dim: Option<usize>) -> Result<Self> {
        let (v, m) = doc.to_parts()?;
        let dim = dim
            .or(doc.dim)
            .ok_or_else(|| RblError::invalid("EDM dimension not given"))?;
        Self::from_plain(&v, &m, dim, doc.split.unwrap_or(0))
    }

    /// Build from plain distances.
    pub fn from_plain(
        distances: &DMatrix<f64>,
        mask: &DMatrix<bool>,
        dim: usize,
        split: usize,
    ) -> Result<Self> {
        if distances.iter().zip(mask.iter()).any(|(&d, &m)| m && d < 0.0) {
            return Err(RblError::invalid("distances must be non-negative"));
        }
        Self::new(distances.map(|d| d * d), mask.clone(), dim, split)
    }

    pub fn write_csv(&self, values_path: &Path, mask_path: &Path) -> Result<()> {
        write_matrix_csv(values_path, &self.distances_with_nan())?;
        write_matrix_csv(mask_path, &self.mask().map(|m| if m { 1.0 } else { 0.0 }))
    }

    pub fn read_csv(values_path: &Path, mask_path: Option<&Path>, dim: usize, split: usize) -> Result<Self> {
        let (v, m) = read_masked_csv(values_path, mask_path)?;
        Self::from_plain(&v, &m, dim, split)
    }
}

fn csv_err(path: &Path, source: csv::Error) -> RblError {
    RblError::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// Headerless numeric CSV; NaN is written as `NaN`.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format_value(m[(r, c)])).collect();
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| RblError::io(path, e))
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        // shortest representation that round-trips
        format!("{v:?}")
    }
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    RblError::invalid(format!(
                        "{}: line {}: `{s}` is not a number",
                        path.display(),
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(RblError::invalid(format!("{}: ragged rows", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn read_masked_csv(values_path: &Path, mask_path: Option<&Path>) -> Result<(DMatrix<f64>, DMatrix<bool>)> {
    let values = read_matrix_csv(values_path)?;
    let mask = match mask_path {
        Some(p) => {
            let raw = read_matrix_csv(p)?;
            if raw.shape() != values.shape() {
                return Err(RblError::invalid("mask CSV shape differs from values CSV"));
            }
            raw.zip_map(&values, |m, v| m != 0.0 && !v.is_nan())
        }
        None => values.map(|v| !v.is_nan()),
    };
    Ok((values, mask))
}
