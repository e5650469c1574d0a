//! Sample matrices and their CSV encoding.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Result, WicaError};
use crate::stats;

/// An N×d matrix of samples: rows are observations, columns components.
///
/// Always has at least one row and two columns, and only finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array2<f64>,
}

impl Dataset {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n < 1 {
            return Err(WicaError::InvalidData("dataset has no rows".into()));
        }
        if d < 2 {
            return Err(WicaError::InvalidData(format!(
                "dataset needs at least 2 columns, got {d}"
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(WicaError::InvalidData(format!(
                "non-finite entry {v} at row {i}, column {j}"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(WicaError::Dimension("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| WicaError::Dimension(e.to_string()))?;
        Self::new(values)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            values: self.values.select(Axis(0), rows),
        }
    }

    /// Componentwise normalization (zero mean, unit standard deviation).
    pub fn normalized(&self) -> Result<Dataset> {
        Ok(Dataset {
            values: stats::normalize_componentwise(self.view())?,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.ncols()).map(|j| format!("c{j}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.values.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                // `Display` for f64 prints the shortest string that round-trips.
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Dataset> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| WicaError::Parse("empty CSV input".into()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        for (j, name) in cols.iter().enumerate() {
            if name.trim() != format!("c{j}") {
                return Err(WicaError::Parse(format!(
                    "line 1: expected header field `c{j}`, found `{}`",
                    name.trim()
                )));
            }
        }
        let d = cols.len();
        let mut flat = Vec::new();
        let mut n = 0;
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d {
                return Err(WicaError::Parse(format!(
                    "line {}: expected {d} fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            for (j, f) in fields.iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| {
                    WicaError::Parse(format!(
                        "line {}, column c{j}: cannot parse `{}` as a number",
                        lineno + 1,
                        f.trim()
                    ))
                })?;
                flat.push(v);
            }
            n += 1;
        }
        let values = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| WicaError::Parse(e.to_string()))?;
        Dataset::new(values)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| WicaError::Io(format!("{}: {e}", path.display())))?;
        Dataset::from_csv_str(&text)
            .map_err(|e| WicaError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| WicaError::Io(format!("{}: {e}", path.display())))
    }
}

impl TryFrom<Array2<f64>> for Dataset {
    type Error = WicaError;

    fn try_from(values: Array2<f64>) -> Result<Self> {
        Dataset::new(values)
    }
}
