//! Sample matrices and their normalization.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a [`DataMatrix`] has been rescaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Every column has Euclidean norm `sqrt(n)`.
    ColumnsSqrtN,
    /// Every row has Euclidean norm `sqrt(n)`.
    RowsSqrtN,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::ColumnsSqrtN => "columns_sqrt_n",
            Normalization::RowsSqrtN => "rows_sqrt_n",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "columns_sqrt_n" | "columns" => Ok(Normalization::ColumnsSqrtN),
            "rows_sqrt_n" | "rows" => Ok(Normalization::RowsSqrtN),
            other => Err(Error::parameter(format!("unknown normalization {other:?}"))),
        }
    }
}

/// An `n x p` sample matrix; rows are observations, columns are variables.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    x: DMatrix<f64>,
    normalization: Normalization,
}

impl DataMatrix {
    /// Wraps raw samples. Fails on empty or non-finite input.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::data("data matrix must be non-empty"));
        }
        if let Some(idx) = x.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % x.nrows(), idx / x.nrows());
            return Err(Error::data(format!(
                "non-finite entry at row {}, column {}",
                row + 1,
                col + 1
            )));
        }
        Ok(Self {
            x,
            normalization: Normalization::None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::data("ragged rows"));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Rescales columns or rows to Euclidean norm `sqrt(n)`.
    ///
    /// `Normalization::None` returns the raw data unchanged apart from the tag.
    pub fn normalize(&self, mode: Normalization) -> Result<DataMatrix> {
        let target = (self.n() as f64).sqrt();
        let mut x = self.x.clone();
        match mode {
            Normalization::None => {}
            Normalization::ColumnsSqrtN => {
                for (j, mut col) in x.column_iter_mut().enumerate() {
                    let norm = col.norm();
                    if norm == 0.0 {
                        return Err(Error::data(format!("column {} is identically zero", j + 1)));
                    }
                    col *= target / norm;
                }
            }
            Normalization::RowsSqrtN => {
                for (i, mut row) in x.row_iter_mut().enumerate() {
                    let norm = row.norm();
                    if norm == 0.0 {
                        return Err(Error::data(format!("row {} is identically zero", i + 1)));
                    }
                    row *= target / norm;
                }
            }
        }
        Ok(DataMatrix {
            x,
            normalization: mode,
        })
    }

    /// Sub-matrix of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix {
            x: self.x.select_rows(rows),
            normalization: self.normalization,
        }
    }

    /// `X^T X / n`.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let mut s = self.x.tr_mul(&self.x);
        s /= self.n() as f64;
        s
    }

    /// Writes rows as comma-separated values with round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n() * self.p() * 20);
        for row in self.x.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a headerless CSV of floats, one observation per line.
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(lineno, line)| {
                line.split(',')
                    .map(|field| {
                        field.trim().parse::<f64>().map_err(|_| {
                            Error::Parse(format!("line {}: bad number {field:?}", lineno + 1))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn columns_scaled_to_sqrt_n() {
        let d = DataMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let z = d.normalize(Normalization::ColumnsSqrtN).unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(z.x()[(0, 0)], r2, epsilon = 1e-15);
        assert_abs_diff_eq!(z.x()[(1, 1)], r2, epsilon = 1e-15);
        assert_eq!(z.x()[(0, 1)], 0.0);
        assert_eq!(z.normalization(), Normalization::ColumnsSqrtN);
    }

    #[test]
    fn already_normalized_is_unchanged() {
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, -1.0], vec![1.0, 0.5]]).unwrap();
        let once = d.normalize(Normalization::ColumnsSqrtN).unwrap();
        let twice = once.normalize(Normalization::ColumnsSqrtN).unwrap();
        for (a, b) in once.x().iter().zip(twice.x().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rows_single_sample() {
        let d = DataMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let z = d.normalize(Normalization::RowsSqrtN).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(z.x()[(0, 0)], h, epsilon = 1e-15);
        assert_abs_diff_eq!(z.x()[(0, 1)], h, epsilon = 1e-15);
    }

    #[test]
    fn zero_column_and_row_are_named() {
        let d = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let err = d.normalize(Normalization::ColumnsSqrtN).unwrap_err().to_string();
        assert!(err.contains("column 2"), "{err}");
        let err = d.normalize(Normalization::RowsSqrtN).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DataMatrix::from_rows(&[vec![1.0, f64::NAN]]).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = DataMatrix::from_rows(&[vec![0.1, -1.0 / 3.0], vec![1e-300, 2.5e10]]).unwrap();
        let back = DataMatrix::from_csv(&d.to_csv()).unwrap();
        assert_eq!(back, d);
    }
}
