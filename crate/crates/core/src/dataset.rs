//! Numeric tabular data: named real-valued columns, one row per unit.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::math;
use crate::text::normalize_label;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset has no columns")]
    NoColumns,
    #[error("{names} names for {columns} columns")]
    ColumnCountMismatch { names: usize, columns: usize },
    #[error("column {column:?} has {len} values, expected {expected}")]
    RaggedColumn { column: String, len: usize, expected: usize },
    #[error("non-finite value at row {row}, column {column:?}")]
    NonFinite { row: usize, column: String },
    #[error("duplicate column name {0:?}")]
    DuplicateName(String),
    #[error("empty column name at position {0}")]
    EmptyName(usize),
}

/// Column-major numeric dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, DatasetError> {
        if names.len() != columns.len() {
            return Err(DatasetError::ColumnCountMismatch { names: names.len(), columns: columns.len() });
        }
        if names.is_empty() {
            return Err(DatasetError::NoColumns);
        }
        let n = columns[0].len();
        for (i, (name, col)) in names.iter().zip(&columns).enumerate() {
            if name.trim().is_empty() {
                return Err(DatasetError::EmptyName(i));
            }
            if names[..i].iter().any(|m| normalize_label(m) == normalize_label(name)) {
                return Err(DatasetError::DuplicateName(name.clone()));
            }
            if col.len() != n {
                return Err(DatasetError::RaggedColumn { column: name.clone(), len: col.len(), expected: n });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { row, column: name.clone() });
            }
        }
        Ok(Dataset { names, columns, n })
    }

    /// Builds from row-major values.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, DatasetError> {
        let p = names.len();
        let mut columns: Vec<Vec<f64>> = (0..p).map(|_| Vec::with_capacity(rows.len())).collect();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(DatasetError::RaggedColumn {
                    column: alloc::format!("row {r}"),
                    len: row.len(),
                    expected: p,
                });
            }
            for (c, v) in row.iter().enumerate() {
                columns[c].push(*v);
            }
        }
        Self::new(names, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, column: usize) -> &str {
        &self.names[column]
    }

    pub fn column(&self, column: usize) -> &[f64] {
        &self.columns[column]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        let key = normalize_label(name);
        self.names.iter().position(|n| normalize_label(n) == key)
    }

    /// Z-scored copy (sample standard deviation). Constant columns become zeros.
    pub fn standardized(&self) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|col| {
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
                let sd = math::sqrt(var);
                if sd > 0.0 {
                    col.iter().map(|v| (v - mean) / sd).collect()
                } else {
                    alloc::vec![0.0; col.len()]
                }
            })
            .collect();
        Dataset { names: self.names.clone(), columns, n: self.n }
    }

    /// Copy restricted to the given columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Dataset {
        Dataset {
            names: columns.iter().map(|&c| self.names[c].to_string()).collect(),
            columns: columns.iter().map(|&c| self.columns[c].clone()).collect(),
            n: self.n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Dataset::new(vec!["a".into()], vec![]),
            Err(DatasetError::ColumnCountMismatch { .. })
        ));
        assert!(matches!(
            Dataset::new(vec!["a".into(), "b".into()], vec![vec![1.0, 2.0], vec![1.0]]),
            Err(DatasetError::RaggedColumn { .. })
        ));
        assert!(matches!(
            Dataset::new(vec!["a".into(), "A ".into()], vec![vec![1.0], vec![1.0]]),
            Err(DatasetError::DuplicateName(_))
        ));
        assert_eq!(
            Dataset::new(vec!["a".into()], vec![vec![1.0, f64::NAN]]),
            Err(DatasetError::NonFinite { row: 1, column: "a".into() })
        );
    }

    #[test]
    fn standardizes() {
        let d = Dataset::new(vec!["a".into(), "k".into()], vec![vec![1.0, 2.0, 3.0], vec![5.0; 3]]).unwrap();
        let s = d.standardized();
        assert_eq!(s.column(0), &[-1.0, 0.0, 1.0]);
        assert_eq!(s.column(1), &[0.0, 0.0, 0.0]);
    }
}
