//! Embedding and factor tables with their CSV forms.

use std::collections::BTreeMap;
use std::path::Path;

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

/// Dense row-major embedding matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub rows: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let d = first.len();
            if d == 0 || rows.iter().any(|r| r.len() != d) {
                return Err(Error::shape("embedding table", "rows must share a positive width"));
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.rows.len(), cols: self.dim(), data: self.rows.concat() }
    }

    /// CSV with header `z0..z{D-1}`; values use the shortest exact decimal form.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record((0..self.dim()).map(|j| format!("z{j}")))?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:?}")))?;
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_csv()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display()))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }
}

/// Named categorical factors, one integer code per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTable {
    pub names: Vec<String>,
    /// `codes[factor][row]`.
    pub codes: Vec<Vec<usize>>,
    /// Human-readable label of every code, per factor.
    pub levels: Vec<Vec<String>>,
}

impl FactorTable {
    /// Builds a table from string labels; codes follow sorted label order.
    pub fn from_labels(names: Vec<String>, columns: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::shape("factor table", format!("{} names, {} columns", names.len(), columns.len())));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::shape("factor table", "columns differ in length"));
        }
        let mut codes = Vec::with_capacity(columns.len());
        let mut levels = Vec::with_capacity(columns.len());
        for col in columns {
            let mut map: BTreeMap<String, usize> = col.iter().map(|s| (s.clone(), 0)).collect();
            let lv: Vec<String> = map.keys().cloned().collect();
            for (i, v) in map.values_mut().enumerate() {
                *v = i;
            }
            codes.push(col.iter().map(|s| map[s]).collect());
            levels.push(lv);
        }
        Ok(Self { names, codes, levels })
    }

    /// Builds a table from integer codes; labels are the codes themselves.
    pub fn from_codes(names: Vec<String>, codes: Vec<Vec<usize>>) -> Result<Self> {
        let columns = codes.iter().map(|c| c.iter().map(|v| format!("{v:06}")).collect()).collect();
        let mut t = Self::from_labels(names, columns)?;
        for lv in &mut t.levels {
            for l in lv.iter_mut() {
                *l = l.trim_start_matches('0').to_string();
                if l.is_empty() {
                    *l = "0".into();
                }
            }
        }
        Ok(t)
    }

    /// Appends an integer-coded factor column.
    pub fn push_codes(&mut self, name: impl Into<String>, codes: Vec<usize>) -> Result<()> {
        if !self.codes.is_empty() && codes.len() != self.len() {
            return Err(Error::shape("factor table", format!("{} rows, column of {}", self.len(), codes.len())));
        }
        let t = Self::from_codes(vec![name.into()], vec![codes])?;
        self.names.extend(t.names);
        self.codes.extend(t.codes);
        self.levels.extend(t.levels);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.codes.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_factors(&self) -> usize {
        self.names.len()
    }

    pub fn n_classes(&self, f: usize) -> usize {
        self.levels[f].len()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown factor '{name}'; available: {}", self.names.join(", ")))
        })
    }

    /// Keeps only the given rows, re-coding so every remaining level is used.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .codes
            .iter()
            .zip(&self.levels)
            .map(|(c, lv)| rows.iter().map(|&r| lv[c[r]].clone()).collect())
            .collect();
        Self::from_labels(self.names.clone(), columns)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.names)?;
        for r in 0..self.len() {
            w.write_record(self.codes.iter().zip(&self.levels).map(|(c, lv)| lv[c[r]].as_str()))?;
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_csv()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
        let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for rec in r.records() {
            let rec = rec?;
            for (c, v) in columns.iter_mut().zip(rec.iter()) {
                c.push(v.to_string());
            }
        }
        Self::from_labels(names, columns)
    }
}
