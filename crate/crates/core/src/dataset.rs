//! Feature tables: one row per window, read and written as CSV.
//!
//! Columns are `participant_id, window_start_ms, window_size_ms, label,
//! valid_ratio` followed by one column per feature. An empty label marks an
//! unlabelled window.

use std::fs::File;
use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::Path;

use fnv::FnvHasher;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{FeatureSubset, FeatureVector, MIN_VALID_RATIO};

const META: [&str; 5] = ["participant_id", "window_start_ms", "window_size_ms", "label", "valid_ratio"];

/// Stable 64-bit seed for a string key mixed with a base seed.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(base);
    h.write(key.as_bytes());
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRow {
    pub participant_id: String,
    pub window_start_ms: f64,
    pub window_size_ms: f64,
    pub label: Option<String>,
    pub valid_ratio: f64,
    pub values: Vec<f64>,
}

impl FeatureRow {
    pub fn from_vector(participant_id: &str, fv: &FeatureVector, label: Option<String>) -> Self {
        Self {
            participant_id: participant_id.to_string(),
            window_start_ms: fv.window.start_ms,
            window_size_ms: fv.window.size_ms,
            label,
            valid_ratio: fv.window.valid_ratio,
            values: fv.values.clone(),
        }
    }

    pub fn is_flagged(&self) -> bool {
        self.valid_ratio < MIN_VALID_RATIO
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self {
            feature_names,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.feature_names.len() {
            return Err(Error::FeatureLength {
                expected: self.feature_names.len(),
                got: row.values.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: FeatureTable) -> Result<()> {
        if other.feature_names != self.feature_names {
            return Err(Error::Dataset("feature columns differ between tables".into()));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    /// Column indices of `names`, in that order.
    pub fn columns(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Dataset(format!("missing feature column {n:?}")))
            })
            .collect()
    }

    /// The table restricted to the named columns.
    pub fn project(&self, names: &[String]) -> Result<FeatureTable> {
        let cols = self.columns(names)?;
        Ok(FeatureTable {
            feature_names: names.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    values: cols.iter().map(|&c| r.values[c]).collect(),
                    ..r.clone()
                })
                .collect(),
        })
    }

    pub fn subset(&self, subset: FeatureSubset) -> Result<FeatureTable> {
        self.project(subset.names())
    }

    /// Rows that carry a label and enough valid samples.
    pub fn usable(&self) -> impl Iterator<Item = &FeatureRow> {
        self.rows.iter().filter(|r| r.label.is_some() && !r.is_flagged())
    }

    pub fn participants(&self) -> Vec<String> {
        let mut p: Vec<String> = self.rows.iter().map(|r| r.participant_id.clone()).collect();
        p.sort();
        p.dedup();
        p
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(META.iter().copied().chain(self.feature_names.iter().map(String::as_str)))?;
        for r in &self.rows {
            let mut rec = vec![
                r.participant_id.clone(),
                r.window_start_ms.to_string(),
                r.window_size_ms.to_string(),
                r.label.clone().unwrap_or_default(),
                r.valid_ratio.to_string(),
            ];
            rec.extend(r.values.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Dataset(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Dataset(format!("missing column {name:?}")))
        };
        let meta: Vec<usize> = META.iter().map(|m| find(m)).collect::<Result<_>>()?;
        let feats: Vec<usize> = (0..header.len()).filter(|i| !meta.contains(i)).collect();
        let mut table = FeatureTable::new(feats.iter().map(|&i| header[i].to_string()).collect());
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = line + 2;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Dataset(format!("line {line}: bad number in column {:?}", &header[i])))
            };
            let label = rec.get(meta[3]).unwrap_or("").trim();
            table.rows.push(FeatureRow {
                participant_id: rec.get(meta[0]).unwrap_or("").to_string(),
                window_start_ms: num(meta[1])?,
                window_size_ms: num(meta[2])?,
                label: (!label.is_empty()).then(|| label.to_string()),
                valid_ratio: num(meta[4])?,
                values: feats.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            });
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
