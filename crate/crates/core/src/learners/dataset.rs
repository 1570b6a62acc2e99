use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::model::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    BinaryClass,
    Regression,
}

/// Labelled rows sharing one feature schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema_id: String,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub task: TaskType,
}

impl Dataset {
    pub fn new(
        schema_id: impl Into<String>,
        names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<f64>,
        task: TaskType,
    ) -> Result<Self, LearnError> {
        let ds = Dataset { schema_id: schema_id.into(), names, rows, labels, task };
        ds.validate()?;
        Ok(ds)
    }

    /// Builds a dataset from feature vectors of one schema.
    pub fn from_vectors(vectors: &[FeatureVector], labels: Vec<f64>, task: TaskType) -> Result<Self, LearnError> {
        let first = vectors.first().ok_or(LearnError::EmptyDataset)?;
        for fv in vectors {
            if fv.schema_id != first.schema_id || fv.names != first.names {
                return Err(LearnError::SchemaMismatch { expected: first.schema_id.clone(), found: fv.schema_id.clone() });
            }
        }
        Dataset::new(
            first.schema_id.clone(),
            first.names.clone(),
            vectors.iter().map(|v| v.values.clone()).collect(),
            labels,
            task,
        )
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.rows.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        if self.rows.len() != self.labels.len() {
            return Err(LearnError::LengthMismatch(self.rows.len(), self.labels.len()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.names.len() {
                return Err(LearnError::InvalidRow {
                    row: i,
                    detail: format!("{} values for {} features", row.len(), self.names.len()),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(LearnError::InvalidRow { row: i, detail: format!("non-finite value {v}") });
            }
        }
        for (row, &value) in self.labels.iter().enumerate() {
            let ok = match self.task {
                TaskType::BinaryClass => value == 0.0 || value == 1.0,
                TaskType::Regression => value.is_finite(),
            };
            if !ok {
                return Err(LearnError::InvalidLabel { row, value });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema_id: self.schema_id.clone(),
            names: self.names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            task: self.task,
        }
    }

    /// Reads CSV with a header of feature names followed by `label`.
    pub fn read_csv(
        reader: impl std::io::Read,
        schema_id: impl Into<String>,
        task: TaskType,
    ) -> Result<Dataset, LearnError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(|e| LearnError::Io(e.to_string()))?.clone();
        let cols: Vec<String> = header.iter().map(str::to_string).collect();
        if cols.last().map(String::as_str) != Some("label") {
            return Err(LearnError::InvalidRow { row: 0, detail: "last column must be `label`".into() });
        }
        let names = cols[..cols.len() - 1].to_vec();
        let (mut rows, mut labels) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| LearnError::InvalidRow { row: i, detail: e.to_string() })?;
            let parsed: Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            let mut vals = parsed.map_err(|e| LearnError::InvalidRow { row: i, detail: e.to_string() })?;
            if vals.len() != cols.len() {
                return Err(LearnError::InvalidRow { row: i, detail: format!("{} columns", vals.len()) });
            }
            labels.push(vals.pop().unwrap());
            rows.push(vals);
        }
        Dataset::new(schema_id, names, rows, labels, task)
    }

    pub fn load_csv(path: &Path, schema_id: impl Into<String>, task: TaskType) -> Result<Dataset, LearnError> {
        Dataset::read_csv(std::fs::File::open(path)?, schema_id, task)
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<(), LearnError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| LearnError::Io(e.to_string());
        w.write_record(self.names.iter().map(String::as_str).chain(["label"])).map_err(io)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            w.write_record(row.iter().chain([label]).map(|v| v.to_string())).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}
