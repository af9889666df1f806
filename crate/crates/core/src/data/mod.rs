/*
Copyright 2026 The sadmm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Dataset ingestion, normalization and sharding, run configuration files
//! and the metrics CSV.

pub mod config;
pub mod metrics;
pub mod synthetic;

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Labels, Shard};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}, column `{column}`: `{value}` is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("line {line}: unknown class label `{label}`")]
    UnknownClass { line: u64, label: String },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("dataset is empty")]
    Empty,
    #[error("cannot split {rows} rows into {shards} shards")]
    TooFewRows { rows: usize, shards: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid model for data: {0}")]
    Model(#[from] crate::model::ModelError),
}

/// Which columns are labels and how to read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelSchema {
    Regression {
        columns: Vec<String>,
    },
    Classes {
        column: String,
        /// Allowed labels in index order. Absent: the sorted distinct labels.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        classes: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    /// Feature columns in order. Absent: every non-label column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    pub label: LabelSchema,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Regression { values: Vec<f64>, names: Vec<String> },
    Classes { indices: Vec<u32>, dictionary: Vec<String> },
}

/// A rectangular table of features and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    /// Row-major `M × m`.
    pub features: Vec<f64>,
    pub target: Target,
}

impl RawDataset {
    pub fn input_dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> usize {
        match self.input_dim() {
            0 => 0,
            m => self.features.len() / m,
        }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let m = self.input_dim();
        &self.features[j * m..(j + 1) * m]
    }

    fn output_dim(&self) -> usize {
        match &self.target {
            Target::Regression { names, .. } => names.len(),
            Target::Classes { .. } => 1,
        }
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> RawDataset {
        let mut features = Vec::with_capacity(rows.len() * self.input_dim());
        for &j in rows {
            features.extend_from_slice(self.row(j));
        }
        let target = match &self.target {
            Target::Regression { values, names } => {
                let q = names.len();
                let values = rows.iter().flat_map(|&j| values[j * q..(j + 1) * q].iter().copied()).collect();
                Target::Regression { values, names: names.clone() }
            }
            Target::Classes { indices, dictionary } => Target::Classes {
                indices: rows.iter().map(|&j| indices[j]).collect(),
                dictionary: dictionary.clone(),
            },
        };
        RawDataset { feature_names: self.feature_names.clone(), features, target }
    }

    pub fn to_shard(&self) -> Result<Shard, DataError> {
        let labels = match &self.target {
            Target::Regression { values, names } => Labels::Regression { values: values.clone(), outputs: names.len() },
            Target::Classes { indices, dictionary } => {
                Labels::Classes { indices: indices.clone(), classes: dictionary.len() }
            }
        };
        Ok(Shard::new(self.features.clone(), self.input_dim(), labels)?)
    }

    /// Writes the table as CSV with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        match &self.target {
            Target::Regression { names, .. } => header.extend(names.iter().cloned()),
            Target::Classes { .. } => header.push("class".into()),
        }
        w.write_record(&header)?;
        let q = self.output_dim();
        for j in 0..self.rows() {
            let mut rec: Vec<String> = self.row(j).iter().map(|v| format!("{v:?}")).collect();
            match &self.target {
                Target::Regression { values, .. } => {
                    rec.extend(values[j * q..(j + 1) * q].iter().map(|v| format!("{v:?}")))
                }
                Target::Classes { indices, dictionary } => rec.push(dictionary[indices[j] as usize].clone()),
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        Ok(())
    }
}

fn column(header: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    header.iter().position(|h| h.trim() == name).ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

/// Reads a comma-separated file with a header row.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<RawDataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    read_csv(file, schema)
}

pub fn read_csv(input: impl io::Read, schema: &CsvSchema) -> Result<RawDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    let label_cols: Vec<usize> = match &schema.label {
        LabelSchema::Regression { columns } => columns.iter().map(|c| column(&header, c)).collect::<Result<_, _>>()?,
        LabelSchema::Classes { column: c, .. } => vec![column(&header, c)?],
    };
    let feature_cols: Vec<usize> = match &schema.features {
        Some(names) => names.iter().map(|c| column(&header, c)).collect::<Result<_, _>>()?,
        None => (0..header.len()).filter(|c| !label_cols.contains(c)).collect(),
    };
    let feature_names = feature_cols.iter().map(|&c| header[c].trim().to_string()).collect();

    let mut features = Vec::new();
    let mut values = Vec::new();
    let mut raw_classes = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(DataError::Ragged { line, expected: header.len(), found: rec.len() });
        }
        let num = |c: usize| {
            rec[c].parse::<f64>().map_err(|_| DataError::NonNumeric {
                line,
                column: header[c].to_string(),
                value: rec[c].to_string(),
            })
        };
        for &c in &feature_cols {
            features.push(num(c)?);
        }
        match &schema.label {
            LabelSchema::Regression { .. } => {
                for &c in &label_cols {
                    values.push(num(c)?);
                }
            }
            LabelSchema::Classes { .. } => raw_classes.push((line, rec[label_cols[0]].to_string())),
        }
    }

    let target = match &schema.label {
        LabelSchema::Regression { columns } => Target::Regression { values, names: columns.clone() },
        LabelSchema::Classes { classes, .. } => {
            let dictionary = match classes {
                Some(c) => c.clone(),
                None => raw_classes.iter().map(|(_, l)| l.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
            };
            let indices = raw_classes
                .into_iter()
                .map(|(line, label)| match dictionary.iter().position(|d| *d == label) {
                    Some(i) => Ok(i as u32),
                    None => Err(DataError::UnknownClass { line, label }),
                })
                .collect::<Result<_, _>>()?;
            Target::Classes { indices, dictionary }
        }
    };
    let ds = RawDataset { feature_names, features, target };
    if ds.rows() == 0 {
        return Err(DataError::Empty);
    }
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    None,
    Features,
    #[default]
    FeaturesAndLabel,
}

/// Per-column affine maps `(v − mean) / std`. Standard deviations use the
/// sample divisor `M − 1`. Constant columns keep `mean = 0, std = 1` so they
/// pass through untouched, and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mode: NormalizeMode,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub constant_features: Vec<bool>,
    /// Present when regression labels were normalized too.
    pub label_mean: Option<Vec<f64>>,
    pub label_std: Option<Vec<f64>>,
    /// Divisor offset of the standard deviation (1 means `M − 1`).
    pub ddof: usize,
}

fn column_stats(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    let std = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    (mean, std)
}

fn affine(mean: f64, std: f64) -> (f64, f64, bool) {
    if std > 0.0 && std.is_finite() {
        (mean, std, false)
    } else {
        (0.0, 1.0, true)
    }
}

impl NormalizationStats {
    pub fn fit(ds: &RawDataset, mode: NormalizeMode) -> Self {
        let m = ds.input_dim();
        let rows = ds.rows();
        let mut feature_mean = vec![0.0; m];
        let mut feature_std = vec![1.0; m];
        let mut constant_features = vec![false; m];
        if mode != NormalizeMode::None {
            for c in 0..m {
                let (mean, std) = column_stats((0..rows).map(|j| ds.features[j * m + c]));
                (feature_mean[c], feature_std[c], constant_features[c]) = affine(mean, std);
            }
        }
        let (label_mean, label_std) = match (&ds.target, mode) {
            (Target::Regression { values, names }, NormalizeMode::FeaturesAndLabel) => {
                let q = names.len();
                let (mut means, mut stds) = (Vec::new(), Vec::new());
                for c in 0..q {
                    let (mean, std) = column_stats((0..rows).map(|j| values[j * q + c]));
                    let (mean, std, _) = affine(mean, std);
                    means.push(mean);
                    stds.push(std);
                }
                (Some(means), Some(stds))
            }
            _ => (None, None),
        };
        NormalizationStats { mode, feature_mean, feature_std, constant_features, label_mean, label_std, ddof: 1 }
    }

    /// Applies the stored maps to any table with the same columns.
    pub fn apply(&self, ds: &RawDataset) -> RawDataset {
        let m = ds.input_dim();
        let mut out = ds.clone();
        for (i, v) in out.features.iter_mut().enumerate() {
            let c = i % m;
            *v = (*v - self.feature_mean[c]) / self.feature_std[c];
        }
        if let (Target::Regression { values, names }, Some(mean), Some(std)) =
            (&mut out.target, &self.label_mean, &self.label_std)
        {
            let q = names.len();
            for (i, v) in values.iter_mut().enumerate() {
                *v = (*v - mean[i % q]) / std[i % q];
            }
        }
        out
    }

    /// Maps normalized regression outputs back to label units.
    pub fn denormalize_label(&self, column: usize, v: f64) -> f64 {
        match (&self.label_mean, &self.label_std) {
            (Some(m), Some(s)) => v * s[column] + m[column],
            _ => v,
        }
    }
}

/// Normalizes the whole table. Statistics always come from the full dataset.
pub fn normalize(ds: &RawDataset, mode: NormalizeMode) -> (RawDataset, NormalizationStats) {
    let stats = NormalizationStats::fit(ds, mode);
    (stats.apply(ds), stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShardPolicy {
    #[default]
    Contiguous,
    RoundRobin,
}

/// Row indices of each shard.
pub fn shard_rows(rows: usize, n: usize, policy: ShardPolicy) -> Result<Vec<Vec<usize>>, DataError> {
    if n == 0 || n > rows {
        return Err(DataError::TooFewRows { rows, shards: n });
    }
    Ok(match policy {
        ShardPolicy::Contiguous => {
            let (base, extra) = (rows / n, rows % n);
            let mut start = 0;
            (0..n)
                .map(|i| {
                    let len = base + usize::from(i < extra);
                    let r: Vec<usize> = (start..start + len).collect();
                    start += len;
                    r
                })
                .collect()
        }
        ShardPolicy::RoundRobin => (0..n).map(|i| (i..rows).step_by(n).collect()).collect(),
    })
}

pub fn shard_split(ds: &RawDataset, n: usize, policy: ShardPolicy) -> Result<Vec<Shard>, DataError> {
    shard_rows(ds.rows(), n, policy)?.iter().map(|rows| ds.select(rows).to_shard()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reg_schema(label: &str) -> CsvSchema {
        CsvSchema { features: None, label: LabelSchema::Regression { columns: vec![label.into()] } }
    }

    #[test]
    fn toy_file_is_echoed() {
        let text = "a,b,y\n1.5,2,3\n-4,5e-1,6\n";
        let ds = read_csv(text.as_bytes(), &reg_schema("y")).unwrap();
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        assert_eq!(ds.features, vec![1.5, 2.0, -4.0, 0.5]);
        assert_eq!(ds.target, Target::Regression { values: vec![3.0, 6.0], names: vec!["y".into()] });
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(read_csv("a,y\n1,2\n3\n".as_bytes(), &reg_schema("y")), Err(DataError::Ragged { .. })));
        assert!(matches!(
            read_csv("a,y\n1,2\nx,3\n".as_bytes(), &reg_schema("y")),
            Err(DataError::NonNumeric { line: 3, .. })
        ));
        assert!(matches!(read_csv("a,y\n1,2\n".as_bytes(), &reg_schema("z")), Err(DataError::MissingColumn(_))));
        let classes = CsvSchema {
            features: None,
            label: LabelSchema::Classes { column: "c".into(), classes: Some(vec!["fwd".into(), "left".into()]) },
        };
        assert!(matches!(
            read_csv("a,c\n1,fwd\n2,back\n".as_bytes(), &classes),
            Err(DataError::UnknownClass { line: 3, .. })
        ));
    }

    #[test]
    fn class_dictionary_is_recorded() {
        let schema = CsvSchema { features: None, label: LabelSchema::Classes { column: "c".into(), classes: None } };
        let ds = read_csv("a,c\n1,right\n2,left\n3,right\n".as_bytes(), &schema).unwrap();
        assert_eq!(
            ds.target,
            Target::Classes { indices: vec![1, 0, 1], dictionary: vec!["left".into(), "right".into()] }
        );
    }

    fn column_ds(values: Vec<f64>) -> RawDataset {
        let n = values.len();
        RawDataset {
            feature_names: vec!["a".into()],
            features: values,
            target: Target::Regression { values: vec![0.0; n], names: vec!["y".into()] },
        }
    }

    #[test]
    fn normalize_examples() {
        let (ds, stats) = normalize(&column_ds(vec![1.0, 2.0, 3.0]), NormalizeMode::Features);
        assert_eq!(ds.features, vec![-1.0, 0.0, 1.0]);
        assert_eq!((stats.feature_mean[0], stats.feature_std[0]), (2.0, 1.0));

        let (again, stats2) = normalize(&ds, NormalizeMode::Features);
        assert_eq!((stats2.feature_mean[0], stats2.feature_std[0]), (0.0, 1.0));
        assert_eq!(again, ds);

        let held_out = column_ds(vec![4.0, 0.0]);
        assert_eq!(stats.apply(&held_out).features, vec![2.0, -2.0]);

        let (c, stats) = normalize(&column_ds(vec![7.0, 7.0, 7.0]), NormalizeMode::Features);
        assert!(stats.constant_features[0]);
        assert_eq!(c.features, vec![7.0, 7.0, 7.0]);
    }

    #[test]
    fn labels_normalized_only_when_asked() {
        let mut ds = column_ds(vec![1.0, 2.0, 3.0]);
        ds.target = Target::Regression { values: vec![10.0, 20.0, 30.0], names: vec!["y".into()] };
        let (f, _) = normalize(&ds, NormalizeMode::Features);
        assert_eq!(f.target, ds.target);
        let (fl, stats) = normalize(&ds, NormalizeMode::FeaturesAndLabel);
        assert_eq!(fl.target, Target::Regression { values: vec![-1.0, 0.0, 1.0], names: vec!["y".into()] });
        assert_eq!(stats.denormalize_label(0, 1.0), 30.0);
    }

    proptest! {
        #[test]
        fn normalized_columns_are_standard(values in prop::collection::vec(-1e3..1e3f64, 3..300)) {
            prop_assume!(values.iter().any(|v| (v - values[0]).abs() > 1e-3));
            let (ds, _) = normalize(&column_ds(values), NormalizeMode::Features);
            let (mean, std) = column_stats(ds.features.iter().copied());
            prop_assert!(mean.abs() <= 1e-12);
            prop_assert!((std - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn shards_partition_rows(rows in 1usize..200, n in 1usize..20, rr in any::<bool>()) {
            prop_assume!(n <= rows);
            let policy = if rr { ShardPolicy::RoundRobin } else { ShardPolicy::Contiguous };
            let shards = shard_rows(rows, n, policy).unwrap();
            let mut all: Vec<usize> = shards.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..rows).collect::<Vec<_>>());
            let sizes: Vec<usize> = shards.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn shard_examples() {
        let sizes: Vec<usize> = shard_rows(10, 4, ShardPolicy::Contiguous).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        assert_eq!(shard_rows(10, 4, ShardPolicy::RoundRobin).unwrap()[0], vec![0, 4, 8]);
        assert!(matches!(shard_rows(3, 4, ShardPolicy::Contiguous), Err(DataError::TooFewRows { .. })));

        let ds = column_ds(vec![1.0, 2.0, 3.0]);
        let one = shard_split(&ds, 1, ShardPolicy::Contiguous).unwrap();
        assert_eq!(one[0], ds.to_shard().unwrap());
    }
}
