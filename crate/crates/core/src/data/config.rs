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

//! Run configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//!
//! [solver]
//! mode = "sadmm"
//! rho = 1.0
//!
//! [model]
//! kind = "mlp_regressor"
//! input_dim = 4
//! hidden = 5
//! output_dim = 1
//!
//! [data]
//! source = { kind = "csv", path = "ccpp.csv", schema = { label = { kind = "regression", columns = ["PE"] } } }
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::Generator;
use super::{
    load_csv, shard_split, CsvSchema, DataError, NormalizationStats, NormalizeMode, RawDataset, ShardPolicy,
    Target,
};
use crate::consensus::SolverConfig;
use crate::model::{ModelSpec, Shard, ShardObjective};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Relative paths are resolved against the config file's directory.
    Csv { path: PathBuf, schema: CsvSchema },
    Synthetic {
        generator: Generator,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(default)]
    pub normalize: NormalizeMode,
    #[serde(default)]
    pub shard_policy: ShardPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    #[default]
    Loopback,
    Tcp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    pub kind: TransportKind,
    pub bind: String,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig { kind: TransportKind::Loopback, bind: "127.0.0.1:0".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Off: the wall-time column is written as zero, which makes metrics
    /// files reproducible bit for bit.
    pub record_wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), record_wall_time: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub solver: SolverConfig,
    pub model: ModelSpec,
    pub data: DataConfig,
    #[serde(default)]
    pub transport: TransportConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Normalized data, its statistics and the per-worker shards.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: RawDataset,
    pub stats: NormalizationStats,
    pub shards: Vec<Shard>,
}

impl PreparedData {
    pub fn objectives(&self, spec: &ModelSpec) -> Result<Vec<ShardObjective>, DataError> {
        Ok(self.shards.iter().map(|s| ShardObjective::new(spec.clone(), s.clone())).collect::<Result<_, _>>()?)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| DataError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_toml()).map_err(|source| DataError::Io { path: path.display().to_string(), source })
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DataError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.solver.validate().map_err(|e| DataError::Config(e.to_string()))?;
        if self.model.parameter_count() == 0 || self.model.output_dim() == 0 {
            return Err(DataError::Config("model has no parameters".into()));
        }
        if let DataSource::Synthetic { rows: Some(0), .. } = self.data.source {
            return Err(DataError::Config("synthetic dataset needs at least one row".into()));
        }
        Ok(())
    }

    /// Loads or generates the table, normalizes it as a whole and splits it
    /// into one shard per worker.
    pub fn prepare_data(&self, base_dir: &Path) -> Result<PreparedData, DataError> {
        let raw = match &self.data.source {
            DataSource::Csv { path, schema } => load_csv(&base_dir.join(path), schema)?,
            DataSource::Synthetic { generator, rows, seed } => {
                generator.generate(rows.unwrap_or_else(|| generator.default_rows()), *seed)
            }
        };
        self.check_model_fits(&raw)?;
        let stats = NormalizationStats::fit(&raw, self.data.normalize);
        let dataset = stats.apply(&raw);
        let shards = shard_split(&dataset, self.solver.n_workers, self.data.shard_policy)?;
        Ok(PreparedData { dataset, stats, shards })
    }

    fn check_model_fits(&self, ds: &RawDataset) -> Result<(), DataError> {
        let m = &self.model;
        if m.input_dim() != ds.input_dim() {
            return Err(DataError::Config(format!(
                "model expects {} inputs, data has {} feature columns",
                m.input_dim(),
                ds.input_dim()
            )));
        }
        match (&ds.target, m.is_classifier()) {
            (Target::Regression { names, .. }, false) if names.len() == m.output_dim() => Ok(()),
            (Target::Classes { dictionary, .. }, true) if dictionary.len() == m.output_dim() => Ok(()),
            _ => Err(DataError::Config("label columns do not match the model outputs".into())),
        }
    }
}
