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

//! Loading experiments, running them on a worker pool and writing results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use sadmm_core::consensus::{run, GlobalState, Mode, Trace, WorkerSettings};
use sadmm_core::data::config::{PreparedData, RunConfig};
use sadmm_core::data::metrics::write_metrics;
use sadmm_core::data::Target;
use sadmm_core::model::{predict, ModelSpec};
use sadmm_core::transport::Cluster;

use crate::error::{io_error, CliError};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Penalty parameter ρ.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Switching radius R for sADMM.
    #[arg(long = "switch-radius", short = 'R')]
    pub switch_radius: Option<f64>,
    /// Optimality tolerance D for predictor-corrector solves.
    #[arg(long = "opt-tol", short = 'D')]
    pub opt_tol: Option<f64>,
    /// Decay δ of the exact-solve probability in ssADMM.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Proximal weight μ of linearized ADMM.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
}

impl Overrides {
    /// Applies the overrides and returns the ones that were set, by config key.
    pub fn apply(&self, cfg: &mut RunConfig) -> BTreeMap<String, String> {
        let s = &mut cfg.solver;
        let mut set = BTreeMap::new();
        let mut note = |k: &str, v: String| {
            set.insert(k.to_string(), v);
        };
        if let Some(v) = self.rho {
            s.rho = v;
            note("rho", v.to_string());
        }
        if let Some(v) = self.switch_radius {
            s.switch_radius = v;
            note("switch_radius", v.to_string());
        }
        if let Some(v) = self.opt_tol {
            s.opt_tol = v;
            note("opt_tol", v.to_string());
        }
        if let Some(v) = self.delta {
            s.ssadmm_delta = v;
            note("ssadmm_delta", v.to_string());
        }
        if let Some(v) = self.mu {
            s.ladmm_mu = v;
            note("ladmm_mu", v.to_string());
        }
        if let Some(v) = self.seed {
            s.rng_seed = v;
            note("rng_seed", v.to_string());
        }
        if let Some(v) = self.mode {
            s.mode = v;
            note("mode", v.to_string());
        }
        if let Some(v) = self.max_iter {
            s.max_iter = v;
            note("max_iter", v.to_string());
        }
        set
    }
}

pub struct Experiment {
    pub cfg: RunConfig,
    pub data: PreparedData,
    pub overrides: BTreeMap<String, String>,
    pub out_dir: PathBuf,
}

impl Experiment {
    pub fn load(config: &Path, overrides: &Overrides, out: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(config)?;
        let overrides = overrides.apply(&mut cfg);
        cfg.validate()?;
        let base = config.parent().unwrap_or(Path::new("."));
        let data = cfg.prepare_data(base)?;
        let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
        Ok(Experiment { cfg, data, overrides, out_dir })
    }

    pub fn with_mode(&self, mode: Mode) -> Experiment {
        let mut cfg = self.cfg.clone();
        cfg.solver.mode = mode;
        let mut overrides = self.overrides.clone();
        overrides.insert("mode".into(), mode.to_string());
        Experiment { cfg, data: self.data.clone(), overrides, out_dir: self.out_dir.join(mode.as_str()) }
    }

    pub fn initial_state(&self) -> GlobalState {
        GlobalState::initial(self.cfg.model.parameter_count(), &self.cfg.solver)
    }

    /// Hands out shards and runs the master loop on `cluster`.
    pub fn run_on(&self, cluster: &mut Cluster) -> Result<Outcome, CliError> {
        let initial = self.initial_state();
        let settings = WorkerSettings::from_config(&self.cfg.solver);
        cluster.assign(&self.cfg.model, &self.data.shards, settings, &initial.xs)?;
        let start = Instant::now();
        let trace = run(&self.cfg.solver, initial, cluster)?;
        Ok(Outcome { trace, wall_time_s: start.elapsed().as_secs_f64() })
    }

    /// In-process workers behind the loopback transport.
    pub fn run_loopback(&self) -> Result<Outcome, CliError> {
        let mut cluster = Cluster::loopback(self.cfg.solver.n_workers)?;
        self.run_on(&mut cluster)
    }
}

pub struct Outcome {
    pub trace: Trace,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fit {
    /// On the normalized training data.
    Regression { mse: f64, r2: f64 },
    Classification { accuracy: f64 },
}

/// Training fit of the consensus model `x0` on the whole dataset.
pub fn fit(spec: &ModelSpec, x0: &[f64], data: &PreparedData) -> Result<Fit, CliError> {
    let ds = &data.dataset;
    let pred = |j: usize| predict(spec, x0, ds.row(j)).map_err(|e| CliError::Solver(e.to_string()));
    match &ds.target {
        Target::Regression { values, names } => {
            let q = names.len();
            let m = ds.rows() as f64;
            let mut sse = 0.0;
            for j in 0..ds.rows() {
                sse += pred(j)?.iter().zip(&values[j * q..]).map(|(p, y)| (p - y).powi(2)).sum::<f64>();
            }
            let mut sst = 0.0;
            for c in 0..q {
                let mean = (0..ds.rows()).map(|j| values[j * q + c]).sum::<f64>() / m;
                sst += (0..ds.rows()).map(|j| (values[j * q + c] - mean).powi(2)).sum::<f64>();
            }
            Ok(Fit::Regression { mse: sse / (m * q as f64), r2: 1.0 - sse / sst })
        }
        Target::Classes { indices, .. } => {
            let mut hits = 0usize;
            for (j, &c) in indices.iter().enumerate() {
                let p = pred(j)?;
                let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
                hits += usize::from(best == c as usize);
            }
            Ok(Fit::Classification { accuracy: hits as f64 / indices.len() as f64 })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Normalization {
    pub mode: String,
    pub ddof: usize,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub constant_features: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_std: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub mode: String,
    pub status: String,
    pub iterations: usize,
    pub final_r_norm: f64,
    pub final_s_norm: f64,
    pub final_aug_lagrangian: f64,
    pub nlp_solves: usize,
    pub linear_solves: usize,
    pub fallbacks: usize,
    pub sensitivity_steps: usize,
    pub max_eps: f64,
    pub wall_time_s: f64,
    pub fit: Fit,
    pub overrides: BTreeMap<String, String>,
    pub normalization: Normalization,
}

impl Summary {
    pub fn build(exp: &Experiment, outcome: &Outcome) -> Result<Self, CliError> {
        let recs = &outcome.trace.records;
        let last = recs.last();
        let stats = &exp.data.stats;
        let sensitivity_steps =
            recs.iter().flat_map(|r| &r.workers).filter(|w| w.kind.is_sensitivity()).count();
        Ok(Summary {
            mode: exp.cfg.solver.mode.to_string(),
            status: outcome.trace.status.as_str().into(),
            iterations: recs.len(),
            final_r_norm: last.map_or(f64::NAN, |r| r.r_norm),
            final_s_norm: last.map_or(f64::NAN, |r| r.s_norm),
            final_aug_lagrangian: last.map_or(f64::NAN, |r| r.aug_lagrangian),
            nlp_solves: recs.iter().map(|r| r.nlp_solves).sum(),
            linear_solves: recs.iter().map(|r| r.linear_solves).sum(),
            fallbacks: recs.iter().map(|r| r.fallback_count()).sum(),
            sensitivity_steps,
            max_eps: recs.iter().map(|r| r.eps_max).fold(0.0, f64::max),
            wall_time_s: outcome.wall_time_s,
            fit: fit(&exp.cfg.model, outcome.trace.final_state.x0.as_slice(), &exp.data)?,
            overrides: exp.overrides.clone(),
            normalization: Normalization {
                mode: format!("{:?}", stats.mode).to_lowercase(),
                ddof: stats.ddof,
                feature_mean: stats.feature_mean.clone(),
                feature_std: stats.feature_std.clone(),
                constant_features: stats.constant_features.clone(),
                label_mean: stats.label_mean.clone(),
                label_std: stats.label_std.clone(),
            },
        })
    }

    pub fn line(&self) -> String {
        let fit = match self.fit {
            Fit::Regression { mse, r2 } => format!("mse={mse:.6} r2={r2:.6}"),
            Fit::Classification { accuracy } => format!("accuracy={accuracy:.4}"),
        };
        format!(
            "{} {}: iterations={} r={:.3e} s={:.3e} aug_lagrangian={:.6e} nlp_solves={} wall_time={:.3}s {}",
            self.mode,
            self.status,
            self.iterations,
            self.final_r_norm,
            self.final_s_norm,
            self.final_aug_lagrangian,
            self.nlp_solves,
            self.wall_time_s,
            fit
        )
    }
}

/// Writes `metrics.csv`, the effective `config.toml` and `summary.toml`
/// into the experiment's output directory.
pub fn write_outputs(exp: &Experiment, outcome: &Outcome) -> Result<Summary, CliError> {
    let dir = &exp.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_metrics(&outcome.trace.records, &dir.join("metrics.csv"), exp.cfg.output.record_wall_time)?;
    exp.cfg.save(&dir.join("config.toml"))?;
    let summary = Summary::build(exp, outcome)?;
    let text = toml::to_string(&summary).map_err(|e| CliError::Data(e.to_string()))?;
    let path = dir.join("summary.toml");
    std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(summary)
}
