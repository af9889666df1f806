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

//! Finite-difference gradient checks on random shards and parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{grad, loss, Basis, Labels, ModelError, ModelSpec, Shard};

pub const GRADCHECK_TOL: f64 = 1e-5;

/// The benchmark architectures plus a quadratic-basis linear model.
pub fn suite_specs() -> Vec<ModelSpec> {
    vec![
        ModelSpec::MlpRegressor { input_dim: 4, hidden: 5, output_dim: 1 },
        ModelSpec::SoftmaxClassifier { input_dim: 4, hidden: 5, classes: 4 },
        ModelSpec::LinearFeatures { input_dim: 3, basis: Basis::Quadratic },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub spec: ModelSpec,
    pub seed: u64,
    /// `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)`
    pub rel_err: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.rel_err <= GRADCHECK_TOL
    }
}

/// Compares the analytic gradient with central differences of the loss on a
/// 15-row shard drawn from `seed`.
pub fn check_gradient(spec: &ModelSpec, seed: u64) -> Result<GradCheck, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 15;
    let m = spec.input_dim();
    let features = (0..rows * m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels = match *spec {
        ModelSpec::SoftmaxClassifier { classes, .. } => Labels::Classes {
            indices: (0..rows).map(|_| rng.random_range(0..classes as u32)).collect(),
            classes,
        },
        _ => Labels::Regression {
            values: (0..rows * spec.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            outputs: spec.output_dim(),
        },
    };
    let shard = Shard::new(features, m, labels)?;
    let x: Vec<f64> = (0..spec.parameter_count()).map(|_| rng.random_range(-1.0..1.0)).collect();

    let g = grad(spec, &x, &shard)?;
    let mut p = x.clone();
    let mut diff = 0.0;
    let mut fd_norm = 0.0;
    for k in 0..x.len() {
        let h = 1e-6 * (1.0 + x[k].abs());
        p[k] = x[k] + h;
        let fp = loss(spec, &p, &shard)?.value;
        p[k] = x[k] - h;
        let fm = loss(spec, &p, &shard)?.value;
        p[k] = x[k];
        let fd = (fp - fm) / (2.0 * h);
        diff += (g[k] - fd).powi(2);
        fd_norm += fd * fd;
    }
    let scale = g.norm2().max(fd_norm.sqrt()).max(1e-12);
    Ok(GradCheck { spec: spec.clone(), seed, rel_err: diff.sqrt() / scale })
}

/// Every suite model on seeds `0..seeds`.
pub fn run_suite(seeds: u64) -> Result<Vec<GradCheck>, ModelError> {
    let mut out = Vec::new();
    for spec in suite_specs() {
        for seed in 0..seeds {
            out.push(check_gradient(&spec, seed)?);
        }
    }
    Ok(out)
}
