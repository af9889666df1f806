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

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sadmm_core::linalg::Vector;
use sadmm_core::model::{Basis, Labels, ModelSpec, Shard, ShardObjective};

/// Ridge-type consensus problem: `rows` samples with `n` features split into
/// `workers` contiguous shards, `y = uᵀβ + noise`.
pub fn ridge_shards(rows: usize, n: usize, workers: usize, seed: u64) -> Vec<ShardObjective> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let spec = ModelSpec::LinearFeatures { input_dim: n, basis: Basis::Identity };
    let per = rows / workers;
    (0..workers)
        .map(|w| {
            let m = if w + 1 == workers { rows - per * (workers - 1) } else { per };
            let feats: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ys = feats
                .chunks(n)
                .map(|u| u.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + 0.1 * rng.random_range(-1.0..1.0))
                .collect();
            let shard = Shard::new(feats, n, Labels::Regression { values: ys, outputs: 1 }).unwrap();
            ShardObjective::new(spec.clone(), shard).unwrap()
        })
        .collect()
}

/// Centralized oracle: minimizer of `Σ_i (1/M_i)‖U_i x − y_i‖² + ω_2‖x‖²`
/// from the normal equations, solved by LU in nalgebra.
pub fn centralized_ridge(shards: &[ShardObjective], omega_l2: f64) -> Vector {
    let n = shards[0].spec.parameter_count();
    let mut a = DMatrix::<f64>::identity(n, n) * (2.0 * omega_l2);
    let mut b = DVector::<f64>::zeros(n);
    for s in shards {
        let m = s.shard.sample_count();
        let u = DMatrix::from_row_slice(m, n, s.shard.features());
        let y = match s.shard.labels() {
            Labels::Regression { values, .. } => DVector::from_column_slice(values),
            _ => unreachable!(),
        };
        a += u.transpose() * &u * (2.0 / m as f64);
        b += u.transpose() * y * (2.0 / m as f64);
    }
    let x = a.lu().solve(&b).expect("oracle system is regular");
    x.as_slice().into()
}
