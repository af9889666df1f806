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

//! Seeded synthetic datasets shaped like the two UCI benchmarks plus a plain
//! ridge problem. The benchmark stand-ins keep column names, row counts,
//! physical units and rough difficulty of the originals so that
//! fit quality and solver behaviour land in the same regime.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{RawDataset, Target};

pub const CCPP_ROWS: usize = 9568;
pub const ROBOT_ROWS: usize = 5456;
pub const ROBOT_CLASSES: [&str; 4] = ["Move-Forward", "Sharp-Right-Turn", "Slight-Left-Turn", "Slight-Right-Turn"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Power-plant output from ambient temperature, exhaust vacuum,
    /// pressure and humidity.
    Ccpp,
    /// Wall-following robot: four ultrasound distances, four actions.
    Robot,
    Ridge { input_dim: usize },
}

impl Generator {
    pub fn default_rows(&self) -> usize {
        match self {
            Generator::Ccpp => CCPP_ROWS,
            Generator::Robot => ROBOT_ROWS,
            Generator::Ridge { .. } => 2000,
        }
    }

    pub fn generate(&self, rows: usize, seed: u64) -> RawDataset {
        match *self {
            Generator::Ccpp => ccpp_like(rows, seed),
            Generator::Robot => robot_like(rows, seed),
            Generator::Ridge { input_dim } => ridge(rows, input_dim, seed),
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Noise level of the CCPP stand-in in standardized label units. The
/// noiseless response explains about 95% of the label variance.
pub const CCPP_NOISE: f64 = 0.22;

/// Standardized response of the CCPP stand-in before noise.
pub fn ccpp_response(at: f64, v: f64, ap: f64, rh: f64) -> f64 {
    -0.78 * at - 0.17 * v + 0.04 * ap - 0.11 * rh + 0.09 * (at * at - 1.0) - 0.12 * (1.2 * at).tanh()
}

pub fn ccpp_like(rows: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(rows * 4);
    let mut values = Vec::with_capacity(rows);
    for _ in 0..rows {
        let z: [f64; 4] = std::array::from_fn(|_| normal(&mut rng));
        let at = z[0];
        let v = 0.84 * z[0] + 0.54 * z[1];
        let ap = -0.51 * z[0] + 0.86 * z[2];
        let rh = -0.54 * z[0] + 0.84 * z[3];
        let y = ccpp_response(at, v, ap, rh) + CCPP_NOISE * normal(&mut rng);
        features.extend([19.65 + 7.45 * at, 54.31 + 12.71 * v, 1013.26 + 5.94 * ap, 73.31 + 14.60 * rh]);
        values.push(454.37 + 17.07 * y);
    }
    RawDataset {
        feature_names: ["AT", "V", "AP", "RH"].map(String::from).to_vec(),
        features,
        target: Target::Regression { values, names: vec!["PE".into()] },
    }
}

/// Rule-based wall follower with sensor noise and 3% label flips.
pub fn robot_like(rows: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(rows * 4);
    let mut indices = Vec::with_capacity(rows);
    for _ in 0..rows {
        let front = rng.random_range(0.5..5.0);
        let left = rng.random_range(0.4..2.5);
        let right = rng.random_range(0.5..5.0);
        let back = rng.random_range(0.5..5.0);
        let class = if front < 1.1 {
            1
        } else if left > 1.3 {
            2
        } else if left < 0.75 {
            3
        } else {
            0
        };
        let class = if rng.random::<f64>() < 0.03 { rng.random_range(0..4) } else { class };
        let noisy = |d: f64, rng: &mut ChaCha8Rng| (d + 0.02 * normal(rng)).max(0.0);
        features.extend([noisy(front, &mut rng), noisy(left, &mut rng), noisy(right, &mut rng), noisy(back, &mut rng)]);
        indices.push(class);
    }
    RawDataset {
        feature_names: ["SD_front", "SD_left", "SD_right", "SD_back"].map(String::from).to_vec(),
        features,
        target: Target::Classes { indices, dictionary: ROBOT_CLASSES.map(String::from).to_vec() },
    }
}

/// `y = uᵀβ + 0.1·e`, with `u, e ~ U[−1, 1]` and `β ~ U[−1, 1]ⁿ`.
pub fn ridge(rows: usize, n: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let features: Vec<f64> = (0..rows * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let values = features
        .chunks(n.max(1))
        .map(|u| u.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + 0.1 * rng.random_range(-1.0..1.0))
        .collect();
    RawDataset {
        feature_names: (0..n).map(|i| format!("u{i}")).collect(),
        features,
        target: Target::Regression { values, names: vec!["y".into()] },
    }
}
