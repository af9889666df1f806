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

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, SolverConfig};

/// How a worker is told to treat its subproblem in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Directive {
    Exact,
    Sensitivity,
    Linearized,
}

impl Directive {
    pub fn code(self) -> u8 {
        match self {
            Directive::Exact => 0,
            Directive::Sensitivity => 1,
            Directive::Linearized => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Directive::Exact),
            1 => Some(Directive::Sensitivity),
            2 => Some(Directive::Linearized),
            _ => None,
        }
    }
}

/// Independent stream for worker `worker_id`; scheduling order never matters.
pub fn worker_rng(seed: u64, worker_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker_id as u64 + 1);
    rng
}

/// Picks the solve kind for round `k` given the local residual
/// `‖x̃_i^k − x0^k‖` left by the previous round.
///
/// Round 0 is always exact: the predictor needs a base point on the
/// solution manifold. The stochastic schedule draws only for `k ≥ 1`.
pub fn choose_solve_mode(k: usize, local_residual: f64, cfg: &SolverConfig, rng: &mut impl Rng) -> Directive {
    if k == 0 {
        return Directive::Exact;
    }
    match cfg.mode {
        Mode::Admm => Directive::Exact,
        Mode::Ladmm => Directive::Linearized,
        Mode::Sadmm => {
            if local_residual > cfg.switch_radius {
                Directive::Exact
            } else {
                Directive::Sensitivity
            }
        }
        Mode::Ssadmm => {
            let u: f64 = rng.random();
            if u <= cfg.ssadmm_delta.powi(k.min(i32::MAX as usize) as i32) {
                Directive::Exact
            } else {
                Directive::Sensitivity
            }
        }
    }
}
