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

//! The sharing (optimal exchange) problem `min Σ f_i(x_i)  s.t.  Σ x_i = 0`.
//!
//! ```text
//! x_i^{k+1} = argmin f_i(x) + λᵀx + (ρ/2)‖x − x_i^k + x̄^k‖²
//! x̄^{k+1}   = (1/N) Σ x_i^{k+1}
//! λ^{k+1}   = λ^k + ρ x̄^{k+1}
//! ```
//!
//! Up to a constant, the local problem is the consensus subproblem with the
//! anchor `v_i = x_i^k − x̄^k` in place of `x0`, so workers are reused as is
//! with `p_i = (v_i, λ)`.

use rand_chacha::ChaCha8Rng;

use crate::linalg::Vector;

use super::schedule::{choose_solve_mode, worker_rng};
use super::worker::{RoundParams, StepKind, WorkerPool};
use super::{ConsensusError, RunStatus, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SharingState {
    pub xs: Vec<Vector>,
    pub xbar: Vector,
    pub lambda: Vector,
    pub k: usize,
}

impl SharingState {
    pub fn new(xs: Vec<Vector>) -> Self {
        let n = xs.first().map_or(0, Vector::dim);
        SharingState { xbar: mean(&xs, n), lambda: Vector::zeros(n), xs, k: 0 }
    }
}

fn mean(xs: &[Vector], n: usize) -> Vector {
    let mut m = vec![0.0; n];
    for x in xs {
        for k in 0..n {
            m[k] += x[k];
        }
    }
    let count = xs.len() as f64;
    m.iter().map(|v| v / count).collect::<Vec<_>>().into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharingRecord {
    pub k: usize,
    /// `‖x̄^{k+1}‖`, the scaled constraint violation.
    pub xbar_norm: f64,
    /// `ρ (Σ‖x_i^{k+1} − x_i^k‖²)^{1/2}`
    pub s_norm: f64,
    pub eps_max: f64,
    pub nlp_solves: usize,
    pub xs: Vec<Vector>,
    pub lambda: Vector,
}

/// One exchange iteration. The solve-mode switch uses `‖x̄^k‖` as the local residual.
pub fn sharing_step(
    pool: &mut impl WorkerPool,
    state: &mut SharingState,
    cfg: &SolverConfig,
    rngs: &mut [ChaCha8Rng],
) -> Result<SharingRecord, ConsensusError> {
    let nw = state.xs.len();
    if pool.size() != nw || rngs.len() != nw {
        return Err(ConsensusError::WorkerCount { expected: nw, got: pool.size() });
    }
    let primal = state.xbar.norm2();
    let mut next_rngs = rngs.to_vec();
    let params = (0..nw)
        .map(|i| RoundParams {
            k: state.k as u64,
            x0: state.xs[i].sub(&state.xbar),
            lambda: state.lambda.clone(),
            directive: choose_solve_mode(state.k, primal, cfg, &mut next_rngs[i]),
        })
        .collect();
    let results = pool.round(params)?;
    if results.len() != nw || results.iter().enumerate().any(|(i, r)| r.worker_id as usize != i) {
        return Err(ConsensusError::Protocol("sharing results out of order".into()));
    }

    let xs: Vec<Vector> = results.iter().map(|r| r.x.clone()).collect();
    let xbar = mean(&xs, state.xbar.dim());
    let lambda = state.lambda.axpy(cfg.rho, &xbar);
    let step_sq: f64 = xs.iter().zip(&state.xs).map(|(a, b)| a.sub(b).norm2().powi(2)).sum();
    let record = SharingRecord {
        k: state.k,
        xbar_norm: xbar.norm2(),
        s_norm: cfg.rho * step_sq.sqrt(),
        eps_max: results.iter().map(|r| r.eps_norm).fold(0.0, f64::max),
        nlp_solves: results.iter().filter(|r| r.stats.kind == StepKind::Exact).count(),
        xs: xs.clone(),
        lambda: lambda.clone(),
    };
    *state = SharingState { xs, xbar, lambda, k: state.k + 1 };
    rngs.clone_from_slice(&next_rngs);
    Ok(record)
}

pub fn run_sharing(
    cfg: &SolverConfig,
    mut state: SharingState,
    pool: &mut impl WorkerPool,
) -> Result<(RunStatus, Vec<SharingRecord>, SharingState), ConsensusError> {
    cfg.validate()?;
    let n = state.xbar.dim();
    let (tol_p, tol_d) = cfg.stop_tolerances(n);
    let mut rngs: Vec<ChaCha8Rng> = (0..state.xs.len()).map(|i| worker_rng(cfg.rng_seed, i)).collect();
    let mut records = Vec::new();
    let mut status = RunStatus::NotStarted;
    for _ in 0..cfg.max_iter {
        let rec = sharing_step(pool, &mut state, cfg, &mut rngs)?;
        let done = !cfg.fixed_iterations && rec.xbar_norm <= tol_p && rec.s_norm <= tol_d;
        records.push(rec);
        status = if done { RunStatus::Converged } else { RunStatus::MaxIter };
        if done {
            break;
        }
    }
    Ok((status, records, state))
}
