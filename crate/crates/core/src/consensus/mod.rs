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

//! Master-side consensus ADMM.
//!
//! One iteration:
//!
//! ```text
//! x0^{k+1}  = argmin g(x0) + Σ λ_iᵀ(x_i − x0) + (ρ/2)‖x_i − x0‖²
//! x_i^{k+1} ≈ argmin L_i(x, x0^{k+1}, λ_i^k)      (worker, exact or predictor-corrector)
//! λ_i^{k+1} = λ_i^k + ρ(x_i^{k+1} − x0^{k+1})
//! ```
//!
//! The round is synchronous: `x0^{k+2}` is never formed before every
//! `x_i^{k+1}` has arrived.

pub mod config;
pub mod schedule;
pub mod sharing;
pub mod theory;
pub mod updates;
pub mod worker;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::linalg::Vector;

pub use config::{ConfigError, Mode, Regularizer, SolverConfig};
pub use schedule::{choose_solve_mode, worker_rng, Directive};
pub use updates::{aug_lagrangian, dual_update, ladmm_step, regularizer_value, residuals, shrinkage, update_x0};
pub use worker::{LocalPool, RoundParams, RoundResult, StepKind, WorkerNode, WorkerPool, WorkerSettings, WorkerStats};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("no workers")]
    NoWorkers,
    #[error("expected {expected} workers, got {got}")]
    WorkerCount { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("worker {worker_id} failed: {message}")]
    Worker { worker_id: usize, message: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    pub x0: Vector,
    pub xs: Vec<Vector>,
    pub lambdas: Vec<Vector>,
    pub k: usize,
}

impl GlobalState {
    /// `x0 = x_i = U[−0.5, 0.5]ⁿ` from one seeded draw, `λ_i = 0`.
    pub fn initial(n: usize, cfg: &SolverConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let x: Vector = (0..n).map(|_| rng.random_range(-0.5..=0.5)).collect::<Vec<_>>().into();
        GlobalState {
            xs: vec![x.clone(); cfg.n_workers],
            lambdas: vec![Vector::zeros(n); cfg.n_workers],
            x0: x,
            k: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerRecord {
    pub directive: Directive,
    pub kind: StepKind,
    pub fallback: bool,
    pub eps_norm: f64,
    pub loss: f64,
    pub newton_iters: u32,
    pub corrector_iters: u32,
    pub linear_solves: u32,
    pub wall_time_s: f64,
    /// `‖x_i^{k+1} − x_i^k‖`
    pub step_norm: f64,
    /// `‖λ_i^{k+1} − λ_i^k‖`
    pub dual_step_norm: f64,
    /// `‖x_i^{k+1} − x0^{k+1}‖`
    pub local_residual: f64,
    pub x: Vector,
}

/// Diagnostics for the transition from iterate `k` to `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    pub aug_lagrangian: f64,
    pub eps_max: f64,
    pub nlp_solves: usize,
    pub linear_solves: usize,
    pub max_worker_wall_time_s: f64,
    pub x0: Vector,
    pub workers: Vec<WorkerRecord>,
}

impl IterationRecord {
    /// Summary label for the metrics file.
    pub fn mode_label(&self) -> &'static str {
        let all = |f: fn(StepKind) -> bool| self.workers.iter().all(|w| f(w.kind));
        if all(|k| k == StepKind::Exact) {
            "exact"
        } else if all(StepKind::is_sensitivity) {
            "sensitivity"
        } else if all(|k| k == StepKind::Linearized) {
            "linearized"
        } else {
            "mixed"
        }
    }

    pub fn fallback_count(&self) -> usize {
        self.workers.iter().filter(|w| w.fallback).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    NotStarted,
    Converged,
    MaxIter,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::NotStarted => "not_started",
            RunStatus::Converged => "converged",
            RunStatus::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub status: RunStatus,
    pub records: Vec<IterationRecord>,
    pub final_state: GlobalState,
}

pub struct Master {
    cfg: SolverConfig,
    state: GlobalState,
    rngs: Vec<ChaCha8Rng>,
}

impl Master {
    pub fn new(cfg: SolverConfig, state: GlobalState) -> Result<Self, ConsensusError> {
        cfg.validate()?;
        if state.xs.len() != cfg.n_workers || state.lambdas.len() != cfg.n_workers {
            return Err(ConsensusError::WorkerCount { expected: cfg.n_workers, got: state.xs.len() });
        }
        let rngs = (0..cfg.n_workers).map(|i| worker_rng(cfg.rng_seed, i)).collect();
        Ok(Master { cfg, state, rngs })
    }

    pub fn state(&self) -> &GlobalState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn into_state(self) -> GlobalState {
        self.state
    }

    /// One synchronous iteration. On error the global state is unchanged.
    pub fn step(&mut self, pool: &mut impl WorkerPool) -> Result<IterationRecord, ConsensusError> {
        let cfg = &self.cfg;
        let st = &self.state;
        let nw = cfg.n_workers;
        if pool.size() != nw {
            return Err(ConsensusError::WorkerCount { expected: nw, got: pool.size() });
        }
        let x0 = update_x0(&st.xs, &st.lambdas, cfg)?;

        let mut rngs = self.rngs.clone();
        let directives: Vec<Directive> = (0..nw)
            .map(|i| choose_solve_mode(st.k, st.xs[i].sub(&st.x0).norm2(), cfg, &mut rngs[i]))
            .collect();
        let params = (0..nw)
            .map(|i| RoundParams {
                k: st.k as u64,
                x0: x0.clone(),
                lambda: st.lambdas[i].clone(),
                directive: directives[i],
            })
            .collect();

        let results = pool.round(params)?;
        if results.len() != nw {
            return Err(ConsensusError::WorkerCount { expected: nw, got: results.len() });
        }
        for (i, r) in results.iter().enumerate() {
            if r.worker_id as usize != i || r.k != st.k as u64 {
                return Err(ConsensusError::Protocol(format!(
                    "slot {i} holds result of worker {} for round {}, expected round {}",
                    r.worker_id, r.k, st.k
                )));
            }
            if r.x.dim() != x0.dim() {
                return Err(ConsensusError::Dimension { expected: x0.dim(), got: r.x.dim() });
            }
        }

        let xs: Vec<Vector> = results.iter().map(|r| r.x.clone()).collect();
        let lambdas: Vec<Vector> =
            (0..nw).map(|i| dual_update(&st.lambdas[i], &xs[i], &x0, cfg.rho)).collect();
        let (r, s) = residuals(&xs, &st.xs, &x0, cfg.rho);
        let losses: Vec<f64> = results.iter().map(|r| r.stats.loss).collect();
        let aug = aug_lagrangian(&losses, &xs, &lambdas, &x0, cfg);

        let workers: Vec<WorkerRecord> = results
            .iter()
            .enumerate()
            .map(|(i, res)| WorkerRecord {
                directive: directives[i],
                kind: res.stats.kind,
                fallback: res.stats.fallback,
                eps_norm: res.eps_norm,
                loss: res.stats.loss,
                newton_iters: res.stats.newton_iters,
                corrector_iters: res.stats.corrector_iters,
                linear_solves: res.stats.linear_solves,
                wall_time_s: res.stats.wall_time_s,
                step_norm: xs[i].sub(&st.xs[i]).norm2(),
                dual_step_norm: lambdas[i].sub(&st.lambdas[i]).norm2(),
                local_residual: xs[i].sub(&x0).norm2(),
                x: xs[i].clone(),
            })
            .collect();
        let record = IterationRecord {
            k: st.k,
            r_norm: r.norm2(),
            s_norm: s.norm2(),
            aug_lagrangian: aug,
            eps_max: workers.iter().map(|w| w.eps_norm).fold(0.0, f64::max),
            nlp_solves: workers.iter().filter(|w| w.kind == StepKind::Exact).count(),
            linear_solves: workers.iter().map(|w| w.linear_solves as usize).sum(),
            max_worker_wall_time_s: workers.iter().map(|w| w.wall_time_s).fold(0.0, f64::max),
            x0: x0.clone(),
            workers,
        };

        self.state = GlobalState { x0, xs, lambdas, k: st.k + 1 };
        self.rngs = rngs;
        Ok(record)
    }
}

/// Iterates until both residuals fall below their thresholds or `max_iter`
/// rounds have run (always the latter with `fixed_iterations`). Nonconvergence is reported through the status.
pub fn run(cfg: &SolverConfig, initial: GlobalState, pool: &mut impl WorkerPool) -> Result<Trace, ConsensusError> {
    let (tol_p, tol_d) = cfg.stop_tolerances(initial.dim());
    let mut master = Master::new(cfg.clone(), initial)?;
    let mut records = Vec::with_capacity(cfg.max_iter);
    let mut status = RunStatus::NotStarted;
    for _ in 0..cfg.max_iter {
        let rec = master.step(pool)?;
        let done = !cfg.fixed_iterations && rec.r_norm <= tol_p && rec.s_norm <= tol_d;
        records.push(rec);
        if done {
            status = RunStatus::Converged;
            break;
        }
        status = RunStatus::MaxIter;
    }
    Ok(Trace { status, records, final_state: master.into_state() })
}
