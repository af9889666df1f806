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

//! Worker side of a round: receive `(x0^{k+1}, λ_i^k)`, solve, report.

use std::thread;
use std::time::Instant;

use crate::linalg::Vector;
use crate::model::SmoothObjective;
use crate::subproblem::{
    approximate_solve, aug_grad, solve_exact_from, NewtonSettings, ParamBlock, SolveError, SolveMode,
    WorkerState,
};

use super::config::SolverConfig;
use super::schedule::Directive;
use super::updates::ladmm_step;
use super::ConsensusError;

/// The slice of the solver configuration a worker needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerSettings {
    pub rho: f64,
    pub opt_tol: f64,
    pub max_correctors: usize,
    pub ladmm_mu: f64,
    pub newton: NewtonSettings,
    pub stale_params: bool,
}

impl WorkerSettings {
    pub fn from_config(cfg: &SolverConfig) -> Self {
        WorkerSettings {
            rho: cfg.rho,
            opt_tol: cfg.opt_tol,
            max_correctors: cfg.max_correctors,
            ladmm_mu: cfg.ladmm_mu,
            newton: cfg.newton_settings(),
            stale_params: cfg.exact_solve_uses_stale_params,
        }
    }
}

/// What the worker actually did, which may differ from the directive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Exact,
    Predictor,
    PredictorCorrected,
    Linearized,
}

impl StepKind {
    pub fn code(self) -> u8 {
        match self {
            StepKind::Exact => 0,
            StepKind::Predictor => 1,
            StepKind::PredictorCorrected => 2,
            StepKind::Linearized => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(StepKind::Exact),
            1 => Some(StepKind::Predictor),
            2 => Some(StepKind::PredictorCorrected),
            3 => Some(StepKind::Linearized),
            _ => None,
        }
    }

    pub fn is_sensitivity(self) -> bool {
        matches!(self, StepKind::Predictor | StepKind::PredictorCorrected)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundParams {
    pub k: u64,
    pub x0: Vector,
    pub lambda: Vector,
    pub directive: Directive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerStats {
    /// `J_i(x_i^{k+1})`
    pub loss: f64,
    pub kind: StepKind,
    /// Sensitivity was requested but the worker had to solve exactly.
    pub fallback: bool,
    pub newton_iters: u32,
    pub corrector_iters: u32,
    pub linear_solves: u32,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub k: u64,
    pub worker_id: u32,
    pub x: Vector,
    /// `‖∇J_i(x) + λ_i^k + ρ(x − x0^{k+1})‖₂`
    pub eps_norm: f64,
    pub stats: WorkerStats,
}

pub struct WorkerNode<O> {
    id: u32,
    state: WorkerState<O>,
    settings: WorkerSettings,
}

impl<O: SmoothObjective> WorkerNode<O> {
    pub fn new(id: u32, objective: O, initial_x: Vector, settings: WorkerSettings) -> Self {
        WorkerNode { id, state: WorkerState::new(objective, initial_x), settings }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn objective(&self) -> &O {
        &self.state.objective
    }

    pub fn state(&self) -> &WorkerState<O> {
        &self.state
    }

    pub fn handle(&mut self, params: &RoundParams) -> Result<RoundResult, SolveError> {
        let start = Instant::now();
        let s = self.settings;
        let p = ParamBlock::new(params.x0.clone(), params.lambda.clone());
        let obj = &self.state.objective;

        let exact = |x_start: Vector, p: &ParamBlock| solve_exact_from(obj, x_start, p, s.rho, &s.newton);

        let (x, used_p, kind, fallback, newton, correctors, solves) = match params.directive {
            Directive::Exact => {
                let target = match (&self.state.last_params, s.stale_params) {
                    (Some(old), true) => old.clone(),
                    _ => p.clone(),
                };
                let r = exact(self.state.x_tilde.clone(), &target)?;
                (r.x_out, target, StepKind::Exact, false, r.newton_iters, 0, r.linear_solves)
            }
            Directive::Sensitivity => {
                match approximate_solve(&self.state, &p, s.rho, s.opt_tol, s.max_correctors) {
                    Ok(r) => {
                        let kind = match r.mode {
                            SolveMode::PredictorCorrected => StepKind::PredictorCorrected,
                            _ => StepKind::Predictor,
                        };
                        (r.x_out, p, kind, false, 0, r.corrector_iters, r.linear_solves)
                    }
                    Err(SolveError::ToleranceUnreachable { report, .. }) => {
                        let spent = report.linear_solves;
                        let start_x = if report.x_out.is_finite() { report.x_out } else { self.state.x_tilde.clone() };
                        let r = exact(start_x, &p)?;
                        let solves = spent + r.linear_solves;
                        (r.x_out, p, StepKind::Exact, true, r.newton_iters, report.corrector_iters, solves)
                    }
                    Err(SolveError::NoBasePoint) => {
                        let r = exact(self.state.x_tilde.clone(), &p)?;
                        (r.x_out, p, StepKind::Exact, true, r.newton_iters, 0, r.linear_solves)
                    }
                    Err(e) => return Err(e),
                }
            }
            Directive::Linearized => {
                let g = obj.gradient(&self.state.x_tilde)?;
                let x = ladmm_step(&self.state.x_tilde, &g, &p.x0, &p.lambda, s.rho, s.ladmm_mu);
                (x, p, StepKind::Linearized, false, 0, 0, 0)
            }
        };

        let eps_norm = aug_grad(obj, &x, &ParamBlock::new(params.x0.clone(), params.lambda.clone()), s.rho)?.norm2();
        let loss = obj.value(&x)?;
        self.state.commit(x.clone(), used_p);
        Ok(RoundResult {
            k: params.k,
            worker_id: self.id,
            x,
            eps_norm,
            stats: WorkerStats {
                loss,
                kind,
                fallback,
                newton_iters: newton as u32,
                corrector_iters: correctors as u32,
                linear_solves: solves as u32,
                wall_time_s: start.elapsed().as_secs_f64(),
            },
        })
    }
}

/// Anything that can run one synchronous round across all workers.
///
/// `params[i]` goes to worker `i`; the returned results are ordered by worker id.
pub trait WorkerPool {
    fn size(&self) -> usize;
    fn round(&mut self, params: Vec<RoundParams>) -> Result<Vec<RoundResult>, ConsensusError>;
}

/// In-process pool; each round runs all workers on scoped threads.
pub struct LocalPool<O> {
    workers: Vec<WorkerNode<O>>,
}

impl<O: SmoothObjective + Send> LocalPool<O> {
    pub fn new(objectives: Vec<O>, initial_xs: &[Vector], settings: WorkerSettings) -> Self {
        assert_eq!(objectives.len(), initial_xs.len(), "one initial iterate per worker");
        let workers = objectives
            .into_iter()
            .zip(initial_xs)
            .enumerate()
            .map(|(i, (o, x))| WorkerNode::new(i as u32, o, x.clone(), settings))
            .collect();
        LocalPool { workers }
    }

    pub fn workers(&self) -> &[WorkerNode<O>] {
        &self.workers
    }
}

impl<O: SmoothObjective + Send> WorkerPool for LocalPool<O> {
    fn size(&self) -> usize {
        self.workers.len()
    }

    fn round(&mut self, params: Vec<RoundParams>) -> Result<Vec<RoundResult>, ConsensusError> {
        if params.len() != self.workers.len() {
            return Err(ConsensusError::WorkerCount { expected: self.workers.len(), got: params.len() });
        }
        let outcomes: Vec<_> = thread::scope(|scope| {
            let handles: Vec<_> = self
                .workers
                .iter_mut()
                .zip(&params)
                .map(|(w, p)| scope.spawn(move || w.handle(p)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
        });
        outcomes
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| ConsensusError::Worker { worker_id: i, message: e.to_string() }))
            .collect()
    }
}
