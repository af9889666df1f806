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

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subproblem::NewtonSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every subproblem solved to `newton_tol`.
    Admm,
    /// Exact while `‖x_i − x0‖ > R`, predictor-corrector afterwards.
    Sadmm,
    /// Exact with probability `δ^k`, predictor-corrector otherwise.
    Ssadmm,
    /// One proximal-linearized step per iteration.
    Ladmm,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Admm, Mode::Sadmm, Mode::Ssadmm, Mode::Ladmm];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Admm => "admm",
            Mode::Sadmm => "sadmm",
            Mode::Ssadmm => "ssadmm",
            Mode::Ladmm => "ladmm",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown mode `{s}`")))
    }
}

/// Regularizer `g(x0)` on the consensus variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    None,
    /// `ω‖x0‖₁`
    L1,
    /// `ω‖x0‖₂²`
    L2,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid solver configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n_workers: usize,
    pub rho: f64,
    pub reg: Regularizer,
    pub omega: f64,
    /// Local residual `R` below which sADMM stops solving exactly.
    pub switch_radius: f64,
    /// Optimality tolerance `D` for predictor-corrector solves.
    pub opt_tol: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub max_iter: usize,
    pub mode: Mode,
    pub ssadmm_delta: f64,
    pub ladmm_mu: f64,
    pub rng_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_tol_primal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_tol_dual: Option<f64>,
    pub max_correctors: usize,
    /// Run exactly `max_iter` rounds and ignore the stopping tolerances.
    pub fixed_iterations: bool,
    /// Solve exact subproblems against the previous round's `(x0, λ)`, the
    /// literal reading of the exact branch in the original pseudocode.
    pub exact_solve_uses_stale_params: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_workers: 4,
            rho: 1.0,
            reg: Regularizer::None,
            omega: 0.0,
            switch_radius: 0.2,
            opt_tol: 0.01,
            newton_tol: 1e-8,
            newton_max_iters: 100,
            max_iter: 200,
            mode: Mode::Sadmm,
            ssadmm_delta: 0.8,
            ladmm_mu: 1e4,
            rng_seed: 0,
            stop_tol_primal: None,
            stop_tol_dual: None,
            max_correctors: 20,
            fixed_iterations: false,
            exact_solve_uses_stale_params: false,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_workers == 0 {
            return Err(ConfigError::Invalid("n_workers must be at least 1".into()));
        }
        positive("rho", self.rho)?;
        positive("switch_radius", self.switch_radius)?;
        positive("opt_tol", self.opt_tol)?;
        positive("newton_tol", self.newton_tol)?;
        positive("ladmm_mu", self.ladmm_mu)?;
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(ConfigError::Invalid(format!("omega must be non-negative, got {}", self.omega)));
        }
        if self.newton_max_iters == 0 {
            return Err(ConfigError::Invalid("newton_max_iters must be at least 1".into()));
        }
        if self.mode == Mode::Ssadmm && !(self.ssadmm_delta > 0.0 && self.ssadmm_delta < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "ssadmm_delta must lie strictly inside (0, 1), got {}",
                self.ssadmm_delta
            )));
        }
        for (name, tol) in [("stop_tol_primal", self.stop_tol_primal), ("stop_tol_dual", self.stop_tol_dual)] {
            if let Some(t) = tol {
                if !(t >= 0.0) {
                    return Err(ConfigError::Invalid(format!("{name} must be non-negative, got {t}")));
                }
            }
        }
        Ok(())
    }

    /// Primal and dual stopping thresholds for parameter dimension `n`.
    pub fn stop_tolerances(&self, n: usize) -> (f64, f64) {
        let primal = self.stop_tol_primal.unwrap_or(1e-6 * ((self.n_workers * n) as f64).sqrt());
        let dual = self.stop_tol_dual.unwrap_or(1e-6 * (n as f64).sqrt());
        (primal, dual)
    }

    pub fn newton_settings(&self) -> NewtonSettings {
        NewtonSettings { tol: self.newton_tol, max_iters: self.newton_max_iters, ..Default::default() }
    }

    /// Strong-convexity modulus of the augmented Lagrangian in `x0`.
    pub fn x0_modulus(&self) -> f64 {
        let base = self.n_workers as f64 * self.rho;
        match self.reg {
            Regularizer::L2 => base + 2.0 * self.omega,
            _ => base,
        }
    }

    /// Optimality tolerance actually guaranteed by this mode's subproblem solves.
    pub fn effective_opt_tol(&self) -> f64 {
        match self.mode {
            Mode::Admm => self.newton_tol,
            _ => self.opt_tol.max(self.newton_tol),
        }
    }
}
