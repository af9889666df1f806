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

//! Closed-form master updates: the consensus step, dual ascent, residuals,
//! the augmented Lagrangian, and the linearized local step of LADMM.

use crate::linalg::Vector;

use super::config::{Regularizer, SolverConfig};
use super::ConsensusError;

/// Soft thresholding `max(0, a − κ) − max(0, −a − κ)`.
pub fn shrinkage(a: f64, kappa: f64) -> f64 {
    debug_assert!(kappa >= 0.0);
    (a - kappa).max(0.0) - (-a - kappa).max(0.0)
}

fn check_dims(vs: &[Vector], n: usize) -> Result<(), ConsensusError> {
    match vs.iter().find(|v| v.dim() != n) {
        Some(v) => Err(ConsensusError::Dimension { expected: n, got: v.dim() }),
        None => Ok(()),
    }
}

/// Minimizer over `x0` of `g(x0) + Σ λ_iᵀ(x_i − x0) + (ρ/2)‖x_i − x0‖²`.
///
/// Sums run in worker order so the result is reproducible bit for bit.
pub fn update_x0(xs: &[Vector], lambdas: &[Vector], cfg: &SolverConfig) -> Result<Vector, ConsensusError> {
    let Some(first) = xs.first() else {
        return Err(ConsensusError::NoWorkers);
    };
    let n = first.dim();
    if lambdas.len() != xs.len() {
        return Err(ConsensusError::WorkerCount { expected: xs.len(), got: lambdas.len() });
    }
    check_dims(xs, n)?;
    check_dims(lambdas, n)?;

    let nw = xs.len() as f64;
    let mut sum = vec![0.0; n];
    for (x, l) in xs.iter().zip(lambdas) {
        for k in 0..n {
            sum[k] += x[k] + l[k] / cfg.rho;
        }
    }
    let x0 = match cfg.reg {
        Regularizer::None => sum.iter().map(|s| s / nw).collect(),
        Regularizer::L1 => {
            let kappa = cfg.omega / (nw * cfg.rho);
            sum.iter().map(|s| shrinkage(s / nw, kappa)).collect()
        }
        Regularizer::L2 => {
            let denom = 2.0 * cfg.omega / cfg.rho + nw;
            sum.iter().map(|s| s / denom).collect()
        }
    };
    Ok(Vector::from_vec(x0))
}

/// `λ + ρ(x_i − x0)`
pub fn dual_update(lambda: &Vector, x_i: &Vector, x0: &Vector, rho: f64) -> Vector {
    assert!(lambda.dim() == x_i.dim() && x_i.dim() == x0.dim(), "dual update dimension mismatch");
    (0..lambda.dim()).map(|k| lambda[k] + rho * (x_i[k] - x0[k])).collect::<Vec<_>>().into()
}

/// Primal residual `r = stack(x_i − x0)` and dual residual `s = ρ Σ(x_i − x_i_prev)`.
pub fn residuals(xs: &[Vector], x_prev: &[Vector], x0: &Vector, rho: f64) -> (Vector, Vector) {
    assert_eq!(xs.len(), x_prev.len(), "previous iterates missing");
    let n = x0.dim();
    let mut r = Vec::with_capacity(xs.len() * n);
    let mut s = vec![0.0; n];
    for (x, xp) in xs.iter().zip(x_prev) {
        for k in 0..n {
            r.push(x[k] - x0[k]);
            s[k] += rho * (x[k] - xp[k]);
        }
    }
    (r.into(), s.into())
}

pub fn regularizer_value(x0: &[f64], cfg: &SolverConfig) -> f64 {
    match cfg.reg {
        Regularizer::None => 0.0,
        Regularizer::L1 => cfg.omega * x0.iter().map(|v| v.abs()).sum::<f64>(),
        Regularizer::L2 => cfg.omega * x0.iter().map(|v| v * v).sum::<f64>(),
    }
}

/// `Σ [J_i(x_i) + λ_iᵀ(x_i − x0) + (ρ/2)‖x_i − x0‖²] + g(x0)` given the losses `J_i(x_i)`.
pub fn aug_lagrangian(losses: &[f64], xs: &[Vector], lambdas: &[Vector], x0: &Vector, cfg: &SolverConfig) -> f64 {
    let mut total = 0.0;
    for ((j, x), l) in losses.iter().zip(xs).zip(lambdas) {
        let mut lin = 0.0;
        let mut sq = 0.0;
        for k in 0..x0.dim() {
            let d = x[k] - x0[k];
            lin += l[k] * d;
            sq += d * d;
        }
        total += j + lin + 0.5 * cfg.rho * sq;
    }
    total + regularizer_value(x0, cfg)
}

/// Minimizer of `∇J(x_k)ᵀx + λᵀ(x − x0) + (ρ/2)‖x − x0‖² + (μ/2)‖x − x_k‖²`.
pub fn ladmm_step(x_k: &Vector, grad_k: &Vector, x0: &Vector, lambda: &Vector, rho: f64, mu: f64) -> Vector {
    (0..x_k.dim())
        .map(|k| (rho * x0[k] + mu * x_k[k] - grad_k[k] - lambda[k]) / (rho + mu))
        .collect::<Vec<_>>()
        .into()
}
