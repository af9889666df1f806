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

//! The per-worker augmented-Lagrangian subproblem
//!
//! ```text
//! L_i(x, p) = J_i(x) + λᵀ(x − x0) + (ρ/2)‖x − x0‖²,   p = (x0, λ)
//! ```
//!
//! solved either exactly by damped Newton, or approximately by a tangential
//! predictor along the solution manifold `x*(p)` followed by Newton-type
//! corrector steps until `‖∇ₓL_i‖ ≤ D`.
//!
//! The mixed derivative `∂(∇ₓL_i)/∂p` is `[−ρI | I]`, so the predictor right
//! hand side is `−ρ·Δx0 + Δλ` and needs no numerical differentiation.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::linalg::{solve_sym, LinalgError, SymMatrix, Vector};
use crate::model::{ModelError, SmoothObjective};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: objective has {expected} parameters, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("penalty parameter must be positive, got {0}")]
    Penalty(f64),
    #[error("newton did not converge after {iterations} iterations (‖∇L‖ = {grad_norm:e})")]
    NonConvergence { best: Vector, grad_norm: f64, iterations: usize },
    #[error("optimality tolerance {tol:e} not reached after {} corrector steps (‖ε‖ = {:e})", report.corrector_iters, report.eps_norm)]
    ToleranceUnreachable { tol: f64, report: Box<SolveReport> },
    #[error("no previous parameters to linearize around")]
    NoBasePoint,
}

/// Subproblem parameters `p = (x0, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub x0: Vector,
    pub lambda: Vector,
}

impl ParamBlock {
    pub fn new(x0: Vector, lambda: Vector) -> Self {
        assert_eq!(x0.dim(), lambda.dim(), "x0 and λ must share a dimension");
        ParamBlock { x0, lambda }
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    /// ‖p − other‖₂ over the stacked (x0, λ).
    pub fn distance(&self, other: &ParamBlock) -> f64 {
        let a = self.x0.sub(&other.x0).norm2();
        let b = self.lambda.sub(&other.lambda).norm2();
        a.hypot(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    ExactNlp,
    Predictor,
    PredictorCorrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x_out: Vector,
    pub mode: SolveMode,
    /// ‖∇ₓL_i(x_out, p)‖₂
    pub eps_norm: f64,
    pub newton_iters: usize,
    pub corrector_iters: usize,
    pub linear_solves: usize,
    pub wall_time: Duration,
    /// Values of `L_i` at every accepted Newton iterate, starting point included.
    pub accepted_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub min_step: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { tol: 1e-8, max_iters: 100, armijo: 1e-4, backtrack: 0.5, min_step: 1e-12 }
    }
}

impl NewtonSettings {
    pub fn with_tol(tol: f64) -> Self {
        NewtonSettings { tol, ..Default::default() }
    }
}

/// What a worker keeps between iterations.
#[derive(Debug, Clone)]
pub struct WorkerState<O> {
    pub objective: O,
    /// Current local iterate x̃_i.
    pub x_tilde: Vector,
    /// Parameters x̃_i was computed for.
    pub last_params: Option<ParamBlock>,
}

impl<O: SmoothObjective> WorkerState<O> {
    pub fn new(objective: O, x_init: Vector) -> Self {
        assert_eq!(objective.dim(), x_init.dim(), "initial iterate has wrong dimension");
        WorkerState { objective, x_tilde: x_init, last_params: None }
    }

    /// Adopts `x` as the solution for parameters `p`.
    pub fn commit(&mut self, x: Vector, p: ParamBlock) {
        self.x_tilde = x;
        self.last_params = Some(p);
    }
}

fn check(obj: &impl SmoothObjective, x: &[f64], p: &ParamBlock, rho: f64) -> Result<(), SolveError> {
    let n = obj.dim();
    for got in [x.len(), p.x0.dim(), p.lambda.dim()] {
        if got != n {
            return Err(SolveError::Dimension { expected: n, got });
        }
    }
    if !(rho > 0.0) {
        return Err(SolveError::Penalty(rho));
    }
    Ok(())
}

/// `J(x) + λᵀ(x − x0) + (ρ/2)‖x − x0‖²`
pub fn aug_value(obj: &impl SmoothObjective, x: &[f64], p: &ParamBlock, rho: f64) -> Result<f64, SolveError> {
    check(obj, x, p, rho)?;
    let j = obj.value(x)?;
    let mut lin = 0.0;
    let mut sq = 0.0;
    for ((xi, x0), l) in x.iter().zip(p.x0.iter()).zip(p.lambda.iter()) {
        let d = xi - x0;
        lin += l * d;
        sq += d * d;
    }
    let v = j + lin + 0.5 * rho * sq;
    if !v.is_finite() {
        return Err(ModelError::NonFinite("augmented Lagrangian").into());
    }
    Ok(v)
}

/// `∇J(x) + λ + ρ(x − x0)`
pub fn aug_grad(obj: &impl SmoothObjective, x: &[f64], p: &ParamBlock, rho: f64) -> Result<Vector, SolveError> {
    check(obj, x, p, rho)?;
    let mut g = obj.gradient(x)?;
    for (k, gk) in g.iter_mut().enumerate() {
        *gk += p.lambda[k] + rho * (x[k] - p.x0[k]);
    }
    if !g.is_finite() {
        return Err(ModelError::NonFinite("augmented gradient").into());
    }
    Ok(g)
}

/// `∇²J(x) + ρI`
pub fn aug_hessian(obj: &impl SmoothObjective, x: &[f64], rho: f64) -> Result<SymMatrix, SolveError> {
    Ok(obj.hessian(x)?.add_diagonal(rho))
}

/// Damped Newton on `L_i(·, p)` warm-started from `state.x_tilde`.
pub fn solve_exact<O: SmoothObjective>(
    state: &WorkerState<O>,
    p: &ParamBlock,
    rho: f64,
    settings: &NewtonSettings,
) -> Result<SolveReport, SolveError> {
    solve_exact_from(&state.objective, state.x_tilde.clone(), p, rho, settings)
}

/// Damped Newton on `L_i(·, p)` from an explicit starting point.
pub fn solve_exact_from(
    obj: &impl SmoothObjective,
    x_start: Vector,
    p: &ParamBlock,
    rho: f64,
    settings: &NewtonSettings,
) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let mut x = x_start;
    let mut value = aug_value(obj, &x, p, rho)?;
    let mut g = aug_grad(obj, &x, p, rho)?;
    let mut g_norm = g.norm2();
    let mut accepted_values = vec![value];
    let mut linear_solves = 0;
    let mut iters = 0;

    while g_norm > settings.tol {
        if iters == settings.max_iters {
            return Err(SolveError::NonConvergence { best: x, grad_norm: g_norm, iterations: iters });
        }
        iters += 1;
        let m = aug_hessian(obj, &x, rho)?;
        let d = solve_sym(&m, &g.scale(-1.0))?.x;
        linear_solves += 1;
        let slope = g.dot(&d);

        let mut step = 1.0;
        let accepted = loop {
            let trial = x.axpy(step, &d);
            // Non-finite trial values are treated as a rejected step.
            if let Ok(tv) = aug_value(obj, &trial, p, rho) {
                if tv <= value + settings.armijo * step * slope {
                    break Some((trial, tv, None));
                }
                // Near the solution the decrease drops below rounding; accept a
                // full step that does not increase the value beyond a few ulps
                // and contracts the gradient.
                if step == 1.0 && tv <= value + 4.0 * f64::EPSILON * value.abs().max(1.0) {
                    let tg = aug_grad(obj, &trial, p, rho)?;
                    if tg.norm2() <= 0.5 * g_norm {
                        break Some((trial, tv.min(value), Some(tg)));
                    }
                }
            }
            step *= settings.backtrack;
            if step < settings.min_step {
                break None;
            }
        };
        let Some((trial, tv, tg)) = accepted else {
            return Err(SolveError::NonConvergence { best: x, grad_norm: g_norm, iterations: iters });
        };
        x = trial;
        value = tv;
        g = match tg {
            Some(tg) => tg,
            None => aug_grad(obj, &x, p, rho)?,
        };
        g_norm = g.norm2();
        accepted_values.push(value);
    }

    Ok(SolveReport {
        x_out: x,
        mode: SolveMode::ExactNlp,
        eps_norm: g_norm,
        newton_iters: iters,
        corrector_iters: 0,
        linear_solves,
        wall_time: start.elapsed(),
        accepted_values,
    })
}

/// First-order estimate of `x*(p_new)` from the solution at `state.last_params`:
/// `x̃ = x_prev − M⁻¹(−ρ·Δx0 + Δλ)` with `M = ∇²J(x_prev) + ρI`.
pub fn tangential_predict<O: SmoothObjective>(
    state: &WorkerState<O>,
    p_new: &ParamBlock,
    rho: f64,
) -> Result<Vector, SolveError> {
    let p_old = state.last_params.as_ref().ok_or(SolveError::NoBasePoint)?;
    check(&state.objective, &state.x_tilde, p_new, rho)?;
    check(&state.objective, &state.x_tilde, p_old, rho)?;
    let rhs: Vector = (0..p_new.dim())
        .map(|k| {
            let dx0 = p_new.x0[k] - p_old.x0[k];
            let dl = p_new.lambda[k] - p_old.lambda[k];
            -rho * dx0 + dl
        })
        .collect::<Vec<_>>()
        .into();
    if rhs.norm_inf() == 0.0 {
        return Ok(state.x_tilde.clone());
    }
    let m = aug_hessian(&state.objective, &state.x_tilde, rho)?;
    let step = solve_sym(&m, &rhs)?.x;
    Ok(state.x_tilde.sub(&step))
}

/// One Newton corrector `x' = x − M(x)⁻¹ ∇ₓL(x, p)` with `M` evaluated at `x`.
pub fn corrector_step(
    obj: &impl SmoothObjective,
    x: &Vector,
    p: &ParamBlock,
    rho: f64,
) -> Result<Vector, SolveError> {
    let g = aug_grad(obj, x, p, rho)?;
    if g.norm_inf() == 0.0 {
        return Ok(x.clone());
    }
    let m = aug_hessian(obj, x, rho)?;
    let dx = solve_sym(&m, &g)?.x;
    Ok(x.sub(&dx))
}

/// Tangential predictor followed by correctors until `‖∇ₓL‖ ≤ tol` or
/// `max_correctors` steps were taken.
pub fn approximate_solve<O: SmoothObjective>(
    state: &WorkerState<O>,
    p_new: &ParamBlock,
    rho: f64,
    tol: f64,
    max_correctors: usize,
) -> Result<SolveReport, SolveError> {
    assert!(tol > 0.0, "optimality tolerance must be positive");
    let start = Instant::now();
    let obj = &state.objective;
    let mut x = tangential_predict(state, p_new, rho)?;
    let mut eps = aug_grad(obj, &x, p_new, rho)?.norm2();
    let mut correctors = 0;
    while eps > tol && correctors < max_correctors {
        x = corrector_step(obj, &x, p_new, rho)?;
        eps = aug_grad(obj, &x, p_new, rho)?.norm2();
        correctors += 1;
    }
    let report = SolveReport {
        x_out: x,
        mode: if correctors == 0 { SolveMode::Predictor } else { SolveMode::PredictorCorrected },
        eps_norm: eps,
        newton_iters: 0,
        corrector_iters: correctors,
        linear_solves: 1 + correctors,
        wall_time: start.elapsed(),
        accepted_values: Vec::new(),
    };
    if eps > tol || !eps.is_finite() {
        return Err(SolveError::ToleranceUnreachable { tol, report: Box::new(report) });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Basis, Labels, ModelSpec, Shard, ShardObjective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `J(x) = Σ h_k x_k² / 2`
    struct DiagQuadratic(Vec<f64>);

    impl SmoothObjective for DiagQuadratic {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
            Ok(self.0.iter().zip(x).map(|(h, v)| 0.5 * h * v * v).sum())
        }
        fn gradient(&self, x: &[f64]) -> Result<Vector, ModelError> {
            Ok(self.0.iter().zip(x).map(|(h, v)| h * v).collect::<Vec<_>>().into())
        }
        fn hessian(&self, _x: &[f64]) -> Result<SymMatrix, ModelError> {
            Ok(SymMatrix::from_diagonal(&self.0))
        }
        fn is_quadratic(&self) -> bool {
            true
        }
    }

    /// `J(x) = x⁴/4 + x²/2`, one dimension.
    struct Quartic;

    impl SmoothObjective for Quartic {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
            Ok(x[0].powi(4) / 4.0 + x[0] * x[0] / 2.0)
        }
        fn gradient(&self, x: &[f64]) -> Result<Vector, ModelError> {
            Ok(vec![x[0].powi(3) + x[0]].into())
        }
        fn hessian(&self, x: &[f64]) -> Result<SymMatrix, ModelError> {
            Ok(SymMatrix::from_diagonal(&[3.0 * x[0] * x[0] + 1.0]))
        }
    }

    fn p(x0: &[f64], lambda: &[f64]) -> ParamBlock {
        ParamBlock::new(x0.into(), lambda.into())
    }

    fn mlp_objective(seed: u64, rows: usize) -> ShardObjective {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec::MlpRegressor { input_dim: 4, hidden: 5, output_dim: 1 };
        let feats: Vec<f64> = (0..rows * 4).map(|_| rng.random_range(-1.5..1.5)).collect();
        let ys = feats
            .chunks(4)
            .map(|u| (u[0] - 0.5 * u[1]).tanh() + 0.2 * u[2] * u[3] + 0.05 * rng.random_range(-1.0..1.0))
            .collect();
        let shard = Shard::new(feats, 4, Labels::Regression { values: ys, outputs: 1 }).unwrap();
        ShardObjective::new(spec, shard).unwrap()
    }

    fn random_vec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vector {
        (0..n).map(|_| rng.random_range(-scale..scale)).collect::<Vec<_>>().into()
    }

    // Closed form for diagonal quadratics: (ρ·x0 − λ) / (h + ρ).
    fn quad_minimizer(h: &[f64], p: &ParamBlock, rho: f64) -> Vec<f64> {
        (0..h.len()).map(|k| (rho * p.x0[k] - p.lambda[k]) / (h[k] + rho)).collect()
    }

    #[test]
    fn aug_value_examples() {
        let q = DiagQuadratic(vec![1.0]);
        assert_eq!(aug_value(&q, &[0.7], &p(&[0.7], &[0.0]), 3.0).unwrap(), q.value(&[0.7]).unwrap());
        assert_eq!(aug_value(&q, &[1.0], &p(&[0.0], &[1.0]), 2.0).unwrap(), 2.5);

        let obj = mlp_objective(1, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_vec(31, 1.0, &mut rng);
        let pb = ParamBlock::new(random_vec(31, 1.0, &mut rng), random_vec(31, 1.0, &mut rng));
        let mut oracle = obj.value(&x).unwrap();
        for k in 0..31 {
            oracle += pb.lambda[k] * (x[k] - pb.x0[k]) + 0.5 * 1.7 * (x[k] - pb.x0[k]).powi(2);
        }
        let v = aug_value(&obj, &x, &pb, 1.7).unwrap();
        assert!((v - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
    }

    #[test]
    fn aug_grad_examples() {
        let q = DiagQuadratic(vec![1.0]);
        assert_eq!(aug_grad(&q, &[1.0], &p(&[0.0], &[1.0]), 2.0).unwrap().as_slice(), &[4.0]);

        let h = vec![2.0, 0.5, 3.0];
        let q = DiagQuadratic(h.clone());
        let pb = p(&[1.0, -2.0, 0.3], &[0.4, 0.1, -1.0]);
        let xs = quad_minimizer(&h, &pb, 1.5);
        assert!(aug_grad(&q, &xs, &pb, 1.5).unwrap().norm_inf() <= 1e-10);

        let obj = mlp_objective(3, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_vec(31, 1.0, &mut rng);
        let pb = ParamBlock::new(random_vec(31, 1.0, &mut rng), random_vec(31, 1.0, &mut rng));
        let g = aug_grad(&obj, &x, &pb, 0.8).unwrap();
        let mut probe = x.clone();
        let mut diff = 0.0;
        for k in 0..31 {
            let step = 1e-6 * (1.0 + x[k].abs());
            probe[k] = x[k] + step;
            let fp = aug_value(&obj, &probe, &pb, 0.8).unwrap();
            probe[k] = x[k] - step;
            let fm = aug_value(&obj, &probe, &pb, 0.8).unwrap();
            probe[k] = x[k];
            diff += ((fp - fm) / (2.0 * step) - g[k]).powi(2);
        }
        assert!(diff.sqrt() / g.norm2() <= 1e-5);
    }

    #[test]
    fn exact_solve_on_quadratics() {
        let q = DiagQuadratic(vec![1.0]);
        let state = WorkerState::new(q, vec![3.0].into());
        let r = solve_exact(&state, &p(&[1.0], &[0.0]), 1.0, &NewtonSettings::default()).unwrap();
        assert!((r.x_out[0] - 0.5).abs() <= 1e-12);
        assert_eq!(r.newton_iters, 1);
        assert_eq!(r.mode, SolveMode::ExactNlp);

        let h = vec![4.0, 0.1, 2.0, 7.0];
        let pb = p(&[1.0, 2.0, -1.0, 0.5], &[0.3, -0.2, 0.0, 1.0]);
        let state = WorkerState::new(DiagQuadratic(h.clone()), Vector::zeros(4));
        let r = solve_exact(&state, &pb, 2.0, &NewtonSettings::default()).unwrap();
        assert_eq!(r.newton_iters, 1);
        for (a, b) in r.x_out.iter().zip(quad_minimizer(&h, &pb, 2.0)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn exact_solve_on_mlp_meets_tolerance_monotonically() {
        let obj = mlp_objective(5, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let state = WorkerState::new(obj, random_vec(31, 0.5, &mut rng));
        let pb = ParamBlock::new(random_vec(31, 0.5, &mut rng), random_vec(31, 0.1, &mut rng));
        let settings = NewtonSettings::default();
        let r = solve_exact(&state, &pb, 0.5, &settings).unwrap();
        assert!(r.eps_norm <= settings.tol);
        assert!(aug_grad(&state.objective, &r.x_out, &pb, 0.5).unwrap().norm2() <= settings.tol);
        for w in r.accepted_values.windows(2) {
            assert!(w[1] <= w[0] + 4.0 * f64::EPSILON * w[0].abs().max(1.0));
        }
        assert_eq!(r.linear_solves, r.newton_iters);
    }

    #[test]
    fn exact_solve_reports_nonconvergence() {
        let obj = mlp_objective(5, 50);
        let state = WorkerState::new(obj, Vector::zeros(31));
        let pb = ParamBlock::new(Vector::zeros(31).map(|_| 1.0), Vector::zeros(31));
        let settings = NewtonSettings { max_iters: 1, tol: 1e-14, ..Default::default() };
        match solve_exact(&state, &pb, 0.1, &settings) {
            Err(SolveError::NonConvergence { best, iterations, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(best.dim(), 31);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn predictor_examples() {
        let mut state = WorkerState::new(DiagQuadratic(vec![1.0]), vec![0.0].into());
        state.last_params = Some(p(&[0.0], &[0.0]));
        assert!(matches!(
            tangential_predict(&WorkerState::new(Quartic, vec![0.0].into()), &p(&[1.0], &[0.0]), 1.0),
            Err(SolveError::NoBasePoint)
        ));
        assert_eq!(tangential_predict(&state, &p(&[0.0], &[0.0]), 1.0).unwrap().as_slice(), &[0.0]);
        let x = tangential_predict(&state, &p(&[1.0], &[0.0]), 1.0).unwrap();
        assert!((x[0] - 0.5).abs() <= 1e-15);
    }

    fn quartic_exact(pb: &ParamBlock, rho: f64) -> f64 {
        // Oracle: bisection on the strictly increasing map x ↦ x³ + x + λ + ρ(x − x0).
        let f = |x: f64| x.powi(3) + x + pb.lambda[0] + rho * (x - pb.x0[0]);
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn predictor_error_is_second_order() {
        let rho = 1.0;
        let base = p(&[0.8], &[-0.3]);
        let x_base = quartic_exact(&base, rho);
        let mut state = WorkerState::new(Quartic, vec![x_base].into());
        state.last_params = Some(base.clone());
        let mut pts = Vec::new();
        for i in 0..5 {
            let scale = 0.2 / 2f64.powi(i);
            let pn = p(&[0.8 + scale], &[-0.3 + 0.5 * scale]);
            let xt = tangential_predict(&state, &pn, rho).unwrap()[0];
            let err = (xt - quartic_exact(&pn, rho)).abs();
            pts.push((pn.distance(&base).ln(), err.ln()));
        }
        let slope = least_squares_slope(&pts);
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    }

    fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn corrector_examples() {
        let h = vec![2.0, 5.0];
        let q = DiagQuadratic(h.clone());
        let pb = p(&[1.0, -1.0], &[0.5, 0.5]);
        let xs: Vector = quad_minimizer(&h, &pb, 1.0).into();
        let same = corrector_step(&q, &xs, &pb, 1.0).unwrap();
        assert!(same.sub(&xs).norm_inf() <= 1e-12);
        let corrected = corrector_step(&q, &vec![7.0, -3.0].into(), &pb, 1.0).unwrap();
        assert!(corrected.sub(&xs).norm_inf() <= 1e-12);

        // MLP: start from a perturbed exact solution with ‖ε‖ ≈ 0.02.
        let obj = mlp_objective(8, 150);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pb = ParamBlock::new(random_vec(31, 0.5, &mut rng), random_vec(31, 0.05, &mut rng));
        let state = WorkerState::new(obj, random_vec(31, 0.5, &mut rng));
        let exact = solve_exact(&state, &pb, 1.0, &NewtonSettings::with_tol(1e-12)).unwrap().x_out;
        let dir = random_vec(31, 1.0, &mut rng);
        let g1 = aug_grad(&state.objective, &exact.axpy(1e-3, &dir), &pb, 1.0).unwrap().norm2();
        let x = exact.axpy(1e-3 * 0.02 / g1, &dir);
        let eps0 = aug_grad(&state.objective, &x, &pb, 1.0).unwrap().norm2();
        assert!((eps0 - 0.02).abs() < 2e-3);
        let xc = corrector_step(&state.objective, &x, &pb, 1.0).unwrap();
        let eps1 = aug_grad(&state.objective, &xc, &pb, 1.0).unwrap().norm2();
        assert!(eps1 < eps0);
        assert!(xc.sub(&exact).norm2() < x.sub(&exact).norm2());
    }

    #[test]
    fn approximate_solve_is_exact_for_linear_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let spec = ModelSpec::LinearFeatures { input_dim: 5, basis: Basis::Affine };
        let feats: Vec<f64> = (0..40 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shard = Shard::new(feats, 5, Labels::Regression { values: ys, outputs: 1 }).unwrap();
        let obj = ShardObjective::new(spec, shard).unwrap();
        let rho = 0.7;
        let p0 = ParamBlock::new(random_vec(6, 1.0, &mut rng), random_vec(6, 1.0, &mut rng));
        let mut state = WorkerState::new(obj, Vector::zeros(6));
        let settings = NewtonSettings::default();
        let first = solve_exact(&state, &p0, rho, &settings).unwrap();
        state.commit(first.x_out, p0);
        let p1 = ParamBlock::new(random_vec(6, 1.0, &mut rng), random_vec(6, 1.0, &mut rng));
        let approx = approximate_solve(&state, &p1, rho, 1e-9, 20).unwrap();
        let exact = solve_exact(&state, &p1, rho, &settings).unwrap();
        assert_eq!(approx.mode, SolveMode::Predictor);
        assert_eq!(approx.corrector_iters, 0);
        assert!(approx.eps_norm <= 1e-12);
        assert!(approx.x_out.sub(&exact.x_out).norm_inf() <= 1e-8);
    }

    #[test]
    fn approximate_solve_counts_and_errors() {
        let rho = 1.0;
        let base = p(&[0.0], &[0.0]);
        let mut state = WorkerState::new(Quartic, vec![quartic_exact(&base, rho)].into());
        state.last_params = Some(base);
        let pn = p(&[1.5], &[0.4]);
        let r = approximate_solve(&state, &pn, rho, 1e-10, 20).unwrap();
        assert_eq!(r.mode, SolveMode::PredictorCorrected);
        assert_eq!(r.linear_solves, 1 + r.corrector_iters);
        assert!(r.eps_norm <= 1e-10);
        assert!((r.x_out[0] - quartic_exact(&pn, rho)).abs() <= 1e-9);

        match approximate_solve(&state, &pn, rho, 1e-10, 0) {
            Err(SolveError::ToleranceUnreachable { report, .. }) => {
                assert_eq!(report.corrector_iters, 0);
                assert!(report.eps_norm > 1e-10);
            }
            other => panic!("expected tolerance error, got {other:?}"),
        }
    }

    #[test]
    fn tighter_tolerance_needs_no_fewer_correctors() {
        let obj = mlp_objective(12, 120);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rho = 1.0;
        let p0 = ParamBlock::new(random_vec(31, 0.5, &mut rng), Vector::zeros(31));
        let mut state = WorkerState::new(obj, random_vec(31, 0.5, &mut rng));
        let first = solve_exact(&state, &p0, rho, &NewtonSettings::default()).unwrap();
        state.commit(first.x_out, p0.clone());
        let p1 = ParamBlock::new(p0.x0.axpy(0.3, &random_vec(31, 1.0, &mut rng)), random_vec(31, 0.2, &mut rng));
        let loose = approximate_solve(&state, &p1, rho, 0.01, 20).unwrap();
        let tight = approximate_solve(&state, &p1, rho, 0.005, 20).unwrap();
        assert!(loose.eps_norm <= 0.01);
        assert!(tight.eps_norm <= 0.005);
        assert!(tight.corrector_iters >= loose.corrector_iters);
    }
}
