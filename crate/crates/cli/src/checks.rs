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

//! Built-in verification suites behind `sadmm check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sadmm_core::consensus::theory::{check_convergence_theory, AnalysisEstimates};
use sadmm_core::consensus::{
    dual_update, residuals, shrinkage, update_x0, Directive, GlobalState, LocalPool, Master, Mode, Regularizer,
    RoundParams, SolverConfig, WorkerSettings,
};
use sadmm_core::linalg::{solve_sym, Vector};
use sadmm_core::model::gradcheck::{run_suite, GRADCHECK_TOL};
use sadmm_core::model::{Basis, Labels, ModelSpec, Shard, ShardObjective, SmoothObjective};
use sadmm_core::transport::{decode, encode, Message};

use crate::error::CliError;
use crate::exec::Experiment;

/// Prints one line per check and returns how many failed.
struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: impl std::fmt::Display) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.failed += usize::from(!ok);
    }

    fn finish(self) -> Result<(), CliError> {
        match self.failed {
            0 => Ok(()),
            n => Err(CliError::Solver(format!("{n} check(s) failed"))),
        }
    }
}

pub fn gradcheck(seeds: u64) -> Result<(), CliError> {
    let results = run_suite(seeds).map_err(|e| CliError::Solver(e.to_string()))?;
    let mut report = Report { failed: 0 };
    let mut specs: Vec<ModelSpec> = Vec::new();
    for r in &results {
        if !specs.contains(&r.spec) {
            specs.push(r.spec.clone());
        }
    }
    for spec in specs {
        let mine: Vec<_> = results.iter().filter(|r| r.spec == spec).collect();
        let worst = mine.iter().map(|r| r.rel_err).fold(0.0, f64::max);
        let bad = mine.iter().filter(|r| !r.passed()).count();
        report.check(
            &format!("gradient {spec:?}"),
            bad == 0,
            format!("{} seeds, worst relative error {worst:.2e} (limit {GRADCHECK_TOL:e}), {bad} failures", mine.len()),
        );
    }
    report.finish()
}

fn v(x: &[f64]) -> Vector {
    x.to_vec().into()
}

fn ridge(rows: usize, n: usize, seed: u64) -> Shard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..rows * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let values = features.chunks(n).map(|u| u.iter().sum::<f64>() + 0.1 * rng.random_range(-1.0..1.0)).collect();
    Shard::new(features, n, Labels::Regression { values, outputs: 1 }).expect("valid shard")
}

pub fn invariants() -> Result<(), CliError> {
    let mut report = Report { failed: 0 };

    let s = [shrinkage(1.2, 0.5), shrinkage(0.3, 0.5), shrinkage(-2.0, 0.5)];
    report.check(
        "shrinkage examples",
        (s[0] - 0.7).abs() < 1e-15 && s[1] == 0.0 && (s[2] + 1.5).abs() < 1e-15,
        format!("{s:?}"),
    );

    let zero = [v(&[0.0]), v(&[0.0])];
    let plain = update_x0(&[v(&[1.0]), v(&[3.0])], &zero, &SolverConfig { n_workers: 2, ..Default::default() });
    let l1 = update_x0(
        &[v(&[0.3]), v(&[0.3])],
        &zero,
        &SolverConfig { n_workers: 2, reg: Regularizer::L1, omega: 1.0, ..Default::default() },
    );
    let l2 = update_x0(
        &[v(&[4.0]), v(&[4.0])],
        &zero,
        &SolverConfig { n_workers: 2, reg: Regularizer::L2, omega: 1.0, ..Default::default() },
    );
    let got: Vec<f64> = [plain, l1, l2].into_iter().map(|r| r.map_or(f64::NAN, |x| x[0])).collect();
    report.check("update_x0 examples", got == [2.0, 0.0, 2.0], format!("{got:?}"));

    let d = dual_update(&v(&[0.0]), &v(&[1.0]), &v(&[0.0]), 2.0);
    let same = dual_update(&v(&[0.7]), &v(&[1.5]), &v(&[1.5]), 2.0);
    report.check("dual_update examples", d[0] == 2.0 && same[0] == 0.7, format!("{} {}", d[0], same[0]));

    let (r, _) = residuals(&[v(&[1.0]), v(&[-1.0])], &[v(&[1.0]), v(&[-1.0])], &v(&[0.0]), 1.0);
    report.check("residual example", (r.norm2() - 2f64.sqrt()).abs() < 1e-15, format!("|r| = {}", r.norm2()));

    // A single worker must settle on the centralized ridge minimizer.
    let spec = ModelSpec::LinearFeatures { input_dim: 4, basis: Basis::Affine };
    let shard = ridge(200, 4, 7);
    let obj = ShardObjective::new(spec.clone(), shard).map_err(|e| CliError::Solver(e.to_string()))?;
    let cfg = SolverConfig {
        n_workers: 1,
        mode: Mode::Admm,
        max_iter: 300,
        newton_tol: 1e-12,
        fixed_iterations: true,
        ..Default::default()
    };
    let dim = spec.parameter_count();
    let h = obj.hessian(&vec![0.0; dim]).map_err(|e| CliError::Solver(e.to_string()))?;
    let g = obj.gradient(&vec![0.0; dim]).map_err(|e| CliError::Solver(e.to_string()))?;
    let oracle = solve_sym(&h, &g.scale(-1.0)).map_err(|e| CliError::Solver(e.to_string()))?.x;
    let state = GlobalState::initial(dim, &cfg);
    let mut pool = LocalPool::new(vec![obj], &state.xs, WorkerSettings::from_config(&cfg));
    let trace = sadmm_core::consensus::run(&cfg, state, &mut pool)?;
    let err = trace.final_state.x0.sub(&oracle).norm_inf();
    report.check("single-worker fixed point", err <= 1e-8, format!("max deviation {err:.2e}"));

    // Dual update identity on a nonconvex model across every mode.
    let mlp = ModelSpec::MlpRegressor { input_dim: 4, hidden: 3, output_dim: 1 };
    for mode in Mode::ALL {
        let cfg = SolverConfig { n_workers: 3, mode, max_iter: 15, switch_radius: 1.0, ..Default::default() };
        let objs: Vec<_> = (0..3)
            .map(|i| ShardObjective::new(mlp.clone(), ridge(40, 4, 100 + i)).expect("valid objective"))
            .collect();
        let state = GlobalState::initial(mlp.parameter_count(), &cfg);
        let mut pool = LocalPool::new(objs, &state.xs, WorkerSettings::from_config(&cfg));
        let mut master = Master::new(cfg.clone(), state)?;
        let mut worst = 0.0f64;
        let mut eps_ok = true;
        for _ in 0..cfg.max_iter {
            let before = master.state().clone();
            let rec = master.step(&mut pool)?;
            let after = master.state();
            for i in 0..3 {
                let lhs = after.lambdas[i].sub(&before.lambdas[i]).norm2();
                let rhs = cfg.rho * after.xs[i].sub(&after.x0).norm2();
                worst = worst.max((lhs - rhs).abs() / (1.0 + rhs));
            }
            if rec.workers.iter().all(|w| w.kind.is_sensitivity() && !w.fallback) {
                eps_ok &= rec.eps_max <= cfg.opt_tol;
            }
        }
        report.check(&format!("dual identity ({mode})"), worst <= 1e-12, format!("worst relative gap {worst:.2e}"));
        report.check(&format!("eps bound ({mode})"), eps_ok, format!("D = {}", cfg.opt_tol));
    }

    let msg = Message::RoundParams(RoundParams {
        k: 3,
        x0: v(&[1.0, -0.0, f64::MIN_POSITIVE]),
        lambda: v(&[f64::MAX, 2.5, -1e-300]),
        directive: Directive::Sensitivity,
    });
    let back = decode(&encode(&msg)).map_err(CliError::from)?;
    report.check("frame round trip", encode(&back) == encode(&msg), "RoundParams");

    report.finish()
}

/// Runs the configured experiment and checks it against the convergence
/// bounds. Quadratic models get exact constants; others sampled ones.
pub fn theory(exp: &Experiment) -> Result<(), CliError> {
    let objs = exp.data.objectives(&exp.cfg.model)?;
    let cfg = &exp.cfg.solver;
    let state = exp.initial_state();
    let mut pool = LocalPool::new(objs.clone(), &state.xs, WorkerSettings::from_config(cfg));
    let trace = sadmm_core::consensus::run(cfg, state, &mut pool)?;
    let est = if exp.cfg.model.is_quadratic() {
        AnalysisEstimates::exact_quadratic(&objs, cfg)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        AnalysisEstimates::empirical(&objs, &trace.final_state.xs, cfg, 50, 0.1, &mut rng)
    }
    .map_err(|e| CliError::Solver(e.to_string()))?;
    let rep = check_convergence_theory(&trace.records, &est, cfg).map_err(|e| CliError::Solver(e.to_string()))?;
    let viol = rep.violations();
    let mut report = Report { failed: 0 };
    report.check(
        "penalty assumption",
        rep.assumption_holds,
        format!(
            "rho = {}, L = {:?}, gamma = {:?}{}",
            cfg.rho,
            est.lipschitz,
            est.gamma,
            if est.empirical { " (sampled)" } else { "" }
        ),
    );
    report.check("dual step bound", viol.a == 0, format!("{} violations", viol.a));
    report.check("descent", viol.b == 0, format!("{} violations", viol.b));
    report.check("lower bound", viol.c == 0, format!("{} violations", viol.c));
    report.check("final stationarity and consensus", viol.d == 0, format!("{} violations", viol.d));
    report.finish()
}
