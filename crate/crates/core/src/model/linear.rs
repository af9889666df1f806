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

//! Linear-in-parameters models `f(u, x) = φ(u)ᵀx`.

use serde::{Deserialize, Serialize};

use super::{LossValue, Shard};
use crate::linalg::{SymMatrix, Vector};

/// Feature map applied to a raw input row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// φ(u) = u
    Identity,
    /// φ(u) = (1, u)
    Affine,
    /// φ(u) = (1, u, u∘u)
    Quadratic,
}

impl Basis {
    pub fn dim(&self, input_dim: usize) -> usize {
        match self {
            Basis::Identity => input_dim,
            Basis::Affine => input_dim + 1,
            Basis::Quadratic => 2 * input_dim + 1,
        }
    }

    pub fn expand_into(&self, u: &[f64], phi: &mut Vec<f64>) {
        phi.clear();
        match self {
            Basis::Identity => phi.extend_from_slice(u),
            Basis::Affine => {
                phi.push(1.0);
                phi.extend_from_slice(u);
            }
            Basis::Quadratic => {
                phi.push(1.0);
                phi.extend_from_slice(u);
                phi.extend(u.iter().map(|v| v * v));
            }
        }
    }
}

pub(crate) fn predict(basis: Basis, x: &[f64], u: &[f64]) -> f64 {
    let mut phi = Vec::with_capacity(x.len());
    basis.expand_into(u, &mut phi);
    phi.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn residuals<'a>(
    basis: Basis,
    x: &'a [f64],
    shard: &'a Shard,
) -> impl Iterator<Item = (Vec<f64>, f64)> + 'a {
    (0..shard.sample_count()).map(move |j| {
        let mut phi = Vec::with_capacity(x.len());
        basis.expand_into(shard.row(j), &mut phi);
        let f: f64 = phi.iter().zip(x).map(|(a, b)| a * b).sum();
        let y = shard.regression_target(j).expect("regression labels")[0];
        (phi, f - y)
    })
}

pub(crate) fn loss(basis: Basis, x: &[f64], shard: &Shard) -> LossValue {
    let total: f64 = residuals(basis, x, shard).map(|(_, r)| r * r).sum();
    LossValue { value: total / shard.sample_count() as f64, clamped: false }
}

pub(crate) fn grad(basis: Basis, x: &[f64], shard: &Shard) -> Vector {
    let c = 2.0 / shard.sample_count() as f64;
    let mut g = vec![0.0; x.len()];
    for (phi, r) in residuals(basis, x, shard) {
        for (gk, p) in g.iter_mut().zip(&phi) {
            *gk += c * r * p;
        }
    }
    Vector::from(g)
}

/// `2/M · ΦᵀΦ`, independent of the parameters.
pub(crate) fn hessian(basis: Basis, shard: &Shard) -> SymMatrix {
    let n = basis.dim(shard.input_dim());
    let c = 2.0 / shard.sample_count() as f64;
    let mut h = SymMatrix::zeros(n);
    let mut phi = Vec::with_capacity(n);
    for j in 0..shard.sample_count() {
        basis.expand_into(shard.row(j), &mut phi);
        for a in 0..n {
            for b in 0..=a {
                h.add_sym(a, b, c * phi[a] * phi[b]);
            }
        }
    }
    h
}
