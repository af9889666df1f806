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

//! Single-hidden-layer perceptron with sigmoid activations.

use super::{LossValue, Shard, LOG_CLAMP};
use crate::linalg::Vector;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Offsets of `w0`, `b0`, `w1`, `b1` in the packed parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    inputs: usize,
    hidden: usize,
    outputs: usize,
}

impl Layout {
    pub(crate) fn new(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Layout { inputs, hidden, outputs }
    }

    pub(crate) fn len(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + self.outputs
    }

    fn b0(&self) -> usize {
        self.hidden * self.inputs
    }

    fn w1(&self) -> usize {
        self.b0() + self.hidden
    }

    fn b1(&self) -> usize {
        self.w1() + self.outputs * self.hidden
    }

    /// Returns (hidden activations, output layer pre-softmax values).
    pub(crate) fn forward(&self, x: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut act = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.outputs];
        self.forward_into(x, u, &mut act, &mut out);
        (act, out)
    }

    fn forward_into(&self, x: &[f64], u: &[f64], act: &mut [f64], out: &mut [f64]) {
        let (m, q) = (self.inputs, self.hidden);
        let (b0, w1, b1) = (self.b0(), self.w1(), self.b1());
        for j in 0..q {
            let row = &x[j * m..(j + 1) * m];
            let z: f64 = row.iter().zip(u).map(|(w, v)| w * v).sum::<f64>() + x[b0 + j];
            act[j] = sigmoid(z);
        }
        for o in 0..self.outputs {
            let row = &x[w1 + o * q..w1 + (o + 1) * q];
            out[o] = row.iter().zip(act.iter()).map(|(w, a)| w * a).sum::<f64>() + x[b1 + o];
        }
    }

    pub(crate) fn loss(&self, x: &[f64], shard: &Shard, classifier: bool) -> LossValue {
        let mut act = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.outputs];
        let mut total = 0.0;
        let mut clamped = false;
        let rows = shard.sample_count();
        for j in 0..rows {
            self.forward_into(x, shard.row(j), &mut act, &mut out);
            if classifier {
                softmax_in_place(&mut out);
                let c = class_of(shard, j);
                let p = out[c];
                if p < LOG_CLAMP {
                    clamped = true;
                }
                total -= p.max(LOG_CLAMP).ln();
            } else {
                let y = shard.regression_target(j).expect("regression labels");
                total += out.iter().zip(y).map(|(f, t)| (f - t) * (f - t)).sum::<f64>();
            }
        }
        LossValue { value: total / rows as f64, clamped }
    }

    pub(crate) fn grad(&self, x: &[f64], shard: &Shard, classifier: bool) -> Vector {
        let (m, q) = (self.inputs, self.hidden);
        let (b0, w1, b1) = (self.b0(), self.w1(), self.b1());
        let rows = shard.sample_count();
        let mut g = vec![0.0; self.len()];
        let mut act = vec![0.0; q];
        let mut out = vec![0.0; self.outputs];
        let mut delta_h = vec![0.0; q];
        let scale = 1.0 / rows as f64;
        for j in 0..rows {
            let u = shard.row(j);
            self.forward_into(x, u, &mut act, &mut out);
            // dℓ/d(output pre-activation)
            if classifier {
                softmax_in_place(&mut out);
                out[class_of(shard, j)] -= 1.0;
                out.iter_mut().for_each(|v| *v *= scale);
            } else {
                let y = shard.regression_target(j).expect("regression labels");
                for (v, t) in out.iter_mut().zip(y) {
                    *v = 2.0 * scale * (*v - t);
                }
            }
            delta_h.iter_mut().for_each(|d| *d = 0.0);
            for (o, d_out) in out.iter().enumerate() {
                g[b1 + o] += d_out;
                let base = w1 + o * q;
                for k in 0..q {
                    g[base + k] += d_out * act[k];
                    delta_h[k] += d_out * x[base + k];
                }
            }
            for k in 0..q {
                let dz = delta_h[k] * act[k] * (1.0 - act[k]);
                g[b0 + k] += dz;
                let row = &mut g[k * m..(k + 1) * m];
                for (gw, v) in row.iter_mut().zip(u) {
                    *gw += dz * v;
                }
            }
        }
        Vector::from(g)
    }
}

fn class_of(shard: &Shard, j: usize) -> usize {
    match shard.labels() {
        super::Labels::Classes { indices, .. } => indices[j] as usize,
        super::Labels::Regression { .. } => unreachable!("checked by caller"),
    }
}
