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

//! Parametric predictors, their per-shard losses, analytic gradients and
//! Hessians.
//!
//! Parameters are packed into one flat vector. For the perceptron models the
//! order is `w0` (row-major, one row per hidden neuron), `b0`, `w1` (row-major,
//! one row per output), `b1`.

pub mod gradcheck;
mod linear;
mod mlp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{SymMatrix, Vector};

pub use linear::Basis;

/// Probabilities below this are clamped before taking logs.
pub const LOG_CLAMP: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("label kind does not match model: {0}")]
    LabelKind(&'static str),
    #[error("class index {index} out of range for {classes} classes")]
    ClassIndex { index: u32, classes: usize },
    #[error("shard has no samples")]
    EmptyShard,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Model architecture. The parameter count is a pure function of these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `f(u, x) = φ(u)ᵀ x`, scalar output.
    LinearFeatures { input_dim: usize, basis: Basis },
    /// One sigmoid hidden layer, linear output layer.
    MlpRegressor { input_dim: usize, hidden: usize, output_dim: usize },
    /// One sigmoid hidden layer, softmax output layer.
    SoftmaxClassifier { input_dim: usize, hidden: usize, classes: usize },
}

impl ModelSpec {
    pub fn parameter_count(&self) -> usize {
        match *self {
            ModelSpec::LinearFeatures { input_dim, basis } => basis.dim(input_dim),
            ModelSpec::MlpRegressor { input_dim, hidden, output_dim } => {
                mlp::Layout::new(input_dim, hidden, output_dim).len()
            }
            ModelSpec::SoftmaxClassifier { input_dim, hidden, classes } => {
                mlp::Layout::new(input_dim, hidden, classes).len()
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            ModelSpec::LinearFeatures { input_dim, .. }
            | ModelSpec::MlpRegressor { input_dim, .. }
            | ModelSpec::SoftmaxClassifier { input_dim, .. } => input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            ModelSpec::LinearFeatures { .. } => 1,
            ModelSpec::MlpRegressor { output_dim, .. } => output_dim,
            ModelSpec::SoftmaxClassifier { classes, .. } => classes,
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, ModelSpec::SoftmaxClassifier { .. })
    }

    /// True when the loss is an exact quadratic in the parameters.
    pub fn is_quadratic(&self) -> bool {
        matches!(self, ModelSpec::LinearFeatures { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Labels {
    /// Row-major `M × q` targets.
    Regression { values: Vec<f64>, outputs: usize },
    Classes { indices: Vec<u32>, classes: usize },
}

/// One worker's slice of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shard {
    features: Vec<f64>,
    input_dim: usize,
    labels: Labels,
}

impl Shard {
    pub fn new(features: Vec<f64>, input_dim: usize, labels: Labels) -> Result<Self, ModelError> {
        if input_dim == 0 || features.len() % input_dim != 0 {
            return Err(ModelError::Dimension {
                what: "feature matrix",
                expected: input_dim,
                got: features.len(),
            });
        }
        let rows = features.len() / input_dim;
        if rows == 0 {
            return Err(ModelError::EmptyShard);
        }
        let label_rows = match &labels {
            Labels::Regression { values, outputs } => {
                if *outputs == 0 || values.len() % outputs != 0 {
                    return Err(ModelError::Dimension {
                        what: "label matrix",
                        expected: *outputs,
                        got: values.len(),
                    });
                }
                values.len() / outputs
            }
            Labels::Classes { indices, classes } => {
                if let Some(&bad) = indices.iter().find(|&&c| c as usize >= *classes) {
                    return Err(ModelError::ClassIndex { index: bad, classes: *classes });
                }
                indices.len()
            }
        };
        if label_rows != rows {
            return Err(ModelError::Dimension { what: "label rows", expected: rows, got: label_rows });
        }
        Ok(Shard { features, input_dim, labels })
    }

    pub fn sample_count(&self) -> usize {
        self.features.len() / self.input_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.input_dim..(j + 1) * self.input_dim]
    }

    pub(crate) fn regression_target(&self, j: usize) -> Option<&[f64]> {
        match &self.labels {
            Labels::Regression { values, outputs } => Some(&values[j * outputs..(j + 1) * outputs]),
            Labels::Classes { .. } => None,
        }
    }
}

/// Loss value, with a flag raised when a probability had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub clamped: bool,
}

fn check_params(spec: &ModelSpec, x: &[f64]) -> Result<(), ModelError> {
    let n = spec.parameter_count();
    if x.len() != n {
        return Err(ModelError::Dimension { what: "parameter vector", expected: n, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("parameters"));
    }
    Ok(())
}

fn check_shard(spec: &ModelSpec, shard: &Shard) -> Result<(), ModelError> {
    if shard.input_dim != spec.input_dim() {
        return Err(ModelError::Dimension {
            what: "shard features",
            expected: spec.input_dim(),
            got: shard.input_dim,
        });
    }
    match (&shard.labels, spec) {
        (Labels::Classes { classes, .. }, ModelSpec::SoftmaxClassifier { classes: c, .. }) => {
            if classes != c {
                return Err(ModelError::Dimension { what: "class count", expected: *c, got: *classes });
            }
        }
        (Labels::Regression { outputs, .. }, s) if !s.is_classifier() => {
            if *outputs != s.output_dim() {
                return Err(ModelError::Dimension {
                    what: "label columns",
                    expected: s.output_dim(),
                    got: *outputs,
                });
            }
        }
        (Labels::Classes { .. }, _) => return Err(ModelError::LabelKind("class labels for a regressor")),
        (Labels::Regression { .. }, _) => {
            return Err(ModelError::LabelKind("real labels for a classifier"))
        }
    }
    Ok(())
}

/// Evaluates `f(u, x)`. Classifiers return class probabilities.
pub fn predict(spec: &ModelSpec, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_params(spec, x)?;
    if u.len() != spec.input_dim() {
        return Err(ModelError::Dimension { what: "feature row", expected: spec.input_dim(), got: u.len() });
    }
    Ok(match *spec {
        ModelSpec::LinearFeatures { basis, .. } => vec![linear::predict(basis, x, u)],
        ModelSpec::MlpRegressor { input_dim, hidden, output_dim } => {
            mlp::Layout::new(input_dim, hidden, output_dim).forward(x, u).1
        }
        ModelSpec::SoftmaxClassifier { input_dim, hidden, classes } => {
            let mut out = mlp::Layout::new(input_dim, hidden, classes).forward(x, u).1;
            mlp::softmax_in_place(&mut out);
            out
        }
    })
}

/// Mean loss over the shard: squared residual for regressors, cross-entropy
/// for classifiers.
pub fn loss(spec: &ModelSpec, x: &[f64], shard: &Shard) -> Result<LossValue, ModelError> {
    check_params(spec, x)?;
    check_shard(spec, shard)?;
    let lv = match *spec {
        ModelSpec::LinearFeatures { basis, .. } => linear::loss(basis, x, shard),
        ModelSpec::MlpRegressor { input_dim, hidden, output_dim } => {
            mlp::Layout::new(input_dim, hidden, output_dim).loss(x, shard, false)
        }
        ModelSpec::SoftmaxClassifier { input_dim, hidden, classes } => {
            mlp::Layout::new(input_dim, hidden, classes).loss(x, shard, true)
        }
    };
    if !lv.value.is_finite() {
        return Err(ModelError::NonFinite("loss"));
    }
    Ok(lv)
}

/// Analytic gradient of [`loss`].
pub fn grad(spec: &ModelSpec, x: &[f64], shard: &Shard) -> Result<Vector, ModelError> {
    check_params(spec, x)?;
    check_shard(spec, shard)?;
    Ok(grad_unchecked(spec, x, shard))
}

fn grad_unchecked(spec: &ModelSpec, x: &[f64], shard: &Shard) -> Vector {
    match *spec {
        ModelSpec::LinearFeatures { basis, .. } => linear::grad(basis, x, shard),
        ModelSpec::MlpRegressor { input_dim, hidden, output_dim } => {
            mlp::Layout::new(input_dim, hidden, output_dim).grad(x, shard, false)
        }
        ModelSpec::SoftmaxClassifier { input_dim, hidden, classes } => {
            mlp::Layout::new(input_dim, hidden, classes).grad(x, shard, true)
        }
    }
}

/// Hessian of [`loss`]: exact for linear features, otherwise central
/// differences of the analytic gradient, symmetrized.
pub fn hessian(spec: &ModelSpec, x: &[f64], shard: &Shard) -> Result<SymMatrix, ModelError> {
    check_params(spec, x)?;
    check_shard(spec, shard)?;
    let h = match *spec {
        ModelSpec::LinearFeatures { basis, .. } => linear::hessian(basis, shard),
        _ => fd_hessian(x, |p| grad_unchecked(spec, p, shard)),
    };
    if !h.is_finite() {
        return Err(ModelError::NonFinite("hessian"));
    }
    Ok(h)
}

/// Central-difference Jacobian of `gradient`, returned as `(H + Hᵀ)/2`.
pub fn fd_hessian(x: &[f64], gradient: impl Fn(&[f64]) -> Vector) -> SymMatrix {
    let n = x.len();
    let base = f64::EPSILON.cbrt();
    let mut cols = vec![0.0; n * n];
    let mut probe = x.to_vec();
    for k in 0..n {
        let h = base * (1.0 + x[k].abs());
        probe[k] = x[k] + h;
        let gp = gradient(&probe);
        probe[k] = x[k] - h;
        let gm = gradient(&probe);
        probe[k] = x[k];
        let width = (x[k] + h) - (x[k] - h);
        for i in 0..n {
            // column k of the Jacobian
            cols[i * n + k] = (gp[i] - gm[i]) / width;
        }
    }
    SymMatrix::symmetrized(n, cols)
}

/// A smooth function of the parameters with first and second derivatives.
/// The subproblem engine works against this trait.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64, ModelError>;
    fn gradient(&self, x: &[f64]) -> Result<Vector, ModelError>;
    fn hessian(&self, x: &[f64]) -> Result<SymMatrix, ModelError>;
    /// True when the Hessian is constant in `x`.
    fn is_quadratic(&self) -> bool {
        false
    }
}

/// The loss `J_i(x; D_i)` of one model on one shard.
#[derive(Debug, Clone)]
pub struct ShardObjective {
    pub spec: ModelSpec,
    pub shard: Shard,
}

impl ShardObjective {
    pub fn new(spec: ModelSpec, shard: Shard) -> Result<Self, ModelError> {
        check_shard(&spec, &shard)?;
        Ok(ShardObjective { spec, shard })
    }
}

impl SmoothObjective for ShardObjective {
    fn dim(&self) -> usize {
        self.spec.parameter_count()
    }
    fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
        loss(&self.spec, x, &self.shard).map(|l| l.value)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vector, ModelError> {
        grad(&self.spec, x, &self.shard)
    }
    fn hessian(&self, x: &[f64]) -> Result<SymMatrix, ModelError> {
        hessian(&self.spec, x, &self.shard)
    }
    fn is_quadratic(&self) -> bool {
        self.spec.is_quadratic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MLP: ModelSpec = ModelSpec::MlpRegressor { input_dim: 4, hidden: 5, output_dim: 1 };
    const SOFTMAX: ModelSpec = ModelSpec::SoftmaxClassifier { input_dim: 4, hidden: 5, classes: 4 };

    fn random_shard(spec: &ModelSpec, rows: usize, rng: &mut ChaCha8Rng) -> Shard {
        let m = spec.input_dim();
        let features = (0..rows * m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels = match spec {
            ModelSpec::SoftmaxClassifier { classes, .. } => Labels::Classes {
                indices: (0..rows).map(|_| rng.random_range(0..*classes as u32)).collect(),
                classes: *classes,
            },
            s => Labels::Regression {
                values: (0..rows * s.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
                outputs: s.output_dim(),
            },
        };
        Shard::new(features, m, labels).unwrap()
    }

    fn random_params(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..spec.parameter_count()).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    // Independent oracle: central differences of the loss itself.
    fn fd_grad_of_loss(spec: &ModelSpec, x: &[f64], shard: &Shard) -> Vec<f64> {
        let mut p = x.to_vec();
        (0..x.len())
            .map(|k| {
                let h = 1e-6 * (1.0 + x[k].abs());
                p[k] = x[k] + h;
                let fp = loss(spec, &p, shard).unwrap().value;
                p[k] = x[k] - h;
                let fm = loss(spec, &p, shard).unwrap().value;
                p[k] = x[k];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = crate::linalg::norms(a).0.max(crate::linalg::norms(b).0).max(1e-12);
        diff / scale
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(MLP.parameter_count(), 31);
        assert_eq!(SOFTMAX.parameter_count(), 49);
        let lin = ModelSpec::LinearFeatures { input_dim: 1, basis: Basis::Affine };
        assert_eq!(lin.parameter_count(), 2);
    }

    #[test]
    fn zero_parameter_predictions() {
        let u = [0.3, -1.0, 2.0, 0.1];
        assert_eq!(predict(&MLP, &[0.0; 31], &u).unwrap(), vec![0.0]);
        let p = predict(&SOFTMAX, &[0.0; 49], &u).unwrap();
        assert_eq!(p, vec![0.25; 4]);
        let lin = ModelSpec::LinearFeatures { input_dim: 1, basis: Basis::Affine };
        assert_eq!(predict(&lin, &[2.0, 3.0], &[1.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn loss_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_params(&MLP, &mut rng);
        let feats: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets: Vec<f64> =
            feats.chunks(4).map(|u| predict(&MLP, &x, u).unwrap()[0]).collect();
        let shard =
            Shard::new(feats, 4, Labels::Regression { values: targets, outputs: 1 }).unwrap();
        assert_eq!(loss(&MLP, &x, &shard).unwrap().value, 0.0);
        assert!(grad(&MLP, &x, &shard).unwrap().norm_inf() == 0.0);

        let cls = random_shard(&SOFTMAX, 7, &mut rng);
        let l = loss(&SOFTMAX, &[0.0; 49], &cls).unwrap();
        assert!((l.value - 4f64.ln()).abs() < 1e-12);
        assert!(!l.clamped);

        let lin = ModelSpec::LinearFeatures { input_dim: 1, basis: Basis::Identity };
        let s = Shard::new(vec![1.0, 1.0], 1, Labels::Regression { values: vec![0.0, 2.0], outputs: 1 })
            .unwrap();
        assert_eq!(loss(&lin, &[1.0], &s).unwrap().value, 1.0);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let spec = ModelSpec::SoftmaxClassifier { input_dim: 1, hidden: 1, classes: 2 };
        // w0, b0, w1 (2x1), b1 (2): logits (0, 2000) for class 0 label
        let x = [0.0, 0.0, 0.0, 0.0, 0.0, 2000.0];
        let s = Shard::new(vec![0.0], 1, Labels::Classes { indices: vec![0], classes: 2 }).unwrap();
        let l = loss(&spec, &x, &s).unwrap();
        assert!(l.clamped);
        assert!((l.value - (-(LOG_CLAMP.ln()))).abs() < 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for spec in [
            MLP,
            SOFTMAX,
            ModelSpec::LinearFeatures { input_dim: 3, basis: Basis::Quadratic },
        ] {
            for seed in 0..100 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let shard = random_shard(&spec, 15, &mut rng);
                let x = random_params(&spec, &mut rng);
                let g = grad(&spec, &x, &shard).unwrap();
                let fd = fd_grad_of_loss(&spec, &x, &shard);
                let e = rel_err(&g, &fd);
                assert!(e <= 1e-5, "{spec:?} seed {seed}: rel err {e:e}");
            }
        }
    }

    #[test]
    fn linear_gradient_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = ModelSpec::LinearFeatures { input_dim: 2, basis: Basis::Affine };
        let shard = random_shard(&spec, 6, &mut rng);
        let x = random_params(&spec, &mut rng);
        // Φ rows (1, u1, u2)
        let phi: Vec<[f64; 3]> = (0..6).map(|j| [1.0, shard.row(j)[0], shard.row(j)[1]]).collect();
        let y: Vec<f64> = (0..6).map(|j| shard.regression_target(j).unwrap()[0]).collect();
        let mut oracle = [0.0; 3];
        for j in 0..6 {
            let r: f64 = (0..3).map(|k| phi[j][k] * x[k]).sum::<f64>() - y[j];
            for k in 0..3 {
                oracle[k] += 2.0 / 6.0 * phi[j][k] * r;
            }
        }
        let g = grad(&spec, &x, &shard).unwrap();
        for k in 0..3 {
            assert!((g[k] - oracle[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_examples() {
        let spec = ModelSpec::LinearFeatures { input_dim: 1, basis: Basis::Identity };
        let s = Shard::new(vec![1.0, 1.0], 1, Labels::Regression { values: vec![0.0, 0.0], outputs: 1 })
            .unwrap();
        let h = hessian(&spec, &[0.7], &s).unwrap();
        assert_eq!(h.as_slice(), &[2.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ModelSpec::LinearFeatures { input_dim: 3, basis: Basis::Affine };
        let shard = random_shard(&spec, 10, &mut rng);
        let a = hessian(&spec, &random_params(&spec, &mut rng), &shard).unwrap();
        let b = hessian(&spec, &random_params(&spec, &mut rng), &shard).unwrap();
        assert_eq!(a, b);

        let shard = random_shard(&MLP, 10, &mut rng);
        let h = hessian(&MLP, &random_params(&MLP, &mut rng), &shard).unwrap();
        for i in 0..31 {
            for j in 0..31 {
                assert_eq!(h.get(i, j).to_bits(), h.get(j, i).to_bits());
            }
        }
        assert!(h.eigenvalues().iter().all(|e| e.is_finite()));
    }

    #[test]
    fn fd_hessian_matches_analytic_quadratic() {
        // gradient of 0.5 xᵀAx + bᵀx + sin-free cubic-free quadratic
        let a = [[3.0, 1.0, -0.5], [1.0, 2.0, 0.25], [-0.5, 0.25, 1.5]];
        let g = |x: &[f64]| {
            Vector::from(
                (0..3).map(|i| (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() + 0.3).collect::<Vec<_>>(),
            )
        };
        let h = fd_hessian(&[0.4, -2.0, 5.0], g);
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.get(i, j) - a[i][j]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn softmax_probabilities_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..49).map(|_| rng.random_range(-20.0..20.0)).collect();
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = predict(&SOFTMAX, &x, &u).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn losses_are_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for spec in [MLP, SOFTMAX] {
            for _ in 0..20 {
                let shard = random_shard(&spec, 8, &mut rng);
                let x = random_params(&spec, &mut rng);
                assert!(loss(&spec, &x, &shard).unwrap().value >= 0.0);
            }
        }
    }

    #[test]
    fn shard_validation() {
        assert!(matches!(
            Shard::new(vec![1.0, 2.0], 1, Labels::Classes { indices: vec![0, 4], classes: 4 }),
            Err(ModelError::ClassIndex { index: 4, .. })
        ));
        assert!(matches!(
            Shard::new(vec![1.0, 2.0], 1, Labels::Regression { values: vec![0.0], outputs: 1 }),
            Err(ModelError::Dimension { .. })
        ));
        assert!(matches!(
            Shard::new(vec![], 1, Labels::Regression { values: vec![], outputs: 1 }),
            Err(ModelError::EmptyShard)
        ));
        let s = Shard::new(vec![1.0], 1, Labels::Regression { values: vec![0.0], outputs: 1 }).unwrap();
        assert!(matches!(loss(&SOFTMAX, &[0.0; 49], &s), Err(ModelError::Dimension { .. })));
        assert!(matches!(predict(&MLP, &[0.0; 30], &[0.0; 4]), Err(ModelError::Dimension { .. })));
    }
}
