use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::svm::newton;
use super::{Classifier, Samples};
use crate::math::{logistic_loss, sigmoid, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            c: 1.0,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl LogisticRegression {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }
}

impl Classifier for LogisticRegression {
    fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

/// Mean cross-entropy plus `|w|² / (2C)` over `theta = [w, b]`.
pub struct LogRegObjective<'a> {
    pub samples: &'a Samples,
    pub c: f64,
}

impl LogRegObjective<'_> {
    fn score(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.samples.dim();
        theta[..d]
            .iter()
            .zip(self.samples.row(i))
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + theta[d]
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let d = self.samples.dim();
        let n = self.samples.len() as f64;
        let loss: f64 = (0..self.samples.len())
            .map(|i| logistic_loss(self.score(theta, i), self.samples.labels()[i]))
            .sum();
        loss / n + theta[..d].iter().map(|w| w * w).sum::<f64>() / (2.0 * self.c)
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.samples.dim();
        let n = self.samples.len() as f64;
        let mut g = vec![0.0; d + 1];
        for i in 0..self.samples.len() {
            let r = (sigmoid(self.score(theta, i)) - self.samples.labels()[i] as f64) / n;
            for (gj, xj) in g[..d].iter_mut().zip(self.samples.row(i)) {
                *gj += r * xj;
            }
            g[d] += r;
        }
        for j in 0..d {
            g[j] += theta[j] / self.c;
        }
        g
    }

    fn hessian(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.samples.dim();
        let p = d + 1;
        let n = self.samples.len() as f64;
        let mut hm = vec![0.0; p * p];
        let mut z = vec![1.0; p];
        for i in 0..self.samples.len() {
            let s = sigmoid(self.score(theta, i));
            let wgt = s * (1.0 - s) / n;
            z[..d].copy_from_slice(self.samples.row(i));
            for a in 0..p {
                for b in 0..p {
                    hm[a * p + b] += wgt * z[a] * z[b];
                }
            }
        }
        for j in 0..d {
            hm[j * p + j] += 1.0 / self.c;
        }
        hm[d * p + d] += 1e-12;
        hm
    }
}

pub fn train_logreg(train: &Samples, params: &LogRegParams) -> Result<LogisticRegression> {
    train.require_both_classes()?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidConfig("C must be positive".into()));
    }
    let obj = LogRegObjective {
        samples: train,
        c: params.c,
    };
    let d = train.dim();
    let tol = params.tol;
    let out = newton(
        vec![0.0; d + 1],
        params.max_iter,
        |t| obj.value(t),
        |t| obj.gradient(t),
        |t| obj.hessian(t),
        |old, new, g| {
            let small_step = (old - new).abs() <= tol * old.abs().max(1e-12);
            small_step && sqrt(g.iter().map(|v| v * v).sum()) < 1e-6
        },
    );
    Ok(LogisticRegression {
        weights: out.theta[..d].to_vec(),
        bias: out.theta[d],
        c: params.c,
    })
}
