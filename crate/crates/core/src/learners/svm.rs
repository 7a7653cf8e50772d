use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Classifier, Samples};
use crate::linalg::solve;
use crate::math::sigmoid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// Stop when the relative objective change falls below this.
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-6,
            max_passes: 1000,
        }
    }
}

/// Linear SVM. Label is the sign of `w·x + b` (zero counts as up) and the
/// probability is the logistic of the decision value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b
    }
}

impl Classifier for SvmModel {
    fn feature_dim(&self) -> usize {
        self.w.len()
    }

    fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }

    fn label(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) >= 0.0)
    }
}

/// Primal squared-hinge objective over `theta = [w, b]`:
/// `0.5·|w|² + C·Σ max(0, 1 − yᵢ(w·xᵢ + b))²` with `yᵢ ∈ {−1, +1}`.
pub struct SvmObjective<'a> {
    pub samples: &'a Samples,
    pub c: f64,
}

impl SvmObjective<'_> {
    fn sign(&self, i: usize) -> f64 {
        if self.samples.labels()[i] == 1 {
            1.0
        } else {
            -1.0
        }
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.samples.dim();
        let x = self.samples.row(i);
        let f: f64 = theta[..d].iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + theta[d];
        1.0 - self.sign(i) * f
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let d = self.samples.dim();
        let reg: f64 = theta[..d].iter().map(|w| w * w).sum::<f64>() / 2.0;
        let loss: f64 = (0..self.samples.len())
            .map(|i| {
                let m = self.margin(theta, i);
                if m > 0.0 {
                    m * m
                } else {
                    0.0
                }
            })
            .sum();
        reg + self.c * loss
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.samples.dim();
        let mut g = theta.to_vec();
        g[d] = 0.0;
        for i in 0..self.samples.len() {
            let m = self.margin(theta, i);
            if m > 0.0 {
                let coef = -2.0 * self.c * self.sign(i) * m;
                for (gj, xj) in g[..d].iter_mut().zip(self.samples.row(i)) {
                    *gj += coef * xj;
                }
                g[d] += coef;
            }
        }
        g
    }

    /// Generalized Hessian (active-set second derivative).
    fn hessian(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.samples.dim();
        let p = d + 1;
        let mut hm = vec![0.0; p * p];
        for j in 0..d {
            hm[j * p + j] = 1.0;
        }
        hm[d * p + d] = 1e-10;
        let mut z = vec![1.0; p];
        for i in 0..self.samples.len() {
            if self.margin(theta, i) > 0.0 {
                z[..d].copy_from_slice(self.samples.row(i));
                for a in 0..p {
                    for b in 0..p {
                        hm[a * p + b] += 2.0 * self.c * z[a] * z[b];
                    }
                }
            }
        }
        hm
    }
}

pub(crate) struct NewtonOutcome {
    pub theta: Vec<f64>,
    pub trace: Vec<f64>,
}

/// Damped Newton with Armijo backtracking. `converged(f_old, f_new, grad)`
/// decides termination after each accepted step.
pub(crate) fn newton(
    mut theta: Vec<f64>,
    max_iter: usize,
    value: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    hessian: impl Fn(&[f64]) -> Vec<f64>,
    converged: impl Fn(f64, f64, &[f64]) -> bool,
) -> NewtonOutcome {
    let mut f = value(&theta);
    let mut trace = vec![f];
    for _ in 0..max_iter {
        let g = gradient(&theta);
        if g.iter().all(|v| *v == 0.0) {
            break;
        }
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let dir = match solve(hessian(&theta), neg.clone()) {
            Some(d) if d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() < 0.0 => d,
            _ => neg,
        };
        let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let fc = value(&cand);
            if fc <= f + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let f_old = f;
        theta = cand;
        f = fc;
        trace.push(f);
        // no progress left at machine precision
        if f_old - f <= 4.0 * f64::EPSILON * f_old.abs() {
            break;
        }
        if converged(f_old, f, &gradient(&theta)) {
            break;
        }
    }
    NewtonOutcome { theta, trace }
}

pub fn train_svm(train: &Samples, params: &SvmParams) -> Result<SvmModel> {
    train_svm_traced(train, params).map(|(m, _)| m)
}

/// Like [`train_svm`] but also returns the objective after every pass.
pub fn train_svm_traced(train: &Samples, params: &SvmParams) -> Result<(SvmModel, Vec<f64>)> {
    train.require_both_classes()?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidConfig("C must be positive".into()));
    }
    let obj = SvmObjective {
        samples: train,
        c: params.c,
    };
    let d = train.dim();
    let tol = params.tol;
    let out = newton(
        vec![0.0; d + 1],
        params.max_passes,
        |t| obj.value(t),
        |t| obj.gradient(t),
        |t| obj.hessian(t),
        |old, new, _| (old - new).abs() <= tol * old.abs().max(f64::MIN_POSITIVE),
    );
    let model = SvmModel {
        w: out.theta[..d].to_vec(),
        b: out.theta[d],
        c: params.c,
    };
    Ok((model, out.trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair() {
        let s = Samples::new(&[vec![0.0], vec![1.0]], &[0, 1]).unwrap();
        let m = train_svm(&s, &SvmParams::default()).unwrap();
        assert_eq!(m.label(&[0.0]), 0);
        assert_eq!(m.label(&[1.0]), 1);
    }

    #[test]
    fn single_class_rejected() {
        let s = Samples::new(&[vec![0.0], vec![1.0]], &[1, 1]).unwrap();
        assert_eq!(train_svm(&s, &SvmParams::default()), Err(Error::SingleClass));
    }

    #[test]
    fn trace_is_monotone() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 10) as f64 / 10.0, (i % 7) as f64 / 7.0]).collect();
        let y: Vec<u8> = (0..50).map(|i| u8::from(i % 10 + i % 7 > 8)).collect();
        let s = Samples::new(&rows, &y).unwrap();
        let (_, trace) = train_svm_traced(&s, &SvmParams::default()).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
