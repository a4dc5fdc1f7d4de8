use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::features::{feature_matrix, FeatureVector};
use crate::error::{Error, Result};

/// Multinomial logistic regression. Training minimizes
/// `½‖W‖² + C·Σᵢ CE(softmax(W xᵢ + b), yᵢ)`; the bias is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// One row per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegOptions {
    pub c: f64,
    pub max_iterations: usize,
    /// Stop once the Euclidean norm of the full gradient falls below this.
    pub tolerance: f64,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        LogRegOptions {
            c: 0.01,
            max_iterations: 20_000,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogRegFit {
    pub model: LogRegModel,
    /// False when the iteration cap was reached first.
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective after each accepted step, starting from the initial point.
    pub objective_trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
/// Relative slack on objective comparisons for the derivative-based test.
const ROUNDING: f64 = 1e-12;

/// Parameters as dense arrays.
#[derive(Debug, Clone)]
struct Params {
    w: Array2<f64>,
    b: Array1<f64>,
}

impl Params {
    fn norm_sq(&self) -> f64 {
        self.w.iter().chain(&self.b).map(|x| x * x).sum()
    }

    fn axpy(&self, alpha: f64, dir: &Params) -> Params {
        Params {
            w: &self.w + &(&dir.w * alpha),
            b: &self.b + &(&dir.b * alpha),
        }
    }

    fn dot(&self, other: &Params) -> f64 {
        let w: f64 = self.w.iter().zip(&other.w).map(|(a, b)| a * b).sum();
        let b: f64 = self.b.iter().zip(&other.b).map(|(a, b)| a * b).sum();
        w + b
    }
}

fn objective(p: &Params, x: ArrayView2<f64>, y: &[usize], c: f64) -> f64 {
    let scores = x.dot(&p.w.t()) + &p.b;
    let ce: f64 = scores
        .rows()
        .into_iter()
        .zip(y)
        .map(|(s, &label)| {
            let max = s.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - s[label]
        })
        .sum();
    0.5 * p.w.iter().map(|v| v * v).sum::<f64>() + c * ce
}

fn gradient(p: &Params, x: ArrayView2<f64>, y: &[usize], c: f64) -> Params {
    let mut d = x.dot(&p.w.t()) + &p.b;
    for (mut row, &label) in d.rows_mut().into_iter().zip(y) {
        crate::nn::softmax_in_place(row.view_mut());
        row[label] -= 1.0;
    }
    Params {
        w: &p.w + &(d.t().dot(&x) * c),
        b: d.sum_axis(Axis(0)) * c,
    }
}

/// Full-batch gradient descent with backtracking. A step is accepted under the
/// Armijo condition, or under its approximate-Wolfe derivative form once the
/// objective change is below rounding. The trial step is the Barzilai-Borwein
/// estimate from the previous iteration.
pub fn train_logreg(
    features: &[FeatureVector],
    labels: &[usize],
    options: LogRegOptions,
) -> Result<LogRegFit> {
    assert_eq!(features.len(), labels.len());
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InvalidConfig(
            "logistic regression needs at least two classes".into(),
        ));
    }
    let classes = distinct[distinct.len() - 1] + 1;
    let x = feature_matrix(features)?;
    let (x, c) = (x.view(), options.c);

    let mut p = Params {
        w: Array2::zeros((classes, x.ncols())),
        b: Array1::zeros(classes),
    };
    let mut f = objective(&p, x, labels, c);
    let mut g = gradient(&p, x, labels, c);
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = g.norm_sq().sqrt() < options.tolerance;

    while !converged && iterations < options.max_iterations {
        let g_sq = g.norm_sq();
        let mut accepted = None;
        while step >= 1e-20 {
            let next = p.axpy(-step, &g);
            let f_next = objective(&next, x, labels, c);
            if f_next <= f - ARMIJO * step * g_sq {
                accepted = Some((next, f_next, None));
                break;
            }
            // Close to the optimum the decrease drops below the rounding error
            // of f; fall back to the derivative form of the same condition.
            if f_next <= f + ROUNDING * f.abs() {
                let g_next = gradient(&next, x, labels, c);
                if g_next.dot(&g) >= -(1.0 - 2.0 * ARMIJO) * g_sq {
                    accepted = Some((next, f_next, Some(g_next)));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, f_next, g_next)) = accepted else {
            break;
        };
        let g_next = g_next.unwrap_or_else(|| gradient(&next, x, labels, c));
        let s = next.axpy(-1.0, &p);
        let dy = g_next.axpy(-1.0, &g);
        let sy = s.dot(&dy);
        step = if sy > 0.0 {
            sy / dy.norm_sq()
        } else {
            step * 2.0
        };

        p = next;
        f = f_next;
        g = g_next;
        trace.push(f);
        iterations += 1;
        converged = g.norm_sq().sqrt() < options.tolerance;
    }

    Ok(LogRegFit {
        model: LogRegModel {
            weights: p.w.rows().into_iter().map(|r| r.to_vec()).collect(),
            biases: p.b.to_vec(),
            c,
        },
        converged,
        iterations,
        gradient_norm: g.norm_sq().sqrt(),
        objective_trace: trace,
    })
}

impl LogRegModel {
    pub fn zeros(classes: usize, dim: usize, c: f64) -> Self {
        LogRegModel {
            weights: vec![vec![0.0; dim]; classes],
            biases: vec![0.0; classes],
            c,
        }
    }

    pub fn class_count(&self) -> usize {
        self.biases.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    fn params(&self) -> Params {
        let dim = self.feature_dim();
        let flat: Vec<f64> = self.weights.iter().flatten().copied().collect();
        Params {
            w: Array2::from_shape_vec((self.class_count(), dim), flat)
                .expect("weight rows have equal length"),
            b: Array1::from(self.biases.clone()),
        }
    }

    /// `W x + b`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }

    /// Highest-scoring class, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        crate::nn::argmax_row(self.scores(x).into_iter())
    }

    /// Training objective at the current parameters.
    pub fn objective(&self, features: &[FeatureVector], labels: &[usize]) -> Result<f64> {
        let x = feature_matrix(features)?;
        Ok(objective(&self.params(), x.view(), labels, self.c))
    }

    /// Gradient of the objective, flattened as weights row-major then biases.
    pub fn gradient(&self, features: &[FeatureVector], labels: &[usize]) -> Result<Vec<f64>> {
        let x = feature_matrix(features)?;
        let g = gradient(&self.params(), x.view(), labels, self.c);
        Ok(g.w.iter().chain(&g.b).copied().collect())
    }
}
