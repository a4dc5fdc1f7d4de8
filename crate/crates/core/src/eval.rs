//! Accuracy reports, confusion matrices and accuracy against committee size.

use std::fmt::Write as _;
use std::io::Write;

use ndarray::Array2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledExample, Task};
use crate::embeddings::SentenceMatrix;
use crate::ensemble::{member_outputs, vote_subset, Committee, PerDim};
use crate::error::{Error, Result};
use crate::nn::Scalar;
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    /// Recall of each class; 0 for a class absent from the test set.
    pub per_class_accuracy: Vec<f64>,
    /// Correct predictions over all test examples.
    pub overall_accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
}

/// Report from aligned predictions and true labels.
pub fn evaluate_predictions(
    predictions: &[usize],
    labels: &[usize],
    task: Task,
) -> Result<EvalReport> {
    assert_eq!(predictions.len(), labels.len());
    if labels.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let k = task.class_count();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &y) in predictions.iter().zip(labels) {
        confusion[y][p] += 1;
    }
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                0.0
            } else {
                row[c] as f64 / total as f64
            }
        })
        .collect();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        task,
        per_class_accuracy,
        overall_accuracy: correct as f64 / labels.len() as f64,
        confusion,
        n_test: labels.len(),
    })
}

/// Runs `predict_fn` on every test example and tallies the results.
pub fn evaluate<F>(mut predict_fn: F, test: &[LabeledExample], task: Task) -> Result<EvalReport>
where
    F: FnMut(&LabeledExample) -> Result<usize>,
{
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let predictions = test
        .iter()
        .map(&mut predict_fn)
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = test.iter().map(|e| e.label).collect();
    evaluate_predictions(&predictions, &labels, task)
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Aligned text table, one row per method, accuracies in percent.
pub fn format_table(task: Task, rows: &[(String, &EvalReport)]) -> String {
    let mut header = vec!["Method".to_string()];
    match task {
        Task::Binary => {
            header.extend(
                task.class_names()
                    .into_iter()
                    .map(|c| format!("{c} accuracy, %")),
            );
            header.push("Overall accuracy, %".into());
        }
        Task::MultiClass => {
            header.extend(task.class_names());
            header.push("Overall, %".into());
        }
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            let mut cells = vec![name.clone()];
            cells.extend(
                r.per_class_accuracy
                    .iter()
                    .map(|a| format!("{:.2}", 100.0 * a)),
            );
            cells.push(format!("{:.2}", 100.0 * r.overall_accuracy));
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            std::iter::once(&header)
                .chain(&body)
                .map(|row| row[i].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&body) {
        for (i, cell) in row.iter().enumerate() {
            let sep = if i == 0 { "" } else { " | " };
            if i == 0 {
                let _ = write!(out, "{sep}{cell:<w$}", w = widths[i]);
            } else {
                let _ = write!(out, "{sep}{cell:>w$}", w = widths[i]);
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub accuracy_mean: f64,
    /// Population standard deviation over the evaluated subsets.
    pub accuracy_std: f64,
    pub subsets: usize,
}

/// `n choose k`, saturating at `cap`.
fn choose_capped(n: usize, k: usize, cap: usize) -> usize {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > cap as u128 {
            return cap + 1;
        }
    }
    c as usize
}

/// All k-subsets of `0..n` in lexicographic order.
fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Accuracy against committee size from precomputed member outputs. For each
/// `k`, every k-subset is evaluated when there are at most `trials` of them
/// (so the full committee is evaluated exactly once); otherwise `trials`
/// seeded random subsets are drawn.
pub fn committee_curve_from_outputs(
    outputs: &[Array2<f64>],
    labels: &[usize],
    task: Task,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let n = outputs.len();
    let base = rng::derive_seed(seed, stream::CURVE);
    sizes
        .iter()
        .map(|&k| {
            if k > n {
                return Err(Error::SizeExceedsCommittee {
                    size: k,
                    members: n,
                });
            }
            if k == 0 {
                return Err(Error::InvalidConfig(
                    "committee size must be at least 1".into(),
                ));
            }
            let subsets = if choose_capped(n, k, trials.max(1)) <= trials.max(1) {
                all_subsets(n, k)
            } else {
                let mut r = rng::seeded(rng::derive_seed(base, k as u64));
                (0..trials)
                    .map(|_| {
                        let mut s = index::sample(&mut r, n, k).into_vec();
                        s.sort_unstable();
                        s
                    })
                    .collect()
            };
            let accs = subsets
                .iter()
                .map(|s| {
                    Ok(
                        evaluate_predictions(&vote_subset(outputs, s), labels, task)?
                            .overall_accuracy,
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64;
            Ok(CurvePoint {
                k,
                accuracy_mean: mean,
                accuracy_std: var.sqrt(),
                subsets: accs.len(),
            })
        })
        .collect()
}

/// Accuracy against committee size on a prepared test set.
pub fn committee_curve<T: Scalar>(
    committee: &Committee<T>,
    test: &PerDim<Vec<SentenceMatrix<T>>>,
    labels: &[usize],
    task: Task,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if let Some(&k) = sizes.iter().find(|&&k| k > committee.len()) {
        return Err(Error::SizeExceedsCommittee {
            size: k,
            members: committee.len(),
        });
    }
    let outputs = member_outputs(committee, test, 1)?;
    committee_curve_from_outputs(&outputs, labels, task, sizes, trials, seed)
}

/// CSV `k,accuracy_mean,accuracy_std`.
pub fn write_curve_csv<W: Write>(mut out: W, curve: &[CurvePoint]) -> Result<()> {
    writeln!(out, "k,accuracy_mean,accuracy_std")?;
    for p in curve {
        writeln!(out, "{},{},{}", p.k, p.accuracy_mean, p.accuracy_std)?;
    }
    Ok(())
}
