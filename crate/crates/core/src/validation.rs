//! Plug-in Bayes classifiers on a known joint, their error and bias, and
//! the one-feature-removed sweep.

use serde::{Deserialize, Serialize};

use crate::coefficients::ScoringProblem;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pid::SolverConfig;
use crate::prob::{JointDistribution, Role, SubsetKey};

/// Stand-in for an exactly zero denominator in the bias divergence.
pub const BIAS_EPSILON: f64 = 1e-9;

/// Canonical `(A, X.., Y)` tensor and feature count.
fn canonical(dist: &JointDistribution) -> Result<(JointDistribution, usize)> {
    let prob = ScoringProblem::new(dist, SolverConfig::default())?;
    let n = prob.n();
    Ok((prob.dist().clone(), n))
}

fn first_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `argmax_y P(y | x_S)` tabulated over every configuration of `x_S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PluginClassifier {
    /// Input features in ascending feature order.
    pub features: Vec<String>,
    pub cardinalities: Vec<usize>,
    pub labels: usize,
    /// Predicted label per input configuration (row-major over `features`).
    pub decision: Vec<usize>,
    /// `P(y | x_S)` per configuration; the label marginal where `x_S` has
    /// probability zero.
    pub predictive: Vec<Vec<f64>>,
}

impl PluginClassifier {
    pub fn predict(&self, inputs: &[usize]) -> usize {
        let idx = inputs
            .iter()
            .zip(&self.cardinalities)
            .fold(0, |acc, (&v, &k)| acc * k + v);
        self.decision[idx]
    }

    /// Axes of this classifier's inputs in a canonical tensor.
    fn axes_in(&self, dist: &JointDistribution) -> Result<Vec<usize>> {
        let schema = dist.schema();
        self.features
            .iter()
            .zip(&self.cardinalities)
            .map(|(name, &k)| {
                let axis = schema.index_of(name)?;
                let var = schema.get(axis);
                if var.role != Role::Feature || var.cardinality != k {
                    return Err(Error::Schema(format!(
                        "classifier input {name:?} does not match the distribution"
                    )));
                }
                Ok(axis)
            })
            .collect()
    }
}

/// Bayes plug-in classifier on the features in `key` (indices into the
/// features of `dist` in schema order). Ties go to the smallest label; unseen
/// inputs predict the overall majority label.
pub fn bayes_classifier(dist: &JointDistribution, key: SubsetKey) -> Result<PluginClassifier> {
    let (canon, n) = canonical(dist)?;
    key.check(n)?;
    if key.is_empty() {
        return Err(Error::Argument("classifier needs at least one feature".into()));
    }
    let schema = canon.schema();
    let axes: Vec<usize> = key.iter().map(|i| i + 1).collect();
    let y = n + 1;
    let labels = schema.get(y).cardinality;
    let mut with_label = axes.clone();
    with_label.push(y);
    let table = canon.marginal_table(&with_label);
    let prior = canon.marginal_table(&[y]);
    let majority = first_argmax(&prior);

    let mut decision = Vec::new();
    let mut predictive = Vec::new();
    for row in table.chunks(labels) {
        let mass: f64 = row.iter().sum();
        if mass > 0.0 {
            decision.push(first_argmax(row));
            predictive.push(row.iter().map(|p| p / mass).collect());
        } else {
            decision.push(majority);
            predictive.push(prior.clone());
        }
    }
    Ok(PluginClassifier {
        features: axes.iter().map(|&a| schema.get(a).name.clone()).collect(),
        cardinalities: axes.iter().map(|&a| schema.get(a).cardinality).collect(),
        labels,
        decision,
        predictive,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `P(Yhat != Y)`.
    pub error_01: f64,
    /// `E[-log2 P(Y | X_S)]` under the classifier's predictive distribution.
    pub cross_entropy: f64,
}

pub fn classifier_error(clf: &PluginClassifier, dist: &JointDistribution) -> Result<ErrorMetrics> {
    let (canon, n) = canonical(dist)?;
    let mut axes = clf.axes_in(&canon)?;
    if canon.schema().get(n + 1).cardinality != clf.labels {
        return Err(Error::Schema("label cardinality differs from the classifier's".into()));
    }
    axes.push(n + 1);
    let table = canon.marginal_table(&axes);
    let mut error_01 = 0.0;
    let mut cross_entropy = 0.0;
    for (c, row) in table.chunks(clf.labels).enumerate() {
        for (y, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            if clf.decision[c] != y {
                error_01 += p;
            }
            cross_entropy -= p * clf.predictive[c][y].log2();
        }
    }
    Ok(ErrorMetrics {
        error_01,
        cross_entropy,
    })
}

/// `P(Yhat = y | A = a)` for every `a`, as rows.
fn prediction_given_a(clf: &PluginClassifier, dist: &JointDistribution) -> Result<Vec<Vec<f64>>> {
    let (canon, _) = canonical(dist)?;
    let mut axes = vec![0];
    axes.extend(clf.axes_in(&canon)?);
    let table = canon.marginal_table(&axes);
    let configs = clf.decision.len();
    table
        .chunks(configs)
        .enumerate()
        .map(|(a, row)| {
            let mass: f64 = row.iter().sum();
            if mass <= 0.0 {
                return Err(Error::DegenerateEvidence(format!(
                    "{} = {a}",
                    canon.schema().get(0).name
                )));
            }
            let mut out = vec![0.0; clf.labels];
            for (c, &p) in row.iter().enumerate() {
                out[clf.decision[c]] += p / mass;
            }
            Ok(out)
        })
        .collect()
}

/// `KL(P || Q)` in bits; zero cells of `Q` under positive `P` use
/// [`BIAS_EPSILON`].
fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / if qi > 0.0 { qi } else { BIAS_EPSILON }).log2())
        .sum()
}

/// `KL(P(Yhat | A=0) || P(Yhat | A=1))` in bits. Needs a binary protected
/// attribute; see [`bias_kl_matrix`] otherwise.
pub fn bias_kl(clf: &PluginClassifier, dist: &JointDistribution) -> Result<f64> {
    let rows = prediction_given_a(clf, dist)?;
    if rows.len() != 2 {
        return Err(Error::UnsupportedMetric(format!(
            "bias_kl needs a binary protected attribute, got {} levels; use bias_kl_matrix",
            rows.len()
        )));
    }
    Ok(kl_bits(&rows[0], &rows[1]))
}

/// Entry `[a][b]` is `KL(P(Yhat | A=a) || P(Yhat | A=b))` in bits.
pub fn bias_kl_matrix(clf: &PluginClassifier, dist: &JointDistribution) -> Result<Vec<Vec<f64>>> {
    let rows = prediction_given_a(clf, dist)?;
    Ok(rows.iter().map(|p| rows.iter().map(|q| kl_bits(p, q)).collect()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    /// Removed feature; `None` for the all-features baseline.
    pub removed: Option<String>,
    pub error_01: f64,
    pub cross_entropy_bits: f64,
    pub bias_kl_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub features: Vec<String>,
    pub baseline: SweepEntry,
    /// Entry `i` drops feature `i`.
    pub removals: Vec<SweepEntry>,
}

impl SweepReport {
    /// Feature whose removal gives the lowest bias (first on ties).
    pub fn argmin_bias(&self) -> usize {
        let bias: Vec<f64> = self.removals.iter().map(|e| -e.bias_kl_bits).collect();
        first_argmax(&bias)
    }

    /// Feature whose removal raises the 0-1 error the most (first on ties).
    pub fn argmax_error_increase(&self) -> usize {
        let err: Vec<f64> = self.removals.iter().map(|e| e.error_01).collect();
        first_argmax(&err)
    }

    /// Baseline row first (empty `removed_feature`), then one row per removal.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["removed_feature", "error_01", "cross_entropy_bits", "bias_kl_bits"])?;
        for e in std::iter::once(&self.baseline).chain(&self.removals) {
            w.write_record([
                e.removed.clone().unwrap_or_default(),
                format!("{:.16e}", e.error_01),
                format!("{:.16e}", e.cross_entropy_bits),
                format!("{:.16e}", e.bias_kl_bits),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

fn evaluate(dist: &JointDistribution, key: SubsetKey, removed: Option<String>) -> Result<SweepEntry> {
    let clf = bayes_classifier(dist, key)?;
    let err = classifier_error(&clf, dist)?;
    Ok(SweepEntry {
        removed,
        error_01: err.error_01,
        cross_entropy_bits: err.cross_entropy,
        bias_kl_bits: bias_kl(&clf, dist)?,
    })
}

/// Baseline on all features, then the Bayes plug-in with each feature
/// removed in turn.
pub fn removal_sweep(dist: &JointDistribution, exec: Execution) -> Result<SweepReport> {
    let (canon, n) = canonical(dist)?;
    if n < 2 {
        return Err(Error::Argument(format!("removal sweep needs at least 2 features, got {n}")));
    }
    let features: Vec<String> = (1..=n).map(|a| canon.schema().get(a).name.clone()).collect();
    let full = SubsetKey::full(n);
    let mut entries = exec.try_map_range(n + 1, |i| {
        if i == 0 {
            evaluate(&canon, full, None)
        } else {
            evaluate(&canon, full.without(i - 1), Some(features[i - 1].clone()))
        }
    })?;
    let baseline = entries.remove(0);
    Ok(SweepReport {
        features,
        baseline,
        removals: entries,
    })
}
