//! Subset-level accuracy and discrimination coefficients.
//!
//! For a feature subset `S` with complement `S^c`:
//!
//! * accuracy: `I(Y; X_S | A, X_{S^c})`, the information about `Y` lost if
//!   `X_S` is dropped;
//! * discrimination: `SI(Y; X_S, A) * I(X_S; A) * I(X_S; A | Y)`, in bits
//!   cubed. The shared-information factor needs one decomposition solve per
//!   subset, which dominates the cost of a table.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pid::{pid_decompose, PidInput, PidResult, SolverConfig};
use crate::prob::{JointDistribution, Role, SubsetKey, MAX_FEATURES};

/// Hard ceiling on `n` for full tables (2^n decomposition solves).
pub const EXACT_MAX_FEATURES: usize = 20;

/// A joint distribution over `(A, X_0 .. X_{n-1}, Y)` ready for scoring.
///
/// The tensor is stored in that canonical axis order. Several protected
/// variables are merged into one composite attribute first.
#[derive(Clone, Debug)]
pub struct ScoringProblem {
    dist: JointDistribution,
    n: usize,
    solver: SolverConfig,
}

impl ScoringProblem {
    /// Features keep their relative schema order; feature `i` of every
    /// [`SubsetKey`] is the `i`-th variable with role `feature`.
    pub fn new(dist: &JointDistribution, solver: SolverConfig) -> Result<Self> {
        solver.validate()?;
        let schema = dist.schema();
        schema.validate_roles()?;
        let protected: Vec<usize> = schema.with_role(Role::Protected).collect();
        let merged = if protected.len() > 1 {
            let name = protected
                .iter()
                .map(|&a| schema.get(a).name.as_str())
                .collect::<Vec<_>>()
                .join("+");
            dist.merge_axes(&protected, &name, Role::Protected)?
        } else {
            dist.clone()
        };
        let schema = merged.schema();
        let a = schema.with_role(Role::Protected).next().expect("validated");
        let y = schema.with_role(Role::Label).next().expect("validated");
        let features: Vec<usize> = schema.with_role(Role::Feature).collect();
        if features.is_empty() {
            return Err(Error::Schema("no feature variables".into()));
        }
        if features.len() > MAX_FEATURES {
            return Err(Error::Size(format!(
                "{} features exceed the limit of {MAX_FEATURES}",
                features.len()
            )));
        }
        let order: Vec<usize> = std::iter::once(a)
            .chain(features.iter().copied())
            .chain(std::iter::once(y))
            .collect();
        Ok(ScoringProblem {
            dist: merged.permute_axes(&order)?,
            n: features.len(),
            solver,
        })
    }

    /// The canonical `(A, X_0 .. X_{n-1}, Y)` tensor.
    pub fn dist(&self) -> &JointDistribution {
        &self.dist
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn feature_names(&self) -> Vec<&str> {
        (0..self.n).map(|i| self.name(Self::feature_axis(i))).collect()
    }

    pub fn protected_name(&self) -> &str {
        self.name(0)
    }

    pub fn label_name(&self) -> &str {
        self.name(self.n + 1)
    }

    fn name(&self, axis: usize) -> &str {
        &self.dist.schema().get(axis).name
    }

    pub(crate) const fn protected_axis() -> usize {
        0
    }

    pub(crate) const fn feature_axis(i: usize) -> usize {
        i + 1
    }

    pub(crate) fn label_axis(&self) -> usize {
        self.n + 1
    }

    fn axes(&self, key: SubsetKey) -> Vec<usize> {
        key.iter().map(Self::feature_axis).collect()
    }
}

/// Merges the features in `key` into one composite variable (row-major over
/// ascending feature index) at the position of the first merged feature.
/// An empty key inserts a constant variable of cardinality one at the front.
///
/// Feature `i` is the `i`-th variable with role `feature`.
pub fn flatten_subset(dist: &JointDistribution, key: SubsetKey) -> Result<JointDistribution> {
    let features: Vec<usize> = dist.schema().with_role(Role::Feature).collect();
    key.check(features.len())?;
    let axes: Vec<usize> = key.iter().map(|i| features[i]).collect();
    let name = if axes.is_empty() {
        "{}".to_string()
    } else {
        axes.iter()
            .map(|&a| dist.schema().get(a).name.as_str())
            .collect::<Vec<_>>()
            .join("+")
    };
    dist.merge_axes(&axes, &name, Role::Feature)
}

/// `I(Y; X_S | A, X_{S^c})` in bits.
pub fn accuracy_coefficient(prob: &ScoringProblem, key: SubsetKey) -> Result<f64> {
    key.check(prob.n)?;
    if key.is_empty() {
        return Ok(0.0);
    }
    let mut given = vec![ScoringProblem::protected_axis()];
    given.extend(prob.axes(key.complement(prob.n)));
    prob.dist
        .cond_mutual_info_axes(&[prob.label_axis()], &prob.axes(key), &given)
        .map_err(|e| e.in_subset(key))
}

/// The three factors of the discrimination coefficient and their product.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrimination {
    /// `SI(Y; X_S, A)`, bits.
    pub shared: f64,
    /// `I(X_S; A)`, bits.
    pub proxy: f64,
    /// `I(X_S; A | Y)`, bits.
    pub proxy_given_label: f64,
    /// Product of the three, bits cubed.
    pub value: f64,
    /// Decomposition of `I(Y; X_S, A)` with `R1 = X_S`, `R2 = A`.
    pub pid: PidResult,
}

/// `SI(Y; X_S, A) * I(X_S; A) * I(X_S; A | Y)` with all factors.
pub fn discrimination_terms(prob: &ScoringProblem, key: SubsetKey) -> Result<Discrimination> {
    key.check(prob.n)?;
    discrimination_inner(prob, key).map_err(|e| e.in_subset(key))
}

fn discrimination_inner(prob: &ScoringProblem, key: SubsetKey) -> Result<Discrimination> {
    let schema = prob.dist.schema();
    let names = |axes: &[usize]| -> Vec<String> { axes.iter().map(|&a| schema.get(a).name.clone()).collect() };
    let s_axes = prob.axes(key);
    let input = PidInput::from_joint(
        &prob.dist,
        prob.label_name(),
        &names(&s_axes),
        &names(&[ScoringProblem::protected_axis()]),
    )?;
    let pid = pid_decompose(&input, &prob.solver)?;
    let (proxy, proxy_given_label) = if key.is_empty() {
        (0.0, 0.0)
    } else {
        let a = [ScoringProblem::protected_axis()];
        (
            prob.dist.mutual_info_axes(&s_axes, &a)?,
            prob.dist.cond_mutual_info_axes(&s_axes, &a, &[prob.label_axis()])?,
        )
    };
    Ok(Discrimination {
        shared: pid.si,
        proxy,
        proxy_given_label,
        value: pid.si * proxy * proxy_given_label,
        pid,
    })
}

/// `v^D(X_S)` in bits cubed.
pub fn discrimination_coefficient(prob: &ScoringProblem, key: SubsetKey) -> Result<f64> {
    discrimination_terms(prob, key).map(|d| d.value)
}

/// Both coefficients for one subset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientEntry {
    pub acc: f64,
    pub disc: Discrimination,
}

/// Accuracy and discrimination coefficients keyed by feature subset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientTable {
    n: usize,
    entries: BTreeMap<SubsetKey, CoefficientEntry>,
}

impl CoefficientTable {
    pub fn new(n: usize) -> Self {
        CoefficientTable {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every one of the `2^n` subsets is present.
    pub fn is_complete(&self) -> bool {
        self.n < MAX_FEATURES && self.entries.len() as u64 == 1u64 << self.n
    }

    pub fn insert(&mut self, key: SubsetKey, entry: CoefficientEntry) -> Result<()> {
        key.check(self.n)?;
        self.entries.insert(key, entry);
        Ok(())
    }

    pub fn get(&self, key: SubsetKey) -> Option<&CoefficientEntry> {
        self.entries.get(&key)
    }

    pub fn acc(&self, key: SubsetKey) -> Option<f64> {
        self.get(key).map(|e| e.acc)
    }

    pub fn disc(&self, key: SubsetKey) -> Option<f64> {
        self.get(key).map(|e| e.disc.value)
    }

    pub fn pid(&self, key: SubsetKey) -> Option<&PidResult> {
        self.get(key).map(|e| &e.disc.pid)
    }

    /// Entries in ascending bitmask order.
    pub fn iter(&self) -> impl Iterator<Item = (SubsetKey, &CoefficientEntry)> {
        self.entries.iter().map(|(k, e)| (*k, e))
    }
}

/// Computes both coefficients for one subset.
pub fn coefficient_entry(prob: &ScoringProblem, key: SubsetKey) -> Result<CoefficientEntry> {
    Ok(CoefficientEntry {
        acc: accuracy_coefficient(prob, key)?,
        disc: discrimination_terms(prob, key)?,
    })
}

/// Every subset of the `n` features. Subsets are independent and are
/// evaluated according to `exec`; the result does not depend on it.
pub fn coefficient_table(prob: &ScoringProblem, exec: Execution) -> Result<CoefficientTable> {
    if prob.n > EXACT_MAX_FEATURES {
        return Err(Error::Size(format!(
            "a full table over {} features needs 2^{} decomposition solves (limit n = {EXACT_MAX_FEATURES})",
            prob.n, prob.n
        )));
    }
    let keys: Vec<SubsetKey> = SubsetKey::all(prob.n).collect();
    coefficient_table_for(prob, &keys, exec)
}

/// Only the listed subsets (duplicates are computed once).
pub fn coefficient_table_for(
    prob: &ScoringProblem,
    keys: &[SubsetKey],
    exec: Execution,
) -> Result<CoefficientTable> {
    let mut keys = keys.to_vec();
    keys.sort_unstable();
    keys.dedup();
    for key in &keys {
        key.check(prob.n)?;
    }
    let entries = exec.try_map_range(keys.len(), |k| coefficient_entry(prob, keys[k]))?;
    let mut table = CoefficientTable::new(prob.n);
    for (key, entry) in keys.into_iter().zip(entries) {
        table.insert(key, entry)?;
    }
    Ok(table)
}
