//! Dense discrete joint distributions and the Shannon quantities computed
//! from them.
//!
//! All information quantities are in bits. Zero cells contribute nothing
//! (`0 log 0 = 0`). Results that land in `[-NEGATIVE_SLACK, 0)` through
//! cancellation are clamped to zero; anything more negative is reported as
//! [`Error::NumericalIntegrity`].

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiply a value in bits by this to get nats.
pub const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

/// Largest negative rounding residue silently clamped to zero.
pub const NEGATIVE_SLACK: f64 = 1e-12;

/// Tolerance on the total mass of a joint distribution.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Feature,
    Protected,
    Label,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Feature => "feature",
            Role::Protected => "protected",
            Role::Label => "label",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
    pub role: Role,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: usize, role: Role) -> Self {
        Variable {
            name: name.into(),
            cardinality,
            role,
        }
    }
}

/// Ordered list of named discrete variables.
///
/// Construction only checks structural sanity (unique names, non-zero
/// alphabets). Cardinality-1 variables are allowed so that an empty feature
/// subset can be represented as a constant; the stricter role rules for
/// scoring problems live in [`VariableSchema::validate_roles`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Variable>", into = "Vec<Variable>")]
pub struct VariableSchema {
    variables: Vec<Variable>,
}

impl TryFrom<Vec<Variable>> for VariableSchema {
    type Error = Error;

    fn try_from(variables: Vec<Variable>) -> Result<Self> {
        VariableSchema::new(variables)
    }
}

impl From<VariableSchema> for Vec<Variable> {
    fn from(schema: VariableSchema) -> Self {
        schema.variables
    }
}

impl VariableSchema {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Schema("schema has no variables".into()));
        }
        let mut seen = HashSet::new();
        for v in &variables {
            if v.name.is_empty() {
                return Err(Error::Schema("empty variable name".into()));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable name {:?}", v.name)));
            }
            if v.cardinality == 0 {
                return Err(Error::Schema(format!("variable {:?} has cardinality 0", v.name)));
            }
        }
        Ok(VariableSchema { variables })
    }

    /// Checks the scoring-problem rules: exactly one label, at least one
    /// protected attribute, every alphabet of size at least two.
    pub fn validate_roles(&self) -> Result<()> {
        let labels = self.with_role(Role::Label).count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one label variable, found {labels}"
            )));
        }
        if self.with_role(Role::Protected).next().is_none() {
            return Err(Error::Schema("no protected variable".into()));
        }
        if let Some(v) = self.variables.iter().find(|v| v.cardinality < 2) {
            return Err(Error::Schema(format!(
                "variable {:?} has cardinality {} (need at least 2)",
                v.name, v.cardinality
            )));
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn get(&self, axis: usize) -> &Variable {
        &self.variables[axis]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown variable {name:?}")))
    }

    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.index_of(n.as_ref())).collect()
    }

    /// Axes with the given role, in schema order.
    pub fn with_role(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(move |(_, v)| v.role == role)
            .map(|(i, _)| i)
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    /// Number of cells in the full tensor; `None` on overflow.
    pub fn cell_count(&self) -> Option<usize> {
        self.variables
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.cardinality))
    }

    /// Row-major strides (last variable fastest).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.variables.len()];
        for i in (0..self.variables.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.variables[i + 1].cardinality;
        }
        strides
    }
}

/// Bitmask over feature indices `0..n`. The protected attribute and the label
/// are never members.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetKey(u64);

/// Widest feature set a [`SubsetKey`] can address.
pub const MAX_FEATURES: usize = 64;

impl SubsetKey {
    pub const EMPTY: SubsetKey = SubsetKey(0);

    /// Validates that no bit at or beyond `n` is set.
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        let key = SubsetKey(bits);
        key.check(n)?;
        Ok(key)
    }

    pub const fn from_bits_unchecked(bits: u64) -> Self {
        SubsetKey(bits)
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_FEATURES, "at most {MAX_FEATURES} features");
        if n == MAX_FEATURES {
            SubsetKey(u64::MAX)
        } else {
            SubsetKey((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_FEATURES);
        SubsetKey(1 << i)
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        indices
            .into_iter()
            .fold(SubsetKey::EMPTY, |k, i| k.with(i))
    }

    pub fn check(self, n: usize) -> Result<()> {
        if n < MAX_FEATURES && self.0 >> n != 0 {
            return Err(Error::Argument(format!(
                "subset {self} references features beyond n = {n}"
            )));
        }
        Ok(())
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, i: usize) -> bool {
        i < MAX_FEATURES && self.0 >> i & 1 == 1
    }

    #[must_use]
    pub fn with(self, i: usize) -> Self {
        SubsetKey(self.0 | 1 << i)
    }

    #[must_use]
    pub fn without(self, i: usize) -> Self {
        SubsetKey(self.0 & !(1 << i))
    }

    pub const fn is_subset_of(self, other: SubsetKey) -> bool {
        self.0 & !other.0 == 0
    }

    /// Complement within `0..n`.
    #[must_use]
    pub fn complement(self, n: usize) -> Self {
        SubsetKey(!self.0 & SubsetKey::full(n).0)
    }

    /// Member indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// Every subset of `0..n`, ordered by bitmask value.
    pub fn all(n: usize) -> impl Iterator<Item = SubsetKey> {
        assert!(n < MAX_FEATURES);
        (0..1u64 << n).map(SubsetKey)
    }
}

impl fmt::Display for SubsetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

/// Dense probability tensor over the variables of a schema, row-major in
/// schema order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint", into = "RawJoint")]
pub struct JointDistribution {
    schema: VariableSchema,
    probs: Vec<f64>,
}

/// Wire form of a joint distribution: `{schema: [...], probs: [...]}`.
#[derive(Serialize, Deserialize)]
struct RawJoint {
    schema: VariableSchema,
    probs: Vec<f64>,
}

impl TryFrom<RawJoint> for JointDistribution {
    type Error = Error;

    fn try_from(raw: RawJoint) -> Result<Self> {
        JointDistribution::new(raw.schema, raw.probs)
    }
}

impl From<JointDistribution> for RawJoint {
    fn from(d: JointDistribution) -> Self {
        RawJoint {
            schema: d.schema,
            probs: d.probs,
        }
    }
}

impl JointDistribution {
    /// Validates shape, non-negativity and total mass (within
    /// [`NORMALIZATION_TOL`]).
    pub fn new(schema: VariableSchema, probs: Vec<f64>) -> Result<Self> {
        let cells = schema
            .cell_count()
            .ok_or_else(|| Error::Size("tensor size overflows".into()))?;
        if probs.len() != cells {
            return Err(Error::Schema(format!(
                "tensor has {} entries but the schema implies {cells}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::Schema(format!("entry {i} is {p} (must be finite and >= 0)")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Schema(format!("probabilities sum to {total}, not 1")));
        }
        Ok(JointDistribution { schema, probs })
    }

    /// Builds a distribution from non-negative weights, dividing by their sum.
    pub fn from_weights(schema: VariableSchema, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Argument(format!("weights sum to {total}")));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        JointDistribution::new(schema, probs)
    }

    pub fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_parts(self) -> (VariableSchema, Vec<f64>) {
        (self.schema, self.probs)
    }

    /// Probability of one fully specified cell.
    pub fn prob_at(&self, coords: &[usize]) -> f64 {
        debug_assert_eq!(coords.len(), self.schema.len());
        let idx = coords
            .iter()
            .zip(self.schema.strides())
            .map(|(c, s)| c * s)
            .sum::<usize>();
        self.probs[idx]
    }

    /// Marginal table over `axes` (which must be distinct), row-major in the
    /// order given.
    pub fn marginal_table(&self, axes: &[usize]) -> Vec<f64> {
        let cards = self.schema.cardinalities();
        let mut out_strides = vec![0usize; cards.len()];
        let mut size = 1usize;
        for &a in axes.iter().rev() {
            out_strides[a] = size;
            size *= cards[a];
        }
        let mut out = vec![0.0; size];
        let mut coords = vec![0usize; cards.len()];
        let mut target = 0usize;
        for &p in &self.probs {
            out[target] += p;
            // odometer increment, keeping `target` in sync
            for axis in (0..cards.len()).rev() {
                coords[axis] += 1;
                target += out_strides[axis];
                if coords[axis] < cards[axis] {
                    break;
                }
                target -= out_strides[axis] * cards[axis];
                coords[axis] = 0;
            }
        }
        out
    }

    /// Sums out every variable not named in `keep`; schema order is preserved.
    pub fn marginalize<S: AsRef<str>>(&self, keep: &[S]) -> Result<JointDistribution> {
        if keep.is_empty() {
            return Err(Error::Argument("marginalize needs at least one variable".into()));
        }
        let mut axes = self.schema.indices_of(keep)?;
        axes.sort_unstable();
        axes.dedup();
        self.marginalize_axes(&axes)
    }

    /// Marginal over `axes`, ordered as given.
    pub fn marginalize_axes(&self, axes: &[usize]) -> Result<JointDistribution> {
        check_distinct(axes, self.schema.len())?;
        let vars = axes.iter().map(|&a| self.schema.get(a).clone()).collect();
        Ok(JointDistribution {
            schema: VariableSchema::new(vars)?,
            probs: self.marginal_table(axes),
        })
    }

    /// Slices at the evidence values and renormalizes over the remaining
    /// variables.
    pub fn condition<S: AsRef<str>>(&self, evidence: &[(S, usize)]) -> Result<JointDistribution> {
        let mut fixed: Vec<Option<usize>> = vec![None; self.schema.len()];
        for (name, value) in evidence {
            let axis = self.schema.index_of(name.as_ref())?;
            let card = self.schema.get(axis).cardinality;
            if *value >= card {
                return Err(Error::Schema(format!(
                    "value {value} out of range for {:?} (cardinality {card})",
                    name.as_ref()
                )));
            }
            match fixed[axis] {
                Some(prev) if prev != *value => {
                    return Err(Error::Argument(format!(
                        "conflicting evidence for {:?}",
                        name.as_ref()
                    )))
                }
                _ => fixed[axis] = Some(*value),
            }
        }
        let remaining: Vec<usize> = (0..self.schema.len()).filter(|&a| fixed[a].is_none()).collect();
        if remaining.is_empty() {
            return Err(Error::Argument("evidence covers every variable".into()));
        }
        let strides = self.schema.strides();
        let cards = self.schema.cardinalities();
        let mut out = vec![0.0; remaining.iter().map(|&a| cards[a]).product()];
        for (idx, &p) in self.probs.iter().enumerate() {
            let mut target = 0usize;
            let mut matches = true;
            for axis in 0..cards.len() {
                let c = idx / strides[axis] % cards[axis];
                match fixed[axis] {
                    Some(v) if v != c => {
                        matches = false;
                        break;
                    }
                    Some(_) => {}
                    None => target = target * cards[axis] + c,
                }
            }
            if matches {
                out[target] += p;
            }
        }
        let mass: f64 = out.iter().sum();
        if mass <= 0.0 {
            let desc = evidence
                .iter()
                .map(|(n, v)| format!("{}={v}", n.as_ref()))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::DegenerateEvidence(format!("{{{desc}}}")));
        }
        out.iter_mut().for_each(|p| *p /= mass);
        let vars = remaining.iter().map(|&a| self.schema.get(a).clone()).collect();
        Ok(JointDistribution {
            schema: VariableSchema::new(vars)?,
            probs: out,
        })
    }

    /// Merges `axes` (in the given order, row-major) into one composite
    /// variable placed at the position of the smallest merged axis. With no
    /// axes, a constant cardinality-1 variable is inserted at the front.
    /// Probabilities are carried over cell for cell.
    pub fn merge_axes(&self, axes: &[usize], name: &str, role: Role) -> Result<JointDistribution> {
        check_distinct(axes, self.schema.len())?;
        let cards = self.schema.cardinalities();
        let composite_card: usize = axes.iter().map(|&a| cards[a]).product();
        let anchor = axes.iter().copied().min();
        let composite = Variable::new(name, composite_card, role);

        // new layout: old axes with the merged ones replaced by the composite
        let mut layout: Vec<Option<usize>> = Vec::with_capacity(cards.len() + 1);
        if anchor.is_none() {
            layout.push(None);
        }
        for a in 0..cards.len() {
            if Some(a) == anchor {
                layout.push(None);
            } else if !axes.contains(&a) {
                layout.push(Some(a));
            }
        }
        let vars: Vec<Variable> = layout
            .iter()
            .map(|slot| match slot {
                Some(a) => self.schema.get(*a).clone(),
                None => composite.clone(),
            })
            .collect();
        let schema = VariableSchema::new(vars)?;
        let new_strides = schema.strides();
        let old_strides = self.schema.strides();

        let mut probs = vec![0.0; self.probs.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            let coord = |a: usize| idx / old_strides[a] % cards[a];
            let composite_value = axes.iter().fold(0, |acc, &a| acc * cards[a] + coord(a));
            let target: usize = layout
                .iter()
                .zip(&new_strides)
                .map(|(slot, s)| match slot {
                    Some(a) => coord(*a) * s,
                    None => composite_value * s,
                })
                .sum();
            probs[target] = p;
        }
        Ok(JointDistribution { schema, probs })
    }

    /// Reorders the tensor so that axis `order[k]` becomes axis `k`.
    pub fn permute_axes(&self, order: &[usize]) -> Result<JointDistribution> {
        if order.len() != self.schema.len() {
            return Err(Error::Argument("permutation must name every axis".into()));
        }
        self.marginalize_axes(order)
    }

    pub fn entropy<S: AsRef<str>>(&self, vars: &[S]) -> Result<f64> {
        let axes = self.schema.indices_of(vars)?;
        Ok(self.entropy_axes(&axes))
    }

    /// Joint entropy of the variables on `axes`; the empty set has entropy 0.
    pub fn entropy_axes(&self, axes: &[usize]) -> f64 {
        let mut axes = axes.to_vec();
        axes.sort_unstable();
        axes.dedup();
        if axes.is_empty() {
            return 0.0;
        }
        if axes.len() == self.schema.len() {
            return entropy_of(&self.probs);
        }
        entropy_of(&self.marginal_table(&axes))
    }

    pub fn mutual_info<S: AsRef<str>>(&self, a: &[S], b: &[S]) -> Result<f64> {
        let a = self.schema.indices_of(a)?;
        let b = self.schema.indices_of(b)?;
        self.mutual_info_axes(&a, &b)
    }

    /// `I(A;B) = H(A) + H(B) - H(A,B)`.
    pub fn mutual_info_axes(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Argument("mutual information needs non-empty sets".into()));
        }
        self.cond_mutual_info_axes(a, b, &[])
    }

    pub fn cond_mutual_info<S: AsRef<str>>(&self, a: &[S], b: &[S], c: &[S]) -> Result<f64> {
        let a = self.schema.indices_of(a)?;
        let b = self.schema.indices_of(b)?;
        let c = self.schema.indices_of(c)?;
        self.cond_mutual_info_axes(&a, &b, &c)
    }

    /// `I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)`; `C` may be empty.
    pub fn cond_mutual_info_axes(&self, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Argument(
                "conditional mutual information needs non-empty A and B".into(),
            ));
        }
        check_disjoint(&[a, b, c])?;
        let join = |sets: &[&[usize]]| sets.concat();
        let value = self.entropy_axes(&join(&[a, c])) + self.entropy_axes(&join(&[b, c]))
            - self.entropy_axes(&join(&[a, b, c]))
            - self.entropy_axes(c);
        clamp_nonnegative("mutual information", value)
    }
}

/// Shannon entropy in bits of a (not necessarily normalized) mass vector.
pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Applies the clamping rule for quantities that are non-negative in exact
/// arithmetic.
pub fn clamp_nonnegative(quantity: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -NEGATIVE_SLACK {
        Ok(0.0)
    } else {
        Err(Error::NumericalIntegrity { quantity, value })
    }
}

fn check_distinct(axes: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    for &a in axes {
        if a >= len {
            return Err(Error::Schema(format!("axis {a} out of range")));
        }
        if std::mem::replace(&mut seen[a], true) {
            return Err(Error::Argument(format!("axis {a} listed twice")));
        }
    }
    Ok(())
}

fn check_disjoint(sets: &[&[usize]]) -> Result<()> {
    let mut seen = HashSet::new();
    for set in sets {
        for &a in *set {
            if !seen.insert(a) {
                return Err(Error::Argument(format!(
                    "variable sets overlap (axis {a} appears more than once)"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn schema(cards: &[usize]) -> VariableSchema {
        VariableSchema::new(
            cards
                .iter()
                .enumerate()
                .map(|(i, &c)| Variable::new(format!("V{i}"), c, Role::Feature))
                .collect(),
        )
        .unwrap()
    }

    fn xy(probs: &[f64]) -> JointDistribution {
        let s = VariableSchema::new(vec![
            Variable::new("X", 2, Role::Feature),
            Variable::new("Y", 2, Role::Label),
        ])
        .unwrap();
        JointDistribution::new(s, probs.to_vec()).unwrap()
    }

    #[test]
    fn marginalize_examples() {
        let u = xy(&[0.25; 4]);
        assert_eq!(u.marginalize(&["X"]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(u.marginalize(&["X", "Y"]).unwrap(), u);
        let p = xy(&[0.1, 0.2, 0.3, 0.4]);
        let m = p.marginalize(&["X"]).unwrap();
        assert_abs_diff_eq!(m.probs()[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m.probs()[1], 0.7, epsilon = 1e-15);
        // original order preserved regardless of argument order
        let m = p.marginalize(&["Y", "X"]).unwrap();
        assert_eq!(m, p);
        assert!(matches!(p.marginalize(&["Z"]), Err(Error::Schema(_))));
    }

    #[test]
    fn condition_examples() {
        let indep = xy(&[0.3 * 0.4, 0.3 * 0.6, 0.7 * 0.4, 0.7 * 0.6]);
        let c = indep.condition(&[("X", 0)]).unwrap();
        assert_abs_diff_eq!(c.probs()[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(c.probs()[1], 0.6, epsilon = 1e-12);

        let copy = xy(&[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(copy.condition(&[("X", 1)]).unwrap().probs(), &[0.0, 1.0]);

        let point = xy(&[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            point.condition(&[("X", 1)]),
            Err(Error::DegenerateEvidence(_))
        ));
        assert!(matches!(point.condition(&[("Q", 1)]), Err(Error::Schema(_))));
    }

    #[test]
    fn entropy_examples() {
        let coin = JointDistribution::new(schema(&[2]), vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(coin.entropy(&["V0"]).unwrap(), 1.0, epsilon = 1e-15);
        let point = JointDistribution::new(schema(&[3]), vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(point.entropy(&["V0"]).unwrap(), 0.0);
        let four = JointDistribution::new(schema(&[4]), vec![0.25; 4]).unwrap();
        assert_abs_diff_eq!(four.entropy(&["V0"]).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn mutual_info_examples() {
        let indep = xy(&[0.3 * 0.4, 0.3 * 0.6, 0.7 * 0.4, 0.7 * 0.6]);
        assert_abs_diff_eq!(indep.mutual_info(&["X"], &["Y"]).unwrap(), 0.0, epsilon = 1e-12);
        let copy = xy(&[0.5, 0.0, 0.0, 0.5]);
        assert_abs_diff_eq!(copy.mutual_info(&["X"], &["Y"]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            copy.mutual_info(&["X"], &["X"]),
            Err(Error::Argument(_))
        ));

        let xor = xor_triple();
        assert_abs_diff_eq!(
            xor.mutual_info(&["T"], &["R1", "R2"]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            xor.cond_mutual_info(&["T"], &["R1"], &["R2"]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(
            xor.cond_mutual_info::<&str>(&["T"], &["R1"], &[]).unwrap(),
            xor.mutual_info(&["T"], &["R1"]).unwrap()
        );
        assert!(matches!(
            xor.cond_mutual_info(&["T"], &["R1"], &["R1"]),
            Err(Error::Argument(_))
        ));
    }

    fn xor_triple() -> JointDistribution {
        let s = VariableSchema::new(vec![
            Variable::new("T", 2, Role::Label),
            Variable::new("R1", 2, Role::Feature),
            Variable::new("R2", 2, Role::Feature),
        ])
        .unwrap();
        let mut w = vec![0.0; 8];
        for r1 in 0..2 {
            for r2 in 0..2 {
                w[(r1 ^ r2) * 4 + r1 * 2 + r2] = 0.25;
            }
        }
        JointDistribution::new(s, w).unwrap()
    }

    #[test]
    fn markov_chain_has_zero_conditional_information() {
        // A -> X -> Y with binary symmetric channels
        let s = VariableSchema::new(vec![
            Variable::new("A", 2, Role::Protected),
            Variable::new("X", 2, Role::Feature),
            Variable::new("Y", 2, Role::Label),
        ])
        .unwrap();
        let bsc = |i: usize, o: usize, e: f64| if i == o { 1.0 - e } else { e };
        let mut w = vec![0.0; 8];
        for a in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    w[a * 4 + x * 2 + y] = 0.5 * bsc(a, x, 0.2) * bsc(x, y, 0.3);
                }
            }
        }
        let d = JointDistribution::new(s, w).unwrap();
        assert_abs_diff_eq!(
            d.cond_mutual_info(&["Y"], &["A"], &["X"]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn merge_axes_layout() {
        let d = JointDistribution::from_weights(schema(&[2, 3, 2]), (1..=12).map(f64::from).collect())
            .unwrap();
        // singleton merge only renames
        let m = d.merge_axes(&[1], "C", Role::Feature).unwrap();
        assert_eq!(m.probs(), d.probs());
        assert_eq!(m.schema().get(1).name, "C");
        // merge V0 and V2: composite = 2*v0 + v2 at position 0
        let m = d.merge_axes(&[0, 2], "C", Role::Feature).unwrap();
        assert_eq!(m.schema().cardinalities(), vec![4, 3]);
        for v0 in 0..2 {
            for v1 in 0..3 {
                for v2 in 0..2 {
                    assert_eq!(m.prob_at(&[2 * v0 + v2, v1]), d.prob_at(&[v0, v1, v2]));
                }
            }
        }
        // empty merge inserts a constant
        let m = d.merge_axes(&[], "C", Role::Feature).unwrap();
        assert_eq!(m.schema().cardinalities(), vec![1, 2, 3, 2]);
        assert_eq!(m.probs(), d.probs());
    }

    #[test]
    fn schema_validation() {
        assert!(VariableSchema::new(vec![
            Variable::new("A", 2, Role::Protected),
            Variable::new("A", 2, Role::Label),
        ])
        .is_err());
        let s = VariableSchema::new(vec![
            Variable::new("A", 2, Role::Protected),
            Variable::new("X", 1, Role::Feature),
            Variable::new("Y", 2, Role::Label),
        ])
        .unwrap();
        assert!(s.validate_roles().is_err());
        let s = VariableSchema::new(vec![
            Variable::new("X", 2, Role::Feature),
            Variable::new("Y", 2, Role::Label),
        ])
        .unwrap();
        assert!(s.validate_roles().is_err());
        assert!(JointDistribution::new(schema(&[2]), vec![0.5, 0.6]).is_err());
        assert!(JointDistribution::new(schema(&[2]), vec![1.5, -0.5]).is_err());
        assert!(JointDistribution::new(schema(&[2]), vec![1.0]).is_err());
    }

    #[test]
    fn subset_key_basics() {
        let k = SubsetKey::from_indices([0, 2]);
        assert_eq!(k.bits(), 0b101);
        assert_eq!(k.iter().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(k.complement(4), SubsetKey::from_indices([1, 3]));
        assert!(SubsetKey::new(0b1000, 3).is_err());
        assert!(SubsetKey::new(0b100, 3).is_ok());
        assert_eq!(k.to_string(), "{0,2}");
        assert_eq!(SubsetKey::all(3).count(), 8);
    }

    #[test]
    fn joint_json_round_trip() {
        let d = xor_triple();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.starts_with("{\"schema\":[{\"name\":\"T\""));
        let back: JointDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<JointDistribution>(
            r#"{"schema":[{"name":"T","cardinality":2,"role":"label"}],"probs":[0.5]}"#
        )
        .is_err());
    }
}
