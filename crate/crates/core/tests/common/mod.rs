#![allow(dead_code)]

use fairsel::coefficients::ScoringProblem;
use fairsel::pid::SolverConfig;
use fairsel::prob::{JointDistribution, Role, SubsetKey, Variable, VariableSchema};
use fairsel::synth::{exact_joint, CausalModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Schema `A, X1..Xn, Y` with the given cardinalities.
pub fn axy_schema(a: usize, features: &[usize], y: usize) -> VariableSchema {
    let mut vars = vec![Variable::new("A", a, Role::Protected)];
    vars.extend(
        features
            .iter()
            .enumerate()
            .map(|(i, &k)| Variable::new(format!("X{}", i + 1), k, Role::Feature)),
    );
    vars.push(Variable::new("Y", y, Role::Label));
    VariableSchema::new(vars).unwrap()
}

/// Full-support random joint with exponential weights.
pub fn random_joint(rng: &mut ChaCha8Rng, schema: VariableSchema) -> JointDistribution {
    let cells = schema.cell_count().unwrap();
    let w = (0..cells).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    JointDistribution::from_weights(schema, w).unwrap()
}

/// Random distribution over `k` values.
pub fn random_dist(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn problem(dist: &JointDistribution) -> ScoringProblem {
    ScoringProblem::new(dist, SolverConfig::default()).unwrap()
}

pub fn model_problem(model: &CausalModel) -> ScoringProblem {
    problem(&exact_joint(model).unwrap())
}

/// Feature indices (0-based) of the parents of `Y` in a causal model.
pub fn label_parents(model: &CausalModel) -> Vec<usize> {
    feature_positions(model, model.dag().parents(model.dag().label()))
}

/// Feature indices of the children of `A`.
pub fn protected_children(model: &CausalModel) -> Vec<usize> {
    feature_positions(model, &model.dag().children(model.dag().protected()))
}

fn feature_positions(model: &CausalModel, nodes: &[usize]) -> Vec<usize> {
    let features = model.dag().features();
    nodes
        .iter()
        .filter_map(|v| features.iter().position(|f| f == v))
        .collect()
}

pub fn key_of(indices: &[usize]) -> SubsetKey {
    SubsetKey::from_indices(indices.iter().copied())
}

/// Index of the largest value; all indices within `tol` of the maximum.
pub fn maximizers(xs: &[f64], tol: f64) -> Vec<usize> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..xs.len()).filter(|&i| xs[i] >= max - tol).collect()
}
