//! Causal models over `{A, X1..Xn, Y}`: DAG validation, random conditional
//! tables, exact joints, ancestral sampling, and fixture graphs.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, Provenance};
use crate::prob::{JointDistribution, Role, Variable, VariableSchema};

/// Largest joint table `exact_joint` will build.
pub const MAX_JOINT_CELLS: usize = 1_000_000;

/// Dirichlet concentration used when none is given.
pub const DEFAULT_CONCENTRATION: f64 = 1.0;

/// Largest allowed deviation of a CPT row sum from 1.
const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDag", into = "RawDag")]
pub struct CausalDag {
    schema: VariableSchema,
    edges: Vec<(usize, usize)>,
    /// Parents of each node in ascending node order.
    parents: Vec<Vec<usize>>,
    order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawDag {
    nodes: Vec<Variable>,
    edges: Vec<(String, String)>,
}

impl TryFrom<RawDag> for CausalDag {
    type Error = Error;
    fn try_from(raw: RawDag) -> Result<Self> {
        CausalDag::new(raw.nodes, &raw.edges)
    }
}

impl From<CausalDag> for RawDag {
    fn from(dag: CausalDag) -> Self {
        let name = |i: usize| dag.schema.get(i).name.clone();
        RawDag {
            edges: dag.edges.iter().map(|&(p, c)| (name(p), name(c))).collect(),
            nodes: dag.schema.variables().to_vec(),
        }
    }
}

impl CausalDag {
    /// Validates roles (one protected attribute, one label, at least one
    /// feature), acyclicity, that `A` has no parents, that `A` is not a
    /// parent of `Y`, and that `Y` has no children.
    pub fn new<S: AsRef<str>>(nodes: Vec<Variable>, edges: &[(S, S)]) -> Result<Self> {
        let schema = VariableSchema::new(nodes)?;
        schema.validate_roles()?;
        let protected: Vec<usize> = schema.with_role(Role::Protected).collect();
        if protected.len() != 1 {
            return Err(Error::Schema(format!(
                "a causal model needs exactly one protected node, got {}",
                protected.len()
            )));
        }
        let a = protected[0];
        let y = schema.with_role(Role::Label).next().expect("validated");

        let mut idx_edges = Vec::with_capacity(edges.len());
        let mut parents = vec![Vec::new(); schema.len()];
        for (p, c) in edges {
            let (p, c) = (schema.index_of(p.as_ref())?, schema.index_of(c.as_ref())?);
            if parents[c].contains(&p) {
                return Err(Error::Schema(format!(
                    "duplicate edge {} -> {}",
                    schema.get(p).name,
                    schema.get(c).name
                )));
            }
            let edge = format!("{} -> {}", schema.get(p).name, schema.get(c).name);
            if c == a {
                return Err(Error::Schema(format!("protected node cannot have parents: {edge}")));
            }
            if p == a && c == y {
                return Err(Error::Schema(format!("protected node cannot be a parent of the label: {edge}")));
            }
            if p == y {
                return Err(Error::Schema(format!("label cannot have children: {edge}")));
            }
            parents[c].push(p);
            idx_edges.push((p, c));
        }
        for ps in &mut parents {
            ps.sort_unstable();
        }
        let order = topological_order(&parents)
            .ok_or_else(|| Error::Schema("causal graph has a cycle".into()))?;
        Ok(CausalDag {
            schema,
            edges: idx_edges,
            parents,
            order,
        })
    }

    pub fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.schema.len()).filter(|&c| self.parents[c].contains(&node)).collect()
    }

    /// A topological order, ties broken by node index.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn protected(&self) -> usize {
        self.schema.with_role(Role::Protected).next().expect("validated")
    }

    pub fn label(&self) -> usize {
        self.schema.with_role(Role::Label).next().expect("validated")
    }

    /// Node indices of the features, in schema order.
    pub fn features(&self) -> Vec<usize> {
        self.schema.with_role(Role::Feature).collect()
    }
}

/// Kahn's algorithm with smallest-index-first selection.
fn topological_order(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut missing: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&v| !done[v] && missing[v] == 0)?;
        done[next] = true;
        order.push(next);
        for (c, ps) in parents.iter().enumerate() {
            if ps.contains(&next) {
                missing[c] -= 1;
            }
        }
    }
    Some(order)
}

/// Conditional table of one node. Rows are indexed row-major over the
/// parent configurations in `parents` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CausalModel {
    dag: CausalDag,
    cpts: Vec<Cpt>,
    /// Parent node indices per node, in each CPT's own order.
    cpt_parents: Vec<Vec<usize>>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    nodes: Vec<Variable>,
    edges: Vec<(String, String)>,
    cpts: BTreeMap<String, Cpt>,
    seed: u64,
}

impl CausalModel {
    /// Checks that each node has a CPT whose parents are exactly its DAG
    /// parents and whose rows are distributions of the right shape.
    pub fn new(dag: CausalDag, mut cpts: BTreeMap<String, Cpt>, seed: u64) -> Result<Self> {
        let schema = dag.schema().clone();
        let mut ordered = Vec::with_capacity(schema.len());
        let mut cpt_parents = Vec::with_capacity(schema.len());
        for (v, var) in schema.variables().iter().enumerate() {
            let cpt = cpts
                .remove(&var.name)
                .ok_or_else(|| Error::Schema(format!("no CPT for node {:?}", var.name)))?;
            let ps = schema.indices_of(&cpt.parents)?;
            let mut sorted = ps.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted != dag.parents(v) || sorted.len() != ps.len() {
                return Err(Error::Schema(format!(
                    "CPT parents of {:?} do not match the graph",
                    var.name
                )));
            }
            let configs: usize = ps.iter().map(|&p| schema.get(p).cardinality).product();
            if cpt.rows.len() != configs {
                return Err(Error::Schema(format!(
                    "CPT of {:?} has {} rows, expected {configs}",
                    var.name,
                    cpt.rows.len()
                )));
            }
            for (r, row) in cpt.rows.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.len() != var.cardinality
                    || row.iter().any(|&x| !(x >= 0.0 && x.is_finite()))
                    || (sum - 1.0).abs() > ROW_SUM_TOL
                {
                    return Err(Error::Schema(format!(
                        "CPT of {:?}, row {r}: not a distribution over {} values",
                        var.name, var.cardinality
                    )));
                }
            }
            ordered.push(cpt);
            cpt_parents.push(ps);
        }
        if let Some(extra) = cpts.keys().next() {
            return Err(Error::Schema(format!("CPT for unknown node {extra:?}")));
        }
        Ok(CausalModel {
            dag,
            cpts: ordered,
            cpt_parents,
            seed,
        })
    }

    pub fn dag(&self) -> &CausalDag {
        &self.dag
    }

    pub fn schema(&self) -> &VariableSchema {
        self.dag.schema()
    }

    pub fn cpt(&self, node: usize) -> &Cpt {
        &self.cpts[node]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row of `node`'s CPT selected by a full assignment.
    fn row(&self, node: usize, values: &[usize]) -> &[f64] {
        let mut r = 0;
        for &p in &self.cpt_parents[node] {
            r = r * self.schema().get(p).cardinality + values[p];
        }
        &self.cpts[node].rows[r]
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = RawModel {
            nodes: self.schema().variables().to_vec(),
            edges: RawDag::from(self.dag.clone()).edges,
            cpts: self
                .schema()
                .variables()
                .iter()
                .zip(&self.cpts)
                .map(|(v, c)| (v.name.clone(), c.clone()))
                .collect(),
            seed: self.seed,
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text)?;
        let dag = CausalDag::new(raw.nodes, &raw.edges)?;
        CausalModel::new(dag, raw.cpts, raw.seed)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Fills every CPT row with an independent symmetric Dirichlet draw.
pub fn random_cpts(dag: &CausalDag, seed: u64, concentration: f64) -> Result<CausalModel> {
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::Argument(format!("concentration must be positive, got {concentration}")));
    }
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::Argument(format!("concentration {concentration}: {e}")))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let schema = dag.schema();
    let mut cpts = BTreeMap::new();
    for (v, var) in schema.variables().iter().enumerate() {
        let ps = dag.parents(v);
        let configs: usize = ps.iter().map(|&p| schema.get(p).cardinality).product();
        let rows = (0..configs)
            .map(|_| dirichlet_row(&gamma, var.cardinality, &mut rng))
            .collect();
        let parents = ps.iter().map(|&p| schema.get(p).name.clone()).collect();
        cpts.insert(var.name.clone(), Cpt { parents, rows });
    }
    CausalModel::new(dag.clone(), cpts, seed)
}

fn dirichlet_row(gamma: &Gamma<f64>, k: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        // tiny concentrations can underflow every component
        if sum > 0.0 && sum.is_finite() {
            return draws.iter().map(|x| x / sum).collect();
        }
    }
}

/// Product of CPT factors over every full assignment, row-major over the
/// node order.
pub fn exact_joint(model: &CausalModel) -> Result<JointDistribution> {
    let schema = model.schema();
    let cells = schema
        .cell_count()
        .filter(|&c| c <= MAX_JOINT_CELLS)
        .ok_or_else(|| Error::Size(format!("joint state space exceeds {MAX_JOINT_CELLS} cells")))?;
    let cards = schema.cardinalities();
    let mut values = vec![0usize; cards.len()];
    let mut probs = Vec::with_capacity(cells);
    for _ in 0..cells {
        let p = model
            .dag
            .order()
            .iter()
            .map(|&v| model.row(v, &values)[values[v]])
            .product();
        probs.push(p);
        // odometer, last axis fastest
        for k in (0..cards.len()).rev() {
            values[k] += 1;
            if values[k] < cards[k] {
                break;
            }
            values[k] = 0;
        }
    }
    JointDistribution::new(schema.clone(), probs)
}

/// Draws `m` independent ancestral samples.
pub fn forward_sample(model: &CausalModel, m: usize, seed: u64) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut values = vec![0usize; model.schema().len()];
        for &v in model.dag.order() {
            let row = model.row(v, &values);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = row.len() - 1;
            for (k, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            values[v] = pick;
        }
        rows.push(values);
    }
    Dataset::new(
        model.schema().clone(),
        rows,
        Provenance {
            source: format!("forward_sample(seed={seed})"),
            rows_read: m,
            rows_dropped: 0,
            notes: Vec::new(),
        },
    )
}

/// Graph families with a known conditional-independence pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    /// `Y` has a single parent, feature 0.
    SingleParentY,
    /// `A` has a single child, feature 0.
    SingleChildA,
    /// Features 0 and 1 are the children of `A` and block every path to `Y`.
    PathBlocking,
    /// The last feature is isolated from every other node.
    IndependentFeature,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 4] = [
        FixtureKind::SingleParentY,
        FixtureKind::SingleChildA,
        FixtureKind::PathBlocking,
        FixtureKind::IndependentFeature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::SingleParentY => "single_parent_y",
            FixtureKind::SingleChildA => "single_child_a",
            FixtureKind::PathBlocking => "path_blocking",
            FixtureKind::IndependentFeature => "independent_feature",
        }
    }
}

impl FromStr for FixtureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = FixtureKind::ALL.iter().map(|k| k.name()).collect();
                Error::Argument(format!("unknown fixture {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

impl std::fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Feature name for 0-based index `i`.
pub fn feature_name(i: usize) -> String {
    format!("X{}", i + 1)
}

/// Edges of a fixture over nodes `A`, `X1..Xn`, `Y`.
pub fn fixture_edges(kind: FixtureKind, n: usize) -> Vec<(String, String)> {
    let x = feature_name;
    let a = || "A".to_string();
    let y = || "Y".to_string();
    let mut e = Vec::new();
    match kind {
        FixtureKind::SingleParentY => {
            // A -> X2 -> X1 -> Y, X1 -> X3 -> X4 -> ...
            e.push((a(), x(1)));
            e.push((x(1), x(0)));
            e.push((x(0), y()));
            for i in 2..n {
                e.push((if i == 2 { x(0) } else { x(i - 1) }, x(i)));
            }
        }
        FixtureKind::SingleChildA => {
            e.push((a(), x(0)));
            e.push((x(0), x(1)));
            e.push((x(0), y()));
            e.push((x(1), y()));
            for i in 2..n {
                e.push((x(i), y()));
            }
        }
        FixtureKind::PathBlocking => {
            e.push((a(), x(0)));
            e.push((a(), x(1)));
            e.push((x(1), x(0)));
            e.push((x(0), y()));
            if n > 2 {
                e.push((x(1), x(2)));
                e.push((x(2), y()));
            } else {
                e.push((x(1), y()));
            }
            for i in 3..n {
                e.push((x(i), y()));
            }
        }
        FixtureKind::IndependentFeature => {
            e.push((a(), x(0)));
            e.push((x(0), y()));
            for i in 1..n - 1 {
                e.push((x(i), y()));
            }
        }
    }
    e
}

/// Binary nodes `A, X1..Xn, Y`.
fn binary_nodes(n: usize) -> Vec<Variable> {
    let mut nodes = vec![Variable::new("A", 2, Role::Protected)];
    nodes.extend((0..n).map(|i| Variable::new(feature_name(i), 2, Role::Feature)));
    nodes.push(Variable::new("Y", 2, Role::Label));
    nodes
}

/// A fixture graph over binary nodes with Dirichlet(1) tables.
pub fn make_fixture(kind: FixtureKind, n: usize, seed: u64) -> Result<CausalModel> {
    if n < 2 {
        return Err(Error::Argument(format!("fixtures need at least 2 features, got {n}")));
    }
    let dag = CausalDag::new(binary_nodes(n), &fixture_edges(kind, n))?;
    random_cpts(&dag, seed, DEFAULT_CONCENTRATION)
}

/// The five-feature stand-in graph used for the synthetic experiment:
/// `A -> X1 -> Y`, `X2 -> X3 -> Y`, `X5 -> X4 -> Y`, with `X3` and `X4`
/// ternary. `X1` is the only child of `A`; `X1`, `X3`, `X4` are the parents
/// of `Y`.
pub fn stand_in_dag() -> CausalDag {
    let nodes = vec![
        Variable::new("A", 2, Role::Protected),
        Variable::new("X1", 2, Role::Feature),
        Variable::new("X2", 2, Role::Feature),
        Variable::new("X3", 3, Role::Feature),
        Variable::new("X4", 3, Role::Feature),
        Variable::new("X5", 2, Role::Feature),
        Variable::new("Y", 2, Role::Label),
    ];
    let edges = [
        ("A", "X1"),
        ("X1", "Y"),
        ("X2", "X3"),
        ("X5", "X4"),
        ("X3", "Y"),
        ("X4", "Y"),
    ];
    CausalDag::new(nodes, &edges).expect("static graph")
}

pub fn stand_in_model(seed: u64) -> CausalModel {
    random_cpts(&stand_in_dag(), seed, DEFAULT_CONCENTRATION).expect("valid concentration")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_nodes() -> Vec<Variable> {
        vec![
            Variable::new("A", 2, Role::Protected),
            Variable::new("X", 2, Role::Feature),
            Variable::new("Y", 2, Role::Label),
        ]
    }

    #[test]
    fn dag_invariants() {
        let ok = CausalDag::new(chain_nodes(), &[("A", "X"), ("X", "Y")]).unwrap();
        assert_eq!(ok.order(), &[0, 1, 2]);
        assert_eq!(ok.children(0), vec![1]);
        for bad in [
            vec![("X", "A")],
            vec![("A", "Y")],
            vec![("Y", "X")],
            vec![("A", "X"), ("A", "X")],
            vec![("X", "Z")],
        ] {
            assert!(CausalDag::new(chain_nodes(), &bad).is_err(), "{bad:?}");
        }
        let mut four = chain_nodes();
        four.insert(2, Variable::new("W", 2, Role::Feature));
        let cycle = CausalDag::new(four, &[("X", "W"), ("W", "X")]).unwrap_err();
        assert!(cycle.to_string().contains("cycle"));
    }

    #[test]
    fn deterministic_chain_is_point_mass_per_a() {
        let dag = CausalDag::new(chain_nodes(), &[("A", "X"), ("X", "Y")]).unwrap();
        let ident = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let cpts = BTreeMap::from([
            ("A".to_string(), Cpt { parents: vec![], rows: vec![vec![0.5, 0.5]] }),
            ("X".to_string(), Cpt { parents: vec!["A".into()], rows: ident.clone() }),
            ("Y".to_string(), Cpt { parents: vec!["X".into()], rows: ident }),
        ]);
        let model = CausalModel::new(dag, cpts, 0).unwrap();
        let joint = exact_joint(&model).unwrap();
        let mut want = vec![0.0; 8];
        want[0] = 0.5;
        want[7] = 0.5;
        assert_eq!(joint.probs(), want.as_slice());

        let data = forward_sample(&model, 50, 3).unwrap();
        assert!(data.rows().iter().all(|r| r[0] == r[1] && r[1] == r[2]));
    }

    #[test]
    fn independent_uniform_nodes_give_uniform_tensor() {
        let dag = CausalDag::new(chain_nodes(), &[] as &[(&str, &str)]).unwrap();
        let cpts = ["A", "X", "Y"]
            .iter()
            .map(|n| (n.to_string(), Cpt { parents: vec![], rows: vec![vec![0.5, 0.5]] }))
            .collect();
        let joint = exact_joint(&CausalModel::new(dag, cpts, 0).unwrap()).unwrap();
        assert!(joint.probs().iter().all(|&p| p == 0.125));
    }

    #[test]
    fn cpt_shape_is_checked() {
        let dag = CausalDag::new(chain_nodes(), &[("A", "X")]).unwrap();
        let mut cpts = BTreeMap::from([
            ("A".to_string(), Cpt { parents: vec![], rows: vec![vec![0.5, 0.5]] }),
            ("X".to_string(), Cpt { parents: vec![], rows: vec![vec![0.5, 0.5]] }),
            ("Y".to_string(), Cpt { parents: vec![], rows: vec![vec![0.5, 0.5]] }),
        ]);
        assert!(CausalModel::new(dag.clone(), cpts.clone(), 0).is_err());
        cpts.get_mut("X").unwrap().parents = vec!["A".into()];
        assert!(CausalModel::new(dag.clone(), cpts.clone(), 0).is_err());
        cpts.get_mut("X").unwrap().rows = vec![vec![0.5, 0.5], vec![0.3, 0.6]];
        assert!(CausalModel::new(dag.clone(), cpts.clone(), 0).is_err());
        cpts.get_mut("X").unwrap().rows[1] = vec![0.4, 0.6];
        assert!(CausalModel::new(dag, cpts, 0).is_ok());
    }

    #[test]
    fn random_cpts_are_deterministic_and_normalized() {
        let dag = stand_in_dag();
        let a = random_cpts(&dag, 11, 1.0).unwrap();
        let b = random_cpts(&dag, 11, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_cpts(&dag, 12, 1.0).unwrap());
        for v in 0..dag.schema().len() {
            for row in &a.cpt(v).rows {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
        assert!(random_cpts(&dag, 0, 0.0).is_err());
    }

    #[test]
    fn model_json_round_trip_is_lossless() {
        let m = stand_in_model(4);
        let text = m.to_json().unwrap();
        let back = CausalModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn state_space_guard() {
        let mut nodes = vec![Variable::new("A", 10, Role::Protected)];
        nodes.extend((0..5).map(|i| Variable::new(feature_name(i), 10, Role::Feature)));
        nodes.push(Variable::new("Y", 2, Role::Label));
        let dag = CausalDag::new(nodes, &[] as &[(&str, &str)]).unwrap();
        let model = random_cpts(&dag, 0, 1.0).unwrap();
        assert!(matches!(exact_joint(&model), Err(Error::Size(_))));
    }

    #[test]
    fn fixtures_build_for_small_n() {
        for kind in FixtureKind::ALL {
            for n in 2..6 {
                let m = make_fixture(kind, n, 1).unwrap();
                assert_eq!(m.schema().len(), n + 2);
                assert!(exact_joint(&m).unwrap().probs().iter().all(|&p| p > 0.0));
            }
            assert_eq!(kind.name().parse::<FixtureKind>().unwrap(), kind);
        }
        assert!(make_fixture(FixtureKind::SingleChildA, 1, 0).is_err());
        assert!(matches!("chain".parse::<FixtureKind>(), Err(Error::Argument(_))));
    }
}
