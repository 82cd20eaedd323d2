//! Bivariate partial information decomposition.
//!
//! `I(T; R1, R2)` splits into unique information of each source, shared
//! information, and synergy. The unique information of `R1` is the minimum
//! of `I_Q(T; R1 | R2)` over all joints `Q` that keep the `(T, R1)` and
//! `(T, R2)` marginals of the input; the other three parts then follow from
//! the two consistency identities.

mod oracle;
mod solver;
mod transport;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{JointDistribution, Role, Variable, VariableSchema};

pub use oracle::{brute_force_ui, ORACLE_MAX_CELLS, ORACLE_MAX_GRID_POINTS};

/// A joint distribution over exactly three variables, read as
/// `(T, R1, R2)` in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct PidInput {
    dist: JointDistribution,
}

impl PidInput {
    pub fn new(dist: JointDistribution) -> Result<Self> {
        if dist.schema().len() != 3 {
            return Err(Error::Schema(format!(
                "decomposition input needs exactly three variables (T, R1, R2), got {}",
                dist.schema().len()
            )));
        }
        Ok(PidInput { dist })
    }

    /// Builds `(T, R1, R2)` from a larger joint. Each source may name several
    /// variables; they are merged row-major in the order given.
    pub fn from_joint<S: AsRef<str>>(
        dist: &JointDistribution,
        target: &str,
        source_1: &[S],
        source_2: &[S],
    ) -> Result<Self> {
        let schema = dist.schema();
        let t = schema.index_of(target)?;
        let r1 = schema.indices_of(source_1)?;
        let r2 = schema.indices_of(source_2)?;
        let axes: Vec<usize> = std::iter::once(t).chain(r1.iter().copied()).chain(r2.iter().copied()).collect();
        let marginal = dist.marginal_table(&axes);
        let card = |ix: &[usize]| ix.iter().map(|&a| schema.get(a).cardinality).product::<usize>();
        let join = |ix: &[usize]| {
            ix.iter()
                .map(|&a| schema.get(a).name.as_str())
                .collect::<Vec<_>>()
                .join("+")
        };
        let tv = schema.get(t);
        let vars = vec![
            Variable::new(tv.name.clone(), tv.cardinality, tv.role),
            Variable::new(source_name(&join(&r1), "R1"), card(&r1), Role::Feature),
            Variable::new(source_name(&join(&r2), "R2"), card(&r2), Role::Feature),
        ];
        let vars = dedup_names(vars);
        PidInput::new(JointDistribution::new(VariableSchema::new(vars)?, marginal)?)
    }

    pub fn dist(&self) -> &JointDistribution {
        &self.dist
    }

    /// `(|T|, |R1|, |R2|)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let c = self.dist.schema().cardinalities();
        (c[0], c[1], c[2])
    }

    /// The same triple with the two sources exchanged.
    pub fn swapped(&self) -> PidInput {
        PidInput {
            dist: self.dist.permute_axes(&[0, 2, 1]).expect("three axes"),
        }
    }

    fn mutual_informations(&self) -> Result<(f64, f64, f64)> {
        let d = &self.dist;
        Ok((
            d.mutual_info_axes(&[0], &[1])?,
            d.mutual_info_axes(&[0], &[2])?,
            d.mutual_info_axes(&[0], &[1, 2])?,
        ))
    }
}

fn source_name(joined: &str, fallback: &str) -> String {
    if joined.is_empty() {
        fallback.to_string()
    } else {
        joined.to_string()
    }
}

fn dedup_names(mut vars: Vec<Variable>) -> Vec<Variable> {
    for i in 1..vars.len() {
        while vars[..i].iter().any(|v| v.name == vars[i].name) {
            vars[i].name.push('\'');
        }
    }
    vars
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once an iteration improves the objective by less than this, or
    /// the Frank-Wolfe gap drops below it (bits).
    pub objective_tol: f64,
    /// Allowed deviation of the coupling's pinned marginals.
    pub feasibility_tol: f64,
    pub max_iterations: usize,
    /// Decomposition parts in `[-clamp_threshold, 0)` are clamped to zero;
    /// anything lower is a solver failure.
    pub clamp_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            objective_tol: 1e-10,
            feasibility_tol: 1e-9,
            max_iterations: 100_000,
            clamp_threshold: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.objective_tol)
            || !positive(self.feasibility_tol)
            || !positive(self.clamp_threshold)
            || self.max_iterations == 0
        {
            return Err(Error::Argument(format!(
                "solver settings must all be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Four-way split of `I(T; R1, R2)` in bits, plus the minimizing coupling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PidResult {
    pub ui_1: f64,
    pub ui_2: f64,
    pub si: f64,
    pub ci: f64,
    pub q_star: JointDistribution,
    pub iterations: usize,
    /// Frank-Wolfe gap at the returned coupling: an upper bound on how far its
    /// objective can be above the true minimum.
    pub objective_gap: f64,
}

impl PidResult {
    pub fn total(&self) -> f64 {
        self.ui_1 + self.ui_2 + self.si + self.ci
    }
}

/// Result of the unique-information minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct UniqueInformation {
    pub value: f64,
    pub q_star: JointDistribution,
    pub iterations: usize,
    pub objective_gap: f64,
}

/// `UI(T; R1 \ R2) = min over Q in Delta_P of I_Q(T; R1 | R2)`.
pub fn unique_information(input: &PidInput, cfg: &SolverConfig) -> Result<UniqueInformation> {
    cfg.validate()?;
    let dims = input.dims();
    let sol = solver::minimize(input.dist.probs(), dims, cfg)?;
    let value = if sol.value < 0.0 && sol.value >= -cfg.clamp_threshold {
        0.0
    } else {
        sol.value
    };
    Ok(UniqueInformation {
        value,
        q_star: JointDistribution::new(input.dist.schema().clone(), sol.q)?,
        iterations: sol.iterations,
        objective_gap: sol.gap,
    })
}

/// Full decomposition. Unique information of `R1` comes from the solver; the
/// shared part, the other unique part and the synergy follow from
/// `I(T;Ri) = UIi + SI` and `I(T;R1,R2) = UI1 + UI2 + SI + CI`.
pub fn pid_decompose(input: &PidInput, cfg: &SolverConfig) -> Result<PidResult> {
    let ui = unique_information(input, cfg)?;
    let (i1, i2, i12) = input.mutual_informations()?;
    let ui_1 = ui.value;
    let si = i1 - ui_1;
    let ui_2 = i2 - si;
    let ci = i12 - ui_1 - ui_2 - si;
    let clamp = |component: &'static str, value: f64| -> Result<f64> {
        if value >= 0.0 {
            Ok(value)
        } else if value >= -cfg.clamp_threshold {
            Ok(0.0)
        } else {
            Err(Error::DecompositionIntegrity { component, value })
        }
    };
    Ok(PidResult {
        ui_1: clamp("ui_1", ui_1)?,
        ui_2: clamp("ui_2", ui_2)?,
        si: clamp("si", si)?,
        ci: clamp("ci", ci)?,
        q_star: ui.q_star,
        iterations: ui.iterations,
        objective_gap: ui.objective_gap,
    })
}

/// `I_Q(T; R1 | R2)` in bits for a dense `(T, R1, R2)` tensor.
pub(crate) fn conditional_information(q: &[f64], (nt, n1, n2): (usize, usize, usize)) -> f64 {
    let mut h_tr2 = 0.0;
    let mut h_r2 = 0.0;
    for r2 in 0..n2 {
        let mut m = 0.0;
        for t in 0..nt {
            let s: f64 = (0..n1).map(|r1| q[(t * n1 + r1) * n2 + r2]).sum();
            h_tr2 -= xlog2x(s);
            m += s;
        }
        h_r2 -= xlog2x(m);
    }
    // I(T;R1|R2) = H(T|R2) - H(T|R1,R2)
    h_tr2 - h_r2 - conditional_entropy_t(q, (nt, n1, n2))
}

/// `H(T | R1, R2)` in bits.
fn conditional_entropy_t(q: &[f64], (nt, n1, n2): (usize, usize, usize)) -> f64 {
    let plane = n1 * n2;
    let mut h = 0.0;
    for c in 0..plane {
        let m: f64 = (0..nt).map(|t| q[t * plane + c]).sum();
        if m <= 0.0 {
            continue;
        }
        for t in 0..nt {
            let v = q[t * plane + c];
            if v > 0.0 {
                h -= v * (v / m).log2();
            }
        }
    }
    h
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}
