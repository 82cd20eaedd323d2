//! Exhaustive grid search for the unique information, used to check the
//! solver on small alphabets.

use super::{conditional_information, PidInput};
use crate::error::{Error, Result};

/// Largest `|T| * |R1| * |R2|` the oracle accepts.
pub const ORACLE_MAX_CELLS: usize = 64;

/// Largest number of coupling combinations the oracle will evaluate.
pub const ORACLE_MAX_GRID_POINTS: usize = 50_000_000;

/// Minimum of `I_Q(T; R1 | R2)` over a grid on the feasible couplings.
///
/// For every `t` with `P(t) > 0` the conditional coupling of `P(r1|t)` and
/// `P(r2|t)` is enumerated cell by cell (row-major, last row and column
/// forced). Each free cell runs from its lower to its upper feasible bound
/// in steps of `grid_step`, always including both bounds, so every vertex
/// reachable by the sweep order is evaluated exactly. The result is an upper
/// bound on the true minimum that tightens as `grid_step` shrinks.
pub fn brute_force_ui(input: &PidInput, grid_step: f64) -> Result<f64> {
    let (nt, n1, n2) = input.dims();
    if nt * n1 * n2 > ORACLE_MAX_CELLS {
        return Err(Error::Size(format!(
            "oracle limited to {ORACLE_MAX_CELLS} cells, got {nt}x{n1}x{n2}"
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Argument(format!("grid step {grid_step} must be in (0, 1]")));
    }
    let p = input.dist().probs();
    let plane = n1 * n2;

    // per live t: its index, mass, and conditional margins
    let mut slices = Vec::new();
    let mut combos: usize = 1;
    for t in 0..nt {
        let slice = &p[t * plane..(t + 1) * plane];
        let mass: f64 = slice.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let rows: Vec<f64> = (0..n1)
            .map(|r1| slice[r1 * n2..(r1 + 1) * n2].iter().sum::<f64>() / mass)
            .collect();
        let cols: Vec<f64> = (0..n2)
            .map(|r2| (0..n1).map(|r1| slice[r1 * n2 + r2]).sum::<f64>() / mass)
            .collect();
        let budget = ORACLE_MAX_GRID_POINTS / combos;
        let mut count = 0usize;
        for_each_coupling(&rows, &cols, grid_step, &mut |_| {
            count += 1;
            count <= budget
        });
        if count > budget {
            return Err(Error::Size(format!(
                "grid step {grid_step} needs more than {ORACLE_MAX_GRID_POINTS} points"
            )));
        }
        combos *= count.max(1);
        slices.push(Slice { t, mass, rows, cols });
    }

    let mut q = vec![0.0; p.len()];
    let mut best = f64::INFINITY;
    nest(&slices, grid_step, (nt, n1, n2), &mut q, &mut best);
    Ok(best.max(0.0))
}

struct Slice {
    t: usize,
    mass: f64,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

/// Walks the Cartesian product of the per-slice grids without storing it.
fn nest(slices: &[Slice], step: f64, dims: (usize, usize, usize), q: &mut [f64], best: &mut f64) {
    let Some((head, rest)) = slices.split_first() else {
        *best = best.min(conditional_information(q, dims));
        return;
    };
    let plane = dims.1 * dims.2;
    let offset = head.t * plane;
    for_each_coupling(&head.rows, &head.cols, step, &mut |m| {
        for (dst, &x) in q[offset..offset + plane].iter_mut().zip(m) {
            *dst = x * head.mass;
        }
        nest(rest, step, dims, q, best);
        true
    });
}

/// Calls `visit` on every grid coupling (row-major) of the given margins
/// until it returns false.
fn for_each_coupling(rows: &[f64], cols: &[f64], step: f64, visit: &mut dyn FnMut(&[f64]) -> bool) {
    let mut m = vec![0.0; rows.len() * cols.len()];
    let mut col_left = cols.to_vec();
    fill(0, 0, rows[0], rows, &mut col_left, &mut m, step, visit);
}

/// Returns false once the visitor asks to stop.
#[allow(clippy::too_many_arguments)]
fn fill(
    r1: usize,
    r2: usize,
    row_left: f64,
    rows: &[f64],
    col_left: &mut [f64],
    m: &mut [f64],
    step: f64,
    visit: &mut dyn FnMut(&[f64]) -> bool,
) -> bool {
    const SLACK: f64 = 1e-12;
    let n1 = rows.len();
    let n2 = col_left.len();
    if r1 == n1 - 1 {
        // last row takes whatever each column still needs
        if col_left.iter().any(|&v| v < -SLACK) {
            return true;
        }
        for c in 0..n2 {
            m[r1 * n2 + c] = col_left[c].max(0.0);
        }
        let total: f64 = m[r1 * n2..].iter().sum();
        if (total - rows[r1]).abs() > 1e-9 {
            return true;
        }
        return visit(m);
    }
    if r2 == n2 - 1 {
        // last column of this row is forced
        if row_left > col_left[r2] + SLACK || row_left < -SLACK {
            return true;
        }
        let v = row_left.max(0.0);
        m[r1 * n2 + r2] = v;
        col_left[r2] -= v;
        let more = fill(r1 + 1, 0, rows[r1 + 1], rows, col_left, m, step, visit);
        col_left[r2] += v;
        return more;
    }
    let hi = row_left.min(col_left[r2]).max(0.0);
    let later: f64 = col_left[r2 + 1..].iter().map(|c| c.max(0.0)).sum();
    let lo = (row_left - later).max(0.0);
    if lo > hi + SLACK {
        return true;
    }
    let mut values = vec![lo];
    let mut x = lo + step;
    while x < hi - SLACK {
        values.push(x);
        x += step;
    }
    if hi > lo + SLACK {
        values.push(hi);
    }
    for v in values {
        m[r1 * n2 + r2] = v;
        col_left[r2] -= v;
        let more = fill(r1, r2 + 1, row_left - v, rows, col_left, m, step, visit);
        col_left[r2] += v;
        if !more {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{JointDistribution, Role, Variable, VariableSchema};
    use approx::assert_abs_diff_eq;

    fn input(dims: (usize, usize, usize), w: Vec<f64>) -> PidInput {
        let schema = VariableSchema::new(vec![
            Variable::new("T", dims.0, Role::Label),
            Variable::new("R1", dims.1, Role::Feature),
            Variable::new("R2", dims.2, Role::Feature),
        ])
        .unwrap();
        PidInput::new(JointDistribution::from_weights(schema, w).unwrap()).unwrap()
    }

    #[test]
    fn copy_triple_is_zero_at_any_step() {
        let mut w = vec![0.0; 8];
        w[0] = 1.0;
        w[7] = 1.0;
        let p = input((2, 2, 2), w);
        for step in [0.5, 0.1, 1e-3] {
            assert_eq!(brute_force_ui(&p, step).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_second_source_gives_mutual_information() {
        // R2 binary but never 1
        let w = vec![0.4, 0.0, 0.1, 0.0, 0.2, 0.0, 0.3, 0.0];
        let p = input((2, 2, 2), w);
        let i1 = p.dist().mutual_info_axes(&[0], &[1]).unwrap();
        assert_abs_diff_eq!(brute_force_ui(&p, 1e-2).unwrap(), i1, epsilon = 1e-12);
        // and the cardinality-1 form
        let p = input((2, 2, 1), vec![0.4, 0.1, 0.2, 0.3]);
        assert_abs_diff_eq!(brute_force_ui(&p, 1e-2).unwrap(), i1, epsilon = 1e-12);
    }

    #[test]
    fn and_gate_reaches_zero_through_exact_end_points() {
        let mut w = vec![0.0; 8];
        for a in 0..2 {
            for b in 0..2 {
                w[(a & b) * 4 + a * 2 + b] = 1.0;
            }
        }
        assert_eq!(brute_force_ui(&input((2, 2, 2), w), 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn every_enumerated_coupling_is_feasible() {
        let rows = [0.2, 0.5, 0.3];
        let cols = [0.45, 0.15, 0.4];
        let mut out = Vec::new();
        for_each_coupling(&rows, &cols, 0.05, &mut |m| {
            out.push(m.to_vec());
            true
        });
        assert!(out.len() > 50);
        for m in &out {
            for i in 0..3 {
                assert_abs_diff_eq!(m[i * 3..i * 3 + 3].iter().sum::<f64>(), rows[i], epsilon = 1e-9);
            }
            for j in 0..3 {
                assert_abs_diff_eq!((0..3).map(|i| m[i * 3 + j]).sum::<f64>(), cols[j], epsilon = 1e-9);
            }
            assert!(m.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn guards() {
        let p = input((4, 4, 5), vec![1.0; 80]);
        assert!(matches!(brute_force_ui(&p, 0.1), Err(Error::Size(_))));
        let p = input((2, 2, 2), vec![1.0; 8]);
        assert!(matches!(brute_force_ui(&p, 0.0), Err(Error::Argument(_))));
        let p = input((2, 4, 4), vec![1.0; 32]);
        assert!(matches!(brute_force_ui(&p, 1e-3), Err(Error::Size(_))));
    }
}
