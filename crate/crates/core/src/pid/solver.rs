//! Minimizer for `I_Q(T; R1 | R2)` over couplings that pin the `(T, R1)`
//! and `(T, R2)` marginals.
//!
//! For each `t` the slice `Q(t, ., .)` ranges over the transportation
//! polytope with margins `P(t, r1)` and `P(t, r2)`, so the feasible set is a
//! product of per-`t` polytopes. On it the objective equals
//! `H_P(T|R2) - H_Q(T|R1,R2)`, a convex function of `Q`.
//!
//! Every iteration runs two monotone steps:
//!
//! 1. a scaling step: with `S = Q_{R1,R2}`, replace each slice by the
//!    I-projection of `S` onto its polytope (Sinkhorn scaling). This is one
//!    round of alternating KL minimization between `Q` and `S (x) uniform_T`;
//!    it converges quickly from the interior.
//! 2. a Frank-Wolfe step: the linear subproblem over each polytope is a
//!    transportation problem whose optimum is a vertex, followed by an exact
//!    line search. The same subproblem yields the duality gap used as the
//!    stopping certificate, and the vertex moves let the iterate approach
//!    faces of the polytope that scaling only reaches slowly. Steps stop just
//!    short of the vertex so the iterate stays interior.
//!
//! Slices with `P(t) = 0` carry no variables and are skipped.

use super::transport::min_cost_transport;
use super::{conditional_information, SolverConfig};
use crate::error::{Error, Result};

/// Lower cap for `log2 Q(t | r1, r2)` when the conditional is zero.
const LOG_FLOOR: f64 = -1100.0;
const SINKHORN_MAX_SWEEPS: usize = 5_000;
const LINE_SEARCH_STEPS: usize = 64;
/// Frank-Wolfe steps stop this fraction short of the vertex. A full step can
/// empty a whole `(r1, r2)` column, where the objective is not differentiable
/// and neither step type can make progress again; staying interior keeps the
/// conditional `Q(t | r1, r2)` meaningful so the scaling step can adjust it.
const FRACTION_TO_BOUNDARY: f64 = 1e-2;

pub(crate) struct Solution {
    pub q: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub gap: f64,
}

struct Problem<'a> {
    p: &'a [f64],
    nt: usize,
    n1: usize,
    n2: usize,
    /// `P(t, r1)`, row-major `[t][r1]`
    row_margin: Vec<f64>,
    /// `P(t, r2)`, row-major `[t][r2]`
    col_margin: Vec<f64>,
    mass: Vec<f64>,
    feasibility_tol: f64,
}

impl<'a> Problem<'a> {
    fn new(p: &'a [f64], (nt, n1, n2): (usize, usize, usize), cfg: &SolverConfig) -> Self {
        let mut row_margin = vec![0.0; nt * n1];
        let mut col_margin = vec![0.0; nt * n2];
        for t in 0..nt {
            for r1 in 0..n1 {
                for r2 in 0..n2 {
                    let v = p[(t * n1 + r1) * n2 + r2];
                    row_margin[t * n1 + r1] += v;
                    col_margin[t * n2 + r2] += v;
                }
            }
        }
        let mass = (0..nt)
            .map(|t| row_margin[t * n1..(t + 1) * n1].iter().sum())
            .collect();
        Problem {
            p,
            nt,
            n1,
            n2,
            row_margin,
            col_margin,
            mass,
            feasibility_tol: cfg.feasibility_tol,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.nt, self.n1, self.n2)
    }

    fn plane(&self) -> usize {
        self.n1 * self.n2
    }

    fn objective(&self, q: &[f64]) -> f64 {
        conditional_information(q, self.dims())
    }

    fn live_slices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nt).filter(|&t| self.mass[t] > 0.0)
    }

    /// `Q(t, r1, r2) = P(t, r1) P(t, r2) / P(t)`.
    fn product_coupling(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.p.len()];
        for t in self.live_slices() {
            for r1 in 0..self.n1 {
                for r2 in 0..self.n2 {
                    q[(t * self.n1 + r1) * self.n2 + r2] =
                        self.row_margin[t * self.n1 + r1] * self.col_margin[t * self.n2 + r2] / self.mass[t];
                }
            }
        }
        q
    }

    /// Alternating-minimization step. `None` when a slice cannot be scaled to
    /// its margins within tolerance.
    fn scaling_step(&self, q: &[f64]) -> Option<Vec<f64>> {
        let plane = self.plane();
        let mut pooled = vec![0.0; plane];
        for t in 0..self.nt {
            for c in 0..plane {
                pooled[c] += q[t * plane + c];
            }
        }
        let mut out = vec![0.0; q.len()];
        for t in self.live_slices() {
            let slice = &mut out[t * plane..(t + 1) * plane];
            slice.copy_from_slice(&pooled);
            let rows = &self.row_margin[t * self.n1..(t + 1) * self.n1];
            let cols = &self.col_margin[t * self.n2..(t + 1) * self.n2];
            if !sinkhorn(slice, rows, cols, self.feasibility_tol * 1e-3 * self.mass[t]) {
                return None;
            }
        }
        Some(out)
    }

    /// Gradient of the objective in bits: `log2 Q(t | r1, r2)`.
    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let plane = self.plane();
        let mut g = vec![0.0; q.len()];
        for c in 0..plane {
            let m: f64 = (0..self.nt).map(|t| q[t * plane + c]).sum();
            for t in 0..self.nt {
                let v = q[t * plane + c];
                g[t * plane + c] = if m <= 0.0 {
                    // empty column: any split of new mass is equally good to
                    // first order; use the uniform conditional
                    -(self.nt as f64).log2()
                } else if v <= 0.0 {
                    LOG_FLOOR
                } else {
                    (v / m).log2().max(LOG_FLOOR)
                };
            }
        }
        g
    }

    /// Vertex minimizing `<grad, V>` over the feasible set.
    fn linear_minimizer(&self, grad: &[f64]) -> Vec<f64> {
        let plane = self.plane();
        let mut v = vec![0.0; grad.len()];
        for t in self.live_slices() {
            let plan = min_cost_transport(
                &grad[t * plane..(t + 1) * plane],
                &self.row_margin[t * self.n1..(t + 1) * self.n1],
                &self.col_margin[t * self.n2..(t + 1) * self.n2],
            );
            v[t * plane..(t + 1) * plane].copy_from_slice(&plan);
        }
        v
    }

    /// Derivative of the objective along `d` at `q + step * d`.
    fn directional_derivative(&self, q: &[f64], d: &[f64], step: f64) -> f64 {
        let plane = self.plane();
        let mut total = 0.0;
        for c in 0..plane {
            let m: f64 = (0..self.nt).map(|t| q[t * plane + c] + step * d[t * plane + c]).sum();
            for t in 0..self.nt {
                let dv = d[t * plane + c];
                if dv == 0.0 {
                    continue;
                }
                let v = q[t * plane + c] + step * dv;
                if v <= 0.0 || m <= 0.0 {
                    // only reachable at the end points: moving mass into an
                    // empty cell is infinitely steep downhill, out of it uphill
                    total += if dv > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
                } else {
                    total += dv * (v / m).log2();
                }
            }
        }
        total
    }

    /// Exact line search on `[0, 1 - FRACTION_TO_BOUNDARY]` by bisection on
    /// the (monotone) directional derivative.
    fn line_search(&self, q: &[f64], d: &[f64]) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0 - FRACTION_TO_BOUNDARY;
        for _ in 0..LINE_SEARCH_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.directional_derivative(q, d, mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    fn max_infeasibility(&self, q: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 0..self.nt {
            for r1 in 0..self.n1 {
                let s: f64 = (0..self.n2).map(|r2| q[(t * self.n1 + r1) * self.n2 + r2]).sum();
                worst = worst.max((s - self.row_margin[t * self.n1 + r1]).abs());
            }
            for r2 in 0..self.n2 {
                let s: f64 = (0..self.n1).map(|r1| q[(t * self.n1 + r1) * self.n2 + r2]).sum();
                worst = worst.max((s - self.col_margin[t * self.n2 + r2]).abs());
            }
        }
        worst
    }
}

/// Scales `m` (row-major, `rows.len() x cols.len()`) in place to the given
/// margins. Returns false if the margins are not reached within `tol`.
fn sinkhorn(m: &mut [f64], rows: &[f64], cols: &[f64], tol: f64) -> bool {
    let n1 = rows.len();
    let n2 = cols.len();
    for _ in 0..SINKHORN_MAX_SWEEPS {
        for r1 in 0..n1 {
            let row = &mut m[r1 * n2..(r1 + 1) * n2];
            let s: f64 = row.iter().sum();
            if rows[r1] <= 0.0 {
                row.iter_mut().for_each(|x| *x = 0.0);
            } else if s > 0.0 {
                let f = rows[r1] / s;
                row.iter_mut().for_each(|x| *x *= f);
            } else {
                return false;
            }
        }
        for r2 in 0..n2 {
            let s: f64 = (0..n1).map(|r1| m[r1 * n2 + r2]).sum();
            if cols[r2] <= 0.0 {
                (0..n1).for_each(|r1| m[r1 * n2 + r2] = 0.0);
            } else if s > 0.0 {
                let f = cols[r2] / s;
                (0..n1).for_each(|r1| m[r1 * n2 + r2] *= f);
            } else {
                return false;
            }
        }
        let err = (0..n1)
            .map(|r1| (m[r1 * n2..(r1 + 1) * n2].iter().sum::<f64>() - rows[r1]).abs())
            .fold(0.0, f64::max);
        if err <= tol {
            return true;
        }
    }
    false
}

pub(crate) fn minimize(p: &[f64], dims: (usize, usize, usize), cfg: &SolverConfig) -> Result<Solution> {
    let problem = Problem::new(p, dims, cfg);
    let mut q = problem.product_coupling();
    let mut value = problem.objective(&q);
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let before = value;

        if let Some(scaled) = problem.scaling_step(&q) {
            let v = problem.objective(&scaled);
            if v <= value && problem.max_infeasibility(&scaled) <= cfg.feasibility_tol {
                q = scaled;
                value = v;
            }
        }

        let grad = problem.gradient(&q);
        let vertex = problem.linear_minimizer(&grad);
        let direction: Vec<f64> = vertex.iter().zip(&q).map(|(v, x)| v - x).collect();
        gap = -grad.iter().zip(&direction).map(|(g, d)| g * d).sum::<f64>();
        if gap <= cfg.objective_tol {
            converged = true;
            break;
        }
        let step = problem.line_search(&q, &direction);
        if step > 0.0 {
            let moved: Vec<f64> = q
                .iter()
                .zip(&direction)
                .map(|(x, d)| (x + step * d).max(0.0))
                .collect();
            let v = problem.objective(&moved);
            if v < value {
                q = moved;
                value = v;
            }
        }

        if before - value < cfg.objective_tol {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(Error::Convergence {
            iterations,
            objective: value,
            objective_gap: gap,
            best_iterate: q,
        });
    }

    // The input itself is feasible; never report something worse.
    let at_input = problem.objective(p);
    if at_input <= value {
        q = p.to_vec();
        value = at_input;
    }
    let grad = problem.gradient(&q);
    let vertex = problem.linear_minimizer(&grad);
    let gap = grad
        .iter()
        .zip(q.iter().zip(&vertex))
        .map(|(g, (x, v))| g * (x - v))
        .sum::<f64>();
    Ok(Solution {
        q,
        value,
        iterations,
        gap: gap.max(0.0),
    })
}
