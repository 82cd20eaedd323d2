//! Linear minimization over a transportation polytope: the vertex-finding
//! subproblem of the Frank-Wolfe step.

/// Relative mass below which residual supplies are treated as exhausted.
const MASS_EPS: f64 = 1e-13;

/// Minimizes `sum cost[i][j] * x[i][j]` over non-negative `rows x cols`
/// matrices with row sums `supply` and column sums `demand`. Returns the
/// optimal vertex, row-major.
///
/// Both margins must carry the same total. Zero-mass rows and columns stay
/// zero.
pub(crate) fn min_cost_transport(cost: &[f64], supply: &[f64], demand: &[f64]) -> Vec<f64> {
    let rows = supply.len();
    let cols = demand.len();
    debug_assert_eq!(cost.len(), rows * cols);
    let total: f64 = supply.iter().sum();
    let mut plan = vec![0.0; rows * cols];
    if total <= 0.0 {
        return plan;
    }
    // Work in units of the total so that one epsilon fits every scale.
    let a: Vec<f64> = supply.iter().map(|s| s / total).collect();
    let b: Vec<f64> = demand.iter().map(|d| d / total).collect();
    let live_rows: Vec<usize> = (0..rows).filter(|&i| a[i] > 0.0).collect();
    let live_cols: Vec<usize> = (0..cols).filter(|&j| b[j] > 0.0).collect();
    let sub_cost = |i: usize, j: usize| cost[live_rows[i] * cols + live_cols[j]];
    let sa: Vec<f64> = live_rows.iter().map(|&i| a[i]).collect();
    let sb: Vec<f64> = live_cols.iter().map(|&j| b[j]).collect();

    let sub = if live_cols.len() == 1 {
        sa.clone()
    } else if live_rows.len() == 1 {
        sb.clone()
    } else if live_cols.len() == 2 {
        two_columns(&sub_cost, &sa, &sb)
    } else if live_rows.len() == 2 {
        let transposed = two_columns(&|j, i| sub_cost(i, j), &sb, &sa);
        let (r, c) = (2, live_cols.len());
        let mut out = vec![0.0; r * c];
        for j in 0..c {
            for i in 0..r {
                out[i * c + j] = transposed[j * r + i];
            }
        }
        out
    } else {
        successive_shortest_paths(&sub_cost, &sa, &sb)
    };

    let c = live_cols.len();
    for (ii, &i) in live_rows.iter().enumerate() {
        for (jj, &j) in live_cols.iter().enumerate() {
            plan[i * cols + j] = sub[ii * c + jj] * total;
        }
    }
    plan
}

/// Two columns: everything is decided by how much each row sends to column
/// 0, so fill rows in order of how much cheaper column 0 is for them.
fn two_columns(cost: &dyn Fn(usize, usize) -> f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    let rows = a.len();
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&i, &k| {
        let di = cost(i, 0) - cost(i, 1);
        let dk = cost(k, 0) - cost(k, 1);
        di.total_cmp(&dk).then(i.cmp(&k))
    });
    let mut out = vec![0.0; rows * 2];
    let mut left = b[0];
    for i in order {
        let send = a[i].min(left.max(0.0));
        out[i * 2] = send;
        out[i * 2 + 1] = a[i] - send;
        left -= send;
    }
    out
}

/// General case: successive shortest augmenting paths. Dijkstra runs on
/// reduced costs under node potentials, so the negative costs of the
/// gradient are fine, and clamping reduced costs at zero absorbs rounding
/// instead of letting it form negative cycles.
fn successive_shortest_paths(cost: &dyn Fn(usize, usize) -> f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    let rows = a.len();
    let cols = b.len();
    // node ids: source, rows, cols, sink
    let source = 0;
    let row = |i: usize| 1 + i;
    let col = |j: usize| 1 + rows + j;
    let sink = 1 + rows + cols;
    let nodes = sink + 1;

    let mut flow = vec![0.0; rows * cols];
    let mut supply_left = a.to_vec();
    let mut demand_left = b.to_vec();

    // feasible initial potentials: every arc has a non-negative reduced cost
    let mut pi = vec![0.0; nodes];
    for j in 0..cols {
        pi[col(j)] = (0..rows).map(|i| cost(i, j)).fold(f64::INFINITY, f64::min);
    }
    pi[sink] = (0..cols).map(|j| pi[col(j)]).fold(f64::INFINITY, f64::min);

    let mut dist = vec![f64::INFINITY; nodes];
    let mut pred = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];
    // each augmentation exhausts a supply, a demand or a reverse arc
    let max_rounds = 4 * (rows * cols + rows + cols);
    for _ in 0..max_rounds {
        if supply_left.iter().sum::<f64>() <= MASS_EPS {
            break;
        }
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        done.fill(false);
        dist[source] = 0.0;
        while let Some(u) = (0..nodes)
            .filter(|&v| !done[v] && dist[v].is_finite())
            .min_by(|&x, &y| dist[x].total_cmp(&dist[y]).then(x.cmp(&y)))
        {
            done[u] = true;
            if u == sink {
                break;
            }
            let mut relax = |v: usize, arc_cost: f64| {
                let reduced = (arc_cost + pi[u] - pi[v]).max(0.0);
                if !done[v] && dist[u] + reduced < dist[v] {
                    dist[v] = dist[u] + reduced;
                    pred[v] = u;
                }
            };
            if u == source {
                for (i, &left) in supply_left.iter().enumerate() {
                    if left > MASS_EPS {
                        relax(row(i), 0.0);
                    }
                }
            } else if u < col(0) {
                let i = u - 1;
                for j in 0..cols {
                    relax(col(j), cost(i, j));
                }
            } else {
                let j = u - col(0);
                for i in 0..rows {
                    if flow[i * cols + j] > MASS_EPS {
                        relax(row(i), -cost(i, j));
                    }
                }
                if demand_left[j] > MASS_EPS {
                    relax(sink, 0.0);
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        for v in 0..nodes {
            pi[v] += dist[v].min(dist[sink]);
        }

        // bottleneck along the path, then augment
        let mut delta = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let u = pred[v];
            if v == sink {
                delta = delta.min(demand_left[u - col(0)]);
            } else if u == source {
                delta = delta.min(supply_left[v - 1]);
            } else if v < col(0) {
                // reverse arc col -> row
                delta = delta.min(flow[(v - 1) * cols + (u - col(0))]);
            }
            v = u;
        }
        let mut v = sink;
        while v != source {
            let u = pred[v];
            if v == sink {
                demand_left[u - col(0)] -= delta;
            } else if u == source {
                supply_left[v - 1] -= delta;
            } else if v < col(0) {
                flow[(v - 1) * cols + (u - col(0))] -= delta;
            } else {
                flow[(u - 1) * cols + (v - col(0))] += delta;
            }
            v = u;
        }
    }
    flow
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_margins(plan: &[f64], a: &[f64], b: &[f64]) {
        let cols = b.len();
        for (i, &ai) in a.iter().enumerate() {
            let s: f64 = plan[i * cols..(i + 1) * cols].iter().sum();
            assert!((s - ai).abs() < 1e-12, "row {i}: {s} vs {ai}");
        }
        for (j, &bj) in b.iter().enumerate() {
            let s: f64 = (0..a.len()).map(|i| plan[i * cols + j]).sum();
            assert!((s - bj).abs() < 1e-12, "col {j}: {s} vs {bj}");
        }
        assert!(plan.iter().all(|&x| x >= -1e-15));
    }

    fn objective(cost: &[f64], plan: &[f64]) -> f64 {
        cost.iter().zip(plan).map(|(c, x)| c * x).sum()
    }

    /// Exhaustive check on a grid for 3x3 problems: no grid point beats the
    /// returned plan.
    fn grid_best(cost: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let steps = 60;
        let mut best = f64::INFINITY;
        for i00 in 0..=steps {
            for i01 in 0..=steps {
                for i10 in 0..=steps {
                    for i11 in 0..=steps {
                        let x00 = a[0].min(b[0]) * i00 as f64 / steps as f64;
                        let x01 = (a[0] - x00).min(b[1]) * i01 as f64 / steps as f64;
                        let x02 = a[0] - x00 - x01;
                        let x10 = (b[0] - x00).min(a[1]) * i10 as f64 / steps as f64;
                        let x11 = (b[1] - x01).min(a[1] - x10) * i11 as f64 / steps as f64;
                        let x12 = a[1] - x10 - x11;
                        let x20 = b[0] - x00 - x10;
                        let x21 = b[1] - x01 - x11;
                        let x22 = b[2] - x02 - x12;
                        let plan = [x00, x01, x02, x10, x11, x12, x20, x21, x22];
                        if plan.iter().all(|&x| x >= -1e-12) {
                            best = best.min(objective(cost, &plan));
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn general_case_is_optimal_and_feasible() {
        let a = [0.2, 0.5, 0.3];
        let b = [0.4, 0.35, 0.25];
        let cost = [3.0, -1.0, 2.0, 0.5, 4.0, -2.0, 1.0, 0.0, 2.5];
        let plan = min_cost_transport(&cost, &a, &b);
        check_margins(&plan, &a, &b);
        assert!(objective(&cost, &plan) <= grid_best(&cost, &a, &b) + 1e-12);
    }

    #[test]
    fn random_three_by_three_problems_match_the_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut a: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.05).collect();
            let mut b: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.05).collect();
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let cost: Vec<f64> = (0..9).map(|_| rng.random_range(-5.0..5.0)).collect();
            let plan = min_cost_transport(&cost, &a, &b);
            check_margins(&plan, &a, &b);
            assert!(objective(&cost, &plan) <= grid_best(&cost, &a, &b) + 1e-12);
        }
    }

    #[test]
    fn two_column_greedy_matches_general_solver() {
        let a = [0.1, 0.25, 0.3, 0.35];
        let b = [0.45, 0.55];
        let cost = [1.0, 0.0, -0.5, 2.0, 0.3, 0.2, -3.0, -1.0];
        let greedy = min_cost_transport(&cost, &a, &b);
        check_margins(&greedy, &a, &b);
        let general = successive_shortest_paths(&|i, j| cost[i * 2 + j], &a, &b);
        check_margins(&general, &a, &b);
        assert!((objective(&cost, &greedy) - objective(&cost, &general)).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_rows_and_columns_stay_empty() {
        let a = [0.0, 0.6, 0.4];
        let b = [0.5, 0.0, 0.5];
        let cost = [-9.0, -9.0, -9.0, 1.0, -5.0, 2.0, 0.0, -5.0, 1.0];
        let plan = min_cost_transport(&cost, &a, &b);
        check_margins(&plan, &a, &b);
        assert_eq!(plan[0], 0.0);
        assert_eq!(plan[4], 0.0);
    }
}
