//! Transportation simplex (MODI / u-v method) on a spanning-tree basis.
//!
//! Exact for arbitrary nonnegative marginals with equal totals. Dantzig
//! pricing; after a run of degenerate pivots pricing switches to Bland's rule,
//! which cannot cycle.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const DEGENERATE_RUN: usize = 50;

/// Minimizes `Σ cost[i][j] x[i][j]` subject to row sums `supply`, column sums
/// `demand`, `x ≥ 0`. Returns the row-major flow.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(Error::Dimension(
            "transportation problem shape mismatch".into(),
        ));
    }
    let scale = cost.iter().fold(1.0_f64, |s, c| s.max(c.abs()));
    let tol = 1e-12 * scale;

    let mut flow = vec![0.0; m * n];
    let mut basic = vec![false; m * n];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);

    // northwest corner start; every step adds one cell and advances one index
    let (mut i, mut j) = (0, 0);
    let (mut s, mut d) = (supply[0], demand[0]);
    loop {
        let x = s.min(d).max(0.0);
        flow[i * n + j] = x;
        basic[i * n + j] = true;
        basis.push((i, j));
        s -= x;
        d -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (s <= d && i < m - 1) {
            i += 1;
            s = supply[i];
        } else {
            j += 1;
            d = demand[j];
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut degenerate = 0usize;
    let max_iter = 100 * (m + n) * (m + n) + 1000;

    for _ in 0..max_iter {
        let adj = adjacency(m, n, &basis);
        potentials(m, n, cost, &adj, &mut u, &mut v);

        let bland = degenerate >= DEGENERATE_RUN;
        let mut entering = None;
        let mut best = -tol;
        'scan: for r in 0..m {
            for c in 0..n {
                if basic[r * n + c] {
                    continue;
                }
                let red = cost[r * n + c] - u[r] - v[c];
                if red < best {
                    entering = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    best = red;
                }
            }
        }
        let Some((er, ec)) = entering else {
            for x in flow.iter_mut() {
                *x = x.max(0.0);
            }
            return Ok(flow);
        };

        // tree path from row er to column ec, then close the cycle with (er, ec)
        let path = tree_path(m, &adj, er, m + ec);
        // path edges listed from the column end back to the row end: signs -, +, -, ...
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        for (k, w) in path.windows(2).rev().enumerate() {
            let cell = edge_cell(m, w[0], w[1]);
            if k % 2 == 0 {
                minus.push(cell);
            } else {
                plus.push(cell);
            }
        }
        let mut leave = minus[0];
        let mut theta = flow[leave.0 * n + leave.1];
        for &(r, c) in &minus[1..] {
            let f = flow[r * n + c];
            if f < theta || (bland && f == theta && (r, c) < leave) {
                theta = f;
                leave = (r, c);
            }
        }
        let theta = theta.max(0.0);
        degenerate = if theta <= 0.0 { degenerate + 1 } else { 0 };

        flow[er * n + ec] += theta;
        for &(r, c) in &plus {
            flow[r * n + c] += theta;
        }
        for &(r, c) in &minus {
            flow[r * n + c] -= theta;
        }
        flow[leave.0 * n + leave.1] = 0.0;
        basic[leave.0 * n + leave.1] = false;
        basic[er * n + ec] = true;
        let pos = basis
            .iter()
            .position(|&b| b == leave)
            .expect("leaving cell is basic");
        basis[pos] = (er, ec);
    }
    Err(Error::Numerical(
        "transportation simplex did not converge".into(),
    ))
}

fn adjacency(m: usize, n: usize, basis: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m + n];
    for &(r, c) in basis {
        adj[r].push(m + c);
        adj[m + c].push(r);
    }
    adj
}

fn potentials(m: usize, n: usize, cost: &[f64], adj: &[Vec<usize>], u: &mut [f64], v: &mut [f64]) {
    let mut seen = vec![false; m + n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = queue.pop_front() {
        for &next in &adj[node] {
            if seen[next] {
                continue;
            }
            seen[next] = true;
            if node < m {
                let c = next - m;
                v[c] = cost[node * n + c] - u[node];
            } else {
                let c = node - m;
                u[next] = cost[next * n + c] - v[c];
            }
            queue.push_back(next);
        }
    }
}

/// Node sequence from `from` to `to` in the basis tree.
fn tree_path(m: usize, adj: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
    let _ = m;
    let mut parent = vec![usize::MAX; adj.len()];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &next in &adj[node] {
            if parent[next] == usize::MAX {
                parent[next] = node;
                queue.push_back(next);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    path
}

fn edge_cell(m: usize, a: usize, b: usize) -> (usize, usize) {
    if a < m {
        (a, b - m)
    } else {
        (b, a - m)
    }
}
