//! Transportation feasibility for matrices (d = 2) by maximum flow.
//!
//! The network is source → row `i` (capacity `s_{1,i}`) → column `j` for each
//! support cell `(i, j)` (unbounded) → sink (capacity `s_{2,j}`). Strict
//! positivity on the pattern is imposed with a small lower bound on every
//! support edge, removed by the usual pre-routing transformation.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::tensor::{SparseTensor, TargetSums};

/// Lower bound on every support edge, as a fraction of the common total.
pub const STRICT_LOWER_BOUND: f64 = 1e-9;

/// Slack allowed between the max flow and the required flow, relative to the
/// total. Must sit well below [`STRICT_LOWER_BOUND`].
const FLOW_TOL: f64 = 1e-12;

struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, cap: f64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(cap);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    /// Edmonds–Karp; residual capacities below `eps` count as saturated.
    fn max_flow(&mut self, source: usize, sink: usize, eps: f64) -> f64 {
        let mut total = 0.0;
        loop {
            let mut parent_edge = vec![usize::MAX; self.head.len()];
            let mut seen = vec![false; self.head.len()];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if !seen[v] && self.cap[e] > eps {
                        seen[v] = true;
                        parent_edge[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if !seen[sink] {
                return total;
            }
            let mut push = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let e = parent_edge[v];
                push = push.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = sink;
            while v != source {
                let e = parent_edge[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                v = self.to[e ^ 1];
            }
            total += push;
        }
    }
}

/// Whether a nonnegative matrix supported inside `pattern`'s support, with
/// every support cell at least `lower_fraction · total`, has row sums `s_1`
/// and column sums `s_2`.
pub fn pattern_admits_flow(pattern: &SparseTensor, s: &TargetSums, lower_fraction: f64) -> Result<bool> {
    if pattern.num_modes() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "max-flow oracle needs a matrix, got {} modes",
            pattern.num_modes()
        )));
    }
    s.check_dims(pattern)?;
    let (rows, cols) = (pattern.dims()[0], pattern.dims()[1]);
    // Each mode rescaled to total 1 so row and column supplies match exactly.
    let s = s.normalized_to(1.0);
    let eps = lower_fraction;

    let mut row_deg = vec![0usize; rows];
    let mut col_deg = vec![0usize; cols];
    for (idx, _) in pattern.entries() {
        row_deg[idx[0]] += 1;
        col_deg[idx[1]] += 1;
    }
    let supply: Vec<f64> = (0..rows).map(|i| s.mode(0)[i] - eps * row_deg[i] as f64).collect();
    let demand: Vec<f64> = (0..cols).map(|j| s.mode(1)[j] - eps * col_deg[j] as f64).collect();
    if supply.iter().chain(&demand).any(|&v| v < 0.0) {
        return Ok(false);
    }

    let source = rows + cols;
    let sink = source + 1;
    let mut net = FlowNetwork::new(rows + cols + 2);
    for (i, &c) in supply.iter().enumerate() {
        net.add_edge(source, i, c);
    }
    for (idx, _) in pattern.entries() {
        net.add_edge(idx[0], rows + idx[1], f64::INFINITY);
    }
    for (j, &c) in demand.iter().enumerate() {
        net.add_edge(rows + j, sink, c);
    }
    let required: f64 = supply.iter().sum();
    let flow = net.max_flow(source, sink, FLOW_TOL * 1e-3);
    Ok(flow >= required - FLOW_TOL)
}

/// Strict-pattern transportation oracle: true iff some matrix that is
/// strictly positive exactly on the support of `pattern` has the prescribed
/// row and column sums.
pub fn pattern_feasible_maxflow(pattern: &SparseTensor, s: &TargetSums) -> Result<bool> {
    pattern_admits_flow(pattern, s, STRICT_LOWER_BOUND)
}
