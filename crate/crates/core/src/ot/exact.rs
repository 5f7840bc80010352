use super::EmpiricalDistribution;
use crate::{Error, Result};

/// Exact optimal-transport cost between two small distributions, solved as a
/// min-cost flow with successive shortest paths. Returns the optimal value of
/// `sum P_ij cost(x_i, y_j)`. Intended as a reference for tests; cost is
/// `O((n + m)^2 * n * m)`.
pub fn exact_transport(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    cost: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let (n, m) = (p.len(), q.len());
    // nodes: source, n supplies, m demands, sink
    let source = 0;
    let sink = n + m + 1;
    let mut g = Graph::new(n + m + 2);
    for i in 0..n {
        g.add(source, 1 + i, p.weights()[i], 0.0);
    }
    for j in 0..m {
        g.add(1 + n + j, sink, q.weights()[j], 0.0);
    }
    for i in 0..n {
        for j in 0..m {
            g.add(1 + i, 1 + n + j, f64::INFINITY, cost(p.point(i), q.point(j)));
        }
    }
    let mut total = 0.0;
    let mut flow = 0.0;
    let max_rounds = 4 * (n + m + 2) * (n * m + n + m);
    for _ in 0..max_rounds {
        let Some((dist, prev)) = g.bellman_ford(source) else {
            return Err(Error::NumericDomain(
                "negative cycle in transport residual graph".into(),
            ));
        };
        if !dist[sink].is_finite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let e = prev[v];
            push = push.min(g.cap[e]);
            v = g.from[e];
        }
        if push <= 1e-15 {
            break;
        }
        let mut v = sink;
        while v != source {
            let e = prev[v];
            g.cap[e] -= push;
            g.cap[e ^ 1] += push;
            v = g.from[e];
        }
        total += push * dist[sink];
        flow += push;
        if flow >= 1.0 - 1e-14 {
            break;
        }
    }
    Ok(total.max(0.0))
}

struct Graph {
    nodes: usize,
    from: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
}

impl Graph {
    fn new(nodes: usize) -> Self {
        Self {
            nodes,
            from: Vec::new(),
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
        }
    }

    /// Adds an edge and its residual twin at index `e ^ 1`.
    fn add(&mut self, a: usize, b: usize, cap: f64, cost: f64) {
        for (u, v, c, w) in [(a, b, cap, cost), (b, a, 0.0, -cost)] {
            self.from.push(u);
            self.to.push(v);
            self.cap.push(c);
            self.cost.push(w);
        }
    }

    fn bellman_ford(&self, source: usize) -> Option<(Vec<f64>, Vec<usize>)> {
        let mut dist = vec![f64::INFINITY; self.nodes];
        let mut prev = vec![usize::MAX; self.nodes];
        dist[source] = 0.0;
        for round in 0..self.nodes {
            let mut changed = false;
            for e in 0..self.from.len() {
                if self.cap[e] > 1e-15 && dist[self.from[e]].is_finite() {
                    let d = dist[self.from[e]] + self.cost[e];
                    if d < dist[self.to[e]] - 1e-13 {
                        dist[self.to[e]] = d;
                        prev[self.to[e]] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                return Some((dist, prev));
            }
            if round + 1 == self.nodes {
                return None;
            }
        }
        Some((dist, prev))
    }
}
