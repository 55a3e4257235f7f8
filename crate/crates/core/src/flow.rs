//! Dinic max-flow on real capacities.

use std::collections::VecDeque;

/// Residual capacities at or below this are treated as saturated.
const RESIDUAL_EPS: f64 = 1e-14;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn bfs(&mut self, source: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let Edge { to, cap } = self.edges[e];
                if cap > RESIDUAL_EPS && self.level[to] < 0 {
                    self.level[to] = self.level[v] + 1;
                    queue.push_back(to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, sink: usize, pushed: f64) -> f64 {
        if v == sink {
            return pushed;
        }
        while self.iter[v] < self.adj[v].len() {
            let e = self.adj[v][self.iter[v]];
            let Edge { to, cap } = self.edges[e];
            if cap > RESIDUAL_EPS && self.level[v] < self.level[to] {
                let d = self.dfs(to, sink, pushed.min(cap));
                if d > 0.0 {
                    self.edges[e].cap -= d;
                    self.edges[e ^ 1].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            self.bfs(source);
            if self.level[sink] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(source, sink, f64::INFINITY);
                if f <= 0.0 {
                    break;
                }
                flow += f;
            }
        }
    }

    /// Nodes reachable from `source` in the residual graph after
    /// [`max_flow`](Self::max_flow): the source side of a minimum cut.
    pub fn source_side(&mut self, source: usize) -> Vec<bool> {
        self.bfs(source);
        self.level.iter().map(|&l| l >= 0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1
        let mut g = FlowNetwork::new(6);
        g.add_edge(0, 1, 16.0);
        g.add_edge(0, 2, 13.0);
        g.add_edge(2, 1, 4.0);
        g.add_edge(1, 3, 12.0);
        g.add_edge(3, 2, 9.0);
        g.add_edge(2, 4, 14.0);
        g.add_edge(4, 3, 7.0);
        g.add_edge(3, 5, 20.0);
        g.add_edge(4, 5, 4.0);
        assert_eq!(g.max_flow(0, 5), 23.0);
        let side = g.source_side(0);
        assert_eq!(side, vec![true, true, true, false, true, false]);
    }

    #[test]
    fn disconnected_sink() {
        let mut g = FlowNetwork::new(3);
        g.add_edge(0, 1, 0.5);
        assert_eq!(g.max_flow(0, 2), 0.0);
    }
}
