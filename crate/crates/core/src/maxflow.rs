//! Unit-capacity max-flow on undirected graphs (Dinic).
//!
//! Each undirected link contributes one unit of capacity usable in either
//! direction, so the flow value is the maximum number of edge-disjoint paths.

use std::collections::VecDeque;

struct Arc {
    to: usize,
    cap: i32,
}

pub(crate) struct UnitFlowGraph {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    cursor: Vec<usize>,
}

impl UnitFlowGraph {
    pub(crate) fn new(node_count: usize, links: &[(usize, usize)]) -> Self {
        let mut graph = Self {
            arcs: Vec::with_capacity(links.len() * 2),
            adj: vec![Vec::new(); node_count],
            level: vec![-1; node_count],
            cursor: vec![0; node_count],
        };
        for &(u, v) in links {
            // Paired arcs are mutual residuals; both start with capacity 1.
            let id = graph.arcs.len();
            graph.arcs.push(Arc { to: v, cap: 1 });
            graph.arcs.push(Arc { to: u, cap: 1 });
            graph.adj[u].push(id);
            graph.adj[v].push(id + 1);
        }
        graph
    }

    fn bfs(&mut self, source: usize, sink: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = VecDeque::new();
        self.level[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap > 0 && self.level[arc.to] < 0 {
                    self.level[arc.to] = self.level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        self.level[sink] >= 0
    }

    fn dfs(&mut self, u: usize, sink: usize) -> bool {
        if u == sink {
            return true;
        }
        while self.cursor[u] < self.adj[u].len() {
            let a = self.adj[u][self.cursor[u]];
            let to = self.arcs[a].to;
            if self.arcs[a].cap > 0 && self.level[to] == self.level[u] + 1 && self.dfs(to, sink) {
                self.arcs[a].cap -= 1;
                self.arcs[a ^ 1].cap += 1;
                return true;
            }
            self.cursor[u] += 1;
        }
        false
    }

    pub(crate) fn max_flow(mut self, source: usize, sink: usize) -> usize {
        if source == sink {
            return 0;
        }
        let mut flow = 0;
        while self.bfs(source, sink) {
            self.cursor.iter_mut().for_each(|c| *c = 0);
            while self.dfs(source, sink) {
                flow += 1;
            }
        }
        flow
    }
}

/// Maximum number of edge-disjoint `source`→`sink` paths.
pub(crate) fn edge_disjoint_paths(
    node_count: usize,
    links: &[(usize, usize)],
    source: usize,
    sink: usize,
) -> usize {
    UnitFlowGraph::new(node_count, links).max_flow(source, sink)
}
