//! Routing networks and flow patterns.
//!
//! A [`Network`] is an undirected simple graph over dense node ids with a
//! designated source and sink. Link ids are indices into [`Network::links`];
//! every per-link output of the crate is indexed the same way.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maxflow;

pub type NodeId = usize;
pub type LinkId = usize;

/// Absolute tolerance for load-bound checks on flow patterns.
pub const LOAD_BOUND_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("malformed network text: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("network needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("link {link} is a self-loop on node {node}")]
    SelfLoop { link: LinkId, node: NodeId },
    #[error("link {link} ({u},{v}) duplicates link {first}")]
    DuplicateLink {
        link: LinkId,
        first: LinkId,
        u: NodeId,
        v: NodeId,
    },
    #[error("link {link} references node {node}, but the network has {node_count} nodes")]
    BadEndpoint {
        link: LinkId,
        node: NodeId,
        node_count: usize,
    },
    #[error("{role} node {node} is out of range for {node_count} nodes")]
    BadTerminal {
        role: &'static str,
        node: NodeId,
        node_count: usize,
    },
    #[error("source and sink are both node {0}")]
    SourceIsSink(NodeId),
    #[error("expected {expected} positions, got {got}")]
    PositionCount { expected: usize, got: usize },
    #[error("position of node {0} is not finite")]
    NonFinitePosition(NodeId),
}

/// On-disk JSON layout.
#[derive(Serialize, Deserialize)]
struct NetworkFile {
    nodes: usize,
    links: Vec<[NodeId; 2]>,
    source: NodeId,
    sink: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_count: usize,
    links: Vec<(NodeId, NodeId)>,
    source: NodeId,
    sink: NodeId,
    positions: Option<Vec<(f64, f64)>>,
}

impl Network {
    pub fn new(
        node_count: usize,
        links: Vec<(NodeId, NodeId)>,
        source: NodeId,
        sink: NodeId,
    ) -> Result<Self, NetworkError> {
        Self::with_positions(node_count, links, source, sink, None)
    }

    pub fn with_positions(
        node_count: usize,
        links: Vec<(NodeId, NodeId)>,
        source: NodeId,
        sink: NodeId,
        positions: Option<Vec<(f64, f64)>>,
    ) -> Result<Self, NetworkError> {
        if node_count < 2 {
            return Err(NetworkError::TooFewNodes(node_count));
        }
        for (role, node) in [("source", source), ("sink", sink)] {
            if node >= node_count {
                return Err(NetworkError::BadTerminal {
                    role,
                    node,
                    node_count,
                });
            }
        }
        if source == sink {
            return Err(NetworkError::SourceIsSink(source));
        }
        let mut seen: HashMap<(NodeId, NodeId), LinkId> = HashMap::with_capacity(links.len());
        for (link, &(u, v)) in links.iter().enumerate() {
            for node in [u, v] {
                if node >= node_count {
                    return Err(NetworkError::BadEndpoint {
                        link,
                        node,
                        node_count,
                    });
                }
            }
            if u == v {
                return Err(NetworkError::SelfLoop { link, node: u });
            }
            if let Some(&first) = seen.get(&(u.min(v), u.max(v))) {
                return Err(NetworkError::DuplicateLink { link, first, u, v });
            }
            seen.insert((u.min(v), u.max(v)), link);
        }
        if let Some(pos) = &positions {
            if pos.len() != node_count {
                return Err(NetworkError::PositionCount {
                    expected: node_count,
                    got: pos.len(),
                });
            }
            if let Some(node) = pos
                .iter()
                .position(|(x, y)| !x.is_finite() || !y.is_finite())
            {
                return Err(NetworkError::NonFinitePosition(node));
            }
        }
        Ok(Self {
            node_count,
            links,
            source,
            sink,
            positions,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    /// Same graph and positions with different end nodes.
    pub fn with_endpoints(&self, source: NodeId, sink: NodeId) -> Result<Self, NetworkError> {
        Self::with_positions(
            self.node_count,
            self.links.clone(),
            source,
            sink,
            self.positions.clone(),
        )
    }

    /// Per node, the incident `(link, neighbour)` pairs in link-id order.
    pub fn incidence(&self) -> Vec<Vec<(LinkId, NodeId)>> {
        let mut inc = vec![Vec::new(); self.node_count];
        for (l, &(u, v)) in self.links.iter().enumerate() {
            inc[u].push((l, v));
            inc[v].push((l, u));
        }
        inc
    }
}

pub fn parse_network(text: &str) -> Result<Network, NetworkError> {
    let file: NetworkFile = serde_json::from_str(text)?;
    Network::with_positions(
        file.nodes,
        file.links.into_iter().map(|[u, v]| (u, v)).collect(),
        file.source,
        file.sink,
        file.positions
            .map(|p| p.into_iter().map(|[x, y]| (x, y)).collect()),
    )
}

/// Canonical JSON text. Re-parsing yields a structurally equal network.
pub fn serialize_network(net: &Network) -> String {
    let file = NetworkFile {
        nodes: net.node_count,
        links: net.links.iter().map(|&(u, v)| [u, v]).collect(),
        source: net.source,
        sink: net.sink,
        positions: net
            .positions
            .as_ref()
            .map(|p| p.iter().map(|&(x, y)| [x, y]).collect()),
    };
    serde_json::to_string(&file).expect("network serialization cannot fail")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Routability {
    pub max_disjoint_paths: usize,
}

/// Maximum number of edge-disjoint source→sink paths; 0 means disconnected.
pub fn validate_routable(net: &Network) -> Routability {
    Routability {
        max_disjoint_paths: maxflow::edge_disjoint_paths(
            net.node_count,
            &net.links,
            net.source,
            net.sink,
        ),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PatternError {
    #[error("pattern has {got} loads for {expected} links")]
    LengthMismatch { expected: usize, got: usize },
    #[error("link {link} load {load} outside [0, 1]")]
    LoadOutOfRange { link: LinkId, load: f64 },
    #[error("link {link} direction {from}->{to} does not match its endpoints")]
    BadDirection {
        link: LinkId,
        from: NodeId,
        to: NodeId,
    },
    #[error("link {link} has positive load but no direction")]
    MissingDirection { link: LinkId },
    #[error("flow imbalance {imbalance} at node {node}")]
    Conservation { node: NodeId, imbalance: f64 },
    #[error("directed pattern has a cycle through node {0}")]
    Cycle(NodeId),
}

/// Per-link relative load of a unit source→sink flow.
///
/// `directions[l]` is `Some((from, to))` for every link with positive load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPattern {
    pub loads: Vec<f64>,
    pub directions: Vec<Option<(NodeId, NodeId)>>,
}

impl FlowPattern {
    pub fn zero(link_count: usize) -> Self {
        Self {
            loads: vec![0.0; link_count],
            directions: vec![None; link_count],
        }
    }

    /// Builds a pattern from per-link signed flow; positive means along the
    /// stored `(u, v)` orientation. Magnitudes at or below `zero_eps` are
    /// dropped.
    pub fn from_signed(net: &Network, signed: &[f64], zero_eps: f64) -> Self {
        let mut pattern = Self::zero(net.link_count());
        for (l, (&f, &(u, v))) in signed.iter().zip(net.links()).enumerate() {
            if f > zero_eps {
                pattern.loads[l] = f;
                pattern.directions[l] = Some((u, v));
            } else if f < -zero_eps {
                pattern.loads[l] = -f;
                pattern.directions[l] = Some((v, u));
            }
        }
        pattern
    }

    /// Signed flow per link relative to the stored link orientation.
    pub fn signed_flows(&self, net: &Network) -> Vec<f64> {
        self.loads
            .iter()
            .zip(&self.directions)
            .zip(net.links())
            .map(|((&load, dir), &(u, _))| match dir {
                Some((from, _)) if *from == u => load,
                Some(_) => -load,
                None => 0.0,
            })
            .collect()
    }

    /// Links carrying load above `eps`.
    pub fn footprint(&self, eps: f64) -> Vec<LinkId> {
        (0..self.loads.len())
            .filter(|&l| self.loads[l] > eps)
            .collect()
    }

    /// Net outflow minus required supply at every node (source supplies 1,
    /// sink absorbs 1).
    pub fn imbalances(&self, net: &Network) -> Vec<f64> {
        let mut excess = vec![0.0; net.node_count()];
        for (l, dir) in self.directions.iter().enumerate() {
            if let Some((from, to)) = *dir {
                excess[from] += self.loads[l];
                excess[to] -= self.loads[l];
            }
        }
        excess[net.source()] -= 1.0;
        excess[net.sink()] += 1.0;
        excess
    }

    /// Checks load bounds, directions, conservation within `flow_eps`, and
    /// acyclicity of the directed positive-load subgraph.
    pub fn check(&self, net: &Network, flow_eps: f64) -> Result<(), PatternError> {
        if self.loads.len() != net.link_count() || self.directions.len() != net.link_count() {
            return Err(PatternError::LengthMismatch {
                expected: net.link_count(),
                got: self.loads.len().min(self.directions.len()),
            });
        }
        for (link, (&load, dir)) in self.loads.iter().zip(&self.directions).enumerate() {
            if !(-LOAD_BOUND_EPS..=1.0 + LOAD_BOUND_EPS).contains(&load) {
                return Err(PatternError::LoadOutOfRange { link, load });
            }
            match *dir {
                Some((from, to)) => {
                    let (u, v) = net.links()[link];
                    if !((from, to) == (u, v) || (from, to) == (v, u)) {
                        return Err(PatternError::BadDirection { link, from, to });
                    }
                }
                None if load > LOAD_BOUND_EPS => {
                    return Err(PatternError::MissingDirection { link });
                }
                None => {}
            }
        }
        if let Some((node, &imbalance)) = self
            .imbalances(net)
            .iter()
            .enumerate()
            .find(|(_, e)| e.abs() > flow_eps)
        {
            return Err(PatternError::Conservation { node, imbalance });
        }
        match self.topological_order(net) {
            Ok(_) => Ok(()),
            Err(node) => Err(PatternError::Cycle(node)),
        }
    }

    /// Kahn's algorithm over the directed positive-load subgraph; on a cycle,
    /// returns a node that lies on or behind it.
    pub fn topological_order(&self, net: &Network) -> Result<Vec<NodeId>, NodeId> {
        let n = net.node_count();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (l, dir) in self.directions.iter().enumerate() {
            if let Some((from, to)) = *dir {
                if self.loads[l] > 0.0 {
                    out[from].push(to);
                    indeg[to] += 1;
                }
            }
        }
        let mut stack: Vec<NodeId> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = stack.pop() {
            order.push(v);
            for &w in &out[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    stack.push(w);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err((0..n).find(|&v| indeg[v] > 0).unwrap_or(0))
        }
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "network({} nodes, {} links, {}->{})",
            self.node_count,
            self.links.len(),
            self.source,
            self.sink
        )
    }
}
