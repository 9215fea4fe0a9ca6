//! Layered capillary routing.
//!
//! Each layer minimises the maximal load over the links not yet frozen,
//! then a bottleneck hunting loop separates the links that sit at that
//! maximum in every optimal flow from the ones that merely happen to in the
//! first solution. The true bottlenecks are frozen at the layer value and
//! the next layer repeats on the remaining links. The routing pattern as of
//! layer `k` is the frozen loads of layers `1..=k` plus a min-cost routing
//! of whatever flow they do not yet carry, within the last layer's load.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lpcore::{FlowLp, FlowLpSolution, LpError, LpStatus, EPS_LOAD};
use crate::netmodel::{validate_routable, FlowPattern, LinkId, Network, NodeId};

pub const DEFAULT_MAX_LAYERS: usize = 10;

/// Signed flows at or below this magnitude are treated as LP noise.
const FLOW_ZERO: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CapillaryError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("network has no source-sink path")]
    Unroutable,
    #[error("max_layers must be at least 1")]
    NoLayers,
    #[error("{stage} LP of layer {layer} is infeasible")]
    Infeasible { stage: &'static str, layer: usize },
    #[error("layer {layer} found no bottleneck")]
    NoBottleneck { layer: usize },
}

/// A frozen link load and the direction it flows in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedLoad {
    pub load: f64,
    /// Along the stored `(u, v)` orientation of the link.
    pub forward: bool,
    pub layer: usize,
}

/// Per-link frozen loads, indexed by link id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixedLoads(Vec<Option<FixedLoad>>);

impl FixedLoads {
    pub fn new(link_count: usize) -> Self {
        Self(vec![None; link_count])
    }

    pub fn get(&self, link: LinkId) -> Option<FixedLoad> {
        self.0[link]
    }

    pub fn is_fixed(&self, link: LinkId) -> bool {
        self.0[link].is_some()
    }

    pub fn set(&mut self, link: LinkId, fixed: FixedLoad) {
        self.0[link] = Some(fixed);
    }

    pub fn count(&self) -> usize {
        self.0.iter().flatten().count()
    }

    fn apply(&self, lp: &mut FlowLp<'_>) {
        for (l, f) in self.0.iter().enumerate() {
            if let Some(f) = f {
                lp.fix_load(l, f.forward, f.load);
            }
        }
    }

    /// Frozen load of the most recent layer, which is also the smallest.
    pub fn last_layer_load(&self) -> Option<f64> {
        self.0
            .iter()
            .flatten()
            .max_by(|a, b| a.layer.cmp(&b.layer).then(b.load.total_cmp(&a.load)))
            .map(|f| f.load)
    }

    fn signed(&self, link: LinkId) -> Option<f64> {
        self.0[link].map(|f| if f.forward { f.load } else { -f.load })
    }

    /// Largest conservation violation of the frozen loads taken alone.
    fn enclosure_gap(&self, net: &Network) -> f64 {
        let mut excess = vec![0.0; net.node_count()];
        for (l, &(u, v)) in net.links().iter().enumerate() {
            if let Some(f) = self.signed(l) {
                excess[u] += f;
                excess[v] -= f;
            }
        }
        excess[net.source()] -= 1.0;
        excess[net.sink()] += 1.0;
        excess.iter().fold(0.0, |a, e| a.max(e.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerResult {
    pub k: usize,
    pub u: f64,
    pub bottlenecks: Vec<LinkId>,
    pub hunting_trace: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CapillaryResult {
    pub layers: Vec<LayerResult>,
    pub pattern: FlowPattern,
    pub complete: bool,
    /// `layer_patterns[k - 1]` is the routing pattern as of layer `k`.
    pub layer_patterns: Vec<FlowPattern>,
    pub fixed: FixedLoads,
}

impl CapillaryResult {
    /// Pattern as of layer `k` (1-based). Past the last built layer the
    /// final pattern applies.
    pub fn pattern_at(&self, k: usize) -> &FlowPattern {
        let idx = k.clamp(1, self.layer_patterns.len()) - 1;
        &self.layer_patterns[idx]
    }
}

/// Outcome of the hunting loop.
#[derive(Debug, Clone)]
pub struct Hunt {
    pub bottlenecks: Vec<LinkId>,
    pub trace: Vec<usize>,
    /// Bottleneck directions from the last hunting solution.
    pub forward: Vec<bool>,
}

fn optimal(
    sol: FlowLpSolution,
    stage: &'static str,
    layer: usize,
) -> Result<FlowLpSolution, CapillaryError> {
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(CapillaryError::Infeasible { stage, layer }),
    }
}

/// Minimal maximal load over non-fixed links, with its solution.
pub fn min_max_layer(
    net: &Network,
    fixed: &FixedLoads,
    k: usize,
) -> Result<(f64, FlowLpSolution), CapillaryError> {
    let mut lp = FlowLp::new(net);
    fixed.apply(&mut lp);
    lp.minimize_bound();
    for l in (0..net.link_count()).filter(|&l| !fixed.is_fixed(l)) {
        lp.cap_load_by_bound(l);
    }
    let sol = optimal(lp.solve()?, "min-max", k)?;
    Ok((sol.bound.unwrap_or(sol.objective_value), sol))
}

/// Runs the hunting loop from `suspects`, the non-fixed links at maximal
/// load in a min-max solution. Every iteration minimises the total suspect
/// load with all non-fixed links capped at `u` and drops suspects that fall
/// below `u`; the loop ends when an iteration drops nothing.
pub fn hunt_bottlenecks(
    net: &Network,
    fixed: &FixedLoads,
    u: f64,
    suspects: Vec<LinkId>,
    layer: usize,
) -> Result<Hunt, CapillaryError> {
    let mut suspects = suspects;
    let mut trace = Vec::new();
    loop {
        trace.push(suspects.len());
        if suspects.is_empty() {
            return Err(CapillaryError::NoBottleneck { layer });
        }
        let mut lp = FlowLp::new(net);
        fixed.apply(&mut lp);
        for l in (0..net.link_count()).filter(|&l| !fixed.is_fixed(l)) {
            lp.cap_arcs(l, u);
        }
        for &l in &suspects {
            lp.add_load_cost(l, 1.0);
        }
        let sol = optimal(lp.solve()?, "hunting", layer)?;
        let before = suspects.len();
        suspects.retain(|&l| sol.load(l) >= u - EPS_LOAD);
        if suspects.len() == before {
            let forward = suspects.iter().map(|&l| sol.signed(l) > 0.0).collect();
            return Ok(Hunt {
                bottlenecks: suspects,
                trace,
                forward,
            });
        }
    }
}

/// Builds layer `k` over the current frozen set and freezes its
/// bottlenecks into `fixed`.
pub fn build_layer(
    net: &Network,
    fixed: &mut FixedLoads,
    k: usize,
) -> Result<LayerResult, CapillaryError> {
    let (u, sol) = min_max_layer(net, fixed, k)?;
    let suspects: Vec<LinkId> = (0..net.link_count())
        .filter(|&l| !fixed.is_fixed(l) && sol.load(l) >= u - EPS_LOAD)
        .collect();
    let hunt = hunt_bottlenecks(net, fixed, u, suspects, k)?;
    for (&l, &forward) in hunt.bottlenecks.iter().zip(&hunt.forward) {
        fixed.set(
            l,
            FixedLoad {
                load: u,
                forward,
                layer: k,
            },
        );
    }
    Ok(LayerResult {
        k,
        u,
        bottlenecks: hunt.bottlenecks,
        hunting_trace: hunt.trace,
    })
}

/// Frozen loads plus a min-total-load routing of the remaining flow over
/// the non-fixed links, with directed cycles cancelled. Non-fixed links stay
/// within the last layer's load.
pub fn complete_residual(net: &Network, fixed: &FixedLoads) -> Result<FlowPattern, CapillaryError> {
    let mut signed = vec![0.0; net.link_count()];
    if fixed.enclosure_gap(net) > EPS_LOAD {
        let mut lp = FlowLp::new(net);
        fixed.apply(&mut lp);
        let cap = fixed.last_layer_load();
        for l in (0..net.link_count()).filter(|&l| !fixed.is_fixed(l)) {
            lp.add_load_cost(l, 1.0);
            if let Some(cap) = cap {
                lp.cap_arcs(l, cap);
            }
        }
        let sol = optimal(lp.solve()?, "residual", 0)?;
        for (l, s) in signed.iter_mut().enumerate() {
            *s = sol.signed(l);
        }
    }
    for (l, s) in signed.iter_mut().enumerate() {
        if let Some(f) = fixed.signed(l) {
            *s = f;
        }
    }
    cancel_cycles(net, &mut signed);
    let mut pattern = FlowPattern::from_signed(net, &signed, FLOW_ZERO);
    for load in &mut pattern.loads {
        *load = load.min(1.0);
    }
    Ok(pattern)
}

/// Removes directed cycles from a signed link flow. Cycles are found by a
/// depth-first search over nodes and incident links in id order; each is
/// cancelled by its smallest flow, which zeroes at least one link.
pub fn cancel_cycles(net: &Network, signed: &mut [f64]) {
    let inc = net.incidence();
    let links = net.links();
    let out_flow = |signed: &[f64], l: LinkId, from: NodeId| -> f64 {
        let f = signed[l];
        if links[l].0 == from {
            f
        } else {
            -f
        }
    };
    for f in signed.iter_mut() {
        if f.abs() <= FLOW_ZERO {
            *f = 0.0;
        }
    }
    'search: loop {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut color = vec![0u8; net.node_count()];
        let mut via: Vec<Option<LinkId>> = vec![None; net.node_count()];
        for root in 0..net.node_count() {
            if color[root] != 0 {
                continue;
            }
            let mut stack: Vec<(NodeId, usize)> = vec![(root, 0)];
            color[root] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if *next < inc[v].len() {
                    let (l, w) = inc[v][*next];
                    *next += 1;
                    if out_flow(signed, l, v) <= 0.0 {
                        continue;
                    }
                    match color[w] {
                        0 => {
                            color[w] = 1;
                            via[w] = Some(l);
                            stack.push((w, 0));
                        }
                        1 => {
                            // cycle: w -> ... -> v -> w
                            let mut cycle = vec![(l, v)];
                            let mut x = v;
                            while x != w {
                                let pl = via[x].expect("stack node has parent link");
                                let (a, b) = links[pl];
                                let prev = if a == x { b } else { a };
                                cycle.push((pl, prev));
                                x = prev;
                            }
                            let delta = cycle
                                .iter()
                                .map(|&(cl, from)| out_flow(signed, cl, from))
                                .fold(f64::INFINITY, f64::min);
                            for &(cl, from) in &cycle {
                                let dir = if links[cl].0 == from { 1.0 } else { -1.0 };
                                signed[cl] -= dir * delta;
                                if signed[cl].abs() <= FLOW_ZERO {
                                    signed[cl] = 0.0;
                                }
                            }
                            continue 'search;
                        }
                        _ => {}
                    }
                } else {
                    color[v] = 2;
                    stack.pop();
                }
            }
        }
        break;
    }
}

/// Full construction: layers until the frozen links carry the whole flow or
/// `max_layers` is reached, with the routing pattern recorded per layer.
pub fn build_capillary(
    net: &Network,
    max_layers: usize,
) -> Result<CapillaryResult, CapillaryError> {
    if max_layers == 0 {
        return Err(CapillaryError::NoLayers);
    }
    if validate_routable(net).max_disjoint_paths == 0 {
        return Err(CapillaryError::Unroutable);
    }
    let mut fixed = FixedLoads::new(net.link_count());
    let mut layers = Vec::new();
    let mut layer_patterns = Vec::new();
    let mut complete = false;
    for k in 1..=max_layers {
        layers.push(build_layer(net, &mut fixed, k)?);
        complete = fixed.enclosure_gap(net) <= EPS_LOAD;
        layer_patterns.push(complete_residual(net, &fixed)?);
        if complete {
            break;
        }
    }
    Ok(CapillaryResult {
        layers,
        pattern: layer_patterns.last().cloned().expect("at least one layer"),
        complete,
        layer_patterns,
        fixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Network {
        Network::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap()
    }

    fn bridge() -> Network {
        Network::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)], 0, 3).unwrap()
    }

    #[test]
    fn diamond_completes_in_one_layer() {
        let r = build_capillary(&diamond(), 10).unwrap();
        assert_eq!(r.layers.len(), 1);
        assert!(r.complete);
        let l1 = &r.layers[0];
        assert!((l1.u - 0.5).abs() < 1e-9);
        assert_eq!(l1.bottlenecks, vec![0, 1, 2, 3]);
        assert_eq!(l1.hunting_trace, vec![4]);
        assert!(r.pattern.loads.iter().all(|&x| (x - 0.5).abs() < 1e-9));
    }

    #[test]
    fn bridge_never_becomes_a_bottleneck() {
        let net = bridge();
        let r = build_capillary(&net, 10).unwrap();
        assert!((r.layers[0].u - 0.5).abs() < 1e-9);
        assert_eq!(r.layers[0].bottlenecks, vec![0, 1, 2, 3]);
        assert!(r.complete);
        assert_eq!(r.pattern.loads[4], 0.0);
        r.pattern.check(&net, 1e-9).unwrap();
    }

    #[test]
    fn single_path_is_degenerate_but_complete() {
        let net = Network::new(3, vec![(0, 1), (1, 2)], 0, 2).unwrap();
        let r = build_capillary(&net, 10).unwrap();
        assert_eq!(r.layers.len(), 1);
        assert!((r.layers[0].u - 1.0).abs() < 1e-9);
        assert_eq!(r.layers[0].bottlenecks, vec![0, 1]);
        assert!(r.complete);
    }

    #[test]
    fn unroutable_and_zero_layers_rejected() {
        let net = Network::new(4, vec![(0, 1), (2, 3)], 0, 3).unwrap();
        assert!(matches!(
            build_capillary(&net, 3),
            Err(CapillaryError::Unroutable)
        ));
        assert!(matches!(
            build_capillary(&diamond(), 0),
            Err(CapillaryError::NoLayers)
        ));
    }

    #[test]
    fn cycle_cancellation_removes_circulation() {
        // triangle 0-1-2 with a circulation on top of a 0->3 flow
        let net = Network::new(4, vec![(0, 1), (1, 2), (2, 0), (0, 3)], 0, 3).unwrap();
        let mut signed = vec![0.25, 0.25, 0.25, 1.0];
        cancel_cycles(&net, &mut signed);
        assert_eq!(signed, vec![0.0, 0.0, 0.0, 1.0]);
        // partial: one cycle link carries less
        let mut signed = vec![0.5, 0.25, 0.25, 1.0];
        cancel_cycles(&net, &mut signed);
        assert_eq!(signed, vec![0.25, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn residual_of_complete_layer_adds_nothing() {
        let net = diamond();
        let mut fixed = FixedLoads::new(4);
        build_layer(&net, &mut fixed, 1).unwrap();
        let p = complete_residual(&net, &fixed).unwrap();
        assert_eq!(p.footprint(EPS_LOAD).len(), 4);
        p.check(&net, 1e-9).unwrap();
    }
}
