//! Embedding solutions shared by the heuristic, the exact oracle and the
//! MILP decoder, together with the constraint validator and the provisioning
//! cost evaluation.
//!
//! Link accounting follows the model semantics: within one `(tree, segment)`
//! a link carries the tree's rate once no matter how many destinations route
//! over it, and distinct `(tree, segment)` uses of the same link add up.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::service::ServiceRequest;
use crate::substrate::{ResourceDelta, SubstrateNetwork};
use crate::{LinkId, NodeId, Rate};

/// Feasibility slack for floating-point capacity and rate comparisons.
pub const FEAS_TOL: f64 = 1e-9;

/// An NF instance on an NFV node: chain position `nf_index` (1-based),
/// serving a subset of the request's destinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub node: NodeId,
    pub nf_index: usize,
    pub served_destinations: Vec<NodeId>,
}

/// One routed stage of the chain for one destination in one tree.
///
/// Segment `nf_index = i` runs from the instance of the `i`-th NF serving
/// `destination` (the source when `i = 0`) to the instance of the `i+1`-th NF
/// (the destination itself when `i = |chain|`). `links` form a contiguous
/// directed walk; an empty walk means the two instances are co-located.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedSegment {
    pub tree: usize,
    pub nf_index: usize,
    pub destination: NodeId,
    pub links: Vec<LinkId>,
    pub rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSolution {
    pub request: usize,
    pub placements: Vec<Placement>,
    pub segments: Vec<RoutedSegment>,
    /// Rate carried by tree `k` at position `k - 1`.
    pub tree_rates: Vec<Rate>,
    pub total_cost: f64,
}

impl EmbeddingSolution {
    pub fn empty(request: usize) -> Self {
        EmbeddingSolution {
            request,
            placements: Vec::new(),
            segments: Vec::new(),
            tree_rates: Vec::new(),
            total_cost: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty() && self.segments.is_empty()
    }

    /// Total rate allocated on each link: per `(tree, segment)` a used link
    /// carries the largest segment rate that routes over it; distinct
    /// `(tree, segment)` groups add up.
    pub fn allocated_link_rates(&self) -> BTreeMap<LinkId, Rate> {
        let mut per_group: BTreeMap<(usize, usize), BTreeMap<LinkId, Rate>> = BTreeMap::new();
        for seg in &self.segments {
            let group = per_group.entry((seg.tree, seg.nf_index)).or_default();
            for &l in &seg.links {
                let slot = group.entry(l).or_insert(0.0);
                if seg.rate > *slot {
                    *slot = seg.rate;
                }
            }
        }
        let mut totals: BTreeMap<LinkId, Rate> = BTreeMap::new();
        for group in per_group.values() {
            for (&l, &rate) in group {
                *totals.entry(l).or_insert(0.0) += rate;
            }
        }
        totals
    }

    /// Processing demand per node, one share per instance regardless of how
    /// many destinations it serves.
    pub fn node_demands(&self, r: &ServiceRequest) -> BTreeMap<NodeId, Rate> {
        let mut demands: BTreeMap<NodeId, Rate> = BTreeMap::new();
        for p in &self.placements {
            let demand = r.chain[p.nf_index - 1].processing_demand;
            *demands.entry(p.node).or_insert(0.0) += demand;
        }
        demands
    }

    /// The amounts an accepting admission run must reserve.
    pub fn resource_deltas(&self, r: &ServiceRequest) -> ResourceDelta {
        ResourceDelta {
            links: self.allocated_link_rates().into_iter().collect(),
            nodes: self.node_demands(r).into_iter().collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Violation {
    #[error("malformed solution: {0}")]
    Structure(String),
    #[error("destination {destination} is not served by exactly one instance of NF {nf_index}")]
    Coverage { destination: NodeId, nf_index: usize },
    #[error("NF {nf_index} placed on endpoint node {node}")]
    EndpointPlacement { node: NodeId, nf_index: usize },
    #[error("node {node} is not an NFV node")]
    NotNfv { node: NodeId },
    #[error("node {node} does not admit NF type {nf_type} (chain position {nf_index})")]
    NotAdmittable { node: NodeId, nf_index: usize, nf_type: usize },
    #[error("node capacity exceeded on {node}: demand {demand}, available {available}")]
    NodeCapacity { node: NodeId, demand: Rate, available: Rate },
    #[error("{used} trees used, request allows {allowed}")]
    TreeCount { used: usize, allowed: usize },
    #[error("tree rates deliver {delivered}, request needs {required}")]
    DemandShortfall { delivered: Rate, required: Rate },
    #[error("chain order broken for destination {destination} at segment {nf_index}: {detail}")]
    ChainOrder { destination: NodeId, nf_index: usize, detail: String },
    #[error("segment walk broken (tree {tree}, segment {nf_index}, destination {destination})")]
    BrokenWalk { tree: usize, nf_index: usize, destination: NodeId },
    #[error("stage {nf_index} for destination {destination} carries {delivered}, needs {required}")]
    StageShortfall { destination: NodeId, nf_index: usize, delivered: Rate, required: Rate },
    #[error("link capacity exceeded on {link}: allocated {allocated}, available {available}")]
    LinkCapacity { link: LinkId, allocated: Rate, available: Rate },
}

/// Map `(destination, nf_index)` to the hosting node, requiring exactly one
/// instance per pair.
fn host_map(
    sol: &EmbeddingSolution,
    r: &ServiceRequest,
) -> Result<BTreeMap<(NodeId, usize), NodeId>, Violation> {
    let mut hosts: BTreeMap<(NodeId, usize), NodeId> = BTreeMap::new();
    for p in &sol.placements {
        if p.nf_index == 0 || p.nf_index > r.chain.len() {
            return Err(Violation::Structure(format!(
                "placement references chain position {} of a {}-NF chain",
                p.nf_index,
                r.chain.len()
            )));
        }
        if p.served_destinations.is_empty() {
            return Err(Violation::Structure(format!(
                "instance of NF {} on node {} serves no destination",
                p.nf_index, p.node
            )));
        }
        for &t in &p.served_destinations {
            if !r.destinations.contains(&t) {
                return Err(Violation::Structure(format!("{t} is not a destination")));
            }
            if hosts.insert((t, p.nf_index), p.node).is_some() {
                return Err(Violation::Coverage { destination: t, nf_index: p.nf_index });
            }
        }
    }
    for &t in &r.destinations {
        for i in 1..=r.chain.len() {
            if !hosts.contains_key(&(t, i)) {
                return Err(Violation::Coverage { destination: t, nf_index: i });
            }
        }
    }
    Ok(hosts)
}

/// Check every solution invariant against the network's current residual
/// state; returns the first violated constraint.
pub fn validate_solution(
    sol: &EmbeddingSolution,
    net: &SubstrateNetwork,
    r: &ServiceRequest,
) -> Result<(), Violation> {
    let hosts = host_map(sol, r)?;

    for p in &sol.placements {
        let node = net.node(p.node);
        if p.node == r.source || p.served_destinations.contains(&p.node) {
            return Err(Violation::EndpointPlacement { node: p.node, nf_index: p.nf_index });
        }
        if !node.is_nfv() {
            return Err(Violation::NotNfv { node: p.node });
        }
        let nf_type = r.chain[p.nf_index - 1].nf_type;
        if !node.admits(nf_type) {
            return Err(Violation::NotAdmittable { node: p.node, nf_index: p.nf_index, nf_type });
        }
    }

    for (&node, &demand) in &sol.node_demands(r) {
        let available = net.residual_node(node);
        if demand > available + FEAS_TOL {
            return Err(Violation::NodeCapacity { node, demand, available });
        }
    }

    if sol.tree_rates.len() > r.max_trees {
        return Err(Violation::TreeCount { used: sol.tree_rates.len(), allowed: r.max_trees });
    }
    let delivered: Rate = sol.tree_rates.iter().sum();
    if delivered + FEAS_TOL < r.rate {
        return Err(Violation::DemandShortfall { delivered, required: r.rate });
    }

    // Per-(tree, segment, destination) walks: contiguity, endpoints matching
    // the chain hosts, and at most one walk per key.
    let mut seen: BTreeSet<(usize, usize, NodeId)> = BTreeSet::new();
    let stages = r.chain.len() + 1;
    let mut stage_delivery: BTreeMap<(NodeId, usize), Rate> = BTreeMap::new();
    for seg in &sol.segments {
        if seg.tree == 0 || seg.tree > sol.tree_rates.len() {
            return Err(Violation::Structure(format!("segment references unknown tree {}", seg.tree)));
        }
        if seg.nf_index >= stages {
            return Err(Violation::Structure(format!(
                "segment index {} out of range for a {}-NF chain",
                seg.nf_index,
                r.chain.len()
            )));
        }
        if !r.destinations.contains(&seg.destination) {
            return Err(Violation::Structure(format!("{} is not a destination", seg.destination)));
        }
        if !(seg.rate > 0.0) {
            return Err(Violation::Structure("segment rate must be positive".into()));
        }
        if !seen.insert((seg.tree, seg.nf_index, seg.destination)) {
            return Err(Violation::Structure(format!(
                "duplicate segment (tree {}, segment {}, destination {})",
                seg.tree, seg.nf_index, seg.destination
            )));
        }
        let t = seg.destination;
        let from = if seg.nf_index == 0 { r.source } else { hosts[&(t, seg.nf_index)] };
        let to = if seg.nf_index == r.chain.len() { t } else { hosts[&(t, seg.nf_index + 1)] };
        let mut at = from;
        for &l in &seg.links {
            if l >= net.link_count() {
                return Err(Violation::Structure(format!("segment uses unknown link {l}")));
            }
            let link = net.link(l);
            if link.tail != at {
                return Err(Violation::BrokenWalk {
                    tree: seg.tree,
                    nf_index: seg.nf_index,
                    destination: t,
                });
            }
            at = link.head;
        }
        if at != to {
            return Err(Violation::ChainOrder {
                destination: t,
                nf_index: seg.nf_index,
                detail: format!("walk ends at {at}, next chain stop is {to}"),
            });
        }
        *stage_delivery.entry((t, seg.nf_index)).or_insert(0.0) += seg.rate;
    }

    // Every stage with distinct endpoints must carry the full demand.
    for &t in &r.destinations {
        for i in 0..stages {
            let from = if i == 0 { r.source } else { hosts[&(t, i)] };
            let to = if i == r.chain.len() { t } else { hosts[&(t, i + 1)] };
            if from == to {
                continue;
            }
            let delivered = stage_delivery.get(&(t, i)).copied().unwrap_or(0.0);
            if delivered + FEAS_TOL < r.rate {
                return Err(Violation::StageShortfall {
                    destination: t,
                    nf_index: i,
                    delivered,
                    required: r.rate,
                });
            }
        }
    }

    for (&l, &allocated) in &sol.allocated_link_rates() {
        let available = net.residual_link(l);
        if allocated > available + FEAS_TOL {
            return Err(Violation::LinkCapacity { link: l, allocated, available });
        }
    }

    Ok(())
}

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("invalid solution: {0}")]
    Invalid(#[from] Violation),
}

/// Provisioning cost of a validated solution against the network's current
/// residual rates: `alpha * sum over used (link, tree, segment) of
/// (rate/B(l) + 1) + beta * sum over instances of demand/C(n)`.
pub fn evaluate_cost(
    sol: &EmbeddingSolution,
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    alpha: f64,
    beta: f64,
) -> Result<f64, SolutionError> {
    if sol.is_empty() {
        return Ok(0.0);
    }
    validate_solution(sol, net, r)?;
    Ok(cost_unchecked(sol, net, r, alpha, beta))
}

/// Cost of a solution assumed valid.
pub fn cost_unchecked(
    sol: &EmbeddingSolution,
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    alpha: f64,
    beta: f64,
) -> f64 {
    let mut per_group: BTreeMap<(usize, usize), BTreeMap<LinkId, Rate>> = BTreeMap::new();
    for seg in &sol.segments {
        let group = per_group.entry((seg.tree, seg.nf_index)).or_default();
        for &l in &seg.links {
            let slot = group.entry(l).or_insert(0.0);
            if seg.rate > *slot {
                *slot = seg.rate;
            }
        }
    }
    let mut cost = 0.0;
    for group in per_group.values() {
        for (&l, &rate) in group {
            cost += alpha * (rate / net.residual_link(l) + 1.0);
        }
    }
    for p in &sol.placements {
        let demand = r.chain[p.nf_index - 1].processing_demand;
        cost += beta * demand / net.residual_node(p.node);
    }
    cost
}
