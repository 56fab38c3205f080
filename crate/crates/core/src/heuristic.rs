//! Joint placement and routing (JPR): key-node-preferred MST topology
//! construction, greedy sequential NF placement, corrective attachment of
//! missing NFs, and multipath extension with proportional rate splitting.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{self, SpTree};
use crate::service::ServiceRequest;
use crate::solution::{cost_unchecked, EmbeddingSolution, Placement, RoutedSegment};
use crate::substrate::{LinkRecord, NodeRecord, SubstrateNetwork};
use crate::{LinkId, NodeId, Rate, Weight};

#[derive(Debug, Clone)]
pub struct JprParams {
    pub alpha: f64,
    pub beta: f64,
    /// Stand-in processing rate for switch heads in the link weight; when
    /// unset, 0.1 times the smallest NFV processing capacity.
    pub switch_pseudo_capacity: Option<Rate>,
    /// Cap on loopless candidate paths enumerated per multipath extension.
    pub k_max: usize,
}

impl Default for JprParams {
    fn default() -> Self {
        JprParams { alpha: 0.6, beta: 0.4, switch_pseudo_capacity: None, k_max: 16 }
    }
}

impl JprParams {
    pub fn with_weights(alpha: f64, beta: f64) -> Self {
        JprParams { alpha, beta, ..Default::default() }
    }

    fn check(&self) -> Result<(), EmbedError> {
        if !(self.alpha > 0.0) || !(self.beta > 0.0) || (self.alpha + self.beta - 1.0).abs() > 1e-9
        {
            return Err(EmbedError::InvalidArgument(format!(
                "alpha and beta must be positive and sum to 1, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if self.k_max == 0 {
            return Err(EmbedError::InvalidArgument("k_max must be at least 1".into()));
        }
        Ok(())
    }

    fn pseudo_capacity(&self, net: &SubstrateNetwork) -> Rate {
        if let Some(p) = self.switch_pseudo_capacity {
            return p;
        }
        let min_cap =
            net.nfv_nodes().map(|n| n.processing_capacity).fold(f64::INFINITY, f64::min);
        if min_cap.is_finite() {
            0.1 * min_cap
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InfeasibleReason {
    #[error("no admissible NFV node for NF type {nf_type}")]
    NoAdmissibleNfvNode { nf_type: usize },
    #[error("no multicast topology connects the endpoints")]
    NoTopology,
    #[error("no NFV node can host NF {nf_index} near the topology")]
    NoCorrectiveHost { nf_index: usize },
    #[error("multipath extension exhausted: {found} disjoint paths carry {supported} of {demand} between {from} and {to}")]
    MultipathExhausted { from: NodeId, to: NodeId, found: usize, supported: Rate, demand: Rate },
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("Infeasible: {0}")]
    Infeasible(InfeasibleReason),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Routing weight of one link for a request of the given rate:
/// `alpha * (rate/B + 1) + beta * rate/C(head)`, with the head capacity
/// replaced by `switch_pseudo_capacity` when the head is a switch.
pub fn link_weight(
    link: &LinkRecord,
    head: &NodeRecord,
    rate: Rate,
    alpha: f64,
    beta: f64,
    switch_pseudo_capacity: Rate,
) -> Result<Weight, EmbedError> {
    if !(rate > 0.0) {
        return Err(EmbedError::InvalidArgument("rate must be positive".into()));
    }
    if !(alpha > 0.0) || !(beta > 0.0) || (alpha + beta - 1.0).abs() > 1e-9 {
        return Err(EmbedError::InvalidArgument("alpha + beta must equal 1, both positive".into()));
    }
    let c = if head.is_nfv() { head.processing_capacity } else { switch_pseudo_capacity };
    if !(link.capacity > 0.0) || !(c > 0.0) {
        return Err(EmbedError::InvalidArgument("capacities must be positive".into()));
    }
    Ok(alpha * (rate / link.capacity + 1.0) + beta * rate / c)
}

fn weight_value(b: Rate, c: Rate, rate: Rate, alpha: f64, beta: f64) -> Weight {
    alpha * (rate / b + 1.0) + beta * rate / c
}

/// Per-link weights over the residual graph; exhausted links are excluded.
/// NFV heads with less residual processing than the pseudo capacity weigh
/// like switches so they stay routable.
fn residual_weights(
    net: &SubstrateNetwork,
    rate: Rate,
    alpha: f64,
    beta: f64,
    pseudo: Rate,
    avail: impl Fn(LinkId) -> Rate,
) -> Vec<Weight> {
    net.links()
        .iter()
        .map(|l| {
            let b = avail(l.id);
            if b <= 0.0 {
                return f64::INFINITY;
            }
            let head = net.node(l.head);
            let c = if head.is_nfv() { net.residual_node(l.head).max(pseudo) } else { pseudo };
            weight_value(b, c, rate, alpha, beta)
        })
        .collect()
}

/// Per-destination walks from the source, node sequences.
#[derive(Debug, Clone, Default)]
pub struct MulticastTree {
    pub walks: BTreeMap<NodeId, Vec<NodeId>>,
}

/// Result of greedy placement over a multicast tree.
#[derive(Debug, Clone, Default)]
pub struct GreedyPlacement {
    /// `(node, chain position) -> destinations served there`.
    pub instances: BTreeMap<(NodeId, usize), BTreeSet<NodeId>>,
    /// Per destination: `(walk position, chain position, node)`, ascending.
    pub markers: BTreeMap<NodeId, Vec<(usize, usize, NodeId)>>,
    /// Number of chain NFs placed per destination (a chain prefix).
    pub placed: BTreeMap<NodeId, usize>,
    /// Processing demand committed per node.
    pub node_load: BTreeMap<NodeId, Rate>,
}

impl GreedyPlacement {
    pub fn placed_total(&self) -> usize {
        self.placed.values().sum()
    }

    fn has_instance(&self, node: NodeId, nf_index: usize) -> bool {
        self.instances.contains_key(&(node, nf_index))
    }

    fn join(&mut self, node: NodeId, nf_index: usize, dest: NodeId, pos: usize) {
        self.instances.entry((node, nf_index)).or_default().insert(dest);
        self.markers.entry(dest).or_default().push((pos, nf_index, node));
        *self.placed.entry(dest).or_insert(0) += 1;
    }
}

/// Walk each source-to-destination path in ascending destination order and
/// place the longest possible run of next-unplaced chain NFs at every
/// admissible NFV node with sufficient residual, reusing instances already
/// placed for this request at the same node and chain position.
pub fn greedy_place(
    net: &SubstrateNetwork,
    tree: &MulticastTree,
    r: &ServiceRequest,
) -> GreedyPlacement {
    let mut gp = GreedyPlacement::default();
    for (&dest, walk) in &tree.walks {
        gp.placed.entry(dest).or_insert(0);
        gp.markers.entry(dest).or_default();
        let mut next = 1;
        for (pos, &node) in walk.iter().enumerate() {
            if next > r.chain.len() {
                break;
            }
            if node == r.source || node == dest || !net.node(node).is_nfv() {
                continue;
            }
            loop {
                if next > r.chain.len() {
                    break;
                }
                if gp.has_instance(node, next) {
                    gp.join(node, next, dest, pos);
                    next += 1;
                    continue;
                }
                let nf = &r.chain[next - 1];
                let load = gp.node_load.get(&node).copied().unwrap_or(0.0);
                if net.node(node).admits(nf.nf_type)
                    && load + nf.processing_demand <= net.residual_node(node)
                {
                    *gp.node_load.entry(node).or_insert(0.0) += nf.processing_demand;
                    gp.join(node, next, dest, pos);
                    next += 1;
                } else {
                    break;
                }
            }
        }
    }
    gp
}

/// Candidate ranking cost: walk links priced by the segment they would carry
/// under the partial placement, deduplicated per `(link, segment)`, plus the
/// instance provisioning terms. Equals the solution cost once the placement
/// is complete and routing keeps the tree paths.
fn topology_cost(
    net: &SubstrateNetwork,
    tree: &MulticastTree,
    gp: &GreedyPlacement,
    r: &ServiceRequest,
    alpha: f64,
    beta: f64,
) -> f64 {
    let mut used: BTreeSet<(LinkId, usize)> = BTreeSet::new();
    for (dest, walk) in &tree.walks {
        let markers = &gp.markers[dest];
        for j in 1..walk.len() {
            let seg = markers.iter().take_while(|&&(pos, _, _)| pos <= j - 1).count();
            let link = net
                .adjacency()
                .link_between(walk[j - 1], walk[j])
                .expect("tree walk uses a missing link");
            used.insert((link, seg));
        }
    }
    let mut cost = 0.0;
    for &(l, _) in &used {
        cost += alpha * (r.rate / net.residual_link(l) + 1.0);
    }
    for (&(node, nf_index), _) in &gp.instances {
        cost += beta * r.chain[nf_index - 1].processing_demand / net.residual_node(node);
    }
    cost
}

/// Proportional rate split over path bottlenecks: path `k` gets
/// `b_k * demand / sum(b)`. Allocations sum to `demand` and each one is
/// bounded by its bottleneck whenever `sum(b) >= demand`.
pub fn proportional_split(bottlenecks: &[Rate], demand: Rate) -> Vec<Rate> {
    let total: Rate = bottlenecks.iter().sum();
    bottlenecks.iter().map(|&b| b * demand / total).collect()
}

/// Disjoint multipath routing of `demand` from `from` to `to` over the
/// residual graph: enumerate up to `k_max` loopless shortest candidate paths
/// by routing weight, rank by descending bottleneck, greedily keep a
/// link-disjoint subset, and take the fewest top paths whose bottlenecks
/// cover the demand. Returns `(links, allocated rate)` per selected path.
pub fn multipath_extend(
    net: &SubstrateNetwork,
    from: NodeId,
    to: NodeId,
    demand: Rate,
    max_paths: usize,
    params: &JprParams,
) -> Result<Vec<(Vec<LinkId>, Rate)>, EmbedError> {
    params.check()?;
    let pseudo = params.pseudo_capacity(net);
    multipath_extend_with(net, from, to, demand, max_paths, params, pseudo, |l| {
        net.residual_link(l)
    })
}

#[allow(clippy::too_many_arguments)]
fn multipath_extend_with(
    net: &SubstrateNetwork,
    from: NodeId,
    to: NodeId,
    demand: Rate,
    max_paths: usize,
    params: &JprParams,
    pseudo: Rate,
    avail: impl Fn(LinkId) -> Rate,
) -> Result<Vec<(Vec<LinkId>, Rate)>, EmbedError> {
    if max_paths == 0 {
        return Err(EmbedError::InvalidArgument("at least one path must be allowed".into()));
    }
    let weights = residual_weights(net, demand, params.alpha, params.beta, pseudo, &avail);
    let candidates = graph::k_shortest_paths(net.adjacency(), &weights, from, to, params.k_max);

    let mut ranked: Vec<(Vec<LinkId>, Rate)> = candidates
        .into_iter()
        .map(|(links, _)| {
            let bottleneck =
                links.iter().map(|&l| avail(l)).fold(f64::INFINITY, f64::min);
            (links, bottleneck)
        })
        .collect();
    // Stable sort keeps the weight order among equal bottlenecks.
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("non-finite bottleneck"));

    let mut kept: Vec<(Vec<LinkId>, Rate)> = Vec::new();
    let mut used_links: BTreeSet<LinkId> = BTreeSet::new();
    for (links, bottleneck) in ranked {
        if links.iter().any(|l| used_links.contains(l)) {
            continue;
        }
        used_links.extend(links.iter().copied());
        kept.push((links, bottleneck));
        if kept.len() == max_paths {
            break;
        }
    }

    let mut covered = 0.0;
    for j in 1..=kept.len() {
        covered += kept[j - 1].1;
        if covered >= demand {
            let bottlenecks: Vec<Rate> = kept[..j].iter().map(|p| p.1).collect();
            let rates = proportional_split(&bottlenecks, demand);
            return Ok(kept
                .into_iter()
                .take(j)
                .zip(rates)
                .map(|((links, _), rate)| (links, rate))
                .collect());
        }
    }
    Err(EmbedError::Infeasible(InfeasibleReason::MultipathExhausted {
        from,
        to,
        found: kept.len(),
        supported: covered,
        demand,
    }))
}

/// Per-destination chain state carried through the corrective step.
struct DestState {
    walk: Vec<NodeId>,
    markers: Vec<(usize, usize, NodeId)>,
}

/// Embed one request with the JPR heuristic. The network is not mutated;
/// callers reserve `solution.resource_deltas()` on acceptance.
pub fn jpr_embed(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    params: &JprParams,
) -> Result<EmbeddingSolution, EmbedError> {
    params.check()?;
    if r.source >= net.node_count() || r.destinations.iter().any(|&t| t >= net.node_count()) {
        return Err(EmbedError::InvalidArgument("request endpoints missing from network".into()));
    }
    for nf in &r.chain {
        if !net.nfv_nodes().any(|n| n.admits(nf.nf_type)) {
            return Err(EmbedError::Infeasible(InfeasibleReason::NoAdmissibleNfvNode {
                nf_type: nf.nf_type,
            }));
        }
    }

    let pseudo = params.pseudo_capacity(net);
    let weights =
        residual_weights(net, r.rate, params.alpha, params.beta, pseudo, |l| net.residual_link(l));
    let adj = net.adjacency();

    // Shortest-path trees from the fixed terminals are shared across all
    // key-node candidates.
    let mut fixed_terminals: Vec<NodeId> = vec![r.source];
    fixed_terminals.extend(r.destinations.iter().copied());
    fixed_terminals.sort_unstable();
    fixed_terminals.dedup();
    let mut sp_trees: BTreeMap<NodeId, SpTree<Weight>> = fixed_terminals
        .iter()
        .map(|&t| (t, graph::shortest_path_tree(adj, &weights, t)))
        .collect();

    // Key-node preference only matters when there are NFs to place; a
    // chain-less request routes over the plain Steiner topology.
    let candidates: Vec<Option<NodeId>> = if r.chain.is_empty() {
        vec![None]
    } else {
        net.nfv_nodes().map(|n| Some(n.id)).collect()
    };

    let mut best: Option<(usize, f64, MulticastTree, GreedyPlacement)> = None;
    for key in candidates {
        if let Some(k) = key {
            sp_trees.entry(k).or_insert_with(|| graph::shortest_path_tree(adj, &weights, k));
        }
        let mut terminals = fixed_terminals.clone();
        if let Some(k) = key {
            terminals.push(k);
        }
        terminals.sort_unstable();
        terminals.dedup();

        let Some(tree) = expand_key_topology(net, &weights, &terminals, &sp_trees, r) else {
            continue;
        };
        let gp = greedy_place(net, &tree, r);
        let placed = gp.placed_total();
        let cost = topology_cost(net, &tree, &gp, r, params.alpha, params.beta);
        let better = match &best {
            None => true,
            Some((best_placed, best_cost, _, _)) => {
                placed > *best_placed || (placed == *best_placed && cost < *best_cost)
            }
        };
        if better {
            best = Some((placed, cost, tree, gp));
        }
    }
    let Some((_, _, tree, gp)) = best else {
        return Err(EmbedError::Infeasible(InfeasibleReason::NoTopology));
    };

    // Corrective step: attach every still-missing NF at the nearest
    // admissible NFV node reachable from the affected walks' common prefix.
    let mut states: BTreeMap<NodeId, DestState> = tree
        .walks
        .iter()
        .map(|(&t, walk)| {
            (t, DestState { walk: walk.clone(), markers: gp.markers[&t].clone() })
        })
        .collect();
    let mut instances = gp.instances;
    let mut node_load = gp.node_load;
    correct_missing(
        net,
        r,
        params,
        pseudo,
        &mut states,
        &mut instances,
        &mut node_load,
    )?;

    // Route every inter-placement hop, splitting across trees where the
    // residual capacity forces it.
    let (segments, tree_rates) =
        route_hops(net, r, params, pseudo, &states)?;

    let placements = instances
        .into_iter()
        .map(|((node, nf_index), served)| Placement {
            node,
            nf_index,
            served_destinations: served.into_iter().collect(),
        })
        .collect();
    let mut solution = EmbeddingSolution {
        request: r.id,
        placements,
        segments,
        tree_rates,
        total_cost: 0.0,
    };
    solution.total_cost = cost_unchecked(&solution, net, r, params.alpha, params.beta);
    Ok(solution)
}

/// Metric-closure MST over the terminals, expanded back into substrate paths
/// and pruned to the per-destination shortest walks inside the expansion.
fn expand_key_topology(
    net: &SubstrateNetwork,
    weights: &[Weight],
    terminals: &[NodeId],
    sp_trees: &BTreeMap<NodeId, SpTree<Weight>>,
    r: &ServiceRequest,
) -> Option<MulticastTree> {
    let adj = net.adjacency();
    if terminals.len() == 1 {
        // Source-only degenerate case cannot happen: destinations are
        // non-empty and distinct from the source.
        return None;
    }
    let mut edges: Vec<(usize, usize, Weight)> = Vec::new();
    for i in 0..terminals.len() {
        for j in i + 1..terminals.len() {
            let d = sp_trees[&terminals[i]].distance(terminals[j])?;
            edges.push((i, j, d));
        }
    }
    let mst = graph::kruskal_mst(terminals.len(), &edges)?;

    // Orient each MST edge away from the source and take the parent's
    // directed shortest path into the union.
    let source_idx = terminals.binary_search(&r.source).expect("source is a terminal");
    let mut closure_adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &e in &mst {
        let (a, b, _) = edges[e];
        closure_adj.entry(a).or_default().push(b);
        closure_adj.entry(b).or_default().push(a);
    }
    let mut in_union = vec![false; net.link_count()];
    let mut stack = vec![source_idx];
    let mut visited = vec![false; terminals.len()];
    visited[source_idx] = true;
    while let Some(parent) = stack.pop() {
        for &child in closure_adj.get(&parent).into_iter().flatten() {
            if visited[child] {
                continue;
            }
            visited[child] = true;
            let path = sp_trees[&terminals[parent]].path_links(adj, terminals[child])?;
            for l in path {
                in_union[l] = true;
            }
            stack.push(child);
        }
    }

    // Redundant-edge removal: keep only the links on the shortest walks from
    // the source inside the union.
    let masked: Vec<Weight> = weights
        .iter()
        .enumerate()
        .map(|(l, &w)| if in_union[l] { w } else { f64::INFINITY })
        .collect();
    let inner = graph::shortest_path_tree(adj, &masked, r.source);
    let mut walks = BTreeMap::new();
    for &t in &r.destinations {
        walks.insert(t, inner.path_nodes(t)?.to_vec());
    }
    Some(MulticastTree { walks })
}

fn correct_missing(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    params: &JprParams,
    pseudo: Rate,
    states: &mut BTreeMap<NodeId, DestState>,
    instances: &mut BTreeMap<(NodeId, usize), BTreeSet<NodeId>>,
    node_load: &mut BTreeMap<NodeId, Rate>,
) -> Result<(), EmbedError> {
    let chain_len = r.chain.len();
    loop {
        let missing_index = states
            .iter()
            .filter_map(|(_, s)| {
                let placed = s.markers.len();
                (placed < chain_len).then_some(placed + 1)
            })
            .min();
        let Some(i) = missing_index else { return Ok(()) };
        let affected: Vec<NodeId> = states
            .iter()
            .filter(|(_, s)| s.markers.len() == i - 1)
            .map(|(&t, _)| t)
            .collect();
        debug_assert!(!affected.is_empty());

        // Longest common prefix of the affected walks.
        let mut prefix_len = states[&affected[0]].walk.len();
        for t in &affected[1..] {
            let walk = &states[t].walk;
            let first = &states[&affected[0]].walk;
            let mut common = 0;
            while common < prefix_len.min(walk.len()) && walk[common] == first[common] {
                common += 1;
            }
            prefix_len = common;
        }
        let c_pos = prefix_len - 1;

        // The attachment must not precede a destination's latest placed NF;
        // violators fall back to attaching at that NF's own position.
        let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for &t in &affected {
            let min_pos = states[&t].markers.last().map_or(0, |&(pos, _, _)| pos);
            let attach_pos = if min_pos <= c_pos { c_pos } else { min_pos };
            groups.entry(attach_pos).or_default().push(t);
        }
        // Per-destination positions can differ beyond the common prefix:
        // split groups further by the actual attachment node.
        let mut by_node: Vec<(NodeId, usize, Vec<NodeId>)> = Vec::new();
        for (pos, dests) in groups {
            let mut per_node: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
            for t in dests {
                per_node.entry(states[&t].walk[pos]).or_default().push(t);
            }
            for (node, dests) in per_node {
                by_node.push((node, pos, dests));
            }
        }

        for (attach_node, attach_pos, dests) in by_node {
            attach_nf(
                net, r, params, pseudo, i, attach_node, attach_pos, &dests, states, instances,
                node_load,
            )?;
        }
    }
}

/// Attach NF `i` for `dests` at the nearest admissible NFV node reachable
/// from `attach_node`, splicing the out-and-back spur into each walk.
#[allow(clippy::too_many_arguments)]
fn attach_nf(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    params: &JprParams,
    pseudo: Rate,
    nf_index: usize,
    attach_node: NodeId,
    attach_pos: usize,
    dests: &[NodeId],
    states: &mut BTreeMap<NodeId, DestState>,
    instances: &mut BTreeMap<(NodeId, usize), BTreeSet<NodeId>>,
    node_load: &mut BTreeMap<NodeId, Rate>,
) -> Result<(), EmbedError> {
    let nf = &r.chain[nf_index - 1];
    let weights = residual_weights(net, r.rate, params.alpha, params.beta, pseudo, |l| {
        net.residual_link(l)
    });
    let out_tree = graph::shortest_path_tree(net.adjacency(), &weights, attach_node);

    // Candidate hosts by ascending (distance, id); endpoints of the affected
    // flows are not allowed to host.
    let mut hosts: Vec<(Weight, NodeId)> = net
        .nfv_nodes()
        .filter(|n| n.admits(nf.nf_type) && n.id != r.source && !dests.contains(&n.id))
        .filter(|n| {
            let load = node_load.get(&n.id).copied().unwrap_or(0.0);
            instances.contains_key(&(n.id, nf_index))
                || load + nf.processing_demand <= net.residual_node(n.id)
        })
        .filter_map(|n| out_tree.distance(n.id).map(|d| (d, n.id)))
        .collect();
    hosts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-finite distance").then(a.1.cmp(&b.1)));

    for (_, host) in hosts {
        let spur_out: Vec<NodeId> = out_tree.path_nodes(host).expect("host reachable").to_vec();
        let spur_back = if host == attach_node {
            Some(vec![host])
        } else {
            let back_tree = graph::shortest_path_tree(net.adjacency(), &weights, host);
            back_tree.path_nodes(attach_node).map(|p| p.to_vec())
        };
        let Some(spur_back) = spur_back else { continue };

        if !instances.contains_key(&(host, nf_index)) {
            *node_load.entry(host).or_insert(0.0) += nf.processing_demand;
        }
        let entry = instances.entry((host, nf_index)).or_default();
        for &t in dests {
            entry.insert(t);
        }
        let marker_offset = spur_out.len() - 1;
        let inserted = spur_out.len() - 1 + spur_back.len() - 1;
        for &t in dests {
            let state = states.get_mut(&t).expect("known destination");
            let mut walk = state.walk[..=attach_pos].to_vec();
            walk.extend_from_slice(&spur_out[1..]);
            walk.extend_from_slice(&spur_back[1..]);
            walk.extend_from_slice(&state.walk[attach_pos + 1..]);
            state.walk = walk;
            debug_assert!(state.markers.iter().all(|&(pos, _, _)| pos <= attach_pos));
            state.markers.push((attach_pos + marker_offset, nf_index, host));
            let _ = inserted;
        }
        return Ok(());
    }
    Err(EmbedError::Infeasible(InfeasibleReason::NoCorrectiveHost { nf_index }))
}

type Hops = BTreeMap<(usize, NodeId, NodeId), (Vec<NodeId>, Vec<LinkId>)>;

/// Route every distinct inter-placement hop, keeping the tree walk where the
/// residual capacity allows and extending to disjoint multipath otherwise.
fn route_hops(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    params: &JprParams,
    pseudo: Rate,
    states: &BTreeMap<NodeId, DestState>,
) -> Result<(Vec<RoutedSegment>, Vec<Rate>), EmbedError> {
    let adj = net.adjacency();
    let mut hops: Hops = BTreeMap::new();
    for (&t, state) in states {
        let chain_len = r.chain.len();
        debug_assert_eq!(state.markers.len(), chain_len);
        let mut stops: Vec<(usize, NodeId)> = vec![(0, r.source)];
        stops.extend(state.markers.iter().map(|&(pos, _, node)| (pos, node)));
        stops.push((state.walk.len() - 1, t));
        for i in 0..=chain_len {
            let (from_pos, from) = stops[i];
            let (to_pos, to) = stops[i + 1];
            if from == to {
                continue;
            }
            let entry = hops.entry((i, from, to)).or_insert_with(|| {
                let links = graph::nodes_to_links(adj, &state.walk[from_pos..=to_pos]);
                (Vec::new(), links)
            });
            entry.0.push(t);
        }
    }

    let mut committed: BTreeMap<LinkId, Rate> = BTreeMap::new();
    let mut segments = Vec::new();
    let mut tree_rates: Vec<Rate> = Vec::new();
    for ((i, from, to), (dests, default_links)) in hops {
        let avail =
            |l: LinkId| net.residual_link(l) - committed.get(&l).copied().unwrap_or(0.0);
        let routes = if default_links.iter().all(|&l| avail(l) >= r.rate) {
            vec![(default_links, r.rate)]
        } else {
            multipath_extend_with(net, from, to, r.rate, r.max_trees, params, pseudo, avail)?
        };
        for (k, (links, rate)) in routes.into_iter().enumerate() {
            for &l in &links {
                *committed.entry(l).or_insert(0.0) += rate;
            }
            if tree_rates.len() <= k {
                tree_rates.push(rate);
            } else if rate > tree_rates[k] {
                tree_rates[k] = rate;
            }
            for &t in &dests {
                segments.push(RoutedSegment {
                    tree: k + 1,
                    nf_index: i,
                    destination: t,
                    links: links.clone(),
                    rate,
                });
            }
        }
    }
    if tree_rates.is_empty() {
        // Every hop was co-located; a single degenerate tree carries the
        // demand.
        tree_rates.push(r.rate);
    }
    Ok((segments, tree_rates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::NfSpec;
    use crate::solution::validate_solution;
    use crate::substrate::{NetMeta, NodeKind, NodeRecord, SubstrateNetwork};

    fn node(id: NodeId, kind: NodeKind, cap: Rate, admits: &[usize]) -> NodeRecord {
        NodeRecord {
            id,
            kind,
            processing_capacity: cap,
            admittable_nf_types: admits.iter().copied().collect(),
            coord: (id as f64, 0.0),
        }
    }

    fn net_from(
        nodes: Vec<NodeRecord>,
        undirected: &[(NodeId, NodeId, Rate)],
    ) -> SubstrateNetwork {
        let mut links = Vec::new();
        for &(a, b, cap) in undirected {
            let id = links.len();
            links.push(LinkRecord { id, tail: a, head: b, capacity: cap });
            links.push(LinkRecord { id: id + 1, tail: b, head: a, capacity: cap });
        }
        SubstrateNetwork::from_parts(nodes, links, NetMeta::manual()).unwrap()
    }

    fn request(source: NodeId, dests: Vec<NodeId>, types: &[usize], rate: Rate, j: usize) -> ServiceRequest {
        let chain =
            types.iter().map(|&ty| NfSpec { nf_type: ty, processing_demand: rate }).collect();
        ServiceRequest::new(0, source, dests, chain, rate, j).unwrap()
    }

    #[test]
    fn link_weight_examples() {
        let link = LinkRecord { id: 0, tail: 0, head: 1, capacity: 2.0 };
        let nfv = node(1, NodeKind::Nfv, 2.0, &[0]);
        let w = link_weight(&link, &nfv, 0.2, 0.6, 0.4, 0.05).unwrap();
        assert!((w - 0.70).abs() < 1e-12);

        let switch = node(1, NodeKind::Switch, 0.0, &[]);
        let w = link_weight(&link, &switch, 0.2, 0.6, 0.4, 0.05).unwrap();
        assert!((w - 2.26).abs() < 1e-12);

        assert!(link_weight(&link, &nfv, 0.2, 0.7, 0.4, 0.05).is_err());
    }

    #[test]
    fn link_weight_monotone_in_capacities() {
        let nfv = |cap| node(1, NodeKind::Nfv, cap, &[0]);
        let mut prev = f64::INFINITY;
        for b in [0.5, 1.0, 2.0, 4.0] {
            let link = LinkRecord { id: 0, tail: 0, head: 1, capacity: b };
            let w = link_weight(&link, &nfv(1.0), 0.2, 0.6, 0.4, 0.05).unwrap();
            assert!(w < prev);
            prev = w;
        }
        prev = f64::INFINITY;
        for c in [0.5, 1.0, 2.0, 4.0] {
            let link = LinkRecord { id: 0, tail: 0, head: 1, capacity: 1.0 };
            let w = link_weight(&link, &nfv(c), 0.2, 0.6, 0.4, 0.05).unwrap();
            assert!(w < prev);
            prev = w;
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(proportional_split(&[1.0, 1.0], 1.5), vec![0.75, 0.75]);
        assert_eq!(proportional_split(&[3.0, 1.0], 2.0), vec![1.5, 0.5]);
    }

    #[test]
    fn multipath_two_disjoint_paths() {
        // 0 -> 1 -> 3 and 0 -> 2 -> 3, all capacity 1.
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Switch, 0.0, &[]),
            node(2, NodeKind::Switch, 0.0, &[]),
            node(3, NodeKind::Switch, 0.0, &[]),
        ];
        let net = net_from(nodes, &[(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)]);
        let params = JprParams::default();
        let routes = multipath_extend(&net, 0, 3, 1.5, 2, &params).unwrap();
        assert_eq!(routes.len(), 2);
        assert!((routes[0].1 - 0.75).abs() < 1e-12);
        assert!((routes[1].1 - 0.75).abs() < 1e-12);

        let err = multipath_extend(&net, 0, 3, 1.5, 1, &params).unwrap_err();
        assert!(matches!(err, EmbedError::Infeasible(InfeasibleReason::MultipathExhausted { .. })));
    }

    #[test]
    fn jpr_trivial_single_link() {
        // s=0 adjacent to t=1, no NFs; one NFV node off to the side.
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Switch, 0.0, &[]),
            node(2, NodeKind::Nfv, 2.0, &[0]),
        ];
        let net = net_from(nodes, &[(0, 1, 2.0), (0, 2, 2.0), (2, 1, 2.0)]);
        let r = request(0, vec![1], &[], 0.2, 1);
        let params = JprParams::default();
        let sol = jpr_embed(&net, &r, &params).unwrap();
        validate_solution(&sol, &net, &r).unwrap();
        assert!(sol.placements.is_empty());
        assert_eq!(sol.segments.len(), 1);
        assert_eq!(sol.segments[0].links.len(), 1);
        let expected = 0.6 * (0.2 / 2.0 + 1.0);
        assert!((sol.total_cost - expected).abs() < 1e-12);
    }

    #[test]
    fn jpr_rejects_inadmissible_chain() {
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Switch, 0.0, &[]),
            node(2, NodeKind::Nfv, 2.0, &[0]),
        ];
        let net = net_from(nodes, &[(0, 1, 2.0), (1, 2, 2.0)]);
        let r = request(0, vec![1], &[5], 0.2, 1);
        let err = jpr_embed(&net, &r, &JprParams::default()).unwrap_err();
        assert!(
            matches!(err, EmbedError::Infeasible(InfeasibleReason::NoAdmissibleNfvNode { nf_type: 5 })),
            "{err}"
        );
        assert!(err.to_string().starts_with("Infeasible: no admissible NFV node"));
    }

    #[test]
    fn greedy_shares_prefix_instances() {
        // s=0 - a=1(NFV) - {t1=2, t2=3}
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Nfv, 2.0, &[0]),
            node(2, NodeKind::Switch, 0.0, &[]),
            node(3, NodeKind::Switch, 0.0, &[]),
        ];
        let net = net_from(nodes, &[(0, 1, 2.0), (1, 2, 2.0), (1, 3, 2.0)]);
        let r = request(0, vec![2, 3], &[0], 0.2, 1);
        let tree = MulticastTree {
            walks: [(2, vec![0, 1, 2]), (3, vec![0, 1, 3])].into_iter().collect(),
        };
        let gp = greedy_place(&net, &tree, &r);
        assert_eq!(gp.placed_total(), 2);
        assert_eq!(gp.instances.len(), 1);
        assert_eq!(gp.instances[&(1, 1)].len(), 2);
        assert!((gp.node_load[&1] - 0.2).abs() < 1e-12);

        let sol = jpr_embed(&net, &r, &JprParams::default()).unwrap();
        validate_solution(&sol, &net, &r).unwrap();
        assert_eq!(sol.placements.len(), 1);
        assert_eq!(sol.placements[0].served_destinations, vec![2, 3]);
    }

    #[test]
    fn greedy_places_nothing_without_nfv_on_path() {
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Switch, 0.0, &[]),
            node(2, NodeKind::Nfv, 2.0, &[0]),
        ];
        let net = net_from(nodes, &[(0, 1, 2.0), (0, 2, 2.0), (2, 1, 2.0)]);
        let r = request(0, vec![1], &[0], 0.2, 1);
        let tree = MulticastTree { walks: [(1, vec![0, 1])].into_iter().collect() };
        let gp = greedy_place(&net, &tree, &r);
        assert_eq!(gp.placed_total(), 0);
    }

    #[test]
    fn corrective_step_attaches_shared_spur() {
        // Star: s=0 - hub=1 - {t1=2, t2=3}, NFV v=4 hanging off the hub.
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Switch, 0.0, &[]),
            node(2, NodeKind::Switch, 0.0, &[]),
            node(3, NodeKind::Switch, 0.0, &[]),
            node(4, NodeKind::Nfv, 2.0, &[0]),
        ];
        let net = net_from(
            nodes,
            &[(0, 1, 2.0), (1, 2, 2.0), (1, 3, 2.0), (1, 4, 2.0)],
        );
        let r = request(0, vec![2, 3], &[0], 0.2, 1);
        let sol = jpr_embed(&net, &r, &JprParams::default()).unwrap();
        validate_solution(&sol, &net, &r).unwrap();
        assert_eq!(sol.placements.len(), 1);
        assert_eq!(sol.placements[0].node, 4);
        assert_eq!(sol.placements[0].served_destinations, vec![2, 3]);
        // hop 0 flows s -> v via the hub; hop 1 returns through the hub
        for seg in &sol.segments {
            assert!(!seg.links.is_empty());
        }
    }

    #[test]
    fn jpr_is_deterministic() {
        let net = SubstrateNetwork::build_mesh(&crate::substrate::MeshParams {
            width: 4,
            height: 4,
            nfv_count: 6,
            cap_min: 0.5,
            cap_max: 2.0,
            nf_type_count: 3,
            admit_probability: 0.9,
            seed: 21,
        })
        .unwrap();
        let r = request(0, vec![5, 15], &[0, 1], 0.2, 2);
        let params = JprParams::default();
        let a = jpr_embed(&net, &r, &params).unwrap();
        let b = jpr_embed(&net, &r, &params).unwrap();
        assert_eq!(a, b);
    }
}
