//! Desk-scale exact oracle: exhaustive/branch-and-bound optimum for
//! single-service single-path instances, tiny multi-service admission, and
//! bisection for the maximum supported data rate.
//!
//! The search space is every admissible per-destination placement assignment
//! crossed with every simple-path routing per inter-placement hop; both are
//! enumerated in a fixed canonical order so pruning never changes the
//! returned optimum.

use std::collections::BTreeMap;
use std::rc::Rc;

use itertools::Itertools;
use thiserror::Error;

use crate::heuristic::{EmbedError, JprParams};
use crate::service::{self, ServiceRequest};
use crate::solution::{cost_unchecked, EmbeddingSolution, Placement, RoutedSegment, FEAS_TOL};
use crate::substrate::SubstrateNetwork;
use crate::{LinkId, NodeId, Rate};

#[derive(Debug, Clone)]
pub struct ExactLimits {
    pub max_nodes: usize,
    pub max_chain: usize,
    pub max_dests: usize,
    pub max_requests: usize,
    /// Simple-path enumeration cap per node pair.
    pub max_paths_per_hop: usize,
    /// Routing-assignment cap for the rate-feasibility search.
    pub max_tree_assignments: usize,
    /// Search-node budget for the routing DFS.
    pub max_search_nodes: u64,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_nodes: 10,
            max_chain: 2,
            max_dests: 3,
            max_requests: 4,
            max_paths_per_hop: 20_000,
            max_tree_assignments: 400_000,
            max_search_nodes: 200_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("Infeasible: no feasible embedding")]
    Infeasible,
    #[error("instance exceeds oracle limits: {0}")]
    TooLarge(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Inter-placement transmission: stage `i` from node `from` to node `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Hop {
    stage: usize,
    from: NodeId,
    to: NodeId,
}

/// Enumerates placement assignments `(destination, chain position) -> host`
/// in lexicographic order over the slot domains.
struct PlacementEnum<'a> {
    net: &'a SubstrateNetwork,
    r: &'a ServiceRequest,
    domains: Vec<Vec<NodeId>>,
    state: Vec<usize>,
    done: bool,
}

impl<'a> PlacementEnum<'a> {
    fn new(
        net: &'a SubstrateNetwork,
        r: &'a ServiceRequest,
    ) -> Result<PlacementEnum<'a>, ExactError> {
        let mut domains = Vec::with_capacity(r.destinations.len() * r.chain.len());
        for &t in &r.destinations {
            for nf in &r.chain {
                let domain: Vec<NodeId> = net
                    .nfv_nodes()
                    .filter(|n| {
                        n.admits(nf.nf_type)
                            && n.id != r.source
                            && n.id != t
                            && net.residual_node(n.id) + FEAS_TOL >= nf.processing_demand
                    })
                    .map(|n| n.id)
                    .collect();
                if domain.is_empty() {
                    return Err(ExactError::Infeasible);
                }
                domains.push(domain);
            }
        }
        let state = vec![0; domains.len()];
        Ok(PlacementEnum { net, r, domains, state, done: false })
    }

    fn host(&self, dest_idx: usize, nf_index: usize) -> NodeId {
        let slot = dest_idx * self.r.chain.len() + nf_index - 1;
        self.domains[slot][self.state[slot]]
    }

    /// Whether the per-node demand of the current assignment fits, shared
    /// instances counted once.
    fn capacity_ok(&self) -> bool {
        let mut instance_demand: BTreeMap<(NodeId, usize), Rate> = BTreeMap::new();
        for dest_idx in 0..self.r.destinations.len() {
            for i in 1..=self.r.chain.len() {
                let host = self.host(dest_idx, i);
                instance_demand.insert((host, i), self.r.chain[i - 1].processing_demand);
            }
        }
        let mut demands: BTreeMap<NodeId, Rate> = BTreeMap::new();
        for ((node, _), demand) in instance_demand {
            *demands.entry(node).or_insert(0.0) += demand;
        }
        demands.iter().all(|(&node, &demand)| demand <= self.net.residual_node(node) + FEAS_TOL)
    }

    /// Deduplicated hops of the current assignment in canonical order,
    /// with the destinations flowing over each.
    fn hops(&self) -> Vec<(Hop, Vec<NodeId>)> {
        let mut hops: BTreeMap<Hop, Vec<NodeId>> = BTreeMap::new();
        for (dest_idx, &t) in self.r.destinations.iter().enumerate() {
            for stage in 0..=self.r.chain.len() {
                let from = if stage == 0 { self.r.source } else { self.host(dest_idx, stage) };
                let to =
                    if stage == self.r.chain.len() { t } else { self.host(dest_idx, stage + 1) };
                if from != to {
                    hops.entry(Hop { stage, from, to }).or_default().push(t);
                }
            }
        }
        hops.into_iter().collect()
    }

    fn placements(&self) -> Vec<Placement> {
        let mut served: BTreeMap<(NodeId, usize), Vec<NodeId>> = BTreeMap::new();
        for (dest_idx, &t) in self.r.destinations.iter().enumerate() {
            for i in 1..=self.r.chain.len() {
                served.entry((self.host(dest_idx, i), i)).or_default().push(t);
            }
        }
        served
            .into_iter()
            .map(|((node, nf_index), served_destinations)| Placement {
                node,
                nf_index,
                served_destinations,
            })
            .collect()
    }

    fn advance(&mut self) {
        for slot in (0..self.state.len()).rev() {
            self.state[slot] += 1;
            if self.state[slot] < self.domains[slot].len() {
                return;
            }
            self.state[slot] = 0;
        }
        self.done = true;
    }
}

/// All simple directed paths `from -> to` over links whose residual carries
/// at least `min_rate`, in lexicographic node-sequence order.
fn simple_paths(
    net: &SubstrateNetwork,
    from: NodeId,
    to: NodeId,
    min_rate: Rate,
    cap: usize,
) -> Result<Vec<Vec<LinkId>>, ExactError> {
    fn dfs(
        net: &SubstrateNetwork,
        at: NodeId,
        to: NodeId,
        min_rate: Rate,
        cap: usize,
        visited: &mut [bool],
        stack: &mut Vec<LinkId>,
        paths: &mut Vec<Vec<LinkId>>,
    ) -> Result<(), ExactError> {
        if at == to {
            if paths.len() >= cap {
                return Err(ExactError::TooLarge(format!(
                    "more than {cap} simple paths toward node {to}"
                )));
            }
            paths.push(stack.clone());
            return Ok(());
        }
        visited[at] = true;
        let mut out: Vec<LinkId> = net
            .adjacency()
            .out_links(at)
            .iter()
            .copied()
            .filter(|&l| {
                net.residual_link(l) + FEAS_TOL >= min_rate && !visited[net.link(l).head]
            })
            .collect();
        out.sort_by_key(|&l| net.link(l).head);
        for l in out {
            stack.push(l);
            dfs(net, net.link(l).head, to, min_rate, cap, visited, stack, paths)?;
            stack.pop();
        }
        visited[at] = false;
        Ok(())
    }

    let mut paths = Vec::new();
    let mut visited = vec![false; net.node_count()];
    let mut stack = Vec::new();
    dfs(net, from, to, min_rate, cap, &mut visited, &mut stack, &mut paths)?;
    Ok(paths)
}

struct RoutingSearch<'a> {
    net: &'a SubstrateNetwork,
    rate: Rate,
    stages: usize,
    prune: bool,
    hops: &'a [(Hop, Vec<NodeId>)],
    paths: &'a [Rc<Vec<Vec<LinkId>>>],
    used: Vec<bool>,
    link_uses: Vec<u32>,
    alpha: f64,
    budget: u64,
}

impl RoutingSearch<'_> {
    /// DFS over per-hop path choices; only strict improvements replace the
    /// incumbent, so the canonical enumeration order is the tie-break.
    fn run(
        &mut self,
        hop_idx: usize,
        cost: f64,
        choice: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) -> Result<(), ExactError> {
        if self.budget == 0 {
            return Err(ExactError::TooLarge("routing search budget exhausted".into()));
        }
        self.budget -= 1;
        if hop_idx == self.hops.len() {
            if best.as_ref().map_or(true, |(b, _)| cost < *b) {
                *best = Some((cost, choice.clone()));
            }
            return Ok(());
        }
        if self.prune {
            if let Some((b, _)) = best {
                if cost >= *b {
                    return Ok(());
                }
            }
        }
        let stage = self.hops[hop_idx].0.stage;
        let paths = self.paths[hop_idx].clone();
        for (path_idx, path) in paths.iter().enumerate() {
            let mut added: Vec<LinkId> = Vec::new();
            let mut extra = 0.0;
            let mut feasible = true;
            for &l in path {
                let key = l * self.stages + stage;
                if self.used[key] {
                    continue;
                }
                let uses = self.link_uses[l] + 1;
                if uses as f64 * self.rate > self.net.residual_link(l) + FEAS_TOL {
                    feasible = false;
                    break;
                }
                self.used[key] = true;
                self.link_uses[l] = uses;
                added.push(l);
                extra += self.alpha * (self.rate / self.net.residual_link(l) + 1.0);
            }
            if feasible {
                choice.push(path_idx);
                self.run(hop_idx + 1, cost + extra, choice, best)?;
                choice.pop();
            }
            for &l in &added {
                self.used[l * self.stages + stage] = false;
                self.link_uses[l] -= 1;
            }
        }
        Ok(())
    }
}

fn check_limits(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    limits: &ExactLimits,
) -> Result<(), ExactError> {
    if net.node_count() > limits.max_nodes {
        return Err(ExactError::TooLarge(format!(
            "{} nodes exceed the limit of {}",
            net.node_count(),
            limits.max_nodes
        )));
    }
    if r.chain.len() > limits.max_chain {
        return Err(ExactError::TooLarge(format!(
            "chain of {} exceeds the limit of {}",
            r.chain.len(),
            limits.max_chain
        )));
    }
    if r.destinations.len() > limits.max_dests {
        return Err(ExactError::TooLarge(format!(
            "{} destinations exceed the limit of {}",
            r.destinations.len(),
            limits.max_dests
        )));
    }
    Ok(())
}

/// Globally optimal single-path embedding, found by exhaustive enumeration
/// with branch-and-bound pruning on partial cost.
pub fn exact_single_path(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    alpha: f64,
    beta: f64,
    limits: &ExactLimits,
) -> Result<(EmbeddingSolution, f64), ExactError> {
    exact_single_path_mode(net, r, alpha, beta, limits, true)
}

/// Same search with pruning switched off; returns the identical optimum.
pub fn exact_single_path_mode(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    alpha: f64,
    beta: f64,
    limits: &ExactLimits,
    prune: bool,
) -> Result<(EmbeddingSolution, f64), ExactError> {
    if r.max_trees != 1 {
        return Err(ExactError::InvalidArgument(
            "the single-path oracle requires a request with max_trees = 1".into(),
        ));
    }
    check_limits(net, r, limits)?;
    let stages = r.chain.len() + 1;

    let mut path_memo: BTreeMap<(NodeId, NodeId), Rc<Vec<Vec<LinkId>>>> = BTreeMap::new();
    let mut budget = limits.max_search_nodes;
    type Best = (f64, Vec<Placement>, Vec<(Hop, Vec<NodeId>)>, Vec<Vec<LinkId>>);
    let mut best: Option<Best> = None;

    let mut assignment = PlacementEnum::new(net, r)?;
    while !assignment.done {
        if !assignment.capacity_ok() {
            assignment.advance();
            continue;
        }
        let placements = assignment.placements();
        let beta_cost: f64 = placements
            .iter()
            .map(|p| beta * r.chain[p.nf_index - 1].processing_demand / net.residual_node(p.node))
            .sum();

        let hops = assignment.hops();
        let mut hop_paths: Vec<Rc<Vec<Vec<LinkId>>>> = Vec::with_capacity(hops.len());
        let mut dead = false;
        for (hop, _) in &hops {
            let entry = match path_memo.entry((hop.from, hop.to)) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(v) => {
                    let paths =
                        simple_paths(net, hop.from, hop.to, r.rate, limits.max_paths_per_hop)?;
                    v.insert(Rc::new(paths))
                }
            };
            if entry.is_empty() {
                dead = true;
                break;
            }
            hop_paths.push(entry.clone());
        }
        if dead {
            assignment.advance();
            continue;
        }

        let mut search = RoutingSearch {
            net,
            rate: r.rate,
            stages,
            prune,
            hops: &hops,
            paths: &hop_paths,
            used: vec![false; net.link_count() * stages],
            link_uses: vec![0; net.link_count()],
            alpha,
            budget,
        };
        // Seed the incumbent with the global best so pruning carries across
        // assignments; exhaustive mode keeps no incumbent.
        let mut local_best: Option<(f64, Vec<usize>)> = if prune {
            best.as_ref().map(|(c, _, _, _)| (*c, Vec::new()))
        } else {
            None
        };
        let seeded_cost = local_best.as_ref().map(|(c, _)| *c);
        let mut choice = Vec::new();
        search.run(0, beta_cost, &mut choice, &mut local_best)?;
        budget = search.budget;
        if let Some((cost, choice)) = local_best {
            let genuine = seeded_cost.map_or(true, |c| cost < c);
            let improves = best.as_ref().map_or(true, |(b, _, _, _)| cost < *b);
            if genuine && improves {
                let routed: Vec<Vec<LinkId>> =
                    choice.iter().enumerate().map(|(h, &p)| hop_paths[h][p].clone()).collect();
                best = Some((cost, placements, hops, routed));
            }
        }
        assignment.advance();
    }

    let Some((_, placements, hops, routed)) = best else {
        return Err(ExactError::Infeasible);
    };
    let mut segments = Vec::new();
    for ((hop, dests), links) in hops.iter().zip(&routed) {
        for &t in dests {
            segments.push(RoutedSegment {
                tree: 1,
                nf_index: hop.stage,
                destination: t,
                links: links.clone(),
                rate: r.rate,
            });
        }
    }
    let mut solution = EmbeddingSolution {
        request: r.id,
        placements,
        segments,
        tree_rates: vec![r.rate],
        total_cost: 0.0,
    };
    solution.total_cost = cost_unchecked(&solution, net, r, alpha, beta);
    let cost = solution.total_cost;
    Ok((solution, cost))
}

/// Outcome of the exact multi-service two-step optimization.
#[derive(Debug, Clone)]
pub struct MultiServiceOutcome {
    /// Accepted request ids, ascending.
    pub accepted: Vec<usize>,
    /// Maximum achievable aggregate throughput.
    pub max_throughput: f64,
    /// Minimum total provisioning cost among throughput maximizers.
    pub min_cost: f64,
    pub solutions: Vec<EmbeddingSolution>,
}

/// Exhaustive two-step admission: enumerate request subsets and all
/// embedding orders with sequential residual accounting, maximize aggregate
/// throughput, then minimize total cost among the maximizers.
pub fn exact_multi_service(
    net: &SubstrateNetwork,
    requests: &[ServiceRequest],
    alpha: f64,
    beta: f64,
    a1: f64,
    a2: f64,
    limits: &ExactLimits,
) -> Result<MultiServiceOutcome, ExactError> {
    if requests.len() > limits.max_requests {
        return Err(ExactError::TooLarge(format!(
            "{} requests exceed the limit of {}",
            requests.len(),
            limits.max_requests
        )));
    }
    for r in requests {
        check_limits(net, r, limits)?;
    }
    let throughputs: Vec<f64> = requests
        .iter()
        .map(|r| service::throughput(r, a1, a2))
        .collect::<Result<_, _>>()
        .map_err(|e| ExactError::InvalidArgument(e.to_string()))?;

    let mut best: Option<MultiServiceOutcome> = None;
    for mask in 0..(1u32 << requests.len()) {
        let subset: Vec<usize> = (0..requests.len()).filter(|&i| mask & (1 << i) != 0).collect();
        let throughput: f64 = subset.iter().map(|&i| throughputs[i]).sum();
        if let Some(b) = &best {
            if throughput < b.max_throughput - 1e-12 {
                continue;
            }
        }
        let mut subset_best: Option<(f64, Vec<EmbeddingSolution>)> = None;
        if subset.is_empty() {
            subset_best = Some((0.0, Vec::new()));
        }
        for perm in subset.iter().copied().permutations(subset.len()) {
            if subset.is_empty() {
                break;
            }
            let mut trial = net.clone();
            let mut cost = 0.0;
            let mut sols = Vec::new();
            let mut ok = true;
            for idx in perm {
                match exact_single_path(&trial, &requests[idx], alpha, beta, limits) {
                    Ok((sol, c)) => {
                        trial
                            .reserve(&sol.resource_deltas(&requests[idx]))
                            .expect("oracle solution fits the residual ledger");
                        cost += c;
                        sols.push(sol);
                    }
                    Err(ExactError::Infeasible) => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if ok && subset_best.as_ref().map_or(true, |(c, _)| cost < *c) {
                subset_best = Some((cost, sols));
            }
        }
        let Some((cost, sols)) = subset_best else { continue };
        let better = match &best {
            None => true,
            Some(b) => {
                throughput > b.max_throughput + 1e-12
                    || ((throughput - b.max_throughput).abs() <= 1e-12 && cost < b.min_cost - 1e-12)
            }
        };
        if better {
            best = Some(MultiServiceOutcome {
                accepted: subset.iter().map(|&i| requests[i].id).collect(),
                max_throughput: throughput,
                min_cost: cost,
                solutions: sols,
            });
        }
    }
    best.ok_or(ExactError::Infeasible)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateEmbedder {
    Exact,
    Jpr,
}

#[derive(Debug, Clone, Copy)]
pub struct MaxRateResult {
    pub rate: Rate,
    pub probes: usize,
    /// Probes found infeasible below an already-feasible rate; possible for
    /// the heuristic embedder only.
    pub non_monotone: usize,
}

/// Largest data rate at which the template request stays embeddable, found
/// by bisection with the NF processing demands coupled to the probed rate.
#[allow(clippy::too_many_arguments)]
pub fn max_supported_rate(
    net: &SubstrateNetwork,
    template: &ServiceRequest,
    trees: usize,
    embedder: RateEmbedder,
    tolerance: Rate,
    alpha: f64,
    beta: f64,
    limits: &ExactLimits,
) -> Result<MaxRateResult, ExactError> {
    if !(tolerance > 0.0) {
        return Err(ExactError::InvalidArgument("tolerance must be positive".into()));
    }
    if embedder == RateEmbedder::Exact && !(trees == 1 || trees == 2) {
        return Err(ExactError::InvalidArgument("the exact embedder supports 1 or 2 trees".into()));
    }
    let upper: Rate = net
        .adjacency()
        .out_links(template.source)
        .iter()
        .map(|&l| net.residual_link(l))
        .sum();
    if upper <= 0.0 {
        return Ok(MaxRateResult { rate: 0.0, probes: 0, non_monotone: 0 });
    }

    let probe_request = |rate: Rate| {
        let mut r = template.clone();
        r.rate = rate;
        for nf in &mut r.chain {
            nf.processing_demand = rate;
        }
        r.max_trees = trees;
        r
    };
    let params = JprParams::with_weights(alpha, beta);
    let mut probes = 0usize;
    let mut non_monotone = 0usize;
    let mut best = 0.0_f64;
    let feasible = |rate: Rate, best: f64, non_monotone: &mut usize| -> Result<bool, ExactError> {
        let r = probe_request(rate);
        let ok = match embedder {
            RateEmbedder::Exact => rate_feasible(net, &r, trees, limits)?,
            RateEmbedder::Jpr => match crate::heuristic::jpr_embed(net, &r, &params) {
                Ok(_) => true,
                Err(EmbedError::Infeasible(_)) => false,
                Err(e) => return Err(ExactError::InvalidArgument(e.to_string())),
            },
        };
        if !ok && rate < best {
            *non_monotone += 1;
        }
        Ok(ok)
    };

    probes += 1;
    if feasible(upper, best, &mut non_monotone)? {
        return Ok(MaxRateResult { rate: upper, probes, non_monotone });
    }
    let mut lo = 0.0_f64;
    let mut hi = upper;
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        if feasible(mid, best, &mut non_monotone)? {
            lo = mid;
            if mid > best {
                best = mid;
            }
        } else {
            hi = mid;
        }
    }
    Ok(MaxRateResult { rate: best, probes, non_monotone })
}

/// Exact feasibility of the request at its rate with 1 or 2 trees.
///
/// Enumerates placements and complete per-hop routing assignments; one tree
/// is feasible when some assignment's bottleneck covers the rate, two trees
/// when additionally some assignment pair admits a split `d1 + d2 >= rate`
/// under the joint link capacities. The two-tree predicate contains the
/// one-tree one by construction, so the supported rate can only grow with
/// the tree budget.
pub fn rate_feasible(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    trees: usize,
    limits: &ExactLimits,
) -> Result<bool, ExactError> {
    check_limits(net, r, limits)?;
    if !(trees == 1 || trees == 2) {
        return Err(ExactError::InvalidArgument("rate feasibility supports 1 or 2 trees".into()));
    }

    let mut path_memo: BTreeMap<(NodeId, NodeId), Rc<Vec<Vec<LinkId>>>> = BTreeMap::new();
    let mut assignment = match PlacementEnum::new(net, r) {
        Ok(a) => a,
        Err(ExactError::Infeasible) => return Ok(false),
        Err(e) => return Err(e),
    };
    while !assignment.done {
        if !assignment.capacity_ok() {
            assignment.advance();
            continue;
        }
        let hops = assignment.hops();
        if hops.is_empty() {
            return Ok(true);
        }
        let mut hop_paths: Vec<Rc<Vec<Vec<LinkId>>>> = Vec::new();
        let mut dead = false;
        let mut combinations: usize = 1;
        for (hop, _) in &hops {
            let entry = match path_memo.entry((hop.from, hop.to)) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(v) => {
                    // No per-link rate floor here: split shares are unknown.
                    let paths = simple_paths(net, hop.from, hop.to, 0.0, limits.max_paths_per_hop)?;
                    v.insert(Rc::new(paths))
                }
            };
            if entry.is_empty() {
                dead = true;
                break;
            }
            combinations = combinations.saturating_mul(entry.len());
            hop_paths.push(entry.clone());
        }
        if dead {
            assignment.advance();
            continue;
        }
        if combinations > limits.max_tree_assignments {
            return Err(ExactError::TooLarge(format!(
                "{combinations} routing assignments exceed the limit of {}",
                limits.max_tree_assignments
            )));
        }

        // Per complete routing assignment: link use-counts and the rate it
        // supports alone.
        let mut assignments: Vec<(f64, BTreeMap<LinkId, u32>)> = Vec::new();
        let mut odometer = vec![0usize; hops.len()];
        'assignments: loop {
            let mut uses: BTreeMap<LinkId, u32> = BTreeMap::new();
            {
                let mut per_stage: BTreeMap<(LinkId, usize), ()> = BTreeMap::new();
                for (h, &p) in odometer.iter().enumerate() {
                    let stage = hops[h].0.stage;
                    for &l in &hop_paths[h][p] {
                        per_stage.insert((l, stage), ());
                    }
                }
                for &(l, _) in per_stage.keys() {
                    *uses.entry(l).or_insert(0) += 1;
                }
            }
            let solo = uses
                .iter()
                .map(|(&l, &u)| net.residual_link(l) / u as f64)
                .fold(f64::INFINITY, f64::min);
            if solo + FEAS_TOL >= r.rate {
                return Ok(true);
            }
            if trees == 2 {
                assignments.push((solo, uses));
            }
            for h in (0..odometer.len()).rev() {
                odometer[h] += 1;
                if odometer[h] < hop_paths[h].len() {
                    continue 'assignments;
                }
                odometer[h] = 0;
            }
            break;
        }

        if trees == 2 {
            assignments.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("non-finite bottleneck"));
            for i in 0..assignments.len() {
                if 2.0 * assignments[i].0 + FEAS_TOL < r.rate {
                    break;
                }
                for j in i..assignments.len() {
                    if assignments[i].0 + assignments[j].0 + FEAS_TOL < r.rate {
                        break;
                    }
                    if pair_supports(net, &assignments[i].1, &assignments[j].1) + FEAS_TOL >= r.rate
                    {
                        return Ok(true);
                    }
                }
            }
        }
        assignment.advance();
    }
    Ok(false)
}

/// Maximum `d1 + d2` subject to `d1 * a_l + d2 * b_l <= B_l` per link and
/// non-negativity, evaluated over the polytope vertices.
fn pair_supports(net: &SubstrateNetwork, a: &BTreeMap<LinkId, u32>, b: &BTreeMap<LinkId, u32>) -> f64 {
    let mut links: Vec<LinkId> = a.keys().chain(b.keys()).copied().collect();
    links.sort_unstable();
    links.dedup();
    let rows: Vec<(f64, f64, f64)> = links
        .iter()
        .map(|&l| {
            (
                a.get(&l).copied().unwrap_or(0) as f64,
                b.get(&l).copied().unwrap_or(0) as f64,
                net.residual_link(l),
            )
        })
        .collect();
    let feasible = |d1: f64, d2: f64| {
        d1 >= -1e-12
            && d2 >= -1e-12
            && rows.iter().all(|&(ai, bi, cap)| ai * d1 + bi * d2 <= cap + 1e-9)
    };
    let mut best = 0.0_f64;
    let mut consider = |d1: f64, d2: f64| {
        if d1.is_finite() && d2.is_finite() && feasible(d1, d2) {
            let v = d1.max(0.0) + d2.max(0.0);
            if v > best {
                best = v;
            }
        }
    };
    for &(ai, bi, cap) in &rows {
        if ai > 0.0 {
            consider(cap / ai, 0.0);
        }
        if bi > 0.0 {
            consider(0.0, cap / bi);
        }
    }
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a1, b1, c1) = rows[i];
            let (a2, b2, c2) = rows[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-12 {
                continue;
            }
            consider((c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristic::{jpr_embed, JprParams};
    use crate::service::NfSpec;
    use crate::solution::validate_solution;
    use crate::substrate::{LinkRecord, MeshParams, NetMeta, NodeKind, NodeRecord};

    fn node(id: NodeId, kind: NodeKind, cap: Rate, admits: &[usize]) -> NodeRecord {
        NodeRecord {
            id,
            kind,
            processing_capacity: cap,
            admittable_nf_types: admits.iter().copied().collect(),
            coord: (id as f64, 0.0),
        }
    }

    fn net_from(nodes: Vec<NodeRecord>, undirected: &[(NodeId, NodeId, Rate)]) -> SubstrateNetwork {
        let mut links = Vec::new();
        for &(a, b, cap) in undirected {
            let id = links.len();
            links.push(LinkRecord { id, tail: a, head: b, capacity: cap });
            links.push(LinkRecord { id: id + 1, tail: b, head: a, capacity: cap });
        }
        SubstrateNetwork::from_parts(nodes, links, NetMeta::manual()).unwrap()
    }

    fn request(
        source: NodeId,
        dests: Vec<NodeId>,
        types: &[usize],
        rate: Rate,
        j: usize,
    ) -> ServiceRequest {
        let chain =
            types.iter().map(|&ty| NfSpec { nf_type: ty, processing_demand: rate }).collect();
        ServiceRequest::new(0, source, dests, chain, rate, j).unwrap()
    }

    fn tiny_mesh(seed: u64) -> SubstrateNetwork {
        SubstrateNetwork::build_mesh(&MeshParams {
            width: 2,
            height: 3,
            nfv_count: 3,
            cap_min: 0.5,
            cap_max: 2.0,
            nf_type_count: 2,
            admit_probability: 0.9,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn chainless_optimum_is_the_cheapest_path() {
        // line 0 - 1 - 2 plus a direct 0 - 2 shortcut with lower capacity
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Switch, 0.0, &[]),
            node(2, NodeKind::Switch, 0.0, &[]),
        ];
        let net = net_from(nodes, &[(0, 1, 2.0), (1, 2, 2.0), (0, 2, 0.5)]);
        let r = request(0, vec![2], &[], 0.2, 1);
        let (sol, cost) = exact_single_path(&net, &r, 0.6, 0.4, &ExactLimits::default()).unwrap();
        validate_solution(&sol, &net, &r).unwrap();
        // direct: 0.6*(0.4+1) = 0.84; two hops: 2*0.6*(0.1+1) = 1.32
        assert!((cost - 0.84).abs() < 1e-12);
        assert_eq!(sol.segments.len(), 1);
        assert_eq!(sol.segments[0].links.len(), 1);
    }

    #[test]
    fn leaf_source_forces_the_placement() {
        // source 0 is a leaf attached to the only admissible NFV node 1,
        // which fans out to destinations 2 and 3
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Nfv, 2.0, &[0]),
            node(2, NodeKind::Switch, 0.0, &[]),
            node(3, NodeKind::Switch, 0.0, &[]),
        ];
        let net = net_from(nodes, &[(0, 1, 2.0), (1, 2, 2.0), (1, 3, 2.0)]);
        let r = request(0, vec![2, 3], &[0], 0.2, 1);
        let (sol, cost) = exact_single_path(&net, &r, 0.6, 0.4, &ExactLimits::default()).unwrap();
        validate_solution(&sol, &net, &r).unwrap();
        assert_eq!(sol.placements.len(), 1);
        assert_eq!(sol.placements[0].node, 1);
        let expected = 0.6 * (0.1 + 1.0) * 3.0 + 0.4 * 0.1;
        assert!((cost - expected).abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_no_host_exists() {
        let nodes =
            vec![node(0, NodeKind::Switch, 0.0, &[]), node(1, NodeKind::Switch, 0.0, &[])];
        let net = net_from(nodes, &[(0, 1, 2.0)]);
        let r = request(0, vec![1], &[0], 0.2, 1);
        assert!(matches!(
            exact_single_path(&net, &r, 0.6, 0.4, &ExactLimits::default()),
            Err(ExactError::Infeasible)
        ));
    }

    #[test]
    fn too_large_guard() {
        let net = SubstrateNetwork::build_mesh(&MeshParams {
            width: 4,
            height: 4,
            nfv_count: 4,
            cap_min: 1.0,
            cap_max: 1.0,
            nf_type_count: 1,
            admit_probability: 1.0,
            seed: 0,
        })
        .unwrap();
        let r = request(0, vec![15], &[0], 0.2, 1);
        assert!(matches!(
            exact_single_path(&net, &r, 0.6, 0.4, &ExactLimits::default()),
            Err(ExactError::TooLarge(_))
        ));
    }

    #[test]
    fn pruning_never_changes_the_optimum() {
        let limits = ExactLimits::default();
        let mut solved = 0;
        for seed in 0..12 {
            let net = tiny_mesh(seed);
            let r = request(0, vec![4, 5], &[0, 1], 0.3, 1);
            let pruned = exact_single_path_mode(&net, &r, 0.6, 0.4, &limits, true);
            let full = exact_single_path_mode(&net, &r, 0.6, 0.4, &limits, false);
            match (pruned, full) {
                (Ok((sa, ca)), Ok((sb, cb))) => {
                    assert_eq!(sa, sb, "seed {seed}");
                    assert_eq!(ca, cb, "seed {seed}");
                    solved += 1;
                }
                (Err(ExactError::Infeasible), Err(ExactError::Infeasible)) => {}
                (a, b) => panic!("seed {seed}: modes disagree: {a:?} vs {b:?}"),
            }
        }
        assert!(solved >= 6, "only {solved} instances were solvable");
    }

    #[test]
    fn random_feasible_samples_never_beat_the_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let limits = ExactLimits::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        for seed in 0..10 {
            let net = tiny_mesh(seed);
            let r = request(1, vec![2, 4], &[0], 0.25, 1);
            let Ok((_, optimum)) = exact_single_path(&net, &r, 0.6, 0.4, &limits) else {
                continue;
            };
            for _ in 0..40 {
                let hosts: Vec<NodeId> = net
                    .nfv_nodes()
                    .filter(|n| n.admits(0) && n.id != r.source && !r.destinations.contains(&n.id))
                    .map(|n| n.id)
                    .collect();
                if hosts.is_empty() {
                    break;
                }
                let host = hosts[rng.gen_range(0..hosts.len())];
                let mut segments = Vec::new();
                let mut ok = true;
                for &t in &r.destinations {
                    for (stage, (a, b)) in [(r.source, host), (host, t)].iter().enumerate() {
                        let paths =
                            simple_paths(&net, *a, *b, r.rate, limits.max_paths_per_hop).unwrap();
                        if paths.is_empty() {
                            ok = false;
                            break;
                        }
                        let path = &paths[rng.gen_range(0..paths.len())];
                        segments.push(RoutedSegment {
                            tree: 1,
                            nf_index: stage,
                            destination: t,
                            links: path.clone(),
                            rate: r.rate,
                        });
                    }
                }
                if !ok {
                    continue;
                }
                let sol = EmbeddingSolution {
                    request: r.id,
                    placements: vec![Placement {
                        node: host,
                        nf_index: 1,
                        served_destinations: r.destinations.clone(),
                    }],
                    segments,
                    tree_rates: vec![r.rate],
                    total_cost: 0.0,
                };
                if validate_solution(&sol, &net, &r).is_err() {
                    continue;
                }
                let cost = cost_unchecked(&sol, &net, &r, 0.6, 0.4);
                assert!(cost >= optimum - 1e-9, "sampled {cost} < optimum {optimum}");
                checked += 1;
            }
        }
        assert!(checked > 50, "only {checked} samples were validated");
    }

    #[test]
    fn oracle_bounds_the_heuristic() {
        let limits = ExactLimits::default();
        let params = JprParams::default();
        let mut compared = 0;
        for seed in 0..15 {
            let net = tiny_mesh(seed);
            let r = request(0, vec![3, 5], &[0], 0.25, 1);
            let Ok(sol) = jpr_embed(&net, &r, &params) else { continue };
            validate_solution(&sol, &net, &r).unwrap();
            let (_, optimum) = exact_single_path(&net, &r, 0.6, 0.4, &limits)
                .expect("heuristic feasible implies oracle feasible");
            assert!(
                sol.total_cost >= optimum - 1e-9,
                "seed {seed}: jpr {} beat the oracle {optimum}",
                sol.total_cost
            );
            compared += 1;
        }
        assert!(compared >= 8, "only {compared} instances compared");
    }

    #[test]
    fn multi_service_accepts_everything_with_ample_capacity() {
        let net = tiny_mesh(3);
        let mut second = request(0, vec![5], &[0], 0.1, 1);
        second.id = 1;
        let reqs = vec![request(0, vec![4], &[0], 0.1, 1), second];
        let out =
            exact_multi_service(&net, &reqs, 0.6, 0.4, 0.5, 0.5, &ExactLimits::default()).unwrap();
        assert_eq!(out.accepted, vec![0, 1]);
        let expected: f64 = reqs.iter().map(|r| service::throughput(r, 0.5, 0.5).unwrap()).sum();
        assert!((out.max_throughput - expected).abs() < 1e-9);
    }

    #[test]
    fn multi_service_picks_the_higher_throughput_request() {
        // one NFV node with processing room for exactly one of the chains
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Nfv, 0.5, &[0]),
            node(2, NodeKind::Switch, 0.0, &[]),
        ];
        let net = net_from(nodes, &[(0, 1, 10.0), (1, 2, 10.0)]);
        let small = request(0, vec![2], &[0], 0.3, 1);
        let mut big = request(0, vec![2], &[0], 0.4, 1);
        big.id = 1;
        let out =
            exact_multi_service(&net, &[small, big], 0.6, 0.4, 0.5, 0.5, &ExactLimits::default())
                .unwrap();
        assert_eq!(out.accepted, vec![1]);
    }

    #[test]
    fn max_rate_bottleneck_examples() {
        // 2-link path, both capacity 1, no NFs, J = 1 -> exactly 1.0
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Switch, 0.0, &[]),
            node(2, NodeKind::Switch, 0.0, &[]),
        ];
        let net = net_from(nodes, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let template = request(0, vec![2], &[], 0.1, 1);
        let res = max_supported_rate(
            &net,
            &template,
            1,
            RateEmbedder::Exact,
            1e-3,
            0.6,
            0.4,
            &ExactLimits::default(),
        )
        .unwrap();
        assert_eq!(res.rate, 1.0);

        // two disjoint unit paths, J = 2 -> exactly 2.0
        let nodes = vec![
            node(0, NodeKind::Switch, 0.0, &[]),
            node(1, NodeKind::Switch, 0.0, &[]),
            node(2, NodeKind::Switch, 0.0, &[]),
            node(3, NodeKind::Switch, 0.0, &[]),
        ];
        let net = net_from(nodes, &[(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)]);
        let template = request(0, vec![3], &[], 0.1, 1);
        let res2 = max_supported_rate(
            &net,
            &template,
            2,
            RateEmbedder::Exact,
            1e-3,
            0.6,
            0.4,
            &ExactLimits::default(),
        )
        .unwrap();
        assert_eq!(res2.rate, 2.0);
        let res1 = max_supported_rate(
            &net,
            &template,
            1,
            RateEmbedder::Exact,
            1e-3,
            0.6,
            0.4,
            &ExactLimits::default(),
        )
        .unwrap();
        assert!(res1.rate <= 1.0 && res1.rate >= 1.0 - 1e-3);
    }

    #[test]
    fn two_trees_dominate_one_tree() {
        let limits = ExactLimits::default();
        for seed in 0..8 {
            let net = tiny_mesh(seed);
            let template = request(0, vec![5], &[0], 0.1, 1);
            let r1 =
                max_supported_rate(&net, &template, 1, RateEmbedder::Exact, 1e-3, 0.6, 0.4, &limits)
                    .unwrap();
            let r2 =
                max_supported_rate(&net, &template, 2, RateEmbedder::Exact, 1e-3, 0.6, 0.4, &limits)
                    .unwrap();
            assert!(r2.rate >= r1.rate, "seed {seed}: J=2 {} < J=1 {}", r2.rate, r1.rate);
            assert_eq!(r1.non_monotone, 0);
            assert_eq!(r2.non_monotone, 0);
        }
    }
}
