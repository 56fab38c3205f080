//! Graph primitives shared by the embedding algorithms.
//!
//! Everything here is generic over the weight scalar via [`num_traits::Float`]
//! so the algorithms are independent of the concrete rate type; the rest of
//! the crate instantiates them with [`crate::Weight`] (`f64`).
//!
//! Determinism: all tie-breaking is canonical. Shortest paths break distance
//! ties by the lexicographically smallest node-id sequence, Kruskal breaks
//! weight ties by ascending `(weight, smaller endpoint, larger endpoint)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::Float;

use crate::{LinkId, NodeId};

/// Directed adjacency over dense node and link ids.
#[derive(Debug, Clone)]
pub struct Adjacency {
    tails: Vec<NodeId>,
    heads: Vec<NodeId>,
    out: Vec<Vec<LinkId>>,
    inn: Vec<Vec<LinkId>>,
}

impl Adjacency {
    pub fn new(node_count: usize, ends: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        let mut tails = Vec::new();
        let mut heads = Vec::new();
        let mut out = vec![Vec::new(); node_count];
        let mut inn = vec![Vec::new(); node_count];
        for (id, (tail, head)) in ends.into_iter().enumerate() {
            assert!(tail < node_count && head < node_count, "link endpoint out of range");
            tails.push(tail);
            heads.push(head);
            out[tail].push(id);
            inn[head].push(id);
        }
        Adjacency { tails, heads, out, inn }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn link_count(&self) -> usize {
        self.tails.len()
    }

    pub fn tail(&self, link: LinkId) -> NodeId {
        self.tails[link]
    }

    pub fn head(&self, link: LinkId) -> NodeId {
        self.heads[link]
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out[node]
    }

    pub fn in_links(&self, node: NodeId) -> &[LinkId] {
        &self.inn[node]
    }

    /// The unique directed link `tail -> head`, if present.
    pub fn link_between(&self, tail: NodeId, head: NodeId) -> Option<LinkId> {
        self.out[tail].iter().copied().find(|&l| self.heads[l] == head)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry<W> {
    dist: W,
    node: NodeId,
}

impl<W: Float> Eq for HeapEntry<W> {}

impl<W: Float> Ord for HeapEntry<W> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest key first.
        // Distances are finite by construction (non-finite weights are skipped).
        other
            .dist
            .partial_cmp(&self.dist)
            .expect("non-finite distance in heap")
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<W: Float> PartialOrd for HeapEntry<W> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths with canonical tie-breaking.
///
/// `paths[v]` is the lexicographically smallest node-id sequence among all
/// minimum-weight `source -> v` paths. Links with non-finite weight are
/// treated as absent; weights must be positive for the canonical tie-break to
/// be well defined.
#[derive(Debug, Clone)]
pub struct SpTree<W> {
    pub source: NodeId,
    pub dist: Vec<Option<W>>,
    paths: Vec<Option<Vec<NodeId>>>,
}

impl<W: Float> SpTree<W> {
    pub fn distance(&self, target: NodeId) -> Option<W> {
        self.dist[target]
    }

    /// Lexicographically smallest shortest path as a node sequence
    /// (starts at the source, ends at `target`).
    pub fn path_nodes(&self, target: NodeId) -> Option<&[NodeId]> {
        self.paths[target].as_deref()
    }

    /// Same path expressed as link ids.
    pub fn path_links(&self, adj: &Adjacency, target: NodeId) -> Option<Vec<LinkId>> {
        let nodes = self.paths[target].as_deref()?;
        Some(nodes_to_links(adj, nodes))
    }
}

/// Translate a node walk into link ids; panics if a hop has no link.
pub fn nodes_to_links(adj: &Adjacency, nodes: &[NodeId]) -> Vec<LinkId> {
    nodes
        .windows(2)
        .map(|w| adj.link_between(w[0], w[1]).expect("walk uses a missing link"))
        .collect()
}

pub fn shortest_path_tree<W: Float>(adj: &Adjacency, weights: &[W], source: NodeId) -> SpTree<W> {
    let n = adj.node_count();
    let mut dist: Vec<Option<W>> = vec![None; n];
    dist[source] = Some(W::zero());
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: W::zero(), node: source });
    let mut settled = vec![false; n];
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if settled[node] {
            continue;
        }
        settled[node] = true;
        for &l in adj.out_links(node) {
            let w = weights[l];
            if !w.is_finite() {
                continue;
            }
            debug_assert!(w >= W::zero(), "negative link weight");
            let head = adj.head(l);
            let nd = d + w;
            if dist[head].map_or(true, |cur| nd < cur) {
                dist[head] = Some(nd);
                heap.push(HeapEntry { dist: nd, node: head });
            }
        }
    }

    // Second pass: build the lexicographically smallest shortest path per
    // node, in ascending (distance, id) order so predecessors are ready.
    let mut order: Vec<NodeId> = (0..n).filter(|&v| dist[v].is_some()).collect();
    order.sort_by(|&a, &b| {
        dist[a]
            .partial_cmp(&dist[b])
            .expect("non-finite distance")
            .then_with(|| a.cmp(&b))
    });
    let mut paths: Vec<Option<Vec<NodeId>>> = vec![None; n];
    for &v in &order {
        if v == source {
            paths[v] = Some(vec![source]);
            continue;
        }
        let dv = dist[v].unwrap();
        let mut best: Option<Vec<NodeId>> = None;
        for &l in adj.in_links(v) {
            let w = weights[l];
            if !w.is_finite() {
                continue;
            }
            let u = adj.tail(l);
            let (Some(du), Some(pu)) = (dist[u], paths[u].as_ref()) else { continue };
            if du + w != dv {
                continue;
            }
            let better = match &best {
                None => true,
                Some(cur) => lex_with_suffix(pu, v, cur),
            };
            if better {
                let mut p = pu.clone();
                p.push(v);
                best = Some(p);
            }
        }
        debug_assert!(best.is_some(), "reachable node without a ready predecessor");
        paths[v] = best;
    }
    SpTree { source, dist, paths }
}

/// Is `prefix ++ [last]` lexicographically smaller than `cur`?
fn lex_with_suffix(prefix: &[NodeId], last: NodeId, cur: &[NodeId]) -> bool {
    let lhs = prefix.iter().copied().chain(std::iter::once(last));
    lhs.cmp(cur.iter().copied()) == Ordering::Less
}

/// Kruskal's minimum spanning tree over an explicit edge list on vertices
/// `0..vertex_count`. Returns indices into `edges`, or `None` when the edges
/// do not connect all vertices. Ties are broken by ascending
/// `(weight, smaller endpoint, larger endpoint)`, which makes the result
/// invariant under permutations of the input list.
pub fn kruskal_mst<W: Float>(vertex_count: usize, edges: &[(usize, usize, W)]) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&i, &j| {
        let (ai, bi, wi) = edges[i];
        let (aj, bj, wj) = edges[j];
        let (ai, bi) = (ai.min(bi), ai.max(bi));
        let (aj, bj) = (aj.min(bj), aj.max(bj));
        wi.partial_cmp(&wj)
            .expect("non-finite edge weight")
            .then_with(|| ai.cmp(&aj))
            .then_with(|| bi.cmp(&bj))
    });
    let mut uf = UnionFind::new(vertex_count);
    let mut tree = Vec::new();
    for idx in order {
        let (a, b, _) = edges[idx];
        if uf.union(a, b) {
            tree.push(idx);
            if tree.len() + 1 == vertex_count {
                break;
            }
        }
    }
    if vertex_count == 0 || tree.len() + 1 == vertex_count {
        tree.sort_unstable();
        Some(tree)
    } else {
        None
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Deterministic: smaller root wins.
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

/// Loopless k-shortest paths (Yen). Paths are returned as link sequences in
/// ascending `(cost, node-sequence)` order. `src == dst` yields the empty
/// path.
pub fn k_shortest_paths<W: Float>(
    adj: &Adjacency,
    weights: &[W],
    src: NodeId,
    dst: NodeId,
    k: usize,
) -> Vec<(Vec<LinkId>, W)> {
    if k == 0 {
        return Vec::new();
    }
    if src == dst {
        return vec![(Vec::new(), W::zero())];
    }
    let first = shortest_path_tree(adj, weights, src);
    let Some(nodes) = first.path_nodes(dst) else { return Vec::new() };
    let mut accepted: Vec<(Vec<NodeId>, W)> = vec![(nodes.to_vec(), first.distance(dst).unwrap())];
    // Candidates found so far but not yet accepted, deduplicated by node
    // sequence.
    let mut candidates: Vec<(Vec<NodeId>, W)> = Vec::new();

    while accepted.len() < k {
        let (prev_nodes, _) = accepted.last().unwrap().clone();
        for spur_idx in 0..prev_nodes.len() - 1 {
            let spur_node = prev_nodes[spur_idx];
            let root = &prev_nodes[..=spur_idx];

            let mut masked = weights.to_vec();
            // Remove links that would recreate an already accepted path with
            // this root, and all nodes of the root except the spur node.
            for (path, _) in accepted.iter().chain(candidates.iter()) {
                if path.len() > spur_idx + 1 && path[..=spur_idx] == *root {
                    if let Some(l) = adj.link_between(path[spur_idx], path[spur_idx + 1]) {
                        masked[l] = W::infinity();
                    }
                }
            }
            for &v in &root[..spur_idx] {
                for &l in adj.out_links(v) {
                    masked[l] = W::infinity();
                }
                for &l in adj.in_links(v) {
                    masked[l] = W::infinity();
                }
            }

            let spur_tree = shortest_path_tree(adj, &masked, spur_node);
            let Some(spur_path) = spur_tree.path_nodes(dst) else { continue };
            let mut total: Vec<NodeId> = root[..spur_idx].to_vec();
            total.extend_from_slice(spur_path);
            if accepted.iter().any(|(p, _)| *p == total)
                || candidates.iter().any(|(p, _)| *p == total)
            {
                continue;
            }
            let cost = total
                .windows(2)
                .map(|w| weights[adj.link_between(w[0], w[1]).unwrap()])
                .fold(W::zero(), |acc, x| acc + x);
            candidates.push((total, cost));
        }
        if candidates.is_empty() {
            break;
        }
        let best = candidates
            .iter()
            .enumerate()
            .min_by(|(_, (pa, ca)), (_, (pb, cb))| {
                ca.partial_cmp(cb).expect("non-finite path cost").then_with(|| pa.cmp(pb))
            })
            .map(|(i, _)| i)
            .unwrap();
        accepted.push(candidates.swap_remove(best));
    }

    accepted
        .into_iter()
        .map(|(nodes, cost)| (nodes_to_links(adj, &nodes), cost))
        .collect()
}
