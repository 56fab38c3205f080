//! Physical substrate network: switches, NFV nodes, directed capacitated
//! links, the residual-resource ledger and the graph queries the embedding
//! algorithms are built on.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::graph::{self, Adjacency};
use crate::{LinkId, NodeId, Rate, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Switch,
    Nfv,
}

/// A substrate node. Switches forward and replicate traffic only; NFV nodes
/// additionally host NF instances within their processing budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Processing rate budget in packet/s; 0 for switches.
    pub processing_capacity: Rate,
    /// NF type ids this node may host (always empty for switches).
    pub admittable_nf_types: BTreeSet<usize>,
    /// Position on the unitless plane, used by the admission geometry.
    pub coord: Point,
}

impl NodeRecord {
    pub fn is_nfv(&self) -> bool {
        self.kind == NodeKind::Nfv
    }

    pub fn admits(&self, nf_type: usize) -> bool {
        self.admittable_nf_types.contains(&nf_type)
    }
}

/// A directed capacitated link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub id: LinkId,
    pub tail: NodeId,
    pub head: NodeId,
    /// Transmission rate budget in packet/s.
    pub capacity: Rate,
}

/// Provenance of a generated network; manual networks carry zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetMeta {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub nfv_count: usize,
    pub nf_type_count: usize,
    pub cap_min: Rate,
    pub cap_max: Rate,
    pub admit_probability: f64,
}

impl NetMeta {
    /// Meta for hand-assembled networks.
    pub fn manual() -> Self {
        NetMeta {
            seed: 0,
            width: 0,
            height: 0,
            nfv_count: 0,
            nf_type_count: 0,
            cap_min: 0.0,
            cap_max: 0.0,
            admit_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResourceKind {
    Node,
    Link,
}

impl std::fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResourceKind::Node => write!(f, "node"),
            ResourceKind::Link => write!(f, "link"),
        }
    }
}

#[derive(Debug, Error)]
pub enum SubstrateError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unreachable: no path from node {from} to node {to}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("insufficient {kind} {id}: requested {requested}, available {available}")]
    Insufficient { kind: ResourceKind, id: usize, requested: Rate, available: Rate },
}

/// Slack absorbing floating-point dust in ledger operations.
pub const RESERVE_TOL: Rate = 1e-9;

/// Resource amounts to reserve or release, per link and per node.
/// Duplicate ids are allowed and accumulate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceDelta {
    pub links: Vec<(LinkId, Rate)>,
    pub nodes: Vec<(NodeId, Rate)>,
}

impl ResourceDelta {
    pub fn is_empty(&self) -> bool {
        self.links.is_empty() && self.nodes.is_empty()
    }

    /// Duplicate ids summed, ascending id order.
    fn merged(&self) -> (Vec<(LinkId, Rate)>, Vec<(NodeId, Rate)>) {
        fn merge(items: &[(usize, Rate)]) -> Vec<(usize, Rate)> {
            let mut sorted: Vec<(usize, Rate)> = items.to_vec();
            sorted.sort_by_key(|&(id, _)| id);
            let mut out: Vec<(usize, Rate)> = Vec::with_capacity(sorted.len());
            for (id, amount) in sorted {
                match out.last_mut() {
                    Some((last, acc)) if *last == id => *acc += amount,
                    _ => out.push((id, amount)),
                }
            }
            out
        }
        (merge(&self.links), merge(&self.nodes))
    }
}

/// The substrate network with its residual ledger.
///
/// The ledger tracks consumed amounts per resource; residuals are computed as
/// `capacity - consumed` so that a reserve followed by the paired release
/// restores the ledger bit-exactly.
#[derive(Debug, Clone)]
pub struct SubstrateNetwork {
    nodes: Vec<NodeRecord>,
    links: Vec<LinkRecord>,
    consumed_node: Vec<Rate>,
    consumed_link: Vec<Rate>,
    adjacency: Adjacency,
    pub meta: NetMeta,
}

/// On-disk form: topology and capacities only, residuals start fresh on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub version: u32,
    pub meta: NetMeta,
    pub nodes: Vec<NodeRecord>,
    pub links: Vec<LinkRecord>,
}

pub const NETWORK_FILE_VERSION: u32 = 1;

/// Parameters for [`SubstrateNetwork::build_mesh`].
#[derive(Debug, Clone)]
pub struct MeshParams {
    pub width: usize,
    pub height: usize,
    pub nfv_count: usize,
    pub cap_min: Rate,
    pub cap_max: Rate,
    pub nf_type_count: usize,
    pub admit_probability: f64,
    pub seed: u64,
}

impl SubstrateNetwork {
    /// Validates and assembles a network from explicit parts.
    pub fn from_parts(
        nodes: Vec<NodeRecord>,
        links: Vec<LinkRecord>,
        meta: NetMeta,
    ) -> Result<Self, SubstrateError> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(SubstrateError::InvalidArgument(format!(
                    "node ids must be dense and ordered, found {} at position {i}",
                    n.id
                )));
            }
            match n.kind {
                NodeKind::Switch => {
                    if n.processing_capacity != 0.0 || !n.admittable_nf_types.is_empty() {
                        return Err(SubstrateError::InvalidArgument(format!(
                            "switch {} must have zero capacity and no admittable NF types",
                            n.id
                        )));
                    }
                }
                NodeKind::Nfv => {
                    if !(n.processing_capacity > 0.0) {
                        return Err(SubstrateError::InvalidArgument(format!(
                            "NFV node {} must have positive processing capacity",
                            n.id
                        )));
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (i, l) in links.iter().enumerate() {
            if l.id != i {
                return Err(SubstrateError::InvalidArgument(format!(
                    "link ids must be dense and ordered, found {} at position {i}",
                    l.id
                )));
            }
            if l.tail == l.head {
                return Err(SubstrateError::InvalidArgument(format!("link {} is a self-loop", l.id)));
            }
            if l.tail >= nodes.len() || l.head >= nodes.len() {
                return Err(SubstrateError::InvalidArgument(format!(
                    "link {} references a missing node",
                    l.id
                )));
            }
            if !(l.capacity > 0.0) {
                return Err(SubstrateError::InvalidArgument(format!(
                    "link {} must have positive capacity",
                    l.id
                )));
            }
            if !seen.insert((l.tail, l.head)) {
                return Err(SubstrateError::InvalidArgument(format!(
                    "duplicate directed link {} -> {}",
                    l.tail, l.head
                )));
            }
        }
        let adjacency = Adjacency::new(nodes.len(), links.iter().map(|l| (l.tail, l.head)));
        let consumed_node = vec![0.0; nodes.len()];
        let consumed_link = vec![0.0; links.len()];
        Ok(SubstrateNetwork { nodes, links, consumed_node, consumed_link, adjacency, meta })
    }

    /// Grid mesh with horizontal, vertical and both diagonal neighbor edges,
    /// each realized as two opposite directed links with equal initial
    /// capacity. Deterministic for a fixed seed.
    pub fn build_mesh(p: &MeshParams) -> Result<Self, SubstrateError> {
        if p.width == 0 || p.height == 0 {
            return Err(SubstrateError::InvalidArgument("mesh dimensions must be positive".into()));
        }
        let n_nodes = p.width * p.height;
        if p.nfv_count > n_nodes {
            return Err(SubstrateError::InvalidArgument(format!(
                "nfv_count {} exceeds node count {n_nodes}",
                p.nfv_count
            )));
        }
        if !(p.cap_min > 0.0) || !(p.cap_max >= p.cap_min) || !p.cap_max.is_finite() {
            return Err(SubstrateError::InvalidArgument(
                "capacity range must satisfy 0 < min <= max < inf".into(),
            ));
        }
        if !(0.0..=1.0).contains(&p.admit_probability) {
            return Err(SubstrateError::InvalidArgument("admit probability must be in [0, 1]".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let draw_cap = |rng: &mut ChaCha8Rng| -> Rate {
            if p.cap_min == p.cap_max {
                p.cap_min
            } else {
                rng.gen_range(p.cap_min..p.cap_max)
            }
        };

        let mut nfv: BTreeSet<NodeId> =
            rand::seq::index::sample(&mut rng, n_nodes, p.nfv_count).into_iter().collect();
        let mut nodes = Vec::with_capacity(n_nodes);
        for y in 0..p.height {
            for x in 0..p.width {
                let id = y * p.width + x;
                let is_nfv = nfv.remove(&id);
                let (kind, cap, admit) = if is_nfv {
                    let cap = draw_cap(&mut rng);
                    let admit: BTreeSet<usize> = (0..p.nf_type_count)
                        .filter(|_| rng.gen_bool(p.admit_probability))
                        .collect();
                    (NodeKind::Nfv, cap, admit)
                } else {
                    (NodeKind::Switch, 0.0, BTreeSet::new())
                };
                nodes.push(NodeRecord {
                    id,
                    kind,
                    processing_capacity: cap,
                    admittable_nf_types: admit,
                    coord: (x as f64, y as f64),
                });
            }
        }

        // Neighbor offsets east, south, south-east, south-west; each
        // undirected edge becomes two directed links.
        let mut links = Vec::new();
        for y in 0..p.height {
            for x in 0..p.width {
                let here = y * p.width + x;
                let neighbors = [
                    (x + 1 < p.width).then(|| here + 1),
                    (y + 1 < p.height).then(|| here + p.width),
                    (x + 1 < p.width && y + 1 < p.height).then(|| here + p.width + 1),
                    (x > 0 && y + 1 < p.height).then(|| here + p.width - 1),
                ];
                for there in neighbors.into_iter().flatten() {
                    let cap = draw_cap(&mut rng);
                    let id = links.len();
                    links.push(LinkRecord { id, tail: here, head: there, capacity: cap });
                    links.push(LinkRecord { id: id + 1, tail: there, head: here, capacity: cap });
                }
            }
        }

        let meta = NetMeta {
            seed: p.seed,
            width: p.width,
            height: p.height,
            nfv_count: p.nfv_count,
            nf_type_count: p.nf_type_count,
            cap_min: p.cap_min,
            cap_max: p.cap_max,
            admit_probability: p.admit_probability,
        };
        SubstrateNetwork::from_parts(nodes, links, meta)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkRecord] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &NodeRecord {
        &self.nodes[id]
    }

    pub fn link(&self, id: LinkId) -> &LinkRecord {
        &self.links[id]
    }

    pub fn nfv_nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.iter().filter(|n| n.is_nfv())
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn residual_node(&self, id: NodeId) -> Rate {
        self.nodes[id].processing_capacity - self.consumed_node[id]
    }

    pub fn residual_link(&self, id: LinkId) -> Rate {
        self.links[id].capacity - self.consumed_link[id]
    }

    /// Bit-exact ledger state, for equality checks.
    pub fn ledger(&self) -> (&[Rate], &[Rate]) {
        (&self.consumed_link, &self.consumed_node)
    }

    /// Atomically reserves the delta: either all residuals are decremented or
    /// none. On a shortfall the error names the first violated resource in
    /// ascending id order, links first. Floating-point dust up to
    /// [`RESERVE_TOL`] is absorbed so exactly-fitting allocations cannot fail
    /// on summation order; residuals are clamped into `[0, capacity]`.
    pub fn reserve(&mut self, delta: &ResourceDelta) -> Result<(), SubstrateError> {
        let (links, nodes) = delta.merged();
        for &(_, amount) in links.iter().chain(nodes.iter()) {
            if !(amount >= 0.0) || !amount.is_finite() {
                return Err(SubstrateError::InvalidArgument("reserve amounts must be >= 0".into()));
            }
        }
        for &(id, amount) in &links {
            if id >= self.links.len() {
                return Err(SubstrateError::InvalidArgument(format!("unknown link {id}")));
            }
            let available = self.residual_link(id);
            if amount > available + RESERVE_TOL {
                return Err(SubstrateError::Insufficient {
                    kind: ResourceKind::Link,
                    id,
                    requested: amount,
                    available,
                });
            }
        }
        for &(id, amount) in &nodes {
            if id >= self.nodes.len() {
                return Err(SubstrateError::InvalidArgument(format!("unknown node {id}")));
            }
            let available = self.residual_node(id);
            if amount > available + RESERVE_TOL {
                return Err(SubstrateError::Insufficient {
                    kind: ResourceKind::Node,
                    id,
                    requested: amount,
                    available,
                });
            }
        }
        for (id, amount) in links {
            self.consumed_link[id] = (self.consumed_link[id] + amount).min(self.links[id].capacity);
        }
        for (id, amount) in nodes {
            self.consumed_node[id] =
                (self.consumed_node[id] + amount).min(self.nodes[id].processing_capacity);
        }
        Ok(())
    }

    /// Restores a previously reserved delta.
    pub fn release(&mut self, delta: &ResourceDelta) {
        let (links, nodes) = delta.merged();
        for (id, amount) in links {
            assert!(
                self.consumed_link[id] + RESERVE_TOL >= amount,
                "release exceeds reserved amount on link {id}"
            );
            self.consumed_link[id] = (self.consumed_link[id] - amount).max(0.0);
        }
        for (id, amount) in nodes {
            assert!(
                self.consumed_node[id] + RESERVE_TOL >= amount,
                "release exceeds reserved amount on node {id}"
            );
            self.consumed_node[id] = (self.consumed_node[id] - amount).max(0.0);
        }
    }

    /// Per-link weights under a cost function; non-finite means excluded.
    pub fn link_weights(&self, weight: impl Fn(&LinkRecord) -> Weight) -> Vec<Weight> {
        self.links.iter().map(weight).collect()
    }

    /// Minimum-weight directed path, ties broken by the lexicographically
    /// smallest node-id sequence. `src == dst` yields the empty path.
    pub fn shortest_path(
        &self,
        src: NodeId,
        dst: NodeId,
        weight: impl Fn(&LinkRecord) -> Weight,
    ) -> Result<(Vec<LinkId>, Weight), SubstrateError> {
        let weights = self.link_weights(weight);
        let tree = graph::shortest_path_tree(&self.adjacency, &weights, src);
        match (tree.path_links(&self.adjacency, dst), tree.distance(dst)) {
            (Some(path), Some(d)) => Ok((path, d)),
            _ => Err(SubstrateError::Unreachable { from: src, to: dst }),
        }
    }

    /// Complete weighted graph over the terminals where the edge between a
    /// terminal pair `(a, b)` with `a < b` carries the shortest-path distance
    /// `a -> b` and its realizing substrate path.
    pub fn metric_closure(
        &self,
        terminals: &[NodeId],
        weight: impl Fn(&LinkRecord) -> Weight,
    ) -> Result<MetricClosure, SubstrateError> {
        let mut terms: Vec<NodeId> = terminals.to_vec();
        terms.sort_unstable();
        terms.dedup();
        let weights = self.link_weights(weight);
        let mut edges = Vec::new();
        for (i, &a) in terms.iter().enumerate() {
            if i + 1 == terms.len() {
                break;
            }
            let tree = graph::shortest_path_tree(&self.adjacency, &weights, a);
            for &b in &terms[i + 1..] {
                match (tree.path_links(&self.adjacency, b), tree.distance(b)) {
                    (Some(path), Some(d)) => edges.push(ClosureEdge { a, b, weight: d, path }),
                    _ => return Err(SubstrateError::Unreachable { from: a, to: b }),
                }
            }
        }
        Ok(MetricClosure { terminals: terms, edges })
    }

    /// Access-region partition used by cross-region request generation: four
    /// corner blocks of `floor(w/3) x floor(h/3)` nodes plus the remaining
    /// core. Requires a generated mesh of at least 3x3.
    pub fn regions(&self) -> Result<Regions, SubstrateError> {
        let (w, h) = (self.meta.width, self.meta.height);
        if w < 3 || h < 3 {
            return Err(SubstrateError::InvalidArgument(
                "cross-region layout needs a generated mesh of at least 3x3".into(),
            ));
        }
        let (cw, ch) = (w / 3, h / 3);
        let mut access: [Vec<NodeId>; 4] = Default::default();
        let mut core = Vec::new();
        for node in &self.nodes {
            let (x, y) = (node.coord.0 as usize, node.coord.1 as usize);
            let west = x < cw;
            let east = x >= w - cw;
            let north = y < ch;
            let south = y >= h - ch;
            match (west, east, north, south) {
                (true, _, true, _) => access[0].push(node.id),
                (_, true, true, _) => access[1].push(node.id),
                (true, _, _, true) => access[2].push(node.id),
                (_, true, _, true) => access[3].push(node.id),
                _ => core.push(node.id),
            }
        }
        Ok(Regions { access, core })
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            version: NETWORK_FILE_VERSION,
            meta: self.meta.clone(),
            nodes: self.nodes.clone(),
            links: self.links.clone(),
        }
    }

    pub fn from_file(file: NetworkFile) -> Result<Self, SubstrateError> {
        if file.version != NETWORK_FILE_VERSION {
            return Err(SubstrateError::InvalidArgument(format!(
                "unsupported network file version {}",
                file.version
            )));
        }
        SubstrateNetwork::from_parts(file.nodes, file.links, file.meta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub weight: Weight,
    /// Links realizing the distance, directed `a -> b`.
    pub path: Vec<LinkId>,
}

#[derive(Debug, Clone)]
pub struct MetricClosure {
    pub terminals: Vec<NodeId>,
    /// One edge per unordered terminal pair, ordered by `(a, b)`.
    pub edges: Vec<ClosureEdge>,
}

impl MetricClosure {
    /// Kruskal MST over the closure; returns indices into `edges`.
    pub fn mst(&self) -> Result<Vec<usize>, SubstrateError> {
        mst(self)
    }
}

/// Kruskal MST of a metric closure, ties broken by ascending
/// `(weight, smaller node id, larger node id)`.
pub fn mst(closure: &MetricClosure) -> Result<Vec<usize>, SubstrateError> {
    let index_of = |n: NodeId| closure.terminals.binary_search(&n).expect("closure terminal");
    let edges: Vec<(usize, usize, Weight)> =
        closure.edges.iter().map(|e| (index_of(e.a), index_of(e.b), e.weight)).collect();
    graph::kruskal_mst(closure.terminals.len(), &edges).ok_or_else(|| {
        SubstrateError::InvalidArgument("metric closure does not connect its terminals".into())
    })
}

/// Corner access regions and the core of a generated mesh.
#[derive(Debug, Clone)]
pub struct Regions {
    pub access: [Vec<NodeId>; 4],
    pub core: Vec<NodeId>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(w: usize, h: usize, nfv: usize, seed: u64) -> SubstrateNetwork {
        SubstrateNetwork::build_mesh(&MeshParams {
            width: w,
            height: h,
            nfv_count: nfv,
            cap_min: 0.5,
            cap_max: 2.0,
            nf_type_count: 6,
            admit_probability: 0.8,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn paper_scale_mesh_has_100_nodes_and_684_links() {
        let net = mesh(10, 10, 25, 7);
        assert_eq!(net.node_count(), 100);
        assert_eq!(net.link_count(), 684);
        assert_eq!(net.nfv_nodes().count(), 25);
    }

    #[test]
    fn two_by_two_mesh_link_count() {
        let net = SubstrateNetwork::build_mesh(&MeshParams {
            width: 2,
            height: 2,
            nfv_count: 0,
            cap_min: 1.0,
            cap_max: 1.0,
            nf_type_count: 0,
            admit_probability: 0.0,
            seed: 1,
        })
        .unwrap();
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.link_count(), 12);
    }

    #[test]
    fn degenerate_single_node_mesh() {
        let net = SubstrateNetwork::build_mesh(&MeshParams {
            width: 1,
            height: 1,
            nfv_count: 1,
            cap_min: 1.0,
            cap_max: 1.0,
            nf_type_count: 1,
            admit_probability: 1.0,
            seed: 1,
        })
        .unwrap();
        assert_eq!(net.node_count(), 1);
        assert_eq!(net.link_count(), 0);
        assert!(net.node(0).is_nfv());
        assert!(net.node(0).admits(0));
    }

    #[test]
    fn mesh_is_reproducible_bytewise() {
        let a = serde_json::to_string(&mesh(5, 4, 6, 42).to_file()).unwrap();
        let b = serde_json::to_string(&mesh(5, 4, 6, 42).to_file()).unwrap();
        let c = serde_json::to_string(&mesh(5, 4, 6, 43).to_file()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mesh_invariants_hold() {
        let net = mesh(6, 6, 10, 3);
        for n in net.nodes() {
            match n.kind {
                NodeKind::Switch => {
                    assert_eq!(n.processing_capacity, 0.0);
                    assert!(n.admittable_nf_types.is_empty());
                }
                NodeKind::Nfv => assert!(n.processing_capacity > 0.0),
            }
        }
        for l in net.links() {
            assert!(l.capacity >= 0.5 && l.capacity <= 2.0);
            assert_ne!(l.tail, l.head);
        }
    }

    #[test]
    fn mesh_rejects_bad_parameters() {
        let bad = SubstrateNetwork::build_mesh(&MeshParams {
            width: 2,
            height: 2,
            nfv_count: 5,
            cap_min: 1.0,
            cap_max: 1.0,
            nf_type_count: 1,
            admit_probability: 0.5,
            seed: 0,
        });
        assert!(matches!(bad, Err(SubstrateError::InvalidArgument(_))));
    }

    fn path_net() -> SubstrateNetwork {
        // a=0, b=1, c=2 in a line, unit capacities.
        let nodes = (0..3)
            .map(|id| NodeRecord {
                id,
                kind: NodeKind::Switch,
                processing_capacity: 0.0,
                admittable_nf_types: BTreeSet::new(),
                coord: (id as f64, 0.0),
            })
            .collect();
        let ends = [(0, 1), (1, 0), (1, 2), (2, 1)];
        let links = ends
            .iter()
            .enumerate()
            .map(|(id, &(tail, head))| LinkRecord { id, tail, head, capacity: 1.0 })
            .collect();
        SubstrateNetwork::from_parts(nodes, links, NetMeta::manual()).unwrap()
    }

    #[test]
    fn shortest_path_on_path_graph() {
        let net = path_net();
        let (path, w) = net.shortest_path(0, 2, |_| 1.0).unwrap();
        assert_eq!(path, vec![0, 2]);
        assert_eq!(w, 2.0);
        let (path, w) = net.shortest_path(1, 1, |_| 1.0).unwrap();
        assert!(path.is_empty());
        assert_eq!(w, 0.0);
    }

    #[test]
    fn closure_on_path_graph() {
        let net = path_net();
        let closure = net.metric_closure(&[0, 2], |_| 1.0).unwrap();
        assert_eq!(closure.edges.len(), 1);
        assert_eq!(closure.edges[0].weight, 2.0);
        assert_eq!(closure.edges[0].path, vec![0, 2]);
        let single = net.metric_closure(&[1], |_| 1.0).unwrap();
        assert!(single.edges.is_empty());
        assert_eq!(single.mst().unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn mst_on_triangle_closure() {
        let closure = MetricClosure {
            terminals: vec![0, 1, 2],
            edges: vec![
                ClosureEdge { a: 0, b: 1, weight: 1.0, path: vec![] },
                ClosureEdge { a: 0, b: 2, weight: 2.0, path: vec![] },
                ClosureEdge { a: 1, b: 2, weight: 3.0, path: vec![] },
            ],
        };
        assert_eq!(mst(&closure).unwrap(), vec![0, 1]);
    }

    #[test]
    fn reserve_and_release() {
        let mut net = path_net();
        let delta = ResourceDelta { links: vec![(0, 0.2)], nodes: vec![] };
        net.reserve(&delta).unwrap();
        assert!((net.residual_link(0) - 0.8).abs() < 1e-12);

        let before = net.ledger().0.to_vec();
        let too_much = ResourceDelta { links: vec![(0, 0.9)], nodes: vec![] };
        let err = net.reserve(&too_much).unwrap_err();
        assert!(matches!(err, SubstrateError::Insufficient { kind: ResourceKind::Link, id: 0, .. }));
        assert_eq!(net.ledger().0, &before[..]);

        net.release(&delta);
        assert_eq!(net.residual_link(0), 1.0);
    }

    #[test]
    fn reserve_is_atomic_across_resources() {
        let mut net = path_net();
        // link 0 fits, link 2 does not: nothing may change
        let delta = ResourceDelta { links: vec![(0, 0.5), (2, 1.5)], nodes: vec![] };
        assert!(net.reserve(&delta).is_err());
        assert_eq!(net.residual_link(0), 1.0);
        assert_eq!(net.residual_link(2), 1.0);
    }

    #[test]
    fn regions_partition_the_grid() {
        let net = mesh(10, 10, 25, 9);
        let regions = net.regions().unwrap();
        let total: usize = regions.access.iter().map(|r| r.len()).sum::<usize>() + regions.core.len();
        assert_eq!(total, 100);
        for r in &regions.access {
            assert_eq!(r.len(), 9);
        }
        assert!(regions.access[0].contains(&0));
        assert!(regions.access[3].contains(&99));
    }
}
