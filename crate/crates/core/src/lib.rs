//! Embedding of multicast network-function chains onto capacitated substrate
//! networks.
//!
//! The crate models a physical substrate of switches, NFV nodes and directed
//! capacitated links ([`substrate`]), multicast service requests carrying an
//! ordered NF chain ([`service`]), and provides three ways to embed them:
//!
//! * [`heuristic`] — the joint placement-and-routing (JPR) heuristic built on
//!   key-node-preferred minimum spanning trees, with greedy NF placement,
//!   corrective attachment and multipath rate splitting;
//! * [`exact`] — a desk-scale exhaustive/branch-and-bound oracle for small
//!   instances, used as ground truth in tests and benchmarks;
//! * [`milp`] — explicit mixed-integer models of the single- and multi-service
//!   problems, exported as solver-ready LP text and decodable back into
//!   solutions.
//!
//! [`admission`] ranks and sequentially embeds whole request batches, and
//! [`bench`] reproduces the experiment structure (cost sweeps, single- vs
//! multi-path rate comparison, admission studies) as CSV/JSON reports.

pub mod admission;
pub mod bench;
pub mod exact;
pub mod files;
pub mod geometry;
pub mod graph;
pub mod heuristic;
pub mod milp;
pub mod service;
pub mod solution;
pub mod substrate;

/// Node identifier: dense 0-based index into a network's node list.
pub type NodeId = usize;
/// Link identifier: dense 0-based index into a network's link list.
pub type LinkId = usize;
/// Rates (processing and transmission) in packet/s.
pub type Rate = f64;
/// Routing weights derived from rates.
pub type Weight = f64;

pub use service::{NfSpec, ServiceRequest};
pub use solution::{EmbeddingSolution, Placement, RoutedSegment};
pub use substrate::{LinkRecord, NodeKind, NodeRecord, SubstrateNetwork};
