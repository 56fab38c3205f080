//! Multi-service static orchestration: rank requests, embed them
//! sequentially with committed reservations, and report aggregate
//! throughput and utilization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristic::{jpr_embed, EmbedError, JprParams};
use crate::service::{self, ServiceRequest};
use crate::solution::{validate_solution, EmbeddingSolution};
use crate::substrate::{ResourceDelta, SubstrateNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AdmissionPolicy {
    /// Descending size score, ties by descending throughput then id.
    SizeRanked,
    /// Seeded random processing order.
    RandomOrder { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Accepted { solution: EmbeddingSolution, reserved: ResourceDelta },
    Rejected { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissionPlan {
    pub policy: AdmissionPolicy,
    /// Request ids in processing order.
    pub order: Vec<usize>,
    /// One decision per request, in processing order.
    pub decisions: Vec<(usize, Decision)>,
    /// Sum of throughput scores over accepted requests.
    pub aggregate_throughput: f64,
    pub accepted_count: usize,
    /// Consumed over total processing rate, NFV nodes only.
    pub node_utilization: f64,
    /// Consumed over total transmission rate.
    pub link_utilization: f64,
}

impl AdmissionPlan {
    pub fn acceptance_ratio(&self) -> f64 {
        if self.decisions.is_empty() {
            0.0
        } else {
            self.accepted_count as f64 / self.decisions.len() as f64
        }
    }
}

#[derive(Debug, Error)]
pub enum AdmissionError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy)]
pub struct AdmissionParams {
    pub alpha: f64,
    pub beta: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Default for AdmissionParams {
    fn default() -> Self {
        AdmissionParams { alpha: 0.6, beta: 0.4, a1: 0.5, a2: 0.5 }
    }
}

/// Requests sorted for embedding: descending size score, ties broken by
/// descending throughput score, then ascending id.
pub fn rank_by_size(
    requests: &[ServiceRequest],
    net: &SubstrateNetwork,
    a1: f64,
    a2: f64,
) -> Result<Vec<ServiceRequest>, AdmissionError> {
    let mut scored: Vec<(f64, f64, &ServiceRequest)> = requests
        .iter()
        .map(|r| {
            let size = service::size(net, r, a1, a2)
                .map_err(|e| AdmissionError::InvalidArgument(e.to_string()))?;
            let throughput = service::throughput(r, a1, a2)
                .map_err(|e| AdmissionError::InvalidArgument(e.to_string()))?;
            Ok((size, throughput, r))
        })
        .collect::<Result<_, AdmissionError>>()?;
    scored.sort_by(|(ua, ra, a), (ub, rb, b)| {
        ub.partial_cmp(ua)
            .expect("finite size score")
            .then_with(|| rb.partial_cmp(ra).expect("finite throughput score"))
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(scored.into_iter().map(|(_, _, r)| r.clone()).collect())
}

/// Embeds the batch sequentially in policy order against the network's
/// residual ledger. Accepted solutions reserve their resources atomically;
/// rejections leave the ledger untouched.
pub fn run_admission(
    net: &mut SubstrateNetwork,
    requests: &[ServiceRequest],
    policy: AdmissionPolicy,
    params: &AdmissionParams,
) -> Result<AdmissionPlan, AdmissionError> {
    let ordered: Vec<ServiceRequest> = match policy {
        AdmissionPolicy::SizeRanked => rank_by_size(requests, net, params.a1, params.a2)?,
        AdmissionPolicy::RandomOrder { seed } => {
            let mut shuffled = requests.to_vec();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            shuffled
        }
    };
    let jpr = JprParams::with_weights(params.alpha, params.beta);

    let mut decisions = Vec::with_capacity(ordered.len());
    let mut aggregate_throughput = 0.0;
    let mut accepted_count = 0;
    for r in &ordered {
        match jpr_embed(net, r, &jpr) {
            Ok(solution) => {
                debug_assert!(validate_solution(&solution, net, r).is_ok());
                let reserved = solution.resource_deltas(r);
                net.reserve(&reserved)
                    .map_err(|e| AdmissionError::InvalidArgument(e.to_string()))?;
                aggregate_throughput += service::throughput(r, params.a1, params.a2)
                    .map_err(|e| AdmissionError::InvalidArgument(e.to_string()))?;
                accepted_count += 1;
                decisions.push((r.id, Decision::Accepted { solution, reserved }));
            }
            Err(EmbedError::Infeasible(reason)) => {
                decisions.push((r.id, Decision::Rejected { reason: reason.to_string() }));
            }
            Err(e) => return Err(AdmissionError::InvalidArgument(e.to_string())),
        }
    }

    let mut plan = AdmissionPlan {
        policy,
        order: ordered.iter().map(|r| r.id).collect(),
        decisions,
        aggregate_throughput,
        accepted_count,
        node_utilization: 0.0,
        link_utilization: 0.0,
    };
    let (node_utilization, link_utilization) = utilization(net, &plan);
    plan.node_utilization = node_utilization;
    plan.link_utilization = link_utilization;
    Ok(plan)
}

/// Consumed over total capacity per resource class, summed from the plan's
/// accepted reservations: `(processing fraction, transmission fraction)`.
pub fn utilization(net: &SubstrateNetwork, plan: &AdmissionPlan) -> (f64, f64) {
    let mut node_consumed = 0.0;
    let mut link_consumed = 0.0;
    for (_, decision) in &plan.decisions {
        if let Decision::Accepted { reserved, .. } = decision {
            node_consumed += reserved.nodes.iter().map(|(_, amount)| amount).sum::<f64>();
            link_consumed += reserved.links.iter().map(|(_, amount)| amount).sum::<f64>();
        }
    }
    let node_total: f64 = net.nfv_nodes().map(|n| n.processing_capacity).sum();
    let link_total: f64 = net.links().iter().map(|l| l.capacity).sum();
    let node_frac = if node_total > 0.0 { node_consumed / node_total } else { 0.0 };
    let link_frac = if link_total > 0.0 { link_consumed / link_total } else { 0.0 };
    (node_frac, link_frac)
}

/// Utilization recomputed from the ledger, for cross-checking plans.
pub fn ledger_utilization(net: &SubstrateNetwork) -> (f64, f64) {
    let node_total: f64 = net.nfv_nodes().map(|n| n.processing_capacity).sum();
    let node_consumed: f64 =
        net.nfv_nodes().map(|n| n.processing_capacity - net.residual_node(n.id)).sum();
    let link_total: f64 = net.links().iter().map(|l| l.capacity).sum();
    let link_consumed: f64 = net.links().iter().map(|l| l.capacity - net.residual_link(l.id)).sum();
    let node_frac = if node_total > 0.0 { node_consumed / node_total } else { 0.0 };
    let link_frac = if link_total > 0.0 { link_consumed / link_total } else { 0.0 };
    (node_frac, link_frac)
}
