//! Multicast NF-chain requests and the per-request scalar metrics the
//! admission layer ranks by: throughput, distribution level and size.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Point};
use crate::substrate::SubstrateNetwork;
use crate::{NodeId, Rate};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One NF in a chain: its type and the processing rate it consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfSpec {
    pub nf_type: usize,
    pub processing_demand: Rate,
}

/// A multicast service request: traffic of `rate` packet/s from `source` to
/// every destination, traversing `chain` in order, over at most `max_trees`
/// multicast trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub id: usize,
    pub source: NodeId,
    /// Sorted, deduplicated, never contains `source`.
    pub destinations: Vec<NodeId>,
    pub chain: Vec<NfSpec>,
    pub rate: Rate,
    pub max_trees: usize,
}

impl ServiceRequest {
    pub fn new(
        id: usize,
        source: NodeId,
        mut destinations: Vec<NodeId>,
        chain: Vec<NfSpec>,
        rate: Rate,
        max_trees: usize,
    ) -> Result<Self, ServiceError> {
        destinations.sort_unstable();
        destinations.dedup();
        if destinations.is_empty() {
            return Err(ServiceError::InvalidArgument("destination set must be non-empty".into()));
        }
        if destinations.contains(&source) {
            return Err(ServiceError::InvalidArgument("source cannot be a destination".into()));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(ServiceError::InvalidArgument("rate must be positive".into()));
        }
        if max_trees == 0 {
            return Err(ServiceError::InvalidArgument("max_trees must be at least 1".into()));
        }
        for nf in &chain {
            if !(nf.processing_demand > 0.0) {
                return Err(ServiceError::InvalidArgument(
                    "NF processing demands must be positive".into(),
                ));
            }
        }
        Ok(ServiceRequest { id, source, destinations, chain, rate, max_trees })
    }

    pub fn chain_len(&self) -> usize {
        self.chain.len()
    }

    /// Total processing demand of the chain.
    pub fn total_processing(&self) -> Rate {
        self.chain.iter().map(|nf| nf.processing_demand).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionPolicy {
    /// Endpoints uniform over all nodes.
    Uniform,
    /// Source from one corner access region, each destination from one of the
    /// other three.
    CrossRegion,
}

#[derive(Debug, Clone)]
pub struct RequestGenParams {
    pub count: usize,
    pub nf_count_choices: Vec<usize>,
    pub dest_count_choices: Vec<usize>,
    pub rate_min: Rate,
    pub rate_max: Rate,
    pub region_policy: RegionPolicy,
    pub max_trees: usize,
    pub seed: u64,
}

/// On-disk request batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestFile {
    pub version: u32,
    pub meta: RequestMeta,
    pub requests: Vec<ServiceRequest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestMeta {
    pub seed: u64,
    pub region_policy: RegionPolicy,
}

pub const REQUEST_FILE_VERSION: u32 = 1;

/// Seeded-deterministic request batch. Every NF's processing demand is set
/// equal to the request rate.
pub fn generate_requests(
    net: &SubstrateNetwork,
    p: &RequestGenParams,
) -> Result<Vec<ServiceRequest>, ServiceError> {
    if p.count == 0 {
        return Ok(Vec::new());
    }
    if p.nf_count_choices.is_empty() || p.dest_count_choices.is_empty() {
        return Err(ServiceError::InvalidArgument("choice sets must be non-empty".into()));
    }
    if !(p.rate_min > 0.0) || !(p.rate_max >= p.rate_min) || !p.rate_max.is_finite() {
        return Err(ServiceError::InvalidArgument(
            "rate range must satisfy 0 < min <= max < inf".into(),
        ));
    }
    if p.max_trees == 0 {
        return Err(ServiceError::InvalidArgument("max_trees must be at least 1".into()));
    }
    let max_dests = *p.dest_count_choices.iter().max().unwrap();
    if max_dests + 1 > net.node_count() {
        return Err(ServiceError::InvalidArgument(format!(
            "cannot pick {max_dests} destinations plus a source from {} nodes",
            net.node_count()
        )));
    }
    let max_nfs = *p.nf_count_choices.iter().max().unwrap();
    if max_nfs > 0 && net.meta.nf_type_count == 0 {
        return Err(ServiceError::InvalidArgument(
            "network declares no NF types, cannot generate chains".into(),
        ));
    }

    let regions = match p.region_policy {
        RegionPolicy::Uniform => None,
        RegionPolicy::CrossRegion => {
            let regions =
                net.regions().map_err(|e| ServiceError::InvalidArgument(e.to_string()))?;
            let smallest_rest = (0..4)
                .map(|i| (0..4).filter(|&j| j != i).map(|j| regions.access[j].len()).sum::<usize>())
                .min()
                .unwrap();
            if max_dests > smallest_rest {
                return Err(ServiceError::InvalidArgument(format!(
                    "access regions too small for {max_dests} destinations"
                )));
            }
            Some(regions)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut requests = Vec::with_capacity(p.count);
    for id in 0..p.count {
        let nf_count = p.nf_count_choices[rng.gen_range(0..p.nf_count_choices.len())];
        let dest_count = p.dest_count_choices[rng.gen_range(0..p.dest_count_choices.len())];
        let rate = if p.rate_min == p.rate_max {
            p.rate_min
        } else {
            rng.gen_range(p.rate_min..p.rate_max)
        };

        let (source, destinations) = match &regions {
            None => {
                let source = rng.gen_range(0..net.node_count());
                let mut dests = Vec::with_capacity(dest_count);
                while dests.len() < dest_count {
                    let d = rng.gen_range(0..net.node_count());
                    if d != source && !dests.contains(&d) {
                        dests.push(d);
                    }
                }
                (source, dests)
            }
            Some(regions) => {
                let src_region = rng.gen_range(0..4);
                let source =
                    regions.access[src_region][rng.gen_range(0..regions.access[src_region].len())];
                let others: Vec<usize> = (0..4).filter(|&i| i != src_region).collect();
                let mut dests = Vec::with_capacity(dest_count);
                while dests.len() < dest_count {
                    let region = &regions.access[others[rng.gen_range(0..3)]];
                    let d = region[rng.gen_range(0..region.len())];
                    if !dests.contains(&d) {
                        dests.push(d);
                    }
                }
                (source, dests)
            }
        };

        let chain = (0..nf_count)
            .map(|_| NfSpec {
                nf_type: rng.gen_range(0..net.meta.nf_type_count),
                processing_demand: rate,
            })
            .collect();
        requests.push(ServiceRequest::new(id, source, destinations, chain, rate, p.max_trees)?);
    }
    Ok(requests)
}

fn check_weights(a1: f64, a2: f64) -> Result<(), ServiceError> {
    if !(a1 > 0.0) || !(a2 > 0.0) || (a1 + a2 - 1.0).abs() > 1e-9 {
        return Err(ServiceError::InvalidArgument(format!(
            "weights must be positive and sum to 1, got a1={a1}, a2={a2}"
        )));
    }
    Ok(())
}

/// Throughput score of a request:
/// `a1 * total processing demand + a2 * (|chain| + |destinations|) * rate`.
pub fn throughput(r: &ServiceRequest, a1: f64, a2: f64) -> Result<Rate, ServiceError> {
    check_weights(a1, a2)?;
    let transmission = (r.chain.len() + r.destinations.len()) as f64 * r.rate;
    Ok(a1 * r.total_processing() + a2 * transmission)
}

/// Distribution level in `[0, 1]`: the destination hull area over the
/// whole-network hull area, times the source-to-destination-centroid distance
/// over the network diameter. Degenerate geometry yields 0.
pub fn distribution_level(net: &SubstrateNetwork, r: &ServiceRequest) -> f64 {
    let all: Vec<Point> = net.nodes().iter().map(|n| n.coord).collect();
    let total_area = geometry::convex_hull_area(&all);
    let diameter = geometry::max_pairwise_distance(&all);
    if total_area == 0.0 || diameter == 0.0 {
        return 0.0;
    }
    let dest_points: Vec<Point> = r.destinations.iter().map(|&d| net.node(d).coord).collect();
    let dest_area = geometry::convex_hull_area(&dest_points);
    let source_to_centroid =
        geometry::euclidean(net.node(r.source).coord, geometry::centroid(&dest_points));
    (dest_area / total_area) * (source_to_centroid / diameter)
}

/// Size score: throughput corrected by how distributive (costly) a request
/// is. Higher sizes are embedded first.
pub fn size(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    a1: f64,
    a2: f64,
) -> Result<f64, ServiceError> {
    Ok(throughput(r, a1, a2)? * (1.0 - distribution_level(net, r)))
}
