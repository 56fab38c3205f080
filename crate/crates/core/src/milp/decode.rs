//! Reconstruction of embedding solutions from solver assignments.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{BuiltModel, Problem};
use crate::service::{self, ServiceRequest};
use crate::solution::{cost_unchecked, validate_solution, EmbeddingSolution, Placement, RoutedSegment, Violation};
use crate::substrate::SubstrateNetwork;
use crate::{LinkId, NodeId};

const BINARY_TOL: f64 = 1e-6;
const OBJECTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("binary variable {name} has non-integral value {value}")]
    NonIntegral { name: String, value: f64 },
    #[error("assignment is inconsistent: {0}")]
    Inconsistent(String),
    #[error("decoded solution fails validation: {0}")]
    Validation(#[from] Violation),
    #[error("objective mismatch: assignment says {assignment}, decoded solutions give {decoded}")]
    ObjectiveMismatch { assignment: f64, decoded: f64 },
    #[error("model/request mismatch: {0}")]
    BadInput(String),
}

/// Parses a solver solution file: whitespace-separated `name value` pairs,
/// `#`-comments and unparsable lines skipped.
pub fn parse_solution_file(text: &str) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("\\") {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value)) = (parts.next(), parts.next()) else { continue };
        if let Ok(v) = value.parse::<f64>() {
            out.insert(name.to_string(), v);
        }
    }
    out
}

fn binary(values: &[f64], model: &super::MilpModel, idx: usize) -> Result<bool, DecodeError> {
    let v = values[idx];
    if (v - v.round()).abs() > BINARY_TOL || !(v.round() == 0.0 || v.round() == 1.0) {
        return Err(DecodeError::NonIntegral {
            name: model.variable(idx).name.clone(),
            value: v,
        });
    }
    Ok(v.round() == 1.0)
}

/// Decodes one solution per request from the assignment. Rejected requests
/// (their acceptance variable at zero) decode as empty solutions. The
/// decoded solutions must validate and reproduce the assignment's objective.
pub fn decode_solution(
    built: &BuiltModel,
    assignment: &BTreeMap<String, f64>,
    net: &SubstrateNetwork,
    requests: &[ServiceRequest],
) -> Result<Vec<EmbeddingSolution>, DecodeError> {
    if requests.len() != built.catalog.per_request.len() {
        return Err(DecodeError::BadInput(format!(
            "model was built over {} requests, got {}",
            built.catalog.per_request.len(),
            requests.len()
        )));
    }
    let model = &built.model;
    let values = model.assignment_values(assignment);

    let mut solutions = Vec::with_capacity(requests.len());
    for (r_idx, r) in requests.iter().enumerate() {
        let vars = &built.catalog.per_request[r_idx];
        if vars.request != r.id {
            return Err(DecodeError::BadInput(format!(
                "request order mismatch at position {r_idx}"
            )));
        }
        let accepted = match vars.rho {
            Some(rho) => binary(&values, model, rho)?,
            None => true,
        };
        if !accepted {
            for (&(n, i), &z) in &vars.z {
                if binary(&values, model, z)? {
                    return Err(DecodeError::Inconsistent(format!(
                        "request {} is rejected but z_{n}_{i} is set",
                        r.id
                    )));
                }
            }
            for (&j, &pi) in &vars.pi {
                if binary(&values, model, pi)? {
                    return Err(DecodeError::Inconsistent(format!(
                        "request {} is rejected but tree {j} is active",
                        r.id
                    )));
                }
            }
            solutions.push(EmbeddingSolution::empty(r.id));
            continue;
        }

        // Placements from the per-destination instance choices.
        let mut served: BTreeMap<(NodeId, usize), Vec<NodeId>> = BTreeMap::new();
        for i in 1..=r.chain.len() {
            for &t in &r.destinations {
                let mut host = None;
                for (&(n, ui, ut), &u) in &vars.u {
                    if ui == i && ut == t && binary(&values, model, u)? {
                        if !binary(&values, model, vars.z[&(n, i)])? {
                            return Err(DecodeError::Inconsistent(format!(
                                "u_{n}_{i}_{t} set without z_{n}_{i}"
                            )));
                        }
                        if host.replace(n).is_some() {
                            return Err(DecodeError::Inconsistent(format!(
                                "destination {t} has two instances of NF {i}"
                            )));
                        }
                    }
                }
                let Some(host) = host else {
                    return Err(DecodeError::Inconsistent(format!(
                        "destination {t} has no instance of NF {i}"
                    )));
                };
                served.entry((host, i)).or_default().push(t);
            }
        }
        for (&(n, i), &z) in &vars.z {
            if binary(&values, model, z)? && !served.contains_key(&(n, i)) {
                return Err(DecodeError::Inconsistent(format!(
                    "instance z_{n}_{i} is deployed but serves no destination"
                )));
            }
        }
        let placements: Vec<Placement> = served
            .into_iter()
            .map(|((node, nf_index), served_destinations)| Placement {
                node,
                nf_index,
                served_destinations,
            })
            .collect();

        // Active trees, compacted to 1..K in ascending model order.
        let mut tree_rates = Vec::new();
        let mut tree_of: BTreeMap<usize, usize> = BTreeMap::new();
        for (&j, &pi) in &vars.pi {
            let active = binary(&values, model, pi)?;
            let rate = values[vars.d[&j]];
            if !active {
                if rate > BINARY_TOL {
                    return Err(DecodeError::Inconsistent(format!(
                        "tree {j} carries rate {rate} while deactivated"
                    )));
                }
                continue;
            }
            if rate > BINARY_TOL {
                tree_rates.push(rate);
                tree_of.insert(j, tree_rates.len());
            }
        }

        // Walks from the per-destination link indicators.
        let host_of = |t: NodeId, i: usize| -> NodeId {
            if i == 0 {
                r.source
            } else {
                placements
                    .iter()
                    .find(|p| p.nf_index == i && p.served_destinations.contains(&t))
                    .map(|p| p.node)
                    .unwrap_or(t)
            }
        };
        let mut segments = Vec::new();
        for (&j, &tree) in &tree_of {
            for i in 0..=r.chain.len() {
                for &t in &r.destinations {
                    let mut links: Vec<LinkId> = Vec::new();
                    for (&(l, yi, yt, yj), &y) in &vars.y {
                        if yi == i && yt == t && yj == j && binary(&values, model, y)? {
                            if !binary(&values, model, vars.x[&(l, i, j)])? {
                                return Err(DecodeError::Inconsistent(format!(
                                    "y exceeds x on link {l}, segment {i}, tree {j}"
                                )));
                            }
                            links.push(l);
                        }
                    }
                    let from = host_of(t, i);
                    let to = if i == r.chain.len() { t } else { host_of(t, i + 1) };
                    if from == to && links.is_empty() {
                        continue;
                    }
                    // Order the link set into a contiguous walk.
                    let mut by_tail: BTreeMap<NodeId, LinkId> = BTreeMap::new();
                    for &l in &links {
                        if by_tail.insert(net.link(l).tail, l).is_some() {
                            return Err(DecodeError::Inconsistent(format!(
                                "segment {i} for destination {t} branches at node {}",
                                net.link(l).tail
                            )));
                        }
                    }
                    let mut walk = Vec::with_capacity(links.len());
                    let mut at = from;
                    while at != to {
                        let Some(&l) = by_tail.get(&at) else {
                            return Err(DecodeError::Inconsistent(format!(
                                "segment {i} for destination {t} breaks at node {at}"
                            )));
                        };
                        by_tail.remove(&at);
                        walk.push(l);
                        at = net.link(l).head;
                    }
                    if !by_tail.is_empty() {
                        return Err(DecodeError::Inconsistent(format!(
                            "segment {i} for destination {t} has {} stray links",
                            by_tail.len()
                        )));
                    }
                    segments.push(RoutedSegment {
                        tree,
                        nf_index: i,
                        destination: t,
                        links: walk,
                        rate: tree_rates[tree - 1],
                    });
                }
            }
        }

        let mut solution = EmbeddingSolution {
            request: r.id,
            placements,
            segments,
            tree_rates,
            total_cost: 0.0,
        };
        if !solution.is_empty() || !r.chain.is_empty() {
            validate_solution(&solution, net, r)?;
        }
        solution.total_cost =
            cost_unchecked(&solution, net, r, built.config.alpha, built.config.beta);
        solutions.push(solution);
    }

    // The decoded solutions must reproduce the assignment's objective.
    let assignment_objective = model.objective_value(&values);
    let decoded_objective: f64 = match built.problem {
        Problem::P2 => requests
            .iter()
            .zip(&solutions)
            .filter(|(_, s)| !s.is_empty())
            .map(|(r, _)| {
                service::throughput(r, built.config.a1, built.config.a2).expect("valid weights")
            })
            .sum(),
        Problem::P1 | Problem::P3 => solutions.iter().map(|s| s.total_cost).sum(),
    };
    if (assignment_objective - decoded_objective).abs() > OBJECTIVE_TOL {
        return Err(DecodeError::ObjectiveMismatch {
            assignment: assignment_objective,
            decoded: decoded_objective,
        });
    }
    Ok(solutions)
}
