//! Encoding of solutions into model assignments, the reverse of decoding.
//! Used to certify that concrete solutions are feasible model points and
//! that the model objective agrees with the evaluated cost.

use std::collections::BTreeMap;

use super::{BuiltModel, MilpError};
use crate::service::ServiceRequest;
use crate::solution::EmbeddingSolution;
use crate::substrate::SubstrateNetwork;

fn set(values: &mut BTreeMap<String, f64>, name: String, v: f64) {
    *values.get_mut(&name).expect("variable exists in the model") = v;
}

/// Builds a complete variable assignment realizing the given solutions
/// (one per request, in order; empty solutions encode as rejected).
/// Only single-tree solutions are supported.
pub fn encode_assignment(
    built: &BuiltModel,
    net: &SubstrateNetwork,
    requests: &[ServiceRequest],
    solutions: &[EmbeddingSolution],
) -> Result<BTreeMap<String, f64>, MilpError> {
    if requests.len() != built.catalog.per_request.len() || requests.len() != solutions.len() {
        return Err(MilpError::InvalidArgument(
            "requests and solutions must match the model".into(),
        ));
    }
    let model = &built.model;
    let mut values: BTreeMap<String, f64> =
        model.variables().iter().map(|v| (v.name.clone(), 0.0)).collect();

    for (r_idx, (r, sol)) in requests.iter().zip(solutions).enumerate() {
        let vars = &built.catalog.per_request[r_idx];
        if sol.is_empty() {
            continue;
        }
        if sol.tree_rates.len() != 1 {
            return Err(MilpError::InvalidArgument(
                "only single-tree solutions can be encoded".into(),
            ));
        }
        if vars.rho.is_some() {
            set(&mut values, format!("rho_{}", r.id), 1.0);
        }
        set(&mut values, format!("pi_1_{}", r.id), 1.0);
        set(&mut values, format!("d_1_{}", r.id), sol.tree_rates[0]);
        for p in &sol.placements {
            set(&mut values, format!("z_{}_{}_{}", p.node, p.nf_index, r.id), 1.0);
            for &t in &p.served_destinations {
                set(&mut values, format!("u_{}_{}_{}_{}", p.node, p.nf_index, t, r.id), 1.0);
                set(&mut values, format!("w_{}_{}_{}_1_{}", p.node, p.nf_index, t, r.id), 1.0);
            }
        }
        let mut x_used: BTreeMap<(usize, usize), ()> = BTreeMap::new();
        for seg in &sol.segments {
            for &l in &seg.links {
                set(
                    &mut values,
                    format!("y_{}_{}_{}_1_{}", l, seg.nf_index, seg.destination, r.id),
                    1.0,
                );
                x_used.insert((l, seg.nf_index), ());
            }
        }
        for &(l, i) in x_used.keys() {
            set(&mut values, format!("x_{l}_{i}_1_{}", r.id), 1.0);
            set(&mut values, format!("g_{l}_{i}_1_{}", r.id), sol.tree_rates[0]);
        }
        for (&(n, i), _) in &vars.gk {
            // gk mirrors z * k
            let z = values[&format!("z_{n}_{i}_{}", r.id)];
            let k = if net.node(n).admits(r.chain[i - 1].nf_type) { 1.0 } else { 0.0 };
            set(&mut values, format!("gk_{n}_{i}_{}", r.id), z * k);
        }
    }
    Ok(values)
}
