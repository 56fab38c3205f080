//! Model construction for the three problems.

use serde::{Deserialize, Serialize};

use super::{
    MilpError, MilpModel, ObjectiveSense, RequestVars, Sense, VarKind, VariableCatalog,
};
use crate::service::{self, ServiceRequest};
use crate::substrate::SubstrateNetwork;
use crate::NodeId;

/// How the admittability restriction `z * k = 1` from the formulation is
/// emitted. Taken literally it is unsatisfiable as soon as one pair is not
/// admittable, so the default reads it as the inequality `z <= k` and folds
/// the constant: variables at non-admittable pairs are forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmittabilityMode {
    /// `z <= 0` rows only where the pair is not admittable.
    ReducedInequality,
    /// Full product linearization (`gk <= z`, `gk <= k`, `gk >= z + k - 1`)
    /// plus the inequality reading `z <= k`.
    LinearizedInequality,
    /// Full product linearization plus the literal reading `gk = 1`;
    /// infeasible whenever some pair is not admittable, kept for audit.
    Literal,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MilpConfig {
    pub alpha: f64,
    pub beta: f64,
    pub a1: f64,
    pub a2: f64,
    pub admittability: AdmittabilityMode,
}

impl Default for MilpConfig {
    fn default() -> Self {
        MilpConfig {
            alpha: 0.6,
            beta: 0.4,
            a1: 0.5,
            a2: 0.5,
            admittability: AdmittabilityMode::ReducedInequality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    P1,
    P2,
    P3,
}

/// A built model together with its variable catalog and build inputs.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: MilpModel,
    pub catalog: VariableCatalog,
    pub problem: Problem,
    pub config: MilpConfig,
    pub r_star: Option<f64>,
}

/// Single-service minimum-cost model.
pub fn build_p1(
    net: &SubstrateNetwork,
    request: &ServiceRequest,
    config: &MilpConfig,
) -> Result<BuiltModel, MilpError> {
    build(net, std::slice::from_ref(request), config, Problem::P1, None)
}

/// Multi-service maximum aggregate throughput model.
pub fn build_p2(
    net: &SubstrateNetwork,
    requests: &[ServiceRequest],
    config: &MilpConfig,
) -> Result<BuiltModel, MilpError> {
    build(net, requests, config, Problem::P2, None)
}

/// Multi-service minimum-cost model subject to an aggregate throughput bound
/// (normally the optimum of the corresponding throughput model).
pub fn build_p3(
    net: &SubstrateNetwork,
    requests: &[ServiceRequest],
    config: &MilpConfig,
    r_star: f64,
) -> Result<BuiltModel, MilpError> {
    build(net, requests, config, Problem::P3, Some(r_star))
}

fn check_weights(alpha: f64, beta: f64) -> Result<(), MilpError> {
    if !(alpha > 0.0) || !(beta > 0.0) || (alpha + beta - 1.0).abs() > 1e-9 {
        return Err(MilpError::InvalidArgument(format!(
            "alpha and beta must be positive and sum to 1, got {alpha} and {beta}"
        )));
    }
    Ok(())
}

pub(super) fn build(
    net: &SubstrateNetwork,
    requests: &[ServiceRequest],
    config: &MilpConfig,
    problem: Problem,
    r_star: Option<f64>,
) -> Result<BuiltModel, MilpError> {
    check_weights(config.alpha, config.beta)?;
    if requests.is_empty() {
        return Err(MilpError::InvalidArgument("at least one request is required".into()));
    }
    if problem == Problem::P1 && requests.len() != 1 {
        return Err(MilpError::InvalidArgument(
            "the single-service model takes exactly one request".into(),
        ));
    }
    for r in requests {
        if r.source >= net.node_count() || r.destinations.iter().any(|&t| t >= net.node_count()) {
            return Err(MilpError::InvalidArgument(format!(
                "request {} references nodes outside the network",
                r.id
            )));
        }
    }
    let with_rho = problem != Problem::P1;
    let throughputs: Vec<f64> = if with_rho {
        requests
            .iter()
            .map(|r| service::throughput(r, config.a1, config.a2))
            .collect::<Result<_, _>>()
            .map_err(|e| MilpError::InvalidArgument(e.to_string()))?
    } else {
        Vec::new()
    };

    let sense = match problem {
        Problem::P2 => ObjectiveSense::Maximize,
        _ => ObjectiveSense::Minimize,
    };
    let name = match problem {
        Problem::P1 => "single_service_min_cost",
        Problem::P2 => "multi_service_max_throughput",
        Problem::P3 => "multi_service_min_cost_bounded",
    };
    let mut model = MilpModel::new(name, sense);
    let mut catalog = VariableCatalog::default();

    let nfv: Vec<NodeId> = net.nfv_nodes().map(|n| n.id).collect();
    let full_linearization = config.admittability != AdmittabilityMode::ReducedInequality;

    // Variables, family by family per request.
    for r in requests {
        let mut vars = RequestVars { request: r.id, ..Default::default() };
        let stages = r.chain.len() + 1;
        let trees = r.max_trees;
        for l in 0..net.link_count() {
            for i in 0..stages {
                for j in 1..=trees {
                    let idx = model.add_variable(
                        format!("x_{l}_{i}_{j}_{}", r.id),
                        VarKind::Binary,
                        0.0,
                        1.0,
                    );
                    vars.x.insert((l, i, j), idx);
                }
            }
        }
        for l in 0..net.link_count() {
            for i in 0..stages {
                for &t in &r.destinations {
                    for j in 1..=trees {
                        let idx = model.add_variable(
                            format!("y_{l}_{i}_{t}_{j}_{}", r.id),
                            VarKind::Binary,
                            0.0,
                            1.0,
                        );
                        vars.y.insert((l, i, t, j), idx);
                    }
                }
            }
        }
        for &n in &nfv {
            for i in 1..=r.chain.len() {
                let idx =
                    model.add_variable(format!("z_{n}_{i}_{}", r.id), VarKind::Binary, 0.0, 1.0);
                vars.z.insert((n, i), idx);
            }
        }
        for &n in &nfv {
            for i in 1..=r.chain.len() {
                for &t in &r.destinations {
                    // Endpoints of a flow never host its NFs.
                    let upper = if n == r.source || n == t { 0.0 } else { 1.0 };
                    let idx = model.add_variable(
                        format!("u_{n}_{i}_{t}_{}", r.id),
                        VarKind::Binary,
                        0.0,
                        upper,
                    );
                    vars.u.insert((n, i, t), idx);
                }
            }
        }
        for &n in &nfv {
            for i in 1..=r.chain.len() {
                for &t in &r.destinations {
                    for j in 1..=trees {
                        let idx = model.add_variable(
                            format!("w_{n}_{i}_{t}_{j}_{}", r.id),
                            VarKind::Binary,
                            0.0,
                            1.0,
                        );
                        vars.w.insert((n, i, t, j), idx);
                    }
                }
            }
        }
        for j in 1..=trees {
            let idx = model.add_variable(format!("pi_{j}_{}", r.id), VarKind::Binary, 0.0, 1.0);
            vars.pi.insert(j, idx);
        }
        if with_rho {
            let idx = model.add_variable(format!("rho_{}", r.id), VarKind::Binary, 0.0, 1.0);
            vars.rho = Some(idx);
        }
        for j in 1..=trees {
            let idx =
                model.add_variable(format!("d_{j}_{}", r.id), VarKind::Continuous, 0.0, r.rate);
            vars.d.insert(j, idx);
        }
        for l in 0..net.link_count() {
            for i in 0..stages {
                for j in 1..=trees {
                    let idx = model.add_variable(
                        format!("g_{l}_{i}_{j}_{}", r.id),
                        VarKind::Continuous,
                        0.0,
                        r.rate,
                    );
                    vars.gamma.insert((l, i, j), idx);
                }
            }
        }
        if full_linearization {
            for &n in &nfv {
                for i in 1..=r.chain.len() {
                    let idx = model.add_variable(
                        format!("gk_{n}_{i}_{}", r.id),
                        VarKind::Continuous,
                        0.0,
                        1.0,
                    );
                    vars.gk.insert((n, i), idx);
                }
            }
        }
        catalog.per_request.push(vars);
    }

    // Objective.
    match problem {
        Problem::P2 => {
            for (r_idx, _) in requests.iter().enumerate() {
                let rho = catalog.per_request[r_idx].rho.expect("rho exists");
                model.add_objective_term(rho, throughputs[r_idx]);
            }
        }
        Problem::P1 | Problem::P3 => {
            for (r_idx, r) in requests.iter().enumerate() {
                let vars = &catalog.per_request[r_idx];
                for (&(l, _, _), &gamma) in &vars.gamma {
                    model.add_objective_term(gamma, config.alpha / net.residual_link(l));
                }
                for &x in vars.x.values() {
                    model.add_objective_term(x, config.alpha);
                }
                for (&(n, i), &z) in &vars.z {
                    let demand = r.chain[i - 1].processing_demand;
                    model.add_objective_term(z, config.beta * demand / net.residual_node(n));
                }
            }
        }
    }

    // Per-request constraint families.
    for (r_idx, r) in requests.iter().enumerate() {
        let vars = catalog.per_request[r_idx].clone();
        let rid = r.id;
        let stages = r.chain.len() + 1;
        let trees = r.max_trees;
        let big_m = r.rate;

        // y bounded by x
        for (&(l, i, t, j), &y) in &vars.y {
            let x = vars.x[&(l, i, j)];
            model.add_constraint(
                format!("rel_yx_{l}_{i}_{t}_{j}_{rid}"),
                vec![(y, 1.0), (x, -1.0)],
                Sense::Le,
                0.0,
            );
        }
        // u bounded by z
        for (&(n, i, t), &u) in &vars.u {
            let z = vars.z[&(n, i)];
            model.add_constraint(
                format!("rel_uz_{n}_{i}_{t}_{rid}"),
                vec![(u, 1.0), (z, -1.0)],
                Sense::Le,
                0.0,
            );
        }
        // tree rates must cover the demand (of accepted services)
        {
            let mut terms: Vec<(usize, f64)> = vars.d.values().map(|&d| (d, 1.0)).collect();
            let rhs = if let Some(rho) = vars.rho {
                terms.push((rho, -r.rate));
                0.0
            } else {
                r.rate
            };
            model.add_constraint(format!("demand_{rid}"), terms, Sense::Ge, rhs);
        }
        // flow conservation per node, stage, destination and tree, with the
        // chain boundaries pinned to the source and the destination
        for n in 0..net.node_count() {
            for i in 0..stages {
                for &t in &r.destinations {
                    for j in 1..=trees {
                        let mut terms: Vec<(usize, f64)> = Vec::new();
                        for &l in net.adjacency().out_links(n) {
                            terms.push((vars.y[&(l, i, t, j)], 1.0));
                        }
                        for &l in net.adjacency().in_links(n) {
                            terms.push((vars.y[&(l, i, t, j)], -1.0));
                        }
                        // outflow - inflow = W_i(n) - W_{i+1}(n)
                        if i == 0 {
                            if n == r.source {
                                terms.push((vars.pi[&j], -1.0));
                            }
                        } else if let Some(&w) = vars.w.get(&(n, i, t, j)) {
                            terms.push((w, -1.0));
                        }
                        if i + 1 == stages {
                            if n == t {
                                terms.push((vars.pi[&j], 1.0));
                            }
                        } else if let Some(&w) = vars.w.get(&(n, i + 1, t, j)) {
                            terms.push((w, 1.0));
                        }
                        model.add_constraint(
                            format!("flow_{n}_{i}_{t}_{j}_{rid}"),
                            terms,
                            Sense::Eq,
                            0.0,
                        );
                    }
                }
            }
        }
        // deactivated trees carry nothing
        for (&(l, i, j), &x) in &vars.x {
            let pi = vars.pi[&j];
            model.add_constraint(
                format!("tree_x_{l}_{i}_{j}_{rid}"),
                vec![(x, 1.0), (pi, -1.0)],
                Sense::Le,
                0.0,
            );
        }
        for (&j, &d) in &vars.d {
            let pi = vars.pi[&j];
            model.add_constraint(
                format!("tree_d_{j}_{rid}"),
                vec![(d, 1.0), (pi, -big_m)],
                Sense::Le,
                0.0,
            );
        }
        // exactly one instance per chain position and destination
        for i in 1..=r.chain.len() {
            for &t in &r.destinations {
                let mut terms: Vec<(usize, f64)> =
                    nfv.iter().map(|&n| (vars.u[&(n, i, t)], 1.0)).collect();
                let rhs = if let Some(rho) = vars.rho {
                    terms.push((rho, -1.0));
                    0.0
                } else {
                    1.0
                };
                model.add_constraint(format!("assign_{i}_{t}_{rid}"), terms, Sense::Eq, rhs);
            }
        }
        // w = pi AND u, linearized
        for (&(n, i, t, j), &w) in &vars.w {
            let pi = vars.pi[&j];
            let u = vars.u[&(n, i, t)];
            model.add_constraint(
                format!("wlin_pi_{n}_{i}_{t}_{j}_{rid}"),
                vec![(w, 1.0), (pi, -1.0)],
                Sense::Le,
                0.0,
            );
            model.add_constraint(
                format!("wlin_u_{n}_{i}_{t}_{j}_{rid}"),
                vec![(w, 1.0), (u, -1.0)],
                Sense::Le,
                0.0,
            );
            model.add_constraint(
                format!("wlin_and_{n}_{i}_{t}_{j}_{rid}"),
                vec![(pi, 1.0), (u, 1.0), (w, -1.0)],
                Sense::Le,
                1.0,
            );
        }
        // gamma = x * d via big-M with M = the request rate
        for (&(l, i, j), &gamma) in &vars.gamma {
            let x = vars.x[&(l, i, j)];
            let d = vars.d[&j];
            model.add_constraint(
                format!("bigm_lo_{l}_{i}_{j}_{rid}"),
                vec![(d, 1.0), (gamma, -1.0), (x, big_m)],
                Sense::Le,
                big_m,
            );
            model.add_constraint(
                format!("bigm_hi_{l}_{i}_{j}_{rid}"),
                vec![(gamma, 1.0), (d, -1.0)],
                Sense::Le,
                0.0,
            );
            model.add_constraint(
                format!("bigm_x_{l}_{i}_{j}_{rid}"),
                vec![(gamma, 1.0), (x, -big_m)],
                Sense::Le,
                0.0,
            );
        }
        // admittability
        match config.admittability {
            AdmittabilityMode::ReducedInequality => {
                for (&(n, i), &z) in &vars.z {
                    if !net.node(n).admits(r.chain[i - 1].nf_type) {
                        model.add_constraint(
                            format!("adm_{n}_{i}_{rid}"),
                            vec![(z, 1.0)],
                            Sense::Le,
                            0.0,
                        );
                    }
                }
            }
            AdmittabilityMode::LinearizedInequality | AdmittabilityMode::Literal => {
                for (&(n, i), &gk) in &vars.gk {
                    let z = vars.z[&(n, i)];
                    let k = if net.node(n).admits(r.chain[i - 1].nf_type) { 1.0 } else { 0.0 };
                    model.add_constraint(
                        format!("admg_z_{n}_{i}_{rid}"),
                        vec![(gk, 1.0), (z, -1.0)],
                        Sense::Le,
                        0.0,
                    );
                    model.add_constraint(
                        format!("admg_k_{n}_{i}_{rid}"),
                        vec![(gk, 1.0)],
                        Sense::Le,
                        k,
                    );
                    model.add_constraint(
                        format!("admg_and_{n}_{i}_{rid}"),
                        vec![(z, 1.0), (gk, -1.0)],
                        Sense::Le,
                        1.0 - k,
                    );
                    if config.admittability == AdmittabilityMode::Literal {
                        model.add_constraint(
                            format!("adm_lit_{n}_{i}_{rid}"),
                            vec![(gk, 1.0)],
                            Sense::Eq,
                            1.0,
                        );
                    } else {
                        model.add_constraint(
                            format!("adm_{n}_{i}_{rid}"),
                            vec![(z, 1.0)],
                            Sense::Le,
                            k,
                        );
                    }
                }
            }
        }
        // rejected services release all their variables
        if let Some(rho) = vars.rho {
            for (&j, &pi) in &vars.pi {
                model.add_constraint(
                    format!("rej_pi_{j}_{rid}"),
                    vec![(pi, 1.0), (rho, -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
            for (&(n, i), &z) in &vars.z {
                model.add_constraint(
                    format!("rej_z_{n}_{i}_{rid}"),
                    vec![(z, 1.0), (rho, -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }

    // Shared node processing capacity.
    if requests.iter().any(|r| !r.chain.is_empty()) {
        for &n in &nfv {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for (r_idx, r) in requests.iter().enumerate() {
                for (&(zn, i), &z) in &catalog.per_request[r_idx].z {
                    if zn == n {
                        terms.push((z, r.chain[i - 1].processing_demand));
                    }
                }
            }
            model.add_constraint(format!("node_cap_{n}"), terms, Sense::Le, net.residual_node(n));
        }
    }
    // Shared link transmission capacity.
    for l in 0..net.link_count() {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for vars in &catalog.per_request {
            for (&(gl, _, _), &gamma) in &vars.gamma {
                if gl == l {
                    terms.push((gamma, 1.0));
                }
            }
        }
        model.add_constraint(format!("link_cap_{l}"), terms, Sense::Le, net.residual_link(l));
    }
    // Aggregate throughput bound.
    if let Some(r_star) = r_star {
        let terms: Vec<(usize, f64)> = requests
            .iter()
            .enumerate()
            .map(|(r_idx, _)| {
                (catalog.per_request[r_idx].rho.expect("rho exists"), throughputs[r_idx])
            })
            .collect();
        model.add_constraint("throughput_bound".into(), terms, Sense::Ge, r_star);
    }

    debug_assert!(model.check_invariants().is_ok());
    Ok(BuiltModel { model, catalog, problem, config: *config, r_star })
}

/// Closed-form constraint-family cardinalities for one request, used by the
/// structural audit.
pub fn expected_family_counts(
    net: &SubstrateNetwork,
    r: &ServiceRequest,
    config: &MilpConfig,
    with_rho: bool,
) -> Vec<(&'static str, usize)> {
    let links = net.link_count();
    let nodes = net.node_count();
    let nfv = net.nfv_nodes().count();
    let stages = r.chain.len() + 1;
    let chain = r.chain.len();
    let dests = r.destinations.len();
    let trees = r.max_trees;
    let not_admittable = net
        .nfv_nodes()
        .map(|n| r.chain.iter().filter(|nf| !n.admits(nf.nf_type)).count())
        .sum::<usize>();
    let mut counts = vec![
        ("rel_yx_", links * stages * dests * trees),
        ("rel_uz_", nfv * chain * dests),
        ("demand_", 1),
        ("flow_", nodes * stages * dests * trees),
        ("tree_x_", links * stages * trees),
        ("tree_d_", trees),
        ("assign_", chain * dests),
        ("wlin_pi_", nfv * chain * dests * trees),
        ("wlin_u_", nfv * chain * dests * trees),
        ("wlin_and_", nfv * chain * dests * trees),
        ("bigm_lo_", links * stages * trees),
        ("bigm_hi_", links * stages * trees),
        ("bigm_x_", links * stages * trees),
    ];
    match config.admittability {
        AdmittabilityMode::ReducedInequality => counts.push(("adm_", not_admittable)),
        AdmittabilityMode::LinearizedInequality => {
            counts.push(("admg_z_", nfv * chain));
            counts.push(("admg_k_", nfv * chain));
            counts.push(("admg_and_", nfv * chain));
            counts.push(("adm_", nfv * chain));
        }
        AdmittabilityMode::Literal => {
            counts.push(("admg_z_", nfv * chain));
            counts.push(("admg_k_", nfv * chain));
            counts.push(("admg_and_", nfv * chain));
            counts.push(("adm_lit_", nfv * chain));
        }
    }
    if with_rho {
        counts.push(("rej_pi_", trees));
        counts.push(("rej_z_", nfv * chain));
    }
    counts
}
