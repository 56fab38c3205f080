//! Structural and round-trip tests of the mixed-integer models.

use std::collections::BTreeSet;

use mcembed::exact::{exact_single_path, ExactLimits};
use mcembed::milp::{
    build_p1, build_p2, build_p3, decode_solution, encode_assignment, expected_family_counts,
    export_lp, AdmittabilityMode, DecodeError, MilpConfig, Problem,
};
use mcembed::service::{NfSpec, ServiceRequest};
use mcembed::solution::validate_solution;
use mcembed::substrate::{LinkRecord, MeshParams, NetMeta, NodeKind, NodeRecord, SubstrateNetwork};
use mcembed::{NodeId, Rate};

fn mesh(w: usize, h: usize, nfv: usize, seed: u64) -> SubstrateNetwork {
    SubstrateNetwork::build_mesh(&MeshParams {
        width: w,
        height: h,
        nfv_count: nfv,
        cap_min: 0.5,
        cap_max: 2.0,
        nf_type_count: 2,
        admit_probability: 0.8,
        seed,
    })
    .unwrap()
}

fn request(
    id: usize,
    source: NodeId,
    dests: Vec<NodeId>,
    types: &[usize],
    rate: Rate,
    j: usize,
) -> ServiceRequest {
    let chain = types.iter().map(|&ty| NfSpec { nf_type: ty, processing_demand: rate }).collect();
    ServiceRequest::new(id, source, dests, chain, rate, j).unwrap()
}

#[test]
fn family_counts_match_their_closed_forms() {
    let cfg = MilpConfig::default();
    for seed in 0..10 {
        let net = mesh(2, 3, 2 + (seed % 2) as usize, seed);
        let r = request(0, 0, vec![4 + (seed % 2) as usize], &[0, 1], 0.3, 1 + (seed % 2) as usize);
        for problem in [Problem::P1, Problem::P2] {
            let built = match problem {
                Problem::P1 => build_p1(&net, &r, &cfg).unwrap(),
                _ => build_p2(&net, std::slice::from_ref(&r), &cfg).unwrap(),
            };
            let with_rho = problem != Problem::P1;
            for (prefix, expected) in expected_family_counts(&net, &r, &cfg, with_rho) {
                let got = built.model.constraint_count_with_prefix(prefix);
                assert_eq!(got, expected, "seed {seed}, {problem:?}, family {prefix}");
            }
            assert_eq!(built.model.constraint_count_with_prefix("node_cap_"), 2 + (seed % 2) as usize);
            assert_eq!(
                built.model.constraint_count_with_prefix("link_cap_"),
                net.link_count()
            );
        }
    }
}

#[test]
fn single_edge_instance_has_four_y_vs_x_rows() {
    let nodes = vec![
        NodeRecord {
            id: 0,
            kind: NodeKind::Switch,
            processing_capacity: 0.0,
            admittable_nf_types: BTreeSet::new(),
            coord: (0.0, 0.0),
        },
        NodeRecord {
            id: 1,
            kind: NodeKind::Nfv,
            processing_capacity: 1.0,
            admittable_nf_types: [0].into_iter().collect(),
            coord: (1.0, 0.0),
        },
    ];
    let links = vec![
        LinkRecord { id: 0, tail: 0, head: 1, capacity: 1.0 },
        LinkRecord { id: 1, tail: 1, head: 0, capacity: 1.0 },
    ];
    let net = SubstrateNetwork::from_parts(nodes, links, NetMeta::manual()).unwrap();
    let r = request(0, 0, vec![1], &[0], 0.2, 1);
    let built = build_p1(&net, &r, &MilpConfig::default()).unwrap();
    assert_eq!(built.model.constraint_count_with_prefix("rel_yx_"), 4);
}

#[test]
fn objective_prices_instances_by_relative_processing_load() {
    let net = mesh(2, 3, 3, 5);
    let r = request(0, 0, vec![5], &[0], 0.3, 1);
    let cfg = MilpConfig::default();
    let built = build_p1(&net, &r, &cfg).unwrap();
    for (&(n, i), &z) in &built.catalog.per_request[0].z {
        let coeff = built
            .model
            .objective
            .iter()
            .find(|(v, _)| *v == z)
            .map(|(_, c)| *c)
            .unwrap_or(0.0);
        let expected = cfg.beta * r.chain[i - 1].processing_demand / net.residual_node(n);
        assert!((coeff - expected).abs() < 1e-12, "z_{n}_{i}");
    }
}

#[test]
fn variable_names_follow_the_convention() {
    let net = mesh(2, 3, 2, 1);
    let r = request(0, 0, vec![5], &[0], 0.3, 2);
    let built = build_p1(&net, &r, &MilpConfig::default()).unwrap();
    assert!(built.model.var_index("x_3_0_1_0").is_some());
    assert!(built.model.var_index("x_3_0_2_0").is_some());
    assert!(built.model.var_index("d_1_0").is_some());
    assert!(built.model.var_index("g_0_1_1_0").is_some());
    let nfv0 = net.nfv_nodes().next().unwrap().id;
    assert!(built.model.var_index(&format!("z_{nfv0}_1_0")).is_some());
    assert!(built.model.var_index("rho_0").is_none());
    let p2 = build_p2(&net, std::slice::from_ref(&r), &MilpConfig::default()).unwrap();
    assert!(p2.model.var_index("rho_0").is_some());
}

#[test]
fn every_variable_family_is_constrained() {
    let net = mesh(2, 3, 2, 8);
    let r = request(0, 0, vec![4], &[0, 1], 0.3, 2);
    let built = build_p2(&net, std::slice::from_ref(&r), &MilpConfig::default()).unwrap();
    let mut referenced = vec![false; built.model.variables().len()];
    for c in &built.model.constraints {
        for &(v, _) in &c.terms {
            referenced[v] = true;
        }
    }
    for (idx, var) in built.model.variables().iter().enumerate() {
        assert!(referenced[idx], "{} appears in no constraint", var.name);
    }
}

#[test]
fn export_is_byte_identical_across_builds() {
    let net = mesh(2, 3, 2, 9);
    let r = request(0, 0, vec![4], &[0], 0.25, 1);
    let cfg = MilpConfig::default();
    let a = export_lp(&build_p1(&net, &r, &cfg).unwrap().model);
    let b = export_lp(&build_p1(&net, &r, &cfg).unwrap().model);
    assert_eq!(a, b);
    assert!(a.contains("Minimize"));
    assert!(a.contains("Subject To"));
    assert!(a.contains("Binaries"));
    // fixed endpoint instance choices appear as bound rows
    assert!(a.contains(" = 0\n"));
}

#[test]
fn oracle_solutions_are_feasible_model_points_and_decode_back() {
    let cfg = MilpConfig::default();
    let limits = ExactLimits::default();
    let mut round_trips = 0;
    for seed in 0..10 {
        let net = mesh(2, 3, 2, seed);
        let r = request(0, 0, vec![4, 5], &[0], 0.25, 1);
        let Ok((sol, cost)) = exact_single_path(&net, &r, cfg.alpha, cfg.beta, &limits) else {
            continue;
        };
        let built = build_p1(&net, &r, &cfg).unwrap();
        let assignment =
            encode_assignment(&built, &net, std::slice::from_ref(&r), &[sol.clone()]).unwrap();
        let values = built.model.assignment_values(&assignment);
        let violated = built.model.violated_rows(&values, 1e-6);
        assert!(violated.is_empty(), "seed {seed}: violated rows {violated:?}");
        assert!(
            (built.model.objective_value(&values) - cost).abs() < 1e-9,
            "seed {seed}: objective disagrees with the oracle cost"
        );

        let decoded =
            decode_solution(&built, &assignment, &net, std::slice::from_ref(&r)).unwrap();
        assert_eq!(decoded.len(), 1);
        validate_solution(&decoded[0], &net, &r).unwrap();
        assert!((decoded[0].total_cost - cost).abs() < 1e-9);
        round_trips += 1;
    }
    assert!(round_trips >= 5, "only {round_trips} instances round-tripped");
}

/// First seed whose 2x3 instance is solvable, with its network and solution.
fn solvable_instance() -> (SubstrateNetwork, ServiceRequest, mcembed::EmbeddingSolution) {
    for seed in 0..20 {
        let net = mesh(2, 3, 2, seed);
        let r = request(0, 0, vec![4], &[0], 0.25, 1);
        if let Ok((sol, _)) = exact_single_path(&net, &r, 0.6, 0.4, &ExactLimits::default()) {
            return (net, r, sol);
        }
    }
    panic!("no solvable instance in 20 seeds");
}

#[test]
fn decode_rejects_y_without_x() {
    let (net, r, sol) = solvable_instance();
    let built = build_p1(&net, &r, &MilpConfig::default()).unwrap();
    let mut assignment =
        encode_assignment(&built, &net, std::slice::from_ref(&r), &[sol]).unwrap();
    // clear one x that some y depends on
    let name = assignment
        .iter()
        .find(|(k, v)| k.starts_with("x_") && **v == 1.0)
        .map(|(k, _)| k.clone())
        .unwrap();
    assignment.insert(name, 0.0);
    let err = decode_solution(&built, &assignment, &net, std::slice::from_ref(&r)).unwrap_err();
    assert!(
        matches!(&err, DecodeError::Inconsistent(msg) if msg.contains("y exceeds x")),
        "{err}"
    );
}

#[test]
fn decode_rejects_non_integral_binaries() {
    let (net, r, sol) = solvable_instance();
    let built = build_p1(&net, &r, &MilpConfig::default()).unwrap();
    let mut assignment =
        encode_assignment(&built, &net, std::slice::from_ref(&r), &[sol]).unwrap();
    assignment.insert("pi_1_0".into(), 0.4);
    let err = decode_solution(&built, &assignment, &net, std::slice::from_ref(&r)).unwrap_err();
    assert!(matches!(err, DecodeError::NonIntegral { .. }), "{err}");
}

#[test]
fn all_zero_assignment_decodes_to_rejections() {
    let net = mesh(2, 3, 2, 4);
    let r = request(0, 0, vec![4], &[0], 0.25, 1);
    let built = build_p2(&net, std::slice::from_ref(&r), &MilpConfig::default()).unwrap();
    let assignment = std::collections::BTreeMap::new();
    let decoded = decode_solution(&built, &assignment, &net, std::slice::from_ref(&r)).unwrap();
    assert_eq!(decoded.len(), 1);
    assert!(decoded[0].is_empty());
    assert_eq!(decoded[0].total_cost, 0.0);
}

#[test]
fn ample_capacity_throughput_optimum_is_the_request_score() {
    // With one request the objective is R * rho <= R, and the encoded
    // acceptance point is feasible, so the optimum equals R exactly.
    let cfg = MilpConfig::default();
    let net = mesh(2, 3, 2, 6);
    let r = request(0, 0, vec![4], &[0], 0.2, 1);
    let (sol, _) = exact_single_path(&net, &r, cfg.alpha, cfg.beta, &ExactLimits::default())
        .expect("instance solvable");
    let built = build_p2(&net, std::slice::from_ref(&r), &cfg).unwrap();
    let assignment =
        encode_assignment(&built, &net, std::slice::from_ref(&r), &[sol]).unwrap();
    let values = built.model.assignment_values(&assignment);
    assert!(built.model.violated_rows(&values, 1e-6).is_empty());
    let score = mcembed::service::throughput(&r, cfg.a1, cfg.a2).unwrap();
    assert!((built.model.objective_value(&values) - score).abs() < 1e-9);
}

#[test]
fn throughput_bound_row_appears_exactly_once_with_score_coefficients() {
    let cfg = MilpConfig::default();
    let net = mesh(2, 3, 2, 7);
    let mut r2 = request(1, 1, vec![5], &[0], 0.2, 1);
    r2.id = 1;
    let requests = vec![request(0, 0, vec![4], &[0], 0.2, 1), r2];
    let built = build_p3(&net, &requests, &cfg, 3.0).unwrap();
    assert_eq!(built.model.constraint_count_with_prefix("throughput_bound"), 1);
    let row = built
        .model
        .constraints
        .iter()
        .find(|c| c.name == "throughput_bound")
        .unwrap();
    assert_eq!(row.rhs, 3.0);
    assert_eq!(row.terms.len(), 2);
    for (r_idx, r) in requests.iter().enumerate() {
        let rho = built.catalog.per_request[r_idx].rho.unwrap();
        let coeff = row.terms.iter().find(|(v, _)| *v == rho).map(|(_, c)| *c).unwrap();
        let score = mcembed::service::throughput(r, cfg.a1, cfg.a2).unwrap();
        assert!((coeff - score).abs() < 1e-12);
    }
}

#[test]
fn zero_bound_admits_the_empty_embedding() {
    let net = mesh(2, 3, 2, 7);
    let r = request(0, 0, vec![4], &[0], 0.2, 1);
    let built = build_p3(&net, std::slice::from_ref(&r), &MilpConfig::default(), 0.0).unwrap();
    // all-zero is feasible and costs nothing; the objective is non-negative,
    // so the optimum is the empty embedding
    let zeros = vec![0.0; built.model.variables().len()];
    assert!(built.model.violated_rows(&zeros, 1e-9).is_empty());
    assert_eq!(built.model.objective_value(&zeros), 0.0);
    assert!(built.model.objective.iter().all(|&(_, c)| c >= 0.0));
}

#[test]
fn admittability_modes_change_only_their_families() {
    let net = mesh(2, 3, 2, 2);
    let r = request(0, 0, vec![4], &[0, 1], 0.3, 1);
    for mode in [
        AdmittabilityMode::ReducedInequality,
        AdmittabilityMode::LinearizedInequality,
        AdmittabilityMode::Literal,
    ] {
        let cfg = MilpConfig { admittability: mode, ..MilpConfig::default() };
        let built = build_p1(&net, &r, &cfg).unwrap();
        for (prefix, expected) in expected_family_counts(&net, &r, &cfg, false) {
            assert_eq!(
                built.model.constraint_count_with_prefix(prefix),
                expected,
                "mode {mode:?}, family {prefix}"
            );
        }
        let has_gk = built.model.var_index(&format!(
            "gk_{}_1_0",
            net.nfv_nodes().next().unwrap().id
        ));
        assert_eq!(has_gk.is_some(), mode != AdmittabilityMode::ReducedInequality);
    }
}
