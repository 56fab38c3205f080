//! Mixed-integer models of the embedding problems as explicit
//! variable/constraint structures, exported as solver-ready LP text and
//! decodable from solver assignments back into [`EmbeddingSolution`]s.
//!
//! Three problems are built over the same variable families:
//! * single-service minimum-cost embedding,
//! * multi-service maximum aggregate throughput,
//! * multi-service minimum cost subject to a throughput bound.

mod build;
mod decode;
mod encode;
mod export;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{
    build_p1, build_p2, build_p3, expected_family_counts, AdmittabilityMode, BuiltModel,
    MilpConfig, Problem,
};
pub use decode::{decode_solution, parse_solution_file, DecodeError};
pub use encode::encode_assignment;
pub use export::export_lp;

use crate::service::ServiceRequest;
use crate::substrate::NetworkFile;
use crate::{LinkId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl std::fmt::Display for Sense {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Eq => write!(f, "="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// `(variable index, coefficient)`, one entry per variable.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A named MILP: variables with bounds, linear constraints, one objective.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub name: String,
    pub objective_sense: ObjectiveSense,
    pub objective: Vec<(usize, f64)>,
    variables: Vec<Variable>,
    index: HashMap<String, usize>,
    pub constraints: Vec<Constraint>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>, objective_sense: ObjectiveSense) -> Self {
        MilpModel {
            name: name.into(),
            objective_sense,
            objective: Vec::new(),
            variables: Vec::new(),
            index: HashMap::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_variable(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        assert!(!self.index.contains_key(&name), "duplicate variable {name}");
        if kind == VarKind::Binary {
            assert!((0.0..=1.0).contains(&lower) && (0.0..=1.0).contains(&upper));
        }
        let idx = self.variables.len();
        self.index.insert(name.clone(), idx);
        self.variables.push(Variable { name, kind, lower, upper });
        idx
    }

    /// Adds a constraint; duplicate variable references are merged.
    pub fn add_constraint(
        &mut self,
        name: String,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (var, coeff) in terms {
            assert!(var < self.variables.len(), "constraint {name} references unknown variable");
            *merged.entry(var).or_insert(0.0) += coeff;
        }
        self.constraints.push(Constraint {
            name,
            terms: merged.into_iter().collect(),
            sense,
            rhs,
        });
    }

    pub fn add_objective_term(&mut self, var: usize, coeff: f64) {
        assert!(var < self.variables.len());
        match self.objective.iter_mut().find(|(v, _)| *v == var) {
            Some((_, c)) => *c += coeff,
            None => self.objective.push((var, coeff)),
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, idx: usize) -> &Variable {
        &self.variables[idx]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn constraint_count_with_prefix(&self, prefix: &str) -> usize {
        self.constraints.iter().filter(|c| c.name.starts_with(prefix)).count()
    }

    /// Variable values from a name -> value map; absent names take the
    /// variable's lower bound.
    pub fn assignment_values(&self, assignment: &BTreeMap<String, f64>) -> Vec<f64> {
        self.variables
            .iter()
            .map(|v| assignment.get(&v.name).copied().unwrap_or(v.lower))
            .collect()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Names of constraints whose row is violated beyond `tol` at `values`,
    /// including variable bound rows.
    pub fn violated_rows(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (i, var) in self.variables.iter().enumerate() {
            if values[i] < var.lower - tol || values[i] > var.upper + tol {
                out.push(format!("bounds of {}", var.name));
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, coeff)| coeff * values[v]).sum();
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + tol,
                Sense::Ge => lhs >= c.rhs - tol,
                Sense::Eq => (lhs - c.rhs).abs() <= tol,
            };
            if !ok {
                out.push(c.name.clone());
            }
        }
        out
    }

    /// Structural invariants: unique names, binary bounds within `[0, 1]`,
    /// constraints referencing declared variables only.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.index.len() != self.variables.len() {
            return Err("variable index out of sync".into());
        }
        for v in &self.variables {
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(format!("binary {} has bounds outside [0, 1]", v.name));
            }
            if v.lower > v.upper {
                return Err(format!("variable {} has crossed bounds", v.name));
            }
        }
        for c in &self.constraints {
            for &(var, coeff) in &c.terms {
                if var >= self.variables.len() {
                    return Err(format!("constraint {} references unknown variable", c.name));
                }
                if !coeff.is_finite() {
                    return Err(format!("constraint {} has a non-finite coefficient", c.name));
                }
            }
        }
        Ok(())
    }
}

/// Per-request variable-family index maps. Tree indices are 1-based;
/// chain positions follow the segment convention (`x`/`y`/`gamma` run over
/// `0..=|chain|`, `z`/`u`/`w` over `1..=|chain|`).
#[derive(Debug, Clone, Default)]
pub struct RequestVars {
    pub request: usize,
    pub x: BTreeMap<(LinkId, usize, usize), usize>,
    pub y: BTreeMap<(LinkId, usize, NodeId, usize), usize>,
    pub z: BTreeMap<(NodeId, usize), usize>,
    pub u: BTreeMap<(NodeId, usize, NodeId), usize>,
    pub w: BTreeMap<(NodeId, usize, NodeId, usize), usize>,
    pub pi: BTreeMap<usize, usize>,
    pub rho: Option<usize>,
    pub d: BTreeMap<usize, usize>,
    pub gamma: BTreeMap<(LinkId, usize, usize), usize>,
    pub gk: BTreeMap<(NodeId, usize), usize>,
}

/// One entry per request, in input order.
#[derive(Debug, Clone, Default)]
pub struct VariableCatalog {
    pub per_request: Vec<RequestVars>,
}

/// Sidecar document written next to an exported model so a solver assignment
/// can be decoded later: the model is rebuilt deterministically from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MilpMeta {
    pub version: u32,
    pub problem: Problem,
    pub config: MilpConfig,
    pub r_star: Option<f64>,
    pub network: NetworkFile,
    pub requests: Vec<ServiceRequest>,
}

pub const MILP_META_VERSION: u32 = 1;
