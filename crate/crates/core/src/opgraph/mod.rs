//! Operator DAGs over the twelve computational primitives.
//!
//! Each node carries a Lipschitz constant `L`, an a-priori error model
//! `eps <= C h^q` and a power-law cost model. From these the graph yields
//! amplification factors, the total error bound, a per-node resolution plan
//! meeting a target tolerance, and a work estimate.

mod families;
mod plan;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use families::{primitives_for_family, FamilyError, FAMILIES};
pub use plan::{Plan, PlanError, PlanNode, SchemeDescriptor, TimeScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Differentiate,
    Integrate,
    SolveLinear,
    Evaluate,
    Evolve,
    Transform,
    Project,
    Sample,
    Couple,
    Constrain,
    Discretize,
    Optimize,
}

impl Primitive {
    pub const ALL: [Primitive; 12] = [
        Primitive::Differentiate,
        Primitive::Integrate,
        Primitive::SolveLinear,
        Primitive::Evaluate,
        Primitive::Evolve,
        Primitive::Transform,
        Primitive::Project,
        Primitive::Sample,
        Primitive::Couple,
        Primitive::Constrain,
        Primitive::Discretize,
        Primitive::Optimize,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Primitive::Differentiate => "∂",
            Primitive::Integrate => "∫",
            Primitive::SolveLinear => "L",
            Primitive::Evaluate => "N",
            Primitive::Evolve => "E",
            Primitive::Transform => "F",
            Primitive::Project => "Π",
            Primitive::Sample => "S",
            Primitive::Couple => "K",
            Primitive::Constrain => "B",
            Primitive::Discretize => "G",
            Primitive::Optimize => "O",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Differentiate => "differentiate",
            Primitive::Integrate => "integrate",
            Primitive::SolveLinear => "solve_linear",
            Primitive::Evaluate => "evaluate",
            Primitive::Evolve => "evolve",
            Primitive::Transform => "transform",
            Primitive::Project => "project",
            Primitive::Sample => "sample",
            Primitive::Couple => "couple",
            Primitive::Constrain => "constrain",
            Primitive::Discretize => "discretize",
            Primitive::Optimize => "optimize",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown primitive `{0}`")]
pub struct UnknownPrimitive(pub String);

impl FromStr for Primitive {
    type Err = UnknownPrimitive;

    /// Accepts the name (`solve_linear`) or the symbol (`L`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Primitive::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(t) || p.symbol() == t)
            .ok_or_else(|| UnknownPrimitive(s.to_string()))
    }
}

impl<'de> Deserialize<'de> for Primitive {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Work model `a * h^(-w * dim)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub a: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DagNode {
    pub id: String,
    pub primitive: Primitive,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "C")]
    pub error_c: f64,
    #[serde(rename = "q")]
    pub error_order: f64,
    pub cost: CostModel,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge refers to unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph contains a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("graph must have exactly one sink, found {}", .0.join(", "))]
    MultipleSinks(Vec<String>),
    #[error("node `{id}`: {field} must be finite and > 0, got {value}")]
    InvalidNode { id: String, field: &'static str, value: f64 },
    #[error("node `{id}`: allocated error must be finite and >= 0, got {value}")]
    InvalidEpsilon { id: String, value: f64 },
    #[error("no allocated error given for node `{0}`")]
    MissingEpsilon(String),
    #[error("target tolerance must be finite and > 0, got {0}")]
    InvalidTarget(f64),
}

/// A validated operator DAG with a single sink.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorGraph {
    nodes: Vec<DagNode>,
    edges: Vec<(usize, usize)>,
    succ: Vec<Vec<usize>>,
    in_degree: Vec<usize>,
    topo: Vec<usize>,
}

impl OperatorGraph {
    pub fn nodes(&self) -> &[DagNode] {
        &self.nodes
    }

    /// Node count `D`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges
            .iter()
            .map(|&(a, b)| (self.nodes[a].id.as_str(), self.nodes[b].id.as_str()))
    }

    pub fn topological_order(&self) -> Vec<&str> {
        self.topo.iter().map(|&i| self.nodes[i].id.as_str()).collect()
    }

    pub fn sink(&self) -> &str {
        let i = *self.topo.last().expect("graphs are non-empty");
        &self.nodes[i].id
    }

    pub fn node(&self, id: &str) -> Option<&DagNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Ids of nodes reached along more than one incoming edge; for these the
    /// set-product amplification may understate a path-sum bound.
    pub fn multi_path_nodes(&self) -> Vec<String> {
        self.topo
            .iter()
            .filter(|&&i| self.in_degree[i] > 1)
            .map(|&i| self.nodes[i].id.clone())
            .collect()
    }

    /// Strict descendants of every node, indexed like `nodes()`.
    fn descendant_sets(&self) -> Vec<BTreeSet<usize>> {
        let mut desc = vec![BTreeSet::new(); self.nodes.len()];
        for &i in self.topo.iter().rev() {
            let mut set = BTreeSet::new();
            for &j in &self.succ[i] {
                set.insert(j);
                set.extend(desc[j].iter().copied());
            }
            desc[i] = set;
        }
        desc
    }

    fn amplification_vec(&self) -> Vec<f64> {
        self.descendant_sets()
            .iter()
            .map(|d| d.iter().map(|&j| self.nodes[j].lipschitz).product())
            .collect()
    }
}

fn check_positive(id: &str, field: &'static str, value: f64) -> Result<(), GraphError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GraphError::InvalidNode {
            id: id.to_string(),
            field,
            value,
        })
    }
}

/// Validates nodes and edges and fixes a deterministic topological order
/// (Kahn's algorithm, ties broken by declaration order).
pub fn build_graph(nodes: Vec<DagNode>, edges: &[(String, String)]) -> Result<OperatorGraph, GraphError> {
    if nodes.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut index = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if index.insert(n.id.as_str(), i).is_some() {
            return Err(GraphError::DuplicateNode(n.id.clone()));
        }
        check_positive(&n.id, "L", n.lipschitz)?;
        check_positive(&n.id, "C", n.error_c)?;
        check_positive(&n.id, "q", n.error_order)?;
        check_positive(&n.id, "cost.a", n.cost.a)?;
        if !n.cost.w.is_finite() || n.cost.w < 0.0 {
            return Err(GraphError::InvalidNode {
                id: n.id.clone(),
                field: "cost.w",
                value: n.cost.w,
            });
        }
    }
    let lookup = |id: &String| index.get(id.as_str()).copied().ok_or_else(|| GraphError::UnknownNode(id.clone()));
    let mut edge_idx = Vec::with_capacity(edges.len());
    for (a, b) in edges {
        let e = (lookup(a)?, lookup(b)?);
        if !edge_idx.contains(&e) {
            edge_idx.push(e);
        }
    }
    let n = nodes.len();
    let mut succ = vec![Vec::new(); n];
    let mut pred = vec![Vec::new(); n];
    for &(a, b) in &edge_idx {
        succ[a].push(b);
        pred[b].push(a);
    }
    for s in succ.iter_mut() {
        s.sort_unstable();
    }
    let in_degree: Vec<usize> = pred.iter().map(Vec::len).collect();

    let mut remaining = in_degree.clone();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| remaining[i] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        topo.push(i);
        for &j in &succ[i] {
            remaining[j] -= 1;
            if remaining[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if topo.len() < n {
        return Err(GraphError::Cycle(find_cycle(&nodes, &pred, &remaining)));
    }
    let sinks: Vec<String> = (0..n)
        .filter(|&i| succ[i].is_empty())
        .map(|i| nodes[i].id.clone())
        .collect();
    if sinks.len() != 1 {
        return Err(GraphError::MultipleSinks(sinks));
    }
    Ok(OperatorGraph {
        nodes,
        edges: edge_idx,
        succ,
        in_degree,
        topo,
    })
}

/// Every node left over by Kahn's algorithm has a leftover predecessor, so
/// walking predecessors must revisit a node; the revisited stretch is a cycle.
fn find_cycle(nodes: &[DagNode], pred: &[Vec<usize>], remaining: &[usize]) -> Vec<String> {
    let start = (0..nodes.len()).find(|&i| remaining[i] > 0).expect("a leftover node");
    let mut path = vec![start];
    let mut pos = BTreeMap::from([(start, 0usize)]);
    let mut cur = start;
    loop {
        let p = *pred[cur]
            .iter()
            .filter(|&&p| remaining[p] > 0)
            .min()
            .expect("leftover nodes have leftover predecessors");
        if let Some(&k) = pos.get(&p) {
            let mut cycle: Vec<String> = path[k..].iter().rev().map(|&i| nodes[i].id.clone()).collect();
            cycle.push(cycle[0].clone());
            return cycle;
        }
        pos.insert(p, path.len());
        path.push(p);
        cur = p;
    }
}

/// Amplification factor of each node: the product of `L` over its set of
/// strict descendants (each counted once). The sink has factor 1.
pub fn amplification_factors(g: &OperatorGraph) -> BTreeMap<String, f64> {
    g.nodes
        .iter()
        .zip(g.amplification_vec())
        .map(|(n, l)| (n.id.clone(), l))
        .collect()
}

/// Largest amplification factor over the graph.
pub fn dag_lipschitz(g: &OperatorGraph) -> f64 {
    g.amplification_vec().into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Compensated summation, so that the allocation identity holds to a few ulps
/// independently of summation order.
fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Total error bound `sum_i ell_i * eps_i` for per-node errors `eps`.
pub fn propagate_error(g: &OperatorGraph, eps: &BTreeMap<String, f64>) -> Result<f64, GraphError> {
    let ell = g.amplification_vec();
    let mut terms = Vec::with_capacity(g.len());
    for (n, l) in g.nodes.iter().zip(ell) {
        let e = *eps.get(&n.id).ok_or_else(|| GraphError::MissingEpsilon(n.id.clone()))?;
        if !e.is_finite() || e < 0.0 {
            return Err(GraphError::InvalidEpsilon {
                id: n.id.clone(),
                value: e,
            });
        }
        terms.push(l * e);
    }
    Ok(neumaier_sum(terms))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeBudget {
    #[serde(rename = "ell")]
    pub amplification: f64,
    pub eps: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub per_node: BTreeMap<String, NodeBudget>,
    pub total_bound: f64,
    pub target_eps: f64,
    pub dag_lipschitz: f64,
    /// Nodes with in-degree above one, reported because the set-product
    /// amplification is not proven to dominate path sums there.
    pub multi_path_nodes: Vec<String>,
}

/// Splits `target_eps` evenly over the amplified node errors and picks each
/// node's resolution from its error model: `eps_i = target / (D ell_i)`,
/// `h_i = (eps_i / C_i)^(1/q_i)`.
///
/// Rounding can leave the allocated sum a few ulps above the target; the
/// largest terms are then nudged down one ulp at a time so the allocation
/// never exceeds it.
pub fn select_resolutions(g: &OperatorGraph, target_eps: f64) -> Result<ErrorBudget, GraphError> {
    if !target_eps.is_finite() || target_eps <= 0.0 {
        return Err(GraphError::InvalidTarget(target_eps));
    }
    let ell = g.amplification_vec();
    let d = g.len() as f64;
    let mut eps: Vec<f64> = ell.iter().map(|&l| target_eps / (d * l)).collect();
    let total = |eps: &[f64]| neumaier_sum(ell.iter().zip(eps).map(|(l, e)| l * e));
    let mut sum = total(&eps);
    let mut guard = 0;
    while sum > target_eps && guard < 64 * eps.len() {
        let k = (0..eps.len())
            .max_by(|&a, &b| (ell[a] * eps[a]).total_cmp(&(ell[b] * eps[b])).then(b.cmp(&a)))
            .expect("non-empty graph");
        eps[k] = eps[k].next_down();
        sum = total(&eps);
        guard += 1;
    }
    let per_node = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let h = (eps[i] / n.error_c).powf(1.0 / n.error_order);
            (
                n.id.clone(),
                NodeBudget {
                    amplification: ell[i],
                    eps: eps[i],
                    h,
                },
            )
        })
        .collect();
    Ok(ErrorBudget {
        per_node,
        total_bound: sum,
        target_eps,
        dag_lipschitz: ell.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        multi_path_nodes: g.multi_path_nodes(),
    })
}

/// Work estimate `sum_i a_i h_i^(-w_i dim)`.
pub fn estimate_cost(budget: &ErrorBudget, g: &OperatorGraph, dim: u32) -> f64 {
    g.nodes
        .iter()
        .map(|n| {
            let h = budget.per_node.get(&n.id).map_or(1.0, |b| b.h);
            n.cost.a * h.powf(-n.cost.w * dim as f64)
        })
        .sum()
}
