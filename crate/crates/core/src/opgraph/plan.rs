//! Solver plan files: an operator DAG plus the scheme evidence the
//! well-posedness gate inspects.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_graph, CostModel, DagNode, GraphError, OperatorGraph, Primitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeScheme {
    #[serde(rename = "ftcs-explicit", alias = "ftcs", alias = "explicit", alias = "explicit-euler", alias = "forward-euler")]
    FtcsExplicit,
    #[serde(rename = "implicit-euler", alias = "implicit", alias = "backward-euler")]
    ImplicitEuler,
    #[serde(rename = "crank-nicolson", alias = "cn")]
    CrankNicolson,
    #[serde(rename = "bdf2", alias = "bdf")]
    Bdf2,
    #[serde(rename = "rk4-explicit", alias = "rk4")]
    Rk4Explicit,
    #[serde(rename = "lax-friedrichs", alias = "lf")]
    LaxFriedrichs,
    #[serde(rename = "direct-elliptic", alias = "direct", alias = "steady")]
    DirectElliptic,
}

impl TimeScheme {
    /// Conditionally stable schemes subject to step-size restrictions.
    pub fn is_explicit(self) -> bool {
        matches!(
            self,
            TimeScheme::FtcsExplicit | TimeScheme::Rk4Explicit | TimeScheme::LaxFriedrichs
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeScheme::FtcsExplicit => "ftcs-explicit",
            TimeScheme::ImplicitEuler => "implicit-euler",
            TimeScheme::CrankNicolson => "crank-nicolson",
            TimeScheme::Bdf2 => "bdf2",
            TimeScheme::Rk4Explicit => "rk4-explicit",
            TimeScheme::LaxFriedrichs => "lax-friedrichs",
            TimeScheme::DirectElliptic => "direct-elliptic",
        }
    }
}

impl fmt::Display for TimeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeDescriptor {
    pub time_scheme: TimeScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_number: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coercivity_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl SchemeDescriptor {
    pub fn new(time_scheme: TimeScheme) -> Self {
        SchemeDescriptor {
            time_scheme,
            dt: None,
            h: None,
            stiffness_ratio: None,
            condition_number: None,
            coercivity_constant: None,
            wave_speed: None,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanNode {
    pub id: String,
    pub primitive: Primitive,
    /// Absent Lipschitz constants are reported by the well-posedness gate.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(rename = "C")]
    pub error_c: f64,
    pub q: f64,
    pub cost: CostModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plan {
    pub nodes: Vec<PlanNode>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeDescriptor>,
    /// Spatial dimension for the cost model; defaults to the problem's domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<u32>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("plan is not valid JSON for the plan format: {0}")]
    Format(String),
    #[error("node `{0}` has no Lipschitz constant")]
    MissingLipschitz(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl Plan {
    pub fn from_json(text: &str) -> Result<Plan, PlanError> {
        serde_json::from_str(text).map_err(|e| PlanError::Format(e.to_string()))
    }

    /// Nodes whose Lipschitz constant is absent or not finite.
    pub fn nodes_without_lipschitz(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| !n.lipschitz.is_some_and(f64::is_finite))
            .map(|n| n.id.as_str())
            .collect()
    }

    pub fn graph(&self) -> Result<OperatorGraph, PlanError> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let l = n.lipschitz.ok_or_else(|| PlanError::MissingLipschitz(n.id.clone()))?;
            nodes.push(DagNode {
                id: n.id.clone(),
                primitive: n.primitive,
                lipschitz: l,
                error_c: n.error_c,
                error_order: n.q,
                cost: n.cost,
            });
        }
        Ok(build_graph(nodes, &self.edges)?)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        crate::canonical::digest_hex(self)
    }
}
