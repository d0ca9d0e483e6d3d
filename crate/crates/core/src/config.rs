//! Declarative JSON description of a model: agents, space, parameters, seed.
//!
//! ```json
//! {
//!   "agents": [
//!     { "count": 200, "kind": "continuous2d",
//!       "props": { "pos": { "vect": [0.0, 0.0] }, "shape": { "label": "arrow" } },
//!       "keeps_record_of": ["pos"] }
//!   ],
//!   "agents_type": "Static",
//!   "space": { "type": "spatial", "size": [10, 10], "periodicity": "Periodic" },
//!   "parameters": { "dt": { "real": 0.1 } },
//!   "seed": 42
//! }
//! ```
//!
//! Graph spaces use `{ "type": "graph", "mutability": "dynamic", "nodes": 3,
//! "edges": [[1, 2], [2, 3]], "node_props": {} }`. Property values use the
//! tagged [`PropValue`](crate::value::PropValue) encoding. The seed, when
//! present, overrides a `seed` entry in `parameters`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{create_agents, Agent, AgentKind};
use crate::error::{Error, Result};
use crate::graph::{dynamic_simple_graph, Mutability, NodeId};
use crate::model::{create_model, AgentsType, Model, Space};
use crate::space::Periodicity;
use crate::value::PropTable;

/// `count` agents sharing kind, initial properties and recorded keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentGroup {
    pub count: usize,
    pub kind: AgentKind,
    #[serde(default)]
    pub props: PropTable,
    #[serde(default)]
    pub keeps_record_of: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpaceSpec {
    Spatial {
        size: Vec<usize>,
        periodicity: Periodicity,
    },
    Graph {
        mutability: Mutability,
        #[serde(default)]
        nodes: usize,
        #[serde(default)]
        edges: Vec<(NodeId, NodeId)>,
        #[serde(default)]
        node_props: PropTable,
    },
}

fn static_agents() -> AgentsType {
    AgentsType::Static
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub agents: Vec<AgentGroup>,
    #[serde(default = "static_agents")]
    pub agents_type: AgentsType,
    pub space: SpaceSpec,
    #[serde(default)]
    pub parameters: PropTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelSpec {
    /// Creates the described (uninitialised) model.
    pub fn build(&self) -> Result<Model> {
        let mut agents = Vec::new();
        for g in &self.agents {
            let keys: Vec<&str> = g.keeps_record_of.iter().map(String::as_str).collect();
            agents.extend(create_agents(g.count, g.kind, g.props.clone(), &keys)?);
        }
        let space = match &self.space {
            SpaceSpec::Spatial { size, periodicity } => match size.len() {
                2 => Space::grid_2d([size[0], size[1]], *periodicity)?,
                3 => Space::grid_3d([size[0], size[1], size[2]], *periodicity)?,
                n => return Err(Error::InvalidArgument(format!("space size must have 2 or 3 entries, got {n}"))),
            },
            SpaceSpec::Graph {
                mutability,
                nodes,
                edges,
                node_props,
            } => {
                let mut g = dynamic_simple_graph(0);
                g.add_nodes(*nodes, node_props)?;
                for &(i, j) in edges {
                    g.create_edge(i, j)?;
                }
                g.set_mutability(*mutability);
                Space::graph(g)
            }
        };
        let mut params = self.parameters.clone();
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).map_err(|_| Error::InvalidArgument("seed too large".into()))?;
            params.set("seed", seed)?;
        }
        create_model(agents, space, self.agents_type, params)
    }

    /// Describes the current state of `model`. Consecutive agents with equal
    /// kind, properties and recorded keys share a group. Graphs must have
    /// node ids `1..=n` with identical node properties.
    pub fn from_model(model: &Model) -> Result<ModelSpec> {
        let mut agents: Vec<AgentGroup> = Vec::new();
        for a in model.agents() {
            match agents.last_mut() {
                Some(g) if same_group(g, a) => g.count += 1,
                _ => agents.push(AgentGroup {
                    count: 1,
                    kind: a.kind(),
                    props: a.props().clone(),
                    keeps_record_of: a.record_keys().to_vec(),
                }),
            }
        }
        let space = match model.space() {
            Space::Spatial(s) => SpaceSpec::Spatial {
                size: s.size().to_vec(),
                periodicity: s.periodicity(),
            },
            Space::Graph(g) => {
                let ids: Vec<NodeId> = g.node_ids().collect();
                if ids.iter().enumerate().any(|(k, &i)| i != k as u64 + 1) {
                    return Err(Error::InvalidArgument("graph node ids are not 1..=n".into()));
                }
                let node_props = match ids.first() {
                    Some(&i) => g.node_props(i)?.clone(),
                    None => PropTable::new(),
                };
                for &i in &ids {
                    if g.node_props(i)? != &node_props {
                        return Err(Error::InvalidArgument("graph nodes carry differing properties".into()));
                    }
                }
                SpaceSpec::Graph {
                    mutability: g.mutability(),
                    nodes: ids.len(),
                    edges: g.edges().collect(),
                    node_props,
                }
            }
        };
        let mut parameters = model.parameters().clone();
        let seed = parameters.remove("seed").and_then(|v| v.as_int()).map(|s| s as u64);
        Ok(ModelSpec {
            agents,
            agents_type: model.agents_type(),
            space,
            parameters,
            seed,
        })
    }

    pub fn from_json(text: &str) -> Result<ModelSpec> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<ModelSpec> {
        ModelSpec::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn same_group(g: &AgentGroup, a: &Agent) -> bool {
    g.kind == a.kind() && &g.props == a.props() && g.keeps_record_of == a.record_keys()
}
