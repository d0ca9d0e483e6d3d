use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::{reserved, PropTable, PropValue, Vect};

/// Agent identity, unique within a model and never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Continuous2d,
    Grid2d,
    Continuous3d,
    Grid3d,
    Graph,
}

impl AgentKind {
    /// Spatial dimension, or `None` for graph agents.
    pub fn dim(self) -> Option<usize> {
        match self {
            AgentKind::Continuous2d | AgentKind::Grid2d => Some(2),
            AgentKind::Continuous3d | AgentKind::Grid3d => Some(3),
            AgentKind::Graph => None,
        }
    }

    pub fn is_grid(self) -> bool {
        matches!(self, AgentKind::Grid2d | AgentKind::Grid3d)
    }
}

#[derive(Clone, Debug)]
pub struct Agent {
    pub(crate) id: AgentId,
    pub(crate) kind: AgentKind,
    pub(crate) props: PropTable,
    pub(crate) record_keys: Vec<String>,
    pub(crate) alive: bool,
    /// Linear index of the occupied patch, spatial models only.
    pub(crate) cell: Option<usize>,
}

impl Agent {
    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn props(&self) -> &PropTable {
        &self.props
    }

    pub fn record_keys(&self) -> &[String] {
        &self.record_keys
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    pub fn get(&self, key: &str) -> Option<&PropValue> {
        self.props.get(key)
    }

    pub fn pos(&self) -> Result<Vect> {
        self.props.vect(reserved::POS)
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        self.props.real(key)
    }

    pub fn vect(&self, key: &str) -> Result<Vect> {
        self.props.vect(key)
    }

    pub fn label(&self, key: &str) -> Result<&str> {
        self.props.label(key)
    }

    pub fn int(&self, key: &str) -> Result<i64> {
        self.props.int(key)
    }
}

/// Agents not yet attached to a model. Ids are assigned 1..n here and
/// re-assigned by the model if needed.
pub fn create_agents(
    n: usize,
    kind: AgentKind,
    defaults: PropTable,
    record_keys: &[&str],
) -> Result<Vec<Agent>> {
    let template = new_agent(AgentId(0), kind, defaults, record_keys)?;
    Ok((1..=n as u64)
        .map(|i| Agent {
            id: AgentId(i),
            ..template.clone()
        })
        .collect())
}

/// A single agent, typically for `Model::add_agent` in Mortal models.
pub fn new_agent(
    id: AgentId,
    kind: AgentKind,
    props: PropTable,
    record_keys: &[&str],
) -> Result<Agent> {
    if let Some(dim) = kind.dim() {
        let pos = props.vect(reserved::POS)?;
        if pos.dim() != dim {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} agents need a {dim}D `pos`, got {}D",
                pos.dim()
            )));
        }
        if kind.is_grid() && !pos.is_integral() {
            return Err(Error::NonIntegralGridPos(pos.as_slice().to_vec()));
        }
    }
    for key in record_keys {
        if !props.contains(key) {
            return Err(Error::MissingRecordKey(key.to_string()));
        }
    }
    let mut keys: Vec<String> = Vec::with_capacity(record_keys.len());
    for k in record_keys {
        if !keys.iter().any(|e| e == k) {
            keys.push(k.to_string());
        }
    }
    Ok(Agent {
        id,
        kind,
        props,
        record_keys: keys,
        alive: true,
        cell: None,
    })
}
