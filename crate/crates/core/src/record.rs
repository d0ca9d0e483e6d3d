//! Per-entity, per-property time series captured after initialisation and
//! after every step.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentKind};
use crate::error::{Error, Result};
use crate::graph::{DynGraph, NodeId};
use crate::space::SpatialSpace;
use crate::value::{reserved, Color, PropTable, PropValue, Vect};

/// Which property keys to record for patches, nodes and edges. Agents carry
/// their own record set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropsToRecord {
    #[serde(default)]
    pub patches: Vec<String>,
    #[serde(default)]
    pub nodes: Vec<String>,
    #[serde(default)]
    pub edges: Vec<String>,
}

impl PropsToRecord {
    pub fn nodes(keys: &[&str]) -> Self {
        PropsToRecord {
            nodes: keys.iter().map(|k| k.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn patches(keys: &[&str]) -> Self {
        PropsToRecord {
            patches: keys.iter().map(|k| k.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn with_edges(mut self, keys: &[&str]) -> Self {
        self.edges = keys.iter().map(|k| k.to_string()).collect();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityClass {
    Agents,
    Patches,
    Nodes,
    Edges,
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityClass::Agents => "agents",
            EntityClass::Patches => "patches",
            EntityClass::Nodes => "nodes",
            EntityClass::Edges => "edges",
        })
    }
}

/// Identity of a recorded entity. Patches use their 1-based linear index
/// (x fastest).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EntityKey {
    Id(u64),
    Edge(NodeId, NodeId),
}

impl fmt::Display for EntityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityKey::Id(i) => write!(f, "{i}"),
            EntityKey::Edge(i, j) => write!(f, "{i}-{j}"),
        }
    }
}

/// Recorded history of one entity.
///
/// Index `t - start` holds the state at tick `t`. `present[k]` is false for
/// ticks at which the entity did not exist (a gap), in which case every
/// series holds `None` there. A `None` at a present tick is the missing
/// marker: the key was absent from the entity at snapshot time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityTape {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<AgentKind>,
    pub start: u64,
    pub present: Vec<bool>,
    pub series: BTreeMap<String, Vec<Option<PropValue>>>,
    /// Series keys in first-recorded order.
    #[serde(default)]
    pub order: Vec<String>,
    /// Unrecorded graphics properties as first seen, used for rendering.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub appearance: BTreeMap<String, PropValue>,
}

impl EntityTape {
    fn new(start: u64) -> Self {
        EntityTape {
            start,
            ..Default::default()
        }
    }

    fn capture<'k>(&mut self, tick: u64, keys: impl Iterator<Item = &'k str>, props: &PropTable) {
        let at = (tick - self.start) as usize;
        if self.present.is_empty() {
            for key in reserved::GRAPHICS {
                if let Some(v) = props.get(key) {
                    self.appearance.insert(key.to_string(), v.clone());
                }
            }
        }
        self.present.resize(at, false);
        self.present.push(true);
        for key in keys {
            self.appearance.remove(key);
            if !self.series.contains_key(key) {
                self.order.push(key.to_string());
            }
            let s = self.series.entry(key.to_string()).or_default();
            s.resize(at, None);
            s.push(props.get(key).cloned());
        }
    }

    /// Whether the entity existed at `tick`.
    pub fn covers(&self, tick: u64) -> bool {
        tick >= self.start
            && self
                .present
                .get((tick - self.start) as usize)
                .copied()
                .unwrap_or(false)
    }

    /// Last tick this tape covers.
    pub fn end(&self) -> u64 {
        self.start + self.present.len() as u64 - 1
    }

    pub fn keys_in_order(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn value(&self, key: &str, tick: u64) -> Option<&PropValue> {
        if tick < self.start {
            return None;
        }
        self.series.get(key)?.get((tick - self.start) as usize)?.as_ref()
    }
}

/// Read-only state of one entity at one tick.
#[derive(Clone, Copy, Debug)]
pub struct EntityView<'a> {
    pub key: EntityKey,
    pub tick: u64,
    pub tape: &'a EntityTape,
}

impl<'a> EntityView<'a> {
    pub fn id(&self) -> u64 {
        match self.key {
            EntityKey::Id(i) => i,
            EntityKey::Edge(i, _) => i,
        }
    }

    /// Recorded value of `key`. Unrecorded keys and missing markers are errors.
    pub fn get(&self, key: &str) -> Result<&'a PropValue> {
        self.tape
            .value(key, self.tick)
            .ok_or_else(|| Error::MissingProp(key.to_string()))
    }

    /// Recorded value, falling back to the first-seen appearance.
    pub fn get_or_appearance(&self, key: &str) -> Option<&'a PropValue> {
        self.tape.value(key, self.tick).or_else(|| self.tape.appearance.get(key))
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        v.as_real().ok_or_else(|| wrong(key, v, crate::value::PropType::Real))
    }

    pub fn int(&self, key: &str) -> Result<i64> {
        let v = self.get(key)?;
        v.as_int().ok_or_else(|| wrong(key, v, crate::value::PropType::Int))
    }

    pub fn vect(&self, key: &str) -> Result<Vect> {
        let v = self.get(key)?;
        v.as_vect().ok_or_else(|| wrong(key, v, crate::value::PropType::Vect))
    }

    pub fn label(&self, key: &str) -> Result<&'a str> {
        let v = self.get(key)?;
        v.as_label().ok_or_else(|| wrong(key, v, crate::value::PropType::Label))
    }

    pub fn color(&self, key: &str) -> Result<&'a Color> {
        let v = self.get(key)?;
        v.as_color().ok_or_else(|| wrong(key, v, crate::value::PropType::Color))
    }
}

fn wrong(key: &str, v: &PropValue, expected: crate::value::PropType) -> Error {
    Error::WrongType {
        key: key.to_string(),
        expected,
        found: v.prop_type(),
    }
}

/// Graph topology and node layout, captured whenever either changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyFrame {
    pub tick: u64,
    pub edges: Vec<(NodeId, NodeId)>,
    pub layout: BTreeMap<NodeId, Vect>,
}

/// All tapes of a model run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RecordStore {
    ticks: u64,
    agents: BTreeMap<u64, EntityTape>,
    patches: BTreeMap<u64, EntityTape>,
    nodes: BTreeMap<u64, EntityTape>,
    #[serde(with = "edge_map")]
    edges: BTreeMap<(NodeId, NodeId), EntityTape>,
    topology: Vec<TopologyFrame>,
    #[serde(skip)]
    graph_version: Option<u64>,
}

// `graph_version` is a capture cache, not recorded data.
impl PartialEq for RecordStore {
    fn eq(&self, other: &Self) -> bool {
        self.ticks == other.ticks
            && self.agents == other.agents
            && self.patches == other.patches
            && self.nodes == other.nodes
            && self.edges == other.edges
            && self.topology == other.topology
    }
}

mod edge_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        m: &BTreeMap<(NodeId, NodeId), EntityTape>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<(NodeId, NodeId), EntityTape>, D::Error> {
        let v: Vec<((NodeId, NodeId), EntityTape)> = Vec::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

impl RecordStore {
    pub(crate) fn clear(&mut self) {
        *self = RecordStore::default();
    }

    /// Number of snapshots taken; the last tick is `num_ticks() - 1`.
    pub fn num_ticks(&self) -> u64 {
        self.ticks
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.ticks.checked_sub(1)
    }

    pub fn check_tick(&self, tick: u64) -> Result<()> {
        match self.last_tick() {
            Some(last) if tick <= last => Ok(()),
            Some(last) => Err(Error::TickOutOfRange { tick, last }),
            None => Err(Error::NotInitialised),
        }
    }

    pub(crate) fn capture(
        &mut self,
        tick: u64,
        agents: &[Agent],
        spatial: Option<&SpatialSpace>,
        graph: Option<&DynGraph>,
        props: &PropsToRecord,
    ) {
        debug_assert_eq!(tick, self.ticks);
        for a in agents.iter().filter(|a| a.alive) {
            let tape = self.agents.entry(a.id.0).or_insert_with(|| EntityTape {
                kind: Some(a.kind),
                ..EntityTape::new(tick)
            });
            tape.capture(tick, a.record_keys.iter().map(String::as_str), &a.props);
        }
        if let Some(space) = spatial {
            if !props.patches.is_empty() {
                for (i, p) in space.patches().iter().enumerate() {
                    self.patches
                        .entry(i as u64 + 1)
                        .or_insert_with(|| EntityTape::new(tick))
                        .capture(tick, props.patches.iter().map(String::as_str), p);
                }
            }
        }
        if let Some(g) = graph {
            if !props.nodes.is_empty() {
                for (i, p) in g.nodes_with_props() {
                    self.nodes
                        .entry(i)
                        .or_insert_with(|| EntityTape::new(tick))
                        .capture(tick, props.nodes.iter().map(String::as_str), p);
                }
            }
            if !props.edges.is_empty() {
                for (k, p) in g.edges_with_props() {
                    self.edges
                        .entry(k)
                        .or_insert_with(|| EntityTape::new(tick))
                        .capture(tick, props.edges.iter().map(String::as_str), p);
                }
            }
            self.capture_topology(tick, g);
        }
        self.ticks = tick + 1;
    }

    fn capture_topology(&mut self, tick: u64, g: &DynGraph) {
        let layout: BTreeMap<NodeId, Vect> = g
            .nodes_with_props()
            .filter_map(|(i, p)| p.get(reserved::POS).and_then(|v| v.as_vect()).map(|v| (i, v)))
            .collect();
        let changed = match (self.graph_version, self.topology.last()) {
            (Some(v), Some(last)) => v != g.version() || last.layout != layout,
            _ => true,
        };
        if changed {
            self.topology.push(TopologyFrame {
                tick,
                edges: g.edges().collect(),
                layout,
            });
        }
        self.graph_version = Some(g.version());
    }

    fn class_map(&self, class: EntityClass) -> Box<dyn Iterator<Item = (EntityKey, &EntityTape)> + '_> {
        match class {
            EntityClass::Agents => Box::new(self.agents.iter().map(|(&i, t)| (EntityKey::Id(i), t))),
            EntityClass::Patches => Box::new(self.patches.iter().map(|(&i, t)| (EntityKey::Id(i), t))),
            EntityClass::Nodes => Box::new(self.nodes.iter().map(|(&i, t)| (EntityKey::Id(i), t))),
            EntityClass::Edges => {
                Box::new(self.edges.iter().map(|(&(i, j), t)| (EntityKey::Edge(i, j), t)))
            }
        }
    }

    /// All tapes of a class, ascending key.
    pub fn tapes(&self, class: EntityClass) -> impl Iterator<Item = (EntityKey, &EntityTape)> {
        self.class_map(class)
    }

    pub fn tape(&self, class: EntityClass, key: EntityKey) -> Option<&EntityTape> {
        match (class, key) {
            (EntityClass::Agents, EntityKey::Id(i)) => self.agents.get(&i),
            (EntityClass::Patches, EntityKey::Id(i)) => self.patches.get(&i),
            (EntityClass::Nodes, EntityKey::Id(i)) => self.nodes.get(&i),
            (EntityClass::Edges, EntityKey::Edge(i, j)) => self.edges.get(&crate::graph::edge_key(i, j)),
            _ => None,
        }
    }

    pub fn agent_tape(&self, id: u64) -> Option<&EntityTape> {
        self.agents.get(&id)
    }

    pub fn node_tape(&self, id: NodeId) -> Option<&EntityTape> {
        self.nodes.get(&id)
    }

    /// Entities of `class` that existed at `tick`, ascending key.
    pub fn views_at(&self, class: EntityClass, tick: u64) -> impl Iterator<Item = EntityView<'_>> {
        self.class_map(class)
            .filter(move |(_, t)| t.covers(tick))
            .map(move |(key, tape)| EntityView { key, tick, tape })
    }

    /// Latest topology frame at or before `tick`.
    pub fn topology_at(&self, tick: u64) -> Option<&TopologyFrame> {
        self.topology.iter().rev().find(|f| f.tick <= tick)
    }

    pub fn topology(&self) -> &[TopologyFrame] {
        &self.topology
    }
}

/// Anything that carries a record store (a live model or a stored run).
pub trait Recorded {
    fn records(&self) -> &RecordStore;
}

impl Recorded for RecordStore {
    fn records(&self) -> &RecordStore {
        self
    }
}
