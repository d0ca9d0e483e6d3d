//! Models, their lifecycle (create, init, run) and per-step recording.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentId, AgentKind};
use crate::error::{Error, Result};
use crate::graph::{DynGraph, NodeId};
use crate::record::{PropsToRecord, RecordStore, Recorded};
use crate::space::{check_kind, Periodicity, SpatialSpace};
use crate::value::{reserved, PropTable, PropValue};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentsType {
    /// Fixed population.
    Static,
    /// Agents may be added and killed during the run.
    Mortal,
}

#[derive(Clone, Debug)]
pub enum Space {
    Spatial(SpatialSpace),
    Graph(DynGraph),
}

impl Space {
    pub fn grid_2d(size: [usize; 2], periodicity: Periodicity) -> Result<Space> {
        Ok(Space::Spatial(SpatialSpace::new(&size, periodicity)?))
    }

    pub fn grid_3d(size: [usize; 3], periodicity: Periodicity) -> Result<Space> {
        Ok(Space::Spatial(SpatialSpace::new(&size, periodicity)?))
    }

    pub fn graph(g: DynGraph) -> Space {
        Space::Graph(g)
    }
}

/// Static description of a model's space, enough to render stored tapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpaceInfo {
    Spatial {
        size: Vec<usize>,
        periodicity: Periodicity,
    },
    Graph {
        mutability: crate::graph::Mutability,
    },
}

#[derive(Clone, Debug)]
pub struct Model {
    agents: Vec<Agent>,
    space: Space,
    params: PropTable,
    tick: u64,
    agents_type: AgentsType,
    rng: ChaCha8Rng,
    records: RecordStore,
    props_to_record: PropsToRecord,
    initialised: bool,
    mixed_kinds: bool,
}

/// Builds a model at tick 0. Agents are re-numbered `1..=n` in list order.
///
/// The RNG seed is read from the `seed` parameter when present
/// (default [`DEFAULT_SEED`]).
pub fn create_model(
    agents: Vec<Agent>,
    space: Space,
    agents_type: AgentsType,
    params: PropTable,
) -> Result<Model> {
    let seed = match params.get("seed") {
        None => DEFAULT_SEED,
        Some(PropValue::Int(s)) if *s >= 0 => *s as u64,
        Some(other) => {
            return Err(Error::InvalidArgument(format!(
                "`seed` must be a non-negative int, got {other}"
            )))
        }
    };
    let mut model = Model {
        agents: Vec::with_capacity(agents.len()),
        space,
        params,
        tick: 0,
        agents_type,
        rng: ChaCha8Rng::seed_from_u64(seed),
        records: RecordStore::default(),
        props_to_record: PropsToRecord::default(),
        initialised: false,
        mixed_kinds: false,
    };
    for agent in agents {
        model.attach(agent)?;
    }
    Ok(model)
}

impl Model {
    fn attach(&mut self, mut agent: Agent) -> Result<AgentId> {
        let id = AgentId(self.agents.len() as u64 + 1);
        agent.id = id;
        agent.alive = true;
        match &mut self.space {
            Space::Spatial(space) => {
                check_kind(agent.kind, space.dim())?;
                let grid = agent.kind.is_grid();
                let pos = space.place(agent.pos()?, grid)?;
                agent.props.set(reserved::POS, pos)?;
                let cell = space.cell_of(pos, grid);
                agent.cell = Some(cell);
                space.insert(id, cell);
            }
            Space::Graph(_) => {
                if agent.kind != AgentKind::Graph {
                    return Err(Error::KindMismatch {
                        kind: agent.kind,
                        space: "graph",
                    });
                }
            }
        }
        if let Some(first) = self.agents.first() {
            if first.kind != agent.kind {
                self.mixed_kinds = true;
            }
        }
        self.agents.push(agent);
        Ok(id)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn agents_type(&self) -> AgentsType {
        self.agents_type
    }

    pub fn is_initialised(&self) -> bool {
        self.initialised
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn space_info(&self) -> SpaceInfo {
        match &self.space {
            Space::Spatial(s) => SpaceInfo::Spatial {
                size: s.size().to_vec(),
                periodicity: s.periodicity(),
            },
            Space::Graph(g) => SpaceInfo::Graph {
                mutability: g.mutability(),
            },
        }
    }

    pub fn spatial(&self) -> Option<&SpatialSpace> {
        match &self.space {
            Space::Spatial(s) => Some(s),
            Space::Graph(_) => None,
        }
    }

    pub(crate) fn spatial_mut(&mut self) -> Option<&mut SpatialSpace> {
        match &mut self.space {
            Space::Spatial(s) => Some(s),
            Space::Graph(_) => None,
        }
    }

    /// Space dimensions, e.g. `[xdim, ydim]` (empty for graph models).
    pub fn size(&self) -> &[usize] {
        self.spatial().map(SpatialSpace::size).unwrap_or(&[])
    }

    pub fn parameters(&self) -> &PropTable {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut PropTable {
        &mut self.params
    }

    pub fn param(&self, key: &str) -> Result<&PropValue> {
        self.params.get(key).ok_or_else(|| Error::MissingProp(key.to_string()))
    }

    pub fn props_to_record(&self) -> &PropsToRecord {
        &self.props_to_record
    }

    // ---- agents -------------------------------------------------------

    /// Live agents in id order.
    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(|a| a.alive)
    }

    /// Ids of live agents in id order. Step rules iterate over this list so
    /// they can mutate the model inside the loop.
    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.agents().map(|a| a.id).collect()
    }

    pub fn num_agents(&self) -> usize {
        self.agents().count()
    }

    /// Any agent ever attached, including dead ones.
    pub fn agent_any(&self, id: AgentId) -> Result<&Agent> {
        id.0.checked_sub(1)
            .and_then(|i| self.agents.get(i as usize))
            .ok_or(Error::UnknownAgent(id))
    }

    /// A live agent.
    pub fn agent(&self, id: AgentId) -> Result<&Agent> {
        let a = self.agent_any(id)?;
        if a.alive {
            Ok(a)
        } else {
            Err(Error::UnknownAgent(id))
        }
    }

    pub fn agent_mut(&mut self, id: AgentId) -> Result<AgentMut<'_>> {
        self.agent(id)?;
        Ok(AgentMut { model: self, id })
    }

    /// Writes a property of a live agent. Position writes are validated,
    /// wrapped and reflected in the occupancy index immediately.
    pub fn set_agent_prop(&mut self, id: AgentId, key: &str, value: impl Into<PropValue>) -> Result<()> {
        self.agent(id)?;
        let value = value.into();
        let idx = (id.0 - 1) as usize;
        if key == reserved::POS {
            if let Space::Spatial(space) = &mut self.space {
                let agent = &mut self.agents[idx];
                let grid = agent.kind.is_grid();
                let pos = value
                    .as_vect()
                    .ok_or_else(|| Error::WrongType {
                        key: key.to_string(),
                        expected: crate::value::PropType::Vect,
                        found: value.prop_type(),
                    })?;
                let pos = space.place(pos, grid)?;
                agent.props.set(key, pos)?;
                let cell = space.cell_of(pos, grid);
                if agent.cell != Some(cell) {
                    if let Some(old) = agent.cell {
                        space.remove(id, old);
                    }
                    space.insert(id, cell);
                    agent.cell = Some(cell);
                }
                return Ok(());
            }
        }
        self.agents[idx].props.set(key, value)
    }

    /// Adds an agent (Mortal models only). It gets a fresh id and is
    /// recorded from the next snapshot on.
    pub fn add_agent(&mut self, agent: Agent) -> Result<AgentId> {
        if self.agents_type != AgentsType::Mortal {
            return Err(Error::StaticModel("add_agent"));
        }
        self.attach(agent)
    }

    /// Marks an agent dead (Mortal models only). Its tape stops growing and
    /// it disappears from iteration and neighbour queries.
    pub fn kill_agent(&mut self, id: AgentId) -> Result<()> {
        if self.agents_type != AgentsType::Mortal {
            return Err(Error::StaticModel("kill_agent"));
        }
        self.agent(id)?;
        let idx = (id.0 - 1) as usize;
        let agent = &mut self.agents[idx];
        agent.alive = false;
        if let (Space::Spatial(space), Some(cell)) = (&mut self.space, agent.cell.take()) {
            space.remove(id, cell);
        }
        Ok(())
    }

    pub(crate) fn mixed_kinds(&self) -> bool {
        self.mixed_kinds
    }

    // ---- randomness ---------------------------------------------------

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Uniform in `[0, 1)`.
    pub fn rand(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform in `0..n`.
    pub fn rand_index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    // ---- graph --------------------------------------------------------

    pub fn graph(&self) -> Result<&DynGraph> {
        match &self.space {
            Space::Graph(g) => Ok(g),
            Space::Spatial(_) => Err(Error::NotGraph("graph")),
        }
    }

    pub fn graph_mut(&mut self) -> Result<&mut DynGraph> {
        match &mut self.space {
            Space::Graph(g) => Ok(g),
            Space::Spatial(_) => Err(Error::NotGraph("graph")),
        }
    }

    pub fn flush_graph(&mut self) -> Result<()> {
        self.graph_mut()?.flush()
    }

    pub fn add_nodes(&mut self, n: usize, defaults: &PropTable) -> Result<RangeInclusive<NodeId>> {
        self.graph_mut()?.add_nodes(n, defaults)
    }

    pub fn create_edge(&mut self, i: NodeId, j: NodeId) -> Result<bool> {
        self.graph_mut()?.create_edge(i, j)
    }

    pub fn neighbor_nodes(&self, i: NodeId) -> Result<Vec<NodeId>> {
        self.graph()?.neighbor_nodes(i)
    }

    // ---- lifecycle ----------------------------------------------------

    /// Runs `initialiser` once, resets the tick to 0 and captures the tick-0
    /// snapshot. On failure the model is restored to its pre-init state.
    pub fn init_model<F>(&mut self, initialiser: F, props_to_record: PropsToRecord) -> Result<()>
    where
        F: FnOnce(&mut Model) -> Result<()>,
    {
        let backup = self.clone();
        self.tick = 0;
        self.props_to_record = props_to_record;
        self.records.clear();
        if let Err(e) = initialiser(self) {
            *self = backup;
            return Err(Error::InitFailed(Box::new(e)));
        }
        self.initialised = true;
        self.snapshot();
        Ok(())
    }

    /// Applies `step_rule` `steps` times, recording after each application.
    ///
    /// If the rule fails at step `k`, the run stops, tapes hold ticks
    /// `0..k-1` and the error reports `k`.
    pub fn run_model<F>(&mut self, steps: u64, mut step_rule: F) -> Result<()>
    where
        F: FnMut(&mut Model) -> Result<()>,
    {
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        for _ in 0..steps {
            self.step(&mut step_rule)?;
        }
        Ok(())
    }

    /// One application of `step_rule` followed by a snapshot.
    pub fn step<F>(&mut self, mut step_rule: F) -> Result<()>
    where
        F: FnMut(&mut Model) -> Result<()>,
    {
        if !self.initialised {
            return Err(Error::NotInitialised);
        }
        let step = self.tick + 1;
        step_rule(self).map_err(|e| Error::StepFailed {
            step,
            source: Box::new(e),
        })?;
        self.tick = step;
        self.snapshot();
        Ok(())
    }

    fn snapshot(&mut self) {
        let (spatial, graph) = match &self.space {
            Space::Spatial(s) => (Some(s), None),
            Space::Graph(g) => (None, Some(g)),
        };
        self.records
            .capture(self.tick, &self.agents, spatial, graph, &self.props_to_record);
    }
}

impl Recorded for Model {
    fn records(&self) -> &RecordStore {
        &self.records
    }
}

/// Mutable handle to one live agent; position writes go through the model.
pub struct AgentMut<'m> {
    model: &'m mut Model,
    id: AgentId,
}

impl AgentMut<'_> {
    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn get(&self) -> &Agent {
        self.model.agent(self.id).expect("checked on creation")
    }

    pub fn set(&mut self, key: &str, value: impl Into<PropValue>) -> Result<&mut Self> {
        self.model.set_agent_prop(self.id, key, value)?;
        Ok(self)
    }
}
