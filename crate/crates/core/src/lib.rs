//! Heterogeneous agent-based modelling.
//!
//! Agents carry dynamically typed property tables and live in a 2D/3D space
//! (grid or continuous, with per-cell patches) or on a graph whose nodes and
//! edges carry properties of their own. A model is created from a list of
//! agents, initialised once, then advanced by a single step rule; selected
//! properties are recorded at every tick and can be turned into tables,
//! plots and animations afterwards.

pub mod agent;
pub mod config;
pub mod datacollect;
pub mod error;
pub mod gallery;
pub mod graph;
pub mod knn;
pub mod model;
pub mod probe;
pub mod record;
pub mod render;
pub mod rundir;
pub mod space;
pub mod value;

pub use agent::{create_agents, new_agent, Agent, AgentId, AgentKind};
pub use config::{AgentGroup, ModelSpec, SpaceSpec};
pub use error::{Error, Result};
pub use graph::{dynamic_simple_graph, import_graph, static_simple_graph, DynGraph, Mutability, NodeId};
pub use model::{create_model, AgentMut, AgentsType, Model, Space, SpaceInfo, DEFAULT_SEED};
pub use record::{EntityClass, EntityKey, EntityTape, EntityView, PropsToRecord, RecordStore, Recorded};
pub use render::{animate_sim, draw_list, render_frame, AnimOpts, DrawList, Projection, ViewOpts};
pub use space::{Periodicity, SpatialSpace};
pub use value::{veclength, Color, PropTable, PropType, PropValue, Vect};
