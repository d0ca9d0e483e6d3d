//! JSON messages exchanged with clients.
//!
//! Every stream event carries a [`FrameMessage`]; `v` is bumped on
//! incompatible changes.

use std::collections::BTreeMap;

use abm::gallery::{ControlSpec, GalleryModel, ParamDef};
use abm::probe::PlotSpec;
use abm::render::{DrawCell, DrawEntity, ViewOpts};
use abm::{Model, PropTable, Result};
use serde::{Deserialize, Serialize};

use crate::session::Status;

pub const WIRE_VERSION: u32 = 1;

/// One tick of one session, ready for client-side drawing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub v: u32,
    /// Increments on every reset; ticks restart from 0.
    pub epoch: u64,
    pub tick: u64,
    /// World box, origin bottom left, +y up.
    pub width: f64,
    pub height: f64,
    pub entities: Vec<DrawEntity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<DrawCell>,
    /// One point per plot series; `null` when undefined (no entities).
    pub plots: BTreeMap<String, Option<f64>>,
}

pub fn frame_message(model: &Model, plots: &[PlotSpec], epoch: u64, tick: u64) -> Result<FrameMessage> {
    let list = model.draw_list(tick, &ViewOpts::default())?;
    let mut points = BTreeMap::new();
    for p in plots {
        let v = p.evaluate(model, tick)?;
        points.insert(p.label.clone(), (!v.is_nan()).then_some(v));
    }
    Ok(FrameMessage {
        v: WIRE_VERSION,
        epoch,
        tick,
        width: list.width,
        height: list.height,
        entities: list.entities,
        edges: list.edges,
        cells: list.cells,
        plots: points,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelDescription {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamDef>,
    pub controls: Vec<ControlSpec>,
    pub plots: Vec<PlotSpec>,
    pub default_frames: u64,
}

impl ModelDescription {
    pub fn of(entry: &dyn GalleryModel) -> Self {
        let defaults = abm::gallery::resolve_params(entry, &Default::default(), abm::DEFAULT_SEED)
            .unwrap_or_else(|_| PropTable::new());
        ModelDescription {
            name: entry.name(),
            description: entry.description(),
            params: entry.params(),
            controls: entry.controls(),
            plots: entry.plots(&defaults),
            default_frames: entry.default_frames(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct CreateSession {
    pub model: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct RunRequest {
    /// Steps to advance; the model's frame budget when absent.
    #[serde(default)]
    pub frames: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: u64,
    pub model: String,
    pub seed: u64,
    pub epoch: u64,
    pub tick: u64,
    pub status: Status,
    pub frames_left: u64,
    /// Parameters the running model reads.
    pub params: PropTable,
    /// Parameters the next reset builds from; dynamic ones are also applied
    /// at the next step.
    pub staged: PropTable,
    /// Structural keys whose staged value differs from the live one.
    pub pending_reset: Vec<String>,
    pub controls: Vec<ControlSpec>,
    pub plots: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
}
