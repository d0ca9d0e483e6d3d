//! Stored runs of gallery models.
//!
//! Layout of a run directory:
//!
//! ```text
//! manifest.json        model, seed, steps, every parameter, space
//! tapes/records.json   the full record store
//! tapes/<class>.csv    long-form tapes: tick, id, recorded keys
//! exports/plots.csv    the model's plot series per tick (+ plots.svg)
//! exports/<query>.csv  written by `export_query`
//! ```
//!
//! A run is reproducible from `manifest.json` alone, see [`replay`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datacollect::{self, export_table, Format, TableFrame};
use crate::error::{Error, Result};
use crate::gallery::{self, GalleryModel};
use crate::model::{Model, SpaceInfo};
use crate::record::{EntityClass, EntityView, RecordStore, Recorded};
use crate::render::{animate_sim, write_frames, AnimOpts};
use crate::value::{PropTable, PropValue};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    pub model: String,
    pub seed: u64,
    pub steps: u64,
    /// Every declared parameter, defaults included, and `seed`.
    pub params: PropTable,
    pub space: SpaceInfo,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.v != MANIFEST_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported manifest version {}", m.v)));
        }
        Ok(m)
    }
}

/// Resolves parameters, builds, initialises and runs a gallery model.
pub fn run_gallery(
    name: &str,
    overrides: &std::collections::BTreeMap<String, PropValue>,
    seed: u64,
    steps: u64,
) -> Result<(Manifest, Model)> {
    let entry = gallery::lookup(name)?;
    let params = gallery::resolve_params(entry, overrides, seed)?;
    let mut model = gallery::launch(entry, &params)?;
    model.run_model(steps, |m| entry.step(m))?;
    let manifest = Manifest {
        v: MANIFEST_VERSION,
        model: name.to_string(),
        seed: params.int("seed")? as u64,
        steps,
        params,
        space: model.space_info(),
    };
    Ok((manifest, model))
}

/// Re-runs a manifest from scratch.
pub fn replay(manifest: &Manifest) -> Result<Model> {
    let entry = gallery::lookup(&manifest.model)?;
    if manifest.params.int("seed")? != manifest.seed as i64 {
        return Err(Error::InvalidArgument("manifest seed and params.seed differ".into()));
    }
    entry.validate(&manifest.params)?;
    let mut model = gallery::launch(entry, &manifest.params)?;
    model.run_model(manifest.steps, |m| entry.step(m))?;
    Ok(model)
}

const CLASSES: [EntityClass; 4] = [EntityClass::Agents, EntityClass::Patches, EntityClass::Nodes, EntityClass::Edges];

/// Writes manifest, tapes and plot exports into `dir` (created if needed).
pub fn write_run(dir: &Path, manifest: &Manifest, rec: &impl Recorded) -> Result<()> {
    let records = rec.records();
    std::fs::create_dir_all(dir.join("tapes"))?;
    std::fs::create_dir_all(dir.join("exports"))?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    std::fs::write(dir.join("tapes/records.json"), serde_json::to_string(records)?)?;
    for class in CLASSES {
        if records.tapes(class).next().is_some() {
            let t = datacollect::class_table(records, class)?;
            export_table(&t, Format::Csv, &dir.join(format!("tapes/{class}.csv")))?;
        }
    }
    let entry = gallery::lookup(&manifest.model)?;
    let plots = datacollect::plot_table(records, &entry.plots(&manifest.params))?;
    export_table(&plots, Format::Csv, &dir.join("exports/plots.csv"))?;
    datacollect::plot_lines(&plots, &dir.join("exports/plots.svg"))?;
    Ok(())
}

pub fn load_records(dir: &Path) -> Result<RecordStore> {
    let text = std::fs::read_to_string(dir.join("tapes/records.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// A named table query over a stored run.
#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    Agent(u64),
    Node(u64),
    /// Mean of one agent property per tick.
    Avg(String),
    /// Mean of one node property per tick.
    NodesAvg(String),
    /// Per-tick counts for the model's named predicates.
    Counts(Vec<String>),
}

impl Query {
    /// `agent:ID`, `node:ID`, `avg:KEY`, `nodes-avg:KEY`, `counts:NAME[,NAME..]`.
    pub fn parse(s: &str) -> Result<Query> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("query `{s}` is not of the form kind:arg")))?;
        let id = || {
            arg.parse::<u64>()
                .map_err(|_| Error::InvalidArgument(format!("`{arg}` is not an id")))
        };
        match kind {
            "agent" => Ok(Query::Agent(id()?)),
            "node" => Ok(Query::Node(id()?)),
            "avg" => Ok(Query::Avg(arg.to_string())),
            "nodes-avg" => Ok(Query::NodesAvg(arg.to_string())),
            "counts" => Ok(Query::Counts(arg.split(',').map(|n| n.trim().to_string()).collect())),
            _ => Err(Error::InvalidArgument(format!(
                "unknown query kind `{kind}` (agent, node, avg, nodes-avg, counts)"
            ))),
        }
    }

    fn file_stem(&self) -> String {
        match self {
            Query::Agent(i) => format!("agent_{i}"),
            Query::Node(i) => format!("node_{i}"),
            Query::Avg(k) => format!("avg_{k}"),
            Query::NodesAvg(k) => format!("nodes-avg_{k}"),
            Query::Counts(names) => format!("counts_{}", names.join("_")),
        }
    }
}

/// Evaluates a query against stored tapes.
pub fn evaluate_query(manifest: &Manifest, rec: &impl Recorded, query: &Query) -> Result<TableFrame> {
    let records = rec.records();
    match query {
        Query::Agent(i) => datacollect::get_agent_data(records, crate::agent::AgentId(*i)),
        Query::Node(i) => datacollect::get_node_data(records, *i),
        Query::Avg(k) | Query::NodesAvg(k) => {
            let class = if matches!(query, Query::Avg(_)) {
                EntityClass::Agents
            } else {
                EntityClass::Nodes
            };
            let f = |v: &EntityView<'_>| v.get(k).cloned();
            datacollect::avg_props(records, class, &[&f], &[k.as_str()])
        }
        Query::Counts(names) => {
            let entry: &dyn GalleryModel = gallery::lookup(&manifest.model)?;
            let all = entry.predicates(&manifest.params);
            let mut chosen = Vec::new();
            for n in names {
                let p = all.iter().find(|p| &p.name == n).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "no predicate `{n}` for {} (available: {})",
                        manifest.model,
                        all.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(", ")
                    ))
                })?;
                chosen.push(p);
            }
            let class = chosen.first().map(|p| p.target).unwrap_or(EntityClass::Agents);
            if chosen.iter().any(|p| p.target != class) {
                return Err(Error::InvalidArgument("predicates target different entity classes".into()));
            }
            let preds: Vec<BoxedPredicate<'_>> = chosen
                .iter()
                .map(|p| Box::new(move |v: &EntityView<'_>| p.condition.eval(v)) as Box<_>)
                .collect();
            let refs: Vec<datacollect::Predicate<'_>> = preds.iter().map(|b| b.as_ref()).collect();
            let labels: Vec<&str> = chosen.iter().map(|p| p.name.as_str()).collect();
            datacollect::nums(records, class, &refs, &labels)
        }
    }
}

/// Runs `query` on the run in `dir` and writes `exports/<query>.<ext>`.
pub fn export_query(dir: &Path, query: &Query, format: Format) -> Result<PathBuf> {
    let manifest = Manifest::load(dir)?;
    let records = load_records(dir)?;
    let frame = evaluate_query(&manifest, &records, query)?;
    std::fs::create_dir_all(dir.join("exports"))?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = dir.join("exports").join(format!("{}.{ext}", query.file_stem()));
    export_table(&frame, format, &path)?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnimFormat {
    Gif,
    /// `frames/NNNNN.svg`
    Frames,
}

/// Renders the stored run in `dir`; returns the output path and frame count.
pub fn animate_run(dir: &Path, format: AnimFormat, opts: &AnimOpts) -> Result<(PathBuf, u64)> {
    let manifest = Manifest::load(dir)?;
    let records = load_records(dir)?;
    match format {
        AnimFormat::Gif => {
            let path = dir.join("anim.gif");
            let n = animate_sim(&records, &manifest.space, &path, opts)?;
            Ok((path, n))
        }
        AnimFormat::Frames => {
            let path = dir.join("frames");
            let n = write_frames(&records, &manifest.space, &path, &opts.view)?.len() as u64;
            Ok((path, n))
        }
    }
}

type BoxedPredicate<'a> = Box<dyn Fn(&EntityView<'_>) -> Result<bool> + 'a>;
