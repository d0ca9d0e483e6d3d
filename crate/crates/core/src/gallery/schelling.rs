//! Two-colour segregation on a non-periodic 3D grid.

use std::collections::HashMap;

use crate::agent::{create_agents, AgentId, AgentKind};
use crate::error::{Error, Result};
use crate::gallery::{usize_param, ControlSpec, GalleryModel, NamedPredicate, ParamDef};
use crate::model::{create_model, AgentsType, Model, Space};
use crate::probe::{Condition, PlotSpec, Reducer};
use crate::record::{EntityClass, Recorded};
use crate::space::Periodicity;
use crate::value::{Color, PropTable, PropValue, Vect};

pub struct Schelling3d;

fn same_colour_neighbours(model: &Model, id: AgentId) -> Result<usize> {
    let colour = model.agent(id)?.get("color");
    let mut n = 0;
    for nbr in model.grid_neighbors(id, 1)? {
        if model.agent(nbr)?.get("color") == colour {
            n += 1;
        }
    }
    Ok(n)
}

pub fn schelling_init(model: &mut Model) -> Result<()> {
    let colours = [
        Color::named(model.parameters().label("color_a")?)?,
        Color::named(model.parameters().label("color_b")?)?,
    ];
    for id in model.agent_ids() {
        let colour = colours[model.rand_index(2)].clone();
        model.set_agent_prop(id, "color", colour)?;
        let cell = model.random_empty_patch()?;
        model.set_agent_prop(id, "pos", cell)?;
    }
    let min_alike = usize_param(model.parameters(), "min_alike")?;
    for id in model.agent_ids() {
        if same_colour_neighbours(model, id)? < min_alike {
            model.set_agent_prop(id, "mood", PropValue::label("sad"))?;
        }
    }
    Ok(())
}

/// Unhappy agents jump to a random empty cell, in id order; later agents
/// see earlier moves.
pub fn schelling_step(model: &mut Model) -> Result<()> {
    let min_alike = usize_param(model.parameters(), "min_alike")?;
    for id in model.agent_ids() {
        if same_colour_neighbours(model, id)? >= min_alike {
            model.set_agent_prop(id, "mood", PropValue::label("happy"))?;
        } else {
            model.set_agent_prop(id, "mood", PropValue::label("sad"))?;
            let cell = model.random_empty_patch()?;
            model.set_agent_prop(id, "pos", cell)?;
        }
    }
    Ok(())
}

/// Mean over agents with at least one neighbour of the share of
/// same-colour agents among their 26 surrounding cells, from the recorded
/// positions at `tick`.
pub fn like_neighbor_fraction(rec: &impl Recorded, tick: u64) -> Result<f64> {
    let records = rec.records();
    records.check_tick(tick)?;
    let mut cells: HashMap<[i64; 3], &PropValue> = HashMap::new();
    let mut agents = Vec::new();
    for v in records.views_at(EntityClass::Agents, tick) {
        let p = v.vect("pos")?;
        let key = [p.x() as i64, p.y() as i64, p.z() as i64];
        let colour = v
            .get_or_appearance("color")
            .ok_or_else(|| Error::MissingProp("color".into()))?;
        cells.insert(key, colour);
        agents.push((key, colour));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for (c, colour) in agents {
        let (mut same, mut all) = (0usize, 0usize);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if (dx, dy, dz) == (0, 0, 0) {
                        continue;
                    }
                    if let Some(other) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        all += 1;
                        if *other == colour {
                            same += 1;
                        }
                    }
                }
            }
        }
        if all > 0 {
            total += same as f64 / all as f64;
            counted += 1;
        }
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

impl GalleryModel for Schelling3d {
    fn name(&self) -> &'static str {
        "schelling3d"
    }

    fn description(&self) -> &'static str {
        "Schelling segregation on a 3D grid (grid agents)"
    }

    fn params(&self) -> Vec<ParamDef> {
        vec![
            ParamDef {
                key: "min_alike",
                default: PropValue::Int(8),
                structural: false,
                doc: "same-colour neighbours needed to be happy (0..26)",
            },
            ParamDef {
                key: "n_agents",
                default: PropValue::Int(200),
                structural: true,
                doc: "number of agents",
            },
            ParamDef {
                key: "xdim",
                default: PropValue::Int(7),
                structural: true,
                doc: "grid size along x",
            },
            ParamDef {
                key: "ydim",
                default: PropValue::Int(7),
                structural: true,
                doc: "grid size along y",
            },
            ParamDef {
                key: "zdim",
                default: PropValue::Int(7),
                structural: true,
                doc: "grid size along z",
            },
            ParamDef {
                key: "color_a",
                default: PropValue::label("red"),
                structural: true,
                doc: "first colour",
            },
            ParamDef {
                key: "color_b",
                default: PropValue::label("green"),
                structural: true,
                doc: "second colour",
            },
        ]
    }

    fn validate(&self, p: &PropTable) -> Result<()> {
        let min_alike = p.int("min_alike")?;
        if !(0..=26).contains(&min_alike) {
            return Err(Error::InvalidArgument(format!("`min_alike` must be in 0..=26, got {min_alike}")));
        }
        let cells = usize_param(p, "xdim")? * usize_param(p, "ydim")? * usize_param(p, "zdim")?;
        let n = usize_param(p, "n_agents")?;
        if n >= cells {
            return Err(Error::InvalidArgument(format!(
                "`n_agents` ({n}) must be below the number of cells ({cells})"
            )));
        }
        let (a, b) = (Color::named(p.label("color_a")?)?, Color::named(p.label("color_b")?)?);
        if a == b {
            return Err(Error::InvalidArgument("`color_a` and `color_b` must differ".into()));
        }
        Ok(())
    }

    fn build(&self, p: &PropTable) -> Result<Model> {
        self.validate(p)?;
        let defaults = PropTable::new()
            .with("pos", Vect::new3(1.0, 1.0, 1.0))
            .with("color", Color::named("red")?)
            .with("mood", PropValue::label("happy"));
        let agents = create_agents(usize_param(p, "n_agents")?, AgentKind::Grid3d, defaults, &["pos", "mood"])?;
        let size = [usize_param(p, "xdim")?, usize_param(p, "ydim")?, usize_param(p, "zdim")?];
        create_model(agents, Space::grid_3d(size, Periodicity::NPeriodic)?, AgentsType::Static, p.clone())
    }

    fn init(&self, model: &mut Model) -> Result<()> {
        schelling_init(model)
    }

    fn step(&self, model: &mut Model) -> Result<()> {
        schelling_step(model)
    }

    fn default_steps(&self) -> u64 {
        200
    }

    fn default_frames(&self) -> u64 {
        200
    }

    fn controls(&self) -> Vec<ControlSpec> {
        vec![ControlSpec::int_slider("min_alike", 1, 12)]
    }

    fn plots(&self, _: &PropTable) -> Vec<PlotSpec> {
        ["happy", "sad"]
            .into_iter()
            .map(|mood| PlotSpec {
                label: mood.into(),
                target: EntityClass::Agents,
                reducer: Reducer::FractionWhere {
                    condition: Condition::eq("mood", PropValue::label(mood)),
                },
            })
            .collect()
    }

    fn predicates(&self, _: &PropTable) -> Vec<NamedPredicate> {
        ["happy", "sad"]
            .into_iter()
            .map(|mood| NamedPredicate {
                name: mood.into(),
                target: EntityClass::Agents,
                condition: Condition::eq("mood", PropValue::label(mood)),
            })
            .collect()
    }
}
