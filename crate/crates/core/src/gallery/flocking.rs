//! Boids in a periodic 2D box: separation, cohesion and alignment.

use std::f64::consts::PI;

use crate::agent::{create_agents, AgentKind};
use crate::error::{Error, Result};
use crate::gallery::{usize_param, ControlSpec, GalleryModel, NamedPredicate, ParamDef};
use crate::model::{create_model, AgentsType, Model, Space};
use crate::probe::{Condition, PlotSpec, Reducer, Selector};
use crate::record::{EntityClass, Recorded};
use crate::space::Periodicity;
use crate::value::{PropTable, PropValue, Vect};

pub struct Flocking;

/// Heading `θ` such that `(-sin θ, cos θ)` points along `v`; 0 for the zero
/// vector.
pub fn calculate_direction(v: Vect) -> f64 {
    if v.x() == 0.0 && v.y() == 0.0 {
        return 0.0;
    }
    (-v.x()).atan2(v.y())
}

/// Uniform positions, uniform headings, unit velocity along the heading.
pub fn flocking_init(model: &mut Model) -> Result<()> {
    let (xdim, ydim) = (model.size()[0] as f64, model.size()[1] as f64);
    for id in model.agent_ids() {
        let pos = Vect::new2(model.rand() * xdim, model.rand() * ydim);
        let orientation = model.rand() * 2.0 * PI;
        model
            .agent_mut(id)?
            .set("pos", pos)?
            .set("orientation", orientation)?
            .set("vel", Vect::new2(-orientation.sin(), orientation.cos()))?;
    }
    Ok(())
}

/// One sequential pass over the boids in id order.
pub fn flocking_step(model: &mut Model) -> Result<()> {
    let p = model.parameters();
    let dt = p.real("dt")?;
    let min_dis = p.real("min_dis")?;
    let aln_fac = p.real("aln_fac")?;
    let coh_fac = p.real("coh_fac")?;
    let sep_fac = p.real("sep_fac")?;
    let vis_range = p.real("vis_range")?;
    let ep = p.real("ep")?;
    for id in model.agent_ids() {
        let nbrs = model.euclidean_neighbors(id, vis_range)?;
        let space = model.spatial().ok_or(Error::NotSpatial("flocking_step"))?;
        let boid = model.agent(id)?;
        let pos = boid.pos()?;
        let mut vel = boid.vect("vel")?;
        let mut orientation = boid.real("orientation")?;
        let mut coh_force = Vect::zero(2);
        let mut sep_force = Vect::zero(2);
        let mut aln_force = Vect::zero(2);
        let mut num = 0usize;
        for nbr in nbrs {
            let nbr = model.agent(nbr)?;
            num += 1;
            let vec = space.displacement(pos, nbr.pos()?);
            if vec.veclength() < min_dis {
                sep_force -= vec;
            }
            coh_force += vec;
            aln_force += nbr.vect("vel")?;
        }
        if num > 0 {
            aln_force = (aln_force / num as f64 - vel) * aln_fac;
            coh_force *= coh_fac / num as f64;
            sep_force *= sep_fac;
            vel += (coh_force + sep_force) + aln_force;
            vel /= vel.veclength() + ep;
            orientation = calculate_direction(vel);
        }
        model
            .agent_mut(id)?
            .set("vel", vel)?
            .set("orientation", orientation)?
            .set("pos", pos + vel * dt)?;
    }
    Ok(())
}

/// `|Σ vel| / N` over the boids alive at `tick`.
pub fn polarization(rec: &impl Recorded, tick: u64) -> Result<f64> {
    let records = rec.records();
    records.check_tick(tick)?;
    let mut sum = Vect::zero(2);
    let mut n = 0usize;
    for v in records.views_at(EntityClass::Agents, tick) {
        sum += v.vect("vel")?;
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { sum.veclength() / n as f64 })
}

impl GalleryModel for Flocking {
    fn name(&self) -> &'static str {
        "flocking"
    }

    fn description(&self) -> &'static str {
        "2D boids in a periodic box (continuous agents)"
    }

    fn params(&self) -> Vec<ParamDef> {
        let real = |key, v: f64, doc| ParamDef {
            key,
            default: PropValue::Real(v),
            structural: false,
            doc,
        };
        let int = |key, v: i64, doc| ParamDef {
            key,
            default: PropValue::Int(v),
            structural: true,
            doc,
        };
        vec![
            real("min_dis", 0.3, "distance below which boids repel"),
            real("coh_fac", 0.05, "cohesion factor"),
            real("sep_fac", 0.5, "separation factor"),
            real("aln_fac", 0.35, "alignment factor"),
            real("vis_range", 2.0, "visual range"),
            real("dt", 0.1, "position update factor"),
            real("ep", 0.00001, "velocity normalisation regulariser"),
            int("n_boids", 200, "number of boids"),
            int("xdim", 10, "space width"),
            int("ydim", 10, "space height"),
        ]
    }

    fn validate(&self, p: &PropTable) -> Result<()> {
        for key in ["min_dis", "coh_fac", "sep_fac", "aln_fac", "vis_range", "dt", "ep"] {
            let v = p.real(key)?;
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidArgument(format!("`{key}` must be > 0")));
            }
        }
        if p.real("vis_range")? < p.real("min_dis")? {
            return Err(Error::InvalidArgument("`vis_range` must be >= `min_dis`".into()));
        }
        for key in ["n_boids", "xdim", "ydim"] {
            if usize_param(p, key)? == 0 {
                return Err(Error::InvalidArgument(format!("`{key}` must be positive")));
            }
        }
        Ok(())
    }

    fn build(&self, p: &PropTable) -> Result<Model> {
        self.validate(p)?;
        let defaults = PropTable::new()
            .with("shape", "arrow")
            .with("pos", Vect::new2(0.0, 0.0))
            .with("vel", Vect::new2(0.0, 0.0))
            .with("orientation", 0.0);
        let boids = create_agents(
            usize_param(p, "n_boids")?,
            AgentKind::Continuous2d,
            defaults,
            &["pos", "vel", "orientation"],
        )?;
        let space = Space::grid_2d([usize_param(p, "xdim")?, usize_param(p, "ydim")?], Periodicity::Periodic)?;
        create_model(boids, space, AgentsType::Static, p.clone())
    }

    fn init(&self, model: &mut Model) -> Result<()> {
        flocking_init(model)
    }

    fn step(&self, model: &mut Model) -> Result<()> {
        flocking_step(model)
    }

    fn default_steps(&self) -> u64 {
        500
    }

    fn default_frames(&self) -> u64 {
        400
    }

    fn controls(&self) -> Vec<ControlSpec> {
        vec![
            ControlSpec::slider("min_dis", 0.01, 0.1, 1.0),
            ControlSpec::slider("coh_fac", 0.01, 0.01, 1.0),
            ControlSpec::slider("sep_fac", 0.01, 0.01, 1.0),
            ControlSpec::slider("aln_fac", 0.01, 0.01, 1.0),
            ControlSpec::slider("vis_range", 0.5, 0.5, 4.0),
        ]
    }

    fn plots(&self, p: &PropTable) -> Vec<PlotSpec> {
        vec![PlotSpec {
            label: "boids to the left".into(),
            target: EntityClass::Agents,
            reducer: Reducer::FractionWhere {
                condition: left_half(p),
            },
        }]
    }

    fn predicates(&self, p: &PropTable) -> Vec<NamedPredicate> {
        vec![NamedPredicate {
            name: "left".into(),
            target: EntityClass::Agents,
            condition: left_half(p),
        }]
    }
}

fn left_half(p: &PropTable) -> Condition {
    let xdim = p.int("xdim").unwrap_or(10) as f64;
    Condition::Lt {
        select: Selector::component("pos", 0),
        value: xdim / 2.0,
    }
}
