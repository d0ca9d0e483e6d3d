//! Boids built from the engine primitives rather than the gallery entry.
//!
//! ```text
//! cargo run -p abm --example flocking -- [steps] [out.gif]
//! ```

use std::f64::consts::PI;

use abm::gallery::{flocking_step, polarization};
use abm::{create_agents, create_model, AgentKind, AgentsType, Periodicity, PropTable, PropsToRecord, Space, Vect};

fn main() -> abm::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let out = args.next().unwrap_or_else(|| std::env::temp_dir().join("flocking.gif").display().to_string());

    let boids = create_agents(
        200,
        AgentKind::Continuous2d,
        PropTable::new()
            .with("shape", "arrow")
            .with("pos", Vect::new2(0.0, 0.0))
            .with("vel", Vect::new2(0.0, 0.0))
            .with("orientation", 0.0),
        &["pos", "vel", "orientation"],
    )?;
    let params = PropTable::new()
        .with("min_dis", 0.3)
        .with("coh_fac", 0.05)
        .with("sep_fac", 0.5)
        .with("aln_fac", 0.35)
        .with("vis_range", 2.0)
        .with("dt", 0.1)
        .with("ep", 1e-5)
        .with("seed", 7i64);
    let mut model = create_model(boids, Space::grid_2d([10, 10], Periodicity::Periodic)?, AgentsType::Static, params)?;

    model.init_model(
        |m| {
            for id in m.agent_ids() {
                let pos = Vect::new2(m.rand() * 10.0, m.rand() * 10.0);
                let heading = m.rand() * 2.0 * PI;
                m.agent_mut(id)?
                    .set("pos", pos)?
                    .set("orientation", heading)?
                    .set("vel", Vect::new2(-heading.sin(), heading.cos()))?;
            }
            Ok(())
        },
        PropsToRecord::default(),
    )?;
    model.run_model(steps, flocking_step)?;

    for t in (0..=steps).step_by((steps as usize / 10).max(1)) {
        println!("tick {t:4}  polarisation {:.3}", polarization(&model, t)?);
    }
    let frames = model.animate_sim(out.as_ref(), 20)?;
    println!("{frames} frames -> {out}");
    Ok(())
}
