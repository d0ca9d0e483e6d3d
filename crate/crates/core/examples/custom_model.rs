//! Sheep and grass: a Mortal population on a grid with recorded patches.
//!
//! Sheep walk, eat grass where they stand, breed when well fed and starve
//! otherwise. Grass regrows after a delay.
//!
//! ```text
//! cargo run -p abm --example custom_model
//! ```

use abm::datacollect::{get_nums_agents, get_patches_avg_props};
use abm::{
    create_agents, create_model, new_agent, AgentId, AgentKind, AgentsType, Color, EntityView, Model, Periodicity,
    PropTable, PropValue, PropsToRecord, Space, Vect,
};

const SIDE: usize = 30;

fn sheep(pos: Vect, energy: i64) -> abm::Result<abm::Agent> {
    new_agent(
        AgentId(0),
        AgentKind::Grid2d,
        PropTable::new()
            .with("pos", pos)
            .with("energy", energy)
            .with("color", Color::white()),
        &["pos", "energy"],
    )
}

fn random_cell(m: &mut Model) -> Vect {
    Vect::new2((m.rand_index(SIDE) + 1) as f64, (m.rand_index(SIDE) + 1) as f64)
}

fn step(m: &mut Model) -> abm::Result<()> {
    let regrow = m.parameters().int("regrow")?;
    for id in m.agent_ids() {
        let a = m.agent(id)?;
        let (pos, mut energy) = (a.pos()?, a.int("energy")? - 1);
        let to = pos + Vect::new2(m.rand_index(3) as f64 - 1.0, m.rand_index(3) as f64 - 1.0);
        m.agent_mut(id)?.set("pos", to)?;
        let to = m.agent(id)?.pos()?;
        let patch = m.patch_mut(to)?;
        if patch.int("grass")? == 1 {
            patch.set("grass", 0i64)?;
            patch.set("countdown", regrow)?;
            energy += 4;
        }
        if energy <= 0 {
            m.kill_agent(id)?;
        } else if energy > 8 {
            m.agent_mut(id)?.set("energy", energy / 2)?;
            m.add_agent(sheep(to, energy / 2)?)?;
        } else {
            m.agent_mut(id)?.set("energy", energy)?;
        }
    }
    for x in 1..=SIDE {
        for y in 1..=SIDE {
            let patch = m.patch_mut(Vect::new2(x as f64, y as f64))?;
            let c = patch.int("countdown")?;
            if c > 1 {
                patch.set("countdown", c - 1)?;
            } else if c == 1 {
                patch.set("countdown", 0i64)?;
                patch.set("grass", 1i64)?;
            }
        }
    }
    Ok(())
}

fn main() -> abm::Result<()> {
    let flock = create_agents(60, AgentKind::Grid2d, sheep(Vect::new2(1.0, 1.0), 5)?.props().clone(), &["pos", "energy"])?;
    let space = Space::grid_2d([SIDE, SIDE], Periodicity::Periodic)?;
    let params = PropTable::new().with("regrow", 12i64).with("seed", 3i64);
    let mut model = create_model(flock, space, AgentsType::Mortal, params)?;
    model.init_model(
        |m| {
            for id in m.agent_ids() {
                let cell = random_cell(m);
                m.set_agent_prop(id, "pos", cell)?;
            }
            for x in 1..=SIDE {
                for y in 1..=SIDE {
                    let grass = i64::from(m.rand() < 0.5);
                    let patch = m.patch_mut(Vect::new2(x as f64, y as f64))?;
                    patch.set("grass", grass)?;
                    patch.set("countdown", 0i64)?;
                }
            }
            Ok(())
        },
        PropsToRecord::patches(&["grass"]),
    )?;
    model.run_model(150, step)?;

    let all = |_: &EntityView<'_>| Ok(true);
    let hungry = |v: &EntityView<'_>| Ok(v.int("energy")? <= 2);
    let sheep = get_nums_agents(&model, &[&all, &hungry], &["sheep", "hungry"])?;
    let grass = |v: &EntityView<'_>| Ok(PropValue::Real(v.int("grass")? as f64));
    let cover = get_patches_avg_props(&model, &[&grass], &["grass"])?;

    let (n, h, g) = (
        sheep.f64_column("sheep").unwrap_or_default(),
        sheep.f64_column("hungry").unwrap_or_default(),
        cover.f64_column("grass").unwrap_or_default(),
    );
    for t in (0..=150).step_by(15) {
        println!("tick {t:3}  sheep {:4}  hungry {:4}  grass cover {:.2}", n[t], h[t], g[t]);
    }
    Ok(())
}
