//! A model described in JSON, built, run and described back.
//!
//! ```text
//! cargo run -p abm --example model_spec
//! ```

use abm::{ModelSpec, PropsToRecord, Vect};

const SPEC: &str = r#"{
  "agents": [
    { "count": 25, "kind": "continuous2d",
      "props": { "pos": { "vect": [5.0, 5.0] }, "color": { "color": "red" } },
      "keeps_record_of": ["pos"] }
  ],
  "space": { "type": "spatial", "size": [10, 10], "periodicity": "NPeriodic" },
  "parameters": { "step_len": { "real": 0.4 } },
  "seed": 12
}"#;

fn main() -> abm::Result<()> {
    let spec = ModelSpec::from_json(SPEC)?;
    let mut model = spec.build()?;
    model.init_model(|_| Ok(()), PropsToRecord::default())?;
    model.run_model(100, |m| {
        let len = m.parameters().real("step_len")?;
        for id in m.agent_ids() {
            let a = m.rand() * std::f64::consts::TAU;
            let p = m.agent(id)?.pos()? + Vect::new2(a.cos(), a.sin()) * len;
            m.agent_mut(id)?.set("pos", p)?;
        }
        Ok(())
    })?;
    let spread: f64 = model
        .agents()
        .map(|a| a.pos().map(|p| (p.x() - 5.0).hypot(p.y() - 5.0)))
        .sum::<abm::Result<f64>>()?
        / model.num_agents() as f64;
    println!("mean distance from the start after 100 steps: {spread:.3}");
    // each agent now differs, so the description has one group per agent
    let now = ModelSpec::from_model(&model)?;
    let path = std::env::temp_dir().join("model_spec.json");
    now.save(&path)?;
    assert_eq!(ModelSpec::load(&path)?, now);
    println!("{} agent groups written to {}", now.agents.len(), path.display());
    Ok(())
}
