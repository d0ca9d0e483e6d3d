//! Magnetisation of the kNN-graph Ising model across temperatures.
//!
//! ```text
//! cargo run -p abm --example ising -- [steps]
//! ```

use std::collections::BTreeMap;

use abm::datacollect::get_nodes_avg_props;
use abm::rundir::run_gallery;
use abm::{EntityView, PropValue};

fn main() -> abm::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let spin = |v: &EntityView<'_>| Ok(PropValue::Real(v.int("spin")? as f64));
    println!("{:>6}  {:>8}  {:>8}", "temp", "|m(0)|", format!("|m({steps})|"));
    for temp in [0.1, 0.5, 1.0, 2.0, 3.5, 5.0, 50.0] {
        let overrides = BTreeMap::from([("temp".to_string(), PropValue::Real(temp))]);
        let mut m_end = Vec::new();
        let mut m_start = Vec::new();
        for seed in 1..=3 {
            let (_, model) = run_gallery("ising", &overrides, seed, steps)?;
            let m = get_nodes_avg_props(&model, &[&spin], &["m"])?.f64_column("m").unwrap_or_default();
            m_start.push(m[0].abs());
            m_end.push(m[steps as usize].abs());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!("{temp:6.2}  {:8.3}  {:8.3}", mean(&m_start), mean(&m_end));
    }
    Ok(())
}
