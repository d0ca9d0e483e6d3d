//! Stores a run on disk, then queries and exports tables from it.
//!
//! ```text
//! cargo run -p abm --example data_export -- [dir]
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use abm::datacollect::{export_table, get_agent_data, Format, TableFrame};
use abm::rundir::{export_query, load_records, run_gallery, write_run, Query};

fn main() -> abm::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("abm-export"));
    let (manifest, model) = run_gallery("schelling3d", &BTreeMap::new(), 11, 60)?;
    write_run(&dir, &manifest, &model)?;
    println!("run stored in {}", dir.display());

    for q in ["counts:happy,sad", "agent:17"] {
        let path = export_query(&dir, &Query::parse(q)?, Format::Csv)?;
        println!("{q:18} -> {}", path.display());
    }

    // the stored tapes answer the same questions as the live model
    let stored = load_records(&dir)?;
    let live = get_agent_data(&model, abm::AgentId(17))?;
    let replayed = get_agent_data(&stored, abm::AgentId(17))?;
    assert_eq!(live, replayed);

    let json = dir.join("exports/agent_17.json");
    export_table(&replayed, Format::Json, &json)?;
    let back = TableFrame::from_json(&std::fs::read_to_string(&json)?)?;
    println!("agent 17: {} rows, columns {:?}, json round trip equal: {}", back.num_rows(), back.column_names(), back == live);
    Ok(())
}
