//! An infection spreading over an imported edge list.
//!
//! ```text
//! cargo run -p abm --example graph_import
//! ```

use abm::datacollect::get_nums_nodes;
use abm::{create_model, import_graph, AgentsType, EntityView, Mutability, PropTable, PropsToRecord, Space};

// two rings of six joined by a bridge
const EDGES: &str = "\
# i j
1 2
2 3
3 4
4 5
5 6
6 1
7 8
8 9
9 10
10 11
11 12
12 7
3 9
";

fn main() -> abm::Result<()> {
    let graph = import_graph(EDGES, None, Mutability::Static)?;
    println!("{} nodes, {} edges", graph.num_nodes(), graph.num_edges());
    let params = PropTable::new().with("p_infect", 0.3).with("p_recover", 0.1).with("seed", 5i64);
    let mut model = create_model(vec![], Space::graph(graph), AgentsType::Static, params)?;
    model.init_model(
        |m| {
            let ids: Vec<u64> = m.graph()?.node_ids().collect();
            for i in ids {
                m.graph_mut()?.node_props_mut(i)?.set("state", if i == 1 { "I" } else { "S" })?;
            }
            Ok(())
        },
        PropsToRecord::nodes(&["state"]),
    )?;
    model.run_model(40, |m| {
        let (p_inf, p_rec) = (m.parameters().real("p_infect")?, m.parameters().real("p_recover")?);
        let ids: Vec<u64> = m.graph()?.node_ids().collect();
        let before: Vec<String> = ids
            .iter()
            .map(|&i| m.graph().and_then(|g| Ok(g.node_props(i)?.label("state")?.to_string())))
            .collect::<abm::Result<_>>()?;
        for (k, &i) in ids.iter().enumerate() {
            let next = match before[k].as_str() {
                "S" => {
                    let sick = m.neighbor_nodes(i)?.iter().filter(|&&j| before[j as usize - 1] == "I").count();
                    if m.rand() < 1.0 - (1.0 - p_inf).powi(sick as i32) { "I" } else { "S" }
                }
                "I" if m.rand() < p_rec => "R",
                s => s,
            };
            m.graph_mut()?.node_props_mut(i)?.set("state", next)?;
        }
        Ok(())
    })?;

    let is = |s: &'static str| move |v: &EntityView<'_>| Ok(v.label("state")? == s);
    let (s, i, r) = (is("S"), is("I"), is("R"));
    let t = get_nums_nodes(&model, &[&s, &i, &r], &["S", "I", "R"])?;
    print!("{}", t.to_csv());
    Ok(())
}
