//! Metropolis dynamics of Ising spins living on the nodes of a k-nearest
//! neighbour geometric graph. The model has no agents.

use crate::error::{Error, Result};
use crate::gallery::{usize_param, ControlSpec, GalleryModel, NamedPredicate, ParamDef};
use crate::graph::{dynamic_simple_graph, NodeId};
use crate::knn::KdTree;
use crate::model::{create_model, AgentsType, Model, Space};
use crate::probe::{Condition, PlotSpec, Reducer, Selector};
use crate::record::{EntityClass, PropsToRecord, Recorded};
use crate::value::{Color, PropTable, PropValue, Vect};

pub struct Ising;

/// Undirected edges joining every point to its `k - 1` nearest other points
/// (`k` counts the point itself). Pairs are 0-based, `i < j`, ascending and
/// deduplicated.
pub fn knn_geometric_graph(points: &[[f64; 2]], k: usize) -> Vec<(usize, usize)> {
    let tree = KdTree::new(points.to_vec());
    let mut edges = std::collections::BTreeSet::new();
    for (i, p) in points.iter().enumerate() {
        for (j, _) in tree.knn(p, k) {
            if j != i {
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    edges.into_iter().collect()
}

fn spin(model: &Model, node: NodeId) -> Result<i64> {
    model.graph()?.node_props(node)?.int("spin")
}

/// Energy change of flipping `node`: `2 * coupl * s_i * Σ s_j` over its
/// neighbours.
pub fn ising_delta_e(model: &Model, node: NodeId) -> Result<f64> {
    let g = model.graph()?;
    let s = spin(model, node)?;
    let mut de = 0.0;
    for j in g.neighbors_iter(node)? {
        de += (s * g.node_props(j)?.int("spin")?) as f64;
    }
    Ok(2.0 * model.parameters().real("coupl")? * de)
}

pub fn ising_init(model: &mut Model) -> Result<()> {
    let n = usize_param(model.parameters(), "n")?;
    let nns = usize_param(model.parameters(), "nns")?;
    let points: Vec<[f64; 2]> = (0..n).map(|_| [model.rand(), model.rand()]).collect();
    model.flush_graph()?;
    let defaults = PropTable::new().with("color", Color::black()).with("spin", 1i64);
    let ids = model.add_nodes(n, &defaults)?;
    let first = *ids.start();
    let edges = knn_geometric_graph(&points, nns);
    for (i, j) in edges {
        model.create_edge(first + i as u64, first + j as u64)?;
    }
    for (i, p) in points.iter().enumerate() {
        let up = model.rand() < 0.5;
        let props = model.graph_mut()?.node_props_mut(first + i as u64)?;
        props.set("pos", Vect::new2(p[0], p[1]))?;
        if up {
            props.set("spin", 1i64)?;
            props.set("color", Color::black())?;
        } else {
            props.set("spin", -1i64)?;
            props.set("color", Color::white())?;
        }
    }
    Ok(())
}

/// `flips_per_step` single-spin Metropolis proposals at uniformly chosen
/// nodes.
pub fn ising_step(model: &mut Model) -> Result<()> {
    let flips = usize_param(model.parameters(), "flips_per_step")?;
    let temp = model.parameters().real("temp")?;
    let ids: Vec<NodeId> = model.graph()?.node_ids().collect();
    if ids.is_empty() {
        return Ok(());
    }
    for _ in 0..flips {
        let node = ids[model.rand_index(ids.len())];
        let s = spin(model, node)?;
        let de = ising_delta_e(model, node)?;
        if de < 0.0 || model.rand() < (-de / temp).exp() {
            let props = model.graph_mut()?.node_props_mut(node)?;
            props.set("spin", -s)?;
            props.set("color", if s == -1 { Color::black() } else { Color::white() })?;
        }
    }
    Ok(())
}

/// Mean recorded spin at `tick`.
pub fn magnetisation(rec: &impl Recorded, tick: u64) -> Result<f64> {
    let records = rec.records();
    records.check_tick(tick)?;
    let (mut sum, mut n) = (0i64, 0usize);
    for v in records.views_at(EntityClass::Nodes, tick) {
        sum += v.int("spin")?;
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { sum as f64 / n as f64 })
}

impl GalleryModel for Ising {
    fn name(&self) -> &'static str {
        "ising"
    }

    fn description(&self) -> &'static str {
        "Ising spins on a k-nearest-neighbour graph (graph space, no agents)"
    }

    fn params(&self) -> Vec<ParamDef> {
        vec![
            ParamDef {
                key: "temp",
                default: PropValue::Real(2.0),
                structural: false,
                doc: "temperature",
            },
            ParamDef {
                key: "coupl",
                default: PropValue::Real(2.5),
                structural: false,
                doc: "coupling constant",
            },
            ParamDef {
                key: "nns",
                default: PropValue::Int(5),
                structural: true,
                doc: "nearest nodes per node, counting the node itself",
            },
            ParamDef {
                key: "n",
                default: PropValue::Int(500),
                structural: true,
                doc: "number of nodes",
            },
            ParamDef {
                key: "flips_per_step",
                default: PropValue::Int(100),
                structural: false,
                doc: "Metropolis proposals per step",
            },
        ]
    }

    fn validate(&self, p: &PropTable) -> Result<()> {
        let temp = p.real("temp")?;
        if temp.is_nan() || temp <= 0.0 {
            return Err(Error::InvalidArgument(format!("`temp` must be > 0, got {temp}")));
        }
        if !p.real("coupl")?.is_finite() {
            return Err(Error::InvalidArgument("`coupl` must be finite".into()));
        }
        let nns = usize_param(p, "nns")?;
        if nns < 2 {
            return Err(Error::InvalidArgument(format!("`nns` must be at least 2, got {nns}")));
        }
        let n = usize_param(p, "n")?;
        if n < nns {
            return Err(Error::InvalidArgument(format!("`n` ({n}) must be at least `nns` ({nns})")));
        }
        usize_param(p, "flips_per_step")?;
        Ok(())
    }

    fn build(&self, p: &PropTable) -> Result<Model> {
        self.validate(p)?;
        create_model(Vec::new(), Space::graph(dynamic_simple_graph(0)), AgentsType::Static, p.clone())
    }

    fn props_to_record(&self) -> PropsToRecord {
        PropsToRecord::nodes(&["color", "spin"])
    }

    fn init(&self, model: &mut Model) -> Result<()> {
        ising_init(model)
    }

    fn step(&self, model: &mut Model) -> Result<()> {
        ising_step(model)
    }

    fn default_steps(&self) -> u64 {
        100
    }

    fn default_frames(&self) -> u64 {
        100
    }

    fn controls(&self) -> Vec<ControlSpec> {
        vec![
            ControlSpec::slider("temp", 0.05, 0.05, 5.0),
            ControlSpec::slider("coupl", 0.01, 0.1, 5.0),
            ControlSpec::int_slider("nns", 2, 10),
        ]
    }

    fn plots(&self, _: &PropTable) -> Vec<PlotSpec> {
        vec![PlotSpec {
            label: "magnetisation".into(),
            target: EntityClass::Nodes,
            reducer: Reducer::MeanOf {
                select: Selector::new("spin"),
            },
        }]
    }

    fn predicates(&self, _: &PropTable) -> Vec<NamedPredicate> {
        vec![
            NamedPredicate {
                name: "up".into(),
                target: EntityClass::Nodes,
                condition: Condition::eq("spin", 1i64),
            },
            NamedPredicate {
                name: "down".into(),
                target: EntityClass::Nodes,
                condition: Condition::eq("spin", -1i64),
            },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{launch, resolve_params};
    use std::collections::BTreeMap;

    #[test]
    fn hand_sum_example() {
        let params = resolve_params(&Ising, &BTreeMap::new(), 1).unwrap();
        let mut m = create_model(Vec::new(), Space::graph(dynamic_simple_graph(0)), AgentsType::Static, params)
            .unwrap();
        m.add_nodes(4, &PropTable::new().with("spin", 1i64)).unwrap();
        for j in 2..=4 {
            m.create_edge(1, j).unwrap();
        }
        m.graph_mut().unwrap().node_props_mut(4).unwrap().set("spin", -1i64).unwrap();
        assert_eq!(ising_delta_e(&m, 1).unwrap(), 5.0);
    }

    #[test]
    fn init_is_consistent() {
        let params = resolve_params(&Ising, &BTreeMap::new(), 9).unwrap();
        let m = launch(&Ising, &params).unwrap();
        let g = m.graph().unwrap();
        assert_eq!(g.num_nodes(), 500);
        for i in g.node_ids() {
            let p = g.node_props(i).unwrap();
            let s = p.int("spin").unwrap();
            assert!(s == 1 || s == -1);
            assert_eq!(p.color("color").unwrap() == &Color::black(), s == 1);
            assert!(g.degree(i).unwrap() >= 4);
        }
    }

    #[test]
    fn knn_edges_point_to_nearest() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [5.0, 0.0], [5.5, 0.0]];
        assert_eq!(knn_geometric_graph(&pts, 2), vec![(0, 1), (2, 3)]);
    }
}
