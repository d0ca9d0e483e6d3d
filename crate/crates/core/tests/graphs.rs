use std::collections::BTreeSet;

use abm::gallery::knn_geometric_graph;
use abm::knn::KdTree;
use abm::{dynamic_simple_graph, import_graph, static_simple_graph, Error, Mutability, PropTable};
use proptest::prelude::*;

fn sorted_by_distance<const D: usize>(points: &[[f64; D]], q: &[f64; D], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(d2, i)| (i, d2.sqrt())).collect()
}

#[derive(Clone, Debug)]
enum Op {
    Add(u64, u64),
    Remove(u64, u64),
    Drop(u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (1u64..=12, 1u64..=12).prop_map(|(i, j)| Op::Add(i, j)),
        2 => (1u64..=12, 1u64..=12).prop_map(|(i, j)| Op::Remove(i, j)),
        1 => (1u64..=12).prop_map(Op::Drop),
    ]
}

proptest! {
    #[test]
    fn kdtree_matches_distance_sort(
        points in prop::collection::vec([0.0f64..1.0, 0.0f64..1.0], 1..300),
        q in [0.0f64..1.0, 0.0f64..1.0],
        k in 0usize..12,
    ) {
        let tree = KdTree::new(points.clone());
        prop_assert_eq!(tree.knn(&q, k), sorted_by_distance(&points, &q, k));
    }

    #[test]
    fn kdtree_handles_duplicates_in_3d(
        base in prop::collection::vec([0i8..4, 0i8..4, 0i8..4], 1..120),
        k in 1usize..8,
    ) {
        // integer lattice points collide often, exercising the index tie-break
        let points: Vec<[f64; 3]> = base.iter().map(|p| p.map(f64::from)).collect();
        let tree = KdTree::new(points.clone());
        for q in &points {
            prop_assert_eq!(tree.knn(q, k), sorted_by_distance(&points, q, k));
        }
    }

    #[test]
    fn knn_graph_is_the_symmetrised_neighbour_relation(
        points in prop::collection::vec([0.0f64..1.0, 0.0f64..1.0], 1..200),
        k in 1usize..8,
    ) {
        let mut want = BTreeSet::new();
        for (i, p) in points.iter().enumerate() {
            for (j, _) in sorted_by_distance(&points, p, k) {
                if i != j {
                    want.insert((i.min(j), i.max(j)));
                }
            }
        }
        prop_assert_eq!(knn_geometric_graph(&points, k), want.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn adjacency_stays_symmetric(ops in prop::collection::vec(op(), 0..80)) {
        let mut g = dynamic_simple_graph(12);
        let mut reference: BTreeSet<(u64, u64)> = BTreeSet::new();
        let mut alive: BTreeSet<u64> = (1..=12).collect();
        for op in ops {
            match op {
                Op::Add(i, j) => {
                    let r = g.create_edge(i, j);
                    if i == j || !alive.contains(&i) || !alive.contains(&j) {
                        prop_assert!(r.is_err());
                    } else {
                        prop_assert_eq!(r.unwrap(), reference.insert((i.min(j), i.max(j))));
                    }
                }
                Op::Remove(i, j) => {
                    prop_assert_eq!(g.remove_edge(i, j).unwrap(), reference.remove(&(i.min(j), i.max(j))));
                }
                Op::Drop(i) => {
                    prop_assert_eq!(g.remove_node(i).is_ok(), alive.remove(&i));
                    reference.retain(|&(a, b)| a != i && b != i);
                }
            }
        }
        prop_assert_eq!(g.edges().collect::<BTreeSet<_>>(), reference.clone());
        prop_assert_eq!(g.num_edges(), reference.len());
        for i in g.node_ids() {
            for j in g.neighbor_nodes(i).unwrap() {
                prop_assert!(g.neighbor_nodes(j).unwrap().contains(&i));
            }
        }
        let degrees: usize = g.node_ids().map(|i| g.degree(i).unwrap()).sum();
        prop_assert_eq!(degrees, 2 * reference.len());
    }

    #[test]
    fn edge_list_round_trips(edges in prop::collection::btree_set((1u64..=20, 1u64..=20), 0..60)) {
        let edges: Vec<(u64, u64)> = edges.into_iter().filter(|(i, j)| i != j).collect();
        let g = static_simple_graph(20, &edges).unwrap();
        let back = import_graph(&g.to_edge_list(), Some(20), Mutability::Static).unwrap();
        prop_assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        prop_assert_eq!(back.num_nodes(), 20);
    }
}

#[test]
fn duplicate_edges_are_ignored() {
    let mut g = dynamic_simple_graph(3);
    assert!(g.create_edge(1, 2).unwrap());
    assert!(!g.create_edge(1, 2).unwrap());
    assert!(!g.create_edge(2, 1).unwrap());
    assert_eq!(g.num_edges(), 1);
    assert_eq!(g.neighbor_nodes(1).unwrap(), vec![2]);
    assert_eq!(g.neighbor_nodes(2).unwrap(), vec![1]);
}

#[test]
fn static_topology_is_frozen_but_props_are_not() {
    let mut g = static_simple_graph(3, &[(1, 2)]).unwrap();
    assert!(matches!(g.create_edge(2, 3), Err(Error::StaticGraph(_))));
    assert!(matches!(g.remove_node(1), Err(Error::StaticGraph(_))));
    assert!(g.add_nodes(1, &PropTable::new()).is_err());
    g.node_props_mut(1).unwrap().set("spin", 1i64).unwrap();
    assert_eq!(g.node_props(1).unwrap().int("spin").unwrap(), 1);
}

#[test]
fn import_reports_bad_lines() {
    for (text, line) in [("1 2\n2 x\n", 2), ("# header\n3 3\n", 2), ("1 2 3\n", 1), ("0 1\n", 1)] {
        match import_graph(text, None, Mutability::Dynamic) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(import_graph("1 9\n", Some(4), Mutability::Dynamic).is_err());
    let g = import_graph("1 2 # a comment\n\n2 3\n", None, Mutability::Dynamic).unwrap();
    assert_eq!((g.num_nodes(), g.num_edges()), (3, 2));
}
