//! Simple undirected graphs whose nodes and edges carry property tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::PropTable;

pub type NodeId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutability {
    /// Topology frozen; properties remain writable.
    Static,
    Dynamic,
}

#[derive(Clone, Debug, Default)]
struct Node {
    adj: BTreeSet<NodeId>,
    props: PropTable,
}

/// Canonical `(min, max)` key of an undirected edge.
pub fn edge_key(i: NodeId, j: NodeId) -> (NodeId, NodeId) {
    (i.min(j), i.max(j))
}

#[derive(Clone, Debug)]
pub struct DynGraph {
    mutability: Mutability,
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<(NodeId, NodeId), PropTable>,
    next_id: NodeId,
    version: u64,
}

/// Dynamic graph with nodes `1..=n` and no edges.
pub fn dynamic_simple_graph(n: usize) -> DynGraph {
    let mut g = DynGraph {
        mutability: Mutability::Dynamic,
        nodes: BTreeMap::new(),
        edges: BTreeMap::new(),
        next_id: 1,
        version: 0,
    };
    g.add_nodes(n, &PropTable::new()).expect("dynamic graph");
    g
}

/// Static graph with nodes `1..=n` and the given edges.
pub fn static_simple_graph(n: usize, edges: &[(NodeId, NodeId)]) -> Result<DynGraph> {
    let mut g = dynamic_simple_graph(n);
    for &(i, j) in edges {
        g.create_edge(i, j)?;
    }
    g.mutability = Mutability::Static;
    Ok(g)
}

impl DynGraph {
    pub fn mutability(&self) -> Mutability {
        self.mutability
    }

    pub fn is_static(&self) -> bool {
        self.mutability == Mutability::Static
    }

    /// Converts between static and dynamic without touching the topology.
    pub fn set_mutability(&mut self, m: Mutability) {
        self.mutability = m;
    }

    /// Incremented on every topology change.
    pub fn version(&self) -> u64 {
        self.version
    }

    fn ensure_dynamic(&self, op: &'static str) -> Result<()> {
        if self.is_static() {
            Err(Error::StaticGraph(op))
        } else {
            Ok(())
        }
    }

    fn node(&self, i: NodeId) -> Result<&Node> {
        self.nodes.get(&i).ok_or(Error::UnknownNode(i))
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_node(&self, i: NodeId) -> bool {
        self.nodes.contains_key(&i)
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        self.edges.contains_key(&edge_key(i, j))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    /// Canonical edge keys, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.keys().copied()
    }

    /// Removes every node and edge and restarts id allocation at 1.
    pub fn flush(&mut self) -> Result<()> {
        self.ensure_dynamic("flush_graph")?;
        self.nodes.clear();
        self.edges.clear();
        self.next_id = 1;
        self.version += 1;
        Ok(())
    }

    /// Appends `n` nodes, each with its own copy of `defaults`.
    pub fn add_nodes(&mut self, n: usize, defaults: &PropTable) -> Result<RangeInclusive<NodeId>> {
        self.ensure_dynamic("add_nodes")?;
        let first = self.next_id;
        for _ in 0..n {
            self.nodes.insert(
                self.next_id,
                Node {
                    adj: BTreeSet::new(),
                    props: defaults.clone(),
                },
            );
            self.next_id += 1;
        }
        if n > 0 {
            self.version += 1;
        }
        Ok(first..=self.next_id - 1)
    }

    pub fn add_node(&mut self, props: PropTable) -> Result<NodeId> {
        let r = self.add_nodes(1, &props)?;
        Ok(*r.start())
    }

    pub fn remove_node(&mut self, i: NodeId) -> Result<()> {
        self.ensure_dynamic("remove_node")?;
        let node = self.nodes.remove(&i).ok_or(Error::UnknownNode(i))?;
        for j in node.adj {
            if let Some(n) = self.nodes.get_mut(&j) {
                n.adj.remove(&i);
            }
            self.edges.remove(&edge_key(i, j));
        }
        self.version += 1;
        Ok(())
    }

    /// Adds the undirected edge `{i, j}`. Returns `false` if it already existed.
    pub fn create_edge(&mut self, i: NodeId, j: NodeId) -> Result<bool> {
        self.create_edge_with(i, j, PropTable::new())
    }

    pub fn create_edge_with(&mut self, i: NodeId, j: NodeId, props: PropTable) -> Result<bool> {
        self.ensure_dynamic("create_edge")?;
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        self.node(i)?;
        self.node(j)?;
        let key = edge_key(i, j);
        if self.edges.contains_key(&key) {
            return Ok(false);
        }
        self.edges.insert(key, props);
        self.nodes.get_mut(&i).expect("checked").adj.insert(j);
        self.nodes.get_mut(&j).expect("checked").adj.insert(i);
        self.version += 1;
        Ok(true)
    }

    pub fn remove_edge(&mut self, i: NodeId, j: NodeId) -> Result<bool> {
        self.ensure_dynamic("remove_edge")?;
        if self.edges.remove(&edge_key(i, j)).is_none() {
            return Ok(false);
        }
        if let Some(n) = self.nodes.get_mut(&i) {
            n.adj.remove(&j);
        }
        if let Some(n) = self.nodes.get_mut(&j) {
            n.adj.remove(&i);
        }
        self.version += 1;
        Ok(true)
    }

    /// Adjacency of `i`, ascending.
    pub fn neighbor_nodes(&self, i: NodeId) -> Result<Vec<NodeId>> {
        Ok(self.node(i)?.adj.iter().copied().collect())
    }

    pub fn neighbors_iter(&self, i: NodeId) -> Result<impl Iterator<Item = NodeId> + '_> {
        Ok(self.node(i)?.adj.iter().copied())
    }

    pub fn degree(&self, i: NodeId) -> Result<usize> {
        Ok(self.node(i)?.adj.len())
    }

    pub fn node_props(&self, i: NodeId) -> Result<&PropTable> {
        Ok(&self.node(i)?.props)
    }

    pub fn node_props_mut(&mut self, i: NodeId) -> Result<&mut PropTable> {
        self.nodes.get_mut(&i).map(|n| &mut n.props).ok_or(Error::UnknownNode(i))
    }

    pub fn edge_props(&self, i: NodeId, j: NodeId) -> Result<&PropTable> {
        self.edges
            .get(&edge_key(i, j))
            .ok_or_else(|| Error::InvalidArgument(format!("no edge {i}-{j}")))
    }

    pub fn edge_props_mut(&mut self, i: NodeId, j: NodeId) -> Result<&mut PropTable> {
        self.edges
            .get_mut(&edge_key(i, j))
            .ok_or_else(|| Error::InvalidArgument(format!("no edge {i}-{j}")))
    }

    pub(crate) fn nodes_with_props(&self) -> impl Iterator<Item = (NodeId, &PropTable)> {
        self.nodes.iter().map(|(&i, n)| (i, &n.props))
    }

    pub(crate) fn edges_with_props(&self) -> impl Iterator<Item = ((NodeId, NodeId), &PropTable)> {
        self.edges.iter().map(|(&k, p)| (k, p))
    }

    /// Edge-list text: one sorted canonical `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }
}

/// Parses an edge list (`i j` per line, 1-based, `#` comments).
///
/// `node_count` fixes the node set to `1..=node_count`; when `None` it is
/// the largest id mentioned.
pub fn import_graph(text: &str, node_count: Option<usize>, mutability: Mutability) -> Result<DynGraph> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<NodeId>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("`{s}` is not a node id"),
            })
        };
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected two node ids, got `{line}`"),
            });
        }
        let (i, j) = (parse(fields[0])?, parse(fields[1])?);
        if i == 0 || j == 0 {
            return Err(Error::Parse {
                line: line_no,
                msg: "node ids are 1-based".into(),
            });
        }
        if i == j {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("self-loop on node {i}"),
            });
        }
        if let Some(n) = node_count {
            if i.max(j) > n as NodeId {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("node id {} exceeds node count {n}", i.max(j)),
                });
            }
        }
        pairs.push((i, j));
    }
    let n = node_count.unwrap_or_else(|| pairs.iter().map(|&(i, j)| i.max(j)).max().unwrap_or(0) as usize);
    let mut g = dynamic_simple_graph(n);
    for (i, j) in pairs {
        g.create_edge(i, j)?;
    }
    g.set_mutability(mutability);
    Ok(g)
}
