//! Field-level dependency graph read off the rule bodies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::typeck::{TypedKind, TypedRuleset};
use crate::schema::KEY_FIELD;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(untagged)]
pub enum GraphNode {
    /// `Record.field`
    Field { record: String, field: String },
    /// A whole record type, scanned by an aggregate.
    Type { record: String },
}

impl GraphNode {
    pub fn field(record: &str, field: &str) -> Self {
        GraphNode::Field {
            record: record.to_string(),
            field: field.to_string(),
        }
    }
}

impl fmt::Display for GraphNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphNode::Field { record, field } => write!(f, "{record}.{field}"),
            GraphNode::Type { record } => f.write_str(record),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    /// `(from, to)`: the rule for `from` reads `to`.
    pub edges: BTreeSet<(GraphNode, GraphNode)>,
    /// Field-level cycles, each listed in node order. Reported, not rejected:
    /// only a cycle through actual data makes evaluation fail.
    pub cycles: Vec<Vec<GraphNode>>,
}

impl DependencyGraph {
    pub fn successors<'a>(&'a self, node: &'a GraphNode) -> impl Iterator<Item = &'a GraphNode> + 'a {
        self.edges.iter().filter(move |(f, _)| f == node).map(|(_, t)| t)
    }
}

pub fn static_dependency_graph(ruleset: &TypedRuleset) -> DependencyGraph {
    let mut edges = BTreeSet::new();
    for (record, field, body) in ruleset.ruled_fields() {
        let from = GraphNode::field(record, field);
        body.walk(&mut |node| match &node.kind {
            TypedKind::Field {
                record_type, field, ..
            } if field != KEY_FIELD => {
                edges.insert((from.clone(), GraphNode::field(record_type, field)));
            }
            TypedKind::Aggregate(agg) => {
                edges.insert((
                    from.clone(),
                    GraphNode::Type {
                        record: agg.record_type.clone(),
                    },
                ));
            }
            _ => {}
        });
    }
    let cycles = field_cycles(&edges);
    DependencyGraph { edges, cycles }
}

fn field_cycles(edges: &BTreeSet<(GraphNode, GraphNode)>) -> Vec<Vec<GraphNode>> {
    let mut graph = DiGraph::<GraphNode, ()>::new();
    let mut index = BTreeMap::new();
    let mut self_loops = BTreeSet::new();
    for (from, to) in edges {
        if !matches!(to, GraphNode::Field { .. }) {
            continue;
        }
        if from == to {
            self_loops.insert(from.clone());
        }
        let a = *index.entry(from.clone()).or_insert_with(|| graph.add_node(from.clone()));
        let b = *index.entry(to.clone()).or_insert_with(|| graph.add_node(to.clone()));
        graph.add_edge(a, b, ());
    }
    let mut cycles: Vec<Vec<GraphNode>> = tarjan_scc(&graph)
        .into_iter()
        .filter_map(|scc| {
            let mut nodes: Vec<GraphNode> = scc.into_iter().map(|i| graph[i].clone()).collect();
            nodes.sort();
            (nodes.len() > 1 || self_loops.contains(&nodes[0])).then_some(nodes)
        })
        .collect();
    cycles.sort();
    cycles
}
