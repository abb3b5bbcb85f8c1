//! Branched feedforward architectures as rooted trees of layers.
//!
//! Layers sit on nodes; edges only express precedence. The total cPSE of a
//! branched network adds the cPSE of every root-to-leaf path and removes the
//! prefix up to each branch point once per extra branch:
//!
//! ```text
//! C = Σ_paths C(root → leaf) − Σ_branch_points (out_degree − 1) · C(root → branch point)
//! ```
//!
//! For the 15-node fork that splits three ways at node 3 this is
//! `C_{1-7} + C_{1-11} + C_{1-15} − 2·C_{1-3}`. Nested branch points use the
//! same rule applied at each one.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::ensemble::LayerMatrixEnsemble;
use crate::pipeline::sequence_cpse;
use crate::Error;

/// Wire form: `{"root": str, "nodes": [str...], "edges": [[str, str]...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub root: String,
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
}

impl GraphDocument {
    /// A linear chain over `names` in order.
    pub fn chain<S: AsRef<str>>(names: &[S]) -> Self {
        let nodes: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let edges = nodes.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        Self {
            root: nodes.first().cloned().unwrap_or_default(),
            nodes,
            edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("duplicate node '{0}'")]
    DuplicateNode(String),
    #[error("root '{0}' is not a node")]
    UnknownRoot(String),
    #[error("edge refers to unknown node '{0}'")]
    UnknownNode(String),
    #[error("merge nodes unsupported: '{0}' has {1} parents")]
    MergeNode(String, usize),
    #[error("graph contains a cycle")]
    Cycle,
    #[error("root '{0}' has a parent")]
    RootHasParent(String),
    #[error("multiple roots: '{0}' has no parent")]
    MultipleRoots(String),
    #[error("node '{0}' is unreachable from the root")]
    Unreachable(String),
    #[error("unknown layer name '{0}'")]
    UnknownLayer(String),
}

/// Validated rooted tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchGraph {
    names: Vec<String>,
    root: usize,
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
}

struct Indexed {
    names: Vec<String>,
    children: Vec<Vec<usize>>,
    in_degree: Vec<usize>,
    parent: Vec<Option<usize>>,
}

fn index(doc: &GraphDocument) -> Result<Indexed, GraphError> {
    if doc.nodes.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut ids = HashMap::new();
    for (i, name) in doc.nodes.iter().enumerate() {
        if ids.insert(name.as_str(), i).is_some() {
            return Err(GraphError::DuplicateNode(name.clone()));
        }
    }
    let n = doc.nodes.len();
    let mut children = vec![Vec::new(); n];
    let mut in_degree = vec![0; n];
    let mut parent = vec![None; n];
    let lookup = |s: &String| {
        ids.get(s.as_str())
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(s.clone()))
    };
    for (from, to) in &doc.edges {
        let (f, t) = (lookup(from)?, lookup(to)?);
        children[f].push(t);
        in_degree[t] += 1;
        parent[t] = Some(f);
    }
    for c in &mut children {
        c.sort_unstable();
    }
    Ok(Indexed {
        names: doc.nodes.clone(),
        children,
        in_degree,
        parent,
    })
}

/// Kahn's algorithm, smallest node index first. `None` if a cycle remains.
fn topological(ix: &Indexed) -> Option<Vec<usize>> {
    let mut remaining = ix.in_degree.clone();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..remaining.len())
        .filter(|&i| remaining[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(remaining.len());
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &ix.children[i] {
            remaining[c] -= 1;
            if remaining[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    (order.len() == remaining.len()).then_some(order)
}

pub fn parse_graph(doc: &GraphDocument) -> Result<ArchGraph, GraphError> {
    let ix = index(doc)?;
    let root = doc
        .nodes
        .iter()
        .position(|n| *n == doc.root)
        .ok_or_else(|| GraphError::UnknownRoot(doc.root.clone()))?;
    if let Some(i) = (0..ix.names.len()).find(|&i| ix.in_degree[i] > 1) {
        return Err(GraphError::MergeNode(ix.names[i].clone(), ix.in_degree[i]));
    }
    if topological(&ix).is_none() {
        return Err(GraphError::Cycle);
    }
    if ix.in_degree[root] != 0 {
        return Err(GraphError::RootHasParent(doc.root.clone()));
    }
    if let Some(i) = (0..ix.names.len()).find(|&i| i != root && ix.in_degree[i] == 0) {
        return Err(GraphError::MultipleRoots(ix.names[i].clone()));
    }
    let mut seen = vec![false; ix.names.len()];
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        seen[i] = true;
        stack.extend(&ix.children[i]);
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(GraphError::Unreachable(ix.names[i].clone()));
    }
    Ok(ArchGraph {
        names: ix.names,
        root,
        children: ix.children,
        parent: ix.parent,
    })
}

/// Parse and additionally require every node to be a layer of `e`.
pub fn parse_graph_for(doc: &GraphDocument, e: &LayerMatrixEnsemble) -> Result<ArchGraph, GraphError> {
    let g = parse_graph(doc)?;
    let names = e.names();
    if let Some(missing) = g.names.iter().find(|n| !names.contains(&n.as_str())) {
        return Err(GraphError::UnknownLayer(missing.clone()));
    }
    Ok(g)
}

/// Topological order of an acyclic graph, merges allowed; ties broken by
/// node order. Used to run a merge-containing graph as a plain sequence.
pub fn linearize_topological(doc: &GraphDocument) -> Result<Vec<String>, GraphError> {
    let ix = index(doc)?;
    let order = topological(&ix).ok_or(GraphError::Cycle)?;
    Ok(order.into_iter().map(|i| ix.names[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchPoint {
    pub node: String,
    pub out_degree: usize,
    /// Root-to-branch-point sequence, inclusive.
    pub prefix: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchDecomposition {
    pub paths: Vec<Vec<String>>,
    pub branch_points: Vec<BranchPoint>,
}

impl ArchGraph {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn root(&self) -> &str {
        &self.names[self.root]
    }

    fn prefix(&self, mut node: usize) -> Vec<String> {
        let mut path = vec![self.names[node].clone()];
        while let Some(p) = self.parent[node] {
            path.push(self.names[p].clone());
            node = p;
        }
        path.reverse();
        path
    }

    /// Root-to-leaf paths in depth-first order (children in node order) and
    /// branch points in node order.
    pub fn decompose(&self) -> BranchDecomposition {
        let mut paths = Vec::new();
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if self.children[i].is_empty() {
                paths.push(self.prefix(i));
            }
            stack.extend(self.children[i].iter().rev());
        }
        let branch_points = (0..self.names.len())
            .filter(|&i| self.children[i].len() > 1)
            .map(|i| BranchPoint {
                node: self.names[i].clone(),
                out_degree: self.children[i].len(),
                prefix: self.prefix(i),
            })
            .collect();
        BranchDecomposition { paths, branch_points }
    }
}

pub fn decompose(g: &ArchGraph) -> BranchDecomposition {
    g.decompose()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathCpse {
    pub nodes: Vec<String>,
    pub cpse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPrefixCpse {
    pub node: String,
    pub out_degree: usize,
    pub nodes: Vec<String>,
    pub cpse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchedReport {
    pub total: f64,
    pub paths: Vec<PathCpse>,
    pub branch_points: Vec<BranchPrefixCpse>,
}

/// Total cPSE of a branched architecture. Each path and prefix is analysed as
/// a standalone network with its own `N` and bin grid.
pub fn branched_cpse(g: &ArchGraph, e: &LayerMatrixEnsemble, cfg: &RunConfig) -> Result<BranchedReport, Error> {
    let names = e.names();
    if let Some(missing) = g.names.iter().find(|n| !names.contains(&n.as_str())) {
        return Err(GraphError::UnknownLayer(missing.clone()).into());
    }
    let dec = g.decompose();
    let paths = dec
        .paths
        .into_iter()
        .map(|nodes| {
            let cpse = sequence_cpse(e, &nodes, cfg)?;
            Ok(PathCpse { nodes, cpse })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let branch_points = dec
        .branch_points
        .into_iter()
        .map(|bp| {
            let cpse = sequence_cpse(e, &bp.prefix, cfg)?;
            Ok(BranchPrefixCpse {
                node: bp.node,
                out_degree: bp.out_degree,
                nodes: bp.prefix,
                cpse,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let total = paths.iter().map(|p| p.cpse).sum::<f64>()
        - branch_points
            .iter()
            .map(|b| (b.out_degree - 1) as f64 * b.cpse)
            .sum::<f64>();
    Ok(BranchedReport {
        total,
        paths,
        branch_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(r: std::ops::RangeInclusive<usize>) -> Vec<String> {
        r.map(|i| i.to_string()).collect()
    }

    fn doc(nodes: Vec<String>, edges: &[(usize, usize)]) -> GraphDocument {
        GraphDocument {
            root: nodes[0].clone(),
            nodes,
            edges: edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    fn fork() -> GraphDocument {
        doc(
            names(1..=15),
            &[
                (1, 2),
                (2, 3),
                (3, 4),
                (3, 8),
                (3, 12),
                (8, 9),
                (9, 10),
                (10, 11),
                (4, 5),
                (5, 6),
                (6, 7),
                (12, 13),
                (13, 14),
                (14, 15),
            ],
        )
    }

    #[test]
    fn chain_has_one_path() {
        let g = parse_graph(&doc(names(1..=3), &[(1, 2), (2, 3)])).unwrap();
        let d = g.decompose();
        assert_eq!(d.paths, vec![names(1..=3)]);
        assert!(d.branch_points.is_empty());
        let d = decompose(&parse_graph(&GraphDocument::chain(&names(1..=5))).unwrap());
        assert_eq!(d.paths, vec![names(1..=5)]);
    }

    #[test]
    fn fork_decomposition() {
        let g = parse_graph(&fork()).unwrap();
        let d = g.decompose();
        let ends: Vec<&str> = d.paths.iter().map(|p| p.last().unwrap().as_str()).collect();
        assert_eq!(ends, vec!["7", "11", "15"]);
        assert_eq!(d.paths[1], vec!["1", "2", "3", "8", "9", "10", "11"]);
        assert_eq!(d.branch_points.len(), 1);
        assert_eq!(
            (d.branch_points[0].node.as_str(), d.branch_points[0].out_degree),
            ("3", 3)
        );
        assert_eq!(d.branch_points[0].prefix, names(1..=3));
        let extra: usize = d.branch_points.iter().map(|b| b.out_degree - 1).sum();
        assert_eq!(extra, d.paths.len() - 1);
    }

    #[test]
    fn fork_at_root() {
        let d = parse_graph(&doc(names(1..=3), &[(1, 2), (1, 3)])).unwrap().decompose();
        assert_eq!(d.paths.len(), 2);
        assert_eq!(
            (d.branch_points[0].node.as_str(), d.branch_points[0].out_degree),
            ("1", 2)
        );
    }

    #[test]
    fn merge_nodes_are_rejected() {
        let mut d = fork();
        d.edges.push(("5".into(), "9".into()));
        let err = parse_graph(&d).unwrap_err();
        assert!(err.to_string().starts_with("merge nodes unsupported"), "{err}");
    }

    #[test]
    fn structural_errors() {
        assert_eq!(
            parse_graph(&doc(names(1..=3), &[(1, 2), (2, 3), (3, 2)])).unwrap_err(),
            GraphError::MergeNode("2".into(), 2)
        );
        assert_eq!(
            parse_graph(&doc(names(1..=3), &[(2, 3), (3, 2)])).unwrap_err(),
            GraphError::Cycle
        );
        assert_eq!(
            parse_graph(&doc(names(1..=2), &[(1, 1)])).unwrap_err(),
            GraphError::Cycle
        );
        assert_eq!(
            parse_graph(&doc(names(1..=3), &[(1, 2)])).unwrap_err(),
            GraphError::MultipleRoots("3".into())
        );
        assert_eq!(
            parse_graph(&doc(names(1..=2), &[(2, 1)])).unwrap_err(),
            GraphError::RootHasParent("1".into())
        );
        assert_eq!(
            parse_graph(&doc(names(1..=2), &[(1, 9)])).unwrap_err(),
            GraphError::UnknownNode("9".into())
        );
        let mut bad_root = doc(names(1..=2), &[(1, 2)]);
        bad_root.root = "x".into();
        assert_eq!(parse_graph(&bad_root).unwrap_err(), GraphError::UnknownRoot("x".into()));
        let dup = GraphDocument {
            root: "a".into(),
            nodes: vec!["a".into(), "a".into()],
            edges: vec![],
        };
        assert_eq!(parse_graph(&dup).unwrap_err(), GraphError::DuplicateNode("a".into()));
        assert_eq!(
            parse_graph(&GraphDocument::chain::<String>(&[])).unwrap_err(),
            GraphError::Empty
        );
    }

    #[test]
    fn linearize_allows_merges() {
        let d = doc(names(1..=4), &[(1, 2), (1, 3), (2, 4), (3, 4)]);
        assert!(parse_graph(&d).is_err());
        assert_eq!(linearize_topological(&d).unwrap(), names(1..=4));
        let cyclic = doc(names(1..=2), &[(1, 2), (2, 1)]);
        assert_eq!(linearize_topological(&cyclic).unwrap_err(), GraphError::Cycle);
    }

    #[test]
    fn document_wire_format() {
        let d: GraphDocument = serde_json::from_str(r#"{"root":"a","nodes":["a","b"],"edges":[["a","b"]]}"#).unwrap();
        assert_eq!(d, GraphDocument::chain(&["a", "b"]));
        assert_eq!(
            serde_json::to_string(&d).unwrap(),
            r#"{"root":"a","nodes":["a","b"],"edges":[["a","b"]]}"#
        );
    }
}
