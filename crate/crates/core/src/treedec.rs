//! Rooted tree decompositions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::structure::{Elem, Hypergraph, Structure};

/// A rooted tree with a bag per node; `parent[root]` is `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<Elem>>,
    pub parent: Vec<Option<usize>>,
    pub root: usize,
}

impl TreeDecomposition {
    pub fn single(bag: BTreeSet<Elem>) -> Self {
        TreeDecomposition {
            bags: vec![bag],
            parent: vec![None],
            root: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.parent[c] == Some(v)).collect()
    }

    /// `v` and all nodes below it.
    pub fn descendants(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            let cur = out[i];
            out.extend(self.children(cur));
            i += 1;
        }
        out
    }

    /// Union of the bags at and below `v`.
    pub fn elements_below(&self, v: usize) -> BTreeSet<Elem> {
        self.descendants(v)
            .into_iter()
            .flat_map(|u| self.bags[u].iter().copied())
            .collect()
    }

    /// Nodes ordered so that children come before parents.
    pub fn bottom_up(&self) -> Vec<usize> {
        let mut order = self.descendants(self.root);
        order.reverse();
        order
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .filter_map(|c| self.parent[c].map(|p| (p, c)))
            .collect()
    }

    /// True when `parent` describes a tree rooted at `root` spanning all nodes.
    pub fn is_rooted_tree(&self) -> bool {
        let n = self.len();
        if n == 0 || self.root >= n || self.parent.len() != n || self.parent[self.root].is_some() {
            return false;
        }
        if (0..n).any(|v| v != self.root && self.parent[v].is_none_or(|p| p >= n)) {
            return false;
        }
        self.descendants(self.root).len() == n
            && (0..n).all(|v| {
                // walking up reaches the root within n steps
                let mut cur = v;
                for _ in 0..n {
                    match self.parent[cur] {
                        Some(p) => cur = p,
                        None => return cur == self.root,
                    }
                }
                false
            })
    }

    pub fn to_json(&self, elems: &Structure, labels: Option<&[String]>) -> serde_json::Value {
        let doc = DecompositionJson {
            nodes: (0..self.len())
                .map(|v| NodeJson {
                    id: v,
                    bag: self.bags[v].iter().map(|&e| elems.name(e)).collect(),
                    subplan: labels.map(|l| l[v].clone()),
                })
                .collect(),
            edges: self.edges().into_iter().map(|(p, c)| [p, c]).collect(),
            root: self.root,
        };
        serde_json::to_value(doc).expect("serializable")
    }

    pub fn to_dot(&self, elems: &Structure, labels: Option<&[String]>) -> String {
        let mut out = String::from("digraph decomposition {\n  node [shape=box];\n");
        for v in 0..self.len() {
            let bag: Vec<String> = self.bags[v].iter().map(|&e| elems.name(e)).collect();
            let mut label = format!("{}: {{{}}}", v, bag.join(", "));
            if let Some(l) = labels {
                let _ = write!(label, "\\n{}", l[v]);
            }
            let _ = writeln!(out, "  n{v} [label=\"{}\"];", label.replace('"', "\\\""));
        }
        for (p, c) in self.edges() {
            let _ = writeln!(out, "  n{p} -> n{c};");
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: usize,
    pub bag: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subplan: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<[usize; 2]>,
    pub root: usize,
}

/// Vertex coverage, edge coverage and connectivity.
pub fn check_tree_decomposition(h: &Hypergraph, td: &TreeDecomposition) -> bool {
    if !td.is_rooted_tree() {
        return false;
    }
    let covered: BTreeSet<Elem> = td.bags.iter().flatten().copied().collect();
    if !h.vertices.is_subset(&covered) {
        return false;
    }
    if !h
        .edges
        .iter()
        .all(|e| td.bags.iter().any(|b| e.is_subset(b)))
    {
        return false;
    }
    // the nodes holding a vertex form a connected subtree: exactly one of them
    // has its parent outside the set
    let mut holders: BTreeMap<Elem, Vec<usize>> = BTreeMap::new();
    for (v, bag) in td.bags.iter().enumerate() {
        for &e in bag {
            holders.entry(e).or_default().push(v);
        }
    }
    holders.values().all(|nodes| {
        nodes
            .iter()
            .filter(|&&v| td.parent[v].is_none_or(|p| !nodes.contains(&p)))
            .count()
            == 1
    })
}
