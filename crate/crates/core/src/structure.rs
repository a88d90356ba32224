//! Graph structures of the two model families and the keys used to compare
//! and count them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the components of `a` and `b`; false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Key identifying one structural choice: an undirected edge of a tree, or
/// a (node, parent set) pair of a Bayesian network.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StructureKey {
    Edge(usize, usize),
    Node(usize, Vec<usize>),
}

impl StructureKey {
    pub fn edge(i: usize, j: usize) -> Self {
        StructureKey::Edge(i.min(j), i.max(j))
    }

    pub fn node(child: usize, mut parents: Vec<usize>) -> Self {
        parents.sort_unstable();
        StructureKey::Node(child, parents)
    }
}

impl fmt::Display for StructureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureKey::Edge(i, j) => write!(f, "{i}-{j}"),
            StructureKey::Node(c, ps) => {
                write!(f, "{c}|")?;
                for (k, p) in ps.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for StructureKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid structure key `{s}`"));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        if let Some((c, ps)) = s.split_once('|') {
            let parents = if ps.trim().is_empty() {
                Vec::new()
            } else {
                ps.split(',').map(num).collect::<Result<_>>()?
            };
            Ok(StructureKey::node(num(c)?, parents))
        } else if let Some((i, j)) = s.split_once('-') {
            let (i, j) = (num(i)?, num(j)?);
            if i == j {
                return Err(bad());
            }
            Ok(StructureKey::edge(i, j))
        } else {
            Err(bad())
        }
    }
}

impl Serialize for StructureKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StructureKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Spanning tree over `n_nodes` attributes. Edges are stored as `(i, j)`
/// with `i < j`, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStructure {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl TreeStructure {
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> =
            edges.into_iter().map(|(i, j)| (i.min(j), i.max(j))).collect();
        edges.sort_unstable();
        if n_nodes == 0 {
            return Err(Error::Config("tree over zero nodes".into()));
        }
        if edges.len() != n_nodes - 1 {
            return Err(Error::Config(format!(
                "{} edges cannot span {n_nodes} nodes",
                edges.len()
            )));
        }
        let mut uf = UnionFind::new(n_nodes);
        for &(i, j) in &edges {
            if j >= n_nodes || i == j {
                return Err(Error::Config(format!("invalid edge ({i}, {j})")));
            }
            if !uf.union(i, j) {
                return Err(Error::Config(format!("edge ({i}, {j}) closes a cycle")));
            }
        }
        Ok(TreeStructure { n_nodes, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j)| i == node || j == node)
            .count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj.iter_mut().for_each(|a| a.sort_unstable());
        adj
    }

    /// `(parent, child)` pairs in breadth-first order from the lowest-index
    /// node, visiting neighbours in ascending order.
    pub fn bfs_edges(&self) -> Vec<(usize, usize)> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n_nodes];
        let mut out = Vec::with_capacity(self.edges.len());
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(p) = queue.pop_front() {
            for &c in &adj[p] {
                if !seen[c] {
                    seen[c] = true;
                    out.push((p, c));
                    queue.push_back(c);
                }
            }
        }
        out
    }

    pub fn keys(&self) -> BTreeSet<StructureKey> {
        self.edges
            .iter()
            .map(|&(i, j)| StructureKey::Edge(i, j))
            .collect()
    }
}

/// Bayesian network given as a topological list of (node, parent set).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BayesStructure {
    order: Vec<(usize, Vec<usize>)>,
}

impl BayesStructure {
    pub fn new(order: Vec<(usize, Vec<usize>)>) -> Result<Self> {
        let d = order.len();
        let mut placed = vec![false; d];
        let mut normalized = Vec::with_capacity(d);
        for (node, mut parents) in order {
            if node >= d || placed[node] {
                return Err(Error::Config(format!("node {node} missing or repeated")));
            }
            parents.sort_unstable();
            parents.dedup();
            if let Some(p) = parents.iter().find(|&&p| p >= d || !placed[p]) {
                return Err(Error::Config(format!(
                    "parent {p} of node {node} does not precede it"
                )));
            }
            placed[node] = true;
            normalized.push((node, parents));
        }
        Ok(BayesStructure { order: normalized })
    }

    pub fn n_nodes(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[(usize, Vec<usize>)] {
        &self.order
    }

    pub fn parents_of(&self, node: usize) -> Option<&[usize]> {
        self.order
            .iter()
            .find(|(n, _)| *n == node)
            .map(|(_, p)| p.as_slice())
    }

    pub fn keys(&self) -> BTreeSet<StructureKey> {
        self.order
            .iter()
            .map(|(n, p)| StructureKey::Node(*n, p.clone()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    Tree(TreeStructure),
    Bayes(BayesStructure),
}

impl Structure {
    pub fn keys(&self) -> BTreeSet<StructureKey> {
        match self {
            Structure::Tree(t) => t.keys(),
            Structure::Bayes(b) => b.keys(),
        }
    }

    pub fn as_tree(&self) -> Option<&TreeStructure> {
        match self {
            Structure::Tree(t) => Some(t),
            Structure::Bayes(_) => None,
        }
    }

    pub fn as_bayes(&self) -> Option<&BayesStructure> {
        match self {
            Structure::Bayes(b) => Some(b),
            Structure::Tree(_) => None,
        }
    }
}

/// Exact maximum spanning tree over the complete graph on `n` nodes.
/// Edges are considered by decreasing weight, ties broken by
/// lexicographic order of `(i, j)`.
pub fn maximum_spanning_tree(n: usize, weight: impl Fn(usize, usize) -> f64) -> TreeStructure {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            candidates.push((weight(i, j), i, j));
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for (_, i, j) in candidates {
        if uf.union(i, j) {
            edges.push((i, j));
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    TreeStructure::new(n, edges).expect("Kruskal output spans the complete graph")
}
