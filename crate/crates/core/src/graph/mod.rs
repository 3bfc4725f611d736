//! Simple undirected graphs with binary node attributes.
//!
//! Node ids are arbitrary strings externally and dense indices internally;
//! [`Graph::id`] and [`Graph::index_of`] translate between the two.

mod cohesion;
mod io;

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use cohesion::{
    estimate_node_independent_paths, node_independent_paths, CohesionEstimate, DyadSampling,
};
pub use io::{
    load_attributes, load_edge_list, parse_attributes, parse_edge_list, write_attributes,
    write_edge_list, Delimiter, EdgeListOptions,
};

/// Per-node binary attribute column; `None` marks a missing value.
pub type AttributeColumn = Vec<Option<u8>>;

/// Counts of input lines dropped or merged while building a simple graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub edge_lines: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    /// Directed input only: `u v` lines whose reverse `v u` was also present.
    pub reciprocated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<usize>>,
    edges: usize,
    attributes: BTreeMap<String, AttributeColumn>,
}

impl Graph {
    /// Builds a simple graph from index pairs over `ids`. Self-loops and
    /// repeated pairs (in either orientation) are dropped.
    pub fn from_edges(
        ids: Vec<String>,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        Self::build(ids, pairs, false).map(|(g, _)| g)
    }

    pub(crate) fn build(
        ids: Vec<String>,
        pairs: impl IntoIterator<Item = (usize, usize)>,
        directed_input: bool,
    ) -> Result<(Self, LoadReport)> {
        let n = ids.len();
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate node id `{id}`")));
            }
        }
        let mut report = LoadReport::default();
        let mut arcs: Vec<(usize, usize)> = Vec::new();
        for (u, v) in pairs {
            report.edge_lines += 1;
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                report.self_loops += 1;
                continue;
            }
            arcs.push((u, v));
        }
        if directed_input {
            let mut directed = arcs.clone();
            directed.sort_unstable();
            let before = directed.len();
            directed.dedup();
            report.duplicates += before - directed.len();
            report.reciprocated = directed
                .iter()
                .filter(|&&(u, v)| u < v && directed.binary_search(&(v, u)).is_ok())
                .count();
        }
        let mut undirected: Vec<(usize, usize)> =
            arcs.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        undirected.sort_unstable();
        let before = undirected.len();
        undirected.dedup();
        if !directed_input {
            report.duplicates += before - undirected.len();
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &undirected {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok((
            Graph {
                ids,
                index,
                adj,
                edges: undirected.len(),
                attributes: BTreeMap::new(),
            },
            report,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    /// Sorted neighbor indices of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Undirected edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.keys().map(String::as_str)
    }

    pub fn attribute(&self, name: &str) -> Option<&[Option<u8>]> {
        self.attributes.get(name).map(Vec::as_slice)
    }

    pub fn require_attribute(&self, name: &str) -> Result<&[Option<u8>]> {
        self.attribute(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn attributes(&self) -> &BTreeMap<String, AttributeColumn> {
        &self.attributes
    }

    pub fn set_attribute(&mut self, name: impl Into<String>, values: AttributeColumn) -> Result<()> {
        if values.len() != self.node_count() {
            return Err(Error::InvalidInput(format!(
                "attribute column has {} values for {} nodes",
                values.len(),
                self.node_count()
            )));
        }
        if let Some(bad) = values.iter().flatten().find(|&&v| v > 1) {
            return Err(Error::InvalidInput(format!("attribute value {bad} is not 0/1")));
        }
        self.attributes.insert(name.into(), values);
        Ok(())
    }

    /// Population mean of a binary attribute over nodes where it is present.
    pub fn attribute_mean(&self, name: &str) -> Result<f64> {
        let col = self.require_attribute(name)?;
        let (sum, n) = col
            .iter()
            .flatten()
            .fold((0usize, 0usize), |(s, n), &v| (s + v as usize, n + 1));
        if n == 0 {
            return Err(Error::InvalidInput(format!("attribute `{name}` is entirely missing")));
        }
        Ok(sum as f64 / n as f64)
    }

    /// Component label per node, numbered in order of the smallest member index.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() > 0 && self.components().iter().all(|&c| c == 0)
    }

    /// The connected component with the most nodes. Ties go to the
    /// component containing the smallest node id (string order).
    pub fn largest_connected_component(&self) -> Graph {
        let label = self.components();
        let count = label.iter().max().map_or(0, |&m| m + 1);
        let mut size = vec![0usize; count];
        let mut min_id: Vec<Option<&str>> = vec![None; count];
        for (i, &c) in label.iter().enumerate() {
            size[c] += 1;
            let id = self.ids[i].as_str();
            if min_id[c].is_none_or(|m| id_cmp(id, m).is_lt()) {
                min_id[c] = Some(id);
            }
        }
        let best = (0..count).max_by(|&a, &b| {
            size[a]
                .cmp(&size[b])
                .then_with(|| id_cmp(min_id[b].unwrap_or(""), min_id[a].unwrap_or("")))
        });
        match best {
            Some(c) => self.induced_subgraph(|i| label[i] == c),
            None => self.clone(),
        }
    }

    /// Subgraph on the nodes selected by `keep`, preserving ids, order and attributes.
    pub fn induced_subgraph(&self, keep: impl Fn(usize) -> bool) -> Graph {
        let mut map = vec![usize::MAX; self.node_count()];
        let mut ids = Vec::new();
        for i in 0..self.node_count() {
            if keep(i) {
                map[i] = ids.len();
                ids.push(self.ids[i].clone());
            }
        }
        let pairs: Vec<(usize, usize)> = self
            .edges()
            .filter(|&(u, v)| map[u] != usize::MAX && map[v] != usize::MAX)
            .map(|(u, v)| (map[u], map[v]))
            .collect();
        let mut g = Graph::from_edges(ids, pairs).expect("subgraph of a valid graph");
        for (name, col) in &self.attributes {
            let values = (0..self.node_count())
                .filter(|&i| map[i] != usize::MAX)
                .map(|i| col[i])
                .collect();
            g.attributes.insert(name.clone(), values);
        }
        g
    }

    fn require_walkable(&self) -> Result<()> {
        if self.node_count() == 0 {
            return Err(Error::Precondition("graph is empty".into()));
        }
        if let Some(i) = (0..self.node_count()).find(|&i| self.degree(i) == 0) {
            return Err(Error::Precondition(format!(
                "node `{}` is isolated",
                self.ids[i]
            )));
        }
        Ok(())
    }

    /// Random-walk transition matrix, entry `(i, j) = G_ij / d_i`.
    pub fn transition_matrix<T: Real>(&self) -> Result<TransitionMatrix<T>> {
        self.require_walkable()?;
        let n = self.node_count();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let w = T::one() / T::from_count(self.degree(i));
            for &j in &self.adj[i] {
                m[(i, j)] = w;
            }
        }
        Ok(TransitionMatrix(m))
    }

    /// Stationary distribution of the simple random walk, `d_i / 2m`.
    pub fn stationary_distribution<T: Real>(&self) -> Result<DVector<T>> {
        self.require_walkable()?;
        let total = T::from_count(2 * self.edges);
        Ok(DVector::from_iterator(
            self.node_count(),
            self.adj.iter().map(|nb| T::from_count(nb.len()) / total),
        ))
    }
}

/// Orders node ids numerically when both are integers, lexically otherwise.
pub fn id_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Row-stochastic random-walk matrix over the nodes of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T: Real>(pub DMatrix<T>);

impl<T: Real> TransitionMatrix<T> {
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.0
    }
}
