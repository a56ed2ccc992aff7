//! Combinatorial hypergraphs and their measure-hypernetwork models.
//!
//! A hypergraph is a labeled node set plus labeled hyperedges (subsets of
//! nodes). Models choose a node measure (uniform or degree-proportional), a
//! hyperedge measure (uniform or degree-sum-proportional), and a relation
//! matrix (0/1 incidence, or shortest-path distances on a weighted line
//! graph, minimized over the hyperedges containing the node).

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypernet::{MeasureHypernetwork, MeasureNetwork};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorialHypergraph {
    nodes: Vec<String>,
    /// Hyperedges in declaration order; members stored as node indices.
    hyperedges: Vec<(String, BTreeSet<usize>)>,
}

impl CombinatorialHypergraph {
    pub fn new(nodes: Vec<String>, hyperedges: Vec<(String, Vec<String>)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParams("hypergraph has no nodes".into()));
        }
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.as_str(), i).is_some() {
                return Err(Error::InvalidParams(format!("duplicate node label {n:?}")));
            }
        }
        if hyperedges.is_empty() {
            return Err(Error::InvalidParams("hypergraph has no hyperedges".into()));
        }
        let mut seen_labels = BTreeSet::new();
        let mut edges = Vec::with_capacity(hyperedges.len());
        for (label, members) in hyperedges {
            if !seen_labels.insert(label.clone()) {
                return Err(Error::InvalidParams(format!(
                    "duplicate hyperedge label {label:?}"
                )));
            }
            let mut set = BTreeSet::new();
            for m in &members {
                match index.get(m.as_str()) {
                    Some(&i) => {
                        set.insert(i);
                    }
                    None => {
                        return Err(Error::InvalidParams(format!(
                            "hyperedge {label:?} references undeclared node {m:?}"
                        )))
                    }
                }
            }
            if set.is_empty() {
                return Err(Error::InvalidParams(format!(
                    "hyperedge {label:?} is empty"
                )));
            }
            edges.push((label, set));
        }
        Ok(CombinatorialHypergraph {
            nodes,
            hyperedges: edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn hyperedge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn hyperedge_labels(&self) -> Vec<String> {
        self.hyperedges.iter().map(|(l, _)| l.clone()).collect()
    }

    pub fn members(&self, edge: usize) -> &BTreeSet<usize> {
        &self.hyperedges[edge].1
    }

    pub fn member_labels(&self, edge: usize) -> Vec<String> {
        self.hyperedges[edge]
            .1
            .iter()
            .map(|&i| self.nodes[i].clone())
            .collect()
    }

    /// Number of hyperedges containing the node.
    pub fn degree(&self, node: usize) -> usize {
        self.hyperedges
            .iter()
            .filter(|(_, s)| s.contains(&node))
            .count()
    }

    /// Same hypergraph content regardless of representation details.
    pub fn content_eq(&self, other: &CombinatorialHypergraph) -> bool {
        let to_sets = |g: &CombinatorialHypergraph| -> BTreeSet<(String, BTreeSet<String>)> {
            g.hyperedges
                .iter()
                .map(|(l, s)| {
                    (
                        l.clone(),
                        s.iter().map(|&i| g.nodes[i].clone()).collect(),
                    )
                })
                .collect()
        };
        let nodes_a: BTreeSet<_> = self.nodes.iter().collect();
        let nodes_b: BTreeSet<_> = other.nodes.iter().collect();
        nodes_a == nodes_b && to_sets(self) == to_sets(other)
    }

    /// Swap the roles of nodes and hyperedges: each node becomes a hyperedge
    /// containing the labels of the hyperedges it belongs to. Rejects
    /// isolated nodes (they would become empty hyperedges).
    pub fn dual(&self) -> Result<CombinatorialHypergraph> {
        let labels = self.hyperedge_labels();
        let mut edges = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let containing: Vec<String> = self
                .hyperedges
                .iter()
                .filter(|(_, s)| s.contains(&i))
                .map(|(l, _)| l.clone())
                .collect();
            if containing.is_empty() {
                return Err(Error::InvalidParams(format!(
                    "node {n:?} is isolated; the dual would contain an empty hyperedge"
                )));
            }
            edges.push((n.clone(), containing));
        }
        CombinatorialHypergraph::new(labels, edges)
    }

    pub fn incidence_matrix(&self) -> Array2<f64> {
        let (n, m) = (self.node_count(), self.hyperedge_count());
        let mut w = Array2::zeros((n, m));
        for (j, (_, s)) in self.hyperedges.iter().enumerate() {
            for &i in s {
                w[(i, j)] = 1.0;
            }
        }
        w
    }

    /// Parse `{"hyperedges": {"a": ["1","2"], ...}, "nodes": [...]}`.
    /// The node list is optional; when absent, the sorted union of members
    /// is used. Hyperedges follow sorted label order.
    pub fn from_json(text: &str) -> Result<CombinatorialHypergraph> {
        let repr: HypergraphRepr =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("hypergraph JSON: {e}")))?;
        repr.build()
    }

    pub fn to_json(&self) -> String {
        let repr = HypergraphRepr {
            nodes: Some(self.nodes.clone()),
            hyperedges: self
                .hyperedges
                .iter()
                .map(|(l, s)| {
                    (
                        l.clone(),
                        s.iter().map(|&i| self.nodes[i].clone()).collect(),
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&repr).expect("hypergraph serialization cannot fail")
    }

    /// Parse the line-per-hyperedge format: `label: member member ...`.
    /// Blank lines and `#` comments are skipped; declaration order is kept.
    pub fn from_text(text: &str) -> Result<CombinatorialHypergraph> {
        let mut edges: Vec<(String, Vec<String>)> = Vec::new();
        let mut node_order: Vec<String> = Vec::new();
        let mut seen_nodes: BTreeSet<String> = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, rest) = line.split_once(':').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `label: members`", lineno + 1))
            })?;
            let label = label.trim().to_string();
            if label.is_empty() {
                return Err(Error::Parse(format!("line {}: empty label", lineno + 1)));
            }
            let members: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            for m in &members {
                if seen_nodes.insert(m.clone()) {
                    node_order.push(m.clone());
                }
            }
            edges.push((label, members));
        }
        CombinatorialHypergraph::new(node_order, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (l, s) in &self.hyperedges {
            out.push_str(l);
            out.push(':');
            for &i in s {
                out.push(' ');
                out.push_str(&self.nodes[i]);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct HypergraphRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<String>>,
    hyperedges: BTreeMap<String, Vec<String>>,
}

impl HypergraphRepr {
    fn build(self) -> Result<CombinatorialHypergraph> {
        let nodes = match self.nodes {
            Some(n) => n,
            None => {
                let set: BTreeSet<String> = self
                    .hyperedges
                    .values()
                    .flat_map(|ms| ms.iter().cloned())
                    .collect();
                set.into_iter().collect()
            }
        };
        let edges = self.hyperedges.into_iter().collect();
        CombinatorialHypergraph::new(nodes, edges)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuScheme {
    Uniform,
    Degree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuScheme {
    Uniform,
    DegreeSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaScheme {
    Incidence,
    JaccardSp,
    IntersectionSp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: MuScheme,
    pub nu: NuScheme,
    pub omega: OmegaScheme,
    /// When the line graph is disconnected under a shortest-path scheme,
    /// substitute (max finite distance + 1) instead of failing.
    pub allow_disconnected: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            mu: MuScheme::Degree,
            nu: NuScheme::DegreeSum,
            omega: OmegaScheme::JaccardSp,
            allow_disconnected: false,
        }
    }
}

impl ModelParams {
    pub fn uniform_incidence() -> Self {
        ModelParams {
            mu: MuScheme::Uniform,
            nu: NuScheme::Uniform,
            omega: OmegaScheme::Incidence,
            allow_disconnected: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineWeight {
    /// `1 / |y ∩ y'|`
    Intersection,
    /// `|y ∪ y'| / |y ∩ y'|`
    Jaccard,
}

fn intersection_union(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> (usize, usize) {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    (inter, union)
}

/// Line graph on the hyperedges with reciprocal-overlap edge weights and a
/// uniform measure; non-adjacent pairs (empty intersection) and the diagonal
/// carry 0, the non-edge sentinel of the dense representation.
pub fn weighted_line_graph(
    g: &CombinatorialHypergraph,
    weight: LineWeight,
) -> Result<MeasureNetwork> {
    let m = g.hyperedge_count();
    let mut w = Array2::zeros((m, m));
    for i in 0..m {
        for j in (i + 1)..m {
            let (inter, union) = intersection_union(g.members(i), g.members(j));
            if inter == 0 {
                continue;
            }
            let value = match weight {
                LineWeight::Intersection => 1.0 / inter as f64,
                LineWeight::Jaccard => union as f64 / inter as f64,
            };
            w[(i, j)] = value;
            w[(j, i)] = value;
        }
    }
    MeasureNetwork::uniform(g.hyperedge_labels(), w)
}

/// Deterministic binary-heap shortest paths; ties in the queue resolve by
/// node index. All edge weights must be nonnegative.
fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    #[derive(PartialEq)]
    struct Entry {
        dist: f64,
        node: usize,
    }
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            self.dist
                .total_cmp(&other.dist)
                .then(self.node.cmp(&other.node))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Entry {
        dist: 0.0,
        node: source,
    }));
    while let Some(Reverse(Entry { dist: d, node })) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(Reverse(Entry {
                    dist: nd,
                    node: next,
                }));
            }
        }
    }
    dist
}

fn line_graph_adjacency(
    g: &CombinatorialHypergraph,
    edge_weight: impl Fn(usize, usize) -> f64,
) -> Vec<Vec<(usize, f64)>> {
    let m = g.hyperedge_count();
    let mut adj = vec![Vec::new(); m];
    for i in 0..m {
        for j in (i + 1)..m {
            let (inter, _) = intersection_union(g.members(i), g.members(j));
            if inter == 0 {
                continue;
            }
            let w = edge_weight(i, j);
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    adj
}

/// Connected components of the line graph, each listed as sorted labels.
fn line_graph_components(g: &CombinatorialHypergraph) -> Vec<Vec<String>> {
    let m = g.hyperedge_count();
    let adj = line_graph_adjacency(g, |_, _| 1.0);
    let mut comp = vec![usize::MAX; m];
    let mut count = 0;
    for start in 0..m {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = count;
        while let Some(v) = stack.pop() {
            for &(u, _) in &adj[v] {
                if comp[u] == usize::MAX {
                    comp[u] = count;
                    stack.push(u);
                }
            }
        }
        count += 1;
    }
    let labels = g.hyperedge_labels();
    let mut out = vec![Vec::new(); count];
    for (i, &c) in comp.iter().enumerate() {
        out[c].push(labels[i].clone());
    }
    out
}

fn shortest_path_matrix(
    g: &CombinatorialHypergraph,
    adj: &[Vec<(usize, f64)>],
    allow_disconnected: bool,
) -> Result<Array2<f64>> {
    let m = g.hyperedge_count();
    let mut dist = Array2::from_elem((m, m), f64::INFINITY);
    for s in 0..m {
        let d = dijkstra(adj, s);
        for t in 0..m {
            dist[(s, t)] = d[t];
        }
    }
    if dist.iter().any(|&d| d.is_infinite()) {
        if !allow_disconnected {
            let comps = line_graph_components(g);
            let desc: Vec<String> = comps.iter().map(|c| format!("[{}]", c.join(", "))).collect();
            return Err(Error::Disconnected(format!(
                "line graph has {} components: {}",
                comps.len(),
                desc.join(" ")
            )));
        }
        let max_finite = dist
            .iter()
            .filter(|d| d.is_finite())
            .fold(0.0f64, |a, &b| a.max(b));
        dist.mapv_inplace(|d| if d.is_finite() { d } else { max_finite + 1.0 });
    }
    Ok(dist)
}

fn node_measure(g: &CombinatorialHypergraph, scheme: MuScheme) -> Result<Array1<f64>> {
    let n = g.node_count();
    match scheme {
        MuScheme::Uniform => Ok(Array1::from_elem(n, 1.0 / n as f64)),
        MuScheme::Degree => {
            let degs: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
            if let Some(i) = degs.iter().position(|&d| d == 0) {
                return Err(Error::InvalidMeasure(format!(
                    "node {:?} has degree 0; the degree scheme requires full support",
                    g.nodes()[i]
                )));
            }
            let total: usize = degs.iter().sum();
            Ok(Array1::from_iter(
                degs.iter().map(|&d| d as f64 / total as f64),
            ))
        }
    }
}

fn hyperedge_measure(g: &CombinatorialHypergraph, scheme: NuScheme) -> Result<Array1<f64>> {
    let m = g.hyperedge_count();
    match scheme {
        NuScheme::Uniform => Ok(Array1::from_elem(m, 1.0 / m as f64)),
        NuScheme::DegreeSum => {
            let sums: Vec<usize> = (0..m)
                .map(|j| g.members(j).iter().map(|&i| g.degree(i)).sum())
                .collect();
            let total: usize = sums.iter().sum();
            Ok(Array1::from_iter(
                sums.iter().map(|&s| s as f64 / total as f64),
            ))
        }
    }
}

/// Model a hypergraph as a measure hypernetwork under the chosen schemes.
/// Shortest-path relations: `omega(x, y)` is the minimum line-graph distance
/// from any hyperedge containing `x` to `y`, so membership gives 0.
pub fn build_hypernetwork(
    g: &CombinatorialHypergraph,
    params: &ModelParams,
) -> Result<MeasureHypernetwork> {
    let mu = node_measure(g, params.mu)?;
    let nu = hyperedge_measure(g, params.nu)?;
    let (n, m) = (g.node_count(), g.hyperedge_count());
    let omega = match params.omega {
        OmegaScheme::Incidence => g.incidence_matrix(),
        OmegaScheme::JaccardSp | OmegaScheme::IntersectionSp => {
            let weight = match params.omega {
                OmegaScheme::JaccardSp => LineWeight::Jaccard,
                _ => LineWeight::Intersection,
            };
            let adj = line_graph_adjacency(g, |i, j| {
                let (inter, union) = intersection_union(g.members(i), g.members(j));
                match weight {
                    LineWeight::Intersection => 1.0 / inter as f64,
                    LineWeight::Jaccard => union as f64 / inter as f64,
                }
            });
            let dist = shortest_path_matrix(g, &adj, params.allow_disconnected)?;
            min_over_containing(g, &dist, n, m)
        }
    };
    MeasureHypernetwork::new(g.nodes().to_vec(), g.hyperedge_labels(), mu, nu, omega)
}

fn min_over_containing(
    g: &CombinatorialHypergraph,
    dist: &Array2<f64>,
    n: usize,
    m: usize,
) -> Array2<f64> {
    let mut omega = Array2::zeros((n, m));
    for x in 0..n {
        let containing: Vec<usize> = (0..m).filter(|&j| g.members(j).contains(&x)).collect();
        for y in 0..m {
            let best = containing
                .iter()
                .map(|&j| dist[(j, y)])
                .fold(f64::INFINITY, f64::min);
            omega[(x, y)] = best;
        }
    }
    omega
}

/// Node-to-hyperedge distances where hyperedge paths are weighted by the
/// *size* of sequential overlaps (sum along the path), minimized over the
/// hyperedges containing the node. Membership gives 0.
pub fn hyperedge_overlap_sp(g: &CombinatorialHypergraph) -> Result<Array2<f64>> {
    let adj = line_graph_adjacency(g, |i, j| {
        let (inter, _) = intersection_union(g.members(i), g.members(j));
        inter as f64
    });
    let dist = shortest_path_matrix(g, &adj, false)?;
    Ok(min_over_containing(
        g,
        &dist,
        g.node_count(),
        g.hyperedge_count(),
    ))
}
