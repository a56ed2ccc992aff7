//! Multiscale graph matching.
//!
//! Step 1 reduces a graph through heat-diffusion covers: diffuse from a
//! seed, mark everything above half the peak as visited, keep everything
//! above a quarter of the peak as a cover element, and repeat until covered.
//! The nerve of the cover (elements as nodes, edges on overlap) is the next,
//! smaller graph. Step 2 matches two such reduction sequences level by
//! level with a cyclic block-coordinate descent in which the hyperedge
//! coupling of one level is, structurally, the node coupling of the next.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coot::{cost_for_pi, cost_for_xi, solve_block};
use crate::error::{Error, Result};
use crate::hypernet::{
    coot_distortion, Coupling, DistanceParams, MeasureHypernetwork, Order, Solver,
};
use crate::model::{build_hypernetwork, CombinatorialHypergraph, ModelParams};
use crate::ot::sinkhorn_projection;
use crate::spectral::{heat_kernel_column, laplacian_eigs};
use crate::tol;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

// ---------------------------------------------------------------------------
// Simple graphs
// ---------------------------------------------------------------------------

/// Undirected graph with labeled nodes and positively weighted edges.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleGraph {
    nodes: Vec<String>,
    /// Normalized to i < j; no duplicates, no self-loops.
    edges: Vec<(usize, usize, f64)>,
}

impl SimpleGraph {
    pub fn new(nodes: Vec<String>, edges: Vec<(String, String, Option<f64>)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParams("graph has no nodes".into()));
        }
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.as_str(), i).is_some() {
                return Err(Error::InvalidParams(format!("duplicate node label {n:?}")));
            }
        }
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (u, v, w) in edges {
            let iu = *index
                .get(u.as_str())
                .ok_or_else(|| Error::InvalidParams(format!("undeclared endpoint {u:?}")))?;
            let iv = *index
                .get(v.as_str())
                .ok_or_else(|| Error::InvalidParams(format!("undeclared endpoint {v:?}")))?;
            if iu == iv {
                return Err(Error::InvalidParams(format!("self-loop at {u:?}")));
            }
            let w = w.unwrap_or(1.0);
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "edge ({u}, {v}) has nonpositive weight {w}"
                )));
            }
            let key = (iu.min(iv), iu.max(iv));
            if !seen.insert(key) {
                return Err(Error::InvalidParams(format!("duplicate edge ({u}, {v})")));
            }
            out.push((key.0, key.1, w));
        }
        Ok(SimpleGraph { nodes, edges: out })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn adjacency_matrix(&self) -> Array2<f64> {
        let n = self.nodes.len();
        let mut a = Array2::zeros((n, n));
        for &(i, j, w) in &self.edges {
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        a
    }

    fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let adj = self.neighbor_lists();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == n
    }

    /// Unweighted hop distances from a source; `None` when unreachable.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let n = self.nodes.len();
        let adj = self.neighbor_lists();
        let mut dist = vec![None; n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &u in &adj[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Largest finite hop distance over all pairs.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        for s in 0..self.nodes.len() {
            for d in self.bfs_distances(s).into_iter().flatten() {
                best = best.max(d);
            }
        }
        best
    }

    /// Same structure under new labels; `perm[i]` is the new position of
    /// node `i`, so node `i`'s label becomes `labels[perm[i]]`.
    pub fn relabeled(&self, labels: Vec<String>, perm: &[usize]) -> Result<SimpleGraph> {
        if labels.len() != self.nodes.len() || perm.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch(
                "relabeling needs one label and one position per node".into(),
            ));
        }
        let edges = self
            .edges
            .iter()
            .map(|&(i, j, w)| (labels[perm[i]].clone(), labels[perm[j]].clone(), Some(w)))
            .collect();
        let mut new_nodes = vec![String::new(); labels.len()];
        for (i, &p) in perm.iter().enumerate() {
            new_nodes[p] = labels[p].clone();
            let _ = i;
        }
        SimpleGraph::new(new_nodes, edges)
    }

    /// Parse a whitespace edge list: one `u v [w]` per line, `#` comments.
    pub fn from_edge_list(text: &str) -> Result<SimpleGraph> {
        let mut nodes: Vec<String> = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 && parts.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected `u v [w]`, got {:?}",
                    lineno + 1,
                    line
                )));
            }
            let w = match parts.get(2) {
                Some(raw) => Some(raw.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: bad weight {raw:?}: {e}", lineno + 1))
                })?),
                None => None,
            };
            for label in &parts[..2] {
                if seen.insert(label.to_string()) {
                    nodes.push(label.to_string());
                }
            }
            edges.push((parts[0].to_string(), parts[1].to_string(), w));
        }
        SimpleGraph::new(nodes, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(i, j, w) in &self.edges {
            out.push_str(&format!("{} {} {}\n", self.nodes[i], self.nodes[j], w));
        }
        out
    }

    /// Parse `{"nodes": [...], "edges": [["u","v"], ["u","v",w], ...]}`;
    /// the node list is optional (endpoint order of appearance then).
    pub fn from_json(text: &str) -> Result<SimpleGraph> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("graph JSON must be an object".into()))?;
        let mut edges = Vec::new();
        let raw_edges = obj
            .get("edges")
            .and_then(|e| e.as_array())
            .ok_or_else(|| Error::Parse("graph JSON needs an \"edges\" array".into()))?;
        for (k, e) in raw_edges.iter().enumerate() {
            let arr = e
                .as_array()
                .filter(|a| a.len() == 2 || a.len() == 3)
                .ok_or_else(|| {
                    Error::Parse(format!("edge {k}: expected [u, v] or [u, v, w]"))
                })?;
            let u = arr[0]
                .as_str()
                .ok_or_else(|| Error::Parse(format!("edge {k}: endpoints must be strings")))?;
            let v = arr[1]
                .as_str()
                .ok_or_else(|| Error::Parse(format!("edge {k}: endpoints must be strings")))?;
            let w = match arr.get(2) {
                Some(x) => Some(
                    x.as_f64()
                        .ok_or_else(|| Error::Parse(format!("edge {k}: weight must be a number")))?,
                ),
                None => None,
            };
            edges.push((u.to_string(), v.to_string(), w));
        }
        let nodes = match obj.get("nodes") {
            Some(list) => list
                .as_array()
                .ok_or_else(|| Error::Parse("\"nodes\" must be an array".into()))?
                .iter()
                .map(|n| {
                    n.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| Error::Parse("node labels must be strings".into()))
                })
                .collect::<Result<Vec<_>>>()?,
            None => {
                let mut nodes = Vec::new();
                let mut seen = BTreeSet::new();
                for (u, v, _) in &edges {
                    for label in [u, v] {
                        if seen.insert(label.clone()) {
                            nodes.push(label.clone());
                        }
                    }
                }
                nodes
            }
        };
        SimpleGraph::new(nodes, edges)
    }

    pub fn to_json(&self) -> String {
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|&(i, j, w)| {
                serde_json::json!([self.nodes[i], self.nodes[j], w])
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "nodes": self.nodes,
            "edges": edges,
        }))
        .expect("graph serialization cannot fail")
    }
}

// ---------------------------------------------------------------------------
// Heat-kernel covers and iterated nerves
// ---------------------------------------------------------------------------

/// A cover of a graph's node set: labeled elements whose union is the whole
/// node set (indices refer to the covered graph).
pub type Cover = Vec<(String, BTreeSet<usize>)>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    /// Diffusion time override; default is log10 of the node count.
    pub t_override: Option<f64>,
    /// Eigenpair budget; `None` uses a full decomposition up to the dense
    /// size limit and the default budget beyond it.
    pub eig_budget: Option<usize>,
    /// Seeded random selection of diffusion sources; default is the lowest
    /// unvisited label.
    pub random_seed: Option<u64>,
}

impl Default for CoverParams {
    fn default() -> Self {
        CoverParams {
            t_override: None,
            eig_budget: None,
            random_seed: None,
        }
    }
}

/// One heat-diffusion cover pass: returns the cover and its nerve graph.
///
/// Seeds diffuse one at a time; everything reaching half the peak value is
/// marked visited, everything reaching a quarter of the peak forms a cover
/// element (the full-width-at-half/quarter-maximum rule). The seed itself is
/// always visited and always in its element.
pub fn heat_kernel_cover(
    g: &SimpleGraph,
    t: f64,
    eig_budget: Option<usize>,
    random_seed: Option<u64>,
) -> Result<(Cover, SimpleGraph)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!(
            "diffusion time must be positive and finite, got {t}"
        )));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected(
            "heat-kernel covers need a connected graph".into(),
        ));
    }
    let n = g.node_count();
    let eigs = laplacian_eigs(&g.adjacency_matrix(), eig_budget)?;

    // label order for deterministic seed selection
    let mut label_order: Vec<usize> = (0..n).collect();
    label_order.sort_by(|&a, &b| g.nodes()[a].cmp(&g.nodes()[b]));
    let mut rng = random_seed.map(ChaCha8Rng::seed_from_u64);

    let mut visited = vec![false; n];
    let mut cover: Cover = Vec::new();
    while visited.iter().any(|&v| !v) {
        let unvisited: Vec<usize> = label_order
            .iter()
            .copied()
            .filter(|&i| !visited[i])
            .collect();
        let seed = match rng.as_mut() {
            Some(r) => unvisited[r.random_range(0..unvisited.len())],
            None => unvisited[0],
        };
        let v = heat_kernel_column(&eigs, t, seed)?;
        let vmax = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut element = BTreeSet::from([seed]);
        visited[seed] = true;
        for i in 0..n {
            if v[i] >= vmax / 2.0 {
                visited[i] = true;
            }
            if v[i] >= vmax / 4.0 {
                element.insert(i);
            }
        }
        cover.push((format!("c{}", cover.len()), element));
    }

    let nerve_nodes: Vec<String> = cover.iter().map(|(l, _)| l.clone()).collect();
    let mut nerve_edges = Vec::new();
    for i in 0..cover.len() {
        for j in (i + 1)..cover.len() {
            if !cover[i].1.is_disjoint(&cover[j].1) {
                nerve_edges.push((nerve_nodes[i].clone(), nerve_nodes[j].clone(), None));
            }
        }
    }
    let nerve = SimpleGraph::new(nerve_nodes, nerve_edges)?;
    Ok((cover, nerve))
}

/// One graph in a reduction sequence, with the cover that produced it from
/// the previous level (`None` for the original graph).
#[derive(Clone, Debug)]
pub struct Level {
    pub graph: SimpleGraph,
    pub cover_from_previous: Option<Cover>,
}

#[derive(Clone, Debug)]
pub struct CoverSequence {
    pub levels: Vec<Level>,
    /// True when the reduction stopped because a pass failed to shrink the
    /// graph, rather than by reaching the size threshold.
    pub stalled: bool,
}

impl CoverSequence {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.graph.node_count()).collect()
    }
}

/// Iterate heat-kernel covers with per-level diffusion time log10(|V|)
/// (unless overridden) until the node count drops below `n_alpha`, the
/// graph stops shrinking, or a single node remains.
pub fn iterated_nerve(
    g: &SimpleGraph,
    n_alpha: usize,
    params: &CoverParams,
) -> Result<CoverSequence> {
    if n_alpha < 1 {
        return Err(Error::InvalidParams("n_alpha must be at least 1".into()));
    }
    if let Some(t) = params.t_override {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParams(format!(
                "diffusion time override must be positive and finite, got {t}"
            )));
        }
    }
    let mut levels = vec![Level {
        graph: g.clone(),
        cover_from_previous: None,
    }];
    let mut stalled = false;
    loop {
        let current = &levels.last().unwrap().graph;
        let n = current.node_count();
        if n < n_alpha || n == 1 {
            break;
        }
        let t = params.t_override.unwrap_or_else(|| (n as f64).log10());
        let (cover, nerve) = heat_kernel_cover(current, t, params.eig_budget, params.random_seed)?;
        if nerve.node_count() >= n {
            stalled = true;
            break;
        }
        levels.push(Level {
            graph: nerve,
            cover_from_previous: Some(cover),
        });
    }
    Ok(CoverSequence { levels, stalled })
}

/// The hypergraph at each interface of a sequence: nodes of level `i`,
/// hyperedges the cover elements that built level `i+1`.
pub fn cover_hypergraphs(seq: &CoverSequence) -> Result<Vec<CombinatorialHypergraph>> {
    let mut out = Vec::new();
    for i in 0..seq.levels.len().saturating_sub(1) {
        let base = &seq.levels[i].graph;
        let next = &seq.levels[i + 1];
        let cover = next.cover_from_previous.as_ref().ok_or_else(|| {
            Error::Internal(format!("level {} is missing its cover", i + 1))
        })?;
        if cover.len() != next.graph.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "cover at interface {i} has {} elements but the next level has {} nodes",
                cover.len(),
                next.graph.node_count()
            )));
        }
        let edges: Vec<(String, Vec<String>)> = cover
            .iter()
            .map(|(label, members)| {
                (
                    label.clone(),
                    members.iter().map(|&m| base.nodes()[m].clone()).collect(),
                )
            })
            .collect();
        out.push(CombinatorialHypergraph::new(base.nodes().to_vec(), edges)?);
    }
    Ok(out)
}

/// Transport a reduction sequence along a node relabeling of its base
/// graph: level 0 becomes the relabeled graph, its cover elements are
/// mapped through the same positions, and deeper levels are untouched.
/// The result is the sequence the relabeled copy inherits from the
/// original — exactly matchable, so it provides ground truth for
/// evaluating the matcher.
pub fn relabel_sequence(
    seq: &CoverSequence,
    labels: Vec<String>,
    perm: &[usize],
) -> Result<CoverSequence> {
    let mut levels = seq.levels.clone();
    if levels.is_empty() {
        return Err(Error::InvalidParams("empty sequence".into()));
    }
    levels[0].graph = levels[0].graph.relabeled(labels, perm)?;
    if let Some(level) = levels.get_mut(1) {
        if let Some(cover) = level.cover_from_previous.as_mut() {
            for (_, element) in cover.iter_mut() {
                *element = element.iter().map(|&i| perm[i]).collect();
            }
        }
    }
    Ok(CoverSequence {
        levels,
        stalled: seq.stalled,
    })
}

/// Extend a sequence to `depth` levels by covering everything with a single
/// element per added level.
fn pad_sequence(mut seq: CoverSequence, depth: usize) -> Result<CoverSequence> {
    while seq.levels.len() < depth {
        let current = &seq.levels.last().unwrap().graph;
        let all: BTreeSet<usize> = (0..current.node_count()).collect();
        let label = format!("pad{}", seq.levels.len());
        let cover: Cover = vec![(label.clone(), all)];
        let nerve = SimpleGraph::new(vec![label], Vec::new())?;
        seq.levels.push(Level {
            graph: nerve,
            cover_from_previous: Some(cover),
        });
    }
    Ok(seq)
}

// ---------------------------------------------------------------------------
// Algorithm: cyclic block-coordinate descent across levels
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub restart: usize,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Total objective after the initialization and after each sweep.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MultiscaleMatch {
    /// Interface couplings: entry 0 couples the original node sets; entry
    /// `i >= 1` couples the cover elements of interface `i-1` and serves as
    /// both the hyperedge coupling of level `i-1` and the node coupling of
    /// level `i`.
    pub couplings: Vec<Coupling>,
    /// Sum over levels of the p-th power of the level distortion.
    pub total_objective: f64,
    pub objectives: Vec<f64>,
    pub best_restart: usize,
    pub restarts: Vec<SweepReport>,
    /// True when the shorter sequence was padded with trivial covers.
    pub padded: bool,
    /// True when all interface marginals matched and restart 0 started from
    /// diagonal couplings.
    pub diagonal_init: bool,
}

/// Hypernetworks for every interface, with the node measure of each level
/// forced to equal the hyperedge measure of the previous one so that a
/// single coupling can serve both roles.
fn level_hypernetworks(
    seq: &CoverSequence,
    model: &ModelParams,
) -> Result<Vec<MeasureHypernetwork>> {
    let hypergraphs = cover_hypergraphs(seq)?;
    let mut out: Vec<MeasureHypernetwork> = Vec::with_capacity(hypergraphs.len());
    for (i, hg) in hypergraphs.iter().enumerate() {
        let h = build_hypernetwork(hg, model)?;
        let h = if i == 0 {
            h
        } else {
            let chained_mu = out[i - 1].nu().clone();
            MeasureHypernetwork::new(
                h.node_ids().to_vec(),
                h.hyperedge_ids().to_vec(),
                chained_mu,
                h.nu().clone(),
                h.omega().clone(),
            )?
        };
        out.push(h);
    }
    Ok(out)
}

struct Chain<'a> {
    ha: &'a [MeasureHypernetwork],
    hb: &'a [MeasureHypernetwork],
    /// Marginals for stored coupling `i` on each side.
    a: Vec<Array1<f64>>,
    b: Vec<Array1<f64>>,
}

impl<'a> Chain<'a> {
    fn new(ha: &'a [MeasureHypernetwork], hb: &'a [MeasureHypernetwork]) -> Self {
        let mut a = vec![ha[0].mu().clone()];
        let mut b = vec![hb[0].mu().clone()];
        for (x, y) in ha.iter().zip(hb) {
            a.push(x.nu().clone());
            b.push(y.nu().clone());
        }
        Chain { ha, hb, a, b }
    }

    fn interfaces(&self) -> usize {
        self.ha.len()
    }

    fn total(&self, ms: &[Coupling], p: Order) -> Result<f64> {
        let pv = p.get();
        let mut total = 0.0;
        for i in 0..self.interfaces() {
            let d = coot_distortion(&self.ha[i], &self.hb[i], &ms[i], &ms[i + 1], p)?;
            total += d.powf(pv);
        }
        Ok(total)
    }

    fn diagonal_possible(&self) -> bool {
        self.a.iter().zip(&self.b).all(|(x, y)| {
            x.len() == y.len()
                && x.iter()
                    .zip(y.iter())
                    .all(|(&u, &v)| (u - v).abs() <= tol::MASS_TOL)
        })
    }

    fn product_start(&self) -> Vec<Coupling> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(x, y)| Coupling::product(x, y))
            .collect()
    }

    fn diagonal_start(&self) -> Vec<Coupling> {
        self.a.iter().map(Coupling::diagonal).collect()
    }

    fn random_start(&self, seed: u64) -> Vec<Coupling> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.a
            .iter()
            .zip(&self.b)
            .map(|(x, y)| {
                let raw = Array2::from_shape_fn((x.len(), y.len()), |_| {
                    let e: f64 = rng.sample(Exp1);
                    e.max(f64::MIN_POSITIVE)
                });
                Coupling::from_matrix_unchecked(sinkhorn_projection(
                    raw,
                    x,
                    y,
                    tol::PROJECTION_ITERS,
                ))
            })
            .collect()
    }

    fn bcd(
        &self,
        restart: usize,
        mut ms: Vec<Coupling>,
        params: &DistanceParams,
    ) -> Result<(SweepReport, Vec<Coupling>)> {
        let p = params.p;
        let mut prev = self.total(&ms, p)?;
        let mut trace = vec![prev];
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < params.max_iter {
            sweeps += 1;
            let snapshot = ms.clone();
            for i in 0..self.interfaces() {
                let cost = cost_for_xi(&self.ha[i], &self.hb[i], &ms[i], p)?;
                ms[i + 1] = solve_block(&self.a[i + 1], &self.b[i + 1], cost, params)?;
            }
            for i in (0..self.interfaces()).rev() {
                let cost = cost_for_pi(&self.ha[i], &self.hb[i], &ms[i + 1], p)?;
                ms[i] = solve_block(&self.a[i], &self.b[i], cost, params)?;
            }
            let total = self.total(&ms, p)?;
            if total > prev + tol::DESCENT_SLACK {
                // a cyclic sweep is not a joint minimization, so a rare
                // ascent is possible; roll back and stop
                ms = snapshot;
                trace.push(prev);
                break;
            }
            trace.push(total);
            if (prev - total).abs() <= params.tol * prev.abs().max(1.0) {
                converged = true;
                prev = total;
                break;
            }
            prev = total;
        }
        Ok((
            SweepReport {
                restart,
                objective: prev,
                sweeps,
                converged,
                trace,
            },
            ms,
        ))
    }
}

/// Match two reduction sequences level by level. Couplings are shared
/// across adjacent levels, forward sweeps update each interface from the
/// level above it, backward sweeps from the level below. Multistart with
/// the same restart budget as the plain distance solver; restart 0 starts
/// diagonal when the two sequences have identical marginals everywhere.
pub fn multiscale_match(
    seq_a: &CoverSequence,
    seq_b: &CoverSequence,
    model: &ModelParams,
    params: &DistanceParams,
) -> Result<MultiscaleMatch> {
    params.validate()?;
    if params.p.is_infinite() {
        return Err(Error::InvalidParams(
            "multiscale matching requires a finite order".into(),
        ));
    }
    let depth = seq_a.depth().max(seq_b.depth()).max(2);
    let padded = seq_a.depth() != depth || seq_b.depth() != depth;
    let seq_a = pad_sequence(seq_a.clone(), depth)?;
    let seq_b = pad_sequence(seq_b.clone(), depth)?;

    let ha = level_hypernetworks(&seq_a, model)?;
    let hb = level_hypernetworks(&seq_b, model)?;
    let chain = Chain::new(&ha, &hb);
    let diagonal_init = chain.diagonal_possible();

    let runs: Result<Vec<(SweepReport, Vec<Coupling>)>> = (0..params.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let start = match (r, diagonal_init) {
                (0, true) => chain.diagonal_start(),
                (0, false) | (1, true) => chain.product_start(),
                _ => chain.random_start(params.seed ^ r as u64),
            };
            chain.bcd(r, start, params)
        })
        .collect();
    let runs = runs?;

    let best = runs
        .iter()
        .enumerate()
        .min_by(|(_, (ra, _)), (_, (rb, _))| {
            ra.objective
                .total_cmp(&rb.objective)
                .then(ra.restart.cmp(&rb.restart))
        })
        .map(|(i, _)| i)
        .expect("at least one restart");

    let (best_report, couplings) = runs[best].clone();
    Ok(MultiscaleMatch {
        couplings,
        total_objective: best_report.objective,
        objectives: best_report.trace.clone(),
        best_restart: best_report.restart,
        restarts: runs.into_iter().map(|(r, _)| r).collect(),
        padded,
        diagonal_init,
    })
}

// ---------------------------------------------------------------------------
// Hard matching and evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardMatch {
    /// For each row, the column with the largest mass (lowest index wins
    /// ties).
    pub assignment: Vec<usize>,
    /// Rows whose maximum was attained more than once — low confidence.
    pub tie_rows: Vec<usize>,
}

pub fn hard_match(pi: &Coupling) -> HardMatch {
    let m = pi.matrix();
    let mut assignment = Vec::with_capacity(m.nrows());
    let mut tie_rows = Vec::new();
    for i in 0..m.nrows() {
        let row = m.row(i);
        let mut best = 0usize;
        let mut count = 1usize;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
                count = 1;
            } else if row[j] == row[best] {
                count += 1;
            }
        }
        if count > 1 {
            tie_rows.push(i);
        }
        assignment.push(best);
    }
    HardMatch {
        assignment,
        tie_rows,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchAccuracy {
    /// Fraction of nodes matched exactly to their true image.
    pub exact_rate: f64,
    /// Mean hop distance in the target graph between the matched node and
    /// the true one.
    pub mean_graph_distance: f64,
    /// Pairs with no path between them; each counted as diameter + 1.
    pub unreachable_pairs: usize,
}

/// Compare a hard assignment against ground truth; distances are measured
/// in the target graph between the assigned and true images.
pub fn match_accuracy(
    assignment: &[usize],
    truth: &[usize],
    target: &SimpleGraph,
) -> Result<MatchAccuracy> {
    if assignment.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "assignment covers {} nodes, ground truth {}",
            assignment.len(),
            truth.len()
        )));
    }
    let n_target = target.node_count();
    for &v in assignment.iter().chain(truth) {
        if v >= n_target {
            return Err(Error::InvalidParams(format!(
                "node index {v} out of range for the target graph ({n_target} nodes)"
            )));
        }
    }
    let mut exact = 0usize;
    let mut total = 0.0;
    let mut unreachable = 0usize;
    let mut bfs_cache: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
    let mut diameter: Option<usize> = None;
    for (&got, &want) in assignment.iter().zip(truth) {
        if got == want {
            exact += 1;
        }
        let dist = bfs_cache
            .entry(got)
            .or_insert_with(|| target.bfs_distances(got))[want];
        match dist {
            Some(d) => total += d as f64,
            None => {
                let dia = *diameter.get_or_insert_with(|| target.diameter());
                total += (dia + 1) as f64;
                unreachable += 1;
            }
        }
    }
    let n = assignment.len() as f64;
    Ok(MatchAccuracy {
        exact_rate: exact as f64 / n,
        mean_graph_distance: total / n,
        unreachable_pairs: unreachable,
    })
}

/// Plain COOT objective for a pair of hypernetworks at given couplings,
/// as the p-th power so values add across levels.
pub fn level_objective(
    h1: &MeasureHypernetwork,
    h2: &MeasureHypernetwork,
    pi: &Coupling,
    xi: &Coupling,
    p: Order,
) -> Result<f64> {
    Ok(coot_distortion(h1, h2, pi, xi, p)?.powf(p.get()))
}

// keep the solver enum referenced so intent is explicit at the call sites
const _: fn() = || {
    let _ = Solver::Exact;
};
