//! Measure-aware hypergraph simplification.
//!
//! A minimum spanning tree of the weighted line graph (or of the dual's
//! line graph, for node merging) orders merges from most to least similar.
//! Edges of equal weight merge simultaneously as one step. Each step yields
//! a smaller hypergraph and its hypernetwork model; the distance curve back
//! to the original reveals how much structure each step destroyed, and an
//! elbow in that curve suggests where to stop simplifying.

use std::collections::BTreeMap;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coot::coot_distance;
use crate::error::{Error, Result};
use crate::hypernet::{DistanceParams, MeasureHypernetwork};
use crate::model::{
    build_hypernetwork, weighted_line_graph, CombinatorialHypergraph, LineWeight, ModelParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplifyMode {
    /// Merge hyperedges along the line graph's MST.
    Hyperedge,
    /// Merge nodes along the MST of the dual's line graph.
    Node,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureHandling {
    /// Re-derive all measures from each simplified hypergraph (degree-based
    /// measures are recomputed per level).
    Remodel,
    /// Push the original masses forward: a merged item carries the sum of
    /// its constituents' mass; the untouched side keeps its measure. The
    /// relation matrix is still re-derived from the merged hypergraph.
    Preserve,
}

#[derive(Clone, Debug)]
pub struct SimplificationStep {
    /// Merge weight of this step; `None` for the initial hypergraph.
    pub weight: Option<f64>,
    /// Label pairs merged at this step (original item labels).
    pub merged: Vec<(String, String)>,
    pub hypergraph: CombinatorialHypergraph,
    pub hypernetwork: MeasureHypernetwork,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub weight: Option<f64>,
    /// Distance reached by every restart, in restart order.
    pub distances: Vec<f64>,
    pub min_distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElbowReport {
    /// Step indices ranked by backward second difference, largest first;
    /// at most three entries.
    pub candidates: Vec<(usize, f64)>,
    /// True when even the best score is indistinguishable from zero.
    pub no_elbow: bool,
}

#[derive(Clone, Debug)]
pub struct SimplificationTrace {
    pub mode: SimplifyMode,
    pub measures: MeasureHandling,
    pub model: ModelParams,
    pub weight: LineWeight,
    /// `steps[0]` is the unsimplified input; later entries merge
    /// cumulatively at nondecreasing weights.
    pub steps: Vec<SimplificationStep>,
    pub curve: Option<Vec<CurvePoint>>,
    pub elbow: Option<ElbowReport>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // keep the smaller index as the root for deterministic grouping
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

/// Weighted edges of the merge graph: hyperedge overlaps (hyperedge mode)
/// or, in node mode, the same construction on the dual.
fn merge_edges(
    g: &CombinatorialHypergraph,
    mode: SimplifyMode,
    weight: LineWeight,
) -> Result<(Vec<String>, Vec<(usize, usize, f64)>)> {
    let base = match mode {
        SimplifyMode::Hyperedge => g.clone(),
        SimplifyMode::Node => g.dual()?,
    };
    let net = weighted_line_graph(&base, weight)?;
    let labels = base.hyperedge_labels();
    let m = labels.len();
    let mut edges = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let w = net.omega()[(i, j)];
            if w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    Ok((labels, edges))
}

/// Kruskal MST; edges sorted by (weight, endpoint labels) for determinism.
fn minimum_spanning_tree(
    labels: &[String],
    mut edges: Vec<(usize, usize, f64)>,
) -> Result<Vec<(usize, usize, f64)>> {
    let m = labels.len();
    edges.sort_by(|a, b| {
        a.2.total_cmp(&b.2)
            .then_with(|| labels[a.0].cmp(&labels[b.0]))
            .then_with(|| labels[a.1].cmp(&labels[b.1]))
    });
    let mut uf = UnionFind::new(m);
    let mut tree = Vec::with_capacity(m.saturating_sub(1));
    for (i, j, w) in edges {
        if uf.union(i, j) {
            tree.push((i, j, w));
        }
    }
    if tree.len() + 1 < m {
        // list the components for the error message
        let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for i in 0..m {
            let root = uf.find(i);
            groups.entry(root).or_default().push(labels[i].clone());
        }
        let desc: Vec<String> = groups
            .values()
            .map(|c| format!("[{}]", c.join(", ")))
            .collect();
        return Err(Error::Disconnected(format!(
            "merge graph has {} components: {}",
            groups.len(),
            desc.join(" ")
        )));
    }
    Ok(tree)
}

/// Group items by union-find class, ordered by smallest member index; each
/// group's label joins the constituent labels with `+` in sorted order.
fn groups_of(uf: &mut UnionFind, labels: &[String]) -> Vec<(String, Vec<usize>)> {
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..labels.len() {
        let root = uf.find(i);
        by_root.entry(root).or_default().push(i);
    }
    by_root
        .into_values()
        .map(|members| {
            let mut names: Vec<&str> = members.iter().map(|&i| labels[i].as_str()).collect();
            names.sort_unstable();
            (names.join("+"), members)
        })
        .collect()
}

fn merged_hypergraph(
    g: &CombinatorialHypergraph,
    mode: SimplifyMode,
    uf: &mut UnionFind,
    labels: &[String],
) -> Result<CombinatorialHypergraph> {
    let groups = groups_of(uf, labels);
    match mode {
        SimplifyMode::Hyperedge => {
            let mut edges = Vec::with_capacity(groups.len());
            for (label, members) in &groups {
                let mut union: Vec<String> = Vec::new();
                for &j in members {
                    for node in g.member_labels(j) {
                        if !union.contains(&node) {
                            union.push(node);
                        }
                    }
                }
                edges.push((label.clone(), union));
            }
            CombinatorialHypergraph::new(g.nodes().to_vec(), edges)
        }
        SimplifyMode::Node => {
            // group index for each original node label
            let mut node_group: BTreeMap<&str, &str> = BTreeMap::new();
            for (label, members) in &groups {
                for &i in members {
                    node_group.insert(labels[i].as_str(), label.as_str());
                }
            }
            let nodes: Vec<String> = groups.iter().map(|(l, _)| l.clone()).collect();
            let mut edges = Vec::with_capacity(g.hyperedge_count());
            for (j, label) in g.hyperedge_labels().into_iter().enumerate() {
                let mut members: Vec<String> = Vec::new();
                for node in g.member_labels(j) {
                    let mapped = node_group[node.as_str()].to_string();
                    if !members.contains(&mapped) {
                        members.push(mapped);
                    }
                }
                edges.push((label, members));
            }
            CombinatorialHypergraph::new(nodes, edges)
        }
    }
}

/// Push step-0 masses onto merged items by summation; the relation matrix
/// comes from remodeling the merged hypergraph.
fn preserved_hypernetwork(
    base: &MeasureHypernetwork,
    merged: &CombinatorialHypergraph,
    remodeled: &MeasureHypernetwork,
    mode: SimplifyMode,
) -> Result<MeasureHypernetwork> {
    let constituent_mass = |group_label: &str, source_ids: &[String], source: &Array1<f64>| {
        group_label
            .split('+')
            .map(|part| {
                let idx = source_ids.iter().position(|id| id == part).expect(
                    "merged labels are joins of original labels",
                );
                source[idx]
            })
            .sum::<f64>()
    };
    let (mu, nu) = match mode {
        SimplifyMode::Hyperedge => {
            let nu = Array1::from_iter(merged.hyperedge_labels().iter().map(|label| {
                constituent_mass(label, base.hyperedge_ids(), base.nu())
            }));
            (base.mu().clone(), nu)
        }
        SimplifyMode::Node => {
            let mu = Array1::from_iter(
                merged
                    .nodes()
                    .iter()
                    .map(|label| constituent_mass(label, base.node_ids(), base.mu())),
            );
            (mu, base.nu().clone())
        }
    };
    MeasureHypernetwork::new(
        merged.nodes().to_vec(),
        merged.hyperedge_labels(),
        mu,
        nu,
        remodeled.omega().clone(),
    )
}

/// Build the merge sequence: MST batches of equal weight applied
/// cumulatively, each step remodeled (or mass-preserved) into a
/// hypernetwork. The distance curve is left empty.
pub fn simplification_sequence(
    g: &CombinatorialHypergraph,
    mode: SimplifyMode,
    weight: LineWeight,
    measures: MeasureHandling,
    model: &ModelParams,
) -> Result<SimplificationTrace> {
    let (labels, edges) = merge_edges(g, mode, weight)?;
    let tree = minimum_spanning_tree(&labels, edges)?;

    let base = build_hypernetwork(g, model)?;
    let mut steps = vec![SimplificationStep {
        weight: None,
        merged: Vec::new(),
        hypergraph: g.clone(),
        hypernetwork: base.clone(),
    }];

    let mut uf = UnionFind::new(labels.len());
    let mut start = 0;
    while start < tree.len() {
        let w = tree[start].2;
        let mut end = start;
        while end < tree.len() && tree[end].2 == w {
            end += 1;
        }
        let mut merged_pairs = Vec::with_capacity(end - start);
        for &(i, j, _) in &tree[start..end] {
            uf.union(i, j);
            merged_pairs.push((labels[i].clone(), labels[j].clone()));
        }
        let hypergraph = merged_hypergraph(g, mode, &mut uf, &labels)?;
        let remodeled = build_hypernetwork(&hypergraph, model)?;
        let hypernetwork = match measures {
            MeasureHandling::Remodel => remodeled,
            MeasureHandling::Preserve => {
                preserved_hypernetwork(&base, &hypergraph, &remodeled, mode)?
            }
        };
        steps.push(SimplificationStep {
            weight: Some(w),
            merged: merged_pairs,
            hypergraph,
            hypernetwork,
        });
        start = end;
    }

    Ok(SimplificationTrace {
        mode,
        measures,
        model: *model,
        weight,
        steps,
        curve: None,
        elbow: None,
    })
}

/// Fill in the distance curve: for every step, the hypernetwork distance
/// back to step 0, with every restart's value recorded and the minimum
/// reported. Steps run in parallel.
pub fn distance_curve(
    mut trace: SimplificationTrace,
    dist_params: &DistanceParams,
) -> Result<SimplificationTrace> {
    let h0 = trace.steps[0].hypernetwork.clone();
    let points: Result<Vec<CurvePoint>> = trace
        .steps
        .par_iter()
        .enumerate()
        .map(|(i, step)| {
            let result = coot_distance(&h0, &step.hypernetwork, dist_params)
                .map_err(|e| Error::Solver(format!("step {i}: {e}")))?;
            let distances: Vec<f64> = result.restarts.iter().map(|r| r.objective).collect();
            Ok(CurvePoint {
                step: i,
                weight: step.weight,
                distances,
                min_distance: result.distance,
            })
        })
        .collect();
    trace.curve = Some(points?);
    Ok(trace)
}

/// Rank steps by the backward second difference of the min-distance curve:
/// score(i) = (c[i] - c[i-1]) - (c[i-1] - c[i-2]) for i >= 2. A large score
/// marks the first step after a flat stretch that jumps — the elbow.
pub fn detect_elbow(curve: &[f64]) -> Result<ElbowReport> {
    if curve.len() < 3 {
        return Err(Error::InvalidParams(format!(
            "elbow detection needs a curve of length >= 3, got {}",
            curve.len()
        )));
    }
    let mut scored: Vec<(usize, f64)> = (2..curve.len())
        .map(|i| (i, (curve[i] - curve[i - 1]) - (curve[i - 1] - curve[i - 2])))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let no_elbow = scored.first().map_or(true, |&(_, s)| s <= 1e-12);
    scored.truncate(3);
    Ok(ElbowReport {
        candidates: scored,
        no_elbow,
    })
}
