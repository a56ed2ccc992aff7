//! Command implementations. Each command reads files, calls into the
//! library, and serializes results through the canonical printer so that
//! identical inputs and seeds give byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use hypercot::coot::{coot_distance, CootResult};
use hypercot::graphify;
use hypercot::gw::Side;
use hypercot::model::{build_hypernetwork, CombinatorialHypergraph, ModelParams};
use hypercot::multiscale::{
    cover_hypergraphs, hard_match, iterated_nerve, match_accuracy, multiscale_match, Cover,
    CoverParams, CoverSequence, MultiscaleMatch, SimpleGraph,
};
use hypercot::simplify::{
    detect_elbow, distance_curve, simplification_sequence, MeasureHandling, SimplificationTrace,
    SimplifyMode,
};
use hypercot::{Coupling, DistanceParams, Error, MeasureHypernetwork, MeasureNetwork, Order,
    Result};

use crate::out;

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Print to stdout, or write to `--out` when given.
fn emit(out_path: Option<&PathBuf>, content: &str) -> Result<()> {
    match out_path {
        Some(p) => write_file(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// `prefix` + `.suffix`, appended (never replacing an existing extension).
fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}.{suffix}", prefix.display()))
}

/// Hypergraph files are JSON when they start with `{`, otherwise the
/// `label: member member` text form.
fn read_hypergraph(path: &Path) -> Result<CombinatorialHypergraph> {
    let text = read_file(path)?;
    if text.trim_start().starts_with('{') {
        CombinatorialHypergraph::from_json(&text)
    } else {
        CombinatorialHypergraph::from_text(&text)
    }
}

/// Graph files are JSON when they start with `{`, otherwise edge lists.
fn read_graph(path: &Path) -> Result<SimpleGraph> {
    let text = read_file(path)?;
    if text.trim_start().starts_with('{') {
        SimpleGraph::from_json(&text)
    } else {
        SimpleGraph::from_edge_list(&text)
    }
}

fn read_hypernetwork(path: &Path) -> Result<MeasureHypernetwork> {
    MeasureHypernetwork::from_json(&read_file(path)?)
}

fn order_value(p: Order) -> Value {
    if p.is_infinite() {
        Value::from("inf")
    } else {
        Value::from(format!("{}", p.get()))
    }
}

fn params_value(params: &DistanceParams) -> Value {
    json!({
        "eps": params.epsilon,
        "max_iter": params.max_iter,
        "p": order_value(params.p),
        "restarts": params.restarts,
        "seed": params.seed,
        "solver": match params.solver {
            hypercot::Solver::Exact => "exact",
            hypercot::Solver::Entropic => "entropic",
        },
        "tol": params.tol,
    })
}

fn hypernetwork_value(h: &MeasureHypernetwork) -> Value {
    json!({
        "nodes": out::labels_value(h.node_ids()),
        "hyperedges": out::labels_value(h.hyperedge_ids()),
        "mu": out::array1_value(h.mu()),
        "nu": out::array1_value(h.nu()),
        "omega": out::array2_value(h.omega()),
    })
}

fn network_value(n: &MeasureNetwork, sides: Option<&[Side]>) -> Value {
    let mut v = json!({
        "ids": out::labels_value(n.ids()),
        "mu": out::array1_value(n.mu()),
        "omega": out::array2_value(n.omega()),
    });
    if let Some(sides) = sides {
        v["sides"] = Value::Array(
            sides
                .iter()
                .map(|s| {
                    Value::from(match s {
                        Side::Left => "node",
                        Side::Right => "hyperedge",
                    })
                })
                .collect(),
        );
    }
    v
}

fn coot_result_value(result: &CootResult, params: &DistanceParams) -> Value {
    json!({
        "distance": result.distance,
        "best_restart": result.best_restart,
        "certified": result.certified,
        "params": params_value(params),
        "pi": out::array2_value(result.pi.matrix()),
        "xi": out::array2_value(result.xi.matrix()),
        "restarts": result
            .restarts
            .iter()
            .map(|r| {
                json!({
                    "restart": r.restart,
                    "objective": r.objective,
                    "iterations": r.iterations,
                    "converged": r.converged,
                    "trace": out::vec_value(&r.trace),
                })
            })
            .collect::<Vec<_>>(),
    })
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

pub fn cmd_build(
    input: &Path,
    model: &ModelParams,
    out_path: Option<&PathBuf>,
) -> Result<()> {
    let g = read_hypergraph(input)?;
    let h = build_hypernetwork(&g, model)?;
    emit(out_path, &out::render(&hypernetwork_value(&h))?)
}

pub fn cmd_dist(
    a: &Path,
    b: &Path,
    params: &DistanceParams,
    out_path: Option<&PathBuf>,
) -> Result<()> {
    let ha = read_hypernetwork(a)?;
    let hb = read_hypernetwork(b)?;
    let result = coot_distance(&ha, &hb, params)?;
    emit(out_path, &out::render(&coot_result_value(&result, params))?)
}

/// Per-target-node mass breakdown over source labels: for every target
/// node, which source nodes send mass to it and how much, largest first.
fn breakdown_value(pi: &Coupling, sources: &[String], targets: &[String]) -> Value {
    let m = pi.matrix();
    let entries: Vec<Value> = (0..targets.len())
        .map(|j| {
            let col = m.column(j);
            let total: f64 = col.sum();
            let mut parts: Vec<(usize, f64)> = col
                .iter()
                .enumerate()
                .filter(|(_, &mass)| mass > 0.0)
                .map(|(i, &mass)| (i, mass))
                .collect();
            parts.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            json!({
                "target": targets[j],
                "total_mass": total,
                "sources": parts
                    .into_iter()
                    .map(|(i, mass)| {
                        json!({
                            "source": sources[i],
                            "mass": mass,
                            "share": mass / total,
                        })
                    })
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    Value::Array(entries)
}

pub fn cmd_match(
    a: &Path,
    b: &Path,
    model: &ModelParams,
    params: &DistanceParams,
    out_path: Option<&PathBuf>,
) -> Result<()> {
    let ga = read_hypergraph(a)?;
    let gb = read_hypergraph(b)?;
    let ha = build_hypernetwork(&ga, model)?;
    let hb = build_hypernetwork(&gb, model)?;
    let result = coot_distance(&ha, &hb, params)?;
    let mut v = coot_result_value(&result, params);
    v["node_breakdown"] = breakdown_value(&result.pi, ha.node_ids(), hb.node_ids());
    v["hyperedge_breakdown"] =
        breakdown_value(&result.xi, ha.hyperedge_ids(), hb.hyperedge_ids());
    v["source_nodes"] = out::labels_value(ha.node_ids());
    v["target_nodes"] = out::labels_value(hb.node_ids());
    v["source_hyperedges"] = out::labels_value(ha.hyperedge_ids());
    v["target_hyperedges"] = out::labels_value(hb.hyperedge_ids());
    emit(out_path, &out::render(&v)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphifyMap {
    /// Bipartite doubling: nodes and hyperedges side by side, halved
    /// masses, the relation as cross-block distances.
    Bipartite,
    /// Node network; pairwise entry = the aggregated minimum of the two
    /// relation rows.
    Clique,
    /// Hyperedge network; clique expansion of the role-swapped input.
    Line,
    /// Hyperedge network with matrix-product weights.
    MatrixProduct,
}

pub fn cmd_graphify(
    input: &Path,
    map: GraphifyMap,
    q: Order,
    out_path: Option<&PathBuf>,
) -> Result<()> {
    let h = read_hypernetwork(input)?;
    let v = match map {
        GraphifyMap::Bipartite => {
            let b = graphify::bipartite_incidence(&h)?;
            network_value(b.network(), Some(b.labels()))
        }
        GraphifyMap::Clique => network_value(&graphify::clique_expansion(&h, q)?, None),
        GraphifyMap::Line => network_value(&graphify::line_graph(&h, q)?, None),
        GraphifyMap::MatrixProduct => {
            network_value(&graphify::matrix_product_line_graph(&h)?, None)
        }
    };
    emit(out_path, &out::render(&v)?)
}

fn hypergraph_value(g: &CombinatorialHypergraph) -> Value {
    json!({
        "nodes": out::labels_value(g.nodes()),
        "hyperedges": (0..g.hyperedge_count())
            .map(|e| {
                json!({
                    "label": g.hyperedge_labels()[e],
                    "members": out::labels_value(&g.member_labels(e)),
                })
            })
            .collect::<Vec<_>>(),
    })
}

fn trace_value(trace: &SimplificationTrace, params: &DistanceParams) -> Value {
    let mut v = json!({
        "mode": match trace.mode {
            SimplifyMode::Hyperedge => "hyperedge",
            SimplifyMode::Node => "node",
        },
        "measures": match trace.measures {
            MeasureHandling::Remodel => "remodel",
            MeasureHandling::Preserve => "preserve",
        },
        "params": params_value(params),
        "steps": trace
            .steps
            .iter()
            .map(|s| {
                json!({
                    "weight": s.weight.map(Value::from).unwrap_or(Value::Null),
                    "merged": s
                        .merged
                        .iter()
                        .map(|(a, b)| json!([a, b]))
                        .collect::<Vec<_>>(),
                    "hypergraph": hypergraph_value(&s.hypergraph),
                    "hypernetwork": hypernetwork_value(&s.hypernetwork),
                })
            })
            .collect::<Vec<_>>(),
    });
    if let Some(curve) = &trace.curve {
        v["curve"] = curve
            .iter()
            .map(|c| {
                json!({
                    "step": c.step,
                    "weight": c.weight.map(Value::from).unwrap_or(Value::Null),
                    "min_distance": c.min_distance,
                    "distances": out::vec_value(&c.distances),
                })
            })
            .collect::<Vec<_>>()
            .into();
    }
    if let Some(elbow) = &trace.elbow {
        v["elbow"] = json!({
            "candidates": elbow
                .candidates
                .iter()
                .map(|&(step, score)| json!({"step": step, "score": score}))
                .collect::<Vec<_>>(),
            "no_elbow": elbow.no_elbow,
        });
    }
    v
}

fn curve_csv(trace: &SimplificationTrace, restarts: usize) -> Result<String> {
    let curve = trace
        .curve
        .as_ref()
        .ok_or_else(|| Error::Internal("curve missing from trace".into()))?;
    let mut csv = String::from("step,merge_weight,min_distance,n_restarts");
    for r in 0..restarts {
        csv.push_str(&format!(",restart_{r}"));
    }
    csv.push('\n');
    for point in curve {
        csv.push_str(&point.step.to_string());
        csv.push(',');
        if let Some(w) = point.weight {
            csv.push_str(&out::fmt_f64(w)?);
        }
        csv.push(',');
        csv.push_str(&out::fmt_f64(point.min_distance)?);
        csv.push(',');
        csv.push_str(&point.distances.len().to_string());
        for &d in &point.distances {
            csv.push(',');
            csv.push_str(&out::fmt_f64(d)?);
        }
        csv.push('\n');
    }
    Ok(csv)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simplify(
    input: &Path,
    mode: SimplifyMode,
    weight: hypercot::model::LineWeight,
    measures: MeasureHandling,
    model: &ModelParams,
    params: &DistanceParams,
    out_prefix: &Path,
) -> Result<()> {
    let g = read_hypergraph(input)?;
    let mut trace = simplification_sequence(&g, mode, weight, measures, model)?;
    trace = distance_curve(trace, params)?;
    let mins: Vec<f64> = trace
        .curve
        .as_ref()
        .expect("curve just computed")
        .iter()
        .map(|c| c.min_distance)
        .collect();
    // a two-point curve (single merge step) carries no elbow information
    if mins.len() >= 3 {
        trace.elbow = Some(detect_elbow(&mins)?);
    }
    let json_path = with_suffix(out_prefix, "trace.json");
    let csv_path = with_suffix(out_prefix, "curve.csv");
    write_file(&json_path, &out::render(&trace_value(&trace, params))?)?;
    write_file(&csv_path, &curve_csv(&trace, params.restarts)?)?;
    println!("wrote {}", json_path.display());
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cover_value(cover: &Cover, previous: &SimpleGraph) -> Value {
    Value::Array(
        cover
            .iter()
            .map(|(label, members)| {
                json!({
                    "label": label,
                    "members": members
                        .iter()
                        .map(|&i| Value::from(previous.nodes()[i].as_str()))
                        .collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

fn graph_value(g: &SimpleGraph) -> Value {
    json!({
        "nodes": out::labels_value(g.nodes()),
        "edges": g
            .edges()
            .iter()
            .map(|&(i, j, w)| json!([g.nodes()[i], g.nodes()[j], w]))
            .collect::<Vec<_>>(),
    })
}

fn sequence_value(seq: &CoverSequence) -> Value {
    json!({
        "stalled": seq.stalled,
        "node_counts": seq.node_counts(),
        "levels": seq
            .levels
            .iter()
            .enumerate()
            .map(|(i, level)| {
                json!({
                    "graph": graph_value(&level.graph),
                    "cover_from_previous": level
                        .cover_from_previous
                        .as_ref()
                        .map(|c| cover_value(c, &seq.levels[i - 1].graph))
                        .unwrap_or(Value::Null),
                })
            })
            .collect::<Vec<_>>(),
    })
}

fn match_value(result: &MultiscaleMatch, params: &DistanceParams) -> Value {
    json!({
        "total_objective": result.total_objective,
        "best_restart": result.best_restart,
        "diagonal_init": result.diagonal_init,
        "padded": result.padded,
        "objectives": out::vec_value(&result.objectives),
        "params": params_value(params),
        "couplings": result
            .couplings
            .iter()
            .map(|c| out::array2_value(c.matrix()))
            .collect::<Vec<_>>(),
        "restarts": result
            .restarts
            .iter()
            .map(|r| {
                json!({
                    "restart": r.restart,
                    "objective": r.objective,
                    "sweeps": r.sweeps,
                    "converged": r.converged,
                    "trace": out::vec_value(&r.trace),
                })
            })
            .collect::<Vec<_>>(),
    })
}

/// Ground truth for matching: one `source_label target_label` pair per
/// line, total on the source graph's nodes.
fn read_truth(path: &Path, ga: &SimpleGraph, gb: &SimpleGraph) -> Result<Vec<usize>> {
    let text = read_file(path)?;
    let mut truth: Vec<Option<usize>> = vec![None; ga.node_count()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!(
                "truth line {}: expected `source target`, got {line:?}",
                lineno + 1
            )));
        }
        let si = ga
            .nodes()
            .iter()
            .position(|n| n == parts[0])
            .ok_or_else(|| {
                Error::Parse(format!(
                    "truth line {}: unknown source node {:?}",
                    lineno + 1,
                    parts[0]
                ))
            })?;
        let ti = gb
            .nodes()
            .iter()
            .position(|n| n == parts[1])
            .ok_or_else(|| {
                Error::Parse(format!(
                    "truth line {}: unknown target node {:?}",
                    lineno + 1,
                    parts[1]
                ))
            })?;
        if truth[si].replace(ti).is_some() {
            return Err(Error::Parse(format!(
                "truth line {}: source node {:?} mapped twice",
                lineno + 1,
                parts[0]
            )));
        }
    }
    truth
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            t.ok_or_else(|| {
                Error::Parse(format!("truth file misses source node {:?}", ga.nodes()[i]))
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_multiscale(
    a: &Path,
    b: &Path,
    n_alpha: usize,
    cover: &CoverParams,
    model: &ModelParams,
    params: &DistanceParams,
    truth: Option<&PathBuf>,
    out_prefix: &Path,
) -> Result<()> {
    let ga = read_graph(a)?;
    let gb = read_graph(b)?;
    let seq_a = iterated_nerve(&ga, n_alpha, cover)?;
    let seq_b = iterated_nerve(&gb, n_alpha, cover)?;
    // fail early on malformed sequences rather than inside the solver
    cover_hypergraphs(&seq_a)?;
    cover_hypergraphs(&seq_b)?;
    let result = multiscale_match(&seq_a, &seq_b, model, params)?;

    let hm = hard_match(&result.couplings[0]);
    let pi0 = result.couplings[0].matrix();
    let mut tsv = String::from("source\ttarget\tmass\n");
    for (i, &j) in hm.assignment.iter().enumerate() {
        tsv.push_str(&format!(
            "{}\t{}\t{}\n",
            ga.nodes()[i],
            gb.nodes()[j],
            out::fmt_f64(pi0[(i, j)])?
        ));
    }

    let mut mv = match_value(&result, params);
    mv["hard_match"] = json!({
        "assignment": hm
            .assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| json!([ga.nodes()[i], gb.nodes()[j]]))
            .collect::<Vec<_>>(),
        "tie_rows": hm
            .tie_rows
            .iter()
            .map(|&i| Value::from(ga.nodes()[i].as_str()))
            .collect::<Vec<_>>(),
    });
    if let Some(truth_path) = truth {
        let truth_vec = read_truth(truth_path, &ga, &gb)?;
        let acc = match_accuracy(&hm.assignment, &truth_vec, &gb)?;
        mv["accuracy"] = json!({
            "exact_rate": acc.exact_rate,
            "mean_graph_distance": acc.mean_graph_distance,
            "unreachable_pairs": acc.unreachable_pairs,
        });
    }

    let paths = [
        (with_suffix(out_prefix, "seq_a.json"), out::render(&sequence_value(&seq_a))?),
        (with_suffix(out_prefix, "seq_b.json"), out::render(&sequence_value(&seq_b))?),
        (with_suffix(out_prefix, "match.json"), out::render(&mv)?),
        (with_suffix(out_prefix, "hard_match.tsv"), tsv),
    ];
    for (path, content) in &paths {
        write_file(path, content)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
