//! Core types: measure networks, measure hypernetworks, couplings, and the
//! distortion functionals they plug into.
//!
//! A measure network is a square relation `omega: X x X -> R` with a full
//! support probability measure on `X`. A measure hypernetwork generalizes the
//! relation to a rectangular `omega: X x Y -> R` with independent measures on
//! `X` (nodes) and `Y` (hyperedges). Distances are infima of distortion
//! functionals over couplings; this module provides the distortions plus the
//! structural operations (dualization, geodesic interpolation, canonical
//! collapse) that the solvers and pipelines build on.

use ndarray::{Array1, Array2};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tol;

/// Exponent of a distortion functional; any value in `[1, inf]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Order(f64);

impl Order {
    pub const ONE: Order = Order(1.0);
    pub const TWO: Order = Order(2.0);
    pub const INFINITY: Order = Order(f64::INFINITY);

    pub fn new(p: f64) -> Result<Order> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidParams(format!(
                "order must lie in [1, inf], got {p}"
            )));
        }
        Ok(Order(p))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl Default for Order {
    fn default() -> Self {
        Order::TWO
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

struct OrderVisitor;

impl Visitor<'_> for OrderVisitor {
    type Value = Order;

    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str("a number >= 1 or the string \"inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Order, E> {
        Order::new(v).map_err(E::custom)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Order, E> {
        Order::new(v as f64).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Order, E> {
        Order::new(v as f64).map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Order, E> {
        match v {
            "inf" | "infinity" | "Inf" | "Infinity" => Ok(Order::INFINITY),
            other => other
                .parse::<f64>()
                .map_err(|e| E::custom(e.to_string()))
                .and_then(|p| Order::new(p).map_err(E::custom)),
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Order, D::Error> {
        d.deserialize_any(OrderVisitor)
    }
}

/// Backend used for the inner transport subproblems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Exact,
    Entropic,
}

/// Knobs shared by every iterative distance solver.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceParams {
    pub p: Order,
    pub solver: Solver,
    /// Entropic regularization strength (used when `solver == Entropic`).
    pub epsilon: f64,
    /// Number of initializations; restart 0 is deterministic, the rest are
    /// seeded random.
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iter: usize,
    /// Relative-improvement stopping tolerance.
    pub tol: f64,
    /// Base RNG seed; restart `r` derives its own stream from `seed ^ r`.
    pub seed: u64,
}

impl Default for DistanceParams {
    fn default() -> Self {
        DistanceParams {
            p: Order::TWO,
            solver: Solver::Exact,
            epsilon: tol::DEFAULT_EPSILON,
            restarts: tol::DEFAULT_RESTARTS,
            max_iter: tol::DEFAULT_MAX_ITER,
            tol: tol::DEFAULT_TOL,
            seed: 0,
        }
    }
}

impl DistanceParams {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParams("restarts must be >= 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParams("max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidParams(format!(
                "tol must be a positive finite number, got {}",
                self.tol
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParams(format!(
                "epsilon must be a positive finite number, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn check_probability(name: &str, v: &Array1<f64>) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidMeasure(format!("{name} is empty")));
    }
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "{name}[{i}] is not finite: {x}"
            )));
        }
        if x <= 0.0 {
            return Err(Error::InvalidMeasure(format!(
                "{name}[{i}] = {x}; full support requires strictly positive masses"
            )));
        }
    }
    let s: f64 = v.sum();
    if (s - 1.0).abs() > tol::MASS_TOL {
        return Err(Error::InvalidMeasure(format!(
            "{name} sums to {s}, expected 1 within {:.0e}",
            tol::MASS_TOL
        )));
    }
    Ok(())
}

fn check_finite_matrix(name: &str, m: &Array2<f64>) -> Result<()> {
    for ((i, j), &x) in m.indexed_iter() {
        if !x.is_finite() {
            return Err(Error::InvalidParams(format!(
                "{name}[{i},{j}] is not finite: {x}"
            )));
        }
    }
    Ok(())
}

/// A finite measure network: points with ids, a full-support probability
/// vector `mu`, and a square relation `omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureNetwork {
    ids: Vec<String>,
    mu: Array1<f64>,
    omega: Array2<f64>,
}

impl MeasureNetwork {
    pub fn new(ids: Vec<String>, mu: Array1<f64>, omega: Array2<f64>) -> Result<Self> {
        let n = ids.len();
        if mu.len() != n || omega.nrows() != n || omega.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "network with {n} ids needs mu of length {n} and a {n}x{n} omega; got mu {}, omega {}x{}",
                mu.len(),
                omega.nrows(),
                omega.ncols()
            )));
        }
        check_probability("mu", &mu)?;
        check_finite_matrix("omega", &omega)?;
        Ok(MeasureNetwork { ids, mu, omega })
    }

    pub fn uniform(ids: Vec<String>, omega: Array2<f64>) -> Result<Self> {
        let n = ids.len();
        let mu = Array1::from_elem(n, 1.0 / n as f64);
        MeasureNetwork::new(ids, mu, omega)
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn omega(&self) -> &Array2<f64> {
        &self.omega
    }

    pub fn repr(&self) -> NetworkRepr {
        NetworkRepr {
            nodes: self.ids.clone(),
            mu: self.mu.to_vec(),
            omega: self.omega.outer_iter().map(|r| r.to_vec()).collect(),
            bipartite_labels: None,
        }
    }
}

/// A finite measure hypernetwork: node set `X`, hyperedge set `Y`, full
/// support probability vectors on both, and a rectangular relation
/// `omega: X x Y -> R`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureHypernetwork {
    node_ids: Vec<String>,
    hyperedge_ids: Vec<String>,
    mu: Array1<f64>,
    nu: Array1<f64>,
    omega: Array2<f64>,
}

impl MeasureHypernetwork {
    pub fn new(
        node_ids: Vec<String>,
        hyperedge_ids: Vec<String>,
        mu: Array1<f64>,
        nu: Array1<f64>,
        omega: Array2<f64>,
    ) -> Result<Self> {
        let n = node_ids.len();
        let m = hyperedge_ids.len();
        if mu.len() != n || nu.len() != m || omega.nrows() != n || omega.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "hypernetwork with {n} nodes / {m} hyperedges needs mu {n}, nu {m}, omega {n}x{m}; got mu {}, nu {}, omega {}x{}",
                mu.len(),
                nu.len(),
                omega.nrows(),
                omega.ncols()
            )));
        }
        check_probability("mu", &mu)?;
        check_probability("nu", &nu)?;
        check_finite_matrix("omega", &omega)?;
        Ok(MeasureHypernetwork {
            node_ids,
            hyperedge_ids,
            mu,
            nu,
            omega,
        })
    }

    pub fn uniform(
        node_ids: Vec<String>,
        hyperedge_ids: Vec<String>,
        omega: Array2<f64>,
    ) -> Result<Self> {
        let n = node_ids.len();
        let m = hyperedge_ids.len();
        let mu = Array1::from_elem(n, 1.0 / n as f64);
        let nu = Array1::from_elem(m, 1.0 / m as f64);
        MeasureHypernetwork::new(node_ids, hyperedge_ids, mu, nu, omega)
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn hyperedge_count(&self) -> usize {
        self.hyperedge_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn hyperedge_ids(&self) -> &[String] {
        &self.hyperedge_ids
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn nu(&self) -> &Array1<f64> {
        &self.nu
    }

    pub fn omega(&self) -> &Array2<f64> {
        &self.omega
    }

    /// Swap the roles of nodes and hyperedges: `(Y, nu, X, mu, omega^T)`.
    /// Applying it twice returns the original hypernetwork.
    pub fn dualize(&self) -> MeasureHypernetwork {
        MeasureHypernetwork {
            node_ids: self.hyperedge_ids.clone(),
            hyperedge_ids: self.node_ids.clone(),
            mu: self.nu.clone(),
            nu: self.mu.clone(),
            omega: self.omega.t().to_owned(),
        }
    }

    /// Structural equality of measures and relation, ignoring ids. Used to
    /// compare canonical forms whose labels come from different inputs.
    pub fn content_eq(&self, other: &MeasureHypernetwork) -> bool {
        self.mu == other.mu && self.nu == other.nu && self.omega == other.omega
    }

    pub fn repr(&self) -> HypernetworkRepr {
        HypernetworkRepr {
            nodes: self.node_ids.clone(),
            hyperedges: self.hyperedge_ids.clone(),
            mu: self.mu.to_vec(),
            nu: self.nu.to_vec(),
            omega: self.omega.outer_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: HypernetworkRepr = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("hypernetwork JSON: {e}")))?;
        repr.build()
    }
}

/// Serialization shape for hypernetwork JSON files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypernetworkRepr {
    pub nodes: Vec<String>,
    pub hyperedges: Vec<String>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
}

impl HypernetworkRepr {
    pub fn build(self) -> Result<MeasureHypernetwork> {
        let omega = rows_to_matrix("omega", self.omega)?;
        MeasureHypernetwork::new(
            self.nodes,
            self.hyperedges,
            Array1::from_vec(self.mu),
            Array1::from_vec(self.nu),
            omega,
        )
    }
}

/// Serialization shape for network JSON files. `bipartite_labels`, when
/// present, marks each node as belonging to the node side (`"x"`) or the
/// hyperedge side (`"y"`) of a bipartite incidence network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkRepr {
    pub nodes: Vec<String>,
    pub mu: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bipartite_labels: Option<Vec<String>>,
}

impl NetworkRepr {
    pub fn build(self) -> Result<MeasureNetwork> {
        let omega = rows_to_matrix("omega", self.omega)?;
        MeasureNetwork::new(self.nodes, Array1::from_vec(self.mu), omega)
    }
}

pub(crate) fn rows_to_matrix(name: &str, rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::Parse(format!(
                "{name} row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| Error::Parse(format!("{name}: {e}")))
}

/// A coupling between two probability vectors: a nonnegative matrix whose
/// row sums and column sums reproduce the prescribed marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    matrix: Array2<f64>,
}

impl Coupling {
    /// Validate `matrix` against the marginals `(a, b)`. Entries within
    /// `-MARGINAL_TOL` of zero are clamped to exactly zero; anything more
    /// negative is rejected.
    pub fn new(mut matrix: Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) -> Result<Coupling> {
        if matrix.nrows() != a.len() || matrix.ncols() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "coupling shape {}x{} does not match marginals of length {} and {}",
                matrix.nrows(),
                matrix.ncols(),
                a.len(),
                b.len()
            )));
        }
        for ((i, j), x) in matrix.indexed_iter_mut() {
            if !x.is_finite() {
                return Err(Error::InvalidCoupling(format!(
                    "entry [{i},{j}] is not finite: {x}"
                )));
            }
            if *x < 0.0 {
                if *x < -tol::MARGINAL_TOL {
                    return Err(Error::InvalidCoupling(format!(
                        "entry [{i},{j}] = {x} is negative"
                    )));
                }
                *x = 0.0;
            }
        }
        for (i, (&ai, row_sum)) in a
            .iter()
            .zip(matrix.rows().into_iter().map(|r| r.sum()))
            .enumerate()
        {
            if (ai - row_sum).abs() > tol::MARGINAL_TOL {
                return Err(Error::InvalidCoupling(format!(
                    "row {i} sums to {row_sum}, expected {ai} within {:.0e}",
                    tol::MARGINAL_TOL
                )));
            }
        }
        for (j, (&bj, col_sum)) in b
            .iter()
            .zip(matrix.columns().into_iter().map(|c| c.sum()))
            .enumerate()
        {
            if (bj - col_sum).abs() > tol::MARGINAL_TOL {
                return Err(Error::InvalidCoupling(format!(
                    "column {j} sums to {col_sum}, expected {bj} within {:.0e}",
                    tol::MARGINAL_TOL
                )));
            }
        }
        Ok(Coupling { matrix })
    }

    /// Independence coupling `a b^T`.
    pub fn product(a: &Array1<f64>, b: &Array1<f64>) -> Coupling {
        let matrix = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j]);
        Coupling { matrix }
    }

    /// Identity-aligned coupling `diag(a)`; only a valid coupling between a
    /// marginal and itself.
    pub fn diagonal(a: &Array1<f64>) -> Coupling {
        let mut matrix = Array2::zeros((a.len(), a.len()));
        for (i, &x) in a.iter().enumerate() {
            matrix[(i, i)] = x;
        }
        Coupling { matrix }
    }

    pub(crate) fn from_matrix_unchecked(matrix: Array2<f64>) -> Coupling {
        Coupling { matrix }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn row_marginal(&self) -> Array1<f64> {
        self.matrix.sum_axis(ndarray::Axis(1))
    }

    pub fn col_marginal(&self) -> Array1<f64> {
        self.matrix.sum_axis(ndarray::Axis(0))
    }

    pub fn rows_vec(&self) -> Vec<Vec<f64>> {
        self.matrix.outer_iter().map(|r| r.to_vec()).collect()
    }
}

pub(crate) fn pow_abs(d: f64, p: f64) -> f64 {
    let a = d.abs();
    if p == 2.0 {
        a * a
    } else if p == 1.0 {
        a
    } else {
        a.powf(p)
    }
}

/// p-distortion of a single coupling between two measure networks:
/// the L^p norm of `omega1 - omega2` against `pi x pi`, with the `p = inf`
/// case taken as the sup over the support of `pi x pi`.
pub fn gw_distortion(
    n1: &MeasureNetwork,
    n2: &MeasureNetwork,
    pi: &Coupling,
    p: Order,
) -> Result<f64> {
    if pi.matrix.nrows() != n1.size() || pi.matrix.ncols() != n2.size() {
        return Err(Error::DimensionMismatch(format!(
            "coupling {}x{} does not match networks of sizes {} and {}",
            pi.matrix.nrows(),
            pi.matrix.ncols(),
            n1.size(),
            n2.size()
        )));
    }
    let (w1, w2, m) = (n1.omega(), n2.omega(), &pi.matrix);
    if p.is_infinite() {
        let mut best: f64 = 0.0;
        for ((x, x2), &wxx) in m.indexed_iter() {
            if wxx <= tol::SUPPORT_EPS {
                continue;
            }
            for ((y, y2), &wyy) in m.indexed_iter() {
                if wyy <= tol::SUPPORT_EPS {
                    continue;
                }
                best = best.max((w1[(x, y)] - w2[(x2, y2)]).abs());
            }
        }
        return Ok(best);
    }
    let pv = p.get();
    let mut total = 0.0;
    for ((x, x2), &wxx) in m.indexed_iter() {
        if wxx == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for ((y, y2), &wyy) in m.indexed_iter() {
            if wyy == 0.0 {
                continue;
            }
            inner += pow_abs(w1[(x, y)] - w2[(x2, y2)], pv) * wyy;
        }
        total += inner * wxx;
    }
    Ok(total.powf(1.0 / pv))
}

/// p-distortion of a coupling pair between two measure hypernetworks:
/// the L^p norm of `omega1 - omega2` against `pi x xi`.
pub fn coot_distortion(
    h1: &MeasureHypernetwork,
    h2: &MeasureHypernetwork,
    pi: &Coupling,
    xi: &Coupling,
    p: Order,
) -> Result<f64> {
    if pi.matrix.nrows() != h1.node_count() || pi.matrix.ncols() != h2.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "node coupling {}x{} does not match node counts {} and {}",
            pi.matrix.nrows(),
            pi.matrix.ncols(),
            h1.node_count(),
            h2.node_count()
        )));
    }
    if xi.matrix.nrows() != h1.hyperedge_count() || xi.matrix.ncols() != h2.hyperedge_count() {
        return Err(Error::DimensionMismatch(format!(
            "hyperedge coupling {}x{} does not match hyperedge counts {} and {}",
            xi.matrix.nrows(),
            xi.matrix.ncols(),
            h1.hyperedge_count(),
            h2.hyperedge_count()
        )));
    }
    let (w1, w2) = (h1.omega(), h2.omega());
    if p.is_infinite() {
        let mut best: f64 = 0.0;
        for ((x, x2), &wxx) in pi.matrix.indexed_iter() {
            if wxx <= tol::SUPPORT_EPS {
                continue;
            }
            for ((y, y2), &wyy) in xi.matrix.indexed_iter() {
                if wyy <= tol::SUPPORT_EPS {
                    continue;
                }
                best = best.max((w1[(x, y)] - w2[(x2, y2)]).abs());
            }
        }
        return Ok(best);
    }
    let pv = p.get();
    let mut total = 0.0;
    for ((x, x2), &wxx) in pi.matrix.indexed_iter() {
        if wxx == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for ((y, y2), &wyy) in xi.matrix.indexed_iter() {
            if wyy == 0.0 {
                continue;
            }
            inner += pow_abs(w1[(x, y)] - w2[(x2, y2)], pv) * wyy;
        }
        total += inner * wxx;
    }
    Ok(total.powf(1.0 / pv))
}

/// Point at parameter `t` on the straight-line path between two
/// hypernetworks induced by a coupling pair: nodes are the support of `pi`,
/// hyperedges the support of `xi`, and the relation interpolates linearly
/// between the two pulled-back relations.
pub fn geodesic_point(
    h1: &MeasureHypernetwork,
    h2: &MeasureHypernetwork,
    pi: &Coupling,
    xi: &Coupling,
    t: f64,
) -> Result<MeasureHypernetwork> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParams(format!(
            "geodesic parameter must lie in [0, 1], got {t}"
        )));
    }
    if pi.matrix.nrows() != h1.node_count()
        || pi.matrix.ncols() != h2.node_count()
        || xi.matrix.nrows() != h1.hyperedge_count()
        || xi.matrix.ncols() != h2.hyperedge_count()
    {
        return Err(Error::DimensionMismatch(
            "couplings do not match the hypernetworks".into(),
        ));
    }
    let support = |m: &Array2<f64>| -> Vec<(usize, usize, f64)> {
        m.indexed_iter()
            .filter(|(_, &v)| v > tol::SUPPORT_EPS)
            .map(|((i, j), &v)| (i, j, v))
            .collect()
    };
    let sup_pi = support(&pi.matrix);
    let sup_xi = support(&xi.matrix);
    if sup_pi.is_empty() || sup_xi.is_empty() {
        return Err(Error::Internal(
            "coupling with empty support encountered in geodesic construction".into(),
        ));
    }
    let mass_pi: f64 = sup_pi.iter().map(|&(_, _, v)| v).sum();
    let mass_xi: f64 = sup_xi.iter().map(|&(_, _, v)| v).sum();
    let node_ids: Vec<String> = sup_pi
        .iter()
        .map(|&(x, x2, _)| format!("({},{})", h1.node_ids[x], h2.node_ids[x2]))
        .collect();
    let hyperedge_ids: Vec<String> = sup_xi
        .iter()
        .map(|&(y, y2, _)| format!("({},{})", h1.hyperedge_ids[y], h2.hyperedge_ids[y2]))
        .collect();
    let mu = Array1::from_iter(sup_pi.iter().map(|&(_, _, v)| v / mass_pi));
    let nu = Array1::from_iter(sup_xi.iter().map(|&(_, _, v)| v / mass_xi));
    let omega = Array2::from_shape_fn((sup_pi.len(), sup_xi.len()), |(i, j)| {
        let (x, x2, _) = sup_pi[i];
        let (y, y2, _) = sup_xi[j];
        (1.0 - t) * h1.omega[(x, y)] + t * h2.omega[(x2, y2)]
    });
    MeasureHypernetwork::new(node_ids, hyperedge_ids, mu, nu, omega)
}

fn rows_equal(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>, tol: f64) -> bool {
    a.iter().zip(b.iter()).all(|(&x, &y)| (x - y).abs() <= tol)
}

/// Merge nodes with identical omega rows (masses summed), then hyperedges
/// with identical omega columns, repeating until no merge applies. Rows are
/// scanned before columns and the lowest index in a duplicate group becomes
/// the representative. `tol = 0` compares entries exactly.
pub fn collapse_canonical(h: &MeasureHypernetwork, tol: f64) -> Result<MeasureHypernetwork> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParams(format!(
            "collapse tolerance must be a finite nonnegative number, got {tol}"
        )));
    }
    let mut cur = h.clone();
    loop {
        let (rows_merged, after_rows) = collapse_rows_once(&cur, tol);
        cur = after_rows;
        let dual = cur.dualize();
        let (cols_merged, after_cols_dual) = collapse_rows_once(&dual, tol);
        cur = after_cols_dual.dualize();
        if !rows_merged && !cols_merged {
            return Ok(cur);
        }
    }
}

fn collapse_rows_once(h: &MeasureHypernetwork, tol: f64) -> (bool, MeasureHypernetwork) {
    let n = h.node_count();
    // representative index for each retained row, in ascending order
    let mut reps: Vec<usize> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for i in 0..n {
        let row = h.omega.row(i);
        match reps
            .iter()
            .position(|&r| rows_equal(h.omega.row(r), row, tol))
        {
            Some(k) => masses[k] += h.mu[i],
            None => {
                reps.push(i);
                masses.push(h.mu[i]);
            }
        }
    }
    if reps.len() == n {
        return (false, h.clone());
    }
    let omega = Array2::from_shape_fn((reps.len(), h.hyperedge_count()), |(i, j)| {
        h.omega[(reps[i], j)]
    });
    let merged = MeasureHypernetwork {
        node_ids: reps.iter().map(|&r| h.node_ids[r].clone()).collect(),
        hyperedge_ids: h.hyperedge_ids.clone(),
        mu: Array1::from_vec(masses),
        nu: h.nu.clone(),
        omega,
    };
    (true, merged)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    pub(crate) fn tiny_pair() -> (MeasureHypernetwork, MeasureHypernetwork) {
        let h1 = MeasureHypernetwork::new(
            vec!["x1".into(), "x2".into()],
            vec!["y1".into(), "y2".into(), "y3".into()],
            array![1.0 / 3.0, 2.0 / 3.0],
            array![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            array![[0.0, 2.0, 2.0], [1.0, 2.0, 2.0]],
        )
        .unwrap();
        let h2 = MeasureHypernetwork::new(
            vec!["u1".into(), "u2".into(), "u3".into()],
            vec!["v1".into(), "v2".into()],
            array![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            array![1.0 / 3.0, 2.0 / 3.0],
            array![[0.0, 2.0], [1.0, 2.0], [1.0, 2.0]],
        )
        .unwrap();
        (h1, h2)
    }

    #[test]
    fn order_rejects_below_one() {
        assert!(Order::new(0.5).is_err());
        assert!(Order::new(f64::NAN).is_err());
        assert!(Order::new(1.0).is_ok());
        assert!(Order::new(f64::INFINITY).unwrap().is_infinite());
    }

    #[test]
    fn order_serde_roundtrip() {
        let two: Order = serde_json::from_str("2.0").unwrap();
        assert_eq!(two, Order::TWO);
        let inf: Order = serde_json::from_str("\"inf\"").unwrap();
        assert!(inf.is_infinite());
        assert_eq!(serde_json::to_string(&inf).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&two).unwrap(), "2.0");
    }

    #[test]
    fn measures_must_have_full_support() {
        let err = MeasureNetwork::new(
            vec!["a".into(), "b".into()],
            array![1.0, 0.0],
            array![[0.0, 1.0], [1.0, 0.0]],
        );
        assert!(matches!(err, Err(Error::InvalidMeasure(_))));
        let err = MeasureNetwork::new(
            vec!["a".into(), "b".into()],
            array![0.6, 0.6],
            array![[0.0, 1.0], [1.0, 0.0]],
        );
        assert!(matches!(err, Err(Error::InvalidMeasure(_))));
    }

    #[test]
    fn coupling_validates_marginals() {
        let a = array![0.5, 0.5];
        let b = array![0.25, 0.75];
        let good = Coupling::new(array![[0.25, 0.25], [0.0, 0.5]], &a, &b);
        assert!(good.is_ok());
        let bad = Coupling::new(array![[0.5, 0.0], [0.0, 0.5]], &a, &b);
        assert!(matches!(bad, Err(Error::InvalidCoupling(_))));
        let product = Coupling::product(&a, &b);
        assert!(Coupling::new(product.matrix().clone(), &a, &b).is_ok());
    }

    #[test]
    fn coupling_rejects_negative_mass() {
        let a = array![0.5, 0.5];
        let err = Coupling::new(array![[0.6, -0.1], [-0.1, 0.6]], &a, &a);
        assert!(matches!(err, Err(Error::InvalidCoupling(_))));
    }

    #[test]
    fn gw_distortion_single_points() {
        let n1 = MeasureNetwork::new(vec!["a".into()], array![1.0], array![[3.0]]).unwrap();
        let n2 = MeasureNetwork::new(vec!["b".into()], array![1.0], array![[7.5]]).unwrap();
        let pi = Coupling::product(n1.mu(), n2.mu());
        for p in [Order::ONE, Order::TWO, Order::new(3.0).unwrap()] {
            assert_abs_diff_eq!(gw_distortion(&n1, &n2, &pi, p).unwrap(), 4.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            gw_distortion(&n1, &n2, &pi, Order::INFINITY).unwrap(),
            4.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gw_distortion_zero_on_identity() {
        let n = MeasureNetwork::uniform(
            vec!["a".into(), "b".into(), "c".into()],
            array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]],
        )
        .unwrap();
        let pi = Coupling::diagonal(n.mu());
        assert_eq!(gw_distortion(&n, &n, &pi, Order::TWO).unwrap(), 0.0);
    }

    // Independent oracle: quadruple loop written directly from the
    // definition, no skipping or factoring.
    fn gw_distortion_oracle(n1: &MeasureNetwork, n2: &MeasureNetwork, pi: &Coupling, p: f64) -> f64 {
        let mut acc = 0.0;
        for x in 0..n1.size() {
            for x2 in 0..n2.size() {
                for y in 0..n1.size() {
                    for y2 in 0..n2.size() {
                        acc += (n1.omega()[(x, y)] - n2.omega()[(x2, y2)]).abs().powf(p)
                            * pi.matrix()[(x, x2)]
                            * pi.matrix()[(y, y2)];
                    }
                }
            }
        }
        acc.powf(1.0 / p)
    }

    fn coot_distortion_oracle(
        h1: &MeasureHypernetwork,
        h2: &MeasureHypernetwork,
        pi: &Coupling,
        xi: &Coupling,
        p: f64,
    ) -> f64 {
        let mut acc = 0.0;
        for x in 0..h1.node_count() {
            for x2 in 0..h2.node_count() {
                for y in 0..h1.hyperedge_count() {
                    for y2 in 0..h2.hyperedge_count() {
                        acc += (h1.omega()[(x, y)] - h2.omega()[(x2, y2)]).abs().powf(p)
                            * pi.matrix()[(x, x2)]
                            * xi.matrix()[(y, y2)];
                    }
                }
            }
        }
        acc.powf(1.0 / p)
    }

    #[test]
    fn distortions_match_direct_summation() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(1..=4usize);
            let n2 = rng.random_range(1..=4usize);
            let m = rng.random_range(1..=4usize);
            let m2 = rng.random_range(1..=4usize);
            let rand_measure = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| {
                let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                Array1::from_vec(v)
            };
            let mu1 = rand_measure(&mut rng, n);
            let nu1 = rand_measure(&mut rng, m);
            let mu2 = rand_measure(&mut rng, n2);
            let nu2 = rand_measure(&mut rng, m2);
            let w1 = Array2::from_shape_fn((n, m), |_| rng.random_range(-2.0..2.0));
            let w2 = Array2::from_shape_fn((n2, m2), |_| rng.random_range(-2.0..2.0));
            let ids = |pre: &str, k: usize| (0..k).map(|i| format!("{pre}{i}")).collect();
            let h1 =
                MeasureHypernetwork::new(ids("x", n), ids("y", m), mu1.clone(), nu1.clone(), w1)
                    .unwrap();
            let h2 =
                MeasureHypernetwork::new(ids("u", n2), ids("v", m2), mu2.clone(), nu2.clone(), w2)
                    .unwrap();
            let pi = Coupling::product(&mu1, &mu2);
            let xi = Coupling::product(&nu1, &nu2);
            for p in [1.0, 2.0, 3.5] {
                let got =
                    coot_distortion(&h1, &h2, &pi, &xi, Order::new(p).unwrap()).unwrap();
                let want = coot_distortion_oracle(&h1, &h2, &pi, &xi, p);
                assert_abs_diff_eq!(got, want, epsilon = 1e-10);
            }
            // square case doubles as a GW check
            if n == n2 {
                let sq1 = MeasureNetwork::new(
                    ids("a", n),
                    mu1.clone(),
                    Array2::from_shape_fn((n, n), |_| rng.random_range(-2.0..2.0)),
                )
                .unwrap();
                let sq2 = MeasureNetwork::new(
                    ids("b", n),
                    mu2.clone(),
                    Array2::from_shape_fn((n, n), |_| rng.random_range(-2.0..2.0)),
                )
                .unwrap();
                let pi = Coupling::product(&mu1, &mu2);
                for p in [1.0, 2.0] {
                    let got = gw_distortion(&sq1, &sq2, &pi, Order::new(p).unwrap()).unwrap();
                    let want = gw_distortion_oracle(&sq1, &sq2, &pi, p);
                    assert_abs_diff_eq!(got, want, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn sup_distortion_restricted_to_support() {
        // two points each; the worst mismatch sits in a cell the coupling
        // avoids, so the sup over the support is the smaller gap
        let n1 = MeasureNetwork::new(
            vec!["a".into(), "b".into()],
            array![0.5, 0.5],
            array![[0.0, 10.0], [10.0, 0.0]],
        )
        .unwrap();
        let n2 = MeasureNetwork::new(
            vec!["c".into(), "d".into()],
            array![0.5, 0.5],
            array![[0.0, 9.0], [9.0, 0.0]],
        )
        .unwrap();
        let aligned = Coupling::diagonal(&array![0.5, 0.5]);
        assert_abs_diff_eq!(
            gw_distortion(&n1, &n2, &aligned, Order::INFINITY).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // the independence coupling exposes the 10-vs-0 cells
        let product = Coupling::product(n1.mu(), n2.mu());
        assert_abs_diff_eq!(
            gw_distortion(&n1, &n2, &product, Order::INFINITY).unwrap(),
            10.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn coot_distortion_zero_for_merge_couplings() {
        let (h1, h2) = tiny_pair();
        let pi = Coupling::new(
            array![[1.0 / 3.0, 0.0, 0.0], [0.0, 1.0 / 3.0, 1.0 / 3.0]],
            h1.mu(),
            h2.mu(),
        )
        .unwrap();
        let xi = Coupling::new(
            array![[1.0 / 3.0, 0.0], [0.0, 1.0 / 3.0], [0.0, 1.0 / 3.0]],
            h1.nu(),
            h2.nu(),
        )
        .unwrap();
        for p in [Order::ONE, Order::TWO, Order::INFINITY] {
            assert_abs_diff_eq!(
                coot_distortion(&h1, &h2, &pi, &xi, p).unwrap(),
                0.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn dualize_transposes_and_involutes() {
        let (h1, _) = tiny_pair();
        let d = h1.dualize();
        assert_eq!(d.node_count(), 3);
        assert_eq!(d.hyperedge_count(), 2);
        assert_eq!(d.omega()[(0, 1)], h1.omega()[(1, 0)]);
        assert_eq!(d.mu(), h1.nu());
        assert!(d.dualize().content_eq(&h1));
        assert_eq!(d.dualize().node_ids(), h1.node_ids());
    }

    #[test]
    fn distortion_invariant_under_dualization() {
        let (h1, h2) = tiny_pair();
        let pi = Coupling::product(h1.mu(), h2.mu());
        let xi = Coupling::product(h1.nu(), h2.nu());
        for p in [Order::ONE, Order::TWO] {
            let a = coot_distortion(&h1, &h2, &pi, &xi, p).unwrap();
            let b = coot_distortion(&h1.dualize(), &h2.dualize(), &xi, &pi, p).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn geodesic_endpoints_interpolate_linearly() {
        let (h1, h2) = tiny_pair();
        let pi = Coupling::product(h1.mu(), h2.mu());
        let xi = Coupling::product(h1.nu(), h2.nu());
        let g0 = geodesic_point(&h1, &h2, &pi, &xi, 0.0).unwrap();
        let g1 = geodesic_point(&h1, &h2, &pi, &xi, 1.0).unwrap();
        let gh = geodesic_point(&h1, &h2, &pi, &xi, 0.5).unwrap();
        for i in 0..g0.node_count() {
            for j in 0..g0.hyperedge_count() {
                let a = g0.omega()[(i, j)];
                let b = g1.omega()[(i, j)];
                assert_abs_diff_eq!(gh.omega()[(i, j)], 0.5 * (a + b), epsilon = 1e-12);
            }
        }
        assert!(geodesic_point(&h1, &h2, &pi, &xi, 1.5).is_err());
    }

    #[test]
    fn geodesic_drops_zero_support_cells() {
        let (h1, h2) = tiny_pair();
        let pi = Coupling::new(
            array![[1.0 / 3.0, 0.0, 0.0], [0.0, 1.0 / 3.0, 1.0 / 3.0]],
            h1.mu(),
            h2.mu(),
        )
        .unwrap();
        let xi = Coupling::new(
            array![[1.0 / 3.0, 0.0], [0.0, 1.0 / 3.0], [0.0, 1.0 / 3.0]],
            h1.nu(),
            h2.nu(),
        )
        .unwrap();
        let g = geodesic_point(&h1, &h2, &pi, &xi, 0.25).unwrap();
        assert_eq!(g.node_count(), 3); // three positive cells in pi
        assert_eq!(g.hyperedge_count(), 3);
        assert_abs_diff_eq!(g.mu().sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.nu().sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn collapse_merges_duplicate_columns_then_stabilizes() {
        let (h1, h2) = tiny_pair();
        let c1 = collapse_canonical(&h1, 0.0).unwrap();
        assert_eq!(c1.node_count(), 2);
        assert_eq!(c1.hyperedge_count(), 2);
        assert_abs_diff_eq!(c1.nu()[1], 2.0 / 3.0, epsilon = 1e-15);
        let c2 = collapse_canonical(&h2, 0.0).unwrap();
        assert_eq!(c2.node_count(), 2);
        assert_eq!(c2.hyperedge_count(), 2);
        assert!(c1.content_eq(&c2));
        // canonical forms are fixpoints
        assert!(collapse_canonical(&c1, 0.0).unwrap().content_eq(&c1));
    }

    #[test]
    fn collapse_cascades_rows_to_columns() {
        // merging the duplicate rows makes columns 0 and 1 identical,
        // which only a second pass can see
        let h = MeasureHypernetwork::uniform(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["p".into(), "q".into()],
            array![[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]],
        )
        .unwrap();
        let c = collapse_canonical(&h, 0.0).unwrap();
        assert_eq!(c.node_count(), 2);
        assert_eq!(c.hyperedge_count(), 2);
        let h2 = MeasureHypernetwork::uniform(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["p".into(), "q".into()],
            array![[1.0, 1.0], [2.0, 2.0], [2.0, 2.0]],
        )
        .unwrap();
        let c2 = collapse_canonical(&h2, 0.0).unwrap();
        assert_eq!(c2.node_count(), 2);
        assert_eq!(c2.hyperedge_count(), 1);
        assert_abs_diff_eq!(c2.mu()[1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn collapse_conserves_mass() {
        let (h1, _) = tiny_pair();
        let c = collapse_canonical(&h1, 0.0).unwrap();
        assert_abs_diff_eq!(c.mu().sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.nu().sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn collapse_tolerance_merges_near_duplicates() {
        let h = MeasureHypernetwork::uniform(
            vec!["a".into(), "b".into()],
            vec!["p".into(), "q".into()],
            array![[1.0, 0.0], [1.0 + 1e-7, 0.0]],
        )
        .unwrap();
        assert_eq!(collapse_canonical(&h, 0.0).unwrap().node_count(), 2);
        let c = collapse_canonical(&h, 1e-6).unwrap();
        assert_eq!(c.node_count(), 1);
        // representative is the lowest index: row value 1.0 survives
        assert_eq!(c.omega()[(0, 0)], 1.0);
    }

    #[test]
    fn repr_roundtrip() {
        let (h1, _) = tiny_pair();
        let json = serde_json::to_string(&h1.repr()).unwrap();
        let back: HypernetworkRepr = serde_json::from_str(&json).unwrap();
        let h = back.build().unwrap();
        assert!(h.content_eq(&h1));
        assert_eq!(h.node_ids(), h1.node_ids());
    }
}
