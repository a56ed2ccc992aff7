//! Discrete optimal transport on dense cost matrices.
//!
//! `solve_exact` runs a primal network simplex specialized to the
//! transportation problem: northwest-corner start, Bland pivoting for
//! termination, spanning-tree bases throughout, so the answer is always a
//! vertex of the coupling polytope. `solve_entropic` runs Sinkhorn scaling
//! with an automatic log-domain fallback when the kernel underflows.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::tol;

#[derive(Clone, Debug)]
pub struct OtProblem {
    pub a: Array1<f64>,
    pub b: Array1<f64>,
    pub cost: Array2<f64>,
}

impl OtProblem {
    pub fn new(a: Array1<f64>, b: Array1<f64>, cost: Array2<f64>) -> Result<Self> {
        if cost.nrows() != a.len() || cost.ncols() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "cost is {}x{} but marginals have lengths {} and {}",
                cost.nrows(),
                cost.ncols(),
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidMeasure("empty marginal".into()));
        }
        for (name, v) in [("a", &a), ("b", &b)] {
            for (i, &x) in v.iter().enumerate() {
                if !x.is_finite() || x <= 0.0 {
                    return Err(Error::InvalidMeasure(format!(
                        "{name}[{i}] = {x}; marginals must be strictly positive and finite"
                    )));
                }
            }
        }
        let (sa, sb) = (a.sum(), b.sum());
        if (sa - sb).abs() > tol::MARGINAL_TOL {
            return Err(Error::InvalidMeasure(format!(
                "marginal totals differ: {sa} vs {sb}"
            )));
        }
        for ((i, j), &c) in cost.indexed_iter() {
            if !c.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "cost[{i},{j}] is not finite: {c}"
                )));
            }
        }
        Ok(OtProblem { a, b, cost })
    }
}

#[derive(Clone, Debug)]
pub struct OtSolution {
    pub plan: Array2<f64>,
    /// `<cost, plan>` without any regularization term.
    pub objective: f64,
    /// Dual potentials (row side). For the entropic solver these are the
    /// final log-domain potentials.
    pub u: Array1<f64>,
    /// Dual potentials (column side).
    pub v: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Exact transportation solve; the returned plan is a vertex (its support is
/// a spanning forest of the row/column bipartite graph).
pub fn solve_exact(p: &OtProblem) -> Result<OtSolution> {
    let (m, n) = (p.a.len(), p.b.len());
    let cost_scale = p.cost.iter().fold(1.0f64, |acc, &c| acc.max(c.abs()));
    let pivot_tol = tol::PIVOT_REL_TOL * cost_scale;

    // --- northwest-corner initial basis (exactly m + n - 1 cells) ---
    let mut flow = Array2::<f64>::zeros((m, n));
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut in_basis = vec![false; m * n];
    {
        let mut ra = p.a.clone();
        let mut rb = p.b.clone();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let f = ra[i].min(rb[j]);
            flow[(i, j)] = f;
            basis.push((i, j));
            in_basis[i * n + j] = true;
            ra[i] -= f;
            rb[j] -= f;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (ra[i] <= rb[j] && i < m - 1) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let mut u = vec![0.0f64; m];
    let mut v = vec![0.0f64; n];
    let max_pivots = 2000 * (m + n) * (m + n).max(4);
    let mut iterations = 0usize;

    loop {
        compute_potentials(&basis, &p.cost, m, n, &mut u, &mut v)?;

        // Bland's rule: first cell (lexicographic) with negative reduced cost
        let mut entering: Option<(usize, usize)> = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if !in_basis[i * n + j] && p.cost[(i, j)] - u[i] - v[j] < -pivot_tol {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let (ei, ej) = match entering {
            Some(c) => c,
            None => break,
        };

        // unique tree path from row node ei to column node ej
        let path = tree_path(&basis, m, n, ei, m + ej)?;
        // cells along the path alternate -theta, +theta starting at -theta;
        // leaving cell = minimum flow among the -theta cells, ties resolved
        // lexicographically for determinism
        let mut theta = f64::INFINITY;
        let mut leaving: Option<(usize, usize)> = None;
        for (k, &(ci, cj)) in path.iter().enumerate() {
            if k % 2 == 0 {
                let f = flow[(ci, cj)];
                let better = match leaving {
                    None => true,
                    Some(l) => f < theta || (f == theta && (ci, cj) < l),
                };
                if better {
                    theta = f;
                    leaving = Some((ci, cj));
                }
            }
        }
        let leaving = leaving
            .ok_or_else(|| Error::Internal("simplex pivot found no leaving cell".into()))?;
        let theta = flow[leaving];
        flow[(ei, ej)] += theta;
        for (k, &(ci, cj)) in path.iter().enumerate() {
            if k % 2 == 0 {
                flow[(ci, cj)] -= theta;
            } else {
                flow[(ci, cj)] += theta;
            }
        }
        flow[leaving] = 0.0;
        in_basis[leaving.0 * n + leaving.1] = false;
        in_basis[ei * n + ej] = true;
        let pos = basis
            .iter()
            .position(|&c| c == leaving)
            .ok_or_else(|| Error::Internal("leaving cell missing from basis".into()))?;
        basis[pos] = (ei, ej);

        iterations += 1;
        if iterations > max_pivots {
            return Err(Error::Solver(format!(
                "network simplex did not terminate within {max_pivots} pivots"
            )));
        }
    }

    let objective: f64 = flow
        .indexed_iter()
        .map(|((i, j), &f)| f * p.cost[(i, j)])
        .sum();

    #[cfg(debug_assertions)]
    {
        let dual: f64 = p.a.iter().zip(&u).map(|(&ai, &ui)| ai * ui).sum::<f64>()
            + p.b.iter().zip(&v).map(|(&bj, &vj)| bj * vj).sum::<f64>();
        let gap = (objective - dual).abs();
        debug_assert!(
            gap <= tol::LP_GAP_TOL * cost_scale.max(1.0),
            "primal-dual gap {gap} exceeds tolerance"
        );
    }

    Ok(OtSolution {
        plan: flow,
        objective,
        u: Array1::from_vec(u),
        v: Array1::from_vec(v),
        iterations,
        converged: true,
    })
}

/// Solve `u_i + v_j = c_ij` over the basis tree (row 0 pinned to 0).
fn compute_potentials(
    basis: &[(usize, usize)],
    cost: &Array2<f64>,
    m: usize,
    n: usize,
    u: &mut [f64],
    v: &mut [f64],
) -> Result<()> {
    let mut adj: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); m + n]; // (other, i, j)
    for &(i, j) in basis {
        adj[i].push((m + j, i, j));
        adj[m + j].push((i, i, j));
    }
    let mut seen = vec![false; m + n];
    let mut stack = vec![0usize];
    u[0] = 0.0;
    seen[0] = true;
    let mut visited = 1usize;
    while let Some(node) = stack.pop() {
        for &(other, i, j) in &adj[node] {
            if seen[other] {
                continue;
            }
            if other >= m {
                v[other - m] = cost[(i, j)] - u[i];
            } else {
                u[other] = cost[(i, j)] - v[j];
            }
            seen[other] = true;
            visited += 1;
            stack.push(other);
        }
    }
    if visited != m + n {
        return Err(Error::Internal(
            "simplex basis does not span the bipartite graph".into(),
        ));
    }
    Ok(())
}

/// Cells along the unique basis-tree path from `start` to `goal`
/// (nodes 0..m are rows, m..m+n are columns).
fn tree_path(
    basis: &[(usize, usize)],
    m: usize,
    n: usize,
    start_row: usize,
    goal: usize,
) -> Result<Vec<(usize, usize)>> {
    let mut adj: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); m + n];
    for &(i, j) in basis {
        adj[i].push((m + j, i, j));
        adj[m + j].push((i, i, j));
    }
    let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start_row);
    seen[start_row] = true;
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for &(other, i, j) in &adj[node] {
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((node, (i, j)));
                queue.push_back(other);
            }
        }
    }
    if !seen[goal] {
        return Err(Error::Internal("basis tree path not found".into()));
    }
    let mut path = Vec::new();
    let mut node = goal;
    while node != start_row {
        let (prev, cell) = parent[node]
            .ok_or_else(|| Error::Internal("broken parent chain in basis tree".into()))?;
        path.push(cell);
        node = prev;
    }
    path.reverse();
    Ok(path)
}

/// Sinkhorn scaling for the entropically regularized problem. Returns the
/// unregularized objective evaluated at the scaled plan. Falls back to
/// log-domain updates when the dense kernel underflows.
pub fn solve_entropic(
    p: &OtProblem,
    epsilon: f64,
    max_iter: usize,
    stop_tol: f64,
) -> Result<OtSolution> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParams(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if !(stop_tol > 0.0) {
        return Err(Error::InvalidParams(format!(
            "stopping tolerance must be positive, got {stop_tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParams("max_iter must be >= 1".into()));
    }
    let (m, n) = (p.a.len(), p.b.len());
    let kernel = p.cost.mapv(|c| (-c / epsilon).exp());
    // Costs are finite, so a kernel entry that rounds to zero (or subnormal
    // territory) misrepresents the problem as a forbidden cell; any such
    // entry disqualifies the dense scaling path, not just empty rows.
    let degenerate = kernel.iter().any(|&k| k <= f64::MIN_POSITIVE);

    if !degenerate {
        let mut u = Array1::<f64>::ones(m);
        let mut v = Array1::<f64>::ones(n);
        let mut healthy = true;
        for it in 1..=max_iter {
            let kv = kernel.dot(&v);
            if kv.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                healthy = false;
            } else {
                u = &p.a / &kv;
                let ktu = kernel.t().dot(&u);
                if ktu.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    healthy = false;
                } else {
                    v = &p.b / &ktu;
                }
            }
            if !healthy || u.iter().chain(v.iter()).any(|&x| !x.is_finite()) {
                break;
            }
            let plan = scaled_plan(&kernel, &u, &v);
            let res = marginal_residual(&plan, &p.a, &p.b);
            if res <= stop_tol {
                let objective = frobenius(&p.cost, &plan);
                return Ok(OtSolution {
                    plan,
                    objective,
                    u: u.mapv(|x| epsilon * x.ln()),
                    v: v.mapv(|x| epsilon * x.ln()),
                    iterations: it,
                    converged: true,
                });
            }
        }
        if healthy {
            let plan = scaled_plan(&kernel, &u, &v);
            let res = marginal_residual(&plan, &p.a, &p.b);
            return Err(Error::NonConvergence {
                message: "sinkhorn scaling stalled above tolerance".into(),
                iterations: max_iter,
                residual: res,
            });
        }
        // fall through to the log-domain solve on underflow
    }

    // --- log-domain Sinkhorn ---
    let log_a = p.a.mapv(f64::ln);
    let log_b = p.b.mapv(f64::ln);
    let mut f = Array1::<f64>::zeros(m);
    let mut g = Array1::<f64>::zeros(n);
    for it in 1..=max_iter {
        for i in 0..m {
            let row: Vec<f64> = (0..n).map(|j| (g[j] - p.cost[(i, j)]) / epsilon).collect();
            f[i] = epsilon * (log_a[i] - logsumexp(&row));
        }
        for j in 0..n {
            let col: Vec<f64> = (0..m).map(|i| (f[i] - p.cost[(i, j)]) / epsilon).collect();
            g[j] = epsilon * (log_b[j] - logsumexp(&col));
        }
        let plan = Array2::from_shape_fn((m, n), |(i, j)| {
            ((f[i] + g[j] - p.cost[(i, j)]) / epsilon).exp()
        });
        let res = marginal_residual(&plan, &p.a, &p.b);
        if res <= stop_tol {
            let objective = frobenius(&p.cost, &plan);
            return Ok(OtSolution {
                plan,
                objective,
                u: f,
                v: g,
                iterations: it,
                converged: true,
            });
        }
    }
    let plan = Array2::from_shape_fn((m, n), |(i, j)| {
        ((f[i] + g[j] - p.cost[(i, j)]) / epsilon).exp()
    });
    let res = marginal_residual(&plan, &p.a, &p.b);
    Err(Error::NonConvergence {
        message: "log-domain sinkhorn did not reach the marginal tolerance".into(),
        iterations: max_iter,
        residual: res,
    })
}

/// Project a strictly positive matrix onto the couplings of `(a, b)` by
/// alternating row/column rescaling. Used to turn random positive matrices
/// into near-feasible starting couplings; the result is only approximately
/// feasible, which is fine for initialization purposes.
pub fn sinkhorn_projection(
    mut k: Array2<f64>,
    a: &Array1<f64>,
    b: &Array1<f64>,
    iters: usize,
) -> Array2<f64> {
    let (m, n) = k.dim();
    for _ in 0..iters {
        let rows = k.sum_axis(ndarray::Axis(1));
        for i in 0..m {
            if rows[i] > 0.0 {
                let s = a[i] / rows[i];
                k.row_mut(i).mapv_inplace(|x| x * s);
            }
        }
        let cols = k.sum_axis(ndarray::Axis(0));
        for j in 0..n {
            if cols[j] > 0.0 {
                let s = b[j] / cols[j];
                k.column_mut(j).mapv_inplace(|x| x * s);
            }
        }
    }
    k
}

fn scaled_plan(kernel: &Array2<f64>, u: &Array1<f64>, v: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn(kernel.dim(), |(i, j)| u[i] * kernel[(i, j)] * v[j])
}

fn marginal_residual(plan: &Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let row = plan.sum_axis(ndarray::Axis(1));
    let col = plan.sum_axis(ndarray::Axis(0));
    let ra = row
        .iter()
        .zip(a.iter())
        .fold(0.0f64, |acc, (&r, &x)| acc.max((r - x).abs()));
    let rb = col
        .iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (&c, &x)| acc.max((c - x).abs()));
    ra.max(rb)
}

fn frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if mx.is_infinite() && mx < 0.0 {
        return f64::NEG_INFINITY;
    }
    mx + xs.iter().map(|&x| (x - mx).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;

    use crate::polytope::coupling_vertices;

    fn rand_measure(rng: &mut rand_chacha::ChaCha8Rng, k: usize) -> Array1<f64> {
        let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        Array1::from_vec(v)
    }

    #[test]
    fn identity_cost_prefers_diagonal() {
        let u = Array1::from_elem(2, 0.5);
        let p = OtProblem::new(u.clone(), u, array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let sol = solve_exact(&p).unwrap();
        assert_abs_diff_eq!(sol.objective, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.plan[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.plan[(1, 1)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn small_asymmetric_instance() {
        let p = OtProblem::new(
            array![0.3, 0.7],
            array![0.4, 0.6],
            array![[0.0, 1.0], [1.0, 0.0]],
        )
        .unwrap();
        let sol = solve_exact(&p).unwrap();
        assert_abs_diff_eq!(sol.objective, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn exact_matches_vertex_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let m = rng.random_range(1..=4usize);
            let n = rng.random_range(1..=4usize);
            let a = rand_measure(&mut rng, m);
            let b = rand_measure(&mut rng, n);
            let cost = Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..3.0));
            let p = OtProblem::new(a.clone(), b.clone(), cost.clone()).unwrap();
            let sol = solve_exact(&p).unwrap();
            let best = coupling_vertices(&a, &b)
                .unwrap()
                .iter()
                .map(|v| frobenius(&cost, v))
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(sol.objective, best, epsilon = 1e-10);
            // plan is feasible
            assert!(marginal_residual(&sol.plan, &a, &b) <= 1e-12);
            // vertex solutions carry sparse support
            let support = sol.plan.iter().filter(|&&x| x > 0.0).count();
            assert!(support <= m + n - 1);
        }
    }

    #[test]
    fn exact_matches_permutation_minimum_on_uniform_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 3, 5, 6] {
            let u = Array1::from_elem(n, 1.0 / n as f64);
            let cost = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0));
            let p = OtProblem::new(u.clone(), u.clone(), cost.clone()).unwrap();
            let sol = solve_exact(&p).unwrap();
            let best = crate::polytope::permutation_vertices(n)
                .iter()
                .map(|v| frobenius(&cost, v))
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(sol.objective, best, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_is_deterministic_under_ties() {
        // all-equal costs: every feasible plan is optimal; the solver must
        // still produce one canonical answer
        let u = Array1::from_elem(3, 1.0 / 3.0);
        let cost = Array2::from_elem((3, 3), 1.0);
        let p = OtProblem::new(u.clone(), u.clone(), cost).unwrap();
        let s1 = solve_exact(&p).unwrap();
        let s2 = solve_exact(&p).unwrap();
        assert_eq!(s1.plan, s2.plan);
        assert_abs_diff_eq!(s1.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn entropic_tracks_exact_within_entropy_slack() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let m = rng.random_range(2..=5usize);
            let n = rng.random_range(2..=5usize);
            let a = rand_measure(&mut rng, m);
            let b = rand_measure(&mut rng, n);
            let cost = Array2::from_shape_fn((m, n), |_| rng.random_range(0.0..1.0));
            let p = OtProblem::new(a, b, cost).unwrap();
            let exact = solve_exact(&p).unwrap();
            let eps = 1e-2;
            let ent = solve_entropic(&p, eps, 50_000, 1e-10).unwrap();
            let slack = eps * ((m * n) as f64).ln();
            assert!(exact.objective <= ent.objective + slack + 1e-12);
            assert!(ent.objective + 1e-9 >= exact.objective);
        }
    }

    #[test]
    fn entropic_small_epsilon_uses_log_domain_and_matches_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(87);
        let a = rand_measure(&mut rng, 4);
        let b = rand_measure(&mut rng, 4);
        let cost = Array2::from_shape_fn((4, 4), |_| rng.random_range(0.0..5.0));
        let p = OtProblem::new(a, b, cost).unwrap();
        // exp(-5 / 1e-3) underflows f64; the dense kernel is unusable
        let ent = solve_entropic(&p, 1e-3, 200_000, 1e-10).unwrap();
        let exact = solve_exact(&p).unwrap();
        assert!((ent.objective - exact.objective).abs() <= 1e-3);
        assert!(marginal_residual(&ent.plan, &p.a, &p.b) <= 1e-10);
    }

    #[test]
    fn entropic_nonconvergence_carries_diagnostics() {
        let p = OtProblem::new(
            array![0.3, 0.7],
            array![0.6, 0.4],
            array![[0.0, 1.0], [1.0, 0.0]],
        )
        .unwrap();
        match solve_entropic(&p, 1.0, 1, 1e-14) {
            Err(Error::NonConvergence {
                iterations,
                residual,
                ..
            }) => {
                assert_eq!(iterations, 1);
                assert!(residual.is_finite());
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(OtProblem::new(
            array![0.5, 0.5],
            array![0.4, 0.4],
            Array2::zeros((2, 2))
        )
        .is_err());
        assert!(OtProblem::new(
            array![0.5, 0.5],
            array![1.0],
            Array2::zeros((2, 2))
        )
        .is_err());
        assert!(OtProblem::new(
            array![1.0, 0.0],
            array![0.5, 0.5],
            Array2::zeros((2, 2))
        )
        .is_err());
    }
}
