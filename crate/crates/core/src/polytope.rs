//! Exact vertex enumeration for transportation polytopes.
//!
//! The bilinear objectives used elsewhere attain their minima at vertices, so
//! brute-force oracles need the complete vertex set. Uniform square instances
//! use the permutation characterization; small general instances enumerate
//! spanning-tree bases of the bipartite support graph and keep the feasible
//! (nonnegative) basic solutions.

use std::collections::HashSet;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::tol;

/// Largest square size enumerated through permutations (n! vertices).
pub const MAX_PERMUTATION_SIZE: usize = 6;
/// Largest per-side size enumerated through spanning-tree bases.
pub const MAX_TREE_SIZE: usize = 4;

fn is_constant(v: &Array1<f64>) -> bool {
    v.iter().all(|&x| (x - v[0]).abs() <= tol::MASS_TOL)
}

/// All permutation matrices of size `n`, scaled by `1/n`: the vertex set of
/// the coupling polytope between two uniform measures of equal size.
pub fn permutation_vertices(n: usize) -> Vec<Array2<f64>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p| {
        let mut m = Array2::zeros((n, n));
        for (i, &j) in p.iter().enumerate() {
            m[(i, j)] = 1.0 / n as f64;
        }
        out.push(m);
    });
    out
}

fn permute(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        f(perm);
        return;
    }
    // lexicographic order: try candidates ascending
    for i in k..perm.len() {
        perm.swap(k, i);
        let rest = perm[k + 1..].to_vec();
        let mut sorted = rest.clone();
        sorted.sort_unstable();
        perm[k + 1..].copy_from_slice(&sorted);
        permute(perm, k + 1, f);
        perm[k + 1..].copy_from_slice(&rest);
        perm.swap(k, i);
    }
}

/// Complete vertex set of the transportation polytope with marginals
/// `(a, b)`. Errors when the instance exceeds the enumeration limits.
pub fn coupling_vertices(a: &Array1<f64>, b: &Array1<f64>) -> Result<Vec<Array2<f64>>> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidMeasure("empty marginal".into()));
    }
    let (sa, sb) = (a.sum(), b.sum());
    if (sa - sb).abs() > tol::MARGINAL_TOL {
        return Err(Error::InvalidMeasure(format!(
            "marginals carry different total mass: {sa} vs {sb}"
        )));
    }
    if m == n && m <= MAX_PERMUTATION_SIZE && is_constant(a) && is_constant(b) {
        // constant marginals of any total mass: scaled permutation matrices
        let mut vs = permutation_vertices(m);
        if (sa - 1.0).abs() > tol::MASS_TOL {
            for v in &mut vs {
                v.mapv_inplace(|x| x * sa);
            }
        }
        return Ok(vs);
    }
    if m <= MAX_TREE_SIZE && n <= MAX_TREE_SIZE {
        return Ok(tree_vertices(a, b));
    }
    Err(Error::TooLarge(format!(
        "vertex enumeration supports uniform square instances up to {MAX_PERMUTATION_SIZE} \
         and general instances up to {MAX_TREE_SIZE} per side; got {m}x{n}"
    )))
}

/// Enumerate basic feasible solutions: every subset of `m + n - 1` cells that
/// forms a spanning tree of the bipartite row/column graph determines a
/// unique flow; keep it when nonnegative.
fn tree_vertices(a: &Array1<f64>, b: &Array1<f64>) -> Vec<Array2<f64>> {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let k = m + n - 1;
    let mut out: Vec<Array2<f64>> = Vec::new();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut subset: Vec<usize> = Vec::with_capacity(k);
    choose(cells.len(), k, &mut subset, &mut |chosen| {
        if let Some(x) = solve_tree(a, b, &cells, chosen) {
            let key: Vec<i64> = x
                .iter()
                .map(|&v| (v / tol::VERTEX_DEDUP_TOL).round() as i64)
                .collect();
            if seen.insert(key) {
                out.push(x);
            }
        }
    });
    out
}

fn choose(n: usize, k: usize, acc: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, acc: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if acc.len() == k {
            f(acc);
            return;
        }
        let needed = k - acc.len();
        for i in start..=(n - needed) {
            acc.push(i);
            rec(i + 1, n, k, acc, f);
            acc.pop();
        }
    }
    if k <= n {
        rec(0, n, k, acc, f);
    }
}

fn solve_tree(
    a: &Array1<f64>,
    b: &Array1<f64>,
    cells: &[(usize, usize)],
    chosen: &[usize],
) -> Option<Array2<f64>> {
    let (m, n) = (a.len(), b.len());
    // union-find cycle check over m + n bipartite vertices
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &c in chosen {
        let (i, j) = cells[c];
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, m + j));
        if ri == rj {
            return None; // cycle
        }
        parent[ri] = rj;
    }
    // spanning: m + n - 1 acyclic edges always connect m + n vertices

    // peel leaves to propagate flows down the tree
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (pos, &c) in chosen.iter().enumerate() {
        let (i, j) = cells[c];
        incident[i].push(pos);
        incident[m + j].push(pos);
    }
    let mut res_a = a.to_vec();
    let mut res_b = b.to_vec();
    let mut used = vec![false; chosen.len()];
    let mut degree: Vec<usize> = incident.iter().map(|v| v.len()).collect();
    let mut flows = vec![0.0f64; chosen.len()];
    let mut stack: Vec<usize> = (0..m + n).filter(|&v| degree[v] == 1).collect();
    let mut processed = 0;
    while let Some(v) = stack.pop() {
        if degree[v] != 1 {
            continue;
        }
        let pos = match incident[v].iter().find(|&&p| !used[p]) {
            Some(&p) => p,
            None => continue,
        };
        let (i, j) = cells[chosen[pos]];
        // the leaf's remaining residual must flow through its only edge
        let f = if v < m { res_a[v] } else { res_b[v - m] };
        flows[pos] = f;
        if v < m {
            res_a[i] = 0.0;
            res_b[j] -= f;
        } else {
            res_b[j] = 0.0;
            res_a[i] -= f;
        }
        used[pos] = true;
        degree[v] -= 1;
        let other = if v < m { m + j } else { i };
        degree[other] -= 1;
        if degree[other] == 1 {
            stack.push(other);
        }
        processed += 1;
    }
    if processed != chosen.len() {
        return None;
    }
    let mut x = Array2::zeros((m, n));
    for (pos, &c) in chosen.iter().enumerate() {
        let (i, j) = cells[c];
        let f = flows[pos];
        if f < -tol::MARGINAL_TOL {
            return None;
        }
        x[(i, j)] = f.max(0.0);
    }
    // verify marginals; degenerate trees can misroute flow
    for i in 0..m {
        if (x.row(i).sum() - a[i]).abs() > tol::MARGINAL_TOL {
            return None;
        }
    }
    for j in 0..n {
        if (x.column(j).sum() - b[j]).abs() > tol::MARGINAL_TOL {
            return None;
        }
    }
    Some(x)
}
