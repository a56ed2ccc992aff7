//! Spectral helpers for graph heat kernels.
//!
//! The diffusion operator is `exp(-t L)` for the symmetric normalized
//! Laplacian `L = I - D^{-1/2} A D^{-1/2}`. Small graphs get a full dense
//! eigendecomposition; large ones a Lanczos approximation keeping the
//! eigenpairs that dominate the kernel (smallest Laplacian eigenvalues).

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tol;

/// Eigenpairs of the normalized Laplacian: `values[k]` with orthonormal
/// column `vectors[:, k]`. May be truncated to a budget of extremal pairs.
#[derive(Clone, Debug)]
pub struct LaplacianEigs {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
    /// False when the decomposition was truncated to a budget.
    pub complete: bool,
}

/// Symmetric normalized Laplacian of a weighted adjacency matrix. Requires
/// a symmetric matrix with zero diagonal and strictly positive degrees.
pub fn normalized_laplacian(adj: &Array2<f64>) -> Result<Array2<f64>> {
    let n = adj.nrows();
    if adj.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "adjacency must be square, got {}x{}",
            n,
            adj.ncols()
        )));
    }
    for i in 0..n {
        if adj[(i, i)] != 0.0 {
            return Err(Error::InvalidParams(format!(
                "self-loop at node index {i}"
            )));
        }
        for j in 0..n {
            let v = adj[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "adjacency entry ({i},{j}) = {v} must be finite and nonnegative"
                )));
            }
            if (v - adj[(j, i)]).abs() > tol::MASS_TOL {
                return Err(Error::InvalidParams(format!(
                    "adjacency must be symmetric; mismatch at ({i},{j})"
                )));
            }
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| adj.row(i).sum()).collect();
    if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::InvalidParams(format!(
            "node index {i} has zero degree; the normalized Laplacian needs positive degrees"
        )));
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let normalized = inv_sqrt[i] * adj[(i, j)] * inv_sqrt[j];
            l[(i, j)] = if i == j { 1.0 - normalized } else { -normalized };
        }
    }
    Ok(l)
}

fn dense_eigs(l: &Array2<f64>) -> LaplacianEigs {
    let n = l.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| l[(i, j)]);
    let eig = SymmetricEigen::new(m);
    // sort ascending by eigenvalue for a deterministic layout
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (k, &idx) in order.iter().enumerate() {
        values[k] = eig.eigenvalues[idx];
        // fix a deterministic sign: first nonzero entry positive
        let col = eig.eigenvectors.column(idx);
        let sign = col
            .iter()
            .find(|v| v.abs() > 1e-12)
            .map_or(1.0, |v| v.signum());
        for i in 0..n {
            vectors[(i, k)] = col[i] * sign;
        }
    }
    LaplacianEigs {
        values,
        vectors,
        complete: true,
    }
}

/// Lanczos with full reorthogonalization on `2I - L` (so that the wanted
/// small-Laplacian eigenvalues become extremal and converge first), keeping
/// `budget` Ritz pairs.
fn lanczos_eigs(l: &Array2<f64>, budget: usize) -> LaplacianEigs {
    let n = l.nrows();
    // a Krylov space comfortably larger than the budget; capped at the full
    // dimension, where reorthogonalized Lanczos is exact
    let steps = (budget.saturating_mul(2).saturating_add(30)).clamp(budget, n);
    // deterministic but unstructured start vector: a uniform one would be
    // orthogonal to every eigenvector antisymmetric under a graph symmetry
    // and those pairs would never enter the Krylov space
    let mut rng = ChaCha8Rng::seed_from_u64(0x1abc20);
    let mut q = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0f64));
    let norm = q.dot(&q).sqrt();
    q /= norm;
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(steps);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let apply = |v: &Array1<f64>| -> Array1<f64> {
        let mut out = Array1::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += l[(i, j)] * v[j];
            }
            out[i] = 2.0 * v[i] - acc;
        }
        out
    };

    for step in 0..steps {
        basis.push(q.clone());
        let mut w = apply(&q);
        let alpha = w.dot(&q);
        alphas.push(alpha);
        w = &w - &(alpha * &q);
        if step > 0 {
            let prev = &basis[step - 1];
            w = &w - &(betas[step - 1] * prev);
        }
        // full reorthogonalization for numerical stability
        for b in &basis {
            let proj = w.dot(b);
            w = &w - &(proj * b);
        }
        let beta = w.dot(&w).sqrt();
        if beta < 1e-14 {
            break;
        }
        betas.push(beta);
        q = w / beta;
    }

    // eigendecomposition of the small tridiagonal matrix
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    // largest eigenvalues of 2I - L = smallest of L
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let keep = budget.min(k);
    let mut values = Array1::zeros(keep);
    let mut vectors = Array2::zeros((n, keep));
    for (out_k, &idx) in order.iter().take(keep).enumerate() {
        values[out_k] = 2.0 - eig.eigenvalues[idx];
        let coeffs = eig.eigenvectors.column(idx);
        let mut ritz = Array1::<f64>::zeros(n);
        for (s, b) in basis.iter().enumerate() {
            ritz = &ritz + &(coeffs[s] * b);
        }
        let norm = ritz.dot(&ritz).sqrt();
        if norm > 0.0 {
            ritz /= norm;
        }
        let sign = ritz
            .iter()
            .find(|v| v.abs() > 1e-12)
            .map_or(1.0, |v| v.signum());
        for i in 0..n {
            vectors[(i, out_k)] = ritz[i] * sign;
        }
    }
    // re-sort ascending in Laplacian order for a consistent layout
    let mut order: Vec<usize> = (0..keep).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted_values = Array1::from_iter(order.iter().map(|&i| values[i]));
    let mut sorted_vectors = Array2::zeros((n, keep));
    for (k2, &idx) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vectors[(i, k2)] = vectors[(i, idx)];
        }
    }
    LaplacianEigs {
        values: sorted_values,
        vectors: sorted_vectors,
        complete: false,
    }
}

/// Eigendecomposition of the normalized Laplacian of `adj`. Dense and exact
/// up to the size limit; beyond it (or when `budget` is below the size) a
/// Lanczos pass keeps the `budget` eigenpairs with smallest eigenvalues,
/// which dominate `exp(-t L)`.
pub fn laplacian_eigs(adj: &Array2<f64>, budget: Option<usize>) -> Result<LaplacianEigs> {
    let l = normalized_laplacian(adj)?;
    let n = l.nrows();
    match budget {
        Some(b) if b == 0 => Err(Error::InvalidParams("eigen budget must be positive".into())),
        Some(b) if b < n => Ok(lanczos_eigs(&l, b)),
        _ if n > tol::DENSE_EIG_LIMIT => {
            Ok(lanczos_eigs(&l, tol::DEFAULT_EIG_BUDGET.min(n)))
        }
        _ => Ok(dense_eigs(&l)),
    }
}

/// Column `x` of the heat kernel `exp(-t L)`: the diffusion profile of a
/// unit of heat placed on node `x`.
pub fn heat_kernel_column(eigs: &LaplacianEigs, t: f64, x: usize) -> Result<Array1<f64>> {
    let n = eigs.vectors.nrows();
    if x >= n {
        return Err(Error::InvalidParams(format!(
            "node index {x} out of range for {n} nodes"
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!(
            "diffusion time must be positive and finite, got {t}"
        )));
    }
    let k = eigs.values.len();
    let mut out = Array1::zeros(n);
    for idx in 0..k {
        let scale = (-t * eigs.values[idx]).exp() * eigs.vectors[(x, idx)];
        for i in 0..n {
            out[i] += scale * eigs.vectors[(i, idx)];
        }
    }
    Ok(out)
}
