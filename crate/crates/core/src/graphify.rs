//! Maps from hypernetworks to ordinary networks.
//!
//! Four constructions: the bipartite (star) expansion, which is an exact
//! embedding up to a scale factor; the q-clique expansion on nodes; the
//! q-line graph on hyperedges (the clique expansion of the dual); and the
//! matrix-product line graph, which is cheap but can stretch distances
//! without bound.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::gw::{LabeledBipartiteNetwork, Side};
use crate::hypernet::{pow_abs, MeasureHypernetwork, MeasureNetwork, Order};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphifyParams {
    /// Norm order used by the clique / line expansions.
    pub q: Order,
}

impl Default for GraphifyParams {
    fn default() -> Self {
        GraphifyParams { q: Order::ONE }
    }
}

/// Two-sided (star) expansion of a hypernetwork: one network node per node
/// and per hyperedge, half the original mass on each side, and the relation
/// placed symmetrically on cross-side pairs only.
pub fn bipartite_incidence(h: &MeasureHypernetwork) -> Result<LabeledBipartiteNetwork> {
    let (n, m) = (h.node_count(), h.hyperedge_count());
    let mut ids: Vec<String> = h.node_ids().to_vec();
    ids.extend(h.hyperedge_ids().iter().cloned());
    let mut mu = Array1::zeros(n + m);
    for i in 0..n {
        mu[i] = h.mu()[i] / 2.0;
    }
    for j in 0..m {
        mu[n + j] = h.nu()[j] / 2.0;
    }
    let mut omega = Array2::zeros((n + m, n + m));
    for i in 0..n {
        for j in 0..m {
            omega[(i, n + j)] = h.omega()[(i, j)];
            omega[(n + j, i)] = h.omega()[(i, j)];
        }
    }
    let labels = (0..n + m)
        .map(|i| if i < n { Side::Left } else { Side::Right })
        .collect();
    LabeledBipartiteNetwork::new(MeasureNetwork::new(ids, mu, omega)?, labels)
}

/// Inverse of [`bipartite_incidence`]: read the node block, the hyperedge
/// block, and the cross-block relation back off a labeled bipartite network,
/// doubling the masses. Exact round-trip for networks produced by
/// `bipartite_incidence`.
pub fn from_bipartite(b: &LabeledBipartiteNetwork) -> Result<MeasureHypernetwork> {
    let net = b.network();
    let left = b.side_indices(Side::Left);
    let right = b.side_indices(Side::Right);
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidParams(
            "bipartite network must have nodes on both sides".into(),
        ));
    }
    let node_ids: Vec<String> = left.iter().map(|&i| net.ids()[i].clone()).collect();
    let edge_ids: Vec<String> = right.iter().map(|&j| net.ids()[j].clone()).collect();
    let mu = Array1::from_iter(left.iter().map(|&i| 2.0 * net.mu()[i]));
    let nu = Array1::from_iter(right.iter().map(|&j| 2.0 * net.mu()[j]));
    let omega = Array2::from_shape_fn((left.len(), right.len()), |(a, c)| {
        net.omega()[(left[a], right[c])]
    });
    MeasureHypernetwork::new(node_ids, edge_ids, mu, nu, omega)
}

/// Norm of `values` in `L^q` of the probability vector `nu`; `q = ∞` takes
/// the maximum absolute value (every atom carries positive mass).
fn lq_norm(values: &Array1<f64>, nu: &Array1<f64>, q: Order) -> f64 {
    if q.is_infinite() {
        values.iter().fold(0.0, |a, &v| a.max(v.abs()))
    } else {
        let p = q.get();
        let total: f64 = values
            .iter()
            .zip(nu.iter())
            .map(|(&v, &w)| pow_abs(v, p) * w)
            .sum();
        total.powf(1.0 / p)
    }
}

/// Clique expansion: a network on the nodes where each pair is related by
/// the `L^q(ν)` norm of the hyperedge-wise minimum of their relation rows.
/// The diagonal is the norm of the node's own row, not zero.
pub fn clique_expansion(h: &MeasureHypernetwork, q: Order) -> Result<MeasureNetwork> {
    let n = h.node_count();
    let mut omega = Array2::zeros((n, n));
    for i in 0..n {
        let row_i = h.omega().row(i);
        for j in i..n {
            let row_j = h.omega().row(j);
            let mins = Array1::from_iter(
                row_i
                    .iter()
                    .zip(row_j.iter())
                    .map(|(&a, &b)| f64::min(a, b)),
            );
            let value = lq_norm(&mins, h.nu(), q);
            omega[(i, j)] = value;
            omega[(j, i)] = value;
        }
    }
    MeasureNetwork::new(h.node_ids().to_vec(), h.mu().clone(), omega)
}

/// q-line graph: the clique expansion of the dual hypernetwork, i.e. a
/// network on the hyperedges.
pub fn line_graph(h: &MeasureHypernetwork, q: Order) -> Result<MeasureNetwork> {
    clique_expansion(&h.dualize(), q)
}

/// Matrix-product line graph: the network `(Y, ν, ωᵀ·diag(μ)·ω)`. Cheap to
/// compute but not Lipschitz as a map of metric spaces.
pub fn matrix_product_line_graph(h: &MeasureHypernetwork) -> Result<MeasureNetwork> {
    let m = h.hyperedge_count();
    let n = h.node_count();
    let mut omega = Array2::zeros((m, m));
    for a in 0..m {
        for b in 0..m {
            let mut sum = 0.0;
            for x in 0..n {
                sum += h.omega()[(x, a)] * h.mu()[x] * h.omega()[(x, b)];
            }
            omega[(a, b)] = sum;
        }
    }
    MeasureNetwork::new(h.hyperedge_ids().to_vec(), h.nu().clone(), omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use crate::coot::{coot_distance_bruteforce, tests::scaled_identity_hypernetwork};
    use crate::gw::{gw_distance_bruteforce, tests::doubled_network};
    use crate::model::{build_hypernetwork, tests::example_hypergraph, ModelParams};

    fn example_incidence_hypernetwork() -> MeasureHypernetwork {
        build_hypernetwork(&example_hypergraph(), &ModelParams::uniform_incidence()).unwrap()
    }

    fn random_hypernetwork(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MeasureHypernetwork {
        let node_ids = (0..n).map(|i| format!("x{i}")).collect();
        let edge_ids = (0..m).map(|j| format!("y{j}")).collect();
        let omega = Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..2.0));
        let mut mu: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let s: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|x| *x /= s);
        let mut nu: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
        let s: f64 = nu.iter().sum();
        nu.iter_mut().for_each(|x| *x /= s);
        MeasureHypernetwork::new(
            node_ids,
            edge_ids,
            Array1::from_vec(mu),
            Array1::from_vec(nu),
            omega,
        )
        .unwrap()
    }

    #[test]
    fn bipartite_expansion_halves_the_measures() {
        let h = example_incidence_hypernetwork();
        let b = bipartite_incidence(&h).unwrap();
        let net = b.network();
        assert_eq!(net.size(), 9);
        for i in 0..5 {
            assert_eq!(net.mu()[i], 1.0 / 10.0);
        }
        for j in 5..9 {
            assert_eq!(net.mu()[j], 1.0 / 8.0);
        }
        // independent manual doubling used by the distance tests
        let manual = doubled_network(&h);
        assert_eq!(net.mu(), manual.network().mu());
        assert_eq!(net.omega(), manual.network().omega());
        assert_eq!(b.labels(), manual.labels());
        // zero inside blocks, relation across
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(net.omega()[(i, j)], 0.0);
            }
        }
        for i in 0..5 {
            for j in 0..4 {
                assert_eq!(net.omega()[(i, 5 + j)], h.omega()[(i, j)]);
                assert_eq!(net.omega()[(5 + j, i)], h.omega()[(i, j)]);
            }
        }
    }

    #[test]
    fn single_cell_bipartite_expansion() {
        let h = MeasureHypernetwork::uniform(
            vec!["x".into()],
            vec!["y".into()],
            array![[3.25]],
        )
        .unwrap();
        let b = bipartite_incidence(&h).unwrap();
        let net = b.network();
        assert_eq!(net.size(), 2);
        assert_eq!(net.mu(), &array![0.5, 0.5]);
        assert_eq!(net.omega(), &array![[0.0, 3.25], [3.25, 0.0]]);
    }

    #[test]
    fn bipartite_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let h = random_hypernetwork(&mut rng, 4, 3);
            let back = from_bipartite(&bipartite_incidence(&h).unwrap()).unwrap();
            assert_eq!(back.node_ids(), h.node_ids());
            assert_eq!(back.hyperedge_ids(), h.hyperedge_ids());
            assert_eq!(back.mu(), h.mu());
            assert_eq!(back.nu(), h.nu());
            assert_eq!(back.omega(), h.omega());
        }
    }

    #[test]
    fn incidence_clique_expansion_is_shared_hyperedge_adjacency() {
        let h = example_incidence_hypernetwork();
        let net = clique_expansion(&h, Order::INFINITY).unwrap();
        // pairs sharing a hyperedge: 12, 13, 14, 34, 24, 25, 45
        let expected = array![
            [1.0, 1.0, 1.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 1.0, 0.0],
            [1.0, 1.0, 1.0, 1.0, 1.0],
            [0.0, 1.0, 0.0, 1.0, 1.0],
        ];
        assert_eq!(net.omega(), &expected);
        assert_eq!(net.mu(), h.mu());
    }

    #[test]
    fn incidence_clique_expansion_q1_weights_by_shared_mass() {
        let h = example_incidence_hypernetwork();
        let net = clique_expansion(&h, Order::ONE).unwrap();
        // entry = (number of hyperedges containing both) / 4 under uniform ν
        let shared = array![
            [2.0, 1.0, 1.0, 1.0, 0.0],
            [1.0, 2.0, 0.0, 1.0, 1.0],
            [1.0, 0.0, 2.0, 2.0, 0.0],
            [1.0, 1.0, 2.0, 3.0, 1.0],
            [0.0, 1.0, 0.0, 1.0, 1.0],
        ];
        for i in 0..5 {
            for j in 0..5 {
                assert_abs_diff_eq!(net.omega()[(i, j)], shared[(i, j)] / 4.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn constant_relation_stays_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut h = random_hypernetwork(&mut rng, 3, 4);
        let c = 2.5;
        h = MeasureHypernetwork::new(
            h.node_ids().to_vec(),
            h.hyperedge_ids().to_vec(),
            h.mu().clone(),
            h.nu().clone(),
            Array2::from_elem((3, 4), c),
        )
        .unwrap();
        for q in [Order::ONE, Order::TWO, Order::new(3.5).unwrap(), Order::INFINITY] {
            let net = clique_expansion(&h, q).unwrap();
            for &v in net.omega() {
                assert_abs_diff_eq!(v, c, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn example_line_graph_adjacency_matches_figure() {
        // hyperedge pairs with nonempty intersection: ab, ac, bc, bd, cd
        let h = example_incidence_hypernetwork();
        let net = line_graph(&h, Order::INFINITY).unwrap();
        let expected = array![
            [1.0, 1.0, 1.0, 0.0],
            [1.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0, 1.0],
        ];
        assert_eq!(net.omega(), &expected);
        assert_eq!(net.ids(), h.hyperedge_ids());
        assert_eq!(net.mu(), h.nu());
    }

    #[test]
    fn line_graph_is_clique_expansion_of_the_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..5 {
            let h = random_hypernetwork(&mut rng, 4, 3);
            for q in [Order::ONE, Order::TWO, Order::new(2.5).unwrap(), Order::INFINITY] {
                let lg = line_graph(&h, q).unwrap();
                let dual = h.dualize();
                // direct evaluation of the definition on the dual
                for a in 0..3 {
                    for b in 0..3 {
                        let expected = if q.is_infinite() {
                            (0..4)
                                .map(|x| {
                                    f64::min(dual.omega()[(a, x)], dual.omega()[(b, x)]).abs()
                                })
                                .fold(0.0f64, f64::max)
                        } else {
                            (0..4)
                                .map(|x| {
                                    f64::min(dual.omega()[(a, x)], dual.omega()[(b, x)])
                                        .abs()
                                        .powf(q.get())
                                        * dual.nu()[x]
                                })
                                .sum::<f64>()
                                .powf(1.0 / q.get())
                        };
                        assert_eq!(lg.omega()[(a, b)], expected);
                    }
                }
                let direct = clique_expansion(&dual, q).unwrap();
                assert_eq!(lg.omega(), direct.omega());
                assert_eq!(lg.mu(), direct.mu());
            }
        }
    }

    #[test]
    fn matrix_product_on_the_scaling_family() {
        for alpha in [1.0, 2.0, 4.0, 8.0] {
            let h = scaled_identity_hypernetwork(alpha);
            let net = matrix_product_line_graph(&h).unwrap();
            assert_eq!(
                net.omega(),
                &array![
                    [alpha * alpha / 2.0, 0.0],
                    [0.0, alpha * alpha / 2.0]
                ]
            );
            assert_eq!(net.mu(), &array![0.5, 0.5]);
        }
    }

    #[test]
    fn matrix_product_uniform_incidence_scales_intersections() {
        let h = example_incidence_hypernetwork();
        let net = matrix_product_line_graph(&h).unwrap();
        let intersections = array![
            [2.0, 1.0, 1.0, 0.0],
            [1.0, 3.0, 1.0, 2.0],
            [1.0, 1.0, 3.0, 1.0],
            [0.0, 2.0, 1.0, 2.0],
        ];
        for a in 0..4 {
            for b in 0..4 {
                assert_abs_diff_eq!(
                    net.omega()[(a, b)],
                    intersections[(a, b)] / 5.0,
                    epsilon = 1e-15
                );
            }
        }
        // single hyperedge: 1x1 product
        let single = MeasureHypernetwork::uniform(
            vec!["x0".into(), "x1".into()],
            vec!["y".into()],
            array![[1.5], [0.5]],
        )
        .unwrap();
        let net = matrix_product_line_graph(&single).unwrap();
        assert_abs_diff_eq!(
            net.omega()[(0, 0)],
            0.5 * 1.5 * 1.5 + 0.5 * 0.5 * 0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn clique_and_line_expansions_are_two_lipschitz() {
        use crate::hypernet::DistanceParams;
        use crate::gw::gw_distance;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let cases = [
            (Order::ONE, Order::ONE),
            (Order::ONE, Order::TWO),
            (Order::TWO, Order::TWO),
        ];
        for &(q, p) in &cases {
            for _ in 0..4 {
                let h1 = random_hypernetwork(&mut rng, 3, 2);
                let h2 = random_hypernetwork(&mut rng, 2, 3);
                let (dh, _, _) = coot_distance_bruteforce(&h1, &h2, p).unwrap();
                let mut params = DistanceParams::default();
                params.p = p;
                params.restarts = 20;
                for (g1, g2) in [
                    (clique_expansion(&h1, q).unwrap(), clique_expansion(&h2, q).unwrap()),
                    (line_graph(&h1, q).unwrap(), line_graph(&h2, q).unwrap()),
                ] {
                    // best of vertex enumeration and multistart descent:
                    // an upper estimate of the network distance, so the
                    // bound below is conservative
                    let brute = gw_distance_bruteforce(&g1, &g2, p).unwrap().distance;
                    let descent = gw_distance(&g1, &g2, &params).unwrap().distance;
                    let dn = brute.min(descent);
                    assert!(
                        dn <= 2.0 * dh + 1e-9,
                        "q={:?} p={:?}: network distance {dn} exceeds 2x{dh}",
                        q,
                        p
                    );
                }
            }
        }
    }

    #[test]
    fn matrix_product_stretch_grows_linearly() {
        let h1 = scaled_identity_hypernetwork(1.0);
        let l1 = matrix_product_line_graph(&h1).unwrap();
        for alpha in [2.0, 4.0, 8.0, 16.0] {
            let ha = scaled_identity_hypernetwork(alpha);
            let (dh, _, _) = coot_distance_bruteforce(&ha, &h1, Order::TWO).unwrap();
            assert_abs_diff_eq!(dh, (alpha - 1.0) / 2f64.sqrt(), epsilon = 1e-12);
            let la = matrix_product_line_graph(&ha).unwrap();
            let dn = gw_distance_bruteforce(&la, &l1, Order::TWO).unwrap().distance;
            assert_abs_diff_eq!(
                dn,
                (alpha * alpha - 1.0) / (2.0 * 2f64.sqrt()),
                epsilon = 1e-9
            );
            let ratio = dn / dh;
            assert_abs_diff_eq!(ratio, (alpha + 1.0) / 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn weak_isomorphism_survives_clique_expansion() {
        let (h1, h2) = crate::hypernet::tests::tiny_pair();
        let (dh, _, _) = coot_distance_bruteforce(&h1, &h2, Order::TWO).unwrap();
        assert!(dh <= 1e-9, "hypernetwork distance {dh}");
        for q in [Order::ONE, Order::TWO, Order::INFINITY] {
            let g1 = clique_expansion(&h1, q).unwrap();
            let g2 = clique_expansion(&h2, q).unwrap();
            let dn = gw_distance_bruteforce(&g1, &g2, Order::TWO)
                .unwrap()
                .distance;
            assert!(dn <= 1e-9, "q={q:?}: network distance {dn}");
        }
    }
}
