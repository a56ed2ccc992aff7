//! Co-optimal transport between measure hypernetworks.
//!
//! A measure hypernetwork couples two weighted point sets (nodes and
//! hyperedges) through a rectangular relation matrix. This crate computes
//! transport-based distances between such objects, converts hypernetworks to
//! ordinary networks (bipartite / clique-expansion / line-graph maps), models
//! combinatorial hypergraphs as hypernetworks, and builds three pipelines on
//! top: soft hypergraph matching, multiscale graph matching through iterated
//! nerve covers, and hypergraph simplification guided by distance curves.

pub mod coot;
pub mod error;
pub mod graphify;
pub mod gw;
pub mod hypernet;
pub mod model;
pub mod multiscale;
pub mod ot;
pub mod polytope;
pub mod simplify;
pub mod spectral;
pub mod tol;

pub use error::{Error, Result};
pub use hypernet::{
    collapse_canonical, coot_distortion, geodesic_point, gw_distortion, Coupling, DistanceParams,
    MeasureHypernetwork, MeasureNetwork, Order, Solver,
};
