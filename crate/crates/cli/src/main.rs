//! `hypercot` — transport distances and pipelines for hypergraph-shaped
//! data, with reproducible file-based input and output.

mod cmds;
mod out;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hypercot::model::{LineWeight, ModelParams, MuScheme, NuScheme, OmegaScheme};
use hypercot::multiscale::CoverParams;
use hypercot::simplify::{MeasureHandling, SimplifyMode};
use hypercot::{DistanceParams, Error, Order, Result, Solver};

#[derive(Parser)]
#[command(
    name = "hypercot",
    version,
    about = "Transport-based distances, matchings, and simplifications for hypergraphs and graphs",
    long_about = "Models hypergraphs as measure hypernetworks, computes co-optimal-transport \
                  distances between them, converts them to ordinary networks, and runs three \
                  pipelines: soft hypergraph matching, multiscale graph matching over iterated \
                  nerve covers, and measure-aware hypergraph simplification with distance curves. \
                  All output is deterministic: the same inputs and --seed give identical bytes."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MuFlag {
    /// All nodes weighted equally.
    Uniform,
    /// Node mass proportional to the number of hyperedges containing it.
    Degree,
}

#[derive(Clone, Copy, ValueEnum)]
enum NuFlag {
    /// All hyperedges weighted equally.
    Uniform,
    /// Hyperedge mass proportional to the sum of its members' degrees.
    Degsum,
}

#[derive(Clone, Copy, ValueEnum)]
enum OmegaFlag {
    /// 1 when the node belongs to the hyperedge, else 0.
    Incidence,
    /// Shortest-path distance to the hyperedge in the line graph weighted
    /// by union-over-intersection overlap sizes.
    Jaccard,
    /// Same, with inverse-intersection-size weights.
    Intersection,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverFlag {
    /// Network-simplex linear programs (exact vertices).
    Exact,
    /// Entropic regularization (Sinkhorn scaling), strength --eps.
    Entropic,
}

#[derive(Args)]
struct ModelFlags {
    /// Node measure.
    #[arg(long, value_enum, default_value_t = MuFlag::Degree)]
    mu: MuFlag,
    /// Hyperedge measure.
    #[arg(long, value_enum, default_value_t = NuFlag::Degsum)]
    nu: NuFlag,
    /// Node-hyperedge relation.
    #[arg(long, value_enum, default_value_t = OmegaFlag::Jaccard)]
    omega: OmegaFlag,
    /// Replace unreachable line-graph distances by the largest finite
    /// distance plus one instead of failing on disconnected inputs.
    #[arg(long)]
    allow_disconnected: bool,
}

impl ModelFlags {
    fn params(&self) -> ModelParams {
        ModelParams {
            mu: match self.mu {
                MuFlag::Uniform => MuScheme::Uniform,
                MuFlag::Degree => MuScheme::Degree,
            },
            nu: match self.nu {
                NuFlag::Uniform => NuScheme::Uniform,
                NuFlag::Degsum => NuScheme::DegreeSum,
            },
            omega: match self.omega {
                OmegaFlag::Incidence => OmegaScheme::Incidence,
                OmegaFlag::Jaccard => OmegaScheme::JaccardSp,
                OmegaFlag::Intersection => OmegaScheme::IntersectionSp,
            },
            allow_disconnected: self.allow_disconnected,
        }
    }
}

#[derive(Args)]
struct DistFlags {
    /// Distortion order: a number >= 1, or "inf".
    #[arg(long, default_value = "2")]
    p: String,
    /// Transport backend for the block subproblems.
    #[arg(long, value_enum, default_value_t = SolverFlag::Exact)]
    solver: SolverFlag,
    /// Entropic regularization strength (entropic solver only).
    #[arg(long, default_value_t = hypercot::tol::DEFAULT_EPSILON)]
    eps: f64,
    /// Number of solver initializations; the first is deterministic, the
    /// rest draw from --seed.
    #[arg(long, default_value_t = hypercot::tol::DEFAULT_RESTARTS)]
    restarts: usize,
    /// Iteration cap per restart.
    #[arg(long, default_value_t = hypercot::tol::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Relative-improvement stopping tolerance.
    #[arg(long, default_value_t = hypercot::tol::DEFAULT_TOL)]
    tol: f64,
    /// Base seed for the random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_order(text: &str) -> Result<Order> {
    match text.trim() {
        "inf" | "infinity" | "Inf" | "Infinity" => Ok(Order::INFINITY),
        other => {
            let p: f64 = other
                .parse()
                .map_err(|e| Error::InvalidParams(format!("order {other:?}: {e}")))?;
            Order::new(p)
        }
    }
}

impl DistFlags {
    fn params(&self) -> Result<DistanceParams> {
        let params = DistanceParams {
            p: parse_order(&self.p)?,
            solver: match self.solver {
                SolverFlag::Exact => Solver::Exact,
                SolverFlag::Entropic => Solver::Entropic,
            },
            epsilon: self.eps,
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
            seed: self.seed,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MapFlag {
    /// Two-sided network containing nodes and hyperedges with halved
    /// masses; the relation becomes cross-side distances.
    B,
    /// Node network: entry (x, x') aggregates min(omega(x,.), omega(x',.))
    /// in the L^q sense over hyperedge mass.
    Qq,
    /// Hyperedge network: the same construction after swapping roles.
    Lq,
    /// Hyperedge network with matrix-product weights omega^T diag(mu) omega.
    Lmp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeFlag {
    /// Merge hyperedges along the overlap structure.
    Hyperedge,
    /// Merge nodes instead (overlap structure of the role-swapped input).
    Node,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightFlag {
    /// Merge-order weight 1/|intersection|.
    Intersection,
    /// Merge-order weight |union|/|intersection|.
    Jaccard,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasuresFlag {
    /// Re-derive all measures from each simplified hypergraph.
    Remodel,
    /// Push original masses forward through merges.
    Preserve,
}

#[derive(Subcommand)]
enum Cmd {
    /// Model a hypergraph file (text or JSON) as a measure hypernetwork.
    Build {
        /// Hypergraph: `label: member member ...` lines, or JSON.
        input: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance between two hypernetwork JSON files.
    Dist {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        dist: DistFlags,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Soft-match two hypergraphs: distance, couplings, and per-target
    /// mass breakdowns.
    Match {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        dist: DistFlags,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a hypernetwork to an ordinary network.
    Graphify {
        input: PathBuf,
        /// Which conversion to apply.
        #[arg(long, value_enum)]
        map: MapFlag,
        /// Aggregation order for the qq/lq maps: a number >= 1, or "inf".
        #[arg(long, default_value = "1")]
        q: String,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge a hypergraph step by step and chart the distance back to the
    /// original; writes PREFIX.trace.json and PREFIX.curve.csv.
    Simplify {
        input: PathBuf,
        /// What to merge.
        #[arg(long, value_enum, default_value_t = ModeFlag::Hyperedge)]
        mode: ModeFlag,
        /// Merge-order weighting.
        #[arg(long, value_enum, default_value_t = WeightFlag::Jaccard)]
        weight: WeightFlag,
        /// How measures evolve under merges.
        #[arg(long, value_enum, default_value_t = MeasuresFlag::Remodel)]
        measures: MeasuresFlag,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        dist: DistFlags,
        /// Output path prefix (required; two files are written).
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce two graphs through heat-diffusion covers and match them level
    /// by level; writes PREFIX.seq_a.json, PREFIX.seq_b.json,
    /// PREFIX.match.json, and PREFIX.hard_match.tsv.
    Multiscale {
        /// Graph: `u v [weight]` edge-list lines, or JSON.
        a: PathBuf,
        b: PathBuf,
        /// Stop reducing once a graph has fewer nodes than this.
        #[arg(long, default_value_t = 10)]
        n_alpha: usize,
        /// Fixed diffusion time (default: log10 of the level's node count).
        #[arg(long)]
        t_override: Option<f64>,
        /// Eigenpair budget for large graphs.
        #[arg(long)]
        eig_budget: Option<usize>,
        /// Choose diffusion sources at random with this seed instead of by
        /// lowest label.
        #[arg(long)]
        cover_seed: Option<u64>,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        dist: DistFlags,
        /// Ground-truth node map (`source target` lines) for accuracy
        /// reporting.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Output path prefix (required; four files are written).
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Build { input, model, out } => cmds::cmd_build(&input, &model.params(), out.as_ref()),
        Cmd::Dist { a, b, dist, out } => cmds::cmd_dist(&a, &b, &dist.params()?, out.as_ref()),
        Cmd::Match {
            a,
            b,
            model,
            dist,
            out,
        } => cmds::cmd_match(&a, &b, &model.params(), &dist.params()?, out.as_ref()),
        Cmd::Graphify { input, map, q, out } => cmds::cmd_graphify(
            &input,
            match map {
                MapFlag::B => cmds::GraphifyMap::Bipartite,
                MapFlag::Qq => cmds::GraphifyMap::Clique,
                MapFlag::Lq => cmds::GraphifyMap::Line,
                MapFlag::Lmp => cmds::GraphifyMap::MatrixProduct,
            },
            parse_order(&q)?,
            out.as_ref(),
        ),
        Cmd::Simplify {
            input,
            mode,
            weight,
            measures,
            model,
            dist,
            out,
        } => cmds::cmd_simplify(
            &input,
            match mode {
                ModeFlag::Hyperedge => SimplifyMode::Hyperedge,
                ModeFlag::Node => SimplifyMode::Node,
            },
            match weight {
                WeightFlag::Intersection => LineWeight::Intersection,
                WeightFlag::Jaccard => LineWeight::Jaccard,
            },
            match measures {
                MeasuresFlag::Remodel => MeasureHandling::Remodel,
                MeasuresFlag::Preserve => MeasureHandling::Preserve,
            },
            &model.params(),
            &dist.params()?,
            &out,
        ),
        Cmd::Multiscale {
            a,
            b,
            n_alpha,
            t_override,
            eig_budget,
            cover_seed,
            model,
            dist,
            truth,
            out,
        } => cmds::cmd_multiscale(
            &a,
            &b,
            n_alpha,
            &CoverParams {
                t_override,
                eig_budget,
                random_seed: cover_seed,
            },
            &model.params(),
            &dist.params()?,
            truth.as_ref(),
            &out,
        ),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error[{}]: {e}", e.code());
        std::process::exit(1);
    }
}
