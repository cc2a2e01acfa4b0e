//! Seeded random instances for sweeps and self-checks.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::MeshFunction;
use crate::metric_graph::{Coupling, Edge, MetricGraph};
use crate::potential::{EdgePotential, Potential};

pub const DEFAULT_SEED: u64 = 20_240_611;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Limits for [`random_graph`].
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSpec {
    pub max_vertices: usize,
    pub max_edges: usize,
    pub length_range: (f64, f64),
    pub alpha_max: f64,
    /// Chance that a vertex gets a Dirichlet condition.
    pub dirichlet_prob: f64,
    /// Chance that a vertex gets `α = 0`.
    pub zero_alpha_prob: f64,
    pub allow_loops: bool,
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec {
            max_vertices: 5,
            max_edges: 7,
            length_range: (0.3, 2.0),
            alpha_max: 50.0,
            dirichlet_prob: 0.15,
            zero_alpha_prob: 0.2,
            allow_loops: true,
        }
    }
}

impl GraphSpec {
    pub fn kirchhoff() -> Self {
        GraphSpec { dirichlet_prob: 0.0, zero_alpha_prob: 1.0, ..Self::default() }
    }

    pub fn robin() -> Self {
        GraphSpec { dirichlet_prob: 0.0, ..Self::default() }
    }

    pub fn dirichlet() -> Self {
        GraphSpec { dirichlet_prob: 1.0, ..Self::default() }
    }
}

/// A connected graph: a random spanning tree plus extra edges (possibly
/// loops and parallel edges).
pub fn random_graph<R: Rng>(rng: &mut R, spec: &GraphSpec) -> MetricGraph {
    let n = rng.gen_range(2..=spec.max_vertices.max(2));
    let m = rng.gen_range(n - 1..=spec.max_edges.max(n - 1));
    let len = Uniform::new_inclusive(spec.length_range.0, spec.length_range.1);
    let mut edges = Vec::with_capacity(m);
    for v in 1..n {
        edges.push(Edge::new(rng.gen_range(0..v), v, len.sample(rng)));
    }
    while edges.len() < m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b && !spec.allow_loops {
            continue;
        }
        edges.push(Edge::new(a, b, len.sample(rng)));
    }
    let couplings = (0..n)
        .map(|_| {
            if rng.gen_bool(spec.dirichlet_prob) {
                Coupling::Dirichlet
            } else if rng.gen_bool(spec.zero_alpha_prob) {
                Coupling::Finite(0.0)
            } else {
                Coupling::Finite(rng.gen_range(0.0..=spec.alpha_max))
            }
        })
        .collect();
    MetricGraph::new(couplings, edges).expect("generated graph is valid")
}

/// Piecewise constant values in `[lo, hi]`.
pub fn random_piecewise_constant<R: Rng>(rng: &mut R, graph: &MetricGraph, lo: f64, hi: f64) -> Potential {
    let vals: Vec<f64> = (0..graph.edge_count()).map(|_| rng.gen_range(lo..=hi)).collect();
    Potential::piecewise_constant(graph, &vals).expect("finite values")
}

/// Linear polynomial on each edge with values in `[lo, hi]` at both ends.
pub fn random_linear<R: Rng>(rng: &mut R, graph: &MetricGraph, lo: f64, hi: f64) -> Potential {
    let edges = graph
        .edges()
        .iter()
        .map(|e| {
            let a = rng.gen_range(lo..=hi);
            let b = rng.gen_range(lo..=hi);
            EdgePotential::Poly(vec![a, (b - a) / e.length])
        })
        .collect();
    Potential::new(graph, edges).expect("finite coefficients")
}

/// Continuous piecewise linear function: vertex values plus `nodes` random
/// interior values per edge. Dirichlet vertices get zero.
pub fn random_piecewise_linear<R: Rng>(rng: &mut R, graph: &MetricGraph, nodes: usize) -> MeshFunction {
    let vertex: Vec<f64> = graph
        .couplings()
        .iter()
        .map(|c| if c.is_dirichlet() { 0.0 } else { rng.gen_range(-1.0..=1.0) })
        .collect();
    let samples = graph
        .edges()
        .iter()
        .map(|e| {
            let mut s = Vec::with_capacity(nodes + 2);
            s.push(vertex[e.tail]);
            s.extend((0..nodes).map(|_| rng.gen_range(-1.0..=1.0)));
            s.push(vertex[e.head]);
            s
        })
        .collect();
    MeshFunction::from_samples(graph, samples).expect("samples match mesh")
}
