//! Metric multigraphs with per-vertex coupling strengths.
//!
//! Every edge is an interval `[0, length]` whose `x = 0` end sits at `tail`
//! and whose `x = length` end sits at `head`. Loops and parallel edges are
//! allowed. Vertices carry a δ-coupling strength, either a finite real or
//! [`Coupling::Dirichlet`] (infinite strength).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {edge}: non-positive length {length}")]
    NonPositiveLength { edge: usize, length: f64 },
    #[error("edge {edge}: endpoint {vertex} does not reference an existing vertex")]
    DanglingEndpoint { edge: usize, vertex: usize },
    #[error("vertex {vertex}: coupling strength is NaN")]
    NanCoupling { vertex: usize },
    #[error("vertex ids must be the contiguous range 0..{count}; found id {found} at position {position}")]
    NonContiguousIds { count: usize, position: usize, found: usize },
    #[error("graph has no edges")]
    NoEdges,
}

/// δ-coupling strength at a vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coupling {
    Finite(f64),
    /// Infinite strength, i.e. `f(v) = 0`.
    Dirichlet,
}

impl Coupling {
    pub fn is_dirichlet(self) -> bool {
        matches!(self, Coupling::Dirichlet)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Coupling::Finite(a) => Some(a),
            Coupling::Dirichlet => None,
        }
    }

    /// Value as an extended real (`+inf` for Dirichlet).
    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// Multiply a finite strength; Dirichlet stays Dirichlet.
    pub fn scaled(self, factor: f64) -> Coupling {
        match self {
            Coupling::Finite(a) => Coupling::Finite(a * factor),
            Coupling::Dirichlet => Coupling::Dirichlet,
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Finite(a) => write!(f, "{a}"),
            Coupling::Dirichlet => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
}

impl Edge {
    pub fn new(tail: usize, head: usize, length: f64) -> Self {
        Edge { tail, head, length }
    }

    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

/// A validated, immutable metric multigraph.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricGraph {
    couplings: Vec<Coupling>,
    edges: Vec<Edge>,
}

impl MetricGraph {
    /// Validate and build a graph. Vertex `i` gets `couplings[i]`.
    pub fn new(couplings: Vec<Coupling>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if edges.is_empty() {
            return Err(GraphError::NoEdges);
        }
        for (vertex, c) in couplings.iter().enumerate() {
            if let Coupling::Finite(a) = c {
                if a.is_nan() {
                    return Err(GraphError::NanCoupling { vertex });
                }
            }
        }
        let n = couplings.len();
        for (i, e) in edges.iter().enumerate() {
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(GraphError::NonPositiveLength { edge: i, length: e.length });
            }
            for v in [e.tail, e.head] {
                if v >= n {
                    return Err(GraphError::DanglingEndpoint { edge: i, vertex: v });
                }
            }
        }
        Ok(MetricGraph { couplings, edges })
    }

    /// Build from `(id, coupling)` pairs, checking that the ids are `0..n` in order.
    pub fn from_indexed(
        vertices: &[(usize, Coupling)],
        edges: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        for (position, &(id, _)) in vertices.iter().enumerate() {
            if id != position {
                return Err(GraphError::NonContiguousIds {
                    count: vertices.len(),
                    position,
                    found: id,
                });
            }
        }
        Self::new(vertices.iter().map(|&(_, c)| c).collect(), edges)
    }

    /// Path on `lengths.len() + 1` vertices with uniform coupling.
    pub fn path(lengths: &[f64], coupling: Coupling) -> Result<Self, GraphError> {
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| Edge::new(i, i + 1, l))
            .collect();
        Self::new(vec![coupling; lengths.len() + 1], edges)
    }

    /// Single interval `[0, length]` with the given end couplings.
    pub fn interval(length: f64, left: Coupling, right: Coupling) -> Result<Self, GraphError> {
        Self::new(vec![left, right], vec![Edge::new(0, 1, length)])
    }

    /// Star: center is vertex 0, leaf `i + 1` ends edge `i`.
    pub fn star(lengths: &[f64], center: Coupling, leaves: Coupling) -> Result<Self, GraphError> {
        let mut couplings = vec![center];
        couplings.extend(std::iter::repeat_n(leaves, lengths.len()));
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| Edge::new(0, i + 1, l))
            .collect();
        Self::new(couplings, edges)
    }

    /// Cycle of `lengths.len()` edges (a single loop when there is one edge).
    pub fn cycle(lengths: &[f64], coupling: Coupling) -> Result<Self, GraphError> {
        let n = lengths.len();
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| Edge::new(i, (i + 1) % n.max(1), l))
            .collect();
        Self::new(vec![coupling; n.max(1)], edges)
    }

    /// One vertex with a loop of each given length.
    pub fn flower(lengths: &[f64], coupling: Coupling) -> Result<Self, GraphError> {
        let edges = lengths.iter().map(|&l| Edge::new(0, 0, l)).collect();
        Self::new(vec![coupling], edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.couplings.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn coupling(&self, v: usize) -> Coupling {
        self.couplings[v]
    }

    /// Degree with a loop counted twice.
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| usize::from(e.tail == v) + usize::from(e.head == v))
            .sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count()];
        for e in &self.edges {
            deg[e.tail] += 1;
            deg[e.head] += 1;
        }
        deg
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Index of the longest edge, lowest index on ties.
    pub fn longest_edge(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.edges.iter().enumerate() {
            if e.length > self.edges[best].length {
                best = i;
            }
        }
        best
    }

    /// Index of the shortest edge, lowest index on ties.
    pub fn shortest_edge(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.edges.iter().enumerate() {
            if e.length < self.edges[best].length {
                best = i;
            }
        }
        best
    }

    /// `α = Σ_v (α_v)₊`; `+inf` when any vertex is Dirichlet.
    pub fn alpha_total(&self) -> f64 {
        self.couplings.iter().map(|c| c.value().max(0.0)).sum()
    }

    /// `Σ_v (α_v)₋` over finite couplings.
    pub fn alpha_negative_total(&self) -> f64 {
        self.couplings
            .iter()
            .filter_map(|c| c.finite())
            .map(|a| (-a).max(0.0))
            .sum()
    }

    pub fn has_dirichlet(&self) -> bool {
        self.couplings.iter().any(|c| c.is_dirichlet())
    }

    pub fn all_dirichlet(&self) -> bool {
        self.couplings.iter().all(|c| c.is_dirichlet())
    }

    /// Every coupling finite and `>= 0`.
    pub fn couplings_finite_nonnegative(&self) -> bool {
        self.couplings
            .iter()
            .all(|c| matches!(c, Coupling::Finite(a) if *a >= 0.0))
    }

    /// Every coupling finite and `<= 0`.
    pub fn couplings_finite_nonpositive(&self) -> bool {
        self.couplings
            .iter()
            .all(|c| matches!(c, Coupling::Finite(a) if *a <= 0.0))
    }

    /// Same topology and lengths, new couplings.
    pub fn with_couplings(&self, couplings: Vec<Coupling>) -> Result<Self, GraphError> {
        Self::new(couplings, self.edges.clone())
    }

    pub fn with_uniform_coupling(&self, coupling: Coupling) -> Self {
        MetricGraph {
            couplings: vec![coupling; self.vertex_count()],
            edges: self.edges.clone(),
        }
    }

    /// Multiply every finite coupling by `factor`.
    pub fn with_scaled_couplings(&self, factor: f64) -> Self {
        MetricGraph {
            couplings: self.couplings.iter().map(|c| c.scaled(factor)).collect(),
            edges: self.edges.clone(),
        }
    }

    /// Component label per vertex (labels are `0..count`, ordered by lowest vertex).
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let n = self.vertex_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.tail), find(&mut parent, e.head));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut root_label = vec![usize::MAX; n];
        for v in 0..n {
            let r = find(&mut parent, v);
            if root_label[r] == usize::MAX {
                root_label[r] = count;
                count += 1;
            }
            label[v] = root_label[r];
        }
        (label, count)
    }

    pub fn invariants(&self) -> GraphInvariants {
        graph_invariants(self)
    }
}

/// Combinatorial and metric quantities entering the bound formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphInvariants {
    pub total_length: f64,
    pub betti: usize,
    pub pendants: usize,
    pub ell_max: f64,
    pub ell_min: f64,
    pub edge_count: usize,
    pub vertex_count: usize,
    pub components: usize,
    pub connected: bool,
    pub is_cycle: bool,
}

pub fn graph_invariants(g: &MetricGraph) -> GraphInvariants {
    let degrees = g.degrees();
    let (_, components) = g.component_labels();
    let connected = components == 1;
    let edge_count = g.edge_count();
    let vertex_count = g.vertex_count();
    GraphInvariants {
        total_length: g.total_length(),
        // |E| - |V| + c is nonnegative for every multigraph.
        betti: edge_count + components - vertex_count,
        pendants: degrees.iter().filter(|&&d| d == 1).count(),
        ell_max: g.edge(g.longest_edge()).length,
        ell_min: g.edge(g.shortest_edge()).length,
        edge_count,
        vertex_count,
        components,
        connected,
        is_cycle: connected && degrees.iter().all(|&d| d == 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kirchhoff() -> Coupling {
        Coupling::Finite(0.0)
    }

    #[test]
    fn path_p3_invariants() {
        let g = MetricGraph::path(&[1.0, 1.0], kirchhoff()).unwrap();
        assert_eq!(g.vertex_count(), 3);
        let inv = g.invariants();
        assert_eq!(inv.total_length, 2.0);
        assert_eq!(inv.betti, 0);
        assert_eq!(inv.pendants, 2);
        assert_eq!((inv.ell_max, inv.ell_min), (1.0, 1.0));
        assert!(inv.connected);
        assert!(!inv.is_cycle);
    }

    #[test]
    fn figure_eight_invariants() {
        let g = MetricGraph::flower(&[1.0, 1.0], kirchhoff()).unwrap();
        let inv = g.invariants();
        assert_eq!(inv.betti, 2);
        assert_eq!(inv.pendants, 0);
        assert_eq!(inv.total_length, 2.0);
        assert!(!inv.is_cycle);
        assert_eq!(g.degree(0), 4);
    }

    #[test]
    fn single_loop_is_cycle() {
        let g = MetricGraph::flower(&[1.0], kirchhoff()).unwrap();
        let inv = g.invariants();
        assert!(inv.is_cycle);
        assert_eq!(inv.betti, 1);
        assert_eq!(inv.pendants, 0);
    }

    #[test]
    fn triangle_is_cycle() {
        let g = MetricGraph::cycle(&[1.0, 2.0, 0.5], kirchhoff()).unwrap();
        assert!(g.invariants().is_cycle);
        assert_eq!(g.invariants().betti, 1);
    }

    #[test]
    fn rejects_bad_input() {
        let err = MetricGraph::new(vec![kirchhoff(); 2], vec![Edge::new(0, 1, -1.0)]).unwrap_err();
        assert_eq!(err, GraphError::NonPositiveLength { edge: 0, length: -1.0 });
        assert!(err.to_string().contains("non-positive length"));
        let err = MetricGraph::new(vec![kirchhoff(); 2], vec![Edge::new(0, 2, 1.0)]).unwrap_err();
        assert_eq!(err, GraphError::DanglingEndpoint { edge: 0, vertex: 2 });
        let err = MetricGraph::new(
            vec![Coupling::Finite(f64::NAN), kirchhoff()],
            vec![Edge::new(0, 1, 1.0)],
        )
        .unwrap_err();
        assert_eq!(err, GraphError::NanCoupling { vertex: 0 });
        let err = MetricGraph::from_indexed(
            &[(1, kirchhoff()), (0, kirchhoff())],
            vec![Edge::new(0, 1, 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::NonContiguousIds { .. }));
    }

    #[test]
    fn disconnected_betti_uses_components() {
        // triangle plus a disjoint edge
        let edges = vec![
            Edge::new(0, 1, 1.0),
            Edge::new(1, 2, 1.0),
            Edge::new(2, 0, 1.0),
            Edge::new(3, 4, 1.0),
        ];
        let g = MetricGraph::new(vec![kirchhoff(); 5], edges).unwrap();
        let inv = g.invariants();
        assert!(!inv.connected);
        assert_eq!(inv.components, 2);
        assert_eq!(inv.betti, 1);
        assert!(!inv.is_cycle);
    }

    #[test]
    fn longest_and_shortest_ties_pick_lowest_index() {
        let g = MetricGraph::star(&[1.0, 2.0, 2.0, 0.5, 0.5], kirchhoff(), kirchhoff()).unwrap();
        assert_eq!(g.longest_edge(), 1);
        assert_eq!(g.shortest_edge(), 3);
    }

    #[test]
    fn alpha_total_counts_positive_part() {
        let g = MetricGraph::new(
            vec![Coupling::Finite(2.0), Coupling::Finite(-1.0), Coupling::Finite(0.5)],
            vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0)],
        )
        .unwrap();
        assert_eq!(g.alpha_total(), 2.5);
        assert_eq!(g.alpha_negative_total(), 1.0);
        let d = g.with_couplings(vec![Coupling::Dirichlet; 3]).unwrap();
        assert_eq!(d.alpha_total(), f64::INFINITY);
    }
}
