//! Uniform per-edge meshes and continuous piecewise-linear functions on them.

use thiserror::Error;

use crate::metric_graph::MetricGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh size must be positive and finite, got {0}")]
    BadMeshSize(f64),
    #[error("mesh has {found} edges, graph has {expected}")]
    EdgeCountMismatch { expected: usize, found: usize },
    #[error("edge {edge}: expected {expected} samples, found {found}")]
    SampleCountMismatch { edge: usize, expected: usize, found: usize },
    #[error("function is discontinuous at vertex {vertex} (values differ by {gap})")]
    Discontinuous { vertex: usize, gap: f64 },
    #[error("function does not vanish at Dirichlet vertex {vertex} (value {value})")]
    NonzeroAtDirichlet { vertex: usize, value: f64 },
    #[error("function has zero L2 norm")]
    ZeroNorm,
}

/// Number of uniform intervals on each edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mesh {
    intervals: Vec<usize>,
}

impl Mesh {
    /// `n_e = max(2, ⌈ℓ_e / h⌉)` on every edge.
    pub fn uniform(graph: &MetricGraph, h: f64) -> Result<Self, MeshError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(MeshError::BadMeshSize(h));
        }
        let intervals = graph
            .edges()
            .iter()
            .map(|e| {
                let n = (e.length / h * (1.0 - 1e-12)).ceil();
                (n as usize).max(2)
            })
            .collect();
        Ok(Mesh { intervals })
    }

    pub fn from_intervals(graph: &MetricGraph, intervals: Vec<usize>) -> Result<Self, MeshError> {
        if intervals.len() != graph.edge_count() {
            return Err(MeshError::EdgeCountMismatch {
                expected: graph.edge_count(),
                found: intervals.len(),
            });
        }
        Ok(Mesh {
            intervals: intervals.into_iter().map(|n| n.max(2)).collect(),
        })
    }

    pub(crate) fn from_raw(intervals: Vec<usize>) -> Mesh {
        Mesh { intervals }
    }

    /// Halve every interval.
    pub fn refined(&self) -> Mesh {
        Mesh {
            intervals: self.intervals.iter().map(|n| 2 * n).collect(),
        }
    }

    pub fn intervals(&self, e: usize) -> usize {
        self.intervals[e]
    }

    pub fn all_intervals(&self) -> &[usize] {
        &self.intervals
    }

    /// Largest interval length over all edges.
    pub fn max_step(&self, graph: &MetricGraph) -> f64 {
        graph
            .edges()
            .iter()
            .zip(&self.intervals)
            .map(|(e, &n)| e.length / n as f64)
            .fold(0.0, f64::max)
    }

    /// Per-edge maximum of two meshes.
    pub fn common_refinement(&self, other: &Mesh) -> Mesh {
        Mesh {
            intervals: self
                .intervals
                .iter()
                .zip(&other.intervals)
                .map(|(&a, &b)| a.max(b))
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.intervals.iter().map(|n| n + 1).sum()
    }
}

/// Continuous piecewise-linear function on a graph, stored as nodal samples.
///
/// Edge `e` holds `n_e + 1` samples at `x_i = i ℓ_e / n_e`; the first sample
/// sits at the tail vertex and the last at the head vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshFunction {
    lengths: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

impl MeshFunction {
    pub fn zeros(graph: &MetricGraph, mesh: &Mesh) -> Self {
        MeshFunction {
            lengths: graph.edges().iter().map(|e| e.length).collect(),
            samples: mesh.intervals.iter().map(|&n| vec![0.0; n + 1]).collect(),
        }
    }

    /// Sample `f(e, x)` at the mesh nodes.
    pub fn from_fn<F>(graph: &MetricGraph, mesh: &Mesh, f: F) -> Self
    where
        F: Fn(usize, f64) -> f64,
    {
        let samples = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let n = mesh.intervals[e];
                (0..=n)
                    .map(|i| f(e, edge.length * i as f64 / n as f64))
                    .collect()
            })
            .collect();
        MeshFunction {
            lengths: graph.edges().iter().map(|e| e.length).collect(),
            samples,
        }
    }

    pub fn from_samples(graph: &MetricGraph, samples: Vec<Vec<f64>>) -> Result<Self, MeshError> {
        if samples.len() != graph.edge_count() {
            return Err(MeshError::EdgeCountMismatch {
                expected: graph.edge_count(),
                found: samples.len(),
            });
        }
        for (edge, s) in samples.iter().enumerate() {
            if s.len() < 3 {
                return Err(MeshError::SampleCountMismatch { edge, expected: 3, found: s.len() });
            }
        }
        Ok(MeshFunction {
            lengths: graph.edges().iter().map(|e| e.length).collect(),
            samples,
        })
    }

    pub fn mesh(&self) -> Mesh {
        Mesh {
            intervals: self.samples.iter().map(|s| s.len() - 1).collect(),
        }
    }

    pub fn edge_samples(&self, e: usize) -> &[f64] {
        &self.samples[e]
    }

    pub fn edge_samples_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.samples[e]
    }

    pub fn edge_count(&self) -> usize {
        self.samples.len()
    }

    pub fn step(&self, e: usize) -> f64 {
        self.lengths[e] / (self.samples[e].len() - 1) as f64
    }

    /// Value of the interpolant at `x` on edge `e`.
    pub fn eval(&self, e: usize, x: f64) -> f64 {
        let s = &self.samples[e];
        let n = s.len() - 1;
        let t = (x / self.lengths[e] * n as f64).clamp(0.0, n as f64);
        let i = (t.floor() as usize).min(n - 1);
        let w = t - i as f64;
        s[i] * (1.0 - w) + s[i + 1] * w
    }

    /// Linear interpolation onto another mesh.
    pub fn resample(&self, mesh: &Mesh) -> MeshFunction {
        if *mesh == self.mesh() {
            return self.clone();
        }
        let samples = (0..self.edge_count())
            .map(|e| {
                let n = mesh.intervals[e];
                (0..=n)
                    .map(|i| self.eval(e, self.lengths[e] * i as f64 / n as f64))
                    .collect()
            })
            .collect();
        MeshFunction {
            lengths: self.lengths.clone(),
            samples,
        }
    }

    /// Both functions on their common refinement.
    pub fn aligned(&self, other: &MeshFunction) -> (MeshFunction, MeshFunction) {
        let m = self.mesh().common_refinement(&other.mesh());
        (self.resample(&m), other.resample(&m))
    }

    pub fn scaled(&self, c: f64) -> MeshFunction {
        let mut out = self.clone();
        out.samples.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }

    /// `a·self + b·other`, on the common refinement when meshes differ.
    pub fn combine(&self, a: f64, other: &MeshFunction, b: f64) -> MeshFunction {
        let (mut x, y) = self.aligned(other);
        for (xs, ys) in x.samples.iter_mut().zip(&y.samples) {
            for (u, v) in xs.iter_mut().zip(ys) {
                *u = a * *u + b * v;
            }
        }
        x
    }

    /// Exact `∫ f g` for piecewise-linear interpolants on a shared mesh.
    pub fn l2_inner(&self, other: &MeshFunction) -> f64 {
        if self.mesh() != other.mesh() {
            let (x, y) = self.aligned(other);
            return x.l2_inner(&y);
        }
        let mut acc = 0.0;
        for e in 0..self.edge_count() {
            let h = self.step(e);
            let (f, g) = (&self.samples[e], &other.samples[e]);
            let mut s = 0.0;
            for i in 0..f.len() - 1 {
                s += 2.0 * f[i] * g[i] + f[i] * g[i + 1] + f[i + 1] * g[i] + 2.0 * f[i + 1] * g[i + 1];
            }
            acc += s * h / 6.0;
        }
        acc
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).max(0.0).sqrt()
    }

    /// `∫ f' g'`.
    pub fn derivative_inner(&self, other: &MeshFunction) -> f64 {
        if self.mesh() != other.mesh() {
            let (x, y) = self.aligned(other);
            return x.derivative_inner(&y);
        }
        let mut acc = 0.0;
        for e in 0..self.edge_count() {
            let h = self.step(e);
            let (f, g) = (&self.samples[e], &other.samples[e]);
            let s: f64 = (0..f.len() - 1)
                .map(|i| (f[i + 1] - f[i]) * (g[i + 1] - g[i]))
                .sum();
            acc += s / h;
        }
        acc
    }

    /// `‖f'‖_{L²}`.
    pub fn derivative_l2_norm(&self) -> f64 {
        self.derivative_inner(self).max(0.0).sqrt()
    }

    /// `‖f‖_{L^∞}`; exact for piecewise-linear functions.
    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integral(&self) -> f64 {
        (0..self.edge_count())
            .map(|e| {
                let s = &self.samples[e];
                let inner: f64 = s.windows(2).map(|w| w[0] + w[1]).sum();
                inner * self.step(e) / 2.0
            })
            .sum()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.total_length()
    }

    /// `f - mean(f)`.
    pub fn mean_zero(&self) -> MeshFunction {
        let m = self.mean();
        let mut out = self.clone();
        out.samples.iter_mut().flatten().for_each(|v| *v -= m);
        out
    }

    /// Value at a vertex, read from the first incident edge end; `None` for isolated vertices.
    pub fn vertex_value(&self, graph: &MetricGraph, v: usize) -> Option<f64> {
        graph.edges().iter().enumerate().find_map(|(e, edge)| {
            if edge.tail == v {
                Some(self.samples[e][0])
            } else if edge.head == v {
                Some(*self.samples[e].last().unwrap())
            } else {
                None
            }
        })
    }

    /// `‖f‖_{L^∞(V)}`.
    pub fn vertex_sup_norm(&self, graph: &MetricGraph) -> f64 {
        (0..graph.vertex_count())
            .filter_map(|v| self.vertex_value(graph, v))
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest mismatch between edge-end samples meeting at each vertex.
    pub fn continuity_defects(&self, graph: &MetricGraph) -> Vec<f64> {
        let mut lo = vec![f64::INFINITY; graph.vertex_count()];
        let mut hi = vec![f64::NEG_INFINITY; graph.vertex_count()];
        for (e, edge) in graph.edges().iter().enumerate() {
            for (v, x) in [(edge.tail, self.samples[e][0]), (edge.head, *self.samples[e].last().unwrap())] {
                lo[v] = lo[v].min(x);
                hi[v] = hi[v].max(x);
            }
        }
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| if a.is_finite() { b - a } else { 0.0 })
            .collect()
    }

    /// Continuity on Γ and vanishing at Dirichlet vertices, up to `tol`.
    pub fn check_admissible(&self, graph: &MetricGraph, tol: f64) -> Result<(), MeshError> {
        if self.edge_count() != graph.edge_count() {
            return Err(MeshError::EdgeCountMismatch {
                expected: graph.edge_count(),
                found: self.edge_count(),
            });
        }
        for (vertex, gap) in self.continuity_defects(graph).into_iter().enumerate() {
            if gap > tol {
                return Err(MeshError::Discontinuous { vertex, gap });
            }
        }
        for v in 0..graph.vertex_count() {
            if graph.coupling(v).is_dirichlet() {
                if let Some(value) = self.vertex_value(graph, v) {
                    if value.abs() > tol {
                        return Err(MeshError::NonzeroAtDirichlet { vertex: v, value });
                    }
                }
            }
        }
        Ok(())
    }
}
