//! Piecewise-linear discretisation of the quadratic form
//! `h(f) = ∫(f')² + ∫ q f² + Σ_v α_v f(v)²` and of the `L²` inner product.
//!
//! Matrices are stored in chain form: a diagonal over all degrees of freedom
//! plus, for every edge, the `n_e` couplings between consecutive mesh nodes.
//! Because every edge has at least two intervals, vertex degrees of freedom
//! never couple to each other directly.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::mesh::{Mesh, MeshError, MeshFunction};
use crate::metric_graph::{Coupling, MetricGraph};
use crate::potential::{EdgePotential, Potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("potential has {found} edges, graph has {expected}")]
    PotentialMismatch { expected: usize, found: usize },
    #[error("edge {edge}: potential is not finite on the mesh")]
    NonFinitePotential { edge: usize },
    #[error("mesh leaves no degrees of freedom")]
    EmptySpace,
}

const GAUSS_NODES: [f64; 3] = [
    0.5 - 0.387_298_334_620_741_7,
    0.5,
    0.5 + 0.387_298_334_620_741_7,
];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Numbering of the discrete degrees of freedom.
///
/// Free vertices come first (in vertex order), then the interior nodes of
/// each edge. Dirichlet vertices and vertices without edges carry no dof.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    vertex_dof: Vec<Option<usize>>,
    interior_start: Vec<usize>,
    intervals: Vec<usize>,
    ends: Vec<(usize, usize)>,
    vertex_dofs: usize,
    total: usize,
}

impl DofMap {
    pub fn new(graph: &MetricGraph, mesh: &Mesh) -> Self {
        let degrees = graph.degrees();
        let mut vertex_dof = vec![None; graph.vertex_count()];
        let mut next = 0;
        for (v, slot) in vertex_dof.iter_mut().enumerate() {
            if degrees[v] > 0 && !graph.coupling(v).is_dirichlet() {
                *slot = Some(next);
                next += 1;
            }
        }
        let vertex_dofs = next;
        let mut interior_start = Vec::with_capacity(graph.edge_count());
        for e in 0..graph.edge_count() {
            interior_start.push(next);
            next += mesh.intervals(e) - 1;
        }
        DofMap {
            vertex_dof,
            interior_start,
            intervals: mesh.all_intervals().to_vec(),
            ends: graph.edges().iter().map(|e| (e.tail, e.head)).collect(),
            vertex_dofs,
            total: next,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn vertex_dofs(&self) -> usize {
        self.vertex_dofs
    }

    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        self.vertex_dof[v]
    }

    pub fn edge_count(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self, e: usize) -> usize {
        self.intervals[e]
    }

    /// First interior dof of edge `e`; interior node `i` (1-based) is `start + i - 1`.
    pub fn interior_start(&self, e: usize) -> usize {
        self.interior_start[e]
    }

    pub fn edge_ends(&self, e: usize) -> (usize, usize) {
        self.ends[e]
    }

    /// Dof of node `i ∈ 0..=n_e` on edge `e`, `None` at Dirichlet ends.
    pub fn node_dof(&self, e: usize, i: usize) -> Option<usize> {
        let n = self.intervals[e];
        if i == 0 {
            self.vertex_dof[self.ends[e].0]
        } else if i == n {
            self.vertex_dof[self.ends[e].1]
        } else {
            Some(self.interior_start[e] + i - 1)
        }
    }

    pub fn mesh(&self) -> Mesh {
        Mesh::from_raw(self.intervals.clone())
    }

    /// Linear interpolation of a coefficient vector from `coarse` onto this map
    /// (same graph, any meshes).
    pub fn prolong(&self, coarse: &DofMap, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.total];
        for (v, d) in self.vertex_dof.iter().enumerate() {
            if let (Some(d), Some(c)) = (d, coarse.vertex_dof[v]) {
                out[*d] = x[c];
            }
        }
        for e in 0..self.edge_count() {
            let (n, m) = (self.intervals[e], coarse.intervals[e]);
            let val = |i: usize| coarse.node_dof(e, i).map_or(0.0, |d| x[d]);
            for i in 1..n {
                let t = i as f64 * m as f64 / n as f64;
                let j = (t.floor() as usize).min(m - 1);
                let w = t - j as f64;
                out[self.interior_start[e] + i - 1] = (1.0 - w) * val(j) + w * val(j + 1);
            }
        }
        out
    }

    /// Expand a coefficient vector into nodal samples.
    pub fn to_function(&self, graph: &MetricGraph, x: &[f64]) -> MeshFunction {
        let mut f = MeshFunction::zeros(graph, &self.mesh());
        for e in 0..self.edge_count() {
            let samples = f.edge_samples_mut(e);
            for (i, s) in samples.iter_mut().enumerate() {
                *s = self.node_dof(e, i).map_or(0.0, |d| x[d]);
            }
        }
        f
    }

    /// Read the coefficient vector of a function on the same mesh.
    ///
    /// Vertex values come from the first incident edge end.
    pub fn from_function(&self, f: &MeshFunction) -> Vec<f64> {
        let mut x = vec![0.0; self.total];
        for e in (0..self.edge_count()).rev() {
            let s = f.edge_samples(e);
            for (i, &v) in s.iter().enumerate() {
                if let Some(d) = self.node_dof(e, i) {
                    x[d] = v;
                }
            }
        }
        x
    }
}

/// Symmetric matrix with the sparsity of a graph mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMatrix {
    pub(crate) diag: Vec<f64>,
    /// `links[e][i]` couples node `i` and node `i + 1` of edge `e`.
    pub(crate) links: Vec<Vec<f64>>,
}

impl ChainMatrix {
    fn zeros(dofs: &DofMap) -> Self {
        ChainMatrix {
            diag: vec![0.0; dofs.len()],
            links: (0..dofs.edge_count()).map(|e| vec![0.0; dofs.intervals(e)]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: f64, other: &ChainMatrix) -> ChainMatrix {
        ChainMatrix {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + c * b).collect(),
            links: self
                .links
                .iter()
                .zip(&other.links)
                .map(|(la, lb)| la.iter().zip(lb).map(|(a, b)| a + c * b).collect())
                .collect(),
        }
    }

    /// `y = M x`.
    pub fn mul_vec(&self, dofs: &DofMap, x: &[f64], y: &mut [f64]) {
        for (yi, (d, xi)) in y.iter_mut().zip(self.diag.iter().zip(x)) {
            *yi = d * xi;
        }
        for (e, links) in self.links.iter().enumerate() {
            let n = links.len();
            let mut couple = |a: Option<usize>, b: Option<usize>, m: f64| {
                if let (Some(a), Some(b)) = (a, b) {
                    y[a] += m * x[b];
                    y[b] += m * x[a];
                }
            };
            if n == 1 {
                couple(dofs.node_dof(e, 0), dofs.node_dof(e, 1), links[0]);
                continue;
            }
            let s = dofs.interior_start(e);
            couple(dofs.node_dof(e, 0), Some(s), links[0]);
            couple(Some(s + n - 2), dofs.node_dof(e, n), links[n - 1]);
            for i in 1..n - 1 {
                let (a, b, m) = (s + i - 1, s + i, links[i]);
                y[a] += m * x[b];
                y[b] += m * x[a];
            }
        }
    }

    /// `xᵀ M y`.
    pub fn bilinear(&self, dofs: &DofMap, x: &[f64], y: &[f64]) -> f64 {
        let mut my = vec![0.0; y.len()];
        self.mul_vec(dofs, y, &mut my);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self, dofs: &DofMap) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (e, links) in self.links.iter().enumerate() {
            for (i, &v) in links.iter().enumerate() {
                if let (Some(a), Some(b)) = (dofs.node_dof(e, i), dofs.node_dof(e, i + 1)) {
                    m[(a, b)] += v;
                    m[(b, a)] += v;
                }
            }
        }
        m
    }
}

/// Form matrix, mass matrix and dof numbering on a fixed mesh.
#[derive(Clone, Debug)]
pub struct DiscreteForms {
    pub stiffness: ChainMatrix,
    pub mass: ChainMatrix,
    /// Potential and vertex terms of `stiffness`, without the kinetic part.
    pub lower_order: ChainMatrix,
    pub steps: Vec<f64>,
    pub dofs: DofMap,
}

impl DiscreteForms {
    /// `xᵀ A y` with the kinetic part summed as differences, which avoids the
    /// cancellation of `O(1/h)` entries on fine meshes.
    pub fn energy(&self, x: &[f64], y: &[f64]) -> f64 {
        let kinetic: f64 = self.differences(x).iter().zip(self.differences(y)).map(|(a, b)| a * b).sum();
        kinetic + self.lower_order.bilinear(&self.dofs, x, y)
    }

    /// Nodal differences `(x_{i+1} - x_i)/√h` of every interval, edge by edge.
    pub fn differences(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dofs.len() + self.dofs.edge_count());
        for (e, &h) in self.steps.iter().enumerate() {
            let s = 1.0 / h.sqrt();
            let n = self.dofs.intervals(e);
            let start = self.dofs.interior_start(e);
            let end = |i: usize| self.dofs.node_dof(e, i).map_or(0.0, |d| x[d]);
            if n == 1 {
                out.push((end(1) - end(0)) * s);
                continue;
            }
            let inner = &x[start..start + n - 1];
            out.push((inner[0] - end(0)) * s);
            out.extend(inner.windows(2).map(|w| (w[1] - w[0]) * s));
            out.push((end(n) - inner[n - 2]) * s);
        }
        out
    }
}

/// `∫_{interval} q φ_i φ_j` for the two hat functions of one interval.
fn potential_element(q: &Potential, e: usize, x0: f64, h: f64) -> [f64; 3] {
    match q.edge(e) {
        EdgePotential::Constant(c) => [c * h / 3.0, c * h / 6.0, c * h / 3.0],
        _ => {
            let mut out = [0.0; 3];
            for (t, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                let qv = q.value(e, x0 + t * h) * w * h;
                let (a, b) = (1.0 - t, *t);
                out[0] += qv * a * a;
                out[1] += qv * a * b;
                out[2] += qv * b * b;
            }
            out
        }
    }
}

/// Assemble `A` (form) and `B` (consistent mass) on `mesh`.
pub fn assemble_on_mesh(
    graph: &MetricGraph,
    q: &Potential,
    mesh: &Mesh,
) -> Result<DiscreteForms, FemError> {
    if q.edge_count() != graph.edge_count() {
        return Err(FemError::PotentialMismatch {
            expected: graph.edge_count(),
            found: q.edge_count(),
        });
    }
    if mesh.all_intervals().len() != graph.edge_count() {
        return Err(MeshError::EdgeCountMismatch {
            expected: graph.edge_count(),
            found: mesh.all_intervals().len(),
        }
        .into());
    }
    let dofs = DofMap::new(graph, mesh);
    if dofs.is_empty() {
        return Err(FemError::EmptySpace);
    }
    let mut a = ChainMatrix::zeros(&dofs);
    let mut b = ChainMatrix::zeros(&dofs);
    let mut low = ChainMatrix::zeros(&dofs);
    let mut steps = Vec::with_capacity(graph.edge_count());
    for (e, edge) in graph.edges().iter().enumerate() {
        let n = mesh.intervals(e);
        let h = edge.length / n as f64;
        steps.push(h);
        for i in 0..n {
            let pot = potential_element(q, e, i as f64 * h, h);
            if pot.iter().any(|v| !v.is_finite()) {
                return Err(FemError::NonFinitePotential { edge: e });
            }
            let left = dofs.node_dof(e, i);
            let right = dofs.node_dof(e, i + 1);
            if let Some(l) = left {
                a.diag[l] += 1.0 / h + pot[0];
                low.diag[l] += pot[0];
                b.diag[l] += h / 3.0;
            }
            if let Some(r) = right {
                a.diag[r] += 1.0 / h + pot[2];
                low.diag[r] += pot[2];
                b.diag[r] += h / 3.0;
            }
            a.links[e][i] = -1.0 / h + pot[1];
            low.links[e][i] = pot[1];
            b.links[e][i] = h / 6.0;
        }
    }
    for v in 0..graph.vertex_count() {
        if let (Coupling::Finite(alpha), Some(d)) = (graph.coupling(v), dofs.vertex_dof(v)) {
            a.diag[d] += alpha;
            low.diag[d] += alpha;
        }
    }
    Ok(DiscreteForms { stiffness: a, mass: b, lower_order: low, steps, dofs })
}

/// Assemble with `n_e = max(2, ⌈ℓ_e/h⌉)`.
pub fn assemble_discrete_forms(
    graph: &MetricGraph,
    q: &Potential,
    h: f64,
) -> Result<DiscreteForms, FemError> {
    let mesh = Mesh::uniform(graph, h)?;
    assemble_on_mesh(graph, q, &mesh)
}

/// Quadratic-form pieces of one function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormParts {
    pub kinetic: f64,
    pub potential: f64,
    pub vertex: f64,
    pub norm_sq: f64,
}

impl FormParts {
    pub fn form(&self) -> f64 {
        self.kinetic + self.potential + self.vertex
    }
}

/// `∫ q f g` with the same per-interval rule used in assembly.
pub fn potential_inner(q: &Potential, f: &MeshFunction, g: &MeshFunction) -> f64 {
    if f.mesh() != g.mesh() {
        let (x, y) = f.aligned(g);
        return potential_inner(q, &x, &y);
    }
    let mut acc = 0.0;
    for e in 0..f.edge_count() {
        let (fs, gs) = (f.edge_samples(e), g.edge_samples(e));
        let h = f.step(e);
        for i in 0..fs.len() - 1 {
            let m = potential_element(q, e, i as f64 * h, h);
            acc += m[0] * fs[i] * gs[i]
                + m[1] * (fs[i] * gs[i + 1] + fs[i + 1] * gs[i])
                + m[2] * fs[i + 1] * gs[i + 1];
        }
    }
    acc
}

/// Bilinear form `h(f, g)`. Dirichlet vertices contribute nothing; admissibility is the caller's job.
pub fn form_inner(graph: &MetricGraph, q: &Potential, f: &MeshFunction, g: &MeshFunction) -> f64 {
    let vertex: f64 = (0..graph.vertex_count())
        .filter_map(|v| match graph.coupling(v) {
            Coupling::Finite(a) => Some((v, a)),
            Coupling::Dirichlet => None,
        })
        .filter_map(|(v, a)| Some(a * f.vertex_value(graph, v)? * g.vertex_value(graph, v)?))
        .sum();
    f.derivative_inner(g) + potential_inner(q, f, g) + vertex
}

pub fn form_parts(graph: &MetricGraph, q: &Potential, f: &MeshFunction) -> FormParts {
    let vertex = (0..graph.vertex_count())
        .filter_map(|v| match graph.coupling(v) {
            Coupling::Finite(a) => Some(a * f.vertex_value(graph, v)?.powi(2)),
            Coupling::Dirichlet => None,
        })
        .sum();
    FormParts {
        kinetic: f.derivative_inner(f),
        potential: potential_inner(q, f, f),
        vertex,
        norm_sq: f.l2_inner(f),
    }
}

/// `R(f) = h(f) / ‖f‖²`.
pub fn rayleigh_quotient(graph: &MetricGraph, q: &Potential, f: &MeshFunction) -> Result<f64, MeshError> {
    f.check_admissible(graph, 1e-10 * f.sup_norm().max(1e-300))?;
    let parts = form_parts(graph, q, f);
    if parts.norm_sq <= 0.0 {
        return Err(MeshError::ZeroNorm);
    }
    Ok(parts.form() / parts.norm_sq)
}

/// Dense `(H, G)` with `H_ij = h(f_i, f_j)` and `G_ij = ⟨f_i, f_j⟩`.
pub fn trial_matrices(
    graph: &MetricGraph,
    q: &Potential,
    members: &[MeshFunction],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = members.len();
    let mut h = DMatrix::zeros(k, k);
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let hv = form_inner(graph, q, &members[i], &members[j]);
            let gv = members[i].l2_inner(&members[j]);
            h[(i, j)] = hv;
            h[(j, i)] = hv;
            g[(i, j)] = gv;
            g[(j, i)] = gv;
        }
    }
    (h, g)
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_hat_function() {
        let g = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        let forms = assemble_discrete_forms(&g, &Potential::zero(&g), 0.5).unwrap();
        assert_eq!(forms.dofs.len(), 1);
        let a = forms.stiffness.to_dense(&forms.dofs);
        let b = forms.mass.to_dense(&forms.dofs);
        assert_relative_eq!(a[(0, 0)], 4.0, max_relative = 1e-15);
        assert_relative_eq!(b[(0, 0)], 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn coupling_only_touches_vertex_dof() {
        let star = MetricGraph::star(&[1.0, 1.0, 1.0], Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap();
        let gamma = 2.5;
        let mut c = star.couplings().to_vec();
        c[0] = Coupling::Finite(gamma);
        let robin = star.with_couplings(c).unwrap();
        let q = Potential::zero(&star);
        let a0 = assemble_discrete_forms(&star, &q, 0.25).unwrap();
        let a1 = assemble_discrete_forms(&robin, &q, 0.25).unwrap();
        let diff = a1.stiffness.to_dense(&a1.dofs) - a0.stiffness.to_dense(&a0.dofs);
        let center = a0.dofs.vertex_dof(0).unwrap();
        for i in 0..diff.nrows() {
            for j in 0..diff.ncols() {
                let expected = if i == center && j == center { gamma } else { 0.0 };
                assert_relative_eq!(diff[(i, j)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_potential_adds_mass() {
        let g = MetricGraph::flower(&[1.0, 0.7], Coupling::Finite(1.0)).unwrap();
        let c = 3.25;
        let f0 = assemble_discrete_forms(&g, &Potential::zero(&g), 0.1).unwrap();
        let fc = assemble_discrete_forms(&g, &Potential::constant(&g, c), 0.1).unwrap();
        let expected = f0.stiffness.add_scaled(c, &f0.mass);
        let (x, y) = (fc.stiffness.to_dense(&fc.dofs), expected.to_dense(&f0.dofs));
        assert!((x - y).amax() < 1e-12);
    }

    #[test]
    fn loop_endpoints_share_dof() {
        let g = MetricGraph::flower(&[1.0], Coupling::Finite(0.0)).unwrap();
        let forms = assemble_discrete_forms(&g, &Potential::zero(&g), 0.25).unwrap();
        // 1 vertex + 3 interior nodes
        assert_eq!(forms.dofs.len(), 4);
        assert_eq!(forms.dofs.node_dof(0, 0), forms.dofs.node_dof(0, 4));
        let ones = vec![1.0; 4];
        assert_relative_eq!(forms.stiffness.bilinear(&forms.dofs, &ones, &ones), 0.0, epsilon = 1e-12);
        assert_relative_eq!(forms.mass.bilinear(&forms.dofs, &ones, &ones), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn rayleigh_quotient_examples() {
        let g = MetricGraph::star(&[1.0, 2.0, 0.5], Coupling::Finite(1.5), Coupling::Finite(0.5)).unwrap();
        let mesh = Mesh::uniform(&g, 0.1).unwrap();
        let one = MeshFunction::from_fn(&g, &mesh, |_, _| 1.0);
        let kirchhoff = g.with_uniform_coupling(Coupling::Finite(0.0));
        assert_relative_eq!(
            rayleigh_quotient(&kirchhoff, &Potential::zero(&g), &one).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        let q = Potential::piecewise_constant(&g, &[1.0, -2.0, 4.0]).unwrap();
        let expected = (q.integral() + g.alpha_total()) / g.total_length();
        assert_relative_eq!(rayleigh_quotient(&g, &q, &one).unwrap(), expected, max_relative = 1e-12);

        let zero = MeshFunction::zeros(&g, &mesh);
        assert_eq!(rayleigh_quotient(&g, &q, &zero), Err(MeshError::ZeroNorm));
    }

    #[test]
    fn sine_on_longest_edge_energy() {
        let g = MetricGraph::star(&[1.0, 2.0, 0.5], Coupling::Finite(3.0), Coupling::Finite(0.5)).unwrap();
        let mesh = Mesh::uniform(&g, 1.0 / 2048.0).unwrap();
        let l = 2.0f64;
        let f = MeshFunction::from_fn(&g, &mesh, |e, x| {
            if e == 1 { (2.0 / l).sqrt() * (std::f64::consts::PI * x / l).sin() } else { 0.0 }
        });
        let r = rayleigh_quotient(&g, &Potential::zero(&g), &f).unwrap();
        assert_relative_eq!(r, std::f64::consts::PI.powi(2) / 4.0, max_relative = 1e-6);
    }

    #[test]
    fn dense_form_matches_function_form() {
        let g = MetricGraph::cycle(&[1.0, 0.6, 0.9], Coupling::Finite(2.0)).unwrap();
        let q = Potential::new(
            &g,
            vec![
                EdgePotential::Poly(vec![1.0, -2.0, 3.0]),
                EdgePotential::Samples(vec![0.0, 4.0, -1.0]),
                EdgePotential::Constant(-0.5),
            ],
        )
        .unwrap();
        let forms = assemble_discrete_forms(&g, &q, 0.2).unwrap();
        let x: Vec<f64> = (0..forms.dofs.len()).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let f = forms.dofs.to_function(&g, &x);
        let parts = form_parts(&g, &q, &f);
        assert_relative_eq!(parts.form(), forms.stiffness.bilinear(&forms.dofs, &x, &x), max_relative = 1e-12);
        assert_relative_eq!(parts.norm_sq, forms.mass.bilinear(&forms.dofs, &x, &x), max_relative = 1e-12);
        assert_eq!(forms.dofs.from_function(&f), x);
    }
}
