//! Eigenvalues and eigenfunctions of the discretised operator.
//!
//! The pencil `A - σB` is factored by eliminating the interior nodes of each
//! edge (a tridiagonal `LDLᵀ`) and then forming the dense Schur complement on
//! the vertex degrees of freedom. With `σ` below the spectrum the factorisation
//! is positive definite and drives shift-invert subspace iteration. For other
//! shifts the inertia of the factors counts the eigenvalues below `σ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fem::{assemble_on_mesh, ChainMatrix, DiscreteForms, DofMap, FemError};
use crate::mesh::{Mesh, MeshFunction};
use crate::metric_graph::MetricGraph;
use crate::potential::Potential;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("requested {requested} eigenvalues but the discrete space has dimension {available}")]
    TooManyEigenvalues { requested: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroCount,
    #[error("shifted matrix is not positive definite; eigenvector iteration failed")]
    NotPositiveDefinite,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Refinement and accuracy controls for [`solve_spectrum`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative change between successive dyadic meshes that counts as converged.
    pub tol: f64,
    /// Starting mesh size; `ℓ_min / 16` when `None`.
    pub initial_h: Option<f64>,
    /// Maximum number of mesh halvings after the initial mesh.
    pub max_refinements: usize,
    /// Compute eigenfunctions on the final mesh.
    pub eigenfunctions: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-6,
            initial_h: None,
            max_refinements: 10,
            eigenfunctions: true,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(tol: f64) -> Self {
        SolverConfig { tol, ..Default::default() }
    }

    pub fn eigenvalues_only(mut self) -> Self {
        self.eigenfunctions = false;
        self
    }
}

/// Ordered eigenvalues with `L²`-orthonormal eigenfunctions.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// Empty when eigenfunctions were not requested.
    pub eigenfunctions: Vec<MeshFunction>,
    /// `|λ_h - λ_{h/2}| / 3` from the last refinement step (`+inf` with a single level).
    pub error_estimates: Vec<f64>,
    /// Largest interval length of the final mesh.
    pub mesh_size: f64,
    pub mesh: Mesh,
    pub converged: bool,
    pub refinements: usize,
    /// Eigenvalues on every mesh visited, coarsest first.
    pub history: Vec<Vec<f64>>,
}

impl SpectralResult {
    /// Groups of indices whose eigenvalues agree to relative `rtol`.
    pub fn degenerate_clusters(&self, rtol: f64) -> Vec<Vec<usize>> {
        cluster_indices(&self.eigenvalues, rtol, self.spectral_scale())
    }

    fn spectral_scale(&self) -> f64 {
        self.eigenvalues.iter().fold(1e-12, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn cluster_indices(values: &[f64], rtol: f64, scale: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (v - values[*c.last().unwrap()]).abs() <= rtol * v.abs().max(scale * 1e-6) => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    clusters
}

struct EdgeFactor {
    start: usize,
    pivots: Vec<f64>,
    /// Subdiagonal multipliers of the unit lower bidiagonal factor.
    multipliers: Vec<f64>,
    tail: Option<usize>,
    head: Option<usize>,
    tail_link: f64,
    head_link: f64,
    negatives: usize,
}

impl EdgeFactor {
    fn solve_in_place(&self, r: &mut [f64]) {
        let m = r.len();
        for j in 1..m {
            r[j] -= self.multipliers[j - 1] * r[j - 1];
        }
        for (x, d) in r.iter_mut().zip(&self.pivots) {
            *x /= d;
        }
        for j in (0..m - 1).rev() {
            r[j] -= self.multipliers[j] * r[j + 1];
        }
    }
}

/// Block factorisation of `A - σB`.
pub struct ShiftedFactor<'a> {
    dofs: &'a DofMap,
    edges: Vec<EdgeFactor>,
    schur: DMatrix<f64>,
}

impl<'a> ShiftedFactor<'a> {
    pub fn new(forms: &'a DiscreteForms, sigma: f64) -> Self {
        let dofs = &forms.dofs;
        let shifted = forms.stiffness.add_scaled(-sigma, &forms.mass);
        let nv = dofs.vertex_dofs();
        let mut schur = DMatrix::zeros(nv, nv);
        for i in 0..nv {
            schur[(i, i)] = shifted.diag[i];
        }
        let mut edges = Vec::with_capacity(dofs.edge_count());
        for e in 0..dofs.edge_count() {
            let f = factor_edge(&shifted, dofs, e);
            let m = f.pivots.len();
            let mut first = vec![0.0; m];
            first[0] = 1.0;
            f.solve_in_place(&mut first);
            let mut last = vec![0.0; m];
            last[m - 1] = 1.0;
            f.solve_in_place(&mut last);
            let (a, b) = (f.tail_link, f.head_link);
            if let Some(t) = f.tail {
                schur[(t, t)] -= a * a * first[0];
            }
            if let Some(h) = f.head {
                schur[(h, h)] -= b * b * last[m - 1];
            }
            if let (Some(t), Some(h)) = (f.tail, f.head) {
                let c = a * b * first[m - 1];
                schur[(t, h)] -= c;
                schur[(h, t)] -= c;
            }
            edges.push(f);
        }
        ShiftedFactor { dofs, edges, schur }
    }

    /// Number of discrete eigenvalues strictly below the shift.
    pub fn negative_count(&self) -> usize {
        let interior: usize = self.edges.iter().map(|f| f.negatives).sum();
        let vertex = if self.schur.nrows() == 0 {
            0
        } else {
            SymmetricEigen::new(self.schur.clone())
                .eigenvalues
                .iter()
                .filter(|&&v| v < 0.0)
                .count()
        };
        interior + vertex
    }

    /// Solver for a positive definite shift.
    pub fn into_spd_solver(self) -> Result<SpdSolver<'a>, SolverError> {
        if self.edges.iter().any(|f| f.negatives > 0) {
            return Err(SolverError::NotPositiveDefinite);
        }
        let chol = if self.schur.nrows() == 0 {
            None
        } else {
            Some(
                self.schur
                    .clone()
                    .cholesky()
                    .ok_or(SolverError::NotPositiveDefinite)?,
            )
        };
        Ok(SpdSolver { factor: self, chol })
    }
}

fn factor_edge(k: &ChainMatrix, dofs: &DofMap, e: usize) -> EdgeFactor {
    let n = dofs.intervals(e);
    let m = n - 1;
    let start = dofs.interior_start(e);
    let links = &k.links[e];
    let mut pivots = Vec::with_capacity(m);
    let mut multipliers = Vec::with_capacity(m.saturating_sub(1));
    let mut negatives = 0;
    for j in 0..m {
        let diag = k.diag[start + j];
        let mut d = if j == 0 {
            diag
        } else {
            let off = links[j];
            let l = off / pivots[j - 1];
            multipliers.push(l);
            diag - l * off
        };
        let floor = f64::EPSILON * diag.abs().max(f64::MIN_POSITIVE);
        if d.abs() < floor {
            d = floor;
        }
        if d < 0.0 {
            negatives += 1;
        }
        pivots.push(d);
    }
    let (t, h) = dofs.edge_ends(e);
    let _ = (t, h);
    EdgeFactor {
        start,
        pivots,
        multipliers,
        tail: dofs.node_dof(e, 0),
        head: dofs.node_dof(e, n),
        tail_link: links[0],
        head_link: links[n - 1],
        negatives,
    }
}

/// Repeated solves with a positive definite `A - σB`.
pub struct SpdSolver<'a> {
    factor: ShiftedFactor<'a>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl SpdSolver<'_> {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let nv = self.factor.dofs.vertex_dofs();
        let mut x = rhs.to_vec();
        // eliminate interiors: x_I ← T⁻¹ b_I, then reduce vertex rhs
        for f in &self.factor.edges {
            let m = f.pivots.len();
            f.solve_in_place(&mut x[f.start..f.start + m]);
        }
        let mut vrhs: Vec<f64> = rhs[..nv].to_vec();
        for f in &self.factor.edges {
            let m = f.pivots.len();
            if let Some(t) = f.tail {
                vrhs[t] -= f.tail_link * x[f.start];
            }
            if let Some(h) = f.head {
                vrhs[h] -= f.head_link * x[f.start + m - 1];
            }
        }
        if let Some(chol) = &self.chol {
            let xv = chol.solve(&nalgebra::DVector::from_vec(vrhs));
            x[..nv].copy_from_slice(xv.as_slice());
        }
        // back-substitute x_I ← T⁻¹ (b_I - C x_V)
        for f in &self.factor.edges {
            let m = f.pivots.len();
            let mut r = rhs[f.start..f.start + m].to_vec();
            if let Some(t) = f.tail {
                r[0] -= f.tail_link * x[t];
            }
            if let Some(h) = f.head {
                r[m - 1] -= f.head_link * x[h];
            }
            f.solve_in_place(&mut r);
            x[f.start..f.start + m].copy_from_slice(&r);
        }
        x
    }
}

/// Number of discrete eigenvalues strictly below `sigma`.
///
/// Exact in exact arithmetic. Close to an eigenvalue of an interior edge block
/// the Schur complement is badly scaled and the count can be off by one, so
/// this is a diagnostic and not used to locate eigenvalues.
pub fn count_below(forms: &DiscreteForms, sigma: f64) -> usize {
    ShiftedFactor::new(forms, sigma).negative_count()
}

/// The `k` smallest discrete eigenvalues.
pub fn discrete_eigenvalues(forms: &DiscreteForms, k: usize) -> Result<Vec<f64>, SolverError> {
    Ok(discrete_eigenpairs(forms, k, None)?.0)
}

/// Largest shift not above `hint` at which `A - σB` is positive definite.
fn spd_shift<'a>(forms: &'a DiscreteForms, hint: f64) -> (f64, SpdSolver<'a>) {
    let mut sigma = hint;
    let mut step = hint.abs().max(1.0);
    loop {
        if let Ok(s) = ShiftedFactor::new(forms, sigma).into_spd_solver() {
            return (sigma, s);
        }
        sigma -= step;
        step *= 2.0;
    }
}

/// Lowest `k` eigenpairs by shift-invert subspace iteration.
///
/// Vectors are `B`-orthonormal with the largest entry positive. `shift_hint`
/// should lie below the lowest eigenvalue; it is lowered until the shifted
/// matrix is positive definite.
pub fn discrete_eigenpairs(
    forms: &DiscreteForms,
    k: usize,
    shift_hint: Option<f64>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), SolverError> {
    let mut it = subspace_iteration(forms, k, shift_hint, None, 1e-13)?;
    it.values.truncate(k);
    it.vectors.truncate(k);
    for v in &mut it.vectors {
        fix_sign(v);
    }
    Ok((it.values, it.vectors))
}

/// Ritz values and the full iteration block, ascending.
struct Subspace {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// Block size `min(n, 2k + 8)`; `start` seeds the block (padded with random
/// columns). Stops when the first `k` Ritz values move by at most
/// `rtol` relative, or once rounding noise stops the decrease.
fn subspace_iteration(
    forms: &DiscreteForms,
    k: usize,
    shift_hint: Option<f64>,
    start: Option<Vec<Vec<f64>>>,
    rtol: f64,
) -> Result<Subspace, SolverError> {
    if k == 0 {
        return Err(SolverError::ZeroCount);
    }
    let n = forms.dofs.len();
    if k > n {
        return Err(SolverError::TooManyEigenvalues { requested: k, available: n });
    }
    let dofs = &forms.dofs;
    let block = (2 * k + 8).min(n);
    let (mut sigma, mut solver) = spd_shift(forms, shift_hint.unwrap_or(-1.0));
    let mut reshifted = shift_hint.is_some();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1e55);
    let mut x: Vec<Vec<f64>> = start.unwrap_or_default();
    x.truncate(block);
    if x.len() < block {
        x.extend(random_block(&mut rng, n, block - x.len()));
    }
    let mut ritz: Vec<f64> = vec![f64::INFINITY; block];
    let mut last_delta = f64::INFINITY;
    for iter in 0..1000 {
        let mut y: Vec<Vec<f64>> = x
            .iter()
            .map(|col| {
                let mut bx = vec![0.0; n];
                forms.mass.mul_vec(dofs, col, &mut bx);
                solver.solve(&bx)
            })
            .collect();
        b_orthonormalize(&forms.mass, dofs, &mut y);
        while y.len() < block {
            y.extend(random_block(&mut rng, n, block - y.len()));
            b_orthonormalize(&forms.mass, dofs, &mut y);
        }
        let (theta, vecs) = rayleigh_ritz(forms, &y);
        let scale = theta[..k].iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let delta = theta[..k]
            .iter()
            .zip(&ritz[..k])
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        x = vecs;
        ritz = theta;
        let stalled = iter >= 8 && delta < 1e-8 * scale && delta >= 0.7 * last_delta;
        if (delta <= rtol * scale && iter >= 2) || stalled {
            break;
        }
        last_delta = delta;
        if !reshifted && iter >= 3 {
            // move the shift just below the emerging spectrum
            reshifted = true;
            let gap = 0.05 * (ritz[k - 1] - ritz[0]).max(0.05 * scale);
            let target = ritz[0] - gap;
            if target > sigma {
                let (s, sol) = spd_shift(forms, target);
                sigma = s;
                solver = sol;
            }
        }
    }
    Ok(Subspace { values: ritz, vectors: x })
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Ritz pairs of `A` on the span of `B`-orthonormal columns, ascending.
fn rayleigh_ritz(forms: &DiscreteForms, y: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = forms.dofs.len();
    let b = y.len();
    let diffs: Vec<Vec<f64>> = y.iter().map(|v| forms.differences(v)).collect();
    let low: Vec<Vec<f64>> = y
        .iter()
        .map(|v| {
            let mut out = vec![0.0; n];
            forms.lower_order.mul_vec(&forms.dofs, v, &mut out);
            out
        })
        .collect();
    let mut ar = DMatrix::zeros(b, b);
    for i in 0..b {
        for j in i..b {
            let v = dot(&diffs[i], &diffs[j]) + dot(&y[i], &low[j]);
            ar[(i, j)] = v;
            ar[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(ar);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vecs = order
        .iter()
        .map(|&c| {
            let mut v = vec![0.0; n];
            for (r, yr) in y.iter().enumerate() {
                let w = eig.eigenvectors[(r, c)];
                v.iter_mut().zip(yr).for_each(|(vi, yi)| *vi += w * yi);
            }
            v
        })
        .collect();
    (order.iter().map(|&c| eig.eigenvalues[c]).collect(), vecs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn b_orthonormalize(mass: &ChainMatrix, dofs: &DofMap, cols: &mut Vec<Vec<f64>>) {
    let n = dofs.len();
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    let mut kept_b: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut v in cols.drain(..) {
        for _ in 0..2 {
            for (q, bq) in kept.iter().zip(&kept_b) {
                let c = dot(&v, bq);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let mut bv = vec![0.0; n];
        mass.mul_vec(dofs, &v, &mut bv);
        let norm = dot(&v, &bv).sqrt();
        if norm > 1e-300 && norm.is_finite() {
            v.iter_mut().for_each(|x| *x /= norm);
            bv.iter_mut().for_each(|x| *x /= norm);
            kept.push(v);
            kept_b.push(bv);
        }
    }
    *cols = kept;
}

/// Largest-magnitude entry positive (lowest index on ties).
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigenpairs on a fixed mesh.
pub fn solve_on_mesh(
    graph: &MetricGraph,
    q: &Potential,
    mesh: &Mesh,
    k: usize,
) -> Result<(Vec<f64>, Vec<MeshFunction>), SolverError> {
    let forms = assemble_on_mesh(graph, q, mesh)?;
    let (values, vectors) = discrete_eigenpairs(&forms, k, None)?;
    let funcs = vectors.iter().map(|x| forms.dofs.to_function(graph, x)).collect();
    Ok((values, funcs))
}

/// Ritz-value settling tolerance on each refinement level.
const INNER_RTOL: f64 = 1e-12;

/// First `k` eigenvalues of `H_q` with the graph's vertex conditions, on
/// dyadically refined meshes until the relative change drops below `tol`.
pub fn solve_spectrum(
    graph: &MetricGraph,
    q: &Potential,
    k: usize,
    config: &SolverConfig,
) -> Result<SpectralResult, SolverError> {
    if k == 0 {
        return Err(SolverError::ZeroCount);
    }
    if !(config.tol > 0.0) {
        return Err(SolverError::BadTolerance(config.tol));
    }
    let inv = graph.invariants();
    let h0 = config.initial_h.unwrap_or(inv.ell_min / 16.0);
    let mut mesh = Mesh::uniform(graph, h0).map_err(FemError::from)?;
    let floor = 1e-3 * PI * PI / (inv.total_length * inv.total_length);

    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut vectors: Vec<Vec<f64>>;
    let mut converged = false;
    let mut forms;
    let mut refinements = 0;
    let mut previous = None;
    loop {
        forms = assemble_on_mesh(graph, q, &mesh)?;
        let available = forms.dofs.len();
        if k > available {
            if refinements < config.max_refinements {
                mesh = mesh.refined();
                refinements += 1;
                continue;
            }
            return Err(SolverError::TooManyEigenvalues { requested: k, available });
        }
        // refinement lowers eigenvalues, so step the shift down from the last level
        let hint = history.last().map(|p: &Vec<f64>| {
            let spread = (p[k - 1] - p[0]).abs().max(floor);
            p[0] - 0.1 * spread - 0.01 * p[0].abs()
        });
        let start = previous.take().map(|(coarse, block): (DofMap, Vec<Vec<f64>>)| {
            block.iter().map(|x| forms.dofs.prolong(&coarse, x)).collect()
        });
        let it = subspace_iteration(&forms, k, hint, start, INNER_RTOL)?;
        let values = it.values[..k].to_vec();
        vectors = it.vectors[..k].to_vec();
        previous = Some((forms.dofs.clone(), it.vectors));
        if let Some(prev) = history.last() {
            converged = prev
                .iter()
                .zip(&values)
                .all(|(a, b)| (a - b).abs() <= config.tol * b.abs().max(floor));
        }
        history.push(values);
        if converged || refinements >= config.max_refinements {
            break;
        }
        mesh = mesh.refined();
        refinements += 1;
    }

    let eigenvalues = history.last().cloned().unwrap_or_default();
    let error_estimates = match history.len() {
        0 | 1 => vec![f64::INFINITY; k],
        n => history[n - 2]
            .iter()
            .zip(&history[n - 1])
            .map(|(a, b)| (a - b).abs() / 3.0)
            .collect(),
    };
    for v in &mut vectors {
        fix_sign(v);
    }
    let eigenfunctions = if config.eigenfunctions {
        vectors.iter().map(|x| forms.dofs.to_function(graph, x)).collect()
    } else {
        Vec::new()
    };
    Ok(SpectralResult {
        eigenvalues,
        eigenfunctions,
        error_estimates,
        mesh_size: mesh.max_step(graph),
        mesh,
        converged,
        refinements,
        history,
    })
}

/// A Dirichlet mode `√(2/ℓ_e) sin(jπx/ℓ_e)` on one edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirichletMode {
    pub edge: usize,
    pub mode: usize,
    pub eigenvalue: f64,
}

/// First `k` modes of the merged per-edge sine spectra; ties by edge index, then mode.
pub fn dirichlet_modes(graph: &MetricGraph, k: usize) -> Vec<DirichletMode> {
    let mut all: Vec<DirichletMode> = graph
        .edges()
        .iter()
        .enumerate()
        .flat_map(|(edge, e)| {
            (1..=k).map(move |mode| DirichletMode {
                edge,
                mode,
                eigenvalue: (PI * mode as f64 / e.length).powi(2),
            })
        })
        .collect();
    all.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue));
    // stable reorder inside runs of numerically equal values
    let mut start = 0;
    while start < all.len() {
        let mut end = start + 1;
        while end < all.len()
            && (all[end].eigenvalue - all[start].eigenvalue).abs() <= 1e-12 * all[start].eigenvalue
        {
            end += 1;
        }
        all[start..end].sort_by_key(|m| (m.edge, m.mode));
        start = end;
    }
    all.truncate(k);
    all
}

/// `λ_1^D ≤ … ≤ λ_k^D` of the Laplacian with Dirichlet conditions at every vertex.
pub fn exact_dirichlet_spectrum(graph: &MetricGraph, k: usize) -> Vec<f64> {
    dirichlet_modes(graph, k).iter().map(|m| m.eigenvalue).collect()
}

/// Weyl counting function `Σ_e ⌊ℓ_e √λ / π⌋`.
pub fn dirichlet_counting(graph: &MetricGraph, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    graph
        .edges()
        .iter()
        .map(|e| (e.length * lambda.sqrt() / PI + 1e-9).floor() as usize)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_discrete_forms;
    use crate::metric_graph::Coupling;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    /// Dense generalized eigenvalues via `B^{-1/2} A B^{-1/2}`.
    fn dense_eigenvalues(forms: &DiscreteForms) -> Vec<f64> {
        let a = forms.stiffness.to_dense(&forms.dofs);
        let b = forms.mass.to_dense(&forms.dofs);
        let l = b.cholesky().unwrap().l();
        let linv = l.clone().try_inverse().unwrap();
        let c = &linv * a * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let mut v: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn sample_graphs() -> Vec<MetricGraph> {
        vec![
            MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap(),
            MetricGraph::interval(1.3, Coupling::Finite(-1.0), Coupling::Finite(2.0)).unwrap(),
            MetricGraph::star(&[1.0, 0.7, 0.4], Coupling::Finite(3.0), Coupling::Finite(0.0)).unwrap(),
            MetricGraph::flower(&[1.0, 0.6], Coupling::Finite(0.5)).unwrap(),
            MetricGraph::new(
                vec![Coupling::Finite(1.0), Coupling::Dirichlet, Coupling::Finite(-0.5)],
                vec![
                    crate::metric_graph::Edge::new(0, 1, 0.8),
                    crate::metric_graph::Edge::new(1, 2, 0.5),
                    crate::metric_graph::Edge::new(0, 2, 1.1),
                    crate::metric_graph::Edge::new(0, 2, 0.3),
                    crate::metric_graph::Edge::new(2, 2, 0.9),
                ],
            )
            .unwrap(),
        ]
    }

    #[test]
    fn subspace_iteration_matches_dense_solver() {
        for g in sample_graphs() {
            let q = Potential::piecewise_constant(
                &g,
                &(0..g.edge_count()).map(|i| i as f64 - 1.5).collect::<Vec<_>>(),
            )
            .unwrap();
            let forms = assemble_discrete_forms(&g, &q, 0.1).unwrap();
            let dense = dense_eigenvalues(&forms);
            let k = dense.len().min(8);
            let bis = discrete_eigenvalues(&forms, k).unwrap();
            for w in dense.windows(2).take(k) {
                if w[1] - w[0] > 1e-6 * w[1].abs() {
                    let mid = 0.5 * (w[0] + w[1]);
                    let below = dense.iter().filter(|v| **v < mid).count();
                    assert_eq!(count_below(&forms, mid), below);
                }
            }
            for (a, b) in bis.iter().zip(&dense) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}\n{bis:?}\n{dense:?}");
            }
        }
    }

    #[test]
    fn eigenvectors_are_b_orthonormal_residual_free() {
        for g in sample_graphs() {
            let q = Potential::constant(&g, 0.7);
            let forms = assemble_discrete_forms(&g, &q, 0.05).unwrap();
            let k = 5.min(forms.dofs.len());
            let (vals, vecs) = discrete_eigenpairs(&forms, k, None).unwrap();
            for i in 0..k {
                for j in 0..k {
                    let b = forms.mass.bilinear(&forms.dofs, &vecs[i], &vecs[j]);
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((b - expected).abs() < 1e-9, "gram {i} {j} = {b}");
                }
                let r = forms.stiffness.bilinear(&forms.dofs, &vecs[i], &vecs[i]);
                assert_relative_eq!(r, vals[i], max_relative = 1e-9, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn spd_solver_inverts() {
        let g = &sample_graphs()[4];
        let forms = assemble_discrete_forms(g, &Potential::zero(g), 0.1).unwrap();
        let lam1 = discrete_eigenvalues(&forms, 1).unwrap()[0];
        let solver = ShiftedFactor::new(&forms, lam1 - 1.0).into_spd_solver().unwrap();
        let n = forms.dofs.len();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = solver.solve(&b);
        let k = forms.stiffness.add_scaled(-(lam1 - 1.0), &forms.mass);
        let mut kx = vec![0.0; n];
        k.mul_vec(&forms.dofs, &x, &mut kx);
        for (u, v) in kx.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
        assert!(ShiftedFactor::new(&forms, lam1 + 1.0).into_spd_solver().is_err());
    }

    #[test]
    fn unit_interval_dirichlet() {
        let g = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        let r = solve_spectrum(&g, &Potential::zero(&g), 3, &SolverConfig::with_tol(1e-6)).unwrap();
        assert!(r.converged);
        for (j, lam) in r.eigenvalues.iter().enumerate() {
            let exact = (PI * (j + 1) as f64).powi(2);
            assert!(*lam >= exact);
            assert_relative_eq!(*lam, exact, max_relative = 1e-3);
        }
        for f in &r.eigenfunctions {
            assert_relative_eq!(f.l2_norm(), 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn unit_interval_neumann() {
        let g = MetricGraph::interval(1.0, Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap();
        let r = solve_spectrum(&g, &Potential::zero(&g), 2, &SolverConfig::with_tol(1e-6)).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-10);
        assert_relative_eq!(r.eigenvalues[1], PI * PI, max_relative = 1e-3);
    }

    #[test]
    fn equilateral_star_spectrum() {
        let g = MetricGraph::star(&[1.0; 3], Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap();
        let r = solve_spectrum(&g, &Potential::zero(&g), 4, &SolverConfig::with_tol(1e-7)).unwrap();
        let expected = [0.0, PI * PI / 4.0, PI * PI / 4.0, PI * PI];
        for (a, b) in r.eigenvalues.iter().zip(expected) {
            assert!((a - b).abs() <= 1e-4 * b.max(1.0), "{a} vs {b}");
        }
        assert_eq!(r.degenerate_clusters(1e-8), vec![vec![0], vec![1, 2], vec![3]]);
    }

    #[test]
    fn refinement_is_monotone() {
        let g = &sample_graphs()[2];
        let q = Potential::constant(g, 1.0);
        let r = solve_spectrum(g, &q, 4, &SolverConfig::with_tol(1e-7).eigenvalues_only()).unwrap();
        for w in r.history.windows(2) {
            for (coarse, fine) in w[0].iter().zip(&w[1]) {
                assert!(fine <= &(coarse + 1e-9 * coarse.abs().max(1.0)), "{:?}", r.history);
            }
        }
    }

    #[test]
    fn nonconvergence_is_flagged() {
        let g = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        let cfg = SolverConfig { tol: 1e-12, max_refinements: 1, ..Default::default() };
        let r = solve_spectrum(&g, &Potential::zero(&g), 2, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.eigenvalues.len(), 2);
    }

    #[test]
    fn exact_dirichlet_merges() {
        let g = MetricGraph::path(&[1.0, 0.5], Coupling::Dirichlet).unwrap();
        let v = exact_dirichlet_spectrum(&g, 4);
        let p2 = PI * PI;
        for (a, b) in v.iter().zip([p2, 4.0 * p2, 4.0 * p2, 9.0 * p2]) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
        let modes = dirichlet_modes(&g, 3);
        assert_eq!((modes[1].edge, modes[1].mode), (0, 2));
        assert_eq!((modes[2].edge, modes[2].mode), (1, 1));
        let star = MetricGraph::star(&[1.0; 3], Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        let v = exact_dirichlet_spectrum(&star, 4);
        assert_relative_eq!(v[2], p2, max_relative = 1e-14);
        assert_relative_eq!(v[3], 4.0 * p2, max_relative = 1e-14);
        assert_eq!(dirichlet_counting(&star, p2), 3);
    }
}
