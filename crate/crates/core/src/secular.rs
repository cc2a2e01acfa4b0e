//! Eigenvalues of the free Laplacian (`q ≡ 0`) from the vertex matching
//! conditions, independent of any discretisation.
//!
//! On each edge a solution of `-f'' = λf` is `f = a·c(λ,x) + b·s(λ,x)` with
//! `c(0)=1, c'(0)=0, s(0)=0, s'(0)=1`. Continuity and the coupling condition at
//! every vertex give a square homogeneous system in the `2|E|` coefficients,
//! singular exactly at the eigenvalues. The nullity is the multiplicity.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::metric_graph::{Coupling, MetricGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecularError {
    #[error("root cluster near λ = {near} not resolved at grid step {step}; retry with a finer grid")]
    ClusterUnresolved { near: f64, step: f64 },
    #[error("found only {found} of {requested} eigenvalues below {limit}")]
    Incomplete { found: usize, requested: usize, limit: f64 },
    #[error("k must be at least 1")]
    ZeroCount,
}

/// Root tolerance (absolute) of the bisection.
pub const ROOT_TOL: f64 = 1e-10;
const NULL_TOL: f64 = 1e-6;
const TOUCH_TOL: f64 = 1e-7;

/// `(c, c', s, s')` at `x`.
fn basis(lambda: f64, x: f64) -> (f64, f64, f64, f64) {
    if lambda > 0.0 {
        let k = lambda.sqrt();
        let (sin, cos) = (k * x).sin_cos();
        let s = if k * x < 1e-8 { x } else { sin / k };
        (cos, -lambda * s, s, cos)
    } else if lambda < 0.0 {
        let k = (-lambda).sqrt();
        let (sinh, cosh) = ((k * x).sinh(), (k * x).cosh());
        let s = if k * x < 1e-8 { x } else { sinh / k };
        (cosh, -lambda * s, s, cosh)
    } else {
        (1.0, 0.0, x, 1.0)
    }
}

/// Matching matrix at `λ`, with the `s` coefficients and derivative rows
/// rescaled by `max(√|λ|, 1)` so all entries stay of unit size.
pub fn secular_matrix(graph: &MetricGraph, lambda: f64) -> DMatrix<f64> {
    let m = 2 * graph.edge_count();
    let kf = lambda.abs().sqrt().max(1.0);
    // per vertex: (value row, outgoing derivative row) of every incident end
    let mut ends: Vec<Vec<(Vec<f64>, Vec<f64>)>> = vec![Vec::new(); graph.vertex_count()];
    for (e, edge) in graph.edges().iter().enumerate() {
        let (a, b) = (2 * e, 2 * e + 1);
        let mut val = vec![0.0; m];
        let mut der = vec![0.0; m];
        val[a] = 1.0;
        der[b] = 1.0;
        ends[edge.tail].push((val, der));
        let (c, dc, s, ds) = basis(lambda, edge.length);
        let (dc, s, ds) = (dc / kf, s * kf, ds);
        let mut val = vec![0.0; m];
        let mut der = vec![0.0; m];
        val[a] = c;
        val[b] = s;
        der[a] = -dc;
        der[b] = -ds;
        ends[edge.head].push((val, der));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (v, list) in ends.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        match graph.coupling(v) {
            Coupling::Dirichlet => rows.extend(list.iter().map(|(val, _)| val.clone())),
            Coupling::Finite(alpha) => {
                let first = &list[0].0;
                for (val, _) in &list[1..] {
                    rows.push(val.iter().zip(first).map(|(x, y)| x - y).collect());
                }
                let mut row = vec![0.0; m];
                for (_, der) in list {
                    row.iter_mut().zip(der).for_each(|(r, d)| *r += d);
                }
                row.iter_mut().zip(first).for_each(|(r, f)| *r -= alpha / kf * f);
                rows.push(row);
            }
        }
    }
    DMatrix::from_fn(m, m, |i, j| rows[i][j])
}

fn determinant(graph: &MetricGraph, lambda: f64) -> f64 {
    secular_matrix(graph, lambda).lu().determinant()
}

fn singular_values(graph: &MetricGraph, lambda: f64) -> Vec<f64> {
    let mut sv: Vec<f64> = secular_matrix(graph, lambda)
        .singular_values()
        .iter()
        .copied()
        .collect();
    sv.sort_by(f64::total_cmp);
    sv
}

fn nullity(graph: &MetricGraph, lambda: f64) -> usize {
    singular_values(graph, lambda).iter().filter(|&&s| s < NULL_TOL).count()
}

/// Lowest admissible eigenvalue: `-max(4A², 4A/ℓ_min)` with `A = Σ (α_v)₋`.
pub fn spectral_floor(graph: &MetricGraph) -> f64 {
    let a = graph.alpha_negative_total();
    let ell_min = graph.invariants().ell_min;
    -(4.0 * a * a).max(4.0 * a / ell_min)
}

fn bisect(graph: &MetricGraph, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = determinant(graph, mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimiser of the smallest singular value on `[lo, hi]`.
fn golden_min(graph: &MetricGraph, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let smin = |x: f64| singular_values(graph, x)[0];
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (smin(x1), smin(x2));
    while hi - lo > ROOT_TOL {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = smin(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = smin(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, smin(x))
}

/// Roots with multiplicity on `[start, limit]` by scanning with step `step`.
fn scan(graph: &MetricGraph, start: f64, limit: f64, step: f64) -> Vec<(f64, usize)> {
    let count = ((limit - start) / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();
    let dets: Vec<f64> = grid.iter().map(|&x| determinant(graph, x)).collect();
    let smins: Vec<f64> = grid.iter().map(|&x| singular_values(graph, x)[0]).collect();
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..count {
        if dets[i] == 0.0 {
            roots.push(grid[i]);
        } else if (dets[i] > 0.0) != (dets[i + 1] > 0.0) && dets[i + 1] != 0.0 {
            roots.push(bisect(graph, grid[i], grid[i + 1], dets[i]));
        }
    }
    // roots of even multiplicity touch zero without a sign change
    for i in 1..count {
        if smins[i] <= smins[i - 1] && smins[i] <= smins[i + 1] {
            let (x, s) = golden_min(graph, grid[i - 1], grid[i + 1]);
            if s < TOUCH_TOL {
                roots.push(x);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    let mut merged: Vec<(f64, usize)> = Vec::new();
    for r in roots {
        match merged.last() {
            Some(&(prev, _)) if (r - prev).abs() <= 1e-6 * r.abs().max(1.0) => {}
            _ => {
                let mult = nullity(graph, r).max(1);
                merged.push((r, mult));
            }
        }
    }
    merged
}

fn expand(roots: &[(f64, usize)], k: usize) -> Vec<f64> {
    roots
        .iter()
        .flat_map(|&(r, m)| std::iter::repeat_n(r, m))
        .take(k)
        .collect()
}

/// First `k` eigenvalues of the Laplacian (`q ≡ 0`) with the graph's vertex conditions.
pub fn secular_spectrum_q0(graph: &MetricGraph, k: usize) -> Result<Vec<f64>, SecularError> {
    secular_spectrum_with_step(graph, k, None)
}

/// As [`secular_spectrum_q0`] with an explicit grid step (default `π²/(4L²)`).
pub fn secular_spectrum_with_step(
    graph: &MetricGraph,
    k: usize,
    step: Option<f64>,
) -> Result<Vec<f64>, SecularError> {
    if k == 0 {
        return Err(SecularError::ZeroCount);
    }
    let inv = graph.invariants();
    let l = inv.total_length;
    let step = step.unwrap_or(PI * PI / (4.0 * l * l));
    // irrational offset keeps grid points off symmetric roots such as 0
    let start = spectral_floor(graph) - step * (1.0 + 1.0 / 2f64.sqrt());
    let dirichlet_cap = (PI / l * (k as f64 - 1.0 + inv.edge_count as f64)).powi(2);
    let mut limit = dirichlet_cap * 1.05 + 4.0 * step;

    let coarse = loop {
        let roots = scan(graph, start, limit, step);
        let found: usize = roots.iter().map(|r| r.1).sum();
        if found >= k {
            break roots;
        }
        if limit > 16.0 * (dirichlet_cap + step) {
            return Err(SecularError::Incomplete { found, requested: k, limit });
        }
        limit *= 2.0;
    };
    // confirm on finer grids; a close pair can hide inside one coarse cell
    let mut prev = expand(&coarse, k);
    let mut h = step;
    let mut near = prev.last().copied().unwrap_or(start);
    for _ in 0..MAX_REFINE {
        h /= 4.0;
        let next = expand(&scan(graph, start, limit, h), k);
        match first_disagreement(&prev, &next) {
            None => return Ok(next),
            Some(x) => near = x,
        }
        prev = next;
    }
    Err(SecularError::ClusterUnresolved { near, step: h })
}

/// Grid refinements tried before a cluster is reported unresolved.
const MAX_REFINE: usize = 4;

fn first_disagreement(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return Some(a.last().or(b.last()).copied().unwrap_or(0.0));
    }
    a.iter()
        .zip(b)
        .find(|(x, y)| (*x - *y).abs() > 1e-7 * x.abs().max(1.0))
        .map(|(x, _)| *x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::Edge;
    use crate::solver::exact_dirichlet_spectrum;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * y.abs().max(1.0), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn interval_dirichlet_matches_exact() {
        let g = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        close(&secular_spectrum_q0(&g, 4).unwrap(), &exact_dirichlet_spectrum(&g, 4), 1e-9);
    }

    #[test]
    fn interval_neumann() {
        let g = MetricGraph::interval(1.0, Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap();
        let p2 = PI * PI;
        close(&secular_spectrum_q0(&g, 3).unwrap(), &[0.0, p2, 4.0 * p2], 1e-9);
    }

    #[test]
    fn attractive_wells_bind() {
        let g = MetricGraph::interval(1.0, Coupling::Finite(-1.0), Coupling::Finite(-1.0)).unwrap();
        let v = secular_spectrum_q0(&g, 2).unwrap();
        assert!(v[0] < 0.0);
        // even bound state: κ tanh(κ/2) = 1
        let kappa = (-v[0]).sqrt();
        assert!((kappa * (kappa / 2.0).tanh() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn equilateral_star_has_double_root() {
        let g = MetricGraph::star(&[1.0; 3], Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap();
        let p2 = PI * PI;
        close(&secular_spectrum_q0(&g, 4).unwrap(), &[0.0, p2 / 4.0, p2 / 4.0, p2], 1e-9);
    }

    #[test]
    fn star_all_dirichlet_triple() {
        let g = MetricGraph::star(&[1.0; 3], Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        close(&secular_spectrum_q0(&g, 5).unwrap(), &exact_dirichlet_spectrum(&g, 5), 1e-9);
    }

    #[test]
    fn figure_eight_and_cycle() {
        let p2 = PI * PI;
        let g = MetricGraph::flower(&[1.0, 1.0], Coupling::Finite(0.0)).unwrap();
        // ±sin(πx) on the two loops, then sin(2πx) on each loop and cos(2πx) on both
        close(&secular_spectrum_q0(&g, 6).unwrap(), &[0.0, p2, 4.0 * p2, 4.0 * p2, 4.0 * p2, 9.0 * p2], 1e-9);
        let c = MetricGraph::cycle(&[0.5, 0.5], Coupling::Finite(0.0)).unwrap();
        close(&secular_spectrum_q0(&c, 3).unwrap(), &[0.0, 4.0 * p2, 4.0 * p2], 1e-9);
    }

    #[test]
    fn robin_interval() {
        let alpha = 2.0;
        let g = MetricGraph::new(
            vec![Coupling::Finite(alpha), Coupling::Dirichlet],
            vec![Edge::new(0, 1, 1.0)],
        )
        .unwrap();
        let v = secular_spectrum_q0(&g, 1).unwrap()[0];
        let k = v.sqrt();
        // f = sin(k(1-x)); f'(0) outgoing = -k cos k = α sin k
        assert!((-k * k.cos() - alpha * k.sin()).abs() < 1e-8);
    }

    #[test]
    fn close_pair_inside_one_grid_cell() {
        let g = MetricGraph::new(
            vec![Coupling::Finite(24.898199129811424), Coupling::Finite(0.0), Coupling::Finite(0.0)],
            vec![Edge::new(0, 1, 1.0016720357624915), Edge::new(0, 2, 0.9665746241448736)],
        )
        .unwrap();
        let v = secular_spectrum_q0(&g, 2).unwrap();
        close(&v, &[2.16423484745, 2.56674069755], 1e-9);
    }
}
