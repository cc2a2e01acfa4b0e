//! Solver against closed forms and the secular determinant on fixed shapes.

use std::f64::consts::PI;

use qgraph::metric_graph::{Coupling, Edge, MetricGraph};
use qgraph::potential::Potential;
use qgraph::secular::secular_spectrum_q0;
use qgraph::solver::{exact_dirichlet_spectrum, solve_spectrum, SolverConfig};

const P2: f64 = PI * PI;

fn solve(g: &MetricGraph, k: usize) -> Vec<f64> {
    solve_spectrum(g, &Potential::zero(g), k, &SolverConfig::with_tol(1e-7).eigenvalues_only())
        .unwrap()
        .eigenvalues
}

fn close(a: &[f64], b: &[f64], rtol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= rtol * y.abs().max(1.0), "{a:?} vs {b:?}");
    }
}

#[test]
fn dirichlet_interval() {
    let g = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
    close(&solve(&g, 3), &[P2, 4.0 * P2, 9.0 * P2], 1e-3);
}

#[test]
fn equilateral_star() {
    let z = Coupling::Finite(0.0);
    let g = MetricGraph::star(&[1.0; 3], z, z).unwrap();
    close(&solve(&g, 4), &[0.0, P2 / 4.0, P2 / 4.0, P2], 1e-5);
}

#[test]
fn dirichlet_edges_merge() {
    let g = MetricGraph::path(&[1.0, 0.5], Coupling::Dirichlet).unwrap();
    let exact = exact_dirichlet_spectrum(&g, 4);
    close(&exact, &[P2, 4.0 * P2, 4.0 * P2, 9.0 * P2], 1e-12);
    close(&secular_spectrum_q0(&g, 4).unwrap(), &exact, 1e-9);
    close(&solve(&g, 4), &exact, 1e-5);
}

#[test]
fn lollipop_and_flower_match_secular() {
    let g = MetricGraph::new(
        vec![Coupling::Finite(2.0), Coupling::Finite(0.5)],
        vec![Edge::new(0, 0, 1.5), Edge::new(0, 1, 1.0)],
    )
    .unwrap();
    close(&solve(&g, 5), &secular_spectrum_q0(&g, 5).unwrap(), 1e-5);
    let f = MetricGraph::flower(&[1.0, 0.6, 0.3], Coupling::Finite(3.0)).unwrap();
    close(&solve(&f, 5), &secular_spectrum_q0(&f, 5).unwrap(), 1e-5);
}

#[test]
fn attractive_coupling_binds() {
    let g = MetricGraph::interval(1.0, Coupling::Finite(-1.0), Coupling::Finite(-1.0)).unwrap();
    let s = solve(&g, 2);
    assert!(s[0] < 0.0);
    close(&s, &secular_spectrum_q0(&g, 2).unwrap(), 1e-5);
}
