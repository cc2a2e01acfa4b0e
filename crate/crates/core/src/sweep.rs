//! Uniform coupling sweep: all `α_v` scaled by a common factor.

use crate::bounds::{evaluate_all, BoundReport};
use crate::metric_graph::MetricGraph;
use crate::parallel::map_collect;
use crate::potential::{Exponent, Potential};
use crate::solver::{solve_spectrum, SolverConfig, SolverError};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub factor: f64,
    pub alpha_total: f64,
    pub eigenvalues: Vec<f64>,
    pub error_estimates: Vec<f64>,
    pub converged: bool,
    /// One report per requested exponent, in input order.
    pub bounds: Vec<BoundReport>,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

pub fn sweep_alpha(
    graph: &MetricGraph,
    q: &Potential,
    factors: &[f64],
    k: usize,
    ps: &[Exponent],
    config: &SolverConfig,
) -> Result<Vec<SweepPoint>, SolverError> {
    let cfg = config.clone().eigenvalues_only();
    map_collect(factors, |&factor| {
        let g = graph.with_scaled_couplings(factor);
        let res = solve_spectrum(&g, q, k, &cfg)?;
        Ok(SweepPoint {
            factor,
            alpha_total: g.alpha_total(),
            eigenvalues: res.eigenvalues,
            error_estimates: res.error_estimates,
            converged: res.converged,
            bounds: ps.iter().map(|&p| evaluate_all(&g, q, p, k)).collect(),
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::Coupling;

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-2, 1e4, 7);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[6], 1e4);
        assert!((g[3] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn star_sweep_rises() {
        let g = MetricGraph::star(&[1.0; 3], Coupling::Finite(1.0), Coupling::Finite(1.0)).unwrap();
        let q = Potential::zero(&g);
        let pts = sweep_alpha(&g, &q, &log_grid(1e-2, 1e2, 5), 1, &[Exponent::Finite(2.0)], &SolverConfig::default()).unwrap();
        assert!(pts.windows(2).all(|w| w[0].eigenvalues[0] <= w[1].eigenvalues[0]));
    }
}
