//! Real potentials on a metric graph and the integrals the bounds consume.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metric_graph::MetricGraph;

/// Relative stopping threshold for dyadic Simpson refinement.
pub const QUADRATURE_RTOL: f64 = 1e-9;
/// Absolute floor for the same.
pub const QUADRATURE_ATOL: f64 = 1e-12;
/// Subintervals per smooth piece on the grid used for the sup norm.
pub const SUP_GRID: usize = 1024;
const MAX_LEVEL: u32 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential describes {found} edges but the graph has {expected}")]
    EdgeCountMismatch { expected: usize, found: usize },
    #[error("edge {edge}: sampled potential needs at least 2 samples, got {count}")]
    TooFewSamples { edge: usize, count: usize },
    #[error("edge {edge}: polynomial potential needs at least one coefficient")]
    EmptyPolynomial { edge: usize },
    #[error("edge {edge}: potential value is not finite")]
    NonFinite { edge: usize },
    #[error("edge {edge}: coordinate {x} outside [0, {length}]")]
    OutOfRange { edge: usize, x: f64, length: f64 },
    #[error("no edge {edge}")]
    UnknownEdge { edge: usize },
    #[error("exponent p = {0} is below 1")]
    InvalidExponent(f64),
}

/// Lebesgue exponent `p ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self, PotentialError> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(PotentialError::InvalidExponent(p))
        }
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// `x^{1/p}` with the convention `x^0 = 1` for every `x >= 0` when `p = ∞`.
    pub fn root(self, x: f64) -> f64 {
        match self {
            Exponent::Finite(p) => x.powf(1.0 / p),
            Exponent::Infinity => 1.0,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Exponent::Infinity);
        }
        let p: f64 = t.parse().map_err(|_| format!("invalid exponent '{s}'"))?;
        Exponent::new(p).map_err(|e| e.to_string())
    }
}

/// Potential restricted to one edge, in the edge coordinate `x ∈ [0, ℓ_e]`.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgePotential {
    Constant(f64),
    /// `c[0] + c[1] x + c[2] x² + …`
    Poly(Vec<f64>),
    /// Values at uniformly spaced nodes including both endpoints; linear in between.
    Samples(Vec<f64>),
}

impl EdgePotential {
    fn eval_unchecked(&self, x: f64, length: f64) -> f64 {
        match self {
            EdgePotential::Constant(c) => *c,
            EdgePotential::Poly(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            EdgePotential::Samples(s) => {
                let n = s.len() - 1;
                let t = (x / length * n as f64).clamp(0.0, n as f64);
                let i = (t.floor() as usize).min(n - 1);
                let w = t - i as f64;
                s[i] * (1.0 - w) + s[i + 1] * w
            }
        }
    }

    /// Points where the representation may fail to be smooth.
    fn breakpoints(&self, length: f64) -> Vec<f64> {
        match self {
            EdgePotential::Samples(s) => {
                let n = s.len() - 1;
                (0..=n).map(|i| length * i as f64 / n as f64).collect()
            }
            _ => vec![0.0, length],
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            EdgePotential::Constant(c) => Some(*c),
            EdgePotential::Poly(c) if c.iter().skip(1).all(|&a| a == 0.0) => Some(c[0]),
            EdgePotential::Samples(s) if s.iter().all(|&v| v == s[0]) => Some(s[0]),
            _ => None,
        }
    }
}

/// Potential `q` on every edge of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    edges: Vec<EdgePotential>,
    lengths: Vec<f64>,
}

impl Potential {
    pub fn new(graph: &MetricGraph, edges: Vec<EdgePotential>) -> Result<Self, PotentialError> {
        if edges.len() != graph.edge_count() {
            return Err(PotentialError::EdgeCountMismatch {
                expected: graph.edge_count(),
                found: edges.len(),
            });
        }
        for (edge, rep) in edges.iter().enumerate() {
            let values: &[f64] = match rep {
                EdgePotential::Constant(c) => std::slice::from_ref(c),
                EdgePotential::Poly(c) => {
                    if c.is_empty() {
                        return Err(PotentialError::EmptyPolynomial { edge });
                    }
                    c
                }
                EdgePotential::Samples(s) => {
                    if s.len() < 2 {
                        return Err(PotentialError::TooFewSamples { edge, count: s.len() });
                    }
                    s
                }
            };
            if values.iter().any(|v| !v.is_finite()) {
                return Err(PotentialError::NonFinite { edge });
            }
        }
        Ok(Potential {
            edges,
            lengths: graph.edges().iter().map(|e| e.length).collect(),
        })
    }

    pub fn zero(graph: &MetricGraph) -> Self {
        Self::constant(graph, 0.0)
    }

    pub fn constant(graph: &MetricGraph, c: f64) -> Self {
        Potential {
            edges: vec![EdgePotential::Constant(c); graph.edge_count()],
            lengths: graph.edges().iter().map(|e| e.length).collect(),
        }
    }

    /// Different constant on each edge.
    pub fn piecewise_constant(graph: &MetricGraph, values: &[f64]) -> Result<Self, PotentialError> {
        Self::new(graph, values.iter().map(|&c| EdgePotential::Constant(c)).collect())
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: usize) -> &EdgePotential {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[EdgePotential] {
        &self.edges
    }

    pub fn length(&self, e: usize) -> f64 {
        self.lengths[e]
    }

    /// `q ≡ 0` exactly.
    pub fn is_zero(&self) -> bool {
        self.edges.iter().all(|r| r.constant_value() == Some(0.0))
    }

    /// Pointwise value, linear interpolation for samples.
    pub fn eval(&self, e: usize, x: f64) -> Result<f64, PotentialError> {
        let rep = self.edges.get(e).ok_or(PotentialError::UnknownEdge { edge: e })?;
        let length = self.lengths[e];
        let slack = 1e-12 * length;
        if !(x >= -slack && x <= length + slack) {
            return Err(PotentialError::OutOfRange { edge: e, x, length });
        }
        Ok(rep.eval_unchecked(x.clamp(0.0, length), length))
    }

    /// Value without range checking; `x` is clamped into the edge.
    pub fn value(&self, e: usize, x: f64) -> f64 {
        let length = self.lengths[e];
        self.edges[e].eval_unchecked(x.clamp(0.0, length), length)
    }

    /// `Σ_e ∫_e g(q) dx` by dyadically refined composite Simpson on each smooth piece.
    pub fn integrate_with<F>(&self, g: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        let pieces: Vec<(usize, f64, f64)> = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(e, rep)| {
                let bp = rep.breakpoints(self.lengths[e]);
                bp.windows(2).map(move |w| (e, w[0], w[1])).collect::<Vec<_>>()
            })
            .collect();
        let simpson = |m: usize| -> f64 {
            pieces
                .iter()
                .map(|&(e, a, b)| {
                    let h = (b - a) / m as f64;
                    let f = |x: f64| g(self.value(e, x));
                    let mut s = f(a) + f(b);
                    for i in 1..m {
                        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                        s += w * f(a + h * i as f64);
                    }
                    s * h / 3.0
                })
                .sum()
        };
        let mut m = 2;
        let mut prev = simpson(m);
        for _ in 0..MAX_LEVEL {
            m *= 2;
            let cur = simpson(m);
            let diff = (cur - prev).abs();
            if diff <= QUADRATURE_RTOL * cur.abs() || diff <= QUADRATURE_ATOL {
                return cur;
            }
            prev = cur;
        }
        prev
    }

    /// Signed integral `∫_Γ q dx`.
    pub fn integral(&self) -> f64 {
        self.integrate_with(|v| v)
    }

    /// Maximum of `q` over the sup grid (exact for constant and sampled pieces).
    pub fn grid_max(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for (e, rep) in self.edges.iter().enumerate() {
            let bp = rep.breakpoints(self.lengths[e]);
            for w in bp.windows(2) {
                let sub = match rep {
                    EdgePotential::Poly(c) if c.len() > 2 => SUP_GRID,
                    _ => 1,
                };
                for i in 0..=sub {
                    let x = w[0] + (w[1] - w[0]) * i as f64 / sub as f64;
                    best = best.max(self.value(e, x));
                }
            }
        }
        best
    }

    /// `‖q₊‖_{L^p(Γ)}`.
    pub fn lp_norm_positive_part(&self, p: Exponent) -> f64 {
        match p {
            Exponent::Infinity => self.grid_max().max(0.0),
            Exponent::Finite(p) => {
                let integral = self.integrate_with(|v| v.max(0.0).powf(p));
                integral.max(0.0).powf(1.0 / p)
            }
        }
    }

    /// `q ≤ 0` on the sup grid, so `‖q₊‖_p = 0`.
    pub fn is_nonpositive(&self) -> bool {
        self.grid_max() <= 0.0
    }
}

pub fn eval_potential(q: &Potential, e: usize, x: f64) -> Result<f64, PotentialError> {
    q.eval(e, x)
}

pub fn lp_norm_positive_part(q: &Potential, p: f64) -> Result<f64, PotentialError> {
    Ok(q.lp_norm_positive_part(Exponent::new(p)?))
}

pub fn integrate_potential(q: &Potential) -> f64 {
    q.integral()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::{Coupling, MetricGraph};
    use approx::assert_relative_eq;

    fn unit() -> MetricGraph {
        MetricGraph::interval(1.0, Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap()
    }

    #[test]
    fn evaluation() {
        let g = MetricGraph::path(&[1.0, 2.0], Coupling::Finite(0.0)).unwrap();
        let q = Potential::constant(&g, 5.0);
        assert_eq!(q.eval(1, 1.7).unwrap(), 5.0);
        let q = Potential::new(&unit(), vec![EdgePotential::Poly(vec![0.0, 1.0])]).unwrap();
        assert_eq!(q.eval(0, 0.25).unwrap(), 0.25);
        let q = Potential::new(&unit(), vec![EdgePotential::Samples(vec![0.0, 1.0, 0.0])]).unwrap();
        assert_eq!(q.eval(0, 0.25).unwrap(), 0.5);
        assert_eq!(q.eval(0, 1.0).unwrap(), 0.0);
        assert!(matches!(q.eval(0, 1.5), Err(PotentialError::OutOfRange { .. })));
        assert!(matches!(q.eval(3, 0.5), Err(PotentialError::UnknownEdge { .. })));
    }

    #[test]
    fn validation() {
        let g = unit();
        assert!(matches!(
            Potential::new(&g, vec![EdgePotential::Samples(vec![1.0])]),
            Err(PotentialError::TooFewSamples { .. })
        ));
        assert!(matches!(
            Potential::new(&g, vec![EdgePotential::Constant(f64::NAN)]),
            Err(PotentialError::NonFinite { .. })
        ));
        assert!(matches!(
            Potential::new(&g, vec![]),
            Err(PotentialError::EdgeCountMismatch { .. })
        ));
        assert!(Exponent::new(0.5).is_err());
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
    }

    #[test]
    fn norms_of_constants() {
        let g = MetricGraph::path(&[1.0, 0.5, 2.0], Coupling::Finite(0.0)).unwrap();
        let l: f64 = 3.5;
        let q = Potential::constant(&g, 3.0);
        for p in [1.0, 2.0, 3.5] {
            let n = q.lp_norm_positive_part(Exponent::Finite(p));
            assert_relative_eq!(n, 3.0 * l.powf(1.0 / p), max_relative = 1e-12);
        }
        assert_eq!(q.lp_norm_positive_part(Exponent::Infinity), 3.0);
        let neg = Potential::constant(&g, -1.0);
        for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
            assert_eq!(neg.lp_norm_positive_part(p), 0.0);
        }
    }

    #[test]
    fn linear_potential_norms() {
        let q = Potential::new(&unit(), vec![EdgePotential::Poly(vec![0.0, 1.0])]).unwrap();
        assert_relative_eq!(
            q.lp_norm_positive_part(Exponent::Finite(2.0)),
            1.0 / 3f64.sqrt(),
            max_relative = 1e-9
        );
        assert_relative_eq!(q.integral(), 0.5, max_relative = 1e-12);
        assert_eq!(q.lp_norm_positive_part(Exponent::Infinity), 1.0);
    }

    #[test]
    fn signed_integrals() {
        let g = MetricGraph::path(&[1.0, 1.0], Coupling::Finite(0.0)).unwrap();
        assert_relative_eq!(Potential::constant(&g, -1.0).integral(), -2.0);
        let hat = Potential::new(&unit(), vec![EdgePotential::Samples(vec![0.0, 1.0, 0.0])]).unwrap();
        assert_relative_eq!(hat.integral(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn kinked_positive_part_converges() {
        // q = x - 1/2: ∫ (q₊)² = ∫_0^{1/2} t² dt = 1/24
        let q = Potential::new(&unit(), vec![EdgePotential::Poly(vec![-0.5, 1.0])]).unwrap();
        let n = q.lp_norm_positive_part(Exponent::Finite(2.0));
        assert_relative_eq!(n * n, 1.0 / 24.0, max_relative = 1e-8);
        let l1 = q.lp_norm_positive_part(Exponent::Finite(1.0));
        assert!(l1 >= q.integral());
    }

    #[test]
    fn infinity_root_convention() {
        assert_eq!(Exponent::Infinity.root(0.0), 1.0);
        assert_eq!(Exponent::Infinity.root(7.0), 1.0);
        assert_eq!(Exponent::Finite(2.0).root(9.0), 3.0);
    }
}
