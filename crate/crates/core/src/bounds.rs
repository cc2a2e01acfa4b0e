//! Closed-form upper bounds on `λ_k(H_q)` and the auxiliary norm inequalities.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::io::fmt_sig;
use crate::mesh::MeshFunction;
use crate::metric_graph::{GraphInvariants, MetricGraph};
use crate::potential::{Exponent, Potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("bound inapplicable: {0}")]
    Inapplicable(Inapplicable),
    #[error("function has zero L² norm")]
    ZeroNorm,
    #[error("k must be at least 1")]
    ZeroCount,
    #[error("csv output failed: {0}")]
    Csv(String),
}

/// Why a bound does not apply to an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inapplicable {
    Disconnected,
    Cycle,
    DirichletVertex,
    NegativeCoupling,
    PositiveCoupling,
    PositivePotential,
    KBelowTwo,
}

impl Inapplicable {
    pub fn as_str(self) -> &'static str {
        match self {
            Inapplicable::Disconnected => "disconnected",
            Inapplicable::Cycle => "cycle",
            Inapplicable::DirichletVertex => "Dirichlet vertex",
            Inapplicable::NegativeCoupling => "negative coupling",
            Inapplicable::PositiveCoupling => "positive coupling",
            Inapplicable::PositivePotential => "positive part of q",
            Inapplicable::KBelowTwo => "k < 2",
        }
    }
}

impl fmt::Display for Inapplicable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reason string attached to a finite-but-degenerate explicit bound.
pub const DEGENERATE_AT_ONE: &str = "degenerate at α=1";

/// `M` and `M_k` for a connected non-cycle graph.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologyConstants {
    pub m: f64,
    /// `m_k[k-1] = M_k`.
    pub m_k: Vec<f64>,
}

impl TopologyConstants {
    pub fn m_k(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.m_k.get(i)).copied()
    }
}

fn topology_gate(inv: &GraphInvariants) -> Result<(), Inapplicable> {
    if !inv.connected {
        Err(Inapplicable::Disconnected)
    } else if inv.is_cycle {
        Err(Inapplicable::Cycle)
    } else {
        Ok(())
    }
}

fn mk_value(inv: &GraphInvariants, k: usize) -> f64 {
    let pb = inv.pendants as f64 / 2.0 + 1.5 * inv.betti as f64;
    PI / inv.total_length.sqrt() * (k as f64 - 2.0 + pb)
}

pub fn topology_constants(inv: &GraphInvariants, k_max: usize) -> Result<TopologyConstants, BoundsError> {
    topology_gate(inv).map_err(BoundsError::Inapplicable)?;
    let pb = inv.pendants as f64 / 2.0 + 1.5 * inv.betti as f64;
    Ok(TopologyConstants {
        m: PI / inv.total_length.sqrt() * (pb - 1.0),
        m_k: (1..=k_max).map(|k| mk_value(inv, k)).collect(),
    })
}

/// `(∫q + α)/L`: the constant function as a trial function.
pub fn bound_trivial(graph: &MetricGraph, q: &Potential, alpha_total: f64) -> f64 {
    (q.integral() + alpha_total) / graph.total_length()
}

/// Longest-edge and edge-count forms of the universal principal bound.
pub fn bound_principal_universal(inv: &GraphInvariants, q_norm: f64, p: Exponent) -> (f64, f64) {
    let longest = p.root(2.0 / inv.ell_max) * q_norm + (PI / inv.ell_max).powi(2);
    let e = inv.edge_count as f64;
    let edges = p.root(2.0 * e / inv.total_length) * q_norm + (PI * e / inv.total_length).powi(2);
    (longest, edges)
}

pub fn bound_higher_universal(inv: &GraphInvariants, q_norm: f64, p: Exponent, k: usize) -> f64 {
    p.root(2.0 * k as f64 / inv.ell_min) * q_norm + bound_laplacian_dirichlet(inv, k)
}

pub fn bound_principal_explicit(
    inv: &GraphInvariants,
    consts: &TopologyConstants,
    q_norm: f64,
    p: Exponent,
    alpha_total: f64,
) -> f64 {
    let a = alpha_total;
    let den = a * a + 1.0;
    let (c1, c2, c3) = (a * (a + 1.0) / den, (a + 1.0) / den, a / den);
    let l = inv.total_length;
    let s = (1.0 / l.sqrt() + consts.m).powi(2);
    q_norm * p.root(c1 * 2.0 / inv.ell_max + c2 * s)
        + c1 * (PI / inv.ell_max).powi(2)
        + c2 * consts.m * consts.m / l
        + c3 * s
}

/// `+∞` when `|α - 1| < 10⁻⁹` or `M_k` was not precomputed.
pub fn bound_higher_explicit(
    inv: &GraphInvariants,
    consts: &TopologyConstants,
    q_norm: f64,
    p: Exponent,
    alpha_total: f64,
    k: usize,
) -> f64 {
    let a = alpha_total;
    let Some(mk) = consts.m_k(k) else {
        return f64::INFINITY;
    };
    if (a - 1.0).abs() < 1e-9 {
        return f64::INFINITY;
    }
    let den = (a - 1.0).powi(2);
    let (d1, d2, d3) = (a * (a + 1.0) / den, (a + 1.0) / den, a / den);
    let l = inv.total_length;
    let mk2 = mk * mk;
    q_norm * p.root(k as f64) * p.root(d1 * 2.0 / inv.ell_min + d2 * mk2)
        + d1 * bound_laplacian_dirichlet(inv, k)
        + d2 * mk2 / l
        + d3 * mk2
}

/// `(π²/L²)(k - 2 + P/2 + 3β/2)²` for connected non-cycle graphs.
pub fn bound_laplacian_neumann(inv: &GraphInvariants, k: usize) -> Result<f64, BoundsError> {
    topology_gate(inv).map_err(BoundsError::Inapplicable)?;
    let mk = mk_value(inv, k);
    Ok(mk * mk / inv.total_length)
}

/// `(π²/L²)(k - 1 + |E|)²`.
pub fn bound_laplacian_dirichlet(inv: &GraphInvariants, k: usize) -> f64 {
    (PI / inv.total_length * (k as f64 - 1.0 + inv.edge_count as f64)).powi(2)
}

/// Norms of a trial function that enter the auxiliary inequalities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionNorms {
    pub l2: f64,
    pub sup: f64,
    pub derivative_l2: f64,
    pub vertex_sup: f64,
}

impl FunctionNorms {
    pub fn of(graph: &MetricGraph, f: &MeshFunction) -> Self {
        FunctionNorms {
            l2: f.l2_norm(),
            sup: f.sup_norm(),
            derivative_l2: f.derivative_l2_norm(),
            vertex_sup: f.vertex_sup_norm(graph),
        }
    }
}

/// `‖q₊‖_p (‖f‖_∞/‖f‖₂)^{2/p} + (‖f'‖₂² + α‖f‖²_{L^∞(V)})/‖f‖₂²`.
pub fn holder_rayleigh_bound(
    norms: &FunctionNorms,
    q_norm: f64,
    p: Exponent,
    alpha_total: f64,
) -> Result<f64, BoundsError> {
    if !(norms.l2 > 0.0) {
        return Err(BoundsError::ZeroNorm);
    }
    let ratio = norms.sup / norms.l2;
    let kinetic = norms.derivative_l2.powi(2) + alpha_total * norms.vertex_sup.powi(2);
    Ok(q_norm * p.root(ratio * ratio) + kinetic / norms.l2.powi(2))
}

/// `‖f‖₂/√L + √L‖f'‖₂`, or only the second term for mean-zero `f`.
pub fn sup_norm_bound(l2: f64, derivative_l2: f64, total_length: f64, mean_zero: bool) -> f64 {
    let tail = total_length.sqrt() * derivative_l2;
    if mean_zero {
        tail
    } else {
        l2 / total_length.sqrt() + tail
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundId {
    Trivial,
    PrincipalUniversalLongest,
    PrincipalUniversalEdges,
    HigherUniversal,
    PrincipalExplicit,
    HigherExplicit,
    LaplacianNeumann,
    LaplacianDirichlet,
}

impl BoundId {
    pub const ALL: [BoundId; 8] = [
        BoundId::Trivial,
        BoundId::PrincipalUniversalLongest,
        BoundId::PrincipalUniversalEdges,
        BoundId::HigherUniversal,
        BoundId::PrincipalExplicit,
        BoundId::HigherExplicit,
        BoundId::LaplacianNeumann,
        BoundId::LaplacianDirichlet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::Trivial => "bound_trivial",
            BoundId::PrincipalUniversalLongest => "bound_principal_universal_longest",
            BoundId::PrincipalUniversalEdges => "bound_principal_universal_edges",
            BoundId::HigherUniversal => "bound_higher_universal",
            BoundId::PrincipalExplicit => "bound_principal_explicit",
            BoundId::HigherExplicit => "bound_higher_explicit",
            BoundId::LaplacianNeumann => "bound_laplacian_neumann",
            BoundId::LaplacianDirichlet => "bound_laplacian_dirichlet",
        }
    }

    pub fn citation(self) -> &'static str {
        match self {
            BoundId::Trivial => "constant trial function",
            BoundId::PrincipalUniversalLongest => "sine on the longest edge, any couplings",
            BoundId::PrincipalUniversalEdges => "sine on the longest edge with ℓ_max ≥ L/|E|",
            BoundId::HigherUniversal => "edgewise Dirichlet sines, any couplings",
            BoundId::PrincipalExplicit => "Dirichlet sine plus Kirchhoff ground state, α_v ≥ 0",
            BoundId::HigherExplicit => "Dirichlet sines plus Kirchhoff modes, α_v ≥ 0",
            BoundId::LaplacianNeumann => "topological bound for the Kirchhoff Laplacian",
            BoundId::LaplacianDirichlet => "Weyl counting for the Dirichlet Laplacian",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundEntry {
    pub id: BoundId,
    pub k: usize,
    pub p: Exponent,
    pub value: f64,
    pub applicable: bool,
    pub reason: Option<String>,
    pub citation: &'static str,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn applicable(&self) -> impl Iterator<Item = &BoundEntry> {
        self.entries.iter().filter(|e| e.applicable)
    }

    pub fn get(&self, id: BoundId, k: usize) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.id == id && e.k == k)
    }

    /// Smallest applicable value for each `k`.
    pub fn best(&self, k: usize) -> Option<&BoundEntry> {
        self.applicable()
            .filter(|e| e.k == k)
            .min_by(|a, b| a.value.total_cmp(&b.value))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BoundsError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| BoundsError::Csv(e.to_string());
        w.write_record(BOUND_COLUMNS).map_err(err)?;
        for e in &self.entries {
            w.write_record(e.csv_fields()).map_err(err)?;
        }
        w.flush().map_err(|e| BoundsError::Csv(e.to_string()))
    }
}

pub const BOUND_COLUMNS: [&str; 7] = ["bound_id", "k", "p", "value", "applicable", "reason", "citation"];

impl BoundEntry {
    /// Fields in [`BOUND_COLUMNS`] order.
    pub fn csv_fields(&self) -> [String; 7] {
        [
            self.id.as_str().to_string(),
            self.k.to_string(),
            self.p.to_string(),
            fmt_sig(self.value),
            self.applicable.to_string(),
            self.reason.clone().unwrap_or_default(),
            self.citation.to_string(),
        ]
    }
}

fn entry(id: BoundId, k: usize, p: Exponent, gate: Result<f64, Inapplicable>) -> BoundEntry {
    match gate {
        Ok(value) => BoundEntry {
            id,
            k,
            p,
            value,
            applicable: true,
            reason: None,
            citation: id.citation(),
        },
        Err(why) => BoundEntry {
            id,
            k,
            p,
            value: f64::NAN,
            applicable: false,
            reason: Some(why.to_string()),
            citation: id.citation(),
        },
    }
}

/// Every bound for `k = 1..=k_max` with its applicability gate.
pub fn evaluate_all(graph: &MetricGraph, q: &Potential, p: Exponent, k_max: usize) -> BoundReport {
    let inv = graph.invariants();
    let q_norm = q.lp_norm_positive_part(p);
    let alpha = graph.alpha_total();
    let consts = topology_constants(&inv, k_max.max(1)).ok();
    let explicit_gate = || -> Result<&TopologyConstants, Inapplicable> {
        topology_gate(&inv)?;
        if graph.has_dirichlet() {
            return Err(Inapplicable::DirichletVertex);
        }
        if !graph.couplings_finite_nonnegative() {
            return Err(Inapplicable::NegativeCoupling);
        }
        Ok(consts.as_ref().expect("topology gate passed"))
    };
    let q_nonpositive = q.is_nonpositive();

    let mut entries = Vec::new();
    if k_max >= 1 {
        let trivial = if graph.has_dirichlet() {
            Err(Inapplicable::DirichletVertex)
        } else {
            Ok(bound_trivial(graph, q, alpha))
        };
        entries.push(entry(BoundId::Trivial, 1, p, trivial));
        let (longest, edges) = bound_principal_universal(&inv, q_norm, p);
        entries.push(entry(BoundId::PrincipalUniversalLongest, 1, p, Ok(longest)));
        entries.push(entry(BoundId::PrincipalUniversalEdges, 1, p, Ok(edges)));
        let explicit = explicit_gate().map(|c| bound_principal_explicit(&inv, c, q_norm, p, alpha));
        entries.push(entry(BoundId::PrincipalExplicit, 1, p, explicit));
    }
    for k in 1..=k_max {
        entries.push(entry(BoundId::HigherUniversal, k, p, Ok(bound_higher_universal(&inv, q_norm, p, k))));
        let higher = explicit_gate().and_then(|c| {
            if k < 2 {
                Err(Inapplicable::KBelowTwo)
            } else {
                Ok(bound_higher_explicit(&inv, c, q_norm, p, alpha, k))
            }
        });
        let mut e = entry(BoundId::HigherExplicit, k, p, higher);
        if e.applicable && e.value.is_infinite() {
            e.reason = Some(DEGENERATE_AT_ONE.to_string());
        }
        entries.push(e);
        let neumann = topology_gate(&inv).and_then(|_| {
            if !q_nonpositive {
                Err(Inapplicable::PositivePotential)
            } else if graph.has_dirichlet() {
                Err(Inapplicable::DirichletVertex)
            } else if !graph.couplings_finite_nonpositive() {
                Err(Inapplicable::PositiveCoupling)
            } else {
                Ok(mk_value(&inv, k).powi(2) / inv.total_length)
            }
        });
        entries.push(entry(BoundId::LaplacianNeumann, k, p, neumann));
        let dirichlet = if q_nonpositive {
            Ok(bound_laplacian_dirichlet(&inv, k))
        } else {
            Err(Inapplicable::PositivePotential)
        };
        entries.push(entry(BoundId::LaplacianDirichlet, k, p, dirichlet));
    }
    BoundReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::metric_graph::{Coupling, Edge};
    use approx::assert_relative_eq;

    const P2: f64 = PI * PI;

    fn star3() -> MetricGraph {
        MetricGraph::star(&[1.0; 3], Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap()
    }

    fn p3() -> MetricGraph {
        MetricGraph::path(&[1.0, 1.0], Coupling::Finite(0.0)).unwrap()
    }

    fn unit(c: Coupling) -> MetricGraph {
        MetricGraph::interval(1.0, c, c).unwrap()
    }

    #[test]
    fn topology_constant_examples() {
        assert_eq!(topology_constants(&p3().invariants(), 2).unwrap().m, 0.0);
        let c = topology_constants(&star3().invariants(), 3).unwrap();
        assert_relative_eq!(c.m, PI / (2.0 * 3f64.sqrt()), max_relative = 1e-14);
        assert_relative_eq!(c.m_k(2).unwrap(), 1.5 * PI / 3f64.sqrt(), max_relative = 1e-14);
        assert!(c.m_k(2).unwrap() >= c.m);
        assert!(c.m_k.windows(2).all(|w| w[1] > w[0]));
        let cycle = MetricGraph::cycle(&[1.0, 1.0], Coupling::Finite(0.0)).unwrap();
        assert_eq!(
            topology_constants(&cycle.invariants(), 1),
            Err(BoundsError::Inapplicable(Inapplicable::Cycle))
        );
    }

    #[test]
    fn trivial_examples() {
        let g = star3();
        assert_eq!(bound_trivial(&g, &Potential::zero(&g), 0.0), 0.0);
        let g1 = g.with_uniform_coupling(Coupling::Finite(1.0));
        assert_relative_eq!(bound_trivial(&g1, &Potential::zero(&g1), g1.alpha_total()), 4.0 / 3.0);
        let p = p3();
        assert_relative_eq!(bound_trivial(&p, &Potential::constant(&p, -1.0), 0.0), -1.0);
    }

    #[test]
    fn universal_examples() {
        let g = unit(Coupling::Dirichlet);
        let inv = g.invariants();
        assert_relative_eq!(bound_principal_universal(&inv, 0.0, Exponent::Infinity).0, P2);
        assert_relative_eq!(bound_principal_universal(&inv, 5.0, Exponent::Infinity).0, 5.0 + P2);
        let s = star3().invariants();
        assert_relative_eq!(bound_principal_universal(&s, 0.0, Exponent::Finite(2.0)).1, P2);
        assert_relative_eq!(bound_higher_universal(&inv, 0.0, Exponent::Finite(1.0), 2), 4.0 * P2);
        assert_relative_eq!(bound_higher_universal(&inv, 0.0, Exponent::Finite(1.0), 5), 25.0 * P2);
        let two = MetricGraph::path(&[1.0, 0.5], Coupling::Dirichlet).unwrap().invariants();
        assert_relative_eq!(bound_higher_universal(&two, 0.0, Exponent::Infinity, 1), P2 / 2.25 * 4.0);
        for k in 1..6 {
            assert!(
                bound_higher_universal(&s, 1.0, Exponent::Finite(2.0), k + 1)
                    >= bound_higher_universal(&s, 1.0, Exponent::Finite(2.0), k)
            );
        }
    }

    #[test]
    fn principal_explicit_examples() {
        let p = p3().invariants();
        let c = topology_constants(&p, 1).unwrap();
        assert_eq!(bound_principal_explicit(&p, &c, 0.0, Exponent::Finite(2.0), 0.0), 0.0);
        let u = unit(Coupling::Finite(0.5)).invariants();
        let c = topology_constants(&u, 1).unwrap();
        assert_relative_eq!(
            bound_principal_explicit(&u, &c, 0.0, Exponent::Finite(2.0), 1.0),
            P2 + 0.5,
            max_relative = 1e-14
        );
        let s = star3().invariants();
        let c = topology_constants(&s, 1).unwrap();
        let r3 = bound_principal_explicit(&s, &c, 0.0, Exponent::Infinity, 1e3) - P2;
        let r4 = bound_principal_explicit(&s, &c, 0.0, Exponent::Infinity, 1e4) - P2;
        // O(1/a) remainder
        assert_relative_eq!(r3 / r4, 10.0, max_relative = 1e-2);
        let big = bound_principal_explicit(&s, &c, 0.0, Exponent::Infinity, 1e6);
        assert!((big - P2).abs() <= 1e-4 * P2);
    }

    #[test]
    fn higher_explicit_examples() {
        let s = star3().invariants();
        let c = topology_constants(&s, 5).unwrap();
        let v = bound_higher_explicit(&s, &c, 0.0, Exponent::Finite(2.0), 3.0, 2);
        // M_2² = 3π²/4: 3·(π²/9)·16 + (3π²/4)/3 + (3/4)(3π²/4)
        assert_relative_eq!(v, (16.0 / 3.0 + 0.25 + 0.5625) * P2, max_relative = 1e-13);
        assert!(bound_higher_explicit(&s, &c, 0.0, Exponent::Finite(2.0), 1.0, 2).is_infinite());
        for k in 2..=5 {
            let collapse = bound_higher_explicit(&s, &c, 0.0, Exponent::Finite(2.0), 0.0, k);
            assert_relative_eq!(collapse, bound_laplacian_neumann(&s, k).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn laplacian_examples() {
        let s = star3().invariants();
        assert_relative_eq!(bound_laplacian_neumann(&s, 2).unwrap(), P2 / 4.0, max_relative = 1e-14);
        assert_eq!(bound_laplacian_neumann(&p3().invariants(), 1).unwrap(), 0.0);
        let eight = MetricGraph::flower(&[1.0, 1.0], Coupling::Finite(0.0)).unwrap().invariants();
        assert_relative_eq!(bound_laplacian_neumann(&eight, 1).unwrap(), P2, max_relative = 1e-14);
        let u = unit(Coupling::Dirichlet).invariants();
        for k in 1..5 {
            assert_relative_eq!(bound_laplacian_dirichlet(&u, k), P2 * (k * k) as f64, max_relative = 1e-14);
        }
        assert_relative_eq!(bound_laplacian_dirichlet(&s, 3), P2 / 9.0 * 25.0, max_relative = 1e-14);
    }

    #[test]
    fn holder_and_sup_examples() {
        let g = star3().with_uniform_coupling(Coupling::Finite(0.5));
        let mesh = Mesh::uniform(&g, 0.1).unwrap();
        let one = MeshFunction::from_fn(&g, &mesh, |_, _| 1.0);
        let n = FunctionNorms::of(&g, &one);
        let c = 2.0;
        let v = holder_rayleigh_bound(&n, c * 3.0, Exponent::Finite(1.0), g.alpha_total()).unwrap();
        assert_relative_eq!(v, c + g.alpha_total() / 3.0, max_relative = 1e-12);
        assert_relative_eq!(sup_norm_bound(n.l2, n.derivative_l2, 3.0, false), 1.0, max_relative = 1e-12);
        assert_eq!(sup_norm_bound(2.0, 0.5, 4.0, true), 1.0);
        let zero = FunctionNorms { l2: 0.0, sup: 0.0, derivative_l2: 0.0, vertex_sup: 0.0 };
        assert_eq!(holder_rayleigh_bound(&zero, 1.0, Exponent::Infinity, 0.0), Err(BoundsError::ZeroNorm));
    }

    #[test]
    fn report_gating() {
        let g = unit(Coupling::Dirichlet);
        let r = evaluate_all(&g, &Potential::zero(&g), Exponent::Finite(2.0), 1);
        let u = r.get(BoundId::PrincipalUniversalLongest, 1).unwrap();
        assert!(u.applicable);
        assert_relative_eq!(u.value, P2);
        assert!(!r.get(BoundId::PrincipalExplicit, 1).unwrap().applicable);

        let cycle = MetricGraph::cycle(&[1.0, 2.0], Coupling::Finite(0.0)).unwrap();
        let r = evaluate_all(&cycle, &Potential::zero(&cycle), Exponent::Infinity, 3);
        for e in r.entries.iter().filter(|e| {
            matches!(e.id, BoundId::PrincipalExplicit | BoundId::HigherExplicit | BoundId::LaplacianNeumann)
        }) {
            assert!(!e.applicable);
            assert_eq!(e.reason.as_deref(), Some("cycle"));
        }

        let p = p3();
        let r = evaluate_all(&p, &Potential::zero(&p), Exponent::Finite(1.0), 2);
        assert_eq!(r.get(BoundId::Trivial, 1).unwrap().value, 0.0);
        assert_eq!(r.get(BoundId::PrincipalExplicit, 1).unwrap().value, 0.0);
        assert_eq!(r.get(BoundId::HigherExplicit, 1).unwrap().reason.as_deref(), Some("k < 2"));

        let one = MetricGraph::new(
            vec![Coupling::Finite(1.0), Coupling::Finite(0.0)],
            vec![Edge::new(0, 1, 1.0), Edge::new(0, 1, 0.5), Edge::new(1, 1, 0.2)],
        )
        .unwrap();
        let r = evaluate_all(&one, &Potential::zero(&one), Exponent::Finite(2.0), 2);
        let e = r.get(BoundId::HigherExplicit, 2).unwrap();
        assert!(e.applicable && e.value.is_infinite());
        assert_eq!(e.reason.as_deref(), Some(DEGENERATE_AT_ONE));
        for e in r.applicable() {
            assert!(e.value.is_finite() || e.id == BoundId::HigherExplicit);
            assert!(!e.citation.is_empty());
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = star3();
        let r = evaluate_all(&g, &Potential::constant(&g, 1.0), Exponent::Infinity, 2);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rd.records().count(), r.entries.len());
        assert!(text.starts_with("bound_id,k,p,value,applicable,reason,citation"));
    }
}
