//! Explicit trial functions and the numerical variational chain
//! `λ_k ≤ max R(span) ≤ bound`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::bounds::{self, BoundId};
use crate::fem::trial_matrices;
use crate::mesh::{Mesh, MeshError, MeshFunction};
use crate::metric_graph::{Coupling, MetricGraph};
use crate::potential::{Exponent, Potential};
use crate::solver::{dirichlet_modes, solve_on_mesh, solve_spectrum, DirichletMode, SolverConfig, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrialError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("k must be at least 1")]
    ZeroCount,
    #[error("trial family with α = {alpha} is rank deficient: smallest Gram singular value {smallest:e}")]
    RankDeficient { alpha: f64, smallest: f64 },
}

/// Relative slack of every chain comparison.
pub const CHAIN_DELTA: f64 = 1e-3;
/// Absolute slack of every chain comparison.
pub const CHAIN_EPS: f64 = 1e-9;
/// Smallest Gram singular value accepted as full rank.
pub const RANK_TOL: f64 = 1e-6;

/// Mesh fine enough that the interpolated sines of modes `≤ k` lose under
/// `10⁻⁵` relative energy.
pub fn trial_mesh(graph: &MetricGraph, k: usize) -> Mesh {
    let ell_min = graph.invariants().ell_min;
    Mesh::uniform(graph, ell_min / (96.0 * k.max(1) as f64)).expect("positive mesh size")
}

/// How a family member was built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemberLabel {
    pub dirichlet: DirichletMode,
    /// Kirchhoff mode index `j` (1-based) when the member is `αf_j^D + f_j^N`.
    pub neumann: Option<usize>,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct TrialFamily {
    pub members: Vec<MeshFunction>,
    pub labels: Vec<MemberLabel>,
    pub gram: DMatrix<f64>,
}

impl TrialFamily {
    fn new(members: Vec<MeshFunction>, labels: Vec<MemberLabel>) -> Self {
        let k = members.len();
        let gram = DMatrix::from_fn(k, k, |i, j| members[i].l2_inner(&members[j]));
        TrialFamily { members, labels, gram }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn smallest_singular_value(&self) -> f64 {
        self.gram
            .singular_values()
            .iter()
            .fold(f64::INFINITY, |m, &s| m.min(s))
    }
}

fn sine_on_edge(graph: &MetricGraph, mesh: &Mesh, mode: &DirichletMode) -> MeshFunction {
    let ell = graph.edge(mode.edge).length;
    let amp = (2.0 / ell).sqrt();
    let j = mode.mode as f64;
    MeshFunction::from_fn(graph, mesh, |e, x| {
        if e == mode.edge {
            amp * (j * PI * x / ell).sin()
        } else {
            0.0
        }
    })
}

/// `√(2/ℓ) sin(πx/ℓ)` on the longest edge (lowest index on ties), zero elsewhere.
pub fn dirichlet_sine_longest(graph: &MetricGraph) -> MeshFunction {
    dirichlet_sine_longest_on(graph, &trial_mesh(graph, 1))
}

pub fn dirichlet_sine_longest_on(graph: &MetricGraph, mesh: &Mesh) -> MeshFunction {
    let edge = graph.longest_edge();
    let ell = graph.edge(edge).length;
    let mode = DirichletMode { edge, mode: 1, eigenvalue: (PI / ell).powi(2) };
    sine_on_edge(graph, mesh, &mode)
}

/// Edgewise sines for the `k` smallest merged Dirichlet eigenvalues.
pub fn dirichlet_sine_family(graph: &MetricGraph, k: usize) -> TrialFamily {
    dirichlet_sine_family_on(graph, &trial_mesh(graph, k), k)
}

pub fn dirichlet_sine_family_on(graph: &MetricGraph, mesh: &Mesh, k: usize) -> TrialFamily {
    let modes = dirichlet_modes(graph, k);
    let members = modes.iter().map(|m| sine_on_edge(graph, mesh, m)).collect();
    let labels = modes
        .into_iter()
        .map(|dirichlet| MemberLabel { dirichlet, neumann: None, alpha: 0.0 })
        .collect();
    TrialFamily::new(members, labels)
}

/// The graph with every coupling set to zero.
pub fn kirchhoff(graph: &MetricGraph) -> MetricGraph {
    graph.with_uniform_coupling(Coupling::Finite(0.0))
}

/// First `k` Kirchhoff Laplacian eigenfunctions on `mesh`, each signed so that
/// `⟨f_j^D, f_j^N⟩ ≥ 0` against the matching Dirichlet member.
pub fn neumann_modes_on(graph: &MetricGraph, mesh: &Mesh, k: usize) -> Result<Vec<MeshFunction>, TrialError> {
    if k == 0 {
        return Err(TrialError::ZeroCount);
    }
    let kg = kirchhoff(graph);
    let (_, mut funcs) = solve_on_mesh(&kg, &Potential::zero(&kg), mesh, k)?;
    let dir = dirichlet_sine_family_on(graph, mesh, k);
    for (f, d) in funcs.iter_mut().zip(&dir.members) {
        if d.l2_inner(f) < 0.0 {
            *f = f.scaled(-1.0);
        }
    }
    Ok(funcs)
}

/// The `j`-th Kirchhoff mode (1-based) with the pairing sign rule.
pub fn neumann_mode(graph: &MetricGraph, j: usize) -> Result<MeshFunction, TrialError> {
    if j == 0 {
        return Err(TrialError::ZeroCount);
    }
    let mut modes = neumann_modes_on(graph, &trial_mesh(graph, j), j)?;
    Ok(modes.pop().expect("j modes requested"))
}

/// `α f^D + f^N`, resampled to the common refinement if the meshes differ.
pub fn combined_trial(alpha: f64, f_d: &MeshFunction, f_n: &MeshFunction) -> MeshFunction {
    f_d.combine(alpha, f_n, 1.0)
}

/// `{α f_j^D + f_j^N : j ≤ k}` on `mesh`.
pub fn combined_family_on(graph: &MetricGraph, mesh: &Mesh, k: usize, alpha: f64) -> Result<TrialFamily, TrialError> {
    let dir = dirichlet_sine_family_on(graph, mesh, k);
    let neu = neumann_modes_on(graph, mesh, k)?;
    Ok(combined_from_parts(&dir, &neu, alpha))
}

fn combined_from_parts(dir: &TrialFamily, neu: &[MeshFunction], alpha: f64) -> TrialFamily {
    let members = dir
        .members
        .iter()
        .zip(neu)
        .map(|(d, n)| combined_trial(alpha, d, n))
        .collect();
    let labels = dir
        .labels
        .iter()
        .enumerate()
        .map(|(j, l)| MemberLabel { dirichlet: l.dirichlet, neumann: Some(j + 1), alpha })
        .collect();
    TrialFamily::new(members, labels)
}

/// Largest Rayleigh quotient over the span: top eigenvalue of `H x = μ G x`.
pub fn span_max_rayleigh(graph: &MetricGraph, q: &Potential, family: &TrialFamily) -> Result<f64, TrialError> {
    let (h, g) = trial_matrices(graph, q, &family.members);
    let smallest = family.smallest_singular_value();
    let alpha = family.labels.first().map_or(0.0, |l| l.alpha);
    let chol = g.cholesky().ok_or(TrialError::RankDeficient { alpha, smallest })?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or(TrialError::RankDeficient { alpha, smallest })?;
    let c = &linv * h * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(SymmetricEigen::new(c).eigenvalues.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
}

/// Which trial construction a chain link tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainFamily {
    /// Edgewise Dirichlet sines against the universal bounds.
    Universal,
    /// `αf_j^D + f_j^N` against the explicit bounds.
    Explicit,
}

impl ChainFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ChainFamily::Universal => "universal",
            ChainFamily::Explicit => "explicit",
        }
    }
}

/// One `λ_k ≤ max R ≤ bound` comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainLink {
    pub family: ChainFamily,
    pub bound: BoundId,
    pub k: usize,
    /// Discrete eigenvalue on the trial mesh; min-max makes it `≤ trial_max`.
    pub lambda_discrete: f64,
    /// Converged eigenvalue from the refinement solver.
    pub lambda_solver: f64,
    pub trial_max: f64,
    pub bound_value: f64,
    pub applicable: bool,
    pub reason: Option<String>,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl ChainLink {
    pub fn holds(&self) -> bool {
        !self.applicable || (self.lower_holds && self.upper_holds)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainReport {
    pub links: Vec<ChainLink>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.links.iter().all(ChainLink::holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ChainLink> {
        self.links.iter().filter(|l| !l.holds())
    }
}

fn leq(a: f64, b: f64) -> bool {
    a <= b * (1.0 + CHAIN_DELTA.copysign(b)) + CHAIN_EPS
}

/// Check `λ_j ≤ max R(span) ≤ bound` for `j = 1..=k` with both trial families.
pub fn verify_variational_chain(
    graph: &MetricGraph,
    q: &Potential,
    p: Exponent,
    k: usize,
) -> Result<ChainReport, TrialError> {
    if k == 0 {
        return Err(TrialError::ZeroCount);
    }
    let mesh = trial_mesh(graph, k);
    let (discrete, _) = solve_on_mesh(graph, q, &mesh, k)?;
    let solved = solve_spectrum(graph, q, k, &SolverConfig::with_tol(1e-6).eigenvalues_only())?;
    let report = bounds::evaluate_all(graph, q, p, k);
    let dir = dirichlet_sine_family_on(graph, &mesh, k);
    let alpha = graph.alpha_total();

    let explicit_ready = report
        .get(BoundId::PrincipalExplicit, 1)
        .is_some_and(|e| e.applicable);
    let neu = if explicit_ready {
        Some(neumann_modes_on(graph, &mesh, k)?)
    } else {
        None
    };

    let mut links = Vec::new();
    for j in 1..=k {
        let sub = |fam: &TrialFamily| TrialFamily::new(fam.members[..j].to_vec(), fam.labels[..j].to_vec());
        let lambda_discrete = discrete[j - 1];
        let lambda_solver = solved.eigenvalues[j - 1];
        let mut push = |family: ChainFamily, id: BoundId, trial: Option<&TrialFamily>| -> Result<(), TrialError> {
            let entry = report.get(id, j).expect("every bound is reported for every k");
            let (trial_max, applicable) = match trial {
                Some(t) if entry.applicable => (span_max_rayleigh(graph, q, t)?, true),
                _ => (f64::NAN, false),
            };
            links.push(ChainLink {
                family,
                bound: id,
                k: j,
                lambda_discrete,
                lambda_solver,
                trial_max,
                bound_value: entry.value,
                applicable,
                reason: entry.reason.clone(),
                lower_holds: !applicable
                    || (lambda_discrete <= trial_max + CHAIN_EPS * trial_max.abs().max(1.0)
                        && leq(lambda_solver, trial_max)),
                upper_holds: !applicable || leq(trial_max, entry.value),
            });
            Ok(())
        };
        let universal = sub(&dir);
        if j == 1 {
            push(ChainFamily::Universal, BoundId::PrincipalUniversalLongest, Some(&universal))?;
        }
        push(ChainFamily::Universal, BoundId::HigherUniversal, Some(&universal))?;
        let combined = neu.as_ref().map(|n| combined_from_parts(&universal, &n[..j], alpha));
        if let Some(c) = &combined {
            let smallest = c.smallest_singular_value();
            if !(smallest > RANK_TOL) {
                return Err(TrialError::RankDeficient { alpha, smallest });
            }
        }
        let id = if j == 1 { BoundId::PrincipalExplicit } else { BoundId::HigherExplicit };
        push(ChainFamily::Explicit, id, combined.as_ref())?;
    }
    Ok(ChainReport { links })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::rayleigh_quotient;
    use approx::assert_relative_eq;

    const P2: f64 = PI * PI;

    #[test]
    fn longest_sine_examples() {
        let g = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        let f = dirichlet_sine_longest(&g);
        assert_relative_eq!(f.l2_norm(), 1.0, max_relative = 1e-4);
        assert_relative_eq!(f.sup_norm(), 2f64.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(f.derivative_l2_norm().powi(2), P2, max_relative = 1e-4);

        let star = MetricGraph::star(&[1.0; 3], Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap();
        let f = dirichlet_sine_longest(&star);
        assert!(f.edge_samples(1).iter().chain(f.edge_samples(2)).all(|&v| v == 0.0));
        assert!(f.vertex_sup_norm(&star) < 1e-12);

        let two = MetricGraph::path(&[2.0, 1.0], Coupling::Finite(0.0)).unwrap();
        let f = dirichlet_sine_longest(&two);
        assert_relative_eq!(f.sup_norm(), 1.0, max_relative = 1e-6);
        assert!(f.edge_samples(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_family_ties_and_orthogonality() {
        let g = MetricGraph::path(&[1.0, 0.5], Coupling::Dirichlet).unwrap();
        let fam = dirichlet_sine_family(&g, 3);
        let order: Vec<_> = fam.labels.iter().map(|l| (l.dirichlet.edge, l.dirichlet.mode)).collect();
        assert_eq!(order, vec![(0, 1), (0, 2), (1, 1)]);
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((&fam.gram - id).abs().max() < 1e-4);
        let u = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        let fam = dirichlet_sine_family(&u, 3);
        for (j, f) in fam.members.iter().enumerate() {
            let x = 0.3;
            let expect = 2f64.sqrt() * ((j + 1) as f64 * PI * x).sin();
            assert!((f.eval(0, x) - expect).abs() < 1e-3);
        }
    }

    #[test]
    fn neumann_mode_examples() {
        let star = MetricGraph::star(&[1.0, 0.6, 0.8], Coupling::Finite(2.0), Coupling::Finite(0.0)).unwrap();
        let f1 = neumann_mode(&star, 1).unwrap();
        let c = 1.0 / star.total_length().sqrt();
        assert!(f1.edge_samples(0).iter().all(|&v| (v - c).abs() < 1e-6));
        let fd = dirichlet_sine_longest(&star);
        assert!(fd.l2_inner(&f1) > 0.0);

        let u = MetricGraph::interval(1.0, Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap();
        let f2 = neumann_mode(&u, 2).unwrap();
        let sign = f2.eval(0, 0.0).signum();
        assert!((f2.eval(0, 0.2) - sign * 2f64.sqrt() * (PI * 0.2).cos()).abs() < 1e-4);
        let d2 = &dirichlet_sine_family(&u, 2).members[1];
        assert!(d2.l2_inner(&f2) >= 0.0);

        // mean zero for j ≥ 2 and the kinetic bound ‖(f_j^N)'‖² ≤ M_k²/L
        let inv = star.invariants();
        let consts = bounds::topology_constants(&inv, 4).unwrap();
        let modes = neumann_modes_on(&star, &trial_mesh(&star, 4), 4).unwrap();
        for (j, f) in modes.iter().enumerate() {
            if j > 0 {
                assert!(f.integral().abs() < 1e-8);
            }
            let mk = consts.m_k(4).unwrap();
            assert!(f.derivative_l2_norm().powi(2) <= mk * mk / inv.total_length * (1.0 + 1e-3));
        }
    }

    #[test]
    fn combined_trial_properties() {
        let g = MetricGraph::star(&[1.0, 0.7, 0.5], Coupling::Finite(1.0), Coupling::Finite(0.5)).unwrap();
        let mesh = trial_mesh(&g, 1);
        let fd = dirichlet_sine_longest_on(&g, &mesh);
        let fnm = neumann_modes_on(&g, &mesh, 1).unwrap().remove(0);
        assert_eq!(combined_trial(0.0, &fd, &fnm), fnm);
        let a = g.alpha_total();
        let f = combined_trial(a, &fd, &fnm);
        assert!(f.l2_norm().powi(2) >= a * a + 1.0 - 1e-6);
        let dn = fd.derivative_l2_norm();
        assert!(f.derivative_l2_norm() <= a * dn + fnm.derivative_l2_norm() + 1e-9);
        assert!(f.vertex_sup_norm(&g) <= fnm.vertex_sup_norm(&g) + 1e-12);
        let lam1 = solve_on_mesh(&g, &Potential::zero(&g), &mesh, 1).unwrap().0[0];
        assert!(rayleigh_quotient(&g, &Potential::zero(&g), &f).unwrap() >= lam1 - 1e-9);
    }

    #[test]
    fn chain_interval_dirichlet() {
        let g = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).unwrap();
        let r = verify_variational_chain(&g, &Potential::zero(&g), Exponent::Finite(2.0), 1).unwrap();
        assert!(r.passed());
        let link = &r.links[0];
        assert_relative_eq!(link.trial_max, P2, max_relative = 1e-4);
        assert_relative_eq!(link.bound_value, P2, max_relative = 1e-12);
        assert!(r.links.iter().any(|l| l.family == ChainFamily::Explicit && !l.applicable));
    }

    #[test]
    fn chain_path_kirchhoff() {
        let g = MetricGraph::path(&[1.0, 1.0], Coupling::Finite(0.0)).unwrap();
        let r = verify_variational_chain(&g, &Potential::zero(&g), Exponent::Finite(2.0), 1).unwrap();
        assert!(r.passed());
        let e = r.links.iter().find(|l| l.bound == BoundId::PrincipalExplicit).unwrap();
        assert!(e.applicable);
        assert!(e.trial_max.abs() < 1e-9 && e.bound_value == 0.0 && e.lambda_discrete.abs() < 1e-9);
    }

    #[test]
    fn chain_four_edges() {
        let g = MetricGraph::new(
            vec![Coupling::Finite(0.5), Coupling::Finite(1.5), Coupling::Finite(0.0), Coupling::Finite(2.0)],
            vec![
                crate::metric_graph::Edge::new(0, 1, 1.2),
                crate::metric_graph::Edge::new(1, 2, 0.7),
                crate::metric_graph::Edge::new(2, 0, 0.9),
                crate::metric_graph::Edge::new(2, 3, 0.5),
            ],
        )
        .unwrap();
        let q = Potential::piecewise_constant(&g, &[1.0, 0.0, 3.0, 2.5]).unwrap();
        let r = verify_variational_chain(&g, &q, Exponent::Finite(2.0), 3).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.links.iter().filter(|l| l.applicable).count(), 7);
    }

    #[test]
    fn rank_of_combined_families() {
        let g = MetricGraph::star(&[1.0; 3], Coupling::Finite(0.0), Coupling::Finite(0.0)).unwrap();
        let mesh = trial_mesh(&g, 4);
        let dir = dirichlet_sine_family_on(&g, &mesh, 4);
        let neu = neumann_modes_on(&g, &mesh, 4).unwrap();
        for a in [0.0, 0.5, 1.0, 2.0, 10.0] {
            assert!(combined_from_parts(&dir, &neu, a).smallest_singular_value() > RANK_TOL);
        }
    }
}
