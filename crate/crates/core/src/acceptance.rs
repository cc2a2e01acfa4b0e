//! The end-to-end acceptance suite. Each check returns one [`Outcome`];
//! tolerances are pinned as constants next to the check that uses them.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bounds::{
    bound_higher_explicit, bound_laplacian_neumann, bound_principal_universal, bound_higher_universal,
    bound_trivial, evaluate_all, holder_rayleigh_bound, sup_norm_bound, topology_constants, BoundId,
    FunctionNorms,
};
use crate::fem::rayleigh_quotient;
use crate::mesh::Mesh;
use crate::metric_graph::{Coupling, MetricGraph};
use crate::parallel::map_collect;
use crate::potential::{Exponent, Potential};
use crate::random::{random_graph, random_piecewise_constant, random_piecewise_linear, rng, GraphSpec};
use crate::secular::secular_spectrum_q0;
use crate::solver::{exact_dirichlet_spectrum, solve_on_mesh, solve_spectrum, SolverConfig};
use crate::sweep::{log_grid, sweep_alpha};
use crate::trial::{combined_family_on, trial_mesh, verify_variational_chain, RANK_TOL};

const P2: f64 = PI * PI;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed(id: usize, name: &'static str, body: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = body();
    Outcome { id, name, passed, detail, elapsed: start.elapsed() }
}

fn exponents() -> [Exponent; 3] {
    [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity]
}

/// Random instance with a distinct stream per index, so parallel order does not matter.
fn instance_rng(seed: u64, stream: u64, i: usize) -> rand_chacha::ChaCha8Rng {
    let mut r = rng(seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    r.set_stream(i as u64);
    r
}

pub const INTERVAL_RTOL: f64 = 1e-3;
pub const INTERVAL_SECONDS: f64 = 5.0;

/// Unit interval with Dirichlet and Neumann ends against `π²k²` and `π²(k-1)²`.
pub fn interval_sanity() -> Outcome {
    timed(1, "interval sanity", || {
        let start = Instant::now();
        let cfg = SolverConfig::with_tol(1e-6).eigenvalues_only();
        let mut worst = 0.0f64;
        let mut ok = true;
        for (c, shift) in [(Coupling::Dirichlet, 1.0), (Coupling::Finite(0.0), 0.0)] {
            let g = MetricGraph::interval(1.0, c, c).expect("valid interval");
            match solve_spectrum(&g, &Potential::zero(&g), 5, &cfg) {
                Ok(r) => {
                    for (j, &l) in r.eigenvalues.iter().enumerate() {
                        let exact = P2 * (j as f64 + shift).powi(2);
                        let err = (l - exact).abs() / exact.max(1.0);
                        worst = worst.max(err);
                        ok &= err <= INTERVAL_RTOL;
                    }
                }
                Err(_) => ok = false,
            }
        }
        let secs = start.elapsed().as_secs_f64();
        ok &= secs < INTERVAL_SECONDS;
        (ok, format!("max rel err {worst:.2e} (tol {INTERVAL_RTOL:.0e}), {secs:.2} s (limit {INTERVAL_SECONDS} s)"))
    })
}

pub const ORACLE_RTOL: f64 = 1e-3;
pub const ORACLE_ATOL: f64 = 1e-8;
pub const EXACT_DIRICHLET_RTOL: f64 = 1e-8;
pub const ORACLE_SECONDS: f64 = 120.0;
pub const ORACLE_INSTANCES: usize = 25;

/// FEM solver against the secular determinant on random graphs with `q = 0`.
pub fn oracle_equivalence(seed: u64) -> Outcome {
    timed(2, "oracle equivalence", || {
        let start = Instant::now();
        let idx: Vec<usize> = (0..ORACLE_INSTANCES).collect();
        let cfg = SolverConfig::with_tol(1e-6).eigenvalues_only();
        let results = map_collect(&idx, |&i| {
            let mut r = instance_rng(seed, 2, i);
            let spec = if i % 5 == 4 { GraphSpec::dirichlet() } else { GraphSpec::default() };
            let g = random_graph(&mut r, &spec);
            let q = Potential::zero(&g);
            let k = 5;
            let sec = secular_spectrum_q0(&g, k).map_err(|e| format!("instance {i}: secular {e}"))?;
            let sol = solve_spectrum(&g, &q, k, &cfg).map_err(|e| format!("instance {i}: solver {e}"))?;
            let mut worst = 0.0f64;
            for (a, b) in sol.eigenvalues.iter().zip(&sec) {
                let err = (a - b).abs();
                if err > ORACLE_RTOL * b.abs() + ORACLE_ATOL {
                    return Err(format!("instance {i}: solver {a} vs secular {b}"));
                }
                worst = worst.max(err / b.abs().max(1e-300));
            }
            let mut dir_checked = false;
            if g.all_dirichlet() {
                dir_checked = true;
                for (a, b) in sec.iter().zip(exact_dirichlet_spectrum(&g, k)) {
                    if (a - b).abs() > EXACT_DIRICHLET_RTOL * b {
                        return Err(format!("instance {i}: secular {a} vs exact {b}"));
                    }
                }
            }
            Ok((worst, dir_checked))
        });
        let secs = start.elapsed().as_secs_f64();
        let mut worst = 0.0f64;
        let mut dir = 0;
        let mut fails = Vec::new();
        for r in results {
            match r {
                Ok((w, d)) => {
                    worst = worst.max(w);
                    dir += d as usize;
                }
                Err(e) => fails.push(e),
            }
        }
        let ok = fails.is_empty() && secs < ORACLE_SECONDS && dir > 0;
        let mut detail = format!(
            "{ORACLE_INSTANCES} graphs, max rel gap {worst:.2e} (tol {ORACLE_RTOL:.0e}), {dir} all-Dirichlet matched exact to {EXACT_DIRICHLET_RTOL:.0e}, {secs:.1} s"
        );
        if let Some(f) = fails.first() {
            detail.push_str(&format!("; {} failures, first: {f}", fails.len()));
        }
        (ok, detail)
    })
}

pub const SOUNDNESS_RTOL: f64 = 1e-3;
pub const SOUNDNESS_ATOL: f64 = 1e-9;
pub const SOUNDNESS_INSTANCES: usize = 100;

/// `λ ≤ bound` with relative slack taken on `|bound|`, so negative bounds are not loosened the wrong way.
pub fn within_bound(lambda: f64, bound: f64) -> bool {
    lambda <= bound + SOUNDNESS_RTOL * bound.abs() + SOUNDNESS_ATOL
}

/// Every applicable bound entry dominates the computed eigenvalue.
pub fn bound_soundness(seed: u64) -> Outcome {
    timed(3, "bound soundness", || {
        let idx: Vec<usize> = (0..SOUNDNESS_INSTANCES).collect();
        let cfg = SolverConfig::with_tol(1e-6).eigenvalues_only();
        let results = map_collect(&idx, |&i| {
            let mut r = instance_rng(seed, 3, i);
            // a quarter with all α = 0, a quarter with q ≤ 0 (half of those
            // Kirchhoff, so the Neumann-type bound is live), the rest mixed
            let kirchhoff = i % 4 == 0 || i % 8 == 1;
            let spec = if kirchhoff {
                GraphSpec::kirchhoff()
            } else {
                GraphSpec { dirichlet_prob: 0.1, ..GraphSpec::robin() }
            };
            let g = random_graph(&mut r, &spec);
            let q = if i % 4 == 1 {
                random_piecewise_constant(&mut r, &g, -10.0, 0.0)
            } else {
                random_piecewise_constant(&mut r, &g, -10.0, 10.0)
            };
            let k = 5;
            let sol = solve_spectrum(&g, &q, k, &cfg).map_err(|e| vec![format!("instance {i}: {e}")])?;
            let mut checked = [0usize; BoundId::ALL.len()];
            let mut bad = Vec::new();
            for p in exponents() {
                for e in evaluate_all(&g, &q, p, k).applicable() {
                    checked[BoundId::ALL.iter().position(|&b| b == e.id).expect("known id")] += 1;
                    let l = sol.eigenvalues[e.k - 1];
                    if !within_bound(l, e.value) {
                        bad.push(format!("instance {i}: {} k={} p={} λ={l} > {}", e.id, e.k, p, e.value));
                    }
                }
            }
            if bad.is_empty() {
                Ok(checked)
            } else {
                Err(bad)
            }
        });
        let mut checked = [0usize; BoundId::ALL.len()];
        let mut fails = Vec::new();
        for r in results {
            match r {
                Ok(c) => checked.iter_mut().zip(c).for_each(|(a, b)| *a += b),
                Err(b) => fails.extend(b),
            }
        }
        let per_bound: Vec<String> = BoundId::ALL.iter().zip(checked).map(|(id, c)| format!("{id}={c}")).collect();
        let total: usize = checked.iter().sum();
        let mut detail = format!(
            "{SOUNDNESS_INSTANCES} instances, {total} applicable entries ({}), {} violations",
            per_bound.join(" "),
            fails.len()
        );
        if let Some(f) = fails.first() {
            detail.push_str(&format!("; first: {f}"));
        }
        (fails.is_empty(), detail)
    })
}

pub const SHARPNESS_RTOL: f64 = 1e-10;

/// Universal bounds are attained on the Dirichlet unit edge.
pub fn sharpness() -> Outcome {
    timed(4, "sharpness witnesses", || {
        let g = MetricGraph::interval(1.0, Coupling::Dirichlet, Coupling::Dirichlet).expect("valid interval");
        let inv = g.invariants();
        let exact = exact_dirichlet_spectrum(&g, 5);
        let mut worst = 0.0f64;
        for p in exponents() {
            let (longest, edges) = bound_principal_universal(&inv, 0.0, p);
            worst = worst.max((longest - exact[0]).abs() / P2).max((edges - exact[0]).abs() / P2);
            for k in 1..=5 {
                let b = bound_higher_universal(&inv, 0.0, p, k);
                worst = worst.max((b - exact[k - 1]).abs() / exact[k - 1]);
            }
        }
        let ok = worst <= SHARPNESS_RTOL && (exact[0] - P2).abs() <= SHARPNESS_RTOL * P2;
        (ok, format!("max rel gap {worst:.1e} (tol {SHARPNESS_RTOL:.0e})"))
    })
}

pub const LIMIT_RTOL: f64 = 1e-2;
/// Allowed downward step between neighbouring sweep points, relative to the solver tolerance.
pub const MONOTONE_SLACK: f64 = 1e-8;

/// Coupling sweep on the unit 3-star from the Kirchhoff end to the Dirichlet end.
pub fn limit_behavior() -> Outcome {
    timed(5, "coupling limits", || {
        let g = MetricGraph::star(&[1.0; 3], Coupling::Finite(1.0), Coupling::Finite(1.0)).expect("valid star");
        let q = Potential::zero(&g);
        let grid = log_grid(1e-2, 1e4, 25);
        let pts = match sweep_alpha(&g, &q, &grid, 1, &[Exponent::Finite(2.0)], &SolverConfig::with_tol(1e-8)) {
            Ok(p) => p,
            Err(e) => return (false, format!("sweep failed: {e}")),
        };
        let lam: Vec<f64> = pts.iter().map(|p| p.eigenvalues[0]).collect();
        let monotone = lam.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK * w[0].abs().max(1.0));
        let hi = *lam.last().expect("nonempty grid");
        let hi_ok = (hi - P2).abs() <= LIMIT_RTOL * P2;
        let lo = lam[0];
        let small = g.with_scaled_couplings(grid[0]);
        // first-order perturbation of the zero Kirchhoff eigenvalue: α/L
        let predicted = 0.0 + small.alpha_total() / small.total_length();
        let trivial = bound_trivial(&small, &q, small.alpha_total());
        let lo_ok = (lo - predicted).abs() <= LIMIT_RTOL * predicted && lo <= trivial + SOUNDNESS_ATOL;
        let conv = pts.iter().all(|p| p.converged);
        (
            monotone && hi_ok && lo_ok && conv,
            format!(
                "monotone={monotone}, λ1(1e4)={hi:.6} vs π²={P2:.6}, λ1(1e-2)={lo:.6e} vs α/L={predicted:.6e} (trivial {trivial:.6e})"
            ),
        )
    })
}

pub const COLLAPSE_RTOL: f64 = 1e-12;

/// The explicit higher bound at `α = 0`, `q = 0` reduces to the Laplacian bound.
pub fn coefficient_collapse(seed: u64) -> Outcome {
    timed(6, "coefficient collapse", || {
        let mut r = instance_rng(seed, 6, 0);
        let mut graphs = 0;
        let mut worst = 0.0f64;
        let mut ok = true;
        while graphs < 20 {
            let g = random_graph(&mut r, &GraphSpec::kirchhoff());
            let inv = g.invariants();
            if inv.is_cycle || !inv.connected {
                continue;
            }
            graphs += 1;
            let consts = topology_constants(&inv, 5).expect("non-cycle connected graph");
            for k in 2..=5 {
                let p = *exponents().choose(&mut r).expect("nonempty");
                let a = bound_higher_explicit(&inv, &consts, 0.0, p, 0.0, k);
                let b = bound_laplacian_neumann(&inv, k).expect("gate passed");
                let err = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(err);
                ok &= err <= COLLAPSE_RTOL;
            }
        }
        (ok, format!("20 graphs, k=2..5, max rel gap {worst:.1e} (tol {COLLAPSE_RTOL:.0e})"))
    })
}

pub const PROPERTY_RTOL: f64 = 1e-12;
pub const PROPERTY_FUNCTIONS: usize = 200;

/// Sup-norm and Hölder–Rayleigh inequalities on random piecewise linear functions.
pub fn property_suites(seed: u64) -> Outcome {
    timed(7, "inequality properties", || {
        let idx: Vec<usize> = (0..PROPERTY_FUNCTIONS).collect();
        let results = map_collect(&idx, |&i| {
            let mut r = instance_rng(seed, 7, i);
            let g = random_graph(&mut r, &GraphSpec::robin());
            let nodes = r.gen_range(1..=12);
            let f = random_piecewise_linear(&mut r, &g, nodes);
            let l = g.total_length();
            let mut bad = Vec::new();
            let sup = f.sup_norm();
            let b = sup_norm_bound(f.l2_norm(), f.derivative_l2_norm(), l, false);
            if sup > b * (1.0 + PROPERTY_RTOL) {
                bad.push(format!("function {i}: sup {sup} > {b}"));
            }
            let z = f.mean_zero();
            let bz = sup_norm_bound(z.l2_norm(), z.derivative_l2_norm(), l, true);
            if z.sup_norm() > bz * (1.0 + PROPERTY_RTOL) {
                bad.push(format!("function {i}: mean-zero sup {} > {bz}", z.sup_norm()));
            }
            let q = random_piecewise_constant(&mut r, &g, 0.0, 10.0);
            let p = *exponents().choose(&mut r).expect("nonempty");
            if f.l2_norm() > 0.0 {
                let rq = rayleigh_quotient(&g, &q, &f).map_err(|e| vec![e.to_string()])?;
                let hb = holder_rayleigh_bound(&FunctionNorms::of(&g, &f), q.lp_norm_positive_part(p), p, g.alpha_total())
                    .map_err(|e| vec![e.to_string()])?;
                if rq > hb * (1.0 + PROPERTY_RTOL) + 1e-12 {
                    bad.push(format!("function {i}: R {rq} > Hölder bound {hb} (p={p})"));
                }
            }
            if bad.is_empty() {
                Ok(())
            } else {
                Err(bad)
            }
        });
        let fails: Vec<String> = results.into_iter().filter_map(Result::err).flatten().collect();
        let mut detail = format!("{PROPERTY_FUNCTIONS} functions, {} violations", fails.len());
        if let Some(f) = fails.first() {
            detail.push_str(&format!("; first: {f}"));
        }
        (fails.is_empty(), detail)
    })
}

pub const DISCRETE_RTOL: f64 = 1e-10;
pub const DISCRETE_INSTANCES: usize = 20;

fn leq_discrete(a: f64, b: f64) -> bool {
    a <= b + DISCRETE_RTOL * a.abs().max(b.abs()).max(1.0)
}

/// Coupling monotonicity, Neumann/Dirichlet bracketing and refinement on fixed meshes.
pub fn discrete_invariants(seed: u64) -> Outcome {
    timed(8, "discrete invariants", || {
        let idx: Vec<usize> = (0..DISCRETE_INSTANCES).collect();
        let results = map_collect(&idx, |&i| -> Result<(), String> {
            let mut r = instance_rng(seed, 8, i);
            let g = random_graph(&mut r, &GraphSpec { dirichlet_prob: 0.1, ..GraphSpec::robin() });
            let q = random_piecewise_constant(&mut r, &g, -5.0, 5.0);
            let mesh = Mesh::uniform(&g, g.invariants().ell_min / 6.0).map_err(|e| e.to_string())?;
            let k = 5;
            let eig = |h: &MetricGraph, m: &Mesh| solve_on_mesh(h, &q, m, k).map(|x| x.0).map_err(|e| format!("instance {i}: {e}"));
            let base = eig(&g, &mesh)?;
            let stronger = eig(&g.with_scaled_couplings(2.0), &mesh)?;
            let neumann = eig(&g.with_uniform_coupling(Coupling::Finite(0.0)), &mesh)?;
            let dirichlet = eig(&g.with_uniform_coupling(Coupling::Dirichlet), &mesh)?;
            let refined = eig(&g, &mesh.refined())?;
            for j in 0..k {
                let checks = [
                    ("α-monotone", base[j], stronger[j]),
                    ("Neumann ≤ δ", neumann[j], base[j]),
                    ("δ ≤ Dirichlet", base[j], dirichlet[j]),
                    ("refinement", refined[j], base[j]),
                ];
                for (name, a, b) in checks {
                    if !leq_discrete(a, b) {
                        return Err(format!("instance {i} k={}: {name} {a} > {b}", j + 1));
                    }
                }
            }
            Ok(())
        });
        let fails: Vec<String> = results.into_iter().filter_map(Result::err).collect();
        let mut detail = format!("{DISCRETE_INSTANCES} instances, k ≤ 5, {} violations (tol {DISCRETE_RTOL:.0e})", fails.len());
        if let Some(f) = fails.first() {
            detail.push_str(&format!("; first: {f}"));
        }
        (fails.is_empty(), detail)
    })
}

pub const RANK_ALPHAS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 10.0];

/// Graphs used by the rank check: a few fixed shapes plus random non-cycle graphs.
fn rank_graphs(seed: u64) -> Vec<MetricGraph> {
    let z = Coupling::Finite(0.0);
    let mut out = vec![
        MetricGraph::interval(1.0, z, z).expect("valid"),
        MetricGraph::star(&[1.0; 3], z, z).expect("valid"),
        MetricGraph::star(&[1.0, 0.7, 0.4], z, z).expect("valid"),
        MetricGraph::path(&[1.0, 0.5, 1.5], z).expect("valid"),
        MetricGraph::flower(&[1.0, 1.0], z).expect("valid"),
    ];
    let mut r = instance_rng(seed, 9, 0);
    while out.len() < 15 {
        let g = random_graph(&mut r, &GraphSpec::kirchhoff());
        let inv = g.invariants();
        if inv.connected && !inv.is_cycle {
            out.push(g);
        }
    }
    out
}

/// Gram matrices of the combined trial families have full rank.
pub fn trial_rank(seed: u64) -> Outcome {
    timed(9, "trial family rank", || {
        let graphs = rank_graphs(seed);
        let results = map_collect(&graphs, |g| -> Result<f64, String> {
            let k = 4;
            let mesh = trial_mesh(g, k);
            let mut smallest = f64::INFINITY;
            for a in RANK_ALPHAS {
                for kk in 1..=k {
                    let fam = combined_family_on(g, &mesh, kk, a).map_err(|e| e.to_string())?;
                    smallest = smallest.min(fam.smallest_singular_value());
                }
            }
            Ok(smallest)
        });
        let mut smallest = f64::INFINITY;
        let mut fails = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(s) if s > RANK_TOL => smallest = smallest.min(s),
                Ok(s) => {
                    smallest = smallest.min(s);
                    fails.push(format!("graph {i}: {s:.2e}"));
                }
                Err(e) => fails.push(format!("graph {i}: {e}")),
            }
        }
        let mut detail = format!("{} graphs, α ∈ {RANK_ALPHAS:?}, smallest σ {smallest:.3e} (tol {RANK_TOL:.0e})", graphs.len());
        if let Some(f) = fails.first() {
            detail.push_str(&format!("; {} failures, first: {f}", fails.len()));
        }
        (fails.is_empty(), detail)
    })
}

pub const CHAIN_INSTANCES: usize = 20;

/// `λ_k ≤ max R(trial span) ≤ bound` on random admissible instances.
pub fn variational_chain(seed: u64) -> Outcome {
    timed(10, "variational chain", || {
        let idx: Vec<usize> = (0..CHAIN_INSTANCES).collect();
        let results = map_collect(&idx, |&i| -> Result<(usize, usize), String> {
            let mut r = instance_rng(seed, 10, i);
            let spec = if i % 3 == 0 { GraphSpec::kirchhoff() } else { GraphSpec { alpha_max: 10.0, ..GraphSpec::robin() } };
            let g = random_graph(&mut r, &spec);
            let q = random_piecewise_constant(&mut r, &g, -2.0, 10.0);
            let p = *exponents().choose(&mut r).expect("nonempty");
            let k = r.gen_range(1..=3);
            let rep = verify_variational_chain(&g, &q, p, k).map_err(|e| format!("instance {i}: {e}"))?;
            if let Some(f) = rep.failures().next() {
                return Err(format!(
                    "instance {i}: {} {} k={} λ={} R={} bound={}",
                    f.family.as_str(),
                    f.bound,
                    f.k,
                    f.lambda_solver,
                    f.trial_max,
                    f.bound_value
                ));
            }
            let applicable = rep.links.iter().filter(|l| l.applicable).count();
            let explicit = rep
                .links
                .iter()
                .filter(|l| l.applicable && matches!(l.bound, BoundId::PrincipalExplicit | BoundId::HigherExplicit))
                .count();
            Ok((applicable, explicit))
        });
        let mut links = 0;
        let mut explicit = 0;
        let mut fails = Vec::new();
        for r in results {
            match r {
                Ok((a, e)) => {
                    links += a;
                    explicit += e;
                }
                Err(e) => fails.push(e),
            }
        }
        let mut detail = format!("{CHAIN_INSTANCES} instances, {links} links checked ({explicit} explicit), {} failures", fails.len());
        if let Some(f) = fails.first() {
            detail.push_str(&format!("; first: {f}"));
        }
        (fails.is_empty(), detail)
    })
}

/// Run all ten checks in order.
pub fn run_all(seed: u64) -> Vec<Outcome> {
    vec![
        interval_sanity(),
        oracle_equivalence(seed),
        bound_soundness(seed),
        sharpness(),
        limit_behavior(),
        coefficient_collapse(seed),
        property_suites(seed),
        discrete_invariants(seed),
        trial_rank(seed),
        variational_chain(seed),
    ]
}
