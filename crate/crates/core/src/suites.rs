//! Registered verification suites over a fixed matrix of small graphs.
//!
//! Each suite runs exact checks on every instance of the matrix and returns a
//! `SuiteSummary`. Hypotheses that fail on an instance give skipped reports.

use serde_json::json;

use crate::branching::{
    check_hat_a_domination, check_orbit_domination, fit_tail, subgraph_cycle_bound, DominationReport,
};
use crate::decay::{
    check_strong_markov, finite_graph_constants, minimal_invariant_closure, verify_boundary_decay, verify_c1_bound,
    verify_cycle_tail_bound, verify_partition_ratio_bounds, verify_path_cycle_bounds, verify_single_site_bounds,
    ClosureOf, MarkovSuite, OrbitOf,
};
use crate::error::{Result, SrpError};
use crate::exact::{self, Sink};
use crate::lattice::{is_automorphism, reflection_group, CylinderLattice, Graph, SymmetryGroup, VertexSet};
use crate::regen::{
    check_numbregpoint, check_open_markov, cylinder_problem, exhaustive_numbregpoint, pre_regeneration_points,
    regen_predicates, regeneration_set, regeneration_set_exhaustive,
};
use crate::report::{CheckReport, SuiteSummary};
use crate::samplers::strategy::{
    assembled_law_defect, for_each_outcome, FirstOfList, FirstThenAll, KeepSetChooser, PhiCompatible, WholeSet,
};
use crate::samplers::{
    cylinder_windows, sample_open_chains, verify_open_ergodicity, Certification, MoveSet, SamplerConfig,
};

/// Suite names accepted by `run_suite`.
pub const SUITES: [&str; 8] = [
    "markov",
    "sampling-lemma",
    "prop31",
    "prop33",
    "boundary",
    "orbit-dom",
    "numbregpoint",
    "regen-maximality",
];

/// Inverse temperatures every inequality suite is run at.
pub const DEFAULT_ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];

/// One instance of the graph matrix.
#[derive(Clone, Debug)]
pub struct MatrixGraph {
    pub name: String,
    pub graph: Graph,
    /// Set when the instance is a cylinder.
    pub lattice: Option<CylinderLattice>,
}

fn plain(name: &str, graph: Graph) -> MatrixGraph {
    MatrixGraph {
        name: name.into(),
        graph,
        lattice: None,
    }
}

fn cylinder(length: usize, width: usize) -> MatrixGraph {
    let lat = CylinderLattice::rect(length, width, 2, 1 << 10).expect("small cylinder");
    MatrixGraph {
        name: format!("cylinder-{length}x{width}"),
        graph: lat.graph().clone(),
        lattice: Some(lat),
    }
}

/// The fixed matrix: `K2`, paths, a cycle, grids up to 3x3 and small cylinders.
pub fn graph_matrix() -> Vec<MatrixGraph> {
    vec![
        plain("k2", Graph::complete(2)),
        plain("path-3", Graph::path(3)),
        plain("path-4", Graph::path(4)),
        plain("path-5", Graph::path(5)),
        plain("cycle-5", Graph::cycle(5)),
        plain("grid-2x2", Graph::grid(2, 2)),
        plain("grid-2x3", Graph::grid(2, 3)),
        plain("grid-3x3", Graph::grid(3, 3)),
        cylinder(1, 3),
        cylinder(2, 2),
        cylinder(1, 4),
        cylinder(2, 3),
    ]
}

/// Matrix instances with at most `n` vertices.
pub fn matrix_up_to(n: usize) -> Vec<MatrixGraph> {
    graph_matrix()
        .into_iter()
        .filter(|m| m.graph.vertex_count() <= n)
        .collect()
}

/// Full automorphism group by backtracking (small graphs only).
pub fn automorphism_group(g: &Graph) -> Result<SymmetryGroup> {
    let n = g.vertex_count();
    if n > 12 {
        return Err(SrpError::capacity("automorphism search vertices", n as u64, 12));
    }
    fn extend(g: &Graph, image: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let v = image.len();
        if v == g.vertex_count() {
            if is_automorphism(g, image) {
                out.push(image.clone());
            }
            return;
        }
        for t in 0..g.vertex_count() {
            if used[t] || g.degree(t) != g.degree(v) {
                continue;
            }
            // adjacency to already placed vertices must be preserved
            if (0..v).any(|u| g.has_edge(u, v) != g.has_edge(image[u], t)) {
                continue;
            }
            used[t] = true;
            image.push(t);
            extend(g, image, used, out);
            image.pop();
            used[t] = false;
        }
    }
    let mut out = Vec::new();
    extend(g, &mut Vec::new(), &mut vec![false; n], &mut out);
    SymmetryGroup::generate(g, &out)
}

/// Runs a registered suite at the given inverse temperatures.
pub fn run_suite(name: &str, alphas: &[f64]) -> Result<SuiteSummary> {
    match name {
        "markov" => markov_suite(alphas),
        "sampling-lemma" => sampling_lemma_suite(alphas),
        "prop31" => path_cycle_suite(alphas),
        "prop33" => single_site_suite(alphas),
        "boundary" => boundary_suite(alphas),
        "orbit-dom" => orbit_domination_suite(alphas),
        "numbregpoint" => numbregpoint_suite(),
        "regen-maximality" => regen_maximality_suite(),
        _ => Err(SrpError::Argument(format!(
            "unknown suite '{name}'; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}

/// Spatial Markov identities for every subset of every matrix graph with at
/// most 8 vertices; strong Markov for orbit and closure sets; the open-model
/// Markov property on a small cylinder.
pub fn markov_suite(alphas: &[f64]) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("markov");
    for &alpha in alphas {
        for m in matrix_up_to(8) {
            let n = m.graph.vertex_count();
            let mut suite = MarkovSuite::new(&m.graph, alpha)?;
            for mask in 0..(1u64 << n) {
                s.extend(suite.check(&VertexSet::from_mask(n, mask))?);
            }
        }
        for m in matrix_up_to(6) {
            let n = m.graph.vertex_count();
            let far = VertexSet::from_iter(n, [n - 1]);
            s.extend(check_strong_markov(
                &m.graph,
                alpha,
                &OrbitOf(VertexSet::from_iter(n, [0])),
                &far,
            )?);
            let phi = automorphism_group(&m.graph)?;
            let closure = ClosureOf {
                phi,
                a: VertexSet::from_iter(n, [0]),
            };
            s.extend(check_strong_markov(&m.graph, alpha, &closure, &far)?);
        }
        let lat = CylinderLattice::rect(2, 3, 2, 64)?;
        let g = lat.graph();
        let all = g.all_vertices();
        let sinks = lat.hyperplane(2);
        let n = g.vertex_count();
        let right: Vec<usize> = (0..n).filter(|&v| lat.x1(v) >= 1).collect();
        for mask in 1u64..(1 << right.len()) {
            let a = VertexSet::from_iter(
                n,
                right
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &v)| v),
            );
            for x in a.iter().filter(|&x| !sinks.contains(x)) {
                s.extend(check_open_markov(g, &all, lat.origin(), &sinks, &a, x, alpha)?);
            }
        }
    }
    Ok(s)
}

fn phi_compatible_for(m: &MatrixGraph) -> Result<PhiCompatible> {
    let phi = match &m.lattice {
        Some(lat) => reflection_group(lat, lat.origin()),
        None => automorphism_group(&m.graph)?,
    };
    Ok(PhiCompatible {
        phi,
        a: VertexSet::from_iter(m.graph.vertex_count(), [0]),
    })
}

/// The keep-set strategies used by the sampling suite on one graph.
pub fn strategies_for(m: &MatrixGraph) -> Result<Vec<Box<dyn KeepSetChooser>>> {
    let n = m.graph.vertex_count();
    Ok(vec![
        Box::new(WholeSet),
        Box::new(FirstThenAll { x0: n - 1 }),
        Box::new(FirstOfList::all_vertices(n)),
        Box::new(phi_compatible_for(m)?),
    ])
}

/// Assembled law of the recursive procedure against the target law, termwise,
/// for four strategies on every matrix graph with at most 6 vertices; and, for
/// every outcome of the Phi-compatible strategy, that `hat A` is Phi-compatible
/// and contains the least invariant Phi-compatible closure of `A`.
pub fn sampling_lemma_suite(alphas: &[f64]) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("sampling-lemma");
    for &alpha in alphas {
        for m in matrix_up_to(6) {
            for mut chooser in strategies_for(&m)? {
                let defect = assembled_law_defect(&m.graph, chooser.as_mut(), alpha)?;
                let params = json!({"graph": m.name, "strategy": chooser.name(), "alpha": alpha});
                s.add(CheckReport::at_most("assembled-law", params, defect, 1e-9, 0.0));
            }
            let mut chooser = phi_compatible_for(&m)?;
            let (phi, a) = (chooser.phi.clone(), chooser.a.clone());
            let n = m.graph.vertex_count();
            let mut bad = 0usize;
            let mut outcomes = 0usize;
            for_each_outcome(&m.graph, &mut chooser, alpha, &mut |rounds, p, _| {
                outcomes += 1;
                let hat = rounds
                    .iter()
                    .find(|r| r.fallback)
                    .map(|r| r.b.complement())
                    .unwrap_or_else(|| VertexSet::full(n));
                let q = minimal_invariant_closure(p, &phi, &a);
                if !q.is_subset(&hat) || !phi.is_compatible(&hat) || !p.is_invariant(&hat) {
                    bad += 1;
                }
            })?;
            let params = json!({"graph": m.name, "alpha": alpha, "outcomes": outcomes});
            s.add(CheckReport::at_most(
                "phi-set-contains-closure",
                params,
                bad as f64,
                0.0,
                0.0,
            ));
        }
    }
    Ok(s)
}

/// Partition-function bounds for every self-avoiding path and cycle.
pub fn path_cycle_suite(alphas: &[f64]) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("prop31");
    for &alpha in alphas {
        for m in graph_matrix() {
            s.extend(verify_path_cycle_bounds(&m.graph, alpha)?);
        }
    }
    Ok(s)
}

/// Single-site steps of the `c1` bound, the `c1` bound itself and the cycle
/// tail bound with finite-graph constants.
pub fn single_site_suite(alphas: &[f64]) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("prop33");
    for &alpha in alphas {
        for m in graph_matrix() {
            let g = &m.graph;
            let n = g.vertex_count();
            let k = finite_graph_constants(g, alpha)?;
            let full = g.all_vertices();
            for x in 0..n {
                s.extend(verify_single_site_bounds(g, &full, x, alpha, &k)?);
                let mut u = full.clone();
                u.remove((x + 1) % n);
                if u.contains(x) {
                    s.extend(verify_single_site_bounds(g, &u, x, alpha, &k)?);
                }
                s.add(verify_cycle_tail_bound(g, x, alpha, &k)?);
                s.extend(verify_c1_bound(g, &full, &VertexSet::from_iter(n, [x]), alpha, &k)?);
                s.extend(verify_c1_bound(
                    g,
                    &full,
                    &VertexSet::from_iter(n, [x, (x + 1) % n]),
                    alpha,
                    &k,
                )?);
            }
        }
    }
    Ok(s)
}

/// Boundary-condition decay on the graphs with at most 6 vertices and
/// partition-ratio bounds on the whole matrix.
pub fn boundary_suite(alphas: &[f64]) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("boundary");
    for &alpha in alphas {
        for m in graph_matrix() {
            let g = &m.graph;
            let n = g.vertex_count();
            let bound = subgraph_cycle_bound(g, alpha)?;
            let fit = fit_tail(&bound.scaled_offspring(1)?, None, 200)?;
            if n <= 6 {
                for y in 0..n {
                    let mut u = g.all_vertices();
                    u.remove(y);
                    for x in u.iter() {
                        let b = VertexSet::from_iter(n, [x]);
                        let params = json!({"graph": m.name, "alpha": alpha, "removed": y, "b": x});
                        match verify_boundary_decay(g, &u, &b, alpha, &bound, &fit, false) {
                            Ok(r) => s.extend(r),
                            Err(SrpError::Refused(why)) => s.add(CheckReport::skipped("boundary-decay", params, why)),
                            Err(e) => return Err(e),
                        }
                    }
                }
            }
            let k = finite_graph_constants(g, alpha)?.with_tail_fit(&fit);
            for y in 0..n {
                let mut v1 = g.all_vertices();
                v1.remove(y);
                for x in v1.iter() {
                    let a = VertexSet::from_iter(n, [x]);
                    s.extend(verify_partition_ratio_bounds(g, &v1, &a, alpha, &k, &bound)?);
                }
            }
        }
    }
    Ok(s)
}

fn domination_check(r: &DominationReport, params: serde_json::Value) -> CheckReport {
    if let Some(why) = &r.precondition {
        return CheckReport::skipped(&r.check, params, why.clone());
    }
    let worst = (0..r.lhs.len().min(r.rhs.len()))
        .min_by(|&i, &j| (r.rhs[i] - r.lhs[i]).total_cmp(&(r.rhs[j] - r.lhs[j])))
        .unwrap_or(0);
    CheckReport::at_most(&r.check, params, r.lhs[worst], r.rhs[worst], r.tolerance)
}

/// Orbit-size domination for single vertices and pairs on every matrix graph,
/// and the `hat A` size bound on graphs with at most 6 vertices.
pub fn orbit_domination_suite(alphas: &[f64]) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("orbit-dom");
    for &alpha in alphas {
        for m in graph_matrix() {
            let g = &m.graph;
            let n = g.vertex_count();
            let bound = subgraph_cycle_bound(g, alpha)?;
            for x in 0..n {
                for a in [vec![x], vec![x, (x + 1) % n], vec![x, (x + n / 2) % n]] {
                    let set = VertexSet::from_iter(n, a);
                    let r = check_orbit_domination(g, &set, alpha, &bound)?;
                    s.add(domination_check(
                        &r,
                        json!({"graph": m.name, "alpha": alpha, "a": set.to_vec()}),
                    ));
                }
            }
            if n <= 6 {
                let chooser = phi_compatible_for(&m)?;
                let r = check_hat_a_domination(g, &chooser.phi, &chooser.a, alpha, &bound)?;
                let params = json!({"graph": m.name, "alpha": alpha, "phi": chooser.phi.order()});
                s.add(domination_check(&r, params));
            }
        }
    }
    Ok(s)
}

/// Exhaustive counting-lemma check for `L = 6` on a 10x6 cylinder at
/// `delta ∈ {0.1, 0.2}`, plus sampled long walks on a 20x6 cylinder.
pub fn numbregpoint_suite() -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("numbregpoint");
    let lat = CylinderLattice::rect(10, 6, 2, 1 << 12)?;
    for delta in [0.1, 0.2] {
        let part = exhaustive_numbregpoint(&lat, lat.origin(), 6, delta);
        s.checks += part.checks;
        s.failures += part.failures;
        s.skipped += part.skipped;
        s.worst_margin = s.worst_margin.min(part.worst_margin);
        s.first_failures.extend(part.first_failures);
    }
    s.extend(sampled_numbregpoint(20, 6, 2.0, 7, 200)?);
    Ok(s)
}

/// Counting-lemma checks on walks sampled from the open model on a
/// `length x width` cylinder, at `delta ∈ {0.1, 0.2, 0.3}`.
pub fn sampled_numbregpoint(
    length: usize,
    width: usize,
    alpha: f64,
    seed: u64,
    samples: u64,
) -> Result<Vec<CheckReport>> {
    let lat = CylinderLattice::rect(length, width, 2, 1 << 16)?;
    let problem = cylinder_problem(&lat);
    let windows = cylinder_windows(&lat, &problem.domain, MoveSet::Windowed);
    let cert = small_open_certificates()?;
    let cfg = SamplerConfig {
        alpha,
        seed,
        chains: 2,
        sweeps: samples / 2,
        ..Default::default()
    };
    let walks = sample_open_chains(lat.graph(), &problem, &windows, &cfg, &cert, |c| c.walk_of())?;
    let mut out = Vec::new();
    for walk in walks.into_iter().flatten() {
        let walk = walk?;
        for delta in [0.1, 0.2, 0.3] {
            out.push(check_numbregpoint(&lat, &walk, delta));
        }
    }
    Ok(out)
}

/// Connectivity certificates of the open cylinder dynamics on small
/// instances, including a width with ring windows.
pub fn small_open_certificates() -> Result<Certification> {
    let mut certs = Vec::new();
    for (len, width) in [(3, 3), (2, 5)] {
        let lat = CylinderLattice::rect(len, width, 2, 1 << 10)?;
        let problem = cylinder_problem(&lat);
        let w = cylinder_windows(&lat, &problem.domain, MoveSet::Windowed);
        certs.push(verify_open_ergodicity(lat.graph(), &problem, &w)?);
    }
    Ok(Certification::Inherited(certs))
}

/// Regeneration sets against the exhaustive union of all sets with the four
/// properties, over every open configuration of a 2x4 cylinder and a sparse
/// stride of a 3x4 cylinder.
pub fn regen_maximality_suite() -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("regen-maximality");
    for (len, width, stride) in [(2, 4, 1), (2, 3, 1), (3, 4, 41)] {
        let lat = CylinderLattice::rect(len, width, 2, 1 << 10)?;
        let all = lat.graph().all_vertices();
        let configs = exact::enumerate_open(lat.graph(), &all, lat.origin(), &Sink::Set(lat.hyperplane(len)))?;
        for (i, c) in configs.iter().enumerate().step_by(stride) {
            for x in pre_regeneration_points(&c.walk_of()?, &lat) {
                let fast = regeneration_set(&lat, c, x)?;
                let slow = regeneration_set_exhaustive(&lat, c, x)?;
                let params = json!({"cylinder": [len, width], "config": i, "x": x});
                let agree = if fast == slow { 0.0 } else { 1.0 };
                s.add(CheckReport::at_most("regen-maximal", params.clone(), agree, 0.0, 0.0));
                if let Some(r) = fast {
                    let ok = if regen_predicates(&lat, c, x, &r).all() {
                        0.0
                    } else {
                        1.0
                    };
                    s.add(CheckReport::at_most("regen-properties", params, ok, 0.0, 0.0));
                }
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_has_at_least_ten_graphs() {
        let m = graph_matrix();
        assert!(m.len() >= 10);
        assert!(m.iter().all(|g| g.graph.validate().is_ok()));
    }

    #[test]
    fn automorphism_group_orders() {
        assert_eq!(automorphism_group(&Graph::complete(2)).unwrap().order(), 2);
        assert_eq!(automorphism_group(&Graph::path(4)).unwrap().order(), 2);
        assert_eq!(automorphism_group(&Graph::grid(2, 2)).unwrap().order(), 8);
        assert_eq!(automorphism_group(&Graph::grid(2, 3)).unwrap().order(), 4);
        assert_eq!(automorphism_group(&Graph::cycle(5)).unwrap().order(), 10);
    }

    #[test]
    fn unknown_suite_is_an_argument_error() {
        assert!(matches!(run_suite("nope", &[1.0]), Err(SrpError::Argument(_))));
    }

    #[test]
    fn path_cycle_suite_passes_at_one_alpha() {
        let s = run_suite("prop31", &[1.0]).unwrap();
        assert!(s.pass() && s.checks > 0, "{s:?}");
    }
}
