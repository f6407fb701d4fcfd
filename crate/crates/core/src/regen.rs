//! Regeneration structure of the forced open walk on a cylinder: forward
//! cones, admissible sets, pre-regeneration points, regeneration sets and the
//! chain of regeneration points, plus estimators for walk excursions and
//! transverse fluctuations.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::decay::minimal_invariant_closure;
use crate::error::{Result, SrpError};
use crate::exact::{self, Sink, DEFAULT_NODE_CAP};
use crate::lattice::{reflection_group, CylinderLattice, Graph, SymmetryGroup, VertexSet};
use crate::perm::{CyclePath, GraphPermutation, OpenCycleConfig};
use crate::report::{CheckReport, SuiteSummary};
use crate::samplers::moves::{cylinder_windows, MoveSet};
use crate::samplers::{sample_open_chains, Certification, OpenProblem, SamplerConfig};
use crate::stats::{self, Z95};

/// `x ∈ C_y`: `x1 - y1 >= |x_hat - y_hat|` (toroidal l-infinity), or `x1 >= y1 + scale`.
pub fn in_cone(lat: &CylinderLattice, y: usize, x: usize) -> bool {
    let dx = lat.x1(x) - lat.x1(y);
    dx >= lat.transverse_distance(x, y) || dx >= lat.regen_scale() as i64
}

/// The forward cone of `y` as a vertex set.
pub fn cone(lat: &CylinderLattice, y: usize) -> VertexSet {
    VertexSet::from_iter(
        lat.vertex_count(),
        (0..lat.vertex_count()).filter(|&x| in_cone(lat, y, x)),
    )
}

/// `{x : x1 >= y1 + scale}`.
pub fn far_half(lat: &CylinderLattice, y: usize) -> VertexSet {
    let t = lat.x1(y) + lat.regen_scale() as i64;
    VertexSet::from_iter(lat.vertex_count(), (0..lat.vertex_count()).filter(|&x| lat.x1(x) >= t))
}

/// `{x : x1 >= y1, x_hat = y_hat}`.
pub fn axis_ray(lat: &CylinderLattice, y: usize) -> VertexSet {
    VertexSet::from_iter(
        lat.vertex_count(),
        (0..lat.vertex_count()).filter(|&x| lat.x1(x) >= lat.x1(y) && lat.transverse(x) == lat.transverse(y)),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Admissibility {
    Weak,
    Admissible,
    Strict,
}

/// Strongest admissibility level of `set` for base point `y`, if any.
pub fn admissibility(lat: &CylinderLattice, set: &VertexSet, y: usize) -> Option<Admissibility> {
    if !far_half(lat, y).is_subset(set) {
        return None;
    }
    if !axis_ray(lat, y).is_subset(set) {
        return Some(Admissibility::Weak);
    }
    if !cone(lat, y).is_subset(set) {
        return Some(Admissibility::Admissible);
    }
    Some(Admissibility::Strict)
}

/// A set together with its admissibility level for a base point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdmissibleSet {
    pub set: VertexSet,
    pub level: Admissibility,
    pub base: usize,
}

impl AdmissibleSet {
    pub fn classify(lat: &CylinderLattice, set: VertexSet, base: usize) -> Option<Self> {
        let level = admissibility(lat, &set, base)?;
        Some(AdmissibleSet { set, level, base })
    }
}

/// Walk vertices whose predecessors all lie strictly left of their hyperplane
/// and whose successors all lie in their forward cone, in walk order.
pub fn pre_regeneration_points(walk: &CyclePath, lat: &CylinderLattice) -> Vec<usize> {
    let v = &walk.vertices;
    let mut out = Vec::new();
    let mut left_max = i64::MIN;
    for (i, &x) in v.iter().enumerate() {
        if left_max < lat.x1(x) && v[i..].iter().all(|&z| in_cone(lat, x, z)) {
            out.push(x);
        }
        left_max = left_max.max(lat.x1(x));
    }
    out
}

/// The four defining properties of a regeneration set through `x`, each
/// evaluated independently.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegenPredicates {
    /// Inside `{z ∈ A : z1 >= x1}`.
    pub right_half: bool,
    /// Strictly `x`-admissible.
    pub strictly_admissible: bool,
    /// Invariant under the transverse reflections through `x`.
    pub reflection_invariant: bool,
    /// Invariant under the background `pi_0`.
    pub background_invariant: bool,
}

impl RegenPredicates {
    pub fn all(&self) -> bool {
        self.right_half && self.strictly_admissible && self.reflection_invariant && self.background_invariant
    }
}

pub fn regen_predicates(lat: &CylinderLattice, c: &OpenCycleConfig, x: usize, set: &VertexSet) -> RegenPredicates {
    PredicateContext::new(lat, c.domain(), c.flatten_walk(), x).eval(set)
}

/// The sets and maps a predicate evaluation needs, built once per `(config, x)`.
struct PredicateContext {
    half: VertexSet,
    far: VertexSet,
    ray: VertexSet,
    cone: VertexSet,
    reflections: Vec<Vec<usize>>,
    pi0: GraphPermutation,
}

impl PredicateContext {
    fn new(lat: &CylinderLattice, domain: &VertexSet, pi0: GraphPermutation, x: usize) -> Self {
        let n = lat.vertex_count();
        PredicateContext {
            half: VertexSet::from_iter(n, domain.iter().filter(|&z| lat.x1(z) >= lat.x1(x))),
            far: far_half(lat, x),
            ray: axis_ray(lat, x),
            cone: cone(lat, x),
            reflections: (1..lat.dim()).map(|i| lat.reflection(x, i)).collect(),
            pi0,
        }
    }

    fn eval(&self, set: &VertexSet) -> RegenPredicates {
        RegenPredicates {
            right_half: set.is_subset(&self.half),
            strictly_admissible: self.far.is_subset(set) && self.ray.is_subset(set) && self.cone.is_subset(set),
            reflection_invariant: self.reflections.iter().all(|r| set.iter().all(|z| set.contains(r[z]))),
            background_invariant: set
                .iter()
                .all(|z| set.contains(self.pi0.image(z)) && set.contains(self.pi0.preimage(z))),
        }
    }
}

fn check_pre_regeneration(lat: &CylinderLattice, walk: &CyclePath, x: usize) -> Result<()> {
    if !pre_regeneration_points(walk, lat).contains(&x) {
        return Err(SrpError::Argument(format!(
            "{x} is not a pre-regeneration point of the walk"
        )));
    }
    Ok(())
}

/// Largest set through `x` with the four regeneration properties, if one
/// exists. The properties other than admissibility are preserved by unions,
/// so the candidate is the complement of the least reflection- and
/// `pi_0`-invariant set containing everything outside `{z ∈ A : z1 >= x1}`;
/// it is a regeneration set exactly when it is strictly `x`-admissible.
pub fn regeneration_set(lat: &CylinderLattice, c: &OpenCycleConfig, x: usize) -> Result<Option<VertexSet>> {
    let walk = c.walk_of()?;
    check_pre_regeneration(lat, &walk, x)?;
    Ok(regeneration_set_unchecked(
        lat,
        c,
        &c.flatten_walk(),
        &reflection_group(lat, x),
        x,
    ))
}

fn regeneration_set_unchecked(
    lat: &CylinderLattice,
    c: &OpenCycleConfig,
    pi0: &GraphPermutation,
    phi: &SymmetryGroup,
    x: usize,
) -> Option<VertexSet> {
    let n = lat.vertex_count();
    let x1 = lat.x1(x);
    let outside = VertexSet::from_iter(n, (0..n).filter(|&z| !c.domain().contains(z) || lat.x1(z) < x1));
    let candidate = minimal_invariant_closure(pi0, phi, &outside).complement();
    cone(lat, x).is_subset(&candidate).then_some(candidate)
}

/// Reference computation: the union of every subset of the right half with
/// all four properties, by exhaustive scan (right half of at most 20 vertices).
pub fn regeneration_set_exhaustive(lat: &CylinderLattice, c: &OpenCycleConfig, x: usize) -> Result<Option<VertexSet>> {
    let n = lat.vertex_count();
    let half: Vec<usize> = c.domain().iter().filter(|&z| lat.x1(z) >= lat.x1(x)).collect();
    if half.len() > 20 {
        return Err(SrpError::capacity(
            "exhaustive regeneration scan",
            half.len() as u64,
            20,
        ));
    }
    let ctx = PredicateContext::new(lat, c.domain(), c.flatten_walk(), x);
    let mut union: Option<VertexSet> = None;
    for mask in 0u64..(1 << half.len()) {
        let set = VertexSet::from_iter(
            n,
            half.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &z)| z),
        );
        if ctx.eval(&set).all() {
            union = Some(match union {
                Some(u) => u.union(&set),
                None => set,
            });
        }
    }
    Ok(union)
}

/// Pre-regeneration points that carry a regeneration set.
pub fn regeneration_points(lat: &CylinderLattice, c: &OpenCycleConfig) -> Result<Vec<(usize, VertexSet)>> {
    let walk = c.walk_of()?;
    let pi0 = c.flatten_walk();
    Ok(pre_regeneration_points(&walk, lat)
        .into_iter()
        .filter_map(|x| regeneration_set_unchecked(lat, c, &pi0, &reflection_group(lat, x), x).map(|r| (x, r)))
        .collect())
}

/// The chain `(X_i, R_i)`: `X_0` is the source with the whole domain, the
/// last point is the end of the walk with the empty set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegenRecord {
    pub points: Vec<usize>,
    pub sets: Vec<VertexSet>,
    pub walk: CyclePath,
}

impl RegenRecord {
    pub fn set_sizes(&self) -> Vec<usize> {
        self.sets.iter().map(VertexSet::len).collect()
    }
}

/// Follows the walk from `X_i`: while `x1(X_i) + scale <= length` the next
/// point is the first regeneration point (in walk order) at least `scale`
/// further right; otherwise it is the end of the walk.
pub fn extract_regen_chain(lat: &CylinderLattice, c: &OpenCycleConfig) -> Result<RegenRecord> {
    let walk = c.walk_of()?;
    let pi0 = c.flatten_walk();
    let n = lat.vertex_count();
    let scale = lat.regen_scale() as i64;
    let last = *walk.vertices.last().expect("walk has a source");
    let pre = pre_regeneration_points(&walk, lat);
    let mut points = vec![c.source()];
    let mut sets = vec![c.domain().clone()];
    let mut current = c.source();
    while current != last {
        let threshold = lat.x1(current) + scale;
        let next = if threshold <= lat.length() as i64 {
            pre.iter()
                .filter(|&&y| y != last && lat.x1(y) >= threshold)
                .find_map(|&y| regeneration_set_unchecked(lat, c, &pi0, &reflection_group(lat, y), y).map(|r| (y, r)))
        } else {
            None
        };
        let (y, r) = next.unwrap_or((last, VertexSet::empty(n)));
        points.push(y);
        sets.push(r);
        current = y;
    }
    Ok(RegenRecord { points, sets, walk })
}

/// Split of the walk at `x_L`, the last vertex on the hyperplane `L` steps
/// right of the source: `rho` is everything before it, `tail` its forward orbit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RhoDecomposition {
    pub x_l: usize,
    pub rho: Vec<usize>,
    pub tail: Vec<usize>,
}

pub fn rho_decomposition(lat: &CylinderLattice, c: &OpenCycleConfig, l: usize) -> Result<RhoDecomposition> {
    let walk = c.walk_of()?;
    let level = lat.x1(c.source()) + l as i64;
    let pos = walk
        .vertices
        .iter()
        .rposition(|&v| lat.x1(v) == level)
        .ok_or_else(|| SrpError::Argument(format!("walk never reaches level {level}")))?;
    Ok(RhoDecomposition {
        x_l: walk.vertices[pos],
        rho: walk.vertices[..pos].to_vec(),
        tail: walk.vertices[pos..].to_vec(),
    })
}

/// Counts pre-regeneration points of a walk from `x` to a vertex `L` columns
/// further right against `(1 - 3 delta) L`, when the walk has fewer than
/// `(1 + delta) L` steps; otherwise the check is skipped.
pub fn check_numbregpoint(lat: &CylinderLattice, walk: &CyclePath, delta: f64) -> CheckReport {
    let v = &walk.vertices;
    let l = v.last().map_or(0, |&y| lat.x1(y) - lat.x1(v[0]));
    let params = json!({"start": v[0], "l": l, "steps": walk.length(), "delta": delta});
    if l <= 0 {
        return CheckReport::skipped("numbregpoint", params, "walk does not end to the right of its start");
    }
    let l = l as f64;
    if walk.length() as f64 >= (1.0 + delta) * l {
        return CheckReport::skipped("numbregpoint", params, "walk is not shorter than (1 + delta) L");
    }
    let count = pre_regeneration_points(walk, lat).len() as f64;
    CheckReport::at_most("numbregpoint", params, (1.0 - 3.0 * delta) * l, count, 0.0)
}

/// Every self-avoiding walk from `start` with fewer than `(1 + delta) L`
/// steps that ends `L` columns to the right, checked by depth-first search.
pub fn exhaustive_numbregpoint(lat: &CylinderLattice, start: usize, l: usize, delta: f64) -> SuiteSummary {
    let g = lat.graph();
    let target = lat.x1(start) + l as i64;
    let max_steps = ((1.0 + delta) * l as f64).ceil() as usize - 1;
    let mut summary = SuiteSummary::new("numbregpoint");
    let mut path = vec![start];
    let mut used = VertexSet::empty(g.vertex_count());
    used.insert(start);
    fn dfs(
        lat: &CylinderLattice,
        g: &Graph,
        path: &mut Vec<usize>,
        used: &mut VertexSet,
        target: i64,
        max_steps: usize,
        delta: f64,
        out: &mut SuiteSummary,
    ) {
        let last = *path.last().expect("nonempty");
        if lat.x1(last) == target && path.len() > 1 {
            let walk = CyclePath {
                vertices: path.clone(),
                closed: false,
            };
            out.add(check_numbregpoint(lat, &walk, delta));
        }
        if path.len() > max_steps {
            return;
        }
        for &w in g.neighbors(last) {
            if used.insert(w) {
                path.push(w);
                dfs(lat, g, path, used, target, max_steps, delta, out);
                path.pop();
                used.remove(w);
            }
        }
    }
    dfs(lat, g, &mut path, &mut used, target, max_steps, delta, &mut summary);
    summary
}

/// Forward evaluations used by the open-model Markov check: `1{pi(z) = w}`
/// for `w = z` and every neighbour `w` of `z`.
fn forward_library(g: &Graph, set: &VertexSet) -> Vec<(usize, usize)> {
    set.iter()
        .flat_map(|z| std::iter::once((z, z)).chain(g.neighbors(z).iter().map(move |&w| (z, w))))
        .collect()
}

/// Exact Markov property of the open model across an almost-invariant set
/// `A` entered at `x`: the probability of `{pi(A) ⊆ A, x = first walk vertex
/// in A}` against `Z^{a->x}(A^c ∪ {x}) Z^{x->sinks}(A) / Z(V)`, and the
/// conditional laws of forward evaluations on `A^c` and on `A` against the
/// two factor ensembles, jointly and with extra conditioning on `A^c`.
pub fn check_open_markov(
    g: &Graph,
    domain: &VertexSet,
    source: usize,
    sinks: &VertexSet,
    a_set: &VertexSet,
    x: usize,
    alpha: f64,
) -> Result<Vec<CheckReport>> {
    if a_set.contains(source) || !a_set.contains(x) || sinks.contains(x) {
        return Err(SrpError::Argument(
            "need the source outside A and x in A off the sinks".into(),
        ));
    }
    if !a_set.is_subset(domain) || !sinks.is_subset(domain) {
        return Err(SrpError::Argument("A and the sinks must lie in the domain".into()));
    }
    let outside = domain.difference(a_set);
    let mut left_dom = outside.clone();
    left_dom.insert(x);
    let inner_sinks = sinks.intersection(a_set);
    let params = json!({"a": a_set.to_vec(), "x": x, "source": source, "alpha": alpha});

    let full = exact::open_distribution(g, domain, source, &Sink::Set(sinks.clone()), alpha)?;
    let event = |c: &OpenCycleConfig| {
        c.is_almost_invariant(a_set)
            && c.walk_of()
                .map(|w| w.vertices.iter().find(|&&v| a_set.contains(v)) == Some(&x))
                .unwrap_or(false)
    };
    let log_z_v = exact::partition_open(g, domain, source, &Sink::Set(sinks.clone()), alpha)?.log_value;
    let log_left = exact::partition_open(g, &left_dom, source, &Sink::Vertex(x), alpha)?.log_value;
    let log_right = if inner_sinks.is_empty() {
        f64::NEG_INFINITY
    } else {
        exact::partition_open(g, a_set, x, &Sink::Set(inner_sinks.clone()), alpha)?.log_value
    };
    let p_event = full.prob(|c| event(c));
    let predicted = (log_left + log_right - log_z_v).exp();
    let mut out = vec![CheckReport::equal(
        "open-markov-i",
        params.clone(),
        p_event,
        predicted,
        1e-9,
    )];
    if p_event <= 0.0 {
        for name in ["open-markov-ii", "open-markov-iii", "open-markov-iv"] {
            out.push(CheckReport::skipped(
                name,
                params.clone(),
                "conditioning event has probability zero",
            ));
        }
        return Ok(out);
    }
    let left = exact::open_distribution(g, &left_dom, source, &Sink::Vertex(x), alpha)?;
    let right = exact::open_distribution(g, a_set, x, &Sink::Set(inner_sinks), alpha)?;
    let fs = forward_library(g, &outside);
    let gs = forward_library(g, a_set);
    let holds = |c: &OpenCycleConfig, (z, w): (usize, usize)| c.image(z) == w;
    let ef: Vec<f64> = fs.iter().map(|&f| left.prob(|c| holds(c, f))).collect();
    let eg: Vec<f64> = gs.iter().map(|&h| right.prob(|c| holds(c, h))).collect();
    let cond: Vec<(&OpenCycleConfig, f64)> = full.iter().filter(|(c, _)| event(c)).collect();
    let mass =
        |pred: &dyn Fn(&OpenCycleConfig) -> bool| cond.iter().filter(|(c, _)| pred(c)).map(|(_, w)| w).sum::<f64>();
    let mut worst_ii = 0.0f64;
    for (i, &f) in fs.iter().enumerate() {
        worst_ii = worst_ii.max((mass(&|c| holds(c, f)) / p_event - ef[i]).abs());
    }
    let pg: Vec<f64> = gs.iter().map(|&h| mass(&|c| holds(c, h))).collect();
    for (j, p) in pg.iter().enumerate() {
        worst_ii = worst_ii.max((p / p_event - eg[j]).abs());
    }
    let mut worst_iii = 0.0f64;
    let mut worst_iv = 0.0f64;
    for (i, &f) in fs.iter().enumerate() {
        let pf = mass(&|c| holds(c, f));
        for (j, &h) in gs.iter().enumerate() {
            let joint = mass(&|c| holds(c, f) && holds(c, h));
            worst_iii = worst_iii.max((joint / p_event - ef[i] * eg[j]).abs());
            if pf > p_event * 1e-12 {
                worst_iv = worst_iv.max((joint / pf - eg[j]).abs());
            }
            let rest = p_event - pf;
            if rest > p_event * 1e-12 {
                worst_iv = worst_iv.max(((pg[j] - joint) / rest - eg[j]).abs());
            }
        }
    }
    out.push(CheckReport::at_most(
        "open-markov-ii",
        params.clone(),
        worst_ii,
        1e-9,
        0.0,
    ));
    out.push(CheckReport::at_most(
        "open-markov-iii",
        params.clone(),
        worst_iii,
        1e-9,
        0.0,
    ));
    out.push(CheckReport::at_most("open-markov-iv", params, worst_iv, 1e-9, 0.0));
    Ok(out)
}

/// Open-model problem on the whole cylinder from the origin to the far hyperplane.
pub fn cylinder_problem(lat: &CylinderLattice) -> OpenProblem {
    OpenProblem {
        domain: lat.graph().all_vertices(),
        source: lat.origin(),
        sinks: lat.hyperplane(lat.length()),
    }
}

/// Estimate of `P(|rho_L| >= (1 + delta) L | rho_L ⊆ B)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoTailEstimate {
    /// `None` when the conditioning event has no mass.
    pub value: Option<f64>,
    /// 95% interval; degenerate for exact values.
    pub interval: Option<(f64, f64)>,
    /// Probability (exact) or count (sampled) of the conditioning event.
    pub conditioning: f64,
    pub exact: bool,
}

fn rho_event(lat: &CylinderLattice, c: &OpenCycleConfig, b: &VertexSet, l: usize, delta: f64) -> Result<(bool, bool)> {
    let d = rho_decomposition(lat, c, l)?;
    let inside = d.rho.iter().all(|&v| b.contains(v));
    Ok((inside, inside && d.rho.len() as f64 >= (1.0 + delta) * l as f64))
}

fn check_rho_inputs(lat: &CylinderLattice, y: usize, a: &VertexSet, b: &VertexSet, l: usize) -> Result<()> {
    if !b.is_subset(a) {
        return Err(SrpError::Argument("B must be contained in A".into()));
    }
    for (name, s) in [("A", a), ("B", b)] {
        if admissibility(lat, s, y).map_or(true, |lv| lv < Admissibility::Admissible) {
            return Err(SrpError::Argument(format!(
                "{name} is not admissible for the base point"
            )));
        }
    }
    if lat.x1(y) + l as i64 > lat.length() as i64 {
        return Err(SrpError::Argument("level y1 + L lies beyond the cylinder".into()));
    }
    Ok(())
}

/// Exact conditional probability under `P_A^{y -> far hyperplane}` by enumeration.
pub fn exact_rho_tail(
    lat: &CylinderLattice,
    y: usize,
    a: &VertexSet,
    b: &VertexSet,
    l: usize,
    delta: f64,
    alpha: f64,
) -> Result<RhoTailEstimate> {
    check_rho_inputs(lat, y, a, b, l)?;
    let sinks = lat.hyperplane(lat.length()).intersection(a);
    let dist = exact::open_distribution(lat.graph(), a, y, &Sink::Set(sinks), alpha)?;
    let (mut cond, mut hit) = (0.0, 0.0);
    for (c, w) in dist.iter() {
        let (inside, long) = rho_event(lat, c, b, l, delta)?;
        if inside {
            cond += w;
        }
        if long {
            hit += w;
        }
    }
    let value = (cond > 0.0).then(|| hit / cond);
    Ok(RhoTailEstimate {
        value,
        interval: value.map(|v| (v, v)),
        conditioning: cond,
        exact: true,
    })
}

/// Monte Carlo estimate from sampled configurations, with a Wilson interval.
pub fn rho_tail_from_samples(
    lat: &CylinderLattice,
    samples: &[OpenCycleConfig],
    b: &VertexSet,
    l: usize,
    delta: f64,
) -> Result<RhoTailEstimate> {
    let (mut cond, mut hit) = (0u64, 0u64);
    for c in samples {
        let (inside, long) = rho_event(lat, c, b, l, delta)?;
        cond += u64::from(inside);
        hit += u64::from(long);
    }
    let value = (cond > 0).then(|| hit as f64 / cond as f64);
    Ok(RhoTailEstimate {
        value,
        interval: value.map(|_| stats::wilson_interval(hit, cond, Z95)),
        conditioning: cond as f64,
        exact: false,
    })
}

/// Exact when `A` has at most `exact_limit` vertices, sampled otherwise.
#[allow(clippy::too_many_arguments)]
pub fn estimate_rho_tail(
    lat: &CylinderLattice,
    y: usize,
    a: &VertexSet,
    b: &VertexSet,
    l: usize,
    delta: f64,
    cfg: &SamplerConfig,
    certification: &Certification,
    exact_limit: usize,
) -> Result<RhoTailEstimate> {
    if a.len() <= exact_limit {
        return exact_rho_tail(lat, y, a, b, l, delta, cfg.alpha);
    }
    check_rho_inputs(lat, y, a, b, l)?;
    let problem = OpenProblem {
        domain: a.clone(),
        source: y,
        sinks: lat.hyperplane(lat.length()).intersection(a),
    };
    let windows = cylinder_windows(lat, a, cfg.move_set);
    let samples: Vec<OpenCycleConfig> =
        sample_open_chains(lat.graph(), &problem, &windows, cfg, certification, |c| c.clone())?
            .into_iter()
            .flatten()
            .collect();
    rho_tail_from_samples(lat, &samples, b, l, delta)
}

/// Per-sample quantities for the fluctuation statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub chain: usize,
    /// `max |y_hat|` over the walk, toroidal l-infinity distance to the source's line.
    pub max_abs: i64,
    /// Transverse increments `X_{i+1} - X_i` of the regeneration chain, one
    /// vector per hop.
    pub increments: Vec<Vec<i64>>,
    pub chain_len: usize,
    pub walk_len: usize,
}

pub fn summarize_sample(lat: &CylinderLattice, c: &OpenCycleConfig, chain: usize) -> Result<SampleSummary> {
    let record = extract_regen_chain(lat, c)?;
    let src = c.source();
    let max_abs = record
        .walk
        .vertices
        .iter()
        .map(|&v| lat.transverse_distance(v, src))
        .max()
        .unwrap_or(0);
    let increments = record
        .points
        .windows(2)
        .map(|w| {
            lat.transverse(w[0])
                .iter()
                .zip(lat.transverse(w[1]))
                .map(|(&a, &b)| lat.transverse_delta(a, b))
                .collect()
        })
        .collect();
    Ok(SampleSummary {
        chain,
        max_abs,
        increments,
        chain_len: record.points.len(),
        walk_len: record.walk.length(),
    })
}

/// Samples the whole-cylinder open model and summarises each recorded configuration.
pub fn sample_summaries(
    lat: &CylinderLattice,
    cfg: &SamplerConfig,
    certification: &Certification,
) -> Result<Vec<SampleSummary>> {
    let problem = cylinder_problem(lat);
    let windows = cylinder_windows(lat, &problem.domain, cfg.move_set);
    let chains = sample_open_chains(lat.graph(), &problem, &windows, cfg, certification, |c| {
        summarize_sample(lat, c, 0)
    })?;
    let mut out = Vec::new();
    for (k, chain) in chains.into_iter().enumerate() {
        for s in chain {
            out.push(SampleSummary { chain: k, ..s? });
        }
    }
    Ok(out)
}

/// Summary statistics of the transverse fluctuations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationStats {
    pub samples: usize,
    /// `sqrt(n ln n)` with `n` the cylinder length.
    pub scale: f64,
    /// `(q, quantile of max|y_hat| / scale)`.
    pub quantiles: Vec<(f64, f64)>,
    /// Per transverse coordinate: mean increment with a 95% interval from
    /// batch means over chains (or over samples for a single chain).
    pub mean_increment: Vec<(f64, f64, f64)>,
    pub increments: usize,
    /// `(M, estimate, Wilson interval)` for `P(max|y_hat| > M scale)`.
    pub exceedance: Option<(f64, f64, (f64, f64))>,
}

pub const FLUCTUATION_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

pub fn fluctuation_stats(lat: &CylinderLattice, samples: &[SampleSummary], m: Option<f64>) -> Result<FluctuationStats> {
    if samples.is_empty() {
        return Err(SrpError::Argument("no samples".into()));
    }
    let n = lat.length() as f64;
    let scale = (n * n.ln()).sqrt();
    let mut normalized: Vec<f64> = samples.iter().map(|s| s.max_abs as f64 / scale).collect();
    normalized.sort_by(f64::total_cmp);
    let quantiles = FLUCTUATION_QUANTILES
        .iter()
        .map(|&q| (q, stats::quantile(&normalized, q)))
        .collect();
    let chains = samples.iter().map(|s| s.chain).max().unwrap_or(0) + 1;
    let dims = lat.dim() - 1;
    let mut increments = 0;
    let mean_increment = (0..dims)
        .map(|k| {
            let mut per_chain: Vec<Vec<f64>> = vec![Vec::new(); chains];
            for s in samples {
                per_chain[s.chain].extend(s.increments.iter().map(|v| v[k] as f64));
            }
            let all: Vec<f64> = per_chain.iter().flatten().copied().collect();
            increments = all.len();
            if chains >= 2 {
                let means: Vec<f64> = per_chain
                    .iter()
                    .filter(|c| !c.is_empty())
                    .map(|c| stats::mean(c))
                    .collect();
                let (_, lo, hi) = stats::mean_ci(&means, Z95);
                let m = stats::mean(&all);
                let half = (hi - lo) / 2.0;
                (m, m - half, m + half)
            } else {
                stats::mean_ci(&all, Z95)
            }
        })
        .collect();
    let exceedance = m.map(|m| {
        let hits = normalized.iter().filter(|&&v| v > m).count() as u64;
        let total = normalized.len() as u64;
        (m, hits as f64 / total as f64, stats::wilson_interval(hits, total, Z95))
    });
    Ok(FluctuationStats {
        samples: samples.len(),
        scale,
        quantiles,
        mean_increment,
        increments,
        exceedance,
    })
}

/// Mirror image of a configuration under the transverse reflection through
/// `axis` in coordinate `coordinate`.
pub fn reflect_config(
    lat: &CylinderLattice,
    c: &OpenCycleConfig,
    axis: usize,
    coordinate: usize,
) -> Result<OpenCycleConfig> {
    let r = lat.reflection(axis, coordinate);
    let mut image = vec![0; c.images().len()];
    for (x, &y) in c.images().iter().enumerate() {
        image[r[x]] = r[y];
    }
    let domain = VertexSet::from_iter(lat.vertex_count(), c.domain().iter().map(|v| r[v]));
    OpenCycleConfig::new(lat.graph(), domain, r[c.source()], r[c.sink()], image)
}

/// Move set used for the cylinder runs.
pub const CYLINDER_MOVES: MoveSet = MoveSet::Windowed;

/// Counts open configurations, for sizing exact runs.
pub fn open_ensemble_size(lat: &CylinderLattice, domain: &VertexSet, source: usize) -> Result<u64> {
    let mut count = 0u64;
    exact::for_each_open(
        lat.graph(),
        domain,
        source,
        &Sink::Set(lat.hyperplane(lat.length()).intersection(domain)),
        DEFAULT_NODE_CAP,
        |_| count += 1,
    )?;
    Ok(count)
}
