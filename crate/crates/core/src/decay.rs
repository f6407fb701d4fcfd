//! Decay constants, spatial and strong Markov checks, minimal invariant closures
//! and the inequality harnesses for partition-function ratios.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::branching::{CycleLengthBound, TailFit};
use crate::error::{Result, SrpError};
use crate::exact::{self, rooted_cycles, ExactDistribution, SawCensus, SubsetPartitions, DEFAULT_SAW_BUDGET};
use crate::lattice::{distances_from, doubled_graph, Graph, SymmetryGroup, VertexSet};
use crate::perm::GraphPermutation;
use crate::report::CheckReport;

/// Tolerance for the exact identities.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Slack allowed on exact inequalities to absorb floating-point rounding.
pub const INEQUALITY_TOL: f64 = 1e-12;

/// `alpha + ½ log(1 + e^{-2 alpha})`, evaluated without overflow for either sign.
pub fn lhs(alpha: f64) -> f64 {
    if alpha >= 0.0 {
        alpha + 0.5 * (-2.0 * alpha).exp().ln_1p()
    } else {
        0.5 * (2.0 * alpha).exp().ln_1p()
    }
}

/// Unique root of `lhs(alpha) = log_mu`, by bisection.
pub fn solve_alpha0(log_mu: f64) -> Result<f64> {
    if !log_mu.is_finite() || log_mu <= 0.0 {
        return Err(SrpError::Domain(format!(
            "log_mu must be positive and finite, got {log_mu}"
        )));
    }
    // lhs(a) > a, so the root lies below log_mu
    let mut hi = log_mu;
    let mut lo = 0.5 * (2.0 * log_mu).ln() - 1.0;
    while lhs(lo) >= log_mu {
        lo -= 1.0 + lo.abs();
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lhs(mid) < log_mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if (lhs(lo) - log_mu).abs() <= (lhs(hi) - log_mu).abs() {
        lo
    } else {
        hi
    };
    Ok(best)
}

/// Default `delta`: half of the slack `lhs(alpha) - log_mu`, so `c0` is half the slack.
pub fn default_delta(alpha: f64, log_mu: f64) -> f64 {
    let slack = lhs(alpha) - log_mu;
    log_mu.exp() * (0.5 * slack).exp_m1()
}

/// Decay constants for one `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsBundle {
    pub alpha: f64,
    /// `None` for a finite graph, whose cyclic connective constant is zero.
    pub log_mu: Option<f64>,
    pub delta: f64,
    /// `log(mu + delta)`.
    pub log_base: f64,
    /// `max_n |SAP_n| / (mu + delta)^n` over the census range.
    pub c_delta: f64,
    pub c0: f64,
    /// `C_delta / (1 - e^{-c0})`, the tail prefactor.
    pub big_c0: f64,
    pub c1: f64,
    /// Tail constants of the total population, once fitted.
    pub c_gw: Option<f64>,
    pub kappa: Option<f64>,
    /// Longest polygon length in the census.
    pub census_len: usize,
}

impl ConstantsBundle {
    fn from_parts(alpha: f64, log_mu: Option<f64>, delta: f64, log_base: f64, sap_max: &[u64]) -> Result<Self> {
        let c0 = lhs(alpha) - log_base;
        if c0 <= 0.0 {
            return Err(SrpError::Infeasible(format!(
                "c0 = {c0} <= 0 at alpha = {alpha}, log(mu + delta) = {log_base}"
            )));
        }
        let c_delta = sap_max
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(n, &c)| ((c as f64).ln() - n as f64 * log_base).exp())
            .fold(1.0f64, f64::max);
        let one_minus = -(-c0).exp_m1();
        let big_c0 = c_delta / one_minus;
        let c1 = 1.0 / (1.0 + (1.0 + (-2.0 * alpha).exp()) * c_delta * (-2.0 * c0).exp() / one_minus);
        Ok(ConstantsBundle {
            alpha,
            log_mu,
            delta,
            log_base,
            c_delta,
            c0,
            big_c0,
            c1,
            c_gw: None,
            kappa: None,
            census_len: sap_max.len().saturating_sub(1),
        })
    }

    /// `C0 e^{-c0 l}`.
    pub fn tail_bound(&self, ell: usize) -> f64 {
        self.big_c0 * (-self.c0 * ell as f64).exp()
    }

    pub fn with_tail_fit(mut self, fit: &TailFit) -> Self {
        self.c_gw = Some(fit.c);
        self.kappa = Some(fit.kappa);
        self
    }

    fn gw_constants(&self) -> Result<(f64, f64)> {
        match (self.c_gw, self.kappa) {
            (Some(c), Some(k)) => Ok((c, k)),
            _ => Err(SrpError::Argument("constants bundle has no fitted (C, kappa)".into())),
        }
    }
}

/// Constants from a user or census `log_mu` and a polygon census.
pub fn constants_bundle(alpha: f64, log_mu: f64, delta: Option<f64>, census: &SawCensus) -> Result<ConstantsBundle> {
    let alpha0 = solve_alpha0(log_mu)?;
    if alpha <= alpha0 {
        return Err(SrpError::Infeasible(format!(
            "alpha = {alpha} does not exceed alpha0 = {alpha0}"
        )));
    }
    let delta = delta.unwrap_or_else(|| default_delta(alpha, log_mu));
    if !(delta > 0.0) {
        return Err(SrpError::Argument(format!("delta must be positive, got {delta}")));
    }
    let log_base = log_mu + (delta * (-log_mu).exp()).ln_1p();
    ConstantsBundle::from_parts(alpha, Some(log_mu), delta, log_base, &census.sap)
}

/// Per-length maximum of rooted polygon counts (two-cycles included) over
/// every vertex of `g`, up to `|V|` edges.
pub fn polygon_maxima(g: &Graph) -> Result<Vec<u64>> {
    let n = g.vertex_count();
    let mut best = vec![0u64; n + 1];
    for x in 0..n {
        let c = exact::saw_census(g, x, n, true, DEFAULT_SAW_BUDGET)?;
        for (b, &s) in best.iter_mut().zip(&c.sap) {
            *b = (*b).max(s);
        }
    }
    Ok(best)
}

/// Constants valid on the finite graph `g` at any `alpha`: polygon counts vanish
/// beyond `|V|`, so the base is free and is set to `e^{lhs(alpha)/2}`.
pub fn finite_graph_constants(g: &Graph, alpha: f64) -> Result<ConstantsBundle> {
    let log_base = 0.5 * lhs(alpha);
    let sap = polygon_maxima(g)?;
    ConstantsBundle::from_parts(alpha, None, log_base.exp(), log_base, &sap)
}

/// Indicator functionals used by the Markov and decay checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Functional {
    /// `pi(x) = x`.
    FixedPoint(usize),
    /// `pi(x) = y`.
    MapsTo(usize, usize),
    /// `pi^{-1}(x) = z`.
    ComesFrom(usize, usize),
    /// The cycle through `x` has `k` edges.
    CycleEdges(usize, usize),
}

/// Version of the functional library; bump when its contents change.
pub const LIBRARY_VERSION: u32 = 1;

impl Functional {
    pub fn anchor(&self) -> usize {
        match *self {
            Functional::FixedPoint(x)
            | Functional::MapsTo(x, _)
            | Functional::ComesFrom(x, _)
            | Functional::CycleEdges(x, _) => x,
        }
    }

    /// Determined by `pi(x)` and `pi^{-1}(x)` for the anchor `x`. Cycle-length
    /// events are only determined by the restriction to an invariant block.
    pub fn is_local(&self) -> bool {
        !matches!(self, Functional::CycleEdges(..))
    }

    pub fn holds(&self, p: &GraphPermutation) -> bool {
        match *self {
            Functional::FixedPoint(x) => p.image(x) == x,
            Functional::MapsTo(x, y) => p.image(x) == y,
            Functional::ComesFrom(x, z) => p.preimage(x) == z,
            Functional::CycleEdges(x, k) => {
                let mut len = 0;
                let mut y = p.image(x);
                if y != x {
                    len = 1;
                    while y != x {
                        len += 1;
                        y = p.image(y);
                    }
                }
                len == k
            }
        }
    }

    pub fn eval(&self, p: &GraphPermutation) -> f64 {
        f64::from(u8::from(self.holds(p)))
    }
}

/// `1{pi(x)=x}`, `1{pi(x)=y}`, `1{pi^{-1}(x)=y}` over neighbours, and
/// `1{||gamma_x|| = k}` for `k` in `{0, 2, 3, 4}`.
pub fn functional_library(g: &Graph) -> Vec<Functional> {
    let mut out = Vec::new();
    for x in 0..g.vertex_count() {
        out.push(Functional::FixedPoint(x));
        for &y in g.neighbors(x) {
            out.push(Functional::MapsTo(x, y));
            out.push(Functional::ComesFrom(x, y));
        }
        for k in [0, 2, 3, 4] {
            out.push(Functional::CycleEdges(x, k));
        }
    }
    out
}

/// Exact law of `P_S`, embedded into `S_V` by the identity off `S`.
pub fn embedded_distribution(g: &Graph, set: &VertexSet, alpha: f64) -> Result<ExactDistribution<GraphPermutation>> {
    let n = g.vertex_count();
    if set.is_empty() {
        return Ok(ExactDistribution::from_support(
            alpha,
            vec![GraphPermutation::identity(n)],
            vec![0],
        ));
    }
    let (sub, members) = g.induced(set);
    let local = exact::closed_distribution(&sub, alpha)?;
    let support = local
        .support
        .iter()
        .map(|p| GraphPermutation::embed(n, &members, p))
        .collect();
    Ok(ExactDistribution {
        alpha,
        support,
        energies: local.energies,
        probabilities: local.probabilities,
    })
}

/// Least `S ⊇ A` with `pi(S) = S` and `phi(S) = S` for every `phi`: each new
/// vertex brings in its cycle and its images under the group.
pub fn minimal_invariant_closure(p: &GraphPermutation, phi: &SymmetryGroup, a: &VertexSet) -> VertexSet {
    let mut s = a.clone();
    let mut stack: Vec<usize> = a.iter().collect();
    while let Some(v) = stack.pop() {
        let mut y = p.image(v);
        while y != v {
            if s.insert(y) {
                stack.push(y);
            }
            y = p.image(y);
        }
        for e in phi.elements() {
            if s.insert(e[v]) {
                stack.push(e[v]);
            }
        }
    }
    s
}

/// Reference closure: intersection of every invariant, compatible superset of `A`.
pub fn minimal_invariant_closure_exhaustive(
    p: &GraphPermutation,
    phi: &SymmetryGroup,
    a: &VertexSet,
) -> Result<VertexSet> {
    let n = p.len();
    if n > 20 {
        return Err(SrpError::capacity("exhaustive closure vertices", n as u64, 20));
    }
    let mut meet = VertexSet::full(n);
    for mask in 0u64..(1 << n) {
        let s = VertexSet::from_mask(n, mask);
        if a.is_subset(&s) && p.is_invariant(&s) && phi.is_compatible(&s) {
            meet = meet.intersection(&s);
        }
    }
    Ok(meet)
}

/// Definitional predicates of a candidate set, recomputed on every call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantSetReport {
    pub set: VertexSet,
    pub is_pi_invariant: bool,
    pub is_phi_compatible: bool,
    pub contains_target: bool,
    /// `Some(B)` when the set contains the target and misses `B`.
    pub separated_from: Option<VertexSet>,
}

pub fn inspect_invariant_set(
    p: &GraphPermutation,
    phi: &SymmetryGroup,
    set: &VertexSet,
    target: &VertexSet,
    other: Option<&VertexSet>,
) -> InvariantSetReport {
    let contains_target = target.is_subset(set);
    InvariantSetReport {
        set: set.clone(),
        is_pi_invariant: p.is_invariant(set),
        is_phi_compatible: phi.is_compatible(set),
        contains_target,
        separated_from: other.filter(|b| contains_target && b.is_disjoint(set)).cloned(),
    }
}

/// Precomputed ensemble for running the spatial Markov checks on many sets `A`.
pub struct MarkovSuite<'g> {
    g: &'g Graph,
    alpha: f64,
    dist: ExactDistribution<GraphPermutation>,
    parts: SubsetPartitions<'g>,
    library: Vec<Functional>,
    /// For each permutation, the indices of library functionals that hold.
    active: Vec<Vec<u32>>,
}

impl<'g> MarkovSuite<'g> {
    pub fn new(g: &'g Graph, alpha: f64) -> Result<Self> {
        let dist = exact::closed_distribution(g, alpha)?;
        let library = functional_library(g);
        let active = dist
            .support
            .iter()
            .map(|p| {
                library
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| f.holds(p))
                    .map(|(i, _)| i as u32)
                    .collect()
            })
            .collect();
        Ok(MarkovSuite {
            g,
            alpha,
            dist,
            parts: SubsetPartitions::new(g)?,
            library,
            active,
        })
    }

    pub fn library(&self) -> &[Functional] {
        &self.library
    }

    /// Items (i)–(iv) for one set `A`, each reported as its worst defect.
    pub fn check(&mut self, a: &VertexSet) -> Result<Vec<CheckReport>> {
        let g = self.g;
        let n = g.vertex_count();
        let alpha = self.alpha;
        let ac = a.complement();
        let params = json!({"a": a.to_vec(), "alpha": alpha, "vertices": n, "library": LIBRARY_VERSION});
        let m = self.library.len();
        let in_a: Vec<bool> = self.library.iter().map(|f| a.contains(f.anchor())).collect();

        // sums over invariant permutations: total, per functional, per pair
        let mut p_inv = 0.0;
        let mut single = vec![0.0; m];
        let mut pair: HashMap<(u32, u32), f64> = HashMap::new();
        for (idx, (p, w)) in self.dist.iter().enumerate() {
            if !p.is_invariant(a) {
                continue;
            }
            p_inv += w;
            let act = &self.active[idx];
            for &i in act {
                single[i as usize] += w;
            }
            for &i in act.iter().filter(|&&i| in_a[i as usize]) {
                for &j in act.iter().filter(|&&j| !in_a[j as usize]) {
                    *pair.entry((i, j)).or_insert(0.0) += w;
                }
            }
        }

        // (i) against the independent cycle-cover partition functions
        let log_rhs = self.parts.log_z(a.to_mask(), alpha) + self.parts.log_z(ac.to_mask(), alpha)
            - self.parts.log_z(self.parts.full_mask(), alpha);
        let item_i = CheckReport::equal("markov-i", params.clone(), p_inv, log_rhs.exp(), IDENTITY_TOL);

        let law_a = embedded_distribution(g, a, alpha)?;
        let law_c = embedded_distribution(g, &ac, alpha)?;
        let local_mean: Vec<f64> = self
            .library
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if in_a[i] {
                    law_a.expect(|p| f.eval(p))
                } else {
                    law_c.expect(|p| f.eval(p))
                }
            })
            .collect();

        // (ii) E_V(f | A in Inv) = E_A(f(. ⊕ id)), and likewise on A^c
        let cond: Vec<f64> = single.iter().map(|s| s / p_inv).collect();
        let worst_ii = (0..m).map(|i| (cond[i] - local_mean[i]).abs()).fold(0.0, f64::max);

        // (iii) factorisation over all pairs f in A, g in A^c
        let mut worst_iii = 0.0f64;
        // (iv) conditioning additionally on B = {g = 1} or {g = 0}
        let mut worst_iv = 0.0f64;
        let idx_a: Vec<usize> = (0..m).filter(|&i| in_a[i]).collect();
        let idx_c: Vec<usize> = (0..m).filter(|&i| !in_a[i]).collect();
        for &i in &idx_a {
            for &j in &idx_c {
                let joint = pair.get(&(i as u32, j as u32)).copied().unwrap_or(0.0);
                let fg = joint / p_inv;
                worst_iii = worst_iii
                    .max((fg - cond[i] * cond[j]).abs())
                    .max((fg - local_mean[i] * local_mean[j]).abs());
                let p_b1 = single[j];
                if p_b1 > 0.0 {
                    worst_iv = worst_iv.max((joint / p_b1 - local_mean[i]).abs());
                }
                let p_b0 = p_inv - single[j];
                if p_b0 > 1e-300 && p_b0 > p_inv * 1e-12 {
                    worst_iv = worst_iv.max(((single[i] - joint) / p_b0 - local_mean[i]).abs());
                }
            }
        }
        Ok(vec![
            item_i,
            CheckReport::at_most("markov-ii", params.clone(), worst_ii, IDENTITY_TOL, 0.0),
            CheckReport::at_most("markov-iii", params.clone(), worst_iii, IDENTITY_TOL, 0.0),
            CheckReport::at_most("markov-iv", params, worst_iv, IDENTITY_TOL, 0.0),
        ])
    }
}

/// Spatial Markov items (i)–(iv) for one set `A`.
pub fn check_spatial_markov(g: &Graph, alpha: f64, a: &VertexSet) -> Result<Vec<CheckReport>> {
    MarkovSuite::new(g, alpha)?.check(a)
}

/// A random set built from a permutation.
pub trait InvariantSetBuilder {
    fn name(&self) -> String;
    fn build(&self, p: &GraphPermutation) -> VertexSet;
}

/// `Q = S` for every permutation; admissible only when `S` is always invariant.
pub struct ConstantSet(pub VertexSet);

impl InvariantSetBuilder for ConstantSet {
    fn name(&self) -> String {
        format!("constant({:?})", self.0)
    }

    fn build(&self, _p: &GraphPermutation) -> VertexSet {
        self.0.clone()
    }
}

/// `Q = Or(S)`, the union of cycles meeting `S`.
pub struct OrbitOf(pub VertexSet);

impl InvariantSetBuilder for OrbitOf {
    fn name(&self) -> String {
        format!("orbit({:?})", self.0)
    }

    fn build(&self, p: &GraphPermutation) -> VertexSet {
        p.orbit(&self.0)
    }
}

/// `Q = Q_A`, the minimal invariant, compatible closure.
pub struct ClosureOf {
    pub phi: SymmetryGroup,
    pub a: VertexSet,
}

impl InvariantSetBuilder for ClosureOf {
    fn name(&self) -> String {
        format!("closure(|Phi|={}, A={:?})", self.phi.order(), self.a)
    }

    fn build(&self, p: &GraphPermutation) -> VertexSet {
        minimal_invariant_closure(p, &self.phi, &self.a)
    }
}

/// Checks that `Q(pi)` is `pi`-invariant and that `{Q = A}` depends only on
/// `pi(x), pi^{-1}(x)` for `x ∈ A`, over the whole ensemble.
pub fn check_admissible(support: &[GraphPermutation], builder: &dyn InvariantSetBuilder) -> Result<Vec<VertexSet>> {
    let values: Vec<VertexSet> = support.iter().map(|p| builder.build(p)).collect();
    for (p, q) in support.iter().zip(&values) {
        if !p.is_invariant(q) {
            return Err(SrpError::StrategyContract(format!(
                "{}: Q = {:?} is not invariant under {:?}",
                builder.name(),
                q,
                p.images()
            )));
        }
    }
    let range: Vec<VertexSet> = values.iter().cloned().collect::<HashSet<_>>().into_iter().collect();
    for a in &range {
        let mut seen: HashMap<Vec<(usize, usize)>, bool> = HashMap::new();
        for (p, q) in support.iter().zip(&values) {
            let signature: Vec<(usize, usize)> = a.iter().map(|x| (p.image(x), p.preimage(x))).collect();
            let hit = q == a;
            if let Some(&prev) = seen.get(&signature) {
                if prev != hit {
                    return Err(SrpError::StrategyContract(format!(
                        "{}: the event Q = {:?} is not determined by the permutation on that set",
                        builder.name(),
                        a
                    )));
                }
            } else {
                seen.insert(signature, hit);
            }
        }
    }
    Ok(range)
}

/// Strong Markov identity for functionals anchored in `B`: on each event
/// `{Q = A}` with `A ∩ B = ∅`, and against every test function `h` measurable
/// on `A`, `E_V(f h 1{Q=A}) = E_{A^c}(f(. ⊕ id)) E_V(h 1{Q=A})`. The summed
/// form `E_V(f 1{Q ∩ B = ∅}) = Σ_A E_{A^c}(f) P(Q = A)` is reported as well.
pub fn check_strong_markov(
    g: &Graph,
    alpha: f64,
    builder: &dyn InvariantSetBuilder,
    b: &VertexSet,
) -> Result<Vec<CheckReport>> {
    let dist = exact::closed_distribution(g, alpha)?;
    let range = check_admissible(&dist.support, builder)?;
    let library = functional_library(g);
    let fs: Vec<Functional> = library.iter().copied().filter(|f| b.contains(f.anchor())).collect();
    let q_values: Vec<VertexSet> = dist.support.iter().map(|p| builder.build(p)).collect();
    let params = json!({"q": builder.name(), "b": b.to_vec(), "alpha": alpha});
    let mut worst_block = 0.0f64;
    let mut summed_lhs = vec![0.0; fs.len()];
    let mut summed_rhs = vec![0.0; fs.len()];
    for a in range.iter().filter(|a| a.is_disjoint(b)) {
        let law_c = embedded_distribution(g, &a.complement(), alpha)?;
        let local: Vec<f64> = fs.iter().map(|f| law_c.expect(|p| f.eval(p))).collect();
        let tests: Vec<Option<Functional>> = std::iter::once(None)
            .chain(library.iter().filter(|h| a.contains(h.anchor())).map(|h| Some(*h)))
            .collect();
        let members: Vec<usize> = (0..dist.len()).filter(|&i| q_values[i] == *a).collect();
        for h in &tests {
            let h_val = |p: &GraphPermutation| h.map_or(1.0, |h| h.eval(p));
            let mass: f64 = members
                .iter()
                .map(|&i| dist.probabilities[i] * h_val(&dist.support[i]))
                .sum();
            for (k, f) in fs.iter().enumerate() {
                let joint: f64 = members
                    .iter()
                    .map(|&i| dist.probabilities[i] * h_val(&dist.support[i]) * f.eval(&dist.support[i]))
                    .sum();
                worst_block = worst_block.max((joint - local[k] * mass).abs());
                if h.is_none() {
                    summed_lhs[k] += joint;
                    summed_rhs[k] += local[k] * mass;
                }
            }
        }
    }
    let worst_sum = summed_lhs
        .iter()
        .zip(&summed_rhs)
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        CheckReport::at_most("strong-markov-blocks", params.clone(), worst_block, IDENTITY_TOL, 0.0),
        CheckReport::at_most("strong-markov-summed", params, worst_sum, IDENTITY_TOL, 0.0),
    ])
}

fn check_subsets(g: &Graph, u: &VertexSet, b: &VertexSet) -> Result<()> {
    if u.universe() != g.vertex_count() || b.universe() != g.vertex_count() {
        return Err(SrpError::Argument("vertex sets do not match the graph".into()));
    }
    if !b.is_subset(u) {
        return Err(SrpError::Argument("B must be contained in U".into()));
    }
    Ok(())
}

/// Exact `P(Q_A ∩ B ≠ ∅ | pi|_A = id)` on the doubled graph with the copy swap,
/// where `A = V_1 \ U_1` and `B` sits in the first copy.
pub fn doubled_closure_probability(g: &Graph, u: &VertexSet, b: &VertexSet, alpha: f64) -> Result<f64> {
    check_subsets(g, u, b)?;
    let n = g.vertex_count();
    let (dg, swap) = doubled_graph(g);
    let lift = |s: &VertexSet, shift: usize| VertexSet::from_iter(2 * n, s.iter().map(|x| x + shift));
    let a = lift(&u.complement(), 0);
    let b1 = lift(b, 0);
    let first = embedded_distribution(g, u, alpha)?;
    let second = exact::closed_distribution(g, alpha)?;
    let mut prob = 0.0;
    for (p1, w1) in first.iter() {
        for (p2, w2) in second.iter() {
            let image: Vec<usize> = p1
                .images()
                .iter()
                .copied()
                .chain(p2.images().iter().map(|&y| y + n))
                .collect();
            let joint = GraphPermutation::new(&dg, image)?;
            if !minimal_invariant_closure(&joint, &swap, &a).is_disjoint(&b1) {
                prob += w1 * w2;
            }
        }
    }
    Ok(prob)
}

/// Boundary-condition decay: for every local functional anchored in `B`, the
/// exact `|E_U f - E_V f|` is compared with `2 P(Q_A ∩ B ≠ ∅ | pi|_A = id)` on
/// the doubled graph and with `2 C Σ_{x ∈ V \ U} e^{-kappa d(x, B)}`.
/// Uncertified tail constants are refused unless `allow_unverified`.
pub fn verify_boundary_decay(
    g: &Graph,
    u: &VertexSet,
    b: &VertexSet,
    alpha: f64,
    bound: &CycleLengthBound,
    fit: &TailFit,
    allow_unverified: bool,
) -> Result<Vec<CheckReport>> {
    check_subsets(g, u, b)?;
    if !fit.rigorous && !allow_unverified {
        return Err(SrpError::Refused(
            "tail constants are not certified beyond the fitted range; pass allow_unverified to proceed".into(),
        ));
    }
    let params = json!({"u": u.to_vec(), "b": b.to_vec(), "alpha": alpha, "c": fit.c, "kappa": fit.kappa});
    let law_v = exact::closed_distribution(g, alpha)?;
    let law_u = embedded_distribution(g, u, alpha)?;
    let fs: Vec<Functional> = functional_library(g)
        .into_iter()
        .filter(|f| f.is_local() && b.contains(f.anchor()))
        .collect();
    let gap = fs
        .iter()
        .map(|f| (law_u.expect(|p| f.eval(p)) - law_v.expect(|p| f.eval(p))).abs())
        .fold(0.0, f64::max);
    let doubled = 2.0 * doubled_closure_probability(g, u, b, alpha)?;
    let mut out = vec![CheckReport::at_most(
        "boundary-doubled",
        params.clone(),
        gap,
        doubled,
        INEQUALITY_TOL,
    )];
    if !bound.mean_below_two() {
        out.push(CheckReport::skipped(
            "boundary-decay",
            params,
            format!("E xi = {} is not below 2", bound.mean()),
        ));
        return Ok(out);
    }
    let dist = distances_from(g, b);
    let sum: f64 = u
        .complement()
        .iter()
        .filter_map(|x| dist[x])
        .map(|d| (-fit.kappa * d as f64).exp())
        .sum();
    out.push(CheckReport::at_most(
        "boundary-decay",
        params,
        gap,
        2.0 * fit.c * sum,
        INEQUALITY_TOL,
    ));
    Ok(out)
}

/// `log Z(V_0 \ A) - log Z(V_0)` and the same for `V_1`, exact.
pub fn log_partition_ratios(g: &Graph, v1: &VertexSet, a: &VertexSet, alpha: f64) -> Result<(f64, f64)> {
    let mut parts = SubsetPartitions::new(g)?;
    let full = parts.full_mask();
    let (am, v1m) = (a.to_mask(), v1.to_mask());
    let r0 = parts.log_z(full & !am, alpha) - parts.log_z(full, alpha);
    let r1 = parts.log_z(v1m & !am, alpha) - parts.log_z(v1m, alpha);
    Ok((r0, r1))
}

/// Two-sided bounds between `Z(V_0 \ A)/Z(V_0)` and `Z(V_1 \ A)/Z(V_1)` with
/// `V_0 = V(g)`, in log form: `|log r_0 - log r_1| <= log D`, for the pairwise
/// sum and for the coarser `|A| |B| e^{-kappa d(A, B)}` form.
pub fn verify_partition_ratio_bounds(
    g: &Graph,
    v1: &VertexSet,
    a: &VertexSet,
    alpha: f64,
    constants: &ConstantsBundle,
    bound: &CycleLengthBound,
) -> Result<Vec<CheckReport>> {
    if !a.is_subset(v1) {
        return Err(SrpError::Argument("A must be contained in V_1".into()));
    }
    let (c, kappa) = constants.gw_constants()?;
    let params =
        json!({"v1": v1.to_vec(), "a": a.to_vec(), "alpha": alpha, "c": c, "kappa": kappa, "c1": constants.c1});
    if !bound.mean_below_two() {
        let why = format!("E xi = {} is not below 2", bound.mean());
        return Ok(vec![
            CheckReport::skipped("partition-ratio-pairwise", params.clone(), why.clone()),
            CheckReport::skipped("partition-ratio-coarse", params, why),
        ]);
    }
    let (r0, r1) = log_partition_ratios(g, v1, a, alpha)?;
    let outside = v1.complement();
    let mut pairwise = 0.0;
    let mut closest: Option<usize> = None;
    for x in a.iter() {
        let dist = distances_from(g, &VertexSet::from_iter(g.vertex_count(), [x]));
        for y in outside.iter() {
            if let Some(d) = dist[y] {
                pairwise += (-kappa * d as f64).exp();
                closest = Some(closest.map_or(d, |c| c.min(d)));
            }
        }
    }
    let coarse = closest.map_or(0.0, |d| (a.len() * outside.len()) as f64 * (-kappa * d as f64).exp());
    let scale = 2.0 * c / constants.c1;
    let gap = (r0 - r1).abs();
    Ok(vec![
        CheckReport::at_most(
            "partition-ratio-pairwise",
            params.clone(),
            gap,
            scale * pairwise,
            INEQUALITY_TOL,
        ),
        CheckReport::at_most("partition-ratio-coarse", params, gap, scale * coarse, INEQUALITY_TOL),
    ])
}

/// `Z(U \ A)/Z(U) >= c1^{|A|}` in log form, with the telescoping product over
/// `A_i = {x_i, ..., x_n}` checked against the direct ratio.
pub fn verify_c1_bound(
    g: &Graph,
    u: &VertexSet,
    a: &VertexSet,
    alpha: f64,
    constants: &ConstantsBundle,
) -> Result<Vec<CheckReport>> {
    if !a.is_subset(u) {
        return Err(SrpError::Argument("A must be contained in U".into()));
    }
    let mut parts = SubsetPartitions::new(g)?;
    let um = u.to_mask();
    let direct = parts.log_z(um & !a.to_mask(), alpha) - parts.log_z(um, alpha);
    let members = a.to_vec();
    let mut telescoped = 0.0;
    for i in 0..members.len() {
        let tail_i: u64 = members[i..].iter().fold(0, |m, &x| m | (1 << x));
        let tail_next: u64 = members[i + 1..].iter().fold(0, |m, &x| m | (1 << x));
        telescoped += parts.log_z(um & !tail_i, alpha) - parts.log_z(um & !tail_next, alpha);
    }
    let params = json!({"u": u.to_vec(), "a": a.to_vec(), "alpha": alpha, "c1": constants.c1});
    let tol = 1e-12 * direct.abs().max(1.0);
    Ok(vec![
        CheckReport::at_most(
            "c1-bound",
            params.clone(),
            a.len() as f64 * constants.c1.ln(),
            direct,
            INEQUALITY_TOL,
        ),
        CheckReport::equal("c1-telescoping", params, telescoped, direct, tol),
    ])
}

/// Single-site steps inside the `c1` argument, for `x ∈ U`:
/// every rooted cycle `gamma` of `n` vertices has
/// `Z(U \ gamma)/Z(U \ x) <= (1 + e^{-2 alpha})^{-(n-2)/2}`, and
/// `Z(U)/Z(U \ x) <= 1 + (1 + e^{-2 alpha}) Σ_{n>=2} |SAP_n(x) ∩ U| e^{-n lhs(alpha)}`,
/// which in turn is at most `1/c1` for the given constants.
pub fn verify_single_site_bounds(
    g: &Graph,
    u: &VertexSet,
    x: usize,
    alpha: f64,
    constants: &ConstantsBundle,
) -> Result<Vec<CheckReport>> {
    if !u.contains(x) {
        return Err(SrpError::Argument("x must lie in U".into()));
    }
    let mut parts = SubsetPartitions::new(g)?;
    let um = u.to_mask();
    let without_x = um & !(1 << x);
    let lz_wx = parts.log_z(without_x, alpha);
    let w = (-2.0 * alpha).exp();
    let mut worst_cycle = f64::INFINITY;
    let mut worst_lhs = 0.0;
    let mut worst_rhs = 0.0;
    let mut series = 0.0;
    for (mask, len) in rooted_cycles(g, x, um)? {
        let ratio = parts.log_z(um & !mask, alpha) - lz_wx;
        let bound = -0.5 * (len as f64 - 2.0) * w.ln_1p();
        if bound - ratio < worst_cycle {
            worst_cycle = bound - ratio;
            worst_lhs = ratio;
            worst_rhs = bound;
        }
        series += (-(len as f64) * lhs(alpha)).exp();
    }
    let params = json!({"u": u.to_vec(), "x": x, "alpha": alpha});
    let site = (parts.log_z(um, alpha) - lz_wx).exp();
    let sum_bound = 1.0 + (1.0 + w) * series;
    let mut out = Vec::new();
    if worst_cycle.is_finite() {
        out.push(CheckReport::at_most(
            "single-site-cycle",
            params.clone(),
            worst_lhs,
            worst_rhs,
            INEQUALITY_TOL,
        ));
    }
    out.push(CheckReport::at_most(
        "single-site-series",
        params.clone(),
        site,
        sum_bound,
        INEQUALITY_TOL,
    ));
    out.push(CheckReport::at_most(
        "single-site-c1",
        params,
        site,
        1.0 / constants.c1,
        INEQUALITY_TOL,
    ));
    Ok(out)
}

/// Every self-avoiding path and every cycle `gamma` of `g` satisfies
/// `Z(V \ gamma)/Z(V) <= (1 + e^{-2 alpha})^{-||gamma||/2}` and
/// `Z(gamma) >= (1 + e^{-2 alpha})^{M/2}` with `M` the largest even number
/// not above `|gamma|`. Reports the worst instance of each.
pub fn verify_path_cycle_bounds(g: &Graph, alpha: f64) -> Result<Vec<CheckReport>> {
    let n = g.vertex_count();
    let mut parts = SubsetPartitions::new(g)?;
    let full = parts.full_mask();
    let lz_v = parts.log_z(full, alpha);
    let l1p = (-2.0 * alpha).exp().ln_1p();
    // (vertex mask, edge count) for paths and cycles
    let mut shapes: HashSet<(u64, usize)> = HashSet::new();
    fn paths(g: &Graph, cur: usize, used: u64, edges: usize, out: &mut HashSet<(u64, usize)>) {
        out.insert((used, edges));
        for &w in g.neighbors(cur) {
            if used & (1 << w) == 0 {
                paths(g, w, used | (1 << w), edges + 1, out);
            }
        }
    }
    for x in 0..n {
        paths(g, x, 1 << x, 0, &mut shapes);
        for (mask, len) in rooted_cycles(g, x, full)? {
            shapes.insert((mask, len));
        }
    }
    let mut worst_ratio = (f64::INFINITY, 0.0, 0.0);
    let mut worst_internal = (f64::INFINITY, 0.0, 0.0);
    let mut shapes: Vec<(u64, usize)> = shapes.into_iter().collect();
    shapes.sort_unstable();
    for &(mask, edges) in &shapes {
        let ratio = parts.log_z(full & !mask, alpha) - lz_v;
        let bound = -0.5 * edges as f64 * l1p;
        if bound - ratio < worst_ratio.0 {
            worst_ratio = (bound - ratio, ratio, bound);
        }
        let sites = mask.count_ones() as usize;
        let inner = parts.log_z(mask, alpha);
        let floor = 0.5 * (sites - sites % 2) as f64 * l1p;
        if inner - floor < worst_internal.0 {
            worst_internal = (inner - floor, floor, inner);
        }
    }
    let params = json!({"vertices": n, "alpha": alpha, "shapes": shapes.len()});
    Ok(vec![
        CheckReport::at_most(
            "path-cycle-ratio",
            params.clone(),
            worst_ratio.1,
            worst_ratio.2,
            INEQUALITY_TOL,
        ),
        CheckReport::at_most(
            "path-cycle-internal",
            params,
            worst_internal.1,
            worst_internal.2,
            INEQUALITY_TOL,
        ),
    ])
}

/// Exact `P_V(||gamma_x|| >= l)` against `C0 e^{-c0 l}` for `l >= 1`.
pub fn verify_cycle_tail_bound(g: &Graph, x: usize, alpha: f64, constants: &ConstantsBundle) -> Result<CheckReport> {
    let tail = exact::cycle_tail(g, x, alpha)?;
    // tail[l] = P(> l) = P(>= l + 1)
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    for (l, &p) in tail.iter().enumerate() {
        let rhs = constants.tail_bound(l + 1);
        if rhs - p < worst.0 {
            worst = (rhs - p, p, rhs);
        }
    }
    Ok(CheckReport::at_most(
        "cycle-tail-bound",
        json!({"x": x, "alpha": alpha, "c0": constants.c0, "big_c0": constants.big_c0}),
        worst.1,
        worst.2,
        INEQUALITY_TOL,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{fit_tail, subgraph_cycle_bound};
    use crate::lattice::CylinderLattice;
    use proptest::prelude::*;

    fn newton_root(log_mu: f64) -> f64 {
        // Newton on a + ½ log(1 + e^{-2a}) - log_mu, derivative 1/(1 + e^{-2a})
        let mut a = log_mu;
        for _ in 0..100 {
            let f = a + 0.5 * (1.0 + (-2.0 * a).exp()).ln() - log_mu;
            let d = 1.0 / (1.0 + (-2.0 * a).exp());
            a -= f / d;
        }
        a
    }

    #[test]
    fn alpha0_examples() {
        let a = solve_alpha0(1.0).unwrap();
        assert!((lhs(a) - 1.0).abs() < 1e-12);
        assert!((a - newton_root(1.0)).abs() < 1e-12);
        // frozen from an independent scalar root finder
        assert!((a - 0.927_293_271_065_570_5).abs() < 1e-12, "{a}");
        let zero = solve_alpha0(0.5 * 2f64.ln()).unwrap();
        assert!(zero.abs() < 1e-12);
        let big = solve_alpha0(50.0).unwrap();
        // the true root is 50 - 2e-44, which rounds to 50
        assert!(big > 49.99 && big <= 50.0);
        assert!(matches!(solve_alpha0(0.0), Err(SrpError::Domain(_))));
        assert!(matches!(solve_alpha0(-1.0), Err(SrpError::Domain(_))));
    }

    #[test]
    fn alpha0_residual_and_monotonicity_on_grid() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=20 {
            let log_mu = 0.1 * i as f64;
            let a = solve_alpha0(log_mu).unwrap();
            assert!((lhs(a) - log_mu).abs() < 1e-12);
            assert!(a < log_mu && a > prev);
            prev = a;
        }
    }

    fn z2_census(n: usize) -> SawCensus {
        let (g, c) = Graph::square_patch(n);
        exact::saw_census(&g, c, n, true, DEFAULT_SAW_BUDGET).unwrap()
    }

    #[test]
    fn constants_formulas() {
        let census = z2_census(8);
        let b = constants_bundle(3.0, 1.0, Some(1.0), &census).unwrap();
        let expected_c0 = 3.0 + 0.5 * (1.0 + (-6.0f64).exp()).ln() - (1f64.exp() + 1.0).ln();
        assert!((b.c0 - expected_c0).abs() < 1e-12);
        let c_delta = (0..=8)
            .map(|n| census.sap[n] as f64 / (1f64.exp() + 1.0).powi(n as i32))
            .fold(0.0, f64::max);
        assert!((b.c_delta - c_delta).abs() < 1e-12 * c_delta);
        let c1 =
            1.0 / (1.0 + (1.0 + (-6.0f64).exp()) * c_delta * (-2.0 * expected_c0).exp() / (1.0 - (-expected_c0).exp()));
        assert!((b.c1 - c1).abs() < 1e-12);
        assert!(b.c1 > 0.0 && b.c1 <= 1.0);
    }

    #[test]
    fn constants_limits_in_alpha() {
        let census = z2_census(8);
        let ratios: Vec<f64> = [5.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&a| constants_bundle(a, 1.0, Some(1.0), &census).unwrap().c0 / a)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]) && (1.0 - ratios[3]).abs() < 0.05);
        let c1s: Vec<f64> = [5.0, 10.0, 20.0]
            .iter()
            .map(|&a| constants_bundle(a, 1.0, Some(1.0), &census).unwrap().c1)
            .collect();
        assert!(c1s.windows(2).all(|w| w[1] > w[0]) && 1.0 - c1s[2] < 1e-12);
    }

    #[test]
    fn constants_errors_and_empty_census() {
        let census = z2_census(4);
        assert!(matches!(
            constants_bundle(0.5, 1.0, None, &census),
            Err(SrpError::Infeasible(_))
        ));
        let empty = SawCensus {
            origin: 0,
            saw: vec![1, 0, 0],
            sap: vec![1, 0, 0],
            include_two_cycles: true,
        };
        let b = constants_bundle(2.0, 1.0, None, &empty).unwrap();
        assert_eq!(b.c_delta, 1.0);
        // default delta puts c0 at half the slack
        assert!((b.c0 - 0.5 * (lhs(2.0) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn finite_constants_bound_cycle_tails() {
        for g in [Graph::grid(2, 2), Graph::grid(2, 3), Graph::cycle(5)] {
            for alpha in [0.5, 1.0, 2.0] {
                let k = finite_graph_constants(&g, alpha).unwrap();
                for x in 0..g.vertex_count() {
                    assert!(verify_cycle_tail_bound(&g, x, alpha, &k).unwrap().pass);
                }
            }
        }
    }

    #[test]
    fn closure_examples() {
        let g = Graph::grid(2, 2);
        let id = GraphPermutation::identity(4);
        let trivial = SymmetryGroup::trivial(4);
        let a = VertexSet::from_iter(4, [1]);
        assert_eq!(minimal_invariant_closure(&id, &trivial, &a), a);
        // 4-cycle 0 -> 1 -> 3 -> 2 -> 0 in the 2x2 grid
        let p = GraphPermutation::new(&g, vec![1, 3, 0, 2]).unwrap();
        assert_eq!(minimal_invariant_closure(&p, &trivial, &a).len(), 4);
    }

    #[test]
    fn closure_matches_exhaustive_on_doubled_graphs() {
        for base in [Graph::path(3), Graph::grid(2, 2), Graph::path(5)] {
            let (dg, swap) = doubled_graph(&base);
            let n = dg.vertex_count();
            let perms = exact::enumerate_closed_vec(&dg).unwrap();
            for (i, p) in perms.iter().enumerate().step_by(7) {
                let a = VertexSet::from_mask(n, (i as u64 * 2654435761) % (1 << n));
                let fast = minimal_invariant_closure(p, &swap, &a);
                assert_eq!(fast, minimal_invariant_closure_exhaustive(p, &swap, &a).unwrap());
                let r = inspect_invariant_set(p, &swap, &fast, &a, None);
                assert!(r.is_pi_invariant && r.is_phi_compatible && r.contains_target);
            }
        }
    }

    proptest! {
        #[test]
        fn closure_is_idempotent_and_monotone(seed in 0usize..10_000, a in 0u64..1024, b in 0u64..1024) {
            let (dg, swap) = doubled_graph(&Graph::path(5));
            let perms = exact::enumerate_closed_vec(&dg).unwrap();
            let p = &perms[seed % perms.len()];
            let sa = VertexSet::from_mask(10, a);
            let sab = VertexSet::from_mask(10, a | b);
            let qa = minimal_invariant_closure(p, &swap, &sa);
            prop_assert_eq!(minimal_invariant_closure(p, &swap, &qa), qa.clone());
            prop_assert!(qa.is_subset(&minimal_invariant_closure(p, &swap, &sab)));
        }
    }

    #[test]
    fn spatial_markov_examples() {
        let g = Graph::grid(2, 2);
        let mut suite = MarkovSuite::new(&g, 1.0).unwrap();
        for a in [VertexSet::empty(4), VertexSet::full(4), VertexSet::from_iter(4, [0, 1])] {
            for r in suite.check(&a).unwrap() {
                assert!(r.pass, "{r:?}");
            }
        }
        // K2 plus an isolated vertex: the isolated vertex is always invariant
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let r = check_spatial_markov(&g, 0.7, &VertexSet::from_iter(3, [2])).unwrap();
        assert!((r[0].lhs - 1.0).abs() < 1e-12 && r.iter().all(|c| c.pass));
    }

    #[test]
    fn spatial_markov_all_subsets_small_cylinder() {
        let lat = CylinderLattice::rect(2, 3, 2, 64).unwrap();
        let g = lat.graph();
        let mut suite = MarkovSuite::new(g, 0.8).unwrap();
        let n = g.vertex_count();
        for mask in 0..(1u64 << n) {
            for r in suite.check(&VertexSet::from_mask(n, mask)).unwrap() {
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn strong_markov_examples() {
        let g = Graph::grid(2, 2);
        let b = VertexSet::from_iter(4, [3]);
        let all = check_strong_markov(&g, 1.0, &ConstantSet(VertexSet::full(4)), &b).unwrap();
        assert!(all.iter().all(|r| r.pass && r.lhs == 0.0));
        let orbit = check_strong_markov(&g, 1.0, &OrbitOf(VertexSet::from_iter(4, [0])), &b).unwrap();
        assert!(orbit.iter().all(|r| r.pass), "{orbit:?}");
        let (dg, swap) = doubled_graph(&Graph::path(3));
        let closure = ClosureOf {
            phi: swap,
            a: VertexSet::from_iter(6, [0]),
        };
        let r = check_strong_markov(&dg, 1.5, &closure, &VertexSet::from_iter(6, [2])).unwrap();
        assert!(r.iter().all(|r| r.pass), "{r:?}");
    }

    struct OrbitComplement(usize);

    impl InvariantSetBuilder for OrbitComplement {
        fn name(&self) -> String {
            "orbit-complement".into()
        }

        fn build(&self, p: &GraphPermutation) -> VertexSet {
            p.orbit(&VertexSet::from_iter(p.len(), [self.0])).complement()
        }
    }

    #[test]
    fn non_admissible_builder_is_rejected() {
        let g = Graph::path(3);
        let err = check_strong_markov(&g, 1.0, &OrbitComplement(0), &VertexSet::from_iter(3, [1])).unwrap_err();
        assert!(matches!(err, SrpError::StrategyContract(_)));
        let not_invariant = ConstantSet(VertexSet::from_iter(3, [0]));
        assert!(check_strong_markov(&g, 1.0, &not_invariant, &VertexSet::empty(3)).is_err());
    }

    #[test]
    fn c1_examples() {
        let g = Graph::complete(2);
        let alpha = 1.3;
        let k = finite_graph_constants(&g, alpha).unwrap();
        let u = VertexSet::full(2);
        let a = VertexSet::from_iter(2, [0]);
        let (r0, _) = log_partition_ratios(&g, &u, &a, alpha).unwrap();
        assert!((r0.exp() - 1.0 / (1.0 + (-2.0 * alpha).exp())).abs() < 1e-12);
        for r in verify_c1_bound(&g, &u, &a, alpha, &k).unwrap() {
            assert!(r.pass, "{r:?}");
        }
        let empty = verify_c1_bound(&g, &u, &VertexSet::empty(2), alpha, &k).unwrap();
        assert_eq!((empty[0].lhs, empty[0].rhs), (0.0, 0.0));
        let sq = Graph::grid(2, 2);
        let k = finite_graph_constants(&sq, 2.0).unwrap();
        for r in verify_c1_bound(&sq, &VertexSet::full(4), &VertexSet::from_iter(4, [0, 1]), 2.0, &k).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn single_site_and_path_bounds_on_grids() {
        for g in [Graph::grid(2, 3), Graph::grid(3, 3), Graph::cycle(5)] {
            for alpha in [0.5, 1.0, 2.0] {
                let k = finite_graph_constants(&g, alpha).unwrap();
                for r in verify_path_cycle_bounds(&g, alpha).unwrap() {
                    assert!(r.pass, "{r:?}");
                }
                let u = g.all_vertices();
                for x in 0..g.vertex_count() {
                    for r in verify_single_site_bounds(&g, &u, x, alpha, &k).unwrap() {
                        assert!(r.pass, "{r:?}");
                    }
                }
            }
        }
    }

    fn decay_setup(g: &Graph, alpha: f64) -> (CycleLengthBound, TailFit) {
        let bound = subgraph_cycle_bound(g, alpha).unwrap();
        let fit = fit_tail(&bound.scaled_offspring(1).unwrap(), None, 200).unwrap();
        (bound, fit)
    }

    #[test]
    fn boundary_decay_examples() {
        let g = Graph::path(3);
        let alpha = 3.0;
        let (bound, fit) = decay_setup(&g, alpha);
        assert!(fit.rigorous && bound.mean_below_two());
        let u = VertexSet::from_iter(3, [0, 1]);
        let b = VertexSet::from_iter(3, [0]);
        let reports = verify_boundary_decay(&g, &u, &b, alpha, &bound, &fit, false).unwrap();
        assert!(reports.iter().all(|r| r.pass), "{reports:?}");
        let same = verify_boundary_decay(&g, &g.all_vertices(), &b, alpha, &bound, &fit, false).unwrap();
        assert!(same.iter().all(|r| r.pass && r.lhs.abs() < 1e-15));
        let mut loose = fit;
        loose.rigorous = false;
        assert!(matches!(
            verify_boundary_decay(&g, &u, &b, alpha, &bound, &loose, false),
            Err(SrpError::Refused(_))
        ));
    }

    #[test]
    fn boundary_gap_decreases_in_alpha() {
        let g = Graph::path(3);
        let u = VertexSet::from_iter(3, [0, 1]);
        let b = VertexSet::from_iter(3, [0]);
        let gaps: Vec<f64> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&alpha| {
                let (bound, fit) = decay_setup(&g, alpha);
                verify_boundary_decay(&g, &u, &b, alpha, &bound, &fit, true).unwrap()[0].lhs
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn partition_ratio_examples() {
        let g = Graph::grid(2, 3);
        let alpha = 2.0;
        let (bound, fit) = decay_setup(&g, alpha);
        let k = finite_graph_constants(&g, alpha).unwrap().with_tail_fit(&fit);
        let full = g.all_vertices();
        let empty = verify_partition_ratio_bounds(&g, &full, &VertexSet::empty(6), alpha, &k, &bound).unwrap();
        assert!(empty.iter().all(|r| r.pass && r.lhs == 0.0));
        let same = verify_partition_ratio_bounds(&g, &full, &VertexSet::from_iter(6, [0]), alpha, &k, &bound).unwrap();
        assert!(same.iter().all(|r| r.pass && r.lhs.abs() < 1e-12 && r.rhs == 0.0));
        let v1 = VertexSet::from_iter(6, [0, 1, 2, 3, 4]);
        let r = verify_partition_ratio_bounds(&g, &v1, &VertexSet::from_iter(6, [0]), alpha, &k, &bound).unwrap();
        assert!(r.iter().all(|r| r.pass), "{r:?}");
    }
}
