//! Exact enumeration of closed and open configurations, partition functions,
//! cycle-length tails and self-avoiding walk censuses.
//!
//! Everything here is brute force and meant for small graphs; it is the oracle
//! the samplers and inequality harnesses are tested against.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrpError};
use crate::lattice::{Graph, VertexSet};
use crate::perm::{GraphPermutation, OpenCycleConfig};

/// Default cap on DFS nodes visited by one enumeration.
pub const DEFAULT_NODE_CAP: u64 = 100_000_000;

/// Relative tolerance used by exactness assertions across the crate.
pub const EXACT_RTOL: f64 = 1e-9;

pub fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `|a - b| <= rtol * max(|a|, |b|, 1)`.
pub fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1.0)
}

/// Integer histogram of the energy over an ensemble: `counts[k]` configurations have energy `k`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    pub counts: Vec<u64>,
}

impl EnergyHistogram {
    pub fn add(&mut self, energy: usize, count: u64) {
        if self.counts.len() <= energy {
            self.counts.resize(energy + 1, 0);
        }
        self.counts[energy] += count;
    }

    pub fn merge(&mut self, other: &EnergyHistogram) {
        for (k, &c) in other.counts.iter().enumerate() {
            if c > 0 {
                self.add(k, c);
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `log sum_k count(k) e^{-alpha k}`; `-inf` for an empty ensemble.
    pub fn log_z(&self, alpha: f64) -> f64 {
        log_sum_exp(
            self.counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (c as f64).ln() - alpha * k as f64),
        )
    }

    pub fn z(&self, alpha: f64) -> f64 {
        self.log_z(alpha).exp()
    }

    pub fn to_json_map(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k.to_string(), c))
            .collect()
    }

    pub fn partition_function(&self, alpha: f64) -> PartitionFunction {
        PartitionFunction {
            alpha,
            log_value: self.log_z(alpha),
            histogram: Some(self.clone()),
        }
    }
}

/// A partition function at a fixed `alpha`, with the histogram it came from when available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionFunction {
    pub alpha: f64,
    pub log_value: f64,
    pub histogram: Option<EnergyHistogram>,
}

impl PartitionFunction {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn at(&self, alpha: f64) -> Option<PartitionFunction> {
        self.histogram.as_ref().map(|h| h.partition_function(alpha))
    }
}

/// Exact law over an enumerated ensemble.
#[derive(Clone, Debug)]
pub struct ExactDistribution<T> {
    pub alpha: f64,
    pub support: Vec<T>,
    pub energies: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl<T> ExactDistribution<T> {
    pub fn from_support(alpha: f64, support: Vec<T>, energies: Vec<usize>) -> Self {
        let log_z = log_sum_exp(energies.iter().map(|&e| -alpha * e as f64));
        let probabilities = energies.iter().map(|&e| (-alpha * e as f64 - log_z).exp()).collect();
        ExactDistribution {
            alpha,
            support,
            energies,
            probabilities,
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.support.iter().zip(self.probabilities.iter().copied())
    }

    /// Expectation of `f` under the law.
    pub fn expect(&self, mut f: impl FnMut(&T) -> f64) -> f64 {
        self.iter().map(|(t, p)| p * f(t)).sum()
    }

    /// Probability of an event.
    pub fn prob(&self, mut event: impl FnMut(&T) -> bool) -> f64 {
        self.iter().filter(|(t, _)| event(t)).map(|(_, p)| p).sum()
    }
}

/// A generic injective assignment problem: each mover gets a target from its
/// candidate list, all targets distinct; the set of targets equals the set of
/// movers in size, so injectivity forces every target to be hit.
struct Assignment {
    base: Vec<usize>,
    movers: Vec<usize>,
    candidates: Vec<Vec<usize>>,
    /// `deadline[i]`: targets whose last possible preimage is mover `i`.
    deadline: Vec<Vec<usize>>,
    feasible: bool,
}

impl Assignment {
    fn new(base: Vec<usize>, movers: Vec<usize>, candidates: Vec<Vec<usize>>, targets: &[usize]) -> Self {
        let n = base.len();
        let mut last = vec![usize::MAX; n];
        for (i, cands) in candidates.iter().enumerate() {
            for &t in cands {
                last[t] = i;
            }
        }
        let mut deadline = vec![Vec::new(); movers.len()];
        let mut feasible = targets.len() == movers.len();
        for &t in targets {
            match last[t] {
                usize::MAX => feasible = false,
                i => deadline[i].push(t),
            }
        }
        Assignment {
            base,
            movers,
            candidates,
            deadline,
            feasible,
        }
    }

    fn closed(g: &Graph) -> Self {
        let n = g.vertex_count();
        let movers: Vec<usize> = (0..n).collect();
        let candidates = movers
            .iter()
            .map(|&x| {
                let mut c = vec![x];
                c.extend_from_slice(g.neighbors(x));
                c.sort_unstable();
                c
            })
            .collect();
        Assignment::new((0..n).collect(), movers.clone(), candidates, &movers)
    }

    fn open(g: &Graph, domain: &VertexSet, source: usize, sink: usize) -> Self {
        let n = g.vertex_count();
        let movers: Vec<usize> = domain.iter().filter(|&x| x != sink).collect();
        let targets: Vec<usize> = domain.iter().filter(|&x| x != source).collect();
        let candidates = movers
            .iter()
            .map(|&x| {
                let mut c: Vec<usize> = std::iter::once(x)
                    .chain(g.neighbors(x).iter().copied())
                    .filter(|&y| domain.contains(y) && y != source)
                    .collect();
                c.sort_unstable();
                c
            })
            .collect();
        Assignment::new((0..n).collect(), movers, candidates, &targets)
    }

    fn first_choices(&self) -> Vec<usize> {
        self.candidates.first().cloned().unwrap_or_default()
    }

    /// Runs the DFS; `first` restricts the first mover's choice (for parallel partitioning).
    fn run(&self, cap: u64, first: Option<usize>, visit: &mut dyn FnMut(&[usize])) -> Result<u64> {
        if !self.feasible {
            return Ok(0);
        }
        let mut image = self.base.clone();
        let mut used = vec![false; image.len()];
        let mut nodes = 0u64;
        self.step(0, first, &mut image, &mut used, &mut nodes, cap, visit)?;
        Ok(nodes)
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        i: usize,
        first: Option<usize>,
        image: &mut Vec<usize>,
        used: &mut Vec<bool>,
        nodes: &mut u64,
        cap: u64,
        visit: &mut dyn FnMut(&[usize]),
    ) -> Result<()> {
        if i == self.movers.len() {
            visit(image);
            return Ok(());
        }
        let x = self.movers[i];
        for &t in &self.candidates[i] {
            if used[t] || (i == 0 && first.is_some_and(|f| f != t)) {
                continue;
            }
            *nodes += 1;
            if *nodes > cap {
                return Err(SrpError::capacity("enumeration nodes", *nodes, cap));
            }
            used[t] = true;
            image[x] = t;
            if self.deadline[i].iter().all(|&y| used[y]) {
                self.step(i + 1, None, image, used, nodes, cap, visit)?;
            }
            used[t] = false;
            image[x] = self.base[x];
        }
        Ok(())
    }
}

/// Visits every permutation in `S_V` once, in lexicographic order of image arrays.
pub fn for_each_closed(g: &Graph, cap: u64, mut visit: impl FnMut(&[usize])) -> Result<u64> {
    Assignment::closed(g).run(cap, None, &mut visit)
}

pub fn enumerate_closed_vec(g: &Graph) -> Result<Vec<GraphPermutation>> {
    let mut out = Vec::new();
    for_each_closed(g, DEFAULT_NODE_CAP, |img| {
        out.push(GraphPermutation::from_image_unchecked(img.to_vec()))
    })?;
    Ok(out)
}

/// Energy histogram of the closed ensemble, split across the first vertex's choices in parallel.
pub fn closed_histogram(g: &Graph, cap: u64) -> Result<EnergyHistogram> {
    if g.vertex_count() == 0 {
        let mut h = EnergyHistogram::default();
        h.add(0, 1);
        return Ok(h);
    }
    let problem = Assignment::closed(g);
    let parts: Vec<Result<EnergyHistogram>> = problem
        .first_choices()
        .into_par_iter()
        .map(|c| {
            let mut h = EnergyHistogram::default();
            problem.run(cap, Some(c), &mut |img| {
                h.add(img.iter().enumerate().filter(|&(x, &y)| x != y).count(), 1)
            })?;
            Ok(h)
        })
        .collect();
    let mut total = EnergyHistogram::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

pub fn partition_closed(g: &Graph, alpha: f64) -> Result<PartitionFunction> {
    Ok(closed_histogram(g, DEFAULT_NODE_CAP)?.partition_function(alpha))
}

pub fn closed_distribution(g: &Graph, alpha: f64) -> Result<ExactDistribution<GraphPermutation>> {
    let support = enumerate_closed_vec(g)?;
    let energies = support.iter().map(GraphPermutation::energy).collect();
    Ok(ExactDistribution::from_support(alpha, support, energies))
}

/// Sink of the open model: a single vertex or a set such as a hyperplane.
#[derive(Clone, Debug, PartialEq)]
pub enum Sink {
    Vertex(usize),
    Set(VertexSet),
}

/// Visits every configuration of `S_A^{a->z}`, or of the union over sinks
/// `z` in a set of `S_{A ∪ {z}}^{a->z}` (sinks equal to `a` are skipped).
pub fn for_each_open(
    g: &Graph,
    domain: &VertexSet,
    source: usize,
    sink: &Sink,
    cap: u64,
    mut visit: impl FnMut(&OpenCycleConfig),
) -> Result<u64> {
    if !domain.contains(source) {
        return Err(SrpError::Argument(format!("source {source} outside the domain")));
    }
    let sinks: Vec<usize> = match sink {
        Sink::Vertex(z) => {
            if *z == source {
                return Err(SrpError::Argument("source and sink coincide".into()));
            }
            if !domain.contains(*z) {
                return Err(SrpError::Argument(format!("sink {z} outside the domain")));
            }
            vec![*z]
        }
        Sink::Set(set) => set.iter().filter(|&z| z != source).collect(),
    };
    let mut nodes = 0u64;
    for z in sinks {
        let mut dom = domain.clone();
        dom.insert(z);
        let problem = Assignment::open(g, &dom, source, z);
        nodes += problem.run(cap.saturating_sub(nodes), None, &mut |img| {
            visit(&OpenCycleConfig::from_parts_unchecked(
                img.to_vec(),
                dom.clone(),
                source,
                z,
            ))
        })?;
    }
    Ok(nodes)
}

pub fn enumerate_open(g: &Graph, domain: &VertexSet, source: usize, sink: &Sink) -> Result<Vec<OpenCycleConfig>> {
    let mut out = Vec::new();
    for_each_open(g, domain, source, sink, DEFAULT_NODE_CAP, |c| out.push(c.clone()))?;
    Ok(out)
}

pub fn open_histogram(g: &Graph, domain: &VertexSet, source: usize, sink: &Sink) -> Result<EnergyHistogram> {
    let mut h = EnergyHistogram::default();
    for_each_open(g, domain, source, sink, DEFAULT_NODE_CAP, |c| h.add(c.open_energy(), 1))?;
    Ok(h)
}

/// `Z^{a->z}(A)` or `Z^{a->set}(A)`; the log value is `-inf` for an empty ensemble.
pub fn partition_open(
    g: &Graph,
    domain: &VertexSet,
    source: usize,
    sink: &Sink,
    alpha: f64,
) -> Result<PartitionFunction> {
    Ok(open_histogram(g, domain, source, sink)?.partition_function(alpha))
}

pub fn open_distribution(
    g: &Graph,
    domain: &VertexSet,
    source: usize,
    sink: &Sink,
    alpha: f64,
) -> Result<ExactDistribution<OpenCycleConfig>> {
    let support = enumerate_open(g, domain, source, sink)?;
    if support.is_empty() {
        return Err(SrpError::Argument(
            "sink unreachable from source: empty ensemble".into(),
        ));
    }
    let energies = support.iter().map(OpenCycleConfig::open_energy).collect();
    Ok(ExactDistribution::from_support(alpha, support, energies))
}

/// Joint counts of (cycle length through `z`, energy) over `S_V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleLengthTable {
    pub vertex_count: usize,
    /// `counts[len][energy]`, where `len` is the edge length of the cycle through `z`.
    pub counts: Vec<Vec<u64>>,
}

impl CycleLengthTable {
    pub fn build(g: &Graph, z: usize) -> Result<Self> {
        let n = g.vertex_count();
        let mut counts = vec![vec![0u64; n + 1]; n + 1];
        for_each_closed(g, DEFAULT_NODE_CAP, |img| {
            // a cycle with k >= 2 vertices has k edges; a fixed point has none
            let mut len = 0;
            let mut x = img[z];
            if x != z {
                len = 1;
                while x != z {
                    len += 1;
                    x = img[x];
                }
            }
            let e = img.iter().enumerate().filter(|&(a, &b)| a != b).count();
            counts[len][e] += 1;
        })?;
        Ok(CycleLengthTable {
            vertex_count: n,
            counts,
        })
    }

    /// Probability that the cycle through `z` has edge length exactly `len`.
    pub fn length_law(&self, alpha: f64) -> Vec<f64> {
        let mut all = EnergyHistogram::default();
        for row in &self.counts {
            for (e, &c) in row.iter().enumerate() {
                all.add(e, c);
            }
        }
        let log_z = all.log_z(alpha);
        self.counts
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(e, &c)| (c as f64).ln() - alpha * e as f64 - log_z)
                    .map(f64::exp)
                    .sum()
            })
            .collect()
    }

    /// `tail[l] = P(||gamma_z|| > l)` for `l = 0..=|V|`.
    pub fn tail(&self, alpha: f64) -> Vec<f64> {
        let law = self.length_law(alpha);
        (0..=self.vertex_count)
            .map(|l| law.iter().skip(l + 1).sum::<f64>())
            .collect()
    }

    /// `P(|gamma_z| >= l)` in vertex count (a fixed point has one vertex), `l = 0..=|V|+1`.
    pub fn vertex_tail(&self, alpha: f64) -> Vec<f64> {
        let law = self.length_law(alpha);
        let mut by_vertices = vec![0.0; self.vertex_count + 2];
        for (len, p) in law.iter().enumerate() {
            by_vertices[len.max(1)] += p;
        }
        (0..by_vertices.len())
            .map(|l| by_vertices.iter().skip(l).sum::<f64>())
            .collect()
    }
}

/// Exact `P_V(||gamma_z|| > l)` for `l = 0..=|V|`.
pub fn cycle_tail(g: &Graph, z: usize, alpha: f64) -> Result<Vec<f64>> {
    Ok(CycleLengthTable::build(g, z)?.tail(alpha))
}

/// Memoized energy histograms of `S_U` for subsets `U` given as bitmasks,
/// computed by an independent cycle-cover recursion: the smallest vertex of
/// `U` is either fixed or lies on a directed cycle inside `U`.
pub struct SubsetPartitions<'g> {
    g: &'g Graph,
    neighbor_masks: Vec<u64>,
    memo: HashMap<u64, EnergyHistogram>,
}

impl<'g> SubsetPartitions<'g> {
    pub fn new(g: &'g Graph) -> Result<Self> {
        if g.vertex_count() > 64 {
            return Err(SrpError::capacity("subset table vertices", g.vertex_count() as u64, 64));
        }
        let neighbor_masks = (0..g.vertex_count())
            .map(|v| g.neighbors(v).iter().fold(0u64, |m, &w| m | (1 << w)))
            .collect();
        Ok(SubsetPartitions {
            g,
            neighbor_masks,
            memo: HashMap::new(),
        })
    }

    pub fn graph(&self) -> &Graph {
        self.g
    }

    pub fn full_mask(&self) -> u64 {
        match self.g.vertex_count() {
            64 => u64::MAX,
            n => (1u64 << n) - 1,
        }
    }

    pub fn histogram(&mut self, mask: u64) -> EnergyHistogram {
        if let Some(h) = self.memo.get(&mask) {
            return h.clone();
        }
        let mut h = EnergyHistogram::default();
        if mask == 0 {
            h.add(0, 1);
        } else {
            let v = mask.trailing_zeros() as usize;
            h.merge(&self.histogram(mask & !(1 << v)));
            let mut found = Vec::new();
            self.cycles_from(v, v, 1 << v, 1, mask, &mut found);
            for (used, len) in found {
                let rest = self.histogram(mask & !used);
                for (e, &c) in rest.counts.iter().enumerate() {
                    if c > 0 {
                        h.add(e + len, c);
                    }
                }
            }
        }
        self.memo.insert(mask, h.clone());
        h
    }

    fn cycles_from(&self, root: usize, cur: usize, used: u64, k: usize, mask: u64, out: &mut Vec<(u64, usize)>) {
        let mut next = self.neighbor_masks[cur] & mask & !used;
        while next != 0 {
            let w = next.trailing_zeros() as usize;
            next &= next - 1;
            let used_w = used | (1 << w);
            if self.neighbor_masks[w] & (1 << root) != 0 {
                out.push((used_w, k + 1));
            }
            self.cycles_from(root, w, used_w, k + 1, mask, out);
        }
    }

    pub fn log_z(&mut self, mask: u64, alpha: f64) -> f64 {
        self.histogram(mask).log_z(alpha)
    }

    pub fn z(&mut self, mask: u64, alpha: f64) -> f64 {
        self.log_z(mask, alpha).exp()
    }

    pub fn z_set(&mut self, set: &VertexSet, alpha: f64) -> f64 {
        self.z(set.to_mask(), alpha)
    }
}

/// Directed cycles through `x` inside the vertex mask `within`, as
/// `(vertex mask, vertex count)`. Two-cycles are included; a cycle on three or
/// more vertices appears once per orientation, matching permutation cycles.
pub fn rooted_cycles(g: &Graph, x: usize, within: u64) -> Result<Vec<(u64, usize)>> {
    if g.vertex_count() > 64 {
        return Err(SrpError::capacity("rooted cycle vertices", g.vertex_count() as u64, 64));
    }
    let mut out = Vec::new();
    if within & (1 << x) == 0 {
        return Ok(out);
    }
    fn rec(g: &Graph, root: usize, cur: usize, used: u64, k: usize, within: u64, out: &mut Vec<(u64, usize)>) {
        for &w in g.neighbors(cur) {
            if within & (1 << w) == 0 || used & (1 << w) != 0 {
                continue;
            }
            let used_w = used | (1 << w);
            if g.has_edge(w, root) {
                out.push((used_w, k + 1));
            }
            rec(g, root, w, used_w, k + 1, within, out);
        }
    }
    rec(g, x, x, 1 << x, 1, within, &mut out);
    Ok(out)
}

/// Counts `S_V` by the cycle-cover recursion (independent of the DFS enumerator).
pub fn count_closed_by_cycle_cover(g: &Graph) -> Result<u64> {
    let mut t = SubsetPartitions::new(g)?;
    let full = t.full_mask();
    Ok(t.histogram(full).total())
}

/// Self-avoiding walk and polygon counts rooted at an origin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SawCensus {
    pub origin: usize,
    /// `saw[n]`: walks with `n` edges starting at the origin.
    pub saw: Vec<u64>,
    /// `sap[n]`: directed cycles with `n` edges through the origin, rooted there.
    pub sap: Vec<u64>,
    pub include_two_cycles: bool,
}

/// Default DFS node budget for SAW censuses.
pub const DEFAULT_SAW_BUDGET: u64 = 2_000_000_000;

/// Backtracking census of walks and polygons up to `n_max` edges.
pub fn saw_census(g: &Graph, origin: usize, n_max: usize, include_two_cycles: bool, budget: u64) -> Result<SawCensus> {
    if origin >= g.vertex_count() {
        return Err(SrpError::Argument(format!("origin {origin} out of range")));
    }
    let mut saw = vec![0u64; n_max + 1];
    let mut sap = vec![0u64; n_max + 1];
    saw[0] = 1;
    sap[0] = 1;
    let mut on_path = vec![false; g.vertex_count()];
    on_path[origin] = true;
    let mut nodes = 0u64;
    fn dfs(
        g: &Graph,
        origin: usize,
        cur: usize,
        depth: usize,
        n_max: usize,
        on_path: &mut [bool],
        saw: &mut [u64],
        sap: &mut [u64],
        nodes: &mut u64,
        budget: u64,
    ) -> Result<()> {
        if depth == n_max {
            return Ok(());
        }
        for &w in g.neighbors(cur) {
            if on_path[w] {
                continue;
            }
            *nodes += 1;
            if *nodes > budget {
                return Err(SrpError::capacity("walk census nodes", *nodes, budget));
            }
            saw[depth + 1] += 1;
            // closing edge back to the origin gives a polygon with depth + 2 edges
            if depth + 1 >= 2 && depth + 2 <= n_max && g.has_edge(w, origin) {
                sap[depth + 2] += 1;
            }
            on_path[w] = true;
            dfs(g, origin, w, depth + 1, n_max, on_path, saw, sap, nodes, budget)?;
            on_path[w] = false;
        }
        Ok(())
    }
    dfs(
        g,
        origin,
        origin,
        0,
        n_max,
        &mut on_path,
        &mut saw,
        &mut sap,
        &mut nodes,
        budget,
    )?;
    if include_two_cycles && n_max >= 2 {
        sap[2] = g.degree(origin) as u64;
    }
    Ok(SawCensus {
        origin,
        saw,
        sap,
        include_two_cycles,
    })
}

impl SawCensus {
    pub fn max_len(&self) -> usize {
        self.saw.len() - 1
    }
}

/// `n`-th roots of the census counts for `n >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectiveEstimate {
    pub saw_roots: Vec<f64>,
    pub sap_roots: Vec<f64>,
}

pub fn connective_estimate(census: &SawCensus) -> ConnectiveEstimate {
    let root = |c: u64, n: usize| (c as f64).powf(1.0 / n as f64);
    ConnectiveEstimate {
        saw_roots: (1..census.saw.len()).map(|n| root(census.saw[n], n)).collect(),
        sap_roots: (1..census.sap.len()).map(|n| root(census.sap[n], n)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CylinderLattice;

    fn permanent_of_identity_plus_adjacency(g: &Graph) -> u64 {
        // Ryser's formula for perm(I + A)
        let n = g.vertex_count();
        let m = |i: usize, j: usize| i64::from(i == j || g.has_edge(i, j));
        let mut total: i64 = 0;
        for s in 1u64..(1 << n) {
            let mut prod: i64 = 1;
            for i in 0..n {
                let row: i64 = (0..n).filter(|&j| s & (1 << j) != 0).map(|j| m(i, j)).sum();
                prod *= row;
            }
            let sign = if (n - s.count_ones() as usize) % 2 == 0 { 1 } else { -1 };
            total += sign * prod;
        }
        total as u64
    }

    #[test]
    fn small_counts() {
        let count = |g: &Graph| enumerate_closed_vec(g).unwrap().len();
        assert_eq!(count(&Graph::complete(2)), 2);
        assert_eq!(count(&Graph::path(3)), 3);
        assert_eq!(count(&Graph::grid(2, 2)), 9);
    }

    #[test]
    fn grid_2x2_histogram() {
        let h = closed_histogram(&Graph::grid(2, 2), DEFAULT_NODE_CAP).unwrap();
        assert_eq!(h.counts, vec![1, 0, 4, 0, 4]);
    }

    #[test]
    fn partition_function_values() {
        for alpha in [0.3, 1.0, 2.5] {
            let e = |k: f64| (-alpha * k).exp();
            let z = |g: &Graph| partition_closed(g, alpha).unwrap().value();
            assert!(close(z(&Graph::complete(2)), 1.0 + e(2.0), 1e-12));
            assert!(close(z(&Graph::path(3)), 1.0 + 2.0 * e(2.0), 1e-12));
            assert!(close(z(&Graph::grid(2, 2)), 1.0 + 4.0 * e(2.0) + 4.0 * e(4.0), 1e-12));
        }
    }

    #[test]
    fn three_oracles_agree() {
        let lat = CylinderLattice::rect(2, 3, 2, 1 << 10).unwrap();
        for g in [
            Graph::complete(2),
            Graph::path(4),
            Graph::grid(2, 3),
            Graph::grid(3, 3),
            Graph::cycle(5),
            Graph::complete(4),
            lat.graph().clone(),
        ] {
            let dfs = enumerate_closed_vec(&g).unwrap().len() as u64;
            assert_eq!(dfs, count_closed_by_cycle_cover(&g).unwrap());
            assert_eq!(dfs, permanent_of_identity_plus_adjacency(&g));
            let mut t = SubsetPartitions::new(&g).unwrap();
            let full = t.full_mask();
            assert_eq!(t.histogram(full), closed_histogram(&g, DEFAULT_NODE_CAP).unwrap());
        }
    }

    #[test]
    fn node_cap_is_enforced() {
        let err = closed_histogram(&Graph::grid(3, 3), 10).unwrap_err();
        assert!(err.is_capacity());
    }

    #[test]
    fn open_on_k2() {
        let g = Graph::complete(2);
        let all = VertexSet::full(2);
        let configs = enumerate_open(&g, &all, 0, &Sink::Vertex(1)).unwrap();
        assert_eq!(configs.len(), 1);
        assert_eq!(configs[0].open_energy(), 1);
        let z = partition_open(&g, &all, 0, &Sink::Vertex(1), 0.7).unwrap();
        assert!(close(z.value(), (-0.7f64).exp(), 1e-12));
        assert!(enumerate_open(&g, &all, 0, &Sink::Vertex(0)).is_err());
    }

    #[test]
    fn open_disconnected_is_empty() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let all = VertexSet::full(3);
        assert!(enumerate_open(&g, &all, 0, &Sink::Vertex(2)).unwrap().is_empty());
    }

    #[test]
    fn open_sink_set_sums_over_sinks() {
        for (len, width) in [(2, 1), (2, 2), (3, 2)] {
            let lat = CylinderLattice::rect(len, width, 2, 1 << 10).unwrap();
            let g = lat.graph();
            let a = lat.origin();
            let plane = lat.hyperplane(len);
            let domain = g.all_vertices().difference(&plane);
            let mut domain = domain;
            domain.insert(a);
            let total = enumerate_open(g, &domain, a, &Sink::Set(plane.clone())).unwrap().len();
            let per: usize = plane
                .iter()
                .map(|z| {
                    enumerate_open(
                        g,
                        &domain.union(&VertexSet::from_iter(g.vertex_count(), [z])),
                        a,
                        &Sink::Vertex(z),
                    )
                    .unwrap()
                    .len()
                })
                .sum();
            assert_eq!(total, per);
            assert!(total > 0);
            for alpha in [0.5, 2.0] {
                let zset = partition_open(g, &domain, a, &Sink::Set(plane.clone()), alpha)
                    .unwrap()
                    .value();
                let zsum: f64 = plane
                    .iter()
                    .map(|z| {
                        let d = domain.union(&VertexSet::from_iter(g.vertex_count(), [z]));
                        partition_open(g, &d, a, &Sink::Vertex(z), alpha).unwrap().value()
                    })
                    .sum();
                assert!(close(zset, zsum, 1e-12));
            }
        }
    }

    #[test]
    fn open_configs_are_valid_and_flatten_consistently() {
        let lat = CylinderLattice::rect(2, 2, 2, 1 << 10).unwrap();
        let g = lat.graph();
        let all = g.all_vertices();
        let plane = lat.hyperplane(2);
        let configs = enumerate_open(g, &all, lat.origin(), &Sink::Set(plane)).unwrap();
        let mut with_background_cycle = 0;
        for c in &configs {
            let again = OpenCycleConfig::new(g, c.domain().clone(), c.source(), c.sink(), c.images().to_vec()).unwrap();
            assert_eq!(&again, c);
            let w = c.walk_of().unwrap();
            w.validate(g).unwrap();
            let flat = c.flatten_walk();
            GraphPermutation::new(g, flat.images().to_vec()).unwrap();
            assert_eq!(flat.energy(), c.open_energy() - w.length());
            if flat.energy() > 0 {
                with_background_cycle += 1;
            }
        }
        assert!(with_background_cycle > 0);
    }

    #[test]
    fn cycle_tail_on_square() {
        let g = Graph::grid(2, 2);
        for alpha in [0.5, 1.0, 2.0] {
            let tail = cycle_tail(&g, 0, alpha).unwrap();
            let z = 1.0 + 4.0 * (-2.0 * alpha).exp() + 4.0 * (-4.0 * alpha).exp();
            assert!(close(tail[3], 2.0 * (-4.0 * alpha).exp() / z, 1e-12));
            assert_eq!(tail[4], 0.0);
            // z is displaced by two single swaps, one double swap each, and both 4-cycles
            let moved = 2.0 * (-2.0 * alpha).exp() + 2.0 * (-4.0 * alpha).exp() + 2.0 * (-4.0 * alpha).exp();
            assert!(close(tail[0], moved / z, 1e-12));
            assert!(tail.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn census_on_square_lattice_patch() {
        let (g, o) = Graph::square_patch(6);
        let c = saw_census(&g, o, 6, true, DEFAULT_SAW_BUDGET).unwrap();
        assert_eq!(&c.saw[..5], &[1, 4, 12, 36, 100]);
        assert_eq!(c.sap[1], 0);
        assert_eq!(c.sap[2], 4);
        assert_eq!(c.sap[3], 0);
        // 8 directed unit squares through the origin (4 squares x 2 orientations)
        assert_eq!(c.sap[4], 8);
        for n in 0..=6 {
            assert!(c.sap[n] <= c.saw[n]);
        }
        let est = connective_estimate(&c);
        assert!(est.saw_roots.windows(2).all(|w| w[0] >= w[1]));
        for (s, p) in est.saw_roots.iter().zip(&est.sap_roots) {
            assert!(p <= s);
        }
        let no2 = saw_census(&g, o, 6, false, DEFAULT_SAW_BUDGET).unwrap();
        assert_eq!(no2.sap[2], 0);
    }

    #[test]
    fn census_budget() {
        let (g, o) = Graph::square_patch(4);
        assert!(saw_census(&g, o, 8, true, 100).unwrap_err().is_capacity());
    }

    #[test]
    fn constant_census_roots() {
        let c = SawCensus {
            origin: 0,
            saw: vec![1; 5],
            sap: vec![1; 5],
            include_two_cycles: true,
        };
        let est = connective_estimate(&c);
        assert!(est.saw_roots.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn distribution_normalizes() {
        let d = closed_distribution(&Graph::grid(2, 3), 0.8).unwrap();
        assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
