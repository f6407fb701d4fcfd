//! Local Metropolis dynamics.
//!
//! A proposal picks a window `W` (a small vertex set) uniformly from a fixed
//! list, keeps the image set `pi(W)` and reassigns it among the vertices of
//! `W` uniformly over all other valid reassignments. The proposal is
//! symmetric, so the Metropolis filter `min(1, e^{-alpha dH})` gives detailed
//! balance. With edge windows only this is the plain arrow swap.
//!
//! Local windows cannot create or remove a cycle that winds once around a
//! transverse ring longer than four, so cylinder dynamics add ring windows
//! that exchange the identity on a ring with its two rotations.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrpError};
use crate::lattice::{CylinderLattice, Graph, VertexSet};

use super::RngStream;

/// Which windows the dynamics may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MoveSet {
    /// Edges only: swap the images of the two endpoints.
    ArrowSwap,
    /// Edges, three-vertex paths and four-cycles.
    #[default]
    Windowed,
}

/// Per-vertex constraints and energy contributions of a model.
pub trait LocalRules: Sync {
    /// Whether vertex `x` may map to `t`.
    fn allowed(&self, x: usize, t: usize) -> bool;
    /// Energy contribution of the arrow `x -> t`.
    fn cost(&self, x: usize, t: usize) -> u32;
}

/// Closed model: fixed or nearest-neighbour steps, cost 1 per displaced point.
pub struct ClosedRules<'g> {
    pub graph: &'g Graph,
}

impl LocalRules for ClosedRules<'_> {
    fn allowed(&self, x: usize, t: usize) -> bool {
        self.graph.is_step(x, t)
    }

    fn cost(&self, x: usize, t: usize) -> u32 {
        u32::from(x != t)
    }
}

/// Open model in augmented form: the active sink carries a zero-cost virtual
/// arrow back to the source, which turns the configuration into a bijection
/// of `A ∪ sinks`. Sinks outside `A` are inert unless active.
pub struct OpenRules<'g> {
    pub graph: &'g Graph,
    pub domain: VertexSet,
    pub in_a: VertexSet,
    pub sinks: VertexSet,
    pub source: usize,
}

impl<'g> OpenRules<'g> {
    pub fn new(graph: &'g Graph, a_set: &VertexSet, source: usize, sinks: &VertexSet) -> Result<Self> {
        if !a_set.contains(source) {
            return Err(SrpError::Argument("source outside the domain".into()));
        }
        let mut sinks = sinks.clone();
        sinks.remove(source);
        if sinks.is_empty() {
            return Err(SrpError::Argument("no sink distinct from the source".into()));
        }
        Ok(OpenRules {
            graph,
            domain: a_set.union(&sinks),
            in_a: a_set.clone(),
            sinks,
            source,
        })
    }
}

impl LocalRules for OpenRules<'_> {
    fn allowed(&self, x: usize, t: usize) -> bool {
        if !self.domain.contains(x) || !self.domain.contains(t) {
            return x == t;
        }
        if t == self.source {
            return self.sinks.contains(x);
        }
        if self.sinks.contains(x) && !self.in_a.contains(x) {
            return t == x;
        }
        self.graph.is_step(x, t)
    }

    fn cost(&self, x: usize, t: usize) -> u32 {
        u32::from(x != t && t != self.source)
    }
}

/// A proposal window.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Window {
    /// Any valid reassignment of the window's image set.
    Local(Vec<usize>),
    /// A ring listed in cyclic order; only the identity and the two rotations
    /// of the ring are interchanged.
    Ring(Vec<usize>),
}

impl Window {
    pub fn vertices(&self) -> &[usize] {
        match self {
            Window::Local(v) | Window::Ring(v) => v,
        }
    }
}

/// Local windows of the given move set inside `domain`, deduplicated by vertex set.
pub fn graph_windows(g: &Graph, domain: &VertexSet, move_set: MoveSet) -> Vec<Window> {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    let mut push = |mut w: Vec<usize>| {
        w.sort_unstable();
        if seen.insert(w.clone()) {
            out.push(Window::Local(w));
        }
    };
    for (u, v) in g.edges() {
        if domain.contains(u) && domain.contains(v) {
            push(vec![u, v]);
        }
    }
    if move_set == MoveSet::Windowed {
        for y in domain.iter() {
            let nb: Vec<usize> = g.neighbors(y).iter().copied().filter(|&v| domain.contains(v)).collect();
            for i in 0..nb.len() {
                for j in i + 1..nb.len() {
                    push(vec![nb[i], y, nb[j]]);
                    // four-cycles through y, nb[i], w, nb[j]
                    for &w in g.neighbors(nb[i]) {
                        if w != y && domain.contains(w) && g.has_edge(w, nb[j]) {
                            push(vec![y, nb[i], w, nb[j]]);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Local windows plus, when the period exceeds four, every transverse ring
/// inside `domain` (cycles winding once around a transverse coordinate).
pub fn cylinder_windows(lat: &CylinderLattice, domain: &VertexSet, move_set: MoveSet) -> Vec<Window> {
    let mut out = graph_windows(lat.graph(), domain, move_set);
    if move_set == MoveSet::Windowed && lat.width() > 4 {
        for coord in 1..lat.dim() {
            for v in 0..lat.vertex_count() {
                if lat.coord(v)[coord] != lat.transverse_lo() {
                    continue;
                }
                let ring: Vec<usize> = (0..lat.width() as i64)
                    .map(|k| {
                        let mut c = lat.coord(v).to_vec();
                        c[coord] = lat.transverse_lo() + k;
                        lat.index_of(&c).expect("ring vertex")
                    })
                    .collect();
                if ring.iter().all(|&x| domain.contains(x)) {
                    out.push(Window::Ring(ring));
                }
            }
        }
    }
    out
}

/// Reassignments reachable from `targets` within one window, including `targets` itself.
pub fn window_options<R: LocalRules + ?Sized>(rules: &R, window: &Window, targets: &[usize]) -> Vec<Vec<usize>> {
    match window {
        Window::Local(w) => fiber(rules, w, targets),
        Window::Ring(ring) => {
            let k = ring.len();
            let patterns: Vec<Vec<usize>> = [0, 1, k - 1]
                .iter()
                .map(|&shift| (0..k).map(|i| ring[(i + shift) % k]).collect())
                .collect();
            if !patterns.iter().any(|p| p == targets) {
                return vec![targets.to_vec()];
            }
            patterns
                .into_iter()
                .filter(|p| ring.iter().zip(p).all(|(&x, &t)| rules.allowed(x, t)))
                .collect()
        }
    }
}

/// All bijections `window -> targets` (as target lists aligned with `window`) permitted by the rules.
pub fn fiber<R: LocalRules + ?Sized>(rules: &R, window: &[usize], targets: &[usize]) -> Vec<Vec<usize>> {
    fn rec<R: LocalRules + ?Sized>(
        rules: &R,
        window: &[usize],
        targets: &[usize],
        i: usize,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == window.len() {
            out.push(cur.clone());
            return;
        }
        for (j, &t) in targets.iter().enumerate() {
            if !used[j] && rules.allowed(window[i], t) {
                used[j] = true;
                cur.push(t);
                rec(rules, window, targets, i + 1, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut used = vec![false; targets.len()];
    rec(rules, window, targets, 0, &mut used, &mut Vec::new(), &mut out);
    out
}

fn window_cost<R: LocalRules + ?Sized>(rules: &R, window: &[usize], targets: &[usize]) -> i64 {
    window
        .iter()
        .zip(targets)
        .map(|(&x, &t)| i64::from(rules.cost(x, t)))
        .sum()
}

/// A Metropolis chain over image arrays.
pub struct WindowChain<'r, R: LocalRules> {
    rules: &'r R,
    windows: &'r [Window],
    image: Vec<usize>,
    alpha: f64,
    energy: i64,
    rng: RngStream,
    proposals: u64,
    accepted: u64,
}

impl<'r, R: LocalRules> WindowChain<'r, R> {
    pub fn new(rules: &'r R, windows: &'r [Window], image: Vec<usize>, alpha: f64, rng: RngStream) -> Self {
        let energy = image
            .iter()
            .enumerate()
            .map(|(x, &t)| i64::from(rules.cost(x, t)))
            .sum();
        WindowChain {
            rules,
            windows,
            image,
            alpha,
            energy,
            rng,
            proposals: 0,
            accepted: 0,
        }
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn energy(&self) -> u64 {
        self.energy as u64
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// One proposal; returns whether the state changed.
    pub fn step(&mut self) -> bool {
        self.proposals += 1;
        if self.windows.is_empty() {
            return false;
        }
        let window = &self.windows[self.rng.gen_range(0..self.windows.len())];
        let w = window.vertices();
        let targets: Vec<usize> = w.iter().map(|&x| self.image[x]).collect();
        let options = window_options(self.rules, window, &targets);
        if options.len() <= 1 {
            return false;
        }
        let current = options
            .iter()
            .position(|o| *o == targets)
            .expect("current state lies in its fiber");
        let mut pick = self.rng.gen_range(0..options.len() - 1);
        if pick >= current {
            pick += 1;
        }
        let proposal = &options[pick];
        let delta = window_cost(self.rules, w, proposal) - window_cost(self.rules, w, &targets);
        let accept = delta <= 0 || self.rng.gen::<f64>() < (-self.alpha * delta as f64).exp();
        if accept {
            for (&x, &t) in w.iter().zip(proposal) {
                self.image[x] = t;
            }
            self.energy += delta;
            self.accepted += 1;
        }
        accept
    }

    pub fn into_rng(self) -> RngStream {
        self.rng
    }

    pub fn run(&mut self, proposals: u64) {
        for _ in 0..proposals {
            self.step();
        }
    }
}

/// Transition probabilities out of `state` (excluding the holding probability).
pub fn kernel_row<R: LocalRules + ?Sized>(
    rules: &R,
    windows: &[Window],
    state: &[usize],
    alpha: f64,
) -> HashMap<Vec<usize>, f64> {
    let mut row: HashMap<Vec<usize>, f64> = HashMap::new();
    let pw = 1.0 / windows.len() as f64;
    for window in windows {
        let w = window.vertices();
        let targets: Vec<usize> = w.iter().map(|&x| state[x]).collect();
        let options = window_options(rules, window, &targets);
        if options.len() <= 1 {
            continue;
        }
        let base = window_cost(rules, w, &targets);
        for o in &options {
            if *o == targets {
                continue;
            }
            let delta = window_cost(rules, w, o) - base;
            let acc = if delta <= 0 { 1.0 } else { (-alpha * delta as f64).exp() };
            let mut next = state.to_vec();
            for (&x, &t) in w.iter().zip(o) {
                next[x] = t;
            }
            *row.entry(next).or_insert(0.0) += pw / (options.len() - 1) as f64 * acc;
        }
    }
    row
}

/// Outcome of a state-graph connectivity check.
#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicityCertificate {
    pub states: usize,
    pub reachable: usize,
    /// A state not reachable from the first state, when the check fails.
    pub counterexample: Option<(Vec<usize>, Vec<usize>)>,
    /// Every proposal leads to another state in the ensemble.
    pub closed_under_moves: bool,
}

impl ErgodicityCertificate {
    pub fn connected(&self) -> bool {
        self.closed_under_moves && self.reachable == self.states
    }
}

/// BFS over the proposal graph on an explicit state list. Proposals are
/// symmetric, so reachability from one state certifies strong connectivity.
pub fn check_connectivity<R: LocalRules + ?Sized>(
    rules: &R,
    windows: &[Window],
    states: &[Vec<usize>],
) -> ErgodicityCertificate {
    let index: HashMap<&Vec<usize>, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut seen = vec![false; states.len()];
    let mut closed = true;
    let mut queue = VecDeque::new();
    if !states.is_empty() {
        seen[0] = true;
        queue.push_back(0);
    }
    while let Some(i) = queue.pop_front() {
        for next in kernel_row(rules, windows, &states[i], 1.0).into_keys() {
            match index.get(&next) {
                Some(&j) => {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
                None => closed = false,
            }
        }
    }
    let reachable = seen.iter().filter(|&&s| s).count();
    let counterexample = seen
        .iter()
        .position(|&s| !s)
        .map(|j| (states[0].clone(), states[j].clone()));
    ErgodicityCertificate {
        states: states.len(),
        reachable,
        counterexample,
        closed_under_moves: closed,
    }
}

/// Maps an open configuration's image array to its augmented bijection.
pub fn augment_open(image: &[usize], source: usize, sink: usize) -> Vec<usize> {
    let mut s = image.to_vec();
    s[sink] = source;
    s
}

/// Inverse of [`augment_open`]: returns (image, active sink).
pub fn reduce_open(augmented: &[usize], source: usize) -> (Vec<usize>, usize) {
    let sink = augmented
        .iter()
        .position(|&t| t == source)
        .expect("some vertex maps to the source");
    let mut image = augmented.to_vec();
    image[sink] = sink;
    (image, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CylinderLattice;
    use crate::samplers::{verify_ergodicity, verify_open_ergodicity, OpenProblem};

    #[test]
    fn arrow_swap_on_k2() {
        let g = Graph::complete(2);
        let rules = ClosedRules { graph: &g };
        let w = graph_windows(&g, &g.all_vertices(), MoveSet::ArrowSwap);
        assert_eq!(w, vec![Window::Local(vec![0, 1])]);
        let row = kernel_row(&rules, &w, &[0, 1], 1.3);
        assert!((row[&vec![1, 0]] - (-2.6f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn arrow_swap_is_not_ergodic_on_the_square() {
        let g = Graph::grid(2, 2);
        let cert = verify_ergodicity(&g, &graph_windows(&g, &g.all_vertices(), MoveSet::ArrowSwap)).unwrap();
        assert!(!cert.connected());
        assert!(cert.counterexample.is_some());
    }

    #[test]
    fn windowed_moves_are_ergodic_on_small_graphs() {
        for g in [
            Graph::complete(2),
            Graph::grid(2, 2),
            Graph::grid(2, 3),
            Graph::grid(3, 3),
        ] {
            let cert = verify_ergodicity(&g, &graph_windows(&g, &g.all_vertices(), MoveSet::Windowed)).unwrap();
            assert!(cert.connected(), "{cert:?}");
        }
        for (len, width) in [(2, 2), (2, 3), (1, 5), (1, 6)] {
            let lat = CylinderLattice::rect(len, width, 2, 1 << 10).unwrap();
            let w = cylinder_windows(&lat, &lat.graph().all_vertices(), MoveSet::Windowed);
            let cert = verify_ergodicity(lat.graph(), &w).unwrap();
            assert!(cert.connected(), "{len}x{width}: {cert:?}");
        }
    }

    #[test]
    fn winding_cycles_need_ring_windows() {
        let lat = CylinderLattice::rect(1, 5, 2, 1 << 10).unwrap();
        let g = lat.graph();
        let local = graph_windows(g, &g.all_vertices(), MoveSet::Windowed);
        assert!(!verify_ergodicity(g, &local).unwrap().connected());
    }

    #[test]
    fn open_moves_are_ergodic_on_small_cylinders() {
        for (len, width) in [(2, 2), (3, 2), (2, 3), (3, 3)] {
            let lat = CylinderLattice::rect(len, width, 2, 1 << 10).unwrap();
            let g = lat.graph();
            let problem = OpenProblem {
                domain: g.all_vertices(),
                source: lat.origin(),
                sinks: lat.hyperplane(len),
            };
            let w = cylinder_windows(&lat, &problem.domain, MoveSet::Windowed);
            let cert = verify_open_ergodicity(g, &problem, &w).unwrap();
            assert!(cert.connected(), "{len}x{width}: {cert:?}");
        }
    }
}
