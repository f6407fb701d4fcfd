//! Keep-set strategies and the recursive cycle-by-cycle sampling procedure.
//!
//! Each round draws `sigma_B` on the remaining set `B`, keeps the cycles
//! meeting the chosen keep set `K`, and removes them from `B`. Choosers see
//! only the past `(B, K, D)` triples and their own random stream.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Result, SrpError};
use crate::exact::{self, ExactDistribution};
use crate::lattice::{Graph, SymmetryGroup, VertexSet};
use crate::perm::GraphPermutation;

use super::{subsample, RngStream, Subsampler};

/// Public part of one round: remaining set, keep set, kept cycles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub b: VertexSet,
    pub k: VertexSet,
    pub d: VertexSet,
    /// The chooser fell back to `K = B` (the procedure's last round).
    pub fallback: bool,
}

/// What a chooser may look at.
pub struct StrategyContext<'a> {
    pub graph: &'a Graph,
    pub remaining: &'a VertexSet,
    pub history: &'a [Round],
}

/// A keep set and whether it is the `K = B` fallback.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeepSet {
    pub set: VertexSet,
    pub fallback: bool,
}

impl KeepSet {
    fn all(b: &VertexSet) -> Self {
        KeepSet {
            set: b.clone(),
            fallback: true,
        }
    }

    fn some(set: VertexSet) -> Self {
        KeepSet { set, fallback: false }
    }
}

/// A keep-set chooser.
pub trait KeepSetChooser {
    fn name(&self) -> String;
    fn choose(&mut self, ctx: &StrategyContext<'_>, rng: &mut RngStream) -> KeepSet;
    /// Deterministic choosers ignore their random stream.
    fn is_deterministic(&self) -> bool {
        true
    }
}

/// `K = B` in one round.
pub struct WholeSet;

impl KeepSetChooser for WholeSet {
    fn name(&self) -> String {
        "whole-set".into()
    }

    fn choose(&mut self, ctx: &StrategyContext<'_>, _rng: &mut RngStream) -> KeepSet {
        KeepSet::all(ctx.remaining)
    }
}

/// `{x0}` first, then everything that is left.
pub struct FirstThenAll {
    pub x0: usize,
}

impl KeepSetChooser for FirstThenAll {
    fn name(&self) -> String {
        format!("first-then-all({})", self.x0)
    }

    fn choose(&mut self, ctx: &StrategyContext<'_>, _rng: &mut RngStream) -> KeepSet {
        if ctx.history.is_empty() && ctx.remaining.contains(self.x0) {
            KeepSet::some(VertexSet::from_iter(ctx.remaining.universe(), [self.x0]))
        } else {
            KeepSet::all(ctx.remaining)
        }
    }
}

/// The first listed vertex still in `B`; `K = B` once the list is exhausted.
pub struct FirstOfList {
    pub list: Vec<usize>,
}

impl FirstOfList {
    /// Singletons in canonical vertex order.
    pub fn all_vertices(n: usize) -> Self {
        FirstOfList { list: (0..n).collect() }
    }
}

impl KeepSetChooser for FirstOfList {
    fn name(&self) -> String {
        format!("first-of-list({:?})", self.list)
    }

    fn choose(&mut self, ctx: &StrategyContext<'_>, _rng: &mut RngStream) -> KeepSet {
        match self.list.iter().find(|&&x| ctx.remaining.contains(x)) {
            Some(&x) => KeepSet::some(VertexSet::from_iter(ctx.remaining.universe(), [x])),
            None => KeepSet::all(ctx.remaining),
        }
    }
}

/// `K_V = Phi(A)`, then `K_B = B ∩ Phi(B^c)` while nonempty, else `K_B = B`.
pub struct PhiCompatible {
    pub phi: SymmetryGroup,
    pub a: VertexSet,
}

impl KeepSetChooser for PhiCompatible {
    fn name(&self) -> String {
        format!("phi-compatible(|Phi|={}, A={:?})", self.phi.order(), self.a)
    }

    fn choose(&mut self, ctx: &StrategyContext<'_>, _rng: &mut RngStream) -> KeepSet {
        if ctx.history.is_empty() {
            let k = self.phi.symmetrize(&self.a).intersection(ctx.remaining);
            if k.is_empty() {
                return KeepSet::all(ctx.remaining);
            }
            return KeepSet::some(k);
        }
        let k = ctx
            .remaining
            .intersection(&self.phi.symmetrize(&ctx.remaining.complement()));
        if k.is_empty() {
            KeepSet::all(ctx.remaining)
        } else {
            KeepSet::some(k)
        }
    }
}

/// A uniformly random vertex of `B` each round.
pub struct RandomSingleton;

impl KeepSetChooser for RandomSingleton {
    fn name(&self) -> String {
        "random-singleton".into()
    }

    fn choose(&mut self, ctx: &StrategyContext<'_>, rng: &mut RngStream) -> KeepSet {
        let members = ctx.remaining.to_vec();
        let x = members[rng.gen_range(0..members.len())];
        KeepSet::some(VertexSet::from_iter(ctx.remaining.universe(), [x]))
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

/// One recorded round including the kept images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRound {
    pub round: Round,
    /// `(x, pi_i(x))` for `x` in `D_i`.
    pub images: Vec<(usize, usize)>,
}

/// Full record of one run of the procedure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingTrace {
    pub rounds: Vec<TraceRound>,
    pub assembled: GraphPermutation,
}

impl SamplingTrace {
    /// Checks that the `D_i` partition `V`, `B_{i+1} = B_i \ D_i`, `K_i ⊆ D_i` and that
    /// the assembled permutation agrees with each round on its block.
    pub fn check_partition(&self) -> Result<()> {
        let n = self.assembled.len();
        let mut covered = VertexSet::empty(n);
        let mut expected_b = VertexSet::full(n);
        for tr in &self.rounds {
            let r = &tr.round;
            if r.b != expected_b {
                return Err(SrpError::InvariantViolation("B_{i+1} != B_i \\ D_i".into()));
            }
            if !r.k.is_subset(&r.d) || !r.d.is_subset(&r.b) || !covered.is_disjoint(&r.d) {
                return Err(SrpError::InvariantViolation("round sets out of place".into()));
            }
            for &(x, y) in &tr.images {
                if !r.d.contains(y) || self.assembled.image(x) != y {
                    return Err(SrpError::InvariantViolation(format!("round image {x}->{y} not kept")));
                }
            }
            covered.union_with(&r.d);
            expected_b = expected_b.difference(&r.d);
        }
        if covered.len() != n {
            return Err(SrpError::InvariantViolation("rounds do not cover V".into()));
        }
        Ok(())
    }

    /// `hat A`: complement of the remaining set at the first fallback round, or `V` if none.
    pub fn phi_set(&self) -> VertexSet {
        let n = self.assembled.len();
        self.rounds
            .iter()
            .find(|tr| tr.round.fallback)
            .map(|tr| tr.round.b.complement())
            .unwrap_or_else(|| VertexSet::full(n))
    }

    /// Checks `|K_{i+1}| <= (|Phi| - 1) |D_i \ K_i|` for consecutive non-fallback rounds.
    pub fn round_growth_holds(&self, phi_order: usize) -> bool {
        self.rounds.windows(2).all(|w| {
            let (prev, next) = (&w[0].round, &w[1].round);
            next.fallback || next.k.len() <= (phi_order - 1) * prev.d.difference(&prev.k).len()
        })
    }

    /// Per-round sizes `|D_i \ K_i|` before the fallback round.
    pub fn overflow_sizes(&self) -> Vec<usize> {
        self.rounds
            .iter()
            .take_while(|tr| !tr.round.fallback)
            .map(|tr| tr.round.d.difference(&tr.round.k).len())
            .collect()
    }
}

fn checked_keep(ks: &KeepSet, b: &VertexSet) -> Result<()> {
    if ks.set.is_empty() {
        return Err(SrpError::StrategyContract("empty keep set on nonempty B".into()));
    }
    if !ks.set.is_subset(b) {
        return Err(SrpError::StrategyContract("keep set not contained in B".into()));
    }
    Ok(())
}

/// Runs the recursive sampling procedure. Permutation draws use `perm_rng`;
/// the chooser only ever sees `strategy_rng`.
pub fn run_sampling_procedure(
    g: &Graph,
    chooser: &mut dyn KeepSetChooser,
    alpha: f64,
    perm_rng: &mut RngStream,
    strategy_rng: &mut RngStream,
    subsampler: Subsampler,
) -> Result<SamplingTrace> {
    let n = g.vertex_count();
    let mut b = VertexSet::full(n);
    let mut history: Vec<Round> = Vec::new();
    let mut rounds = Vec::new();
    let mut pieces = Vec::new();
    let mut cache = HashMap::new();
    while !b.is_empty() {
        let ks = chooser.choose(
            &StrategyContext {
                graph: g,
                remaining: &b,
                history: &history,
            },
            strategy_rng,
        );
        checked_keep(&ks, &b)?;
        let sigma = subsample(g, &b, alpha, subsampler, perm_rng, &mut cache)?;
        let d = sigma.orbit(&ks.set);
        let round = Round {
            b: b.clone(),
            k: ks.set,
            d: d.clone(),
            fallback: ks.fallback,
        };
        rounds.push(TraceRound {
            round: round.clone(),
            images: d.iter().map(|x| (x, sigma.image(x))).collect(),
        });
        history.push(round);
        b = b.difference(&d);
        pieces.push((d, sigma));
    }
    let assembled = GraphPermutation::assemble(n, &pieces)?;
    Ok(SamplingTrace { rounds, assembled })
}

/// Samples `hat A` with the Phi-compatible strategy.
pub fn sample_phi_compatible_set(
    g: &Graph,
    phi: &SymmetryGroup,
    a: &VertexSet,
    alpha: f64,
    perm_rng: &mut RngStream,
    strategy_rng: &mut RngStream,
    subsampler: Subsampler,
) -> Result<(VertexSet, SamplingTrace)> {
    if a.is_empty() {
        return Err(SrpError::Argument("A must be nonempty".into()));
    }
    let mut chooser = PhiCompatible {
        phi: phi.clone(),
        a: a.clone(),
    };
    let trace = run_sampling_procedure(g, &mut chooser, alpha, perm_rng, strategy_rng, subsampler)?;
    Ok((trace.phi_set(), trace))
}

/// Cap on leaves of the exact outcome tree.
pub const DEFAULT_OUTCOME_CAP: u64 = 10_000_000;

/// Visits every outcome of the procedure under a deterministic chooser with
/// exact subsampling, with its probability: `(rounds, assembled, probability)`.
pub fn for_each_outcome(
    g: &Graph,
    chooser: &mut dyn KeepSetChooser,
    alpha: f64,
    visit: &mut dyn FnMut(&[Round], &GraphPermutation, f64),
) -> Result<u64> {
    if !chooser.is_deterministic() {
        return Err(SrpError::Argument(
            "exact outcome laws need a deterministic chooser".into(),
        ));
    }
    let n = g.vertex_count();
    let mut cache: HashMap<VertexSet, ExactDistribution<GraphPermutation>> = HashMap::new();
    let mut leaves = 0u64;
    let mut history = Vec::new();
    let mut partial = vec![usize::MAX; n];
    let mut dummy = RngStream::new(0, 0);
    #[allow(clippy::too_many_arguments)]
    fn rec(
        g: &Graph,
        chooser: &mut dyn KeepSetChooser,
        alpha: f64,
        b: VertexSet,
        prob: f64,
        history: &mut Vec<Round>,
        partial: &mut Vec<usize>,
        cache: &mut HashMap<VertexSet, ExactDistribution<GraphPermutation>>,
        leaves: &mut u64,
        dummy: &mut RngStream,
        visit: &mut dyn FnMut(&[Round], &GraphPermutation, f64),
    ) -> Result<()> {
        if b.is_empty() {
            *leaves += 1;
            if *leaves > DEFAULT_OUTCOME_CAP {
                return Err(SrpError::capacity("procedure outcomes", *leaves, DEFAULT_OUTCOME_CAP));
            }
            visit(history, &GraphPermutation::from_image_unchecked(partial.clone()), prob);
            return Ok(());
        }
        let ks = chooser.choose(
            &StrategyContext {
                graph: g,
                remaining: &b,
                history,
            },
            dummy,
        );
        checked_keep(&ks, &b)?;
        if !cache.contains_key(&b) {
            let (sub, _) = g.induced(&b);
            cache.insert(b.clone(), exact::closed_distribution(&sub, alpha)?);
        }
        let members = b.to_vec();
        // group sub-samples by the kept block and its images
        let mut grouped: HashMap<(VertexSet, Vec<(usize, usize)>), f64> = HashMap::new();
        for (local, p) in cache[&b].iter() {
            let sigma = GraphPermutation::embed(g.vertex_count(), &members, local);
            let d = sigma.orbit(&ks.set);
            let images: Vec<(usize, usize)> = d.iter().map(|x| (x, sigma.image(x))).collect();
            *grouped.entry((d, images)).or_insert(0.0) += p;
        }
        let mut outcomes: Vec<_> = grouped.into_iter().collect();
        outcomes.sort_by(|a, b| a.0.cmp(&b.0));
        for ((d, images), p) in outcomes {
            for &(x, y) in &images {
                partial[x] = y;
            }
            history.push(Round {
                b: b.clone(),
                k: ks.set.clone(),
                d: d.clone(),
                fallback: ks.fallback,
            });
            rec(
                g,
                chooser,
                alpha,
                b.difference(&d),
                prob * p,
                history,
                partial,
                cache,
                leaves,
                dummy,
                visit,
            )?;
            history.pop();
            for &(x, _) in &images {
                partial[x] = usize::MAX;
            }
        }
        Ok(())
    }
    rec(
        g,
        chooser,
        alpha,
        VertexSet::full(n),
        1.0,
        &mut history,
        &mut partial,
        &mut cache,
        &mut leaves,
        &mut dummy,
        visit,
    )?;
    Ok(leaves)
}

/// Exact law of the assembled permutation under a deterministic chooser.
pub fn assembled_law_exact(
    g: &Graph,
    chooser: &mut dyn KeepSetChooser,
    alpha: f64,
) -> Result<ExactDistribution<GraphPermutation>> {
    let mut law: HashMap<GraphPermutation, f64> = HashMap::new();
    for_each_outcome(g, chooser, alpha, &mut |_, p, w| {
        *law.entry(p.clone()).or_insert(0.0) += w
    })?;
    let mut support: Vec<(GraphPermutation, f64)> = law.into_iter().collect();
    support.sort_by(|a, b| a.0.cmp(&b.0));
    let energies = support.iter().map(|(p, _)| p.energy()).collect();
    let probabilities = support.iter().map(|(_, w)| *w).collect();
    Ok(ExactDistribution {
        alpha,
        support: support.into_iter().map(|(p, _)| p).collect(),
        energies,
        probabilities,
    })
}

/// Largest termwise gap between the assembled law and `P_V`.
pub fn assembled_law_defect(g: &Graph, chooser: &mut dyn KeepSetChooser, alpha: f64) -> Result<f64> {
    let assembled = assembled_law_exact(g, chooser, alpha)?;
    let target = exact::closed_distribution(g, alpha)?;
    let got: HashMap<&GraphPermutation, f64> = assembled.iter().collect();
    let mut worst = 0.0f64;
    for (p, w) in target.iter() {
        worst = worst.max((got.get(p).copied().unwrap_or(0.0) - w).abs());
    }
    let target_support: std::collections::HashSet<&GraphPermutation> = target.support.iter().collect();
    for (p, w) in assembled.iter() {
        if !target_support.contains(p) {
            worst = worst.max(w);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::doubled_graph;

    fn grid_reflection() -> SymmetryGroup {
        SymmetryGroup::generate(&Graph::grid(2, 2), &[vec![1, 0, 3, 2]]).unwrap()
    }

    #[test]
    fn whole_set_is_one_round() {
        let g = Graph::grid(2, 2);
        let mut r1 = RngStream::new(3, 0);
        let mut r2 = RngStream::new(3, 1);
        let t = run_sampling_procedure(&g, &mut WholeSet, 1.0, &mut r1, &mut r2, Subsampler::Exact).unwrap();
        assert_eq!(t.rounds.len(), 1);
        t.check_partition().unwrap();
    }

    #[test]
    fn first_then_all_keeps_the_cycle_of_x0() {
        let g = Graph::grid(2, 2);
        for seed in 0..20 {
            let mut r1 = RngStream::new(seed, 0);
            let mut r2 = RngStream::new(seed, 1);
            let t = run_sampling_procedure(
                &g,
                &mut FirstThenAll { x0: 0 },
                0.5,
                &mut r1,
                &mut r2,
                Subsampler::Exact,
            )
            .unwrap();
            t.check_partition().unwrap();
            assert!(t.rounds.len() <= 2);
            let d1 = &t.rounds[0].round.d;
            assert!(d1.contains(0));
            assert_eq!(*d1, t.assembled.orbit(&VertexSet::from_iter(4, [0])));
        }
    }

    #[test]
    fn assembled_law_matches_target() {
        let cases: Vec<(Graph, Box<dyn KeepSetChooser>)> = vec![
            (Graph::complete(2), Box::new(FirstThenAll { x0: 0 })),
            (Graph::path(3), Box::new(FirstThenAll { x0: 1 })),
            (
                Graph::grid(2, 2),
                Box::new(PhiCompatible {
                    phi: grid_reflection(),
                    a: VertexSet::from_iter(4, [0]),
                }),
            ),
        ];
        for (g, mut chooser) in cases {
            let d = assembled_law_defect(&g, chooser.as_mut(), 1.0).unwrap();
            assert!(d < 1e-12, "{} defect {d}", chooser.name());
        }
    }

    #[test]
    fn contract_violations_are_reported() {
        struct Empty;
        impl KeepSetChooser for Empty {
            fn name(&self) -> String {
                "empty".into()
            }
            fn choose(&mut self, ctx: &StrategyContext<'_>, _: &mut RngStream) -> KeepSet {
                KeepSet::some(VertexSet::empty(ctx.remaining.universe()))
            }
        }
        let g = Graph::complete(2);
        let err = run_sampling_procedure(
            &g,
            &mut Empty,
            1.0,
            &mut RngStream::new(0, 0),
            &mut RngStream::new(0, 1),
            Subsampler::Exact,
        )
        .unwrap_err();
        assert!(matches!(err, SrpError::StrategyContract(_)));
    }

    #[test]
    fn phi_set_on_doubled_k2_is_symmetric_in_every_outcome() {
        let (g, phi) = doubled_graph(&Graph::complete(2));
        let a = VertexSet::from_iter(4, [0]);
        let mut chooser = PhiCompatible {
            phi: phi.clone(),
            a: a.clone(),
        };
        let mut total = 0.0;
        for_each_outcome(&g, &mut chooser, 1.0, &mut |rounds, p, w| {
            let trace = SamplingTrace {
                rounds: rounds
                    .iter()
                    .map(|r| TraceRound {
                        round: r.clone(),
                        images: r.d.iter().map(|x| (x, p.image(x))).collect(),
                    })
                    .collect(),
                assembled: p.clone(),
            };
            let hat = trace.phi_set();
            assert!(phi.is_compatible(&hat));
            assert!(p.is_invariant(&hat));
            assert!(phi.symmetrize(&a).is_subset(&hat));
            total += w;
        })
        .unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_group_gives_orbit_of_a() {
        let g = Graph::grid(2, 3);
        let a = VertexSet::from_iter(6, [0, 5]);
        for seed in 0..20 {
            let (hat, trace) = sample_phi_compatible_set(
                &g,
                &SymmetryGroup::trivial(6),
                &a,
                0.7,
                &mut RngStream::new(seed, 0),
                &mut RngStream::new(seed, 1),
                Subsampler::Exact,
            )
            .unwrap();
            assert_eq!(hat, trace.assembled.orbit(&a));
        }
    }

    #[test]
    fn identity_draw_gives_phi_of_a() {
        let g = Graph::grid(2, 2);
        let phi = grid_reflection();
        let a = VertexSet::from_iter(4, [0]);
        let (hat, _) = sample_phi_compatible_set(
            &g,
            &phi,
            &a,
            60.0,
            &mut RngStream::new(1, 0),
            &mut RngStream::new(1, 1),
            Subsampler::Exact,
        )
        .unwrap();
        assert_eq!(hat, phi.symmetrize(&a));
    }

    #[test]
    fn traces_are_reproducible() {
        let g = Graph::grid(2, 3);
        let run = || {
            run_sampling_procedure(
                &g,
                &mut RandomSingleton,
                0.9,
                &mut RngStream::new(11, 0),
                &mut RngStream::new(11, 1),
                Subsampler::Exact,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
