//! Samplers for the closed and open models and the keep-set sampling procedure.

pub mod moves;
pub mod strategy;

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrpError};
use crate::exact::{self, ExactDistribution, Sink, DEFAULT_NODE_CAP};
use crate::lattice::{graph_distance, Graph, VertexSet};
use crate::perm::{GraphPermutation, OpenCycleConfig};

pub use moves::{
    cylinder_windows, graph_windows, ClosedRules, ErgodicityCertificate, LocalRules, MoveSet, OpenRules, Window,
    WindowChain,
};

/// A reproducible random stream: ChaCha8 keyed by `seed`, with `stream` selecting
/// one of 2^64 independent streams of the same key.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A sibling stream derived from this one's key.
    pub fn substream(&self, stream: u64) -> Self {
        RngStream::new(self.seed, stream)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Draws an index with probability proportional to `weights`.
pub fn draw_index(rng: &mut RngStream, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("weights have positive mass")
}

/// Where a subsample `sigma_B` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Subsampler {
    /// Enumerate `S_B` and draw exactly.
    #[default]
    Exact,
    /// Run a fresh Metropolis chain on `B` from the identity.
    Mcmc,
}

/// Sampler configuration block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub alpha: f64,
    pub seed: u64,
    pub chains: usize,
    /// Recorded samples per chain.
    pub sweeps: u64,
    /// Burn-in proposals; `None` means `100 |V|`.
    pub burn_in: Option<u64>,
    /// Proposals between recorded samples; `None` means `|V|` (one sweep).
    pub thinning: Option<u64>,
    pub move_set: MoveSet,
    pub subsampler: Subsampler,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            alpha: 1.0,
            seed: 1,
            chains: 1,
            sweeps: 1000,
            burn_in: None,
            thinning: None,
            move_set: MoveSet::Windowed,
            subsampler: Subsampler::Exact,
        }
    }
}

impl SamplerConfig {
    pub fn burn_in_for(&self, vertices: usize) -> u64 {
        self.burn_in.unwrap_or(100 * vertices as u64)
    }

    pub fn thinning_for(&self, vertices: usize) -> u64 {
        self.thinning.unwrap_or(vertices as u64).max(1)
    }
}

/// Draws from an exact distribution.
pub fn draw_exact<T: Clone>(dist: &ExactDistribution<T>, rng: &mut RngStream) -> T {
    dist.support[draw_index(rng, &dist.probabilities)].clone()
}

/// One Metropolis proposal of the closed-model dynamics over `windows`.
pub fn metropolis_step(
    g: &Graph,
    windows: &[Window],
    p: &GraphPermutation,
    alpha: f64,
    rng: &mut RngStream,
) -> GraphPermutation {
    let rules = ClosedRules { graph: g };
    let owned = std::mem::replace(rng, RngStream::new(0, 0));
    let mut chain = WindowChain::new(&rules, windows, p.images().to_vec(), alpha, owned);
    chain.step();
    let image = chain.image().to_vec();
    *rng = chain.into_rng();
    GraphPermutation::from_image_unchecked(image)
}

/// Runs `chains` independent closed-model chains from the identity and applies
/// `record` to every thinned sample. Results are in chain order.
pub fn sample_closed_chains<T: Send>(
    g: &Graph,
    windows: &[Window],
    cfg: &SamplerConfig,
    record: impl Fn(&[usize]) -> T + Sync,
) -> Vec<Vec<T>> {
    let rules = ClosedRules { graph: g };
    let n = g.vertex_count();
    (0..cfg.chains as u64)
        .into_par_iter()
        .map(|c| {
            let rng = RngStream::new(cfg.seed, c);
            let mut chain = WindowChain::new(&rules, windows, (0..n).collect(), cfg.alpha, rng);
            chain.run(cfg.burn_in_for(n));
            let thin = cfg.thinning_for(n);
            (0..cfg.sweeps)
                .map(|_| {
                    chain.run(thin);
                    record(chain.image())
                })
                .collect()
        })
        .collect()
}

/// Empirical law of the closed chain as counts of image arrays.
pub fn closed_empirical_law(g: &Graph, windows: &[Window], cfg: &SamplerConfig) -> HashMap<Vec<usize>, u64> {
    let mut counts = HashMap::new();
    for chain in sample_closed_chains(g, windows, cfg, |img| img.to_vec()) {
        for s in chain {
            *counts.entry(s).or_insert(0) += 1;
        }
    }
    counts
}

/// State-graph connectivity of the closed dynamics over all of `S_V`.
pub fn verify_ergodicity(g: &Graph, windows: &[Window]) -> Result<ErgodicityCertificate> {
    let mut states = Vec::new();
    exact::for_each_closed(g, DEFAULT_NODE_CAP, |img| states.push(img.to_vec()))?;
    Ok(moves::check_connectivity(&ClosedRules { graph: g }, windows, &states))
}

/// Exact detailed-balance scan of the closed dynamics; returns the largest
/// violation `|P(s) k(s,s') - P(s') k(s',s)|` over all state pairs.
pub fn detailed_balance_defect(g: &Graph, windows: &[Window], alpha: f64) -> Result<f64> {
    let dist = exact::closed_distribution(g, alpha)?;
    let rules = ClosedRules { graph: g };
    let prob: HashMap<Vec<usize>, f64> = dist.iter().map(|(p, w)| (p.images().to_vec(), w)).collect();
    let rows: HashMap<Vec<usize>, HashMap<Vec<usize>, f64>> = prob
        .keys()
        .map(|s| (s.clone(), moves::kernel_row(&rules, windows, s, alpha)))
        .collect();
    let mut worst = 0.0f64;
    for (s, row) in &rows {
        for (t, k) in row {
            let back = rows[t].get(s).copied().unwrap_or(0.0);
            worst = worst.max((prob[s] * k - prob[t] * back).abs());
        }
    }
    Ok(worst)
}

/// Open-model sampling problem: domain `A`, source `a`, sink set.
#[derive(Clone, Debug)]
pub struct OpenProblem {
    pub domain: VertexSet,
    pub source: usize,
    pub sinks: VertexSet,
}

impl OpenProblem {
    pub fn sink(&self) -> Sink {
        Sink::Set(self.sinks.clone())
    }

    /// All configurations, in augmented form.
    pub fn augmented_states(&self, g: &Graph) -> Result<Vec<Vec<usize>>> {
        let mut states = Vec::new();
        exact::for_each_open(g, &self.domain, self.source, &self.sink(), DEFAULT_NODE_CAP, |c| {
            states.push(moves::augment_open(c.images(), c.source(), c.sink()))
        })?;
        Ok(states)
    }

    /// Straight start: identity background plus a shortest path from the source to the nearest sink.
    pub fn initial_state(&self, g: &Graph) -> Result<Vec<usize>> {
        let rules = OpenRules::new(g, &self.domain, self.source, &self.sinks)?;
        let (sub, members) = g.induced(&rules.domain);
        let local = |v: usize| members.binary_search(&v).expect("member");
        let n = sub.vertex_count();
        let mut parent = vec![usize::MAX; n];
        let start = local(self.source);
        parent[start] = start;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut end = None;
        while let Some(u) = queue.pop_front() {
            let gu = members[u];
            if gu != self.source && rules.sinks.contains(gu) {
                end = Some(u);
                break;
            }
            for &w in sub.neighbors(u) {
                if parent[w] == usize::MAX {
                    parent[w] = u;
                    queue.push_back(w);
                }
            }
        }
        let end = end.ok_or_else(|| SrpError::Argument("sink unreachable from source".into()))?;
        let mut image: Vec<usize> = (0..g.vertex_count()).collect();
        let mut v = end;
        image[members[end]] = self.source;
        while v != start {
            let p = parent[v];
            image[members[p]] = members[v];
            v = p;
        }
        Ok(image)
    }
}

/// Converts an augmented state back to a validated configuration.
pub fn open_config_from_augmented(g: &Graph, problem: &OpenProblem, state: &[usize]) -> Result<OpenCycleConfig> {
    let (image, sink) = moves::reduce_open(state, problem.source);
    let mut domain = problem.domain.clone();
    domain.insert(sink);
    OpenCycleConfig::new(g, domain, problem.source, sink, image)
}

/// How the open-model chain's ergodicity is established before use.
#[derive(Clone, Debug, PartialEq)]
pub enum Certification {
    /// Check this exact instance by state-graph search (small instances only).
    Instance,
    /// Trust a certificate established on smaller instances of the same family.
    Inherited(Vec<ErgodicityCertificate>),
    /// Skip certification.
    Unsafe,
}

/// State-graph connectivity of the open dynamics on one instance.
pub fn verify_open_ergodicity(g: &Graph, problem: &OpenProblem, windows: &[Window]) -> Result<ErgodicityCertificate> {
    let rules = OpenRules::new(g, &problem.domain, problem.source, &problem.sinks)?;
    let states = problem.augmented_states(g)?;
    Ok(moves::check_connectivity(&rules, windows, &states))
}

/// Runs independent open-model chains and records every thinned sample.
///
/// Refuses unless the certification shows a connected state graph.
pub fn sample_open_chains<T: Send>(
    g: &Graph,
    problem: &OpenProblem,
    windows: &[Window],
    cfg: &SamplerConfig,
    certification: &Certification,
    record: impl Fn(&OpenCycleConfig) -> T + Sync,
) -> Result<Vec<Vec<T>>> {
    match certification {
        Certification::Unsafe => {}
        Certification::Instance => {
            let cert = verify_open_ergodicity(g, problem, windows)?;
            if !cert.connected() {
                return Err(SrpError::Refused(format!(
                    "open dynamics not connected on this instance ({} of {} states reachable)",
                    cert.reachable, cert.states
                )));
            }
        }
        Certification::Inherited(certs) => {
            if certs.is_empty() || certs.iter().any(|c| !c.connected()) {
                return Err(SrpError::Refused(
                    "no connected certificate for the open dynamics".into(),
                ));
            }
        }
    }
    let rules = OpenRules::new(g, &problem.domain, problem.source, &problem.sinks)?;
    let start = problem.initial_state(g)?;
    let n = rules.domain.len();
    let chains: Vec<Result<Vec<T>>> = (0..cfg.chains as u64)
        .into_par_iter()
        .map(|c| {
            let rng = RngStream::new(cfg.seed, c);
            let mut chain = WindowChain::new(&rules, windows, start.clone(), cfg.alpha, rng);
            chain.run(cfg.burn_in_for(n));
            let thin = cfg.thinning_for(n);
            (0..cfg.sweeps)
                .map(|_| {
                    chain.run(thin);
                    let (image, sink) = moves::reduce_open(chain.image(), problem.source);
                    let mut domain = problem.domain.clone();
                    domain.insert(sink);
                    let c = OpenCycleConfig::from_parts_unchecked(image, domain, problem.source, sink);
                    Ok(record(&c))
                })
                .collect()
        })
        .collect();
    chains.into_iter().collect()
}

/// Exact open sampler for small instances.
pub fn sample_open_exact(
    g: &Graph,
    problem: &OpenProblem,
    alpha: f64,
    draws: usize,
    rng: &mut RngStream,
) -> Result<Vec<OpenCycleConfig>> {
    let dist = exact::open_distribution(g, &problem.domain, problem.source, &problem.sink(), alpha)?;
    Ok((0..draws).map(|_| draw_exact(&dist, rng)).collect())
}

/// `true` when the source can reach some sink inside the domain.
pub fn sink_reachable(g: &Graph, problem: &OpenProblem) -> bool {
    let dom = problem.domain.union(&problem.sinks);
    let (sub, members) = g.induced(&dom);
    let local = |set: &VertexSet| {
        VertexSet::from_iter(
            sub.vertex_count(),
            set.iter().filter_map(|v| members.binary_search(&v).ok()),
        )
    };
    let mut sinks = problem.sinks.clone();
    sinks.remove(problem.source);
    if sinks.is_empty() {
        return false;
    }
    let src = VertexSet::from_iter(g.vertex_count(), [problem.source]);
    matches!(graph_distance(&sub, &local(&src), &local(&sinks)), Ok(Some(_)))
}

/// Draws `sigma_B` on the subgraph induced by `b`, embedded with identity outside.
pub fn subsample(
    g: &Graph,
    b: &VertexSet,
    alpha: f64,
    subsampler: Subsampler,
    rng: &mut RngStream,
    cache: &mut HashMap<VertexSet, ExactDistribution<GraphPermutation>>,
) -> Result<GraphPermutation> {
    let (sub, members) = g.induced(b);
    let local = match subsampler {
        Subsampler::Exact => {
            if !cache.contains_key(b) {
                cache.insert(b.clone(), exact::closed_distribution(&sub, alpha)?);
            }
            draw_exact(&cache[b], rng)
        }
        Subsampler::Mcmc => {
            let rules = ClosedRules { graph: &sub };
            let windows = moves::graph_windows(&sub, &sub.all_vertices(), MoveSet::Windowed);
            let n = sub.vertex_count();
            let mut chain = WindowChain::new(&rules, &windows, (0..n).collect(), alpha, rng.clone());
            chain.run(100 * n as u64);
            let image = chain.image().to_vec();
            *rng = chain.into_rng();
            GraphPermutation::from_image_unchecked(image)
        }
    };
    Ok(GraphPermutation::embed(g.vertex_count(), &members, &local))
}
