//! Experiment configuration and the seeded batch runners behind the CLI.
//!
//! Every output carries the resolved configuration, its hash and the code
//! version in a JSON header line. Random streams are derived from the
//! configuration hash, the inverse temperature and the chain index, so equal
//! configurations give byte-identical tables.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::branching::{simulate_gw, total_population_law, GwProcess, OffspringLaw, DEFAULT_POPULATION_CAP};
use crate::decay::{constants_bundle, finite_graph_constants, ConstantsBundle};
use crate::error::{Result, SrpError};
use crate::exact::{self, saw_census, SawCensus, DEFAULT_SAW_BUDGET};
use crate::lattice::{CylinderLattice, Graph, GraphJson, DEFAULT_VERTEX_CAP};
use crate::regen::{fluctuation_stats, sample_summaries, FluctuationStats, SampleSummary};
use crate::report::{fmt_f64, CsvTable, SuiteSummary};
use crate::samplers::{
    cylinder_windows, graph_windows, sample_closed_chains, verify_open_ergodicity, Certification, MoveSet, RngStream,
    SamplerConfig,
};
use crate::stats::{self, Z95};
use crate::suites;

/// Version string embedded in every output header.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    #[default]
    Closed,
    Open,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Geometry {
    /// Open `rows x cols` patch of the square lattice.
    Grid { rows: usize, cols: usize },
    /// `Lambda_n` in dimension `d`, or a general `length x width` cylinder.
    Cylinder {
        n: usize,
        #[serde(default = "default_dim")]
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<usize>,
    },
    /// A graph in the JSON exchange format.
    GraphFile { path: PathBuf },
}

fn default_dim() -> usize {
    2
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry::Grid { rows: 2, cols: 2 }
    }
}

/// Built geometry: the graph, and the cylinder structure when there is one.
#[derive(Clone, Debug)]
pub struct Built {
    pub graph: Graph,
    pub lattice: Option<CylinderLattice>,
}

impl Geometry {
    pub fn build(&self) -> Result<Built> {
        match self {
            Geometry::Grid { rows, cols } => {
                if *rows == 0 || *cols == 0 {
                    return Err(SrpError::Argument("grid sides must be positive".into()));
                }
                Ok(Built {
                    graph: Graph::grid(*rows, *cols),
                    lattice: None,
                })
            }
            Geometry::Cylinder { n, d, length, width } => {
                let lat = match (length, width) {
                    (None, None) => CylinderLattice::build(*n, *d)?,
                    _ => CylinderLattice::rect(length.unwrap_or(*n), width.unwrap_or(*n), *d, DEFAULT_VERTEX_CAP)?,
                };
                Ok(Built {
                    graph: lat.graph().clone(),
                    lattice: Some(lat),
                })
            }
            Geometry::GraphFile { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| SrpError::Argument(format!("cannot read {}: {e}", path.display())))?;
                let json: GraphJson = serde_json::from_str(&text)
                    .map_err(|e| SrpError::Argument(format!("bad graph file {}: {e}", path.display())))?;
                Ok(Built {
                    graph: Graph::from_json(&json)?,
                    lattice: None,
                })
            }
        }
    }

    /// Default observation site: the centre of a grid, the middle of a
    /// cylinder's axis, vertex 0 otherwise.
    pub fn default_site(&self, built: &Built) -> usize {
        match (self, &built.lattice) {
            (Geometry::Grid { rows, cols }, _) => (rows / 2) * cols + cols / 2,
            (_, Some(lat)) => {
                let mut c = vec![0i64; lat.dim()];
                c[0] = (lat.length() / 2) as i64;
                lat.index_of(&c).unwrap_or(0)
            }
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsOptions {
    /// Vertex whose cycle is observed; `None` picks the geometry default.
    pub site: Option<usize>,
    pub ell_max: usize,
    /// Largest graph treated by exact enumeration instead of sampling.
    pub exact_max_vertices: usize,
    /// Longest polygon in the census behind the decay constants.
    pub census_len: usize,
}

impl Default for TailsOptions {
    fn default() -> Self {
        TailsOptions {
            site: None,
            ell_max: 20,
            exact_max_vertices: 12,
            census_len: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificationMode {
    /// Certify the instance itself when small, else inherit small certificates.
    #[default]
    Auto,
    Instance,
    Inherited,
    Unsafe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegenOptions {
    /// Thresholds `M` for `P(max|y_hat| > M sqrt(n ln n))`.
    pub m: Vec<f64>,
    pub certification: CertificationMode,
}

impl Default for RegenOptions {
    fn default() -> Self {
        RegenOptions {
            m: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
            certification: CertificationMode::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwOptions {
    /// Offspring pmf as `{k: p_k}`.
    #[serde(deserialize_with = "offspring_map")]
    pub offspring: BTreeMap<usize, f64>,
    pub initial: u64,
    pub ell_max: usize,
    pub draws: u64,
}

// JSON object keys are strings, and the tagged `Analysis` enum buffers them
// in a way that defeats serde's usual integer-key parsing.
fn offspring_map<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<usize, f64>, D::Error> {
    let raw = BTreeMap::<String, f64>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, p)| {
            k.parse()
                .map(|k| (k, p))
                .map_err(|_| serde::de::Error::custom(format!("offspring count {k:?} is not an integer")))
        })
        .collect()
}

impl Default for GwOptions {
    fn default() -> Self {
        GwOptions {
            offspring: BTreeMap::from([(0, 0.5), (1, 0.5)]),
            initial: 1,
            ell_max: 40,
            draws: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Analysis {
    Tails(TailsOptions),
    Regen(RegenOptions),
    MarkovSuite,
    Gw(GwOptions),
    BoundaryDecay,
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis::Tails(TailsOptions::default())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub geometry: Geometry,
    pub alpha: Option<f64>,
    /// Grid of inverse temperatures; takes precedence over `alpha`.
    pub alphas: Vec<f64>,
    pub log_mu: Option<f64>,
    pub delta: Option<f64>,
    /// Chains, sweeps, burn-in and moves; its `alpha` and `seed` are set per run.
    pub sampler: SamplerConfig,
    pub analysis: Analysis,
    pub seed: u64,
    pub outputs: Outputs,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Model::Closed,
            geometry: Geometry::default(),
            alpha: Some(1.0),
            alphas: Vec::new(),
            log_mu: None,
            delta: None,
            sampler: SamplerConfig::default(),
            analysis: Analysis::default(),
            seed: 1,
            outputs: Outputs::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| SrpError::Argument(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SrpError::Argument(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.alpha_grid();
        if grid.is_empty() {
            return Err(SrpError::Argument("no alpha given".into()));
        }
        if grid.iter().any(|a| !a.is_finite()) {
            return Err(SrpError::Argument("alpha must be finite".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(SrpError::Argument(format!("delta must be positive, got {d}")));
            }
        }
        if self.sampler.chains == 0 || self.sampler.sweeps == 0 {
            return Err(SrpError::Argument(
                "sampler needs at least one chain and one sweep".into(),
            ));
        }
        if self.model == Model::Open && !matches!(self.geometry, Geometry::Cylinder { .. }) {
            return Err(SrpError::Argument("the open model runs on cylinder geometries".into()));
        }
        match &self.analysis {
            Analysis::Regen(_) if self.model != Model::Open => {
                Err(SrpError::Argument("regen analysis needs model = open".into()))
            }
            Analysis::Tails(_) if self.model != Model::Closed => {
                Err(SrpError::Argument("tails analysis needs model = closed".into()))
            }
            _ => Ok(()),
        }
    }

    /// `alphas` when nonempty, else `[alpha]`.
    pub fn alpha_grid(&self) -> Vec<f64> {
        if self.alphas.is_empty() {
            self.alpha.into_iter().collect()
        } else {
            self.alphas.clone()
        }
    }

    /// SHA-256 of the configuration without its output paths, hex encoded.
    pub fn config_hash(&self) -> String {
        let mut stripped = self.clone();
        stripped.outputs = Outputs::default();
        let text = serde_json::to_string(&stripped).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Seed of the stream family for one inverse temperature; chain `k` uses
    /// stream `k` of this seed.
    pub fn stream_seed(&self, alpha: f64) -> u64 {
        let mut h = Sha256::new();
        h.update(self.config_hash().as_bytes());
        h.update(alpha.to_bits().to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
    }

    /// Sampler block for one inverse temperature.
    pub fn sampler_for(&self, alpha: f64) -> SamplerConfig {
        SamplerConfig {
            alpha,
            seed: self.stream_seed(alpha),
            ..self.sampler.clone()
        }
    }

    pub fn tails_options(&self) -> TailsOptions {
        match &self.analysis {
            Analysis::Tails(t) => t.clone(),
            _ => TailsOptions::default(),
        }
    }

    pub fn regen_options(&self) -> RegenOptions {
        match &self.analysis {
            Analysis::Regen(r) => r.clone(),
            _ => RegenOptions::default(),
        }
    }

    /// Header metadata for one command's outputs.
    pub fn metadata(&self, command: &str) -> Value {
        json!({
            "command": command,
            "code_version": CODE_VERSION,
            "config_hash": self.config_hash(),
            "config": self,
        })
    }
}

/// Walk and polygon census behind the decay constants: on a square-lattice
/// patch large enough to hold every walk of the census for grids, on the graph
/// itself at the observation site otherwise.
pub fn census_for(geometry: &Geometry, built: &Built, site: usize, len: usize) -> Result<SawCensus> {
    match geometry {
        Geometry::Grid { .. } => {
            let (patch, centre) = Graph::square_patch(len.max(1));
            saw_census(&patch, centre, len, true, DEFAULT_SAW_BUDGET)
        }
        _ => saw_census(&built.graph, site, len, true, DEFAULT_SAW_BUDGET),
    }
}

/// Decay constants for one `alpha`: census-based when `log_mu` is given,
/// finite-graph constants otherwise.
pub fn constants_for(
    cfg: &ExperimentConfig,
    built: &Built,
    census: Option<&SawCensus>,
    alpha: f64,
) -> Result<ConstantsBundle> {
    match (cfg.log_mu, census) {
        (Some(log_mu), Some(census)) => constants_bundle(alpha, log_mu, cfg.delta, census),
        (Some(_), None) => Err(SrpError::Argument("census needed for log_mu constants".into())),
        (None, _) => finite_graph_constants(&built.graph, alpha),
    }
}

/// Cycle-length tail at one inverse temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub alpha: f64,
    pub method: String,
    pub site: usize,
    pub samples: u64,
    /// `P(||gamma|| > l)` for `l = 0..=ell_max`.
    pub tail: Vec<f64>,
    /// 95% band, degenerate for exact tails.
    pub band: Vec<(f64, f64)>,
    pub overlay: Option<Vec<f64>>,
    pub constants: Option<ConstantsBundle>,
    /// Whether the band's upper end stays below the overlay at every `l`.
    pub below_overlay: Option<bool>,
    /// Least-squares decay rate of `ln P(||gamma|| > l)` over the positive entries.
    pub fitted_rate: Option<f64>,
    pub warning: Option<String>,
}

fn cycle_edges_through(image: &[usize], z: usize) -> usize {
    let mut len = 1;
    let mut y = image[z];
    if y == z {
        return 0;
    }
    while y != z {
        y = image[y];
        len += 1;
    }
    len
}

fn fitted_rate(tail: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(l, &p)| (l as f64, p.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

/// Output of a tails run.
#[derive(Clone, Debug, PartialEq)]
pub struct TailsOutput {
    pub summaries: Vec<TailSummary>,
    pub table: CsvTable,
}

/// Cycle-length tails at the observation site for every `alpha` of the grid:
/// exact on small graphs, Monte Carlo with Wilson bands otherwise, with the
/// `C0 e^{-c0 l}` overlay when the constants are feasible.
pub fn run_tails(cfg: &ExperimentConfig) -> Result<TailsOutput> {
    cfg.validate()?;
    if cfg.model != Model::Closed {
        return Err(SrpError::Argument("tails run on the closed model".into()));
    }
    let opts = cfg.tails_options();
    let built = cfg.geometry.build()?;
    let g = &built.graph;
    let site = opts.site.unwrap_or_else(|| cfg.geometry.default_site(&built));
    if site >= g.vertex_count() {
        return Err(SrpError::Argument(format!("site {site} out of range")));
    }
    let census = match cfg.log_mu {
        Some(_) => Some(census_for(&cfg.geometry, &built, site, opts.census_len)?),
        None => None,
    };
    let exact_run = g.vertex_count() <= opts.exact_max_vertices;
    let windows = match &built.lattice {
        Some(lat) => cylinder_windows(lat, &g.all_vertices(), cfg.sampler.move_set),
        None => graph_windows(g, &g.all_vertices(), cfg.sampler.move_set),
    };
    let summaries: Vec<TailSummary> = cfg
        .alpha_grid()
        .into_par_iter()
        .map(|alpha| -> Result<TailSummary> {
            let (tail, band, samples, method) = if exact_run {
                let mut t = exact::cycle_tail(g, site, alpha)?;
                t.resize(opts.ell_max + 1, 0.0);
                t.truncate(opts.ell_max + 1);
                let band = t.iter().map(|&p| (p, p)).collect();
                (t, band, 0, "exact")
            } else {
                let scfg = cfg.sampler_for(alpha);
                let lens: Vec<usize> = sample_closed_chains(g, &windows, &scfg, |img| cycle_edges_through(img, site))
                    .into_iter()
                    .flatten()
                    .collect();
                let n = lens.len() as u64;
                let mut tail = Vec::new();
                let mut band = Vec::new();
                for l in 0..=opts.ell_max {
                    let hits = lens.iter().filter(|&&x| x > l).count() as u64;
                    tail.push(hits as f64 / n as f64);
                    band.push(stats::wilson_interval(hits, n, Z95));
                }
                (tail, band, n, "mcmc")
            };
            let (constants, warning) = match constants_for(cfg, &built, census.as_ref(), alpha) {
                Ok(k) => (Some(k), None),
                Err(SrpError::Infeasible(why)) => (None, Some(format!("overlay omitted: {why}"))),
                Err(e) => return Err(e),
            };
            let overlay: Option<Vec<f64>> = constants
                .as_ref()
                .map(|k| (0..=opts.ell_max).map(|l| k.tail_bound(l)).collect());
            let below_overlay = overlay
                .as_ref()
                .map(|o| band.iter().zip(o).all(|(&(_, hi), &b)| hi <= b));
            Ok(TailSummary {
                alpha,
                method: method.into(),
                site,
                samples,
                fitted_rate: fitted_rate(&tail),
                tail,
                band,
                overlay,
                constants,
                below_overlay,
                warning,
            })
        })
        .collect::<Result<_>>()?;
    let mut table = CsvTable::new(
        cfg.metadata("tails"),
        &["alpha", "ell", "tail", "lo", "hi", "overlay", "method"],
    );
    for s in &summaries {
        for l in 0..s.tail.len() {
            table.push(vec![
                fmt_f64(s.alpha),
                l.to_string(),
                fmt_f64(s.tail[l]),
                fmt_f64(s.band[l].0),
                fmt_f64(s.band[l].1),
                s.overlay.as_ref().map_or(String::new(), |o| fmt_f64(o[l])),
                s.method.clone(),
            ]);
        }
    }
    Ok(TailsOutput { summaries, table })
}

/// Regeneration statistics at one inverse temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegenSummary {
    pub alpha: f64,
    pub stats: FluctuationStats,
    /// `(M, estimate, Wilson interval)` for each threshold.
    pub exceedance: Vec<(f64, f64, (f64, f64))>,
    /// Every transverse mean-increment interval contains zero.
    pub increment_mean_zero: bool,
    pub mean_chain_len: f64,
    pub mean_walk_len: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegenOutput {
    pub summaries: Vec<RegenSummary>,
    pub table: CsvTable,
}

/// Certificates for the open cylinder dynamics in dimension `d`, from
/// instances small enough for a full state-graph search.
pub fn open_certificates(d: usize) -> Result<Certification> {
    if d == 2 {
        return suites::small_open_certificates();
    }
    let lat = CylinderLattice::rect(2, 2, d, 1 << 10)?;
    let problem = crate::regen::cylinder_problem(&lat);
    let w = cylinder_windows(&lat, &problem.domain, MoveSet::Windowed);
    Ok(Certification::Inherited(vec![verify_open_ergodicity(
        lat.graph(),
        &problem,
        &w,
    )?]))
}

/// Resolves a certification mode for sampling the open model on `lat`.
pub fn certification_for(mode: CertificationMode, lat: &CylinderLattice) -> Result<Certification> {
    Ok(match mode {
        CertificationMode::Instance => Certification::Instance,
        CertificationMode::Unsafe => Certification::Unsafe,
        CertificationMode::Inherited => open_certificates(lat.dim())?,
        CertificationMode::Auto if lat.vertex_count() <= 16 => Certification::Instance,
        CertificationMode::Auto => open_certificates(lat.dim())?,
    })
}

/// Samples the open model on the cylinder and summarises the regeneration
/// chains at every `alpha` of the grid.
pub fn run_regen(cfg: &ExperimentConfig) -> Result<RegenOutput> {
    cfg.validate()?;
    if cfg.model != Model::Open {
        return Err(SrpError::Argument("regen runs on the open model".into()));
    }
    let built = cfg.geometry.build()?;
    let lat = built.lattice.as_ref().expect("validated cylinder");
    let opts = cfg.regen_options();
    let certification = certification_for(opts.certification, lat)?;
    let mut summaries = Vec::new();
    for alpha in cfg.alpha_grid() {
        let samples = sample_summaries(lat, &cfg.sampler_for(alpha), &certification)?;
        summaries.push(regen_summary(lat, alpha, &samples, &opts.m)?);
    }
    let mut table = CsvTable::new(
        cfg.metadata("regen"),
        &["alpha", "statistic", "key", "value", "lo", "hi"],
    );
    for s in &summaries {
        let a = fmt_f64(s.alpha);
        let row = |stat: &str, key: String, v: f64, lo: Option<f64>, hi: Option<f64>| {
            vec![
                a.clone(),
                stat.to_string(),
                key,
                fmt_f64(v),
                lo.map_or(String::new(), fmt_f64),
                hi.map_or(String::new(), fmt_f64),
            ]
        };
        table.push(row("samples", String::new(), s.stats.samples as f64, None, None));
        table.push(row("scale", String::new(), s.stats.scale, None, None));
        for &(q, v) in &s.stats.quantiles {
            table.push(row("max-quantile", format!("{q}"), v, None, None));
        }
        for (k, &(m, lo, hi)) in s.stats.mean_increment.iter().enumerate() {
            table.push(row("mean-increment", format!("{}", k + 1), m, Some(lo), Some(hi)));
        }
        for &(m, p, (lo, hi)) in &s.exceedance {
            table.push(row("exceedance", format!("{m}"), p, Some(lo), Some(hi)));
        }
        table.push(row("mean-chain-len", String::new(), s.mean_chain_len, None, None));
        table.push(row("mean-walk-len", String::new(), s.mean_walk_len, None, None));
    }
    Ok(RegenOutput { summaries, table })
}

/// Fluctuation statistics plus the exceedance sweep over `ms`.
pub fn regen_summary(lat: &CylinderLattice, alpha: f64, samples: &[SampleSummary], ms: &[f64]) -> Result<RegenSummary> {
    let stats = fluctuation_stats(lat, samples, None)?;
    let exceedance = ms
        .iter()
        .map(|&m| fluctuation_stats(lat, samples, Some(m)).map(|s| s.exceedance.expect("threshold given")))
        .collect::<Result<Vec<_>>>()?;
    let increment_mean_zero = stats.mean_increment.iter().all(|&(_, lo, hi)| lo <= 0.0 && 0.0 <= hi);
    let k = samples.len() as f64;
    Ok(RegenSummary {
        alpha,
        mean_chain_len: samples.iter().map(|s| s.chain_len as f64).sum::<f64>() / k,
        mean_walk_len: samples.iter().map(|s| s.walk_len as f64).sum::<f64>() / k,
        stats,
        exceedance,
        increment_mean_zero,
    })
}

/// Exact total-population law against seeded simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct GwOutput {
    pub expected_total: Option<f64>,
    pub simulated_mean: f64,
    pub table: CsvTable,
}

pub fn run_gw(cfg: &ExperimentConfig, opts: &GwOptions) -> Result<GwOutput> {
    let offspring = OffspringLaw::from_map(&opts.offspring)?;
    let process = GwProcess::new(offspring, opts.initial);
    let law = total_population_law(&process, opts.ell_max, false)?;
    let mut rng = RngStream::new(cfg.stream_seed(0.0), 0);
    let totals: Vec<u64> = (0..opts.draws)
        .map(|_| simulate_gw(&process, usize::MAX, DEFAULT_POPULATION_CAP, &mut rng).total)
        .collect();
    let survival = stats::empirical_survival(&totals, opts.ell_max + 1);
    let mut table = CsvTable::new(cfg.metadata("gw"), &["ell", "exact_at_least", "simulated_at_least"]);
    for l in 0..=opts.ell_max {
        table.push(vec![
            l.to_string(),
            fmt_f64(law.at_least(l)),
            fmt_f64(survival.get(l).copied().unwrap_or(0.0)),
        ]);
    }
    Ok(GwOutput {
        expected_total: process.expected_total(),
        simulated_mean: totals.iter().map(|&t| t as f64).sum::<f64>() / totals.len().max(1) as f64,
        table,
    })
}

/// Result of `run_experiment`.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentOutput {
    Tails(TailsOutput),
    Regen(RegenOutput),
    Suite(SuiteSummary),
    Gw(GwOutput),
}

/// Runs the analysis named in the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match &cfg.analysis {
        Analysis::Tails(_) => run_tails(cfg).map(ExperimentOutput::Tails),
        Analysis::Regen(_) => run_regen(cfg).map(ExperimentOutput::Regen),
        Analysis::MarkovSuite => suites::markov_suite(&cfg.alpha_grid()).map(ExperimentOutput::Suite),
        Analysis::BoundaryDecay => suites::boundary_suite(&cfg.alpha_grid()).map(ExperimentOutput::Suite),
        Analysis::Gw(opts) => run_gw(cfg, opts).map(ExperimentOutput::Gw),
    }
}
