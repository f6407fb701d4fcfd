use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use srp_core::decay::{constants_bundle, finite_graph_constants, lhs, solve_alpha0};
use srp_core::exact::SawCensus;
use srp_core::experiment::{
    census_for, certification_for, run_experiment, run_regen, run_tails, Analysis, ExperimentConfig, ExperimentOutput,
    Geometry, Model, RegenOptions, TailsOptions,
};
use srp_core::regen::cylinder_problem;
use srp_core::report::{fmt_f64, junit_xml, CsvTable};
use srp_core::samplers::{cylinder_windows, graph_windows, sample_closed_chains, sample_open_chains};
use srp_core::suites::{run_suite, DEFAULT_ALPHAS, SUITES};
use srp_core::SrpError;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

#[derive(Parser)]
#[command(name = "srp", version, about = "Spatial random permutation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite over the small-instance matrix.
    Verify {
        /// One of the registered suite names.
        suite: String,
        /// Write a junit-style XML report here.
        #[arg(long)]
        junit: Option<PathBuf>,
        /// Inverse temperatures, comma separated.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
    },
    /// Cycle-length tail at a site, with the exponential decay overlay.
    Tails(RunArgs),
    /// Transverse fluctuations of regeneration chains on the open cylinder.
    Regen(RunArgs),
    /// Decay constants for each alpha of the configuration.
    Constants(RunArgs),
    /// Critical inverse temperature for a given log connective constant.
    Alpha0 {
        #[arg(long, allow_hyphen_values = true)]
        log_mu: f64,
    },
    /// Draw samples and print the permutations.
    Sample(RunArgs),
    /// Self-avoiding walk and polygon counts at the observation site.
    Census {
        #[command(flatten)]
        run: RunArgs,
        /// Longest walk length to count.
        #[arg(long, default_value_t = 12)]
        n_max: usize,
        /// Observation site; defaults to the geometry's centre.
        #[arg(long)]
        site: Option<usize>,
    },
    /// Run the analysis named in a configuration file.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Closed,
    Open,
}

#[derive(Args, Default)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inverse temperatures, comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Cylinder size; switches the geometry to a cylinder.
    #[arg(long)]
    n: Option<usize>,
    /// Cylinder dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Grid geometry as ROWSxCOLS.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Recorded samples per chain.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    log_mu: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary output path.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once('x').ok_or("expected ROWSxCOLS")?;
    Ok((
        r.parse().map_err(|e| format!("{e}"))?,
        c.parse().map_err(|e| format!("{e}"))?,
    ))
}

enum Failure {
    Error(SrpError),
    Failed(String),
}

impl From<SrpError> for Failure {
    fn from(e: SrpError) -> Self {
        Failure::Error(e)
    }
}

type CmdResult = Result<(), Failure>;

fn exit_code(e: &SrpError) -> u8 {
    match e {
        SrpError::Capacity { .. } => EXIT_CAPACITY,
        SrpError::Argument(_) | SrpError::Domain(_) | SrpError::InvalidGraph(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Configuration from `--config` (or `base` when absent) with flag overrides applied.
fn resolve(args: &RunArgs, base: ExperimentConfig) -> Result<ExperimentConfig, SrpError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => base,
    };
    match args.alpha.as_slice() {
        [] => {}
        [a] => {
            cfg.alpha = Some(*a);
            cfg.alphas.clear();
        }
        many => cfg.alphas = many.to_vec(),
    }
    if let Some((rows, cols)) = args.grid {
        cfg.geometry = Geometry::Grid { rows, cols };
    }
    if args.n.is_some() || args.d.is_some() {
        let (n0, d0) = match &cfg.geometry {
            Geometry::Cylinder { n, d, .. } => (*n, *d),
            _ => (8, 2),
        };
        cfg.geometry = Geometry::Cylinder {
            n: args.n.unwrap_or(n0),
            d: args.d.unwrap_or(d0),
            length: None,
            width: None,
        };
    }
    if let Some(m) = args.model {
        cfg.model = match m {
            ModelArg::Closed => Model::Closed,
            ModelArg::Open => Model::Open,
        };
        // keep the analysis block consistent with a switched model
        match (&cfg.model, &cfg.analysis) {
            (Model::Open, Analysis::Tails(_)) => cfg.analysis = Analysis::Regen(RegenOptions::default()),
            (Model::Closed, Analysis::Regen(_)) => cfg.analysis = Analysis::Tails(TailsOptions::default()),
            _ => {}
        }
    }
    if let Some(s) = args.samples {
        cfg.sampler.sweeps = s;
    }
    if let Some(c) = args.chains {
        cfg.sampler.chains = c;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.log_mu.is_some() {
        cfg.log_mu = args.log_mu;
    }
    if args.delta.is_some() {
        cfg.delta = args.delta;
    }
    if args.out.is_some() {
        cfg.outputs.csv = args.out.clone();
    }
    if args.json.is_some() {
        cfg.outputs.json = args.json.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit_table(cfg: &ExperimentConfig, table: &CsvTable) -> Result<(), SrpError> {
    match &cfg.outputs.csv {
        Some(path) => table.write(path),
        None => {
            stdout(&table.render());
            Ok(())
        }
    }
}

fn emit_json(cfg: &ExperimentConfig, value: serde_json::Value) -> Result<(), SrpError> {
    if let Some(path) = &cfg.outputs.json {
        write_text(path, &(serde_json::to_string_pretty(&value).expect("json") + "\n"))?;
    }
    Ok(())
}

/// Prints to stdout, treating a closed pipe as the reader being done.
fn stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write_text(path: &Path, text: &str) -> Result<(), SrpError> {
    std::fs::write(path, text).map_err(|e| SrpError::Argument(format!("cannot write {}: {e}", path.display())))
}

fn verify(suite: &str, junit: Option<&Path>, alpha: &[f64]) -> CmdResult {
    if !SUITES.contains(&suite) {
        return Err(SrpError::Argument(format!(
            "unknown suite {suite:?}; expected one of {}",
            SUITES.join(", ")
        ))
        .into());
    }
    let alphas = if alpha.is_empty() {
        DEFAULT_ALPHAS.to_vec()
    } else {
        alpha.to_vec()
    };
    let summary = run_suite(suite, &alphas)?;
    if let Some(path) = junit {
        write_text(path, &junit_xml(std::slice::from_ref(&summary)))?;
    }
    stdout(
        &(format!(
            "{}: {} checks, {} failures, {} skipped",
            summary.suite, summary.checks, summary.failures, summary.skipped
        ) + "\n"),
    );
    for f in &summary.first_failures {
        stdout(&(format!("  failed {}: {}", f.check, serde_json::to_string(f).expect("json")) + "\n"));
    }
    if summary.pass() {
        Ok(())
    } else {
        Err(Failure::Failed(format!(
            "suite {suite} has {} failures",
            summary.failures
        )))
    }
}

fn tails(args: &RunArgs) -> CmdResult {
    let base = ExperimentConfig {
        analysis: Analysis::Tails(TailsOptions::default()),
        ..Default::default()
    };
    let cfg = resolve(args, base)?;
    let out = run_tails(&cfg)?;
    for s in &out.summaries {
        if let Some(w) = &s.warning {
            eprintln!("warning: alpha {}: {w}", s.alpha);
        }
        eprintln!(
            "alpha {}: {} tail, fitted rate {}, below overlay {}",
            s.alpha,
            s.method,
            s.fitted_rate.map_or("n/a".into(), |r| format!("{r:.4}")),
            s.below_overlay.map_or("n/a".into(), |b| b.to_string())
        );
    }
    emit_table(&cfg, &out.table)?;
    emit_json(
        &cfg,
        json!({ "meta": cfg.metadata("tails"), "summaries": out.summaries }),
    )?;
    Ok(())
}

fn regen(args: &RunArgs) -> CmdResult {
    let base = ExperimentConfig {
        model: Model::Open,
        geometry: Geometry::Cylinder {
            n: 8,
            d: 2,
            length: None,
            width: None,
        },
        analysis: Analysis::Regen(RegenOptions::default()),
        ..Default::default()
    };
    let cfg = resolve(args, base)?;
    let out = run_regen(&cfg)?;
    for s in &out.summaries {
        eprintln!(
            "alpha {}: {} samples, scale {:.4}, increment mean zero {}",
            s.alpha, s.stats.samples, s.stats.scale, s.increment_mean_zero
        );
    }
    emit_table(&cfg, &out.table)?;
    emit_json(
        &cfg,
        json!({ "meta": cfg.metadata("regen"), "summaries": out.summaries }),
    )?;
    Ok(())
}

fn constants(args: &RunArgs) -> CmdResult {
    let cfg = resolve(args, ExperimentConfig::default())?;
    let built = cfg.geometry.build()?;
    let site = cfg
        .tails_options()
        .site
        .unwrap_or_else(|| cfg.geometry.default_site(&built));
    let census = match cfg.log_mu {
        Some(_) => Some(census_for(&cfg.geometry, &built, site, cfg.tails_options().census_len)?),
        None => None,
    };
    let mut bundles = Vec::new();
    for alpha in cfg.alpha_grid() {
        let k = match (cfg.log_mu, &census) {
            (Some(log_mu), Some(c)) => constants_bundle(alpha, log_mu, cfg.delta, c)?,
            _ => finite_graph_constants(&built.graph, alpha)?,
        };
        bundles.push(k);
    }
    stdout(&(serde_json::to_string_pretty(&bundles).expect("json") + "\n"));
    Ok(())
}

fn alpha0(log_mu: f64) -> CmdResult {
    let a = solve_alpha0(log_mu)?;
    let out = json!({ "log_mu": log_mu, "alpha0": a, "residual": (lhs(a) - log_mu).abs() });
    stdout(&(serde_json::to_string_pretty(&out).expect("json") + "\n"));
    Ok(())
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn sample(args: &RunArgs) -> CmdResult {
    let cfg = resolve(args, ExperimentConfig::default())?;
    let built = cfg.geometry.build()?;
    let g = &built.graph;
    let mut table = CsvTable::new(cfg.metadata("sample"), &["alpha", "chain", "index", "images", "sink"]);
    for alpha in cfg.alpha_grid() {
        let scfg = cfg.sampler_for(alpha);
        let chains: Vec<Vec<(String, String)>> = match cfg.model {
            Model::Closed => {
                let windows = match &built.lattice {
                    Some(lat) => cylinder_windows(lat, &g.all_vertices(), scfg.move_set),
                    None => graph_windows(g, &g.all_vertices(), scfg.move_set),
                };
                sample_closed_chains(g, &windows, &scfg, |img| (join(img), String::new()))
            }
            Model::Open => {
                let lat = built.lattice.as_ref().expect("validated cylinder");
                let problem = cylinder_problem(lat);
                let windows = cylinder_windows(lat, &problem.domain, scfg.move_set);
                let cert = certification_for(cfg.regen_options().certification, lat)?;
                sample_open_chains(g, &problem, &windows, &scfg, &cert, |c| {
                    (join(c.images()), c.sink().to_string())
                })?
            }
        };
        for (k, chain) in chains.into_iter().enumerate() {
            for (i, (images, sink)) in chain.into_iter().enumerate() {
                table.push(vec![fmt_f64(alpha), k.to_string(), i.to_string(), images, sink]);
            }
        }
    }
    emit_table(&cfg, &table)?;
    Ok(())
}

fn census(args: &RunArgs, n_max: usize, site: Option<usize>) -> CmdResult {
    let cfg = resolve(args, ExperimentConfig::default())?;
    let built = cfg.geometry.build()?;
    let site = site.unwrap_or_else(|| cfg.geometry.default_site(&built));
    if site >= built.graph.vertex_count() {
        return Err(SrpError::Argument(format!("site {site} out of range")).into());
    }
    let c: SawCensus = census_for(&cfg.geometry, &built, site, n_max)?;
    let mut table = CsvTable::new(cfg.metadata("census"), &["n", "saw", "sap"]);
    for n in 0..c.saw.len() {
        table.push(vec![n.to_string(), c.saw[n].to_string(), c.sap[n].to_string()]);
    }
    emit_table(&cfg, &table)?;
    Ok(())
}

fn run(args: &RunArgs) -> CmdResult {
    if args.config.is_none() {
        return Err(SrpError::Argument("run needs --config".into()).into());
    }
    let cfg = resolve(args, ExperimentConfig::default())?;
    match run_experiment(&cfg)? {
        ExperimentOutput::Tails(out) => {
            emit_table(&cfg, &out.table)?;
            emit_json(
                &cfg,
                json!({ "meta": cfg.metadata("tails"), "summaries": out.summaries }),
            )?;
        }
        ExperimentOutput::Regen(out) => {
            emit_table(&cfg, &out.table)?;
            emit_json(
                &cfg,
                json!({ "meta": cfg.metadata("regen"), "summaries": out.summaries }),
            )?;
        }
        ExperimentOutput::Gw(out) => {
            emit_table(&cfg, &out.table)?;
            eprintln!(
                "expected total {}, simulated mean {:.4}",
                out.expected_total.map_or("infinite".into(), |e| e.to_string()),
                out.simulated_mean
            );
        }
        ExperimentOutput::Suite(s) => {
            stdout(
                &(format!(
                    "{}: {} checks, {} failures, {} skipped",
                    s.suite, s.checks, s.failures, s.skipped
                ) + "\n"),
            );
            emit_json(&cfg, json!({ "meta": cfg.metadata("suite"), "summary": s }))?;
            if !s.pass() {
                return Err(Failure::Failed(format!(
                    "suite {} has {} failures",
                    s.suite, s.failures
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify { suite, junit, alpha } => verify(suite, junit.as_deref(), alpha),
        Command::Tails(a) => tails(a),
        Command::Regen(a) => regen(a),
        Command::Constants(a) => constants(a),
        Command::Alpha0 { log_mu } => alpha0(*log_mu),
        Command::Sample(a) => sample(a),
        Command::Census { run, n_max, site } => census(run, *n_max, *site),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Failed(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
