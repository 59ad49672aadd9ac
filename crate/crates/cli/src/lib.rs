//! Command-line front end: data generation, index build, ground truth,
//! querying and evaluation.

pub mod vecs;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pcpq::eval::{evaluate, ground_truth, top_n, EvalInput, WallTimes};
use pcpq::pq_index::OpCounter;
use pcpq::synth::{generate, generate_queries, Distribution};
use pcpq::{Dataset, IVFIndex, InitMode, Method, PQConfig, PQIndex};

use crate::vecs::{read_fvecs, read_ivecs, write_bytes, write_fvecs, write_ivecs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "pcpq",
    version,
    about = "Product-quantized maximum inner product search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Build a flat or IVF index.
    Build(BuildArgs),
    /// Exact top-N ids by inner product.
    GroundTruth(TruthArgs),
    /// Search an index.
    Query(QueryArgs),
    /// Relative top-1 error and Recall1@N of a result file.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value = "gaussian", value_parser = parse_dist)]
    pub dist: Distribution,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of held-out queries from the same distribution.
    #[arg(long, default_value_t = 0)]
    pub queries: usize,
    #[arg(long)]
    pub queries_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub quantize_scalars: bool,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    #[arg(long, default_value_t = 8)]
    pub s: usize,
    #[arg(long, default_value_t = 0.2)]
    pub t_frac: f64,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Coarse cells; 0 builds a flat index.
    #[arg(long, default_value_t = 0)]
    pub ivf_kbar: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// warm, seeding or normalized.
    #[arg(long, default_value = "warm", value_parser = parse_init)]
    pub init: InitMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TruthArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long = "topN", alias = "top-n", default_value_t = 100)]
    pub top_n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Cells probed per query (IVF only); defaults to all cells.
    #[arg(long)]
    pub kprobe: Option<usize>,
    #[arg(long = "topN", alias = "top-n", default_value_t = 10)]
    pub top_n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Approximate scores as fvecs, aligned with the ids.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,10")]
    pub recall_at: Vec<usize>,
    #[arg(long)]
    pub report: PathBuf,
    /// Index that produced the results; enables relative error and labels.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Per-query rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Include wall-clock times in the report.
    #[arg(long)]
    pub timings: bool,
}

fn parse_dist(s: &str) -> std::result::Result<Distribution, String> {
    s.parse().map_err(|e: pcpq::Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: pcpq::Error| e.to_string())
}

fn parse_init(s: &str) -> std::result::Result<InitMode, String> {
    match s {
        "warm" => Ok(InitMode::Warm),
        "seeding" | "kmeans++" => Ok(InitMode::Seeding),
        "normalized" => Ok(InitMode::NormalizedSampling),
        other => Err(format!("unknown init {other:?}")),
    }
}

/// Invalid combination of otherwise well-formed flags.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit code for an error chain.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<pcpq::Error>() {
            return match e {
                pcpq::Error::InvalidConfig(_) => EXIT_USAGE,
                e if e.is_numeric() => EXIT_NUMERIC,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Build(a) => build(a),
        Command::GroundTruth(a) => truth(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
    }
}

fn load(path: &Path) -> Result<Dataset> {
    read_fvecs(path).with_context(|| format!("reading {}", path.display()))
}

fn gen(a: GenArgs) -> Result<()> {
    if a.queries > 0 && a.queries_out.is_none() {
        return Err(usage("--queries needs --queries-out"));
    }
    if a.queries == 0 && a.queries_out.is_some() {
        return Err(usage("--queries-out needs --queries N with N > 0"));
    }
    let data = generate(a.dist, a.n, a.d, a.seed)?;
    write_fvecs(&data, &a.out)?;
    if let Some(path) = a.queries_out {
        write_fvecs(&generate_queries(a.dist, a.queries, a.d, a.seed)?, &path)?;
    }
    Ok(())
}

fn build(a: BuildArgs) -> Result<()> {
    let data = load(&a.data)?;
    let config = PQConfig {
        m: a.m,
        k: a.k,
        s: a.s,
        method: a.method,
        quantize_scalars: a.quantize_scalars,
        t_frac: a.t_frac,
        max_iters: a.iters,
        tol: a.tol,
        seed: a.seed,
        init: a.init,
        threshold: Default::default(),
    };
    let bytes = if a.ivf_kbar == 0 {
        PQIndex::build(&data, &config)?.serialize()
    } else {
        IVFIndex::build(&data, a.ivf_kbar, &config)?.serialize()
    };
    write_bytes(&a.out, &bytes)?;
    Ok(())
}

fn truth(a: TruthArgs) -> Result<()> {
    if a.top_n == 0 {
        return Err(usage("--topN must be at least 1"));
    }
    let data = load(&a.data)?;
    let queries = load(&a.queries)?;
    let rows: Vec<Vec<u32>> = ground_truth(&data, &queries, a.top_n)?
        .into_iter()
        .map(|r| r.into_iter().map(|(id, _)| id).collect())
        .collect();
    write_ivecs(&rows, &a.out)?;
    Ok(())
}

/// A flat or IVF index read from disk.
pub enum LoadedIndex {
    Flat(PQIndex),
    Ivf(IVFIndex),
}

impl LoadedIndex {
    pub fn read(path: &Path) -> Result<LoadedIndex> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let index = if bytes.starts_with(b"PCPQIVF1") {
            LoadedIndex::Ivf(IVFIndex::deserialize(&bytes)?)
        } else {
            LoadedIndex::Flat(PQIndex::deserialize(&bytes)?)
        };
        Ok(index)
    }

    pub fn n(&self) -> usize {
        match self {
            LoadedIndex::Flat(p) => p.n,
            LoadedIndex::Ivf(v) => v.n,
        }
    }

    pub fn method(&self) -> Option<Method> {
        match self {
            LoadedIndex::Flat(p) => Some(p.method()),
            LoadedIndex::Ivf(v) => v.method(),
        }
    }

    /// Center budget per section; the largest cell budget for IVF.
    pub fn k(&self) -> Option<usize> {
        match self {
            LoadedIndex::Flat(p) => Some(p.k()),
            LoadedIndex::Ivf(v) => v
                .sub_indexes
                .iter()
                .filter_map(|s| match s {
                    pcpq::ivf::SubIndex::Pq(p) => Some(p.k()),
                    pcpq::ivf::SubIndex::Raw { .. } => None,
                })
                .max(),
        }
    }

    /// Scores of every point; flat indexes also tally table operations.
    pub fn score_all(&self, q: &[f32], counter: &mut OpCounter) -> Result<Vec<f32>> {
        Ok(match self {
            LoadedIndex::Flat(p) => p.score_all_counted(q, counter)?,
            LoadedIndex::Ivf(v) => v.score_all(q)?,
        })
    }

    pub fn search(&self, q: &[f32], k_probe: Option<usize>, top: usize) -> Result<Vec<(u32, f32)>> {
        match self {
            LoadedIndex::Flat(p) => {
                let scores = p.score_all(q)?;
                Ok(top_n(
                    scores
                        .into_iter()
                        .enumerate()
                        .map(|(i, s)| (i as u32, s))
                        .collect(),
                    top,
                ))
            }
            LoadedIndex::Ivf(v) => Ok(v.query(q, k_probe.unwrap_or(v.kbar()), top)?.hits),
        }
    }

    fn describe(&self) -> serde_json::Value {
        let mut out = serde_json::json!({
            "method": self.method().map(|m| m.name()),
            "k": self.k(),
        });
        let head = match self {
            LoadedIndex::Flat(p) => Some(p),
            LoadedIndex::Ivf(v) => {
                out["kbar"] = v.kbar().into();
                v.sub_indexes.iter().find_map(|s| match s {
                    pcpq::ivf::SubIndex::Pq(p) => Some(p),
                    pcpq::ivf::SubIndex::Raw { .. } => None,
                })
            }
        };
        if let Some(p) = head {
            out["m"] = p.m().into();
            out["s"] = p.s().into();
            out["quantized_scalars"] = (p.method().is_projective() && !p.is_raw()).into();
        }
        out
    }
}

fn query(a: QueryArgs) -> Result<()> {
    if a.top_n == 0 {
        return Err(usage("--topN must be at least 1"));
    }
    let index = LoadedIndex::read(&a.index)?;
    if let (LoadedIndex::Ivf(v), Some(p)) = (&index, a.kprobe) {
        if p == 0 || p > v.kbar() {
            return Err(usage(format!(
                "--kprobe must be between 1 and {}",
                v.kbar()
            )));
        }
    }
    let queries = load(&a.queries)?;
    let mut ids = Vec::with_capacity(queries.n());
    let mut scores = Vec::with_capacity(queries.n() * a.top_n);
    for q in queries.rows() {
        let hits = index.search(q, a.kprobe, a.top_n)?;
        let row: Vec<u32> = hits.iter().map(|h| h.0).collect();
        scores.extend(hits.iter().map(|h| h.1));
        scores.resize(scores.len() + a.top_n - hits.len(), f32::NEG_INFINITY);
        ids.push(row);
    }
    write_ivecs(&ids, &a.out)?;
    if let Some(path) = a.scores {
        write_fvecs(
            &Dataset::new(queries.n(), a.top_n, scores, "scores")?,
            &path,
        )?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let started = Instant::now();
    let data = load(&a.data)?;
    let queries = load(&a.queries)?;
    let retrieved =
        read_ivecs(&a.results).with_context(|| format!("reading {}", a.results.display()))?;
    let truth_rows = read_ivecs(&a.ground_truth)
        .with_context(|| format!("reading {}", a.ground_truth.display()))?;
    let truth: Vec<u32> = truth_rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.first()
                .copied()
                .ok_or_else(|| pcpq::Error::InvalidData(format!("ground-truth row {i} is empty")))
        })
        .collect::<std::result::Result<_, _>>()?;
    let index = a.index.as_deref().map(LoadedIndex::read).transpose()?;
    if let Some(index) = &index {
        if index.n() != data.n() {
            return Err(pcpq::Error::DimensionMismatch {
                expected: data.n(),
                found: index.n(),
            }
            .into());
        }
    }
    if truth.len() != queries.n() {
        return Err(pcpq::Error::DimensionMismatch {
            expected: queries.n(),
            found: truth.len(),
        }
        .into());
    }
    let mut counter = OpCounter::default();
    let approx = match &index {
        Some(index) => Some(
            queries
                .rows()
                .zip(&truth)
                .map(|(q, &t)| {
                    let scores = index.score_all(q, &mut counter)?;
                    scores.get(t as usize).copied().ok_or_else(|| {
                        pcpq::Error::InvalidData(format!("ground-truth id {t} out of range")).into()
                    })
                })
                .collect::<Result<Vec<f32>>>()?,
        ),
        None => None,
    };
    let mut report = evaluate(&EvalInput {
        data: &data,
        queries: &queries,
        truth: &truth,
        retrieved: &retrieved,
        approx_at_truth: approx.as_deref(),
        recall_at: &a.recall_at,
    })?;
    report.op_counters = counter;
    if let Some(index) = &index {
        report.label = index.k().map(pcpq::config::bit_label).unwrap_or_default();
        report.method = index.method().map(|m| m.name().to_string());
        report.config = Some(index.describe());
    }
    if a.timings {
        report.wall_times = Some(WallTimes {
            eval_s: Some(started.elapsed().as_secs_f64()),
            ..Default::default()
        });
    }
    write_bytes(&a.report, report.to_json().as_bytes())?;
    if let Some(path) = a.csv {
        write_bytes(&path, report.to_csv().as_bytes())?;
    }
    Ok(())
}
