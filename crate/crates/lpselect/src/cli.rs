//! The `lp-select` command line.
//!
//! Every stage reads and writes files, so stages can be mixed with traces or
//! embeddings produced elsewhere. Data goes to `--out` (or stdout),
//! diagnostics to stderr. Exit codes: 0 success, 1 validation error, 2 I/O
//! error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use lpselect_core::analytics::transfer_report;
use lpselect_core::trainer::{planted_records, Difficulty};
use lpselect_core::{
    fallback_embed, iou, kmeans, partition_buckets, rank_ascending, select_clust_rand, select_topk_low, subset_stats,
    synth_traces, train_and_trace, Bucket, ClusterConfig, ClusterCount, ClusterRanking, Metric, MetricConfig,
    ScoreRecord, SelectionManifest, SelectionMode, SelectionParams, SynthSpec, TrainerConfig,
};

use crate::error::{Error, Result};
use crate::formats::{self, canonical_document, corpus_hash, manifest_to_string, write_jsonl};

const SCHEMAS: &str = "\
File schemas (UTF-8, one JSON object per line):
  corpus      {\"id\": str, \"instruction\": str, \"input\": str, \"output\": str}
  trace       {\"id\": str, \"ppl\": [P_0, P_1, ..., P_n]}
  embedding   {\"id\": str, \"vec\": [float, ...]}
  assignment  {\"id\": str, \"cluster\": int}
  score       {\"id\": str, \"metric\": \"lp\"|\"lp_app\", \"epoch\": int, \"value\": float, \"degenerate\": bool}
  manifest    single JSON document {\"ids\": [...], \"params\": {...}, \"created_at\": str}

Exit codes: 0 success, 1 validation error, 2 I/O error.";

#[derive(Debug, Parser)]
#[command(
    name = "lp-select",
    version,
    about = "Rank, cluster and select instruction-tuning data by learning percentage"
)]
#[command(after_help = SCHEMAS)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Global options")]
pub struct GlobalArgs {
    /// Seed for every randomized step
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads: a positive number or `auto` [default: $LP_SELECT_THREADS, else auto]
    #[arg(long, global = true)]
    pub threads: Option<Threads>,
    /// Output path; standard output when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format, where a subcommand supports more than one
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Overwrite existing output files
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads::Fixed(n)),
            _ => Err(format!("expected a positive integer or `auto`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Lp,
    LpApp,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Lp => Metric::Lp,
            MetricArg::LpApp => Metric::LpApp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    TopkLow,
    Bucket,
    ClustRand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BucketArg {
    Low,
    Mid,
    High,
}

impl From<BucketArg> for Bucket {
    fn from(b: BucketArg) -> Self {
        match b {
            BucketArg::Low => Bucket::Low,
            BucketArg::Mid => Bucket::Mid,
            BucketArg::High => Bucket::High,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score traces by learning percentage (writes score JSONL)
    #[command(after_help = SCHEMAS)]
    Score {
        #[arg(long)]
        traces: PathBuf,
        /// Reject traces whose ids are not in this corpus
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "lp")]
        metric: MetricArg,
        #[arg(long, default_value_t = 1)]
        epoch: usize,
        /// |P_0 - P_n| below this marks an exact score degenerate
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Order scores hardest first (writes {"id", "rank", "value"} JSONL)
    #[command(after_help = SCHEMAS)]
    Rank {
        #[arg(long)]
        scores: PathBuf,
    },
    /// Hashed character-trigram embeddings (writes embedding JSONL)
    #[command(after_help = SCHEMAS)]
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 256)]
        dim: usize,
    },
    /// k-means over embeddings (writes assignment JSONL)
    #[command(after_help = SCHEMAS)]
    Cluster {
        #[arg(long)]
        embeddings: PathBuf,
        /// Fixed cluster count
        #[arg(long, conflicts_with = "min_avg")]
        k: Option<usize>,
        /// Derive k = max(1, floor(N / min_avg))
        #[arg(long)]
        min_avg: Option<usize>,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        /// Stop once the relative inertia improvement falls below this
        #[arg(long, default_value_t = 1e-6)]
        conv_tol: f64,
        /// Also write run metadata (seed, k, inertia, iterations) here
        #[arg(long)]
        meta_out: Option<PathBuf>,
    },
    /// Select a subset cluster by cluster (writes a manifest)
    #[command(after_help = SCHEMAS)]
    Select {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        /// Corpus the scores and clusters refer to; bound into the manifest hash
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Percent of each cluster, in (0, 100] (topk-low, clust-rand)
        #[arg(long)]
        fraction: Option<f64>,
        /// Which third of each cluster (bucket mode)
        #[arg(long, value_enum)]
        bucket: Option<BucketArg>,
        /// Label of the model whose traces produced the scores
        #[arg(long, default_value = "")]
        tag: String,
        /// Also write the selected corpus records here
        #[arg(long)]
        subset_out: Option<PathBuf>,
        /// Timestamp for created_at, in seconds since the epoch
        #[arg(long, env = "SOURCE_DATE_EPOCH")]
        created_at: Option<i64>,
    },
    /// Split every cluster into Low/Mid/High thirds (writes low.json, mid.json, high.json into --out)
    #[command(after_help = SCHEMAS)]
    Partition {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "")]
        tag: String,
        #[arg(long, env = "SOURCE_DATE_EPOCH")]
        created_at: Option<i64>,
    },
    /// Kendall tau and IOU between two score files, or IOU between two manifests
    #[command(after_help = SCHEMAS)]
    #[command(group(ArgGroup::new("ranks").args(["rank_a", "rank_b"]).multiple(true)))]
    #[command(group(ArgGroup::new("sets").args(["set_a", "set_b"]).multiple(true).conflicts_with("ranks")))]
    Compare {
        /// Score file of the first ranking source
        #[arg(long, requires = "rank_b")]
        rank_a: Option<PathBuf>,
        #[arg(long, requires = "rank_a")]
        rank_b: Option<PathBuf>,
        /// Manifest of the first selection
        #[arg(long, requires = "set_b")]
        set_a: Option<PathBuf>,
        #[arg(long, requires = "set_a")]
        set_b: Option<PathBuf>,
        /// Select per cluster when computing IOU curves
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Percentages for the IOU curve
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0, 10.0, 33.0])]
        fractions: Vec<f64>,
        #[arg(long, default_value = "a")]
        tag_a: String,
        #[arg(long, default_value = "b")]
        tag_b: String,
    },
    /// Length statistics and cluster histogram of a selected subset
    #[command(after_help = SCHEMAS)]
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
    },
    /// Train the reference byte-level model and write per-epoch perplexity traces
    #[command(after_help = SCHEMAS)]
    TrainRef {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        hidden_dim: usize,
        #[arg(long, default_value_t = 16)]
        embed_dim: usize,
        /// Base learning rate, decayed as lr / sqrt(epoch)
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long)]
        meta_out: Option<PathBuf>,
    },
    /// Generate synthetic traces with known easy/hard/noisy labels
    #[command(after_help = SCHEMAS)]
    Synth {
        #[arg(long, default_value_t = 0)]
        easy: usize,
        #[arg(long, default_value_t = 0)]
        hard: usize,
        #[arg(long, default_value_t = 0)]
        noisy: usize,
        #[arg(long, default_value_t = 3)]
        epochs: usize,
        #[arg(long, default_value_t = 0.02)]
        jitter: f64,
        /// Also write a matching synthetic corpus here
        #[arg(long)]
        corpus_out: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name) and runs it, returning the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lp-select: error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let threads = match cli.global.threads {
        Some(t) => t,
        None => match std::env::var("LP_SELECT_THREADS") {
            Ok(v) if !v.is_empty() => v.parse().map_err(|e| Error::Invalid(format!("LP_SELECT_THREADS: {e}")))?,
            _ => Threads::Auto,
        },
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Threads::Fixed(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Invalid(format!("cannot start thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn require_input(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found")))
    }
}

fn check_output(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Invalid(format!("{} exists; pass --force to overwrite", path.display())));
    }
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist")))
        }
        _ => Ok(()),
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn allow_formats(cli: &Cli, allowed: &[OutputFormat], name: &str) -> Result<OutputFormat> {
    match cli.global.format {
        None => Ok(allowed[0]),
        Some(f) if allowed.contains(&f) => Ok(f),
        Some(f) => Err(Error::Invalid(format!("--format {f:?} is not supported by {name}").to_lowercase())),
    }
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_jsonl(items, &mut buf).expect("writing to memory");
    buf
}

fn timestamp(epoch_secs: Option<i64>) -> Result<String> {
    let t = match epoch_secs {
        Some(s) => chrono::DateTime::from_timestamp(s, 0)
            .ok_or_else(|| Error::Invalid(format!("created-at {s} is out of range")))?,
        None => chrono::Utc::now(),
    };
    Ok(t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

/// Scores must share one metric and epoch; returns them.
fn uniform_metric(scores: &[ScoreRecord]) -> Result<(Metric, usize)> {
    let first = scores.first().ok_or_else(|| Error::Invalid("score file is empty".into()))?;
    if let Some(s) = scores.iter().find(|s| s.metric != first.metric || s.epoch != first.epoch) {
        return Err(Error::Invalid(format!(
            "score {} uses {}@{} but the file starts with {}@{}",
            s.id, s.metric, s.epoch, first.metric, first.epoch
        )));
    }
    Ok((first.metric, first.epoch))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let out = g.out.as_deref();
    if let (Some(p), false) = (out, matches!(cli.command, Command::Partition { .. })) {
        check_output(p, g.force)?;
    }
    match &cli.command {
        Command::Score { traces, corpus, metric, epoch, tol } => {
            allow_formats(cli, &[OutputFormat::Jsonl], "score")?;
            require_input(traces)?;
            corpus.as_deref().map(require_input).transpose()?;
            let cfg = MetricConfig { metric: (*metric).into(), epoch: *epoch, denom_tolerance: *tol };
            cfg.validate()?;
            let corpus = corpus.as_deref().map(formats::load_corpus).transpose()?;
            let file = formats::load_traces(traces, corpus.as_deref())?;
            let scores: Vec<ScoreRecord> =
                file.traces.par_iter().map(|t| cfg.score(t)).collect::<std::result::Result<_, _>>()?;
            let degenerate = scores.iter().filter(|s| s.degenerate).count();
            if degenerate > 0 {
                eprintln!("lp-select: warning: {degenerate} degenerate score(s) (flat trace, value set to 1.0)");
            }
            write_output(out, &jsonl(&scores))
        }
        Command::Rank { scores } => {
            allow_formats(cli, &[OutputFormat::Jsonl], "rank")?;
            require_input(scores)?;
            let scores = formats::load_scores(scores)?;
            let value: std::collections::HashMap<&str, f64> = scores.iter().map(|s| (s.id.as_str(), s.value)).collect();
            let order = rank_ascending(&scores)?;
            #[derive(Serialize)]
            struct RankLine<'a> {
                id: &'a str,
                rank: usize,
                value: f64,
            }
            let lines: Vec<RankLine> = order
                .iter()
                .enumerate()
                .map(|(i, id)| RankLine { id, rank: i + 1, value: value[id.as_str()] })
                .collect();
            write_output(out, &jsonl(&lines))
        }
        Command::Embed { corpus, dim } => {
            allow_formats(cli, &[OutputFormat::Jsonl], "embed")?;
            require_input(corpus)?;
            if *dim < 8 {
                return Err(Error::Invalid(format!("--dim must be at least 8, got {dim}")));
            }
            let corpus = formats::load_corpus(corpus)?;
            let embeddings: Vec<_> = corpus.par_iter().map(|s| fallback_embed(s, *dim, g.seed)).collect();
            let zero = embeddings.iter().filter(|e| e.is_zero()).count();
            if zero > 0 {
                eprintln!("lp-select: warning: {zero} sample(s) have no text and embed to the zero vector");
            }
            write_output(out, &jsonl(&embeddings))
        }
        Command::Cluster { embeddings, k, min_avg, max_iters, conv_tol, meta_out } => {
            allow_formats(cli, &[OutputFormat::Jsonl], "cluster")?;
            require_input(embeddings)?;
            if let Some(m) = meta_out {
                check_output(m, g.force)?;
            }
            let min_avg = min_avg.unwrap_or(50);
            if min_avg == 0 || *k == Some(0) {
                return Err(Error::Invalid("--k and --min-avg must be >= 1".into()));
            }
            let cfg = ClusterConfig {
                k: k.map_or(ClusterCount::Auto, ClusterCount::Fixed),
                min_avg,
                seed: g.seed,
                max_iters: *max_iters,
                conv_tol: *conv_tol,
            };
            let emb = formats::load_embeddings(embeddings)?;
            let result = kmeans(&emb, &cfg)?;
            if result.k() < cfg.resolve_k(emb.len()) {
                eprintln!(
                    "lp-select: warning: only {} non-empty clusters (requested {})",
                    result.k(),
                    cfg.resolve_k(emb.len())
                );
            }
            write_output(out, &jsonl(&result.assignments))?;
            if let Some(m) = meta_out {
                let meta = json!({
                    "seed": g.seed,
                    "k": result.k(),
                    "n": emb.len(),
                    "dim": emb[0].dim(),
                    "inertia": result.inertia,
                    "iters_run": result.iters_run,
                    "converged": result.converged,
                });
                write_output(Some(m), canonical_document(&meta).as_bytes())?;
            }
            Ok(())
        }
        Command::Select { scores, clusters, corpus, mode, fraction, bucket, tag, subset_out, created_at } => {
            allow_formats(cli, &[OutputFormat::Json], "select")?;
            for p in [scores, clusters, corpus] {
                require_input(p)?;
            }
            if let Some(p) = subset_out {
                check_output(p, g.force)?;
            }
            let corpus = formats::load_corpus(corpus)?;
            let scores = formats::load_scores(scores)?;
            let assignments = formats::load_assignments(clusters, Some(&corpus))?;
            let (metric, epoch) = uniform_metric(&scores)?;
            let mut params = match (mode, fraction, bucket) {
                (ModeArg::TopkLow, Some(f), None) => SelectionParams::topk_low(*f),
                (ModeArg::ClustRand, Some(f), None) => SelectionParams::clust_rand(*f, g.seed),
                (ModeArg::Bucket, None, Some(b)) => SelectionParams::bucket((*b).into()),
                (ModeArg::Bucket, _, _) => {
                    return Err(Error::Invalid("--mode bucket takes --bucket and no --fraction".into()))
                }
                _ => {
                    return Err(Error::Invalid("--mode topk-low and clust-rand take --fraction and no --bucket".into()))
                }
            };
            params.metric = metric;
            params.epoch = epoch;
            params.ranking_source_tag = tag.clone();
            params.corpus_hash = corpus_hash(&corpus);
            let ranking = ClusterRanking::new(&rank_ascending(&scores)?, &assignments)?;
            let mut manifest = match params.mode {
                SelectionMode::TopkLow => select_topk_low(&ranking, &params)?,
                SelectionMode::ClustRand => select_clust_rand(&assignments, &params, g.seed)?,
                SelectionMode::Bucket => {
                    partition_buckets(&ranking, &params).get(params.bucket.expect("bucket mode")).clone()
                }
            };
            manifest.created_at = timestamp(*created_at)?;
            let text = manifest_to_string(&manifest)?;
            eprintln!("lp-select: selected {} of {} samples", manifest.len(), corpus.len());
            write_output(out, text.as_bytes())?;
            if let Some(p) = subset_out {
                let by_id: std::collections::HashMap<&str, _> = corpus.iter().map(|r| (r.id.as_str(), r)).collect();
                let subset: Vec<_> = manifest.ids.iter().map(|id| by_id[id.as_str()]).collect();
                write_output(Some(p), &jsonl(&subset))?;
            }
            Ok(())
        }
        Command::Partition { scores, clusters, corpus, tag, created_at } => {
            allow_formats(cli, &[OutputFormat::Json], "partition")?;
            let dir = out.ok_or_else(|| Error::Invalid("partition needs --out DIR".into()))?;
            for p in [scores, clusters, corpus] {
                require_input(p)?;
            }
            let targets: Vec<PathBuf> = Bucket::ALL.iter().map(|b| dir.join(format!("{b}.json"))).collect();
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for t in &targets {
                check_output(t, g.force)?;
            }
            let corpus = formats::load_corpus(corpus)?;
            let scores = formats::load_scores(scores)?;
            let assignments = formats::load_assignments(clusters, Some(&corpus))?;
            let (metric, epoch) = uniform_metric(&scores)?;
            let mut base = SelectionParams::bucket(Bucket::Low);
            base.metric = metric;
            base.epoch = epoch;
            base.ranking_source_tag = tag.clone();
            base.corpus_hash = corpus_hash(&corpus);
            let ranking = ClusterRanking::new(&rank_ascending(&scores)?, &assignments)?;
            let parts = partition_buckets(&ranking, &base);
            let stamp = timestamp(*created_at)?;
            for (bucket, target) in Bucket::ALL.iter().zip(&targets) {
                let mut m: SelectionManifest = parts.get(*bucket).clone();
                m.created_at = stamp.clone();
                write_output(Some(target), manifest_to_string(&m)?.as_bytes())?;
            }
            eprintln!("lp-select: low {} / mid {} / high {}", parts.low.len(), parts.mid.len(), parts.high.len());
            Ok(())
        }
        Command::Compare { rank_a, rank_b, set_a, set_b, clusters, fractions, tag_a, tag_b } => {
            match (rank_a, rank_b, set_a, set_b) {
                (Some(a), Some(b), None, None) => {
                    let format = allow_formats(cli, &[OutputFormat::Json, OutputFormat::Csv], "compare")?;
                    require_input(a)?;
                    require_input(b)?;
                    clusters.as_deref().map(require_input).transpose()?;
                    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 100.0)) {
                        return Err(Error::Invalid(format!("fraction {f} outside (0, 100]")));
                    }
                    let sa = formats::load_scores(a)?;
                    let sb = formats::load_scores(b)?;
                    let assignments = clusters.as_deref().map(|c| formats::load_assignments(c, None)).transpose()?;
                    let report =
                        transfer_report(&sa, &sb, fractions, assignments.as_deref(), (tag_a.clone(), tag_b.clone()))?;
                    let text = match format {
                        OutputFormat::Csv => {
                            let mut s = String::from("fraction_percent,iou\n");
                            for (f, v) in &report.iou_by_fraction {
                                s.push_str(&format!("{f},{v}\n"));
                            }
                            s
                        }
                        _ => {
                            let curve: Vec<Value> = report
                                .iou_by_fraction
                                .iter()
                                .map(|(f, v)| json!({"fraction_percent": f, "iou": v}))
                                .collect();
                            canonical_document(&json!({
                                "kendall_tau": report.kendall_tau,
                                "n_common": report.n_common,
                                "iou_by_fraction": curve,
                                "source_tags": [report.source_tags.0, report.source_tags.1],
                            }))
                        }
                    };
                    write_output(out, text.as_bytes())
                }
                (None, None, Some(a), Some(b)) => {
                    allow_formats(cli, &[OutputFormat::Json], "compare --set-a/--set-b")?;
                    require_input(a)?;
                    require_input(b)?;
                    let ma = formats::read_manifest(a)?;
                    let mb = formats::read_manifest(b)?;
                    let value = iou(&ma.ids, &mb.ids)?;
                    let sa: std::collections::HashSet<&String> = ma.ids.iter().collect();
                    let inter = mb.ids.iter().filter(|id| sa.contains(id)).count();
                    let doc = json!({
                        "iou": value,
                        "n_a": ma.len(),
                        "n_b": mb.len(),
                        "n_intersection": inter,
                        "n_union": ma.len() + mb.len() - inter,
                    });
                    write_output(out, canonical_document(&doc).as_bytes())
                }
                _ => Err(Error::Invalid("compare needs --rank-a/--rank-b or --set-a/--set-b".into())),
            }
        }
        Command::Stats { manifest, corpus, clusters } => {
            allow_formats(cli, &[OutputFormat::Json], "stats")?;
            for p in [manifest, corpus, clusters] {
                require_input(p)?;
            }
            let corpus = formats::load_corpus(corpus)?;
            let m = formats::read_manifest(manifest)?;
            formats::check_manifest_against(&m, &corpus)?;
            let assignments = formats::load_assignments(clusters, Some(&corpus))?;
            let stats = subset_stats(&m, &corpus, &assignments)?;
            write_output(out, canonical_document(&stats).as_bytes())
        }
        Command::TrainRef { corpus, epochs, hidden_dim, embed_dim, lr, batch_size, meta_out } => {
            allow_formats(cli, &[OutputFormat::Jsonl], "train-ref")?;
            require_input(corpus)?;
            if let Some(m) = meta_out {
                check_output(m, g.force)?;
            }
            let cfg = TrainerConfig {
                epochs: *epochs,
                hidden_dim: *hidden_dim,
                embed_dim: *embed_dim,
                lr: *lr,
                batch_size: *batch_size,
                seed: g.seed,
            };
            cfg.validate()?;
            let corpus = formats::load_corpus(corpus)?;
            let set = train_and_trace(&corpus, &cfg)?;
            if !set.empty_output_ids.is_empty() {
                eprintln!(
                    "lp-select: warning: {} sample(s) with empty output get constant uniform-model traces",
                    set.empty_output_ids.len()
                );
            }
            write_output(out, &jsonl(&set.traces))?;
            if let Some(m) = meta_out {
                let meta = json!({
                    "corpus_hash": corpus_hash(&corpus),
                    "epochs": cfg.epochs,
                    "hidden_dim": cfg.hidden_dim,
                    "embed_dim": cfg.embed_dim,
                    "lr": cfg.lr,
                    "lr_schedule": "lr / sqrt(epoch)",
                    "batch_size": cfg.batch_size,
                    "seed": cfg.seed,
                    "vocab": lpselect_core::trainer::VOCAB,
                    "perplexity": "output bytes only, conditioned on instruction and input",
                });
                write_output(Some(m), canonical_document(&meta).as_bytes())?;
            }
            Ok(())
        }
        Command::Synth { easy, hard, noisy, epochs, jitter, corpus_out } => {
            allow_formats(cli, &[OutputFormat::Jsonl], "synth")?;
            if let Some(p) = corpus_out {
                check_output(p, g.force)?;
            }
            if easy + hard + noisy == 0 {
                return Err(Error::Invalid("synth needs at least one of --easy, --hard, --noisy".into()));
            }
            if *epochs == 0 {
                return Err(Error::Invalid("--epochs must be >= 1".into()));
            }
            if !(0.0..0.09).contains(jitter) {
                return Err(Error::Invalid("--jitter must be in [0, 0.09)".into()));
            }
            let spec = SynthSpec {
                n_easy: *easy,
                n_hard: *hard,
                n_noisy: *noisy,
                epochs: *epochs,
                seed: g.seed,
                jitter: *jitter,
            };
            let set = synth_traces(&spec);
            write_output(out, &jsonl(&set.traces))?;
            if let Some(p) = corpus_out {
                let labels: Vec<(String, Difficulty)> = set
                    .traces
                    .iter()
                    .map(|t| {
                        let d = match t.id().split('-').next() {
                            Some("hard") => Difficulty::Hard,
                            Some("noisy") => Difficulty::Noisy,
                            _ => Difficulty::Easy,
                        };
                        (t.id().to_string(), d)
                    })
                    .collect();
                write_output(Some(p), &jsonl(&planted_records(&labels, g.seed)))?;
            }
            Ok(())
        }
    }
}
