//! `citerec`: command-line driver for the recommendation pipeline.
//!
//! Every subcommand reads a run config (JSON) and accepts flag overrides.
//! Exit codes: 0 success, 1 validation error, 2 missing prerequisite,
//! 3 numeric failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use citerec::config::RunConfig;
use citerec::corpus::{
    build_citation_graph, load_contexts, load_papers, split_contexts, write_jsonl, CitationContext, Corpus, DatasetStats, Split,
};
use citerec::eval::synthetic::{generate_synthetic, write_synthetic, SyntheticSpec};
use citerec::eval::{evaluate, format_table, AblationConfig, AblationRow, Experiment, MetricReport};
use citerec::hypermath::GeometryMode;
use citerec::matcher::{match_title, LshIndex, LshParams, DEFAULT_CANDIDATES, DEFAULT_THRESHOLD};
use citerec::pipeline::{Bm25Ranker, Pipeline, PipelineResources, PrefetchRanker, Ranker};
use citerec::prefetch::{build_dense_index, Bm25Index, Bm25Params, DenseIndex};
use citerec::reranker::{load_checkpoint, save_checkpoint, train, QueryBundle, RerankerModel};
use citerec::taxonomy::{fuse, load_mapping, FusedClassEmbeddings, FusionMode, Taxonomy};
use citerec::Error;

#[derive(Parser)]
#[command(name = "citerec", version, about = "Local citation recommendation pipeline")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic clustered corpus and a run config next to it.
    Synth(SynthArgs),
    /// Validate raw papers and contexts, write the corpus bundle and statistics.
    Ingest {
        #[command(flatten)]
        run: RunArgs,
        /// Print statistics without writing anything.
        #[arg(long)]
        stats_only: bool,
    },
    /// Embed every paper and write the dense prefetch index.
    BuildIndex {
        #[command(flatten)]
        run: RunArgs,
        /// Index path (defaults to the config's index).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse arXiv classes with the ACM tree into class embeddings.
    Fuse {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train the reranker on the training split.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint path (defaults to the config's checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank papers for one query given as a JSON file.
    Recommend {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        query: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Evaluate on the test split (or `--test`) and write a metric report.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Contexts to evaluate instead of the test split.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Evaluate a first-stage baseline instead of the trained pipeline.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Report path (defaults to `<work_dir>/report-<variant>.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate every ablation variant.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Resolve free-text titles (one per line) to corpus ids. Prints
    /// `query<TAB>id<TAB>similarity`, with `NONE` when nothing clears the threshold.
    MatchTitles {
        #[command(flatten)]
        run: RunArgs,
        /// Papers JSONL to match against (defaults to the ingested bundle).
        #[arg(long)]
        index: Option<PathBuf>,
        /// Titles to resolve, one per line.
        #[arg(long, alias = "titles")]
        queries: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    papers_per_cluster: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON.
    #[arg(long, default_value = "run.json")]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    prefetch_m: Option<usize>,
    #[arg(long)]
    enrich_cap: Option<usize>,
    #[arg(long, alias = "mode")]
    fusion: Option<FusionMode>,
    #[arg(long)]
    geometry: Option<GeometryMode>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Comma-separated: no_symbiosis, no_taxonomy, euclidean, with_section.
    #[arg(long)]
    ablation: Option<AblationConfig>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Prefetch,
    Bm25,
}

enum Failure {
    Validation(String),
    Missing { path: PathBuf, hint: String },
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Missing { .. } => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numeric(m) => Failure::Numeric(m),
            Error::Io { path, source } if source.kind() == io::ErrorKind::NotFound => Failure::Missing {
                path,
                hint: "file not found".into(),
            },
            other => Failure::Validation(other.to_string()),
        }
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn require(path: &Path, producer: &str) -> CmdResult {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Missing {
            path: path.to_path_buf(),
            hint: format!("run `citerec {producer}` first"),
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Error::io(path, e).into()
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

impl RunArgs {
    fn load(&self) -> CmdResult<RunConfig> {
        require(&self.config, "synth` or write a run config")?;
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.prefetch_m {
            cfg.prefetch_m = m;
        }
        if let Some(c) = self.enrich_cap {
            cfg.enrich_cap = c;
        }
        if let Some(f) = self.fusion {
            cfg.fusion = f;
        }
        if let Some(g) = self.geometry {
            cfg.model.geometry = g;
        }
        if let Some(m) = self.margin {
            cfg.model.margin = m;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(lr) = self.lr {
            cfg.train.lr = lr;
        }
        if let Some(wd) = self.weight_decay {
            cfg.train.weight_decay = wd;
        }
        if let Some(a) = self.ablation {
            cfg.ablation = a;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_taxonomy(cfg: &RunConfig) -> CmdResult<Taxonomy> {
    match (&cfg.mapping, &cfg.acm_tree) {
        (Some(m), Some(t)) => Ok(load_mapping(m, t)?),
        _ => Ok(Taxonomy::builtin()),
    }
}

fn load_bundle(cfg: &RunConfig) -> CmdResult<(Corpus, Vec<CitationContext>)> {
    let (papers, contexts) = (cfg.bundle_papers(), cfg.bundle_contexts());
    require(&papers, "ingest")?;
    require(&contexts, "ingest")?;
    let corpus = load_papers(&papers)?;
    let contexts = load_contexts(&contexts, &corpus)?.contexts;
    Ok((corpus, contexts))
}

struct Loaded {
    split: Split,
    resources: PipelineResources,
}

/// Corpus bundle, index, fused embeddings and the enrichment graph built
/// from the training split.
fn load_resources(cfg: &RunConfig) -> CmdResult<Loaded> {
    let (corpus, contexts) = load_bundle(cfg)?;
    let split = split_contexts(&contexts, &cfg.split_spec())?;
    let (index_path, fused_path) = (cfg.index_path(), cfg.fused_path());
    require(&index_path, "build-index")?;
    require(&fused_path, "fuse")?;
    let provider = cfg.embedder.build()?;
    let index = DenseIndex::read(&index_path)?;
    let fused = FusedClassEmbeddings::read(&fused_path)?;
    if fused.dim != provider.dim() {
        return Err(Failure::Validation(format!(
            "fused embeddings have dimension {} but the embedder has {}; rerun `citerec fuse`",
            fused.dim,
            provider.dim()
        )));
    }
    let graph = build_citation_graph(&split.train)?;
    let resources = PipelineResources::with_index(corpus, provider, index, graph, fused)?;
    Ok(Loaded { split, resources })
}

fn load_model(cfg: &RunConfig, path: Option<&PathBuf>) -> CmdResult<RerankerModel> {
    let path = path.cloned().unwrap_or_else(|| cfg.checkpoint_path());
    require(&path, "train")?;
    let model = load_checkpoint(&path)?;
    if !cfg.ablation.matches_model(&model) {
        return Err(Failure::Validation(format!(
            "checkpoint {} was trained under different model flags than ablation `{}`; train with the same --ablation",
            path.display(),
            cfg.ablation
        )));
    }
    Ok(model)
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let mut spec = SyntheticSpec::default();
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(c) = args.clusters {
        spec.n_clusters = c;
    }
    if let Some(p) = args.papers_per_cluster {
        spec.papers_per_cluster = p;
    }
    let data = generate_synthetic(&spec)?;
    let files = write_synthetic(&data, &args.out)?;
    let run = RunConfig {
        seed: spec.seed,
        ..RunConfig::standard_synthetic()
    };
    let run_path = args.out.join("run.json");
    write_text(&run_path, &(run.to_json() + "\n"))?;
    println!(
        "wrote {} papers, {} contexts\n  {}\n  {}\n  {}\n  {}\n  {}",
        data.papers.len(),
        data.contexts.len(),
        files.papers.display(),
        files.contexts.display(),
        files.mapping.display(),
        files.acm_tree.display(),
        run_path.display()
    );
    Ok(())
}

fn cmd_ingest(cfg: &RunConfig, stats_only: bool) -> CmdResult {
    let corpus = load_papers(&cfg.papers)?;
    let set = load_contexts(&cfg.contexts, &corpus)?;
    if cfg.mapping.is_some() {
        load_taxonomy(cfg)?.mapping.check_covers(corpus.categories())?;
    }
    let graph = build_citation_graph(&set.contexts)?;
    let split = split_contexts(&set.contexts, &cfg.split_spec())?;
    let name = cfg.papers.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
    let stats = DatasetStats::new(name, &split, &corpus, &graph);
    print!("{stats}");
    if set.dropped() > 0 {
        println!(
            "dropped contexts: {} unknown cited, {} unknown citing, {} invalid",
            set.dropped_unknown_cited, set.dropped_unknown_citing, set.dropped_invalid
        );
    }
    if stats_only {
        println!("{}", serde_json::to_string(&stats).expect("stats serialize"));
        return Ok(());
    }
    let dir = cfg.corpus_dir();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_jsonl(cfg.bundle_papers(), corpus.papers())?;
    write_jsonl(cfg.bundle_contexts(), &set.contexts)?;
    write_text(&cfg.work_dir.join("stats.json"), &(to_json(&stats) + "\n"))?;
    write_text(&cfg.work_dir.join("stats.txt"), &stats.to_string())?;
    println!("corpus bundle written to {}", dir.display());
    Ok(())
}

fn cmd_build_index(cfg: &RunConfig, out: Option<&PathBuf>) -> CmdResult {
    let (corpus, _) = load_bundle(cfg)?;
    let provider = cfg.embedder.build()?;
    let index = build_dense_index(&corpus, &provider)?;
    let path = out.cloned().unwrap_or_else(|| cfg.index_path());
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    index.write(&path)?;
    println!("indexed {} papers (dim {}) into {}", index.len(), index.dim(), path.display());
    Ok(())
}

fn cmd_fuse(cfg: &RunConfig) -> CmdResult {
    let (corpus, _) = load_bundle(cfg)?;
    let taxonomy = load_taxonomy(cfg)?;
    taxonomy.mapping.check_covers(corpus.categories())?;
    let provider = cfg.embedder.build()?;
    let fused = fuse(&taxonomy, &provider, cfg.fusion)?;
    let path = cfg.fused_path();
    fused.write(&path)?;
    println!("fused {} classes ({} mode, dim {}) into {}", fused.vectors.len(), cfg.fusion, fused.dim, path.display());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, out: Option<&PathBuf>) -> CmdResult {
    let Loaded { split, resources } = load_resources(cfg)?;
    let mut model = RerankerModel::new(&cfg.model_config(resources.provider.dim()), cfg.seed)?;
    info!("training on {} contexts, {} parameters", split.train.len(), model.param_count());
    let report = train(&mut model, &split.train, &resources, &cfg.pipeline(), &cfg.train_config())?;
    let path = out.cloned().unwrap_or_else(|| cfg.checkpoint_path());
    save_checkpoint(&model, &path)?;
    write_text(&cfg.work_dir.join("train_report.json"), &(to_json(&report) + "\n"))?;
    for (e, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:>3}  loss {l:.6}", e + 1);
    }
    println!("checkpoint written to {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct Recommendation<'a> {
    rank: usize,
    id: &'a str,
    score: f64,
    title: &'a str,
}

fn cmd_recommend(cfg: &RunConfig, model: Option<&PathBuf>, query: &Path, k: usize) -> CmdResult {
    let Loaded { resources, .. } = load_resources(cfg)?;
    let model = load_model(cfg, model)?;
    let text = fs::read_to_string(query).map_err(io_err(query))?;
    let q: QueryBundle =
        serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", query.display())))?;
    let pipeline = Pipeline::new(&resources, &model, cfg.pipeline(), !cfg.ablation.no_symbiosis);
    let ranked = pipeline.rank(&q)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (i, item) in ranked.items.iter().take(k).enumerate() {
        let title = resources.corpus.get(&item.id).map_or("", |p| p.title.as_str());
        let rec = Recommendation {
            rank: i + 1,
            id: &item.id,
            score: item.score,
            title,
        };
        writeln!(out, "{}", serde_json::to_string(&rec).expect("serializes")).map_err(|e| Failure::Validation(e.to_string()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct NamedReport<'a> {
    variant: &'a str,
    report: &'a MetricReport,
}

fn cmd_evaluate(cfg: &RunConfig, model: Option<&PathBuf>, test: Option<&PathBuf>, baseline: Option<Baseline>, out: Option<&PathBuf>) -> CmdResult {
    let Loaded { split, resources } = load_resources(cfg)?;
    let contexts = match test {
        Some(path) => load_contexts(path, &resources.corpus)?.contexts,
        None => split.test,
    };
    let corpus = &resources.corpus;
    let (variant, report) = match baseline {
        Some(Baseline::Prefetch) => {
            let r = PrefetchRanker {
                resources: &resources,
                m: cfg.prefetch_m,
            };
            ("prefetch_only".to_string(), evaluate(&r, &contexts, corpus)?)
        }
        Some(Baseline::Bm25) => {
            let index = Bm25Index::build(corpus);
            let r = Bm25Ranker {
                index: &index,
                params: Bm25Params::default(),
                k: cfg.prefetch_m,
            };
            ("bm25".to_string(), evaluate(&r, &contexts, corpus)?)
        }
        None => {
            let model = load_model(cfg, model)?;
            let p = Pipeline::new(&resources, &model, cfg.pipeline(), !cfg.ablation.no_symbiosis);
            let report = evaluate(&p, &contexts, corpus)?;
            info!("enricher invoked {} times", p.enrich_calls());
            (cfg.ablation.to_string(), report)
        }
    };
    println!("{:<14} {}", "variant", MetricReport::header());
    println!("{variant:<14} {report}");
    let path = out.cloned().unwrap_or_else(|| cfg.work_dir.join(format!("report-{variant}.json")));
    write_text(
        &path,
        &(to_json(&NamedReport {
            variant: &variant,
            report: &report,
        }) + "\n"),
    )?;
    println!("report written to {}", path.display());
    Ok(())
}

fn cmd_ablate(cfg: &RunConfig) -> CmdResult {
    let Loaded { split, resources } = load_resources(cfg)?;
    let exp = Experiment {
        resources: &resources,
        train_contexts: &split.train,
        test_contexts: &split.test,
        model: cfg.model_config(resources.provider.dim()),
        pipeline: cfg.pipeline(),
        train: cfg.train_config(),
    };
    let rows: Vec<AblationRow> = exp.ablation_suite()?;
    print!("{}", format_table(&rows));
    let path = cfg.work_dir.join("ablation.json");
    write_text(&path, &(to_json(&rows) + "\n"))?;
    println!("report written to {}", path.display());
    Ok(())
}

fn cmd_match_titles(cfg: &RunConfig, papers: Option<&PathBuf>, titles: &Path, threshold: f64) -> CmdResult {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::Validation(format!("threshold {threshold} outside [0, 1]")));
    }
    let corpus = match papers {
        Some(path) => {
            require(path, "synth` or point --index at a papers file")?;
            load_papers(path)?
        }
        None => load_bundle(cfg)?.0,
    };
    let index = LshIndex::from_corpus(
        &corpus,
        LshParams {
            seed: cfg.seed,
            ..LshParams::default()
        },
    );
    let text = fs::read_to_string(titles).map_err(io_err(titles))?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let row = match match_title(line, &index, DEFAULT_CANDIDATES, threshold) {
            Some(m) => format!("{line}\t{}\t{:.6}", m.id, m.similarity),
            None => format!("{line}\tNONE\t"),
        };
        writeln!(out, "{row}").map_err(|e| Failure::Validation(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Ingest { run, stats_only } => cmd_ingest(&run.load()?, *stats_only),
        Command::BuildIndex { run, out } => cmd_build_index(&run.load()?, out.as_ref()),
        Command::Fuse { run } => cmd_fuse(&run.load()?),
        Command::Train { run, out } => cmd_train(&run.load()?, out.as_ref()),
        Command::Recommend { run, model, query, k } => cmd_recommend(&run.load()?, model.as_ref(), query, *k),
        Command::Evaluate {
            run,
            model,
            test,
            baseline,
            out,
        } => cmd_evaluate(&run.load()?, model.as_ref(), test.as_ref(), *baseline, out.as_ref()),
        Command::Ablate { run } => cmd_ablate(&run.load()?),
        Command::MatchTitles {
            run,
            index,
            queries,
            threshold,
        } => cmd_match_titles(&run.load()?, index.as_ref(), queries, *threshold),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(m) => eprintln!("error: {m}"),
                Failure::Missing { path, hint } => eprintln!("error: missing {} ({hint})", path.display()),
                Failure::Numeric(m) => eprintln!("error: numeric failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
