use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use relemb_core::corpus::{build_corpus, load_sentences, CorpusConfig, Strategy};
use relemb_core::error::ErrorClass;
use relemb_core::eval::{completion_tsv, CandidateFilter, CompletionMode, Gain, LinkGraph};
use relemb_core::kg::{build_kg, train_transh, TransHConfig, TripleStore};
use relemb_core::pipeline::{
    completion_queries, files_under, group_similarity, link_similarity, load_holdout, read_groups, run_pipeline,
    save_holdout, sequence_completion, sha256_file, split_database, token_completion, write_groups, RunConfig,
    RunManifest, StageTiming, DIRECTOR_PREFIX,
};
use relemb_core::schema::synth::{generate_synthetic, LinkParams, SynthParams};
use relemb_core::schema::{denormalize, load_database, write_database, Database, Schema};
use relemb_core::seq::{make_dataset, Catalog, FrozenTable, SeqConfig, SeqModel, Variant};
use relemb_core::sgns::{EmbeddingStore, SgnsConfig, Window};

#[derive(Parser, Debug)]
#[command(name = "relemb", version, about = "Entity embeddings for multi-table relational databases")]
struct Cli {
    /// Global random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 guarantees byte-identical outputs.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a CSV database and copy it into a run directory.
    Ingest(IngestArgs),
    /// Generate a planted-cluster synthetic database.
    Synth(SynthArgs),
    /// Withhold movies for director completion.
    Split(SplitArgs),
    /// Build a sentence corpus from the directors-rooted view.
    Corpus(CorpusArgs),
    /// Train skip-gram vectors on a corpus.
    TrainW2v(W2vArgs),
    /// Compile the view into a triple store.
    BuildKg(BuildKgArgs),
    /// Train TransH on a triple store.
    TrainTransh(TranshArgs),
    /// Train a recurrent director model.
    TrainLstm(LstmArgs),
    /// Director similarity evaluation.
    EvalSim(EvalSimArgs),
    /// Director completion evaluation.
    EvalComplete(EvalCompleteArgs),
    /// Combine evaluation tables into one markdown report.
    Report(ReportArgs),
    /// Run a configured pipeline end to end.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Schema config; the built-in movie schema when omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Directory of `<table>.csv` files.
    #[arg(long)]
    data: PathBuf,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<(Schema, Database)> {
        let schema = load_schema(self.schema.as_deref())?;
        let db = load_database(&schema, &self.data)?;
        Ok((schema, db))
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.schema.iter().cloned().chain([self.data.clone()]).collect()
    }
}

fn load_schema(path: Option<&Path>) -> anyhow::Result<Schema> {
    Ok(match path {
        Some(p) => Schema::from_file(p)?,
        None => Schema::imdb(),
    })
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Link graph file to validate and copy.
    #[arg(long)]
    links: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    directors: usize,
    #[arg(long, default_value_t = 10)]
    clusters: usize,
    #[arg(long, default_value_t = 20)]
    genres: usize,
    #[arg(long, default_value_t = 6)]
    min_movies: usize,
    #[arg(long, default_value_t = 12)]
    max_movies: usize,
    #[arg(long, default_value_t = 600)]
    actors: usize,
    /// Probability that a cast slot is drawn from the cluster's actors.
    #[arg(long, default_value_t = 0.7)]
    actor_affinity: f64,
    /// Width in years of each cluster's active era.
    #[arg(long, default_value_t = 20)]
    era_width: i32,
    /// Fraction of directors present in the link graph.
    #[arg(long, default_value_t = 0.5)]
    link_coverage: f64,
    /// Output directory: schema.toml, data/, links.tsv, clusters.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// random20 or time (latest 20% by year).
    #[arg(long, default_value = "random20")]
    mode: CompletionMode,
    /// Output directory: train/ and holdout.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    #[command(flatten)]
    data: DataArgs,
    /// base, genre or movierank.
    #[arg(long, default_value = "base")]
    strategy: Strategy,
    /// Draws per director for each sampled column.
    #[arg(long, default_value_t = 6)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct W2vArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// `full` (whole sentence) or a context radius such as 5.
    #[arg(long, default_value = "full")]
    window: Window,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 0.025)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Frequent-token subsampling threshold (off by default).
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BuildKgArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TranshArgs {
    #[arg(long)]
    triples: PathBuf,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Output directory: entities.txt, relations.txt, epochs.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LstmArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Token vectors for actors, roles, genres, years and ranks.
    #[arg(long)]
    embeddings: PathBuf,
    /// plain, joint, actor-avg, actor-concat or popular.
    #[arg(long, default_value = "joint")]
    variant: Variant,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    /// Hidden width; the embedding width when omitted.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = 6)]
    min_movies: usize,
    /// Draw fresh negatives at every step.
    #[arg(long)]
    resample_negatives: bool,
    #[arg(long)]
    out: PathBuf,
}

fn named_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.to_string(), PathBuf::from(p))),
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

#[derive(Args, Debug)]
struct EvalSimArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Embedding stores to compare, as NAME=PATH (repeatable).
    #[arg(long = "model", value_parser = named_path, required = true)]
    models: Vec<(String, PathBuf)>,
    /// Link graph for relatedness gold lists.
    #[arg(long, conflicts_with = "clusters", required_unless_present = "clusters")]
    links: Option<PathBuf>,
    /// Planted groups (`entity<TAB>group`) used as gold instead of links.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// none, wiki or min5movies.
    #[arg(long, default_value = "none")]
    filter: CandidateFilter,
    #[arg(long, default_value_t = 63)]
    queries: usize,
    /// linear or exponential.
    #[arg(long, default_value = "linear")]
    gain: Gain,
    /// Output directory: similarity.tsv, significance.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalCompleteArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Training split written by `split`.
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    holdout: PathBuf,
    /// Token embedding models, as NAME=PATH (repeatable).
    #[arg(long = "w2v", value_parser = named_path)]
    w2v: Vec<(String, PathBuf)>,
    /// Recurrent models, as NAME=PATH (repeatable).
    #[arg(long = "lstm", value_parser = named_path)]
    lstm: Vec<(String, PathBuf)>,
    /// random20 or time.
    #[arg(long, default_value = "random20")]
    mode: CompletionMode,
    #[arg(long, default_value_t = 99)]
    negatives: usize,
    /// Look-back window for time mode.
    #[arg(long, default_value_t = 20)]
    window_years: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Tables to include, as TITLE=PATH (repeatable).
    #[arg(long = "table", value_parser = named_path, required = true)]
    tables: Vec<(String, PathBuf)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML run config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(match e.chain().find_map(ErrorClass::of) {
                Some(ErrorClass::Usage) => 1,
                Some(ErrorClass::Numeric) => 3,
                _ => 2,
            })
        }
    }
}

/// Records a subcommand's inputs, outputs and timing next to its output.
struct Sidecar {
    manifest: RunManifest,
    started: Instant,
}

impl Sidecar {
    fn new(cli_seed: u64, workers: usize, snapshot: String, inputs: &[PathBuf]) -> anyhow::Result<Self> {
        let mut manifest = RunManifest::new(cli_seed, workers, snapshot);
        for p in inputs {
            manifest.add_input(p)?;
        }
        Ok(Sidecar {
            manifest,
            started: Instant::now(),
        })
    }

    /// `out` is the primary output: a file gets `<out>.manifest.json`, a
    /// directory gets `manifest.json` inside it.
    fn finish(mut self, stage: relemb_core::pipeline::Stage, out: &Path) -> anyhow::Result<()> {
        self.manifest.timings.push(StageTiming {
            stage,
            seconds: self.started.elapsed().as_secs_f64(),
        });
        let target = if out.is_dir() {
            out.join("manifest.json")
        } else {
            let mut s = out.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        };
        for f in files_under(out)? {
            if f != target {
                self.manifest.outputs.insert(f.display().to_string(), sha256_file(&f)?);
            }
        }
        self.manifest.save(&target)?;
        Ok(())
    }
}

fn parent_dir(p: &Path) -> anyhow::Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(())
}

fn write_file(p: &Path, text: &str) -> anyhow::Result<()> {
    parent_dir(p)?;
    fs::write(p, text).with_context(|| format!("writing {}", p.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    use relemb_core::pipeline::Stage;
    if cli.workers == 0 {
        return Err(relemb_core::Error::Config("--workers must be >= 1".into()).into());
    }
    rayon_pool(cli.workers)?;
    let (seed, workers) = (cli.seed, cli.workers);
    let snapshot = format!("{:?}", cli.command);
    match cli.command {
        Command::Ingest(a) => {
            let mut inputs = a.data.inputs();
            inputs.extend(a.links.iter().cloned());
            let sc = Sidecar::new(seed, workers, snapshot, &inputs)?;
            let (schema, db) = a.data.load()?;
            let dangling = db.dangling_refs(&schema);
            if let Some(first) = dangling.first() {
                bail!(relemb_core::Error::Config(format!(
                    "{} dangling foreign keys, first: {first:?}",
                    dangling.len()
                )));
            }
            fs::create_dir_all(&a.out)?;
            write_file(&a.out.join("schema.toml"), &schema.to_config_text())?;
            write_database(&schema, &db, a.out.join("data"))?;
            if let Some(l) = &a.links {
                LinkGraph::load(l)?.save(a.out.join("links.tsv"))?;
            }
            eprintln!("ingested {} rows", db.row_count());
            sc.finish(Stage::Ingest, &a.out)
        }
        Command::Synth(a) => {
            let sc = Sidecar::new(seed, workers, snapshot, &[])?;
            let params = SynthParams {
                directors: a.directors,
                clusters: a.clusters,
                genres: a.genres,
                min_movies: a.min_movies,
                max_movies: a.max_movies,
                actors: a.actors,
                actor_affinity: a.actor_affinity,
                era_width: a.era_width,
                ..SynthParams::default()
            };
            let s = generate_synthetic(seed, &params)?;
            fs::create_dir_all(&a.out)?;
            write_file(&a.out.join("schema.toml"), &s.schema.to_config_text())?;
            write_database(&s.schema, &s.database, a.out.join("data"))?;
            let links = s.link_graph(&LinkParams {
                coverage: a.link_coverage,
                ..LinkParams::default()
            });
            links.save(a.out.join("links.tsv"))?;
            let mut buf = Vec::new();
            write_groups(&s.cluster_members(), &mut buf)?;
            fs::write(a.out.join("clusters.tsv"), buf)?;
            sc.finish(Stage::Ingest, &a.out)
        }
        Command::Split(a) => {
            let sc = Sidecar::new(seed, workers, snapshot, &a.data.inputs())?;
            let (schema, db) = a.data.load()?;
            let (train, holdout) = split_database(&schema, &db, a.mode, seed)?;
            fs::create_dir_all(&a.out)?;
            write_database(&schema, &train, a.out.join("train"))?;
            save_holdout(&holdout, a.out.join("holdout.tsv"))?;
            eprintln!("withheld {} movies", holdout.len());
            sc.finish(Stage::Split, &a.out)
        }
        Command::Corpus(a) => {
            let sc = Sidecar::new(seed, workers, snapshot, &a.data.inputs())?;
            let (schema, db) = a.data.load()?;
            let view = denormalize(&db, &schema, "directors")?;
            let cfg = CorpusConfig {
                samples: a.samples,
                ..CorpusConfig::new(a.strategy, seed)
            };
            let c = build_corpus(&view, &cfg)?;
            parent_dir(&a.out)?;
            c.save(&a.out)?;
            eprintln!("{} sentences, {} tokens", c.sentences.len(), c.token_count());
            sc.finish(Stage::Corpus, &a.out)
        }
        Command::TrainW2v(a) => {
            let sc = Sidecar::new(seed, workers, snapshot, std::slice::from_ref(&a.corpus))?;
            let sentences = load_sentences(&a.corpus)?;
            let cfg = SgnsConfig {
                dim: a.dim,
                epochs: a.epochs,
                window: a.window,
                negatives: a.negatives,
                alpha: a.alpha,
                min_count: a.min_count,
                subsample: a.subsample,
                seed,
                workers,
                ..SgnsConfig::default()
            };
            let m = relemb_core::sgns::train(&sentences, &cfg)?;
            parent_dir(&a.out)?;
            m.store.save(&a.out)?;
            for (i, l) in m.epoch_losses.iter().enumerate() {
                eprintln!("epoch {}\tloss {l:.6}", i + 1);
            }
            sc.finish(Stage::TrainW2v, &a.out)
        }
        Command::BuildKg(a) => {
            let sc = Sidecar::new(seed, workers, snapshot, &a.data.inputs())?;
            let (schema, db) = a.data.load()?;
            let view = denormalize(&db, &schema, "directors")?;
            let store = build_kg(&view)?;
            parent_dir(&a.out)?;
            store.save(&a.out)?;
            eprintln!(
                "{} triples, {} entities, {} relations",
                store.len(),
                store.entities().len(),
                store.relations().len()
            );
            sc.finish(Stage::BuildKg, &a.out)
        }
        Command::TrainTransh(a) => {
            let sc = Sidecar::new(seed, workers, snapshot, std::slice::from_ref(&a.triples))?;
            let store = TripleStore::load(&a.triples)?;
            let cfg = TransHConfig {
                dim: a.dim,
                epochs: a.epochs,
                lr: a.lr,
                margin: a.margin,
                seed,
            };
            let (m, reports) = train_transh(&store, &cfg)?;
            fs::create_dir_all(&a.out)?;
            m.save(a.out.join("entities.txt"), a.out.join("relations.txt"))?;
            let t = relemb_core::kg::epochs_tsv(&reports);
            write_file(&a.out.join("epochs.tsv"), &t)?;
            sc.finish(Stage::TrainTransh, &a.out)
        }
        Command::TrainLstm(a) => {
            let mut inputs = a.data.inputs();
            inputs.push(a.embeddings.clone());
            let sc = Sidecar::new(seed, workers, snapshot, &inputs)?;
            let (schema, db) = a.data.load()?;
            let catalog = Catalog::from_database(&schema, &db)?;
            let store = EmbeddingStore::load(&a.embeddings)?;
            let table = FrozenTable::build(&store, &catalog, seed);
            let cfg = SeqConfig {
                variant: a.variant,
                negatives: a.negatives,
                lr: a.lr,
                batch: a.batch,
                hidden: a.hidden,
                seed,
                epochs: a.epochs,
                patience: a.patience,
                min_movies: a.min_movies,
                resample_negatives: a.resample_negatives,
                ..SeqConfig::default()
            };
            cfg.validate().map_err(relemb_core::Error::from)?;
            let dataset = make_dataset(&catalog, cfg.min_movies)?;
            let (m, report) = relemb_core::seq::train(&dataset, &catalog, &table, &cfg)?;
            parent_dir(&a.out)?;
            m.save(&a.out)?;
            let mut t = String::from("epoch\ttrain_loss\tvalid_loss\n");
            for (i, e) in report.epochs.iter().enumerate() {
                let v = e.valid_loss.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
                t += &format!("{}\t{}\t{v}\n", i + 1, e.train_loss);
            }
            let mut log = a.out.as_os_str().to_owned();
            log.push(".epochs.tsv");
            write_file(Path::new(&log), &t)?;
            eprintln!(
                "best epoch {} of {}, test loss {}",
                report.best_epoch + 1,
                report.epochs.len(),
                report.test_loss.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into())
            );
            sc.finish(Stage::TrainLstm, &a.out)
        }
        Command::EvalSim(a) => {
            let mut inputs = a.data.inputs();
            inputs.extend(a.models.iter().map(|(_, p)| p.clone()));
            inputs.extend(a.links.iter().chain(&a.clusters).cloned());
            let sc = Sidecar::new(seed, workers, snapshot, &inputs)?;
            let stores: Vec<(String, EmbeddingStore)> = a
                .models
                .iter()
                .map(|(n, p)| Ok((n.clone(), EmbeddingStore::load(p)?)))
                .collect::<anyhow::Result<_>>()?;
            let refs: Vec<(String, &EmbeddingStore)> = stores.iter().map(|(n, s)| (n.clone(), s)).collect();
            let report = match (&a.links, &a.clusters) {
                (Some(l), _) => {
                    let (schema, db) = a.data.load()?;
                    let counts = Catalog::from_database(&schema, &db)?.movie_counts();
                    let graph = LinkGraph::load(l)?;
                    link_similarity(&refs, DIRECTOR_PREFIX, &graph, &counts, a.queries, a.filter, a.gain)?
                }
                (None, Some(c)) => {
                    let f = fs::File::open(c).with_context(|| format!("opening {}", c.display()))?;
                    let groups = read_groups(std::io::BufReader::new(f))?;
                    group_similarity(&refs, DIRECTOR_PREFIX, &groups, a.gain)?
                }
                (None, None) => unreachable!("clap requires one gold source"),
            };
            fs::create_dir_all(&a.out)?;
            let summary = report.summary_tsv();
            write_file(&a.out.join("similarity.tsv"), &summary)?;
            write_file(&a.out.join("significance.tsv"), &report.significance_tsv())?;
            print!("{summary}");
            sc.finish(Stage::EvalSim, &a.out)
        }
        Command::EvalComplete(a) => {
            let mut inputs = a.data.inputs();
            inputs.extend([a.train.clone(), a.holdout.clone()]);
            inputs.extend(a.w2v.iter().chain(&a.lstm).map(|(_, p)| p.clone()));
            let sc = Sidecar::new(seed, workers, snapshot, &inputs)?;
            if a.w2v.is_empty() && a.lstm.is_empty() {
                bail!(relemb_core::Error::Config("give at least one --w2v or --lstm model".into()));
            }
            let (schema, full_db) = a.data.load()?;
            let full = Catalog::from_database(&schema, &full_db)?;
            let train = Catalog::from_database(&schema, &load_database(&schema, &a.train)?)?;
            let queries = completion_queries(&load_holdout(&a.holdout)?);
            let pool: Vec<String> = train.directors().map(str::to_string).collect();
            let mut results = Vec::new();
            for (name, p) in &a.w2v {
                let store = EmbeddingStore::load(p)?;
                results.push(token_completion(
                    name,
                    &store,
                    DIRECTOR_PREFIX,
                    &full,
                    a.mode,
                    &queries,
                    &pool,
                    a.negatives,
                    seed,
                )?);
            }
            for (name, p) in &a.lstm {
                let m = SeqModel::load(p)?;
                results.push(sequence_completion(
                    name,
                    &m,
                    &train,
                    &full,
                    a.mode,
                    &queries,
                    &pool,
                    a.negatives,
                    seed,
                    a.window_years,
                )?);
            }
            let tsv = completion_tsv(&results);
            write_file(&a.out, &tsv)?;
            print!("{tsv}");
            sc.finish(Stage::EvalComplete, &a.out)
        }
        Command::Report(a) => {
            let inputs: Vec<PathBuf> = a.tables.iter().map(|(_, p)| p.clone()).collect();
            let sc = Sidecar::new(seed, workers, snapshot, &inputs)?;
            let mut text = String::from("# relemb report\n");
            for (title, p) in &a.tables {
                let body = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                text += &format!("\n## {title}\n\n```\n{body}```\n");
            }
            write_file(&a.out, &text)?;
            sc.finish(Stage::Report, &a.out)
        }
        Command::Run(a) => {
            let mut cfg = RunConfig::from_file(&a.config)?;
            if let Some(o) = a.out {
                cfg.out_dir = o;
            }
            // Flags given on the command line win over the file.
            if std::env::args().any(|s| s == "--seed" || s.starts_with("--seed=")) {
                cfg.seed = seed;
            }
            if std::env::args().any(|s| s == "--workers" || s.starts_with("--workers=")) {
                cfg.workers = workers;
            }
            let m = run_pipeline(&cfg)?;
            for t in &m.timings {
                eprintln!("{}\t{:.2}s", t.stage, t.seconds);
            }
            Ok(())
        }
    }
}

fn rayon_pool(workers: usize) -> anyhow::Result<()> {
    // Every parallel reduction is order-fixed, so the pool size only
    // affects speed, except for skip-gram training with workers > 1.
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .context("starting worker pool")
}
