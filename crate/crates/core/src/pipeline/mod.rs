//! End-to-end runs: config, stage orchestration and run manifests.
//!
//! Every stage reads its inputs from and writes its outputs to the run's
//! output directory, so a later run can start at any stage and reuse the
//! artifacts of an earlier one.

pub mod tasks;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{build_corpus, load_sentences, CorpusConfig, SamplingColumns, Strategy};
use crate::eval::{completion_tsv, CandidateFilter, CompletionMode, Gain, LinkGraph};
use crate::kg::{build_kg, train_transh, TransHConfig, TransHModel, TripleStore};
use crate::schema::synth::{generate_synthetic, LinkParams, SynthParams};
use crate::schema::{denormalize, load_database, write_database, Database, Schema};
use crate::seq::{make_dataset, Catalog, FrozenTable, SeqConfig, SeqModel, Variant};
use crate::sgns::{EmbeddingStore, SgnsConfig};
use crate::{Error, Result};

pub use tasks::*;

/// Token prefix of director entities in every embedding store.
pub const DIRECTOR_PREFIX: &str = "director=";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Split,
    Corpus,
    TrainW2v,
    BuildKg,
    TrainTransh,
    TrainLstm,
    EvalSim,
    EvalComplete,
    Report,
}

impl Stage {
    /// Dependency order.
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Split,
        Stage::Corpus,
        Stage::TrainW2v,
        Stage::BuildKg,
        Stage::TrainTransh,
        Stage::TrainLstm,
        Stage::EvalSim,
        Stage::EvalComplete,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::Corpus => "corpus",
            Stage::TrainW2v => "train-w2v",
            Stage::BuildKg => "build-kg",
            Stage::TrainTransh => "train-transh",
            Stage::TrainLstm => "train-lstm",
            Stage::EvalSim => "eval-sim",
            Stage::EvalComplete => "eval-complete",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Schema config; the built-in movie schema when absent.
    pub schema: Option<PathBuf>,
    /// Directory of `<table>.csv` files; synthetic data when absent.
    pub dir: Option<PathBuf>,
    /// Link graph file; synthesized from the planted clusters for synthetic
    /// data when absent.
    pub links: Option<PathBuf>,
    pub synth: SynthParams,
    pub link_params: LinkParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldSource {
    /// Milne-Witten neighbours in the link graph.
    #[default]
    Links,
    /// Planted cluster membership (synthetic data only).
    Clusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub strategies: Vec<Strategy>,
    pub samples: usize,
    pub columns: SamplingColumns,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            strategies: vec![Strategy::Base, Strategy::Genre, Strategy::MovieRank],
            samples: 6,
            columns: SamplingColumns::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmSection {
    pub variants: Vec<Variant>,
    #[serde(flatten)]
    pub config: SeqConfig,
}

impl Default for LstmSection {
    fn default() -> Self {
        LstmSection {
            variants: Variant::ALL.to_vec(),
            config: SeqConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub gold: GoldSource,
    pub filter: CandidateFilter,
    pub queries: usize,
    pub gain: Gain,
    pub negatives: usize,
    pub mode: CompletionMode,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            gold: GoldSource::Links,
            filter: CandidateFilter::None,
            queries: 63,
            gain: Gain::Linear,
            negatives: 99,
            mode: CompletionMode::Random20,
        }
    }
}

/// A full run. The global seed and worker count override those of every
/// section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Stages to execute; all of them when empty.
    pub stages: Vec<Stage>,
    pub data: DataConfig,
    pub corpus: CorpusSection,
    pub w2v: SgnsConfig,
    pub transh: TransHConfig,
    pub lstm: LstmSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 1,
            out_dir: PathBuf::from("run"),
            stages: Vec::new(),
            data: DataConfig::default(),
            corpus: CorpusSection::default(),
            w2v: SgnsConfig::default(),
            transh: TransHConfig::default(),
            lstm: LstmSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Stages in dependency order.
    pub fn planned_stages(&self) -> Vec<Stage> {
        let mut s = if self.stages.is_empty() {
            Stage::ALL.to_vec()
        } else {
            self.stages.clone()
        };
        s.sort();
        s.dedup();
        s
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        for (what, p) in [
            ("schema", &self.data.schema),
            ("data dir", &self.data.dir),
            ("links", &self.data.links),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::Config(format!("{what} path `{}` does not exist", p.display())));
                }
            }
        }
        if let Some(p) = &self.data.schema {
            Schema::from_file(p)?;
        }
        if self.corpus.strategies.is_empty() {
            return Err(Error::Config("corpus.strategies is empty".into()));
        }
        if self.lstm.variants.is_empty() {
            return Err(Error::Config("lstm.variants is empty".into()));
        }
        if self.eval.gold == GoldSource::Clusters && self.data.dir.is_some() {
            return Err(Error::Config("cluster gold needs synthetic data".into()));
        }
        self.sgns_config().validate()?;
        self.transh_config().validate()?;
        self.seq_config(Variant::Joint).validate()?;
        Ok(())
    }

    pub fn sgns_config(&self) -> SgnsConfig {
        SgnsConfig {
            seed: self.seed,
            workers: self.workers,
            ..self.w2v.clone()
        }
    }

    pub fn transh_config(&self) -> TransHConfig {
        TransHConfig {
            seed: self.seed,
            ..self.transh.clone()
        }
    }

    pub fn seq_config(&self, variant: Variant) -> SeqConfig {
        SeqConfig {
            variant,
            seed: self.seed,
            ..self.lstm.config.clone()
        }
    }

    pub fn corpus_config(&self, strategy: Strategy) -> CorpusConfig {
        CorpusConfig {
            samples: self.corpus.samples,
            columns: self.corpus.columns.clone(),
            ..CorpusConfig::new(strategy, self.seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub manifest_version: u32,
    pub seed: u64,
    pub workers: usize,
    /// The effective config, as TOML.
    pub config: String,
    /// sha256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every output file, keyed by path relative to the output dir.
    pub outputs: BTreeMap<String, String>,
    pub timings: Vec<StageTiming>,
    pub status: RunStatus,
    pub error: Option<String>,
    /// Outputs of the failed stage, which may be incomplete.
    pub stale: Vec<String>,
}

impl RunManifest {
    pub fn new(seed: u64, workers: usize, config: String) -> Self {
        RunManifest {
            tool: "relemb".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            manifest_version: MANIFEST_VERSION,
            seed,
            workers,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings: Vec::new(),
            status: RunStatus::Ok,
            error: None,
            stale: Vec::new(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Records the checksum of `path` (a file, or every file below a dir).
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        for f in files_under(path)? {
            self.inputs.insert(f.display().to_string(), sha256_file(&f)?);
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `path` itself if it is a file, else every file below it, sorted.
pub fn files_under(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
            .collect::<Result<_>>()?;
        entries.sort();
        for e in entries {
            out.extend(files_under(&e)?);
        }
    }
    Ok(out)
}

/// Artifact layout of a run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunPaths { root: root.into() }
    }
    pub fn schema(&self) -> PathBuf {
        self.root.join("schema.toml")
    }
    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }
    pub fn links(&self) -> PathBuf {
        self.root.join("links.tsv")
    }
    pub fn clusters(&self) -> PathBuf {
        self.root.join("clusters.tsv")
    }
    pub fn train_data(&self) -> PathBuf {
        self.root.join("train")
    }
    pub fn holdout(&self) -> PathBuf {
        self.root.join("holdout.tsv")
    }
    pub fn corpus(&self, name: &str) -> PathBuf {
        self.root.join("corpus").join(format!("{name}.txt"))
    }
    pub fn w2v(&self, name: &str) -> PathBuf {
        self.root.join("w2v").join(format!("{name}.txt"))
    }
    pub fn triples(&self) -> PathBuf {
        self.root.join("kg").join("triples.tsv")
    }
    pub fn transh(&self) -> (PathBuf, PathBuf) {
        (
            self.root.join("kg").join("entities.txt"),
            self.root.join("kg").join("relations.txt"),
        )
    }
    pub fn transh_epochs(&self) -> PathBuf {
        self.root.join("kg").join("epochs.tsv")
    }
    pub fn lstm(&self, v: Variant) -> PathBuf {
        self.root.join("lstm").join(format!("{v}.bin"))
    }
    pub fn lstm_report(&self, v: Variant) -> PathBuf {
        self.root.join("lstm").join(format!("{v}.json"))
    }
    pub fn sim_summary(&self) -> PathBuf {
        self.root.join("eval").join("similarity.tsv")
    }
    pub fn sim_significance(&self) -> PathBuf {
        self.root.join("eval").join("significance.tsv")
    }
    pub fn completion(&self) -> PathBuf {
        self.root.join("eval").join("completion.tsv")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.md")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

/// Name of the genre-sampled embedding trained on the training split; it
/// feeds completion and the recurrent models' token table.
pub const TRAIN_CORPUS: &str = "train-genre";

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    paths: RunPaths,
    /// Outputs written by the current stage.
    touched: Vec<PathBuf>,
}

impl Runner<'_> {
    fn out(&mut self, p: PathBuf) -> Result<PathBuf> {
        create_parent(&p)?;
        self.touched.push(p.clone());
        Ok(p)
    }

    fn schema(&self) -> Result<Schema> {
        Schema::from_file(self.paths.schema())
    }

    fn database(&self, dir: &Path) -> Result<(Schema, Database)> {
        let schema = self.schema()?;
        let db = load_database(&schema, dir)?;
        Ok((schema, db))
    }

    fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Split => self.split(),
            Stage::Corpus => self.corpus(),
            Stage::TrainW2v => self.train_w2v(),
            Stage::BuildKg => self.build_kg(),
            Stage::TrainTransh => self.train_transh(),
            Stage::TrainLstm => self.train_lstm(),
            Stage::EvalSim => self.eval_sim(),
            Stage::EvalComplete => self.eval_complete(),
            Stage::Report => self.report(),
        }
    }

    fn ingest(&mut self) -> Result<()> {
        let d = &self.cfg.data;
        let schema_path = self.out(self.paths.schema())?;
        let data_dir = self.out(self.paths.data())?;
        let links_path = self.paths.links();
        match &d.dir {
            Some(dir) => {
                let schema = match &d.schema {
                    Some(p) => Schema::from_file(p)?,
                    None => Schema::imdb(),
                };
                let db = load_database(&schema, dir)?;
                let dangling = db.dangling_refs(&schema);
                if let Some(first) = dangling.first() {
                    return Err(Error::Config(format!(
                        "{} dangling foreign keys, first: {first:?}",
                        dangling.len()
                    )));
                }
                write_text(&schema_path, &schema.to_config_text())?;
                write_database(&schema, &db, &data_dir)?;
                if let Some(l) = &d.links {
                    let g = LinkGraph::load(l)?;
                    g.save(self.out(links_path)?)?;
                }
            }
            None => {
                let s = generate_synthetic(self.cfg.seed, &d.synth)?;
                write_text(&schema_path, &s.schema.to_config_text())?;
                write_database(&s.schema, &s.database, &data_dir)?;
                let g = match &d.links {
                    Some(l) => LinkGraph::load(l)?,
                    None => s.link_graph(&d.link_params),
                };
                g.save(self.out(links_path)?)?;
                let cp = self.out(self.paths.clusters())?;
                let f = fs::File::create(&cp).map_err(|e| Error::io(&cp, e))?;
                write_groups(&s.cluster_members(), std::io::BufWriter::new(f)).map_err(|e| Error::io(&cp, e))?;
            }
        }
        Ok(())
    }

    fn split(&mut self) -> Result<()> {
        let (schema, db) = self.database(&self.paths.data())?;
        let (train, holdout) = split_database(&schema, &db, self.cfg.eval.mode, self.cfg.seed)?;
        write_database(&schema, &train, self.out(self.paths.train_data())?)?;
        save_holdout(&holdout, self.out(self.paths.holdout())?)
    }

    fn corpus(&mut self) -> Result<()> {
        let (schema, db) = self.database(&self.paths.data())?;
        let view = denormalize(&db, &schema, "directors")?;
        for &s in &self.cfg.corpus.strategies {
            let c = build_corpus(&view, &self.cfg.corpus_config(s))?;
            c.save(self.out(self.paths.corpus(&s.to_string()))?)?;
        }
        if self.paths.train_data().is_dir() {
            let train = load_database(&schema, self.paths.train_data())?;
            let view = denormalize(&train, &schema, "directors")?;
            let c = build_corpus(&view, &self.cfg.corpus_config(Strategy::Genre))?;
            c.save(self.out(self.paths.corpus(TRAIN_CORPUS))?)?;
        }
        Ok(())
    }

    fn train_w2v(&mut self) -> Result<()> {
        let mut names: Vec<String> = self.cfg.corpus.strategies.iter().map(ToString::to_string).collect();
        if self.paths.corpus(TRAIN_CORPUS).is_file() {
            names.push(TRAIN_CORPUS.into());
        }
        let cfg = self.cfg.sgns_config();
        for name in names {
            let sentences = load_sentences(self.paths.corpus(&name))?;
            let m = crate::sgns::train(&sentences, &cfg)?;
            m.store.save(self.out(self.paths.w2v(&name))?)?;
        }
        Ok(())
    }

    fn build_kg(&mut self) -> Result<()> {
        let (schema, db) = self.database(&self.paths.data())?;
        let view = denormalize(&db, &schema, "directors")?;
        build_kg(&view)?.save(self.out(self.paths.triples())?)
    }

    fn train_transh(&mut self) -> Result<()> {
        let store = TripleStore::load(self.paths.triples())?;
        let (m, reports) = train_transh(&store, &self.cfg.transh_config())?;
        let (e, r) = self.paths.transh();
        m.save(self.out(e)?, self.out(r)?)?;
        let t = crate::kg::epochs_tsv(&reports);
        write_text(&self.out(self.paths.transh_epochs())?, &t)
    }

    fn seq_inputs(&self) -> Result<(Catalog, FrozenTable)> {
        let (schema, train) = self.database(&self.paths.train_data())?;
        let catalog = Catalog::from_database(&schema, &train)?;
        let store = EmbeddingStore::load(self.paths.w2v(TRAIN_CORPUS))?;
        let table = FrozenTable::build(&store, &catalog, self.cfg.seed);
        Ok((catalog, table))
    }

    fn train_lstm(&mut self) -> Result<()> {
        let (catalog, table) = self.seq_inputs()?;
        let dataset = make_dataset(&catalog, self.cfg.lstm.config.min_movies)?;
        for &v in &self.cfg.lstm.variants {
            let (m, report) = crate::seq::train(&dataset, &catalog, &table, &self.cfg.seq_config(v))?;
            m.save(self.out(self.paths.lstm(v))?)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            write_text(&self.out(self.paths.lstm_report(v))?, &(json + "\n"))?;
        }
        Ok(())
    }

    fn sim_models(&self) -> Result<Vec<(String, EmbeddingStore)>> {
        let mut models = Vec::new();
        for s in &self.cfg.corpus.strategies {
            let name = s.to_string();
            let p = self.paths.w2v(&name);
            if p.is_file() {
                models.push((format!("w2v-{name}"), EmbeddingStore::load(p)?));
            }
        }
        let (e, r) = self.paths.transh();
        if e.is_file() && r.is_file() {
            models.push(("transh".to_string(), TransHModel::load(&e, &r)?.entity_store()?));
        }
        if models.is_empty() {
            return Err(Error::Config("no trained embedding found for similarity evaluation".into()));
        }
        Ok(models)
    }

    fn eval_sim(&mut self) -> Result<()> {
        let models = self.sim_models()?;
        let refs: Vec<(String, &EmbeddingStore)> = models.iter().map(|(n, s)| (n.clone(), s)).collect();
        let e = &self.cfg.eval;
        let report = match e.gold {
            GoldSource::Links => {
                let (schema, db) = self.database(&self.paths.data())?;
                let counts = Catalog::from_database(&schema, &db)?.movie_counts();
                let graph = LinkGraph::load(self.paths.links())?;
                link_similarity(&refs, DIRECTOR_PREFIX, &graph, &counts, e.queries, e.filter, e.gain)?
            }
            GoldSource::Clusters => {
                let p = self.paths.clusters();
                let f = fs::File::open(&p).map_err(|err| Error::io(&p, err))?;
                let groups = read_groups(std::io::BufReader::new(f))?;
                group_similarity(&refs, DIRECTOR_PREFIX, &groups, e.gain)?
            }
        };
        write_text(&self.out(self.paths.sim_summary())?, &report.summary_tsv())?;
        write_text(&self.out(self.paths.sim_significance())?, &report.significance_tsv())
    }

    fn eval_complete(&mut self) -> Result<()> {
        let (schema, full_db) = self.database(&self.paths.data())?;
        let full = Catalog::from_database(&schema, &full_db)?;
        let (train, _) = self.seq_inputs()?;
        let holdout = load_holdout(self.paths.holdout())?;
        let queries = completion_queries(&holdout);
        let pool: Vec<String> = train.directors().map(str::to_string).collect();
        let e = &self.cfg.eval;
        let mut results = Vec::new();
        let w2v = EmbeddingStore::load(self.paths.w2v(TRAIN_CORPUS))?;
        results.push(token_completion(
            "w2v-genre",
            &w2v,
            DIRECTOR_PREFIX,
            &full,
            e.mode,
            &queries,
            &pool,
            e.negatives,
            self.cfg.seed,
        )?);
        for &v in &self.cfg.lstm.variants {
            let p = self.paths.lstm(v);
            if !p.is_file() {
                continue;
            }
            let m = SeqModel::load(p)?;
            results.push(sequence_completion(
                &format!("lstm-{v}"),
                &m,
                &train,
                &full,
                e.mode,
                &queries,
                &pool,
                e.negatives,
                self.cfg.seed,
                self.cfg.lstm.config.window_years,
            )?);
        }
        write_text(&self.out(self.paths.completion())?, &completion_tsv(&results))
    }

    fn report(&mut self) -> Result<()> {
        let mut text = format!("# relemb run (seed {})\n", self.cfg.seed);
        for (title, p) in [
            ("Similarity", self.paths.sim_summary()),
            ("Significance", self.paths.sim_significance()),
            ("Completion", self.paths.completion()),
        ] {
            if p.is_file() {
                let body = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                text += &format!("\n## {title}\n\n```\n{}```\n", body);
            }
        }
        write_text(&self.out(self.paths.report())?, &text)
    }
}

/// Runs the planned stages in order and writes `manifest.json` last, also
/// when a stage fails.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_stages(cfg))
}

fn run_stages(cfg: &RunConfig) -> Result<RunManifest> {
    let paths = RunPaths::new(&cfg.out_dir);
    fs::create_dir_all(&paths.root).map_err(|e| Error::io(&paths.root, e))?;
    let mut manifest = RunManifest::new(cfg.seed, cfg.workers, cfg.to_toml());
    for p in [&cfg.data.schema, &cfg.data.dir, &cfg.data.links].into_iter().flatten() {
        manifest.add_input(p)?;
    }
    let mut runner = Runner {
        cfg,
        paths: paths.clone(),
        touched: Vec::new(),
    };
    let mut failure = None;
    for stage in cfg.planned_stages() {
        runner.touched.clear();
        let t = Instant::now();
        let res = runner.run(stage);
        manifest.timings.push(StageTiming {
            stage,
            seconds: t.elapsed().as_secs_f64(),
        });
        if let Err(e) = res {
            manifest.stale = runner
                .touched
                .iter()
                .flat_map(|p| files_under(p).unwrap_or_default())
                .map(|p| relative(&paths.root, &p))
                .collect();
            failure = Some(Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            });
            break;
        }
    }
    for f in files_under(&paths.root)? {
        let rel = relative(&paths.root, &f);
        if rel != "manifest.json" {
            manifest.outputs.insert(rel, sha256_file(&f)?);
        }
    }
    if let Some(e) = &failure {
        manifest.status = RunStatus::Failed;
        manifest.error = Some(e.report());
    }
    manifest.save(paths.manifest())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn relative(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/")
}
