use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use readrank::harness::{
    self, evaluate_model, load_featurized, run_cross_corpus_from_config, run_cross_lingual_from_config,
    run_cv_from_config, ExperimentConfig, ExperimentReport,
};
use readrank::metrics::{evaluate_corpus, level_shift, render_table, MetricId, MetricReport};
use readrank::models::{Combiner, ModelFamily, ModelFile, TrainConfig};
use readrank::ranker::{rank_with_model, RankingInput, ScoredRanking};
use readrank::synth::{as_text_corpus, generate, SynthConfig};
use readrank::{build_pairset, compare_models, featurize, load_corpus, load_embeddings, CorpusFormat};

#[derive(Debug, Parser)]
#[command(name = "readrank", version, about = "Pairwise neural ranking for readability assessment")]
struct Cli {
    /// Experiment config (JSON); flags override its keys.
    #[arg(long, global = true, env = "READRANK_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embed document texts with a word-vector table.
    Featurize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        emb: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write the training pairs built from a corpus.
    Pairs {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        emb: Option<PathBuf>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train a model on a whole corpus.
    Train {
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        emb: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Per-epoch loss log (JSON).
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Rank documents with a trained model.
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        emb: Option<PathBuf>,
        /// Comma-separated doc ids to rank as one list.
        #[arg(long, value_delimiter = ',', conflicts_with = "slug")]
        docs: Vec<String>,
        /// Rank the members of one slug.
        #[arg(long)]
        slug: Option<String>,
    },
    /// Score a model (or precomputed rankings) on a corpus.
    Evaluate {
        #[arg(long, required_unless_present = "rankings")]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        emb: Option<PathBuf>,
        /// Rankings produced by `rank` (JSON lines, `-` for stdin).
        #[arg(long)]
        rankings: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Slug-level k-fold cross-validation.
    Cv {
        #[command(flatten)]
        exp: ExperimentFlags,
    },
    /// Train on one corpus, evaluate on another.
    Cross {
        #[command(flatten)]
        exp: ExperimentFlags,
    },
    /// Zero-shot transfer between languages sharing an embedding space.
    Crossling {
        #[command(flatten)]
        exp: ExperimentFlags,
        #[arg(long)]
        train_lang: Option<String>,
        #[arg(long)]
        test_lang: Option<String>,
    },
    /// Wilcoxon signed-rank comparison of two reports on one metric.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "ra")]
        metric: String,
    },
    /// Generate a synthetic leveled corpus.
    Synth {
        #[arg(long, default_value_t = 200)]
        slugs: usize,
        #[arg(long, default_value_t = 3)]
        levels_per_slug: usize,
        #[arg(long)]
        level_scale: Option<usize>,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        space_seed: u64,
        /// Rotation inside the difficulty plane, in degrees.
        #[arg(long, default_value_t = 0.0)]
        rotation: f64,
        /// Apply a random orthogonal map (unaligned space).
        #[arg(long)]
        random_rotation: bool,
        #[arg(long, default_value = "en")]
        lang: String,
        #[arg(long, default_value_t = 0.0)]
        lang_shift: f64,
        #[arg(long, default_value = "")]
        id_prefix: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Where to write the latent functional.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write texts plus this embedding table instead of inline vectors.
        #[arg(long)]
        emb_out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct TrainFlags {
    #[arg(long)]
    model: Option<ModelFamily>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    combiner: Option<String>,
}

#[derive(Debug, Args)]
struct ExperimentFlags {
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    test_corpus: Option<PathBuf>,
    #[arg(long)]
    emb: Option<PathBuf>,
    #[arg(long)]
    test_emb: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Report JSON; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Bad flags or inputs detected by the CLI itself.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (e.g. `| head`) is not a failure.
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        let kind = cause
            .downcast_ref::<io::Error>()
            .map(io::Error::kind)
            .or_else(|| cause.downcast_ref::<serde_json::Error>().and_then(serde_json::Error::io_error_kind));
        kind == Some(io::ErrorKind::BrokenPipe)
    })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(err) = cause.downcast_ref::<readrank::Error>() {
            return if err.is_validation() { 1 } else { 2 };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    match cli.command {
        Command::Featurize { corpus, emb, output } => {
            let c = load_corpus(&corpus, CorpusFormat::Jsonl)?;
            let table = load_embeddings(&emb)?;
            let out = featurize(&c, &table)?;
            out.save(&output)?;
            eprintln!("featurized {} documents (dim {})", out.len(), out.dim());
        }
        Command::Pairs { corpus, emb, m, seed, output } => {
            let c = load_corpus_with(&corpus, emb.as_deref().or(base.embeddings.as_deref()))?;
            let pairs = build_pairset(&c, m.unwrap_or(base.m), seed.unwrap_or(base.seed))?;
            with_output(output.as_deref(), |w| Ok(pairs.write_jsonl(w)?))?;
            eprintln!("{} pairs from {} slugs", pairs.len(), pairs.source_slugs.len());
        }
        Command::Train { train, corpus, emb, output, loss_log } => {
            let mut cfg = base;
            train.apply(&mut cfg)?;
            let corpus = corpus.or(cfg.train_corpus.clone()).ok_or_else(|| usage("--corpus is required"))?;
            cfg.train_corpus = Some(corpus.clone());
            if emb.is_some() {
                cfg.embeddings = emb;
            }
            cfg.validate()?;
            let c = load_featurized(&corpus, cfg.embeddings.as_deref())?;
            let train_cfg = TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
            print_json(&cfg)?;
            let trained = harness::train_model(cfg.model, &c, &train_cfg, cfg.m, cfg.seed)?;
            let file = ModelFile {
                format_version: ModelFile::FORMAT_VERSION,
                seed: cfg.seed,
                m: cfg.m,
                config: train_cfg,
                model: trained.model,
                log: trained.log,
            };
            file.save(&output)?;
            if let Some(p) = loss_log {
                write_json(&p, &file.log)?;
            }
            if let Some(last) = file.log.epoch_losses.last() {
                eprintln!("trained {} for {} epochs, final loss {last:.6}", cfg.model, file.log.epoch_losses.len());
            }
        }
        Command::Rank { model, corpus, emb, docs, slug } => {
            let mf = ModelFile::load(&model)?;
            let c = load_corpus_with(&corpus, emb.as_deref())?;
            let out = io::stdout();
            let mut w = out.lock();
            if !docs.is_empty() || slug.is_some() {
                let input = match &slug {
                    Some(s) => RankingInput::from_slug(&c, s)?,
                    None => RankingInput::new(&c, docs)?,
                };
                let ranking = rank_with_model(&mf.model, &input)?;
                let line = RankOutput::new(slug, &input, ranking);
                serde_json::to_writer(&mut w, &line)?;
                writeln!(w)?;
            } else {
                // One line per rankable slug, the input `evaluate --rankings` expects.
                for s in c.rankable_slugs() {
                    let input = RankingInput::from_slug(&c, &s.slug_id)?;
                    let ranking = rank_with_model(&mf.model, &input)?;
                    serde_json::to_writer(&mut w, &RankOutput::new(Some(s.slug_id.clone()), &input, ranking))?;
                    writeln!(w)?;
                }
            }
        }
        Command::Evaluate { model, corpus, emb, rankings, output } => {
            let c = load_corpus_with(&corpus, emb.as_deref().or(base.embeddings.as_deref()))?;
            let report = match rankings {
                Some(p) => evaluate_corpus(&read_rankings(&p)?, &c, &base.metrics)?,
                None => {
                    let mf = ModelFile::load(model.as_ref().expect("clap enforces --model"))?;
                    evaluate_model(&mf.model, &c, &base.metrics, level_shift(&c))?.report
                }
            };
            eprint!("{}", render_table(&[("model", &report)]));
            emit(output.as_deref(), &report)?;
        }
        Command::Cv { exp } => {
            let cfg = exp.resolve(base)?;
            let report = run_cv_from_config(&cfg)?;
            finish(&report, exp.output.as_deref())?;
        }
        Command::Cross { exp } => {
            let cfg = exp.resolve(base)?;
            require_test_corpus(&cfg)?;
            let report = run_cross_corpus_from_config(&cfg)?;
            finish(&report, exp.output.as_deref())?;
        }
        Command::Crossling { exp, train_lang, test_lang } => {
            let mut cfg = exp.resolve(base)?;
            cfg.train_lang = train_lang.or(cfg.train_lang);
            cfg.test_lang = test_lang.or(cfg.test_lang);
            require_test_corpus(&cfg)?;
            let report = run_cross_lingual_from_config(&cfg)?;
            finish(&report, exp.output.as_deref())?;
        }
        Command::Compare { a, b, metric } => {
            let metric: MetricId = metric.parse()?;
            let result = compare_models(&read_report(&a)?, &read_report(&b)?, metric)?;
            print_json(&result)?;
        }
        Command::Synth {
            slugs,
            levels_per_slug,
            level_scale,
            dim,
            noise,
            seed,
            space_seed,
            rotation,
            random_rotation,
            lang,
            lang_shift,
            id_prefix,
            output,
            truth,
            emb_out,
        } => {
            let cfg = SynthConfig {
                slugs,
                levels_per_slug,
                level_scale,
                dim,
                noise,
                seed,
                space_seed,
                rotation_deg: rotation,
                random_rotation,
                lang,
                lang_shift,
                id_prefix,
                ..Default::default()
            };
            let (corpus, functional) = generate(&cfg)?;
            match emb_out {
                Some(p) => {
                    let (text, table) = as_text_corpus(&corpus)?;
                    text.save(&output)?;
                    let file = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                    let mut w = BufWriter::new(file);
                    table.write_text(&mut w)?;
                    w.flush()?;
                }
                None => corpus.save(&output)?,
            }
            if let Some(p) = truth {
                write_json(&p, &functional)?;
            }
            eprintln!("wrote {} documents in {} slugs", corpus.len(), slugs);
        }
    }
    Ok(())
}

impl TrainFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) -> anyhow::Result<()> {
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        let t = &mut cfg.train;
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.hidden {
            t.hidden = v;
        }
        if let Some(v) = self.l2 {
            t.l2 = v;
        }
        if let Some(c) = &self.combiner {
            t.combiner = serde_json::from_value::<Combiner>(serde_json::Value::String(c.clone()))
                .map_err(|_| usage(format!("unknown combiner {c:?} (expected concat-diff or concat)")))?;
        }
        Ok(())
    }
}

impl ExperimentFlags {
    fn resolve(&self, mut cfg: ExperimentConfig) -> anyhow::Result<ExperimentConfig> {
        self.train.apply(&mut cfg)?;
        let paths = [
            (&self.corpus, &mut cfg.train_corpus),
            (&self.test_corpus, &mut cfg.test_corpus),
            (&self.emb, &mut cfg.embeddings),
            (&self.test_emb, &mut cfg.test_embeddings),
        ];
        for (flag, slot) in paths {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if cfg.train_corpus.is_none() {
            return Err(usage("--corpus is required"));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn require_test_corpus(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    if cfg.test_corpus.is_none() {
        return Err(usage("--test-corpus is required"));
    }
    Ok(())
}

fn load_corpus_with(corpus: &Path, emb: Option<&Path>) -> anyhow::Result<readrank::Corpus> {
    Ok(load_featurized(corpus, emb)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct RankOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slug: Option<String>,
    input: Vec<String>,
    scores: BTreeMap<String, f64>,
    order: Vec<String>,
}

impl RankOutput {
    fn new(slug: Option<String>, input: &RankingInput, ranking: ScoredRanking) -> Self {
        RankOutput {
            slug,
            input: input.doc_ids().to_vec(),
            scores: ranking.scores,
            order: ranking.order,
        }
    }
}

fn read_rankings(path: &Path) -> anyhow::Result<BTreeMap<String, ScoredRanking>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        ))
    };
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RankOutput =
            serde_json::from_str(&line).map_err(|e| usage(format!("rankings line {}: {e}", i + 1)))?;
        let slug = r.slug.ok_or_else(|| usage(format!("rankings line {} has no slug", i + 1)))?;
        out.insert(slug, ScoredRanking { scores: r.scores, order: r.order });
    }
    Ok(out)
}

/// Accepts either an experiment report (its pooled report is used) or a
/// bare metric report.
fn read_report(path: &Path) -> anyhow::Result<MetricReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(r) = serde_json::from_str::<ExperimentReport>(&text) {
        return Ok(r.pooled);
    }
    serde_json::from_str::<MetricReport>(&text)
        .map_err(|e| usage(format!("{} is not a metric or experiment report: {e}", path.display())))
}

fn finish(report: &ExperimentReport, output: Option<&Path>) -> anyhow::Result<()> {
    eprint!("{}", render_table(&[(report.config.model.name(), &report.pooled)]));
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(output, report)
}

fn emit<T: Serialize>(output: Option<&Path>, value: &T) -> anyhow::Result<()> {
    match output {
        Some(p) => write_json(p, value),
        None => print_json(value),
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(io::stdout().lock(), "{text}")?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let out = io::stdout();
            let mut w = out.lock();
            f(&mut w)?;
        }
    }
    Ok(())
}

