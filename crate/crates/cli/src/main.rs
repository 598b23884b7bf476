//! `trendboost` command-line driver.
//!
//! Every subcommand reads the experiment configuration from `--config` (JSON,
//! defaults when absent), optionally reseeds it with `--seed`, and writes its
//! artifacts under `--out`. Exit status is 0 on success, 2 on configuration
//! errors and 1 on any other failure.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use trendboost::classifiers::Model;
use trendboost::experiment::{
    general_corpus, lm_corpus, model_ranking, positive_names, run_end_to_end, sweep_history,
    sweep_individual_features, Evaluator, ExperimentConfig, ModelKind, World,
};
use trendboost::features::{build_feature_matrix, FeatureMatrix};
use trendboost::lm::{export_arpa, inject_entity_token, parse_corpus, splice_entity_distribution, train, write_corpus};
use trendboost::querylog::{
    aggregate, generate_synthetic_log, label_trending, read_jsonl, read_query_log, write_jsonl, EntityId,
    FrequencyTable, QueryRecord,
};
use trendboost::ranking::{heuristic_score, Heuristic, Labels, RankedList};
use trendboost::recognizer::{
    decode_trace, feedback_filter, generate_confusions, word_error_rate, HypothesisSet, Lexicon, Utterance,
};
use trendboost::Error;

#[derive(Debug, Parser)]
#[command(name = "trendboost", version, about = "Forecast trending entities and boost them in a class n-gram LM")]
struct Cli {
    /// JSON experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a query log, its trend events and filler sentences.
    Generate,
    /// Count a query log per window; label the test window and list its trending names.
    Aggregate {
        #[arg(long)]
        log: PathBuf,
    },
    /// Build the feature matrix for one target window.
    Featurize {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        target: usize,
        #[arg(long)]
        weeks: Option<usize>,
        /// Attach trending labels of the target window.
        #[arg(long)]
        labeled: bool,
    },
    /// Train a classifier on a labeled feature matrix.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_parser = parse_model_kind)]
        model: ModelKind,
    },
    /// Rank candidates with a trained model or a heuristic.
    Rank(RankArgs),
    /// Build the base LM and the feedback-filtered boost list for a ranking.
    Boost {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        general: PathBuf,
        #[arg(long)]
        ranking: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Decode utterances with the base or boosted LM and write traces.
    Recognize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        utterances: PathBuf,
        #[arg(long)]
        boost_list: Option<PathBuf>,
    },
    /// Ranking metrics and boosted WER of one ranking at every configured cut.
    Evaluate {
        #[arg(long)]
        ranking: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        utterances: PathBuf,
        #[arg(long)]
        heldout: PathBuf,
    },
    /// Full pipeline for every method.
    Run,
    /// Retrain both models with 1..=max feature weeks.
    SweepHistory {
        #[arg(long, default_value_t = 1)]
        min_weeks: usize,
        #[arg(long)]
        max_weeks: Option<usize>,
    },
    /// Train both models on each feature family alone.
    SweepFeatures,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Feature matrix to score with `--model`.
    #[arg(long, requires = "model", conflicts_with = "heuristic")]
    features: Option<PathBuf>,
    #[arg(long, requires = "features")]
    model: Option<PathBuf>,
    /// Heuristic name: random, popular_last_week, suddenly_popular, trending_last_week.
    #[arg(long, requires = "table", value_parser = parse_heuristic)]
    heuristic: Option<Heuristic>,
    #[arg(long)]
    table: Option<PathBuf>,
    /// Window to forecast; defaults to the test target.
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    weeks: Option<usize>,
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    ModelKind::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown model `{s}`, expected adaboost or mlp"))
}

fn parse_heuristic(s: &str) -> Result<Heuristic, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config = err.chain().any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_config));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.reseed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = Output { dir: &cli.out };
    match &cli.command {
        Command::Generate => generate(&cfg, out),
        Command::Aggregate { log } => aggregate_log(&cfg, out, log),
        Command::Featurize { table, target, weeks, labeled } => {
            featurize(&cfg, out, table, *target, weeks.unwrap_or(cfg.feature_weeks), *labeled)
        }
        Command::Train { features, model } => train_model(&cfg, out, features, *model),
        Command::Rank(args) => rank(&cfg, out, args),
        Command::Boost { table, general, ranking, k } => {
            boost(&cfg, out, table, general, ranking, k.unwrap_or(cfg.primary_k))
        }
        Command::Recognize { corpus, utterances, boost_list } => {
            recognize(&cfg, out, corpus, utterances, boost_list.as_deref())
        }
        Command::Evaluate { ranking, labels, corpus, utterances, heldout } => {
            evaluate(&cfg, out, ranking, labels, corpus, utterances, heldout)
        }
        Command::Run => run(&cfg, out),
        Command::SweepHistory { min_weeks, max_weeks } => {
            let max = max_weeks.unwrap_or(cfg.train_target_window - 1);
            let mut world = World::build(&cfg)?;
            let sweep = sweep_history(&mut world, *min_weeks..=max)?;
            sweep.write_csv(out.create("history.csv")?)?;
            out.json("history.json", &sweep)
        }
        Command::SweepFeatures => {
            let mut world = World::build(&cfg)?;
            let sweep = sweep_individual_features(&mut world)?;
            sweep.write_csv(out.create("feature_sweep.csv")?)?;
            out.json("feature_sweep.json", &sweep)
        }
    }
}

#[derive(Clone, Copy)]
struct Output<'a> {
    dir: &'a Path,
}

impl Output<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn lines<I: IntoIterator<Item = String>>(&self, name: &str, lines: I) -> anyhow::Result<()> {
        let mut w = self.create(name)?;
        for line in lines {
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn read_sentences(path: &Path) -> anyhow::Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let words: Vec<String> = line?.split_whitespace().map(str::to_string).collect();
        if !words.is_empty() {
            out.push(words);
        }
    }
    Ok(out)
}

fn read_table(cfg: &ExperimentConfig, path: &Path) -> anyhow::Result<FrequencyTable> {
    Ok(FrequencyTable::read_csv(open(path)?, cfg.synth.window_config())?)
}

fn write_labels(out: Output, name: &str, labels: &Labels) -> anyhow::Result<()> {
    let sorted: BTreeMap<&EntityId, bool> = labels.iter().map(|(e, &l)| (e, l)).collect();
    let mut w = csv::Writer::from_writer(out.create(name)?);
    w.write_record(["entity", "trending"])?;
    for (e, l) in sorted {
        w.write_record([e.as_str(), if l { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

fn read_labels(path: &Path) -> anyhow::Result<Labels> {
    let mut labels = Labels::new();
    for record in csv::Reader::from_reader(open(path)?).records() {
        let record = record?;
        let (Some(e), Some(l)) = (record.get(0), record.get(1)) else {
            bail!("{}: expected `entity,trending` rows", path.display());
        };
        let label = match l {
            "1" => true,
            "0" => false,
            other => bail!("{}: bad label `{other}`", path.display()),
        };
        labels.insert(EntityId::new(e)?, label);
    }
    Ok(labels)
}

fn read_ranking(path: &Path) -> anyhow::Result<RankedList> {
    Ok(RankedList::read_csv(open(path)?)?)
}

fn read_features(path: &Path) -> anyhow::Result<FeatureMatrix> {
    Ok(FeatureMatrix::read_csv(open(path)?)?)
}

fn generate(cfg: &ExperimentConfig, out: Output) -> anyhow::Result<()> {
    let log = generate_synthetic_log(&cfg.synth)?;
    write_jsonl(&log.records, out.create("querylog.jsonl")?)?;
    write_jsonl(&log.trends, out.create("trends.jsonl")?)?;
    let (general, heldout) = general_corpus(cfg, &log.pool);
    out.lines("general.txt", general.iter().map(|s| s.join(" ")))?;
    out.lines("heldout.txt", heldout.iter().map(|s| s.join(" ")))?;
    eprintln!(
        "{} records, {} trend events, {} filler and {} held-out sentences",
        log.records.len(),
        log.trends.len(),
        general.len(),
        heldout.len()
    );
    Ok(())
}

fn aggregate_log(cfg: &ExperimentConfig, out: Output, log: &Path) -> anyhow::Result<()> {
    let records: Vec<QueryRecord> = read_query_log(open(log)?)?;
    let table = aggregate(&records, &cfg.synth.window_config(), cfg.synth.sample_threshold)?;
    table.write_csv(out.create("frequency.csv")?)?;
    let labels: Labels = label_trending(&table, cfg.test_target_window, cfg.c)?.into_iter().collect();
    write_labels(out, "labels.csv", &labels)?;
    let utterances: Vec<Utterance> = positive_names(&labels)
        .into_iter()
        .map(|words| Utterance { reference: words.join(" ") })
        .collect();
    write_jsonl(&utterances, out.create("utterances.jsonl")?)?;
    eprintln!(
        "{} entities, {} trending at window {}",
        table.entities().len(),
        utterances.len(),
        cfg.test_target_window
    );
    Ok(())
}

/// Windows `target - weeks ..= target` of a table, re-indexed from 1.
fn history(table: &FrequencyTable, target: usize, weeks: usize) -> anyhow::Result<FrequencyTable> {
    if weeks == 0 || weeks >= target {
        return Err(Error::Config(format!("{weeks} feature weeks do not fit before window {target}")).into());
    }
    Ok(table.slice(target - weeks, target)?)
}

fn featurize(
    cfg: &ExperimentConfig,
    out: Output,
    table: &Path,
    target: usize,
    weeks: usize,
    labeled: bool,
) -> anyhow::Result<()> {
    let slice = history(&read_table(cfg, table)?, target, weeks)?;
    let label_factor = labeled.then_some(cfg.c);
    let x = build_feature_matrix(&slice, weeks + 1, &cfg.features, label_factor)?;
    x.write_csv(out.create(&format!("features_t{target}.csv"))?)?;
    eprintln!("{} rows x {} columns", x.n_rows(), x.n_cols());
    Ok(())
}

fn train_model(cfg: &ExperimentConfig, out: Output, features: &Path, kind: ModelKind) -> anyhow::Result<()> {
    let x = read_features(features)?;
    let model = kind.train(&x, &cfg.train)?;
    let mut w = out.create(&format!("model_{}.json", kind.name()))?;
    w.write_all(model.to_json()?.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn rank(cfg: &ExperimentConfig, out: Output, args: &RankArgs) -> anyhow::Result<()> {
    let (name, ranked) = match (&args.features, &args.model, &args.heuristic, &args.table) {
        (Some(features), Some(model), None, _) => {
            let model = Model::from_json(&fs::read_to_string(model)?)?;
            let x = read_features(features)?;
            let name = match &model {
                Model::Adaboost(_) => "adaboost",
                Model::Mlp(_) => "mlp",
            };
            let ranked = model_ranking(&model, &x)?;
            (name.to_string(), ranked)
        }
        (None, None, Some(h), Some(table)) => {
            let h = *h;
            let target = args.target.unwrap_or(cfg.test_target_window);
            let weeks = args.weeks.unwrap_or(cfg.feature_weeks);
            let slice = history(&read_table(cfg, table)?, target, weeks)?;
            (h.name().to_string(), heuristic_score(h, &slice, weeks + 1, cfg.seed, &cfg.features)?)
        }
        _ => bail!("rank needs either --features with --model, or --heuristic with --table"),
    };
    ranked.write_csv(out.create(&format!("ranking_{name}.csv"))?)?;
    eprintln!("ranked {} candidates with {name}", ranked.len());
    Ok(())
}

#[derive(Serialize)]
struct BoostSummary {
    k: usize,
    boosted: usize,
    entity_sentence_prob: f64,
    q: f64,
    names: Vec<String>,
}

fn boost(
    cfg: &ExperimentConfig,
    out: Output,
    table: &Path,
    general: &Path,
    ranking: &Path,
    k: usize,
) -> anyhow::Result<()> {
    let table = read_table(cfg, table)?;
    let general = read_sentences(general)?;
    let corpus = inject_entity_token(
        lm_corpus(&table, cfg.test_target_window, cfg.lm.entity_weight, &general),
        cfg.lm.alpha,
    )?;
    write_corpus(&corpus, out.create("lm_corpus.txt")?)?;
    let lm = train(&corpus, cfg.lm.order)?;
    let mut w = out.create("base.arpa")?;
    w.write_all(export_arpa(&lm).as_bytes())?;
    w.flush()?;

    let ranked = read_ranking(ranking)?;
    let lexicon = Lexicon::from_lm(&lm);
    let list = feedback_filter(&ranked, &lm, &lexicon, &cfg.decode, k)?;
    let names: Vec<String> = list.iter().map(|e| e.as_str().to_string()).collect();
    out.lines("boost_list.txt", names.iter().cloned())?;
    let summary = if names.is_empty() {
        BoostSummary { k, boosted: 0, entity_sentence_prob: lm.entity_sentence_prob(), q: 0.0, names }
    } else {
        let boosted = splice_entity_distribution(&lm, &names)?;
        BoostSummary {
            k,
            boosted: boosted.k(),
            entity_sentence_prob: boosted.entity_path_prob(),
            q: 1.0 / boosted.k() as f64,
            names,
        }
    };
    eprintln!("boosting {} of {} ranked names", summary.boosted, ranked.len());
    out.json("boost.json", &summary)
}

#[derive(Serialize)]
struct RecognitionSummary {
    utterances: usize,
    boosted: usize,
    wer: f64,
}

fn load_lm(cfg: &ExperimentConfig, corpus: &Path) -> anyhow::Result<trendboost::lm::NGramLm> {
    Ok(train(&parse_corpus(open(corpus)?)?, cfg.lm.order)?)
}

fn recognize(
    cfg: &ExperimentConfig,
    out: Output,
    corpus: &Path,
    utterances: &Path,
    boost_list: Option<&Path>,
) -> anyhow::Result<()> {
    let lm = load_lm(cfg, corpus)?;
    let lexicon = Lexicon::from_lm(&lm);
    let utts: Vec<Utterance> = read_jsonl(open(utterances)?)?;
    let sets = utts
        .iter()
        .map(|u| {
            let words: Vec<&str> = u.reference.split_whitespace().collect();
            generate_confusions(&words, &lexicon, &cfg.decode)
        })
        .collect::<Result<Vec<HypothesisSet>, _>>()?;
    let names = match boost_list {
        Some(path) => read_sentences(path)?.into_iter().map(|w| w.join(" ")).collect(),
        None => Vec::new(),
    };
    let traces = if names.is_empty() {
        sets.iter().map(|h| decode_trace(h, &lm, &cfg.decode)).collect::<Vec<_>>()
    } else {
        let boosted = splice_entity_distribution(&lm, &names)?;
        sets.iter().map(|h| decode_trace(h, &boosted, &cfg.decode)).collect()
    };
    write_jsonl(&traces, out.create("traces.jsonl")?)?;
    let pairs: Vec<(Vec<String>, Vec<String>)> = traces
        .iter()
        .map(|t| (split(&t.reference), split(&t.hypothesis)))
        .collect();
    let report = word_error_rate(&pairs)?;
    let summary = RecognitionSummary { utterances: traces.len(), boosted: names.len(), wer: report.wer };
    eprintln!("WER {:.4} over {} utterances", summary.wer, summary.utterances);
    out.json("recognition.json", &summary)
}

fn split(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn evaluate(
    cfg: &ExperimentConfig,
    out: Output,
    ranking: &Path,
    labels: &Path,
    corpus: &Path,
    utterances: &Path,
    heldout: &Path,
) -> anyhow::Result<()> {
    let ranked = read_ranking(ranking)?;
    let labels = read_labels(labels)?;
    let lm = load_lm(cfg, corpus)?;
    let references: Vec<Vec<String>> = read_jsonl::<Utterance, _>(open(utterances)?)?
        .iter()
        .map(|u| split(&u.reference))
        .collect();
    let heldout = read_sentences(heldout)?;
    let mut evaluator = Evaluator::new(lm, labels, &references, &heldout, cfg.decode.clone(), cfg.primary_k)?;
    let report = evaluator.evaluate(&ranked, &cfg.k_cuts)?;
    eprintln!("AP {:.4}", report.ap);
    out.json("evaluation.json", &report)
}

fn run(cfg: &ExperimentConfig, out: Output) -> anyhow::Result<()> {
    cfg.validate_for_run()?;
    let clock = Instant::now();
    let outcome = run_end_to_end(cfg)?;
    out.json("report.json", &outcome.report)?;
    let mut timings = outcome.timings.clone();
    timings.insert("total".into(), clock.elapsed().as_secs_f64());
    out.json("timings.json", &timings)?;
    for (name, ranked) in &outcome.rankings {
        ranked.write_csv(out.create(&format!("rankings/{name}.csv"))?)?;
    }
    for (name, model) in &outcome.models {
        let mut w = out.create(&format!("models/{name}.json"))?;
        w.write_all(model.to_json()?.as_bytes())?;
        w.flush()?;
    }
    for (name, eval) in &outcome.report.methods {
        let m = &eval.per_k[&cfg.primary_k];
        eprintln!(
            "{name:>20}  AP {:.4}  WER@{} {:.4}  p {}",
            eval.ap,
            cfg.primary_k,
            m.wer,
            m.p_value.map_or("-".into(), |p| format!("{p:.2e}"))
        );
    }
    eprintln!("{:>20}  WER {:.4}", "no boost", outcome.report.baseline.wer);
    Ok(())
}
