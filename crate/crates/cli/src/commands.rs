//! Subcommand implementations. Each reads its inputs from the workdir and
//! writes its outputs back, so commands can run separately or as a pipeline.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use adrc_core::baselines::{
    avg_embedding_features, bow_features, predict_baseline, train_forest, train_logreg,
    BaselineModel, FeatureVector, LogRegOptions,
};
use adrc_core::corpus::{
    build_examples_default, class_counts, parse_corpus, read_examples, split_stratified,
    write_corpus, write_examples, CorpusFormat, LabeledExample, SplitManifest,
};
use adrc_core::embeddings::{
    build_sentence_matrix, train_skipgram, EmbeddingTable, SentenceMatrix,
};
use adrc_core::ensemble::{
    member_outputs, sample_configs, train_members, vote_subset, CommitteeManifest, MemberEntry,
    PerDim,
};
use adrc_core::eval::{
    committee_curve_from_outputs, evaluate_predictions, format_table, write_curve_csv, EvalReport,
};
use adrc_core::nn::{train_cnn, write_loss_trace, CnnModel, Scalar};
use adrc_core::synthetic::{binary_corpus, ordinal_corpus, BinaryCorpusSpec, OrdinalCorpusSpec};
use adrc_core::text::{build_vocabulary, encode, Vocabulary};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{Precision, RunConfig};
use crate::workdir::{write_atomic, Workdir};

/// Baselines in the order their report rows are printed.
pub const BASELINES: [(&str, &str); 4] = [
    ("avg_logreg", "Avg. embeddings + Logistic Reg."),
    ("bow_logreg", "Bag-of-words + Logistic Reg."),
    ("avg_forest", "Avg. embeddings + Random Forest"),
    ("bow_forest", "Bag-of-words + Random Forest"),
];

fn workdir(cfg: &RunConfig) -> Result<Workdir> {
    let ws = Workdir::new(&cfg.workdir);
    ws.create()?;
    write_atomic(&ws.resolved_config(), cfg.to_toml()?.as_bytes())?;
    Ok(ws)
}

fn open(path: &Path) -> Result<std::io::BufReader<fs::File>> {
    let f = fs::File::open(path).with_context(|| format!("missing artifact {}", path.display()))?;
    Ok(std::io::BufReader::new(f))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_atomic(
        path,
        (serde_json::to_string_pretty(value)? + "\n").as_bytes(),
    )
}

/// Parses the corpus, labels it for the task and writes the stratified split.
pub fn ingest(cfg: &RunConfig) -> Result<SplitManifest> {
    let ws = workdir(cfg)?;
    let corpus = cfg
        .corpus
        .as_deref()
        .context("no corpus given (set `corpus` or pass --corpus)")?;
    let parsed = parse_corpus(
        corpus,
        CorpusFormat {
            delimiter: cfg.split.delimiter as u8,
        },
    )?;
    if !parsed.rejected.is_empty() {
        eprintln!("skipped {} malformed rows", parsed.rejected.len());
    }
    let (examples, drops) = build_examples_default(&parsed.records, cfg.task);
    eprintln!(
        "dropped {} unlabeled and {} empty-comment reviews",
        drops.unlabeled, drops.empty_comments
    );
    let split = split_stratified(&examples, cfg.split.train_fraction, cfg.seed)?;

    let mut buf = Vec::new();
    write_examples(&mut buf, &split.train)?;
    write_atomic(&ws.train_split(), &buf)?;
    buf.clear();
    write_examples(&mut buf, &split.test)?;
    write_atomic(&ws.test_split(), &buf)?;

    let counts = class_counts(&split, cfg.task.class_count());
    let manifest = SplitManifest {
        task: cfg.task,
        seed: cfg.seed,
        train_fraction: cfg.split.train_fraction,
        train_counts: counts.iter().map(|c| c.0).collect(),
        test_counts: counts.iter().map(|c| c.1).collect(),
        records: parsed.records.len(),
        malformed_rows: parsed.rejected.len(),
        drops,
    };
    write_json(&ws.split_manifest(), &manifest)?;
    eprintln!(
        "split {} examples: {} train, {} test",
        examples.len(),
        split.train.len(),
        split.test.len()
    );
    Ok(manifest)
}

fn load_splits(ws: &Workdir) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    let train = read_examples(open(&ws.train_split())?)?;
    let test = read_examples(open(&ws.test_split())?)?;
    Ok((train, test))
}

/// Builds the vocabulary and trains one skipgram table per dimension.
pub fn embed(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ws = workdir(cfg)?;
    let (train, test) = load_splits(&ws)?;
    let mut text: Vec<&LabeledExample> = train.iter().collect();
    if cfg.embeddings.include_test_text {
        text.extend(&test);
    }
    let vocab = build_vocabulary(text.iter().map(|e| &e.tokens), cfg.embeddings.min_count)?;
    let mut buf = Vec::new();
    vocab.write_tsv(&mut buf)?;
    write_atomic(&ws.vocabulary(), &buf)?;

    let encoded: Vec<Vec<u32>> = text.iter().map(|e| encode(&e.tokens, &vocab)).collect();
    let mut written = Vec::new();
    for dim in cfg.embedding_dims() {
        let table = train_skipgram(&encoded, &vocab, &cfg.skipgram(dim))?;
        let mut buf = Vec::new();
        table.write_binary(&mut buf)?;
        let path = ws.table(dim);
        write_atomic(&path, &buf)?;
        eprintln!(
            "trained {dim}-dimensional embeddings over {} words",
            vocab.len()
        );
        written.push(path);
    }
    Ok(written)
}

/// Encoded splits with reviews that have no in-vocabulary token removed.
struct Prepared {
    vocab: Vocabulary,
    train: Vec<(Vec<u32>, usize)>,
    test: Vec<(Vec<u32>, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PreparedStats {
    train: usize,
    test: usize,
    train_without_known_words: usize,
    test_without_known_words: usize,
}

fn prepare(ws: &Workdir) -> Result<Prepared> {
    let (train, test) = load_splits(ws)?;
    let vocab = Vocabulary::read_tsv(open(&ws.vocabulary())?)?;
    let keep = |split: &[LabeledExample]| -> Vec<(Vec<u32>, usize)> {
        split
            .iter()
            .map(|e| (encode(&e.tokens, &vocab), e.label))
            .filter(|(enc, _)| !enc.is_empty())
            .collect()
    };
    let (tr, te) = (keep(&train), keep(&test));
    let stats = PreparedStats {
        train: tr.len(),
        test: te.len(),
        train_without_known_words: train.len() - tr.len(),
        test_without_known_words: test.len() - te.len(),
    };
    write_json(&ws.report("inputs", "json"), &stats)?;
    if te.is_empty() {
        bail!("no test review contains a known word");
    }
    Ok(Prepared {
        vocab,
        train: tr,
        test: te,
    })
}

fn load_table(ws: &Workdir, dim: usize) -> Result<EmbeddingTable> {
    EmbeddingTable::read_binary(open(&ws.table(dim))?)
        .with_context(|| format!("embeddings for d={dim}; run `adrc embed`"))
}

type Labeled<T> = Vec<(SentenceMatrix<T>, usize)>;

fn matrices<T: Scalar>(
    rows: &[(Vec<u32>, usize)],
    table: &EmbeddingTable,
    cfg: &RunConfig,
) -> Result<Labeled<T>> {
    rows.iter()
        .map(|(enc, y)| {
            let m = build_sentence_matrix(enc, table, cfg.input.max_len, cfg.input.min_len)?;
            Ok((m, *y))
        })
        .collect()
}

fn per_dim<T: Scalar>(
    ws: &Workdir,
    cfg: &RunConfig,
    rows: &[(Vec<u32>, usize)],
    dims: impl IntoIterator<Item = usize>,
) -> Result<PerDim<Labeled<T>>> {
    dims.into_iter()
        .map(|d| Ok((d, matrices(rows, &load_table(ws, d)?, cfg)?)))
        .collect()
}

/// Trains the single reference network.
pub fn train_single(cfg: &RunConfig) -> Result<PathBuf> {
    match cfg.precision {
        Precision::F64 => train_single_as::<f64>(cfg),
        Precision::F32 => train_single_as::<f32>(cfg),
    }
}

fn train_single_as<T: Scalar>(cfg: &RunConfig) -> Result<PathBuf> {
    let ws = workdir(cfg)?;
    let data = prepare(&ws)?;
    let train = matrices::<T>(&data.train, &load_table(&ws, cfg.cnn.embedding_dim)?, cfg)?;
    let out = train_cnn(&cfg.cnn, &train, None)?;
    let mut buf = Vec::new();
    out.model.write_to(&mut buf)?;
    write_atomic(&ws.single_model(), &buf)?;
    buf.clear();
    write_loss_trace(&mut buf, &out.trace)?;
    write_atomic(&ws.single_loss(), &buf)?;
    eprintln!("trained single CNN ({} steps)", cfg.cnn.iterations);
    Ok(ws.single_model())
}

/// Trains the committee, resuming from an existing manifest with the same
/// spec. Members are recorded in the manifest as they finish.
pub fn train_ensemble(cfg: &RunConfig) -> Result<PathBuf> {
    match cfg.precision {
        Precision::F64 => train_ensemble_as::<f64>(cfg),
        Precision::F32 => train_ensemble_as::<f32>(cfg),
    }
}

fn train_ensemble_as<T: Scalar>(cfg: &RunConfig) -> Result<PathBuf> {
    let ws = workdir(cfg)?;
    let spec = cfg.ensemble_spec();
    let configs = sample_configs(&spec)?;
    let manifest_path = ws.committee_manifest();
    let mut manifest = if manifest_path.exists() {
        match CommitteeManifest::read(&manifest_path)? {
            m if m.spec == spec => m,
            _ => {
                eprintln!("committee spec changed; training a new committee");
                CommitteeManifest::new(spec.clone())
            }
        }
    } else {
        CommitteeManifest::new(spec.clone())
    };
    let dir = ws.committee_dir();
    manifest.members.retain(|m| dir.join(&m.path).exists());
    let done: HashSet<usize> = manifest.members.iter().map(|m| m.index).collect();
    let todo: Vec<_> = configs
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !done.contains(i))
        .collect();
    if !done.is_empty() {
        eprintln!(
            "resuming committee: {} of {} members already trained",
            done.len(),
            spec.member_count
        );
    }
    manifest.write(&manifest_path)?;
    if todo.is_empty() {
        return Ok(manifest_path);
    }

    let data = prepare(&ws)?;
    let dims: BTreeSet<usize> = todo.iter().map(|(_, c)| c.embedding_dim).collect();
    let train = per_dim::<T>(&ws, cfg, &data.train, dims)?;
    let manifest = Mutex::new(manifest);
    train_members(&todo, &train, cfg.workers, |index, model| {
        let path = Workdir::member_file(index);
        let mut buf = Vec::new();
        model.write_to(&mut buf)?;
        write_atomic(&dir.join(&path), &buf)
            .map_err(|e| std::io::Error::other(format!("{e:#}")))?;
        let mut m = manifest.lock().expect("manifest lock");
        m.record(MemberEntry {
            index,
            path,
            config: model.config.clone(),
            seed: model.config.seed,
        });
        m.write(&manifest_path)?;
        eprintln!(
            "trained committee member {} of {}",
            index + 1,
            spec.member_count
        );
        Ok(())
    })?;
    Ok(manifest_path)
}

/// Bag-of-words features without a table, averaged embeddings with one.
fn features(
    rows: &[(Vec<u32>, usize)],
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
) -> Result<Vec<FeatureVector>> {
    rows.iter()
        .map(|(enc, _)| match table {
            None => Ok(bow_features(enc, vocab.len())),
            Some(t) => Ok(avg_embedding_features(enc, t)?),
        })
        .collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?)
}

/// Trains the enabled baseline combinations.
pub fn train_baselines(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ws = workdir(cfg)?;
    let data = prepare(&ws)?;
    let table = load_table(&ws, cfg.cnn.embedding_dim)?;
    let labels: Vec<usize> = data.train.iter().map(|(_, y)| *y).collect();
    let b = &cfg.baselines;
    let mut written = Vec::new();
    for (name, _) in BASELINES {
        let (kind, classifier) = name
            .split_once('_')
            .expect("baseline names are kind_classifier");
        let enabled_kind = if kind == "bow" {
            b.bag_of_words
        } else {
            b.avg_embedding
        };
        let enabled_classifier = if classifier == "logreg" {
            b.logreg
        } else {
            b.forest
        };
        if !(enabled_kind && enabled_classifier) {
            continue;
        }
        let x = features(&data.train, &data.vocab, (kind == "avg").then_some(&table))?;
        let model: BaselineModel = if classifier == "logreg" {
            let options = LogRegOptions {
                c: b.c,
                max_iterations: b.max_iterations,
                ..Default::default()
            };
            let fit = train_logreg(&x, &labels, options)?;
            if !fit.converged {
                eprintln!(
                    "warning: {name} stopped at the iteration cap (gradient norm {:e})",
                    fit.gradient_norm
                );
            }
            fit.model.into()
        } else {
            pool(cfg.workers)?
                .install(|| train_forest(&x, &labels, b.trees, cfg.seed))?
                .into()
        };
        let path = ws.baseline(name);
        write_atomic(&path, (model.to_json()? + "\n").as_bytes())?;
        eprintln!("trained baseline {name}");
        written.push(path);
    }
    Ok(written)
}

/// What an evaluation target refers to.
enum Target {
    Single(PathBuf),
    Committee(PathBuf),
    Baseline(String, PathBuf),
}

fn resolve_target(ws: &Workdir, name: &str) -> Result<(String, Target)> {
    match name {
        "single" => return Ok(("single".into(), Target::Single(ws.single_model()))),
        "committee" | "ensemble" => {
            return Ok((
                "committee".into(),
                Target::Committee(ws.committee_manifest()),
            ))
        }
        _ => {}
    }
    if let Some((b, _)) = BASELINES.iter().find(|(b, _)| *b == name) {
        return Ok((
            b.to_string(),
            Target::Baseline(b.to_string(), ws.baseline(b)),
        ));
    }
    let path = PathBuf::from(name);
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    if path.extension().is_some_and(|e| e == "bin") {
        return Ok((stem, Target::Single(path)));
    }
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("missing artifact {}", path.display()))?;
        if serde_json::from_str::<CommitteeManifest>(&text).is_ok() {
            return Ok((stem, Target::Committee(path)));
        }
        return Ok((stem.clone(), Target::Baseline(stem, path)));
    }
    bail!("unknown evaluation target `{name}`")
}

/// Targets with artifacts present, in report order.
fn default_targets(ws: &Workdir) -> Vec<String> {
    let mut out: Vec<String> = BASELINES
        .iter()
        .filter(|(b, _)| ws.baseline(b).exists())
        .map(|(b, _)| b.to_string())
        .collect();
    if ws.single_model().exists() {
        out.push("single".into());
    }
    if ws.committee_manifest().exists() {
        out.push("committee".into());
    }
    out
}

/// Evaluates each target on the test split and writes its report. With no
/// targets, every trained artifact is evaluated and a summary table written.
pub fn eval(cfg: &RunConfig, targets: &[String]) -> Result<Vec<PathBuf>> {
    match cfg.precision {
        Precision::F64 => eval_as::<f64>(cfg, targets),
        Precision::F32 => eval_as::<f32>(cfg, targets),
    }
}

fn eval_as<T: Scalar>(cfg: &RunConfig, targets: &[String]) -> Result<Vec<PathBuf>> {
    let ws = workdir(cfg)?;
    let targets = if targets.is_empty() {
        default_targets(&ws)
    } else {
        targets.to_vec()
    };
    if targets.is_empty() {
        bail!(
            "nothing to evaluate in {}; train a model first",
            ws.root().display()
        );
    }
    let data = prepare(&ws)?;
    let labels: Vec<usize> = data.test.iter().map(|(_, y)| *y).collect();
    let mut written = Vec::new();
    let mut rows: Vec<(String, EvalReport)> = Vec::new();

    for target in &targets {
        let (name, target) = resolve_target(&ws, target)?;
        let (title, predictions) = match target {
            Target::Single(path) => {
                let model = CnnModel::<f64>::read_from(open(&path)?)?.cast::<T>();
                let test = matrices::<T>(
                    &data.test,
                    &load_table(&ws, model.config.embedding_dim)?,
                    cfg,
                )?;
                let inputs: Vec<_> = test.iter().map(|(m, _)| m).collect();
                let probs = model.predict_proba(&inputs)?;
                let preds = probs
                    .rows()
                    .into_iter()
                    .map(|r| {
                        let mut best = 0;
                        for (c, &p) in r.iter().enumerate() {
                            if p > r[best] {
                                best = c;
                            }
                        }
                        best
                    })
                    .collect();
                ("Single CNN".to_string(), preds)
            }
            Target::Committee(path) => {
                let manifest = CommitteeManifest::read(&path)?;
                if !manifest.is_complete() {
                    let have: HashSet<usize> = manifest.members.iter().map(|m| m.index).collect();
                    let missing: Vec<String> = (0..manifest.spec.member_count)
                        .filter(|i| !have.contains(i))
                        .map(|i| Workdir::member_file(i).display().to_string())
                        .collect();
                    bail!(
                        "committee at {} is incomplete, missing {}; rerun `adrc train --mode ensemble` to finish it",
                        path.display(),
                        missing.join(", ")
                    );
                }
                let dir = path.parent().unwrap_or(Path::new("."));
                let committee = manifest.load::<T>(dir)?;
                let test = per_dim::<T>(&ws, cfg, &data.test, committee.dims())?;
                let inputs: PerDim<Vec<SentenceMatrix<T>>> = test
                    .into_iter()
                    .map(|(d, rows)| (d, rows.into_iter().map(|(m, _)| m).collect()))
                    .collect();
                let outputs = member_outputs(&committee, &inputs, cfg.workers)?;
                let all: Vec<usize> = (0..committee.len()).collect();
                let sizes: Vec<usize> = cfg
                    .curve_sizes()
                    .into_iter()
                    .filter(|&k| k <= committee.len())
                    .collect();
                let curve = committee_curve_from_outputs(
                    &outputs,
                    &labels,
                    cfg.task,
                    &sizes,
                    cfg.eval.curve_trials,
                    cfg.seed,
                )?;
                let mut buf = Vec::new();
                write_curve_csv(&mut buf, &curve)?;
                let curve_path = ws.report(&format!("{name}-curve"), "csv");
                write_atomic(&curve_path, &buf)?;
                written.push(curve_path);
                (
                    format!("Ensemble of {} CNNs", committee.len()),
                    vote_subset(&outputs, &all),
                )
            }
            Target::Baseline(kind_name, path) => {
                let model = BaselineModel::from_json(
                    &fs::read_to_string(&path)
                        .with_context(|| format!("missing artifact {}", path.display()))?,
                )?;
                let bow = kind_name.starts_with("bow") || model.feature_dim() == data.vocab.len();
                let table = if bow {
                    None
                } else {
                    Some(load_table(&ws, model.feature_dim())?)
                };
                let x = features(&data.test, &data.vocab, table.as_ref())?;
                let preds = x
                    .iter()
                    .map(|f| predict_baseline(&model, f))
                    .collect::<adrc_core::Result<Vec<_>>>()?;
                let title = BASELINES
                    .iter()
                    .find(|(b, _)| *b == kind_name)
                    .map_or(kind_name.clone(), |(_, t)| t.to_string());
                (title, preds)
            }
        };
        let report = evaluate_predictions(&predictions, &labels, cfg.task)?;
        let json = ws.report(&name, "json");
        write_atomic(&json, report.to_json()?.as_bytes())?;
        let table = ws.report(&name, "txt");
        write_atomic(
            &table,
            format_table(cfg.task, &[(title.clone(), &report)]).as_bytes(),
        )?;
        eprintln!(
            "{title}: overall accuracy {:.2}%",
            100.0 * report.overall_accuracy
        );
        written.push(json);
        written.push(table);
        rows.push((title, report));
    }

    let refs: Vec<(String, &EvalReport)> = rows.iter().map(|(t, r)| (t.clone(), r)).collect();
    let summary = ws.report("summary", "txt");
    write_atomic(&summary, format_table(cfg.task, &refs).as_bytes())?;
    written.push(summary);
    Ok(written)
}

/// Every stage in order: ingest, embed, train all model kinds, evaluate.
pub fn pipeline(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ingest(cfg)?;
    embed(cfg)?;
    train_single(cfg)?;
    train_ensemble(cfg)?;
    let b = &cfg.baselines;
    if (b.logreg || b.forest) && (b.bag_of_words || b.avg_embedding) {
        train_baselines(cfg)?;
    }
    eval(cfg, &[])
}

/// Synthetic corpus families for smoke runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Binary,
    Ordinal,
}

/// Writes a synthetic corpus in the raw input format.
pub fn synth(kind: SynthKind, reviews: usize, seed: u64, out: &Path) -> Result<()> {
    let records = match kind {
        SynthKind::Binary => binary_corpus(&BinaryCorpusSpec {
            reviews,
            seed,
            ..Default::default()
        }),
        SynthKind::Ordinal => ordinal_corpus(&OrdinalCorpusSpec {
            reviews,
            seed,
            ..Default::default()
        }),
    };
    let mut buf = Vec::new();
    write_corpus(&mut buf, &records)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_atomic(out, &buf)?;
    eprintln!(
        "wrote {} synthetic reviews to {}",
        records.len(),
        out.display()
    );
    Ok(())
}
