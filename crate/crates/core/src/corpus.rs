//! Review ingestion, task labelling and stratified splitting.
//!
//! Corpus files are UTF-8 CSV with the header
//! `drug_name,rating,reason,side_effects,comments,sex,age,duration_dosage,date_added`.
//! Only `comments` feeds the classifiers; the remaining fields are carried so
//! that a parsed corpus can be written back unchanged.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, MalformedRow, Result};
use crate::rng::{self, stream};
use crate::text::{tokenize, TokenSequence};

pub const CORPUS_HEADER: [&str; 9] = [
    "drug_name",
    "rating",
    "reason",
    "side_effects",
    "comments",
    "sex",
    "age",
    "duration_dosage",
    "date_added",
];

/// Share of malformed rows above which a corpus file is rejected outright.
pub const MAX_REJECTED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub drug_name: String,
    pub rating: u8,
    pub reason: String,
    pub side_effects: String,
    pub comments: String,
    pub sex: String,
    pub age: String,
    pub duration_dosage: String,
    pub date_added: Option<NaiveDate>,
}

impl ReviewRecord {
    /// A record with only the fields the classifiers consume.
    pub fn new(rating: u8, comments: impl Into<String>) -> Self {
        ReviewRecord {
            drug_name: String::new(),
            rating,
            reason: String::new(),
            side_effects: String::new(),
            comments: comments.into(),
            sex: String::new(),
            age: String::new(),
            duration_dosage: String::new(),
            date_added: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// ADR (ratings 1-2) vs non-ADR (ratings 4-5); rating 3 is excluded.
    Binary,
    /// All five ratings as classes.
    #[serde(rename = "multi")]
    MultiClass,
}

impl Task {
    pub fn class_count(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::MultiClass => 5,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Task::Binary => vec!["ADR".into(), "Non-ADR".into()],
            Task::MultiClass => (1..=5).map(|c| format!("Class {c}")).collect(),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Task::Binary),
            "multi" | "multiclass" => Ok(Task::MultiClass),
            other => Err(format!("unknown task `{other}` (expected binary or multi)")),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::MultiClass => "multi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub tokens: TokenSequence,
    pub label: usize,
    pub source_rating: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Field delimiter and header policy of an input corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusFormat {
    pub delimiter: u8,
}

impl Default for CorpusFormat {
    fn default() -> Self {
        CorpusFormat { delimiter: b',' }
    }
}

/// Result of [`parse_corpus`]: accepted records plus rejected rows.
#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub records: Vec<ReviewRecord>,
    pub rejected: Vec<MalformedRow>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    drug_name: String,
    rating: String,
    reason: String,
    side_effects: String,
    comments: String,
    sex: String,
    age: String,
    duration_dosage: String,
    date_added: String,
}

impl RawRow {
    fn into_record(self) -> std::result::Result<ReviewRecord, String> {
        let rating = match self.rating.parse::<u8>() {
            Ok(r @ 1..=5) => r,
            Ok(r) => return Err(format!("rating {r} outside 1..5")),
            Err(_) => return Err(format!("rating {:?} is not an integer", self.rating)),
        };
        let date_added = if self.date_added.is_empty() {
            None
        } else {
            Some(
                NaiveDate::parse_from_str(&self.date_added, "%Y-%m-%d")
                    .map_err(|e| format!("date_added {:?}: {e}", self.date_added))?,
            )
        };
        Ok(ReviewRecord {
            drug_name: self.drug_name,
            rating,
            reason: self.reason,
            side_effects: self.side_effects,
            comments: self.comments,
            sex: self.sex,
            age: self.age,
            duration_dosage: self.duration_dosage,
            date_added,
        })
    }
}

/// Parses a corpus file. Malformed rows are collected rather than fatal
/// unless they exceed [`MAX_REJECTED_FRACTION`] of all rows.
pub fn parse_corpus(path: &Path, format: CorpusFormat) -> Result<ParsedCorpus> {
    let file = File::open(path).map_err(|e| Error::unreadable(path, e))?;
    parse_corpus_reader(file, format)
}

pub fn parse_corpus_reader<R: Read>(input: R, format: CorpusFormat) -> Result<ParsedCorpus> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(true)
        .from_reader(input);

    let headers = reader.headers()?.clone();
    for required in CORPUS_HEADER {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::format(
                "corpus",
                format!("header is missing column `{required}`"),
            ));
        }
    }

    let mut parsed = ParsedCorpus::default();
    let mut total = 0;
    for (i, row) in reader.deserialize::<RawRow>().enumerate() {
        total += 1;
        let row_no = i + 1;
        let outcome = match row {
            Ok(raw) => raw.into_record(),
            Err(e) => Err(e.to_string()),
        };
        match outcome {
            Ok(rec) => parsed.records.push(rec),
            Err(reason) => parsed.rejected.push(MalformedRow {
                row: row_no,
                reason,
            }),
        }
    }

    if !parsed.rejected.is_empty()
        && parsed.rejected.len() as f64 > MAX_REJECTED_FRACTION * total as f64
    {
        return Err(Error::CorpusRejected {
            rejected: parsed.rejected.len(),
            total,
            first: parsed.rejected[0].clone(),
        });
    }
    Ok(parsed)
}

/// Writes records in the corpus CSV schema.
pub fn write_corpus<W: Write>(out: W, records: &[ReviewRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CORPUS_HEADER)?;
    for r in records {
        let rating = r.rating.to_string();
        let date = r
            .date_added
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_default();
        w.write_record([
            r.drug_name.as_str(),
            &rating,
            &r.reason,
            &r.side_effects,
            &r.comments,
            &r.sex,
            &r.age,
            &r.duration_dosage,
            &date,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Maps a rating to the task's class index; `None` for rating 3 in the
/// binary task.
pub fn map_label(rating: u8, task: Task) -> Option<usize> {
    match (task, rating) {
        (Task::Binary, 1 | 2) => Some(0),
        (Task::Binary, 4 | 5) => Some(1),
        (Task::Binary, _) => None,
        (Task::MultiClass, r) => Some(r as usize - 1),
    }
}

/// Counts of records that did not become examples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropStats {
    pub unlabeled: usize,
    pub empty_comments: usize,
}

/// Tokenizes the comments of every labelled record. Records without a label
/// for `task`, or whose comments contain no tokens, are dropped and counted.
pub fn build_examples<F>(
    records: &[ReviewRecord],
    task: Task,
    tokenizer: F,
) -> (Vec<LabeledExample>, DropStats)
where
    F: Fn(&str) -> TokenSequence,
{
    let mut stats = DropStats::default();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let Some(label) = map_label(r.rating, task) else {
            stats.unlabeled += 1;
            continue;
        };
        let tokens = tokenizer(&r.comments);
        if tokens.is_empty() {
            stats.empty_comments += 1;
            continue;
        }
        out.push(LabeledExample {
            tokens,
            label,
            source_rating: r.rating,
        });
    }
    (out, stats)
}

/// [`build_examples`] with the default tokenizer.
pub fn build_examples_default(
    records: &[ReviewRecord],
    task: Task,
) -> (Vec<LabeledExample>, DropStats) {
    build_examples(records, task, tokenize)
}

/// Round-half-up of `fraction * n`. The small slack absorbs representation
/// error such as `0.7 * 5 = 3.4999999999999996`.
pub fn train_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) + 0.5 + 1e-9).floor().min(n as f64) as usize
}

/// Splits per class: each class is shuffled by a seed-derived generator and
/// its first `train_count(n, fraction)` members go to train. Output lists
/// keep the input order.
pub fn split_stratified(
    examples: &[LabeledExample],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        by_class.entry(ex.label).or_default().push(i);
    }
    if let Some((&class, idx)) = by_class.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::ClassTooSmall {
            class,
            count: idx.len(),
        });
    }

    let mut in_train = vec![false; examples.len()];
    for (&class, indices) in &mut by_class {
        let mut rng = rng::seeded(rng::derive_seed(seed, stream::SPLIT ^ class as u64));
        indices.shuffle(&mut rng);
        for &i in &indices[..train_count(indices.len(), train_fraction)] {
            in_train[i] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = examples.iter().zip(&in_train).partition(|(_, &t)| t);
    Ok(SplitDataset {
        train: train.into_iter().map(|(e, _)| e.clone()).collect(),
        test: test.into_iter().map(|(e, _)| e.clone()).collect(),
        seed,
        train_fraction,
    })
}

/// Per-class `(train, test)` sizes, indexed by class.
pub fn class_counts(split: &SplitDataset, class_count: usize) -> Vec<(usize, usize)> {
    let mut counts = vec![(0, 0); class_count];
    for ex in &split.train {
        counts[ex.label].0 += 1;
    }
    for ex in &split.test {
        counts[ex.label].1 += 1;
    }
    counts
}

/// JSON sidecar written next to the split CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub task: Task,
    pub seed: u64,
    pub train_fraction: f64,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub records: usize,
    pub malformed_rows: usize,
    pub drops: DropStats,
}

/// Writes a split list as CSV `label,source_rating,tokens` with tokens
/// space-joined.
pub fn write_examples<W: Write>(out: W, examples: &[LabeledExample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "source_rating", "tokens"])?;
    for ex in examples {
        w.write_record([
            ex.label.to_string(),
            ex.source_rating.to_string(),
            ex.tokens.tokens.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_examples<R: Read>(input: R) -> Result<Vec<LabeledExample>> {
    #[derive(Deserialize)]
    struct Row {
        label: usize,
        source_rating: u8,
        tokens: String,
    }
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(LabeledExample {
                tokens: TokenSequence::from(
                    row.tokens
                        .split(' ')
                        .filter(|t| !t.is_empty())
                        .map(String::from)
                        .collect::<Vec<_>>(),
                ),
                label: row.label,
                source_rating: row.source_rating,
            })
        })
        .collect()
}
