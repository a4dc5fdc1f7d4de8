//! Shared fixtures for the benchmarks.

use adrc_core::corpus::{build_examples_default, Task};
use adrc_core::embeddings::{
    build_sentence_matrix, train_skipgram, EmbeddingTable, SentenceMatrix, SkipgramConfig,
};
use adrc_core::synthetic::{binary_corpus, BinaryCorpusSpec};
use adrc_core::text::{build_vocabulary, encode, Vocabulary};

pub struct Fixture {
    pub vocab: Vocabulary,
    pub encoded: Vec<Vec<u32>>,
    pub labels: Vec<usize>,
    pub table: EmbeddingTable,
}

/// Synthetic binary corpus with trained `dim`-dimensional embeddings.
pub fn fixture(reviews: usize, dim: usize) -> Fixture {
    let records = binary_corpus(&BinaryCorpusSpec {
        reviews,
        ..Default::default()
    });
    let (examples, _) = build_examples_default(&records, Task::Binary);
    let vocab = build_vocabulary(examples.iter().map(|e| &e.tokens), 5).expect("vocabulary");
    let encoded: Vec<Vec<u32>> = examples.iter().map(|e| encode(&e.tokens, &vocab)).collect();
    let labels = examples.iter().map(|e| e.label).collect();
    let table = train_skipgram(
        &encoded,
        &vocab,
        &SkipgramConfig {
            dim,
            epochs: 1,
            ..Default::default()
        },
    )
    .expect("embeddings");
    Fixture {
        vocab,
        encoded,
        labels,
        table,
    }
}

impl Fixture {
    pub fn matrices(&self) -> Vec<(SentenceMatrix, usize)> {
        self.encoded
            .iter()
            .zip(&self.labels)
            .filter(|(e, _)| !e.is_empty())
            .map(|(e, &y)| {
                (
                    build_sentence_matrix(e, &self.table, 200, 8).expect("matrix"),
                    y,
                )
            })
            .collect()
    }
}
