//! Skipgram word2vec with negative sampling, and sentence matrices built
//! from the trained vectors.
//!
//! Vectors are kept in `f32` (the on-disk precision); sentence matrices are
//! materialized in whatever scalar width the CNN runs in.

use std::io::{Read, Write};

use num_traits::Float;
use rand::Rng as _;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream, Rng};
use crate::text::Vocabulary;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"ADRCEMB1";
const LITTLE_ENDIAN_TAG: u8 = b'L';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipgramConfig {
    pub window: usize,
    pub min_count: u64,
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub noise_power: f64,
    pub seed: u64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            window: 5,
            min_count: 5,
            dim: 300,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            noise_power: 0.75,
            seed: 1,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.negatives == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "skipgram window, negatives and dim must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Word vectors, one row per vocabulary index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: Vec<f32>,
    /// Output-side vectors; only meaningful during training and not persisted.
    context: Vec<f32>,
}

impl EmbeddingTable {
    /// Input vectors ~ U(-0.5/d, 0.5/d), context vectors zero.
    pub fn initialize(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(rng::derive_seed(seed, stream::INIT));
        let half = 0.5 / dim as f32;
        let vectors = (0..vocab_size * dim)
            .map(|_| rng.random_range(-half..half))
            .collect();
        EmbeddingTable {
            dim,
            vectors,
            context: vec![0.0; vocab_size * dim],
        }
    }

    pub fn from_rows(dim: usize, vectors: Vec<f32>) -> Self {
        assert!(
            dim > 0 && vectors.len().is_multiple_of(dim),
            "row data not a multiple of dim"
        );
        let n = vectors.len();
        EmbeddingTable {
            dim,
            vectors,
            context: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn vector(&self, index: u32) -> &[f32] {
        let start = index as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    pub fn context_vector(&self, index: u32) -> &[f32] {
        let start = index as usize * self.dim;
        &self.context[start..start + self.dim]
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn is_finite(&self) -> bool {
        self.vectors
            .iter()
            .chain(&self.context)
            .all(|x| x.is_finite())
    }

    pub fn cosine(&self, a: u32, b: u32) -> f64 {
        let (x, y) = (self.vector(a), self.vector(b));
        let dot: f64 = x.iter().zip(y).map(|(&p, &q)| p as f64 * q as f64).sum();
        let nx: f64 = x.iter().map(|&p| (p as f64).powi(2)).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|&q| (q as f64).powi(2)).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }

    /// Binary layout: magic, `V` (u64 LE), `d` (u64 LE), endianness tag
    /// `b'L'`, then `V` rows of `d` little-endian `f32`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(EMBEDDING_MAGIC)?;
        out.write_all(&(self.vocab_size() as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        out.write_all(&[LITTLE_ENDIAN_TAG])?;
        let mut buf = Vec::with_capacity(self.vectors.len() * 4);
        for x in &self.vectors {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != EMBEDDING_MAGIC {
            return Err(Error::format("embedding", "bad magic"));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let vocab = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        let mut tag = [0u8; 1];
        input.read_exact(&mut tag)?;
        if tag[0] != LITTLE_ENDIAN_TAG {
            return Err(Error::format("embedding", "unsupported endianness tag"));
        }
        if dim == 0 {
            return Err(Error::format("embedding", "zero dimension"));
        }
        let mut raw = Vec::new();
        input.read_to_end(&mut raw)?;
        if raw.len() != vocab * dim * 4 {
            return Err(Error::format(
                "embedding",
                format!(
                    "expected {} bytes of vectors, found {}",
                    vocab * dim * 4,
                    raw.len()
                ),
            ));
        }
        let vectors = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(EmbeddingTable::from_rows(dim, vectors))
    }

    /// word2vec-style text export: a `V d` header line, then one
    /// `word v1 v2 ...` line per row.
    pub fn write_text<W: Write>(&self, vocab: &Vocabulary, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.vocab_size(), self.dim)?;
        for (i, w) in vocab.words().iter().enumerate().take(self.vocab_size()) {
            write!(out, "{w}")?;
            for x in self.vector(i as u32) {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn in_bounds_pairs(len: usize, pos: usize, span: usize) -> usize {
    span.min(pos) + span.min(len - 1 - pos)
}

/// Emits `(center, context)` pairs for the given per-position window spans.
pub fn pairs_with_spans(encoded: &[u32], spans: &[usize]) -> Vec<(u32, u32)> {
    assert_eq!(encoded.len(), spans.len());
    let mut out = Vec::new();
    for (t, (&center, &b)) in encoded.iter().zip(spans).enumerate() {
        let lo = t.saturating_sub(b);
        let hi = (t + b).min(encoded.len().saturating_sub(1));
        for j in lo..=hi {
            if j != t {
                out.push((center, encoded[j]));
            }
        }
    }
    out
}

fn draw_spans(rng: &mut Rng, len: usize, window: usize) -> impl Iterator<Item = usize> + '_ {
    (0..len).map(move |_| rng.random_range(1..=window))
}

/// Skipgram pairs with a dynamic window: each position draws its span
/// uniformly from `1..=window`.
pub fn generate_pairs(encoded: &[u32], window: usize, seed: u64) -> Vec<(u32, u32)> {
    assert!(window >= 1);
    let mut rng = rng::seeded(seed);
    let spans: Vec<usize> = draw_spans(&mut rng, encoded.len(), window).collect();
    pairs_with_spans(encoded, &spans)
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one `(center, context)` pair against the given
/// noise words: `-log σ(u_o·v_c) - Σ log σ(-u_n·v_c)`.
pub fn pair_loss(table: &EmbeddingTable, center: u32, context: u32, negatives: &[u32]) -> f64 {
    let v = table.vector(center);
    let pos = dot(table.context_vector(context), v) as f64;
    let mut loss = -log_sigmoid(pos);
    for &n in negatives {
        if n == context {
            continue;
        }
        loss -= log_sigmoid(-(dot(table.context_vector(n), v) as f64));
    }
    loss
}

fn log_sigmoid(x: f64) -> f64 {
    // log σ(x) = -log(1 + e^{-x}), stable on both tails
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// One SGD ascent step on the pair objective. Noise words equal to the
/// context word are skipped. `scratch` must hold `dim` elements.
pub fn update_pair(
    table: &mut EmbeddingTable,
    center: u32,
    context: u32,
    negatives: &[u32],
    lr: f32,
    scratch: &mut [f32],
) {
    let d = table.dim;
    let c0 = center as usize * d;
    scratch.iter_mut().for_each(|x| *x = 0.0);
    let targets = std::iter::once((context, 1.0f32)).chain(
        negatives
            .iter()
            .filter(|&&n| n != context)
            .map(|&n| (n, 0.0)),
    );
    for (target, label) in targets {
        let t0 = target as usize * d;
        let v = &table.vectors[c0..c0 + d];
        let u = &mut table.context[t0..t0 + d];
        let g = (label - sigmoid(dot(u, v))) * lr;
        for k in 0..d {
            scratch[k] += g * u[k];
            u[k] += g * v[k];
        }
    }
    for (x, s) in table.vectors[c0..c0 + d].iter_mut().zip(scratch.iter()) {
        *x += s;
    }
}

/// Trains skipgram embeddings over encoded sentences.
///
/// The learning rate decays linearly from `initial_lr` to `initial_lr/100`
/// across every pair of every epoch. Noise words follow the vocabulary's
/// unigram counts raised to `noise_power`.
pub fn train_skipgram(
    corpus: &[Vec<u32>],
    vocab: &Vocabulary,
    config: &SkipgramConfig,
) -> Result<EmbeddingTable> {
    config.validate()?;
    let vocab_size = vocab.len();
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    if let Some(&bad) = corpus.iter().flatten().find(|&&i| i as usize >= vocab_size) {
        return Err(Error::InvalidConfig(format!(
            "word index {bad} outside vocabulary of {vocab_size}"
        )));
    }

    let mut table = EmbeddingTable::initialize(vocab_size, config.dim, config.seed);

    let weights: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| (c as f64).powf(config.noise_power))
        .collect();
    let noise = WeightedAliasIndex::new(weights)
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;

    let span_seed = rng::derive_seed(config.seed, stream::SPANS);
    let total_pairs: u64 = {
        let mut rng = rng::seeded(span_seed);
        let mut total = 0u64;
        for _ in 0..config.epochs {
            for sent in corpus {
                for (t, b) in draw_spans(&mut rng, sent.len(), config.window).enumerate() {
                    total += in_bounds_pairs(sent.len(), t, b) as u64;
                }
            }
        }
        total
    };
    if total_pairs == 0 {
        return Ok(table);
    }

    let mut span_rng = rng::seeded(span_seed);
    let mut neg_rng = rng::seeded(rng::derive_seed(config.seed, stream::NEGATIVES));
    let mut negatives = vec![0u32; config.negatives];
    let mut scratch = vec![0f32; config.dim];
    let lr0 = config.initial_lr;
    let mut step = 0u64;
    let mut spans = Vec::new();

    for _ in 0..config.epochs {
        for sent in corpus {
            spans.clear();
            spans.extend(draw_spans(&mut span_rng, sent.len(), config.window));
            for (t, (&center, &b)) in sent.iter().zip(&spans).enumerate() {
                let lo = t.saturating_sub(b);
                let hi = (t + b).min(sent.len() - 1);
                for j in (lo..=hi).filter(|&j| j != t) {
                    let progress = step as f32 / total_pairs as f32;
                    let lr = lr0 * (1.0 - 0.99 * progress);
                    for n in negatives.iter_mut() {
                        *n = noise.sample(&mut neg_rng) as u32;
                    }
                    update_pair(&mut table, center, sent[j], &negatives, lr, &mut scratch);
                    step += 1;
                }
            }
        }
    }
    debug_assert_eq!(step, total_pairs);
    Ok(table)
}

/// A review as a stack of word vectors. Column `i` (the embedding of word
/// `i`) is stored contiguously, so a window of `h` consecutive words is one
/// contiguous slice of `h * dim` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix<T = f64> {
    dim: usize,
    data: Vec<T>,
    pad_mask: Vec<bool>,
}

impl<T: Float> SentenceMatrix<T> {
    /// Wraps column-contiguous data; no column is marked as padding.
    pub fn from_columns(dim: usize, data: Vec<T>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim));
        let n = data.len() / dim;
        SentenceMatrix {
            dim,
            data,
            pad_mask: vec![false; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of columns, padding included.
    pub fn len(&self) -> usize {
        self.pad_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pad_mask.is_empty()
    }

    pub fn column(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Entry at row `k` (embedding coordinate) and column `i` (word position).
    pub fn get(&self, k: usize, i: usize) -> T {
        self.data[i * self.dim + k]
    }

    pub fn pad_mask(&self) -> &[bool] {
        &self.pad_mask
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// The `width * dim` values of words `start..start + width`.
    pub fn window(&self, start: usize, width: usize) -> &[T] {
        &self.data[start * self.dim..(start + width) * self.dim]
    }
}

/// Stacks the vectors of `encoded` (truncated to `max_len`) and right-pads
/// with zero columns up to `min_len`.
pub fn build_sentence_matrix<T: Float>(
    encoded: &[u32],
    table: &EmbeddingTable,
    max_len: usize,
    min_len: usize,
) -> Result<SentenceMatrix<T>> {
    if encoded.is_empty() {
        return Err(Error::EmptyEncoding);
    }
    let words = &encoded[..encoded.len().min(max_len)];
    let cols = words.len().max(min_len);
    let d = table.dim();
    let mut data = Vec::with_capacity(cols * d);
    for &w in words {
        data.extend(table.vector(w).iter().map(|&x| T::from(x).unwrap()));
    }
    data.resize(cols * d, T::zero());
    let mut pad_mask = vec![false; words.len()];
    pad_mask.resize(cols, true);
    Ok(SentenceMatrix {
        dim: d,
        data,
        pad_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_vocabulary, encode, tokenize, TokenSequence};
    use proptest::prelude::*;

    #[test]
    fn single_token_has_no_pairs() {
        assert!(generate_pairs(&[3], 5, 0).is_empty());
    }

    #[test]
    fn two_tokens_window_one() {
        assert_eq!(generate_pairs(&[1, 2], 1, 9), vec![(1, 2), (2, 1)]);
    }

    #[test]
    fn fixed_span_two_enumerates_ten_pairs() {
        // positions 0..4, offsets ±1, ±2 in bounds:
        // t=0: +1 +2 ; t=1: -1 +1 +2 ; t=2: -2 -1 +1 ; t=3: -2 -1
        let pairs = pairs_with_spans(&[1, 2, 3, 4], &[2, 2, 2, 2]);
        let expected = vec![
            (1, 2),
            (1, 3),
            (2, 1),
            (2, 3),
            (2, 4),
            (3, 1),
            (3, 2),
            (3, 4),
            (4, 2),
            (4, 3),
        ];
        assert_eq!(pairs, expected);
        let counted: usize = (0..4).map(|t| in_bounds_pairs(4, t, 2)).sum();
        assert_eq!(counted, 10);
    }

    #[test]
    fn empty_pair_stream_leaves_initialization() {
        let corpus = vec![vec![0u32], vec![1], vec![2]];
        let vocab = build_vocabulary(
            &[TokenSequence::from(vec![
                "a".to_string(),
                "b".into(),
                "c".into(),
            ])],
            1,
        )
        .unwrap();
        let config = SkipgramConfig {
            dim: 8,
            epochs: 1,
            ..Default::default()
        };
        let table = train_skipgram(&corpus, &vocab, &config).unwrap();
        assert_eq!(table, EmbeddingTable::initialize(3, 8, config.seed));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let vocab = build_vocabulary(&[tokenize("a")], 1).unwrap();
        assert!(matches!(
            train_skipgram(&[vec![]], &vocab, &SkipgramConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn one_step_lowers_pair_loss() {
        let mut table = EmbeddingTable::initialize(6, 10, 4);
        // give context vectors some mass so both sides of the update move
        let mut rng = rng::seeded(11);
        for x in table.context.iter_mut() {
            *x = rng.random_range(-0.3..0.3);
        }
        let negatives = [3, 4, 5];
        let before = pair_loss(&table, 0, 1, &negatives);
        let mut scratch = vec![0.0; 10];
        update_pair(&mut table, 0, 1, &negatives, 0.01, &mut scratch);
        let after = pair_loss(&table, 0, 1, &negatives);
        assert!(after < before, "{after} !< {before}");
    }

    fn cluster_corpus(reps: usize, seed: u64) -> (Vec<Vec<u32>>, Vocabulary) {
        let mut rng = rng::seeded(seed);
        let pos = ["good", "great", "fine"];
        let neg = ["bad", "awful", "poor"];
        let mut seqs = Vec::new();
        for _ in 0..reps {
            for group in [&pos, &neg] {
                let mut s: Vec<String> = Vec::new();
                for _ in 0..6 {
                    s.push(group[rng.random_range(0..3)].to_string());
                }
                seqs.push(TokenSequence::from(s));
            }
        }
        let vocab = build_vocabulary(&seqs, 5).unwrap();
        (seqs.iter().map(|s| encode(s, &vocab)).collect(), vocab)
    }

    #[test]
    fn planted_clusters_order_cosines() {
        let (corpus, vocab) = cluster_corpus(500, 3);
        let config = SkipgramConfig {
            dim: 20,
            seed: 5,
            ..Default::default()
        };
        let table = train_skipgram(&corpus, &vocab, &config).unwrap();
        assert!(table.is_finite());
        let id = |w| vocab.index_of(w).unwrap();
        assert!(table.cosine(id("good"), id("great")) > table.cosine(id("good"), id("bad")));
    }

    #[test]
    fn training_is_deterministic() {
        let (corpus, vocab) = cluster_corpus(50, 1);
        let config = SkipgramConfig {
            dim: 8,
            seed: 2,
            ..Default::default()
        };
        let a = train_skipgram(&corpus, &vocab, &config).unwrap();
        let b = train_skipgram(&corpus, &vocab, &config).unwrap();
        assert_eq!(a, b);
    }

    fn table3() -> EmbeddingTable {
        EmbeddingTable::from_rows(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    }

    #[test]
    fn sentence_matrix_stacks_columns() {
        let m: SentenceMatrix = build_sentence_matrix(&[0, 1, 2], &table3(), 10, 3).unwrap();
        assert_eq!(m.len(), 3);
        assert!(m.pad_mask().iter().all(|&p| !p));
        assert_eq!(m.column(1), &[3.0, 4.0]);
        assert_eq!(m.get(1, 2), 6.0);
    }

    #[test]
    fn sentence_matrix_pads_to_min_len() {
        let m: SentenceMatrix = build_sentence_matrix(&[2, 0], &table3(), 10, 8).unwrap();
        assert_eq!(m.len(), 8);
        assert_eq!(
            m.pad_mask(),
            &[false, false, true, true, true, true, true, true]
        );
        assert!((2..8).all(|i| m.column(i) == [0.0, 0.0]));
        assert_eq!(m.column(0), &[5.0, 6.0]);
    }

    #[test]
    fn sentence_matrix_truncates_to_max_len() {
        let encoded: Vec<u32> = (0..300).map(|i| (i * 7 % 3) as u32).collect();
        let m: SentenceMatrix = build_sentence_matrix(&encoded, &table3(), 200, 8).unwrap();
        assert_eq!(m.len(), 200);
        let t = table3();
        for (i, &w) in encoded[..200].iter().enumerate() {
            let expected: Vec<f64> = t.vector(w).iter().map(|&x| x as f64).collect();
            assert_eq!(m.column(i), &expected[..]);
        }
    }

    #[test]
    fn sentence_matrix_rejects_empty() {
        assert!(matches!(
            build_sentence_matrix::<f64>(&[], &table3(), 10, 3),
            Err(Error::EmptyEncoding)
        ));
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let t = table3();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], EMBEDDING_MAGIC);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
        assert_eq!(buf[24], b'L');
        assert_eq!(f32::from_le_bytes(buf[25..29].try_into().unwrap()), 1.0);
        assert_eq!(buf.len(), 25 + 6 * 4);
        let back = EmbeddingTable::read_binary(&buf[..]).unwrap();
        assert_eq!(back.vectors(), t.vectors());
        assert!(EmbeddingTable::read_binary(&buf[..buf.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn pairs_stay_inside_window(
            encoded in prop::collection::vec(0u32..50, 0..30),
            window in 1usize..6,
            seed in any::<u64>(),
        ) {
            // positions are recovered by making every token unique
            let uniq: Vec<u32> = (0..encoded.len() as u32).collect();
            for (a, b) in generate_pairs(&uniq, window, seed) {
                let dist = (a as i64 - b as i64).unsigned_abs() as usize;
                prop_assert!(dist >= 1 && dist <= window);
            }
        }

        #[test]
        fn sentence_matrix_column_count_bounded(
            len in 1usize..40, min_len in 1usize..10, max_len in 10usize..30,
        ) {
            let encoded: Vec<u32> = (0..len).map(|i| (i % 3) as u32).collect();
            let m: SentenceMatrix = build_sentence_matrix(&encoded, &table3(), max_len, min_len).unwrap();
            prop_assert!(m.len() >= min_len && m.len() <= max_len);
        }
    }
}
