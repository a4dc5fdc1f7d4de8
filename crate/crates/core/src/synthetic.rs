//! Seeded synthetic review corpora with planted, known structure.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::ReviewRecord;
use crate::rng;

const ADVERSE: [&str; 10] = [
    "nausea",
    "dizziness",
    "headache",
    "insomnia",
    "rash",
    "fatigue",
    "cramps",
    "anxiety",
    "vomiting",
    "tremor",
];
const BENIGN: [&str; 10] = [
    "relief",
    "effective",
    "great",
    "helpful",
    "calm",
    "better",
    "improved",
    "wonderful",
    "stable",
    "recommend",
];
/// Weakly class-associated words.
const ADVERSE_CUES: [&str; 3] = ["stopped", "switched", "doctor"];
const BENIGN_CUES: [&str; 3] = ["months", "daily", "refill"];
const NEGATION: &str = "not";

/// Five ordered sentiment groups, worst first.
const GRADES: [[&str; 6]; 5] = [
    [
        "horrible",
        "unbearable",
        "dangerous",
        "agony",
        "worst",
        "hospital",
    ],
    ["bad", "painful", "sick", "weak", "troubling", "harsh"],
    [
        "okay",
        "mixed",
        "average",
        "moderate",
        "tolerable",
        "unsure",
    ],
    ["good", "helped", "mild", "decent", "easier", "pleased"],
    [
        "excellent",
        "perfect",
        "miracle",
        "amazing",
        "cured",
        "best",
    ],
];

const ONSETS: [&str; 15] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Pronounceable filler words `0..count`, identical for every seed.
pub fn filler_words(count: usize) -> Vec<String> {
    let syllables: Vec<String> = ONSETS
        .iter()
        .flat_map(|o| VOWELS.iter().map(move |v| format!("{o}{v}")))
        .collect();
    let s = syllables.len();
    (0..count)
        .map(|i| format!("{}{}{}", syllables[i % s], syllables[(i / s) % s], "x"))
        .collect()
}

/// Zipf(1) sampler over `0..n`.
struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    fn new(n: usize) -> Self {
        let mut acc = 0.0;
        let cumulative = (1..=n)
            .map(|r| {
                acc += 1.0 / r as f64;
                acc
            })
            .collect();
        Zipf { cumulative }
    }

    fn sample(&self, r: &mut rng::Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = r.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c < u)
            .min(self.cumulative.len() - 1)
    }
}

/// Binary corpus whose label is carried by short phrases. Each review has a
/// surface polarity (adverse or benign words) chosen independently of its
/// class; the class is the surface polarity unless every phrase is negated by
/// an immediately preceding `not`. Reviews that are not negated carry the same
/// number of `not` tokens in front of filler words, so word counts reveal the
/// surface polarity but not the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryCorpusSpec {
    pub reviews: usize,
    pub label_noise: f64,
    pub min_phrases: usize,
    pub max_phrases: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub filler_vocab: usize,
    /// Probability that the review's single cue word matches its class.
    pub cue_accuracy: f64,
    pub seed: u64,
}

impl Default for BinaryCorpusSpec {
    fn default() -> Self {
        BinaryCorpusSpec {
            reviews: 2000,
            label_noise: 0.15,
            min_phrases: 2,
            max_phrases: 3,
            min_len: 20,
            max_len: 40,
            filler_vocab: 200,
            cue_accuracy: 0.7,
            seed: 1,
        }
    }
}

/// Places `phrases` at non-overlapping, non-adjacent random slots among
/// `fill`, returning the token list.
fn interleave(r: &mut rng::Rng, mut fill: Vec<String>, phrases: Vec<Vec<String>>) -> Vec<String> {
    // Insert in front of distinct filler positions, back to front.
    let mut slots: Vec<usize> = rand::seq::index::sample(r, fill.len(), phrases.len()).into_vec();
    slots.sort_unstable();
    for (slot, phrase) in slots.into_iter().zip(phrases).rev() {
        fill.splice(slot..slot, phrase);
    }
    fill
}

pub fn binary_corpus(spec: &BinaryCorpusSpec) -> Vec<ReviewRecord> {
    let mut r = rng::seeded(spec.seed);
    let filler = filler_words(spec.filler_vocab);
    let zipf = Zipf::new(filler.len());
    let filler_word = |r: &mut rng::Rng| filler[zipf.sample(r)].clone();

    (0..spec.reviews)
        .map(|_| {
            let class = r.random_range(0..2usize);
            let negated = r.random_bool(0.5);
            // class 0 is adverse
            let surface_adverse = (class == 0) != negated;
            let words: &[&str] = if surface_adverse { &ADVERSE } else { &BENIGN };
            let phrases_n = r.random_range(spec.min_phrases..=spec.max_phrases);

            let mut phrases: Vec<Vec<String>> = (0..phrases_n)
                .map(|_| {
                    let w = words[r.random_range(0..words.len())].to_string();
                    if negated {
                        vec![NEGATION.to_string(), w]
                    } else {
                        vec![w]
                    }
                })
                .collect();
            if !negated {
                for _ in 0..phrases_n {
                    phrases.push(vec![NEGATION.to_string(), filler_word(&mut r)]);
                }
            }
            let cue_class = if r.random_bool(spec.cue_accuracy) {
                class
            } else {
                1 - class
            };
            let cues = if cue_class == 0 {
                &ADVERSE_CUES
            } else {
                &BENIGN_CUES
            };
            phrases.push(vec![cues[r.random_range(0..cues.len())].to_string()]);

            let used: usize = phrases.iter().map(Vec::len).sum();
            let len = r
                .random_range(spec.min_len..=spec.max_len)
                .max(used + phrases.len());
            let fill: Vec<String> = (0..len - used).map(|_| filler_word(&mut r)).collect();
            let tokens = interleave(&mut r, fill, phrases);

            let label = if r.random_bool(spec.label_noise) {
                1 - class
            } else {
                class
            };
            let rating = if label == 0 {
                r.random_range(1..=2)
            } else {
                r.random_range(4..=5)
            };
            ReviewRecord::new(rating, tokens.join(" "))
        })
        .collect()
}

/// Five-class corpus: each review carries one contiguous phrase of sentiment
/// tokens. Each token of a class-`c` review comes from group `c` with
/// probability `p_same`, otherwise from an adjacent group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalCorpusSpec {
    pub reviews: usize,
    pub sentiment_tokens: usize,
    pub p_same: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub filler_vocab: usize,
    pub seed: u64,
}

impl Default for OrdinalCorpusSpec {
    fn default() -> Self {
        OrdinalCorpusSpec {
            reviews: 2000,
            sentiment_tokens: 3,
            p_same: 0.6,
            min_len: 20,
            max_len: 40,
            filler_vocab: 200,
            seed: 1,
        }
    }
}

pub fn ordinal_corpus(spec: &OrdinalCorpusSpec) -> Vec<ReviewRecord> {
    let mut r = rng::seeded(spec.seed);
    let filler = filler_words(spec.filler_vocab);
    let zipf = Zipf::new(filler.len());
    (0..spec.reviews)
        .map(|_| {
            let class = r.random_range(0..5usize);
            let phrase: Vec<String> = (0..spec.sentiment_tokens)
                .map(|_| {
                    let group = if r.random_bool(spec.p_same) {
                        class
                    } else {
                        // the two neighbours share the remaining mass; at the
                        // ends the single neighbour takes it all
                        match class {
                            0 => 1,
                            4 => 3,
                            c if r.random_bool(0.5) => c - 1,
                            c => c + 1,
                        }
                    };
                    GRADES[group][r.random_range(0..GRADES[group].len())].to_string()
                })
                .collect();
            let len = r
                .random_range(spec.min_len..=spec.max_len)
                .max(2 * spec.sentiment_tokens);
            let fill: Vec<String> = (0..len - spec.sentiment_tokens)
                .map(|_| filler[zipf.sample(&mut r)].clone())
                .collect();
            let tokens = interleave(&mut r, fill, vec![phrase]);
            ReviewRecord::new(class as u8 + 1, tokens.join(" "))
        })
        .collect()
}

/// Sentences that each draw words from a single cluster, mixed with shared
/// filler. Returns the sentences and the cluster word lists.
pub fn cluster_sentences(
    clusters: usize,
    words_per_cluster: usize,
    sentences: usize,
    len: usize,
    filler_share: f64,
    seed: u64,
) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut r = rng::seeded(seed);
    let names: Vec<Vec<String>> = (0..clusters)
        .map(|c| {
            (0..words_per_cluster)
                .map(|w| format!("c{c}w{w}"))
                .collect()
        })
        .collect();
    let filler = filler_words(50);
    let text = (0..sentences)
        .map(|_| {
            let c = r.random_range(0..clusters);
            (0..len)
                .map(|_| {
                    if r.random_bool(filler_share) {
                        filler[r.random_range(0..filler.len())].clone()
                    } else {
                        names[c][r.random_range(0..words_per_cluster)].clone()
                    }
                })
                .collect()
        })
        .collect();
    (text, names)
}
