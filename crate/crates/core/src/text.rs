//! Tokenization and the frequency-filtered vocabulary.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

/// An ordered list of lowercase, whitespace-free word tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

impl From<Vec<String>> for TokenSequence {
    fn from(tokens: Vec<String>) -> Self {
        TokenSequence { tokens }
    }
}

/// Lowercases, splits on Unicode whitespace and strips non-alphanumeric
/// characters from both ends of every token. Tokens left empty are dropped.
pub fn tokenize(text: &str) -> TokenSequence {
    let tokens = text
        .split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            (!trimmed.is_empty()).then(|| trimmed.to_lowercase())
        })
        .collect();
    TokenSequence { tokens }
}

/// Dense word index ordered by descending corpus frequency, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    min_count: u64,
}

impl Vocabulary {
    fn from_sorted(entries: Vec<(String, u64)>, min_count: u64) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i as u32))
            .collect();
        let (words, counts) = entries.into_iter().unzip();
        Vocabulary {
            words,
            counts,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: u32) -> Option<&str> {
        self.words.get(index as usize).map(String::as_str)
    }

    pub fn count(&self, index: u32) -> Option<u64> {
        self.counts.get(index as usize).copied()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Writes `word<TAB>index<TAB>frequency` lines in index order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, (w, c)) in self.words.iter().zip(&self.counts).enumerate() {
            writeln!(out, "{w}\t{i}\t{c}")?;
        }
        Ok(())
    }

    /// Reads the TSV written by [`Vocabulary::write_tsv`]. The minimum
    /// frequency is recovered as the smallest stored count.
    pub fn read_tsv<R: Read>(input: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (line_no, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(word), Some(idx), Some(freq), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::format(
                    "vocabulary",
                    format!("line {}: expected 3 tab-separated fields", line_no + 1),
                ));
            };
            let idx: usize = idx.parse().map_err(|_| {
                Error::format("vocabulary", format!("line {}: bad index", line_no + 1))
            })?;
            let freq: u64 = freq.parse().map_err(|_| {
                Error::format("vocabulary", format!("line {}: bad frequency", line_no + 1))
            })?;
            if idx != entries.len() {
                return Err(Error::format(
                    "vocabulary",
                    format!("line {}: index {idx} out of sequence", line_no + 1),
                ));
            }
            entries.push((word.to_string(), freq));
        }
        let min_count = entries.iter().map(|(_, c)| *c).min().unwrap_or(1);
        Ok(Vocabulary::from_sorted(entries, min_count))
    }
}

/// Builds the vocabulary of words occurring at least `min_count` times.
pub fn build_vocabulary<'a, I>(corpus: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    let min_count = min_count.max(1);
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for tok in seq.iter() {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(String, u64)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Vocabulary::from_sorted(entries, min_count))
}

/// Maps tokens to vocabulary indices, dropping out-of-vocabulary words.
pub fn encode(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<u32> {
    seq.iter().filter_map(|t| vocab.index_of(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> TokenSequence {
        tokenize(s)
    }

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_lowercases_and_strips_edges() {
        assert_eq!(
            tokenize("I felt Dizzy, nauseous!").tokens,
            toks(&["i", "felt", "dizzy", "nauseous"])
        );
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n ").is_empty());
    }

    #[test]
    fn tokenize_keeps_numerals_and_inner_punctuation() {
        assert_eq!(
            tokenize("Took 20mg... didn't help -- at ALL?!").tokens,
            toks(&["took", "20mg", "didn't", "help", "at", "all"])
        );
    }

    // Hand-tokenized paragraph: lowercase, whitespace split, edge punctuation
    // removed, punctuation-only tokens ("--", "...", "!!!") dropped.
    #[test]
    fn tokenize_golden_paragraph() {
        let text = "\
Started Lexapro 10mg in March.  Week one: awful nausea!
I couldn't sleep -- at all... (seriously).
By week 3 the \"brain zaps\" stopped; mood improved 80%.
Side-effects? Dry mouth, yawning, vivid dreams.
Doctor said: \"give it 6 weeks\" -- she was right!!!
Would I recommend it? Yes.
Lost 5 lbs, then gained 12.
Libido: gone. Energy: up.
Overall 4/5 stars.
Don't stop cold-turkey!";
        let expected = toks(&[
            "started",
            "lexapro",
            "10mg",
            "in",
            "march",
            "week",
            "one",
            "awful",
            "nausea",
            "i",
            "couldn't",
            "sleep",
            "at",
            "all",
            "seriously",
            "by",
            "week",
            "3",
            "the",
            "brain",
            "zaps",
            "stopped",
            "mood",
            "improved",
            "80",
            "side-effects",
            "dry",
            "mouth",
            "yawning",
            "vivid",
            "dreams",
            "doctor",
            "said",
            "give",
            "it",
            "6",
            "weeks",
            "she",
            "was",
            "right",
            "would",
            "i",
            "recommend",
            "it",
            "yes",
            "lost",
            "5",
            "lbs",
            "then",
            "gained",
            "12",
            "libido",
            "gone",
            "energy",
            "up",
            "overall",
            "4/5",
            "stars",
            "don't",
            "stop",
            "cold-turkey",
        ]);
        assert_eq!(tokenize(text).tokens, expected);
    }

    #[test]
    fn vocabulary_min_count_boundary() {
        let corpus = vec![seq("pain pain pain ache ache"), seq("pain ache pain ache")];
        // pain ×5, ache ×4
        let v = build_vocabulary(&corpus, 5).unwrap();
        assert_eq!(v.words(), &toks(&["pain"])[..]);
        assert_eq!(v.count(0), Some(5));
    }

    #[test]
    fn vocabulary_min_count_one_keeps_everything() {
        let corpus = vec![seq("b a c a"), seq("d")];
        let v = build_vocabulary(&corpus, 1).unwrap();
        assert_eq!(v.len(), 4);
        // a:2 first, then b, c, d lexicographically at count 1
        assert_eq!(v.words(), &toks(&["a", "b", "c", "d"])[..]);
    }

    #[test]
    fn vocabulary_empty_after_filter() {
        let corpus = vec![seq("one two three")];
        assert!(matches!(
            build_vocabulary(&corpus, 2),
            Err(Error::EmptyVocabulary { min_count: 2 })
        ));
    }

    // 100-token fixture; the frozen table was tallied by an external script
    // and is re-checked here against a brute-force count.
    const FIXTURE_100: &str = "\
the pill made me tired and the pill made me sick the doctor said wait \
and i waited but the nausea got worse and worse so i stopped the pill \
after two weeks my head cleared and my sleep came back the doctor then \
tried a new pill and the new pill was fine no nausea no headache and i \
sleep well now the pill works i would say try it but watch the nausea \
early on and tell the doctor about it because my sister had the same \
nausea with this pill and she quit it last year ago";

    #[test]
    fn vocabulary_golden_table() {
        let s = seq(FIXTURE_100);
        assert_eq!(s.len(), 100);
        let v = build_vocabulary(std::iter::once(&s), 3).unwrap();
        let table: Vec<(&str, u32, u64)> = v
            .words()
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i as u32, v.counts()[i]))
            .collect();
        assert_eq!(
            table,
            vec![
                ("the", 0, 11),
                ("and", 1, 8),
                ("pill", 2, 7),
                ("i", 3, 4),
                ("nausea", 4, 4),
                ("doctor", 5, 3),
                ("it", 6, 3),
                ("my", 7, 3),
            ]
        );
        for (w, _, c) in &table {
            let brute = FIXTURE_100.split_whitespace().filter(|t| t == w).count() as u64;
            assert_eq!(brute, *c, "{w}");
        }
    }

    #[test]
    fn encode_drops_oov() {
        let corpus = vec![seq("a a b b c")];
        let v = build_vocabulary(&corpus, 2).unwrap();
        assert_eq!(encode(&seq("a b"), &v), vec![0, 1]);
        assert_eq!(encode(&seq("x y z"), &v), Vec::<u32>::new());
        assert_eq!(encode(&seq("c a z b a"), &v), vec![0, 1, 0]);
    }

    #[test]
    fn tsv_round_trip() {
        let corpus = vec![seq("z y y x x x")];
        let v = build_vocabulary(&corpus, 1).unwrap();
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "x\t0\t3\ny\t1\t2\nz\t2\t1\n"
        );
        assert_eq!(Vocabulary::read_tsv(&buf[..]).unwrap(), v);
    }

    proptest! {
        #[test]
        fn tokens_have_no_whitespace(text in "\\PC{0,80}") {
            for t in tokenize(&text).tokens {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }

        #[test]
        fn vocabulary_respects_min_count(
            words in prop::collection::vec("[a-e]{1,2}", 1..60),
            min_count in 1u64..4,
        ) {
            let s = TokenSequence::from(words.clone());
            match build_vocabulary(std::iter::once(&s), min_count) {
                Ok(v) => {
                    let mut brute: HashMap<&str, u64> = HashMap::new();
                    for w in &words { *brute.entry(w).or_default() += 1; }
                    for (w, c) in &brute {
                        prop_assert_eq!(v.index_of(w).is_some(), *c >= min_count);
                    }
                    for (i, w) in v.words().iter().enumerate() {
                        prop_assert_eq!(v.index_of(w), Some(i as u32));
                    }
                    prop_assert!(encode(&s, &v).iter().all(|&i| (i as usize) < v.len()));
                }
                Err(_) => {
                    let all_rare = words
                        .iter()
                        .all(|w| words.iter().filter(|x| *x == w).count() < min_count as usize);
                    prop_assert!(all_rare);
                }
            }
        }
    }
}
