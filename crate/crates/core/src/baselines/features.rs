use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    BagOfWords,
    AvgEmbedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub kind: FeatureKind,
}

/// Occurrence counts per vocabulary index.
pub fn bow_features(seq: &[u32], vocab_size: usize) -> FeatureVector {
    let mut values = vec![0.0; vocab_size];
    for &w in seq {
        values[w as usize] += 1.0;
    }
    FeatureVector {
        values,
        kind: FeatureKind::BagOfWords,
    }
}

/// Mean of the word vectors of `seq`.
pub fn avg_embedding_features(seq: &[u32], table: &EmbeddingTable) -> Result<FeatureVector> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut values = vec![0.0; table.dim()];
    for &w in seq {
        for (acc, &x) in values.iter_mut().zip(table.vector(w)) {
            *acc += x as f64;
        }
    }
    let n = seq.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(FeatureVector {
        values,
        kind: FeatureKind::AvgEmbedding,
    })
}

/// Stacks feature vectors as rows.
pub fn feature_matrix(features: &[FeatureVector]) -> Result<Array2<f64>> {
    let dim = features.first().map_or(0, |f| f.values.len());
    let mut x = Array2::zeros((features.len(), dim));
    for (mut row, f) in x.rows_mut().into_iter().zip(features) {
        if f.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.values.len(),
            });
        }
        row.assign(&ndarray::aview1(&f.values));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts() {
        assert_eq!(
            bow_features(&[2, 2, 5], 6).values,
            vec![0.0, 0.0, 2.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(bow_features(&[], 3).values, vec![0.0; 3]);
    }

    #[test]
    fn averages() {
        let table = EmbeddingTable::from_rows(2, vec![1.0, 2.0, -1.0, -2.0, 0.5, 0.25, 3.0, -1.0]);
        assert_eq!(
            avg_embedding_features(&[2], &table).unwrap().values,
            vec![0.5, 0.25]
        );
        assert_eq!(
            avg_embedding_features(&[0, 1], &table).unwrap().values,
            vec![0.0, 0.0]
        );
        // (1 + 0.5 + 3 + 3 + 1)/5, (2 + 0.25 - 1 - 1 + 2)/5
        let five = avg_embedding_features(&[0, 2, 3, 3, 0], &table)
            .unwrap()
            .values;
        assert!((five[0] - 1.7).abs() < 1e-12);
        assert!((five[1] - 0.45).abs() < 1e-12);
        assert!(matches!(
            avg_embedding_features(&[], &table),
            Err(Error::EmptySequence)
        ));
    }

    proptest! {
        #[test]
        fn bow_is_order_free_and_additive(
            a in prop::collection::vec(0u32..10, 0..20),
            b in prop::collection::vec(0u32..10, 0..20),
        ) {
            let mut rev = a.clone();
            rev.reverse();
            prop_assert_eq!(bow_features(&a, 10), bow_features(&rev, 10));
            let joined: Vec<u32> = a.iter().chain(&b).copied().collect();
            let sum: Vec<f64> = bow_features(&a, 10).values.iter()
                .zip(bow_features(&b, 10).values).map(|(x, y)| x + y).collect();
            prop_assert_eq!(bow_features(&joined, 10).values, sum);
        }

        #[test]
        fn average_of_copies(w in 0u32..4, k in 1usize..10) {
            let table = EmbeddingTable::from_rows(3, (0..12).map(|i| i as f32 * 0.5 - 2.0).collect());
            let avg = avg_embedding_features(&vec![w; k], &table).unwrap().values;
            for (a, &v) in avg.iter().zip(table.vector(w)) {
                prop_assert!((a - v as f64).abs() < 1e-12);
            }
        }
    }
}
