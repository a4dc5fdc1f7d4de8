//! Committees of sentence CNNs over word2vec features for classifying
//! drug reviews by safety, plus the bag-of-words and averaged-embedding
//! baselines they are compared against.

pub mod baselines;
pub mod corpus;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod synthetic;
pub mod text;

pub use error::{Error, MalformedRow, Result};
