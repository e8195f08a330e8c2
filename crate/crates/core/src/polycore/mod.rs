//! Polynomial representation over a canonical monomial basis, samples, feature
//! matrices and the empirical moments the filtering algorithm is built from.

mod basis;
mod dataset;
mod moments;
mod polynomial;
mod sample;

pub use basis::{enumerate_basis, BasisSpec, MonomialBasis, DEFAULT_BASIS_CAP};
pub use dataset::{read_dataset, write_dataset, LabelColumn};
pub use moments::{empirical_gram, empirical_weighted_abs_mean, FeatureMatrix};
pub use polynomial::{eval_poly, Polynomial};
pub use sample::{Provenance, Sample};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("monomial basis of size {size} exceeds the cap of {cap}")]
    BasisTooLarge { size: u128, cap: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample is empty")]
    EmptySample,
    #[error("labels length {labels} does not match {points} points")]
    LabelLength { labels: usize, points: usize },
    #[error("label {0} is not in {{0,1}}")]
    InvalidLabel(i64),
    #[error("sample has no labels")]
    MissingLabels,
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
