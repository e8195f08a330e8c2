//! Learning under distribution shift with Iterative Chow Filtering.
//!
//! The crate builds a selector that rejects test points on which low-degree
//! polynomial statistics disagree with the training sample, and uses it for
//! PQ learning (classifier plus selector) and tolerant TDS learning
//! (accept/reject plus classifier).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod classifier;
pub mod cvxsub;
pub mod icf;
pub mod l1reg;
pub mod numeric;
pub mod oracle;
pub mod polycore;
pub mod pq;
pub mod records;
pub mod tds;

pub use classifier::{Classifier, ClassifierRecord};
