//! Boolean classifiers `f: R^d -> {0,1}`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::polycore::{BasisSpec, MonomialBasis, PolyError, Polynomial};

type Predicate = dyn Fn(&[f64]) -> bool + Send + Sync;

/// An opaque Boolean function, e.g. a planted concept from a benchmark.
#[derive(Clone)]
pub struct ExternalClassifier {
    name: String,
    func: Arc<Predicate>,
}

impl ExternalClassifier {
    pub fn new(name: impl Into<String>, func: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        ExternalClassifier { name: name.into(), func: Arc::new(func) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for ExternalClassifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalClassifier").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Classifier {
    /// `1{p(x) >= threshold}`.
    PolyThreshold {
        poly: Polynomial,
        threshold: f64,
    },
    /// `1 - inner(x)`.
    Complement(Box<Classifier>),
    Constant(bool),
    External(ExternalClassifier),
}

impl Classifier {
    pub fn poly_threshold(poly: Polynomial, threshold: f64) -> Self {
        Classifier::PolyThreshold { poly, threshold }
    }

    pub fn external(name: impl Into<String>, func: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Classifier::External(ExternalClassifier::new(name, func))
    }

    pub fn complement(&self) -> Classifier {
        Classifier::Complement(Box::new(self.clone()))
    }

    /// `f(x) = 1`.
    pub fn eval(&self, x: &[f64]) -> bool {
        match self {
            Classifier::PolyThreshold { poly, threshold } => {
                let mut m = vec![0.0; poly.basis().len()];
                poly.basis().features_into(x, &mut m);
                poly.eval_features(&m) >= *threshold
            }
            Classifier::Complement(inner) => !inner.eval(x),
            Classifier::Constant(v) => *v,
            Classifier::External(e) => (e.func)(x),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if self.eval(x) {
            1.0
        } else {
            0.0
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::PolyThreshold { .. } => "poly_threshold",
            Classifier::Complement(_) => "complement",
            Classifier::Constant(_) => "constant",
            Classifier::External(_) => "external",
        }
    }

    /// Serializable form; external classifiers have none.
    pub fn to_record(&self) -> Option<ClassifierRecord> {
        Some(match self {
            Classifier::PolyThreshold { poly, threshold } => ClassifierRecord::PolyThreshold {
                basis: poly.basis().spec(),
                coefficients: poly.coefficients().to_vec(),
                threshold: *threshold,
            },
            Classifier::Complement(inner) => ClassifierRecord::Complement { inner: Box::new(inner.to_record()?) },
            Classifier::Constant(v) => ClassifierRecord::Constant { value: u8::from(*v) },
            Classifier::External(_) => return None,
        })
    }

    pub fn from_record(record: &ClassifierRecord) -> Result<Classifier, PolyError> {
        Ok(match record {
            ClassifierRecord::PolyThreshold { basis, coefficients, threshold } => {
                let basis = Arc::new(MonomialBasis::new(*basis)?);
                Classifier::PolyThreshold { poly: Polynomial::new(basis, coefficients.clone())?, threshold: *threshold }
            }
            ClassifierRecord::Complement { inner } => Classifier::Complement(Box::new(Self::from_record(inner)?)),
            ClassifierRecord::Constant { value } => match value {
                0 => Classifier::Constant(false),
                1 => Classifier::Constant(true),
                v => return Err(PolyError::InvalidLabel(*v as i64)),
            },
        })
    }
}

/// Structured text form of a classifier: basis descriptor, coefficients,
/// threshold and a kind tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierRecord {
    PolyThreshold { basis: BasisSpec, coefficients: Vec<f64>, threshold: f64 },
    Complement { inner: Box<ClassifierRecord> },
    Constant { value: u8 },
}
