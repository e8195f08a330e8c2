use std::sync::Arc;

use super::{MonomialBasis, PolyError};
use crate::numeric::dot;

/// A polynomial as a coefficient vector over a shared [`MonomialBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    basis: Arc<MonomialBasis>,
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(basis: Arc<MonomialBasis>, coefficients: Vec<f64>) -> Result<Self, PolyError> {
        if coefficients.len() != basis.len() {
            return Err(PolyError::DimensionMismatch { expected: basis.len(), got: coefficients.len() });
        }
        Ok(Polynomial { basis, coefficients })
    }

    pub fn zero(basis: Arc<MonomialBasis>) -> Self {
        let n = basis.len();
        Polynomial { basis, coefficients: vec![0.0; n] }
    }

    pub fn constant(basis: Arc<MonomialBasis>, value: f64) -> Self {
        let mut p = Self::zero(basis);
        p.coefficients[0] = value;
        p
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, PolyError> {
        let m = self.basis.features(x)?;
        Ok(dot(&m, &self.coefficients))
    }

    /// Value on a precomputed feature row.
    #[inline]
    pub fn eval_features(&self, features: &[f64]) -> f64 {
        dot(features, &self.coefficients)
    }

    /// `alpha * self + beta * other`; both must share a basis.
    pub fn combine(&self, alpha: f64, other: &Polynomial, beta: f64) -> Result<Polynomial, PolyError> {
        if self.basis.spec() != other.basis.spec() {
            return Err(PolyError::DimensionMismatch { expected: self.basis.len(), got: other.basis.len() });
        }
        let coefficients =
            self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| alpha * a + beta * b).collect();
        Ok(Polynomial { basis: self.basis.clone(), coefficients })
    }
}

/// `sum_a c_a * prod_j x_j^{a_j}`.
pub fn eval_poly(p: &Polynomial, x: &[f64]) -> Result<f64, PolyError> {
    p.eval(x)
}
