use nalgebra::DMatrix;

use super::{MonomialBasis, PolyError, Polynomial, Sample};
use crate::classifier::Classifier;

/// Row-major matrix of feature vectors `m(x)` for every point of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(basis: &MonomialBasis, sample: &Sample) -> Result<Self, PolyError> {
        if sample.dim() != basis.dim() {
            return Err(PolyError::DimensionMismatch { expected: basis.dim(), got: sample.dim() });
        }
        let cols = basis.len();
        let rows = sample.len();
        let mut data = vec![0.0; rows * cols];
        for (x, out) in sample.points().zip(data.chunks_exact_mut(cols)) {
            basis.features_into(x, out);
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(cols: usize, data: Vec<f64>) -> Self {
        assert!(cols > 0 && data.len().is_multiple_of(cols), "ragged feature data");
        FeatureMatrix { rows: data.len() / cols, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// `(1/n) M^T M`, exactly symmetrized.
    pub fn gram(&self) -> Result<DMatrix<f64>, PolyError> {
        if self.rows == 0 {
            return Err(PolyError::EmptySample);
        }
        let m = self.to_matrix();
        let g = m.tr_mul(&m) / self.rows as f64;
        Ok((&g + g.transpose()) * 0.5)
    }
}

/// Empirical second-moment matrix `G = (1/|S|) sum m(x) m(x)^T`, so that
/// `c^T G c` is the empirical mean of `p_c(x)^2`.
pub fn empirical_gram(basis: &MonomialBasis, sample: &Sample) -> Result<DMatrix<f64>, PolyError> {
    if sample.is_empty() {
        return Err(PolyError::EmptySample);
    }
    FeatureMatrix::new(basis, sample)?.gram()
}

/// `(1/|S|) sum f(x) |p(x)|`.
pub fn empirical_weighted_abs_mean(f: &Classifier, p: &Polynomial, sample: &Sample) -> Result<f64, PolyError> {
    if sample.is_empty() {
        return Err(PolyError::EmptySample);
    }
    if sample.dim() != p.basis().dim() {
        return Err(PolyError::DimensionMismatch { expected: p.basis().dim(), got: sample.dim() });
    }
    let mut acc = 0.0;
    let mut m = vec![0.0; p.basis().len()];
    for x in sample.points() {
        if f.eval(x) {
            p.basis().features_into(x, &mut m);
            acc += p.eval_features(&m).abs();
        }
    }
    Ok(acc / sample.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::hypercube_points;
    use crate::polycore::enumerate_basis;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn constant_basis_gram_is_one() {
        let b = enumerate_basis(2, 0, false).unwrap();
        let s = Sample::from_rows(2, &[vec![0.3, 9.0], vec![-1.0, 2.0]], None).unwrap();
        let g = empirical_gram(&b, &s).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g[(0, 0)], 1.0);
    }

    #[test]
    fn full_hypercube_multilinear_gram_is_identity() {
        for d in 1..=6 {
            let b = enumerate_basis(d, d, true).unwrap();
            let s = Sample::from_rows(d, &hypercube_points(d), None).unwrap();
            let g = empirical_gram(&b, &s).unwrap();
            let diff = (g - DMatrix::<f64>::identity(b.len(), b.len())).abs().max();
            assert!(diff <= 1e-12, "d={d} diff={diff}");
        }
    }

    #[test]
    fn single_point_gram_is_rank_one() {
        let b = enumerate_basis(2, 1, false).unwrap();
        let s = Sample::from_rows(2, &[vec![1.0, 1.0]], None).unwrap();
        let g = empirical_gram(&b, &s).unwrap();
        assert_eq!(g, DMatrix::from_element(3, 3, 1.0));
    }

    #[test]
    fn empty_sample_errors() {
        let b = enumerate_basis(2, 1, false).unwrap();
        let s = Sample::from_flat(2, vec![], None).unwrap();
        assert!(matches!(empirical_gram(&b, &s), Err(PolyError::EmptySample)));
        let p = Polynomial::zero(Arc::new(b));
        assert!(matches!(
            empirical_weighted_abs_mean(&Classifier::Constant(true), &p, &s),
            Err(PolyError::EmptySample)
        ));
    }

    #[test]
    fn weighted_abs_mean_examples() {
        let b = Arc::new(enumerate_basis(2, 1, false).unwrap());
        let s = Sample::from_rows(2, &[vec![1.0, 0.2], vec![-1.0, 0.7]], None).unwrap();
        let x1 = Polynomial::new(b.clone(), vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(empirical_weighted_abs_mean(&Classifier::Constant(true), &x1, &s).unwrap(), 1.0);
        assert_eq!(empirical_weighted_abs_mean(&Classifier::Constant(false), &x1, &s).unwrap(), 0.0);
        let zero = Polynomial::zero(b);
        assert_eq!(empirical_weighted_abs_mean(&Classifier::Constant(true), &zero, &s).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn quadratic_form_matches_mean_square(
            seed_pts in prop::collection::vec(-2.0f64..2.0, 3 * 7),
            c in prop::collection::vec(-2.0f64..2.0, 10),
        ) {
            let b = Arc::new(enumerate_basis(3, 2, false).unwrap());
            let s = Sample::from_flat(3, seed_pts, None).unwrap();
            let g = empirical_gram(&b, &s).unwrap();
            let cv = nalgebra::DVector::from_vec(c.clone());
            let quad = (cv.transpose() * &g * &cv)[(0, 0)];
            let p = Polynomial::new(b, c).unwrap();
            let direct: f64 = s.points().map(|x| p.eval(x).unwrap().powi(2)).sum::<f64>() / s.len() as f64;
            prop_assert!((quad - direct).abs() <= 1e-9 * direct.abs().max(1e-12) + 1e-12);
        }
    }
}
