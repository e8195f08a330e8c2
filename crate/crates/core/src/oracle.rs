//! Brute-force ground truth for small instances: exact expectations over the
//! Boolean hypercube, exact Chow parameters, finite-support distributions and
//! the joint optimal error over an enumerable concept class.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::classifier::Classifier;
use crate::numeric::{pairwise_sum_slice, row_key};
use crate::polycore::{MonomialBasis, Sample};

/// Largest hypercube dimension the enumerators accept.
pub const MAX_HYPERCUBE_DIM: usize = 20;
/// Largest concept class `exact_lambda` accepts.
pub const MAX_CONCEPTS: usize = 1_000_000;
/// Two joint errors closer than this are treated as a tie.
pub const TIE_TOL: f64 = 1e-12;

const BLOCK: usize = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("hypercube dimension {0} outside 1..={MAX_HYPERCUBE_DIM}")]
    DimensionOutOfRange(usize),
    #[error("basis dimension {basis} does not match d = {d}")]
    DimensionMismatch { basis: usize, d: usize },
    #[error("exact Chow parameters need a multilinear basis")]
    NotMultilinear,
    #[error("concept class is empty")]
    EmptyClass,
    #[error("concept class has {0} members, more than {MAX_CONCEPTS}")]
    ClassTooLarge(usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

fn check_dim(d: usize) -> Result<(), OracleError> {
    if d == 0 || d > MAX_HYPERCUBE_DIM {
        Err(OracleError::DimensionOutOfRange(d))
    } else {
        Ok(())
    }
}

/// Writes the `index`-th hypercube point into `out`: bit `j` set means `x_{j+1} = -1`.
#[inline]
pub fn hypercube_point_into(index: usize, out: &mut [f64]) {
    for (j, v) in out.iter_mut().enumerate() {
        *v = if (index >> j) & 1 == 1 { -1.0 } else { 1.0 };
    }
}

/// All `2^d` points of `{-1,1}^d` in index order.
pub fn hypercube_points(d: usize) -> Vec<Vec<f64>> {
    (0..1usize << d)
        .map(|i| {
            let mut x = vec![0.0; d];
            hypercube_point_into(i, &mut x);
            x
        })
        .collect()
}

/// Per-block partial sums, computed in parallel when available, in block order.
fn block_sums<T: Send>(n_blocks: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_blocks).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_blocks).map(f).collect()
    }
}

/// `2^-d` times the sum of `g` over the hypercube, using a fixed summation tree.
pub fn exact_expectation_hypercube(d: usize, g: impl Fn(&[f64]) -> f64 + Sync) -> Result<f64, OracleError> {
    check_dim(d)?;
    let n = 1usize << d;
    let sums = block_sums(n.div_ceil(BLOCK), |b| {
        let mut x = vec![0.0; d];
        let mut vals = Vec::with_capacity(BLOCK);
        for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
            hypercube_point_into(i, &mut x);
            vals.push(g(&x));
        }
        pairwise_sum_slice(&vals)
    });
    Ok(pairwise_sum_slice(&sums) / n as f64)
}

/// `E[f(x) chi_a(x)]` under the uniform hypercube measure, one entry per basis element.
pub fn exact_chow(f: &Classifier, basis: &MonomialBasis, d: usize) -> Result<Vec<f64>, OracleError> {
    check_dim(d)?;
    if basis.dim() != d {
        return Err(OracleError::DimensionMismatch { basis: basis.dim(), d });
    }
    if !basis.is_multilinear() {
        return Err(OracleError::NotMultilinear);
    }
    let n = 1usize << d;
    let k = basis.len();
    let sums = block_sums(n.div_ceil(BLOCK), |b| {
        let mut x = vec![0.0; d];
        let mut m = vec![0.0; k];
        let mut acc = vec![0.0; k];
        for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
            hypercube_point_into(i, &mut x);
            if f.eval(&x) {
                basis.features_into(&x, &mut m);
                for (a, v) in acc.iter_mut().zip(&m) {
                    *a += v;
                }
            }
        }
        acc
    });
    Ok((0..k)
        .map(|j| {
            let col: Vec<f64> = sums.iter().map(|s| s[j]).collect();
            pairwise_sum_slice(&col) / n as f64
        })
        .collect())
}

/// A probability distribution with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    dim: usize,
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl FiniteDistribution {
    /// `weights` must be nonnegative and sum to 1 within `1e-12`.
    pub fn new(dim: usize, support: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, OracleError> {
        if dim == 0 {
            return Err(OracleError::InvalidDistribution("dimension 0".into()));
        }
        if support.is_empty() || support.len() != weights.len() {
            return Err(OracleError::InvalidDistribution(format!(
                "{} points and {} weights",
                support.len(),
                weights.len()
            )));
        }
        if let Some(p) = support.iter().find(|p| p.len() != dim) {
            return Err(OracleError::InvalidDistribution(format!("point of length {} in dimension {dim}", p.len())));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(OracleError::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total = pairwise_sum_slice(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(OracleError::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(FiniteDistribution { dim, support: support.concat(), weights })
    }

    /// Normalizes nonnegative masses into weights.
    pub fn from_masses(dim: usize, support: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self, OracleError> {
        let total = pairwise_sum_slice(&masses);
        if !(total > 0.0) {
            return Err(OracleError::InvalidDistribution("total mass is not positive".into()));
        }
        let weights = masses.iter().map(|m| m / total).collect();
        Self::new(dim, support, weights)
    }

    pub fn uniform_hypercube(d: usize) -> Result<Self, OracleError> {
        check_dim(d)?;
        let n = 1usize << d;
        Self::new(d, hypercube_points(d), vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        let terms: Vec<f64> = (0..self.len()).map(|i| self.weights[i] * g(self.point(i))).collect();
        pairwise_sum_slice(&terms)
    }

    /// Draws `n` i.i.d. points.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Sample {
        let idx = WeightedIndex::new(&self.weights).expect("validated weights");
        let mut flat = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            flat.extend_from_slice(self.point(idx.sample(rng)));
        }
        Sample::from_flat(self.dim, flat, None).expect("consistent dimensions")
    }

    fn mass_by_point(&self) -> HashMap<Vec<u64>, f64> {
        let mut map: HashMap<Vec<u64>, f64> = HashMap::new();
        for i in 0..self.len() {
            *map.entry(row_key(self.point(i))).or_insert(0.0) += self.weights[i];
        }
        map
    }

    /// Total variation distance; repeated support points are merged.
    pub fn total_variation(&self, other: &FiniteDistribution) -> f64 {
        let a = self.mass_by_point();
        let b = other.mass_by_point();
        let mut keys: Vec<&Vec<u64>> = a.keys().chain(b.keys()).collect();
        keys.sort();
        keys.dedup();
        let diffs: Vec<f64> = keys
            .iter()
            .map(|k| (a.get(*k).copied().unwrap_or(0.0) - b.get(*k).copied().unwrap_or(0.0)).abs())
            .collect();
        0.5 * pairwise_sum_slice(&diffs)
    }
}

/// A finite marginal together with `Pr[y = 1 | x]` at every support point.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFiniteDistribution {
    marginal: FiniteDistribution,
    prob_one: Vec<f64>,
}

impl LabeledFiniteDistribution {
    pub fn new(marginal: FiniteDistribution, prob_one: Vec<f64>) -> Result<Self, OracleError> {
        if prob_one.len() != marginal.len() {
            return Err(OracleError::InvalidDistribution("label vector length".into()));
        }
        if prob_one.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(OracleError::InvalidDistribution("label probability outside [0,1]".into()));
        }
        Ok(LabeledFiniteDistribution { marginal, prob_one })
    }

    /// Noiseless labels from a concept.
    pub fn from_concept(marginal: FiniteDistribution, concept: impl Fn(&[f64]) -> bool) -> Self {
        Self::with_noise(marginal, concept, 0.0)
    }

    /// Labels from a concept, each flipped independently with probability `noise`.
    pub fn with_noise(marginal: FiniteDistribution, concept: impl Fn(&[f64]) -> bool, noise: f64) -> Self {
        let prob_one =
            (0..marginal.len()).map(|i| if concept(marginal.point(i)) { 1.0 - noise } else { noise }).collect();
        LabeledFiniteDistribution { marginal, prob_one }
    }

    pub fn marginal(&self) -> &FiniteDistribution {
        &self.marginal
    }

    pub fn prob_one(&self) -> &[f64] {
        &self.prob_one
    }

    /// `Pr[h(x) != y]`.
    pub fn error(&self, h: impl Fn(&[f64]) -> bool) -> f64 {
        let terms: Vec<f64> = (0..self.marginal.len())
            .map(|i| {
                let q = self.prob_one[i];
                self.marginal.weights[i] * if h(self.marginal.point(i)) { 1.0 - q } else { q }
            })
            .collect();
        pairwise_sum_slice(&terms)
    }

    /// Draws `n` labeled points.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Sample {
        let idx = WeightedIndex::new(&self.marginal.weights).expect("validated weights");
        let d = self.marginal.dim;
        let mut flat = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let i = idx.sample(rng);
            flat.extend_from_slice(self.marginal.point(i));
            labels.push(u8::from(rng.random::<f64>() < self.prob_one[i]));
        }
        Sample::from_flat(d, flat, Some(labels)).expect("consistent dimensions")
    }
}

/// The joint optimal error over a concept class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaReport {
    pub lambda: f64,
    pub lambda_train: f64,
    pub lambda_test: f64,
    /// Index of the selected joint minimizer.
    pub argmin: usize,
    /// Smallest training error over the class.
    pub opt_train: f64,
}

/// Minimizes `err_train + err_test` over the class. Among joint minimizers
/// the smallest training error wins, then the earliest concept.
pub fn exact_lambda(
    concepts: &[Classifier],
    train: &LabeledFiniteDistribution,
    test: &LabeledFiniteDistribution,
) -> Result<LambdaReport, OracleError> {
    if concepts.is_empty() {
        return Err(OracleError::EmptyClass);
    }
    if concepts.len() > MAX_CONCEPTS {
        return Err(OracleError::ClassTooLarge(concepts.len()));
    }
    let errs = block_sums(concepts.len(), |i| {
        let c = &concepts[i];
        (train.error(|x| c.eval(x)), test.error(|x| c.eval(x)))
    });
    let mut best = 0;
    let mut opt_train = f64::INFINITY;
    for (i, &(tr, te)) in errs.iter().enumerate() {
        opt_train = opt_train.min(tr);
        let (btr, bte) = errs[best];
        let (total, btotal) = (tr + te, btr + bte);
        if total < btotal - TIE_TOL || ((total - btotal).abs() <= TIE_TOL && tr < btr - TIE_TOL) {
            best = i;
        }
    }
    let (tr, te) = errs[best];
    Ok(LambdaReport { lambda: tr + te, lambda_train: tr, lambda_test: te, argmin: best, opt_train })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polycore::enumerate_basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expectation_examples() {
        assert_eq!(exact_expectation_hypercube(4, |_| 1.0).unwrap(), 1.0);
        assert_eq!(exact_expectation_hypercube(3, |x| x[0]).unwrap(), 0.0);
        let v = exact_expectation_hypercube(2, |x| if x[0] == 1.0 { x[0] } else { 0.0 }).unwrap();
        assert_eq!(v, 0.5);
        assert_eq!(exact_expectation_hypercube(21, |_| 1.0), Err(OracleError::DimensionOutOfRange(21)));
        assert_eq!(exact_expectation_hypercube(0, |_| 1.0), Err(OracleError::DimensionOutOfRange(0)));
    }

    #[test]
    fn chow_examples() {
        let b = enumerate_basis(2, 2, true).unwrap();
        assert_eq!(exact_chow(&Classifier::Constant(false), &b, 2).unwrap(), vec![0.0; 4]);
        assert_eq!(exact_chow(&Classifier::Constant(true), &b, 2).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let f = Classifier::external("x1=1", |x| x[0] == 1.0);
        assert_eq!(exact_chow(&f, &b, 2).unwrap(), vec![0.5, 0.5, 0.0, 0.0]);
        let general = enumerate_basis(2, 2, false).unwrap();
        assert_eq!(exact_chow(&f, &general, 2), Err(OracleError::NotMultilinear));
    }

    #[test]
    fn chow_matches_direct_expectation() {
        let d = 5;
        let b = enumerate_basis(d, 3, true).unwrap();
        let f = Classifier::external("maj3", |x| x[0] + x[1] + x[2] > 0.0);
        let chow = exact_chow(&f, &b, d).unwrap();
        for (j, c) in chow.iter().enumerate() {
            let e = exact_expectation_hypercube(d, |x| {
                let m = b.features(x).unwrap();
                if f.eval(x) {
                    m[j]
                } else {
                    0.0
                }
            })
            .unwrap();
            assert_eq!(*c, e);
        }
        // 0/1 majority of three puts 1/4 on each of its singletons.
        assert_eq!(chow[1], 0.25 * 1.0);
    }

    fn two_point(d_labels: [f64; 2]) -> LabeledFiniteDistribution {
        let m = FiniteDistribution::new(1, vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5]).unwrap();
        LabeledFiniteDistribution::new(m, d_labels.to_vec()).unwrap()
    }

    #[test]
    fn lambda_realizable_is_zero() {
        let tr = two_point([1.0, 0.0]);
        let class = vec![Classifier::Constant(true), Classifier::external("x>0", |x| x[0] > 0.0)];
        let r = exact_lambda(&class, &tr, &tr).unwrap();
        assert_eq!((r.lambda, r.lambda_train, r.lambda_test, r.argmin, r.opt_train), (0.0, 0.0, 0.0, 1, 0.0));
    }

    #[test]
    fn lambda_tie_breaks_on_training_error() {
        let tr = two_point([1.0, 1.0]);
        let te = two_point([0.0, 0.0]);
        let class = vec![Classifier::Constant(false), Classifier::Constant(true)];
        let r = exact_lambda(&class, &tr, &te).unwrap();
        assert_eq!((r.lambda, r.lambda_train, r.lambda_test, r.argmin), (1.0, 0.0, 1.0, 1));
        let rev = vec![Classifier::Constant(true), Classifier::Constant(false)];
        let r2 = exact_lambda(&rev, &tr, &te).unwrap();
        assert_eq!((r2.lambda, r2.lambda_train, r2.argmin), (1.0, 0.0, 0));
    }

    #[test]
    fn lambda_single_concept_direct() {
        let tr = two_point([0.2, 0.0]);
        let te = two_point([0.4, 0.0]);
        let r = exact_lambda(&[Classifier::Constant(false)], &tr, &te).unwrap();
        assert!((r.lambda_train - 0.1).abs() < 1e-15);
        assert!((r.lambda - 0.3).abs() < 1e-15);
        assert_eq!(exact_lambda(&[], &tr, &te), Err(OracleError::EmptyClass));
    }

    #[test]
    fn distribution_validation_and_tv() {
        assert!(FiniteDistribution::new(1, vec![vec![0.0]], vec![0.9]).is_err());
        assert!(FiniteDistribution::new(1, vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
        let u = FiniteDistribution::uniform_hypercube(3).unwrap();
        assert_eq!(u.total_variation(&u), 0.0);
        let sub: Vec<Vec<f64>> = hypercube_points(3).into_iter().filter(|x| x[0] == 1.0).collect();
        let s = FiniteDistribution::from_masses(3, sub, vec![1.0; 4]).unwrap();
        assert!((u.total_variation(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn labeled_sampling_matches_error() {
        let m = FiniteDistribution::uniform_hypercube(3).unwrap();
        let lab = LabeledFiniteDistribution::with_noise(m, |x| x[0] > 0.0, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = lab.sample(20_000, &mut rng);
        let ys = s.labels().unwrap();
        let miss = s.points().zip(ys).filter(|(x, y)| u8::from(x[0] > 0.0) != **y).count();
        let emp = miss as f64 / s.len() as f64;
        let se = (0.2f64 * 0.8 / 20_000.0).sqrt();
        assert!((emp - lab.error(|x| x[0] > 0.0)).abs() < 5.0 * se, "{emp}");
    }
}
