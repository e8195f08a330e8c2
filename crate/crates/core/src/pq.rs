//! PQ learning: L1 regression on the training data, then the filter with the
//! family `{f, 1 - f}`, giving a classifier and a selector.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Classifier;
use crate::cvxsub::SolverOptions;
use crate::icf::{run_icf, IcfConfig, IcfError, RunRecord, Selector};
use crate::l1reg::{empirical_error, fit_l1, threshold_round, L1Error};
use crate::polycore::{enumerate_basis, PolyError, Sample};

#[derive(Debug, Error)]
pub enum PqError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Regression(#[from] L1Error),
    #[error(transparent)]
    Filter(#[from] IcfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqConfig {
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub degree: usize,
    pub multilinear: bool,
    pub hyper_a: f64,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Optimality tolerance of the regression step.
    pub l1_opt_tol: f64,
    pub strict_tau: bool,
}

impl PqConfig {
    pub fn new(eps: f64, eta: f64, degree: usize) -> Self {
        PqConfig {
            eps,
            delta: 0.1,
            eta,
            degree,
            multilinear: false,
            hyper_a: 1.0,
            seed: 0,
            solver: SolverOptions::default(),
            l1_opt_tol: 1e-7,
            strict_tau: true,
        }
    }

    pub fn validate(&self) -> Result<(), PqError> {
        for (name, v) in [("eps", self.eps), ("delta", self.delta), ("eta", self.eta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(PqError::Config(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        if !(self.hyper_a >= 1.0) {
            return Err(PqError::Config(format!("A must be at least 1, got {}", self.hyper_a)));
        }
        Ok(())
    }

    pub fn hyperparameters(&self) -> PqHyperparameters {
        pq_hyperparameters(self.eps, self.eta, self.hyper_a, self.degree)
    }
}

/// Filter parameters derived from the PQ targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqHyperparameters {
    pub slack: f64,
    pub beta: f64,
    pub eps_filter: f64,
}

/// `R' = 1/eta + eps/96`, `beta = 4 (2A)^(2l)`, `eps' = eps eta / 96`.
pub fn pq_hyperparameters(eps: f64, eta: f64, hyper_a: f64, degree: usize) -> PqHyperparameters {
    PqHyperparameters {
        slack: 1.0 / eta + eps / 96.0,
        beta: hypercontractive_beta(hyper_a, degree),
        eps_filter: eps * eta / 96.0,
    }
}

/// `4 (2A)^(2l)`.
pub fn hypercontractive_beta(hyper_a: f64, degree: usize) -> f64 {
    4.0 * (2.0 * hyper_a).powf(2.0 * degree as f64)
}

/// Deterministic half/half split of `0..n`: `(regression, reference)`, each sorted.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let half = n.div_ceil(2);
    let mut a = idx[..half].to_vec();
    let mut b = idx[half..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

#[derive(Debug, Clone)]
pub struct PqOutput {
    pub classifier: Classifier,
    pub selector: Selector,
    pub record: RunRecord,
    pub hyperparameters: PqHyperparameters,
    pub l1_objective: f64,
    /// Error of the classifier on the regression split.
    pub train_error: f64,
    pub n_regression: usize,
    pub n_reference: usize,
}

/// Learns the classifier on one half of `train`, then filters `test_points`
/// against the unlabeled other half.
pub fn pq_learn(train: &Sample, test_points: &Sample, cfg: &PqConfig) -> Result<PqOutput, PqError> {
    cfg.validate()?;
    train.require_labels()?;
    if train.len() < 2 || test_points.is_empty() {
        return Err(PolyError::EmptySample.into());
    }
    if train.dim() != test_points.dim() {
        return Err(PolyError::DimensionMismatch { expected: train.dim(), got: test_points.dim() }.into());
    }
    let (reg_idx, ref_idx) = split_indices(train.len(), cfg.seed);
    let reg = train.subset(&reg_idx);
    let reference = train.subset(&ref_idx).unlabeled();
    let hp = cfg.hyperparameters();
    let (classifier, l1_objective, train_error) = learn_classifier(&reg, cfg.degree, cfg.multilinear, cfg.l1_opt_tol)?;
    let icf = IcfConfig {
        degree: cfg.degree,
        multilinear: cfg.multilinear,
        slack: hp.slack,
        beta: hp.beta,
        eps: hp.eps_filter,
        hyper_a: cfg.hyper_a,
        solver: cfg.solver,
        strict_tau: cfg.strict_tau,
        max_iterations: None,
    };
    let family = vec![classifier.clone(), classifier.complement()];
    let (selector, record) = run_icf(&family, &reference, &test_points.unlabeled(), &icf)?;
    Ok(PqOutput {
        classifier,
        selector,
        record,
        hyperparameters: hp,
        l1_objective,
        train_error,
        n_regression: reg.len(),
        n_reference: reference.len(),
    })
}

/// `threshold_round(fit_l1(...))` on a labeled sample; returns the classifier,
/// the L1 objective and the 0/1 training error.
pub fn learn_classifier(
    s: &Sample,
    degree: usize,
    multilinear: bool,
    opt_tol: f64,
) -> Result<(Classifier, f64, f64), PqError> {
    let basis = Arc::new(enumerate_basis(s.dim(), degree, multilinear)?);
    let fit = fit_l1(basis, s, opt_tol)?;
    let h = threshold_round(&fit.poly, s)?;
    let err = empirical_error(&h, s)?;
    Ok((h, fit.objective, err))
}

/// Fraction of labeled points with `h(x) != y` and `s(x) = 1`.
pub fn selective_error(h: &Classifier, s: &Selector, labeled: &Sample) -> Result<f64, IcfError> {
    let labels = labeled.require_labels()?;
    if labeled.is_empty() {
        return Ok(0.0);
    }
    let accept = s.evaluate_sample(labeled)?;
    let wrong =
        labeled.points().zip(labels).zip(&accept).filter(|((x, y), a)| **a && u8::from(h.eval(x)) != **y).count();
    Ok(wrong as f64 / labeled.len() as f64)
}

/// Fraction of points with `s(x) = 0`.
pub fn rejection_rate(s: &Selector, points: &Sample) -> Result<f64, IcfError> {
    if points.is_empty() {
        return Err(PolyError::EmptySample.into());
    }
    let accept = s.evaluate_sample(points)?;
    Ok(accept.iter().filter(|a| !**a).count() as f64 / points.len() as f64)
}
