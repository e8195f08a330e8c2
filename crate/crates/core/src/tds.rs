//! Tolerant TDS learning: the PQ pipeline plus an accept/reject decision
//! from the selector's rejection rate on held-out test points.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Classifier;
use crate::cvxsub::SolverOptions;
use crate::icf::{run_icf, IcfConfig, IcfError, RunRecord, Selector};
use crate::polycore::{PolyError, Sample};
use crate::pq::{hypercontractive_beta, learn_classifier, rejection_rate, split_indices, PqError};

#[derive(Debug, Error)]
pub enum TdsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("need more than {needed} test points, got {got}")]
    InsufficientTestData { needed: usize, got: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Pq(#[from] PqError),
    #[error(transparent)]
    Filter(#[from] IcfError),
}

/// `1 + max(sqrt(theta/2), eps/9)`.
pub fn default_r(theta: f64, eps: f64) -> f64 {
    1.0 + (theta / 2.0).sqrt().max(eps / 9.0)
}

/// `R theta / (R - 1) + eps / 4`.
pub fn accept_threshold(slack: f64, theta: f64, eps: f64) -> f64 {
    slack * theta / (slack - 1.0) + eps / 4.0
}

/// `(R - 1) eps / (128 R^2)`.
pub fn tds_filter_eps(slack: f64, eps: f64) -> f64 {
    (slack - 1.0) * eps / (128.0 * slack * slack)
}

/// `max(ceil(ln(1/delta) / eps^2), 100)`.
pub fn holdout_size(eps: f64, delta: f64) -> usize {
    ((1.0 / delta).ln() / (eps * eps)).ceil().max(100.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdsConfig {
    pub eps: f64,
    pub delta: f64,
    pub theta: f64,
    /// Slack `R`; `None` uses [`default_r`].
    pub slack: Option<f64>,
    pub degree: usize,
    pub multilinear: bool,
    pub hyper_a: f64,
    pub seed: u64,
    pub solver: SolverOptions,
    pub l1_opt_tol: f64,
    pub strict_tau: bool,
}

impl TdsConfig {
    pub fn new(eps: f64, delta: f64, theta: f64, degree: usize) -> Self {
        TdsConfig {
            eps,
            delta,
            theta,
            slack: None,
            degree,
            multilinear: false,
            hyper_a: 1.0,
            seed: 0,
            solver: SolverOptions::default(),
            l1_opt_tol: 1e-7,
            strict_tau: true,
        }
    }

    pub fn resolved_slack(&self) -> f64 {
        self.slack.unwrap_or_else(|| default_r(self.theta, self.eps))
    }

    pub fn validate(&self) -> Result<(), TdsError> {
        for (name, v) in [("eps", self.eps), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(TdsError::Config(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(TdsError::Config(format!("theta must lie in [0,1), got {}", self.theta)));
        }
        let r = self.resolved_slack();
        if !(r > 1.0) || !r.is_finite() {
            return Err(TdsError::Config(format!("R must exceed 1, got {r}")));
        }
        if !(self.hyper_a >= 1.0) {
            return Err(TdsError::Config(format!("A must be at least 1, got {}", self.hyper_a)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone)]
pub struct TdsVerdict {
    pub decision: Decision,
    /// Present iff the decision is `Accept`.
    pub classifier: Option<Classifier>,
    /// Rejection rate of the selector on the held-out points.
    pub holdout_rejection: f64,
    pub threshold: f64,
    pub slack: f64,
    pub eps_filter: f64,
    pub beta: f64,
    pub holdout_size: usize,
    pub selector: Selector,
    pub record: RunRecord,
}

/// Deterministic split of the test points: `(holdout, filter)`.
pub fn split_test(n: usize, holdout: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    // A different stream from the training split.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    idx.shuffle(&mut rng);
    let mut a = idx[..holdout].to_vec();
    let mut b = idx[holdout..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

pub fn tds_learn(train: &Sample, test_points: &Sample, cfg: &TdsConfig) -> Result<TdsVerdict, TdsError> {
    cfg.validate()?;
    train.require_labels()?;
    if train.len() < 2 {
        return Err(PolyError::EmptySample.into());
    }
    if train.dim() != test_points.dim() {
        return Err(PolyError::DimensionMismatch { expected: train.dim(), got: test_points.dim() }.into());
    }
    let n_hold = holdout_size(cfg.eps, cfg.delta);
    if test_points.len() <= n_hold {
        return Err(TdsError::InsufficientTestData { needed: n_hold, got: test_points.len() });
    }
    let test = test_points.unlabeled();
    let (hold_idx, filt_idx) = split_test(test.len(), n_hold, cfg.seed);
    let holdout = test.subset(&hold_idx);
    let s_prime = test.subset(&filt_idx);

    let (reg_idx, ref_idx) = split_indices(train.len(), cfg.seed);
    let reg = train.subset(&reg_idx);
    let reference = train.subset(&ref_idx).unlabeled();
    let (h, _, _) = learn_classifier(&reg, cfg.degree, cfg.multilinear, cfg.l1_opt_tol)?;

    let slack = cfg.resolved_slack();
    let eps_filter = tds_filter_eps(slack, cfg.eps);
    let beta = hypercontractive_beta(cfg.hyper_a, cfg.degree);
    let icf = IcfConfig {
        degree: cfg.degree,
        multilinear: cfg.multilinear,
        slack,
        beta,
        eps: eps_filter,
        hyper_a: cfg.hyper_a,
        solver: cfg.solver,
        strict_tau: cfg.strict_tau,
        max_iterations: None,
    };
    let family = vec![h.clone(), h.complement()];
    let (selector, record) = run_icf(&family, &reference, &s_prime, &icf)?;
    let holdout_rejection = rejection_rate(&selector, &holdout)?;
    let threshold = accept_threshold(slack, cfg.theta, cfg.eps);
    let decision = if holdout_rejection >= threshold { Decision::Reject } else { Decision::Accept };
    Ok(TdsVerdict {
        decision,
        classifier: (decision == Decision::Accept).then_some(h),
        holdout_rejection,
        threshold,
        slack,
        eps_filter,
        beta,
        holdout_size: n_hold,
        selector,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::hypercube_points;
    use rand::Rng;

    #[test]
    fn formula_examples() {
        assert!((tds_filter_eps(2.0, 0.5) - 1.0 / 1024.0).abs() < 1e-18);
        assert!((default_r(0.02, 0.9) - 1.1).abs() < 1e-15);
        assert!((accept_threshold(1.1, 0.02, 0.9) - 0.445).abs() < 1e-12);
        assert!((default_r(0.0, 0.09) - 1.01).abs() < 1e-15);
        assert!((default_r(0.5, 1e-9) - 1.5).abs() < 1e-15);
        assert_eq!(holdout_size(0.2, 0.1), 100);
        assert_eq!(holdout_size(0.05, 0.01), 1843);
    }

    #[test]
    fn split_keeps_holdout_disjoint() {
        let (a, b) = split_test(50, 20, 4);
        assert_eq!(a.len(), 20);
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(split_test(50, 20, 4), (a, b));
    }

    fn cube(n: usize, seed: u64) -> Sample {
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = hypercube_points(d);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| pts[rng.random_range(0..pts.len())].clone()).collect();
        let labels = rows.iter().map(|x| u8::from(x[2] > 0.0)).collect();
        Sample::from_rows(d, &rows, Some(labels)).unwrap()
    }

    #[test]
    fn same_marginal_is_accepted() {
        let v = tds_learn(&cube(400, 1), &cube(300, 2), &TdsConfig::new(0.3, 0.1, 0.1, 1)).unwrap();
        assert_eq!(v.decision, Decision::Accept);
        assert!(v.classifier.is_some());
    }

    #[test]
    fn too_few_test_points_is_an_error() {
        let r = tds_learn(&cube(100, 1), &cube(50, 2), &TdsConfig::new(0.3, 0.1, 0.0, 1));
        assert!(matches!(r, Err(TdsError::InsufficientTestData { needed: 100, got: 50 })));
    }

    #[test]
    fn far_away_test_points_are_rejected() {
        let far = Sample::from_rows(4, &vec![vec![30.0, -30.0, 30.0, 30.0]; 300], None).unwrap();
        let v = tds_learn(&cube(400, 3), &far, &TdsConfig::new(0.3, 0.1, 0.0, 1)).unwrap();
        assert_eq!(v.decision, Decision::Reject);
        assert!(v.classifier.is_none());
    }
}
