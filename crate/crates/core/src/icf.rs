//! Iterative Chow Filtering.
//!
//! Given a reference sample `S` and a test sample `S'`, repeatedly finds a
//! classifier `f` from a finite family and a polynomial `p` that is small on
//! `S` (second moment and `f`-weighted absolute mean) but has a large
//! `f`-weighted mean on the surviving test points, and removes the test
//! points where `f |p|` exceeds a threshold. The result is a selector: a
//! boundedness check plus the list of threshold rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Classifier, ClassifierRecord};
use crate::cvxsub::{exceeds_bound, solve_witness, ConstraintSet, CvxError, RowSpace, SolverOptions, WitnessSolution};
use crate::numeric::{dot, par_map, row_key, Stopwatch};
use crate::polycore::{BasisSpec, FeatureMatrix, MonomialBasis, PolyError, Polynomial, Sample};
use crate::records::{from_record_str, to_record_string};

#[derive(Debug, Error)]
pub enum IcfError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Cvx(#[from] CvxError),
    #[error("classifier family is empty")]
    EmptyFamily,
    #[error("no valid threshold in iteration {iteration} (witness value {value})")]
    NoValidThreshold { iteration: usize, value: f64 },
    #[error("selector record: {0}")]
    Record(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcfConfig {
    pub degree: usize,
    /// Use the multilinear monomial basis (exact on the Boolean cube).
    pub multilinear: bool,
    /// Slack `R > 1`.
    pub slack: f64,
    pub beta: f64,
    pub eps: f64,
    /// Hypercontractivity constant; recorded only.
    pub hyper_a: f64,
    pub solver: SolverOptions,
    /// Fail the run when no valid threshold exists instead of stopping early.
    pub strict_tau: bool,
    /// Overrides the default cap of `floor(1/Delta) + 1` iterations.
    pub max_iterations: Option<usize>,
}

impl IcfConfig {
    pub fn new(degree: usize, slack: f64, beta: f64, eps: f64) -> Self {
        IcfConfig {
            degree,
            multilinear: false,
            slack,
            beta,
            eps,
            hyper_a: 1.0,
            solver: SolverOptions::default(),
            strict_tau: true,
            max_iterations: None,
        }
    }

    pub fn validate(&self) -> Result<(), IcfError> {
        if !(self.slack > 1.0) || !self.slack.is_finite() {
            return Err(IcfError::Config(format!("R must exceed 1, got {}", self.slack)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(IcfError::Config(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(IcfError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.hyper_a >= 1.0) {
            return Err(IcfError::Config(format!("A must be at least 1, got {}", self.hyper_a)));
        }
        if !(self.solver.opt_tol > 0.0) || !(self.solver.feas_tol > 0.0) {
            return Err(IcfError::Config("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Boundedness radius `B`.
    pub bound: f64,
    /// Minimum removed fraction per iteration.
    pub delta: f64,
}

impl Schedule {
    /// `floor(1/Delta)`, saturating.
    pub fn iteration_limit(&self) -> usize {
        let v = (1.0 / self.delta).floor();
        if v >= usize::MAX as f64 {
            usize::MAX
        } else {
            v as usize
        }
    }
}

/// `B = 2 sqrt(2R (d+1)^l beta / eps)` and `Delta = eps^2 / (B (2R + eps))`.
pub fn compute_schedule(cfg: &IcfConfig, d: usize) -> Result<Schedule, IcfError> {
    cfg.validate()?;
    if d == 0 {
        return Err(IcfError::Config("dimension must be at least 1".into()));
    }
    let r = cfg.slack;
    let growth = ((d + 1) as f64).powf(cfg.degree as f64);
    let bound = 2.0 * (2.0 * r * growth * cfg.beta / cfg.eps).sqrt();
    let delta = cfg.eps * cfg.eps / (bound * (2.0 * r + cfg.eps));
    if !bound.is_finite() || !(delta > 0.0) {
        return Err(IcfError::Config(format!("schedule overflows: B={bound}, Delta={delta}")));
    }
    Ok(Schedule { bound, delta })
}

/// Smallest `tau` in `{0}` and the given values with
/// `#{cur > tau} / n' >= R #{ref > tau} / |S| + Delta`, skipping values above `bound`.
pub fn find_tau(
    cur_values: &[f64],
    ref_values: &[f64],
    slack: f64,
    delta: f64,
    n_prime: usize,
    bound: f64,
) -> Option<f64> {
    let mut cur: Vec<f64> = cur_values.to_vec();
    let mut refv: Vec<f64> = ref_values.to_vec();
    cur.sort_by(f64::total_cmp);
    refv.sort_by(f64::total_cmp);
    let mut cands: Vec<f64> = std::iter::once(0.0).chain(cur.iter().copied()).chain(refv.iter().copied()).collect();
    cands.retain(|v| *v >= 0.0 && *v <= bound);
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let n_ref = ref_values.len().max(1) as f64;
    for tau in cands {
        let cur_above = cur.len() - cur.partition_point(|v| *v <= tau);
        let ref_above = refv.len() - refv.partition_point(|v| *v <= tau);
        let lhs = cur_above as f64 / n_prime as f64;
        let rhs = slack * ref_above as f64 / n_ref + delta;
        if lhs >= rhs {
            return Some(tau);
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct FilterRule {
    pub classifier: usize,
    pub poly: Polynomial,
    pub tau: f64,
}

impl FilterRule {
    /// `f(x) |p(x)|` from a precomputed feature row.
    fn score(&self, active: bool, m: &[f64]) -> f64 {
        if active {
            dot(m, self.poly.coefficients()).abs()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The best witness value dropped to `eps` or below.
    Converged,
    /// No valid threshold existed (lenient mode).
    TerminatedInconsistent,
    /// Every test point was removed.
    NoSurvivors,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub value: f64,
    pub classifier: usize,
    pub tau: f64,
    pub removed: usize,
    pub surviving: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_ms: f64,
    pub initial_filter_ms: f64,
    pub loop_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n_reference: usize,
    pub n_test: usize,
    pub bound: f64,
    pub delta: f64,
    pub basis_size: usize,
    pub projector_rank: usize,
    /// The reference features are rank deficient and the search was confined to their row space.
    pub row_space_restricted: bool,
    pub initial_survivors: usize,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// Best witness value at termination (absent if the loop never ran).
    pub final_value: Option<f64>,
    pub newton_steps: usize,
    /// Indices into `S'` of the points that survived.
    pub surviving: Vec<usize>,
    pub timings: Timings,
}

impl RunRecord {
    pub fn filtering_iterations(&self) -> usize {
        self.iterations.len()
    }
}

/// A succinct selector `s(x) in {0,1}`.
#[derive(Debug)]
pub struct Selector {
    config: IcfConfig,
    bound: f64,
    family: Vec<Classifier>,
    constraints: Vec<Arc<ConstraintSet>>,
    rules: Vec<FilterRule>,
    cache: Mutex<HashMap<Vec<u64>, bool>>,
}

impl Clone for Selector {
    fn clone(&self) -> Self {
        Selector {
            config: self.config,
            bound: self.bound,
            family: self.family.clone(),
            constraints: self.constraints.clone(),
            rules: self.rules.clone(),
            cache: Mutex::new(self.cache.lock().map(|c| c.clone()).unwrap_or_default()),
        }
    }
}

/// Serializable selector description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorRecord {
    pub config: IcfConfig,
    pub bound: f64,
    pub basis: BasisSpec,
    pub family: Vec<ClassifierRecord>,
    pub constraint_fingerprints: Vec<String>,
    pub rules: Vec<RuleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub classifier: usize,
    pub coefficients: Vec<f64>,
    pub tau: f64,
}

fn bounded(
    x: &[f64],
    family: &[Classifier],
    cs: &[Arc<ConstraintSet>],
    bound: f64,
    opts: &SolverOptions,
) -> Result<bool, CvxError> {
    for (f, c) in family.iter().zip(cs) {
        if f.eval(x) && exceeds_bound(x, c, bound, opts)? {
            return Ok(false);
        }
    }
    Ok(true)
}

impl Selector {
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn rules(&self) -> &[FilterRule] {
        &self.rules
    }

    pub fn family(&self) -> &[Classifier] {
        &self.family
    }

    pub fn config(&self) -> &IcfConfig {
        &self.config
    }

    pub fn constraint_sets(&self) -> &[Arc<ConstraintSet>] {
        &self.constraints
    }

    /// Selector with no rules and boundedness radius `B`.
    pub fn boundedness_only(
        config: IcfConfig,
        bound: f64,
        family: Vec<Classifier>,
        constraints: Vec<Arc<ConstraintSet>>,
    ) -> Self {
        Selector { config, bound, family, constraints, rules: Vec::new(), cache: Mutex::new(HashMap::new()) }
    }

    /// Appends threshold rules, e.g. to assemble a selector by hand.
    pub fn with_rules(mut self, rules: impl IntoIterator<Item = FilterRule>) -> Self {
        self.rules.extend(rules);
        self
    }

    fn bounded_cached(&self, x: &[f64]) -> Result<bool, CvxError> {
        let key = row_key(x);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = bounded(x, &self.family, &self.constraints, self.bound, &self.config.solver)?;
        self.cache.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }

    /// Seeds the boundedness cache, e.g. with results computed during a run.
    fn warm(&self, entries: impl IntoIterator<Item = (Vec<u64>, bool)>) {
        self.cache.lock().expect("cache lock").extend(entries);
    }

    /// `s(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<bool, IcfError> {
        let basis = self.constraints[0].basis();
        if x.len() != basis.dim() {
            return Err(PolyError::DimensionMismatch { expected: basis.dim(), got: x.len() }.into());
        }
        let mut m = vec![0.0; basis.len()];
        basis.features_into(x, &mut m);
        for rule in &self.rules {
            if rule.score(self.family[rule.classifier].eval(x), &m) > rule.tau {
                return Ok(false);
            }
        }
        Ok(self.bounded_cached(x)?)
    }

    /// `s(x)` for every point, with distinct points evaluated once.
    pub fn evaluate_sample(&self, s: &Sample) -> Result<Vec<bool>, IcfError> {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut reps = Vec::new();
        let idx: Vec<usize> = s
            .points()
            .enumerate()
            .map(|(i, x)| {
                let next = reps.len();
                let j = *seen.entry(row_key(x)).or_insert(next);
                if j == next {
                    reps.push(i);
                }
                j
            })
            .collect();
        let vals: Vec<Result<bool, IcfError>> = par_map(&reps, |&i| self.evaluate(s.point(i)));
        let vals: Vec<bool> = vals.into_iter().collect::<Result<_, _>>()?;
        Ok(idx.into_iter().map(|j| vals[j]).collect())
    }

    pub fn to_record(&self) -> Result<SelectorRecord, IcfError> {
        let family = self
            .family
            .iter()
            .map(|f| {
                f.to_record()
                    .ok_or_else(|| IcfError::Record(format!("classifier of kind {} is not serializable", f.kind())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SelectorRecord {
            config: self.config,
            bound: self.bound,
            basis: self.constraints[0].basis().spec(),
            family,
            constraint_fingerprints: self.constraints.iter().map(|c| c.fingerprint().to_string()).collect(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleRecord {
                    classifier: r.classifier,
                    coefficients: r.poly.coefficients().to_vec(),
                    tau: r.tau,
                })
                .collect(),
        })
    }

    pub fn to_json(&self) -> Result<String, IcfError> {
        to_record_string(&self.to_record()?).map_err(|e| IcfError::Record(e.to_string()))
    }

    /// Rebuilds a selector from its record and the reference sample it was
    /// trained against; the constraint-set fingerprints must match.
    pub fn from_record(record: &SelectorRecord, reference: &Sample) -> Result<Selector, IcfError> {
        let family = record.family.iter().map(Classifier::from_record).collect::<Result<Vec<_>, _>>()?;
        let basis = Arc::new(MonomialBasis::new(record.basis)?);
        let cfg = record.config;
        let constraints = build_constraints(&family, reference, &basis, &cfg)?;
        for (c, fp) in constraints.iter().zip(&record.constraint_fingerprints) {
            if c.fingerprint() != fp {
                return Err(IcfError::Record("constraint-set fingerprint mismatch".into()));
            }
        }
        if constraints.len() != record.constraint_fingerprints.len() {
            return Err(IcfError::Record("fingerprint count mismatch".into()));
        }
        let mut rules = Vec::with_capacity(record.rules.len());
        for r in &record.rules {
            if r.classifier >= family.len() {
                return Err(IcfError::Record(format!("rule refers to classifier {}", r.classifier)));
            }
            rules.push(FilterRule {
                classifier: r.classifier,
                poly: Polynomial::new(basis.clone(), r.coefficients.clone())?,
                tau: r.tau,
            });
        }
        Ok(Selector { config: cfg, bound: record.bound, family, constraints, rules, cache: Mutex::new(HashMap::new()) })
    }

    pub fn from_json(text: &str, reference: &Sample) -> Result<Selector, IcfError> {
        let rec: SelectorRecord = from_record_str(text).map_err(|e| IcfError::Record(e.to_string()))?;
        Self::from_record(&rec, reference)
    }
}

fn build_constraints(
    family: &[Classifier],
    s: &Sample,
    basis: &Arc<MonomialBasis>,
    cfg: &IcfConfig,
) -> Result<Vec<Arc<ConstraintSet>>, IcfError> {
    let fm = FeatureMatrix::new(basis, s)?;
    let space = Arc::new(RowSpace::new(&fm)?);
    let (qb, ab) = crate::cvxsub::constraint_bounds(cfg.beta, cfg.eps, cfg.slack);
    family
        .iter()
        .map(|f| {
            let active: Vec<bool> = s.points().map(|x| f.eval(x)).collect();
            Ok(Arc::new(ConstraintSet::new(basis.clone(), space.clone(), &active, qb, ab)?))
        })
        .collect()
}

/// Points of `S'` that pass the boundedness check.
pub fn initial_filter(
    s_prime: &Sample,
    family: &[Classifier],
    constraints: &[Arc<ConstraintSet>],
    bound: f64,
    opts: &SolverOptions,
) -> Result<Vec<usize>, IcfError> {
    let flags = boundedness_flags(s_prime, family, constraints, bound, opts)?.0;
    Ok((0..s_prime.len()).filter(|&i| flags[i]).collect())
}

type CacheEntries = Vec<(Vec<u64>, bool)>;

/// Per-point boundedness plus the per-distinct-point cache entries.
fn boundedness_flags(
    s_prime: &Sample,
    family: &[Classifier],
    constraints: &[Arc<ConstraintSet>],
    bound: f64,
    opts: &SolverOptions,
) -> Result<(Vec<bool>, CacheEntries), IcfError> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut reps = Vec::new();
    let idx: Vec<usize> = s_prime
        .points()
        .enumerate()
        .map(|(i, x)| {
            let next = reps.len();
            let j = *seen.entry(row_key(x)).or_insert(next);
            if j == next {
                reps.push(i);
            }
            j
        })
        .collect();
    let vals: Vec<Result<bool, CvxError>> =
        par_map(&reps, |&i| bounded(s_prime.point(i), family, constraints, bound, opts));
    let vals: Vec<bool> = vals.into_iter().collect::<Result<_, _>>()?;
    let entries = reps.iter().zip(&vals).map(|(&i, &v)| (row_key(s_prime.point(i)), v)).collect();
    Ok((idx.into_iter().map(|j| vals[j]).collect(), entries))
}

/// Runs the filter with classifier family `family`, reference sample `s` and test sample `s_prime`.
pub fn run_icf(
    family: &[Classifier],
    s: &Sample,
    s_prime: &Sample,
    cfg: &IcfConfig,
) -> Result<(Selector, RunRecord), IcfError> {
    cfg.validate()?;
    if family.is_empty() {
        return Err(IcfError::EmptyFamily);
    }
    if s.is_empty() || s_prime.is_empty() {
        return Err(PolyError::EmptySample.into());
    }
    if s.dim() != s_prime.dim() {
        return Err(PolyError::DimensionMismatch { expected: s.dim(), got: s_prime.dim() }.into());
    }
    let clock = Stopwatch::start();
    let d = s.dim();
    let schedule = compute_schedule(cfg, d)?;
    let basis = Arc::new(crate::polycore::enumerate_basis(d, cfg.degree, cfg.multilinear)?);
    let constraints = build_constraints(family, s, &basis, cfg)?;
    let rank = constraints[0].row_space().rank();
    let fm_ref = FeatureMatrix::new(&basis, s)?;
    let fm_test = FeatureMatrix::new(&basis, s_prime)?;
    let act_ref: Vec<Vec<bool>> = family.iter().map(|f| s.points().map(|x| f.eval(x)).collect()).collect();
    let act_test: Vec<Vec<bool>> = family.iter().map(|f| s_prime.points().map(|x| f.eval(x)).collect()).collect();
    let setup_ms = clock.elapsed_ms();

    let clock = Stopwatch::start();
    let (mut alive, cache_entries) = boundedness_flags(s_prime, family, &constraints, schedule.bound, &cfg.solver)?;
    let initial_survivors = alive.iter().filter(|a| **a).count();
    let initial_filter_ms = clock.elapsed_ms();

    let clock = Stopwatch::start();
    let n_prime = s_prime.len();
    let cap = cfg.max_iterations.unwrap_or_else(|| schedule.iteration_limit().saturating_add(1));
    let k = basis.len();
    let mut rules = Vec::new();
    let mut iterations = Vec::new();
    let mut newton_steps = 0;
    let mut final_value = None;
    let mut surviving = initial_survivors;
    let termination = loop {
        if surviving == 0 {
            break Termination::NoSurvivors;
        }
        if iterations.len() >= cap {
            break Termination::IterationCap;
        }
        let objectives: Vec<Vec<f64>> = (0..family.len())
            .map(|fi| {
                let mut a = vec![0.0; k];
                for i in 0..n_prime {
                    if alive[i] && act_test[fi][i] {
                        for (aj, mj) in a.iter_mut().zip(fm_test.row(i)) {
                            *aj += mj;
                        }
                    }
                }
                a.iter_mut().for_each(|v| *v /= n_prime as f64);
                a
            })
            .collect();
        let fis: Vec<usize> = (0..family.len()).collect();
        let sols: Vec<Result<WitnessSolution, CvxError>> =
            par_map(&fis, |&fi| solve_witness(&objectives[fi], &constraints[fi], &cfg.solver));
        let mut best: Option<WitnessSolution> = None;
        for (fi, sol) in sols.into_iter().enumerate() {
            let mut sol = sol?;
            sol.classifier = fi;
            newton_steps += sol.newton_steps;
            if best.as_ref().is_none_or(|b| sol.value > b.value) {
                best = Some(sol);
            }
        }
        let best = best.expect("nonempty family");
        final_value = Some(best.value);
        if best.value <= cfg.eps {
            break Termination::Converged;
        }
        let rule = FilterRule {
            classifier: best.classifier,
            poly: Polynomial::new(basis.clone(), best.coefficients.clone())?,
            tau: 0.0,
        };
        let fi = best.classifier;
        let cur_scores: Vec<(usize, f64)> =
            (0..n_prime).filter(|&i| alive[i]).map(|i| (i, rule.score(act_test[fi][i], fm_test.row(i)))).collect();
        let ref_scores: Vec<f64> = (0..s.len()).map(|i| rule.score(act_ref[fi][i], fm_ref.row(i))).collect();
        let cur_vals: Vec<f64> = cur_scores.iter().map(|(_, v)| *v).collect();
        let tau = match find_tau(&cur_vals, &ref_scores, cfg.slack, schedule.delta, n_prime, schedule.bound) {
            Some(t) => t,
            None if cfg.strict_tau => {
                return Err(IcfError::NoValidThreshold { iteration: iterations.len() + 1, value: best.value })
            }
            None => break Termination::TerminatedInconsistent,
        };
        let mut removed = 0;
        for (i, v) in cur_scores {
            if v > tau {
                alive[i] = false;
                removed += 1;
            }
        }
        surviving -= removed;
        iterations.push(IterationRecord {
            index: iterations.len() + 1,
            value: best.value,
            classifier: fi,
            tau,
            removed,
            surviving,
        });
        rules.push(FilterRule { tau, ..rule });
    };
    let loop_ms = clock.elapsed_ms();

    let selector = Selector {
        config: *cfg,
        bound: schedule.bound,
        family: family.to_vec(),
        constraints,
        rules,
        cache: Mutex::new(HashMap::new()),
    };
    selector.warm(cache_entries);
    let record = RunRecord {
        n_reference: s.len(),
        n_test: n_prime,
        bound: schedule.bound,
        delta: schedule.delta,
        basis_size: k,
        projector_rank: rank,
        row_space_restricted: rank < k,
        initial_survivors,
        iterations,
        termination,
        final_value,
        newton_steps,
        surviving: (0..n_prime).filter(|&i| alive[i]).collect(),
        timings: Timings { setup_ms, initial_filter_ms, loop_ms },
    };
    Ok((selector, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polycore::enumerate_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn schedule_examples() {
        let s = compute_schedule(&IcfConfig::new(1, 2.0, 1.0, 0.5), 1).unwrap();
        assert!(rel(s.bound, 8.0) <= 1e-15 && rel(s.delta, 1.0 / 144.0) <= 1e-15);
        let s = compute_schedule(&IcfConfig::new(1, 4.0, 4.0, 0.5), 3).unwrap();
        assert!(rel(s.bound, 32.0) <= 1e-15 && rel(s.delta, 0.25 / 272.0) <= 1e-15);
        assert!(compute_schedule(&IcfConfig::new(1, 1.0, 1.0, 0.5), 3).is_err());
        assert!(compute_schedule(&IcfConfig::new(1, 2.0, 1.0, 1.0), 3).is_err());
        assert!(compute_schedule(&IcfConfig::new(1, 2.0, 0.0, 0.5), 3).is_err());
    }

    #[test]
    fn tau_examples() {
        assert_eq!(find_tau(&[0.0, 1.0, 2.0, 3.0], &[0.0; 4], 2.0, 0.1, 4, 10.0), Some(0.0));
        assert_eq!(find_tau(&[1.0; 4], &[1.0; 4], 2.0, 0.1, 4, 10.0), None);
        assert_eq!(find_tau(&[5.0, 5.0], &[0.0; 4], 1.5, 0.2, 2, 10.0), Some(0.0));
        // Reference mass above 0 pushes the threshold up to 1.
        assert_eq!(find_tau(&[1.0, 2.0, 2.0, 2.0], &[1.0, 1.0, 1.0, 0.0], 2.0, 0.1, 4, 10.0), Some(1.0));
        // Candidates above the bound are never returned.
        assert_eq!(find_tau(&[1.0, 2.0, 2.0, 2.0], &[1.0, 1.0, 1.0, 0.0], 2.0, 0.1, 4, 0.5), None);
    }

    fn cube_sample(rng: &mut ChaCha8Rng, d: usize, n: usize, fix_first: Option<f64>) -> Sample {
        let mut flat = Vec::with_capacity(n * d);
        for _ in 0..n {
            for j in 0..d {
                let v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                flat.push(if j == 0 { fix_first.unwrap_or(v) } else { v });
            }
        }
        Sample::from_flat(d, flat, None).unwrap()
    }

    #[test]
    fn identical_samples_stop_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = cube_sample(&mut rng, 4, 150, None);
        let fam = vec![Classifier::Constant(true), Classifier::Constant(false)];
        let (sel, rec) = run_icf(&fam, &s, &s, &IcfConfig::new(2, 2.0, 1.0, 0.3)).unwrap();
        assert_eq!(rec.filtering_iterations(), 0);
        assert_eq!(rec.termination, Termination::Converged);
        assert!(sel.rules().is_empty());
    }

    #[test]
    fn constant_zero_family_never_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = cube_sample(&mut rng, 3, 50, None);
        let t = cube_sample(&mut rng, 3, 50, Some(1.0));
        let (sel, rec) = run_icf(&[Classifier::Constant(false)], &s, &t, &IcfConfig::new(2, 2.0, 1.0, 0.3)).unwrap();
        assert_eq!(rec.initial_survivors, 50);
        assert_eq!(rec.filtering_iterations(), 0);
        assert_eq!(rec.final_value, Some(0.0));
        assert!(sel.evaluate_sample(&t).unwrap().iter().all(|v| *v));
    }

    #[test]
    fn planted_shift_is_filtered_consistently() {
        // Reference points rarely have x1 = +1, test points mostly do.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = cube_sample(&mut rng, 4, 190, Some(-1.0)).concat(&cube_sample(&mut rng, 4, 10, Some(1.0))).unwrap();
        let shifted = cube_sample(&mut rng, 4, 150, Some(1.0));
        let t = shifted.concat(&cube_sample(&mut rng, 4, 50, Some(-1.0))).unwrap();
        let fam = vec![Classifier::Constant(true)];
        let (sel, rec) = run_icf(&fam, &s, &t, &IcfConfig::new(1, 2.0, 1.0, 0.3)).unwrap();
        assert!(rec.filtering_iterations() >= 1, "{rec:?}");
        let flags = sel.evaluate_sample(&t).unwrap();
        let kept: Vec<usize> = (0..t.len()).filter(|&i| flags[i]).collect();
        assert_eq!(kept, rec.surviving);
        let removed_shifted = (0..150).filter(|&i| !flags[i]).count();
        let removed_clean = (150..200).filter(|&i| !flags[i]).count();
        assert!(removed_shifted > 100 && removed_clean < 25, "{removed_shifted} {removed_clean}");
        let removed: usize = rec.iterations.iter().map(|it| it.removed).sum();
        assert_eq!(removed, rec.initial_survivors - rec.surviving.len());
        for it in &rec.iterations {
            assert!(it.removed as f64 >= rec.delta * t.len() as f64);
        }
    }

    #[test]
    fn zero_bound_removes_active_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = cube_sample(&mut rng, 2, 20, None);
        let basis = Arc::new(enumerate_basis(2, 1, false).unwrap());
        let cfg = IcfConfig::new(1, 2.0, 1.0, 0.3);
        let fam = vec![Classifier::external("x1>0", |x| x[0] > 0.0)];
        let cs = build_constraints(&fam, &s, &basis, &cfg).unwrap();
        let kept = initial_filter(&s, &fam, &cs, 0.0, &cfg.solver).unwrap();
        assert!(kept.iter().all(|&i| s.point(i)[0] < 0.0));
        assert!(kept.len() < s.len());
    }

    #[test]
    fn selector_record_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = cube_sample(&mut rng, 3, 120, Some(-1.0));
        let t = cube_sample(&mut rng, 3, 120, None);
        let b = Arc::new(enumerate_basis(3, 1, false).unwrap());
        let p = Polynomial::new(b, vec![0.0, 0.2, 1.0, -0.5]).unwrap();
        let f = Classifier::poly_threshold(p, 0.1);
        let fam = vec![f.clone(), f.complement()];
        let (sel, _) = run_icf(&fam, &s, &t, &IcfConfig::new(1, 2.0, 1.0, 0.3)).unwrap();
        let text = sel.to_json().unwrap();
        let back = Selector::from_json(&text, &s).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(back.evaluate_sample(&t).unwrap(), sel.evaluate_sample(&t).unwrap());
        let other = cube_sample(&mut rng, 3, 120, None);
        assert!(Selector::from_json(&text, &other).is_err());
    }

    #[test]
    fn rule_violation_rejects() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = cube_sample(&mut rng, 3, 60, None);
        let cfg = IcfConfig::new(1, 2.0, 1.0, 0.3);
        let basis = Arc::new(enumerate_basis(3, 1, false).unwrap());
        let fam = vec![Classifier::Constant(true)];
        let cs = build_constraints(&fam, &s, &basis, &cfg).unwrap();
        let mut sel = Selector::boundedness_only(cfg, 1e9, fam, cs);
        assert!(sel.evaluate(&[1.0, 1.0, 1.0]).unwrap());
        let p = Polynomial::new(basis, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        sel.rules.push(FilterRule { classifier: 0, poly: p, tau: 0.5 });
        assert!(!sel.evaluate(&[1.5, 0.0, 0.0]).unwrap());
        assert!(sel.evaluate(&[0.5, 0.0, 0.0]).unwrap());
    }
}
