//! Synthetic distribution-shift scenarios, concept classes, degree
//! recommendations and run metrics.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Classifier;
use crate::icf::IcfError;
use crate::l1reg::empirical_error;
use crate::oracle::{
    exact_lambda, hypercube_points, FiniteDistribution, LabeledFiniteDistribution, LambdaReport, OracleError,
    MAX_CONCEPTS,
};
use crate::polycore::{PolyError, Sample};
use crate::pq::{rejection_rate, selective_error, PqOutput};
use crate::tds::{Decision, TdsVerdict};

/// Largest cube dimension for which scenarios expose exact finite distributions.
pub const MAX_EXACT_DIM: usize = 12;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario file: {0}")]
    Parse(String),
    #[error("unknown concept class `{0}`")]
    UnknownClass(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Filter(#[from] IcfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    /// Uniform on `{-1,1}^d`.
    Hypercube,
    /// Standard Gaussian.
    Gaussian,
    Finite {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shift {
    None,
    /// With probability `weight`, the coordinates in `fixed` (signed, 1-based)
    /// are forced to the given sign.
    Subcube {
        fixed: Vec<i64>,
        #[serde(default = "one")]
        weight: f64,
    },
    /// With probability `weight`, a point `offset + scale z` with `z` uniform on the cube.
    Mixture {
        weight: f64,
        scale: f64,
        offset: f64,
        #[serde(default)]
        flip_labels: bool,
    },
    /// Gaussian marginal translated by `mean`.
    MeanShift {
        mean: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConceptSpec {
    /// AND of signed 1-based literals on `sign(x)`.
    Conjunction { literals: Vec<i64> },
    /// `w . x + bias >= 0`.
    Halfspace { weights: Vec<i64>, bias: i64 },
    /// OR of conjunctions.
    Dnf { terms: Vec<Vec<i64>> },
    /// `sum c x_i x_j + linear . x + bias >= 0`, indices 1-based.
    Ptf2 {
        quadratic: Vec<(usize, usize, f64)>,
        #[serde(default)]
        linear: Vec<f64>,
        #[serde(default)]
        bias: f64,
    },
}

fn literal_holds(x: &[f64], lit: i64) -> bool {
    let v = x[(lit.unsigned_abs() - 1) as usize];
    if lit > 0 {
        v >= 0.0
    } else {
        v < 0.0
    }
}

impl ConceptSpec {
    pub fn validate(&self, d: usize) -> Result<(), BenchError> {
        let lit_ok = |l: &i64| *l != 0 && l.unsigned_abs() as usize <= d;
        let ok = match self {
            ConceptSpec::Conjunction { literals } => literals.iter().all(lit_ok),
            ConceptSpec::Dnf { terms } => terms.iter().flatten().all(lit_ok),
            ConceptSpec::Halfspace { weights, .. } => weights.len() == d,
            ConceptSpec::Ptf2 { quadratic, linear, .. } => {
                quadratic.iter().all(|(i, j, _)| *i >= 1 && *j >= 1 && *i <= d && *j <= d)
                    && (linear.is_empty() || linear.len() == d)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(BenchError::Invalid(format!("concept {self:?} does not fit dimension {d}")))
        }
    }

    pub fn eval(&self, x: &[f64]) -> bool {
        match self {
            ConceptSpec::Conjunction { literals } => literals.iter().all(|l| literal_holds(x, *l)),
            ConceptSpec::Dnf { terms } => terms.iter().any(|t| t.iter().all(|l| literal_holds(x, *l))),
            ConceptSpec::Halfspace { weights, bias } => {
                weights.iter().zip(x).map(|(w, v)| *w as f64 * v).sum::<f64>() + *bias as f64 >= 0.0
            }
            ConceptSpec::Ptf2 { quadratic, linear, bias } => {
                let q: f64 = quadratic.iter().map(|(i, j, c)| c * x[i - 1] * x[j - 1]).sum();
                let l: f64 = linear.iter().zip(x).map(|(a, v)| a * v).sum();
                q + l + bias >= 0.0
            }
        }
    }

    pub fn to_classifier(&self) -> Classifier {
        let spec = self.clone();
        Classifier::external(format!("{self:?}"), move |x| spec.eval(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    #[serde(default)]
    pub train: f64,
    #[serde(default)]
    pub test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizes {
    pub train: usize,
    pub test: usize,
    #[serde(default = "default_fresh")]
    pub fresh: usize,
}

fn default_fresh() -> usize {
    1000
}

/// Enumerable concept classes for exact joint optimal error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassSpec {
    /// Conjunctions of at most `max_literals` literals, plus both constants.
    Conjunctions { max_literals: usize },
    /// Halfspaces with integer weights and bias in `-max_weight..=max_weight`.
    Halfspaces { max_weight: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub seed: u64,
    pub marginal: Marginal,
    pub shift: Shift,
    pub target: ConceptSpec,
    #[serde(default)]
    pub test_target: Option<ConceptSpec>,
    pub noise: Noise,
    pub samples: SampleSizes,
    #[serde(default)]
    pub oracle_class: Option<ClassSpec>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        let s: Scenario = toml::from_str(text).map_err(|e| BenchError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String, BenchError> {
        toml::to_string(self).map_err(|e| BenchError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let d = self.dim;
        if d == 0 {
            return Err(BenchError::Invalid("dim must be at least 1".into()));
        }
        for (name, v) in [("train", self.noise.train), ("test", self.noise.test)] {
            if !(0.0..0.5).contains(&v) {
                return Err(BenchError::Invalid(format!("{name} noise {v} outside [0, 1/2)")));
            }
        }
        self.target.validate(d)?;
        if let Some(t) = &self.test_target {
            t.validate(d)?;
        }
        if let Marginal::Finite { points, weights } = &self.marginal {
            FiniteDistribution::new(d, points.clone(), weights.clone())?;
        }
        match &self.shift {
            Shift::None => {}
            Shift::Subcube { fixed, weight } => {
                if fixed.iter().any(|l| *l == 0 || l.unsigned_abs() as usize > d) {
                    return Err(BenchError::Invalid("subcube literal out of range".into()));
                }
                if !(0.0..=1.0).contains(weight) {
                    return Err(BenchError::Invalid(format!("subcube weight {weight} outside [0,1]")));
                }
                if matches!(self.marginal, Marginal::Finite { .. }) {
                    return Err(BenchError::Invalid("subcube shift needs a cube or Gaussian marginal".into()));
                }
            }
            Shift::Mixture { weight, scale, offset, .. } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(BenchError::Invalid(format!("mixture weight {weight} outside [0,1]")));
                }
                if !scale.is_finite() || !offset.is_finite() {
                    return Err(BenchError::Invalid("mixture scale and offset must be finite".into()));
                }
            }
            Shift::MeanShift { mean } => {
                if self.marginal != Marginal::Gaussian || mean.len() != d {
                    return Err(BenchError::Invalid("mean shift needs a Gaussian marginal and a length-d mean".into()));
                }
            }
        }
        if self.samples.train < 2 || self.samples.test == 0 {
            return Err(BenchError::Invalid("need at least 2 training and 1 test point".into()));
        }
        Ok(())
    }

    fn test_concept(&self) -> &ConceptSpec {
        self.test_target.as_ref().unwrap_or(&self.target)
    }

    /// Training distribution with label probabilities, when it has small finite support.
    pub fn train_distribution(&self) -> Result<Option<LabeledFiniteDistribution>, BenchError> {
        let Some(base) = self.base_finite()? else { return Ok(None) };
        Ok(Some(LabeledFiniteDistribution::with_noise(base, |x| self.target.eval(x), self.noise.train)))
    }

    /// Test distribution with label probabilities, when it has small finite support.
    pub fn test_distribution(&self) -> Result<Option<LabeledFiniteDistribution>, BenchError> {
        let Some(base) = self.base_finite()? else { return Ok(None) };
        let d = self.dim;
        let concept = self.test_concept();
        let noise = self.noise.test;
        let label = |x: &[f64], flip: bool| {
            let y = concept.eval(x) != flip;
            if y {
                1.0 - noise
            } else {
                noise
            }
        };
        let mut points = Vec::new();
        let mut masses = Vec::new();
        let mut probs = Vec::new();
        match &self.shift {
            Shift::None => return Ok(Some(LabeledFiniteDistribution::with_noise(base, |x| concept.eval(x), noise))),
            Shift::Subcube { fixed, weight } => {
                let sub = 0.5f64.powi(fixed.len() as i32);
                for i in 0..base.len() {
                    let x = base.point(i);
                    let inside =
                        fixed.iter().all(|l| literal_holds(x, *l) && x[(l.unsigned_abs() - 1) as usize] != 0.0);
                    points.push(x.to_vec());
                    masses.push(
                        (1.0 - weight) * base.weights()[i]
                            + if inside { weight * base.weights()[i] / sub } else { 0.0 },
                    );
                    probs.push(label(x, false));
                }
            }
            Shift::Mixture { weight, scale, offset, flip_labels } => {
                for i in 0..base.len() {
                    let x = base.point(i);
                    points.push(x.to_vec());
                    masses.push((1.0 - weight) * base.weights()[i]);
                    probs.push(label(x, false));
                }
                let cube = hypercube_points(d);
                let m = cube.len() as f64;
                for z in cube {
                    let x: Vec<f64> = z.iter().map(|v| offset + scale * v).collect();
                    probs.push(label(&x, *flip_labels));
                    points.push(x);
                    masses.push(weight / m);
                }
            }
            Shift::MeanShift { .. } => return Ok(None),
        }
        let marginal = FiniteDistribution::from_masses(d, points, masses)?;
        Ok(Some(LabeledFiniteDistribution::new(marginal, probs)?))
    }

    fn base_finite(&self) -> Result<Option<FiniteDistribution>, BenchError> {
        Ok(match &self.marginal {
            Marginal::Hypercube if self.dim <= MAX_EXACT_DIM => Some(FiniteDistribution::uniform_hypercube(self.dim)?),
            Marginal::Finite { points, weights } => {
                Some(FiniteDistribution::new(self.dim, points.clone(), weights.clone())?)
            }
            _ => None,
        })
    }

    /// Exact `(lambda, lambda_train, lambda_test, opt_train)` when the
    /// distributions are finite and an oracle class is configured.
    pub fn oracle_lambda(&self) -> Result<Option<LambdaReport>, BenchError> {
        let Some(class) = &self.oracle_class else { return Ok(None) };
        let (Some(tr), Some(te)) = (self.train_distribution()?, self.test_distribution()?) else { return Ok(None) };
        let concepts = concept_class(class, self.dim)?;
        Ok(Some(exact_lambda(&concepts, &tr, &te)?))
    }
}

/// Samples drawn from a scenario.
#[derive(Debug, Clone)]
pub struct Generated {
    pub train: Sample,
    pub test: Sample,
    /// Test points drawn from the shifted component.
    pub test_shifted: Vec<bool>,
    /// Fresh labeled draws from the training and test distributions.
    pub fresh_train: Sample,
    pub fresh_test: Sample,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn flip<R: Rng>(y: bool, noise: f64, rng: &mut R) -> u8 {
    let f = noise > 0.0 && rng.random::<f64>() < noise;
    u8::from(y != f)
}

impl Scenario {
    fn draw_base<R: Rng>(&self, rng: &mut R, weights: Option<&WeightedIndex<f64>>) -> Vec<f64> {
        match &self.marginal {
            Marginal::Hypercube => (0..self.dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
            Marginal::Gaussian => (0..self.dim).map(|_| rng.sample(StandardNormal)).collect(),
            Marginal::Finite { points, .. } => points[weights.expect("finite marginal").sample(rng)].clone(),
        }
    }

    fn draw_train<R: Rng>(&self, n: usize, rng: &mut R, w: Option<&WeightedIndex<f64>>) -> Sample {
        let mut flat = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.draw_base(rng, w);
            labels.push(flip(self.target.eval(&x), self.noise.train, rng));
            flat.extend(x);
        }
        Sample::from_flat(self.dim, flat, Some(labels)).expect("consistent sample")
    }

    fn draw_test<R: Rng>(&self, n: usize, rng: &mut R, w: Option<&WeightedIndex<f64>>) -> (Sample, Vec<bool>) {
        let concept = self.test_concept();
        let mut flat = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        let mut shifted = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = self.draw_base(rng, w);
            let mut flipped = false;
            let mut moved = false;
            match &self.shift {
                Shift::None => {}
                Shift::Subcube { fixed, weight } => {
                    if rng.random::<f64>() < *weight {
                        moved = true;
                        for l in fixed {
                            let j = (l.unsigned_abs() - 1) as usize;
                            let mag = x[j].abs();
                            x[j] = if *l > 0 { mag } else { -mag };
                        }
                    }
                }
                Shift::Mixture { weight, scale, offset, flip_labels } => {
                    if rng.random::<f64>() < *weight {
                        moved = true;
                        flipped = *flip_labels;
                        x = (0..self.dim)
                            .map(|_| offset + scale * if rng.random::<bool>() { 1.0 } else { -1.0 })
                            .collect();
                    }
                }
                Shift::MeanShift { mean } => {
                    moved = true;
                    for (v, m) in x.iter_mut().zip(mean) {
                        *v += m;
                    }
                }
            }
            labels.push(flip(concept.eval(&x) != flipped, self.noise.test, rng));
            shifted.push(moved);
            flat.extend(x);
        }
        (Sample::from_flat(self.dim, flat, Some(labels)).expect("consistent sample"), shifted)
    }
}

/// Draws the training, test and fresh samples. Deterministic in the scenario seed.
pub fn generate(scn: &Scenario) -> Result<Generated, BenchError> {
    scn.validate()?;
    let weights = match &scn.marginal {
        Marginal::Finite { weights, .. } => {
            Some(WeightedIndex::new(weights.clone()).map_err(|e| BenchError::Invalid(e.to_string()))?)
        }
        _ => None,
    };
    let w = weights.as_ref();
    let seed = scn.seed;
    let train = scn.draw_train(scn.samples.train, &mut stream(seed, 0), w).with_seed(seed);
    let (test, test_shifted) = scn.draw_test(scn.samples.test, &mut stream(seed, 1), w);
    let fresh_train = scn.draw_train(scn.samples.fresh, &mut stream(seed, 2), w);
    let (fresh_test, _) = scn.draw_test(scn.samples.fresh, &mut stream(seed, 3), w);
    Ok(Generated {
        train: train.with_provenance(crate::polycore::Provenance::Train),
        test: test.with_seed(seed).with_provenance(crate::polycore::Provenance::Test),
        test_shifted,
        fresh_train,
        fresh_test,
    })
}

/// Enumerates a concept class in a fixed order.
pub fn concept_class(spec: &ClassSpec, d: usize) -> Result<Vec<Classifier>, BenchError> {
    match spec {
        ClassSpec::Conjunctions { max_literals } => {
            let mut specs: Vec<Vec<i64>> = vec![Vec::new()];
            let mut frontier: Vec<Vec<i64>> = vec![Vec::new()];
            for _ in 0..(*max_literals).min(d) {
                let mut next = Vec::new();
                for lits in &frontier {
                    let start = lits.last().map_or(1, |l| l.unsigned_abs() as i64 + 1);
                    for v in start..=d as i64 {
                        for sign in [1, -1] {
                            let mut l = lits.clone();
                            l.push(sign * v);
                            next.push(l);
                        }
                    }
                }
                if specs.len() + next.len() > MAX_CONCEPTS {
                    return Err(OracleError::ClassTooLarge(specs.len() + next.len()).into());
                }
                specs.extend(next.iter().cloned());
                frontier = next;
            }
            let mut out = vec![Classifier::Constant(false)];
            out.extend(specs.into_iter().map(|literals| ConceptSpec::Conjunction { literals }.to_classifier()));
            Ok(out)
        }
        ClassSpec::Halfspaces { max_weight } => {
            let w = *max_weight;
            if w < 0 {
                return Err(BenchError::Invalid("max_weight must be nonnegative".into()));
            }
            let base = (2 * w + 1) as u128;
            let count = base.checked_pow(d as u32 + 1).unwrap_or(u128::MAX);
            if count > MAX_CONCEPTS as u128 {
                return Err(OracleError::ClassTooLarge(count.min(usize::MAX as u128) as usize).into());
            }
            let mut out = Vec::with_capacity(count as usize);
            for idx in 0..count {
                let mut r = idx;
                let mut digits = Vec::with_capacity(d + 1);
                for _ in 0..=d {
                    digits.push((r % base) as i64 - w);
                    r /= base;
                }
                let bias = digits.pop().expect("d+1 digits");
                out.push(ConceptSpec::Halfspace { weights: digits, bias }.to_classifier());
            }
            Ok(out)
        }
    }
}

/// Classes with tabulated L1 sandwiching degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandwichClass {
    /// Depth-`t`, size-`s` AC0 circuits on the cube.
    Ac0,
    /// Size-`s` DNFs, treated as depth-2 circuits.
    Dnf,
    /// Depth-`t`, size-`s` decision trees of halfspaces.
    DecisionTreeHalfspaces,
    Ptf2Gaussian,
    Ptf2Uniform,
    /// Degree-`k` PTFs under the Gaussian.
    PtfGaussian,
    /// Arbitrary functions of `k` halfspaces under log-concave marginals.
    FunctionsOfHalfspaces,
}

impl FromStr for SandwichClass {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Ok(match s {
            "ac0" => SandwichClass::Ac0,
            "dnf" => SandwichClass::Dnf,
            "decision_tree_halfspaces" | "dt_halfspaces" => SandwichClass::DecisionTreeHalfspaces,
            "ptf2_gaussian" => SandwichClass::Ptf2Gaussian,
            "ptf2_uniform" => SandwichClass::Ptf2Uniform,
            "ptf_gaussian" | "ptfk_gaussian" => SandwichClass::PtfGaussian,
            "functions_of_halfspaces" | "k_halfspaces" => SandwichClass::FunctionsOfHalfspaces,
            other => return Err(BenchError::UnknownClass(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    /// Depth `t`.
    pub depth: u32,
    /// Size `s`.
    pub size: u64,
    /// PTF degree or number of halfspaces.
    pub k: u32,
}

impl Default for ClassParams {
    fn default() -> Self {
        ClassParams { depth: 1, size: 1, k: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRecommendation {
    pub degree: u64,
    /// The formula overflowed and the degree was capped.
    pub saturated: bool,
    /// Hidden constants are set to 1; always true.
    pub heuristic: bool,
    pub formula: String,
}

impl fmt::Display for DegreeRecommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}, heuristic{})", self.degree, self.formula, if self.saturated { ", saturated" } else { "" })
    }
}

/// `ln(max(v, e))`, so logarithms of small arguments count as 1.
fn log1(v: f64) -> f64 {
    v.max(std::f64::consts::E).ln()
}

/// L1 sandwiching degree from the asymptotic formulas, hidden constants set to 1.
pub fn recommend_degree(class: SandwichClass, eps: f64, p: &ClassParams) -> Result<DegreeRecommendation, BenchError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(BenchError::Invalid(format!("eps must lie in (0,1], got {eps}")));
    }
    let (t, s, k) = (p.depth as f64, p.size as f64, p.k as f64);
    let (raw, formula) = match class {
        SandwichClass::Ac0 => (log1(s).powf(t) * log1(1.0 / eps), "(log s)^t log(1/eps)"),
        SandwichClass::Dnf => (log1(s).powi(2) * log1(1.0 / eps), "(log s)^2 log(1/eps)"),
        SandwichClass::DecisionTreeHalfspaces => (t.powi(4) * s * s / (eps * eps), "t^4 s^2 / eps^2"),
        SandwichClass::Ptf2Gaussian => (eps.powi(-8), "eps^-8"),
        SandwichClass::Ptf2Uniform => (eps.powi(-9), "eps^-9"),
        SandwichClass::PtfGaussian => (eps.powf(-4.0 * k * 7f64.powf(k)), "eps^(-4k 7^k)"),
        SandwichClass::FunctionsOfHalfspaces => {
            ((log1(log1(k) / eps).powf(k) / eps.powi(4)).exp(), "exp((log(log k / eps))^k / eps^4)")
        }
    };
    let cap = u64::MAX as f64;
    let saturated = !raw.is_finite() || raw.ceil() >= cap;
    let degree = if saturated { u64::MAX } else { (raw.ceil() as u64).max(1) };
    Ok(DegreeRecommendation { degree, saturated, heuristic: true, formula: formula.to_string() })
}

/// One row of a results table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scenario: String,
    pub seed: u64,
    pub mode: String,
    pub decision: Option<String>,
    pub selective_error: Option<f64>,
    pub test_error: Option<f64>,
    pub rejection_train: Option<f64>,
    pub rejection_test: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_train: Option<f64>,
    pub lambda_test: Option<f64>,
    pub opt_train: Option<f64>,
    pub bound: Option<f64>,
    /// `bound - measured`.
    pub bound_slack: Option<f64>,
    pub iterations: Option<usize>,
    pub termination: Option<String>,
    pub runtime_ms: Option<f64>,
}

/// The output being evaluated.
#[derive(Debug, Clone, Copy)]
pub enum RunOutput<'a> {
    Pq { output: &'a PqOutput, eps: f64, eta: f64 },
    Tds { verdict: &'a TdsVerdict, eps: f64, theta: f64 },
}

/// Measures a run on labeled test draws (and optionally fresh training draws)
/// and compares with the guarantee computed from oracle quantities.
pub fn evaluate_run(
    out: RunOutput<'_>,
    test: &Sample,
    fresh_train: Option<&Sample>,
    lambda: Option<&LambdaReport>,
) -> Result<MetricRecord, BenchError> {
    let mut rec = MetricRecord::default();
    if let Some(l) = lambda {
        rec.lambda = Some(l.lambda);
        rec.lambda_train = Some(l.lambda_train);
        rec.lambda_test = Some(l.lambda_test);
        rec.opt_train = Some(l.opt_train);
    }
    match out {
        RunOutput::Pq { output, eps, eta } => {
            rec.mode = "pq".into();
            let err = selective_error(&output.classifier, &output.selector, test)?;
            rec.selective_error = Some(err);
            rec.rejection_test = Some(rejection_rate(&output.selector, &test.unlabeled())?);
            if let Some(f) = fresh_train {
                rec.rejection_train = Some(rejection_rate(&output.selector, &f.unlabeled())?);
            }
            rec.iterations = Some(output.record.filtering_iterations());
            rec.termination = Some(format!("{:?}", output.record.termination));
            if let Some(l) = lambda {
                let bound = l.lambda_test + (l.lambda_train + l.opt_train) / eta + eps;
                rec.bound = Some(bound);
                rec.bound_slack = Some(bound - err);
            }
        }
        RunOutput::Tds { verdict, eps, theta } => {
            rec.mode = "tds".into();
            rec.decision = Some(format!("{:?}", verdict.decision).to_uppercase());
            rec.iterations = Some(verdict.record.filtering_iterations());
            rec.termination = Some(format!("{:?}", verdict.record.termination));
            if verdict.decision == Decision::Accept {
                let h = verdict.classifier.as_ref().expect("accepted verdict carries a classifier");
                let err = empirical_error(h, test)?;
                rec.test_error = Some(err);
                rec.rejection_test = Some(verdict.holdout_rejection);
                if let Some(l) = lambda {
                    let r = verdict.slack;
                    let bound = l.lambda_test + r * (l.lambda_train + l.opt_train) + r * theta / (r - 1.0) + eps;
                    rec.bound = Some(bound);
                    rec.bound_slack = Some(bound - err);
                }
            } else {
                rec.lambda = None;
                rec.lambda_train = None;
                rec.lambda_test = None;
                rec.opt_train = None;
            }
        }
    }
    Ok(rec)
}

impl MetricRecord {
    /// Cells in [`RESULT_COLUMNS`] order; absent values are empty.
    pub fn to_fields(&self) -> Vec<String> {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        vec![
            self.scenario.clone(),
            self.seed.to_string(),
            self.mode.clone(),
            opt(&self.decision),
            opt(&self.selective_error),
            opt(&self.test_error),
            opt(&self.rejection_train),
            opt(&self.rejection_test),
            opt(&self.lambda),
            opt(&self.lambda_train),
            opt(&self.lambda_test),
            opt(&self.opt_train),
            opt(&self.bound),
            opt(&self.bound_slack),
            opt(&self.iterations),
            opt(&self.termination),
            opt(&self.runtime_ms),
        ]
    }
}

/// Writes metric rows as a comma-separated table with a header.
pub fn write_results<W: std::io::Write>(writer: W, rows: &[MetricRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| BenchError::Parse(e.to_string());
    w.write_record(RESULT_COLUMNS).map_err(err)?;
    for r in rows {
        w.write_record(r.to_fields()).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// Column names of the results table, in order.
pub const RESULT_COLUMNS: [&str; 17] = [
    "scenario",
    "seed",
    "mode",
    "decision",
    "selective_error",
    "test_error",
    "rejection_train",
    "rejection_test",
    "lambda",
    "lambda_train",
    "lambda_test",
    "opt_train",
    "bound",
    "bound_slack",
    "iterations",
    "termination",
    "runtime_ms",
];
