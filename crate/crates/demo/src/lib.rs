//! Browser demo: a two-dimensional Gaussian training sample, a test sample
//! with a displaced cluster, and the selector the filter builds between them.
//!
//! Every exported function takes and returns plain numbers, strings or
//! vectors, so the same code runs natively in tests.

use chowfilter::bench::{generate, ConceptSpec, Marginal, Noise, SampleSizes, Scenario, Shift};
use chowfilter::icf::{compute_schedule, run_icf, IcfConfig, RunRecord, Selector};
use chowfilter::polycore::Sample;
use chowfilter::pq::{hypercontractive_beta, learn_classifier, split_indices};
use chowfilter::Classifier;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_POINTS: u32 = 5000;
const MAX_DEGREE: u32 = 4;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

struct Fit {
    classifier: Classifier,
    selector: Selector,
    record: RunRecord,
}

#[derive(Serialize)]
struct RunSummary {
    degree: usize,
    slack: f64,
    eps: f64,
    beta: f64,
    bound: f64,
    delta: f64,
    iterations: usize,
    termination: String,
    survivors: usize,
    test_points: usize,
    shifted_removed: usize,
    shifted_total: usize,
    clean_removed: usize,
    train_error: f64,
}

#[wasm_bindgen]
pub struct IcfSession {
    reference: Sample,
    regression: Sample,
    test: Sample,
    shifted: Vec<bool>,
    fit: Option<Fit>,
}

#[wasm_bindgen]
impl IcfSession {
    /// Draws `n` training and `n` test points. A fraction `shift` of the test
    /// points comes from a tight cluster centred at `(offset, offset)`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, n: u32, shift: f64, offset: f64) -> Result<IcfSession, String> {
        if !(20..=MAX_POINTS).contains(&n) {
            return Err(format!("n must lie in 20..={MAX_POINTS}"));
        }
        if !(0.0..=1.0).contains(&shift) || !offset.is_finite() {
            return Err("shift must lie in [0, 1] and offset must be finite".into());
        }
        let scn = Scenario {
            name: "demo".into(),
            dim: 2,
            seed: u64::from(seed),
            marginal: Marginal::Gaussian,
            shift: Shift::Mixture { weight: shift, scale: 0.4, offset, flip_labels: false },
            target: ConceptSpec::Halfspace { weights: vec![1, 2], bias: 0 },
            test_target: None,
            noise: Noise { train: 0.05, test: 0.05 },
            samples: SampleSizes { train: 2 * n as usize, test: n as usize, fresh: 0 },
            oracle_class: None,
        };
        let g = generate(&scn).map_err(err)?;
        let (reg_idx, ref_idx) = split_indices(g.train.len(), scn.seed);
        Ok(IcfSession {
            reference: g.train.subset(&ref_idx).unlabeled(),
            regression: g.train.subset(&reg_idx),
            test: g.test.unlabeled(),
            shifted: g.test_shifted,
            fit: None,
        })
    }

    /// Learns a classifier of the given degree and runs the filter. Returns a JSON summary.
    pub fn run(&mut self, degree: u32, slack: f64, eps: f64) -> Result<String, String> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(format!("degree must lie in 1..={MAX_DEGREE}"));
        }
        let degree = degree as usize;
        let (classifier, _, train_error) = learn_classifier(&self.regression, degree, false, 1e-7).map_err(err)?;
        let beta = hypercontractive_beta(1.0, degree);
        let mut cfg = IcfConfig::new(degree, slack, beta, eps);
        cfg.strict_tau = false;
        let family = [classifier.clone(), classifier.complement()];
        let (selector, record) = run_icf(&family, &self.reference, &self.test, &cfg).map_err(err)?;

        let mut kept = vec![false; self.test.len()];
        record.surviving.iter().for_each(|&i| kept[i] = true);
        let removed = |shifted: bool| kept.iter().zip(&self.shifted).filter(|(k, s)| !**k && **s == shifted).count();
        let summary = RunSummary {
            degree,
            slack,
            eps,
            beta,
            bound: record.bound,
            delta: record.delta,
            iterations: record.filtering_iterations(),
            termination: format!("{:?}", record.termination),
            survivors: record.surviving.len(),
            test_points: self.test.len(),
            shifted_removed: removed(true),
            shifted_total: self.shifted.iter().filter(|s| **s).count(),
            clean_removed: removed(false),
            train_error,
        };
        self.fit = Some(Fit { classifier, selector, record });
        serde_json::to_string(&summary).map_err(err)
    }

    /// Flat `[x, y, kind, shifted]` per point. `kind` is 0 for training points,
    /// 1 for kept test points and 2 for removed ones (all test points count as
    /// kept before the first run).
    pub fn points(&self) -> Vec<f64> {
        let mut kept = vec![self.fit.is_none(); self.test.len()];
        if let Some(fit) = &self.fit {
            fit.record.surviving.iter().for_each(|&i| kept[i] = true);
        }
        let mut out = Vec::with_capacity(4 * (self.reference.len() + self.test.len()));
        for x in self.reference.points() {
            out.extend([x[0], x[1], 0.0, 0.0]);
        }
        for (i, x) in self.test.points().enumerate() {
            out.extend([x[0], x[1], if kept[i] { 1.0 } else { 2.0 }, f64::from(u8::from(self.shifted[i]))]);
        }
        out
    }

    /// `cells x cells` grid over `[-extent, extent]^2`, rows from the top.
    /// Each cell is `2 s(x) + h(x)`; before the first run every cell is 2.
    pub fn heatmap(&self, cells: u32, extent: f64) -> Result<Vec<u8>, String> {
        if !(2..=400).contains(&cells) || !(extent > 0.0 && extent.is_finite()) {
            return Err("cells must lie in 2..=400 and extent must be positive".into());
        }
        let n = cells as usize;
        let step = 2.0 * extent / n as f64;
        let mut out = Vec::with_capacity(n * n);
        for row in 0..n {
            let y = extent - (row as f64 + 0.5) * step;
            for col in 0..n {
                let x = [-extent + (col as f64 + 0.5) * step, y];
                out.push(match &self.fit {
                    None => 2,
                    Some(fit) => {
                        2 * u8::from(fit.selector.evaluate(&x).map_err(err)?) + u8::from(fit.classifier.eval(&x))
                    }
                });
            }
        }
        Ok(out)
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }
}

/// Boundedness radius, minimum removal fraction and iteration cap as JSON.
#[wasm_bindgen]
pub fn schedule(dim: u32, degree: u32, slack: f64, eps: f64) -> Result<String, String> {
    let beta = hypercontractive_beta(1.0, degree as usize);
    let cfg = IcfConfig::new(degree as usize, slack, beta, eps);
    let s = compute_schedule(&cfg, dim as usize).map_err(err)?;
    serde_json::to_string(&serde_json::json!({
        "bound": s.bound,
        "delta": s.delta,
        "beta": beta,
        "iteration_limit": s.iteration_limit(),
    }))
    .map_err(err)
}
