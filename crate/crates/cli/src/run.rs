//! Single trials of the three run modes.

use std::path::Path;
use std::time::Instant;

use chowfilter::bench::{
    evaluate_run, generate, write_results, Generated, Marginal, MetricRecord, RunOutput, Scenario,
};
use chowfilter::cvxsub::SolverOptions;
use chowfilter::icf::{run_icf, IcfConfig, RunRecord};
use chowfilter::pq::{learn_classifier, pq_learn, rejection_rate, selective_error, split_indices, PqConfig};
use chowfilter::records::to_record_string;
use chowfilter::tds::{tds_learn, Decision, TdsConfig};
use chowfilter::Classifier;
use serde::Serialize;

use crate::args::{Mode, Params, Resolved};
use crate::error::CliError;

/// Everything a trial produces. Nothing is written until the trial succeeds.
#[derive(Debug, Clone)]
pub struct Trial {
    pub metrics: MetricRecord,
    /// `(file name, contents)`.
    pub artifacts: Vec<(String, String)>,
    pub plots: Vec<(String, String)>,
    pub log: Vec<String>,
    pub summary: String,
}

/// Loads a scenario and applies the seed and sample-size overrides.
pub fn load_scenario(path: &Path, params: &Params) -> Result<Scenario, CliError> {
    let mut scn = Scenario::load(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    apply_overrides(&mut scn, params)?;
    Ok(scn)
}

pub fn apply_overrides(scn: &mut Scenario, params: &Params) -> Result<(), CliError> {
    if let Some(s) = params.seed {
        scn.seed = s;
    }
    if let Some(n) = params.n_train {
        scn.samples.train = n;
    }
    if let Some(n) = params.n_test {
        scn.samples.test = n;
    }
    if let Some(n) = params.n_fresh {
        scn.samples.fresh = n;
    }
    scn.validate()?;
    Ok(())
}

fn solver(r: &Resolved) -> SolverOptions {
    SolverOptions { opt_tol: r.opt_tol, feas_tol: r.feas_tol, ..SolverOptions::default() }
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    to_record_string(v).map_err(|e| CliError::validation(format!("serialization: {e}")))
}

fn classifier_json(h: &Classifier) -> Result<String, CliError> {
    let rec = h.to_record().ok_or_else(|| CliError::validation("learned classifier is not serializable"))?;
    json(&rec)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn record_lines(rec: &RunRecord) -> Vec<String> {
    vec![
        format!(
            "filter: |S|={} |S'|={} B={:.6e} Delta={:.6e} basis={} rank={}",
            rec.n_reference, rec.n_test, rec.bound, rec.delta, rec.basis_size, rec.projector_rank
        ),
        format!(
            "stage filter-setup: {:.1} ms; initial-filter: {:.1} ms; loop: {:.1} ms",
            rec.timings.setup_ms, rec.timings.initial_filter_ms, rec.timings.loop_ms
        ),
        format!(
            "filter: {} initial survivors, {} iterations, {} survivors, termination {:?}",
            rec.initial_survivors,
            rec.filtering_iterations(),
            rec.surviving.len(),
            rec.termination
        ),
    ]
}

fn record_plots(rec: &RunRecord) -> Vec<(String, String)> {
    let mut surviving = format!("0 {}\n", rec.initial_survivors);
    let mut witness = String::new();
    for it in &rec.iterations {
        surviving.push_str(&format!("{} {}\n", it.index, it.surviving));
        witness.push_str(&format!("{} {:e}\n", it.index, it.value));
    }
    if let Some(v) = rec.final_value {
        witness.push_str(&format!("{} {:e}\n", rec.filtering_iterations() + 1, v));
    }
    vec![("surviving.dat".into(), surviving), ("witness.dat".into(), witness)]
}

fn results_csv(m: &MetricRecord) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_results(&mut buf, std::slice::from_ref(m))?;
    String::from_utf8(buf).map_err(|e| CliError::validation(e.to_string()))
}

#[derive(Serialize)]
struct VerdictSummary {
    decision: Decision,
    holdout_rejection: f64,
    threshold: f64,
    slack: f64,
    eps_filter: f64,
    beta: f64,
    holdout_size: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

/// Runs one trial of `mode` on the scenario (whose seed is the trial seed).
pub fn run_trial(mode: Mode, scn: &Scenario, r: &Resolved) -> Result<Trial, CliError> {
    let mut log = Vec::new();
    let seed = scn.seed;
    let multilinear = scn.marginal == Marginal::Hypercube;
    let t = Instant::now();
    let data: Generated = generate(scn)?;
    log.push(format!(
        "stage generate: {:.1} ms (train {}, test {}, fresh {})",
        ms(t),
        data.train.len(),
        data.test.len(),
        data.fresh_test.len()
    ));
    let t = Instant::now();
    let lambda = scn.oracle_lambda()?;
    if let Some(l) = &lambda {
        log.push(format!(
            "stage oracle: {:.1} ms (lambda={:.6} lambda_train={:.6} lambda_test={:.6} opt_train={:.6})",
            ms(t),
            l.lambda,
            l.lambda_train,
            l.lambda_test,
            l.opt_train
        ));
    }
    let test_points = data.test.unlabeled();
    let mut artifacts = Vec::new();
    let mut plots = Vec::new();
    let (mut metrics, summary) = match mode {
        Mode::Pq => {
            if r.slack_r.is_some() || r.beta.is_some() {
                return Err(CliError::validation(
                    "pq-run derives R and beta from eta and A; drop --slack-R and --beta",
                ));
            }
            let mut cfg = PqConfig::new(r.eps, r.eta, r.degree);
            cfg.delta = r.delta;
            cfg.multilinear = multilinear;
            cfg.hyper_a = r.hyper_a;
            cfg.seed = seed;
            cfg.solver = solver(r);
            cfg.strict_tau = r.strict;
            let t = Instant::now();
            let out = pq_learn(&data.train, &test_points, &cfg)?;
            let runtime = ms(t);
            log.push(format!(
                "stage learn: {runtime:.1} ms (R'={:.6} beta={} eps'={:.6e} l1 objective={:.6} train error={:.4})",
                out.hyperparameters.slack,
                out.hyperparameters.beta,
                out.hyperparameters.eps_filter,
                out.l1_objective,
                out.train_error
            ));
            log.extend(record_lines(&out.record));
            let t = Instant::now();
            let mut m = evaluate_run(
                RunOutput::Pq { output: &out, eps: cfg.eps, eta: cfg.eta },
                &data.fresh_test,
                Some(&data.fresh_train),
                lambda.as_ref(),
            )?;
            log.push(format!("stage evaluate: {:.1} ms", ms(t)));
            m.runtime_ms = Some(runtime);
            artifacts.push(("classifier.json".into(), classifier_json(&out.classifier)?));
            artifacts.push(("selector.json".into(), out.selector.to_json()?));
            artifacts.push(("run_record.json".into(), json(&out.record)?));
            plots.extend(record_plots(&out.record));
            let summary = format!(
                "selective_error={} rejection_train={} rejection_test={} bound={}",
                fmt_opt(m.selective_error),
                fmt_opt(m.rejection_train),
                fmt_opt(m.rejection_test),
                fmt_opt(m.bound)
            );
            (m, summary)
        }
        Mode::Tds => {
            if r.beta.is_some() {
                return Err(CliError::validation("tds-run derives beta from A; drop --beta"));
            }
            let mut cfg = TdsConfig::new(r.eps, r.delta, r.theta, r.degree);
            cfg.slack = r.slack_r;
            cfg.multilinear = multilinear;
            cfg.hyper_a = r.hyper_a;
            cfg.seed = seed;
            cfg.solver = solver(r);
            cfg.strict_tau = r.strict;
            let t = Instant::now();
            let v = tds_learn(&data.train, &test_points, &cfg)?;
            let runtime = ms(t);
            log.push(format!(
                "stage learn: {runtime:.1} ms (R={:.6} eps'={:.6e} holdout={} rejection={:.4} threshold={:.4})",
                v.slack, v.eps_filter, v.holdout_size, v.holdout_rejection, v.threshold
            ));
            log.extend(record_lines(&v.record));
            let t = Instant::now();
            let mut m = evaluate_run(
                RunOutput::Tds { verdict: &v, eps: cfg.eps, theta: cfg.theta },
                &data.fresh_test,
                None,
                lambda.as_ref(),
            )?;
            log.push(format!("stage evaluate: {:.1} ms", ms(t)));
            m.runtime_ms = Some(runtime);
            artifacts.push((
                "verdict.json".into(),
                json(&VerdictSummary {
                    decision: v.decision,
                    holdout_rejection: v.holdout_rejection,
                    threshold: v.threshold,
                    slack: v.slack,
                    eps_filter: v.eps_filter,
                    beta: v.beta,
                    holdout_size: v.holdout_size,
                })?,
            ));
            if let Some(h) = &v.classifier {
                artifacts.push(("classifier.json".into(), classifier_json(h)?));
            }
            artifacts.push(("selector.json".into(), v.selector.to_json()?));
            artifacts.push(("run_record.json".into(), json(&v.record)?));
            plots.extend(record_plots(&v.record));
            let summary = format!(
                "decision={} holdout_rejection={:.4} threshold={:.4} test_error={}",
                m.decision.as_deref().unwrap_or("-"),
                v.holdout_rejection,
                v.threshold,
                fmt_opt(m.test_error)
            );
            (m, summary)
        }
        Mode::Icf => {
            let mut cfg = IcfConfig::new(r.degree, r.slack_r.unwrap_or(2.0), r.beta.unwrap_or(1.0), r.eps);
            cfg.multilinear = multilinear;
            cfg.hyper_a = r.hyper_a;
            cfg.solver = solver(r);
            cfg.strict_tau = r.strict;
            cfg.validate()?;
            let t = Instant::now();
            let (reg_idx, ref_idx) = split_indices(data.train.len(), seed);
            let (h, _, train_err) = learn_classifier(&data.train.subset(&reg_idx), r.degree, multilinear, 1e-7)?;
            let family = vec![h.clone(), h.complement()];
            let (sel, rec) = run_icf(&family, &data.train.subset(&ref_idx).unlabeled(), &test_points, &cfg)?;
            let runtime = ms(t);
            log.push(format!("stage learn: {runtime:.1} ms (train error {train_err:.4})"));
            log.extend(record_lines(&rec));
            let removed_shifted = (0..test_points.len())
                .filter(|i| data.test_shifted[*i] && rec.surviving.binary_search(i).is_err())
                .count();
            let shifted = data.test_shifted.iter().filter(|v| **v).count();
            log.push(format!("filter: removed {removed_shifted} of {shifted} shifted test points"));
            let t = Instant::now();
            let m = MetricRecord {
                mode: "icf".into(),
                selective_error: Some(selective_error(&h, &sel, &data.fresh_test)?),
                rejection_train: Some(rejection_rate(&sel, &data.fresh_train.unlabeled())?),
                rejection_test: Some(rejection_rate(&sel, &data.fresh_test.unlabeled())?),
                lambda: lambda.as_ref().map(|l| l.lambda),
                lambda_train: lambda.as_ref().map(|l| l.lambda_train),
                lambda_test: lambda.as_ref().map(|l| l.lambda_test),
                opt_train: lambda.as_ref().map(|l| l.opt_train),
                iterations: Some(rec.filtering_iterations()),
                termination: Some(format!("{:?}", rec.termination)),
                runtime_ms: Some(runtime),
                ..MetricRecord::default()
            };
            log.push(format!("stage evaluate: {:.1} ms", ms(t)));
            artifacts.push(("classifier.json".into(), classifier_json(&h)?));
            artifacts.push(("selector.json".into(), sel.to_json()?));
            artifacts.push(("run_record.json".into(), json(&rec)?));
            plots.extend(record_plots(&rec));
            let summary = format!(
                "rejection_train={} rejection_test={} iterations={} termination={:?}",
                fmt_opt(m.rejection_train),
                fmt_opt(m.rejection_test),
                rec.filtering_iterations(),
                rec.termination
            );
            (m, summary)
        }
    };
    metrics.scenario = scn.name.clone();
    metrics.seed = seed;
    artifacts.push(("results.csv".into(), results_csv(&metrics)?));
    let summary = format!("summary scenario={} seed={seed} mode={} {summary}", scn.name, mode.name());
    log.push(summary.clone());
    Ok(Trial { metrics, artifacts, plots, log, summary })
}
