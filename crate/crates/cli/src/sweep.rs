//! Cross product of overrides times seeds, run in a worker pool and reduced in order.

use chowfilter::bench::{MetricRecord, Scenario, RESULT_COLUMNS};
use rayon::prelude::*;

use crate::args::{Mode, Params};
use crate::error::CliError;
use crate::run::{apply_overrides, run_trial};

/// One grid axis, `key=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

pub fn parse_grid(specs: &[String]) -> Result<Vec<Axis>, CliError> {
    specs
        .iter()
        .map(|spec| {
            let (key, rest) = spec
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("grid axis `{spec}` is not key=v1,v2,...")))?;
            let key = key.trim().to_string();
            let values: Vec<String> =
                rest.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
            // Reject unknown keys and unparsable values up front.
            let mut probe = Params::default();
            if values.is_empty() {
                probe.set(&key, "0").or_else(|e| if e.message.starts_with("unknown") { Err(e) } else { Ok(()) })?;
            }
            for v in &values {
                probe.set(&key, v)?;
            }
            Ok(Axis { key, values })
        })
        .collect()
}

/// Cells of the grid in row-major order (first axis slowest).
/// No axes gives one empty cell; any empty axis gives no cells.
pub fn cells(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|cell| {
                axis.values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((axis.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    out
}

fn describe(cell: &[(String, String)]) -> String {
    cell.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone)]
pub struct TrialRow {
    pub cell: usize,
    pub overrides: String,
    pub seed: u64,
    pub result: Result<MetricRecord, CliError>,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub mode: Mode,
    pub scenario: Scenario,
    pub base: Params,
    pub axes: Vec<Axis>,
    pub seeds: u64,
    pub workers: Option<usize>,
    pub fail_fast: bool,
}

struct Job {
    cell: usize,
    overrides: Vec<(String, String)>,
    seed: u64,
}

fn run_job(plan: &SweepPlan, job: &Job) -> Result<MetricRecord, CliError> {
    let mut params = plan.base.clone();
    for (k, v) in &job.overrides {
        params.set(k, v)?;
    }
    params.seed = Some(job.seed);
    let mut scn = plan.scenario.clone();
    apply_overrides(&mut scn, &params)?;
    Ok(run_trial(plan.mode, &scn, &params.resolve())?.metrics)
}

/// Runs every trial. Rows come back in (cell, seed) order regardless of scheduling.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<TrialRow>, CliError> {
    let base_seed = plan.base.seed.unwrap_or(plan.scenario.seed);
    let jobs: Vec<Job> = cells(&plan.axes)
        .into_iter()
        .enumerate()
        .flat_map(|(ci, cell)| {
            (0..plan.seeds).map(move |k| Job { cell: ci, overrides: cell.clone(), seed: base_seed + k })
        })
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = plan.workers {
        if w == 0 {
            return Err(CliError::validation("--workers must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::validation(e.to_string()))?;
    let results: Vec<Result<MetricRecord, CliError>> = if plan.fail_fast {
        pool.install(|| jobs.par_iter().map(|j| run_job(plan, j)).collect::<Result<Vec<_>, _>>())?
            .into_iter()
            .map(Ok)
            .collect()
    } else {
        pool.install(|| jobs.par_iter().map(|j| run_job(plan, j)).collect())
    };
    Ok(jobs
        .iter()
        .zip(results)
        .map(|(j, result)| TrialRow { cell: j.cell, overrides: describe(&j.overrides), seed: j.seed, result })
        .collect())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::validation(e.to_string())
}

/// One row per trial: cell, overrides, the metric columns and an error column.
pub fn trials_table(rows: &[TrialRow], plan: &SweepPlan) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cell", "overrides"];
    header.extend(RESULT_COLUMNS);
    header.push("error");
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let (fields, error) = match &r.result {
            Ok(m) => (m.to_fields(), String::new()),
            Err(e) => {
                let m = MetricRecord {
                    scenario: plan.scenario.name.clone(),
                    seed: r.seed,
                    mode: plan.mode.name().into(),
                    ..MetricRecord::default()
                };
                (m.to_fields(), e.to_string())
            }
        };
        let mut rec = vec![r.cell.to_string(), r.overrides.clone()];
        rec.extend(fields);
        rec.push(error);
        w.write_record(&rec).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::validation(e.to_string()))?)
        .map_err(|e| CliError::validation(e.to_string()))
}

type Metric = fn(&MetricRecord) -> Option<f64>;

/// Aggregated metrics, `(name, accessor)`.
pub const SUMMARY_METRICS: [(&str, Metric); 7] = [
    ("selective_error", |m| m.selective_error),
    ("test_error", |m| m.test_error),
    ("rejection_train", |m| m.rejection_train),
    ("rejection_test", |m| m.rejection_test),
    ("bound_slack", |m| m.bound_slack),
    ("iterations", |m| m.iterations.map(|v| v as f64)),
    ("runtime_ms", |m| m.runtime_ms),
];

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, sd))
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub cell: usize,
    pub overrides: String,
    pub trials: usize,
    pub failures: usize,
    pub accept_rate: Option<f64>,
    pub stats: Vec<Option<(f64, f64)>>,
}

pub fn summarize(rows: &[TrialRow]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let cell = rows[start].cell;
        let end = start + rows[start..].iter().take_while(|r| r.cell == cell).count();
        let group = &rows[start..end];
        let ok: Vec<&MetricRecord> = group.iter().filter_map(|r| r.result.as_ref().ok()).collect();
        let decided: Vec<&str> = ok.iter().filter_map(|m| m.decision.as_deref()).collect();
        out.push(CellSummary {
            cell,
            overrides: group[0].overrides.clone(),
            trials: group.len(),
            failures: group.len() - ok.len(),
            accept_rate: (!decided.is_empty())
                .then(|| decided.iter().filter(|d| **d == "ACCEPT").count() as f64 / decided.len() as f64),
            stats: SUMMARY_METRICS
                .iter()
                .map(|(_, get)| mean_sd(&ok.iter().filter_map(|m| get(m)).collect::<Vec<_>>()))
                .collect(),
        });
        start = end;
    }
    out
}

pub fn summary_table(cells: &[CellSummary]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["cell", "overrides", "trials", "failures", "accept_rate"].map(String::from).to_vec();
    for (name, _) in SUMMARY_METRICS {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_sd"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for c in cells {
        let mut rec = vec![
            c.cell.to_string(),
            c.overrides.clone(),
            c.trials.to_string(),
            c.failures.to_string(),
            c.accept_rate.map(|v| v.to_string()).unwrap_or_default(),
        ];
        for s in &c.stats {
            match s {
                Some((m, sd)) => {
                    rec.push(m.to_string());
                    rec.push(sd.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::validation(e.to_string()))?)
        .map_err(|e| CliError::validation(e.to_string()))
}

/// `(x, mean, sd)` series per metric. `x` is the value of the only axis when
/// it is numeric, else the cell index.
pub fn plot_series(cells: &[CellSummary], axes: &[Axis]) -> Vec<(String, String)> {
    let xs: Vec<String> = cells
        .iter()
        .map(|c| match axes {
            [axis] if axis.values.iter().all(|v| v.parse::<f64>().is_ok()) => axis.values[c.cell].clone(),
            _ => c.cell.to_string(),
        })
        .collect();
    SUMMARY_METRICS
        .iter()
        .enumerate()
        .filter_map(|(k, (name, _))| {
            let body: String = cells
                .iter()
                .zip(&xs)
                .filter_map(|(c, x)| c.stats[k].map(|(m, sd)| format!("{x} {m:e} {sd:e}\n")))
                .collect();
            (!body.is_empty()).then(|| (format!("sweep_{name}.dat"), body))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_and_product() {
        let axes = parse_grid(&["eta=0.3,0.5".into(), "slack-R=2, 4 ,8".into()]).unwrap();
        assert_eq!(axes[1].values, vec!["2", "4", "8"]);
        let c = cells(&axes);
        assert_eq!(c.len(), 6);
        assert_eq!(describe(&c[0]), "eta=0.3;slack-R=2");
        assert_eq!(describe(&c[5]), "eta=0.5;slack-R=8");
        assert_eq!(cells(&[]).len(), 1);
        assert!(cells(&parse_grid(&["eta=".into()]).unwrap()).is_empty());
        assert!(parse_grid(&["gamma=1".into()]).is_err());
        assert!(parse_grid(&["gamma=".into()]).is_err());
        assert!(parse_grid(&["eta=abc".into()]).is_err());
        assert!(parse_grid(&["eta".into()]).is_err());
    }

    #[test]
    fn mean_and_sd() {
        assert_eq!(mean_sd(&[]), None);
        assert_eq!(mean_sd(&[2.0]), Some((2.0, 0.0)));
        let (m, sd) = mean_sd(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m, sd), (2.0, 1.0));
    }
}
