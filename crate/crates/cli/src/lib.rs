//! The `chowfilter` command line: single runs, sweeps and the oracle self-check.
//!
//! Exit codes: 0 success, 1 oracle-check failure, 2 invalid input, 3 solver failure.

pub mod args;
pub mod error;
pub mod oracle_check;
pub mod output;
pub mod run;
pub mod sweep;

use std::time::Instant;

use args::{Command, Mode, RunArgs, SweepArgs};
use error::CliError;
use output::{ensure_dir, write_atomic, RunLog};

/// Runs a parsed command and returns the process exit code.
pub fn execute(command: Command) -> Result<u8, CliError> {
    match command {
        Command::PqRun(a) => single(Mode::Pq, &a),
        Command::TdsRun(a) => single(Mode::Tds, &a),
        Command::IcfRun(a) => single(Mode::Icf, &a),
        Command::BenchSweep(a) => bench_sweep(&a),
        Command::OracleCheck(a) => {
            let checks = oracle_check::run_checks(a.d, a.n, a.seed)?;
            let mut failed = 0;
            for c in &checks {
                println!("check {}: {} ({})", c.name, if c.pass { "ok" } else { "FAILED" }, c.detail);
                failed += usize::from(!c.pass);
            }
            println!("oracle-check d={}: {} of {} checks passed", a.d, checks.len() - failed, checks.len());
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

fn single(mode: Mode, a: &RunArgs) -> Result<u8, CliError> {
    let scn = run::load_scenario(&a.scenario, &a.params)?;
    let resolved = a.params.resolve();
    ensure_dir(&a.out)?;
    let mut log = RunLog::default();
    log.line(format!("command: {}-run scenario={}", mode.name(), a.scenario.display()));
    log.line(format!("config: scenario {scn:?}"));
    log.line(format!("config: parameters {resolved:?}"));
    match run::run_trial(mode, &scn, &resolved) {
        Ok(trial) => {
            for (name, body) in &trial.artifacts {
                write_atomic(&a.out, name, body.as_bytes())?;
            }
            if a.emit_plot_data {
                for (name, body) in &trial.plots {
                    write_atomic(&a.out, name, body.as_bytes())?;
                }
            }
            log.extend(trial.log.iter().take(trial.log.len() - 1).cloned());
            log.record(trial.summary.clone());
            log.save(&a.out)?;
            println!("{}", trial.summary);
            Ok(0)
        }
        Err(e) => {
            log.line(format!("error: {e}"));
            log.save(&a.out)?;
            Err(e)
        }
    }
}

fn bench_sweep(a: &SweepArgs) -> Result<u8, CliError> {
    let scenario = run::load_scenario(&a.scenario, &args::Params { seed: None, ..a.params.clone() })?;
    let axes = sweep::parse_grid(&a.grid)?;
    ensure_dir(&a.out)?;
    let plan = sweep::SweepPlan {
        mode: a.mode,
        scenario,
        base: a.params.clone(),
        axes,
        seeds: a.seeds,
        workers: a.workers,
        fail_fast: a.fail_fast,
    };
    let mut log = RunLog::default();
    log.line(format!("command: bench-sweep mode={} scenario={}", a.mode.name(), a.scenario.display()));
    log.line(format!("config: parameters {:?}", a.params.resolve()));
    for axis in &plan.axes {
        log.line(format!("config: axis {}={}", axis.key, axis.values.join(",")));
    }
    log.line(format!("config: {} cells x {} seeds", sweep::cells(&plan.axes).len(), a.seeds));
    let start = Instant::now();
    let rows = match sweep::run_sweep(&plan) {
        Ok(rows) => rows,
        Err(e) => {
            log.line(format!("error: {e}"));
            log.save(&a.out)?;
            return Err(e);
        }
    };
    for r in &rows {
        match &r.result {
            Ok(m) => log.line(format!(
                "summary cell={} [{}] seed={} status=ok selective_error={} test_error={} rejection_train={} decision={}",
                r.cell,
                r.overrides,
                r.seed,
                opt(m.selective_error),
                opt(m.test_error),
                opt(m.rejection_train),
                m.decision.as_deref().unwrap_or("-")
            )),
            Err(e) => log.line(format!("summary cell={} [{}] seed={} status=failed error={e}", r.cell, r.overrides, r.seed)),
        }
    }
    let cells = sweep::summarize(&rows);
    write_atomic(&a.out, "trials.csv", sweep::trials_table(&rows, &plan)?.as_bytes())?;
    write_atomic(&a.out, "summary.csv", sweep::summary_table(&cells)?.as_bytes())?;
    if a.emit_plot_data {
        for (name, body) in sweep::plot_series(&cells, &plan.axes) {
            write_atomic(&a.out, &name, body.as_bytes())?;
        }
    }
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    log.line(format!("sweep: {} trials, {failed} failed, {:.1} s", rows.len(), start.elapsed().as_secs_f64()));
    log.save(&a.out)?;
    Ok(0)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}
