use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::Setup;
use crate::pipeline::{run_solve, write_summary, RunOutcome, SummaryRow};
use crate::CliError;

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn run_dir_name(i: usize) -> String {
    format!("run_{i:03}")
}

/// Runs the config once per sweep value, in parallel on `threads` workers,
/// into `out/run_<i>`, and writes the combined `out/summary.csv`. Returns
/// the rows in sweep order and the worst exit code (1 before 2 before 0).
pub fn run_sweep(setup: &Setup, out: &Path, threads: usize) -> Result<(Vec<SummaryRow>, u8), CliError> {
    let sweep = setup
        .config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("the config has no [sweep] section".into()))?;
    // every run is validated before anything is computed or written
    let runs = sweep
        .values
        .iter()
        .map(|v| setup.config.with_parameter(&sweep.parameter, v)?.validate())
        .collect::<Result<Vec<Setup>, CliError>>()?;
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunOutcome, CliError>>>> = Mutex::new((0..runs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, runs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(run) = runs.get(i) else { break };
                let outcome = run_solve(run, &out.join(run_dir_name(i)));
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    let mut rows = Vec::with_capacity(runs.len());
    let mut worst = 0u8;
    let mut seen_breakdown = false;
    for (i, result) in results.into_inner().unwrap().into_iter().enumerate() {
        let mut row = result.expect("every run finishes")?.summary;
        row.parameter = sweep.parameter.clone();
        row.value = value_label(&sweep.values[i]);
        row.first_breakdown = row.breakdown && !seen_breakdown;
        seen_breakdown |= row.breakdown;
        worst = match (worst, row.exit_code) {
            (1, _) | (_, 1) => 1,
            (2, _) | (_, 2) => 2,
            _ => 0,
        };
        rows.push(row);
    }
    write_summary(&out.join("summary.csv"), &setup.hash, &rows)?;
    Ok((rows, worst))
}
