//! Solve and verify runs, and the artifacts they leave on disk.
//!
//! A run directory holds `fields/u_eps<j>.{csv,bin}` (one critical point per
//! ε), `polyline.csv` and `normals.csv` for the final free boundary,
//! `trace.json`, `report.json` and `summary.csv`. Every file records the
//! config hash. Timings go to stderr only, so reruns are byte-identical.

use std::fs;
use std::path::Path;
use std::time::Instant;

use fblab_core::discretization::io::{FieldFile, FieldIoError};
use fblab_core::discretization::{linear_solve, ShiftedLaplacian};
use fblab_core::freeboundary::extract_free_boundary;
use fblab_core::solver::{initial_guess, minimize_on_m, solve, EpsRecord};
use fblab_core::verification::{verify, VerificationReport};
use fblab_core::{Field, Grid, NonlinearityModel, RegularizedFunctional};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Setup;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub eps: f64,
    pub pairs: usize,
    pub step: f64,
    /// Worst `|fd - ⟨r, v⟩| / max(|⟨r, v⟩|, 1e-3)` over the pairs.
    pub max_rel_error: f64,
}

/// Smooth admissible field: the discrete Poisson solution for a random
/// nonnegative load, scaled to `max = amplitude`.
pub fn smooth_random_field(grid: &Grid, rng: &mut ChaCha8Rng, amplitude: f64) -> Result<Field, CliError> {
    let load: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let phi = linear_solve(grid, &ShiftedLaplacian::default(), &load, 1e-12).map_err(|e| CliError::Solver(e.to_string()))?;
    Ok(phi.scaled(amplitude / phi.max()))
}

/// Central differences of `J_ε` along random directions against the
/// residual inner product.
pub fn gradient_check(
    grid: &Grid,
    model: &NonlinearityModel,
    eps: f64,
    seed: u64,
    pairs: usize,
) -> Result<GradientCheck, CliError> {
    let f = RegularizedFunctional::new(grid, model, eps).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-5;
    let mut worst = 0.0f64;
    let energy = |u: &Field| f.eval_jeps(u).map_err(|e| CliError::Solver(e.to_string()));
    for _ in 0..pairs {
        let amp = rng.gen_range(1.5..3.0);
        let u = smooth_random_field(grid, &mut rng, amp)?;
        let v = smooth_random_field(grid, &mut rng, 1.0)?;
        let fd = (energy(&u.axpy(step, &v))? - energy(&u.axpy(-step, &v))?) / (2.0 * step);
        let r = f.residual_eq13(&u).map_err(|e| CliError::Solver(e.to_string()))?;
        let exact = grid.inner(&r, &v);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-3));
    }
    Ok(GradientCheck {
        eps,
        pairs,
        step,
        max_rel_error: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NehariSummary {
    pub level: f64,
    pub iterations: usize,
    pub identity_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub name: String,
    pub seed: u64,
    pub shape: [usize; 2],
    pub h: f64,
    pub gradient_check: GradientCheck,
    pub records: Vec<EpsRecord>,
    /// ε of the last mountain pass and the energies along its final path.
    pub path_eps: Option<f64>,
    pub path_energies: Vec<f64>,
    pub nehari: Option<NehariSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config_hash: String,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub parameter: String,
    pub value: String,
    /// `ok`, `verification_failed` or `solver_error`.
    pub status: String,
    pub exit_code: u8,
    pub final_eps: Option<f64>,
    pub level: Option<f64>,
    pub sharp_energy: Option<f64>,
    pub nehari_level: Option<f64>,
    pub fb_median: Option<f64>,
    pub nondegeneracy_c: Option<f64>,
    pub critical_threshold: Option<f64>,
    pub below_threshold: Option<bool>,
    /// Solver failure or a level at or above the compactness threshold.
    pub breakdown: bool,
    pub first_breakdown: bool,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub summary: SummaryRow,
    pub report: Option<VerificationReport>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes to JSON");
    s.push('\n');
    s.into_bytes()
}

pub fn field_name(j: usize) -> String {
    format!("u_eps{j}")
}

pub fn write_summary(path: &Path, hash: &str, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| io_err(path, e))?;
    }
    let body = w.into_inner().map_err(|e| io_err(path, e))?;
    let mut out = format!("# config_hash={hash}\n").into_bytes();
    out.extend_from_slice(&body);
    write(path, &out)
}

fn write_report(out: &Path, hash: &str, report: &VerificationReport) -> Result<(), CliError> {
    write(
        &out.join("report.json"),
        &json(&ReportFile {
            config_hash: hash.into(),
            report: report.clone(),
        }),
    )
}

fn base_row(setup: &Setup) -> SummaryRow {
    SummaryRow {
        name: setup.config.name.clone(),
        parameter: String::new(),
        value: String::new(),
        status: "solver_error".into(),
        exit_code: 1,
        final_eps: None,
        level: None,
        sharp_energy: None,
        nehari_level: None,
        fb_median: None,
        nondegeneracy_c: None,
        critical_threshold: None,
        below_threshold: None,
        breakdown: true,
        first_breakdown: false,
        config_hash: setup.hash.clone(),
    }
}

/// Full pipeline into `out`. Solver failures are reported through the exit
/// code (1) with the trace still written; only I/O problems are errors.
pub fn run_solve(setup: &Setup, out: &Path) -> Result<RunOutcome, CliError> {
    let (grid, model, hash) = (&setup.grid, &setup.config.model, &setup.hash);
    let started = Instant::now();
    fs::create_dir_all(out.join("fields")).map_err(|e| io_err(out, e))?;
    let eps = setup.solve.schedule.values();
    let gradient = gradient_check(
        grid,
        model,
        *eps.last().unwrap(),
        setup.config.run.seed,
        setup.config.solver.gradient_pairs,
    )?;
    let mut trace = TraceFile {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.clone(),
        name: setup.config.name.clone(),
        seed: setup.config.run.seed,
        shape: [grid.shape().0, grid.shape().1],
        h: grid.h(),
        gradient_check: gradient,
        records: Vec::new(),
        path_eps: None,
        path_energies: Vec::new(),
        nehari: None,
        error: None,
    };
    let mut row = base_row(setup);
    let fail = |trace: &mut TraceFile, row: SummaryRow, msg: String| -> Result<RunOutcome, CliError> {
        eprintln!("{}: solver error: {msg}", setup.config.name);
        trace.error = Some(msg);
        write(&out.join("trace.json"), &json(trace))?;
        write_summary(&out.join("summary.csv"), hash, std::slice::from_ref(&row))?;
        Ok(RunOutcome {
            exit_code: 1,
            summary: row,
            report: None,
        })
    };

    let solved = match solve(grid, model, &initial_guess(grid), &setup.solve) {
        Ok(s) => s,
        Err(e) => return fail(&mut trace, row, e.to_string()),
    };
    trace.records = solved.trace.records.clone();
    trace.path_eps = Some(solved.path_eps);
    let f = RegularizedFunctional::new(grid, model, solved.path_eps).map_err(|e| CliError::Config(e.to_string()))?;
    trace.path_energies = solved.path.energies(&f);
    let last = solved.trace.records.last().unwrap();
    row.final_eps = Some(last.eps);
    row.level = Some(last.level);
    row.sharp_energy = Some(last.sharp_energy);

    if let Some(opts) = &setup.nehari {
        match minimize_on_m(grid, model, &initial_guess(grid), opts) {
            Ok(n) => {
                trace.nehari = Some(NehariSummary {
                    level: n.level,
                    iterations: n.iterations,
                    identity_residual: n.identity_residual,
                });
                row.nehari_level = Some(n.level);
            }
            Err(e) => return fail(&mut trace, row, format!("Nehari minimization: {e}")),
        }
    }

    for (j, u) in solved.trace.fields.iter().enumerate() {
        let file = FieldFile {
            nx: grid.shape().0,
            ny: grid.shape().1,
            h: grid.h(),
            config_hash: Some(hash.clone()),
            field: u.clone(),
        };
        let stem = out.join("fields").join(field_name(j));
        write(&stem.with_extension("csv"), file.to_csv_string().as_bytes())?;
        write(&stem.with_extension("bin"), &file.to_bytes())?;
    }
    let u = solved.trace.last_field().unwrap();
    let fb = extract_free_boundary(grid, u);
    write(&out.join("polyline.csv"), fb.polyline_csv(Some(hash)).as_bytes())?;
    write(&out.join("normals.csv"), fb.normals_csv(Some(hash)).as_bytes())?;

    let levels: Vec<(f64, Field)> = solved
        .trace
        .records
        .iter()
        .zip(&solved.trace.fields)
        .map(|(r, u)| (r.eps, u.clone()))
        .collect();
    let report = match verify(grid, model, &levels, row.nehari_level, &setup.config.verify) {
        Ok(r) => r,
        Err(e) => return fail(&mut trace, row, format!("verification: {e}")),
    };
    write(&out.join("trace.json"), &json(&trace))?;
    write_report(out, hash, &report)?;

    let exit_code = if report.passed { 0 } else { 2 };
    row.status = if report.passed { "ok" } else { "verification_failed" }.into();
    row.exit_code = exit_code;
    row.fb_median = (!report.fb_condition.trivial).then_some(report.fb_condition.median_abs);
    row.nondegeneracy_c = report.nondegeneracy.c;
    row.critical_threshold = report.critical.as_ref().map(|c| c.threshold);
    row.below_threshold = report.critical.as_ref().map(|c| c.pass);
    row.breakdown = row.below_threshold == Some(false);
    write_summary(&out.join("summary.csv"), hash, std::slice::from_ref(&row))?;
    eprintln!(
        "{}: {} levels, final level {:.6}, {} in {:.2} s",
        setup.config.name,
        levels.len(),
        last.level,
        row.status,
        started.elapsed().as_secs_f64()
    );
    Ok(RunOutcome {
        exit_code,
        summary: row,
        report: Some(report),
    })
}

fn load_field(path: &Path, setup: &Setup) -> Result<Field, CliError> {
    let file = FieldFile::from_bytes(&read(path)?).map_err(|e| match e {
        FieldIoError::Io(e) => io_err(path, e),
        FieldIoError::Schema(m) => CliError::Schema(format!("{}: {m}", path.display())),
    })?;
    let (nx, ny) = setup.grid.shape();
    if (file.nx, file.ny) != (nx, ny) {
        return Err(CliError::Schema(format!(
            "{}: shape {}x{} does not match the grid {nx}x{ny}",
            path.display(),
            file.nx,
            file.ny
        )));
    }
    if file.config_hash.as_deref() != Some(setup.hash.as_str()) {
        return Err(CliError::Schema(format!("{}: config hash mismatch", path.display())));
    }
    Ok(file.field)
}

/// Re-runs verification on the fields of a previous solve in `run_dir` and
/// writes `report.json` into `out`.
pub fn run_verify(setup: &Setup, run_dir: &Path, out: &Path) -> Result<u8, CliError> {
    let trace_path = run_dir.join("trace.json");
    let trace: TraceFile = serde_json::from_slice(&read(&trace_path)?)
        .map_err(|e| CliError::Schema(format!("{}: {e}", trace_path.display())))?;
    if trace.schema_version != SCHEMA_VERSION {
        return Err(CliError::Schema(format!("unsupported trace schema {}", trace.schema_version)));
    }
    if trace.config_hash != setup.hash {
        return Err(CliError::Schema("trace was produced by a different config".into()));
    }
    if let Some(e) = &trace.error {
        return Err(CliError::Schema(format!("run did not produce a solution: {e}")));
    }
    let levels = trace
        .records
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let path = run_dir.join("fields").join(field_name(j)).with_extension("bin");
            Ok((r.eps, load_field(&path, setup)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let nehari = trace.nehari.as_ref().map(|n| n.level);
    let report = verify(&setup.grid, &setup.config.model, &levels, nehari, &setup.config.verify)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write_report(out, &setup.hash, &report)?;
    Ok(if report.passed { 0 } else { 2 })
}
