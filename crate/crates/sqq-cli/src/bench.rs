//! Benchmark matrices: named suites of (problem, variant, parameters) cells,
//! a parallel runner, and the table/CSV emitters. Result files carry no
//! timing columns; wall times go to a separate file so results stay
//! reproducible byte-for-byte.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sqq_core::driver::integrate;

use crate::config::{RunConfig, UsageError};

/// The bundled benchmark suite mirroring the reference result tables.
pub const PAPER_TABLES_SUITE: &str = include_str!("../../../suites/paper_tables.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchCell {
    /// Which table this cell belongs to (grouping key in the text report).
    pub table: String,
    pub label: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub description: String,
    pub cells: Vec<BenchCell>,
}

impl Suite {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        serde_json::from_str(text).map_err(|e| UsageError(format!("cannot parse suite: {e}")))
    }

    /// Resolve a suite argument: a built-in name or a path to a suite file.
    pub fn resolve(arg: &str) -> Result<Self, UsageError> {
        if arg == "paper-tables" {
            return Suite::parse(PAPER_TABLES_SUITE);
        }
        let text = std::fs::read_to_string(arg)
            .map_err(|e| UsageError(format!("cannot read suite `{arg}`: {e}")))?;
        Suite::parse(&text)
    }
}

/// Result of one cell. `status` is `ok` or the failure message; failures do
/// not abort the other cells.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub table: String,
    pub label: String,
    pub variant: String,
    pub problem: String,
    pub m: usize,
    pub n: usize,
    pub step: f64,
    pub duration: String,
    pub steps: u64,
    pub max_abs_energy_error: f64,
    pub max_rel_energy_error: f64,
    pub mean_iterations: f64,
    pub residual_evaluations: u64,
    pub wall_time_s: f64,
    pub status: String,
}

pub fn run_cell(cell: &BenchCell) -> BenchRecord {
    let mut record = BenchRecord {
        table: cell.table.clone(),
        label: cell.label.clone(),
        variant: cell.config.variant.clone(),
        problem: cell.config.problem.clone(),
        m: cell.config.m,
        n: cell.config.n,
        step: cell.config.step,
        duration: cell.config.duration.clone(),
        steps: 0,
        max_abs_energy_error: f64::NAN,
        max_rel_energy_error: f64::NAN,
        mean_iterations: f64::NAN,
        residual_evaluations: 0,
        wall_time_s: f64::NAN,
        status: "ok".into(),
    };
    let outcome = (|| -> Result<(), String> {
        let problem = cell.config.build_problem().map_err(|e| e.to_string())?;
        let settings = cell.config.build_settings().map_err(|e| e.to_string())?;
        let duration = cell
            .config
            .resolve_duration(problem.period)
            .map_err(|e| e.to_string())?;
        let start = Instant::now();
        let traj = integrate(&problem.model, problem.initial.clone(), settings, duration)
            .map_err(|e| e.to_string())?;
        record.wall_time_s = start.elapsed().as_secs_f64();
        record.steps = traj.meta.steps;
        record.max_abs_energy_error = traj.meta.max_abs_energy_error;
        record.max_rel_energy_error = traj.meta.max_rel_energy_error;
        record.mean_iterations = traj.meta.solver_iterations as f64 / traj.meta.steps.max(1) as f64;
        record.residual_evaluations = traj.meta.residual_evaluations;
        Ok(())
    })();
    if let Err(msg) = outcome {
        record.status = msg;
    }
    record
}

/// Run every cell. Cells run in parallel across `jobs` workers unless
/// `serial_timing` is set, in which case they run one at a time so the wall
/// times are undisturbed.
pub fn run_suite(suite: &Suite, jobs: usize, serial_timing: bool) -> Vec<BenchRecord> {
    if serial_timing || jobs == 1 {
        return suite.cells.iter().map(run_cell).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("worker pool");
    pool.install(|| {
        use rayon::prelude::*;
        suite.cells.par_iter().map(run_cell).collect()
    })
}

/// Deterministic results CSV (no timing columns).
pub fn results_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(
        "table,label,variant,problem,m,n,step,duration,steps,\
         max_abs_energy_error,max_rel_energy_error,mean_iterations,residual_evaluations,status\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.16e},{},{},{:.16e},{:.16e},{:.6},{},{}",
            r.table,
            r.label,
            r.variant,
            r.problem,
            r.m,
            r.n,
            r.step,
            r.duration,
            r.steps,
            r.max_abs_energy_error,
            r.max_rel_energy_error,
            r.mean_iterations,
            r.residual_evaluations,
            r.status.replace(',', ";")
        );
    }
    out
}

/// Wall-time CSV, kept apart from the result data.
pub fn timings_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("table,label,variant,wall_time_s\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{:.6}",
            r.table, r.label, r.variant, r.wall_time_s
        );
    }
    out
}

/// Aligned text tables, one block per table tag, mirroring the reference
/// table columns (max energy error and CPU time per variant cell).
pub fn text_tables(records: &[BenchRecord]) -> String {
    let mut out = String::new();
    let mut tables: Vec<&str> = records.iter().map(|r| r.table.as_str()).collect();
    tables.dedup();
    let mut seen: Vec<&str> = Vec::new();
    for t in tables {
        if seen.contains(&t) {
            continue;
        }
        seen.push(t);
        let _ = writeln!(out, "== {t} ==");
        let _ = writeln!(
            out,
            "{:<28} {:>8} {:>4} {:>4} {:>10} {:>12} {:>14} {:>14} {:>10} {:>10}",
            "label", "variant", "m", "n", "step", "steps", "max|H-H0|", "max rel", "iters", "wall[s]"
        );
        for r in records.iter().filter(|r| r.table == t) {
            if r.status == "ok" {
                let _ = writeln!(
                    out,
                    "{:<28} {:>8} {:>4} {:>4} {:>10.4e} {:>12} {:>14.6e} {:>14.6e} {:>10.2} {:>10.3}",
                    r.label,
                    r.variant,
                    r.m,
                    r.n,
                    r.step,
                    r.steps,
                    r.max_abs_energy_error,
                    r.max_rel_energy_error,
                    r.mean_iterations,
                    r.wall_time_s
                );
            } else {
                let _ = writeln!(
                    out,
                    "{:<28} {:>8} {:>4} {:>4} {:>10.4e} FAILED: {}",
                    r.label, r.variant, r.m, r.n, r.step, r.status
                );
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_outputs(dir: &Path, records: &[BenchRecord]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), results_csv(records))?;
    std::fs::write(dir.join("timings.csv"), timings_csv(records))?;
    std::fs::write(dir.join("tables.txt"), text_tables(records))?;
    Ok(())
}
