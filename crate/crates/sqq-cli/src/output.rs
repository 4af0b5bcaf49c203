//! Output formats: the trajectory CSV dump, the wall-time sidecar, and the
//! run summary line. Result files carry no timing data so identical
//! invocations produce byte-identical files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sqq_core::driver::Trajectory;

/// Full-precision rendering used in every output file: 17 significant
/// digits round-trips any f64.
pub fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write one trajectory as CSV: header
/// `t,q_0..q_{d-1},p_0..p_{d-1},H,abs_err,rel_err,sigma,iters`,
/// one row per sample.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> io::Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let d = traj.dof();
    let h0 = traj.meta.h0;

    let mut header = String::from("t");
    for i in 0..d {
        header.push_str(&format!(",q_{i}"));
    }
    for i in 0..d {
        header.push_str(&format!(",p_{i}"));
    }
    header.push_str(",H,abs_err,rel_err,sigma,iters");
    writeln!(w, "{header}")?;

    for s in &traj.samples {
        let abs_err = (s.h - h0).abs();
        let rel_err = if h0 != 0.0 { abs_err / h0.abs() } else { abs_err };
        let mut row = full_precision(s.t);
        for v in s.q.iter().chain(s.p.iter()) {
            row.push(',');
            row.push_str(&full_precision(*v));
        }
        row.push(',');
        row.push_str(&full_precision(s.h));
        row.push(',');
        row.push_str(&full_precision(abs_err));
        row.push(',');
        row.push_str(&full_precision(rel_err));
        row.push(',');
        row.push_str(&full_precision(s.sigma));
        row.push_str(&format!(",{}", s.solver_iterations));
        writeln!(w, "{row}")?;
    }
    w.flush()
}

/// Parse a trajectory CSV back into samples (inverse of
/// [`write_trajectory_csv`]). Because the writer emits 17 significant
/// digits, every f64 round-trips exactly and diagnostics recomputed from a
/// dumped file match the originals bitwise.
pub fn read_trajectory_csv(path: &Path, meta: sqq_core::driver::TrajectoryMeta) -> io::Result<Trajectory> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty trajectory file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let d = cols.iter().filter(|c| c.starts_with("q_")).count();
    let mut samples = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 * d + 6 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("row has {} fields, expected {}", fields.len(), 2 * d + 6),
            ));
        }
        let parse = |s: &str| -> io::Result<f64> {
            s.parse()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}: `{s}`")))
        };
        let t = parse(fields[0])?;
        let q: Vec<f64> = fields[1..1 + d]
            .iter()
            .map(|s| parse(s))
            .collect::<io::Result<_>>()?;
        let p: Vec<f64> = fields[1 + d..1 + 2 * d]
            .iter()
            .map(|s| parse(s))
            .collect::<io::Result<_>>()?;
        let h = parse(fields[1 + 2 * d])?;
        let sigma = parse(fields[4 + 2 * d])?;
        let iters: usize = fields[5 + 2 * d]
            .parse()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}")))?;
        samples.push(sqq_core::driver::Sample {
            t,
            q,
            p,
            h,
            sigma,
            solver_iterations: iters,
        });
    }
    Ok(Trajectory { samples, meta })
}

/// Sidecar path for wall-time data: `<out>.timing`.
pub fn timing_sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".timing");
    PathBuf::from(name)
}

pub fn write_timing_sidecar(out: &Path, label: &str, wall_seconds: f64) -> io::Result<()> {
    let path = timing_sidecar_path(out);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{{\"label\": \"{label}\", \"wall_time_s\": {}}}",
        full_precision(wall_seconds)
    )?;
    w.flush()
}

/// One-line run summary for the terminal.
pub fn summary_line(problem: &str, traj: &Trajectory) -> String {
    let min_sep = traj
        .meta
        .min_separation
        .map(|(dist, t)| format!(" min_sep={dist:.6e}@t={t:.6e}"))
        .unwrap_or_default();
    format!(
        "{} {} steps={} max_abs_err={:.6e} max_rel_err={:.6e} evals={} overshoot={:.3e}{}",
        traj.meta.variant.as_str(),
        problem,
        traj.meta.steps,
        traj.meta.max_abs_energy_error,
        traj.meta.max_rel_energy_error,
        traj.meta.residual_evaluations,
        traj.meta.overshoot,
        min_sep
    )
}
