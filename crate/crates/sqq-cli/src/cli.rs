//! Command-line interface: `run`, `bench`, `compare`, and `validate`.
//! Exit codes: 0 success, 1 usage error, 2 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sqq_core::driver::{integrate, Trajectory, VariantName};
use sqq_core::problems::ProblemSpec;

use crate::bench::{run_suite, write_outputs, Suite};
use crate::config::{RunConfig, UsageError};
use crate::output;
use crate::validate;

#[derive(Parser, Debug)]
#[command(
    name = "sqq",
    about = "Generating-function symplectic integrators for gravitational dynamics",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory and write a CSV dump plus a summary line.
    Run(RunArgs),
    /// Execute a benchmark matrix and emit result tables.
    Bench(BenchArgs),
    /// Run two variants on the same problem and report their pointwise
    /// difference.
    Compare(CompareArgs),
    /// Run the built-in invariant suite (gradient checks, symplecticity,
    /// projection equivalence, solver identities).
    Validate,
}

#[derive(Args, Debug, Clone)]
struct CommonRunArgs {
    /// Problem: kepler, three-body, or outer-solar.
    #[arg(long)]
    problem: Option<String>,
    /// Kepler eccentricity in [0, 1).
    #[arg(long = "e")]
    eccentricity: Option<f64>,
    /// Coordinate interpolation degree.
    #[arg(long)]
    m: Option<usize>,
    /// Momentum interpolation degree.
    #[arg(long)]
    n: Option<usize>,
    /// Step size (physical or transformed time, in problem units).
    #[arg(long = "dt")]
    step: Option<f64>,
    /// Duration: a number in problem units or `<N>periods`.
    #[arg(long)]
    duration: Option<String>,
    /// Record every k-th step.
    #[arg(long)]
    sample_every: Option<usize>,
    /// Step-size control: energy, radial, or unit.
    #[arg(long)]
    sigma_kind: Option<String>,
    /// Radial control exponent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Lower control bound a.
    #[arg(long = "sigma-a")]
    sigma_lower: Option<f64>,
    /// Upper control bound b.
    #[arg(long = "sigma-b")]
    sigma_upper: Option<f64>,
    /// Normalize the energy control at the initial state: auto, on, off.
    #[arg(long)]
    sigma_normalize: Option<String>,
    /// Per-step solver convergence threshold.
    #[arg(long = "solver-eps")]
    solver_epsilon: Option<f64>,
    /// Per-step solver iteration cap.
    #[arg(long = "solver-kmax")]
    solver_k_max: Option<usize>,
    /// Re-solve the basis system every step instead of projecting.
    #[arg(long, default_value_t = false)]
    no_projection: bool,
    /// Outer-solar time unit: days or years.
    #[arg(long)]
    time_unit: Option<String>,
    /// Alternative solar-system data file.
    #[arg(long)]
    solar_data: Option<PathBuf>,
    /// Gauss points per step (default m + n + 1).
    #[arg(long)]
    gauss: Option<usize>,
    /// Node placement check: equidistant or chebyshev. Must agree with the
    /// variant's inherent placement; this flag only validates, it cannot
    /// override.
    #[arg(long)]
    node_kind: Option<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON run configuration; CLI flags override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Integrator variant (SQQ, SQQ-P, SQQ-PN, SQQ-PQ, SQQ-PTN, SQQ-PTQ).
    #[arg(long)]
    variant: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonRunArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Suite name (`paper-tables`) or path to a suite JSON file.
    #[arg(long, default_value = "paper-tables")]
    suite: String,
    /// Output directory for results.csv, timings.csv, tables.txt.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 2)]
    jobs: usize,
    /// Run cells one at a time so wall times are undisturbed.
    #[arg(long, default_value_t = false)]
    serial_timing: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    variant_a: String,
    #[arg(long)]
    variant_b: String,
    /// Optional CSV of per-sample differences.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonRunArgs,
}

/// Overlay CLI flags onto a base config.
fn apply_common(cfg: &mut RunConfig, args: &CommonRunArgs) {
    if let Some(v) = &args.problem {
        cfg.problem = v.clone();
    }
    if let Some(v) = args.eccentricity {
        cfg.eccentricity = v;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.step {
        cfg.step = v;
    }
    if let Some(v) = &args.duration {
        cfg.duration = v.clone();
    }
    if let Some(v) = args.sample_every {
        cfg.sample_every = v;
    }
    if let Some(v) = &args.sigma_kind {
        cfg.sigma_kind = v.clone();
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.sigma_lower {
        cfg.sigma_lower = v;
    }
    if let Some(v) = args.sigma_upper {
        cfg.sigma_upper = v;
    }
    if let Some(v) = &args.sigma_normalize {
        cfg.sigma_normalize = v.clone();
    }
    if let Some(v) = args.solver_epsilon {
        cfg.solver_epsilon = v;
    }
    if let Some(v) = args.solver_k_max {
        cfg.solver_k_max = v;
    }
    if args.no_projection {
        cfg.no_projection = true;
    }
    if let Some(v) = &args.time_unit {
        cfg.time_unit = v.clone();
    }
    if let Some(v) = &args.solar_data {
        cfg.solar_data = Some(v.clone());
    }
    if let Some(v) = args.gauss {
        cfg.gauss_points = Some(v);
    }
}

/// The node-kind flag cannot contradict the variant's inherent placement.
fn check_node_kind(cfg: &RunConfig, node_kind: &Option<String>) -> Result<(), UsageError> {
    let Some(kind) = node_kind else {
        return Ok(());
    };
    let variant = cfg.variant_name()?;
    let inherent = match variant.q_node_kind() {
        sqq_core::basis::NodeKind::Equidistant => "equidistant",
        _ => "chebyshev",
    };
    match kind.as_str() {
        "equidistant" | "chebyshev" => {
            if kind != inherent {
                return Err(UsageError(format!(
                    "conflicting flags: --variant {} uses {inherent} nodes, \
                     but --node-kind {kind} was requested",
                    cfg.variant
                )));
            }
            Ok(())
        }
        other => Err(UsageError(format!(
            "unknown node kind `{other}` (expected equidistant or chebyshev)"
        ))),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, UsageError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| UsageError(format!("cannot parse config {}: {e}", p.display())))
        }
    }
}

enum CmdError {
    Usage(String),
    Numerical(String),
}

impl From<UsageError> for CmdError {
    fn from(e: UsageError) -> Self {
        CmdError::Usage(e.to_string())
    }
}

fn integrate_config(cfg: &RunConfig) -> Result<(ProblemSpec, Trajectory, f64), CmdError> {
    let problem = cfg.build_problem()?;
    let settings = cfg.build_settings()?;
    let duration = cfg.resolve_duration(problem.period)?;
    let start = Instant::now();
    let mut traj = integrate(&problem.model, problem.initial.clone(), settings, duration)
        .map_err(|e| CmdError::Numerical(e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();
    traj.meta.problem = problem.name.clone();
    traj.meta.wall_time = Some(wall);
    Ok((problem, traj, wall))
}

fn cmd_run(args: RunArgs) -> Result<(), CmdError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(v) = &args.variant {
        cfg.variant = v.clone();
    }
    if let Some(v) = &args.out {
        cfg.out = Some(v.clone());
    }
    apply_common(&mut cfg, &args.common);
    check_node_kind(&cfg, &args.common.node_kind)?;

    let (problem, traj, wall) = integrate_config(&cfg)?;
    if let Some(out) = &cfg.out {
        if let Some(dir) = out.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CmdError::Usage(format!("cannot create {}: {e}", dir.display())))?;
            }
        }
        output::write_trajectory_csv(out, &traj)
            .map_err(|e| CmdError::Usage(format!("cannot write {}: {e}", out.display())))?;
        output::write_timing_sidecar(out, &output::summary_line(&problem.name, &traj), wall)
            .map_err(|e| CmdError::Usage(format!("cannot write timing sidecar: {e}")))?;
    }
    println!("{} wall={wall:.3}s", output::summary_line(&problem.name, &traj));
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CmdError> {
    let suite = Suite::resolve(&args.suite)?;
    if args.jobs == 0 {
        return Err(CmdError::Usage("--jobs must be at least 1".into()));
    }
    let records = run_suite(&suite, args.jobs, args.serial_timing);
    write_outputs(&args.out, &records)
        .map_err(|e| CmdError::Usage(format!("cannot write bench outputs: {e}")))?;
    print!("{}", crate::bench::text_tables(&records));
    let failed: Vec<&str> = records
        .iter()
        .filter(|r| r.status != "ok")
        .map(|r| r.label.as_str())
        .collect();
    if !failed.is_empty() {
        eprintln!("failed cells: {}", failed.join(", "));
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CmdError> {
    let mut cfg_a = RunConfig::default();
    apply_common(&mut cfg_a, &args.common);
    check_node_kind(&cfg_a, &args.common.node_kind)?;
    let mut cfg_b = cfg_a.clone();
    cfg_a.variant = args.variant_a.clone();
    cfg_b.variant = args.variant_b.clone();

    let va = VariantName::parse(&cfg_a.variant).map_err(|e| CmdError::Usage(e.to_string()))?;
    let vb = VariantName::parse(&cfg_b.variant).map_err(|e| CmdError::Usage(e.to_string()))?;

    let (_, traj_a, _) = integrate_config(&cfg_a)?;
    let (problem, traj_b, _) = integrate_config(&cfg_b)?;

    let same_grid = va.uses_time_transform() == vb.uses_time_transform();
    if same_grid && traj_a.samples.len() == traj_b.samples.len() {
        let mut max_dq: f64 = 0.0;
        let mut max_dp: f64 = 0.0;
        let mut max_dh: f64 = 0.0;
        let mut max_dt: f64 = 0.0;
        let mut rows = String::from("t,max_dq,max_dp,dH,dt\n");
        for (sa, sb) in traj_a.samples.iter().zip(&traj_b.samples) {
            let dq = sa
                .q
                .iter()
                .zip(&sb.q)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let dp = sa
                .p
                .iter()
                .zip(&sb.p)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let dh = (sa.h - sb.h).abs();
            let dt = (sa.t - sb.t).abs();
            max_dq = max_dq.max(dq);
            max_dp = max_dp.max(dp);
            max_dh = max_dh.max(dh);
            max_dt = max_dt.max(dt);
            rows.push_str(&format!(
                "{},{},{},{},{}\n",
                output::full_precision(sa.t),
                output::full_precision(dq),
                output::full_precision(dp),
                output::full_precision(dh),
                output::full_precision(dt)
            ));
        }
        if let Some(out) = &args.out {
            std::fs::write(out, rows)
                .map_err(|e| CmdError::Usage(format!("cannot write {}: {e}", out.display())))?;
        }
        println!(
            "compare {} vs {} on {}: samples={} max|dq|={max_dq:.6e} max|dp|={max_dp:.6e} \
             max|dH|={max_dh:.6e} max|dt|={max_dt:.6e}",
            va.as_str(),
            vb.as_str(),
            problem.name,
            traj_a.samples.len()
        );
    } else {
        let fa = traj_a.final_state().unwrap();
        let fb = traj_b.final_state().unwrap();
        let dq = fa
            .q
            .iter()
            .zip(&fb.q)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let dp = fa
            .p
            .iter()
            .zip(&fb.p)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        println!(
            "compare {} vs {} on {}: different step grids; final-state diff \
             max|dq|={dq:.6e} max|dp|={dp:.6e} max_err_a={:.6e} max_err_b={:.6e}",
            va.as_str(),
            vb.as_str(),
            problem.name,
            traj_a.meta.max_abs_energy_error,
            traj_b.meta.max_abs_energy_error
        );
    }
    Ok(())
}

fn cmd_validate() -> Result<(), CmdError> {
    let results = validate::run_all();
    let mut all_ok = true;
    for r in &results {
        println!(
            "{} {} - {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        all_ok &= r.passed;
    }
    if all_ok {
        Ok(())
    } else {
        Err(CmdError::Numerical("validation checks failed".into()))
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Validate => cmd_validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
