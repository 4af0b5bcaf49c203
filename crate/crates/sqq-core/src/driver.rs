//! Composition of basis, force model, time transformation, step assembly,
//! and solver into the named integrator variants, plus the multi-step
//! trajectory loop with warm-started solves.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{MappedBasis, NodeKind, ReferenceBasis};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{HamiltonianModel, PhaseState};
use crate::sigma::{SigmaConfig, SigmaKind, SigmaScratch, DEFAULT_LOWER_BOUND, DEFAULT_UPPER_BOUND};
use crate::solver::{solve, SolverConfig, SolverMethod};
use crate::step::{
    initial_guess, outgoing_momentum, physical_time_increment, residual, unknown_count,
    StepContext, StepScratch,
};

/// The integrator variant matrix. SQQ-P and SQQ-PN are aliases with
/// identical flags; both names are kept for the run configurations that use
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantName {
    Sqq,
    SqqP,
    SqqPn,
    SqqPq,
    SqqPtn,
    SqqPtq,
}

impl VariantName {
    pub const ALL: [VariantName; 6] = [
        VariantName::Sqq,
        VariantName::SqqP,
        VariantName::SqqPn,
        VariantName::SqqPq,
        VariantName::SqqPtn,
        VariantName::SqqPtq,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_uppercase().as_str() {
            "SQQ" => Ok(VariantName::Sqq),
            "SQQ-P" => Ok(VariantName::SqqP),
            "SQQ-PN" => Ok(VariantName::SqqPn),
            "SQQ-PQ" => Ok(VariantName::SqqPq),
            "SQQ-PTN" => Ok(VariantName::SqqPtn),
            "SQQ-PTQ" => Ok(VariantName::SqqPtq),
            _ => Err(Error::InvalidArgument("unknown integrator variant")),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            VariantName::Sqq => "SQQ",
            VariantName::SqqP => "SQQ-P",
            VariantName::SqqPn => "SQQ-PN",
            VariantName::SqqPq => "SQQ-PQ",
            VariantName::SqqPtn => "SQQ-PTN",
            VariantName::SqqPtq => "SQQ-PTQ",
        }
    }

    /// Coordinate-node placement.
    pub fn q_node_kind(&self) -> NodeKind {
        match self {
            VariantName::Sqq => NodeKind::Equidistant,
            _ => NodeKind::ChebyshevLobatto,
        }
    }

    /// Momentum-node placement.
    pub fn p_node_kind(&self) -> NodeKind {
        match self {
            VariantName::Sqq => NodeKind::Equidistant,
            _ => NodeKind::ChebyshevGauss,
        }
    }

    /// Whether reference-interval basis values are reused across steps
    /// (`false` re-solves the Vandermonde system every step).
    pub fn uses_projection(&self) -> bool {
        !matches!(self, VariantName::Sqq)
    }

    pub fn uses_time_transform(&self) -> bool {
        matches!(self, VariantName::SqqPtn | VariantName::SqqPtq)
    }

    pub fn solver_method(&self) -> SolverMethod {
        match self {
            VariantName::SqqPq | VariantName::SqqPtq => SolverMethod::Broyden,
            _ => SolverMethod::NewtonFd,
        }
    }
}

/// Control-function settings for the time-transformed variants.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSettings {
    pub kind: SigmaKind,
    pub lower: f64,
    pub upper: f64,
    /// Rescale the energy control so it equals one at the initial state.
    /// Useful when the problem's natural energy scale is far from one
    /// (otherwise the transformed step `dtau` has no physical-time meaning).
    pub normalize: bool,
}

impl Default for SigmaSettings {
    fn default() -> Self {
        SigmaSettings {
            kind: SigmaKind::Energy,
            lower: DEFAULT_LOWER_BOUND,
            upper: DEFAULT_UPPER_BOUND,
            normalize: false,
        }
    }
}

/// Everything that parameterizes a run of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub variant: VariantName,
    /// Coordinate interpolation degree.
    pub m: usize,
    /// Momentum interpolation degree.
    pub n: usize,
    /// Step length: physical time for fixed-step variants, transformed time
    /// for the time-transformed ones.
    pub step: f64,
    pub sigma: SigmaSettings,
    /// Relative-step convergence threshold of the per-step solver.
    pub solver_epsilon: f64,
    pub solver_k_max: usize,
    /// Override the variant's projection flag (used by the projection
    /// cost-comparison benchmarks).
    pub use_projection: Option<bool>,
    /// Record every `sample_every`-th step in the trajectory.
    pub sample_every: usize,
    /// Safety cap on the number of steps of one `integrate` call.
    pub max_steps: u64,
    /// Number of Gauss points per step; defaults to `m + n + 1`, which
    /// integrates the polynomial part of the action exactly.
    pub gauss_points: Option<usize>,
}

impl RunSettings {
    pub fn new(variant: VariantName, m: usize, n: usize, step: f64) -> Self {
        RunSettings {
            variant,
            m,
            n,
            step,
            sigma: SigmaSettings::default(),
            solver_epsilon: 1e-12,
            solver_k_max: 50,
            use_projection: None,
            sample_every: 10,
            max_steps: 200_000_000,
            gauss_points: None,
        }
    }

    pub fn gauss_count(&self) -> usize {
        self.gauss_points.unwrap_or(self.m + self.n + 1)
    }

    pub fn uses_projection(&self) -> bool {
        self.use_projection.unwrap_or(self.variant.uses_projection())
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::InvalidArgument("step must be positive"));
        }
        if self.m < 1 {
            return Err(Error::InvalidArgument("m must be at least 1"));
        }
        if self.variant.p_node_kind() == NodeKind::Equidistant && self.n < 1 {
            return Err(Error::InvalidArgument(
                "equidistant momentum nodes need n >= 1",
            ));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidArgument("sample_every must be positive"));
        }
        Ok(())
    }
}

/// Per-step diagnostics returned by [`Integrator::step`].
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub dt_physical: f64,
    pub iterations: usize,
    pub relative_error: f64,
    pub residual_norm: f64,
    pub evaluations: u64,
    /// Control-function value at the end state (one in fixed mode).
    pub sigma_end: f64,
    pub energy: f64,
    /// Distance between the momentum interpolant evaluated at the interval
    /// end and the generating-function outgoing momentum. The latter is the
    /// step output; this gap is closure-error bookkeeping.
    pub momentum_gap: f64,
}

/// One recorded trajectory point.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub h: f64,
    pub sigma: f64,
    pub solver_iterations: usize,
}

/// Run-level metadata accumulated over every step (not only the sampled
/// ones).
#[derive(Debug, Clone)]
pub struct TrajectoryMeta {
    pub variant: VariantName,
    pub problem: String,
    pub h0: f64,
    pub steps: u64,
    pub residual_evaluations: u64,
    pub solver_iterations: u64,
    pub max_abs_energy_error: f64,
    pub max_rel_energy_error: f64,
    /// Smallest separation reported by the model over all step endpoints,
    /// with the time it occurred.
    pub min_separation: Option<(f64, f64)>,
    /// How far the final state ran past the requested duration (transformed
    /// mode only; fixed mode lands exactly).
    pub overshoot: f64,
    /// Largest end-momentum closure gap seen over the run (see
    /// [`StepReport::momentum_gap`]).
    pub max_momentum_gap: f64,
    /// Multiplier that was applied to the raw energy control (one unless
    /// normalization was requested).
    pub sigma_scale: f64,
    /// Wall-clock seconds, filled in by callers that time the run.
    pub wall_time: Option<f64>,
}

/// A recorded run: samples plus metadata.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn dof(&self) -> usize {
        self.samples.first().map_or(0, |s| s.q.len())
    }

    pub fn final_state(&self) -> Option<PhaseState> {
        self.samples
            .last()
            .map(|s| PhaseState {
                q: s.q.clone(),
                p: s.p.clone(),
                t: s.t,
            })
    }
}

struct Workspace {
    mapped: MappedBasis,
    scratch: StepScratch,
    unknowns: Vec<f64>,
    q_out: Vec<f64>,
    p_out: Vec<f64>,
    sigma_scratch: SigmaScratch,
}

/// One trajectory's integration state: the current phase-space point, the
/// warm-start bundle (previous solution shape and inverse Jacobian), and the
/// reusable workspaces. Strictly sequential; independent trajectories use
/// independent integrators.
pub struct Integrator<'m, M: HamiltonianModel> {
    model: &'m M,
    settings: RunSettings,
    reference: ReferenceBasis,
    sigma: Option<SigmaConfig>,
    h0: f64,
    state: PhaseState,
    /// Transformed-time clock (equals physical time in fixed mode).
    tau: f64,
    j_inv: Option<Mat>,
    workspace: Workspace,
    steps: u64,
    residual_evaluations: u64,
    solver_iterations: u64,
    max_abs_energy_error: f64,
    min_separation: Option<(f64, f64)>,
}

impl<'m, M: HamiltonianModel> Integrator<'m, M> {
    pub fn new(model: &'m M, initial: PhaseState, settings: RunSettings) -> Result<Self> {
        settings.validate()?;
        if initial.dof() != model.dof() {
            return Err(Error::InvalidArgument(
                "initial state dimension does not match the model",
            ));
        }
        let d = model.dof();
        let g = settings.gauss_count();
        let reference = ReferenceBasis::new(
            settings.m,
            settings.n,
            g,
            settings.variant.q_node_kind(),
            settings.variant.p_node_kind(),
        )?;
        let h0 = model.hamiltonian(&initial.q, &initial.p)?;

        let sigma = if settings.variant.uses_time_transform() {
            let mut cfg = SigmaConfig::new(
                settings.sigma.kind,
                settings.sigma.lower,
                settings.sigma.upper,
                h0,
            )?;
            if settings.sigma.normalize && matches!(settings.sigma.kind, SigmaKind::Energy) {
                let mut scratch = SigmaScratch::new(d);
                let raw0 = cfg.raw(model, &initial.q, &mut scratch)?;
                cfg.scale = 1.0 / raw0;
            }
            Some(cfg)
        } else {
            None
        };

        let workspace = Workspace {
            mapped: MappedBasis::empty(),
            scratch: StepScratch::new(d, g),
            unknowns: vec![0.0; unknown_count(d, settings.m, settings.n)],
            q_out: vec![0.0; d],
            p_out: vec![0.0; d],
            sigma_scratch: SigmaScratch::new(d),
        };

        let min_separation = model
            .closest_separation(&initial.q)
            .map(|dist| (dist, initial.t));

        Ok(Integrator {
            model,
            settings,
            reference,
            sigma,
            h0,
            state: initial,
            tau: 0.0,
            j_inv: None,
            workspace,
            steps: 0,
            residual_evaluations: 0,
            solver_iterations: 0,
            max_abs_energy_error: 0.0,
            min_separation,
        })
    }

    pub fn state(&self) -> &PhaseState {
        &self.state
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn sigma_scale(&self) -> f64 {
        self.sigma.as_ref().map_or(1.0, |c| c.scale)
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Advance by one step of the configured length.
    pub fn step(&mut self) -> Result<StepReport> {
        self.step_with_length(self.settings.step)
    }

    /// Advance by one step of the given interval length (physical time in
    /// fixed mode, transformed time otherwise).
    pub fn step_with_length(&mut self, length: f64) -> Result<StepReport> {
        let step_index = self.steps;
        let time = self.state.t;
        self.try_step(length).map_err(|e| Error::StepFailed {
            step_index,
            time,
            source: alloc::boxed::Box::new(e),
        })
    }

    fn try_step(&mut self, length: f64) -> Result<StepReport> {
        if !(length > 0.0) {
            return Err(Error::InvalidArgument("step length must be positive"));
        }
        let d = self.model.dof();
        let m = self.settings.m;
        let t_start = if self.sigma.is_some() { self.tau } else { self.state.t };

        let ws = &mut self.workspace;
        if self.settings.uses_projection() {
            self.reference
                .map_to_interval_into(t_start, t_start + length, &mut ws.mapped)?;
        } else {
            // Deliberate per-step rebuild: re-solve the reference
            // Vandermonde system, then map. Mathematically identical to the
            // projection path.
            let fresh = ReferenceBasis::new(
                self.settings.m,
                self.settings.n,
                self.settings.gauss_count(),
                self.settings.variant.q_node_kind(),
                self.settings.variant.p_node_kind(),
            )?;
            fresh.map_to_interval_into(t_start, t_start + length, &mut ws.mapped)?;
        }

        let ctx = StepContext {
            basis: &ws.mapped,
            model: self.model,
            sigma: self.sigma.as_ref(),
            q_in: &self.state.q,
            p_in: &self.state.p,
        };
        initial_guess(&ctx, &mut ws.unknowns, &mut ws.scratch)?;

        let solver_cfg = SolverConfig {
            method: self.settings.variant.solver_method(),
            epsilon: self.settings.solver_epsilon,
            k_max: self.settings.solver_k_max,
            ..SolverConfig::default()
        };
        let warm = if solver_cfg.method == SolverMethod::Broyden {
            self.j_inv.take()
        } else {
            None
        };
        let scratch = &mut ws.scratch;
        let solved = {
            let mut f = |x: &[f64], out: &mut [f64]| residual(&ctx, x, out, scratch);
            solve(&mut f, &ws.unknowns, warm, &solver_cfg)?
        };

        outgoing_momentum(&ctx, &solved.x, &mut ws.p_out, &mut ws.scratch)?;
        let dt = physical_time_increment(&ctx, &solved.x, &mut ws.scratch)?;
        ws.q_out.copy_from_slice(&solved.x[(m - 1) * d..m * d]);

        // Diagnostic: how far the momentum interpolant's end value sits
        // from the generating-function output.
        let mut momentum_gap = 0.0f64;
        {
            let p_end = self.reference.p_values_at_end();
            let p_off = m * d;
            for a in 0..d {
                let mut interp = 0.0;
                for (k, &w) in p_end.iter().enumerate() {
                    interp += w * solved.x[p_off + k * d + a];
                }
                momentum_gap = momentum_gap.max((interp - ws.p_out[a]).abs());
            }
        }

        self.state.q.copy_from_slice(&ws.q_out);
        self.state.p.copy_from_slice(&ws.p_out);
        self.state.t += dt;
        self.tau = t_start + length;
        self.j_inv = Some(solved.j_inv);
        self.steps += 1;
        self.residual_evaluations += solved.evaluations;
        self.solver_iterations += solved.iterations as u64;

        let energy = self.model.hamiltonian(&self.state.q, &self.state.p)?;
        let abs_err = (energy - self.h0).abs();
        if abs_err > self.max_abs_energy_error {
            self.max_abs_energy_error = abs_err;
        }
        if let Some(dist) = self.model.closest_separation(&self.state.q) {
            if self.min_separation.map_or(true, |(best, _)| dist < best) {
                self.min_separation = Some((dist, self.state.t));
            }
        }

        let sigma_end = match &self.sigma {
            None => 1.0,
            Some(cfg) => cfg.effective(self.model, &self.state.q, &mut ws.sigma_scratch)?,
        };

        Ok(StepReport {
            dt_physical: dt,
            iterations: solved.iterations,
            relative_error: solved.relative_error,
            residual_norm: solved.residual_norm,
            evaluations: solved.evaluations,
            sigma_end,
            energy,
            momentum_gap,
        })
    }

}

/// Run a full trajectory: repeat steps until the physical time reaches
/// `duration`. Fixed-step variants shorten the final step to land exactly on
/// `duration`; transformed variants overshoot by less than one step and the
/// overshoot is recorded in the metadata.
pub fn integrate<M: HamiltonianModel>(
    model: &M,
    initial: PhaseState,
    settings: RunSettings,
    duration: f64,
) -> Result<Trajectory> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument("duration must be positive"));
    }
    let sample_every = settings.sample_every;
    let max_steps = settings.max_steps;
    let fixed_step = settings.step;
    let transformed = settings.variant.uses_time_transform();
    let t_end = initial.t + duration;

    let mut integrator = Integrator::new(model, initial, settings)?;
    let h0 = integrator.h0();

    let mut samples = Vec::new();
    let mut scratch = SigmaScratch::new(model.dof());
    let sigma0 = match &integrator.sigma {
        None => 1.0,
        Some(cfg) => cfg.effective(model, &integrator.state.q, &mut scratch)?,
    };
    samples.push(Sample {
        t: integrator.state.t,
        q: integrator.state.q.clone(),
        p: integrator.state.p.clone(),
        h: h0,
        sigma: sigma0,
        solver_iterations: 0,
    });

    let mut max_rel = 0.0f64;
    let mut max_gap = 0.0f64;
    while integrator.state.t < t_end {
        if integrator.steps >= max_steps {
            return Err(Error::StepFailed {
                step_index: integrator.steps,
                time: integrator.state.t,
                source: alloc::boxed::Box::new(Error::InvalidArgument(
                    "step cap reached before the requested duration",
                )),
            });
        }
        let report = if transformed {
            integrator.step()?
        } else {
            let remaining = t_end - integrator.state.t;
            if remaining < fixed_step * 1e-12 {
                break;
            }
            integrator.step_with_length(fixed_step.min(remaining))?
        };
        let rel = if h0 != 0.0 {
            (report.energy - h0).abs() / h0.abs()
        } else {
            (report.energy - h0).abs()
        };
        if rel > max_rel {
            max_rel = rel;
        }
        if report.momentum_gap > max_gap {
            max_gap = report.momentum_gap;
        }
        let at_end = integrator.state.t >= t_end;
        if integrator.steps % sample_every as u64 == 0 || at_end {
            samples.push(Sample {
                t: integrator.state.t,
                q: integrator.state.q.clone(),
                p: integrator.state.p.clone(),
                h: report.energy,
                sigma: report.sigma_end,
                solver_iterations: report.iterations,
            });
        }
    }

    let overshoot = (integrator.state.t - t_end).max(0.0);
    let meta = TrajectoryMeta {
        variant: integrator.settings.variant,
        problem: String::new(),
        h0,
        steps: integrator.steps,
        residual_evaluations: integrator.residual_evaluations,
        solver_iterations: integrator.solver_iterations,
        max_abs_energy_error: integrator.max_abs_energy_error,
        max_rel_energy_error: max_rel,
        min_separation: integrator.min_separation,
        overshoot,
        max_momentum_gap: max_gap,
        sigma_scale: integrator.sigma_scale(),
        wall_time: None,
    };
    Ok(Trajectory { samples, meta })
}
