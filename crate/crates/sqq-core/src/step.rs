//! One integration step as a discrete variational problem.
//!
//! The coordinates are interpolated through `m + 1` nodes (the first pinned
//! to the incoming coordinate), the momenta through `n + 1` free nodes, and
//! the action of the step is the Gauss quadrature of `p^T qdot - H` over the
//! step interval. Stationarity of that action with respect to the free
//! nodes, together with the incoming-momentum relation on the first
//! coordinate node, gives `d (m + n + 1)` equations for as many unknowns;
//! the outgoing momentum is the derivative of the action with respect to the
//! final coordinate node. In transformed mode the integrand swaps `H` for
//! `K = sigma (H - H0)` and the interval variable is the transformed time.
//!
//! The unknown vector is laid out as `[q_1 .. q_m, p_0 .. p_n]` with each
//! node's `d` components contiguous. The residual is laid out as
//! `[dS/dq_0 + p_in, dS/dq_1 .. dS/dq_{m-1}, dS/dp_0 .. dS/dp_n]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::MappedBasis;
use crate::error::Result;
use crate::linalg::Mat;
use crate::model::HamiltonianModel;
use crate::sigma::{SigmaConfig, SigmaScratch};

/// Everything that defines one step's nonlinear system. In fixed mode
/// (`sigma = None`) the integrand is the Hamiltonian itself and the basis
/// interval is physical time; with a control function the integrand is the
/// transformed Hamiltonian and the interval is transformed time.
pub struct StepContext<'a, M: HamiltonianModel> {
    pub basis: &'a MappedBasis,
    pub model: &'a M,
    pub sigma: Option<&'a SigmaConfig>,
    pub q_in: &'a [f64],
    pub p_in: &'a [f64],
}

impl<'a, M: HamiltonianModel> StepContext<'a, M> {
    pub fn dof(&self) -> usize {
        self.q_in.len()
    }

    pub fn degree_q(&self) -> usize {
        self.basis.degree_q()
    }

    pub fn degree_p(&self) -> usize {
        self.basis.degree_p()
    }

    pub fn unknown_count(&self) -> usize {
        unknown_count(self.dof(), self.degree_q(), self.degree_p())
    }
}

/// Length of the flattened unknown (and residual) vector.
pub fn unknown_count(dof: usize, m: usize, n: usize) -> usize {
    dof * (m + n + 1)
}

/// Reusable buffers for step assembly.
#[derive(Debug, Clone)]
pub struct StepScratch {
    /// Interpolated coordinates at the Gauss points, `g x d`.
    q_gauss: Mat,
    /// Interpolated momenta at the Gauss points, `g x d`.
    p_gauss: Mat,
    /// Interpolated coordinate derivatives at the Gauss points, `g x d`.
    qdot_gauss: Mat,
    dhq: Vec<f64>,
    dhp: Vec<f64>,
    sigma: SigmaScratch,
}

impl StepScratch {
    pub fn new(dof: usize, gauss: usize) -> Self {
        StepScratch {
            q_gauss: Mat::zeros(gauss, dof),
            p_gauss: Mat::zeros(gauss, dof),
            qdot_gauss: Mat::zeros(gauss, dof),
            dhq: vec![0.0; dof],
            dhp: vec![0.0; dof],
            sigma: SigmaScratch::new(dof),
        }
    }

    fn ensure(&mut self, dof: usize, gauss: usize) {
        if self.q_gauss.rows() != gauss || self.q_gauss.cols() != dof {
            *self = StepScratch::new(dof, gauss);
        }
    }
}

/// Evaluate the interpolants at every Gauss point.
fn interpolate<M: HamiltonianModel>(ctx: &StepContext<'_, M>, x: &[f64], s: &mut StepScratch) {
    let d = ctx.dof();
    let m = ctx.degree_q();
    let n = ctx.degree_p();
    let g = ctx.basis.gauss_count();
    s.ensure(d, g);
    debug_assert_eq!(x.len(), ctx.unknown_count());

    s.q_gauss.fill(0.0);
    s.p_gauss.fill(0.0);
    s.qdot_gauss.fill(0.0);

    for k in 0..=m {
        let node: &[f64] = if k == 0 {
            ctx.q_in
        } else {
            &x[(k - 1) * d..k * d]
        };
        let vals = ctx.basis.q_values.row(k);
        let ders = ctx.basis.q_derivs.row(k);
        for j in 0..g {
            let v = vals[j];
            let w = ders[j];
            let qrow = s.q_gauss.row_mut(j);
            for a in 0..d {
                qrow[a] += v * node[a];
            }
            let drow = s.qdot_gauss.row_mut(j);
            for a in 0..d {
                drow[a] += w * node[a];
            }
        }
    }

    let p_off = m * d;
    for k in 0..=n {
        let node = &x[p_off + k * d..p_off + (k + 1) * d];
        let vals = ctx.basis.p_values.row(k);
        for j in 0..g {
            let v = vals[j];
            let prow = s.p_gauss.row_mut(j);
            for a in 0..d {
                prow[a] += v * node[a];
            }
        }
    }
}

/// Integrand derivatives at one Gauss point, into `s.dhq` / `s.dhp`.
fn integrand_grads<M: HamiltonianModel>(
    ctx: &StepContext<'_, M>,
    j: usize,
    s: &mut StepScratch,
) -> Result<()> {
    let q = s.q_gauss.row(j);
    let p = s.p_gauss.row(j);
    match ctx.sigma {
        None => {
            ctx.model.grad_potential(q, &mut s.dhq)?;
            ctx.model.dh_dp(p, &mut s.dhp);
        }
        Some(cfg) => {
            cfg.grad_transformed(ctx.model, q, p, &mut s.dhq, &mut s.dhp, &mut s.sigma)?;
        }
    }
    Ok(())
}

/// The discrete action of the step at the given unknowns.
pub fn discrete_action<M: HamiltonianModel>(
    ctx: &StepContext<'_, M>,
    x: &[f64],
    s: &mut StepScratch,
) -> Result<f64> {
    interpolate(ctx, x, s);
    let g = ctx.basis.gauss_count();
    let d = ctx.dof();
    let mut action = 0.0;
    for j in 0..g {
        let q = s.q_gauss.row(j);
        let p = s.p_gauss.row(j);
        let qdot = s.qdot_gauss.row(j);
        let mut pq = 0.0;
        for a in 0..d {
            pq += p[a] * qdot[a];
        }
        let h = match ctx.sigma {
            None => ctx.model.hamiltonian(q, p)?,
            Some(cfg) => cfg.transformed_hamiltonian(ctx.model, q, p, &mut s.sigma)?,
        };
        action += ctx.basis.gauss_weights[j] * (pq - h);
    }
    Ok(action)
}

/// The stationarity residual. Analytic gradient of the discrete action with
/// the incoming-momentum offset on the first block.
pub fn residual<M: HamiltonianModel>(
    ctx: &StepContext<'_, M>,
    x: &[f64],
    out: &mut [f64],
    s: &mut StepScratch,
) -> Result<()> {
    interpolate(ctx, x, s);
    let d = ctx.dof();
    let m = ctx.degree_q();
    let n = ctx.degree_p();
    let g = ctx.basis.gauss_count();
    debug_assert_eq!(out.len(), ctx.unknown_count());

    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..g {
        integrand_grads(ctx, j, s)?;
        let w = ctx.basis.gauss_weights[j];
        let p = s.p_gauss.row(j);
        let qdot = s.qdot_gauss.row(j);

        // dS/dq_i for i = 0 .. m-1 (block m is the outgoing momentum, not
        // part of the system).
        for i in 0..m {
            let mv = ctx.basis.q_values.at(i, j);
            let md = ctx.basis.q_derivs.at(i, j);
            let row = &mut out[i * d..(i + 1) * d];
            for a in 0..d {
                row[a] += w * (md * p[a] - mv * s.dhq[a]);
            }
        }
        // dS/dp_i for i = 0 .. n.
        for i in 0..=n {
            let nv = ctx.basis.p_values.at(i, j);
            let off = (m + i) * d;
            let row = &mut out[off..off + d];
            for a in 0..d {
                row[a] += w * nv * (qdot[a] - s.dhp[a]);
            }
        }
    }
    // The first coordinate relation reads dS/dq_0 + p_in = 0.
    for a in 0..d {
        out[a] += ctx.p_in[a];
    }
    Ok(())
}

/// `dS/dq_m`, the outgoing momentum of the step. Evaluated at the solved
/// unknowns this, not the last momentum node, is the step's output momentum.
pub fn outgoing_momentum<M: HamiltonianModel>(
    ctx: &StepContext<'_, M>,
    x: &[f64],
    out: &mut [f64],
    s: &mut StepScratch,
) -> Result<()> {
    interpolate(ctx, x, s);
    let d = ctx.dof();
    let m = ctx.degree_q();
    let g = ctx.basis.gauss_count();

    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..g {
        integrand_grads(ctx, j, s)?;
        let w = ctx.basis.gauss_weights[j];
        let p = s.p_gauss.row(j);
        let mv = ctx.basis.q_values.at(m, j);
        let md = ctx.basis.q_derivs.at(m, j);
        for a in 0..d {
            out[a] += w * (md * p[a] - mv * s.dhq[a]);
        }
    }
    Ok(())
}

/// Physical-time length of the step: the interval length in fixed mode, the
/// quadrature of the control function over the interval in transformed mode.
pub fn physical_time_increment<M: HamiltonianModel>(
    ctx: &StepContext<'_, M>,
    x: &[f64],
    s: &mut StepScratch,
) -> Result<f64> {
    match ctx.sigma {
        None => Ok(ctx.basis.length()),
        Some(cfg) => {
            interpolate(ctx, x, s);
            let g = ctx.basis.gauss_count();
            let mut dt = 0.0;
            for j in 0..g {
                dt += ctx.basis.gauss_weights[j]
                    * cfg.effective(ctx.model, s.q_gauss.row(j), &mut s.sigma)?;
            }
            Ok(dt)
        }
    }
}

/// Initial guess for the unknowns: every momentum node at the incoming
/// momentum, every coordinate node drifting from the incoming coordinate at
/// the incoming velocity (scaled by the control function at the incoming
/// state in transformed mode).
pub fn initial_guess<M: HamiltonianModel>(
    ctx: &StepContext<'_, M>,
    out: &mut [f64],
    s: &mut StepScratch,
) -> Result<()> {
    let d = ctx.dof();
    let m = ctx.degree_q();
    let n = ctx.degree_p();
    debug_assert_eq!(out.len(), ctx.unknown_count());

    let rate = match ctx.sigma {
        None => 1.0,
        Some(cfg) => cfg.effective(ctx.model, ctx.q_in, &mut s.sigma)?,
    };
    for k in 1..=m {
        let offset = (ctx.basis.q_node_times[k] - ctx.basis.t_start) * rate;
        let row = &mut out[(k - 1) * d..k * d];
        for a in 0..d {
            row[a] = ctx.q_in[a] + offset * ctx.model.inv_mass()[a] * ctx.p_in[a];
        }
    }
    let p_off = m * d;
    for k in 0..=n {
        out[p_off + k * d..p_off + (k + 1) * d].copy_from_slice(ctx.p_in);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{NodeKind, ReferenceBasis};
    use crate::error::Error;
    use crate::linalg::{inf_norm, two_norm};
    use crate::model::{kepler_model, NBodySystem, PhaseState};
    use crate::sigma::SigmaKind;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `H = 1/2 |p|^2`, no potential.
    struct FreeParticle {
        inv_mass: [f64; 1],
    }

    impl FreeParticle {
        fn new() -> Self {
            FreeParticle { inv_mass: [1.0] }
        }
    }

    impl HamiltonianModel for FreeParticle {
        fn dof(&self) -> usize {
            1
        }
        fn inv_mass(&self) -> &[f64] {
            &self.inv_mass
        }
        fn potential(&self, _q: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
        fn grad_potential(&self, _q: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = 0.0;
            Ok(())
        }
        fn hess_potential(&self, _q: &[f64], out: &mut Mat) -> Result<()> {
            out.reset(1, 1);
            Ok(())
        }
    }

    /// `H = 1/2 (p^2 + q^2)`.
    struct Oscillator {
        inv_mass: [f64; 1],
    }

    impl Oscillator {
        fn new() -> Self {
            Oscillator { inv_mass: [1.0] }
        }
    }

    impl HamiltonianModel for Oscillator {
        fn dof(&self) -> usize {
            1
        }
        fn inv_mass(&self) -> &[f64] {
            &self.inv_mass
        }
        fn potential(&self, q: &[f64]) -> Result<f64> {
            Ok(0.5 * q[0] * q[0])
        }
        fn grad_potential(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = q[0];
            Ok(())
        }
        fn hess_potential(&self, _q: &[f64], out: &mut Mat) -> Result<()> {
            out.reset(1, 1);
            out.set(0, 0, 1.0);
            Ok(())
        }
    }

    fn chebyshev_basis(m: usize, n: usize) -> ReferenceBasis {
        ReferenceBasis::new(
            m,
            n,
            m + n + 1,
            NodeKind::ChebyshevLobatto,
            NodeKind::ChebyshevGauss,
        )
        .unwrap()
    }

    #[test]
    fn unknown_and_residual_lengths() {
        assert_eq!(unknown_count(2, 3, 3), 14);
        assert_eq!(unknown_count(6, 3, 3), 42);
        assert_eq!(unknown_count(18, 5, 5), 198);
    }

    #[test]
    fn free_particle_action_closed_form() {
        // Linear coordinate from 0 to v T, constant momentum v:
        // S = integral of (p qdot - p^2/2) = T v^2 / 2.
        let model = FreeParticle::new();
        let big_t = 1.7;
        let v = 0.8;
        for (m, n) in [(1, 0), (3, 2), (5, 5)] {
            let reference = chebyshev_basis(m, n);
            let basis = reference.map_to_interval(0.0, big_t).unwrap();
            let ctx = StepContext {
                basis: &basis,
                model: &model,
                sigma: None,
                q_in: &[0.0],
                p_in: &[v],
            };
            let mut x = vec![0.0; ctx.unknown_count()];
            for k in 1..=m {
                x[k - 1] = v * (basis.q_node_times[k] - basis.t_start);
            }
            for k in 0..=n {
                x[m + k] = v;
            }
            let mut s = StepScratch::new(1, basis.gauss_count());
            let action = discrete_action(&ctx, &x, &mut s).unwrap();
            assert_abs_diff_eq!(action, big_t * v * v / 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn constant_coordinates_zero_momenta_action_is_minus_length_times_potential() {
        let (model, _) = kepler_model(0.5).unwrap();
        let reference = chebyshev_basis(3, 3);
        let basis = reference.map_to_interval(2.0, 3.25).unwrap();
        let q = [0.5, 0.0]; // U = -2
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: None,
            q_in: &q,
            p_in: &[0.0, 0.0],
        };
        let mut x = vec![0.0; ctx.unknown_count()];
        for k in 1..=3 {
            x[(k - 1) * 2] = q[0];
            x[(k - 1) * 2 + 1] = q[1];
        }
        let mut s = StepScratch::new(2, basis.gauss_count());
        let action = discrete_action(&ctx, &x, &mut s).unwrap();
        assert_abs_diff_eq!(action, 2.0 * basis.length(), epsilon = 1e-12);
    }

    #[test]
    fn transformed_action_reduces_to_kinetic_term_on_the_energy_shell() {
        // Free particle with constant momentum: H = H0 everywhere along the
        // curve, so K vanishes and only the p qdot term survives.
        let model = FreeParticle::new();
        let v = 1.3;
        let h0 = 0.5 * v * v;
        let cfg = SigmaConfig::new(SigmaKind::Energy, 1e-6, 1e2, h0).unwrap();
        let reference = chebyshev_basis(3, 2);
        let basis = reference.map_to_interval(0.0, 2.0).unwrap();
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: Some(&cfg),
            q_in: &[0.0],
            p_in: &[v],
        };
        let mut x = vec![0.0; ctx.unknown_count()];
        for k in 1..=3 {
            x[k - 1] = v * (basis.q_node_times[k] - basis.t_start);
        }
        for k in 0..=2 {
            x[3 + k] = v;
        }
        let mut s = StepScratch::new(1, basis.gauss_count());
        let action = discrete_action(&ctx, &x, &mut s).unwrap();
        // Kinetic term: integral of p qdot = v^2 over the tau interval.
        assert_abs_diff_eq!(action, 2.0 * v * v, epsilon = 1e-12);
    }

    /// Verify every derivative direction of the discrete action against the
    /// assembled residual and the outgoing momentum:
    /// residual block 0 is d/d(q_in) S + p_in, residual blocks 1..m-1 are
    /// d/d(q_i) S (unknown blocks shifted by one), the momentum blocks align
    /// with the unknowns, and d/d(q_m) S is the outgoing momentum.
    fn residual_matches_action_gradient<M: HamiltonianModel>(
        model: &M,
        basis: &MappedBasis,
        sigma: Option<&SigmaConfig>,
        q_in: &[f64],
        p_in: &[f64],
        x: &[f64],
        tol: f64,
    ) {
        let d = q_in.len();
        let m = basis.degree_q();
        let n = basis.degree_p();
        let h = 1e-7;
        let mut s = StepScratch::new(d, basis.gauss_count());

        let ctx = StepContext {
            basis,
            model,
            sigma,
            q_in,
            p_in,
        };
        let mut res = vec![0.0; x.len()];
        residual(&ctx, x, &mut res, &mut s).unwrap();

        // Derivative with respect to the incoming coordinate (block 0).
        for a in 0..d {
            let mut qp = q_in.to_vec();
            let mut qm = q_in.to_vec();
            qp[a] += h;
            qm[a] -= h;
            let ctx_p = StepContext {
                basis,
                model,
                sigma,
                q_in: &qp,
                p_in,
            };
            let ctx_m = StepContext {
                basis,
                model,
                sigma,
                q_in: &qm,
                p_in,
            };
            let fp = discrete_action(&ctx_p, x, &mut s).unwrap();
            let fm = discrete_action(&ctx_m, x, &mut s).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert_abs_diff_eq!(res[a], fd + p_in[a], epsilon = tol);
        }

        // Derivatives with respect to the unknowns.
        let mut xp = x.to_vec();
        let mut fd_unknown = |idx: usize, s: &mut StepScratch| -> f64 {
            let orig = xp[idx];
            xp[idx] = orig + h;
            let fp = discrete_action(&ctx, &xp, s).unwrap();
            xp[idx] = orig - h;
            let fm = discrete_action(&ctx, &xp, s).unwrap();
            xp[idx] = orig;
            (fp - fm) / (2.0 * h)
        };

        // Interior coordinate nodes: residual block i <-> unknown block i-1.
        for i in 1..m {
            for a in 0..d {
                let fd = fd_unknown((i - 1) * d + a, &mut s);
                assert_abs_diff_eq!(res[i * d + a], fd, epsilon = tol);
            }
        }
        // Momentum nodes: blocks align.
        for i in 0..=n {
            for a in 0..d {
                let fd = fd_unknown((m + i) * d + a, &mut s);
                assert_abs_diff_eq!(res[(m + i) * d + a], fd, epsilon = tol);
            }
        }
        // The final coordinate node has no residual row; its derivative is
        // the outgoing momentum.
        let mut p_out = vec![0.0; d];
        outgoing_momentum(&ctx, x, &mut p_out, &mut s).unwrap();
        for a in 0..d {
            let fd = fd_unknown((m - 1) * d + a, &mut s);
            assert_abs_diff_eq!(p_out[a], fd, epsilon = tol);
        }
    }

    #[test]
    fn residual_is_the_action_gradient_fixed_mode() {
        let (model, state) = kepler_model(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let reference = chebyshev_basis(4, 3);
        for _ in 0..10 {
            let t0 = rng.gen_range(0.0..5.0);
            let basis = reference.map_to_interval(t0, t0 + 0.3).unwrap();
            let ctx = StepContext {
                basis: &basis,
                model: &model,
                sigma: None,
                q_in: &state.q,
                p_in: &state.p,
            };
            let mut x = vec![0.0; ctx.unknown_count()];
            let mut s = StepScratch::new(2, basis.gauss_count());
            initial_guess(&ctx, &mut x, &mut s).unwrap();
            drop(ctx);
            for v in x.iter_mut() {
                *v += rng.gen_range(-0.05..0.05);
            }
            residual_matches_action_gradient(&model, &basis, None, &state.q, &state.p, &x, 1e-5);
        }
    }

    #[test]
    fn residual_is_the_action_gradient_transformed_mode() {
        let (model, state) = kepler_model(0.5).unwrap();
        let cfg = SigmaConfig::new(SigmaKind::Energy, 1e-6, 1e2, -0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let reference = chebyshev_basis(3, 3);
        for _ in 0..10 {
            let basis = reference.map_to_interval(0.0, 0.05).unwrap();
            let ctx = StepContext {
                basis: &basis,
                model: &model,
                sigma: Some(&cfg),
                q_in: &state.q,
                p_in: &state.p,
            };
            let mut x = vec![0.0; ctx.unknown_count()];
            let mut s = StepScratch::new(2, basis.gauss_count());
            initial_guess(&ctx, &mut x, &mut s).unwrap();
            drop(ctx);
            for v in x.iter_mut() {
                *v += rng.gen_range(-0.02..0.02);
            }
            residual_matches_action_gradient(
                &model,
                &basis,
                Some(&cfg),
                &state.q,
                &state.p,
                &x,
                1e-5,
            );
        }
    }

    #[test]
    fn residual_is_the_action_gradient_three_body() {
        let sys = NBodySystem::new(vec![0.9, 0.85, 1.0], 2, 1.0, 0.0).unwrap();
        let state = PhaseState::new(
            vec![-0.2227, 0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.9 * 1.7813, 0.0, 0.85 * 0.4150, 0.0, -1.9559],
            0.0,
        )
        .unwrap();
        let h0 = sys.hamiltonian(&state.q, &state.p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let reference = chebyshev_basis(3, 3);
        let basis = reference.map_to_interval(0.0, 0.02).unwrap();

        for cfg in [
            None,
            Some(SigmaConfig::new(SigmaKind::Energy, 1e-6, 1e2, h0).unwrap()),
        ] {
            let ctx = StepContext {
                basis: &basis,
                model: &sys,
                sigma: cfg.as_ref(),
                q_in: &state.q,
                p_in: &state.p,
            };
            let mut x = vec![0.0; ctx.unknown_count()];
            let mut s = StepScratch::new(6, basis.gauss_count());
            initial_guess(&ctx, &mut x, &mut s).unwrap();
            drop(ctx);
            for v in x.iter_mut() {
                *v += rng.gen_range(-0.01..0.01);
            }
            residual_matches_action_gradient(
                &sys,
                &basis,
                cfg.as_ref(),
                &state.q,
                &state.p,
                &x,
                1e-5,
            );
        }
    }

    #[test]
    fn oscillator_exact_solution_has_tiny_residual() {
        // q(t) = cos t, p(t) = -sin t solves H = (p^2 + q^2) / 2. Sampling
        // it at the interpolation nodes of a degree-9 basis must leave a
        // residual at interpolation-error level.
        let model = Oscillator::new();
        let m = 9;
        let n = 9;
        let reference = chebyshev_basis(m, n);
        let t_a = 0.3;
        let t_b = t_a + 0.5;
        let basis = reference.map_to_interval(t_a, t_b).unwrap();

        let q_in = [t_a.cos()];
        let p_in = [-t_a.sin()];
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: None,
            q_in: &q_in,
            p_in: &p_in,
        };
        let mut x = vec![0.0; ctx.unknown_count()];
        for k in 1..=m {
            x[k - 1] = basis.q_node_times[k].cos();
        }
        let half = 0.5 * basis.length();
        for k in 0..=n {
            let t = t_a + (reference.p_nodes()[k] + 1.0) * half;
            x[m + k] = -t.sin();
        }
        let mut s = StepScratch::new(1, basis.gauss_count());
        let mut res = vec![0.0; x.len()];
        residual(&ctx, &x, &mut res, &mut s).unwrap();
        assert!(
            two_norm(&res) <= 1e-9,
            "residual norm {} too large",
            two_norm(&res)
        );

        // The generating-function relation recovers p(t_b) at the same
        // accuracy level.
        let mut p_out = [0.0];
        outgoing_momentum(&ctx, &x, &mut p_out, &mut s).unwrap();
        assert_abs_diff_eq!(p_out[0], -t_b.sin(), epsilon = 1e-9);
    }

    #[test]
    fn free_particle_outgoing_momentum_is_conserved() {
        let model = FreeParticle::new();
        let reference = chebyshev_basis(4, 4);
        let basis = reference.map_to_interval(0.0, 1.0).unwrap();
        let v = 0.37;
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: None,
            q_in: &[0.2],
            p_in: &[v],
        };
        let mut x = vec![0.0; ctx.unknown_count()];
        for k in 1..=4 {
            x[k - 1] = 0.2 + v * (basis.q_node_times[k] - basis.t_start);
        }
        for k in 0..=4 {
            x[4 + k] = v;
        }
        let mut s = StepScratch::new(1, basis.gauss_count());
        let mut p_out = [0.0];
        outgoing_momentum(&ctx, &x, &mut p_out, &mut s).unwrap();
        assert_abs_diff_eq!(p_out[0], v, epsilon = 1e-13);
    }

    #[test]
    fn time_increment_fixed_and_unit_modes() {
        let (model, state) = kepler_model(0.5).unwrap();
        let reference = chebyshev_basis(3, 3);
        let basis = reference.map_to_interval(1.0, 1.4).unwrap();
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: None,
            q_in: &state.q,
            p_in: &state.p,
        };
        let mut s = StepScratch::new(2, basis.gauss_count());
        let mut x = vec![0.0; ctx.unknown_count()];
        initial_guess(&ctx, &mut x, &mut s).unwrap();
        assert_abs_diff_eq!(
            physical_time_increment(&ctx, &x, &mut s).unwrap(),
            0.4,
            epsilon = 1e-15
        );

        let cfg = SigmaConfig {
            h0: -0.5,
            ..SigmaConfig::unit()
        };
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: Some(&cfg),
            q_in: &state.q,
            p_in: &state.p,
        };
        assert_abs_diff_eq!(
            physical_time_increment(&ctx, &x, &mut s).unwrap(),
            0.4,
            epsilon = 1e-13
        );
    }

    #[test]
    fn time_increment_radial_quadratic_exact() {
        // sigma = |q|^2 along the linear path (1, 0) -> (2, 0) over a unit
        // tau interval: dt = integral of (1 + tau)^2 = 7/3.
        let (model, _) = kepler_model(0.5).unwrap();
        let cfg = SigmaConfig::new(SigmaKind::Radial { alpha: 2.0 }, 1e-6, 1e2, 0.0).unwrap();
        let reference = chebyshev_basis(1, 0);
        let basis = reference.map_to_interval(0.0, 1.0).unwrap();
        let q_in = [1.0, 0.0];
        let p_in = [1.0, 0.0];
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: Some(&cfg),
            q_in: &q_in,
            p_in: &p_in,
        };
        // One free coordinate node (the endpoint) and one momentum node.
        let x = vec![2.0, 0.0, 1.0, 0.0];
        let mut s = StepScratch::new(2, basis.gauss_count());
        assert_abs_diff_eq!(
            physical_time_increment(&ctx, &x, &mut s).unwrap(),
            7.0 / 3.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn bounded_control_bounds_the_time_increment() {
        let (model, state) = kepler_model(0.9).unwrap();
        let cfg = SigmaConfig::new(SigmaKind::Energy, 1e-6, 1e2, -0.5).unwrap();
        let reference = chebyshev_basis(3, 3);
        let dtau = 0.01;
        let basis = reference.map_to_interval(0.0, dtau).unwrap();
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: Some(&cfg),
            q_in: &state.q,
            p_in: &state.p,
        };
        let mut s = StepScratch::new(2, basis.gauss_count());
        let mut x = vec![0.0; ctx.unknown_count()];
        initial_guess(&ctx, &mut x, &mut s).unwrap();
        let dt = physical_time_increment(&ctx, &x, &mut s).unwrap();
        let a = 1e-6;
        let b = 1e2;
        assert!(dt >= dtau * a * b / (a + b) && dt < dtau * b);
    }

    #[test]
    fn singularity_propagates_through_assembly() {
        let (model, _) = kepler_model(0.5).unwrap();
        let reference = chebyshev_basis(2, 1);
        let basis = reference.map_to_interval(0.0, 0.1).unwrap();
        let q_in = [0.0, 0.0]; // at the center: singular
        let p_in = [0.0, 1.0];
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: None,
            q_in: &q_in,
            p_in: &p_in,
        };
        let x = vec![0.0; ctx.unknown_count()];
        let mut s = StepScratch::new(2, basis.gauss_count());
        let mut res = vec![0.0; x.len()];
        assert!(matches!(
            residual(&ctx, &x, &mut res, &mut s),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn initial_guess_drifts_coordinates() {
        let (model, state) = kepler_model(0.0).unwrap();
        let reference = chebyshev_basis(2, 2);
        let basis = reference.map_to_interval(0.0, 0.5).unwrap();
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma: None,
            q_in: &state.q,
            p_in: &state.p,
        };
        let mut s = StepScratch::new(2, basis.gauss_count());
        let mut x = vec![0.0; ctx.unknown_count()];
        initial_guess(&ctx, &mut x, &mut s).unwrap();
        // Final coordinate node: q + dt * v with v = (0, 1).
        assert_abs_diff_eq!(x[2], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[3], 0.5, epsilon = 1e-14);
        // Momentum nodes copy p_in.
        assert_eq!(&x[4..6], &state.p[..]);
        assert!(inf_norm(&x) < 2.0);
    }
}
