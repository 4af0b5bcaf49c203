//! Step-size control functions and the time-transformed Hamiltonian.
//!
//! A fixed step `dtau` in the transformed time becomes the physical step
//! `dt = sigma(q) * dtau`. The transformed system stays Hamiltonian with
//! `K = sigma * (H - H0)`, so the same variational step machinery applies
//! verbatim in the transformed variable.
//!
//! Three control functions are provided: the constant function (fixed-step
//! mode), a radial power law `|q|^alpha`, and the energy-based control
//! `sigma2 = W^(-1/2)` with `W = (H0 - U) + grad U^T M^-1 grad U`. The
//! energy control is passed through the bounding map
//! `x -> x / (x / b + 1)` with `x = sqrt(sigma2^2 + a^2)`, which confines it
//! to `[a b / (a + b), b)`.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::math;
use crate::model::HamiltonianModel;

/// Which control function drives the step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaKind {
    /// `sigma = 1`: the transformed time is the physical time.
    Unit,
    /// `sigma = |q|^alpha`, used as-is (no bounding).
    Radial { alpha: f64 },
    /// `sigma2 = W^(-1/2)`, bounded.
    Energy,
}

/// Control-function choice plus its parameters. `h0` is the initial energy,
/// captured once at integration start. `scale` multiplies the raw energy
/// control; the driver sets it to `sqrt(W(q0))` when a run asks for the
/// control to be normalized to one at the initial state, and leaves it at
/// one otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaConfig {
    pub kind: SigmaKind,
    /// Lower bound `a` of the bounding map.
    pub lower: f64,
    /// Upper bound `b` of the bounding map.
    pub upper: f64,
    /// Initial energy `H0`.
    pub h0: f64,
    /// Multiplier applied to the raw energy control before bounding.
    pub scale: f64,
}

pub const DEFAULT_LOWER_BOUND: f64 = 1e-6;
pub const DEFAULT_UPPER_BOUND: f64 = 1e2;

impl SigmaConfig {
    pub fn new(kind: SigmaKind, lower: f64, upper: f64, h0: f64) -> Result<Self> {
        if !(lower > 0.0 && upper > 0.0) {
            return Err(Error::InvalidArgument("sigma bounds must be positive"));
        }
        if !(lower < 1.0 && 1.0 < upper) {
            return Err(Error::InvalidArgument(
                "sigma bounds must satisfy a < 1 < b",
            ));
        }
        Ok(SigmaConfig {
            kind,
            lower,
            upper,
            h0,
            scale: 1.0,
        })
    }

    pub fn unit() -> Self {
        SigmaConfig {
            kind: SigmaKind::Unit,
            lower: DEFAULT_LOWER_BOUND,
            upper: DEFAULT_UPPER_BOUND,
            h0: 0.0,
            scale: 1.0,
        }
    }

    /// The raw control function: `1`, `|q|^alpha`, or `scale * W^(-1/2)`.
    pub fn raw<M: HamiltonianModel>(&self, model: &M, q: &[f64], scratch: &mut SigmaScratch) -> Result<f64> {
        match self.kind {
            SigmaKind::Unit => Ok(1.0),
            SigmaKind::Radial { alpha } => {
                let r2 = radius_sq(q);
                if r2 == 0.0 {
                    return Err(Error::NonpositiveRadicand { value: 0.0 });
                }
                Ok(math::powf(r2, 0.5 * alpha))
            }
            SigmaKind::Energy => {
                let w = self.energy_radicand(model, q, scratch)?;
                Ok(self.scale / math::sqrt(w))
            }
        }
    }

    /// The raw control passed through the bounding map. The unit kind stays
    /// exactly one.
    pub fn bounded<M: HamiltonianModel>(
        &self,
        model: &M,
        q: &[f64],
        scratch: &mut SigmaScratch,
    ) -> Result<f64> {
        match self.kind {
            SigmaKind::Unit => Ok(1.0),
            _ => Ok(bound_value(self.raw(model, q, scratch)?, self.lower, self.upper)),
        }
    }

    /// Floor of the energy radicand in the integrator path. At the floor
    /// the raw control sits two decades above the upper bound, so the
    /// bounded value is already pinned at `b` within one percent; clamping
    /// there extends the control continuously through `W <= 0`, which trial
    /// configurations inside a solver iteration do reach.
    fn radicand_floor(&self) -> f64 {
        let s = self.scale / (100.0 * self.upper);
        s * s
    }

    /// The control function the integrator actually uses: the unit and
    /// radial kinds as-is, the energy kind bounded, with the radicand
    /// clamped at [`Self::radicand_floor`] so off-shell trial states do not
    /// abort the solve.
    pub fn effective<M: HamiltonianModel>(
        &self,
        model: &M,
        q: &[f64],
        scratch: &mut SigmaScratch,
    ) -> Result<f64> {
        match self.kind {
            SigmaKind::Unit => Ok(1.0),
            SigmaKind::Radial { .. } => self.raw(model, q, scratch),
            SigmaKind::Energy => {
                let w = self
                    .energy_radicand_unchecked(model, q, scratch)?
                    .max(self.radicand_floor());
                Ok(bound_value(self.scale / math::sqrt(w), self.lower, self.upper))
            }
        }
    }

    /// Gradient of [`Self::effective`] with respect to `q`.
    pub fn gradient<M: HamiltonianModel>(
        &self,
        model: &M,
        q: &[f64],
        out: &mut [f64],
        scratch: &mut SigmaScratch,
    ) -> Result<()> {
        match self.kind {
            SigmaKind::Unit => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            SigmaKind::Radial { alpha } => {
                let r2 = radius_sq(q);
                if r2 == 0.0 {
                    return Err(Error::NonpositiveRadicand { value: 0.0 });
                }
                // alpha * |q|^(alpha - 2) * q
                let c = alpha * math::powf(r2, 0.5 * alpha - 1.0);
                for i in 0..q.len() {
                    out[i] = c * q[i];
                }
                Ok(())
            }
            SigmaKind::Energy => {
                let w = self.energy_radicand_unchecked(model, q, scratch)?;
                if w <= self.radicand_floor() {
                    // Clamped region: the control is pinned at the bound.
                    out.iter_mut().for_each(|v| *v = 0.0);
                    return Ok(());
                }
                let sigma2 = self.scale / math::sqrt(w);

                // grad W = -grad U + 2 hess U * (M^-1 grad U); the gradient
                // of U is still in scratch from the radicand evaluation.
                let d = q.len();
                model.hess_potential(q, &mut scratch.hess)?;
                for i in 0..d {
                    scratch.tmp[i] = model.inv_mass()[i] * scratch.grad_u[i];
                }
                scratch.hess.matvec(&scratch.tmp, out);
                for i in 0..d {
                    out[i] = -scratch.grad_u[i] + 2.0 * out[i];
                }

                // grad sigma2 = -1/2 scale W^(-3/2) grad W
                let c2 = -0.5 * self.scale / (w * math::sqrt(w));
                // Bounding chain: x = sqrt(sigma2^2 + a^2),
                // sigma = x / (x / b + 1),
                // dsigma/dx = 1 / (x / b + 1)^2, dx/dsigma2 = sigma2 / x.
                let x = math::sqrt(sigma2 * sigma2 + self.lower * self.lower);
                let denom = x / self.upper + 1.0;
                let dsigma_dx = 1.0 / (denom * denom);
                let chain = dsigma_dx * (sigma2 / x) * c2;
                for i in 0..d {
                    out[i] *= chain;
                }
                Ok(())
            }
        }
    }

    /// `K = sigma(q) (H(q, p) - H0)`.
    pub fn transformed_hamiltonian<M: HamiltonianModel>(
        &self,
        model: &M,
        q: &[f64],
        p: &[f64],
        scratch: &mut SigmaScratch,
    ) -> Result<f64> {
        let sigma = self.effective(model, q, scratch)?;
        Ok(sigma * (model.hamiltonian(q, p)? - self.h0))
    }

    /// Gradients of `K`: `dK/dq = sigma grad U + (H - H0) grad sigma` and
    /// `dK/dp = sigma M^-1 p` (the control depends on `q` only).
    pub fn grad_transformed<M: HamiltonianModel>(
        &self,
        model: &M,
        q: &[f64],
        p: &[f64],
        dk_dq: &mut [f64],
        dk_dp: &mut [f64],
        scratch: &mut SigmaScratch,
    ) -> Result<()> {
        let d = q.len();
        let sigma = self.effective(model, q, scratch)?;
        let h = model.hamiltonian(q, p)?;

        self.gradient(model, q, dk_dq, scratch)?;
        let offset = h - self.h0;
        for v in dk_dq.iter_mut() {
            *v *= offset;
        }
        model.grad_potential(q, &mut scratch.grad_u)?;
        for i in 0..d {
            dk_dq[i] += sigma * scratch.grad_u[i];
        }

        model.dh_dp(p, dk_dp);
        for v in dk_dp.iter_mut() {
            *v *= sigma;
        }
        Ok(())
    }

    /// `W = (H0 - U) + grad U^T M^-1 grad U`. Leaves `grad U` in scratch.
    fn energy_radicand<M: HamiltonianModel>(
        &self,
        model: &M,
        q: &[f64],
        scratch: &mut SigmaScratch,
    ) -> Result<f64> {
        let w = self.energy_radicand_unchecked(model, q, scratch)?;
        if !(w > 0.0) {
            return Err(Error::NonpositiveRadicand { value: w });
        }
        Ok(w)
    }

    /// As [`Self::energy_radicand`], but the sign check is left to the
    /// caller.
    fn energy_radicand_unchecked<M: HamiltonianModel>(
        &self,
        model: &M,
        q: &[f64],
        scratch: &mut SigmaScratch,
    ) -> Result<f64> {
        let u = model.potential(q)?;
        model.grad_potential(q, &mut scratch.grad_u)?;
        let mut quad = 0.0;
        for i in 0..q.len() {
            quad += scratch.grad_u[i] * scratch.grad_u[i] * model.inv_mass()[i];
        }
        Ok((self.h0 - u) + quad)
    }
}

/// The bounding map of the control function:
/// `x = sqrt(v^2 + a^2)`, result `x / (x / b + 1)`.
pub fn bound_value(v: f64, lower: f64, upper: f64) -> f64 {
    let x = math::sqrt(v * v + lower * lower);
    x / (x / upper + 1.0)
}

fn radius_sq(q: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for &x in q {
        r2 += x * x;
    }
    r2
}

/// Reusable buffers for the control-function evaluations.
#[derive(Debug, Clone)]
pub struct SigmaScratch {
    grad_u: alloc::vec::Vec<f64>,
    tmp: alloc::vec::Vec<f64>,
    hess: Mat,
}

impl SigmaScratch {
    pub fn new(dof: usize) -> Self {
        SigmaScratch {
            grad_u: alloc::vec![0.0; dof],
            tmp: alloc::vec![0.0; dof],
            hess: Mat::zeros(dof, dof),
        }
    }
}
