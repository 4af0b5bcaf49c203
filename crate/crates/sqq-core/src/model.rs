//! Gravitational force models: the N-body Hamiltonian with diagonal kinetic
//! metric, and the reduced central-force model used for the Kepler problem.
//! All evaluators are pure functions of their arguments.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::math;

/// Generalized coordinates, momenta, and the physical time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::InvalidArgument(
                "coordinates and momenta must have the same length",
            ));
        }
        Ok(PhaseState { q, p, t })
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }
}

/// Evaluator bundle for a Hamiltonian of the form
/// `H(q, p) = 1/2 p^T M^-1 p + U(q)` with diagonal mass matrix `M`.
pub trait HamiltonianModel {
    /// Number of phase-space coordinates `d`.
    fn dof(&self) -> usize;

    /// Diagonal of `M^-1`, length `d`.
    fn inv_mass(&self) -> &[f64];

    fn potential(&self, q: &[f64]) -> Result<f64>;

    fn grad_potential(&self, q: &[f64], out: &mut [f64]) -> Result<()>;

    /// Dense symmetric Hessian of the potential.
    fn hess_potential(&self, q: &[f64], out: &mut Mat) -> Result<()>;

    fn kinetic(&self, p: &[f64]) -> f64 {
        let inv_mass = self.inv_mass();
        let mut t = 0.0;
        for i in 0..p.len() {
            t += p[i] * p[i] * inv_mass[i];
        }
        0.5 * t
    }

    fn hamiltonian(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        Ok(self.kinetic(p) + self.potential(q)?)
    }

    /// `dH/dp = M^-1 p`, componentwise.
    fn dh_dp(&self, p: &[f64], out: &mut [f64]) {
        let inv_mass = self.inv_mass();
        for i in 0..p.len() {
            out[i] = inv_mass[i] * p[i];
        }
    }

    /// Smallest separation the model considers collision-relevant at `q`,
    /// if it has such a notion. Drives the trajectory's close-approach
    /// bookkeeping.
    fn closest_separation(&self, _q: &[f64]) -> Option<f64> {
        None
    }
}

/// Gravitational N-body system in 2 or 3 spatial dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct NBodySystem {
    masses: Vec<f64>,
    space_dim: usize,
    grav_const: f64,
    softening: f64,
    inv_mass_diag: Vec<f64>,
}

impl NBodySystem {
    pub fn new(masses: Vec<f64>, space_dim: usize, grav_const: f64, softening: f64) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidArgument("at least one body required"));
        }
        if !(space_dim == 2 || space_dim == 3) {
            return Err(Error::InvalidArgument("space dimension must be 2 or 3"));
        }
        if masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidArgument("masses must be strictly positive"));
        }
        if !(grav_const > 0.0) {
            return Err(Error::InvalidArgument(
                "gravitational constant must be strictly positive",
            ));
        }
        if softening < 0.0 {
            return Err(Error::InvalidArgument("softening must be nonnegative"));
        }
        let mut inv_mass_diag = Vec::with_capacity(masses.len() * space_dim);
        for &m in &masses {
            for _ in 0..space_dim {
                inv_mass_diag.push(1.0 / m);
            }
        }
        Ok(NBodySystem {
            masses,
            space_dim,
            grav_const,
            softening,
            inv_mass_diag,
        })
    }

    pub fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn grav_const(&self) -> f64 {
        self.grav_const
    }

    /// Squared separation of bodies `i` and `j`, before softening.
    fn separation_sq(&self, q: &[f64], i: usize, j: usize) -> f64 {
        let dim = self.space_dim;
        let mut r2 = 0.0;
        for a in 0..dim {
            let d = q[i * dim + a] - q[j * dim + a];
            r2 += d * d;
        }
        r2
    }

    fn softened_sq(&self, r2: f64, i: usize, j: usize) -> Result<f64> {
        let s2 = r2 + self.softening * self.softening;
        if s2 == 0.0 {
            return Err(Error::Singularity {
                body_a: i,
                body_b: j,
            });
        }
        Ok(s2)
    }

    /// Minimum pairwise separation (unsoftened) and the pair realizing it.
    pub fn min_pair_distance(&self, q: &[f64]) -> (f64, (usize, usize)) {
        let n = self.n_bodies();
        let mut best = f64::MAX;
        let mut pair = (0, 0);
        for i in 0..n {
            for j in (i + 1)..n {
                let r2 = self.separation_sq(q, i, j);
                if r2 < best {
                    best = r2;
                    pair = (i, j);
                }
            }
        }
        (math::sqrt(best), pair)
    }
}

impl HamiltonianModel for NBodySystem {
    fn dof(&self) -> usize {
        self.masses.len() * self.space_dim
    }

    fn inv_mass(&self) -> &[f64] {
        &self.inv_mass_diag
    }

    fn potential(&self, q: &[f64]) -> Result<f64> {
        let n = self.n_bodies();
        let mut u = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let s2 = self.softened_sq(self.separation_sq(q, i, j), i, j)?;
                u -= self.grav_const * self.masses[i] * self.masses[j] / math::sqrt(s2);
            }
        }
        Ok(u)
    }

    fn grad_potential(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n_bodies();
        let dim = self.space_dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let s2 = self.softened_sq(self.separation_sq(q, i, j), i, j)?;
                let inv_r3 = 1.0 / (s2 * math::sqrt(s2));
                let c = self.grav_const * self.masses[i] * self.masses[j] * inv_r3;
                for a in 0..dim {
                    let d = q[i * dim + a] - q[j * dim + a];
                    out[i * dim + a] += c * d;
                    out[j * dim + a] -= c * d;
                }
            }
        }
        Ok(())
    }

    fn closest_separation(&self, q: &[f64]) -> Option<f64> {
        if self.n_bodies() < 2 {
            return None;
        }
        Some(self.min_pair_distance(q).0)
    }

    fn hess_potential(&self, q: &[f64], out: &mut Mat) -> Result<()> {
        let n = self.n_bodies();
        let dim = self.space_dim;
        let d = self.dof();
        out.reset(d, d);
        for i in 0..n {
            for j in (i + 1)..n {
                let s2 = self.softened_sq(self.separation_sq(q, i, j), i, j)?;
                let inv_r3 = 1.0 / (s2 * math::sqrt(s2));
                let inv_r5 = inv_r3 / s2;
                let c = self.grav_const * self.masses[i] * self.masses[j];
                for a in 0..dim {
                    let da = q[i * dim + a] - q[j * dim + a];
                    for b in 0..dim {
                        let db = q[i * dim + b] - q[j * dim + b];
                        let delta = if a == b { inv_r3 } else { 0.0 };
                        // Cross block d2U/dq_i dq_j; the diagonal blocks
                        // accumulate the opposite sign.
                        let cross = -c * (delta - 3.0 * da * db * inv_r5);
                        out.add_at(i * dim + a, j * dim + b, cross);
                        out.add_at(j * dim + b, i * dim + a, cross);
                        out.add_at(i * dim + a, i * dim + b, -cross);
                        out.add_at(j * dim + a, j * dim + b, -cross);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Unit-mass central-force model: `H = 1/2 |p|^2 - mu / |q|` in the plane.
/// This is the reduced form of the Kepler problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralForce {
    mu: f64,
    inv_mass_diag: [f64; 2],
}

impl CentralForce {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidArgument(
                "central-force parameter must be strictly positive",
            ));
        }
        Ok(CentralForce {
            mu,
            inv_mass_diag: [1.0, 1.0],
        })
    }

    fn radius_sq(&self, q: &[f64]) -> Result<f64> {
        let r2 = q[0] * q[0] + q[1] * q[1];
        if r2 == 0.0 {
            return Err(Error::Singularity {
                body_a: 0,
                body_b: 0,
            });
        }
        Ok(r2)
    }
}

impl HamiltonianModel for CentralForce {
    fn dof(&self) -> usize {
        2
    }

    fn inv_mass(&self) -> &[f64] {
        &self.inv_mass_diag
    }

    fn potential(&self, q: &[f64]) -> Result<f64> {
        Ok(-self.mu / math::sqrt(self.radius_sq(q)?))
    }

    fn grad_potential(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        let r2 = self.radius_sq(q)?;
        let inv_r3 = 1.0 / (r2 * math::sqrt(r2));
        out[0] = self.mu * q[0] * inv_r3;
        out[1] = self.mu * q[1] * inv_r3;
        Ok(())
    }

    fn closest_separation(&self, q: &[f64]) -> Option<f64> {
        Some(math::sqrt(q[0] * q[0] + q[1] * q[1]))
    }

    fn hess_potential(&self, q: &[f64], out: &mut Mat) -> Result<()> {
        let r2 = self.radius_sq(q)?;
        let inv_r3 = 1.0 / (r2 * math::sqrt(r2));
        let inv_r5 = inv_r3 / r2;
        out.reset(2, 2);
        for a in 0..2 {
            for b in 0..2 {
                let delta = if a == b { inv_r3 } else { 0.0 };
                out.set(a, b, self.mu * (delta - 3.0 * q[a] * q[b] * inv_r5));
            }
        }
        Ok(())
    }
}

/// Either concrete gravity model, behind one type so problem setups can be
/// passed around uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum GravityModel {
    NBody(NBodySystem),
    Central(CentralForce),
}

impl HamiltonianModel for GravityModel {
    fn dof(&self) -> usize {
        match self {
            GravityModel::NBody(m) => m.dof(),
            GravityModel::Central(m) => m.dof(),
        }
    }

    fn inv_mass(&self) -> &[f64] {
        match self {
            GravityModel::NBody(m) => m.inv_mass(),
            GravityModel::Central(m) => m.inv_mass(),
        }
    }

    fn potential(&self, q: &[f64]) -> Result<f64> {
        match self {
            GravityModel::NBody(m) => m.potential(q),
            GravityModel::Central(m) => m.potential(q),
        }
    }

    fn grad_potential(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            GravityModel::NBody(m) => m.grad_potential(q, out),
            GravityModel::Central(m) => m.grad_potential(q, out),
        }
    }

    fn hess_potential(&self, q: &[f64], out: &mut Mat) -> Result<()> {
        match self {
            GravityModel::NBody(m) => m.hess_potential(q, out),
            GravityModel::Central(m) => m.hess_potential(q, out),
        }
    }

    fn closest_separation(&self, q: &[f64]) -> Option<f64> {
        match self {
            GravityModel::NBody(m) => m.closest_separation(q),
            GravityModel::Central(m) => m.closest_separation(q),
        }
    }
}

/// The Kepler problem in reduced form: unit mass, `H = 1/2 |p|^2 - 1/r`,
/// starting at perihelion with eccentricity `e`. The orbital period is
/// `2 pi`.
pub fn kepler_model(e: f64) -> Result<(CentralForce, PhaseState)> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::InvalidArgument("eccentricity must lie in [0, 1)"));
    }
    let model = CentralForce::new(1.0)?;
    let q = vec![1.0 - e, 0.0];
    let p = vec![0.0, math::sqrt((1.0 + e) / (1.0 - e))];
    Ok((model, PhaseState::new(q, p, 0.0)?))
}
