//! The benchmark problems with their exact initial data: the Kepler problem
//! at a chosen eccentricity, the periodic planar three-body configuration,
//! and the outer Solar System loaded from externally supplied body data.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{kepler_model, GravityModel, HamiltonianModel, NBodySystem, PhaseState};

/// A ready-to-integrate problem: model, initial state, reference period, and
/// the conserved quantities recorded at load time.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub model: GravityModel,
    pub initial: PhaseState,
    /// Reference period used to resolve `<N>periods` durations.
    pub period: f64,
    pub units: String,
    pub h0: f64,
    /// Total linear momentum at the initial state (length = space dim; the
    /// central-force model reports its single momentum vector).
    pub linear_momentum: Vec<f64>,
    /// Total angular momentum at the initial state: one component in the
    /// plane, three in space.
    pub angular_momentum: Vec<f64>,
}

impl ProblemSpec {
    fn build(
        name: String,
        model: GravityModel,
        initial: PhaseState,
        period: f64,
        units: String,
    ) -> Result<Self> {
        let h0 = model.hamiltonian(&initial.q, &initial.p)?;
        let (space_dim, bodies) = match &model {
            GravityModel::NBody(sys) => (sys.space_dim(), sys.n_bodies()),
            GravityModel::Central(_) => (2, 1),
        };
        let linear_momentum = total_linear_momentum(&initial.p, bodies, space_dim);
        let angular_momentum = total_angular_momentum(&initial.q, &initial.p, bodies, space_dim);
        Ok(ProblemSpec {
            name,
            model,
            initial,
            period,
            units,
            h0,
            linear_momentum,
            angular_momentum,
        })
    }
}

/// Componentwise sum of the per-body momenta.
pub fn total_linear_momentum(p: &[f64], bodies: usize, space_dim: usize) -> Vec<f64> {
    let mut total = vec![0.0; space_dim];
    for i in 0..bodies {
        for a in 0..space_dim {
            total[a] += p[i * space_dim + a];
        }
    }
    total
}

/// Total angular momentum: the scalar `q x p` in the plane, the full vector
/// in space.
pub fn total_angular_momentum(q: &[f64], p: &[f64], bodies: usize, space_dim: usize) -> Vec<f64> {
    match space_dim {
        2 => {
            let mut l = 0.0;
            for i in 0..bodies {
                l += q[i * 2] * p[i * 2 + 1] - q[i * 2 + 1] * p[i * 2];
            }
            vec![l]
        }
        3 => {
            let mut l = vec![0.0; 3];
            for i in 0..bodies {
                let (qx, qy, qz) = (q[i * 3], q[i * 3 + 1], q[i * 3 + 2]);
                let (px, py, pz) = (p[i * 3], p[i * 3 + 1], p[i * 3 + 2]);
                l[0] += qy * pz - qz * py;
                l[1] += qz * px - qx * pz;
                l[2] += qx * py - qy * px;
            }
            l
        }
        _ => Vec::new(),
    }
}

/// The Kepler problem at eccentricity `e`, period `2 pi`, dimensionless
/// units.
pub fn kepler_problem(e: f64) -> Result<ProblemSpec> {
    let (model, initial) = kepler_model(e)?;
    ProblemSpec::build(
        format!("kepler(e={e})"),
        GravityModel::Central(model),
        initial,
        2.0 * core::f64::consts::PI,
        String::from("dimensionless (G = 1)"),
    )
}

/// Period of the three-body configuration below.
pub const THREE_BODY_PERIOD: f64 = 6.3509;

/// A periodic planar three-body configuration with two close encounters per
/// period. Masses 0.9, 0.85, 1.0 and G = 1; momenta are mass times velocity.
pub fn three_body_problem() -> Result<ProblemSpec> {
    let masses = vec![0.9, 0.85, 1.0];
    let velocities = [0.0, 1.7813, 0.0, 0.4150, 0.0, -1.9559];
    let q = vec![-0.2227, 0.0, 1.0, 0.0, 0.0, 0.0];
    let mut p = vec![0.0; 6];
    for i in 0..3 {
        for a in 0..2 {
            p[i * 2 + a] = masses[i] * velocities[i * 2 + a];
        }
    }
    let model = NBodySystem::new(masses, 2, 1.0, 0.0)?;
    ProblemSpec::build(
        String::from("three-body"),
        GravityModel::NBody(model),
        PhaseState::new(q, p, 0.0)?,
        THREE_BODY_PERIOD,
        String::from("dimensionless (G = 1)"),
    )
}

/// One body of the outer-Solar-System data set, in AU / day / solar-mass
/// units.
#[derive(Debug, Clone, PartialEq)]
pub struct SolarBody {
    pub name: String,
    pub mass: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

/// The raw outer-Solar-System data as stored on disk: AU, days, solar
/// masses.
#[derive(Debug, Clone, PartialEq)]
pub struct SolarSystemData {
    /// Gravitational constant in AU^3 / (day^2 solar mass).
    pub grav_const: f64,
    pub bodies: Vec<SolarBody>,
    /// Reference (Jupiter) orbital period in days.
    pub reference_period_days: f64,
}

/// Time unit used for the integration of the outer Solar System. The data
/// file is day-based; the model can be built in a rescaled time unit so the
/// Hamiltonian magnitude lands near the other problems' scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScale {
    pub days_per_unit: f64,
    pub label: &'static str,
}

impl TimeScale {
    pub const DAYS: TimeScale = TimeScale {
        days_per_unit: 1.0,
        label: "days",
    };
    pub const YEARS: TimeScale = TimeScale {
        days_per_unit: 365.25,
        label: "years",
    };

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "days" | "day" => Ok(TimeScale::DAYS),
            "years" | "year" => Ok(TimeScale::YEARS),
            _ => Err(Error::InvalidArgument("unknown time unit")),
        }
    }
}

/// Build the outer-Solar-System problem from loaded body data, converting
/// velocities, the gravitational constant, and the reference period into the
/// requested time unit.
pub fn outer_solar_problem(data: &SolarSystemData, time: TimeScale) -> Result<ProblemSpec> {
    if data.bodies.len() < 2 {
        return Err(Error::InvalidArgument(
            "outer solar system needs at least two bodies",
        ));
    }
    let s = time.days_per_unit;
    let n = data.bodies.len();
    let mut masses = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n * 3);
    let mut p = Vec::with_capacity(n * 3);
    for body in &data.bodies {
        masses.push(body.mass);
        for a in 0..3 {
            q.push(body.position[a]);
            p.push(body.mass * body.velocity[a] * s);
        }
    }
    let model = NBodySystem::new(masses, 3, data.grav_const * s * s, 0.0)?;
    ProblemSpec::build(
        String::from("outer-solar"),
        GravityModel::NBody(model),
        PhaseState::new(q, p, 0.0)?,
        data.reference_period_days / s,
        format!("AU, {}, solar masses", time.label),
    )
}
