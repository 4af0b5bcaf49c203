//! Trajectory diagnostics: energy-error series, per-body speeds, minimum
//! pairwise separation, and the drift-rate fit used by the long-run energy
//! checks. Everything here is a pure function of the recorded samples, so
//! recomputing from a dumped trajectory reproduces it exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::driver::Trajectory;
use crate::math;
use crate::model::GravityModel;
use crate::problems::ProblemSpec;

/// Closest sampled approach of a body pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestApproach {
    pub distance: f64,
    pub time: f64,
    pub pair: (usize, usize),
}

/// Per-sample series and scalar summaries derived from one trajectory.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub times: Vec<f64>,
    /// `|H - H0|` per sample.
    pub abs_energy_error: Vec<f64>,
    /// `|(H - H0) / H0|` per sample.
    pub rel_energy_error: Vec<f64>,
    pub max_abs_energy_error: f64,
    pub max_rel_energy_error: f64,
    /// One speed series per body.
    pub speeds: Vec<Vec<f64>>,
    pub closest_approach: Option<ClosestApproach>,
}

/// Compute the diagnostic bundle for a trajectory recorded on `problem`.
pub fn diagnostics(problem: &ProblemSpec, traj: &Trajectory) -> Diagnostics {
    let h0 = traj.meta.h0;
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let abs_energy_error: Vec<f64> = traj.samples.iter().map(|s| (s.h - h0).abs()).collect();
    let rel_energy_error: Vec<f64> = abs_energy_error
        .iter()
        .map(|&e| if h0 != 0.0 { e / h0.abs() } else { e })
        .collect();
    let max_abs = abs_energy_error.iter().cloned().fold(0.0, f64::max);
    let max_rel = rel_energy_error.iter().cloned().fold(0.0, f64::max);

    let (bodies, dim, masses): (usize, usize, Vec<f64>) = match &problem.model {
        GravityModel::NBody(sys) => (sys.n_bodies(), sys.space_dim(), sys.masses().to_vec()),
        GravityModel::Central(_) => (1, 2, vec![1.0]),
    };

    let mut speeds: Vec<Vec<f64>> = vec![Vec::with_capacity(traj.samples.len()); bodies];
    for s in &traj.samples {
        for i in 0..bodies {
            let mut v2 = 0.0;
            for a in 0..dim {
                let v = s.p[i * dim + a] / masses[i];
                v2 += v * v;
            }
            speeds[i].push(math::sqrt(v2));
        }
    }

    let mut closest: Option<ClosestApproach> = None;
    if let GravityModel::NBody(sys) = &problem.model {
        if sys.n_bodies() >= 2 {
            for s in &traj.samples {
                let (dist, pair) = sys.min_pair_distance(&s.q);
                if closest.map_or(true, |c| dist < c.distance) {
                    closest = Some(ClosestApproach {
                        distance: dist,
                        time: s.t,
                        pair,
                    });
                }
            }
        }
    }

    Diagnostics {
        times,
        abs_energy_error,
        rel_energy_error,
        max_abs_energy_error: max_abs,
        max_rel_energy_error: max_rel,
        speeds,
        closest_approach: closest,
    }
}

/// Distance between two specific bodies at every sample.
pub fn pair_distance_series(problem: &ProblemSpec, traj: &Trajectory, i: usize, j: usize) -> Vec<f64> {
    let dim = match &problem.model {
        GravityModel::NBody(sys) => sys.space_dim(),
        GravityModel::Central(_) => 2,
    };
    traj.samples
        .iter()
        .map(|s| {
            let mut r2 = 0.0;
            for a in 0..dim {
                let d = s.q[i * dim + a] - s.q[j * dim + a];
                r2 += d * d;
            }
            math::sqrt(r2)
        })
        .collect()
}

/// Least-squares slope of `values` against `times` over the trailing
/// fraction of the series. The long-run energy checks use this as the
/// secular drift rate.
pub fn tail_drift_rate(times: &[f64], values: &[f64], tail_fraction: f64) -> f64 {
    assert_eq!(times.len(), values.len());
    let len = times.len();
    if len < 2 {
        return 0.0;
    }
    let start = ((1.0 - tail_fraction) * len as f64) as usize;
    let start = start.min(len - 2);
    let t = &times[start..];
    let v = &values[start..];
    let n = t.len() as f64;
    let mean_t: f64 = t.iter().sum::<f64>() / n;
    let mean_v: f64 = v.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..t.len() {
        let dt = t[k] - mean_t;
        num += dt * (v[k] - mean_v);
        den += dt * dt;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Maximum of `values` over the window of samples whose index falls in
/// `[from, to)` as fractions of the series length.
pub fn window_max(values: &[f64], from: f64, to: f64) -> f64 {
    let len = values.len();
    let lo = ((from * len as f64) as usize).min(len);
    let hi = ((to * len as f64) as usize).min(len).max(lo);
    values[lo..hi].iter().cloned().fold(0.0, f64::max)
}
