//! Interpolation bases on the reference interval `[-1, 1]` and their
//! projection onto arbitrary step intervals.
//!
//! The basis values and derivatives at the Gauss points are computed once
//! during a warm-up ([`ReferenceBasis::new`]) and then mapped to any step
//! interval by the length-coordinate identities: Gauss points and weights
//! transform affinely, basis values carry over unchanged, and derivatives
//! pick up the factor `2 / L`. No linear system is solved after warm-up.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, LuFactors, Mat, RefineScratch};
use crate::math;

/// Hard cap on the number of interpolation nodes. The cardinal basis is
/// built from the monomial Vandermonde system, whose conditioning degrades
/// quickly; past this point the construction fails loudly instead of
/// silently losing accuracy.
pub const MAX_NODES: usize = 25;

/// Max-norm residual allowed for each Vandermonde solve.
pub const VANDERMONDE_RESIDUAL_LIMIT: f64 = 1e-8;

/// Placement rule for interpolation nodes on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Uniform spacing `2 / (count - 1)`, endpoints included.
    Equidistant,
    /// Chebyshev extrema, endpoints included.
    ChebyshevLobatto,
    /// Chebyshev roots, strictly interior.
    ChebyshevGauss,
}

/// A node placement rule together with the node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeFamily {
    pub kind: NodeKind,
    pub count: usize,
}

impl NodeFamily {
    pub fn new(kind: NodeKind, count: usize) -> Result<Self> {
        let min = match kind {
            NodeKind::ChebyshevGauss => 1,
            _ => 2,
        };
        if count < min {
            return Err(Error::InvalidArgument(
                "node count below the minimum for this family",
            ));
        }
        Ok(NodeFamily { kind, count })
    }

    /// The nodes, strictly increasing in `[-1, 1]`.
    pub fn nodes(&self) -> Vec<f64> {
        let c = self.count;
        let mut out = Vec::with_capacity(c);
        match self.kind {
            NodeKind::Equidistant => {
                for k in 0..c {
                    out.push(-1.0 + 2.0 * k as f64 / (c - 1) as f64);
                }
            }
            NodeKind::ChebyshevLobatto => {
                for k in 0..c {
                    out.push(-math::cos(core::f64::consts::PI * k as f64 / (c - 1) as f64));
                }
            }
            NodeKind::ChebyshevGauss => {
                for k in 0..c {
                    out.push(-math::cos(
                        core::f64::consts::PI * (2 * k + 1) as f64 / (2 * c) as f64,
                    ));
                }
            }
        }
        // The analytic midpoint of a symmetric family is exactly zero.
        if c % 2 == 1 {
            out[c / 2] = 0.0;
        }
        out
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact for polynomials of
/// degree `2g - 1`. Nodes come out symmetric about zero and the weights sum
/// to two.
pub fn gauss_legendre(g: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if g == 0 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one point",
        ));
    }
    let mut nodes = vec![0.0; g];
    let mut weights = vec![0.0; g];
    let n = g as f64;
    for k in 0..(g + 1) / 2 {
        // Root of P_g near the Chebyshev angle, polished by Newton.
        let mut z = math::cos(core::f64::consts::PI * (k as f64 + 0.75) / (n + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p_prev = 0.0;
            let mut p = 1.0;
            for j in 1..=g {
                let p_old = p_prev;
                p_prev = p;
                p = ((2 * j - 1) as f64 * z * p_prev - (j - 1) as f64 * p_old) / j as f64;
            }
            dp = n * (z * p - p_prev) / (z * z - 1.0);
            let z_new = z - p / dp;
            if z_new == z {
                break;
            }
            z = z_new;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[k] = -z;
        nodes[g - 1 - k] = z;
        weights[k] = w;
        weights[g - 1 - k] = w;
    }
    if g % 2 == 1 {
        nodes[g / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Cardinal-basis values and derivatives at the given evaluation points.
///
/// Column `j` of the first matrix holds the values of all `c` cardinal
/// polynomials (the unique degree `c-1` polynomials with `l_k(t_i) =
/// delta_ki`) at `eval[j]`; the second matrix holds their derivatives. The
/// coefficients come from the monomial Vandermonde system, solved with one
/// step of iterative refinement and a loud residual check.
pub fn cardinal_values(nodes: &[f64], eval: &[f64]) -> Result<(Mat, Mat)> {
    let c = nodes.len();
    if c == 0 {
        return Err(Error::InvalidArgument("empty node set"));
    }
    if c > MAX_NODES {
        return Err(Error::ConditioningLimit {
            count: c,
            max: MAX_NODES,
        });
    }
    for i in 0..c {
        for j in (i + 1)..c {
            if nodes[i] == nodes[j] {
                return Err(Error::DuplicateNodes);
            }
        }
    }

    // System matrix A[j][i] = t_i^j: row j enforces reproduction of the
    // monomial t^j, so A x = p(t) yields the cardinal values at t.
    let mut a = Mat::zeros(c, c);
    for (i, &t) in nodes.iter().enumerate() {
        let mut power = 1.0;
        for j in 0..c {
            a.set(j, i, power);
            power *= t;
        }
    }
    let lu = LuFactors::factor(&a)?;
    let mut refine = RefineScratch::new(c);

    let g = eval.len();
    let mut values = Mat::zeros(c, g);
    let mut derivs = Mat::zeros(c, g);
    let mut rhs = vec![0.0; c];
    let mut col = vec![0.0; c];
    for (e, &t) in eval.iter().enumerate() {
        // Values: rhs = (1, t, t^2, ...).
        let mut power = 1.0;
        for j in 0..c {
            rhs[j] = power;
            power *= t;
        }
        let res = lu.solve_refined(&a, &rhs, &mut col, &mut refine);
        if !(res < VANDERMONDE_RESIDUAL_LIMIT * (1.0 + inf_norm(&rhs))) {
            return Err(Error::IllConditioned { residual: res });
        }
        for k in 0..c {
            values.set(k, e, col[k]);
        }
        // Derivatives: rhs = (0, 1, 2t, 3t^2, ...).
        rhs[0] = 0.0;
        let mut power = 1.0;
        for j in 1..c {
            rhs[j] = j as f64 * power;
            power *= t;
        }
        let res = lu.solve_refined(&a, &rhs, &mut col, &mut refine);
        if !(res < VANDERMONDE_RESIDUAL_LIMIT * (1.0 + inf_norm(&rhs))) {
            return Err(Error::IllConditioned { residual: res });
        }
        for k in 0..c {
            derivs.set(k, e, col[k]);
        }
    }
    Ok((values, derivs))
}

/// Product of the warm-up: basis and derivative values at the Gauss points
/// of the reference interval `[-1, 1]`, for the coordinate basis (`m + 1`
/// nodes) and the momentum basis (`n + 1` nodes). Immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    q_family: NodeFamily,
    p_family: NodeFamily,
    q_nodes: Vec<f64>,
    p_nodes: Vec<f64>,
    gauss_nodes: Vec<f64>,
    gauss_weights: Vec<f64>,
    q_values: Mat,
    q_derivs: Mat,
    p_values: Mat,
    p_derivs: Mat,
    /// Momentum-basis values at the right interval end; the interpolated
    /// end momentum they produce is a diagnostic, not the step output.
    p_values_at_end: Vec<f64>,
}

impl ReferenceBasis {
    /// Warm-up: precompute everything every later step reuses.
    /// `m` and `n` are the polynomial degrees of the coordinate and momentum
    /// interpolants; `g` is the number of Gauss points.
    pub fn new(m: usize, n: usize, g: usize, q_kind: NodeKind, p_kind: NodeKind) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidArgument("coordinate degree must be >= 1"));
        }
        let q_family = NodeFamily::new(q_kind, m + 1)?;
        let p_family = NodeFamily::new(p_kind, n + 1)?;
        let (gauss_nodes, gauss_weights) = gauss_legendre(g)?;
        let q_nodes = q_family.nodes();
        let p_nodes = p_family.nodes();
        let (q_values, q_derivs) = cardinal_values(&q_nodes, &gauss_nodes)?;
        let (p_values, p_derivs) = cardinal_values(&p_nodes, &gauss_nodes)?;
        let (p_end, _) = cardinal_values(&p_nodes, &[1.0])?;
        let p_values_at_end = (0..=n).map(|k| p_end.at(k, 0)).collect();
        Ok(ReferenceBasis {
            q_family,
            p_family,
            q_nodes,
            p_nodes,
            gauss_nodes,
            gauss_weights,
            q_values,
            q_derivs,
            p_values,
            p_derivs,
            p_values_at_end,
        })
    }

    /// Coordinate interpolation degree `m`.
    pub fn degree_q(&self) -> usize {
        self.q_family.count - 1
    }

    /// Momentum interpolation degree `n`.
    pub fn degree_p(&self) -> usize {
        self.p_family.count - 1
    }

    pub fn gauss_count(&self) -> usize {
        self.gauss_nodes.len()
    }

    pub fn q_family(&self) -> NodeFamily {
        self.q_family
    }

    pub fn p_family(&self) -> NodeFamily {
        self.p_family
    }

    pub fn q_nodes(&self) -> &[f64] {
        &self.q_nodes
    }

    pub fn p_nodes(&self) -> &[f64] {
        &self.p_nodes
    }

    pub fn gauss_nodes(&self) -> &[f64] {
        &self.gauss_nodes
    }

    pub fn gauss_weights(&self) -> &[f64] {
        &self.gauss_weights
    }

    pub fn q_values(&self) -> &Mat {
        &self.q_values
    }

    pub fn q_derivs(&self) -> &Mat {
        &self.q_derivs
    }

    pub fn p_values(&self) -> &Mat {
        &self.p_values
    }

    pub fn p_derivs(&self) -> &Mat {
        &self.p_derivs
    }

    /// Momentum-basis values at the right end of the reference interval.
    pub fn p_values_at_end(&self) -> &[f64] {
        &self.p_values_at_end
    }

    /// Project the reference data onto `[t_start, t_end]`.
    pub fn map_to_interval(&self, t_start: f64, t_end: f64) -> Result<MappedBasis> {
        let mut out = MappedBasis::empty();
        self.map_to_interval_into(t_start, t_end, &mut out)?;
        Ok(out)
    }

    /// Like [`Self::map_to_interval`] but reuses the buffers of `out`.
    pub fn map_to_interval_into(&self, t_start: f64, t_end: f64, out: &mut MappedBasis) -> Result<()> {
        if !(t_end > t_start) {
            return Err(Error::InvalidInterval {
                start: t_start,
                end: t_end,
            });
        }
        let length = t_end - t_start;
        let half = 0.5 * length;
        let deriv_scale = 2.0 / length;

        out.t_start = t_start;
        out.t_end = t_end;

        let g = self.gauss_nodes.len();
        out.gauss_points.clear();
        out.gauss_weights.clear();
        for j in 0..g {
            out.gauss_points.push(t_start + (self.gauss_nodes[j] + 1.0) * half);
            out.gauss_weights.push(half * self.gauss_weights[j]);
        }

        out.q_node_times.clear();
        for &t in &self.q_nodes {
            out.q_node_times.push(t_start + (t + 1.0) * half);
        }

        copy_scaled(&self.q_values, 1.0, &mut out.q_values);
        copy_scaled(&self.q_derivs, deriv_scale, &mut out.q_derivs);
        copy_scaled(&self.p_values, 1.0, &mut out.p_values);
        copy_scaled(&self.p_derivs, deriv_scale, &mut out.p_derivs);
        Ok(())
    }
}

fn copy_scaled(src: &Mat, scale: f64, dst: &mut Mat) {
    dst.reset(src.rows(), src.cols());
    let d = dst.data_mut();
    let s = src.data();
    if scale == 1.0 {
        d.copy_from_slice(s);
    } else {
        for i in 0..s.len() {
            d[i] = scale * s[i];
        }
    }
}

/// Basis data mapped onto one step interval. Gauss weights are the
/// reference weights scaled by `L / 2`, values are carried over unchanged,
/// derivatives are scaled by `2 / L`.
#[derive(Debug, Clone)]
pub struct MappedBasis {
    pub t_start: f64,
    pub t_end: f64,
    pub gauss_points: Vec<f64>,
    pub gauss_weights: Vec<f64>,
    /// Times of the coordinate interpolation nodes inside the interval.
    pub q_node_times: Vec<f64>,
    /// `(m + 1) x g` coordinate basis values at the Gauss points.
    pub q_values: Mat,
    pub q_derivs: Mat,
    /// `(n + 1) x g` momentum basis values at the Gauss points.
    pub p_values: Mat,
    pub p_derivs: Mat,
}

impl MappedBasis {
    pub fn empty() -> Self {
        MappedBasis {
            t_start: 0.0,
            t_end: 0.0,
            gauss_points: Vec::new(),
            gauss_weights: Vec::new(),
            q_node_times: Vec::new(),
            q_values: Mat::zeros(0, 0),
            q_derivs: Mat::zeros(0, 0),
            p_values: Mat::zeros(0, 0),
            p_derivs: Mat::zeros(0, 0),
        }
    }

    pub fn length(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn degree_q(&self) -> usize {
        self.q_values.rows() - 1
    }

    pub fn degree_p(&self) -> usize {
        self.p_values.rows() - 1
    }

    pub fn gauss_count(&self) -> usize {
        self.gauss_points.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_legendre_low_orders_match_closed_forms() {
        let (n1, w1) = gauss_legendre(1).unwrap();
        assert_eq!(n1, vec![0.0]);
        assert_eq!(w1, vec![2.0]);

        let (n2, w2) = gauss_legendre(2).unwrap();
        let r = 1.0 / 3.0_f64.sqrt();
        assert_abs_diff_eq!(n2[0], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(n2[1], r, epsilon = 1e-15);
        assert_abs_diff_eq!(w2[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w2[1], 1.0, epsilon = 1e-15);

        let (n3, w3) = gauss_legendre(3).unwrap();
        let r = (3.0_f64 / 5.0).sqrt();
        assert_abs_diff_eq!(n3[0], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(n3[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n3[2], r, epsilon = 1e-15);
        assert_abs_diff_eq!(w3[0], 5.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w3[1], 8.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w3[2], 5.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_legendre_rejects_zero_points() {
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for g in 1..=40 {
            let (nodes, weights) = gauss_legendre(g).unwrap();
            let sum: f64 = weights.iter().sum();
            assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-13);
            for w in &weights {
                assert!(*w > 0.0);
            }
            for k in 1..g {
                assert!(nodes[k] > nodes[k - 1]);
            }
            // Symmetry about zero.
            for k in 0..g {
                assert_abs_diff_eq!(nodes[k], -nodes[g - 1 - k], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2g_minus_1() {
        // Monomial moments over [-1, 1]: zero for odd powers, 2/(k+1) even.
        for g in 1..=12 {
            let (nodes, weights) = gauss_legendre(g).unwrap();
            for k in 0..2 * g {
                let quad: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&x, &w)| w * x.powi(k as i32))
                    .sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert_abs_diff_eq!(quad, exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn node_families_match_closed_forms() {
        let lobatto = NodeFamily::new(NodeKind::ChebyshevLobatto, 3).unwrap();
        let nodes = lobatto.nodes();
        assert_abs_diff_eq!(nodes[0], -1.0, epsilon = 0.0);
        assert_abs_diff_eq!(nodes[1], 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(nodes[2], 1.0, epsilon = 0.0);

        let gauss = NodeFamily::new(NodeKind::ChebyshevGauss, 1).unwrap();
        assert_eq!(gauss.nodes(), vec![0.0]);

        let equi = NodeFamily::new(NodeKind::Equidistant, 5).unwrap();
        let nodes = equi.nodes();
        let expect = [-1.0, -0.5, 0.0, 0.5, 1.0];
        for (a, b) in nodes.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn node_family_minimum_counts() {
        assert!(NodeFamily::new(NodeKind::ChebyshevLobatto, 1).is_err());
        assert!(NodeFamily::new(NodeKind::Equidistant, 1).is_err());
        assert!(NodeFamily::new(NodeKind::ChebyshevGauss, 0).is_err());
        assert!(NodeFamily::new(NodeKind::ChebyshevGauss, 1).is_ok());
    }

    #[test]
    fn node_family_invariants_hold() {
        for kind in [
            NodeKind::Equidistant,
            NodeKind::ChebyshevLobatto,
            NodeKind::ChebyshevGauss,
        ] {
            for count in 2..=12 {
                let nodes = NodeFamily::new(kind, count).unwrap().nodes();
                for pair in nodes.windows(2) {
                    assert!(pair[1] > pair[0]);
                }
                assert!(nodes[0] >= -1.0 && nodes[count - 1] <= 1.0);
                match kind {
                    NodeKind::ChebyshevLobatto | NodeKind::Equidistant => {
                        assert_eq!(nodes[0], -1.0);
                        assert_eq!(nodes[count - 1], 1.0);
                    }
                    NodeKind::ChebyshevGauss => {
                        assert!(nodes[0] > -1.0 && nodes[count - 1] < 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn cardinal_basis_is_cardinal_at_nodes() {
        let nodes = NodeFamily::new(NodeKind::ChebyshevLobatto, 6)
            .unwrap()
            .nodes();
        let (values, _) = cardinal_values(&nodes, &nodes).unwrap();
        for k in 0..6 {
            for j in 0..6 {
                let expect = if k == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(values.at(k, j), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cardinal_basis_three_nodes_hand_value() {
        // Quadratic cardinal basis on {-1, 0, 1} at t = 0.5, solved by hand
        // from the 3x3 Vandermonde system.
        let nodes = [-1.0, 0.0, 1.0];
        let (values, _) = cardinal_values(&nodes, &[0.5]).unwrap();
        assert_abs_diff_eq!(values.at(0, 0), -0.125, epsilon = 1e-14);
        assert_abs_diff_eq!(values.at(1, 0), 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(values.at(2, 0), 0.375, epsilon = 1e-14);
    }

    #[test]
    fn cardinal_basis_partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [
            NodeKind::Equidistant,
            NodeKind::ChebyshevLobatto,
            NodeKind::ChebyshevGauss,
        ] {
            let nodes = NodeFamily::new(kind, 9).unwrap().nodes();
            let eval: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (values, derivs) = cardinal_values(&nodes, &eval).unwrap();
            for j in 0..eval.len() {
                let vsum: f64 = (0..9).map(|k| values.at(k, j)).sum();
                let dsum: f64 = (0..9).map(|k| derivs.at(k, j)).sum();
                assert_abs_diff_eq!(vsum, 1.0, epsilon = 1e-11);
                assert_abs_diff_eq!(dsum, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cardinal_basis_reproduces_polynomials() {
        // Interpolating t^k at the nodes and evaluating through the basis
        // must reproduce t^k exactly for k < c.
        let nodes = NodeFamily::new(NodeKind::ChebyshevLobatto, 8)
            .unwrap()
            .nodes();
        let eval = [-0.93, -0.4, 0.17, 0.61, 0.99];
        let (values, derivs) = cardinal_values(&nodes, &eval).unwrap();
        for k in 0..8usize {
            for (j, &t) in eval.iter().enumerate() {
                let mut v = 0.0;
                let mut d = 0.0;
                for (i, &ti) in nodes.iter().enumerate() {
                    let sample = ti.powi(k as i32);
                    v += sample * values.at(i, j);
                    d += sample * derivs.at(i, j);
                }
                assert_abs_diff_eq!(v, t.powi(k as i32), epsilon = 1e-11);
                let dexpect = if k == 0 {
                    0.0
                } else {
                    k as f64 * t.powi(k as i32 - 1)
                };
                assert_abs_diff_eq!(d, dexpect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cardinal_basis_rejects_bad_inputs() {
        assert!(matches!(
            cardinal_values(&[0.0, 0.0], &[0.5]),
            Err(Error::DuplicateNodes)
        ));
        let too_many: Vec<f64> = (0..26).map(|k| -1.0 + k as f64 / 13.0).collect();
        assert!(matches!(
            cardinal_values(&too_many, &[0.0]),
            Err(Error::ConditioningLimit { .. })
        ));
    }

    #[test]
    fn warm_up_shapes_and_determinism() {
        let basis = ReferenceBasis::new(3, 3, 7, NodeKind::ChebyshevLobatto, NodeKind::ChebyshevGauss)
            .unwrap();
        assert_eq!(basis.q_values().rows(), 4);
        assert_eq!(basis.q_values().cols(), 7);
        assert_eq!(basis.p_values().rows(), 4);
        assert_eq!(basis.p_values().cols(), 7);

        let again = ReferenceBasis::new(3, 3, 7, NodeKind::ChebyshevLobatto, NodeKind::ChebyshevGauss)
            .unwrap();
        assert_eq!(basis.q_values().data(), again.q_values().data());
        assert_eq!(basis.q_derivs().data(), again.q_derivs().data());
        assert_eq!(basis.p_values().data(), again.p_values().data());
        assert_eq!(basis.p_derivs().data(), again.p_derivs().data());
    }

    #[test]
    fn warm_up_supports_equidistant_18() {
        let basis =
            ReferenceBasis::new(18, 18, 37, NodeKind::Equidistant, NodeKind::Equidistant).unwrap();
        assert_eq!(basis.q_values().rows(), 19);
        assert_eq!(basis.gauss_count(), 37);
    }

    #[test]
    fn identity_mapping_reproduces_reference() {
        let basis = ReferenceBasis::new(4, 3, 8, NodeKind::ChebyshevLobatto, NodeKind::ChebyshevGauss)
            .unwrap();
        let mapped = basis.map_to_interval(-1.0, 1.0).unwrap();
        assert_eq!(mapped.q_values.data(), basis.q_values().data());
        assert_eq!(mapped.q_derivs.data(), basis.q_derivs().data());
        for j in 0..8 {
            assert_abs_diff_eq!(mapped.gauss_points[j], basis.gauss_nodes()[j], epsilon = 1e-15);
            assert_abs_diff_eq!(
                mapped.gauss_weights[j],
                basis.gauss_weights()[j],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn mapping_scales_points_weights_and_derivatives() {
        let basis = ReferenceBasis::new(3, 2, 6, NodeKind::ChebyshevLobatto, NodeKind::ChebyshevGauss)
            .unwrap();
        // Interval of length two: midpoint rule carries over.
        let mapped = basis.map_to_interval(0.0, 2.0).unwrap();
        for j in 0..6 {
            assert_abs_diff_eq!(
                mapped.gauss_points[j],
                basis.gauss_nodes()[j] + 1.0,
                epsilon = 1e-15
            );
            assert_abs_diff_eq!(
                mapped.gauss_weights[j],
                basis.gauss_weights()[j],
                epsilon = 1e-15
            );
        }
        // Interval of length four: derivatives halve.
        let mapped = basis.map_to_interval(0.0, 4.0).unwrap();
        for k in 0..4 {
            for j in 0..6 {
                assert_abs_diff_eq!(
                    mapped.q_derivs.at(k, j),
                    0.5 * basis.q_derivs().at(k, j),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn mapping_rejects_degenerate_interval() {
        let basis = ReferenceBasis::new(2, 2, 5, NodeKind::ChebyshevLobatto, NodeKind::ChebyshevGauss)
            .unwrap();
        assert!(basis.map_to_interval(1.0, 1.0).is_err());
        assert!(basis.map_to_interval(2.0, 1.0).is_err());
    }

    /// Oracle for the projection identities: solve the cardinal system from
    /// scratch on the target interval (nodes mapped affinely, standardized
    /// variable for conditioning) and compare with the projected values.
    fn direct_interval_basis(
        ref_nodes: &[f64],
        ref_gauss: &[f64],
        t_a: f64,
        t_b: f64,
    ) -> (Mat, Mat) {
        let half = 0.5 * (t_b - t_a);
        let mapped_nodes: Vec<f64> = ref_nodes.iter().map(|&u| t_a + (u + 1.0) * half).collect();
        let mapped_gauss: Vec<f64> = ref_gauss.iter().map(|&u| t_a + (u + 1.0) * half).collect();
        // Standardize back to [-1, 1] around the *target* interval so the
        // Vandermonde solve is well conditioned; the chain-rule factor
        // converts the derivative to the physical variable.
        let std_nodes: Vec<f64> = mapped_nodes.iter().map(|&t| (t - t_a) / half - 1.0).collect();
        let std_gauss: Vec<f64> = mapped_gauss.iter().map(|&t| (t - t_a) / half - 1.0).collect();
        let (values, mut derivs) = cardinal_values(&std_nodes, &std_gauss).unwrap();
        for v in derivs.data_mut() {
            *v /= half;
        }
        (values, derivs)
    }

    #[test]
    fn projection_matches_direct_interval_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let c = rng.gen_range(2..=15usize);
            let m = c - 1;
            let basis =
                ReferenceBasis::new(m, m.max(1), m + 3, NodeKind::ChebyshevLobatto, NodeKind::ChebyshevGauss)
                    .unwrap();
            let t_a = rng.gen_range(0.0..90.0);
            let t_b = t_a + rng.gen_range(0.01..10.0);
            let mapped = basis.map_to_interval(t_a, t_b).unwrap();
            let (dv, dd) = direct_interval_basis(basis.q_nodes(), basis.gauss_nodes(), t_a, t_b);
            let scale_v = dv.max_abs().max(1.0);
            let scale_d = dd.max_abs().max(1.0);
            for k in 0..c {
                for j in 0..basis.gauss_count() {
                    assert!(
                        (mapped.q_values.at(k, j) - dv.at(k, j)).abs() / scale_v < 1e-10,
                        "value mismatch at ({k}, {j})"
                    );
                    assert!(
                        (mapped.q_derivs.at(k, j) - dd.at(k, j)).abs() / scale_d < 1e-10,
                        "derivative mismatch at ({k}, {j})"
                    );
                }
            }
        }
    }

    #[test]
    fn mapped_quadrature_is_exact_for_low_degree_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in 1..=8usize {
            let basis = ReferenceBasis::new(
                1,
                0,
                g,
                NodeKind::ChebyshevLobatto,
                NodeKind::ChebyshevGauss,
            )
            .unwrap();
            for _ in 0..10 {
                let t_a = rng.gen_range(0.0..18.0);
                let t_b = t_a + rng.gen_range(0.1..2.0);
                let mapped = basis.map_to_interval(t_a, t_b).unwrap();
                let coeffs: Vec<f64> = (0..2 * g).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let poly = |t: f64| -> f64 {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, &c)| c * t.powi(k as i32))
                        .sum()
                };
                let quad: f64 = mapped
                    .gauss_points
                    .iter()
                    .zip(&mapped.gauss_weights)
                    .map(|(&x, &w)| w * poly(x))
                    .sum();
                let antideriv = |t: f64| -> f64 {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, &c)| c * t.powi(k as i32 + 1) / (k as f64 + 1.0))
                        .sum()
                };
                let exact = antideriv(t_b) - antideriv(t_a);
                let scale = exact.abs().max(1.0);
                assert!(
                    ((quad - exact) / scale).abs() < 1e-12,
                    "degree {} on [{t_a}, {t_b}]: {quad} vs {exact}",
                    2 * g - 1
                );
            }
        }
    }

    #[test]
    fn cardinality_and_sums_hold_at_gauss_points_for_all_families() {
        for kind in [
            NodeKind::Equidistant,
            NodeKind::ChebyshevLobatto,
            NodeKind::ChebyshevGauss,
        ] {
            let basis = ReferenceBasis::new(5, 5, 11, kind, kind).unwrap();
            for j in 0..11 {
                let vsum: f64 = (0..6).map(|k| basis.q_values().at(k, j)).sum();
                let dsum: f64 = (0..6).map(|k| basis.q_derivs().at(k, j)).sum();
                assert_abs_diff_eq!(vsum, 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(dsum, 0.0, epsilon = 1e-11);
            }
        }
    }
}
