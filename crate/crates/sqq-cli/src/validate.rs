//! `sqq validate`: a condensed invariant suite runnable from the command
//! line. Each check prints one PASS/FAIL line; any failure flips the exit
//! code to the numerical-failure status.

use sqq_core::basis::{NodeKind, ReferenceBasis};
use sqq_core::driver::{Integrator, RunSettings, VariantName};
use sqq_core::model::{kepler_model, PhaseState};
use sqq_core::sigma::{bound_value, SigmaConfig, SigmaKind, SigmaScratch};
use sqq_core::solver::{broyden_update, BroydenScratch};
use sqq_core::step::{discrete_action, residual, unknown_count, StepContext, StepScratch};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

/// Deterministic low-discrepancy sequence in [0, 1); enough randomness for
/// spot checks without any RNG dependency.
fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index + 1;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn action_gradient_check(transformed: bool) -> CheckResult {
    let name = if transformed {
        "action-gradient consistency (transformed mode)"
    } else {
        "action-gradient consistency (fixed mode)"
    };
    let (model, state) = kepler_model(0.5).unwrap();
    let cfg = SigmaConfig::new(SigmaKind::Energy, 1e-6, 1e2, -0.5).unwrap();
    let m = 4;
    let n = 3;
    let reference =
        ReferenceBasis::new(m, n, m + n + 1, NodeKind::ChebyshevLobatto, NodeKind::ChebyshevGauss)
            .unwrap();
    let basis = reference.map_to_interval(0.0, 0.08).unwrap();
    let sigma = if transformed { Some(&cfg) } else { None };

    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let ctx = StepContext {
            basis: &basis,
            model: &model,
            sigma,
            q_in: &state.q,
            p_in: &state.p,
        };
        let len = unknown_count(2, m, n);
        let mut x = vec![0.0; len];
        let mut scratch = StepScratch::new(2, basis.gauss_count());
        sqq_core::step::initial_guess(&ctx, &mut x, &mut scratch).unwrap();
        for (i, v) in x.iter_mut().enumerate() {
            *v += 0.05 * (halton(trial * len + i, 2) - 0.5);
        }
        let mut res = vec![0.0; len];
        residual(&ctx, &x, &mut res, &mut scratch).unwrap();

        // Spot-check the interior coordinate blocks and momentum blocks
        // against central differences of the action.
        let h = 1e-7;
        let d = 2;
        let fd_at = |idx: usize, scratch: &mut StepScratch| -> f64 {
            let mut xp = x.clone();
            xp[idx] += h;
            let fp = discrete_action(&ctx, &xp, scratch).unwrap();
            xp[idx] -= 2.0 * h;
            let fm = discrete_action(&ctx, &xp, scratch).unwrap();
            (fp - fm) / (2.0 * h)
        };
        for i in 1..m {
            for a in 0..d {
                let fd = fd_at((i - 1) * d + a, &mut scratch);
                worst = worst.max((res[i * d + a] - fd).abs());
            }
        }
        for i in 0..=n {
            for a in 0..d {
                let fd = fd_at((m + i) * d + a, &mut scratch);
                worst = worst.max((res[(m + i) * d + a] - fd).abs());
            }
        }
    }
    check(
        name,
        worst <= 1e-5,
        format!("max |residual - FD(action)| = {worst:.3e} (tolerance 1e-5)"),
    )
}

fn projection_check() -> CheckResult {
    // Projection against a per-step rebuild: identical trajectories.
    let (model, state) = kepler_model(0.5).unwrap();
    let mut with = RunSettings::new(VariantName::SqqP, 5, 5, 0.2);
    with.use_projection = Some(true);
    let mut without = with.clone();
    without.use_projection = Some(false);
    let mut a = Integrator::new(&model, state.clone(), with).unwrap();
    let mut b = Integrator::new(&model, state, without).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        a.step().unwrap();
        b.step().unwrap();
        for i in 0..2 {
            worst = worst.max((a.state().q[i] - b.state().q[i]).abs());
            worst = worst.max((a.state().p[i] - b.state().p[i]).abs());
        }
    }
    check(
        "projection equals per-step basis rebuild",
        worst <= 1e-12,
        format!("max state difference over 5 steps = {worst:.3e} (tolerance 1e-12)"),
    )
}

fn symplecticity_check() -> CheckResult {
    let (model, state) = kepler_model(0.5).unwrap();
    let h = 1e-6;
    let mut settings = RunSettings::new(VariantName::SqqP, 5, 5, 0.1);
    settings.solver_epsilon = 1e-13;
    let step_map = |q0: &[f64], p0: &[f64]| -> Vec<f64> {
        let st = PhaseState::new(q0.to_vec(), p0.to_vec(), 0.0).unwrap();
        let mut integ = Integrator::new(&model, st, settings.clone()).unwrap();
        integ.step().unwrap();
        let mut out = integ.state().q.clone();
        out.extend_from_slice(&integ.state().p);
        out
    };
    let mut jac = [[0.0f64; 4]; 4];
    for col in 0..4 {
        let mut qp = state.q.clone();
        let mut pp = state.p.clone();
        let mut qm = state.q.clone();
        let mut pm = state.p.clone();
        if col < 2 {
            qp[col] += h;
            qm[col] -= h;
        } else {
            pp[col - 2] += h;
            pm[col - 2] -= h;
        }
        let fp = step_map(&qp, &pp);
        let fm = step_map(&qm, &pm);
        for row in 0..4 {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    let mut j = [[0.0f64; 4]; 4];
    j[0][2] = 1.0;
    j[1][3] = 1.0;
    j[2][0] = -1.0;
    j[3][1] = -1.0;
    let mut err: f64 = 0.0;
    for i in 0..4 {
        for k in 0..4 {
            let mut s = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    s += jac[a][i] * j[a][b] * jac[b][k];
                }
            }
            err = err.max((s - j[i][k]).abs());
        }
    }
    check(
        "symplecticity of the step map",
        err <= 1e-5,
        format!("|D^T J D - J|_inf = {err:.3e} (tolerance 1e-5)"),
    )
}

fn broyden_check() -> CheckResult {
    let n = 8;
    let mut j_inv = sqq_core::linalg::Mat::identity(n);
    let mut scratch = BroydenScratch::new(n);
    let mut worst: f64 = 0.0;
    for trial in 0..40 {
        let s: Vec<f64> = (0..n).map(|i| halton(trial * n + i, 2) - 0.5).collect();
        let y: Vec<f64> = (0..n).map(|i| halton(trial * n + i, 3) - 0.5).collect();
        if broyden_update(&mut j_inv, &s, &y, 1e-14, &mut scratch).is_err() {
            continue;
        }
        let mut jy = vec![0.0; n];
        j_inv.matvec(&y, &mut jy);
        let scale: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
        for i in 0..n {
            worst = worst.max((jy[i] - s[i]).abs() / scale);
        }
    }
    check(
        "Broyden inverse secant condition",
        worst <= 1e-12,
        format!("max relative violation = {worst:.3e} (tolerance 1e-12)"),
    )
}

fn sigma_check() -> CheckResult {
    let (model, _) = kepler_model(0.5).unwrap();
    let cfg = SigmaConfig::new(SigmaKind::Energy, 1e-6, 1e2, -0.5).unwrap();
    let a = 1e-6;
    let b = 1e2;
    let lo = a * b / (a + b);
    let mut scratch = SigmaScratch::new(2);
    let mut ok = true;
    let mut detail = String::from("bounds and FD gradient hold");
    for trial in 0..200 {
        let v = 1e4 * halton(trial, 2);
        let s = bound_value(v, a, b);
        if !(s >= lo && s < b) {
            ok = false;
            detail = format!("bound violated: {s}");
            break;
        }
        let q = [0.3 + 1.2 * halton(trial, 3), halton(trial, 5) - 0.5];
        if cfg.effective(&model, &q, &mut scratch).is_err() {
            continue;
        }
        let mut grad = [0.0; 2];
        cfg.gradient(&model, &q, &mut grad, &mut scratch).unwrap();
        let h = 1e-7;
        for i in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[i] += h;
            qm[i] -= h;
            let fd = (cfg.effective(&model, &qp, &mut scratch).unwrap()
                - cfg.effective(&model, &qm, &mut scratch).unwrap())
                / (2.0 * h);
            if (grad[i] - fd).abs() > 1e-5 {
                ok = false;
                detail = format!("gradient mismatch {:.3e}", (grad[i] - fd).abs());
            }
        }
    }
    check("step-size control bounds and gradient", ok, detail)
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        action_gradient_check(false),
        action_gradient_check(true),
        projection_check(),
        symplecticity_check(),
        broyden_check(),
        sigma_check(),
    ]
}
