//! Ground-truth instrumentation: merit (Lyapunov) functions, the
//! per-iteration descent ledger, schedule tail-weight checks,
//! finite-difference gradient verification and rate-slope estimation.
//!
//! Everything here consumes analytic problem data and recorded
//! trajectories; nothing feeds back into the solvers.

use crate::geometry::{eta_grad_lipschitz, solve_subproblem};
use crate::nasa::schedule::{auto_regularization, gamma_sequence};
use crate::oracle::{LipschitzInfo, Problem};
use crate::{Error, Result, Vector};

/// Per-iteration diagnostic record. Quantities `v`, `w`, `g_gap_sq` and
/// `z_err_sq` are evaluated at iterate `k`; `d_sq` and `z_step_sq`
/// belong to the step taken from iterate `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub tau: f64,
    /// Optimality measure `V(x^k, z^k)`.
    pub v: f64,
    /// Squared step norm `||y^k - x^k||^2`.
    pub d_sq: f64,
    /// Inner-value tracking error `||g(x^k) - u^k||^2`.
    pub g_gap_sq: f64,
    /// Merit value `W(x^k, z^k, u^k)` (NaN when the optimum is unknown).
    pub w: f64,
    /// Gradient tracking error `||z^k - grad F(x^k)||^2`.
    pub z_err_sq: f64,
    /// `||z^{k+1} - z^k||^2`, consumed by the descent ledger.
    pub z_step_sq: f64,
}

/// Constant bundle entering the merit function and the descent ledger.
#[derive(Debug, Clone, Copy)]
pub struct MeritConstants {
    pub gain_grad: f64,
    pub gain_value: f64,
    pub gamma: f64,
    pub c: f64,
    pub beta: f64,
    /// Lipschitz constant of the composite gradient.
    pub l_composite_grad: f64,
    /// Lipschitz constant of the subproblem value's gradient at `beta`.
    pub l_eta_grad: f64,
    pub l_g: f64,
    pub l_grad_f: f64,
    pub f_star: Option<f64>,
}

impl MeritConstants {
    /// Unit-gain defaults: `a = b = 1`, `gamma = 4c = alpha * L_{grad f}`
    /// and the matching constant regularization, under which the
    /// compatibility condition holds with equality.
    pub fn paper_defaults(alpha: f64, lip: &LipschitzInfo, f_star: Option<f64>) -> Result<Self> {
        let beta = auto_regularization(alpha, lip)?;
        Self::with_gains(1.0, 1.0, alpha, beta, lip, f_star)
    }

    /// General construction; verifies the compatibility condition
    /// `2(a*beta - c)(gamma*b - 2c) >= L_g^2 (a L_{grad f} + gamma)^2`
    /// with `gamma = 4c = alpha * L_{grad f}`.
    pub fn with_gains(
        gain_grad: f64,
        gain_value: f64,
        alpha: f64,
        beta: f64,
        lip: &LipschitzInfo,
        f_star: Option<f64>,
    ) -> Result<Self> {
        if !(gain_grad > 0.0 && gain_value > 0.0 && alpha > 0.0 && beta > 0.0) {
            return Err(Error::invalid("gains, alpha and beta must be positive"));
        }
        lip.validate()?;
        let gamma = alpha * lip.grad_f;
        let c = 0.25 * gamma;
        let lhs = 2.0 * (gain_grad * beta - c) * (gamma * gain_value - 2.0 * c);
        let rhs = (lip.g * (gain_grad * lip.grad_f + gamma)).powi(2);
        if lhs < rhs * (1.0 - 1e-9) {
            return Err(Error::invalid(format!(
                "compatibility condition violated: {lhs} < {rhs}"
            )));
        }
        Ok(MeritConstants {
            gain_grad,
            gain_value,
            gamma,
            c,
            beta,
            l_composite_grad: lip.composite_grad(),
            l_eta_grad: eta_grad_lipschitz(beta),
            l_g: lip.g,
            l_grad_f: lip.grad_f,
            f_star,
        })
    }
}

/// `W = a * f_gap - eta + (gamma/2) * g_gap_sq`, the raw arithmetic
/// shared by both merit functions.
pub fn merit_from_parts(gain_grad: f64, f_gap: f64, eta: f64, gamma: f64, g_gap_sq: f64) -> f64 {
    gain_grad * f_gap - eta + 0.5 * gamma * g_gap_sq
}

/// Nested merit `W(x, z, u) = a (F(x) - F*) - eta(x, z) + (gamma/2) ||g(x) - u||^2`.
/// Nonnegative whenever `F*` is the optimum (or any certified lower bound).
pub fn merit_nasa<P: Problem + ?Sized>(
    problem: &P,
    consts: &MeritConstants,
    x: &Vector,
    z: &Vector,
    u: &Vector,
) -> Result<f64> {
    let f_star = consts
        .f_star
        .ok_or_else(|| Error::DiagnosticUnavailable("merit needs the optimal value".into()))?;
    let sub = solve_subproblem(problem.feasible_set(), x, z, consts.beta)?;
    let g_gap_sq = (problem.inner_value(x) - u).norm_squared();
    Ok(merit_from_parts(
        consts.gain_grad,
        problem.objective(x) - f_star,
        sub.eta,
        consts.gamma,
        g_gap_sq,
    ))
}

/// Single-level merit `W(x, z) = a (f(x) - f*) - eta(x, z)`: the nested
/// merit with the value-tracking term dropped.
pub fn merit_asa<P: Problem + ?Sized>(
    problem: &P,
    consts: &MeritConstants,
    x: &Vector,
    z: &Vector,
) -> Result<f64> {
    let f_star = consts
        .f_star
        .ok_or_else(|| Error::DiagnosticUnavailable("merit needs the optimal value".into()))?;
    let sub = solve_subproblem(problem.feasible_set(), x, z, consts.beta)?;
    Ok(merit_from_parts(
        consts.gain_grad,
        problem.objective(x) - f_star,
        sub.eta,
        consts.gamma,
        0.0,
    ))
}

/// One row of the descent ledger.
#[derive(Debug, Clone, Copy)]
pub struct LedgerEntry {
    pub iter: usize,
    pub d_sq: f64,
    pub g_gap_sq: f64,
    pub w: f64,
    pub r: f64,
    pub v: f64,
}

#[derive(Debug, Clone)]
pub struct LedgerReport {
    pub entries: Vec<LedgerEntry>,
    /// Relative slack of the telescoped inequality at every prefix.
    pub prefix_slack: Vec<f64>,
    pub min_slack: f64,
    /// Prefix length attaining the minimum slack (1-based).
    pub worst_prefix: usize,
    pub pass: bool,
}

/// Relative slack below which the ledger counts as violated.
pub const LEDGER_SLACK_TOL: f64 = -1e-8;

/// Verify the telescoped descent inequality
///
/// ```text
/// c * sum_{k<N} tau_k (||d^k||^2 + ||g(x^k) - u^k||^2)
///     <= W(x^0, z^0, u^0) + sum_{k<N} r^{k+1}
/// ```
///
/// at every prefix `N >= 1` of a recorded trajectory. Intended for
/// deterministic (zero-noise) runs, where the sampling residuals inside
/// `r^{k+1}` vanish and the remainder
///
/// ```text
/// r^{k+1} = (tau_k^2/2) [a L_{grad F} + L_{grad eta} + gamma L_g^2
///           + 2 a L_g^2 L_{grad f}] ||d^k||^2
///           + (L_{grad eta}/2) ||z^{k+1} - z^k||^2
/// ```
///
/// is computable exactly from the recorded rows. With noise the
/// inequality holds only in conditional expectation, so no almost-sure
/// check is meaningful there.
pub fn ledger_check(trajectory: &[TrajectoryPoint], consts: &MeritConstants) -> Result<LedgerReport> {
    if trajectory.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    if trajectory[0].w.is_nan() {
        return Err(Error::DiagnosticUnavailable(
            "ledger needs merit values along the trajectory".into(),
        ));
    }
    let d_coeff = consts.gain_grad * consts.l_composite_grad
        + consts.l_eta_grad
        + consts.gamma * consts.l_g * consts.l_g
        + 2.0 * consts.gain_grad * consts.l_g * consts.l_g * consts.l_grad_f;

    let w0 = trajectory[0].w;
    let mut lhs = 0.0;
    let mut rhs = w0;
    let mut entries = Vec::with_capacity(trajectory.len());
    let mut prefix_slack = Vec::with_capacity(trajectory.len());
    let mut min_slack = f64::INFINITY;
    let mut worst_prefix = 1;
    for (i, p) in trajectory.iter().enumerate() {
        let r = 0.5 * p.tau * p.tau * d_coeff * p.d_sq + 0.5 * consts.l_eta_grad * p.z_step_sq;
        lhs += consts.c * p.tau * (p.d_sq + p.g_gap_sq);
        rhs += r;
        let slack = (rhs - lhs) / rhs.abs().max(1.0);
        if slack < min_slack {
            min_slack = slack;
            worst_prefix = i + 1;
        }
        prefix_slack.push(slack);
        entries.push(LedgerEntry {
            iter: p.iter,
            d_sq: p.d_sq,
            g_gap_sq: p.g_gap_sq,
            w: p.w,
            r,
            v: p.v,
        });
    }
    Ok(LedgerReport {
        entries,
        prefix_slack,
        min_slack,
        worst_prefix,
        pass: min_slack >= LEDGER_SLACK_TOL,
    })
}

/// Least-squares slope of `log(mean_v)` against `log(n)`. The
/// `1/sqrt(N)` convergence theory predicts a value near `-1/2`.
pub fn slope_estimate(points: &[(f64, f64)]) -> Result<f64> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid("slope fit needs at least 3 distinct sizes"));
    }
    if points.iter().any(|&(n, v)| n <= 0.0 || v <= 0.0 || !n.is_finite() || !v.is_finite()) {
        return Err(Error::invalid("slope fit needs positive finite points"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / count;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in logs {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    Ok(cov / var)
}

#[derive(Debug, Clone)]
pub struct FiniteDiffReport {
    pub max_rel_error: f64,
    pub per_point: Vec<f64>,
}

/// Compare the analytic composite gradient with central finite
/// differences of the objective at the given points.
pub fn finite_diff_check<P: Problem + ?Sized>(
    problem: &P,
    points: &[Vector],
    step: f64,
) -> Result<FiniteDiffReport> {
    if !(step > 1e-8 && step < 1e-2) {
        return Err(Error::invalid("finite-difference step outside (1e-8, 1e-2)"));
    }
    if points.is_empty() {
        return Err(Error::invalid("no evaluation points"));
    }
    let mut per_point = Vec::with_capacity(points.len());
    let mut max_rel_error = 0.0f64;
    for x in points {
        let grad = problem.objective_grad(x);
        let mut fd = Vector::zeros(x.len());
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            fd[i] = (problem.objective(&xp) - problem.objective(&xm)) / (2.0 * step);
        }
        let rel = (fd - &grad).norm() / grad.norm().max(1.0);
        max_rel_error = max_rel_error.max(rel);
        per_point.push(rel);
    }
    Ok(FiniteDiffReport {
        max_rel_error,
        per_point,
    })
}

/// Check the schedule tail-weight condition
/// `sum_{i=k+1}^{N} tau_i Gamma_i <= c_bar * Gamma_{k+1}` for every
/// `k >= 0`, where the slice covers `tau_0 ..= tau_N` (one entry past
/// the final step so the top index exists).
pub fn tail_weight_check(gain: f64, taus: &[f64], c_bar: f64) -> Result<bool> {
    if taus.len() < 2 {
        return Err(Error::invalid("tail-weight check needs at least two stepsizes"));
    }
    let gammas = gamma_sequence(gain, taus)?; // gammas[k-1] = Gamma_k
    let top = taus.len() - 1; // index N
    for k in 0..top {
        // sum_{i=k+1}^{N} tau_i * Gamma_i
        let tail: f64 = (k + 1..=top).map(|i| taus[i] * gammas[i - 1]).sum();
        if tail > c_bar * gammas[k] + 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nasa::schedule::{realize_taus, TauSchedule};
    use crate::oracle::Problem;
    use crate::problems::{SingleLevelQuadratic, SyntheticQuadratic};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn merit_arithmetic_reference() {
        // a = 1, f_gap = 2, eta = -0.5, gamma = 1, g_gap_sq = 4 -> 4.5
        assert_relative_eq!(merit_from_parts(1.0, 2.0, -0.5, 1.0, 4.0), 4.5);
    }

    #[test]
    fn merit_vanishes_at_stationary_triple() {
        let p = SyntheticQuadratic::well_conditioned(6, 0.0, 17);
        let lip = p.oracle_spec().lipschitz.unwrap();
        let consts = MeritConstants::paper_defaults(1.0, &lip, p.optimal_value()).unwrap();
        let x = p.minimizer().unwrap();
        let z = p.objective_grad(&x);
        let u = p.inner_value(&x);
        let w = merit_nasa(&p, &consts, &x, &z, &u).unwrap();
        assert!(w.abs() < 1e-20, "merit at stationary triple: {w}");
    }

    #[test]
    fn merit_nonnegative_on_random_triples() {
        let p = SyntheticQuadratic::random(8, 5, 0.0, 23);
        let lip = p.oracle_spec().lipschitz.unwrap();
        let consts = MeritConstants::paper_defaults(1.0, &lip, p.optimal_value()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let x = p
                .feasible_set()
                .project(&Vector::from_fn(8, |_, _| rng.random_range(-3.0..3.0)))
                .unwrap();
            let z = Vector::from_fn(8, |_, _| rng.random_range(-3.0..3.0));
            let u = Vector::from_fn(5, |_, _| rng.random_range(-3.0..3.0));
            let w = merit_nasa(&p, &consts, &x, &z, &u).unwrap();
            assert!(w >= 0.0, "negative merit {w}");
        }
    }

    #[test]
    fn merit_requires_optimum() {
        let p = SyntheticQuadratic::random(4, 3, 0.0, 2);
        let lip = p.oracle_spec().lipschitz.unwrap();
        let consts = MeritConstants::paper_defaults(1.0, &lip, None).unwrap();
        let x = p.initial_point();
        let z = Vector::zeros(4);
        let u = Vector::zeros(3);
        assert!(matches!(
            merit_nasa(&p, &consts, &x, &z, &u),
            Err(Error::DiagnosticUnavailable(_))
        ));
    }

    #[test]
    fn single_level_merit_is_nested_merit_with_identity_inner_map() {
        let p = SingleLevelQuadratic::random(6, 0.0, 31);
        let lip = p.oracle_spec().lipschitz.unwrap();
        let consts = MeritConstants::paper_defaults(1.0, &lip, p.optimal_value()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = p
                .feasible_set()
                .project(&Vector::from_fn(6, |_, _| rng.random_range(-2.0..2.0)))
                .unwrap();
            let z = Vector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
            // with u = x the value-tracking term vanishes identically
            let nested = merit_nasa(&p, &consts, &x, &z, &x).unwrap();
            let single = merit_asa(&p, &consts, &x, &z).unwrap();
            assert_relative_eq!(nested, single, epsilon = 1e-14);
        }
    }

    #[test]
    fn slope_estimate_recovers_synthetic_rates() {
        let half: Vec<(f64, f64)> = [100.0f64, 1000.0, 10_000.0, 100_000.0]
            .iter()
            .map(|&n| (n, 3.0 / n.sqrt()))
            .collect();
        assert_relative_eq!(slope_estimate(&half).unwrap(), -0.5, epsilon = 1e-12);

        let flat: Vec<(f64, f64)> = [100.0, 1000.0, 10_000.0]
            .iter()
            .map(|&n| (n, 0.7))
            .collect();
        assert_relative_eq!(slope_estimate(&flat).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn slope_estimate_rejects_degenerate_inputs() {
        assert!(slope_estimate(&[(100.0, 1.0), (1000.0, 0.5)]).is_err());
        assert!(slope_estimate(&[(100.0, 1.0), (100.0, 0.9), (100.0, 0.8)]).is_err());
        assert!(slope_estimate(&[(100.0, 1.0), (1000.0, 0.0), (10_000.0, 0.1)]).is_err());
    }

    #[test]
    fn finite_diff_exact_on_quadratic() {
        let p = SyntheticQuadratic::random(6, 4, 0.0, 41);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Vector> = (0..20)
            .map(|_| {
                p.feasible_set()
                    .project(&Vector::from_fn(6, |_, _| rng.random_range(-1.0..1.0)))
                    .unwrap()
            })
            .collect();
        let report = finite_diff_check(&p, &points, 1e-5).unwrap();
        assert!(report.max_rel_error < 1e-8, "rel error {}", report.max_rel_error);
    }

    #[test]
    fn finite_diff_rejects_bad_step() {
        let p = SyntheticQuadratic::random(3, 2, 0.0, 43);
        let pts = vec![p.initial_point()];
        assert!(finite_diff_check(&p, &pts, 1e-9).is_err());
        assert!(finite_diff_check(&p, &pts, 0.5).is_err());
    }

    #[test]
    fn ledger_holds_on_single_step_prefix() {
        // N = 1 with tau_0 = 1/a reduces to
        // c tau_0 (||d^0||^2 + ||g(x^0) - u^0||^2) <= W^0 + r^1
        let p = SyntheticQuadratic::random(6, 4, 0.0, 51);
        let lip = p.oracle_spec().lipschitz.unwrap();
        let consts = MeritConstants::paper_defaults(1.0, &lip, p.optimal_value()).unwrap();
        let params = crate::nasa::NasaParams::standard(4).with_diagnostics();
        let run = crate::nasa::nasa_run(&p, &params, crate::oracle::RunSeed::new(3, 0)).unwrap();
        let head = &run.trajectory[..1];
        let report = ledger_check(head, &consts).unwrap();
        let t = &run.trajectory[0];
        let d_coeff = consts.gain_grad * consts.l_composite_grad
            + consts.l_eta_grad
            + consts.gamma * consts.l_g * consts.l_g
            + 2.0 * consts.gain_grad * consts.l_g * consts.l_g * consts.l_grad_f;
        let lhs = consts.c * t.tau * (t.d_sq + t.g_gap_sq);
        let rhs = t.w + 0.5 * t.tau * t.tau * d_coeff * t.d_sq + 0.5 * consts.l_eta_grad * t.z_step_sq;
        assert!(lhs <= rhs + 1e-12);
        assert!(report.pass);
        assert_relative_eq!(
            report.prefix_slack[0],
            (rhs - lhs) / rhs.abs().max(1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ledger_trivial_at_stationary_start() {
        // x^0 stationary, z^0 = grad F(x^0), u^0 = g(x^0), zero noise:
        // the run never moves and every ledger term is exactly zero.
        let p = SyntheticQuadratic::well_conditioned(6, 0.0, 53);
        let lip = p.oracle_spec().lipschitz.unwrap();
        let consts = MeritConstants::paper_defaults(1.0, &lip, p.optimal_value()).unwrap();
        let x0 = p.minimizer().unwrap();
        let z0 = p.objective_grad(&x0);
        let u0 = p.inner_value(&x0);
        let params = crate::nasa::NasaParams::standard(50).with_diagnostics();
        let run = crate::nasa::nasa_run_from(&p, &params, crate::oracle::RunSeed::new(5, 0), x0, z0, u0)
            .unwrap();
        let report = ledger_check(&run.trajectory, &consts).unwrap();
        assert!(report.pass);
        for entry in &report.entries {
            assert!(entry.d_sq.abs() < 1e-24);
            assert!(entry.g_gap_sq.abs() < 1e-24);
            assert!(entry.w.abs() < 1e-20);
            assert!(entry.r.abs() < 1e-20);
        }
    }

    #[test]
    fn tail_weights_bounded_for_sqrt_horizon_schedule() {
        for n in [16usize, 100, 1024] {
            let mut taus = realize_taus(1.0, n, &TauSchedule::SqrtHorizon).unwrap();
            taus.push(*taus.last().unwrap()); // extend to index N
            assert!(
                tail_weight_check(1.0, &taus, 1.0).unwrap(),
                "tail-weight condition failed at N = {n}"
            );
        }
    }
}
