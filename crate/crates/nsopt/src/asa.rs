//! Averaged Stochastic Approximation for single-level problems
//! `min_{x in X} f(x)`: the nested method specialized to an identity
//! inner map. The inner-value average disappears (it would just track
//! `x`), leaving a constrained dual-averaging scheme:
//!
//! ```text
//! y^k     = argmin_{y in X} <z^k, y - x^k> + (beta/2)||y - x^k||^2
//! x^{k+1} = x^k + tau_k (y^k - x^k)
//! z^{k+1} = (1 - a tau_k) z^k + a tau_k s^{k+1},   s^{k+1} drawn at x^k
//! ```
//!
//! In the basic regime (bounded second moments) the scheme is
//! parameter-free: any positive constant `beta` attains the `1/sqrt(N)`
//! rate, with no smoothness or noise constants consulted. Under the
//! weaker bounded-variance assumption a lower bound on `beta` applies,
//! which [`AsaParams::build_schedule`] enforces.

use rand_chacha::ChaCha8Rng;

use crate::diagnostics::TrajectoryPoint;
use crate::geometry::{eta_grad_lipschitz, optimality_measure, solve_subproblem, FeasibleSet};
use crate::nasa::schedule::{realize_taus, sample_output_index, TauSchedule, Validation};
use crate::nasa::{RunError, RunResult};
use crate::oracle::{self, Problem, RunSeed, StreamTag};
use crate::{Error, Result, Vector};

/// Which oracle assumption the configuration is validated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsaRegime {
    /// Second moments of the stochastic gradient are bounded; `beta`
    /// may be any positive constant (parameter-free).
    BoundedMoment,
    /// Only the variance is bounded; `beta` must clear a threshold
    /// built from the smoothness constants.
    BoundedVariance,
}

#[derive(Debug, Clone)]
pub struct AsaParams {
    /// Averaging gain `a`.
    pub gain: f64,
    pub beta: f64,
    pub iterations: usize,
    pub taus: TauSchedule,
    pub regime: AsaRegime,
    pub diagnostics: bool,
}

impl AsaParams {
    /// Parameter-free defaults: unit gain, `beta = 1`, the `1/sqrt(N)`
    /// schedule, validated under the bounded-moment regime.
    pub fn parameter_free(iterations: usize) -> Self {
        AsaParams {
            gain: 1.0,
            beta: 1.0,
            iterations,
            taus: TauSchedule::SqrtHorizon,
            regime: AsaRegime::BoundedMoment,
            diagnostics: false,
        }
    }

    pub fn with_diagnostics(mut self) -> Self {
        self.diagnostics = true;
        self
    }

    pub fn build_schedule(&self, spec: &crate::oracle::OracleSpec) -> Result<AsaSchedule> {
        if !(self.beta > 0.0) {
            return Err(Error::invalid(format!(
                "regularization must be positive, got {}",
                self.beta
            )));
        }
        let taus = realize_taus(self.gain, self.iterations, &self.taus)?;
        let validation = match self.regime {
            AsaRegime::BoundedMoment => Validation::ParameterFree,
            AsaRegime::BoundedVariance => {
                let lip = spec.lipschitz.as_ref().ok_or_else(|| {
                    Error::invalid(
                        "the bounded-variance regime needs declared smoothness constants",
                    )
                })?;
                let minimum = variance_regime_minimum(self.beta, lip.grad_f);
                if self.beta < minimum {
                    return Err(Error::invalid(format!(
                        "regularization {} below the bounded-variance threshold {minimum:.6}",
                        self.beta
                    )));
                }
                Validation::ThresholdChecked { minimum }
            }
        };
        Ok(AsaSchedule {
            taus,
            beta: self.beta,
            gain: self.gain,
            validation,
        })
    }
}

/// Lower bound on `beta` in the bounded-variance regime:
/// `2 (3 L_{grad f} + L_{grad eta} + c_hat L_{grad eta} L_{grad f}^2) / 3`
/// with `c_hat = 1` (the tail-weight constant of the constant-stepsize
/// schedule). The subproblem constant is evaluated at the candidate
/// `beta` itself.
pub fn variance_regime_minimum(beta: f64, l_grad_f: f64) -> f64 {
    let l_eta = eta_grad_lipschitz(beta);
    2.0 * (3.0 * l_grad_f + l_eta + l_eta * l_grad_f * l_grad_f) / 3.0
}

#[derive(Debug, Clone)]
pub struct AsaSchedule {
    pub taus: Vec<f64>,
    pub beta: f64,
    pub gain: f64,
    pub validation: Validation,
}

/// Solver pair `(x, z)` plus the last subproblem solution.
#[derive(Debug, Clone)]
pub struct AsaState {
    pub iter: usize,
    pub x: Vector,
    pub grad_avg: Vector,
    pub proposal: Vector,
    pub direction: Vector,
}

impl AsaState {
    pub fn initial(x0: Vector, z0: Vector) -> Self {
        let proposal = x0.clone();
        let direction = Vector::zeros(x0.len());
        AsaState {
            iter: 0,
            x: x0,
            grad_avg: z0,
            proposal,
            direction,
        }
    }
}

/// One iteration. The gradient sample is drawn at the current iterate,
/// so the caller passes it in directly.
pub fn asa_step(
    set: &FeasibleSet,
    state: &AsaState,
    outer_grad_sample: &Vector,
    tau: f64,
    beta: f64,
    gain: f64,
) -> Result<AsaState> {
    if !(gain > 0.0) {
        return Err(Error::invalid("averaging gain must be positive"));
    }
    if !(tau > 0.0 && tau <= 1.0 / gain * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("stepsize {tau} outside (0, 1/gain]")));
    }
    if outer_grad_sample.len() != state.x.len() {
        return Err(Error::DimensionMismatch {
            expected: state.x.len(),
            actual: outer_grad_sample.len(),
        });
    }
    let sub = solve_subproblem(set, &state.x, &state.grad_avg, beta)?;
    let x_next = &state.x + &sub.d * tau;
    let weight = gain * tau;
    let grad_avg = &state.grad_avg * (1.0 - weight) + outer_grad_sample * weight;
    if !x_next.iter().all(|v| v.is_finite()) || !grad_avg.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: state.iter,
            quantity: "iterate or gradient average",
        });
    }
    Ok(AsaState {
        iter: state.iter + 1,
        x: x_next,
        grad_avg,
        proposal: sub.y,
        direction: sub.d,
    })
}

/// Run on a single-level problem (the inner map must be the identity;
/// nested problems belong to the nested solver). Returns the same
/// result shape as the nested run, with the value average standing in
/// for the iterate itself.
pub fn asa_run<P: Problem + ?Sized>(
    problem: &P,
    params: &AsaParams,
    seed: RunSeed,
) -> std::result::Result<RunResult, RunError> {
    let start_err = |error: Error| RunError {
        error,
        iterations_completed: 0,
        partial_trajectory: Vec::new(),
    };
    if !problem.identity_inner() {
        return Err(start_err(Error::invalid(
            "single-level solver requires an identity inner map; use the nested solver instead",
        )));
    }
    let spec = problem.oracle_spec();
    spec.validate().map_err(start_err)?;
    let sched = params.build_schedule(&spec).map_err(start_err)?;
    let set = problem.feasible_set();
    let x0 = problem.initial_point();
    if !set.contains(&x0).map_err(start_err)? {
        return Err(start_err(Error::Infeasible {
            distance: set.distance(&x0).unwrap_or(f64::NAN),
        }));
    }

    let mut output_rng: ChaCha8Rng = oracle::stream_rng(seed, 0, StreamTag::OutputIndex);
    let output_index = sample_output_index(&sched.taus, &mut output_rng).map_err(start_err)?;

    let f_star = problem.optimal_value();
    let mut state = AsaState::initial(x0, Vector::zeros(problem.inner_dim()));
    let mut trajectory = Vec::with_capacity(if params.diagnostics { params.iterations } else { 0 });
    let mut snapshot: Option<(Vector, Vector)> = None;

    for k in 0..params.iterations {
        let tau = sched.taus[k];
        let pre = if params.diagnostics { Some(state.clone()) } else { None };
        let mut rng = oracle::stream_rng(seed, (k + 1) as u64, StreamTag::OuterGrad);
        let grad_sample = problem.sample_outer_grad(&state.x, &mut rng);
        state = match asa_step(set, &state, &grad_sample, tau, sched.beta, sched.gain) {
            Ok(next) => next,
            Err(error) => {
                return Err(RunError {
                    error,
                    iterations_completed: k,
                    partial_trajectory: trajectory,
                })
            }
        };
        if let Some(pre) = pre {
            let grad_true = problem.outer_grad(&pre.x);
            let eta = pre.grad_avg.dot(&state.direction)
                + 0.5 * sched.beta * state.direction.norm_squared();
            let w = match f_star {
                Some(fs) => crate::diagnostics::merit_from_parts(
                    sched.gain,
                    problem.objective(&pre.x) - fs,
                    eta,
                    0.0,
                    0.0,
                ),
                None => f64::NAN,
            };
            let v = optimality_measure(set, &pre.x, &pre.grad_avg, &grad_true).unwrap_or(f64::NAN);
            trajectory.push(TrajectoryPoint {
                iter: k,
                tau,
                v,
                d_sq: state.direction.norm_squared(),
                g_gap_sq: 0.0,
                w,
                z_err_sq: (&pre.grad_avg - &grad_true).norm_squared(),
                z_step_sq: (&state.grad_avg - &pre.grad_avg).norm_squared(),
            });
        }
        if state.iter == output_index {
            snapshot = Some((state.x.clone(), state.grad_avg.clone()));
        }
    }

    let (x, grad_avg) = snapshot.expect("output index lies within the executed iterations");
    Ok(RunResult {
        output_index,
        value_avg: x.clone(), // the inner value is the iterate itself
        x,
        grad_avg,
        trajectory,
        seed,
        beta: sched.beta,
        iterations: params.iterations,
        validation: sched.validation,
    })
}
