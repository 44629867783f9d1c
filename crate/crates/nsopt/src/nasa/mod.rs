//! Nested Averaged Stochastic Approximation: a single time-scale
//! projected method for `min_{x in X} f(g(x))` driven by one stepsize
//! sequence. Each iteration solves the regularized direction
//! subproblem, moves the iterate by `tau_k` along the resulting
//! direction, then refreshes two running averages from one oracle call:
//!
//! ```text
//! x^{k+1} = x^k + tau_k (y^k - x^k)
//! z^{k+1} = (1 - a tau_k) z^k + a tau_k J^T s      (gradient tracker)
//! u^{k+1} = (1 - b tau_k) u^k + b tau_k G          (inner-value tracker)
//! ```
//!
//! The value and Jacobian are sampled at `x^{k+1}` (formed before the
//! oracle call), the outer gradient at `u^k`. The returned iterate is
//! drawn by the randomized output rule `P[R = k] ~ tau_k`.

pub mod schedule;

use rand_chacha::ChaCha8Rng;

use crate::diagnostics::TrajectoryPoint;
use crate::geometry::{optimality_measure, solve_subproblem, FeasibleSet};
use crate::oracle::{self, OracleSample, OracleSpec, Problem, RunSeed, StreamTag};
use crate::{Error, Result, Vector};
use schedule::{
    realize_taus, sample_output_index, auto_regularization, TauSchedule, Validation,
};

/// How the constant regularization coefficient is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaRule {
    /// `beta = ((1+alpha)^2/alpha * L_g^2 + alpha/4) * L_{grad f}`;
    /// requires unit gains and declared smoothness constants.
    Auto,
    /// Caller-supplied positive constant.
    Fixed(f64),
}

/// Solver configuration. `alpha` parameterizes both the automatic
/// regularization and the compatibility check
/// (`gamma = 4c = alpha * L_{grad f}`).
#[derive(Debug, Clone)]
pub struct NasaParams {
    /// Gradient-average gain `a`.
    pub gain_grad: f64,
    /// Value-average gain `b`.
    pub gain_value: f64,
    pub alpha: f64,
    pub beta: BetaRule,
    pub iterations: usize,
    pub taus: TauSchedule,
    /// Run even when the compatibility condition fails (recorded on the
    /// result as a skipped validation).
    pub force: bool,
    /// Record per-iteration ground-truth diagnostics.
    pub diagnostics: bool,
}

impl NasaParams {
    /// Unit gains, `alpha = 1`, automatic regularization and the
    /// `1/sqrt(N)` schedule.
    pub fn standard(iterations: usize) -> Self {
        NasaParams {
            gain_grad: 1.0,
            gain_value: 1.0,
            alpha: 1.0,
            beta: BetaRule::Auto,
            iterations,
            taus: TauSchedule::SqrtHorizon,
            force: false,
            diagnostics: false,
        }
    }

    pub fn with_diagnostics(mut self) -> Self {
        self.diagnostics = true;
        self
    }

    /// Resolve and validate the full stepsize/regularization schedule
    /// against the oracle's declared constants.
    pub fn build_schedule(&self, spec: &OracleSpec) -> Result<StepSchedule> {
        if !(self.gain_grad > 0.0 && self.gain_value > 0.0) {
            return Err(Error::invalid("averaging gains must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        let taus = realize_taus(self.gain_grad, self.iterations, &self.taus)?;
        let beta = match self.beta {
            BetaRule::Fixed(b) if b > 0.0 => b,
            BetaRule::Fixed(b) => {
                return Err(Error::invalid(format!("regularization must be positive, got {b}")))
            }
            BetaRule::Auto => {
                let lip = spec.lipschitz.as_ref().ok_or_else(|| {
                    Error::invalid(
                        "automatic regularization needs declared smoothness constants; \
                         supply a fixed value instead",
                    )
                })?;
                if self.gain_grad != 1.0 || self.gain_value != 1.0 {
                    return Err(Error::invalid(
                        "automatic regularization is defined for unit gains",
                    ));
                }
                auto_regularization(self.alpha, lip)?
            }
        };
        let validation = match spec.lipschitz.as_ref() {
            Some(lip) => {
                let gamma = self.alpha * lip.grad_f;
                let c = 0.25 * gamma;
                let lhs =
                    2.0 * (self.gain_grad * beta - c) * (gamma * self.gain_value - 2.0 * c);
                let rhs = (lip.g * (self.gain_grad * lip.grad_f + gamma)).powi(2);
                if lhs >= rhs * (1.0 - 1e-9) {
                    Validation::Checked { c, gamma }
                } else if self.force {
                    Validation::Skipped {
                        warning: format!(
                            "compatibility condition violated ({lhs:.6e} < {rhs:.6e}); forced"
                        ),
                    }
                } else {
                    return Err(Error::invalid(format!(
                        "compatibility condition violated: 2(a*beta - c)(gamma*b - 2c) = {lhs:.6e} \
                         < {rhs:.6e}; increase beta or set force"
                    )));
                }
            }
            None => Validation::Skipped {
                warning: "smoothness constants unavailable; compatibility condition not checked"
                    .into(),
            },
        };
        Ok(StepSchedule {
            taus,
            beta,
            gain_grad: self.gain_grad,
            gain_value: self.gain_value,
            validation,
        })
    }
}

/// Fully resolved schedule: the stepsize sequence, the constant
/// regularization and the validation outcome.
#[derive(Debug, Clone)]
pub struct StepSchedule {
    pub taus: Vec<f64>,
    pub beta: f64,
    pub gain_grad: f64,
    pub gain_value: f64,
    pub validation: Validation,
}

/// The solver triple plus the last subproblem solution.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub iter: usize,
    /// Current iterate, feasible at every iteration.
    pub x: Vector,
    /// Running average of composite stochastic gradients.
    pub grad_avg: Vector,
    /// Running average of sampled inner values.
    pub value_avg: Vector,
    /// Minimizer of the last direction subproblem.
    pub proposal: Vector,
    /// Last step direction `proposal - x_prev`.
    pub direction: Vector,
}

impl SolverState {
    pub fn initial(x0: Vector, z0: Vector, u0: Vector) -> Self {
        let proposal = x0.clone();
        let direction = Vector::zeros(x0.len());
        SolverState {
            iter: 0,
            x: x0,
            grad_avg: z0,
            value_avg: u0,
            proposal,
            direction,
        }
    }
}

fn ensure_finite(v: &Vector, iteration: usize, quantity: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, quantity })
    }
}

/// One iteration. The oracle closure receives `(x^{k+1}, u^k)` — the
/// primal update happens before the value/Jacobian samples are drawn —
/// and returns the sample used for both running averages.
pub fn nasa_step<F>(
    set: &FeasibleSet,
    state: &SolverState,
    tau: f64,
    beta: f64,
    gain_grad: f64,
    gain_value: f64,
    sample_at: F,
) -> Result<(SolverState, OracleSample)>
where
    F: FnOnce(&Vector, &Vector) -> Result<OracleSample>,
{
    if !(gain_grad > 0.0 && gain_value > 0.0) {
        return Err(Error::invalid("averaging gains must be positive"));
    }
    if !(tau > 0.0 && tau <= 1.0 / gain_grad * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("stepsize {tau} outside (0, 1/gain]")));
    }
    let sub = solve_subproblem(set, &state.x, &state.grad_avg, beta)?;
    let x_next = &state.x + &sub.d * tau;
    let sample = sample_at(&x_next, &state.value_avg)?;

    let w_grad = gain_grad * tau;
    let w_value = gain_value * tau;
    let grad_avg = &state.grad_avg * (1.0 - w_grad) + sample.composite_grad() * w_grad;
    let value_avg = &state.value_avg * (1.0 - w_value) + &sample.value * w_value;

    ensure_finite(&x_next, state.iter, "iterate")?;
    ensure_finite(&grad_avg, state.iter, "gradient average")?;
    ensure_finite(&value_avg, state.iter, "value average")?;

    Ok((
        SolverState {
            iter: state.iter + 1,
            x: x_next,
            grad_avg,
            value_avg,
            proposal: sub.y,
            direction: sub.d,
        },
        sample,
    ))
}

/// Output of one run: the randomized iterate, optional per-iteration
/// diagnostics and an echo of the effective configuration.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// The sampled output index `R`.
    pub output_index: usize,
    pub x: Vector,
    pub grad_avg: Vector,
    pub value_avg: Vector,
    pub trajectory: Vec<TrajectoryPoint>,
    pub seed: RunSeed,
    pub beta: f64,
    pub iterations: usize,
    pub validation: Validation,
}

/// A failed run, carrying whatever diagnostics were recorded before the
/// failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("run failed after {iterations_completed} iterations: {error}")]
pub struct RunError {
    #[source]
    pub error: Error,
    pub iterations_completed: usize,
    pub partial_trajectory: Vec<TrajectoryPoint>,
}

impl RunError {
    fn at_start(error: Error) -> Self {
        RunError {
            error,
            iterations_completed: 0,
            partial_trajectory: Vec::new(),
        }
    }
}

/// Run with default initialization: `x^0` from the problem, `z^0 = 0`,
/// and `u^0` a single inner-value sample at `x^0` (both choices keep
/// the initial merit small at no extra cost).
pub fn nasa_run<P: Problem + ?Sized>(
    problem: &P,
    params: &NasaParams,
    seed: RunSeed,
) -> std::result::Result<RunResult, RunError> {
    let x0 = problem.initial_point();
    let mut init_rng = oracle::stream_rng(seed, 0, StreamTag::Init);
    let u0 = problem.sample_inner_value(&x0, &mut init_rng);
    let z0 = Vector::zeros(problem.inner_dim());
    nasa_run_from(problem, params, seed, x0, z0, u0)
}

/// Run from explicit initial data.
pub fn nasa_run_from<P: Problem + ?Sized>(
    problem: &P,
    params: &NasaParams,
    seed: RunSeed,
    x0: Vector,
    z0: Vector,
    u0: Vector,
) -> std::result::Result<RunResult, RunError> {
    let spec = problem.oracle_spec();
    spec.validate().map_err(RunError::at_start)?;
    let sched = params.build_schedule(&spec).map_err(RunError::at_start)?;
    let set = problem.feasible_set();
    if !set.contains(&x0).map_err(RunError::at_start)? {
        return Err(RunError::at_start(Error::Infeasible {
            distance: set.distance(&x0).unwrap_or(f64::NAN),
        }));
    }
    if z0.len() != problem.inner_dim() || u0.len() != problem.outer_dim() {
        return Err(RunError::at_start(Error::DimensionMismatch {
            expected: problem.inner_dim(),
            actual: z0.len(),
        }));
    }

    let mut output_rng: ChaCha8Rng = oracle::stream_rng(seed, 0, StreamTag::OutputIndex);
    let output_index =
        sample_output_index(&sched.taus, &mut output_rng).map_err(RunError::at_start)?;

    // merit constants for trajectory recording, when available
    let diag = params.diagnostics;
    let merit_gamma = spec.lipschitz.as_ref().map(|l| params.alpha * l.grad_f);
    let f_star = problem.optimal_value();

    let mut state = SolverState::initial(x0, z0, u0);
    let mut trajectory = Vec::with_capacity(if diag { params.iterations } else { 0 });
    let mut snapshot: Option<(Vector, Vector, Vector)> = None;

    for k in 0..params.iterations {
        let tau = sched.taus[k];
        let pre = if diag { Some(state.clone()) } else { None };
        let mut streams = oracle::StreamBundle::at_iteration(seed, (k + 1) as u64);
        let stepped = nasa_step(
            set,
            &state,
            tau,
            sched.beta,
            sched.gain_grad,
            sched.gain_value,
            |x, u| oracle::sample(problem, x, u, &mut streams),
        );
        state = match stepped {
            Ok((next, _sample)) => next,
            Err(error) => {
                return Err(RunError {
                    error,
                    iterations_completed: k,
                    partial_trajectory: trajectory,
                })
            }
        };
        if let Some(pre) = pre {
            let truth = oracle::true_values(problem, &pre.x);
            let eta = pre.grad_avg.dot(&state.direction)
                + 0.5 * sched.beta * state.direction.norm_squared();
            let g_gap_sq = (&truth.inner_value - &pre.value_avg).norm_squared();
            let w = match (merit_gamma, f_star) {
                (Some(gamma), Some(fs)) => crate::diagnostics::merit_from_parts(
                    sched.gain_grad,
                    truth.objective - fs,
                    eta,
                    gamma,
                    g_gap_sq,
                ),
                _ => f64::NAN,
            };
            let v = optimality_measure(set, &pre.x, &pre.grad_avg, &truth.gradient)
                .unwrap_or(f64::NAN);
            trajectory.push(TrajectoryPoint {
                iter: k,
                tau,
                v,
                d_sq: state.direction.norm_squared(),
                g_gap_sq,
                w,
                z_err_sq: (&pre.grad_avg - &truth.gradient).norm_squared(),
                z_step_sq: (&state.grad_avg - &pre.grad_avg).norm_squared(),
            });
        }
        if state.iter == output_index {
            snapshot = Some((state.x.clone(), state.grad_avg.clone(), state.value_avg.clone()));
        }
    }

    let (x, grad_avg, value_avg) =
        snapshot.expect("output index lies within the executed iterations");
    Ok(RunResult {
        output_index,
        x,
        grad_avg,
        value_avg,
        trajectory,
        seed,
        beta: sched.beta,
        iterations: params.iterations,
        validation: sched.validation,
    })
}
