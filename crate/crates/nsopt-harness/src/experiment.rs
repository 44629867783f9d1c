//! Experiment orchestration: build a problem and solver from a config,
//! run every `(N, seed)` cell, and persist summaries, trajectories and
//! plot data.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nsopt::asa::{asa_run, AsaParams, AsaRegime};
use nsopt::diagnostics::TrajectoryPoint;
use nsopt::geometry::optimality_measure;
use nsopt::nasa::schedule::TauSchedule;
use nsopt::nasa::{nasa_run, BetaRule, NasaParams, RunResult};
use nsopt::oracle::{true_values, Problem, RunSeed};
use nsopt::problems::{
    LowRankProblem, PolicyEvalProblem, SingleLevelQuadratic, SviProblem, SyntheticQuadratic,
};
use nsopt::Vector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::HarnessError;

pub type DynProblem = Box<dyn Problem + Send + Sync>;

#[derive(Debug, Clone)]
pub enum TauKind {
    Sqrt,
    Constant(f64),
}

impl TauKind {
    fn schedule(&self, gain: f64, iterations: usize) -> TauSchedule {
        match self {
            TauKind::Sqrt => TauSchedule::SqrtHorizon,
            TauKind::Constant(v) => TauSchedule::constant(gain, iterations, *v),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SolverChoice {
    Nasa {
        gain_grad: f64,
        gain_value: f64,
        alpha: f64,
        beta: BetaRule,
        taus: TauKind,
        force: bool,
    },
    Asa {
        gain: f64,
        beta: f64,
        regime: AsaRegime,
        taus: TauKind,
    },
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Nasa { .. } => "nasa",
            SolverChoice::Asa { .. } => "asa",
        }
    }
}

/// A fully specified experiment: one problem instance, one solver
/// configuration, a grid of horizons and replications.
pub struct Experiment {
    pub problem: DynProblem,
    pub problem_name: String,
    pub solver: SolverChoice,
    pub n_list: Vec<usize>,
    pub base_seed: u64,
    pub replications: u64,
    pub diagnostics: bool,
    pub instance_echo: String,
    pub config_echo: String,
}

/// Deterministic per-cell metrics (wall time lives in a separate,
/// non-deterministic timing table).
#[derive(Debug, Clone)]
pub struct SummaryRecord {
    pub iterations: usize,
    pub replication: u64,
    pub output_index: usize,
    pub v: f64,
    pub g_gap_sq: f64,
    pub z_err_sq: f64,
    pub f_gap: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Aggregate {
    pub iterations: usize,
    pub cells: usize,
    pub mean_v: f64,
    pub stderr_v: f64,
    pub mean_g_gap_sq: f64,
    pub stderr_g_gap_sq: f64,
    pub mean_z_err_sq: f64,
    pub mean_f_gap: f64,
}

pub struct CellOutcome {
    pub iterations: usize,
    pub replication: u64,
    pub result: Result<SummaryRecord, String>,
    pub trajectory: Vec<TrajectoryPoint>,
}

pub struct ExperimentOutput {
    pub records: Vec<SummaryRecord>,
    pub aggregates: Vec<Aggregate>,
    pub failures: Vec<String>,
    pub trajectories: Vec<(usize, u64, Vec<TrajectoryPoint>)>,
}

impl Experiment {
    pub fn from_config(cfg: &Config) -> Result<Self, HarnessError> {
        let (problem, problem_name, instance_echo) = build_problem(cfg)?;
        let solver = build_solver(cfg, problem_name.as_str())?;
        let n_list: Vec<usize> = cfg.get_list("run.n_list")?;
        if n_list.is_empty() {
            return Err(HarnessError::Config("run.n_list must be nonempty".into()));
        }
        let replications: u64 = cfg.get("run.seeds")?;
        if replications == 0 {
            return Err(HarnessError::Config("run.seeds must be positive".into()));
        }
        let base_seed: u64 = cfg.get_or("run.base_seed", 0)?;
        let diagnostics = match cfg.optional("diagnostics").unwrap_or("off") {
            "on" | "true" => true,
            "off" | "false" => false,
            other => {
                return Err(HarnessError::Config(format!(
                    "diagnostics must be on/off, got `{other}`"
                )))
            }
        };
        // output.dir is consumed by the CLI layer when present
        let _ = cfg.optional("output.dir");
        cfg.finish()?;
        Ok(Experiment {
            problem,
            problem_name,
            solver,
            n_list,
            base_seed,
            replications,
            diagnostics,
            instance_echo,
            config_echo: cfg.echo(),
        })
    }

    fn run_cell(&self, iterations: usize, replication: u64) -> CellOutcome {
        let seed = RunSeed::new(self.base_seed, replication);
        let started = Instant::now();
        let outcome: Result<RunResult, String> = match &self.solver {
            SolverChoice::Nasa {
                gain_grad,
                gain_value,
                alpha,
                beta,
                taus,
                force,
            } => {
                let params = NasaParams {
                    gain_grad: *gain_grad,
                    gain_value: *gain_value,
                    alpha: *alpha,
                    beta: beta.clone(),
                    iterations,
                    taus: taus.schedule(*gain_grad, iterations),
                    force: *force,
                    diagnostics: self.diagnostics,
                };
                nasa_run(self.problem.as_ref(), &params, seed).map_err(|e| e.to_string())
            }
            SolverChoice::Asa {
                gain,
                beta,
                regime,
                taus,
            } => {
                let params = AsaParams {
                    gain: *gain,
                    beta: *beta,
                    iterations,
                    taus: taus.schedule(*gain, iterations),
                    regime: *regime,
                    diagnostics: self.diagnostics,
                };
                asa_run(self.problem.as_ref(), &params, seed).map_err(|e| e.to_string())
            }
        };
        let wall_seconds = started.elapsed().as_secs_f64();
        match outcome {
            Err(message) => CellOutcome {
                iterations,
                replication,
                result: Err(message),
                trajectory: Vec::new(),
            },
            Ok(run) => {
                let problem = self.problem.as_ref();
                let truth = true_values(problem, &run.x);
                let v = optimality_measure(
                    problem.feasible_set(),
                    &run.x,
                    &run.grad_avg,
                    &truth.gradient,
                )
                .unwrap_or(f64::NAN);
                let g_gap_sq = (&truth.inner_value - &run.value_avg).norm_squared();
                let z_err_sq = (&run.grad_avg - &truth.gradient).norm_squared();
                let f_gap = problem
                    .optimal_value()
                    .map(|fs| truth.objective - fs)
                    .unwrap_or(f64::NAN);
                CellOutcome {
                    iterations,
                    replication,
                    result: Ok(SummaryRecord {
                        iterations,
                        replication,
                        output_index: run.output_index,
                        v,
                        g_gap_sq,
                        z_err_sq,
                        f_gap,
                        wall_seconds,
                    }),
                    trajectory: run.trajectory,
                }
            }
        }
    }

    /// Execute all cells, optionally across worker threads. Results are
    /// collected positionally, so the output order (and every artifact)
    /// is independent of scheduling.
    pub fn run(&self, jobs: usize) -> ExperimentOutput {
        let cells: Vec<(usize, u64)> = self
            .n_list
            .iter()
            .flat_map(|&n| (0..self.replications).map(move |r| (n, r)))
            .collect();
        let slots: Mutex<Vec<Option<CellOutcome>>> =
            Mutex::new((0..cells.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = jobs.max(1).min(cells.len().max(1));

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= cells.len() {
                        break;
                    }
                    let (n, rep) = cells[idx];
                    let outcome = self.run_cell(n, rep);
                    slots.lock().expect("collector lock")[idx] = Some(outcome);
                });
            }
        });

        let outcomes: Vec<CellOutcome> = slots
            .into_inner()
            .expect("collector lock")
            .into_iter()
            .map(|o| o.expect("every cell executed"))
            .collect();

        let mut records = Vec::new();
        let mut failures = Vec::new();
        let mut trajectories = Vec::new();
        for outcome in outcomes {
            match outcome.result {
                Ok(record) => {
                    if self.diagnostics {
                        trajectories.push((
                            outcome.iterations,
                            outcome.replication,
                            outcome.trajectory,
                        ));
                    }
                    records.push(record);
                }
                Err(message) => failures.push(format!(
                    "N={} seed={}: {message}",
                    outcome.iterations, outcome.replication
                )),
            }
        }
        let aggregates = aggregate(&records);
        ExperimentOutput {
            records,
            aggregates,
            failures,
            trajectories,
        }
    }
}

/// Mean and standard error per horizon, recomputable from the rows.
pub fn aggregate(records: &[SummaryRecord]) -> Vec<Aggregate> {
    let mut sizes: Vec<usize> = records.iter().map(|r| r.iterations).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let rows: Vec<&SummaryRecord> = records.iter().filter(|r| r.iterations == n).collect();
            let k = rows.len() as f64;
            let mean = |f: &dyn Fn(&SummaryRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / k;
            let stderr = |f: &dyn Fn(&SummaryRecord) -> f64, m: f64| {
                if rows.len() < 2 {
                    0.0
                } else {
                    let var = rows.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (k - 1.0);
                    (var / k).sqrt()
                }
            };
            let mean_v = mean(&|r| r.v);
            let mean_g = mean(&|r| r.g_gap_sq);
            Aggregate {
                iterations: n,
                cells: rows.len(),
                mean_v,
                stderr_v: stderr(&|r| r.v, mean_v),
                mean_g_gap_sq: mean_g,
                stderr_g_gap_sq: stderr(&|r| r.g_gap_sq, mean_g),
                mean_z_err_sq: mean(&|r| r.z_err_sq),
                mean_f_gap: mean(&|r| r.f_gap),
            }
        })
        .collect()
}

fn warm_start(
    set: &nsopt::geometry::FeasibleSet,
    minimizer: &Vector,
    distance: f64,
    seed: u64,
) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5753_5254);
    let dir = Vector::from_fn(minimizer.len(), |_, _| rng.random_range(-1.0..1.0)).normalize();
    set.project(&(minimizer + dir * distance))
        .expect("projection succeeds")
}

fn build_problem(cfg: &Config) -> Result<(DynProblem, String, String), HarnessError> {
    let name = cfg.require("problem.name")?.to_string();
    let seed: u64 = cfg.get_or("problem.seed", 42)?;
    let mut echo = vec![
        format!("problem.name = {name}"),
        format!("problem.seed = {seed}"),
    ];
    let problem: DynProblem = match name.as_str() {
        "quadratic" => {
            let n: usize = cfg.get_or("problem.inner_dim", 20)?;
            let m: usize = cfg.get_or("problem.outer_dim", 10)?;
            let noise: f64 = cfg.get_or("problem.noise", 0.1)?;
            echo.push(format!("problem.inner_dim = {n}"));
            echo.push(format!("problem.outer_dim = {m}"));
            echo.push(format!("problem.noise = {noise}"));
            let p = if let Some(spec) = cfg.optional("problem.spectrum") {
                let parts: Vec<f64> = spec
                    .split(',')
                    .map(|s| {
                        s.trim().parse().map_err(|_| {
                            HarnessError::Config(format!("problem.spectrum: cannot parse `{s}`"))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if parts.len() != 2 {
                    return Err(HarnessError::Config(
                        "problem.spectrum expects `min,max`".into(),
                    ));
                }
                echo.push(format!("problem.spectrum = {},{}", parts[0], parts[1]));
                SyntheticQuadratic::with_spectrum(n, m, parts[0], parts[1], noise, seed)
            } else {
                SyntheticQuadratic::random(n, m, noise, seed)
            };
            let p = if let Some(w) = cfg.optional("problem.warm_start") {
                let distance: f64 = w.parse().map_err(|_| {
                    HarnessError::Config(format!("problem.warm_start: cannot parse `{w}`"))
                })?;
                echo.push(format!("problem.warm_start = {distance}"));
                let x0 = warm_start(
                    p.feasible_set(),
                    &p.minimizer().expect("quadratic has a minimizer"),
                    distance,
                    seed,
                );
                p.with_initial_point(x0)
            } else {
                p
            };
            Box::new(p)
        }
        "single_level" => {
            let n: usize = cfg.get_or("problem.inner_dim", 10)?;
            let noise: f64 = cfg.get_or("problem.noise", 0.1)?;
            echo.push(format!("problem.inner_dim = {n}"));
            echo.push(format!("problem.noise = {noise}"));
            let p = SingleLevelQuadratic::random(n, noise, seed);
            let p = if let Some(w) = cfg.optional("problem.warm_start") {
                let distance: f64 = w.parse().map_err(|_| {
                    HarnessError::Config(format!("problem.warm_start: cannot parse `{w}`"))
                })?;
                echo.push(format!("problem.warm_start = {distance}"));
                let x0 = warm_start(
                    p.feasible_set(),
                    &p.minimizer().expect("single-level quadratic has a minimizer"),
                    distance,
                    seed,
                );
                p.with_initial_point(x0)
            } else {
                p
            };
            let p = match cfg.optional("problem.declare_lipschitz").unwrap_or("on") {
                "on" | "true" => p,
                "off" | "false" => {
                    echo.push("problem.declare_lipschitz = off".to_string());
                    p.without_lipschitz()
                }
                other => {
                    return Err(HarnessError::Config(format!(
                        "problem.declare_lipschitz must be on/off, got `{other}`"
                    )))
                }
            };
            Box::new(p)
        }
        "svi" => {
            let n: usize = cfg.get_or("problem.inner_dim", 10)?;
            let scale: f64 = cfg.get_or("problem.scale", 3.0)?;
            let noise: f64 = cfg.get_or("problem.noise", 0.1)?;
            echo.push(format!("problem.inner_dim = {n}"));
            echo.push(format!("problem.scale = {scale}"));
            echo.push(format!("problem.noise = {noise}"));
            Box::new(SviProblem::strongly_monotone(n, scale, noise, seed))
        }
        "policy_eval" => {
            let states: usize = cfg.get_or("problem.states", 50)?;
            let dim: usize = cfg.get_or("problem.features", 10)?;
            let sketch: usize = cfg.get_or("problem.sketch_dim", (3 * dim).min(states))?;
            let discount: f64 = cfg.get_or("problem.discount", 0.5)?;
            let residual: f64 = cfg.get_or("problem.residual_scale", 0.1)?;
            echo.push(format!("problem.states = {states}"));
            echo.push(format!("problem.features = {dim}"));
            echo.push(format!("problem.sketch_dim = {sketch}"));
            echo.push(format!("problem.discount = {discount}"));
            echo.push(format!("problem.residual_scale = {residual}"));
            echo.push("# sketch distribution: gaussian directions, orthonormalized rows, rescaled to unit design norm".to_string());
            Box::new(
                PolicyEvalProblem::build_with(states, dim, sketch, discount, residual, seed)
                    .map_err(HarnessError::Solver)?,
            )
        }
        "low_rank" => {
            let size: usize = cfg.get_or("problem.size", 15)?;
            let rank: usize = cfg.get_or("problem.rank", 3)?;
            let noise: f64 = cfg.get_or("problem.noise", 0.1)?;
            echo.push(format!("problem.size = {size}"));
            echo.push(format!("problem.rank = {rank}"));
            echo.push(format!("problem.noise = {noise}"));
            Box::new(LowRankProblem::random(size, rank, noise, seed))
        }
        other => {
            return Err(HarnessError::Config(format!("unknown problem `{other}`")))
        }
    };
    echo.push(format!("# effective dimensions: inner {}, outer {}", problem.inner_dim(), problem.outer_dim()));
    Ok((problem, name, echo.join("\n") + "\n"))
}

fn build_solver(cfg: &Config, problem_name: &str) -> Result<SolverChoice, HarnessError> {
    let name = cfg.require("solver.name")?.to_string();
    let taus = match cfg.optional("solver.tau").unwrap_or("sqrt") {
        "sqrt" => TauKind::Sqrt,
        other => match other.strip_prefix("constant:") {
            Some(v) => TauKind::Constant(v.parse().map_err(|_| {
                HarnessError::Config(format!("solver.tau: cannot parse `{other}`"))
            })?),
            None => {
                return Err(HarnessError::Config(format!(
                    "solver.tau must be `sqrt` or `constant:<value>`, got `{other}`"
                )))
            }
        },
    };
    match name.as_str() {
        "nasa" => {
            let beta = match cfg.optional("solver.beta").unwrap_or("auto") {
                "auto" => BetaRule::Auto,
                v => BetaRule::Fixed(v.parse().map_err(|_| {
                    HarnessError::Config(format!("solver.beta: cannot parse `{v}`"))
                })?),
            };
            let force = match cfg.optional("solver.force").unwrap_or("off") {
                "on" | "true" => true,
                "off" | "false" => false,
                other => {
                    return Err(HarnessError::Config(format!(
                        "solver.force must be on/off, got `{other}`"
                    )))
                }
            };
            Ok(SolverChoice::Nasa {
                gain_grad: cfg.get_or("solver.a", 1.0)?,
                gain_value: cfg.get_or("solver.b", 1.0)?,
                alpha: cfg.get_or("solver.alpha", 1.0)?,
                beta,
                taus,
                force,
            })
        }
        "asa" => {
            if problem_name != "single_level" {
                return Err(HarnessError::Config(format!(
                    "solver `asa` requires an identity inner map; problem `{problem_name}` is nested"
                )));
            }
            let regime = match cfg.optional("solver.regime").unwrap_or("bounded_moment") {
                "bounded_moment" => AsaRegime::BoundedMoment,
                "bounded_variance" => AsaRegime::BoundedVariance,
                other => {
                    return Err(HarnessError::Config(format!(
                        "solver.regime must be bounded_moment or bounded_variance, got `{other}`"
                    )))
                }
            };
            Ok(SolverChoice::Asa {
                gain: cfg.get_or("solver.a", 1.0)?,
                beta: cfg.get_or("solver.beta", 1.0)?,
                regime,
                taus,
            })
        }
        other => Err(HarnessError::Config(format!("unknown solver `{other}`"))),
    }
}
