//! The verification suite behind `nsopt check`: geometry scaling and
//! optimality properties over a randomized corpus, chain-rule gradient
//! verification on every benchmark family, the descent ledger on a
//! deterministic run, and the schedule tail-weight condition.

use std::time::Instant;

use nsopt::diagnostics::{
    finite_diff_check, ledger_check, tail_weight_check, MeritConstants,
};
use nsopt::geometry::{solve_subproblem, FeasibleSet};
use nsopt::nasa::schedule::{realize_taus, TauSchedule};
use nsopt::nasa::{nasa_run, NasaParams};
use nsopt::oracle::{Problem, RunSeed};
use nsopt::problems::{
    LowRankProblem, PolicyEvalProblem, SingleLevelQuadratic, SviProblem, SyntheticQuadratic,
};
use nsopt::Vector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        CheckReport { name, pass, detail }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// One random instance of each feasible-set kind.
fn corpus_sets(rng: &mut ChaCha8Rng, n: usize) -> Vec<FeasibleSet> {
    vec![
        FeasibleSet::full_space(n).expect("valid"),
        FeasibleSet::symmetric_box(n, 0.2 + rng.random::<f64>()).expect("valid"),
        FeasibleSet::ball(random_vector(rng, n, 0.5), 0.2 + rng.random::<f64>()).expect("valid"),
        FeasibleSet::simplex(n).expect("valid"),
    ]
}

/// Step-scaling bound: `||ybar(x,z,1) - x|| <= max(1,beta) ||ybar(x,z,beta) - x||`
/// over `triples` random instances spread across all four set kinds.
pub fn check_step_scaling(triples: usize, seed: u64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut count = 0usize;
    while count < triples {
        let n = 1 + rng.random_range(0..7);
        for set in corpus_sets(&mut rng, n) {
            let x = set.project(&random_vector(&mut rng, n, 1.5)).expect("projection");
            let z = random_vector(&mut rng, n, 2.0);
            let beta = 10f64.powf(rng.random_range(-3.0..3.0));
            let unit = solve_subproblem(&set, &x, &z, 1.0).expect("subproblem").d.norm();
            let scaled = solve_subproblem(&set, &x, &z, beta).expect("subproblem").d.norm();
            worst = worst.max(unit - beta.max(1.0) * scaled);
            count += 1;
        }
    }
    let elapsed = started.elapsed();
    let pass = worst <= 1e-10 && elapsed.as_secs_f64() < 1.0;
    CheckReport::new(
        "step-scaling bound",
        pass,
        format!("{count} triples, worst excess {worst:.3e}, {elapsed:.2?}"),
    )
}

/// First-order optimality of the direction subproblem:
/// `<z, d> + beta ||d||^2 <= 0` on the same corpus.
pub fn check_subproblem_optimality(triples: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut count = 0usize;
    while count < triples {
        let n = 1 + rng.random_range(0..7);
        for set in corpus_sets(&mut rng, n) {
            let x = set.project(&random_vector(&mut rng, n, 1.5)).expect("projection");
            let z = random_vector(&mut rng, n, 2.0);
            let beta = 10f64.powf(rng.random_range(-3.0..3.0));
            let sol = solve_subproblem(&set, &x, &z, beta).expect("subproblem");
            worst = worst.max(z.dot(&sol.d) + beta * sol.d.norm_squared());
            count += 1;
        }
    }
    let pass = worst <= 1e-10;
    CheckReport::new(
        "subproblem optimality",
        pass,
        format!("{count} instances, worst value {worst:.3e}"),
    )
}

/// Feasible points close to the starting region of each benchmark.
fn interior_points<P: Problem + ?Sized>(problem: &P, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = problem.feasible_set();
    let x0 = problem.initial_point();
    (0..count)
        .map(|_| {
            let jitter = Vector::from_fn(x0.len(), |_, _| rng.random_range(-0.3..0.3));
            set.project(&(&x0 + jitter)).expect("projection")
        })
        .collect()
}

/// Analytic composite gradients against central finite differences on
/// all four benchmark families.
pub fn check_chain_rule(seed: u64) -> CheckReport {
    let quadratic = SyntheticQuadratic::random(20, 10, 0.0, seed);
    let svi = SviProblem::strongly_monotone(10, 3.0, 0.0, seed);
    let policy = PolicyEvalProblem::build(50, 10, 0.5, seed).expect("well-posed instance");
    let low_rank = LowRankProblem::random(15, 3, 0.0, seed);

    let mut detail = String::new();
    let mut pass = true;
    let mut run = |name: &str, problem: &dyn Problem, tol: f64| {
        let points = interior_points(problem, 20, seed ^ 0xfd);
        match finite_diff_check(problem, &points, 1e-5) {
            Ok(report) => {
                let ok = report.max_rel_error < tol;
                pass &= ok;
                detail.push_str(&format!("{name}: {:.2e} (tol {tol:.0e}); ", report.max_rel_error));
            }
            Err(e) => {
                pass = false;
                detail.push_str(&format!("{name}: error {e}; "));
            }
        }
    };
    // central differences are exact for quadratics up to roundoff
    run("quadratic", &quadratic, 1e-8);
    run("svi", &svi, 1e-5);
    run("policy_eval", &policy, 1e-5);
    run("low_rank", &low_rank, 1e-5);
    CheckReport::new("chain-rule gradients", pass, detail)
}

/// Telescoped descent inequality on a deterministic quadratic with the
/// unit-gain constants, all prefixes up to `iterations`.
pub fn check_descent_ledger(iterations: usize, seed: u64) -> CheckReport {
    let problem = SyntheticQuadratic::random(20, 10, 0.0, seed);
    let lip = problem.oracle_spec().lipschitz.expect("declared constants");
    let consts = match MeritConstants::paper_defaults(1.0, &lip, problem.optimal_value()) {
        Ok(c) => c,
        Err(e) => return CheckReport::new("descent ledger", false, e.to_string()),
    };
    let params = NasaParams::standard(iterations).with_diagnostics();
    let run = match nasa_run(&problem, &params, RunSeed::new(seed, 0)) {
        Ok(r) => r,
        Err(e) => return CheckReport::new("descent ledger", false, e.to_string()),
    };
    match ledger_check(&run.trajectory, &consts) {
        Ok(report) => CheckReport::new(
            "descent ledger",
            report.pass,
            format!(
                "{} prefixes, min relative slack {:.3e} at prefix {}",
                report.prefix_slack.len(),
                report.min_slack,
                report.worst_prefix
            ),
        ),
        Err(e) => CheckReport::new("descent ledger", false, e.to_string()),
    }
}

/// Tail-weight condition of the constant-tail schedule with c_bar = 1.
pub fn check_tail_weights() -> CheckReport {
    let mut detail = String::new();
    let mut pass = true;
    for n in [16usize, 100, 1024] {
        match realize_taus(1.0, n, &TauSchedule::SqrtHorizon) {
            Ok(mut taus) => {
                taus.push(*taus.last().expect("nonempty"));
                match tail_weight_check(1.0, &taus, 1.0) {
                    Ok(ok) => {
                        pass &= ok;
                        detail.push_str(&format!("N={n}: {}; ", if ok { "ok" } else { "violated" }));
                    }
                    Err(e) => {
                        pass = false;
                        detail.push_str(&format!("N={n}: error {e}; "));
                    }
                }
            }
            Err(e) => {
                pass = false;
                detail.push_str(&format!("N={n}: error {e}; "));
            }
        }
    }
    CheckReport::new("schedule tail weights", pass, detail)
}

/// Empirical second moments against the declared oracle bounds on the
/// noisy quadratic (the declared sigmas are bounds, not estimates, so
/// the empirical values must sit below them).
pub fn check_declared_noise_bounds(seed: u64) -> CheckReport {
    use nsopt::oracle::{sample, StreamBundle};
    let problem = SyntheticQuadratic::random(12, 6, 0.25, seed);
    let spec = problem.oracle_spec();
    let x = problem.initial_point();
    let u = problem.inner_value(&x);
    let g_true = problem.inner_value(&x);
    let trials = 2000usize;
    let mut value_sq = 0.0;
    let mut jac_sq = 0.0;
    let mut grad_sq = 0.0;
    for k in 0..trials {
        let mut streams = StreamBundle::at_iteration(RunSeed::new(seed ^ 0xb0, 0), k as u64);
        let s = sample(&problem, &x, &u, &mut streams).expect("dimensions agree");
        value_sq += (&s.value - &g_true).norm_squared();
        jac_sq += s.jacobian.norm_squared();
        grad_sq += s.outer_grad.norm_squared();
    }
    let k = trials as f64;
    let (value_sq, jac_sq, grad_sq) = (value_sq / k, jac_sq / k, grad_sq / k);
    // the value-noise bound is exact rather than conservative, so leave
    // room for the Monte-Carlo error of the empirical second moment
    let margin = 1.0 + 5.0 / k.sqrt();
    let pass = value_sq <= spec.sigma_value.powi(2) * margin
        && jac_sq <= spec.sigma_jacobian.powi(2) * margin
        && grad_sq <= spec.sigma_outer_grad.powi(2) * margin;
    CheckReport::new(
        "declared noise bounds",
        pass,
        format!(
            "E||G-g||^2 {value_sq:.3e} <= {:.3e}; E||J||^2 {jac_sq:.3e} <= {:.3e}; E||s||^2 {grad_sq:.3e} <= {:.3e}",
            spec.sigma_value.powi(2),
            spec.sigma_jacobian.powi(2),
            spec.sigma_outer_grad.powi(2)
        ),
    )
}

/// Parameter-free construction must not read smoothness constants.
pub fn check_parameter_free() -> CheckReport {
    use nsopt::asa::{asa_run, AsaParams};
    let problem = SingleLevelQuadratic::random(6, 0.2, 11).without_lipschitz();
    let pass = problem.oracle_spec().lipschitz.is_none()
        && asa_run(&problem, &AsaParams::parameter_free(64), RunSeed::new(1, 0)).is_ok();
    CheckReport::new(
        "parameter-free construction",
        pass,
        "schedule built without declared constants".into(),
    )
}

/// The full suite in a fixed order.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    vec![
        check_step_scaling(1000, seed),
        check_subproblem_optimality(1000, seed ^ 0x9d),
        check_chain_rule(seed),
        check_descent_ledger(500, seed),
        check_tail_weights(),
        check_declared_noise_bounds(seed),
        check_parameter_free(),
    ]
}
