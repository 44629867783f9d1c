//! The stochastic oracle contract and its RNG stream discipline.
//!
//! A problem exposes three sampled quantities: the inner value `G`
//! (unbiased for `g(x)`), the inner Jacobian `J` (unbiased for the
//! Jacobian of `g` at `x`) and the outer gradient `s` (unbiased for
//! `grad f(u)`). The Jacobian and outer-gradient samples must be
//! conditionally independent given the history, which we enforce
//! structurally: every sampled quantity draws from its own RNG stream,
//! derived deterministically from
//! `(base seed, replication, iteration, stream tag)`. Extra draws on
//! one stream can never perturb another, and a run is a pure function
//! of the problem and its seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Matrix, Result, Vector};

/// Identity of one solver run: all randomness derives from this pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeed {
    pub base: u64,
    pub replication: u64,
}

impl RunSeed {
    pub fn new(base: u64, replication: u64) -> Self {
        RunSeed { base, replication }
    }
}

/// Which sampled quantity a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    /// Inner function value `G`.
    Value,
    /// Inner Jacobian `J`.
    Jacobian,
    /// Outer gradient `s`.
    OuterGrad,
    /// One-shot initialization draws (e.g. the starting value average).
    Init,
    /// The randomized output-index draw.
    OutputIndex,
}

impl StreamTag {
    fn id(self) -> u64 {
        match self {
            StreamTag::Value => 1,
            StreamTag::Jacobian => 2,
            StreamTag::OuterGrad => 3,
            StreamTag::Init => 4,
            StreamTag::OutputIndex => 5,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic, platform-independent stream construction.
pub fn stream_rng(seed: RunSeed, iteration: u64, tag: StreamTag) -> ChaCha8Rng {
    let mut state = seed.base;
    let mix = |v: u64, st: &mut u64| {
        *st ^= v.wrapping_mul(0xA24B_AED4_963E_E407);
        splitmix64(st)
    };
    let mut bytes = [0u8; 32];
    let words = [
        mix(seed.replication, &mut state),
        mix(iteration, &mut state),
        mix(tag.id(), &mut state),
        splitmix64(&mut state),
    ];
    for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// The three independent per-iteration streams an oracle call consumes.
#[derive(Debug, Clone)]
pub struct StreamBundle {
    pub value: ChaCha8Rng,
    pub jacobian: ChaCha8Rng,
    pub outer_grad: ChaCha8Rng,
}

impl StreamBundle {
    pub fn at_iteration(seed: RunSeed, iteration: u64) -> Self {
        StreamBundle {
            value: stream_rng(seed, iteration, StreamTag::Value),
            jacobian: stream_rng(seed, iteration, StreamTag::Jacobian),
            outer_grad: stream_rng(seed, iteration, StreamTag::OuterGrad),
        }
    }
}

/// One oracle response.
#[derive(Debug, Clone)]
pub struct OracleSample {
    /// Unbiased sample of `g(x)`, length `outer_dim`.
    pub value: Vector,
    /// Unbiased sample of the Jacobian of `g` at `x`, `outer_dim x inner_dim`.
    pub jacobian: Matrix,
    /// Unbiased sample of `grad f(u)`, length `outer_dim`.
    pub outer_grad: Vector,
}

impl OracleSample {
    /// The composite stochastic gradient `J^T s`.
    pub fn composite_grad(&self) -> Vector {
        self.jacobian.tr_mul(&self.outer_grad)
    }
}

/// Lipschitz constants of the two component functions, when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzInfo {
    /// Lipschitz constant of `f`.
    pub f: f64,
    /// Lipschitz constant of `g` (bound on the Jacobian norm).
    pub g: f64,
    /// Lipschitz constant of `grad f`.
    pub grad_f: f64,
    /// Lipschitz constant of the Jacobian of `g` (0 for affine `g`).
    pub grad_g: f64,
}

impl LipschitzInfo {
    pub fn validate(&self) -> Result<()> {
        if !(self.f > 0.0 && self.g > 0.0 && self.grad_f > 0.0) || self.grad_g < 0.0 {
            return Err(Error::invalid(
                "Lipschitz constants must be positive (grad_g may be zero for affine maps)",
            ));
        }
        Ok(())
    }

    /// Lipschitz constant of the composite gradient:
    /// `L_g^2 L_{grad f} + L_f L_{grad g}`.
    pub fn composite_grad(&self) -> f64 {
        self.g * self.g * self.grad_f + self.f * self.grad_g
    }
}

/// Declared oracle metadata: dimensions, second-moment noise bounds and
/// optional smoothness constants. The sigma values are declared bounds
/// (in the Euclidean/Frobenius norm), not estimates.
#[derive(Debug, Clone)]
pub struct OracleSpec {
    pub inner_dim: usize,
    pub outer_dim: usize,
    pub sigma_value: f64,
    pub sigma_jacobian: f64,
    pub sigma_outer_grad: f64,
    pub lipschitz: Option<LipschitzInfo>,
}

impl OracleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.inner_dim == 0 || self.outer_dim == 0 {
            return Err(Error::invalid("oracle dimensions must be positive"));
        }
        if self.sigma_value < 0.0 || self.sigma_jacobian < 0.0 || self.sigma_outer_grad < 0.0 {
            return Err(Error::invalid("noise bounds must be nonnegative"));
        }
        if let Some(lip) = &self.lipschitz {
            lip.validate()?;
        }
        Ok(())
    }
}

/// A nested problem `min_{x in X} f(g(x))` with a sampling oracle and
/// analytic ground truth for diagnostics.
///
/// Ground-truth accessors exist on every benchmark problem but are
/// never consumed by the solvers; they feed tests and instrumentation
/// only.
pub trait Problem {
    /// Dimension of the decision variable (`n`).
    fn inner_dim(&self) -> usize;
    /// Dimension of the inner function's range (`m`).
    fn outer_dim(&self) -> usize;
    fn feasible_set(&self) -> &crate::geometry::FeasibleSet;
    /// Deterministic feasible starting point.
    fn initial_point(&self) -> Vector;
    fn oracle_spec(&self) -> OracleSpec;

    // -- analytic ground truth -------------------------------------------

    /// `g(x)`.
    fn inner_value(&self, x: &Vector) -> Vector;
    /// Jacobian of `g` at `x`.
    fn inner_jacobian(&self, x: &Vector) -> Matrix;
    /// `f(u)`.
    fn outer_value(&self, u: &Vector) -> f64;
    /// `grad f(u)`.
    fn outer_grad(&self, u: &Vector) -> Vector;

    // -- sampling ---------------------------------------------------------

    fn sample_inner_value(&self, x: &Vector, rng: &mut ChaCha8Rng) -> Vector;
    fn sample_inner_jacobian(&self, x: &Vector, rng: &mut ChaCha8Rng) -> Matrix;
    fn sample_outer_grad(&self, u: &Vector, rng: &mut ChaCha8Rng) -> Vector;

    // -- optional metadata -------------------------------------------------

    /// Optimal objective value (or a certified lower bound), when known.
    fn optimal_value(&self) -> Option<f64> {
        None
    }
    /// A known minimizer, when available.
    fn minimizer(&self) -> Option<Vector> {
        None
    }
    /// True when the inner map is the identity (single-level problem).
    fn identity_inner(&self) -> bool {
        false
    }

    // -- provided compositions ---------------------------------------------

    /// Composite objective `F(x) = f(g(x))`.
    fn objective(&self, x: &Vector) -> f64 {
        self.outer_value(&self.inner_value(x))
    }

    /// Composite gradient by the chain rule:
    /// `grad F(x) = J_g(x)^T grad f(g(x))`.
    fn objective_grad(&self, x: &Vector) -> Vector {
        self.inner_jacobian(x).tr_mul(&self.outer_grad(&self.inner_value(x)))
    }
}

/// Draw one oracle sample: the value and Jacobian at `x`, the outer
/// gradient at `u`, each from its own stream.
pub fn sample<P: Problem + ?Sized>(
    problem: &P,
    x: &Vector,
    u: &Vector,
    streams: &mut StreamBundle,
) -> Result<OracleSample> {
    if x.len() != problem.inner_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.inner_dim(),
            actual: x.len(),
        });
    }
    if u.len() != problem.outer_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.outer_dim(),
            actual: u.len(),
        });
    }
    Ok(OracleSample {
        value: problem.sample_inner_value(x, &mut streams.value),
        jacobian: problem.sample_inner_jacobian(x, &mut streams.jacobian),
        outer_grad: problem.sample_outer_grad(u, &mut streams.outer_grad),
    })
}

/// Exact quantities for diagnostics: `(g(x), J_g(x), F(x), grad F(x))`.
#[derive(Debug, Clone)]
pub struct TrueValues {
    pub inner_value: Vector,
    pub inner_jacobian: Matrix,
    pub objective: f64,
    pub gradient: Vector,
}

pub fn true_values<P: Problem + ?Sized>(problem: &P, x: &Vector) -> TrueValues {
    let inner_value = problem.inner_value(x);
    let inner_jacobian = problem.inner_jacobian(x);
    let objective = problem.outer_value(&inner_value);
    let gradient = inner_jacobian.tr_mul(&problem.outer_grad(&inner_value));
    TrueValues {
        inner_value,
        inner_jacobian,
        objective,
        gradient,
    }
}

/// Additive entrywise Gaussian perturbation with standard deviation `sigma`.
pub(crate) fn perturb_vector(v: &Vector, sigma: f64, rng: &mut ChaCha8Rng) -> Vector {
    use rand::Rng;
    use rand_distr::StandardNormal;
    if sigma == 0.0 {
        return v.clone();
    }
    v.map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
}

pub(crate) fn perturb_matrix(m: &Matrix, sigma: f64, rng: &mut ChaCha8Rng) -> Matrix {
    use rand::Rng;
    use rand_distr::StandardNormal;
    if sigma == 0.0 {
        return m.clone();
    }
    m.map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
}
