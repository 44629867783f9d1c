//! Stochastic variational inequality via the lifted gap function.
//!
//! The problem is to find `x in X` with `<Hbar(x), xi - x> <= 0` for all
//! `xi in X`, where only noisy evaluations of the mean map `Hbar` and
//! its Jacobian are available. It lifts to the nested form with
//!
//! ```text
//! g(x) = (x, Hbar(x)),    f(x, h) = max_{xi in X} <h, xi - x> - 0.5 ||xi - x||^2
//! ```
//!
//! so the composite objective `F = f . g` is nonnegative and vanishes
//! exactly at SVI solutions. The gradient of `f` is available exactly
//! (an envelope/Danskin formula through the projection); only `g` and
//! its Jacobian are sampled.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::FeasibleSet;
use crate::oracle::{perturb_matrix, perturb_vector, LipschitzInfo, OracleSpec, Problem};
use crate::{Error, Matrix, Result, Vector};

/// Gap function value and its exact gradients at `(x, h)`:
/// the maximizer is `xi* = proj_X(x + h)`, the value is
/// `<h, xi* - x> - 0.5 ||xi* - x||^2`, and the envelope gradients are
/// `grad_h = xi* - x`, `grad_x = -h + (xi* - x)`.
pub fn gap_function_value_grad(
    set: &FeasibleSet,
    x: &Vector,
    h: &Vector,
) -> Result<(f64, Vector, Vector)> {
    if x.len() != set.dim() || h.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            actual: if x.len() != set.dim() { x.len() } else { h.len() },
        });
    }
    let maximizer = set.project(&(x + h))?;
    let step = maximizer - x;
    let value = h.dot(&step) - 0.5 * step.norm_squared();
    let grad_x = &step - h;
    Ok((value, grad_x, step))
}

/// SVI benchmark with an affine mean map `Hbar(x) = M x + q`.
#[derive(Debug, Clone)]
pub struct SviProblem {
    map: Matrix,
    offset: Vector,
    noise_value: f64,
    noise_jacobian: f64,
    set: FeasibleSet,
    start: Vector,
    solution: Option<Vector>,
    jacobian: Matrix, // stacked [I; M], cached
    map_norm: f64,
}

/// Valid global bound on the Lipschitz constant of the gap function's
/// gradient: 1 plus the golden ratio, from the block structure of its
/// generalized Jacobian through the projection.
const GAP_GRAD_LIPSCHITZ: f64 = 2.618033988749895;

impl SviProblem {
    /// Affine mean map over an explicit set. `solution` is recorded
    /// when the caller knows it (e.g. an interior zero of the map).
    pub fn from_affine_map(
        map: Matrix,
        offset: Vector,
        set: FeasibleSet,
        noise_value: f64,
        noise_jacobian: f64,
        solution: Option<Vector>,
    ) -> Result<Self> {
        let n = set.dim();
        if map.nrows() != n || map.ncols() != n || offset.len() != n {
            return Err(Error::invalid("mean map and set dimensions disagree"));
        }
        let mut jacobian = Matrix::zeros(2 * n, n);
        jacobian.view_mut((0, 0), (n, n)).copy_from(&Matrix::identity(n, n));
        jacobian.view_mut((n, 0), (n, n)).copy_from(&map);
        let map_norm = map.clone().svd(false, false).singular_values[0];
        let start = set.interior_point();
        Ok(SviProblem {
            map,
            offset,
            noise_value,
            noise_jacobian,
            set,
            start,
            solution,
            jacobian,
            map_norm,
        })
    }

    /// Well-posed constrained instance: `Hbar(x) = -scale * M0 (x - x*)`
    /// with `M0` positive definite and `x*` strictly inside the box, so
    /// `x*` is the unique SVI solution.
    pub fn strongly_monotone(dim: usize, scale: f64, noise: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5356_4931);
        let mut base = Matrix::identity(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal) / (dim as f64).sqrt();
                base[(i, j)] += v;
                if i != j {
                    base[(j, i)] += v;
                }
            }
        }
        let solution = Vector::from_fn(dim, |_, _| rng.random_range(-0.5..0.5));
        let map = -&base * scale;
        let offset = &base * &solution * scale;
        let set = FeasibleSet::symmetric_box(dim, 1.0).expect("valid box");
        Self::from_affine_map(map, offset, set, noise, noise, Some(solution))
            .expect("dimensions agree by construction")
    }

    /// Mean of the random mapping at `x`.
    pub fn mean_map(&self, x: &Vector) -> Vector {
        &self.map * x + &self.offset
    }

    /// The lifted gap residual `F(x) >= 0`; zero exactly at solutions.
    pub fn residual(&self, x: &Vector) -> Result<f64> {
        if !self.set.contains(x)? {
            return Err(Error::Infeasible {
                distance: self.set.distance(x)?,
            });
        }
        let (value, _, _) = gap_function_value_grad(&self.set, x, &self.mean_map(x))?;
        Ok(value)
    }

    pub fn solution(&self) -> Option<&Vector> {
        self.solution.as_ref()
    }

    fn split(u: &Vector) -> (Vector, Vector) {
        let n = u.len() / 2;
        (u.rows(0, n).into_owned(), u.rows(n, n).into_owned())
    }
}

impl Problem for SviProblem {
    fn inner_dim(&self) -> usize {
        self.set.dim()
    }

    fn outer_dim(&self) -> usize {
        2 * self.set.dim()
    }

    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    fn initial_point(&self) -> Vector {
        self.start.clone()
    }

    fn oracle_spec(&self) -> OracleSpec {
        let n = self.inner_dim() as f64;
        let jac_norm = (1.0 + self.map_norm * self.map_norm).sqrt();
        let x_radius = match &self.set {
            FeasibleSet::Box { lower, upper } => lower.norm().max(upper.norm()),
            FeasibleSet::Ball { center, radius } => center.norm() + radius,
            _ => 10.0,
        };
        let h_reach = self.map_norm * x_radius + self.offset.norm();
        OracleSpec {
            inner_dim: self.inner_dim(),
            outer_dim: self.outer_dim(),
            sigma_value: (x_radius.powi(2) + (h_reach + 1.0).powi(2)).sqrt()
                + self.noise_value * n.sqrt(),
            sigma_jacobian: (self.jacobian.norm().powi(2)
                + n * n * self.noise_jacobian.powi(2))
            .sqrt(),
            sigma_outer_grad: 3.0 * (h_reach + 2.0 * x_radius) + 1.0,
            lipschitz: Some(LipschitzInfo {
                f: 3.0 * (h_reach + 2.0 * x_radius) + 1.0,
                g: jac_norm,
                grad_f: GAP_GRAD_LIPSCHITZ,
                grad_g: 0.0,
            }),
        }
    }

    fn inner_value(&self, x: &Vector) -> Vector {
        let n = x.len();
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(x);
        out.rows_mut(n, n).copy_from(&self.mean_map(x));
        out
    }

    fn inner_jacobian(&self, _x: &Vector) -> Matrix {
        self.jacobian.clone()
    }

    fn outer_value(&self, u: &Vector) -> f64 {
        let (ux, uh) = Self::split(u);
        gap_function_value_grad(&self.set, &ux, &uh)
            .expect("dimensions agree")
            .0
    }

    fn outer_grad(&self, u: &Vector) -> Vector {
        let (ux, uh) = Self::split(u);
        let (_, grad_x, grad_h) =
            gap_function_value_grad(&self.set, &ux, &uh).expect("dimensions agree");
        let n = ux.len();
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&grad_x);
        out.rows_mut(n, n).copy_from(&grad_h);
        out
    }

    fn sample_inner_value(&self, x: &Vector, rng: &mut ChaCha8Rng) -> Vector {
        let n = x.len();
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(x); // the x-part of g is observed exactly
        out.rows_mut(n, n)
            .copy_from(&perturb_vector(&self.mean_map(x), self.noise_value, rng));
        out
    }

    fn sample_inner_jacobian(&self, _x: &Vector, rng: &mut ChaCha8Rng) -> Matrix {
        let n = self.inner_dim();
        let mut out = self.jacobian.clone();
        let noisy = perturb_matrix(&self.map, self.noise_jacobian, rng);
        out.view_mut((n, 0), (n, n)).copy_from(&noisy);
        out
    }

    fn sample_outer_grad(&self, u: &Vector, _rng: &mut ChaCha8Rng) -> Vector {
        // the gap function's gradient is available exactly
        self.outer_grad(u)
    }

    fn optimal_value(&self) -> Option<f64> {
        // F >= 0 pointwise, and equals 0 at any SVI solution.
        Some(0.0)
    }

    fn minimizer(&self) -> Option<Vector> {
        self.solution.clone()
    }
}
