//! Single-level benchmark for the dual-averaging solver: a separable
//! quadratic `f(x) = 0.5 sum_i q_i (x_i - c_i)^2` over a box, with the
//! inner map fixed to the identity. Separability gives the exact
//! constrained minimizer by coordinatewise clamping.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::FeasibleSet;
use crate::oracle::{perturb_vector, LipschitzInfo, OracleSpec, Problem};
use crate::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct SingleLevelQuadratic {
    curvature: Vector,
    center: Vector,
    noise_grad: f64,
    set: FeasibleSet,
    start: Vector,
    arg_min: Vector,
    optimum: f64,
    lipschitz: Option<LipschitzInfo>,
}

impl SingleLevelQuadratic {
    /// Random instance on the box `[-1, 1]^dim`. Some coordinates of the
    /// unconstrained center fall outside the box, so constraints are
    /// genuinely active at the solution.
    pub fn random(dim: usize, noise_grad: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x534c_5144);
        let curvature = Vector::from_fn(dim, |_, _| rng.random_range(0.5..2.0));
        let center = Vector::from_fn(dim, |_, _| rng.random_range(-1.5..1.5));
        let set = FeasibleSet::symmetric_box(dim, 1.0).expect("valid box");
        Self::new(curvature, center, set, noise_grad)
    }

    /// Explicit construction. The feasible set must be a box or the
    /// full space so the exact minimizer stays available.
    pub fn new(curvature: Vector, center: Vector, set: FeasibleSet, noise_grad: f64) -> Self {
        assert_eq!(curvature.len(), center.len());
        assert_eq!(curvature.len(), set.dim());
        assert!(curvature.iter().all(|&q| q > 0.0), "curvatures must be positive");
        let arg_min = match &set {
            FeasibleSet::FullSpace { .. } => center.clone(),
            FeasibleSet::Box { lower, upper } => Vector::from_iterator(
                center.len(),
                center
                    .iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(&c, (&l, &u))| c.clamp(l, u)),
            ),
            _ => panic!("single-level quadratic supports box or full-space sets"),
        };
        let optimum = 0.5
            * curvature
                .iter()
                .zip(arg_min.iter().zip(center.iter()))
                .map(|(&q, (&x, &c))| q * (x - c) * (x - c))
                .sum::<f64>();
        let q_max = curvature.max();
        let start = set.interior_point();
        let grad_bound = {
            // sup ||grad f|| over the box, coordinatewise
            let mut b = 0.0f64;
            if let FeasibleSet::Box { lower, upper } = &set {
                for i in 0..center.len() {
                    let reach = (lower[i] - center[i]).abs().max((upper[i] - center[i]).abs());
                    b += (curvature[i] * reach).powi(2);
                }
            }
            b.sqrt().max(1.0)
        };
        SingleLevelQuadratic {
            lipschitz: Some(LipschitzInfo {
                f: grad_bound,
                g: 1.0,
                grad_f: q_max,
                grad_g: 0.0,
            }),
            curvature,
            center,
            noise_grad,
            set,
            start,
            arg_min,
            optimum,
        }
    }

    /// Strip the declared smoothness constants; the parameter-free
    /// solver regime must build its schedule without them.
    pub fn without_lipschitz(mut self) -> Self {
        self.lipschitz = None;
        self
    }

    pub fn with_initial_point(mut self, x0: Vector) -> Self {
        assert!(self.set.contains(&x0).unwrap_or(false), "start must be feasible");
        self.start = x0;
        self
    }
}

impl Problem for SingleLevelQuadratic {
    fn inner_dim(&self) -> usize {
        self.center.len()
    }

    fn outer_dim(&self) -> usize {
        self.center.len()
    }

    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    fn initial_point(&self) -> Vector {
        self.start.clone()
    }

    fn oracle_spec(&self) -> OracleSpec {
        let m = self.outer_dim() as f64;
        let grad_bound = self.lipschitz.map_or(10.0, |l| l.f);
        OracleSpec {
            inner_dim: self.inner_dim(),
            outer_dim: self.outer_dim(),
            sigma_value: 0.0,
            sigma_jacobian: m.sqrt(),
            sigma_outer_grad: (grad_bound.powi(2) + m * self.noise_grad.powi(2)).sqrt(),
            lipschitz: self.lipschitz,
        }
    }

    fn inner_value(&self, x: &Vector) -> Vector {
        x.clone()
    }

    fn inner_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::identity(self.inner_dim(), self.inner_dim())
    }

    fn outer_value(&self, u: &Vector) -> f64 {
        0.5 * self
            .curvature
            .iter()
            .zip(u.iter().zip(self.center.iter()))
            .map(|(&q, (&x, &c))| q * (x - c) * (x - c))
            .sum::<f64>()
    }

    fn outer_grad(&self, u: &Vector) -> Vector {
        Vector::from_iterator(
            u.len(),
            self.curvature
                .iter()
                .zip(u.iter().zip(self.center.iter()))
                .map(|(&q, (&x, &c))| q * (x - c)),
        )
    }

    fn sample_inner_value(&self, x: &Vector, _rng: &mut ChaCha8Rng) -> Vector {
        x.clone()
    }

    fn sample_inner_jacobian(&self, _x: &Vector, _rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::identity(self.inner_dim(), self.inner_dim())
    }

    fn sample_outer_grad(&self, u: &Vector, rng: &mut ChaCha8Rng) -> Vector {
        perturb_vector(&self.outer_grad(u), self.noise_grad, rng)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.optimum)
    }

    fn minimizer(&self) -> Option<Vector> {
        Some(self.arg_min.clone())
    }

    fn identity_inner(&self) -> bool {
        true
    }
}
