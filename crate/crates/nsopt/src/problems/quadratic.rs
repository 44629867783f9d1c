//! Synthetic quadratic composition: `f(u) = 0.5 ||u - target||^2`,
//! `g(x) = A x + b`. Closed-form objective, gradient and optimum make
//! it the main correctness fixture.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::FeasibleSet;
use crate::oracle::{perturb_matrix, perturb_vector, LipschitzInfo, OracleSpec, Problem};
use crate::{Matrix, Vector};

/// Entrywise Gaussian noise levels for the three sampled quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseLevels {
    pub value: f64,
    pub jacobian: f64,
    pub outer_grad: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticQuadratic {
    design: Matrix,
    shift: Vector,
    target: Vector,
    noise: NoiseLevels,
    set: FeasibleSet,
    start: Vector,
    optimum: f64,
    arg_min: Vector,
    norm_design: f64,
}

impl SyntheticQuadratic {
    /// Random instance with a known interior minimizer: the target is
    /// chosen as `A x_min + b` so the composite objective attains 0.
    pub fn random(inner_dim: usize, outer_dim: usize, noise: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5153_5144);
        let design = Matrix::from_fn(outer_dim, inner_dim, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) / (inner_dim as f64).sqrt()
        });
        let shift = Vector::from_fn(outer_dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let arg_min = Vector::from_fn(inner_dim, |_, _| rng.random_range(-1.0..1.0));
        let set = FeasibleSet::symmetric_box(inner_dim, 2.0).expect("valid box");
        Self::with_known_minimizer(design, shift, arg_min, set, NoiseLevels {
            value: noise,
            jacobian: noise,
            outer_grad: noise,
        })
    }

    /// Random instance with a prescribed singular-value range for the
    /// design matrix (random orthogonal factors). Conditioning controls
    /// how long the solver's transient lasts, so rate experiments use
    /// this to keep every grid point in the decaying regime.
    pub fn with_spectrum(
        inner_dim: usize,
        outer_dim: usize,
        sv_min: f64,
        sv_max: f64,
        noise: f64,
        seed: u64,
    ) -> Self {
        assert!(outer_dim <= inner_dim, "spectrum constructor expects a wide design");
        assert!(0.0 < sv_min && sv_min <= sv_max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5153_5150);
        let left = Matrix::from_fn(outer_dim, outer_dim, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        })
        .qr()
        .q();
        let right = Matrix::from_fn(inner_dim, outer_dim, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        })
        .qr()
        .q();
        let mut design = Matrix::zeros(outer_dim, inner_dim);
        for i in 0..outer_dim {
            let sv = rng.random_range(sv_min..=sv_max);
            let col = right.column(i) * sv;
            for j in 0..outer_dim {
                for k in 0..inner_dim {
                    design[(j, k)] += left[(j, i)] * col[k];
                }
            }
        }
        let shift = Vector::from_fn(outer_dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let arg_min = Vector::from_fn(inner_dim, |_, _| rng.random_range(-1.0..1.0));
        let set = FeasibleSet::symmetric_box(inner_dim, 2.0).expect("valid box");
        Self::with_known_minimizer(design, shift, arg_min, set, NoiseLevels {
            value: noise,
            jacobian: noise,
            outer_grad: noise,
        })
    }

    /// Square, well-conditioned instance (`A` close to the identity);
    /// useful where fast deterministic convergence matters.
    pub fn well_conditioned(dim: usize, noise: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_4331);
        let mut design = Matrix::identity(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                design[(i, j)] += 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)
                    / (dim as f64).sqrt();
            }
        }
        let shift = Vector::from_fn(dim, |_, _| 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal));
        let arg_min = Vector::from_fn(dim, |_, _| rng.random_range(-0.75..0.75));
        let set = FeasibleSet::symmetric_box(dim, 1.5).expect("valid box");
        Self::with_known_minimizer(design, shift, arg_min, set, NoiseLevels {
            value: noise,
            jacobian: noise,
            outer_grad: noise,
        })
    }

    /// Build from explicit parts, placing the target so that `arg_min`
    /// (which must be feasible) attains objective value zero.
    pub fn with_known_minimizer(
        design: Matrix,
        shift: Vector,
        arg_min: Vector,
        set: FeasibleSet,
        noise: NoiseLevels,
    ) -> Self {
        assert_eq!(design.ncols(), set.dim(), "design/set dimension mismatch");
        assert!(
            set.contains(&arg_min).unwrap_or(false),
            "intended minimizer must be feasible"
        );
        let target = &design * &arg_min + &shift;
        let start = set.interior_point();
        let norm_design = design.clone().svd(false, false).singular_values[0];
        SyntheticQuadratic {
            design,
            shift,
            target,
            noise,
            set,
            start,
            optimum: 0.0,
            arg_min,
            norm_design,
        }
    }

    pub fn with_initial_point(mut self, x0: Vector) -> Self {
        assert!(self.set.contains(&x0).unwrap_or(false), "start must be feasible");
        self.start = x0;
        self
    }

    pub fn design_matrix(&self) -> &Matrix {
        &self.design
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }
}

impl Problem for SyntheticQuadratic {
    fn inner_dim(&self) -> usize {
        self.design.ncols()
    }

    fn outer_dim(&self) -> usize {
        self.design.nrows()
    }

    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    fn initial_point(&self) -> Vector {
        self.start.clone()
    }

    fn oracle_spec(&self) -> OracleSpec {
        let m = self.outer_dim() as f64;
        let n = self.inner_dim() as f64;
        // domain radius for the declared (uncentered) moment bounds
        let x_radius = match &self.set {
            FeasibleSet::Box { lower, upper } => lower.norm().max(upper.norm()),
            FeasibleSet::Ball { center, radius } => center.norm() + radius,
            _ => 10.0,
        };
        let reach = self.norm_design * x_radius + (&self.shift - &self.target).norm();
        OracleSpec {
            inner_dim: self.inner_dim(),
            outer_dim: self.outer_dim(),
            sigma_value: self.noise.value * m.sqrt(),
            sigma_jacobian: (self.design.norm().powi(2) + m * n * self.noise.jacobian.powi(2))
                .sqrt(),
            sigma_outer_grad: ((reach + 3.0 * self.noise.value * m.sqrt()).powi(2)
                + m * self.noise.outer_grad.powi(2))
            .sqrt(),
            lipschitz: Some(LipschitzInfo {
                f: reach + 1.0,
                g: self.norm_design,
                grad_f: 1.0,
                grad_g: 0.0,
            }),
        }
    }

    fn inner_value(&self, x: &Vector) -> Vector {
        &self.design * x + &self.shift
    }

    fn inner_jacobian(&self, _x: &Vector) -> Matrix {
        self.design.clone()
    }

    fn outer_value(&self, u: &Vector) -> f64 {
        0.5 * (u - &self.target).norm_squared()
    }

    fn outer_grad(&self, u: &Vector) -> Vector {
        u - &self.target
    }

    fn sample_inner_value(&self, x: &Vector, rng: &mut ChaCha8Rng) -> Vector {
        perturb_vector(&self.inner_value(x), self.noise.value, rng)
    }

    fn sample_inner_jacobian(&self, _x: &Vector, rng: &mut ChaCha8Rng) -> Matrix {
        perturb_matrix(&self.design, self.noise.jacobian, rng)
    }

    fn sample_outer_grad(&self, u: &Vector, rng: &mut ChaCha8Rng) -> Vector {
        perturb_vector(&self.outer_grad(u), self.noise.outer_grad, rng)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.optimum)
    }

    fn minimizer(&self) -> Option<Vector> {
        Some(self.arg_min.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gradient_matches_closed_form() {
        let p = SyntheticQuadratic::random(5, 3, 0.0, 1);
        let x = Vector::from_fn(5, |i, _| 0.05 * i as f64 - 0.1);
        let grad = p.objective_grad(&x);
        let expected = p.design.tr_mul(&(&p.design * &x + &p.shift - &p.target));
        assert_relative_eq!(grad, expected, epsilon = 1e-14);
    }

    #[test]
    fn known_minimizer_attains_zero() {
        let p = SyntheticQuadratic::random(6, 4, 0.3, 2);
        let xm = p.minimizer().unwrap();
        assert!(p.set.contains(&xm).unwrap());
        assert!(p.objective(&xm).abs() < 1e-24);
        assert!(p.objective_grad(&xm).norm() < 1e-12);
        assert_eq!(p.optimal_value(), Some(0.0));
    }

    #[test]
    fn well_conditioned_design_is_near_identity() {
        let p = SyntheticQuadratic::well_conditioned(8, 0.0, 3);
        let svd = p.design.clone().svd(false, false);
        let smin = svd.singular_values[svd.singular_values.len() - 1];
        let smax = svd.singular_values[0];
        assert!(smin > 0.6 && smax < 1.4, "spectrum [{smin}, {smax}]");
    }
}
