//! Low-rank matrix estimation: approximate an unknown mean matrix by a
//! rank-`k` product,
//!
//! ```text
//! min_{(U, V) in S} || E[X] - U V^T ||_F^2
//! ```
//!
//! where samples `X` are unbiased for the target and `S` is a Frobenius
//! ball on the stacked factor pair. The decision variable is the
//! flattened pair `(U, V)`; the inner map `g(U, V) = E[X] - U V^T` is
//! sampled through `X`, while its Jacobian is deterministic in `(U, V)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::FeasibleSet;
use crate::oracle::{perturb_matrix, LipschitzInfo, OracleSpec, Problem};
use crate::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct LowRankProblem {
    target: Matrix,
    size: usize,
    rank: usize,
    noise: f64,
    set: FeasibleSet,
    start: Vector,
    factors0: Vector,
    target_norm: f64,
}

impl LowRankProblem {
    /// Random instance whose target is exactly rank `rank`, with the
    /// generating factors inside the constraint ball, so the optimum is 0.
    pub fn random(size: usize, rank: usize, noise: f64, seed: u64) -> Self {
        assert!(rank >= 1 && rank < size, "rank must lie in [1, size)");
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c52_4b31);
        let scale = (rank as f64).sqrt().recip();
        let u0 = Matrix::from_fn(size, rank, |_, _| {
            scale * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let v0 = Matrix::from_fn(size, rank, |_, _| {
            scale * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let target = &u0 * v0.transpose();
        let factors0 = Self::flatten(&u0, &v0);
        let radius = 1.5 * factors0.norm();
        let set = FeasibleSet::ball(Vector::zeros(2 * size * rank), radius).expect("radius > 0");
        // fixed feasible starting point away from the saddle at the origin
        let start_raw = Vector::from_fn(2 * size * rank, |_, _| {
            0.3 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let start = set.project(&start_raw).expect("projection succeeds");
        let target_norm = target.norm();
        LowRankProblem {
            target,
            size,
            rank,
            noise,
            set,
            start,
            factors0,
            target_norm,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn flatten(u: &Matrix, v: &Matrix) -> Vector {
        let mut out = Vector::zeros(u.len() + v.len());
        out.rows_mut(0, u.len())
            .copy_from_slice(u.as_slice());
        out.rows_mut(u.len(), v.len())
            .copy_from_slice(v.as_slice());
        out
    }

    /// Split the flattened decision variable into the factor pair.
    pub fn factors(&self, x: &Vector) -> (Matrix, Matrix) {
        let nk = self.size * self.rank;
        let u = Matrix::from_column_slice(self.size, self.rank, &x.as_slice()[..nk]);
        let v = Matrix::from_column_slice(self.size, self.rank, &x.as_slice()[nk..]);
        (u, v)
    }

    fn residual_matrix(&self, x: &Vector) -> Matrix {
        let (u, v) = self.factors(x);
        &self.target - u * v.transpose()
    }
}

impl Problem for LowRankProblem {
    fn inner_dim(&self) -> usize {
        2 * self.size * self.rank
    }

    fn outer_dim(&self) -> usize {
        self.size * self.size
    }

    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    fn initial_point(&self) -> Vector {
        self.start.clone()
    }

    fn oracle_spec(&self) -> OracleSpec {
        let n = self.size as f64;
        let radius = match &self.set {
            FeasibleSet::Ball { radius, .. } => *radius,
            _ => 10.0,
        };
        // ||U V^T||_F <= (||U||_F^2 + ||V||_F^2) / 2 <= radius^2 / 2
        let g_reach = self.target_norm + 0.5 * radius * radius;
        OracleSpec {
            inner_dim: self.inner_dim(),
            outer_dim: self.outer_dim(),
            sigma_value: self.noise * n,
            sigma_jacobian: n.sqrt() * radius,
            sigma_outer_grad: 2.0 * g_reach,
            lipschitz: Some(LipschitzInfo {
                f: 2.0 * g_reach,
                g: n.sqrt() * radius,
                grad_f: 2.0,
                grad_g: n.sqrt(),
            }),
        }
    }

    fn inner_value(&self, x: &Vector) -> Vector {
        let res = self.residual_matrix(x);
        Vector::from_column_slice(res.as_slice())
    }

    /// Jacobian of `vec(target - U V^T)` in the flattened variable:
    /// column-major layout throughout.
    fn inner_jacobian(&self, x: &Vector) -> Matrix {
        let (u, v) = self.factors(x);
        let n = self.size;
        let k = self.rank;
        let nk = n * k;
        let mut jac = Matrix::zeros(n * n, 2 * nk);
        for b in 0..k {
            for j in 0..n {
                let vjb = v[(j, b)];
                for i in 0..n {
                    // d(residual_{ij}) / dU_{ib} = -V_{jb}
                    jac[(j * n + i, b * n + i)] = -vjb;
                    // d(residual_{ij}) / dV_{jb} = -U_{ib}
                    jac[(j * n + i, nk + b * n + j)] = -u[(i, b)];
                }
            }
        }
        jac
    }

    fn outer_value(&self, u: &Vector) -> f64 {
        u.norm_squared()
    }

    fn outer_grad(&self, u: &Vector) -> Vector {
        u * 2.0
    }

    fn sample_inner_value(&self, x: &Vector, rng: &mut ChaCha8Rng) -> Vector {
        let sampled_target = perturb_matrix(&self.target, self.noise, rng);
        let (u, v) = self.factors(x);
        let res = sampled_target - u * v.transpose();
        Vector::from_column_slice(res.as_slice())
    }

    fn sample_inner_jacobian(&self, x: &Vector, _rng: &mut ChaCha8Rng) -> Matrix {
        // the sampled matrix enters g only as an additive term, so the
        // Jacobian is observed exactly
        self.inner_jacobian(x)
    }

    fn sample_outer_grad(&self, u: &Vector, _rng: &mut ChaCha8Rng) -> Vector {
        self.outer_grad(u)
    }

    fn optimal_value(&self) -> Option<f64> {
        // the target is exactly rank k with feasible factors
        Some(0.0)
    }

    fn minimizer(&self) -> Option<Vector> {
        Some(self.factors0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn objective_zero_at_generating_factors() {
        let p = LowRankProblem::random(6, 2, 0.0, 1);
        let xm = p.minimizer().unwrap();
        assert!(p.feasible_set().contains(&xm).unwrap());
        assert!(p.objective(&xm) < 1e-24);
    }

    #[test]
    fn gradient_matches_factor_closed_form() {
        // grad_U F = -2 (target - U V^T) V, grad_V F = -2 (target - U V^T)^T U
        let p = LowRankProblem::random(5, 2, 0.0, 3);
        let x = p.initial_point();
        let grad = p.objective_grad(&x);
        let (u, v) = p.factors(&x);
        let res = &p.target - &u * v.transpose();
        let grad_u = -(&res * &v) * 2.0;
        let grad_v = -(res.transpose() * &u) * 2.0;
        let expected = LowRankProblem::flatten(&grad_u, &grad_v);
        assert_relative_eq!(grad, expected, epsilon = 1e-12);
    }

    #[test]
    fn objective_invariant_under_orthogonal_factor_rotation() {
        let p = LowRankProblem::random(5, 3, 0.0, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = p.initial_point();
        let (u, v) = p.factors(&x);
        let f0 = p.objective(&x);
        for _ in 0..10 {
            let raw = Matrix::from_fn(3, 3, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let q = raw.qr().q();
            // confirm orthogonality, then rotate both factors
            assert_relative_eq!(
                q.transpose() * &q,
                Matrix::identity(3, 3),
                epsilon = 1e-12
            );
            let rotated = LowRankProblem::flatten(&(&u * &q), &(&v * &q));
            assert_relative_eq!(p.objective(&rotated), f0, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = LowRankProblem::random(4, 2, 0.0, 9);
        let x = p.initial_point();
        let jac = p.inner_jacobian(&x);
        let h = 1e-6;
        for col in 0..p.inner_dim() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += h;
            xm[col] -= h;
            let fd = (p.inner_value(&xp) - p.inner_value(&xm)) / (2.0 * h);
            assert_relative_eq!(jac.column(col).into_owned(), fd, epsilon = 1e-8);
        }
    }
}
