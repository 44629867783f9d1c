//! Policy evaluation for a finite Markov chain with linear value
//! approximation, cast as a nested problem through a sketched residual:
//!
//! ```text
//! min_w || S (Phi w - r - gamma * E[Phat] Phi w) ||^2
//! ```
//!
//! The mean equation is `V = r + gamma P V` with `V ~ Phi w`. The
//! transition matrix is unknown to the solver: each oracle query draws
//! a sample transition matrix `Phat` with exactly one simulated next
//! state per row, so `E[Phat] = P`. The inner map
//! `g(w) = S((I - gamma Phat) Phi w - r)` is affine in `w` and the outer
//! function is the squared norm, whose gradient is exact.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::FeasibleSet;
use crate::oracle::{LipschitzInfo, OracleSpec, Problem};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone)]
pub struct PolicyEvalProblem {
    transition: Matrix,
    reward: Vector,
    discount: f64,
    features: Matrix,
    sketch: Matrix,
    set: FeasibleSet,
    // cached quantities
    design: Matrix,       // B = S (I - gamma P) Phi
    offset: Vector,       // S r
    sketch_features: Matrix, // S Phi
    cumulative_rows: Vec<Vec<f64>>,
    w_star: Vector,
    optimum: f64,
    design_norm: f64,
    design_norm_min: f64,
}

impl PolicyEvalProblem {
    /// Random well-posed instance. The reward is placed near the span of
    /// the features so the least-squares residual stays small
    /// (`residual_scale` controls it); the sketch has orthonormal rows
    /// with Gaussian-seeded directions and is rescaled so the design
    /// matrix has unit spectral norm. The default sketch keeps three
    /// rows per feature: a square sketch of a random subspace is often
    /// badly conditioned, while the 3x oversampling keeps the design
    /// condition number small across seeds.
    pub fn build(states: usize, dim: usize, discount: f64, seed: u64) -> Result<Self> {
        Self::build_with(states, dim, (3 * dim).min(states), discount, 0.1, seed)
    }

    pub fn build_with(
        states: usize,
        dim: usize,
        sketch_dim: usize,
        discount: f64,
        residual_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::invalid(format!(
                "discount must lie in (0, 1), got {discount}"
            )));
        }
        if dim > states || sketch_dim > states || dim == 0 {
            return Err(Error::invalid(
                "feature/sketch dimensions must be positive and at most the state count",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5045_5641);
        let mut transition = Matrix::zeros(states, states);
        for i in 0..states {
            let mut row: Vec<f64> = (0..states).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            for (j, v) in row.iter().enumerate() {
                transition[(i, j)] = *v;
            }
        }
        // orthonormal feature columns and sketch rows (Gaussian + QR)
        let raw_features = Matrix::from_fn(states, dim, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let features = raw_features.qr().q();
        let raw_sketch = Matrix::from_fn(states, sketch_dim, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let sketch = raw_sketch.qr().q().transpose();

        let target_w = {
            let mut w = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            w *= 3.0 / w.norm();
            w
        };
        let perturbation =
            Vector::from_fn(states, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let bellman = &features - &transition * &features * discount; // (I - gamma P) Phi
        let reward = &bellman * &target_w + perturbation * residual_scale;

        Self::from_parts(transition, reward, discount, features, sketch)
    }

    /// Assemble from explicit components (used by the small hand-checked
    /// fixtures); normalizes nothing.
    pub fn from_parts(
        transition: Matrix,
        reward: Vector,
        discount: f64,
        features: Matrix,
        sketch: Matrix,
    ) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::invalid(format!(
                "discount must lie in (0, 1), got {discount}"
            )));
        }
        let states = transition.nrows();
        if transition.ncols() != states
            || reward.len() != states
            || features.nrows() != states
            || sketch.ncols() != states
        {
            return Err(Error::invalid("component dimensions disagree"));
        }
        for i in 0..states {
            let row_sum: f64 = (0..states).map(|j| transition[(i, j)]).sum();
            if (row_sum - 1.0).abs() > 1e-9 || (0..states).any(|j| transition[(i, j)] < 0.0) {
                return Err(Error::invalid("transition matrix must be row-stochastic"));
            }
        }

        let bellman = &features - &transition * &features * discount;
        let mut design = &sketch * &bellman;
        let mut offset = &sketch * &reward;
        let mut sketch = sketch;
        // unit spectral norm for the design keeps instances comparable
        let svd = design.clone().svd(false, false);
        let norm = svd.singular_values[0];
        if norm > 0.0 {
            sketch /= norm;
            design /= norm;
            offset /= norm;
        }
        let svd = design.clone().svd(false, false);
        let design_norm = svd.singular_values[0];
        let design_norm_min = svd.singular_values[svd.singular_values.len() - 1];

        let normal = design.tr_mul(&design);
        let rhs = design.tr_mul(&offset);
        let w_star = normal
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| normal.lu().solve(&rhs))
            .ok_or_else(|| Error::invalid("design matrix is rank-deficient"))?;
        let optimum = (&design * &w_star - &offset).norm_squared();

        let radius = (2.0 * w_star.norm()).max(5.0);
        let set = FeasibleSet::ball(Vector::zeros(design.ncols()), radius)?;

        let cumulative_rows = (0..states)
            .map(|i| {
                let mut acc = 0.0;
                (0..states)
                    .map(|j| {
                        acc += transition[(i, j)];
                        acc
                    })
                    .collect()
            })
            .collect();
        let sketch_features = &sketch * &features;

        Ok(PolicyEvalProblem {
            transition,
            reward,
            discount,
            features,
            sketch,
            set,
            design,
            offset,
            sketch_features,
            cumulative_rows,
            w_star,
            optimum,
            design_norm,
            design_norm_min,
        })
    }

    pub fn states(&self) -> usize {
        self.transition.nrows()
    }

    /// Exact least-squares solution of the sketched residual problem.
    pub fn solution(&self) -> &Vector {
        &self.w_star
    }

    pub fn transition_matrix(&self) -> &Matrix {
        &self.transition
    }

    pub fn reward(&self) -> &Vector {
        &self.reward
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn design_condition(&self) -> f64 {
        self.design_norm / self.design_norm_min
    }

    /// Draw one simulated next state per row; `E[Phat] = P`.
    pub fn sample_next_states(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.cumulative_rows
            .iter()
            .map(|row| {
                let v: f64 = rng.random();
                row.iter().position(|&c| v <= c).unwrap_or(row.len() - 1)
            })
            .collect()
    }

    /// Dense one-hot sample transition matrix (test helper).
    pub fn densify_sample(&self, next_states: &[usize]) -> Matrix {
        let s = self.states();
        let mut p = Matrix::zeros(s, s);
        for (i, &j) in next_states.iter().enumerate() {
            p[(i, j)] = 1.0;
        }
        p
    }

    /// `S * Phat * v` for one sampled transition: row `i` of `Phat v` is
    /// `v[next_i]`, so the product is a reweighted sum of sketch columns.
    fn sketch_sampled_transition_vec(&self, next_states: &[usize], v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.sketch.nrows());
        for (i, &j) in next_states.iter().enumerate() {
            out.axpy(v[j], &self.sketch.column(i).into_owned(), 1.0);
        }
        out
    }
}

impl Problem for PolicyEvalProblem {
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
        Vector::zeros(self.inner_dim())
    }

    fn oracle_spec(&self) -> OracleSpec {
        let radius = match &self.set {
            FeasibleSet::Ball { radius, .. } => *radius,
            _ => 10.0,
        };
        let g_reach = self.design_norm * radius + self.offset.norm();
        // one-hot rows keep every sampled quantity bounded
        let sampled_design_bound = self.sketch_features.norm()
            + self.discount * self.sketch.norm() * self.features.norm();
        OracleSpec {
            inner_dim: self.inner_dim(),
            outer_dim: self.outer_dim(),
            sigma_value: sampled_design_bound * radius + self.offset.norm() + g_reach,
            sigma_jacobian: sampled_design_bound,
            sigma_outer_grad: 2.0 * (g_reach + 1.0),
            lipschitz: Some(LipschitzInfo {
                f: 2.0 * (g_reach + 1.0),
                g: self.design_norm,
                grad_f: 2.0,
                grad_g: 0.0,
            }),
        }
    }

    fn inner_value(&self, w: &Vector) -> Vector {
        &self.design * w - &self.offset
    }

    fn inner_jacobian(&self, _w: &Vector) -> Matrix {
        self.design.clone()
    }

    fn outer_value(&self, u: &Vector) -> f64 {
        u.norm_squared()
    }

    fn outer_grad(&self, u: &Vector) -> Vector {
        u * 2.0
    }

    fn sample_inner_value(&self, w: &Vector, rng: &mut ChaCha8Rng) -> Vector {
        let next = self.sample_next_states(rng);
        let value_estimate = &self.features * w; // Phi w
        &self.sketch_features * w
            - self.sketch_sampled_transition_vec(&next, &value_estimate) * self.discount
            - &self.offset
    }

    fn sample_inner_jacobian(&self, _w: &Vector, rng: &mut ChaCha8Rng) -> Matrix {
        let next = self.sample_next_states(rng);
        let mut jac = self.sketch_features.clone();
        for (i, &j) in next.iter().enumerate() {
            // subtract gamma * S[:, i] * Phi[j, :]
            let col = self.sketch.column(i);
            let row = self.features.row(j);
            for a in 0..jac.nrows() {
                for b in 0..jac.ncols() {
                    jac[(a, b)] -= self.discount * col[a] * row[b];
                }
            }
        }
        jac
    }

    fn sample_outer_grad(&self, u: &Vector, _rng: &mut ChaCha8Rng) -> Vector {
        // the outer function ||.||^2 is known; its gradient is exact
        self.outer_grad(u)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.optimum)
    }

    fn minimizer(&self) -> Option<Vector> {
        Some(self.w_star.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{sample, RunSeed, StreamBundle};
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_discount() {
        assert!(PolicyEvalProblem::build(4, 2, 0.0, 1).is_err());
        assert!(PolicyEvalProblem::build(4, 2, 1.0, 1).is_err());
        assert!(PolicyEvalProblem::build(4, 2, -0.3, 1).is_err());
        assert!(PolicyEvalProblem::build(4, 8, 0.5, 1).is_err());
    }

    #[test]
    fn two_state_identity_features_solution_matches_hand_solve() {
        // S = Phi = I, gamma = 1/2: w* solves the 2x2 normal equations
        // for || (I - gamma P) w - r ||, inverted by hand here.
        let p_mat = Matrix::from_row_slice(2, 2, &[0.75, 0.25, 0.4, 0.6]);
        let r = Vector::from_vec(vec![1.0, -0.5]);
        let problem = PolicyEvalProblem::from_parts(
            p_mat.clone(),
            r.clone(),
            0.5,
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();

        let bellman = Matrix::identity(2, 2) - &p_mat * 0.5;
        let normal = bellman.tr_mul(&bellman);
        let rhs = bellman.tr_mul(&r);
        let det = normal[(0, 0)] * normal[(1, 1)] - normal[(0, 1)] * normal[(1, 0)];
        let w_hand = Vector::from_vec(vec![
            (normal[(1, 1)] * rhs[0] - normal[(0, 1)] * rhs[1]) / det,
            (normal[(0, 0)] * rhs[1] - normal[(1, 0)] * rhs[0]) / det,
        ]);
        assert_relative_eq!(problem.solution(), &w_hand, epsilon = 1e-12);
        // (I - gamma P) is invertible here, so the residual optimum is 0
        assert!(problem.optimal_value().unwrap() < 1e-20);
    }

    #[test]
    fn zero_discount_limit_fits_reward_alone() {
        // As gamma -> 0 with S = Phi = I the problem degenerates to the
        // least-squares fit of r, i.e. w* = r.
        let p_mat = Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.2, 0.8]);
        let r = Vector::from_vec(vec![0.7, -1.1]);
        let problem = PolicyEvalProblem::from_parts(
            p_mat,
            r.clone(),
            1e-12,
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        assert_relative_eq!(problem.solution(), &r, epsilon = 1e-9);
    }

    #[test]
    fn sampled_transitions_are_one_hot_and_unbiased() {
        let problem = PolicyEvalProblem::from_parts(
            Matrix::from_row_slice(2, 2, &[0.3, 0.7, 0.9, 0.1]),
            Vector::from_vec(vec![0.0, 1.0]),
            0.5,
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 100_000;
        let mut mean = Matrix::zeros(2, 2);
        for _ in 0..trials {
            let next = problem.sample_next_states(&mut rng);
            let dense = problem.densify_sample(&next);
            for i in 0..2 {
                let row_sum: f64 = (0..2).map(|j| dense[(i, j)]).sum();
                assert_eq!(row_sum, 1.0);
                assert!((0..2).all(|j| dense[(i, j)] == 0.0 || dense[(i, j)] == 1.0));
            }
            mean += dense;
        }
        mean /= trials as f64;
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (mean[(i, j)] - problem.transition_matrix()[(i, j)]).abs() < 0.01,
                    "empirical transition frequency off at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn sampled_value_and_jacobian_are_consistent_with_truth() {
        let problem = PolicyEvalProblem::build(12, 4, 0.5, 7).unwrap();
        let w = Vector::from_fn(4, |i, _| 0.3 * (i as f64 - 1.5));
        // average many samples; both estimators are unbiased
        let trials = 20_000;
        let mut mean_value = Vector::zeros(problem.outer_dim());
        let mut mean_jac = Matrix::zeros(problem.outer_dim(), problem.inner_dim());
        let u = Vector::zeros(problem.outer_dim());
        for k in 0..trials {
            let mut streams = StreamBundle::at_iteration(RunSeed::new(1234, 0), k as u64);
            let s = sample(&problem, &w, &u, &mut streams).unwrap();
            mean_value += s.value;
            mean_jac += s.jacobian;
        }
        mean_value /= trials as f64;
        mean_jac /= trials as f64;
        assert!((mean_value - problem.inner_value(&w)).norm() < 0.02);
        assert!((mean_jac - problem.inner_jacobian(&w)).norm() < 0.05);
    }

    #[test]
    fn default_instance_is_well_posed() {
        let problem = PolicyEvalProblem::build(50, 10, 0.5, 11).unwrap();
        assert!(problem.design_condition() < 10.0, "kappa = {}", problem.design_condition());
        assert!(problem.solution().norm() > 1.0);
        assert!(problem.set.contains(problem.solution()).unwrap());
        // residual is small but nonzero by construction
        let f_star = problem.optimal_value().unwrap();
        assert!(f_star > 0.0 && f_star < 0.5, "residual optimum {f_star}");
    }
}
