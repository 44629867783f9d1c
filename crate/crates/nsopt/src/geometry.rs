//! Feasible sets with exact Euclidean projection, the regularized
//! direction subproblem, and the stationarity measure built from it.
//!
//! The direction subproblem at a point `x` with gradient estimate `z`
//! and regularization `beta > 0` is
//!
//! ```text
//! min_{y in X}  <z, y - x> + (beta/2) ||y - x||^2
//! ```
//!
//! whose solution is `y = proj_X(x - z/beta)` and whose optimal value
//! `eta(x, z) <= 0` vanishes exactly at stationary pairs. The measure
//!
//! ```text
//! V(x, z) = ||ybar(x, z, 1) - x||^2 + ||z - grad F(x)||^2
//! ```
//!
//! generalizes the squared gradient norm to constrained problems: in the
//! unconstrained case it reduces to `||z||^2 + ||z - grad F(x)||^2`.

use crate::{Error, Result, Vector};

/// Euclidean distance below which a point counts as a member of the set.
/// Iterates are produced by projections and convex averaging, so they
/// stay feasible up to roundoff.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// A closed convex constraint set with exact (finite-algorithm)
/// Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// All of `R^dim`; projection is the identity.
    FullSpace { dim: usize },
    /// Axis-aligned box `{ x : lower <= x <= upper }` componentwise.
    Box { lower: Vector, upper: Vector },
    /// Euclidean ball of positive radius around `center`.
    Ball { center: Vector, radius: f64 },
    /// Probability simplex `{ x >= 0 : sum x_i = 1 }` in `R^dim`.
    Simplex { dim: usize },
}

impl FeasibleSet {
    pub fn full_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("set dimension must be positive"));
        }
        Ok(FeasibleSet::FullSpace { dim })
    }

    pub fn bounded_box(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::invalid("set dimension must be positive"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::invalid("box requires lower <= upper componentwise"));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// Symmetric box `[-half_width, half_width]^dim`.
    pub fn symmetric_box(dim: usize, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::invalid("box half-width must be positive"));
        }
        Self::bounded_box(
            Vector::from_element(dim, -half_width),
            Vector::from_element(dim, half_width),
        )
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("set dimension must be positive"));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("ball requires radius > 0"));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("set dimension must be positive"));
        }
        Ok(FeasibleSet::Simplex { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::FullSpace { dim } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Simplex { dim } => *dim,
        }
    }

    fn check_dim(&self, p: &Vector) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: p.len(),
            });
        }
        Ok(())
    }

    /// Exact Euclidean projection `argmin_{v in X} ||v - p||`.
    pub fn project(&self, p: &Vector) -> Result<Vector> {
        self.check_dim(p)?;
        Ok(match self {
            FeasibleSet::FullSpace { .. } => p.clone(),
            FeasibleSet::Box { lower, upper } => Vector::from_iterator(
                p.len(),
                p.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(&v, (&l, &u))| v.clamp(l, u)),
            ),
            FeasibleSet::Ball { center, radius } => {
                let offset = p - center;
                let norm = offset.norm();
                if norm <= *radius {
                    p.clone()
                } else {
                    center + offset * (*radius / norm)
                }
            }
            FeasibleSet::Simplex { .. } => project_simplex(p),
        })
    }

    /// Euclidean distance from `p` to the set.
    pub fn distance(&self, p: &Vector) -> Result<f64> {
        Ok((self.project(p)? - p).norm())
    }

    /// Membership up to [`FEASIBILITY_TOL`].
    pub fn contains(&self, p: &Vector) -> Result<bool> {
        Ok(self.distance(p)? <= FEASIBILITY_TOL)
    }

    /// A canonical feasible point: the origin where feasible, otherwise
    /// the set's natural center (box midpoint, ball center, simplex
    /// barycenter).
    pub fn interior_point(&self) -> Vector {
        match self {
            FeasibleSet::FullSpace { dim } => Vector::zeros(*dim),
            FeasibleSet::Box { lower, upper } => (lower + upper) * 0.5,
            FeasibleSet::Ball { center, .. } => center.clone(),
            FeasibleSet::Simplex { dim } => Vector::from_element(*dim, 1.0 / *dim as f64),
        }
    }
}

/// Sort-and-threshold projection onto the probability simplex.
/// Exact in `O(n log n)`.
fn project_simplex(p: &Vector) -> Vector {
    let n = p.len();
    let mut sorted: Vec<f64> = p.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-finite entry in projection input"));

    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if v - candidate > 0.0 {
            threshold = candidate;
        } else {
            break;
        }
    }
    Vector::from_iterator(n, p.iter().map(|&v| (v - threshold).max(0.0)))
}

/// Solution of the regularized direction subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    /// Minimizer `ybar(x, z, beta)`.
    pub y: Vector,
    /// Optimal value `eta(x, z) = <z, y - x> + (beta/2)||y - x||^2`,
    /// always nonpositive.
    pub eta: f64,
    /// Step direction `y - x`.
    pub d: Vector,
}

/// Solve `min_{y in X} <z, y - x> + (beta/2)||y - x||^2`.
///
/// `x` must already be feasible (within [`FEASIBILITY_TOL`]); the value
/// `eta` is always evaluated from the definition so the constrained and
/// unconstrained cases share one code path.
pub fn solve_subproblem(
    set: &FeasibleSet,
    x: &Vector,
    z: &Vector,
    beta: f64,
) -> Result<SubproblemSolution> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!(
            "subproblem regularization must be positive, got {beta}"
        )));
    }
    set.check_dim(x)?;
    set.check_dim(z)?;
    let dist = set.distance(x)?;
    if dist > FEASIBILITY_TOL {
        return Err(Error::Infeasible { distance: dist });
    }
    let y = set.project(&(x - z / beta))?;
    let d = &y - x;
    let eta = z.dot(&d) + 0.5 * beta * d.norm_squared();
    Ok(SubproblemSolution { y, eta, d })
}

/// Stationarity violation `V(x, z) = ||ybar(x,z,1) - x||^2 + ||z - grad_f||^2`
/// for the primal-dual pair `(x, z)`, where `grad_f` is the true
/// composite gradient at `x`.
pub fn optimality_measure(
    set: &FeasibleSet,
    x: &Vector,
    z: &Vector,
    grad_f: &Vector,
) -> Result<f64> {
    if grad_f.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            actual: grad_f.len(),
        });
    }
    let sub = solve_subproblem(set, x, z, 1.0)?;
    Ok(sub.d.norm_squared() + (z - grad_f).norm_squared())
}

/// Gradient of the subproblem's optimal value `eta` with respect to
/// `(x, z)`: `grad_x eta = -z + beta (x - y)`, `grad_z eta = y - x`.
/// Lipschitz with constant [`eta_grad_lipschitz`]`(beta)`.
pub fn eta_gradient(set: &FeasibleSet, x: &Vector, z: &Vector, beta: f64) -> Result<(Vector, Vector)> {
    let sub = solve_subproblem(set, x, z, beta)?;
    let grad_x = -z + (x - &sub.y) * beta;
    let grad_z = sub.d;
    Ok((grad_x, grad_z))
}

/// Lipschitz constant of the gradient of `eta(.,.)` at regularization
/// `beta`: `2 sqrt((1 + beta)^2 + (1 + 1/(2 beta))^2)`.
pub fn eta_grad_lipschitz(beta: f64) -> f64 {
    2.0 * ((1.0 + beta).powi(2) + (1.0 + 0.5 / beta).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn vec2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
        Vector::from_iterator(n, (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)))
    }

    /// One random set of each supported kind, dimension `n`.
    fn random_sets(rng: &mut ChaCha8Rng, n: usize) -> Vec<FeasibleSet> {
        let half_width = 0.2 + rng.random::<f64>();
        let center = random_vector(rng, n, 0.5);
        let radius = 0.2 + rng.random::<f64>();
        vec![
            FeasibleSet::full_space(n).unwrap(),
            FeasibleSet::symmetric_box(n, half_width).unwrap(),
            FeasibleSet::ball(center, radius).unwrap(),
            FeasibleSet::simplex(n).unwrap(),
        ]
    }

    /// Brute-force simplex projection by KKT active-set enumeration:
    /// try every support set, solve for the multiplier, and keep the
    /// unique candidate satisfying all KKT conditions.
    fn simplex_projection_kkt(p: &Vector) -> Vector {
        let n = p.len();
        let mut best: Option<(f64, Vector)> = None;
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sum: f64 = support.iter().map(|&i| p[i]).sum();
            let theta = (sum - 1.0) / support.len() as f64;
            let mut y = Vector::zeros(n);
            let mut feasible = true;
            for &i in &support {
                y[i] = p[i] - theta;
                if y[i] < -1e-12 {
                    feasible = false;
                }
            }
            // off-support stationarity: p_i - theta <= 0
            for i in 0..n {
                if mask & (1 << i) == 0 && p[i] - theta > 1e-12 {
                    feasible = false;
                }
            }
            if feasible {
                let dist = (&y - p).norm_squared();
                match &best {
                    Some((d, _)) if *d <= dist => {}
                    _ => best = Some((dist, y)),
                }
            }
        }
        best.expect("KKT enumeration found no candidate").1
    }

    #[test]
    fn project_box_clips_per_coordinate() {
        let set = FeasibleSet::symmetric_box(2, 1.0).unwrap();
        let y = set.project(&vec2(2.0, 0.5)).unwrap();
        assert_relative_eq!(y, vec2(1.0, 0.5));
    }

    #[test]
    fn project_ball_scales_radially() {
        let set = FeasibleSet::ball(Vector::zeros(2), 1.0).unwrap();
        let y = set.project(&vec2(3.0, 4.0)).unwrap();
        assert_relative_eq!(y, vec2(0.6, 0.8), epsilon = 1e-15);
    }

    #[test]
    fn project_simplex_symmetric_pair() {
        let set = FeasibleSet::simplex(2).unwrap();
        let y = set.project(&vec2(1.0, 1.0)).unwrap();
        assert_relative_eq!(y, vec2(0.5, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn project_simplex_matches_kkt_enumeration() {
        let p = Vector::from_vec(vec![0.9, 0.5, -0.2]);
        let set = FeasibleSet::simplex(3).unwrap();
        let fast = set.project(&p).unwrap();
        let oracle = simplex_projection_kkt(&p);
        assert_relative_eq!(fast, oracle, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=6 {
            for _ in 0..50 {
                let p = random_vector(&mut rng, n, 2.0);
                let set = FeasibleSet::simplex(n).unwrap();
                let fast = set.project(&p).unwrap();
                let oracle = simplex_projection_kkt(&p);
                assert_relative_eq!(fast, oracle, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn project_dimension_mismatch_rejected() {
        let set = FeasibleSet::simplex(3).unwrap();
        let err = set.project(&vec2(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, actual: 2 }));
    }

    #[test]
    fn box_constructor_validates_bounds() {
        assert!(FeasibleSet::bounded_box(vec2(1.0, 0.0), vec2(0.0, 1.0)).is_err());
        assert!(FeasibleSet::ball(Vector::zeros(2), 0.0).is_err());
        assert!(FeasibleSet::ball(Vector::zeros(2), -1.0).is_err());
    }

    #[test]
    fn subproblem_full_space_closed_form() {
        let set = FeasibleSet::full_space(2).unwrap();
        let sol = solve_subproblem(&set, &Vector::zeros(2), &vec2(1.0, 2.0), 2.0).unwrap();
        assert_relative_eq!(sol.y, vec2(-0.5, -1.0), epsilon = 1e-15);
        assert_relative_eq!(sol.eta, -1.25, epsilon = 1e-15);
        assert_relative_eq!(sol.d, vec2(-0.5, -1.0), epsilon = 1e-15);
    }

    #[test]
    fn subproblem_zero_gradient_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for set in random_sets(&mut rng, 4) {
            let x = set.project(&random_vector(&mut rng, 4, 1.0)).unwrap();
            let sol = solve_subproblem(&set, &x, &Vector::zeros(4), 3.0).unwrap();
            assert_relative_eq!(sol.y, x, epsilon = 1e-12);
            assert!(sol.eta.abs() <= 1e-12);
            assert!(sol.d.norm() <= 1e-12);
        }
    }

    #[test]
    fn subproblem_box_value_matches_grid_minimum() {
        let set = FeasibleSet::symmetric_box(2, 0.25).unwrap();
        let x = Vector::zeros(2);
        let z = vec2(1.0, 2.0);
        let beta = 2.0;
        let sol = solve_subproblem(&set, &x, &z, beta).unwrap();
        assert_relative_eq!(sol.y, vec2(-0.25, -0.25), epsilon = 1e-15);

        // dense grid over the box as an independent minimum oracle
        let objective = |y: &Vector| z.dot(&(y - &x)) + 0.5 * beta * (y - &x).norm_squared();
        let mut grid_min = f64::INFINITY;
        let steps = 200;
        for i in 0..=steps {
            for j in 0..=steps {
                let y = vec2(
                    -0.25 + 0.5 * i as f64 / steps as f64,
                    -0.25 + 0.5 * j as f64 / steps as f64,
                );
                grid_min = grid_min.min(objective(&y));
            }
        }
        assert_relative_eq!(sol.eta, objective(&sol.y), epsilon = 1e-15);
        assert!(sol.eta <= grid_min + 1e-12);

        // constrained value can never beat the unconstrained one
        let unconstrained = -z.norm_squared() / (2.0 * beta);
        assert!(sol.eta >= unconstrained - 1e-15);
    }

    #[test]
    fn subproblem_rejects_bad_inputs() {
        let set = FeasibleSet::symmetric_box(2, 1.0).unwrap();
        let x = Vector::zeros(2);
        let z = vec2(1.0, 0.0);
        assert!(matches!(
            solve_subproblem(&set, &x, &z, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            solve_subproblem(&set, &vec2(5.0, 0.0), &z, 1.0),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn optimality_measure_full_space() {
        let set = FeasibleSet::full_space(2).unwrap();
        let x = Vector::zeros(2);
        let z = vec2(1.0, 0.0);
        let v = optimality_measure(&set, &x, &z, &z).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn optimality_measure_zero_at_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for set in random_sets(&mut rng, 3) {
            let x = set.interior_point();
            let zero = Vector::zeros(3);
            let v = optimality_measure(&set, &x, &zero, &zero).unwrap();
            assert!(v.abs() <= 1e-20);
        }
    }

    #[test]
    fn optimality_measure_boundary_normal_direction() {
        // x on the unit sphere, z along the outward normal, grad_F = z:
        // the tracking term vanishes and V reduces to the composed
        // projection ||proj(x - z) - x||^2.
        let set = FeasibleSet::ball(Vector::zeros(2), 1.0).unwrap();
        let x = vec2(1.0, 0.0);
        for scale in [0.5, 1.0, 2.0] {
            let z = &x * scale;
            let expected = (set.project(&(&x - &z)).unwrap() - &x).norm_squared();
            let v = optimality_measure(&set, &x, &z, &z).unwrap();
            assert_relative_eq!(v, expected, epsilon = 1e-15);
        }
        // a short normal step stays inside the ball, so the projected
        // point is x - z itself and V = ||z||^2
        let z = &x * 0.5;
        assert_relative_eq!(
            optimality_measure(&set, &x, &z, &z).unwrap(),
            z.norm_squared(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn projection_idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for n in [1usize, 2, 5, 9] {
            for set in random_sets(&mut rng, n) {
                for _ in 0..50 {
                    let p = random_vector(&mut rng, n, 3.0);
                    let q = random_vector(&mut rng, n, 3.0);
                    let pp = set.project(&p).unwrap();
                    let qq = set.project(&q).unwrap();
                    assert!(set.distance(&pp).unwrap() <= 1e-10);
                    assert_relative_eq!(set.project(&pp).unwrap(), pp, epsilon = 1e-12);
                    assert!((pp - qq).norm() <= (&p - &q).norm() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn unit_regularization_step_bounded_by_scaled_step() {
        // ||ybar(x,z,1) - x|| <= max(1, beta) ||ybar(x,z,beta) - x||
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..250 {
            let n = 1 + rng.random_range(0..6);
            for set in random_sets(&mut rng, n) {
                let x = set.project(&random_vector(&mut rng, n, 1.0)).unwrap();
                let z = random_vector(&mut rng, n, 2.0);
                let beta = 10f64.powf(rng.random_range(-3.0..3.0));
                let step_unit = solve_subproblem(&set, &x, &z, 1.0).unwrap().d.norm();
                let step_beta = solve_subproblem(&set, &x, &z, beta).unwrap().d.norm();
                assert!(
                    step_unit <= beta.max(1.0) * step_beta + 1e-10,
                    "violated for beta={beta}: {step_unit} > {}",
                    beta.max(1.0) * step_beta
                );
            }
        }
    }

    #[test]
    fn subproblem_first_order_inequality() {
        // <z, d> + beta ||d||^2 <= 0 from the subproblem optimality
        // conditions, tested across random instances.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..250 {
            let n = 1 + rng.random_range(0..6);
            for set in random_sets(&mut rng, n) {
                let x = set.project(&random_vector(&mut rng, n, 1.0)).unwrap();
                let z = random_vector(&mut rng, n, 2.0);
                let beta = 10f64.powf(rng.random_range(-3.0..3.0));
                let sol = solve_subproblem(&set, &x, &z, beta).unwrap();
                let lhs = z.dot(&sol.d) + beta * sol.d.norm_squared();
                assert!(lhs <= 1e-10, "optimality inequality violated: {lhs}");
            }
        }
    }

    #[test]
    fn eta_gradient_is_lipschitz_with_stated_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = 2 + rng.random_range(0..4);
            for set in random_sets(&mut rng, n) {
                let beta = 10f64.powf(rng.random_range(-1.0..1.5));
                let lip = eta_grad_lipschitz(beta);
                let x0 = set.project(&random_vector(&mut rng, n, 1.0)).unwrap();
                let x1 = set.project(&random_vector(&mut rng, n, 1.0)).unwrap();
                let z0 = random_vector(&mut rng, n, 2.0);
                let z1 = random_vector(&mut rng, n, 2.0);
                let (gx0, gz0) = eta_gradient(&set, &x0, &z0, beta).unwrap();
                let (gx1, gz1) = eta_gradient(&set, &x1, &z1, beta).unwrap();
                let num = ((gx0 - gx1).norm_squared() + (gz0 - gz1).norm_squared()).sqrt();
                let den = ((&x0 - &x1).norm_squared() + (&z0 - &z1).norm_squared()).sqrt();
                assert!(num <= lip * den + 1e-9, "eta gradient jump {num} > {lip} * {den}");
            }
        }
    }

    #[test]
    fn eta_gradient_matches_finite_differences() {
        let set = FeasibleSet::symmetric_box(3, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let beta = 1.7;
        let h = 1e-6;
        for _ in 0..20 {
            let x = set
                .project(&random_vector(&mut rng, 3, 0.5))
                .unwrap()
                .map(|v| v.clamp(-0.7, 0.7)); // keep x + h perturbations feasible
            let z = random_vector(&mut rng, 3, 1.0);
            let (gx, gz) = eta_gradient(&set, &x, &z, beta).unwrap();
            for i in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let ep = solve_subproblem(&set, &xp, &z, beta).unwrap().eta;
                let em = solve_subproblem(&set, &xm, &z, beta).unwrap().eta;
                assert_relative_eq!(gx[i], (ep - em) / (2.0 * h), epsilon = 1e-4, max_relative = 1e-4);

                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let ep = solve_subproblem(&set, &x, &zp, beta).unwrap().eta;
                let em = solve_subproblem(&set, &x, &zm, beta).unwrap().eta;
                assert_relative_eq!(gz[i], (ep - em) / (2.0 * h), epsilon = 1e-4, max_relative = 1e-4);
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-5.0..5.0f64, n)
        }

        proptest! {
            #[test]
            fn simplex_projection_lands_on_simplex(p in arb_point(5)) {
                let set = FeasibleSet::simplex(5).unwrap();
                let y = set.project(&Vector::from_vec(p)).unwrap();
                prop_assert!(y.iter().all(|&v| v >= 0.0));
                prop_assert!((y.sum() - 1.0).abs() < 1e-9);
            }

            #[test]
            fn subproblem_value_nonpositive(
                p in arb_point(4),
                g in arb_point(4),
                beta in 1e-3..1e3f64,
            ) {
                let set = FeasibleSet::symmetric_box(4, 1.5).unwrap();
                let x = set.project(&Vector::from_vec(p)).unwrap();
                let z = Vector::from_vec(g);
                let sol = solve_subproblem(&set, &x, &z, beta).unwrap();
                prop_assert!(sol.eta <= 1e-10);
            }
        }
    }
}
