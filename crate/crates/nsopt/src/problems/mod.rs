//! Benchmark problem instances implementing the oracle contract, each
//! with analytic ground truth (objective, gradient, and when available
//! the optimal value and a minimizer) for diagnostics and tests.

mod low_rank;
mod policy_eval;
mod quadratic;
mod single_level;
mod svi;

pub use low_rank::LowRankProblem;
pub use policy_eval::PolicyEvalProblem;
pub use quadratic::SyntheticQuadratic;
pub use single_level::SingleLevelQuadratic;
pub use svi::{gap_function_value_grad, SviProblem};
