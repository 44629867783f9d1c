//! Stepsize schedules shared by both solvers, the randomized output
//! rule, and the decay-weight sequence used by the schedule checks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::oracle::LipschitzInfo;
use crate::{Error, Result};

/// How the stepsize sequence is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum TauSchedule {
    /// `tau_0 = 1/a`, `tau_k = 1/sqrt(N)` for `1 <= k < N`: the constant
    /// schedule under which the solvers attain their `1/sqrt(N)` rate.
    SqrtHorizon,
    /// Caller-supplied sequence; validated against the same constraints
    /// (`tau_0 = 1/a`, `0 < tau_k <= 1/a`, and `a tau_k <= 1/sqrt(2)`
    /// from the first averaging weight onward).
    Custom(Vec<f64>),
}

impl TauSchedule {
    /// Constant tail `tau_k = value` with the mandatory `tau_0 = 1/a`.
    pub fn constant(gain: f64, iterations: usize, value: f64) -> Self {
        let mut taus = vec![value; iterations];
        if !taus.is_empty() {
            taus[0] = 1.0 / gain;
        }
        TauSchedule::Custom(taus)
    }
}

/// Materialize and validate the stepsize sequence.
pub fn realize_taus(gain: f64, iterations: usize, schedule: &TauSchedule) -> Result<Vec<f64>> {
    if !(gain > 0.0) {
        return Err(Error::invalid("averaging gain must be positive"));
    }
    if iterations < 2 {
        return Err(Error::invalid(
            "at least two iterations are required (the output index is drawn from 1..N-1)",
        ));
    }
    let taus = match schedule {
        TauSchedule::SqrtHorizon => {
            let tail = 1.0 / (iterations as f64).sqrt();
            let mut taus = vec![tail; iterations];
            taus[0] = 1.0 / gain;
            taus
        }
        TauSchedule::Custom(taus) => taus.clone(),
    };
    if taus.len() != iterations {
        return Err(Error::invalid(format!(
            "schedule length {} does not match iteration count {iterations}",
            taus.len()
        )));
    }
    if (taus[0] - 1.0 / gain).abs() > 1e-12 * (1.0 / gain) {
        return Err(Error::invalid(format!(
            "tau_0 must equal 1/gain = {}, got {}",
            1.0 / gain,
            taus[0]
        )));
    }
    for (k, &tau) in taus.iter().enumerate() {
        if !(tau > 0.0 && tau <= 1.0 / gain * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "tau_{k} = {tau} outside (0, 1/gain]"
            )));
        }
        if k >= 1 && gain * tau > std::f64::consts::FRAC_1_SQRT_2 + 1e-12 {
            return Err(Error::invalid(format!(
                "gain * tau_{k} = {} exceeds 1/sqrt(2)",
                gain * tau
            )));
        }
    }
    Ok(taus)
}

/// Constant regularization for the unit-gain solver:
/// `beta = ((1+alpha)^2/alpha * L_g^2 + alpha/4) * L_{grad f}`.
pub fn auto_regularization(alpha: f64, lip: &LipschitzInfo) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    lip.validate()?;
    let ratio = (1.0 + alpha) * (1.0 + alpha) / alpha;
    Ok((ratio * lip.g * lip.g + 0.25 * alpha) * lip.grad_f)
}

/// Decay weights of the gradient average:
/// `Gamma_1 = 1` when `tau_0 = 1/gain` (else `1 - gain*tau_0`), and
/// `Gamma_k = Gamma_1 * prod_{i=1}^{k-1} (1 - gain*tau_i)`.
/// Returns `Gamma_1 ..= Gamma_N` for `N = taus.len()`.
pub fn gamma_sequence(gain: f64, taus: &[f64]) -> Result<Vec<f64>> {
    if taus.is_empty() {
        return Err(Error::invalid("empty stepsize sequence"));
    }
    if taus[0] > 1.0 / gain * (1.0 + 1e-12) {
        return Err(Error::invalid("tau_0 must not exceed 1/gain"));
    }
    let gamma1 = if (taus[0] - 1.0 / gain).abs() <= 1e-12 * (1.0 / gain) {
        1.0
    } else {
        1.0 - gain * taus[0]
    };
    let mut out = Vec::with_capacity(taus.len());
    let mut acc = gamma1;
    out.push(acc);
    for &tau in &taus[1..] {
        acc *= 1.0 - gain * tau;
        out.push(acc);
    }
    Ok(out)
}

/// Probability mass of the randomized output rule over `k = 1..N-1`:
/// `P[R = k] = tau_k / sum_{j=1}^{N-1} tau_j`.
pub fn output_distribution(taus: &[f64]) -> Result<Vec<f64>> {
    if taus.len() < 2 {
        return Err(Error::invalid("output rule needs at least two stepsizes"));
    }
    let tail = &taus[1..];
    let total: f64 = tail.iter().sum();
    Ok(tail.iter().map(|&t| t / total).collect())
}

/// Draw the output index `R in {1, ..., N-1}`. The stepsizes are
/// deterministic, so the draw may happen before the run.
pub fn sample_output_index(taus: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
    let dist = output_distribution(taus)?;
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if draw <= acc {
            return Ok(i + 1);
        }
    }
    Ok(dist.len()) // numerical fallthrough: the last index
}

/// How the run's parameters were admitted.
#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    /// Nested compatibility condition
    /// `2(a*beta - c)(gamma*b - 2c) >= L_g^2 (a L_{grad f} + gamma)^2`
    /// verified with `gamma = 4c = alpha * L_{grad f}`.
    Checked { c: f64, gamma: f64 },
    /// Single-level variance regime: `beta` cleared the stated minimum.
    ThresholdChecked { minimum: f64 },
    /// Single-level bounded-moment regime: any positive `beta` is
    /// admissible and no problem constants were consulted.
    ParameterFree,
    /// Validation skipped; the reason is recorded on the run.
    Skipped { warning: String },
}

impl Validation {
    pub fn is_checked(&self) -> bool {
        !matches!(self, Validation::Skipped { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn sqrt_horizon_schedule_shape() {
        let taus = realize_taus(1.0, 16, &TauSchedule::SqrtHorizon).unwrap();
        assert_eq!(taus[0], 1.0);
        assert!(taus[1..].iter().all(|&t| t == 0.25));
    }

    #[test]
    fn custom_schedule_validation() {
        assert!(realize_taus(1.0, 3, &TauSchedule::Custom(vec![1.0, 0.5, 0.5])).is_ok());
        // tau_0 != 1/gain
        assert!(realize_taus(1.0, 3, &TauSchedule::Custom(vec![0.9, 0.5, 0.5])).is_err());
        // averaged weight above 1/sqrt(2)
        assert!(realize_taus(1.0, 3, &TauSchedule::Custom(vec![1.0, 0.8, 0.5])).is_err());
        // nonpositive stepsize
        assert!(realize_taus(1.0, 3, &TauSchedule::Custom(vec![1.0, 0.0, 0.5])).is_err());
        // single iteration rejected
        assert!(realize_taus(1.0, 1, &TauSchedule::SqrtHorizon).is_err());
    }

    #[test]
    fn auto_regularization_reference_value() {
        let lip = LipschitzInfo {
            f: 1.0,
            g: 1.0,
            grad_f: 1.0,
            grad_g: 0.0,
        };
        assert_relative_eq!(auto_regularization(1.0, &lip).unwrap(), 4.25);
    }

    #[test]
    fn gamma_sequence_closed_form_for_constant_tail() {
        let n = 100usize;
        let taus = realize_taus(1.0, n, &TauSchedule::SqrtHorizon).unwrap();
        let gammas = gamma_sequence(1.0, &taus).unwrap();
        let q = 1.0 - 1.0 / (n as f64).sqrt();
        for (k, &g) in gammas.iter().enumerate() {
            // Gamma_k = (1 - 1/sqrt(N))^{k-1} with k starting at 1
            assert_relative_eq!(g, q.powi(k as i32), epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_sequence_vanishes_after_unit_weight() {
        let taus = vec![0.5, 0.25, 1.0, 0.25, 0.25];
        let gammas = gamma_sequence(1.0, &taus).unwrap();
        assert!(gammas[0] > 0.0 && gammas[1] > 0.0);
        assert_eq!(gammas[2], 0.0);
        assert_eq!(gammas[3], 0.0);
        assert_eq!(gammas[4], 0.0);
    }

    #[test]
    fn output_distribution_uniform_for_constant_tail() {
        let taus = realize_taus(1.0, 5, &TauSchedule::SqrtHorizon).unwrap();
        let dist = output_distribution(&taus).unwrap();
        assert_eq!(dist.len(), 4);
        for p in dist {
            assert_relative_eq!(p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn output_sampler_matches_distribution() {
        let taus = vec![1.0, 0.1, 0.2, 0.3, 0.4];
        let dist = output_distribution(&taus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        let trials = 200_000;
        let mut counts = vec![0usize; taus.len()];
        for _ in 0..trials {
            counts[sample_output_index(&taus, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[0], 0, "index 0 must never be drawn");
        for k in 1..taus.len() {
            let freq = counts[k] as f64 / trials as f64;
            assert!(
                (freq - dist[k - 1]).abs() < 0.01,
                "frequency {freq} vs probability {}",
                dist[k - 1]
            );
        }
    }
}
