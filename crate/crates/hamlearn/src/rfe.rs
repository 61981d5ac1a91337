//! Robust frequency estimation from two-quadrature measurements.
//!
//! The estimator brackets an unknown nonnegative frequency `theta <= phi_max`
//! with an interval that shrinks by a factor 2/3 per round. A round at
//! interval width `w` queries both quadratures at evolution time
//! `t = kappa / w`, forms the measured phase `atan2(Y, X)`, and keeps the
//! candidate sub-interval whose midpoint predicts the circularly closer
//! phase; a majority over `votes` fresh repetitions makes the decision.
//! Because the two candidate midpoints are only `kappa / 3` apart in phase,
//! a per-round phase error below `kappa / 6` can never flip a vote, which is
//! what makes the estimate robust to bounded bias (perturbation ripple,
//! readout scaling) on the quadratures.
//!
//! Total evolution time is dominated by the last rounds and scales as
//! `1 / epsilon`, while the number of experiments grows only linearly in
//! `log(1 / epsilon)`: the Heisenberg-limited regime.

use crate::simkernel::Quadrature;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RfeError {
    #[error("a-priori frequency bound must be positive, got {0}")]
    PhaseBoundNotPositive(f64),
    #[error("target precision must be positive and finite, got {0}")]
    EpsilonNotPositive(f64),
    #[error("votes and medians must be odd and >= 1, got {0}")]
    EvenRepetitions(u32),
    #[error("shots per quadrature must be >= 1")]
    NoShots,
    #[error("kappa must lie in (0, pi), got {0}")]
    KappaOutOfRange(f64),
    #[error("median of an empty list")]
    NoEstimates,
    #[error("norm bound must be positive, got {0}")]
    NormBoundNotPositive(f64),
}

/// Source of quadrature estimates `X ~ cos(theta t)`, `Y ~ sin(theta t)`.
///
/// Implementations accumulate the total evolution time (`sum of t` over
/// calls) and the call count; fresh randomness must back every call.
pub trait QuadratureOracle {
    fn estimate(&mut self, t: f64, quad: Quadrature) -> f64;
    fn time_used(&self) -> f64;
    fn calls(&self) -> u64;
}

/// Estimator parameters.
///
/// `shots` and `medians` are carried here for the callers that build oracles
/// and median-boost runs; the core loop uses `phi_max`, `epsilon`, `votes`,
/// and `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfeConfig {
    /// A-priori upper bound on the frequency (`theta` in `[0, phi_max]`).
    pub phi_max: f64,
    /// Half-width of the final interval.
    pub epsilon: f64,
    /// Shots per quadrature call (used when constructing sampling oracles).
    pub shots: u32,
    /// Votes per round; must be odd.
    pub votes: u32,
    /// Independent runs whose median is reported; must be odd.
    pub medians: u32,
    /// Phase window per round: evolution time is `kappa / width`.
    pub kappa: f64,
}

impl RfeConfig {
    pub const DEFAULT_SHOTS: u32 = 96;
    pub const DEFAULT_VOTES: u32 = 5;
    pub const DEFAULT_MEDIANS: u32 = 5;
    /// Per-quadrature errors up to `1/sqrt(8)` tilt the measured phase by up
    /// to `2 asin(1/4) ~ 0.505` rad, so the `kappa / 6` decision margin must
    /// sit near that value: `kappa = 3` gives margin `0.5` while keeping the
    /// round-trip arc under `pi` so the circular comparison stays two-sided.
    pub const DEFAULT_KAPPA: f64 = 3.0;

    pub fn new(phi_max: f64, epsilon: f64) -> Result<Self, RfeError> {
        let cfg = Self {
            phi_max,
            epsilon,
            shots: Self::DEFAULT_SHOTS,
            votes: Self::DEFAULT_VOTES,
            medians: Self::DEFAULT_MEDIANS,
            kappa: Self::DEFAULT_KAPPA,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RfeError> {
        if !self.phi_max.is_finite() || self.phi_max <= 0.0 {
            return Err(RfeError::PhaseBoundNotPositive(self.phi_max));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(RfeError::EpsilonNotPositive(self.epsilon));
        }
        if self.shots == 0 {
            return Err(RfeError::NoShots);
        }
        for reps in [self.votes, self.medians] {
            if reps == 0 || reps % 2 == 0 {
                return Err(RfeError::EvenRepetitions(reps));
            }
        }
        if !(0.0..std::f64::consts::PI).contains(&self.kappa) || self.kappa == 0.0 {
            return Err(RfeError::KappaOutOfRange(self.kappa));
        }
        Ok(())
    }

    /// Rounds needed to shrink `phi_max` to `2 epsilon` plus slack; the loop
    /// never exceeds this by construction.
    pub fn max_rounds(&self) -> u32 {
        let ratio = (self.phi_max / (2.0 * self.epsilon)).max(1.0);
        (ratio.ln() / (1.5f64).ln()).ceil() as u32 + 2
    }
}

/// Result of one estimator run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfeEstimate {
    pub theta: f64,
    pub rounds: u32,
    /// Oracle calls consumed by this run.
    pub calls: u64,
    /// Evolution time consumed by this run.
    pub time_used: f64,
}

/// One vote of the interval-shrinking loop, for debugging dumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfeTraceRow {
    pub round: u32,
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// The round's majority decision (shared by all its votes).
    pub chose_upper: bool,
}

/// Absolute circular distance between two phases, in `[0, pi]`.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let d = (x - y).rem_euclid(two_pi);
    d.min(two_pi - d)
}

pub fn rfe_estimate<O: QuadratureOracle>(
    oracle: &mut O,
    cfg: &RfeConfig,
) -> Result<RfeEstimate, RfeError> {
    rfe_estimate_traced(oracle, cfg, None)
}

/// Estimator core with an optional per-vote trace sink.
pub fn rfe_estimate_traced<O: QuadratureOracle>(
    oracle: &mut O,
    cfg: &RfeConfig,
    mut trace: Option<&mut Vec<RfeTraceRow>>,
) -> Result<RfeEstimate, RfeError> {
    cfg.validate()?;
    let start_time = oracle.time_used();
    let start_calls = oracle.calls();
    let (mut a, mut b) = (0.0f64, cfg.phi_max);
    let mut rounds = 0u32;
    let max_rounds = cfg.max_rounds();
    while b - a > 2.0 * cfg.epsilon && rounds < max_rounds {
        let w = b - a;
        let t = cfg.kappa / w;
        let m_lower = a + w / 3.0;
        let m_upper = a + 2.0 * w / 3.0;
        let mut lower_votes = 0u32;
        let mut round_rows: Vec<RfeTraceRow> = Vec::new();
        for _ in 0..cfg.votes {
            let x = oracle.estimate(t, Quadrature::Cos);
            let y = oracle.estimate(t, Quadrature::Sin);
            let phi = y.atan2(x);
            if circular_distance(phi, m_lower * t) <= circular_distance(phi, m_upper * t) {
                lower_votes += 1;
            }
            if trace.is_some() {
                round_rows.push(RfeTraceRow { round: rounds, a, b, t, x, y, chose_upper: false });
            }
        }
        let keep_lower = 2 * lower_votes > cfg.votes;
        if keep_lower {
            b = a + 2.0 * w / 3.0;
        } else {
            a += w / 3.0;
        }
        if let Some(sink) = trace.as_deref_mut() {
            for mut row in round_rows {
                row.chose_upper = !keep_lower;
                sink.push(row);
            }
        }
        rounds += 1;
    }
    Ok(RfeEstimate {
        theta: 0.5 * (a + b),
        rounds,
        calls: oracle.calls() - start_calls,
        time_used: oracle.time_used() - start_time,
    })
}

/// Median of a batch of independent estimates.
pub fn median_boost(estimates: &[f64]) -> Result<f64, RfeError> {
    if estimates.is_empty() {
        return Err(RfeError::NoEstimates);
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// Field strength and shot budget under which the estimator's per-round
/// failure sources (perturbation bias plus shot noise) stay within the
/// decision margin: `nu = 96 * bound` on `|H|`, `96` shots per quadrature.
pub fn required_nu_and_shots(h_norm_bound: f64) -> Result<(f64, u32), RfeError> {
    if !h_norm_bound.is_finite() || h_norm_bound <= 0.0 {
        return Err(RfeError::NormBoundNotPositive(h_norm_bound));
    }
    Ok((96.0 * h_norm_bound, 96))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    /// Oracle returning exact quadratures plus a caller-supplied additive
    /// disturbance per call.
    struct TestOracle<F: FnMut(u64, f64, Quadrature) -> f64> {
        theta: f64,
        disturb: F,
        time: f64,
        calls: u64,
    }

    impl<F: FnMut(u64, f64, Quadrature) -> f64> TestOracle<F> {
        fn new(theta: f64, disturb: F) -> Self {
            Self { theta, disturb, time: 0.0, calls: 0 }
        }
    }

    impl<F: FnMut(u64, f64, Quadrature) -> f64> QuadratureOracle for TestOracle<F> {
        fn estimate(&mut self, t: f64, quad: Quadrature) -> f64 {
            let ideal = match quad {
                Quadrature::Cos => (self.theta * t).cos(),
                Quadrature::Sin => (self.theta * t).sin(),
            };
            let out = ideal + (self.disturb)(self.calls, t, quad);
            self.time += t;
            self.calls += 1;
            out
        }

        fn time_used(&self) -> f64 {
            self.time
        }

        fn calls(&self) -> u64 {
            self.calls
        }
    }

    #[test]
    fn config_validation() {
        assert!(RfeConfig::new(10.0, 1e-4).is_ok());
        assert_eq!(
            RfeConfig::new(0.0, 1e-4),
            Err(RfeError::PhaseBoundNotPositive(0.0))
        );
        assert_eq!(RfeConfig::new(10.0, 0.0), Err(RfeError::EpsilonNotPositive(0.0)));
        let mut cfg = RfeConfig::new(10.0, 1e-4).unwrap();
        cfg.votes = 4;
        assert_eq!(cfg.validate(), Err(RfeError::EvenRepetitions(4)));
        cfg.votes = 5;
        cfg.kappa = 3.5;
        assert_eq!(cfg.validate(), Err(RfeError::KappaOutOfRange(3.5)));
    }

    #[test]
    fn circular_distance_wraps() {
        let pi = std::f64::consts::PI;
        assert!((circular_distance(0.1, -0.1) - 0.2).abs() < 1e-12);
        assert!((circular_distance(pi - 0.05, -pi + 0.05) - 0.1).abs() < 1e-12);
        assert!((circular_distance(0.0, pi) - pi).abs() < 1e-12);
        assert!((circular_distance(7.0 * pi + 0.3, pi) - 0.3).abs() < 1e-10);
    }

    #[test]
    fn exact_oracle_converges_everywhere() {
        let phi_max = 12.0;
        let cfg = RfeConfig::new(phi_max, 1e-6).unwrap();
        for i in 0..40 {
            let theta = rng::range_f64(&[400, i], 0.0, phi_max);
            let mut oracle = TestOracle::new(theta, |_, _, _| 0.0);
            let est = rfe_estimate(&mut oracle, &cfg).unwrap();
            assert!(
                (est.theta - theta).abs() <= cfg.epsilon,
                "theta {theta}: got {} after {} rounds",
                est.theta,
                est.rounds
            );
            assert_eq!(est.calls, 2 * cfg.votes as u64 * est.rounds as u64);
        }
        // Endpoints of the prior interval.
        for theta in [0.0, phi_max] {
            let mut oracle = TestOracle::new(theta, |_, _, _| 0.0);
            let est = rfe_estimate(&mut oracle, &cfg).unwrap();
            assert!((est.theta - theta).abs() <= cfg.epsilon);
        }
    }

    #[test]
    fn adversarial_bounded_bias_never_flips_votes() {
        // Disturbance of 0.2 per quadrature keeps the phase error below the
        // kappa/6 = 0.5 decision margin, for any sign pattern.
        let phi_max = 8.0;
        let cfg = RfeConfig::new(phi_max, 1e-5).unwrap();
        for i in 0..50 {
            let theta = rng::range_f64(&[500, i], 0.0, phi_max);
            let mut oracle = TestOracle::new(theta, move |call, _, quad| {
                let sign = if rng::unit_f64(&[600, i, call, quad.tag()]) < 0.5 { -1.0 } else { 1.0 };
                0.2 * sign
            });
            let est = rfe_estimate(&mut oracle, &cfg).unwrap();
            assert!(
                (est.theta - theta).abs() <= cfg.epsilon,
                "theta {theta}: got {}",
                est.theta
            );
        }
    }

    #[test]
    fn spam_style_rescaling_is_harmless() {
        // Multiplying both quadratures by (1 - 2 eta) leaves the measured
        // phase unchanged, so convergence is unaffected.
        let cfg = RfeConfig::new(6.0, 1e-6).unwrap();
        for i in 0..20 {
            let theta = rng::range_f64(&[700, i], 0.0, 6.0);
            let mut oracle = TestOracle::new(theta, |_, _, _| 0.0);
            // Shrink the ideal values through the disturbance channel.
            let mut scaled = TestOracle::new(theta, move |_, t, quad| {
                let ideal = match quad {
                    Quadrature::Cos => (theta * t).cos(),
                    Quadrature::Sin => (theta * t).sin(),
                };
                -0.6 * ideal
            });
            let plain = rfe_estimate(&mut oracle, &cfg).unwrap();
            let shrunk = rfe_estimate(&mut scaled, &cfg).unwrap();
            assert_eq!(plain.theta, shrunk.theta);
        }
    }

    #[test]
    fn time_is_heisenberg_limited_and_calls_logarithmic() {
        let phi_max = 10.0;
        let mut prev_time = 0.0;
        for (j, eps) in [1e-2, 1e-3, 1e-4, 1e-5].into_iter().enumerate() {
            let cfg = RfeConfig::new(phi_max, eps).unwrap();
            let mut oracle = TestOracle::new(3.7, |_, _, _| 0.0);
            let est = rfe_estimate(&mut oracle, &cfg).unwrap();
            // Total time <= 2 votes * sum of a geometric ladder ending at
            // kappa / (2 eps * 2/3); the constant below is loose.
            let budget = 5.0 * cfg.votes as f64 * cfg.kappa / eps;
            assert!(est.time_used <= budget, "eps {eps}: time {}", est.time_used);
            assert!(est.time_used > prev_time);
            prev_time = est.time_used;
            // Call count grows linearly in log(1/eps).
            let expected_rounds =
                ((phi_max / (2.0 * eps)).ln() / 1.5f64.ln()).ceil() as u64;
            assert_eq!(est.calls, 2 * cfg.votes as u64 * expected_rounds);
            if j > 0 {
                assert!(est.time_used >= 8.0 * prev_time / 10.0);
            }
        }
    }

    #[test]
    fn accounting_matches_sum_over_calls() {
        let cfg = RfeConfig::new(5.0, 1e-4).unwrap();
        let mut oracle = TestOracle::new(2.2, |_, _, _| 0.0);
        let est = rfe_estimate(&mut oracle, &cfg).unwrap();
        assert!((est.time_used - oracle.time_used()).abs() < 1e-12);
        assert_eq!(est.calls, oracle.calls());
        // Reconstruct the deterministic time ladder independently.
        let mut want = 0.0;
        let mut w = 5.0f64;
        while w > 2.0 * cfg.epsilon {
            want += 2.0 * cfg.votes as f64 * cfg.kappa / w;
            w *= 2.0 / 3.0;
        }
        assert!((est.time_used - want).abs() < 1e-9 * want);
    }

    #[test]
    fn trace_records_every_vote() {
        let cfg = RfeConfig::new(4.0, 1e-2).unwrap();
        let mut oracle = TestOracle::new(1.0, |_, _, _| 0.0);
        let mut rows = Vec::new();
        let est = rfe_estimate_traced(&mut oracle, &cfg, Some(&mut rows)).unwrap();
        assert_eq!(rows.len(), (est.rounds * cfg.votes) as usize);
        for row in &rows {
            assert!(row.a < row.b);
            assert!(row.t > 0.0);
            assert!((-1.0..=1.0).contains(&row.x));
        }
    }

    #[test]
    fn median_boost_basics() {
        assert_eq!(median_boost(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median_boost(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert_eq!(median_boost(&[]), Err(RfeError::NoEstimates));
        // A minority of wild outliers cannot move the median far.
        let vals = [1.0001, 0.9999, 1.0, 57.0, -13.0];
        assert!((median_boost(&vals).unwrap() - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn noisy_scaling_law_has_unit_slope() {
        // Exact oracle plus bounded iid noise; median-boosted error against
        // total time across four decades should fit slope -1 on log axes.
        let phi_max = 10.0;
        let theta = 6.283;
        let mut points = Vec::new();
        for (ei, eps) in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6].into_iter().enumerate() {
            let mut cfg = RfeConfig::new(phi_max, eps).unwrap();
            cfg.medians = 5;
            let mut total_time = 0.0;
            let mut errs = Vec::new();
            for trial in 0..10u64 {
                let mut estimates = Vec::new();
                for m in 0..cfg.medians as u64 {
                    let mut oracle = TestOracle::new(theta, move |call, _, quad| {
                        rng::range_f64(&[90, ei as u64, trial, m, call, quad.tag()], -0.25, 0.25)
                    });
                    estimates.push(rfe_estimate(&mut oracle, &cfg).unwrap().theta);
                    total_time += oracle.time_used();
                }
                errs.push((median_boost(&estimates).unwrap() - theta).abs());
            }
            let mean_err = errs.iter().sum::<f64>() / errs.len() as f64;
            let mean_time = total_time / 10.0;
            points.push((mean_time.ln(), mean_err.max(1e-12).ln()));
        }
        let slope = fit_slope(&points);
        assert!(
            (-1.25..=-0.75).contains(&slope),
            "slope {slope} from {points:?}"
        );
    }

    fn fit_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn heisenberg_budget_constants() {
        assert_eq!(required_nu_and_shots(0.9).unwrap(), (86.4, 96));
        assert_eq!(
            required_nu_and_shots(0.0),
            Err(RfeError::NormBoundNotPositive(0.0))
        );
    }
}
