//! Evolution-time lower bounds for distinguishing nearly identical
//! single-qubit Hamiltonians, plus numerical verifiers.
//!
//! The hard-instance family is `H = Z + nu P + epsilon X` versus
//! `H' = Z + nu P` with an arbitrary control field `nu P`, `|nu P| <= nu < 1`.
//! Closed-form bounds cascade from the Bloch-vector norm difference up to
//! total-variation bounds on entire experiment records, and finally to a
//! lower bound on the total evolution time any (possibly adaptive) learner
//! must spend to reach precision `epsilon` with confidence `q`. Every bound
//! has a Monte Carlo or exact-dynamics verifier next to it.

use crate::model::eigensystem;
use crate::pauli::CMatrix;
use crate::rng;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("control strength must satisfy 0 <= nu < 1, got {0}")]
    NuOutOfRange(f64),
    #[error("perturbation must satisfy epsilon >= 0, got {0}")]
    EpsilonNegative(f64),
    #[error("time and segment counts must be nonnegative, got {0}")]
    NegativeBudget(f64),
    #[error("hypothesis count k must be >= 2, got {0}")]
    BadHypothesisCount(f64),
    #[error("success probability q must lie in (0, 1], got {0}")]
    BadSuccessProbability(f64),
}

fn check_eps_nu(epsilon: f64, nu: f64) -> Result<(), BoundsError> {
    if !nu.is_finite() || !(0.0..1.0).contains(&nu) {
        return Err(BoundsError::NuOutOfRange(nu));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(BoundsError::EpsilonNegative(epsilon));
    }
    Ok(())
}

/// Bloch-vector norm `w(epsilon) = |(nu_x + epsilon, nu_y, 1 + nu_z)|` of
/// `Z + nu_vec . sigma + epsilon X`.
pub fn w_norm(epsilon: f64, nu_vec: [f64; 3]) -> f64 {
    let x = nu_vec[0] + epsilon;
    let y = nu_vec[1];
    let z = 1.0 + nu_vec[2];
    (x * x + y * y + z * z).sqrt()
}

/// Result of checking `|w(eps) - w(0)| <= eps (2 nu + eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WDiffCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Evaluates the eigenfrequency-shift bound for one control field.
pub fn w_diff_bound_check(epsilon: f64, nu_vec: [f64; 3]) -> Result<WDiffCheck, BoundsError> {
    let nu = (nu_vec[0] * nu_vec[0] + nu_vec[1] * nu_vec[1] + nu_vec[2] * nu_vec[2]).sqrt();
    check_eps_nu(epsilon, nu)?;
    let lhs = (w_norm(epsilon, nu_vec) - w_norm(0.0, nu_vec)).abs();
    let rhs = epsilon * (2.0 * nu + epsilon);
    Ok(WDiffCheck { lhs, rhs, ok: lhs <= rhs + 1e-12 })
}

/// Operator-norm bound on `|e^{-it(Z + nu P + eps X)} - e^{-it(Z + nu P)}|`:
/// `2 eps (2 nu + eps) t + (2 eps (2 nu + eps) + eps) min(t, 1 / (1 - nu))`.
pub fn unitary_diff_bound(epsilon: f64, nu: f64, t: f64) -> Result<f64, BoundsError> {
    check_eps_nu(epsilon, nu)?;
    if !t.is_finite() || t < 0.0 {
        return Err(BoundsError::NegativeBudget(t));
    }
    let drift = 2.0 * epsilon * (2.0 * nu + epsilon);
    Ok(drift * t + (drift + epsilon) * t.min(1.0 / (1.0 - nu)))
}

/// `e^{-i t h}` for Hermitian `h` via its eigendecomposition.
fn evolve(h: &CMatrix, t: f64) -> CMatrix {
    let eig = eigensystem(h).expect("construction yields Hermitian inputs");
    let dim = eig.energies.len();
    let phases = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, -eig.energies[i] * t)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    &eig.states * phases * eig.states.adjoint()
}

fn pauli_combo(x: f64, y: f64, z: f64) -> CMatrix {
    let c = Complex64::new;
    CMatrix::from_row_slice(
        2,
        2,
        &[c(z, 0.0), c(x, -y), c(x, y), c(-z, 0.0)],
    )
}

/// Spectral norm of an arbitrary 2x2 complex matrix via `D^dagger D`.
fn spectral_norm(d: &CMatrix) -> f64 {
    let gram = d.adjoint() * d;
    let sym = (&gram + gram.adjoint()).scale(0.5);
    nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &e| m.max(e.max(0.0)))
        .sqrt()
}

/// Monte Carlo check of [`unitary_diff_bound`] against exact 2x2 dynamics
/// over random `(epsilon, nu, t, P)`; returns the fraction of samples where
/// the bound dominates.
pub fn verify_unitary_bound(samples: u32, seed: u64) -> f64 {
    let ok = (0..samples as u64)
        .into_par_iter()
        .filter(|&i| {
            let epsilon = rng::range_f64(&[seed, i, 0], 0.0, 0.2);
            let nu = rng::range_f64(&[seed, i, 1], 0.0, 0.9);
            let t = rng::range_f64(&[seed, i, 2], 0.0, 20.0);
            let p = rng::unit_vector3(&[seed, i, 3]);
            let h0 = pauli_combo(nu * p[0], nu * p[1], 1.0 + nu * p[2]);
            let h1 = pauli_combo(nu * p[0] + epsilon, nu * p[1], 1.0 + nu * p[2]);
            let exact = spectral_norm(&(evolve(&h1, t) - evolve(&h0, t)));
            let bound = unitary_diff_bound(epsilon, nu, t).expect("sampled inside domain");
            exact <= bound + 1e-9
        })
        .count();
    ok as f64 / samples as f64
}

/// Inputs shared by the record-level bounds: perturbation `epsilon`, control
/// cap `nu`, total evolution time, number of preparation/measurement
/// segments, and the Le Cam parameters (success probability `q`, hypothesis
/// count `k`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub epsilon: f64,
    pub nu: f64,
    pub t_total: f64,
    pub segments: f64,
    pub q: f64,
    pub k: f64,
}

impl BoundParams {
    fn check_core(&self) -> Result<(), BoundsError> {
        check_eps_nu(self.epsilon, self.nu)?;
        if !self.t_total.is_finite() || self.t_total < 0.0 {
            return Err(BoundsError::NegativeBudget(self.t_total));
        }
        if !self.segments.is_finite() || self.segments < 0.0 {
            return Err(BoundsError::NegativeBudget(self.segments));
        }
        Ok(())
    }
}

/// Which constant set a record-level bound uses. The `Proof` form is what
/// the derivation actually establishes; the `Statement` form is half of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BoundForm {
    #[default]
    Proof,
    Statement,
}

/// Total-variation bound between the outcome records of one fixed
/// (non-adaptive) experiment under `H` and `H'`:
/// `2 eps (2 nu + eps) T + eps (2 nu + eps + 1) / (1 - nu) * L`, clipped to
/// `[0, 1]` (halved in the `Statement` form).
pub fn tv_single_experiment_bound(p: &BoundParams, form: BoundForm) -> Result<f64, BoundsError> {
    p.check_core()?;
    let drift = p.epsilon * (2.0 * p.nu + p.epsilon);
    let segment_cost = p.epsilon * (2.0 * p.nu + p.epsilon + 1.0) / (1.0 - p.nu);
    let raw = match form {
        BoundForm::Proof => 2.0 * drift * p.t_total + segment_cost * p.segments,
        BoundForm::Statement => drift * p.t_total + 0.5 * segment_cost * p.segments,
    };
    Ok(raw.clamp(0.0, 1.0))
}

/// Total-variation bound for adaptive strategies with budgets `T_max` and
/// `L_max`: `eps (4 nu + 3 eps) T + eps (2 nu + eps + 1) / (1 - nu) * L`,
/// clipped to `[0, 1]`.
pub fn tv_adaptive_bound(p: &BoundParams) -> Result<f64, BoundsError> {
    p.check_core()?;
    let raw = p.epsilon * (4.0 * p.nu + 3.0 * p.epsilon) * p.t_total
        + p.epsilon * (2.0 * p.nu + p.epsilon + 1.0) / (1.0 - p.nu) * p.segments;
    Ok(raw.clamp(0.0, 1.0))
}

/// Le Cam-style lower bound on the total evolution time needed to identify
/// one of `k` hypotheses spaced `epsilon` apart with success probability
/// `q`, given `segments` preparations/measurements:
/// `T >= [2(q - 2/k) - 1 - k eps (2 nu + eps + 1) L / (1 - nu)]
///        / [k eps (4 nu + 3 eps)]`, floored at zero.
pub fn time_lower_bound(p: &BoundParams) -> Result<f64, BoundsError> {
    p.check_core()?;
    if !p.k.is_finite() || p.k < 2.0 {
        return Err(BoundsError::BadHypothesisCount(p.k));
    }
    if !p.q.is_finite() || p.q <= 0.0 || p.q > 1.0 {
        return Err(BoundsError::BadSuccessProbability(p.q));
    }
    if p.epsilon == 0.0 {
        return Ok(f64::INFINITY);
    }
    let numerator = 2.0 * (p.q - 2.0 / p.k)
        - 1.0
        - p.k * p.epsilon * (2.0 * p.nu + p.epsilon + 1.0) * p.segments / (1.0 - p.nu);
    let denominator = p.k * p.epsilon * (4.0 * p.nu + 3.0 * p.epsilon);
    Ok((numerator / denominator).max(0.0))
}

/// Exact total variation for the built-in single-experiment scenario:
/// prepare `|+>`, evolve for `t` under `Z + nu X` versus `Z + (nu+eps) X`,
/// measure in the Z basis.
pub fn exact_tv_single_scenario(epsilon: f64, nu: f64, t: f64) -> Result<f64, BoundsError> {
    check_eps_nu(epsilon, nu)?;
    if !t.is_finite() || t < 0.0 {
        return Err(BoundsError::NegativeBudget(t));
    }
    let p_zero = |x: f64| -> f64 {
        let u = evolve(&pauli_combo(x, 0.0, 1.0), t);
        let amp = (u[(0, 0)] + u[(0, 1)]) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amp.norm_sqr()
    };
    Ok((p_zero(nu + epsilon) - p_zero(nu)).abs())
}

/// Grid used by the shipped TV-domination check: every combination of these
/// `epsilon`, `nu`, and `t` values.
pub const TV_GRID_EPSILON: [f64; 4] = [1e-3, 1e-2, 0.1, 0.2];
pub const TV_GRID_NU: [f64; 4] = [0.0, 0.3, 0.6, 0.79];
pub const TV_GRID_T: [f64; 5] = [0.1, 0.5, 2.0, 8.0, 20.0];

/// One row of the TV-domination table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvComparison {
    pub epsilon: f64,
    pub nu: f64,
    pub t: f64,
    pub exact: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Compares the single-experiment bound (proof form, one preparation and one
/// measurement) against the exact scenario TV across the built-in grid.
pub fn tv_domination_table() -> Result<Vec<TvComparison>, BoundsError> {
    let mut rows = Vec::new();
    for &epsilon in &TV_GRID_EPSILON {
        for &nu in &TV_GRID_NU {
            for &t in &TV_GRID_T {
                let exact = exact_tv_single_scenario(epsilon, nu, t)?;
                let params = BoundParams {
                    epsilon,
                    nu,
                    t_total: t,
                    segments: 2.0,
                    q: 1.0,
                    k: 2.0,
                };
                let bound = tv_single_experiment_bound(&params, BoundForm::Proof)?;
                rows.push(TvComparison { epsilon, nu, t, exact, bound, ok: exact <= bound + 1e-12 });
            }
        }
    }
    Ok(rows)
}
