//! Coefficient recovery from a vector of measured energy gaps.
//!
//! The forward map sends coefficients `mu` to the gap vector `E(mu, nu)`
//! over every control configuration. In the large-field limit its Jacobian
//! approaches a signed incidence pattern whose normal matrix is the diagonal
//! `J_0` with entries `4 |a| 2^n 3^(n-|a|)`; this makes the scaled gradient
//! iteration `mu <- mu - J_0^{-1} J^T (E(mu) - E_hat)` a contraction near the
//! truth, with Gauss-Newton available as an independent cross-check.

use crate::model::{
    build_total, eigensystem, enumerate_configs, exact_gap, CoefficientVector, ControlConfig,
    ModelError, DEGENERACY_TOL,
};
use crate::pauli::{pauli_matrix, CMatrix, CVector, PauliString};
use crate::rng;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecoverError {
    #[error("gap vector needs {expected} entries for n={n}, got {got}")]
    WrongLength { n: usize, expected: usize, got: usize },
    #[error("degenerate spectrum at configuration {config_index}")]
    Degenerate { config_index: usize },
    #[error("normal matrix is singular")]
    SingularNormalMatrix,
    #[error("gap vectors built at different field strengths: {0} vs {1}")]
    FieldMismatch(f64, f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Large-field magnitude of a non-zero Jacobian entry: each compatible gap
/// moves by `2 mu_a` because flipping qubit `k` flips the sign of every
/// compatible term supported on it.
pub const JACOBIAN_SCALE: f64 = 2.0;

/// Gaps over the full configuration enumeration at one field strength,
/// ordered exactly as [`enumerate_configs`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapVector {
    pub n: usize,
    pub nu: f64,
    pub values: Vec<f64>,
    /// Rows flagged as untrustworthy (degenerate model spectrum). Skipped by
    /// every loss, gradient, and solver computation.
    pub degenerate: Vec<bool>,
}

impl GapVector {
    pub fn expected_len(n: usize) -> usize {
        n * (1 << n) * 3usize.pow(n as u32)
    }

    /// Wraps measured gaps (no degeneracy flags).
    pub fn from_measurements(n: usize, nu: f64, values: Vec<f64>) -> Result<Self, RecoverError> {
        let expected = Self::expected_len(n);
        if values.len() != expected {
            return Err(RecoverError::WrongLength { n, expected, got: values.len() });
        }
        let len = values.len();
        Ok(Self { n, nu, values, degenerate: vec![false; len] })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exact gap vector of `H(mu) - nu H_ctrl` over all configurations.
pub fn gap_vector(mu: &CoefficientVector, nu: f64) -> Result<GapVector, RecoverError> {
    let n = mu.n();
    let configs = enumerate_configs(n, nu)?;
    let mut values = Vec::with_capacity(configs.len());
    let mut degenerate = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let info = exact_gap(mu, cfg)?;
        values.push(info.gap);
        degenerate.push(info.degenerate);
    }
    Ok(GapVector { n, nu, values, degenerate })
}

/// Per-configuration spectral work shared by gaps, Jacobian rows, and
/// second derivatives.
struct ConfigSpectrum {
    energies: Vec<f64>,
    states: CMatrix,
}

impl ConfigSpectrum {
    fn new(mu: &CoefficientVector, cfg: &ControlConfig) -> Result<Self, RecoverError> {
        let eig = eigensystem(&build_total(mu, cfg))?;
        Ok(Self { energies: eig.energies, states: eig.states })
    }

    fn gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    fn degenerate(&self) -> bool {
        let guard = if self.energies.len() > 2 {
            self.energies[2] - self.energies[1]
        } else {
            f64::INFINITY
        };
        self.gap() < DEGENERACY_TOL || guard < DEGENERACY_TOL
    }

    fn state(&self, i: usize) -> CVector {
        CVector::from_column_slice(self.states.column(i).as_slice())
    }

    /// First derivative of the gap along every coefficient direction:
    /// `<Psi_1|sigma^a|Psi_1> - <Psi_0|sigma^a|Psi_0>`.
    fn gap_derivatives(&self, paulis: &[CMatrix]) -> Vec<f64> {
        let psi0 = self.state(0);
        let psi1 = self.state(1);
        paulis
            .iter()
            .map(|m| {
                let d = psi1.dotc(&(m * &psi1)) - psi0.dotc(&(m * &psi0));
                debug_assert!(d.im.abs() < 1e-9);
                d.re
            })
            .collect()
    }

    /// Second derivative of level `k` via the resolvent:
    /// `2 Re sum_{m != k} <k|sigma^b|m><m|sigma^a|k> / (E_k - E_m)`.
    fn level_second_derivative(&self, paulis: &[CMatrix], k: usize) -> DMatrix<f64> {
        let dim = self.energies.len();
        let p = paulis.len();
        let psi_k = self.state(k);
        // overlaps[a][m] = <Psi_m | sigma^a | Psi_k>
        let overlaps: Vec<CVector> =
            paulis.iter().map(|m| self.states.adjoint() * (m * &psi_k)).collect();
        let mut out = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let mut acc = 0.0;
                for m in 0..dim {
                    if m == k {
                        continue;
                    }
                    let term = overlaps[b][m].conj() * overlaps[a][m];
                    acc += 2.0 * term.re / (self.energies[k] - self.energies[m]);
                }
                out[(a, b)] = acc;
                out[(b, a)] = acc;
            }
        }
        out
    }
}

fn non_identity_paulis(n: usize) -> Vec<CMatrix> {
    (1..4usize.pow(n as u32))
        .map(|idx| pauli_matrix(&PauliString::from_index(n, idx).unwrap()))
        .collect()
}

/// Jacobian of the gap vector at `mu`, one row per configuration. Errors if
/// any configuration is degenerate (isolated levels are required).
pub fn jacobian(mu: &CoefficientVector, nu: f64) -> Result<DMatrix<f64>, RecoverError> {
    let (j, mask) = jacobian_masked(mu, nu)?;
    if let Some(config_index) = mask.iter().position(|&d| d) {
        return Err(RecoverError::Degenerate { config_index });
    }
    Ok(j)
}

/// Jacobian with degenerate rows zeroed and flagged instead of rejected.
fn jacobian_masked(
    mu: &CoefficientVector,
    nu: f64,
) -> Result<(DMatrix<f64>, Vec<bool>), RecoverError> {
    let n = mu.n();
    let configs = enumerate_configs(n, nu)?;
    let paulis = non_identity_paulis(n);
    let mut j = DMatrix::zeros(configs.len(), paulis.len());
    let mut mask = vec![false; configs.len()];
    for (row, cfg) in configs.iter().enumerate() {
        let spectrum = ConfigSpectrum::new(mu, cfg)?;
        if spectrum.degenerate() {
            mask[row] = true;
            continue;
        }
        for (col, d) in spectrum.gap_derivatives(&paulis).into_iter().enumerate() {
            j[(row, col)] = d;
        }
    }
    Ok((j, mask))
}

/// Diagonal of the large-field normal matrix `J_0`: entry
/// `4 |a| 2^n 3^(n-|a|)` for each non-identity string `a` in index order.
pub fn j_zero(n: usize) -> DVector<f64> {
    let count = 4usize.pow(n as u32) - 1;
    DVector::from_iterator(
        count,
        (1..=count).map(|idx| {
            let w = PauliString::from_index(n, idx).unwrap().weight();
            JACOBIAN_SCALE * JACOBIAN_SCALE
                * w as f64
                * (1u64 << n) as f64
                * 3f64.powi((n - w) as i32)
        }),
    )
}

/// Residual `E(mu) - E_hat` and model Jacobian with a combined skip mask.
fn residual_and_jacobian(
    e_hat: &GapVector,
    mu: &CoefficientVector,
) -> Result<(DVector<f64>, DMatrix<f64>, Vec<bool>), RecoverError> {
    let expected = GapVector::expected_len(mu.n());
    if e_hat.len() != expected || e_hat.n != mu.n() {
        return Err(RecoverError::WrongLength { n: mu.n(), expected, got: e_hat.len() });
    }
    let (j, model_mask) = jacobian_masked(mu, e_hat.nu)?;
    let model = gap_vector(mu, e_hat.nu)?;
    let mut r = DVector::zeros(e_hat.len());
    let mut mask = vec![false; e_hat.len()];
    for i in 0..e_hat.len() {
        mask[i] = model_mask[i] || model.degenerate[i] || e_hat.degenerate[i];
        if !mask[i] {
            r[i] = model.values[i] - e_hat.values[i];
        }
    }
    let mut j = j;
    for (i, &skip) in mask.iter().enumerate() {
        if skip {
            j.row_mut(i).fill(0.0);
        }
    }
    Ok((r, j, mask))
}

/// Least-squares loss `1/2 ||E(mu, nu) - E_hat||^2` over trusted rows.
pub fn loss(e_hat: &GapVector, mu: &CoefficientVector) -> Result<f64, RecoverError> {
    let (r, _, _) = residual_and_jacobian(e_hat, mu)?;
    Ok(0.5 * r.norm_squared())
}

/// Gradient `J^T (E(mu, nu) - E_hat)` of [`loss`].
pub fn loss_gradient(
    e_hat: &GapVector,
    mu: &CoefficientVector,
) -> Result<DVector<f64>, RecoverError> {
    let (r, j, _) = residual_and_jacobian(e_hat, mu)?;
    Ok(j.transpose() * r)
}

/// Second derivative of the gap for one configuration along a coefficient
/// pair, from second-order perturbation theory on both levels.
pub fn second_derivative_gap(
    mu: &CoefficientVector,
    cfg: &ControlConfig,
    a: &PauliString,
    b: &PauliString,
) -> Result<f64, RecoverError> {
    let spectrum = ConfigSpectrum::new(mu, cfg)?;
    if spectrum.degenerate() {
        return Err(RecoverError::Degenerate { config_index: 0 });
    }
    let paulis = vec![pauli_matrix(a), pauli_matrix(b)];
    let h1 = spectrum.level_second_derivative(&paulis, 1);
    let h0 = spectrum.level_second_derivative(&paulis, 0);
    Ok(h1[(0, 1)] - h0[(0, 1)])
}

/// Full Hessian of [`loss`]: `J^T J + sum_i r_i * (d^2 E_i / d mu^2)`.
pub fn hessian_loss(
    e_hat: &GapVector,
    mu: &CoefficientVector,
) -> Result<DMatrix<f64>, RecoverError> {
    let (r, j, mask) = residual_and_jacobian(e_hat, mu)?;
    let mut h = j.transpose() * &j;
    let n = mu.n();
    let configs = enumerate_configs(n, e_hat.nu)?;
    let paulis = non_identity_paulis(n);
    for (i, cfg) in configs.iter().enumerate() {
        if mask[i] || r[i] == 0.0 {
            continue;
        }
        let spectrum = ConfigSpectrum::new(mu, cfg)?;
        if spectrum.degenerate() {
            continue;
        }
        let curv = spectrum.level_second_derivative(&paulis, 1)
            - spectrum.level_second_derivative(&paulis, 0);
        h += curv.scale(r[i]);
    }
    Ok(h)
}

/// Solver knobs: step-norm tolerance and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500 }
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub method: &'static str,
    pub lambda_hat: CoefficientVector,
    pub iterations: u32,
    pub converged: bool,
    /// Set when the run was aborted on growing or unimprovable steps.
    pub diverged: bool,
    pub final_step_norm: f64,
    pub final_loss: f64,
    /// Rows skipped because of degeneracy (0 in normal operation).
    pub masked_rows: usize,
}

/// Maximum step halvings before a loss-increasing step aborts the run.
const MAX_HALVINGS: u32 = 6;
/// Consecutive step-norm growths treated as divergence.
const MAX_GROWTHS: u32 = 3;

enum StepRule {
    /// Scaled gradient `J_0^{-1} J^T r`.
    FixedPoint,
    /// Gauss-Newton `(J^T J)^{-1} J^T r`.
    GaussNewton,
}

fn solve_inner(
    e_hat: &GapVector,
    mu0: &CoefficientVector,
    opts: SolveOptions,
    rule: StepRule,
) -> Result<SolverReport, RecoverError> {
    let n = mu0.n();
    let j0 = j_zero(n);
    let mut y = mu0.clone();
    let mut prev_step_norm = f64::INFINITY;
    let mut growths = 0u32;
    let mut masked_rows = 0usize;
    let (mut report_step, mut report_loss) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0u32;
    let mut converged = false;
    let mut diverged = false;

    while iterations < opts.max_iter {
        let (r, j, mask) = residual_and_jacobian(e_hat, &y)?;
        masked_rows = mask.iter().filter(|&&m| m).count();
        let current_loss = 0.5 * r.norm_squared();
        let g = j.transpose() * &r;
        let raw_step = match rule {
            StepRule::FixedPoint => g.component_div(&j0),
            StepRule::GaussNewton => {
                let normal = j.transpose() * &j;
                match normal.cholesky() {
                    Some(ch) => ch.solve(&g),
                    None => return Err(RecoverError::SingularNormalMatrix),
                }
            }
        };
        iterations += 1;

        // Backtracking: halve a loss-increasing step a bounded number of
        // times, then give up on the run.
        let mut scale = 1.0f64;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = CoefficientVector::from_dvector_clamped(
                n,
                &(y.to_dvector() - raw_step.scale(scale)),
            )?;
            let candidate_loss = loss(e_hat, &candidate)?;
            if candidate_loss <= current_loss {
                accepted = Some((candidate, candidate_loss));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, next_loss)) = accepted else {
            diverged = true;
            report_loss = current_loss;
            report_step = raw_step.norm();
            break;
        };

        let step_norm = (next.to_dvector() - y.to_dvector()).norm();
        y = next;
        report_loss = next_loss;
        report_step = step_norm;

        if step_norm < opts.tol {
            converged = true;
            break;
        }
        if step_norm > prev_step_norm {
            growths += 1;
            if growths >= MAX_GROWTHS {
                diverged = true;
                break;
            }
        } else {
            growths = 0;
        }
        prev_step_norm = step_norm;
    }

    Ok(SolverReport {
        method: match rule {
            StepRule::FixedPoint => "fixed-point",
            StepRule::GaussNewton => "gauss-newton",
        },
        lambda_hat: y,
        iterations,
        converged,
        diverged,
        final_step_norm: report_step,
        final_loss: report_loss,
        masked_rows,
    })
}

/// Scaled gradient iteration `mu <- mu - J_0^{-1} J^T (E(mu) - E_hat)` with
/// step halving on loss increase.
pub fn solve_fixed_point(
    e_hat: &GapVector,
    mu0: &CoefficientVector,
    opts: SolveOptions,
) -> Result<SolverReport, RecoverError> {
    solve_inner(e_hat, mu0, opts, StepRule::FixedPoint)
}

/// Damped Gauss-Newton on the same residual, as an independent cross-check.
pub fn solve_gauss_newton(
    e_hat: &GapVector,
    mu0: &CoefficientVector,
    opts: SolveOptions,
) -> Result<SolverReport, RecoverError> {
    solve_inner(e_hat, mu0, opts, StepRule::GaussNewton)
}

/// Measures the gap-to-coefficient stability ratio by re-solving from
/// randomly perturbed gap vectors: `max ||solve(E + delta) - mu|| / ||delta||`
/// over `trials` directions of norm `rho`.
pub fn stability_probe(
    mu: &CoefficientVector,
    nu: f64,
    rho: f64,
    trials: u32,
    seed: u64,
) -> Result<f64, RecoverError> {
    let base = gap_vector(mu, nu)?;
    let rows = base.len();
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mut delta: Vec<f64> = (0..rows)
            .map(|i| rng::normal_f64(&[seed, trial as u64, i as u64]))
            .collect();
        let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        for d in &mut delta {
            *d *= rho / norm;
        }
        let perturbed = GapVector {
            n: base.n,
            nu: base.nu,
            values: base.values.iter().zip(&delta).map(|(v, d)| v + d).collect(),
            degenerate: base.degenerate.clone(),
        };
        let report = solve_fixed_point(&perturbed, mu, SolveOptions::default())?;
        worst = worst.max(report.lambda_hat.distance(mu) / rho);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coefficients_from_pairs;

    fn random_mu(n: usize, cap: f64, seed: u64) -> CoefficientVector {
        let len = 4usize.pow(n as u32) - 1;
        let values = (0..len)
            .map(|i| rng::range_f64(&[seed, i as u64], -cap, cap))
            .collect();
        CoefficientVector::new(n, values).unwrap()
    }

    fn paper_single_qubit() -> CoefficientVector {
        coefficients_from_pairs(1, &[("X", 0.1), ("Y", 0.5), ("Z", 0.3)]).unwrap()
    }

    #[test]
    fn j_zero_frozen_values() {
        let d1 = j_zero(1);
        assert_eq!(d1.as_slice(), &[8.0, 8.0, 8.0]);
        let d2 = j_zero(2);
        // Weight-1 strings: 4 * 1 * 4 * 3 = 48; weight-2: 4 * 2 * 4 * 1 = 32.
        assert_eq!(d2.len(), 15);
        for idx in 1..=15usize {
            let w = PauliString::from_index(2, idx).unwrap().weight();
            let want = if w == 1 { 48.0 } else { 32.0 };
            assert_eq!(d2[idx - 1], want, "index {idx}");
        }
    }

    #[test]
    fn gap_vector_shape_and_flags() {
        let mu = paper_single_qubit();
        let gv = gap_vector(&mu, 3.0).unwrap();
        assert_eq!(gv.len(), 6);
        assert!(gv.degenerate.iter().all(|&d| !d));
        assert!(GapVector::from_measurements(1, 3.0, vec![0.0; 5]).is_err());
    }

    #[test]
    fn jacobian_matches_central_differences() {
        // Oracle: symmetric difference quotient of the exact gap vector.
        let h = 1e-5;
        for (n, nu, seed) in [(1usize, 3.0, 11u64), (2usize, 5.0, 12u64)] {
            let mu = random_mu(n, 0.5, seed);
            let j = jacobian(&mu, nu).unwrap();
            let cols = 4usize.pow(n as u32) - 1;
            for col in 0..cols {
                let mut up = mu.to_dvector();
                up[col] += h;
                let mut dn = mu.to_dvector();
                dn[col] -= h;
                let gv_up =
                    gap_vector(&CoefficientVector::from_dvector_clamped(n, &up).unwrap(), nu)
                        .unwrap();
                let gv_dn =
                    gap_vector(&CoefficientVector::from_dvector_clamped(n, &dn).unwrap(), nu)
                        .unwrap();
                for row in 0..gv_up.len() {
                    let fd = (gv_up.values[row] - gv_dn.values[row]) / (2.0 * h);
                    assert!(
                        (j[(row, col)] - fd).abs() < 1e-6,
                        "n={n} row {row} col {col}: {} vs {fd}",
                        j[(row, col)]
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_approaches_signed_pattern_at_large_field() {
        let n = 2;
        let nu = 1000.0;
        let mu = random_mu(n, 0.5, 21);
        let j = jacobian(&mu, nu).unwrap();
        let configs = enumerate_configs(n, nu).unwrap();
        for (row, cfg) in configs.iter().enumerate() {
            for idx in 1..16usize {
                let a = PauliString::from_index(n, idx).unwrap();
                let limit = JACOBIAN_SCALE / 2.0
                    * (crate::model::product_state_expectation(cfg, &a, true).unwrap()
                        - crate::model::product_state_expectation(cfg, &a, false).unwrap());
                assert!(
                    (j[(row, idx - 1)] - limit).abs() < 0.02,
                    "row {row} idx {idx}: {} vs {limit}",
                    j[(row, idx - 1)]
                );
            }
        }
    }

    #[test]
    fn normal_matrix_collapses_to_j_zero() {
        // For the reference two-qubit instance the deviation is 170.44 / nu
        // (measured; the product dev * nu is constant to 4 digits across
        // nu = 250..2000), so nu = 1000 gives 0.1704.
        let mu = CoefficientVector::new(
            2,
            vec![
                0.1, 0.2, 0.3, 0.5, 0.6, 0.3, 0.2, 0.1, 0.1, 0.2, 0.1, 0.1, 0.3, 0.22, 0.15,
            ],
        )
        .unwrap();
        let j = jacobian(&mu, 1000.0).unwrap();
        let normal = j.transpose() * &j;
        let diff = &normal - DMatrix::from_diagonal(&j_zero(2));
        assert!((0.12..0.25).contains(&diff.norm()), "deviation {}", diff.norm());
    }

    #[test]
    fn normal_matrix_deviation_halves_with_field() {
        let n = 2;
        let mu = random_mu(n, 0.5, 44);
        let dev = |nu: f64| {
            let j = jacobian(&mu, nu).unwrap();
            (&j.transpose() * &j - DMatrix::from_diagonal(&j_zero(n))).norm()
        };
        let (d20, d40, d80) = (dev(20.0), dev(40.0), dev(80.0));
        for ratio in [d40 / d20, d80 / d40] {
            assert!((0.3..0.7).contains(&ratio), "ratio {ratio} ({d20} {d40} {d80})");
        }
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let n = 1;
        let nu = 10.0;
        let mu = paper_single_qubit();
        let cfg = ControlConfig::new(1, vec![0], vec![3], nu).unwrap();
        let h = 1e-3;
        for ia in 1..4usize {
            for ib in 1..4usize {
                let a = PauliString::from_index(n, ia).unwrap();
                let b = PauliString::from_index(n, ib).unwrap();
                let analytic = second_derivative_gap(&mu, &cfg, &a, &b).unwrap();
                // Central second difference of the exact gap.
                let gap_at = |da: f64, db: f64| {
                    let mut v = mu.to_dvector();
                    v[ia - 1] += da;
                    v[ib - 1] += db;
                    let m = CoefficientVector::from_dvector_clamped(n, &v).unwrap();
                    exact_gap(&m, &cfg).unwrap().gap
                };
                let fd = if ia == ib {
                    (gap_at(h, 0.0) - 2.0 * gap_at(0.0, 0.0) + gap_at(-h, 0.0)) / (h * h)
                } else {
                    (gap_at(h, h) - gap_at(h, -h) - gap_at(-h, h) + gap_at(-h, -h))
                        / (4.0 * h * h)
                };
                assert!(
                    (analytic - fd).abs() < 1e-6,
                    "({ia},{ib}): {analytic} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn second_derivative_closed_form_and_decay() {
        // n = 1 gap is 2 |v| with v = (mu_x, mu_y, mu_z - nu/2), so its
        // Hessian is 2 (delta_ab - v_a v_b / |v|^2) / |v|. Diagonal entries
        // decay as 1/nu (cross terms decay faster).
        let mu = paper_single_qubit();
        let a = PauliString::from_index(1, 1).unwrap();
        let xx = |nu: f64| {
            let cfg = ControlConfig::new(1, vec![0], vec![3], nu).unwrap();
            second_derivative_gap(&mu, &cfg, &a, &a).unwrap()
        };
        for nu in [10.0f64, 100.0] {
            let v = [0.1f64, 0.5, 0.3 - nu / 2.0];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let closed = 2.0 * (1.0 - (v[0] / norm).powi(2)) / norm;
            assert!((xx(nu) - closed).abs() < 1e-12, "nu={nu}");
        }
        let ratio = xx(100.0) / xx(10.0);
        assert!((0.05..0.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gradient_matches_finite_differences_of_loss() {
        let n = 1;
        let nu = 3.0;
        let truth = paper_single_qubit();
        let e_hat = gap_vector(&truth, nu).unwrap();
        let mu = coefficients_from_pairs(1, &[("X", 0.2), ("Y", 0.4), ("Z", 0.25)]).unwrap();
        let g = loss_gradient(&e_hat, &mu).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut up = mu.to_dvector();
            up[i] += h;
            let mut dn = mu.to_dvector();
            dn[i] -= h;
            let fd = (loss(&e_hat, &CoefficientVector::from_dvector_clamped(n, &up).unwrap())
                .unwrap()
                - loss(&e_hat, &CoefficientVector::from_dvector_clamped(n, &dn).unwrap())
                    .unwrap())
                / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6, "{} vs {fd}", g[i]);
        }
    }

    #[test]
    fn hessian_matches_finite_differences_of_gradient() {
        let n = 1;
        let nu = 5.0;
        let truth = paper_single_qubit();
        let e_hat = gap_vector(&truth, nu).unwrap();
        let mu = coefficients_from_pairs(1, &[("X", 0.15), ("Y", 0.45), ("Z", 0.35)]).unwrap();
        let hess = hessian_loss(&e_hat, &mu).unwrap();
        assert!((&hess - hess.transpose()).norm() < 1e-9);
        let h = 1e-5;
        for i in 0..3 {
            let mut up = mu.to_dvector();
            up[i] += h;
            let mut dn = mu.to_dvector();
            dn[i] -= h;
            let g_up = loss_gradient(
                &e_hat,
                &CoefficientVector::from_dvector_clamped(n, &up).unwrap(),
            )
            .unwrap();
            let g_dn = loss_gradient(
                &e_hat,
                &CoefficientVector::from_dvector_clamped(n, &dn).unwrap(),
            )
            .unwrap();
            for j in 0..3 {
                let fd = (g_up[j] - g_dn[j]) / (2.0 * h);
                assert!(
                    (hess[(j, i)] - fd).abs() < 1e-5,
                    "({j},{i}): {} vs {fd}",
                    hess[(j, i)]
                );
            }
        }
    }

    #[test]
    fn hessian_is_strongly_convex_near_truth() {
        for (n, seed) in [(1usize, 61u64), (2usize, 62u64)] {
            let nu = 100.0;
            let truth = random_mu(n, 0.5, seed);
            let e_hat = gap_vector(&truth, nu).unwrap();
            let hess = hessian_loss(&e_hat, &truth).unwrap();
            let min_eig = nalgebra::SymmetricEigen::new(hess)
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |m, &e| m.min(e));
            let floor = JACOBIAN_SCALE * JACOBIAN_SCALE * (1u64 << (n - 1)) as f64;
            // Finite-field correction shifts the spectrum by O(1/nu).
            assert!(
                min_eig >= floor * (1.0 - 20.0 / nu),
                "n={n}: min eig {min_eig} < {floor}"
            );
        }
    }

    #[test]
    fn solvers_recover_truth_from_exact_gaps() {
        let truth = paper_single_qubit();
        let guess = coefficients_from_pairs(1, &[("X", 0.09), ("Y", 0.51), ("Z", 0.29)]).unwrap();
        for nu in [1.9, 3.0] {
            let e_hat = gap_vector(&truth, nu).unwrap();
            let fp = solve_fixed_point(&e_hat, &guess, SolveOptions::default()).unwrap();
            assert!(fp.converged && !fp.diverged, "nu={nu}: {fp:?}");
            assert!(fp.lambda_hat.distance(&truth) < 1e-9, "nu={nu}");
            let gn = solve_gauss_newton(&e_hat, &guess, SolveOptions::default()).unwrap();
            assert!(gn.converged);
            assert!(
                fp.lambda_hat.distance(&gn.lambda_hat) < 1e-8,
                "nu={nu}: methods disagree"
            );
        }
    }

    #[test]
    fn two_qubit_recovery_from_exact_gaps() {
        let truth = random_mu(2, 0.6, 71);
        let guess = {
            let delta = random_mu(2, 0.02, 72);
            CoefficientVector::from_dvector_clamped(
                2,
                &(truth.to_dvector() + delta.to_dvector()),
            )
            .unwrap()
        };
        let e_hat = gap_vector(&truth, 5.0).unwrap();
        let fp = solve_fixed_point(&e_hat, &guess, SolveOptions::default()).unwrap();
        assert!(fp.converged);
        assert!(fp.lambda_hat.distance(&truth) < 1e-9, "err {}", fp.lambda_hat.distance(&truth));
    }

    #[test]
    fn solver_reports_cleanly_when_far_from_basin() {
        // A wild guess must not panic: either it converges somewhere or the
        // run flags divergence / hits the iteration cap.
        let truth = paper_single_qubit();
        let e_hat = gap_vector(&truth, 1.9).unwrap();
        let wild = coefficients_from_pairs(1, &[("X", -1.9), ("Y", 1.8), ("Z", -1.7)]).unwrap();
        let report =
            solve_fixed_point(&e_hat, &wild, SolveOptions { tol: 1e-10, max_iter: 60 }).unwrap();
        assert!(report.iterations <= 60);
        assert!(report.final_loss.is_finite());
    }

    #[test]
    fn stability_probe_within_large_field_constant() {
        for (n, seed) in [(1usize, 81u64), (2usize, 82u64)] {
            let truth = random_mu(n, 0.5, seed);
            let ratio = stability_probe(&truth, 100.0, 1e-3, 5, seed).unwrap();
            let budget = 1.0 / (1u64 << (n - 1)) as f64;
            let budget = budget.sqrt();
            assert!(ratio <= budget, "n={n}: ratio {ratio} > {budget}");
        }
    }
}
