//! End-to-end learning runs and the sweep drivers behind the command line
//! tool.
//!
//! A run measures the energy gap of every control configuration with the
//! robust frequency estimator, then recovers the coefficient vector from the
//! gap vector. The sweep drivers repeat runs across precision ladders,
//! readout-noise grids, and initial-guess offsets, and render deterministic
//! CSV reports: identical inputs produce byte-identical files regardless of
//! thread count.

use crate::bounds::{self, BoundsError, TvComparison};
use crate::model::{
    a_priori_phase_bound, enumerate_configs, CoefficientVector, ModelError,
};
use crate::recover::{
    gap_vector, jacobian, solve_fixed_point, solve_gauss_newton, stability_probe, GapVector,
    RecoverError, SolveOptions, SolverReport,
};
use crate::rfe::{
    median_boost, rfe_estimate, QuadratureOracle, RfeConfig, RfeError,
};
use crate::rng;
use crate::simkernel::{NoiseModel, SimError, SimOracle};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rfe(#[from] RfeError),
    #[error(transparent)]
    Recover(#[from] RecoverError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("bad run parameter: {0}")]
    BadParameter(String),
}

/// First line of every CSV report; bump the suffix when columns change.
pub const CSV_MAGIC: &str = "# hamlearn-csv v1";

/// Default gap-to-coefficient amplification estimate used to split the
/// coefficient accuracy target into a per-gap target.
pub const DEFAULT_C_HAT: f64 = 4.0;

fn default_c_hat() -> f64 {
    DEFAULT_C_HAT
}

/// Optional overrides for the frequency-estimator knobs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RfeOverrides {
    pub shots: Option<u32>,
    pub votes: Option<u32>,
    pub medians: Option<u32>,
    pub kappa: Option<f64>,
}

/// Full description of one learning run. Serializable so runs can be driven
/// from JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Coefficients of the system being simulated (ground truth).
    pub true_lambda: CoefficientVector,
    /// A-priori estimate the solver starts from; also sets the frequency
    /// search window.
    pub initial_guess: CoefficientVector,
    /// Control field strength.
    pub nu: f64,
    /// Accuracy target for the recovered coefficient vector (l2).
    pub target_epsilon: f64,
    /// Readout bit-flip probability per qubit.
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Assumed amplification from gap errors to coefficient errors; the
    /// per-gap target is `target_epsilon / (3 c_hat)`.
    #[serde(default = "default_c_hat")]
    pub c_hat: f64,
    /// Replace `c_hat` with a measured stability ratio before running.
    #[serde(default)]
    pub auto_c_hat: bool,
    #[serde(default)]
    pub rfe: RfeOverrides,
}

impl RunConfig {
    pub fn new(
        true_lambda: CoefficientVector,
        initial_guess: CoefficientVector,
        nu: f64,
        target_epsilon: f64,
    ) -> Self {
        Self {
            true_lambda,
            initial_guess,
            nu,
            target_epsilon,
            eta: 0.0,
            seed: 0,
            c_hat: DEFAULT_C_HAT,
            auto_c_hat: false,
            rfe: RfeOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.true_lambda.n() != self.initial_guess.n() {
            return Err(ProtocolError::BadParameter(format!(
                "true_lambda has {} qubits but initial_guess has {}",
                self.true_lambda.n(),
                self.initial_guess.n()
            )));
        }
        if !self.nu.is_finite() || self.nu <= 0.0 {
            return Err(ProtocolError::BadParameter(format!(
                "field strength nu must be positive, got {}",
                self.nu
            )));
        }
        if !self.target_epsilon.is_finite() || self.target_epsilon <= 0.0 {
            return Err(ProtocolError::BadParameter(format!(
                "target_epsilon must be positive, got {}",
                self.target_epsilon
            )));
        }
        if !self.c_hat.is_finite() || self.c_hat <= 0.0 {
            return Err(ProtocolError::BadParameter(format!(
                "c_hat must be positive, got {}",
                self.c_hat
            )));
        }
        Ok(())
    }

    /// Estimator configuration for this run: window from the initial guess,
    /// per-gap precision from the accuracy target, overrides applied last.
    pub fn rfe_config(&self, c_hat: f64) -> Result<RfeConfig, ProtocolError> {
        let phi_max = a_priori_phase_bound(&self.initial_guess, self.nu);
        let mut cfg = RfeConfig::new(phi_max, self.target_epsilon / (3.0 * c_hat))?;
        if let Some(shots) = self.rfe.shots {
            cfg.shots = shots;
        }
        if let Some(votes) = self.rfe.votes {
            cfg.votes = votes;
        }
        if let Some(medians) = self.rfe.medians {
            cfg.medians = medians;
        }
        if let Some(kappa) = self.rfe.kappa {
            cfg.kappa = kappa;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The amplification constant actually used: either the configured
    /// `c_hat` or, in auto mode, a measured stability ratio scaled by the
    /// square root of the gap-vector length.
    pub fn effective_c_hat(&self) -> Result<f64, ProtocolError> {
        if !self.auto_c_hat {
            return Ok(self.c_hat);
        }
        let rows = GapVector::expected_len(self.initial_guess.n()) as f64;
        let probe = stability_probe(
            &self.initial_guess,
            self.nu,
            1e-4,
            6,
            rng::stream_u64(&[self.seed, 0xC4A7]),
        )?;
        Ok((probe * rows.sqrt()).max(1.0))
    }
}

/// Gap measurement for one control configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub index: usize,
    /// Distinguished qubit (1-based).
    pub k: usize,
    /// Sign pattern, qubit 1 first.
    pub s: String,
    /// Axis pattern, qubit 1 first.
    pub beta: String,
    pub gap_hat: f64,
    /// Exact gap of the simulated generator, for diagnostics.
    pub gap_true: f64,
    pub rounds: u32,
    pub calls: u64,
    pub time_used: f64,
}

/// All gap measurements of one run plus the evolution-time accounting.
#[derive(Debug, Clone, Serialize)]
pub struct GapMeasurement {
    pub gaps: GapVector,
    pub rows: Vec<GapRow>,
    /// Evolution time summed over configurations.
    pub total_time: f64,
    /// The same total rebuilt from per-call duration traces; must agree.
    pub trace_time: f64,
    pub total_calls: u64,
}

/// Measures every configuration's gap by median-boosted frequency
/// estimation against the simulated system `lambda`.
pub fn measure_gaps(
    lambda: &CoefficientVector,
    noise: NoiseModel,
    rfe_cfg: &RfeConfig,
    nu: f64,
    seed: u64,
) -> Result<GapMeasurement, ProtocolError> {
    rfe_cfg.validate()?;
    let configs = enumerate_configs(lambda.n(), nu)?;
    let per_config: Vec<(f64, GapRow, f64)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| -> Result<(f64, GapRow, f64), ProtocolError> {
            let mut oracle = SimOracle::new(lambda, cfg, noise, rfe_cfg.shots, seed, i as u64)?;
            let mut thetas = Vec::with_capacity(rfe_cfg.medians as usize);
            let mut rounds = 0;
            for _ in 0..rfe_cfg.medians {
                let est = rfe_estimate(&mut oracle, rfe_cfg)?;
                thetas.push(est.theta);
                rounds = rounds.max(est.rounds);
            }
            let gap_hat = median_boost(&thetas)?;
            let row = GapRow {
                index: i,
                k: cfg.k0() + 1,
                s: cfg.s_bits(),
                beta: cfg.beta_string(),
                gap_hat,
                gap_true: oracle.true_gap(),
                rounds,
                calls: oracle.calls(),
                time_used: oracle.time_used(),
            };
            Ok((gap_hat, row, oracle.trace().iter().sum()))
        })
        .collect::<Result<_, _>>()?;
    let gaps: Vec<f64> = per_config.iter().map(|(g, _, _)| *g).collect();
    let rows: Vec<GapRow> = per_config.iter().map(|(_, r, _)| r.clone()).collect();
    Ok(GapMeasurement {
        gaps: GapVector::from_measurements(lambda.n(), nu, gaps)?,
        total_time: rows.iter().map(|r| r.time_used).sum(),
        trace_time: per_config.iter().map(|(_, _, t)| *t).sum(),
        total_calls: rows.iter().map(|r| r.calls).sum(),
        rows,
    })
}

/// Fixed-point solve with a Gauss-Newton fallback; returns whichever run
/// converged, or the lower-loss report if neither did.
pub fn best_solve(
    e_hat: &GapVector,
    guess: &CoefficientVector,
) -> Result<SolverReport, ProtocolError> {
    let fp = solve_fixed_point(e_hat, guess, SolveOptions::default())?;
    if fp.converged && !fp.diverged {
        return Ok(fp);
    }
    log::warn!(
        "fixed-point solve did not converge (loss {:.3e}); retrying with Gauss-Newton",
        fp.final_loss
    );
    let gn = solve_gauss_newton(e_hat, guess, SolveOptions::default())?;
    if gn.converged && !gn.diverged {
        return Ok(gn);
    }
    Ok(if gn.final_loss < fp.final_loss { gn } else { fp })
}

/// Outcome of one full run.
#[derive(Debug, Clone, Serialize)]
pub struct LearnResult {
    pub lambda_hat: CoefficientVector,
    pub solver: SolverReport,
    pub rows: Vec<GapRow>,
    /// l2 distance to the simulated truth.
    pub l2_error: f64,
    /// Largest single-coefficient error.
    pub max_error: f64,
    pub total_time: f64,
    /// Cross-check of `total_time` from per-call duration traces.
    pub trace_time: f64,
    pub total_calls: u64,
    /// Oracle calls times shots per call.
    pub total_experiments: u64,
    pub rfe_epsilon: f64,
    pub phi_max: f64,
    pub c_hat_used: f64,
}

/// Runs the full protocol: measure every gap, then recover the coefficients.
pub fn learn(run: &RunConfig) -> Result<LearnResult, ProtocolError> {
    run.validate()?;
    let noise = NoiseModel::new(run.eta)?;
    let c_hat = run.effective_c_hat()?;
    let rfe_cfg = run.rfe_config(c_hat)?;
    log::info!(
        "learning n={} at nu={} with per-gap precision {:.3e} over {} configurations",
        run.true_lambda.n(),
        run.nu,
        rfe_cfg.epsilon,
        GapVector::expected_len(run.true_lambda.n())
    );
    let measurement = measure_gaps(&run.true_lambda, noise, &rfe_cfg, run.nu, run.seed)?;
    let solver = best_solve(&measurement.gaps, &run.initial_guess)?;
    let l2_error = solver.lambda_hat.distance(&run.true_lambda);
    let max_error = solver
        .lambda_hat
        .values()
        .iter()
        .zip(run.true_lambda.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let total_experiments = measurement.total_calls * rfe_cfg.shots as u64;
    Ok(LearnResult {
        lambda_hat: solver.lambda_hat.clone(),
        solver,
        l2_error,
        max_error,
        total_time: measurement.total_time,
        trace_time: measurement.trace_time,
        total_calls: measurement.total_calls,
        total_experiments,
        rfe_epsilon: rfe_cfg.epsilon,
        phi_max: rfe_cfg.phi_max,
        c_hat_used: c_hat,
        rows: measurement.rows,
    })
}

impl LearnResult {
    /// Per-configuration gap table.
    pub fn gaps_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CSV_MAGIC}");
        let _ = writeln!(out, "# rows=gaps");
        let _ = writeln!(out, "index,k,s,beta,gap_hat,gap_true,rounds,calls,time");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.index, r.k, r.s, r.beta, r.gap_hat, r.gap_true, r.rounds, r.calls, r.time_used
            );
        }
        out
    }
}

/// Linear-interpolation percentile of an ascending-sorted slice.
///
/// Panics on an empty slice or a percentile outside `[0, 100]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    assert!((0.0..=100.0).contains(&p), "percentile {p} outside [0, 100]");
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Least-squares slope of `ln y` against `ln x`; NaN when fewer than two
/// usable (positive) points remain.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return f64::NAN;
    }
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Percentiles reported by every sweep, in order.
pub const SWEEP_PERCENTILES: [f64; 5] = [25.0, 35.0, 50.0, 65.0, 75.0];

/// A precision ladder replicated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSweepConfig {
    pub base: RunConfig,
    /// Accuracy targets, typically log-spaced over several decades.
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Aggregates over seeds at one accuracy target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub target_epsilon: f64,
    /// l2 error at [`SWEEP_PERCENTILES`].
    pub err_percentiles: [f64; 5],
    /// Total evolution time at [`SWEEP_PERCENTILES`].
    pub time_percentiles: [f64; 5],
    pub mean_calls: f64,
    pub mean_experiments: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSweep {
    pub points: Vec<SweepPoint>,
    /// Log-log slope of median error against median total time.
    pub slope: f64,
}

fn aggregate_point(target_epsilon: f64, results: &[LearnResult]) -> SweepPoint {
    let mut errs: Vec<f64> = results.iter().map(|r| r.l2_error).collect();
    let mut times: Vec<f64> = results.iter().map(|r| r.total_time).collect();
    errs.sort_by(f64::total_cmp);
    times.sort_by(f64::total_cmp);
    let pct = |v: &[f64]| SWEEP_PERCENTILES.map(|p| percentile(v, p));
    let count = results.len() as f64;
    SweepPoint {
        target_epsilon,
        err_percentiles: pct(&errs),
        time_percentiles: pct(&times),
        mean_calls: results.iter().map(|r| r.total_calls as f64).sum::<f64>() / count,
        mean_experiments: results.iter().map(|r| r.total_experiments as f64).sum::<f64>() / count,
    }
}

/// Runs the ladder of accuracy targets over all seeds and fits the error
/// versus time scaling. Points run in parallel; aggregation order is fixed,
/// so the output is independent of thread count.
pub fn sweep_error_vs_time(cfg: &TimeSweepConfig) -> Result<TimeSweep, ProtocolError> {
    cfg.base.validate()?;
    if cfg.epsilons.is_empty() || cfg.seeds.is_empty() {
        return Err(ProtocolError::BadParameter(
            "sweep needs at least one epsilon and one seed".into(),
        ));
    }
    if let Some(&bad) = cfg.epsilons.iter().find(|e| !e.is_finite() || **e <= 0.0) {
        return Err(ProtocolError::BadParameter(format!(
            "sweep epsilon must be positive, got {bad}"
        )));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.epsilons.len())
        .flat_map(|ei| (0..cfg.seeds.len()).map(move |si| (ei, si)))
        .collect();
    let results: Vec<LearnResult> = jobs
        .par_iter()
        .map(|&(ei, si)| {
            let mut run = cfg.base.clone();
            run.target_epsilon = cfg.epsilons[ei];
            run.seed = rng::stream_u64(&[cfg.seeds[si], ei as u64, 0xA11]);
            learn(&run)
        })
        .collect::<Result<_, _>>()?;
    let points: Vec<SweepPoint> = results
        .chunks(cfg.seeds.len())
        .zip(&cfg.epsilons)
        .map(|(chunk, &eps)| aggregate_point(eps, chunk))
        .collect();
    let median_pairs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.time_percentiles[2], p.err_percentiles[2]))
        .collect();
    Ok(TimeSweep { slope: fit_loglog_slope(&median_pairs), points })
}

fn sweep_columns() -> String {
    let mut cols = String::from("epsilon");
    for p in SWEEP_PERCENTILES {
        let _ = write!(cols, ",err_p{p}");
    }
    for p in SWEEP_PERCENTILES {
        let _ = write!(cols, ",time_p{p}");
    }
    cols.push_str(",mean_calls,mean_experiments");
    cols
}

fn write_point_fields(out: &mut String, p: &SweepPoint) {
    let _ = write!(out, "{}", p.target_epsilon);
    for v in p.err_percentiles {
        let _ = write!(out, ",{v}");
    }
    for v in p.time_percentiles {
        let _ = write!(out, ",{v}");
    }
    let _ = writeln!(out, ",{},{}", p.mean_calls, p.mean_experiments);
}

impl TimeSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CSV_MAGIC}");
        let _ = writeln!(out, "# rows=error-vs-time");
        let _ = writeln!(out, "{}", sweep_columns());
        for p in &self.points {
            write_point_fields(&mut out, p);
        }
        let _ = writeln!(out, "# loglog_slope={}", self.slope);
        out
    }
}

/// The time sweep repeated across readout-noise levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpamSweep {
    pub etas: Vec<f64>,
    pub sweeps: Vec<TimeSweep>,
}

pub fn sweep_spam(cfg: &TimeSweepConfig, etas: &[f64]) -> Result<SpamSweep, ProtocolError> {
    if etas.is_empty() {
        return Err(ProtocolError::BadParameter("spam sweep needs etas".into()));
    }
    let mut sweeps = Vec::with_capacity(etas.len());
    for &eta in etas {
        let mut sub = cfg.clone();
        sub.base.eta = eta;
        sweeps.push(sweep_error_vs_time(&sub)?);
    }
    Ok(SpamSweep { etas: etas.to_vec(), sweeps })
}

impl SpamSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CSV_MAGIC}");
        let _ = writeln!(out, "# rows=error-vs-time-by-eta");
        let _ = writeln!(out, "eta,{}", sweep_columns());
        for (eta, sweep) in self.etas.iter().zip(&self.sweeps) {
            for p in &sweep.points {
                let _ = write!(out, "{eta},");
                write_point_fields(&mut out, p);
            }
        }
        for (eta, sweep) in self.etas.iter().zip(&self.sweeps) {
            let _ = writeln!(out, "# loglog_slope eta={eta} slope={}", sweep.slope);
        }
        out
    }
}

/// Solver behavior as a function of initial-guess quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuessSweepPoint {
    pub offset_norm: f64,
    /// Fraction of seeds whose solve converged to within the success
    /// tolerance of the truth.
    pub solved_fraction: f64,
    pub median_error: f64,
    pub worst_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuessSweep {
    pub points: Vec<GuessSweepPoint>,
    pub success_tol: f64,
    pub gap_epsilon: f64,
}

/// Measures each seed's gap vector once at precision `gap_epsilon`, then
/// re-solves it from initial guesses offset from the truth by each norm in
/// `offsets` (random direction per seed and offset).
pub fn sweep_initial_guess(
    run: &RunConfig,
    offsets: &[f64],
    seeds: &[u64],
    gap_epsilon: f64,
    success_tol: f64,
) -> Result<GuessSweep, ProtocolError> {
    run.validate()?;
    if offsets.is_empty() || seeds.is_empty() {
        return Err(ProtocolError::BadParameter(
            "guess sweep needs offsets and seeds".into(),
        ));
    }
    let noise = NoiseModel::new(run.eta)?;
    let mut rfe_cfg = RfeConfig::new(
        a_priori_phase_bound(&run.true_lambda, run.nu),
        gap_epsilon,
    )?;
    if let Some(medians) = run.rfe.medians {
        rfe_cfg.medians = medians;
    }
    let gap_vectors: Vec<GapVector> = seeds
        .par_iter()
        .map(|&seed| {
            measure_gaps(&run.true_lambda, noise, &rfe_cfg, run.nu, seed).map(|m| m.gaps)
        })
        .collect::<Result<_, _>>()?;
    let truth_vec = run.true_lambda.to_dvector();
    let dim = truth_vec.len();
    let mut points = Vec::with_capacity(offsets.len());
    for (oi, &offset) in offsets.iter().enumerate() {
        if !offset.is_finite() || offset < 0.0 {
            return Err(ProtocolError::BadParameter(format!(
                "offset norms must be nonnegative, got {offset}"
            )));
        }
        let mut errors = Vec::with_capacity(seeds.len());
        let mut solved = 0usize;
        for (si, e_hat) in gap_vectors.iter().enumerate() {
            let mut delta: Vec<f64> = (0..dim)
                .map(|i| rng::normal_f64(&[seeds[si], 0x0FF5, oi as u64, i as u64]))
                .collect();
            let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            for d in &mut delta {
                *d *= offset / norm;
            }
            let guess_vec = &truth_vec + nalgebra::DVector::from_vec(delta);
            let guess = CoefficientVector::from_dvector_clamped(run.true_lambda.n(), &guess_vec)?;
            let report = best_solve(e_hat, &guess)?;
            let err = report.lambda_hat.distance(&run.true_lambda);
            if report.converged && err <= success_tol {
                solved += 1;
            }
            errors.push(err);
        }
        errors.sort_by(f64::total_cmp);
        points.push(GuessSweepPoint {
            offset_norm: offset,
            solved_fraction: solved as f64 / seeds.len() as f64,
            median_error: percentile(&errors, 50.0),
            worst_error: errors[errors.len() - 1],
        });
    }
    Ok(GuessSweep { points, success_tol, gap_epsilon })
}

impl GuessSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CSV_MAGIC}");
        let _ = writeln!(
            out,
            "# rows=guess-offsets success_tol={} gap_epsilon={}",
            self.success_tol, self.gap_epsilon
        );
        let _ = writeln!(out, "offset_norm,solved_fraction,median_error,worst_error");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                p.offset_norm, p.solved_fraction, p.median_error, p.worst_error
            );
        }
        out
    }
}

/// Summary of the analytic-bound verifiers.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub unitary_samples: u32,
    /// Fraction of random instances on which the unitary-difference bound
    /// dominated the exact norm.
    pub unitary_fraction: f64,
    pub tv_rows: Vec<TvComparison>,
    /// Minimum-time curve at the reference Le Cam parameters.
    pub t0_epsilons: Vec<f64>,
    pub t0_values: Vec<f64>,
}

/// Reference Le Cam parameters for the reported minimum-time curve.
pub const T0_REFERENCE: (f64, f64, f64) = (0.9, 16.0, 0.5);

pub fn bounds_report(samples: u32, seed: u64) -> Result<BoundsReport, ProtocolError> {
    let unitary_fraction = bounds::verify_unitary_bound(samples, seed);
    let tv_rows = bounds::tv_domination_table()?;
    let (q, k, nu) = T0_REFERENCE;
    let t0_epsilons: Vec<f64> = (1..=6).map(|d| 10f64.powi(-d)).collect();
    let t0_values = t0_epsilons
        .iter()
        .map(|&epsilon| {
            bounds::time_lower_bound(&bounds::BoundParams {
                epsilon,
                nu,
                t_total: 0.0,
                segments: 0.0,
                q,
                k,
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(BoundsReport { unitary_samples: samples, unitary_fraction, tv_rows, t0_epsilons, t0_values })
}

impl BoundsReport {
    /// Human-readable (and deterministic) report.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "unitary-difference bound: {}/{} random instances dominated",
            (self.unitary_fraction * self.unitary_samples as f64).round() as u64,
            self.unitary_samples
        );
        let violations = self.tv_rows.iter().filter(|r| !r.ok).count();
        let _ = writeln!(
            out,
            "total-variation bound: {} grid points, {} violations",
            self.tv_rows.len(),
            violations
        );
        let worst = self
            .tv_rows
            .iter()
            .map(|r| r.exact / r.bound.max(1e-300))
            .fold(0.0f64, f64::max);
        let _ = writeln!(out, "tightest exact/bound ratio: {worst:.4}");
        let (q, k, nu) = T0_REFERENCE;
        let _ = writeln!(
            out,
            "minimum evolution time at q={q}, k={k}, nu={nu} (no segment budget):"
        );
        for (eps, t0) in self.t0_epsilons.iter().zip(&self.t0_values) {
            let _ = writeln!(out, "  epsilon={eps:<8} T0={t0:.6e}  T0*epsilon={:.6e}", t0 * eps);
        }
        out
    }
}

/// One self-check outcome for the `verify` command.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Fast end-to-end self-checks covering every stage of the pipeline.
pub fn verify_all(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    let fraction = bounds::verify_unitary_bound(2000, seed);
    out.push(CheckOutcome {
        name: "unitary-bound-monte-carlo",
        pass: fraction == 1.0,
        detail: format!("fraction dominated: {fraction}"),
    });

    match bounds::tv_domination_table() {
        Ok(rows) => {
            let bad = rows.iter().filter(|r| !r.ok).count();
            out.push(CheckOutcome {
                name: "tv-bound-domination",
                pass: bad == 0,
                detail: format!("{bad} violations over {} grid points", rows.len()),
            });
        }
        Err(e) => out.push(CheckOutcome {
            name: "tv-bound-domination",
            pass: false,
            detail: e.to_string(),
        }),
    }

    out.push(gap_accuracy_check(seed));
    out.push(jacobian_check());
    out.push(solver_roundtrip_check());
    out.push(determinism_check(seed));
    out
}

fn gap_accuracy_check(seed: u64) -> CheckOutcome {
    let name = "gap-estimates-within-3-epsilon";
    let (truth, _) = one_qubit_instance();
    let run_it = || -> Result<(f64, f64), ProtocolError> {
        let rfe_cfg = RfeConfig::new(a_priori_phase_bound(&truth, 3.0), 1e-4)?;
        let noise = NoiseModel::new(0.05)?;
        let m = measure_gaps(&truth, noise, &rfe_cfg, 3.0, seed)?;
        let worst = m
            .rows
            .iter()
            .map(|r| (r.gap_hat - r.gap_true).abs())
            .fold(0.0f64, f64::max);
        Ok((worst, 3.0 * rfe_cfg.epsilon))
    };
    match run_it() {
        Ok((worst, allowed)) => CheckOutcome {
            name,
            pass: worst <= allowed,
            detail: format!("worst gap error {worst:.3e}, allowed {allowed:.3e}"),
        },
        Err(e) => CheckOutcome { name, pass: false, detail: e.to_string() },
    }
}

fn jacobian_check() -> CheckOutcome {
    let name = "jacobian-matches-finite-differences";
    let (truth, _) = one_qubit_instance();
    let run_it = || -> Result<f64, ProtocolError> {
        let nu = 3.0;
        let j = jacobian(&truth, nu)?;
        let h = 1e-5;
        let mut worst = 0.0f64;
        for c in 0..truth.len() {
            let mut up = truth.values().to_vec();
            let mut dn = up.clone();
            up[c] += h;
            dn[c] -= h;
            let ep = gap_vector(&CoefficientVector::new(1, up)?, nu)?;
            let em = gap_vector(&CoefficientVector::new(1, dn)?, nu)?;
            for r in 0..ep.values.len() {
                let fd = (ep.values[r] - em.values[r]) / (2.0 * h);
                worst = worst.max((fd - j[(r, c)]).abs());
            }
        }
        Ok(worst)
    };
    match run_it() {
        Ok(worst) => CheckOutcome {
            name,
            pass: worst <= 1e-6,
            detail: format!("worst |analytic - finite difference| = {worst:.3e}"),
        },
        Err(e) => CheckOutcome { name, pass: false, detail: e.to_string() },
    }
}

fn solver_roundtrip_check() -> CheckOutcome {
    let name = "solvers-recover-exact-gaps";
    let (truth, guess) = one_qubit_instance();
    let run_it = || -> Result<(f64, f64), ProtocolError> {
        let e = gap_vector(&truth, 3.0)?;
        let fp = solve_fixed_point(&e, &guess, SolveOptions::default())?;
        let gn = solve_gauss_newton(&e, &guess, SolveOptions::default())?;
        Ok((
            fp.lambda_hat.distance(&truth).max(gn.lambda_hat.distance(&truth)),
            fp.lambda_hat.distance(&gn.lambda_hat),
        ))
    };
    match run_it() {
        Ok((worst, disagreement)) => CheckOutcome {
            name,
            pass: worst <= 1e-8 && disagreement <= 1e-8,
            detail: format!("worst error {worst:.3e}, solver disagreement {disagreement:.3e}"),
        },
        Err(e) => CheckOutcome { name, pass: false, detail: e.to_string() },
    }
}

fn determinism_check(seed: u64) -> CheckOutcome {
    let name = "csv-reports-are-deterministic";
    let (truth, guess) = one_qubit_instance();
    let cfg = TimeSweepConfig {
        base: RunConfig { eta: 0.05, seed, ..RunConfig::new(truth, guess, 3.0, 1e-2) },
        epsilons: vec![1e-2, 3e-3],
        seeds: vec![seed, seed ^ 1],
    };
    let run_it = || -> Result<(String, String), ProtocolError> {
        Ok((sweep_error_vs_time(&cfg)?.to_csv(), sweep_error_vs_time(&cfg)?.to_csv()))
    };
    match run_it() {
        Ok((a, b)) => CheckOutcome {
            name,
            pass: a == b,
            detail: format!("{} bytes, identical: {}", a.len(), a == b),
        },
        Err(e) => CheckOutcome { name, pass: false, detail: e.to_string() },
    }
}

/// Single-qubit demonstration system: truth and a nearby initial guess.
pub fn one_qubit_instance() -> (CoefficientVector, CoefficientVector) {
    let truth = CoefficientVector::new(1, vec![0.1, 0.5, 0.3]).expect("static instance");
    let guess = CoefficientVector::new(1, vec![0.09, 0.51, 0.29]).expect("static instance");
    (truth, guess)
}

/// Two-qubit demonstration system: truth and a nearby initial guess, in
/// coefficient-index order (IX, IY, IZ, XI, XX, ..., ZZ).
pub fn two_qubit_instance() -> (CoefficientVector, CoefficientVector) {
    let truth = CoefficientVector::new(
        2,
        vec![
            0.1, 0.2, 0.3, 0.5, 0.6, 0.3, 0.2, 0.1, 0.1, 0.2, 0.1, 0.1, 0.3, 0.22, 0.15,
        ],
    )
    .expect("static instance");
    let guess = CoefficientVector::new(
        2,
        vec![
            0.11, 0.21, 0.32, 0.51, 0.63, 0.31, 0.22, 0.11, 0.11, 0.22, 0.11, 0.11, 0.33, 0.22,
            0.15,
        ],
    )
    .expect("static instance");
    (truth, guess)
}

/// Standard single-qubit run at the given field strength and readout noise.
pub fn one_qubit_run(nu: f64, eta: f64, target_epsilon: f64, seed: u64) -> RunConfig {
    let (truth, guess) = one_qubit_instance();
    RunConfig { eta, seed, ..RunConfig::new(truth, guess, nu, target_epsilon) }
}

/// Standard two-qubit run: field strength 5, readout noise 0.03.
pub fn two_qubit_run(target_epsilon: f64, seed: u64) -> RunConfig {
    let (truth, guess) = two_qubit_instance();
    RunConfig { eta: 0.03, seed, ..RunConfig::new(truth, guess, 5.0, target_epsilon) }
}
