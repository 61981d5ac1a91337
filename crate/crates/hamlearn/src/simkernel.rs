//! Exact experiment simulation: evolved expectation values, measurement
//! probabilities, SPAM noise, and deterministic outcome sampling.
//!
//! One experiment prepares `Phi_+`, evolves it for time `t` under the total
//! generator, and measures the signed observable `O_c` or `O_s` on qubit `k`.
//! The outcome bit satisfies `Pr[b = 0] = (1 + <O(t)>) / 2`; the two
//! quadratures together recover the phase `E_Delta * t` of the ground-state
//! gap. Readout error flips the measured bit on qubit `k` with probability
//! `eta`, which rescales both quadratures by `1 - 2 eta` and therefore leaves
//! the phase untouched.

use crate::model::{
    build_total, eigensystem, select_observables, ControlConfig, CoefficientVector, ModelError,
    SignedPauli,
};
use crate::pauli::{CMatrix, CVector};
use crate::rfe::QuadratureOracle;
use crate::rng;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("readout flip probability must satisfy 0 <= eta < 0.5, got {0}")]
    EtaOutOfRange(f64),
    #[error("shots must be positive")]
    NoShots,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which quadrature an experiment measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// `O_c`, the cosine quadrature.
    Cos,
    /// `O_s`, the sine quadrature.
    Sin,
}

impl Quadrature {
    /// Stable tag used in RNG key paths and report columns.
    pub fn tag(self) -> u64 {
        match self {
            Quadrature::Cos => 0,
            Quadrature::Sin => 1,
        }
    }

    pub fn label(self) -> char {
        match self {
            Quadrature::Cos => 'c',
            Quadrature::Sin => 's',
        }
    }
}

/// Independent readout bit-flip with probability `eta` per qubit. Only the
/// flip on the measured qubit `k` affects a single-qubit outcome, so the
/// model reduces to one flip channel on the outcome bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NoiseModel {
    eta: f64,
}

impl NoiseModel {
    pub fn new(eta: f64) -> Result<Self, SimError> {
        if !eta.is_finite() || !(0.0..0.5).contains(&eta) {
            return Err(SimError::EtaOutOfRange(eta));
        }
        Ok(Self { eta })
    }

    pub fn noiseless() -> Self {
        Self { eta: 0.0 }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Outcome probability after the flip channel.
    pub fn flip(&self, p0: f64) -> f64 {
        (1.0 - self.eta) * p0 + self.eta * (1.0 - p0)
    }
}

impl TryFrom<f64> for NoiseModel {
    type Error = String;

    fn try_from(eta: f64) -> Result<Self, String> {
        NoiseModel::new(eta).map_err(|e| e.to_string())
    }
}

impl From<NoiseModel> for f64 {
    fn from(m: NoiseModel) -> f64 {
        m.eta
    }
}

/// One sampled measurement bit with the key path that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentOutcome {
    pub config_index: u64,
    pub t_index: u64,
    pub quadrature: Quadrature,
    pub shot: u64,
    pub bit: u8,
}

/// RNG coordinates of a shot batch: global seed, configuration index, and a
/// per-configuration time index that advances with every oracle call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotStream {
    pub seed: u64,
    pub config_index: u64,
    pub t_index: u64,
}

impl ShotStream {
    fn key(&self, quad: Quadrature, shot: u64) -> [u64; 5] {
        [self.seed, self.config_index, self.t_index, quad.tag(), shot]
    }
}

/// Spectral data of one (coefficients, configuration) pair, cached so that
/// expectation values at many times cost `O(dim^2)` each.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    energies: Vec<f64>,
    /// `Phi_+` in the eigenbasis.
    amp: CVector,
    /// Observables rotated into the eigenbasis.
    oc: CMatrix,
    os: CMatrix,
}

impl PreparedExperiment {
    pub fn new(mu: &CoefficientVector, cfg: &ControlConfig) -> Result<Self, SimError> {
        let eig = eigensystem(&build_total(mu, cfg))?;
        let (oc, os) = select_observables(cfg);
        let n = cfg.n();
        let basis = &eig.states;
        let rotate = |o: &SignedPauli| basis.adjoint() * o.matrix(n) * basis;
        let (_, _, phi_plus) = crate::model::product_states(cfg);
        Ok(Self {
            amp: basis.adjoint() * phi_plus,
            oc: rotate(&oc),
            os: rotate(&os),
            energies: eig.energies,
        })
    }

    /// Ground-state gap `E_1 - E_0` of the prepared generator.
    pub fn gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// `<Phi_+| e^{iHt} O e^{-iHt} |Phi_+>` for the selected observable.
    pub fn expectation(&self, t: f64, quad: Quadrature) -> f64 {
        let o = match quad {
            Quadrature::Cos => &self.oc,
            Quadrature::Sin => &self.os,
        };
        let v = CVector::from_iterator(
            self.amp.len(),
            self.amp
                .iter()
                .zip(&self.energies)
                .map(|(a, &e)| a * Complex64::from_polar(1.0, -e * t)),
        );
        let val = v.dotc(&(o * &v));
        debug_assert!(val.im.abs() < 1e-9, "observable expectation must be real");
        val.re
    }

    /// `Pr[b = 0]` including readout noise.
    pub fn prob_bit0(&self, t: f64, quad: Quadrature, noise: NoiseModel) -> f64 {
        noise.flip(0.5 * (1.0 + self.expectation(t, quad)))
    }

    /// Fraction of zero outcomes over a deterministic batch of shots.
    pub fn sample(
        &self,
        t: f64,
        quad: Quadrature,
        noise: NoiseModel,
        shots: u32,
        stream: ShotStream,
    ) -> Result<f64, SimError> {
        if shots == 0 {
            return Err(SimError::NoShots);
        }
        let p = self.prob_bit0(t, quad, noise);
        let zeros = (0..shots as u64)
            .filter(|&shot| rng::unit_f64(&stream.key(quad, shot)) < p)
            .count();
        Ok(zeros as f64 / shots as f64)
    }

    /// Individual outcome bits with their key paths (for raw dumps and
    /// reproducibility checks); `sample` is the aggregated form.
    pub fn sample_outcomes(
        &self,
        t: f64,
        quad: Quadrature,
        noise: NoiseModel,
        shots: u32,
        stream: ShotStream,
    ) -> Vec<ExperimentOutcome> {
        let p = self.prob_bit0(t, quad, noise);
        (0..shots as u64)
            .map(|shot| ExperimentOutcome {
                config_index: stream.config_index,
                t_index: stream.t_index,
                quadrature: quad,
                shot,
                bit: if rng::unit_f64(&stream.key(quad, shot)) < p { 0 } else { 1 },
            })
            .collect()
    }
}

/// Expectation of an arbitrary signed single-site observable after evolving
/// `Phi_+` for time `t` (uncached form).
pub fn evolved_expectation(
    mu: &CoefficientVector,
    cfg: &ControlConfig,
    t: f64,
    o: &SignedPauli,
) -> Result<f64, SimError> {
    let eig = eigensystem(&build_total(mu, cfg))?;
    let (_, _, phi_plus) = crate::model::product_states(cfg);
    let amp = eig.states.adjoint() * phi_plus;
    let o_eig = eig.states.adjoint() * o.matrix(cfg.n()) * &eig.states;
    let v = CVector::from_iterator(
        amp.len(),
        amp.iter()
            .zip(&eig.energies)
            .map(|(a, &e)| a * Complex64::from_polar(1.0, -e * t)),
    );
    let val = v.dotc(&(&o_eig * &v));
    Ok(val.re)
}

/// Noisy outcome probability for one quadrature (uncached form).
pub fn prob_bit0(
    mu: &CoefficientVector,
    cfg: &ControlConfig,
    t: f64,
    quad: Quadrature,
    noise: NoiseModel,
) -> Result<f64, SimError> {
    Ok(PreparedExperiment::new(mu, cfg)?.prob_bit0(t, quad, noise))
}

/// Unbiased quadrature value from a zero-outcome fraction.
pub fn quadrature_estimate(fraction_of_zeros: f64) -> f64 {
    2.0 * fraction_of_zeros - 1.0
}

/// Quadrature oracle backed by the sampling simulator. Each call consumes
/// `shots` experiments of duration `t` and advances the time index of the
/// RNG stream.
#[derive(Debug, Clone)]
pub struct SimOracle {
    prep: PreparedExperiment,
    noise: NoiseModel,
    shots: u32,
    seed: u64,
    config_index: u64,
    t_index: u64,
    time_used: f64,
    calls: u64,
    trace: Vec<f64>,
}

impl SimOracle {
    pub fn new(
        mu: &CoefficientVector,
        cfg: &ControlConfig,
        noise: NoiseModel,
        shots: u32,
        seed: u64,
        config_index: u64,
    ) -> Result<Self, SimError> {
        if shots == 0 {
            return Err(SimError::NoShots);
        }
        Ok(Self {
            prep: PreparedExperiment::new(mu, cfg)?,
            noise,
            shots,
            seed,
            config_index,
            t_index: 0,
            time_used: 0.0,
            calls: 0,
            trace: Vec::new(),
        })
    }

    pub fn shots(&self) -> u32 {
        self.shots
    }

    /// Exact gap of the prepared generator (ground truth for diagnostics).
    pub fn true_gap(&self) -> f64 {
        self.prep.gap()
    }

    /// Durations of every call so far, in call order.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }
}

impl QuadratureOracle for SimOracle {
    fn estimate(&mut self, t: f64, quad: Quadrature) -> f64 {
        let stream = ShotStream {
            seed: self.seed,
            config_index: self.config_index,
            t_index: self.t_index,
        };
        let fraction = self
            .prep
            .sample(t, quad, self.noise, self.shots, stream)
            .expect("shots > 0 enforced at construction");
        self.t_index += 1;
        self.time_used += t;
        self.calls += 1;
        self.trace.push(t);
        quadrature_estimate(fraction)
    }

    fn time_used(&self) -> f64 {
        self.time_used
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}
