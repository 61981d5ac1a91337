//! Hamiltonians, control configurations, and exact spectral quantities.
//!
//! The unknown system is `H(mu) = sum_a mu_a sigma^a` over all non-identity
//! Pauli strings `a`. A control configuration `(k, s, beta, nu)` adds the
//! static field `-nu * H_ctrl` with
//!
//! `H_ctrl = sum_{j != k} (-1)^{s_j} sigma^{beta_j}_j
//!           + (1/2) (-1)^{s_k} sigma^{beta_k}_k`.
//!
//! For large `nu` the two lowest eigenstates of the total generator are close
//! to the product states `Phi_0` and `Phi_1` (the `s`-pattern eigenstate and
//! the same state with qubit `k` flipped), and the gap between them encodes a
//! signed sum of the `mu_a` compatible with `beta`.

use crate::pauli::{
    eigenstate1, is_hermitian, pauli1, pauli_matrix, CMatrix, CVector, PauliError, PauliString,
    SupportMask, MAX_QUBITS,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("register size must be 1..={MAX_QUBITS}, got {0}")]
    BadSize(usize),
    #[error("coefficient vector needs {expected} entries for n={n}, got {got}")]
    WrongLength { n: usize, expected: usize, got: usize },
    #[error("coefficient {value} at index {index} outside the solver cap [-2, 2]")]
    CoefficientOutOfRange { index: usize, value: f64 },
    #[error("identity term has no coefficient")]
    IdentityTerm,
    #[error("invalid control configuration: {0}")]
    BadConfig(String),
    #[error("matrix is not Hermitian within tolerance")]
    NotHermitian,
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// Real coefficients for every non-identity Pauli string on `n` qubits,
/// stored at `index(a) - 1`. Entries are capped to `[-2, 2]`.
///
/// Serialized as `{"n": 2, "coeffs": {"IX": 0.1, "ZZ": 0.3}}` with omitted
/// strings meaning zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    n: usize,
    values: Vec<f64>,
}

/// Hard cap on coefficient magnitude accepted by the solver.
pub const COEFF_CAP: f64 = 2.0;

impl CoefficientVector {
    pub fn zeros(n: usize) -> Result<Self, ModelError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(ModelError::BadSize(n));
        }
        let len = 4usize.pow(n as u32) - 1;
        Ok(Self { n, values: vec![0.0; len] })
    }

    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, ModelError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(ModelError::BadSize(n));
        }
        let expected = 4usize.pow(n as u32) - 1;
        if values.len() != expected {
            return Err(ModelError::WrongLength { n, expected, got: values.len() });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > COEFF_CAP)
        {
            return Err(ModelError::CoefficientOutOfRange { index, value });
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, a: &PauliString) -> Result<f64, ModelError> {
        Ok(self.values[self.slot(a)?])
    }

    pub fn set(&mut self, a: &PauliString, value: f64) -> Result<(), ModelError> {
        if !value.is_finite() || value.abs() > COEFF_CAP {
            return Err(ModelError::CoefficientOutOfRange { index: a.index(), value });
        }
        let slot = self.slot(a)?;
        self.values[slot] = value;
        Ok(())
    }

    fn slot(&self, a: &PauliString) -> Result<usize, ModelError> {
        if a.n() != self.n {
            return Err(PauliError::LengthMismatch(a.n(), self.n).into());
        }
        if a.is_identity() {
            return Err(ModelError::IdentityTerm);
        }
        Ok(a.index() - 1)
    }

    /// Non-zero terms as (string, coefficient) pairs in index order.
    pub fn terms(&self) -> Vec<(PauliString, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (PauliString::from_index(self.n, i + 1).unwrap(), v))
            .collect()
    }

    /// `sum_a |mu_a|`, an upper bound on the operator norm of `H(mu)`.
    pub fn sum_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "coefficient vectors on different registers");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_dvector(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(&self.values)
    }

    /// Rebuilds from a raw vector, clamping entries to the solver cap.
    pub fn from_dvector_clamped(n: usize, v: &nalgebra::DVector<f64>) -> Result<Self, ModelError> {
        let values = v.iter().map(|&x| x.clamp(-COEFF_CAP, COEFF_CAP)).collect();
        Self::new(n, values)
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    n: usize,
    coeffs: BTreeMap<String, f64>,
}

impl Serialize for CoefficientVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let coeffs = self
            .terms()
            .into_iter()
            .map(|(a, v)| (a.to_string(), v))
            .collect();
        CoeffJson { n: self.n, coeffs }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoefficientVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = CoeffJson::deserialize(deserializer)?;
        let mut out = CoefficientVector::zeros(raw.n).map_err(D::Error::custom)?;
        for (key, value) in raw.coeffs {
            let a: PauliString = key.parse().map_err(D::Error::custom)?;
            out.set(&a, value).map_err(D::Error::custom)?;
        }
        Ok(out)
    }
}

/// One control setting: distinguished qubit `k` (1-based), sign pattern `s`,
/// axis pattern `beta`, and field strength `nu >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub k: usize,
    pub s: Vec<u8>,
    pub beta: Vec<u8>,
    pub nu: f64,
}

impl ControlConfig {
    pub fn new(k: usize, s: Vec<u8>, beta: Vec<u8>, nu: f64) -> Result<Self, ModelError> {
        let n = s.len();
        if n == 0 || n > MAX_QUBITS {
            return Err(ModelError::BadSize(n));
        }
        if beta.len() != n {
            return Err(ModelError::BadConfig(format!(
                "s has {n} sites but beta has {}",
                beta.len()
            )));
        }
        if k == 0 || k > n {
            return Err(ModelError::BadConfig(format!("k={k} outside 1..={n}")));
        }
        if let Some(&bad) = s.iter().find(|&&b| b > 1) {
            return Err(ModelError::BadConfig(format!("sign bit {bad} not in {{0,1}}")));
        }
        if let Some(&bad) = beta.iter().find(|&&b| b == 0 || b > 3) {
            return Err(ModelError::BadConfig(format!("axis {bad} not in {{1,2,3}}")));
        }
        if !nu.is_finite() || nu < 0.0 {
            return Err(ModelError::BadConfig(format!("nu={nu} must be finite and >= 0")));
        }
        Ok(Self { k, s, beta, nu })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// 0-based site of the distinguished qubit.
    pub fn k0(&self) -> usize {
        self.k - 1
    }

    /// Sign pattern as a mask, optionally with qubit `k` flipped.
    pub fn s_mask(&self, flip_k: bool) -> SupportMask {
        let mut bits = 0u32;
        for (j, &b) in self.s.iter().enumerate() {
            if b == 1 {
                bits |= 1 << j;
            }
        }
        if flip_k {
            bits ^= 1 << self.k0();
        }
        SupportMask::from_bits(self.n(), bits)
    }

    /// Compact text forms used in reports: `s` as a bit string and `beta` as
    /// an axis word, qubit 1 first.
    pub fn s_bits(&self) -> String {
        self.s.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn beta_string(&self) -> String {
        self.beta
            .iter()
            .map(|&b| match b {
                1 => 'X',
                2 => 'Y',
                _ => 'Z',
            })
            .collect()
    }
}

/// Signed single-site Pauli observable (`sign * sigma^axis` on `site`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedPauli {
    pub sign: f64,
    pub axis: u8,
    /// 0-based site.
    pub site: usize,
}

impl SignedPauli {
    pub fn matrix(&self, n: usize) -> CMatrix {
        embed1(n, self.site, &pauli1(self.axis)).scale(self.sign)
    }
}

/// Embeds a single-site operator at `site` (0-based) into an `n`-site
/// register, qubit 1 leftmost.
pub fn embed1(n: usize, site: usize, m: &CMatrix) -> CMatrix {
    assert!(site < n, "site {site} out of range for n={n}");
    let eye = |q: usize| CMatrix::identity(1 << q, 1 << q);
    eye(site).kronecker(m).kronecker(&eye(n - site - 1))
}

/// Dense `H(mu) = sum_a mu_a sigma^a`.
pub fn build_hamiltonian(mu: &CoefficientVector) -> CMatrix {
    let dim = 1 << mu.n();
    let mut h = CMatrix::zeros(dim, dim);
    for (a, v) in mu.terms() {
        h += pauli_matrix(&a).scale(v);
    }
    h
}

/// Dense control operator `H_ctrl` for a configuration (without the `nu`
/// factor or the overall minus sign).
pub fn build_control(cfg: &ControlConfig) -> CMatrix {
    let n = cfg.n();
    let dim = 1 << n;
    let mut h = CMatrix::zeros(dim, dim);
    for j in 0..n {
        let mut w = if cfg.s[j] == 1 { -1.0 } else { 1.0 };
        if j == cfg.k0() {
            w *= 0.5;
        }
        h += embed1(n, j, &pauli1(cfg.beta[j])).scale(w);
    }
    h
}

/// Total generator `H(mu) - nu * H_ctrl`.
pub fn build_total(mu: &CoefficientVector, cfg: &ControlConfig) -> CMatrix {
    assert_eq!(mu.n(), cfg.n(), "coefficients and configuration disagree on n");
    build_hamiltonian(mu) - build_control(cfg).scale(cfg.nu)
}

/// Eigendecomposition of a Hermitian operator, energies ascending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `energies`.
    pub states: CMatrix,
}

impl EigenSystem {
    pub fn state(&self, i: usize) -> CVector {
        CVector::from_column_slice(self.states.column(i).as_slice())
    }
}

/// Hermiticity tolerance for [`eigensystem`] inputs.
const HERMITIAN_TOL: f64 = 1e-10;

pub fn eigensystem(h: &CMatrix) -> Result<EigenSystem, ModelError> {
    if !is_hermitian(h, HERMITIAN_TOL) {
        return Err(ModelError::NotHermitian);
    }
    // Symmetrize so the eigensolver sees an exactly Hermitian input.
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let states = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).clone_owned())
            .collect::<Vec<_>>(),
    );
    Ok(EigenSystem { energies, states })
}

/// Spectral norm of a Hermitian operator.
pub fn op_norm(h: &CMatrix) -> f64 {
    debug_assert!(is_hermitian(h, 1e-8));
    let sym = (h + h.adjoint()).scale(0.5);
    nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &e| m.max(e.abs()))
}

/// Spectral-gap levels below which a configuration is unusable.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Ground-state gap of the total generator plus diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapInfo {
    /// `E_1 - E_0 >= 0`.
    pub gap: f64,
    /// `E_2 - E_1`; infinite for two-level systems.
    pub guard: f64,
    /// True when either spacing falls below [`DEGENERACY_TOL`].
    pub degenerate: bool,
}

/// Exact gap `E_1 - E_0` of `H(mu) - nu H_ctrl` with a guard-gap diagnostic.
pub fn exact_gap(mu: &CoefficientVector, cfg: &ControlConfig) -> Result<GapInfo, ModelError> {
    let eig = eigensystem(&build_total(mu, cfg))?;
    let gap = eig.energies[1] - eig.energies[0];
    let guard = if eig.energies.len() > 2 {
        eig.energies[2] - eig.energies[1]
    } else {
        f64::INFINITY
    };
    let degenerate = gap < DEGENERACY_TOL || guard < DEGENERACY_TOL;
    if guard.is_finite() && guard < 0.1 * cfg.nu {
        log::warn!(
            "weak guard gap {guard:.3e} (nu = {}) for k={} s={} beta={}",
            cfg.nu,
            cfg.k,
            cfg.s_bits(),
            cfg.beta_string()
        );
    }
    Ok(GapInfo { gap, guard, degenerate })
}

/// Reference product states of a configuration: `Phi_0` (the `s`-pattern
/// eigenstate of the control), `Phi_1` (qubit `k` flipped), and their
/// symmetric superposition `Phi_+`.
pub fn product_states(cfg: &ControlConfig) -> (CVector, CVector, CVector) {
    let build = |flip_k: bool| -> CVector {
        let mut v: Option<CMatrix> = None;
        for j in 0..cfg.n() {
            let mut sign = cfg.s[j];
            if flip_k && j == cfg.k0() {
                sign ^= 1;
            }
            let site = eigenstate1(sign, cfg.beta[j]).unwrap();
            let site = CMatrix::from_column_slice(2, 1, site.as_slice());
            v = Some(match v {
                None => site,
                Some(prev) => prev.kronecker(&site),
            });
        }
        let m = v.unwrap();
        CVector::from_column_slice(m.as_slice())
    };
    let phi0 = build(false);
    let phi1 = build(true);
    let phi_plus = (&phi0 + &phi1).scale(std::f64::consts::FRAC_1_SQRT_2);
    (phi0, phi1, phi_plus)
}

/// Signed single-site observables `(O_c, O_s)` on qubit `k` satisfying
/// `O_c Phi_0 = Phi_1`, `O_c Phi_1 = Phi_0`, `O_s Phi_0 = -i Phi_1`,
/// `O_s Phi_1 = +i Phi_0`.
pub fn select_observables(cfg: &ControlConfig) -> (SignedPauli, SignedPauli) {
    let site = cfg.k0();
    let (bk, sk) = (cfg.beta[site], cfg.s[site]);
    // Six-entry lookup over (beta_k, s_k); checked against the defining
    // relations in the unit tests.
    let (c_axis, c_sign, s_axis, s_sign) = match (bk, sk) {
        (1, 0) => (3, 1.0, 2, 1.0),
        (1, 1) => (3, 1.0, 2, -1.0),
        (2, 0) => (3, 1.0, 1, -1.0),
        (2, 1) => (3, 1.0, 1, 1.0),
        (3, 0) => (1, 1.0, 2, -1.0),
        (3, 1) => (1, 1.0, 2, 1.0),
        _ => unreachable!("invalid (beta_k, s_k) = ({bk}, {sk})"),
    };
    (
        SignedPauli { sign: c_sign, axis: c_axis, site },
        SignedPauli { sign: s_sign, axis: s_axis, site },
    )
}

/// All `n * 2^n * 3^n` control configurations at a fixed field strength:
/// `k` outermost, then the sign pattern as an integer (qubit 1 most
/// significant), then the axis pattern in base 3.
pub fn enumerate_configs(n: usize, nu: f64) -> Result<Vec<ControlConfig>, ModelError> {
    if n == 0 || n > MAX_QUBITS {
        return Err(ModelError::BadSize(n));
    }
    let pow3 = 3usize.pow(n as u32);
    let mut out = Vec::with_capacity(n * (1 << n) * pow3);
    for k in 1..=n {
        for s_int in 0..(1usize << n) {
            let s: Vec<u8> = (0..n).map(|j| ((s_int >> (n - 1 - j)) & 1) as u8).collect();
            for b_int in 0..pow3 {
                let mut beta = vec![0u8; n];
                let mut rest = b_int;
                for j in (0..n).rev() {
                    beta[j] = (rest % 3) as u8 + 1;
                    rest /= 3;
                }
                out.push(ControlConfig::new(k, s.clone(), beta, nu)?);
            }
        }
    }
    Ok(out)
}

/// Exact expectation `<Phi_i | sigma^a | Phi_i>` for the reference product
/// states: zero unless `a` is compatible with the axis pattern, else a sign
/// fixed by the overlap of `a`'s support with the sign pattern.
pub fn product_state_expectation(
    cfg: &ControlConfig,
    a: &PauliString,
    flipped: bool,
) -> Result<f64, ModelError> {
    if !a.compatible_axes(&cfg.beta)? {
        return Ok(0.0);
    }
    let parity = cfg.s_mask(flipped).overlap_parity(&a.support());
    Ok(if parity { -1.0 } else { 1.0 })
}

/// A-priori bound on every gap reachable by the protocol:
/// `2 (sum_a |mu_a| + nu (n - 1/2))` from the triangle inequality on the
/// total generator.
pub fn a_priori_phase_bound(guess: &CoefficientVector, nu: f64) -> f64 {
    2.0 * (guess.sum_abs() + nu * (guess.n() as f64 - 0.5))
}

/// Convenience constructor from (string, value) pairs.
pub fn coefficients_from_pairs(
    n: usize,
    pairs: &[(&str, f64)],
) -> Result<CoefficientVector, ModelError> {
    let mut mu = CoefficientVector::zeros(n)?;
    for (text, value) in pairs {
        let a: PauliString = text.parse()?;
        mu.set(&a, *value)?;
    }
    Ok(mu)
}
