//! Pauli strings on `n` qubits and their dense representations.
//!
//! A Pauli string is a word `a = (a_1, ..., a_n)` with symbols `0..=3`
//! standing for I, X, Y, Z. Strings are ordered by their base-4 integer value
//! with qubit 1 as the most significant digit; that integer is the canonical
//! index used everywhere coefficients are stored. Dense matrices are built as
//! Kronecker products with qubit 1 as the leftmost factor, so index and
//! matrix conventions agree.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex operator on the full register.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex state vector on the full register.
pub type CVector = DVector<Complex64>;

/// Largest register size the dense backend accepts (dimension 64).
pub const MAX_QUBITS: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PauliError {
    #[error("pauli string must have between 1 and {MAX_QUBITS} sites, got {0}")]
    BadLength(usize),
    #[error("pauli symbol must be 0..=3, got {0}")]
    InvalidSymbol(u8),
    #[error("invalid pauli character '{0}', expected one of I, X, Y, Z")]
    InvalidChar(char),
    #[error("length mismatch: {0} vs {1} sites")]
    LengthMismatch(usize, usize),
    #[error("index {index} out of range for {n} qubits (max {max})")]
    IndexOutOfRange { index: usize, n: usize, max: usize },
    #[error("identity axis has no eigenstate pair")]
    IdentityAxis,
}

/// Pauli word with symbols `0..=3` per site; site 0 is qubit 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(Vec<u8>);

impl PauliString {
    pub fn new(symbols: Vec<u8>) -> Result<Self, PauliError> {
        if symbols.is_empty() || symbols.len() > MAX_QUBITS {
            return Err(PauliError::BadLength(symbols.len()));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s > 3) {
            return Err(PauliError::InvalidSymbol(bad));
        }
        Ok(Self(symbols))
    }

    pub fn identity(n: usize) -> Result<Self, PauliError> {
        Self::new(vec![0; n])
    }

    /// Number of qubits.
    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    /// Symbol on site `j` (0-based).
    pub fn symbol(&self, j: usize) -> u8 {
        self.0[j]
    }

    /// Base-4 integer value, qubit 1 most significant. Identity maps to 0.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &s| acc * 4 + s as usize)
    }

    /// Inverse of [`index`](Self::index).
    pub fn from_index(n: usize, index: usize) -> Result<Self, PauliError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(PauliError::BadLength(n));
        }
        let max = 4usize.pow(n as u32) - 1;
        if index > max {
            return Err(PauliError::IndexOutOfRange { index, n, max });
        }
        let mut symbols = vec![0u8; n];
        let mut rest = index;
        for j in (0..n).rev() {
            symbols[j] = (rest % 4) as u8;
            rest /= 4;
        }
        Ok(Self(symbols))
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&s| s != 0).count()
    }

    /// Mask of non-identity sites.
    pub fn support(&self) -> SupportMask {
        let mut bits = 0u32;
        for (j, &s) in self.0.iter().enumerate() {
            if s != 0 {
                bits |= 1 << j;
            }
        }
        SupportMask { n: self.0.len(), bits }
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&s| s == 0)
    }

    /// Two strings are compatible when every site agrees or is identity on
    /// at least one side. Compatible strings commute sitewise.
    pub fn compatible(&self, other: &Self) -> Result<bool, PauliError> {
        if self.n() != other.n() {
            return Err(PauliError::LengthMismatch(self.n(), other.n()));
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .all(|(&a, &b)| a == b || a == 0 || b == 0))
    }

    /// Compatibility against a full-weight axis word given as a slice of
    /// symbols `1..=3` (one per site).
    pub fn compatible_axes(&self, axes: &[u8]) -> Result<bool, PauliError> {
        if self.n() != axes.len() {
            return Err(PauliError::LengthMismatch(self.n(), axes.len()));
        }
        Ok(self
            .0
            .iter()
            .zip(axes)
            .all(|(&a, &b)| a == 0 || a == b))
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &s in &self.0 {
            f.write_str(match s {
                0 => "I",
                1 => "X",
                2 => "Y",
                _ => "Z",
            })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PauliString {
    type Err = PauliError;

    fn from_str(s: &str) -> Result<Self, PauliError> {
        let symbols = s
            .chars()
            .map(|c| match c {
                'I' => Ok(0),
                'X' => Ok(1),
                'Y' => Ok(2),
                'Z' => Ok(3),
                other => Err(PauliError::InvalidChar(other)),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Self::new(symbols)
    }
}

/// Bit mask over sites, used for supports and sign patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportMask {
    n: usize,
    bits: u32,
}

impl SupportMask {
    pub fn from_bits(n: usize, bits: u32) -> Self {
        debug_assert!(n <= MAX_QUBITS && bits < (1 << n));
        Self { n, bits }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bit(&self, j: usize) -> bool {
        (self.bits >> j) & 1 == 1
    }

    pub fn weight(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Parity of the overlap with another mask: true when odd.
    pub fn overlap_parity(&self, other: &SupportMask) -> bool {
        (self.bits & other.bits).count_ones() % 2 == 1
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Single-site Pauli matrix for a symbol `0..=3`.
pub fn pauli1(symbol: u8) -> CMatrix {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    match symbol {
        0 => CMatrix::from_row_slice(2, 2, &[one, z, z, one]),
        1 => CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        2 => CMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        3 => CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
        other => panic!("invalid pauli symbol {other}"),
    }
}

/// Dense matrix of a Pauli string, qubit 1 as the leftmost Kronecker factor.
pub fn pauli_matrix(a: &PauliString) -> CMatrix {
    let mut m = pauli1(a.symbol(0));
    for j in 1..a.n() {
        m = m.kronecker(&pauli1(a.symbol(j)));
    }
    m
}

/// Single-qubit eigenstate `|s, beta>` of the axis operator `sigma^beta`:
/// eigenvalue `+1` for `s = 0` and `-1` for `s = 1`.
///
/// Conventions: `|0,3> = |0>`, `|1,3> = |1>`, `|0,1> = |+>`, `|1,1> = |->`,
/// `|0,2> = |+i>`, `|1,2> = |-i>`.
pub fn eigenstate1(sign: u8, axis: u8) -> Result<CVector, PauliError> {
    if axis == 0 {
        return Err(PauliError::IdentityAxis);
    }
    if axis > 3 {
        return Err(PauliError::InvalidSymbol(axis));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let v = match (sign, axis) {
        (0, 1) => vec![c(r, 0.0), c(r, 0.0)],
        (1, 1) => vec![c(r, 0.0), c(-r, 0.0)],
        (0, 2) => vec![c(r, 0.0), c(0.0, r)],
        (1, 2) => vec![c(r, 0.0), c(0.0, -r)],
        (0, 3) => vec![c(1.0, 0.0), c(0.0, 0.0)],
        (1, 3) => vec![c(0.0, 0.0), c(1.0, 0.0)],
        _ => return Err(PauliError::InvalidSymbol(sign)),
    };
    Ok(CVector::from_vec(v))
}

/// Hermiticity check within an absolute entrywise tolerance.
pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::str::FromStr;

    fn assert_close(m: &CMatrix, rows: usize, entries: &[Complex64]) {
        assert_eq!(m.nrows(), rows);
        let want = CMatrix::from_row_slice(rows, rows, entries);
        assert!((m - want).norm() < 1e-14, "got {m}");
    }

    #[test]
    fn single_site_matrices() {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        assert_close(&pauli1(2), 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]);
        assert_close(&pauli1(3), 2, &[one, z, z, -one]);
    }

    #[test]
    fn kron_order_puts_qubit_one_left() {
        // X tensor Z, written out by hand.
        let a = PauliString::from_str("XZ").unwrap();
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        #[rustfmt::skip]
        let want = [
            z, z, one, z,
            z, z, z, -one,
            one, z, z, z,
            z, -one, z, z,
        ];
        assert_close(&pauli_matrix(&a), 4, &want);
    }

    #[test]
    fn index_roundtrip_and_ordering() {
        let a = PauliString::from_str("XZ").unwrap();
        assert_eq!(a.index(), 7);
        assert_eq!(PauliString::from_index(2, 7).unwrap(), a);
        assert_eq!(PauliString::from_index(2, 0).unwrap().to_string(), "II");
        assert_eq!(PauliString::from_index(2, 15).unwrap().to_string(), "ZZ");
        assert_eq!(PauliString::from_index(1, 2).unwrap().to_string(), "Y");
        assert!(matches!(
            PauliString::from_index(2, 16),
            Err(PauliError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn weight_and_support() {
        let a = PauliString::from_str("XIZI").unwrap();
        assert_eq!(a.weight(), 2);
        let s = a.support();
        assert!(s.bit(0) && !s.bit(1) && s.bit(2) && !s.bit(3));
        assert_eq!(s.weight(), 2);
        assert!(PauliString::from_str("II").unwrap().is_identity());
    }

    #[test]
    fn compatibility_cases() {
        let xi = PauliString::from_str("XI").unwrap();
        let xz = PauliString::from_str("XZ").unwrap();
        let yz = PauliString::from_str("YZ").unwrap();
        assert!(xi.compatible(&xz).unwrap());
        assert!(!xz.compatible(&yz).unwrap());
        let x = PauliString::from_str("X").unwrap();
        assert_eq!(
            xi.compatible(&x),
            Err(PauliError::LengthMismatch(2, 1))
        );
        assert!(xz.compatible_axes(&[1, 3]).unwrap());
        assert!(!xz.compatible_axes(&[1, 2]).unwrap());
    }

    #[test]
    fn parse_display_roundtrip() {
        for text in ["I", "XYZ", "ZZIY"] {
            assert_eq!(PauliString::from_str(text).unwrap().to_string(), text);
        }
        assert_eq!(
            PauliString::from_str("XQ"),
            Err(PauliError::InvalidChar('Q'))
        );
        assert_eq!(PauliString::from_str(""), Err(PauliError::BadLength(0)));
    }

    #[test]
    fn eigenstates_satisfy_eigen_equations() {
        for axis in 1..=3u8 {
            let m = pauli1(axis);
            for sign in 0..=1u8 {
                let v = eigenstate1(sign, axis).unwrap();
                let want = if sign == 0 { 1.0 } else { -1.0 };
                let mv = &m * &v;
                assert!((mv - v.scale(want)).norm() < 1e-15, "axis {axis} sign {sign}");
            }
        }
        assert_eq!(eigenstate1(0, 0), Err(PauliError::IdentityAxis));
    }

    #[test]
    fn eigenstate_pairs_are_orthonormal() {
        for axis in 1..=3u8 {
            let p = eigenstate1(0, axis).unwrap();
            let m = eigenstate1(1, axis).unwrap();
            assert!((p.norm() - 1.0).abs() < 1e-15);
            assert!((m.norm() - 1.0).abs() < 1e-15);
            assert!(p.dotc(&m).norm() < 1e-15);
        }
    }

    /// Finds the sitewise product symbol of two Pauli words: the unique
    /// non-identity symbol when one side is identity, else the third axis.
    fn product_symbols(a: &PauliString, b: &PauliString) -> PauliString {
        let symbols = a
            .symbols()
            .iter()
            .zip(b.symbols())
            .map(|(&x, &y)| {
                if x == y {
                    0
                } else if x == 0 {
                    y
                } else if y == 0 {
                    x
                } else {
                    6 - x - y
                }
            })
            .collect();
        PauliString::new(symbols).unwrap()
    }

    proptest! {
        /// Group closure: the numeric product of two Pauli matrices equals a
        /// unit phase times the matrix of the symbolwise product.
        #[test]
        fn products_close_up_to_phase(n in 1usize..=3, ia in 0usize..64, ib in 0usize..64) {
            let max = 4usize.pow(n as u32);
            let a = PauliString::from_index(n, ia % max).unwrap();
            let b = PauliString::from_index(n, ib % max).unwrap();
            let prod = pauli_matrix(&a) * pauli_matrix(&b);
            let cmat = pauli_matrix(&product_symbols(&a, &b));
            // Phase from the normalized trace inner product.
            let dim = prod.nrows() as f64;
            let phase = (cmat.adjoint() * &prod).trace() / c(dim, 0.0);
            prop_assert!((phase.norm() - 1.0).abs() < 1e-12);
            prop_assert!((prod - cmat.scale(1.0) * phase).norm() < 1e-12);
        }

        /// Compatible strings commute as matrices.
        #[test]
        fn compatible_implies_commuting(ia in 0usize..16, ib in 0usize..16) {
            let a = PauliString::from_index(2, ia).unwrap();
            let b = PauliString::from_index(2, ib).unwrap();
            let ma = pauli_matrix(&a);
            let mb = pauli_matrix(&b);
            let comm = (&ma * &mb - &mb * &ma).norm();
            if a.compatible(&b).unwrap() {
                prop_assert!(comm < 1e-14);
            }
        }
    }

    #[test]
    fn all_pauli_matrices_hermitian_and_traceless() {
        for idx in 0..64 {
            let a = PauliString::from_index(3, idx).unwrap();
            let m = pauli_matrix(&a);
            assert!(is_hermitian(&m, 1e-15));
            let tr = m.trace();
            if a.is_identity() {
                assert!((tr - c(8.0, 0.0)).norm() < 1e-14);
            } else {
                assert!(tr.norm() < 1e-14);
            }
        }
    }
}
