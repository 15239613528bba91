//! Pauli strings and weighted Pauli sums.
//!
//! Qubit 0 is the leftmost tensor factor and maps to the most significant
//! bit of a computational-basis index, so `"XZXII"` reads left to right as
//! qubits 0..5.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Coefficients at or below this magnitude are dropped by [`PauliSum::simplify`].
pub const DEFAULT_DROP_TOL: f64 = 1e-12;

/// Largest register [`PauliSum::to_matrix`] builds by default.
pub const DEFAULT_MATRIX_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-qubit product `self · other = i^k · result`.
    fn mul(self, other: Pauli) -> (Phase, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (Phase::ONE, p),
            (a, b) if a == b => (Phase::ONE, I),
            (X, Y) => (Phase::I, Z),
            (Y, Z) => (Phase::I, X),
            (Z, X) => (Phase::I, Y),
            (Y, X) => (Phase::MINUS_I, Z),
            (Z, Y) => (Phase::MINUS_I, X),
            (X, Z) => (Phase::MINUS_I, Y),
            _ => unreachable!(),
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(invalid(format!("'{other}' is not a Pauli label"))),
        }
    }
}

/// An element of {1, i, -1, -i}, stored as the power of i.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn power_of_i(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// A tensor product of single-qubit Paulis over a fixed-size register.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliString {
    ops: Vec<Pauli>,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        Self { ops }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            ops: vec![Pauli::I; n],
        }
    }

    /// Identity everywhere except `op` on `qubit`.
    pub fn single(n: usize, qubit: usize, op: Pauli) -> Self {
        let mut ops = vec![Pauli::I; n];
        ops[qubit] = op;
        Self { ops }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|&p| p == Pauli::I)
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.ops.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Bit masks `(x, z, y_count)` with qubit `q` at bit `n - 1 - q`.
    ///
    /// The string acts on a basis index as `P|i> = i^y (-1)^{|i & z|} |i ^ x>`.
    pub fn masks(&self) -> (usize, usize, u32) {
        let n = self.ops.len();
        let mut x = 0usize;
        let mut z = 0usize;
        let mut ny = 0u32;
        for (q, &p) in self.ops.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    ny += 1;
                }
            }
        }
        (x, z, ny)
    }

    /// `a · b = phase · product`.
    pub fn multiply(&self, other: &PauliString) -> Result<(Phase, PauliString)> {
        if self.len() != other.len() {
            return Err(invalid(format!(
                "Pauli string lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let mut phase = Phase::ONE;
        let ops = self
            .ops
            .iter()
            .zip(&other.ops)
            .map(|(&a, &b)| {
                let (ph, p) = a.mul(b);
                phase = phase * ph;
                p
            })
            .collect();
        Ok((phase, PauliString { ops }))
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self
            .ops
            .iter()
            .zip(&other.ops)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        PauliSum::from_terms(self.len(), vec![PauliTerm::real(1.0, self.clone())])?.to_matrix()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.ops {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s.chars().map(Pauli::try_from).collect::<Result<Vec<_>>>()?;
        Ok(Self { ops })
    }
}

impl TryFrom<String> for PauliString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: Complex64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coeff: Complex64, string: PauliString) -> Self {
        Self { coeff, string }
    }

    pub fn real(coeff: f64, string: PauliString) -> Self {
        Self {
            coeff: Complex64::new(coeff, 0.0),
            string,
        }
    }
}

/// A weighted sum of Pauli strings over a common register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: Vec::new(),
        }
    }

    pub fn identity(n: usize, coeff: f64) -> Self {
        Self {
            n,
            terms: vec![PauliTerm::real(coeff, PauliString::identity(n))],
        }
    }

    pub fn from_terms(n: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.string.len() != n) {
            return Err(invalid(format!(
                "term {} has length {}, register has {n} qubits",
                t.string,
                t.string.len()
            )));
        }
        Ok(Self { n, terms })
    }

    /// Parse `(coeff, "STRING")` pairs with real coefficients.
    pub fn from_real_pairs(pairs: &[(f64, &str)]) -> Result<Self> {
        let terms = pairs
            .iter()
            .map(|&(c, s)| Ok(PauliTerm::real(c, s.parse()?)))
            .collect::<Result<Vec<_>>>()?;
        let n = terms.first().map(|t| t.string.len()).unwrap_or(0);
        Self::from_terms(n, terms)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, coeff: Complex64, string: PauliString) -> Result<()> {
        if string.len() != self.n {
            return Err(invalid(format!(
                "term {string} has length {}, register has {} qubits",
                string.len(),
                self.n
            )));
        }
        self.terms.push(PauliTerm::new(coeff, string));
        Ok(())
    }

    pub fn push_real(&mut self, coeff: f64, string: &str) -> Result<()> {
        self.push(Complex64::new(coeff, 0.0), string.parse()?)
    }

    /// Concatenate terms without merging.
    pub fn concat(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_size(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(PauliSum { n: self.n, terms })
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        Ok(self.concat(other)?.simplify(DEFAULT_DROP_TOL))
    }

    pub fn scale(&self, factor: Complex64) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm::new(t.coeff * factor, t.string.clone()))
                .collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> PauliSum {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Hermitian adjoint. Pauli strings are Hermitian, so only coefficients conjugate.
    pub fn adjoint(&self) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm::new(t.coeff.conj(), t.string.clone()))
                .collect(),
        }
    }

    /// Merge duplicate strings, drop `|coeff| <= tol`, sort lexicographically.
    pub fn simplify(&self, tol: f64) -> PauliSum {
        let mut merged: BTreeMap<&PauliString, Complex64> = BTreeMap::new();
        for t in &self.terms {
            *merged.entry(&t.string).or_default() += t.coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() > tol)
            .map(|(s, c)| PauliTerm::new(c, s.clone()))
            .collect();
        PauliSum { n: self.n, terms }
    }

    /// Distributed product `self · other`, simplified.
    pub fn product(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_size(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let (phase, s) = a.string.multiply(&b.string)?;
                terms.push(PauliTerm::new(a.coeff * b.coeff * phase.to_complex(), s));
            }
        }
        Ok(PauliSum { n: self.n, terms }.simplify(DEFAULT_DROP_TOL))
    }

    /// True when every merged coefficient is real within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.simplify(0.0)
            .terms
            .iter()
            .all(|t| t.coeff.im.abs() <= tol)
    }

    /// Coefficient of `string` after merging duplicates.
    pub fn coefficient(&self, string: &PauliString) -> Complex64 {
        self.terms
            .iter()
            .filter(|t| &t.string == string)
            .map(|t| t.coeff)
            .sum()
    }

    /// Real coefficients with their strings; fails if any coefficient has an
    /// imaginary part above `tol`.
    pub fn real_terms(&self, tol: f64) -> Result<Vec<(f64, PauliString)>> {
        self.terms
            .iter()
            .map(|t| {
                if t.coeff.im.abs() > tol {
                    Err(invalid(format!(
                        "term {} has complex coefficient {}",
                        t.string, t.coeff
                    )))
                } else {
                    Ok((t.coeff.re, t.string.clone()))
                }
            })
            .collect()
    }

    /// Sum of |coeff| over non-identity terms.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).sum()
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        self.to_matrix_capped(DEFAULT_MATRIX_CAP)
    }

    pub fn to_matrix_capped(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.n > cap {
            return Err(Error::Capacity {
                qubits: self.n,
                cap,
            });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for t in &self.terms {
            let (x, z, ny) = t.string.masks();
            let base = t.coeff * Phase(ny as u8 % 4).to_complex();
            for col in 0..dim {
                let sign = if (col & z).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                m[(col ^ x, col)] += base * sign;
            }
        }
        Ok(m)
    }

    fn check_size(&self, other: &PauliSum) -> Result<()> {
        if self.n != other.n {
            return Err(invalid(format!(
                "register sizes differ: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PauliSum {
    /// One `coeff * STRING` line per term; real coefficients print bare.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            if t.coeff.im == 0.0 {
                writeln!(f, "{} * {}", t.coeff.re, t.string)?;
            } else {
                writeln!(f, "({}{:+}i) * {}", t.coeff.re, t.coeff.im, t.string)?;
            }
        }
        Ok(())
    }
}
