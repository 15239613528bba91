//! Dense statevector simulation.
//!
//! Conventions: `RY(θ) = exp(-iθY/2)`, `PauliExp(P, θ) = exp(-iθP)`, qubit 0
//! is the most significant bit of a basis index.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::rng::stream_rng;

const NORM_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;

/// Complex amplitude vector over `2^n` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    /// Wrap raw amplitudes; no normalization is imposed.
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return Err(invalid(format!(
                "{} amplitudes do not fit a {n}-qubit register",
                amps.len()
            )));
        }
        Ok(Self { n, amps })
    }

    pub fn from_dvector(n: usize, v: &DVector<Complex64>) -> Result<Self> {
        Self::from_amplitudes(n, v.iter().copied().collect())
    }

    /// The all-zero register `|0...0>`.
    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amps)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOL
    }

    /// Normalized copy together with the original squared norm.
    pub fn normalized(&self) -> Result<(QuantumState, f64)> {
        let n2 = self.norm_sqr();
        if n2 <= 1e-300 {
            return Err(Error::EmptySector("state has zero norm".into()));
        }
        Ok((self.scaled(Complex64::new(1.0 / n2.sqrt(), 0.0)), n2))
    }

    pub fn scaled(&self, factor: Complex64) -> QuantumState {
        QuantumState {
            n: self.n,
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: Complex64, other: &QuantumState) -> Result<QuantumState> {
        self.check_size(other)?;
        Ok(QuantumState {
            n: self.n,
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &QuantumState) -> Result<Complex64> {
        self.check_size(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `P|self>` for a single Pauli string.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<QuantumState> {
        self.check_string(p)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        let (x, z, ny) = p.masks();
        let base = y_phase(ny);
        for (i, &a) in self.amps.iter().enumerate() {
            out[i ^ x] = a * base * parity_sign(i & z);
        }
        Ok(QuantumState {
            n: self.n,
            amps: out,
        })
    }

    /// `H|self>`; the result is generally unnormalized.
    pub fn apply_sum(&self, h: &PauliSum) -> Result<QuantumState> {
        self.check_sum(h)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for t in h.terms() {
            let (x, z, ny) = t.string.masks();
            let base = t.coeff * y_phase(ny);
            for (i, &a) in self.amps.iter().enumerate() {
                out[i ^ x] += a * base * parity_sign(i & z);
            }
        }
        Ok(QuantumState {
            n: self.n,
            amps: out,
        })
    }

    /// `<self|H|other>`.
    pub fn matrix_element(&self, h: &PauliSum, other: &QuantumState) -> Result<Complex64> {
        self.overlap(&other.apply_sum(h)?)
    }

    /// Exact `<self|H|self>` for a Hermitian sum.
    pub fn expectation(&self, h: &PauliSum) -> Result<f64> {
        require_hermitian(h)?;
        self.check_sum(h)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for t in h.terms() {
            acc += t.coeff * self.pauli_expectation(&t.string);
        }
        Ok(acc.re)
    }

    /// `<self|P|self>` without the hermiticity check.
    pub fn pauli_expectation(&self, p: &PauliString) -> Complex64 {
        let (x, z, ny) = p.masks();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &a) in self.amps.iter().enumerate() {
            acc += self.amps[i ^ x].conj() * a * parity_sign(i & z);
        }
        acc * y_phase(ny)
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n)?;
        match gate {
            Gate::Ry { qubit, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                self.apply_real_1q(*qubit, [[c, -s], [s, c]]);
            }
            Gate::X { qubit } => {
                let bit = self.bit(*qubit);
                for i in 0..self.dim() {
                    if i & bit == 0 {
                        self.amps.swap(i, i | bit);
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let cb = self.bit(*control);
                let tb = self.bit(*target);
                for i in 0..self.dim() {
                    if i & cb != 0 && i & tb == 0 {
                        self.amps.swap(i, i | tb);
                    }
                }
            }
            Gate::PauliExp { string, angle } => self.rotate_pauli(string, *angle)?,
        }
        Ok(())
    }

    /// In-place `exp(-iθP)`.
    pub fn rotate_pauli(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        self.check_string(p)?;
        let (x, z, ny) = p.masks();
        self.rotate_masks(x, z, ny, theta);
        Ok(())
    }

    /// In-place `exp(-iθP)` with `P` given by its masks (see [`PauliString::masks`]).
    pub fn rotate_masks(&mut self, x: usize, z: usize, ny: u32, theta: f64) {
        let (s, c) = theta.sin_cos();
        let mi_s = Complex64::new(0.0, -s);
        let base = y_phase(ny);
        if x == 0 {
            // diagonal generator: phases only
            let plus = Complex64::new(c, -s);
            let minus = Complex64::new(c, s);
            for (i, a) in self.amps.iter_mut().enumerate() {
                *a *= if parity_sign(i & z) * base.re > 0.0 {
                    plus
                } else {
                    minus
                };
            }
            return;
        }
        for i in 0..self.amps.len() {
            let j = i ^ x;
            if i < j {
                let (ai, aj) = (self.amps[i], self.amps[j]);
                let ph_i = base * parity_sign(i & z);
                let ph_j = base * parity_sign(j & z);
                self.amps[i] = ai * c + mi_s * ph_j * aj;
                self.amps[j] = aj * c + mi_s * ph_i * ai;
            }
        }
    }

    /// Run a circuit on a copy of this state.
    pub fn apply(&self, circuit: &Circuit) -> Result<QuantumState> {
        if circuit.n != self.n {
            return Err(invalid(format!(
                "circuit acts on {} qubits, state has {}",
                circuit.n, self.n
            )));
        }
        let mut out = self.clone();
        for g in &circuit.gates {
            out.apply_gate(g)?;
        }
        Ok(out)
    }

    /// Outcome probabilities in the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn bit(&self, qubit: usize) -> usize {
        1usize << (self.n - 1 - qubit)
    }

    fn apply_real_1q(&mut self, qubit: usize, m: [[f64; 2]; 2]) {
        self.apply_1q(
            qubit,
            [
                [Complex64::new(m[0][0], 0.0), Complex64::new(m[0][1], 0.0)],
                [Complex64::new(m[1][0], 0.0), Complex64::new(m[1][1], 0.0)],
            ],
        );
    }

    fn apply_1q(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let bit = self.bit(qubit);
        for i in 0..self.dim() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn check_size(&self, other: &QuantumState) -> Result<()> {
        if self.n != other.n {
            return Err(invalid(format!(
                "qubit counts differ: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }

    fn check_string(&self, p: &PauliString) -> Result<()> {
        if p.len() != self.n {
            return Err(invalid(format!(
                "Pauli string {p} does not act on {} qubits",
                self.n
            )));
        }
        Ok(())
    }

    fn check_sum(&self, h: &PauliSum) -> Result<()> {
        if h.num_qubits() != self.n {
            return Err(invalid(format!(
                "Pauli sum acts on {} qubits, state has {}",
                h.num_qubits(),
                self.n
            )));
        }
        Ok(())
    }
}

fn y_phase(ny: u32) -> Complex64 {
    match ny % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn parity_sign(bits: usize) -> f64 {
    if bits.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn require_hermitian(h: &PauliSum) -> Result<()> {
    if h.terms().iter().all(|t| t.coeff.im.abs() <= HERMITIAN_TOL) || h.is_hermitian(HERMITIAN_TOL)
    {
        Ok(())
    } else {
        Err(invalid("expectation requires a Hermitian Pauli sum"))
    }
}

/// Computational basis state from a bit pattern such as `"10010"`.
pub fn init_basis(n: usize, pattern: &str) -> Result<QuantumState> {
    if pattern.len() != n {
        return Err(invalid(format!(
            "pattern '{pattern}' does not have {n} bits"
        )));
    }
    let mut index = 0usize;
    for c in pattern.chars() {
        index <<= 1;
        match c {
            '0' => {}
            '1' => index |= 1,
            other => return Err(invalid(format!("'{other}' is not a bit"))),
        }
    }
    Ok(QuantumState::basis(n, index))
}

pub fn apply(circuit: &Circuit, state: &QuantumState) -> Result<QuantumState> {
    state.apply(circuit)
}

pub fn expectation(state: &QuantumState, h: &PauliSum) -> Result<f64> {
    state.expectation(h)
}

pub fn overlap(a: &QuantumState, b: &QuantumState) -> Result<Complex64> {
    a.overlap(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Ry { qubit: usize, angle: f64 },
    X { qubit: usize },
    Cnot { control: usize, target: usize },
    PauliExp { string: PauliString, angle: f64 },
}

impl Gate {
    fn validate(&self, n: usize) -> Result<()> {
        let ok = match self {
            Gate::Ry { qubit, .. } | Gate::X { qubit } => *qubit < n,
            Gate::Cnot { control, target } => *control < n && *target < n && control != target,
            Gate::PauliExp { string, .. } => string.len() == n,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "gate {self:?} does not fit a {n}-qubit register"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn ry(&mut self, qubit: usize, angle: f64) -> &mut Self {
        self.gates.push(Gate::Ry { qubit, angle });
        self
    }

    pub fn x(&mut self, qubit: usize) -> &mut Self {
        self.gates.push(Gate::X { qubit });
        self
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> &mut Self {
        self.gates.push(Gate::Cnot { control, target });
        self
    }

    /// Controlled-Z from three Pauli exponentials (exact up to a global phase e^{-iπ/4}).
    pub fn cz(&mut self, a: usize, b: usize) -> &mut Self {
        let za = PauliString::single(self.n, a, Pauli::Z);
        let zb = PauliString::single(self.n, b, Pauli::Z);
        let (_, zz) = za.multiply(&zb).expect("same register");
        let quarter = std::f64::consts::FRAC_PI_4;
        self.gates.push(Gate::PauliExp {
            string: za,
            angle: quarter,
        });
        self.gates.push(Gate::PauliExp {
            string: zb,
            angle: quarter,
        });
        self.gates.push(Gate::PauliExp {
            string: zz,
            angle: -quarter,
        });
        self
    }

    /// Controlled-RY built from two RYs and two CNOTs.
    pub fn cry(&mut self, control: usize, target: usize, angle: f64) -> &mut Self {
        self.ry(target, angle / 2.0)
            .cnot(control, target)
            .ry(target, -angle / 2.0)
            .cnot(control, target)
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

/// Shot budget and readout noise for sampled estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub shots: u64,
    pub readout_flip: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            shots: 32000,
            readout_flip: 0.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        if !(0.0..=0.5).contains(&self.readout_flip) {
            return Err(invalid(format!(
                "readout_flip {} outside [0, 0.5]",
                self.readout_flip
            )));
        }
        Ok(())
    }
}

/// Shot-sampled `<s|H|s>` using stream key `[0]`.
pub fn sample_expectation(s: &QuantumState, h: &PauliSum, noise: &NoiseSpec) -> Result<f64> {
    sample_expectation_keyed(s, h, noise, &[0])
}

/// Shot-sampled expectation with an explicit stream key.
///
/// Each term is measured separately: the state is rotated into the term's
/// eigenbasis, the readout-flip channel is applied to the outcome
/// distribution, `shots` outcomes are drawn, and the parity average is
/// weighted by the coefficient. Identity terms contribute their coefficient
/// exactly.
pub fn sample_expectation_keyed(
    s: &QuantumState,
    h: &PauliSum,
    noise: &NoiseSpec,
    key: &[u64],
) -> Result<f64> {
    noise.validate()?;
    require_hermitian(h)?;
    s.check_sum(h)?;
    let mut total = 0.0;
    let mut path = key.to_vec();
    path.push(0);
    for (ti, t) in h.terms().iter().enumerate() {
        if t.string.is_identity() {
            total += t.coeff.re;
            continue;
        }
        let rotated = rotate_to_z_basis(s, &t.string);
        let mut probs = rotated.probabilities();
        for q in 0..s.n {
            apply_flip_channel(&mut probs, 1usize << (s.n - 1 - q), noise.readout_flip);
        }
        *path.last_mut().unwrap() = ti as u64;
        let mut rng = stream_rng(noise.seed, &path);
        let counts = multinomial(&mut rng, noise.shots, &probs)?;
        let (x, z, _) = t.string.masks();
        let support = x | z;
        let signed: i64 = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if (i & support).count_ones() % 2 == 0 {
                    c as i64
                } else {
                    -(c as i64)
                }
            })
            .sum();
        total += t.coeff.re * signed as f64 / noise.shots as f64;
    }
    Ok(total)
}

/// Sampled estimate of a probability `p` measured as the all-zero outcome of
/// an `n_qubits` register, with readout flips reducing the survival rate.
pub fn sample_probability(p: f64, n_qubits: usize, noise: &NoiseSpec, key: &[u64]) -> Result<f64> {
    noise.validate()?;
    let survive = p.clamp(0.0, 1.0) * (1.0 - noise.readout_flip).powi(n_qubits as i32);
    let mut rng = stream_rng(noise.seed, key);
    let k = Binomial::new(noise.shots, survive)
        .map_err(|e| invalid(format!("binomial: {e}")))?
        .sample(&mut rng);
    Ok(k as f64 / noise.shots as f64)
}

fn rotate_to_z_basis(s: &QuantumState, p: &PauliString) -> QuantumState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let mut out = s.clone();
    for (q, &op) in p.ops().iter().enumerate() {
        match op {
            Pauli::I | Pauli::Z => {}
            Pauli::X => out.apply_1q(q, [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]),
            // H·S†
            Pauli::Y => out.apply_1q(q, [[c(h, 0.0), c(0.0, -h)], [c(h, 0.0), c(0.0, h)]]),
        }
    }
    out
}

fn apply_flip_channel(probs: &mut [f64], bit: usize, f: f64) {
    if f == 0.0 {
        return;
    }
    for i in 0..probs.len() {
        if i & bit == 0 {
            let (p0, p1) = (probs[i], probs[i | bit]);
            probs[i] = (1.0 - f) * p0 + f * p1;
            probs[i | bit] = f * p0 + (1.0 - f) * p1;
        }
    }
}

fn multinomial<R: Rng>(rng: &mut R, shots: u64, probs: &[f64]) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q)
            .map_err(|e| invalid(format!("binomial: {e}")))?
            .sample(rng);
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    Ok(counts)
}
