//! The two-site Hubbard-Holstein impurity model and its qubit encodings.
//!
//! Fermion modes are ordered imp↑, imp↓, bath↑, bath↓; with one boson qubit
//! the register reads `(imp↑, imp↓, bath↑, bath↓, B)` left to right. In the
//! dense representation the four fermion occupation bits form the high part
//! of the basis index and the boson level the low part.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::pauli::{PauliString, PauliSum, PauliTerm, DEFAULT_DROP_TOL};

pub const N_MODES: usize = 4;
pub const IMP_UP: usize = 0;
pub const IMP_DN: usize = 1;
pub const BATH_UP: usize = 2;
pub const BATH_DN: usize = 3;

/// Qubits in the Pauli encoding with a single boson qubit.
pub const N_QUBITS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn impurity_mode(self) -> usize {
        match self {
            Spin::Up => IMP_UP,
            Spin::Down => IMP_DN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub mu: f64,
    pub omega0: f64,
    pub lambda: f64,
    pub n_boson_levels: usize,
}

impl ModelParams {
    /// U=4, V=0.8, ω0=5, λ=1.5 with one boson and μ left at U/2; call
    /// [`ModelParams::with_mu_convention`] to apply another convention.
    pub fn representative() -> Self {
        Self {
            u: 4.0,
            v: 0.8,
            mu: 2.0,
            omega0: 5.0,
            lambda: 1.5,
            n_boson_levels: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("U", self.u),
            ("V", self.v),
            ("mu", self.mu),
            ("omega0", self.omega0),
            ("lambda", self.lambda),
        ] {
            if !x.is_finite() {
                return Err(invalid(format!("{name} must be finite, got {x}")));
            }
        }
        if self.omega0 <= 0.0 {
            return Err(invalid(format!(
                "omega0 must be positive, got {}",
                self.omega0
            )));
        }
        if self.n_boson_levels < 2 {
            return Err(invalid(format!(
                "n_boson_levels must be at least 2, got {}",
                self.n_boson_levels
            )));
        }
        Ok(())
    }

    pub fn with_v(self, v: f64) -> Self {
        Self { v, ..self }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    /// Copy with μ recomputed from `conv`.
    pub fn with_mu_convention(self, conv: MuConvention) -> Result<Self> {
        Ok(self.with_mu(resolve_mu(&self, conv)?))
    }

    pub fn dim(&self) -> usize {
        16 * self.n_boson_levels
    }
}

/// How μ is fixed when the configuration does not give it explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MuConvention {
    /// ⟨n_imp↑ + n_imp↓⟩ = 1 in the two-electron ground state.
    #[default]
    HalfFilling,
    /// μ = U/2.
    HalfU,
    /// μ = U/2 − λ²/ω0.
    LangFirsov,
    /// μ = U/2 − 2λ²/ω0.
    LangFirsovDouble,
    /// Use the μ stored in the parameters unchanged.
    Explicit,
}

impl MuConvention {
    pub const ALL: [MuConvention; 4] = [
        MuConvention::HalfFilling,
        MuConvention::HalfU,
        MuConvention::LangFirsov,
        MuConvention::LangFirsovDouble,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MuConvention::HalfFilling => "half-filling",
            MuConvention::HalfU => "half-u",
            MuConvention::LangFirsov => "lang-firsov",
            MuConvention::LangFirsovDouble => "lang-firsov-double",
            MuConvention::Explicit => "explicit",
        }
    }
}

pub fn resolve_mu(p: &ModelParams, conv: MuConvention) -> Result<f64> {
    let shift = p.lambda * p.lambda / p.omega0;
    match conv {
        MuConvention::HalfU => Ok(p.u / 2.0),
        MuConvention::LangFirsov => Ok(p.u / 2.0 - shift),
        MuConvention::LangFirsovDouble => Ok(p.u / 2.0 - 2.0 * shift),
        MuConvention::Explicit => Ok(p.mu),
        MuConvention::HalfFilling => half_filling_mu(p),
    }
}

/// Impurity occupation ⟨n↑ + n↓⟩ in the lowest two-electron eigenstate.
pub fn two_electron_impurity_occupation(p: &ModelParams) -> Result<f64> {
    p.validate()?;
    let h = build_full_hamiltonian(p)?;
    let nb = p.n_boson_levels;
    let sector: Vec<usize> = (0..h.nrows())
        .filter(|&i| (i / nb).count_ones() == 2)
        .collect();
    let block = DMatrix::from_fn(sector.len(), sector.len(), |r, c| h[(sector[r], sector[c])]);
    let (_, vecs) = linalg::eigh(&block)?;
    let imp_bits = mode_bit(IMP_UP) | mode_bit(IMP_DN);
    Ok(sector
        .iter()
        .enumerate()
        .map(|(k, &i)| vecs[(k, 0)].norm_sqr() * ((i / nb) & imp_bits).count_ones() as f64)
        .sum())
}

fn half_filling_mu(p: &ModelParams) -> Result<f64> {
    let f = |mu: f64| two_electron_impurity_occupation(&p.with_mu(mu)).map(|n| n - 1.0);
    let width = 1.0 + p.u.abs() + p.v.abs() + 4.0 * p.lambda * p.lambda / p.omega0;
    let (mut lo, mut hi) = (p.u / 2.0 - width, p.u / 2.0 + width);
    let (mut flo, fhi) = (f(lo)?, f(hi)?);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::InternalConsistency(format!(
            "half-filling μ not bracketed in [{lo}, {hi}] (occupation offsets {flo}, {fhi})"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() < 1e-13 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bit of fermion mode `i` in a 4-bit occupation pattern (imp↑ most significant).
pub fn mode_bit(i: usize) -> usize {
    1usize << (N_MODES - 1 - i)
}

/// `c_i |pattern>` as `(sign, new pattern)`, or `None` if mode `i` is empty.
pub fn annihilate(pattern: usize, i: usize) -> Option<(f64, usize)> {
    let bit = mode_bit(i);
    if pattern & bit == 0 {
        return None;
    }
    let before = (0..i).filter(|&j| pattern & mode_bit(j) != 0).count();
    let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, pattern & !bit))
}

/// Dense `c_i ⊗ 1_boson` in the `16·nb` basis.
pub fn annihilation_matrix(i: usize, nb: usize) -> Result<DMatrix<Complex64>> {
    if i >= N_MODES {
        return Err(invalid(format!("mode {i} out of range 0..{N_MODES}")));
    }
    let dim = 16 * nb;
    let mut m = DMatrix::zeros(dim, dim);
    for pattern in 0..16 {
        if let Some((sign, out)) = annihilate(pattern, i) {
            for level in 0..nb {
                m[(out * nb + level, pattern * nb + level)] = Complex64::new(sign, 0.0);
            }
        }
    }
    Ok(m)
}

/// Dense Hamiltonian of the full model with the boson ladder truncated at
/// `n_boson_levels` states. All terms are kept.
pub fn build_full_hamiltonian(p: &ModelParams) -> Result<DMatrix<Complex64>> {
    p.validate()?;
    let nb = p.n_boson_levels;
    let dim = 16 * nb;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let occ = |pattern: usize, i: usize| if pattern & mode_bit(i) != 0 { 1.0 } else { 0.0 };
    for pattern in 0..16usize {
        let n_up = occ(pattern, IMP_UP);
        let n_dn = occ(pattern, IMP_DN);
        let n_imp = n_up + n_dn;
        for level in 0..nb {
            let idx = pattern * nb + level;
            h[(idx, idx)] += Complex64::new(
                p.u * n_up * n_dn - p.mu * n_imp + p.omega0 * level as f64,
                0.0,
            );
            if level + 1 < nb && n_imp != 0.0 {
                let amp = p.lambda * n_imp * ((level + 1) as f64).sqrt();
                h[(idx + 1, idx)] += Complex64::new(amp, 0.0);
                h[(idx, idx + 1)] += Complex64::new(amp, 0.0);
            }
        }
        // V (c†_imp c_bath + c†_bath c_imp) per spin
        for (imp, bath) in [(IMP_UP, BATH_UP), (IMP_DN, BATH_DN)] {
            for (from, to) in [(bath, imp), (imp, bath)] {
                if let Some((s1, mid)) = annihilate(pattern, from) {
                    if mid & mode_bit(to) == 0 {
                        let created = mid | mode_bit(to);
                        let (s2, _) = annihilate(created, to).expect("just created");
                        let amp = p.v * s1 * s2;
                        for level in 0..nb {
                            h[(created * nb + level, pattern * nb + level)] +=
                                Complex64::new(amp, 0.0);
                        }
                    }
                }
            }
        }
    }
    Ok(h)
}

/// Jordan-Wigner image `Z⊗…⊗Z⊗(X+iY)/2⊗I⊗…` of `c_i` on `n_modes` qubits.
pub fn jw_annihilation(i: usize, n_modes: usize) -> Result<PauliSum> {
    jw_annihilation_padded(i, n_modes, n_modes)
}

/// [`jw_annihilation`] embedded in a larger register (extra qubits on the right).
pub fn jw_annihilation_padded(i: usize, n_modes: usize, n_qubits: usize) -> Result<PauliSum> {
    if i >= n_modes {
        return Err(invalid(format!("mode {i} out of range 0..{n_modes}")));
    }
    if n_qubits < n_modes {
        return Err(invalid("register smaller than the number of fermion modes"));
    }
    let build = |op: char| -> Result<PauliString> {
        let s: String = (0..n_qubits)
            .map(|q| match q.cmp(&i) {
                std::cmp::Ordering::Less => 'Z',
                std::cmp::Ordering::Equal => op,
                std::cmp::Ordering::Greater => 'I',
            })
            .collect();
        s.parse()
    };
    PauliSum::from_terms(
        n_qubits,
        vec![
            PauliTerm::new(Complex64::new(0.5, 0.0), build('X')?),
            PauliTerm::new(Complex64::new(0.0, 0.5), build('Y')?),
        ],
    )
}

/// Impurity `c_σ` on the five-qubit register.
pub fn impurity_annihilation(spin: Spin) -> PauliSum {
    jw_annihilation_padded(spin.impurity_mode(), N_MODES, N_QUBITS).expect("valid mode")
}

/// Which Pauli form of the Hamiltonian a pipeline runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HamiltonianForm {
    /// The five-qubit device Hamiltonian with the single-Z and Z·X terms
    /// removed; the boson qubit is decoupled from the fermions.
    Device,
    /// The exact five-qubit image of the model.
    #[default]
    Complete,
}

const DEVICE_STRINGS: [&str; 8] = [
    "IIIII", "ZZIII", "XZXII", "YZYII", "IXZXI", "IYZYI", "IIIIZ", "IIIIX",
];

/// Device Hamiltonian:
/// `(U/4 − μ + ω0/2)·IIIII + (U/4)·ZZIII − (V/2)(XZXII + YZYII + IXZXI + IYZYI)
///  − (ω0/2)·IIIIZ + λ·IIIIX`.
pub fn build_pauli_hamiltonian(p: &ModelParams) -> Result<PauliSum> {
    p.validate()?;
    if p.n_boson_levels != 2 {
        return Err(Error::Unsupported(format!(
            "the five-qubit Pauli form needs n_boson_levels = 2, got {}",
            p.n_boson_levels
        )));
    }
    let hop = -p.v / 2.0;
    PauliSum::from_real_pairs(&[
        (p.u / 4.0 - p.mu + p.omega0 / 2.0, "IIIII"),
        (p.u / 4.0, "ZZIII"),
        (hop, "XZXII"),
        (hop, "YZYII"),
        (hop, "IXZXI"),
        (hop, "IYZYI"),
        (-p.omega0 / 2.0, "IIIIZ"),
        (p.lambda, "IIIIX"),
    ])
}

/// Exact Jordan-Wigner image of the model on five qubits, assembled from
/// [`jw_annihilation`] products. Terms shared with the device form come first
/// in the device order; the remaining terms follow lexicographically.
pub fn build_complete_pauli_hamiltonian(p: &ModelParams) -> Result<PauliSum> {
    p.validate()?;
    if p.n_boson_levels != 2 {
        return Err(Error::Unsupported(format!(
            "the five-qubit Pauli form needs n_boson_levels = 2, got {}",
            p.n_boson_levels
        )));
    }
    let n = N_QUBITS;
    let c: Vec<PauliSum> = (0..N_MODES)
        .map(|i| jw_annihilation_padded(i, N_MODES, n))
        .collect::<Result<_>>()?;
    let num = |i: usize| c[i].adjoint().product(&c[i]);
    let n_up = num(IMP_UP)?;
    let n_dn = num(IMP_DN)?;
    let n_imp = n_up.add(&n_dn)?;
    let mut h = n_up.product(&n_dn)?.scale_real(p.u);
    for (imp, bath) in [(IMP_UP, BATH_UP), (IMP_DN, BATH_DN)] {
        let forward = c[imp].adjoint().product(&c[bath])?;
        let backward = c[bath].adjoint().product(&c[imp])?;
        h = h.concat(&forward.add(&backward)?.scale_real(p.v))?;
    }
    h = h.concat(&n_imp.scale_real(-p.mu))?;
    let boson_number = PauliSum::from_real_pairs(&[(0.5, "IIIII"), (-0.5, "IIIIZ")])?;
    h = h.concat(&boson_number.scale_real(p.omega0))?;
    let displacement = PauliSum::from_real_pairs(&[(p.lambda, "IIIIX")])?;
    h = h.concat(&displacement.product(&n_imp)?)?;
    let h = h.simplify(DEFAULT_DROP_TOL);

    let mut ordered = Vec::with_capacity(h.len());
    let mut used = vec![false; h.len()];
    for s in DEVICE_STRINGS {
        let s: PauliString = s.parse()?;
        if let Some(k) = h.terms().iter().position(|t| t.string == s) {
            ordered.push(h.terms()[k].clone());
            used[k] = true;
        }
    }
    for (k, t) in h.terms().iter().enumerate() {
        if !used[k] {
            ordered.push(t.clone());
        }
    }
    PauliSum::from_terms(n, ordered)
}

pub fn build_hamiltonian(p: &ModelParams, form: HamiltonianForm) -> Result<PauliSum> {
    match form {
        HamiltonianForm::Device => build_pauli_hamiltonian(p),
        HamiltonianForm::Complete => build_complete_pauli_hamiltonian(p),
    }
}
