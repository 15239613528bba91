//! Time-domain Green's functions from exact, Trotterized and variational
//! (McLachlan) evolution.
//!
//! Product formulas apply their factors in the listed order: the first term
//! of an ordering acts on the state first.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ed;
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::{self, HamiltonianForm, ModelParams, Spin, N_QUBITS};
use crate::pauli::PauliSum;
use crate::statevector::QuantumState;

/// Regularization added to the McLachlan metric.
pub const MCLACHLAN_EPS: f64 = 1e-8;

/// Internal RK4 steps per output interval.
pub const RK4_SUBSTEPS: usize = 200;

/// Residuals above this abort the VHA integration.
pub const MAX_TANGENT_RESIDUAL: f64 = 1e-2;

/// `exp(-iHt)` through a cached eigen-decomposition.
#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    energies: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(h: &PauliSum) -> Result<Self> {
        Self::from_matrix(h.num_qubits(), &h.to_matrix()?)
    }

    pub fn from_matrix(n: usize, m: &DMatrix<Complex64>) -> Result<Self> {
        let (energies, vectors) = linalg::eigh(m)?;
        Ok(Self {
            n,
            energies,
            vectors,
        })
    }

    pub fn evolve(&self, s: &QuantumState, t: f64) -> Result<QuantumState> {
        if s.num_qubits() != self.n {
            return Err(invalid("state and propagator sizes differ"));
        }
        let coeffs = self.vectors.adjoint() * s.to_dvector();
        let phased = DVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(&self.energies)
                .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)),
        );
        QuantumState::from_dvector(self.n, &(&self.vectors * phased))
    }
}

/// `e^{-iHt}|s>` by dense diagonalization.
pub fn exact_evolve(s: &QuantumState, h: &PauliSum, t: f64) -> Result<QuantumState> {
    Propagator::new(h)?.evolve(s, t)
}

/// Check that `ordering` is a permutation of `0..n_terms`.
pub fn validate_ordering(ordering: &[usize], n_terms: usize) -> Result<()> {
    let mut seen = vec![false; n_terms];
    if ordering.len() != n_terms {
        return Err(invalid(format!(
            "ordering has {} entries, Hamiltonian has {n_terms} terms",
            ordering.len()
        )));
    }
    for &k in ordering {
        if k >= n_terms || seen[k] {
            return Err(invalid(format!(
                "ordering is not a permutation of 0..{n_terms}"
            )));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Parse a comma-separated permutation such as `"0,2,1,3"`.
pub fn parse_ordering(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("'{t}' in ordering is not an index")))
        })
        .collect()
}

pub fn identity_ordering(n_terms: usize) -> Vec<usize> {
    (0..n_terms).collect()
}

fn real_terms_in_order(h: &PauliSum, ordering: &[usize]) -> Result<Vec<(usize, usize, u32, f64)>> {
    validate_ordering(ordering, h.len())?;
    let terms = h.real_terms(1e-12)?;
    Ok(ordering
        .iter()
        .map(|&k| {
            let (x, z, ny) = terms[k].1.masks();
            (x, z, ny, terms[k].0)
        })
        .collect())
}

/// First-order product formula `[∏_m e^{-i c_m P_m t/n_t}]^{n_t}|s>`.
pub fn trotter_evolve(
    s: &QuantumState,
    h: &PauliSum,
    t: f64,
    n_t: usize,
    ordering: &[usize],
) -> Result<QuantumState> {
    if n_t == 0 {
        return Err(invalid("n_t must be at least 1"));
    }
    let terms = real_terms_in_order(h, ordering)?;
    let dt = t / n_t as f64;
    let mut out = s.clone();
    for _ in 0..n_t {
        for &(x, z, ny, c) in &terms {
            out.rotate_masks(x, z, ny, c * dt);
        }
    }
    Ok(out)
}

/// Trotter steps used at time `t` for `steps_per_unit_time`.
pub fn trotter_steps_at(t: f64, steps_per_unit_time: usize) -> usize {
    ((steps_per_unit_time as f64 * t - 1e-9).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_steps: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            n_steps: 200,
        }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) {
            return Err(invalid("t_max must be positive"));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps must be at least 1"));
        }
        Ok(())
    }

    /// `n_steps + 1` equally spaced times from 0 to `t_max`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps)
            .map(|k| self.t_max * k as f64 / self.n_steps as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    Exact,
    /// `n_t` Trotter steps per unit time.
    Trotter {
        n_t: usize,
    },
    /// `n_t` layers of the variational Hamiltonian ansatz.
    Vha {
        n_t: usize,
    },
}

/// Sampled retarded Green's function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub times: Vec<f64>,
    pub re_g: Vec<f64>,
    pub im_g: Vec<f64>,
}

impl TimeTrace {
    pub fn max_abs_im_deviation(&self, other: &TimeTrace) -> f64 {
        self.im_g
            .iter()
            .zip(&other.im_g)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Ground state, Hamiltonian and `φ± ` shared by all backends.
#[derive(Debug, Clone)]
pub struct TimeSetup {
    pub h: PauliSum,
    pub e0: f64,
    pub ground_state: QuantumState,
    /// `c†|GS>`, unnormalized.
    pub phi_plus: QuantumState,
    /// `c|GS>`, unnormalized.
    pub phi_minus: QuantumState,
}

impl TimeSetup {
    /// Uses the complete Pauli form and the exact ground state.
    pub fn new(p: &ModelParams) -> Result<Self> {
        let h = model::build_hamiltonian(p, HamiltonianForm::Complete)?;
        let es = ed::diagonalize(&h.to_matrix()?)?;
        let (e0, gs) = es.unique_ground_state(ed::DEGENERACY_TOL)?;
        let ground_state = QuantumState::from_dvector(N_QUBITS, &gs)?;
        let c = model::impurity_annihilation(Spin::Up);
        let phi_plus = ground_state.apply_sum(&c.adjoint())?;
        let phi_minus = ground_state.apply_sum(&c)?;
        Ok(Self {
            h,
            e0,
            ground_state,
            phi_plus,
            phi_minus,
        })
    }

    /// `G(t) = −i[e^{iE0 t}<φ+|U(t)|φ+> + e^{−iE0 t} conj(<φ−|U(t)|φ−>)]`
    /// given both forward-evolved states `U(t)|φ±>`.
    pub fn greens_from(
        &self,
        t: f64,
        plus_t: &QuantumState,
        minus_t: &QuantumState,
    ) -> Result<Complex64> {
        let gp = self.phi_plus.overlap(plus_t)? * Complex64::from_polar(1.0, self.e0 * t);
        let gm = self.phi_minus.overlap(minus_t)?.conj() * Complex64::from_polar(1.0, -self.e0 * t);
        Ok(Complex64::new(0.0, -1.0) * (gp + gm))
    }
}

/// Retarded impurity Green's function on a time grid.
pub fn greens_time(
    p: &ModelParams,
    g: &TimeGrid,
    backend: Backend,
    ordering: Option<&[usize]>,
) -> Result<TimeTrace> {
    g.validate()?;
    let setup = TimeSetup::new(p)?;
    let ord = ordering
        .map(<[usize]>::to_vec)
        .unwrap_or_else(|| identity_ordering(setup.h.len()));
    validate_ordering(&ord, setup.h.len())?;
    match backend {
        Backend::Vha { n_t } => Ok(vha_greens(&setup, g, n_t, &ord)?.trace),
        Backend::Exact | Backend::Trotter { .. } => {
            let prop = match backend {
                Backend::Exact => Some(Propagator::new(&setup.h)?),
                _ => None,
            };
            let times = g.times();
            let mut re_g = Vec::with_capacity(times.len());
            let mut im_g = Vec::with_capacity(times.len());
            for &t in &times {
                let (plus_t, minus_t) = match (&prop, backend) {
                    (Some(prop), _) => (
                        prop.evolve(&setup.phi_plus, t)?,
                        prop.evolve(&setup.phi_minus, t)?,
                    ),
                    (None, Backend::Trotter { n_t }) => {
                        if n_t == 0 {
                            return Err(invalid("n_t must be at least 1"));
                        }
                        let steps = trotter_steps_at(t, n_t);
                        (
                            trotter_evolve(&setup.phi_plus, &setup.h, t, steps, &ord)?,
                            trotter_evolve(&setup.phi_minus, &setup.h, t, steps, &ord)?,
                        )
                    }
                    _ => unreachable!(),
                };
                let gt = setup.greens_from(t, &plus_t, &minus_t)?;
                re_g.push(gt.re);
                im_g.push(gt.im);
            }
            Ok(TimeTrace { times, re_g, im_g })
        }
    }
}

/// Parameters of a VHA run over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VhaTrajectory {
    pub times: Vec<f64>,
    /// One row per time, `n_trotter · n_terms` angles per row.
    pub thetas: Vec<Vec<f64>>,
    pub ordering: Vec<usize>,
    pub n_trotter: usize,
    /// Largest `‖Aθ̇ − C‖` met during integration.
    pub max_residual: f64,
}

/// The ansatz `∏_layers ∏_m e^{iθ P_m}` as generator masks in application order.
#[derive(Debug, Clone)]
pub struct VhaAnsatz {
    generators: Vec<(usize, usize, u32)>,
    coeffs: Vec<f64>,
    masks_h: Vec<(usize, usize, u32, f64)>,
}

impl VhaAnsatz {
    pub fn new(h: &PauliSum, n_t: usize, ordering: &[usize]) -> Result<Self> {
        if n_t == 0 {
            return Err(invalid("VHA needs at least one layer"));
        }
        let layer = real_terms_in_order(h, ordering)?;
        let mut generators = Vec::with_capacity(n_t * layer.len());
        let mut coeffs = Vec::with_capacity(n_t * layer.len());
        for _ in 0..n_t {
            for &(x, z, ny, c) in &layer {
                generators.push((x, z, ny));
                coeffs.push(c);
            }
        }
        let masks_h = real_terms_in_order(h, &identity_ordering(h.len()))?;
        Ok(Self {
            generators,
            coeffs,
            masks_h,
        })
    }

    pub fn n_params(&self) -> usize {
        self.generators.len()
    }

    /// Coefficients of the Hamiltonian term behind each parameter.
    pub fn term_coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn state(&self, phi: &QuantumState, theta: &[f64]) -> QuantumState {
        let mut s = phi.clone();
        for (&(x, z, ny), &th) in self.generators.iter().zip(theta) {
            s.rotate_masks(x, z, ny, -th);
        }
        s
    }

    /// State and all tangent vectors `∂_k ψ`.
    pub fn state_and_tangents(
        &self,
        phi: &QuantumState,
        theta: &[f64],
    ) -> (QuantumState, Vec<QuantumState>) {
        let mut s = phi.clone();
        let mut tangents: Vec<QuantumState> = Vec::with_capacity(self.n_params());
        for (&(x, z, ny), &th) in self.generators.iter().zip(theta) {
            s.rotate_masks(x, z, ny, -th);
            for t in tangents.iter_mut() {
                t.rotate_masks(x, z, ny, -th);
            }
            tangents.push(times_i_pauli(&s, x, z, ny));
        }
        (s, tangents)
    }

    fn apply_h(&self, s: &QuantumState) -> Vec<Complex64> {
        let amps = s.amplitudes();
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for &(x, z, ny, c) in &self.masks_h {
            let base = y_phase(ny) * c;
            for (i, &a) in amps.iter().enumerate() {
                out[i ^ x] += a * base * parity(i & z);
            }
        }
        out
    }

    /// McLachlan flow `θ̇` at `theta` and the residual of the linear solve.
    pub fn flow(&self, phi: &QuantumState, theta: &[f64]) -> (DVector<f64>, f64) {
        let (psi, tangents) = self.state_and_tangents(phi, theta);
        let hpsi = self.apply_h(&psi);
        let k = tangents.len();
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut c = DVector::<f64>::zeros(k);
        for i in 0..k {
            let ti = tangents[i].amplitudes();
            for j in i..k {
                let v: f64 = ti
                    .iter()
                    .zip(tangents[j].amplitudes())
                    .map(|(x, y)| (x.conj() * y).re)
                    .sum();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
            c[i] = ti.iter().zip(&hpsi).map(|(x, y)| (x.conj() * y).im).sum();
        }
        linalg::solve_regularized(&a, &c, MCLACHLAN_EPS, 0)
    }
}

fn y_phase(ny: u32) -> Complex64 {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][(ny % 4) as usize]
}

fn parity(bits: usize) -> f64 {
    if bits.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn times_i_pauli(s: &QuantumState, x: usize, z: usize, ny: u32) -> QuantumState {
    let amps = s.amplitudes();
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    let base = Complex64::new(0.0, 1.0) * y_phase(ny);
    for (i, &a) in amps.iter().enumerate() {
        out[i ^ x] = a * base * parity(i & z);
    }
    QuantumState::from_amplitudes(s.num_qubits(), out).expect("same register")
}

/// Integrate the McLachlan equations from `θ = 0` with fixed-step RK4 and
/// return the trajectory plus the state at every grid time.
pub fn vha_evolve_state(
    phi: &QuantumState,
    h: &PauliSum,
    g: &TimeGrid,
    n_t: usize,
    ordering: &[usize],
) -> Result<(VhaTrajectory, Vec<QuantumState>)> {
    g.validate()?;
    let ansatz = VhaAnsatz::new(h, n_t, ordering)?;
    let (phi, norm2) = phi.normalized()?;
    let scale = Complex64::new(norm2.sqrt(), 0.0);
    let dt = g.t_max / (RK4_SUBSTEPS * g.n_steps) as f64;
    let mut theta = DVector::<f64>::zeros(ansatz.n_params());
    let mut max_residual: f64 = 0.0;
    let times = g.times();
    let mut thetas = vec![theta.iter().copied().collect::<Vec<_>>()];
    let mut states = vec![ansatz.state(&phi, theta.as_slice()).scaled(scale)];
    let mut t = 0.0;
    for _ in 0..g.n_steps {
        for _ in 0..RK4_SUBSTEPS {
            let mut eval = |th: &DVector<f64>, at: f64| -> Result<DVector<f64>> {
                let (d, r) = ansatz.flow(&phi, th.as_slice());
                if !(r <= MAX_TANGENT_RESIDUAL) {
                    return Err(Error::IllConditionedTangent {
                        time: at,
                        residual: r,
                    });
                }
                max_residual = max_residual.max(r);
                Ok(d)
            };
            let k1 = eval(&theta, t)?;
            let k2 = eval(&(&theta + &k1 * (dt / 2.0)), t + dt / 2.0)?;
            let k3 = eval(&(&theta + &k2 * (dt / 2.0)), t + dt / 2.0)?;
            let k4 = eval(&(&theta + &k3 * dt), t + dt)?;
            theta += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            t += dt;
        }
        thetas.push(theta.iter().copied().collect());
        states.push(ansatz.state(&phi, theta.as_slice()).scaled(scale));
    }
    Ok((
        VhaTrajectory {
            times,
            thetas,
            ordering: ordering.to_vec(),
            n_trotter: n_t,
            max_residual,
        },
        states,
    ))
}

#[derive(Debug, Clone)]
pub struct VhaResult {
    pub plus: VhaTrajectory,
    pub minus: VhaTrajectory,
    pub trace: TimeTrace,
}

/// VHA Green's function: one McLachlan trajectory each for `φ+` and `φ−`.
pub fn vha_greens(
    setup: &TimeSetup,
    g: &TimeGrid,
    n_t: usize,
    ordering: &[usize],
) -> Result<VhaResult> {
    let (plus, plus_states) = vha_evolve_state(&setup.phi_plus, &setup.h, g, n_t, ordering)?;
    let (minus, minus_states) = vha_evolve_state(&setup.phi_minus, &setup.h, g, n_t, ordering)?;
    let mut re_g = Vec::with_capacity(plus.times.len());
    let mut im_g = Vec::with_capacity(plus.times.len());
    for (k, &t) in plus.times.iter().enumerate() {
        let gt = setup.greens_from(t, &plus_states[k], &minus_states[k])?;
        re_g.push(gt.re);
        im_g.push(gt.im);
    }
    let times = plus.times.clone();
    Ok(VhaResult {
        plus,
        minus,
        trace: TimeTrace { times, re_g, im_g },
    })
}

/// VHA run for the model at `p`.
pub fn vha_evolve(
    p: &ModelParams,
    g: &TimeGrid,
    n_t: usize,
    ordering: Option<&[usize]>,
) -> Result<VhaResult> {
    let setup = TimeSetup::new(p)?;
    let ord = ordering
        .map(<[usize]>::to_vec)
        .unwrap_or_else(|| identity_ordering(setup.h.len()));
    vha_greens(&setup, g, n_t, &ord)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MuConvention;
    use crate::statevector::init_basis;

    fn fidelity(a: &QuantumState, b: &QuantumState) -> f64 {
        a.overlap(b).unwrap().norm_sqr() / (a.norm_sqr() * b.norm_sqr())
    }

    fn fig4() -> ModelParams {
        ModelParams {
            v: 1.0,
            ..ModelParams::representative()
        }
        .with_mu_convention(MuConvention::HalfFilling)
        .unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let h = PauliSum::from_real_pairs(&[(0.7, "XZ"), (0.2, "YI")]).unwrap();
        let s = init_basis(2, "01").unwrap();
        let out = exact_evolve(&s, &h, 0.0).unwrap();
        assert!((out.overlap(&s).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rabi_flip() {
        let omega = 1.3;
        let h = PauliSum::from_real_pairs(&[(omega / 2.0, "Z")]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plus = QuantumState::from_amplitudes(1, vec![Complex64::new(r, 0.0); 2]).unwrap();
        let minus =
            QuantumState::from_amplitudes(1, vec![Complex64::new(r, 0.0), Complex64::new(-r, 0.0)])
                .unwrap();
        let out = exact_evolve(&plus, &h, std::f64::consts::PI / omega).unwrap();
        assert!((fidelity(&out, &minus) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_is_conserved() {
        let p = fig4();
        let setup = TimeSetup::new(&p).unwrap();
        let (phi, _) = setup.phi_plus.normalized().unwrap();
        let e_start = phi.expectation(&setup.h).unwrap();
        let prop = Propagator::new(&setup.h).unwrap();
        for t in [0.5, 3.0, 9.0] {
            let e = prop.evolve(&phi, t).unwrap().expectation(&setup.h).unwrap();
            assert!((e - e_start).abs() < 1e-9);
        }
    }

    #[test]
    fn commuting_terms_trotter_exactly() {
        let h = PauliSum::from_real_pairs(&[(0.8, "ZZIII"), (-1.1, "IIIIZ")]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::new(0.0, 0.0); 32];
        amps[0] = Complex64::new(r, 0.0);
        amps[31] = Complex64::new(0.0, r);
        let s = QuantumState::from_amplitudes(5, amps).unwrap();
        for n_t in [1, 3] {
            let a = trotter_evolve(&s, &h, 2.7, n_t, &[1, 0]).unwrap();
            let b = exact_evolve(&s, &h, 2.7).unwrap();
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_trotter_step_deviates_at_t_two() {
        let setup = TimeSetup::new(
            &ModelParams::representative()
                .with_mu_convention(MuConvention::HalfFilling)
                .unwrap(),
        )
        .unwrap();
        let (phi, _) = setup.phi_plus.normalized().unwrap();
        let ord = identity_ordering(setup.h.len());
        let exact = exact_evolve(&phi, &setup.h, 2.0).unwrap();
        let one = trotter_evolve(&phi, &setup.h, 2.0, 1, &ord).unwrap();
        assert!(fidelity(&exact, &one) < 0.99);
        let many = trotter_evolve(&phi, &setup.h, 2.0, 400, &ord).unwrap();
        assert!(fidelity(&exact, &many) > 0.999);
    }

    #[test]
    fn ordering_validation() {
        assert!(validate_ordering(&[0, 1, 2], 3).is_ok());
        assert!(validate_ordering(&[0, 0, 2], 3).is_err());
        assert!(validate_ordering(&[0, 1], 3).is_err());
        assert_eq!(parse_ordering("2, 0,1").unwrap(), vec![2, 0, 1]);
        assert!(parse_ordering("a,1").is_err());
    }

    #[test]
    fn greens_at_zero_time() {
        let g = TimeGrid {
            t_max: 1.0,
            n_steps: 2,
        };
        let trace = greens_time(&fig4(), &g, Backend::Exact, None).unwrap();
        assert!((trace.im_g[0] + 1.0).abs() < 1e-10);
        assert!(trace.re_g[0].abs() < 1e-10);
    }

    #[test]
    fn trotter_steps_per_unit_time() {
        assert_eq!(trotter_steps_at(0.0, 4), 1);
        assert_eq!(trotter_steps_at(0.25, 4), 1);
        assert_eq!(trotter_steps_at(0.3, 4), 2);
        assert_eq!(trotter_steps_at(10.0, 10), 100);
    }

    #[test]
    fn single_term_flow_is_exact() {
        let c = 0.9;
        let h = PauliSum::from_real_pairs(&[(c, "XY")]).unwrap();
        let phi = init_basis(2, "00").unwrap();
        let g = TimeGrid {
            t_max: 2.0,
            n_steps: 4,
        };
        let (traj, states) = vha_evolve_state(&phi, &h, &g, 1, &[0]).unwrap();
        for (k, &t) in traj.times.iter().enumerate() {
            assert!((traj.thetas[k][0] + c * t).abs() < 1e-6);
            let exact = exact_evolve(&phi, &h, t).unwrap();
            for (x, y) in states[k].amplitudes().iter().zip(exact.amplitudes()) {
                assert!((x - y).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn vha_short_time_fidelity() {
        let setup = TimeSetup::new(
            &ModelParams::representative()
                .with_mu_convention(MuConvention::HalfFilling)
                .unwrap(),
        )
        .unwrap();
        let g = TimeGrid {
            t_max: 0.05,
            n_steps: 1,
        };
        let n = setup.h.len();
        let reversed: Vec<usize> = (0..n).rev().collect();
        let interleaved: Vec<usize> = (0..n).step_by(2).chain((1..n).step_by(2)).collect();
        for ord in [identity_ordering(n), reversed, interleaved] {
            let (traj, states) = vha_evolve_state(&setup.phi_plus, &setup.h, &g, 1, &ord).unwrap();
            let exact = exact_evolve(&setup.phi_plus, &setup.h, 0.05).unwrap();
            let f = fidelity(&states[1], &exact);
            assert!(f >= 1.0 - 1e-4, "{f} {}", traj.max_residual);
            assert!(traj.max_residual <= 1e-3, "{}", traj.max_residual);
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use crate::model::MuConvention;
    use proptest::prelude::*;

    fn setup() -> TimeSetup {
        let p = ModelParams::representative()
            .with_mu_convention(MuConvention::HalfU)
            .unwrap();
        TimeSetup::new(&p).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trotter_preserves_norm(
            t in 0.0f64..4.0,
            n_t in 1usize..6,
            keys in proptest::collection::vec(any::<u32>(), 32),
        ) {
            let s = setup();
            let n = s.h.len();
            let mut ord: Vec<usize> = (0..n).collect();
            ord.sort_by_key(|&k| keys[k % keys.len()].wrapping_mul(k as u32 + 1));
            let (phi, _) = s.phi_plus.normalized().unwrap();
            let out = trotter_evolve(&phi, &s.h, t, n_t, &ord).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn exact_evolution_composes(t1 in 0.0f64..3.0, t2 in 0.0f64..3.0) {
            let s = setup();
            let prop = Propagator::new(&s.h).unwrap();
            let (phi, _) = s.phi_minus.normalized().unwrap();
            let two = prop.evolve(&prop.evolve(&phi, t1).unwrap(), t2).unwrap();
            let one = prop.evolve(&phi, t1 + t2).unwrap();
            for (x, y) in two.amplitudes().iter().zip(one.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-10);
            }
        }
    }
}
