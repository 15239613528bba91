//! Two-angle ground-state ansatz and the full landscape scan.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{self, ModelParams, N_QUBITS};
use crate::pauli::PauliSum;
use crate::statevector::{sample_expectation_keyed, Circuit, NoiseSpec, QuantumState};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzAngles {
    pub theta0: f64,
    pub theta1: f64,
}

impl AnsatzAngles {
    pub fn new(theta0: f64, theta1: f64) -> Self {
        Self { theta0, theta1 }
    }

    /// Both angles wrapped into `[0, 2π)`.
    pub fn canonical(self) -> Self {
        Self {
            theta0: self.theta0.rem_euclid(TWO_PI),
            theta1: self.theta1.rem_euclid(TWO_PI),
        }
    }

    /// Angles carried by the two RY gates, which rotate by twice the amplitude angle.
    pub fn gate_angles(self) -> (f64, f64) {
        (2.0 * self.theta0, 2.0 * self.theta1)
    }
}

/// `(1/√2)[sin θ0 (|↑↓,0> + |0,↑↓>) + cos θ0 (|↑,↓> − |↓,↑>)] ⊗ (cos θ1 |0_B> + sin θ1 |1_B>)`.
pub fn ansatz_state(a: AnsatzAngles) -> QuantumState {
    let (s0, c0) = a.theta0.sin_cos();
    let (s1, c1) = a.theta1.sin_cos();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << N_QUBITS];
    for (pattern, f) in [(0b1100usize, s0), (0b0011, s0), (0b1001, c0), (0b0110, -c0)] {
        amps[pattern << 1] = Complex64::new(FRAC_1_SQRT_2 * f * c1, 0.0);
        amps[(pattern << 1) | 1] = Complex64::new(FRAC_1_SQRT_2 * f * s1, 0.0);
    }
    QuantumState::from_amplitudes(N_QUBITS, amps).expect("five-qubit register")
}

/// Circuit preparing [`ansatz_state`] from `|00000>`. Only the two RY gates
/// on qubits 1 and 4 depend on the angles.
pub fn ansatz_circuit(a: AnsatzAngles) -> Circuit {
    let (g0, g1) = a.gate_angles();
    let mut c = Circuit::new(N_QUBITS);
    c.ry(1, g0)
        .ry(0, FRAC_PI_2)
        .x(1)
        .cz(1, 0)
        .x(1)
        .cnot(0, 2)
        .cnot(0, 1)
        .cnot(1, 3)
        .x(3)
        .x(0)
        .ry(4, g1);
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeGrid {
    pub theta0_points: usize,
    pub theta1_points: usize,
    pub theta0_range: [f64; 2],
    pub theta1_range: [f64; 2],
}

impl Default for LandscapeGrid {
    fn default() -> Self {
        Self {
            theta0_points: 64,
            theta1_points: 64,
            theta0_range: [0.0, TWO_PI],
            theta1_range: [0.0, TWO_PI],
        }
    }
}

impl LandscapeGrid {
    pub fn square(points: usize) -> Self {
        Self {
            theta0_points: points,
            theta1_points: points,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta0_points < 2 || self.theta1_points < 2 {
            return Err(invalid("landscape grids need at least 2 points per axis"));
        }
        for r in [self.theta0_range, self.theta1_range] {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(invalid(format!("empty angle range [{}, {}]", r[0], r[1])));
            }
        }
        Ok(())
    }

    /// Nodes `lo + k·(hi − lo)/points` for `k < points`; the upper end is
    /// excluded so a full period is sampled without repetition.
    pub fn theta0(&self, i: usize) -> f64 {
        node(self.theta0_range, self.theta0_points, i)
    }

    pub fn theta1(&self, j: usize) -> f64 {
        node(self.theta1_range, self.theta1_points, j)
    }

    pub fn step0(&self) -> f64 {
        (self.theta0_range[1] - self.theta0_range[0]) / self.theta0_points as f64
    }

    pub fn step1(&self) -> f64 {
        (self.theta1_range[1] - self.theta1_range[0]) / self.theta1_points as f64
    }

    fn is_periodic(range: [f64; 2]) -> bool {
        ((range[1] - range[0]) - TWO_PI).abs() < 1e-12
    }
}

fn node(range: [f64; 2], points: usize, k: usize) -> f64 {
    range[0] + (range[1] - range[0]) * k as f64 / points as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    #[default]
    Exact,
    Sampled,
}

/// Energies on a [`LandscapeGrid`], row-major with θ0 as the row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub grid: LandscapeGrid,
    pub energies: Vec<f64>,
}

impl Landscape {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.energies[i * self.grid.theta1_points + j]
    }

    /// `(i, j, energy)` of the lowest node; ties go to the first in row-major order.
    pub fn argmin(&self) -> (usize, usize, f64) {
        let (k, e) =
            self.energies
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |(bk, be), (k, &e)| if e < be { (k, e) } else { (bk, be) },
                );
        (k / self.grid.theta1_points, k % self.grid.theta1_points, e)
    }

    pub fn min(&self) -> f64 {
        self.argmin().2
    }
}

/// Energy of the prepared ansatz at one set of angles.
pub fn ansatz_energy(
    h: &PauliSum,
    a: AnsatzAngles,
    mode: EvalMode,
    noise: Option<&NoiseSpec>,
    key: &[u64],
) -> Result<f64> {
    let state = QuantumState::zero(N_QUBITS).apply(&ansatz_circuit(a))?;
    match mode {
        EvalMode::Exact => state.expectation(h),
        EvalMode::Sampled => {
            let noise = noise.copied().unwrap_or_default();
            sample_expectation_keyed(&state, h, &noise, key)
        }
    }
}

/// Energy at every grid node, evaluated in parallel and assembled by index.
pub fn energy_landscape(
    h: &PauliSum,
    g: &LandscapeGrid,
    mode: EvalMode,
    noise: Option<&NoiseSpec>,
) -> Result<Landscape> {
    g.validate()?;
    let energies = (0..g.theta0_points * g.theta1_points)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / g.theta1_points, k % g.theta1_points);
            ansatz_energy(
                h,
                AnsatzAngles::new(g.theta0(i), g.theta1(j)),
                mode,
                noise,
                &[i as u64, j as u64],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Landscape { grid: *g, energies })
}

/// Landscape of the device Hamiltonian for `p`.
pub fn model_landscape(
    p: &ModelParams,
    g: &LandscapeGrid,
    mode: EvalMode,
    noise: Option<&NoiseSpec>,
) -> Result<Landscape> {
    energy_landscape(&model::build_pauli_hamiltonian(p)?, g, mode, noise)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateEstimate {
    pub angles: AnsatzAngles,
    pub energy: f64,
    pub state: QuantumState,
    pub grid_angles: AnsatzAngles,
    pub grid_energy: f64,
    pub refined: bool,
}

/// Grid argmin followed by one separable quadratic fit around the best node.
/// The refined point is kept only if it lowers the energy.
pub fn find_ground_state(
    h: &PauliSum,
    g: &LandscapeGrid,
    mode: EvalMode,
    noise: Option<&NoiseSpec>,
) -> Result<(GroundStateEstimate, Landscape)> {
    let land = energy_landscape(h, g, mode, noise)?;
    let (i, j, e_grid) = land.argmin();
    let grid_angles = AnsatzAngles::new(g.theta0(i), g.theta1(j));

    let neighbour = |axis: usize, offset: isize| -> Option<f64> {
        let (points, periodic) = if axis == 0 {
            (g.theta0_points, LandscapeGrid::is_periodic(g.theta0_range))
        } else {
            (g.theta1_points, LandscapeGrid::is_periodic(g.theta1_range))
        };
        let centre = if axis == 0 { i } else { j } as isize;
        let mut k = centre + offset;
        if periodic {
            k = k.rem_euclid(points as isize);
        } else if k < 0 || k >= points as isize {
            return None;
        }
        let k = k as usize;
        Some(if axis == 0 {
            land.get(k, j)
        } else {
            land.get(i, k)
        })
    };
    let vertex = |axis: usize, step: f64| -> f64 {
        match (neighbour(axis, -1), neighbour(axis, 1)) {
            (Some(fm), Some(fp)) => {
                let curv = fm - 2.0 * e_grid + fp;
                if curv > 0.0 {
                    (0.5 * step * (fm - fp) / curv).clamp(-step, step)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    };
    let candidate = AnsatzAngles::new(
        grid_angles.theta0 + vertex(0, g.step0()),
        grid_angles.theta1 + vertex(1, g.step1()),
    );
    let e_ref = ansatz_energy(h, candidate, mode, noise, &[u64::MAX, 0])?;
    let (angles, energy, refined) = if e_ref < e_grid {
        (candidate, e_ref, true)
    } else {
        (grid_angles, e_grid, false)
    };
    let state = QuantumState::zero(N_QUBITS).apply(&ansatz_circuit(angles))?;
    Ok((
        GroundStateEstimate {
            angles,
            energy,
            state,
            grid_angles,
            grid_energy: e_grid,
            refined,
        },
        land,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use proptest::prelude::*;

    fn fidelity(a: &QuantumState, b: &QuantumState) -> f64 {
        a.overlap(b).unwrap().norm_sqr()
    }

    fn h_rep() -> PauliSum {
        model::build_pauli_hamiltonian(&ModelParams::representative()).unwrap()
    }

    #[test]
    fn named_states() {
        let s = ansatz_state(AnsatzAngles::new(FRAC_PI_2, 0.0));
        let a = s.amplitudes();
        assert!((a[0b11000].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[0b00110].re - FRAC_1_SQRT_2).abs() < 1e-15);
        let s = ansatz_state(AnsatzAngles::new(0.0, FRAC_PI_2));
        let a = s.amplitudes();
        assert!((a[0b10011].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[0b01101].re + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn closed_form_energies() {
        let h = h_rep();
        let e = |t0, t1| {
            ansatz_state(AnsatzAngles::new(t0, t1))
                .expectation(&h)
                .unwrap()
        };
        assert!(e(FRAC_PI_2, 0.0).abs() < 1e-12);
        assert!((e(0.0, 0.0) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_cosine_of_difference() {
        for (t, u, phi) in [(0.3, 1.4, 0.2), (2.0, -0.7, 4.0)] {
            let a = ansatz_state(AnsatzAngles::new(t, phi));
            let b = ansatz_state(AnsatzAngles::new(u, phi));
            assert!((a.overlap(&b).unwrap().re - (t - u).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn circuit_shape() {
        let c = ansatz_circuit(AnsatzAngles::new(0.3, 0.4));
        let ry: Vec<_> = c
            .gates
            .iter()
            .filter(|g| matches!(g, crate::statevector::Gate::Ry { .. }))
            .collect();
        assert_eq!(ry.len(), 3); // two parameterized plus the fixed π/2
    }

    #[test]
    fn circuit_periodicity() {
        let a = QuantumState::zero(5)
            .apply(&ansatz_circuit(AnsatzAngles::new(0.9, 2.0)))
            .unwrap();
        let b = QuantumState::zero(5)
            .apply(&ansatz_circuit(AnsatzAngles::new(0.9 + TWO_PI, 2.0)))
            .unwrap();
        assert!(fidelity(&a, &b) > 1.0 - 1e-12);
    }

    #[test]
    fn noninteracting_ground_state_is_in_family() {
        let p = ModelParams {
            u: 0.0,
            lambda: 0.0,
            mu: 0.0,
            ..ModelParams::representative()
        };
        let h = model::build_pauli_hamiltonian(&p).unwrap();
        let (est, _) =
            find_ground_state(&h, &LandscapeGrid::default(), EvalMode::Exact, None).unwrap();
        assert!((est.energy + 1.6).abs() < 1e-6, "{}", est.energy);
    }

    #[test]
    fn sampled_scan_is_deterministic() {
        let noise = NoiseSpec {
            shots: 200,
            readout_flip: 0.01,
            seed: 5,
        };
        let g = LandscapeGrid::square(4);
        let a = energy_landscape(&h_rep(), &g, EvalMode::Sampled, Some(&noise)).unwrap();
        let b = energy_landscape(&h_rep(), &g, EvalMode::Sampled, Some(&noise)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finer_grid_never_worse() {
        let coarse =
            energy_landscape(&h_rep(), &LandscapeGrid::square(16), EvalMode::Exact, None).unwrap();
        let fine =
            energy_landscape(&h_rep(), &LandscapeGrid::square(32), EvalMode::Exact, None).unwrap();
        assert!(fine.min() <= coarse.min() + 1e-12);
    }

    #[test]
    fn invalid_grid() {
        assert!(LandscapeGrid::square(1).validate().is_err());
        let g = LandscapeGrid {
            theta0_range: [1.0, 1.0],
            ..LandscapeGrid::default()
        };
        assert!(g.validate().is_err());
    }

    proptest! {
        #[test]
        fn circuit_prepares_ansatz(t0 in -7.0f64..7.0, t1 in -7.0f64..7.0) {
            let a = AnsatzAngles::new(t0, t1);
            let prepared = QuantumState::zero(5).apply(&ansatz_circuit(a)).unwrap();
            prop_assert!(fidelity(&prepared, &ansatz_state(a)) > 1.0 - 1e-10);
            prop_assert!((ansatz_state(a).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn landscape_is_periodic(t0 in 0.0f64..6.3, t1 in 0.0f64..6.3) {
            let h = h_rep();
            let e = |a, b| ansatz_energy(&h, AnsatzAngles::new(a, b), EvalMode::Exact, None, &[]).unwrap();
            let base = e(t0, t1);
            prop_assert!((base - e(t0 + TWO_PI, t1)).abs() < 1e-10);
            prop_assert!((base - e(t0, t1 + TWO_PI)).abs() < 1e-10);
        }
    }
}
