//! Krylov chains for the impurity Green's function.
//!
//! A chain is built either by direct recursion on state vectors or from
//! variationally prepared states: at every step a small circuit family is
//! scanned for the state that minimizes the three cost functions
//!
//! * `ε0 = (|<cand|H|χ_n>| / b_{n+1} − 1)²`
//! * `ε1 = |<cand|χ_n>|²`
//! * `ε2 = |<cand|χ_{n−1}>|²`
//!
//! all of which vanish at the exact next Krylov vector. The coefficients use
//! the three-term recursion `b_{n+1}² = <χ_n|H²|χ_n> − a_n² − b_n²`.
//!
//! Random draws in sampled mode are keyed by `[side, n, stage, ...]`, where
//! side is 0 (hole), 1 (particle) or 2 (ground state).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed;
use crate::error::{invalid, Error, Result};
use crate::greens::{assemble_particle_hole, poles_weights, KrylovChain, Side, Spectrum};
use crate::model::{self, Spin, N_QUBITS};
use crate::pauli::{PauliString, PauliSum};
use crate::statevector::{
    sample_expectation_keyed, sample_probability, Circuit, NoiseSpec, QuantumState,
};
use crate::time_evolution::{identity_ordering, trotter_evolve, Propagator};

const TWO_PI: f64 = 2.0 * PI;

/// Squared norms below this count as an empty sector.
pub const EMPTY_NORM: f64 = 1e-12;

/// Overlap² below which a scan node counts as a different minimum.
pub const ALTERNATE_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KrylovMode {
    /// Classical recursion on state vectors.
    Direct,
    /// Grid search with exact expectation values and matrix elements.
    #[default]
    VariationalExact,
    /// Grid search with shot-sampled estimators throughout.
    VariationalSampled,
}

impl KrylovMode {
    pub fn label(self) -> &'static str {
        match self {
            KrylovMode::Direct => "direct",
            KrylovMode::VariationalExact => "variational-exact",
            KrylovMode::VariationalSampled => "variational-sampled",
        }
    }

    pub fn default_b2_floor(self) -> f64 {
        match self {
            KrylovMode::Direct | KrylovMode::VariationalExact => 1e-10,
            KrylovMode::VariationalSampled => 1e-3,
        }
    }
}

/// Circuit family searched for Krylov states in the `N ± 1` sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StateFamily {
    /// `cos α |p0>(cos β0, sin β0) + sin α |p1>(cos β1, sin β1)`: spans the
    /// real four-dimensional sector.
    #[default]
    Conditional,
    /// Fermion and boson factorized, `β0 = β1`.
    Product,
}

/// Propagator used by the short-time matrix-element estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    Exact,
    /// One first-order Trotter step for every `t`.
    #[default]
    SingleTrotter,
}

/// How the hole (occupied) half of the spectrum is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HoleSide {
    /// Particle poles reflected to `−ω`.
    #[default]
    Mirror,
    /// A second chain started from `c|GS>`.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrylovSearchConfig {
    pub mode: KrylovMode,
    pub family: StateFamily,
    /// Scan nodes per angle over `[0, 2π)`.
    pub points_per_angle: usize,
    pub t_points: usize,
    pub t_range: [f64; 2],
    pub propagation: Propagation,
    /// Termination threshold on `b²`; the mode default when absent.
    pub b2_floor: Option<f64>,
    /// Nelder-Mead iterations that refine the scan minimum.
    pub refine_iterations: usize,
}

impl Default for KrylovSearchConfig {
    fn default() -> Self {
        Self {
            mode: KrylovMode::default(),
            family: StateFamily::default(),
            points_per_angle: 64,
            t_points: 10,
            t_range: [0.01, 0.3],
            propagation: Propagation::default(),
            b2_floor: None,
            refine_iterations: 400,
        }
    }
}

impl KrylovSearchConfig {
    pub fn with_mode(mode: KrylovMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn b2_floor(&self) -> f64 {
        self.b2_floor
            .unwrap_or_else(|| self.mode.default_b2_floor())
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_angle < 4 {
            return Err(invalid("points_per_angle must be at least 4"));
        }
        if self.t_points < 2 {
            return Err(invalid("t_points must be at least 2"));
        }
        let [t0, t1] = self.t_range;
        if !(t0 > 0.0 && t1 > t0 && t1.is_finite()) {
            return Err(invalid(format!(
                "t_range [{t0}, {t1}] must satisfy 0 < t0 < t1"
            )));
        }
        if !(self.b2_floor() > 0.0) {
            return Err(invalid("b2_floor must be positive"));
        }
        Ok(())
    }

    /// Equally spaced estimator times including both ends of `t_range`.
    pub fn times(&self) -> Vec<f64> {
        let [t0, t1] = self.t_range;
        (0..self.t_points)
            .map(|k| t0 + (t1 - t0) * k as f64 / (self.t_points - 1) as f64)
            .collect()
    }
}

fn side_key(side: Side) -> u64 {
    match side {
        Side::Hole => 0,
        Side::Particle => 1,
    }
}

/// `c|gs>` (hole) or `c†|gs>` (particle) for the impurity spin-up mode,
/// normalized, together with its squared norm.
pub fn chi0(gs: &QuantumState, side: Side) -> Result<(QuantumState, f64)> {
    if gs.num_qubits() != N_QUBITS {
        return Err(invalid(format!("chi0 needs a {N_QUBITS}-qubit state")));
    }
    let c = model::impurity_annihilation(Spin::Up);
    let op = match side {
        Side::Hole => c,
        Side::Particle => c.adjoint(),
    };
    let image = gs.apply_sum(&op)?;
    let n2 = image.norm_sqr();
    if n2 < EMPTY_NORM {
        return Err(Error::EmptySector(format!(
            "{side:?} image of the ground state vanishes"
        )));
    }
    Ok((image.scaled(Complex64::new(1.0 / n2.sqrt(), 0.0)), n2))
}

/// Multiply by the phase that makes the largest amplitude real and positive.
pub fn gauge_fixed(s: &QuantumState) -> QuantumState {
    let big = s
        .amplitudes()
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if big.norm() == 0.0 {
        return s.clone();
    }
    s.scaled(big.conj() / big.norm())
}

/// Exact ground energy and gauge-fixed ground state of `h`.
pub fn exact_ground_state(h: &PauliSum) -> Result<(f64, QuantumState)> {
    let es = ed::diagonalize(&h.to_matrix()?)?;
    let (e0, v) = es.unique_ground_state(ed::DEGENERACY_TOL)?;
    Ok((
        e0,
        gauge_fixed(&QuantumState::from_dvector(h.num_qubits(), &v)?),
    ))
}

/// `(ε0, ε1, ε2)` for a candidate next Krylov state.
pub fn cost_epsilons(
    candidate: &QuantumState,
    prev: &QuantumState,
    prev2: Option<&QuantumState>,
    h: &PauliSum,
    bn: f64,
) -> Result<[f64; 3]> {
    if !(bn > 0.0) {
        return Err(invalid(format!("b_n must be positive, got {bn}")));
    }
    let m = candidate.matrix_element(h, prev)?.norm();
    let e1 = candidate.overlap(prev)?.norm_sqr();
    let e2 = match prev2 {
        Some(p) => candidate.overlap(p)?.norm_sqr(),
        None => 0.0,
    };
    Ok([(m / bn - 1.0).powi(2), e1, e2])
}

/// Intercept of the least-squares line through `(x, y)`.
fn linear_intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    my - sxy / sxx * mx
}

fn evolved_states(
    b: &QuantumState,
    h: &PauliSum,
    cfg: &KrylovSearchConfig,
) -> Result<Vec<QuantumState>> {
    let times = cfg.times();
    match cfg.propagation {
        Propagation::Exact => {
            let prop = Propagator::new(h)?;
            times.iter().map(|&t| prop.evolve(b, t)).collect()
        }
        Propagation::SingleTrotter => {
            let ord = identity_ordering(h.len());
            times
                .iter()
                .map(|&t| trotter_evolve(b, h, t, 1, &ord))
                .collect()
        }
    }
}

/// Ancilla-free estimate of `|<a|H|b>|` for orthogonal `a`, `b`: the
/// amplitudes `f(t) = |<a|e^{−iHt}|b>|` are sampled on the configured time
/// grid and `f(t)/t` is extrapolated linearly to `t = 0`.
pub fn short_time_matrix_element(
    a: &QuantumState,
    b: &QuantumState,
    h: &PauliSum,
    cfg: &KrylovSearchConfig,
) -> Result<f64> {
    cfg.validate()?;
    let times = cfg.times();
    let ys = evolved_states(b, h, cfg)?
        .iter()
        .zip(&times)
        .map(|(u, &t)| Ok(a.overlap(u)?.norm() / t))
        .collect::<Result<Vec<_>>>()?;
    Ok(linear_intercept(&times, &ys).abs())
}

/// Shot-sampled version of [`short_time_matrix_element`]: each `f(t)²` is
/// measured as the all-zero probability of a compute-uncompute circuit.
pub fn short_time_matrix_element_sampled(
    a: &QuantumState,
    b: &QuantumState,
    h: &PauliSum,
    cfg: &KrylovSearchConfig,
    noise: &NoiseSpec,
    key: &[u64],
) -> Result<f64> {
    cfg.validate()?;
    let times = cfg.times();
    let mut path = key.to_vec();
    path.push(0);
    let mut ys = Vec::with_capacity(times.len());
    for (k, (u, &t)) in evolved_states(b, h, cfg)?.iter().zip(&times).enumerate() {
        *path.last_mut().unwrap() = k as u64;
        let p = sample_probability(a.overlap(u)?.norm_sqr(), a.num_qubits(), noise, &path)?;
        ys.push(p.sqrt() / t);
    }
    Ok(linear_intercept(&times, &ys).abs())
}

/// The circuit family for one side of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorFamily {
    pub side: Side,
    pub family: StateFamily,
}

impl SectorFamily {
    pub fn new(side: Side, family: StateFamily) -> Self {
        Self { side, family }
    }

    /// Fermion occupation patterns `p0`, `p1` (impurity ↑ is the high bit).
    pub fn patterns(&self) -> [usize; 2] {
        match self.side {
            Side::Hole => [0b0100, 0b0001],
            Side::Particle => [0b1110, 0b1011],
        }
    }

    /// Basis indices of `|p0,0_B>, |p0,1_B>, |p1,0_B>, |p1,1_B>`.
    pub fn indices(&self) -> [usize; 4] {
        let [p0, p1] = self.patterns();
        [p0 << 1, (p0 << 1) | 1, p1 << 1, (p1 << 1) | 1]
    }

    pub fn n_angles(&self) -> usize {
        match self.family {
            StateFamily::Conditional => 3,
            StateFamily::Product => 2,
        }
    }

    fn full_angles(&self, angles: &[f64]) -> (f64, f64, f64) {
        match self.family {
            StateFamily::Conditional => (angles[0], angles[1], angles[2]),
            StateFamily::Product => (angles[0], angles[1], angles[1]),
        }
    }

    /// Real amplitudes on [`SectorFamily::indices`].
    pub fn amplitudes(&self, angles: &[f64]) -> [f64; 4] {
        let (a, b0, b1) = self.full_angles(angles);
        let (sa, ca) = a.sin_cos();
        let (s0, c0) = b0.sin_cos();
        let (s1, c1) = b1.sin_cos();
        [ca * c0, ca * s0, sa * c1, sa * s1]
    }

    pub fn state(&self, angles: &[f64]) -> QuantumState {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << N_QUBITS];
        for (&i, &v) in self.indices().iter().zip(&self.amplitudes(angles)) {
            amps[i] = Complex64::new(v, 0.0);
        }
        QuantumState::from_amplitudes(N_QUBITS, amps).expect("five-qubit register")
    }

    /// Preparation circuit from `|00000>`.
    pub fn circuit(&self, angles: &[f64]) -> Circuit {
        let (a, b0, b1) = self.full_angles(angles);
        let mut c = Circuit::new(N_QUBITS);
        c.ry(3, 2.0 * a).cnot(3, 1).x(1).ry(4, 2.0 * b0);
        if self.family == StateFamily::Conditional {
            c.cry(3, 4, 2.0 * (b1 - b0));
        }
        if self.side == Side::Particle {
            c.x(0).x(2);
        }
        c
    }

    fn node_angles(&self, flat: usize, points: usize) -> Vec<f64> {
        let step = TWO_PI / points as f64;
        let mut rest = flat;
        let mut out = vec![0.0; self.n_angles()];
        for d in (0..self.n_angles()).rev() {
            out[d] = (rest % points) as f64 * step;
            rest /= points;
        }
        out
    }
}

fn restrict(s: &QuantumState, idx: &[usize; 4]) -> [Complex64; 4] {
    let a = s.amplitudes();
    [a[idx[0]], a[idx[1]], a[idx[2]], a[idx[3]]]
}

fn dot(c: &[f64; 4], v: &[Complex64; 4]) -> Complex64 {
    c.iter().zip(v).map(|(x, y)| y * *x).sum()
}

/// Everything the cost of one candidate depends on, restricted to the sector.
struct CostTargets {
    hprev: [Complex64; 4],
    prev: [Complex64; 4],
    prev2: Option<[Complex64; 4]>,
    bn: f64,
    times: Vec<f64>,
    evolved: Vec<[Complex64; 4]>,
}

impl CostTargets {
    fn exact(&self, c: &[f64; 4]) -> [f64; 3] {
        let m = dot(c, &self.hprev).norm();
        [
            (m / self.bn - 1.0).powi(2),
            dot(c, &self.prev).norm_sqr(),
            self.prev2.as_ref().map_or(0.0, |p| dot(c, p).norm_sqr()),
        ]
    }

    fn sampled(&self, c: &[f64; 4], noise: &NoiseSpec, key: &[u64]) -> Result<[f64; 3]> {
        let mut path = key.to_vec();
        path.extend([0, 0]);
        let last = path.len() - 1;
        let mut ys = Vec::with_capacity(self.times.len());
        for (k, (u, &t)) in self.evolved.iter().zip(&self.times).enumerate() {
            path[last - 1] = 0;
            path[last] = k as u64;
            let p = sample_probability(dot(c, u).norm_sqr(), N_QUBITS, noise, &path)?;
            ys.push(p.sqrt() / t);
        }
        let m = linear_intercept(&self.times, &ys).abs();
        path[last - 1] = 1;
        path[last] = 0;
        let e1 = sample_probability(dot(c, &self.prev).norm_sqr(), N_QUBITS, noise, &path)?;
        let e2 = match &self.prev2 {
            Some(p) => {
                path[last - 1] = 2;
                sample_probability(dot(c, p).norm_sqr(), N_QUBITS, noise, &path)?
            }
            None => 0.0,
        };
        Ok([(m / self.bn - 1.0).powi(2), e1, e2])
    }
}

/// Cost surface over the first two angles (minimum over the third, if any).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSurface {
    pub points: usize,
    /// Row-major by the first angle.
    pub values: Vec<f64>,
}

impl ScanSurface {
    pub fn angle(&self, k: usize) -> f64 {
        TWO_PI * k as f64 / self.points as f64
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.points + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternateMinimum {
    pub angles: Vec<f64>,
    pub cost: f64,
    /// Overlap² with the chosen minimum.
    pub overlap2: f64,
}

/// Record of one variational search (the state `χ_n` it produced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovStep {
    pub n: usize,
    pub angles: Vec<f64>,
    pub grid_cost: f64,
    pub cost: f64,
    pub epsilons: [f64; 3],
    pub alternate: Option<AlternateMinimum>,
    pub surface: ScanSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    DepthReached,
    /// `0 ≤ b² < b2_floor` at recursion step `step`.
    BelowFloor {
        step: usize,
        b2: f64,
    },
    /// Estimated `b² < 0` at recursion step `step`.
    NegativeB2 {
        step: usize,
        b2: f64,
    },
}

impl Termination {
    pub fn diagnostic(&self) -> String {
        match self {
            Termination::DepthReached => "requested depth reached".into(),
            Termination::BelowFloor { step, b2 } => {
                format!("b_{step}^2 = {b2:.3e} below the floor; chain stopped")
            }
            Termination::NegativeB2 { step, b2 } => {
                format!("b_{step}^2 = {b2:.3e} is negative; chain stopped")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct KvqaRun {
    pub side: Side,
    pub mode: KrylovMode,
    pub chain: KrylovChain,
    pub termination: Termination,
    pub steps: Vec<KrylovStep>,
    /// `χ_0 .. χ_d`.
    pub states: Vec<QuantumState>,
}

impl KvqaRun {
    pub fn achieved_depth(&self) -> usize {
        self.chain.depth()
    }
}

struct Estimator<'a> {
    mode: KrylovMode,
    noise: NoiseSpec,
    h: &'a PauliSum,
    h2: PauliSum,
}

impl<'a> Estimator<'a> {
    fn new(h: &'a PauliSum, mode: KrylovMode, noise: Option<&NoiseSpec>) -> Result<Self> {
        let noise = noise.copied().unwrap_or_default();
        noise.validate()?;
        Ok(Self {
            mode,
            noise,
            h,
            h2: h.product(h)?,
        })
    }

    fn value(&self, s: &QuantumState, op: &PauliSum, key: &[u64]) -> Result<f64> {
        match self.mode {
            KrylovMode::VariationalSampled => sample_expectation_keyed(s, op, &self.noise, key),
            _ => s.expectation(op),
        }
    }
}

/// Krylov chain of `h` started from the normalized `start`.
///
/// `prefactor` and `e0` are stored in the chain unchanged. Variational modes
/// need the five-qubit model register with `start` in the sector of `side`.
#[allow(clippy::too_many_arguments)]
pub fn krylov_chain_from_state(
    start: &QuantumState,
    h: &PauliSum,
    side: Side,
    prefactor: f64,
    e0: f64,
    depth: usize,
    cfg: &KrylovSearchConfig,
    noise: Option<&NoiseSpec>,
) -> Result<KvqaRun> {
    cfg.validate()?;
    if !start.is_normalized() {
        return Err(invalid("Krylov start state must be normalized"));
    }
    if cfg.mode != KrylovMode::Direct && h.num_qubits() != N_QUBITS {
        return Err(Error::Unsupported(format!(
            "variational Krylov search needs the {N_QUBITS}-qubit model register"
        )));
    }
    let est = Estimator::new(h, cfg.mode, noise)?;
    let floor = cfg.b2_floor();
    let kind = side_key(side);
    let mut states = vec![start.clone()];
    let mut a = Vec::new();
    let mut b2: Vec<f64> = Vec::new();
    let mut steps = Vec::new();
    let mut termination = Termination::DepthReached;
    loop {
        let n = a.len();
        let chi = &states[n];
        let an = est.value(chi, h, &[kind, n as u64, 1])?;
        a.push(an);
        if n == depth {
            break;
        }
        let h2 = est.value(chi, &est.h2, &[kind, n as u64, 2])?;
        let bn2 = h2 - an * an - b2.last().copied().unwrap_or(0.0);
        if bn2 < 0.0 {
            if cfg.mode == KrylovMode::Direct && bn2 < -floor {
                return Err(Error::InternalConsistency(format!(
                    "b_{}^2 = {bn2:.3e} in direct recursion",
                    n + 1
                )));
            }
            termination = if cfg.mode == KrylovMode::Direct {
                Termination::BelowFloor {
                    step: n + 1,
                    b2: bn2,
                }
            } else {
                Termination::NegativeB2 {
                    step: n + 1,
                    b2: bn2,
                }
            };
            break;
        }
        if bn2 < floor {
            termination = Termination::BelowFloor {
                step: n + 1,
                b2: bn2,
            };
            break;
        }
        let bn = bn2.sqrt();
        let next = match cfg.mode {
            KrylovMode::Direct => direct_next(&states, h, an, b2.last().map(|b| b.sqrt()))?,
            _ => {
                let prev2 = if n > 0 { Some(&states[n - 1]) } else { None };
                let (state, step) = variational_next(
                    &est,
                    SectorFamily::new(side, cfg.family),
                    chi,
                    prev2,
                    bn,
                    cfg,
                    &[kind, (n + 1) as u64],
                )?;
                steps.push(step);
                state
            }
        };
        b2.push(bn2);
        states.push(next);
    }
    states.truncate(a.len());
    let chain = KrylovChain::new(a, b2, prefactor, e0, side)?;
    Ok(KvqaRun {
        side,
        mode: cfg.mode,
        chain,
        termination,
        steps,
        states,
    })
}

fn direct_next(
    states: &[QuantumState],
    h: &PauliSum,
    an: f64,
    bn: Option<f64>,
) -> Result<QuantumState> {
    let chi = states.last().unwrap();
    let mut w = chi.apply_sum(h)?.axpy(Complex64::new(-an, 0.0), chi)?;
    if let (Some(b), true) = (bn, states.len() > 1) {
        w = w.axpy(Complex64::new(-b, 0.0), &states[states.len() - 2])?;
    }
    for _ in 0..2 {
        for u in states {
            let proj = u.overlap(&w)?;
            w = w.axpy(-proj, u)?;
        }
    }
    let (w, _) = w.normalized()?;
    Ok(w)
}

fn variational_next(
    est: &Estimator,
    fam: SectorFamily,
    prev: &QuantumState,
    prev2: Option<&QuantumState>,
    bn: f64,
    cfg: &KrylovSearchConfig,
    key: &[u64],
) -> Result<(QuantumState, KrylovStep)> {
    let idx = fam.indices();
    let sampled = est.mode == KrylovMode::VariationalSampled;
    let (times, evolved) = if sampled {
        let ev = evolved_states(prev, est.h, cfg)?;
        (cfg.times(), ev.iter().map(|u| restrict(u, &idx)).collect())
    } else {
        (Vec::new(), Vec::new())
    };
    let targets = CostTargets {
        hprev: restrict(&prev.apply_sum(est.h)?, &idx),
        prev: restrict(prev, &idx),
        prev2: prev2.map(|p| restrict(p, &idx)),
        bn,
        times,
        evolved,
    };
    let eval = |angles: &[f64], path: &[u64]| -> Result<[f64; 3]> {
        let c = fam.amplitudes(angles);
        if sampled {
            targets.sampled(&c, &est.noise, path)
        } else {
            Ok(targets.exact(&c))
        }
    };

    let points = cfg.points_per_angle;
    let n_nodes = points.pow(fam.n_angles() as u32);
    let per_row = n_nodes / points;
    let mut scan_key = key.to_vec();
    scan_key.extend([3, 0]);
    let costs: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut path = scan_key.clone();
            (i * per_row..(i + 1) * per_row)
                .map(|flat| {
                    *path.last_mut().unwrap() = flat as u64;
                    Ok(eval(&fam.node_angles(flat, points), &path)?.iter().sum())
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();

    let best =
        costs.iter().enumerate().fold(
            (0, f64::INFINITY),
            |(bk, bc), (k, &c)| if c < bc { (k, c) } else { (bk, bc) },
        );
    let grid_angles = fam.node_angles(best.0, points);
    let chosen_amps = fam.amplitudes(&grid_angles);
    let alternate = costs
        .par_iter()
        .enumerate()
        .filter_map(|(k, &c)| {
            let amps = fam.amplitudes(&fam.node_angles(k, points));
            let ov: f64 = amps.iter().zip(&chosen_amps).map(|(x, y)| x * y).sum();
            (ov * ov < ALTERNATE_OVERLAP).then_some((k, c, ov * ov))
        })
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
        .map(|(k, cost, overlap2)| AlternateMinimum {
            angles: fam.node_angles(k, points),
            cost,
            overlap2,
        });

    let surface = ScanSurface {
        points,
        values: match fam.family {
            StateFamily::Product => costs.clone(),
            StateFamily::Conditional => costs
                .chunks(points)
                .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
                .collect(),
        },
    };

    let mut counter = 0u64;
    let mut refine_key = key.to_vec();
    refine_key.extend([4, 0]);
    let (angles, cost) = nelder_mead(
        &grid_angles,
        best.1,
        TWO_PI / points as f64,
        cfg.refine_iterations,
        |x| {
            counter += 1;
            *refine_key.last_mut().unwrap() = counter;
            Ok(eval(x, &refine_key)?.iter().sum())
        },
    )?;
    let angles: Vec<f64> = angles.iter().map(|a| a.rem_euclid(TWO_PI)).collect();
    let state = QuantumState::zero(N_QUBITS).apply(&fam.circuit(&angles))?;
    let epsilons = targets.exact(&fam.amplitudes(&angles));
    let step = KrylovStep {
        n: key[1] as usize,
        angles,
        grid_cost: best.1,
        cost,
        epsilons,
        alternate,
        surface,
    };
    Ok((state, step))
}

/// Nelder-Mead minimization started from `x0` (cost `f0`) with an initial
/// simplex of edge `step`. Returns the best vertex and its cost.
fn nelder_mead(
    x0: &[f64],
    f0: f64,
    step: f64,
    iterations: usize,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<(Vec<f64>, f64)> {
    let dim = x0.len();
    let mut simplex = vec![(x0.to_vec(), f0)];
    for d in 0..dim {
        let mut x = x0.to_vec();
        x[d] += step;
        let fx = f(&x)?;
        simplex.push((x, fx));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    };
    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[dim].1 - simplex[0].1 <= 1e-15 * simplex[0].1.abs().max(1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|(x, _)| x[d]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&xr)?;
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&xe)?;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = lerp(&centroid, &xr, 0.5);
                let fc = f(&xc)?;
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &worst.0, 0.5);
                let fc = f(&xc)?;
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(&best, &v.0, 0.5);
                    v.1 = f(&v.0)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Ok((x, fx))
}

/// Krylov chain for one side of the impurity spin-up Green's function.
///
/// The prefactor `<c c†>` or `<c† c>` and the ground energy are estimated in
/// the same mode as the chain coefficients.
pub fn krylov_chain(
    gs: &QuantumState,
    h: &PauliSum,
    side: Side,
    depth: usize,
    cfg: &KrylovSearchConfig,
    noise: Option<&NoiseSpec>,
) -> Result<KvqaRun> {
    let (start, n2) = chi0(gs, side)?;
    let (prefactor, e0) = match cfg.mode {
        KrylovMode::VariationalSampled => {
            let noise = noise.copied().unwrap_or_default();
            let n_up = sample_expectation_keyed(gs, &up_occupation(), &noise, &[2, 0, 5])?;
            let pref = match side {
                Side::Hole => n_up,
                Side::Particle => 1.0 - n_up,
            };
            (pref, sample_expectation_keyed(gs, h, &noise, &[2, 0, 0])?)
        }
        _ => (n2, gs.expectation(h)?),
    };
    krylov_chain_from_state(&start, h, side, prefactor, e0, depth, cfg, noise)
}

fn up_occupation() -> PauliSum {
    let mut n = PauliSum::identity(N_QUBITS, 0.5);
    n.push(
        Complex64::new(-0.5, 0.0),
        "ZIIII".parse::<PauliString>().expect("valid string"),
    )
    .expect("same register");
    n
}

#[derive(Debug, Clone)]
pub struct KvqaGreens {
    pub particle: KvqaRun,
    pub hole: Option<KvqaRun>,
    pub spectrum: Spectrum,
}

/// Impurity spectrum from KVQA chains; the hole half is mirrored or computed.
pub fn kvqa_greens(
    gs: &QuantumState,
    h: &PauliSum,
    depth: usize,
    cfg: &KrylovSearchConfig,
    noise: Option<&NoiseSpec>,
    hole_side: HoleSide,
) -> Result<KvqaGreens> {
    let particle = krylov_chain(gs, h, Side::Particle, depth, cfg, noise)?;
    let particle_poles = poles_weights(&particle.chain)?;
    let (hole, spectrum) = match hole_side {
        HoleSide::Mirror => (None, assemble_particle_hole(&particle_poles)),
        HoleSide::Independent => {
            let hole = krylov_chain(gs, h, Side::Hole, depth, cfg, noise)?;
            let spectrum = particle_poles.union(&poles_weights(&hole.chain)?);
            (Some(hole), spectrum)
        }
    };
    Ok(KvqaGreens {
        particle,
        hole,
        spectrum,
    })
}
