//! Two-site DMFT on the Bethe lattice.
//!
//! The bath is a single site coupled by `V`; self-consistency reduces to
//! `V² = Z·M₂` with `Z` the quasiparticle weight of the impurity spectrum
//! and `M₂` the second moment of the lattice density of states.

use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed;
use crate::error::{invalid, Error, Result};
use crate::greens::{poles_weights, Spectrum};
use crate::kvqa::{self, HoleSide, KrylovMode, KrylovSearchConfig};
use crate::model::{self, HamiltonianForm, ModelParams, MuConvention, Spin};
use crate::rng::stream_rng;
use crate::statevector::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Lanczos on the dense model matrix.
    #[default]
    ExactLanczos,
    KvqaDirect,
    KvqaVariational,
    KvqaSampled,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::ExactLanczos => "exact-lanczos",
            SolverKind::KvqaDirect => "kvqa-direct",
            SolverKind::KvqaVariational => "kvqa-variational",
            SolverKind::KvqaSampled => "kvqa-sampled",
        }
    }

    fn krylov_mode(self) -> Option<KrylovMode> {
        match self {
            SolverKind::ExactLanczos => None,
            SolverKind::KvqaDirect => Some(KrylovMode::Direct),
            SolverKind::KvqaVariational => Some(KrylovMode::VariationalExact),
            SolverKind::KvqaSampled => Some(KrylovMode::VariationalSampled),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ZMethod {
    /// Weights of the two poles closest to the Fermi level.
    #[default]
    Peaks,
    /// `1/(1 − Re Σ'(0))` by central differences.
    Derivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmftConfig {
    pub m2: f64,
    pub v_initial: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub mixing: f64,
    pub solver: SolverKind,
    /// Krylov depth of every impurity solve.
    pub depth: usize,
    pub hole_side: HoleSide,
    pub z_method: ZMethod,
}

impl Default for DmftConfig {
    fn default() -> Self {
        Self {
            m2: 1.0,
            v_initial: 0.8,
            tol: 1e-3,
            max_iter: 50,
            mixing: 0.7,
            solver: SolverKind::default(),
            depth: 2,
            hole_side: HoleSide::Independent,
            z_method: ZMethod::default(),
        }
    }
}

impl DmftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m2 > 0.0) {
            return Err(invalid(format!("m2 must be positive, got {}", self.m2)));
        }
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(invalid(format!(
                "mixing must lie in (0, 1], got {}",
                self.mixing
            )));
        }
        if !(self.v_initial > 0.0) {
            return Err(invalid("v_initial must be positive"));
        }
        if self.depth == 0 {
            return Err(invalid("depth must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmftStep {
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Z")]
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmftResult {
    pub v_star: f64,
    pub z_star: f64,
    pub history: Vec<DmftStep>,
    pub converged: bool,
}

/// Quasiparticle weight from the poles adjacent to ω = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakWeight {
    pub z: f64,
    /// Set when only one side of the spectrum has a pole.
    pub one_sided: bool,
}

/// Sum of the weights of the innermost pole above and below ω = 0.
pub fn quasiparticle_weight_peaks(s: &Spectrum) -> Result<PeakWeight> {
    let above = s.innermost_positive();
    let below = s.innermost_negative();
    if above.is_none() && below.is_none() {
        return Err(invalid("spectrum has no poles"));
    }
    let z = above.map_or(0.0, |p| p.weight) + below.map_or(0.0, |p| p.weight);
    Ok(PeakWeight {
        z,
        one_sided: above.is_none() || below.is_none(),
    })
}

/// `G₀(z) = 1/(z − V²/z)`.
pub fn bare_greens(v: f64, z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(invalid("bare Green's function evaluated at z = 0"));
    }
    Ok(1.0 / (z - v * v / z))
}

/// `Z = 1/(1 − Re Σ'(0))` with `Σ = G₀⁻¹ − G⁻¹` differenced at `±h + iδ`.
pub fn quasiparticle_weight_derivative(g: &Spectrum, v: f64, h: f64, delta: f64) -> Result<f64> {
    if !(h > 0.0 && delta > 0.0) {
        return Err(invalid("step and broadening must be positive"));
    }
    let sigma = |w: f64| -> Result<Complex64> {
        let z = Complex64::new(w, delta);
        Ok(1.0 / bare_greens(v, z)? - 1.0 / g.greens(z))
    };
    let slope = (sigma(h)? - sigma(-h)?).re / (2.0 * h);
    let denom = 1.0 - slope;
    if denom.abs() < 1e-8 {
        return Err(Error::DivergentWeight(denom));
    }
    Ok(1.0 / denom)
}

/// `V = √(Z·M₂)`.
pub fn update_hybridization(z: f64, m2: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(invalid(format!(
            "quasiparticle weight must be positive, got {z}"
        )));
    }
    if !(m2 > 0.0) {
        return Err(invalid(format!("m2 must be positive, got {m2}")));
    }
    Ok((z * m2).sqrt())
}

/// Impurity spin-up spectrum at hybridization `v`, with μ re-resolved by `conv`.
pub fn impurity_spectrum(
    p: &ModelParams,
    conv: MuConvention,
    v: f64,
    cfg: &DmftConfig,
    search: &KrylovSearchConfig,
    noise: Option<&NoiseSpec>,
) -> Result<Spectrum> {
    let pv = p.with_v(v).with_mu_convention(conv)?;
    match cfg.solver.krylov_mode() {
        None => {
            let chains = ed::exact_chains(&pv, Spin::Up, cfg.depth)?;
            let particle = poles_weights(&chains.particle)?;
            Ok(match cfg.hole_side {
                HoleSide::Mirror => particle.union(&particle.mirrored()),
                HoleSide::Independent => particle.union(&poles_weights(&chains.hole)?),
            })
        }
        Some(mode) => {
            let h = model::build_hamiltonian(&pv, HamiltonianForm::Complete)?;
            let (_, gs) = kvqa::exact_ground_state(&h)?;
            let search = KrylovSearchConfig { mode, ..*search };
            Ok(kvqa::kvqa_greens(&gs, &h, cfg.depth, &search, noise, cfg.hole_side)?.spectrum)
        }
    }
}

fn weight_of(s: &Spectrum, v: f64, cfg: &DmftConfig) -> Result<f64> {
    match cfg.z_method {
        ZMethod::Peaks => Ok(quasiparticle_weight_peaks(s)?.z),
        ZMethod::Derivative => quasiparticle_weight_derivative(s, v, 1e-3, 1e-4),
    }
}

fn noise_for(noise: Option<&NoiseSpec>, path: &[u64]) -> Option<NoiseSpec> {
    noise.map(|n| NoiseSpec {
        seed: stream_rng(n.seed, path).next_u64(),
        ..*n
    })
}

/// Quasiparticle weight at hybridization `v`.
pub fn weight_at(
    p: &ModelParams,
    conv: MuConvention,
    v: f64,
    cfg: &DmftConfig,
    search: &KrylovSearchConfig,
    noise: Option<&NoiseSpec>,
) -> Result<f64> {
    let s = impurity_spectrum(p, conv, v, cfg, search, noise)?;
    weight_of(&s, v, cfg)
}

/// Damped fixed-point iteration `V ← (1−m)V + m√(Z·M₂)`.
pub fn run_dmft(
    p: &ModelParams,
    conv: MuConvention,
    cfg: &DmftConfig,
    search: &KrylovSearchConfig,
    noise: Option<&NoiseSpec>,
) -> Result<DmftResult> {
    cfg.validate()?;
    let mut v = cfg.v_initial;
    let mut history = Vec::new();
    for iter in 0..cfg.max_iter {
        let it_noise = noise_for(noise, &[1, iter as u64]);
        let z = weight_at(p, conv, v, cfg, search, it_noise.as_ref())?;
        history.push(DmftStep { v, z });
        let target = update_hybridization(z, cfg.m2)?;
        let next = (1.0 - cfg.mixing) * v + cfg.mixing * target;
        if (next - v).abs() < cfg.tol {
            return Ok(DmftResult {
                v_star: next,
                z_star: z,
                history,
                converged: true,
            });
        }
        v = next;
    }
    let last = *history.last().expect("at least one iteration");
    Ok(DmftResult {
        v_star: v,
        z_star: last.z,
        history,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    #[serde(rename = "sqrtZM2")]
    pub sqrt_zm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmftScan {
    pub points: Vec<ScanPoint>,
    /// Interpolated `V` where `√(Z·M₂) = V`, if the curves cross.
    pub crossing: Option<f64>,
}

/// `n` equally spaced hybridizations in `[lo, hi]`.
pub fn scan_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(invalid("scan needs at least two points and hi > lo"));
    }
    Ok((0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect())
}

/// `Z` and `√(Z·M₂)` on a grid of `V`, solved in parallel.
pub fn dmft_scan(
    p: &ModelParams,
    conv: MuConvention,
    cfg: &DmftConfig,
    search: &KrylovSearchConfig,
    noise: Option<&NoiseSpec>,
    vs: &[f64],
) -> Result<DmftScan> {
    cfg.validate()?;
    let points = vs
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            let pt_noise = noise_for(noise, &[2, k as u64]);
            let z = weight_at(p, conv, v, cfg, search, pt_noise.as_ref())?;
            Ok(ScanPoint {
                v,
                z,
                sqrt_zm2: (z.max(0.0) * cfg.m2).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossing = find_crossing(&points);
    Ok(DmftScan { points, crossing })
}

fn find_crossing(points: &[ScanPoint]) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let f0 = w[0].sqrt_zm2 - w[0].v;
        let f1 = w[1].sqrt_zm2 - w[1].v;
        if f0 == 0.0 {
            Some(w[0].v)
        } else if f0 * f1 < 0.0 {
            Some(w[0].v + (w[1].v - w[0].v) * f0 / (f0 - f1))
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep() -> ModelParams {
        ModelParams::representative()
    }

    fn exact_cfg() -> DmftConfig {
        DmftConfig::default()
    }

    #[test]
    fn peaks_noninteracting() {
        let s = Spectrum::from_pairs(&[(-0.7, 0.5), (0.7, 0.5)]);
        let w = quasiparticle_weight_peaks(&s).unwrap();
        assert_eq!(w.z, 1.0);
        assert!(!w.one_sided);
    }

    #[test]
    fn peaks_one_sided() {
        let w = quasiparticle_weight_peaks(&Spectrum::from_pairs(&[(0.5, 0.2)])).unwrap();
        assert_eq!(w.z, 0.2);
        assert!(w.one_sided);
        assert!(quasiparticle_weight_peaks(&Spectrum::from_pairs(&[])).is_err());
    }

    #[test]
    fn bare_greens_values() {
        let z = Complex64::new(0.3, 0.2);
        assert!((bare_greens(0.0, z).unwrap() - 1.0 / z).norm() < 1e-15);
        let g = bare_greens(1.0, Complex64::new(0.0, 1.0)).unwrap();
        assert!((g - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!(bare_greens(1.0, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn bare_greens_poles_at_plus_minus_v() {
        let v = 0.8;
        let omegas: Vec<f64> = (0..4001).map(|k| -2.0 + 4.0 * k as f64 / 4000.0).collect();
        let a: Vec<f64> = omegas
            .iter()
            .map(|&w| -bare_greens(v, Complex64::new(w, 0.01)).unwrap().im)
            .collect();
        let peak = |range: std::ops::Range<usize>| {
            range
                .max_by(|&i, &j| a[i].total_cmp(&a[j]))
                .map(|i| omegas[i])
                .unwrap()
        };
        assert!((peak(0..2000) + v).abs() < 2e-3);
        assert!((peak(2001..4001) - v).abs() < 2e-3);
    }

    #[test]
    fn derivative_weight_of_bare_spectrum_is_one() {
        let v = 0.9;
        let s = Spectrum::from_pairs(&[(-v, 0.5), (v, 0.5)]);
        let z = quasiparticle_weight_derivative(&s, v, 1e-3, 1e-4).unwrap();
        assert!((z - 1.0).abs() < 1e-4, "{z}");
    }

    #[test]
    fn hybridization_update() {
        assert_eq!(update_hybridization(1.0, 1.0).unwrap(), 1.0);
        assert!((update_hybridization(0.6241, 1.0).unwrap() - 0.79).abs() < 1e-12);
        assert_eq!(update_hybridization(0.25, 4.0).unwrap(), 1.0);
        assert!(update_hybridization(0.0, 1.0).is_err());
    }

    #[test]
    fn noninteracting_fixed_point() {
        let p = ModelParams {
            u: 0.0,
            lambda: 0.0,
            ..rep()
        };
        let r = run_dmft(
            &p,
            MuConvention::HalfFilling,
            &exact_cfg(),
            &KrylovSearchConfig::default(),
            None,
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.v_star - 1.0).abs() < 1e-3);
        assert!((r.z_star - 1.0).abs() < 1e-6);
    }

    #[test]
    fn representative_fixed_point() {
        let r = run_dmft(
            &rep(),
            MuConvention::HalfFilling,
            &exact_cfg(),
            &KrylovSearchConfig::default(),
            None,
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.v_star - 0.79).abs() < 0.02, "{}", r.v_star);
        assert!((r.v_star.powi(2) - r.z_star).abs() <= 2.0 * 1e-3 * r.v_star + 1e-3);
        assert!(r.history.iter().all(|s| s.z > 0.0 && s.z <= 1.0));
    }

    #[test]
    fn derivative_agrees_with_peaks_on_lehmann_spectrum() {
        let p = rep().with_mu_convention(MuConvention::HalfFilling).unwrap();
        let s = ed::lehmann_greens(&p, Spin::Up).unwrap();
        let zp = quasiparticle_weight_peaks(&s).unwrap().z;
        let zd = quasiparticle_weight_derivative(&s, 0.8, 1e-3, 1e-4).unwrap();
        assert!((zp - zd).abs() < 0.05, "{zp} {zd}");
    }

    #[test]
    fn kvqa_direct_matches_exact_lanczos() {
        let search = KrylovSearchConfig::default();
        let exact = run_dmft(
            &rep(),
            MuConvention::HalfFilling,
            &exact_cfg(),
            &search,
            None,
        )
        .unwrap();
        let cfg = DmftConfig {
            solver: SolverKind::KvqaDirect,
            ..exact_cfg()
        };
        let direct = run_dmft(&rep(), MuConvention::HalfFilling, &cfg, &search, None).unwrap();
        assert_eq!(exact.history.len(), direct.history.len());
        for (a, b) in exact.history.iter().zip(&direct.history) {
            assert!((a.z - b.z).abs() < 1e-6);
        }
    }

    #[test]
    fn mixing_does_not_move_fixed_point() {
        let search = KrylovSearchConfig::default();
        let a = run_dmft(
            &rep(),
            MuConvention::HalfFilling,
            &DmftConfig {
                mixing: 0.5,
                tol: 1e-5,
                ..exact_cfg()
            },
            &search,
            None,
        )
        .unwrap();
        let b = run_dmft(
            &rep(),
            MuConvention::HalfFilling,
            &DmftConfig {
                mixing: 1.0,
                tol: 1e-5,
                ..exact_cfg()
            },
            &search,
            None,
        )
        .unwrap();
        assert!((a.v_star - b.v_star).abs() < 1e-4);
    }

    #[test]
    fn scan_crossing_matches_iteration() {
        let search = KrylovSearchConfig::default();
        let cfg = DmftConfig {
            tol: 1e-6,
            ..exact_cfg()
        };
        let scan = dmft_scan(
            &rep(),
            MuConvention::HalfFilling,
            &cfg,
            &search,
            None,
            &scan_grid(0.5, 1.2, 15).unwrap(),
        )
        .unwrap();
        let it = run_dmft(&rep(), MuConvention::HalfFilling, &cfg, &search, None).unwrap();
        assert!((scan.crossing.unwrap() - it.v_star).abs() < 5e-3);
    }

    #[test]
    fn config_validation() {
        assert!(DmftConfig::default().validate().is_ok());
        assert!(DmftConfig {
            mixing: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DmftConfig {
            m2: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DmftConfig {
            max_iter: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn update_squares_back(z in 1e-6f64..1.0, m2 in 1e-3f64..10.0) {
            let v = update_hybridization(z, m2).unwrap();
            prop_assert!((v * v - z * m2).abs() < 1e-12 * (1.0 + z * m2));
        }

        #[test]
        fn peak_weight_bounded_by_total(
            poles in prop::collection::vec((-5.0f64..5.0, 0.0f64..1.0), 1..8)
        ) {
            let s = Spectrum::from_pairs(&poles);
            if let Ok(w) = quasiparticle_weight_peaks(&s) {
                prop_assert!(w.z <= s.total_weight() + 1e-12);
                prop_assert!(w.z >= 0.0);
            }
        }

        #[test]
        fn crossing_of_linear_curves(v0 in 0.2f64..1.5, slope in -1.0f64..0.5) {
            let points: Vec<ScanPoint> = (0..11)
                .map(|k| {
                    let v = 0.1 + 0.19 * k as f64;
                    ScanPoint { v, z: 0.0, sqrt_zm2: v0 + slope * (v - v0) }
                })
                .collect();
            if let Some(x) = find_crossing(&points) {
                prop_assert!((x - v0).abs() < 1e-9);
            }
        }
    }
}
