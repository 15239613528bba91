//! Continued-fraction Green's functions, pole/weight spectra and broadened
//! spectral functions.
//!
//! Frequencies are measured from the Fermi level: a chain stores raw
//! Lanczos coefficients together with the ground energy `e0`, and every
//! evaluation subtracts `e0`, so poles sit at excitation energies.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Poles closer than this are merged into one.
pub const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub omega: f64,
    pub weight: f64,
}

/// Poles sorted by frequency.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Spectrum {
    pub poles: Vec<Pole>,
}

impl Spectrum {
    pub fn new(mut poles: Vec<Pole>) -> Self {
        poles.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        Self { poles }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|&(omega, weight)| Pole { omega, weight })
                .collect(),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.poles.iter().map(|p| p.weight).sum()
    }

    /// Merge poles within `tol` of each other (weights add, position is the
    /// weight-averaged frequency) and drop weights at or below `min_weight`.
    pub fn merged(&self, tol: f64, min_weight: f64) -> Spectrum {
        let mut out: Vec<Pole> = Vec::with_capacity(self.poles.len());
        for p in &self.poles {
            match out.last_mut() {
                Some(last) if (p.omega - last.omega).abs() <= tol => {
                    let w = last.weight + p.weight;
                    if w > 0.0 {
                        last.omega = (last.omega * last.weight + p.omega * p.weight) / w;
                    }
                    last.weight = w;
                }
                _ => out.push(*p),
            }
        }
        out.retain(|p| p.weight > min_weight);
        Spectrum { poles: out }
    }

    /// `ω → −ω` with weights unchanged.
    pub fn mirrored(&self) -> Spectrum {
        Spectrum::new(
            self.poles
                .iter()
                .map(|p| Pole {
                    omega: -p.omega,
                    weight: p.weight,
                })
                .collect(),
        )
    }

    pub fn union(&self, other: &Spectrum) -> Spectrum {
        Spectrum::new(self.poles.iter().chain(&other.poles).copied().collect())
    }

    /// `Σ_k w_k / (z − ω_k)`.
    pub fn greens(&self, z: Complex64) -> Complex64 {
        self.poles.iter().map(|p| p.weight / (z - p.omega)).sum()
    }

    /// Retarded time-domain function `−i Σ_k w_k e^{−iω_k t}` for `t ≥ 0`.
    pub fn time_greens(&self, t: f64) -> Complex64 {
        let sum: Complex64 = self
            .poles
            .iter()
            .map(|p| p.weight * Complex64::from_polar(1.0, -p.omega * t))
            .sum();
        Complex64::new(0.0, -1.0) * sum
    }

    pub fn positive(&self) -> impl Iterator<Item = &Pole> {
        self.poles.iter().filter(|p| p.omega > 0.0)
    }

    pub fn negative(&self) -> impl Iterator<Item = &Pole> {
        self.poles.iter().filter(|p| p.omega < 0.0)
    }

    /// Pole with the smallest positive frequency.
    pub fn innermost_positive(&self) -> Option<Pole> {
        self.positive()
            .copied()
            .min_by(|a, b| a.omega.total_cmp(&b.omega))
    }

    /// Pole with the largest negative frequency.
    pub fn innermost_negative(&self) -> Option<Pole> {
        self.negative()
            .copied()
            .max_by(|a, b| a.omega.total_cmp(&b.omega))
    }

    /// Distance between the innermost poles on either side of ω = 0.
    pub fn gap(&self) -> Option<f64> {
        Some(self.innermost_positive()?.omega - self.innermost_negative()?.omega)
    }
}

/// Which half of the spectrum a chain describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Built from `c†|GS>`; poles at `E_m − E0 > 0`.
    Particle,
    /// Built from `c|GS>`; poles at `−(E_m − E0) < 0`.
    Hole,
}

/// Lanczos coefficients of one side of the Green's function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovChain {
    /// `a_0 .. a_d`, raw `<χ_n|H|χ_n>`.
    pub a: Vec<f64>,
    /// `b_1² .. b_d²`.
    pub b2: Vec<f64>,
    /// Squared norm of the starting vector.
    pub prefactor: f64,
    /// Ground energy subtracted from every `a_n`.
    pub e0: f64,
    pub side: Side,
}

impl KrylovChain {
    pub fn new(a: Vec<f64>, b2: Vec<f64>, prefactor: f64, e0: f64, side: Side) -> Result<Self> {
        let chain = Self {
            a,
            b2,
            prefactor,
            e0,
            side,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(invalid("Krylov chain needs at least a_0"));
        }
        if self.b2.len() + 1 != self.a.len() {
            return Err(invalid(format!(
                "chain has {} diagonal and {} off-diagonal coefficients",
                self.a.len(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.b2.len()
    }

    /// Chain cut after `depth` recursion steps.
    pub fn truncated(&self, depth: usize) -> KrylovChain {
        let d = depth.min(self.depth());
        KrylovChain {
            a: self.a[..=d].to_vec(),
            b2: self.b2[..d].to_vec(),
            ..self.clone()
        }
    }
}

/// `prefactor / (z − a_0 − b_1² / (z − a_1 − …))` with `a_n` taken relative
/// to `e0`; hole chains are evaluated as `−cf(−z)` so their poles land at
/// negative frequencies.
pub fn continued_fraction(z: Complex64, chain: &KrylovChain) -> Result<Complex64> {
    chain.validate()?;
    let (zz, sign) = match chain.side {
        Side::Particle => (z, 1.0),
        Side::Hole => (-z, -1.0),
    };
    let d = chain.depth();
    let mut denom = zz - (chain.a[d] - chain.e0);
    for n in (0..d).rev() {
        if denom == Complex64::new(0.0, 0.0) {
            return Err(Error::PoleHit { re: z.re, im: z.im });
        }
        denom = zz - (chain.a[n] - chain.e0) - chain.b2[n] / denom;
    }
    if denom == Complex64::new(0.0, 0.0) || !denom.is_finite() {
        return Err(Error::PoleHit { re: z.re, im: z.im });
    }
    Ok(sign * chain.prefactor / denom)
}

/// Poles and weights of a chain from its tridiagonal eigen-decomposition.
pub fn poles_weights(chain: &KrylovChain) -> Result<Spectrum> {
    chain.validate()?;
    let (values, vectors) = linalg::tridiagonal_eigh(&chain.a, &chain.b2)?;
    let sign = match chain.side {
        Side::Particle => 1.0,
        Side::Hole => -1.0,
    };
    let poles = values
        .iter()
        .enumerate()
        .map(|(k, &e)| Pole {
            omega: sign * (e - chain.e0),
            weight: chain.prefactor * vectors[(0, k)].powi(2),
        })
        .collect();
    Ok(Spectrum::new(poles).merged(MERGE_TOL, 0.0))
}

/// Particle-side poles plus their mirror images at `−ω`.
pub fn assemble_particle_hole(particle: &Spectrum) -> Spectrum {
    particle.union(&particle.mirrored())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
    pub delta: f64,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            omega_min: -12.0,
            omega_max: 12.0,
            n_points: 2401,
            delta: 0.1,
        }
    }
}

impl FrequencyGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min < self.omega_max) {
            return Err(invalid("omega_min must be below omega_max"));
        }
        if self.n_points < 2 {
            return Err(invalid("n_points must be at least 2"));
        }
        if !(self.delta > 0.0) {
            return Err(invalid("delta must be positive"));
        }
        Ok(())
    }

    pub fn omegas(&self) -> Vec<f64> {
        let step = (self.omega_max - self.omega_min) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|k| self.omega_min + step * k as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub omega: f64,
    pub a: f64,
    pub re_g: f64,
    pub im_g: f64,
}

/// `A(ω) = −Im G(ω + iδ)/π` together with `G` on the grid.
pub fn spectral_function(s: &Spectrum, g: &FrequencyGrid) -> Result<Vec<SpectralPoint>> {
    g.validate()?;
    Ok(g.omegas()
        .into_iter()
        .map(|omega| {
            let gz = s.greens(Complex64::new(omega, g.delta));
            SpectralPoint {
                omega,
                a: -gz.im / std::f64::consts::PI,
                re_g: gz.re,
                im_g: gz.im,
            }
        })
        .collect())
}
