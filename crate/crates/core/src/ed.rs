//! Exact-diagonalization reference: dense eigensystems, Lehmann spectra and
//! a reorthogonalized classical Lanczos.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::greens::{KrylovChain, Pole, Side, Spectrum, MERGE_TOL};
use crate::linalg;
use crate::model::{self, ModelParams, Spin};

/// Lehmann poles with weight at or below this are dropped.
pub const WEIGHT_THRESHOLD: f64 = 1e-10;

/// Default splitting below which the ground state counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Lanczos stops once `b²` falls below this.
pub const LANCZOS_BREAKDOWN: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, matching `energies`.
    pub vectors: DMatrix<Complex64>,
}

impl EigenSystem {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn vector(&self, k: usize) -> DVector<Complex64> {
        self.vectors.column(k).into_owned()
    }

    /// Number of states within `tol` of the lowest energy.
    pub fn ground_multiplicity(&self, tol: f64) -> usize {
        let e0 = self.energies[0];
        self.energies.iter().take_while(|&&e| e - e0 <= tol).count()
    }

    /// The unique ground state, or a degeneracy error.
    pub fn unique_ground_state(&self, tol: f64) -> Result<(f64, DVector<Complex64>)> {
        let m = self.ground_multiplicity(tol);
        if m > 1 {
            return Err(Error::DegenerateGroundState {
                multiplicity: m,
                splitting: self.energies[m - 1] - self.energies[0],
            });
        }
        Ok((self.energies[0], self.vector(0)))
    }
}

/// Full spectrum of a Hermitian matrix.
pub fn diagonalize(h: &DMatrix<Complex64>) -> Result<EigenSystem> {
    if !h.is_square() {
        return Err(invalid("diagonalize needs a square matrix"));
    }
    let err = linalg::hermiticity_error(h);
    if err > 1e-10 {
        return Err(invalid(format!(
            "matrix is not Hermitian (max |H − H†| = {err:.3e})"
        )));
    }
    let (energies, vectors) = linalg::eigh(h)?;
    Ok(EigenSystem { energies, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LehmannOptions {
    /// Average the weights over a degenerate ground multiplet instead of failing.
    pub average_degenerate: bool,
    pub degeneracy_tol: f64,
}

impl Default for LehmannOptions {
    fn default() -> Self {
        Self {
            average_degenerate: false,
            degeneracy_tol: DEGENERACY_TOL,
        }
    }
}

/// Impurity Green's function of the full model in Lehmann form.
pub fn lehmann_greens(p: &ModelParams, flavor: Spin) -> Result<Spectrum> {
    lehmann_greens_with(p, flavor, LehmannOptions::default())
}

pub fn lehmann_greens_with(
    p: &ModelParams,
    flavor: Spin,
    opts: LehmannOptions,
) -> Result<Spectrum> {
    let h = model::build_full_hamiltonian(p)?;
    let c = model::annihilation_matrix(flavor.impurity_mode(), p.n_boson_levels)?;
    lehmann_from_matrix(&diagonalize(&h)?, &c, opts)
}

/// Lehmann spectrum of `G(z) = <c (z − H + E0)^{-1} c†> + <c† (z + H − E0)^{-1} c>`
/// for an annihilator `c` given as a dense matrix.
pub fn lehmann_from_matrix(
    es: &EigenSystem,
    c: &DMatrix<Complex64>,
    opts: LehmannOptions,
) -> Result<Spectrum> {
    let mult = es.ground_multiplicity(opts.degeneracy_tol);
    if mult > 1 && !opts.average_degenerate {
        es.unique_ground_state(opts.degeneracy_tol)?;
    }
    let e0 = es.energies[0];
    let c_dag = c.adjoint();
    let mut poles = Vec::new();
    for g in 0..mult {
        let gs = es.vector(g);
        let particle = es.vectors.adjoint() * (&c_dag * &gs);
        let hole = es.vectors.adjoint() * (c * &gs);
        for (m, &em) in es.energies.iter().enumerate() {
            let wp = particle[m].norm_sqr() / mult as f64;
            let wh = hole[m].norm_sqr() / mult as f64;
            if wp > 0.0 {
                poles.push(Pole {
                    omega: em - e0,
                    weight: wp,
                });
            }
            if wh > 0.0 {
                poles.push(Pole {
                    omega: -(em - e0),
                    weight: wh,
                });
            }
        }
    }
    Ok(Spectrum::new(poles).merged(MERGE_TOL, WEIGHT_THRESHOLD))
}

/// Result of [`reference_lanczos`]: the chain plus its orthonormal basis.
#[derive(Debug, Clone)]
pub struct LanczosRun {
    /// Raw coefficients; `prefactor = ‖start‖²`, `e0 = 0`, particle side.
    pub chain: KrylovChain,
    pub basis: Vec<DVector<Complex64>>,
    /// True when `b²` fell below the breakdown threshold before `depth`.
    pub terminated_early: bool,
}

/// Classical Lanczos with full reorthogonalization, up to `depth` steps.
pub fn reference_lanczos(
    h: &DMatrix<Complex64>,
    start: &DVector<Complex64>,
    depth: usize,
) -> Result<LanczosRun> {
    let n2 = start.norm_squared();
    if n2 <= 0.0 {
        return Err(invalid("Lanczos start vector is zero"));
    }
    if start.len() != h.nrows() {
        return Err(invalid("Lanczos start vector does not match the matrix"));
    }
    let mut basis = vec![start.unscale(n2.sqrt())];
    let mut a = Vec::new();
    let mut b2 = Vec::new();
    let mut terminated_early = false;
    loop {
        let v = basis.last().unwrap();
        let hv = h * v;
        let an = v.dotc(&hv).re;
        a.push(an);
        if a.len() > depth {
            break;
        }
        let mut w = hv - v * Complex64::new(an, 0.0);
        for _ in 0..2 {
            for u in &basis {
                let proj = u.dotc(&w);
                w -= u * proj;
            }
        }
        let bb = w.norm_squared();
        if bb < LANCZOS_BREAKDOWN {
            terminated_early = true;
            break;
        }
        b2.push(bb);
        basis.push(w.unscale(bb.sqrt()));
    }
    let chain = KrylovChain::new(a, b2, n2, 0.0, Side::Particle)?;
    Ok(LanczosRun {
        chain,
        basis,
        terminated_early,
    })
}

/// Ground state data and both exact Krylov chains of the model.
#[derive(Debug, Clone)]
pub struct ExactChains {
    pub e0: f64,
    pub ground_state: DVector<Complex64>,
    pub particle: KrylovChain,
    pub hole: KrylovChain,
}

/// Particle (`c†|GS>`) and hole (`c|GS>`) chains on the dense model matrix.
pub fn exact_chains(p: &ModelParams, flavor: Spin, depth: usize) -> Result<ExactChains> {
    let h = model::build_full_hamiltonian(p)?;
    let es = diagonalize(&h)?;
    let (e0, gs) = es.unique_ground_state(DEGENERACY_TOL)?;
    let c = model::annihilation_matrix(flavor.impurity_mode(), p.n_boson_levels)?;
    let mut particle = reference_lanczos(&h, &(c.adjoint() * &gs), depth)?.chain;
    particle.e0 = e0;
    particle.side = Side::Particle;
    let mut hole = reference_lanczos(&h, &(&c * &gs), depth)?.chain;
    hole.e0 = e0;
    hole.side = Side::Hole;
    Ok(ExactChains {
        e0,
        ground_state: gs,
        particle,
        hole,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{continued_fraction, poles_weights};
    use crate::model::MuConvention;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rep() -> ModelParams {
        ModelParams::representative()
            .with_mu_convention(MuConvention::HalfFilling)
            .unwrap()
    }

    #[test]
    fn diag_and_x() {
        let es = diagonalize(&DMatrix::from_row_slice(
            2,
            2,
            &[c(3.0), c(0.0), c(0.0), c(1.0)],
        ))
        .unwrap();
        assert_eq!(es.energies, vec![1.0, 3.0]);
        let es = diagonalize(&DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0), c(1.0), c(1.0), c(0.0)],
        ))
        .unwrap();
        assert!((es.energies[0] + 1.0).abs() < 1e-15 && (es.energies[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(diagonalize(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn reconstruction() {
        let h = model::build_full_hamiltonian(&rep()).unwrap();
        let es = diagonalize(&h).unwrap();
        let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
            es.energies.len(),
            es.energies.iter().map(|&e| c(e)),
        ));
        let back = &es.vectors * lambda * es.vectors.adjoint();
        assert!((back - h).camax() < 1e-8);
        let gram = es.vectors.adjoint() * &es.vectors;
        assert!((gram - DMatrix::identity(32, 32)).camax() < 1e-9);
    }

    #[test]
    fn representative_ground_energy() {
        let es = diagonalize(&model::build_full_hamiltonian(&rep()).unwrap()).unwrap();
        assert!(
            (es.ground_energy() + 2.62).abs() < 0.03,
            "{}",
            es.ground_energy()
        );
    }

    #[test]
    fn noninteracting_lehmann() {
        let p = ModelParams {
            u: 0.0,
            lambda: 0.0,
            mu: 0.0,
            ..ModelParams::representative()
        };
        let s = lehmann_greens(&p, Spin::Up).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.poles[0].omega + 0.8).abs() < 1e-10 && (s.poles[1].omega - 0.8).abs() < 1e-10);
        assert!((s.poles[0].weight - 0.5).abs() < 1e-10);
    }

    #[test]
    fn representative_lehmann_anchors() {
        let s = lehmann_greens(&rep(), Spin::Up).unwrap();
        assert!((s.total_weight() - 1.0).abs() < 1e-10);
        let gap = s.gap().unwrap();
        assert!((gap - 1.25).abs() < 0.05, "{gap}");
        // the second pole on each side is the satellite
        let mut neg: Vec<_> = s.negative().collect();
        neg.reverse();
        let pos: Vec<_> = s.positive().collect();
        assert!((neg[1].omega + 2.8).abs() < 0.2 && (pos[1].omega - 2.8).abs() < 0.2);
    }

    #[test]
    fn particle_hole_symmetry_without_coupling() {
        let p = ModelParams {
            lambda: 0.0,
            ..ModelParams::representative()
        };
        let s = lehmann_greens(&p, Spin::Up).unwrap();
        let m = s.mirrored();
        assert_eq!(s.len(), m.len());
        for (a, b) in s.poles.iter().zip(&m.poles) {
            assert!((a.omega - b.omega).abs() < 1e-6 && (a.weight - b.weight).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_ground_state_reported() {
        // V = 0, U = 0, μ = 0: many degenerate zero-energy states
        let p = ModelParams {
            u: 0.0,
            v: 0.0,
            mu: 0.0,
            lambda: 0.0,
            ..ModelParams::representative()
        };
        assert!(matches!(
            lehmann_greens(&p, Spin::Up),
            Err(Error::DegenerateGroundState { .. })
        ));
        let opts = LehmannOptions {
            average_degenerate: true,
            ..LehmannOptions::default()
        };
        let s = lehmann_greens_with(&p, Spin::Up, opts).unwrap();
        assert!((s.total_weight() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lanczos_on_x() {
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let run = reference_lanczos(&x, &DVector::from_vec(vec![c(1.0), c(0.0)]), 10).unwrap();
        assert_eq!(run.chain.a, vec![0.0, 0.0]);
        assert_eq!(run.chain.b2, vec![1.0]);
        assert!(run.terminated_early);
        assert!(reference_lanczos(&x, &DVector::zeros(2), 3).is_err());
    }

    #[test]
    fn lanczos_random_hermitian() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(11, &[]);
        let mut m = DMatrix::<Complex64>::zeros(8, 8);
        for r in 0..8 {
            for col in r..8 {
                let z = Complex64::new(
                    rng.random_range(-1.0..1.0),
                    if r == col {
                        0.0
                    } else {
                        rng.random_range(-1.0..1.0)
                    },
                );
                m[(r, col)] = z;
                m[(col, r)] = z.conj();
            }
        }
        let start = DVector::from_fn(8, |_, _| Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        let run = reference_lanczos(&m, &start, 20).unwrap();
        let spectrum = diagonalize(&m).unwrap().energies;
        let (tri, _) = linalg::tridiagonal_eigh(&run.chain.a, &run.chain.b2).unwrap();
        for t in tri {
            assert!(spectrum.iter().any(|&e| (e - t).abs() < 1e-8));
        }
        for (i, u) in run.basis.iter().enumerate() {
            for (j, w) in run.basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((u.dotc(w) - c(want)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn full_depth_chain_reproduces_lehmann() {
        let p = rep();
        let chains = exact_chains(&p, Spin::Up, 64).unwrap();
        let s = poles_weights(&chains.particle)
            .unwrap()
            .union(&poles_weights(&chains.hole).unwrap());
        let lehmann = lehmann_greens(&p, Spin::Up).unwrap();
        assert_eq!(s.len(), lehmann.len());
        for (a, b) in s.poles.iter().zip(&lehmann.poles) {
            assert!((a.omega - b.omega).abs() < 1e-6 && (a.weight - b.weight).abs() < 1e-6);
        }
        let z = Complex64::new(0.37, 0.1);
        let cf = continued_fraction(z, &chains.particle).unwrap()
            + continued_fraction(z, &chains.hole).unwrap();
        assert!((cf - lehmann.greens(z)).norm() < 1e-8);
    }

    #[test]
    fn half_filled_chain_prefactors() {
        let chains = exact_chains(&rep(), Spin::Up, 2).unwrap();
        assert!((chains.particle.prefactor - 0.5).abs() < 1e-9);
        assert!((chains.hole.prefactor - 0.5).abs() < 1e-9);
    }
}
