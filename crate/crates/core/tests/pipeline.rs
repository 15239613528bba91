//! End-to-end checks of the solver chain against frozen exact-diagonalization values.

use hhdmft_core::dmft::{self, DmftConfig};
use hhdmft_core::ed;
use hhdmft_core::greens::poles_weights;
use hhdmft_core::kvqa::{self, KrylovMode, KrylovSearchConfig};
use hhdmft_core::model::{self, Spin};
use hhdmft_core::time_evolution::{self, Backend, TimeGrid};
use hhdmft_core::vqe::{self, EvalMode, LandscapeGrid};
use hhdmft_core::*;

const E0: f64 = -2.623819428693;
const MU: f64 = 1.273929507394814;

const LEHMANN: [(f64, f64); 8] = [
    (-8.0831879571, 0.0095004781),
    (-6.3254527099, 0.0201452889),
    (-2.9094770330, 0.1691333238),
    (-0.6293010001, 0.3012209092),
    (0.6278057979, 0.2996165332),
    (2.9707858250, 0.1834054366),
    (6.6097227136, 0.0100463401),
    (10.6433863340, 0.0069316901),
];

fn representative() -> ModelParams {
    ModelParams::representative()
        .with_mu_convention(MuConvention::HalfFilling)
        .unwrap()
}

#[test]
fn half_filling_mu_and_ground_energy() {
    let p = representative();
    assert!((p.mu - MU).abs() < 1e-9);
    let chains = ed::exact_chains(&p, Spin::Up, 2).unwrap();
    assert!((chains.e0 - E0).abs() < 1e-9);
}

#[test]
fn lehmann_poles_are_frozen() {
    let s = ed::lehmann_greens(&representative(), Spin::Up)
        .unwrap()
        .merged(1e-9, 1e-12);
    assert_eq!(s.len(), LEHMANN.len());
    for (pole, &(w, z)) in s.poles.iter().zip(&LEHMANN) {
        assert!((pole.omega - w).abs() < 1e-8, "{} vs {w}", pole.omega);
        assert!((pole.weight - z).abs() < 1e-8, "{} vs {z}", pole.weight);
    }
    assert!((s.total_weight() - 1.0).abs() < 1e-10);
}

#[test]
fn exact_chain_coefficients_are_frozen() {
    let c = ed::exact_chains(&representative(), Spin::Up, 2).unwrap();
    let a = [-0.8775405372153442, 3.269023758698517];
    let b2 = [2.8722909143105833, 14.704776447810328];
    for k in 0..2 {
        assert!((c.particle.a[k] - a[k]).abs() < 1e-9);
        assert!((c.particle.b2[k] - b2[k]).abs() < 1e-9);
    }
    assert!((c.hole.a[0] + 0.8520787033020376).abs() < 1e-9);
    assert!((c.hole.b2[0] - 2.8165235632955916).abs() < 1e-9);
}

#[test]
fn vqe_scan_respects_the_variational_bound() {
    let p = representative();
    let h = model::build_pauli_hamiltonian(&p).unwrap();
    let (est, land) =
        vqe::find_ground_state(&h, &LandscapeGrid::default(), EvalMode::Exact, None).unwrap();
    assert!((est.energy + 2.576201653511).abs() < 1e-8);
    assert!(land.min() >= E0 - 1e-9);
    assert!(est.energy >= E0 - 1e-9);
}

#[test]
fn kvqa_direct_reproduces_lanczos_chain() {
    let p = representative();
    let h = model::build_hamiltonian(&p, HamiltonianForm::Complete).unwrap();
    let (e0, gs) = kvqa::exact_ground_state(&h).unwrap();
    assert!((e0 - E0).abs() < 1e-9);
    let cfg = KrylovSearchConfig::with_mode(KrylovMode::Direct);
    let run = kvqa::krylov_chain(&gs, &h, Side::Particle, 2, &cfg, None).unwrap();
    let reference = ed::exact_chains(&p, Spin::Up, 2).unwrap();
    for k in 0..2 {
        assert!((run.chain.a[k] - reference.particle.a[k]).abs() < 1e-8);
        assert!((run.chain.b2[k] - reference.particle.b2[k]).abs() < 1e-8);
    }
    let s = poles_weights(&run.chain).unwrap();
    assert!((s.total_weight() - 0.5).abs() < 1e-9);
}

#[test]
fn dmft_fixed_point_is_frozen() {
    let p = representative();
    let cfg = DmftConfig::default();
    let r = dmft::run_dmft(
        &p,
        MuConvention::HalfFilling,
        &cfg,
        &KrylovSearchConfig::default(),
        None,
    )
    .unwrap();
    assert!(r.converged);
    assert!((r.v_star - 0.795283506872).abs() < 1e-8);
    assert!((r.z_star - 0.631984958038).abs() < 1e-8);
}

#[test]
fn config_drives_the_pipeline() {
    let cfg = parse_config(
        "seed = 3\n[model]\nU = 4.0\nV = 0.8\nomega0 = 5.0\nlambda = 1.5\n[dmft]\nmixing = 1.0\n",
    )
    .unwrap();
    let p = cfg.params();
    assert!((p.mu - MU).abs() < 1e-9);
    let r = dmft::run_dmft(&p, cfg.model.mu_convention, &cfg.dmft, &cfg.kvqa, None).unwrap();
    assert!((r.v_star - 0.795283506872).abs() < 2e-3);
    assert_eq!(cfg.noise_spec().seed, 3);
}

#[test]
fn time_traces_start_at_minus_i() {
    let p = representative()
        .with_v(1.0)
        .with_mu_convention(MuConvention::HalfFilling)
        .unwrap();
    let g = TimeGrid {
        t_max: 2.0,
        n_steps: 20,
    };
    let exact = time_evolution::greens_time(&p, &g, Backend::Exact, None).unwrap();
    let trotter = time_evolution::greens_time(&p, &g, Backend::Trotter { n_t: 40 }, None).unwrap();
    assert!((exact.im_g[0] + 1.0).abs() < 1e-10);
    let dev = exact
        .im_g
        .iter()
        .zip(&trotter.im_g)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(dev < 0.01, "{dev}");
}

#[test]
fn lehmann_spectrum_matches_exact_time_trace() {
    let p = representative();
    let s = ed::lehmann_greens(&p, Spin::Up).unwrap();
    let g = TimeGrid {
        t_max: 5.0,
        n_steps: 25,
    };
    let trace = time_evolution::greens_time(&p, &g, Backend::Exact, None).unwrap();
    for (k, &t) in trace.times.iter().enumerate() {
        let gt = s.time_greens(t);
        assert!((gt.re - trace.re_g[k]).abs() < 1e-9, "t = {t}");
        assert!((gt.im - trace.im_g[k]).abs() < 1e-9, "t = {t}");
    }
}
