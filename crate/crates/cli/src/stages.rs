//! One function per subcommand. Each returns its manifest results and the
//! CSV artifacts it produced; nothing touches the filesystem here.

use std::time::Instant;

use hhdmft_core::config::SpectrumSolver;
use hhdmft_core::dmft::{self, DmftScan, SolverKind};
use hhdmft_core::ed;
use hhdmft_core::greens::{poles_weights, spectral_function, KrylovChain, Spectrum};
use hhdmft_core::kvqa::{self, HoleSide, KrylovMode, KrylovStep, KvqaRun, Termination};
use hhdmft_core::model::{self, Spin};
use hhdmft_core::time_evolution::{self, Backend, TimeTrace};
use hhdmft_core::vqe::{self, EvalMode};
use hhdmft_core::{HamiltonianForm, NoiseSpec, RunConfig, Side};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Command;
use crate::error::{CliError, CliResult};
use crate::format::{Cell, Csv};

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn csv(name: &str, csv: &Csv) -> Self {
        Self {
            name: name.to_string(),
            contents: csv.render(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageOutput {
    pub name: &'static str,
    pub results: Value,
    pub artifacts: Vec<Artifact>,
    pub seconds: f64,
}

fn timed(
    name: &'static str,
    f: impl FnOnce() -> CliResult<(Value, Vec<Artifact>)>,
) -> CliResult<StageOutput> {
    let start = Instant::now();
    let (results, artifacts) = f()?;
    Ok(StageOutput {
        name,
        results,
        artifacts,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types serialize to JSON")
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> CliResult<Vec<StageOutput>> {
    match cmd {
        Command::Ed => Ok(vec![timed("ed", || ed_stage(cfg))?]),
        Command::Vqe => Ok(vec![timed("vqe", || vqe_stage(cfg))?]),
        Command::Kvqa => Ok(vec![timed("kvqa", || kvqa_stage(cfg))?]),
        Command::Spectrum => Ok(vec![timed("spectrum", || spectrum_stage(cfg))?]),
        Command::Dmft { scan, iterate } => {
            let mut out = Vec::new();
            if *iterate || !*scan {
                out.push(timed("dmft", || dmft_iterate_stage(cfg))?);
            }
            if *scan {
                out.push(timed("dmft_scan", || dmft_scan_stage(cfg))?);
            }
            Ok(out)
        }
        Command::Trotter(_) => Ok(vec![timed("trotter", || trotter_stage(cfg))?]),
        Command::Vha(_) => Ok(vec![timed("vha", || vha_stage(cfg))?]),
        Command::Compare(_) => Ok(vec![timed("compare", || compare_stage(cfg))?]),
    }
}

fn poles_csv(s: &Spectrum) -> Csv {
    let mut csv = Csv::new(&["omega", "weight"]);
    for p in &s.poles {
        csv.row(vec![p.omega.into(), p.weight.into()]);
    }
    csv
}

fn spectrum_summary(s: &Spectrum) -> Value {
    json!({
        "gap": s.gap(),
        "total_weight": s.total_weight(),
        "poles": to_value(&s.poles),
    })
}

fn ed_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let p = cfg.params();
    let stage = CliError::stage;
    let h = model::build_full_hamiltonian(&p).map_err(stage("ed"))?;
    let es = ed::diagonalize(&h).map_err(stage("ed"))?;
    let e0 = es.ground_energy();
    let spectrum = ed::lehmann_greens(&p, Spin::Up)
        .map_err(stage("ed"))?
        .merged(1e-9, 1e-12);
    let results = json!({
        "e0": e0,
        "mu": p.mu,
        "mu_convention": cfg.model.mu_convention.label(),
        "dimension": p.dim(),
        "ground_multiplicity": es.ground_multiplicity(ed::DEGENERACY_TOL),
        "impurity_occupation": model::two_electron_impurity_occupation(&p).ok(),
        "spectrum": spectrum_summary(&spectrum),
    });
    Ok((
        results,
        vec![Artifact::csv("ed_poles.csv", &poles_csv(&spectrum))],
    ))
}

fn noise_for(cfg: &RunConfig, sampled: bool) -> Option<NoiseSpec> {
    sampled.then(|| cfg.noise_spec())
}

fn vqe_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let p = cfg.params();
    let stage = CliError::stage("vqe");
    let h = model::build_pauli_hamiltonian(&p).map_err(CliError::stage("vqe"))?;
    let grid = cfg.vqe.grid();
    let noise = noise_for(cfg, cfg.vqe.mode == EvalMode::Sampled);
    let (est, land) =
        vqe::find_ground_state(&h, &grid, cfg.vqe.mode, noise.as_ref()).map_err(stage)?;
    let mut csv = Csv::new(&["theta0", "theta1", "E"]);
    for i in 0..grid.theta0_points {
        for j in 0..grid.theta1_points {
            csv.row(vec![
                grid.theta0(i).into(),
                grid.theta1(j).into(),
                land.get(i, j).into(),
            ]);
        }
    }
    let (g0, g1) = est.angles.gate_angles();
    let results = json!({
        "mode": cfg.vqe.mode,
        "energy": est.energy,
        "theta0": est.angles.theta0,
        "theta1": est.angles.theta1,
        "gate_theta0": g0,
        "gate_theta1": g1,
        "grid_energy": est.grid_energy,
        "grid_theta0": est.grid_angles.theta0,
        "grid_theta1": est.grid_angles.theta1,
        "refined": est.refined,
        "landscape_min": land.min(),
    });
    Ok((results, vec![Artifact::csv("landscape.csv", &csv)]))
}

fn side_label(side: Side) -> &'static str {
    match side {
        Side::Particle => "particle",
        Side::Hole => "hole",
    }
}

fn chain_json(chain: &KrylovChain, termination: Option<&Termination>) -> Value {
    json!({
        "a": chain.a,
        "b2": chain.b2,
        "prefactor": chain.prefactor,
        "e0": chain.e0,
        "termination": termination.map(to_value),
        "diagnostic": termination.map(Termination::diagnostic),
    })
}

fn step_json(s: &KrylovStep) -> Value {
    json!({
        "n": s.n,
        "angles": s.angles,
        "grid_cost": s.grid_cost,
        "cost": s.cost,
        "epsilons": s.epsilons,
        "alternate": s.alternate.as_ref().map(to_value),
    })
}

fn chain_rows(csv: &mut Csv, side: Side, chain: &KrylovChain) {
    for n in 0..chain.a.len() {
        let b2 = if n == 0 {
            f64::NAN
        } else {
            chain.b2.get(n - 1).copied().unwrap_or(f64::NAN)
        };
        csv.row(vec![
            side_label(side).into(),
            n.into(),
            chain.a[n].into(),
            b2.into(),
        ]);
    }
}

fn step_rows(csv: &mut Csv, run: &KvqaRun) {
    for s in &run.steps {
        let beta1 = s.angles.get(2).copied().unwrap_or(s.angles[1]);
        csv.row(vec![
            side_label(run.side).into(),
            s.n.into(),
            s.grid_cost.into(),
            s.cost.into(),
            s.epsilons[0].into(),
            s.epsilons[1].into(),
            s.epsilons[2].into(),
            s.angles[0].into(),
            s.angles[1].into(),
            beta1.into(),
        ]);
    }
}

fn surface_artifacts(run: &KvqaRun) -> Vec<Artifact> {
    run.steps
        .iter()
        .map(|s| {
            let mut csv = Csv::new(&["alpha", "beta0", "cost"]);
            let surf = &s.surface;
            for i in 0..surf.points {
                for j in 0..surf.points {
                    csv.row(vec![
                        surf.angle(i).into(),
                        surf.angle(j).into(),
                        surf.get(i, j).into(),
                    ]);
                }
            }
            Artifact::csv(
                &format!("kvqa_surface_{}_{}.csv", side_label(run.side), s.n),
                &csv,
            )
        })
        .collect()
}

fn run_json(run: &KvqaRun) -> Value {
    json!({
        "mode": run.mode.label(),
        "achieved_depth": run.achieved_depth(),
        "chain": chain_json(&run.chain, Some(&run.termination)),
        "steps": run.steps.iter().map(step_json).collect::<Vec<_>>(),
    })
}

struct KvqaOutcome {
    e0: f64,
    greens: kvqa::KvqaGreens,
}

fn run_kvqa(cfg: &RunConfig, stage: &'static str) -> CliResult<KvqaOutcome> {
    let p = cfg.params();
    let h =
        model::build_hamiltonian(&p, HamiltonianForm::Complete).map_err(CliError::stage(stage))?;
    let (e0, gs) = kvqa::exact_ground_state(&h).map_err(CliError::stage(stage))?;
    let noise = noise_for(cfg, cfg.kvqa.mode == KrylovMode::VariationalSampled);
    let greens = kvqa::kvqa_greens(
        &gs,
        &h,
        cfg.spectrum.depth,
        &cfg.kvqa,
        noise.as_ref(),
        cfg.spectrum.hole_side,
    )
    .map_err(CliError::stage(stage))?;
    Ok(KvqaOutcome { e0, greens })
}

fn kvqa_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let out = run_kvqa(cfg, "kvqa")?;
    let runs: Vec<&KvqaRun> = std::iter::once(&out.greens.particle)
        .chain(&out.greens.hole)
        .collect();
    let mut chains = Csv::new(&["side", "n", "a", "b2"]);
    let mut steps = Csv::new(&[
        "side",
        "n",
        "grid_cost",
        "cost",
        "eps0",
        "eps1",
        "eps2",
        "alpha",
        "beta0",
        "beta1",
    ]);
    let mut artifacts = Vec::new();
    for run in &runs {
        chain_rows(&mut chains, run.side, &run.chain);
        step_rows(&mut steps, run);
        artifacts.extend(surface_artifacts(run));
    }
    artifacts.insert(
        0,
        Artifact::csv("kvqa_poles.csv", &poles_csv(&out.greens.spectrum)),
    );
    artifacts.insert(0, Artifact::csv("kvqa_steps.csv", &steps));
    artifacts.insert(0, Artifact::csv("kvqa_chain.csv", &chains));
    let results = json!({
        "mode": cfg.kvqa.mode.label(),
        "depth": cfg.spectrum.depth,
        "hole_side": cfg.spectrum.hole_side,
        "e0_exact": out.e0,
        "particle": run_json(&out.greens.particle),
        "hole": out.greens.hole.as_ref().map(run_json),
        "spectrum": spectrum_summary(&out.greens.spectrum),
    });
    Ok((results, artifacts))
}

/// Spectrum from the solver selected in `[spectrum]`.
pub fn solve_spectrum(cfg: &RunConfig, stage: &'static str) -> CliResult<Spectrum> {
    let p = cfg.params();
    let err = CliError::stage;
    let depth = cfg.spectrum.depth;
    match cfg.spectrum.solver {
        SpectrumSolver::Lehmann => Ok(ed::lehmann_greens(&p, Spin::Up)
            .map_err(err(stage))?
            .merged(1e-9, 1e-12)),
        SpectrumSolver::Lanczos => {
            let chains = ed::exact_chains(&p, Spin::Up, depth).map_err(err(stage))?;
            let particle = poles_weights(&chains.particle).map_err(err(stage))?;
            Ok(match cfg.spectrum.hole_side {
                HoleSide::Mirror => particle.union(&particle.mirrored()),
                HoleSide::Independent => {
                    particle.union(&poles_weights(&chains.hole).map_err(err(stage))?)
                }
            })
        }
        SpectrumSolver::Kvqa => Ok(run_kvqa(cfg, stage)?.greens.spectrum),
    }
}

fn spectrum_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let s = solve_spectrum(cfg, "spectrum")?;
    let points =
        spectral_function(&s, &cfg.spectrum.grid()).map_err(CliError::stage("spectrum"))?;
    let mut csv = Csv::new(&["omega", "A", "ReG", "ImG"]);
    for pt in &points {
        csv.row(vec![
            pt.omega.into(),
            pt.a.into(),
            pt.re_g.into(),
            pt.im_g.into(),
        ]);
    }
    let mut results = spectrum_summary(&s);
    results["solver"] = to_value(&cfg.spectrum.solver);
    Ok((
        results,
        vec![
            Artifact::csv("spectrum.csv", &csv),
            Artifact::csv("poles.csv", &poles_csv(&s)),
        ],
    ))
}

fn dmft_noise(cfg: &RunConfig) -> Option<NoiseSpec> {
    noise_for(cfg, cfg.dmft.solver == SolverKind::KvqaSampled)
}

fn dmft_iterate_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let noise = dmft_noise(cfg);
    let r = dmft::run_dmft(
        &cfg.params(),
        cfg.model.mu_convention,
        &cfg.dmft,
        &cfg.kvqa,
        noise.as_ref(),
    )
    .map_err(CliError::stage("dmft"))?;
    let mut csv = Csv::new(&["iter", "V", "Z"]);
    for (k, s) in r.history.iter().enumerate() {
        csv.row(vec![k.into(), s.v.into(), s.z.into()]);
    }
    let results = json!({
        "solver": cfg.dmft.solver.label(),
        "v_star": r.v_star,
        "z_star": r.z_star,
        "converged": r.converged,
        "iterations": r.history.len(),
        "history": to_value(&r.history),
    });
    Ok((results, vec![Artifact::csv("dmft_history.csv", &csv)]))
}

/// Scan over the `[scan]` range with the configured solver.
pub fn run_scan(cfg: &RunConfig) -> CliResult<DmftScan> {
    let vs = dmft::scan_grid(cfg.scan.v_min, cfg.scan.v_max, cfg.scan.n_points)
        .map_err(CliError::stage("dmft_scan"))?;
    let noise = dmft_noise(cfg);
    dmft::dmft_scan(
        &cfg.params(),
        cfg.model.mu_convention,
        &cfg.dmft,
        &cfg.kvqa,
        noise.as_ref(),
        &vs,
    )
    .map_err(CliError::stage("dmft_scan"))
}

fn dmft_scan_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let scan = run_scan(cfg)?;
    let mut csv = Csv::new(&["V", "Z", "sqrtZM2"]);
    for pt in &scan.points {
        csv.row(vec![pt.v.into(), pt.z.into(), pt.sqrt_zm2.into()]);
    }
    let results = json!({
        "solver": cfg.dmft.solver.label(),
        "crossing": scan.crossing,
        "points": to_value(&scan.points),
    });
    Ok((results, vec![Artifact::csv("dmft_scan.csv", &csv)]))
}

fn exact_trace(cfg: &RunConfig, stage: &'static str) -> CliResult<TimeTrace> {
    time_evolution::greens_time(&cfg.params(), &cfg.time.grid(), Backend::Exact, None)
        .map_err(CliError::stage(stage))
}

fn trace_csv(trace: &TimeTrace, exact: &TimeTrace) -> Csv {
    let mut csv = Csv::new(&["t", "ReG", "ImG", "ReG_exact", "ImG_exact"]);
    for k in 0..trace.times.len() {
        csv.row(vec![
            trace.times[k].into(),
            trace.re_g[k].into(),
            trace.im_g[k].into(),
            exact.re_g[k].into(),
            exact.im_g[k].into(),
        ]);
    }
    csv
}

fn trotter_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let exact = exact_trace(cfg, "trotter")?;
    let trace = time_evolution::greens_time(
        &cfg.params(),
        &cfg.time.grid(),
        Backend::Trotter { n_t: cfg.time.n_t },
        cfg.time.ordering.as_deref(),
    )
    .map_err(CliError::stage("trotter"))?;
    let results = json!({
        "n_t": cfg.time.n_t,
        "ordering": cfg.time.ordering,
        "max_abs_im_deviation": trace.max_abs_im_deviation(&exact),
    });
    Ok((
        results,
        vec![Artifact::csv("trotter.csv", &trace_csv(&trace, &exact))],
    ))
}

fn vha_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let exact = exact_trace(cfg, "vha")?;
    let r = time_evolution::vha_evolve(
        &cfg.params(),
        &cfg.time.grid(),
        cfg.time.vha_layers,
        cfg.time.ordering.as_deref(),
    )
    .map_err(CliError::stage("vha"))?;
    let n_params = r.plus.thetas.first().map_or(0, Vec::len);
    let mut columns = vec!["t".to_string(), "branch".to_string()];
    columns.extend((0..n_params).map(|k| format!("theta_{k}")));
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut thetas = Csv::new(&column_refs);
    for (branch, traj) in [("plus", &r.plus), ("minus", &r.minus)] {
        for (k, &t) in traj.times.iter().enumerate() {
            let mut row: Vec<Cell> = vec![t.into(), branch.into()];
            row.extend(traj.thetas[k].iter().map(|&x| Cell::from(x)));
            thetas.row(row);
        }
    }
    let results = json!({
        "layers": cfg.time.vha_layers,
        "ordering": r.plus.ordering,
        "max_residual_plus": r.plus.max_residual,
        "max_residual_minus": r.minus.max_residual,
        "max_abs_im_deviation": r.trace.max_abs_im_deviation(&exact),
    });
    Ok((
        results,
        vec![
            Artifact::csv("vha.csv", &trace_csv(&r.trace, &exact)),
            Artifact::csv("vha_thetas.csv", &thetas),
        ],
    ))
}

fn compare_stage(cfg: &RunConfig) -> CliResult<(Value, Vec<Artifact>)> {
    let exact = exact_trace(cfg, "compare")?;
    let trotter = time_evolution::greens_time(
        &cfg.params(),
        &cfg.time.grid(),
        Backend::Trotter { n_t: cfg.time.n_t },
        cfg.time.ordering.as_deref(),
    )
    .map_err(CliError::stage("compare"))?;
    let kvqa = run_kvqa(cfg, "compare")?;
    let spectrum = &kvqa.greens.spectrum;
    let mut csv = Csv::new(&[
        "t",
        "ReG_exact",
        "ImG_exact",
        "ReG_trotter",
        "ImG_trotter",
        "ReG_kvqa",
        "ImG_kvqa",
    ]);
    let mut kvqa_dev = 0.0f64;
    for (k, &t) in exact.times.iter().enumerate() {
        let g = spectrum.time_greens(t);
        kvqa_dev = kvqa_dev.max((g.im - exact.im_g[k]).abs());
        csv.row(vec![
            t.into(),
            exact.re_g[k].into(),
            exact.im_g[k].into(),
            trotter.re_g[k].into(),
            trotter.im_g[k].into(),
            g.re.into(),
            g.im.into(),
        ]);
    }
    let results = json!({
        "n_t": cfg.time.n_t,
        "kvqa_mode": cfg.kvqa.mode.label(),
        "kvqa_depth": cfg.spectrum.depth,
        "trotter_max_abs_im_deviation": trotter.max_abs_im_deviation(&exact),
        "kvqa_max_abs_im_deviation": kvqa_dev,
        "kvqa_spectrum": spectrum_summary(spectrum),
    });
    Ok((results, vec![Artifact::csv("compare.csv", &csv)]))
}
