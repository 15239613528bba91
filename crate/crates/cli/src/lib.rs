//! Command-line orchestration: load a run configuration, apply flag
//! overrides, run one pipeline stage and write its CSV files plus
//! `manifest.json` into the output directory.

pub mod args;
pub mod error;
pub mod format;
pub mod manifest;
pub mod stages;

use std::fs;
use std::path::{Path, PathBuf};

use hhdmft_core::dmft::SolverKind;
use hhdmft_core::kvqa::KrylovMode;
use hhdmft_core::model::{self, ModelParams, MuConvention};
use hhdmft_core::time_evolution::{parse_ordering, validate_ordering};
use hhdmft_core::vqe::EvalMode;
use hhdmft_core::{parse_config, Error, HamiltonianForm, RunConfig};

pub use args::{Cli, Command, CommonArgs, ModeArg, TimeArgs};
pub use error::{CliError, CliResult};
pub use manifest::{validate_manifest, Manifest};
pub use stages::{Artifact, StageOutput};

pub const MANIFEST: &str = "manifest.json";
pub const PLOT_SCRIPT: &str = "plot.py";

/// The configuration file if given, else defaults around the representative model.
pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(CliError::io(path))?;
            parse_config(&text).map_err(CliError::Config)
        }
        None => RunConfig::for_model(&ModelParams::representative(), MuConvention::default())
            .map_err(CliError::Config),
    }
}

fn config_error(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config(Error::Config {
        path: path.to_string(),
        message: message.into(),
    })
}

/// Fold command-line flags into the configuration and validate the result,
/// so that the manifest echo describes exactly what ran.
pub fn apply_overrides(
    mut cfg: RunConfig,
    common: &CommonArgs,
    cmd: &Command,
) -> CliResult<RunConfig> {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(shots) = common.shots {
        cfg.noise.shots = shots;
    }
    if let Some(flip) = common.readout_flip {
        cfg.noise.readout_flip = flip;
    }
    if let Some(mu) = common.mu {
        cfg.model.mu = mu;
        cfg.model.mu_convention = MuConvention::Explicit;
    }
    if let Some(mode) = common.mode {
        match mode {
            ModeArg::Exact => {
                cfg.vqe.mode = EvalMode::Exact;
                if cfg.kvqa.mode == KrylovMode::VariationalSampled {
                    cfg.kvqa.mode = KrylovMode::VariationalExact;
                }
                if cfg.dmft.solver == SolverKind::KvqaSampled {
                    cfg.dmft.solver = SolverKind::KvqaVariational;
                }
            }
            ModeArg::Sampled => {
                cfg.vqe.mode = EvalMode::Sampled;
                cfg.kvqa.mode = KrylovMode::VariationalSampled;
                if matches!(cmd, Command::Dmft { .. }) {
                    cfg.dmft.solver = SolverKind::KvqaSampled;
                }
            }
        }
    }
    if let Some(t) = cmd.time_args() {
        if let Some(n) = t.n_t {
            match cmd {
                Command::Vha(_) => cfg.time.vha_layers = n,
                _ => cfg.time.n_t = n,
            }
        }
        if let Some(text) = &t.ordering {
            let ord =
                parse_ordering(text).map_err(|e| config_error("time.ordering", e.to_string()))?;
            cfg.time.ordering = Some(ord);
        }
    }
    let cfg = parse_config(&cfg.to_toml()).map_err(CliError::Config)?;
    if let Some(ord) = &cfg.time.ordering {
        let h = model::build_hamiltonian(&cfg.params(), HamiltonianForm::Complete)
            .map_err(CliError::Config)?;
        validate_ordering(ord, h.len())
            .map_err(|e| config_error("time.ordering", e.to_string()))?;
    }
    Ok(cfg)
}

/// Results of one invocation before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: Manifest,
    pub artifacts: Vec<Artifact>,
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> CliResult<RunOutput> {
    let outputs = stages::execute(cmd, cfg)?;
    let mut manifest = Manifest::new(cmd.name(), cfg);
    let mut artifacts = Vec::new();
    for out in outputs {
        manifest.results.insert(out.name.to_string(), out.results);
        manifest.timings_s.insert(out.name.to_string(), out.seconds);
        artifacts.extend(out.artifacts);
    }
    manifest.artifacts = artifacts.iter().map(|a| a.name.clone()).collect();
    Ok(RunOutput {
        manifest,
        artifacts,
    })
}

/// A matplotlib script that plots every emitted CSV file: the first column
/// on the x axis against each numeric column after it.
pub fn plot_script(artifacts: &[Artifact]) -> String {
    let files: Vec<String> = artifacts
        .iter()
        .map(|a| format!("    {:?},", a.name))
        .collect();
    format!(
        r#"import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = [
{}
]

for name in FILES:
    with open(os.path.join(HERE, name)) as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    numeric = []
    for k in range(len(header)):
        try:
            numeric.append([float(r[k]) for r in body])
        except ValueError:
            numeric.append(None)
    if numeric[0] is None or len(body) < 2:
        continue
    fig, ax = plt.subplots()
    for k in range(1, len(header)):
        if numeric[k] is not None:
            ax.plot(numeric[0], numeric[k], label=header[k])
    ax.set_xlabel(header[0])
    ax.legend()
    ax.set_title(name)
    fig.savefig(os.path.join(HERE, name.replace(".csv", ".png")), dpi=120)
    plt.close(fig)
"#,
        files.join("\n")
    )
}

/// Write artifacts, then the manifest; on any failure the files written so
/// far are removed again.
pub fn emit_outputs(run: &RunOutput, dir: &Path, emit_plots: bool) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut files: Vec<(String, String)> = run
        .artifacts
        .iter()
        .map(|a| (a.name.clone(), a.contents.clone()))
        .collect();
    if emit_plots {
        files.push((PLOT_SCRIPT.to_string(), plot_script(&run.artifacts)));
    }
    files.push((MANIFEST.to_string(), format::to_json(&run.manifest)));
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(&name);
        if let Err(e) = fs::write(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(CliError::Io { path, source: e });
        }
        written.push(path);
    }
    Ok(written)
}

/// Parse-to-files pipeline behind the binary.
pub fn run(cli: &Cli) -> CliResult<RunOutput> {
    let cfg = load_config(cli.common.config.as_deref())?;
    let cfg = apply_overrides(cfg, &cli.common, &cli.command)?;
    let out = execute(&cli.command, &cfg)?;
    emit_outputs(&out, &cfg.output_dir, cli.common.emit_plots)?;
    Ok(out)
}
