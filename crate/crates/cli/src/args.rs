use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "hhdmft",
    version,
    about = "Two-site Hubbard-Holstein DMFT workbench"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration; the representative model is used without one.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Expectation values from exact amplitudes or from sampled shots.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,

    #[arg(long, global = true, value_name = "N")]
    pub shots: Option<u64>,

    #[arg(long = "readout-flip", global = true, value_name = "P")]
    pub readout_flip: Option<f64>,

    /// Explicit chemical potential (switches the convention to explicit).
    #[arg(long, global = true, value_name = "MU", allow_negative_numbers = true)]
    pub mu: Option<f64>,

    /// Write a matplotlib script next to the CSV files.
    #[arg(long = "emit-plots", global = true)]
    pub emit_plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TimeArgs {
    /// Trotter steps (or VHA layers) per unit time.
    #[arg(long = "nt", value_name = "N")]
    pub n_t: Option<usize>,

    /// Term ordering as a comma-separated permutation, e.g. `2,0,1`.
    #[arg(long, value_name = "PERM")]
    pub ordering: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Exact diagonalization: ground energy, μ and Lehmann poles.
    Ed,
    /// Two-angle ansatz energy landscape and its minimum.
    Vqe,
    /// Krylov chains from variationally prepared states.
    Kvqa,
    /// Spectral function on the frequency grid.
    Spectrum,
    /// Two-site DMFT self-consistency.
    Dmft {
        /// Tabulate Z and sqrt(Z·M2) over the configured V range.
        #[arg(long)]
        scan: bool,
        /// Run the damped fixed-point iteration (default when neither flag is given).
        #[arg(long)]
        iterate: bool,
    },
    /// Trotterized time-domain Green's function against exact evolution.
    Trotter(TimeArgs),
    /// Variational Hamiltonian ansatz evolution.
    Vha(TimeArgs),
    /// Exact, Trotter and KVQA Green's functions side by side in time.
    Compare(TimeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ed => "ed",
            Command::Vqe => "vqe",
            Command::Kvqa => "kvqa",
            Command::Spectrum => "spectrum",
            Command::Dmft { .. } => "dmft",
            Command::Trotter(_) => "trotter",
            Command::Vha(_) => "vha",
            Command::Compare(_) => "compare",
        }
    }

    pub fn time_args(&self) -> Option<&TimeArgs> {
        match self {
            Command::Trotter(t) | Command::Vha(t) | Command::Compare(t) => Some(t),
            _ => None,
        }
    }
}
