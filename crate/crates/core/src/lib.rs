//! Classical workbench for the two-site Hubbard-Holstein impurity problem.
//!
//! The crate covers the whole pipeline: Pauli algebra and a dense statevector
//! engine, the Jordan-Wigner/boson-qubit encoding of the model, an exact
//! diagonalization oracle, the two-angle VQE scan, Krylov (Lanczos) chains
//! built either directly or from variationally prepared states, continued
//! fraction spectra, the two-site DMFT loop, and time-domain Green's
//! functions from exact, Trotter and variational (McLachlan) evolution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dmft;
pub mod ed;
pub mod error;
pub mod greens;
pub mod kvqa;
pub mod linalg;
pub mod model;
pub mod pauli;
pub mod rng;
pub mod statevector;
pub mod time_evolution;
pub mod vqe;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use greens::{FrequencyGrid, KrylovChain, Pole, Side, Spectrum};
pub use model::{HamiltonianForm, ModelParams, MuConvention};
pub use num_complex::Complex64;
pub use pauli::{Pauli, PauliString, PauliSum, PauliTerm, Phase};
pub use statevector::{Circuit, Gate, NoiseSpec, QuantumState};
