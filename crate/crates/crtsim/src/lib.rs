//! Simulator for a pair of flux qubits longitudinally coupled to a microwave
//! resonator, aimed at the regime where the counter-rotating part of a direct
//! qubit-qubit coupling lets a *single* photon excite *both* qubits at once.
//!
//! The crate is organised around the lab Hamiltonian
//!
//! ```text
//! H = ω a†a + ½ Σⱼ Δⱼ σᶻⱼ + Σⱼ gⱼ σᶻⱼ (a + a†) + J σˣ₁ σˣ₂ [+ χ₃ a†²a²]
//! ```
//!
//! with rates in GHz (equivalently rad/ns, ħ = 1) and times in ns.
//!
//! * [`qops`] — Hilbert space, operators, states, eigen/expm primitives.
//! * [`model`] — Hamiltonian builders, polaron transform, effective coupling.
//! * [`spectra`] — eigenspectrum scans, anticrossing location, interference.
//! * [`dynamics`] — Schrödinger/Landau-Zener/Lindblad time evolution.
//! * [`cli`] — config parsing, presets, CSV emission for the `crtsim` binary.

pub mod cli;
pub mod dynamics;
pub mod model;
pub mod qops;
pub mod spectra;

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;

/// Errors shared by the physics modules.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An adaptive integrator gave up before reaching the requested time.
    #[error("integration failure at t = {t_ns} ns: {reason}")]
    IntegrationFailure { t_ns: f64, reason: String },
    /// A computed output cell is NaN/Inf; emitting it would corrupt the CSV.
    #[error("non-finite value in output column '{column}', data row {row}")]
    NonFiniteOutput { column: String, row: usize },
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidArgument(msg.into())
}
