//! Simulation toolkit for a parametrically pumped two-mode non-Hermitian
//! resonator.
//!
//! The library models a pair of mechanical modes coupled by an anti-Stokes
//! parametric pump. In the Floquet frame of the pump the system is governed
//! by a 2x2 non-Hermitian effective Hamiltonian whose complex eigenvalues
//! form a two-sheeted Riemann surface over the pump controls (amplitude
//! `V_p`, detuning `delta_p`), with an exceptional point (EP) at the branch
//! point. The crate provides:
//!
//! - [`model`] — closed-form algebra: Hamiltonian construction, eigenvalues,
//!   susceptibility, steady states, eigenvectors, EP location, and
//!   continuity-based sheet tracking along parameter paths;
//! - [`plant`] — time-domain simulation: the reduced slow-envelope equations
//!   and the full second-order Newtonian model used as a rotating-wave
//!   cross-check;
//! - [`lockin`] — software lock-in and adaptive phase-locked loop: homodyne
//!   phase detection with a controlled phase shift, PID frequency actuation,
//!   and the closed-loop runner;
//! - [`paths`] — parametric loop construction and phase-shift scheduling,
//!   including deliberate sheet-switch programs;
//! - [`spectra`] — open-loop frequency sweeps and eigenvalue extraction by
//!   complex least-squares fitting; Riemann-surface reconstruction;
//! - [`ted`] — Zener thermoelastic-damping design utility;
//! - [`io`] — CSV/JSON schemas for all emitted artifacts;
//! - [`cli`] — configuration parsing and the command front end used by the
//!   `epcircle` binary.
//!
//! Start from the `examples/` directory: each major capability has one
//! runnable example (`cargo run --example ep_location`, etc.).

pub mod cli;
pub mod io;
pub mod lockin;
pub mod model;
pub mod paths;
pub mod plant;
pub mod spectra;
pub mod ted;
mod util;

pub use model::{Device, EffectiveHamiltonian, EigenPair, ModePair, PumpSettings, SheetLabel};
