//! Smooth, band-limited control pulses for interacting spin systems.
//!
//! Pulses are expanded in a handful of harmonics `sin(nΩt)` of a fundamental
//! frequency, which makes the Hamiltonian periodic. The propagator is then
//! reconstructed from the eigensystem of the truncated Floquet operator, and
//! exact derivatives with respect to pulse amplitudes and `Ω` follow from
//! non-degenerate perturbation theory on that operator.
//!
//! Module map:
//!
//! * [`spinsys`]: Pauli algebra, spin Hamiltonians, product states, reduced
//!   densities and entanglement measures.
//! * [`floquet`]: control model, Floquet operator assembly, Brillouin-zone
//!   eigensystem, propagator and its time derivatives.
//! * [`ode`]: adaptive Runge-Kutta oracle for the propagator.
//! * [`varcalc`]: first and second derivatives of quasi-energies, Floquet
//!   modes and the propagator.
//! * [`checks`]: oracle suites used by tests and the validation command.
//! * [`objectives`]: gate, tangle-plateau, chain and ensemble functionals with
//!   exact gradients.
//! * [`optimizer`]: line-search ascent, penalty scheduling and minimal-time
//!   search.

pub mod checks;
pub mod error;
pub mod floquet;
pub mod jet;
pub mod linalg;
pub mod objectives;
pub mod ode;
pub mod optimizer;
pub mod rng;
pub mod spinsys;
pub mod varcalc;

pub use error::{Error, Result};
pub use linalg::{Operator, StateVector, C64};
