//! Self-guided quantum tomography simulator.
//!
//! An SPSA optimizer proposes candidate states and only ever sees
//! shot-noise-limited infidelity estimates against a hidden true state. The
//! iterate converges towards the true state (or the closest state inside a
//! restricted class) without reconstructing it from a full data set.
//!
//! - [`state`]: state vectors, parametrizations, fidelities, Haar sampling.
//! - [`measurement`]: the noisy infidelity oracle.
//! - [`spsa`]: gain schedules, gradient estimate and iteration.
//! - [`experiments`]: ensemble scenarios, percentiles and scaling fits.
//! - [`cli`]: the `sgqt` command line.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod measurement;
pub mod spsa;
pub mod state;

pub use error::{Result, SgqtError};
