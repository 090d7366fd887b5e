//! Thermal-noise modelling for microwave cavity modes that are temporarily
//! over-coupled to an active cold load.
//!
//! The crate is organised bottom-up:
//!
//! * [`noise`]: photon occupancy, lossy-link transforms and the
//!   weighted-average mode temperature of a cavity coupled to several baths.
//! * [`receiver`]: four-parameter LNA noise model, Friis cascade, Y-factor
//!   and the receiver noise-power reduction `ΔP` with its inversion.
//! * [`dynamics`]: the photon-number rate equation under a switched port
//!   configuration (cool, disconnect, interrogate).
//! * [`synth`]: seeded synthetic receiver traces whose variance follows the
//!   instantaneous system noise temperature.
//! * [`analysis`]: artifact subtraction, boxcar noise extraction, Welch PSD,
//!   windowed `ΔP(t)` and bi-exponential warm-up fits.
//! * [`pipeline`]: the simulate → analyze chain used by the command line
//!   tool and the closure tests.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod constants;
pub mod dynamics;
mod error;
pub mod exec;
pub mod io;
pub mod noise;
pub mod pipeline;
pub mod receiver;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
