//! Nine-mode sinusoidal shear-flow model, echo state network forecasting of its
//! transitions, and the statistics used to compare the two.
//!
//! * [`mfe`] integrates the Moehlis–Faisst–Eckhardt amplitude equations.
//! * [`esn`] builds, trains and runs the reservoir network.
//! * [`experiments`] measures lifetimes, ensemble transition probabilities and
//!   laminarization-probability curves against either source.
//! * [`harness`] holds configuration, file formats and the command drivers used
//!   by the `shearflow` binary.

pub mod esn;
pub mod experiments;
pub mod harness;
pub mod mfe;
pub mod rng;
pub mod stats;


pub use mfe::{Amplitudes, DomainGeometry, MfeError, MfeSystem, Trajectory};
pub use esn::{EsnError, EsnHyperparameters, EsnModel, ReservoirState};
