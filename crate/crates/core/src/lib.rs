//! Collective spin squeezing of an atomic ensemble driven by the Faraday
//! atom-light interface, for different single-atom ("qudit") preparations.
//!
//! - [`spin`]: spin-`f` operators, fiducial/coupled/third states, local maps.
//! - [`gaussian`]: Holstein-Primakoff Gaussian engine and the squeezing metric.
//! - [`decoherence`]: optical-pumping channel acting on the Gaussian state.
//! - [`protocol`]: time-stepped protocols, peak search, preparation sweeps.
//! - [`oracle`]: exact few-atom reference computations.
//! - [`validate`]: self-check suite used by the command-line `validate`.

pub mod decoherence;
pub mod error;
pub mod gaussian;
pub mod oracle;
pub mod protocol;
pub mod spin;
pub mod validate;

pub use decoherence::{ChannelConfig, PumpingRates, ThirdStatePolicy};
pub use error::{Error, Result};
pub use gaussian::{GaussianState, MeasurementStrength};
pub use protocol::{FinalMap, Peak, PeakRow, ProtocolConfig, ProtocolKind, Sample, SqueezingTrace};
pub use spin::{EmbeddedTriple, Fiducial, Preparation, SpinQuantum, SpinState};
