//! Capillary multi-path routing and the Redundancy Overall Requirement.
//!
//! - [`netmodel`]: networks, flow patterns, routability.
//! - [`manetgen`]: random-walk MANET sample ensembles.
//! - [`lpcore`]: the bounded-variable simplex solver and flow LP builder.
//! - [`capillary`]: layered min-max routing with bottleneck hunting.
//! - [`fecsizing`]: binomial FEC block sizing.
//! - [`rormetric`]: real-time and large-block ROR ratings.

pub mod capillary;
pub mod fecsizing;
pub mod lpcore;
pub mod manetgen;
mod maxflow;
pub mod netmodel;
pub mod rormetric;

pub use capillary::{build_capillary, CapillaryError, CapillaryResult, LayerResult};
pub use fecsizing::{FecError, FecProfile, FecSizer};
pub use netmodel::{FlowPattern, Network, NetworkError};
pub use rormetric::{ror_offline, ror_realtime, RorMode, RorReport};
