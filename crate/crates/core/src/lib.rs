//! Degree-limited scheduling for multihop satellite networks.
//!
//! Every slot the controller observes the data backlogs `Q`, the virtual
//! power queues `Z` and the sampled link states, then decides
//!
//! * how much new traffic each node admits per destination,
//! * which symmetric inter-satellite links to switch on under the per-node
//!   antenna (degree) limit, and with what transmit power,
//! * which commodity each active link serves (backpressure).
//!
//! [`engine`] runs that loop over a horizon, [`analysis`] evaluates the
//! drift constant and utility-gap bound, and [`experiment`] drives V sweeps with
//! deterministic CSV output.

pub mod analysis;
pub mod channel;
pub mod config;
pub mod dlsa;
pub mod engine;
mod error;
pub mod model;
pub mod experiment;

pub use error::{Error, Result};
pub use model::{Graph, NetworkConfig, NodeId, RateSpec, UtilitySpec, Violation};
