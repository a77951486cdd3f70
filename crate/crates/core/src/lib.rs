//! Multicast service-chain control over distributed computing networks.
//!
//! Packets of a service are processed through an ordered chain of functions,
//! routed hop by hop and duplicated in-network so that every destination of
//! the set receives one copy. The crate provides the queueing model, the
//! max-weight drift-plus-penalty policy with joint processing, routing and
//! duplication decisions, the unicast and stationary randomized baselines, a
//! time-slotted simulator and independent audit oracles.
//!
//! Numeric code is generic over [`Scalar`] (`f32`, `f64`); the aliases below
//! fix it to `f64`.

pub mod audit;
pub mod engine;
pub mod error;
pub mod model;
pub mod policy;
pub mod queueing;
pub mod scalar;
pub mod scenarios;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NetworkModel = model::NetworkModel<f64>;
pub type QueueTable = queueing::QueueTable<f64>;
pub type FlowAssignment = queueing::FlowAssignment<f64>;
pub type SlotLedger = queueing::SlotLedger<f64>;
pub type DeliveryLog = queueing::DeliveryLog<f64>;
pub type Simulator<'m> = engine::Simulator<'m, f64>;

pub type NetworkModel32 = model::NetworkModel<f32>;
pub type QueueTable32 = queueing::QueueTable<f32>;

/// Builds the `f64` model of a scenario.
pub fn build(config: &model::ScenarioConfig) -> Result<NetworkModel> {
    model::build_network(config)
}

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
