//! Bandwidth allocation models (MAM and RDM) driven by a centralized
//! controller over an emulated OpenFlow-style fabric.
//!
//! The [`controller::Controller`] classifies each LSP request, asks the
//! [`bam`] module for an admission decision against the shared
//! [`network::NetworkState`], and mirrors the outcome into the
//! [`fabric::Fabric`]. [`scenario`] drives whole experiments and
//! [`metrics`] turns them into blocking, preemption and utilization series.

pub mod bam;
pub mod controller;
pub mod fabric;
pub mod invariants;
pub mod metrics;
pub mod network;
pub mod scenario;
pub mod units;

pub use units::{Bandwidth, SimTime};
