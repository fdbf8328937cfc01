//! Single-link 802.11ax simulation of paced VR video traffic, and analysis of
//! packet traces captured from such streams.
//!
//! The simulator models one AP sending video downlink to one client that
//! sends controller messages uplink. Video frames are split into batches that a
//! paced sender releases on a fixed grid. The MAC runs EDCA with RTS/CTS,
//! A-MPDU aggregation and BlockAck-driven selective retransmission.

pub mod config;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod phy;
pub mod report;
pub mod trace;
pub mod traffic;

pub use config::{MacConfig, PhyConfig, SimConfig, TrafficConfig};
pub use engine::{run_all, run_simulation, run_sweep, RunResult, Simulation, SweepAxis};
pub use error::{Error, Result};
