//! Joint rate, power and beamforming optimization for multi-user MISO
//! downlinks that mix data users (source reconstruction) and semantic users
//! (task execution) under finite-blocklength coding.
//!
//! The weighted sum of per-user end-to-end distortions is minimized by
//! alternating a per-user source/channel rate search with a joint power and
//! beamforming solver that works on the dual virtual uplink.

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod checks;
pub mod distortion;
pub mod driver;
pub mod error;
pub mod link_sim;
pub mod numerics;
pub mod power_beam;
pub mod rate_opt;
pub mod report;
pub mod scenario;

pub use channel::{Allocation, LinkMetrics, SystemConfig, TaskKind, C64};
pub use distortion::{DistortionTable, LogisticRow};
pub use driver::{jrpb_solve, sweep_power, sweep_weights, zf_waterfilling_baseline, SweepPoint};
pub use error::{Error, Result};
pub use report::SolverReport;
pub use scenario::{Scenario, SolverSettings};
