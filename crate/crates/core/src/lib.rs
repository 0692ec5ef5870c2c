//! Latency-minimizing resource allocation for a double-IRS, wireless-powered
//! IoT uplink served over a sub-6 GHz and a mmWave band.

pub mod doppler;
pub mod downlink;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod linkmetrics;
pub mod outer;
pub mod scenario;
pub mod uplink;

pub use error::{Error, Result};
