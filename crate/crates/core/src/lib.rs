//! Simulation and analysis toolkit for frequency-index-modulated LFM waveforms
//! used jointly for SAR imaging and communication.

pub mod ambiguity;
pub mod comm;
pub mod config;
pub mod dsp;
pub mod echo;
pub mod error;
pub mod imaging;
pub mod io;
pub mod qam;
pub mod quality;
pub mod waveform;

pub use error::{Error, Result};

/// Propagation speed, m/s. The rounded value keeps nominal resolutions such
/// as `c / (2 Bw)` at their conventional figures (1.875 m at 80 MHz).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
