//! Instantaneous-frequency ridge estimation for multi-component AM-FM signals.
//!
//! Each spectrogram column is treated as a stream of Diracs blurred by the known
//! spectrogram kernel; positions are recovered off-grid with an annihilating filter
//! (Prony or total least squares) and linked into ridges across time.

pub mod bench;
pub mod error;
pub mod fri;
pub mod io;
pub mod modes;
pub mod ridge;
pub mod signal;
pub mod tf;

pub use error::{Error, Result};
