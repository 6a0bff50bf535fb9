//! Baseband simulator for an FBMC/OQAM variant of the ISDB-T_B terrestrial
//! television physical layer.
//!
//! The transmit chain is QAM mapping, frequency framing with PRBS-modulated
//! pilots, OQAM staggering and a polyphase synthesis filter bank. The receive
//! chain mirrors it with an analysis bank, OQAM phase removal and one of
//! four channel estimators:
//!
//! * `linear`: pilot estimates interpolated linearly across frequency,
//! * `cubic`: natural cubic spline through the pilot estimates,
//! * `neural`: a per-carrier pair of perceptrons trained by the delta rule
//!   on a four-symbol training burst,
//! * `ideal`: the true channel frequency response (reference only).
//!
//! [`harness`] wires everything into a reproducible Monte-Carlo BER engine.

pub mod channel;
pub mod error;
pub mod estimation;
pub mod filterbank;
pub mod framing;
pub mod grid;
pub mod harness;
pub mod oqam;
pub mod protofilter;
pub mod sysconfig;

pub use error::{Error, Result};
pub use grid::Grid;
pub use num_complex::Complex64;
