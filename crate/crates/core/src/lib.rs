//! Position-aware RIS beam configuration and conservative power control for
//! URLLC downlinks.
//!
//! A base station reaches a mobile device through a ceiling-mounted
//! reconfigurable intelligent surface (RIS). The device position is only known
//! through a Gaussian tracking estimate, so the beam is pointed at the
//! estimated position and the transmit power is chosen so that the outage
//! probability stays below `1 - p_s` despite both fading and positioning
//! errors.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: coordinate frames, beam-cone rotation and the projection
//!   of the illuminated cone onto the floor.
//! - [`array`]: element layout, steering vectors, phase profiles, array
//!   factor evaluation and beamwidths.
//! - [`channel`]: path loss, Rician fading, the product-fading tail quantile
//!   and SNR assembly.
//! - [`stats`]: the Gaussian position belief and its mass inside an ellipse.
//! - [`control`]: minimum SNR, the reliable AF gain search and the bound-based
//!   power decision.
//! - [`montecarlo`]: the empirical oracle used to validate the decision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod channel;
pub mod control;
pub mod geometry;
pub mod montecarlo;
pub mod numeric;
pub mod scenario;
pub mod special;
pub mod stats;
pub mod units;

mod error;

pub use error::{Error, Result};
pub use scenario::Scenario;
