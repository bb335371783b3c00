//! The full parameter set of a run.

use serde::{Deserialize, Serialize};

use crate::array::RisGeometry;
use crate::channel::LinkBudget;
use crate::control::{SearchConfig, UrllcRequirement};
use crate::error::invalid;
use crate::geometry::{cart_to_spherical, Cartesian3, Pointing, Spherical};
use crate::stats::{covariance_from_motion, PositionBelief};
use crate::units::{db_to_linear, linear_to_db, thermal_noise_watts};
use crate::Result;

/// Physical and protocol parameters shared by every decision of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ris: RisGeometry,
    /// Distance from the RIS plane to the floor, meters.
    pub height: f64,
    /// Side of the square room, meters.
    pub room_side: f64,
    pub bs_position: Cartesian3,
    pub link: LinkBudget,
    pub requirement: UrllcRequirement,
    pub search: SearchConfig,
    /// Positioning error deviation of the tracker, meters.
    pub sigma_u: f64,
}

impl Scenario {
    /// The reference industrial scenario: 10×10 half-wavelength RIS 25 m
    /// above the floor, 32-byte packets in 0.5 ms at five nines.
    pub fn reference() -> Self {
        let wavelength = 0.333;
        let bandwidth = 360e3;
        Self {
            ris: RisGeometry::new(100, wavelength / 2.0, wavelength).expect("valid array"),
            height: 25.0,
            room_side: 15.0,
            bs_position: Cartesian3::new(-5.0, -5.0, 5.0),
            link: LinkBudget {
                beta0: db_to_linear(-31.53),
                d0: 1.0,
                xi: 2.0,
                g_bu: db_to_linear(12.85),
                noise_power: thermal_noise_watts(bandwidth, 0.0),
                k_factor: db_to_linear(6.0),
            },
            requirement: UrllcRequirement::with_split(256.0, bandwidth, 0.5e-3, 0.99999, 0.9)
                .expect("valid requirement"),
            search: SearchConfig::default(),
            sigma_u: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.requirement.validate()?;
        self.search.validate()?;
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(invalid("height", format!("{} must be positive", self.height)));
        }
        if !(self.room_side > 0.0 && self.room_side.is_finite()) {
            return Err(invalid("room_side", format!("{} must be positive", self.room_side)));
        }
        if !(self.sigma_u > 0.0 && self.sigma_u.is_finite()) {
            return Err(invalid("sigma_u", format!("{} must be positive", self.sigma_u)));
        }
        if !self.bs_position.is_finite() || self.bs_position.norm() == 0.0 {
            return Err(invalid("bs_position", "must be finite and away from the RIS center"));
        }
        Ok(())
    }

    /// Rician K-factor in dB.
    pub fn k_db(&self) -> f64 {
        linear_to_db(self.link.k_factor)
    }

    pub fn bs_spherical(&self) -> Spherical {
        cart_to_spherical(self.bs_position).expect("validated base station position")
    }

    /// Point on the floor in RIS coordinates.
    pub fn floor_point(&self, x: f64, y: f64) -> Cartesian3 {
        Cartesian3::on_floor(x, y, self.height)
    }

    /// Beam pointing at the belief mean.
    pub fn pointing_for(&self, belief: &PositionBelief) -> Result<Pointing> {
        let [x, y] = belief.mean();
        Pointing::toward_floor(x, y, self.height)
    }

    /// Tracker belief centered at `(x, y)` for a device moving along `psi`.
    pub fn belief_at(&self, x: f64, y: f64, psi: f64) -> Result<PositionBelief> {
        PositionBelief::new([x, y], covariance_from_motion(self.sigma_u, psi)?)
    }

    /// Whether the floor plane lies in the far field of the array.
    pub fn is_far_field(&self) -> bool {
        self.ris.is_far_field(self.height)
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::reference()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let s = Scenario::reference();
        s.validate().unwrap();
        assert!((s.k_db() - 6.0).abs() < 1e-12);
        assert!((linear_to_db(s.link.noise_power) + 30.0 - (-118.436975)).abs() < 1e-5);
        assert!(s.is_far_field());
        let b = s.bs_spherical();
        assert!((b.r - 75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut s = Scenario::reference();
        s.height = -1.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::reference();
        s.bs_position = Cartesian3::new(0.0, 0.0, 0.0);
        assert!(s.validate().is_err());
    }
}
