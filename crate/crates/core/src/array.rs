//! RIS element layout, steering vectors, phase profiles and array factor.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::geometry::{Cartesian3, Pointing, Spherical};
use crate::numeric::bisect;
use crate::{Error, Result};

/// Square RIS of `n_elements = side²` elements on a regular grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisGeometry {
    n_elements: usize,
    side: usize,
    spacing: f64,
    wavelength: f64,
}

impl RisGeometry {
    pub fn new(n_elements: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        let side = (n_elements as f64).sqrt().round() as usize;
        if n_elements == 0 || side * side != n_elements {
            return Err(invalid(
                "n_elements",
                format!("{n_elements} is not a positive perfect square"),
            ));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(invalid("wavelength", format!("{wavelength} must be positive")));
        }
        if !(spacing > 0.0 && spacing < wavelength) {
            return Err(invalid(
                "spacing",
                format!("{spacing} must lie in (0, wavelength = {wavelength})"),
            ));
        }
        Ok(Self {
            n_elements,
            side,
            spacing,
            wavelength,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    /// Elements per row, `√N`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Fraunhofer distance of the aperture, `2 (d√N)² / λ`.
    pub fn fraunhofer_distance(&self) -> f64 {
        let aperture = self.spacing * self.side as f64;
        2.0 * aperture * aperture / self.wavelength
    }

    pub fn is_far_field(&self, distance: f64) -> bool {
        distance >= self.fraunhofer_distance()
    }
}

/// Position of element `n` (1-based), row-major over x then y.
pub fn element_position(n: usize, g: &RisGeometry) -> Result<Cartesian3> {
    if n == 0 || n > g.n_elements {
        return Err(Error::IndexOutOfRange {
            index: n,
            len: g.n_elements,
        });
    }
    let side = g.side;
    let half = (side as f64 - 1.0) / 2.0;
    let l = ((n - 1) % side) as f64;
    let k = ((n - 1) / side) as f64;
    Ok(Cartesian3::new(g.spacing * (l - half), g.spacing * (k - half), 0.0))
}

/// Per-element plane-wave phase factors toward direction `z`.
pub fn steering_vector(z: &Spherical, g: &RisGeometry) -> Vec<Complex64> {
    let (u, v) = z.transverse();
    let k = g.wavenumber();
    (1..=g.n_elements)
        .map(|n| {
            let r = element_position(n, g).expect("index within range");
            Complex64::from_polar(1.0, k * (r.x * u + r.y * v))
        })
        .collect()
}

/// Linear-gradient phase profile `φ_{ℓ,k} = ℓ φx + k φy`, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub phi_x: f64,
    pub phi_y: f64,
}

impl PhaseProfile {
    /// Unwrapped phase of the element at grid indices `(l, k)`, both 0-based.
    pub fn element_phase(&self, l: usize, k: usize) -> f64 {
        l as f64 * self.phi_x + k as f64 * self.phi_y
    }

    /// Configuration vector `[e^{jφ_1}, ..., e^{jφ_N}]`.
    pub fn configuration(&self, g: &RisGeometry) -> Vec<Complex64> {
        (0..g.n_elements)
            .map(|n| Complex64::from_polar(1.0, self.element_phase(n % g.side, n / g.side)))
            .collect()
    }
}

/// Phase profile that steers the beam toward `pointing` while compensating
/// the incidence direction of the base station.
pub fn phase_profile(pointing: Pointing, bs: &Spherical, g: &RisGeometry) -> PhaseProfile {
    let (pu, pv) = pointing.as_spherical().transverse();
    let (bu, bv) = bs.transverse();
    let step = g.wavenumber() * g.spacing;
    PhaseProfile {
        phi_x: -step * (pu + bu),
        phi_y: -step * (pv + bv),
    }
}

/// AF gain `|(1/N) a_bᵀ diag(φ) a_u|²` by explicit summation over elements.
pub fn af_gain_direct(profile: &PhaseProfile, ue: &Spherical, bs: &Spherical, g: &RisGeometry) -> f64 {
    let a_u = steering_vector(ue, g);
    let a_b = steering_vector(bs, g);
    let cfg = profile.configuration(g);
    let sum: Complex64 = a_b
        .iter()
        .zip(&cfg)
        .zip(&a_u)
        .map(|((b, c), u)| b * c * u)
        .sum();
    (sum / g.n_elements as f64).norm_sqr()
}

/// Normalized Dirichlet kernel power `[sin(m f) / (m sin f)]²`.
///
/// Near `f = jπ` the ratio is evaluated by its series
/// `1 - (m² - 1) e² / 6` in the offset `e = f - jπ`.
pub fn dirichlet_power(f: f64, m: usize) -> f64 {
    let s = f.sin();
    let mf = m as f64;
    if s.abs() < 1e-9 {
        let e = f - (f / PI).round() * PI;
        let amp = 1.0 - (mf * mf - 1.0) * e * e / 6.0;
        return amp * amp;
    }
    let r = (mf * f).sin() / (mf * s);
    r * r
}

/// Spatial frequencies `(f_x, f_y)` of direction `ue` relative to the beam.
pub fn spatial_offsets(pointing: Pointing, ue: &Spherical, g: &RisGeometry) -> (f64, f64) {
    let c = PI * g.spacing / g.wavelength;
    let (u, v) = ue.transverse();
    let (pu, pv) = pointing.as_spherical().transverse();
    (c * (u - pu), c * (v - pv))
}

/// AF gain by the separable closed form of the planar array.
pub fn af_gain_closed(pointing: Pointing, ue: &Spherical, g: &RisGeometry) -> f64 {
    let (fx, fy) = spatial_offsets(pointing, ue, g);
    dirichlet_power(fx, g.side) * dirichlet_power(fy, g.side)
}

/// Unnormalized sinc, `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// The `x ∈ [0, π)` with `sin(x)/x = a0`.
pub fn sinc_inverse(a0: f64) -> Result<f64> {
    if !(a0 > 0.0 && a0 <= 1.0) {
        return Err(Error::Domain(format!("sinc target {a0} outside (0, 1]")));
    }
    if a0 == 1.0 {
        return Ok(0.0);
    }
    bisect(|x| sinc(x) - a0, 1e-12, PI - 1e-12, 1e-13)
        .ok_or_else(|| Error::Domain(format!("no sinc inverse for {a0}")))
}

/// Beamwidths of the planar array for an AF gain target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beamwidths {
    /// Linear-array beamwidth `ΔΘ`.
    pub delta_cap_theta: f64,
    /// Elevation-plane beamwidth `Δθ = ΔΘ / cos θ̂`.
    pub delta_theta: f64,
    /// Azimuth-plane beamwidth `Δφ = ΔΘ`.
    pub delta_phi: f64,
}

/// Beamwidths at which the AF gain falls to `a0`.
///
/// The gain is the squared array factor, and in the main lobe the linear
/// array factor is `≈ sinc(√N f)`; the edge of the beam is therefore where
/// `sinc(√N f) = √a0`.
pub fn beamwidths(a0: f64, theta_hat: f64, g: &RisGeometry) -> Result<Beamwidths> {
    if !(a0 > 0.0 && a0 <= 1.0) {
        return Err(Error::Domain(format!("AF gain target {a0} outside (0, 1]")));
    }
    if !(theta_hat.abs() < PI / 2.0) {
        return Err(Error::Domain(format!("pointing elevation {theta_hat} is not below the horizon")));
    }
    let x = sinc_inverse(a0.sqrt())?;
    let argument = 2.0 * g.wavelength * x / (PI * g.spacing * g.side as f64);
    if argument > 1.0 {
        return Err(Error::BeamTooWide { a0, argument });
    }
    let cap = argument.asin();
    Ok(Beamwidths {
        delta_cap_theta: cap,
        delta_theta: cap / theta_hat.cos(),
        delta_phi: cap,
    })
}
