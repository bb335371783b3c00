//! Coordinate frames and beam footprint geometry.
//!
//! The reference frame has its origin at the RIS center, the x and y axes
//! along the RIS edges and the z axis pointing down toward the floor, which
//! is the plane `z = h`. Elevation `theta` is measured from the z axis and
//! azimuth `phi` from the x axis in the RIS plane.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in the RIS frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cartesian3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Cartesian3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Point on the floor plane at height `h` below the RIS.
    pub const fn on_floor(x: f64, y: f64, h: f64) -> Self {
        Self { x, y, z: h }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Spherical coordinates centered on the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spherical {
    pub r: f64,
    /// Elevation from the z axis, radians.
    pub theta: f64,
    /// Azimuth in `[0, 2π)`, radians.
    pub phi: f64,
}

impl Spherical {
    /// Unit direction at distance 1.
    pub fn direction(theta: f64, phi: f64) -> Self {
        Self {
            r: 1.0,
            theta,
            phi: wrap_azimuth(phi),
        }
    }

    /// Direction cosines projected on the RIS plane: `(sinθ cosφ, sinθ sinφ)`.
    pub fn transverse(&self) -> (f64, f64) {
        let s = self.theta.sin();
        (s * self.phi.cos(), s * self.phi.sin())
    }

    pub fn to_cartesian(&self) -> Cartesian3 {
        let (u, v) = self.transverse();
        Cartesian3::new(self.r * u, self.r * v, self.r * self.theta.cos())
    }
}

/// Beam pointing direction `(θ̂, φ̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pointing {
    pub theta_hat: f64,
    pub phi_hat: f64,
}

impl Pointing {
    pub fn new(theta_hat: f64, phi_hat: f64) -> Self {
        Self {
            theta_hat,
            phi_hat: wrap_azimuth(phi_hat),
        }
    }

    /// Pointing toward a floor position at height `h`.
    pub fn toward_floor(x: f64, y: f64, h: f64) -> Result<Self> {
        let s = cart_to_spherical(Cartesian3::on_floor(x, y, h))?;
        Ok(Self::new(s.theta, s.phi))
    }

    pub fn as_spherical(&self) -> Spherical {
        Spherical::direction(self.theta_hat, self.phi_hat)
    }

    /// Where the beam axis meets the floor plane `z = h`.
    pub fn floor_hit(&self, h: f64) -> (f64, f64) {
        let rho = h * self.theta_hat.tan();
        (rho * self.phi_hat.cos(), rho * self.phi_hat.sin())
    }
}

/// Wraps an azimuth into `[0, 2π)`.
pub fn wrap_azimuth(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn cart_to_spherical(p: Cartesian3) -> Result<Spherical> {
    if !p.is_finite() {
        return Err(Error::Domain(format!("non-finite position {p:?}")));
    }
    let r = p.norm();
    if r == 0.0 {
        return Err(Error::Domain("zero-norm position has no direction".into()));
    }
    let theta = (p.z / r).clamp(-1.0, 1.0).acos();
    let phi = if p.x == 0.0 && p.y == 0.0 {
        0.0
    } else {
        let a = p.y.atan2(p.x);
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    };
    Ok(Spherical {
        r,
        theta,
        phi: wrap_azimuth(phi),
    })
}

/// Orthonormal 3×3 matrix taking RIS-frame vectors into a beam frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation3(pub [[f64; 3]; 3]);

impl Rotation3 {
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn apply_transpose(&self, v: [f64; 3]) -> [f64; 3] {
        self.transpose().apply(v)
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = m[j][i];
            }
        }
        Rotation3(t)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry-wise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let m = &self.0;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Rotation whose third row is the beam axis and whose first two rows span
/// the elevation plane and its normal.
///
/// Rows: `(-cosθ̂ cosφ̂, -cosθ̂ sinφ̂, sinθ̂)`, `(sinφ̂, -cosφ̂, 0)` and
/// `(sinθ̂ cosφ̂, sinθ̂ sinφ̂, cosθ̂)`. The frame is right-handed
/// (determinant +1) for every pointing.
pub fn rotation_matrix(theta_hat: f64, phi_hat: f64) -> Rotation3 {
    let (st, ct) = theta_hat.sin_cos();
    let (sp, cp) = phi_hat.sin_cos();
    Rotation3([
        [-ct * cp, -ct * sp, st],
        [sp, -cp, 0.0],
        [st * cp, st * sp, ct],
    ])
}

/// General conic `Ax² + Bxy + Cy² + Dx + Ey + F = 0` on the floor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conic2D {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Conic2D {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * x * x + self.b * x * y + self.c * y * y + self.d * x + self.e * y + self.f
    }

    /// `B² - 4AC`; negative for ellipses.
    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        [self.a, self.b, self.c, self.d, self.e, self.f]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Center, semi-axes and major-axis orientation of an elliptic conic.
    ///
    /// `orientation_hint` resolves the orientation of circles.
    pub fn to_ellipse(&self, orientation_hint: f64) -> Option<Ellipse2D> {
        if !(self.discriminant() < 0.0) {
            return None;
        }
        // Normalize so that the quadratic part is positive definite.
        let s = if self.a + self.c < 0.0 { -1.0 } else { 1.0 };
        let (a, b, c, d, e, f) = (
            s * self.a,
            s * self.b,
            s * self.c,
            s * self.d,
            s * self.e,
            s * self.f,
        );
        let det = a * c - 0.25 * b * b;
        let cx = (0.5 * b * e * 0.5 - c * d * 0.5) / det;
        let cy = (0.5 * b * d * 0.5 - a * e * 0.5) / det;
        let f0 = f + 0.5 * (d * cx + e * cy);
        if !(f0 < 0.0) {
            return None;
        }
        let mean = 0.5 * (a + c);
        let half_diff = ((0.5 * (a - c)).powi(2) + (0.5 * b).powi(2)).sqrt();
        let lo = mean - half_diff;
        let hi = mean + half_diff;
        if !(lo > 0.0) {
            return None;
        }
        let semi_major = (-f0 / lo).sqrt();
        let semi_minor = (-f0 / hi).sqrt();
        let orientation = if half_diff <= 1e-12 * mean {
            orientation_hint
        } else {
            // Angle of the eigenvector of the larger eigenvalue, rotated to
            // the major (smaller eigenvalue) axis.
            0.5 * b.atan2(a - c) + FRAC_PI_2
        };
        Some(Ellipse2D {
            center: [cx, cy],
            semi_major,
            semi_minor,
            orientation: orientation.rem_euclid(PI),
        })
    }
}

/// Ellipse on the floor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse2D {
    pub center: [f64; 2],
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from the x axis, in `[0, π)`.
    pub orientation: f64,
}

impl Ellipse2D {
    pub fn new(center: [f64; 2], semi_major: f64, semi_minor: f64, orientation: f64) -> Result<Self> {
        let (a, b) = if semi_major >= semi_minor {
            (semi_major, semi_minor)
        } else {
            (semi_minor, semi_major)
        };
        let orientation = if semi_major >= semi_minor {
            orientation
        } else {
            orientation + FRAC_PI_2
        };
        if !(b > 0.0) || !a.is_finite() {
            return Err(Error::DegenerateEllipse {
                semi_major: a,
                semi_minor: b,
            });
        }
        Ok(Self {
            center,
            semi_major: a,
            semi_minor: b,
            orientation: orientation.rem_euclid(PI),
        })
    }

    /// Point on the boundary at parametric angle `t`.
    pub fn boundary_point(&self, t: f64) -> [f64; 2] {
        let (so, co) = self.orientation.sin_cos();
        let (st, ct) = t.sin_cos();
        let u = self.semi_major * ct;
        let v = self.semi_minor * st;
        [self.center[0] + co * u - so * v, self.center[1] + so * u + co * v]
    }

    /// Shape matrix `Q` with the ellipse `{x : (x-c)ᵀ Q (x-c) <= 1}`.
    pub fn shape_matrix(&self) -> [[f64; 2]; 2] {
        let (so, co) = self.orientation.sin_cos();
        let ia = 1.0 / (self.semi_major * self.semi_major);
        let ib = 1.0 / (self.semi_minor * self.semi_minor);
        [
            [ia * co * co + ib * so * so, (ia - ib) * co * so],
            [(ia - ib) * co * so, ia * so * so + ib * co * co],
        ]
    }

    /// `(x-c)ᵀ Q (x-c)`; at most 1 inside the ellipse.
    pub fn level(&self, p: [f64; 2]) -> f64 {
        let q = self.shape_matrix();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        q[0][0] * dx * dx + 2.0 * q[0][1] * dx * dy + q[1][1] * dy * dy
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.level(p) <= 1.0
    }

    /// The same ellipse with both semi-axes multiplied by `factor`.
    pub fn dilated(&self, factor: f64) -> Self {
        Self {
            semi_major: self.semi_major * factor,
            semi_minor: self.semi_minor * factor,
            ..*self
        }
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_major * self.semi_minor
    }
}

/// Floor-plane conic cut by the elliptic beam cone.
///
/// The cone `u²/a² + v²/b² = w²` in the beam frame, with `a = tan(Δθ/2)` and
/// `b = tan(Δφ/2)`, is pulled back to the RIS frame as the quadratic form
/// `M = Rᵀ diag(1/a², 1/b², -1) R` and restricted to `z = h`.
pub fn beam_conic(pointing: Pointing, delta_theta: f64, delta_phi: f64, h: f64) -> Conic2D {
    let r = rotation_matrix(pointing.theta_hat, pointing.phi_hat);
    let a = (0.5 * delta_theta).tan();
    let b = (0.5 * delta_phi).tan();
    let diag = [1.0 / (a * a), 1.0 / (b * b), -1.0];
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (0..3).map(|k| r.0[k][i] * diag[k] * r.0[k][j]).sum();
        }
    }
    Conic2D {
        a: m[0][0],
        b: 2.0 * m[0][1],
        c: m[1][1],
        d: 2.0 * m[0][2] * h,
        e: 2.0 * m[1][2] * h,
        f: m[2][2] * h * h,
    }
}

/// Footprint on the floor of the cone of directions with AF gain above the
/// target, given its elevation and azimuth beamwidths.
pub fn project_beam(
    pointing: Pointing,
    delta_theta: f64,
    delta_phi: f64,
    h: f64,
) -> Result<Ellipse2D> {
    if !(delta_theta > 0.0 && delta_phi > 0.0) {
        return Err(Error::Domain(format!(
            "beamwidths must be positive, got ({delta_theta}, {delta_phi})"
        )));
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!("floor height must be positive, got {h}")));
    }
    let grazing = Error::HorizonGrazing {
        theta_hat: pointing.theta_hat,
        delta_theta,
    };
    if !(pointing.theta_hat >= 0.0) || pointing.theta_hat + 0.5 * delta_theta >= FRAC_PI_2 {
        return Err(grazing);
    }
    let conic = beam_conic(pointing, delta_theta, delta_phi, h);
    conic
        .to_ellipse(pointing.phi_hat.rem_euclid(PI))
        .ok_or(grazing)
}

/// Footprint point farthest from the RIS along the pointing azimuth, at floor
/// height `h`.
///
/// The path loss over the footprint is worst there.
pub fn farthest_floor_point(e: &Ellipse2D, phi_hat: f64, h: f64) -> Cartesian3 {
    let (s, c) = phi_hat.sin_cos();
    Cartesian3::on_floor(
        e.center[0] + e.semi_major * c,
        e.center[1] + e.semi_major * s,
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn spherical_examples() {
        let s = cart_to_spherical(Cartesian3::new(0.0, 0.0, 25.0)).unwrap();
        assert_eq!((s.r, s.theta, s.phi), (25.0, 0.0, 0.0));

        let s = cart_to_spherical(Cartesian3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(close(s.r, 1.0, 1e-15) && close(s.theta, FRAC_PI_2, 1e-15) && s.phi == 0.0);

        let s = cart_to_spherical(Cartesian3::new(-5.0, -5.0, 5.0)).unwrap();
        assert!(close(s.r, 75f64.sqrt(), 1e-12));
        assert!(close(s.r, 8.6603, 1e-4));
        assert!(close(s.theta, 0.9553, 1e-4));
        assert!(close(s.phi, 5.0 * FRAC_PI_4, 1e-12));
    }

    #[test]
    fn zero_norm_is_a_domain_error() {
        assert!(matches!(
            cart_to_spherical(Cartesian3::new(0.0, 0.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn azimuth_wraps_into_range() {
        assert_eq!(wrap_azimuth(TAU), 0.0);
        assert!(close(wrap_azimuth(-FRAC_PI_2), 1.5 * PI, 1e-15));
        assert_eq!(wrap_azimuth(-1e-300), 0.0);
    }

    #[test]
    fn nadir_rotation() {
        let r = rotation_matrix(0.0, 0.0);
        let expect = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        for (row, want) in r.0.iter().zip(&expect) {
            for (v, w) in row.iter().zip(want) {
                assert!(close(*v, *w, 1e-15));
            }
        }
    }

    #[test]
    fn rotation_third_row_is_pointing() {
        let r = rotation_matrix(PI / 6.0, FRAC_PI_4);
        assert!(close(r.0[2][0], 0.35355, 1e-5));
        assert!(close(r.0[2][1], 0.35355, 1e-5));
        assert!(close(r.0[2][2], 0.86603, 1e-5));
        assert!(close(r.determinant(), 1.0, 1e-14));
    }

    #[test]
    fn nadir_footprint_is_a_circle() {
        let psi: f64 = 0.1;
        for phi in [0.0, 1.0, 4.0] {
            let e = project_beam(Pointing::new(0.0, phi), 2.0 * psi, 2.0 * psi, 25.0).unwrap();
            assert!(close(e.center[0], 0.0, 1e-12) && close(e.center[1], 0.0, 1e-12));
            assert!(close(e.semi_major, 25.0 * psi.tan(), 1e-12));
            assert!(close(e.semi_minor, 25.0 * psi.tan(), 1e-12));
            assert!(close(e.orientation, phi.rem_euclid(PI), 1e-12));
        }
    }

    #[test]
    fn horizon_grazing_is_an_error() {
        let err = project_beam(Pointing::new(1.4, 0.3), 0.4, 0.3, 25.0).unwrap_err();
        assert!(matches!(err, Error::HorizonGrazing { .. }));
    }

    #[test]
    fn farthest_point_examples() {
        let e = Ellipse2D::new([10.2269, 10.2269], 1.2988, 0.9737, FRAC_PI_4).unwrap();
        let p = farthest_floor_point(&e, FRAC_PI_4, 25.0);
        assert!(close(p.x, 11.1453, 1e-4) && close(p.y, 11.1453, 1e-4) && p.z == 25.0);

        let e = Ellipse2D::new([0.0, 0.0], 3.0, 2.0, 0.0).unwrap();
        assert_eq!(farthest_floor_point(&e, 0.0, 25.0), Cartesian3::new(3.0, 0.0, 25.0));
    }

    #[test]
    fn degenerate_ellipse_rejected() {
        assert!(matches!(
            Ellipse2D::new([0.0, 0.0], 1.0, 0.0, 0.0),
            Err(Error::DegenerateEllipse { .. })
        ));
    }

    #[test]
    fn conic_boundary_points_satisfy_equation() {
        let h = 25.0;
        let p = Pointing::new(0.6, 2.2);
        let conic = beam_conic(p, 0.2, 0.15, h);
        let e = project_beam(p, 0.2, 0.15, h).unwrap();
        let scale = conic.max_abs_coefficient() * h * h;
        for k in 0..100 {
            let q = e.boundary_point(k as f64 * TAU / 100.0);
            assert!(conic.eval(q[0], q[1]).abs() <= 1e-9 * scale);
        }
    }
}
