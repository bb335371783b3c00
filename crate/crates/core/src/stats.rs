//! Gaussian position belief on the floor plane and its probability mass
//! inside an ellipse.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::geometry::Ellipse2D;
use crate::numeric::integrate;
use crate::{Error, Result};

/// Symmetric 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

/// Tracking estimate of the device position: mean and covariance on the
/// floor plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionBelief {
    mean: [f64; 2],
    cov: Mat2,
    chol: Mat2,
}

impl PositionBelief {
    pub fn new(mean: [f64; 2], cov: Mat2) -> Result<Self> {
        if !(mean[0].is_finite() && mean[1].is_finite()) {
            return Err(invalid("mean", "non-finite position estimate"));
        }
        let asym = (cov[0][1] - cov[1][0]).abs();
        if asym > 1e-12 * (cov[0][1].abs() + cov[1][0].abs()).max(f64::MIN_POSITIVE) {
            return Err(invalid("covariance", "matrix is not symmetric"));
        }
        let chol = cholesky(&cov).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { mean, cov, chol })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn covariance(&self) -> Mat2 {
        self.cov
    }

    /// Lower-triangular factor `L` with `L Lᵀ = Σ`.
    pub fn cholesky(&self) -> Mat2 {
        self.chol
    }

    /// Density of the bivariate normal at `p`.
    pub fn pdf(&self, p: [f64; 2]) -> f64 {
        let l = &self.chol;
        let y0 = (p[0] - self.mean[0]) / l[0][0];
        let y1 = (p[1] - self.mean[1] - l[1][0] * y0) / l[1][1];
        (-(y0 * y0 + y1 * y1) / 2.0).exp() / (TAU * l[0][0] * l[1][1])
    }
}

fn cholesky(m: &Mat2) -> Option<Mat2> {
    let a = m[0][0];
    if !(a > 0.0) || !a.is_finite() {
        return None;
    }
    let l00 = a.sqrt();
    let l10 = m[1][0] / l00;
    let rest = m[1][1] - l10 * l10;
    if !(rest > 0.0) || !rest.is_finite() {
        return None;
    }
    Some([[l00, 0.0], [l10, rest.sqrt()]])
}

/// Covariance of a tracker following a device moving along direction `psi`:
/// `σ_u² [[1/cos²Ψ, sinΨ], [sinΨ, 1/cos²Ψ]]`.
pub fn covariance_from_motion(sigma_u: f64, psi: f64) -> Result<Mat2> {
    if !(sigma_u > 0.0 && sigma_u.is_finite()) {
        return Err(invalid("sigma_u", format!("{sigma_u} must be positive")));
    }
    if !(psi.abs() < FRAC_PI_2) {
        return Err(Error::Domain(format!("motion direction {psi} gives a degenerate covariance")));
    }
    let s2 = sigma_u * sigma_u;
    let diag = s2 / psi.cos().powi(2);
    let off = s2 * psi.sin();
    Ok([[diag, off], [off, diag]])
}

/// One draw from the belief.
pub fn sample_position<R: Rng + ?Sized>(belief: &PositionBelief, rng: &mut R) -> [f64; 2] {
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    let l = &belief.chol;
    [
        belief.mean[0] + l[0][0] * z0,
        belief.mean[1] + l[1][0] * z0 + l[1][1] * z1,
    ]
}

/// Probability that the position lies inside the ellipse.
///
/// The problem is whitened with the Cholesky factor of the covariance, which
/// maps the belief to a standard normal and the ellipse to another ellipse.
/// For each ray from the origin the radial mass between the boundary
/// crossings is `e^{-r₁²/2} - e^{-r₂²/2}`, leaving a single angular integral
/// evaluated by adaptive quadrature.
pub fn ellipse_probability(belief: &PositionBelief, e: &Ellipse2D) -> Result<f64> {
    if !(e.semi_minor > 0.0 && e.semi_major > 0.0) {
        return Err(Error::DegenerateEllipse {
            semi_major: e.semi_major,
            semi_minor: e.semi_minor,
        });
    }
    if e.semi_minor.is_infinite() {
        return Ok(1.0);
    }
    let l = &belief.chol;
    // Whitened center p = L⁻¹ (c - m).
    let dx = e.center[0] - belief.mean[0];
    let dy = e.center[1] - belief.mean[1];
    let p0 = dx / l[0][0];
    let p1 = (dy - l[1][0] * p0) / l[1][1];
    // Whitened shape matrix W = Lᵀ Q L.
    let q = e.shape_matrix();
    let ql = [
        [q[0][0] * l[0][0] + q[0][1] * l[1][0], q[0][1] * l[1][1]],
        [q[1][0] * l[0][0] + q[1][1] * l[1][0], q[1][1] * l[1][1]],
    ];
    let w = [
        [l[0][0] * ql[0][0] + l[1][0] * ql[1][0], l[0][0] * ql[0][1] + l[1][0] * ql[1][1]],
        [l[1][1] * ql[1][0], l[1][1] * ql[1][1]],
    ];
    let w01 = 0.5 * (w[0][1] + w[1][0]);
    let w = [[w[0][0], w01], [w01, w[1][1]]];
    let prob = whitened_probability(&w, [p0, p1]);
    Ok(prob.clamp(0.0, 1.0))
}

const ABS_TOL: f64 = 1e-12;

/// Standard normal mass inside `{y : (y - p)ᵀ W (y - p) <= 1}`.
fn whitened_probability(w: &Mat2, p: [f64; 2]) -> f64 {
    let quad = |u: [f64; 2], v: [f64; 2]| {
        u[0] * (w[0][0] * v[0] + w[0][1] * v[1]) + u[1] * (w[1][0] * v[0] + w[1][1] * v[1])
    };
    let c = quad(p, p) - 1.0;
    // Ray y = r u meets the boundary where a r² + b r + c = 0.
    let roots = move |theta: f64| -> Option<(f64, f64)> {
        let u = [theta.cos(), theta.sin()];
        let a = quad(u, u);
        let b = -2.0 * quad(u, p);
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // Numerically stable pair of roots.
        let qv = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if qv == 0.0 {
            (0.0, 0.0)
        } else {
            let x1 = qv / a;
            let x2 = c / qv;
            (x1.min(x2), x1.max(x2))
        };
        Some((r1, r2))
    };
    if c <= 0.0 {
        // Origin inside: one crossing per ray.
        let outside = |theta: f64| match roots(theta) {
            Some((_, r2)) => (-0.5 * r2.max(0.0).powi(2)).exp(),
            None => 1.0,
        };
        let breaks: Vec<f64> = (0..=8).map(|i| i as f64 * TAU / 8.0).collect();
        let (v, _) = crate::numeric::integrate_with_breaks(outside, &breaks, ABS_TOL, 1e-12);
        return 1.0 - v / TAU;
    }
    // Origin outside: only rays between the two tangent directions hit the
    // ellipse. Tangents solve uᵀ S u = 0 with S = W p pᵀ W - c W.
    let wp = [w[0][0] * p[0] + w[0][1] * p[1], w[1][0] * p[0] + w[1][1] * p[1]];
    let s = [
        [wp[0] * wp[0] - c * w[0][0], wp[0] * wp[1] - c * w[0][1]],
        [wp[1] * wp[0] - c * w[1][0], wp[1] * wp[1] - c * w[1][1]],
    ];
    let center_dir = p[1].atan2(p[0]);
    let Some((t1, t2)) = tangent_directions(&s, wp, center_dir) else {
        return 0.0;
    };
    let mid = 0.5 * (t1 + t2);
    let half = 0.5 * (t2 - t1);
    // θ = mid + half·sin(s) removes the square-root behavior at the tangents.
    let integrand = |sv: f64| {
        let theta = mid + half * sv.sin();
        let jac = half * sv.cos();
        match roots(theta) {
            Some((r1, r2)) if r2 > 0.0 => {
                let r1 = r1.max(0.0);
                jac * ((-0.5 * r1 * r1).exp() - (-0.5 * r2 * r2).exp())
            }
            _ => 0.0,
        }
    };
    let (v, _) = integrate(integrand, -FRAC_PI_2, FRAC_PI_2, ABS_TOL, 1e-12);
    v / TAU
}

/// Angles `(t1, t2)`, `t1 < t2`, of the two rays from the origin tangent to
/// the ellipse, unwrapped around the direction of its center.
fn tangent_directions(s: &Mat2, wp: [f64; 2], center_dir: f64) -> Option<(f64, f64)> {
    // Eigen-decomposition of the symmetric indefinite S.
    let (a, b, d) = (s[0][0], 0.5 * (s[0][1] + s[1][0]), s[1][1]);
    let mean = 0.5 * (a + d);
    let rad = ((0.5 * (a - d)).powi(2) + b * b).sqrt();
    let (l1, l2) = (mean + rad, mean - rad);
    if !(l1 > 0.0 && l2 < 0.0) {
        return None;
    }
    let alpha = 0.5 * (2.0 * b).atan2(a - d); // eigenvector angle of l1
    // u = cos t e1 + sin t e2 solves l1 cos² t + l2 sin² t = 0 for
    // tan t = ±√(l1 / -l2).
    let t = (l1 / -l2).sqrt().atan();
    let candidates = [alpha + t, alpha - t, alpha + t + PI, alpha - t + PI];
    let mut picked: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|&t| t.cos() * wp[0] + t.sin() * wp[1] > 0.0)
        .map(|t| center_dir + (t - center_dir + PI).rem_euclid(TAU) - PI)
        .collect();
    if picked.len() != 2 {
        return None;
    }
    picked.sort_by(f64::total_cmp);
    Some((picked[0], picked[1]))
}
