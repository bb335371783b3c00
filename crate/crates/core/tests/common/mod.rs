//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the evaluators it is used to check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Fraction of `n` draws from `N(mean, cov)` that land inside the ellipse
/// with the given center, semi-axes and major-axis angle.
pub fn mc_ellipse_probability(
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
    center: [f64; 2],
    axes: (f64, f64),
    angle: f64,
    n: u64,
    seed: u64,
) -> f64 {
    let l00 = cov[0][0].sqrt();
    let l10 = cov[1][0] / l00;
    let l11 = (cov[1][1] - l10 * l10).sqrt();
    let (s, c) = angle.sin_cos();
    let (ia, ib) = (1.0 / axes.0, 1.0 / axes.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..n {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let dx = mean[0] + l00 * z0 - center[0];
        let dy = mean[1] + l10 * z0 + l11 * z1 - center[1];
        let u = (c * dx + s * dy) * ia;
        let v = (-s * dx + c * dy) * ib;
        hits += u64::from(u * u + v * v <= 1.0);
    }
    hits as f64 / n as f64
}

/// Exponentially tilted unit-power Rice hop, `∝ e^{-θ|g|²} f(g)`.
struct TiltedHop {
    nu: f64,
    s2: f64,
    theta: f64,
    shrink: f64,
    /// `E[e^{-θ|g|²}]` under the untilted law.
    mgf: f64,
}

impl TiltedHop {
    fn new(k: f64, theta: f64) -> Self {
        let nu = (k / (k + 1.0)).sqrt();
        let s2 = 0.5 / (k + 1.0);
        let shrink = 1.0 + 2.0 * theta * s2;
        Self {
            nu,
            s2,
            theta,
            shrink,
            mgf: (-theta * nu * nu / shrink).exp() / shrink,
        }
    }

    fn draw<R: Rng>(&self, tilted: bool, rng: &mut R) -> f64 {
        let (mean, var) = if tilted {
            (self.nu / self.shrink, self.s2 / self.shrink)
        } else {
            (self.nu, self.s2)
        };
        let sd = var.sqrt();
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let re = mean + sd * a;
        let im = sd * b;
        re * re + im * im
    }

    /// Tilted over untilted density at power `p`.
    fn ratio(&self, p: f64) -> f64 {
        (-self.theta * p).exp() / self.mgf
    }
}

/// Importance-sampled `delta`-quantile of `|g_u g_b|²`.
///
/// The proposal is an equal mixture of the untilted pair and the two pairs
/// with one hop exponentially tilted toward deep fades, so the likelihood
/// ratio stays below 3. Returns the estimate and the relative standard error
/// of the tail probability at that estimate.
pub fn tilted_fading_quantile(k: f64, delta: f64, theta: f64, n: u64, cap: f64, seed: u64) -> (f64, f64) {
    let hop = TiltedHop::new(k, theta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tail: Vec<(f64, f64)> = Vec::new();
    for _ in 0..n {
        let which: u32 = rng.gen_range(0..3);
        let pu = hop.draw(which == 1, &mut rng);
        let pb = hop.draw(which == 2, &mut rng);
        let w = pu * pb;
        if w <= cap {
            tail.push((w, 3.0 / (1.0 + hop.ratio(pu) + hop.ratio(pb))));
        }
    }
    tail.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = delta * n as f64;
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for &(w, weight) in &tail {
        acc += weight;
        acc2 += weight * weight;
        if acc >= target {
            let nf = n as f64;
            let mean = acc / nf;
            let var = acc2 / nf - mean * mean;
            return (w, (var / nf).sqrt() / mean);
        }
    }
    panic!("cap {cap} below the requested quantile");
}

/// Fraction of `n` plain draws of `|g_u g_b|²` at or below `t`.
pub fn fading_cdf_mc(k: f64, t: f64, n: u64, seed: u64) -> f64 {
    let hop = TiltedHop::new(k, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..n {
        let w = hop.draw(false, &mut rng) * hop.draw(false, &mut rng);
        hits += u64::from(w <= t);
    }
    hits as f64 / n as f64
}
