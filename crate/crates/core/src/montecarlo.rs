//! Empirical oracle: the optimal power from the sampled SNR distribution and
//! outage estimates at a given power.
//!
//! Samples are generated in fixed-size chunks. Each chunk draws from its own
//! ChaCha stream, selected by the chunk index, under a key derived from the
//! master seed and a stream identifier. The partition of chunks over worker
//! threads therefore never changes the sample values, and merging is done in
//! chunk order.

use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::array::dirichlet_power;
use crate::control::{min_snr, power_control_with_quantile, PowerDecision};
use crate::error::invalid;
use crate::geometry::Pointing;
use crate::numeric::bisect;
use crate::scenario::Scenario;
use crate::stats::PositionBelief;
use crate::{Error, Result};

/// Samples per chunk; one RNG stream per chunk.
pub const CHUNK_SIZE: u64 = 1 << 16;

/// Fewer events than this switch the confidence interval to the exact
/// binomial one.
const EXACT_CI_EVENTS: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub master_seed: u64,
    /// Worker threads; `0` uses the global rayon pool.
    pub n_workers: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000_000,
            master_seed: 0x5eed,
            n_workers: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1000 {
            return Err(invalid("n_samples", format!("{} is below 1000", self.n_samples)));
        }
        Ok(())
    }
}

/// What a sample stream is used for. Different purposes and different sweep
/// points never share samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    /// Samples that set the empirical optimal power.
    Opt { point: u64 },
    /// Samples that evaluate outage at given powers.
    Outage { point: u64 },
    /// Free-form identifier for other experiments.
    Other { tag: u64, point: u64 },
}

impl Stream {
    fn key(self) -> [u64; 2] {
        match self {
            Self::Opt { point } => [1, point],
            Self::Outage { point } => [2, point],
            Self::Other { tag, point } => [3 ^ tag.rotate_left(8), point],
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for chunk `chunk` of `stream`.
pub fn chunk_rng(master_seed: u64, stream: Stream, chunk: u64) -> ChaCha8Rng {
    let [a, b] = stream.key();
    let mut seed = [0u8; 32];
    let mut s = master_seed;
    for (i, word) in [a, b, a ^ b.rotate_left(32), !master_seed].into_iter().enumerate() {
        s = splitmix(s ^ word);
        seed[8 * i..8 * i + 8].copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(chunk);
    rng
}

/// Fading model used by the sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// Unit-power Rice amplitudes with the given linear K-factor.
    Rice(f64),
    /// `|g_u g_b|² = 1` on every draw.
    None,
}

/// Precomputed constants for drawing `γ/P` for one belief and pointing.
#[derive(Debug, Clone, Copy)]
pub struct LinkSampler {
    mean: [f64; 2],
    chol: [[f64; 2]; 2],
    height: f64,
    pointing_uv: (f64, f64),
    freq_scale: f64,
    side: usize,
    /// `β0² G (d0²/‖x_b‖)^ξ · N² / σ²`; multiplied by `‖x_u‖^{-ξ}`.
    scale: f64,
    xi: f64,
    fading: Fading,
}

impl LinkSampler {
    pub fn new(scenario: &Scenario, belief: &PositionBelief, pointing: Pointing) -> Self {
        let lb = &scenario.link;
        let n = scenario.ris.n_elements() as f64;
        let rb = scenario.bs_position.norm();
        let scale = lb.beta0 * lb.beta0 * lb.g_bu * (lb.d0 * lb.d0 / rb).powf(lb.xi) * n * n
            / lb.noise_power;
        Self {
            mean: belief.mean(),
            chol: belief.cholesky(),
            height: scenario.height,
            pointing_uv: pointing.as_spherical().transverse(),
            freq_scale: std::f64::consts::PI * scenario.ris.spacing() / scenario.ris.wavelength(),
            side: scenario.ris.side(),
            scale,
            xi: lb.xi,
            fading: Fading::Rice(lb.k_factor),
        }
    }

    pub fn with_fading(mut self, fading: Fading) -> Self {
        self.fading = fading;
        self
    }

    /// `γ/P` at the device position `(x, y)` for fading power `fading`.
    #[inline]
    pub fn evaluate(&self, x: f64, y: f64, fading: f64) -> f64 {
        let r2 = x * x + y * y + self.height * self.height;
        let r = r2.sqrt();
        let (pu, pv) = self.pointing_uv;
        let fx = self.freq_scale * (x / r - pu);
        let fy = self.freq_scale * (y / r - pv);
        let af = dirichlet_power(fx, self.side) * dirichlet_power(fy, self.side);
        let path = if self.xi == 2.0 { 1.0 / r2 } else { r.powf(-self.xi) };
        self.scale * path * fading * af
    }

    /// One draw of `γ/P`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let x = self.mean[0] + self.chol[0][0] * z0;
        let y = self.mean[1] + self.chol[1][0] * z0 + self.chol[1][1] * z1;
        let fading = match self.fading {
            Fading::None => 1.0,
            Fading::Rice(k) => rice_power(k, rng) * rice_power(k, rng),
        };
        self.evaluate(x, y, fading)
    }
}

#[inline]
fn rice_power<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    let nu = (k / (k + 1.0)).sqrt();
    let s = (0.5 / (k + 1.0)).sqrt();
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    let re = nu + s * a;
    let im = s * b;
    re * re + im * im
}

/// One realization of `γ/P` for a device drawn from `belief` with the beam
/// pointed along `pointing`.
pub fn snr_per_unit_power_sample<R: Rng + ?Sized>(
    scenario: &Scenario,
    belief: &PositionBelief,
    pointing: Pointing,
    rng: &mut R,
) -> f64 {
    LinkSampler::new(scenario, belief, pointing).sample(rng)
}

fn run_chunks<T, F>(mc: &McConfig, stream: Stream, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let n_chunks = mc.n_samples.div_ceil(CHUNK_SIZE);
    let job = |c: u64| {
        let len = CHUNK_SIZE.min(mc.n_samples - c * CHUNK_SIZE);
        let mut rng = chunk_rng(mc.master_seed, stream, c);
        work(&mut rng, len)
    };
    if mc.n_workers == 0 {
        return Ok((0..n_chunks).into_par_iter().map(job).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(mc.n_workers)
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n_chunks).into_par_iter().map(job).collect()))
}

/// The `k` smallest values of `chunk`, sorted ascending.
fn k_smallest(values: impl Iterator<Item = f64>, k: usize) -> Vec<f64> {
    let mut heap: BinaryHeap<Ordered> = BinaryHeap::with_capacity(k + 1);
    for v in values {
        if heap.len() < k {
            heap.push(Ordered(v));
        } else if let Some(top) = heap.peek() {
            if v.total_cmp(&top.0).is_lt() {
                heap.pop();
                heap.push(Ordered(v));
            }
        }
    }
    let mut out: Vec<f64> = heap.into_iter().map(|o| o.0).collect();
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Debug, Clone, Copy)]
struct Ordered(f64);

impl PartialEq for Ordered {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}
impl Eq for Ordered {}
impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Empirical optimal power and the quantile it rests on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptPower {
    /// Power, watts, giving outage exactly `1 - p_s` on the sampled stream.
    pub power: f64,
    /// Empirical `(1 - p_s)`-quantile of `γ/P`.
    pub quantile: f64,
    /// 1-based rank of the order statistic used.
    pub rank: u64,
    pub n_samples: u64,
}

/// Empirical `q`-quantile of `γ/P` as the order statistic of rank `⌈q n⌉`.
pub fn tail_quantile(sampler: &LinkSampler, q: f64, mc: &McConfig, stream: Stream) -> Result<(f64, u64)> {
    mc.validate()?;
    let tail = q * mc.n_samples as f64;
    if !(tail >= EXACT_CI_EVENTS as f64) {
        return Err(Error::QuantileUnresolvable { tail_samples: tail });
    }
    let rank = tail.ceil() as u64;
    let keep = (2.0 * tail).ceil() as usize;
    let parts = run_chunks(mc, stream, |rng, len| {
        k_smallest((0..len).map(|_| sampler.sample(rng)), keep)
    })?;
    let merged = k_smallest(parts.into_iter().flatten(), keep);
    Ok((merged[(rank - 1) as usize], rank))
}

/// Power at which the empirical outage equals `1 - p_s`.
pub fn opt_power(
    scenario: &Scenario,
    belief: &PositionBelief,
    mc: &McConfig,
    stream: Stream,
) -> Result<OptPower> {
    let pointing = scenario.pointing_for(belief)?;
    let sampler = LinkSampler::new(scenario, belief, pointing);
    let gamma0 = min_snr(&scenario.requirement);
    let (quantile, rank) =
        tail_quantile(&sampler, scenario.requirement.outage_target(), mc, stream)?;
    Ok(OptPower {
        power: gamma0 / quantile,
        quantile,
        rank,
        n_samples: mc.n_samples,
    })
}

/// Outage frequency with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub p_out: f64,
    pub ci_halfwidth: f64,
    pub events: u64,
    pub n_samples: u64,
}

impl OutageEstimate {
    pub fn from_counts(events: u64, n_samples: u64) -> Self {
        let n = n_samples as f64;
        let p = events as f64 / n;
        let ci_halfwidth = if events < EXACT_CI_EVENTS || events > n_samples - EXACT_CI_EVENTS {
            let (lo, hi) = clopper_pearson(events, n_samples, 0.05);
            (p - lo).max(hi - p)
        } else {
            1.96 * (p * (1.0 - p) / n).sqrt()
        };
        Self {
            p_out: p,
            ci_halfwidth,
            events,
            n_samples,
        }
    }

    /// Binomial standard deviation at probability `p` for this sample size.
    pub fn binomial_sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.n_samples as f64).sqrt()
    }
}

/// Exact two-sided binomial interval at level `1 - alpha`.
pub fn clopper_pearson(events: u64, n: u64, alpha: f64) -> (f64, f64) {
    let (k, n) = (events as f64, n as f64);
    let lo = if events == 0 {
        0.0
    } else {
        // Beta(k, n - k + 1) quantile at alpha / 2.
        bisect(|x| beta_reg(k, n - k + 1.0, x) - alpha / 2.0, 0.0, 1.0, 1e-15).unwrap_or(0.0)
    };
    let hi = if events as f64 >= n {
        1.0
    } else {
        bisect(|x| beta_reg(k + 1.0, n - k, x) - (1.0 - alpha / 2.0), 0.0, 1.0, 1e-15).unwrap_or(1.0)
    };
    (lo, hi)
}

/// Outage at each of `powers`, all evaluated on the same sample stream.
pub fn outage_estimates_with(
    sampler: &LinkSampler,
    gamma0: f64,
    powers: &[f64],
    mc: &McConfig,
    stream: Stream,
) -> Result<Vec<OutageEstimate>> {
    mc.validate()?;
    for &p in powers {
        if !(p >= 0.0) {
            return Err(Error::Domain(format!("power {p} must be non-negative")));
        }
    }
    // γ = P·s < γ0  ⇔  s < γ0 / P.
    let thresholds: Vec<f64> = powers.iter().map(|&p| gamma0 / p).collect();
    let parts = run_chunks(mc, stream, |rng, len| {
        let mut counts = vec![0u64; thresholds.len()];
        for _ in 0..len {
            let s = sampler.sample(rng);
            for (c, &t) in counts.iter_mut().zip(&thresholds) {
                *c += u64::from(s < t);
            }
        }
        counts
    })?;
    let mut totals = vec![0u64; powers.len()];
    for part in parts {
        for (t, c) in totals.iter_mut().zip(part) {
            *t += c;
        }
    }
    Ok(totals
        .into_iter()
        .map(|e| OutageEstimate::from_counts(e, mc.n_samples))
        .collect())
}

/// Outage at `powers` for the beam pointed at the belief mean.
pub fn outage_estimates(
    scenario: &Scenario,
    belief: &PositionBelief,
    powers: &[f64],
    mc: &McConfig,
    stream: Stream,
) -> Result<Vec<OutageEstimate>> {
    let pointing = scenario.pointing_for(belief)?;
    let sampler = LinkSampler::new(scenario, belief, pointing);
    outage_estimates_with(&sampler, min_snr(&scenario.requirement), powers, mc, stream)
}

/// Outage at a single power.
pub fn outage_estimate(
    scenario: &Scenario,
    belief: &PositionBelief,
    power: f64,
    mc: &McConfig,
    stream: Stream,
) -> Result<OutageEstimate> {
    Ok(outage_estimates(scenario, belief, &[power], mc, stream)?[0])
}

/// Bound-based power next to the empirical optimum for one belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub decision: PowerDecision,
    /// Absent when the decision is infeasible.
    pub opt: Option<OptPower>,
    /// Outage at the bound-based power.
    pub outage_pc: Option<OutageEstimate>,
    /// Outage at the empirical optimum, on a stream disjoint from the one
    /// that produced it.
    pub outage_opt: Option<OutageEstimate>,
}

impl OracleComparison {
    /// `P_pc / P_opt` in dB.
    pub fn gap_db(&self) -> Option<f64> {
        let pc = self.decision.power()?;
        let opt = self.opt?.power;
        Some(10.0 * (pc / opt).log10())
    }
}

/// Runs the power decision for `belief`, then the empirical optimum on
/// `Stream::Opt { point }` and both outages on `Stream::Outage { point }`.
pub fn compare_with_oracle(
    scenario: &Scenario,
    belief: &PositionBelief,
    g0: f64,
    mc: &McConfig,
    point: u64,
) -> Result<OracleComparison> {
    let decision = power_control_with_quantile(scenario, belief, g0)?;
    let Some(pc) = decision.power() else {
        return Ok(OracleComparison {
            decision,
            opt: None,
            outage_pc: None,
            outage_opt: None,
        });
    };
    let sampler = LinkSampler::new(scenario, belief, decision.pointing);
    let (quantile, rank) =
        tail_quantile(&sampler, scenario.requirement.outage_target(), mc, Stream::Opt { point })?;
    let opt = OptPower {
        power: decision.gamma0 / quantile,
        quantile,
        rank,
        n_samples: mc.n_samples,
    };
    let out = outage_estimates_with(
        &sampler,
        decision.gamma0,
        &[pc, opt.power],
        mc,
        Stream::Outage { point },
    )?;
    Ok(OracleComparison {
        decision,
        opt: Some(opt),
        outage_pc: Some(out[0]),
        outage_opt: Some(out[1]),
    })
}
