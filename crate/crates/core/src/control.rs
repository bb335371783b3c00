//! Minimum SNR, the reliable AF gain search and the bound-based transmit
//! power.
//!
//! The outage budget `1 - p_s` is split into a fading part `δ` and a
//! positioning part `ε`. The beam is pointed at the estimated position and
//! widened until the device lies inside the footprint with probability at
//! least `1 - ε`; the power then covers the worst path loss over that
//! footprint at the `δ`-quantile of the fading.

use serde::{Deserialize, Serialize};

use crate::array::{beamwidths, phase_profile, Beamwidths, PhaseProfile};
use crate::channel::{path_loss, FadingQuantileTable};
use crate::error::invalid;
use crate::geometry::{farthest_floor_point, project_beam, Cartesian3, Ellipse2D, Pointing};
use crate::scenario::Scenario;
use crate::stats::{ellipse_probability, PositionBelief};
use crate::{Error, Result};

/// Latency, payload and reliability target of a URLLC flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrllcRequirement {
    /// Payload, bits.
    pub payload_bits: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Deadline, seconds.
    pub deadline: f64,
    /// Target reliability `p_s`.
    pub reliability: f64,
    /// Fading share `δ` of the outage budget.
    pub delta: f64,
    /// Positioning share `ε` of the outage budget.
    pub epsilon: f64,
}

impl UrllcRequirement {
    /// Splits the budget `1 - p_s` as `δ = fading_share·(1 - p_s)`,
    /// `ε = 1 - p_s - δ`.
    pub fn with_split(
        payload_bits: f64,
        bandwidth: f64,
        deadline: f64,
        reliability: f64,
        fading_share: f64,
    ) -> Result<Self> {
        if !(fading_share > 0.0 && fading_share < 1.0) {
            return Err(invalid("fading_share", format!("{fading_share} outside (0, 1)")));
        }
        let budget = 1.0 - reliability;
        let delta = fading_share * budget;
        let req = Self {
            payload_bits,
            bandwidth,
            deadline,
            reliability,
            delta,
            epsilon: budget - delta,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("payload_bits", self.payload_bits),
            ("bandwidth", self.bandwidth),
            ("deadline", self.deadline),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        if !(self.reliability > 0.0 && self.reliability < 1.0) {
            return Err(invalid("reliability", format!("{} outside (0, 1)", self.reliability)));
        }
        if !(self.delta > 0.0 && self.epsilon > 0.0) {
            return Err(invalid("delta/epsilon", "both shares must be positive"));
        }
        let budget = 1.0 - self.reliability;
        if (self.delta + self.epsilon - budget).abs() > 1e-12 * budget {
            return Err(invalid(
                "delta/epsilon",
                format!(
                    "δ + ε = {} differs from 1 - p_s = {budget}",
                    self.delta + self.epsilon
                ),
            ));
        }
        Ok(())
    }

    /// Outage target `1 - p_s`.
    pub fn outage_target(&self) -> f64 {
        1.0 - self.reliability
    }
}

/// Minimum SNR `2^(L/(BT)) - 1` that carries the payload within the deadline.
pub fn min_snr(req: &UrllcRequirement) -> f64 {
    (req.payload_bits / (req.bandwidth * req.deadline)).exp2() - 1.0
}

/// Bounds and precision of the AF gain search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Smallest admissible AF gain (widest beam).
    pub a_min: f64,
    /// Search precision `ν`.
    pub nu: f64,
}

impl Default for SearchConfig {
    /// `ν = 0.9 / 32`: five halvings of `[0.1, 1 - ν]` reach a bracket of
    /// width at most `ν`.
    fn default() -> Self {
        Self {
            a_min: 0.1,
            nu: 0.028125,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(invalid("nu", format!("{} must be positive", self.nu)));
        }
        if !(self.a_min > 0.0 && self.a_min < 1.0 - self.nu) {
            return Err(invalid(
                "a_min",
                format!("{} must lie in (0, 1 - nu = {})", self.a_min, 1.0 - self.nu),
            ));
        }
        Ok(())
    }

    /// Number of halvings needed to shrink `[a_min, 1 - ν]` to width `ν`.
    pub fn max_iterations(&self) -> u32 {
        let ratio = (1.0 - self.nu - self.a_min) / self.nu;
        if ratio <= 1.0 {
            0
        } else {
            ratio.log2().ceil() as u32
        }
    }
}

/// Result of the reliable AF gain search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AfGainSearch {
    /// `a0` is the largest gain found whose footprint holds the device with
    /// probability `probability >= 1 - ε`.
    Feasible {
        a0: f64,
        iterations: u32,
        probability: f64,
    },
    /// Even the widest beam misses the device too often.
    Infeasible { probability_at_min: f64 },
}

impl AfGainSearch {
    pub fn a0(&self) -> Option<f64> {
        match *self {
            Self::Feasible { a0, .. } => Some(a0),
            Self::Infeasible { .. } => None,
        }
    }
}

/// Floor footprint of the beam pointed along `pointing` with AF gain `a0` at
/// its edge.
pub fn illuminated_region(
    scenario: &Scenario,
    pointing: Pointing,
    a0: f64,
) -> Result<(Beamwidths, Ellipse2D)> {
    let bw = beamwidths(a0, pointing.theta_hat, &scenario.ris)?;
    let region = project_beam(pointing, bw.delta_theta, bw.delta_phi, scenario.height)?;
    Ok((bw, region))
}

/// Probability that the device is inside the footprint of gain `a0`.
pub fn coverage_probability(
    scenario: &Scenario,
    belief: &PositionBelief,
    pointing: Pointing,
    a0: f64,
) -> Result<f64> {
    let (_, region) = illuminated_region(scenario, pointing, a0)?;
    ellipse_probability(belief, &region)
}

/// Largest AF gain, within `ν`, whose footprint contains the device with
/// probability at least `1 - ε`.
///
/// Bisection keeps the lower endpoint, which always satisfies the coverage
/// target, so the result is pessimistic by at most `ν`.
pub fn reliable_af_gain(
    scenario: &Scenario,
    belief: &PositionBelief,
    pointing: Pointing,
    epsilon: f64,
    cfg: &SearchConfig,
) -> Result<AfGainSearch> {
    cfg.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("{epsilon} outside (0, 1)")));
    }
    let target = 1.0 - epsilon;
    let prob = |a0: f64| coverage_probability(scenario, belief, pointing, a0);

    let mut a_lo = cfg.a_min;
    let mut a_hi = 1.0 - cfg.nu;
    let mut p_lo = prob(a_lo)?;
    if p_lo < target {
        return Ok(AfGainSearch::Infeasible {
            probability_at_min: p_lo,
        });
    }
    let p_hi = prob(a_hi)?;
    if p_hi >= target {
        return Ok(AfGainSearch::Feasible {
            a0: a_hi,
            iterations: 0,
            probability: p_hi,
        });
    }
    let mut iterations = 0;
    while a_hi - a_lo > cfg.nu {
        let mid = 0.5 * (a_hi + a_lo);
        let p = prob(mid)?;
        if p < target {
            a_hi = mid;
        } else {
            a_lo = mid;
            p_lo = p;
        }
        iterations += 1;
    }
    Ok(AfGainSearch::Feasible {
        a0: a_lo,
        iterations,
        probability: p_lo,
    })
}

/// Transmit power of the bound, `σ² γ0 / (N² G0 A0 β̂)`.
pub fn bound_power(sigma2: f64, gamma0: f64, n: usize, g0: f64, a0: f64, worst_beta: f64) -> f64 {
    let n = n as f64;
    sigma2 * gamma0 / (n * n * g0 * a0 * worst_beta)
}

/// Beam and power chosen for a feasible decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliableBeam {
    pub a0: f64,
    /// Probability that the device lies in `region`.
    pub coverage: f64,
    pub iterations: u32,
    pub beamwidths: Beamwidths,
    pub region: Ellipse2D,
    /// Footprint point with the largest path loss.
    pub worst_point: Cartesian3,
    pub worst_beta: f64,
    /// Transmit power, watts.
    pub power: f64,
}

/// Full record of one power control decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerDecision {
    pub pointing: Pointing,
    pub phase_profile: PhaseProfile,
    pub gamma0: f64,
    /// Fading power quantile `G0` at level `δ`.
    pub g0: f64,
    pub search: AfGainSearch,
    /// `None` when no beam meets the positioning target.
    pub beam: Option<ReliableBeam>,
}

impl PowerDecision {
    pub fn feasible(&self) -> bool {
        self.beam.is_some()
    }

    /// Transmit power in watts, if feasible.
    pub fn power(&self) -> Option<f64> {
        self.beam.map(|b| b.power)
    }
}

/// Power control with the fading quantile read from a prebuilt table.
pub fn power_control(
    scenario: &Scenario,
    belief: &PositionBelief,
    table: &FadingQuantileTable,
) -> Result<PowerDecision> {
    if (table.k_db() - scenario.k_db()).abs() > 1e-9 {
        return Err(invalid(
            "fading table",
            format!("built for K = {} dB, scenario has {} dB", table.k_db(), scenario.k_db()),
        ));
    }
    let g0 = table.lookup(scenario.requirement.delta)?;
    power_control_with_quantile(scenario, belief, g0)
}

/// Power control for a given fading quantile `g0`.
pub fn power_control_with_quantile(
    scenario: &Scenario,
    belief: &PositionBelief,
    g0: f64,
) -> Result<PowerDecision> {
    if !(g0 > 0.0 && g0.is_finite()) {
        return Err(Error::Domain(format!("fading quantile {g0} must be positive")));
    }
    let req = &scenario.requirement;
    let gamma0 = min_snr(req);
    let pointing = scenario.pointing_for(belief)?;
    let profile = phase_profile(pointing, &scenario.bs_spherical(), &scenario.ris);
    let search = reliable_af_gain(scenario, belief, pointing, req.epsilon, &scenario.search)?;
    let beam = match search {
        AfGainSearch::Infeasible { .. } => None,
        AfGainSearch::Feasible {
            a0,
            iterations,
            probability,
        } => {
            let (bw, region) = illuminated_region(scenario, pointing, a0)?;
            let worst_point = farthest_floor_point(&region, pointing.phi_hat, scenario.height);
            let worst_beta = path_loss(&worst_point, &scenario.bs_position, &scenario.link)?;
            let power = bound_power(
                scenario.link.noise_power,
                gamma0,
                scenario.ris.n_elements(),
                g0,
                a0,
                worst_beta,
            );
            Some(ReliableBeam {
                a0,
                coverage: probability,
                iterations,
                beamwidths: bw,
                region,
                worst_point,
                worst_beta,
                power,
            })
        }
    };
    Ok(PowerDecision {
        pointing,
        phase_profile: profile,
        gamma0,
        g0,
        search,
        beam,
    })
}
