//! Experiment configuration file.
//!
//! Every field has a default, so an empty file describes the reference
//! industrial scenario. Quantities carry their unit in the key name.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ris_urllc::array::RisGeometry;
use ris_urllc::channel::{LinkBudget, QuantileGrid};
use ris_urllc::control::{SearchConfig, UrllcRequirement};
use ris_urllc::geometry::Cartesian3;
use ris_urllc::montecarlo::McConfig;
use ris_urllc::units::{db_to_linear, dbm_to_watts, thermal_noise_watts};
use ris_urllc::Scenario;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub room_side_m: f64,
    pub ceiling_height_m: f64,
    pub bs_position_m: [f64; 3],
    pub wavelength_m: f64,
    /// Element spacing as a fraction of the wavelength.
    pub element_spacing_wavelengths: f64,
    pub n_elements: usize,
    pub sigma_u_m: f64,
    pub payload_bytes: f64,
    pub bandwidth_khz: f64,
    pub deadline_ms: f64,
    pub reliability: f64,
    pub k_factor_db: f64,
    /// Product of the BS and UE antenna gains.
    pub antenna_gain_db: f64,
    pub reference_distance_m: f64,
    pub path_loss_exponent: f64,
    pub reference_path_gain_db: f64,
    /// Share of the outage budget given to fading; the rest goes to
    /// positioning.
    pub fading_share: f64,
    pub a_min: f64,
    pub nu: f64,
    pub noise: NoiseConfig,
    /// Motion directions, degrees.
    pub psi_deg: Vec<f64>,
    pub heatmap: HeatmapConfig,
    pub sweep: SweepConfig,
    pub monte_carlo: MonteCarloConfig,
    pub quantile_table: QuantileTableConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub noise_figure_db: f64,
    /// Replaces the thermal noise model when set.
    pub power_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub points: usize,
    pub phi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub samples: u64,
    pub seed: u64,
    /// `0` uses one worker per core.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantileTableConfig {
    /// Cache file; rebuilt when its key does not match.
    pub path: Option<PathBuf>,
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            room_side_m: 15.0,
            ceiling_height_m: 25.0,
            bs_position_m: [-5.0, -5.0, 5.0],
            wavelength_m: 0.333,
            element_spacing_wavelengths: 0.5,
            n_elements: 100,
            sigma_u_m: 0.3,
            payload_bytes: 32.0,
            bandwidth_khz: 360.0,
            deadline_ms: 0.5,
            reliability: 0.99999,
            k_factor_db: 6.0,
            antenna_gain_db: 12.85,
            reference_distance_m: 1.0,
            path_loss_exponent: 2.0,
            reference_path_gain_db: -31.53,
            fading_share: 0.9,
            a_min: 0.1,
            nu: 0.028125,
            noise: NoiseConfig::default(),
            psi_deg: vec![0.0, 45.0, -45.0],
            heatmap: HeatmapConfig::default(),
            sweep: SweepConfig::default(),
            monte_carlo: MonteCarloConfig::default(),
            quantile_table: QuantileTableConfig::default(),
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            noise_figure_db: 0.0,
            power_dbm: None,
        }
    }
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            x_min_m: 0.0,
            x_max_m: 15.0,
            y_min_m: 0.0,
            y_max_m: 15.0,
            nx: 60,
            ny: 60,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            theta_min_deg: 0.0,
            theta_max_deg: 40.0,
            points: 43,
            phi_deg: 45.0,
        }
    }
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            samples: 10_000_000,
            seed: 1,
            workers: 0,
        }
    }
}

impl Default for QuantileTableConfig {
    fn default() -> Self {
        let g = QuantileGrid::default();
        Self {
            path: None,
            delta_min: g.min,
            delta_max: g.max,
            points: g.points,
        }
    }
}

fn field(name: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{name}`: {reason}"))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("{v} must be positive and finite")))
    }
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("{v} is not finite")))
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, CliError> {
        positive("room_side_m", self.room_side_m)?;
        positive("ceiling_height_m", self.ceiling_height_m)?;
        for (i, v) in self.bs_position_m.iter().enumerate() {
            finite(&format!("bs_position_m[{i}]"), *v)?;
        }
        if self.bs_position_m.iter().all(|&v| v == 0.0) {
            return Err(field("bs_position_m", "must not coincide with the RIS center"));
        }
        positive("wavelength_m", self.wavelength_m)?;
        let s = self.element_spacing_wavelengths;
        if !(s > 0.0 && s < 1.0) {
            return Err(field("element_spacing_wavelengths", format!("{s} outside (0, 1)")));
        }
        let side = (self.n_elements as f64).sqrt().round() as usize;
        if self.n_elements == 0 || side * side != self.n_elements {
            return Err(field("n_elements", format!("{} is not a positive perfect square", self.n_elements)));
        }
        positive("sigma_u_m", self.sigma_u_m)?;
        positive("payload_bytes", self.payload_bytes)?;
        positive("bandwidth_khz", self.bandwidth_khz)?;
        positive("deadline_ms", self.deadline_ms)?;
        if !(self.reliability > 0.0 && self.reliability < 1.0) {
            return Err(field("reliability", format!("{} outside (0, 1)", self.reliability)));
        }
        finite("k_factor_db", self.k_factor_db)?;
        let k = db_to_linear(self.k_factor_db);
        if k > ris_urllc::special::MAX_K_FACTOR {
            return Err(field("k_factor_db", format!("{} dB above the supported 20 dB", self.k_factor_db)));
        }
        finite("antenna_gain_db", self.antenna_gain_db)?;
        positive("reference_distance_m", self.reference_distance_m)?;
        positive("path_loss_exponent", self.path_loss_exponent)?;
        finite("reference_path_gain_db", self.reference_path_gain_db)?;
        if !(self.fading_share > 0.0 && self.fading_share < 1.0) {
            return Err(field("fading_share", format!("{} outside (0, 1)", self.fading_share)));
        }
        positive("nu", self.nu)?;
        if !(self.a_min > 0.0 && self.a_min < 1.0 - self.nu) {
            return Err(field("a_min", format!("{} must lie in (0, 1 - nu)", self.a_min)));
        }
        finite("noise.noise_figure_db", self.noise.noise_figure_db)?;
        if let Some(p) = self.noise.power_dbm {
            finite("noise.power_dbm", p)?;
        }
        if self.psi_deg.is_empty() {
            return Err(field("psi_deg", "needs at least one direction"));
        }
        for &p in &self.psi_deg {
            if !(p.abs() < 90.0) {
                return Err(field("psi_deg", format!("{p} must lie in (-90, 90)")));
            }
        }
        let h = &self.heatmap;
        for (name, v) in [("heatmap.x_min_m", h.x_min_m), ("heatmap.x_max_m", h.x_max_m), ("heatmap.y_min_m", h.y_min_m), ("heatmap.y_max_m", h.y_max_m)] {
            finite(name, v)?;
        }
        if !(h.x_max_m >= h.x_min_m && h.y_max_m >= h.y_min_m) {
            return Err(field("heatmap", "max bound below min bound"));
        }
        if h.nx == 0 || h.ny == 0 {
            return Err(field("heatmap.nx/ny", "grid needs at least one point per axis"));
        }
        let sw = &self.sweep;
        if !(sw.theta_min_deg >= 0.0 && sw.theta_max_deg >= sw.theta_min_deg && sw.theta_max_deg < 90.0) {
            return Err(field("sweep.theta_*_deg", "need 0 <= min <= max < 90"));
        }
        if sw.points == 0 {
            return Err(field("sweep.points", "must be at least 1"));
        }
        finite("sweep.phi_deg", sw.phi_deg)?;
        if self.monte_carlo.samples < 1000 {
            return Err(field("monte_carlo.samples", format!("{} is below 1000", self.monte_carlo.samples)));
        }
        let q = &self.quantile_table;
        if !(q.delta_min > 0.0 && q.delta_min < q.delta_max && q.delta_max <= 0.5 && q.points >= 2) {
            return Err(field("quantile_table", "need 0 < delta_min < delta_max <= 0.5 and points >= 2"));
        }
        let delta = self.fading_share * (1.0 - self.reliability);
        if !(delta >= q.delta_min && delta <= q.delta_max) {
            return Err(field("quantile_table", format!("fading share of the outage budget {delta:e} is outside the table")));
        }

        let scenario = self.scenario()?;
        let mut warnings = Vec::new();
        if !scenario.is_far_field() {
            warnings.push(format!(
                "floor at {} m is inside the Fraunhofer distance {:.2} m of the RIS",
                self.ceiling_height_m,
                scenario.ris.fraunhofer_distance()
            ));
        }
        Ok(warnings)
    }

    pub fn noise_power_watts(&self) -> f64 {
        match self.noise.power_dbm {
            Some(dbm) => dbm_to_watts(dbm),
            None => thermal_noise_watts(self.bandwidth_khz * 1e3, self.noise.noise_figure_db),
        }
    }

    /// Library scenario in SI units.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let lambda = self.wavelength_m;
        let ris = RisGeometry::new(self.n_elements, self.element_spacing_wavelengths * lambda, lambda)
            .map_err(|e| field("n_elements/element_spacing_wavelengths", e))?;
        let requirement = UrllcRequirement::with_split(
            8.0 * self.payload_bytes,
            self.bandwidth_khz * 1e3,
            self.deadline_ms * 1e-3,
            self.reliability,
            self.fading_share,
        )
        .map_err(|e| field("reliability/fading_share", e))?;
        let [x, y, z] = self.bs_position_m;
        let scenario = Scenario {
            ris,
            height: self.ceiling_height_m,
            room_side: self.room_side_m,
            bs_position: Cartesian3::new(x, y, z),
            link: LinkBudget {
                beta0: db_to_linear(self.reference_path_gain_db),
                d0: self.reference_distance_m,
                xi: self.path_loss_exponent,
                g_bu: db_to_linear(self.antenna_gain_db),
                noise_power: self.noise_power_watts(),
                k_factor: db_to_linear(self.k_factor_db),
            },
            requirement,
            search: SearchConfig {
                a_min: self.a_min,
                nu: self.nu,
            },
            sigma_u: self.sigma_u_m,
        };
        scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(scenario)
    }

    pub fn quantile_grid(&self) -> QuantileGrid {
        QuantileGrid {
            min: self.quantile_table.delta_min,
            max: self.quantile_table.delta_max,
            points: self.quantile_table.points,
        }
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            n_samples: self.monte_carlo.samples,
            master_seed: self.monte_carlo.seed,
            n_workers: self.monte_carlo.workers,
        }
    }

    /// Motion directions in radians.
    pub fn psi_rad(&self) -> Vec<f64> {
        self.psi_deg.iter().map(|d| d.to_radians()).collect()
    }

    /// SHA-256 of the effective configuration, worker count excluded since it
    /// does not affect results.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.monte_carlo.workers = 0;
        let text = toml::to_string(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}
