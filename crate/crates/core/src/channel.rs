//! Path loss, Rician fading and SNR assembly.
//!
//! The end-to-end fading power is the product `|g_u g_b|²` of two independent
//! unit-power Rice amplitudes. Its lower tail is evaluated deterministically,
//! by one-dimensional quadrature over one amplitude of the closed-form CDF of
//! the other, and inverted by bracketing. Sampling is only used as an
//! independent check.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::geometry::Cartesian3;
use crate::numeric::{illinois, integrate_with_breaks};
use crate::special::{Rice, MAX_K_FACTOR};
use crate::units::db_to_linear;
use crate::{Error, Result};

/// Large-scale link parameters, all linear / SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Path gain at the reference distance.
    pub beta0: f64,
    /// Reference distance, meters.
    pub d0: f64,
    /// Path loss exponent.
    pub xi: f64,
    /// Product of the BS and UE antenna gains.
    pub g_bu: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
    /// Rician K-factor.
    pub k_factor: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta0", self.beta0),
            ("d0", self.d0),
            ("xi", self.xi),
            ("g_bu", self.g_bu),
            ("noise_power", self.noise_power),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive and finite")));
            }
        }
        if !(self.k_factor >= 0.0 && self.k_factor <= MAX_K_FACTOR) {
            return Err(invalid(
                "k_factor",
                format!("{} must lie in [0, {MAX_K_FACTOR}]", self.k_factor),
            ));
        }
        Ok(())
    }
}

/// Cascaded BS-RIS-UE path gain `β0² G_b G_u (d0² / (‖x_u‖ ‖x_b‖))^ξ`.
pub fn path_loss(x_u: &Cartesian3, x_b: &Cartesian3, lb: &LinkBudget) -> Result<f64> {
    let (ru, rb) = (x_u.norm(), x_b.norm());
    if ru == 0.0 || rb == 0.0 {
        return Err(Error::Domain("path loss undefined at the RIS center".into()));
    }
    Ok(path_loss_from_distances(ru, rb, lb))
}

#[inline]
pub(crate) fn path_loss_from_distances(ru: f64, rb: f64, lb: &LinkBudget) -> f64 {
    lb.beta0 * lb.beta0 * lb.g_bu * (lb.d0 * lb.d0 / (ru * rb)).powf(lb.xi)
}

/// One Rice amplitude with `E[|g|²] = 1`.
///
/// `k = +∞` is the deterministic line-of-sight limit.
pub fn rice_amplitude_sample<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    if k.is_infinite() {
        return 1.0;
    }
    let nu = (k / (k + 1.0)).sqrt();
    let s = (0.5 / (k + 1.0)).sqrt();
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (nu + a * s).hypot(b * s)
}

/// `P(|g_u|² |g_b|² <= t)` for independent unit-power Rice amplitudes.
pub fn product_fading_cdf(t: f64, k: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("fading power threshold {t} is negative")));
    }
    let rice = Rice::new(k).ok_or_else(|| invalid("k_factor", format!("{k} out of range")))?;
    Ok(product_cdf(&rice, t))
}

fn product_cdf(rice: &Rice, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return 1.0;
    }
    let root = t.sqrt();
    let nu = rice.nu();
    let s = rice.sigma2().sqrt();
    let x_max = nu + 40.0 * s;
    // Breakpoints: the density bulk around ν and a geometric ladder toward 0,
    // where the CDF of the other amplitude saturates at scale √t.
    let mut breaks = vec![0.0];
    let floor = (root * 1e-6).min(1e-3 * x_max);
    let mut b = floor;
    while b < x_max {
        breaks.push(b);
        b *= 2.0;
    }
    for j in -8..=8 {
        let p = nu + j as f64 * s;
        if p > 0.0 && p < x_max {
            breaks.push(p);
        }
    }
    breaks.push(x_max);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let integrand = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        rice.cdf(root / x) * rice.pdf(x)
    };
    let (v, _) = integrate_with_breaks(integrand, &breaks, 1e-17, 1e-11);
    v.clamp(0.0, 1.0)
}

/// Fading power level `G0` with `P(|g_u g_b|² <= G0) = delta`.
pub fn fading_icdf(delta: f64, k: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Domain(format!("fading outage {delta} outside (0, 0.5]")));
    }
    let rice = Rice::new(k).ok_or_else(|| invalid("k_factor", format!("{k} out of range")))?;
    icdf(&rice, delta)
}

fn icdf(rice: &Rice, delta: f64) -> Result<f64> {
    let target = delta.ln();
    let f = |s: f64| product_cdf(rice, s.exp()).max(1e-300).ln() - target;
    let mut hi = 1.0f64.ln();
    while f(hi) < 0.0 {
        hi += 2.0;
        if hi > 20.0 {
            return Err(Error::Domain(format!("no fading quantile for {delta}")));
        }
    }
    let mut lo = hi - 4.0;
    while f(lo) > 0.0 {
        lo -= 4.0;
        if lo < -700.0 {
            return Err(Error::Domain(format!("no fading quantile for {delta}")));
        }
    }
    // 1e-9 in log-probability is far inside the required 1e-3 relative.
    illinois(f, lo, hi, 1e-12, 1e-9)
        .map(f64::exp)
        .ok_or_else(|| Error::Domain(format!("fading quantile search failed for {delta}")))
}

/// Received SNR `(P/σ²) β |g_b g_u|² N² |A|²`.
pub fn snr(
    power: f64,
    beta: f64,
    fading_power: f64,
    af_gain: f64,
    n_elements: usize,
    sigma2: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    if power < 0.0 || beta < 0.0 || fading_power < 0.0 || af_gain < 0.0 {
        return Err(Error::Domain("SNR factors must be non-negative".into()));
    }
    let n = n_elements as f64;
    Ok(power / sigma2 * beta * fading_power * n * n * af_gain)
}

/// Log-spaced outage grid a quantile table is built on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for QuantileGrid {
    fn default() -> Self {
        Self {
            min: 1e-8,
            max: 0.5,
            points: 161,
        }
    }
}

impl QuantileGrid {
    fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min < self.max && self.max <= 0.5 && self.points >= 2) {
            return Err(Error::Table(format!("invalid grid {self:?}")));
        }
        Ok(())
    }

    fn deltas(&self) -> Vec<f64> {
        let (a, b) = (self.min.ln(), self.max.ln());
        let n = self.points - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.max
                } else if i == 0 {
                    self.min
                } else {
                    (a + (b - a) * i as f64 / n as f64).exp()
                }
            })
            .collect()
    }
}

/// Tabulated inverse CDF of the product fading power.
///
/// Interpolation is monotone cubic (Fritsch-Carlson) in `(ln δ, ln G0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingQuantileTable {
    k_db: f64,
    grid: QuantileGrid,
    deltas: Vec<f64>,
    g0: Vec<f64>,
    log_d: Vec<f64>,
    log_g: Vec<f64>,
    slopes: Vec<f64>,
}

const TABLE_MAGIC: &str = "# ris-urllc fading quantile table v1";

impl FadingQuantileTable {
    /// Builds the table for a K-factor given in dB.
    pub fn build(k_db: f64, grid: QuantileGrid) -> Result<Self> {
        grid.validate()?;
        let k = db_to_linear(k_db);
        let rice = Rice::new(k).ok_or_else(|| invalid("k_factor", format!("{k_db} dB out of range")))?;
        let deltas = grid.deltas();
        let g0 = deltas
            .iter()
            .map(|&d| icdf(&rice, d))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(k_db, grid, deltas, g0)
    }

    fn from_rows(k_db: f64, grid: QuantileGrid, deltas: Vec<f64>, g0: Vec<f64>) -> Result<Self> {
        if deltas.len() != grid.points || g0.len() != grid.points {
            return Err(Error::Table("row count does not match the grid".into()));
        }
        if deltas.windows(2).any(|w| !(w[1] > w[0])) || g0.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Table("table is not strictly increasing".into()));
        }
        if g0.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Table("non-positive fading quantile".into()));
        }
        let log_d: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
        let log_g: Vec<f64> = g0.iter().map(|g| g.ln()).collect();
        let slopes = pchip_slopes(&log_d, &log_g);
        Ok(Self {
            k_db,
            grid,
            deltas,
            g0,
            log_d,
            log_g,
            slopes,
        })
    }

    pub fn k_db(&self) -> f64 {
        self.k_db
    }

    pub fn grid(&self) -> QuantileGrid {
        self.grid
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.deltas.iter().copied().zip(self.g0.iter().copied())
    }

    /// Interpolated `G0(δ)`.
    pub fn lookup(&self, delta: f64) -> Result<f64> {
        let lo = self.deltas[0];
        let hi = *self.deltas.last().expect("non-empty");
        if !(delta >= lo && delta <= hi) {
            return Err(Error::Domain(format!(
                "outage {delta} outside the tabulated range [{lo}, {hi}]"
            )));
        }
        let x = delta.ln();
        let i = match self.log_d.partition_point(|&v| v <= x) {
            0 => 0,
            p => (p - 1).min(self.log_d.len() - 2),
        };
        let (x0, x1) = (self.log_d[i], self.log_d[i + 1]);
        let (y0, y1) = (self.log_g[i], self.log_g[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let y = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * self.slopes[i + 1];
        Ok(y.exp())
    }

    /// Text form: magic line, key header, key values, column header, rows.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{TABLE_MAGIC}");
        let _ = writeln!(s, "K_dB,grid_min,grid_max,points");
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{}",
            self.k_db, self.grid.min, self.grid.max, self.grid.points
        );
        let _ = writeln!(s, "delta,G0");
        for (d, g) in self.rows() {
            let _ = writeln!(s, "{d:?},{g:?}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |what: &str| Error::Table(format!("malformed table: {what}"));
        if lines.next() != Some(TABLE_MAGIC) {
            return Err(bad("missing or unsupported version line"));
        }
        if lines.next().map(str::trim) != Some("K_dB,grid_min,grid_max,points") {
            return Err(bad("key header"));
        }
        let key: Vec<&str> = lines.next().ok_or_else(|| bad("key line"))?.split(',').collect();
        if key.len() != 4 {
            return Err(bad("key line"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(s));
        let k_db = num(key[0])?;
        let grid = QuantileGrid {
            min: num(key[1])?,
            max: num(key[2])?,
            points: key[3].trim().parse().map_err(|_| bad(key[3]))?,
        };
        if lines.next().map(str::trim) != Some("delta,G0") {
            return Err(bad("column header"));
        }
        let mut deltas = Vec::new();
        let mut g0 = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (d, g) = line.split_once(',').ok_or_else(|| bad(line))?;
            deltas.push(num(d)?);
            g0.push(num(g)?);
        }
        grid.validate()?;
        Self::from_rows(k_db, grid, deltas, g0)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    /// Loads a cached table if its key matches, otherwise rebuilds and
    /// rewrites the cache. Returns the table and whether it was rebuilt.
    pub fn load_or_build(path: &Path, k_db: f64, grid: QuantileGrid) -> Result<(Self, bool)> {
        if let Ok(t) = Self::load(path) {
            if t.k_db == k_db && t.grid == grid {
                return Ok((t, false));
            }
        }
        let t = Self::build(k_db, grid)?;
        t.save(path)?;
        Ok((t, true))
    }
}

/// Fritsch-Carlson derivative estimates for a monotone cubic interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secant: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    if n == 2 {
        return vec![secant[0]; 2];
    }
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        let (d0, d1) = (secant[i - 1], secant[i]);
        if d0 * d1 <= 0.0 {
            m[i] = 0.0;
        } else {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m[0] = secant[0];
    m[n - 1] = secant[n - 2];
    m
}
