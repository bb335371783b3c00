//! Modified Bessel function I₀, Marcum Q₁ and the Rice distribution with unit
//! second moment.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

/// Largest Rician K-factor (linear) the evaluators support.
pub const MAX_K_FACTOR: f64 = 100.0;

const SERIES_LIMIT: f64 = 15.0;

/// Exponentially scaled `e^{-x} I₀(x)` for `x >= 0`.
///
/// Power series below 15, asymptotic expansion above. Relative error is
/// below 1e-13 on both branches.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        (-x).exp() * i0_series(x)
    } else {
        i0e_asymptotic(x)
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        i0_series(x)
    } else {
        i0e_asymptotic(x) * x.exp()
    }
}

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn i0e_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        if next >= term || next < 1e-17 * sum {
            if next < term {
                sum += next;
            }
            break;
        }
        term = next;
        sum += term;
    }
    sum / (2.0 * PI * x).sqrt()
}

/// `P(N_y > N_k)` and its complement for independent Poisson variables with
/// means `y` and `k`.
///
/// Both returned values are positive series, so whichever is small keeps full
/// relative accuracy.
fn poisson_race(y: f64, k: f64) -> (f64, f64) {
    if y == 0.0 {
        return (0.0, 1.0);
    }
    if y > 700.0 {
        return (1.0, 0.0);
    }
    // pmf of N_y by recurrence, cdf of N_k accumulated alongside.
    let mut pmf_y = (-y).exp();
    let mut pmf_k = (-k).exp();
    let mut cdf_k_prev = 0.0f64; // P(N_k <= i - 1)
    let mut lower = 0.0; // Σ pmf_y(i) P(N_k <= i-1)
    let mut upper = 0.0; // Σ pmf_y(i) P(N_k >= i)
    let start_log = |i: usize| (i as f64) * y.ln() - y - ln_gamma(i as f64 + 1.0);
    let mut i = 0usize;
    loop {
        if pmf_y == 0.0 && (i as f64) < y {
            // e^{-y} underflowed in the recurrence; restart from logs.
            pmf_y = start_log(i).exp();
        }
        let sf_k = (1.0 - cdf_k_prev).max(0.0);
        lower += pmf_y * cdf_k_prev;
        upper += pmf_y * sf_k;
        cdf_k_prev += pmf_k;
        i += 1;
        pmf_k *= k / i as f64;
        pmf_y *= y / i as f64;
        let beyond = (i as f64) > y + 10.0 && (i as f64) > k + 10.0;
        if beyond && pmf_y < 1e-18 * (lower + upper).max(1e-300) {
            break;
        }
        if i > 5000 {
            break;
        }
    }
    let total = lower + upper;
    (lower / total, upper / total)
}

/// Marcum Q-function of order one, `Q₁(a, b)`.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    poisson_race(0.5 * b * b, 0.5 * a * a).1
}

/// Rice amplitude distribution with shape `K` and `E[r²] = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rice {
    k: f64,
    nu: f64,
    sigma2: f64,
}

impl Rice {
    /// `k` is the linear K-factor, `0 <= k <= MAX_K_FACTOR`.
    pub fn new(k: f64) -> Option<Self> {
        if !(0.0..=MAX_K_FACTOR).contains(&k) {
            return None;
        }
        Some(Self {
            k,
            nu: (k / (k + 1.0)).sqrt(),
            sigma2: 0.5 / (k + 1.0),
        })
    }

    pub fn k_factor(&self) -> f64 {
        self.k
    }

    /// Line-of-sight amplitude `ν`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Per-dimension scatter variance `σ²`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let s2 = self.sigma2;
        let z = r * self.nu / s2;
        r / s2 * (-(r - self.nu).powi(2) / (2.0 * s2)).exp() * bessel_i0e(z)
    }

    /// `P(R <= r)`.
    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        poisson_race(r * r * (self.k + 1.0), self.k).0
    }

    /// `P(R > r)`.
    pub fn sf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        poisson_race(r * r * (self.k + 1.0), self.k).1
    }
}
