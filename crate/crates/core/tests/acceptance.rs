//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! hard criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 1 3 9`.

mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_urllc::array::{af_gain_closed, af_gain_direct, phase_profile, RisGeometry};
use ris_urllc::channel::{FadingQuantileTable, QuantileGrid};
use ris_urllc::control::{
    coverage_probability, illuminated_region, power_control_with_quantile, reliable_af_gain,
    AfGainSearch,
};
use ris_urllc::geometry::{Ellipse2D, Pointing, Spherical};
use ris_urllc::montecarlo::{compare_with_oracle, McConfig, OracleComparison};
use ris_urllc::stats::{ellipse_probability, PositionBelief};
use ris_urllc::units::{db_to_linear, watts_to_dbm};
use ris_urllc::Scenario;

// Pinned thresholds.
const FIG2_REL_TOL: f64 = 0.02;
const AF_EQUIV_ABS_TOL: f64 = 1e-10;
const AF_EQUIV_CONFIGS: usize = 10_000;
const RAYLEIGH_ABS_TOL: f64 = 1e-9;
const ELLIPSE_CASES: usize = 100;
const ELLIPSE_MC_SAMPLES: u64 = 10_000_000;
const ELLIPSE_SIGMAS: f64 = 3.0;
const FADING_REL_TOL: f64 = 0.05;
const FADING_MC_SAMPLES: u64 = 100_000_000;
const FADING_TILT: f64 = 300.0;
const CONSERVATIVE_SCENARIOS: usize = 50;
const MC_SAMPLES: u64 = 10_000_000;
const SWEEP_POINTS: usize = 11;
const SWEEP_MAX_DEG: f64 = 40.0;
const GAP_BAND_DB: (f64, f64) = (1.0, 5.0);
const PC_OUTAGE_BAND_PSI0: (f64, f64) = (6e-6, 9e-6);
const PC_OUTAGE_CEILING: f64 = 1e-5;
const SPEARMAN_MIN: f64 = 0.8;
const OPT_SIGMAS: f64 = 3.0;
const SEARCH_BELIEFS: usize = 100;
const SEARCH_ITERATIONS: u32 = 5;
const POWER_BAND_DBM: (f64, f64) = (10.0, 20.0);
const HEATMAP_SIDE: usize = 16;
const DETERMINISM_WORKERS: [usize; 3] = [1, 4, 8];
const DETERMINISM_CONSERVATIVE_SUBSET: usize = 10;
const SEED: u64 = 20_240_611;

const PSIS: [f64; 3] = [0.0, FRAC_PI_4, -FRAC_PI_4];

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    SoftFail,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn hard(pass: bool, detail: String) -> Self {
        let verdict = if pass { Verdict::Pass } else { Verdict::Fail };
        Self { verdict, detail }
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

fn belief_at_polar(s: &Scenario, theta: f64, phi: f64, psi: f64) -> PositionBelief {
    let rho = s.height * theta.tan();
    s.belief_at(rho * phi.cos(), rho * phi.sin(), psi).unwrap()
}

fn fading_quantile(s: &Scenario) -> f64 {
    let table = FadingQuantileTable::build(s.k_db(), QuantileGrid::default()).unwrap();
    table.lookup(s.requirement.delta).unwrap()
}

fn mc(workers: usize) -> McConfig {
    McConfig {
        n_samples: MC_SAMPLES,
        master_seed: SEED,
        n_workers: workers,
    }
}

fn criterion_1() -> Outcome {
    let s = Scenario::reference();
    let pointing = Pointing::new(FRAC_PI_6, FRAC_PI_4);
    // Reference footprints: (A0, center, a', b').
    let refs = [
        (0.9, 10.2268559702142, 1.29877355109335, 0.9737108975288),
        (0.1, 10.6033536581688, 5.72209035349177, 4.26064583985972),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (a0, c, a, b) in refs {
        let (_, e) = illuminated_region(&s, pointing, a0).unwrap();
        let errs = [
            rel_err(e.center[0], c),
            rel_err(e.center[1], c),
            rel_err(e.semi_major, a),
            rel_err(e.semi_minor, b),
        ];
        pass &= errs.iter().all(|&x| x <= FIG2_REL_TOL);
        parts.push(format!(
            "A0={a0}: center ({:.4},{:.4}) err {:.2}%, a' {:.4} err {:.2}%, b' {:.4} err {:.2}%",
            e.center[0],
            e.center[1],
            100.0 * errs[0].max(errs[1]),
            e.semi_major,
            100.0 * errs[2],
            e.semi_minor,
            100.0 * errs[3]
        ));
    }
    Outcome::hard(pass, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let sizes = [4usize, 16, 100, 400];
    let mut worst: f64 = 0.0;
    for i in 0..AF_EQUIV_CONFIGS {
        let n = sizes[i % sizes.len()];
        let lambda = rng.gen_range(0.01..1.0);
        let g = RisGeometry::new(n, lambda * rng.gen_range(0.1..0.95), lambda).unwrap();
        let pointing = Pointing::new(rng.gen_range(0.0..FRAC_PI_2), rng.gen_range(0.0..2.0 * PI));
        let bs = Spherical::direction(rng.gen_range(0.0..FRAC_PI_2), rng.gen_range(0.0..2.0 * PI));
        let ue = Spherical::direction(rng.gen_range(0.0..FRAC_PI_2), rng.gen_range(0.0..2.0 * PI));
        let profile = phase_profile(pointing, &bs, &g);
        let direct = af_gain_direct(&profile, &ue, &bs, &g);
        let closed = af_gain_closed(pointing, &ue, &g);
        worst = worst.max((direct - closed).abs());
    }
    Outcome::hard(
        worst <= AF_EQUIV_ABS_TOL,
        format!("{AF_EQUIV_CONFIGS} configurations, max |direct - closed| = {worst:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let sigma: f64 = 0.3;
    let circle = PositionBelief::new([0.0, 0.0], [[sigma * sigma, 0.0], [0.0, sigma * sigma]]).unwrap();
    let r = 0.3;
    let exact = 1.0 - (-r * r / (2.0 * sigma * sigma)).exp();
    let got = ellipse_probability(&circle, &Ellipse2D::new([0.0, 0.0], r, r, 0.0).unwrap()).unwrap();
    let rayleigh_err = (got - exact).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut worst_sigmas: f64 = 0.0;
    let mut failures = 0;
    for case in 0..ELLIPSE_CASES {
        let mean = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let (l1, l2): (f64, f64) = (rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0));
        let rot: f64 = rng.gen_range(0.0..PI);
        let (sr, cr) = rot.sin_cos();
        let cov = [
            [l1 * cr * cr + l2 * sr * sr, (l1 - l2) * sr * cr],
            [(l1 - l2) * sr * cr, l1 * sr * sr + l2 * cr * cr],
        ];
        let center = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let a = rng.gen_range(0.2..2.0);
        let b = rng.gen_range(0.2..=a);
        let angle = rng.gen_range(0.0..PI);
        let belief = PositionBelief::new(mean, cov).unwrap();
        let p = ellipse_probability(&belief, &Ellipse2D::new(center, a, b, angle).unwrap()).unwrap();
        let est = common::mc_ellipse_probability(mean, cov, center, (a, b), angle, ELLIPSE_MC_SAMPLES, SEED + case as u64);
        let sd = (p * (1.0 - p) / ELLIPSE_MC_SAMPLES as f64).sqrt().max(1.0 / ELLIPSE_MC_SAMPLES as f64);
        let z = (est - p).abs() / sd;
        worst_sigmas = worst_sigmas.max(z);
        if z > ELLIPSE_SIGMAS {
            failures += 1;
        }
    }
    Outcome::hard(
        rayleigh_err <= RAYLEIGH_ABS_TOL && failures == 0,
        format!(
            "Rayleigh |err| = {rayleigh_err:.1e}; {ELLIPSE_CASES} random cases, worst deviation {worst_sigmas:.2} sigma, {failures} beyond {ELLIPSE_SIGMAS}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let s = Scenario::reference();
    let delta = s.requirement.delta;
    let g0 = fading_quantile(&s);
    let (est, se) = common::tilted_fading_quantile(
        db_to_linear(6.0),
        delta,
        FADING_TILT,
        FADING_MC_SAMPLES,
        1e-4,
        SEED ^ 4,
    );
    let err = rel_err(g0, est);
    Outcome::hard(
        err <= FADING_REL_TOL,
        format!("G0 = {g0:.5e}, tilted MC = {est:.5e} (tail rel. s.e. {se:.3}), rel. diff {:.2}%", 100.0 * err),
    )
}

struct RandomCase {
    belief: PositionBelief,
    point: u64,
}

fn conservative_cases(s: &Scenario, g0: f64) -> Vec<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    let mut cases = Vec::new();
    let mut scenario = *s;
    for (pi, &psi) in PSIS.iter().enumerate() {
        let mut accepted = 0;
        while accepted < CONSERVATIVE_SCENARIOS {
            scenario.sigma_u = rng.gen_range(0.1..0.5);
            let x = rng.gen_range(0.0..s.room_side);
            let y = rng.gen_range(0.0..s.room_side);
            let belief = scenario.belief_at(x, y, psi).unwrap();
            let d = power_control_with_quantile(&scenario, &belief, g0).unwrap();
            if d.feasible() {
                cases.push(RandomCase {
                    belief,
                    point: (10_000 + pi * 1000 + accepted) as u64,
                });
                accepted += 1;
            }
        }
    }
    cases
}

fn run_conservative(s: &Scenario, g0: f64, cases: &[RandomCase], workers: usize) -> Vec<OracleComparison> {
    cases
        .iter()
        .map(|c| compare_with_oracle(s, &c.belief, g0, &mc(workers), c.point).unwrap())
        .collect()
}

fn criterion_5(results: &[OracleComparison]) -> Outcome {
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for r in results {
        let o = r.outage_pc.unwrap();
        worst = worst.max(o.p_out);
        if o.p_out > PC_OUTAGE_CEILING + o.ci_halfwidth {
            violations += 1;
        }
    }
    Outcome::hard(
        violations == 0,
        format!(
            "{} random feasible beliefs, max PC outage {worst:.2e}, {violations} above 1e-5 + CI",
            results.len()
        ),
    )
}

fn sweep_thetas() -> Vec<f64> {
    (0..SWEEP_POINTS)
        .map(|i| (SWEEP_MAX_DEG * i as f64 / (SWEEP_POINTS - 1) as f64).to_radians())
        .collect()
}

fn run_sweep(s: &Scenario, g0: f64, workers: usize) -> Vec<Vec<OracleComparison>> {
    PSIS.iter()
        .enumerate()
        .map(|(pi, &psi)| {
            sweep_thetas()
                .iter()
                .enumerate()
                .map(|(i, &th)| {
                    let b = belief_at_polar(s, th, FRAC_PI_4, psi);
                    compare_with_oracle(s, &b, g0, &mc(workers), (pi * 100 + i) as u64).unwrap()
                })
                .collect()
        })
        .collect()
}

fn criterion_6(sweep: &[Vec<OracleComparison>]) -> Outcome {
    let gaps: Vec<f64> = sweep.iter().flatten().map(|r| r.gap_db().unwrap()).collect();
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let outside = gaps.iter().filter(|&&g| g < GAP_BAND_DB.0 || g > GAP_BAND_DB.1).count();
    Outcome::hard(
        outside == 0,
        format!("{} sweep points, gap range [{lo:.2}, {hi:.2}] dB, {outside} outside [1.0, 5.0] dB", gaps.len()),
    )
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn criterion_7(sweep: &[Vec<OracleComparison>]) -> Outcome {
    let outages = |row: &Vec<OracleComparison>| -> Vec<(f64, f64)> {
        row.iter()
            .map(|r| {
                let o = r.outage_pc.unwrap();
                (o.p_out, o.ci_halfwidth)
            })
            .collect()
    };
    let psi0 = outages(&sweep[0]);
    let band_ok = psi0
        .iter()
        .all(|&(p, ci)| p + ci >= PC_OUTAGE_BAND_PSI0.0 && p - ci <= PC_OUTAGE_BAND_PSI0.1);
    let quarter = outages(&sweep[1]);
    let thetas = sweep_thetas();
    let rho = spearman(&thetas, &quarter.iter().map(|o| o.0).collect::<Vec<_>>());
    let below = sweep.iter().flat_map(outages).all(|(p, ci)| p - ci < PC_OUTAGE_CEILING);
    let fmt = |v: &[(f64, f64)]| v.iter().map(|o| format!("{:.1}", o.0 * 1e6)).collect::<Vec<_>>().join(" ");
    Outcome::hard(
        band_ok && rho > SPEARMAN_MIN && below,
        format!(
            "psi=0 [1e-6]: {} (band {}); psi=pi/4 [1e-6]: {} Spearman {rho:.2}; all < 1e-5: {below}",
            fmt(&psi0),
            if band_ok { "ok" } else { "violated" },
            fmt(&quarter)
        ),
    )
}

fn criterion_8(sweep: &[Vec<OracleComparison>]) -> Outcome {
    let target = Scenario::reference().requirement.outage_target();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for r in sweep.iter().flatten() {
        let o = r.outage_opt.unwrap();
        // The optimum comes from an independent stream of the same size, so
        // the difference of the two estimates carries twice the variance.
        let sd = (2.0 * target * (1.0 - target) / o.n_samples as f64).sqrt();
        let z = (o.p_out - target).abs() / sd;
        worst = worst.max(z);
        if z > OPT_SIGMAS {
            failures += 1;
        }
    }
    Outcome::hard(
        failures == 0,
        format!("fresh-stream outage at P_opt, worst deviation {worst:.2} sigma, {failures} beyond {OPT_SIGMAS}"),
    )
}

fn criterion_9() -> Outcome {
    let mut s = Scenario::reference();
    let cfg = s.search;
    let eps = s.requirement.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let (mut bisected, mut early, mut infeasible, mut bad_iter, mut mismatched) = (0, 0, 0, 0, 0);
    for _ in 0..SEARCH_BELIEFS {
        s.sigma_u = rng.gen_range(0.05..1.0);
        let psi = rng.gen_range(-1.3..1.3);
        let belief = s
            .belief_at(rng.gen_range(0.0..s.room_side), rng.gen_range(0.0..s.room_side), psi)
            .unwrap();
        let pointing = s.pointing_for(&belief).unwrap();
        let out = reliable_af_gain(&s, &belief, pointing, eps, &cfg).unwrap();
        // Dense grid at ν/10 over [a_min, 1 - ν].
        let steps = ((1.0 - cfg.nu - cfg.a_min) / (cfg.nu / 10.0)).round() as usize;
        let mut best = None;
        for k in 0..=steps {
            let a = cfg.a_min + k as f64 * cfg.nu / 10.0;
            if coverage_probability(&s, &belief, pointing, a).unwrap() >= 1.0 - eps {
                best = Some(a);
            }
        }
        match out {
            AfGainSearch::Infeasible { .. } => {
                infeasible += 1;
                if best.is_some() {
                    mismatched += 1;
                }
            }
            AfGainSearch::Feasible { a0, iterations, .. } => {
                if iterations == 0 {
                    early += 1;
                } else {
                    bisected += 1;
                    if iterations != SEARCH_ITERATIONS {
                        bad_iter += 1;
                    }
                }
                match best {
                    Some(g) if (a0 - g).abs() <= cfg.nu => {}
                    _ => mismatched += 1,
                }
            }
        }
    }
    Outcome::hard(
        bad_iter == 0 && mismatched == 0 && bisected > 0,
        format!(
            "{SEARCH_BELIEFS} beliefs: {bisected} bisected ({bad_iter} not in {SEARCH_ITERATIONS} steps), {early} at 1-nu, {infeasible} infeasible; {mismatched} disagree with the grid"
        ),
    )
}

fn criterion_10() -> Outcome {
    let s = Scenario::reference();
    let g0 = fading_quantile(&s);
    let mut powers = Vec::new();
    for &psi in &PSIS {
        for i in 0..HEATMAP_SIDE {
            for j in 0..HEATMAP_SIDE {
                let step = s.room_side / (HEATMAP_SIDE - 1) as f64;
                let b = s.belief_at(i as f64 * step, j as f64 * step, psi).unwrap();
                if let Some(p) = power_control_with_quantile(&s, &b, g0).unwrap().power() {
                    powers.push(watts_to_dbm(p));
                }
            }
        }
    }
    let lo = powers.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = powers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inside = powers.iter().all(|&p| p >= POWER_BAND_DBM.0 && p <= POWER_BAND_DBM.1);
    Outcome {
        verdict: if inside { Verdict::Pass } else { Verdict::SoftFail },
        detail: format!(
            "{} feasible cells, P in [{lo:.2}, {hi:.2}] dBm with thermal noise {:.2} dBm (NF 0 dB), target [10, 20] dBm",
            powers.len(),
            watts_to_dbm(s.link.noise_power)
        ),
    }
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.parse().ok())
        .collect();
    let want = |c: u32| selected.is_empty() || selected.contains(&c);
    let names = [
        "footprint regression",
        "AF closed form vs direct",
        "Gaussian mass over ellipse",
        "fading tail quantile",
        "power control conservativeness",
        "optimality gap",
        "PC outage band",
        "OPT self-consistency",
        "AF gain search",
        "absolute power plausibility (soft)",
        "determinism across workers",
    ];
    let mut failed = 0;
    let mut report = |id: u32, started: Instant, o: Outcome| {
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::SoftFail => "SOFT-FAIL",
        };
        println!(
            "criterion {id:>2} {tag:<9} {} ({:.1}s): {}",
            names[id as usize - 1],
            started.elapsed().as_secs_f64(),
            o.detail
        );
    };

    let simple: [(u32, fn() -> Outcome); 5] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (9, criterion_9),
    ];
    for (id, f) in simple.iter().take(4) {
        if want(*id) {
            let t = Instant::now();
            report(*id, t, f());
        }
    }

    let s = Scenario::reference();
    let g0 = fading_quantile(&s);
    let need_cons = want(5) || want(11);
    let need_sweep = [6, 7, 8, 11].iter().any(|&c| want(c));
    let cases = conservative_cases(&s, g0);
    let mut cons = Vec::new();
    if need_cons {
        let t = Instant::now();
        let subset = if want(5) { &cases[..] } else { &cases[..DETERMINISM_CONSERVATIVE_SUBSET] };
        cons = run_conservative(&s, g0, subset, DETERMINISM_WORKERS[0]);
        if want(5) {
            report(5, t, criterion_5(&cons));
        }
    }
    let mut sweep = Vec::new();
    if need_sweep {
        let t = Instant::now();
        sweep = run_sweep(&s, g0, DETERMINISM_WORKERS[0]);
        let elapsed = Instant::now();
        for (id, f) in [(6, criterion_6 as fn(&[Vec<OracleComparison>]) -> Outcome), (7, criterion_7), (8, criterion_8)] {
            if want(id) {
                let o = f(&sweep);
                report(id, if id == 6 { t } else { elapsed }, o);
            }
        }
    }
    if want(9) {
        let t = Instant::now();
        report(9, t, simple[4].1());
    }
    if want(10) {
        let t = Instant::now();
        report(10, t, criterion_10());
    }
    if want(11) {
        let t = Instant::now();
        let mut identical = true;
        for &w in &DETERMINISM_WORKERS[1..] {
            identical &= run_sweep(&s, g0, w) == sweep;
            let again = run_conservative(&s, g0, &cases[..DETERMINISM_CONSERVATIVE_SUBSET], w);
            identical &= again[..] == cons[..DETERMINISM_CONSERVATIVE_SUBSET];
        }
        report(
            11,
            t,
            Outcome::hard(
                identical,
                format!(
                    "full sweep and {DETERMINISM_CONSERVATIVE_SUBSET} conservativeness cases rerun with {:?} workers: {}",
                    DETERMINISM_WORKERS,
                    if identical { "bit-identical" } else { "results differ" }
                ),
            ),
        );
    }

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
