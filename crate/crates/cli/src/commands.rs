//! Subcommand drivers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use ris_urllc::array::{af_gain_closed, af_gain_direct, phase_profile, RisGeometry};
use ris_urllc::channel::{product_fading_cdf, FadingQuantileTable};
use ris_urllc::control::{illuminated_region, power_control, AfGainSearch, PowerDecision};
use ris_urllc::geometry::{rotation_matrix, Ellipse2D, Pointing, Spherical};
use ris_urllc::montecarlo::{compare_with_oracle, outage_estimate, Stream};
use ris_urllc::special::marcum_q1;
use ris_urllc::stats::{ellipse_probability, PositionBelief};
use ris_urllc::units::{linear_to_db, watts_to_dbm};
use ris_urllc::Scenario;

use crate::config::ScenarioConfig;
use crate::CliError;

const DEFAULT_TABLE_FILE: &str = "fading_quantiles.txt";

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Fading table from the configured cache, or built in memory.
fn fading_table(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<FadingQuantileTable, CliError> {
    let grid = cfg.quantile_grid();
    Ok(match &cfg.quantile_table.path {
        Some(path) => FadingQuantileTable::load_or_build(path, scenario.k_db(), grid)?.0,
        None => FadingQuantileTable::build(scenario.k_db(), grid)?,
    })
}

fn header(cfg: &ScenarioConfig) -> String {
    format!("# config_sha256={} seed={}\n", cfg.hash(), cfg.monte_carlo.seed)
}

/// File-name tag for a motion direction: `0`, `45`, `m45`, `22p5`.
fn psi_tag(deg: f64) -> String {
    format!("{deg}").replace('-', "m").replace('.', "p")
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir.display().to_string()))?;
    }
    fs::write(path, text).map_err(io_err(path.display().to_string()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn emit(line: impl std::fmt::Display) -> Result<(), CliError> {
    use std::io::Write;
    writeln!(std::io::stdout().lock(), "{line}").map_err(io_err("stdout"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_owned(), |x| x.to_string())
}

fn db_pair(linear: f64) -> Value {
    json!({ "linear": linear, "db": linear_to_db(linear) })
}

fn decision_record(cfg: &ScenarioConfig, s: &Scenario, x: f64, y: f64, psi_deg: f64, d: &PowerDecision) -> Value {
    let mut rec = json!({
        "status": if d.feasible() { "feasible" } else { "infeasible" },
        "feasible": d.feasible(),
        "position_m": [x, y],
        "psi_deg": psi_deg,
        "config_sha256": cfg.hash(),
        "pointing_deg": {
            "theta_hat": d.pointing.theta_hat.to_degrees(),
            "phi_hat": d.pointing.phi_hat.to_degrees(),
        },
        "gamma0": db_pair(d.gamma0),
        "g0": db_pair(d.g0),
        "delta": s.requirement.delta,
        "epsilon": s.requirement.epsilon,
        "noise_power": { "watts": s.link.noise_power, "dbm": watts_to_dbm(s.link.noise_power) },
        "decision": d,
    });
    match (&d.beam, &d.search) {
        (Some(b), _) => {
            rec["a0"] = db_pair(b.a0);
            rec["coverage"] = json!(b.coverage);
            rec["iterations"] = json!(b.iterations);
            rec["worst_beta"] = db_pair(b.worst_beta);
            rec["power"] = json!({ "watts": b.power, "dbm": watts_to_dbm(b.power) });
        }
        (None, AfGainSearch::Infeasible { probability_at_min }) => {
            rec["coverage_at_a_min"] = json!(probability_at_min);
        }
        (None, _) => {}
    }
    rec
}

pub fn decide(cfg: &ScenarioConfig, x: f64, y: f64) -> Result<(), CliError> {
    let s = cfg.scenario()?;
    let table = fading_table(cfg, &s)?;
    for (&deg, psi) in cfg.psi_deg.iter().zip(cfg.psi_rad()) {
        let outcome = s
            .belief_at(x, y, psi)
            .and_then(|b| power_control(&s, &b, &table));
        match outcome {
            Ok(d) => emit(decision_record(cfg, &s, x, y, deg, &d))?,
            Err(e) => {
                let kind = match e {
                    ris_urllc::Error::HorizonGrazing { .. } => "horizon_grazing",
                    ris_urllc::Error::BeamTooWide { .. } => "beam_too_wide",
                    _ => "numeric",
                };
                let rec = json!({
                    "status": "error",
                    "kind": kind,
                    "message": e.to_string(),
                    "position_m": [x, y],
                    "psi_deg": deg,
                });
                emit(rec)?;
                return Err(e.into());
            }
        }
    }
    Ok(())
}

fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![min];
    }
    (0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect()
}

pub fn heatmap(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let s = cfg.scenario()?;
    let table = fading_table(cfg, &s)?;
    let h = &cfg.heatmap;
    let xs = axis(h.x_min_m, h.x_max_m, h.nx);
    let ys = axis(h.y_min_m, h.y_max_m, h.ny);
    for (&deg, psi) in cfg.psi_deg.iter().zip(cfg.psi_rad()) {
        let mut text = header(cfg);
        text.push_str("x,y,P_dBm,A0,G0_dB,feasible\n");
        for &x in &xs {
            for &y in &ys {
                let b = s.belief_at(x, y, psi)?;
                let d = power_control(&s, &b, &table)?;
                let beam = d.beam.as_ref();
                writeln!(
                    text,
                    "{x},{y},{},{},{},{}",
                    opt(d.power().map(watts_to_dbm)),
                    opt(beam.map(|b| b.a0)),
                    linear_to_db(d.g0),
                    u8::from(d.feasible())
                )
                .unwrap();
            }
        }
        write_file(&out.join(format!("heatmap_psi_{}.csv", psi_tag(deg))), &text)?;
    }
    Ok(())
}

pub fn sweep(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let s = cfg.scenario()?;
    let g0 = fading_table(cfg, &s)?.lookup(s.requirement.delta)?;
    let mc = cfg.mc();
    let sw = &cfg.sweep;
    let phi = sw.phi_deg.to_radians();
    let thetas = axis(sw.theta_min_deg, sw.theta_max_deg, sw.points);
    for (pi, (&deg, psi)) in cfg.psi_deg.iter().zip(cfg.psi_rad()).enumerate() {
        let mut text = header(cfg);
        text.push_str("theta_hat_deg,P_pc_dBm,P_opt_dBm,gap_dB,outage_pc,outage_ci,outage_opt\n");
        for (i, &th) in thetas.iter().enumerate() {
            let rho = s.height * th.to_radians().tan();
            let b = s.belief_at(rho * phi.cos(), rho * phi.sin(), psi)?;
            // Disjoint streams for every (Ψ, θ̂) pair.
            let point = ((pi as u64) << 32) | i as u64;
            let r = compare_with_oracle(&s, &b, g0, &mc, point)?;
            writeln!(
                text,
                "{th},{},{},{},{},{},{}",
                opt(r.decision.power().map(watts_to_dbm)),
                opt(r.opt.map(|o| watts_to_dbm(o.power))),
                opt(r.gap_db()),
                opt(r.outage_pc.map(|o| o.p_out)),
                opt(r.outage_pc.map(|o| o.ci_halfwidth)),
                opt(r.outage_opt.map(|o| o.p_out)),
            )
            .unwrap();
        }
        write_file(&out.join(format!("sweep_psi_{}.csv", psi_tag(deg))), &text)?;
    }
    Ok(())
}

pub fn quantile_table(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let s = cfg.scenario()?;
    let path: PathBuf = cfg
        .quantile_table
        .path
        .clone()
        .unwrap_or_else(|| out.join(DEFAULT_TABLE_FILE));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir.display().to_string()))?;
    }
    let (table, rebuilt) = FadingQuantileTable::load_or_build(&path, s.k_db(), cfg.quantile_grid())?;
    let g0 = table.lookup(s.requirement.delta)?;
    emit(json!({
            "path": path.display().to_string(),
            "rebuilt": rebuilt,
            "k_db": table.k_db(),
            "rows": table.rows().count(),
            "delta": s.requirement.delta,
            "g0": db_pair(g0),
    }))
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String), ris_urllc::Error>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check_rotation() -> Result<(bool, String), ris_urllc::Error> {
    let mut worst: f64 = 0.0;
    for i in 0..=8 {
        for j in 0..16 {
            let r = rotation_matrix(i as f64 * 0.19, j as f64 * 0.4 - 3.0);
            worst = worst.max(r.orthonormality_error()).max((r.determinant() - 1.0).abs());
        }
    }
    Ok((worst < 1e-12, format!("max orthonormality error {worst:.1e}")))
}

fn check_af(s: &Scenario) -> Result<(bool, String), ris_urllc::Error> {
    let bs = s.bs_spherical();
    let mut worst: f64 = 0.0;
    for n in [4usize, 16, 100] {
        let g = RisGeometry::new(n, s.ris.spacing(), s.ris.wavelength())?;
        for i in 0..10 {
            for j in 0..10 {
                let pointing = Pointing::new(0.12 * i as f64, 0.6 * j as f64);
                let ue = Spherical::direction(0.1 + 0.11 * j as f64, 0.55 * i as f64);
                let profile = phase_profile(pointing, &bs, &g);
                let d = af_gain_direct(&profile, &ue, &bs, &g);
                worst = worst.max((d - af_gain_closed(pointing, &ue, &g)).abs());
            }
        }
    }
    Ok((worst <= 1e-10, format!("max |direct - closed| {worst:.1e} over 300 directions")))
}

fn check_gaussian_mass() -> Result<(bool, String), ris_urllc::Error> {
    let unit = PositionBelief::new([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])?;
    let mut worst: f64 = 0.0;
    for (d, r) in [(0.0, 1.0), (0.5, 1.0), (2.0, 1.0), (3.0, 0.5), (1.0, 2.5)] {
        let p = ellipse_probability(&unit, &Ellipse2D::new([d, 0.0], r, r, 0.0)?)?;
        worst = worst.max((p - (1.0 - marcum_q1(d, r))).abs());
    }
    Ok((worst <= 1e-9, format!("max error against the Marcum Q closed form {worst:.1e}")))
}

fn check_footprint(s: &Scenario) -> Result<(bool, String), ris_urllc::Error> {
    let pointing = Pointing::new(std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_4);
    let refs = [
        (0.9, 10.2268559702142, 1.29877355109335, 0.9737108975288),
        (0.1, 10.6033536581688, 5.72209035349177, 4.26064583985972),
    ];
    let mut worst: f64 = 0.0;
    for (a0, c, a, b) in refs {
        let (_, e) = illuminated_region(s, pointing, a0)?;
        for err in [rel(e.center[0], c), rel(e.center[1], c), rel(e.semi_major, a), rel(e.semi_minor, b)] {
            worst = worst.max(err);
        }
    }
    Ok((worst <= 0.02, format!("max relative deviation from reference footprints {:.2}%", 100.0 * worst)))
}

fn check_fading(s: &Scenario, table: &FadingQuantileTable) -> Result<(bool, String), ris_urllc::Error> {
    let delta = s.requirement.delta;
    let g0 = table.lookup(delta)?;
    let back = product_fading_cdf(g0, s.link.k_factor)?;
    let err = rel(back, delta);
    Ok((err <= 1e-6, format!("CDF(G0) = {back:.6e} at delta {delta:.3e}, rel. error {err:.1e}")))
}

fn validation_points(s: &Scenario) -> [(f64, f64); 3] {
    let side = s.room_side;
    [(0.68 * side, 0.68 * side), (0.3 * side, 0.8 * side), (0.9 * side, 0.2 * side)]
}

fn check_search(s: &Scenario, table: &FadingQuantileTable, psis: &[f64]) -> Result<(bool, String), ris_urllc::Error> {
    let expected = s.search.max_iterations();
    let mut bisected = 0;
    let mut bad = 0;
    for &(x, y) in &validation_points(s) {
        for &psi in psis {
            let d = power_control(s, &s.belief_at(x, y, psi)?, table)?;
            if let AfGainSearch::Feasible { iterations, a0, .. } = d.search {
                if a0 < 1.0 - s.search.nu {
                    bisected += 1;
                    bad += usize::from(iterations != expected);
                }
            }
        }
    }
    Ok((bad == 0, format!("{bisected} bisections, {bad} not finishing in {expected} iterations")))
}

fn check_conservative(
    cfg: &ScenarioConfig,
    s: &Scenario,
    table: &FadingQuantileTable,
    psis: &[f64],
) -> Result<(bool, String), ris_urllc::Error> {
    let target = s.requirement.outage_target();
    let mc = cfg.mc();
    let (mut runs, mut violations, mut worst) = (0, 0, 0.0f64);
    for (i, &(x, y)) in validation_points(s).iter().enumerate() {
        for (j, &psi) in psis.iter().enumerate() {
            let b = s.belief_at(x, y, psi)?;
            let Some(p) = power_control(s, &b, table)?.power() else {
                continue;
            };
            let point = ((i as u64) << 32) | j as u64;
            let o = outage_estimate(s, &b, p, &mc, Stream::Other { tag: 0x7a1d, point })?;
            runs += 1;
            worst = worst.max(o.p_out);
            violations += usize::from(o.p_out > target + o.ci_halfwidth);
        }
    }
    Ok((
        violations == 0,
        format!("{runs} feasible beliefs, worst outage {worst:.3e} against target {target:.0e}, {violations} above target + CI"),
    ))
}

pub fn validate(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let s = cfg.scenario()?;
    let psis = cfg.psi_rad();
    let table = fading_table(cfg, &s);
    let mut checks = vec![
        check("rotation_orthonormal", check_rotation),
        check("af_closed_form", || check_af(&s)),
        check("gaussian_mass_closed_form", check_gaussian_mass),
        check("footprint_regression", || check_footprint(&s)),
    ];
    match &table {
        Ok(t) => {
            checks.push(check("fading_quantile_inverse", || check_fading(&s, t)));
            checks.push(check("af_gain_search_iterations", || check_search(&s, t, &psis)));
            checks.push(check("conservative_outage", || check_conservative(cfg, &s, t, &psis)));
        }
        Err(e) => checks.push(Check {
            name: "fading_quantile_table",
            passed: false,
            detail: format!("error: {e}"),
        }),
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let report = json!({
        "config_sha256": cfg.hash(),
        "seed": cfg.monte_carlo.seed,
        "samples": cfg.monte_carlo.samples,
        "checks": checks
            .iter()
            .map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail }))
            .collect::<Vec<_>>(),
        "passed": checks.len() - failed,
        "failed": failed,
    });
    emit(serde_json::to_string_pretty(&report).expect("report serializes"))
}
