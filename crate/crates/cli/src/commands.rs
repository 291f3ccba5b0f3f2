//! `solve`, `verify` and the `scan` family.

use hartree_lab::diagnostics::{
    convergence_study, decay_fit_power, default_window, pohozaev_check, ConvergenceStudy,
};
use hartree_lab::energy::{el_residual, energy, gn_ratio, lagrange_multiplier, rescale_field, ProblemSpec};
use hartree_lab::greens::{green_rows, verify_decay_bound};
use hartree_lab::io::{load_field, Sidecar};
use hartree_lab::linearized::{kernel_probe, lemma31_residual, LinearizedContext, Sector};
use hartree_lab::solver::{
    center_on_barycenter, critical_mass_estimate, multistart_uniqueness, solve_ground_state,
    GroundStateResult,
};
use hartree_lab::{mass, Field, HartreeError};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, profile, Outputs, Plot};
use crate::{CliError, EXIT_CONTRACT, EXIT_NOT_CONVERGED, EXIT_OK};

fn print_result(r: &GroundStateResult) {
    println!("family      {}", r.spec.name());
    println!("energy      {:.12e}", r.energy.total);
    println!("multiplier  {:.12e}", r.multiplier);
    println!("residual    {:.3e}", r.residual_norm);
    println!("iterations  {} ({})", r.iterations, if r.converged { "converged" } else { "not converged" });
}

fn solve(cfg: &RunConfig) -> Result<GroundStateResult, CliError> {
    let grid = cfg.grid()?;
    let init = match &cfg.init {
        Some(p) => Some(load_field(p)?.0),
        None => None,
    };
    Ok(solve_ground_state(&grid, &cfg.spec(), &cfg.solve_options(), init.as_ref())?)
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<u8, CliError> {
    let r = solve(cfg)?;
    print_result(&r);
    let stem = cfg.label(r.spec.name());
    let mut out = Outputs::new("solve", cfg)?;
    out.field(&format!("{stem}.fld"), &r.state, &stem)?;
    out.json(&format!("{stem}.json"), &Sidecar::from_result(&r))?;
    profile(&mut out, &stem, &r.state)?;
    let trace: Vec<Vec<String>> = r
        .trace
        .iter()
        .enumerate()
        .map(|(i, t)| vec![i.to_string(), num(t.energy), num(t.residual)])
        .collect();
    out.csv(&format!("{stem}_trace.csv"), &["iteration", "energy", "residual"], &trace)?;
    out.finish()?;
    Ok(if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// One identity check in a verification report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            pass: residual.is_finite() && residual.abs() <= tolerance,
            detail: None,
        }
    }

    fn failed(name: &str, tolerance: f64, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.into(),
            residual: f64::NAN,
            tolerance,
            pass: false,
            detail: Some(err.to_string()),
        }
    }

    fn detail(mut self, d: String) -> Self {
        self.detail = Some(d);
        self
    }
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    family: &'static str,
    m: Option<f64>,
    c: Option<f64>,
    entries: Vec<Check>,
    pass: bool,
}

fn spec_from_sidecar(s: &Sidecar) -> Result<ProblemSpec, CliError> {
    let need = |v: Option<f64>, k: &str| v.ok_or_else(|| CliError::Config(format!("sidecar lacks {k}")));
    Ok(match s.family.as_str() {
        "original" => ProblemSpec::Original { m: need(s.m, "m")?, total_mass: s.total_mass },
        "rescaled" => ProblemSpec::Rescaled { m: need(s.m, "m")?, c: need(s.c, "c")? },
        "limit" => ProblemSpec::Limit { m: need(s.m, "m")? },
        "massless" => ProblemSpec::Massless,
        other => return Err(CliError::Config(format!("unknown family {other:?} in sidecar"))),
    })
}

/// State to verify: `--state` (with its sidecar when present) or a fresh solve.
fn verify_input(cfg: &RunConfig) -> Result<(ProblemSpec, Field), CliError> {
    match &cfg.state {
        Some(path) => {
            let (field, _) = load_field(path)?;
            let sidecar = path.with_extension("json");
            let spec = if sidecar.exists() {
                let s: Sidecar = serde_json::from_slice(&std::fs::read(&sidecar)?)
                    .map_err(|e| CliError::Config(format!("{}: {e}", sidecar.display())))?;
                spec_from_sidecar(&s)?
            } else {
                cfg.spec()
            };
            Ok((spec, field))
        }
        None => {
            let r = solve(cfg)?;
            print_result(&r);
            Ok((r.spec, r.state))
        }
    }
}

/// Asymptotic decay rate `κ` of a bound state with multiplier `μ < 0`.
fn linear_rate(spec: &ProblemSpec, mu: f64) -> f64 {
    let e = -mu;
    match *spec {
        ProblemSpec::Limit { m } => (2.0 * m * e).sqrt(),
        ProblemSpec::Rescaled { m, c } => ((2.0 * m * c * c * e - e * e) / (c * c)).sqrt(),
        ProblemSpec::Original { m, .. } => (2.0 * m * e - e * e).sqrt(),
        ProblemSpec::Massless => f64::NAN,
    }
}

fn verify_window(cfg: &RunConfig) -> (f64, f64) {
    let l = cfg.half_width;
    cfg.window.unwrap_or((l / 4.0, (0.75 * l).min(l - 2.0)))
}

fn decay_check(cfg: &RunConfig, spec: &ProblemSpec, q: &Field, mu: f64) -> Check {
    let kappa = linear_rate(spec, mu);
    let window = verify_window(cfg);
    match decay_fit_power(&center_on_barycenter(q), window) {
        Ok(fit) => Check::new("decay_lemma_2.1", fit.delta / kappa - 1.0, 0.1).detail(format!(
            "fitted rate {:.6} with prefactor r^{:.3} on ({}, {}), linearized rate {kappa:.6}",
            fit.delta, fit.power, window.0, window.1
        )),
        Err(e) => Check::failed("decay_lemma_2.1", 0.1, e),
    }
}

fn scaling_check(spec: &ProblemSpec, q: &Field, c: f64) -> Result<Check, HartreeError> {
    // ℰ(u) = c⁻³ℰ_c(ũ) with ũ(x) = c²u(cx)
    let (original, scaled) = match *spec {
        ProblemSpec::Rescaled { m, c } => {
            let u = rescale_field(q, 1.0 / c)?;
            (energy(&ProblemSpec::Original { m, total_mass: mass(&u) }, &u).total, energy(spec, q).total / c.powi(3))
        }
        ProblemSpec::Original { m, .. } => {
            let v = rescale_field(q, c)?;
            (energy(spec, q).total, energy(&ProblemSpec::Rescaled { m, c }, &v).total / c.powi(3))
        }
        _ => unreachable!("scaling applies to the relativistic families"),
    };
    Ok(Check::new("scaling_G2.1", (scaled - original) / original.abs(), 1e-10))
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<u8, CliError> {
    let (spec, q) = verify_input(cfg)?;
    let mu = match spec {
        ProblemSpec::Massless => -1.0,
        _ => lagrange_multiplier(&spec, &q)?,
    };
    let residual = el_residual(&spec, &q, -mu)?.norm_l2() / mass(&q).sqrt();
    let mut entries = vec![Check::new("el_residual", residual, (10.0 * cfg.tol).max(1e-8))];

    match spec {
        ProblemSpec::Limit { m } => {
            let ctx = LinearizedContext::limit(hartree_lab::normalize(&q, 1.0)?, -mu, m)?;
            entries.push(Check::new("lemma_3.1", lemma31_residual(&ctx)?, 1e-4));
            let full = kernel_probe(&ctx, cfg.eigs.max(4), Sector::Full, cfg.seed)?;
            let radial = kernel_probe(&ctx, 2, Sector::Radial, cfg.seed)?;
            let mut k = Check::new("kernel_eq1.12", 1.0 - full.span_overlap, 1e-3);
            k.pass &= full.kernel_count == 3 && radial.kernel_count == 0 && !full.inconclusive;
            entries.push(k.detail(format!(
                "{} near-zero eigenvalues (radial sector {}), tolerance {:.2e}, eigenvalues {:?}",
                full.kernel_count, radial.kernel_count, full.kernel_tolerance, full.eigenvalues
            )));
            entries.push(decay_check(cfg, &spec, &q, mu));
        }
        ProblemSpec::Rescaled { m, c } => {
            let e = energy(&spec, &q).total;
            let p = pohozaev_check(&q, m, c, e)?;
            entries.push(Check::new("pohozaev_eq2.07", p.relative_residual, 1e-6));
            entries.push(Check::new("pohozaev_eq2.13", p.companion.relative_residual, 1e-6));
            entries.push(decay_check(cfg, &spec, &q, mu));
            entries.push(scaling_check(&spec, &q, c)?);
        }
        ProblemSpec::Original { .. } => {
            entries.push(decay_check(cfg, &spec, &q, mu));
            entries.push(scaling_check(&spec, &q, cfg.c[0])?);
        }
        ProblemSpec::Massless => {
            let saturation = gn_ratio(&q)? * mass(&q) / 2.0;
            entries.push(
                Check::new("gn_saturation", saturation - 1.0, 1e-3)
                    .detail(format!("gn_ratio·N/2 = {saturation:.8}, N = {:.8}", mass(&q))),
            );
        }
    }

    let pass = entries.iter().all(|e| e.pass);
    for e in &entries {
        println!("{:<16} {:>11.3e}  tol {:.0e}  {}", e.name, e.residual, e.tolerance, if e.pass { "pass" } else { "FAIL" });
    }
    let report = VerifyReport { family: spec.name(), m: spec.m(), c: spec.c(), entries, pass };
    let mut out = Outputs::new("verify", cfg)?;
    out.json("verify.json", &report)?;
    out.finish()?;
    Ok(if pass { EXIT_OK } else { EXIT_CONTRACT })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Scan {
    /// Q_c against Q_∞ for each c.
    Convergence,
    /// Independent random starts of one problem.
    Uniqueness,
    /// N* from massless solves on two grids.
    CriticalMass,
    /// Resolvent kernel evaluations and its uniform decay bound.
    Green,
    /// Decay rates of Q_c and ∇Q_c across c.
    Decay,
}

fn study(cfg: &RunConfig) -> Result<(ConvergenceStudy, (f64, f64)), CliError> {
    let grid = cfg.grid()?;
    let window = cfg.window.unwrap_or_else(|| default_window(&grid));
    Ok((convergence_study(&grid, cfg.m, &cfg.c, &cfg.solve_options(), window)?, window))
}

fn opt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        num(v)
    }
}

pub fn cmd_scan(which: Scan, cfg: &RunConfig) -> Result<u8, CliError> {
    match which {
        Scan::Convergence => scan_convergence(cfg),
        Scan::Uniqueness => scan_uniqueness(cfg),
        Scan::CriticalMass => scan_critical_mass(cfg),
        Scan::Green => scan_green(cfg),
        Scan::Decay => scan_decay(cfg),
    }
}

fn scan_convergence(cfg: &RunConfig) -> Result<u8, CliError> {
    let (s, _) = study(cfg)?;
    let rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.c),
                opt_num(r.sup_distance),
                opt_num(r.multiplier_gap),
                opt_num(r.decay_delta),
                opt_num(r.gradient_delta),
                r.converged.to_string(),
                r.error.clone().unwrap_or_default().replace(',', ";"),
            ]
        })
        .collect();
    let mut out = Outputs::new("scan convergence", cfg)?;
    out.csv(
        "convergence.csv",
        &["c", "sup_distance", "multiplier_gap", "decay_delta", "gradient_delta", "converged", "error"],
        &rows,
    )?;
    out.gnuplot(
        "convergence.gp",
        &Plot {
            data: "convergence.csv",
            x: 1,
            series: vec![(2, "sup |Q_c - Q_inf|"), (3, "|mu_c + lambda|")],
            xlabel: "c",
            ylabel: "distance",
            logx: true,
            logy: true,
        },
    )?;
    out.json("convergence.json", &s)?;
    out.finish()?;
    for r in &s.rows {
        println!("c = {:<6} sup {:.3e}  gap {:.3e}{}", r.c, r.sup_distance, r.multiplier_gap,
            r.error.as_ref().map(|e| format!("  ({e})")).unwrap_or_default());
    }
    println!("log-log slopes {:.3} / {:.3}", s.distance_slope, s.multiplier_slope);
    Ok(if s.monotone() { EXIT_OK } else { EXIT_CONTRACT })
}

#[derive(Debug, Serialize)]
struct UniquenessSummary {
    family: &'static str,
    runs: usize,
    pairwise_distance: f64,
    multiplier_spread: f64,
    inconclusive: bool,
    pass: bool,
}

fn scan_uniqueness(cfg: &RunConfig) -> Result<u8, CliError> {
    let spec = cfg.spec();
    let r = multistart_uniqueness(&cfg.grid()?, &spec, cfg.runs, &cfg.solve_options())?;
    let rows: Vec<Vec<String>> = r
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.seed.to_string(),
                num(s.center[0]),
                num(s.center[1]),
                num(s.center[2]),
                num(s.width),
                num(s.energy),
                num(s.multiplier),
                num(s.residual),
                s.iterations.to_string(),
                s.converged.to_string(),
            ]
        })
        .collect();
    let pass = !r.inconclusive && r.pairwise_distance <= 1e-6 && r.multiplier_spread <= 1e-8;
    let mut out = Outputs::new("scan uniqueness", cfg)?;
    out.csv(
        "uniqueness.csv",
        &["seed", "x0", "y0", "z0", "width", "energy", "multiplier", "residual", "iterations", "converged"],
        &rows,
    )?;
    out.json(
        "uniqueness.json",
        &UniquenessSummary {
            family: spec.name(),
            runs: cfg.runs,
            pairwise_distance: r.pairwise_distance,
            multiplier_spread: r.multiplier_spread,
            inconclusive: r.inconclusive,
            pass,
        },
    )?;
    out.finish()?;
    println!("pairwise distance {:.3e}, multiplier spread {:.3e}{}", r.pairwise_distance,
        r.multiplier_spread, if r.inconclusive { " (some runs did not converge)" } else { "" });
    Ok(if pass { EXIT_OK } else { EXIT_CONTRACT })
}

#[derive(Debug, Serialize)]
struct CriticalMassReport {
    estimate: f64,
    coarse: f64,
    error_bar: f64,
    n: usize,
    n_fine: usize,
    converged: bool,
    checks: Vec<Check>,
}

fn scan_critical_mass(cfg: &RunConfig) -> Result<u8, CliError> {
    let n_fine = cfg.n_fine.unwrap_or_else(|| {
        if hartree_lab::grid::is_valid_size(3 * cfg.n / 2) { 3 * cfg.n / 2 } else { 2 * cfg.n }
    });
    let fine = hartree_lab::make_grid(cfg.half_width, n_fine)?;
    let est = critical_mass_estimate(&cfg.grid()?, &fine, &cfg.solve_options())?;
    let checks = vec![
        Check::new("gn_saturation", est.gn_saturation - 1.0, 1e-3),
        Check::new("two_grid_spread", est.relative_spread, 1e-2),
    ];
    let pass = est.converged && checks.iter().all(|c| c.pass);
    let mut out = Outputs::new("scan critical-mass", cfg)?;
    out.csv(
        "critical_mass.csv",
        &["n", "N_star"],
        &[vec![cfg.n.to_string(), num(est.coarse)], vec![n_fine.to_string(), num(est.estimate)]],
    )?;
    out.json(
        "critical_mass.json",
        &CriticalMassReport {
            estimate: est.estimate,
            coarse: est.coarse,
            error_bar: est.error_bar,
            n: cfg.n,
            n_fine,
            converged: est.converged,
            checks,
        },
    )?;
    out.finish()?;
    println!("N* = {:.6} ± {:.1e} (n = {} and {}); the massless problem does not involve m",
        est.estimate, est.error_bar, cfg.n, n_fine);
    println!("gn saturation {:.6}", est.gn_saturation);
    Ok(if pass { EXIT_OK } else { EXIT_CONTRACT })
}

#[derive(Debug, Serialize)]
struct GreenReport {
    m: f64,
    lambda_c: f64,
    c: Vec<f64>,
    #[serde(rename = "M")]
    prefactor: f64,
    delta: f64,
    violations: usize,
    offending: Vec<(f64, f64)>,
    checks: Vec<Check>,
}

fn scan_green(cfg: &RunConfig) -> Result<u8, CliError> {
    let (m, lam) = (cfg.m, cfg.lambda_c);
    let delta = cfg.delta.unwrap_or(0.9 * (m / 2.0).min((lam * m).sqrt()));
    let bound = verify_decay_bound(m, &cfg.c, lam, delta, cfg.half_width)?;
    let radii: Vec<f64> = (0..=28).map(|i| 0.5 + 0.125 * i as f64).collect();
    let rows = green_rows(m, &cfg.c, lam, &radii, &bound)?;
    let agreement = rows
        .iter()
        .map(|r| (r.quadrature - r.fourier).abs() / r.fourier)
        .fold(0.0, f64::max);
    let checks = vec![
        Check::new("green_lemma_2.3", bound.violations as f64, 0.0)
            .detail(format!("M = {:.6e}, δ = {delta}", bound.prefactor)),
        Check::new("green_methods", agreement, 1e-4),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![num(r.c), num(r.radius), num(r.quadrature), num(r.fourier), num(r.bound)])
        .collect();
    let mut out = Outputs::new("scan green", cfg)?;
    out.csv("green.csv", &["c", "radius", "quadrature", "fourier", "bound"], &csv)?;
    out.gnuplot(
        "green.gp",
        &Plot {
            data: "green.csv",
            x: 2,
            series: vec![(3, "quadrature"), (4, "fourier"), (5, "bound")],
            xlabel: "|z|",
            ylabel: "G_c",
            logx: false,
            logy: true,
        },
    )?;
    out.json(
        "green.json",
        &GreenReport {
            m,
            lambda_c: lam,
            c: cfg.c.clone(),
            prefactor: bound.prefactor,
            delta,
            violations: bound.violations,
            offending: bound.offending.clone(),
            checks,
        },
    )?;
    out.finish()?;
    println!("M = {:.6e} at δ = {delta}: {} violations; methods agree to {agreement:.2e}",
        bound.prefactor, bound.violations);
    Ok(if pass { EXIT_OK } else { EXIT_CONTRACT })
}

#[derive(Debug, Serialize)]
struct DecayReport {
    window: (f64, f64),
    limit_delta: f64,
    spread: f64,
    checks: Vec<Check>,
}

fn scan_decay(cfg: &RunConfig) -> Result<u8, CliError> {
    let (s, window) = study(cfg)?;
    let rates: Vec<f64> = s.rows.iter().flat_map(|r| [r.decay_delta, r.gradient_delta]).collect();
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi / lo - 1.0;
    let checks = vec![Check::new("decay_lemma_2.1", spread, 0.1)
        .detail(format!("rates of Q_c and |∇Q_c| lie in [{lo:.6}, {hi:.6}]"))];
    let pass = s.rows.iter().all(|r| r.error.is_none()) && checks[0].pass;
    let mut rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| vec![num(r.c), opt_num(r.decay_delta), opt_num(r.gradient_delta)])
        .collect();
    rows.push(vec!["inf".into(), num(s.limit_decay_delta), String::new()]);
    let mut out = Outputs::new("scan decay", cfg)?;
    out.csv("decay.csv", &["c", "delta", "gradient_delta"], &rows)?;
    out.json("decay.json", &DecayReport { window, limit_delta: s.limit_decay_delta, spread, checks })?;
    out.finish()?;
    println!("decay rates in [{lo:.5}, {hi:.5}] over window ({}, {}), spread {spread:.2e}; Q_∞ {:.5}",
        window.0, window.1, s.limit_decay_delta);
    Ok(if pass { EXIT_OK } else { EXIT_CONTRACT })
}
