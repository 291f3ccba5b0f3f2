//! Pohozaev identities, decay-rate fits and the `c → ∞` convergence study.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::{lagrange_multiplier, ProblemSpec};
use crate::error::{HartreeError, Result};
use crate::grid::{gradient, mass, shell_profile, Field, GridSpec};
use crate::operators::{hartree_potential, quadratic_form, MultiplierSymbol};
use crate::par;
use crate::solver::{center_on_barycenter, solve_ground_state, SolveOptions};

/// Both virial-type identities for a rescaled-family state.
///
/// With `R = m²c⁴⟨(−c²Δ+m²c⁴)^{−½}Q, Q⟩`, `M = ∫Q²` and `D = ∫Φ[Q²]Q²`:
/// `−R + mc²M + ē = 0` and `−R + (mc² + μ)M + D/2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    /// `−R`
    pub term_resolvent: f64,
    /// `mc²M`
    pub term_mass: f64,
    /// `ē(c)`
    pub term_energy: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub companion: CompanionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompanionReport {
    /// `−R`
    pub term_resolvent: f64,
    /// `(mc² + μ)M`
    pub term_mass: f64,
    /// `D/2`
    pub term_hartree: f64,
    pub multiplier: f64,
    pub residual: f64,
    pub relative_residual: f64,
}

fn relative(terms: &[f64]) -> (f64, f64) {
    let sum: f64 = terms.iter().sum();
    let scale = terms.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    (sum, if scale > 0.0 { sum.abs() / scale } else { 0.0 })
}

/// Evaluate both identities on `q` with the solver's energy `ē(c)`.
pub fn pohozaev_check(q: &Field, m: f64, c: f64, energy_value: f64) -> Result<PohozaevReport> {
    let spec = ProblemSpec::Rescaled { m, c };
    spec.validate()?;
    let mu = lagrange_multiplier(&spec, q)?;
    let r = quadratic_form(&MultiplierSymbol::InverseSqrt { m, c }, q);
    let mm = mass(q);
    let d = hartree_potential(q).mul(q).dot(q);
    let mc2 = m * c * c;

    let (residual, relative_residual) = relative(&[-r, mc2 * mm, energy_value]);
    let (res2, rel2) = relative(&[-r, (mc2 + mu) * mm, 0.5 * d]);
    Ok(PohozaevReport {
        term_resolvent: -r,
        term_mass: mc2 * mm,
        term_energy: energy_value,
        residual,
        relative_residual,
        companion: CompanionReport {
            term_resolvent: -r,
            term_mass: (mc2 + mu) * mm,
            term_hartree: 0.5 * d,
            multiplier: mu,
            residual: res2,
            relative_residual: rel2,
        },
    })
}

/// Straight-line fit of `log profile(r)` on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub delta: f64,
    pub prefactor: f64,
    pub window: (f64, f64),
    /// Coefficient of determination.
    pub fit_quality: f64,
    pub samples: usize,
}

/// `(2, L/2)`
pub fn default_window(grid: &GridSpec) -> (f64, f64) {
    (2.0, grid.half_width() / 2.0)
}

fn check_window(grid: &GridSpec, window: (f64, f64)) -> Result<()> {
    let (a, b) = window;
    if !(a >= 0.0 && a < b && b <= grid.half_width() - 2.0) {
        return Err(HartreeError::Window(format!(
            "window ({a}, {b}) must satisfy 0 <= r_min < r_max <= L - 2 = {}",
            grid.half_width() - 2.0
        )));
    }
    Ok(())
}

fn fit_profile(profile: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|(r, _)| *r >= window.0 && *r <= window.1)
        .copied()
        .collect();
    if pts.len() < 3 {
        return Err(HartreeError::Window(format!(
            "window ({}, {}) holds {} samples",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some((r, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(HartreeError::Window(format!("profile value {v:e} at r = {r} is not positive")));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, v) in &pts {
        let (dx, dy) = (x - mx, v.ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok(DecayFit {
        delta: -slope,
        prefactor: (my - slope * mx).exp(),
        window,
        fit_quality: r2,
        samples: pts.len(),
    })
}

/// Fit the decay of the lattice-shell means of `u` about the origin.
pub fn decay_fit(u: &Field, window: (f64, f64)) -> Result<DecayFit> {
    check_window(u.grid(), window)?;
    fit_profile(&shell_profile(u), window)
}

/// Fit of `log Q = b + a·log r − δr`, which absorbs an algebraic prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerDecayFit {
    pub delta: f64,
    pub power: f64,
    pub log_prefactor: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Decay rate with the prefactor `r^a` fitted alongside.
///
/// The Coulomb tail of the potential makes `Q ~ r^a e^{−κr}` with `a ≠ 0`,
/// and a straight log fit then underestimates `κ` by about `a/(κ r̄)`.
pub fn decay_fit_power(u: &Field, window: (f64, f64)) -> Result<PowerDecayFit> {
    check_window(u.grid(), window)?;
    let pts: Vec<(f64, f64)> = shell_profile(u)
        .into_iter()
        .filter(|(r, _)| *r >= window.0.max(1e-12) && *r <= window.1)
        .collect();
    if pts.len() < 4 {
        return Err(HartreeError::Window(format!("window holds {} samples", pts.len())));
    }
    if let Some((r, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(HartreeError::Window(format!("profile value {v:e} at r = {r} is not positive")));
    }
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].0.ln(),
        _ => -pts[i].0,
    });
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1.ln()));
    let coef = a
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| HartreeError::Window(format!("degenerate fit: {e}")))?;
    Ok(PowerDecayFit {
        delta: coef[2],
        power: coef[1],
        log_prefactor: coef[0],
        window,
        samples: pts.len(),
    })
}

/// `|∇u|` from the spectral gradient.
pub fn gradient_magnitude(u: &Field) -> Field {
    let [gx, gy, gz] = gradient(u);
    let v = par::map(u.values().len(), |i| {
        (gx.values()[i].powi(2) + gy.values()[i].powi(2) + gz.values()[i].powi(2)).sqrt()
    });
    Field::new(u.grid().clone(), v).expect("finite gradient")
}

/// Decay fit of `|∇u|`.
pub fn gradient_decay_check(u: &Field, window: (f64, f64)) -> Result<DecayFit> {
    check_window(u.grid(), window)?;
    fit_profile(&shell_profile(&gradient_magnitude(u)), window)
}

/// `(r, Q(r), log Q(r))` rows for plotting; nonpositive values get `NaN`
/// in the last column.
pub fn profile_rows(u: &Field) -> Vec<(f64, f64, f64)> {
    shell_profile(u)
        .into_iter()
        .map(|(r, v)| (r, v, if v > 0.0 { v.ln() } else { f64::NAN }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub c: f64,
    /// `‖Q_c − Q_∞‖_∞` after barycenter alignment.
    pub sup_distance: f64,
    /// `|μ_c + λ|`
    pub multiplier_gap: f64,
    pub decay_delta: f64,
    /// Decay rate of `|∇Q_c|` over the same window.
    pub gradient_delta: f64,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub m: f64,
    /// Limit-family `λ` on the same grid.
    pub lambda: f64,
    pub limit_decay_delta: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slopes against `c` over the successful rows.
    pub distance_slope: f64,
    pub multiplier_slope: f64,
}

impl ConvergenceStudy {
    /// Both columns strictly decreasing and every row solved.
    pub fn monotone(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none() && r.converged)
            && self.rows.windows(2).all(|w| {
                w[1].sup_distance < w[0].sup_distance && w[1].multiplier_gap < w[0].multiplier_gap
            })
    }
}

fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Solve the limit problem once, then each rescaled problem from `Q_∞`.
pub fn convergence_study(
    grid: &Arc<GridSpec>,
    m: f64,
    c_list: &[f64],
    opts: &SolveOptions,
    window: (f64, f64),
) -> Result<ConvergenceStudy> {
    if c_list.len() < 3 {
        return Err(HartreeError::InvalidParameter("need at least 3 values of c".into()));
    }
    if c_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(HartreeError::InvalidParameter("c values must ascend".into()));
    }
    check_window(grid, window)?;
    let limit = solve_ground_state(grid, &ProblemSpec::Limit { m }, opts, None)?;
    if !limit.converged {
        return Err(HartreeError::InvalidParameter(format!(
            "limit solve did not converge (residual {:e})",
            limit.residual_norm
        )));
    }
    let lambda = -limit.multiplier;
    let q_inf = center_on_barycenter(&limit.state);
    let limit_decay_delta = decay_fit(&q_inf, window)?.delta;

    let rows = par::map(c_list.len(), |i| {
        let c = c_list[i];
        let failed = |e: String| ConvergenceRow {
            c,
            sup_distance: f64::NAN,
            multiplier_gap: f64::NAN,
            decay_delta: f64::NAN,
            gradient_delta: f64::NAN,
            converged: false,
            error: Some(e),
        };
        match solve_ground_state(grid, &ProblemSpec::Rescaled { m, c }, opts, Some(&limit.state)) {
            Ok(r) => {
                let q = center_on_barycenter(&r.state);
                match decay_fit(&q, window).and_then(|f| Ok((f, gradient_decay_check(&q, window)?))) {
                    Ok((fit, grad)) => ConvergenceRow {
                        c,
                        sup_distance: q.add_scaled(-1.0, &q_inf).norm_linf(),
                        multiplier_gap: (r.multiplier + lambda).abs(),
                        decay_delta: fit.delta,
                        gradient_delta: grad.delta,
                        converged: r.converged,
                        error: None,
                    },
                    Err(e) => failed(e.to_string()),
                }
            }
            Err(e) => failed(e.to_string()),
        }
    });
    let ok: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let distance_slope = loglog_slope(&ok.iter().map(|r| (r.c, r.sup_distance)).collect::<Vec<_>>());
    let multiplier_slope =
        loglog_slope(&ok.iter().map(|r| (r.c, r.multiplier_gap)).collect::<Vec<_>>());
    Ok(ConvergenceStudy {
        m,
        lambda,
        limit_decay_delta,
        rows,
        distance_slope,
        multiplier_slope,
    })
}
