//! Ground states by preconditioned projected gradient flow on the mass
//! sphere, the massless equation by Petviashvili iteration, and multi-start
//! uniqueness runs.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{evaluate, EnergyBreakdown, Evaluation, ProblemSpec};
use crate::error::{HartreeError, Result};
use crate::grid::{barycenter, mass, normalize, shell_average, translate, Field, GridSpec};
use crate::operators::{
    apply_multiplier, apply_multiplier_pair, hartree_potential, quadratic_form, MultiplierSymbol,
};
use crate::par;

/// Iteration controls shared by all solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Step length in the preconditioned metric.
    pub step: f64,
    /// Stop when `‖residual‖/‖u‖` falls to this value.
    pub tolerance: f64,
    /// Fixed preconditioner shift; `None` tracks `|μ|`, refreshed every 20
    /// iterations.
    pub preconditioner_shift: Option<f64>,
    pub seed: u64,
    /// Average over lattice shells every 50 iterations.
    pub symmetrize: bool,
    /// Energy below which the flow is declared collapsing. `None` picks a
    /// family default, see [`default_energy_floor`].
    pub energy_floor: Option<f64>,
    /// Peak growth factor over the initial state that signals collapse.
    pub amplitude_limit: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 3000,
            step: 0.9,
            tolerance: 1e-9,
            preconditioner_shift: None,
            seed: 0,
            symmetrize: false,
            energy_floor: None,
            amplitude_limit: 1e6,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            return Err(HartreeError::InvalidParameter(format!(
                "tolerance {} must lie in (0, 1e-2]",
                self.tolerance
            )));
        }
        if !(self.step > 0.0) || self.max_iterations == 0 {
            return Err(HartreeError::InvalidParameter(
                "step and max_iterations must be positive".into(),
            ));
        }
        if let Some(s) = self.preconditioner_shift {
            if !(s > 0.0) {
                return Err(HartreeError::InvalidParameter("shift must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Energies below these values cannot occur for subcritical data:
/// `ℰ ≥ −mN` for `N < N*` and `ℰ_c ≥ −mc²`. The limit family has no such
/// bound and gets a large constant.
pub fn default_energy_floor(spec: &ProblemSpec) -> f64 {
    match *spec {
        ProblemSpec::Original { m, total_mass } => -m * total_mass,
        ProblemSpec::Rescaled { m, c } => -m * c * c,
        ProblemSpec::Limit { .. } | ProblemSpec::Massless => -1e6,
    }
}

/// One iteration of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub energy: f64,
    pub residual: f64,
}

/// Outcome of a solve.
#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub spec: ProblemSpec,
    pub state: Field,
    pub energy: EnergyBreakdown,
    /// `μ` in `T Q − Φ[Q²]Q = μ Q`. Tends to `−λ` in the limit family; the
    /// massless equation has the fixed value `−1`.
    pub multiplier: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

impl GroundStateResult {
    /// Largest energy increase after the first five iterations.
    pub fn max_energy_increase(&self) -> f64 {
        self.trace
            .windows(2)
            .skip(5)
            .map(|w| w[1].energy - w[0].energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `exp(−|x−c|²/(2w²))`.
pub fn gaussian(grid: &Arc<GridSpec>, center: [f64; 3], width: f64) -> Field {
    Field::from_fn(grid, |x, y, z| {
        let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2) + (z - center[2]).powi(2);
        (-r2 / (2.0 * width * width)).exp()
    })
}

fn preconditioner(spec: &ProblemSpec, shift: f64) -> MultiplierSymbol {
    match *spec {
        ProblemSpec::Limit { m } | ProblemSpec::Rescaled { m, .. } => {
            MultiplierSymbol::Preconditioner { m, shift }
        }
        // the nonrelativistic symbol over-damps the |k|-like tail here
        ProblemSpec::Original { m, .. } => MultiplierSymbol::Resolvent { m, c: 1.0, shift },
        ProblemSpec::Massless => unreachable!("massless solves use Petviashvili"),
    }
}

fn multiplier_of(ev: &Evaluation, target: f64) -> f64 {
    (ev.energy.kinetic - 2.0 * ev.energy.potential) / target
}

/// Minimize the family's energy on `{∫u² = N}`.
///
/// The flow is `u ← normalize(u − τ d)` with `d = P(Hu) − βPu`, the
/// preconditioned gradient projected so that `⟨d, u⟩ = 0`. The step is
/// halved whenever the energy would rise beyond round-off.
pub fn solve_ground_state(
    grid: &Arc<GridSpec>,
    spec: &ProblemSpec,
    opts: &SolveOptions,
    init: Option<&Field>,
) -> Result<GroundStateResult> {
    spec.validate()?;
    opts.validate()?;
    if *spec == ProblemSpec::Massless {
        return solve_massless(grid, opts, init);
    }
    let target = spec.constraint_mass();
    let start = match init {
        Some(f) => {
            if !f.grid().same_as(grid) {
                return Err(HartreeError::GridMismatch);
            }
            f.clone()
        }
        None => gaussian(grid, [0.0; 3], 1.0),
    };
    let mut u = normalize(&start, target)?;
    let amp0 = u.norm_linf();
    let floor = opts.energy_floor.unwrap_or_else(|| default_energy_floor(spec));
    let mut ev = evaluate(spec, &u);
    let mut trace = Vec::new();
    let mut tau = opts.step;
    let mut shift = opts.preconditioner_shift.unwrap_or(1.0);
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    for it in 0..=opts.max_iterations {
        iterations = it;
        let mu = multiplier_of(&ev, target);
        let hu = ev.tu.add_scaled(-1.0, &ev.phi.mul(&u));
        residual = hu.add_scaled(-mu, &u).norm_l2() / target.sqrt();
        trace.push(TracePoint {
            energy: ev.energy.total,
            residual,
        });
        if residual <= opts.tolerance {
            converged = true;
            break;
        }
        if it == opts.max_iterations {
            break;
        }
        if opts.preconditioner_shift.is_none() && it % 20 == 0 {
            shift = mu.abs().max(1e-8);
        }
        let (ph, pu) = apply_multiplier_pair(&preconditioner(spec, shift), &hu, &u);
        let beta = ph.dot(&u) / pu.dot(&u);
        let d = ph.add_scaled(-beta, &pu);

        let slack = 1e-12 * ev.energy.total.abs().max(1e-300);
        let mut accepted = None;
        for _ in 0..40 {
            let trial = normalize(&u.add_scaled(-tau, &d), target)?;
            let ev_t = evaluate(spec, &trial);
            if ev_t.energy.total <= ev.energy.total + slack {
                accepted = Some((trial, ev_t));
                break;
            }
            tau *= 0.5;
        }
        let Some((next, ev_next)) = accepted else {
            // no descent at any step: round-off floor reached
            break;
        };
        tau = (tau * 1.5).min(opts.step);
        u = next;
        ev = ev_next;

        if ev.energy.total < floor {
            return Err(HartreeError::Collapse {
                mass: target,
                detail: format!(
                    "energy {:.6e} fell below the floor {:.6e} at iteration {}",
                    ev.energy.total,
                    floor,
                    it + 1
                ),
            });
        }
        let amp = u.norm_linf();
        if amp > opts.amplitude_limit * amp0 {
            return Err(HartreeError::Collapse {
                mass: target,
                detail: format!("peak grew by {:.3e} at iteration {}", amp / amp0, it + 1),
            });
        }
        if opts.symmetrize && (it + 1) % 50 == 0 {
            u = normalize(&shell_average(&u), target)?;
            ev = evaluate(spec, &u);
        }
    }

    let multiplier = multiplier_of(&ev, target);
    Ok(GroundStateResult {
        spec: *spec,
        state: u,
        energy: ev.energy,
        multiplier,
        residual_norm: residual,
        iterations,
        converged,
        trace,
    })
}

/// Project onto fields even under each reflection `x_a ↦ −x_a`.
fn even_part(u: &Field) -> Field {
    let g = u.grid().clone();
    let n = g.points_per_dim();
    let v = u.values();
    let refl = |i: usize| (n - i) % n;
    let mut out = vec![0.0; g.len()];
    let gg = g.clone();
    par::for_each_mut(&mut out, |idx, o| {
        let (i, j, k) = gg.split(idx);
        let mut acc = 0.0;
        for a in [i, refl(i)] {
            for b in [j, refl(j)] {
                for c in [k, refl(k)] {
                    acc += v[(a * n + b) * n + c];
                }
            }
        }
        *o = acc / 8.0;
    });
    Field::from_vec(g, out)
}

/// Solve `√(−Δ)w + w = Φ[w²]w` without a mass constraint.
///
/// Petviashvili iteration `w ← M^{3/2} (|k|+1)⁻¹ Φ[w²]w` with the
/// stabilizing factor `M = ⟨(|k|+1)w, w⟩ / ⟨Φ[w²]w, w⟩`. Iterates are kept
/// even in each coordinate, which removes the neutral translation modes.
/// The reported multiplier is the fixed value `−1`.
pub fn solve_massless(
    grid: &Arc<GridSpec>,
    opts: &SolveOptions,
    init: Option<&Field>,
) -> Result<GroundStateResult> {
    opts.validate()?;
    let start = match init {
        Some(f) => {
            if !f.grid().same_as(grid) {
                return Err(HartreeError::GridMismatch);
            }
            f.clone()
        }
        None => gaussian(grid, [0.0; 3], 1.0),
    };
    if mass(&start) <= 0.0 {
        return Err(HartreeError::DegenerateField("massless solve needs a nonzero start".into()));
    }
    let op = MultiplierSymbol::Resolvent { m: 1e-300, c: 1.0, shift: 1.0 };
    let kin = MultiplierSymbol::HalfLaplacian;
    let mut w = even_part(&start);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut energy = EnergyBreakdown { kinetic: 0.0, potential: 0.0, total: 0.0 };
    for it in 0..=opts.max_iterations {
        iterations = it;
        let nl = hartree_potential(&w).mul(&w);
        let kw = apply_multiplier(&kin, &w);
        let lw = kw.add_scaled(1.0, &w);
        let m = mass(&w);
        let d = nl.dot(&w);
        energy = EnergyBreakdown {
            kinetic: kw.dot(&w),
            potential: 0.5 * d,
            total: kw.dot(&w) + m - 0.5 * d,
        };
        residual = lw.add_scaled(-1.0, &nl).norm_l2() / m.sqrt();
        trace.push(TracePoint { energy: energy.total, residual });
        if residual <= opts.tolerance {
            converged = true;
            break;
        }
        if it == opts.max_iterations || !(d > 0.0) {
            break;
        }
        let factor = (lw.dot(&w) / d).powf(1.5);
        w = even_part(&apply_multiplier(&op, &nl).scale(factor));
    }
    Ok(GroundStateResult {
        spec: ProblemSpec::Massless,
        state: w,
        energy,
        multiplier: -1.0,
        residual_norm: residual,
        iterations,
        converged,
        trace,
    })
}

/// `N* = ‖w‖²` on two grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalMass {
    /// Value on the finer grid.
    pub estimate: f64,
    pub coarse: f64,
    /// `|fine − coarse|`
    pub error_bar: f64,
    /// `error_bar / estimate`
    pub relative_spread: f64,
    /// `gn_ratio(w)·‖w‖²/2` on the finer grid.
    pub gn_saturation: f64,
    pub converged: bool,
}

/// Critical mass from massless solves on a coarse and a fine grid.
pub fn critical_mass_estimate(
    coarse: &Arc<GridSpec>,
    fine: &Arc<GridSpec>,
    opts: &SolveOptions,
) -> Result<CriticalMass> {
    let a = solve_massless(coarse, opts, None)?;
    let b = solve_massless(fine, opts, None)?;
    let na = mass(&a.state);
    let nb = mass(&b.state);
    let gn = crate::energy::gn_ratio(&b.state)? * nb / 2.0;
    Ok(CriticalMass {
        estimate: nb,
        coarse: na,
        error_bar: (nb - na).abs(),
        relative_spread: (nb - na).abs() / nb,
        gn_saturation: gn,
        converged: a.converged && b.converged,
    })
}

/// Summary of one multi-start run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub center: [f64; 3],
    pub width: f64,
    pub energy: f64,
    pub multiplier: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Pairwise comparison of independently started solves.
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub runs: Vec<GroundStateResult>,
    pub summaries: Vec<RunSummary>,
    /// Largest `‖Q_i − Q_j‖_∞` after barycenter alignment.
    pub pairwise_distance: f64,
    pub multiplier_spread: f64,
    /// Set when some run failed to converge.
    pub inconclusive: bool,
}

/// Move the density barycenter to the origin by a spectral shift.
pub fn center_on_barycenter(u: &Field) -> Field {
    let b = barycenter(u);
    translate(u, [-b[0], -b[1], -b[2]])
}

/// Solve from `n_runs` random Gaussian starts and compare the results.
pub fn multistart_uniqueness(
    grid: &Arc<GridSpec>,
    spec: &ProblemSpec,
    n_runs: usize,
    opts: &SolveOptions,
) -> Result<UniquenessReport> {
    if n_runs < 2 {
        return Err(HartreeError::InvalidParameter("multistart needs at least 2 runs".into()));
    }
    let q = grid.half_width() / 4.0;
    let starts: Vec<(u64, [f64; 3], f64)> = (0..n_runs as u64)
        .map(|i| {
            let seed = opts.seed.wrapping_add(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = [
                rng.gen_range(-q..=q),
                rng.gen_range(-q..=q),
                rng.gen_range(-q..=q),
            ];
            (seed, c, rng.gen_range(0.5..=2.0))
        })
        .collect();
    let results = par::map(n_runs, |i| {
        let (_, c, w) = starts[i];
        solve_ground_state(grid, spec, opts, Some(&gaussian(grid, c, w)))
    });
    let mut runs = Vec::with_capacity(n_runs);
    for r in results {
        runs.push(r?);
    }
    let aligned: Vec<Field> = runs.iter().map(|r| center_on_barycenter(&r.state)).collect();
    let mut dist = 0.0f64;
    let mut spread = 0.0f64;
    for i in 0..n_runs {
        for j in i + 1..n_runs {
            dist = dist.max(aligned[i].add_scaled(-1.0, &aligned[j]).norm_linf());
            spread = spread.max((runs[i].multiplier - runs[j].multiplier).abs());
        }
    }
    let summaries = runs
        .iter()
        .zip(&starts)
        .map(|(r, &(seed, center, width))| RunSummary {
            seed,
            center,
            width,
            energy: r.energy.total,
            multiplier: r.multiplier,
            residual: r.residual_norm,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    Ok(UniquenessReport {
        inconclusive: runs.iter().any(|r| !r.converged),
        runs,
        summaries,
        pairwise_distance: dist,
        multiplier_spread: spread,
    })
}

/// `⟨|k| w, w⟩`, exposed for the saturation check.
pub fn half_laplacian_form(u: &Field) -> f64 {
    quadratic_form(&MultiplierSymbol::HalfLaplacian, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn options_validation() {
        let mut o = SolveOptions::default();
        assert!(o.validate().is_ok());
        o.tolerance = 0.1;
        assert!(o.validate().is_err());
        o.tolerance = 0.0;
        assert!(o.validate().is_err());
    }

    #[test]
    fn multistart_needs_two_runs() {
        let g = make_grid(8.0, 16).unwrap();
        let r = multistart_uniqueness(&g, &ProblemSpec::Limit { m: 1.0 }, 1, &SolveOptions::default());
        assert!(matches!(r, Err(HartreeError::InvalidParameter(_))));
    }

    #[test]
    fn massless_rejects_zero_start() {
        let g = make_grid(8.0, 16).unwrap();
        let z = Field::zeros(&g);
        assert!(solve_massless(&g, &SolveOptions::default(), Some(&z)).is_err());
    }

    #[test]
    fn small_limit_solve_converges() {
        let g = make_grid(32.0, 32).unwrap();
        let opts = SolveOptions { tolerance: 1e-8, ..Default::default() };
        let r = solve_ground_state(&g, &ProblemSpec::Limit { m: 1.0 }, &opts, None).unwrap();
        assert!(r.converged, "residual {}", r.residual_norm);
        assert!(r.multiplier < 0.0);
        assert!((mass(&r.state) - 1.0).abs() < 1e-12);
        assert!(r.max_energy_increase() <= 1e-12 * r.energy.total.abs());
    }
}
