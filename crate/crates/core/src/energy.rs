//! Energy functionals, Euler–Lagrange residuals and the Gagliardo–Nirenberg
//! ratio.

use serde::{Deserialize, Serialize};

use crate::error::{HartreeError, Result};
use crate::grid::{make_grid, mass, Field};
use crate::operators::{apply_multiplier, hartree_potential, quadratic_form, MultiplierSymbol};

/// Which variational problem is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// `√(−Δ+m²)−m` kinetic energy at mass `N`.
    Original {
        m: f64,
        #[serde(rename = "N")]
        total_mass: f64,
    },
    /// `√(−c²Δ+m²c⁴)−mc²` kinetic energy at unit mass.
    Rescaled { m: f64, c: f64 },
    /// `−Δ/(2m)` kinetic energy at unit mass.
    Limit { m: f64 },
    /// `√(−Δ)` kinetic energy; solved without a mass constraint.
    Massless,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HartreeError::InvalidParameter(format!("{name} = {v} must be positive")))
            }
        };
        match *self {
            Self::Original { m, total_mass } => {
                pos("m", m)?;
                pos("N", total_mass)
            }
            Self::Rescaled { m, c } => {
                pos("m", m)?;
                pos("c", c)
            }
            Self::Limit { m } => pos("m", m),
            Self::Massless => Ok(()),
        }
    }

    pub fn kinetic_symbol(&self) -> MultiplierSymbol {
        match *self {
            Self::Original { m, .. } => MultiplierSymbol::RescaledOriginal { m },
            Self::Rescaled { m, c } => MultiplierSymbol::Relativistic { m, c },
            Self::Limit { m } => MultiplierSymbol::Nonrelativistic { m },
            Self::Massless => MultiplierSymbol::HalfLaplacian,
        }
    }

    /// Prescribed `∫u²`.
    pub fn constraint_mass(&self) -> f64 {
        match *self {
            Self::Original { total_mass, .. } => total_mass,
            _ => 1.0,
        }
    }

    pub fn m(&self) -> Option<f64> {
        match *self {
            Self::Original { m, .. } | Self::Rescaled { m, .. } | Self::Limit { m } => Some(m),
            Self::Massless => None,
        }
    }

    pub fn c(&self) -> Option<f64> {
        match *self {
            Self::Rescaled { c, .. } => Some(c),
            Self::Original { .. } => Some(1.0),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Original { .. } => "original",
            Self::Rescaled { .. } => "rescaled",
            Self::Limit { .. } => "limit",
            Self::Massless => "massless",
        }
    }
}

/// Kinetic and Hartree parts of an energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    /// `½∫Φ[u²]u²`
    pub potential: f64,
    pub total: f64,
}

/// Energy together with the fields it was computed from, for reuse.
pub(crate) struct Evaluation {
    pub energy: EnergyBreakdown,
    pub phi: Field,
    pub tu: Field,
}

pub(crate) fn evaluate(spec: &ProblemSpec, u: &Field) -> Evaluation {
    let phi = hartree_potential(u);
    let tu = apply_multiplier(&spec.kinetic_symbol(), u);
    let kinetic = tu.dot(u);
    let potential = 0.5 * phi.mul(u).dot(u);
    Evaluation {
        energy: EnergyBreakdown {
            kinetic,
            potential,
            total: kinetic - potential,
        },
        phi,
        tu,
    }
}

/// `ℰ(u)` for the given family.
pub fn energy(spec: &ProblemSpec, u: &Field) -> EnergyBreakdown {
    let kinetic = quadratic_form(&spec.kinetic_symbol(), u);
    let potential = 0.5 * hartree_potential(u).mul(u).dot(u);
    EnergyBreakdown {
        kinetic,
        potential,
        total: kinetic - potential,
    }
}

fn nonzero(u: &Field) -> Result<f64> {
    let m = mass(u);
    if m > 0.0 {
        Ok(m)
    } else {
        Err(HartreeError::DegenerateField("field is identically zero".into()))
    }
}

/// `T u − Φ[u²]u + mu·u`.
///
/// A ground state with multiplier `μ` (as reported by the solver) satisfies
/// `el_residual(spec, Q, −μ) ≈ 0`; in the limit family this is eq. `−Δ/(2m)Q
/// + λQ = Φ[Q²]Q` with `mu = λ`.
pub fn el_residual(spec: &ProblemSpec, u: &Field, mu: f64) -> Result<Field> {
    nonzero(u)?;
    let ev = evaluate(spec, u);
    Ok(residual_from(&ev, u, mu))
}

pub(crate) fn residual_from(ev: &Evaluation, u: &Field, mu: f64) -> Field {
    ev.tu.add_scaled(-1.0, &ev.phi.mul(u)).add_scaled(mu, u)
}

/// `μ = ⟨(T − Φ[u²])u, u⟩ / ∫u²`.
///
/// This is the multiplier of `T Q − Φ[Q²]Q = μ Q`, which tends to `−λ < 0`
/// in the limit family. The residual `el_residual(spec, u, −μ)` is then
/// orthogonal to `u`.
pub fn lagrange_multiplier(spec: &ProblemSpec, u: &Field) -> Result<f64> {
    let m = nonzero(u)?;
    let ev = evaluate(spec, u);
    Ok((ev.energy.kinetic - 2.0 * ev.energy.potential) / m)
}

/// `∫Φ[u²]u² / (‖(−Δ)^{1/4}u‖² ‖u‖²)`, scale invariant and bounded by
/// `2/‖w‖²` for the massless optimizer `w`.
pub fn gn_ratio(u: &Field) -> Result<f64> {
    let m = nonzero(u)?;
    let half = quadratic_form(&MultiplierSymbol::HalfLaplacian, u);
    let d = hartree_potential(u).mul(u).dot(u);
    Ok(d / (half * m))
}

/// `ũ(x) = c² u(cx)` sampled on the box `[−L/c, L/c)³` with the same `n`.
pub fn rescale_field(u: &Field, c: f64) -> Result<Field> {
    if !(c > 0.0) {
        return Err(HartreeError::InvalidParameter(format!("c = {c} must be positive")));
    }
    let g = u.grid();
    let target = make_grid(g.half_width() / c, g.points_per_dim())?;
    Ok(Field::from_vec(target, u.values().iter().map(|v| c * c * v).collect()))
}
