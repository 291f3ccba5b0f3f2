//! The resolvent kernel `G_c` of `(H̄_c + λ_c)⁻¹`, `H̄_c = √(−c²Δ+m²c⁴) − mc²`.
//!
//! Three evaluations are provided: the Bessel-`K₂` time integral, an exact
//! radial Fourier inversion with the singular parts removed analytically,
//! and the periodized lattice inverse.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bessel::{k01_scaled, k2_scaled};
use crate::error::{HartreeError, Result};
use crate::grid::{Field, GridSpec};
use crate::operators::{apply_multiplier, MultiplierSymbol};
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMethod {
    Quadrature,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenEval {
    pub radius: f64,
    pub value: f64,
    pub method: GreenMethod,
    pub m: f64,
    pub c: f64,
    pub lambda_c: f64,
}

impl GreenEval {
    pub fn compute(method: GreenMethod, radius: f64, m: f64, c: f64, lambda_c: f64) -> Result<Self> {
        let value = match method {
            GreenMethod::Quadrature => green_quadrature(radius, m, c, lambda_c)?,
            GreenMethod::Fourier => green_radial_inversion(radius, m, c, lambda_c)?,
        };
        Ok(Self { radius, value, method, m, c, lambda_c })
    }
}

fn check(radius: f64, m: f64, c: f64, lambda_c: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(HartreeError::InvalidParameter(format!(
            "the kernel is singular at |z| = {radius}"
        )));
    }
    if !(m > 0.0 && c > 0.0 && lambda_c > 0.0) {
        return Err(HartreeError::InvalidParameter("need m, c, λ_c > 0".into()));
    }
    if lambda_c >= 2.0 * m * c * c {
        return Err(HartreeError::InvalidParameter(
            "λ_c must stay below 2mc² for a decaying kernel".into(),
        ));
    }
    Ok(())
}

/// `G_c(z) = (m²c/2π²) ∫₀^∞ e^{−t(λ_c/c − mc)} t/(t²+|z|²) K₂(mc√(t²+|z|²)) dt`.
///
/// The exponentials are merged as `e^x K₂(x) · exp(−tλ_c/c − mc|z|²/(t+s))`
/// with `s = √(t²+|z|²)`, so nothing overflows. The range is split at
/// `t = |z|` and the tail is mapped by `t = |z| sinh u`.
pub fn green_quadrature(radius: f64, m: f64, c: f64, lambda_c: f64) -> Result<f64> {
    check(radius, m, c, lambda_c)?;
    let z = radius;
    let mc = m * c;
    let integrand = |t: f64| {
        let s = (t * t + z * z).sqrt();
        t / (t * t + z * z) * k2_scaled(mc * s) * (-t * lambda_c / c - mc * z * z / (t + s)).exp()
    };
    let (head, _) = integrate(integrand, 0.0, z, 1e-11, 0.0)?;
    let t_max = 720.0 * c / lambda_c;
    let u_max = (t_max / z).asinh();
    let u0 = 1f64.asinh();
    let (tail, _) = if u_max > u0 {
        integrate(|u| integrand(z * u.sinh()) * z * u.cosh(), u0, u_max, 1e-11, 0.0)?
    } else {
        (0.0, 0.0)
    };
    Ok(m * m * c / (2.0 * PI * PI) * (head + tail))
}

/// `G_c(z)` by inverting the symbol `1/(c√(k²+M²) − a)`, `M = mc`,
/// `a = mc² − λ_c`.
///
/// The symbol splits as `a/(c²(k²+μ²)) + (1/c)√(k²+M²)/(k²+μ²)` with
/// `μ² = 2mλ_c − λ_c²/c²`. The second part is expanded in
/// `D = M² − μ²`: four terms `D^j (k²+M²)^{−j−½}` have Bessel-function
/// inverses, and the remainder `D⁴/((k²+μ²)(k²+M²)^{7/2})` decays like
/// `k⁻⁹` and is inverted by a radial sine transform.
pub fn green_radial_inversion(radius: f64, m: f64, c: f64, lambda_c: f64) -> Result<f64> {
    check(radius, m, c, lambda_c)?;
    let r = radius;
    let big = m * c;
    let a = m * c * c - lambda_c;
    let mu2 = 2.0 * m * lambda_c - lambda_c * lambda_c / (c * c);
    let mu = mu2.sqrt();
    let d = big * big - mu2;

    let yukawa = a / (c * c) * (-mu * r).exp() / (4.0 * PI * r);

    let x = big * r;
    let e = (-x).exp();
    let (k0s, k1s) = k01_scaled(x);
    let (k0, k1, k2) = (k0s * e, k1s * e, k2_scaled(x) * e);
    let pi2 = PI * PI;
    // inverse transforms of (k²+M²)^{−s} for s = ½, 3/2, 5/2, 7/2
    let t = [
        big * k1 / (2.0 * pi2 * r),
        k0 / (2.0 * pi2),
        r * k1 / (6.0 * pi2 * big),
        r * r * k2 / (30.0 * pi2 * big * big),
    ];
    let mut series = 0.0;
    let mut dj = 1.0;
    for tj in t {
        series += dj * tj;
        dj *= d;
    }

    let rem = |k: f64| {
        let k2 = k * k;
        let x = k2 + big * big;
        k * (k * r).sin() * d.powi(4) / ((k2 + mu2) * x * x * x * x.sqrt())
    };
    // integrate period by period out to where the k⁻⁸ envelope is negligible
    let k_end = 40.0 * big.max(mu);
    let period = 2.0 * PI / r;
    let step = period.max(big.min(mu) / 4.0).min(k_end);
    let pieces = (k_end / step).ceil();
    // ∫k|R| is of order D⁴/(μ M⁷)
    let abs_tol = 1e-14 * d.powi(4) / (mu * big.powi(7)) / pieces;
    let mut acc = 0.0;
    let mut k = 0.0;
    while k < k_end {
        let hi = (k + step).min(k_end);
        acc += integrate(rem, k, hi, 1e-12, abs_tol)?.0;
        k = hi;
    }
    let remainder = acc / (2.0 * pi2 * r);

    Ok(yukawa + (series + remainder) / c)
}

/// Lattice inverse of the resolvent symbol: `(H̄_c + λ_c)⁻¹` applied to the
/// discrete delta `h⁻³` at the origin. Periodized; accurate away from the
/// box boundary and for radii well above the spacing.
pub fn green_fourier(grid: &Arc<GridSpec>, m: f64, c: f64, lambda_c: f64) -> Result<Field> {
    if !(lambda_c > 0.0 && m > 0.0 && c > 0.0) {
        return Err(HartreeError::InvalidParameter("need m, c, λ_c > 0".into()));
    }
    let delta = discrete_delta(grid);
    Ok(apply_multiplier(&MultiplierSymbol::Resolvent { m, c, shift: lambda_c }, &delta))
}

/// `h⁻³` at the origin, zero elsewhere.
pub fn discrete_delta(grid: &Arc<GridSpec>) -> Field {
    let n = grid.points_per_dim();
    let o = grid.origin_index();
    let mut v = vec![0.0; grid.len()];
    v[(o * n + o) * n + o] = 1.0 / grid.cell_volume();
    Field::new(grid.clone(), v).expect("finite values")
}

/// Uniform-in-`c` check of `G_c(|z|) ≤ M e^{−δ|z|}/|z|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayBoundReport {
    pub delta: f64,
    /// Prefactor fitted at the largest `c`.
    #[serde(rename = "M")]
    pub prefactor: f64,
    pub violations: usize,
    /// Offending `(c, |z|)` pairs.
    pub offending: Vec<(f64, f64)>,
    /// Only one `c` was given, so uniformity is vacuous.
    pub single_point: bool,
    /// `δ / min{m/2, √(λ_c m)}`
    pub delta_fraction: f64,
}

impl DecayBoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Radii used by the decay-bound checks: uniform in `[0.2, r_max]`.
pub fn decay_radii(r_max: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| 0.2 + (r_max - 0.2) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Fit `M` on `[0.2, L/4]` at the largest `c` and count violations over
/// `[0.2, L/2]` for every `c`.
///
/// Radii are sampled at about 64 points per unit length; a relative slack
/// of `1e-9` absorbs quadrature error.
pub fn verify_decay_bound(
    m: f64,
    c_list: &[f64],
    lambda_c: f64,
    delta: f64,
    half_width: f64,
) -> Result<DecayBoundReport> {
    if c_list.is_empty() {
        return Err(HartreeError::InvalidParameter("empty c list".into()));
    }
    if !(delta > 0.0) || !(half_width > 0.8) {
        return Err(HartreeError::InvalidParameter("need δ > 0 and L > 0.8".into()));
    }
    let allowed = (m / 2.0).min((lambda_c * m).sqrt());
    let mut cs = c_list.to_vec();
    cs.sort_by(f64::total_cmp);
    let all_radii = decay_radii(half_width / 2.0, ((half_width / 2.0 - 0.2) * 64.0).ceil() as usize + 1);
    let fit_radii: Vec<f64> = all_radii.iter().copied().filter(|&r| r <= half_width / 4.0).collect();
    let weight = |r: f64| r * r * (delta * r).exp();

    let mut prefactor = 0.0f64;
    for &r in &fit_radii {
        prefactor = prefactor.max(green_quadrature(r, m, cs[cs.len() - 1], lambda_c)? * weight(r));
    }
    let mut offending = Vec::new();
    for &c in &cs {
        for &r in &all_radii {
            let g = green_quadrature(r, m, c, lambda_c)?;
            if g * weight(r) > prefactor * (1.0 + 1e-9) {
                offending.push((c, r));
            }
        }
    }
    Ok(DecayBoundReport {
        delta,
        prefactor,
        violations: offending.len(),
        offending,
        single_point: cs.len() == 1,
        delta_fraction: delta / allowed,
    })
}

/// `sup_{0 < |z| ≤ 1/(mc)} |z|² G_c(z)`, sampled on 64 points.
pub fn short_range_constant(m: f64, c: f64, lambda_c: f64) -> Result<f64> {
    let r_max = 1.0 / (m * c);
    let mut best = 0.0f64;
    for i in 1..=64 {
        let r = r_max * i as f64 / 64.0;
        best = best.max(r * r * green_quadrature(r, m, c, lambda_c)?);
    }
    Ok(best)
}

/// One CSV row `(c, |z|, G_quadrature, G_fourier, bound_value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenRow {
    pub c: f64,
    pub radius: f64,
    pub quadrature: f64,
    pub fourier: f64,
    pub bound: f64,
}

pub fn green_rows(
    m: f64,
    c_list: &[f64],
    lambda_c: f64,
    radii: &[f64],
    report: &DecayBoundReport,
) -> Result<Vec<GreenRow>> {
    let mut rows = Vec::new();
    for &c in c_list {
        for &r in radii {
            rows.push(GreenRow {
                c,
                radius: r,
                quadrature: green_quadrature(r, m, c, lambda_c)?,
                fourier: green_radial_inversion(r, m, c, lambda_c)?,
                bound: report.prefactor * (-report.delta * r).exp() / (r * r),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_k2;
    use crate::grid::make_grid;

    #[test]
    fn domain() {
        assert!(green_quadrature(0.0, 1.0, 8.0, 1.0).is_err());
        assert!(green_quadrature(1.0, 1.0, 8.0, 0.0).is_err());
        assert!(green_radial_inversion(-1.0, 1.0, 8.0, 1.0).is_err());
    }

    #[test]
    fn nonrelativistic_limit_is_yukawa() {
        // for c → ∞ the symbol tends to 1/(k²/2m + λ), whose kernel is
        // 2m e^{−√(2mλ)r}/(4πr)
        let (m, lam, r): (f64, f64, f64) = (1.0, 1.0, 2.0);
        let limit = 2.0 * m * (-(2.0 * m * lam).sqrt() * r).exp() / (4.0 * PI * r);
        let g = green_radial_inversion(r, m, 400.0, lam).unwrap();
        assert!((g / limit - 1.0).abs() < 1e-3, "{g} vs {limit}");
    }

    #[test]
    fn methods_agree() {
        for &c in &[4.0, 8.0, 16.0] {
            for &r in &[0.3, 0.5, 1.0, 2.5, 4.0] {
                let q = green_quadrature(r, 1.0, c, 1.0).unwrap();
                let f = green_radial_inversion(r, 1.0, c, 1.0).unwrap();
                assert!(q > 0.0);
                assert!((q - f).abs() < 1e-7 * f, "c={c} r={r}: {q} vs {f}");
            }
        }
    }

    #[test]
    fn bessel_regime_bounds() {
        // x²K₂(x) increases to 2 as x → 0, and √x eˣ K₂(x) decreases on x ≥ 1
        let m1 = 2.0;
        let m2 = k2_scaled(1.0);
        for &c in &[8.0, 16.0, 32.0] {
            for i in 1..400 {
                let w = i as f64 * 0.005;
                let x = c * w;
                let k2 = bessel_k2(x).unwrap();
                if w < 2.0 / c {
                    assert!(k2 <= m1 / (x * x) * (1.0 + 1e-12));
                }
                if w >= 1.0 / c {
                    assert!(k2 <= m2 * (-x).exp() / x.sqrt() * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn lattice_inverse_identities() {
        let g = make_grid(4.0, 32).unwrap();
        let field = green_fourier(&g, 1.0, 8.0, 1.0).unwrap();
        let back = apply_multiplier(&MultiplierSymbol::Relativistic { m: 1.0, c: 8.0 }, &field)
            .add_scaled(1.0, &field);
        let delta = discrete_delta(&g);
        assert!(back.add_scaled(-1.0, &delta).norm_linf() < 1e-8 * delta.norm_linf());
        // a large shift dominates every symbol value on a coarse lattice
        let coarse = make_grid(32.0, 8).unwrap();
        let a = green_fourier(&coarse, 1.0, 1.0, 10.0).unwrap().at_origin();
        let b = green_fourier(&coarse, 1.0, 1.0, 100.0).unwrap().at_origin();
        assert!((a / b / 10.0 - 1.0).abs() < 0.02, "{}", a / b);
    }

    #[test]
    fn single_c_is_flagged() {
        let r = verify_decay_bound(1.0, &[8.0], 1.0, 0.3, 16.0).unwrap();
        assert!(r.single_point && r.passed());
    }

    #[test]
    fn one_prefactor_serves_every_c() {
        let r = verify_decay_bound(1.0, &[8.0, 16.0, 32.0], 1.0, 0.3, 16.0).unwrap();
        assert!(r.passed() && !r.single_point, "{:?}", r.offending);
    }

    #[test]
    fn rate_above_true_decay_is_caught() {
        // the kernel decays like e^{−1.41|z|}, so δ = 1.5 must fail far out
        let r = verify_decay_bound(1.0, &[8.0, 16.0, 32.0], 1.0, 1.5, 16.0).unwrap();
        assert!(r.violations > 0);
        assert!(r.offending.iter().any(|&(c, z)| c == 32.0 && z > 7.9));
    }
}
