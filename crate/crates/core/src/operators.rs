//! Fourier multipliers and the free-space Coulomb convolution.

use serde::{Deserialize, Serialize};

use crate::fft::C64;
use crate::grid::{Field, GridSpec};
use crate::par;

/// Radial Fourier multiplier `σ(|k|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplierSymbol {
    /// `√(c²|k|²+m²c⁴) − mc²`
    Relativistic { m: f64, c: f64 },
    /// `√(|k|²+m²) − m`, the kinetic symbol of the unscaled problem.
    RescaledOriginal { m: f64 },
    /// `|k|²/(2m)`
    Nonrelativistic { m: f64 },
    /// Relativistic minus nonrelativistic.
    Remainder { m: f64, c: f64 },
    /// `1/(√(c²|k|²+m²c⁴) − mc² + shift)`
    Resolvent { m: f64, c: f64, shift: f64 },
    /// `1/(|k|²/(2m) + shift)`
    Preconditioner { m: f64, shift: f64 },
    /// `|k|`, the massless kinetic symbol.
    HalfLaplacian,
    /// `m²c⁴/√(c²|k|²+m²c⁴)`
    InverseSqrt { m: f64, c: f64 },
}

/// `c²k²/(E + mc²)` with `E = √(c²k²+m²c⁴)`, free of cancellation.
#[inline]
fn relativistic(k2: f64, m: f64, c: f64) -> f64 {
    let mc2 = m * c * c;
    let e = c * (k2 + m * m * c * c).sqrt();
    c * c * k2 / (e + mc2)
}

impl MultiplierSymbol {
    /// Symbol as a function of `|k|²`.
    #[inline]
    pub fn at_k2(&self, k2: f64) -> f64 {
        match *self {
            Self::Relativistic { m, c } => relativistic(k2, m, c),
            Self::RescaledOriginal { m } => relativistic(k2, m, 1.0),
            Self::Nonrelativistic { m } => k2 / (2.0 * m),
            Self::Remainder { m, c } => {
                let mc2 = m * c * c;
                let e = c * (k2 + m * m * c * c).sqrt();
                let d = e + mc2;
                -c * c * k2 * k2 / (2.0 * m * d * d)
            }
            Self::Resolvent { m, c, shift } => 1.0 / (relativistic(k2, m, c) + shift),
            Self::Preconditioner { m, shift } => 1.0 / (k2 / (2.0 * m) + shift),
            Self::HalfLaplacian => k2.sqrt(),
            Self::InverseSqrt { m, c } => {
                let mc2 = m * c * c;
                mc2 * mc2 / (c * (k2 + m * m * c * c).sqrt())
            }
        }
    }

    pub fn value(&self, k: [f64; 3]) -> f64 {
        self.at_k2(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
    }
}

/// Symbol value at wavevector `k`.
pub fn symbol_value(s: &MultiplierSymbol, k: [f64; 3]) -> f64 {
    s.value(k)
}

fn multiply(grid: &GridSpec, s: &MultiplierSymbol, buf: &mut [C64]) {
    par::for_each_mut(buf, |i, v| *v *= s.at_k2(grid.k_squared(i)));
}

/// `F⁻¹[σ · F u]`.
pub fn apply_multiplier(s: &MultiplierSymbol, u: &Field) -> Field {
    let g = u.grid().clone();
    let mut buf = g.to_spectral(u.values());
    multiply(&g, s, &mut buf);
    g.from_spectral(&mut buf);
    Field::from_vec(g, buf.iter().map(|v| v.re).collect())
}

/// Multiplier with an ad hoc symbol given as a function of `|k|²`.
pub(crate) fn apply_symbol_fn<F: Fn(f64) -> f64 + Sync>(u: &Field, f: F) -> Field {
    let g = u.grid().clone();
    let mut buf = g.to_spectral(u.values());
    par::for_each_mut(&mut buf, |i, v| *v *= f(g.k_squared(i)));
    g.from_spectral(&mut buf);
    Field::from_vec(g, buf.iter().map(|v| v.re).collect())
}

/// Apply the same multiplier to two fields with one complex transform.
pub fn apply_multiplier_pair(s: &MultiplierSymbol, a: &Field, b: &Field) -> (Field, Field) {
    a.ensure_same_grid(b).expect("pair on different grids");
    let g = a.grid().clone();
    let mut buf = g.to_spectral_pair(a.values(), b.values());
    multiply(&g, s, &mut buf);
    g.from_spectral(&mut buf);
    (
        Field::from_vec(g.clone(), buf.iter().map(|v| v.re).collect()),
        Field::from_vec(g, buf.iter().map(|v| v.im).collect()),
    )
}

/// `⟨σ(D)u, u⟩` evaluated in wavenumber space.
pub fn quadratic_form(s: &MultiplierSymbol, u: &Field) -> f64 {
    let g = u.grid();
    let buf = g.to_spectral(u.values());
    spectral_form(g, s, &buf)
}

pub(crate) fn spectral_form(g: &GridSpec, s: &MultiplierSymbol, buf: &[C64]) -> f64 {
    let acc = par::sum(buf.len(), |i| s.at_k2(g.k_squared(i)) * buf[i].norm_sqr());
    acc * g.cell_volume() / g.len() as f64
}

/// `|x|⁻¹ ∗ ρ` in free space.
///
/// The kernel is truncated at radius `2L` and applied on the zero-padded
/// `(2n)³` lattice, which is exact for source/target pairs inside the box.
/// The sampled kernel transform times `1/(2n)³` already carries the `h³`
/// quadrature weight.
pub fn coulomb_potential(rho: &Field) -> Field {
    let g = rho.grid().clone();
    let input: Vec<C64> = rho.values().iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut out = vec![C64::new(0.0, 0.0); g.len()];
    g.coulomb().convolve(&input, &mut out);
    Field::from_vec(g, out.iter().map(|v| v.re).collect())
}

/// Two Coulomb potentials for the cost of one padded convolution.
pub fn coulomb_pair(a: &Field, b: &Field) -> (Field, Field) {
    a.ensure_same_grid(b).expect("pair on different grids");
    let g = a.grid().clone();
    let input: Vec<C64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| C64::new(x, y))
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); g.len()];
    g.coulomb().convolve(&input, &mut out);
    (
        Field::from_vec(g.clone(), out.iter().map(|v| v.re).collect()),
        Field::from_vec(g, out.iter().map(|v| v.im).collect()),
    )
}

/// `Φ[u²]`.
pub fn hartree_potential(u: &Field) -> Field {
    coulomb_potential(&u.mul(u))
}

/// `(max |Φ[u²]|, ‖u‖²_{L⁴} + ‖u‖²_{L²})`.
pub fn coulomb_sup_bound_check(u: &Field) -> (f64, f64) {
    let phi = hartree_potential(u);
    let v = u.values();
    let h3 = u.grid().cell_volume();
    let l4 = (par::sum(v.len(), |i| v[i].powi(4)) * h3).sqrt();
    let l2 = par::sum(v.len(), |i| v[i] * v[i]) * h3;
    (phi.norm_linf(), l4 + l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, mass};
    use std::f64::consts::PI;

    fn all_kinds() -> Vec<MultiplierSymbol> {
        use MultiplierSymbol::*;
        vec![
            Relativistic { m: 1.0, c: 5.0 },
            RescaledOriginal { m: 0.7 },
            Nonrelativistic { m: 0.5 },
            Remainder { m: 1.0, c: 3.0 },
            Resolvent { m: 1.0, c: 2.0, shift: 0.4 },
            Preconditioner { m: 2.0, shift: 0.1 },
            HalfLaplacian,
            InverseSqrt { m: 1.0, c: 4.0 },
        ]
    }

    #[test]
    fn symbol_examples() {
        use MultiplierSymbol::*;
        assert_eq!(symbol_value(&Relativistic { m: 1.0, c: 5.0 }, [0.0; 3]), 0.0);
        let v = symbol_value(&Relativistic { m: 1e-12, c: 1.0 }, [2.0, 0.0, 0.0]);
        assert!((v - 2.0).abs() < 1e-11);
        let f = symbol_value(&Remainder { m: 1.0, c: 10.0 }, [3.0, 0.0, 0.0]);
        assert!(f.abs() <= 81.0 / 800.0);
        assert_eq!(Nonrelativistic { m: 1.0 }.at_k2(0.0), 0.0);
        assert_eq!(Remainder { m: 1.0, c: 1.0 }.at_k2(0.0), 0.0);
    }

    #[test]
    fn remainder_matches_direct_difference() {
        for &(m, c, k) in &[(1.0f64, 2.0f64, 0.7f64), (0.5, 1.0, 3.0), (2.0, 1.5, 0.1)] {
            let e = (c * c * k * k + m * m * c.powi(4)).sqrt();
            let direct = e - m * c * c - k * k / (2.0 * m);
            let f = MultiplierSymbol::Remainder { m, c }.at_k2(k * k);
            assert!((f - direct).abs() < 1e-12 * direct.abs().max(1e-3));
        }
    }

    #[test]
    fn plane_waves_are_eigenfunctions() {
        let g = make_grid(4.0, 16).unwrap();
        let j = [2.0, -3.0, 1.0];
        let k0 = [j[0] * g.dk(), j[1] * g.dk(), j[2] * g.dk()];
        let u = Field::from_fn(&g, |x, y, z| (k0[0] * x + k0[1] * y + k0[2] * z).cos());
        for s in all_kinds() {
            let out = apply_multiplier(&s, &u);
            let expect = u.scale(s.value(k0));
            let err = out.add_scaled(-1.0, &expect).norm_linf();
            assert!(err <= 1e-12 * expect.norm_linf().max(1e-300) + 1e-14, "{s:?}: {err}");
        }
        let nr = MultiplierSymbol::Nonrelativistic { m: 0.5 };
        let k2 = k0.iter().map(|k| k * k).sum::<f64>();
        assert!((quadratic_form(&nr, &u) - k2 * mass(&u)).abs() < 1e-12 * k2 * mass(&u));
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g = make_grid(4.0, 8).unwrap();
        let z = Field::zeros(&g);
        for s in all_kinds() {
            assert_eq!(apply_multiplier(&s, &z).norm_linf(), 0.0);
            assert_eq!(quadratic_form(&s, &z), 0.0);
        }
        assert_eq!(coulomb_potential(&z).norm_linf(), 0.0);
        assert_eq!(coulomb_sup_bound_check(&z), (0.0, 0.0));
    }

    #[test]
    fn quadratic_form_matches_real_space_pairing() {
        let g = make_grid(5.0, 16).unwrap();
        let u = Field::from_fn(&g, |x, y, z| (-(x * x + 2.0 * y * y + z * z) / 3.0).exp() * (1.0 + 0.2 * x));
        for s in all_kinds() {
            let a = quadratic_form(&s, &u);
            let b = apply_multiplier(&s, &u).dot(&u);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{s:?}");
        }
    }

    #[test]
    fn pair_application_matches_single() {
        let g = make_grid(5.0, 16).unwrap();
        let a = Field::from_fn(&g, |x, _, _| (-x * x).exp());
        let b = Field::from_fn(&g, |_, y, z| (-(y * y + z * z)).exp());
        let s = MultiplierSymbol::Relativistic { m: 1.0, c: 3.0 };
        let (pa, pb) = apply_multiplier_pair(&s, &a, &b);
        assert!(pa.add_scaled(-1.0, &apply_multiplier(&s, &a)).norm_linf() < 1e-14);
        assert!(pb.add_scaled(-1.0, &apply_multiplier(&s, &b)).norm_linf() < 1e-14);
        let (ca, cb) = coulomb_pair(&a, &b);
        let (sa, sb) = (coulomb_potential(&a), coulomb_potential(&b));
        assert!(ca.add_scaled(-1.0, &sa).norm_linf() < 1e-13 * sa.norm_linf());
        assert!(cb.add_scaled(-1.0, &sb).norm_linf() < 1e-13 * sb.norm_linf());
    }

    #[test]
    fn gaussian_sup_bound() {
        let g = make_grid(8.0, 64).unwrap();
        let c = (2.0 * PI).powf(-0.75);
        // u² is the unit-integral Gaussian with σ = 1
        let u = Field::from_fn(&g, |x, y, z| c * (-(x * x + y * y + z * z) / 4.0).exp());
        let (lhs, _) = coulomb_sup_bound_check(&u);
        assert!((lhs - (2.0 / PI).sqrt()).abs() < 1e-4, "{lhs}");
    }
}
