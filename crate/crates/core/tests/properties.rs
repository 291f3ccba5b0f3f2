use std::sync::Arc;

use hartree_lab::diagnostics::decay_fit;
use hartree_lab::energy::{energy, gn_ratio, lagrange_multiplier, rescale_field, ProblemSpec};
use hartree_lab::grid::{forward_transform, inverse_transform};
use hartree_lab::linearized::{apply_lplus, LinearizedContext};
use hartree_lab::operators::{apply_multiplier, hartree_potential, MultiplierSymbol};
use hartree_lab::{make_grid, mass, normalize, Field, GridSpec};
use proptest::prelude::*;

type Bump = (f64, [f64; 3], f64);

fn bumps() -> impl Strategy<Value = Vec<Bump>> {
    prop::collection::vec(
        (
            0.2f64..2.0,
            prop::array::uniform3(-1.5f64..1.5),
            0.6f64..1.4,
        ),
        1..4,
    )
}

fn field(g: &Arc<GridSpec>, bumps: &[Bump]) -> Field {
    Field::from_fn(g, |x, y, z| {
        bumps
            .iter()
            .map(|&(a, c, w)| {
                let r2 = (x - c[0]).powi(2) + (y - c[1]).powi(2) + (z - c[2]).powi(2);
                a * (-r2 / (2.0 * w * w)).exp()
            })
            .sum()
    })
}

fn grid() -> Arc<GridSpec> {
    make_grid(6.0, 16).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_is_unitary(b in bumps()) {
        let g = grid();
        let u = field(&g, &b);
        let c = forward_transform(&u);
        let spec: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume();
        prop_assert!(rel(spec, mass(&u)) < 1e-12);
        let back = inverse_transform(&g, &c).unwrap();
        prop_assert!(back.add_scaled(-1.0, &u).norm_linf() <= 1e-12 * u.norm_linf());
    }

    #[test]
    fn normalize_is_idempotent(b in bumps(), target in 0.1f64..10.0) {
        let g = grid();
        let once = normalize(&field(&g, &b), target).unwrap();
        prop_assert!(rel(mass(&once), target) < 1e-12);
        let twice = normalize(&once, target).unwrap();
        prop_assert!(twice.add_scaled(-1.0, &once).norm_linf() <= 1e-14 * once.norm_linf());
    }

    #[test]
    fn symbols_are_nonnegative(m in 0.1f64..4.0, c in 0.5f64..64.0, k2 in 0.0f64..1e6) {
        for s in [
            MultiplierSymbol::Relativistic { m, c },
            MultiplierSymbol::RescaledOriginal { m },
            MultiplierSymbol::Nonrelativistic { m },
            MultiplierSymbol::HalfLaplacian,
        ] {
            prop_assert!(s.at_k2(k2) >= 0.0);
        }
        let rem = MultiplierSymbol::Remainder { m, c };
        prop_assert!(rem.at_k2(k2) <= 0.0);
    }

    #[test]
    fn gn_ratio_ignores_amplitude(b in bumps(), a in 0.05f64..20.0) {
        let g = grid();
        let u = field(&g, &b);
        prop_assert!(rel(gn_ratio(&u.scale(a)).unwrap(), gn_ratio(&u).unwrap()) < 1e-12);
    }

    #[test]
    fn linearized_operator_is_symmetric(b in bumps(), p in bumps(), q in bumps()) {
        let g = grid();
        let base = normalize(&field(&g, &b), 1.0).unwrap();
        let ctx = LinearizedContext::limit(base, 0.3, 1.0).unwrap();
        let u = field(&g, &p);
        let v = field(&g, &q);
        let uv = apply_lplus(&ctx, &u).unwrap().dot(&v);
        let vu = apply_lplus(&ctx, &v).unwrap().dot(&u);
        prop_assert!((uv - vu).abs() <= 1e-11 * (uv.abs() + vu.abs()).max(1e-12));
    }

    #[test]
    fn gradient_matches_energy_difference(b in bumps(), p in bumps(), m in 0.5f64..2.0) {
        let g = grid();
        let spec = ProblemSpec::Limit { m };
        let u = field(&g, &b);
        let v = field(&g, &p);
        let grad = apply_multiplier(&spec.kinetic_symbol(), &u)
            .add_scaled(-1.0, &hartree_potential(&u).mul(&u));
        let expect = 2.0 * grad.dot(&v);
        // the energy is a quartic polynomial in t, so a five-point stencil is exact
        let e = |t: f64| energy(&spec, &u.add_scaled(t, &v)).total;
        let t = 1e-2;
        let fd = (8.0 * (e(t) - e(-t)) - (e(2.0 * t) - e(-2.0 * t))) / (12.0 * t);
        prop_assert!((fd - expect).abs() <= 1e-8 * (expect.abs() + e(0.0).abs()));
    }

    #[test]
    fn energy_obeys_scaling_relation(b in bumps(), m in 0.5f64..2.0, c in 1.5f64..12.0) {
        let g = grid();
        let u = field(&g, &b);
        let original = energy(&ProblemSpec::Original { m, total_mass: mass(&u) }, &u).total;
        let scaled = energy(&ProblemSpec::Rescaled { m, c }, &rescale_field(&u, c).unwrap()).total;
        prop_assert!(rel(scaled / c.powi(3), original) < 1e-10);
    }

    #[test]
    fn multiplier_is_amplitude_consistent(b in bumps(), a in 0.5f64..2.0) {
        // μ(au) = K − 2a²P per unit mass; check the quadratic dependence on a
        let g = grid();
        let spec = ProblemSpec::Limit { m: 1.0 };
        let u = normalize(&field(&g, &b), 1.0).unwrap();
        let e = energy(&spec, &u);
        let mu = lagrange_multiplier(&spec, &u.scale(a)).unwrap();
        let expect = e.kinetic - 2.0 * a * a * e.potential;
        prop_assert!((mu - expect).abs() <= 1e-12 * (e.kinetic + e.potential));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decay_fit_ignores_amplitude(rate in 0.4f64..1.2, a in 1e-3f64..1e3) {
        let g = make_grid(16.0, 32).unwrap();
        let u = Field::from_fn(&g, |x, y, z| (-rate * (x * x + y * y + z * z + 1.0).sqrt()).exp());
        let base = decay_fit(&u, (2.0, 8.0)).unwrap();
        let scaled = decay_fit(&u.scale(a), (2.0, 8.0)).unwrap();
        prop_assert!((base.delta - scaled.delta).abs() <= 1e-10 * base.delta);
        prop_assert!(rel(scaled.prefactor, a * base.prefactor) < 1e-9);
    }
}
