//! Modified Bessel functions of the second kind, orders 0, 1 and 2.
//!
//! Power series for `x <= 2`, Steed's continued fraction (Temme's form) above.
//! The exponentially scaled variants `e^x K_ν(x)` are the primitives.

use std::f64::consts::PI;

use crate::error::{HartreeError, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-17;

fn series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let ln = (0.5 * x).ln();
    // I0, I1 and the digamma sums
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut t0 = 1.0; // y^k / (k!)^2
    let mut t1 = 1.0; // y^k / (k!(k+1)!)
    let mut hk = 0.0; // harmonic number H_k
    for k in 0..60 {
        if k > 0 {
            let kf = k as f64;
            t0 *= y / (kf * kf);
            t1 *= y / (kf * (kf + 1.0));
            hk += 1.0 / kf;
        }
        let hk1 = hk + 1.0 / (k as f64 + 1.0);
        i0 += t0;
        i1 += t1;
        s0 += t0 * hk;
        // psi(k+1) + psi(k+2) = H_k + H_{k+1} - 2γ
        s1 += t1 * (hk + hk1 - 2.0 * EULER_GAMMA);
        if t0 < EPS * i0 && t1 < EPS * i1 {
            break;
        }
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(ln + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + ln * i1 - 0.25 * x * s1;
    (k0, k1)
}

fn steed_scaled(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        a -= 2.0 * (i as f64 - 1.0);
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// `(e^x K₀(x), e^x K₁(x))` for `x > 0`.
pub fn k01_scaled(x: f64) -> (f64, f64) {
    if x <= 2.0 {
        let (k0, k1) = series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        steed_scaled(x)
    }
}

/// `e^x K₂(x)` for `x > 0`.
pub fn k2_scaled(x: f64) -> f64 {
    let (k0, k1) = k01_scaled(x);
    k0 + 2.0 * k1 / x
}

pub fn k0(x: f64) -> f64 {
    k01_scaled(x).0 * (-x).exp()
}

pub fn k1(x: f64) -> f64 {
    k01_scaled(x).1 * (-x).exp()
}

/// `K₂(x)`; underflows to zero for large `x`.
pub fn bessel_k2(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(HartreeError::InvalidParameter(format!("K2 needs x > 0, got {x}")));
    }
    if x > 745.0 {
        return Ok(0.0);
    }
    if x <= 2.0 {
        let (k0, k1) = series(x);
        return Ok(k0 + 2.0 * k1 / x);
    }
    Ok(k2_scaled(x) * (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `K_ν(x) = ∫₀^∞ e^{-x cosh t} cosh(ν t) dt`, scaled by `e^x`, by the
    /// trapezoid rule, which is spectrally accurate for this integrand.
    fn integral_oracle(nu: f64, x: f64) -> f64 {
        let h = 1.0 / 256.0;
        let mut acc = 0.5;
        let mut t: f64 = h;
        loop {
            let v = (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
            acc += v;
            if v < 1e-20 * acc {
                break;
            }
            t += h;
        }
        acc * h
    }

    #[test]
    fn matches_integral_oracle() {
        for &x in &[1e-3, 0.01, 0.3, 1.0, 1.9, 2.0, 2.1, 5.0, 17.0, 80.0, 600.0] {
            let (k0, k1) = k01_scaled(x);
            let k2 = k2_scaled(x);
            for (nu, v) in [(0.0, k0), (1.0, k1), (2.0, k2)] {
                let o = integral_oracle(nu, x);
                assert!((v - o).abs() < 1e-12 * o, "nu={nu} x={x}: {v} vs {o}");
            }
        }
    }

    #[test]
    fn reference_value() {
        assert!((bessel_k2(1.0).unwrap() - 1.624_838_898_635_177_4).abs() < 1e-10);
    }

    #[test]
    fn small_argument_limit() {
        let x = 1e-4;
        assert!((bessel_k2(x).unwrap() * x * x / 2.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn domain_and_underflow() {
        assert!(bessel_k2(0.0).is_err());
        assert!(bessel_k2(-1.0).is_err());
        assert_eq!(bessel_k2(800.0).unwrap(), 0.0);
        assert!(bessel_k2(700.0).unwrap() > 0.0);
    }

    #[test]
    fn continuity_across_switch() {
        let a = bessel_k2(2.0 - 1e-12).unwrap();
        let b = bessel_k2(2.0 + 1e-12).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }
}
