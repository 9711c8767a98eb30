//! Independent reference values shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Bessel J0 from its power series (adequate for |x| < 10).
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Bisection for a root of `f` on `[a, b]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    assert!(fa * f(b) < 0.0, "no sign change");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// First zero of J0.
pub fn j0_first_zero() -> f64 {
    bisect(bessel_j0, 2.0, 3.0)
}

/// Torsion function of the unit square at its centre,
/// `sum_{m,n odd} 16 (-1)^((m+n)/2 - 1) / (pi^4 m n (m^2 + n^2))`.
pub fn square_torsion_center() -> f64 {
    let mut s = 0.0;
    for m in (1..4001).step_by(2) {
        for n in (1..4001).step_by(2) {
            let sign = if ((m + n) / 2 - 1) % 2 == 0 { 1.0 } else { -1.0 };
            let (mf, nf) = (m as f64, n as f64);
            s += sign * 16.0 / (PI.powi(4) * mf * nf * (mf * mf + nf * nf));
        }
    }
    s
}
