//! Special functions backing the non-correlation test: the log-gamma
//! function and the regularized incomplete beta function.
//!
//! `ln_gamma` uses the Lanczos approximation (g = 7, 9 coefficients);
//! `inc_beta` evaluates the continued-fraction expansion with the modified
//! Lentz algorithm, using the symmetry transform for the half of the domain
//! where the fraction converges slowly. Both are accurate to roughly 1e-13
//! relative error over the parameter ranges used here (half-integer shape
//! parameters, arguments in [0, 1]).

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function.
///
/// Accurate for positive arguments; negative non-integer arguments go
/// through the reflection formula. Returns infinity at the poles
/// (non-positive integers).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x) Γ(1−x) = π / sin(πx).
        let sin_pi_x = (PI * x).sin();
        if sin_pi_x == 0.0 {
            return f64::INFINITY;
        }
        return PI.ln() - sin_pi_x.abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete beta function `I_x(a, b)` for `a, b > 0`.
///
/// `x` outside `(0, 1)` saturates exactly to 0 or 1, which callers rely on
/// for the degenerate correlation cases.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // I_x(a,b) = front * cf / a on the fast-converging side; otherwise use
    // the symmetry I_x(a,b) = 1 − I_{1−x}(b,a).
    if x < (a + 1.0) / (a + b + 2.0) {
        let front = front_factor(a, b, x);
        front * beta_continued_fraction(a, b, x) / a
    } else {
        let front = front_factor(b, a, 1.0 - x);
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// `exp(a ln x + b ln(1−x) − ln B(a,b))`.
fn front_factor(a: f64, b: f64, x: f64) -> f64 {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    (a * x.ln() + b * (1.0 - x).ln() - ln_beta).exp()
}

/// Continued fraction for the incomplete beta function, evaluated with the
/// modified Lentz algorithm.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        // Even-numbered coefficient.
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd-numbered coefficient.
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
