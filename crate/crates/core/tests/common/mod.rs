//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::ToPrimitive;

/// Fixed-point scale for the high-precision oracles: sixty decimal digits.
pub fn scale() -> BigInt {
    BigInt::from(10u32).pow(60)
}

/// `(√5 − 1)/2` scaled by [`scale`].
pub fn golden_fixed() -> BigInt {
    let s = scale();
    let root = (BigInt::from(5u32) * &s * &s).sqrt();
    (root - &s) / 2
}

/// Decimal literal such as `0.3` scaled by [`scale`], exactly.
pub fn decimal_fixed(text: &str) -> BigInt {
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits = format!("{int}{frac}");
    let value: BigInt = digits.parse().unwrap();
    value * scale() / BigInt::from(10u32).pow(frac.len() as u32)
}

pub fn fixed_to_f64(x: &BigInt) -> f64 {
    // keep 30 significant digits before dividing
    let shift = BigInt::from(10u32).pow(30);
    (x / &shift).to_f64().unwrap() / 1e30
}

/// Distance to the nearest integer of a fixed-point number.
pub fn fixed_norm(x: &BigInt) -> BigInt {
    let s = scale();
    let r = x.mod_floor(&s);
    let other = &s - &r;
    r.min(other)
}

pub fn fixed_fract(x: &BigInt) -> BigInt {
    x.mod_floor(&scale())
}

/// Number of eigenvalues below `x` of the tridiagonal matrix with unit
/// off-diagonal, from the Sturm sequence of leading minors.
pub fn sturm_count(diag: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for (i, &d) in diag.iter().enumerate() {
        let off = if i == 0 { 0.0 } else { 1.0 };
        q = d - x - off / q;
        if q == 0.0 {
            q = -f64::EPSILON;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

pub fn bisection_eigenvalues(diag: &[f64]) -> Vec<f64> {
    let bound = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) + 2.0;
    (0..diag.len())
        .map(|j| {
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if sturm_count(diag, mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn dense_matrix(diag: &[f64]) -> Vec<Vec<f64>> {
    let n = diag.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = diag[i];
        if i + 1 < n {
            m[i][i + 1] = 1.0;
            m[i + 1][i] = 1.0;
        }
    }
    m
}

pub fn dense_apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Classical RK4 for `i ψ' = Hψ` with a fixed step.
pub fn rk4_schrodinger(diag: &[f64], psi0: &[Complex64], t: f64, step: f64) -> Vec<Complex64> {
    let n = diag.len();
    let rhs = |psi: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let mut h = psi[i] * diag[i];
                if i > 0 {
                    h += psi[i - 1];
                }
                if i + 1 < n {
                    h += psi[i + 1];
                }
                h * Complex64::new(0.0, -1.0)
            })
            .collect()
    };
    let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    };
    let steps = (t / step).round() as usize;
    let h = t / steps as f64;
    let mut psi = psi0.to_vec();
    for _ in 0..steps {
        let k1 = rhs(&psi);
        let k2 = rhs(&axpy(&psi, h / 2.0, &k1));
        let k3 = rhs(&axpy(&psi, h / 2.0, &k2));
        let k4 = rhs(&axpy(&psi, h, &k3));
        for i in 0..n {
            psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    psi
}
