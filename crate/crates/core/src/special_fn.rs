//! Bessel functions of the first kind of orders 0, 1 and 2 for real,
//! non-negative arguments.
//!
//! Three regimes are used:
//! * `z < SERIES_MAX`: the ascending power series,
//! * `SERIES_MAX <= z < ASYMPTOTIC_MIN`: Miller's backward recurrence
//!   normalised with `J0 + 2 sum J_2k = 1`,
//! * `z >= ASYMPTOTIC_MIN`: Hankel's asymptotic expansion.
//!
//! Negative arguments are folded with the parity `J_n(-z) = (-1)^n J_n(z)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SERIES_MAX: f64 = 4.0;
const ASYMPTOTIC_MIN: f64 = 25.0;

/// Bessel function of the first kind, order 0.
pub fn j0(z: f64) -> f64 {
    let z = z.abs();
    if z < SERIES_MAX {
        series(z, 0)
    } else if z < ASYMPTOTIC_MIN {
        miller(z).0
    } else {
        hankel(z, 0)
    }
}

/// Bessel function of the first kind, order 1.
pub fn j1(z: f64) -> f64 {
    let s = z.signum();
    let z = z.abs();
    s * if z < SERIES_MAX {
        series(z, 1)
    } else if z < ASYMPTOTIC_MIN {
        miller(z).1
    } else {
        hankel(z, 1)
    }
}

/// `J1(z) / z`, continuous at the origin with value 1/2.
pub fn j1_over_z(z: f64) -> f64 {
    let z = z.abs();
    if z < SERIES_MAX {
        // sum (-1)^k (z/2)^{2k} / (2 k! (k+1)!)
        scaled_series(z, 1) * 0.5
    } else {
        j1(z) / z
    }
}

/// `J2(z) / z^2`, continuous at the origin with value 1/8.
///
/// Appears in the Hessian of `J0(k|x|)`; computing it as `(2 J1/z - J0)/z^2`
/// near the origin cancels catastrophically, hence the dedicated series.
pub fn j2_over_z_sq(z: f64) -> f64 {
    let z = z.abs();
    if z < SERIES_MAX {
        scaled_series(z, 2) * 0.25
    } else if z < ASYMPTOTIC_MIN {
        miller(z).2 / (z * z)
    } else {
        (2.0 * hankel(z, 1) / z - hankel(z, 0)) / (z * z)
    }
}

/// `sum_k (-1)^k (z/2)^{2k} / (k! (k+n)!)`, i.e. `J_n(z) / (z/2)^n`.
fn scaled_series(z: f64, n: u32) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0 / factorial(n);
    let mut sum = term;
    for k in 1..60u32 {
        term *= -q / (f64::from(k) * f64::from(k + n));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn series(z: f64, n: u32) -> f64 {
    scaled_series(z, n) * (0.5 * z).powi(n as i32)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Returns `(J0, J1, J2)` by Miller's downward recurrence.
fn miller(z: f64) -> (f64, f64, f64) {
    // Start index well above z so the dominant minimal solution is reached.
    let start = (z + 10.0 * z.cbrt() + 30.0) as usize;
    let start = start + start % 2;
    let (mut above, mut cur) = (0.0_f64, 1e-30_f64);
    let (mut j0, mut j1, mut j2) = (0.0, 0.0, 0.0);
    let mut norm = 0.0;
    let inv_z = 1.0 / z;
    for k in (1..=start).rev() {
        // cur = J_k, above = J_{k+1}  ->  below = J_{k-1}
        let below = 2.0 * k as f64 * inv_z * cur - above;
        above = cur;
        cur = below;
        let idx = k - 1;
        if idx == 2 {
            j2 = cur;
        } else if idx == 1 {
            j1 = cur;
        } else if idx == 0 {
            j0 = cur;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            // rescale to keep the recurrence finite
            let s = 1e-250;
            cur *= s;
            above *= s;
            norm *= s;
            j1 *= s;
            j2 *= s;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm, j2 / norm)
}

/// Hankel asymptotic expansion for orders 0 and 1.
fn hankel(z: f64, n: u32) -> f64 {
    let mu = 4.0 * f64::from(n * n);
    let inv8z = 1.0 / (8.0 * z);
    // a_k = prod_{j=1..k} (mu - (2j-1)^2) / (k! (8z)^k)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) * inv8z / k as f64;
        if term.abs() >= last || term == 0.0 {
            break;
        }
        last = term.abs();
        // k odd -> Q with sign (-1)^((k-1)/2); k even -> P with sign (-1)^(k/2)
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let (s, c) = z.sin_cos();
    // cos(z - (2n+1)pi/4), sin(z - (2n+1)pi/4) without rounding pi/4
    let (cos_chi, sin_chi) = match n {
        0 => ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2),
        _ => ((s - c) * FRAC_1_SQRT_2, (-s - c) * FRAC_1_SQRT_2),
    };
    (2.0 / (PI * z)).sqrt() * (p * cos_chi - q * sin_chi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j1(0.0), 0.0);
        assert_eq!(j1_over_z(0.0), 0.5);
        assert_eq!(j2_over_z_sq(0.0), 0.125);
    }

    #[test]
    fn regime_boundaries_are_continuous() {
        for &b in &[SERIES_MAX, ASYMPTOTIC_MIN] {
            let (lo, hi) = (f64::from_bits(b.to_bits() - 1), b);
            assert!((j0(lo) - j0(hi)).abs() < 1e-13, "j0 at {b}");
            assert!((j1(lo) - j1(hi)).abs() < 1e-13, "j1 at {b}");
            assert!((j1_over_z(lo) - j1_over_z(hi)).abs() < 1e-13);
            assert!((j2_over_z_sq(lo) - j2_over_z_sq(hi)).abs() < 1e-13);
        }
    }

    #[test]
    fn odd_parity() {
        assert_eq!(j1(-3.0), -j1(3.0));
        assert_eq!(j0(-3.0), j0(3.0));
    }

    #[test]
    fn order_two_identity() {
        // J2 = 2 J1 / z - J0 away from the origin
        for &z in &[5.0, 9.3, 17.0, 40.0, 123.4] {
            let lhs = j2_over_z_sq(z) * z * z;
            let rhs = 2.0 * j1(z) / z - j0(z);
            assert!((lhs - rhs).abs() < 1e-13, "z = {z}: {lhs} vs {rhs}");
        }
    }
}
