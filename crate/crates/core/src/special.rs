//! Special functions needed by the radial reductions.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_CUTOFF: f64 = 12.0;

/// `1 - J0(x)` without cancellation for small `x`.
pub fn one_minus_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_CUTOFF {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -q / (k * k);
            sum -= term;
            if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        1.0 - bessel_j0(x)
    }
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_CUTOFF {
        return 1.0 - one_minus_j0(x);
    }
    // Hankel asymptotic expansion, truncated at its smallest term.
    let mut p = 0.0;
    let mut q = 0.0;
    let mut coeff = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..60usize {
        if k > 0 {
            let m = (2 * k - 1) as f64;
            coeff *= m * m / (8.0 * k as f64 * x);
        }
        if coeff > prev {
            break;
        }
        prev = coeff;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * coeff;
        } else {
            q -= sign * coeff;
        }
        if coeff < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Complete elliptic integral of the first kind `K(k)` (modulus convention).
pub fn ellip_k(k: f64) -> f64 {
    ellip_k_complementary((1.0 - k * k).max(0.0).sqrt())
}

/// `K` expressed through the complementary modulus `k' = sqrt(1 - k^2)`,
/// accurate when `k` is close to 1.
pub fn ellip_k_complementary(kp: f64) -> f64 {
    if kp == 0.0 {
        return f64::INFINITY;
    }
    let (mut a, mut b) = (1.0f64, kp);
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        a = an;
        b = bn;
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
    }
    FRAC_PI_2 / a
}

/// Mean of `1/|y|` over the circle `|y - x| = r` in the plane, `|x| = d`.
pub fn circle_mean_inverse_distance(d: f64, r: f64) -> f64 {
    let s = d + r;
    2.0 / PI * ellip_k_complementary((d - r).abs() / s) / s
}

/// Volume of the unit ball in dimension `n` (1 or 2 used here).
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 / 3.0 * PI,
        _ => {
            // Generic recurrence.
            let mut v = [1.0, 2.0];
            let mut out = 0.0;
            for k in 2..=n {
                out = 2.0 * PI / k as f64 * v[(k - 2) % 2];
                v[k % 2] = out;
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};

    // J0(x) = (1/pi) int_0^pi cos(x sin t) dt
    fn j0_oracle(x: f64) -> f64 {
        integrate(|t: f64| (x * t.sin()).cos(), 0.0, PI, QuadOptions::rel(1e-14).with_abs(1e-15))
            .unwrap()
            .value
            / PI
    }

    #[test]
    fn j0_matches_integral_representation() {
        for &x in &[0.0, 0.3, 1.0, 2.404_825_557_695_773, 5.0, 11.9, 12.1, 17.0, 40.0, 99.5] {
            let a = bessel_j0(x);
            let b = j0_oracle(x);
            assert!((a - b).abs() < 2e-12, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn one_minus_j0_small_argument() {
        let x: f64 = 1e-4;
        let exact = x * x / 4.0 - x.powi(4) / 64.0;
        assert!((one_minus_j0(x) - exact).abs() < 1e-24);
    }

    #[test]
    fn ellip_k_reference_values() {
        assert!((ellip_k(0.0) - FRAC_PI_2).abs() < 1e-15);
        // K(1/sqrt 2) = Gamma(1/4)^2 / (4 sqrt(pi))
        let g14 = 3.625_609_908_221_908_4_f64;
        let exact = g14 * g14 / (4.0 * PI.sqrt());
        assert!((ellip_k(0.5f64.sqrt()) - exact).abs() < 1e-13);
    }

    #[test]
    fn circle_mean_matches_direct_average() {
        let (d, r) = (0.7, 0.3);
        let direct = integrate(
            |t: f64| 1.0 / ((d + r * t.cos()).powi(2) + (r * t.sin()).powi(2)).sqrt(),
            0.0,
            2.0 * PI,
            QuadOptions::rel(1e-13),
        )
        .unwrap()
        .value
            / (2.0 * PI);
        assert!((circle_mean_inverse_distance(d, r) - direct).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-14);
    }
}
