//! Bessel function J1, used by the circular-inclusion Fourier coefficients.
//!
//! Power series for |z| <= 12, Hankel asymptotic expansion beyond. The
//! arguments that occur are 2*pi*r*|n| with r <= 1/2 and |n| <= 2j, so the
//! asymptotic branch covers the large-index coefficients of fine truncations.
//! Validated against a quadrature oracle in the fourier tests.

const SPLIT: f64 = 12.0;

pub fn j1(z: f64) -> f64 {
    if z < 0.0 {
        return -j1(-z);
    }
    if z <= SPLIT {
        j1_series(z)
    } else {
        j1_asymptotic(z)
    }
}

fn j1_series(z: f64) -> f64 {
    let half = 0.5 * z;
    let mut term = half;
    let mut sum = term;
    let zz = half * half;
    for k in 1..60 {
        term *= -zz / (k as f64 * (k as f64 + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() + 1e-300 {
            break;
        }
    }
    sum
}

fn j1_asymptotic(z: f64) -> f64 {
    // a_k(1) = a_{k-1} * (4 - (2k-1)^2) / (8k)
    let mut a = [0.0; 9];
    a[0] = 1.0;
    for k in 1..9 {
        let m = (2 * k - 1) as f64;
        a[k] = a[k - 1] * (4.0 - m * m) / (8.0 * k as f64);
    }
    let omega = z - 0.75 * std::f64::consts::PI;
    let z2 = z * z;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut sign = 1.0;
    let mut zpow = 1.0;
    for k in 0..4 {
        p += sign * a[2 * k] / zpow;
        q += sign * a[2 * k + 1] / (zpow * z);
        sign = -sign;
        zpow *= z2;
    }
    (2.0 / (std::f64::consts::PI * z)).sqrt() * (omega.cos() * p - omega.sin() * q)
}

/// 2*J1(z)/z with the z -> 0 limit of 1; the radial factor of a disk's
/// Fourier transform.
pub fn jinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        // 2*J1(z)/z = 1 - z^2/8 + O(z^4)
        1.0 - z * z / 8.0
    } else {
        2.0 * j1(z) / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_argument_matches_series_reference() {
        // J1(1) and J1(5) reference values (Abramowitz & Stegun)
        assert_relative_eq!(j1(1.0), 0.4400505857449335, max_relative = 1e-13);
        assert_relative_eq!(j1(5.0), -0.3275791375914652, max_relative = 1e-12);
    }

    #[test]
    fn branches_agree_at_the_split() {
        // both branches should agree to ~1e-9 absolute near z = 12
        for z in [11.8, 12.0, 12.2, 13.0] {
            let s = j1_series(z);
            let a = j1_asymptotic(z);
            assert!((s - a).abs() < 3e-10, "z={z}: series {s} vs asymptotic {a}");
        }
    }

    #[test]
    fn quadrature_oracle_large_argument() {
        // J1(z) = (1/pi) int_0^pi cos(theta - z sin(theta)) d(theta)
        let (gx, gw) = crate::quadrature::gauss_legendre(256);
        let oracle = |z: f64| {
            let mut s = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                let th = 0.5 * std::f64::consts::PI * (x + 1.0);
                s += w * (th - z * th.sin()).cos();
            }
            s * 0.5
        };
        for z in [0.5, 3.0, 12.0, 40.0, 150.0, 380.0] {
            assert!((j1(z) - oracle(z)).abs() < 1e-10, "z={z}");
        }
    }

    #[test]
    fn jinc_limit() {
        assert_relative_eq!(jinc(0.0), 1.0);
        assert_relative_eq!(jinc(1e-9), 1.0, epsilon = 1e-12);
        assert_relative_eq!(jinc(2.0), 2.0 * j1(2.0) / 2.0, max_relative = 1e-15);
    }
}
