//! Arithmetic-geometric mean period oracle for genus-1 quartics.

use num_complex::Complex64 as C64;

/// AGM of two complex numbers with the standard branch rule: at each step
/// the square root is chosen so that |a - b| <= |a + b|.
pub fn agm(mut a: C64, mut b: C64) -> C64 {
    for _ in 0..60 {
        let an = (a + b) * 0.5;
        let mut bn = (a * b).sqrt();
        if (an - bn).norm() > (an + bn).norm() {
            bn = -bn;
        }
        a = an;
        b = bn;
        if (a - b).norm() < 1e-16 * a.norm().max(1.0) {
            break;
        }
    }
    a
}

/// Period ratio tau = i K(k') / K(k) of the curve v^2 = lc (t-r1)..(t-r4)
/// with the a-cycle around {r1, r2} and the b-cycle around {r2, r3},
/// roots sorted ascending by real part.  The modulus comes from the
/// cross-ratio k^2 = (r2-r1)(r4-r3) / ((r3-r1)(r4-r2)); the leading
/// coefficient and the common prefactors cancel in the ratio.
pub fn quartic_period_ratio(roots: &[C64; 4]) -> C64 {
    let (r1, r2, r3, r4) = (roots[0], roots[1], roots[2], roots[3]);
    let k2 = ((r2 - r1) * (r4 - r3)) / ((r3 - r1) * (r4 - r2));
    let k = k2.sqrt();
    let kp = (C64::new(1.0, 0.0) - k2).sqrt();
    // K(k) = pi / (2 AGM(1, k')), K(k') = pi / (2 AGM(1, k))
    C64::new(0.0, 1.0) * agm(C64::new(1.0, 0.0), kp) / agm(C64::new(1.0, 0.0), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn agm_reproduces_complete_elliptic_integral() {
        // K(1/2) = 1.6857503548125960429 (m = k^2 = 1/4)
        let k: f64 = 0.5;
        let kp = (1.0 - k * k).sqrt();
        let a = agm(C64::new(1.0, 0.0), C64::new(kp, 0.0));
        let big_k = PI / (2.0 * a.re);
        assert!((big_k - 1.6857503548125960).abs() < 1e-13);
    }

    #[test]
    fn symmetric_quartic_has_pure_imaginary_ratio() {
        let roots = [
            C64::new(-2.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ];
        let tau = quartic_period_ratio(&roots);
        assert!(tau.im > 0.0);
        assert!(tau.re.abs() < 1e-14);
    }
}
