//! Small shared numeric helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Integer power of a complex number by repeated squaring.
pub fn cpow(base: C64, exp: i64) -> C64 {
    if exp >= 0 {
        base.powu(exp as u32)
    } else {
        base.powu((-exp) as u32).finv()
    }
}

/// Complex least squares via normal equations; returns the solution and
/// the relative residual ||Ax - b|| / ||b||.
pub fn lstsq(a: &DMatrix<C64>, b: &DVector<C64>) -> Option<(DVector<C64>, f64)> {
    let ah = a.adjoint();
    let gram = &ah * a;
    let rhs = &ah * b;
    let x = gram.lu().solve(&rhs)?;
    let resid = (a * &x - b).norm() / b.norm().max(1e-300);
    Some((x, resid))
}

/// Max and mean of a nonempty slice.
pub fn max_mean(values: &[f64]) -> (f64, f64) {
    let mx = values.iter().cloned().fold(0.0, f64::max);
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    (mx, mean)
}
