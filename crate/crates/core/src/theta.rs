//! Riemann theta functions with controlled truncation error.
//!
//! The basic object is the lattice sum
//!
//! ```text
//! theta(B, z) = sum_{m in Z^g} exp(2 pi i (z, m) + pi i (B m, m))
//! ```
//!
//! with `(z, m) = z_1 m_1 + ... + z_g m_g`, `B` complex symmetric with
//! positive definite imaginary part.  Second-order thetas, the Kummer map,
//! directional derivatives, quasi-periodicity factors and a Newton search
//! for theta-divisor points are built on the same summation core.
//!
//! Arguments are always reduced by quasi-periodicity before summation so
//! that the Gaussian center of the sum sits inside the fundamental cell;
//! the absolute truncation error of the reduced sum is bounded by the
//! policy's `target_abs_error`, and the value returned for the unreduced
//! argument carries the usual growth factor
//! `exp(pi (Im z) (Im B)^{-1} (Im z))` through the exact quasi-periodicity
//! relation, so the *relative* accuracy is preserved.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

pub type C64 = Complex64;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Error)]
pub enum ThetaError {
    #[error("input matrix is not square")]
    NotSquare,
    #[error("matrix entry ({0},{1}) differs from its transpose")]
    NotSymmetric(usize, usize),
    #[error("imaginary part is not positive definite")]
    NotPositiveDefinite,
    #[error("required enumeration radius {required} exceeds cap {cap}")]
    RadiusCapExceeded { required: u32, cap: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("all Kummer components are numerically zero")]
    ZeroVector,
    #[error("Newton iteration failed to locate a theta zero")]
    NoConvergence,
}

/// Truncation policy for theta summation.
#[derive(Debug, Clone, Copy)]
pub struct ThetaPolicy {
    /// Absolute error target for the lattice-reduced sum.
    pub target_abs_error: f64,
    /// Cap on the per-coordinate enumeration half-width.
    pub max_radius: u32,
}

impl Default for ThetaPolicy {
    fn default() -> Self {
        ThetaPolicy {
            target_abs_error: 1e-13,
            max_radius: 120,
        }
    }
}

/// Validated complex symmetric matrix with positive definite imaginary part.
#[derive(Debug, Clone)]
pub struct PeriodMatrix {
    g: usize,
    mat: DMatrix<C64>,
    y_inv: DMatrix<f64>,
    lambda_min: f64,
}

impl PeriodMatrix {
    /// Validate a candidate matrix.  Symmetry is checked exactly on the
    /// supplied entries; positive definiteness of the imaginary part is
    /// certified by a Cholesky factorization.
    pub fn validate(mat: DMatrix<C64>) -> Result<Self, ThetaError> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(ThetaError::NotSquare);
        }
        let g = mat.nrows();
        for i in 0..g {
            for j in (i + 1)..g {
                if mat[(i, j)] != mat[(j, i)] {
                    return Err(ThetaError::NotSymmetric(i, j));
                }
            }
        }
        let y = DMatrix::<f64>::from_fn(g, g, |i, j| mat[(i, j)].im);
        let chol = nalgebra::Cholesky::new(y.clone()).ok_or(ThetaError::NotPositiveDefinite)?;
        let y_inv = chol.inverse();
        let eig = nalgebra::SymmetricEigen::new(y);
        let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        if !(lambda_min > 0.0) {
            return Err(ThetaError::NotPositiveDefinite);
        }
        Ok(PeriodMatrix {
            g,
            mat,
            y_inv,
            lambda_min,
        })
    }

    /// Accept a numerically symmetric matrix: asymmetry up to `tol` is
    /// averaged away, anything larger is rejected.
    pub fn from_nearly_symmetric(mat: DMatrix<C64>, tol: f64) -> Result<Self, ThetaError> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(ThetaError::NotSquare);
        }
        let g = mat.nrows();
        for i in 0..g {
            for j in (i + 1)..g {
                if (mat[(i, j)] - mat[(j, i)]).norm() > tol {
                    return Err(ThetaError::NotSymmetric(i, j));
                }
            }
        }
        let sym = DMatrix::from_fn(g, g, |i, j| (mat[(i, j)] + mat[(j, i)]) * 0.5);
        Self::validate(sym)
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    /// Smallest eigenvalue of Im B.
    pub fn im_lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// The matrix 2B, revalidated cheaply.
    fn doubled(&self) -> PeriodMatrix {
        PeriodMatrix {
            g: self.g,
            mat: self.mat.map(|v| v * 2.0),
            y_inv: self.y_inv.map(|v| v * 0.5),
            lambda_min: self.lambda_min * 2.0,
        }
    }

    fn check_dim(&self, v: &DVector<C64>) -> Result<(), ThetaError> {
        if v.len() != self.g {
            return Err(ThetaError::DimensionMismatch {
                expected: self.g,
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Lifted Kummer point: all 2^g second-order theta values at one argument,
/// indexed by epsilon in (Z/2Z)^g in lexicographic order.  Projective:
/// comparisons must be scale-free.
#[derive(Debug, Clone)]
pub struct KummerPoint {
    pub components: Vec<C64>,
}

impl KummerPoint {
    pub fn sup_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Projective distance: min over phase-free scaling, via normalized
    /// cross products |a_i b_j - a_j b_i| / (|a| |b|).
    pub fn projective_distance(&self, other: &KummerPoint) -> f64 {
        let na = self.sup_norm();
        let nb = other.sup_norm();
        let mut worst: f64 = 0.0;
        for i in 0..self.components.len() {
            for j in (i + 1)..self.components.len() {
                let cross = self.components[i] * other.components[j]
                    - self.components[j] * other.components[i];
                worst = worst.max(cross.norm() / (na * nb));
            }
        }
        worst
    }
}

/// A located point of the theta divisor together with its residual.
#[derive(Debug, Clone)]
pub struct DivisorPoint {
    pub z: DVector<C64>,
    pub residual: f64,
}

fn c_exp(x: C64) -> C64 {
    x.exp()
}

/// Deterministic pairwise (tree) reduction.
fn tree_sum(terms: &mut Vec<C64>) -> C64 {
    if terms.is_empty() {
        return C64::new(0.0, 0.0);
    }
    let mut n = terms.len();
    while n > 1 {
        let half = n / 2;
        for k in 0..half {
            terms[k] = terms[2 * k] + terms[2 * k + 1];
        }
        if n % 2 == 1 {
            terms[half] = terms[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    terms[0]
}

/// Pick the enumeration radius so the conservative Gaussian tail bound
/// drops below `eps`: tail <= sum_k N_k exp(-pi (R+k)^2) with the shell
/// counts bounded by a box count in the unskewed lattice.
fn required_radius(g: usize, lambda_min: f64, eps: f64) -> f64 {
    let rho = lambda_min.sqrt();
    let mut r: f64 = 1.0;
    loop {
        let mut tail = 0.0;
        for k in 0..40 {
            let rk = r + k as f64;
            let count = (2.0 * (rk + 1.0) / rho + 2.0).powi(g as i32);
            tail += count * (-PI * rk * rk).exp();
            if tail > eps {
                break;
            }
        }
        if tail <= eps || r > 1e4 {
            return r;
        }
        r += 0.5;
    }
}

/// Core summation: value (and optionally a directional derivative) of
///
/// ```text
/// S(w) = sum_{m in Z^g} exp(2 pi i (w, m + a) + pi i (B (m + a), m + a))
/// ```
///
/// for a real shift vector `a`, with quasi-periodic argument reduction.
/// The derivative, when requested, is with respect to w in direction `dir`:
/// sum of 2 pi i (dir, m + a) times the term.
fn theta_sum(
    b: &PeriodMatrix,
    w: &DVector<C64>,
    shift: &DVector<f64>,
    policy: &ThetaPolicy,
    dir: Option<&DVector<C64>>,
) -> Result<(C64, C64), ThetaError> {
    let g = b.g;
    let y_inv = &b.y_inv;

    // Reduce w by B q to center the Gaussian, then by the integer lattice.
    let im_w = DVector::<f64>::from_fn(g, |i, _| w[i].im);
    let c_full = y_inv * &im_w;
    let q: Vec<i64> = (0..g).map(|i| c_full[i].round() as i64).collect();
    let bq = DVector::<C64>::from_fn(g, |i, _| {
        (0..g)
            .map(|j| b.mat[(i, j)] * q[j] as f64)
            .fold(C64::new(0.0, 0.0), |a, v| a + v)
    });
    let w1 = w - &bq;
    let p: Vec<i64> = (0..g).map(|i| w1[i].re.round() as i64).collect();
    let w2 = DVector::<C64>::from_fn(g, |i, _| w1[i] - C64::new(p[i] as f64, 0.0));

    // S(w) = exp(-pi i (Bq,q) - 2 pi i (w1,q)) * exp(2 pi i (p,a)) * S(w2)
    let bqq: C64 = (0..g).map(|i| bq[i] * q[i] as f64).sum();
    let w1q: C64 = (0..g).map(|i| w1[i] * q[i] as f64).sum();
    let pa: f64 = (0..g).map(|i| p[i] as f64 * shift[i]).sum();
    let prefactor = c_exp(
        C64::new(0.0, -PI) * bqq + C64::new(0.0, -TWO_PI) * w1q + C64::new(0.0, TWO_PI * pa),
    );

    // Gaussian center of the reduced sum in the m variable.
    let im_w2 = DVector::<f64>::from_fn(g, |i, _| w2[i].im);
    let c_red = y_inv * &im_w2;
    let radius = required_radius(g, b.lambda_min, policy.target_abs_error);

    let mut half_widths = Vec::with_capacity(g);
    for i in 0..g {
        let hw = radius * y_inv[(i, i)].max(0.0).sqrt() + 1.0;
        let needed = hw.ceil() as u32;
        if needed > policy.max_radius {
            return Err(ThetaError::RadiusCapExceeded {
                required: needed,
                cap: policy.max_radius,
            });
        }
        half_widths.push(needed as i64);
    }

    // Enumerate the integer box, filter by the ellipsoid, and record the
    // terms along with the ordering key |m|^2.
    let mut entries: Vec<(i64, Vec<i64>, C64, C64)> = Vec::new();
    let mut m = vec![0i64; g];
    let r2 = radius * radius;
    enumerate_box(&mut m, 0, &half_widths, &c_red, shift, &mut |mv| {
        let n = DVector::<f64>::from_fn(g, |i, _| mv[i] as f64 + shift[i]);
        // ellipsoid test on (n + c) Y (n + c)
        let nc = DVector::<f64>::from_fn(g, |i, _| n[i] + c_red[i]);
        let mut quad = 0.0;
        for i in 0..g {
            for j in 0..g {
                quad += nc[i] * b.mat[(i, j)].im * nc[j];
            }
        }
        if quad > r2 {
            return;
        }
        let mut expo = C64::new(0.0, 0.0);
        for i in 0..g {
            expo += C64::new(0.0, TWO_PI * n[i]) * w2[i];
            for j in 0..g {
                expo += C64::new(0.0, PI) * b.mat[(i, j)] * n[i] * n[j];
            }
        }
        let term = c_exp(expo);
        let dterm = if let Some(d) = dir {
            let dn: C64 = (0..g).map(|i| d[i] * n[i]).sum();
            C64::new(0.0, TWO_PI) * dn * term
        } else {
            C64::new(0.0, 0.0)
        };
        let key: i64 = mv.iter().map(|&x| x * x).sum();
        entries.push((key, mv.to_vec(), term, dterm));
    });

    entries.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut vals: Vec<C64> = entries.iter().map(|e| e.2).collect();
    let value = tree_sum(&mut vals);
    let deriv = if dir.is_some() {
        let mut dvals: Vec<C64> = entries.iter().map(|e| e.3).collect();
        let d_red = tree_sum(&mut dvals);
        // product rule through the reduction factor: the q-shift carries a
        // z-dependent exponential.
        let dq: C64 = match dir {
            Some(d) => (0..g).map(|i| d[i] * q[i] as f64).sum(),
            None => C64::new(0.0, 0.0),
        };
        prefactor * (d_red + C64::new(0.0, -TWO_PI) * dq * value)
    } else {
        C64::new(0.0, 0.0)
    };
    Ok((prefactor * value, deriv))
}

fn enumerate_box(
    m: &mut Vec<i64>,
    coord: usize,
    half_widths: &[i64],
    center: &DVector<f64>,
    shift: &DVector<f64>,
    f: &mut impl FnMut(&[i64]),
) {
    if coord == m.len() {
        f(m);
        return;
    }
    let mid = (-center[coord] - shift[coord]).round() as i64;
    let hw = half_widths[coord];
    for v in (mid - hw)..=(mid + hw) {
        m[coord] = v;
        enumerate_box(m, coord + 1, half_widths, center, shift, f);
    }
}

/// Riemann theta value.
pub fn theta(b: &PeriodMatrix, z: &DVector<C64>, policy: &ThetaPolicy) -> Result<C64, ThetaError> {
    b.check_dim(z)?;
    let shift = DVector::<f64>::zeros(b.g);
    Ok(theta_sum(b, z, &shift, policy, None)?.0)
}

/// Directional derivative of theta at z along `dir`, term-wise
/// differentiated truncated sum.
pub fn theta_directional_derivative(
    b: &PeriodMatrix,
    z: &DVector<C64>,
    dir: &DVector<C64>,
    policy: &ThetaPolicy,
) -> Result<C64, ThetaError> {
    b.check_dim(z)?;
    b.check_dim(dir)?;
    let shift = DVector::<f64>::zeros(b.g);
    Ok(theta_sum(b, z, &shift, policy, Some(dir))?.1)
}

/// Quasi-periodicity factor mu with theta(z + p + B q) = mu * theta(z),
/// mu = exp(-pi i (B q, q) - 2 pi i (z, q)).
pub fn theta_quasi_factor(b: &PeriodMatrix, z: &DVector<C64>, _p: &[i64], q: &[i64]) -> C64 {
    let g = b.g;
    let bq = DVector::<C64>::from_fn(g, |i, _| {
        (0..g)
            .map(|j| b.mat[(i, j)] * q[j] as f64)
            .fold(C64::new(0.0, 0.0), |a, v| a + v)
    });
    let bqq: C64 = (0..g).map(|i| bq[i] * q[i] as f64).sum();
    let zq: C64 = (0..g).map(|i| z[i] * q[i] as f64).sum();
    c_exp(C64::new(0.0, -PI) * bqq + C64::new(0.0, -TWO_PI) * zq)
}

/// The lattice vector p + B q as a complex vector.
pub fn lattice_vector(b: &PeriodMatrix, p: &[i64], q: &[i64]) -> DVector<C64> {
    let g = b.g;
    DVector::from_fn(g, |i, _| {
        let mut v = C64::new(p[i] as f64, 0.0);
        for j in 0..g {
            v += b.mat[(i, j)] * q[j] as f64;
        }
        v
    })
}

/// Second-order theta by its defining sum:
///
/// ```text
/// Theta[eps](B, z) = sum_m exp(2 pi i (2m + eps, z) + pi i (2m + eps, B (m + eps/2)))
///                  = sum over the shifted lattice m + eps/2 of the (2B, 2z) sum.
/// ```
pub fn theta_second_order(
    b: &PeriodMatrix,
    z: &DVector<C64>,
    eps: &[u8],
    policy: &ThetaPolicy,
) -> Result<C64, ThetaError> {
    b.check_dim(z)?;
    if eps.len() != b.g {
        return Err(ThetaError::DimensionMismatch {
            expected: b.g,
            got: eps.len(),
        });
    }
    let doubled = b.doubled();
    let w = z.map(|v| v * 2.0);
    let shift = DVector::<f64>::from_fn(b.g, |i, _| eps[i] as f64 * 0.5);
    Ok(theta_sum(&doubled, &w, &shift, policy, None)?.0)
}

/// Cross-check path for the second-order theta: the same value expressed
/// through the plain theta at (2B, 2z + B eps),
/// Theta[eps](B,z) = exp(pi i (B eps, eps)/2 + 2 pi i (eps, z)) theta(2B, 2z + B eps).
pub fn theta_second_order_via_char(
    b: &PeriodMatrix,
    z: &DVector<C64>,
    eps: &[u8],
    policy: &ThetaPolicy,
) -> Result<C64, ThetaError> {
    let g = b.g;
    let doubled = b.doubled();
    let beps = DVector::<C64>::from_fn(g, |i, _| {
        (0..g)
            .map(|j| b.mat[(i, j)] * eps[j] as f64)
            .fold(C64::new(0.0, 0.0), |a, v| a + v)
    });
    let arg = DVector::<C64>::from_fn(g, |i, _| z[i] * 2.0 + beps[i]);
    let val = theta(&doubled, &arg, policy)?;
    let bee: C64 = (0..g).map(|i| beps[i] * eps[i] as f64).sum();
    let ez: C64 = (0..g).map(|i| z[i] * eps[i] as f64).sum();
    Ok(c_exp(C64::new(0.0, PI * 0.5) * bee + C64::new(0.0, TWO_PI) * ez) * val)
}

/// Theta with the half-integer characteristic [1/2, 1/2] (all
/// coordinates): sum over m + 1/2 of exp(2 pi i (z + 1/2, m + 1/2) +
/// pi i (B(m + 1/2), m + 1/2)).  For g = 1 this is minus the classical
/// odd theta function.
pub fn theta_half_char(
    b: &PeriodMatrix,
    z: &DVector<C64>,
    policy: &ThetaPolicy,
) -> Result<C64, ThetaError> {
    b.check_dim(z)?;
    let w = DVector::from_fn(b.g, |i, _| z[i] + C64::new(0.5, 0.0));
    let shift = DVector::<f64>::from_element(b.g, 0.5);
    Ok(theta_sum(b, &w, &shift, policy, None)?.0)
}

/// Directional derivative of the half-characteristic theta.
pub fn theta_half_char_derivative(
    b: &PeriodMatrix,
    z: &DVector<C64>,
    dir: &DVector<C64>,
    policy: &ThetaPolicy,
) -> Result<C64, ThetaError> {
    b.check_dim(z)?;
    let w = DVector::from_fn(b.g, |i, _| z[i] + C64::new(0.5, 0.0));
    let shift = DVector::<f64>::from_element(b.g, 0.5);
    Ok(theta_sum(b, &w, &shift, policy, Some(dir))?.1)
}

/// All 2^g second-order theta values, epsilon in lexicographic order
/// (first coordinate most significant).
pub fn kummer(
    b: &PeriodMatrix,
    z: &DVector<C64>,
    policy: &ThetaPolicy,
) -> Result<KummerPoint, ThetaError> {
    let g = b.g;
    let count = 1usize << g;
    let mut components = Vec::with_capacity(count);
    for k in 0..count {
        let eps: Vec<u8> = (0..g).map(|i| ((k >> (g - 1 - i)) & 1) as u8).collect();
        components.push(theta_second_order(b, z, &eps, policy)?);
    }
    if components.iter().all(|c| c.norm() < 1e-300) {
        return Err(ThetaError::ZeroVector);
    }
    Ok(KummerPoint { components })
}

/// Options for the divisor-point search.
#[derive(Debug, Clone, Copy)]
pub struct ZeroSearch {
    pub divisor_tol_rel: f64,
    pub max_iters: usize,
    pub seeds: usize,
}

impl Default for ZeroSearch {
    fn default() -> Self {
        ZeroSearch {
            divisor_tol_rel: 1e-12,
            max_iters: 60,
            seeds: 16,
        }
    }
}

/// Newton search for a zero of t -> theta(z0 + t dir), seeded on a coarse
/// circle.  Returns the located divisor point with its residual.
pub fn find_theta_zero(
    b: &PeriodMatrix,
    z0: &DVector<C64>,
    dir: &DVector<C64>,
    policy: &ThetaPolicy,
    search: &ZeroSearch,
) -> Result<DivisorPoint, ThetaError> {
    b.check_dim(z0)?;
    b.check_dim(dir)?;
    let eval = |t: C64| -> Result<(C64, C64), ThetaError> {
        let z = DVector::<C64>::from_fn(b.g, |i, _| z0[i] + t * dir[i]);
        let shift = DVector::<f64>::zeros(b.g);
        theta_sum(b, &z, &shift, policy, Some(dir))
    };

    let mut scale: f64 = 0.0;
    let mut seeds = Vec::with_capacity(search.seeds);
    for k in 0..search.seeds {
        let ang = TWO_PI * k as f64 / search.seeds as f64;
        let t = C64::new(ang.cos(), ang.sin());
        let (v, _) = eval(t)?;
        scale = scale.max(v.norm());
        seeds.push(t);
    }
    if scale < 1e-250 {
        return Err(ThetaError::NoConvergence);
    }
    let tol = search.divisor_tol_rel * scale;

    // Newton converges on the step size; the residual is then measured on
    // the lattice-reduced representative, where the quasi-periodic growth
    // factor cannot mask a genuine zero.
    let mut best: Option<(C64, DVector<C64>, f64)> = None;
    for t0 in seeds {
        let mut t = t0;
        let mut settled = false;
        for _ in 0..search.max_iters {
            let (v, d) = eval(t)?;
            if d.norm() < 1e-280 {
                break;
            }
            let step = v / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            t -= step;
            if t.norm() > 1e6 {
                break;
            }
            if step.norm() < 1e-13 * (1.0 + t.norm()) {
                settled = true;
                break;
            }
        }
        if settled {
            let z = DVector::<C64>::from_fn(b.g, |i, _| z0[i] + t * dir[i]);
            let (zred, _, _) = reduce_mod_lattice(b, &z);
            let residual = theta(b, &zred, policy)?.norm();
            if residual < tol {
                let keep = match &best {
                    None => true,
                    Some((tb, _, _)) => (t.norm(), t.arg()) < (tb.norm(), tb.arg()),
                };
                if keep {
                    best = Some((t, zred, residual));
                }
            }
        }
    }
    match best {
        Some((_, z, residual)) => Ok(DivisorPoint { z, residual }),
        None => Err(ThetaError::NoConvergence),
    }
}

/// Reduce a vector to the fundamental cell of Z^g + B Z^g; returns the
/// reduced vector and the (p, q) used.  Helper for torus distances.
pub fn reduce_mod_lattice(b: &PeriodMatrix, z: &DVector<C64>) -> (DVector<C64>, Vec<i64>, Vec<i64>) {
    let g = b.g;
    let im_z = DVector::<f64>::from_fn(g, |i, _| z[i].im);
    let c = &b.y_inv * &im_z;
    let q: Vec<i64> = (0..g).map(|i| c[i].round() as i64).collect();
    let mut w = z.clone();
    for i in 0..g {
        for j in 0..g {
            w[i] -= b.mat[(i, j)] * q[j] as f64;
        }
    }
    let p: Vec<i64> = (0..g).map(|i| w[i].re.round() as i64).collect();
    for i in 0..g {
        w[i] -= C64::new(p[i] as f64, 0.0);
    }
    (w, p, q)
}

/// Distance from z to the lattice Z^g + B Z^g (sup norm after reduction).
pub fn lattice_distance(b: &PeriodMatrix, z: &DVector<C64>) -> f64 {
    let (w, _, _) = reduce_mod_lattice(b, z);
    // The nearest lattice point may still differ by one unit cell in the
    // skew directions; probe the 3^g neighbors of the rounded point.
    let g = b.g;
    let mut best = f64::MAX;
    let mut q = vec![0i64; g];
    probe_neighbors(&mut q, 0, &mut |qv: &[i64]| {
        let mut shifted = w.clone();
        for i in 0..g {
            for j in 0..g {
                shifted[i] -= b.mat[(i, j)] * qv[j] as f64;
            }
        }
        let p: Vec<i64> = (0..g).map(|i| shifted[i].re.round() as i64).collect();
        let mut norm: f64 = 0.0;
        for i in 0..g {
            norm = norm.max((shifted[i] - C64::new(p[i] as f64, 0.0)).norm());
        }
        best = best.min(norm);
    });
    best
}

fn probe_neighbors(q: &mut Vec<i64>, coord: usize, f: &mut impl FnMut(&[i64])) {
    if coord == q.len() {
        f(q);
        return;
    }
    for v in -1..=1 {
        q[coord] = v;
        probe_neighbors(q, coord + 1, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pm(entries: &[&[C64]]) -> PeriodMatrix {
        let g = entries.len();
        let mat = DMatrix::from_fn(g, g, |i, j| entries[i][j]);
        PeriodMatrix::validate(mat).unwrap()
    }

    fn pm_i() -> PeriodMatrix {
        pm(&[&[c(0.0, 1.0)]])
    }

    fn vecc(vals: &[C64]) -> DVector<C64> {
        DVector::from_row_slice(vals)
    }

    /// Independent scalar oracle: plain partial sum of the g=1 series with
    /// fixed radius, Kahan-compensated, no reduction.  Only valid for
    /// arguments with moderate imaginary part.
    fn theta1_oracle(tau: C64, z: C64, radius: i64) -> C64 {
        let mut sum = c(0.0, 0.0);
        let mut comp = c(0.0, 0.0);
        for m in -radius..=radius {
            let mf = m as f64;
            let term = (c(0.0, TWO_PI) * z * mf + c(0.0, PI) * tau * mf * mf).exp();
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    fn random_b(rng: &mut ChaCha8Rng, g: usize) -> PeriodMatrix {
        // random symmetric real part, imaginary part L L^T + I for safety
        let mut s = DMatrix::<f64>::zeros(g, g);
        let mut l = DMatrix::<f64>::zeros(g, g);
        for i in 0..g {
            for j in 0..g {
                if j <= i {
                    l[(i, j)] = rng.random::<f64>() - 0.5;
                }
                let v = rng.random::<f64>() - 0.5;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        let y = &l * l.transpose() + DMatrix::<f64>::identity(g, g);
        let mat = DMatrix::from_fn(g, g, |i, j| c(s[(i, j)], y[(i, j)]));
        PeriodMatrix::validate(mat).unwrap()
    }

    fn random_z(rng: &mut ChaCha8Rng, g: usize) -> DVector<C64> {
        DVector::from_fn(g, |_, _| {
            c(
                2.0 * (rng.random::<f64>() - 0.5),
                2.0 * (rng.random::<f64>() - 0.5),
            )
        })
    }

    #[test]
    fn validate_rejects_bad_inputs() {
        // purely real entry: Im = 0 is not positive definite
        let real = DMatrix::from_fn(1, 1, |_, _| c(1.0, 0.0));
        assert!(matches!(
            PeriodMatrix::validate(real),
            Err(ThetaError::NotPositiveDefinite)
        ));
        // asymmetric entry
        let asym = DMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c(0.0, 1.0),
            (0, 1) => c(1.0, 0.0),
            _ => c(0.0, 0.0),
        });
        assert!(matches!(
            PeriodMatrix::validate(asym),
            Err(ThetaError::NotSymmetric(0, 1))
        ));
        // the imaginary unit itself is fine
        assert_eq!(pm_i().g(), 1);
    }

    #[test]
    fn theta_matches_reference_value_at_i() {
        let b = pm_i();
        let policy = ThetaPolicy::default();
        let v = theta(&b, &vecc(&[c(0.0, 0.0)]), &policy).unwrap();
        let oracle = theta1_oracle(c(0.0, 1.0), c(0.0, 0.0), 20);
        assert!((v - oracle).norm() < 1e-10, "value {v}, oracle {oracle}");
        assert!((v.re - 1.08643481121331).abs() < 1e-10);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn theta_matches_scalar_oracle_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let policy = ThetaPolicy::default();
        for _ in 0..100 {
            let tau = c(
                2.0 * (rng.random::<f64>() - 0.5),
                0.4 + 1.6 * rng.random::<f64>(),
            );
            let z = c(
                rng.random::<f64>() - 0.5,
                0.6 * (rng.random::<f64>() - 0.5),
            );
            let b = pm(&[&[tau]]);
            let v = theta(&b, &vecc(&[z]), &policy).unwrap();
            let oracle = theta1_oracle(tau, z, 25);
            assert!(
                (v - oracle).norm() < 1e-12 * (1.0 + oracle.norm()),
                "tau {tau} z {z}: {v} vs {oracle}"
            );
        }
    }

    #[test]
    fn lattice_periodicity_and_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let policy = ThetaPolicy::default();
        for g in 1..=2usize {
            for _ in 0..25 {
                let b = random_b(&mut rng, g);
                let z = random_z(&mut rng, g);
                let v = theta(&b, &z, &policy).unwrap();
                for j in 0..g {
                    let mut ze = z.clone();
                    ze[j] += c(1.0, 0.0);
                    let ve = theta(&b, &ze, &policy).unwrap();
                    assert!((ve - v).norm() < 1e-12 * (1.0 + v.norm()));
                }
                let zneg = z.map(|x| -x);
                let vneg = theta(&b, &zneg, &policy).unwrap();
                assert!((vneg - v).norm() < 1e-12 * (1.0 + v.norm()));
            }
        }
    }

    #[test]
    fn quasi_periodicity_factor_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let policy = ThetaPolicy::default();
        for _ in 0..100 {
            let g = 1 + (rng.random::<u32>() % 2) as usize;
            let b = random_b(&mut rng, g);
            let z = random_z(&mut rng, g);
            let p: Vec<i64> = (0..g).map(|_| (rng.random::<u32>() % 5) as i64 - 2).collect();
            let q: Vec<i64> = (0..g).map(|_| (rng.random::<u32>() % 5) as i64 - 2).collect();
            let lam = lattice_vector(&b, &p, &q);
            let zs = DVector::from_fn(g, |i, _| z[i] + lam[i]);
            let lhs = theta(&b, &zs, &policy).unwrap();
            let mu = theta_quasi_factor(&b, &z, &p, &q);
            let rhs = mu * theta(&b, &z, &policy).unwrap();
            let scale = lhs.norm().max(rhs.norm()).max(1.0);
            assert!((lhs - rhs).norm() < 1e-11 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn quasi_factor_trivial_cases() {
        let b = pm_i();
        let z = vecc(&[c(0.3, 0.0)]);
        // q = 0 gives mu = 1
        let mu = theta_quasi_factor(&b, &z, &[3], &[0]);
        assert!((mu - c(1.0, 0.0)).norm() < 1e-15);
        // g=1, B=[[i]], lambda = B*1: mu = exp(-pi i * i - 2 pi i * 0.3)
        let mu = theta_quasi_factor(&b, &z, &[0], &[1]);
        let expected = (c(0.0, -PI) * c(0.0, 1.0) + c(0.0, -TWO_PI) * c(0.3, 0.0)).exp();
        assert!((mu - expected).norm() < 1e-14);
    }

    #[test]
    fn second_order_defining_sum_and_reindex() {
        let policy = ThetaPolicy::default();
        let b = pm_i();
        // eps = 0, g = 1: equals theta([[2i]], 0)
        let v = theta_second_order(&b, &vecc(&[c(0.0, 0.0)]), &[0], &policy).unwrap();
        let b2 = pm(&[&[c(0.0, 2.0)]]);
        let w = theta(&b2, &vecc(&[c(0.0, 0.0)]), &policy).unwrap();
        assert!((v - w).norm() < 1e-12);
    }

    #[test]
    fn second_order_periodicity_parity_and_char_crosscheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policy = ThetaPolicy::default();
        for g in 1..=2usize {
            for _ in 0..10 {
                let b = random_b(&mut rng, g);
                let z = random_z(&mut rng, g);
                for k in 0..(1usize << g) {
                    let eps: Vec<u8> = (0..g).map(|i| ((k >> (g - 1 - i)) & 1) as u8).collect();
                    let v = theta_second_order(&b, &z, &eps, &policy).unwrap();
                    let via_char = theta_second_order_via_char(&b, &z, &eps, &policy).unwrap();
                    assert!(
                        (v - via_char).norm() < 1e-11 * (1.0 + v.norm()),
                        "char path mismatch"
                    );
                    let mut ze = z.clone();
                    ze[0] += c(1.0, 0.0);
                    let vp = theta_second_order(&b, &ze, &eps, &policy).unwrap();
                    assert!((vp - v).norm() < 1e-12 * (1.0 + v.norm()));
                    let vneg =
                        theta_second_order(&b, &z.map(|x| -x), &eps, &policy).unwrap();
                    assert!((vneg - v).norm() < 1e-12 * (1.0 + v.norm()));
                }
            }
        }
    }

    #[test]
    fn diagonal_b_factors() {
        let policy = ThetaPolicy::default();
        let b2 = pm(&[
            &[c(0.0, 1.0), c(0.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 1.0)],
        ]);
        let v = theta(&b2, &vecc(&[c(0.0, 0.0), c(0.0, 0.0)]), &policy).unwrap();
        let v1 = theta(&pm_i(), &vecc(&[c(0.0, 0.0)]), &policy).unwrap();
        assert!((v - v1 * v1).norm() < 1e-11);
    }

    #[test]
    fn addition_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let policy = ThetaPolicy::default();
        for g in 1..=2usize {
            for _ in 0..25 {
                let b = random_b(&mut rng, g);
                let z = random_z(&mut rng, g);
                let w = random_z(&mut rng, g);
                let zp = DVector::from_fn(g, |i, _| z[i] + w[i]);
                let zm = DVector::from_fn(g, |i, _| z[i] - w[i]);
                let lhs = theta(&b, &zp, &policy).unwrap() * theta(&b, &zm, &policy).unwrap();
                let kz = kummer(&b, &z, &policy).unwrap();
                let kw = kummer(&b, &w, &policy).unwrap();
                let rhs: C64 = kz
                    .components
                    .iter()
                    .zip(kw.components.iter())
                    .map(|(a, b)| a * b)
                    .sum();
                let scale = lhs.norm().max(rhs.norm()).max(1e-30);
                assert!((lhs - rhs).norm() / scale < 1e-9, "g={g}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn kummer_component_count_and_projective_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let policy = ThetaPolicy::default();
        let b = random_b(&mut rng, 1);
        let z = random_z(&mut rng, 1);
        let k = kummer(&b, &z, &policy).unwrap();
        assert_eq!(k.components.len(), 2);

        for g in 1..=2usize {
            let b = random_b(&mut rng, g);
            let z = random_z(&mut rng, g);
            let k0 = kummer(&b, &z, &policy).unwrap();
            let p: Vec<i64> = (0..g).map(|_| 1).collect();
            let q: Vec<i64> = (0..g).map(|_| -1).collect();
            let lam = lattice_vector(&b, &p, &q);
            let zs = DVector::from_fn(g, |i, _| z[i] + lam[i]);
            let k1 = kummer(&b, &zs, &policy).unwrap();
            assert!(k0.projective_distance(&k1) < 1e-10);
            let k2 = kummer(&b, &z.map(|x| -x), &policy).unwrap();
            for (a, bb) in k0.components.iter().zip(k2.components.iter()) {
                assert!((a - bb).norm() < 1e-12 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn directional_derivative_against_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let policy = ThetaPolicy::default();
        for _ in 0..20 {
            let b = random_b(&mut rng, 2);
            let z = random_z(&mut rng, 2);
            let dir = random_z(&mut rng, 2);
            let d = theta_directional_derivative(&b, &z, &dir, &policy).unwrap();
            let h = 1e-5;
            let zp = DVector::from_fn(2, |i, _| z[i] + dir[i] * h);
            let zm = DVector::from_fn(2, |i, _| z[i] - dir[i] * h);
            let fd = (theta(&b, &zp, &policy).unwrap() - theta(&b, &zm, &policy).unwrap())
                / c(2.0 * h, 0.0);
            assert!(
                (d - fd).norm() < 1e-7 * (1.0 + d.norm()),
                "deriv {d} vs fd {fd}"
            );
        }
        // dir = 0 gives 0; at z = 0 the derivative of the even function vanishes
        let b = random_b(&mut rng, 2);
        let z0 = vecc(&[c(0.0, 0.0), c(0.0, 0.0)]);
        let zero_dir = vecc(&[c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(
            theta_directional_derivative(&b, &z0, &zero_dir, &policy).unwrap(),
            c(0.0, 0.0)
        );
        let dir = vecc(&[c(1.0, 0.3), c(-0.2, 0.9)]);
        let d0 = theta_directional_derivative(&b, &z0, &dir, &policy).unwrap();
        assert!(d0.norm() < 1e-12);
    }

    #[test]
    fn error_monotonicity_under_tightened_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let b = random_b(&mut rng, 2);
            let z = random_z(&mut rng, 2);
            let reference = theta(
                &b,
                &z,
                &ThetaPolicy {
                    target_abs_error: 1e-16,
                    max_radius: 200,
                },
            )
            .unwrap();
            let mut prev_dev = f64::MAX;
            for k in 0..5 {
                let tol = 1e-6 * 10f64.powi(-(2 * k));
                let v = theta(
                    &b,
                    &z,
                    &ThetaPolicy {
                        target_abs_error: tol,
                        max_radius: 200,
                    },
                )
                .unwrap();
                let dev = (v - reference).norm();
                assert!(
                    dev <= prev_dev + 1e-15,
                    "tightening made things worse: {dev} after {prev_dev}"
                );
                prev_dev = dev;
            }
        }
    }

    #[test]
    fn radius_cap_is_enforced() {
        let b = pm_i();
        let policy = ThetaPolicy {
            target_abs_error: 1e-13,
            max_radius: 1,
        };
        // a large imaginary argument forces a wide un-reduced center; after
        // reduction the radius requirement is modest, so instead squeeze the
        // cap below the bound required by the tail estimate.
        let err = theta(&b, &vecc(&[c(0.0, 0.0)]), &policy);
        assert!(matches!(err, Err(ThetaError::RadiusCapExceeded { .. })));
    }

    #[test]
    fn find_zero_locates_the_classical_odd_point() {
        let policy = ThetaPolicy::default();
        for tau in [c(0.0, 1.0), c(0.3, 1.1), c(-0.4, 0.7)] {
            let b = pm(&[&[tau]]);
            let z0 = vecc(&[c(0.0, 0.0)]);
            let dir = vecc(&[c(1.0, 0.0)]);
            let dp = find_theta_zero(&b, &z0, &dir, &policy, &ZeroSearch::default()).unwrap();
            assert!(dp.residual < 1e-10);
            // the zero is (1 + tau)/2 mod lattice
            let target = (c(1.0, 0.0) + tau) * 0.5;
            let diff = vecc(&[dp.z[0] - target]);
            assert!(
                lattice_distance(&b, &diff) < 1e-8,
                "zero {} vs classical {}",
                dp.z[0],
                target
            );
        }
    }

    #[test]
    fn newton_seeds_agree() {
        let policy = ThetaPolicy::default();
        let b = pm(&[&[c(0.25, 0.9)]]);
        let z0 = vecc(&[c(0.1, 0.05)]);
        let dir = vecc(&[c(0.8, 0.2)]);
        // run the search twice; determinism means identical output
        let d1 = find_theta_zero(&b, &z0, &dir, &policy, &ZeroSearch::default()).unwrap();
        let d2 = find_theta_zero(&b, &z0, &dir, &policy, &ZeroSearch::default()).unwrap();
        assert_eq!(d1.z[0], d2.z[0]);
        assert!(theta(&b, &d1.z, &policy).unwrap().norm() < 1e-10);
    }
}
