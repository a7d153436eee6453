//! The general four-point difference equation on a genus-1 Jacobian.
//!
//! A Baker-Akhiezer function with one pole (at gamma) and exponential
//! weights at two pairs of marked points q_1^+-, q_2^+- satisfies
//!
//! ```text
//! psi_{n+1,m+1} - a_{n,m} psi_{n+1,m} - b_{n,m} psi_{n,m+1} + c_{n,m} psi_{n,m} = 0
//! ```
//!
//! with coefficients built from the leading expansion coefficients
//! xi_0^+-, chi_0^+- at the marked points.  On the elliptic curve
//! C/<1, tau> everything is explicit: the third-kind exponentials are
//! odd-theta ratios e^{Omega_i(z)} = theta1(z - q_i^-)/theta1(z - q_i^+)
//! (zero a-period by theta1 periodicity), and the expansion constants are
//! theta1 ratios against theta1'(0).

use super::{IdentityError, Sampler};
use crate::numeric::cpow;
use crate::report::{IdentityReport, SampleResidual};
use crate::theta::{self, PeriodMatrix, ThetaPolicy};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Configuration of the four-point check.
#[derive(Debug, Clone)]
pub struct FourPointConfig {
    pub tau: C64,
    pub q1_plus: C64,
    pub q1_minus: C64,
    pub q2_plus: C64,
    pub q2_minus: C64,
    pub gamma: C64,
    pub n_range: (i64, i64),
    pub m_range: (i64, i64),
    pub z_count: usize,
}

/// Elliptic helper bundling theta and the odd theta function.
pub struct EllipticTheta {
    pub b: PeriodMatrix,
    policy: ThetaPolicy,
}

impl EllipticTheta {
    pub fn new(tau: C64, policy: ThetaPolicy) -> Result<Self, IdentityError> {
        let mat = DMatrix::from_fn(1, 1, |_, _| tau);
        Ok(EllipticTheta {
            b: PeriodMatrix::validate(mat)?,
            policy,
        })
    }

    pub fn theta(&self, z: C64) -> Result<C64, IdentityError> {
        Ok(theta::theta(
            &self.b,
            &DVector::from_row_slice(&[z]),
            &self.policy,
        )?)
    }

    /// The odd theta function as the half-characteristic sum; the overall
    /// normalization cancels in every ratio used here.
    pub fn theta1(&self, z: C64) -> Result<C64, IdentityError> {
        Ok(-theta::theta_half_char(
            &self.b,
            &DVector::from_row_slice(&[z]),
            &self.policy,
        )?)
    }

    /// Derivative of theta1 at zero.
    pub fn theta1_prime0(&self) -> Result<C64, IdentityError> {
        Ok(-theta::theta_half_char_derivative(
            &self.b,
            &DVector::from_row_slice(&[C64::new(0.0, 0.0)]),
            &DVector::from_row_slice(&[C64::new(1.0, 0.0)]),
            &self.policy,
        )?)
    }

    /// Third-kind exponential e^{Omega(z)} for the pair (q_plus, q_minus):
    /// residue -1 at q_plus, +1 at q_minus, zero a-period.
    pub fn third_kind_exp(&self, z: C64, q_plus: C64, q_minus: C64) -> Result<C64, IdentityError> {
        Ok(self.theta1(z - q_minus)? / self.theta1(z - q_plus)?)
    }

    fn lattice_dist(&self, z: C64) -> f64 {
        theta::lattice_distance(&self.b, &DVector::from_row_slice(&[z]))
    }
}

struct FourPointFields {
    ell: EllipticTheta,
    q1p: C64,
    q1m: C64,
    q2p: C64,
    q2m: C64,
    u_hat: C64,
    v_hat: C64,
    z_hat: C64,
    exp_a1: [C64; 2],
    exp_a2: [C64; 2],
    exp_b1: [C64; 2],
    exp_b2: [C64; 2],
}

impl FourPointFields {
    fn new(cfg: &FourPointConfig, policy: ThetaPolicy) -> Result<Self, IdentityError> {
        let ell = EllipticTheta::new(cfg.tau, policy)?;
        let pts = [cfg.q1_plus, cfg.q1_minus, cfg.q2_plus, cfg.q2_minus, cfg.gamma];
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if ell.lattice_dist(pts[i] - pts[j]) < 1e-6 {
                    return Err(IdentityError::DegenerateConfiguration(format!(
                        "points {i} and {j} coincide mod the lattice"
                    )));
                }
            }
        }
        let u_hat = cfg.q1_minus - cfg.q1_plus;
        let v_hat = cfg.q2_minus - cfg.q2_plus;
        // the pole constraint: theta(z + z_hat) vanishes at z = gamma
        let z_hat = (C64::new(1.0, 0.0) + cfg.tau) * 0.5 - cfg.gamma;
        let tp0 = ell.theta1_prime0()?;
        // expansion constants of the abelian integrals at the punctures:
        // Omega_1 = +ln k + a1+ + O(1/k) at q1+ (k = 1/(z - q1+)) and
        // Omega_1 = -ln k + a1- + O(1/k) at q1-
        let exp_a1 = [
            ell.theta1(cfg.q1_plus - cfg.q1_minus)? / tp0,
            tp0 / ell.theta1(cfg.q1_minus - cfg.q1_plus)?,
        ];
        let exp_b2 = [
            ell.theta1(cfg.q2_plus - cfg.q2_minus)? / tp0,
            tp0 / ell.theta1(cfg.q2_minus - cfg.q2_plus)?,
        ];
        // regular values of the other integral at each puncture
        let exp_a2 = [
            ell.third_kind_exp(cfg.q1_plus, cfg.q2_plus, cfg.q2_minus)?,
            ell.third_kind_exp(cfg.q1_minus, cfg.q2_plus, cfg.q2_minus)?,
        ];
        let exp_b1 = [
            ell.third_kind_exp(cfg.q2_plus, cfg.q1_plus, cfg.q1_minus)?,
            ell.third_kind_exp(cfg.q2_minus, cfg.q1_plus, cfg.q1_minus)?,
        ];
        Ok(FourPointFields {
            ell,
            q1p: cfg.q1_plus,
            q1m: cfg.q1_minus,
            q2p: cfg.q2_plus,
            q2m: cfg.q2_minus,
            u_hat,
            v_hat,
            z_hat,
            exp_a1,
            exp_a2,
            exp_b1,
            exp_b2,
        })
    }

    fn psi(&self, n: i64, m: i64, z: C64) -> Result<C64, IdentityError> {
        let num = self
            .ell
            .theta(z + self.u_hat * n as f64 + self.v_hat * m as f64 + self.z_hat)?;
        let den = self.ell.theta(z + self.z_hat)?;
        let e1 = self.ell.third_kind_exp(z, self.q1p, self.q1m)?;
        let e2 = self.ell.third_kind_exp(z, self.q2p, self.q2m)?;
        Ok(num / den * cpow(e1, n) * cpow(e2, m))
    }

    /// Leading expansion coefficient of psi at q1^+- (sign: 0 = +, 1 = -).
    fn xi0(&self, sign: usize, n: i64, m: i64) -> Result<C64, IdentityError> {
        let q = if sign == 0 { self.q1p } else { self.q1m };
        let num = self
            .ell
            .theta(q + self.u_hat * n as f64 + self.v_hat * m as f64 + self.z_hat)?;
        let den = self.ell.theta(q + self.z_hat)?;
        Ok(num / den * cpow(self.exp_a1[sign], n) * cpow(self.exp_a2[sign], m))
    }

    /// Leading expansion coefficient of psi at q2^+-.
    fn chi0(&self, sign: usize, n: i64, m: i64) -> Result<C64, IdentityError> {
        let q = if sign == 0 { self.q2p } else { self.q2m };
        let num = self
            .ell
            .theta(q + self.u_hat * n as f64 + self.v_hat * m as f64 + self.z_hat)?;
        let den = self.ell.theta(q + self.z_hat)?;
        Ok(num / den * cpow(self.exp_b1[sign], n) * cpow(self.exp_b2[sign], m))
    }

    fn coefficients(&self, n: i64, m: i64) -> Result<(C64, C64, C64, C64), IdentityError> {
        let a = self.xi0(0, n + 1, m + 1)? / self.xi0(0, n + 1, m)?;
        let b = self.chi0(0, n + 1, m + 1)? / self.chi0(0, n, m + 1)?;
        let c = b * self.xi0(1, n, m + 1)? / self.xi0(1, n, m)?;
        // the combined expression for the same coefficient
        let c_alt = self.xi0(1, n, m + 1)? * self.chi0(0, n + 1, m + 1)?
            / (self.xi0(1, n, m)? * self.chi0(0, n, m + 1)?);
        Ok((a, b, c, c_alt))
    }
}

/// Verify the four-point equation over a window and sample points on the
/// curve; also checks that the two expressions for c_{n,m} agree.
pub fn verify_four_point(
    cfg: &FourPointConfig,
    policy: &ThetaPolicy,
    sampler: &mut Sampler,
    tolerance: f64,
) -> Result<IdentityReport, IdentityError> {
    let fields = FourPointFields::new(cfg, *policy)?;
    let mut samples = Vec::new();
    let mut c_consistency: f64 = 0.0;
    for _ in 0..cfg.z_count {
        // sample z on the curve away from the pole and the punctures
        let mut z;
        loop {
            let zv = sampler.z(&fields.ell.b);
            z = zv[0];
            let clear = [
                cfg.gamma,
                cfg.q1_plus,
                cfg.q1_minus,
                cfg.q2_plus,
                cfg.q2_minus,
            ]
            .iter()
            .all(|&p| fields.ell.lattice_dist(z - p) > 5e-2);
            if clear {
                break;
            }
        }
        for n in cfg.n_range.0..=cfg.n_range.1 {
            for m in cfg.m_range.0..=cfg.m_range.1 {
                let (a, b, c, c_alt) = fields.coefficients(n, m)?;
                c_consistency = c_consistency.max((c - c_alt).norm() / c.norm());
                let terms = [
                    fields.psi(n + 1, m + 1, z)?,
                    -a * fields.psi(n + 1, m, z)?,
                    -b * fields.psi(n, m + 1, z)?,
                    c * fields.psi(n, m, z)?,
                ];
                let defect: C64 = terms.iter().sum();
                let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
                samples.push(SampleResidual::new(
                    n,
                    m,
                    0,
                    &[z],
                    defect.norm() / scale.max(1e-300),
                ));
            }
        }
    }
    let rep = IdentityReport::from_samples("four-point", tolerance, samples)
        .with_note(format!("c_nm expressions agree to {c_consistency:.3e}"));
    Ok(rep)
}
