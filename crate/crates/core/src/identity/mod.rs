//! Baker-Akhiezer fields and the identity verification suites.
//!
//! The fields u_{n,m} and psi_{n,m} are theta-quotients over the Prym data
//! (Pi, A, U, V, W) with six constants c_1..c_3, w_1..w_3; the parity
//! nu = 0 iff n + m is even steers which component of the kernel of
//! 1 + sigma the theta arguments live on.  All residuals are reported
//! relative to the largest participating term, so reports are invariant
//! under global rescaling of the fields.

pub mod fourpoint;
pub mod recover;
pub mod verify;

use crate::curve::PrymData;
use crate::numeric::cpow;
use crate::theta::{self, PeriodMatrix, ThetaError, ThetaPolicy};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error("theta factor within {0:.3e} of the divisor; caller must move Z")]
    NearDivisor(f64),
    #[error("secancy points coincide mod the lattice")]
    DegenerateQuadruple,
    #[error("null vector has a vanishing coefficient")]
    ZeroCoefficient,
    #[error("constant recovery inconsistent: best probe residual {0:.3e}")]
    InconsistentSystem(f64),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("sampling failed to avoid the theta divisor after {0} attempts")]
    SamplingExhausted(usize),
    #[error(transparent)]
    Theta(#[from] ThetaError),
}

/// The six constants of the difference Schrodinger field formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchroedingerConstants {
    pub c1: C64,
    pub c2: C64,
    pub c3: C64,
    pub w1: C64,
    pub w2: C64,
    pub w3: C64,
}

impl SchroedingerConstants {
    pub fn all_ones() -> Self {
        let one = C64::new(1.0, 0.0);
        SchroedingerConstants {
            c1: one,
            c2: one,
            c3: one,
            w1: one,
            w2: one,
            w3: one,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.c1, self.c2, self.c3, self.w1, self.w2, self.w3]
            .iter()
            .all(|c| c.norm() > 0.0 && c.re.is_finite() && c.im.is_finite())
    }

    /// Constants for the relabeled convention nu -> 1 - nu, W -> -W:
    /// c_1, c_2, w_3 invert, the rest stay.
    pub fn relabeled(&self) -> Self {
        SchroedingerConstants {
            c1: self.c1.finv(),
            c2: self.c2.finv(),
            c3: self.c3,
            w1: self.w1,
            w2: self.w2,
            w3: self.w3.finv(),
        }
    }
}

/// Lattice site with its parity: nu = 0 iff n + m is even.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeIndex {
    pub n: i64,
    pub m: i64,
}

impl LatticeIndex {
    pub fn new(n: i64, m: i64) -> Self {
        LatticeIndex { n, m }
    }

    pub fn nu(&self) -> u8 {
        (((self.n + self.m) % 2 + 2) % 2) as u8
    }

    /// 1 - 2 nu as a sign.
    pub fn eta(&self) -> i64 {
        1 - 2 * self.nu() as i64
    }
}

/// Evaluation context bundling the data, constants and theta policy.
pub struct Fields<'a> {
    pub data: &'a PrymData,
    pub k: SchroedingerConstants,
    pub policy: ThetaPolicy,
    /// Relative near-divisor threshold for denominator thetas.
    pub near_divisor_rel: f64,
    /// Global parity relabel: when true, nu is replaced by 1 - nu and W
    /// by -W everywhere (the constants must be relabeled to match).
    pub relabel: bool,
}

impl<'a> Fields<'a> {
    pub fn new(data: &'a PrymData, k: SchroedingerConstants, policy: ThetaPolicy) -> Self {
        Fields {
            data,
            k,
            policy,
            near_divisor_rel: 1e-12,
            relabel: false,
        }
    }

    pub fn g(&self) -> usize {
        self.data.g()
    }

    fn w_vec(&self) -> DVector<C64> {
        if self.relabel {
            self.data.w.map(|x| -x)
        } else {
            self.data.w.clone()
        }
    }

    fn nu_of(&self, idx: LatticeIndex) -> u8 {
        if self.relabel {
            1 - idx.nu()
        } else {
            idx.nu()
        }
    }

    /// Argument z + ca A + cu U + cv V + cw W.
    pub fn arg(&self, z: &DVector<C64>, ca: i64, cu: i64, cv: i64, cw: i64) -> DVector<C64> {
        let w = self.w_vec();
        DVector::from_fn(self.g(), |i, _| {
            z[i] + self.data.a[i] * ca as f64
                + self.data.u[i] * cu as f64
                + self.data.v[i] * cv as f64
                + w[i] * cw as f64
        })
    }

    pub fn theta(&self, arg: &DVector<C64>) -> Result<C64, IdentityError> {
        Ok(theta::theta(&self.data.pi, arg, &self.policy)?)
    }

    /// The potential u_{n,m}(Z).
    pub fn u(&self, idx: LatticeIndex, z: &DVector<C64>) -> Result<C64, IdentityError> {
        let nu = self.nu_of(idx) as i64;
        let eta = 1 - 2 * nu;
        let (n, m) = (idx.n, idx.m);
        let t1 = self.theta(&self.arg(z, 0, n + 1, m, nu))?;
        let t2 = self.theta(&self.arg(z, 0, n, m + 1, nu))?;
        let d1 = self.theta(&self.arg(z, 0, n + 1, m + 1, 1 - nu))?;
        let d2 = self.theta(&self.arg(z, 0, n, m, 1 - nu))?;
        let scale = [t1, t2, d1, d2]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let floor = self.near_divisor_rel * scale;
        if d1.norm() <= floor || d2.norm() <= floor {
            return Err(IdentityError::NearDivisor(d1.norm().min(d2.norm())));
        }
        let c_nm = self.k.c3
            * cpow(self.k.c2, (2 * n + 1) * eta)
            * cpow(self.k.c1, (2 * m + 1) * eta);
        Ok(c_nm * t1 * t2 / (d1 * d2))
    }

    /// The wave field psi_{n,m}(Z).
    pub fn psi(&self, idx: LatticeIndex, z: &DVector<C64>) -> Result<C64, IdentityError> {
        let nu = self.nu_of(idx) as i64;
        let eta = 1 - 2 * nu;
        let (n, m) = (idx.n, idx.m);
        let num = self.theta(&self.arg(z, 1, n, m, nu))?;
        let den = self.theta(&self.arg(z, 0, n, m, 1 - nu))?;
        let scale = num.norm().max(den.norm());
        if den.norm() <= self.near_divisor_rel * scale {
            return Err(IdentityError::NearDivisor(den.norm()));
        }
        let factor = cpow(self.k.w1, n)
            * cpow(self.k.w2, m)
            * cpow(self.k.w3, nu)
            * cpow(self.k.c1, m * eta)
            * cpow(self.k.c2, n * eta);
        Ok(num / den * factor)
    }

    /// Residual of the difference Schrodinger equation at one site:
    /// |psi_{n+1,m+1} - u_{n,m}(psi_{n+1,m} - psi_{n,m+1}) - psi_{n,m}|
    /// relative to the largest participating term.
    pub fn schroedinger_residual(
        &self,
        idx: LatticeIndex,
        z: &DVector<C64>,
    ) -> Result<f64, IdentityError> {
        let (n, m) = (idx.n, idx.m);
        let p11 = self.psi(LatticeIndex::new(n + 1, m + 1), z)?;
        let p10 = self.psi(LatticeIndex::new(n + 1, m), z)?;
        let p01 = self.psi(LatticeIndex::new(n, m + 1), z)?;
        let p00 = self.psi(idx, z)?;
        let u = self.u(idx, z)?;
        let mid = u * (p10 - p01);
        let resid = (p11 - mid - p00).norm();
        let scale = p11.norm().max(mid.norm()).max(p00.norm()).max(1e-300);
        Ok(resid / scale)
    }
}

/// Deterministic sampler for generic points of the torus.
pub struct Sampler {
    pub rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Sampler { rng }
    }

    /// Z = r1 + Pi r2 with r1, r2 uniform in [0,1)^g.
    pub fn z(&mut self, pi: &PeriodMatrix) -> DVector<C64> {
        let g = pi.g();
        let r1: Vec<f64> = (0..g).map(|_| self.rng.random::<f64>()).collect();
        let r2: Vec<f64> = (0..g).map(|_| self.rng.random::<f64>()).collect();
        DVector::from_fn(g, |i, _| {
            let mut v = C64::new(r1[i], 0.0);
            for j in 0..g {
                v += pi.matrix()[(i, j)] * r2[j];
            }
            v
        })
    }

    /// A random complex direction with entries on the unit circle scaled
    /// by 0.5..1.5.
    pub fn direction(&mut self, g: usize) -> DVector<C64> {
        DVector::from_fn(g, |_, _| {
            let ang = std::f64::consts::TAU * self.rng.random::<f64>();
            let r = 0.5 + self.rng.random::<f64>();
            C64::new(r * ang.cos(), r * ang.sin())
        })
    }

    /// Sample Z avoiding the near-divisor configurations of `probe`.
    pub fn z_avoiding<F>(
        &mut self,
        pi: &PeriodMatrix,
        mut probe: F,
    ) -> Result<DVector<C64>, IdentityError>
    where
        F: FnMut(&DVector<C64>) -> Result<(), IdentityError>,
    {
        for _ in 0..200 {
            let z = self.z(pi);
            match probe(&z) {
                Ok(()) => return Ok(z),
                Err(IdentityError::NearDivisor(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(IdentityError::SamplingExhausted(200))
    }
}

/// Theta-divisor points along random complex lines, pairwise separated by
/// at least `min_separation`.  For g >= 2 the separation is measured on
/// the torus; for g = 1 the divisor is a single torus point, so distinct
/// universal-cover representatives are collected instead (each evaluates
/// a genuinely different theta sum).
pub fn sample_divisor_points(
    pi: &PeriodMatrix,
    policy: &ThetaPolicy,
    sampler: &mut Sampler,
    count: usize,
    min_separation: f64,
) -> Result<Vec<DVector<C64>>, IdentityError> {
    let mut points: Vec<DVector<C64>> = Vec::with_capacity(count);
    let search = theta::ZeroSearch::default();
    let mut attempts = 0usize;
    while points.len() < count {
        attempts += 1;
        if attempts > 40 * count {
            return Err(IdentityError::SamplingExhausted(attempts));
        }
        let z0 = sampler.z(pi);
        let dir = sampler.direction(pi.g());
        let found = match theta::find_theta_zero(pi, &z0, &dir, policy, &search) {
            Ok(dp) => dp,
            Err(ThetaError::NoConvergence) => continue,
            Err(e) => return Err(IdentityError::Theta(e)),
        };
        if pi.g() == 1 {
            // single divisor point: emit distinct universal-cover
            // representatives z* + p + q Pi, keeping |q| small so the
            // quasi-periodic growth stays mild
            let ps = [0i64, 1, -1, 2, -2];
            let qs = [0i64, 1, -1];
            for k in 0..count.min(ps.len() * qs.len()) {
                let (p, q) = (ps[k % ps.len()], qs[(k / ps.len()) % qs.len()]);
                let rep = DVector::from_fn(1, |i, _| {
                    found.z[i] + C64::new(p as f64, 0.0) + pi.matrix()[(i, 0)] * q as f64
                });
                points.push(rep);
            }
            break;
        }
        let mut ok = true;
        for p in &points {
            let diff = DVector::from_fn(pi.g(), |i, _| found.z[i] - p[i]);
            if theta::lattice_distance(pi, &diff) < min_separation {
                ok = false;
                break;
            }
        }
        if ok {
            points.push(found.z);
        }
    }
    Ok(points)
}
