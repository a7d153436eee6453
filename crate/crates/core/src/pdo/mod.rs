//! Windowed formal calculus of pseudodifference operators.
//!
//! Coefficients are numeric grids on finite lattice windows rather than
//! symbols; every operation records the (shrunken) window on which its
//! output is valid, so operator identities become max-norm checks on
//! interior windows with explicit provenance.

pub mod nv;
pub mod op;
pub mod wave;

use crate::report::HexC64;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PdoError {
    #[error("window exhausted: no sites remain after shrinking")]
    WindowExhausted,
    #[error("truncation too shallow: needed exponent {needed} outside reliable range")]
    TruncationTooShallow { needed: i64 },
    #[error("propagation routes disagree: compatibility residual {0:.3e}")]
    CompatibilityFailure(f64),
    #[error("leading wave coefficient vanishes on the window (min |xi0| = {0:.3e})")]
    NonInvertibleLeading(f64),
    #[error("operator shape not supported: {0}")]
    UnsupportedShape(String),
    #[error("least-squares fit is rank deficient")]
    RankDeficientFit,
}

/// Inclusive rectangle of lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub n0: i64,
    pub n1: i64,
    pub m0: i64,
    pub m1: i64,
}

impl Window {
    pub fn new(n0: i64, n1: i64, m0: i64, m1: i64) -> Self {
        Window { n0, n1, m0, m1 }
    }

    pub fn is_empty(&self) -> bool {
        self.n0 > self.n1 || self.m0 > self.m1
    }

    pub fn contains(&self, n: i64, m: i64) -> bool {
        n >= self.n0 && n <= self.n1 && m >= self.m0 && m <= self.m1
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            ((self.n1 - self.n0 + 1) * (self.m1 - self.m0 + 1)) as usize
        }
    }

    pub fn intersect(&self, other: &Window) -> Window {
        Window {
            n0: self.n0.max(other.n0),
            n1: self.n1.min(other.n1),
            m0: self.m0.max(other.m0),
            m1: self.m1.min(other.m1),
        }
    }

    /// Window of sites (n, m) such that (n + dn, m + dm) lies in self.
    pub fn shifted_back(&self, dn: i64, dm: i64) -> Window {
        Window {
            n0: self.n0 - dn,
            n1: self.n1 - dn,
            m0: self.m0 - dm,
            m1: self.m1 - dm,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let w = *self;
        (w.n0..=w.n1).flat_map(move |n| (w.m0..=w.m1).map(move |m| (n, m)))
    }
}

/// Complex values over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub window: Window,
    values: Vec<C64>,
}

impl ComplexGrid {
    pub fn from_fn(window: Window, mut f: impl FnMut(i64, i64) -> C64) -> Self {
        assert!(!window.is_empty(), "grid window must be nonempty");
        let mut values = Vec::with_capacity(window.len());
        for n in window.n0..=window.n1 {
            for m in window.m0..=window.m1 {
                values.push(f(n, m));
            }
        }
        ComplexGrid { window, values }
    }

    pub fn constant(window: Window, v: C64) -> Self {
        Self::from_fn(window, |_, _| v)
    }

    pub fn zeros(window: Window) -> Self {
        Self::constant(window, C64::new(0.0, 0.0))
    }

    fn index(&self, n: i64, m: i64) -> usize {
        debug_assert!(self.window.contains(n, m), "read outside window");
        let cols = (self.window.m1 - self.window.m0 + 1) as usize;
        (n - self.window.n0) as usize * cols + (m - self.window.m0) as usize
    }

    /// Value at a site; panics outside the declared window.
    pub fn get(&self, n: i64, m: i64) -> C64 {
        assert!(
            self.window.contains(n, m),
            "grid read at ({n},{m}) outside window {:?}",
            self.window
        );
        self.values[self.index(n, m)]
    }

    pub fn set(&mut self, n: i64, m: i64, v: C64) {
        assert!(self.window.contains(n, m));
        let idx = self.index(n, m);
        self.values[idx] = v;
    }

    /// The shifted grid (t1^dn t2^dm f)(n, m) = f(n + dn, m + dm) on the
    /// accordingly shrunken window.
    pub fn shifted(&self, dn: i64, dm: i64) -> Result<ComplexGrid, PdoError> {
        let w = self.window.shifted_back(dn, dm);
        if w.is_empty() {
            return Err(PdoError::WindowExhausted);
        }
        Ok(ComplexGrid::from_fn(w, |n, m| self.get(n + dn, m + dm)))
    }

    pub fn restrict(&self, w: &Window) -> Result<ComplexGrid, PdoError> {
        let inter = self.window.intersect(w);
        if inter.is_empty() {
            return Err(PdoError::WindowExhausted);
        }
        Ok(ComplexGrid::from_fn(inter, |n, m| self.get(n, m)))
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> ComplexGrid {
        ComplexGrid {
            window: self.window,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination on the window intersection.
    pub fn zip(&self, other: &ComplexGrid, f: impl Fn(C64, C64) -> C64) -> Result<ComplexGrid, PdoError> {
        let w = self.window.intersect(&other.window);
        if w.is_empty() {
            return Err(PdoError::WindowExhausted);
        }
        Ok(ComplexGrid::from_fn(w, |n, m| {
            f(self.get(n, m), other.get(n, m))
        }))
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::MAX, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Serialization mirror with bit-exact values.
#[derive(Serialize, Deserialize)]
pub struct ComplexGridJson {
    pub window: Window,
    pub values: Vec<HexC64>,
}

impl From<&ComplexGrid> for ComplexGridJson {
    fn from(g: &ComplexGrid) -> Self {
        ComplexGridJson {
            window: g.window,
            values: g.values.iter().map(|&v| v.into()).collect(),
        }
    }
}

impl From<ComplexGridJson> for ComplexGrid {
    fn from(j: ComplexGridJson) -> Self {
        ComplexGrid {
            window: j.window,
            values: j.values.into_iter().map(Into::into).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn window_shift_and_intersection() {
        let w = Window::new(-2, 3, 0, 4);
        assert_eq!(w.len(), 30);
        let back = w.shifted_back(2, -1);
        assert_eq!(back, Window::new(-4, 1, 1, 5));
        let inter = w.intersect(&back);
        assert_eq!(inter, Window::new(-2, 1, 1, 4));
    }

    #[test]
    fn grid_shift_reads_shifted_sites() {
        let w = Window::new(0, 3, 0, 3);
        let g = ComplexGrid::from_fn(w, |n, m| c(n as f64, m as f64));
        let s = g.shifted(1, 2).unwrap();
        assert_eq!(s.window, Window::new(0, 2, -2, 1));
        assert_eq!(s.get(1, 0), c(2.0, 2.0));
    }

    #[test]
    #[should_panic(expected = "outside window")]
    fn out_of_window_reads_panic() {
        let g = ComplexGrid::zeros(Window::new(0, 1, 0, 1));
        let _ = g.get(5, 5);
    }

    #[test]
    fn grid_json_round_trip_is_bit_exact() {
        let g = ComplexGrid::from_fn(Window::new(0, 2, 0, 2), |n, m| {
            c(std::f64::consts::PI * n as f64, (m as f64).sqrt())
        });
        let js = serde_json::to_string(&ComplexGridJson::from(&g)).unwrap();
        let back: ComplexGrid = serde_json::from_str::<ComplexGridJson>(&js).unwrap().into();
        assert_eq!(g, back);
    }
}
