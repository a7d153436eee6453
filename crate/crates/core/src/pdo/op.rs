//! Pseudodifference operators with grid coefficients.
//!
//! An operator is a finite sum of terms a_{ij} T1^i T2^j with the
//! coefficient grids sharing one window, plus bookkeeping for truncated
//! Laurent tails: `lo` marks that exponents below it were dropped
//! (descending flavor), `hi` that exponents above it were (ascending
//! flavor).  Products propagate both the window shrinkage and the range
//! of exponents that remain reliable.

use super::{ComplexGrid, PdoError, Window};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpFlavor {
    OneVar,
    TwoVar,
}

#[derive(Debug, Clone)]
pub struct PseudoDiffOp {
    pub terms: BTreeMap<(i64, i64), ComplexGrid>,
    pub window: Window,
    /// T1-exponents strictly below this were truncated away.
    pub lo: Option<i64>,
    /// T1-exponents strictly above this were truncated away.
    pub hi: Option<i64>,
}

impl PseudoDiffOp {
    pub fn zero(window: Window) -> Self {
        PseudoDiffOp {
            terms: BTreeMap::new(),
            window,
            lo: None,
            hi: None,
        }
    }

    pub fn identity(window: Window) -> Self {
        Self::from_term(ComplexGrid::constant(window, C64::new(1.0, 0.0)), 0, 0)
    }

    /// c T1^i T2^j for a coefficient grid c.
    pub fn from_term(coef: ComplexGrid, i: i64, j: i64) -> Self {
        let window = coef.window;
        let mut terms = BTreeMap::new();
        terms.insert((i, j), coef);
        PseudoDiffOp {
            terms,
            window,
            lo: None,
            hi: None,
        }
    }

    /// The shift monomial T1^i T2^j.
    pub fn shift(window: Window, i: i64, j: i64) -> Self {
        Self::from_term(ComplexGrid::constant(window, C64::new(1.0, 0.0)), i, j)
    }

    pub fn flavor(&self) -> OpFlavor {
        if self.terms.keys().all(|&(_, j)| j == 0) {
            OpFlavor::OneVar
        } else {
            OpFlavor::TwoVar
        }
    }

    pub fn coefficient(&self, i: i64, j: i64) -> ComplexGrid {
        self.terms
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| ComplexGrid::zeros(self.window))
    }

    fn t1_support(&self) -> Option<(i64, i64)> {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for &(i, _) in self.terms.keys() {
            lo = lo.min(i);
            hi = hi.max(i);
        }
        if lo > hi {
            None
        } else {
            Some((lo, hi))
        }
    }

    fn add_term(
        acc: &mut BTreeMap<(i64, i64), Vec<ComplexGrid>>,
        key: (i64, i64),
        grid: ComplexGrid,
    ) {
        acc.entry(key).or_default().push(grid);
    }

    fn assemble(
        acc: BTreeMap<(i64, i64), Vec<ComplexGrid>>,
        window: Window,
        lo: Option<i64>,
        hi: Option<i64>,
    ) -> Result<PseudoDiffOp, PdoError> {
        if window.is_empty() {
            return Err(PdoError::WindowExhausted);
        }
        let mut terms = BTreeMap::new();
        for (key, grids) in acc {
            if let Some(l) = lo {
                if key.0 < l {
                    continue;
                }
            }
            if let Some(h) = hi {
                if key.0 > h {
                    continue;
                }
            }
            let mut sum = ComplexGrid::zeros(window);
            for g in grids {
                sum = sum.zip(&g, |a, b| a + b)?;
            }
            if sum.max_norm() > 0.0 {
                terms.insert(key, sum.restrict(&window)?);
            }
        }
        Ok(PseudoDiffOp {
            terms,
            window,
            lo,
            hi,
        })
    }

    pub fn scale(&self, s: C64) -> PseudoDiffOp {
        let mut out = self.clone();
        for g in out.terms.values_mut() {
            *g = g.map(|v| v * s);
        }
        out
    }

    pub fn add(&self, other: &PseudoDiffOp) -> Result<PseudoDiffOp, PdoError> {
        let window = self.window.intersect(&other.window);
        let lo = comb_max(self.lo, other.lo);
        let hi = comb_min(self.hi, other.hi);
        let mut acc = BTreeMap::new();
        for (k, g) in self.terms.iter().chain(other.terms.iter()) {
            Self::add_term(&mut acc, *k, g.clone());
        }
        Self::assemble(acc, window, lo, hi)
    }

    pub fn sub(&self, other: &PseudoDiffOp) -> Result<PseudoDiffOp, PdoError> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Operator product: (a T1^i T2^j)(b T1^k T2^l) =
    /// a (t1^i t2^j b) T1^{i+k} T2^{j+l}.
    pub fn mul(&self, other: &PseudoDiffOp) -> Result<PseudoDiffOp, PdoError> {
        if (self.lo.is_some() && other.hi.is_some())
            || (self.hi.is_some() && other.lo.is_some())
        {
            return Err(PdoError::UnsupportedShape(
                "product of opposite-tail truncations".into(),
            ));
        }
        let (a_sup, b_sup) = match (self.t1_support(), other.t1_support()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Ok(PseudoDiffOp::zero(self.window.intersect(&other.window)));
            }
        };
        // reliability of the result
        let lo = comb_max(
            self.lo.map(|l| l + other.hi.unwrap_or(b_sup.1)),
            other.lo.map(|l| l + self.hi.unwrap_or(a_sup.1)),
        );
        let hi = comb_min(
            self.hi.map(|h| h + other.lo.unwrap_or(b_sup.0)),
            other.hi.map(|h| h + self.lo.unwrap_or(a_sup.0)),
        );
        // the result window must allow every shifted read of other's grids
        let mut window = self.window;
        for &(i, j) in self.terms.keys() {
            window = window.intersect(&other.window.shifted_back(i, j));
        }
        let mut acc = BTreeMap::new();
        for (&(i, j), a) in &self.terms {
            for (&(k, l), b) in &other.terms {
                let shifted = b.shifted(i, j)?;
                let prod = a.zip(&shifted, |x, y| x * y)?;
                Self::add_term(&mut acc, (i + k, j + l), prod);
            }
        }
        Self::assemble(acc, window, lo, hi)
    }

    /// Formal adjoint: (a T1^i T2^j)* = T1^{-i} T2^{-j} a
    /// = (t1^{-i} t2^{-j} a) T1^{-i} T2^{-j}.  Involution and
    /// anti-homomorphism.
    pub fn adjoint(&self) -> Result<PseudoDiffOp, PdoError> {
        let mut window = self.window;
        for &(i, j) in self.terms.keys() {
            window = window.intersect(&self.window.shifted_back(-i, -j));
        }
        let lo = self.hi.map(|h| -h);
        let hi = self.lo.map(|l| -l);
        let mut acc = BTreeMap::new();
        for (&(i, j), a) in &self.terms {
            let shifted = a.shifted(-i, -j)?;
            Self::add_term(&mut acc, (-i, -j), shifted);
        }
        Self::assemble(acc, window, lo, hi)
    }

    /// res_T: the T1^0 coefficient of a one-variable operator.
    pub fn residue(&self) -> Result<ComplexGrid, PdoError> {
        if self.flavor() != OpFlavor::OneVar {
            return Err(PdoError::UnsupportedShape(
                "residue requires a one-variable operator".into(),
            ));
        }
        if let Some(l) = self.lo {
            if l > 0 {
                return Err(PdoError::TruncationTooShallow { needed: 0 });
            }
        }
        if let Some(h) = self.hi {
            if h < 0 {
                return Err(PdoError::TruncationTooShallow { needed: 0 });
            }
        }
        Ok(self.coefficient(0, 0))
    }

    /// Apply the operator to a test grid: (D f)(n, m) = sum a_{ij}(n, m)
    /// f(n + i, m + j) on the largest window where all reads are valid.
    pub fn apply(&self, f: &ComplexGrid) -> Result<ComplexGrid, PdoError> {
        let mut window = self.window;
        for &(i, j) in self.terms.keys() {
            window = window.intersect(&f.window.shifted_back(i, j));
        }
        if window.is_empty() {
            return Err(PdoError::WindowExhausted);
        }
        Ok(ComplexGrid::from_fn(window, |n, m| {
            self.terms
                .iter()
                .map(|(&(i, j), a)| a.get(n, m) * f.get(n + i, m + j))
                .fold(C64::new(0.0, 0.0), |acc, v| acc + v)
        }))
    }

    /// Truncate to exponents >= floor, recording the reliability bound.
    pub fn truncate_below(&self, floor: i64) -> PseudoDiffOp {
        let mut out = self.clone();
        out.terms.retain(|&(i, _), _| i >= floor);
        out.lo = comb_max(out.lo, Some(floor));
        out
    }

    /// Positive part: terms with T1-exponent > 0.
    pub fn positive_part(&self) -> PseudoDiffOp {
        let mut out = self.clone();
        out.terms.retain(|&(i, _), _| i > 0);
        out
    }

    /// Negative part: terms with T1-exponent < 0.
    pub fn negative_part(&self) -> PseudoDiffOp {
        let mut out = self.clone();
        out.terms.retain(|&(i, _), _| i < 0);
        out
    }

    /// Max coefficient sup-norm over all terms (optionally restricted to
    /// a predicate on the exponents).
    pub fn max_coef_norm(&self, pred: impl Fn(i64, i64) -> bool) -> f64 {
        self.terms
            .iter()
            .filter(|(&(i, j), _)| pred(i, j))
            .map(|(_, g)| g.max_norm())
            .fold(0.0, f64::max)
    }
}

fn comb_max(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, x) => x,
        (x, None) => x,
        (Some(x), Some(y)) => Some(x.max(y)),
    }
}

fn comb_min(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, x) => x,
        (x, None) => x,
        (Some(x), Some(y)) => Some(x.min(y)),
    }
}

/// The discrete Schrodinger operator H = T1 T2 - u (T1 - T2) - 1.
pub fn schroedinger_h(u: &ComplexGrid) -> PseudoDiffOp {
    let w = u.window;
    let mut terms = BTreeMap::new();
    terms.insert((1, 1), ComplexGrid::constant(w, C64::new(1.0, 0.0)));
    terms.insert((1, 0), u.map(|v| -v));
    terms.insert((0, 1), u.clone());
    terms.insert((0, 0), ComplexGrid::constant(w, C64::new(-1.0, 0.0)));
    PseudoDiffOp {
        terms,
        window: w,
        lo: None,
        hi: None,
    }
}

/// Which substitution family handles the bulk when reducing mod the
/// H-ideal: Plus pushes T2-bearing terms into descending T1 powers,
/// Minus into ascending ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceDirection {
    Plus,
    Minus,
}

/// Reduce D modulo the left ideal generated by H to the normal form
/// D1 + a T2 with D1 one-variable and `a` the T1^0 T2^1 coefficient.
/// T2-bearing terms at positive T1-exponents descend, at negative ones
/// ascend, until only the (0, 1) slot remains; `direction` picks the
/// rule for T2-degrees >= 2.  T2^{-1} powers are not supported.
pub fn reduce_mod_h(
    d: &PseudoDiffOp,
    u: &ComplexGrid,
    direction: ReduceDirection,
) -> Result<PseudoDiffOp, PdoError> {
    reduce_impl(d, u, direction, false, i64::MIN / 4)
}

/// Full elimination of T2 by descending substitutions (the closure of the
/// ideal in the descending ring): the result is one-variable, truncated
/// below `floor`.
pub fn eliminate_t2_descending(
    d: &PseudoDiffOp,
    u: &ComplexGrid,
    floor: i64,
) -> Result<PseudoDiffOp, PdoError> {
    reduce_impl(d, u, ReduceDirection::Plus, true, floor)
}

fn reduce_impl(
    d: &PseudoDiffOp,
    u: &ComplexGrid,
    direction: ReduceDirection,
    eliminate_zero_slot: bool,
    floor: i64,
) -> Result<PseudoDiffOp, PdoError> {
    for &(_, j) in d.terms.keys() {
        if j < 0 {
            return Err(PdoError::UnsupportedShape(
                "reduction of T2^{-1} terms is not supported".into(),
            ));
        }
    }
    let mut window = d.window;
    let mut work: BTreeMap<(i64, i64), ComplexGrid> = d.terms.clone();
    let mut lo = d.lo;
    let hi = d.hi;
    let mut dropped_any = false;

    let mut guard = 0usize;
    loop {
        guard += 1;
        if guard > 2_000_000 {
            return Err(PdoError::UnsupportedShape(
                "mod-H reduction did not terminate".into(),
            ));
        }
        // pick a reducible term: T2-degree >= 1, excluding the kept slot
        let key = work
            .keys()
            .cloned()
            .filter(|&(i, j)| j >= 1 && (eliminate_zero_slot || !(i == 0 && j == 1)))
            .next_back();
        let (a, b) = match key {
            Some(k) => k,
            None => break,
        };
        let coef = work.remove(&(a, b)).unwrap();
        if coef.max_norm() == 0.0 {
            continue;
        }
        if a < floor {
            // descending remnant fell below the truncation floor
            dropped_any = true;
            continue;
        }

        let descend = if b >= 2 {
            direction == ReduceDirection::Plus
        } else {
            a > 0 || (eliminate_zero_slot && a >= 0)
        };
        if descend {
            // subtract (c T1^{a-1} T2^{b-1}) H: removes c T1^a T2^b, adds
            //   +c u(n+a-1, m+b-1) at (a, b-1)
            //   +c                 at (a-1, b-1)
            //   -c u(n+a-1, m+b-1) at (a-1, b)
            let ush = u.shifted(a - 1, b - 1)?;
            window = window.intersect(&ush.window);
            let cu = coef.zip(&ush, |x, y| x * y)?;
            push(&mut work, (a, b - 1), &cu, C64::new(1.0, 0.0))?;
            push(&mut work, (a - 1, b - 1), &coef, C64::new(1.0, 0.0))?;
            push(&mut work, (a - 1, b), &cu, C64::new(-1.0, 0.0))?;
        } else {
            // subtract (w T1^a T2^{b-1}) H with w = c / u(n+a, m+b-1):
            //   +w u(n+a, m+b-1) = +c at (a+1, b-1)
            //   +w                    at (a, b-1)
            //   -w                    at (a+1, b)
            let ush = u.shifted(a, b - 1)?;
            window = window.intersect(&ush.window);
            let w_coef = coef.zip(&ush, |x, y| x / y)?;
            push(&mut work, (a + 1, b - 1), &coef, C64::new(1.0, 0.0))?;
            push(&mut work, (a, b - 1), &w_coef, C64::new(1.0, 0.0))?;
            push(&mut work, (a + 1, b), &w_coef, C64::new(-1.0, 0.0))?;
        }
        if window.is_empty() {
            return Err(PdoError::WindowExhausted);
        }
    }

    if dropped_any || eliminate_zero_slot {
        lo = comb_max(lo, Some(floor));
    }
    let mut acc = BTreeMap::new();
    for (k, g) in work {
        PseudoDiffOp::add_term(&mut acc, k, g);
    }
    PseudoDiffOp::assemble(acc, window, lo, hi)
}

fn push(
    work: &mut BTreeMap<(i64, i64), ComplexGrid>,
    key: (i64, i64),
    grid: &ComplexGrid,
    sign: C64,
) -> Result<(), PdoError> {
    let scaled = grid.map(|v| v * sign);
    match work.remove(&key) {
        None => {
            work.insert(key, scaled);
        }
        Some(old) => {
            work.insert(key, old.zip(&scaled, |a, b| a + b)?);
        }
    }
    Ok(())
}

/// Truncated expansion of (T1 - T1^{-1})^{-1}: descending flavor
/// T1^{-1} + T1^{-3} + ... down to `floor`, or ascending flavor
/// -(T1 + T1^3 + ...) up to `ceil`.
pub fn shift_diff_inverse(window: Window, descending: bool, bound: i64) -> PseudoDiffOp {
    let one = C64::new(1.0, 0.0);
    let mut terms = BTreeMap::new();
    if descending {
        let mut e = -1;
        while e >= bound {
            terms.insert((e, 0), ComplexGrid::constant(window, one));
            e -= 2;
        }
        PseudoDiffOp {
            terms,
            window,
            lo: Some(bound),
            hi: None,
        }
    } else {
        let mut e = 1;
        while e <= bound {
            terms.insert((e, 0), ComplexGrid::constant(window, -one));
            e += 2;
        }
        PseudoDiffOp {
            terms,
            window,
            lo: None,
            hi: Some(bound),
        }
    }
}

/// Left-hand side of the residue pairing: the k^0 coefficient of
/// (k^{-n} D1)(D2 k^n) with the right action of D1 defined as the formal
/// adjoint action.  Equals res_T(D2 D1) as a grid identity.
pub fn res_pairing_lhs(d1: &PseudoDiffOp, d2: &PseudoDiffOp) -> Result<ComplexGrid, PdoError> {
    if d1.flavor() != OpFlavor::OneVar || d2.flavor() != OpFlavor::OneVar {
        return Err(PdoError::UnsupportedShape(
            "residue pairing requires one-variable operators".into(),
        ));
    }
    // (k^{-n} D1)(n) = k^{-n} sum_i k^i d1_i(n - i); (D2 k^n)(n) = sum_j d2_j(n) k^{n+j};
    // coefficient of k^0 in the product: sum_j d2_j(n) d1_{-j}(n + j)
    let mut window = d2.window;
    for (&(j, _), _) in &d2.terms {
        if d1.terms.contains_key(&(-j, 0)) {
            window = window.intersect(&d1.coefficient(-j, 0).window.shifted_back(j, 0));
        }
    }
    if window.is_empty() {
        return Err(PdoError::WindowExhausted);
    }
    Ok(ComplexGrid::from_fn(window, |n, m| {
        d2.terms
            .iter()
            .map(|(&(j, _), d2j)| match d1.terms.get(&(-j, 0)) {
                Some(d1mj) => d2j.get(n, m) * d1mj.get(n + j, m),
                None => C64::new(0.0, 0.0),
            })
            .fold(C64::new(0.0, 0.0), |acc, v| acc + v)
    }))
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

    fn big_window() -> Window {
        Window::new(-8, 8, -8, 8)
    }

    fn random_grid(rng: &mut ChaCha8Rng, w: Window) -> ComplexGrid {
        ComplexGrid::from_fn(w, |_, _| {
            c(
                rng.random::<f64>() - 0.5 + 0.7,
                rng.random::<f64>() - 0.5,
            )
        })
    }

    fn random_op(rng: &mut ChaCha8Rng, w: Window, exps: &[(i64, i64)]) -> PseudoDiffOp {
        let mut op = PseudoDiffOp::zero(w);
        for &(i, j) in exps {
            op = op
                .add(&PseudoDiffOp::from_term(random_grid(rng, w), i, j))
                .unwrap();
        }
        op
    }

    #[test]
    fn shift_inverse_cancels() {
        let w = big_window();
        let t1 = PseudoDiffOp::shift(w, 1, 0);
        let t1i = PseudoDiffOp::shift(w, -1, 0);
        let prod = t1.mul(&t1i).unwrap();
        assert_eq!(prod.terms.len(), 1);
        let id = prod.coefficient(0, 0);
        assert!((id.get(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn product_shifts_coefficients() {
        // (f T1)(g T1) = f (t1 g) T1^2
        let w = big_window();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_grid(&mut rng, w);
        let g = random_grid(&mut rng, w);
        let prod = PseudoDiffOp::from_term(f.clone(), 1, 0)
            .mul(&PseudoDiffOp::from_term(g.clone(), 1, 0))
            .unwrap();
        let coef = prod.coefficient(2, 0);
        let expect = f.zip(&g.shifted(1, 0).unwrap(), |a, b| a * b).unwrap();
        for (n, m) in coef.window.iter() {
            assert!((coef.get(n, m) - expect.get(n, m)).norm() < 1e-15);
        }
    }

    #[test]
    fn associativity_against_brute_force_application() {
        let w = big_window();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d1 = random_op(&mut rng, w, &[(1, 0), (0, 1), (-1, 0)]);
        let d2 = random_op(&mut rng, w, &[(1, 1), (0, 0)]);
        let d3 = random_op(&mut rng, w, &[(-1, -1), (2, 0)]);
        let left = d1.mul(&d2).unwrap().mul(&d3).unwrap();
        let right = d1.mul(&d2.mul(&d3).unwrap()).unwrap();
        // coefficientwise agreement
        for (k, g) in &left.terms {
            let h = right.coefficient(k.0, k.1).restrict(&g.window).unwrap();
            let gr = g.restrict(&h.window).unwrap();
            let diff = gr.zip(&h, |a, b| a - b).unwrap();
            assert!(diff.max_norm() < 1e-12, "term {k:?}");
        }
        // also against random test sequences
        for _ in 0..50 {
            let f = random_grid(&mut rng, Window::new(-14, 14, -14, 14));
            let lhs = left.apply(&f).unwrap();
            let rhs = d1.apply(&d2.apply(&d3.apply(&f).unwrap()).unwrap()).unwrap();
            let w = lhs.window.intersect(&rhs.window);
            for (n, m) in w.iter() {
                assert!((lhs.get(n, m) - rhs.get(n, m)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn adjoint_is_an_involutive_antihomomorphism() {
        let w = big_window();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d1 = random_op(&mut rng, w, &[(1, 0), (0, 0), (-2, 1)]);
        let d2 = random_op(&mut rng, w, &[(0, 1), (1, -1)]);
        // (T1)* = T1^{-1}
        let t1 = PseudoDiffOp::shift(w, 1, 0);
        let t1s = t1.adjoint().unwrap();
        assert!(t1s.terms.contains_key(&(-1, 0)));
        // involution
        let dd = d1.adjoint().unwrap().adjoint().unwrap();
        for (k, g) in &dd.terms {
            let orig = d1.coefficient(k.0, k.1).restrict(&g.window).unwrap();
            let diff = g.zip(&orig, |a, b| a - b).unwrap();
            assert!(diff.max_norm() < 1e-15);
        }
        // anti-homomorphism
        let lhs = d1.mul(&d2).unwrap().adjoint().unwrap();
        let rhs = d2.adjoint().unwrap().mul(&d1.adjoint().unwrap()).unwrap();
        for (k, g) in &lhs.terms {
            let h = rhs.coefficient(k.0, k.1).restrict(&g.window).unwrap();
            let gr = g.restrict(&h.window).unwrap();
            let diff = gr.zip(&h, |a, b| a - b).unwrap();
            assert!(diff.max_norm() < 1e-12, "term {k:?}");
        }
    }

    #[test]
    fn residue_of_monomials() {
        let w = big_window();
        for a in -3..=3i64 {
            let op = PseudoDiffOp::shift(w, a, 0);
            let r = op.residue().unwrap();
            let expect = if a == 0 { 1.0 } else { 0.0 };
            assert!((r.get(0, 0) - c(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn residue_pairing_on_monomials_and_random_ops() {
        let w = big_window();
        // basis case: D1 = T^a, D2 = T^b: both sides are delta_{a+b,0}
        for a in -2..=2i64 {
            for b in -2..=2i64 {
                let d1 = PseudoDiffOp::shift(w, a, 0);
                let d2 = PseudoDiffOp::shift(w, b, 0);
                let lhs = res_pairing_lhs(&d1, &d2).unwrap();
                let rhs = d2.mul(&d1).unwrap().residue().unwrap();
                let expect = if a + b == 0 { 1.0 } else { 0.0 };
                assert!((lhs.get(0, 0) - c(expect, 0.0)).norm() < 1e-15);
                assert!((rhs.get(0, 0) - c(expect, 0.0)).norm() < 1e-15);
            }
        }
        // random truncated one-variable operators
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d1 = random_op(&mut rng, w, &[(1, 0), (0, 0), (-1, 0), (-2, 0)]);
        let d2 = random_op(&mut rng, w, &[(2, 0), (0, 0), (-1, 0)]);
        let lhs = res_pairing_lhs(&d1, &d2).unwrap();
        let rhs = d2.mul(&d1).unwrap().residue().unwrap();
        let diff = lhs
            .restrict(&rhs.window)
            .unwrap()
            .zip(&rhs.restrict(&lhs.window).unwrap(), |a, b| a - b)
            .unwrap();
        assert!(diff.max_norm() < 1e-12);
    }

    #[test]
    fn reduce_h_to_zero_and_defining_relation() {
        let w = big_window();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_grid(&mut rng, w);
        let h = schroedinger_h(&u);
        let red = reduce_mod_h(&h, &u, ReduceDirection::Plus).unwrap();
        assert!(red.max_coef_norm(|_, _| true) < 1e-14, "reduce(H) != 0");

        // reduce(T1 T2) equals reduce of u(T1 - T2) + 1
        let t1t2 = PseudoDiffOp::shift(w, 1, 1);
        let lhs = reduce_mod_h(&t1t2, &u, ReduceDirection::Plus).unwrap();
        let rhs_op = PseudoDiffOp::from_term(u.map(|v| -v), 0, 1)
            .add(&PseudoDiffOp::from_term(u.clone(), 1, 0))
            .unwrap()
            .add(&PseudoDiffOp::identity(w))
            .unwrap();
        let rhs = reduce_mod_h(&rhs_op, &u, ReduceDirection::Plus).unwrap();
        let diff = lhs.sub(&rhs).unwrap();
        assert!(diff.max_coef_norm(|_, _| true) < 1e-13);
    }

    #[test]
    fn reduction_kills_ideal_elements_and_is_a_projection() {
        let w = Window::new(-10, 10, -10, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_grid(&mut rng, w);
        let h = schroedinger_h(&u);
        for _ in 0..5 {
            let d = random_op(&mut rng, w, &[(1, 1), (0, 0), (-1, 0), (0, 1), (2, 0)]);
            let dh = d.mul(&h).unwrap();
            let red = reduce_mod_h(&dh, &u, ReduceDirection::Plus).unwrap();
            assert!(
                red.max_coef_norm(|_, _| true) < 1e-11,
                "ideal element does not reduce to zero: {:.3e}",
                red.max_coef_norm(|_, _| true)
            );

            // projection: reduce(reduce(E)) = reduce(E), and
            // reduce(E + DH) = reduce(E)
            let e = random_op(&mut rng, w, &[(1, 1), (0, 1), (1, 0), (0, 0)]);
            let r1 = reduce_mod_h(&e, &u, ReduceDirection::Plus).unwrap();
            let r2 = reduce_mod_h(&r1, &u, ReduceDirection::Plus).unwrap();
            let d12 = r1.sub(&r2).unwrap();
            assert!(d12.max_coef_norm(|_, _| true) < 1e-12);
            let r3 = reduce_mod_h(&e.add(&dh).unwrap(), &u, ReduceDirection::Plus).unwrap();
            let d13 = r1.sub(&r3).unwrap();
            assert!(d13.max_coef_norm(|_, _| true) < 1e-10);
        }
    }

    #[test]
    fn normal_form_keeps_only_one_variable_terms_plus_t2_slot() {
        let w = Window::new(-10, 10, -10, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_grid(&mut rng, w);
        let d = random_op(&mut rng, w, &[(2, 1), (-1, 1), (0, 2), (1, 0)]);
        let red = reduce_mod_h(&d, &u, ReduceDirection::Plus).unwrap();
        for &(i, j) in red.terms.keys() {
            assert!(j == 0 || (i == 0 && j == 1), "unexpected term ({i},{j})");
        }
        // minus direction reaches the same normal form where both are reliable
        let red_m = reduce_mod_h(&d, &u, ReduceDirection::Minus).unwrap();
        for (k, g) in &red.terms {
            if let Some(h) = red_m.terms.get(k) {
                let w = g.window.intersect(&h.window);
                if !w.is_empty() {
                    let diff = g
                        .restrict(&w)
                        .unwrap()
                        .zip(&h.restrict(&w).unwrap(), |a, b| a - b)
                        .unwrap();
                    assert!(diff.max_norm() < 1e-10, "directions disagree at {k:?}");
                }
            }
        }
    }

    #[test]
    fn descending_elimination_removes_t2_entirely() {
        let w = Window::new(-12, 12, -12, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_grid(&mut rng, w);
        let d = random_op(&mut rng, w, &[(1, 1), (0, 1)]);
        let red = eliminate_t2_descending(&d, &u, -6).unwrap();
        assert_eq!(red.flavor(), OpFlavor::OneVar);
        assert_eq!(red.lo, Some(-6));
    }
}
