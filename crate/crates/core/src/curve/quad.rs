//! Contour quadrature on hyperelliptic curves v^2 = h(t).
//!
//! All integrals reduce to path integrals of t^k dt / v with v tracked
//! continuously along the path.  Segments between branch points absorb the
//! endpoint square-root singularities with Gauss-Chebyshev nodes; legs
//! leaving a single branch point use the u^2 substitution and
//! Gauss-Legendre; regular legs use plain Gauss-Legendre.  Every rule is
//! doubled until two successive estimates agree.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature did not converge below {target} (last change {last})")]
    NoConvergence { target: f64, last: f64 },
    #[error("integration path passes through a branch point")]
    PathThroughBranchPoint,
    #[error("square-root continuation failed (step collapsed near a root)")]
    TrackingFailed,
}

/// Monic-times-constant polynomial in factored form.
#[derive(Debug, Clone)]
pub struct FactoredPoly {
    pub lc: C64,
    pub roots: Vec<C64>,
}

impl FactoredPoly {
    pub fn eval(&self, t: C64) -> C64 {
        self.roots.iter().fold(self.lc, |acc, r| acc * (t - r))
    }

    /// Product skipping one copy each of the roots listed in `skip`.
    pub fn eval_skipping(&self, t: C64, skip: &[usize]) -> C64 {
        let mut acc = self.lc;
        for (i, r) in self.roots.iter().enumerate() {
            if skip.contains(&i) {
                continue;
            }
            acc *= t - r;
        }
        acc
    }

    pub fn min_root_distance(&self, t: C64) -> f64 {
        self.roots
            .iter()
            .map(|r| (t - r).norm())
            .fold(f64::MAX, f64::min)
    }
}

/// Continue a square root of `f` along the real parameter interval
/// [s0, s1]: given w0 with w0^2 = f(s0), return w1 with w1^2 = f(s1),
/// choosing branches continuously.  Steps adapt so the value never turns
/// by more than ~60 degrees per step.
pub fn continue_sqrt(
    f: &dyn Fn(f64) -> C64,
    s0: f64,
    s1: f64,
    w0: C64,
) -> Result<C64, QuadError> {
    let mut s = s0;
    let mut w = w0;
    let mut step = (s1 - s0) / 8.0;
    if step == 0.0 {
        return Ok(w0);
    }
    let dir = if s1 > s0 { 1.0 } else { -1.0 };
    step = step.abs() * dir;
    let mut guard = 0usize;
    while (s1 - s) * dir > 1e-15 * (s1 - s0).abs().max(1.0) {
        guard += 1;
        if guard > 2_000_000 {
            return Err(QuadError::TrackingFailed);
        }
        let mut h = step;
        if (s + h - s1) * dir > 0.0 {
            h = s1 - s;
        }
        let mut depth = 0;
        loop {
            let target = f(s + h);
            let cand = target.sqrt();
            let chosen = if (cand - w).norm() <= (cand + w).norm() {
                cand
            } else {
                -cand
            };
            let scale = chosen.norm().max(w.norm());
            if scale == 0.0 {
                return Err(QuadError::TrackingFailed);
            }
            if (chosen - w).norm() <= 0.6 * scale {
                s += h;
                w = chosen;
                if depth == 0 {
                    step *= 1.9;
                }
                break;
            }
            h *= 0.5;
            depth += 1;
            if depth > 60 {
                return Err(QuadError::TrackingFailed);
            }
        }
    }
    Ok(w)
}

/// Track v = sqrt(h) along a polyline through the given points,
/// starting from a known value at points[0].  Returns v at every point.
pub fn track_along_polyline(
    poly: &FactoredPoly,
    points: &[C64],
    v_start: C64,
) -> Result<Vec<C64>, QuadError> {
    let mut vals = Vec::with_capacity(points.len());
    vals.push(v_start);
    for k in 1..points.len() {
        let a = points[k - 1];
        let b = points[k];
        if poly.min_root_distance(b) < 1e-9 || poly.min_root_distance(a) < 1e-9 {
            return Err(QuadError::PathThroughBranchPoint);
        }
        let f = move |s: f64| poly.eval(a + (b - a) * s);
        let w = continue_sqrt(&f, 0.0, 1.0, vals[k - 1])?;
        vals.push(w);
    }
    Ok(vals)
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..(n + 1) / 2 {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n and derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}

/// Integrals of t^pow / v over a segment joining two branch points p, q of
/// h (endpoint square-root singularities) by Gauss-Chebyshev.  `v_mid` is
/// the tracked sheet value at the segment midpoint.  Returns one integral
/// per requested power.
fn cheb_between_branch_points(
    poly: &FactoredPoly,
    pi_idx: usize,
    qi_idx: usize,
    v_mid: C64,
    pows: &[usize],
    order: usize,
) -> Result<Vec<C64>, QuadError> {
    let p = poly.roots[pi_idx];
    let q = poly.roots[qi_idx];
    let c = (p + q) * 0.5;
    let d = (q - p) * 0.5;
    // g(s)^2 = -lc * prod_{other roots} (t(s) - r), nonvanishing on [-1,1]
    let skip = [pi_idx, qi_idx];
    let g2 = move |s: f64| -poly.eval_skipping(c + d * s, &skip);
    let g0 = v_mid / d;

    // Chebyshev nodes, sorted ascending; track g outward from s = 0.
    let mut nodes: Vec<f64> = (1..=order)
        .map(|k| ((2.0 * k as f64 - 1.0) * PI / (2.0 * order as f64)).cos())
        .collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut gvals = vec![C64::new(0.0, 0.0); order];
    // ascending side
    let mut prev_s = 0.0;
    let mut prev_g = g0;
    for (i, &s) in nodes.iter().enumerate() {
        if s < 0.0 {
            continue;
        }
        let g = continue_sqrt(&g2, prev_s, s, prev_g)?;
        gvals[i] = g;
        prev_s = s;
        prev_g = g;
    }
    // descending side
    prev_s = 0.0;
    prev_g = g0;
    for i in (0..order).rev() {
        let s = nodes[i];
        if s >= 0.0 {
            continue;
        }
        let g = continue_sqrt(&g2, prev_s, s, prev_g)?;
        gvals[i] = g;
        prev_s = s;
        prev_g = g;
    }

    let mut out = vec![C64::new(0.0, 0.0); pows.len()];
    let w = PI / order as f64;
    for (i, &s) in nodes.iter().enumerate() {
        let t = c + d * s;
        let inv_g = w / gvals[i];
        for (j, &pw) in pows.iter().enumerate() {
            out[j] += t.powu(pw as u32) * inv_g;
        }
    }
    Ok(out)
}

/// Same integral with the order doubled until two estimates agree.
pub fn cheb_between_branch_points_conv(
    poly: &FactoredPoly,
    pi_idx: usize,
    qi_idx: usize,
    v_mid: C64,
    pows: &[usize],
    start_order: usize,
    tol: f64,
) -> Result<Vec<C64>, QuadError> {
    let mut order = start_order.max(8);
    let mut prev = cheb_between_branch_points(poly, pi_idx, qi_idx, v_mid, pows, order)?;
    loop {
        order *= 2;
        let cur = cheb_between_branch_points(poly, pi_idx, qi_idx, v_mid, pows, order)?;
        let change = prev
            .iter()
            .zip(cur.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if change < tol {
            return Ok(cur);
        }
        if order > 8192 {
            return Err(QuadError::NoConvergence {
                target: tol,
                last: change,
            });
        }
        prev = cur;
    }
}

/// Integrals of t^pow / v along a straight leg [a, b] staying away from
/// all roots; `v_a` fixes the sheet at the start.
fn regular_leg(
    poly: &FactoredPoly,
    a: C64,
    b: C64,
    v_a: C64,
    pows: &[usize],
    order: usize,
) -> Result<Vec<C64>, QuadError> {
    let (nodes, weights) = gauss_legendre(order);
    let d = (b - a) * 0.5;
    let c = (a + b) * 0.5;
    let f = move |s: f64| poly.eval(c + d * s);
    let mut out = vec![C64::new(0.0, 0.0); pows.len()];
    // v_a is the sheet value at point a, i.e. at s = -1
    let mut prev_s = -1.0;
    let mut prev_v = v_a;
    for (i, &s) in nodes.iter().enumerate() {
        let v = continue_sqrt(&f, prev_s, s, prev_v)?;
        let t = c + d * s;
        let scale = weights[i] * d;
        for (j, &pw) in pows.iter().enumerate() {
            out[j] += t.powu(pw as u32) * scale / v;
        }
        prev_s = s;
        prev_v = v;
    }
    Ok(out)
}

/// Integrals of t^pow / v along a leg from a branch point `b_idx` of h to
/// a regular point e, using the substitution t = b + (e - b) u^2; the
/// sheet is fixed by the value `v_e` at the far end.
fn branch_leg(
    poly: &FactoredPoly,
    b_idx: usize,
    e: C64,
    v_e: C64,
    pows: &[usize],
    order: usize,
) -> Result<Vec<C64>, QuadError> {
    let b = poly.roots[b_idx];
    let d1 = (e - b).sqrt();
    // v(t(u)) = d1 * u * gamma(u), gamma^2 = lc * prod_{r != b}(t(u) - r)
    let skip = [b_idx];
    let g2 = move |u: f64| poly.eval_skipping(b + (e - b) * u * u, &skip);
    let g1 = v_e / d1; // gamma(1)
    let (nodes, weights) = gauss_legendre(order);
    let mut out = vec![C64::new(0.0, 0.0); pows.len()];
    // nodes are in (-1,1); map to u in (0,1): u = (s+1)/2, du = ds/2
    // walk gamma from u=1 downward
    let mut prev_u = 1.0;
    let mut prev_g = g1;
    for i in (0..order).rev() {
        let u = (nodes[i] + 1.0) * 0.5;
        let g = continue_sqrt(&g2, prev_u, u, prev_g)?;
        let t = b + (e - b) * u * u;
        // integrand: 2 (e-b) u f(t) du / v = 2 (e-b) f(t) du / (d1 gamma)
        let scale = weights[i] * 0.5 * 2.0 * (e - b) / (d1 * g);
        for (j, &pw) in pows.iter().enumerate() {
            out[j] += t.powu(pw as u32) * scale;
        }
        prev_u = u;
        prev_g = g;
    }
    Ok(out)
}

/// A path from a branch point to a terminal point (t, v): waypoints after
/// the initial branch leg, with straight segments detouring around roots.
pub fn build_detour_path(poly: &FactoredPoly, from: C64, to: C64, radius: f64) -> Vec<C64> {
    let dir = to - from;
    let len = dir.norm();
    if len == 0.0 {
        return vec![from, to];
    }
    let unit = dir / len;
    let normal = C64::new(0.0, 1.0) * unit;
    let mut detours: Vec<(f64, C64)> = Vec::new();
    for r in &poly.roots {
        let rel = r - from;
        // projection parameter along the segment
        let s = (rel.re * unit.re + rel.im * unit.im) / len;
        if s <= 1e-9 || s >= 1.0 - 1e-9 {
            continue;
        }
        let foot = from + dir * s;
        let dist = (r - foot).norm();
        if dist < radius {
            let side = {
                let off = r - foot;
                let cross = off.re * normal.re + off.im * normal.im;
                if cross > 0.0 {
                    -1.0
                } else {
                    1.0
                }
            };
            detours.push((s, foot + normal * side * radius));
        }
    }
    detours.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut path = Vec::with_capacity(detours.len() + 2);
    path.push(from);
    for (_, w) in detours {
        path.push(w);
    }
    path.push(to);
    path
}

/// Full Abel-type integral of t^pow dt / v from branch point `b_idx`
/// along `path` (path[0] must equal the branch point, path.last() the
/// target), with the sheet fixed by the value `v_end` at the target.
pub fn abel_path_integral(
    poly: &FactoredPoly,
    b_idx: usize,
    path: &[C64],
    v_end: C64,
    pows: &[usize],
    order: usize,
) -> Result<Vec<C64>, QuadError> {
    assert!(path.len() >= 2);
    // values at intermediate waypoints, tracked backwards from the target
    let mut rev: Vec<C64> = path.iter().rev().cloned().collect();
    rev.pop(); // drop the branch point itself (v = 0 there)
    let vals_rev = track_along_polyline(poly, &rev, v_end)?;
    // vals_rev[i] is v at rev[i]; rev is [target, ..., first waypoint]
    let n = rev.len();
    let mut total = vec![C64::new(0.0, 0.0); pows.len()];
    // first leg: branch point -> path[1]
    let first = branch_leg(poly, b_idx, path[1], vals_rev[n - 1], pows, order)?;
    for (a, b) in total.iter_mut().zip(first.iter()) {
        *a += b;
    }
    // remaining legs: path[k] -> path[k+1]
    for k in 1..path.len() - 1 {
        let v_a = vals_rev[n - k]; // value at path[k]
        let leg = regular_leg(poly, path[k], path[k + 1], v_a, pows, order)?;
        for (a, b) in total.iter_mut().zip(leg.iter()) {
            *a += b;
        }
    }
    Ok(total)
}

/// Doubling wrapper around `abel_path_integral`.
pub fn abel_path_integral_conv(
    poly: &FactoredPoly,
    b_idx: usize,
    path: &[C64],
    v_end: C64,
    pows: &[usize],
    start_order: usize,
    tol: f64,
) -> Result<Vec<C64>, QuadError> {
    let mut order = start_order.max(8);
    let mut prev = abel_path_integral(poly, b_idx, path, v_end, pows, order)?;
    loop {
        order *= 2;
        let cur = abel_path_integral(poly, b_idx, path, v_end, pows, order)?;
        let change = prev
            .iter()
            .zip(cur.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if change < tol {
            return Ok(cur);
        }
        if order > 8192 {
            return Err(QuadError::NoConvergence {
                target: tol,
                last: change,
            });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (n, w) = gauss_legendre(8);
        // integral of x^6 over [-1,1] = 2/7
        let s: f64 = n.iter().zip(w.iter()).map(|(x, w)| w * x.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-14);
        let s1: f64 = w.iter().sum();
        assert!((s1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_continuation_follows_a_loop() {
        // f(s) = e^{2 pi i s}: sqrt must end at -1 after a full loop
        let f = |s: f64| C64::new(0.0, 2.0 * PI * s).exp();
        let w = continue_sqrt(&f, 0.0, 1.0, c(1.0, 0.0)).unwrap();
        assert!((w - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cheb_rule_matches_known_elliptic_integral() {
        // h(t) = (1 - t^2)(1 - k^2 t^2), integral over [-1, 1] of dt / sqrt(h)
        // equals 2 K(k).  k = 0.5: K = 1.6857503548125961 (AGM value).
        let k: f64 = 0.5;
        let poly = FactoredPoly {
            lc: c(k * k, 0.0),
            roots: vec![c(-1.0 / k, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(1.0 / k, 0.0)],
        };
        // segment between roots index 1 (-1) and 2 (+1); midpoint t=0, h(0)=1,
        // sheet v(0) = +1
        let vals = cheb_between_branch_points_conv(&poly, 1, 2, c(1.0, 0.0), &[0], 64, 1e-12)
            .unwrap();
        let agm = {
            let mut a: f64 = 1.0;
            let mut b = (1.0 - k * k).sqrt();
            for _ in 0..40 {
                let an = 0.5 * (a + b);
                b = (a * b).sqrt();
                a = an;
            }
            a
        };
        let k_complete = PI / (2.0 * agm);
        assert!(
            (vals[0] - c(2.0 * k_complete, 0.0)).norm() < 1e-10,
            "got {} want {}",
            vals[0],
            2.0 * k_complete
        );
    }

    #[test]
    fn abel_leg_agrees_with_elementary_integral() {
        // h(t) = t^2 - 1 is not degree 4, but quadrature machinery is
        // generic: integral of dt/sqrt(t^2-1) from 1 to 2 = arccosh(2).
        let poly = FactoredPoly {
            lc: c(1.0, 0.0),
            roots: vec![c(-1.0, 0.0), c(1.0, 0.0)],
        };
        let target = c(2.0, 0.0);
        let v_end = (target * target - c(1.0, 0.0)).sqrt(); // positive branch
        let path = vec![c(1.0, 0.0), target];
        let vals =
            abel_path_integral_conv(&poly, 1, &path, v_end, &[0], 32, 1e-12).unwrap();
        let expected = (2.0f64 + (4.0f64 - 1.0).sqrt()).ln(); // arccosh(2)
        assert!(
            (vals[0] - c(expected, 0.0)).norm() < 1e-11,
            "got {} want {}",
            vals[0],
            expected
        );
    }

    #[test]
    fn detour_path_avoids_interior_roots() {
        let poly = FactoredPoly {
            lc: c(1.0, 0.0),
            roots: vec![c(0.5, 0.0)],
        };
        let path = build_detour_path(&poly, c(0.0, 0.0), c(1.0, 0.0), 0.1);
        assert_eq!(path.len(), 3);
        let w = path[1];
        assert!((w - c(0.5, 0.0)).norm() >= 0.1 - 1e-12);
    }
}
