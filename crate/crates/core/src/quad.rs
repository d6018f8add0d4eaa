//! One- and multi-dimensional Gauss rules in f64.

use std::sync::OnceLock;

const MAX_ORDER: usize = 64;

/// Gauss–Legendre nodes and weights on [0, 1].
pub struct Rule {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

fn legendre_rule(q: usize) -> Rule {
    // Newton on P_q from the Chebyshev-like initial guesses; symmetric pairs.
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for k in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=q {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = q as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wk = 2.0 / ((1.0 - z * z) * dp * dp);
        x[k] = 0.5 * (1.0 - z);
        x[q - 1 - k] = 0.5 * (1.0 + z);
        w[k] = 0.5 * wk;
        w[q - 1 - k] = 0.5 * wk;
    }
    Rule { x, w }
}

pub fn gauss(q: usize) -> &'static Rule {
    static RULES: OnceLock<Vec<Rule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=MAX_ORDER).map(legendre_rule).collect());
    &rules[q.clamp(1, MAX_ORDER) - 1]
}

pub fn fixed(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, q: usize) -> f64 {
    let r = gauss(q);
    let h = b - a;
    r.x.iter().zip(&r.w).map(|(&x, &w)| w * f(a + h * x)).sum::<f64>() * h
}

/// Adaptive bisection on a fixed Gauss rule; `tol` is absolute per unit length.
pub fn adaptive(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = fixed(f, a, m, 12);
        let right = fixed(f, m, b, 12);
        if depth == 0 || (left + right - whole).abs() <= tol * (b - a) {
            return left + right;
        }
        rec(f, a, m, left, tol, depth - 1) + rec(f, m, b, right, tol, depth - 1)
    }
    let whole = fixed(f, a, b, 12);
    rec(f, a, b, whole, tol, 40)
}

/// Tensor-product Gauss over a box, `lo`/`hi` of length n ≤ 3.
pub fn tensor(f: &mut impl FnMut(&[f64]) -> f64, lo: &[f64], hi: &[f64], q: usize) -> f64 {
    let r = gauss(q);
    let n = lo.len();
    let mut p = [0.0; 3];
    let mut total = 0.0;
    let count = q.pow(n as u32);
    for flat in 0..count {
        let mut rem = flat;
        let mut w = 1.0;
        for a in 0..n {
            let k = rem % q;
            rem /= q;
            p[a] = lo[a] + (hi[a] - lo[a]) * r.x[k];
            w *= r.w[k] * (hi[a] - lo[a]);
        }
        total += w * f(&p[..n]);
    }
    total
}

/// Adaptive tensor Gauss: a box is accepted when two orders agree, otherwise bisected along every axis.
/// Accepts a box once the 8- and 12-point rules agree to `tol` or to summation roundoff.
pub fn tensor_adaptive(f: &mut impl FnMut(&[f64]) -> f64, lo: &[f64], hi: &[f64], tol: f64, depth: u32) -> f64 {
    let coarse = tensor(f, lo, hi, 8);
    let fine = tensor(f, lo, hi, 12);
    if depth == 0 || (fine - coarse).abs() <= tol.max(128.0 * f64::EPSILON * fine.abs()) {
        return fine;
    }
    let n = lo.len();
    let mut total = 0.0;
    for corner in 0..(1usize << n) {
        let mut l = [0.0; 3];
        let mut h = [0.0; 3];
        for a in 0..n {
            let m = 0.5 * (lo[a] + hi[a]);
            if corner >> a & 1 == 0 {
                l[a] = lo[a];
                h[a] = m;
            } else {
                l[a] = m;
                h[a] = hi[a];
            }
        }
        total += tensor_adaptive(f, &l[..n], &h[..n], tol / (1 << n) as f64, depth - 1);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        for q in [1usize, 2, 5, 12, 30, 64] {
            let deg = 2 * q - 1;
            let got = fixed(&mut |x| x.powi(deg as i32), 0.0, 1.0, q);
            assert!((got - 1.0 / (deg + 1) as f64).abs() < 1e-14, "q={q} got {got}");
        }
    }

    #[test]
    fn adaptive_handles_kinks() {
        let got = adaptive(&mut |x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-13);
        assert!((got - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn tensor_adaptive_matches_separable_integral() {
        let got = tensor_adaptive(&mut |p: &[f64]| (p[0] * p[1]).sqrt(), &[0.0, 0.0], &[1.0, 1.0], 1e-11, 12);
        assert!((got - 4.0 / 9.0).abs() < 1e-9, "{got}");
    }
}
