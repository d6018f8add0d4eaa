//! Unit-cell interaction K₁(δ) = ∫_{[-1,1]ⁿ} Π(1-|tᵢ|) |δ+t|^{-n-s} dt.

use crate::quad;

#[derive(Clone, Debug)]
pub struct UnitKernel {
    n: usize,
    s: f64,
    alpha: f64,
    /// J_k = ∫_{[0,1]ⁿ} w₁⋯w_k |w|^{-α} dw for k = 1..=n (index k-1).
    j: [f64; 3],
}

const NEAR_TOL: f64 = 1e-14;

impl UnitKernel {
    pub fn new(n: usize, s: f64) -> Self {
        let alpha = n as f64 + s;
        let mut j = [0.0; 3];
        if n >= 2 {
            for k in 1..=n {
                j[k - 1] = Self::corner_moment(n, k, alpha, s);
            }
        }
        UnitKernel { n, s, alpha, j }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    // The integrand is homogeneous of degree k-α, so the inner box [0,1/2]ⁿ carries
    // 2^{s-k} of the total and J_k follows from the smooth outer shell alone.
    fn corner_moment(n: usize, k: usize, alpha: f64, s: f64) -> f64 {
        let mut shell = 0.0;
        for corner in 1..(1usize << n) {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for a in 0..n {
                lo[a] = if corner >> a & 1 == 1 { 0.5 } else { 0.0 };
                hi[a] = lo[a] + 0.5;
            }
            shell += quad::tensor_adaptive(
                &mut |w: &[f64]| {
                    let r2: f64 = w.iter().map(|x| x * x).sum();
                    w[..k].iter().product::<f64>() * r2.powf(-alpha / 2.0)
                },
                &lo[..n],
                &hi[..n],
                1e-15,
                10,
            );
        }
        shell / (1.0 - 2f64.powf(s - k as f64))
    }

    /// K₁ at integer offset δ ≠ 0 (unit cells).
    pub fn eval(&self, delta: &[i64]) -> f64 {
        let mut a = [0u64; 3];
        for (x, &d) in a.iter_mut().zip(delta) {
            *x = d.unsigned_abs();
        }
        let a = &mut a[..self.n];
        a.sort_unstable();
        debug_assert!(a.iter().any(|&x| x != 0), "zero offset");
        if self.n == 1 {
            return self.line(a[0] as f64);
        }
        let r2: f64 = a.iter().map(|&x| (x * x) as f64).sum();
        if a[self.n - 1] <= 2 {
            self.near(a)
        } else {
            self.far(a, r2.sqrt())
        }
    }

    /// Closed form [2δ^{1-s} - (δ-1)^{1-s} - (δ+1)^{1-s}] / (s(1-s)), arranged to avoid cancellation.
    fn line(&self, d: f64) -> f64 {
        let p = 1.0 - self.s;
        let lo = (p * (-1.0 / d).ln_1p()).exp_m1();
        let hi = (p * (1.0 / d).ln_1p()).exp_m1();
        -d.powf(p) * (lo + hi) / (self.s * p)
    }

    fn near(&self, a: &[u64]) -> f64 {
        let n = self.n;
        let alpha = self.alpha;
        let mut total = 0.0;
        let singular_possible = a.iter().all(|&x| x <= 1);
        if singular_possible {
            let zeros = a.iter().filter(|&&x| x == 0).count();
            let ones = n - zeros;
            // Expand Π_{zero axes}(1 - w_i) over subsets of the zero axes.
            let mut s = 0.0;
            for t in 0..=zeros {
                let binom = (0..t).fold(1.0, |acc, i| acc * (zeros - i) as f64 / (i + 1) as f64);
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * binom * self.j[ones + t - 1];
            }
            total += (1u64 << zeros) as f64 * s;
        }
        for signs in 0..(1usize << n) {
            let sigma = |i: usize| if signs >> i & 1 == 1 { 1.0 } else { -1.0 };
            let singular = (0..n).all(|i| a[i] == 0 || (a[i] == 1 && sigma(i) < 0.0));
            if singular {
                continue;
            }
            total += quad::tensor_adaptive(
                &mut |v: &[f64]| {
                    let mut r2 = 0.0;
                    let mut w = 1.0;
                    for i in 0..n {
                        let x = a[i] as f64 + sigma(i) * v[i];
                        r2 += x * x;
                        w *= 1.0 - v[i];
                    }
                    w * r2.powf(-alpha / 2.0)
                },
                &[0.0; 3][..n],
                &[1.0; 3][..n],
                NEAR_TOL,
                10,
            );
        }
        total
    }

    fn far(&self, a: &[u64], dist: f64) -> f64 {
        let n = self.n;
        let half_alpha = -self.alpha / 2.0;
        if dist >= 64.0 {
            // Second moment of the hat weight is 1/6 per axis, so the average is f + Δf/12.
            let r2: f64 = a.iter().map(|&x| (x as f64) * (x as f64)).sum();
            let corr = self.alpha * (self.alpha + 2.0 - n as f64) / (12.0 * r2);
            return r2.powf(half_alpha) * (1.0 + corr);
        }
        let q = match dist {
            d if d < 6.0 => 10,
            d if d < 16.0 => 6,
            d if d < 48.0 => 4,
            _ => 2,
        };
        let rule = quad::gauss(q);
        let mut total = 0.0;
        let count = q.pow(n as u32);
        for signs in 0..(1usize << n) {
            for flat in 0..count {
                let mut rem = flat;
                let mut r2 = 0.0;
                let mut w = 1.0;
                for (i, &x) in a.iter().enumerate() {
                    let k = rem % q;
                    rem /= q;
                    let v = rule.x[k];
                    let y = x as f64 + if signs >> i & 1 == 1 { v } else { -v };
                    r2 += y * y;
                    w *= rule.w[k] * (1.0 - v);
                }
                total += w * r2.powf(half_alpha);
            }
        }
        total
    }
}
