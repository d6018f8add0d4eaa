//! Cell integrals of the Poisson kernel c z^s (|x|² + z²)^{-(n+s)/2} of the weighted half-space.

use crate::quad;
use crate::special::{gamma, line_power, CauchyPower};

/// Squared cell-to-origin distance (in cells) beyond which a 3-point Gauss product of the point
/// kernel replaces the exact inner integral.
const FAR2: f64 = 36.0;

pub(crate) struct CellPoisson {
    n: usize,
    s: f64,
    beta: f64,
    c: f64,
    sd: CauchyPower,
}

impl CellPoisson {
    pub fn new(n: usize, s: f64) -> Self {
        let beta = 0.5 * (n as f64 + s);
        let c = gamma(beta) / (std::f64::consts::PI.powf(0.5 * n as f64) * gamma(0.5 * s));
        CellPoisson { n, s, beta, c, sd: CauchyPower::new(beta) }
    }

    /// c(n, s), making the kernel a probability density at every height.
    pub fn normalization(&self) -> f64 {
        self.c
    }

    fn point(&self, r2: f64, t: f64) -> f64 {
        self.c * t.powf(self.s) * (r2 + t * t).powf(-self.beta)
    }

    /// ∫ P(x, t) over the unit cell centered at the integer offset `d`, with t in cell units.
    pub fn cell(&self, d: &[i64], t: f64) -> f64 {
        let n = self.n;
        let lo: Vec<f64> = d.iter().map(|&k| k as f64 - 0.5).collect();
        let hi: Vec<f64> = d.iter().map(|&k| k as f64 + 0.5).collect();
        let near2: f64 = d.iter().map(|&k| (k.abs() as f64 - 0.5).max(0.0).powi(2)).sum();
        if near2 + t * t >= FAR2 {
            let r = quad::gauss(3);
            let mut total = 0.0;
            for flat in 0..3usize.pow(n as u32) {
                let (mut rem, mut w, mut r2) = (flat, 1.0, 0.0);
                for a in 0..n {
                    let k = rem % 3;
                    rem /= 3;
                    let x = lo[a] + r.x[k];
                    r2 += x * x;
                    w *= r.w[k];
                }
                total += w * self.point(r2, t);
            }
            return total;
        }
        let pre = self.c * t.powf(self.s);
        let inner = |q2: f64| line_power(&self.sd, q2.sqrt(), lo[0], hi[0]);
        match n {
            1 => pre * inner(t * t),
            2 => {
                let peak = inner(lo[1].abs().min(hi[1].abs()).powi(2) * f64::from(d[1] != 0) + t * t);
                let tol = 1e-13 * peak;
                let mut f = |y: f64| inner(y * y + t * t);
                pre * split(lo[1], hi[1]).into_iter().map(|(a, b)| quad::adaptive(&mut f, a, b, tol)).sum::<f64>()
            }
            _ => {
                let y0 = if d[1] == 0 { 0.0 } else { lo[1].abs().min(hi[1].abs()) };
                let w0 = if d[2] == 0 { 0.0 } else { lo[2].abs().min(hi[2].abs()) };
                let tol = 1e-12 * inner(y0 * y0 + w0 * w0 + t * t);
                let mut f = |p: &[f64]| inner(p[0] * p[0] + p[1] * p[1] + t * t);
                let mut total = 0.0;
                for (a, b) in split(lo[1], hi[1]) {
                    for (c, e) in split(lo[2], hi[2]) {
                        total += quad::tensor_adaptive(&mut f, &[a, c], &[b, e], tol, 24);
                    }
                }
                pre * total
            }
        }
    }

    /// Cell integrals at every offset with |d_a| ≤ m, indexed by (|d_0|, ..., |d_{n-1}|) in
    /// row-major order over 0..=m. Axis permutations share one evaluation.
    pub fn abs_table(&self, m: usize, t: f64) -> Vec<f64> {
        let n = self.n;
        let side = m + 1;
        let len = side.pow(n as u32);
        let mut out = vec![f64::NAN; len];
        for flat in 0..len {
            let mut c = [0usize; 3];
            let mut rem = flat;
            for a in (0..n).rev() {
                c[a] = rem % side;
                rem /= side;
            }
            if c[..n].windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
            let d: Vec<i64> = c[..n].iter().map(|&x| x as i64).collect();
            let v = self.cell(&d, t);
            for perm in permutations(n) {
                let idx = perm.iter().fold(0, |acc, &a| acc * side + c[a]);
                out[idx] = v;
            }
        }
        out
    }
}

/// Splits [a, b] at 0, where the integrand peaks.
fn split(a: f64, b: f64) -> Vec<(f64, f64)> {
    if a < 0.0 && b > 0.0 {
        vec![(a, 0.0), (0.0, b)]
    } else {
        vec![(a, b)]
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    match n {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_carry_unit_mass() {
        for (n, m) in [(1usize, 4000usize), (2, 400)] {
            let p = CellPoisson::new(n, 0.5);
            let t = 0.7;
            let tab = p.abs_table(m, t);
            let side = m + 1;
            let mut total = 0.0;
            for (flat, v) in tab.iter().enumerate() {
                let mut rem = flat;
                let mut mult = 1.0;
                for _ in 0..n {
                    if rem % side != 0 {
                        mult *= 2.0;
                    }
                    rem /= side;
                }
                total += mult * v;
            }
            // Mass beyond radius R ≈ m decays like (t/R)^s.
            assert!(total < 1.0 && total > 1.0 - 0.1, "n={n}: {total}");
        }
    }

    #[test]
    fn near_and_far_rules_agree_at_the_switch() {
        let p = CellPoisson::new(2, 0.5);
        for (d, t) in [([7i64, 0], 0.3), ([6, 1], 2.5)] {
            let (x, y) = (d[0] as f64, d[1] as f64);
            let pre = p.c * f64::powf(t, p.s);
            let mut f = |v: f64| line_power(&p.sd, (v * v + t * t).sqrt(), x - 0.5, x + 0.5);
            let exact = pre * quad::adaptive(&mut f, y - 0.5, y + 0.5, 1e-15);
            assert!((p.cell(&d, t) / exact - 1.0).abs() < 1e-4, "{d:?} t={t}: {} vs {exact}", p.cell(&d, t));
        }
    }
}
