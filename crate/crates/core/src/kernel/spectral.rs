//! Circular n-D convolution with a fixed symmetric kernel by FFT.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

#[derive(Clone)]
pub struct Spectral<T: Real> {
    n: usize,
    side: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    khat: Vec<Complex<T>>,
}

impl<T: Real> std::fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).field("side", &self.side).finish()
    }
}

impl<T: Real> Spectral<T> {
    /// `table` holds K at every wrapped offset of a grid with `side` cells per axis.
    pub fn new(n: usize, side: usize, table: &[T]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(side);
        let inv = planner.plan_fft_inverse(side);
        let mut sp = Spectral { n, side, fwd, inv, khat: Vec::new() };
        let mut buf: Vec<Complex<T>> = table.iter().map(|&x| Complex::new(x, T::zero())).collect();
        sp.transform(&mut buf, false);
        sp.khat = buf;
        sp
    }

    pub fn side(&self) -> usize {
        self.side
    }

    fn transform(&self, buf: &mut [Complex<T>], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let p = self.side;
        let total = buf.len();
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        let mut lines = vec![Complex::new(T::zero(), T::zero()); total];
        for axis in 0..self.n {
            let stride = p.pow((self.n - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(buf, &mut scratch);
                continue;
            }
            // Gather every line along `axis` contiguously, transform in one batch, scatter back.
            let block = stride * p;
            let mut li = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for k in 0..p {
                        lines[li * p + k] = buf[base + k * stride];
                    }
                    li += 1;
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            li = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for k in 0..p {
                        buf[base + k * stride] = lines[li * p + k];
                    }
                    li += 1;
                }
            }
        }
    }

    /// Circular convolution of a field laid out on the transform grid.
    pub fn convolve(&self, field: &[T]) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = field.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.transform(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.khat) {
            *b = *b * *k;
        }
        self.transform(&mut buf, true);
        let scale = T::one() / T::of_usize(buf.len());
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// Copy a field of side `p` into the corner of a zero grid of side `q`.
pub fn embed<T: Real>(n: usize, p: usize, q: usize, field: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); q.pow(n as u32)];
    for (i, &v) in field.iter().enumerate() {
        out[reindex(n, p, q, i)] = v;
    }
    out
}

/// Inverse of [`embed`]: the corner block of side `p`.
pub fn extract<T: Real>(n: usize, p: usize, q: usize, big: &[T]) -> Vec<T> {
    (0..p.pow(n as u32)).map(|i| big[reindex(n, p, q, i)]).collect()
}

fn reindex(n: usize, p: usize, q: usize, mut i: usize) -> usize {
    let mut c = [0usize; 3];
    for a in (0..n).rev() {
        c[a] = i % p;
        i /= p;
    }
    c[..n].iter().fold(0, |acc, &x| acc * q + x)
}

/// Wrapped index on a grid of side `q` for a signed offset.
pub fn wrap_index(n: usize, q: usize, off: &[isize]) -> usize {
    off[..n].iter().fold(0, |acc, &x| acc * q + x.rem_euclid(q as isize) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_convolution_reproduces_table() {
        let (n, q) = (2, 6);
        let table: Vec<f64> = (0..q * q).map(|i| (i as f64 * 0.37).sin()).collect();
        let sp = Spectral::new(n, q, &table);
        let mut delta = vec![0.0; q * q];
        delta[0] = 1.0;
        let out = sp.convolve(&delta);
        for (a, b) in out.iter().zip(&table) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn embed_extract_round_trip() {
        let f: Vec<f64> = (0..27).map(|i| i as f64).collect();
        let big = embed(3, 3, 5, &f);
        assert_eq!(extract(3, 3, 5, &big), f);
    }
}
