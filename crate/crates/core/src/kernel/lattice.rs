//! Periodization of the unit-cell kernel by direct image sums plus a continuum tail.

use rayon::prelude::*;

use super::cell::UnitKernel;
use super::flux::BoxFlux;
use super::AbsTable;
use crate::error::{Error, Result};

pub struct Periodized {
    pub table: AbsTable,
    pub cutoff: usize,
    /// Certified bound on |Σ_{|m|∞>M} K(δ+mP) - tail(δ)|, independent of δ.
    pub bound: f64,
}

/// Bound on the residual of the second-order continuum tail for cutoff `m` (cell units, side `p`).
pub fn tail_bound(n: usize, s: f64, p: usize, m: usize) -> f64 {
    let alpha = n as f64 + s;
    let nf = n as f64;
    let pf = p as f64;
    let d4 = alpha * (alpha + 1.0) * (alpha + 2.0) * (alpha + 3.0);
    let t4 = nf / 15.0 + nf * (nf - 1.0) / 36.0;
    let x2 = nf * pf * pf / 12.0;
    let x4 = nf * pf.powi(4) / 80.0 + nf * (nf - 1.0) * pf.powi(4) / 144.0;
    let c = d4 * ((t4 + x4) / 24.0 + (1.0 / 12.0 - pf * pf / 24.0).abs() * nf * x2 / 2.0);
    let shell = |k: f64| (2.0 * k + 1.0).powi(n as i32) - (2.0 * k - 1.0).powi(n as i32);
    let expo = -alpha - 4.0;
    let last = m + 100_000;
    let mut sum = 0.0;
    for k in (m + 1..=last).rev() {
        let kf = k as f64;
        sum += shell(kf) * ((kf - 1.0) * pf).powf(expo);
    }
    // Beyond `last`: shell(k) ≤ 2n·3^{n-1}k^{n-1} and (k-1)P ≥ kP/2.
    let kl = last as f64;
    let rest = 2.0 * nf * 3f64.powi(n as i32 - 1) * (pf / 2.0).powf(expo) * kl.powf(nf + expo) / -(nf + expo);
    c * (sum + rest)
}

/// Σ_{|m|∞ ≤ M} K₁(a + mP) + continuum correction for every sorted |a| with aᵢ ≤ P/2.
pub fn periodize(uk: &UnitKernel, p: usize, cutoff: Option<usize>, tol: f64) -> Result<Periodized> {
    let n = uk.n();
    let s = uk.s();
    let half = p / 2;
    // Smallest direct term bounds every K_per from below.
    let far_key: Vec<i64> = vec![half as i64; n];
    let floor = uk.eval(&far_key);
    let m = match cutoff {
        Some(m) => m.max(1),
        None => {
            let mut m = 1;
            while tail_bound(n, s, p, m) > tol * floor {
                m += 1;
                if m > 512 {
                    return Err(Error::TailBound { bound: tail_bound(n, s, p, m), tol: tol * floor, cutoff: m });
                }
            }
            m
        }
    };
    let bound = tail_bound(n, s, p, m);
    let keys = AbsTable::sorted_keys(n, half);
    let flux0 = BoxFlux::new(n, uk.alpha());
    let flux2 = BoxFlux::new(n, uk.alpha() + 2.0);
    let pf = p as f64;
    let r = (m as f64 + 0.5) * pf;
    let lap = (1.0 / 12.0 - pf * pf / 24.0) * uk.alpha();
    let images = (2 * m + 1).pow(n as u32);
    let side = 2 * m + 1;
    // Fixed chunks of image indices summed in order keep the result thread-count independent.
    let chunk = 4096usize;
    let chunks = images.div_ceil(chunk);
    let vals: Vec<f64> = keys
        .iter()
        .map(|a| {
            let partial: Vec<f64> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut sum = 0.0;
                    let mut off = [0i64; 3];
                    for flat in c * chunk..((c + 1) * chunk).min(images) {
                        let mut rem = flat;
                        let mut zero = true;
                        for i in 0..n {
                            let mi = (rem % side) as i64 - m as i64;
                            rem /= side;
                            off[i] = a[i] as i64 + mi * p as i64;
                            zero &= off[i] == 0;
                        }
                        if !zero {
                            sum += uk.eval(&off[..n]);
                        }
                    }
                    sum
                })
                .collect();
            let direct: f64 = partial.iter().sum();
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for i in 0..n {
                lo[i] = a[i] as f64 - r;
                hi[i] = a[i] as f64 + r;
            }
            let tail = (flux0.eval(&lo[..n], &hi[..n]) / s + lap * flux2.eval(&lo[..n], &hi[..n])) / pf.powi(n as i32);
            direct + tail
        })
        .collect();
    let mut table = AbsTable::from_sorted(n, half, &keys, &vals);
    table.clear_origin();
    if cutoff.is_some() {
        let worst = table.min_nonzero();
        if bound > tol * worst {
            return Err(Error::TailBound { bound, tol: tol * worst, cutoff: m });
        }
    }
    Ok(Periodized { table, cutoff: m, bound })
}
