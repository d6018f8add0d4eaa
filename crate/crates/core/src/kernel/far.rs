//! Far-field weights wFar(i) = ∫_{cell i} ∫_{ℝⁿ∖box} |x-y|^{-n-s} (unit cells, box [0,P]ⁿ).

use rayon::prelude::*;

use super::cell::UnitKernel;
use super::flux::BoxFlux;
use super::spectral::{wrap_index, Spectral};
use super::AbsTable;
use crate::quad;

pub fn far_weights(uk: &UnitKernel, p: usize) -> Vec<f64> {
    let n = uk.n();
    let s = uk.s();
    if n == 1 {
        // One-sided closed forms: ∫_i^{i+1} x^{-s}/s dx on the left, mirrored on the right.
        let g = |x: f64| x.powf(1.0 - s) / (s * (1.0 - s));
        return (0..p)
            .map(|i| {
                let (l, r) = (i as f64, (p - i) as f64);
                (g(l + 1.0) - g(l)) + (g(r) - g(r - 1.0))
            })
            .collect();
    }
    // Cells of the margin ring are summed exactly; beyond it the exterior integral of each
    // cell reduces to boundary fluxes of the enlarged box.
    let (margin, qc) = if n == 2 { (4, 5) } else { (8, 3) };
    let q = p + 2 * margin;
    let big = 2 * q;
    let table = AbsTable::build(uk, q);
    let mut kt = vec![0.0; big.pow(n as u32)];
    for (flat, slot) in kt.iter_mut().enumerate() {
        let mut rem = flat;
        let mut off = [0isize; 3];
        for a in (0..n).rev() {
            let c = (rem % big) as isize;
            rem /= big;
            off[a] = if c >= q as isize { c - big as isize } else { c };
        }
        *slot = table.get(&off[..n]);
    }
    let sp = Spectral::new(n, big, &kt);
    let mut ring = vec![0.0; big.pow(n as u32)];
    let inside = |c: &[isize]| c.iter().all(|&x| x >= margin as isize && x < (margin + p) as isize);
    let mut c = [0isize; 3];
    for_each_cell(n, q, |idx| {
        for a in 0..n {
            c[a] = idx[a] as isize;
        }
        if !inside(&c[..n]) {
            ring[wrap_index(n, big, &c[..n])] = 1.0;
        }
    });
    let ring_sum = sp.convolve(&ring);
    let flux = BoxFlux::new(n, uk.alpha());
    // wFar is invariant under reflections and axis permutations of the box.
    let canon = |idx: [usize; 3]| {
        let mut c = [0usize; 3];
        for a in 0..n {
            c[a] = idx[a].min(p - 1 - idx[a]);
        }
        c[..n].sort_unstable();
        c
    };
    let mut reps: Vec<[usize; 3]> = Vec::new();
    for_each_cell(n, p, |idx| reps.push(canon(idx)));
    reps.sort_unstable();
    reps.dedup();
    let tails: Vec<f64> = reps
        .par_iter()
        .map(|idx| {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for a in 0..n {
                lo[a] = idx[a] as f64;
                hi[a] = lo[a] + 1.0;
            }
            quad::tensor(
                &mut |x: &[f64]| {
                    let mut blo = [0.0; 3];
                    let mut bhi = [0.0; 3];
                    for a in 0..n {
                        blo[a] = -(margin as f64) - x[a];
                        bhi[a] = (p + margin) as f64 - x[a];
                    }
                    flux.eval(&blo[..n], &bhi[..n])
                },
                &lo[..n],
                &hi[..n],
                qc,
            ) / s
        })
        .collect();
    let mut out = Vec::with_capacity(p.pow(n as u32));
    for_each_cell(n, p, |idx| {
        let mut cc = [0isize; 3];
        for a in 0..n {
            cc[a] = (idx[a] + margin) as isize;
        }
        let ring_part = ring_sum[wrap_index(n, big, &cc[..n])];
        let k = reps.binary_search(&canon(idx)).expect("representative");
        out.push(ring_part + tails[k]);
    });
    out
}

pub(crate) fn for_each_cell(n: usize, p: usize, mut f: impl FnMut([usize; 3])) {
    let total = p.pow(n as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut c = [0usize; 3];
        for a in (0..n).rev() {
            c[a] = rem % p;
            rem /= p;
        }
        f(c);
    }
}
