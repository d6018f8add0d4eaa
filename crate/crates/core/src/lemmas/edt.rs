//! Exact Euclidean distance transform on cell centers (separable lower-envelope method).

use crate::domain::DomainSpec;
use crate::scalar::Real;

/// Squared distance transform of one line of samples `f` (∞ marks no site).
fn envelope(f: &[f64], out: &mut [f64]) {
    let m = f.len();
    let mut v = vec![0usize; m];
    let mut z = vec![0f64; m + 1];
    let mut k = 0usize;
    let Some(q0) = f.iter().position(|x| x.is_finite()) else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in q0 + 1..m {
        if !f[q].is_finite() {
            continue;
        }
        let meet = |p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
        let mut sx = meet(v[k]);
        // z[0] = -∞ stops the pop loop at the first parabola.
        while sx <= z[k] {
            k -= 1;
            sx = meet(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = sx;
        z[k + 1] = f64::INFINITY;
    }
    let mut j = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let d = q as f64 - v[j] as f64;
        *o = d * d + f[v[j]];
    }
}

/// Distance from every cell center to the nearest center of a `mask` cell, in physical units
/// (minimal image on the torus). Infinite everywhere when the mask is empty.
pub fn distance_to<T: Real>(domain: &DomainSpec<T>, mask: &[bool]) -> Vec<T> {
    let n = domain.n();
    let p = domain.side();
    let len = domain.len();
    let mut g: Vec<f64> = mask.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let periodic = domain.is_periodic();
    let ext = if periodic { 3 * p } else { p };
    let mut line = vec![0f64; ext];
    let mut out = vec![0f64; ext];
    for axis in 0..n {
        let stride = p.pow((n - 1 - axis) as u32);
        for start in 0..len {
            if domain.coords(start)[axis] != 0 {
                continue;
            }
            for t in 0..ext {
                line[t] = g[start + (t % p) * stride];
            }
            envelope(&line, &mut out);
            let off = if periodic { p } else { 0 };
            for t in 0..p {
                g[start + t * stride] = out[t + off];
            }
        }
    }
    let h = domain.cell_size();
    g.into_iter().map(|d2| if d2.is_finite() { T::lit(d2.sqrt()) * h } else { T::infinity() }).collect()
}
