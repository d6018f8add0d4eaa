//! Cell-pair interaction weights for |z|^{-n-s}, their periodization, far-field weights and
//! FFT correlation.

mod cache;
mod cell;
mod far;
mod flux;
mod lattice;
pub(crate) mod spectral;

pub use cache::{load_kernel, save_kernel};
pub use cell::UnitKernel;
pub use flux::BoxFlux;
pub use lattice::tail_bound;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::domain::{BoundaryMode, DomainSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;
use spectral::{embed, extract, wrap_index, Spectral};

/// Shared unit kernels keyed by (n, s bits); the corner moments are worth computing once.
pub fn unit_kernel(n: usize, s: f64) -> Arc<UnitKernel> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<UnitKernel>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().expect("kernel cache poisoned").get(&(n, s.to_bits())) {
        return k.clone();
    }
    let k = Arc::new(UnitKernel::new(n, s));
    cache.lock().expect("kernel cache poisoned").insert((n, s.to_bits()), k.clone());
    k
}

/// Values of an even, permutation-symmetric function of integer offsets with |δᵢ| ≤ max.
#[derive(Clone, Debug)]
pub(crate) struct AbsTable {
    n: usize,
    side: usize,
    vals: Vec<f64>,
}

impl AbsTable {
    pub fn sorted_keys(n: usize, max: usize) -> Vec<[u64; 3]> {
        let mut keys = Vec::new();
        let m = max as u64;
        match n {
            1 => keys.extend((0..=m).map(|a| [a, 0, 0])),
            2 => {
                for a in 0..=m {
                    for b in a..=m {
                        keys.push([a, b, 0]);
                    }
                }
            }
            _ => {
                for a in 0..=m {
                    for b in a..=m {
                        for c in b..=m {
                            keys.push([a, b, c]);
                        }
                    }
                }
            }
        }
        keys
    }

    fn slot(&self, abs: &[u64]) -> usize {
        let mut k = [0u64; 3];
        k[..self.n].copy_from_slice(&abs[..self.n]);
        k[..self.n].sort_unstable();
        k[..self.n].iter().fold(0, |acc, &x| acc * self.side + x as usize)
    }

    pub fn from_sorted(n: usize, max: usize, keys: &[[u64; 3]], vals: &[f64]) -> Self {
        let side = max + 1;
        let mut t = AbsTable { n, side, vals: vec![0.0; side.pow(n as u32)] };
        for (k, &v) in keys.iter().zip(vals) {
            let s = t.slot(k);
            t.vals[s] = v;
        }
        t
    }

    pub fn build(uk: &UnitKernel, max: usize) -> Self {
        let n = uk.n();
        let keys = Self::sorted_keys(n, max);
        let vals: Vec<f64> = keys
            .par_iter()
            .map(|k| {
                if k.iter().all(|&x| x == 0) {
                    0.0
                } else {
                    let d: Vec<i64> = k[..n].iter().map(|&x| x as i64).collect();
                    uk.eval(&d)
                }
            })
            .collect();
        Self::from_sorted(n, max, &keys, &vals)
    }

    pub fn get(&self, off: &[isize]) -> f64 {
        let mut a = [0u64; 3];
        for i in 0..self.n {
            a[i] = off[i].unsigned_abs() as u64;
        }
        self.vals[self.slot(&a)]
    }

    pub fn clear_origin(&mut self) {
        self.vals[0] = 0.0;
    }

    pub fn min_nonzero(&self) -> f64 {
        self.vals.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelOptions {
    /// Image shells summed directly in periodic mode; `None` picks the smallest meeting the tolerance.
    pub lattice_cutoff: Option<usize>,
    /// Relative bound on the periodization tail.
    pub tail_tolerance: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { lattice_cutoff: None, tail_tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct KernelTensor<T: Real> {
    domain: DomainSpec<T>,
    scale: T,
    table: Vec<T>,
    row: Vec<T>,
    far: Option<Vec<T>>,
    spectral: Spectral<T>,
    cutoff: usize,
    tail_bound: T,
}

/// K(δ) between two cells of the domain at integer offset δ.
pub fn cell_interaction<T: Real>(offset: &[isize], domain: &DomainSpec<T>) -> Result<T> {
    let n = domain.n();
    if offset.len() < n || offset[..n].iter().all(|&x| x == 0) {
        return Err(Error::ZeroOffset);
    }
    let uk = unit_kernel(n, domain.s().f64());
    let d: Vec<i64> = offset[..n].iter().map(|&x| x as i64).collect();
    Ok(T::lit(uk.eval(&d)) * length_scale(domain))
}

/// h^{n-s}: the unit-cell kernel rescaled to the physical cell size.
fn length_scale<T: Real>(domain: &DomainSpec<T>) -> T {
    let e = T::of_usize(domain.n()) - domain.s();
    domain.cell_size().powf(e)
}

pub fn build_kernel<T: Real>(domain: &DomainSpec<T>, opts: KernelOptions) -> Result<KernelTensor<T>> {
    if !(opts.tail_tolerance > 0.0) {
        return Err(Error::Range { name: "tailTolerance", value: opts.tail_tolerance, why: "must be positive" });
    }
    let n = domain.n();
    let p = domain.side();
    let uk = unit_kernel(n, domain.s().f64());
    let scale = length_scale(domain);
    match domain.mode() {
        BoundaryMode::Periodic => {
            let per = lattice::periodize(&uk, p, opts.lattice_cutoff, opts.tail_tolerance)?;
            let table: Vec<T> = (0..p.pow(n as u32))
                .map(|flat| {
                    let c = domain.coords(flat);
                    let mut off = [0isize; 3];
                    for a in 0..n {
                        let x = c[a] as isize;
                        off[a] = if x > (p / 2) as isize { x - p as isize } else { x };
                    }
                    T::lit(per.table.get(&off[..n])) * scale
                })
                .collect();
            let d: T = table.iter().copied().sum();
            let spectral = Spectral::new(n, p, &table);
            Ok(KernelTensor {
                domain: domain.clone(),
                scale,
                row: vec![d; table.len()],
                table,
                far: None,
                spectral,
                cutoff: per.cutoff,
                tail_bound: T::lit(per.bound) * scale,
            })
        }
        BoundaryMode::Free => {
            let abs = AbsTable::build(&uk, p - 1);
            let big = 2 * p;
            let mut table = vec![T::zero(); big.pow(n as u32)];
            for (flat, slot) in table.iter_mut().enumerate() {
                let mut rem = flat;
                let mut off = [0isize; 3];
                let mut edge = false;
                for a in (0..n).rev() {
                    let c = (rem % big) as isize;
                    rem /= big;
                    edge |= c == p as isize;
                    off[a] = if c > p as isize { c - big as isize } else { c };
                }
                if !edge {
                    *slot = T::lit(abs.get(&off[..n])) * scale;
                }
            }
            let spectral = Spectral::new(n, big, &table);
            let far: Vec<T> = far::far_weights(&uk, p).into_iter().map(|w| T::lit(w) * scale).collect();
            let mut k = KernelTensor {
                domain: domain.clone(),
                scale,
                table,
                row: Vec::new(),
                far: Some(far),
                spectral,
                cutoff: 0,
                tail_bound: T::zero(),
            };
            k.row = k.correlate_unchecked(&vec![T::one(); domain.len()]);
            Ok(k)
        }
    }
}

impl<T: Real> KernelTensor<T> {
    pub(crate) fn from_parts(domain: DomainSpec<T>, table: Vec<T>, far: Option<Vec<T>>, cutoff: usize, tail_bound: T) -> Self {
        let n = domain.n();
        let scale = length_scale(&domain);
        let side = if domain.is_periodic() { domain.side() } else { 2 * domain.side() };
        let spectral = Spectral::new(n, side, &table);
        let mut k = KernelTensor { domain, scale, table, row: Vec::new(), far, spectral, cutoff, tail_bound };
        k.row = if k.domain.is_periodic() {
            vec![k.table.iter().copied().sum(); k.domain.len()]
        } else {
            k.correlate_unchecked(&vec![T::one(); k.domain.len()])
        };
        k
    }

    pub fn domain(&self) -> &DomainSpec<T> {
        &self.domain
    }

    /// Weight at a signed cell offset (minimal image in periodic mode); zero at the origin.
    pub fn k(&self, off: &[isize]) -> T {
        let n = self.domain.n();
        let p = self.domain.side();
        if self.domain.is_periodic() {
            self.table[wrap_index(n, p, off)]
        } else if off[..n].iter().all(|&x| x.unsigned_abs() < p) {
            self.table[wrap_index(n, 2 * p, off)]
        } else {
            let d: Vec<i64> = off[..n].iter().map(|&x| x as i64).collect();
            T::lit(unit_kernel(n, self.domain.s().f64()).eval(&d)) * self.scale
        }
    }

    /// Weight between cells i and j; zero when i = j.
    pub fn pair(&self, i: usize, j: usize) -> T {
        if i == j {
            return T::zero();
        }
        self.k(&self.domain.offset(i, j))
    }

    /// In-box row sums d_i = Σ_{j≠i} K(i-j).
    pub fn row_sums(&self) -> &[T] {
        &self.row
    }

    /// Far-field weights (free mode only).
    pub fn far(&self) -> Option<&[T]> {
        self.far.as_deref()
    }

    pub fn far_or_zero(&self, i: usize) -> T {
        self.far.as_ref().map_or(T::zero(), |w| w[i])
    }

    pub fn lattice_cutoff(&self) -> usize {
        self.cutoff
    }

    /// Absolute periodization tail bound (physical units); zero in free mode.
    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    pub(crate) fn table(&self) -> &[T] {
        &self.table
    }

    pub fn correlate(&self, field: &[T]) -> Result<Vec<T>> {
        if field.len() != self.domain.len() {
            return Err(Error::DomainMismatch("field", "kernel"));
        }
        Ok(self.correlate_unchecked(field))
    }

    pub(crate) fn correlate_unchecked(&self, field: &[T]) -> Vec<T> {
        let n = self.domain.n();
        let p = self.domain.side();
        if self.domain.is_periodic() {
            self.spectral.convolve(field)
        } else {
            let big = self.spectral.side();
            extract(n, p, big, &self.spectral.convolve(&embed(n, p, big, field)))
        }
    }

    /// Direct O(len²) correlation; the oracle for the FFT path.
    pub fn correlate_direct(&self, field: &[T]) -> Vec<T> {
        let len = self.domain.len();
        (0..len).into_par_iter().map(|i| (0..len).filter(|&j| j != i).map(|j| self.pair(i, j) * field[j]).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;

    #[test]
    fn zero_offset_is_rejected() {
        let d = make_domain(2, &[8, 8], 1.0, BoundaryMode::Free, 0.5).unwrap();
        assert!(matches!(cell_interaction::<f64>(&[0, 0], &d), Err(Error::ZeroOffset)));
    }

    #[test]
    fn free_table_matches_direct_evaluation() {
        let d = make_domain(2, &[6, 6], 1.0f64, BoundaryMode::Free, 0.3).unwrap();
        let k = build_kernel(&d, KernelOptions::default()).unwrap();
        for off in [[1isize, 0], [-2, 3], [5, -5], [0, -4]] {
            let want: f64 = cell_interaction(&off, &d).unwrap();
            assert!((k.k(&off) - want).abs() <= 1e-15 * want);
        }
    }
}
