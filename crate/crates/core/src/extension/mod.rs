//! Poisson-kernel extension of ±1 traces to the half-space {z > 0} with weight z^a, a = 1 - s,
//! its weighted Dirichlet energy and the monotonicity quantity Φ.
//!
//! The kernel is integrated exactly over each cell, so in free mode u = -1 + 2 W ⋆ 1_E holds with
//! the outside of the box counted as E^c, and the field is evaluated on the box widened by `pad`
//! cells per side. On the torus the images with |m|∞ ≤ 2 are summed and the remaining mass is
//! spread uniformly, so the discrete kernel sums to one at every level.

mod poisson;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{make_domain, BoundaryMode, DomainSpec, LabelGrid};
use crate::energy::fmt17;
use crate::error::{Error, Result};
use crate::kernel::spectral::{wrap_index, Spectral};
use crate::lemmas::{chambers_at, CheckReport};
use crate::quad;
use crate::scalar::Real;

use poisson::CellPoisson;

/// Geometric ratio between consecutive z-levels.
pub const LEVEL_RATIO: f64 = 1.148_698_354_997_035; // 2^{1/5}

/// z_k = z₀·2^{k/5} for z₀ = `floor_cells`·h, up to L/2 (at least 16 levels).
pub fn geometric_levels<T: Real>(domain: &DomainSpec<T>, floor_cells: f64) -> Vec<f64> {
    let h = domain.cell_size().f64();
    let top = 0.5 * domain.side_length().f64();
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let z = floor_cells * h * 2f64.powf(k as f64 / 5.0);
        if z > top * (1.0 + 1e-12) && out.len() >= 16 {
            break;
        }
        out.push(z);
        k += 1;
    }
    out
}

/// Levels from h/4 up to L/2.
pub fn default_levels<T: Real>(domain: &DomainSpec<T>) -> Vec<f64> {
    geometric_levels(domain, 0.25)
}

#[derive(Clone, Debug)]
pub struct ExtensionField<T: Real> {
    domain: DomainSpec<T>,
    pad: usize,
    side: usize,
    levels: Vec<f64>,
    values: Vec<Vec<T>>,
    trace: Vec<T>,
    normalization: f64,
}

impl<T: Real> ExtensionField<T> {
    /// The grid of the extended set.
    pub fn domain(&self) -> &DomainSpec<T> {
        &self.domain
    }

    /// Extra cells per side in free mode.
    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Cells per axis of the evaluation grid.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn a(&self) -> f64 {
        1.0 - self.domain.s().f64()
    }

    /// c(n, a) of the continuum kernel.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// u(·, z_k) on the evaluation grid.
    pub fn level(&self, k: usize) -> &[T] {
        &self.values[k]
    }

    /// 1_E - 1_{E^c} on the evaluation grid.
    pub fn trace(&self) -> &[T] {
        &self.trace
    }

    /// Evaluation-grid index of a base-grid cell.
    pub fn index_of(&self, cell: usize) -> usize {
        let c = self.domain.coords(cell);
        c[..self.domain.n()].iter().fold(0, |acc, &x| acc * self.side + x + self.pad)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0f64, |m, v| m.max(v.f64().abs()))
    }

    /// max |u(·, z₀) - trace| over base cells whose center lies more than `cells`·h from every
    /// center of the opposite phase (the outside of a free box belongs to E^c).
    pub fn trace_error(&self, cells: f64) -> f64 {
        let d = &self.domain;
        let e: Vec<bool> = (0..d.len()).map(|i| self.trace[self.index_of(i)] > T::zero()).collect();
        let c: Vec<bool> = e.iter().map(|&b| !b).collect();
        let to_e = crate::lemmas::distance_to(d, &e);
        let to_c = crate::lemmas::distance_to(d, &c);
        let h = d.cell_size().f64();
        let mut worst = 0f64;
        for i in 0..d.len() {
            let mut far = if e[i] { to_c[i].f64() } else { to_e[i].f64() };
            if e[i] && !d.is_periodic() {
                let k = d.coords(i);
                let edge = k[..d.n()].iter().map(|&x| (x + 1).min(d.side() - x)).min().unwrap_or(0);
                far = far.min(edge as f64 * h);
            }
            if far > cells * h {
                let j = self.index_of(i);
                worst = worst.max((self.values[0][j] - self.trace[j]).f64().abs());
            }
        }
        worst
    }
}

/// Per-level discrete Poisson kernels for one grid, reusable across sets.
pub struct PoissonExtension<T: Real> {
    domain: DomainSpec<T>,
    pad: usize,
    side: usize,
    fft_side: usize,
    levels: Vec<f64>,
    kernels: Vec<Spectral<T>>,
    normalization: f64,
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < 16 {
        return Err(Error::Precondition(format!("{} z-levels given, at least 16 needed", levels.len())));
    }
    if levels[0] <= 0.0 || levels.windows(2).any(|w| !(w[1] > w[0])) || !levels.iter().all(|z| z.is_finite()) {
        return Err(Error::Precondition("z-levels must be positive, finite and strictly increasing".into()));
    }
    Ok(())
}

/// Offsets and weights of the images of a periodic offset along one axis: |m| ≤ 2 around the
/// representative in (-p/2, p/2], the two outermost halves when the representative is p/2.
fn images(delta: isize, p: usize) -> Vec<(usize, f64)> {
    let p = p as isize;
    let r = if delta > p / 2 { delta - p } else { delta };
    if 2 * r == p {
        (-3..=2).map(|m| ((r + m * p).unsigned_abs(), if m == -3 || m == 2 { 0.5 } else { 1.0 })).collect()
    } else {
        (-2..=2).map(|m| ((r + m * p).unsigned_abs(), 1.0)).collect()
    }
}

impl<T: Real> PoissonExtension<T> {
    /// `pad` defaults to ⌈z_max/h⌉ in free mode and must be absent or zero on the torus.
    pub fn new(domain: &DomainSpec<T>, levels: &[f64], pad: Option<usize>) -> Result<Self> {
        check_levels(levels)?;
        let n = domain.n();
        let p = domain.side();
        let h = domain.cell_size().f64();
        let zmax = levels[levels.len() - 1];
        let need = (zmax / h - 1e-9).ceil().max(0.0) as usize;
        let pad = match (domain.is_periodic(), pad) {
            (true, None | Some(0)) => 0,
            (true, Some(k)) => return Err(Error::Padding(format!("{k} padding cells requested on a torus"))),
            (false, None) => need,
            (false, Some(k)) if k < need => {
                return Err(Error::Padding(format!("{k} padding cells cover less than the top level {zmax} (needs {need})")));
            }
            (false, Some(k)) => k,
        };
        let side = p + 2 * pad;
        let fft_side = if domain.is_periodic() { p } else { 2 * side };
        let cp = CellPoisson::new(n, domain.s().f64());
        let normalization = cp.normalization();
        let periodic = domain.is_periodic();
        let tables: Vec<Vec<f64>> = levels
            .par_iter()
            .map(|&z| {
                let t = z / h;
                if periodic {
                    let m = 5 * p / 2 + 1;
                    let abs = cp.abs_table(m, t);
                    let mut table = vec![0.0; p.pow(n as u32)];
                    for (flat, slot) in table.iter_mut().enumerate() {
                        let mut rem = flat;
                        let mut c = [0isize; 3];
                        for a in (0..n).rev() {
                            c[a] = (rem % p) as isize;
                            rem /= p;
                        }
                        let lists: Vec<Vec<(usize, f64)>> = (0..n).map(|a| images(c[a], p)).collect();
                        let mut total = 0.0;
                        let counts: Vec<usize> = lists.iter().map(|l| l.len()).collect();
                        let combos: usize = counts.iter().product();
                        for mut q in 0..combos {
                            let mut idx = 0;
                            let mut w = 1.0;
                            for a in 0..n {
                                let (o, wa) = lists[a][q % counts[a]];
                                q /= counts[a];
                                idx = idx * (m + 1) + o;
                                w *= wa;
                            }
                            total += w * abs[idx];
                        }
                        *slot = total;
                    }
                    let missing = (1.0 - table.iter().sum::<f64>()) / table.len() as f64;
                    table.iter_mut().for_each(|v| *v += missing);
                    table
                } else {
                    let m = side - 1;
                    let abs = cp.abs_table(m, t);
                    let mut table = vec![0.0; fft_side.pow(n as u32)];
                    let span = 2 * side - 1;
                    for flat in 0..span.pow(n as u32) {
                        let mut rem = flat;
                        let mut off = [0isize; 3];
                        let mut idx = 0;
                        for a in (0..n).rev() {
                            off[a] = (rem % span) as isize - m as isize;
                            rem /= span;
                        }
                        for a in 0..n {
                            idx = idx * (m + 1) + off[a].unsigned_abs();
                        }
                        table[wrap_index(n, fft_side, &off)] = abs[idx];
                    }
                    table
                }
            })
            .collect();
        let kernels = tables
            .par_iter()
            .map(|t| {
                let lit: Vec<T> = t.iter().map(|&v| T::lit(v)).collect();
                Spectral::new(n, fft_side, &lit)
            })
            .collect();
        Ok(PoissonExtension { domain: domain.clone(), pad, side, fft_side, levels: levels.to_vec(), kernels, normalization })
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// u_E(·, z_k) = -1 + 2 W_k ⋆ 1_E on the evaluation grid, clamped to [-1, 1] against FFT
    /// roundoff.
    pub fn extend(&self, e: &[bool]) -> Result<ExtensionField<T>> {
        let d = &self.domain;
        if e.len() != d.len() {
            return Err(Error::DomainMismatch("E", "extension grid"));
        }
        let n = d.n();
        let q = self.fft_side;
        let mut big = vec![T::zero(); q.pow(n as u32)];
        let mut trace = vec![-T::one(); self.side.pow(n as u32)];
        for (i, &b) in e.iter().enumerate() {
            if b {
                let c = d.coords(i);
                big[c[..n].iter().fold(0, |acc, &x| acc * q + x + self.pad)] = T::one();
                trace[c[..n].iter().fold(0, |acc, &x| acc * self.side + x + self.pad)] = T::one();
            }
        }
        let two = T::lit(2.0);
        let values = self
            .kernels
            .par_iter()
            .map(|k| {
                let conv = k.convolve(&big);
                (0..trace.len())
                    .map(|j| {
                        let mut rem = j;
                        let mut idx = 0;
                        let mut mul = 1;
                        for _ in 0..n {
                            idx += (rem % self.side) * mul;
                            rem /= self.side;
                            mul *= q;
                        }
                        (two * conv[idx] - T::one()).max(-T::one()).min(T::one())
                    })
                    .collect()
            })
            .collect();
        Ok(ExtensionField {
            domain: d.clone(),
            pad: self.pad,
            side: self.side,
            levels: self.levels.clone(),
            values,
            trace,
            normalization: self.normalization,
        })
    }
}

/// One-shot extension of a single set.
pub fn poisson_extend<T: Real>(e: &[bool], domain: &DomainSpec<T>, levels: &[f64], pad: Option<usize>) -> Result<ExtensionField<T>> {
    PoissonExtension::new(domain, levels, pad)?.extend(e)
}

/// Extensions of every chamber 𝓔(0), ..., 𝓔(N); in free mode the exterior chamber includes the
/// outside of the box.
pub fn poisson_extend_cluster<T: Real>(grid: &LabelGrid<T>, levels: &[f64], pad: Option<usize>) -> Result<Vec<ExtensionField<T>>> {
    let op = PoissonExtension::new(grid.domain(), levels, pad)?;
    let mut out = Vec::with_capacity(grid.chambers() + 1);
    for h in 0..=grid.chambers() {
        out.push(chamber_field(&op, grid, h)?);
    }
    Ok(out)
}

fn chamber_field<T: Real>(op: &PoissonExtension<T>, grid: &LabelGrid<T>, h: usize) -> Result<ExtensionField<T>> {
    if h == 0 && !grid.domain().is_periodic() {
        let union: Vec<bool> = grid.labels().iter().map(|&l| l != 0).collect();
        let mut f = op.extend(&union)?;
        f.values.iter_mut().flatten().for_each(|v| *v = -*v);
        f.trace.iter_mut().for_each(|v| *v = -*v);
        Ok(f)
    } else {
        op.extend(&grid.mask(h))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// Every evaluation cell, 0 < z < top level.
    Slab,
    /// {|(x - center, z)| < radius, z > 0}, center in the base grid's physical coordinates.
    HalfBall { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DirichletEnergy {
    pub value: f64,
    /// The same quadrature on every other z-level.
    pub coarse: f64,
    pub self_difference: f64,
}

/// Squared centered-difference x-gradient on the evaluation grid (one-sided at free edges).
fn grad2<T: Real>(u: &[T], n: usize, side: usize, periodic: bool, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    let at = |j: usize| u[j].f64();
    for (j, o) in out.iter_mut().enumerate() {
        let mut rem = j;
        let mut stride = 1;
        let mut g = 0.0;
        for _ in 0..n {
            let c = rem % side;
            rem /= side;
            let down = if c > 0 {
                Some(j - stride)
            } else if periodic {
                Some(j + (side - 1) * stride)
            } else {
                None
            };
            let up = if c + 1 < side {
                Some(j + stride)
            } else if periodic {
                Some(j - (side - 1) * stride)
            } else {
                None
            };
            let d = match (down, up) {
                (Some(a), Some(b)) => (at(b) - at(a)) / (2.0 * h),
                (None, Some(b)) => (at(b) - at(j)) / h,
                (Some(a), None) => (at(j) - at(a)) / h,
                (None, None) => 0.0,
            };
            g += d * d;
            stride *= side;
        }
        *o = g;
    }
    out
}

/// Sub-cell Gauss points per axis used to clip cells against the half-ball.
const CAP_POINTS: usize = 4;

/// Height caps per evaluation cell as (weight, height) pairs with weights summing to the fraction
/// of the cell counted: one infinite cap for the slab, √(r² - |x - x₀|²) at sub-cell Gauss points
/// inside the half-ball.
fn caps<T: Real>(field: &ExtensionField<T>, region: &Region) -> Result<Vec<Vec<(f64, f64)>>> {
    let d = &field.domain;
    let n = d.n();
    let h = d.cell_size().f64();
    let top = field.levels[field.levels.len() - 1];
    let len = field.side.pow(n as u32);
    match region {
        Region::Slab => Ok(vec![vec![(1.0, top)]; len]),
        Region::HalfBall { center, radius } => {
            if center.len() != n {
                return Err(Error::DomainMismatch("center", "grid"));
            }
            let r = *radius;
            if !(r > 0.0) || r > top * (1.0 + 1e-12) {
                return Err(Error::Precondition(format!("half-ball radius {r} exceeds the top level {top}")));
            }
            let l = d.side_length().f64();
            if d.is_periodic() {
                if r > 0.5 * l {
                    return Err(Error::Precondition(format!("half-ball radius {r} exceeds half the torus {l}")));
                }
            } else {
                let lo = -(field.pad as f64) * h;
                let hi = l + field.pad as f64 * h;
                if center.iter().any(|&c| c - r < lo || c + r > hi) {
                    return Err(Error::Padding(format!("half-ball of radius {r} leaves the evaluation grid")));
                }
            }
            let rule = quad::gauss(CAP_POINTS);
            let subs = CAP_POINTS.pow(n as u32);
            let reach = r + h * (n as f64).sqrt();
            Ok((0..len)
                .into_par_iter()
                .map(|j| {
                    let mut rem = j;
                    let mut off = [0.0f64; 3];
                    for a in (0..n).rev() {
                        let c = rem % field.side;
                        rem /= field.side;
                        let mut x = (c as f64 - field.pad as f64) * h - center[a];
                        if d.is_periodic() {
                            x -= l * ((x + 0.5 * h) / l).round();
                        }
                        off[a] = x;
                    }
                    let mid2: f64 = off[..n].iter().map(|x| (x + 0.5 * h).powi(2)).sum();
                    if mid2 >= reach * reach {
                        return Vec::new();
                    }
                    let mut out = Vec::new();
                    for flat in 0..subs {
                        let (mut rem, mut w, mut r2) = (flat, 1.0, 0.0);
                        for x in &off[..n] {
                            let k = rem % CAP_POINTS;
                            rem /= CAP_POINTS;
                            let y = x + rule.x[k] * h;
                            r2 += y * y;
                            w *= rule.w[k];
                        }
                        if r2 < r * r {
                            out.push((w, (r * r - r2).sqrt()));
                        }
                    }
                    out
                })
                .collect())
        }
    }
}

/// ∫ z^a dz over [lo, hi].
fn weight(a: f64, lo: f64, hi: f64) -> f64 {
    (hi.powf(a + 1.0) - lo.powf(a + 1.0)) / (a + 1.0)
}

/// Σ_cells hⁿ ∫ z^a (|∇ₓu|² + (∂_z u)²) dz over the selected levels. Between levels ∂_z u is the
/// one-sided difference and |∇ₓu|² the mean of the two levels; below the first level
/// u - trace ∝ zˢ is integrated exactly.
fn energy_on<T: Real>(field: &ExtensionField<T>, caps: &[Vec<(f64, f64)>], pick: &[usize]) -> f64 {
    let d = &field.domain;
    let n = d.n();
    let h = d.cell_size().f64();
    let a = field.a();
    let s = d.s().f64();
    let periodic = d.is_periodic();
    let mut total = vec![0.0; caps.len()];
    let z0 = field.levels[pick[0]];
    let mut g_prev = grad2(&field.values[pick[0]], n, field.side, periodic, h);
    for (j, cap) in caps.iter().enumerate() {
        if cap.is_empty() {
            continue;
        }
        let amp = (field.values[pick[0]][j] - field.trace[j]).f64() / z0.powf(s);
        for &(w, zc) in cap {
            let zt = zc.min(z0);
            total[j] += w * (s * amp * amp * zt.powf(s) + g_prev[j] * weight(a, 0.0, zt));
        }
    }
    for win in pick.windows(2) {
        let (k0, k1) = (win[0], win[1]);
        let (lo, hi) = (field.levels[k0], field.levels[k1]);
        let g = grad2(&field.values[k1], n, field.side, periodic, h);
        let (u0, u1) = (&field.values[k0], &field.values[k1]);
        for (j, cap) in caps.iter().enumerate() {
            let mut wz = 0.0;
            for &(w, zc) in cap {
                if zc > lo {
                    wz += w * weight(a, lo, zc.min(hi));
                }
            }
            if wz == 0.0 {
                continue;
            }
            let dz = (u1[j] - u0[j]).f64() / (hi - lo);
            total[j] += wz * (dz * dz + 0.5 * (g_prev[j] + g[j]));
        }
        g_prev = g;
    }
    total.iter().sum::<f64>() * h.powi(n as i32)
}

/// Weighted Dirichlet energy of one field over the slab or a half-ball, with the self-difference
/// against every other z-level.
pub fn dirichlet_energy<T: Real>(field: &ExtensionField<T>, region: &Region) -> Result<DirichletEnergy> {
    let caps = caps(field, region)?;
    let all: Vec<usize> = (0..field.levels.len()).collect();
    let half: Vec<usize> = (0..field.levels.len()).step_by(2).collect();
    let value = energy_on(field, &caps, &all);
    let coarse = energy_on(field, &caps, &half);
    Ok(DirichletEnergy { value, coarse, self_difference: (value - coarse).abs() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PhiProfile {
    pub cell: Option<usize>,
    pub center: Vec<f64>,
    pub s: f64,
    pub radii: Vec<f64>,
    /// Extrapolated Φ(r_k).
    pub phi: Vec<f64>,
    /// Φ on the grid itself and on the grid refined once.
    pub phi_coarse: Vec<f64>,
    pub phi_fine: Vec<f64>,
    pub errors: Vec<f64>,
    /// Smallest Λ′ ≥ 0 making Φ + Λ′rˢ nondecreasing within the errors.
    pub lambda_prime: f64,
}

impl PhiProfile {
    /// A profile from given values, for audits of external data.
    pub fn from_values(s: f64, radii: Vec<f64>, phi: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        if radii.len() != phi.len() || radii.len() != errors.len() {
            return Err(Error::Precondition("radii, values and errors differ in length".into()));
        }
        let lambda_prime = minimal_lambda(s, &radii, &phi, &errors);
        Ok(PhiProfile {
            cell: None,
            center: Vec::new(),
            s,
            radii,
            phi_coarse: phi.clone(),
            phi_fine: phi.clone(),
            phi,
            errors,
            lambda_prime,
        })
    }

    /// Rows `radius,phi,phiPlusTerm,errEstimate` with the term Λ′rˢ.
    pub fn to_csv(&self, lambda_prime: f64) -> String {
        let mut out = String::from("radius,phi,phiPlusTerm,errEstimate\n");
        for k in 0..self.radii.len() {
            let r = self.radii[k];
            out += &format!(
                "{},{},{},{}\n",
                fmt17(r),
                fmt17(self.phi[k]),
                fmt17(self.phi[k] + lambda_prime * r.powf(self.s)),
                fmt17(self.errors[k])
            );
        }
        out
    }
}

fn minimal_lambda(s: f64, radii: &[f64], phi: &[f64], errors: &[f64]) -> f64 {
    let mut lam = 0f64;
    for k in 1..radii.len() {
        let drop = phi[k - 1] - phi[k] - errors[k - 1] - errors[k];
        let gain = radii[k].powf(s) - radii[k - 1].powf(s);
        if drop > 0.0 && gain > 0.0 {
            lam = lam.max(drop / gain);
        }
    }
    lam
}

/// Splits every cell into 2ⁿ children with the parent's label.
fn refine<T: Real>(grid: &LabelGrid<T>) -> Result<LabelGrid<T>> {
    let d = grid.domain();
    let n = d.n();
    let dims: Vec<usize> = d.dims().iter().map(|&x| 2 * x).collect();
    let fine = make_domain(n, &dims, d.side_length(), d.mode(), d.s())?;
    let labels = (0..fine.len())
        .map(|i| {
            let c = fine.coords(i);
            let parent: Vec<usize> = c[..n].iter().map(|&x| x / 2).collect();
            grid.labels()[d.index(&parent)]
        })
        .collect();
    LabelGrid::new(fine, grid.chambers(), labels)
}

/// Σ_h half-ball energies of every chamber extension at each radius.
fn chamber_energies<T: Real>(grid: &LabelGrid<T>, center: &[f64], radii: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let levels = default_levels(grid.domain());
    let op = PoissonExtension::new(grid.domain(), &levels, None)?;
    let mut value = vec![0.0; radii.len()];
    let mut spread = vec![0.0; radii.len()];
    let periodic = grid.domain().is_periodic();
    for h in 0..=grid.chambers() {
        // The exterior field of a free box is minus the union field and has the same energy.
        let f = if h == 0 && !periodic {
            let union: Vec<bool> = grid.labels().iter().map(|&l| l != 0).collect();
            op.extend(&union)?
        } else {
            op.extend(&grid.mask(h))?
        };
        for (k, &r) in radii.iter().enumerate() {
            let e = dirichlet_energy(&f, &Region::HalfBall { center: center.to_vec(), radius: r })?;
            value[k] += e.value;
            spread[k] += e.self_difference;
        }
    }
    Ok((value, spread))
}

/// Mean of the midpoints of the faces of `x0` shared with differently labelled neighbors.
pub fn interface_point<T: Real>(grid: &LabelGrid<T>, x0: usize) -> Vec<f64> {
    let d = grid.domain();
    let n = d.n();
    let h = d.cell_size().f64();
    let own = grid.label(x0);
    let mut shift = vec![0.0; n];
    let mut faces = 0usize;
    for (a, sh) in shift.iter_mut().enumerate() {
        for dir in [-1isize, 1] {
            if d.neighbor(x0, a, dir).map_or(0, |j| grid.label(j)) != own {
                *sh += 0.5 * h * dir as f64;
                faces += 1;
            }
        }
    }
    let c = d.center(x0);
    (0..n).map(|a| c[a].f64() + if faces > 0 { shift[a] / faces as f64 } else { 0.0 }).collect()
}

/// Φ(r) = r^{-(n-s)} Σ_h ∫_{U_r⁺} z^a |∇u_{𝓔(h)}|² around the [`interface_point`] of boundary cell `x0`.
/// The energy is computed on the grid and on its 2ⁿ-fold refinement (same set) and
/// extrapolated with error ∝ h^a; the error estimate is the size of that correction plus the
/// z-level self-difference.
pub fn phi_profile<T: Real>(grid: &LabelGrid<T>, x0: usize, radii: &[f64]) -> Result<PhiProfile> {
    let d = grid.domain();
    chambers_at(grid, x0)?;
    if radii.is_empty() {
        return Err(Error::Precondition("phi_profile needs at least one radius".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("radii must be strictly increasing".into()));
    }
    let h = d.cell_size().f64();
    if radii[0] < 4.0 * h {
        return Err(Error::BelowResolution { radius: radii[0], min: 4.0 * h });
    }
    let n = d.n();
    let s = d.s().f64();
    let a = 1.0 - s;
    let center = interface_point(grid, x0);
    let (coarse, _) = chamber_energies(grid, &center, radii)?;
    let (fine, spread) = chamber_energies(&refine(grid)?, &center, radii)?;
    let factor = 2f64.powf(a) - 1.0;
    let scale: Vec<f64> = radii.iter().map(|r| r.powf(s - n as f64)).collect();
    let phi_coarse: Vec<f64> = coarse.iter().zip(&scale).map(|(e, c)| e * c).collect();
    let phi_fine: Vec<f64> = fine.iter().zip(&scale).map(|(e, c)| e * c).collect();
    let phi: Vec<f64> = phi_fine.iter().zip(&phi_coarse).map(|(f, c)| f + (f - c) / factor).collect();
    let errors: Vec<f64> = (0..radii.len()).map(|k| (phi[k] - phi_fine[k]).abs() + spread[k] * scale[k]).collect();
    let lambda_prime = minimal_lambda(s, radii, &phi, &errors);
    Ok(PhiProfile { cell: Some(x0), center, s, radii: radii.to_vec(), phi, phi_coarse, phi_fine, errors, lambda_prime })
}

/// Φ(r_k) + Λ′r_kˢ must not decrease by more than the two radii's error estimates.
pub fn check_monotonicity(profile: &PhiProfile, lambda_prime: f64) -> Result<CheckReport> {
    let k = profile.radii.len();
    if k < 4 {
        return Err(Error::Precondition(format!("monotonicity needs at least 4 radii, got {k}")));
    }
    let s = profile.s;
    let mut r = CheckReport::new("monotonicity", 0.0);
    let mut worst = f64::INFINITY;
    for j in 1..k {
        let prev = profile.phi[j - 1] + lambda_prime * profile.radii[j - 1].powf(s);
        let next = profile.phi[j] + lambda_prime * profile.radii[j].powf(s);
        let step = next - prev + profile.errors[j - 1] + profile.errors[j];
        worst = worst.min(step);
        r.fail_if(step < 0.0);
    }
    r.measure("increment.min", worst).bound("increment.min", 0.0);
    r.measure("lambdaPrime.minimal", profile.lambda_prime).bound("lambdaPrime.minimal", lambda_prime);
    r.note("lambdaPrime", lambda_prime).note("radii", profile.radii.clone()).note("tolerance", "errEstimate of both radii");
    if let Some(c) = profile.cell {
        r.note("cell", c);
    }
    Ok(r)
}

/// FCLS-style dump of a slab: the evaluation grid as the domain, one field per level, and the
/// levels on a `# z` comment line before the blank line.
pub fn serialize_slab<T: Real>(field: &ExtensionField<T>) -> Result<Vec<u8>> {
    let d = &field.domain;
    let h = d.cell_size().f64();
    let dims = vec![field.side; d.n()];
    let mode = if d.is_periodic() { BoundaryMode::Periodic } else { BoundaryMode::Free };
    let grid_domain = make_domain(d.n(), &dims, T::lit(field.side as f64 * h), mode, d.s())?;
    let k = field.levels.len();
    let mut out = Vec::new();
    crate::domain::write_header(&mut out, "FCLS", &grid_domain, k);
    let zs: Vec<String> = field.levels.iter().map(|&z| fmt17(z)).collect();
    out.extend_from_slice(format!("fields {k}\n# z {}\n\n", zs.join(" ")).as_bytes());
    for level in &field.values {
        for v in level {
            out.extend_from_slice(&v.f64().to_le_bytes());
        }
    }
    Ok(out)
}
