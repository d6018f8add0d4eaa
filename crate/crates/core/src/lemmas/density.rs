//! Volume and perimeter density estimates at boundary points, and the infiltration scan.

use crate::domain::{DomainSpec, LabelGrid};
use crate::energy::perimeter_unchecked;
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

use super::{CheckReport, PaperConstants};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityBounds {
    /// Lower volume density c₀.
    pub c0: f64,
    /// Upper volume density c₁.
    pub c1: f64,
    /// Perimeter growth constant C₀.
    pub perimeter: f64,
    /// Infiltration threshold σ₀.
    pub sigma0: f64,
}

impl DensityBounds {
    /// c₀ and σ₀ = c₀|B| from the infiltration proof, c₁ = 1 - c₀ and C₀ from the perimeter bound.
    pub fn from_constants(pc: &PaperConstants) -> Self {
        DensityBounds { c0: pc.c0, c1: 1.0 - pc.c0, perimeter: pc.c0_perimeter, sigma0: pc.sigma0 }
    }

    /// Given densities, σ₀ = c₀|B| and the constants' C₀.
    pub fn with_densities(pc: &PaperConstants, c0: f64, c1: f64) -> Self {
        DensityBounds { c0, c1, perimeter: pc.c0_perimeter, sigma0: c0 * pc.ball_volume }
    }
}

/// Integer offsets with |δ| < rmax cells, sorted by length then lexicographically.
pub(crate) fn sorted_offsets(n: usize, rmax: f64) -> Vec<([isize; 3], f64)> {
    let k = rmax.ceil() as isize;
    let mut out = Vec::new();
    let range = |a: usize| if a < n { -k..=k } else { 0..=0 };
    for x in range(0) {
        for y in range(1) {
            for z in range(2) {
                let r2 = (x * x + y * y + z * z) as f64;
                if r2 < rmax * rmax {
                    out.push(([x, y, z], r2.sqrt()));
                }
            }
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    out
}

/// Cell at `base + δ`, wrapping on the torus; `None` outside a free box.
pub(crate) fn shifted<T: Real>(d: &DomainSpec<T>, base: usize, delta: &[isize; 3]) -> Option<usize> {
    let p = d.side() as isize;
    let c = d.coords(base);
    let mut out = [0usize; 3];
    for a in 0..d.n() {
        let x = c[a] as isize + delta[a];
        out[a] = if (0..p).contains(&x) {
            x as usize
        } else if d.is_periodic() {
            x.rem_euclid(p) as usize
        } else {
            return None;
        };
    }
    Some(d.index(&out))
}

/// Label of a neighbor slot, with the free-mode outside counted as the exterior chamber.
pub(crate) fn label_at<T: Real>(grid: &LabelGrid<T>, cell: Option<usize>) -> usize {
    cell.map_or(0, |j| grid.label(j))
}

/// Chambers whose boundary passes through cell `x`: its own label and those of differing axis
/// neighbors. Errors when no neighbor differs.
pub(crate) fn chambers_at<T: Real>(grid: &LabelGrid<T>, x: usize) -> Result<Vec<usize>> {
    let d = grid.domain();
    if x >= d.len() {
        return Err(Error::Precondition(format!("cell {x} outside the grid")));
    }
    let own = grid.label(x);
    let mut out = vec![own];
    for a in 0..d.n() {
        for dir in [-1, 1] {
            let l = label_at(grid, d.neighbor(x, a, dir));
            if !out.contains(&l) {
                out.push(l);
            }
        }
    }
    if out.len() < 2 {
        return Err(Error::NotOnBoundary);
    }
    out.sort_unstable();
    Ok(out)
}

/// Volume densities of the chambers meeting at `x` and the local perimeter sum
/// Σ_h P_s(𝓔(h) ∩ B_r(x)) at each radius, against c₀ωₙrⁿ, c₁ωₙrⁿ and C₀r^{n-s}. The volume
/// comparisons allow ωₙ((r+δ)ⁿ - rⁿ) with δ = h√n/2.
pub fn check_density<T: Real>(
    grid: &LabelGrid<T>,
    x: usize,
    radii: &[f64],
    constants: &PaperConstants,
    bounds: &DensityBounds,
    kernel: &KernelTensor<T>,
) -> Result<CheckReport> {
    grid.domain().check_same(kernel.domain(), "grid", "kernel")?;
    let d = grid.domain();
    let present = chambers_at(grid, x)?;
    let h = d.cell_size().f64();
    let n = d.n();
    let nf = n as f64;
    let s = d.s().f64();
    let omega = constants.ball_volume;
    let delta = 0.5 * h * nf.sqrt();
    let v = d.cell_volume().f64();
    let mut r = CheckReport::new("density", 0.0);
    r.note("cell", x).note("chambers", present.clone()).note("slack", "omega_n((r+h*sqrt(n)/2)^n - r^n)");
    r.note("c0", bounds.c0).note("c1", bounds.c1).note("C0", bounds.perimeter);
    for &rad in radii {
        if rad < 2.0 * h {
            return Err(Error::BelowResolution { radius: rad, min: 2.0 * h });
        }
        if rad >= constants.r1 {
            return Err(Error::Precondition(format!("radius {rad} is not below r1 = {}", constants.r1)));
        }
        let offs = sorted_offsets(n, rad / h);
        let mut counts = vec![0usize; grid.chambers() + 1];
        let mut masks = vec![vec![false; d.len()]; grid.chambers() + 1];
        for (o, _) in &offs {
            let cell = shifted(d, x, o);
            if cell.is_none() {
                return Err(Error::Precondition(format!("ball of radius {rad} leaves the box")));
            }
            let l = label_at(grid, cell);
            counts[l] += 1;
            if let Some(j) = cell {
                masks[l][j] = true;
            }
        }
        let ball = omega * rad.powf(nf);
        let slack = omega * ((rad + delta).powf(nf) - rad.powf(nf));
        for &c in &present {
            let vol = counts[c] as f64 * v;
            let key = format!("r={rad}.h={c}");
            r.measure(&format!("{key}.fraction"), vol / ball);
            r.bound(&format!("{key}.fraction"), bounds.c0);
            r.fail_if(vol < bounds.c0 * ball - slack || vol > bounds.c1 * ball + slack);
        }
        let mut per = 0.0;
        for m in &masks {
            per += perimeter_unchecked(m, kernel)?.f64();
        }
        let cap = bounds.perimeter * rad.powf(nf - s);
        r.measure(&format!("r={rad}.perimeter"), per);
        r.bound(&format!("r={rad}.perimeter"), cap);
        r.fail_if(per > cap);
    }
    Ok(r)
}

/// Scans every (cell, radius) with radius = k·h, 2 ≤ k, radius < min(r₁, L/4). Whenever a chamber
/// holds at most σ₀rⁿ of B_r(x) it must be absent from B_{r/2-δ}(x), δ = h√n/2.
pub fn check_infiltration<T: Real>(grid: &LabelGrid<T>, constants: &PaperConstants, bounds: &DensityBounds) -> Result<CheckReport> {
    let d = grid.domain();
    let h = d.cell_size().f64();
    let n = d.n();
    let nf = n as f64;
    let delta = 0.5 * h * nf.sqrt();
    let cap = constants.r1.min(0.25 * d.side_length().f64());
    let radii: Vec<f64> = (2..).map(|k| k as f64 * h).take_while(|&r| r < cap).collect();
    let mut r = CheckReport::new("infiltration", 0.0);
    r.note("sigma0", bounds.sigma0).note("r1", constants.r1).note("inner", "r/2 - h*sqrt(n)/2").note("radii", radii.len());
    if radii.is_empty() {
        r.diagnostic = true;
        r.note("reason", "no radius of at least two cells lies below min(r1, L/4)");
        return Ok(r);
    }
    let rmax = radii[radii.len() - 1] / h;
    let offs = sorted_offsets(n, rmax);
    // Query radii in cell units: each r and its inner radius.
    let mut queries: Vec<f64> = Vec::new();
    for &rad in &radii {
        queries.push(rad / h);
        let inner = (0.5 * rad - delta) / h;
        if inner > 0.0 {
            queries.push(inner);
        }
    }
    queries.sort_by(f64::total_cmp);
    queries.dedup();
    let chambers = grid.chambers() + 1;
    let v = d.cell_volume().f64();
    let mut violations = 0usize;
    let mut examples = Vec::new();
    let mut checked = 0usize;
    for x in 0..d.len() {
        let mut counts = vec![0usize; chambers];
        let mut snaps: Vec<Vec<usize>> = Vec::with_capacity(queries.len());
        let mut k = 0;
        for &q in &queries {
            while k < offs.len() && offs[k].1 < q {
                counts[label_at(grid, shifted(d, x, &offs[k].0))] += 1;
                k += 1;
            }
            snaps.push(counts.clone());
        }
        let at = |q: f64| &snaps[queries.partition_point(|&z| z < q)];
        for &rad in &radii {
            let outer = at(rad / h);
            let inner_q = (0.5 * rad - delta) / h;
            let threshold = bounds.sigma0 * rad.powf(nf);
            for c in 0..chambers {
                if outer[c] as f64 * v <= threshold {
                    checked += 1;
                    if inner_q > 0.0 && at(inner_q)[c] > 0 {
                        violations += 1;
                        if examples.len() < 8 {
                            examples.push(serde_json::json!({"cell": x, "radius": rad, "chamber": c}));
                        }
                    }
                }
            }
        }
    }
    r.measure("violations", violations as f64).bound("violations", 0.0).measure("triggered", checked as f64);
    r.note("examples", examples);
    r.fail_if(violations > 0);
    Ok(r)
}
