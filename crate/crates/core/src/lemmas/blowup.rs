//! Blow-up diagnostics at a boundary point: chamber occupancy and flatness per scale.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::domain::LabelGrid;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::density::{chambers_at, label_at, shifted, sorted_offsets};

const REGULAR_OCCUPANCY: f64 = 0.98;
const REGULAR_FLATNESS: f64 = 0.1;
const SINGULAR_OCCUPANCY: f64 = 0.9;
const SINGULAR_FLATNESS: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BlowupClass {
    #[serde(rename = "regular-like")]
    RegularLike,
    #[serde(rename = "singular-like")]
    SingularLike,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl fmt::Display for BlowupClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlowupClass::RegularLike => "regular-like",
            BlowupClass::SingularLike => "singular-like",
            BlowupClass::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleReport {
    pub radius: f64,
    /// Share of B_r(x) held by the two largest chambers.
    pub occupancy: f64,
    /// Two-sided Hausdorff distance between interface and fitted hyperplane inside B_r(x), over r.
    pub flatness: f64,
    /// The two largest chambers, ascending.
    pub pair: [usize; 2],
    pub interface_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BlowupReport {
    pub cell: usize,
    pub center: Vec<f64>,
    pub scales: Vec<ScaleReport>,
    pub class: BlowupClass,
}

/// Least-squares hyperplane through `pts`: centroid, unit normal and in-plane basis.
fn fit_plane(pts: &[[f64; 3]], n: usize) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let m = pts.len() as f64;
    let c: Vec<f64> = (0..n).map(|a| pts.iter().map(|p| p[a]).sum::<f64>() / m).collect();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for p in pts {
        let v = DVector::from_iterator(n, (0..n).map(|a| p[a] - c[a]));
        cov += &v * v.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let col = |k: usize| eig.eigenvectors.column(k).iter().copied().collect::<Vec<f64>>();
    let normal = col(order[0]);
    let basis = order[1..].iter().map(|&k| col(k)).collect();
    (c, normal, basis)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// One scale: cells with center in B_r(x), interface points at midpoints of faces between
/// differently labelled cells, and the plane sampled on a lattice of spacing h inside B_r(x).
fn scale<T: Real>(grid: &LabelGrid<T>, x: usize, r: f64) -> ScaleReport {
    let d = grid.domain();
    let n = d.n();
    let h = d.cell_size().f64();
    let offs = sorted_offsets(n, r / h);
    let mut counts = vec![0usize; grid.chambers() + 1];
    let mut pts: Vec<[f64; 3]> = Vec::new();
    for (o, _) in &offs {
        let here = label_at(grid, shifted(d, x, o));
        counts[here] += 1;
        for a in 0..n {
            let mut next = *o;
            next[a] += 1;
            if label_at(grid, shifted(d, x, &next)) == here {
                continue;
            }
            let mut p = [0.0; 3];
            for b in 0..n {
                p[b] = o[b] as f64 * h;
            }
            p[a] += 0.5 * h;
            if p.iter().map(|v| v * v).sum::<f64>() < r * r {
                pts.push(p);
            }
        }
    }
    let total: usize = counts.iter().sum();
    let mut ranked: Vec<usize> = (0..counts.len()).collect();
    ranked.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let top = [ranked[0], *ranked.get(1).unwrap_or(&ranked[0])];
    let two = counts[top[0]] + if top[1] != top[0] { counts[top[1]] } else { 0 };
    let pair = [top[0].min(top[1]), top[0].max(top[1])];
    if pts.is_empty() {
        return ScaleReport { radius: r, occupancy: two as f64 / total as f64, flatness: 0.0, pair, interface_points: 0 };
    }
    let (c, normal, basis) = fit_plane(&pts, n);
    let mut haus = 0f64;
    for p in &pts {
        let off: f64 = (0..n).map(|a| (p[a] - c[a]) * normal[a]).sum();
        haus = haus.max(off.abs());
    }
    // Plane samples c + Σ t_j e_j with |t_j| ≤ 2r, kept inside the ball.
    let k = (2.0 * r / h).ceil() as isize;
    let dims = n - 1;
    let mut idx = vec![-k; dims];
    loop {
        let q: Vec<f64> = (0..n).map(|a| c[a] + (0..dims).map(|j| idx[j] as f64 * h * basis[j][a]).sum::<f64>()).collect();
        if q.iter().map(|v| v * v).sum::<f64>() < r * r {
            let near = pts.iter().map(|p| dist(&p[..n], &q)).fold(f64::INFINITY, f64::min);
            haus = haus.max(near);
        }
        let mut j = 0;
        while j < dims {
            idx[j] += 1;
            if idx[j] <= k {
                break;
            }
            idx[j] = -k;
            j += 1;
        }
        if j == dims {
            break;
        }
    }
    ScaleReport { radius: r, occupancy: two as f64 / total as f64, flatness: haus / r, pair, interface_points: pts.len() }
}

/// Occupancy and flatness of the blow-up at cell `x` over decreasing `scales`. Regular-like when
/// occupancy ≥ 0.98 and flatness ≤ 0.1 at the two smallest scales; singular-like when occupancy
/// < 0.9 or flatness > 0.2 at both; inconclusive otherwise. Free-mode cells outside the box
/// count as the exterior chamber.
pub fn blowup<T: Real>(grid: &LabelGrid<T>, x: usize, scales: &[f64]) -> Result<BlowupReport> {
    let d = grid.domain();
    chambers_at(grid, x)?;
    if scales.is_empty() {
        return Err(Error::Precondition("blowup needs at least one scale".into()));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("scales must be strictly decreasing".into()));
    }
    let h = d.cell_size().f64();
    let smallest = scales[scales.len() - 1];
    if smallest < 4.0 * h {
        return Err(Error::BelowResolution { radius: smallest, min: 4.0 * h });
    }
    let reports: Vec<ScaleReport> = scales.iter().map(|&r| scale(grid, x, r)).collect();
    let last = &reports[reports.len().saturating_sub(2)..];
    let class = if last.iter().all(|s| s.occupancy >= REGULAR_OCCUPANCY && s.flatness <= REGULAR_FLATNESS) {
        BlowupClass::RegularLike
    } else if last.iter().all(|s| s.occupancy < SINGULAR_OCCUPANCY || s.flatness > SINGULAR_FLATNESS) {
        BlowupClass::SingularLike
    } else {
        BlowupClass::Inconclusive
    };
    Ok(BlowupReport { cell: x, center: d.center(x)[..d.n()].iter().map(|v| v.f64()).collect(), scales: reports, class })
}
