//! Greedy selection of unit balls that capture all but ε of a set.

use serde::Serialize;

use crate::domain::mask_count;
use crate::energy::perimeter;
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

use super::density::{shifted, sorted_offsets};
use super::edt::distance_to;
use super::PaperConstants;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Nucleation {
    /// Chosen cells; the points are their centers.
    pub cells: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    /// |E ∩ B_1(x)| per point.
    pub densities: Vec<f64>,
    pub density_bound: f64,
    /// |E ∖ ∪ B_2(x)|.
    pub residual: f64,
    pub epsilon: f64,
    pub epsilon_bound: f64,
    pub cardinality_bound: f64,
    /// Smallest pairwise distance, infinite for fewer than two points.
    pub min_distance: f64,
    pub volume: f64,
    pub perimeter: f64,
}

/// min{|E|, (1-s)P_s(E)/(χ₁χ₂)}.
pub fn nucleation_epsilon_bound<T: Real>(e: &[bool], kernel: &KernelTensor<T>, constants: &PaperConstants) -> Result<f64> {
    let d = kernel.domain();
    let vol = mask_count(e) as f64 * d.cell_volume().f64();
    let p = perimeter(e, kernel)?.f64();
    Ok(vol.min((1.0 - d.s().f64()) * p / (constants.chi1 * constants.chi2)))
}

/// While |E ∖ ∪B₂(x_i)| ≥ ε, adds the cell of E farther than 2 from every chosen point with the
/// largest |E ∩ B₁(x)| (lowest index on ties). Lengths are physical; ε may exceed its bound by
/// a relative 1e-9 to absorb quadrature rounding in P_s(E).
pub fn nucleate<T: Real>(e: &[bool], eps: f64, kernel: &KernelTensor<T>, constants: &PaperConstants) -> Result<Nucleation> {
    let d = kernel.domain();
    if e.len() != d.len() {
        return Err(Error::DomainMismatch("E", "kernel"));
    }
    let count = mask_count(e);
    if count == 0 {
        return Err(Error::Precondition("nucleation needs |E| > 0".into()));
    }
    if d.is_periodic() && d.side_length().f64() < 4.0 {
        return Err(Error::Precondition("the torus must be at least 4 long to hold balls of radius 2".into()));
    }
    let s = d.s().f64();
    let n = d.n() as f64;
    let v = d.cell_volume().f64();
    let vol = count as f64 * v;
    let p = perimeter(e, kernel)?.f64();
    let bound = vol.min((1.0 - s) * p / (constants.chi1 * constants.chi2));
    if !(eps > 0.0) || eps > bound * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!("epsilon {eps} must lie in (0, {bound}]")));
    }
    let density_bound = (constants.chi1 * eps / ((1.0 - s) * p)).powf(n / s);
    let cardinality_bound = vol * ((1.0 - s) * p / (constants.chi1 * eps)).powf(n / s);
    let h = d.cell_size().f64();
    let offs = sorted_offsets(d.n(), 1.0 / h);
    let density: Vec<f64> = (0..d.len())
        .map(|i| if e[i] { offs.iter().filter(|(o, _)| shifted(d, i, o).is_some_and(|j| e[j])).count() as f64 * v } else { 0.0 })
        .collect();
    let mut chosen = vec![false; d.len()];
    let mut cells = Vec::new();
    let mut residual;
    loop {
        let dist: Vec<f64> =
            if cells.is_empty() { vec![f64::INFINITY; d.len()] } else { distance_to(d, &chosen).into_iter().map(|x| x.f64()).collect() };
        residual = (0..d.len()).filter(|&i| e[i] && dist[i] >= 2.0).count() as f64 * v;
        if residual < eps {
            break;
        }
        let mut best: Option<usize> = None;
        for i in 0..d.len() {
            if e[i] && dist[i] > 2.0 && best.is_none_or(|b| density[i] > density[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else {
            return Err(Error::NoAdmissiblePoint(format!(
                "residual {residual} ≥ ε = {eps} but no cell of E lies farther than 2 from the chosen points"
            )));
        };
        if density[b] < density_bound {
            return Err(Error::NoAdmissiblePoint(format!(
                "best candidate cell {b} has |E ∩ B_1| = {} below the bound {density_bound}",
                density[b]
            )));
        }
        chosen[b] = true;
        cells.push(b);
    }
    let mut min_distance = f64::INFINITY;
    for (a, &i) in cells.iter().enumerate() {
        for &j in &cells[a + 1..] {
            min_distance = min_distance.min(d.center_distance(i, j).f64());
        }
    }
    let points = cells.iter().map(|&i| d.center(i)[..d.n()].iter().map(|x| x.f64()).collect()).collect();
    let densities = cells.iter().map(|&i| density[i]).collect();
    Ok(Nucleation {
        cells,
        points,
        densities,
        density_bound,
        residual,
        epsilon: eps,
        epsilon_bound: bound,
        cardinality_bound,
        min_distance,
        volume: vol,
        perimeter: p,
    })
}
